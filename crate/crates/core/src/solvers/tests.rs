use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use super::*;
use crate::error::Error;
use crate::functionals::{evaluate_phi, evaluate_s, FunctionalParams};
use crate::geometry::MagneticSystem;
use crate::loopspace::DiscreteLoop;
use crate::systems::{flat_larmor, flat_plane, flat_torus, sphere_cap};

fn params(e: f64, t: f64) -> FunctionalParams<f64> {
    FunctionalParams::new(e, t).unwrap()
}

fn larmor_radius(b: f64, e: f64, t: f64) -> f64 {
    ((b / (2.0 * PI) - 2.0 * e) / (1.0 + t)).powf(1.0 / (t - 1.0)) / (2.0 * PI)
}

fn clockwise(sys: &Arc<MagneticSystem<f64>>, count: usize, r: f64) -> DiscreteLoop<f64> {
    DiscreteLoop::from_fn(sys.clone(), count, |t: f64| vec![-r * (2.0 * PI * t).cos(), r * (2.0 * PI * t).sin()]).unwrap()
}

fn latitudes(members: usize, p: &FunctionalParams<f64>) -> SweepoutFamily<f64> {
    let sys = Arc::new(sphere_cap(0.0).unwrap());
    let (lo, hi) = (0.2, PI - 0.2);
    SweepoutFamily::from_fn(&sys, members, 64, p, |s, t| vec![lo + (hi - lo) * s, 2.0 * PI * t]).unwrap()
}

#[test]
fn tiny_loop_collapses() {
    let sys = Arc::new(flat_plane("torus", "0", "(1e-1)*sin(x1)", 5.0).unwrap());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0) * 0.01).collect();
    let start = DiscreteLoop::from_fn(sys, 64, |t: f64| {
        let w = 2.0 * PI * t;
        vec![
            0.3 + c[0] * w.cos() + c[1] * w.sin() + c[2] * (2.0 * w).cos(),
            -0.2 + c[4] * w.cos() + c[5] * w.sin() + c[6] * (2.0 * w).sin(),
        ]
    })
    .unwrap();
    let p = params(0.1, 0.5);
    let (cp, trace) = descend_with(&start, &p, &DescentOptions::default()).unwrap();
    assert_eq!(cp.status, DescentStatus::Collapsed, "{:?} after {}", cp.status, cp.iterations);
    assert!(cp.length < 1e-4);
    assert!(trace.values.windows(2).all(|w| w[1] <= w[0]));
    assert!(trace.energy_checks > 0);
}

#[test]
fn periodic_torus_loop_collapses() {
    let sys = Arc::new(flat_torus(0.1).unwrap());
    let start = DiscreteLoop::from_fn(sys, 64, |t: f64| {
        let w = 2.0 * PI * t;
        vec![1.0 + 0.01 * w.cos(), 2.0 + 0.005 * w.sin() + 0.002 * (2.0 * w).cos()]
    })
    .unwrap();
    let cp = descend(&start, &params(0.1, 0.5), 2000).unwrap();
    assert_eq!(cp.status, DescentStatus::Collapsed);
}

#[test]
fn perturbed_larmor_circle_converges_back() {
    let b = 8.0;
    let (e, t) = (0.4, 0.4);
    let sys = Arc::new(flat_larmor(b).unwrap());
    let r = larmor_radius(b, e, t);
    let exact = clockwise(&sys, 128, r);
    let p = params(e, t);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let noisy: Vec<f64> = exact.samples().iter().map(|&x| x + 0.01 * r * rng.gen_range(-1.0..1.0)).collect();
    let start = exact.with_samples(noisy).unwrap();
    let opts = DescentOptions {
        mode: DescentMode::Critical,
        budget: 50,
        ..DescentOptions::default()
    };
    let (cp, trace) = descend_with(&start, &p, &opts).unwrap();
    assert!(cp.converged(), "{:?}", trace.grad_norms);
    assert!(cp.grad_norm <= 1e-6);
    let v0 = evaluate_s(&exact, &p).unwrap();
    assert!((cp.value - v0).abs() <= 1e-6, "{} vs {v0}", cp.value);
    assert!((cp.length / (2.0 * PI) - r).abs() < 1e-5);
    assert!(cp.relative_speed_variation() <= 1e-3);
    // the Larmor circle is a mountain pass: one negative direction
    assert_eq!(cp.index, Some(1), "{:?}", cp.spectrum);
    assert!(trace.grad_norms.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn minimize_mode_is_monotone() {
    let sys = Arc::new(sphere_cap(0.0).unwrap());
    let start = DiscreteLoop::from_fn(sys, 64, |t: f64| {
        let w = 2.0 * PI * t;
        vec![1.2 + 0.1 * (2.0 * w).sin(), w]
    })
    .unwrap();
    let opts = DescentOptions {
        budget: 120,
        ..DescentOptions::default()
    };
    let (cp, trace) = descend_with(&start, &params(0.2, 0.3), &opts).unwrap();
    assert!(trace.values.windows(2).all(|w| w[1] <= w[0]));
    assert!(trace.resamples >= 1);
    assert!(cp.value < trace.values[0]);
}

#[test]
fn witness_direct_for_strong_field() {
    let sys = Arc::new(flat_plane("strong", "0", "-3*x1", 5.0).unwrap());
    let unit = DiscreteLoop::from_fn(sys.clone(), 128, |t: f64| vec![(2.0 * PI * t).cos(), (2.0 * PI * t).sin()]).unwrap();
    let s = evaluate_s(&unit, &FunctionalParams::limit()).unwrap();
    assert!((s - (2.0 * PI - 3.0 * PI)).abs() < 1e-5, "{s}");
    let w = negativity_witness(&sys, &WitnessSearch::default()).unwrap();
    assert!(matches!(w, Witness::Direct { .. }));
    assert!(w.value() < 0.0);
}

#[test]
fn witness_lifted_for_weak_field() {
    let sys = Arc::new(flat_plane("weak", "0", "-0.1*x1", 5.0).unwrap());
    let w = negativity_witness(&sys, &WitnessSearch::default()).unwrap();
    let Witness::Lifted {
        base,
        k,
        base_value,
        value,
        curve,
        ..
    } = &w
    else {
        panic!("expected a lift");
    };
    assert!(*base_value >= 0.0);
    assert!(*value < 0.0);
    let len = base.length().unwrap();
    let phi: f64 = evaluate_phi(base).unwrap();
    let len: f64 = len;
    assert!(phi < 0.0);
    assert!((*k as f64) > (len / phi).powi(2));
    assert_eq!(*k, 17);
    let expected = (*k as f64).sqrt() * len + *k as f64 * phi;
    assert!((value - expected).abs() <= 1e-9 * expected.abs());
    assert_eq!(curve.dim(), 2 * k);
}

#[test]
fn no_witness_without_field() {
    let sys = Arc::new(flat_plane::<f64>("free", "0", "0", 5.0).unwrap());
    let r = negativity_witness(&sys, &WitnessSearch::default());
    assert!(matches!(r, Err(Error::NoWitness)));
}

#[test]
fn sphere_sweepout_finds_the_equator() {
    let p = params(0.3, 0.3);
    let fam = latitudes(33, &p);
    assert!(!fam.endpoints_thrown_out());
    let opts = SweepoutOptions {
        rounds: 6,
        ..SweepoutOptions::default()
    };
    let res = sweepout_minimax_with(&fam, &p, &opts).unwrap();
    assert!(res.round_values.windows(2).all(|w| w[1] <= w[0]));
    assert!(res.saddle.converged());
    assert!((res.saddle.length - 2.0 * PI).abs() < 0.02 * 2.0 * PI, "{}", res.saddle.length);
    assert!(res.saddle.index.unwrap() >= 1);
}

#[test]
fn negative_family_is_rejected() {
    let sys = Arc::new(flat_larmor(8.0).unwrap());
    let p = params(0.1, 0.1);
    let fam = SweepoutFamily::from_fn(&sys, 9, 64, &p, |s, t| {
        let r = 3.0 - 0.5 * (PI * s).sin();
        vec![-r * (2.0 * PI * t).cos(), r * (2.0 * PI * t).sin()]
    })
    .unwrap();
    let r = sweepout_minimax(&fam, &p, 2);
    assert!(matches!(r, Err(Error::FamilyBelowZero { .. })), "{r:?}");
}

#[test]
fn schedule_stages() {
    let s = Schedule::<f64>::new(0.4, 0.4, 0.5, 1e-3).unwrap();
    let st = s.stages();
    assert_eq!(st.len(), 9);
    assert!((st[8].epsilon - 0.0015625).abs() < 1e-15);
    assert!(st.windows(2).all(|w| w[1].epsilon < w[0].epsilon && w[1].tau < w[0].tau));
    assert!(Schedule::new(0.4, 0.4, 1.0, 1e-3).is_err());
    assert!(Schedule::new(0.4, 0.4, 0.5, 0.0).is_err());
}

#[test]
fn limit_residual_of_the_limit_circle() {
    let b = 8.0;
    let sys = Arc::new(flat_larmor(b).unwrap());
    let c = clockwise(&sys, 128, 1.0 / b);
    assert!(limit_residual(&c, 2.0 * PI / b).unwrap() < 1e-6);
    assert!(limit_residual(&c, 2.0 * PI / b * 1.1).unwrap() > 0.1);
}

#[test]
fn sphere_continuation_stays_on_the_equator() {
    let sys = Arc::new(sphere_cap(0.0).unwrap());
    let seed = DiscreteLoop::from_fn(sys, 64, |t: f64| vec![FRAC_PI_2, 2.0 * PI * t]).unwrap();
    let sched = Schedule::new(0.3, 0.3, 0.5, 1e-2).unwrap();
    let run = continuation(&seed, &sched).unwrap();
    assert_eq!(run.stages.len(), run.schedule.len());
    for st in &run.stages {
        assert!((st.length - 2.0 * PI).abs() < 1e-3);
        assert!(st.relative_speed_variation() <= 1e-3);
    }
    assert!(run.limit_residual < 1e-5, "{}", run.limit_residual);
}

#[test]
fn larmor_continuation_tracks_closed_form() {
    let b = 8.0;
    let sys = Arc::new(flat_larmor(b).unwrap());
    let seed = clockwise(&sys, 128, larmor_radius(b, 0.4, 0.4));
    let sched = Schedule::new(0.4, 0.4, 0.5, 1e-3).unwrap();
    let run = continuation(&seed, &sched).unwrap();
    assert_eq!(run.stages.len(), 9);
    for (st, &(e, t)) in run.stages.iter().zip(&run.schedule) {
        let r = st.length / (2.0 * PI);
        assert!((r - larmor_radius(b, e, t)).abs() < 1e-3, "{e}: {r}");
    }
    let lim = run.limit.as_ref().unwrap();
    assert!(run.limit_residual < 1e-5);
    assert!((lim.multiplier - 2.0 * PI / b).abs() < 1e-6);
    assert!(run.converged);
}
