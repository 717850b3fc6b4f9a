use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::systems::{builtin_system, flat_larmor, flat_torus, sphere_cap, BUILTIN_NAMES};

fn larmor() -> Arc<MagneticSystem<f64>> {
    Arc::new(flat_larmor(8.0).unwrap())
}

fn circle(sys: Arc<MagneticSystem<f64>>, count: usize, r: f64) -> DiscreteLoop<f64> {
    DiscreteLoop::from_fn(sys, count, |t| vec![r * (2.0 * PI * t).cos(), r * (2.0 * PI * t).sin()]).unwrap()
}

fn latitude(colat: f64, count: usize) -> DiscreteLoop<f64> {
    let sys = Arc::new(sphere_cap(0.0).unwrap());
    DiscreteLoop::from_fn(sys, count, |t| vec![colat, 2.0 * PI * t]).unwrap()
}

#[test]
fn construction_checks() {
    let sys = larmor();
    assert_eq!(
        DiscreteLoop::new(sys.clone(), vec![0.0; 14]).unwrap_err(),
        Error::TooFewSamples(7)
    );
    assert!(matches!(
        DiscreteLoop::new(sys.clone(), vec![9.0; 16]),
        Err(Error::OutsideDomain { .. })
    ));
    let torus = Arc::new(flat_torus(1.0).unwrap());
    // a jump of half the period is ambiguous
    let mut s = vec![1.0; 16];
    s[3] = 1.0 + PI;
    assert_eq!(
        DiscreteLoop::new(torus.clone(), s).unwrap_err(),
        Error::WrapAmbiguity { index: 0, next: 1 }
    );
}

#[test]
fn winding_loops_are_lifted() {
    let torus = Arc::new(flat_torus(1.0).unwrap());
    let lp = DiscreteLoop::from_fn(torus, 64, |t| vec![(2.0 * PI * t) % (2.0 * PI), 1.0]).unwrap();
    assert!((lp.closing_shift()[0] - 2.0 * PI).abs() < 1e-12);
    assert_eq!(lp.closing_shift()[1], 0.0);
    let v = tangent_of(&lp).unwrap();
    for m in 0..64 {
        assert!((v.vector(m)[0] - 2.0 * PI).abs() < 1e-9);
    }
    assert!((lp.length().unwrap() - 2.0 * PI).abs() < 1e-12);
    let reduced = lp.reduced_samples();
    assert!(reduced.iter().all(|&x| (0.0..2.0 * PI).contains(&x)));
}

#[test]
fn tangent_examples() {
    let sys = larmor();
    let constant = DiscreteLoop::new(sys.clone(), [0.3, 0.1].repeat(16)).unwrap();
    assert!(tangent_of(&constant).unwrap().vectors().iter().all(|&v| v == 0.0));
    let c = circle(sys, 256, 1.0);
    let v = tangent_of(&c).unwrap();
    for m in 0..256 {
        let s = v.vector(m)[0].hypot(v.vector(m)[1]);
        assert!((s - 2.0 * PI).abs() < 1e-3);
    }
    let r = tangent_of(&c.reversed()).unwrap();
    for m in 0..256 {
        let back = (256 - m) % 256;
        for i in 0..2 {
            assert!((r.vector(m)[i] + v.vector(back)[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn h1_examples() {
    let sys = larmor();
    let constant = DiscreteLoop::new(sys.clone(), [0.0, 0.0].repeat(16)).unwrap();
    let zero = TangentField::zeros(&constant);
    assert_eq!(h1_inner(&zero, &zero).unwrap(), 0.0);
    let e1 = TangentField::from_fn(&constant, |_, _| vec![1.0, 0.0]).unwrap();
    assert!((h1_inner(&e1, &e1).unwrap() - 1.0).abs() < 1e-14);

    let c = circle(sys.clone(), 256, 1.0);
    let xi = TangentField::from_fn(&c, |_, t| vec![(2.0 * PI * t).sin(), 0.0]).unwrap();
    let expect = 0.5 + 0.5 * (2.0 * PI).powi(2);
    assert!((h1_inner(&xi, &xi).unwrap() - expect).abs() < 1e-2);

    let other = circle(sys, 256, 1.5);
    let eta = TangentField::zeros(&other);
    assert_eq!(h1_inner(&xi, &eta).unwrap_err(), Error::MismatchedLoops);
}

#[test]
fn gram_matrix_represents_h1() {
    let lp = latitude(1.0, 32);
    let m = h1_gram(&lp).unwrap();
    let xi = TangentField::from_fn(&lp, |k, t| vec![(2.0 * PI * t).sin() + 0.1 * k as f64, (4.0 * PI * t).cos()]).unwrap();
    let eta = TangentField::from_fn(&lp, |_, t| vec![t * (1.0 - t), 1.0 + (6.0 * PI * t).sin()]).unwrap();
    let direct = h1_inner(&xi, &eta).unwrap();
    let mv = m.mul_vec(eta.vectors());
    let via: f64 = xi.vectors().iter().zip(&mv).map(|(a, b)| a * b).sum();
    assert!((direct - via).abs() < 1e-12 * (1.0 + direct.abs()));
    assert!(m.cholesky().is_ok());
}

#[test]
fn transport_flat_is_trivial() {
    let c = circle(larmor(), 64, 1.0);
    let f = parallel_transport_frame(&c).unwrap();
    assert!(f.holonomy_defect <= 1e-12);
    for m in 0..64 {
        assert!((f.vector(m, 0)[0] - 1.0).abs() < 1e-14 && f.vector(m, 0)[1].abs() < 1e-14);
    }
}

#[test]
fn sphere_latitude_holonomy() {
    let f = parallel_transport_frame(&latitude(FRAC_PI_4, 512)).unwrap();
    let expect = 2.0 * PI * (1.0 - FRAC_PI_4.cos());
    let angle = f.holonomy_angle.unwrap();
    assert!((angle - expect).abs() < 1e-4, "{angle} vs {expect}");
    assert!((f.holonomy_defect - 2.0 * (expect / 2.0).sin()).abs() < 1e-4);

    let eq = parallel_transport_frame(&latitude(FRAC_PI_2, 512)).unwrap();
    assert!(eq.holonomy_defect <= 1e-6, "{}", eq.holonomy_defect);
}

#[test]
fn transported_frames_stay_orthonormal_and_parallel() {
    for name in BUILTIN_NAMES {
        let sys = Arc::new(builtin_system::<f64>(name).unwrap());
        let (lo0, hi0) = sys.domain_box()[0];
        let (lo1, hi1) = sys.domain_box()[1];
        let (c0, c1) = ((lo0 + hi0) / 2.0, (lo1 + hi1) / 2.0);
        let (r0, r1) = ((hi0 - lo0) / 5.0, (hi1 - lo1) / 5.0);
        let count = 128;
        let lp = DiscreteLoop::from_fn(sys.clone(), count, |t| {
            vec![c0 + r0 * (2.0 * PI * t).cos(), c1 + r1 * (2.0 * PI * t).sin() + 0.1 * r1 * (4.0 * PI * t).cos()]
        })
        .unwrap();
        let f = parallel_transport_frame(&lp).unwrap();
        for m in 0..count {
            let g = sys.metric_values::<f64>(lp.sample(m)).unwrap();
            let vs: Vec<Vec<f64>> = (0..2).map(|j| f.vector(m, j).to_vec()).collect();
            assert!(crate::geometry::gram_residual(2, &g, &vs) < 1e-8, "{name}");
        }
        // covariant increment per step is second order in the step
        let (edges, geo) = lp.edge_geometry().unwrap();
        let mut worst = 0.0f64;
        for e in 0..count - 1 {
            for j in 0..2 {
                let a = f.vector(e, j);
                let b = f.vector(e + 1, j);
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                let mut d = [0.0; 2];
                for i in 0..2 {
                    d[i] = b[i] - a[i];
                    for jj in 0..2 {
                        for k in 0..2 {
                            d[i] += geo[e].gamma(i, jj, k) * edges.velocity(e)[jj] / count as f64 * mid[k];
                        }
                    }
                }
                worst = worst.max(d[0].abs() + d[1].abs());
            }
        }
        assert!(worst < 50.0 / (count * count) as f64, "{name}: {worst}");
    }
}

#[test]
fn resample_examples() {
    let sys = larmor();
    let c = circle(sys.clone(), 256, 1.0);
    let r = resample(&c, 512, Interpolation::Linear).unwrap();
    assert_eq!(r.len(), 512);
    let (a, b) = (c.polygon_length().unwrap(), r.polygon_length().unwrap());
    assert!(((a - b) / a).abs() <= 1e-6);
    let rc = resample(&c, 512, Interpolation::Cubic).unwrap();
    assert!(((rc.polygon_length().unwrap() - a) / a).abs() <= 1e-3);

    let constant = DiscreteLoop::new(sys, [0.1, 0.2].repeat(16)).unwrap();
    let rr = resample(&constant, 32, Interpolation::Linear).unwrap();
    assert_eq!(rr.samples(), &[0.1, 0.2].repeat(32)[..]);
    assert_eq!(resample(&c, 4, Interpolation::Linear).unwrap_err(), Error::TooFewSamples(4));
}

#[test]
fn resample_handles_seam_and_nonuniform_input() {
    let torus = Arc::new(flat_torus(1.0).unwrap());
    let lp = DiscreteLoop::from_fn(torus, 40, |t: f64| {
        let s = t + 0.1 * (2.0 * PI * t).sin();
        vec![6.0 + 0.5 * (2.0 * PI * s).cos(), 1.0 + 0.5 * (2.0 * PI * s).sin()]
    })
    .unwrap();
    let r = resample(&lp, 40, Interpolation::Cubic).unwrap();
    let v = tangent_of(&r).unwrap();
    let speeds: Vec<f64> = (0..40).map(|m| v.vector(m)[0].hypot(v.vector(m)[1])).collect();
    let max = speeds.iter().cloned().fold(0.0, f64::max);
    let min = speeds.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((max - min) / max < 2e-2, "{min} {max}");
}

#[test]
fn exp_perturbation() {
    let c = circle(larmor(), 32, 1.0);
    let xi = TangentField::from_fn(&c, |_, t| vec![t, 1.0]).unwrap();
    let p = c.exp_perturb(&xi, 0.01).unwrap();
    for m in 0..32 {
        let t = m as f64 / 32.0;
        assert!((p.sample(m)[0] - c.sample(m)[0] - 0.01 * t).abs() < 1e-14);
        assert!((p.sample(m)[1] - c.sample(m)[1] - 0.01).abs() < 1e-14);
    }
    // geodesics of the sphere: the equator is invariant under tangential pushes
    let eq = latitude(FRAC_PI_2, 16);
    let along = TangentField::from_fn(&eq, |_, _| vec![0.0, 1.0]).unwrap();
    let q = eq.exp_perturb(&along, 0.3).unwrap();
    for m in 0..16 {
        assert!((q.sample(m)[0] - FRAC_PI_2).abs() < 1e-12);
        assert!((q.sample(m)[1] - eq.sample(m)[1] - 0.3).abs() < 1e-9);
    }
}

fn random_field(lp: &DiscreteLoop<f64>, c: &[f64]) -> TangentField<f64> {
    TangentField::from_fn(lp, |_, t| {
        let w = 2.0 * PI * t;
        vec![c[0] + c[1] * w.sin() + c[2] * (2.0 * w).cos(), c[3] + c[4] * w.cos() + c[5] * (3.0 * w).sin()]
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn h1_is_symmetric_bilinear_positive(
        a in prop::collection::vec(-1.0f64..1.0, 6),
        b in prop::collection::vec(-1.0f64..1.0, 6),
        s in -2.0f64..2.0,
    ) {
        let lp = latitude(1.2, 32);
        let xi = random_field(&lp, &a);
        let eta = random_field(&lp, &b);
        let ab = h1_inner(&xi, &eta).unwrap();
        let ba = h1_inner(&eta, &xi).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-13 * (1.0 + ab.abs()));
        let sum: Vec<f64> = xi.vectors().iter().zip(eta.vectors()).map(|(x, y)| s * x + y).collect();
        let comb = TangentField::new(&lp, sum).unwrap();
        let lhs = h1_inner(&comb, &xi).unwrap();
        let rhs = s * h1_inner(&xi, &xi).unwrap() + ba;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        let aa = h1_inner(&xi, &xi).unwrap();
        prop_assert!(aa >= 0.0);
        if a.iter().any(|&v| v.abs() > 1e-3) {
            prop_assert!(aa > 0.0);
        }
    }
}
