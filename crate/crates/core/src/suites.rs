//! Randomized invariant suites run by `magloop check`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::functionals::{
    energy_bound, evaluate_s, gradient, holder_slack, small_loop_radius, speed_inequality_slack, FunctionalParams,
};
use crate::geometry::MagneticSystem;
use crate::loopspace::{h1_inner, random_fourier_loop, DiscreteLoop, TangentField};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Smallest slack, or largest relative error for the gradient suite.
    pub worst: f64,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.cases > 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteSizes {
    pub holder_loops: usize,
    pub speed_triples: usize,
    pub gradient_loops: usize,
    pub small_loops: usize,
    pub energy_loops: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            holder_loops: 1000,
            speed_triples: 100_000,
            gradient_loops: 10,
            small_loops: 100,
            energy_loops: 100,
        }
    }
}

/// `E₀² ≤ E₁`.
pub fn holder_suite(sys: &Arc<MagneticSystem<f64>>, rng: &mut ChaCha8Rng, loops: usize) -> Result<SuiteOutcome> {
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..loops {
        let lp = random_fourier_loop(sys, rng, 64, 4, 0.2)?;
        let slack = holder_slack(&lp)?;
        let scale = crate::functionals::evaluate_e_theta(&lp, 1.0)?.max(1e-300);
        worst = worst.min(slack / scale);
        if slack < -1e-12 * scale {
            violations += 1;
        }
    }
    Ok(SuiteOutcome {
        name: "holder".into(),
        cases: loops,
        violations,
        worst,
    })
}

/// The two-vector inequality of the speed term, slack `≥ −1e-12`.
pub fn speed_inequality_suite(dim: usize, rng: &mut ChaCha8Rng, triples: usize) -> SuiteOutcome {
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..triples {
        let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let tau = rng.gen_range(0.0..1.0);
        let s = speed_inequality_slack(&u, &v, tau);
        worst = worst.min(s);
        if s < -1e-12 {
            violations += 1;
        }
    }
    SuiteOutcome {
        name: "speed_inequality".into(),
        cases: triples,
        violations,
        worst,
    }
}

pub fn random_direction(lp: &DiscreteLoop<f64>, rng: &mut impl Rng, modes: usize) -> Result<TangentField<f64>> {
    let n = lp.dim();
    let c: Vec<f64> = (0..n * (2 * modes + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    TangentField::from_fn(lp, |_, t| {
        (0..n)
            .map(|i| {
                let c = &c[i * (2 * modes + 1)..];
                let mut x = c[0];
                for k in 0..modes {
                    let w = std::f64::consts::TAU * (k + 1) as f64 * t;
                    x += c[1 + 2 * k] * w.cos() + c[2 + 2 * k] * w.sin();
                }
                x
            })
            .collect()
    })
}

/// H¹ gradient pairing against central differences along `exp`, relative
/// error `≤ 1e-4`.
pub fn gradient_suite(
    sys: &Arc<MagneticSystem<f64>>,
    rng: &mut ChaCha8Rng,
    loops: usize,
    p: &FunctionalParams<f64>,
) -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..loops {
        let lp = random_fourier_loop(sys, rng, 128, 3, 0.2)?;
        let g = gradient(&lp, p)?;
        let xi = random_direction(&lp, rng, 3)?;
        let pair = h1_inner(&g.field, &xi)?;
        let h = 1e-5 / xi.vectors().iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        let fd = match (lp.exp_perturb(&xi, h), lp.exp_perturb(&xi, -h)) {
            (Ok(a), Ok(b)) => (evaluate_s(&a, p)? - evaluate_s(&b, p)?) / (2.0 * h),
            _ => continue,
        };
        let err = (pair - fd).abs() / fd.abs().max(pair.abs()).max(1e-8);
        worst = worst.max(err);
        if err > 1e-4 {
            violations += 1;
        }
    }
    Ok(SuiteOutcome {
        name: "gradient".into(),
        cases: loops,
        violations,
        worst,
    })
}

/// Loops shorter than the small-loop radius have `S_{ε,τ} > 0`.
pub fn small_loop_suite(
    sys: &Arc<MagneticSystem<f64>>,
    rng: &mut ChaCha8Rng,
    loops: usize,
    p: &FunctionalParams<f64>,
) -> Result<SuiteOutcome> {
    let radius = small_loop_radius(sys, p.tau, 17)?.length;
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    let mut cases = 0;
    let mut attempts = 0;
    while cases < loops && attempts < 20 * loops {
        attempts += 1;
        let lp = random_fourier_loop(sys, rng, 64, 4, 0.2)?;
        let len = lp.length()?;
        if !(len > 0.0) {
            continue;
        }
        let anchor = lp.sample(0).to_vec();
        let mut target = radius * rng.gen_range(0.05..0.95);
        let mut small = None;
        for _ in 0..20 {
            let f = target / len;
            let s: Vec<f64> = lp
                .samples()
                .iter()
                .enumerate()
                .map(|(k, &x)| anchor[k % anchor.len()] + f * (x - anchor[k % anchor.len()]))
                .collect();
            let cand = lp.with_samples(s)?;
            if cand.length()? < radius {
                small = Some(cand);
                break;
            }
            target *= 0.5;
        }
        let Some(small) = small else { continue };
        let s = evaluate_s(&small, p)?;
        worst = worst.min(s);
        if !(s > 0.0) {
            violations += 1;
        }
        cases += 1;
    }
    Ok(SuiteOutcome {
        name: "small_loops".into(),
        cases,
        violations,
        worst,
    })
}

/// The a-priori `E₁` bound in terms of `S` and `max |A|` on random loops.
pub fn energy_suite(
    sys: &Arc<MagneticSystem<f64>>,
    rng: &mut ChaCha8Rng,
    loops: usize,
    p: &FunctionalParams<f64>,
) -> Result<SuiteOutcome> {
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..loops {
        let lp = random_fourier_loop(sys, rng, 64, 4, 0.2)?;
        let b = energy_bound(&lp, p)?;
        worst = worst.min(b.bound - b.energy);
        if !b.holds() {
            violations += 1;
        }
    }
    Ok(SuiteOutcome {
        name: "energy_bound".into(),
        cases: loops,
        violations,
        worst,
    })
}

pub fn run_all(
    sys: &Arc<MagneticSystem<f64>>,
    seed: u64,
    p: &FunctionalParams<f64>,
    sizes: &SuiteSizes,
) -> Result<Vec<SuiteOutcome>> {
    let rng = |k: u64| ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(k));
    Ok(vec![
        holder_suite(sys, &mut rng(1), sizes.holder_loops)?,
        speed_inequality_suite(sys.dim(), &mut rng(2), sizes.speed_triples),
        gradient_suite(sys, &mut rng(3), sizes.gradient_loops, p)?,
        small_loop_suite(sys, &mut rng(4), sizes.small_loops, p)?,
        energy_suite(sys, &mut rng(5), sizes.energy_loops, p)?,
    ])
}
