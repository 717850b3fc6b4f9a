use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{evaluate_s, FunctionalParams};
use crate::loopspace::DiscreteLoop;
use crate::scalar::Real;

use super::descent::{descend_with, DescentMode, DescentOptions};
use super::CriticalPoint;

/// A path of loops with fixed endpoints.
#[derive(Clone, Debug)]
pub struct SweepoutFamily<T> {
    loops: Vec<DiscreteLoop<T>>,
    endpoint_values: (T, T),
}

impl<T: Real> SweepoutFamily<T> {
    /// Every member must share system and sample count. The endpoints must
    /// lie strictly below the interior maximum of `S`.
    pub fn new(loops: Vec<DiscreteLoop<T>>, params: &FunctionalParams<T>) -> Result<Self> {
        if loops.len() < 3 {
            return Err(Error::InvalidFamily(format!("need at least 3 loops, got {}", loops.len())));
        }
        let first = &loops[0];
        if loops
            .iter()
            .any(|l| l.len() != first.len() || !std::sync::Arc::ptr_eq(l.system_arc(), first.system_arc()))
        {
            return Err(Error::InvalidFamily("members differ in system or sample count".into()));
        }
        let values = loops.iter().map(|l| evaluate_s(l, params)).collect::<Result<Vec<_>>>()?;
        let peak = values[1..values.len() - 1].iter().copied().fold(T::neg_infinity(), T::max);
        let ends = (values[0], values[values.len() - 1]);
        if !(ends.0 < peak && ends.1 < peak) {
            return Err(Error::InvalidFamily("endpoints are not below the interior maximum".into()));
        }
        Ok(Self {
            loops,
            endpoint_values: ends,
        })
    }

    /// `s ↦ f(s, t)` sampled at `members` values of `s ∈ [0, 1]`.
    pub fn from_fn(
        system: &std::sync::Arc<crate::geometry::MagneticSystem<T>>,
        members: usize,
        samples: usize,
        params: &FunctionalParams<T>,
        f: impl Fn(T, T) -> Vec<T>,
    ) -> Result<Self> {
        let last = T::from_usize_lossy(members.max(2) - 1);
        let loops = (0..members)
            .map(|k| {
                let s = T::from_usize_lossy(k) / last;
                DiscreteLoop::from_fn(system.clone(), samples, |t| f(s, t))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(loops, params)
    }

    pub fn loops(&self) -> &[DiscreteLoop<T>] {
        &self.loops
    }

    pub fn endpoint_values(&self) -> (T, T) {
        self.endpoint_values
    }

    /// Endpoints negative or near-constant (`S ≤ 1e-9`).
    pub fn endpoints_thrown_out(&self) -> bool {
        let ok = |v: T| v <= T::lit(1e-9);
        ok(self.endpoint_values.0) && ok(self.endpoint_values.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepoutOptions {
    pub rounds: usize,
    pub steps_per_round: usize,
    /// Family size after the first regrade.
    pub members: usize,
    pub polish_budget: usize,
    /// Relative size of the transverse kick before polishing.
    pub perturbation: f64,
    pub tolerance: f64,
}

impl Default for SweepoutOptions {
    fn default() -> Self {
        Self {
            rounds: 20,
            steps_per_round: 3,
            members: 33,
            polish_budget: 60,
            perturbation: 1e-3,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepoutResult<T> {
    pub value: T,
    pub saddle: CriticalPoint<T>,
    /// Max-over-family after each round; entry 0 is the input family.
    pub round_values: Vec<T>,
    pub max_member: usize,
    pub family: SweepoutFamily<T>,
}

pub fn sweepout_minimax<T: Real>(
    family: &SweepoutFamily<T>,
    params: &FunctionalParams<T>,
    budget: usize,
) -> Result<(T, CriticalPoint<T>)> {
    let opts = SweepoutOptions {
        rounds: budget,
        ..SweepoutOptions::default()
    };
    sweepout_minimax_with(family, params, &opts).map(|r| (r.value, r.saddle))
}

fn values<T: Real>(loops: &[DiscreteLoop<T>], p: &FunctionalParams<T>) -> Result<Vec<T>> {
    loops.par_iter().map(|l| evaluate_s(l, p)).collect()
}

fn argmax<T: Real>(v: &[T]) -> (usize, T) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bv), (i, x)| if x > bv { (i, x) } else { (bi, bv) })
}

/// Members placed at equal steps of `√(ΔS² + d²)`, `d` the RMS sample
/// distance, by piecewise-linear interpolation between neighbours.
fn regrade<T: Real>(loops: &[DiscreteLoop<T>], vals: &[T], members: usize) -> Result<Vec<DiscreteLoop<T>>> {
    let dim = loops[0].samples().len();
    let mut cumulative = vec![T::zero()];
    for w in loops.windows(2).zip(vals.windows(2)) {
        let (ls, vs) = w;
        let d2 = ls[0]
            .samples()
            .iter()
            .zip(ls[1].samples())
            .fold(T::zero(), |s, (&a, &b)| s + (a - b) * (a - b))
            / T::from_usize_lossy(dim);
        let dv = vs[1] - vs[0];
        let last = *cumulative.last().expect("non-empty");
        cumulative.push(last + (dv * dv + d2).sqrt());
    }
    let total = *cumulative.last().expect("non-empty");
    if !(total > T::zero()) {
        return Ok(loops.to_vec());
    }
    let mut out = Vec::with_capacity(members);
    let mut seg = 0;
    for k in 0..members {
        if k == 0 {
            out.push(loops[0].clone());
            continue;
        }
        if k + 1 == members {
            out.push(loops[loops.len() - 1].clone());
            continue;
        }
        let s = total * T::from_usize_lossy(k) / T::from_usize_lossy(members - 1);
        while seg + 2 < cumulative.len() && cumulative[seg + 1] <= s {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let u = if len > T::zero() { (s - cumulative[seg]) / len } else { T::zero() };
        let a = loops[seg].samples();
        let b = loops[seg + 1].samples();
        let mixed = a.iter().zip(b).map(|(&x, &y)| x + u * (y - x)).collect();
        out.push(loops[seg].with_samples(mixed)?);
    }
    Ok(out)
}

/// Max-over-family descent with frozen endpoints, then a Newton polish of
/// the top member.
pub fn sweepout_minimax_with<T: Real>(
    family: &SweepoutFamily<T>,
    params: &FunctionalParams<T>,
    opts: &SweepoutOptions,
) -> Result<SweepoutResult<T>> {
    let p = params;
    let members = opts.members.max(3);
    let mut loops = family.loops.clone();
    let mut vals = values(&loops, p)?;
    let mut peak = argmax(&vals).1;
    let mut round_values = vec![peak];
    if peak < T::zero() {
        return Err(Error::FamilyBelowZero { value: peak.to_f64_lossy() });
    }
    if loops.len() != members {
        loops = regrade(&loops, &vals, members)?;
        vals = values(&loops, p)?;
    }
    let step_opts = DescentOptions {
        budget: opts.steps_per_round,
        tolerance: opts.tolerance,
        mode: DescentMode::Minimize,
        resample_every: 0,
        check_energy_bound: false,
        spectrum: false,
        ..DescentOptions::default()
    };
    let last = loops.len() - 1;
    for _ in 0..opts.rounds {
        let moved: Vec<(DiscreteLoop<T>, T)> = loops
            .par_iter()
            .zip(vals.par_iter())
            .enumerate()
            .map(|(i, (l, &v))| {
                if i == 0 || i == last {
                    return (l.clone(), v);
                }
                match descend_with(l, p, &step_opts) {
                    Ok((cp, _)) if cp.value <= v => (cp.curve, cp.value),
                    _ => (l.clone(), v),
                }
            })
            .collect();
        loops = moved.iter().map(|(l, _)| l.clone()).collect();
        vals = moved.iter().map(|(_, v)| *v).collect();
        peak = argmax(&vals).1;
        if let Ok(candidate) = regrade(&loops, &vals, members) {
            if let Ok(cv) = values(&candidate, p) {
                if argmax(&cv).1 <= peak {
                    loops = candidate;
                    vals = cv;
                    peak = argmax(&vals).1;
                }
            }
        }
        round_values.push(peak);
        if peak < T::zero() {
            return Err(Error::FamilyBelowZero { value: peak.to_f64_lossy() });
        }
    }
    let (top, value) = argmax(&vals);
    let kicked = transverse_kick(&loops, top, T::lit(opts.perturbation))?;
    let polish = DescentOptions {
        budget: opts.polish_budget,
        tolerance: opts.tolerance,
        mode: DescentMode::Critical,
        ..DescentOptions::default()
    };
    let saddle = match descend_with(&kicked, p, &polish) {
        Ok((cp, _)) if cp.converged() => cp,
        _ => descend_with(&loops[top], p, &polish)?.0,
    };
    Ok(SweepoutResult {
        value,
        saddle,
        round_values,
        max_member: top,
        family: SweepoutFamily {
            endpoint_values: (vals[0], vals[last]),
            loops,
        },
    })
}

/// Adds `size·rms · sin(4πt)` on the first axis, with its component along
/// the family secant removed.
fn transverse_kick<T: Real>(loops: &[DiscreteLoop<T>], top: usize, size: T) -> Result<DiscreteLoop<T>> {
    let base = &loops[top];
    let n = base.dim();
    let count = base.len();
    let lo = &loops[top.saturating_sub(1)];
    let hi = &loops[(top + 1).min(loops.len() - 1)];
    let secant: Vec<T> = hi.samples().iter().zip(lo.samples()).map(|(&a, &b)| a - b).collect();
    let mut kick = vec![T::zero(); count * n];
    for m in 0..count {
        let t = T::from_usize_lossy(m) / T::from_usize_lossy(count);
        kick[m * n] = (T::lit(4.0) * T::PI() * t).sin();
    }
    let ss = crate::scalar::dot(&secant, &secant);
    if ss > T::zero() {
        let c = crate::scalar::dot(&kick, &secant) / ss;
        kick.iter_mut().zip(&secant).for_each(|(k, &s)| *k = *k - c * s);
    }
    let rms = (crate::scalar::dot(base.samples(), base.samples()) / T::from_usize_lossy(count * n)).sqrt();
    let scale = size * rms.max(T::one());
    let samples = base.samples().iter().zip(&kick).map(|(&x, &k)| x + scale * k).collect();
    base.with_samples(samples)
}
