use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{MagneticSystem, PointGeometry};
use crate::loopspace::DiscreteLoop;
use crate::scalar::Real;

use super::{evaluate_e_theta, evaluate_s, FunctionalParams};

/// Values above this are reported as `+∞`.
pub const LENGTH_BOUND_CAP: f64 = 1e12;

fn bound_with_k<T: Real>(k: usize, margin: T, n: usize) -> Result<T> {
    if !(margin > T::zero()) {
        return Err(Error::InvalidParameter(format!("margin must be positive, got {margin}")));
    }
    let kp = T::from_usize_lossy(k) * T::PI();
    let v = T::lit(4.0) * T::from_usize_lossy(n) * kp * kp / margin;
    if v > T::lit(LENGTH_BOUND_CAP) {
        return Ok(T::infinity());
    }
    Ok(v.max(T::one()))
}

/// `max{1, 4n((μ+1)π)²/Δ}`.
pub fn length_bound<T: Real>(index: usize, margin: T, n: usize) -> Result<T> {
    bound_with_k(index + 1, margin, n)
}

/// `max{1, 4n(μπ)²/Δ}`, the bound read with `k = μ`.
pub fn length_bound_literal<T: Real>(index: usize, margin: T, n: usize) -> Result<T> {
    bound_with_k(index, margin, n)
}

/// `E₁ − E₀²`, non-negative by Cauchy–Schwarz.
pub fn holder_slack<T: Real>(lp: &DiscreteLoop<T>) -> Result<T> {
    let e0 = evaluate_e_theta(lp, T::zero())?;
    Ok(evaluate_e_theta(lp, T::one())? - e0 * e0)
}

/// `max_e |A(y_e)|` in the dual metric.
pub fn max_potential_norm<T: Real>(lp: &DiscreteLoop<T>) -> Result<T> {
    let sys = lp.system();
    let edges = lp.edges();
    let n = lp.dim();
    let mut worst = T::zero();
    for e in 0..lp.len() {
        let y = sys.reduce_point(edges.point(e))?;
        let g = sys.metric_values::<T>(&y)?;
        let g_inv = crate::geometry::invert_spd(n, &g, &y)?;
        let a = sys.potential_values::<T>(&y)?;
        worst = worst.max(crate::scalar::quad(&g_inv, &a, &a).max(T::zero()).sqrt());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBound<T> {
    pub energy: T,
    pub bound: T,
    pub potential_norm: T,
    pub value: T,
}

impl<T: Real> EnergyBound<T> {
    /// `E₁ ≤ bound + 1e-6`.
    pub fn holds(&self) -> bool {
        self.energy <= self.bound + T::lit(1e-6)
    }
}

/// `E₁ ≤ (T + √(T² + 4ε max(S,0)))² / (4ε²)` with `T = max |A|`.
pub fn energy_bound<T: Real>(lp: &DiscreteLoop<T>, p: &FunctionalParams<T>) -> Result<EnergyBound<T>> {
    let energy = evaluate_e_theta(lp, T::one())?;
    let value = evaluate_s(lp, p)?;
    let t = max_potential_norm(lp)?;
    let eps = p.epsilon;
    let bound = if eps > T::zero() {
        let r = t + (t * t + T::lit(4.0) * eps * value.max(T::zero())).sqrt();
        r * r / (T::lit(4.0) * eps * eps)
    } else {
        T::infinity()
    };
    Ok(EnergyBound {
        energy,
        bound,
        potential_norm: t,
        value,
    })
}

/// `(|u|² − (u,v))|u|^{τ−1} + (|v|² − (u,v))|v|^{τ−1}` for Euclidean vectors.
pub fn speed_inequality_slack<T: Real>(u: &[T], v: &[T], tau: T) -> T {
    let uv = crate::scalar::dot(u, v);
    let nu = crate::scalar::dot(u, u).sqrt();
    let nv = crate::scalar::dot(v, v).sqrt();
    let term = |n: T| {
        if n == T::zero() {
            T::zero()
        } else {
            (n * n - uv) * n.powf(tau - T::one())
        }
    };
    term(nu) + term(nv)
}

/// Length below which every loop has `S_{ε,τ} > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallLoopRadius<T> {
    /// `max |F|_g` over a grid of the domain box.
    pub field_bound: T,
    pub length: T,
}

/// From `S ≥ L^{1+τ} − c L²`: `ℓ₀ = ½ min(1, c^{−1/(1−τ)})`.
pub fn small_loop_radius<T: Real>(system: &MagneticSystem<T>, tau: T, per_axis: usize) -> Result<SmallLoopRadius<T>> {
    let n = system.dim();
    let mut c = T::zero();
    for x in system.probe_points(per_axis.max(2)) {
        let p = PointGeometry::new(system, &x)?;
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s = s + p.field[i * n + j] * p.field[k * n + l] * p.g_inv[i * n + k] * p.g_inv[j * n + l];
                    }
                }
            }
        }
        c = c.max(s.max(T::zero()).sqrt());
    }
    let scale = if c > T::zero() {
        T::one().min(c.powf(-T::one() / (T::one() - tau)))
    } else {
        T::one()
    };
    Ok(SmallLoopRadius {
        field_bound: c,
        length: T::lit(0.5) * scale,
    })
}
