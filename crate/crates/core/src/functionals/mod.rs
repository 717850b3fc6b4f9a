//! The functionals `E_θ`, `Φ`, `S_{ε,τ} = εE₁ + E_τ + Φ`, their exact
//! discrete first and second derivatives, the second-variation form and
//! its spectrum, and the index–length quantities.
//!
//! All integrals use the staggered edge quadrature
//! `S = (1/N) Σ_e ℓ(y_e, v_e)` with `ℓ(y,v) = ε|v|² + |v|^{1+τ} + A(y)·v`.

mod bounds;
mod second;

pub use bounds::{
    energy_bound, holder_slack, small_loop_radius, length_bound, length_bound_literal, max_potential_norm,
    speed_inequality_slack, EnergyBound, SmallLoopRadius,
};
pub use second::{c_km, hessian_spectrum, hessian_spectrum_with, second_variation, SecondVariation, SpectrumOptions, SpectrumReport, CRITICAL_TOLERANCE, MAX_SWEEPS};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exprdsl::{Dual, Dual2, ExprScalar};
use crate::geometry::MagneticSystem;
use crate::linalg::Matrix;
use crate::loopspace::{h1_gram_with, DiscreteLoop, TangentField};
use crate::loopspace::stencil::{derivative_weights, midpoint_weights, wrap, EDGE_OFFSETS};
use crate::scalar::Real;

/// Speeds below this are treated as a vanishing tangent.
pub const MIN_SPEED: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FunctionalParams<T> {
    pub epsilon: T,
    pub tau: T,
}

impl<T: Real> FunctionalParams<T> {
    pub fn new(epsilon: T, tau: T) -> Result<Self> {
        if !(epsilon >= T::zero()) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be non-negative, got {epsilon}")));
        }
        if !(tau >= T::zero() && tau < T::one()) {
            return Err(Error::InvalidParameter(format!("tau must lie in [0, 1), got {tau}")));
        }
        Ok(Self { epsilon, tau })
    }

    /// `ε = τ = 0`, the functional `E₀ + Φ`.
    pub fn limit() -> Self {
        Self {
            epsilon: T::zero(),
            tau: T::zero(),
        }
    }

    pub fn is_limit(&self) -> bool {
        self.epsilon == T::zero() && self.tau == T::zero()
    }

    /// `2ε + (1+τ)|v|^{τ−1}`.
    pub fn speed_weight(&self, speed: T) -> T {
        T::lit(2.0) * self.epsilon + (T::one() + self.tau) * speed.powf(self.tau - T::one())
    }
}

/// `ℓ(y, v)`; `y` must already be reduced.
fn lagrangian<T: Real, S: ExprScalar<T>>(sys: &MagneticSystem<T>, y: &[S], v: &[S], p: &FunctionalParams<T>) -> Result<S> {
    let n = sys.dim();
    let g = sys.metric_values(y)?;
    let a = sys.potential_values(y)?;
    let mut q = S::constant(T::zero());
    let mut av = S::constant(T::zero());
    for i in 0..n {
        let mut row = S::constant(T::zero());
        for j in 0..n {
            row = row + g[i * n + j] * v[j];
        }
        q = q + v[i] * row;
        av = av + a[i] * v[i];
    }
    let speed_term = if p.tau == T::zero() {
        q.sqrt()
    } else {
        q.powf_const((T::one() + p.tau) * T::lit(0.5))
    };
    Ok(S::constant(p.epsilon) * q + speed_term + av)
}

fn edge_speeds<T: Real>(lp: &DiscreteLoop<T>) -> Result<(crate::loopspace::LoopEdges<T>, Vec<Vec<T>>, Vec<T>)> {
    let sys = lp.system();
    let edges = lp.edges();
    let mut points = Vec::with_capacity(lp.len());
    let mut speeds = Vec::with_capacity(lp.len());
    for e in 0..lp.len() {
        let y = sys.reduce_point(edges.point(e))?;
        let g = sys.metric_values::<T>(&y)?;
        let v = edges.velocity(e);
        speeds.push(crate::scalar::quad(&g, v, v).max(T::zero()).sqrt());
        points.push(y);
    }
    Ok((edges, points, speeds))
}

/// `E_θ = ∫ |γ̇|^{1+θ}`.
pub fn evaluate_e_theta<T: Real>(lp: &DiscreteLoop<T>, theta: T) -> Result<T> {
    let (_, _, speeds) = edge_speeds(lp)?;
    let p = T::one() + theta;
    let total: T = speeds.iter().map(|&s| if s == T::zero() { s } else { s.powf(p) }).sum();
    Ok(total / T::from_usize_lossy(lp.len()))
}

/// `Φ = ∫ A_j γ̇^j`.
pub fn evaluate_phi<T: Real>(lp: &DiscreteLoop<T>) -> Result<T> {
    let sys = lp.system();
    let edges = lp.edges();
    let mut total = T::zero();
    for e in 0..lp.len() {
        let y = sys.reduce_point(edges.point(e))?;
        let a = sys.potential_values::<T>(&y)?;
        total = total + crate::scalar::dot(&a, edges.velocity(e));
    }
    Ok(total / T::from_usize_lossy(lp.len()))
}

/// `S_{ε,τ}`; `E₀ + Φ` in the limit.
pub fn evaluate_s<T: Real>(lp: &DiscreteLoop<T>, p: &FunctionalParams<T>) -> Result<T> {
    let sys = lp.system();
    let edges = lp.edges();
    let mut total = T::zero();
    for e in 0..lp.len() {
        let y = sys.reduce_point(edges.point(e))?;
        total = total + lagrangian(sys, &y, edges.velocity(e), p)?;
    }
    Ok(total / T::from_usize_lossy(lp.len()))
}

/// Speed statistics on edges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedProfile<T> {
    pub min: T,
    pub max: T,
    pub mean: T,
}

impl<T: Real> SpeedProfile<T> {
    pub fn variation(&self) -> T {
        self.max - self.min
    }
}

pub fn speed_profile<T: Real>(lp: &DiscreteLoop<T>) -> Result<SpeedProfile<T>> {
    let (_, _, speeds) = edge_speeds(lp)?;
    let min = speeds.iter().copied().fold(T::infinity(), T::min);
    let max = speeds.iter().copied().fold(T::zero(), T::max);
    let mean = speeds.iter().copied().sum::<T>() / T::from_usize_lossy(speeds.len());
    Ok(SpeedProfile { min, max, mean })
}

/// First variation of `S` in both representations.
#[derive(Clone, Debug)]
pub struct Gradient<T> {
    /// H¹-Riesz representative: `h1_inner(field, ξ) = dS(ξ)`.
    pub field: TangentField<T>,
    /// Nodal differential `∂S/∂x_{m,i}`.
    pub differential: Vec<T>,
    /// H¹ norm of `field`.
    pub norm: T,
}

fn check_speeds<T: Real>(speeds: &[T]) -> Result<()> {
    match speeds.iter().position(|&s| !(s >= T::lit(MIN_SPEED))) {
        Some(index) => Err(Error::NearZeroSpeed { index }),
        None => Ok(()),
    }
}

/// Exact `∂S/∂x` of the discrete functional.
pub fn differential<T: Real>(lp: &DiscreteLoop<T>, p: &FunctionalParams<T>) -> Result<Vec<T>> {
    let (edges, points, speeds) = edge_speeds(lp)?;
    check_speeds(&speeds)?;
    let sys = lp.system();
    let n = lp.dim();
    let count = lp.len();
    let pw = midpoint_weights::<T>();
    let dw = derivative_weights::<T>();
    let scale = T::from_usize_lossy(count);
    let inv = T::one() / scale;
    let mut out = vec![T::zero(); count * n];
    let mut local = vec![T::zero(); 2 * n];
    for e in 0..count {
        let y0 = &points[e];
        let v0 = edges.velocity(e);
        let mut y: Vec<Dual<T>> = y0.iter().map(|&c| Dual::new(c, T::zero())).collect();
        let mut v: Vec<Dual<T>> = v0.iter().map(|&c| Dual::new(c, T::zero())).collect();
        for (s, slot) in local.iter_mut().enumerate() {
            if s < n {
                y[s].eps = T::one();
            } else {
                v[s - n].eps = T::one();
            }
            *slot = lagrangian(sys, &y, &v, p)?.eps;
            if s < n {
                y[s].eps = T::zero();
            } else {
                v[s - n].eps = T::zero();
            }
        }
        for (k, &o) in EDGE_OFFSETS.iter().enumerate() {
            let node = wrap(e as isize + o, count);
            for i in 0..n {
                out[node * n + i] = out[node * n + i] + inv * (pw[k] * local[i] + scale * dw[k] * local[n + i]);
            }
        }
    }
    Ok(out)
}

/// H¹ gradient of `S_{ε,τ}`.
pub fn gradient_s<T: Real>(lp: &DiscreteLoop<T>, p: &FunctionalParams<T>) -> Result<TangentField<T>> {
    Ok(gradient(lp, p)?.field)
}

pub fn gradient<T: Real>(lp: &DiscreteLoop<T>, p: &FunctionalParams<T>) -> Result<Gradient<T>> {
    let differential = differential(lp, p)?;
    let (edges, geo) = lp.edge_geometry()?;
    let chol = h1_gram_with(lp, &edges, &geo).cholesky()?;
    let riesz = chol.solve(&differential);
    let norm = crate::scalar::dot(&riesz, &differential).max(T::zero()).sqrt();
    Ok(Gradient {
        field: TangentField::new(lp, riesz)?,
        differential,
        norm,
    })
}

/// Exact Hessian `∂²S/∂x∂x` of the discrete functional, dense.
pub fn hessian_exact<T: Real>(lp: &DiscreteLoop<T>, p: &FunctionalParams<T>) -> Result<Matrix<T>> {
    let (edges, points, speeds) = edge_speeds(lp)?;
    check_speeds(&speeds)?;
    let sys = lp.system();
    let n = lp.dim();
    let count = lp.len();
    let dim = count * n;
    let pw = midpoint_weights::<T>();
    let dw = derivative_weights::<T>();
    let scale = T::from_usize_lossy(count);
    let inv = T::one() / scale;
    let mut h = Matrix::zeros(dim, dim);
    let w = 2 * n;
    let mut local = vec![T::zero(); w * w];
    // d(y,v)/dx for stencil slot k: y gets pw[k], v gets N·dw[k]
    let jac = |k: usize, s: usize| if s < n { pw[k] } else { scale * dw[k] };
    for e in 0..count {
        let lift = |c: T| Dual2::seeded(c, T::zero(), T::zero());
        let mut y: Vec<Dual2<T>> = points[e].iter().map(|&c| lift(c)).collect();
        let mut v: Vec<Dual2<T>> = edges.velocity(e).iter().map(|&c| lift(c)).collect();
        for a in 0..w {
            for b in a..w {
                let set = |y: &mut Vec<Dual2<T>>, v: &mut Vec<Dual2<T>>, s: usize, first: bool, val: T| {
                    let slot = if s < n { &mut y[s] } else { &mut v[s - n] };
                    if first {
                        slot.re.eps = val;
                    } else {
                        slot.eps.re = val;
                    }
                };
                set(&mut y, &mut v, a, true, T::one());
                set(&mut y, &mut v, b, false, T::one());
                let r = lagrangian(sys, &y, &v, p)?.eps.eps;
                set(&mut y, &mut v, a, true, T::zero());
                set(&mut y, &mut v, b, false, T::zero());
                local[a * w + b] = r;
                local[b * w + a] = r;
            }
        }
        for (ka, &oa) in EDGE_OFFSETS.iter().enumerate() {
            let na = wrap(e as isize + oa, count);
            for (kb, &ob) in EDGE_OFFSETS.iter().enumerate() {
                let nb = wrap(e as isize + ob, count);
                for i in 0..n {
                    for j in 0..n {
                        let mut s = T::zero();
                        for (si, ti) in [(i, jac(ka, i)), (n + i, jac(ka, n + i))] {
                            for (sj, tj) in [(j, jac(kb, j)), (n + j, jac(kb, n + j))] {
                                s = s + ti * local[si * w + sj] * tj;
                            }
                        }
                        h[(na * n + i, nb * n + j)] = h[(na * n + i, nb * n + j)] + inv * s;
                    }
                }
            }
        }
    }
    Ok(h)
}
