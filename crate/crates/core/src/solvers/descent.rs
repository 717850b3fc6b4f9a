use crate::error::{Error, Result};
use crate::functionals::{energy_bound, evaluate_s, gradient, hessian_exact, FunctionalParams, Gradient};
use crate::linalg::{Cholesky, Matrix};
use crate::loopspace::{h1_gram, resample, DiscreteLoop, Interpolation};
use crate::scalar::Real;

use super::{CriticalPoint, DescentStatus};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DescentMode {
    /// H¹ gradient descent with Armijo backtracking; finds local minima.
    #[default]
    Minimize,
    /// Levenberg–Marquardt on the H¹ gradient; converges to the nearby
    /// critical point whatever its index.
    Critical,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentOptions {
    pub budget: usize,
    pub tolerance: f64,
    pub mode: DescentMode,
    /// Cubic arclength resampling period in iterations; 0 disables it.
    pub resample_every: usize,
    pub collapse_length: f64,
    pub armijo: f64,
    pub check_energy_bound: bool,
    pub spectrum: bool,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            budget: 2000,
            tolerance: 1e-6,
            mode: DescentMode::Minimize,
            resample_every: 50,
            collapse_length: 1e-4,
            armijo: 1e-4,
            check_energy_bound: true,
            spectrum: true,
        }
    }
}

/// Per-iterate record of a descent run; entry 0 is the start.
#[derive(Clone, Debug, Default)]
pub struct DescentTrace<T> {
    pub values: Vec<T>,
    pub grad_norms: Vec<T>,
    pub energy_checks: usize,
    pub resamples: usize,
}

pub fn descend<T: Real>(start: &DiscreteLoop<T>, params: &FunctionalParams<T>, budget: usize) -> Result<CriticalPoint<T>> {
    let opts = DescentOptions {
        budget,
        ..DescentOptions::default()
    };
    descend_with(start, params, &opts).map(|(cp, _)| cp)
}

struct State<T> {
    curve: DiscreteLoop<T>,
    value: T,
    grad: Gradient<T>,
}

impl<T: Real> State<T> {
    fn new(curve: DiscreteLoop<T>, p: &FunctionalParams<T>) -> Result<Self> {
        let value = evaluate_s(&curve, p)?;
        let grad = gradient(&curve, p)?;
        if !value.is_finite() || !grad.norm.is_finite() {
            return Err(Error::DegenerateLoop);
        }
        Ok(Self { curve, value, grad })
    }
}

fn check_energy<T: Real>(s: &State<T>, p: &FunctionalParams<T>, iterate: usize, trace: &mut DescentTrace<T>) -> Result<()> {
    if p.epsilon == T::zero() {
        return Ok(());
    }
    let b = energy_bound(&s.curve, p)?;
    trace.energy_checks += 1;
    if !b.holds() {
        return Err(Error::EnergyBound {
            iterate,
            energy: b.energy.to_f64_lossy(),
            bound: b.bound.to_f64_lossy(),
        });
    }
    Ok(())
}

pub fn descend_with<T: Real>(
    start: &DiscreteLoop<T>,
    params: &FunctionalParams<T>,
    opts: &DescentOptions,
) -> Result<(CriticalPoint<T>, DescentTrace<T>)> {
    let p = params;
    let tol = T::lit(opts.tolerance);
    let collapse = T::lit(opts.collapse_length);
    let mut s = State::new(start.clone(), p)?;
    let mut trace = DescentTrace {
        values: vec![s.value],
        grad_norms: vec![s.grad.norm],
        ..DescentTrace::default()
    };
    if opts.check_energy_bound {
        check_energy(&s, p, 0, &mut trace)?;
    }
    let mut status = DescentStatus::BudgetExhausted;
    let mut iters = 0;
    let mut alpha = T::one();
    let mut mu = T::lit(1e-12);
    loop {
        if s.curve.length()? < collapse {
            status = DescentStatus::Collapsed;
            break;
        }
        if s.grad.norm <= tol {
            status = DescentStatus::Converged;
            break;
        }
        if iters >= opts.budget {
            break;
        }
        iters += 1;
        let next = match opts.mode {
            DescentMode::Minimize => armijo_step(&s, p, &mut alpha, T::lit(opts.armijo)),
            DescentMode::Critical => lm_step(&s, p, &mut mu)?,
        };
        let Some(next) = next else { break };
        s = next;
        if opts.mode == DescentMode::Minimize && opts.resample_every > 0 && iters % opts.resample_every == 0 {
            if let Ok(r) = resample(&s.curve, s.curve.len(), Interpolation::Cubic).and_then(|c| State::new(c, p)) {
                if r.value <= s.value {
                    s = r;
                    trace.resamples += 1;
                }
            }
        }
        trace.values.push(s.value);
        trace.grad_norms.push(s.grad.norm);
        if opts.check_energy_bound {
            check_energy(&s, p, iters, &mut trace)?;
        }
    }
    let cp = CriticalPoint::assess(s.curve, *p, status, iters, opts.spectrum)?;
    Ok((cp, trace))
}

fn shifted<T: Real>(curve: &DiscreteLoop<T>, dir: &[T], step: T) -> Option<DiscreteLoop<T>> {
    let samples = curve.samples().iter().zip(dir).map(|(&x, &d)| x + step * d).collect();
    curve.with_samples(samples).ok()
}

/// One backtracking step along `−∇S`; `None` when no step decreases `S`.
fn armijo_step<T: Real>(s: &State<T>, p: &FunctionalParams<T>, alpha: &mut T, c: T) -> Option<State<T>> {
    let g2 = s.grad.norm * s.grad.norm;
    let dir: Vec<T> = s.grad.field.vectors().iter().map(|&x| -x).collect();
    for _ in 0..60 {
        if let Some(trial) = shifted(&s.curve, &dir, *alpha).and_then(|c| State::new(c, p).ok()) {
            if trial.value <= s.value - c * *alpha * g2 {
                *alpha = (*alpha * T::lit(2.0)).min(T::lit(1e3));
                return Some(trial);
            }
        }
        *alpha = *alpha * T::lit(0.5);
    }
    None
}

/// Levenberg–Marquardt step on the residual `M⁻¹b`:
/// `(H M⁻¹ H + μ M) δ = −H M⁻¹ b`, merit `bᵀM⁻¹b`.
fn lm_step<T: Real>(s: &State<T>, p: &FunctionalParams<T>, mu: &mut T) -> Result<Option<State<T>>> {
    let h = hessian_exact(&s.curve, p)?;
    let gram = h1_gram(&s.curve)?;
    let m = gram.to_dense();
    let chol = gram.cholesky()?;
    let dim = h.rows();
    // W = M⁻¹H, column by column
    let mut w = Matrix::zeros(dim, dim);
    let mut col = vec![T::zero(); dim];
    for c in 0..dim {
        for r in 0..dim {
            col[r] = h[(r, c)];
        }
        let y = chol.solve(&col);
        for r in 0..dim {
            w[(r, c)] = y[r];
        }
    }
    let mut normal = Matrix::zeros(dim, dim);
    for r in 0..dim {
        let hr = h.row(r);
        for c in r..dim {
            let mut acc = T::zero();
            for k in 0..dim {
                acc = acc + hr[k] * w[(k, c)];
            }
            normal[(r, c)] = acc;
            normal[(c, r)] = acc;
        }
    }
    let ratio = (0..dim).fold(T::zero(), |a, i| a.max(normal[(i, i)])) / (0..dim).fold(T::zero(), |a, i| a.max(m[(i, i)]));
    let riesz = s.grad.field.vectors();
    let rhs: Vec<T> = h.mul_vec(riesz).into_iter().map(|x| -x).collect();
    let merit = s.grad.norm;
    for _ in 0..12 {
        let mut a = normal.clone();
        for r in 0..dim {
            for c in 0..dim {
                a[(r, c)] = a[(r, c)] + *mu * ratio * m[(r, c)];
            }
        }
        if let Ok(f) = Cholesky::new(&a) {
            let delta = f.solve(&rhs);
            let mut step = T::one();
            for _ in 0..=8 {
                if let Some(trial) = shifted(&s.curve, &delta, step).and_then(|c| State::new(c, p).ok()) {
                    if trial.grad.norm < merit {
                        *mu = (*mu * T::lit(0.1)).max(T::lit(1e-15));
                        return Ok(Some(trial));
                    }
                }
                step = step * T::lit(0.5);
            }
        }
        *mu = *mu * T::lit(100.0);
    }
    Ok(None)
}
