//! Euler–Lagrange flow of `S_{ε,τ}` and of its limit, RK4 integration and
//! Newton shooting for periodic orbits of period one.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exprdsl::Dual;
use crate::functionals::FunctionalParams;
use crate::geometry::{invert_spd, MagneticSystem};
use crate::linalg::{Cholesky, Matrix};
use crate::loopspace::DiscreteLoop;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowState<T> {
    pub x: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> FlowState<T> {
    pub fn new(x: Vec<T>, v: Vec<T>) -> Self {
        Self { x, v }
    }
}

/// Which flow to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum FlowParams<T> {
    /// `∇_t γ̇ = g⁻¹Fγ̇ / (2ε + (1+τ)|γ̇|^{τ−1})`.
    Regularized(FunctionalParams<T>),
    /// `∇_t γ̇ = C g⁻¹Fγ̇`.
    Limit { multiplier: T },
    /// `∇_t γ̇ = |γ̇|_g g⁻¹Fγ̇`: the limit flow with `C` equal to the length
    /// of a period-one orbit.
    LengthCoupled,
}

impl<T> From<FunctionalParams<T>> for FlowParams<T> {
    fn from(p: FunctionalParams<T>) -> Self {
        FlowParams::Regularized(p)
    }
}

/// Metric, inverse, first derivatives of `g`, and `F` at a point.
struct FlowFrame<T> {
    g: Vec<T>,
    g_inv: Vec<T>,
    dg: Vec<T>,
    field: Vec<T>,
}

fn flow_frame<T: Real>(sys: &MagneticSystem<T>, x: &[T]) -> Result<FlowFrame<T>> {
    let n = sys.dim();
    let x = sys.reduce_point(x)?;
    let g = sys.metric_values::<T>(&x)?;
    let g_inv = invert_spd(n, &g, &x)?;
    let flat = sys.metric_exprs().iter().all(|e| e.is_constant());
    let mut dg = vec![T::zero(); n * n * n];
    let mut da = vec![T::zero(); n * n];
    let mut seeded: Vec<Dual<T>> = x.iter().map(|&p| Dual::new(p, T::zero())).collect();
    for k in 0..n {
        seeded[k].eps = T::one();
        if !flat {
            let gd = sys.metric_values(&seeded)?;
            for ij in 0..n * n {
                dg[k * n * n + ij] = gd[ij].eps;
            }
        }
        let ad = sys.potential_values(&seeded)?;
        for i in 0..n {
            da[k * n + i] = ad[i].eps;
        }
        seeded[k].eps = T::zero();
    }
    let mut field = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            field[i * n + j] = da[i * n + j] - da[j * n + i];
        }
    }
    Ok(FlowFrame { g, g_inv, dg, field })
}

/// `(dx, dv)` of the Euler–Lagrange flow.
pub fn el_rhs<T: Real>(sys: &MagneticSystem<T>, state: &FlowState<T>, params: &FlowParams<T>) -> Result<(Vec<T>, Vec<T>)> {
    let n = sys.dim();
    let f = flow_frame(sys, &state.x)?;
    let v = &state.v;
    let speed = crate::scalar::quad(&f.g, v, v).max(T::zero()).sqrt();
    if !(speed > T::lit(1e-10)) {
        return Err(Error::ZeroSpeed);
    }
    let coupling = match params {
        FlowParams::Regularized(p) => T::one() / p.speed_weight(speed),
        FlowParams::Limit { multiplier } => *multiplier,
        FlowParams::LengthCoupled => speed,
    };
    let dg = |k: usize, i: usize, j: usize| f.dg[(k * n + i) * n + j];
    // lowered Γ_l(v,v) = ∂_j g_lk v^j v^k − ½ ∂_l g_jk v^j v^k
    let mut lower = vec![T::zero(); n];
    for (l, lo) in lower.iter_mut().enumerate() {
        let mut s = T::zero();
        for j in 0..n {
            for k in 0..n {
                s = s + (dg(j, l, k) - T::lit(0.5) * dg(l, j, k)) * v[j] * v[k];
            }
        }
        // magnetic force F_lk v^k
        let mut m = T::zero();
        for k in 0..n {
            m = m + f.field[l * n + k] * v[k];
        }
        *lo = coupling * m - s;
    }
    let dv = crate::scalar::mat_vec(&f.g_inv, &lower);
    Ok((v.clone(), dv))
}

pub const MIN_STEPS: usize = 16;

/// Classical RK4 with a fixed step; returns `steps + 1` states.
pub fn integrate_flow<T: Real>(
    sys: &MagneticSystem<T>,
    state0: &FlowState<T>,
    params: &FlowParams<T>,
    total_time: T,
    steps: usize,
) -> Result<Vec<FlowState<T>>> {
    if steps < MIN_STEPS {
        return Err(Error::InvalidParameter(format!("need at least {MIN_STEPS} steps, got {steps}")));
    }
    let n = sys.dim();
    let h = total_time / T::from_usize_lossy(steps);
    let half = h * T::lit(0.5);
    let two = T::lit(2.0);
    let sixth = h / T::lit(6.0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state0.clone());
    let mut s = state0.clone();
    let exit = |k: usize, e: Error| match e {
        Error::OutsideDomain { .. } => Error::DomainExit {
            time: (h * T::from_usize_lossy(k)).to_f64_lossy(),
        },
        other => other,
    };
    let shift = |s: &FlowState<T>, dx: &[T], dv: &[T], c: T| FlowState {
        x: (0..n).map(|i| s.x[i] + c * dx[i]).collect(),
        v: (0..n).map(|i| s.v[i] + c * dv[i]).collect(),
    };
    for k in 0..steps {
        let (k1x, k1v) = el_rhs(sys, &s, params).map_err(|e| exit(k, e))?;
        let (k2x, k2v) = el_rhs(sys, &shift(&s, &k1x, &k1v, half), params).map_err(|e| exit(k, e))?;
        let (k3x, k3v) = el_rhs(sys, &shift(&s, &k2x, &k2v, half), params).map_err(|e| exit(k, e))?;
        let (k4x, k4v) = el_rhs(sys, &shift(&s, &k3x, &k3v, h), params).map_err(|e| exit(k, e))?;
        for i in 0..n {
            s.x[i] = s.x[i] + sixth * (k1x[i] + two * k2x[i] + two * k3x[i] + k4x[i]);
            s.v[i] = s.v[i] + sixth * (k1v[i] + two * k2v[i] + two * k3v[i] + k4v[i]);
        }
        if !sys.contains(&s.x) {
            return Err(Error::DomainExit {
                time: (h * T::from_usize_lossy(k + 1)).to_f64_lossy(),
            });
        }
        out.push(s.clone());
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ShootingResult<T> {
    pub curve: DiscreteLoop<T>,
    pub residual: T,
    pub newton_iters: usize,
    pub speed: T,
    pub initial: FlowState<T>,
    pub trajectory: Vec<FlowState<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootOptions {
    pub tolerance: f64,
    pub fd_step: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Samples of the returned loop; must divide the step count.
    pub samples: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            fd_step: 1e-6,
            max_iterations: 40,
            max_halvings: 8,
            samples: 256,
        }
    }
}

/// Periodicity defect `(reduce(x(1) − x₀), v(1) − v₀)`.
fn defect<T: Real>(sys: &MagneticSystem<T>, z: &[T], params: &FlowParams<T>, steps: usize) -> Result<(Vec<T>, Vec<FlowState<T>>)> {
    let n = sys.dim();
    let s0 = FlowState::new(z[..n].to_vec(), z[n..].to_vec());
    let traj = integrate_flow(sys, &s0, params, T::one(), steps)?;
    let end = traj.last().expect("non-empty");
    let mut r = Vec::with_capacity(2 * n);
    for i in 0..n {
        r.push(sys.reduce_difference(i, end.x[i] - z[i]));
    }
    for i in 0..n {
        r.push(end.v[i] - z[n + i]);
    }
    Ok((r, traj))
}

fn l1<T: Real>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |s, &x| s + x.abs())
}

fn speed_of<T: Real>(sys: &MagneticSystem<T>, z: &[T]) -> Result<T> {
    let n = sys.dim();
    let g = sys.metric_values::<T>(&sys.reduce_point(&z[..n])?)?;
    Ok(crate::scalar::quad(&g, &z[n..], &z[n..]).max(T::zero()).sqrt())
}

pub fn shoot_periodic<T: Real>(
    sys: &Arc<MagneticSystem<T>>,
    guess: &FlowState<T>,
    params: &FlowParams<T>,
    steps: usize,
) -> Result<ShootingResult<T>> {
    shoot_periodic_with(sys, guess, params, steps, ShootOptions::default())
}

/// Damped Gauss–Newton on the periodicity defect, forward-difference
/// Jacobian, minimum-norm steps.
pub fn shoot_periodic_with<T: Real>(
    sys: &Arc<MagneticSystem<T>>,
    guess: &FlowState<T>,
    params: &FlowParams<T>,
    steps: usize,
    opts: ShootOptions,
) -> Result<ShootingResult<T>> {
    let n = sys.dim();
    let samples = opts.samples.min(steps);
    if steps % samples != 0 {
        return Err(Error::InvalidParameter(format!("{steps} steps cannot be split into {samples} samples")));
    }
    let mut z: Vec<T> = guess.x.iter().chain(&guess.v).copied().collect();
    if !(speed_of(sys, &z)? > T::lit(1e-6)) {
        return Err(Error::ZeroSpeed);
    }
    let tol = T::lit(opts.tolerance);
    let (mut r, mut traj) = defect(sys, &z, params, steps)?;
    let mut norm = l1(&r);
    let mut history = vec![norm];
    let mut iters = 0;
    let stagnated = |iterations: usize, residual: T| Error::Stagnation {
        iterations,
        residual: residual.to_f64_lossy(),
    };
    while norm >= tol {
        if iters >= opts.max_iterations {
            return Err(stagnated(iters, norm));
        }
        iters += 1;
        let m = 2 * n;
        let mut jac = Matrix::zeros(m, m);
        for c in 0..m {
            let h = T::lit(opts.fd_step) * (T::one() + z[c].abs());
            let mut zp = z.clone();
            zp[c] = zp[c] + h;
            let (rp, _) = defect(sys, &zp, params, steps)?;
            for row in 0..m {
                jac[(row, c)] = (rp[row] - r[row]) / h;
            }
        }
        let step = min_norm_step(&jac, &r)?;
        let mut accepted = false;
        let mut alpha = T::one();
        for _ in 0..=opts.max_halvings {
            let trial: Vec<T> = z.iter().zip(&step).map(|(&a, &d)| a + alpha * d).collect();
            if speed_of(sys, &trial).map(|s| s > T::lit(1e-6)).unwrap_or(false) {
                if let Ok((rt, tt)) = defect(sys, &trial, params, steps) {
                    let nt = l1(&rt);
                    if nt < norm {
                        z = trial;
                        r = rt;
                        traj = tt;
                        norm = nt;
                        accepted = true;
                        break;
                    }
                }
            } else if alpha == T::one() {
                // the full step stops the particle
                return Err(stagnated(iters, norm));
            }
            alpha = alpha * T::lit(0.5);
        }
        if !accepted {
            return Err(stagnated(iters, norm));
        }
        history.push(norm);
        if history.len() > 5 {
            let old = history[history.len() - 6];
            if norm >= tol && norm > old * (T::one() - T::lit(1e-3)) {
                return Err(stagnated(iters, norm));
            }
        }
    }
    let stride = steps / samples;
    let mut pts = Vec::with_capacity(samples * n);
    for k in 0..samples {
        pts.extend_from_slice(&traj[k * stride].x);
    }
    let curve = DiscreteLoop::new(sys.clone(), pts)?;
    let speed = speed_of(sys, &z)?;
    Ok(ShootingResult {
        curve,
        residual: norm,
        newton_iters: iters,
        speed,
        initial: FlowState::new(z[..n].to_vec(), z[n..].to_vec()),
        trajectory: traj,
    })
}

/// `δ` minimizing `|δ|` among least-squares solutions of `J δ = −r`, up to
/// a tiny Tikhonov shift.
fn min_norm_step<T: Real>(jac: &Matrix<T>, r: &[T]) -> Result<Vec<T>> {
    let m = jac.rows();
    let mut jjt = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let mut s = T::zero();
            for k in 0..m {
                s = s + jac[(i, k)] * jac[(j, k)];
            }
            jjt[(i, j)] = s;
        }
    }
    let trace = (0..m).fold(T::zero(), |s, i| s + jjt[(i, i)]);
    let mut lambda = T::lit(1e-14) * trace.max(T::epsilon());
    loop {
        let mut a = jjt.clone();
        for i in 0..m {
            a[(i, i)] = a[(i, i)] + lambda;
        }
        if let Ok(ch) = Cholesky::new(&a) {
            let neg: Vec<T> = r.iter().map(|&x| -x).collect();
            let y = ch.solve(&neg);
            return Ok((0..m).map(|c| (0..m).fold(T::zero(), |s, i| s + jac[(i, c)] * y[i])).collect());
        }
        lambda = lambda * T::lit(100.0);
        if !lambda.is_finite() {
            return Err(Error::Stagnation { iterations: 0, residual: l1(r).to_f64_lossy() });
        }
    }
}
