use serde::Serialize;

use crate::dynamics::{shoot_periodic_with, FlowParams, FlowState, ShootOptions};
use crate::error::{Error, Result};
use crate::functionals::FunctionalParams;
use crate::geometry::PointGeometry;
use crate::loopspace::{second_derivative_of, tangent_of, DiscreteLoop};
use crate::scalar::Real;

use super::descent::{descend_with, DescentMode, DescentOptions};
use super::{CriticalPoint, DescentStatus};

/// `(ε₀ρᵏ, τ₀ρᵏ)` for `k = 0, 1, …` while either parameter is at least
/// `floor`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Schedule<T> {
    pub epsilon0: T,
    pub tau0: T,
    pub ratio: T,
    pub floor: T,
}

impl<T: Real> Schedule<T> {
    pub fn new(epsilon0: T, tau0: T, ratio: T, floor: T) -> Result<Self> {
        FunctionalParams::new(epsilon0, tau0)?;
        if !(ratio > T::zero() && ratio < T::one()) {
            return Err(Error::InvalidParameter(format!("ratio must lie in (0, 1), got {ratio}")));
        }
        if !(floor > T::zero()) {
            return Err(Error::InvalidParameter(format!("floor must be positive, got {floor}")));
        }
        if epsilon0.max(tau0) < floor {
            return Err(Error::InvalidParameter("both starting parameters are below the floor".into()));
        }
        Ok(Self {
            epsilon0,
            tau0,
            ratio,
            floor,
        })
    }

    pub fn stages(&self) -> Vec<FunctionalParams<T>> {
        let mut out = Vec::new();
        let (mut e, mut t) = (self.epsilon0, self.tau0);
        while e >= self.floor || t >= self.floor {
            out.push(FunctionalParams { epsilon: e, tau: t });
            e = e * self.ratio;
            t = t * self.ratio;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuationOptions {
    pub stage_budget: usize,
    pub tolerance: f64,
    /// Maximum number of intermediate parameter steps per stage.
    pub max_substeps: usize,
    pub collapse_length: f64,
    pub blowup_ratio: f64,
    pub spectrum: bool,
    /// RK4 steps of the limit polish; 0 skips it.
    pub limit_steps: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            stage_budget: 60,
            tolerance: 1e-6,
            max_substeps: 16,
            collapse_length: 1e-4,
            blowup_ratio: 10.0,
            spectrum: true,
            limit_steps: 4096,
        }
    }
}

/// The final loop pushed to the `ε = τ = 0` limit.
#[derive(Clone, Debug)]
pub struct LimitCheck<T> {
    pub curve: DiscreteLoop<T>,
    /// `C`, equal to the length of `curve`.
    pub multiplier: T,
    pub residual: T,
    /// Residual of the last stage loop itself, with `C` its length.
    pub stage_residual: T,
    /// Linear extrapolation of the last two stage lengths to `ε = τ = 0`.
    pub extrapolated_length: Option<T>,
    pub shooting_residual: T,
}

#[derive(Clone, Debug)]
pub struct ContinuationRun<T> {
    pub schedule: Vec<(T, T)>,
    pub stages: Vec<CriticalPoint<T>>,
    /// Residual of the limit equation on the polished limit loop, or on the
    /// last stage when no polish ran.
    pub limit_residual: T,
    pub limit: Option<LimitCheck<T>>,
    pub converged: bool,
    /// Parameter sub-steps used per stage.
    pub substeps: Vec<usize>,
}

pub fn continuation<T: Real>(seed: &DiscreteLoop<T>, schedule: &Schedule<T>) -> Result<ContinuationRun<T>> {
    continuation_with(seed, schedule, &ContinuationOptions::default())
}

fn interpolate<T: Real>(a: &FunctionalParams<T>, b: &FunctionalParams<T>, s: T) -> FunctionalParams<T> {
    let mix = |x: T, y: T| {
        if x > T::zero() && y > T::zero() {
            x * (y / x).powf(s)
        } else {
            x + s * (y - x)
        }
    };
    FunctionalParams {
        epsilon: mix(a.epsilon, b.epsilon),
        tau: mix(a.tau, b.tau),
    }
}

pub fn continuation_with<T: Real>(
    seed: &DiscreteLoop<T>,
    schedule: &Schedule<T>,
    opts: &ContinuationOptions,
) -> Result<ContinuationRun<T>> {
    let stages_params = schedule.stages();
    let solve = |curve: &DiscreteLoop<T>, p: &FunctionalParams<T>, spectrum: bool| {
        let o = DescentOptions {
            budget: opts.stage_budget,
            tolerance: opts.tolerance,
            mode: DescentMode::Critical,
            collapse_length: opts.collapse_length,
            spectrum,
            ..DescentOptions::default()
        };
        descend_with(curve, p, &o).map(|(cp, _)| cp)
    };
    let mut stages: Vec<CriticalPoint<T>> = Vec::new();
    let mut substeps = Vec::new();
    let mut prev_params = stages_params[0];
    let mut current = seed.clone();
    for (k, p) in stages_params.iter().enumerate() {
        let mut done = None;
        let mut pieces = 1;
        while pieces <= opts.max_substeps.max(1) {
            let mut curve = current.clone();
            let mut ok = true;
            for j in 1..pieces {
                let q = interpolate(&prev_params, p, T::from_usize_lossy(j) / T::from_usize_lossy(pieces));
                match solve(&curve, &q, false) {
                    Ok(cp) if cp.converged() => curve = cp.curve,
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                if let Ok(cp) = solve(&curve, p, opts.spectrum) {
                    if cp.status == DescentStatus::Collapsed {
                        return Err(Error::Collapse {
                            length: cp.length.to_f64_lossy(),
                        });
                    }
                    if cp.converged() {
                        done = Some(cp);
                        break;
                    }
                }
            }
            pieces *= 2;
        }
        let Some(cp) = done else {
            return Err(Error::StageDivergence {
                stage: k,
                reason: "no converged critical point within the sub-step budget".into(),
            });
        };
        if let Some(last) = stages.last() {
            let ratio = cp.length / last.length;
            let b = T::lit(opts.blowup_ratio);
            if !(ratio < b && ratio > b.recip()) {
                return Err(Error::StageDivergence {
                    stage: k,
                    reason: format!("length changed by a factor {ratio} between stages"),
                });
            }
        }
        current = cp.curve.clone();
        prev_params = *p;
        substeps.push(pieces);
        stages.push(cp);
    }
    let last = stages.last().expect("schedule is non-empty");
    let stage_residual = limit_residual(&last.curve, last.length)?;
    let extrapolated_length = match stages.len() {
        0 | 1 => None,
        n => {
            let r = schedule.ratio;
            Some((stages[n - 1].length - r * stages[n - 2].length) / (T::one() - r))
        }
    };
    let limit = if opts.limit_steps > 0 {
        limit_polish(&last.curve, opts.limit_steps).ok().map(|(curve, c, shot)| {
            let residual = limit_residual(&curve, c).unwrap_or(T::nan());
            LimitCheck {
                curve,
                multiplier: c,
                residual,
                stage_residual,
                extrapolated_length,
                shooting_residual: shot,
            }
        })
    } else {
        None
    };
    let limit_residual = limit.as_ref().map_or(stage_residual, |l| l.residual);
    let converged = stages.iter().all(|s| s.converged()) && limit_residual < T::lit(10.0 * opts.tolerance);
    Ok(ContinuationRun {
        schedule: stages_params.iter().map(|p| (p.epsilon, p.tau)).collect(),
        stages,
        limit_residual,
        limit,
        converged,
        substeps,
    })
}

/// Periodic orbit of the length-coupled limit flow started from the loop's
/// first sample and tangent.
fn limit_polish<T: Real>(curve: &DiscreteLoop<T>, steps: usize) -> Result<(DiscreteLoop<T>, T, T)> {
    let tangent = tangent_of(curve)?;
    let guess = FlowState::new(curve.sample(0).to_vec(), tangent.vector(0).to_vec());
    let opts = ShootOptions {
        samples: curve.len(),
        ..ShootOptions::default()
    };
    let steps = steps.div_ceil(curve.len()) * curve.len();
    let shot = shoot_periodic_with(curve.system_arc(), &guess, &FlowParams::LengthCoupled, steps, opts)?;
    let length = shot.curve.length()?;
    Ok((shot.curve, length, shot.residual))
}

/// RMS over nodes of `|Dγ̇ − C g⁻¹Fγ̇|_g`.
pub fn limit_residual<T: Real>(curve: &DiscreteLoop<T>, multiplier: T) -> Result<T> {
    let sys = curve.system();
    let n = curve.dim();
    let count = curve.len();
    let v = tangent_of(curve)?;
    let acc = second_derivative_of(curve);
    let mut total = T::zero();
    for m in 0..count {
        let x = sys.reduce_point(curve.sample(m))?;
        let geo = PointGeometry::new(sys, &x)?;
        let vm = v.vector(m);
        let force = crate::scalar::mat_vec(&geo.field, vm);
        let lifted = crate::scalar::mat_vec(&geo.g_inv, &force);
        let mut d = vec![T::zero(); n];
        for i in 0..n {
            let mut s = acc[m * n + i];
            for j in 0..n {
                for k in 0..n {
                    s = s + geo.gamma(i, j, k) * vm[j] * vm[k];
                }
            }
            d[i] = s - multiplier * lifted[i];
        }
        total = total + geo.inner(&d, &d);
    }
    Ok((total / T::from_usize_lossy(count)).sqrt())
}
