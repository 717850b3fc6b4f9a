//! Critical points of `S_{ε,τ}`: H¹ descent and Newton refinement,
//! negative-action witnesses, a one-parameter sweepout, and continuation
//! of a critical loop as `(ε, τ) → 0`.

mod continuation;
mod descent;
mod sweepout;
mod witness;

pub use continuation::{continuation, continuation_with, limit_residual, ContinuationOptions, ContinuationRun, LimitCheck, Schedule};
pub use descent::{descend, descend_with, DescentMode, DescentOptions, DescentTrace};
pub use sweepout::{sweepout_minimax, sweepout_minimax_with, SweepoutFamily, SweepoutOptions, SweepoutResult};
pub use witness::{coordinate_circle, negativity_witness, Witness, WitnessSearch};

use serde::Serialize;

use crate::error::Result;
use crate::functionals::{
    evaluate_s, gradient, hessian_spectrum_with, length_bound, speed_profile, FunctionalParams, SpectrumOptions,
    SpectrumReport,
};
use crate::loopspace::DiscreteLoop;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DescentStatus {
    Converged,
    BudgetExhausted,
    /// Length fell below the collapse threshold: the run reached the
    /// manifold of constant loops.
    Collapsed,
}

#[derive(Clone, Debug)]
pub struct CriticalPoint<T> {
    pub curve: DiscreteLoop<T>,
    pub params: FunctionalParams<T>,
    pub value: T,
    pub grad_norm: T,
    /// `None` when the spectrum was skipped or the loop is not critical.
    pub index: Option<usize>,
    pub nullity: Option<usize>,
    pub spectrum: Option<SpectrumReport<T>>,
    pub length: T,
    pub speed_variation: T,
    pub mean_speed: T,
    pub iterations: usize,
    pub status: DescentStatus,
}

impl<T: Real> CriticalPoint<T> {
    pub(crate) fn assess(
        curve: DiscreteLoop<T>,
        params: FunctionalParams<T>,
        status: DescentStatus,
        iterations: usize,
        spectrum: bool,
    ) -> Result<Self> {
        let value = evaluate_s(&curve, &params)?;
        let grad_norm = gradient(&curve, &params).map(|g| g.norm).unwrap_or(T::nan());
        let speeds = speed_profile(&curve)?;
        let length = curve.length()?;
        let spectrum = if spectrum && status == DescentStatus::Converged {
            hessian_spectrum_with(&curve, &params, SpectrumOptions::default()).ok()
        } else {
            None
        };
        Ok(Self {
            curve,
            params,
            value,
            grad_norm,
            index: spectrum.as_ref().map(|s| s.index),
            nullity: spectrum.as_ref().map(|s| s.nullity),
            spectrum,
            length,
            speed_variation: speeds.variation(),
            mean_speed: speeds.mean,
            iterations,
            status,
        })
    }

    pub fn converged(&self) -> bool {
        self.status == DescentStatus::Converged
    }

    /// `(max − min)/mean` of the edge speeds.
    pub fn relative_speed_variation(&self) -> T {
        if self.mean_speed > T::zero() {
            self.speed_variation / self.mean_speed
        } else {
            T::infinity()
        }
    }

    /// `length ≤ length_bound(index, Δ, n)`; `None` without an index or
    /// when `Δ ≤ 0`.
    pub fn within_length_bound(&self, margin: T) -> Option<bool> {
        let index = self.index?;
        if !(margin > T::zero()) {
            return None;
        }
        let bound = length_bound(index, margin, self.curve.dim()).ok()?;
        Some(self.length <= bound)
    }
}

#[cfg(test)]
mod tests;
