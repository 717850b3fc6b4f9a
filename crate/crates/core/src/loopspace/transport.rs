use crate::error::{Error, Result};
use crate::geometry::{orthonormal_frame, PointGeometry};
use crate::linalg::{lu_solve, Matrix};
use crate::scalar::Real;

use super::DiscreteLoop;

/// Parallel orthonormal frames `θ_j(t_m)` along a loop.
#[derive(Clone, Debug)]
pub struct LoopFrame<T> {
    dim: usize,
    /// `frames[(m*n + j)*n + i]` is component `i` of `θ_j(t_m)`.
    pub frames: Vec<T>,
    /// Frame transported once around, at `t = 1`.
    pub closing: Vec<T>,
    /// `max_j |θ_j(1) − θ_j(0)|_g`.
    pub holonomy_defect: T,
    /// Rotation angle in `[0, π]` of the holonomy, for surfaces.
    pub holonomy_angle: Option<T>,
}

impl<T: Real> LoopFrame<T> {
    pub fn vector(&self, m: usize, j: usize) -> &[T] {
        let n = self.dim;
        &self.frames[(m * n + j) * n..(m * n + j + 1) * n]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Transports the Gram–Schmidt frame at `γ(0)` with the Cayley (implicit
/// midpoint) step on each edge, re-orthonormalizing after every step.
pub fn parallel_transport_frame<T: Real>(lp: &DiscreteLoop<T>) -> Result<LoopFrame<T>> {
    let n = lp.dim();
    let count = lp.len();
    let sys = lp.system();
    let start = orthonormal_frame(sys, lp.sample(0))?;
    let (edges, geo) = lp.edge_geometry()?;
    let h = T::one() / T::from_usize_lossy(count);
    let half_h = h * T::lit(0.5);

    let mut frames = Vec::with_capacity(count * n * n);
    let mut current: Vec<Vec<T>> = start.vectors.clone();
    for v in &current {
        frames.extend_from_slice(v);
    }
    for e in 0..count {
        let c = connection_matrix(&geo[e], edges.velocity(e));
        let mut lhs = Matrix::identity(n);
        let mut rhs = Matrix::identity(n);
        for i in 0..n {
            for k in 0..n {
                let a = half_h * c[i * n + k];
                lhs[(i, k)] = lhs[(i, k)] + a;
                rhs[(i, k)] = rhs[(i, k)] - a;
            }
        }
        let mut next = Vec::with_capacity(n);
        for theta in &current {
            let b = rhs.mul_vec(theta);
            next.push(lu_solve(&lhs, &b)?);
        }
        let x_next: Vec<T> = (0..n).map(|i| lp.node(e as isize + 1, i)).collect();
        let g = sys.metric_values::<T>(&sys.reduce_point(&x_next)?)?;
        current = crate::geometry::orthonormalize(n, &g, next).ok_or_else(|| Error::MetricNotPositiveDefinite {
            point: x_next.iter().map(|v| v.to_f64_lossy()).collect(),
        })?;
        if e + 1 < count {
            for v in &current {
                frames.extend_from_slice(v);
            }
        }
    }
    let g0 = sys.metric_values::<T>(&sys.reduce_point(lp.sample(0))?)?;
    let mut defect = T::zero();
    for (a, b) in current.iter().zip(&start.vectors) {
        let d: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
        defect = defect.max(crate::scalar::quad(&g0, &d, &d).max(T::zero()).sqrt());
    }
    let holonomy_angle = (n == 2).then(|| {
        let a = crate::scalar::quad(&g0, &current[0], &start.vectors[0]);
        let b = crate::scalar::quad(&g0, &current[0], &start.vectors[1]);
        b.atan2(a).abs()
    });
    let closing = current.into_iter().flatten().collect();
    Ok(LoopFrame {
        dim: n,
        frames,
        closing,
        holonomy_defect: defect,
        holonomy_angle,
    })
}

/// `C^i_k = Γ^i_jk v^j`, row-major.
pub(crate) fn connection_matrix<T: Real>(geo: &PointGeometry<T>, v: &[T]) -> Vec<T> {
    let n = geo.dim;
    let mut c = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let mut s = T::zero();
            for (j, &vj) in v.iter().enumerate() {
                s = s + geo.gamma(i, j, k) * vj;
            }
            c[i * n + k] = s;
        }
    }
    c
}
