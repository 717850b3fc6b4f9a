//! Pointwise differential geometry of a [`MagneticSystem`]: Levi-Civita
//! connection, curvature, the field `F = dA` and its covariant derivative,
//! the trace `H`, and the curvature margin.

mod margin;
mod system;
mod tensors;

pub use margin::{curvature_margin, margin_function, CurvatureReport, MarginGrid};
pub use system::{FieldJet, MagneticSystem, SystemDefinition};
pub use tensors::PointGeometry;
pub(crate) use tensors::invert_spd;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Metric, its inverse and Christoffel symbols `Γ^i_jk`.
#[derive(Clone, Debug)]
pub struct Connection<T> {
    pub g: Vec<T>,
    pub g_inv: Vec<T>,
    pub christoffel: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct FieldAt<T> {
    pub potential: Vec<T>,
    /// Row-major `F_ij`.
    pub field: Vec<T>,
    /// Row-major `(∇_u F)_jk`.
    pub nabla_field_u: Vec<T>,
}

/// Orthonormal basis of the tangent space at `point`.
#[derive(Clone, Debug)]
pub struct PointFrame<T> {
    pub point: Vec<T>,
    /// `vectors[α]` holds the chart components of `e_α`.
    pub vectors: Vec<Vec<T>>,
    pub gram_residual: T,
}

pub fn connection_at<T: Real>(system: &MagneticSystem<T>, x: &[T]) -> Result<Connection<T>> {
    let p = PointGeometry::new(system, x)?;
    Ok(Connection {
        g: p.g,
        g_inv: p.g_inv,
        christoffel: p.christoffel,
    })
}

/// `K(u,v)`; positive on the round sphere.
pub fn ricci_at<T: Real>(system: &MagneticSystem<T>, x: &[T], u: &[T], v: &[T]) -> Result<T> {
    let p = PointGeometry::new(system, x)?;
    let frame = gram_schmidt(system.dim(), &p.g, x)?;
    Ok(p.ricci_with_frame(&frame.vectors, u, v))
}

pub fn field_at<T: Real>(system: &MagneticSystem<T>, x: &[T], u: &[T]) -> Result<FieldAt<T>> {
    let p = PointGeometry::new(system, x)?;
    let nabla_field_u = p.nabla_field_along(u);
    Ok(FieldAt {
        potential: p.potential,
        field: p.field,
        nabla_field_u,
    })
}

pub fn h_vector<T: Real>(system: &MagneticSystem<T>, x: &[T], w: &[T]) -> Result<T> {
    let p = PointGeometry::new(system, x)?;
    let frame = gram_schmidt(system.dim(), &p.g, x)?;
    Ok(p.h_with_frame(&frame.vectors, w))
}

pub fn orthonormal_frame<T: Real>(system: &MagneticSystem<T>, x: &[T]) -> Result<PointFrame<T>> {
    let x = system.reduce_point(x)?;
    let g = system.metric_values::<T>(&x)?;
    gram_schmidt(system.dim(), &g, &x)
}

/// Gram–Schmidt of the coordinate axes under `g`.
pub(crate) fn gram_schmidt<T: Real>(n: usize, g: &[T], x: &[T]) -> Result<PointFrame<T>> {
    let vectors = orthonormalize(n, g, (0..n).map(|i| axis(n, i)).collect()).ok_or_else(|| {
        Error::MetricNotPositiveDefinite {
            point: x.iter().map(|v| v.to_f64_lossy()).collect(),
        }
    })?;
    let gram_residual = gram_residual(n, g, &vectors);
    Ok(PointFrame {
        point: x.to_vec(),
        vectors,
        gram_residual,
    })
}

pub(crate) fn axis<T: Real>(n: usize, i: usize) -> Vec<T> {
    let mut e = vec![T::zero(); n];
    e[i] = T::one();
    e
}

/// Modified Gram–Schmidt; `None` when a vector degenerates.
pub(crate) fn orthonormalize<T: Real>(n: usize, g: &[T], mut vs: Vec<Vec<T>>) -> Option<Vec<Vec<T>>> {
    for a in 0..vs.len() {
        for b in 0..a {
            let p = crate::scalar::quad(g, &vs[a], &vs[b]);
            for k in 0..n {
                vs[a][k] = vs[a][k] - p * vs[b][k];
            }
        }
        let norm2 = crate::scalar::quad(g, &vs[a], &vs[a]);
        if !(norm2 > T::epsilon()) {
            return None;
        }
        let inv = norm2.sqrt().recip();
        vs[a].iter_mut().for_each(|c| *c = *c * inv);
    }
    Some(vs)
}

pub(crate) fn gram_residual<T: Real>(_n: usize, g: &[T], vs: &[Vec<T>]) -> T {
    let mut worst = T::zero();
    for (a, va) in vs.iter().enumerate() {
        for (b, vb) in vs.iter().enumerate() {
            let target = if a == b { T::one() } else { T::zero() };
            worst = worst.max((crate::scalar::quad(g, va, vb) - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests;
