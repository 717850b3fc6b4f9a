//! Built-in example systems and product systems with diagonal lifts.
//!
//! | name | metric | potential | box | default |
//! |---|---|---|---|---|
//! | `flat_torus` | `I`, both axes period `2π` | `(0, b sin x1)` | `[0, 2π]²` | `b = 1` |
//! | `flat_larmor` | `I` | `(0, b x1)` | `[-5, 5]²` | `b = 8` |
//! | `sphere_cap` | `diag(1, sin² x1)`, `x2` period `2π` | `(0, δ sin²(x1)/2)` | `[0.2, π−0.2] × [0, 2π]` | `δ = 0` |
//! | `hyperbolic_patch` | `I / x2²` | `(0, b x1 / x2)` | `[-1, 1] × [0.5, 2]` | `b = 0.1` |
//!
//! `hyperbolic_patch` is an open patch, useful only for curvature-sign
//! reports; it carries no closed orbits worth certifying.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exprdsl::{parse_expr, ExprAst};
use crate::geometry::{MagneticSystem, PointGeometry};
use crate::loopspace::DiscreteLoop;
use crate::scalar::Real;

pub const BUILTIN_NAMES: [&str; 4] = ["flat_torus", "flat_larmor", "sphere_cap", "hyperbolic_patch"];

pub const DEFAULT_TORUS_B: f64 = 1.0;
pub const DEFAULT_LARMOR_B: f64 = 8.0;
pub const DEFAULT_SPHERE_DELTA: f64 = 0.0;
pub const DEFAULT_HYPERBOLIC_B: f64 = 0.1;

/// Lower colatitude of the sphere cap box.
pub const SPHERE_CAP_MARGIN: f64 = 0.2;

pub fn builtin_system<T: Real>(name: &str) -> Result<MagneticSystem<T>> {
    match name {
        "flat_torus" => flat_torus(DEFAULT_TORUS_B),
        "flat_larmor" => flat_larmor(DEFAULT_LARMOR_B),
        "sphere_cap" => sphere_cap(DEFAULT_SPHERE_DELTA),
        "hyperbolic_patch" => hyperbolic_patch(DEFAULT_HYPERBOLIC_B),
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

fn build<T: Real>(
    name: &str,
    metric: [&str; 4],
    potential: [String; 2],
    periods: [Option<f64>; 2],
    domain_box: [(f64, f64); 2],
) -> Result<MagneticSystem<T>> {
    let metric = metric.iter().map(|t| parse_expr(t, 2)).collect::<std::result::Result<Vec<_>, _>>()?;
    let potential = potential.iter().map(|t| parse_expr(t, 2)).collect::<std::result::Result<Vec<_>, _>>()?;
    MagneticSystem::from_parts(
        name.to_string(),
        metric,
        potential,
        periods.iter().map(|p| p.map(T::lit)).collect(),
        domain_box.iter().map(|&(a, b)| (T::lit(a), T::lit(b))).collect(),
        None,
    )
}

fn literal(v: f64) -> String {
    format!("({v:e})")
}

pub fn flat_torus<T: Real>(b: f64) -> Result<MagneticSystem<T>> {
    build(
        "flat_torus",
        ["1", "0", "0", "1"],
        ["0".into(), format!("{}*sin(x1)", literal(b))],
        [Some(2.0 * PI), Some(2.0 * PI)],
        [(0.0, 2.0 * PI), (0.0, 2.0 * PI)],
    )
}

pub fn flat_larmor<T: Real>(b: f64) -> Result<MagneticSystem<T>> {
    flat_plane("flat_larmor", "0", &format!("{}*x1", literal(b)), 5.0)
}

/// Flat chart `[-half, half]²` with the given potential.
pub fn flat_plane<T: Real>(name: &str, a1: &str, a2: &str, half: f64) -> Result<MagneticSystem<T>> {
    build(
        name,
        ["1", "0", "0", "1"],
        [a1.to_string(), a2.to_string()],
        [None, None],
        [(-half, half), (-half, half)],
    )
}

pub fn sphere_cap<T: Real>(delta: f64) -> Result<MagneticSystem<T>> {
    let sys = build(
        "sphere_cap",
        ["1", "0", "0", "sin(x1)^2"],
        ["0".into(), format!("{}*0.5*sin(x1)^2", literal(delta))],
        [None, Some(2.0 * PI)],
        [(SPHERE_CAP_MARGIN, PI - SPHERE_CAP_MARGIN), (0.0, 2.0 * PI)],
    )?;
    let p = PointGeometry::new(&sys, &[T::lit(PI / 2.0), T::zero()])?;
    let frame = crate::geometry::orthonormal_frame(&sys, &p.point)?;
    let k = p.ricci_with_frame(&frame.vectors, &[T::one(), T::zero()], &[T::one(), T::zero()]);
    if !(k > T::zero()) {
        return Err(Error::InvalidSystem("sphere curvature has the wrong sign".into()));
    }
    Ok(sys)
}

pub fn hyperbolic_patch<T: Real>(b: f64) -> Result<MagneticSystem<T>> {
    build(
        "hyperbolic_patch",
        ["1/x2^2", "0", "0", "1/x2^2"],
        ["0".into(), format!("{}*x1/x2", literal(b))],
        [None, None],
        [(-1.0, 1.0), (0.5, 2.0)],
    )
}

/// Riemannian product with block-diagonal metric and concatenated potential.
#[derive(Clone, Debug)]
pub struct ProductSystem<T> {
    pub factors: Vec<Arc<MagneticSystem<T>>>,
    pub combined: Arc<MagneticSystem<T>>,
}

impl<T: Real> ProductSystem<T> {
    /// First coordinate of factor `i` in the combined chart.
    pub fn offset(&self, i: usize) -> usize {
        self.factors[..i].iter().map(|f| f.dim()).sum()
    }
}

pub fn product_system<T: Real>(factors: Vec<Arc<MagneticSystem<T>>>) -> Result<ProductSystem<T>> {
    if factors.len() < 2 {
        return Err(Error::InvalidParameter("a product needs at least two factors".into()));
    }
    let dim: usize = factors.iter().map(|f| f.dim()).sum();
    let mut metric = vec![ExprAst::constant(0.0, dim); dim * dim];
    let mut potential = Vec::with_capacity(dim);
    let mut periods = Vec::with_capacity(dim);
    let mut domain_box = Vec::with_capacity(dim);
    let mut offset = 0;
    for f in &factors {
        let n = f.dim();
        for i in 0..n {
            for j in 0..n {
                metric[(offset + i) * dim + offset + j] = f.metric_exprs()[i * n + j].embed(offset, dim);
            }
            potential.push(f.potential_exprs()[i].embed(offset, dim));
        }
        periods.extend_from_slice(f.periods());
        domain_box.extend_from_slice(f.domain_box());
        offset += n;
    }
    let hint = factors
        .iter()
        .map(|f| f.injectivity_radius_hint())
        .collect::<Option<Vec<_>>>()
        .and_then(|v| v.into_iter().reduce(T::min));
    let name = factors.iter().map(|f| f.name()).collect::<Vec<_>>().join("×");
    let combined = MagneticSystem::from_parts(name, metric, potential, periods, domain_box, hint)?;
    Ok(ProductSystem {
        factors,
        combined: Arc::new(combined),
    })
}

/// The loop `t ↦ (γ(t), …, γ(t))` in the `k`-fold product of its system.
pub fn diagonal_lift<T: Real>(lp: &DiscreteLoop<T>, k: usize) -> Result<DiscreteLoop<T>> {
    match k {
        0 => Err(Error::InvalidParameter("lift order must be positive".into())),
        1 => Ok(lp.clone()),
        _ => {
            let product = product_system(vec![lp.system_arc().clone(); k])?;
            diagonal_lift_into(lp, &product)
        }
    }
}

pub fn diagonal_lift_into<T: Real>(lp: &DiscreteLoop<T>, product: &ProductSystem<T>) -> Result<DiscreteLoop<T>> {
    let base = lp.system_arc();
    let matches = |f: &Arc<MagneticSystem<T>>| {
        Arc::ptr_eq(f, base)
            || (f.name() == base.name()
                && f.dim() == base.dim()
                && f.periods() == base.periods()
                && f.domain_box() == base.domain_box()
                && f.metric_exprs().iter().zip(base.metric_exprs()).all(|(a, b)| a.to_string() == b.to_string())
                && f.potential_exprs().iter().zip(base.potential_exprs()).all(|(a, b)| a.to_string() == b.to_string()))
    };
    if !product.factors.iter().all(matches) {
        return Err(Error::FactorMismatch);
    }
    let k = product.factors.len();
    let mut samples = Vec::with_capacity(lp.samples().len() * k);
    for m in 0..lp.len() {
        for _ in 0..k {
            samples.extend_from_slice(lp.sample(m));
        }
    }
    DiscreteLoop::new(product.combined.clone(), samples)
}

#[cfg(test)]
mod tests;
