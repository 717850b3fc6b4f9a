use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functionals::{evaluate_phi, evaluate_s, FunctionalParams};
use crate::geometry::MagneticSystem;
use crate::loopspace::DiscreteLoop;
use crate::scalar::Real;
use crate::systems::{diagonal_lift_into, product_system, ProductSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WitnessSearch {
    pub centers_per_axis: usize,
    pub radii: usize,
    pub samples: usize,
}

impl Default for WitnessSearch {
    fn default() -> Self {
        Self {
            centers_per_axis: 5,
            radii: 12,
            samples: 128,
        }
    }
}

/// A loop with `E₀ + Φ < 0`.
#[derive(Clone, Debug)]
pub enum Witness<T> {
    Direct {
        curve: DiscreteLoop<T>,
        value: T,
        length: T,
        phi: T,
    },
    /// Diagonal lift of a base loop with `Φ < 0 ≤ S` into a `k`-fold product.
    Lifted {
        base: DiscreteLoop<T>,
        product: ProductSystem<T>,
        curve: DiscreteLoop<T>,
        k: usize,
        base_value: T,
        value: T,
        length: T,
        phi: T,
    },
}

impl<T: Real> Witness<T> {
    pub fn curve(&self) -> &DiscreteLoop<T> {
        match self {
            Witness::Direct { curve, .. } | Witness::Lifted { curve, .. } => curve,
        }
    }

    pub fn value(&self) -> T {
        match self {
            Witness::Direct { value, .. } | Witness::Lifted { value, .. } => *value,
        }
    }

    /// `1` for a direct witness.
    pub fn order(&self) -> usize {
        match self {
            Witness::Direct { .. } => 1,
            Witness::Lifted { k, .. } => *k,
        }
    }
}

/// Circle in the `(a, b)` coordinate plane, counterclockwise when
/// `clockwise` is false.
pub fn coordinate_circle<T: Real>(
    system: &Arc<MagneticSystem<T>>,
    center: &[T],
    axes: (usize, usize),
    radius: T,
    clockwise: bool,
    samples: usize,
) -> Result<DiscreteLoop<T>> {
    let sign = if clockwise { -T::one() } else { T::one() };
    let c = center.to_vec();
    DiscreteLoop::from_fn(system.clone(), samples, move |t| {
        let a = T::TAU() * t;
        let mut x = c.clone();
        x[axes.0] = x[axes.0] + radius * a.cos();
        x[axes.1] = x[axes.1] + sign * radius * a.sin();
        x
    })
}

struct Candidate<T> {
    curve: DiscreteLoop<T>,
    value: T,
    length: T,
    phi: T,
}

/// Largest coordinate radius around `center` that keeps the circle inside
/// the box and below half a period.
fn max_radius<T: Real>(system: &MagneticSystem<T>, center: &[T], axis: usize) -> T {
    let (lo, hi) = system.domain_box()[axis];
    match system.periods()[axis] {
        Some(p) => p * T::lit(0.45),
        None => (center[axis] - lo).min(hi - center[axis]),
    }
}

/// Searches coordinate circles for `E₀ + Φ < 0`, falling back to a
/// diagonal lift of the circle with the best `(length/Φ)²` ratio.
pub fn negativity_witness<T: Real>(system: &Arc<MagneticSystem<T>>, search: &WitnessSearch) -> Result<Witness<T>> {
    let n = system.dim();
    if n < 2 || search.centers_per_axis == 0 || search.radii == 0 {
        return Err(Error::InvalidParameter("witness search needs n >= 2 and a non-empty grid".into()));
    }
    let limit = FunctionalParams::limit();
    let per = search.centers_per_axis;
    let mut best: Option<Candidate<T>> = None;
    let mut best_ratio: Option<(T, Candidate<T>)> = None;
    let total = per.pow(n as u32);
    for flat in 0..total {
        let mut center = Vec::with_capacity(n);
        let mut rest = flat;
        for &(lo, hi) in system.domain_box() {
            let k = rest % per;
            rest /= per;
            center.push(lo + (hi - lo) * T::from_usize_lossy(2 * k + 1) / T::from_usize_lossy(2 * per));
        }
        for a in 0..n {
            for b in a + 1..n {
                let rmax = max_radius(system, &center, a).min(max_radius(system, &center, b)) * T::lit(0.98);
                if !(rmax > T::zero()) {
                    continue;
                }
                for r in 0..search.radii {
                    let frac = T::from_usize_lossy(r + 1) / T::from_usize_lossy(search.radii);
                    let radius = rmax * T::lit(0.01).powf(T::one() - frac);
                    for clockwise in [false, true] {
                        let Ok(curve) = coordinate_circle(system, &center, (a, b), radius, clockwise, search.samples) else {
                            continue;
                        };
                        let (Ok(value), Ok(phi), Ok(length)) = (evaluate_s(&curve, &limit), evaluate_phi(&curve), curve.length())
                        else {
                            continue;
                        };
                        let cand = Candidate { curve, value, length, phi };
                        if phi < T::zero() {
                            let ratio = (length / phi).powi(2);
                            if best_ratio.as_ref().is_none_or(|(q, _)| ratio < *q) {
                                best_ratio = Some((
                                    ratio,
                                    Candidate {
                                        curve: cand.curve.clone(),
                                        ..cand
                                    },
                                ));
                            }
                        }
                        if best.as_ref().is_none_or(|b| cand.value < b.value) {
                            best = Some(cand);
                        }
                    }
                }
            }
        }
    }
    if let Some(b) = best.filter(|b| b.value < T::zero()) {
        return Ok(Witness::Direct {
            curve: b.curve,
            value: b.value,
            length: b.length,
            phi: b.phi,
        });
    }
    let Some((ratio, base)) = best_ratio else {
        return Err(Error::NoWitness);
    };
    let k = ratio.floor().to_f64_lossy() as usize + 1;
    let product = product_system(vec![system.clone(); k.max(2)])?;
    let k = product.factors.len();
    let curve = diagonal_lift_into(&base.curve, &product)?;
    let value = evaluate_s(&curve, &limit)?;
    Ok(Witness::Lifted {
        length: curve.length()?,
        phi: evaluate_phi(&curve)?,
        base: base.curve,
        product,
        curve,
        k,
        base_value: base.value,
        value,
    })
}
