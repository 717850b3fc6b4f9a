use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{gram_schmidt, MagneticSystem, PointGeometry};

/// Resolution of the margin search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginGrid {
    pub points_per_axis: usize,
    pub directions: usize,
    pub refine: bool,
    pub refine_iterations: usize,
    pub refine_tolerance: f64,
}

impl MarginGrid {
    /// 33 points per axis and 64 directions in two dimensions; coarser
    /// base grids with more directions above that.
    pub fn default_for(dim: usize) -> Self {
        let (points_per_axis, directions) = match dim {
            0..=2 => (33, 64),
            3 => (11, 128),
            4 => (6, 192),
            _ => (((20_000f64).powf(1.0 / dim as f64) as usize).max(2), 64 * dim),
        };
        Self {
            points_per_axis,
            directions,
            refine: true,
            refine_iterations: 200,
            refine_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureReport<T> {
    pub margin: T,
    pub argmin_point: Vec<T>,
    /// g-unit vector at `argmin_point`.
    pub argmin_direction: Vec<T>,
    pub samples_evaluated: usize,
    pub refined: bool,
}

/// `f(v) = K(v,v)/|v| − H(v)`.
pub fn margin_function<T: Real>(system: &MagneticSystem<T>, x: &[T], v: &[T]) -> Result<T> {
    let p = PointGeometry::new(system, x)?;
    let frame = gram_schmidt(system.dim(), &p.g, x)?;
    let norm = p.norm(v);
    if !(norm > T::zero()) {
        return Err(Error::InvalidParameter("margin function needs a non-zero vector".into()));
    }
    Ok(p.ricci_with_frame(&frame.vectors, v, v) / norm - p.h_with_frame(&frame.vectors, v))
}

/// Per-point data: frame, Ricci matrix in frame coordinates, H covector in
/// frame coordinates.
struct PointData<T> {
    frame: Vec<Vec<T>>,
    ricci: Vec<T>,
    h: Vec<T>,
}

fn point_data<T: Real>(system: &MagneticSystem<T>, x: &[T]) -> Result<PointData<T>> {
    let n = system.dim();
    let p = PointGeometry::new(system, x)?;
    let frame = gram_schmidt(n, &p.g, x)?.vectors;
    let k = p.ricci_matrix(&frame);
    let h = p.h_covector(&frame);
    // pull back to frame coordinates
    let mut ricci = vec![T::zero(); n * n];
    for a in 0..n {
        for b in 0..n {
            ricci[a * n + b] = crate::scalar::quad(&k, &frame[a], &frame[b]);
        }
    }
    let h = frame.iter().map(|e| crate::scalar::dot(&h, e)).collect();
    Ok(PointData { frame, ricci, h })
}

/// `f` on unit frame coordinates `c`.
fn f_frame<T: Real>(d: &PointData<T>, c: &[T]) -> T {
    crate::scalar::quad(&d.ricci, c, c) - crate::scalar::dot(&d.h, c)
}

fn directions<T: Real>(n: usize, count: usize) -> Vec<Vec<T>> {
    if n == 2 {
        return (0..count)
            .map(|k| {
                let a = T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(count);
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    use rand_distr_like::gaussian;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d61_7267);
    let mut out: Vec<Vec<T>> = Vec::with_capacity(count + 2 * n);
    for i in 0..n {
        for s in [T::one(), -T::one()] {
            let mut e = vec![T::zero(); n];
            e[i] = s;
            out.push(e);
        }
    }
    while out.len() < count.max(2 * n) {
        let v: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            out.push(v.iter().map(|x| T::lit(x / norm)).collect());
        }
    }
    out
}

mod rand_distr_like {
    use rand::Rng;

    /// Box–Muller standard normal sample.
    pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

fn base_points<T: Real>(system: &MagneticSystem<T>, per_axis: usize) -> Vec<Vec<T>> {
    let n = system.dim();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|i| {
                    let k = T::from_usize_lossy(idx % per_axis);
                    idx /= per_axis;
                    let (lo, hi) = system.domain_box()[i];
                    match system.periods()[i] {
                        Some(p) => lo + p * k / T::from_usize_lossy(per_axis),
                        None => lo + (hi - lo) * k / T::from_usize_lossy(per_axis - 1),
                    }
                })
                .collect()
        })
        .collect()
}

/// Grid search of `min f(v)` over unit vectors followed by Nelder–Mead
/// refinement from the best cell.
pub fn curvature_margin<T: Real>(system: &MagneticSystem<T>, grid: &MarginGrid) -> Result<CurvatureReport<T>> {
    if grid.points_per_axis < 2 {
        return Err(Error::GridTooCoarse(grid.points_per_axis));
    }
    if grid.directions < 2 {
        return Err(Error::InvalidParameter("margin grid needs at least 2 directions".into()));
    }
    let n = system.dim();
    let points = base_points(system, grid.points_per_axis);
    let dirs = directions::<T>(n, grid.directions);
    let per_point: Vec<Result<(T, usize)>> = points
        .par_iter()
        .map(|x| {
            let d = point_data(system, x)?;
            let mut best = (T::infinity(), 0);
            for (k, c) in dirs.iter().enumerate() {
                let f = f_frame(&d, c);
                if f < best.0 {
                    best = (f, k);
                }
            }
            Ok(best)
        })
        .collect();
    let mut best: Option<(T, usize, usize)> = None;
    for (i, r) in per_point.into_iter().enumerate() {
        let (f, k) = r?;
        if best.map_or(true, |b| f < b.0) {
            best = Some((f, i, k));
        }
    }
    let (_, bi, bk) = best.expect("non-empty grid");
    let mut samples = points.len() * dirs.len();
    let mut x = points[bi].clone();
    let mut c = dirs[bk].clone();

    if grid.refine {
        let (rx, rc, evals) = refine(system, &x, &c, grid)?;
        samples += evals;
        x = rx;
        c = rc;
    }
    let d = point_data(system, &x)?;
    let margin = f_frame(&d, &c);
    let mut dir = vec![T::zero(); n];
    for (a, e) in d.frame.iter().enumerate() {
        for k in 0..n {
            dir[k] = dir[k] + c[a] * e[k];
        }
    }
    Ok(CurvatureReport {
        margin,
        argmin_point: x,
        argmin_direction: dir,
        samples_evaluated: samples,
        refined: grid.refine,
    })
}

fn project<T: Real>(system: &MagneticSystem<T>, z: &[T]) -> (Vec<T>, Vec<T>) {
    let n = system.dim();
    let x = (0..n)
        .map(|i| {
            let (lo, hi) = system.domain_box()[i];
            match system.periods()[i] {
                Some(p) => z[i] - p * ((z[i] - lo) / p).floor(),
                None => z[i].max(lo).min(hi),
            }
        })
        .collect();
    let c = &z[n..];
    let norm = c.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
    let c = if norm > T::epsilon() {
        c.iter().map(|&v| v / norm).collect()
    } else {
        super::axis(n, 0)
    };
    (x, c)
}

fn refine<T: Real>(
    system: &MagneticSystem<T>,
    x0: &[T],
    c0: &[T],
    grid: &MarginGrid,
) -> Result<(Vec<T>, Vec<T>, usize)> {
    let n = system.dim();
    let objective = |z: &[T]| -> T {
        let (x, c) = project(system, z);
        point_data(system, &x).map_or(T::infinity(), |d| f_frame(&d, &c))
    };
    let mut start: Vec<T> = x0.to_vec();
    start.extend_from_slice(c0);
    let mut steps = Vec::with_capacity(2 * n);
    for i in 0..n {
        let (lo, hi) = system.domain_box()[i];
        let width = system.periods()[i].unwrap_or(hi - lo);
        steps.push(width / T::from_usize_lossy(grid.points_per_axis.max(2) * 2));
    }
    let dir_step = T::lit(std::f64::consts::PI / grid.directions as f64);
    steps.extend(std::iter::repeat(dir_step).take(n));
    let (z, evals) = nelder_mead(objective, &start, &steps, grid.refine_iterations, T::lit(grid.refine_tolerance));
    let (x, c) = project(system, &z);
    // never report worse than the grid minimum
    let grid_value = objective(&start);
    if objective(&z) <= grid_value {
        Ok((x, c, evals))
    } else {
        Ok((x0.to_vec(), c0.to_vec(), evals))
    }
}

/// Standard Nelder–Mead; stops when the simplex value spread falls below
/// `tol` or after `max_iter` iterations. Returns the best vertex and the
/// number of objective evaluations.
pub(crate) fn nelder_mead<T: Real>(
    f: impl Fn(&[T]) -> T,
    start: &[T],
    steps: &[T],
    max_iter: usize,
    tol: T,
) -> (Vec<T>, usize) {
    let d = start.len();
    let mut simplex: Vec<Vec<T>> = vec![start.to_vec()];
    for i in 0..d {
        let mut v = start.to_vec();
        v[i] = v[i] + steps[i];
        simplex.push(v);
    }
    let mut values: Vec<T> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = d + 1;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[d] - values[0]).abs() <= tol {
            break;
        }
        let mut centroid = vec![T::zero(); d];
        for v in &simplex[..d] {
            for k in 0..d {
                centroid[k] = centroid[k] + v[k] / T::from_usize_lossy(d);
            }
        }
        let along = |t: T| -> Vec<T> { (0..d).map(|k| centroid[k] + t * (simplex[d][k] - centroid[k])).collect() };
        let reflected = along(-T::one());
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = along(-two);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[d] = expanded;
                values[d] = fe;
            } else {
                simplex[d] = reflected;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = reflected;
            values[d] = fr;
        } else {
            let (contracted, fc) = if fr < values[d] {
                let c = along(-half);
                let fc = f(&c);
                (c, fc)
            } else {
                let c = along(half);
                let fc = f(&c);
                (c, fc)
            };
            evals += 1;
            if fc < values[d].min(fr) {
                simplex[d] = contracted;
                values[d] = fc;
            } else {
                for i in 1..=d {
                    for k in 0..d {
                        simplex[i][k] = simplex[0][k] + half * (simplex[i][k] - simplex[0][k]);
                    }
                    values[i] = f(&simplex[i]);
                }
                evals += d;
            }
        }
    }
    let best = (0..=d)
        .min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    (simplex[best].clone(), evals)
}
