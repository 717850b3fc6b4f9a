//! Closed curves sampled on a uniform parameter grid, tangent fields along
//! them, the H¹ inner product, parallel frames and resampling.

pub mod stencil;
mod transport;

pub use transport::{parallel_transport_frame, LoopFrame};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{MagneticSystem, PointGeometry};
use crate::linalg::ProfileMatrix;
use crate::scalar::Real;

use stencil::{derivative_weights, midpoint_weights, nodal_second_weights, wrap, EDGE_OFFSETS};

pub const MIN_SAMPLES: usize = 8;

/// `N` samples of a closed curve at `t_m = m/N`. Periodic coordinates are
/// stored lifted, so consecutive differences never jump by a period; the
/// closing shift `x_N − x_0` is a whole number of periods.
#[derive(Clone, Debug)]
pub struct DiscreteLoop<T> {
    system: Arc<MagneticSystem<T>>,
    samples: Arc<[T]>,
    closing_shift: Arc<[T]>,
}

impl<T: Real> DiscreteLoop<T> {
    /// `samples` is `N × n` row-major, in any lift.
    pub fn new(system: Arc<MagneticSystem<T>>, samples: Vec<T>) -> Result<Self> {
        let n = system.dim();
        if samples.len() % n != 0 {
            return Err(Error::InvalidParameter("sample array is not N × n".into()));
        }
        let count = samples.len() / n;
        if count < MIN_SAMPLES {
            return Err(Error::TooFewSamples(count));
        }
        for m in 0..count {
            system.reduce_point(&samples[m * n..(m + 1) * n])?;
        }
        let mut lifted = samples;
        let limit = system.smallest_period().map(|p| p * T::lit(0.5));
        for m in 0..count {
            let next = (m + 1) % count;
            let mut worst = T::zero();
            for i in 0..n {
                let d = lifted[next * n + i] - lifted[m * n + i];
                let r = system.reduce_difference(i, d);
                worst = worst.max(r.abs());
                if next != 0 && r != d {
                    lifted[next * n + i] = lifted[m * n + i] + r;
                }
            }
            if let Some(limit) = limit {
                if worst >= limit {
                    return Err(Error::WrapAmbiguity { index: m, next });
                }
            }
        }
        let closing_shift: Vec<T> = (0..n)
            .map(|i| match system.periods()[i] {
                Some(_) => {
                    let last = lifted[(count - 1) * n + i];
                    let d = system.reduce_difference(i, lifted[i] - last);
                    last + d - lifted[i]
                }
                None => T::zero(),
            })
            .collect();
        Ok(Self {
            system,
            samples: lifted.into(),
            closing_shift: closing_shift.into(),
        })
    }

    /// Samples `f(t_m)` for `m = 0..count`.
    pub fn from_fn(system: Arc<MagneticSystem<T>>, count: usize, f: impl Fn(T) -> Vec<T>) -> Result<Self> {
        let mut samples = Vec::with_capacity(count * system.dim());
        for m in 0..count {
            let p = f(T::from_usize_lossy(m) / T::from_usize_lossy(count));
            if p.len() != system.dim() {
                return Err(Error::InvalidParameter("point dimension mismatch".into()));
            }
            samples.extend(p);
        }
        Self::new(system, samples)
    }

    /// Replaces the samples, keeping the system.
    pub fn with_samples(&self, samples: Vec<T>) -> Result<Self> {
        Self::new(self.system.clone(), samples)
    }

    pub fn system(&self) -> &MagneticSystem<T> {
        &self.system
    }

    pub fn system_arc(&self) -> &Arc<MagneticSystem<T>> {
        &self.system
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample(&self, m: usize) -> &[T] {
        let n = self.dim();
        &self.samples[m * n..(m + 1) * n]
    }

    pub fn closing_shift(&self) -> &[T] {
        &self.closing_shift
    }

    pub fn same_as(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.samples, &other.samples)
            || (Arc::ptr_eq(&self.system, &other.system) && self.samples[..] == other.samples[..])
    }

    /// Lifted coordinate `i` of node `m` for any integer `m`.
    #[inline]
    pub fn node(&self, m: isize, i: usize) -> T {
        let count = self.len() as isize;
        let wraps = m.div_euclid(count);
        let base = self.samples[wrap(m, self.len()) * self.dim() + i];
        if wraps == 0 {
            base
        } else {
            base + T::from_isize(wraps).expect("small") * self.closing_shift[i]
        }
    }

    /// Interpolated point and velocity at every edge midpoint.
    pub fn edges(&self) -> LoopEdges<T> {
        let n = self.dim();
        let count = self.len();
        let scale = T::from_usize_lossy(count);
        let mut points = vec![T::zero(); count * n];
        let mut velocities = vec![T::zero(); count * n];
        for e in 0..count {
            for i in 0..n {
                let e = e as isize;
                let (a, b, c, d) = (self.node(e - 1, i), self.node(e, i), self.node(e + 1, i), self.node(e + 2, i));
                points[e as usize * n + i] = staggered_mid(a, b, c, d);
                velocities[e as usize * n + i] = staggered_diff(a, b, c, d) * scale;
            }
        }
        LoopEdges {
            dim: n,
            points,
            velocities,
        }
    }

    /// Pointwise geometry at every edge midpoint.
    pub fn edge_geometry(&self) -> Result<(LoopEdges<T>, Vec<PointGeometry<T>>)> {
        let edges = self.edges();
        let geo = (0..self.len())
            .map(|e| PointGeometry::new(&self.system, edges.point(e)))
            .collect::<Result<Vec<_>>>()?;
        Ok((edges, geo))
    }

    /// Sum of chart-segment lengths measured with `g` at segment midpoints.
    pub fn polygon_length(&self) -> Result<T> {
        let n = self.dim();
        let mut total = T::zero();
        let mut mid = vec![T::zero(); n];
        let mut d = vec![T::zero(); n];
        for m in 0..self.len() {
            for i in 0..n {
                let a = self.node(m as isize, i);
                let b = self.node(m as isize + 1, i);
                mid[i] = (a + b) * T::lit(0.5);
                d[i] = b - a;
            }
            let g = self.system.metric_values::<T>(&self.system.reduce_point(&mid)?)?;
            total = total + crate::scalar::quad(&g, &d, &d).max(T::zero()).sqrt();
        }
        Ok(total)
    }

    /// Length `∫|γ̇|` by edge quadrature.
    pub fn length(&self) -> Result<T> {
        let edges = self.edges();
        let mut total = T::zero();
        for e in 0..self.len() {
            let y = self.system.reduce_point(edges.point(e))?;
            let g = self.system.metric_values::<T>(&y)?;
            let v = edges.velocity(e);
            total = total + crate::scalar::quad(&g, v, v).max(T::zero()).sqrt();
        }
        Ok(total / T::from_usize_lossy(self.len()))
    }

    /// Same curve traversed backwards, `t ↦ −t`.
    pub fn reversed(&self) -> Self {
        let n = self.dim();
        let count = self.len();
        let mut s = Vec::with_capacity(count * n);
        for m in 0..count {
            s.extend_from_slice(self.sample((count - m) % count));
        }
        Self::new(self.system.clone(), s).expect("reversal of a valid loop")
    }

    /// Samples reduced into the domain box, for output.
    pub fn reduced_samples(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.samples.len());
        for m in 0..self.len() {
            out.extend(self.system.reduce_point(self.sample(m)).expect("validated sample"));
        }
        out
    }

    /// Geodesic image `exp_{x_m}(h ξ_m)` of every sample.
    pub fn exp_perturb(&self, xi: &TangentField<T>, h: T) -> Result<Self> {
        if !xi.base.same_as(self) {
            return Err(Error::MismatchedLoops);
        }
        let n = self.dim();
        let mut out = Vec::with_capacity(self.samples.len());
        for m in 0..self.len() {
            let v: Vec<T> = xi.vector(m).iter().map(|&c| c * h).collect();
            out.extend(exp_map(&self.system, self.sample(m), &v, EXP_STEPS)?);
        }
        debug_assert_eq!(out.len(), self.len() * n);
        self.with_samples(out)
    }
}

const EXP_STEPS: usize = 8;

/// Christoffel contraction `Γ^i_jk a^j b^k` from first derivatives of `g`.
pub(crate) fn christoffel_contract<T: Real>(system: &MagneticSystem<T>, x: &[T], a: &[T], b: &[T]) -> Result<Vec<T>> {
    use crate::exprdsl::Dual;
    let n = system.dim();
    if system.metric_exprs().iter().all(|e| e.is_constant()) {
        return Ok(vec![T::zero(); n]);
    }
    let x = system.reduce_point(x)?;
    let g = system.metric_values::<T>(&x)?;
    let g_inv = crate::geometry::invert_spd(n, &g, &x)?;
    let mut dg = vec![T::zero(); n * n * n];
    let mut seeded: Vec<Dual<T>> = x.iter().map(|&p| Dual::new(p, T::zero())).collect();
    for k in 0..n {
        seeded[k].eps = T::one();
        let gd = system.metric_values(&seeded)?;
        seeded[k].eps = T::zero();
        for ij in 0..n * n {
            dg[k * n * n + ij] = gd[ij].eps;
        }
    }
    let dg = |k: usize, i: usize, j: usize| dg[(k * n + i) * n + j];
    let mut lower = vec![T::zero(); n];
    for (l, lo) in lower.iter_mut().enumerate() {
        let mut s = T::zero();
        for j in 0..n {
            for k in 0..n {
                s = s + (dg(j, l, k) + dg(k, j, l) - dg(l, j, k)) * a[j] * b[k];
            }
        }
        *lo = s * T::lit(0.5);
    }
    Ok(crate::scalar::mat_vec(&g_inv, &lower))
}

/// RK4 geodesic flow for unit time from `(x, v)`.
pub fn exp_map<T: Real>(system: &MagneticSystem<T>, x: &[T], v: &[T], steps: usize) -> Result<Vec<T>> {
    let n = system.dim();
    let h = T::one() / T::from_usize_lossy(steps);
    let mut x = x.to_vec();
    let mut v = v.to_vec();
    let accel = |x: &[T], v: &[T]| -> Result<Vec<T>> {
        Ok(christoffel_contract(system, x, v, v)?.into_iter().map(|c| -c).collect())
    };
    let half = T::lit(0.5);
    let sixth = T::lit(1.0 / 6.0);
    for _ in 0..steps {
        let k1x = v.clone();
        let k1v = accel(&x, &v)?;
        let x2: Vec<T> = (0..n).map(|i| x[i] + half * h * k1x[i]).collect();
        let v2: Vec<T> = (0..n).map(|i| v[i] + half * h * k1v[i]).collect();
        let k2v = accel(&x2, &v2)?;
        let x3: Vec<T> = (0..n).map(|i| x[i] + half * h * v2[i]).collect();
        let v3: Vec<T> = (0..n).map(|i| v[i] + half * h * k2v[i]).collect();
        let k3v = accel(&x3, &v3)?;
        let x4: Vec<T> = (0..n).map(|i| x[i] + h * v3[i]).collect();
        let v4: Vec<T> = (0..n).map(|i| v[i] + h * k3v[i]).collect();
        let k4v = accel(&x4, &v4)?;
        for i in 0..n {
            x[i] = x[i] + h * sixth * (k1x[i] + T::lit(2.0) * v2[i] + T::lit(2.0) * v3[i] + v4[i]);
            v[i] = v[i] + h * sixth * (k1v[i] + T::lit(2.0) * k2v[i] + T::lit(2.0) * k3v[i] + k4v[i]);
        }
    }
    Ok(x)
}

/// Edge midpoints `y_e` and velocities `v_e`.
#[derive(Clone, Debug)]
pub struct LoopEdges<T> {
    dim: usize,
    pub points: Vec<T>,
    pub velocities: Vec<T>,
}

impl<T: Real> LoopEdges<T> {
    pub fn point(&self, e: usize) -> &[T] {
        &self.points[e * self.dim..(e + 1) * self.dim]
    }

    pub fn velocity(&self, e: usize) -> &[T] {
        &self.velocities[e * self.dim..(e + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Vector field along a loop, in chart components at the samples.
#[derive(Clone, Debug)]
pub struct TangentField<T> {
    base: DiscreteLoop<T>,
    vectors: Vec<T>,
}

impl<T: Real> TangentField<T> {
    pub fn new(base: &DiscreteLoop<T>, vectors: Vec<T>) -> Result<Self> {
        if vectors.len() != base.samples.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} components, loop needs {}",
                vectors.len(),
                base.samples.len()
            )));
        }
        Ok(Self {
            base: base.clone(),
            vectors,
        })
    }

    pub fn zeros(base: &DiscreteLoop<T>) -> Self {
        Self {
            base: base.clone(),
            vectors: vec![T::zero(); base.samples.len()],
        }
    }

    pub fn from_fn(base: &DiscreteLoop<T>, f: impl Fn(usize, T) -> Vec<T>) -> Result<Self> {
        let count = base.len();
        let mut v = Vec::with_capacity(base.samples.len());
        for m in 0..count {
            v.extend(f(m, T::from_usize_lossy(m) / T::from_usize_lossy(count)));
        }
        Self::new(base, v)
    }

    pub fn base(&self) -> &DiscreteLoop<T> {
        &self.base
    }

    pub fn vectors(&self) -> &[T] {
        &self.vectors
    }

    pub fn into_vectors(self) -> Vec<T> {
        self.vectors
    }

    pub fn vector(&self, m: usize) -> &[T] {
        let n = self.base.dim();
        &self.vectors[m * n..(m + 1) * n]
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            base: self.base.clone(),
            vectors: self.vectors.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-T::one())
    }

    /// Midpoint interpolation and plain (non-covariant) derivative at edge `e`.
    pub(crate) fn edge_values(&self, e: usize, mid: &mut [T], der: &mut [T]) {
        let n = self.base.dim();
        let count = self.base.len();
        let scale = T::from_usize_lossy(count);
        let at = |o: isize, i: usize| self.vectors[wrap(e as isize + o, count) * n + i];
        for i in 0..n {
            let (a, b, c, d) = (at(-1, i), at(0, i), at(1, i), at(2, i));
            mid[i] = staggered_mid(a, b, c, d);
            der[i] = staggered_diff(a, b, c, d) * scale;
        }
    }
}

/// `γ̇(t_m)` by the periodic fourth-order centered difference.
pub fn tangent_of<T: Real>(lp: &DiscreteLoop<T>) -> Result<TangentField<T>> {
    let n = lp.dim();
    let count = lp.len();
    let scale = T::from_usize_lossy(count) / T::lit(12.0);
    let mut v = vec![T::zero(); count * n];
    for m in 0..count {
        let m_ = m as isize;
        for i in 0..n {
            let near = lp.node(m_ + 1, i) - lp.node(m_ - 1, i);
            let far = lp.node(m_ + 2, i) - lp.node(m_ - 2, i);
            v[m * n + i] = (T::lit(8.0) * near - far) * scale;
        }
    }
    TangentField::new(lp, v)
}

#[inline]
fn staggered_mid<T: Real>(a: T, b: T, c: T, d: T) -> T {
    (T::lit(9.0) * (b + c) - (a + d)) / T::lit(16.0)
}

#[inline]
fn staggered_diff<T: Real>(a: T, b: T, c: T, d: T) -> T {
    (T::lit(27.0) * (c - b) - (d - a)) / T::lit(24.0)
}

/// Nodal second derivative `γ̈(t_m)` (chart components, not covariant).
pub(crate) fn second_derivative_of<T: Real>(lp: &DiscreteLoop<T>) -> Vec<T> {
    let n = lp.dim();
    let count = lp.len();
    let w = nodal_second_weights::<T>();
    let scale = T::from_usize_lossy(count) * T::from_usize_lossy(count);
    let mut a = vec![T::zero(); count * n];
    for m in 0..count {
        for i in 0..n {
            let mut s = T::zero();
            for (k, &wk) in w.iter().enumerate() {
                s = s + wk * lp.node(m as isize + k as isize - 2, i);
            }
            a[m * n + i] = s * scale;
        }
    }
    a
}

/// H¹ pairing `∫ (ξ,η) + (Dξ,Dη)` with edge-midpoint quadrature; the
/// covariant derivative is `D'ξ + Γ(y_e)(v_e, ξ_e)`.
pub fn h1_inner<T: Real>(xi: &TangentField<T>, eta: &TangentField<T>) -> Result<T> {
    if !xi.base.same_as(&eta.base) {
        return Err(Error::MismatchedLoops);
    }
    let (edges, geo) = xi.base.edge_geometry()?;
    Ok(h1_inner_with(&edges, &geo, xi, eta))
}

pub(crate) fn covariant_edge<T: Real>(
    geo: &PointGeometry<T>,
    v: &[T],
    mid: &[T],
    der: &mut [T],
) {
    let n = geo.dim;
    for i in 0..n {
        let mut s = T::zero();
        for j in 0..n {
            if v[j] == T::zero() {
                continue;
            }
            for k in 0..n {
                s = s + geo.gamma(i, j, k) * v[j] * mid[k];
            }
        }
        der[i] = der[i] + s;
    }
}

pub(crate) fn h1_inner_with<T: Real>(
    edges: &LoopEdges<T>,
    geo: &[PointGeometry<T>],
    xi: &TangentField<T>,
    eta: &TangentField<T>,
) -> T {
    let n = xi.base.dim();
    let count = xi.base.len();
    let mut a = vec![T::zero(); n];
    let mut da = vec![T::zero(); n];
    let mut b = vec![T::zero(); n];
    let mut db = vec![T::zero(); n];
    let mut total = T::zero();
    for e in 0..count {
        xi.edge_values(e, &mut a, &mut da);
        eta.edge_values(e, &mut b, &mut db);
        covariant_edge(&geo[e], edges.velocity(e), &a, &mut da);
        covariant_edge(&geo[e], edges.velocity(e), &b, &mut db);
        total = total + geo[e].inner(&a, &b) + geo[e].inner(&da, &db);
    }
    total / T::from_usize_lossy(count)
}

/// Local `2n × 4n` map from the nodal values at `e-1..=e+2` to
/// `(ξ_e, Dξ_e)`, row-major.
pub(crate) fn edge_jacobian<T: Real>(geo: &PointGeometry<T>, v: &[T], count: usize) -> Vec<T> {
    let n = geo.dim;
    let pw = midpoint_weights::<T>();
    let dw = derivative_weights::<T>();
    let scale = T::from_usize_lossy(count);
    let cols = 4 * n;
    let mut j = vec![T::zero(); 2 * n * cols];
    // C^i_k = Γ^i_jk v^j
    let mut c = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let mut s = T::zero();
            for (jj, &vj) in v.iter().enumerate() {
                s = s + geo.gamma(i, jj, k) * vj;
            }
            c[i * n + k] = s;
        }
    }
    for s in 0..4 {
        for i in 0..n {
            j[i * cols + s * n + i] = pw[s];
            j[(n + i) * cols + s * n + i] = dw[s] * scale;
            for k in 0..n {
                j[(n + i) * cols + s * n + k] = j[(n + i) * cols + s * n + k] + c[i * n + k] * pw[s];
            }
        }
    }
    j
}

/// Envelope for matrices coupling nodes within three steps, cyclically.
pub(crate) fn cyclic_profile(count: usize, n: usize) -> Vec<usize> {
    (0..count * n)
        .map(|r| {
            let a = r / n;
            let mut first = a;
            for d in -3isize..=3 {
                let b = wrap(a as isize + d, count);
                first = first.min(b);
            }
            first * n
        })
        .collect()
}

/// H¹ Gram matrix on the nodal basis.
pub fn h1_gram<T: Real>(lp: &DiscreteLoop<T>) -> Result<ProfileMatrix<T>> {
    let (edges, geo) = lp.edge_geometry()?;
    Ok(h1_gram_with(lp, &edges, &geo))
}

pub(crate) fn h1_gram_with<T: Real>(lp: &DiscreteLoop<T>, edges: &LoopEdges<T>, geo: &[PointGeometry<T>]) -> ProfileMatrix<T> {
    let n = lp.dim();
    let count = lp.len();
    let mut m = ProfileMatrix::new(cyclic_profile(count, n));
    let cols = 4 * n;
    let w = T::one() / T::from_usize_lossy(count);
    for e in 0..count {
        let j = edge_jacobian(&geo[e], edges.velocity(e), count);
        let g = &geo[e].g;
        // local = Jᵀ diag(g, g) J
        let mut local = vec![T::zero(); cols * cols];
        for block in 0..2 {
            for a in 0..n {
                for b in 0..n {
                    let gab = g[a * n + b];
                    if gab == T::zero() {
                        continue;
                    }
                    let ra = &j[(block * n + a) * cols..(block * n + a + 1) * cols];
                    let rb = &j[(block * n + b) * cols..(block * n + b + 1) * cols];
                    for p in 0..cols {
                        if ra[p] == T::zero() {
                            continue;
                        }
                        for q in 0..cols {
                            local[p * cols + q] = local[p * cols + q] + ra[p] * gab * rb[q];
                        }
                    }
                }
            }
        }
        scatter(&mut m, &local, e, n, count, w);
    }
    m
}

/// Adds `w · local` (a `4n × 4n` block on nodes `e-1..=e+2`) into `m`.
/// Handles small `N` where stencil nodes coincide.
pub(crate) fn scatter<T: Real>(m: &mut ProfileMatrix<T>, local: &[T], e: usize, n: usize, count: usize, w: T) {
    let cols = 4 * n;
    for (sp, &op) in EDGE_OFFSETS.iter().enumerate() {
        let np = wrap(e as isize + op, count);
        for (sq, &oq) in EDGE_OFFSETS.iter().enumerate() {
            let nq = wrap(e as isize + oq, count);
            for a in 0..n {
                for b in 0..n {
                    let r = np * n + a;
                    let c = nq * n + b;
                    if c > r {
                        continue;
                    }
                    let v = local[(sp * n + a) * cols + sq * n + b];
                    if v != T::zero() {
                        m.add(r, c, w * v);
                    }
                }
            }
        }
    }
}

/// Interpolation rule used by [`resample`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Interpolation {
    #[default]
    Linear,
    /// Periodic Catmull–Rom through the samples.
    Cubic,
}

/// Arclength-uniform resampling to `new_count` samples, starting at sample 0.
pub fn resample<T: Real>(lp: &DiscreteLoop<T>, new_count: usize, interp: Interpolation) -> Result<DiscreteLoop<T>> {
    if new_count < MIN_SAMPLES {
        return Err(Error::TooFewSamples(new_count));
    }
    let n = lp.dim();
    let count = lp.len();
    let sys = lp.system();
    let mut cumulative = Vec::with_capacity(count + 1);
    cumulative.push(T::zero());
    let mut mid = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    for m in 0..count {
        for i in 0..n {
            let a = lp.node(m as isize, i);
            let b = lp.node(m as isize + 1, i);
            mid[i] = (a + b) * T::lit(0.5);
            d[i] = b - a;
        }
        let g = sys.metric_values::<T>(&sys.reduce_point(&mid)?)?;
        let seg = crate::scalar::quad(&g, &d, &d).max(T::zero()).sqrt();
        cumulative.push(cumulative[m] + seg);
    }
    let total = cumulative[count];
    if !total.is_finite() {
        return Err(Error::DegenerateLoop);
    }
    if total == T::zero() {
        return lp.with_samples(lp.sample(0).repeat(new_count));
    }
    let mut out = Vec::with_capacity(new_count * n);
    let mut seg = 0usize;
    for k in 0..new_count {
        let s = total * T::from_usize_lossy(k) / T::from_usize_lossy(new_count);
        while seg + 1 < count && cumulative[seg + 1] <= s {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let u = if len > T::zero() { (s - cumulative[seg]) / len } else { T::zero() };
        let j = seg as isize;
        for i in 0..n {
            let p1 = lp.node(j, i);
            let p2 = lp.node(j + 1, i);
            let value = match interp {
                Interpolation::Linear => p1 + (p2 - p1) * u,
                Interpolation::Cubic => {
                    let p0 = lp.node(j - 1, i);
                    let p3 = lp.node(j + 2, i);
                    let u2 = u * u;
                    let u3 = u2 * u;
                    let half = T::lit(0.5);
                    half * (T::lit(2.0) * p1
                        + (p2 - p0) * u
                        + (T::lit(2.0) * p0 - T::lit(5.0) * p1 + T::lit(4.0) * p2 - p3) * u2
                        + (T::lit(3.0) * (p1 - p2) + p3 - p0) * u3)
                }
            };
            out.push(value);
        }
    }
    lp.with_samples(out)
}

/// Random trigonometric loop with `modes` harmonics of amplitude up to
/// `scale / k`, centred uniformly in the inner 40% of the box. Retries with
/// halved amplitude until the loop fits the domain.
pub fn random_fourier_loop<T: Real, R: rand::Rng>(
    system: &Arc<MagneticSystem<T>>,
    rng: &mut R,
    count: usize,
    modes: usize,
    scale: f64,
) -> Result<DiscreteLoop<T>> {
    let n = system.dim();
    let center: Vec<f64> = system
        .domain_box()
        .iter()
        .map(|&(lo, hi)| {
            let (lo, hi) = (lo.to_f64_lossy(), hi.to_f64_lossy());
            let pad = (hi - lo) * 0.3;
            rng.gen_range(lo + pad..hi - pad)
        })
        .collect();
    let coef: Vec<f64> = (0..n * 2 * modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut amp = scale;
    for _ in 0..30 {
        let built = DiscreteLoop::from_fn(system.clone(), count, |t: T| {
            let t = t.to_f64_lossy();
            (0..n)
                .map(|i| {
                    let mut x = center[i];
                    for k in 0..modes {
                        let w = std::f64::consts::TAU * (k + 1) as f64 * t;
                        let c = &coef[(i * modes + k) * 2..];
                        x += amp * (c[0] * w.cos() + c[1] * w.sin()) / (k + 1) as f64;
                    }
                    T::lit(x)
                })
                .collect()
        });
        if let Ok(lp) = built {
            if lp.samples().chunks(n).all(|x| system.contains(x)) {
                return Ok(lp);
            }
        }
        amp *= 0.5;
    }
    Err(Error::DegenerateLoop)
}

#[cfg(test)]
mod tests;
