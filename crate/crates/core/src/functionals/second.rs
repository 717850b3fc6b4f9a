use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::PointGeometry;
use crate::linalg::{jacobi_eigen, Cholesky, LinalgError, Matrix};
use crate::loopspace::{
    edge_jacobian, h1_gram_with, parallel_transport_frame, resample, DiscreteLoop, Interpolation,
    LoopEdges, TangentField,
};
use crate::scalar::Real;

use super::{gradient, FunctionalParams};

/// Gradient norm above which the second-variation formula is not trusted.
pub const CRITICAL_TOLERANCE: f64 = 1e-4;

pub const MAX_SWEEPS: usize = 10_000;

/// The second-variation form at a loop, as per-edge `2n × 2n` blocks in
/// the variables `(ξ_e, Dξ_e)`.
#[derive(Clone, Debug)]
pub struct SecondVariation<T> {
    lp: DiscreteLoop<T>,
    edges: LoopEdges<T>,
    geo: Vec<PointGeometry<T>>,
    blocks: Vec<Vec<T>>,
    pub grad_norm: T,
}

impl<T: Real> SecondVariation<T> {
    /// Fails with [`Error::NotCritical`] when the gradient norm exceeds
    /// `1e-4`.
    pub fn new(lp: &DiscreteLoop<T>, p: &FunctionalParams<T>) -> Result<Self> {
        let sv = Self::unchecked(lp, p)?;
        if !(sv.grad_norm <= T::lit(CRITICAL_TOLERANCE)) {
            return Err(Error::NotCritical {
                grad_norm: sv.grad_norm.to_f64_lossy(),
                tolerance: CRITICAL_TOLERANCE,
            });
        }
        Ok(sv)
    }

    /// Same form without the criticality check.
    pub fn unchecked(lp: &DiscreteLoop<T>, p: &FunctionalParams<T>) -> Result<Self> {
        let grad_norm = gradient(lp, p)?.norm;
        let (edges, geo) = lp.edge_geometry()?;
        let blocks = (0..lp.len()).map(|e| local_block(&geo[e], edges.velocity(e), p)).collect();
        Ok(Self {
            lp: lp.clone(),
            edges,
            geo,
            blocks,
            grad_norm,
        })
    }

    pub fn base(&self) -> &DiscreteLoop<T> {
        &self.lp
    }

    /// `δ²S(ξ, η)`.
    pub fn form(&self, xi: &TangentField<T>, eta: &TangentField<T>) -> Result<T> {
        if !xi.base().same_as(&self.lp) || !eta.base().same_as(&self.lp) {
            return Err(Error::MismatchedLoops);
        }
        let n = self.lp.dim();
        let mut a = vec![T::zero(); 2 * n];
        let mut b = vec![T::zero(); 2 * n];
        let mut total = T::zero();
        for e in 0..self.lp.len() {
            local_values(xi, e, &self.geo[e], self.edges.velocity(e), &mut a);
            local_values(eta, e, &self.geo[e], self.edges.velocity(e), &mut b);
            let blk = &self.blocks[e];
            let w = 2 * n;
            for r in 0..w {
                if a[r] == T::zero() {
                    continue;
                }
                let mut row = T::zero();
                for c in 0..w {
                    row = row + blk[r * w + c] * b[c];
                }
                total = total + a[r] * row;
            }
        }
        Ok(total / T::from_usize_lossy(self.lp.len()))
    }

    /// Matrix of the form on the nodal coordinate basis (not symmetrized).
    pub fn matrix(&self) -> Matrix<T> {
        let n = self.lp.dim();
        let count = self.lp.len();
        let dim = count * n;
        let cols = 4 * n;
        let w = 2 * n;
        let mut q = Matrix::zeros(dim, dim);
        let inv = T::one() / T::from_usize_lossy(count);
        for e in 0..count {
            let j = edge_jacobian(&self.geo[e], self.edges.velocity(e), count);
            let blk = &self.blocks[e];
            // Jᵀ B J
            let mut bj = vec![T::zero(); w * cols];
            for r in 0..w {
                for c in 0..cols {
                    let mut s = T::zero();
                    for k in 0..w {
                        s = s + blk[r * w + k] * j[k * cols + c];
                    }
                    bj[r * cols + c] = s;
                }
            }
            for (sp, &op) in crate::loopspace::stencil::EDGE_OFFSETS.iter().enumerate() {
                let np = crate::loopspace::stencil::wrap(e as isize + op, count);
                for (sq, &oq) in crate::loopspace::stencil::EDGE_OFFSETS.iter().enumerate() {
                    let nq = crate::loopspace::stencil::wrap(e as isize + oq, count);
                    for a in 0..n {
                        for b in 0..n {
                            let (pc, qc) = (sp * n + a, sq * n + b);
                            let mut s = T::zero();
                            for k in 0..w {
                                s = s + j[k * cols + pc] * bj[k * cols + qc];
                            }
                            q[(np * n + a, nq * n + b)] = q[(np * n + a, nq * n + b)] + inv * s;
                        }
                    }
                }
            }
        }
        q
    }

    /// H¹ Gram matrix at the same loop.
    pub fn gram(&self) -> Matrix<T> {
        h1_gram_with(&self.lp, &self.edges, &self.geo).to_dense()
    }
}

/// `(ξ_e, Dξ_e)` at edge `e`.
fn local_values<T: Real>(xi: &TangentField<T>, e: usize, geo: &PointGeometry<T>, v: &[T], out: &mut [T]) {
    let n = geo.dim;
    let (mid, der) = out.split_at_mut(n);
    xi.edge_values(e, mid, der);
    crate::loopspace::covariant_edge(geo, v, mid, der);
}

/// Row-major `2n × 2n` block `B` with `δ²S = ∫ [ξ; Dξ]ᵀ B [η; Dη]`.
fn local_block<T: Real>(geo: &PointGeometry<T>, v: &[T], p: &FunctionalParams<T>) -> Vec<T> {
    let n = geo.dim;
    let w = 2 * n;
    let mut b = vec![T::zero(); w * w];
    let speed = geo.norm(v);
    let c1 = p.speed_weight(speed);
    let c2 = (T::one() + p.tau) * (p.tau - T::one()) * speed.powf(p.tau - T::lit(3.0));
    let gv = crate::scalar::mat_vec(&geo.g, v);
    for a in 0..n {
        for c in 0..n {
            b[(n + a) * w + n + c] = c1 * geo.g[a * n + c] + c2 * gv[a] * gv[c];
        }
    }
    // c1 (R(η,v)ξ, v) = c1 g_ip R^i_jkl ξ^j η^k v^l v^p
    for j in 0..n {
        for k in 0..n {
            let mut s = T::zero();
            for i in 0..n {
                let mut r = T::zero();
                for l in 0..n {
                    r = r + geo.riemann_component(i, j, k, l) * v[l];
                }
                s = s + gv[i] * r;
            }
            b[j * w + k] = b[j * w + k] + c1 * s;
        }
    }
    // (∇_η F)_jk ξ^j v^k + F_jk ξ^j (Dη)^k
    for j in 0..n {
        for i in 0..n {
            let mut s = T::zero();
            for k in 0..n {
                s = s + geo.nabla_field[(i * n + j) * n + k] * v[k];
            }
            b[j * w + i] = b[j * w + i] + s;
        }
        for k in 0..n {
            b[j * w + n + k] = b[j * w + n + k] + geo.field[j * n + k];
        }
    }
    b
}

/// `δ²S_{ε,τ}(ξ, η)` at a critical loop.
pub fn second_variation<T: Real>(
    lp: &DiscreteLoop<T>,
    p: &FunctionalParams<T>,
    xi: &TangentField<T>,
    eta: &TangentField<T>,
) -> Result<T> {
    SecondVariation::new(lp, p)?.form(xi, eta)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport<T> {
    pub index: usize,
    pub nullity: usize,
    /// Up to ten lowest generalized eigenvalues, ascending.
    pub smallest: Vec<T>,
    pub tol: T,
    pub dimension: usize,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpectrumOptions {
    /// Loops with more samples are resampled (cubic) to this count first.
    pub max_samples: usize,
    pub require_critical: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            max_samples: 64,
            require_critical: true,
        }
    }
}

/// Index and nullity of `δ²S` relative to the H¹ inner product.
pub fn hessian_spectrum<T: Real>(lp: &DiscreteLoop<T>, p: &FunctionalParams<T>) -> Result<SpectrumReport<T>> {
    hessian_spectrum_with(lp, p, SpectrumOptions::default())
}

pub fn hessian_spectrum_with<T: Real>(
    lp: &DiscreteLoop<T>,
    p: &FunctionalParams<T>,
    opts: SpectrumOptions,
) -> Result<SpectrumReport<T>> {
    if opts.require_critical {
        SecondVariation::new(lp, p)?;
    }
    let work = if lp.len() > opts.max_samples {
        resample(lp, opts.max_samples, Interpolation::Cubic)?
    } else {
        lp.clone()
    };
    let sv = SecondVariation::unchecked(&work, p)?;
    let mut q = sv.matrix();
    q.symmetrize();
    let m = sv.gram();
    let eig = generalized_eigenvalues(&q, &m)?;
    let scale = eig.iter().fold(T::zero(), |s, &x| s.max(x.abs()));
    let tol = T::lit(1e-7) * scale;
    let index = eig.iter().filter(|&&x| x < -tol).count();
    let nullity = eig.iter().filter(|&&x| x.abs() <= tol).count();
    Ok(SpectrumReport {
        index,
        nullity,
        smallest: eig.iter().take(10).copied().collect(),
        tol,
        dimension: eig.len(),
        samples: work.len(),
    })
}

/// Eigenvalues of `Q v = λ M v` for symmetric `Q` and SPD `M`, ascending.
pub(crate) fn generalized_eigenvalues<T: Real>(q: &Matrix<T>, m: &Matrix<T>) -> Result<Vec<T>> {
    let dim = q.rows();
    let chol = Cholesky::new(m)?;
    // C = L⁻¹ Q L⁻ᵀ: first X = L⁻¹ Q (column by column), then C = L⁻¹ Xᵀ
    let mut x = Matrix::zeros(dim, dim);
    let mut col = vec![T::zero(); dim];
    for c in 0..dim {
        for r in 0..dim {
            col[r] = q[(r, c)];
        }
        let y = chol.forward(&col);
        for r in 0..dim {
            x[(r, c)] = y[r];
        }
    }
    let mut cm = Matrix::zeros(dim, dim);
    for r in 0..dim {
        let y = chol.forward(x.row(r));
        for c in 0..dim {
            cm[(c, r)] = y[c];
        }
    }
    cm.symmetrize();
    let eig = jacobi_eigen(&cm, MAX_SWEEPS).map_err(|e| match e {
        LinalgError::NoConvergence { sweeps } => Error::Linalg(LinalgError::NoConvergence { sweeps }),
        other => Error::Linalg(other),
    })?;
    Ok(eig.values)
}

/// `C_km = Σ_j δ²S(β_jkm, β_jkm)` with `β_jkm = sin(πkt) θ_j` on
/// `[(m−1)/k, m/k]` and zero elsewhere, `θ_j` a parallel frame.
pub fn c_km<T: Real>(lp: &DiscreteLoop<T>, p: &FunctionalParams<T>, k: usize, m: usize) -> Result<T> {
    if k == 0 || m == 0 || m > k {
        return Err(Error::InvalidParameter(format!("need 1 <= m <= k, got k={k}, m={m}")));
    }
    let sv = SecondVariation::new(lp, p)?;
    let frame = parallel_transport_frame(lp)?;
    let n = lp.dim();
    let count = lp.len();
    let kt = T::from_usize_lossy(k);
    let lo = T::from_usize_lossy(m - 1) / kt;
    let hi = T::from_usize_lossy(m) / kt;
    let mut total = T::zero();
    for j in 0..n {
        let mut vectors = vec![T::zero(); count * n];
        for node in 0..count {
            let t = T::from_usize_lossy(node) / T::from_usize_lossy(count);
            if t < lo || t > hi {
                continue;
            }
            let s = (T::PI() * kt * t).sin();
            for i in 0..n {
                vectors[node * n + i] = s * frame.vector(node, j)[i];
            }
        }
        let beta = TangentField::new(lp, vectors)?;
        total = total + sv.form(&beta, &beta)?;
    }
    Ok(total)
}
