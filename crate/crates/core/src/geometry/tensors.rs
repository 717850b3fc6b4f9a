use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Real;

use super::system::{FieldJet, MagneticSystem};

/// Every pointwise tensor derived from the metric and the potential.
///
/// Index layout (row-major, `n` = dimension):
/// - `christoffel[(i*n + j)*n + k] = Γ^i_jk`
/// - `riemann[((i*n + j)*n + k)*n + l] = R^i_jkl`, where
///   `R(X,Y)Z = R^i_jkl Z^j X^k Y^l ∂_i` and
///   `R(X,Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]`
/// - `field[i*n + j] = F_ij = ∂_i A_j − ∂_j A_i`
/// - `nabla_field[(k*n + i)*n + j] = (∇_k F)_ij`
#[derive(Clone, Debug)]
pub struct PointGeometry<T> {
    pub dim: usize,
    pub point: Vec<T>,
    pub g: Vec<T>,
    pub g_inv: Vec<T>,
    pub christoffel: Vec<T>,
    pub riemann: Vec<T>,
    pub potential: Vec<T>,
    pub field: Vec<T>,
    pub nabla_field: Vec<T>,
}

pub(crate) fn invert_spd<T: Real>(n: usize, g: &[T], x: &[T]) -> Result<Vec<T>> {
    let chol = Cholesky::new(&Matrix::from_row_major(n, n, g.to_vec())).map_err(|_| {
        Error::MetricNotPositiveDefinite {
            point: x.iter().map(|v| v.to_f64_lossy()).collect(),
        }
    })?;
    let mut inv = vec![T::zero(); n * n];
    let mut e = vec![T::zero(); n];
    for c in 0..n {
        e.iter_mut().for_each(|v| *v = T::zero());
        e[c] = T::one();
        let col = chol.solve(&e);
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    for r in 0..n {
        for c in r + 1..n {
            let s = (inv[r * n + c] + inv[c * n + r]) * T::lit(0.5);
            inv[r * n + c] = s;
            inv[c * n + r] = s;
        }
    }
    Ok(inv)
}

impl<T: Real> PointGeometry<T> {
    pub fn new(system: &MagneticSystem<T>, x: &[T]) -> Result<Self> {
        let jet = system.jet(x)?;
        Self::from_jet(system.dim(), x, &jet)
    }

    pub fn from_jet(n: usize, x: &[T], jet: &FieldJet<T>) -> Result<Self> {
        let half = T::lit(0.5);
        let g_inv = invert_spd(n, &jet.g, x)?;
        let dg = |k: usize, i: usize, j: usize| jet.dg[(k * n + i) * n + j];
        let d2g = |l: usize, k: usize, i: usize, j: usize| jet.d2g[((l * n + k) * n + i) * n + j];

        // Γ_ljk = ½(∂_j g_lk + ∂_k g_jl − ∂_l g_jk), lowered first index
        let mut lower = vec![T::zero(); n * n * n];
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    lower[(l * n + j) * n + k] = half * (dg(j, l, k) + dg(k, j, l) - dg(l, j, k));
                }
            }
        }
        let mut christoffel = vec![T::zero(); n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = T::zero();
                    for l in 0..n {
                        s = s + g_inv[i * n + l] * lower[(l * n + j) * n + k];
                    }
                    christoffel[(i * n + j) * n + k] = s;
                }
            }
        }
        let gam = |i: usize, j: usize, k: usize| christoffel[(i * n + j) * n + k];

        // ∂_m Γ^i_jk = −g^{ia} ∂_m g_ab Γ^b_jk + g^{il} ∂_m Γ_ljk
        let mut dchris = vec![T::zero(); n * n * n * n];
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = T::zero();
                        for a in 0..n {
                            let gia = g_inv[i * n + a];
                            if gia == T::zero() {
                                continue;
                            }
                            let mut inner = T::zero();
                            for b in 0..n {
                                inner = inner - dg(m, a, b) * gam(b, j, k);
                            }
                            inner = inner + half * (d2g(m, j, a, k) + d2g(m, k, j, a) - d2g(m, a, j, k));
                            s = s + gia * inner;
                        }
                        dchris[((m * n + i) * n + j) * n + k] = s;
                    }
                }
            }
        }
        let dgam = |m: usize, i: usize, j: usize, k: usize| dchris[((m * n + i) * n + j) * n + k];

        let mut riemann = vec![T::zero(); n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = dgam(k, i, l, j) - dgam(l, i, k, j);
                        for m in 0..n {
                            s = s + gam(i, k, m) * gam(m, l, j) - gam(i, l, m) * gam(m, k, j);
                        }
                        riemann[((i * n + j) * n + k) * n + l] = s;
                    }
                }
            }
        }

        let mut field = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                field[i * n + j] = jet.da[i * n + j] - jet.da[j * n + i];
            }
        }
        // ∂_k F_ij = ∂_k∂_i A_j − ∂_k∂_j A_i
        let dfield = |k: usize, i: usize, j: usize| jet.d2a[(k * n + i) * n + j] - jet.d2a[(k * n + j) * n + i];
        let mut nabla_field = vec![T::zero(); n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in i + 1..n {
                    let mut s = dfield(k, i, j);
                    for l in 0..n {
                        s = s - gam(l, k, i) * field[l * n + j] - gam(l, k, j) * field[i * n + l];
                    }
                    nabla_field[(k * n + i) * n + j] = s;
                    nabla_field[(k * n + j) * n + i] = -s;
                }
            }
        }

        Ok(Self {
            dim: n,
            point: x.to_vec(),
            g: jet.g.clone(),
            g_inv,
            christoffel,
            riemann,
            potential: jet.a.clone(),
            field,
            nabla_field,
        })
    }

    #[inline]
    pub fn gamma(&self, i: usize, j: usize, k: usize) -> T {
        self.christoffel[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    pub fn riemann_component(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        let n = self.dim;
        self.riemann[((i * n + j) * n + k) * n + l]
    }

    pub fn inner(&self, u: &[T], v: &[T]) -> T {
        crate::scalar::quad(&self.g, u, v)
    }

    pub fn norm(&self, v: &[T]) -> T {
        self.inner(v, v).max(T::zero()).sqrt()
    }

    /// `R(x,y)z`.
    pub fn curvature_apply(&self, x: &[T], y: &[T], z: &[T]) -> Vec<T> {
        let n = self.dim;
        let mut out = vec![T::zero(); n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = T::zero();
            for j in 0..n {
                if z[j] == T::zero() {
                    continue;
                }
                for k in 0..n {
                    if x[k] == T::zero() {
                        continue;
                    }
                    for l in 0..n {
                        s = s + self.riemann_component(i, j, k, l) * z[j] * x[k] * y[l];
                    }
                }
            }
            *o = s;
        }
        out
    }

    /// `(R(x,y)z, w)`.
    pub fn curvature_form(&self, x: &[T], y: &[T], z: &[T], w: &[T]) -> T {
        self.inner(&self.curvature_apply(x, y, z), w)
    }

    /// `K(u,v) = −Σ_α (R(u,e_α)v, e_α)` for the given orthonormal frame.
    pub fn ricci_with_frame(&self, frame: &[Vec<T>], u: &[T], v: &[T]) -> T {
        let mut s = T::zero();
        for e in frame {
            s = s - self.curvature_form(u, e, v, e);
        }
        s
    }

    /// `(∇_u F)_jk`, row-major.
    pub fn nabla_field_along(&self, u: &[T]) -> Vec<T> {
        let n = self.dim;
        let mut out = vec![T::zero(); n * n];
        for (k, &uk) in u.iter().enumerate() {
            if uk == T::zero() {
                continue;
            }
            for ij in 0..n * n {
                out[ij] = out[ij] + uk * self.nabla_field[k * n * n + ij];
            }
        }
        out
    }

    /// `G(u,v,w) = (∇_u F)_jk v^j w^k`.
    pub fn g_form(&self, u: &[T], v: &[T], w: &[T]) -> T {
        let m = self.nabla_field_along(u);
        let n = self.dim;
        let mut s = T::zero();
        for j in 0..n {
            for k in 0..n {
                s = s + m[j * n + k] * v[j] * w[k];
            }
        }
        s
    }

    /// Symmetrization of [`Self::g_form`] in its first two slots.
    pub fn g_hat(&self, u: &[T], v: &[T], w: &[T]) -> T {
        (self.g_form(u, v, w) + self.g_form(v, u, w)) * T::lit(0.5)
    }

    /// `H(w) = Σ_α Ĝ(e_α, e_α, w)`.
    pub fn h_with_frame(&self, frame: &[Vec<T>], w: &[T]) -> T {
        frame.iter().fold(T::zero(), |s, e| s + self.g_hat(e, e, w))
    }

    /// `F_ij u^i v^j`.
    pub fn field_form(&self, u: &[T], v: &[T]) -> T {
        crate::scalar::quad(&self.field, u, v)
    }

    /// Matrix `K_kj` with `K(u,v) = u^k K_kj v^j`.
    pub fn ricci_matrix(&self, frame: &[Vec<T>]) -> Vec<T> {
        let n = self.dim;
        let mut out = vec![T::zero(); n * n];
        for e in frame {
            let ge = crate::scalar::mat_vec(&self.g, e);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = T::zero();
                        for l in 0..n {
                            s = s + self.riemann_component(i, j, k, l) * e[l];
                        }
                        out[k * n + j] = out[k * n + j] - ge[i] * s;
                    }
                }
            }
        }
        out
    }

    /// Covector `h_k` with `H(w) = h_k w^k`.
    pub fn h_covector(&self, frame: &[Vec<T>]) -> Vec<T> {
        let n = self.dim;
        let mut out = vec![T::zero(); n];
        for e in frame {
            let m = self.nabla_field_along(e);
            for j in 0..n {
                for k in 0..n {
                    out[k] = out[k] + m[j * n + k] * e[j];
                }
            }
        }
        out
    }
}
