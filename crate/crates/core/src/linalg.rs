//! Small dense and profile linear algebra used by the solvers.

use crate::scalar::Real;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {index})")]
    NotPositiveDefinite { index: usize },
    #[error("matrix is singular (pivot {index})")]
    Singular { index: usize },
    #[error("eigen iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(T::zero(), |a, (&x, &y)| a + x * y))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `(A + Aᵀ)/2` in place.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                let s = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = s;
                self[(j, i)] = s;
            }
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// `√(vᵀ A v)`-free helper: `uᵀ A v`.
    pub fn bilinear(&self, u: &[T], v: &[T]) -> T {
        let av = self.mul_vec(v);
        u.iter().zip(&av).fold(T::zero(), |a, (&x, &y)| a + x * y)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self, LinalgError> {
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return Err(LinalgError::NotPositiveDefinite { index: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[T]) -> Vec<T> {
        let n = y.len();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s = s - self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.backward(&self.forward(b))
    }
}

/// LU with partial pivoting.
pub fn lu_solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    assert_eq!(n, b.len());
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs().max(T::min_positive_value());
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[(i, c)].abs().partial_cmp(&m[(j, c)].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(c);
        if !(m[(p, c)].abs() > scale * T::epsilon()) {
            return Err(LinalgError::Singular { index: c });
        }
        if p != c {
            for j in 0..n {
                m.data.swap(p * n + j, c * n + j);
            }
            x.swap(p, c);
        }
        let pivot = m[(c, c)];
        for r in c + 1..n {
            let f = m[(r, c)] / pivot;
            if f == T::zero() {
                continue;
            }
            for j in c..n {
                let v = m[(c, j)];
                m[(r, j)] = m[(r, j)] - f * v;
            }
            x[r] = x[r] - f * x[c];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s = s - m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    Ok(x)
}

/// Symmetric positive definite matrix in variable-band (envelope) storage.
/// Row `i` stores columns `first[i]..=i`; Cholesky fill stays inside the
/// envelope.
#[derive(Clone, Debug)]
pub struct ProfileMatrix<T> {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> ProfileMatrix<T> {
    /// `first[i] ≤ i` is the leftmost stored column of row `i`.
    pub fn new(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        let mut acc = 0;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i);
            start.push(acc);
            acc += i - f + 1;
        }
        start.push(acc);
        Self {
            first,
            start,
            data: vec![T::zero(); acc],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        (j >= self.first[i]).then(|| self.start[i] + j - self.first[i])
    }

    /// Adds to the symmetric pair `(i,j)`/`(j,i)`; only one call per
    /// unordered pair is needed.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) outside envelope"));
        self.data[s] = self.data[s] + v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |s| self.data[s])
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let f = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            for (k, &a) in row.iter().enumerate() {
                let j = f + k;
                y[i] = y[i] + a * x[j];
                if j != i {
                    y[j] = y[j] + a * x[i];
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in self.first[i]..=i {
                let v = self.get(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// In-place envelope Cholesky.
    pub fn cholesky(mut self) -> Result<ProfileCholesky<T>, LinalgError> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            for j in fi..=i {
                let fj = self.first[j];
                let lo = fi.max(fj);
                let mut s = self.data[self.start[i] + j - fi];
                for k in lo..j {
                    s = s - self.data[self.start[i] + k - fi] * self.data[self.start[j] + k - fj];
                }
                if j == i {
                    if !(s > T::zero()) {
                        return Err(LinalgError::NotPositiveDefinite { index: i });
                    }
                    self.data[self.start[i] + i - fi] = s.sqrt();
                } else {
                    let d = self.data[self.start[j] + j - fj];
                    self.data[self.start[i] + j - fi] = s / d;
                }
            }
        }
        Ok(ProfileCholesky { l: self })
    }
}

#[derive(Clone, Debug)]
pub struct ProfileCholesky<T> {
    l: ProfileMatrix<T>,
}

impl<T: Real> ProfileCholesky<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let l = &self.l;
        let n = l.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let f = l.first[i];
            let row = &l.data[l.start[i]..l.start[i + 1]];
            let mut s = y[i];
            for (k, &a) in row[..i - f].iter().enumerate() {
                s = s - a * y[f + k];
            }
            y[i] = s / row[i - f];
        }
        for i in (0..n).rev() {
            let f = l.first[i];
            let row = &l.data[l.start[i]..l.start[i + 1]];
            let xi = y[i] / row[i - f];
            y[i] = xi;
            for (k, &a) in row[..i - f].iter().enumerate() {
                y[f + k] = y[f + k] - a * xi;
            }
        }
        y
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Matrix<T>,
    pub sweeps: usize,
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
pub fn jacobi_eigen<T: Real>(a: &Matrix<T>, max_sweeps: usize) -> Result<SymmetricEigen<T>, LinalgError> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    m.symmetrize();
    let mut v = Matrix::identity(n);
    let total = m.data.iter().fold(T::zero(), |s, &x| s + x * x);
    let threshold = total * T::epsilon() * T::epsilon();
    let mut sweeps = 0;
    loop {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off = off + m[(i, j)] * m[(i, j)];
            }
        }
        if off + off <= threshold || n < 2 {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(LinalgError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, c)] = v[(k, i)];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        let b = Matrix::from_row_major(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = (0..n).map(|k| b[(i, k)] * b[(j, k)]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
            }
        }
        a
    }

    #[test]
    fn cholesky_and_lu_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(12, &mut rng);
        let x: Vec<f64> = (0..12).map(|i| i as f64 - 5.0).collect();
        let b = a.mul_vec(&x);
        let c = Cholesky::new(&a).unwrap().solve(&b);
        let l = lu_solve(&a, &b).unwrap();
        for i in 0..12 {
            assert!((c[i] - x[i]).abs() < 1e-9);
            assert!((l[i] - x[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(Cholesky::new(&a), Err(LinalgError::NotPositiveDefinite { index: 1 })));
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(lu_solve(&a, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn profile_matches_dense() {
        let n = 20;
        // cyclic band of half-width 2
        let first: Vec<usize> = (0..n).map(|i: usize| if i + 3 > n { 0 } else { i.saturating_sub(2) }).collect();
        let mut p = ProfileMatrix::new(first);
        for i in 0..n {
            p.add(i, i, 6.0);
            for d in 1..=2 {
                let j = (i + d) % n;
                p.add(i, j, -1.0);
            }
        }
        let dense = p.to_dense();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = dense.mul_vec(&x);
        let bp = p.mul_vec(&x);
        for i in 0..n {
            assert!((b[i] - bp[i]).abs() < 1e-12);
        }
        let sol = p.cholesky().unwrap().solve(&b);
        for i in 0..n {
            assert!((sol[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut a = random_spd(10, &mut rng);
        a[(0, 0)] -= 4.0;
        let e = jacobi_eigen(&a, 100).unwrap();
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for k in 0..10 {
            let v: Vec<f64> = (0..10).map(|i| e.vectors[(i, k)]).collect();
            let av = a.mul_vec(&v);
            for i in 0..10 {
                assert!((av[i] - e.values[k] * v[i]).abs() < 1e-10);
            }
        }
    }
}
