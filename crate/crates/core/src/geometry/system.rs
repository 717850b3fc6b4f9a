use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exprdsl::{eval_generic, gradient_hessian, parse_expr, ExprAst, ExprScalar};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Real;

/// Textual system description, as read from a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDefinition {
    pub name: String,
    pub dim: usize,
    /// Row-major `dim × dim` metric expressions.
    pub metric: Vec<Vec<String>>,
    pub potential: Vec<String>,
    #[serde(default)]
    pub periods: Vec<Option<f64>>,
    pub domain_box: Vec<[f64; 2]>,
    #[serde(default)]
    pub injectivity_radius_hint: Option<f64>,
}

/// Riemannian metric `g_ij` and magnetic potential `A_i` on a single chart.
#[derive(Clone, Debug)]
pub struct MagneticSystem<T> {
    name: String,
    dim: usize,
    metric: Vec<ExprAst>,
    potential: Vec<ExprAst>,
    periods: Vec<Option<T>>,
    domain_box: Vec<(T, T)>,
    injectivity_radius_hint: Option<T>,
}

/// Value and first two derivatives of every field component at a point.
#[derive(Clone, Debug)]
pub struct FieldJet<T> {
    pub g: Vec<T>,
    /// `dg[(k*n + i)*n + j] = ∂_k g_ij`
    pub dg: Vec<T>,
    /// `d2g[((l*n + k)*n + i)*n + j] = ∂_l ∂_k g_ij`
    pub d2g: Vec<T>,
    pub a: Vec<T>,
    /// `da[k*n + i] = ∂_k A_i`
    pub da: Vec<T>,
    /// `d2a[(l*n + k)*n + i] = ∂_l ∂_k A_i`
    pub d2a: Vec<T>,
}

impl<T: Real> MagneticSystem<T> {
    pub fn from_definition(def: &SystemDefinition) -> Result<Self> {
        let n = def.dim;
        if def.metric.len() != n || def.metric.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSystem(format!("metric must be {n}x{n}")));
        }
        let mut metric = Vec::with_capacity(n * n);
        for row in &def.metric {
            for text in row {
                metric.push(parse_expr(text, n)?);
            }
        }
        let potential = def
            .potential
            .iter()
            .map(|t| parse_expr(t, n))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let periods = if def.periods.is_empty() {
            vec![None; n]
        } else {
            def.periods.iter().map(|p| p.map(T::lit)).collect()
        };
        let domain_box = def.domain_box.iter().map(|b| (T::lit(b[0]), T::lit(b[1]))).collect();
        Self::from_parts(
            def.name.clone(),
            metric,
            potential,
            periods,
            domain_box,
            def.injectivity_radius_hint.map(T::lit),
        )
    }

    /// Assembles and validates a system from parsed expressions. `metric`
    /// is row-major `n × n`.
    pub fn from_parts(
        name: String,
        metric: Vec<ExprAst>,
        potential: Vec<ExprAst>,
        periods: Vec<Option<T>>,
        domain_box: Vec<(T, T)>,
        injectivity_radius_hint: Option<T>,
    ) -> Result<Self> {
        let n = potential.len();
        if n < 2 {
            return Err(Error::InvalidSystem("dimension must be at least 2".into()));
        }
        if metric.len() != n * n || periods.len() != n || domain_box.len() != n {
            return Err(Error::InvalidSystem("component counts disagree with the dimension".into()));
        }
        if metric.iter().chain(&potential).any(|e| e.dim() != n) {
            return Err(Error::InvalidSystem("expression dimension mismatch".into()));
        }
        for (i, p) in periods.iter().enumerate() {
            if let Some(p) = p {
                if !(*p > T::zero()) {
                    return Err(Error::InvalidSystem(format!("period of x{} must be positive", i + 1)));
                }
            }
            let (lo, hi) = domain_box[i];
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidSystem(format!("empty or unbounded box for x{}", i + 1)));
            }
        }
        if let Some(h) = injectivity_radius_hint {
            if !(h > T::zero()) {
                return Err(Error::InvalidSystem("injectivity radius hint must be positive".into()));
            }
        }
        let sys = Self {
            name,
            dim: n,
            metric,
            potential,
            periods,
            domain_box,
            injectivity_radius_hint,
        };
        sys.validate()?;
        Ok(sys)
    }

    fn probe_tolerance() -> T {
        T::lit(1e-9).max(T::epsilon() * T::lit(1e4))
    }

    /// Coarse grid over the box in index order; above `MAX_PROBES` points a
    /// Kronecker sequence of that length is used instead.
    pub(crate) fn probe_points(&self, per_axis: usize) -> Vec<Vec<T>> {
        const MAX_PROBES: usize = 4096;
        let n = self.dim;
        let box_point = |i: usize, s: T| {
            let (lo, hi) = self.domain_box[i];
            lo + (hi - lo) * s
        };
        match per_axis.checked_pow(n as u32).filter(|&t| t <= MAX_PROBES) {
            Some(total) => (0..total)
                .map(|mut idx| {
                    (0..n)
                        .map(|i| {
                            let k = idx % per_axis;
                            idx /= per_axis;
                            box_point(i, T::from_usize_lossy(k) / T::from_usize_lossy(per_axis - 1))
                        })
                        .collect()
                })
                .collect(),
            None => {
                let alpha: Vec<f64> = (0..n).map(|i| ((i + 2) as f64).sqrt().fract()).collect();
                (0..MAX_PROBES / 8)
                    .map(|k| (0..n).map(|i| box_point(i, T::lit((k as f64 * alpha[i]).fract()))).collect())
                    .collect()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim;
        let per_axis = if n <= 2 { 7 } else { (4096f64.powf(1.0 / n as f64) as usize).clamp(2, 7) };
        let tol = Self::probe_tolerance();
        for x in self.probe_points(per_axis) {
            let g = self.metric_values(&x)?;
            for i in 0..n {
                for j in i + 1..n {
                    let a = g[i * n + j];
                    let b: T = eval_generic(&self.metric[j * n + i], &x)?;
                    if (a - b).abs() > tol * (T::one() + a.abs()) {
                        return Err(Error::InvalidSystem(format!("metric not symmetric in ({},{})", i + 1, j + 1)));
                    }
                }
            }
            if Cholesky::new(&Matrix::from_row_major(n, n, g)).is_err() {
                return Err(Error::MetricNotPositiveDefinite {
                    point: x.iter().map(|v| v.to_f64_lossy()).collect(),
                });
            }
            for (axis, p) in self.periods.iter().enumerate() {
                let Some(p) = *p else { continue };
                let mut y = x.clone();
                y[axis] = y[axis] + p;
                for e in self.metric.iter().chain(&self.potential) {
                    let a: T = eval_generic(e, &x)?;
                    let b: T = eval_generic(e, &y)?;
                    if (a - b).abs() > tol * (T::one() + a.abs()) {
                        return Err(Error::InvalidSystem(format!(
                            "expression '{e}' is not invariant under the period of x{}",
                            axis + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric_exprs(&self) -> &[ExprAst] {
        &self.metric
    }

    pub fn potential_exprs(&self) -> &[ExprAst] {
        &self.potential
    }

    pub fn periods(&self) -> &[Option<T>] {
        &self.periods
    }

    pub fn domain_box(&self) -> &[(T, T)] {
        &self.domain_box
    }

    pub fn injectivity_radius_hint(&self) -> Option<T> {
        self.injectivity_radius_hint
    }

    pub fn smallest_period(&self) -> Option<T> {
        self.periods.iter().flatten().copied().reduce(T::min)
    }

    /// Reduces a periodic difference into `[-P/2, P/2)`.
    pub fn reduce_difference(&self, axis: usize, d: T) -> T {
        match self.periods[axis] {
            Some(p) => d - p * (d / p + T::lit(0.5)).floor(),
            None => d,
        }
    }

    /// Maps `x` into the domain box. Periodic coordinates wrap; the others
    /// must already lie in the box (within a small relative slack).
    pub fn reduce_point(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "point has {} coordinates, system has {}",
                x.len(),
                self.dim
            )));
        }
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let (lo, hi) = self.domain_box[i];
                if !v.is_finite() {
                    return Err(Error::OutsideDomain {
                        coordinate: i + 1,
                        value: v.to_f64_lossy(),
                    });
                }
                match self.periods[i] {
                    Some(p) => Ok(v - p * ((v - lo) / p).floor()),
                    None => {
                        let slack = T::lit(1e-9) * (hi - lo);
                        if v < lo - slack || v > hi + slack {
                            Err(Error::OutsideDomain {
                                coordinate: i + 1,
                                value: v.to_f64_lossy(),
                            })
                        } else {
                            Ok(v)
                        }
                    }
                }
            })
            .collect()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.reduce_point(x).is_ok()
    }

    /// Row-major metric at `x`, no domain check.
    pub fn metric_values<S: ExprScalar<T>>(&self, x: &[S]) -> Result<Vec<S>> {
        let n = self.dim;
        let mut g = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                if j < i {
                    g.push(g[j * n + i]);
                } else {
                    g.push(eval_generic(&self.metric[i * n + j], x)?);
                }
            }
        }
        Ok(g)
    }

    pub fn potential_values<S: ExprScalar<T>>(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self
            .potential
            .iter()
            .map(|e| eval_generic(e, x))
            .collect::<std::result::Result<Vec<_>, _>>()?)
    }

    /// Values and derivatives up to second order, after domain reduction.
    pub fn jet(&self, x: &[T]) -> Result<FieldJet<T>> {
        let x = self.reduce_point(x)?;
        let n = self.dim;
        let mut jet = FieldJet {
            g: vec![T::zero(); n * n],
            dg: vec![T::zero(); n * n * n],
            d2g: vec![T::zero(); n * n * n * n],
            a: vec![T::zero(); n],
            da: vec![T::zero(); n * n],
            d2a: vec![T::zero(); n * n * n],
        };
        for i in 0..n {
            for j in i..n {
                let (v, grad, hess) = gradient_hessian(&self.metric[i * n + j], &x)?;
                for (a, b) in [(i, j), (j, i)] {
                    jet.g[a * n + b] = v;
                    for k in 0..n {
                        jet.dg[(k * n + a) * n + b] = grad[k];
                        for l in 0..n {
                            jet.d2g[((l * n + k) * n + a) * n + b] = hess[l * n + k];
                        }
                    }
                }
            }
        }
        for i in 0..n {
            let (v, grad, hess) = gradient_hessian(&self.potential[i], &x)?;
            jet.a[i] = v;
            for k in 0..n {
                jet.da[k * n + i] = grad[k];
                for l in 0..n {
                    jet.d2a[(l * n + k) * n + i] = hess[l * n + k];
                }
            }
        }
        Ok(jet)
    }
}
