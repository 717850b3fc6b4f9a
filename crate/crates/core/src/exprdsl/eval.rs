use super::ast::{BinaryOp, ExprAst, Node, NodeKind, UnaryOp};
use super::dual::{Dual, Dual2, ExprScalar};
use super::{DomainKind, ExprError};
use crate::scalar::Real;

/// Value with first and second directional derivatives along one seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualValue<T> {
    pub value: T,
    pub first: T,
    pub second: T,
}

fn check_dim(ast: &ExprAst, got: usize) -> Result<(), ExprError> {
    if ast.dim() != got {
        return Err(ExprError::DimensionMismatch {
            expected: ast.dim(),
            got,
        });
    }
    Ok(())
}

pub fn eval_expr<T: Real>(ast: &ExprAst, point: &[T]) -> Result<T, ExprError> {
    eval_generic::<T, T>(ast, point)
}

/// Evaluates over any [`ExprScalar`]; domain checks use the real part.
pub fn eval_generic<T: Real, S: ExprScalar<T>>(ast: &ExprAst, point: &[S]) -> Result<S, ExprError> {
    check_dim(ast, point.len())?;
    eval_node(ast.root(), point)
}

/// Integer exponent literal, including a negated literal.
fn integer_literal(node: &Node) -> Option<i32> {
    let c = match &node.kind {
        NodeKind::Const(c) => *c,
        NodeKind::Unary(UnaryOp::Neg, inner) => match inner.kind {
            NodeKind::Const(c) => -c,
            _ => return None,
        },
        _ => return None,
    };
    (c.fract() == 0.0 && c.abs() <= i32::MAX as f64).then_some(c as i32)
}

fn constant_value(node: &Node) -> Option<f64> {
    match &node.kind {
        NodeKind::Const(c) => Some(*c),
        NodeKind::Unary(UnaryOp::Neg, inner) => constant_value(inner).map(|c| -c),
        _ => None,
    }
}

fn domain(node: &Node, kind: DomainKind) -> ExprError {
    ExprError::Domain {
        offset: node.offset,
        kind,
    }
}

fn eval_node<T: Real, S: ExprScalar<T>>(node: &Node, x: &[S]) -> Result<S, ExprError> {
    Ok(match &node.kind {
        NodeKind::Const(c) => S::constant(T::lit(*c)),
        NodeKind::Var(i) => x[*i],
        NodeKind::Unary(op, a) => {
            let a = eval_node(a, x)?;
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Exp => a.exp(),
                UnaryOp::Tanh => a.tanh(),
                UnaryOp::Log => {
                    if !(a.re() > T::zero()) {
                        return Err(domain(node, DomainKind::LogNonPositive));
                    }
                    a.ln()
                }
                UnaryOp::Sqrt => {
                    if a.re() < T::zero() {
                        return Err(domain(node, DomainKind::SqrtNegative));
                    }
                    a.sqrt()
                }
            }
        }
        NodeKind::Binary(op, a, b) => {
            if *op == BinaryOp::Pow {
                return eval_pow(node, a, b, x);
            }
            let l = eval_node(a, x)?;
            let r = eval_node(b, x)?;
            match op {
                BinaryOp::Add => l + r,
                BinaryOp::Sub => l - r,
                BinaryOp::Mul => l * r,
                BinaryOp::Div => {
                    if r.re() == T::zero() {
                        return Err(domain(node, DomainKind::DivisionByZero));
                    }
                    l / r
                }
                BinaryOp::Pow => unreachable!(),
            }
        }
    })
}

fn eval_pow<T: Real, S: ExprScalar<T>>(
    node: &Node,
    base: &Node,
    exponent: &Node,
    x: &[S],
) -> Result<S, ExprError> {
    let b = eval_node(base, x)?;
    let zero = T::zero();
    if let Some(n) = integer_literal(exponent) {
        if n < 0 && b.re() == zero {
            return Err(domain(node, DomainKind::ZeroToNegativePower));
        }
        return Ok(b.powi(n));
    }
    if let Some(p) = constant_value(exponent) {
        if b.re() < zero {
            return Err(domain(node, DomainKind::NegativeBaseFractionalPower));
        }
        if b.re() == zero && p < 0.0 {
            return Err(domain(node, DomainKind::ZeroToNegativePower));
        }
        return Ok(b.powf_const(T::lit(p)));
    }
    let e = eval_node(exponent, x)?;
    if b.re() < zero {
        return Err(domain(node, DomainKind::NegativeBaseFractionalPower));
    }
    if b.re() == zero {
        if e.re() < zero {
            return Err(domain(node, DomainKind::ZeroToNegativePower));
        }
        return Ok(S::constant(if e.re() == zero { T::one() } else { zero }));
    }
    Ok((e * b.ln()).exp())
}

/// `first = ∇f·seed`, `second = seedᵀ (Hess f) seed` (zero when `order == 1`).
pub fn eval_directional<T: Real>(
    ast: &ExprAst,
    point: &[T],
    seed: &[T],
    order: u8,
) -> Result<DualValue<T>, ExprError> {
    check_dim(ast, point.len())?;
    check_dim(ast, seed.len())?;
    match order {
        1 => {
            let x: Vec<Dual<T>> = point
                .iter()
                .zip(seed)
                .map(|(&p, &s)| Dual::new(p, s))
                .collect();
            let r = eval_node(ast.root(), &x)?;
            Ok(DualValue {
                value: r.re,
                first: r.eps,
                second: T::zero(),
            })
        }
        2 => {
            let x: Vec<Dual2<T>> = point
                .iter()
                .zip(seed)
                .map(|(&p, &s)| Dual2::seeded(p, s, s))
                .collect();
            let r = eval_node(ast.root(), &x)?;
            Ok(DualValue {
                value: r.re.re,
                first: r.re.eps,
                second: r.eps.eps,
            })
        }
        o => Err(ExprError::InvalidOrder(o)),
    }
}

/// Mixed second derivative `aᵀ (Hess f) b`.
pub fn eval_mixed<T: Real>(ast: &ExprAst, point: &[T], a: &[T], b: &[T]) -> Result<T, ExprError> {
    check_dim(ast, point.len())?;
    check_dim(ast, a.len())?;
    check_dim(ast, b.len())?;
    let x: Vec<Dual2<T>> = (0..point.len())
        .map(|i| Dual2::seeded(point[i], a[i], b[i]))
        .collect();
    Ok(eval_node(ast.root(), &x)?.eps.eps)
}

/// Value, gradient and row-major Hessian. Coordinates outside the support
/// of the expression are skipped.
pub fn gradient_hessian<T: Real>(ast: &ExprAst, point: &[T]) -> Result<(T, Vec<T>, Vec<T>), ExprError> {
    check_dim(ast, point.len())?;
    let n = point.len();
    let support = ast.support();
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![T::zero(); n * n];
    let mut value = None;
    let active: Vec<usize> = (0..n).filter(|&i| support[i]).collect();
    let mut x: Vec<Dual2<T>> = point.iter().map(|&p| Dual2::seeded(p, T::zero(), T::zero())).collect();
    for (ai, &i) in active.iter().enumerate() {
        for &j in &active[ai..] {
            x[i].re.eps = T::one();
            x[j].eps.re = T::one();
            let r = eval_node(ast.root(), &x)?;
            x[i].re.eps = T::zero();
            x[j].eps.re = T::zero();
            value.get_or_insert(r.re.re);
            if i == j {
                grad[i] = r.re.eps;
            }
            hess[i * n + j] = r.eps.eps;
            hess[j * n + i] = r.eps.eps;
        }
    }
    let value = match value {
        Some(v) => v,
        None => eval_expr(ast, point)?,
    };
    Ok((value, grad, hess))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprdsl::parse_expr;
    use proptest::prelude::*;

    fn fd_first(ast: &ExprAst, p: &[f64], s: &[f64], h: f64) -> f64 {
        let shift = |t: f64| -> Vec<f64> { p.iter().zip(s).map(|(a, b)| a + t * b).collect() };
        (eval_expr(ast, &shift(h)).unwrap() - eval_expr(ast, &shift(-h)).unwrap()) / (2.0 * h)
    }

    fn fd_second(ast: &ExprAst, p: &[f64], s: &[f64], h: f64) -> f64 {
        let shift = |t: f64| -> Vec<f64> { p.iter().zip(s).map(|(a, b)| a + t * b).collect() };
        (eval_expr(ast, &shift(h)).unwrap() - 2.0 * eval_expr(ast, p).unwrap()
            + eval_expr(ast, &shift(-h)).unwrap())
            / (h * h)
    }

    #[test]
    fn plain_values() {
        let e = parse_expr("x1*x2", 2).unwrap();
        assert_eq!(eval_expr(&e, &[3.0, 4.0]).unwrap(), 12.0);
        let e = parse_expr("sin(x1)", 1).unwrap();
        assert_eq!(eval_expr(&e, &[0.0]).unwrap(), 0.0);
        let e = parse_expr("x1^2+1", 1).unwrap();
        assert_eq!(eval_expr(&e, &[2.0]).unwrap(), 5.0);
    }

    #[test]
    fn square_second_order() {
        let e = parse_expr("x1^2", 1).unwrap();
        let d = eval_directional(&e, &[3.0], &[1.0], 2).unwrap();
        assert_eq!((d.value, d.first, d.second), (9.0, 6.0, 2.0));
    }

    #[test]
    fn sine_first_order() {
        let e = parse_expr("sin(x1)", 1).unwrap();
        let d = eval_directional(&e, &[0.0], &[1.0], 1).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.first, 1.0);
    }

    #[test]
    fn product_against_differences() {
        let e = parse_expr("x1*x2", 2).unwrap();
        let (p, s) = ([1.0, 2.0], [1.0, 1.0]);
        let d = eval_directional(&e, &p, &s, 2).unwrap();
        assert_eq!(d.value, 2.0);
        assert!((d.first - fd_first(&e, &p, &s, 1e-5)).abs() <= 1e-7);
        assert!((d.second - fd_second(&e, &p, &s, 1e-5)).abs() <= 1e-4);
        assert!((d.first - 3.0).abs() < 1e-15 && (d.second - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constants_have_no_derivatives() {
        let e = parse_expr("3*pi - exp(1)", 2).unwrap();
        let d = eval_directional(&e, &[0.3, -1.2], &[0.7, 2.0], 2).unwrap();
        assert_eq!((d.first, d.second), (0.0, 0.0));
    }

    #[test]
    fn domain_errors_carry_offsets() {
        let e = parse_expr("1 + log(x1)", 1).unwrap();
        match eval_expr(&e, &[0.0]) {
            Err(ExprError::Domain { offset, kind }) => {
                assert_eq!(offset, 4);
                assert_eq!(kind, DomainKind::LogNonPositive);
            }
            other => panic!("unexpected {other:?}"),
        }
        let e = parse_expr("x1/x2", 2).unwrap();
        assert!(matches!(
            eval_expr(&e, &[1.0, 0.0]),
            Err(ExprError::Domain { offset: 2, kind: DomainKind::DivisionByZero })
        ));
        let e = parse_expr("x1^-2", 1).unwrap();
        assert!(matches!(
            eval_expr(&e, &[0.0]),
            Err(ExprError::Domain { kind: DomainKind::ZeroToNegativePower, .. })
        ));
        let e = parse_expr("x1^0.5", 1).unwrap();
        assert!(matches!(
            eval_expr(&e, &[-1.0]),
            Err(ExprError::Domain { kind: DomainKind::NegativeBaseFractionalPower, .. })
        ));
    }

    #[test]
    fn integer_powers_accept_negative_base() {
        let e = parse_expr("x1^3 + x1^-1", 1).unwrap();
        assert_eq!(eval_expr(&e, &[-2.0]).unwrap(), -8.5);
    }

    #[test]
    fn mixed_and_hessian() {
        let e = parse_expr("x1^2*x2 + sin(x2)", 3).unwrap();
        let p = [1.5, 0.3, 9.0];
        let (v, g, h) = gradient_hessian(&e, &p).unwrap();
        assert!((v - (2.25 * 0.3 + 0.3f64.sin())).abs() < 1e-15);
        assert!((g[0] - 2.0 * 1.5 * 0.3).abs() < 1e-14);
        assert!((g[1] - (2.25 + 0.3f64.cos())).abs() < 1e-14);
        assert_eq!(g[2], 0.0);
        assert!((h[1] - 3.0).abs() < 1e-14 && (h[3] - 3.0).abs() < 1e-14);
        assert!((h[4] + 0.3f64.sin()).abs() < 1e-14);
        let m = eval_mixed(&e, &p, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!((m - 3.0).abs() < 1e-14);
    }

    #[test]
    fn order_and_dimension_checked() {
        let e = parse_expr("x1", 2).unwrap();
        assert!(matches!(eval_directional(&e, &[0.0, 0.0], &[1.0, 0.0], 3), Err(ExprError::InvalidOrder(3))));
        assert!(matches!(eval_expr(&e, &[0.0]), Err(ExprError::DimensionMismatch { .. })));
    }

    #[test]
    fn works_in_single_precision() {
        let e = parse_expr("x1^2 + cos(x2)", 2).unwrap();
        let d = eval_directional(&e, &[2.0f32, 0.0], &[1.0, 1.0], 2).unwrap();
        assert_eq!(d.value, 5.0);
        assert!((d.first - 4.0).abs() < 1e-6);
        assert!((d.second - 1.0).abs() < 1e-6);
    }

    /// Random ASTs over polynomials and trig functions, as text.
    fn arb_text(depth: u32) -> BoxedStrategy<String> {
        let leaf = prop_oneof![
            (-3i32..4).prop_map(|c| format!("{c}")),
            (1usize..=3).prop_map(|i| format!("x{i}")),
            (0.1f64..2.0).prop_map(|c| format!("{c:.3}")),
        ];
        leaf.prop_recursive(depth, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})+({b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})-({b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
                (inner.clone(), 0u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
                inner.clone().prop_map(|a| format!("sin({a})")),
                inner.clone().prop_map(|a| format!("cos({a})")),
                inner.prop_map(|a| format!("-({a})")),
            ]
        })
        .boxed()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn first_order_matches_differences(
            text in arb_text(4),
            p in proptest::collection::vec(-1.5f64..1.5, 3),
            s in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let e = parse_expr(&text, 3).unwrap();
            let d = eval_directional(&e, &p, &s, 1).unwrap();
            let fd = fd_first(&e, &p, &s, 1e-5);
            let scale = d.first.abs().max(fd.abs()).max(1.0);
            prop_assert!((d.first - fd).abs() <= 1e-6 * scale, "{text}: {} vs {fd}", d.first);
        }

        #[test]
        fn linear_in_summands(
            a in arb_text(3),
            b in arb_text(3),
            p in proptest::collection::vec(-1.5f64..1.5, 3),
            s in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let ea = parse_expr(&a, 3).unwrap();
            let eb = parse_expr(&b, 3).unwrap();
            let es = parse_expr(&format!("({a})+({b})"), 3).unwrap();
            let da = eval_directional(&ea, &p, &s, 2).unwrap();
            let db = eval_directional(&eb, &p, &s, 2).unwrap();
            let ds = eval_directional(&es, &p, &s, 2).unwrap();
            prop_assert_eq!(ds.value, da.value + db.value);
            prop_assert_eq!(ds.first, da.first + db.first);
            prop_assert_eq!(ds.second, da.second + db.second);
        }

        #[test]
        fn deterministic(text in arb_text(4), p in proptest::collection::vec(-1.5f64..1.5, 3)) {
            let e = parse_expr(&text, 3).unwrap();
            let s = [0.3, -0.2, 0.9];
            let a = eval_directional(&e, &p, &s, 2).unwrap();
            let b = eval_directional(&e, &p, &s, 2).unwrap();
            prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
            prop_assert_eq!(a.first.to_bits(), b.first.to_bits());
            prop_assert_eq!(a.second.to_bits(), b.second.to_bits());
        }
    }
}
