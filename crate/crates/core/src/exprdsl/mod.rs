//! Scalar field expressions over chart coordinates `x1..xn`.
//!
//! Text is parsed once into an immutable [`ExprAst`]; evaluation is generic
//! over [`ExprScalar`], which covers plain reals and nested dual numbers.

mod ast;
mod dual;
mod eval;
mod parser;

pub use ast::{BinaryOp, ExprAst, Node, NodeKind, UnaryOp};
pub use dual::{Dual, Dual2, ExprScalar};
pub use eval::{
    eval_directional, eval_expr, eval_generic, eval_mixed, gradient_hessian, DualValue,
};
pub use parser::parse_expr;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    LogNonPositive,
    DivisionByZero,
    ZeroToNegativePower,
    NegativeBaseFractionalPower,
    SqrtNegative,
}

impl std::fmt::Display for DomainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::LogNonPositive => "log of non-positive value",
            Self::DivisionByZero => "division by zero",
            Self::ZeroToNegativePower => "zero raised to a negative power",
            Self::NegativeBaseFractionalPower => "negative base with non-integer exponent",
            Self::SqrtNegative => "sqrt of negative value",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable x{index} at byte {offset} out of range for dimension {dim}")]
    VariableOutOfRange {
        offset: usize,
        index: usize,
        dim: usize,
    },
    #[error("domain error at byte {offset}: {kind}")]
    Domain { offset: usize, kind: DomainKind },
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("derivative order must be 1 or 2, got {0}")]
    InvalidOrder(u8),
}
