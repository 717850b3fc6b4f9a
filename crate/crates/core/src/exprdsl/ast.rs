use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl UnaryOp {
    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "exp" => Self::Exp,
            "log" | "ln" => Self::Log,
            "sqrt" => Self::Sqrt,
            "tanh" => Self::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Neg => "-",
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sqrt => "sqrt",
            Self::Tanh => "tanh",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            Self::Add => '+',
            Self::Sub => '-',
            Self::Mul => '*',
            Self::Div => '/',
            Self::Pow => '^',
        }
    }
}

/// One node of an expression tree. `offset` is the 0-based byte offset of
/// the token that produced the node in the source text.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Const(f64),
    /// 0-based coordinate index (`x1` is `Var(0)`).
    Var(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

impl Node {
    pub(crate) fn new(kind: NodeKind, offset: usize) -> Self {
        Self { kind, offset }
    }

    fn visit_vars(&self, f: &mut impl FnMut(usize)) {
        match &self.kind {
            NodeKind::Const(_) => {}
            NodeKind::Var(i) => f(*i),
            NodeKind::Unary(_, a) => a.visit_vars(f),
            NodeKind::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    fn shifted(&self, offset: usize) -> Node {
        let kind = match &self.kind {
            NodeKind::Const(c) => NodeKind::Const(*c),
            NodeKind::Var(i) => NodeKind::Var(i + offset),
            NodeKind::Unary(op, a) => NodeKind::Unary(*op, Box::new(a.shifted(offset))),
            NodeKind::Binary(op, a, b) => {
                NodeKind::Binary(*op, Box::new(a.shifted(offset)), Box::new(b.shifted(offset)))
            }
        };
        Node::new(kind, self.offset)
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            NodeKind::Const(c) if *c < 0.0 => 2,
            NodeKind::Const(_) | NodeKind::Var(_) => 5,
            NodeKind::Unary(UnaryOp::Neg, _) => 2,
            NodeKind::Unary(_, _) => 5,
            NodeKind::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => 0,
            NodeKind::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => 1,
            NodeKind::Binary(BinaryOp::Pow, _, _) => 3,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            NodeKind::Const(c) => {
                if c.fract() == 0.0 && c.abs() < 1e15 {
                    write!(f, "{}", *c as i64)
                } else {
                    write!(f, "{:e}", c)
                }
            }
            NodeKind::Var(i) => write!(f, "x{}", i + 1),
            NodeKind::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                self.write_operand(a, 2, f)
            }
            NodeKind::Unary(op, a) => {
                write!(f, "{}(", op.name())?;
                a.write(f)?;
                f.write_str(")")
            }
            NodeKind::Binary(op, a, b) => {
                let p = self.precedence();
                self.write_operand(a, p, f)?;
                write!(f, "{}", op.symbol())?;
                if let (BinaryOp::Pow, NodeKind::Const(c)) = (op, &b.kind) {
                    if *c < 0.0 {
                        return b.write(f);
                    }
                }
                // same-precedence right operands need parentheses (left associativity)
                self.write_operand(b, p + 1, f)
            }
        }
    }

    fn write_operand(&self, child: &Node, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if child.precedence() < min_prec {
            f.write_str("(")?;
            child.write(f)?;
            f.write_str(")")
        } else {
            child.write(f)
        }
    }
}

/// Parsed scalar field over an `n`-dimensional chart. Immutable and cheap to
/// clone; the tree is shared.
#[derive(Clone, Debug)]
pub struct ExprAst {
    root: Arc<Node>,
    dim: usize,
    support: Arc<[bool]>,
}

impl PartialEq for ExprAst {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.root == other.root
    }
}

impl ExprAst {
    pub(crate) fn from_root(root: Node, dim: usize) -> Self {
        let mut support = vec![false; dim];
        root.visit_vars(&mut |i| support[i] = true);
        Self {
            root: Arc::new(root),
            dim,
            support: support.into(),
        }
    }

    /// Constant expression.
    pub fn constant(value: f64, dim: usize) -> Self {
        Self::from_root(Node::new(NodeKind::Const(value), 0), dim)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `support()[i]` is true when the expression reads coordinate `i`.
    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn is_constant(&self) -> bool {
        !self.support.iter().any(|&s| s)
    }

    /// Returns the constant value when the tree is a single literal.
    pub fn as_literal(&self) -> Option<f64> {
        match self.root.kind {
            NodeKind::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Re-indexes every variable by `offset` into a chart of dimension `dim`.
    pub fn embed(&self, offset: usize, dim: usize) -> Self {
        assert!(offset + self.dim <= dim, "embedding does not fit");
        Self::from_root(self.root.shifted(offset), dim)
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f)
    }
}
