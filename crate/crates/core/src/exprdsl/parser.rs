//! Recursive descent parser.
//!
//! ```text
//! expr     := term { ("+" | "-") term }
//! term     := unary { ("*" | "/") unary }
//! unary    := ("-" | "+") unary | power
//! power    := primary { "^" exponent }
//! exponent := ("-" | "+") exponent | primary
//! primary  := number | "pi" | var | func "(" expr ")" | "(" expr ")"
//! var      := "x" digit { digit }          (x1 .. xn)
//! func     := "sin" | "cos" | "exp" | "log" | "ln" | "sqrt" | "tanh"
//! number   := digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
//! ```
//!
//! All binary operators, `^` included, associate to the left.

use super::ast::{BinaryOp, ExprAst, Node, NodeKind, UnaryOp};
use super::ExprError;

pub fn parse_expr(text: &str, dim: usize) -> Result<ExprAst, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        dim,
    };
    let root = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax(format!("unexpected character '{}'", p.src[p.pos] as char)));
    }
    Ok(ExprAst::from_root(root, dim))
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: String) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinaryOp::Add,
                Some(b'-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            let offset = self.pos;
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::new(NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)), offset);
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinaryOp::Mul,
                Some(b'/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            let offset = self.pos;
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::new(NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)), offset);
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'-') => {
                let offset = self.pos;
                self.pos += 1;
                let inner = self.unary()?;
                Ok(Node::new(NodeKind::Unary(UnaryOp::Neg, Box::new(inner)), offset))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let mut base = self.primary()?;
        while self.peek() == Some(b'^') {
            let offset = self.pos;
            self.pos += 1;
            let exponent = self.exponent()?;
            base = Node::new(
                NodeKind::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)),
                offset,
            );
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'-') => {
                let offset = self.pos;
                self.pos += 1;
                let inner = self.exponent()?;
                // fold "-<literal>" so integer exponents stay recognisable
                if let NodeKind::Const(c) = inner.kind {
                    return Ok(Node::new(NodeKind::Const(-c), offset));
                }
                Ok(Node::new(NodeKind::Unary(UnaryOp::Neg, Box::new(inner)), offset))
            }
            Some(b'+') => {
                self.pos += 1;
                self.exponent()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input".into())),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected ')'".into()));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.syntax(format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos > s
        };
        let mut any = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            any |= digits(self);
        }
        if !any {
            self.pos = start;
            return Err(self.syntax("malformed number".into()));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if !digits(self) {
                self.pos = save;
                return Err(self.syntax("malformed exponent".into()));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            message: format!("malformed number '{text}'"),
        })?;
        Ok(Node::new(NodeKind::Const(value), start))
    }

    fn identifier(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");

        if let Some(op) = UnaryOp::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.syntax(format!("expected '(' after '{name}'")));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.syntax("expected ')'".into()));
            }
            return Ok(Node::new(NodeKind::Unary(op, Box::new(arg)), start));
        }
        if name == "pi" {
            return Ok(Node::new(NodeKind::Const(std::f64::consts::PI), start));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().map_err(|_| ExprError::UnknownIdentifier {
                    offset: start,
                    name: name.to_string(),
                })?;
                if index == 0 || index > self.dim {
                    return Err(ExprError::VariableOutOfRange {
                        offset: start,
                        index,
                        dim: self.dim,
                    });
                }
                return Ok(Node::new(NodeKind::Var(index - 1), start));
            }
        }
        Err(ExprError::UnknownIdentifier {
            offset: start,
            name: name.to_string(),
        })
    }
}
