//! Small arithmetic/boolean expression language used for domain constraints
//! and fidelity cost functions in config files.
//!
//! ```text
//! expr   := or
//! or     := and ("or" and)*
//! and    := not ("and" not)*
//! not    := "not" not | cmp
//! cmp    := sum (("<" | "<=" | ">" | ">=" | "==" | "!=") sum)?
//! sum    := prod (("+" | "-") prod)*
//! prod   := unary (("*" | "/") unary)*
//! unary  := "-" unary | pow
//! pow    := atom ("^" unary)?
//! atom   := number | string | "true" | "false" | ident | ident "(" args ")" | "(" expr ")"
//! ```
//!
//! `&&`, `||` and `!` are accepted as aliases of `and`, `or` and `not`.

use std::fmt;

use crate::error::{Error, Result};

/// Runtime value of an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Bool(bool),
    Str(String),
}

impl Value {
    fn num(&self) -> Result<f64> {
        match self {
            Value::Num(v) => Ok(*v),
            other => Err(Error::Expression(format!("expected a number, found {other}"))),
        }
    }

    fn boolean(&self) -> Result<bool> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(Error::Expression(format!("expected a boolean, found {other}"))),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sqrt,
    Exp,
    Log,
    Abs,
    Sin,
    Cos,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "abs" => Func::Abs,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn arity(self) -> Option<usize> {
        match self {
            Func::Min | Func::Max => None,
            _ => Some(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Lit(Value),
    Var(usize),
    Neg(Box<Node>),
    Not(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// An expression compiled against a fixed list of variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    /// Parses `source`, resolving identifiers against `names`.
    pub fn compile(source: &str, names: &[String]) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens, pos: 0, names };
        let root = parser.or()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expression(format!("unexpected trailing input in `{source}`")));
        }
        Ok(Expr {
            source: source.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, vars: &[Value]) -> Result<Value> {
        eval(&self.root, vars)
    }

    pub fn eval_bool(&self, vars: &[Value]) -> Result<bool> {
        self.eval(vars)?.boolean()
    }

    pub fn eval_num(&self, vars: &[Value]) -> Result<f64> {
        self.eval(vars)?.num()
    }
}

fn eval(node: &Node, vars: &[Value]) -> Result<Value> {
    Ok(match node {
        Node::Lit(v) => v.clone(),
        Node::Var(i) => vars
            .get(*i)
            .cloned()
            .ok_or_else(|| Error::Expression(format!("variable index {i} unbound")))?,
        Node::Neg(inner) => Value::Num(-eval(inner, vars)?.num()?),
        Node::Not(inner) => Value::Bool(!eval(inner, vars)?.boolean()?),
        Node::Bin(op, l, r) => {
            // short-circuit the logical operators
            match op {
                BinOp::And => return Ok(Value::Bool(eval(l, vars)?.boolean()? && eval(r, vars)?.boolean()?)),
                BinOp::Or => return Ok(Value::Bool(eval(l, vars)?.boolean()? || eval(r, vars)?.boolean()?)),
                _ => {}
            }
            let a = eval(l, vars)?;
            let b = eval(r, vars)?;
            match op {
                BinOp::Eq => Value::Bool(a == b),
                BinOp::Ne => Value::Bool(a != b),
                _ => {
                    let (x, y) = (a.num()?, b.num()?);
                    match op {
                        BinOp::Add => Value::Num(x + y),
                        BinOp::Sub => Value::Num(x - y),
                        BinOp::Mul => Value::Num(x * y),
                        BinOp::Div => Value::Num(x / y),
                        BinOp::Pow => Value::Num(x.powf(y)),
                        BinOp::Lt => Value::Bool(x < y),
                        BinOp::Le => Value::Bool(x <= y),
                        BinOp::Gt => Value::Bool(x > y),
                        BinOp::Ge => Value::Bool(x >= y),
                        BinOp::Eq | BinOp::Ne | BinOp::And | BinOp::Or => unreachable!(),
                    }
                }
            }
        }
        Node::Call(func, args) => {
            let xs = args
                .iter()
                .map(|a| eval(a, vars).and_then(|v| v.num()))
                .collect::<Result<Vec<f64>>>()?;
            Value::Num(match func {
                Func::Sqrt => xs[0].sqrt(),
                Func::Exp => xs[0].exp(),
                Func::Log => xs[0].ln(),
                Func::Abs => xs[0].abs(),
                Func::Sin => xs[0].sin(),
                Func::Cos => xs[0].cos(),
                Func::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
                Func::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number `{text}`")))?;
            out.push(Tok::Num(v));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = c;
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != quote {
                i += 1;
            }
            if i == chars.len() {
                return Err(Error::Expression("unterminated string literal".into()));
            }
            out.push(Tok::Str(chars[start..i].iter().collect()));
            i += 1;
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let op2 = match two.as_str() {
            "<=" => Some("<="),
            ">=" => Some(">="),
            "==" => Some("=="),
            "!=" => Some("!="),
            "&&" => Some("and"),
            "||" => Some("or"),
            "**" => Some("^"),
            _ => None,
        };
        if let Some(op) = op2 {
            out.push(Tok::Op(op));
            i += 2;
            continue;
        }
        let tok = match c {
            '+' => Tok::Op("+"),
            '-' | '−' => Tok::Op("-"),
            '*' | '×' => Tok::Op("*"),
            '/' => Tok::Op("/"),
            '^' => Tok::Op("^"),
            '<' => Tok::Op("<"),
            '>' => Tok::Op(">"),
            '≤' => Tok::Op("<="),
            '≥' => Tok::Op(">="),
            '!' => Tok::Op("not"),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            other => {
                return Err(Error::Expression(format!("unexpected character `{other}`")));
            }
        };
        out.push(tok);
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, ops: &[&'static str]) -> Option<&'static str> {
        let hit = match self.peek() {
            Some(Tok::Op(op)) if ops.contains(op) => Some(*op),
            Some(Tok::Ident(word)) => ops.iter().copied().find(|op| *op == word.as_str()),
            _ => None,
        };
        if hit.is_some() {
            self.pos += 1;
        }
        hit
    }

    fn or(&mut self) -> Result<Node> {
        let mut lhs = self.and()?;
        while self.eat_op(&["or"]).is_some() {
            let rhs = self.and()?;
            lhs = Node::Bin(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Node> {
        let mut lhs = self.not()?;
        while self.eat_op(&["and"]).is_some() {
            let rhs = self.not()?;
            lhs = Node::Bin(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Node> {
        if self.eat_op(&["not"]).is_some() {
            return Ok(Node::Not(Box::new(self.not()?)));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Node> {
        let lhs = self.sum()?;
        if let Some(op) = self.eat_op(&["<=", ">=", "==", "!=", "<", ">"]) {
            let rhs = self.sum()?;
            let op = match op {
                "<" => BinOp::Lt,
                "<=" => BinOp::Le,
                ">" => BinOp::Gt,
                ">=" => BinOp::Ge,
                "==" => BinOp::Eq,
                _ => BinOp::Ne,
            };
            return Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.prod()?;
        while let Some(op) = self.eat_op(&["+", "-"]) {
            let rhs = self.prod()?;
            let op = if op == "+" { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prod(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&["*", "/"]) {
            let rhs = self.unary()?;
            let op = if op == "*" { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat_op(&["-"]).is_some() {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.pow()
    }

    fn pow(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat_op(&["^"]).is_some() {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Lit(Value::Num(v))),
            Tok::Str(s) => Ok(Node::Lit(Value::Str(s))),
            Tok::LParen => {
                let inner = self.or()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(Error::Expression("missing `)`".into())),
                }
            }
            Tok::Ident(name) => {
                match name.as_str() {
                    "true" => return Ok(Node::Lit(Value::Bool(true))),
                    "false" => return Ok(Node::Lit(Value::Bool(false))),
                    "pi" => return Ok(Node::Lit(Value::Num(std::f64::consts::PI))),
                    _ => {}
                }
                if let Some(Tok::LParen) = self.peek() {
                    let func =
                        Func::lookup(&name).ok_or_else(|| Error::Expression(format!("unknown function `{name}`")))?;
                    self.pos += 1;
                    let mut args = Vec::new();
                    if let Some(Tok::RParen) = self.peek() {
                        self.pos += 1;
                    } else {
                        loop {
                            args.push(self.or()?);
                            match self.peek() {
                                Some(Tok::Comma) => self.pos += 1,
                                Some(Tok::RParen) => {
                                    self.pos += 1;
                                    break;
                                }
                                _ => return Err(Error::Expression("expected `,` or `)`".into())),
                            }
                        }
                    }
                    let arity_ok = match func.arity() {
                        Some(n) => args.len() == n,
                        None => !args.is_empty(),
                    };
                    if !arity_ok {
                        return Err(Error::Expression(format!("wrong number of arguments to `{name}`")));
                    }
                    return Ok(Node::Call(func, args));
                }
                let idx = self
                    .names
                    .iter()
                    .position(|n| *n == name)
                    .ok_or_else(|| Error::Expression(format!("unknown variable `{name}`")))?;
                Ok(Node::Var(idx))
            }
            other => Err(Error::Expression(format!("unexpected token {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(ns: &[&str]) -> Vec<String> {
        ns.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn precedence_and_power() {
        let e = Expr::compile("1 + 2 * 3 ^ 2", &[]).unwrap();
        assert_eq!(e.eval_num(&[]).unwrap(), 19.0);
        let e = Expr::compile("-2 ^ 2", &[]).unwrap();
        assert_eq!(e.eval_num(&[]).unwrap(), -4.0);
        let e = Expr::compile("2 ^ 3 ^ 2", &[]).unwrap();
        assert_eq!(e.eval_num(&[]).unwrap(), 512.0);
    }

    #[test]
    fn ball_constraint() {
        let e = Expr::compile("x1^2 + x2^2 <= 0.5", &names(&["x1", "x2", "x3"])).unwrap();
        let inside = [Value::Num(0.1), Value::Num(0.2), Value::Num(0.9)];
        let outside = [Value::Num(0.7), Value::Num(0.7), Value::Num(0.1)];
        assert!(e.eval_bool(&inside).unwrap());
        assert!(!e.eval_bool(&outside).unwrap());
    }

    #[test]
    fn boolean_keywords_and_labels() {
        let e = Expr::compile("not (k == 'b') and (x > 1 or x < -1)", &names(&["x", "k"])).unwrap();
        let v = |x: f64, k: &str| [Value::Num(x), Value::Str(k.into())];
        assert!(e.eval_bool(&v(2.0, "a")).unwrap());
        assert!(!e.eval_bool(&v(2.0, "b")).unwrap());
        assert!(!e.eval_bool(&v(0.0, "a")).unwrap());
        let alias = Expr::compile("!(k == 'b') && (x > 1 || x < -1)", &names(&["x", "k"])).unwrap();
        assert_eq!(alias.eval_bool(&v(2.0, "a")), e.eval_bool(&v(2.0, "a")));
    }

    #[test]
    fn functions() {
        let e = Expr::compile("max(1, sqrt(16), abs(-3)) + min(2, 5)", &[]).unwrap();
        assert_eq!(e.eval_num(&[]).unwrap(), 6.0);
        assert!(Expr::compile("sqrt(1, 2)", &[]).is_err());
    }

    #[test]
    fn errors() {
        assert!(Expr::compile("x +", &names(&["x"])).is_err());
        assert!(Expr::compile("y", &names(&["x"])).is_err());
        assert!(Expr::compile("(1 + 2", &[]).is_err());
        assert!(Expr::compile("1 2", &[]).is_err());
        let e = Expr::compile("1 + true", &[]).unwrap();
        assert!(e.eval(&[]).is_err());
    }
}
