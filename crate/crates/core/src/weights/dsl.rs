//! Recursive-descent parser for the weight expression language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' atom)?
//! atom   := number | 't' | '(' expr ')' | func '(' expr ')'
//! func   := 'exp' | 'log' | 'sqrt' | 'min2' | 'max2'
//! ```
//!
//! `min2` and `max2` take two comma-separated arguments. A leading minus is
//! accepted on a factor and on an exponent atom (`-t`, `t^-0.5`); rendered
//! output never uses it and stays inside the grammar above.

use std::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Min2(Box<Expr>, Box<Expr>),
    Max2(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Num(x) => *x,
            Expr::Var => t,
            Expr::Neg(a) => -a.eval(t),
            Expr::Add(a, b) => a.eval(t) + b.eval(t),
            Expr::Sub(a, b) => a.eval(t) - b.eval(t),
            Expr::Mul(a, b) => a.eval(t) * b.eval(t),
            Expr::Div(a, b) => a.eval(t) / b.eval(t),
            Expr::Pow(a, b) => a.eval(t).powf(b.eval(t)),
            Expr::Call(Func::Exp, a) => a.eval(t).exp(),
            Expr::Call(Func::Log, a) => a.eval(t).ln(),
            Expr::Call(Func::Sqrt, a) => a.eval(t).sqrt(),
            Expr::Min2(a, b) => a.eval(t).min(b.eval(t)),
            Expr::Max2(a, b) => a.eval(t).max(b.eval(t)),
        }
    }

    /// Numeric value if the expression does not depend on `t`.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Expr::Var => None,
            Expr::Num(x) => Some(*x),
            _ if self.mentions_var() => None,
            _ => Some(self.eval(1.0)),
        }
    }

    fn mentions_var(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.mentions_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Min2(a, b)
            | Expr::Max2(a, b) => a.mentions_var() || b.mentions_var(),
        }
    }

    /// Recognizes `c`, `t`, `t^a`, `c*t^a` and `t^a*c` and returns the power `a`.
    pub fn power_template(&self) -> Option<f64> {
        fn bare_power(e: &Expr) -> Option<f64> {
            match e {
                Expr::Var => Some(1.0),
                Expr::Pow(base, exp) if **base == Expr::Var => exp.constant_value(),
                _ => None,
            }
        }
        if let Some(c) = self.constant_value() {
            return (c > 0.0).then_some(0.0);
        }
        if let Some(a) = bare_power(self) {
            return Some(a);
        }
        if let Expr::Mul(l, r) = self {
            if let (Some(c), Some(a)) = (l.constant_value(), bare_power(r)) {
                return (c > 0.0).then_some(a);
            }
            if let (Some(a), Some(c)) = (bare_power(l), r.constant_value()) {
                return (c > 0.0).then_some(a);
            }
        }
        None
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x < 0.0 {
        write!(f, "(0-{:?})", -x)
    } else {
        write!(f, "{:?}", x)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write_num(f, *x),
            Expr::Var => f.write_str("t"),
            Expr::Neg(a) => write!(f, "(0-{a})"),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Div(a, b) => write!(f, "({a}/{b})"),
            Expr::Pow(a, b) => {
                let base = match **a {
                    Expr::Num(x) if x >= 0.0 => format!("{:?}", x),
                    Expr::Var => "t".to_string(),
                    _ => format!("({a})"),
                };
                write!(f, "{base}^({b})")
            }
            Expr::Call(Func::Exp, a) => write!(f, "exp({a})"),
            Expr::Call(Func::Log, a) => write!(f, "log({a})"),
            Expr::Call(Func::Sqrt, a) => write!(f, "sqrt({a})"),
            Expr::Min2(a, b) => write!(f, "min2({a},{b})"),
            Expr::Max2(a, b) => write!(f, "max2({a},{b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // optional exponent, e.g. 1e-3
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Syntax {
                    position: start,
                    message: format!("malformed number '{text}'"),
                })?;
                out.push((start, Tok::Num(value)));
                continue;
            }
            _ if c.is_ascii_alphabetic() => {
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => {
                return Err(Error::Syntax {
                    position: start,
                    message: format!("unexpected character '{c}'"),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exponent = if self.peek() == Some(&Tok::Minus) {
                self.pos += 1;
                Expr::Neg(Box::new(self.atom()?))
            } else {
                self.atom()?
            };
            if self.peek() == Some(&Tok::Caret) {
                return self.err("chained '^' needs parentheses");
            }
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some((_, tok)) = self.toks.get(self.pos).cloned() else {
            return self.err("unexpected end of input");
        };
        match tok {
            Tok::Num(x) => {
                self.pos += 1;
                Ok(Expr::Num(x))
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if name == "t" {
                    self.pos += 1;
                    return Ok(Expr::Var);
                }
                let two_args = matches!(name.as_str(), "min2" | "max2");
                let func = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "log" => Some(Func::Log),
                    "sqrt" => Some(Func::Sqrt),
                    _ if two_args => None,
                    _ => return self.err(format!("unknown identifier '{name}'")),
                };
                self.pos += 1;
                self.expect(Tok::LParen, &format!("'(' after {name}"))?;
                let first = self.expr()?;
                let node = if two_args {
                    self.expect(Tok::Comma, &format!("',' in {name}"))?;
                    let second = self.expr()?;
                    if name == "min2" {
                        Expr::Min2(Box::new(first), Box::new(second))
                    } else {
                        Expr::Max2(Box::new(first), Box::new(second))
                    }
                } else {
                    Expr::Call(func.expect("single-argument function"), Box::new(first))
                };
                self.expect(Tok::RParen, "')'")?;
                Ok(node)
            }
            _ => self.err("expected number, 't', '(' or function"),
        }
    }
}

/// Parses a DSL expression in the variable `t`.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let toks = lex(src)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        end: src.len(),
    };
    let e = parser.expr()?;
    if parser.pos != parser.toks.len() {
        return parser.err("unexpected trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, t: f64) -> f64 {
        parse_expr(src).unwrap().eval(t)
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(ev("1+2*3", 0.0), 7.0);
        assert_eq!(ev("(1+2)*3", 0.0), 9.0);
        assert_eq!(ev("2*t^2", 3.0), 18.0);
        assert_eq!(ev("8/2/2", 0.0), 2.0);
        assert_eq!(ev("10-2-3", 0.0), 5.0);
        assert!((ev("exp(log(t))", 2.5) - 2.5).abs() < 1e-15);
        assert_eq!(ev("sqrt(t)", 16.0), 4.0);
        assert_eq!(ev("min2(t, 2)", 5.0), 2.0);
        assert_eq!(ev("max2(t, 2)", 5.0), 5.0);
        assert_eq!(ev("  t ^ ( 0.5 ) * ( 1 + t ) ", 4.0), 10.0);
        assert_eq!(ev("1e-3*t", 1000.0), 1.0);
        assert_eq!(ev("t^-1", 4.0), 0.25);
        assert_eq!(ev("-t^2", 3.0), -9.0);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let cases = [
            ("t^", 2usize),
            ("1 + ", 4),
            ("foo(t)", 0),
            ("t^2^3", 3),
            ("(t", 2),
            ("t $ 2", 2),
            ("min2(t)", 6),
            ("t t", 2),
        ];
        for (src, pos) in cases {
            match parse_expr(src) {
                Err(Error::Syntax { position, .. }) => assert_eq!(position, pos, "{src}"),
                other => panic!("{src}: expected syntax error, got {other:?}"),
            }
        }
    }

    #[test]
    fn render_stays_in_strict_grammar() {
        let e = parse_expr("-t^-0.5 + 3").unwrap();
        let text = e.to_string();
        assert!(!text.contains("^-"), "{text}");
        let back = parse_expr(&text).unwrap();
        for t in [0.1, 1.0, 7.0] {
            assert_eq!(e.eval(t), back.eval(t));
        }
    }

    #[test]
    fn power_templates() {
        assert_eq!(parse_expr("1").unwrap().power_template(), Some(0.0));
        assert_eq!(parse_expr("t").unwrap().power_template(), Some(1.0));
        assert_eq!(parse_expr("t^0.5").unwrap().power_template(), Some(0.5));
        assert_eq!(parse_expr("3*t^(0-2)").unwrap().power_template(), Some(-2.0));
        assert_eq!(parse_expr("t^2*0.5").unwrap().power_template(), Some(2.0));
        assert_eq!(parse_expr("t^0.5*(1+t)").unwrap().power_template(), None);
        assert_eq!(parse_expr("exp(t)").unwrap().power_template(), None);
    }
}
