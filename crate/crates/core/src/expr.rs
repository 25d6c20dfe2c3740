//! A small arithmetic language for exponent fields.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("+" | "-") unary | primary ;
//! primary = number | "x" | "y" | "pi"
//!         | ("sin" | "cos" | "exp") "(" expr ")"
//!         | ("min" | "max") "(" expr "," expr ")"
//!         | "(" expr ")" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! Whitespace is ignored between tokens. In one dimension `y` evaluates to 0.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(a) => -a.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Sin(a) => a.eval(x, y).sin(),
            Expr::Cos(a) => a.eval(x, y).cos(),
            Expr::Exp(a) => a.eval(x, y).exp(),
            Expr::Min(a, b) => a.eval(x, y).min(b.eval(x, y)),
            Expr::Max(a, b) => a.eval(x, y).max(b.eval(x, y)),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse { position: self.pos, message: msg.to_string() }
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
                match ident {
                    "x" => Ok(Expr::X),
                    "y" => Ok(Expr::Y),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" => {
                        self.expect(b'(')?;
                        let a = Box::new(self.expr()?);
                        self.expect(b')')?;
                        Ok(match ident {
                            "sin" => Expr::Sin(a),
                            "cos" => Expr::Cos(a),
                            _ => Expr::Exp(a),
                        })
                    }
                    "min" | "max" => {
                        self.expect(b'(')?;
                        let a = Box::new(self.expr()?);
                        self.expect(b',')?;
                        let b = Box::new(self.expr()?);
                        self.expect(b')')?;
                        Ok(if ident == "min" { Expr::Min(a, b) } else { Expr::Max(a, b) })
                    }
                    _ => {
                        self.pos = start;
                        Err(self.error(&format!("unknown identifier '{ident}'")))
                    }
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark;
                return Err(self.error("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        text.parse::<f64>().map(Expr::Num).map_err(|_| Error::Parse {
            position: start,
            message: format!("malformed number '{text}'"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, 0.0)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(ev("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(ev("10 - 4 - 3", 0.0), 3.0);
        assert_eq!(ev("-2 * -x", 3.0), 6.0);
        assert_eq!(ev("2.5e-1 + .5 + 1E1", 0.0), 10.75);
    }

    #[test]
    fn functions_and_variables() {
        assert!((ev("2.5 + 0.4*sin(6*x)", 0.3) - (2.5 + 0.4 * (1.8f64).sin())).abs() < 1e-15);
        assert_eq!(ev("min(x, 2) + max(1, 0)", 5.0), 3.0);
        assert!((ev("exp(0) + cos(pi)", 0.0)).abs() < 1e-15);
        assert_eq!(Expr::parse("x + 2*y").unwrap().eval(1.0, 3.0), 7.0);
    }

    #[test]
    fn errors_carry_position() {
        match Expr::parse("2 + * 3") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        match Expr::parse("2 + foo(x)") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Expr::parse("(1 + 2"), Err(Error::Parse { position: 6, .. })));
        assert!(matches!(Expr::parse("1 2"), Err(Error::Parse { position: 2, .. })));
        assert!(matches!(Expr::parse(""), Err(Error::Parse { position: 0, .. })));
        assert!(matches!(Expr::parse("1e+"), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("max(1)"), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("2 ^ 3"), Err(Error::Parse { position: 2, .. })));
    }
}
