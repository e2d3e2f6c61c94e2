//! A small expression language over the time variable `t`, used to specify
//! gauge functions in scenario files.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | atom
//! atom   := number | 't' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp'
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("expression error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Time,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let e = parser.expr()?;
        match parser.tokens.get(parser.pos) {
            None => Ok(e),
            Some((off, tok)) => Err(ParseError {
                offset: *off,
                message: format!("unexpected token {tok:?}"),
            }),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Time => t,
            Expr::Neg(a) => -a.eval(t),
            Expr::Add(a, b) => a.eval(t) + b.eval(t),
            Expr::Sub(a, b) => a.eval(t) - b.eval(t),
            Expr::Mul(a, b) => a.eval(t) * b.eval(t),
            Expr::Div(a, b) => a.eval(t) / b.eval(t),
            Expr::Sin(a) => a.eval(t).sin(),
            Expr::Cos(a) => a.eval(t).cos(),
            Expr::Exp(a) => a.eval(t).exp(),
        }
    }

    /// Symbolic `d/dt`.
    pub fn derivative(&self) -> Expr {
        use Expr::*;
        let bx = |e: Expr| Box::new(e);
        match self {
            Const(_) => Const(0.0),
            Time => Const(1.0),
            Neg(a) => Neg(bx(a.derivative())),
            Add(a, b) => Add(bx(a.derivative()), bx(b.derivative())),
            Sub(a, b) => Sub(bx(a.derivative()), bx(b.derivative())),
            Mul(a, b) => Add(
                bx(Mul(bx(a.derivative()), b.clone())),
                bx(Mul(a.clone(), bx(b.derivative()))),
            ),
            Div(a, b) => Div(
                bx(Sub(
                    bx(Mul(bx(a.derivative()), b.clone())),
                    bx(Mul(a.clone(), bx(b.derivative()))),
                )),
                bx(Mul(b.clone(), b.clone())),
            ),
            Sin(a) => Mul(bx(Cos(a.clone())), bx(a.derivative())),
            Cos(a) => Neg(bx(Mul(bx(Sin(a.clone())), bx(a.derivative())))),
            Exp(a) => Mul(bx(Exp(a.clone())), bx(a.derivative())),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Time => write!(f, "t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| ParseError {
                offset: start,
                message: format!("invalid number `{text}`"),
            })?;
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' => Token::Op(c),
                '(' => Token::LParen,
                ')' => Token::RParen,
                _ => {
                    return Err(ParseError {
                        offset: i,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push((i, tok));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(o, _)| *o)
            .or_else(|| self.tokens.last().map(|(o, _)| o + 1))
            .unwrap_or(0)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "t" => Ok(Expr::Time),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" => {
                        if self.peek() != Some(&Token::LParen) {
                            return self.error(format!("expected `(` after `{name}`"));
                        }
                        self.pos += 1;
                        let arg = Box::new(self.expr()?);
                        self.expect_rparen()?;
                        Ok(match name.as_str() {
                            "sin" => Expr::Sin(arg),
                            "cos" => Expr::Cos(arg),
                            _ => Expr::Exp(arg),
                        })
                    }
                    _ => {
                        self.pos -= 1;
                        self.error(format!("unknown identifier `{name}`"))
                    }
                }
            }
            Some(tok) => self.error(format!("unexpected token {tok:?}")),
            None => self.error("unexpected end of expression"),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.error("expected `)`")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("1 + 0.5*sin(2*t)").unwrap();
        assert_eq!(e.eval(0.0), 1.0);
        assert!((e.eval(0.3) - (1.0 + 0.5 * (0.6f64).sin())).abs() < 1e-15);
        let e = Expr::parse("-exp(-t/2) / (1 + cos(pi*t))").unwrap();
        let t = 0.4;
        let expected = -(-t / 2.0f64).exp() / (1.0 + (std::f64::consts::PI * t).cos());
        assert!((e.eval(t) - expected).abs() < 1e-15);
        assert_eq!(Expr::parse("2.5e-1").unwrap().eval(0.0), 0.25);
        assert_eq!(Expr::parse("2 - 3 - 4").unwrap().eval(0.0), -5.0);
        assert_eq!(Expr::parse("8 / 4 / 2").unwrap().eval(0.0), 1.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for src in [
            "1 + 0.5*sin(2*t)",
            "exp(cos(t)) * t / (2 + t*t)",
            "-(3 - t)",
            "7",
        ] {
            let e = Expr::parse(src).unwrap();
            let d = e.derivative();
            for &t in &[-1.3, 0.0, 0.7, 2.2] {
                let h = 1e-6;
                let fd = (e.eval(t + h) - e.eval(t - h)) / (2.0 * h);
                assert!((d.eval(t) - fd).abs() < 1e-8, "{src} at {t}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("sin t").is_err());
        assert!(Expr::parse("tan(t)").is_err());
        assert!(Expr::parse("(1 + t").is_err());
        assert!(Expr::parse("1 $ 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert_eq!(Expr::parse("x").unwrap_err().offset, 0);
    }
}
