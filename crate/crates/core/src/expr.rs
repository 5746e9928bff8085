//! Tiny parser for polynomial expressions in the variables `zeta` and `r`,
//! used by scenario files to declare design functions. Supported syntax:
//! numbers, `zeta`, `r`, `+`, `-` (binary and unary), `*`, `^` with a
//! nonnegative integer exponent, and parentheses.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Zeta,
    R,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Neg(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, zeta: f64, r: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Zeta => zeta,
            Expr::R => r,
            Expr::Add(a, b) => a.eval(zeta, r) + b.eval(zeta, r),
            Expr::Sub(a, b) => a.eval(zeta, r) - b.eval(zeta, r),
            Expr::Mul(a, b) => a.eval(zeta, r) * b.eval(zeta, r),
            Expr::Pow(a, e) => a.eval(zeta, r).powi(*e as i32),
            Expr::Neg(a) => -a.eval(zeta, r),
        }
    }

    pub fn uses_zeta(&self) -> bool {
        match self {
            Expr::Zeta => true,
            Expr::Num(_) | Expr::R => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.uses_zeta() || b.uses_zeta(),
            Expr::Pow(a, _) | Expr::Neg(a) => a.uses_zeta(),
        }
    }
}

pub fn parse(input: &str) -> Result<Expr> {
    let tokens = tokenize(input)?;
    let mut p = Parser { tokens, pos: 0 };
    let expr = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(Error::Parse(format!(
            "unexpected trailing input in expression {input:?}"
        )));
    }
    Ok(expr)
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Zeta,
    R,
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn tokenize(input: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.' | 'e' | 'E') {
                    // allow exponent signs like 1e-3
                    if matches!(bytes[i] as char, 'e' | 'E')
                        && i + 1 < bytes.len()
                        && matches!(bytes[i + 1] as char, '+' | '-')
                    {
                        i += 1;
                    }
                    i += 1;
                }
                let text = &input[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number {text:?}")))?;
                tokens.push(Token::Num(v));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                    i += 1;
                }
                match &input[start..i] {
                    "zeta" => tokens.push(Token::Zeta),
                    "r" => tokens.push(Token::R),
                    other => {
                        return Err(Error::Parse(format!(
                            "unknown identifier {other:?}; expressions may use zeta and r"
                        )))
                    }
                }
            }
            other => {
                return Err(Error::Parse(format!(
                    "unexpected character {other:?} in expression"
                )))
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = if matches!(self.peek(), Some(Token::Minus)) {
            self.next();
            Expr::Neg(Box::new(self.term()?))
        } else {
            self.term()?
        };
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus) => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while matches!(self.peek(), Some(Token::Star)) {
            self.next();
            let rhs = self.factor()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.next();
            match self.next() {
                Some(Token::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                    Ok(Expr::Pow(Box::new(base), v as u32))
                }
                other => Err(Error::Parse(format!(
                    "exponent must be a nonnegative integer, got {other:?}"
                ))),
            }
        } else {
            Ok(base)
        }
    }

    fn base(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::Zeta) => Ok(Expr::Zeta),
            Some(Token::R) => Ok(Expr::R),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(Error::Parse("missing closing parenthesis".into())),
                }
            }
            other => Err(Error::Parse(format!(
                "expected a number, variable, or parenthesis, got {other:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_design_polynomials() {
        let e = parse("zeta^4 + r^4 + 1").unwrap();
        assert_eq!(e.eval(1.0, 1.0), 3.0);
        assert_eq!(e.eval(2.0, 0.0), 17.0);
        assert!(e.uses_zeta());

        let e = parse("r^4 + 1").unwrap();
        assert!(!e.uses_zeta());
        assert_eq!(e.eval(99.0, 2.0), 17.0);
    }

    #[test]
    fn parses_coefficients_and_grouping() {
        let e = parse("0.5*zeta^2 - 2*(r + 1)").unwrap();
        assert_eq!(e.eval(2.0, 0.0), 0.0);
        let e = parse("-zeta + 3").unwrap();
        assert_eq!(e.eval(1.0, 0.0), 2.0);
        let e = parse("1e-3 * r").unwrap();
        assert!((e.eval(0.0, 2.0) - 0.002).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("theta + 1").is_err());
        assert!(parse("zeta^-2").is_err());
        assert!(parse("zeta +").is_err());
        assert!(parse("(zeta").is_err());
        assert!(parse("zeta 1").is_err());
    }
}
