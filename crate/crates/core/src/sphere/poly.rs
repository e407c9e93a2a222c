//! Real polynomials in `x1..xn`, used as test functions restricted to the sphere.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate `x_{k+1}` (zero based `k`).
    pub fn coordinate(dim: usize, k: usize) -> Self {
        let mut exps = vec![0; dim];
        exps[k] = 1;
        let mut p = Self::zero(dim);
        p.add_term(exps, 1.0);
        p
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (f64, Vec<u32>)>) -> Self {
        let mut p = Self::zero(dim);
        for (c, e) in terms {
            assert_eq!(e.len(), dim);
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        let entry = self.terms.entry(exps).or_insert(0.0);
        *entry += c;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    pub fn scale(&self, c: f64) -> Self {
        Polynomial { dim: self.dim, terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect() }
    }

    pub fn add(&self, other: &Polynomial) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Self {
        let mut out = Self::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::constant(self.dim, 1.0), |acc, _| acc.mul(self))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| c * monomial(x, e)).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (e, c) in &self.terms {
            for k in 0..self.dim {
                if e[k] > 0 {
                    let mut d = e.clone();
                    d[k] -= 1;
                    g[k] += c * e[k] as f64 * monomial(x, &d);
                }
            }
        }
        g
    }

    /// Hessian in row-major (= column-major, it is symmetric) order.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut h = vec![0.0; n * n];
        for (e, c) in &self.terms {
            for j in 0..n {
                for k in j..n {
                    let factor = if j == k {
                        (e[j] * e[j].saturating_sub(1)) as f64
                    } else {
                        (e[j] * e[k]) as f64
                    };
                    if factor == 0.0 {
                        continue;
                    }
                    let mut d = e.clone();
                    d[j] -= 1;
                    d[k] -= 1;
                    let v = c * factor * monomial(x, &d);
                    h[j * n + k] += v;
                    if j != k {
                        h[k * n + j] += v;
                    }
                }
            }
        }
        h
    }

    /// Random polynomial of degree at most `max_degree` with coefficients
    /// uniform in `[-1, 1]` on a random subset of monomials.
    pub fn random(dim: usize, max_degree: u32, n_terms: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zero(dim);
        for _ in 0..n_terms {
            let deg = rng.random_range(0..=max_degree);
            let mut e = vec![0u32; dim];
            for _ in 0..deg {
                e[rng.random_range(0..dim)] += 1;
            }
            p.add_term(e, rng.random_range(-1.0..1.0));
        }
        p
    }

    /// Parses expressions like `"x1^2 - 2*x2*x3 + 0.5"` over `dim` variables.
    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0, dim };
        let p = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Parse(format!("trailing input in polynomial `{src}`")));
        }
        Ok(p)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in &self.terms {
            if *c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (k, &p) in e.iter().enumerate() {
                match p {
                    0 => {}
                    1 => write!(f, "*x{}", k + 1)?,
                    _ => write!(f, "*x{}^{}", k + 1, p)?,
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

fn monomial(x: &[f64], e: &[u32]) -> f64 {
    x.iter().zip(e).fold(1.0, |acc, (xi, &p)| acc * xi.powi(p as i32))
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Var(usize),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1
            }
            '-' => {
                out.push(Token::Minus);
                i += 1
            }
            '*' => {
                out.push(Token::Star);
                i += 1
            }
            '^' => {
                out.push(Token::Caret);
                i += 1
            }
            '(' => {
                out.push(Token::LParen);
                i += 1
            }
            ')' => {
                out.push(Token::RParen);
                i += 1
            }
            'x' | 'X' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let idx: usize = chars[start..j]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad variable at position {i} in `{src}`")))?;
                if idx == 0 {
                    return Err(Error::Parse("variables are numbered from x1".into()));
                }
                out.push(Token::Var(idx - 1));
                i = j;
            }
            d if d.is_ascii_digit() || d == '.' => {
                let mut j = i;
                while j < chars.len()
                    && (chars[j].is_ascii_digit()
                        || chars[j] == '.'
                        || chars[j] == 'e'
                        || ((chars[j] == '-' || chars[j] == '+') && j > i && chars[j - 1] == 'e'))
                {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                let v = s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
                out.push(Token::Num(v));
                i = j;
            }
            other => return Err(Error::Parse(format!("unexpected character `{other}` in `{src}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        while let Some(t) = self.peek() {
            match t {
                Token::Plus => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Token::Minus => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?.scale(-1.0));
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.factor()?;
        while let Some(Token::Star) = self.peek() {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Polynomial> {
        if let Some(Token::Minus) = self.peek() {
            self.pos += 1;
            return Ok(self.factor()?.scale(-1.0));
        }
        let base = self.atom()?;
        if let Some(Token::Caret) = self.peek() {
            self.pos += 1;
            match self.next() {
                Some(Token::Num(v)) if v >= 0.0 && v.fract() == 0.0 => Ok(base.pow(v as u32)),
                _ => Err(Error::Parse("exponent must be a non-negative integer".into())),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Polynomial> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Polynomial::constant(self.dim, v)),
            Some(Token::Var(k)) => {
                if k >= self.dim {
                    return Err(Error::Parse(format!("variable x{} exceeds dimension {}", k + 1, self.dim)));
                }
                Ok(Polynomial::coordinate(self.dim, k))
            }
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(Error::Parse("missing `)`".into())),
                }
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_eval() {
        let p = Polynomial::parse("x1^2 - 2*x2*x3 + 0.5", 3).unwrap();
        assert_eq!(p.eval(&[1.0, 2.0, 3.0]), 1.0 - 12.0 + 0.5);
        assert_eq!(p.degree(), 2);
        let q = Polynomial::parse("-(x1 + x2)^2", 2).unwrap();
        assert_eq!(q.eval(&[1.0, 2.0]), -9.0);
        assert_eq!(Polynomial::parse("1e-1*x1", 1).unwrap().eval(&[2.0]), 0.2);
    }

    #[test]
    fn parse_errors() {
        assert!(Polynomial::parse("x4", 3).is_err());
        assert!(Polynomial::parse("x1 +", 3).is_err());
        assert!(Polynomial::parse("x1^0.5", 3).is_err());
        assert!(Polynomial::parse("y", 3).is_err());
    }

    #[test]
    fn derivatives() {
        let p = Polynomial::parse("x1^3*x2 + x2^2", 2).unwrap();
        let x = [2.0, 3.0];
        assert_eq!(p.gradient(&x), vec![3.0 * 4.0 * 3.0, 8.0 + 6.0]);
        assert_eq!(p.hessian(&x), vec![6.0 * 2.0 * 3.0, 12.0, 12.0, 2.0]);
    }
}
