//! Exact multivariate polynomials in up to three variables.
//!
//! Coefficients are arbitrary-precision rationals so that sums, products and
//! derivatives never lose information; a parallel `f64` copy of every
//! coefficient is kept for fast numerical evaluation.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Largest supported phase-space dimension.
pub const MAX_DIM: usize = 3;

/// Exponent tuple of a monomial. Unused trailing slots are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct Monomial(pub [u16; MAX_DIM]);

impl Monomial {
    pub fn one() -> Self {
        Monomial([0; MAX_DIM])
    }

    pub fn var(i: usize) -> Self {
        let mut e = [0; MAX_DIM];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut e = [0; MAX_DIM];
        for (k, slot) in e.iter_mut().enumerate() {
            *slot = self.0[k] + other.0[k];
        }
        Monomial(e)
    }

    fn eval(&self, p: &[f64]) -> f64 {
        let mut v = 1.0;
        for (k, &e) in self.0.iter().enumerate() {
            if e != 0 {
                v *= p[k].powi(e as i32);
            }
        }
        v
    }
}

/// Graded lexicographic order: total degree first, then exponents of
/// `x1, x2, x3` compared lexicographically.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Closed interval used for cheap range bounds of a polynomial over a box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && self.hi >= 0.0
    }

    fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }

    fn mul(self, o: Interval) -> Interval {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        Interval::new(
            c.iter().cloned().fold(f64::INFINITY, f64::min),
            c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    fn scale(self, c: f64) -> Interval {
        if c >= 0.0 {
            Interval::new(self.lo * c, self.hi * c)
        } else {
            Interval::new(self.hi * c, self.lo * c)
        }
    }

    fn powi(self, e: u16) -> Interval {
        if e == 0 {
            return Interval::new(1.0, 1.0);
        }
        let a = self.lo.powi(e as i32);
        let b = self.hi.powi(e as i32);
        if e % 2 == 1 {
            Interval::new(a, b)
        } else if self.contains_zero() {
            Interval::new(0.0, a.max(b))
        } else {
            Interval::new(a.min(b), a.max(b))
        }
    }
}

/// Multivariate polynomial with exact rational coefficients.
///
/// Terms are kept sorted in graded-lexicographic order with no repeated
/// monomials and no zero coefficients; the zero polynomial has no terms.
#[derive(Clone, Debug)]
pub struct Polynomial {
    dim: usize,
    monomials: Vec<Monomial>,
    coeffs: Vec<BigRational>,
    values: Vec<f64>,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.monomials == other.monomials && self.coeffs == other.coeffs
    }
}

impl Eq for Polynomial {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported dimension {0} (expected 1..=3)")]
    BadDimension(usize),
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },
    #[error("unknown variable `{name}` at column {column} in a {dim}-dimensional system")]
    UnknownVariable { name: String, column: usize, dim: usize },
}

fn rational_from_f64(c: f64) -> BigRational {
    BigRational::from_float(c).expect("finite coefficient")
}

fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        // Fall back to an explicit quotient for huge numerators/denominators.
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

impl Polynomial {
    fn from_map(dim: usize, map: BTreeMap<Monomial, BigRational>) -> Self {
        let mut monomials = Vec::with_capacity(map.len());
        let mut coeffs = Vec::with_capacity(map.len());
        let mut values = Vec::with_capacity(map.len());
        for (m, c) in map {
            if c.is_zero() {
                continue;
            }
            values.push(rational_to_f64(&c));
            monomials.push(m);
            coeffs.push(c);
        }
        Polynomial {
            dim,
            monomials,
            coeffs,
            values,
        }
    }

    /// Builds a polynomial from `(coefficient, exponents)` pairs; repeated
    /// exponents are summed.
    pub fn from_terms(dim: usize, terms: &[(f64, &[u16])]) -> Self {
        let mut map: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (c, exps) in terms {
            let mut e = [0u16; MAX_DIM];
            e[..exps.len()].copy_from_slice(exps);
            *map.entry(Monomial(e)).or_insert_with(BigRational::zero) += rational_from_f64(*c);
        }
        Self::from_map(dim, map)
    }

    pub fn from_rational_terms(dim: usize, terms: Vec<(BigRational, Monomial)>) -> Self {
        let mut map: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (c, m) in terms {
            *map.entry(m).or_insert_with(BigRational::zero) += c;
        }
        Self::from_map(dim, map)
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_map(dim, BTreeMap::new())
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_rational_terms(dim, vec![(rational_from_f64(c), Monomial::one())])
    }

    /// The coordinate function `x_{i+1}`.
    pub fn var(dim: usize, i: usize) -> Self {
        assert!(i < dim, "variable index out of range");
        Self::from_rational_terms(dim, vec![(BigRational::one(), Monomial::var(i))])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.monomials.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Iterates `(coefficient, monomial)` in canonical order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&BigRational, &Monomial)> {
        self.coeffs.iter().zip(self.monomials.iter())
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    fn check_dim(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.dim != other.dim {
            return Err(PolyError::DimensionMismatch(self.dim, other.dim));
        }
        Ok(())
    }

    fn to_map(&self) -> BTreeMap<Monomial, BigRational> {
        self.monomials
            .iter()
            .cloned()
            .zip(self.coeffs.iter().cloned())
            .collect()
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut map = self.to_map();
        for (c, m) in other.terms() {
            *map.entry(*m).or_insert_with(BigRational::zero) += c;
        }
        Ok(Self::from_map(self.dim, map))
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut map = self.to_map();
        for (c, m) in other.terms() {
            *map.entry(*m).or_insert_with(BigRational::zero) -= c;
        }
        Ok(Self::from_map(self.dim, map))
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dim(other)?;
        let mut map: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (a, ma) in self.terms() {
            for (b, mb) in other.terms() {
                *map.entry(ma.mul(mb)).or_insert_with(BigRational::zero) += a * b;
            }
        }
        Ok(Self::from_map(self.dim, map))
    }

    pub fn neg(&self) -> Polynomial {
        self.scale_exact(&-BigRational::one())
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        self.scale_exact(&rational_from_f64(c))
    }

    pub fn scale_exact(&self, c: &BigRational) -> Polynomial {
        let map = self.terms().map(|(a, m)| (*m, a * c)).collect();
        Self::from_map(self.dim, map)
    }

    /// Partial derivative with respect to `x_{i+1}`.
    pub fn derivative(&self, i: usize) -> Polynomial {
        assert!(i < self.dim, "derivative index out of range");
        let mut map = BTreeMap::new();
        for (c, m) in self.terms() {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut d = *m;
            d.0[i] -= 1;
            map.insert(d, c * BigRational::from_integer(BigInt::from(e)));
        }
        Self::from_map(self.dim, map)
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.dim).map(|i| self.derivative(i)).collect()
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        debug_assert!(p.len() >= self.dim);
        self.values
            .iter()
            .zip(self.monomials.iter())
            .map(|(c, m)| c * m.eval(p))
            .sum()
    }

    pub fn eval_gradient(&self, p: &[f64], out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate().take(self.dim) {
            let mut s = 0.0;
            for (c, m) in self.values.iter().zip(self.monomials.iter()) {
                let e = m.0[i];
                if e == 0 {
                    continue;
                }
                let mut d = *m;
                d.0[i] -= 1;
                s += c * e as f64 * d.eval(p);
            }
            *slot = s;
        }
    }

    /// Range enclosure over an axis-aligned box (floating point, no directed rounding).
    pub fn eval_interval(&self, bx: &[Interval]) -> Interval {
        let mut acc = Interval::new(0.0, 0.0);
        for (c, m) in self.values.iter().zip(self.monomials.iter()) {
            let mut t = Interval::new(1.0, 1.0);
            for (k, &e) in m.0.iter().enumerate().take(self.dim) {
                if e != 0 {
                    t = t.mul(bx[k].powi(e));
                }
            }
            acc = acc.add(t.scale(*c));
        }
        acc
    }

    /// Exact coefficient of a monomial (zero if absent).
    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        match self.monomials.binary_search(m) {
            Ok(k) => self.coeffs[k].clone(),
            Err(_) => BigRational::zero(),
        }
    }

    /// Parses an expression such as `2*x1^2 - x2 + 0.5` in `dim` variables.
    pub fn parse(text: &str, dim: usize) -> Result<Polynomial, PolyError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(PolyError::BadDimension(dim));
        }
        let mut parser = ExprParser {
            src: text.as_bytes(),
            pos: 0,
            dim,
        };
        parser.skip_ws();
        if parser.pos >= parser.src.len() {
            return Err(PolyError::Parse {
                column: 1,
                message: "empty expression".into(),
            });
        }
        let p = parser.expr()?;
        parser.skip_ws();
        if parser.pos < parser.src.len() {
            return Err(parser.error(format!(
                "unexpected character `{}`",
                parser.src[parser.pos] as char
            )));
        }
        Ok(p)
    }
}

impl std::ops::Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial dimension mismatch")
    }
}

impl std::ops::Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.try_sub(rhs).expect("polynomial dimension mismatch")
    }
}

impl std::ops::Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.try_mul(rhs).expect("polynomial dimension mismatch")
    }
}

fn format_rational(c: &BigRational) -> String {
    if c.is_integer() {
        return c.numer().to_string();
    }
    let text = format!("{:?}", rational_to_f64(c));
    let mut parser = ExprParser {
        src: text.as_bytes(),
        pos: 0,
        dim: 1,
    };
    if parser.number().ok().as_ref() == Some(c) && parser.pos == text.len() {
        text
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// Prints in the same grammar accepted by [`Polynomial::parse`], highest
/// degree first.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (c, m)) in self.terms().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut factors: Vec<String> = Vec::new();
            if !abs.is_one() || m.degree() == 0 {
                factors.push(format_rational(&abs));
            }
            for (i, &e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(format!("x{}", i + 1)),
                    _ => factors.push(format!("x{}^{}", i + 1, e)),
                }
            }
            write!(f, "{}", factors.join(" * "))?;
        }
        Ok(())
    }
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl ExprParser<'_> {
    fn error(&self, message: String) -> PolyError {
        PolyError::Parse {
            column: self.pos + 1,
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

    fn expr(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, PolyError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                return Ok(self.term()?.neg());
            }
            Some(b'+') => {
                self.pos += 1;
                return self.term();
            }
            _ => {}
        }
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = &acc * &self.factor()?;
        }
        Ok(acc)
    }

    fn exponent(&mut self) -> Result<u16, PolyError> {
        if self.peek() != Some(b'^') {
            return Ok(1);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer exponent after `^`".into()));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        s.parse::<u16>()
            .map_err(|_| PolyError::Parse {
                column: start + 1,
                message: format!("exponent `{s}` out of range"),
            })
    }

    fn factor(&mut self) -> Result<Polynomial, PolyError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`".into()));
                }
                self.pos += 1;
                let e = self.exponent()?;
                let mut out = Polynomial::constant(self.dim, 1.0);
                for _ in 0..e {
                    out = &out * &inner;
                }
                Ok(out)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let index = name
                    .strip_prefix('x')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&k| k >= 1);
                let k = match index {
                    Some(k) if k <= self.dim => k - 1,
                    _ => {
                        return Err(PolyError::UnknownVariable {
                            name: name.to_string(),
                            column: start + 1,
                            dim: self.dim,
                        })
                    }
                };
                let e = self.exponent()?;
                let mut m = Monomial::one();
                m.0[k] = e;
                Ok(Polynomial::from_rational_terms(
                    self.dim,
                    vec![(BigRational::one(), m)],
                ))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let c = self.number()?;
                Ok(Polynomial::from_rational_terms(
                    self.dim,
                    vec![(c, Monomial::one())],
                ))
            }
            Some(c) => Err(self.error(format!("unexpected character `{}`", c as char))),
            None => Err(self.error("unexpected end of expression".into())),
        }
    }

    /// Decimal literal with optional exponent, or `p/q` with integer parts.
    /// Decimal literals are converted exactly (`0.2` is `1/5`).
    fn number(&mut self) -> Result<BigRational, PolyError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
        }
        let int_part = std::str::from_utf8(&s[start..i]).unwrap().to_string();
        let mut frac_part = String::new();
        if i < s.len() && s[i] == b'.' {
            i += 1;
            let fs = i;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
            }
            frac_part = std::str::from_utf8(&s[fs..i]).unwrap().to_string();
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(self.error("malformed number".into()));
        }
        let mut exp10: i64 = 0;
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            let mut neg = false;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                neg = s[j] == b'-';
                j += 1;
            }
            let es = j;
            while j < s.len() && s[j].is_ascii_digit() {
                j += 1;
            }
            if es == j {
                self.pos = j;
                return Err(self.error("malformed exponent in number".into()));
            }
            let e: i64 = std::str::from_utf8(&s[es..j])
                .unwrap()
                .parse()
                .map_err(|_| self.error("exponent out of range".into()))?;
            exp10 = if neg { -e } else { e };
            i = j;
        }
        self.pos = i;
        let digits = format!("{int_part}{frac_part}");
        let mantissa: BigInt = digits.parse().unwrap_or_default();
        let scale = exp10 - frac_part.len() as i64;
        let ten = BigInt::from(10);
        let mut value = if scale >= 0 {
            BigRational::from_integer(mantissa * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(mantissa, num_traits::pow(ten, (-scale) as usize))
        };
        if frac_part.is_empty() && exp10 == 0 && self.peek() == Some(b'/') {
            let save = self.pos;
            self.pos += 1;
            self.skip_ws();
            let ds = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if ds == self.pos {
                self.pos = save;
                return Err(self.error("expected integer denominator after `/`".into()));
            }
            let den: BigInt = std::str::from_utf8(&s[ds..self.pos]).unwrap().parse().unwrap();
            if den.is_zero() {
                return Err(PolyError::Parse {
                    column: ds + 1,
                    message: "zero denominator".into(),
                });
            }
            value /= BigRational::from_integer(den);
        }
        Ok(value)
    }
}

/// Splits a comma-separated component list at top level (outside parentheses).
pub fn split_components(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push((start, &text[start..i]));
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push((start, &text[start..]));
    out
}
