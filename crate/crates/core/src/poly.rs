//! Real-coefficient polynomials in ascending-degree storage.
//!
//! Root finding uses the eigenvalues of a scaled companion matrix followed by
//! one Newton step on the original coefficients. Stability of a polynomial is
//! decided either from its roots ([`RealPolynomial::classify`]) or from a Routh
//! tabulation ([`RealPolynomial::is_hurwitz`]); the two routes are kept
//! independent so they can be checked against each other.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for calling a root "on the imaginary axis".
pub const TAU_AXIS: f64 = 1e-8;
/// Relative remainder cutoff for the Euclidean GCD.
pub const GCD_TOL: f64 = 1e-10;
/// Routh pivots below this (relative) magnitude trigger the root-based fallback.
pub const TAU_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for RealPolynomial {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

impl From<RealPolynomial> for Vec<f64> {
    fn from(p: RealPolynomial) -> Self {
        p.coeffs
    }
}

impl RealPolynomial {
    /// Builds a polynomial from ascending coefficients, stripping trailing zeros.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// The polynomial `s`.
    pub fn s() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// Monic polynomial with the given real roots.
    pub fn from_real_roots(roots: &[f64]) -> Self {
        roots
            .iter()
            .fold(Self::constant(1.0), |acc, &r| &acc * &Self::new(vec![-r, 1.0]))
    }

    /// Monic polynomial with the given roots. Complex roots must come with their
    /// conjugates; the imaginary residue of the expansion is discarded.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (i, &c) in acc.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * r;
            }
            acc = next;
        }
        Self::new(acc.into_iter().map(|c| c.re).collect::<Vec<_>>())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    /// Coefficient of `s^i`, zero beyond the degree.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// Largest coefficient magnitude.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// `Σ |c_i| |s|^i`, the natural scale for backward-error residuals.
    pub fn abs_eval(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.coeffs.iter().map(|&x| x * c).collect::<Vec<_>>())
    }

    pub fn monic(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        Ok(self.scale(1.0 / self.leading()))
    }

    /// `p(-s)`.
    pub fn reflect(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| if i % 2 == 1 { -c } else { c })
                .collect::<Vec<_>>(),
        )
    }

    /// `|p(jω)|²` written as a polynomial in `Ω = ω²`.
    pub fn axis_magnitude_squared(&self) -> Self {
        let even = self * &self.reflect();
        Self::new(
            even.coeffs
                .iter()
                .step_by(2)
                .enumerate()
                .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
                .collect::<Vec<_>>(),
        )
    }

    /// Polynomial long division `self = q·d + r`.
    pub fn div_rem(&self, d: &Self) -> Result<(Self, Self)> {
        if d.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let dn = d.degree();
        if self.degree() < dn {
            return Ok((Self::zero(), self.clone()));
        }
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; self.degree() - dn + 1];
        let lead = d.leading();
        for k in (0..quot.len()).rev() {
            let c = rem[k + dn] / lead;
            quot[k] = c;
            for (j, &dj) in d.coeffs.iter().enumerate() {
                rem[k + j] -= c * dj;
            }
            rem[k + dn] = 0.0;
        }
        rem.truncate(dn.max(1));
        Ok((Self::new(quot), Self::new(rem)))
    }

    /// Number of exact zero low-order coefficients (roots at the origin).
    pub fn origin_multiplicity(&self) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.coeffs.iter().take_while(|&&c| c == 0.0).count()
    }

    /// Monic greatest common divisor via the Euclidean algorithm; remainders
    /// whose norm falls below `tol` times the dividend's norm count as zero.
    pub fn gcd(a: &Self, b: &Self, tol: f64) -> Result<Self> {
        if a.is_zero() && b.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        if b.is_zero() {
            return a.monic();
        }
        if a.is_zero() {
            return b.monic();
        }
        let (mut x, mut y) = if a.degree() >= b.degree() {
            (a.monic()?, b.monic()?)
        } else {
            (b.monic()?, a.monic()?)
        };
        loop {
            if y.degree() == 0 {
                return Ok(Self::constant(1.0));
            }
            let (_, r) = x.div_rem(&y)?;
            if r.norm() <= tol * x.norm().max(y.norm()) {
                return Ok(y);
            }
            x = y;
            y = r.monic()?;
        }
    }

    /// All complex roots, repeated by multiplicity and closed under conjugation.
    pub fn roots(&self) -> Result<RootSet> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let m = self.origin_multiplicity();
        let mut roots = vec![Complex64::new(0.0, 0.0); m];
        let q = Self::new(self.coeffs[m..].to_vec());
        let n = q.degree();
        match n {
            0 => {}
            1 => roots.push(Complex64::new(-q.coeffs[0] / q.coeffs[1], 0.0)),
            _ => roots.extend(companion_roots(&q)?),
        }
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(RootSet { roots })
    }

    /// Counts roots in the open left half-plane, open right half-plane and on
    /// the imaginary axis (relative tolerance `tau_axis`).
    pub fn classify(&self, tau_axis: f64) -> Result<RootCounts> {
        Ok(self.roots()?.counts(tau_axis))
    }

    /// True iff every root lies strictly in the open left half-plane, decided by
    /// Routh tabulation. Near-zero pivots fall back to root classification.
    pub fn is_hurwitz(&self) -> Result<bool> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let n = self.degree();
        if n == 0 {
            return Ok(true);
        }
        let sign = self.leading().signum();
        let scale = self.norm();
        let a: Vec<f64> = self.coeffs.iter().map(|&c| c * sign / scale).collect();
        if a.iter().any(|&c| c <= 0.0) {
            return Ok(false);
        }
        // Rows hold descending-degree coefficients a_n, a_{n-2}, ... / a_{n-1}, a_{n-3}, ...
        let width = n / 2 + 1;
        let row = |start: usize| -> Vec<f64> {
            (0..width)
                .map(|i| {
                    let deg = n as isize - start as isize - 2 * i as isize;
                    if deg >= 0 {
                        a[deg as usize]
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let mut prev = row(0);
        let mut cur = row(1);
        for _ in 1..n {
            let pivot = cur[0];
            if pivot.abs() <= TAU_PIVOT {
                let counts = self.classify(TAU_AXIS)?;
                return Ok(counts.olhp == n);
            }
            if pivot < 0.0 {
                return Ok(false);
            }
            let next: Vec<f64> = (0..width)
                .map(|i| {
                    let p1 = prev.get(i + 1).copied().unwrap_or(0.0);
                    let c1 = cur.get(i + 1).copied().unwrap_or(0.0);
                    (pivot * p1 - prev[0] * c1) / pivot
                })
                .collect();
            prev = cur;
            cur = next;
        }
        let last = cur[0];
        if last.abs() <= TAU_PIVOT {
            let counts = self.classify(TAU_AXIS)?;
            return Ok(counts.olhp == n);
        }
        Ok(last > 0.0)
    }
}

fn companion_roots(q: &RealPolynomial) -> Result<Vec<Complex64>> {
    let n = q.degree();
    let c = q.coeffs();
    // Substitute s = λt so the scaled roots have unit geometric mean modulus.
    let lambda = (c[0].abs() / c[n].abs()).powf(1.0 / n as f64);
    let lambda = if lambda.is_finite() && lambda > 0.0 {
        lambda
    } else {
        1.0
    };
    let scaled: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(i, &ci)| ci * lambda.powi(i as i32))
        .collect();
    let lead = scaled[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -scaled[i] / lead;
    }
    let schur = Schur::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NonConvergence(format!("Schur iteration cap, degree {n}")))?;
    let eig = schur.complex_eigenvalues();

    let mut real = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for z in eig.iter() {
        let z = z * lambda;
        if z.im == 0.0 {
            real.push(z);
        } else if z.im > 0.0 {
            upper.push(z);
        } else {
            lower.push(z);
        }
    }
    // Pair each upper eigenvalue with its nearest lower partner; strays from
    // nearly real 2x2 blocks are treated as real.
    let mut pairs = Vec::new();
    for z in upper {
        let best = lower
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (w.conj() - z).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((i, d)) if d <= 1e-6 * (1.0 + z.norm()) => {
                let w = lower.swap_remove(i);
                pairs.push((z + w.conj()) / 2.0);
            }
            _ => real.push(Complex64::new(z.re, 0.0)),
        }
    }
    real.extend(lower.into_iter().map(|w| Complex64::new(w.re, 0.0)));
    let upper = pairs;
    let dq = q.derivative();
    let mut out = Vec::with_capacity(n);
    for z in real {
        out.push(newton_polish(q, &dq, Complex64::new(z.re, 0.0)));
    }
    for z in upper {
        let r = newton_polish(q, &dq, z);
        out.push(r);
        out.push(r.conj());
    }
    Ok(out)
}

fn newton_polish(p: &RealPolynomial, dp: &RealPolynomial, z: Complex64) -> Complex64 {
    let f = p.eval_complex(z);
    let df = dp.eval_complex(z);
    if df.norm() == 0.0 || !df.is_finite() {
        return z;
    }
    let cand = z - f / df;
    let cand = if z.im == 0.0 {
        Complex64::new(cand.re, 0.0)
    } else {
        cand
    };
    if cand.is_finite() && p.eval_complex(cand).norm() < f.norm() {
        cand
    } else {
        z
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&RealPolynomial> for &RealPolynomial {
            type Output = RealPolynomial;
            fn $method(self, rhs: &RealPolynomial) -> RealPolynomial {
                $body(self, rhs)
            }
        }
        impl $tr<RealPolynomial> for RealPolynomial {
            type Output = RealPolynomial;
            fn $method(self, rhs: RealPolynomial) -> RealPolynomial {
                $body(&self, &rhs)
            }
        }
    };
}

fn add_impl(a: &RealPolynomial, b: &RealPolynomial) -> RealPolynomial {
    let n = a.coeffs.len().max(b.coeffs.len());
    RealPolynomial::new((0..n).map(|i| a.coeff(i) + b.coeff(i)).collect::<Vec<_>>())
}

fn sub_impl(a: &RealPolynomial, b: &RealPolynomial) -> RealPolynomial {
    let n = a.coeffs.len().max(b.coeffs.len());
    RealPolynomial::new((0..n).map(|i| a.coeff(i) - b.coeff(i)).collect::<Vec<_>>())
}

fn mul_impl(a: &RealPolynomial, b: &RealPolynomial) -> RealPolynomial {
    let mut out = vec![0.0; a.coeffs.len() + b.coeffs.len() - 1];
    for (i, &x) in a.coeffs.iter().enumerate() {
        for (j, &y) in b.coeffs.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    RealPolynomial::new(out)
}

binop!(Add, add, add_impl);
binop!(Sub, sub, sub_impl);
binop!(Mul, mul, mul_impl);

impl Neg for &RealPolynomial {
    type Output = RealPolynomial;
    fn neg(self) -> RealPolynomial {
        self.scale(-1.0)
    }
}

impl fmt::Display for RealPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 && self.coeffs.len() > 1 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            first = false;
            let m = c.abs();
            match i {
                0 => write!(f, "{m}")?,
                1 => write!(f, "{m}s")?,
                _ => write!(f, "{m}s^{i}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RootTag {
    Olhp,
    Orhp,
    Axis,
}

impl RootTag {
    /// A root is on the axis iff `|Re r| <= tau * max(1, |r|)`.
    pub fn of(r: Complex64, tau_axis: f64) -> Self {
        if r.re.abs() <= tau_axis * r.norm().max(1.0) {
            RootTag::Axis
        } else if r.re < 0.0 {
            RootTag::Olhp
        } else {
            RootTag::Orhp
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RootCounts {
    pub olhp: usize,
    pub orhp: usize,
    pub axis: usize,
}

impl RootCounts {
    pub fn total(&self) -> usize {
        self.olhp + self.orhp + self.axis
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn tags(&self, tau_axis: f64) -> Vec<RootTag> {
        self.roots.iter().map(|&r| RootTag::of(r, tau_axis)).collect()
    }

    pub fn counts(&self, tau_axis: f64) -> RootCounts {
        let mut c = RootCounts::default();
        for t in self.tags(tau_axis) {
            match t {
                RootTag::Olhp => c.olhp += 1,
                RootTag::Orhp => c.orhp += 1,
                RootTag::Axis => c.axis += 1,
            }
        }
        c
    }

    /// Largest real part, `-inf` for an empty set.
    pub fn max_real(&self) -> f64 {
        self.roots.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.re))
    }
}
