//! Real-rational SISO transfer functions.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{RealPolynomial, RootCounts, RootSet, RootTag, GCD_TOL, TAU_AXIS};
use crate::rir_fixed::ThirdOrderCoeffs;

/// Relative guard below which `|den(s)|` is treated as a pole hit.
const POLE_GUARD: f64 = 1e-14;
/// Imaginary-part tolerance for calling a zero or pole real.
const REAL_TOL: f64 = 1e-8;
/// Relative tolerance for unstable pole/zero cancellation.
const CANCEL_TOL: f64 = 1e-8;

/// `num(s) / den(s)` stored in reduced form with a monic denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTF {
    num: RealPolynomial,
    den: RealPolynomial,
}

impl RationalTF {
    /// Builds a reduced transfer function; common factors (per [`GCD_TOL`]) are
    /// cancelled and the denominator is normalized to be monic.
    pub fn new(num: RealPolynomial, den: RealPolynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        if num.is_zero() {
            return Ok(Self {
                num: RealPolynomial::zero(),
                den: RealPolynomial::constant(1.0),
            });
        }
        let (num, den) = if num.degree() > 0 && den.degree() > 0 {
            let g = RealPolynomial::gcd(&num, &den, GCD_TOL)?;
            if g.degree() > 0 {
                (num.div_rem(&g)?.0, den.div_rem(&g)?.0)
            } else {
                (num, den)
            }
        } else {
            (num, den)
        };
        let lead = den.leading();
        Ok(Self {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
        })
    }

    /// Builds from ascending coefficient slices.
    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(RealPolynomial::new(num.to_vec()), RealPolynomial::new(den.to_vec()))
    }

    pub fn constant(c: f64) -> Self {
        Self {
            num: RealPolynomial::constant(c),
            den: RealPolynomial::constant(1.0),
        }
    }

    pub fn num(&self) -> &RealPolynomial {
        &self.num
    }

    pub fn den(&self) -> &RealPolynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `deg(den) - deg(num)`; negative for improper functions.
    pub fn relative_degree(&self) -> isize {
        if self.num.is_zero() {
            return isize::MAX;
        }
        self.den.degree() as isize - self.num.degree() as isize
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.relative_degree() > 0
    }

    pub fn poles(&self) -> Result<RootSet> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Result<RootSet> {
        if self.num.is_zero() {
            return Ok(RootSet { roots: vec![] });
        }
        self.num.roots()
    }

    pub fn pole_counts(&self, tau_axis: f64) -> Result<RootCounts> {
        self.den.classify(tau_axis)
    }

    /// All poles strictly in the open left half-plane.
    pub fn is_stable(&self) -> Result<bool> {
        self.den.is_hurwitz()
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::constant(0.0);
        }
        Self {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    /// Series connection `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        Self::new(&self.num * &other.num, &self.den * &other.den)
    }

    /// Evaluates at a complex point. Large `|s|` goes through the reversed
    /// polynomials in `1/s` to avoid overflow.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        if s.norm() <= 1.0 {
            let d = self.den.eval_complex(s);
            if d.norm() <= POLE_GUARD * self.den.abs_eval(s) {
                return Err(Error::PoleHit(s));
            }
            return Ok(self.num.eval_complex(s) / d);
        }
        let z = s.inv();
        let rev = |p: &RealPolynomial| p.coeffs().iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
        let d = rev(&self.den);
        let dn = self.den.coeffs().iter().fold(0.0, |acc, c| acc * z.norm() + c.abs());
        if d.norm() <= POLE_GUARD * dn {
            return Err(Error::PoleHit(s));
        }
        let n = rev(&self.num);
        let shift = self.den.degree() as i32 - self.num.degree() as i32;
        Ok(n / d * z.powi(shift))
    }

    /// `g(jω)`.
    pub fn freq_response(&self, omega: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, omega))
    }

    /// `g(0)`.
    pub fn static_gain(&self) -> Result<f64> {
        let d = self.den.coeff(0);
        if d == 0.0 {
            return Err(Error::PoleAtOrigin);
        }
        Ok(self.num.coeff(0) / d)
    }

    fn check_no_axis_poles(&self, tau_axis: f64) -> Result<()> {
        if let Some(&p) = self
            .poles()?
            .roots
            .iter()
            .find(|&&r| RootTag::of(r, tau_axis) == RootTag::Axis)
        {
            return Err(Error::AxisPole(p));
        }
        Ok(())
    }

    /// `sup_ω |g(jω)|` and the attaining frequency.
    ///
    /// Candidates are `ω = 0`, `ω → ∞` and the nonnegative real stationary
    /// points of `|g(jω)|²` as a rational function of `Ω = ω²`. When `g` has
    /// the third-order form `(ζs − k)/(s³ + ps² + qs + ℓ)` satisfying the
    /// peak-gain inequalities, the closed-form cubic peak is cross-checked and
    /// the result is flagged as certified.
    pub fn linf_norm(&self, cfg: &NormConfig) -> Result<NormResult> {
        if !self.is_proper() {
            return Err(Error::Improper);
        }
        self.check_no_axis_poles(cfg.tau_axis)?;
        if self.num.is_zero() {
            return Ok(NormResult {
                linf: 0.0,
                omega_peak: 0.0,
                certified: false,
            });
        }
        let n2 = self.num.axis_magnitude_squared();
        let d2 = self.den.axis_magnitude_squared();
        let stationary = &(&n2.derivative() * &d2) - &(&n2 * &d2.derivative());
        let scale = n2.derivative().norm() * d2.norm() + n2.norm() * d2.derivative().norm();

        let mut candidates = vec![0.0];
        if stationary.norm() > 1e-13 * scale && stationary.degree() > 0 {
            let ds = stationary.derivative();
            for r in stationary.roots()?.roots {
                if r.re > 0.0 && r.im.abs() <= 1e-6 * (1.0 + r.re) {
                    candidates.push(polish_real_root(&stationary, &ds, r.re).sqrt());
                }
            }
        }

        let mut best = NormResult {
            linf: 0.0,
            omega_peak: 0.0,
            certified: false,
        };
        for &w in &candidates {
            let v = self.freq_response(w)?.norm();
            if v > best.linf * (1.0 + 1e-12) || (v >= best.linf * (1.0 - 1e-12) && w < best.omega_peak) {
                best = NormResult {
                    linf: v.max(best.linf),
                    omega_peak: w,
                    certified: false,
                };
            }
        }
        if self.relative_degree() == 0 {
            let at_inf = (self.num.leading() / self.den.leading()).abs();
            if at_inf > best.linf * (1.0 + 1e-12) {
                best = NormResult {
                    linf: at_inf,
                    omega_peak: f64::INFINITY,
                    certified: false,
                };
            }
        }

        if cfg.cubic_path {
            if let Some(c) = ThirdOrderCoeffs::from_tf(self) {
                if c.condition2_check() {
                    if let Ok(wp) = c.peak_frequency_cubic() {
                        let v = self.freq_response(wp)?.norm();
                        if (v - best.linf).abs() <= 1e-8 * best.linf {
                            best = NormResult {
                                linf: v.max(best.linf),
                                omega_peak: wp,
                                certified: true,
                            };
                        }
                    }
                }
            }
        }
        Ok(best)
    }

    /// Parity interlacing: every pair of consecutive real zeros in the closed
    /// right half-plane (counting the zero at infinity with multiplicity equal
    /// to the relative degree) encloses an even number of real ORHP poles.
    pub fn pip(&self, tau_axis: f64) -> Result<bool> {
        self.check_no_axis_poles(tau_axis)?;
        let is_real = |z: &Complex64| z.im.abs() <= REAL_TOL * (1.0 + z.norm());
        let mut zeros: Vec<f64> = self
            .zeros()?
            .roots
            .iter()
            .filter(|z| is_real(z) && z.re >= -tau_axis * z.norm().max(1.0))
            .map(|z| z.re.max(0.0))
            .collect();
        if !self.num.is_zero() {
            for _ in 0..self.relative_degree().max(0) {
                zeros.push(f64::INFINITY);
            }
        }
        zeros.sort_by(f64::total_cmp);
        let poles: Vec<f64> = self
            .poles()?
            .roots
            .iter()
            .filter(|p| is_real(p) && RootTag::of(**p, tau_axis) == RootTag::Orhp)
            .map(|p| p.re)
            .collect();
        Ok(zeros
            .windows(2)
            .all(|w| poles.iter().filter(|&&p| p > w[0] && p < w[1]).count() % 2 == 0))
    }
}

fn polish_real_root(p: &RealPolynomial, dp: &RealPolynomial, mut x: f64) -> f64 {
    for _ in 0..3 {
        let f = p.eval(x);
        let df = dp.eval(x);
        if df == 0.0 {
            break;
        }
        let cand = x - f / df;
        if cand > 0.0 && p.eval(cand).abs() < f.abs() {
            x = cand;
        } else {
            break;
        }
    }
    x
}

impl fmt::Display for RationalTF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConfig {
    pub tau_axis: f64,
    /// Use the closed-form cubic peak for third-order plants when applicable.
    pub cubic_path: bool,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            tau_axis: TAU_AXIS,
            cubic_path: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub linf: f64,
    /// Attaining frequency in rad/time; `+inf` when the supremum is only
    /// approached as `ω → ∞`.
    pub omega_peak: f64,
    pub certified: bool,
}

/// Characteristic polynomial `a_d·den_g − b_d·num_g` of the positive-feedback
/// loop `1 = d(s) g(s)` with `d = b_d / a_d`.
///
/// Fails with [`Error::CancellationDetected`] when a closed right-half-plane
/// pole of either factor is cancelled by a zero of the other.
pub fn feedback_charpoly(g: &RationalTF, d: &RationalTF) -> Result<RealPolynomial> {
    check_cancellation(g.den(), d.num())?;
    check_cancellation(d.den(), g.num())?;
    Ok(&(d.den() * g.den()) - &(d.num() * g.num()))
}

fn check_cancellation(poles_of: &RealPolynomial, zeros_of: &RealPolynomial) -> Result<()> {
    if poles_of.degree() == 0 || zeros_of.is_zero() || zeros_of.degree() == 0 {
        return Ok(());
    }
    for r in poles_of.roots()?.roots {
        if RootTag::of(r, TAU_AXIS) == RootTag::Olhp {
            continue;
        }
        if zeros_of.eval_complex(r).norm() <= CANCEL_TOL * zeros_of.abs_eval(r) {
            return Err(Error::CancellationDetected(r));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(num: &[f64], den: &[f64]) -> RationalTF {
        RationalTF::from_coeffs(num, den).unwrap()
    }

    fn j(w: f64) -> Complex64 {
        Complex64::new(0.0, w)
    }

    #[test]
    fn eval_examples() {
        let g = tf(&[1.0], &[1.0, 1.0]);
        assert!((g.eval(Complex64::new(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-15);
        let ap = tf(&[-1.0, 1.0], &[1.0, 1.0]);
        let v = ap.eval(j(1.0)).unwrap();
        let want = (j(1.0) - 1.0) / (j(1.0) + 1.0);
        assert!((v - want).norm() < 1e-15);
        assert!((v.norm() - 1.0).abs() < 1e-15);
        // large |s| takes the reversed-polynomial route
        let big = ap.eval(j(1e200)).unwrap();
        assert!((big - 1.0).norm() < 1e-12);
    }

    #[test]
    fn eval_at_pole_is_rejected() {
        let g = tf(&[1.0], &[-1.0, 1.0]);
        assert!(matches!(g.eval(Complex64::new(1.0, 0.0)), Err(Error::PoleHit(_))));
    }

    #[test]
    fn reduction_cancels_common_factors() {
        // (s - 1)(s + 2) / ((s - 1)(s + 3))
        let num = RealPolynomial::from_real_roots(&[1.0, -2.0]).scale(2.0);
        let den = RealPolynomial::from_real_roots(&[1.0, -3.0]);
        let g = RationalTF::new(num, den).unwrap();
        assert_eq!(g.den().degree(), 1);
        assert!((g.static_gain().unwrap() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn norm_examples() {
        let cfg = NormConfig::default();
        let r = tf(&[1.0], &[1.0, 1.0]).linf_norm(&cfg).unwrap();
        assert!((r.linf - 1.0).abs() < 1e-14);
        assert_eq!(r.omega_peak, 0.0);
        let ap = tf(&[-2.0, 1.0], &[2.0, 1.0]).linf_norm(&cfg).unwrap();
        assert!((ap.linf - 1.0).abs() < 1e-14);
        assert_eq!(ap.omega_peak, 0.0);
    }

    #[test]
    fn norm_of_resonant_plant() {
        // 1/((s+3)(s^2 - s + 4)); peak from a 1e6-point log sweep is 0.1465049631
        let den = &RealPolynomial::from_real_roots(&[-3.0]) * &RealPolynomial::new(vec![4.0, -1.0, 1.0]);
        let g = RationalTF::new(RealPolynomial::constant(1.0), den).unwrap();
        let r = g.linf_norm(&NormConfig::default()).unwrap();
        assert!((r.linf - 0.146504963189621).abs() < 1e-12, "{r:?}");
        assert!((r.omega_peak - 1.82953496630449).abs() < 1e-8);
        assert!(r.certified);
        let generic = g
            .linf_norm(&NormConfig {
                cubic_path: false,
                ..Default::default()
            })
            .unwrap();
        assert!(!generic.certified);
        assert!((generic.linf - r.linf).abs() < 1e-13);
    }

    #[test]
    fn norm_errors() {
        let cfg = NormConfig::default();
        assert_eq!(
            tf(&[0.0, 0.0, 1.0], &[1.0, 1.0]).linf_norm(&cfg).unwrap_err(),
            Error::Improper
        );
        assert!(matches!(
            tf(&[1.0], &[1.0, 0.0, 1.0]).linf_norm(&cfg),
            Err(Error::AxisPole(_))
        ));
    }

    #[test]
    fn biproper_peak_at_infinity() {
        // (2s + 1)/(s + 1): |g| increases monotonically towards 2
        let r = tf(&[1.0, 2.0], &[1.0, 1.0]).linf_norm(&NormConfig::default()).unwrap();
        assert!((r.linf - 2.0).abs() < 1e-14);
        assert!(r.omega_peak.is_infinite());
    }

    #[test]
    fn pip_examples() {
        let tau = TAU_AXIS;
        let g = RationalTF::new(
            RealPolynomial::constant(1.0),
            RealPolynomial::from_real_roots(&[1.0, 2.0]),
        )
        .unwrap();
        assert!(g.pip(tau).unwrap());
        let g = RationalTF::new(
            RealPolynomial::from_real_roots(&[1.0]),
            RealPolynomial::from_real_roots(&[2.0, -1.0]),
        )
        .unwrap();
        assert!(!g.pip(tau).unwrap());
        // a single real unstable pole with zeros only at infinity
        assert!(tf(&[1.0], &[-1.0, 1.0]).pip(tau).unwrap());
    }

    #[test]
    fn static_gain_examples() {
        assert!((tf(&[1.0], &[2.0, 1.0]).static_gain().unwrap() - 0.5).abs() < 1e-15);
        assert!((tf(&[-1.0, 1.0], &[1.0, 1.0]).static_gain().unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(tf(&[1.0], &[0.0, 1.0]).static_gain().unwrap_err(), Error::PoleAtOrigin);
    }

    #[test]
    fn charpoly_examples() {
        let g = tf(&[1.0], &[-1.0, 1.0]);
        let d = RationalTF::constant(-2.0);
        let p = feedback_charpoly(&g, &d).unwrap();
        assert_eq!(p.coeffs(), &[1.0, 1.0]);

        // g = (s - 1)/(s + 1)^2 against a perturbation with a pole at s = 1
        let g = tf(&[-1.0, 1.0], &[1.0, 2.0, 1.0]);
        let d = tf(&[1.0], &[-1.0, 1.0]);
        match feedback_charpoly(&g, &d) {
            Err(Error::CancellationDetected(r)) => assert!((r.re - 1.0).abs() < 1e-10),
            other => panic!("expected cancellation, got {other:?}"),
        }
    }

    #[test]
    fn charpoly_third_order_with_allpass() {
        let (zeta, k, p, q, ell, a, b) = (0.7, -1.3, 2.0, 1.0, 12.0, 0.8, 0.4);
        let g = tf(&[-k, zeta], &[ell, q, p, 1.0]);
        let d = tf(&[-a * b, b], &[a, 1.0]);
        let got = feedback_charpoly(&g, &d).unwrap();
        let cubic = RealPolynomial::new(vec![ell, q, p, 1.0]);
        let want = &(&cubic * &RealPolynomial::new(vec![a, 1.0]))
            - &(&RealPolynomial::new(vec![-k, zeta]) * &RealPolynomial::new(vec![-a, 1.0])).scale(b);
        for i in 0..=4 {
            assert!((got.coeff(i) - want.coeff(i)).abs() < 1e-13);
        }
    }
}
