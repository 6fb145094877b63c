//! Robust instability radius of a fixed unstable plant.
//!
//! The radius `ρ*` is bracketed from below by the inverse peak gain `ϱ_p` and,
//! for plants with an odd number of unstable poles, by the inverse static gain
//! `ϱ_o`. Upper bounds come from first-order all-pass perturbations
//! `b(s − a)/(s + a)` that place a closed-loop pole exactly at `jω_c` while
//! keeping every other pole in the open left half-plane (ω_c-stability). Such
//! a marginal stabilizer is turned into a strict one by a small additive
//! perturbation ([`strictify`]). When the best `ω_c` coincides with `0` or the
//! peak frequency, upper and lower bounds meet and the radius is exact.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{RealPolynomial, RootCounts, RootSet, RootTag, TAU_AXIS};
use crate::tf::{feedback_charpoly, NormConfig, RationalTF};

/// Relative gap under which lower and upper bounds are declared equal.
pub const EXACT_TOL: f64 = 1e-6;

/// First-order all-pass `b·(s − a)/(s + a)` with `a ≥ 0`; `a = 0` is the constant `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllPass1 {
    pub a: f64,
    pub b: f64,
}

impl AllPass1 {
    pub fn constant(b: f64) -> Self {
        Self { a: 0.0, b }
    }

    pub fn hinf(&self) -> f64 {
        self.b.abs()
    }

    pub fn to_tf(&self) -> RationalTF {
        if self.a == 0.0 {
            return RationalTF::constant(self.b);
        }
        RationalTF::from_coeffs(&[-self.a * self.b, self.b], &[self.a, 1.0]).expect("nonzero denominator")
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        if self.a == 0.0 {
            return Complex64::new(self.b, 0.0);
        }
        self.b * (s - self.a) / (s + self.a)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            a: self.a,
            b: self.b * c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBounds {
    /// `1/‖g‖_L∞`.
    pub rho_p: f64,
    /// `1/|g(0)|`, present only for an odd number of ORHP poles.
    pub rho_o: Option<f64>,
    pub omega_p: f64,
    pub n_orhp: usize,
    pub certified: bool,
}

impl LowerBounds {
    pub fn best(&self) -> f64 {
        self.rho_o.map_or(self.rho_p, |o| o.max(self.rho_p))
    }
}

/// Peak-gain and (odd ORHP count) static-gain lower bounds.
pub fn lower_bounds(g: &RationalTF, cfg: &NormConfig) -> Result<LowerBounds> {
    if !g.is_strictly_proper() {
        return Err(Error::Precondition("plant must be strictly proper".into()));
    }
    let counts = g.pole_counts(cfg.tau_axis)?;
    if counts.axis > 0 {
        let p = g
            .poles()?
            .roots
            .into_iter()
            .find(|&r| RootTag::of(r, cfg.tau_axis) == RootTag::Axis)
            .unwrap_or_default();
        return Err(Error::AxisPole(p));
    }
    if counts.orhp == 0 {
        return Err(Error::StableInput);
    }
    let norm = g.linf_norm(cfg)?;
    let rho_o = if counts.orhp % 2 == 1 {
        Some(1.0 / g.static_gain()?.abs())
    } else {
        None
    };
    Ok(LowerBounds {
        rho_p: 1.0 / norm.linf,
        rho_o,
        omega_p: norm.omega_peak,
        n_orhp: counts.orhp,
        certified: norm.certified,
    })
}

/// `δ_c = 1/g(jω_c)`: the value a marginal stabilizer must take at `jω_c`.
pub fn critical_gain(g: &RationalTF, omega_c: f64) -> Result<Complex64> {
    let v = g.freq_response(omega_c)?;
    if v.norm() == 0.0 || !v.is_finite() {
        return Err(Error::ZeroAtOmega(omega_c));
    }
    Ok(v.inv())
}

/// The unique stable first-order all-pass taking the value `δ_c` at `jω_c`.
pub fn allpass_from_critical(delta_c: Complex64, omega_c: f64) -> Result<AllPass1> {
    if omega_c < 0.0 || !omega_c.is_finite() {
        return Err(Error::InvalidInput(format!("omega_c = {omega_c}")));
    }
    let mag = delta_c.norm();
    if omega_c == 0.0 {
        if delta_c.im.abs() > 1e-12 * mag {
            return Err(Error::InvalidInput("a static critical gain must be real".into()));
        }
        return Ok(AllPass1::constant(delta_c.re));
    }
    // Phase in [-π, π) so that a negative real δ_c maps to a = 0, b < 0.
    let mut theta = delta_c.arg();
    if theta >= std::f64::consts::PI {
        theta -= 2.0 * std::f64::consts::PI;
    }
    let phi = theta / 2.0;
    let ap = if phi >= 0.0 {
        if FRAC_PI_2 - phi <= 1e-12 {
            return Err(Error::PhaseSingular(omega_c));
        }
        AllPass1 {
            a: omega_c * phi.tan(),
            b: mag,
        }
    } else {
        AllPass1 {
            a: omega_c * (phi + FRAC_PI_2).tan(),
            b: -mag,
        }
    };
    let got = ap.eval(Complex64::new(0.0, omega_c));
    if (got - delta_c).norm() > 1e-10 * mag {
        return Err(Error::Verification(format!(
            "all-pass value {got} differs from critical gain {delta_c}"
        )));
    }
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub roots: RootSet,
    pub counts: RootCounts,
    /// Every closed-loop root strictly in the OLHP.
    pub internally_stable: bool,
    /// Exactly `±jω_c` (or a single root at `0`) on the axis, all else in the OLHP.
    pub omega_c_stable: bool,
    /// Largest real part among the roots not matched to `±jω_c`.
    pub max_real_remaining: f64,
}

/// ω_c-stability of the loop `1 = d(s) g(s)`.
pub fn omega_c_stability(g: &RationalTF, d: &RationalTF, omega_c: f64) -> Result<StabilityReport> {
    let cp = feedback_charpoly(g, d)?;
    let roots = cp.roots()?;
    let counts = roots.counts(TAU_AXIS);
    let tol = 1e-6 * (1.0 + omega_c);
    let want = Complex64::new(0.0, omega_c);
    let mut remaining: Vec<Complex64> = roots.roots.clone();
    let mut matched = 0;
    let targets: &[Complex64] = if omega_c == 0.0 {
        &[want][..]
    } else {
        &[want, want.conj()][..]
    };
    for t in targets {
        if let Some((i, _)) = remaining
            .iter()
            .enumerate()
            .map(|(i, r)| (i, (r - t).norm()))
            .filter(|&(_, dist)| dist <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
        {
            remaining.remove(i);
            matched += 1;
        }
    }
    let rest_ok = remaining.iter().all(|&r| RootTag::of(r, TAU_AXIS) == RootTag::Olhp);
    let max_real_remaining = remaining.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.re));
    Ok(StabilityReport {
        internally_stable: counts.olhp == roots.len(),
        omega_c_stable: matched == targets.len() && rest_ok,
        roots,
        counts,
        max_real_remaining,
    })
}

/// Whether `d` internally stabilizes `g` under positive feedback: `d` proper
/// and stable, no unstable cancellation, characteristic polynomial Hurwitz.
pub fn internally_stabilizes(g: &RationalTF, d: &RationalTF) -> Result<bool> {
    if !d.is_proper() || !d.is_stable()? {
        return Ok(false);
    }
    match feedback_charpoly(g, d) {
        Ok(cp) => cp.is_hurwitz(),
        Err(Error::CancellationDetected(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Default ε grid `{±1e−2, ±1e−3, ±1e−4, ±1e−5}·scale`, smallest magnitude first.
pub fn default_eps_grid(scale: f64) -> Vec<f64> {
    let scale = if scale > 0.0 { scale } else { 1.0 };
    [1e-5, 1e-4, 1e-3, 1e-2]
        .iter()
        .flat_map(|&m| [m * scale, -m * scale])
        .collect()
}

/// Which additive direction made the marginal stabilizer strict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrictDirection {
    /// `δ_1 = 1`
    Constant,
    /// `δ_1 = 1/(s + 1)`
    LowPass,
}

impl StrictDirection {
    pub fn to_tf(self) -> RationalTF {
        match self {
            StrictDirection::Constant => RationalTF::constant(1.0),
            StrictDirection::LowPass => RationalTF::from_coeffs(&[1.0], &[1.0, 1.0]).expect("nonzero denominator"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strictified {
    pub delta: RationalTF,
    pub eps: f64,
    pub direction: StrictDirection,
    pub hinf: f64,
}

/// `d0 + ε·d1`.
pub fn perturb(d0: &RationalTF, d1: &RationalTF, eps: f64) -> Result<RationalTF> {
    let num = &(d0.num() * d1.den()) + &(d1.num() * d0.den()).scale(eps);
    RationalTF::new(num, d0.den() * d1.den())
}

/// Smallest-|ε| grid value for which `d0 + ε·d1` internally stabilizes `g`.
pub fn strictify_with(
    g: &RationalTF,
    d0: &RationalTF,
    d1: &RationalTF,
    eps_grid: &[f64],
) -> Result<Option<(RationalTF, f64)>> {
    let mut grid = eps_grid.to_vec();
    grid.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(b.total_cmp(a)));
    for eps in grid {
        let d = perturb(d0, d1, eps)?;
        if internally_stabilizes(g, &d)? {
            return Ok(Some((d, eps)));
        }
    }
    Ok(None)
}

/// Turns a marginal stabilizer into a strict one, trying `δ_1 = 1` first and
/// `δ_1 = 1/(s+1)` second. Fails when neither works on the grid, which is the
/// expected outcome when more than one mode sits on the imaginary axis.
pub fn strictify(g: &RationalTF, d0: &RationalTF, eps_grid: &[f64]) -> Result<Strictified> {
    for dir in [StrictDirection::Constant, StrictDirection::LowPass] {
        if let Some((delta, eps)) = strictify_with(g, d0, &dir.to_tf(), eps_grid)? {
            let hinf = delta.linf_norm(&NormConfig::default())?.linf;
            return Ok(Strictified {
                delta,
                eps,
                direction: dir,
                hinf,
            });
        }
    }
    Err(Error::NoStrictification)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub points: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub golden_iters: usize,
    pub norm: NormConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            points: 2000,
            omega_min: 1e-3,
            omega_max: 1e3,
            golden_iters: 30,
            norm: NormConfig::default(),
        }
    }
}

impl SweepConfig {
    /// `ω = 0` followed by `points` log-spaced frequencies.
    pub fn grid(&self) -> Vec<f64> {
        let mut g = vec![0.0];
        let (lo, hi) = (self.omega_min.ln(), self.omega_max.ln());
        let n = self.points.max(2);
        g.extend((0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()));
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub omega_c: f64,
    pub abs_b: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundSource {
    PeakGain,
    StaticGain,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub allpass: AllPass1,
    pub omega_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RirResult {
    pub rho_lower: f64,
    /// `+inf` when no certificate exists.
    pub rho_upper: f64,
    pub exact: bool,
    pub certificate: Option<Certificate>,
    pub bound_source: BoundSource,
    pub pip_ok: bool,
    pub bounds: LowerBounds,
    /// Strict stabilizer obtained from the certificate.
    pub strict: Option<Strictified>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub result: RirResult,
    pub samples: Vec<SweepSample>,
}

fn try_frequency(g: &RationalTF, omega: f64) -> Option<(AllPass1, bool)> {
    let dc = critical_gain(g, omega).ok()?;
    let ap = allpass_from_critical(dc, omega).ok()?;
    let stable = omega_c_stability(g, &ap.to_tf(), omega)
        .map(|r| r.omega_c_stable)
        .unwrap_or(false);
    Some((ap, stable))
}

/// Sweeps `ω_c` over `omega_grid` (plus the peak frequency), keeping the
/// smallest-norm all-pass that achieves ω_c-stability, then refines around the
/// best grid point by golden-section search.
pub fn sweep_upper_bound(g: &RationalTF, omega_grid: &[f64], cfg: &SweepConfig) -> Result<SweepOutcome> {
    let bounds = lower_bounds(g, &cfg.norm)?;
    let rho_lower = bounds.best();
    let pip_ok = g.pip(cfg.norm.tau_axis)?;
    if !pip_ok {
        return Ok(SweepOutcome {
            result: RirResult {
                rho_lower,
                rho_upper: f64::INFINITY,
                exact: false,
                certificate: None,
                bound_source: BoundSource::Sweep,
                pip_ok,
                bounds,
                strict: None,
            },
            samples: vec![],
        });
    }

    let mut grid: Vec<f64> = omega_grid.iter().copied().filter(|w| *w >= 0.0).collect();
    if bounds.omega_p.is_finite() {
        grid.push(bounds.omega_p);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let samples: Vec<SweepSample> = grid
        .par_iter()
        .map(|&w| match try_frequency(g, w) {
            Some((ap, stable)) => SweepSample {
                omega_c: w,
                abs_b: ap.hinf(),
                stable,
            },
            None => SweepSample {
                omega_c: w,
                abs_b: f64::NAN,
                stable: false,
            },
        })
        .collect();

    let best_idx = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.stable)
        .min_by(|a, b| {
            a.1.abs_b
                .total_cmp(&b.1.abs_b)
                .then(a.1.omega_c.total_cmp(&b.1.omega_c))
        })
        .map(|(i, _)| i);

    let mut best: Option<(f64, f64)> = best_idx.map(|i| (samples[i].omega_c, samples[i].abs_b));
    if let (Some(i), Some((_, b0))) = (best_idx, best) {
        let lo = samples[i.saturating_sub(1)].omega_c;
        let hi = samples[(i + 1).min(samples.len() - 1)].omega_c;
        if hi > lo {
            let f = |w: f64| match try_frequency(g, w) {
                Some((ap, true)) => ap.hinf(),
                _ => f64::INFINITY,
            };
            let (w, v) = golden_section(f, lo, hi, cfg.golden_iters);
            // roundoff-level gains do not displace an exact candidate
            if v < b0 * (1.0 - 1e-12) {
                best = Some((w, v));
            }
        }
    }

    let certificate = best.and_then(|(w, _)| {
        try_frequency(g, w).map(|(ap, _)| Certificate {
            allpass: ap,
            omega_c: w,
        })
    });
    let strict = match &certificate {
        Some(c) => strictify(g, &c.allpass.to_tf(), &default_eps_grid(c.allpass.hinf())).ok(),
        None => None,
    };
    let rho_upper = match (&certificate, &strict) {
        (Some(c), Some(_)) => c.allpass.hinf(),
        _ => f64::INFINITY,
    };
    let exact = rho_upper.is_finite() && rho_upper - rho_lower <= EXACT_TOL * rho_lower;
    let bound_source = match &certificate {
        Some(c) if exact && c.omega_c == 0.0 && bounds.rho_o.is_some() => BoundSource::StaticGain,
        Some(_) if exact => BoundSource::PeakGain,
        _ => BoundSource::Sweep,
    };
    Ok(SweepOutcome {
        result: RirResult {
            rho_lower,
            rho_upper,
            exact,
            certificate,
            bound_source,
            pip_ok,
            bounds,
            strict,
        },
        samples,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `g(s) = (ζs − k)/(s³ + ps² + qs + ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThirdOrderCoeffs {
    pub zeta: f64,
    pub k: f64,
    pub p: f64,
    pub q: f64,
    pub ell: f64,
}

impl ThirdOrderCoeffs {
    /// Recognizes a reduced plant with cubic denominator and at most linear numerator.
    pub fn from_tf(g: &RationalTF) -> Option<Self> {
        let (num, den) = (g.num(), g.den());
        if den.degree() != 3 || num.degree() > 1 || num.is_zero() {
            return None;
        }
        let lead = den.leading();
        let c = Self {
            zeta: num.coeff(1) / lead,
            k: -num.coeff(0) / lead,
            p: den.coeff(2) / lead,
            q: den.coeff(1) / lead,
            ell: den.coeff(0) / lead,
        };
        (c.k != 0.0).then_some(c)
    }

    pub fn to_tf(&self) -> RationalTF {
        RationalTF::from_coeffs(&[-self.k, self.zeta], &[self.ell, self.q, self.p, 1.0]).expect("monic denominator")
    }

    pub fn f2(&self) -> f64 {
        self.p * self.p - 2.0 * self.q
    }

    pub fn f1(&self) -> f64 {
        2.0 * self.p * self.ell - self.q * self.q
    }

    pub fn f0(&self) -> f64 {
        self.ell * self.ell
    }

    /// `|1/g(jω)|²` as a function of `Ω = ω²`.
    pub fn inverse_gain_squared(&self, omega_sq: f64) -> f64 {
        let w = omega_sq;
        (w * w * w + self.f2() * w * w - self.f1() * w + self.f0()) / (self.zeta * self.zeta * w + self.k * self.k)
    }

    /// Static-gain class: `p > 0, ℓ < 0, q + ζℓ/k > 0`.
    pub fn condition1_check(&self) -> bool {
        self.p > 0.0 && self.ell < 0.0 && self.q + self.zeta * self.ell / self.k > 0.0
    }

    /// Sufficient inequalities for the peak-gain class: `p > 0, ℓ > pq, q² < 2pℓ`.
    pub fn condition2_check(&self) -> bool {
        self.p > 0.0 && self.ell > self.p * self.q && self.q * self.q < 2.0 * self.p * self.ell
    }

    /// Constant certificate `δ = −ℓ/k` of the static-gain class.
    pub fn condition1_certificate(&self) -> AllPass1 {
        AllPass1::constant(-self.ell / self.k)
    }

    /// Stationarity polynomial of `|1/g|²` in `Ω`, ascending coefficients.
    pub fn peak_polynomial(&self) -> RealPolynomial {
        let (z2, k2) = (self.zeta * self.zeta, self.k * self.k);
        RealPolynomial::new(vec![
            -(z2 * self.f0() + k2 * self.f1()),
            2.0 * k2 * self.f2(),
            z2 * self.f2() + 3.0 * k2,
            2.0 * z2,
        ])
    }

    /// Peak frequency `ω_p = √Ω_p` from the positive root of the stationarity
    /// polynomial; with several positive roots the one of largest gain wins.
    pub fn peak_frequency_cubic(&self) -> Result<f64> {
        let (f2, f1) = (self.f2(), self.f1());
        if self.zeta == 0.0 {
            let disc = f2 * f2 + 3.0 * f1;
            if disc < 0.0 {
                return Err(Error::NoPositiveRoot);
            }
            let s = disc.sqrt();
            let omega_sq = if f2 > 0.0 { f1 / (f2 + s) } else { (s - f2) / 3.0 };
            return if omega_sq > 0.0 {
                Ok(omega_sq.sqrt())
            } else {
                Err(Error::NoPositiveRoot)
            };
        }
        let h = self.peak_polynomial();
        let dh = h.derivative();
        let mut best: Option<(f64, f64)> = None;
        for r in h.roots()?.roots {
            if r.re > 0.0 && r.im.abs() <= 1e-9 * (1.0 + r.re) {
                let mut x = r.re;
                for _ in 0..3 {
                    let d = dh.eval(x);
                    if d == 0.0 {
                        break;
                    }
                    let cand = x - h.eval(x) / d;
                    if cand > 0.0 && h.eval(cand).abs() < h.eval(x).abs() {
                        x = cand;
                    }
                }
                let f = self.inverse_gain_squared(x);
                if best.is_none_or(|(_, bf)| f < bf) {
                    best = Some((x, f));
                }
            }
        }
        best.map(|(x, _)| x.sqrt()).ok_or(Error::NoPositiveRoot)
    }

    /// Solves the coefficient-matching system that writes the closed loop with
    /// the peak-frequency all-pass as `(s² + Ω_p)(s² + σ₁s + σ₀)`.
    pub fn marginal_factorization(&self) -> Result<MarginalFactorization> {
        if !self.condition2_check() {
            return Err(Error::Precondition(
                "peak-gain inequalities p > 0, l > pq, q^2 < 2pl do not hold".into(),
            ));
        }
        let omega_p = self.peak_frequency_cubic()?;
        let big_omega = omega_p * omega_p;
        let g = self.to_tf();
        let ap = allpass_from_critical(critical_gain(&g, omega_p)?, omega_p)?;
        let b = ap.b;
        let expected_b = self.inverse_gain_squared(big_omega).sqrt();
        if (b.abs() - expected_b).abs() > 1e-9 * expected_b {
            return Err(Error::Verification(format!(
                "|b| = {} but sqrt(F(Omega_p)) = {expected_b}",
                b.abs()
            )));
        }
        let (p, q, ell, k, zeta) = (self.p, self.q, self.ell, self.k, self.zeta);
        #[rustfmt::skip]
        let a_mat = DMatrix::from_row_slice(4, 3, &[
            -1.0,              1.0,       0.0,
            -p,                0.0,       1.0,
            -(q + zeta * b),   big_omega, 0.0,
            k * b - ell,       0.0,       big_omega,
        ]);
        let rhs = DVector::from_vec(vec![p, q - zeta * b - big_omega, ell + k * b, 0.0]);

        let mut aug = DMatrix::zeros(4, 4);
        aug.view_mut((0, 0), (4, 3)).copy_from(&a_mat);
        aug.set_column(3, &rhs);
        let sv = aug.singular_values();
        let ratio = sv.min() / sv.max();
        if ratio > 1e-8 {
            return Err(Error::InconsistentSystem(ratio));
        }
        let x = a_mat
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Verification(format!("least squares: {e}")))?;
        let (a, sigma1, sigma0) = (x[0], x[1], x[2]);
        for (name, v) in [("a", a), ("sigma1", sigma1), ("sigma0", sigma0)] {
            if v <= 0.0 {
                return Err(Error::NonPositiveSolution(format!("{name} = {v}")));
            }
        }
        if (a - ap.a).abs() > 1e-8 * ap.a.abs().max(1.0) {
            return Err(Error::Verification(format!(
                "system gives a = {a}, phase rule gives {}",
                ap.a
            )));
        }
        let quartic = &RealPolynomial::new(vec![big_omega, 0.0, 1.0]) * &RealPolynomial::new(vec![sigma0, sigma1, 1.0]);
        let closed = feedback_charpoly(&g, &ap.to_tf())?;
        let scale = closed.norm();
        for i in 0..=4 {
            if (quartic.coeff(i) - closed.coeff(i)).abs() > 1e-8 * scale {
                return Err(Error::Verification(format!(
                    "quartic coefficient {i}: {} vs {}",
                    quartic.coeff(i),
                    closed.coeff(i)
                )));
            }
        }
        Ok(MarginalFactorization {
            a,
            b,
            sigma1,
            sigma0,
            omega_p,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalFactorization {
    pub a: f64,
    pub b: f64,
    pub sigma1: f64,
    pub sigma0: f64,
    pub omega_p: f64,
}

impl MarginalFactorization {
    pub fn allpass(&self) -> AllPass1 {
        AllPass1 { a: self.a, b: self.b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdOrderReport {
    pub coeffs: ThirdOrderCoeffs,
    pub condition1: bool,
    pub condition2: bool,
    pub factorization: Option<MarginalFactorization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedAnalysis {
    pub outcome: SweepOutcome,
    pub third_order: Option<ThirdOrderReport>,
}

/// Lower bounds, all-pass sweep and, for third-order plants, the closed-form path.
pub fn analyze(g: &RationalTF, cfg: &SweepConfig) -> Result<FixedAnalysis> {
    let outcome = sweep_upper_bound(g, &cfg.grid(), cfg)?;
    let third_order = ThirdOrderCoeffs::from_tf(g).map(|c| ThirdOrderReport {
        coeffs: c,
        condition1: c.condition1_check(),
        condition2: c.condition2_check(),
        factorization: if c.condition2_check() {
            c.marginal_factorization().ok()
        } else {
            None
        },
    });
    Ok(FixedAnalysis { outcome, third_order })
}

/// The peak-gain class test: the all-pass built at the peak frequency achieves
/// ω_p-stability.
pub fn peak_allpass_marginal(g: &RationalTF, cfg: &NormConfig) -> Result<bool> {
    let lb = lower_bounds(g, cfg)?;
    if !lb.omega_p.is_finite() {
        return Ok(false);
    }
    match try_frequency(g, lb.omega_p) {
        Some((_, stable)) => Ok(stable),
        None => Ok(false),
    }
}
