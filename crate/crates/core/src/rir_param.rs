//! Robust instability radius of perturbation-parametrized families.
//!
//! A family `e ↦ g_e(s)` arises when a nonlinear system is linearized at an
//! equilibrium that itself moves with the static gain `e = δ(0)` of the
//! perturbation. A stabilizing `δ` must then satisfy both `‖δ‖ ≥ |e|` and
//! `‖δ‖ ≥ ρ*(e)`, which leads to the interval `𝔼*` around zero on which
//! `|e| < ϱ_p(e)` and to `μ* = inf_{𝔼*} ϱ_p(e)`. Certificates combine a
//! strictified peak-frequency all-pass with a high-pass factor
//! `(s + ξγ)/(s + ξ)` that sets the static gain to `e`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::TAU_AXIS;
use crate::rir_fixed::{
    allpass_from_critical, critical_gain, internally_stabilizes, lower_bounds, peak_allpass_marginal, AllPass1,
    ThirdOrderCoeffs,
};
use crate::tf::{feedback_charpoly, NormConfig, RationalTF};

pub type Generator = Arc<dyn Fn(f64) -> Result<RationalTF> + Send + Sync>;

/// `e ↦ g_e(s)` on an open interval `(e_minus, e_plus)` containing zero.
#[derive(Clone)]
pub struct ParamFamily {
    pub name: String,
    pub domain: (f64, f64),
    generator: Generator,
}

impl fmt::Debug for ParamFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamFamily")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl ParamFamily {
    pub fn new(name: impl Into<String>, domain: (f64, f64), generator: Generator) -> Self {
        Self {
            name: name.into(),
            domain,
            generator,
        }
    }

    /// The same plant for every `e`.
    pub fn constant(g: RationalTF, domain: (f64, f64)) -> Self {
        Self::new("constant", domain, Arc::new(move |_| Ok(g.clone())))
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.domain;
        if !(lo < 0.0 && 0.0 < hi) {
            return Err(Error::InvalidInput(format!("domain ({lo}, {hi}) must contain 0")));
        }
        Ok(())
    }

    pub fn eval(&self, e: f64) -> Result<RationalTF> {
        let (lo, hi) = self.domain;
        if !(lo < e && e < hi) {
            return Err(Error::DomainError(format!("e = {e} outside ({lo}, {hi})")));
        }
        (self.generator)(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamConfig {
    pub grid_points: usize,
    /// Absolute tolerance of endpoint bisection.
    pub e_tol: f64,
    pub golden_iters: usize,
    pub xi_grid: Vec<f64>,
    pub eps: f64,
    /// Relative allowance on the small-gain and `|e| < ϱ_p(e)` gates.
    pub slack: f64,
    pub norm: NormConfig,
}

impl Default for ParamConfig {
    fn default() -> Self {
        Self {
            grid_points: 401,
            e_tol: 1e-10,
            golden_iters: 60,
            xi_grid: default_xi_grid(),
            eps: 0.05,
            slack: 1e-4,
            norm: NormConfig::default(),
        }
    }
}

pub fn default_xi_grid() -> Vec<f64> {
    vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4]
}

/// `n` uniform interior points of `domain`, plus `0`.
pub fn uniform_grid(domain: (f64, f64), n: usize) -> Vec<f64> {
    let (lo, hi) = domain;
    let mut g: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * (i + 1) as f64 / (n + 1) as f64)
        .collect();
    g.push(0.0);
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSample {
    pub e: f64,
    pub rho_p: Option<f64>,
    pub omega_p: Option<f64>,
    pub rho_o: Option<f64>,
    pub n_orhp: usize,
    /// `ϱ_p(e)` is the exact radius: the peak-frequency all-pass is a marginal stabilizer.
    pub cond_a: bool,
    /// Even, nonzero number of ORHP poles.
    pub cond_b: bool,
    /// At least one ORHP pole and none on the imaginary axis.
    pub hyperbolic: bool,
    pub max_real_pole: f64,
    pub error: Option<String>,
}

impl ParamSample {
    fn failed(e: f64, err: Error) -> Self {
        Self {
            e,
            rho_p: None,
            omega_p: None,
            rho_o: None,
            n_orhp: 0,
            cond_a: false,
            cond_b: false,
            hyperbolic: false,
            max_real_pole: f64::NAN,
            error: Some(err.to_string()),
        }
    }

    /// `ϱ_p(e) − |e|`, negative when undefined.
    fn margin(&self) -> f64 {
        match self.rho_p {
            Some(r) if self.hyperbolic => r - self.e.abs(),
            _ => -1.0,
        }
    }
}

pub fn sample_at(fam: &ParamFamily, e: f64, cfg: &NormConfig) -> ParamSample {
    let g = match fam.eval(e) {
        Ok(g) => g,
        Err(err) => return ParamSample::failed(e, err),
    };
    let (counts, max_real_pole) = match g.poles() {
        Ok(p) => (p.counts(cfg.tau_axis), p.max_real()),
        Err(err) => return ParamSample::failed(e, err),
    };
    let hyperbolic = counts.axis == 0 && counts.orhp > 0;
    let mut s = ParamSample {
        e,
        rho_p: None,
        omega_p: None,
        rho_o: None,
        n_orhp: counts.orhp,
        cond_a: false,
        cond_b: counts.orhp > 0 && counts.orhp % 2 == 0,
        hyperbolic,
        max_real_pole,
        error: None,
    };
    match lower_bounds(&g, cfg) {
        Ok(lb) => {
            s.rho_p = Some(lb.rho_p);
            s.omega_p = Some(lb.omega_p);
            s.rho_o = lb.rho_o;
        }
        Err(err) => {
            s.error = Some(err.to_string());
            return s;
        }
    }
    s.cond_a = match ThirdOrderCoeffs::from_tf(&g) {
        Some(c) if c.condition2_check() => true,
        _ => peak_allpass_marginal(&g, cfg).unwrap_or(false),
    };
    s
}

/// Evaluates the family on every grid point in parallel; failures are recorded per sample.
pub fn sample_family(fam: &ParamFamily, grid: &[f64], cfg: &NormConfig) -> Vec<ParamSample> {
    grid.par_iter().map(|&e| sample_at(fam, e, cfg)).collect()
}

/// Largest interval around zero on which `|e| < ϱ_p(e)`, endpoints refined by bisection.
pub fn find_e_star(fam: &ParamFamily, samples: &[ParamSample], cfg: &ParamConfig) -> Result<(f64, f64)> {
    let i0 = samples
        .iter()
        .position(|s| s.e == 0.0)
        .ok_or_else(|| Error::OriginViolation("grid does not contain e = 0".into()))?;
    match samples[i0].rho_p {
        Some(r) if r > 0.0 && samples[i0].hyperbolic => {}
        _ => {
            return Err(Error::OriginViolation(format!(
                "rho_p undefined or nonpositive at e = 0: {:?}",
                samples[i0].error
            )))
        }
    }
    let margin = |e: f64| sample_at(fam, e, &cfg.norm).margin();
    let refine = |inner: f64, outer: f64| {
        let (mut a, mut b) = (inner, outer);
        while (b - a).abs() > cfg.e_tol {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            if margin(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    // an interval running into the domain boundary ends there
    let snap = |e: f64, end: f64| if (end - e).abs() <= 2.0 * cfg.e_tol { end } else { e };
    let hi = match (i0 + 1..samples.len()).find(|&j| samples[j].margin() <= 0.0) {
        Some(j) => refine(samples[j - 1].e, samples[j].e),
        None => snap(refine(samples[samples.len() - 1].e, fam.domain.1), fam.domain.1),
    };
    let lo = match (0..i0).rev().find(|&j| samples[j].margin() <= 0.0) {
        Some(j) => refine(samples[j + 1].e, samples[j].e),
        None => snap(refine(samples[0].e, fam.domain.0), fam.domain.0),
    };
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFamilyResult {
    pub samples: Vec<ParamSample>,
    pub e_star: (f64, f64),
    pub mu_star: f64,
    pub mu_star_arg: f64,
    /// Conditions (a) and (b) held on every sample of `𝔼*`.
    pub exact: bool,
    pub certificate: Option<DeltaCertificate>,
    pub certificate_error: Option<String>,
}

/// Samples the family, locates `𝔼*` and minimizes `ϱ_p` over it.
pub fn mu_star(fam: &ParamFamily, cfg: &ParamConfig) -> Result<ParamFamilyResult> {
    fam.validate()?;
    let grid = uniform_grid(fam.domain, cfg.grid_points);
    let samples = sample_family(fam, &grid, &cfg.norm);
    let (lo, hi) = find_e_star(fam, &samples, cfg)?;

    let rho = |e: f64| sample_at(fam, e, &cfg.norm).rho_p;
    let mut cands: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.e > lo && s.e < hi)
        .filter_map(|s| s.rho_p.map(|r| (s.e, r)))
        .collect();
    for end in [lo, hi] {
        if let Some(r) = rho(end) {
            cands.push((end, r));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (i_min, &(mut arg, mut val)) = cands
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .ok_or_else(|| Error::OriginViolation("no valid samples in E*".into()))?;
    if i_min > 0 && i_min + 1 < cands.len() {
        let (a, b) = (cands[i_min - 1].0, cands[i_min + 1].0);
        let (e, v) = golden(|e| rho(e).unwrap_or(f64::INFINITY), a, b, cfg.golden_iters);
        if v < val {
            arg = e;
            val = v;
        }
    }

    let inside: Vec<&ParamSample> = samples.iter().filter(|s| s.e > lo && s.e < hi).collect();
    let at_arg = sample_at(fam, arg, &cfg.norm);
    let exact = inside.iter().all(|s| s.cond_a && s.cond_b) && at_arg.cond_a && at_arg.cond_b;
    let (certificate, certificate_error) = if exact {
        match construct_delta_e(fam, arg, cfg.eps, cfg) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    Ok(ParamFamilyResult {
        samples,
        e_star: (lo, hi),
        mu_star: val,
        mu_star_arg: arg,
        exact,
        certificate,
        certificate_error,
    })
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `(s + ξγ)/(s + ξ)`.
pub fn highpass_filter(xi: f64, gamma: f64) -> RationalTF {
    RationalTF::from_coeffs(&[xi * gamma, 1.0], &[xi, 1.0]).expect("nonzero denominator")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighpassResult {
    pub delta: RationalTF,
    pub xi: f64,
    pub gamma: f64,
}

/// Rescales the static gain of a stabilizer `d` to `e_target` by a high-pass
/// factor, keeping the largest grid `ξ` for which the loop stays stable.
pub fn highpass_adjust(
    d: &RationalTF,
    e_target: f64,
    xi_grid: &[f64],
    g: &RationalTF,
    slack: f64,
) -> Result<HighpassResult> {
    if !d.is_proper() || !d.is_stable()? {
        return Err(Error::Precondition("perturbation must be proper and stable".into()));
    }
    let counts = g.pole_counts(TAU_AXIS)?;
    if counts.axis > 0 || counts.orhp == 0 || counts.orhp % 2 == 1 {
        return Err(Error::Precondition(format!(
            "plant needs an even, nonzero number of ORHP poles and none on the axis (orhp = {}, axis = {})",
            counts.orhp, counts.axis
        )));
    }
    if !internally_stabilizes(g, d)? {
        return Err(Error::Precondition("perturbation does not stabilize the plant".into()));
    }
    let d0 = d.static_gain()?;
    if d0 == 0.0 {
        return Err(Error::Precondition("perturbation has zero static gain".into()));
    }
    let gamma = e_target / d0;
    let loop_gain = gamma.abs() * d.mul(g)?.linf_norm(&NormConfig::default())?.linf;
    if !(gamma.abs() < 1.0) || loop_gain >= 1.0 + slack {
        return Err(Error::SmallGainViolated { gamma, loop_gain });
    }
    let mut xis = xi_grid.to_vec();
    xis.sort_by(|a, b| b.total_cmp(a));
    let mut last_max_real = f64::NAN;
    for &xi in &xis {
        let adj = highpass_filter(xi, gamma).mul(d)?;
        if internally_stabilizes(g, &adj)? {
            return Ok(HighpassResult { delta: adj, xi, gamma });
        }
        last_max_real = feedback_charpoly(g, &adj)
            .and_then(|cp| cp.roots())
            .map(|r| r.max_real())
            .unwrap_or(f64::NAN);
    }
    Err(Error::NoStabilizingXi {
        xi: xis.last().copied().unwrap_or(f64::NAN),
        max_real: last_max_real,
    })
}

/// `f(s)·(1 + ε)·b(s − a)/(s + a)` with `f` chosen so the static gain is `e`.
pub fn shaped_perturbation(allpass: &AllPass1, eps: f64, e: f64, xi: f64) -> Result<(RationalTF, f64)> {
    let base = allpass.scaled(1.0 + eps).to_tf();
    let d0 = base.static_gain()?;
    if d0 == 0.0 {
        return Err(Error::Precondition("all-pass has zero static gain".into()));
    }
    let gamma = e / d0;
    Ok((highpass_filter(xi, gamma).mul(&base)?, gamma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCertificate {
    pub e: f64,
    pub eps: f64,
    /// Unscaled peak-frequency all-pass of `g_e`.
    pub allpass: AllPass1,
    pub omega_p: f64,
    pub gamma: f64,
    pub xi: f64,
    pub delta: RationalTF,
    pub hinf: f64,
    pub static_gain: f64,
}

/// Stabilizing perturbation with static gain `e` and norm `(1 + ε)ϱ_p(e)`.
pub fn construct_delta_e(fam: &ParamFamily, e: f64, eps: f64, cfg: &ParamConfig) -> Result<DeltaCertificate> {
    let g = fam.eval(e)?;
    let s = sample_at(fam, e, &cfg.norm);
    let rho_p = s
        .rho_p
        .ok_or_else(|| Error::Precondition(format!("rho_p undefined at e = {e}: {:?}", s.error)))?;
    if !(s.cond_a && s.cond_b) {
        return Err(Error::Precondition(format!(
            "conditions fail at e = {e} (cond_a = {}, cond_b = {})",
            s.cond_a, s.cond_b
        )));
    }
    if e.abs() >= rho_p * (1.0 + cfg.slack) {
        return Err(Error::Precondition(format!(
            "|e| = {} exceeds rho_p = {rho_p}",
            e.abs()
        )));
    }
    let omega_p = s.omega_p.unwrap_or(f64::NAN);
    let allpass = allpass_from_critical(critical_gain(&g, omega_p)?, omega_p)?;
    let strict = allpass.scaled(1.0 + eps).to_tf();
    if !internally_stabilizes(&g, &strict)? {
        return Err(Error::EpsTooSmall(eps));
    }
    let adj = highpass_adjust(&strict, e, &cfg.xi_grid, &g, cfg.slack)?;
    let static_gain = adj.delta.static_gain()?;
    if (static_gain - e).abs() > 1e-10 {
        return Err(Error::Verification(format!(
            "static gain {static_gain} differs from e = {e}"
        )));
    }
    let hinf = adj.delta.linf_norm(&cfg.norm)?.linf;
    if hinf > rho_p * (1.0 + eps) * (1.0 + 1e-9) {
        return Err(Error::Verification(format!("norm {hinf} exceeds (1 + eps) rho_p")));
    }
    if !internally_stabilizes(&g, &adj.delta)? {
        return Err(Error::Verification("adjusted perturbation lost stability".into()));
    }
    Ok(DeltaCertificate {
        e,
        eps,
        allpass,
        omega_p,
        gamma: adj.gamma,
        xi: adj.xi,
        delta: adj.delta,
        hinf,
        static_gain,
    })
}

/// `(|e|, ϱ_p(e))`, both lower bounds on the family radius at `e`.
pub fn pointwise_bounds(sample: &ParamSample) -> Option<(f64, f64)> {
    sample.rho_p.map(|r| (sample.e.abs(), r))
}

/// Largest interval around zero on which `g_e` stays hyperbolically unstable,
/// endpoints refined by bisection on the sign of the largest pole real part.
pub fn hyperbolic_window(fam: &ParamFamily, grid: &[f64], cfg: &ParamConfig) -> Result<(f64, f64)> {
    let samples = sample_family(fam, grid, &cfg.norm);
    let i0 = samples
        .iter()
        .position(|s| s.e == 0.0)
        .ok_or_else(|| Error::OriginViolation("grid does not contain e = 0".into()))?;
    if !samples[i0].hyperbolic {
        return Err(Error::OriginViolation(
            "family is not hyperbolically unstable at e = 0".into(),
        ));
    }
    let ok = |e: f64| sample_at(fam, e, &cfg.norm).hyperbolic;
    let refine = |mut a: f64, mut b: f64| {
        while (b - a).abs() > cfg.e_tol {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            if ok(m) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    let hi = match (i0 + 1..samples.len()).find(|&j| !samples[j].hyperbolic) {
        Some(j) => refine(samples[j - 1].e, samples[j].e),
        None => fam.domain.1,
    };
    let lo = match (0..i0).rev().find(|&j| !samples[j].hyperbolic) {
        Some(j) => refine(samples[j + 1].e, samples[j].e),
        None => fam.domain.0,
    };
    Ok((lo, hi))
}
