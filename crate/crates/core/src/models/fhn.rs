use std::sync::Arc;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::PlantModel;
use crate::error::{Error, Result};
use crate::rir_param::ParamFamily;
use crate::tf::RationalTF;

/// FitzHugh–Nagumo neuron `cv̇ = ψ(v) − (1 + δ)w`, `τẇ = v + α − βw`, `ψ(v) = v − v³/3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FhnParams {
    pub c: f64,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl FhnParams {
    pub fn validate(&self) -> Result<()> {
        if [self.c, self.tau, self.alpha, self.beta].iter().all(|&v| v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "FHN parameters must be positive: {self:?}"
            )))
        }
    }

    pub fn jacobian(&self, v: f64) -> Matrix2<f64> {
        Matrix2::new(
            (1.0 - v * v) / self.c,
            -1.0 / self.c,
            1.0 / self.tau,
            -self.beta / self.tau,
        )
    }
}

fn psi(v: f64) -> f64 {
    v - v * v * v / 3.0
}

/// Equilibrium `(v̄, w̄)` with the coupling gain `1 + e`.
pub fn fhn_equilibrium(p: &FhnParams, e: f64) -> Result<(f64, f64)> {
    p.validate()?;
    let gain = 1.0 + e;
    if !(gain > p.beta) {
        return Err(Error::NonUniqueEquilibrium {
            one_plus_e: gain,
            beta: p.beta,
        });
    }
    // strictly decreasing in v once 1 + e > β
    let h = |v: f64| psi(v) - gain * (v + p.alpha) / p.beta;
    let mut r = 1.0;
    while !(h(-r) > 0.0 && h(r) < 0.0) {
        r *= 2.0;
        if r > 1e12 {
            return Err(Error::NoBracket);
        }
    }
    let (mut lo, mut hi) = (-r, r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v = 0.5 * (lo + hi);
    Ok((v, (v + p.alpha) / p.beta))
}

/// `g_e(s) = −1/(cτs² + (βc − τγ)s + 1 − βγ)` with `γ = 1 − v̄²`, mapping
/// the perturbation output to the recovery variable `w`.
pub fn linearize_fhn(p: &FhnParams, e: f64) -> Result<RationalTF> {
    let (v, _) = fhn_equilibrium(p, e)?;
    let gamma = 1.0 - v * v;
    RationalTF::from_coeffs(
        &[-1.0],
        &[1.0 - p.beta * gamma, p.beta * p.c - p.tau * gamma, p.c * p.tau],
    )
}

/// The linearized family over `e ∈ (β − 1, e_plus)`.
pub fn fhn_family(p: FhnParams, e_plus: f64) -> ParamFamily {
    ParamFamily::new("fhn", (p.beta - 1.0, e_plus), Arc::new(move |e| linearize_fhn(&p, e)))
}

/// Plant `(v, w)` whose loop output is `w`; the loop input subtracts from `cv̇`.
#[derive(Debug, Clone, Copy)]
pub struct FhnModel(pub FhnParams);

impl PlantModel for FhnModel {
    fn dim(&self) -> usize {
        2
    }

    fn loop_output(&self, x: &[f64]) -> f64 {
        x[1]
    }

    fn rhs(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let p = &self.0;
        dx[0] = (psi(x[0]) - x[1] - u) / p.c;
        dx[1] = (x[0] + p.alpha - p.beta * x[1]) / p.tau;
    }
}
