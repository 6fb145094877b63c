//! JSON configuration for the three subcommands.
//!
//! Every block rejects unknown keys. Omitted tolerances fall back to the
//! library defaults.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rir_core::models::{
    fhn_family, linearize_fhn, linearize_repressilator, repressilator_family, FhnParams, RepressilatorParams,
};
use rir_core::rir_fixed::SweepConfig;
use rir_core::rir_param::{default_xi_grid, ParamConfig, ParamFamily};
use rir_core::{NormConfig, RationalTF, RealPolynomial};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Parses `num: c0, c1, ...; den: d0, d1, ...` with ascending coefficients.
pub fn parse_tf(text: &str) -> Result<RationalTF, CliError> {
    let mut num = None;
    let mut den = None;
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, list) = part
            .split_once(':')
            .ok_or_else(|| CliError::Config(format!("expected `key: values` in {part:?}")))?;
        let coeffs = list
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("bad coefficient in {part:?}: {e}")))?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(CliError::Config(format!("non-finite coefficient in {part:?}")));
        }
        match key.trim() {
            "num" => num = Some(coeffs),
            "den" => den = Some(coeffs),
            other => return Err(CliError::Config(format!("unknown tf key {other:?}"))),
        }
    }
    let (Some(num), Some(den)) = (num, den) else {
        return Err(CliError::Config("tf needs both `num:` and `den:`".into()));
    };
    RationalTF::from_coeffs(&num, &den).map_err(|e| CliError::Config(format!("invalid tf: {e}")))
}

/// A plant given either as `num: ...; den: ...` text or as coefficient arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TfSpec {
    Text(String),
    Coeffs { num: Vec<f64>, den: Vec<f64> },
}

impl TfSpec {
    pub fn to_tf(&self) -> Result<RationalTF, CliError> {
        match self {
            TfSpec::Text(t) => parse_tf(t),
            TfSpec::Coeffs { num, den } => {
                RationalTF::from_coeffs(num, den).map_err(|e| CliError::Config(format!("invalid tf: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Repressilator,
    Fhn,
}

/// A case-study model with optional parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: ModelName,
    #[serde(default)]
    pub repressilator: Option<RepressilatorParams>,
    #[serde(default)]
    pub fhn: Option<FhnParams>,
}

impl ModelSpec {
    pub fn named(name: ModelName) -> Self {
        Self {
            name,
            repressilator: None,
            fhn: None,
        }
    }

    pub fn repressilator_params(&self) -> RepressilatorParams {
        self.repressilator.unwrap_or_default()
    }

    pub fn fhn_params(&self) -> Result<FhnParams, CliError> {
        self.fhn
            .ok_or_else(|| CliError::Config("model `fhn` needs an `fhn` parameter block".into()))
    }

    /// Linearized plant at static gain `e`.
    pub fn plant(&self, e: f64) -> Result<RationalTF, CliError> {
        Ok(match self.name {
            ModelName::Repressilator => linearize_repressilator(&self.repressilator_params(), e)?.0,
            ModelName::Fhn => linearize_fhn(&self.fhn_params()?, e)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub points: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub golden_iters: usize,
    pub tau_axis: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        let s = SweepConfig::default();
        Self {
            points: s.points,
            omega_min: s.omega_min,
            omega_max: s.omega_max,
            golden_iters: s.golden_iters,
            tau_axis: s.norm.tau_axis,
        }
    }
}

impl SweepOptions {
    pub fn to_config(&self) -> Result<SweepConfig, CliError> {
        if self.points < 2 || !(self.omega_min > 0.0 && self.omega_max > self.omega_min) {
            return Err(CliError::Config(format!("invalid sweep options {self:?}")));
        }
        Ok(SweepConfig {
            points: self.points,
            omega_min: self.omega_min,
            omega_max: self.omega_max,
            golden_iters: self.golden_iters,
            norm: NormConfig {
                tau_axis: self.tau_axis,
                ..NormConfig::default()
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedConfig {
    #[serde(default)]
    pub tf: Option<TfSpec>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    /// Static gain at which a model is linearized.
    #[serde(default)]
    pub e: f64,
    #[serde(default)]
    pub sweep: SweepOptions,
}

impl FixedConfig {
    pub fn plant(&self) -> Result<RationalTF, CliError> {
        match (&self.tf, &self.model) {
            (Some(tf), None) => tf.to_tf(),
            (None, Some(m)) => m.plant(self.e),
            (Some(_), Some(_)) => Err(CliError::Config("give either `tf` or `model`, not both".into())),
            (None, None) => Err(CliError::Config("missing plant: set `tf` or `model`".into())),
        }
    }
}

/// Family whose transfer-function coefficients are polynomials in `e`:
/// `num[i]` lists the ascending `e`-coefficients of the `s^i` coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyFamily {
    pub domain: (f64, f64),
    pub num: Vec<Vec<f64>>,
    pub den: Vec<Vec<f64>>,
}

impl PolyFamily {
    pub fn family(&self) -> ParamFamily {
        let spec = self.clone();
        let eval_table = |table: &[Vec<f64>], e: f64| -> Vec<f64> {
            table.iter().map(|c| RealPolynomial::new(c.clone()).eval(e)).collect()
        };
        ParamFamily::new(
            "polynomial",
            self.domain,
            Arc::new(move |e| RationalTF::from_coeffs(&eval_table(&spec.num, e), &eval_table(&spec.den, e))),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamOptions {
    pub grid_points: usize,
    /// Optional sub-interval of the family domain to sample.
    pub grid_range: Option<(f64, f64)>,
    pub e_tol: f64,
    pub eps: f64,
    pub xi_grid: Vec<f64>,
    pub slack: f64,
    pub tau_axis: f64,
}

impl Default for ParamOptions {
    fn default() -> Self {
        let p = ParamConfig::default();
        Self {
            grid_points: p.grid_points,
            grid_range: None,
            e_tol: p.e_tol,
            eps: p.eps,
            xi_grid: default_xi_grid(),
            slack: p.slack,
            tau_axis: p.norm.tau_axis,
        }
    }
}

impl ParamOptions {
    pub fn to_config(&self) -> Result<ParamConfig, CliError> {
        if self.grid_points < 2 || self.xi_grid.iter().any(|&x| !(x > 0.0)) || self.xi_grid.is_empty() {
            return Err(CliError::Config(format!("invalid family options {self:?}")));
        }
        Ok(ParamConfig {
            grid_points: self.grid_points,
            e_tol: self.e_tol,
            golden_iters: ParamConfig::default().golden_iters,
            xi_grid: self.xi_grid.clone(),
            eps: self.eps,
            slack: self.slack,
            norm: NormConfig {
                tau_axis: self.tau_axis,
                ..NormConfig::default()
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamCliConfig {
    #[serde(default)]
    pub model: Option<ModelSpec>,
    /// Upper end of the FHN family domain.
    #[serde(default)]
    pub fhn_e_plus: Option<f64>,
    #[serde(default)]
    pub poly_family: Option<PolyFamily>,
    /// A fixed plant treated as a constant family over `constant_domain`.
    #[serde(default)]
    pub tf: Option<TfSpec>,
    #[serde(default)]
    pub constant_domain: Option<(f64, f64)>,
    #[serde(default)]
    pub options: ParamOptions,
    #[serde(default = "yes")]
    pub plot: bool,
}

fn yes() -> bool {
    true
}

impl Default for ParamCliConfig {
    fn default() -> Self {
        Self {
            model: None,
            fhn_e_plus: None,
            poly_family: None,
            tf: None,
            constant_domain: None,
            options: ParamOptions::default(),
            plot: true,
        }
    }
}

impl ParamCliConfig {
    pub fn family(&self) -> Result<ParamFamily, CliError> {
        let set = [self.model.is_some(), self.poly_family.is_some(), self.tf.is_some()];
        if set.iter().filter(|&&b| b).count() != 1 {
            return Err(CliError::Config(
                "give exactly one of `model`, `poly_family`, `tf`".into(),
            ));
        }
        let fam = if let Some(m) = &self.model {
            match m.name {
                ModelName::Repressilator => repressilator_family(m.repressilator_params()),
                ModelName::Fhn => {
                    let p = m.fhn_params()?;
                    let e_plus = self
                        .fhn_e_plus
                        .ok_or_else(|| CliError::Config("model `fhn` needs `fhn_e_plus`".into()))?;
                    fhn_family(p, e_plus)
                }
            }
        } else if let Some(pf) = &self.poly_family {
            pf.family()
        } else {
            let g = self.tf.as_ref().map(TfSpec::to_tf).transpose()?.expect("checked above");
            ParamFamily::constant(g, self.constant_domain.unwrap_or((-1.0, 1.0)))
        };
        fam.validate()?;
        Ok(fam)
    }
}

/// Perturbation placed in the simulation loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaSpec {
    Zero {},
    /// Transfer function in text or array form.
    Tf {
        tf: TfSpec,
    },
    /// Ascending coefficient lists, as emitted in reports.
    Coeffs {
        num: Vec<f64>,
        den: Vec<f64>,
    },
    /// High-pass adjusted, scaled peak-frequency all-pass of the model at `e`.
    Shaped {
        e: f64,
        eps: f64,
        #[serde(default = "default_xi")]
        xi: f64,
    },
    /// The certificate stored in a `rir-param` report.
    Report {
        path: PathBuf,
    },
}

fn default_xi() -> f64 {
    0.01
}

impl Default for DeltaSpec {
    fn default() -> Self {
        DeltaSpec::Zero {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    pub delta: DeltaSpec,
    /// Defaults to the nominal equilibrium raised by 1% per coordinate.
    pub x0: Option<Vec<f64>>,
    pub t_final: f64,
    pub dt: f64,
    pub tail_fraction: f64,
    pub tau_osc: f64,
    pub write_trajectory: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::named(ModelName::Repressilator),
            delta: DeltaSpec::Zero {},
            x0: None,
            t_final: 200.0,
            dt: 1e-3,
            tail_fraction: 0.5,
            tau_osc: rir_core::models::TAU_OSC,
            write_trajectory: true,
        }
    }
}

pub fn load_json<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}
