//! The three subcommands. Each returns a report plus text artifacts; nothing
//! touches the filesystem until [`RunOutput::write`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rir_core::models::{
    detect_oscillation, fhn_equilibrium, realize, simulate, FhnModel, PlantModel, Repressilator, StateSpaceLTI,
};
use rir_core::rir_fixed::{allpass_from_critical, analyze, critical_gain, lower_bounds, omega_c_stability, AllPass1};
use rir_core::rir_param::{hyperbolic_window, mu_star, shaped_perturbation, uniform_grid};
use rir_core::{NormConfig, RationalTF};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{DeltaSpec, FixedConfig, ModelName, ModelSpec, ParamCliConfig, SimulateConfig, TfSpec};
use crate::error::CliError;

pub const REPORT_FILE: &str = "report.json";

/// JSON number, with infinities spelled `"inf"`/`"-inf"` and NaN as `null`.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::Null
    } else if x == f64::INFINITY {
        Value::from("inf")
    } else if x == f64::NEG_INFINITY {
        Value::from("-inf")
    } else {
        Value::from(x)
    }
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn tf_json(g: &RationalTF) -> Value {
    json!({ "num": g.num().coeffs(), "den": g.den().coeffs() })
}

/// Reads a transfer function written by [`tf_json`].
pub fn tf_from_json(v: &Value) -> Result<RationalTF, CliError> {
    let list = |key: &str| -> Result<Vec<f64>, CliError> {
        v.get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| CliError::Config(format!("certificate lacks `{key}`")))?
            .iter()
            .map(|c| {
                c.as_f64()
                    .ok_or_else(|| CliError::Config(format!("non-numeric `{key}` entry")))
            })
            .collect()
    };
    RationalTF::from_coeffs(&list("num")?, &list("den")?)
        .map_err(|e| CliError::Config(format!("invalid certificate: {e}")))
}

fn allpass_json(ap: &AllPass1) -> Value {
    json!({ "a": num(ap.a), "b": num(ap.b), "delta": tf_json(&ap.to_tf()) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    /// SHA-256 of the resolved configuration in compact JSON.
    pub config_hash: String,
    pub inputs: Value,
    pub results: Value,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub artifacts: Vec<Artifact>,
}

impl RunOutput {
    /// Writes `report.json` and every artifact into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for a in &self.artifacts {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.contents)?;
            written.push(path);
        }
        let path = dir.join(REPORT_FILE);
        let mut text = serde_json::to_string_pretty(&self.report).expect("report serializes");
        text.push('\n');
        std::fs::write(&path, text)?;
        written.push(path);
        Ok(written)
    }
}

fn finish<C: Serialize>(
    command: &'static str,
    cfg: &C,
    started: Instant,
    results: Value,
    artifacts: Vec<Artifact>,
) -> RunOutput {
    let inputs = serde_json::to_value(cfg).expect("config serializes");
    let hash = Sha256::digest(serde_json::to_vec(&inputs).expect("config serializes"));
    RunOutput {
        report: Report {
            tool: "rir",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash: hex::encode(hash),
            inputs,
            results,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        artifacts,
    }
}

pub fn cmd_rir_fixed(cfg: &FixedConfig) -> Result<RunOutput, CliError> {
    let started = Instant::now();
    let g = cfg.plant()?;
    let sweep = cfg.sweep.to_config()?;
    let analysis = analyze(&g, &sweep)?;
    let r = &analysis.outcome.result;

    let certificate = match &r.certificate {
        None => Value::Null,
        Some(c) => {
            let st = omega_c_stability(&g, &c.allpass.to_tf(), c.omega_c)?;
            let mut v = allpass_json(&c.allpass);
            v["omega_c"] = num(c.omega_c);
            v["omega_c_stable"] = Value::from(st.omega_c_stable);
            v["max_real_remaining"] = num(st.max_real_remaining);
            v
        }
    };
    let strict = r.strict.as_ref().map_or(Value::Null, |s| {
        json!({
            "eps": num(s.eps),
            "direction": s.direction,
            "hinf": num(s.hinf),
            "delta": tf_json(&s.delta),
        })
    });
    let third_order = analysis.third_order.as_ref().map_or(Value::Null, |t| {
        let c = &t.coeffs;
        json!({
            "zeta": num(c.zeta), "k": num(c.k), "p": num(c.p), "q": num(c.q), "ell": num(c.ell),
            "condition1": t.condition1,
            "condition2": t.condition2,
            "factorization": t.factorization.as_ref().map_or(Value::Null, |f| json!({
                "a": num(f.a), "b": num(f.b), "sigma1": num(f.sigma1), "sigma0": num(f.sigma0),
                "omega_p": num(f.omega_p),
            })),
        })
    });
    let lb = &r.bounds;
    let results = json!({
        "plant": tf_json(&g),
        "rho_lower": num(r.rho_lower),
        "rho_upper": num(r.rho_upper),
        "exact": r.exact,
        "bound_source": r.bound_source,
        "pip_ok": r.pip_ok,
        "lower_bounds": {
            "rho_p": num(lb.rho_p),
            "rho_o": opt_num(lb.rho_o),
            "omega_p": num(lb.omega_p),
            "n_orhp": lb.n_orhp,
            "certified": lb.certified,
        },
        "certificate": certificate,
        "strict": strict,
        "third_order": third_order,
        "sweep_points": analysis.outcome.samples.len(),
    });

    let mut csv = String::from("omega_c,abs_b,stable\n");
    for s in &analysis.outcome.samples {
        writeln!(csv, "{},{},{}", s.omega_c, s.abs_b, s.stable).unwrap();
    }
    let artifacts = vec![Artifact {
        name: "sweep.csv".into(),
        contents: csv.into_bytes(),
    }];
    Ok(finish("rir-fixed", cfg, started, results, artifacts))
}

const FAMILY_PLOT: &str = "\
set datafile separator ','
set xlabel 'e'
set ylabel 'gain'
set key top right
plot 'family.csv' every ::1 using 1:2 with lines title 'rho_p(e)', \\
     '' every ::1 using 1:3 with lines title '|e|'
";

pub fn cmd_rir_param(cfg: &ParamCliConfig) -> Result<RunOutput, CliError> {
    let started = Instant::now();
    let mut fam = cfg.family()?;
    if let Some((lo, hi)) = cfg.options.grid_range {
        if !(fam.domain.0 <= lo && lo < 0.0 && 0.0 < hi && hi <= fam.domain.1) {
            return Err(CliError::Config(format!(
                "grid range ({lo}, {hi}) must contain 0 and lie in the family domain {:?}",
                fam.domain
            )));
        }
        fam.domain = (lo, hi);
    }
    let pcfg = cfg.options.to_config()?;
    let r = mu_star(&fam, &pcfg)?;
    let window = hyperbolic_window(&fam, &uniform_grid(fam.domain, pcfg.grid_points), &pcfg).ok();

    let certificate = r.certificate.as_ref().map_or(Value::Null, |c| {
        json!({
            "e": num(c.e),
            "eps": num(c.eps),
            "allpass": allpass_json(&c.allpass),
            "omega_p": num(c.omega_p),
            "gamma": num(c.gamma),
            "xi": num(c.xi),
            "hinf": num(c.hinf),
            "static_gain": num(c.static_gain),
            "delta": tf_json(&c.delta),
        })
    });
    let results = json!({
        "family": fam.name,
        "domain": [num(fam.domain.0), num(fam.domain.1)],
        "grid_points": r.samples.len(),
        "e_star": [num(r.e_star.0), num(r.e_star.1)],
        "mu_star": num(r.mu_star),
        "mu_star_arg": num(r.mu_star_arg),
        "exact": r.exact,
        "hyperbolic_window": window.map_or(Value::Null, |(lo, hi)| json!([num(lo), num(hi)])),
        "certificate": certificate,
        "certificate_error": r.certificate_error,
    });

    let mut csv = String::from("e,rho_p,abs_e,cond_a,cond_b\n");
    for s in &r.samples {
        let rho = s.rho_p.map_or(String::new(), |v| v.to_string());
        writeln!(csv, "{},{},{},{},{}", s.e, rho, s.e.abs(), s.cond_a, s.cond_b).unwrap();
    }
    let mut artifacts = vec![Artifact {
        name: "family.csv".into(),
        contents: csv.into_bytes(),
    }];
    if cfg.plot {
        artifacts.push(Artifact {
            name: "family.gp".into(),
            contents: FAMILY_PLOT.as_bytes().to_vec(),
        });
    }
    Ok(finish("rir-param", cfg, started, results, artifacts))
}

/// The transfer function placed in the loop, `None` for the zero perturbation.
pub fn resolve_delta(spec: &DeltaSpec, model: &ModelSpec) -> Result<Option<RationalTF>, CliError> {
    Ok(match spec {
        DeltaSpec::Zero {} => None,
        DeltaSpec::Tf { tf } => Some(tf.to_tf()?),
        DeltaSpec::Coeffs { num, den } => Some(
            TfSpec::Coeffs {
                num: num.clone(),
                den: den.clone(),
            }
            .to_tf()?,
        ),
        DeltaSpec::Shaped { e, eps, xi } => {
            if !(*xi > 0.0) {
                return Err(CliError::Config(format!("xi = {xi} must be positive")));
            }
            let g = model.plant(*e)?;
            let omega_p = lower_bounds(&g, &NormConfig::default())?.omega_p;
            let allpass = allpass_from_critical(critical_gain(&g, omega_p)?, omega_p)?;
            Some(shaped_perturbation(&allpass, *eps, *e, *xi)?.0)
        }
        DeltaSpec::Report { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let v: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let delta = v
                .pointer("/results/certificate/delta")
                .ok_or_else(|| CliError::Config(format!("{} has no certificate", path.display())))?;
            Some(tf_from_json(delta)?)
        }
    })
}

/// Plant, its equilibrium at static gain `e`, and the CSV units line.
type ModelState = (Box<dyn PlantModel>, Vec<f64>, &'static str);

fn model_state(model: &ModelSpec, e: f64) -> Result<ModelState, CliError> {
    Ok(match model.name {
        ModelName::Repressilator => {
            let p = model.repressilator_params();
            p.validate()?;
            (
                Box::new(Repressilator(p)),
                p.equilibrium(e)?.to_vec(),
                "t in hr, concentrations in nM",
            )
        }
        ModelName::Fhn => {
            let p = model.fhn_params()?;
            let (v, w) = fhn_equilibrium(&p, e)?;
            (Box::new(FhnModel(p)), vec![v, w], "dimensionless")
        }
    })
}

pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<RunOutput, CliError> {
    let started = Instant::now();
    if !(cfg.dt > 0.0 && cfg.t_final > 0.0) {
        return Err(CliError::Config(format!(
            "need dt > 0 and t_final > 0, got {} and {}",
            cfg.dt, cfg.t_final
        )));
    }
    if !(cfg.tail_fraction > 0.0 && cfg.tail_fraction < 1.0) {
        return Err(CliError::Config(format!(
            "tail_fraction = {} must lie in (0, 1)",
            cfg.tail_fraction
        )));
    }
    let delta_tf = resolve_delta(&cfg.delta, &cfg.model)?;
    let (delta, e0) = match &delta_tf {
        None => (StateSpaceLTI::zero(), 0.0),
        Some(d) => {
            if !d.is_proper() || !d.is_stable()? {
                return Err(CliError::Config("perturbation must be proper and stable".into()));
            }
            (realize(d)?, d.static_gain()?)
        }
    };
    let (model, x_nominal, units) = model_state(&cfg.model, 0.0)?;
    let x0 = match &cfg.x0 {
        Some(x) if x.len() != model.dim() => {
            return Err(CliError::Config(format!("x0 needs {} entries", model.dim())));
        }
        Some(x) => x.clone(),
        None => match cfg.model.name {
            ModelName::Repressilator => x_nominal.iter().map(|x| x * 1.01).collect(),
            ModelName::Fhn => vec![x_nominal[0] + 0.01, x_nominal[1]],
        },
    };
    let (_, x_target, _) = model_state(&cfg.model, e0)?;

    let tr = simulate(model.as_ref(), &delta, &x0, cfg.t_final, cfg.dt)?;
    let osc = detect_oscillation(&tr, cfg.tail_fraction, cfg.tau_osc)?;
    let final_state = tr.final_plant().to_vec();
    let dev: Vec<f64> = final_state.iter().zip(&x_target).map(|(a, b)| a - b).collect();
    let distance = dev.iter().map(|d| d * d).sum::<f64>().sqrt();
    let max_dev = dev.iter().fold(0.0f64, |m, d| m.max(d.abs()));

    let results = json!({
        "oscillating": osc.oscillating,
        "amplitude": osc.amplitude.iter().copied().map(num).collect::<Vec<_>>(),
        "final_state": final_state.iter().copied().map(num).collect::<Vec<_>>(),
        "x0": x0.iter().copied().map(num).collect::<Vec<_>>(),
        "delta_static_gain": num(e0),
        "equilibrium": x_target.iter().copied().map(num).collect::<Vec<_>>(),
        "distance": num(distance),
        "max_abs_deviation": num(max_dev),
        "positivity_violations": tr.positivity_violations,
        "rows": tr.len(),
        "delta": delta_tf.as_ref().map_or(Value::Null, tf_json),
        "delta_order": delta.order(),
    });
    let mut artifacts = Vec::new();
    if cfg.write_trajectory {
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, units)?;
        artifacts.push(Artifact {
            name: "trajectory.csv".into(),
            contents: buf,
        });
    }
    Ok(finish("simulate", cfg, started, results, artifacts))
}

/// `N` or `LO:HI:N`.
pub fn parse_e_grid(text: &str) -> Result<(usize, Option<(f64, f64)>), CliError> {
    let bad = || CliError::Config(format!("--e-grid expects N or LO:HI:N, got {text:?}"));
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [n] => Ok((n.parse().map_err(|_| bad())?, None)),
        [lo, hi, n] => Ok((
            n.parse().map_err(|_| bad())?,
            Some((lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?)),
        )),
        _ => Err(bad()),
    }
}
