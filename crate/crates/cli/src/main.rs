use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rir_cli::commands::{cmd_rir_fixed, cmd_rir_param, cmd_simulate, parse_e_grid, RunOutput};
use rir_cli::config::{load_json, FixedConfig, ModelName, ModelSpec, ParamCliConfig, SimulateConfig, TfSpec};
use rir_cli::CliError;

/// Robust instability radius analysis of unstable SISO plants.
#[derive(Parser)]
#[command(name = "rir", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for report.json and data files.
    #[arg(long, env = "RIR_OUT_DIR", default_value = "rir-out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Radius of a fixed plant.
    RirFixed {
        #[command(flatten)]
        common: Common,
        /// Plant as `num: c0,c1,...; den: d0,d1,...`.
        #[arg(long, conflicts_with = "model")]
        tf: Option<String>,
        /// Case-study model linearized at e = 0 (or the configured e).
        #[arg(long, value_enum)]
        model: Option<ModelName>,
    },
    /// Radius of a perturbation-parametrized family.
    RirParam {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: Option<ModelName>,
        /// `N` points, or `LO:HI:N` over a sub-interval.
        #[arg(long, allow_hyphen_values = true)]
        e_grid: Option<String>,
    },
    /// Nonlinear simulation with a perturbation in the loop.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: Option<ModelName>,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
}

fn override_model(current: Option<ModelSpec>, name: ModelName) -> ModelSpec {
    match current {
        Some(m) if m.name == name => m,
        _ => ModelSpec::named(name),
    }
}

fn run(cli: Cli) -> Result<(RunOutput, PathBuf), CliError> {
    match cli.command {
        Command::RirFixed { common, tf, model } => {
            let mut cfg: FixedConfig = load_json(common.config.as_deref())?;
            if let Some(tf) = tf {
                cfg.tf = Some(TfSpec::Text(tf));
                cfg.model = None;
            }
            if let Some(name) = model {
                cfg.model = Some(override_model(cfg.model.take(), name));
                cfg.tf = None;
            }
            Ok((cmd_rir_fixed(&cfg)?, common.out_dir))
        }
        Command::RirParam { common, model, e_grid } => {
            let mut cfg: ParamCliConfig = load_json(common.config.as_deref())?;
            if let Some(name) = model {
                cfg.model = Some(override_model(cfg.model.take(), name));
                cfg.poly_family = None;
                cfg.tf = None;
            }
            if let Some(g) = e_grid {
                let (n, range) = parse_e_grid(&g)?;
                cfg.options.grid_points = n;
                if range.is_some() {
                    cfg.options.grid_range = range;
                }
            }
            Ok((cmd_rir_param(&cfg)?, common.out_dir))
        }
        Command::Simulate {
            common,
            model,
            t_final,
            dt,
        } => {
            let mut cfg: SimulateConfig = load_json(common.config.as_deref())?;
            if let Some(name) = model {
                cfg.model = override_model(Some(cfg.model), name);
            }
            if let Some(t) = t_final {
                cfg.t_final = t;
            }
            if let Some(dt) = dt {
                cfg.dt = dt;
            }
            Ok((cmd_simulate(&cfg)?, common.out_dir))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli).and_then(|(out, dir)| {
        let paths = out.write(&dir)?;
        Ok((out, paths))
    });
    match result {
        Ok((out, paths)) => {
            eprintln!("{} finished in {:.3} s", out.report.command, out.report.wall_time_s);
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
