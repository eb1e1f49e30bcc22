use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use orthohmc_cli::config::{Experiment, ExperimentConfig, Method, Methods, Overrides};
use orthohmc_cli::container::import_chain;
use orthohmc_cli::error::{CliError, ErrorReport};
use orthohmc_cli::experiments::run_experiment;
use orthohmc_cli::summary::summarize_chains;

#[derive(Parser)]
#[command(name = "orthohmc", version, about = "Stiefel-manifold HMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Sample {
        #[arg(long, short)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Print the summary as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Integrator audit from a config, or energy and ESS of stored chains.
    Diagnose {
        #[arg(long, short, conflicts_with = "chains")]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Chain container files.
        chains: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Summary table of chain files or run directories.
    Summarize {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
        /// Print wall times as `*`.
        #[arg(long)]
        mask_timing: bool,
        /// Also write the summary to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Scale sample, burn-in and thinning counts up to the full-size settings.
    #[arg(long)]
    paper_scale: bool,
    /// Method to run; repeat for several. Replaces the config's list.
    #[arg(long = "method", value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    n_burn: Option<usize>,
    /// Step size for methods without a per-method override.
    #[arg(long)]
    eps: Option<f64>,
    /// Leapfrog steps per proposal.
    #[arg(long)]
    m: Option<usize>,
    /// MovieLens `u.data` file for the factorization experiment.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
        format!("unknown method {s:?}; expected one of {}", names.join(", "))
    })
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            paper_scale: self.paper_scale,
            methods: self.methods.clone(),
            n_samples: self.n_samples,
            n_burn: self.n_burn,
            eps: self.eps,
            m: self.m,
            dataset: self.dataset.clone(),
        }
    }
}

fn load_config(path: &Path, overrides: &OverrideArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(&overrides.to_overrides())?;
    Ok(cfg)
}

/// Expands run directories to their `chains/*.chain` files, sorted.
fn chain_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let dir = p.join("chains");
            let entries = std::fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "chain"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(CliError::Contract("no chain files found".into()));
    }
    Ok(out)
}

fn print(text: &str) {
    print!("{text}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample {
            config,
            overrides,
            json,
        } => {
            let cfg = load_config(&config, &overrides)?;
            let out = run_experiment(&cfg)?;
            print(&if json {
                out.summary.to_json()
            } else {
                out.summary.to_text(false)
            });
            eprintln!("artifacts written to {}", out.dir.display());
        }
        Command::Diagnose {
            config,
            overrides,
            chains,
            json,
        } => {
            let summary = if let Some(path) = config {
                let mut cfg = load_config(&path, &overrides)?;
                cfg.experiment = Experiment::IntegratorAudit;
                let audited: Vec<Method> = cfg
                    .methods()
                    .into_iter()
                    .filter(|m| matches!(m, Method::Ohmc | Method::Ghmc))
                    .collect();
                cfg.method = Methods::Many(if audited.is_empty() {
                    vec![Method::Ghmc, Method::Ohmc]
                } else {
                    audited
                });
                cfg.validate()?;
                let out = run_experiment(&cfg)?;
                eprintln!("artifacts written to {}", out.dir.display());
                out.summary
            } else {
                if chains.is_empty() {
                    return Err(CliError::Contract(
                        "diagnose needs --config or at least one chain file".into(),
                    )
                    .into());
                }
                let loaded = chains
                    .iter()
                    .map(|p| import_chain(p))
                    .collect::<Result<Vec<_>, _>>()?;
                summarize_chains(&loaded)?
            };
            print(&if json {
                summary.to_json()
            } else {
                summary.to_text(false)
            });
        }
        Command::Summarize {
            paths,
            json,
            mask_timing,
            out,
        } => {
            let files = chain_files(&paths)?;
            let loaded = files
                .iter()
                .map(|p| import_chain(p))
                .collect::<Result<Vec<_>, _>>()?;
            let summary = summarize_chains(&loaded)?;
            let text = if json {
                summary.to_json()
            } else {
                summary.to_text(mask_timing)
            };
            if let Some(path) = out {
                std::fs::write(&path, &text)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            print(&text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let report = match err.downcast_ref::<CliError>() {
                Some(e) => e.report(),
                None => ErrorReport {
                    code: "internal",
                    exit_code: 1,
                    message: format!("{err:#}"),
                },
            };
            eprintln!(
                "{}",
                serde_json::to_string(&report).expect("report serializes")
            );
            ExitCode::from(report.exit_code.clamp(1, 255) as u8)
        }
    }
}
