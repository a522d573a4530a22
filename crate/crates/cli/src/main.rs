//! Command-line surface over the decomposition library.
//!
//! Every subcommand loads a model file, runs one capability, and emits a
//! single JSON result envelope to stdout (or `--out`). Identical
//! invocations produce identical bytes: results carry no timestamps and
//! all randomness flows from `--seed` flags recorded in provenance.
//! Errors go to stderr as one-line JSON objects; exit 1 for anything
//! wrong with the request or data, exit 2 for internal invariant
//! violations.

mod inputs;
mod verify;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use relunwrap::io::{self, LoadedModel, Provenance, ResultFile, ResultKind};
use relunwrap::regions::{enumerate_regions, region_halfspaces, BoundingBox, Strategy};
use relunwrap::surrogate::{build_mrt, export_theory};
use relunwrap::unwrap::unwrap_feedforward;
use relunwrap::{shap, Error, Result};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "relunwrap",
    version,
    about = "Exact views of ReLU networks: local linear models, activation regions, \
             regression trees, logic exports, and Shapley attributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Local linear model valid on the input's activation region
    Unwrap {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Input as inline JSON or @file; nested per model family
        #[arg(long, value_name = "JSON")]
        input: String,
        /// Also evaluate the model at the input
        #[arg(long)]
        eval: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Half-space description of the input's activation region
    Region {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "JSON")]
        input: String,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Regression-tree view: statistics, optionally the full tree
    Tree {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Serialize every split and leaf (needs 2^neurons <= max-leaves)
        #[arg(long)]
        materialize: bool,
        #[arg(long, value_name = "K", default_value_t = 4096)]
        max_leaves: u64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Logic view of the regions visited by a set of inputs
    Theory {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// JSON array of inputs, inline or @file
        #[arg(long, value_name = "JSON")]
        inputs: String,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Shapley attributions of the output against a baseline
    Shap {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "JSON")]
        input: String,
        #[arg(long, value_name = "JSON")]
        baseline: String,
        #[arg(long, value_enum)]
        mode: ShapMode,
        /// Estimate global values from this many sampled permutations
        #[arg(long, value_name = "K")]
        sample: Option<usize>,
        #[arg(long, value_name = "S")]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Census of activation regions inside a box
    Enumerate {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Box bounds LO HI, applied to every coordinate
        #[arg(long = "box", num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
        bounds: Vec<f64>,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Points to draw (sample strategy)
        #[arg(long, value_name = "N")]
        count: Option<usize>,
        #[arg(long, value_name = "S")]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run the self-check property suite against a model
    Verify {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "N")]
        samples: usize,
        #[arg(long, value_name = "S", default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "T", default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapMode {
    Local,
    Global,
    Bruteforce,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Sample,
    Exhaustive,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(
                e.kind(),
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion
            ) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            report_error("invalid_argument", &e.render().to_string());
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::from(if e.is_internal() { 2 } else { 1 })
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let obj = json!({"error": {"kind": kind, "message": message}});
    eprintln!("{obj}");
}

fn emit(file: &ResultFile, out: Option<&Path>) -> Result<()> {
    let text = file.to_json_string();
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?,
        None => {
            use std::io::Write;
            // A closed pipe (e.g. `| head`) is not an error.
            if let Err(e) = std::io::stdout().lock().write_all(text.as_bytes()) {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(Error::Io(e));
                }
            }
        }
    }
    Ok(())
}

fn provenance(model: &LoadedModel) -> Provenance {
    Provenance {
        model_sha256: model.sha256.clone(),
        tool_version: TOOL_VERSION.to_string(),
        input: None,
        seed: None,
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Unwrap {
            model,
            input,
            eval,
            out,
        } => {
            let loaded = io::load_model(&model)?;
            let raw = inputs::parse_value_arg(&input, "--input")?;
            let x = inputs::flatten_input(&loaded.network, &raw, "--input")?;
            let ffn = loaded.network.vectorized()?;
            let pattern = ffn.pattern_of(&x)?;
            let linear = unwrap_feedforward(&ffn, &pattern)?;
            let mut payload = io::linear_model_payload(&linear);
            if eval {
                payload["eval"] = Value::Array(
                    linear
                        .eval(&x)?
                        .into_iter()
                        .map(|v| json!(v))
                        .collect(),
                );
            }
            let file = ResultFile {
                kind: ResultKind::LinearModel,
                payload,
                provenance: Provenance {
                    input: Some(raw),
                    ..provenance(&loaded)
                },
            };
            emit(&file, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Region { model, input, out } => {
            let loaded = io::load_model(&model)?;
            let raw = inputs::parse_value_arg(&input, "--input")?;
            let x = inputs::flatten_input(&loaded.network, &raw, "--input")?;
            let ffn = loaded.network.vectorized()?;
            let region = region_halfspaces(&ffn, &ffn.pattern_of(&x)?)?;
            let file = ResultFile {
                kind: ResultKind::Region,
                payload: io::region_payload(&region),
                provenance: Provenance {
                    input: Some(raw),
                    ..provenance(&loaded)
                },
            };
            emit(&file, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Tree {
            model,
            materialize,
            max_leaves,
            out,
        } => {
            let loaded = io::load_model(&model)?;
            let ffn = loaded.network.vectorized()?;
            let payload = if materialize {
                io::tree_payload(&build_mrt(&ffn, max_leaves)?, true)
            } else {
                io::tree_stats_payload(
                    ffn.input_dim(),
                    ffn.output_dim(),
                    ffn.total_hidden_neurons(),
                )?
            };
            let file = ResultFile {
                kind: ResultKind::Tree,
                payload,
                provenance: provenance(&loaded),
            };
            emit(&file, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Theory { model, inputs, out } => {
            let loaded = io::load_model(&model)?;
            let raw = inputs::parse_value_arg(&inputs, "--inputs")?;
            let points = inputs::flatten_inputs(&loaded.network, &raw, "--inputs")?;
            let ffn = loaded.network.vectorized()?;
            let patterns = points
                .iter()
                .map(|x| ffn.pattern_of(x))
                .collect::<Result<Vec<_>>>()?;
            let theory = export_theory(&ffn, &patterns)?;
            let file = ResultFile {
                kind: ResultKind::Theory,
                payload: io::theory_payload(&theory),
                provenance: Provenance {
                    input: Some(raw),
                    ..provenance(&loaded)
                },
            };
            emit(&file, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Shap {
            model,
            input,
            baseline,
            mode,
            sample,
            seed,
            out,
        } => {
            let loaded = io::load_model(&model)?;
            let raw_input = inputs::parse_value_arg(&input, "--input")?;
            let raw_baseline = inputs::parse_value_arg(&baseline, "--baseline")?;
            let x = inputs::flatten_input(&loaded.network, &raw_input, "--input")?;
            let b = inputs::flatten_input(&loaded.network, &raw_baseline, "--baseline")?;
            let ffn = loaded.network.vectorized()?;
            if sample.is_some() && !matches!(mode, ShapMode::Global) {
                return Err(Error::InvalidArgument {
                    context: "--sample".into(),
                    message: "permutation sampling only applies to --mode global".into(),
                });
            }
            let used_seed = sample.map(|_| seed.unwrap_or(0));
            let attribution = match (mode, sample) {
                (ShapMode::Local, _) => shap::shap_local(&ffn, &x, &b)?,
                (ShapMode::Bruteforce, _) => shap::shap_bruteforce(&ffn, &x, &b)?,
                (ShapMode::Global, None) => shap::shap_global(&ffn, &x, &b)?,
                (ShapMode::Global, Some(k)) => {
                    shap::shap_global_sampled(&ffn, &x, &b, k, used_seed.unwrap())?
                }
            };
            let mut payload = io::attribution_payload(&attribution);
            payload["baseline_raw"] = raw_baseline;
            let file = ResultFile {
                kind: ResultKind::Attribution,
                payload,
                provenance: Provenance {
                    input: Some(raw_input),
                    seed: used_seed,
                    ..provenance(&loaded)
                },
            };
            emit(&file, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Enumerate {
            model,
            bounds,
            strategy,
            count,
            seed,
            out,
        } => {
            let loaded = io::load_model(&model)?;
            let ffn = loaded.network.vectorized()?;
            let domain = BoundingBox::uniform(ffn.input_dim(), bounds[0], bounds[1])?;
            let (strat, used_seed, desc) = match strategy {
                StrategyArg::Sample => {
                    let count = count.unwrap_or(1000);
                    let seed = seed.unwrap_or(0);
                    (
                        Strategy::Sample { count, seed },
                        Some(seed),
                        json!({"sample": {"count": count, "seed": seed}}),
                    )
                }
                StrategyArg::Exhaustive => {
                    if count.is_some() || seed.is_some() {
                        return Err(Error::InvalidArgument {
                            context: "--count/--seed".into(),
                            message: "only the sample strategy draws random points".into(),
                        });
                    }
                    (Strategy::exhaustive(), None, json!({"exhaustive": {}}))
                }
            };
            let census = enumerate_regions(&ffn, &domain, &strat)?;
            let file = ResultFile {
                kind: ResultKind::Region,
                payload: io::census_payload(&census, desc),
                provenance: Provenance {
                    seed: used_seed,
                    ..provenance(&loaded)
                },
            };
            emit(&file, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            model,
            samples,
            seed,
            tol,
            out,
        } => {
            let loaded = io::load_model(&model)?;
            let report = verify::run_verify(&loaded.network, samples, seed, tol)?;
            let file = ResultFile {
                kind: ResultKind::VerifyReport,
                payload: report.payload(),
                provenance: Provenance {
                    seed: Some(seed),
                    ..provenance(&loaded)
                },
            };
            emit(&file, out.as_deref())?;
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                report_error(
                    "verify_failed",
                    &format!("properties failed: {}", report.failures().join(", ")),
                );
                Ok(ExitCode::from(1))
            }
        }
    }
}
