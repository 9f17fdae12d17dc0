//! `nestnorm` — generate clustering instances, run the nested-norm solvers,
//! and render results as SVG scatter plots.

mod parse;
mod report;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use thiserror::Error;

use nestnorm_core::metric::MetricInstance;
use nestnorm_core::norms::{NormError, Objective};
use nestnorm_core::oracle::{exact_nested, OracleBudget, OracleError};
use nestnorm_core::reductions::{dispatch, eval_objective, DispatchResult, ReductionError};
use nestnorm_core::synth::{
    generate, ClusterSpec, FacilityMode, GeneratorSpec, InstanceFile, SynthError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad --{flag}: {why}")]
    BadFlag { flag: &'static str, why: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("instance has no planar embedding, so there is nothing to draw")]
    NotPlanar,
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Parser)]
#[command(name = "nestnorm", version, about = "k-clustering under nested norm objectives")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic planar instance with ground-truth labels
    Generate {
        /// Generator spec (JSON); defaults to the built-in two-Gaussian demo
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Override the spec's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the instance JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance and emit JSON / CSV / SVG artifacts
    Run {
        /// Instance file produced by `generate` (or hand-written)
        instance: PathBuf,
        /// Inner (per-cluster) norm: l1 | linf | topl:L | ord:w,... | sym:w,..|w,..
        #[arg(long)]
        objective: String,
        /// Outer (across-clusters) norm, same grammar
        #[arg(long, default_value = "l1")]
        outer: String,
        /// Accuracy knob of the solver pipelines
        #[arg(long)]
        epsilon: f64,
        /// Maximum number of clusters
        #[arg(long, short)]
        k: usize,
        /// Also compute the exact optimum when the instance is small enough
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        out_json: Option<PathBuf>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_svg: Option<PathBuf>,
    },
    /// Render an instance and an existing result file to SVG
    Plot {
        instance: PathBuf,
        result: PathBuf,
        #[arg(long)]
        out_svg: PathBuf,
    },
}

/// The built-in demo: a tight cluster next to a wide one whose inner tail
/// bleeds toward the tight cluster's territory.
fn demo_spec(seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        seed,
        clusters: vec![
            ClusterSpec {
                center: [0.0, 0.0],
                stddev: 0.45,
                count: 12,
            },
            ClusterSpec {
                center: [10.5, 0.0],
                stddev: 2.8,
                count: 12,
            },
        ],
        facility_mode: FacilityMode::Grid { step: 3.4 },
    }
}

/// Seed of the committed reference instance.
const DEMO_SEED: u64 = 99;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn cmd_generate(
    spec_path: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let mut spec = match spec_path {
        Some(p) => read_json::<GeneratorSpec>(p)?,
        None => demo_spec(DEMO_SEED),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let inst = generate(&spec)?;
    let planar = inst.planar.as_ref().expect("generator emits planar data");
    write_text(out, &serde_json::to_string_pretty(&inst).expect("serializable"))?;
    println!(
        "wrote {} ({} points, {} facilities, seed {})",
        out.display(),
        planar.points.len(),
        planar.facilities.len(),
        spec.seed
    );
    Ok(())
}

/// Radii of the solution sorted descending, zero-padded to `k`.
fn radii_sorted(res: &DispatchResult, k: usize) -> Vec<f64> {
    let mut r: Vec<f64> = res.radii.values().copied().collect();
    r.sort_by(|a, b| b.partial_cmp(a).expect("radii are finite"));
    r.resize(k, 0.0);
    r
}

fn run_oracle(
    metric: &MetricInstance,
    k: usize,
    inner: &Objective,
    outer: &Objective,
) -> Result<Option<f64>, CliError> {
    let budget = OracleBudget::from_env();
    match exact_nested(metric, k, inner, outer, &budget) {
        Ok((_, _, opt)) => Ok(Some(opt)),
        Err(OracleError::TooLarge { what, value, max }) => {
            eprintln!("oracle skipped: {what} = {value} exceeds budget {max}");
            Ok(None)
        }
        Err(OracleError::BudgetExceeded { states, max }) => {
            eprintln!("oracle skipped: needs ~{states} states, budget {max}");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    instance: &Path,
    objective: &str,
    outer: &str,
    epsilon: f64,
    k: usize,
    oracle: bool,
    out_json: Option<&Path>,
    out_csv: Option<&Path>,
    out_svg: Option<&Path>,
) -> Result<(), CliError> {
    let inst_file: InstanceFile = read_json(instance)?;
    let metric = inst_file.to_metric()?;
    let inner_obj = parse::parse_objective(objective)?;
    let outer_obj = parse::parse_objective(outer)?;

    let started = Instant::now();
    let res = dispatch(&metric, k, &inner_obj, &outer_obj, epsilon)?;
    let wall_ms = started.elapsed().as_millis();

    let oracle_cost = if oracle {
        run_oracle(&metric, k, &inner_obj, &outer_obj)?
    } else {
        None
    };
    let ratio = oracle_cost.map(|opt| {
        if opt > 0.0 {
            res.cost / opt
        } else if res.cost <= 1e-12 {
            1.0
        } else {
            f64::INFINITY
        }
    });

    let sorted = radii_sorted(&res, k);
    let ord_value = eval_objective(&outer_obj, &sorted)?;
    let obj_label = parse::objective_label(&inner_obj);
    let outer_label = parse::objective_label(&outer_obj);
    let result = report::ResultFile {
        x: res.facilities.iter().map(|f| f.0).collect(),
        r: res.facilities.iter().map(|f| res.radii[f]).collect(),
        cost: res.cost,
        assignment: res.assignment.iter().map(|f| f.0).collect(),
        meta: report::ResultMeta {
            epsilon,
            guesses_tried: res.guesses_tried,
            lambda_final: res.lambda_final,
            k,
            objective: obj_label.clone(),
            outer: outer_label.clone(),
            claimed_factor: res.claimed_factor.clone(),
            factor_value: res.factor_value,
            route: res.route.clone(),
            radii_sorted: sorted,
            ord_value,
            oracle_cost,
            ratio,
        },
    };

    let json_text = serde_json::to_string_pretty(&result).expect("serializable");
    if let Some(p) = out_json {
        write_text(p, &json_text)?;
    } else {
        println!("{json_text}");
    }
    if let Some(p) = out_csv {
        report::append_csv(
            p,
            &report::CsvRow {
                instance: &instance.display().to_string(),
                objective: &obj_label,
                outer: &outer_label,
                epsilon,
                k,
                cost: res.cost,
                oracle_cost,
                ratio,
                wall_ms,
            },
        )?;
    }
    if let Some(p) = out_svg {
        let planar = inst_file.planar.as_ref().ok_or(CliError::NotPlanar)?;
        let sol = svg::PlotSolution {
            facilities: &result.x,
            radii: &result.r,
            assignment: &result.assignment,
        };
        write_text(
            p,
            &svg::render_svg(&planar.points, &planar.facilities, Some(&sol)),
        )?;
    }
    Ok(())
}

fn cmd_plot(instance: &Path, result: &Path, out_svg: &Path) -> Result<(), CliError> {
    let inst_file: InstanceFile = read_json(instance)?;
    let planar = inst_file.planar.as_ref().ok_or(CliError::NotPlanar)?;
    let result: report::ResultFile = read_json(result)?;
    let sol = svg::PlotSolution {
        facilities: &result.x,
        radii: &result.r,
        assignment: &result.assignment,
    };
    write_text(
        out_svg,
        &svg::render_svg(&planar.points, &planar.facilities, Some(&sol)),
    )
}

fn real_main() -> Result<(), CliError> {
    match Cli::parse().cmd {
        Command::Generate { spec, seed, out } => {
            cmd_generate(spec.as_deref(), seed, &out)
        }
        Command::Run {
            instance,
            objective,
            outer,
            epsilon,
            k,
            oracle,
            out_json,
            out_csv,
            out_svg,
        } => cmd_run(
            &instance,
            &objective,
            &outer,
            epsilon,
            k,
            oracle,
            out_json.as_deref(),
            out_csv.as_deref(),
            out_svg.as_deref(),
        ),
        Command::Plot {
            instance,
            result,
            out_svg,
        } => cmd_plot(&instance, &result, &out_svg),
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
