use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cadlag_rough::algebra::hom_dist;
use cadlag_rough::cadlag::{CadlagPath, PathFunction};
use cadlag_rough::harness::{self, ExperimentName, ExperimentSpec, FieldsConfig};
use cadlag_rough::io::{read_path_csv, read_rough_csv, write_path_csv, write_rough_csv, RoughPathMeta};
use cadlag_rough::lift::{marcus_lift, RoughPath2};
use cadlag_rough::metrics::{
    alpha_estimate, osc_count_bound, pvar, rho_pvar, sigma_estimate, AlphaOptions, MetricReport, Norm, SigmaOptions,
};
use cadlag_rough::rde::{solve_canonical_rde, solve_marcus_sde, FieldSpec, SolverOptions};
use cadlag_rough::stochastic::{simulate, JumpLaw, ModelKind, SemimartingaleModel, StepLaw};
use clap::{Parser, Subcommand, ValueEnum};

/// Rough paths with jumps: simulation, lifts, RDE solves, metrics and experiments.
#[derive(Parser)]
#[command(name = "cadlag-rough", version)]
struct Cli {
    /// Seed for simulations; overrides the experiment config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for outputs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a semimartingale and write its skeleton as CSV.
    Simulate {
        /// Model config (TOML or JSON).
        #[arg(long, conflicts_with = "preset")]
        model: Option<PathBuf>,
        /// Built-in model.
        #[arg(long, value_enum, default_value = "levy")]
        preset: Preset,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Grid points.
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value = "path.csv")]
        out: PathBuf,
    },
    /// Marcus lift of a level-1 path; writes the running signature and a JSON sidecar.
    Lift {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "lift.csv")]
        out: PathBuf,
    },
    /// Solve an RDE driven by a path (level-1 inputs are Marcus-lifted).
    Solve {
        #[arg(long)]
        driver: PathBuf,
        #[arg(long, default_value = "loglinear")]
        phi: String,
        /// `builtin:<rotation|linear|polynomial>` or a JSON field spec.
        #[arg(long, default_value = "builtin:rotation")]
        fields: String,
        /// Comma-separated initial state.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y0: Vec<f64>,
        /// Use the Marcus solver on the skeleton instead of the canonical solver.
        #[arg(long)]
        marcus: bool,
        #[arg(long, default_value_t = 16)]
        substeps: usize,
        #[arg(long, default_value = "solution.csv")]
        out: PathBuf,
    },
    /// Compute a p-variation functional or a Skorokhod-type distance.
    Metric {
        #[arg(long, value_enum)]
        metric: MetricKind,
        /// Exponent; `inf` for uniform distances, `0` for α₀.
        #[arg(long, default_value = "2.5")]
        p: String,
        #[arg(long, default_value_t = 4)]
        delta_levels: usize,
        #[arg(long, default_value = "linear")]
        phi: String,
        #[arg(long)]
        phi_bar: Option<String>,
        #[arg(long = "in", num_args = 1..=2, required = true)]
        input: Vec<PathBuf>,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment; exit code 0 iff all its rules pass.
    Experiment {
        /// Experiment config (TOML).
        #[arg(long, conflicts_with = "name")]
        config: Option<PathBuf>,
        /// Shipped preset.
        #[arg(long)]
        name: Option<String>,
        /// Override the number of Monte Carlo samples.
        #[arg(long)]
        samples: Option<usize>,
        /// Print the resolved config as TOML and exit.
        #[arg(long)]
        print_config: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Brownian,
    Levy,
    CompoundPoisson,
    RandomWalk,
    NullArray,
    MartingaleClt,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricKind {
    Pvar,
    Rho,
    Sigma,
    Alpha,
    Beta,
    Osc,
}

fn preset_model(p: Preset, d: usize, horizon: f64) -> SemimartingaleModel {
    let eye: Vec<f64> = (0..d * d).map(|k| if k % (d + 1) == 0 { 1.0 } else { 0.0 }).collect();
    let kind = match p {
        Preset::Brownian => ModelKind::BrownianMotion { dim: d, sigma: 1.0 },
        Preset::Levy => ModelKind::LevyFinite {
            drift: vec![0.0; d],
            covariance: eye,
            intensity: 2.0,
            jump: JumpLaw::Normal { mean: vec![0.0; d], std: 0.5 },
            compensated: false,
        },
        Preset::CompoundPoisson => ModelKind::LevyFinite {
            drift: vec![0.0; d],
            covariance: vec![0.0; d * d],
            intensity: 5.0,
            jump: JumpLaw::Normal { mean: vec![0.3; d], std: 0.332 },
            compensated: true,
        },
        Preset::RandomWalk => ModelKind::RandomWalk { dim: d, law: StepLaw::Rademacher, scale: 1.0 },
        Preset::NullArray => ModelKind::NullArray { sigma: 1.0, jump: vec![0.5; d], intensity: 2.0 },
        Preset::MartingaleClt => ModelKind::MartingaleClt { dim: d },
    };
    SemimartingaleModel { horizon, kind }
}

fn load_model(path: &Path) -> Result<SemimartingaleModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let model: SemimartingaleModel = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    model.validate()?;
    Ok(model)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn has_level2(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header = text.lines().next().unwrap_or_default();
    Ok(header.split(',').any(|c| c.trim().starts_with('m')))
}

/// Rough path from a CSV file: level-2 columns are used when present,
/// otherwise the path is Marcus-lifted.
fn read_rough(path: &Path) -> Result<RoughPath2> {
    if has_level2(path)? {
        Ok(read_rough_csv(open(path)?)?)
    } else {
        Ok(marcus_lift(&read_path_csv(open(path)?)?))
    }
}

fn out_path(dir: &Path, file: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(if file.is_absolute() { file.to_path_buf() } else { dir.join(file) })
}

fn parse_norm(p: &str) -> Result<(Norm, Option<f64>)> {
    match p.trim() {
        "inf" | "infinity" | "∞" => Ok((Norm::Sup, None)),
        "0" => Ok((Norm::Zero, None)),
        s => {
            let v: f64 = s.parse().with_context(|| format!("bad --p {s:?}"))?;
            Ok((Norm::PVar(v), Some(v)))
        }
    }
}

fn fields_spec(arg: &str) -> Result<FieldSpec> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        return Ok(FieldsConfig::Builtin(name.into()).spec()?);
    }
    let text = std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn scalar_report(metric: String, value: f64, upper_bound: bool) -> MetricReport {
    MetricReport {
        metric,
        value,
        lambda: 0.0,
        alignment: None,
        deltas: vec![],
        sequence: vec![],
        extrapolated: None,
        monotone: None,
        upper_bound,
    }
}

fn metric(
    kind: MetricKind,
    p: &str,
    levels: usize,
    phi: &str,
    phi_bar: Option<&str>,
    inputs: &[PathBuf],
) -> Result<MetricReport> {
    let (norm, pv) = parse_norm(p)?;
    let need_p = || pv.with_context(|| "this metric needs a finite --p >= 1");
    let second = || inputs.get(1).with_context(|| "this metric needs two --in files");
    Ok(match kind {
        MetricKind::Pvar => {
            let p = need_p()?;
            if has_level2(&inputs[0])? {
                let x = read_rough_csv(open(&inputs[0])?)?;
                scalar_report(format!("pvar[hom,{p}]"), pvar(x.points(), p, hom_dist)?, false)
            } else {
                let x = read_path_csv(open(&inputs[0])?)?;
                scalar_report(format!("pvar[{p}]"), cadlag_rough::metrics::pvar_path(&x, p)?, false)
            }
        }
        MetricKind::Osc => {
            let p = need_p()?;
            scalar_report(format!("osc_bound[{p}]"), osc_count_bound(&read_rough(&inputs[0])?, p)?, true)
        }
        MetricKind::Rho => {
            let p = need_p()?;
            let (x, y) = (read_rough(&inputs[0])?, read_rough(second()?)?);
            scalar_report(format!("rho[{p}]"), rho_pvar(&x, &y, p)?, false)
        }
        MetricKind::Sigma => {
            let (x, y) = (read_path_csv(open(&inputs[0])?)?, read_path_csv(open(second()?)?)?);
            sigma_estimate(&x, &y, norm, &SigmaOptions::default())?
        }
        MetricKind::Alpha | MetricKind::Beta => {
            let norm = match kind {
                MetricKind::Beta => Norm::HomPVar(need_p()?),
                _ => norm,
            };
            let (x, y) = (read_rough(&inputs[0])?, read_rough(second()?)?);
            let d = x.dim();
            let phi = PathFunction::from_name(phi, d)?;
            let phi_bar = match phi_bar {
                Some(s) => PathFunction::from_name(s, d)?,
                None => phi.clone(),
            };
            let opts = AlphaOptions { levels, ..AlphaOptions::default() };
            alpha_estimate(x.path(), &phi, y.path(), &phi_bar, norm, &opts)?
        }
    })
}

fn experiment_spec(config: Option<&Path>, name: Option<&str>) -> Result<ExperimentSpec> {
    match (config, name) {
        (Some(path), _) => Ok(ExperimentSpec::load(path)?),
        (None, Some(n)) => {
            let name = ExperimentName::parse(n).with_context(|| {
                let all: Vec<&str> = ExperimentName::ALL.iter().map(|e| e.as_str()).collect();
                format!("unknown experiment {n:?}; expected one of {}", all.join(", "))
            })?;
            Ok(ExperimentSpec::preset(name))
        }
        (None, None) => bail!("pass --config <file.toml> or --name <experiment>"),
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let dir = cli.out_dir.as_path();
    match cli.command {
        Command::Simulate { model, preset, dim, horizon, n, out } => {
            let model = match model {
                Some(p) => load_model(&p)?,
                None => preset_model(preset, dim, horizon),
            };
            let sample = simulate(&model, n, cli.seed.unwrap_or(0))?;
            let path = out_path(dir, &out)?;
            write_path_csv(File::create(&path)?, &sample.path)?;
            println!("{} samples ({} jumps) -> {}", sample.path.len(), sample.path.jump_indices().len(), path.display());
        }
        Command::Lift { input, out } => {
            let x = marcus_lift(&read_path_csv(open(&input)?)?);
            let path = out_path(dir, &out)?;
            write_rough_csv(File::create(&path)?, &x)?;
            write_json(&path.with_extension("json"), &RoughPathMeta::of(&x))?;
            println!("lift of {} samples -> {}", x.len(), path.display());
        }
        Command::Solve { driver, phi, fields, y0, marcus, substeps, out } => {
            let fields = fields_spec(&fields)?.build()?;
            let y0 = if y0.is_empty() {
                let mut y = vec![0.0; fields.state_dim()];
                y[0] = 1.0;
                y
            } else {
                y0
            };
            let opts = SolverOptions { substeps, ..SolverOptions::default() };
            let sol = if marcus {
                solve_marcus_sde(&read_path_csv(open(&driver)?)?, fields.as_ref(), &y0, &opts)?
            } else {
                let x = read_rough(&driver)?;
                let phi = PathFunction::from_name(&phi, x.dim())?;
                solve_canonical_rde(&x, &phi, fields.as_ref(), &y0, &opts)?
            };
            let path = out_path(dir, &out)?;
            let traj: CadlagPath<Vec<f64>> = sol.to_path();
            write_path_csv(File::create(&path)?, &traj)?;
            println!("final state {:?} -> {}", sol.final_state(), path.display());
        }
        Command::Metric { metric: kind, p, delta_levels, phi, phi_bar, input, out } => {
            let report = metric(kind, &p, delta_levels, &phi, phi_bar.as_deref(), &input)?;
            let path = out_path(dir, &out)?;
            write_json(&path, &report)?;
            println!("{} = {:.10e} -> {}", report.metric, report.value, path.display());
        }
        Command::Experiment { config, name, samples, print_config } => {
            let mut spec = experiment_spec(config.as_deref(), name.as_deref())?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            if let Some(s) = samples {
                spec.samples = s;
            }
            spec.validate()?;
            if print_config {
                print!("{}", spec.to_toml()?);
                return Ok(true);
            }
            let outcome = harness::run(&spec)?;
            let (rp, sp) = outcome.write(dir)?;
            for r in &outcome.report.rules {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.rule, r.detail);
            }
            println!(
                "{} in {:.1}s -> {}, {}",
                spec.name.as_str(),
                outcome.report.runtime_secs,
                rp.display(),
                sp.display()
            );
            return Ok(outcome.report.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
