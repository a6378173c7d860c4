//! Seeded Monte Carlo experiments with machine-readable reports.
//!
//! An [`ExperimentSpec`] is a versioned TOML document. [`run`] executes it
//! and returns a [`Report`] (per-mesh statistics, rule outcomes, config
//! echo and hash) together with the raw per-sample [`SampleTable`].
//! Samples are evaluated in parallel, each on its own RNG stream, and
//! collected in index order, so results do not depend on thread count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::algebra::{hom_dist, norm2, norm2_diff};
use crate::cadlag::{CadlagPath, PathError, PathFunction};
use crate::lift::{marcus_lift, LiftError};
use crate::metrics::{alpha_estimate, pvar, sigma_estimate, AlphaOptions, MetricError, Norm, SigmaOptions};
use crate::rde::{solve_canonical_rde, solve_marcus_sde, FieldSpec, RdeError, SolverOptions, VectorFields};
use crate::stochastic::{
    approximate, bracket, rng_for, simulate_stream, uniform_partition, JumpLaw, ModelError, ModelKind, Scheme,
    SemimartingaleModel,
};

/// Current experiment config version.
pub const SPEC_VERSION: u32 = 1;

/// Stream offset for auxiliary random inputs, kept clear of sample streams.
const AUX_STREAM: u64 = 1 << 40;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rde(#[from] RdeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Lift(#[from] LiftError),
}

type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    WongZakai,
    WongZakaiHoff,
    BdgRatio,
    MarcusConsistency,
    MetricDemo,
    AreaVanish,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::WongZakai,
        ExperimentName::WongZakaiHoff,
        ExperimentName::BdgRatio,
        ExperimentName::MarcusConsistency,
        ExperimentName::MetricDemo,
        ExperimentName::AreaVanish,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::WongZakai => "wong_zakai",
            ExperimentName::WongZakaiHoff => "wong_zakai_hoff",
            ExperimentName::BdgRatio => "bdg_ratio",
            ExperimentName::MarcusConsistency => "marcus_consistency",
            ExperimentName::MetricDemo => "metric_demo",
            ExperimentName::AreaVanish => "area_vanish",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

/// Vector fields by built-in name (`rotation` or `builtin:rotation`) or by
/// full specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldsConfig {
    Builtin(String),
    Spec(FieldSpec),
}

impl FieldsConfig {
    pub fn spec(&self) -> Result<FieldSpec> {
        match self {
            FieldsConfig::Spec(s) => Ok(s.clone()),
            FieldsConfig::Builtin(name) => {
                let name = name.strip_prefix("builtin:").unwrap_or(name);
                FieldSpec::builtin(name).ok_or_else(|| HarnessError::Config(format!("unknown built-in fields {name:?}")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub substeps: usize,
    pub norm_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { substeps: 16, norm_scale: 0.25 }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions { substeps: self.substeps, norm_scale: self.norm_scale, ..SolverOptions::default() }
    }
}

/// Experiment-specific knobs; each experiment reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Path function for the approximations (`linear`, `loglinear`, `hoff`, `hoff(2,1)`).
    pub phi: String,
    /// Reference skeleton has `refine × finest mesh` cells.
    pub refine: usize,
    /// Grid points for single-grid experiments.
    pub grid: usize,
    pub time_scales: Vec<f64>,
    pub vol_scales: Vec<f64>,
    /// Per-model weight of the area sums: `one` or `cos` (`cos X¹` at the cell start).
    pub weights: Vec<String>,
    /// Random step drivers for the polyline-ODE check.
    pub polyline_drivers: usize,
    pub demo_n: Vec<usize>,
    pub delta_levels: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            phi: "linear".into(),
            refine: 4,
            grid: 256,
            time_scales: vec![1.0],
            vol_scales: vec![1.0, 2.0],
            weights: vec![],
            polyline_drivers: 20,
            demo_n: vec![10, 100, 1000],
            delta_levels: 12,
        }
    }
}

/// Thresholds of the pass/fail rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    /// Final median error at most this multiple of the self-convergence floor.
    pub floor_factor: f64,
    /// Standard-error band for "consistent with zero".
    pub se_band: f64,
    /// Standard-error band for scaling invariance.
    pub homogeneity_se: f64,
    /// Maximum ratio spread across models.
    pub band_factor: f64,
    pub gap_tol: f64,
    pub polyline_tol: f64,
    pub sigma_floor: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            floor_factor: 5.0,
            se_band: 3.0,
            homogeneity_se: 2.0,
            band_factor: 3.0,
            gap_tol: 1e-6,
            polyline_tol: 1e-8,
            sigma_floor: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub report: String,
    pub samples: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { report: "report.json".into(), samples: "samples.csv".into() }
    }
}

fn default_p() -> f64 {
    2.5
}

/// Versioned experiment configuration.
///
/// `meshes` lists cell counts of uniform partitions and must be strictly
/// increasing, i.e. mesh widths strictly decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub version: u32,
    pub name: ExperimentName,
    #[serde(default)]
    pub seed: u64,
    pub samples: usize,
    #[serde(default)]
    pub meshes: Vec<usize>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<FieldsConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub rules: RuleConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub models: Vec<SemimartingaleModel>,
}

fn levy(drift: Vec<f64>, covariance: Vec<f64>, intensity: f64, jump: JumpLaw, compensated: bool) -> SemimartingaleModel {
    SemimartingaleModel {
        horizon: 1.0,
        kind: ModelKind::LevyFinite { drift, covariance, intensity, jump, compensated },
    }
}

impl ExperimentSpec {
    /// Shipped configuration of each experiment.
    pub fn preset(name: ExperimentName) -> Self {
        let base = |samples: usize| ExperimentSpec {
            version: SPEC_VERSION,
            name,
            seed: 20_240_917,
            samples,
            meshes: vec![],
            p: 2.5,
            y0: vec![],
            fields: None,
            solver: SolverConfig::default(),
            params: Params::default(),
            rules: RuleConfig::default(),
            output: OutputConfig::default(),
            models: vec![],
        };
        let normal = |mean: [f64; 2], std: f64| JumpLaw::Normal { mean: mean.to_vec(), std };
        let cp_bm = levy(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0], 2.0, normal([0.0, 0.0], 0.5), false);
        match name {
            ExperimentName::WongZakai => ExperimentSpec {
                meshes: (5..=10).map(|k| 1 << k).collect(),
                y0: vec![1.0, 0.5],
                fields: Some(FieldsConfig::Builtin("rotation".into())),
                models: vec![cp_bm],
                ..base(500)
            },
            ExperimentName::WongZakaiHoff => ExperimentSpec {
                meshes: (6..=9).map(|k| 1 << k).collect(),
                y0: vec![1.0, 0.0],
                fields: Some(FieldsConfig::Builtin("linear".into())),
                params: Params { phi: "hoff".into(), ..Params::default() },
                models: vec![levy(vec![0.0, 0.0], vec![1.0, 0.8, 0.8, 1.0], 1.0, normal([0.0, 0.0], 0.3), false)],
                ..base(500)
            },
            ExperimentName::BdgRatio => ExperimentSpec {
                params: Params {
                    grid: 256,
                    time_scales: vec![0.5, 1.0, 2.0],
                    vol_scales: vec![1.0, 2.0, 4.0],
                    ..Params::default()
                },
                models: vec![
                    SemimartingaleModel::brownian(2, 1.0, 1.0),
                    levy(vec![0.0, 0.0], vec![0.0; 4], 5.0, normal([0.3, 0.3], 0.332), true),
                    levy(vec![0.0, 0.0], vec![0.5, 0.0, 0.0, 0.5], 2.5, normal([0.3, 0.3], 0.332), true),
                ],
                ..base(2000)
            },
            ExperimentName::MarcusConsistency => ExperimentSpec {
                y0: vec![1.0, 0.5],
                fields: Some(FieldsConfig::Builtin("rotation".into())),
                params: Params { grid: 512, phi: "loglinear".into(), ..Params::default() },
                models: vec![cp_bm],
                ..base(50)
            },
            ExperimentName::MetricDemo => base(1),
            ExperimentName::AreaVanish => ExperimentSpec {
                meshes: (4..=9).map(|k| 1 << k).collect(),
                params: Params { weights: vec!["one".into(), "cos".into()], ..Params::default() },
                models: vec![
                    SemimartingaleModel::brownian(2, 1.0, 1.0),
                    levy(vec![0.0, 0.0], vec![0.0; 4], 5.0, normal([0.3, 0.3], 0.332), true),
                ],
                ..base(500)
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.version != SPEC_VERSION {
            return bad(format!("unsupported version {} (expected {SPEC_VERSION})", self.version));
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.meshes.contains(&0) || self.meshes.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("meshes must be positive and strictly increasing in cell count, got {:?}", self.meshes));
        }
        if !(self.p >= 1.0) {
            return bad(format!("p = {}", self.p));
        }
        for m in &self.models {
            m.validate()?;
        }
        let needs = |what: &str, ok: bool| if ok { Ok(()) } else { bad(format!("{} needs {what}", self.name.as_str())) };
        match self.name {
            ExperimentName::WongZakai | ExperimentName::WongZakaiHoff => {
                needs("a mesh ladder", !self.meshes.is_empty())?;
                needs("a model", !self.models.is_empty())?;
                needs("refine >= 2", self.params.refine >= 2)?;
            }
            ExperimentName::AreaVanish => {
                needs("a mesh ladder", !self.meshes.is_empty())?;
                needs("a model", !self.models.is_empty())?;
                needs("refine >= 1", self.params.refine >= 1)?;
            }
            ExperimentName::BdgRatio => {
                needs("a model", !self.models.is_empty())?;
                needs("scales", !self.params.time_scales.is_empty() && !self.params.vol_scales.is_empty())?;
                needs("positive scales", self.params.time_scales.iter().chain(&self.params.vol_scales).all(|s| *s > 0.0))?;
                needs("grid >= 2", self.params.grid >= 2)?;
            }
            ExperimentName::MarcusConsistency => {
                needs("a model", !self.models.is_empty())?;
                needs("grid >= 2", self.params.grid >= 2)?;
            }
            ExperimentName::MetricDemo => {
                needs("demo sizes >= 2", self.params.demo_n.iter().all(|&n| n >= 2))?;
                needs("delta levels", self.params.delta_levels >= 1)?;
            }
        }
        Ok(())
    }

    fn fields(&self, default: &str) -> Result<Box<dyn VectorFields>> {
        let cfg = self.fields.clone().unwrap_or(FieldsConfig::Builtin(default.into()));
        Ok(cfg.spec()?.build()?)
    }

    fn initial_state(&self, fields: &dyn VectorFields) -> Result<Vec<f64>> {
        let e = fields.state_dim();
        if self.y0.is_empty() {
            let mut y = vec![0.0; e];
            y[0] = 1.0;
            return Ok(y);
        }
        if self.y0.len() != e {
            return Err(HarnessError::Config(format!("y0 has {} entries, fields need {e}", self.y0.len())));
        }
        Ok(self.y0.clone())
    }
}

/// Order statistics and Monte Carlo standard error of a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    pub se: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { n, median: f64::NAN, mean: f64::NAN, se: f64::NAN, min: f64::NAN, max: f64::NAN };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { n, median, mean, se: (var / n as f64).sqrt(), min: v[0], max: v[n - 1] }
    }
}

/// Statistics of one group (typically one mesh) of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub group: String,
    pub mesh: Option<usize>,
    #[serde(flatten)]
    pub stats: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleOutcome {
    pub rule: String,
    pub passed: bool,
    pub detail: String,
}

/// JSON summary of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub samples: usize,
    pub stats: Vec<StatsRow>,
    pub values: BTreeMap<String, f64>,
    pub rules: Vec<RuleOutcome>,
    pub passed: bool,
    pub runtime_secs: f64,
    pub config: ExperimentSpec,
}

impl Report {
    fn new(spec: &ExperimentSpec) -> Self {
        Self {
            experiment: spec.name.as_str().into(),
            version: spec.version,
            config_hash: spec.config_hash(),
            seed: spec.seed,
            samples: spec.samples,
            stats: vec![],
            values: BTreeMap::new(),
            rules: vec![],
            passed: false,
            runtime_secs: 0.0,
            config: spec.clone(),
        }
    }

    fn stat(&mut self, group: impl Into<String>, mesh: Option<usize>, values: &[f64]) -> Summary {
        let stats = Summary::of(values);
        self.stats.push(StatsRow { group: group.into(), mesh, stats: stats.clone() });
        stats
    }

    fn rule(&mut self, rule: impl Into<String>, passed: bool, detail: String) {
        self.rules.push(RuleOutcome { rule: rule.into(), passed, detail });
    }

    pub fn rule_passed(&self, rule: &str) -> Option<bool> {
        self.rules.iter().find(|r| r.rule == rule).map(|r| r.passed)
    }

    /// Rows of `stats` in `group`, in insertion order.
    pub fn group(&self, group: &str) -> Vec<&StatsRow> {
        self.stats.iter().filter(|r| r.group == group).collect()
    }
}

/// Raw per-sample values, written as `samples.csv`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SampleTable {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Report plus raw samples.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub samples: SampleTable,
}

impl Outcome {
    /// Writes the report and samples under `dir`; returns both paths.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let out = &self.report.config.output;
        let (rp, sp) = (dir.join(&out.report), dir.join(&out.samples));
        std::fs::write(&rp, serde_json::to_string_pretty(&self.report)?)?;
        self.samples.write_csv(std::fs::File::create(&sp)?)?;
        Ok((rp, sp))
    }
}

/// Runs an experiment on the current rayon pool.
pub fn run(spec: &ExperimentSpec) -> Result<Outcome> {
    spec.validate()?;
    let start = Instant::now();
    let mut out = match spec.name {
        ExperimentName::WongZakai => run_wong_zakai(spec)?,
        ExperimentName::WongZakaiHoff => run_wong_zakai_hoff(spec)?,
        ExperimentName::BdgRatio => run_bdg_ratio(spec)?,
        ExperimentName::MarcusConsistency => run_marcus_consistency(spec)?,
        ExperimentName::MetricDemo => run_metric_demo(spec)?,
        ExperimentName::AreaVanish => run_area_vanish(spec)?,
    };
    out.report.passed = out.report.rules.iter().all(|r| r.passed);
    out.report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(out)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Endpoint of the ODE along the polyline `x^{D,φ}` built on `n` uniform cells.
fn approx_endpoint(
    x: &CadlagPath<Vec<f64>>,
    phi: &PathFunction,
    n: usize,
    fields: &dyn VectorFields,
    y0: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let d = uniform_partition(x, n);
    let a = approximate(x, &Scheme::PhiInterp(phi.clone()), &d)?;
    Ok(solve_marcus_sde(&a, fields, y0, opts)?.final_state().to_vec())
}

/// Wong–Zakai with a path function whose area map vanishes: endpoint error
/// of the ODE along `X^{D,φ}` against the Marcus solution on a reference
/// skeleton `refine` times finer than the finest mesh.
pub fn run_wong_zakai(spec: &ExperimentSpec) -> Result<Outcome> {
    let model = &spec.models[0];
    let fields = spec.fields("rotation")?;
    let y0 = spec.initial_state(fields.as_ref())?;
    let phi = PathFunction::from_name(&spec.params.phi, model.dim())?;
    let opts = spec.solver.options();
    let finest = *spec.meshes.last().expect("validated");
    let fine = finest * spec.params.refine;
    let per: Vec<(Vec<f64>, f64)> = (0..spec.samples as u64)
        .into_par_iter()
        .map(|s| {
            let x = simulate_stream(model, fine + 1, spec.seed, s)?.path;
            let reference = solve_marcus_sde(&x, fields.as_ref(), &y0, &opts)?.final_state().to_vec();
            let mut errors = Vec::with_capacity(spec.meshes.len());
            let mut at_finest = vec![];
            for &n in &spec.meshes {
                let y = approx_endpoint(&x, &phi, n, fields.as_ref(), &y0, &opts)?;
                errors.push(norm2_diff(&y, &reference));
                at_finest = y;
            }
            let doubled = approx_endpoint(&x, &phi, 2 * finest, fields.as_ref(), &y0, &opts)?;
            Ok((errors, norm2_diff(&at_finest, &doubled)))
        })
        .collect::<Result<_>>()?;

    let mut report = Report::new(spec);
    let mut table = SampleTable::new(&["sample", "mesh", "error"]);
    let mut medians = vec![];
    for (k, &n) in spec.meshes.iter().enumerate() {
        let errs: Vec<f64> = per.iter().map(|(e, _)| e[k]).collect();
        for (s, e) in errs.iter().enumerate() {
            table.rows.push(vec![s as f64, n as f64, *e]);
        }
        medians.push(report.stat("error", Some(n), &errs).median);
    }
    let floors: Vec<f64> = per.iter().map(|(_, f)| *f).collect();
    for (s, f) in floors.iter().enumerate() {
        table.rows.push(vec![s as f64, (2 * finest) as f64, *f]);
    }
    let floor = report.stat("self_convergence_floor", Some(finest), &floors).median;
    let last = *medians.last().expect("non-empty ladder");
    report.values.insert("floor_median".into(), floor);
    report.values.insert("final_median".into(), last);
    report.rule("median_strictly_decreasing", strictly_decreasing(&medians), format!("medians {}", fmt_list(&medians)));
    let bound = spec.rules.floor_factor * floor;
    report.rule(
        "final_median_within_floor",
        last <= bound,
        format!("final median {last:.4e} vs {} x floor {floor:.4e}", spec.rules.floor_factor),
    );
    Ok(Outcome { report, samples: table })
}

/// Area correction `B_t = ½[X^i, X^j]_t` (packed `i < j`) on the grid of `x`.
pub fn bracket_area(x: &CadlagPath<Vec<f64>>) -> CadlagPath<Vec<f64>> {
    let d = x.dim();
    let br = bracket(x);
    br.map(|m| {
        let mut a = Vec::with_capacity(d * (d - 1) / 2);
        for i in 0..d {
            for j in i + 1..d {
                a.push(0.5 * m[i * d + j]);
            }
        }
        a
    })
}

/// Wong–Zakai with the Hoff path function: ODE endpoints along `X^{D,Hoff}`
/// against the RDE driven by the Marcus lift corrected with
/// `B = ½[X¹, X²]`, and against the uncorrected Marcus solution.
pub fn run_wong_zakai_hoff(spec: &ExperimentSpec) -> Result<Outcome> {
    let model = &spec.models[0];
    let d = model.dim();
    let fields = spec.fields("linear")?;
    let y0 = spec.initial_state(fields.as_ref())?;
    let e = y0.len();
    let phi = PathFunction::from_name(&spec.params.phi, d)?;
    let opts = spec.solver.options();
    let fine = spec.meshes.last().expect("validated") * spec.params.refine;
    let per: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..spec.samples as u64)
        .into_par_iter()
        .map(|s| {
            let x = simulate_stream(model, fine + 1, spec.seed, s)?.path;
            let corrected = marcus_lift(&x).with_area_correction(&bracket_area(&x))?;
            let y_corr = solve_canonical_rde(&corrected, &phi, fields.as_ref(), &y0, &opts)?.final_state().to_vec();
            let y_marcus = solve_marcus_sde(&x, fields.as_ref(), &y0, &opts)?.final_state().to_vec();
            spec.meshes
                .iter()
                .map(|&n| {
                    let y = approx_endpoint(&x, &phi, n, fields.as_ref(), &y0, &opts)?;
                    let diff = |r: &[f64]| y.iter().zip(r).map(|(a, b)| a - b).collect::<Vec<f64>>();
                    Ok((diff(&y_corr), diff(&y_marcus)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut report = Report::new(spec);
    let mut header = vec!["sample".to_string(), "mesh".to_string()];
    header.extend((1..=e).map(|k| format!("gap_corrected_{k}")));
    header.extend((1..=e).map(|k| format!("gap_marcus_{k}")));
    let mut table = SampleTable { header, rows: vec![] };
    let mut medians = vec![];
    for (k, &n) in spec.meshes.iter().enumerate() {
        let norms: Vec<f64> = per.iter().map(|v| norm2(&v[k].0)).collect();
        medians.push(report.stat("gap_corrected_norm", Some(n), &norms).median);
        let mnorms: Vec<f64> = per.iter().map(|v| norm2(&v[k].1)).collect();
        report.stat("gap_marcus_norm", Some(n), &mnorms);
        for (s, v) in per.iter().enumerate() {
            let mut row = vec![s as f64, n as f64];
            row.extend(&v[k].0);
            row.extend(&v[k].1);
            table.rows.push(row);
        }
    }
    let last = spec.meshes.len() - 1;
    let finest = spec.meshes[last];
    let band = spec.rules.se_band;
    let mut consistent = true;
    let mut separated = false;
    let mut detail_c = vec![];
    let mut detail_m = vec![];
    for k in 0..e {
        let c: Vec<f64> = per.iter().map(|v| v[last].0[k]).collect();
        let m: Vec<f64> = per.iter().map(|v| v[last].1[k]).collect();
        let sc = report.stat(format!("gap_corrected_{}", k + 1), Some(finest), &c);
        let sm = report.stat(format!("gap_marcus_{}", k + 1), Some(finest), &m);
        consistent &= sc.mean.abs() <= band * sc.se;
        separated |= sm.mean.abs() > band * sm.se;
        detail_c.push(format!("{:.3e} ± {:.3e}", sc.mean, sc.se));
        detail_m.push(format!("{:.3e} ± {:.3e}", sm.mean, sm.se));
        report.values.insert(format!("mean_gap_corrected_{}", k + 1), sc.mean);
        report.values.insert(format!("mean_gap_marcus_{}", k + 1), sm.mean);
    }
    report.rule(
        "corrected_gap_consistent_with_zero",
        consistent,
        format!("mean ± se per component {:?}, band {band} se", detail_c),
    );
    report.rule(
        "marcus_gap_nonzero",
        separated,
        format!("mean ± se per component {:?}, band {band} se", detail_m),
    );
    report.values.insert("corrected_median_trend_decreasing".into(), f64::from(u8::from(strictly_decreasing(&medians))));
    Ok(Outcome { report, samples: table })
}

/// Ratio of means with a delta-method standard error.
fn ratio_of_means(num: &[f64], den: &[f64]) -> (f64, f64) {
    let n = num.len() as f64;
    let (mn, md) = (num.iter().sum::<f64>() / n, den.iter().sum::<f64>() / n);
    if md == 0.0 {
        return (0.0, 0.0);
    }
    let r = mn / md;
    if num.len() < 2 {
        return (r, 0.0);
    }
    let var = num.iter().zip(den).map(|(a, b)| (a - r * b) * (a - r * b)).sum::<f64>() / (n - 1.0);
    (r, (var / n).sqrt() / md)
}

/// BDG-type ratio `E‖𝐗‖_{p-var} / E[X]_T^{1/2}` across models, horizons
/// and volatility scalings. Scaled paths reuse the unscaled samples.
pub fn run_bdg_ratio(spec: &ExperimentSpec) -> Result<Outcome> {
    let prm = &spec.params;
    let mut report = Report::new(spec);
    let mut table = SampleTable::new(&["model", "horizon", "scale", "sample", "pvar", "sqrt_bracket"]);
    // (model, horizon index, scale index) -> (ratio, se)
    let mut ratios = BTreeMap::new();
    for (mi, base) in spec.models.iter().enumerate() {
        for (ti, &t) in prm.time_scales.iter().enumerate() {
            let model = SemimartingaleModel { horizon: base.horizon * t, ..base.clone() };
            let per: Vec<Vec<(f64, f64)>> = (0..spec.samples as u64)
                .into_par_iter()
                .map(|s| {
                    let x = simulate_stream(&model, prm.grid, spec.seed, s)?.path;
                    prm.vol_scales
                        .iter()
                        .map(|&v| {
                            let xs = x.scale(v);
                            let lift = marcus_lift(&xs);
                            let num = pvar(lift.points(), spec.p, hom_dist)?;
                            let d = xs.dim();
                            let br = bracket(&xs);
                            let den = (0..d).map(|i| br.last()[i * d + i]).sum::<f64>().sqrt();
                            Ok((num, den))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            for (vi, &v) in prm.vol_scales.iter().enumerate() {
                let num: Vec<f64> = per.iter().map(|r| r[vi].0).collect();
                let den: Vec<f64> = per.iter().map(|r| r[vi].1).collect();
                for (s, (a, b)) in num.iter().zip(&den).enumerate() {
                    table.rows.push(vec![mi as f64, model.horizon, v, s as f64, *a, *b]);
                }
                let label = format!("model{mi}_{}_T{}_x{}", model.name(), model.horizon, v);
                report.stat(format!("{label}_pvar"), None, &num);
                report.stat(format!("{label}_sqrt_bracket"), None, &den);
                let (r, se) = ratio_of_means(&num, &den);
                report.values.insert(format!("{label}_ratio"), r);
                report.values.insert(format!("{label}_ratio_se"), se);
                ratios.insert((mi, ti, vi), (r, se));
            }
        }
    }
    let band = spec.rules.homogeneity_se;
    let mut worst: f64 = 0.0;
    let mut homogeneous = true;
    for (&(mi, ti, vi), &(r, se)) in &ratios {
        if vi == 0 {
            continue;
        }
        let (r0, se0) = ratios[&(mi, ti, 0)];
        let tol = band * (se * se + se0 * se0).sqrt();
        homogeneous &= (r - r0).abs() <= tol;
        if tol > 0.0 {
            worst = worst.max((r - r0).abs() / tol * band);
        }
    }
    report.rule(
        "scaling_invariance",
        homogeneous,
        format!("largest |ratio change| = {worst:.3e} standard errors (band {band})"),
    );
    let tref = prm.time_scales.iter().position(|&t| t == 1.0).unwrap_or(0);
    let at_ref: Vec<f64> = (0..spec.models.len()).map(|mi| ratios[&(mi, tref, 0)].0).collect();
    let (lo, hi) = at_ref.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    report.values.insert("model_spread".into(), spread);
    report.rule(
        "model_band",
        spread <= spec.rules.band_factor,
        format!("ratios {} spread {spread:.3} (band {})", fmt_list(&at_ref), spec.rules.band_factor),
    );
    Ok(Outcome { report, samples: table })
}

/// States after each segment of the ODE `ẏ = Σ Δxⁱ Vᵢ(y)` along the
/// polyline through `vertices`, integrated with `steps` RK4 steps per segment.
pub fn polyline_ode(fields: &dyn VectorFields, vertices: &[Vec<f64>], y0: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let e = fields.state_dim();
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity(vertices.len().saturating_sub(1));
    let rhs = |y: &[f64], dx: &[f64]| {
        let v = fields.eval(y);
        (0..e).map(|k| dx.iter().enumerate().map(|(i, a)| a * v[i * e + k]).sum()).collect::<Vec<f64>>()
    };
    let h = 1.0 / steps as f64;
    for w in vertices.windows(2) {
        let dx: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
        for _ in 0..steps {
            let k1 = rhs(&y, &dx);
            let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
            let k2 = rhs(&y2, &dx);
            let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
            let k3 = rhs(&y3, &dx);
            let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
            let k4 = rhs(&y4, &dx);
            for i in 0..e {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        out.push(y.clone());
    }
    out
}

/// Random piecewise-constant driver: 3 to 12 jumps at uniform times with
/// `N(0, ½²)` coordinates.
pub fn random_step_driver(d: usize, horizon: f64, seed: u64, stream: u64) -> CadlagPath<Vec<f64>> {
    let mut rng = rng_for(seed, stream);
    let m = rng.random_range(3..=12);
    let mut times: Vec<f64> = (0..m).map(|_| horizon * rng.random::<f64>()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.retain(|&t| t > 0.0);
    let mut values = vec![vec![0.0; d]];
    for _ in 0..times.len() {
        let prev = values.last().unwrap();
        let next = prev.iter().map(|a| a + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        values.push(next);
    }
    times.insert(0, 0.0);
    CadlagPath::step(times, values, horizon).expect("sorted positive times")
}

/// Marcus solver against the canonical solver with `φ` (log-linear by
/// default), plus RDE endpoints along piecewise-constant drivers against
/// an RK4 oracle on the polyline through their values.
pub fn run_marcus_consistency(spec: &ExperimentSpec) -> Result<Outcome> {
    let model = &spec.models[0];
    let fields = spec.fields("rotation")?;
    let y0 = spec.initial_state(fields.as_ref())?;
    let phi = PathFunction::from_name(&spec.params.phi, model.dim())?;
    let opts = spec.solver.options();
    let gaps: Vec<f64> = (0..spec.samples as u64)
        .into_par_iter()
        .map(|s| {
            let x = simulate_stream(model, spec.params.grid, spec.seed, s)?.path;
            let m = solve_marcus_sde(&x, fields.as_ref(), &y0, &opts)?;
            let c = solve_canonical_rde(&marcus_lift(&x), &phi, fields.as_ref(), &y0, &opts)?;
            Ok(m.sup_gap(&c))
        })
        .collect::<Result<_>>()?;
    let d = fields.driver_dim();
    let poly: Vec<f64> = (0..spec.params.polyline_drivers as u64)
        .into_par_iter()
        .map(|k| {
            let x = random_step_driver(d, model.horizon, spec.seed, AUX_STREAM + k);
            let sol = solve_canonical_rde(&marcus_lift(&x), &phi, fields.as_ref(), &y0, &opts)?;
            let vertices: Vec<Vec<f64>> = std::iter::once(x.values()[0].clone())
                .chain(x.jump_indices().into_iter().map(|i| x.values()[i].clone()))
                .collect();
            let ode = polyline_ode(fields.as_ref(), &vertices, &y0, 256);
            let rde: Vec<&Vec<f64>> = x.jump_indices().into_iter().map(|i| &sol.states[i]).collect();
            Ok(rde.iter().zip(&ode).map(|(a, b)| norm2_diff(a, b)).fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;

    let mut report = Report::new(spec);
    let mut table = SampleTable::new(&["kind", "sample", "gap"]);
    table.rows.extend(gaps.iter().enumerate().map(|(s, g)| vec![0.0, s as f64, *g]));
    table.rows.extend(poly.iter().enumerate().map(|(s, g)| vec![1.0, s as f64, *g]));
    let sg = report.stat("marcus_vs_canonical_sup_gap", None, &gaps);
    report.rule(
        "marcus_canonical_gap",
        sg.max <= spec.rules.gap_tol,
        format!("max sup-gap {:.3e} (tolerance {:.1e})", sg.max, spec.rules.gap_tol),
    );
    if !poly.is_empty() {
        let sp = report.stat("polyline_ode_gap", None, &poly);
        report.rule(
            "polyline_ode_equivalence",
            sp.max <= spec.rules.polyline_tol,
            format!("max endpoint gap {:.3e} (tolerance {:.1e})", sp.max, spec.rules.polyline_tol),
        );
    }
    Ok(Outcome { report, samples: table })
}

/// `max_n |Σ_{j<n} Y_{t_j} A_{t_j,t_{j+1}}|` for the uniform partition with
/// `cells` cells, where `A` is the antisymmetric part of the Itô sum
/// `Σ (X_{r−} − X_{t_j}) ⊗ ΔX_r` over the samples of `x` inside each cell and
/// `weight` gives `Y_{t_j}` from `X_{t_j}`.
pub fn area_partial_sum_max(x: &CadlagPath<Vec<f64>>, cells: usize, weight: impl Fn(&[f64]) -> f64) -> f64 {
    let d = x.dim();
    let ts = x.times();
    let vals = x.values();
    let part = uniform_partition(x, cells);
    let idx: Vec<usize> = part.iter().map(|&t| ts.partition_point(|&s| s < t)).collect();
    let mut sum = vec![0.0; d * (d - 1) / 2];
    let mut best: f64 = 0.0;
    let mut acc = vec![0.0; d * d];
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        acc.iter_mut().for_each(|v| *v = 0.0);
        let base = &vals[a];
        for k in a + 1..=b.min(vals.len() - 1) {
            for i in 0..d {
                let left = vals[k - 1][i] - base[i];
                for j in 0..d {
                    acc[i * d + j] += left * (vals[k][j] - vals[k - 1][j]);
                }
            }
        }
        let y = weight(base);
        let mut c = 0;
        for i in 0..d {
            for j in i + 1..d {
                sum[c] += y * 0.5 * (acc[i * d + j] - acc[j * d + i]);
                c += 1;
            }
        }
        best = best.max(norm2(&sum));
    }
    best
}

/// Vanishing of weighted area sums along a mesh ladder, per model.
pub fn run_area_vanish(spec: &ExperimentSpec) -> Result<Outcome> {
    let fine = spec.meshes.last().expect("validated") * spec.params.refine;
    let mut report = Report::new(spec);
    let mut table = SampleTable::new(&["model", "sample", "mesh", "statistic"]);
    for (mi, model) in spec.models.iter().enumerate() {
        let weight = spec.params.weights.get(mi).map(String::as_str).unwrap_or("one");
        let cos = match weight {
            "one" => false,
            "cos" => true,
            w => return Err(HarnessError::Config(format!("unknown weight {w:?}"))),
        };
        let per: Vec<Vec<f64>> = (0..spec.samples as u64)
            .into_par_iter()
            .map(|s| {
                let x = simulate_stream(model, fine + 1, spec.seed, s)?.path;
                Ok(spec
                    .meshes
                    .iter()
                    .map(|&n| area_partial_sum_max(&x, n, |v: &[f64]| if cos { v[0].cos() } else { 1.0 }))
                    .collect())
            })
            .collect::<Result<_>>()?;
        let mut medians = vec![];
        for (k, &n) in spec.meshes.iter().enumerate() {
            let v: Vec<f64> = per.iter().map(|r| r[k]).collect();
            for (s, x) in v.iter().enumerate() {
                table.rows.push(vec![mi as f64, s as f64, n as f64, *x]);
            }
            medians.push(report.stat(format!("model{mi}_{}_{weight}", model.name()), Some(n), &v).median);
        }
        report.rule(
            format!("model{mi}_{}_median_decreasing", model.name()),
            strictly_decreasing(&medians),
            format!("weight {weight}, medians {}", fmt_list(&medians)),
        );
    }
    Ok(Outcome { report, samples: table })
}

/// The three piecewise-linear sequences on `[0, 2]`: `xⁿ` moves `0 → e₁`
/// over `[1 − 1/n, 1]`; `hⁿ` moves `0 → e₂` over `[1 − 2/n, 1 − 1/n]`;
/// `h̄ⁿ` does so over `[1, 1 + 1/n]`. Returns `(xⁿ, xⁿ + hⁿ, xⁿ + h̄ⁿ)`.
pub fn demo_sequences(n: usize) -> Result<[CadlagPath<Vec<f64>>; 3], PathError> {
    let n = n as f64;
    let (o, e1, e2, e12) = (vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]);
    let x = CadlagPath::polyline(vec![0.0, 1.0 - 1.0 / n, 1.0, 2.0], vec![o.clone(), o.clone(), e1.clone(), e1.clone()])?;
    let xh = CadlagPath::polyline(
        vec![0.0, 1.0 - 2.0 / n, 1.0 - 1.0 / n, 1.0, 2.0],
        vec![o.clone(), o.clone(), e2, e12.clone(), e12.clone()],
    )?;
    let xhb = CadlagPath::polyline(
        vec![0.0, 1.0 - 1.0 / n, 1.0, 1.0 + 1.0 / n, 2.0],
        vec![o.clone(), o, e1, e12.clone(), e12],
    )?;
    Ok([x, xh, xhb])
}

/// Jump limit `1_{t ≥ 1} v` on `[0, 2]`.
pub fn demo_limit(v: Vec<f64>) -> CadlagPath<Vec<f64>> {
    CadlagPath::step(vec![0.0, 1.0], vec![vec![0.0; v.len()], v], 2.0).expect("valid step path")
}

/// Skorokhod-type estimates along the example sequences whose sums
/// converge to the same jump with different Hoff interpolations.
pub fn run_metric_demo(spec: &ExperimentSpec) -> Result<Outcome> {
    let prm = &spec.params;
    let opts = AlphaOptions { levels: prm.delta_levels, sigma: SigmaOptions::default(), samples: None };
    let lin = PathFunction::linear();
    let h21 = PathFunction::hoff(vec![1, 0])?;
    let h12 = PathFunction::hoff(vec![0, 1])?;
    let (j1, j12) = (demo_limit(vec![1.0, 0.0]), demo_limit(vec![1.0, 1.0]));
    let rows: Vec<[f64; 7]> = prm
        .demo_n
        .par_iter()
        .map(|&n| {
            let [x, xh, xhb] = demo_sequences(n)?;
            let a = |p: &CadlagPath<Vec<f64>>, lim: &CadlagPath<Vec<f64>>, phi: &PathFunction| {
                alpha_estimate(p, &lin, lim, phi, Norm::Sup, &opts).map(|r| r.value)
            };
            let s = |p: &CadlagPath<Vec<f64>>, lim: &CadlagPath<Vec<f64>>| {
                sigma_estimate(p, lim, Norm::Sup, &SigmaOptions::default()).map(|r| r.value)
            };
            Ok([
                n as f64,
                a(&x, &j1, &lin)?,
                a(&xh, &j12, &h21)?,
                a(&xhb, &j12, &h12)?,
                a(&xh, &j12, &h12)?,
                s(&x, &j1)?,
                s(&xh, &j12)?,
            ])
        })
        .collect::<Result<_>>()?;
    let cols = ["n", "alpha_x", "alpha_x_plus_h", "alpha_x_plus_hbar", "alpha_x_plus_h_vs_hoff12", "sigma_x", "sigma_x_plus_h"];
    let mut report = Report::new(spec);
    let table = SampleTable { header: cols.iter().map(|s| s.to_string()).collect(), rows: rows.iter().map(|r| r.to_vec()).collect() };
    for (c, name) in cols.iter().enumerate().skip(1) {
        let v: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        for (r, x) in rows.iter().zip(&v) {
            report.values.insert(format!("{name}_n{}", r[0]), *x);
        }
        if name.starts_with("alpha") && *name != "alpha_x_plus_h_vs_hoff12" {
            report.rule(format!("{name}_decreasing"), strictly_decreasing(&v), format!("values {}", fmt_list(&v)));
        }
        if name.starts_with("sigma") || *name == "alpha_x_plus_h_vs_hoff12" {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            report.rule(
                format!("{name}_bounded_below"),
                lo >= spec.rules.sigma_floor,
                format!("minimum {lo:.4} (floor {})", spec.rules.sigma_floor),
            );
        }
    }
    Ok(Outcome { report, samples: table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for name in ExperimentName::ALL {
            let spec = ExperimentSpec::preset(name);
            spec.validate().unwrap();
            let text = spec.to_toml().unwrap();
            let back = ExperimentSpec::from_toml(&text).unwrap();
            assert_eq!(back, spec, "{}", name.as_str());
            assert_eq!(back.config_hash(), spec.config_hash());
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = ExperimentSpec::preset(ExperimentName::WongZakai);
        s.meshes = vec![64, 32];
        assert!(s.validate().is_err());
        s.meshes = vec![32, 64];
        s.samples = 0;
        assert!(s.validate().is_err());
        s.samples = 1;
        s.version = 99;
        assert!(s.validate().is_err());
        assert!(ExperimentSpec::from_toml("version = 1\nname = \"wong_zakai\"\nsamples = 1\nbogus = 2\n").is_err());
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!((s.median, s.mean, s.min, s.max), (2.5, 2.5, 1.0, 4.0));
        assert!((s.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn straight_line_has_no_area_sums() {
        let times: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
        let values = times.iter().map(|&t| vec![t, -2.0 * t]).collect();
        let x = CadlagPath::polyline(times, values).unwrap();
        for n in [4, 16, 64] {
            assert_eq!(area_partial_sum_max(&x, n, |_| 1.0), 0.0);
        }
    }

    #[test]
    fn ratio_of_means_exact_for_proportional_samples() {
        let (r, se) = ratio_of_means(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]);
        assert_eq!((r, se), (2.0, 0.0));
    }
}
