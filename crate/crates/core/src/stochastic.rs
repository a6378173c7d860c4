//! Simulation of finite-activity semimartingales and pathwise functionals:
//! realized bracket, jump truncation and partition approximations.
//!
//! Randomness comes from ChaCha8 seeded with the run seed; each Monte
//! Carlo sample uses its own stream (`set_stream(index)`), so samples can
//! be drawn in any order or in parallel with identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cadlag::{CadlagPath, PathError, PathFunction, PathFunctionKind, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("partition time {0} is not a sample time of the path")]
    NotRefinable(f64),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Jump-size distribution of a compound Poisson component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    /// Independent normal coordinates with the given means and common std.
    Normal { mean: Vec<f64>, std: f64 },
    Constant { value: Vec<f64> },
}

impl JumpLaw {
    fn dim(&self) -> usize {
        match self {
            JumpLaw::Normal { mean, .. } => mean.len(),
            JumpLaw::Constant { value } => value.len(),
        }
    }

    fn mean(&self) -> Vec<f64> {
        match self {
            JumpLaw::Normal { mean, .. } => mean.clone(),
            JumpLaw::Constant { value } => value.clone(),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            JumpLaw::Normal { mean, std } => mean.iter().map(|m| m + std * rng.sample::<f64, _>(StandardNormal)).collect(),
            JumpLaw::Constant { value } => value.clone(),
        }
    }
}

/// Step distribution of a random walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepLaw {
    Rademacher,
    Gaussian,
}

/// Model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    /// `σ W` with `W` a standard `d`-dimensional Brownian motion.
    BrownianMotion { dim: usize, sigma: f64 },
    /// Drift `b`, diffusion covariance `a` (row-major), compound Poisson
    /// jumps with intensity `λ`; `compensated` subtracts `λ E[J] t`.
    LevyFinite {
        drift: Vec<f64>,
        covariance: Vec<f64>,
        intensity: f64,
        jump: JumpLaw,
        #[serde(default)]
        compensated: bool,
    },
    /// Donsker walk `scale · (T/n)^{1/2} Σ_{k ≤ nt/T} ξ_k`, piecewise constant.
    RandomWalk { dim: usize, law: StepLaw, scale: f64 },
    /// Row `n` of a null array: steps `σ ξ (T/n)^{1/2} + J · Bernoulli(λT/n)`.
    NullArray { sigma: f64, jump: Vec<f64>, intensity: f64 },
    /// Martingale difference array `n^{-1/2} ε_k ⊙ s_k` with Rademacher `ε_k`
    /// and deterministic scales alternating `√½`, `√(3/2)`, so `[X]_t → t·Id`.
    MartingaleClt { dim: usize },
}

/// A driving semimartingale on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemimartingaleModel {
    pub horizon: f64,
    #[serde(flatten)]
    pub kind: ModelKind,
}

impl SemimartingaleModel {
    pub fn new(horizon: f64, kind: ModelKind) -> Result<Self, ModelError> {
        let m = Self { horizon, kind };
        m.validate()?;
        Ok(m)
    }

    pub fn brownian(dim: usize, sigma: f64, horizon: f64) -> Self {
        Self { horizon, kind: ModelKind::BrownianMotion { dim, sigma } }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::BrownianMotion { .. } => "brownian_motion",
            ModelKind::LevyFinite { .. } => "levy_finite",
            ModelKind::RandomWalk { .. } => "random_walk",
            ModelKind::NullArray { .. } => "null_array",
            ModelKind::MartingaleClt { .. } => "martingale_clt",
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ModelKind::BrownianMotion { dim, .. } => *dim,
            ModelKind::LevyFinite { drift, .. } => drift.len(),
            ModelKind::RandomWalk { dim, .. } => *dim,
            ModelKind::NullArray { jump, .. } => jump.len(),
            ModelKind::MartingaleClt { dim } => *dim,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Invalid(m));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.dim() == 0 {
            return bad("dimension must be positive".into());
        }
        match &self.kind {
            ModelKind::BrownianMotion { sigma, .. } if !(*sigma >= 0.0) => bad(format!("sigma = {sigma}")),
            ModelKind::LevyFinite { drift, covariance, intensity, jump, .. } => {
                let d = drift.len();
                if covariance.len() != d * d {
                    return bad(format!("covariance needs {} entries", d * d));
                }
                if !(*intensity >= 0.0 && intensity.is_finite()) {
                    return bad(format!("intensity = {intensity}"));
                }
                if jump.dim() != d {
                    return bad("jump law dimension differs from drift".into());
                }
                if let JumpLaw::Normal { std, .. } = jump {
                    if !(*std >= 0.0) {
                        return bad(format!("jump std = {std}"));
                    }
                }
                cholesky_psd(covariance, d).map(|_| ())
            }
            ModelKind::RandomWalk { scale, .. } if !scale.is_finite() => bad(format!("scale = {scale}")),
            ModelKind::NullArray { sigma, intensity, .. } if !(*sigma >= 0.0 && *intensity >= 0.0) => {
                bad(format!("sigma = {sigma}, intensity = {intensity}"))
            }
            _ => Ok(()),
        }
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = a` for positive semidefinite `a`.
pub fn cholesky_psd(a: &[f64], d: usize) -> Result<Vec<f64>, ModelError> {
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    for i in 0..d {
        for j in 0..i {
            if (a[i * d + j] - a[j * d + i]).abs() > 1e-12 * scale {
                return Err(ModelError::Invalid("covariance is not symmetric".into()));
            }
        }
    }
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= l[j * d + k] * l[j * d + k];
        }
        if diag < -1e-12 * scale {
            return Err(ModelError::Invalid("covariance is not positive semidefinite".into()));
        }
        let ljj = diag.max(0.0).sqrt();
        l[j * d + j] = ljj;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = if ljj > 0.0 { s / ljj } else { 0.0 };
        }
    }
    Ok(l)
}

/// Simulated path with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub path: CadlagPath<Vec<f64>>,
    pub seed: u64,
    pub stream: u64,
    pub model: &'static str,
    pub grid: usize,
}

/// RNG for sample `stream` of a run seeded with `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates on a uniform grid of `n` points; equivalent to stream 0 of
/// [`simulate_stream`].
pub fn simulate(model: &SemimartingaleModel, n: usize, seed: u64) -> Result<SamplePath, ModelError> {
    simulate_stream(model, n, seed, 0)
}

/// Simulates sample `stream` of the run seeded with `seed`.
pub fn simulate_stream(model: &SemimartingaleModel, n: usize, seed: u64, stream: u64) -> Result<SamplePath, ModelError> {
    model.validate()?;
    if n < 2 {
        return Err(ModelError::GridTooSmall(n));
    }
    let mut rng = rng_for(seed, stream);
    let path = simulate_with(model, n, &mut rng)?;
    Ok(SamplePath { path, seed, stream, model: model.name(), grid: n })
}

/// Simulates with a caller-supplied RNG.
pub fn simulate_with(model: &SemimartingaleModel, n: usize, rng: &mut ChaCha8Rng) -> Result<CadlagPath<Vec<f64>>, ModelError> {
    let t_end = model.horizon;
    let d = model.dim();
    let grid: Vec<f64> = (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect();
    let steps = n - 1;
    let dt = t_end / steps as f64;
    let normal = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
    let path = match &model.kind {
        ModelKind::BrownianMotion { sigma, .. } => {
            let mut values = vec![vec![0.0; d]];
            for _ in 0..steps {
                let prev = values.last().unwrap();
                let next = prev.iter().map(|x| x + sigma * dt.sqrt() * normal(rng)).collect();
                values.push(next);
            }
            CadlagPath::polyline(grid, values)?
        }
        ModelKind::LevyFinite { drift, covariance, intensity, jump, compensated } => {
            let chol = cholesky_psd(covariance, d)?;
            let mut b = drift.clone();
            if *compensated {
                for (bi, mi) in b.iter_mut().zip(jump.mean()) {
                    *bi -= intensity * mi;
                }
            }
            let mut jump_times = Vec::new();
            if *intensity > 0.0 {
                let exp = Exp::new(*intensity).map_err(|e| ModelError::Invalid(e.to_string()))?;
                let mut t = exp.sample(rng);
                while t < t_end {
                    jump_times.push(t);
                    t += exp.sample(rng);
                }
            }
            let mut times = vec![0.0];
            let mut values = vec![vec![0.0; d]];
            let diffuse = |values: &mut Vec<Vec<f64>>, times: &mut Vec<f64>, t: f64, rng: &mut ChaCha8Rng| {
                let h = t - times.last().unwrap();
                let z: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
                let prev = values.last().unwrap();
                let next = (0..d)
                    .map(|i| prev[i] + b[i] * h + h.sqrt() * (0..=i).map(|k| chol[i * d + k] * z[k]).sum::<f64>())
                    .collect();
                times.push(t);
                values.push(next);
            };
            let mut j = 0;
            for &t in &grid[1..] {
                while j < jump_times.len() && jump_times[j] < t {
                    let tau = jump_times[j];
                    if tau > *times.last().unwrap() {
                        diffuse(&mut values, &mut times, tau, rng);
                    }
                    let size = jump.sample(rng);
                    let post = values.last().unwrap().iter().zip(&size).map(|(a, s)| a + s).collect();
                    times.push(tau);
                    values.push(post);
                    j += 1;
                }
                diffuse(&mut values, &mut times, t, rng);
            }
            CadlagPath::new(times, values, t_end)?
        }
        ModelKind::RandomWalk { law, scale, .. } => {
            let step = scale * dt.sqrt();
            let mut values = vec![vec![0.0; d]];
            for _ in 0..steps {
                let prev = values.last().unwrap();
                let next = prev
                    .iter()
                    .map(|x| {
                        let xi = match law {
                            StepLaw::Rademacher => rademacher(rng),
                            StepLaw::Gaussian => normal(rng),
                        };
                        x + step * xi
                    })
                    .collect();
                values.push(next);
            }
            CadlagPath::step(grid, values, t_end)?
        }
        ModelKind::NullArray { sigma, jump, intensity } => {
            let p = (intensity * dt).min(1.0);
            let mut values = vec![vec![0.0; d]];
            for _ in 0..steps {
                let hit = rng.random::<f64>() < p;
                let prev = values.last().unwrap();
                let next = prev
                    .iter()
                    .zip(jump)
                    .map(|(x, jv)| x + sigma * dt.sqrt() * normal(rng) + if hit { *jv } else { 0.0 })
                    .collect();
                values.push(next);
            }
            CadlagPath::step(grid, values, t_end)?
        }
        ModelKind::MartingaleClt { .. } => {
            let mut values = vec![vec![0.0; d]];
            for k in 0..steps {
                let s = if k % 2 == 0 { 0.5f64.sqrt() } else { 1.5f64.sqrt() };
                let prev = values.last().unwrap();
                let next = prev.iter().map(|x| x + s * dt.sqrt() * rademacher(rng)).collect();
                values.push(next);
            }
            CadlagPath::step(grid, values, t_end)?
        }
    };
    Ok(path)
}

fn rademacher(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Realized bracket `[X]_t = Σ ΔX ⊗ ΔX` over sample increments, as a
/// path of row-major `d×d` matrices on the same grid.
pub fn bracket(x: &CadlagPath<Vec<f64>>) -> CadlagPath<Vec<f64>> {
    let d = x.dim();
    let mut acc = vec![0.0; d * d];
    let mut values = vec![acc.clone()];
    for w in x.values().windows(2) {
        for i in 0..d {
            for j in 0..d {
                acc[i * d + j] += (w[1][i] - w[0][i]) * (w[1][j] - w[0][j]);
            }
        }
        values.push(acc.clone());
    }
    CadlagPath::new(x.times().to_vec(), values, x.horizon()).expect("grid of a valid path")
}

/// `X^δ = X − Σ_{s ≤ t} (1 − δ/|ΔX_s|)^+ ΔX_s`: jumps longer than `δ` are
/// shortened to length `δ`, others are kept.
pub fn jump_truncate(x: &CadlagPath<Vec<f64>>, delta: f64) -> Result<CadlagPath<Vec<f64>>, ModelError> {
    if !(delta > 0.0) {
        return Err(ModelError::Invalid(format!("truncation level must be positive, got {delta}")));
    }
    let d = x.dim();
    let mut offset = vec![0.0; d];
    let mut values = Vec::with_capacity(x.len());
    values.push(x.values()[0].clone());
    for i in 1..x.len() {
        if x.is_jump(i) {
            let jump: Vec<f64> = x.values()[i].iter().zip(&x.values()[i - 1]).map(|(a, b)| a - b).collect();
            let size = crate::algebra::norm2(&jump);
            let cut = (1.0 - delta / size).max(0.0);
            for k in 0..d {
                offset[k] += cut * jump[k];
            }
        }
        values.push(x.values()[i].iter().zip(&offset).map(|(a, o)| a - o).collect());
    }
    Ok(CadlagPath::new(x.times().to_vec(), values, x.horizon())?)
}

/// Approximation scheme along a partition.
#[derive(Debug, Clone)]
pub enum Scheme {
    /// `X^{[D]}`: constant between partition points.
    PiecewiseConstant,
    /// `X^{D,φ}`: traverses `φ(X_{t_n}, X_{t_{n+1}})` across each cell.
    PhiInterp(PathFunction),
}

/// Approximates `x` along the partition `partition` (times that must be
/// sample times of `x`; `0` and the horizon are added if missing).
pub fn approximate(x: &CadlagPath<Vec<f64>>, scheme: &Scheme, partition: &[f64]) -> Result<CadlagPath<Vec<f64>>, ModelError> {
    let horizon = x.horizon();
    let mut d: Vec<f64> = partition.to_vec();
    d.sort_by(f64::total_cmp);
    d.dedup();
    for &t in &d {
        if t != horizon && x.times().binary_search_by(|s| s.total_cmp(&t)).is_err() {
            return Err(ModelError::NotRefinable(t));
        }
    }
    if d.first() != Some(&0.0) {
        d.insert(0, 0.0);
    }
    if *d.last().unwrap() < horizon {
        d.push(horizon);
    }
    let values: Vec<Vec<f64>> = d.iter().map(|&t| x.value_at(t)).collect();
    match scheme {
        Scheme::PiecewiseConstant => Ok(CadlagPath::step(d, values, horizon)?),
        Scheme::PhiInterp(phi) => {
            let segments = match phi.kind() {
                PathFunctionKind::Linear | PathFunctionKind::LogLinear => 1,
                PathFunctionKind::Hoff(order) => order.len(),
                PathFunctionKind::Custom(_) => phi.default_samples(),
            };
            let mut times = vec![0.0];
            let mut pts = vec![values[0].clone()];
            for k in 1..d.len() {
                let (t0, t1) = (d[k - 1], d[k]);
                let win = <Vec<f64> as Point>::phi_window(phi, &values[k - 1], &values[k], segments)
                    .map_err(|_| ModelError::Path(PathError::Domain { time: t1 }))?;
                for (j, p) in win.into_iter().enumerate().skip(1) {
                    times.push(t0 + (t1 - t0) * j as f64 / segments as f64);
                    pts.push(p);
                }
            }
            Ok(CadlagPath::polyline(times, pts)?)
        }
    }
}

/// Uniform partition with `cells` cells, snapped to the nearest sample
/// times of `x` (so it is always refinable into the grid).
pub fn uniform_partition(x: &CadlagPath<Vec<f64>>, cells: usize) -> Vec<f64> {
    let ts = x.times();
    let mut out: Vec<f64> = (0..=cells)
        .map(|k| {
            let target = x.horizon() * k as f64 / cells as f64;
            let i = ts.partition_point(|&s| s < target).min(ts.len() - 1);
            let j = i.saturating_sub(1);
            if (ts[j] - target).abs() <= (ts[i] - target).abs() {
                ts[j]
            } else {
                ts[i]
            }
        })
        .collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cadlag::PathFunction;
    use crate::lift::lift_piecewise_linear;

    #[test]
    fn zero_sigma_is_zero_path() {
        let s = simulate(&SemimartingaleModel::brownian(2, 0.0, 1.0), 17, 3).unwrap();
        assert!(s.path.values().iter().all(|v| v == &vec![0.0, 0.0]));
    }

    #[test]
    fn pure_drift_is_straight_line() {
        let m = SemimartingaleModel::new(
            1.0,
            ModelKind::LevyFinite {
                drift: vec![1.0, 0.0],
                covariance: vec![0.0; 4],
                intensity: 0.0,
                jump: JumpLaw::Constant { value: vec![0.0, 0.0] },
                compensated: false,
            },
        )
        .unwrap();
        let s = simulate(&m, 11, 0).unwrap();
        for (t, v) in s.path.times().iter().zip(s.path.values()) {
            assert!((v[0] - t).abs() < 1e-15 && v[1] == 0.0);
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let m = SemimartingaleModel::brownian(3, 1.0, 1.0);
        assert_eq!(simulate(&m, 64, 9).unwrap(), simulate(&m, 64, 9).unwrap());
        assert_ne!(simulate_stream(&m, 64, 9, 1).unwrap().path, simulate(&m, 64, 9).unwrap().path);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(SemimartingaleModel::new(1.0, ModelKind::BrownianMotion { dim: 1, sigma: -1.0 }).is_err());
        let neg = ModelKind::LevyFinite {
            drift: vec![0.0, 0.0],
            covariance: vec![1.0, 2.0, 2.0, 1.0],
            intensity: 1.0,
            jump: JumpLaw::Constant { value: vec![1.0, 0.0] },
            compensated: false,
        };
        assert!(SemimartingaleModel::new(1.0, neg).is_err());
        assert!(simulate(&SemimartingaleModel::brownian(1, 1.0, 1.0), 1, 0).is_err());
    }

    #[test]
    fn single_jump_bracket_and_truncation() {
        let x = CadlagPath::step(vec![0.0, 0.5], vec![vec![0.0, 0.0], vec![2.0, 0.0]], 1.0).unwrap();
        assert_eq!(bracket(&x).last(), &vec![4.0, 0.0, 0.0, 0.0]);
        let y = jump_truncate(&x, 1.0).unwrap();
        assert_eq!(y.last(), &vec![1.0, 0.0]);
        assert_eq!(jump_truncate(&x, 5.0).unwrap(), x);
        assert_eq!(jump_truncate(&x, 1e300).unwrap(), x);
        assert!(jump_truncate(&x, 0.0).is_err());
    }

    #[test]
    fn straight_line_bracket_vanishes() {
        for n in [10usize, 100, 1000] {
            let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
            let values = times.iter().map(|&t| vec![t]).collect();
            let x = CadlagPath::polyline(times, values).unwrap();
            assert!((bracket(&x).last()[0] - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn approximations() {
        let times: Vec<f64> = (0..=4).map(|k| k as f64 / 4.0).collect();
        let values: Vec<Vec<f64>> = times.iter().map(|&t| vec![t, 2.0 * t]).collect();
        let x = CadlagPath::polyline(times.clone(), values).unwrap();
        let pc = approximate(&x, &Scheme::PiecewiseConstant, &times).unwrap();
        assert_eq!(pc.jump_indices().len(), 4);
        let chord = approximate(&x, &Scheme::PhiInterp(PathFunction::linear()), &[0.0, 1.0]).unwrap();
        assert_eq!(chord.values(), &[vec![0.0, 0.0], vec![1.0, 2.0]]);
        assert!(matches!(approximate(&x, &Scheme::PiecewiseConstant, &[0.3]), Err(ModelError::NotRefinable(_))));
    }

    #[test]
    fn hoff_cell_area() {
        let x = CadlagPath::polyline(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let h = approximate(&x, &Scheme::PhiInterp(PathFunction::hoff_default(2)), &[0.0, 1.0]).unwrap();
        assert_eq!(h.values()[1], vec![1.0, 0.0]);
        let area = lift_piecewise_linear(&h).points().last().unwrap().log().area(0, 1);
        assert_eq!(area, 0.5);
    }

    #[test]
    fn donsker_step_variance() {
        let m = SemimartingaleModel::new(1.0, ModelKind::RandomWalk { dim: 1, law: StepLaw::Rademacher, scale: 1.0 }).unwrap();
        let n = 101;
        let s = simulate(&m, n, 4).unwrap();
        let bracket_t = bracket(&s.path).last()[0];
        assert!((bracket_t - 1.0).abs() < 1e-12);
    }
}
