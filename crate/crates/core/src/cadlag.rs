//! Càdlàg sample paths, path functions, fictitious-time interpolation and
//! time changes.
//!
//! A [`CadlagPath`] is a finite list of samples with non-decreasing times.
//! Between two samples with distinct times the path moves continuously
//! (linearly in `ℝᵈ`, along the group geodesic in `G²`). Two consecutive
//! samples sharing a time encode a jump: the first is the left limit, the
//! second the post-jump value. A piecewise-constant path is therefore built
//! with [`CadlagPath::step`], which inserts the hold samples, and a
//! continuous polyline with [`CadlagPath::polyline`].
//!
//! [`interpolate`] replaces every jump by a window of fictitious time
//! filled with a [`PathFunction`], then rescales the clock back to
//! `[0, T]`. The returned [`TimeChange`] maps original times to the
//! rescaled clock; it has vertical pieces at jump times, so it is not a
//! bijection, and the solver pulls results back through
//! [`Interpolation::index_map`] instead.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{G2Element, Lie2Element};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("path has no samples")]
    Empty,
    #[error("{times} times but {values} values")]
    LengthMismatch { times: usize, values: usize },
    #[error("first sample time must be 0, got {0}")]
    NonZeroStart(f64),
    #[error("sample times decrease at index {index}")]
    NonMonotone { index: usize },
    #[error("non-finite entry at sample {index}")]
    NonFinite { index: usize },
    #[error("horizon {horizon} precedes last sample time {last}")]
    HorizonTooShort { horizon: f64, last: f64 },
    #[error("sample {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("jump at t = {time} lies outside the path-function domain")]
    Domain { time: f64 },
    #[error("time change is not a bijection")]
    NonBijective,
    #[error("time change horizon {change} does not match path horizon {path}")]
    HorizonMismatch { change: f64, path: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Values a path can take: `ℝᵈ` vectors or `G²(ℝᵈ)` elements.
pub trait Point: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    fn dim(&self) -> usize;
    fn origin(dim: usize) -> Self;
    fn is_finite(&self) -> bool;
    fn dist(&self, other: &Self) -> f64;
    /// Continuous move from `self` (s = 0) to `other` (s = 1).
    fn geodesic(&self, other: &Self, s: f64) -> Self;
    /// Level-1 projection.
    fn level1(&self) -> &[f64];
    /// Homogeneous distance between the increments `a0 → a1` and `b0 → b1`.
    fn increment_dist(a0: &Self, a1: &Self, b0: &Self, b1: &Self) -> f64;
    /// Level-1 and level-2 inhomogeneous distances between increments.
    fn increment_levels(a0: &Self, a1: &Self, b0: &Self, b1: &Self) -> [f64; 2];
    /// Samples `φ(x, y)` at `segments + 1` equally spaced parameters.
    fn phi_window(
        phi: &PathFunction,
        x: &Self,
        y: &Self,
        segments: usize,
    ) -> Result<Vec<Self>, WindowError>;
}

/// The jump lies outside the path-function domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowError;

impl Point for Vec<f64> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn origin(dim: usize) -> Self {
        vec![0.0; dim]
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|a| a.is_finite())
    }

    fn dist(&self, other: &Self) -> f64 {
        crate::algebra::norm2_diff(self, other)
    }

    fn geodesic(&self, other: &Self, s: f64) -> Self {
        self.iter().zip(other).map(|(a, b)| a + s * (b - a)).collect()
    }

    fn level1(&self) -> &[f64] {
        self
    }

    fn increment_dist(a0: &Self, a1: &Self, b0: &Self, b1: &Self) -> f64 {
        let mut s = 0.0;
        for k in 0..a0.len() {
            let d = (a1[k] - a0[k]) - (b1[k] - b0[k]);
            s += d * d;
        }
        s.sqrt()
    }

    fn increment_levels(a0: &Self, a1: &Self, b0: &Self, b1: &Self) -> [f64; 2] {
        [Self::increment_dist(a0, a1, b0, b1), 0.0]
    }

    fn phi_window(
        phi: &PathFunction,
        x: &Self,
        y: &Self,
        segments: usize,
    ) -> Result<Vec<Self>, WindowError> {
        if !phi.contains(x, y) {
            return Err(WindowError);
        }
        Ok((0..=segments)
            .map(|j| {
                if j == segments {
                    y.clone()
                } else {
                    phi.sample(x, y, j as f64 / segments as f64)
                }
            })
            .collect())
    }
}

impl Point for G2Element {
    fn dim(&self) -> usize {
        G2Element::dim(self)
    }

    fn origin(dim: usize) -> Self {
        G2Element::identity(dim)
    }

    fn is_finite(&self) -> bool {
        G2Element::is_finite(self)
    }

    fn dist(&self, other: &Self) -> f64 {
        self.hom_dist(other)
    }

    fn geodesic(&self, other: &Self, s: f64) -> Self {
        G2Element::geodesic(self, other, s)
    }

    fn level1(&self) -> &[f64] {
        self.vec()
    }

    fn increment_dist(a0: &Self, a1: &Self, b0: &Self, b1: &Self) -> f64 {
        a0.increment_to(a1).hom_dist(&b0.increment_to(b1))
    }

    fn increment_levels(a0: &Self, a1: &Self, b0: &Self, b1: &Self) -> [f64; 2] {
        let a = a0.increment_to(a1);
        let b = b0.increment_to(b1);
        [a.level1_dist(&b), a.level2_dist(&b)]
    }

    fn phi_window(
        phi: &PathFunction,
        x: &Self,
        y: &Self,
        segments: usize,
    ) -> Result<Vec<Self>, WindowError> {
        if matches!(phi.kind, PathFunctionKind::LogLinear) {
            return Ok((0..=segments)
                .map(|j| if j == segments { y.clone() } else { x.geodesic(y, j as f64 / segments as f64) })
                .collect());
        }
        // Lift the ℝᵈ curve by chord concatenation of its samples.
        let (xv, yv) = (x.vec().to_vec(), y.vec().to_vec());
        if !phi.contains(&xv, &yv) {
            return Err(WindowError);
        }
        let mut out = Vec::with_capacity(segments + 1);
        out.push(x.clone());
        let mut prev = xv.clone();
        let mut g = x.clone();
        for j in 1..=segments {
            let cur = phi.sample(&xv, &yv, j as f64 / segments as f64);
            let inc: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| a - b).collect();
            g = &g * &G2Element::from_increment(&inc);
            out.push(g.clone());
            prev = cur;
        }
        let scale = 1.0 + x.hom_dist(y).powi(2);
        if g.hom_dist(y).powi(2) > 1e-9 * scale {
            return Err(WindowError);
        }
        *out.last_mut().unwrap() = y.clone();
        Ok(out)
    }
}

type SampleFn = dyn Fn(&[f64], &[f64], f64) -> Vec<f64> + Send + Sync;
type DomainFn = dyn Fn(&[f64], &[f64]) -> bool + Send + Sync;

/// User-supplied path function on `ℝᵈ`.
#[derive(Clone)]
pub struct CustomPathFunction {
    pub name: String,
    sample: Arc<SampleFn>,
    domain: Option<Arc<DomainFn>>,
}

impl fmt::Debug for CustomPathFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPathFunction").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum PathFunctionKind {
    Linear,
    LogLinear,
    /// Axis-by-axis traversal; the vector lists axes in visiting order.
    Hoff(Vec<usize>),
    Custom(CustomPathFunction),
}

/// Rule turning a jump `(x, y)` into a continuous path from `x` to `y`.
#[derive(Debug, Clone)]
pub struct PathFunction {
    kind: PathFunctionKind,
    q: f64,
    q_modulus: f64,
}

impl PathFunction {
    pub fn linear() -> Self {
        Self { kind: PathFunctionKind::Linear, q: 1.0, q_modulus: 1.0 }
    }

    pub fn log_linear() -> Self {
        Self { kind: PathFunctionKind::LogLinear, q: 1.0, q_modulus: 1.0 }
    }

    /// Hoff path function visiting the axes in `order` (a permutation of `0..d`).
    pub fn hoff(order: Vec<usize>) -> Result<Self, PathError> {
        let d = order.len();
        let mut seen = vec![false; d];
        for &a in &order {
            if a >= d || seen[a] {
                return Err(PathError::InvalidParameter(format!(
                    "Hoff order {order:?} is not a permutation of 0..{d}"
                )));
            }
            seen[a] = true;
        }
        if d == 0 {
            return Err(PathError::InvalidParameter("empty Hoff order".into()));
        }
        Ok(Self { kind: PathFunctionKind::Hoff(order), q: 1.0, q_modulus: (d as f64).sqrt() })
    }

    /// Hoff path function in index order `0, 1, …, d−1`.
    pub fn hoff_default(dim: usize) -> Self {
        Self::hoff((0..dim).collect()).expect("identity permutation")
    }

    /// Custom path function with declared variation order `q` and modulus.
    pub fn custom<F>(name: &str, sample: F, q: f64, q_modulus: f64) -> Self
    where
        F: Fn(&[f64], &[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            kind: PathFunctionKind::Custom(CustomPathFunction {
                name: name.to_string(),
                sample: Arc::new(sample),
                domain: None,
            }),
            q,
            q_modulus,
        }
    }

    /// Restricts a custom path function to jumps accepted by `domain`.
    pub fn with_domain<F>(mut self, domain: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> bool + Send + Sync + 'static,
    {
        if let PathFunctionKind::Custom(c) = &mut self.kind {
            c.domain = Some(Arc::new(domain));
        }
        self
    }

    /// Parses `linear`, `loglinear` (or `log_linear`), `hoff` (index order)
    /// or `hoff(i,j,…)` with 1-based axes, as printed by [`PathFunction::name`].
    pub fn from_name(name: &str, dim: usize) -> Result<Self, PathError> {
        let s = name.trim().to_ascii_lowercase();
        match s.as_str() {
            "linear" => Ok(Self::linear()),
            "loglinear" | "log_linear" | "log-linear" => Ok(Self::log_linear()),
            "hoff" => Ok(Self::hoff_default(dim)),
            _ => {
                let inner = s
                    .strip_prefix("hoff(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| PathError::InvalidParameter(format!("unknown path function {name:?}")))?;
                let order = inner
                    .split(',')
                    .map(|a| match a.trim().parse::<usize>() {
                        Ok(k) if k >= 1 => Ok(k - 1),
                        _ => Err(PathError::InvalidParameter(format!("bad Hoff axis {a:?}"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if order.len() != dim {
                    return Err(PathError::InvalidParameter(format!("Hoff order {name:?} needs {dim} axes")));
                }
                Self::hoff(order)
            }
        }
    }

    pub fn kind(&self) -> &PathFunctionKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            PathFunctionKind::Linear => "linear".into(),
            PathFunctionKind::LogLinear => "loglinear".into(),
            PathFunctionKind::Hoff(o) => {
                let axes: Vec<String> = o.iter().map(|a| (a + 1).to_string()).collect();
                format!("hoff({})", axes.join(","))
            }
            PathFunctionKind::Custom(c) => c.name.clone(),
        }
    }

    /// Declared variation order of the interpolating curves.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Declared constant `η` with `‖φ(x, y)‖_{q-var} ≤ η |y − x|` and `|a(x)| ≤ η |x|²`.
    pub fn q_modulus(&self) -> f64 {
        self.q_modulus
    }

    /// Samples per jump window used when the caller does not override it.
    pub fn default_samples(&self) -> usize {
        match &self.kind {
            PathFunctionKind::Custom(_) => 32,
            _ => 8,
        }
    }

    /// Number of window segments actually used for a requested count.
    pub fn window_segments(&self, requested: usize) -> usize {
        let k = requested.max(2);
        match &self.kind {
            // Corners must be sample points for the chord lift to be exact.
            PathFunctionKind::Hoff(o) => k.div_ceil(o.len()) * o.len(),
            _ => k,
        }
    }

    pub fn contains(&self, x: &[f64], y: &[f64]) -> bool {
        match &self.kind {
            PathFunctionKind::Hoff(o) => o.len() == x.len(),
            PathFunctionKind::Custom(c) => c.domain.as_ref().is_none_or(|f| f(x, y)),
            _ => true,
        }
    }

    /// `φ(x, y)_s` on `ℝᵈ`.
    pub fn sample(&self, x: &[f64], y: &[f64], s: f64) -> Vec<f64> {
        let s = s.clamp(0.0, 1.0);
        match &self.kind {
            PathFunctionKind::Linear | PathFunctionKind::LogLinear => {
                x.iter().zip(y).map(|(a, b)| a + s * (b - a)).collect()
            }
            PathFunctionKind::Hoff(order) => {
                let m = order.len();
                let pos = s * m as f64;
                let leg = (pos.floor() as usize).min(m - 1);
                let frac = pos - leg as f64;
                let mut out = x.to_vec();
                for (l, &axis) in order.iter().enumerate() {
                    let w = match l.cmp(&leg) {
                        Ordering::Less => 1.0,
                        Ordering::Equal => frac,
                        Ordering::Greater => 0.0,
                    };
                    out[axis] += w * (y[axis] - x[axis]);
                }
                out
            }
            PathFunctionKind::Custom(c) => {
                if s == 0.0 {
                    x.to_vec()
                } else if s == 1.0 {
                    y.to_vec()
                } else {
                    (c.sample)(x, y, s)
                }
            }
        }
    }

    /// Area map `a(Δ)`: the antisymmetric level-2 part of the lifted curve
    /// `φ(0, Δ)`, as a packed strict upper triangle.
    pub fn area_map(&self, inc: &[f64]) -> Vec<f64> {
        let d = inc.len();
        match &self.kind {
            PathFunctionKind::Linear | PathFunctionKind::LogLinear => vec![0.0; d * (d - 1) / 2],
            PathFunctionKind::Hoff(order) => {
                let mut pos = vec![0; d];
                for (l, &a) in order.iter().enumerate() {
                    pos[a] = l;
                }
                let mut out = Vec::with_capacity(d * (d - 1) / 2);
                for i in 0..d {
                    for j in i + 1..d {
                        let sign = if pos[i] < pos[j] { 1.0 } else { -1.0 };
                        out.push(sign * 0.5 * inc[i] * inc[j]);
                    }
                }
                out
            }
            PathFunctionKind::Custom(_) => {
                let zero = vec![0.0; d];
                let n = 1024;
                let mut g = G2Element::identity(d);
                let mut prev = zero.clone();
                for j in 1..=n {
                    let cur = self.sample(&zero, inc, j as f64 / n as f64);
                    let step: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| a - b).collect();
                    g = &g * &G2Element::from_increment(&step);
                    prev = cur;
                }
                g.area_upper()
            }
        }
    }

    /// `ψ(Δ) = exp(Δ + a(Δ))`, the group increment carried by a jump of size `Δ`.
    pub fn psi(&self, inc: &[f64]) -> G2Element {
        Lie2Element::new(inc.to_vec(), self.area_map(inc))
            .expect("area map has the packed length")
            .exp()
    }
}

/// Finite càdlàg path; see the module docs for the sample convention.
#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath<P> {
    times: Vec<f64>,
    values: Vec<P>,
    horizon: f64,
}

impl<P: Point> CadlagPath<P> {
    /// Builds a path from raw samples; equal consecutive times mark jumps.
    pub fn new(times: Vec<f64>, values: Vec<P>, horizon: f64) -> Result<Self, PathError> {
        if times.is_empty() {
            return Err(PathError::Empty);
        }
        if times.len() != values.len() {
            return Err(PathError::LengthMismatch { times: times.len(), values: values.len() });
        }
        if times[0] != 0.0 {
            return Err(PathError::NonZeroStart(times[0]));
        }
        let dim = values[0].dim();
        for (i, (t, v)) in times.iter().zip(&values).enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(PathError::NonFinite { index: i });
            }
            if v.dim() != dim {
                return Err(PathError::DimensionMismatch { index: i, expected: dim, got: v.dim() });
            }
            if i > 0 && *t < times[i - 1] {
                return Err(PathError::NonMonotone { index: i });
            }
        }
        let last = *times.last().unwrap();
        if !(horizon >= last) || !horizon.is_finite() {
            return Err(PathError::HorizonTooShort { horizon, last });
        }
        Ok(Self { times, values, horizon })
    }

    /// Continuous path through the given vertices; horizon is the last time.
    pub fn polyline(times: Vec<f64>, values: Vec<P>) -> Result<Self, PathError> {
        let horizon = times.last().copied().unwrap_or(0.0);
        let path = Self::new(times, values, horizon)?;
        if path.times.windows(2).any(|w| w[0] == w[1]) {
            return Err(PathError::InvalidParameter("polyline times must be strictly increasing".into()));
        }
        Ok(path)
    }

    /// Piecewise-constant path taking `values[i]` on `[times[i], times[i+1])`.
    pub fn step(times: Vec<f64>, values: Vec<P>, horizon: f64) -> Result<Self, PathError> {
        if times.len() != values.len() {
            return Err(PathError::LengthMismatch { times: times.len(), values: values.len() });
        }
        if let Some(i) = (1..times.len()).find(|&i| times[i] <= times[i - 1]) {
            return Err(PathError::NonMonotone { index: i });
        }
        let mut ts = Vec::with_capacity(2 * times.len());
        let mut vs = Vec::with_capacity(2 * times.len());
        for (i, (t, v)) in times.iter().zip(values).enumerate() {
            if i > 0 {
                let prev: P = vs.last().cloned().unwrap();
                ts.push(*t);
                vs.push(prev.clone());
                if prev == v {
                    continue;
                }
            }
            ts.push(*t);
            vs.push(v);
        }
        Self::new(ts, vs, horizon)
    }

    /// Constant path at `value` on `[0, horizon]`.
    pub fn constant(value: P, horizon: f64) -> Self {
        Self { times: vec![0.0], values: vec![value], horizon }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[P] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    pub fn first(&self) -> &P {
        &self.values[0]
    }

    pub fn last(&self) -> &P {
        self.values.last().unwrap()
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<P>, f64) {
        (self.times, self.values, self.horizon)
    }

    pub fn is_jump(&self, i: usize) -> bool {
        i > 0 && self.times[i] == self.times[i - 1] && self.values[i] != self.values[i - 1]
    }

    /// Indices `i` of post-jump samples.
    pub fn jump_indices(&self) -> Vec<usize> {
        (1..self.len()).filter(|&i| self.is_jump(i)).collect()
    }

    /// Jump mask aligned with the samples (true on post-jump rows).
    pub fn jump_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_jump(i)).collect()
    }

    pub fn has_jumps(&self) -> bool {
        (1..self.len()).any(|i| self.is_jump(i))
    }

    /// Right-continuous evaluation.
    pub fn value_at(&self, t: f64) -> P {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return self.values[0].clone();
        }
        let i = i - 1;
        if i + 1 == self.len() {
            return self.values[i].clone();
        }
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        if t == t0 {
            return self.values[i].clone();
        }
        self.values[i].geodesic(&self.values[i + 1], (t - t0) / (t1 - t0))
    }

    /// Left limit `x_{t−}`.
    pub fn left_limit(&self, t: f64) -> P {
        let i = self.times.partition_point(|&s| s < t);
        if i == 0 {
            return self.values[0].clone();
        }
        let i = i - 1;
        if i + 1 == self.len() {
            return self.values[i].clone();
        }
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        if t1 == t {
            return self.values[i + 1].clone();
        }
        self.values[i].geodesic(&self.values[i + 1], (t - t0) / (t1 - t0))
    }

    pub fn map<Q: Point>(&self, f: impl Fn(&P) -> Q) -> CadlagPath<Q> {
        CadlagPath {
            times: self.times.clone(),
            values: self.values.iter().map(f).collect(),
            horizon: self.horizon,
        }
    }

    /// Appends a hold sample at the horizon if the last sample precedes it.
    pub fn extended_to_horizon(&self) -> Self {
        let mut out = self.clone();
        if *self.times.last().unwrap() < self.horizon {
            out.times.push(self.horizon);
            out.values.push(self.last().clone());
        }
        out
    }

    /// Subdivides continuous segments so no step exceeds `time_res` in time
    /// or `value_res` in distance. Jumps are left untouched.
    pub fn densify(&self, time_res: f64, value_res: f64) -> Self {
        let mut times = vec![self.times[0]];
        let mut values = vec![self.values[0].clone()];
        for i in 1..self.len() {
            let dt = self.times[i] - self.times[i - 1];
            if dt > 0.0 {
                let dist = self.values[i - 1].dist(&self.values[i]);
                let mut k = 1usize;
                if time_res > 0.0 {
                    k = k.max((dt / time_res).ceil() as usize);
                }
                if value_res > 0.0 {
                    k = k.max((dist / value_res).ceil() as usize);
                }
                for j in 1..k {
                    let s = j as f64 / k as f64;
                    times.push(self.times[i - 1] + s * dt);
                    values.push(self.values[i - 1].geodesic(&self.values[i], s));
                }
            }
            times.push(self.times[i]);
            values.push(self.values[i].clone());
        }
        Self { times, values, horizon: self.horizon }
    }
}

impl CadlagPath<Vec<f64>> {
    /// Pointwise sum of two paths on the same sample grid.
    pub fn add(&self, other: &Self) -> Result<Self, PathError> {
        if self.times != other.times {
            return Err(PathError::InvalidParameter("paths must share their sample grid".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Self::new(self.times.clone(), values, self.horizon)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v.iter().map(|a| a * s).collect())
    }
}

/// Piecewise-linear monotone map between clocks, given by breakpoints
/// `(s_i, t_i)` non-decreasing in both coordinates. Equal `s` with distinct
/// `t` is a vertical piece; equal `t` with distinct `s` is a flat piece.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChange {
    breakpoints: Vec<(f64, f64)>,
}

impl TimeChange {
    pub fn new(mut breakpoints: Vec<(f64, f64)>) -> Result<Self, PathError> {
        breakpoints.dedup();
        // Drop breakpoints lying exactly on the chord of their neighbours.
        let mut kept: Vec<(f64, f64)> = Vec::with_capacity(breakpoints.len());
        for (i, &b) in breakpoints.iter().enumerate() {
            if let (Some(&a), Some(&c)) = (kept.last(), breakpoints.get(i + 1)) {
                if (b.0 - a.0) * (c.1 - a.1) == (b.1 - a.1) * (c.0 - a.0) && b.0 >= a.0 && c.0 >= b.0 && c.1 >= b.1 && b.1 >= a.1 {
                    continue;
                }
            }
            kept.push(b);
        }
        let breakpoints = kept;
        if breakpoints.is_empty() {
            return Err(PathError::Empty);
        }
        if breakpoints[0] != (0.0, 0.0) {
            return Err(PathError::NonZeroStart(breakpoints[0].0.max(breakpoints[0].1)));
        }
        for i in 1..breakpoints.len() {
            let (a, b) = (breakpoints[i - 1], breakpoints[i]);
            if !(b.0 >= a.0 && b.1 >= a.1) {
                return Err(PathError::NonMonotone { index: i });
            }
        }
        let &(s, t) = breakpoints.last().unwrap();
        if (s - t).abs() > 1e-12 * s.abs().max(1.0) {
            return Err(PathError::InvalidParameter(format!("time change must fix the horizon: ({s}, {t})")));
        }
        Ok(Self { breakpoints })
    }

    pub fn identity(horizon: f64) -> Self {
        let mut bp = vec![(0.0, 0.0)];
        if horizon > 0.0 {
            bp.push((horizon, horizon));
        }
        Self { breakpoints: bp }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn horizon(&self) -> f64 {
        self.breakpoints.last().unwrap().0
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, s: f64) -> f64 {
        let bp = &self.breakpoints;
        let i = bp.partition_point(|b| b.0 <= s);
        if i == 0 {
            return bp[0].1;
        }
        let i = i - 1;
        if i + 1 == bp.len() {
            return bp[i].1;
        }
        let ((s0, t0), (s1, t1)) = (bp[i], bp[i + 1]);
        t0 + (s - s0) / (s1 - s0) * (t1 - t0)
    }

    pub fn inverse(&self) -> Self {
        Self { breakpoints: self.breakpoints.iter().map(|&(s, t)| (t, s)).collect() }
    }

    pub fn is_bijective(&self) -> bool {
        self.breakpoints.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1)
    }

    /// `|λ| = sup_t |λ(t) − t|`, attained at a breakpoint.
    pub fn sup_deviation(&self) -> f64 {
        self.breakpoints.iter().fold(0.0, |m, &(s, t)| m.max((t - s).abs()))
    }

    /// `self ∘ other` for bijective maps.
    pub fn compose(&self, other: &Self) -> Result<Self, PathError> {
        if !self.is_bijective() || !other.is_bijective() {
            return Err(PathError::NonBijective);
        }
        let inv = other.inverse();
        let mut s: Vec<f64> = other.breakpoints.iter().map(|b| b.0).collect();
        s.extend(self.breakpoints.iter().map(|b| inv.eval(b.0)));
        s.sort_by(f64::total_cmp);
        s.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * a.abs().max(1.0));
        let bp = s.into_iter().map(|x| (x, self.eval(other.eval(x)))).collect();
        let mut out = Self::new(bp)?;
        let h = out.horizon();
        out.breakpoints.last_mut().unwrap().1 = h;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Returns `y ∘ λ`.
    Forward,
    /// Returns `y ∘ λ⁻¹`.
    Inverse,
}

/// Re-samples `y ∘ λ` (or `y ∘ λ⁻¹`) exactly: both maps are piecewise
/// affine, so the composition is determined by the union of breakpoints.
pub fn apply_time_change<P: Point>(
    y: &CadlagPath<P>,
    lambda: &TimeChange,
    direction: Direction,
) -> Result<CadlagPath<P>, PathError> {
    if !lambda.is_bijective() {
        return Err(PathError::NonBijective);
    }
    let lambda = match direction {
        Direction::Forward => lambda.clone(),
        Direction::Inverse => lambda.inverse(),
    };
    let horizon = y.horizon();
    if (lambda.horizon() - horizon).abs() > 1e-12 * horizon.max(1.0) {
        return Err(PathError::HorizonMismatch { change: lambda.horizon(), path: horizon });
    }
    let inv = lambda.inverse();
    let bps = lambda.breakpoints();
    let (mut times, mut values) = (Vec::new(), Vec::new());
    let mut push = |t: f64, v: P| {
        let t = times.last().map_or(t, |&p: &f64| t.max(p));
        times.push(t);
        values.push(v);
    };
    let mut b = 0;
    for (k, &u) in y.times().iter().enumerate() {
        while b < bps.len() && bps[b].1 < u {
            if k > 0 && bps[b].1 > y.times()[k - 1] {
                push(bps[b].0, y.value_at(bps[b].1));
            }
            b += 1;
        }
        let s = if u == 0.0 { 0.0 } else { inv.eval(u) };
        push(s, y.values()[k].clone());
    }
    for &(s, t) in &bps[b..] {
        if t > *y.times().last().unwrap() && t < horizon {
            push(s, y.last().clone());
        }
    }
    CadlagPath::new(times, values, horizon)
}

/// Options for [`interpolate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpOptions {
    /// Total fictitious-time scale `δ`.
    pub delta: f64,
    /// Samples per jump window; `None` uses the path function's default.
    pub samples: Option<usize>,
    /// Geometric ratio of the window series `r_k = ratio^k`.
    pub ratio: f64,
}

impl Default for InterpOptions {
    fn default() -> Self {
        Self { delta: 1.0, samples: None, ratio: 0.5 }
    }
}

impl InterpOptions {
    pub fn with_delta(delta: f64) -> Self {
        Self { delta, ..Self::default() }
    }
}

/// Jump window inserted by [`interpolate`].
#[derive(Debug, Clone, PartialEq)]
pub struct JumpWindow {
    /// Original jump time.
    pub time: f64,
    /// 1-based rank in the size ordering.
    pub rank: usize,
    /// Index in the original path of the post-jump sample.
    pub source: usize,
    /// Index range `start..=end` of the window in the interpolated path.
    pub start: usize,
    pub end: usize,
    /// Window length on the stretched clock, before rescaling.
    pub length: f64,
}

/// Result of [`interpolate`].
#[derive(Debug, Clone)]
pub struct Interpolation<P> {
    /// Continuous path `x^{φ,δ}` on `[0, T]`.
    pub path: CadlagPath<P>,
    /// `τ_x`: original clock to the rescaled clock.
    pub time_change: TimeChange,
    /// Position of each original sample in `path`.
    pub index_map: Vec<usize>,
    pub windows: Vec<JumpWindow>,
}

impl<P: Point> Interpolation<P> {
    /// Samples of the window for `windows[k]`.
    pub fn window_values(&self, k: usize) -> &[P] {
        let w = &self.windows[k];
        &self.path.values()[w.start..=w.end]
    }
}

/// Builds `x^{φ,δ}`: every jump becomes a fictitious-time window filled
/// with `φ`, larger jumps first (earlier on ties) receiving `δ·r_k`.
pub fn interpolate<P: Point>(
    x: &CadlagPath<P>,
    phi: &PathFunction,
    opts: InterpOptions,
) -> Result<Interpolation<P>, PathError> {
    if !(opts.delta > 0.0) || !opts.delta.is_finite() {
        return Err(PathError::InvalidParameter(format!("delta must be positive, got {}", opts.delta)));
    }
    if !(opts.ratio > 0.0 && opts.ratio < 1.0) {
        return Err(PathError::InvalidParameter(format!("ratio must lie in (0, 1), got {}", opts.ratio)));
    }
    let requested = opts.samples.unwrap_or_else(|| phi.default_samples());
    if requested < 2 {
        return Err(PathError::InvalidParameter("at least 2 samples per window".into()));
    }
    let segments = phi.window_segments(requested);

    let jumps = x.jump_indices();
    let mut ranked: Vec<(f64, usize)> =
        jumps.iter().map(|&i| (x.values()[i - 1].dist(&x.values()[i]), i)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut window_len = vec![0.0; x.len()];
    let mut rank_of = vec![0usize; x.len()];
    let mut factor = 1.0;
    for (k, &(_, i)) in ranked.iter().enumerate() {
        factor *= opts.ratio;
        window_len[i] = opts.delta * factor;
        rank_of[i] = k + 1;
    }
    let total: f64 = window_len.iter().sum();
    let horizon = x.horizon();
    if total > 0.0 && horizon <= 0.0 {
        return Err(PathError::InvalidParameter("cannot rescale jumps on a zero horizon".into()));
    }
    let stretched = horizon + total;
    let scale = if stretched > 0.0 { horizon / stretched } else { 1.0 };

    let (mut times, mut values) = (vec![0.0], vec![x.values()[0].clone()]);
    let mut index_map = vec![0usize; x.len()];
    let mut windows = Vec::with_capacity(jumps.len());
    let mut u = 0.0;
    let mut clock = vec![0.0; x.len()];
    for i in 1..x.len() {
        let (a, b) = (&x.values()[i - 1], &x.values()[i]);
        if window_len[i] > 0.0 {
            let w = window_len[i];
            let pts = P::phi_window(phi, a, b, segments)
                .map_err(|_| PathError::Domain { time: x.times()[i] })?;
            let start = values.len() - 1;
            for (j, p) in pts.into_iter().enumerate().skip(1) {
                times.push((u + w * j as f64 / segments as f64) * scale);
                values.push(p);
            }
            u += w;
            windows.push(JumpWindow {
                time: x.times()[i],
                rank: rank_of[i],
                source: i,
                start,
                end: values.len() - 1,
                length: w,
            });
        } else {
            u += x.times()[i] - x.times()[i - 1];
            times.push(u * scale);
            values.push(b.clone());
        }
        clock[i] = u * scale;
        index_map[i] = values.len() - 1;
    }
    for t in times.iter_mut() {
        *t = t.min(horizon);
    }
    let mut bp: Vec<(f64, f64)> = x.times().iter().zip(&clock).map(|(&t, &c)| (t, c.min(horizon))).collect();
    bp.push((horizon, horizon));
    let time_change = TimeChange::new(bp)?;
    let path = CadlagPath::new(times, values, horizon)?;
    Ok(Interpolation { path, time_change, index_map, windows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_jump() -> CadlagPath<Vec<f64>> {
        CadlagPath::step(vec![0.0, 0.5], vec![vec![0.0], vec![1.0]], 1.0).unwrap()
    }

    #[test]
    fn step_inserts_hold_samples() {
        let x = scalar_jump();
        assert_eq!(x.times(), &[0.0, 0.5, 0.5]);
        assert_eq!(x.jump_indices(), vec![2]);
        assert_eq!(x.value_at(0.49), vec![0.0]);
        assert_eq!(x.value_at(0.5), vec![1.0]);
        assert_eq!(x.left_limit(0.5), vec![0.0]);
        assert_eq!(x.value_at(0.9), vec![1.0]);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        let v = |a: f64| vec![a];
        assert_eq!(CadlagPath::<Vec<f64>>::new(vec![], vec![], 1.0), Err(PathError::Empty));
        assert!(matches!(CadlagPath::new(vec![0.1], vec![v(0.0)], 1.0), Err(PathError::NonZeroStart(_))));
        assert!(matches!(
            CadlagPath::new(vec![0.0, 0.5, 0.4], vec![v(0.0), v(1.0), v(2.0)], 1.0),
            Err(PathError::NonMonotone { index: 2 })
        ));
        assert!(matches!(
            CadlagPath::new(vec![0.0, 2.0], vec![v(0.0), v(1.0)], 1.0),
            Err(PathError::HorizonTooShort { .. })
        ));
        assert!(matches!(
            CadlagPath::new(vec![0.0, 0.5], vec![v(0.0), vec![1.0, 2.0]], 1.0),
            Err(PathError::DimensionMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn single_jump_interpolation() {
        let x = scalar_jump();
        let it = interpolate(&x, &PathFunction::linear(), InterpOptions::default()).unwrap();
        assert!(!it.path.has_jumps());
        assert_eq!(it.windows.len(), 1);
        assert_eq!(it.windows[0].length, 0.5);
        for (i, &k) in it.index_map.iter().enumerate() {
            assert_eq!(it.path.values()[k], x.values()[i]);
            let t = it.time_change.eval(x.times()[i]);
            assert!((it.path.value_at(t)[0] - x.value_at(x.times()[i])[0]).abs() < 1e-12);
        }
        assert!(!it.time_change.is_bijective());
        assert_eq!(it.path.horizon(), 1.0);
        assert!((it.path.times().last().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn continuous_path_unchanged() {
        let x = CadlagPath::polyline(vec![0.0, 0.3, 1.0], vec![vec![0.0], vec![2.0], vec![-1.0]]).unwrap();
        let it = interpolate(&x, &PathFunction::linear(), InterpOptions::default()).unwrap();
        assert_eq!(it.path, x);
        assert_eq!(it.time_change, TimeChange::identity(1.0));
    }

    #[test]
    fn windows_follow_size_order() {
        let x = CadlagPath::step(
            vec![0.0, 0.3, 0.7],
            vec![vec![0.0], vec![1.0], vec![3.0]],
            1.0,
        )
        .unwrap();
        let it = interpolate(&x, &PathFunction::linear(), InterpOptions::default()).unwrap();
        let by_time: Vec<(f64, f64)> = it.windows.iter().map(|w| (w.time, w.length)).collect();
        assert_eq!(by_time, vec![(0.3, 0.25), (0.7, 0.5)]);
    }

    #[test]
    fn ties_prefer_earlier_jump() {
        let x = CadlagPath::step(vec![0.0, 0.3, 0.7], vec![vec![0.0], vec![1.0], vec![0.0]], 1.0).unwrap();
        let it = interpolate(&x, &PathFunction::linear(), InterpOptions::default()).unwrap();
        assert_eq!(it.windows[0].rank, 1);
        assert_eq!(it.windows[1].rank, 2);
    }

    #[test]
    fn hoff_sample_and_area() {
        let phi = PathFunction::hoff(vec![0, 1]).unwrap();
        assert_eq!(phi.sample(&[0.0, 0.0], &[2.0, 4.0], 0.5), vec![2.0, 0.0]);
        assert_eq!(phi.sample(&[0.0, 0.0], &[2.0, 4.0], 0.75), vec![2.0, 2.0]);
        assert_eq!(phi.area_map(&[2.0, 4.0]), vec![4.0]);
        let rev = PathFunction::hoff(vec![1, 0]).unwrap();
        assert_eq!(rev.area_map(&[2.0, 4.0]), vec![-4.0]);
        assert!(PathFunction::hoff(vec![0, 0]).is_err());
        assert_eq!(phi.window_segments(8), 8);
        assert_eq!(PathFunction::hoff_default(3).window_segments(8), 9);
    }

    #[test]
    fn group_domain_error_reports_time() {
        let jump = Lie2Element::new(vec![1.0, 0.0], vec![0.3]).unwrap().exp();
        let x = CadlagPath::step(vec![0.0, 0.25], vec![G2Element::identity(2), jump], 1.0).unwrap();
        let err = interpolate(&x, &PathFunction::linear(), InterpOptions::default()).unwrap_err();
        assert_eq!(err, PathError::Domain { time: 0.25 });
        assert!(interpolate(&x, &PathFunction::log_linear(), InterpOptions::default()).is_ok());
    }

    #[test]
    fn custom_domain() {
        let phi = PathFunction::custom("positive", |x, y, s| x.to_vec().geodesic(&y.to_vec(), s), 1.0, 1.0)
            .with_domain(|x, y| y[0] >= x[0]);
        let x = CadlagPath::step(vec![0.0, 0.5], vec![vec![1.0], vec![0.0]], 1.0).unwrap();
        assert_eq!(
            interpolate(&x, &phi, InterpOptions::default()).unwrap_err(),
            PathError::Domain { time: 0.5 }
        );
    }

    #[test]
    fn time_change_round_trip() {
        let lam = TimeChange::new(vec![(0.0, 0.0), (0.3, 0.5), (0.8, 0.9), (1.0, 1.0)]).unwrap();
        let y = CadlagPath::step(vec![0.0, 0.2, 0.6], vec![vec![0.0], vec![1.0], vec![-1.0]], 1.0).unwrap();
        let fwd = apply_time_change(&y, &lam, Direction::Forward).unwrap();
        let back = apply_time_change(&fwd, &lam, Direction::Inverse).unwrap();
        // Every original sample reappears, in order, at its original time.
        let mut k = 0;
        for (t, v) in y.times().iter().zip(y.values()) {
            while !((back.times()[k] - t).abs() < 1e-12 && &back.values()[k] == v) {
                k += 1;
            }
        }
        let id = lam.compose(&lam.inverse()).unwrap();
        for s in [0.0, 0.1, 0.35, 0.77, 1.0] {
            assert!((id.eval(s) - s).abs() < 1e-12);
        }
        assert!((lam.sup_deviation() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn identity_time_change_is_noop() {
        let y = CadlagPath::step(vec![0.0, 0.2], vec![vec![0.0], vec![1.0]], 1.0).unwrap();
        let z = apply_time_change(&y, &TimeChange::identity(1.0), Direction::Forward).unwrap();
        assert_eq!(z, y);
    }

    #[test]
    fn non_bijective_rejected() {
        let x = scalar_jump();
        let it = interpolate(&x, &PathFunction::linear(), InterpOptions::default()).unwrap();
        assert_eq!(
            apply_time_change(&it.path, &it.time_change, Direction::Forward).unwrap_err(),
            PathError::NonBijective
        );
    }
}
