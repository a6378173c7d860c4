//! Canonical RDE solver (step-2 log-ODE on the interpolated driver), direct
//! Marcus SDE solver, stacked drivers and batch flow maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{G2Element, Lie2Element};
use crate::cadlag::{interpolate, CadlagPath, InterpOptions, PathError, PathFunction, TimeChange};
use crate::lift::RoughPath2;

/// States beyond this norm count as a blow-up.
pub const BLOW_UP: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RdeError {
    #[error("state blew up at t = {time}")]
    BlowUp { time: f64 },
    #[error("{what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

/// Vector fields `V_1, …, V_d` on `ℝᵉ`.
///
/// Layouts: `eval_into` writes `V_iᵏ(y)` at `i·e + k`; `jacobian_into`
/// writes `∂_l V_iᵏ(y)` at `(i·e + k)·e + l`.
pub trait VectorFields: Send + Sync {
    fn state_dim(&self) -> usize;
    fn driver_dim(&self) -> usize;
    fn eval_into(&self, y: &[f64], out: &mut [f64]);
    fn jacobian_into(&self, y: &[f64], out: &mut [f64]);
    /// Claimed Lipschitz regularity `γ`; informational only.
    fn smoothness(&self) -> f64 {
        f64::INFINITY
    }

    fn eval(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim() * self.driver_dim()];
        self.eval_into(y, &mut out);
        out
    }

    fn jacobian(&self, y: &[f64]) -> Vec<f64> {
        let e = self.state_dim();
        let mut out = vec![0.0; self.driver_dim() * e * e];
        self.jacobian_into(y, &mut out);
        out
    }

    /// `[V_i, V_j](y) = DV_j(y) V_i(y) − DV_i(y) V_j(y)`.
    fn bracket(&self, i: usize, j: usize, y: &[f64]) -> Vec<f64> {
        let e = self.state_dim();
        let v = self.eval(y);
        let dv = self.jacobian(y);
        (0..e)
            .map(|k| {
                (0..e)
                    .map(|l| dv[(j * e + k) * e + l] * v[i * e + l] - dv[(i * e + k) * e + l] * v[j * e + l])
                    .sum()
            })
            .collect()
    }
}

/// `V_i(y) = A_i y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFields {
    e: usize,
    /// Row-major `e×e` matrices, one per driving direction.
    matrices: Vec<Vec<f64>>,
}

impl LinearFields {
    pub fn new(e: usize, matrices: Vec<Vec<f64>>) -> Result<Self, RdeError> {
        for m in &matrices {
            if m.len() != e * e {
                return Err(RdeError::Dimension { what: "matrix entries", expected: e * e, got: m.len() });
            }
        }
        if matrices.is_empty() {
            return Err(RdeError::InvalidOption("at least one matrix".into()));
        }
        Ok(Self { e, matrices })
    }

    pub fn matrices(&self) -> &[Vec<f64>] {
        &self.matrices
    }
}

impl VectorFields for LinearFields {
    fn state_dim(&self) -> usize {
        self.e
    }

    fn driver_dim(&self) -> usize {
        self.matrices.len()
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        let e = self.e;
        for (i, a) in self.matrices.iter().enumerate() {
            for k in 0..e {
                out[i * e + k] = (0..e).map(|l| a[k * e + l] * y[l]).sum();
            }
        }
    }

    fn jacobian_into(&self, _y: &[f64], out: &mut [f64]) {
        let e = self.e;
        for (i, a) in self.matrices.iter().enumerate() {
            out[i * e * e..(i + 1) * e * e].copy_from_slice(a);
        }
    }
}

/// Planar rotations `V_i(y) = ω_i J (y − c_i)` about centres `c_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationFields {
    centers: Vec<[f64; 2]>,
    rates: Vec<f64>,
}

impl RotationFields {
    pub fn new(centers: Vec<[f64; 2]>, rates: Vec<f64>) -> Result<Self, RdeError> {
        if centers.len() != rates.len() || centers.is_empty() {
            return Err(RdeError::Dimension { what: "rotation rates", expected: centers.len(), got: rates.len() });
        }
        Ok(Self { centers, rates })
    }

    /// Unit-rate rotations about the origin and about `(1, 0)`.
    pub fn standard() -> Self {
        Self { centers: vec![[0.0, 0.0], [1.0, 0.0]], rates: vec![1.0, 1.0] }
    }
}

impl VectorFields for RotationFields {
    fn state_dim(&self) -> usize {
        2
    }

    fn driver_dim(&self) -> usize {
        self.centers.len()
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        for (i, (c, w)) in self.centers.iter().zip(&self.rates).enumerate() {
            out[2 * i] = -w * (y[1] - c[1]);
            out[2 * i + 1] = w * (y[0] - c[0]);
        }
    }

    fn jacobian_into(&self, _y: &[f64], out: &mut [f64]) {
        for (i, w) in self.rates.iter().enumerate() {
            out[4 * i..4 * i + 4].copy_from_slice(&[0.0, -w, *w, 0.0]);
        }
    }
}

/// Degree-2 polynomial fields
/// `V_iᵏ(y) = b_ikᵏ + Σ_l A_ikl y_l + Σ_{l,m} Q_iklm y_l y_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFields {
    e: usize,
    d: usize,
    /// `d×e`.
    constant: Vec<f64>,
    /// `d×e×e`.
    linear: Vec<f64>,
    /// `d×e×e×e`.
    quadratic: Vec<f64>,
}

impl PolynomialFields {
    pub fn new(e: usize, d: usize, constant: Vec<f64>, linear: Vec<f64>, quadratic: Vec<f64>) -> Result<Self, RdeError> {
        let check = |what, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(RdeError::Dimension { what, expected, got })
            }
        };
        check("constant terms", d * e, constant.len())?;
        check("linear terms", d * e * e, linear.len())?;
        check("quadratic terms", d * e * e * e, quadratic.len())?;
        Ok(Self { e, d, constant, linear, quadratic })
    }
}

impl VectorFields for PolynomialFields {
    fn state_dim(&self) -> usize {
        self.e
    }

    fn driver_dim(&self) -> usize {
        self.d
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        let e = self.e;
        for i in 0..self.d {
            for k in 0..e {
                let ik = i * e + k;
                let mut v = self.constant[ik];
                for l in 0..e {
                    v += self.linear[ik * e + l] * y[l];
                    for m in 0..e {
                        v += self.quadratic[(ik * e + l) * e + m] * y[l] * y[m];
                    }
                }
                out[ik] = v;
            }
        }
    }

    fn jacobian_into(&self, y: &[f64], out: &mut [f64]) {
        let e = self.e;
        for i in 0..self.d {
            for k in 0..e {
                let ik = i * e + k;
                for l in 0..e {
                    let mut v = self.linear[ik * e + l];
                    for m in 0..e {
                        v += (self.quadratic[(ik * e + l) * e + m] + self.quadratic[(ik * e + m) * e + l]) * y[m];
                    }
                    out[ik * e + l] = v;
                }
            }
        }
    }
}

/// `V ≡ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroFields {
    pub e: usize,
    pub d: usize,
}

impl VectorFields for ZeroFields {
    fn state_dim(&self) -> usize {
        self.e
    }

    fn driver_dim(&self) -> usize {
        self.d
    }

    fn eval_into(&self, _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn jacobian_into(&self, _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Fields of the enlarged system `U_i(y, z) = (V_i(y), Σ_k W_k(z) V_iᵏ(y))`.
pub struct StackedFields<'a> {
    v: &'a dyn VectorFields,
    w: &'a dyn VectorFields,
}

/// Builds the stacked system whose `z`-component solves `dz = W(z) dy`
/// along the solution `y` of `dy = V(y) d𝐱`.
pub fn stack_drivers<'a>(v: &'a dyn VectorFields, w: &'a dyn VectorFields) -> Result<StackedFields<'a>, RdeError> {
    if w.driver_dim() != v.state_dim() {
        return Err(RdeError::Dimension { what: "driving directions of W", expected: v.state_dim(), got: w.driver_dim() });
    }
    Ok(StackedFields { v, w })
}

impl VectorFields for StackedFields<'_> {
    fn state_dim(&self) -> usize {
        self.v.state_dim() + self.w.state_dim()
    }

    fn driver_dim(&self) -> usize {
        self.v.driver_dim()
    }

    fn eval_into(&self, yz: &[f64], out: &mut [f64]) {
        let (e, n) = (self.v.state_dim(), self.w.state_dim());
        let (y, z) = yz.split_at(e);
        let vv = self.v.eval(y);
        let ww = self.w.eval(z);
        let s = e + n;
        for i in 0..self.v.driver_dim() {
            out[i * s..i * s + e].copy_from_slice(&vv[i * e..(i + 1) * e]);
            for r in 0..n {
                out[i * s + e + r] = (0..e).map(|k| ww[k * n + r] * vv[i * e + k]).sum();
            }
        }
    }

    fn jacobian_into(&self, yz: &[f64], out: &mut [f64]) {
        let (e, n) = (self.v.state_dim(), self.w.state_dim());
        let (y, z) = yz.split_at(e);
        let (vv, dv) = (self.v.eval(y), self.v.jacobian(y));
        let (ww, dw) = (self.w.eval(z), self.w.jacobian(z));
        let s = e + n;
        out.fill(0.0);
        for i in 0..self.v.driver_dim() {
            for k in 0..e {
                for l in 0..e {
                    out[(i * s + k) * s + l] = dv[(i * e + k) * e + l];
                }
            }
            for r in 0..n {
                let row = (i * s + e + r) * s;
                for l in 0..e {
                    out[row + l] = (0..e).map(|k| ww[k * n + r] * dv[(i * e + k) * e + l]).sum();
                }
                for q in 0..n {
                    out[row + e + q] = (0..e).map(|k| dw[(k * n + r) * n + q] * vv[i * e + k]).sum();
                }
            }
        }
    }
}

/// Built-in field families, serializable for the CLI and experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Linear { e: usize, matrices: Vec<Vec<f64>> },
    Rotation { centers: Vec<[f64; 2]>, rates: Vec<f64> },
    Polynomial { e: usize, d: usize, constant: Vec<f64>, linear: Vec<f64>, quadratic: Vec<f64> },
    Zero { e: usize, d: usize },
}

impl FieldSpec {
    pub fn build(&self) -> Result<Box<dyn VectorFields>, RdeError> {
        Ok(match self.clone() {
            FieldSpec::Linear { e, matrices } => Box::new(LinearFields::new(e, matrices)?),
            FieldSpec::Rotation { centers, rates } => Box::new(RotationFields::new(centers, rates)?),
            FieldSpec::Polynomial { e, d, constant, linear, quadratic } => {
                Box::new(PolynomialFields::new(e, d, constant, linear, quadratic)?)
            }
            FieldSpec::Zero { e, d } => Box::new(ZeroFields { e, d }),
        })
    }

    /// Named built-ins: `rotation`, `linear` (a non-commuting planar pair)
    /// and `polynomial` (a bounded-coefficient quadratic planar pair).
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "rotation" => {
                let r = RotationFields::standard();
                Some(FieldSpec::Rotation { centers: r.centers, rates: r.rates })
            }
            "linear" => Some(FieldSpec::Linear {
                e: 2,
                matrices: vec![vec![0.0, -0.5, 0.5, 0.0], vec![0.5, 0.0, 0.0, -0.5]],
            }),
            "polynomial" => {
                let (e, d) = (2, 2);
                let constant = vec![1.0, 0.0, 0.0, 1.0];
                let linear = vec![0.0, -0.3, 0.3, 0.0, 0.2, 0.0, 0.0, -0.2];
                let mut quadratic = vec![0.0; d * e * e * e];
                let at = |i: usize, k: usize, l: usize, m: usize| ((i * e + k) * e + l) * e + m;
                quadratic[at(0, 1, 0, 0)] = -0.1;
                quadratic[at(1, 0, 0, 1)] = 0.1;
                Some(FieldSpec::Polynomial { e, d, constant, linear, quadratic })
            }
            _ => None,
        }
    }
}

/// RK4 flow of `ż = w(z)` over `[0, h]` with `substeps` equal steps.
pub fn flow_exp(
    w: impl Fn(&[f64], &mut [f64]),
    y0: &[f64],
    h: f64,
    substeps: usize,
) -> Result<Vec<f64>, RdeError> {
    if substeps == 0 {
        return Err(RdeError::InvalidOption("substeps must be at least 1".into()));
    }
    let e = y0.len();
    let dt = h / substeps as f64;
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; e], vec![0.0; e], vec![0.0; e], vec![0.0; e], vec![0.0; e]);
    for s in 0..substeps {
        w(&y, &mut k1);
        for l in 0..e {
            tmp[l] = y[l] + 0.5 * dt * k1[l];
        }
        w(&tmp, &mut k2);
        for l in 0..e {
            tmp[l] = y[l] + 0.5 * dt * k2[l];
        }
        w(&tmp, &mut k3);
        for l in 0..e {
            tmp[l] = y[l] + dt * k3[l];
        }
        w(&tmp, &mut k4);
        let mut norm2 = 0.0;
        for l in 0..e {
            y[l] += dt / 6.0 * (k1[l] + 2.0 * k2[l] + 2.0 * k3[l] + k4[l]);
            norm2 += y[l] * y[l];
        }
        if !norm2.is_finite() || norm2 > BLOW_UP * BLOW_UP {
            return Err(RdeError::BlowUp { time: (s + 1) as f64 * dt });
        }
    }
    Ok(y)
}

/// Log-ODE step field `Σ uⁱ V_i + Σ_{i<j} a^{ij} [V_i, V_j]`.
struct StepField<'a> {
    fields: &'a dyn VectorFields,
    log: &'a Lie2Element,
    has_area: bool,
}

impl StepField<'_> {
    fn eval(&self, y: &[f64], out: &mut [f64]) {
        let e = self.fields.state_dim();
        let d = self.fields.driver_dim();
        let v = self.fields.eval(y);
        out.fill(0.0);
        let u = self.log.vec();
        for i in 0..d {
            if u[i] != 0.0 {
                for k in 0..e {
                    out[k] += u[i] * v[i * e + k];
                }
            }
        }
        if !self.has_area {
            return;
        }
        let dv = self.fields.jacobian(y);
        for i in 0..d {
            for j in i + 1..d {
                let a = self.log.area(i, j);
                if a == 0.0 {
                    continue;
                }
                for k in 0..e {
                    let mut b = 0.0;
                    for l in 0..e {
                        b += dv[(j * e + k) * e + l] * v[i * e + l] - dv[(i * e + k) * e + l] * v[j * e + l];
                    }
                    out[k] += a * b;
                }
            }
        }
    }
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Base RK4 substeps per increment.
    pub substeps: usize,
    /// Substeps scale with `ceil(N(increment) / norm_scale)`.
    pub norm_scale: f64,
    /// Interpolation settings for the canonical solver.
    pub interp: InterpOptions,
    /// Also integrate every step with doubled substeps and report the
    /// largest difference.
    pub error_estimate: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { substeps: 4, norm_scale: 0.25, interp: InterpOptions::default(), error_estimate: false }
    }
}

impl SolverOptions {
    fn substeps_for(&self, norm: f64) -> usize {
        self.substeps * ((norm / self.norm_scale).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub steps: usize,
    pub substeps: usize,
    pub max_local_error: Option<f64>,
}

/// Solution sampled at the driver's original sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct RdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub horizon: f64,
    /// Time change of the interpolated driver; identity for the Marcus solver.
    pub time_change: TimeChange,
    pub diagnostics: Diagnostics,
}

impl RdeSolution {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("solution has at least one state")
    }

    /// Solution as a càdlàg path on the original clock.
    pub fn to_path(&self) -> CadlagPath<Vec<f64>> {
        CadlagPath::new(self.times.clone(), self.states.clone(), self.horizon).expect("solver output is a valid path")
    }

    /// `max_i |y_i − ȳ_i|` over states on the same grid.
    pub fn sup_gap(&self, other: &Self) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Interpolated driver, reusable across initial conditions.
#[derive(Debug, Clone)]
pub struct PreparedDriver {
    logs: Vec<Lie2Element>,
    norms: Vec<f64>,
    stretched_times: Vec<f64>,
    index_map: Vec<usize>,
    times: Vec<f64>,
    horizon: f64,
    time_change: TimeChange,
    dim: usize,
}

impl PreparedDriver {
    /// Interpolates `x` with `φ` and stores the log of every increment.
    pub fn new(x: &RoughPath2, phi: &PathFunction, opts: &SolverOptions) -> Result<Self, RdeError> {
        let it = interpolate(x.path(), phi, opts.interp)?;
        let pts = it.path.values();
        let mut logs = Vec::with_capacity(pts.len().saturating_sub(1));
        let mut norms = Vec::with_capacity(logs.capacity());
        for w in pts.windows(2) {
            let inc = w[0].increment_to(&w[1]);
            norms.push(inc.hom_norm());
            logs.push(inc.log());
        }
        Ok(Self {
            logs,
            norms,
            stretched_times: it.path.times().to_vec(),
            index_map: it.index_map,
            times: x.times().to_vec(),
            horizon: x.horizon(),
            time_change: it.time_change,
            dim: x.dim(),
        })
    }

    /// Integrates the log-ODE scheme from `y0` and pulls back to the
    /// original clock.
    pub fn solve(&self, fields: &dyn VectorFields, y0: &[f64], opts: &SolverOptions) -> Result<RdeSolution, RdeError> {
        check_dims(fields, self.dim, y0)?;
        let mut states = Vec::with_capacity(self.logs.len() + 1);
        states.push(y0.to_vec());
        let mut diag = Diagnostics { steps: self.logs.len(), ..Diagnostics::default() };
        let mut err_max: f64 = 0.0;
        let inverse = self.time_change.inverse();
        for (k, (log, &norm)) in self.logs.iter().zip(&self.norms).enumerate() {
            let y = states.last().unwrap();
            if norm == 0.0 {
                states.push(y.clone());
                continue;
            }
            let field = StepField { fields, log, has_area: log.area_norm() > 0.0 };
            let n = opts.substeps_for(norm);
            diag.substeps += n;
            let next = flow_exp(|z, out| field.eval(z, out), y, 1.0, n).map_err(|_| RdeError::BlowUp {
                time: inverse.eval(self.stretched_times[k + 1]),
            })?;
            if opts.error_estimate {
                let fine = flow_exp(|z, out| field.eval(z, out), y, 1.0, 2 * n)?;
                let gap = next.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                err_max = err_max.max(gap);
            }
            states.push(next);
        }
        diag.max_local_error = opts.error_estimate.then_some(err_max);
        Ok(RdeSolution {
            times: self.times.clone(),
            states: self.index_map.iter().map(|&k| states[k].clone()).collect(),
            horizon: self.horizon,
            time_change: self.time_change.clone(),
            diagnostics: diag,
        })
    }
}

fn check_dims(fields: &dyn VectorFields, d: usize, y0: &[f64]) -> Result<(), RdeError> {
    if fields.driver_dim() != d {
        return Err(RdeError::Dimension { what: "driver dimension", expected: fields.driver_dim(), got: d });
    }
    if fields.state_dim() != y0.len() {
        return Err(RdeError::Dimension { what: "initial state", expected: fields.state_dim(), got: y0.len() });
    }
    Ok(())
}

/// Solves `dy = V(y) d(𝐱, φ)`: interpolate with `φ`, run the step-2
/// log-ODE scheme on the continuous driver, and read the states back at
/// the original sample times.
pub fn solve_canonical_rde(
    x: &RoughPath2,
    phi: &PathFunction,
    fields: &dyn VectorFields,
    y0: &[f64],
    opts: &SolverOptions,
) -> Result<RdeSolution, RdeError> {
    PreparedDriver::new(x, phi, opts)?.solve(fields, y0, opts)
}

/// Marcus SDE along a sample skeleton: every increment `ΔX` applies the
/// unit-time flow of `Σ ΔXⁱ V_i`.
pub fn solve_marcus_sde(
    x: &CadlagPath<Vec<f64>>,
    fields: &dyn VectorFields,
    y0: &[f64],
    opts: &SolverOptions,
) -> Result<RdeSolution, RdeError> {
    check_dims(fields, x.dim(), y0)?;
    let mut states = Vec::with_capacity(x.len());
    states.push(y0.to_vec());
    let mut diag = Diagnostics { steps: x.len() - 1, ..Diagnostics::default() };
    for (k, w) in x.values().windows(2).enumerate() {
        let inc: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
        let y = states.last().unwrap();
        let norm = crate::algebra::norm2(&inc);
        if norm == 0.0 {
            states.push(y.clone());
            continue;
        }
        let log = Lie2Element::from_vec(inc);
        let field = StepField { fields, log: &log, has_area: false };
        let n = opts.substeps_for(norm);
        diag.substeps += n;
        let next = flow_exp(|z, out| field.eval(z, out), y, 1.0, n)
            .map_err(|_| RdeError::BlowUp { time: x.times()[k + 1] })?;
        states.push(next);
    }
    Ok(RdeSolution {
        times: x.times().to_vec(),
        states,
        horizon: x.horizon(),
        time_change: TimeChange::identity(x.horizon()),
        diagnostics: diag,
    })
}

/// Solves from every initial condition in `y0s`, sharing one interpolated
/// driver. Results keep the input order.
pub fn flow_map(
    x: &RoughPath2,
    phi: &PathFunction,
    fields: &dyn VectorFields,
    y0s: &[Vec<f64>],
    opts: &SolverOptions,
) -> Result<Vec<RdeSolution>, RdeError> {
    let driver = PreparedDriver::new(x, phi, opts)?;
    y0s.par_iter().map(|y0| driver.solve(fields, y0, opts)).collect()
}

/// `exp(Σ ΔXⁱ V_i)` for a single increment, as used at Marcus jumps.
pub fn marcus_jump(fields: &dyn VectorFields, y: &[f64], jump: &[f64], opts: &SolverOptions) -> Result<Vec<f64>, RdeError> {
    let log = Lie2Element::from_vec(jump.to_vec());
    let field = StepField { fields, log: &log, has_area: false };
    flow_exp(|z, out| field.eval(z, out), y, 1.0, opts.substeps_for(G2Element::from_increment(jump).hom_norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift::marcus_lift;

    #[test]
    fn flow_of_zero_and_constant_fields() {
        let y = flow_exp(|_, out| out.fill(0.0), &[1.0, 2.0], 1.0, 4).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);
        let y = flow_exp(|_, out| out.copy_from_slice(&[0.5, -1.0]), &[1.0, 2.0], 2.0, 4).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-15 && (y[1] - 0.0).abs() < 1e-15);
        assert!(flow_exp(|_, out| out.fill(0.0), &[1.0], 1.0, 0).is_err());
    }

    #[test]
    fn blow_up_reports_time() {
        let err = flow_exp(|z, out| out[0] = z[0] * z[0], &[1.0], 2.0, 400).unwrap_err();
        match err {
            RdeError::BlowUp { time } => assert!(time > 0.9 && time < 1.1, "{time}"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn single_jump_gives_exponential() {
        let x = CadlagPath::step(vec![0.0, 0.5], vec![vec![0.0], vec![1.0]], 1.0).unwrap();
        let v = LinearFields::new(1, vec![vec![1.0]]).unwrap();
        let e = 2.0 * 1f64.exp();
        for (base, tol) in [(4, 1e-6), (16, 1e-8)] {
            let opts = SolverOptions { substeps: base, ..SolverOptions::default() };
            let a = solve_canonical_rde(&marcus_lift(&x), &PathFunction::log_linear(), &v, &[2.0], &opts).unwrap();
            let b = solve_marcus_sde(&x, &v, &[2.0], &opts).unwrap();
            assert!((a.final_state()[0] - e).abs() < tol);
            assert!((b.final_state()[0] - e).abs() < tol);
        }
        let opts = SolverOptions::default();
        let a = solve_canonical_rde(&marcus_lift(&x), &PathFunction::log_linear(), &v, &[2.0], &opts).unwrap();
        assert_eq!(a.times, x.times());
        assert_eq!(a.states[1], vec![2.0]);
    }

    #[test]
    fn zero_fields_constant_solution() {
        let x = CadlagPath::polyline(vec![0.0, 0.5, 1.0], vec![vec![0.0, 0.0], vec![1.0, 3.0], vec![-2.0, 1.0]]).unwrap();
        let v = ZeroFields { e: 3, d: 2 };
        let s = solve_canonical_rde(&marcus_lift(&x), &PathFunction::linear(), &v, &[1.0, 2.0, 3.0], &SolverOptions::default()).unwrap();
        assert!(s.states.iter().all(|y| y == &vec![1.0, 2.0, 3.0]));
    }

    #[test]
    fn dimension_checks() {
        let x = CadlagPath::polyline(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let v = LinearFields::new(1, vec![vec![1.0]]).unwrap();
        assert!(matches!(solve_marcus_sde(&x, &v, &[1.0], &SolverOptions::default()), Err(RdeError::Dimension { .. })));
        let w = LinearFields::new(2, vec![vec![0.0; 4], vec![0.0; 4]]).unwrap();
        assert!(stack_drivers(&v, &w).is_err());
    }

    fn finite_difference_check(f: &dyn VectorFields, y: &[f64]) {
        let e = f.state_dim();
        let jac = f.jacobian(y);
        let h = 1e-6;
        for l in 0..e {
            let (mut yp, mut ym) = (y.to_vec(), y.to_vec());
            yp[l] += h;
            ym[l] -= h;
            let (vp, vm) = (f.eval(&yp), f.eval(&ym));
            for i in 0..f.driver_dim() {
                for k in 0..e {
                    let fd = (vp[i * e + k] - vm[i * e + k]) / (2.0 * h);
                    let an = jac[(i * e + k) * e + l];
                    assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "{i} {k} {l}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn builtin_jacobians_match_finite_differences() {
        for name in ["rotation", "linear", "polynomial"] {
            let f = FieldSpec::builtin(name).unwrap().build().unwrap();
            finite_difference_check(f.as_ref(), &[0.3, -0.7]);
        }
        let v = FieldSpec::builtin("polynomial").unwrap().build().unwrap();
        let w = FieldSpec::builtin("rotation").unwrap().build().unwrap();
        let s = stack_drivers(v.as_ref(), w.as_ref()).unwrap();
        finite_difference_check(&s, &[0.3, -0.7, 1.1, 0.4]);
    }
}
