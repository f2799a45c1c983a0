//! Joint synthesis of the observer gain `L` and the minimum sensor precision
//! for a guaranteed H2 or H∞ bound on the estimation error.
//!
//! With `X ≻ 0`, `Y = X L` and `β` one entry per sensor, the H2 problem is
//!
//! ```text
//! min ‖β‖_p  s.t.  ⎡M₁₁  M₁₂  Y       ⎤
//!                  ⎢M₁₂ᵀ −I   0       ⎥ ≺ 0,   ⎡−Q   C_z⎤ ≺ 0,   trace Q < γ²
//!                  ⎣Yᵀ   0    −diag β ⎦        ⎣C_zᵀ −X ⎦
//! ```
//!
//! and the H∞ problem is
//!
//! ```text
//! min ‖β‖_p  s.t.  ⎡M₁₁  M₁₂   C_zᵀ  Y         ⎤
//!                  ⎢M₁₂ᵀ −γ²I  0     0         ⎥ ≺ 0
//!                  ⎢C_z  0     −I    0         ⎥
//!                  ⎣Yᵀ   0     0     −γ² diag β⎦
//! ```
//!
//! where `M₁₁ = sym(X A(ρ) + Y C_y(ρ))` and `M₁₂ = X B_d(ρ) S_d + Y D_d(ρ) S_d`.
//! Each block is imposed at every vertex of the parameter box with a single
//! shared `(X, Y, Q, β)`.
//!
//! Eliminating the last block row by a Schur complement leaves the term
//! `Y diag(β)⁻¹ Yᵀ`, which is `X L S_n S_nᵀ Lᵀ X` for `S_n = diag(1/√β)`. The
//! sensor noise amplitude is therefore `1/√β`, and the precision (inverse
//! noise amplitude) is `κ = √β`; [`PrecisionMapping::Sqrt`] is the default for
//! that reason. The other mappings are kept so that the frozen-parameter
//! norm oracles can be run against them.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lmi::{
    solve_with, BlockBuilder, LinExpr, LmiBlock, LmiProgram, NormOrder, Objective, Sense, SolveStatus, SolverSettings,
    VarKind,
};
use crate::plant::LpvPlant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    H2,
    Hinf,
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h2" => Ok(NormKind::H2),
            "hinf" | "h-inf" | "hinfinity" => Ok(NormKind::Hinf),
            other => Err(Error::InvalidArgument(format!("unknown norm `{other}`"))),
        }
    }
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormKind::H2 => "h2",
            NormKind::Hinf => "hinf",
        })
    }
}

/// How the solved `β` is turned into per-sensor precision `κ`. Noise
/// amplitude is always `1/κ`, so the LMI-side noise scaling is `diag(1/κ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionMapping {
    /// `κ = √β`
    #[default]
    Sqrt,
    /// `κ = √(β/γ)`
    SqrtOverGamma,
    /// `κ = 1/√β`
    InverseSqrt,
}

impl PrecisionMapping {
    pub const ALL: [PrecisionMapping; 3] =
        [PrecisionMapping::Sqrt, PrecisionMapping::SqrtOverGamma, PrecisionMapping::InverseSqrt];

    pub fn kappa(&self, beta: f64, gamma: f64) -> f64 {
        match self {
            PrecisionMapping::Sqrt => beta.sqrt(),
            PrecisionMapping::SqrtOverGamma => (beta / gamma).sqrt(),
            PrecisionMapping::InverseSqrt => 1.0 / beta.sqrt(),
        }
    }
}

/// Channels whose `β` falls below this fraction of the largest `β` are
/// treated as unused.
pub const SPARSITY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SynthesisRequest {
    pub plant: LpvPlant,
    pub norm: NormKind,
    pub gamma: f64,
    pub p: NormOrder,
    pub eps: f64,
    /// Scheduling points at which the LMIs are imposed; box vertices if `None`.
    pub vertex_set: Option<Vec<Vec<f64>>>,
    /// Optional bound `|λ(A(ρ)+L C_y(ρ))| < r` imposed at every vertex.
    pub pole_radius: Option<f64>,
    /// Optional upper bounds `β_i ≤ cap_i`.
    pub beta_cap: Option<Vec<f64>>,
    pub mapping: PrecisionMapping,
    /// Search for the smallest feasible γ when the requested one fails.
    pub advise_on_infeasible: bool,
    pub solver: SolverSettings,
}

impl SynthesisRequest {
    pub fn new(plant: LpvPlant, norm: NormKind, gamma: f64) -> Self {
        Self {
            plant,
            norm,
            gamma,
            p: NormOrder::One,
            eps: 1e-8,
            vertex_set: None,
            pole_radius: None,
            beta_cap: None,
            mapping: PrecisionMapping::Sqrt,
            advise_on_infeasible: true,
            solver: SolverSettings::default(),
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument("gamma must be positive".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument("eps must be positive".into()));
        }
        if let Some(v) = &self.vertex_set {
            if v.is_empty() {
                return Err(Error::InvalidArgument("vertex set is empty".into()));
            }
        }
        if let Some(r) = self.pole_radius {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument("pole radius must be positive".into()));
            }
        }
        if let Some(cap) = &self.beta_cap {
            if cap.len() != self.plant.n_y() {
                return Err(Error::Dimension("beta cap length differs from sensor count".into()));
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        self.vertex_set.clone().unwrap_or_else(|| self.plant.param_box.vertices())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl From<SolveStatus> for SynthesisStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => SynthesisStatus::Optimal,
            SolveStatus::Infeasible => SynthesisStatus::Infeasible,
            SolveStatus::Unbounded => SynthesisStatus::Unbounded,
            SolveStatus::NumericalFailure => SynthesisStatus::NumericalFailure,
        }
    }
}

/// Largest eigenvalue of one LMI block at the solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockResidual {
    pub label: String,
    pub rho: Option<Vec<f64>>,
    pub max_eigenvalue: f64,
}

/// Solved certificate and the observer it defines.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverDesign {
    pub l: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub q: Option<DMatrix<f64>>,
    pub beta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub residuals: Vec<BlockResidual>,
}

impl ObserverDesign {
    /// `S_n = diag(1/κ)`.
    pub fn noise_scaling(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(self.kappa.len(), self.kappa.iter().map(|k| 1.0 / k)))
    }

    pub fn active_channels(&self) -> Vec<bool> {
        active_channels(&self.beta)
    }

    /// Gain with the columns of unused sensors set to zero.
    pub fn pruned_gain(&self) -> DMatrix<f64> {
        let mut l = self.l.clone();
        for (j, active) in self.active_channels().into_iter().enumerate() {
            if !active {
                l.column_mut(j).fill(0.0);
            }
        }
        l
    }

    pub fn worst_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.max_eigenvalue).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn active_channels(beta: &[f64]) -> Vec<bool> {
    let max = beta.iter().copied().fold(0.0, f64::max);
    beta.iter().map(|b| *b > SPARSITY_THRESHOLD * max).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub norm: NormKind,
    pub gamma: f64,
    pub p: NormOrder,
    pub eps: f64,
    pub mapping: PrecisionMapping,
    pub status: SynthesisStatus,
    pub objective_value: Option<f64>,
    pub design: Option<ObserverDesign>,
    /// Smallest feasible γ found when the requested one was infeasible.
    pub advisory_gamma: Option<f64>,
}

impl SynthesisResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SynthesisStatus::Optimal && self.design.is_some()
    }
}

pub fn synth_h2(req: &SynthesisRequest) -> Result<SynthesisResult> {
    if req.norm != NormKind::H2 {
        return Err(Error::InvalidArgument("synth_h2 called with a non-H2 request".into()));
    }
    synthesize(req)
}

pub fn synth_hinf(req: &SynthesisRequest) -> Result<SynthesisResult> {
    if req.norm != NormKind::Hinf {
        return Err(Error::InvalidArgument("synth_hinf called with a non-H∞ request".into()));
    }
    synthesize(req)
}

/// Solve the request, searching for an advisory γ when it is infeasible.
pub fn synthesize(req: &SynthesisRequest) -> Result<SynthesisResult> {
    let mut result = solve_once(req)?;
    if req.advise_on_infeasible && result.status == SynthesisStatus::Infeasible {
        result.advisory_gamma = advisory_gamma(req)?;
    }
    Ok(result)
}

struct Layout {
    x: crate::lmi::MatrixVar,
    y: crate::lmi::MatrixVar,
    beta: crate::lmi::MatrixVar,
    q: Option<crate::lmi::MatrixVar>,
}

/// Builds the LMI program for a request; blocks are returned with the
/// scheduling point they were imposed at.
fn build_program(req: &SynthesisRequest) -> Result<(LmiProgram, Layout, Vec<(Option<Vec<f64>>, LmiBlock)>)> {
    let plant = &req.plant;
    let (nx, ny, nd, nz) = (plant.n_x(), plant.n_y(), plant.n_d(), plant.n_z());
    let gamma2 = req.gamma * req.gamma;
    let s_d = plant.s_d_matrix();

    let mut prog = LmiProgram::new();
    let x = prog.declare_var("X", VarKind::Symmetric(nx));
    let y = prog.declare_var("Y", VarKind::Rectangular(nx, ny));
    let beta = prog.declare_var("beta", VarKind::Diagonal(ny));
    let q = (req.norm == NormKind::H2).then(|| prog.declare_var("Q", VarKind::Symmetric(nz)));

    let xe = LinExpr::var(&x);
    let ye = LinExpr::var(&y);
    let be = LinExpr::var(&beta);
    let mut blocks: Vec<(Option<Vec<f64>>, LmiBlock)> = Vec::new();

    let x_pos = BlockBuilder::new(&[nx]).set(0, 0, xe.clone()).build("X > 0", Sense::PositiveDefinite)?;
    blocks.push((None, x_pos));

    let cz_constant = plant.c_z.is_constant();
    if let (Some(q), true) = (&q, cz_constant) {
        blocks.push((None, output_block(&LinExpr::var(q), &xe, plant.c_z.constant_term())?));
    }

    for rho in req.vertices() {
        let a = plant.a.eval(&rho)?;
        let c_y = plant.c_y.eval(&rho)?;
        let b_d = plant.b_d.eval(&rho)? * &s_d;
        let d_d = plant.d_d.eval(&rho)? * &s_d;
        let c_z = plant.c_z.eval(&rho)?;

        let xa_yc = xe.rmul(&a)?.add(&ye.rmul(&c_y)?)?;
        let m11 = xa_yc.sym()?;
        let m12 = xe.rmul(&b_d)?.add(&ye.rmul(&d_d)?)?;

        let perf = match req.norm {
            NormKind::H2 => BlockBuilder::new(&[nx, nd, ny])
                .set(0, 0, m11)
                .set(0, 1, m12)
                .set(0, 2, ye.clone())
                .set(1, 1, LinExpr::identity(nd).scale(-1.0))
                .set(2, 2, be.scale(-1.0))
                .build("performance", Sense::NegativeDefinite)?,
            NormKind::Hinf => BlockBuilder::new(&[nx, nd, nz, ny])
                .set(0, 0, m11)
                .set(0, 1, m12)
                .set(0, 2, LinExpr::constant(c_z.transpose()))
                .set(0, 3, ye.clone())
                .set(1, 1, LinExpr::identity(nd).scale(-gamma2))
                .set(2, 2, LinExpr::identity(nz).scale(-1.0))
                .set(3, 3, be.scale(-gamma2))
                .build("performance", Sense::NegativeDefinite)?,
        };
        blocks.push((Some(rho.clone()), perf));

        if let (Some(q), false) = (&q, cz_constant) {
            blocks.push((Some(rho.clone()), output_block(&LinExpr::var(q), &xe, &c_z)?));
        }

        if let Some(r) = req.pole_radius {
            let region = BlockBuilder::new(&[nx, nx])
                .set(0, 0, xe.scale(-r))
                .set(0, 1, xa_yc)
                .set(1, 1, xe.scale(-r))
                .build("pole-region", Sense::NegativeDefinite)?;
            blocks.push((Some(rho.clone()), region));
        }
    }

    for (_, b) in &blocks {
        prog.add_block(b.clone())?;
    }
    prog.add_nonneg(&beta)?;
    if let Some(q) = &q {
        prog.add_linear_le(LmiProgram::trace(q), gamma2 - req.eps)?;
    }
    if let Some(cap) = &req.beta_cap {
        for (i, c) in cap.iter().enumerate() {
            prog.add_linear_le(LmiProgram::entry(&beta, i), *c)?;
        }
    }
    Ok((prog, Layout { x, y, beta, q }, blocks))
}

fn output_block(q: &LinExpr, x: &LinExpr, c_z: &DMatrix<f64>) -> Result<LmiBlock> {
    let (nz, nx) = c_z.shape();
    BlockBuilder::new(&[nz, nx])
        .set(0, 0, q.scale(-1.0))
        .set(0, 1, LinExpr::constant(c_z.clone()))
        .set(1, 1, x.scale(-1.0))
        .build("output", Sense::NegativeDefinite)
}

fn solve_once(req: &SynthesisRequest) -> Result<SynthesisResult> {
    req.validate()?;
    let mut result = SynthesisResult {
        norm: req.norm,
        gamma: req.gamma,
        p: req.p,
        eps: req.eps,
        mapping: req.mapping,
        status: SynthesisStatus::Infeasible,
        objective_value: None,
        design: None,
        advisory_gamma: None,
    };
    // Both programs need γ² ≥ ε: the H2 trace bound is γ² − ε with trace Q > 0,
    // and the H∞ block carries −γ² I ⪯ −ε I. Below that the solver only
    // struggles towards a foregone conclusion.
    if req.gamma * req.gamma <= req.eps {
        return Ok(result);
    }
    let (prog, layout, blocks) = build_program(req)?;
    let sdp = prog.vectorize(Objective::Norm { var: layout.beta.clone(), order: req.p }, req.eps)?;
    let outcome = solve_with(&sdp, &req.solver)?;
    let status = SynthesisStatus::from(outcome.status);
    result.status = status;
    if status != SynthesisStatus::Optimal {
        return Ok(result);
    }

    let xv = &outcome.x;
    let x = layout.x.extract(xv)?;
    let y = layout.y.extract(xv)?;
    let beta = layout.beta.values(xv).to_vec();
    let q = layout.q.as_ref().map(|q| q.extract(xv)).transpose()?;
    let l = match x.clone().cholesky() {
        Some(ch) => ch.solve(&y),
        None => {
            result.status = SynthesisStatus::NumericalFailure;
            return Ok(result);
        }
    };
    let kappa = beta.iter().map(|b| req.mapping.kappa(*b, req.gamma)).collect();
    let residuals = blocks
        .iter()
        .map(|(rho, b)| BlockResidual {
            label: b.label.clone(),
            rho: rho.clone(),
            max_eigenvalue: signed_residual(b, xv),
        })
        .collect();
    result.objective_value = Some(req.p.apply(&beta));
    result.design = Some(ObserverDesign { l, x, y, q, beta, kappa, residuals });
    Ok(result)
}

/// Residual in the `≺ 0` orientation: positive-definite blocks are negated.
fn signed_residual(b: &LmiBlock, x: &[f64]) -> f64 {
    let v = b.eval(x);
    match b.sense {
        Sense::NegativeDefinite => linalg::max_sym_eigenvalue(&v),
        Sense::PositiveDefinite => -linalg::min_sym_eigenvalue(&v),
    }
}

/// Widens the bracket above an infeasible γ by factors of 1000 until a
/// feasible level appears, then bisects to 0.2% or so.
fn advisory_gamma(req: &SynthesisRequest) -> Result<Option<f64>> {
    // Converged solves take a few dozen iterations; near the feasibility
    // boundary the solver can otherwise spend its full budget failing.
    let mut req = req.clone();
    req.solver.max_iter = req.solver.max_iter.min(ADVISORY_MAX_ITER);
    let req = &req;
    let mut lo = req.gamma;
    while lo < ADVISORY_MAX_FACTOR / 2.0 * req.gamma {
        let hi = 1e3 * lo;
        if let Some(g) = minimal_gamma(req, lo, hi, 12)? {
            return Ok(Some(g));
        }
        lo = hi;
    }
    Ok(None)
}

/// The advisory search gives up above this multiple of the requested γ.
pub const ADVISORY_MAX_FACTOR: f64 = 1e12;

const ADVISORY_MAX_ITER: u32 = 100;

/// Smallest γ in `[lo, hi]` for which the request is feasible, by geometric
/// bisection; `None` if even `hi` is infeasible.
pub fn minimal_gamma(req: &SynthesisRequest, lo: f64, hi: f64, iterations: usize) -> Result<Option<f64>> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Bracket(format!("invalid bracket [{lo}, {hi}]")));
    }
    let feasible = |g: f64| -> Result<bool> {
        match solve_once(&req.with_gamma(g)) {
            Ok(r) => Ok(r.is_optimal()),
            Err(Error::IterationLimit) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if !feasible(hi)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..iterations {
        let mid = (lo * hi).sqrt();
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[derive(Debug)]
pub struct SweepReport {
    pub gammas: Vec<f64>,
    pub results: Vec<Result<SynthesisResult>>,
    /// Index pairs `(i, j)`, `i < j`, of feasible results whose objective
    /// increased with γ.
    pub monotonicity_violations: Vec<(usize, usize)>,
}

impl SweepReport {
    pub fn is_monotone(&self) -> bool {
        self.monotonicity_violations.is_empty()
    }
}

/// One synthesis per γ, solved concurrently. Failures are kept per entry.
pub fn sweep_gamma(template: &SynthesisRequest, gammas: &[f64]) -> Result<SweepReport> {
    if gammas.is_empty() {
        return Err(Error::InvalidArgument("gamma list is empty".into()));
    }
    if gammas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("gammas must be sorted ascending".into()));
    }
    let results: Vec<Result<SynthesisResult>> =
        gammas.par_iter().map(|g| synthesize(&template.with_gamma(*g))).collect();
    let objectives: Vec<Option<f64>> =
        results.iter().map(|r| r.as_ref().ok().filter(|r| r.is_optimal()).and_then(|r| r.objective_value)).collect();
    let mut violations = Vec::new();
    for i in 0..objectives.len() {
        for j in i + 1..objectives.len() {
            if let (Some(a), Some(b)) = (objectives[i], objectives[j]) {
                if b > a * (1.0 + 1e-6) + 1e-9 {
                    violations.push((i, j));
                }
            }
        }
    }
    Ok(SweepReport { gammas: gammas.to_vec(), results, monotonicity_violations: violations })
}

/// Allowable bearing noise implied by the precision of a sine/cosine pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseAngle {
    pub from_sin_deg: f64,
    pub from_cos_deg: f64,
    pub discrepancy_deg: f64,
}

impl NoiseAngle {
    pub fn mean_deg(&self) -> f64 {
        0.5 * (self.from_sin_deg + self.from_cos_deg)
    }
}

/// `θ = asin(1/κ_sin)` and `θ = π/2 − acos(1/κ_cos)`, in degrees.
pub fn noise_angle(kappa_sin: f64, kappa_cos: f64) -> Result<NoiseAngle> {
    let inv = |k: f64| -> Result<f64> {
        if !(k > 0.0) {
            return Err(Error::InvalidArgument(format!("precision must be positive, got {k}")));
        }
        let v = 1.0 / k;
        if v > 1.0 {
            return Err(Error::AngleDomain(k));
        }
        Ok(v)
    };
    let from_sin = inv(kappa_sin)?.asin().to_degrees();
    let from_cos = (std::f64::consts::FRAC_PI_2 - inv(kappa_cos)?.acos()).to_degrees();
    Ok(NoiseAngle { from_sin_deg: from_sin, from_cos_deg: from_cos, discrepancy_deg: (from_sin - from_cos).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_angle_inverse() {
        let k = 1.0 / 2.6f64.to_radians().sin();
        assert!((k - 22.04).abs() < 0.01);
        let a = noise_angle(k, k).unwrap();
        assert!((a.from_sin_deg - 2.6).abs() < 1e-12);
        assert!(a.discrepancy_deg < 1e-9);
    }

    #[test]
    fn noise_angle_limits() {
        assert_eq!(noise_angle(f64::INFINITY, f64::INFINITY).unwrap().from_sin_deg, 0.0);
        assert!((noise_angle(1.0, 1.0).unwrap().from_sin_deg - 90.0).abs() < 1e-12);
        assert!(matches!(noise_angle(0.5, 2.0), Err(Error::AngleDomain(_))));
        assert!(noise_angle(-1.0, 2.0).is_err());
    }

    #[test]
    fn mappings() {
        assert_eq!(PrecisionMapping::Sqrt.kappa(4.0, 0.5), 2.0);
        assert_eq!(PrecisionMapping::SqrtOverGamma.kappa(4.0, 0.25), 4.0);
        assert_eq!(PrecisionMapping::InverseSqrt.kappa(4.0, 0.5), 0.5);
    }

    #[test]
    fn sparsity_threshold() {
        assert_eq!(active_channels(&[100.0, 1e-5, 2e-4, 50.0]), vec![true, false, true, true]);
    }
}
