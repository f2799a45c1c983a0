use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{BlockBuilder, LinExpr, LmiBlock, LmiProgram, MatrixVar, Sense, VarKind};
use crate::error::{Error, Result};

/// Order `p` of the `‖β‖_p` cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormOrder {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Inf,
}

impl NormOrder {
    pub fn apply(&self, v: &[f64]) -> f64 {
        match self {
            NormOrder::One => v.iter().map(|x| x.abs()).sum(),
            NormOrder::Two => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormOrder::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

impl std::str::FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(NormOrder::One),
            "2" => Ok(NormOrder::Two),
            "inf" | "Inf" | "∞" => Ok(NormOrder::Inf),
            other => Err(Error::InvalidArgument(format!("unknown norm order `{other}`"))),
        }
    }
}

impl std::fmt::Display for NormOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormOrder::One => "1",
            NormOrder::Two => "2",
            NormOrder::Inf => "inf",
        })
    }
}

#[derive(Debug, Clone)]
pub enum Objective {
    /// Minimize `‖v‖_p` over the entries of a diagonal or column variable.
    Norm { var: MatrixVar, order: NormOrder },
    /// Minimize `c·x + constant` for a scalar expression.
    Linear(LinExpr),
}

/// `G₀ + Σ xₖ Gₖ ⪯ −ε I`
#[derive(Debug, Clone)]
pub struct PsdBlock {
    pub label: String,
    pub size: usize,
    pub constant: DMatrix<f64>,
    pub slopes: Vec<(usize, DMatrix<f64>)>,
}

impl PsdBlock {
    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (k, m) in &self.slopes {
            out += m * x[*k];
        }
        out
    }

    pub fn max_eigenvalue(&self, x: &[f64]) -> f64 {
        crate::linalg::max_sym_eigenvalue(&self.eval(x))
    }
}

/// Solver-neutral standard-form semidefinite program:
///
/// ```text
/// minimize    cᵀx
/// subject to  G₀ⁱ + Σ xₖ Gₖⁱ ⪯ −ε I     for every PSD block i
///             x_j ≥ ε                   for j in nonneg_indices
///             aᵀx ≤ b                   for every linear constraint
/// ```
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub psd_blocks: Vec<PsdBlock>,
    pub nonneg_indices: Vec<usize>,
    pub linear_constraints: Vec<(Vec<f64>, f64)>,
    pub strictness_epsilon: f64,
    pub vars: Vec<MatrixVar>,
}

impl SdpProblem {
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.objective_offset
    }

    pub fn var(&self, name: &str) -> Option<&MatrixVar> {
        self.vars.iter().find(|v| v.name == name)
    }
}

fn norm_entries(var: &MatrixVar) -> Result<usize> {
    match var.kind {
        VarKind::Diagonal(n) | VarKind::Rectangular(n, 1) => Ok(n),
        VarKind::Scalar => Ok(1),
        _ => Err(Error::InvalidArgument(format!(
            "norm objective needs a vector-like variable, `{}` is {:?}",
            var.name, var.kind
        ))),
    }
}

impl LmiProgram {
    /// Lower the program to an [`SdpProblem`], adding epigraph variables for
    /// the requested objective.
    pub fn vectorize(mut self, objective: Objective, eps: f64) -> Result<SdpProblem> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("strictness epsilon must be positive, got {eps}")));
        }
        let cost = match objective {
            Objective::Linear(expr) => {
                if expr.shape() != (1, 1) {
                    return Err(Error::Dimension("linear objective must be scalar".into()));
                }
                self.check_declared(expr.max_index(), "objective")?;
                expr
            }
            Objective::Norm { var, order } => {
                let n = norm_entries(&var)?;
                self.check_declared(Some(var.offset + var.dim - 1), &var.name)?;
                match order {
                    NormOrder::One => {
                        self.add_nonneg(&var)?;
                        (0..n).try_fold(LinExpr::zeros(1, 1), |acc, k| acc.add(&LmiProgram::entry(&var, k)))?
                    }
                    NormOrder::Inf => {
                        let t = self.declare_var("norm_epigraph", VarKind::Scalar);
                        for k in 0..n {
                            let row = LmiProgram::entry(&var, k).sub(&LinExpr::var(&t))?;
                            self.add_linear_le(row, 0.0)?;
                        }
                        LinExpr::var(&t)
                    }
                    NormOrder::Two => {
                        let t = self.declare_var("norm_epigraph", VarKind::Scalar);
                        let mut column = LinExpr::zeros(n, 1);
                        for k in 0..n {
                            let mut e = DMatrix::zeros(n, 1);
                            e[(k, 0)] = 1.0;
                            column = column.add(&LmiProgram::entry(&var, k).lmul(&e)?)?;
                        }
                        let t_expr = LinExpr::var(&t);
                        let arrow = BlockBuilder::new(&[n, 1])
                            .set(0, 0, t_expr.times_matrix(&DMatrix::identity(n, n))?)
                            .set(0, 1, column)
                            .set(1, 1, t_expr)
                            .build("norm-2 epigraph", Sense::PositiveDefinite)?;
                        self.add_block(arrow)?;
                        LinExpr::var(&t)
                    }
                }
            }
        };

        let n_vars = self.n_scalars;
        let mut c = vec![0.0; n_vars];
        for (k, m) in cost.slopes() {
            c[k] = m[(0, 0)];
        }
        let psd_blocks = self.blocks.into_iter().map(normalize_block).collect();
        let linear_constraints = self
            .linear
            .into_iter()
            .map(|(expr, bound)| {
                let mut row = vec![0.0; n_vars];
                for (k, m) in expr.slopes() {
                    row[k] = m[(0, 0)];
                }
                (row, bound - expr.constant_part()[(0, 0)])
            })
            .collect();
        let mut nonneg = self.nonneg;
        nonneg.sort_unstable();
        Ok(SdpProblem {
            n_vars,
            objective: c,
            objective_offset: cost.constant_part()[(0, 0)],
            psd_blocks,
            nonneg_indices: nonneg,
            linear_constraints,
            strictness_epsilon: eps,
            vars: self.vars,
        })
    }
}

fn normalize_block(b: LmiBlock) -> PsdBlock {
    let sign = match b.sense {
        Sense::NegativeDefinite => 1.0,
        Sense::PositiveDefinite => -1.0,
    };
    PsdBlock {
        label: b.label,
        size: b.size,
        constant: b.constant * sign,
        slopes: b.slopes.into_iter().map(|(k, m)| (k, m * sign)).collect(),
    }
}
