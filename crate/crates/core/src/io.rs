//! Result documents (JSON), plant descriptions, and CSV exports.
//!
//! Floats are written in shortest round-trip form, so a document read back
//! reproduces every value bit for bit.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::affine::{AffineMatrixFunction, ParameterBox};
use crate::error::{Error, Result};
use crate::lmi::NormOrder;
use crate::plant::LpvPlant;
use crate::sim::SimulationTrace;
use crate::synthesis::{
    noise_angle, BlockResidual, NoiseAngle, NormKind, ObserverDesign, PrecisionMapping, SweepReport, SynthesisResult,
    SynthesisStatus,
};

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Parse(format!("`{name}` has rows of unequal length")));
    }
    Ok(DMatrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDocument {
    pub l: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    pub beta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub active: Vec<bool>,
    pub residuals: Vec<BlockResidual>,
    /// Allowable `θ₁` noise from channels 1–2, when they admit one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_angle: Option<NoiseAngle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDocument {
    pub norm: NormKind,
    pub gamma: f64,
    pub p: NormOrder,
    pub eps: f64,
    pub mapping: PrecisionMapping,
    pub status: SynthesisStatus,
    pub objective_value: Option<f64>,
    pub advisory_gamma: Option<f64>,
    pub design: Option<DesignDocument>,
}

impl From<&SynthesisResult> for ResultDocument {
    fn from(r: &SynthesisResult) -> Self {
        let design = r.design.as_ref().map(|d| DesignDocument {
            l: rows_of(&d.l),
            x: rows_of(&d.x),
            y: rows_of(&d.y),
            q: d.q.as_ref().map(rows_of),
            beta: d.beta.clone(),
            kappa: d.kappa.clone(),
            active: d.active_channels(),
            residuals: d.residuals.clone(),
            noise_angle: (d.kappa.len() >= 2).then(|| noise_angle(d.kappa[0], d.kappa[1]).ok()).flatten(),
        });
        ResultDocument {
            norm: r.norm,
            gamma: r.gamma,
            p: r.p,
            eps: r.eps,
            mapping: r.mapping,
            status: r.status,
            objective_value: r.objective_value,
            advisory_gamma: r.advisory_gamma,
            design,
        }
    }
}

impl TryFrom<ResultDocument> for SynthesisResult {
    type Error = Error;

    fn try_from(doc: ResultDocument) -> Result<Self> {
        let design = doc
            .design
            .map(|d| -> Result<ObserverDesign> {
                let l = matrix_from_rows("l", &d.l)?;
                let x = matrix_from_rows("x", &d.x)?;
                let y = matrix_from_rows("y", &d.y)?;
                let q = d.q.as_deref().map(|q| matrix_from_rows("q", q)).transpose()?;
                if d.beta.len() != l.ncols() || d.kappa.len() != l.ncols() {
                    return Err(Error::Parse("beta/kappa length differs from the column count of L".into()));
                }
                if x.shape() != (l.nrows(), l.nrows()) || y.shape() != l.shape() {
                    return Err(Error::Parse("X, Y and L shapes are inconsistent".into()));
                }
                Ok(ObserverDesign { l, x, y, q, beta: d.beta, kappa: d.kappa, residuals: d.residuals })
            })
            .transpose()?;
        if !(doc.gamma > 0.0) {
            return Err(Error::Parse("gamma must be positive".into()));
        }
        Ok(SynthesisResult {
            norm: doc.norm,
            gamma: doc.gamma,
            p: doc.p,
            eps: doc.eps,
            mapping: doc.mapping,
            status: doc.status,
            objective_value: doc.objective_value,
            design,
            advisory_gamma: doc.advisory_gamma,
        })
    }
}

/// Pretty JSON for any report type.
pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))
}

pub fn result_to_json(r: &SynthesisResult) -> Result<String> {
    serde_json::to_string_pretty(&ResultDocument::from(r)).map_err(|e| Error::Parse(e.to_string()))
}

pub fn result_from_json(s: &str) -> Result<SynthesisResult> {
    let doc: ResultDocument = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    doc.try_into()
}

pub fn write_result(path: &Path, r: &SynthesisResult) -> Result<()> {
    std::fs::write(path, result_to_json(r)? + "\n")?;
    Ok(())
}

pub fn read_result(path: &Path) -> Result<SynthesisResult> {
    result_from_json(&std::fs::read_to_string(path)?)
}

/// A matrix function written as a constant plus `(param, matrix)` terms,
/// matrices as lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub constant: Vec<Vec<f64>>,
    #[serde(default)]
    pub basis: Vec<BasisSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub param: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl AffineSpec {
    pub fn build(&self, name: &str) -> Result<AffineMatrixFunction> {
        let basis =
            self.basis.iter().map(|t| Ok((t.param, matrix_from_rows(name, &t.matrix)?))).collect::<Result<Vec<_>>>()?;
        AffineMatrixFunction::new(matrix_from_rows(name, &self.constant)?, basis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// User-supplied plant. `b`, `d` and `D_d` default to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub a: AffineSpec,
    #[serde(default)]
    pub b: Option<AffineSpec>,
    pub b_d: AffineSpec,
    pub c_y: AffineSpec,
    #[serde(default)]
    pub d: Option<AffineSpec>,
    #[serde(default)]
    pub d_d: Option<AffineSpec>,
    pub c_z: AffineSpec,
    pub s_d: Vec<f64>,
    #[serde(rename = "box", default)]
    pub param_box: Option<BoxSpec>,
}

impl PlantSpec {
    pub fn build(&self) -> Result<LpvPlant> {
        let a = self.a.build("a")?;
        let b_d = self.b_d.build("b_d")?;
        let c_y = self.c_y.build("c_y")?;
        let (nx, nd, ny) = (a.rows(), b_d.cols(), c_y.rows());
        let or_zero = |s: &Option<AffineSpec>, name: &str, r: usize, c: usize| match s {
            Some(s) => s.build(name),
            None => Ok(AffineMatrixFunction::zeros(r, c)),
        };
        let param_box = match &self.param_box {
            Some(b) => ParameterBox::new(b.lower.clone(), b.upper.clone())?,
            None => ParameterBox::empty(),
        };
        LpvPlant::new(
            a,
            or_zero(&self.b, "b", nx, 1)?,
            b_d,
            c_y,
            or_zero(&self.d, "d", ny, 1)?,
            or_zero(&self.d_d, "d_d", ny, nd)?,
            self.c_z.build("c_z")?,
            self.s_d.clone(),
            param_box,
        )
    }
}

pub fn trace_header(n_x: usize, n_y: usize, n_z: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n_x).map(|i| format!("x{i}")));
    cols.extend((1..=n_x).map(|i| format!("xhat{i}")));
    cols.extend((1..=n_y).map(|i| format!("y{i}")));
    cols.extend((1..=n_y).map(|i| format!("n{i}")));
    cols.extend((1..=n_z).map(|i| format!("eps{i}")));
    cols.join(",")
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &SimulationTrace) -> Result<()> {
    writeln!(w, "{}", trace_header(4, 6, 2))?;
    for k in 0..trace.len() {
        let row: Vec<String> = std::iter::once(trace.times[k])
            .chain(trace.true_states[k].iter().copied())
            .chain(trace.estimates[k].iter().copied())
            .chain(trace.measurements[k].iter().copied())
            .chain(trace.noise[k].iter().copied())
            .chain(trace.error_z[k].iter().copied())
            .map(|v| format!("{v:.16e}"))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn sweep_header(n_y: usize) -> String {
    let mut cols = vec!["gamma".to_string(), "status".into(), "objective".into()];
    cols.extend((1..=n_y).map(|i| format!("beta{i}")));
    cols.extend((1..=n_y).map(|i| format!("kappa{i}")));
    cols.push("theta1_deg".into());
    cols.join(",")
}

/// One row per γ; failed or infeasible entries leave the numeric cells empty.
pub fn write_sweep_csv<W: Write>(mut w: W, report: &SweepReport, n_y: usize) -> Result<()> {
    writeln!(w, "{}", sweep_header(n_y))?;
    for (g, r) in report.gammas.iter().zip(&report.results) {
        let mut cells = vec![format!("{g:.16e}")];
        match r {
            Ok(r) => {
                cells.push(format!("{:?}", r.status).to_lowercase());
                cells.push(r.objective_value.map_or(String::new(), |v| format!("{v:.16e}")));
                match &r.design {
                    Some(d) => {
                        cells.extend(d.beta.iter().map(|v| format!("{v:.16e}")));
                        cells.extend(d.kappa.iter().map(|v| format!("{v:.16e}")));
                        let angle = (n_y >= 2).then(|| noise_angle(d.kappa[0], d.kappa[1]).ok()).flatten();
                        cells.push(angle.map_or(String::new(), |a| format!("{:.16e}", a.from_sin_deg)));
                    }
                    None => cells.extend(std::iter::repeat_n(String::new(), 2 * n_y + 1)),
                }
            }
            Err(_) => {
                cells.push("error".into());
                cells.extend(std::iter::repeat_n(String::new(), 2 * n_y + 2));
            }
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
