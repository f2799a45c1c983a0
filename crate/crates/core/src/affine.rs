//! Affine parameter-dependent matrices `M(ρ) = M₀ + Σᵢ ρᵢ Mᵢ` and the
//! box-shaped parameter sets they are scheduled over.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A matrix-valued map that is affine in the scheduling vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixFunction {
    constant: DMatrix<f64>,
    basis: Vec<(usize, DMatrix<f64>)>,
}

impl AffineMatrixFunction {
    /// Builds `constant + Σ ρ[idx]·matrix`. Indices must be unique and every
    /// basis matrix must match the shape of `constant`.
    pub fn new(constant: DMatrix<f64>, basis: Vec<(usize, DMatrix<f64>)>) -> Result<Self> {
        let shape = constant.shape();
        let mut seen = Vec::with_capacity(basis.len());
        for (idx, m) in &basis {
            if m.shape() != shape {
                return Err(Error::Dimension(format!(
                    "basis matrix for ρ[{idx}] is {:?}, constant is {:?}",
                    m.shape(),
                    shape
                )));
            }
            if seen.contains(idx) {
                return Err(Error::InvalidArgument(format!("duplicate parameter index {idx}")));
            }
            seen.push(*idx);
        }
        let mut basis = basis;
        basis.sort_by_key(|(i, _)| *i);
        Ok(Self { constant, basis })
    }

    /// A parameter-independent function.
    pub fn constant(m: DMatrix<f64>) -> Self {
        Self { constant: m, basis: Vec::new() }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    pub fn rows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn cols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn constant_term(&self) -> &DMatrix<f64> {
        &self.constant
    }

    /// Basis terms sorted by parameter index.
    pub fn basis(&self) -> &[(usize, DMatrix<f64>)] {
        &self.basis
    }

    pub fn parameter_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.basis.iter().map(|(i, _)| *i)
    }

    /// Smallest scheduling-vector length this function can be evaluated at.
    pub fn min_parameter_len(&self) -> usize {
        self.basis.last().map_or(0, |(i, _)| i + 1)
    }

    pub fn is_constant(&self) -> bool {
        self.basis.is_empty()
    }

    /// `M₀ + Σ ρᵢ Mᵢ`.
    pub fn eval(&self, rho: &[f64]) -> Result<DMatrix<f64>> {
        if rho.len() < self.min_parameter_len() {
            return Err(Error::Dimension(format!(
                "ρ has length {}, function references index {}",
                rho.len(),
                self.min_parameter_len() - 1
            )));
        }
        let mut out = self.constant.clone();
        for (idx, m) in &self.basis {
            out += m * rho[*idx];
        }
        Ok(out)
    }

    /// `left · M(ρ) · right`, still affine in ρ.
    pub fn sandwich(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> Result<Self> {
        if left.ncols() != self.rows() || right.nrows() != self.cols() {
            return Err(Error::Dimension(format!(
                "cannot form {:?}·{:?}·{:?}",
                left.shape(),
                self.shape(),
                right.shape()
            )));
        }
        Ok(Self {
            constant: left * &self.constant * right,
            basis: self.basis.iter().map(|(i, m)| (*i, left * m * right)).collect(),
        })
    }

    pub fn left_mul(&self, left: &DMatrix<f64>) -> Result<Self> {
        let id = DMatrix::identity(self.cols(), self.cols());
        self.sandwich(left, &id)
    }

    pub fn right_mul(&self, right: &DMatrix<f64>) -> Result<Self> {
        let id = DMatrix::identity(self.rows(), self.rows());
        self.sandwich(&id, right)
    }

    /// Sum of two affine functions; basis terms on shared indices are merged.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!("cannot add {:?} and {:?}", self.shape(), other.shape())));
        }
        let mut basis = self.basis.clone();
        for (idx, m) in &other.basis {
            match basis.iter_mut().find(|(i, _)| i == idx) {
                Some((_, acc)) => *acc += m,
                None => basis.push((*idx, m.clone())),
            }
        }
        Self::new(&self.constant + &other.constant, basis)
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows() != other.rows() {
            return Err(Error::Dimension("hstack row mismatch".into()));
        }
        let (r, c1, c2) = (self.rows(), self.cols(), other.cols());
        let cat = |a: Option<&DMatrix<f64>>, b: Option<&DMatrix<f64>>| {
            let mut m = DMatrix::zeros(r, c1 + c2);
            if let Some(a) = a {
                m.view_mut((0, 0), (r, c1)).copy_from(a);
            }
            if let Some(b) = b {
                m.view_mut((0, c1), (r, c2)).copy_from(b);
            }
            m
        };
        let mut indices: Vec<usize> = self.parameter_indices().chain(other.parameter_indices()).collect();
        indices.sort_unstable();
        indices.dedup();
        fn find(f: &AffineMatrixFunction, idx: usize) -> Option<&DMatrix<f64>> {
            f.basis.iter().find(|(i, _)| *i == idx).map(|(_, m)| m)
        }
        let basis = indices.into_iter().map(|idx| (idx, cat(find(self, idx), find(other, idx)))).collect();
        Self::new(cat(Some(&self.constant), Some(&other.constant)), basis)
    }
}

/// Axis-aligned box of scheduling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension(format!("box bounds have lengths {} and {}", lower.len(), upper.len())));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::InvalidArgument(format!(
                "box coordinate {i}: lower {} exceeds upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Zero-dimensional box; its single vertex is the empty vector.
    pub fn empty() -> Self {
        Self { lower: Vec::new(), upper: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn vertex_count(&self) -> usize {
        1 << self.free_coordinates().len()
    }

    fn free_coordinates(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.lower[i] < self.upper[i]).collect()
    }

    /// All corners in binary-counting order over the non-degenerate
    /// coordinates, the lowest free coordinate being the least significant bit.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let free = self.free_coordinates();
        (0..1usize << free.len())
            .map(|code| {
                let mut v = self.lower.clone();
                for (bit, &coord) in free.iter().enumerate() {
                    if code >> bit & 1 == 1 {
                        v[coord] = self.upper[coord];
                    }
                }
                v
            })
            .collect()
    }

    /// Point at fractional position `t ∈ [0,1]^dim` inside the box.
    pub fn interpolate(&self, t: &[f64]) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).zip(t).map(|((lo, hi), s)| lo + s * (hi - lo)).collect()
    }

    pub fn contains(&self, rho: &[f64]) -> bool {
        rho.len() == self.dim() && rho.iter().enumerate().all(|(i, r)| self.lower[i] <= *r && *r <= self.upper[i])
    }
}
