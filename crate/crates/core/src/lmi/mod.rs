//! Matrix decision variables, affine matrix expressions in those variables,
//! and symmetric block LMIs assembled from them.
//!
//! Every decision variable occupies a contiguous slice of one flat decision
//! vector, in declaration order. Packing inside a slice:
//!
//! * `Symmetric(n)`: upper triangle, row-major: `(0,0), (0,1), …, (0,n-1), (1,1), …`
//! * `Rectangular(r, c)`: row-major.
//! * `Diagonal(n)`: the diagonal entries.
//! * `Scalar`: one entry.

mod sdp;
mod solver;

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use sdp::{NormOrder, Objective, PsdBlock, SdpProblem};
pub use solver::{solve, solve_with, SolveOutcome, SolveStatus, SolverSettings};

/// Shape and packing of a matrix decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Symmetric(usize),
    Rectangular(usize, usize),
    /// Diagonal matrix built from a vector of unknowns.
    Diagonal(usize),
    Scalar,
}

impl VarKind {
    /// Number of scalar unknowns.
    pub fn dim(&self) -> usize {
        match *self {
            VarKind::Symmetric(n) => n * (n + 1) / 2,
            VarKind::Rectangular(r, c) => r * c,
            VarKind::Diagonal(n) => n,
            VarKind::Scalar => 1,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match *self {
            VarKind::Symmetric(n) | VarKind::Diagonal(n) => (n, n),
            VarKind::Rectangular(r, c) => (r, c),
            VarKind::Scalar => (1, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixVar {
    pub name: String,
    pub kind: VarKind,
    pub offset: usize,
    pub dim: usize,
}

impl MatrixVar {
    pub fn shape(&self) -> (usize, usize) {
        self.kind.shape()
    }

    /// Matrix positions (with their multiplicity pattern) of local unknown `k`.
    fn positions(&self, k: usize) -> Vec<(usize, usize)> {
        match self.kind {
            VarKind::Symmetric(n) => {
                let (i, j) = sym_index(n, k);
                if i == j {
                    vec![(i, i)]
                } else {
                    vec![(i, j), (j, i)]
                }
            }
            VarKind::Rectangular(_, c) => vec![(k / c, k % c)],
            VarKind::Diagonal(_) => vec![(k, k)],
            VarKind::Scalar => vec![(0, 0)],
        }
    }

    /// Reshape this variable's slice of `x` into matrix form.
    pub fn extract(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if self.offset + self.dim > x.len() {
            return Err(Error::UndeclaredVariable(self.name.clone()));
        }
        let (r, c) = self.shape();
        let mut m = DMatrix::zeros(r, c);
        for k in 0..self.dim {
            for (i, j) in self.positions(k) {
                m[(i, j)] = x[self.offset + k];
            }
        }
        Ok(m)
    }

    /// Inverse of [`extract`](Self::extract); writes `m` into `x`.
    pub fn pack(&self, m: &DMatrix<f64>, x: &mut [f64]) -> Result<()> {
        if m.shape() != self.shape() {
            return Err(Error::Dimension(format!("{} expects {:?}", self.name, self.shape())));
        }
        for k in 0..self.dim {
            let (i, j) = self.positions(k)[0];
            x[self.offset + k] = m[(i, j)];
        }
        Ok(())
    }

    /// Slice of `x` belonging to this variable.
    pub fn values<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.offset..self.offset + self.dim]
    }
}

fn sym_index(n: usize, mut k: usize) -> (usize, usize) {
    for i in 0..n {
        let row_len = n - i;
        if k < row_len {
            return (i, i + k);
        }
        k -= row_len;
    }
    unreachable!("index outside symmetric packing")
}

/// Matrix-valued affine expression `C + Σ_k x_k S_k` in the flat decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinExpr {
    constant: DMatrix<f64>,
    slopes: BTreeMap<usize, DMatrix<f64>>,
}

impl LinExpr {
    pub fn constant(m: DMatrix<f64>) -> Self {
        Self { constant: m, slopes: BTreeMap::new() }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn var(v: &MatrixVar) -> Self {
        let (r, c) = v.shape();
        let slopes = (0..v.dim)
            .map(|k| {
                let mut s = DMatrix::zeros(r, c);
                for (i, j) in v.positions(k) {
                    s[(i, j)] = 1.0;
                }
                (v.offset + k, s)
            })
            .collect();
        Self { constant: DMatrix::zeros(r, c), slopes }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn constant_part(&self) -> &DMatrix<f64> {
        &self.constant
    }

    pub fn slopes(&self) -> impl Iterator<Item = (usize, &DMatrix<f64>)> {
        self.slopes.iter().map(|(k, m)| (*k, m))
    }

    fn map(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        Self { constant: f(&self.constant), slopes: self.slopes.iter().map(|(k, m)| (*k, f(m))).collect() }
    }

    /// `m · self`
    pub fn lmul(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.shape().0 {
            return Err(Error::Dimension(format!("cannot form {:?}·{:?}", m.shape(), self.shape())));
        }
        Ok(self.map(|s| m * s))
    }

    /// `self · m`
    pub fn rmul(&self, m: &DMatrix<f64>) -> Result<Self> {
        if self.shape().1 != m.nrows() {
            return Err(Error::Dimension(format!("cannot form {:?}·{:?}", self.shape(), m.shape())));
        }
        Ok(self.map(|s| s * m))
    }

    /// `s · m` for a scalar (1×1) expression `s`.
    pub fn times_matrix(&self, m: &DMatrix<f64>) -> Result<Self> {
        if self.shape() != (1, 1) {
            return Err(Error::Dimension("times_matrix needs a scalar expression".into()));
        }
        Ok(self.map(|s| m * s[(0, 0)]))
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|s| s * a)
    }

    pub fn transpose(&self) -> Self {
        self.map(|s| s.transpose())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!("cannot add {:?} and {:?}", self.shape(), other.shape())));
        }
        let mut out = self.clone();
        out.constant += &other.constant;
        for (k, m) in &other.slopes {
            out.slopes.entry(*k).and_modify(|acc| *acc += m).or_insert_with(|| m.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// `self + selfᵀ`
    pub fn sym(&self) -> Result<Self> {
        self.add(&self.transpose())
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (k, m) in &self.slopes {
            out += m * x[*k];
        }
        out
    }

    fn max_index(&self) -> Option<usize> {
        self.slopes.keys().next_back().copied()
    }
}

/// Which side of zero a block is constrained to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `G(x) ⪯ −ε I`
    NegativeDefinite,
    /// `G(x) ⪰ ε I`
    PositiveDefinite,
}

/// A symmetric matrix affine in the decision vector, stored as its constant
/// part and one exactly symmetric slope per scalar unknown.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub label: String,
    pub size: usize,
    pub sense: Sense,
    pub constant: DMatrix<f64>,
    pub slopes: Vec<(usize, DMatrix<f64>)>,
}

impl LmiBlock {
    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (k, m) in &self.slopes {
            out += m * x[*k];
        }
        out
    }

    /// Largest eigenvalue of the block value at `x`.
    pub fn max_eigenvalue(&self, x: &[f64]) -> f64 {
        crate::linalg::max_sym_eigenvalue(&self.eval(x))
    }
}

/// Builds an [`LmiBlock`] from the upper triangle of a block partition.
/// Off-diagonal entries are mirrored with their transpose; diagonal entries
/// must themselves be symmetric expressions.
#[derive(Debug, Clone)]
pub struct BlockBuilder {
    sizes: Vec<usize>,
    entries: Vec<(usize, usize, LinExpr)>,
}

impl BlockBuilder {
    pub fn new(sizes: &[usize]) -> Self {
        Self { sizes: sizes.to_vec(), entries: Vec::new() }
    }

    /// Place `expr` at block position `(i, j)` with `i ≤ j`.
    pub fn set(mut self, i: usize, j: usize, expr: LinExpr) -> Self {
        self.entries.push((i, j, expr));
        self
    }

    pub fn build(self, label: impl Into<String>, sense: Sense) -> Result<LmiBlock> {
        assemble_block(label, &self.sizes, self.entries, sense)
    }
}

/// Assemble a symmetric block from upper-triangular entries `(i, j, expr)`.
pub fn assemble_block(
    label: impl Into<String>,
    sizes: &[usize],
    entries: Vec<(usize, usize, LinExpr)>,
    sense: Sense,
) -> Result<LmiBlock> {
    let label = label.into();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let n: usize = sizes.iter().sum();
    let mut constant = DMatrix::zeros(n, n);
    let mut slopes: BTreeMap<usize, DMatrix<f64>> = BTreeMap::new();

    for (i, j, expr) in entries {
        if i > j || j >= sizes.len() {
            return Err(Error::InvalidArgument(format!(
                "{label}: block position ({i},{j}) is not in the upper triangle"
            )));
        }
        if expr.shape() != (sizes[i], sizes[j]) {
            return Err(Error::Dimension(format!(
                "{label}: entry ({i},{j}) is {:?}, partition expects {:?}",
                expr.shape(),
                (sizes[i], sizes[j])
            )));
        }
        let (ro, co) = (offsets[i], offsets[j]);
        let place = |target: &mut DMatrix<f64>, m: &DMatrix<f64>| {
            let mut v = target.view_mut((ro, co), m.shape());
            v += m;
            if i != j {
                let mut w = target.view_mut((co, ro), (m.ncols(), m.nrows()));
                w += m.transpose();
            }
        };
        place(&mut constant, &expr.constant);
        for (k, m) in &expr.slopes {
            let target = slopes.entry(*k).or_insert_with(|| DMatrix::zeros(n, n));
            place(target, m);
        }
    }

    let constant = exact_symmetric(&label, constant)?;
    let slopes = slopes
        .into_iter()
        .map(|(k, m)| exact_symmetric(&label, m).map(|m| (k, m)))
        .filter(|r| r.as_ref().map_or(true, |(_, m)| m.iter().any(|v| *v != 0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LmiBlock { label, size: n, sense, constant, slopes })
}

/// Copies the upper triangle onto the lower one after checking the input is
/// symmetric up to rounding; evaluation is then exactly symmetric.
fn exact_symmetric(label: &str, mut m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!("{label}: diagonal entry is not symmetric at ({i},{j})")));
            }
            m[(j, i)] = m[(i, j)];
        }
    }
    Ok(m)
}

/// A collection of decision variables and the constraints posed on them.
#[derive(Debug, Clone, Default)]
pub struct LmiProgram {
    vars: Vec<MatrixVar>,
    n_scalars: usize,
    blocks: Vec<LmiBlock>,
    nonneg: Vec<usize>,
    linear: Vec<(LinExpr, f64)>,
}

impl LmiProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_var(&mut self, name: impl Into<String>, kind: VarKind) -> MatrixVar {
        let v = MatrixVar { name: name.into(), kind, offset: self.n_scalars, dim: kind.dim() };
        self.n_scalars += v.dim;
        self.vars.push(v.clone());
        v
    }

    pub fn vars(&self) -> &[MatrixVar] {
        &self.vars
    }

    pub fn n_scalars(&self) -> usize {
        self.n_scalars
    }

    pub fn blocks(&self) -> &[LmiBlock] {
        &self.blocks
    }

    fn check_declared(&self, max: Option<usize>, what: &str) -> Result<()> {
        match max {
            Some(k) if k >= self.n_scalars => Err(Error::UndeclaredVariable(format!("{what} references unknown #{k}"))),
            _ => Ok(()),
        }
    }

    pub fn add_block(&mut self, block: LmiBlock) -> Result<()> {
        self.check_declared(block.slopes.last().map(|(k, _)| *k), &block.label)?;
        self.blocks.push(block);
        Ok(())
    }

    /// Every entry of `var` constrained `≥ ε`.
    pub fn add_nonneg(&mut self, var: &MatrixVar) -> Result<()> {
        self.check_declared(Some(var.offset + var.dim - 1), &var.name)?;
        for k in var.offset..var.offset + var.dim {
            if !self.nonneg.contains(&k) {
                self.nonneg.push(k);
            }
        }
        Ok(())
    }

    /// Scalar constraint `expr ≤ bound` for a 1×1 expression.
    pub fn add_linear_le(&mut self, expr: LinExpr, bound: f64) -> Result<()> {
        if expr.shape() != (1, 1) {
            return Err(Error::Dimension("linear constraint must be scalar".into()));
        }
        self.check_declared(expr.max_index(), "linear constraint")?;
        self.linear.push((expr, bound));
        Ok(())
    }

    /// `trace(var)` as a scalar expression.
    pub fn trace(var: &MatrixVar) -> LinExpr {
        let e = LinExpr::var(var);
        let n = e.shape().0;
        let mut out = LinExpr::zeros(1, 1);
        for (k, m) in e.slopes() {
            let t: f64 = (0..n).map(|i| m[(i, i)]).sum();
            if t != 0.0 {
                out.slopes.insert(k, DMatrix::from_element(1, 1, t));
            }
        }
        out
    }

    /// Scalar expression picking entry `k` of `var`'s slice.
    pub fn entry(var: &MatrixVar, k: usize) -> LinExpr {
        let mut out = LinExpr::zeros(1, 1);
        out.slopes.insert(var.offset + k, DMatrix::from_element(1, 1, 1.0));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn declare_var_dims() {
        let mut p = LmiProgram::new();
        let x = p.declare_var("X", VarKind::Symmetric(4));
        let y = p.declare_var("Y", VarKind::Rectangular(4, 6));
        let s = p.declare_var("t", VarKind::Scalar);
        assert_eq!((x.dim, y.dim, s.dim), (10, 24, 1));
        assert_eq!((x.offset, y.offset, s.offset), (0, 10, 34));
    }

    #[test]
    fn extract_symmetric_packing() {
        let mut p = LmiProgram::new();
        let x = p.declare_var("X", VarKind::Symmetric(2));
        assert_eq!(x.extract(&[1.0, 2.0, 3.0]).unwrap(), dmatrix![1.0, 2.0; 2.0, 3.0]);
    }

    #[test]
    fn extract_diagonal_and_rectangular() {
        let mut p = LmiProgram::new();
        let b = p.declare_var("beta", VarKind::Diagonal(2));
        let r = p.declare_var("R", VarKind::Rectangular(2, 1));
        let x = [4.0, 5.0, 6.0, 7.0];
        assert_eq!(b.extract(&x).unwrap(), dmatrix![4.0, 0.0; 0.0, 5.0]);
        assert_eq!(r.extract(&x).unwrap(), dmatrix![6.0; 7.0]);
    }

    #[test]
    fn extract_outside_vector_fails() {
        let mut p = LmiProgram::new();
        let x = p.declare_var("X", VarKind::Symmetric(3));
        assert!(matches!(x.extract(&[0.0; 5]), Err(Error::UndeclaredVariable(_))));
    }

    #[test]
    fn symmetric_packing_row_major_upper() {
        assert_eq!(sym_index(3, 0), (0, 0));
        assert_eq!(sym_index(3, 2), (0, 2));
        assert_eq!(sym_index(3, 3), (1, 1));
        assert_eq!(sym_index(3, 5), (2, 2));
    }

    #[test]
    fn constant_block() {
        let b = BlockBuilder::new(&[3])
            .set(0, 0, LinExpr::identity(3).scale(-1.0))
            .build("c", Sense::NegativeDefinite)
            .unwrap();
        assert_eq!(b.eval(&[0.3, 9.0]), -DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn scalar_sym_term() {
        let mut p = LmiProgram::new();
        let x = p.declare_var("x", VarKind::Scalar);
        let term = LinExpr::var(&x).rmul(&dmatrix![-1.0]).unwrap().sym().unwrap();
        let b = BlockBuilder::new(&[1]).set(0, 0, term).build("s", Sense::NegativeDefinite).unwrap();
        assert_eq!(b.eval(&[2.5]), dmatrix![-5.0]);
    }

    #[test]
    fn asymmetric_diagonal_entry_is_rejected() {
        let mut p = LmiProgram::new();
        let y = p.declare_var("Y", VarKind::Rectangular(2, 2));
        let r = BlockBuilder::new(&[2]).set(0, 0, LinExpr::var(&y)).build("bad", Sense::NegativeDefinite);
        assert!(r.is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let r = BlockBuilder::new(&[2, 1]).set(0, 1, LinExpr::zeros(2, 2)).build("bad", Sense::NegativeDefinite);
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn undeclared_variable_is_rejected() {
        let mut other = LmiProgram::new();
        other.declare_var("pad", VarKind::Symmetric(3));
        let x = other.declare_var("X", VarKind::Symmetric(2));
        let block = BlockBuilder::new(&[2]).set(0, 0, LinExpr::var(&x)).build("b", Sense::PositiveDefinite).unwrap();
        let mut p = LmiProgram::new();
        p.declare_var("only", VarKind::Scalar);
        assert!(matches!(p.add_block(block), Err(Error::UndeclaredVariable(_))));
    }

    #[test]
    fn off_diagonal_is_mirrored() {
        let mut p = LmiProgram::new();
        let y = p.declare_var("Y", VarKind::Rectangular(1, 2));
        let b = BlockBuilder::new(&[1, 2]).set(0, 1, LinExpr::var(&y)).build("m", Sense::NegativeDefinite).unwrap();
        let v = b.eval(&[1.0, 2.0]);
        assert_eq!(v, dmatrix![0.0, 1.0, 2.0; 1.0, 0.0, 0.0; 2.0, 0.0, 0.0]);
    }

    #[test]
    fn trace_expression() {
        let mut p = LmiProgram::new();
        let q = p.declare_var("Q", VarKind::Symmetric(2));
        assert_eq!(LmiProgram::trace(&q).eval(&[1.0, 5.0, 2.0]), dmatrix![3.0]);
    }
}
