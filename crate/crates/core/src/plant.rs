//! Affine-LPV plants and the observer error system built from them.

use nalgebra::DMatrix;

use crate::affine::{AffineMatrixFunction, ParameterBox};
use crate::error::{Error, Result};

/// Plant
///
/// ```text
/// ẋ = A(ρ)x + b(ρ) + B_d(ρ) S_d d̄
/// y = C_y(ρ)x + d(ρ) + D_d(ρ) S_d d̄ + n
/// z = C_z x
/// ```
///
/// with `ρ` confined to `param_box`.
#[derive(Debug, Clone)]
pub struct LpvPlant {
    pub a: AffineMatrixFunction,
    pub b: AffineMatrixFunction,
    pub b_d: AffineMatrixFunction,
    pub c_y: AffineMatrixFunction,
    pub d: AffineMatrixFunction,
    pub d_d: AffineMatrixFunction,
    pub c_z: AffineMatrixFunction,
    /// Diagonal of the disturbance scaling `S_d`.
    pub s_d: Vec<f64>,
    pub param_box: ParameterBox,
}

impl LpvPlant {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: AffineMatrixFunction,
        b: AffineMatrixFunction,
        b_d: AffineMatrixFunction,
        c_y: AffineMatrixFunction,
        d: AffineMatrixFunction,
        d_d: AffineMatrixFunction,
        c_z: AffineMatrixFunction,
        s_d: Vec<f64>,
        param_box: ParameterBox,
    ) -> Result<Self> {
        let plant = Self { a, b, b_d, c_y, d, d_d, c_z, s_d, param_box };
        plant.validate()?;
        Ok(plant)
    }

    pub fn n_x(&self) -> usize {
        self.a.rows()
    }

    pub fn n_y(&self) -> usize {
        self.c_y.rows()
    }

    pub fn n_d(&self) -> usize {
        self.b_d.cols()
    }

    pub fn n_z(&self) -> usize {
        self.c_z.rows()
    }

    pub fn n_rho(&self) -> usize {
        self.param_box.dim()
    }

    fn validate(&self) -> Result<()> {
        let (nx, ny, nd, nz) = (self.n_x(), self.n_y(), self.n_d(), self.n_z());
        let expect = [
            ("A", &self.a, (nx, nx)),
            ("b", &self.b, (nx, 1)),
            ("B_d", &self.b_d, (nx, nd)),
            ("C_y", &self.c_y, (ny, nx)),
            ("d", &self.d, (ny, 1)),
            ("D_d", &self.d_d, (ny, nd)),
            ("C_z", &self.c_z, (nz, nx)),
        ];
        for (name, f, shape) in expect {
            if f.shape() != shape {
                return Err(Error::Dimension(format!("{name} is {:?}, expected {shape:?}", f.shape())));
            }
            if f.min_parameter_len() > self.n_rho() {
                return Err(Error::Dimension(format!(
                    "{name} references ρ[{}] but the box has dimension {}",
                    f.min_parameter_len() - 1,
                    self.n_rho()
                )));
            }
        }
        if self.s_d.len() != nd {
            return Err(Error::Dimension(format!("S_d has {} entries, expected {nd}", self.s_d.len())));
        }
        if self.s_d.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("S_d entries must be strictly positive".into()));
        }
        Ok(())
    }

    pub fn s_d_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.s_d))
    }

    /// Same plant with `S_d` multiplied by `factor`.
    pub fn with_scaled_disturbance(&self, factor: f64) -> Result<Self> {
        let mut p = self.clone();
        p.s_d.iter_mut().for_each(|s| *s *= factor);
        p.validate()?;
        Ok(p)
    }

    /// Same dynamics over a different parameter box.
    pub fn with_box(&self, param_box: ParameterBox) -> Result<Self> {
        let mut p = self.clone();
        p.param_box = param_box;
        p.validate()?;
        Ok(p)
    }
}

/// Estimation-error dynamics for a fixed gain `L` and noise scaling `S_n`:
///
/// ```text
/// ė = A_cl(ρ) e + (B_w̄(ρ) + L D_w̄(ρ)) w̄,   ε = C_z e
/// ```
///
/// where `B_w̄ = [B_d S_d, 0]` and `D_w̄ = [D_d S_d, S_n]`.
#[derive(Debug, Clone)]
pub struct ObserverErrorSystem {
    pub a_cl: AffineMatrixFunction,
    pub b_w: AffineMatrixFunction,
    pub d_w: AffineMatrixFunction,
    pub c_z: AffineMatrixFunction,
    pub l: DMatrix<f64>,
    pub s_n: DMatrix<f64>,
}

/// Frozen-parameter state-space realization `(A, B, C, D)`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl ObserverErrorSystem {
    /// Input matrix `B_w̄ + L D_w̄` as an affine function.
    pub fn input(&self) -> Result<AffineMatrixFunction> {
        self.b_w.add(&self.d_w.left_mul(&self.l)?)
    }

    /// Error system with ρ held fixed.
    pub fn frozen(&self, rho: &[f64]) -> Result<StateSpace> {
        let a = self.a_cl.eval(rho)?;
        let b = self.b_w.eval(rho)? + &self.l * self.d_w.eval(rho)?;
        let c = self.c_z.eval(rho)?;
        let d = DMatrix::zeros(c.nrows(), b.ncols());
        Ok(StateSpace { a, b, c, d })
    }
}

/// Observer error system for gain `l` and diagonal noise scaling `s_n`.
pub fn closed_loop(plant: &LpvPlant, l: &DMatrix<f64>, s_n: &DMatrix<f64>) -> Result<ObserverErrorSystem> {
    let (nx, ny) = (plant.n_x(), plant.n_y());
    if l.shape() != (nx, ny) {
        return Err(Error::Dimension(format!("L is {:?}, expected {:?}", l.shape(), (nx, ny))));
    }
    if s_n.shape() != (ny, ny) {
        return Err(Error::Dimension(format!("S_n is {:?}, expected {:?}", s_n.shape(), (ny, ny))));
    }
    for i in 0..ny {
        for j in 0..ny {
            let v = s_n[(i, j)];
            if (i != j && v != 0.0) || (i == j && !(v >= 0.0)) {
                return Err(Error::InvalidArgument("S_n must be diagonal with nonnegative entries".into()));
            }
        }
    }
    let s_d = plant.s_d_matrix();
    let a_cl = plant.a.add(&plant.c_y.left_mul(l)?)?;
    let b_w = plant.b_d.right_mul(&s_d)?.hstack(&AffineMatrixFunction::zeros(nx, ny))?;
    let d_w = plant.d_d.right_mul(&s_d)?.hstack(&AffineMatrixFunction::constant(s_n.clone()))?;
    Ok(ObserverErrorSystem { a_cl, b_w, d_w, c_z: plant.c_z.clone(), l: l.clone(), s_n: s_n.clone() })
}
