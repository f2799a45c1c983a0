#![allow(dead_code)]

use lpvp_core::synthesis::{self, SynthesisRequest};
use lpvp_core::{cr3bp, AffineMatrixFunction, Cr3bpConfig, LpvPlant, NormKind, ParameterBox, SynthesisResult};
use nalgebra::{dmatrix, DMatrix, Matrix2, RowVector2, Vector2};

pub const CR3BP_POLE_RADIUS: f64 = 30.0;

/// Second-order oscillator with a position sensor; no parameter dependence.
pub fn lti_plant() -> LpvPlant {
    LpvPlant::new(
        AffineMatrixFunction::constant(lti_a()),
        AffineMatrixFunction::zeros(2, 1),
        AffineMatrixFunction::constant(dmatrix![0.0; 1.0]),
        AffineMatrixFunction::constant(dmatrix![1.0, 0.0]),
        AffineMatrixFunction::zeros(1, 1),
        AffineMatrixFunction::zeros(1, 1),
        AffineMatrixFunction::constant(dmatrix![1.0, 0.0]),
        vec![1.0],
        ParameterBox::empty(),
    )
    .unwrap()
}

pub fn lti_a() -> DMatrix<f64> {
    dmatrix![0.0, 1.0; -2.0, -1.0]
}

/// Scalar plant `ẋ = −x + d`, `y = x + n`, `z = x`.
pub fn scalar_plant() -> LpvPlant {
    let one = || AffineMatrixFunction::constant(dmatrix![1.0]);
    LpvPlant::new(
        AffineMatrixFunction::constant(dmatrix![-1.0]),
        AffineMatrixFunction::zeros(1, 1),
        one(),
        one(),
        AffineMatrixFunction::zeros(1, 1),
        AffineMatrixFunction::zeros(1, 1),
        one(),
        vec![1.0],
        ParameterBox::empty(),
    )
    .unwrap()
}

/// Integrates the filter Riccati differential equation
///
/// `Ṗ = AP + PAᵀ + BBᵀ − P (CᵀV⁻¹C − γ⁻² C_zᵀC_z) P`,  `P(0) = 0`
///
/// to steady state for a two-state plant with scalar disturbance, measurement
/// and output. `gamma_inv2 = 0` gives the Kalman filter. Returns `None` when
/// the solution escapes, which for `γ⁻² > 0` means `γ` is below the optimal
/// H∞ filtering level.
pub fn riccati_steady_state(
    a: &Matrix2<f64>,
    b: &Vector2<f64>,
    c: &RowVector2<f64>,
    c_z: &RowVector2<f64>,
    v: f64,
    gamma_inv2: f64,
) -> Option<Matrix2<f64>> {
    let r = c.transpose() * c / v - c_z.transpose() * c_z * gamma_inv2;
    let bb = b * b.transpose();
    let f = |p: &Matrix2<f64>| a * p + p * a.transpose() + bb - p * r * p;
    let mut p = Matrix2::zeros();
    let dt = 1e-3;
    for _ in 0..400_000 {
        let k1 = f(&p);
        let k2 = f(&(p + k1 * (dt / 2.0)));
        let k3 = f(&(p + k2 * (dt / 2.0)));
        let k4 = f(&(p + k3 * dt));
        let next = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if !next.iter().all(|x| x.is_finite()) || next.norm() > 1e8 {
            return None;
        }
        if (next - p).norm() < 1e-14 {
            return Some(next);
        }
        p = next;
    }
    None
}

/// Optimal H2 and H∞ filtering levels of [`lti_plant`] with sensor noise
/// amplitude `noise`.
pub fn lti_optimal_levels(noise: f64) -> (f64, f64) {
    let a = Matrix2::from_column_slice(lti_a().as_slice());
    let (b, c) = (Vector2::new(0.0, 1.0), RowVector2::new(1.0, 0.0));
    let v = noise * noise;
    let p = riccati_steady_state(&a, &b, &c, &c, v, 0.0).expect("Kalman Riccati converges");
    let h2 = (c * p * c.transpose())[0].sqrt();
    let (mut lo, mut hi) = (1e-3_f64, 1e2_f64);
    for _ in 0..50 {
        let mid = (lo * hi).sqrt();
        if riccati_steady_state(&a, &b, &c, &c, v, 1.0 / (mid * mid)).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (h2, hi)
}

pub fn cr3bp_request(norm: NormKind, gamma: f64) -> SynthesisRequest {
    let plant = cr3bp::cr3bp_plant(&Cr3bpConfig::default()).unwrap();
    let mut req = SynthesisRequest::new(plant, norm, gamma);
    req.pole_radius = Some(CR3BP_POLE_RADIUS);
    req
}

pub fn cr3bp_design(norm: NormKind) -> SynthesisResult {
    synthesis::synthesize(&cr3bp_request(norm, 0.1)).unwrap()
}
