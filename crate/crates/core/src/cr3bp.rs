//! Planar circular restricted three-body problem in the rotating frame,
//! normalized by the primaries' separation and mean motion.
//!
//! The two primaries sit at `(−π₂, 0)` and `(1 − π₂, 0)`. With
//! `σ = |(x + π₂, y)|` and `ψ = |(x + π₂ − 1, y)|` the scheduling vector is
//! `ρ = (1/σ³, 1/ψ³, 1/σ, 1/ψ, x, y)`, and the dynamics and the six-channel
//! measurement are exactly affine in `ρ` once `ρ` is treated as exogenous.
//! Parameter indices below are zero-based.

use nalgebra::{dmatrix, DMatrix};
use serde::{Deserialize, Serialize};

use crate::affine::{AffineMatrixFunction, ParameterBox};
use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::plant::LpvPlant;

pub const EARTH_MASS_KG: f64 = 5.9722e24;
pub const MOON_MASS_KG: f64 = 7.342e22;
pub const EARTH_MOON_DISTANCE_KM: f64 = 384_400.0;

pub const N_X: usize = 4;
pub const N_Y: usize = 6;
pub const N_RHO: usize = 6;

pub type State = [f64; N_X];
pub type Measurement = [f64; N_Y];

pub fn mass_ratio(m1: f64, m2: f64) -> Result<f64> {
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::InvalidArgument("masses must be positive".into()));
    }
    Ok(m2 / (m1 + m2))
}

pub fn earth_moon_pi2() -> f64 {
    MOON_MASS_KG / (EARTH_MASS_KG + MOON_MASS_KG)
}

/// Initial state and period of the orbit about the larger primary that is
/// circular in the two-body limit, at normalized radius `r`.
pub fn near_circular_orbit(pi2: f64, r: f64) -> (State, f64) {
    let n = ((1.0 - pi2) / (r * r * r)).sqrt();
    let omega = n - 1.0;
    ([r - pi2, 0.0, 0.0, omega * r], 2.0 * std::f64::consts::PI / omega)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cr3bpConfig {
    pub pi2: f64,
    /// Primary separation in km; only informational, states are normalized.
    pub r12: f64,
    pub initial_state: State,
    pub t_final: f64,
    pub dt: f64,
    pub box_margin: f64,
}

impl Default for Cr3bpConfig {
    fn default() -> Self {
        let pi2 = earth_moon_pi2();
        let (initial_state, period) = near_circular_orbit(pi2, 0.4);
        Self { pi2, r12: EARTH_MOON_DISTANCE_KM, initial_state, t_final: period, dt: 1e-3, box_margin: 0.05 }
    }
}

impl Cr3bpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pi2 > 0.0 && self.pi2 < 1.0) {
            return Err(Error::InvalidArgument(format!("pi2 must lie in (0, 1), got {}", self.pi2)));
        }
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            return Err(Error::InvalidArgument("dt and t_final must be positive".into()));
        }
        if !(self.box_margin >= 0.0) {
            return Err(Error::InvalidArgument("box margin must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }
}

const MIN_DISTANCE: f64 = 1e-12;

/// `(σ, ψ)`: distances to the larger and smaller primary.
pub fn distances(s: &State, pi2: f64) -> Result<(f64, f64)> {
    let sigma = (s[0] + pi2).hypot(s[1]);
    let psi = (s[0] + pi2 - 1.0).hypot(s[1]);
    for d in [sigma, psi] {
        if !(d >= MIN_DISTANCE) {
            return Err(Error::Singular(d));
        }
    }
    Ok((sigma, psi))
}

pub fn dynamics(s: &State, pi2: f64) -> Result<State> {
    let (sigma, psi) = distances(s, pi2)?;
    let (s3, p3) = (sigma.powi(3), psi.powi(3));
    let [x, y, vx, vy] = *s;
    Ok([
        vx,
        vy,
        2.0 * vy + x - (1.0 - pi2) * (x + pi2) / s3 - pi2 * (x - 1.0 + pi2) / p3,
        -2.0 * vx + y - (1.0 - pi2) * y / s3 - pi2 * y / p3,
    ])
}

pub fn jacobi_constant(s: &State, pi2: f64) -> Result<f64> {
    let (sigma, psi) = distances(s, pi2)?;
    let [x, y, vx, vy] = *s;
    Ok(x * x + y * y + 2.0 * (1.0 - pi2) / sigma + 2.0 * pi2 / psi - (vx * vx + vy * vy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSample {
    pub rho: [f64; N_RHO],
}

pub fn rho_of_state(s: &State, pi2: f64) -> Result<RhoSample> {
    let (sigma, psi) = distances(s, pi2)?;
    let (is, ip) = (1.0 / sigma, 1.0 / psi);
    Ok(RhoSample { rho: [is * is * is, ip * ip * ip, is, ip, s[0], s[1]] })
}

/// Bearings of the spacecraft: `θ₁` seen from the larger primary and `θ₂`
/// from the smaller one, the latter measured from the `−x` direction.
pub fn bearings(s: &State, pi2: f64) -> (f64, f64) {
    (s[1].atan2(s[0] + pi2), s[1].atan2(-(s[0] + pi2 - 1.0)))
}

/// `(sin θ₁, cos θ₁, sin θ₂, cos θ₂, σ², ψ²)` from the geometry.
pub fn measurement(s: &State, pi2: f64) -> Result<Measurement> {
    let (sigma, psi) = distances(s, pi2)?;
    let (dx1, dx2) = (s[0] + pi2, s[0] + pi2 - 1.0);
    Ok([s[1] / sigma, dx1 / sigma, s[1] / psi, -dx2 / psi, sigma * sigma, psi * psi])
}

/// Measurement with the bearings perturbed by `(ν₁, ν₂)` radians and additive
/// errors on the two range channels.
pub fn perturbed_measurement(s: &State, pi2: f64, nu: (f64, f64), range_noise: (f64, f64)) -> Result<Measurement> {
    let (sigma, psi) = distances(s, pi2)?;
    let (t1, t2) = bearings(s, pi2);
    let (a1, a2) = (t1 + nu.0, t2 + nu.1);
    Ok([a1.sin(), a1.cos(), a2.sin(), a2.cos(), sigma * sigma + range_noise.0, psi * psi + range_noise.1])
}

/// Affine-in-ρ forms of `A`, `b`, `C_y` and `d`.
#[derive(Debug, Clone)]
pub struct LpvForms {
    pub a: AffineMatrixFunction,
    pub b: AffineMatrixFunction,
    pub c_y: AffineMatrixFunction,
    pub d: AffineMatrixFunction,
}

pub fn lpv_forms(pi2: f64) -> LpvForms {
    let unit = |rows: usize, cols: usize, entries: &[(usize, usize, f64)]| {
        let mut m = DMatrix::zeros(rows, cols);
        for &(i, j, v) in entries {
            m[(i, j)] = v;
        }
        m
    };
    let q = pi2 * (1.0 - pi2);

    let a0 = dmatrix![
        0.0, 0.0, 1.0, 0.0;
        0.0, 0.0, 0.0, 1.0;
        1.0, 0.0, 0.0, 2.0;
        0.0, 1.0, -2.0, 0.0
    ];
    let a = AffineMatrixFunction::new(
        a0,
        vec![(0, unit(4, 4, &[(2, 0, pi2 - 1.0), (3, 1, pi2 - 1.0)])), (1, unit(4, 4, &[(2, 0, -pi2), (3, 1, -pi2)]))],
    );
    let b = AffineMatrixFunction::new(
        DMatrix::zeros(4, 1),
        vec![(0, unit(4, 1, &[(2, 0, -q)])), (1, unit(4, 1, &[(2, 0, q)]))],
    );
    let c_y = AffineMatrixFunction::new(
        unit(6, 4, &[(4, 0, 2.0 * pi2), (5, 0, 2.0 * pi2 - 2.0)]),
        vec![
            (2, unit(6, 4, &[(0, 1, 1.0), (1, 0, 1.0)])),
            (3, unit(6, 4, &[(2, 1, 1.0), (3, 0, -1.0)])),
            (4, unit(6, 4, &[(4, 0, 1.0), (5, 0, 1.0)])),
            (5, unit(6, 4, &[(4, 1, 1.0), (5, 1, 1.0)])),
        ],
    );
    let d = AffineMatrixFunction::new(
        unit(6, 1, &[(4, 0, pi2 * pi2), (5, 0, (pi2 - 1.0) * (pi2 - 1.0))]),
        vec![(2, unit(6, 1, &[(1, 0, pi2)])), (3, unit(6, 1, &[(3, 0, 1.0 - pi2)]))],
    );
    // Shapes and indices above are fixed, so construction cannot fail.
    LpvForms { a: a.expect("A(ρ)"), b: b.expect("b(ρ)"), c_y: c_y.expect("C_y(ρ)"), d: d.expect("d(ρ)") }
}

/// `(A(ρ), b(ρ), C_y(ρ), d(ρ))` evaluated.
pub fn lpv_matrices(rho: &[f64], pi2: f64) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if rho.len() != N_RHO {
        return Err(Error::Dimension(format!("rho has length {}, expected {N_RHO}", rho.len())));
    }
    let f = lpv_forms(pi2);
    Ok((f.a.eval(rho)?, f.b.eval(rho)?, f.c_y.eval(rho)?, f.d.eval(rho)?))
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

pub fn propagate(cfg: &Cr3bpConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.steps();
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut s = cfg.initial_state;
    times.push(0.0);
    states.push(s);
    for k in 1..=n {
        s = rk4_step(|s| dynamics(s, cfg.pi2), &s, cfg.dt)?;
        times.push(k as f64 * cfg.dt);
        states.push(s);
    }
    Ok(Trajectory { times, states })
}

/// Bounding box of ρ along `states`, each side pushed out by
/// `margin · (max − min)`, or by `margin · |value|` for a constant coordinate.
pub fn extract_box(states: &[State], margin: f64, pi2: f64) -> Result<ParameterBox> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument("margin must be nonnegative".into()));
    }
    let mut lo = [f64::INFINITY; N_RHO];
    let mut hi = [f64::NEG_INFINITY; N_RHO];
    for s in states {
        let r = rho_of_state(s, pi2)?.rho;
        for i in 0..N_RHO {
            lo[i] = lo[i].min(r[i]);
            hi[i] = hi[i].max(r[i]);
        }
    }
    for i in 0..N_RHO {
        let pad = if hi[i] > lo[i] { margin * (hi[i] - lo[i]) } else { margin * lo[i].abs() };
        lo[i] -= pad;
        hi[i] += pad;
    }
    ParameterBox::new(lo.to_vec(), hi.to_vec())
}

/// The LPV plant over the box swept by the reference trajectory.
///
/// Disturbances enter as accelerations (`B_d = [0; I₂]`), the sensors are
/// disturbance-free, the estimated output is position (`C_z = [I₂ 0]`), and
/// `S_d = I₂`.
pub fn cr3bp_plant(cfg: &Cr3bpConfig) -> Result<LpvPlant> {
    let traj = propagate(cfg)?;
    let param_box = extract_box(&traj.states, cfg.box_margin, cfg.pi2)?;
    let f = lpv_forms(cfg.pi2);
    let b_d = dmatrix![0.0, 0.0; 0.0, 0.0; 1.0, 0.0; 0.0, 1.0];
    let c_z = dmatrix![1.0, 0.0, 0.0, 0.0; 0.0, 1.0, 0.0, 0.0];
    LpvPlant::new(
        f.a,
        f.b,
        AffineMatrixFunction::constant(b_d),
        f.c_y,
        f.d,
        AffineMatrixFunction::zeros(N_Y, 2),
        AffineMatrixFunction::constant(c_z),
        vec![1.0, 1.0],
        param_box,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn earth_moon_ratio() {
        assert!((earth_moon_pi2() - 0.01215).abs() < 5e-5);
        assert_eq!(mass_ratio(EARTH_MASS_KG, MOON_MASS_KG).unwrap(), earth_moon_pi2());
    }

    #[test]
    fn equilateral_point_is_equilibrium() {
        let pi2 = earth_moon_pi2();
        let s = [0.5 - pi2, 3f64.sqrt() / 2.0, 0.0, 0.0];
        let f = dynamics(&s, pi2).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-14), "{f:?}");
        let r = rho_of_state(&s, pi2).unwrap().rho;
        for v in &r[..4] {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn x_axis_symmetry() {
        let f = dynamics(&[0.3, 0.0, 0.0, 0.0], 0.1).unwrap();
        assert_eq!(f[3], 0.0);
    }

    #[test]
    fn collision_is_singular() {
        assert!(matches!(rho_of_state(&[0.5, 0.0, 0.0, 0.0], 0.5), Err(Error::Singular(_))));
    }

    #[test]
    fn a_matrix_entry_from_hand_calculation() {
        let (a, ..) = lpv_matrices(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(a[(2, 0)], 0.0);
        assert_eq!(a[(3, 1)], 0.0);
        assert_eq!(a[(2, 3)], 2.0);
        assert_eq!(a[(3, 2)], -2.0);
    }

    #[test]
    fn box_extraction() {
        let pi2 = 0.1;
        let a = [0.1, 0.5, 0.0, 0.0];
        let b = [0.9, 0.5, 0.0, 0.0];
        let bx = extract_box(&[a, b], 0.0, pi2).unwrap();
        assert_eq!((bx.lower()[4], bx.upper()[4]), (0.1, 0.9));
        let bx = extract_box(&[a, b], 0.1, pi2).unwrap();
        assert!((bx.lower()[4] - 0.02).abs() < 1e-15 && (bx.upper()[4] - 0.98).abs() < 1e-15);
        // ρ₆ is constant at 0.5: inflated by 10 % of its value
        assert!((bx.lower()[5] - 0.45).abs() < 1e-15 && (bx.upper()[5] - 0.55).abs() < 1e-15);
        assert!(extract_box(&[], 0.1, pi2).is_err());
    }

    #[test]
    fn default_orbit_box_has_64_vertices() {
        let plant = cr3bp_plant(&Cr3bpConfig::default()).unwrap();
        assert_eq!(plant.param_box.vertex_count(), 64);
        assert_eq!((plant.n_x(), plant.n_y(), plant.n_d(), plant.n_z(), plant.n_rho()), (4, 6, 2, 2, 6));
    }
}
