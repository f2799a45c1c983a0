mod common;

use lpvp_core::cr3bp::{self, Cr3bpConfig};
use lpvp_core::lmi::{BlockBuilder, LinExpr, LmiProgram, Sense, VarKind};
use lpvp_core::{closed_loop, linalg, norms, AffineMatrixFunction, ParameterBox};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-5.0..5.0f64, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn affine_2x3() -> impl Strategy<Value = AffineMatrixFunction> {
    (matrix(2, 3), matrix(2, 3), matrix(2, 3))
        .prop_map(|(c, m0, m2)| AffineMatrixFunction::new(c, vec![(0, m0), (2, m2)]).unwrap())
}

fn rho3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 3)
}

fn stable(a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let shift = linalg::spectral_abscissa(&a) + 0.5;
    a - DMatrix::identity(n, n) * shift.max(0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn affine_functions_are_affine(f in affine_2x3(), r1 in rho3(), r2 in rho3(), t in 0.0..1.0f64) {
        let mix: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let lhs = f.eval(&mix).unwrap();
        let rhs = f.eval(&r1).unwrap() * t + f.eval(&r2).unwrap() * (1.0 - t);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + f.eval(&r1).unwrap().norm()));
    }

    #[test]
    fn box_vertices_and_interpolation(
        lower in prop::collection::vec(-3.0..3.0f64, 1..5),
        widths in prop::collection::vec(prop_oneof![Just(0.0), 0.1..2.0f64], 5),
        t in prop::collection::vec(0.0..1.0f64, 5),
    ) {
        let n = lower.len();
        let upper: Vec<f64> = lower.iter().zip(&widths).map(|(l, w)| l + w).collect();
        let b = ParameterBox::new(lower.clone(), upper.clone()).unwrap();
        let spread = widths[..n].iter().filter(|w| **w > 0.0).count();
        let vertices = b.vertices();
        prop_assert_eq!(vertices.len(), 1 << spread);
        prop_assert_eq!(b.vertex_count(), vertices.len());
        for v in &vertices {
            prop_assert!(b.contains(v));
            for i in 0..n {
                prop_assert!(v[i] == lower[i] || v[i] == upper[i]);
            }
        }
        let inside = b.interpolate(&t[..n]);
        prop_assert!(b.contains(&inside));
    }

    #[test]
    fn zero_gain_recovers_open_loop(a in affine_2x3(), rho in rho3()) {
        // square the generated map into a 2x2 A with the same parameter dependence
        let pick = |m: &DMatrix<f64>| m.columns(0, 2).into_owned();
        let a = AffineMatrixFunction::new(
            pick(a.constant_term()),
            a.basis().iter().map(|(i, m)| (*i, pick(m))).collect(),
        ).unwrap();
        let mut plant = common::lti_plant().with_box(ParameterBox::new(vec![-10.0; 3], vec![10.0; 3]).unwrap()).unwrap();
        plant.a = a;
        let sys = closed_loop(&plant, &DMatrix::zeros(2, 1), &DMatrix::from_element(1, 1, 0.5)).unwrap();
        prop_assert_eq!(sys.a_cl.eval(&rho).unwrap(), plant.a.eval(&rho).unwrap());
        let frozen = sys.frozen(&rho).unwrap();
        prop_assert_eq!(frozen.b.columns(1, 1).norm(), 0.0);
    }

    #[test]
    fn assembled_blocks_are_symmetric(x in prop::collection::vec(-3.0..3.0f64, 13)) {
        let mut prog = LmiProgram::new();
        let xv = prog.declare_var("X", VarKind::Symmetric(3));
        let yv = prog.declare_var("Y", VarKind::Rectangular(3, 1));
        let b = prog.declare_var("b", VarKind::Diagonal(1));
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -2.0, -1.0, 0.5, 1.0, 0.0, -3.0]);
        let c = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 2.0]);
        let top = LinExpr::var(&xv).rmul(&a).unwrap().add(&LinExpr::var(&yv).rmul(&c).unwrap()).unwrap().sym().unwrap();
        let block = BlockBuilder::new(&[3, 1])
            .set(0, 0, top)
            .set(0, 1, LinExpr::var(&yv))
            .set(1, 1, LinExpr::var(&b).scale(-1.0))
            .build("test", Sense::NegativeDefinite)
            .unwrap();
        let m = block.eval(&x);
        prop_assert_eq!(m.shape(), (4, 4));
        prop_assert!((&m - m.transpose()).norm() == 0.0);
    }

    #[test]
    fn h2_lyapunov_residual(a in matrix(4, 4), b in matrix(4, 2), c in matrix(2, 4)) {
        let a = stable(a);
        prop_assume!(b.norm() > 1e-3);
        let bb = &b * b.transpose();
        let p = linalg::lyapunov(&a, &bb).unwrap();
        let residual = (&a * &p + &p * a.transpose() + &bb).norm();
        prop_assert!(residual <= 1e-10 * bb.norm(), "residual {residual:e} vs ‖BBᵀ‖ {:e}", bb.norm());
        let h2 = norms::h2_norm(&a, &b, &c).unwrap();
        prop_assert!((h2 * h2 - (&c * &p * c.transpose()).trace()).abs() <= 1e-9 * (1.0 + h2 * h2));
    }

    #[test]
    fn hinf_dominates_feedthrough_and_grid(a in matrix(3, 3), b in matrix(3, 2), c in matrix(2, 3), d in matrix(2, 2)) {
        let a = stable(a);
        let hinf = norms::hinf_norm(&a, &b, &c, &d).unwrap();
        prop_assert!(hinf >= linalg::sigma_max_real(&d) * (1.0 - 1e-12));
        let grid = (0..200).map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 199.0));
        for w in grid {
            prop_assert!(norms::sigma_at(&a, &b, &c, &d, w) <= hinf * (1.0 + 1e-6));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn lpv_embedding_matches_dynamics(
        x in -1.5..1.5f64, y in -1.5..1.5f64, vx in -1.0..1.0f64, vy in -1.0..1.0f64,
    ) {
        let pi2 = cr3bp::earth_moon_pi2();
        let s = [x, y, vx, vy];
        let (sigma, psi) = cr3bp::distances(&s, pi2).unwrap();
        prop_assume!(sigma >= 0.1 && psi >= 0.1);
        let rho = cr3bp::rho_of_state(&s, pi2).unwrap().rho;
        let (a, b, c, d) = cr3bp::lpv_matrices(&rho, pi2).unwrap();
        let xs = DMatrix::from_column_slice(4, 1, &s);
        let f = cr3bp::dynamics(&s, pi2).unwrap();
        let lpv = &a * &xs + b;
        for i in 0..4 {
            prop_assert!((lpv[i] - f[i]).abs() <= 1e-12 * (1.0 + f[i].abs()));
        }
        let h = &c * &xs + d;
        prop_assert!((h[0] * h[0] + h[1] * h[1] - 1.0).abs() <= 1e-12);
        prop_assert!((h[4] - sigma * sigma).abs() <= 1e-12 * sigma * sigma);
        prop_assert!((h[5] - psi * psi).abs() <= 1e-12 * psi * psi);
        let m = cr3bp::measurement(&s, pi2).unwrap();
        for i in 0..6 {
            prop_assert!((h[i] - m[i]).abs() <= 1e-12 * (1.0 + m[i].abs()));
        }
    }
}

#[test]
fn jacobi_constant_is_conserved() {
    let cfg = Cr3bpConfig { t_final: 10.0, ..Cr3bpConfig::default() };
    let traj = cr3bp::propagate(&cfg).unwrap();
    let c0 = cr3bp::jacobi_constant(&traj.states[0], cfg.pi2).unwrap();
    let drift = traj
        .states
        .iter()
        .map(|s| (cr3bp::jacobi_constant(s, cfg.pi2).unwrap() - c0).abs() / c0.abs())
        .fold(0.0, f64::max);
    assert!(drift <= 1e-8, "relative Jacobi drift {drift:e}");
}

#[test]
fn default_orbit_stays_inside_its_box() {
    let cfg = Cr3bpConfig::default();
    let plant = cr3bp::cr3bp_plant(&cfg).unwrap();
    assert_eq!(plant.param_box.vertex_count(), 64);
    for s in cr3bp::propagate(&cfg).unwrap().states.iter().step_by(50) {
        let rho = cr3bp::rho_of_state(s, cfg.pi2).unwrap().rho;
        assert!(plant.param_box.contains(&rho), "{rho:?}");
    }
}
