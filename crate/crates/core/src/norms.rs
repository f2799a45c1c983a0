//! Frozen-parameter system norms used to certify synthesized observers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, C64};

/// `‖C (sI − A)⁻¹ B‖₂` from the controllability Gramian.
pub fn h2_norm(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<f64> {
    check_shapes(a, b, c, None)?;
    let p = linalg::lyapunov(a, &(b * b.transpose()))?;
    let tr = (c * p * c.transpose()).trace();
    Ok(tr.max(0.0).sqrt())
}

fn check_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: Option<&DMatrix<f64>>) -> Result<()> {
    let n = a.nrows();
    let ok =
        a.ncols() == n && b.nrows() == n && c.ncols() == n && d.is_none_or(|d| d.shape() == (c.nrows(), b.ncols()));
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "state space shapes A {:?}, B {:?}, C {:?}, D {:?}",
            a.shape(),
            b.shape(),
            c.shape(),
            d.map(|d| d.shape())
        )))
    }
}

/// `σ_max(C (jωI − A)⁻¹ B + D)`
pub fn sigma_at(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>, omega: f64) -> f64 {
    let n = a.nrows();
    let jw = DMatrix::<C64>::identity(n, n) * C64::new(0.0, omega);
    let resolvent =
        (jw - linalg::to_complex(a)).lu().solve(&linalg::to_complex(b)).expect("A has no imaginary-axis eigenvalues");
    let g = linalg::to_complex(c) * resolvent + linalg::to_complex(d);
    linalg::sigma_max(&g)
}

/// Peak of `σ_max(G(jω))` over `points` log-spaced frequencies in `[w_min, w_max]`
/// plus `ω = 0`.
pub fn frequency_grid_peak(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    w_min: f64,
    w_max: f64,
    points: usize,
) -> f64 {
    let (l0, l1) = (w_min.log10(), w_max.log10());
    let step = (l1 - l0) / (points.max(2) - 1) as f64;
    (0..points)
        .map(|i| 10f64.powf(l0 + step * i as f64))
        .chain(std::iter::once(0.0))
        .map(|w| sigma_at(a, b, c, d, w))
        .fold(0.0, f64::max)
}

/// Relative tolerance on the returned H∞ norm.
pub const HINF_REL_TOL: f64 = 1e-7;

/// `‖G‖∞` by bisection on `γ`, using the fact that `γ` exceeds the norm
/// exactly when the associated Hamiltonian matrix has no eigenvalue on the
/// imaginary axis.
pub fn hinf_norm(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<f64> {
    check_shapes(a, b, c, Some(d))?;
    let abscissa = linalg::spectral_abscissa(a);
    if !(abscissa < 0.0) {
        return Err(Error::NotHurwitz(abscissa));
    }
    let sigma_d = linalg::sigma_max_real(d);
    if b.iter().all(|v| *v == 0.0) || c.iter().all(|v| *v == 0.0) {
        return Ok(sigma_d);
    }

    // Lower bound from D, DC gain and the resonant frequencies of A.
    let mut lo = sigma_d.max(sigma_at(a, b, c, d, 0.0));
    for z in linalg::eigenvalues(a) {
        lo = lo.max(sigma_at(a, b, c, d, z.im.abs()));
    }
    let mut hi = if lo > 0.0 { 2.0 * lo } else { 1.0 };
    let mut doublings = 0;
    while has_imaginary_eigenvalue(a, b, c, d, hi) {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Bracket(format!("no upper bound found below {hi:e}")));
        }
    }
    while hi - lo > HINF_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if has_imaginary_eigenvalue(a, b, c, d, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn has_imaginary_eigenvalue(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    gamma: f64,
) -> bool {
    let n = a.nrows();
    let (p, m) = (c.nrows(), b.ncols());
    let r = DMatrix::<f64>::identity(m, m) * (gamma * gamma) - d.transpose() * d;
    let Some(r_inv) = r.clone().cholesky().map(|ch| ch.inverse()) else {
        // γ ≤ σ_max(D)
        return true;
    };
    let a_h = a + b * &r_inv * d.transpose() * c;
    let g = b * &r_inv * b.transpose();
    let q = -(c.transpose() * (DMatrix::identity(p, p) + d * &r_inv * d.transpose()) * c);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_h);
    h.view_mut((0, n), (n, n)).copy_from(&g);
    h.view_mut((n, 0), (n, n)).copy_from(&q);
    h.view_mut((n, n), (n, n)).copy_from(&(-a_h.transpose()));
    let scale = h.amax().max(1.0);
    linalg::eigenvalues(&h).iter().any(|z| z.re.abs() <= 1e-8 * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn h2_first_order_lag() {
        let v = h2_norm(&dmatrix![-1.0], &dmatrix![1.0], &dmatrix![1.0]).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn h2_decoupled() {
        let a = dmatrix![-1.0, 0.0; 0.0, -2.0];
        let i = DMatrix::identity(2, 2);
        let v = h2_norm(&a, &i, &i).unwrap();
        assert!((v - 0.75f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn h2_zero_output() {
        let v = h2_norm(&dmatrix![-1.0], &dmatrix![1.0], &dmatrix![0.0]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn h2_unstable_is_error() {
        assert!(matches!(h2_norm(&dmatrix![1.0], &dmatrix![1.0], &dmatrix![1.0]), Err(Error::NotHurwitz(_))));
    }

    #[test]
    fn hinf_first_order_lag() {
        let v = hinf_norm(&dmatrix![-1.0], &dmatrix![1.0], &dmatrix![1.0], &dmatrix![0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn hinf_feedthrough_only() {
        let v = hinf_norm(&dmatrix![-1.0], &dmatrix![0.0], &dmatrix![0.0], &dmatrix![2.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hinf_resonant_peak() {
        // ωn = 1, ζ = 0.05: peak 1/(2ζ√(1−ζ²))
        let zeta: f64 = 0.05;
        let a = dmatrix![0.0, 1.0; -1.0, -2.0 * zeta];
        let v = hinf_norm(&a, &dmatrix![0.0; 1.0], &dmatrix![1.0, 0.0], &dmatrix![0.0]).unwrap();
        let exact = 1.0 / (2.0 * zeta * (1.0 - zeta * zeta).sqrt());
        assert!((v - exact).abs() < 1e-6 * exact, "{v} vs {exact}");
    }

    #[test]
    fn hinf_is_at_least_feedthrough() {
        let v = hinf_norm(&dmatrix![-3.0], &dmatrix![1.0], &dmatrix![1.0], &dmatrix![-0.5]).unwrap();
        assert!(v >= 0.5);
    }
}
