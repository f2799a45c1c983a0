//! Dense linear-algebra helpers shared by the synthesis and verification code.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub fn max_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::NEG_INFINITY;
    }
    m.clone().symmetric_eigenvalues().max()
}

pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    m.clone().symmetric_eigenvalues().min()
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<C64> {
    m.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    spectral_abscissa(m) < 0.0
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

pub fn sigma_max(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn sigma_max_real(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Solves `A P + P Aᵀ + Q = 0` for a Hurwitz `A`.
///
/// `A` is brought to upper-triangular form by a unitary similarity (complex
/// Schur), the transformed equation is solved entry by entry from the
/// bottom-right corner, and the result is mapped back.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::Dimension(format!("lyapunov: A {:?}, Q {:?}", a.shape(), q.shape())));
    }
    let abscissa = spectral_abscissa(a);
    if !(abscissa < 0.0) {
        return Err(Error::NotHurwitz(abscissa));
    }
    let (u, t) = nalgebra::Schur::new(to_complex(a)).unpack();
    let qt = u.adjoint() * to_complex(q) * &u;

    let mut z = DMatrix::<C64>::zeros(n, n);
    for i in (0..n).rev() {
        for j in (0..n).rev() {
            let mut acc = -qt[(i, j)];
            for k in i + 1..n {
                acc -= t[(i, k)] * z[(k, j)];
            }
            for k in j + 1..n {
                acc -= z[(i, k)] * t[(j, k)].conj();
            }
            z[(i, j)] = acc / (t[(i, i)] + t[(j, j)].conj());
        }
    }
    let p = (&u * z * u.adjoint()).map(|c| c.re);
    Ok((&p + p.transpose()) * 0.5)
}

/// `A⁻¹ B` through an LU factorization.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone().lu().solve(b).ok_or_else(|| Error::InvalidArgument("singular matrix".into()))
}
