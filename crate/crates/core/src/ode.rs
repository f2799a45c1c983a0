//! Fixed-step classical Runge–Kutta.

use crate::error::Result;

/// One RK4 step of `ẋ = f(x)` of size `dt`.
pub fn rk4_step<const N: usize, F>(f: F, x: &[f64; N], dt: f64) -> Result<[f64; N]>
where
    F: Fn(&[f64; N]) -> Result<[f64; N]>,
{
    let shifted = |base: &[f64; N], k: &[f64; N], h: f64| -> [f64; N] { std::array::from_fn(|i| base[i] + h * k[i]) };
    let k1 = f(x)?;
    let k2 = f(&shifted(x, &k1, 0.5 * dt))?;
    let k3 = f(&shifted(x, &k2, 0.5 * dt))?;
    let k4 = f(&shifted(x, &k3, dt))?;
    Ok(std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let f = |x: &[f64; 1]| Ok([-x[0]]);
        let err = |dt: f64| {
            let mut x = [1.0];
            let n = (1.0 / dt).round() as usize;
            for _ in 0..n {
                x = rk4_step(f, &x, dt).unwrap();
            }
            (x[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }
}
