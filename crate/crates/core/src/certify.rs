//! A-posteriori checks of a synthesized observer with ρ frozen at the box
//! vertices and at random interior points. These are frozen-parameter checks;
//! the time-varying guarantee rests on the shared quadratic certificate,
//! whose LMI residuals are carried over from synthesis.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::norms;
use crate::plant::{closed_loop, LpvPlant};
use crate::synthesis::{NormKind, SynthesisResult};

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub interior_samples: usize,
    pub seed: u64,
    /// Allowed relative excess of a frozen norm over γ.
    pub rel_tol: f64,
    /// Use the gain with unused sensor columns zeroed.
    pub prune_inactive: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { interior_samples: 100, seed: 0, rel_tol: 1e-4, prune_inactive: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    /// `vertex k` or `sample k`.
    pub label: String,
    pub rho: Vec<f64>,
    pub spectral_abscissa: f64,
    pub hurwitz: bool,
    /// Frozen-ρ norm; absent when the point is not Hurwitz.
    pub norm: Option<f64>,
    pub norm_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub norm: NormKind,
    pub gamma: f64,
    pub points: Vec<PointCheck>,
    /// `min (γ(1+tol) − ‖G‖) / γ` over all points; negative on failure.
    pub worst_norm_margin: f64,
    pub worst_spectral_abscissa: f64,
    /// Largest LMI residual eigenvalue reported by the synthesis, if any.
    pub certificate_residual: Option<f64>,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Certify a synthesis result on `plant`.
pub fn certify(plant: &LpvPlant, result: &SynthesisResult, opts: &CertifyOptions) -> Result<CertificationReport> {
    let design = result
        .design
        .as_ref()
        .filter(|_| result.is_optimal())
        .ok_or_else(|| Error::InvalidArgument("only optimal results can be certified".into()))?;
    let l = if opts.prune_inactive { design.pruned_gain() } else { design.l.clone() };
    let mut report = certify_gain(plant, &l, &design.noise_scaling(), result.norm, result.gamma, opts)?;
    report.certificate_residual = Some(design.worst_residual());
    Ok(report)
}

/// Certify an arbitrary gain `l` with noise scaling `s_n`.
pub fn certify_gain(
    plant: &LpvPlant,
    l: &DMatrix<f64>,
    s_n: &DMatrix<f64>,
    norm: NormKind,
    gamma: f64,
    opts: &CertifyOptions,
) -> Result<CertificationReport> {
    let sys = closed_loop(plant, l, s_n)?;
    let mut points: Vec<(String, Vec<f64>)> =
        plant.param_box.vertices().into_iter().enumerate().map(|(k, v)| (format!("vertex {k}"), v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for k in 0..opts.interior_samples {
        let t: Vec<f64> = (0..plant.n_rho()).map(|_| rng.random::<f64>()).collect();
        points.push((format!("sample {k}"), plant.param_box.interpolate(&t)));
    }

    let bound = gamma * (1.0 + opts.rel_tol);
    let mut checks = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    for (label, rho) in points {
        let ss = sys.frozen(&rho)?;
        let abscissa = linalg::spectral_abscissa(&ss.a);
        let hurwitz = abscissa < 0.0;
        let value = if hurwitz {
            Some(match norm {
                NormKind::H2 => norms::h2_norm(&ss.a, &ss.b, &ss.c)?,
                NormKind::Hinf => norms::hinf_norm(&ss.a, &ss.b, &ss.c, &ss.d)?,
            })
        } else {
            None
        };
        let norm_ok = value.is_some_and(|v| v <= bound);
        if !hurwitz {
            failures.push(format!("{label}: A + L C_y not Hurwitz (max Re λ = {abscissa:.6e})"));
        } else if !norm_ok {
            failures
                .push(format!("{label}: frozen {norm} norm {:.6e} exceeds γ = {gamma:.6e}", value.unwrap_or(f64::NAN)));
        }
        checks.push(PointCheck { label, rho, spectral_abscissa: abscissa, hurwitz, norm: value, norm_ok });
    }

    let worst_norm_margin =
        checks.iter().map(|c| c.norm.map_or(f64::NEG_INFINITY, |v| (bound - v) / gamma)).fold(f64::INFINITY, f64::min);
    let worst_spectral_abscissa = checks.iter().map(|c| c.spectral_abscissa).fold(f64::NEG_INFINITY, f64::max);
    Ok(CertificationReport {
        norm,
        gamma,
        passed: failures.is_empty(),
        points: checks,
        worst_norm_margin,
        worst_spectral_abscissa,
        certificate_residual: None,
        failures,
    })
}
