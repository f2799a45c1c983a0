//! Joint synthesis of LPV observer gains and minimum sensor precision.
//!
//! A plant affine in a bounded scheduling parameter is turned into a set of
//! vertex LMIs whose solution gives both an observer gain `L` and a per-sensor
//! precision vector, minimized in `‖·‖_p` subject to an H2 or H∞ bound on the
//! estimation error. The [`cr3bp`] module provides the three-body case study,
//! [`sim`] and [`certify`] the independent checks.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tuple returns of matrix sets read better here than one-off structs.
#![allow(clippy::type_complexity)]

pub mod affine;
pub mod certify;
pub mod cr3bp;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lmi;
pub mod norms;
pub mod ode;
pub mod plant;
pub mod sim;
pub mod synthesis;

pub use affine::{AffineMatrixFunction, ParameterBox};
pub use certify::{certify, certify_gain, CertificationReport, CertifyOptions};
pub use cr3bp::{Cr3bpConfig, RhoSample};
pub use error::{Error, Result};
pub use lmi::{NormOrder, SdpProblem, SolverSettings};
pub use plant::{closed_loop, LpvPlant, ObserverErrorSystem, StateSpace};
pub use sim::{NoiseSpec, Scheduling, SimulationMetrics, SimulationTrace};
pub use synthesis::{NormKind, ObserverDesign, PrecisionMapping, SynthesisRequest, SynthesisResult, SynthesisStatus};
