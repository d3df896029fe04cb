//! Finite-volume laboratory for the one-dimensional fully parabolic
//! quasilinear Keller-Segel system
//!
//! ```text
//! u_t = (a(u) u_x - chi u v_x)_x,   eps v_t = D v_xx + u - M + gamma v
//! ```
//!
//! on `(0, 1)` with no-flux boundaries: simulation, Liapunov diagnostics,
//! blowup certificates and checks of the supporting functional inequalities.

pub mod certificate;
pub mod diagnostics;
pub mod diffusion;
pub mod discretization;
pub mod entropy;
pub mod error;
pub mod inequality;
pub mod model;
pub mod quad;
pub mod timestepper;

pub use certificate::{CertificateReport, Certifier, ConcaveEnvelope};
pub use diagnostics::{Diagnostics, DiagnosticsRecord, MomentConfig};
pub use diffusion::{DiffusionModel, TabulatedDiffusion};
pub use entropy::EntropyProfile;
pub use error::{Error, Result};
pub use model::{CellField, GridSpec, Params, State};
pub use timestepper::{BlowupCriteria, BlowupReason, Outcome, RunSetup, StepController, Trajectory};
