//! Stability analysis of linear impulsive systems whose impulse instants
//! satisfy an averaged dwell-time condition.
//!
//! The toolkit reduces the original system to a comparison system with
//! constant dwell-time, whose jumps absorb the timing deviations through
//! nested-commutator series, and evaluates a Lyapunov matrix-inequality
//! certificate for the impulsive reaction-diffusion instance. Every
//! reduction step is also checked numerically by exact piecewise-exponential
//! simulation.
//!
//! - [`numerics`]: dense matrix kernels (exponential, spectra, norms)
//! - [`commutator`]: `{B,Aᵐ}`, Hadamard series, ω, μ and convergence proxy
//! - [`impulse_times`]: ADT / ADT⁺ schedule generation and validation
//! - [`system`]: comparison-system jumps and the lifted initial state
//! - [`simulate`]: ODE, comparison and sine-mode parabolic simulation
//! - [`certify`]: the stability certificate and a `𝐏₀` search

pub mod certify;
pub mod commutator;
pub mod error;
pub mod impulse_times;
pub mod json;
pub mod numerics;
pub mod simulate;
pub mod system;

pub use certify::{certify_prop1, search_p0, CertificateReport};
pub use commutator::{hadamard_series, nested_commutators, omega_bound, CommutatorSequence};
pub use error::{Error, Result};
pub use impulse_times::{generate, ImpulseSchedule, ScheduleDocument, Variant};
pub use numerics::{expm, SquareMatrix, SymmetricPD};
pub use simulate::{simulate_ode, simulate_parabolic, ParabolicModel, Trajectory};
pub use system::ImpulsiveSystem;
