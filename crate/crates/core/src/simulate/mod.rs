//! Exact piecewise-exponential simulation.
//!
//! Between impulses every state is obtained as `e^{A(t−t_jump)}·x(t_jump⁺)`
//! from the last post-jump state, so the only error source is the matrix
//! exponential itself. Sample grids are for reporting only.

mod ode;
mod parabolic;
mod trajectory;

pub use ode::{mr_residual, mr_residuals, post_jump_states, simulate_comparison, simulate_ode};
pub use parabolic::{l2_norm, random_initial_modes, simulate_parabolic, ParabolicModel};
pub use trajectory::{fmt_f64, NormKind, Sample, Trajectory, TrajectoryMeta};
