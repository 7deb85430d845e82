//! Plant models, bound estimation, closed-loop simulation and the
//! deviation/invariance checks.

mod bounds;
mod checks;
mod sim;
mod systems;

pub use bounds::{estimate_bounds, measure_lipschitz, pendulum_interval_bounds, PlantBounds, DEFAULT_SAFETY, FD_STEP};
pub use checks::{deviation_check, invariance_check, DeviationReport, InvarianceReport, Offender};
pub use sim::{expert_controller, rk4_step, simulate, step_count, ExpertController, Trajectory, DIVERGENCE_FACTOR};
pub use systems::{pendulum_field, ControlSystem, FnSystem, Jacobian, LinearSystem, Pendulum, PendulumParams};
