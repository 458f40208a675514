pub mod ops;
pub mod projection;
pub mod step;
pub mod vi;

pub use ops::{convection, divergence, max_abs_divergence, trilinear};
pub use projection::{build_obstacle, make_feasible, obstacle_project, FlowStepReport, ObstacleField, Projector, WarmStart};
pub use step::{cfl_number, FlowSolver, FlowStep};
pub use vi::{flow_energy_ratio, vi_residual, FlowTrajectory};
