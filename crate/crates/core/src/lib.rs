//! Reactive motion planning for serial manipulators among spherical obstacles.
//!
//! Each control step solves a quadratic program with linear complementarity constraints
//! over joint velocities and contact multipliers. The crate is generic over the scalar type;
//! the `*64` and `*32` aliases below fix it.

pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod lcqp;
pub mod planner;
pub mod scalar;

pub use error::{Error, Result};
pub use geometry::{
    collect_contacts, link_capsules, min_surface_distance, segment_sphere_distance, ContactCandidate,
    ContactConfig, ContactKey, ContactSet, LinkCapsule, NormalCache, SphereObstacle,
};
pub use kinematics::{
    damped_pinv, ee_position, forward_kinematics, integrate, jacobian, point_jacobian, JointState,
    LinkPose, RobotModel, TaskSpace,
};
pub use lcqp::{solve_lcqp, LcqProblem, SolveResult, SolveStatus, SolverOptions};
pub use planner::{
    assemble_fliqc, plan, plan_with, step, task_velocity, verify_safety, CostSpec, Outcome, PlannerConfig,
    Scenario, StepConfig, StepResult, Trajectory, WarmStart,
};
pub use scalar::Real;

pub type RobotModel64 = RobotModel<f64>;
pub type RobotModel32 = RobotModel<f32>;
pub type JointState64 = JointState<f64>;
pub type JointState32 = JointState<f32>;
pub type SphereObstacle64 = SphereObstacle<f64>;
pub type SphereObstacle32 = SphereObstacle<f32>;
pub type LcqProblem64 = LcqProblem<f64>;
pub type LcqProblem32 = LcqProblem<f32>;
pub type Scenario64 = Scenario<f64>;
pub type Scenario32 = Scenario<f32>;
pub type Trajectory64 = Trajectory<f64>;
pub type Trajectory32 = Trajectory<f32>;
pub type StepConfig64 = StepConfig<f64>;
pub type StepConfig32 = StepConfig<f32>;
