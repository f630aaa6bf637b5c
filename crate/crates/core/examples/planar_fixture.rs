use fliqc_core::kinematics::bundled;
use fliqc_core::*;
use nalgebra::{DVector, Vector3};

fn main() {
    let sc = Scenario {
        model: bundled::planar_2r::<f64>(),
        q_start: DVector::from_column_slice(&[0.523, 0.785]),
        goal: DVector::from_column_slice(&[-0.05, 0.05]),
        obstacles: vec![SphereObstacle::new("o1", Vector3::new(0.0, 0.08, 0.0), 0.02)],
        config: StepConfig {
            contact: ContactConfig { epsilon: 0.01, padding: 0.0, influence_margin: 0.02, tracked_links: vec![1, 2] },
            planner: PlannerConfig { h: 0.001, k_d: 1.0, k_q: 1.0, k_c: 1.0, max_iters: 1000, ..Default::default() },
            solver: SolverOptions { max_inner: 1000, ..Default::default() },
        },
    };
    let traj = plan(&sc).unwrap();
    let min_psi = traj
        .steps
        .iter()
        .flat_map(|s| s.contacts.iter().map(|c| c.psi))
        .fold(f64::INFINITY, f64::min);
    println!("{:?} after {} steps, closest approach {min_psi:.5} m", traj.outcome, traj.steps.len());
    let end = traj.ee_path.last().unwrap();
    println!("end effector at ({:.4}, {:.4})", end[0], end[1]);
}
