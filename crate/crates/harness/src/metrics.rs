use fliqc_core::{Outcome, Trajectory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario_id: String,
    pub run: usize,
    pub success: bool,
    pub outcome: Outcome,
    /// End-effector path length (m).
    pub path_length: f64,
    /// Mean absolute per-step per-joint displacement (rad).
    pub avg_joint_movement: f64,
    pub steps: usize,
    pub step_time_median_s: f64,
    pub step_time_p99_s: f64,
    /// Steps whose predicted distances miss ε, or whose padded links touch an obstacle.
    pub safety_violations: usize,
    /// Smallest ψ seen by any contact; empty when no contact was ever active.
    pub min_psi: Option<f64>,
}

/// Nearest-rank percentile of an already sorted slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Count of steps that fail the safety audit.
pub fn safety_violations(traj: &Trajectory<f64>) -> usize {
    traj.steps
        .iter()
        .filter(|s| (!s.infeasible() && !s.safety_ok) || s.contacts.iter().any(|c| c.penetrating))
        .count()
}

pub fn metrics(traj: &Trajectory<f64>, scenario_id: &str, run: usize) -> MetricsRow {
    let path_length = traj.ee_path.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum();
    let steps = traj.steps.len();
    let n = traj.states.first().map_or(0, |s| s.q.len());
    let total: f64 = traj
        .states
        .windows(2)
        .map(|w| (&w[1].q - &w[0].q).abs().sum())
        .sum();
    let avg_joint_movement = if steps == 0 || n == 0 {
        0.0
    } else {
        total / (n * steps) as f64
    };
    let mut times: Vec<f64> = traj.steps.iter().map(|s| s.wall_time.as_secs_f64()).collect();
    times.sort_by(f64::total_cmp);
    let min_psi = traj
        .steps
        .iter()
        .flat_map(|s| s.contacts.iter().map(|c| c.psi))
        .min_by(f64::total_cmp);
    MetricsRow {
        scenario_id: scenario_id.to_string(),
        run,
        success: traj.outcome == Outcome::ReachedGoal,
        outcome: traj.outcome,
        path_length,
        avg_joint_movement,
        steps,
        step_time_median_s: percentile(&times, 50.0),
        step_time_p99_s: percentile(&times, 99.0),
        safety_violations: safety_violations(traj),
        min_psi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fliqc_core::JointState;
    use nalgebra::DVector;

    fn straight(nsteps: usize, len: f64) -> Trajectory<f64> {
        let states: Vec<_> = (0..=nsteps)
            .map(|k| JointState::from_slice(&[0.1 * k as f64, 0.0]))
            .collect();
        let ee_path = (0..=nsteps)
            .map(|k| DVector::from_column_slice(&[len * k as f64 / nsteps as f64, 0.0, 0.0]))
            .collect();
        Trajectory {
            states,
            ee_path,
            steps: Vec::new(),
            outcome: Outcome::ReachedGoal,
            h: 0.001,
        }
    }

    #[test]
    fn telescoping_path_length() {
        let m = metrics(&straight(100, 0.1), "s", 0);
        assert!((m.path_length - 0.1).abs() < 1e-12);
        assert!(m.success);
    }

    #[test]
    fn constant_configuration() {
        let mut t = straight(10, 0.0);
        for s in &mut t.states {
            s.q.fill(0.3);
        }
        let m = metrics(&t, "s", 0);
        assert_eq!(m.path_length, 0.0);
        assert_eq!(m.avg_joint_movement, 0.0);
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), 50.0);
        assert_eq!(percentile(&v, 99.0), 99.0);
        assert_eq!(percentile(&[3.0], 99.0), 3.0);
    }
}
