use fliqc_core::{ee_position, JointState, SolveStatus};
use fliqc_harness::trace::{predicted_distance_gap, trace_rows};
use fliqc_harness::*;

fn scene(name: &str) -> Scenario {
    load_scenario(data_dir().join("scenes").join(name)).unwrap()
}

#[test]
fn single_run_on_the_planar_fixture_succeeds() {
    let sc = scene("planar_2r_example.json");
    let rep = run_batch(&sc, 1, 0).unwrap();
    assert_eq!(rep.rows.len(), 1);
    let row = &rep.rows[0];
    assert!(row.success);
    assert_eq!(row.safety_violations, 0);
    let start = ee_position(&sc.core.model, &JointState::new(sc.core.q_start.clone())).unwrap();
    let direct = (&sc.core.goal - &start).norm();
    let traj = run_scenario(&sc).unwrap();
    let reached = (traj.ee_path.last().unwrap() - &start).norm();
    assert!(row.path_length >= reached, "{}", row.path_length);
    assert!(row.path_length >= direct - sc.core.config.planner.goal_tol);
    assert!(row.path_length <= 3.0 * direct, "{}", row.path_length);
    assert!(row.avg_joint_movement > 0.0);
}

#[test]
fn planar_fixture_metrics_regression() {
    let row = &run_batch(&scene("planar_2r_example.json"), 1, 0).unwrap().rows[0];
    assert_eq!(row.steps, 115);
    assert!((row.path_length - 0.108772).abs() < 1e-5, "{}", row.path_length);
}

#[test]
fn batches_are_deterministic_per_seed() {
    let sc = scene("arm_front_wall.json");
    let strip = |r: &BatchReport| {
        r.rows
            .iter()
            .map(|m| (m.success, m.steps, m.path_length.to_bits(), m.avg_joint_movement.to_bits()))
            .collect::<Vec<_>>()
    };
    let a = run_batch(&sc, 12, 42).unwrap();
    let b = run_batch(&sc, 12, 42).unwrap();
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(a.samples, b.samples);
    let c = run_batch(&sc, 12, 43).unwrap();
    assert_ne!(a.samples, c.samples);
}

#[test]
fn obstacle_free_batch_always_succeeds() {
    let rep = run_batch(&scene("arm_free.json"), 20, 1).unwrap();
    assert_eq!(rep.aggregate.success_rate, 1.0);
    for (row, (_, goal)) in rep.rows.iter().zip(&rep.samples) {
        assert!(row.path_length >= 0.0 && row.avg_joint_movement >= 0.0);
        assert!(row.success);
        let _ = goal;
    }
}

#[test]
fn sampled_pairs_are_feasible_and_inside_the_boxes() {
    let sc = scene("arm_center_post.json");
    let smp = sc.sampling.clone().unwrap();
    let pairs = batch::sample_pairs(&sc, &smp, 30, 9).unwrap();
    for (q, g) in &pairs {
        assert!(batch::is_feasible_pair(&sc, q, g).unwrap());
        for j in 0..q.len() {
            assert!(q[j] >= smp.q_start_lo[j] && q[j] <= smp.q_start_hi[j]);
        }
        for j in 0..g.len() {
            assert!(g[j] >= smp.goal_lo[j] && g[j] <= smp.goal_hi[j]);
        }
    }
}

#[test]
fn zero_runs_is_rejected() {
    assert!(run_batch(&scene("planar_2r_example.json"), 0, 0).is_err());
}

#[test]
fn metrics_csv_has_one_line_per_run() {
    let rep = run_batch(&scene("planar_2r_example.json"), 2, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    batch::write_metrics_csv(&rep.rows, &out).unwrap();
    let text = std::fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("scenario_id,run,success,outcome,path_length"));
}

#[test]
fn trace_rows_match_the_trajectory() {
    let sc = scene("planar_2r_example.json");
    let traj = run_scenario(&sc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("t.csv");
    export_trace(&traj, &csv_path, TraceFormat::Csv).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,t,q_0,q_1,qdot_0,qdot_1,status,wall_time_us,n_contacts,min_psi,min_predicted,contacts"
    );
    assert_eq!(lines.count(), traj.steps.len() + 1);
    assert!(text.lines().last().unwrap().contains(",end,"));

    let json_path = dir.path().join("t.json");
    export_trace(&traj, &json_path, TraceFormat::Json).unwrap();
    let back = read_trace_json(&json_path).unwrap();
    assert_eq!(back.rows.len(), traj.steps.len() + 1);
    for (row, step) in back.rows.iter().zip(&traj.steps) {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&row.qdot), bits(step.qdot.as_slice()));
        assert_eq!(bits(&row.qdot_raw), bits(step.qdot_raw.as_slice()));
    }
    assert_eq!(back.rows, trace_rows(&traj));
}

#[test]
fn trace_audit_and_log_integrity() {
    let sc = scene("planar_2r_example.json");
    let traj = run_scenario(&sc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    export_trace(&traj, &path, TraceFormat::Json).unwrap();
    let trace = read_trace_json(&path).unwrap();
    let infeasible = format!("{:?}", SolveStatus::InfeasibleLinear);
    let mut audited = 0;
    for row in &trace.rows {
        if row.status == infeasible || row.status == "end" {
            continue;
        }
        for c in &row.contacts {
            assert!(c.predicted >= c.epsilon - 1e-8, "step {}: {}", row.step, c.predicted);
            audited += 1;
        }
    }
    assert!(audited > 0);
    assert!(predicted_distance_gap(&trace) <= 1e-12);
}

#[test]
fn trace_format_parses() {
    assert_eq!("csv".parse::<TraceFormat>().unwrap(), TraceFormat::Csv);
    assert_eq!("json".parse::<TraceFormat>().unwrap(), TraceFormat::Json);
    assert!("xml".parse::<TraceFormat>().is_err());
}

#[test]
fn unwritable_trace_path_is_an_io_error() {
    let traj = run_scenario(&scene("planar_2r_example.json")).unwrap();
    let err = export_trace(&traj, "/nonexistent-dir/t.csv", TraceFormat::Csv).unwrap_err();
    assert!(matches!(err, HarnessError::Io { .. }));
}

#[test]
fn success_implies_goal_within_tolerance() {
    let sc = scene("arm_side_posts.json");
    let rep = run_batch(&sc, 10, 5).unwrap();
    for (row, (q, g)) in rep.rows.iter().zip(&rep.samples) {
        if row.success {
            let mut s = sc.clone();
            s.core.q_start = q.clone();
            s.core.goal = g.clone();
            let traj = run_scenario(&s).unwrap();
            let last = traj.ee_path.last().unwrap();
            assert!((g - last).norm() <= sc.core.config.planner.goal_tol);
        }
    }
}
