use fliqc_harness::scenario::{RobotRef, ScenarioFile};
use fliqc_harness::*;
use nalgebra::Vector3;

fn scene(name: &str) -> std::path::PathBuf {
    data_dir().join("scenes").join(name)
}

#[test]
fn planar_example_loads_with_its_values() {
    let sc = load_scenario(scene("planar_2r_example.json")).unwrap();
    assert_eq!(sc.id, "planar_2r_example");
    assert_eq!(sc.core.q_start.as_slice(), &[0.523, 0.785]);
    assert_eq!(sc.core.goal.as_slice(), &[-0.05, 0.05]);
    assert_eq!(sc.core.obstacles.len(), 1);
    assert_eq!(sc.core.obstacles[0].center, Vector3::new(0.0, 0.08, 0.0));
    assert_eq!(sc.core.obstacles[0].radius, 0.02);
    let cfg = &sc.core.config;
    assert_eq!(cfg.contact.epsilon, 0.01);
    assert_eq!(cfg.planner.h, 0.001);
    assert_eq!(cfg.planner.k_d, 1.0);
    assert_eq!(cfg.solver.max_inner, 1000);
    assert_eq!(sc.core.model.n(), 2);
}

#[test]
fn every_bundled_scene_loads() {
    let mut count = 0;
    for entry in std::fs::read_dir(data_dir().join("scenes")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 9);
}

#[test]
fn defaults_are_applied() {
    let text = r#"{
        "robot_model": "bundled:planar_2r",
        "q_start": [0.1, 0.2],
        "goal": [0.05, 0.05],
        "contact_cfg": {"epsilon": 0.02}
    }"#;
    let sc = Scenario::from_json(text, std::path::Path::new(".")).unwrap();
    let cfg = &sc.core.config;
    assert_eq!(cfg.planner.h, 0.001);
    assert_eq!(cfg.contact.padding, 0.15);
    assert_eq!(cfg.contact.influence_margin, 0.02);
    assert_eq!(cfg.contact.tracked_links, vec![1, 2]);
    assert!(sc.core.obstacles.is_empty());
}

#[test]
fn missing_goal_is_named() {
    let text = r#"{
        "robot_model": "bundled:planar_2r",
        "q_start": [0.1, 0.2],
        "contact_cfg": {"epsilon": 0.02}
    }"#;
    let err = Scenario::from_json(text, std::path::Path::new(".")).unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("goal"), "{err}");
}

#[test]
fn nested_schema_errors_carry_the_field_path() {
    let text = r#"{
        "robot_model": "bundled:planar_2r",
        "q_start": [0.1, 0.2],
        "goal": [0.05, 0.05],
        "contact_cfg": {"epsilon": 0.02},
        "planner_cfg": {"h": "fast"}
    }"#;
    match Scenario::from_json(text, std::path::Path::new(".")).unwrap_err() {
        HarnessError::Schema { field, .. } => assert_eq!(field, "planner_cfg.h"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn unknown_fields_and_bad_values_are_rejected() {
    let unknown = r#"{
        "robot_model": "bundled:planar_2r", "q_start": [0.1, 0.2], "goal": [0.05, 0.05],
        "contact_cfg": {"epsilon": 0.02}, "speed": 3
    }"#;
    assert!(Scenario::from_json(unknown, std::path::Path::new(".")).is_err());
    let wrong_dim = r#"{
        "robot_model": "bundled:planar_2r", "q_start": [0.1, 0.2, 0.3], "goal": [0.05, 0.05],
        "contact_cfg": {"epsilon": 0.02}
    }"#;
    assert!(Scenario::from_json(wrong_dim, std::path::Path::new(".")).is_err());
    let bad_h = r#"{
        "robot_model": "bundled:planar_2r", "q_start": [0.1, 0.2], "goal": [0.05, 0.05],
        "contact_cfg": {"epsilon": 0.02}, "planner_cfg": {"h": -1.0}
    }"#;
    assert!(Scenario::from_json(bad_h, std::path::Path::new(".")).is_err());
    let missing_robot = r#"{
        "robot_model": "nowhere.json", "q_start": [0.1, 0.2], "goal": [0.05, 0.05],
        "contact_cfg": {"epsilon": 0.02}
    }"#;
    assert!(Scenario::from_json(missing_robot, std::path::Path::new(".")).is_err());
}

#[test]
fn load_save_load_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["planar_2r_example.json", "arm_dynamic.json", "arm_front_wall.json"] {
        let a = load_scenario(scene(name)).unwrap();
        let out = dir.path().join(name);
        save_scenario(&a, &out).unwrap();
        let b = load_scenario(&out).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn inline_robot_round_trips() {
    let sc = load_scenario(scene("planar_2r_example.json")).unwrap();
    let mut file: ScenarioFile = sc.to_file();
    file.robot_model = RobotRef::Inline(Box::new(fliqc_core::kinematics::RobotModelFile::from_model(&sc.core.model)));
    let text = serde_json::to_string(&file).unwrap();
    let back = Scenario::from_json(&text, std::path::Path::new(".")).unwrap();
    assert_eq!(back.core, sc.core);
}
