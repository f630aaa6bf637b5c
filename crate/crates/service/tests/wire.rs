use fliqc_service::wire::{ServerState, WireContact, WireObstacle, WireSegment};
use fliqc_service::{ControlAction, WireMessage};
use proptest::prelude::*;

fn v3() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-10.0f64..10.0)
}

fn server_state() -> impl Strategy<Value = ServerState> {
    (
        any::<u32>(),
        0.0f64..100.0,
        prop::collection::vec(-3.0f64..3.0, 1..8),
        v3(),
        prop::collection::vec((1usize..8, v3(), v3()), 0..6),
        prop::collection::vec(("[a-z]{1,4}", v3(), 0.01f64..1.0), 0..4),
        prop::collection::vec((1usize..8, "[a-z]{1,4}", 0.0f64..1.0, 0.0f64..5.0, v3()), 0..4),
        any::<bool>(),
    )
        .prop_map(|(tick, t, q, ee, segs, obs, contacts, flag)| ServerState {
            tick: tick as u64,
            t,
            q,
            ee,
            goal: ee,
            link_segments: segs.into_iter().map(|(link, p0, p1)| WireSegment { link, p0, p1 }).collect(),
            obstacles: obs.into_iter().map(|(id, center, radius)| WireObstacle { id, center, radius }).collect(),
            contacts: contacts
                .into_iter()
                .map(|(link, obstacle_id, psi, lambda, normal)| WireContact {
                    link,
                    obstacle_id,
                    psi,
                    epsilon: 0.01,
                    lambda,
                    predicted: psi,
                    normal,
                })
                .collect(),
            solver_status: "Optimal".into(),
            step_time_us: t,
            paused: flag,
            violation: !flag,
        })
}

fn message() -> impl Strategy<Value = WireMessage> {
    prop_oneof![
        server_state().prop_map(WireMessage::ServerState),
        ("[a-z]{1,6}", v3()).prop_map(|(id, center)| WireMessage::ClientObstacleUpdate { id, center }),
        prop_oneof![
            Just(ControlAction::Pause),
            Just(ControlAction::Resume),
            Just(ControlAction::Reset),
            Just(ControlAction::SetGoal)
        ]
        .prop_flat_map(|action| prop::option::of(v3()).prop_map(move |goal| WireMessage::ClientControl { action, goal })),
    ]
}

proptest! {
    #[test]
    fn every_message_round_trips(msg in message()) {
        let text = serde_json::to_string(&msg).unwrap();
        let back: WireMessage = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, msg);
    }
}

fn schema() -> serde_json::Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/wire_schema_v1.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn schema_file_lists_every_field_the_server_sends() {
    let schema = schema();
    let defs = &schema["$defs"];
    let sample = WireMessage::ServerState(ServerState {
        tick: 1,
        t: 0.0,
        q: vec![0.0],
        ee: [0.0; 3],
        goal: [0.0; 3],
        link_segments: vec![WireSegment { link: 1, p0: [0.0; 3], p1: [1.0; 3] }],
        obstacles: vec![WireObstacle { id: "a".into(), center: [0.0; 3], radius: 0.1 }],
        contacts: vec![WireContact {
            link: 1,
            obstacle_id: "a".into(),
            psi: 0.1,
            epsilon: 0.01,
            lambda: 0.0,
            predicted: 0.1,
            normal: [0.0, 0.0, 1.0],
        }],
        solver_status: "Optimal".into(),
        step_time_us: 1.0,
        paused: false,
        violation: false,
    });
    let value = serde_json::to_value(&sample).unwrap();
    let keys = |v: &serde_json::Value| {
        let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
        k.sort();
        k
    };
    let required = |v: &serde_json::Value| {
        let mut k: Vec<String> = v["required"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect();
        k.sort();
        k
    };
    let ss = &defs["ServerState"];
    assert_eq!(keys(&value), required(ss));
    assert_eq!(keys(&value), keys(&ss["properties"]));
    let items = |name: &str| &ss["properties"][name]["items"];
    assert_eq!(keys(&value["link_segments"][0]), required(items("link_segments")));
    assert_eq!(keys(&value["obstacles"][0]), required(items("obstacles")));
    assert_eq!(keys(&value["contacts"][0]), required(items("contacts")));
    for (name, msg) in [
        ("ClientObstacleUpdate", WireMessage::ClientObstacleUpdate { id: "a".into(), center: [0.0; 3] }),
        ("ClientControl", WireMessage::ClientControl { action: ControlAction::SetGoal, goal: Some([0.0; 3]) }),
    ] {
        let v = serde_json::to_value(&msg).unwrap();
        assert_eq!(v["type"], name);
        assert_eq!(keys(&v), keys(&defs[name]["properties"]));
    }
    let actions: Vec<String> = defs["ClientControl"]["properties"]["action"]["enum"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap().to_string())
        .collect();
    for a in [ControlAction::Pause, ControlAction::Resume, ControlAction::Reset, ControlAction::SetGoal] {
        let s = serde_json::to_value(a).unwrap();
        assert!(actions.contains(&s.as_str().unwrap().to_string()));
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let text = r#"{"type":"ClientObstacleUpdate","id":"a","center":[0,0,0],"extra":1}"#;
    assert!(serde_json::from_str::<WireMessage>(text).is_err());
}
