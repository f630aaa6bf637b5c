use fliqc_core::kinematics::bundled;
use fliqc_core::{collect_contacts, segment_sphere_distance, ContactConfig, JointState, NormalCache, SphereObstacle};
use nalgebra::Vector3;
use proptest::prelude::*;

fn v3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-r..r).prop_map(Vector3::from)
}

/// Padded distance by sampling the segment densely.
fn sampled_distance(p0: &Vector3<f64>, p1: &Vector3<f64>, c: &Vector3<f64>, radius: f64, padding: f64) -> f64 {
    const SAMPLES: usize = 100_000;
    (0..=SAMPLES)
        .map(|k| {
            let s = k as f64 / SAMPLES as f64;
            (p0 + (p1 - p0) * s - c).norm()
        })
        .fold(f64::INFINITY, f64::min)
        - radius
        - padding
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_matches_dense_sampling(
        p0 in v3(1.0), p1 in v3(1.0), c in v3(1.5), radius in 0.01f64..0.3, padding in 0.0f64..0.2
    ) {
        let sphere = SphereObstacle::new("o", c, radius);
        let d = segment_sphere_distance(&p0, &p1, &sphere, padding).unwrap();
        let oracle = sampled_distance(&p0, &p1, &c, radius, padding);
        prop_assert!((d.psi - oracle.max(0.0)).abs() < 1e-4, "{} vs {}", d.psi, oracle);
        prop_assert!(d.psi >= 0.0);
        prop_assert!((d.normal.norm() - 1.0).abs() < 1e-12);
        let along = (d.witness - p0).cross(&(p1 - p0)).norm();
        prop_assert!(along <= 1e-9 * (1.0 + (p1 - p0).norm()));
        if d.psi > 0.0 {
            prop_assert!(((d.witness - c).norm() - (d.psi + radius + padding)).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_is_monotone_in_padding(
        p0 in v3(1.0), p1 in v3(1.0), c in v3(1.5), radius in 0.01f64..0.3, a in 0.0f64..0.2, b in 0.0f64..0.2
    ) {
        let sphere = SphereObstacle::new("o", c, radius);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let d_lo = segment_sphere_distance(&p0, &p1, &sphere, lo).unwrap().psi;
        let d_hi = segment_sphere_distance(&p0, &p1, &sphere, hi).unwrap().psi;
        prop_assert!(d_hi <= d_lo);
    }

    #[test]
    fn contact_jacobian_moves_the_witness(q in prop::collection::vec(-2.5f64..2.5, 7), c in v3(0.6)) {
        let model = bundled::arm_7dof::<f64>();
        let cfg = ContactConfig { epsilon: 0.01, padding: 0.0, influence_margin: 10.0, tracked_links: (1..=7).collect() };
        let obstacles = vec![SphereObstacle::new("o", c + Vector3::new(0.0, 0.0, 0.4), 0.05)];
        let state = JointState::from_slice(&q);
        let set = collect_contacts(&model, &state, &obstacles, &cfg, &NormalCache::default()).unwrap();
        for cand in set.candidates.iter().filter(|c| !c.degenerate && !c.penetrating) {
            prop_assert!(cand.psi >= 0.0);
            prop_assert!(cand.link_index >= 1 && cand.link_index <= 7);
            for j in cand.link_index..7 {
                prop_assert!(cand.jc.column(j).amax() == 0.0);
            }
        }
    }
}
