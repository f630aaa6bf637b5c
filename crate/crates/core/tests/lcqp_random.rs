mod common;

use fliqc_core::lcqp::enumerate_lcqp_oracle;
use fliqc_core::{solve_lcqp, SolverOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_instances_against_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut matched, mut total) = (0, 0);
    for k in 0..500 {
        let pr = common::random_lcqp(&mut rng);
        let Some(best) = enumerate_lcqp_oracle(&pr).unwrap() else { continue };
        total += 1;
        let res = solve_lcqp(&pr, &SolverOptions::default()).unwrap();
        let obj = pr.objective(&res.y);
        assert!(
            best.objective <= obj + 1e-8,
            "oracle beaten on {k}: {} vs {obj}, phi {}, viol {}, {:?}",
            best.objective,
            res.phi,
            pr.max_violation(&res.y),
            res.status
        );
        assert!(pr.max_violation(&res.y) <= 1e-9, "infeasible on {k}");
        assert!(res.phi <= 1e-6, "phi {} on {k} {:?}", res.phi, res.status);
        if (obj - best.objective).abs() <= 1e-6 {
            matched += 1;
        }
    }
    assert!(matched as f64 >= 0.95 * total as f64);
}
