use fliqc_core::SphereObstacle;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Scripted velocity reversals for one obstacle: each time the obstacle reaches the next
/// waypoint its velocity is negated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversalScript {
    pub id: String,
    pub waypoints: Vec<[f64; 3]>,
    #[serde(skip)]
    pub next: usize,
}

impl ReversalScript {
    pub fn reset(&mut self) {
        self.next = 0;
    }
}

/// Move every obstacle by `velocity·h`, then apply any reversal whose waypoint was reached
/// (the displacement to the waypoint no longer points along the velocity).
pub fn advance_obstacles(obstacles: &mut [SphereObstacle<f64>], h: f64, scripts: &mut [ReversalScript]) {
    for o in obstacles.iter_mut() {
        o.center += o.velocity * h;
        let Some(script) = scripts.iter_mut().find(|s| s.id == o.id) else {
            continue;
        };
        let Some(w) = script.waypoints.get(script.next) else {
            continue;
        };
        let w = Vector3::new(w[0], w[1], w[2]);
        if (w - o.center).dot(&o.velocity) <= 0.0 {
            o.velocity = -o.velocity;
            script.next += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_velocity_shift() {
        let mut obs = vec![SphereObstacle::new("a", Vector3::zeros(), 0.1).with_velocity(Vector3::new(0.05, 0.0, 0.0))];
        advance_obstacles(&mut obs, 0.001, &mut []);
        assert!((obs[0].center.x - 5e-5).abs() < 1e-18);
        let mut still = vec![SphereObstacle::new("b", Vector3::new(1.0, 2.0, 3.0), 0.1)];
        advance_obstacles(&mut still, 0.001, &mut []);
        assert_eq!(still[0].center, Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn reversal_at_waypoint() {
        let mut obs = vec![SphereObstacle::new("a", Vector3::zeros(), 0.1).with_velocity(Vector3::new(1.0, 0.0, 0.0))];
        let mut scripts = vec![ReversalScript {
            id: "a".into(),
            waypoints: vec![[0.35, 0.0, 0.0]],
            next: 0,
        }];
        for _ in 0..4 {
            advance_obstacles(&mut obs, 0.1, &mut scripts);
        }
        assert_eq!(obs[0].velocity.x, -1.0);
        assert_eq!(scripts[0].next, 1);
        for _ in 0..10 {
            advance_obstacles(&mut obs, 0.1, &mut scripts);
        }
        assert_eq!(obs[0].velocity.x, -1.0);
    }
}
