//! Link-segment versus sphere-obstacle distance queries and contact extraction.

use std::collections::HashMap;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{ChainPoses, JointState, RobotModel};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SphereObstacle<T: Real> {
    pub id: String,
    pub center: Vector3<T>,
    pub radius: T,
    pub velocity: Vector3<T>,
}

impl<T: Real> SphereObstacle<T> {
    pub fn new(id: impl Into<String>, center: Vector3<T>, radius: T) -> Self {
        Self {
            id: id.into(),
            center,
            radius,
            velocity: Vector3::zeros(),
        }
    }

    pub fn with_velocity(mut self, velocity: Vector3<T>) -> Self {
        self.velocity = velocity;
        self
    }
}

/// A link segment posed in the world frame together with its padding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCapsule<T: Real> {
    pub link_index: usize,
    pub p0: Vector3<T>,
    pub p1: Vector3<T>,
    pub padding: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactConfig<T: Real> {
    /// Safety threshold ε (m).
    pub epsilon: T,
    /// Padding around each link (m).
    pub padding: T,
    /// Pairs farther than `epsilon + influence_margin` are dropped.
    pub influence_margin: T,
    /// 1-based link indices checked for collisions.
    pub tracked_links: Vec<usize>,
}

impl<T: Real> Default for ContactConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(0.01),
            padding: T::lit(0.15),
            influence_margin: T::lit(0.02),
            tracked_links: Vec::new(),
        }
    }
}

impl<T: Real> ContactConfig<T> {
    pub fn validate(&self, links: usize) -> Result<()> {
        if !(self.epsilon > T::zero()) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.padding < T::zero() || self.influence_margin < T::zero() {
            return Err(Error::InvalidConfig(
                "padding and influence_margin must be non-negative".into(),
            ));
        }
        if let Some(&bad) = self.tracked_links.iter().find(|&&l| l == 0 || l > links) {
            return Err(Error::LinkOutOfRange { index: bad, links });
        }
        Ok(())
    }
}

/// One link–obstacle pair inside the influence region.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactCandidate<T: Real> {
    pub link_index: usize,
    pub obstacle_id: String,
    /// Padded-link-surface to obstacle-surface distance, clamped at zero.
    pub psi: T,
    pub epsilon: T,
    /// Unit normal pointing from the obstacle toward the link.
    pub normal: Vector3<T>,
    pub witness_point: Vector3<T>,
    /// 3×n positional Jacobian of the witness point.
    pub jc: DMatrix<T>,
    /// The padded link touches or overlaps the obstacle.
    pub penetrating: bool,
    /// The normal could not be computed and was taken from the cache or +z.
    pub degenerate: bool,
}

impl<T: Real> ContactCandidate<T> {
    pub fn key(&self) -> ContactKey {
        (self.link_index, self.obstacle_id.clone())
    }

    /// Row vector `Nᵀ J_c` (length n).
    pub fn normal_jacobian(&self) -> nalgebra::DVector<T> {
        self.jc.tr_mul(&self.normal)
    }
}

pub type ContactKey = (usize, String);

/// Previous-step normals, keyed by (link, obstacle id). Owned by the caller.
pub type NormalCache<T> = HashMap<ContactKey, Vector3<T>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentDistance<T: Real> {
    pub psi: T,
    pub witness: Vector3<T>,
    pub normal: Vector3<T>,
    /// Unclamped center-to-witness distance.
    pub center_distance: T,
}

/// Closest point on the segment `[p0, p1]` to `x`, and its parameter in `[0, 1]`.
pub fn closest_point_on_segment<T: Real>(
    p0: &Vector3<T>,
    p1: &Vector3<T>,
    x: &Vector3<T>,
) -> (Vector3<T>, T) {
    let d = p1 - p0;
    let len2 = d.norm_squared();
    if len2 <= T::eps() * T::eps() {
        return (*p0, T::zero());
    }
    let s = ((x - p0).dot(&d) / len2).clamp(T::zero(), T::one());
    (p0 + d * s, s)
}

/// Distance between a padded segment and a sphere.
pub fn segment_sphere_distance<T: Real>(
    p0: &Vector3<T>,
    p1: &Vector3<T>,
    sphere: &SphereObstacle<T>,
    padding: T,
) -> Result<SegmentDistance<T>> {
    let (witness, _) = closest_point_on_segment(p0, p1, &sphere.center);
    let diff = witness - sphere.center;
    let dist = diff.norm();
    if dist < T::lit(1e-12) {
        return Err(Error::DegenerateNormal);
    }
    let psi = (dist - sphere.radius - padding).max(T::zero());
    Ok(SegmentDistance {
        psi,
        witness,
        normal: diff / dist,
        center_distance: dist,
    })
}

#[derive(Debug, Clone)]
pub struct ContactSet<T: Real> {
    pub candidates: Vec<ContactCandidate<T>>,
    /// Updated normal cache (one entry per emitted candidate).
    pub normals: NormalCache<T>,
}

impl<T: Real> ContactSet<T> {
    pub fn any_degenerate(&self) -> bool {
        self.candidates.iter().any(|c| c.degenerate)
    }
}

/// World capsules of every collision segment on `link` (1-based).
pub fn link_capsules<T: Real>(
    model: &RobotModel<T>,
    chain: &ChainPoses<T>,
    link: usize,
    padding: T,
) -> Vec<LinkCapsule<T>> {
    let pad = padding + model.link_radius[link - 1];
    chain
        .world_segments(model, link)
        .map(|(p0, p1)| LinkCapsule {
            link_index: link,
            p0,
            p1,
            padding: pad,
        })
        .collect()
}

/// Extract at most one contact per (tracked link, obstacle) pair.
pub fn collect_contacts<T: Real>(
    model: &RobotModel<T>,
    state: &JointState<T>,
    obstacles: &[SphereObstacle<T>],
    cfg: &ContactConfig<T>,
    previous_normals: &NormalCache<T>,
) -> Result<ContactSet<T>> {
    cfg.validate(model.links())?;
    let chain = ChainPoses::compute(model, state)?;
    collect_contacts_posed(model, &chain, obstacles, cfg, previous_normals)
}

pub(crate) fn collect_contacts_posed<T: Real>(
    model: &RobotModel<T>,
    chain: &ChainPoses<T>,
    obstacles: &[SphereObstacle<T>],
    cfg: &ContactConfig<T>,
    previous_normals: &NormalCache<T>,
) -> Result<ContactSet<T>> {
    let cutoff = cfg.epsilon + cfg.influence_margin;
    let mut candidates = Vec::new();
    let mut normals = NormalCache::new();
    for &link in &cfg.tracked_links {
        let capsules = link_capsules(model, chain, link, cfg.padding);
        for obstacle in obstacles {
            let key = (link, obstacle.id.clone());
            // closest over the link's segments; ties keep the lowest segment index
            let mut best: Option<(T, SegmentDistance<T>, bool)> = None;
            for cap in &capsules {
                let (d, degenerate) =
                    match segment_sphere_distance(&cap.p0, &cap.p1, obstacle, cap.padding) {
                        Ok(d) => (d, false),
                        Err(Error::DegenerateNormal) => {
                            let (witness, _) =
                                closest_point_on_segment(&cap.p0, &cap.p1, &obstacle.center);
                            let normal = previous_normals
                                .get(&key)
                                .copied()
                                .unwrap_or_else(Vector3::z);
                            let d = SegmentDistance {
                                psi: T::zero(),
                                witness,
                                normal,
                                center_distance: T::zero(),
                            };
                            (d, true)
                        }
                        Err(e) => return Err(e),
                    };
                let gap = d.center_distance - obstacle.radius - cap.padding;
                if best.as_ref().is_none_or(|(g, _, _)| gap < *g) {
                    best = Some((gap, d, degenerate));
                }
            }
            let Some((gap, d, degenerate)) = best else {
                continue;
            };
            if d.psi > cutoff {
                continue;
            }
            let jc = chain.point_jacobian(link, &d.witness)?;
            normals.insert(key, d.normal);
            candidates.push(ContactCandidate {
                link_index: link,
                obstacle_id: obstacle.id.clone(),
                psi: d.psi,
                epsilon: cfg.epsilon,
                normal: d.normal,
                witness_point: d.witness,
                jc,
                penetrating: gap <= T::zero(),
                degenerate,
            });
        }
    }
    Ok(ContactSet { candidates, normals })
}

/// Smallest padded surface distance between any tracked link and any obstacle, unclamped
/// (negative under penetration). `None` without tracked links or obstacles.
pub fn min_surface_distance<T: Real>(
    model: &RobotModel<T>,
    state: &JointState<T>,
    obstacles: &[SphereObstacle<T>],
    cfg: &ContactConfig<T>,
) -> Result<Option<T>> {
    let chain = ChainPoses::compute(model, state)?;
    let mut best: Option<T> = None;
    for &link in &cfg.tracked_links {
        for cap in link_capsules(model, &chain, link, cfg.padding) {
            for o in obstacles {
                let (w, _) = closest_point_on_segment(&cap.p0, &cap.p1, &o.center);
                let gap = (w - o.center).norm() - o.radius - cap.padding;
                best = Some(best.map_or(gap, |b| b.min(gap)));
            }
        }
    }
    Ok(best)
}

/// Serializable obstacle record (f64, used by scenario and wire formats).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SphereObstacleFile {
    pub id: String,
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default)]
    pub velocity: [f64; 3],
}

impl SphereObstacleFile {
    pub fn into_obstacle<T: Real>(&self) -> Result<SphereObstacle<T>> {
        if !(self.radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "obstacle {}: radius must be positive",
                self.id
            )));
        }
        let v = |a: [f64; 3]| Vector3::new(T::lit(a[0]), T::lit(a[1]), T::lit(a[2]));
        Ok(SphereObstacle {
            id: self.id.clone(),
            center: v(self.center),
            radius: T::lit(self.radius),
            velocity: v(self.velocity),
        })
    }

    pub fn from_obstacle<T: Real>(o: &SphereObstacle<T>) -> Self {
        let a = |v: &Vector3<T>| [v.x.as_f64(), v.y.as_f64(), v.z.as_f64()];
        Self {
            id: o.id.clone(),
            center: a(&o.center),
            radius: o.radius.as_f64(),
            velocity: a(&o.velocity),
        }
    }
}
