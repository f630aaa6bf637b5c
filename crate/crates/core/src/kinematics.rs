//! Serial-chain kinematics for revolute manipulators.
//!
//! Frames are chained as `T_j = T_{j-1} * offset_j * Rot(axis_j, q_j)`; link `j` (1-based)
//! is the body carried by joint `j`, so its pose depends on `q[0..j]` only.

use nalgebra::{
    DMatrix, DVector, Isometry3, Point3, Quaternion, Translation3, Unit, UnitQuaternion, Vector3,
};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;

/// Which components of the end-effector position the task velocity controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TaskSpace {
    /// Planar robot moving in the world xy plane; task dimension 2.
    PlanarXy,
    /// Spatial end-effector position; task dimension 3.
    #[default]
    Position,
}

impl TaskSpace {
    pub fn dim(self) -> usize {
        match self {
            TaskSpace::PlanarXy => 2,
            TaskSpace::Position => 3,
        }
    }

    /// Project a world point onto the task coordinates.
    pub fn project<T: Real>(self, p: &Vector3<T>) -> DVector<T> {
        DVector::from_iterator(self.dim(), p.iter().copied().take(self.dim()))
    }

    /// Lift task coordinates back to a world point (z = 0 for planar tasks).
    pub fn lift<T: Real>(self, x: &DVector<T>) -> Vector3<T> {
        let mut p = Vector3::zeros();
        for (i, v) in x.iter().take(3).enumerate() {
            p[i] = *v;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevoluteJoint<T: Real> {
    pub axis: Unit<Vector3<T>>,
    /// Fixed transform from the parent link frame to the joint frame.
    pub offset: Isometry3<T>,
}

/// Line segment in a link frame, used as the axis of a collision cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T: Real> {
    pub p0: Point3<T>,
    pub p1: Point3<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel<T: Real> {
    pub name: String,
    pub joints: Vec<RevoluteJoint<T>>,
    /// `link_segments[j]` holds the collision segments of link `j + 1`.
    pub link_segments: Vec<Vec<Segment<T>>>,
    /// Cylinder radius per link, added to the contact padding.
    pub link_radius: Vec<T>,
    pub qdot_min: DVector<T>,
    pub qdot_max: DVector<T>,
    /// Tool transform relative to the last link frame.
    pub ee_offset: Isometry3<T>,
    pub task_space: TaskSpace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointState<T: Real> {
    pub q: DVector<T>,
    pub t: T,
}

impl<T: Real> JointState<T> {
    pub fn new(q: DVector<T>) -> Self {
        Self { q, t: T::zero() }
    }

    pub fn from_slice(q: &[T]) -> Self {
        Self::new(DVector::from_column_slice(q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPose<T: Real> {
    pub position: Vector3<T>,
    pub rotation: UnitQuaternion<T>,
}

impl<T: Real> LinkPose<T> {
    pub fn isometry(&self) -> Isometry3<T> {
        Isometry3::from_parts(Translation3::from(self.position), self.rotation)
    }
}

impl<T: Real> From<Isometry3<T>> for LinkPose<T> {
    fn from(iso: Isometry3<T>) -> Self {
        Self {
            position: iso.translation.vector,
            rotation: iso.rotation,
        }
    }
}

impl<T: Real> RobotModel<T> {
    pub fn n(&self) -> usize {
        self.joints.len()
    }

    /// Number of links; equal to the joint count.
    pub fn links(&self) -> usize {
        self.joints.len()
    }

    pub fn task_dim(&self) -> usize {
        self.task_space.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidModel("robot needs at least one joint".into()));
        }
        check_dim("link_segments", n, self.link_segments.len())?;
        check_dim("link_radius", n, self.link_radius.len())?;
        check_dim("qdot_min", n, self.qdot_min.len())?;
        check_dim("qdot_max", n, self.qdot_max.len())?;
        for (j, (lo, hi)) in self.qdot_min.iter().zip(self.qdot_max.iter()).enumerate() {
            if !(lo < hi) {
                return Err(Error::InvalidModel(format!(
                    "qdot_min[{j}] must be below qdot_max[{j}]"
                )));
            }
        }
        for (j, r) in self.link_radius.iter().enumerate() {
            if *r < T::zero() {
                return Err(Error::InvalidModel(format!("radius_per_link[{j}] is negative")));
            }
        }
        Ok(())
    }

    /// Parse the JSON robot description.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: RobotModelFile =
            serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        file.into_model()
    }

    pub fn to_file(&self) -> RobotModelFile {
        RobotModelFile::from_model(self)
    }

    /// Convert every scalar to another precision.
    pub fn cast<U: Real>(&self) -> RobotModel<U> {
        let c = |x: T| U::lit(x.as_f64());
        let iso = |i: &Isometry3<T>| -> Isometry3<U> {
            let t = i.translation.vector;
            let q = i.rotation.quaternion();
            Isometry3::from_parts(
                Translation3::new(c(t.x), c(t.y), c(t.z)),
                UnitQuaternion::new_normalize(Quaternion::new(c(q.w), c(q.i), c(q.j), c(q.k))),
            )
        };
        let p = |p: &Point3<T>| Point3::new(c(p.x), c(p.y), c(p.z));
        RobotModel {
            name: self.name.clone(),
            joints: self
                .joints
                .iter()
                .map(|j| RevoluteJoint {
                    axis: Unit::new_normalize(Vector3::new(c(j.axis.x), c(j.axis.y), c(j.axis.z))),
                    offset: iso(&j.offset),
                })
                .collect(),
            link_segments: self
                .link_segments
                .iter()
                .map(|segs| {
                    segs.iter()
                        .map(|s| Segment { p0: p(&s.p0), p1: p(&s.p1) })
                        .collect()
                })
                .collect(),
            link_radius: self.link_radius.iter().map(|r| c(*r)).collect(),
            qdot_min: self.qdot_min.map(c),
            qdot_max: self.qdot_max.map(c),
            ee_offset: iso(&self.ee_offset),
            task_space: self.task_space,
        }
    }
}

/// Link frames and world joint axes for one configuration.
#[derive(Debug, Clone)]
pub struct ChainPoses<T: Real> {
    /// `frames[j]` is the pose of link `j + 1`.
    pub frames: Vec<Isometry3<T>>,
    /// World axis of joint `j + 1`.
    pub axes: Vec<Vector3<T>>,
    /// World position of joint `j + 1`.
    pub origins: Vec<Vector3<T>>,
    pub ee: Isometry3<T>,
}

impl<T: Real> ChainPoses<T> {
    pub fn compute(model: &RobotModel<T>, state: &JointState<T>) -> Result<Self> {
        check_dim("joint state", model.n(), state.q.len())?;
        let n = model.n();
        let mut frames = Vec::with_capacity(n);
        let mut axes = Vec::with_capacity(n);
        let mut origins = Vec::with_capacity(n);
        let mut parent = Isometry3::identity();
        for (joint, &q) in model.joints.iter().zip(state.q.iter()) {
            let joint_frame = parent * joint.offset;
            axes.push(joint_frame.rotation * joint.axis.into_inner());
            origins.push(joint_frame.translation.vector);
            let rot = UnitQuaternion::from_axis_angle(&joint.axis, q);
            parent = joint_frame * rot;
            frames.push(parent);
        }
        let ee = parent * model.ee_offset;
        Ok(Self {
            frames,
            axes,
            origins,
            ee,
        })
    }

    /// World linear-velocity Jacobian (3×n) of a material point attached to `link` (1-based).
    pub fn point_jacobian(&self, link: usize, point: &Vector3<T>) -> Result<DMatrix<T>> {
        let n = self.frames.len();
        if link == 0 || link > n {
            return Err(Error::LinkOutOfRange { index: link, links: n });
        }
        let mut jac = DMatrix::zeros(3, n);
        for j in 0..link {
            let col = self.axes[j].cross(&(point - self.origins[j]));
            jac.fixed_view_mut::<3, 1>(0, j).copy_from(&col);
        }
        Ok(jac)
    }

    /// Collision segments of `link` (1-based) expressed in the world frame.
    pub fn world_segments<'a>(
        &'a self,
        model: &'a RobotModel<T>,
        link: usize,
    ) -> impl Iterator<Item = (Vector3<T>, Vector3<T>)> + 'a {
        let frame = self.frames[link - 1];
        model.link_segments[link - 1]
            .iter()
            .map(move |s| ((frame * s.p0).coords, (frame * s.p1).coords))
    }
}

/// Link poses (one per link) followed by the end-effector pose.
pub fn forward_kinematics<T: Real>(
    model: &RobotModel<T>,
    state: &JointState<T>,
) -> Result<Vec<LinkPose<T>>> {
    let chain = ChainPoses::compute(model, state)?;
    let mut poses: Vec<LinkPose<T>> = chain.frames.iter().copied().map(LinkPose::from).collect();
    poses.push(chain.ee.into());
    Ok(poses)
}

/// End-effector position in task coordinates.
pub fn ee_position<T: Real>(model: &RobotModel<T>, state: &JointState<T>) -> Result<DVector<T>> {
    let chain = ChainPoses::compute(model, state)?;
    Ok(model.task_space.project(&chain.ee.translation.vector))
}

/// Task Jacobian (m×n) of the end-effector position.
pub fn jacobian<T: Real>(model: &RobotModel<T>, state: &JointState<T>) -> Result<DMatrix<T>> {
    let chain = ChainPoses::compute(model, state)?;
    task_jacobian(model, &chain)
}

pub(crate) fn task_jacobian<T: Real>(
    model: &RobotModel<T>,
    chain: &ChainPoses<T>,
) -> Result<DMatrix<T>> {
    let full = chain.point_jacobian(model.n(), &chain.ee.translation.vector)?;
    Ok(full.rows(0, model.task_dim()).into_owned())
}

/// Positional Jacobian (3×n) of `point_world`, treated as rigidly attached to `link_index` (1-based).
pub fn point_jacobian<T: Real>(
    model: &RobotModel<T>,
    state: &JointState<T>,
    link_index: usize,
    point_world: &Vector3<T>,
) -> Result<DMatrix<T>> {
    let chain = ChainPoses::compute(model, state)?;
    chain.point_jacobian(link_index, point_world)
}

/// Damped pseudo-inverse `Jᵀ (J Jᵀ + μ² I)⁻¹`.
///
/// With `mu == 0` a (numerically) rank-deficient `J` is rejected instead of producing
/// an ill-conditioned inverse.
pub fn damped_pinv<T: Real>(jac: &DMatrix<T>, mu: T) -> Result<DMatrix<T>> {
    if mu < T::zero() {
        return Err(Error::InvalidConfig("damping must be non-negative".into()));
    }
    let m = jac.nrows();
    let mut gram = jac * jac.transpose();
    if mu > T::zero() {
        for i in 0..m {
            gram[(i, i)] += mu * mu;
        }
    } else {
        let sv = jac.clone().singular_values();
        let smax = sv.iter().copied().fold(T::zero(), |a, b| if b > a { b } else { a });
        let smin = sv.iter().copied().fold(T::infinity(), |a, b| if b < a { b } else { a });
        let tol = T::eps() * T::from_count(m.max(jac.ncols())) * smax;
        if sv.len() < m || smax == T::zero() || smin <= tol {
            return Err(Error::RankDeficient);
        }
    }
    let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
    // J† = Jᵀ G⁻¹  <=>  (J†)ᵀ = G⁻¹ J
    Ok(chol.solve(jac).transpose())
}

/// Explicit Euler step `q' = q + h q̇`, `t' = t + h`.
pub fn integrate<T: Real>(state: &JointState<T>, qdot: &DVector<T>, h: T) -> JointState<T> {
    JointState {
        q: &state.q + qdot * h,
        t: state.t + h,
    }
}

// ---------------------------------------------------------------------------
// JSON description

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct JointFile {
    pub axis: [f64; 3],
    #[serde(default)]
    pub offset_position: [f64; 3],
    #[serde(default = "identity_quat")]
    pub offset_rotation_quat: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum LinkSegmentsFile {
    Single([[f64; 3]; 2]),
    Many(Vec<[[f64; 3]; 2]>),
}

/// On-disk robot description (meters, radians, seconds).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RobotModelFile {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub joints: Vec<JointFile>,
    pub link_segments: Vec<LinkSegmentsFile>,
    pub qdot_min: Vec<f64>,
    pub qdot_max: Vec<f64>,
    #[serde(default)]
    pub radius_per_link: Option<Vec<f64>>,
    #[serde(default)]
    pub ee_offset_position: [f64; 3],
    #[serde(default = "identity_quat")]
    pub ee_offset_rotation_quat: [f64; 4],
    #[serde(default)]
    pub task_space: TaskSpace,
}

fn identity_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

fn iso_from<T: Real>(p: [f64; 3], q: [f64; 4], what: &str) -> Result<Isometry3<T>> {
    let quat = Quaternion::new(T::lit(q[0]), T::lit(q[1]), T::lit(q[2]), T::lit(q[3]));
    let norm = quat.norm().as_f64();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidModel(format!(
            "{what}: rotation quaternion norm {norm} is not 1"
        )));
    }
    Ok(Isometry3::from_parts(
        Translation3::new(T::lit(p[0]), T::lit(p[1]), T::lit(p[2])),
        UnitQuaternion::new_normalize(quat),
    ))
}

fn point<T: Real>(p: [f64; 3]) -> Point3<T> {
    Point3::new(T::lit(p[0]), T::lit(p[1]), T::lit(p[2]))
}

impl RobotModelFile {
    pub fn into_model<T: Real>(self) -> Result<RobotModel<T>> {
        check_dim("joints", self.n, self.joints.len())?;
        let joints = self
            .joints
            .iter()
            .enumerate()
            .map(|(j, jf)| {
                let a = Vector3::new(jf.axis[0], jf.axis[1], jf.axis[2]);
                if (a.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidModel(format!("joints[{j}].axis is not a unit vector")));
                }
                Ok(RevoluteJoint {
                    axis: Unit::new_normalize(Vector3::new(T::lit(a.x), T::lit(a.y), T::lit(a.z))),
                    offset: iso_from(
                        jf.offset_position,
                        jf.offset_rotation_quat,
                        &format!("joints[{j}]"),
                    )?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let link_segments = self
            .link_segments
            .iter()
            .map(|entry| {
                let segs: Vec<[[f64; 3]; 2]> = match entry {
                    LinkSegmentsFile::Single(s) => vec![*s],
                    LinkSegmentsFile::Many(v) => v.clone(),
                };
                segs.into_iter()
                    .map(|[a, b]| Segment { p0: point(a), p1: point(b) })
                    .collect()
            })
            .collect();
        let radius = self
            .radius_per_link
            .clone()
            .unwrap_or_else(|| vec![0.0; self.n]);
        let model = RobotModel {
            name: self.name.clone(),
            joints,
            link_segments,
            link_radius: radius.into_iter().map(T::lit).collect(),
            qdot_min: DVector::from_iterator(self.qdot_min.len(), self.qdot_min.iter().map(|v| T::lit(*v))),
            qdot_max: DVector::from_iterator(self.qdot_max.len(), self.qdot_max.iter().map(|v| T::lit(*v))),
            ee_offset: iso_from(self.ee_offset_position, self.ee_offset_rotation_quat, "ee_offset")?,
            task_space: self.task_space,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_model<T: Real>(model: &RobotModel<T>) -> Self {
        let v3 = |v: &Vector3<T>| [v.x.as_f64(), v.y.as_f64(), v.z.as_f64()];
        let q4 = |q: &UnitQuaternion<T>| {
            [q.w.as_f64(), q.i.as_f64(), q.j.as_f64(), q.k.as_f64()]
        };
        Self {
            name: model.name.clone(),
            n: model.n(),
            joints: model
                .joints
                .iter()
                .map(|j| JointFile {
                    axis: v3(&j.axis.into_inner()),
                    offset_position: v3(&j.offset.translation.vector),
                    offset_rotation_quat: q4(&j.offset.rotation),
                })
                .collect(),
            link_segments: model
                .link_segments
                .iter()
                .map(|segs| {
                    let pairs: Vec<[[f64; 3]; 2]> = segs
                        .iter()
                        .map(|s| [v3(&s.p0.coords), v3(&s.p1.coords)])
                        .collect();
                    if pairs.len() == 1 {
                        LinkSegmentsFile::Single(pairs[0])
                    } else {
                        LinkSegmentsFile::Many(pairs)
                    }
                })
                .collect(),
            qdot_min: model.qdot_min.iter().map(|v| v.as_f64()).collect(),
            qdot_max: model.qdot_max.iter().map(|v| v.as_f64()).collect(),
            radius_per_link: Some(model.link_radius.iter().map(|v| v.as_f64()).collect()),
            ee_offset_position: v3(&model.ee_offset.translation.vector),
            ee_offset_rotation_quat: q4(&model.ee_offset.rotation),
            task_space: model.task_space,
        }
    }
}

/// Bundled robot descriptions.
pub mod bundled {
    use super::*;

    pub const PLANAR_2R_JSON: &str = include_str!("../../../data/robots/planar_2r.json");
    pub const ARM_7DOF_JSON: &str = include_str!("../../../data/robots/arm_7dof.json");

    /// Planar two-link arm, 0.05 m links, moving in the xy plane.
    pub fn planar_2r<T: Real>() -> RobotModel<T> {
        RobotModel::from_json(PLANAR_2R_JSON).expect("bundled planar_2r.json is valid")
    }

    /// Generic seven-joint spatial arm.
    pub fn arm_7dof<T: Real>() -> RobotModel<T> {
        RobotModel::from_json(ARM_7DOF_JSON).expect("bundled arm_7dof.json is valid")
    }

    /// Look up a bundled model by file name.
    pub fn by_name(name: &str) -> Option<&'static str> {
        match name {
            "planar_2r.json" | "planar_2r" => Some(PLANAR_2R_JSON),
            "arm_7dof.json" | "arm_7dof" => Some(ARM_7DOF_JSON),
            _ => None,
        }
    }
}
