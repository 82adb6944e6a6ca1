//! Kinematic chains for robots and articulated objects: configuration
//! spaces, forward kinematics, Jacobians and damped-least-squares inverse
//! kinematics.
//!
//! Everything is planar. A chain is an ordered list of (joint, link) pairs
//! rooted at a base pose; revolute joints rotate about their origin,
//! prismatic joints translate along their local x axis. Links carry
//! collision shapes and named frames (e.g. `"handle"`, `"ee"`).

pub mod geom;
pub mod pose;

pub use geom::{shapes_intersect, Shape};
pub use pose::{angle_diff, normalize_angle, Pose2};

use nalgebra::{DMatrix, DVector, Vector2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("configuration has {got} values, chain has {expected} joints")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error(
        "inverse kinematics did not converge (position error {position_error:.3e}, \
         angle error {angle_error:.3e})"
    )]
    NonConvergent {
        position_error: f64,
        angle_error: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Prismatic,
}

/// A single joint: kind, axis-origin pose in the parent-link frame, and
/// position limits (radians for revolute, meters for prismatic).
#[derive(Debug, Clone)]
pub struct Joint {
    pub kind: JointKind,
    pub origin: Pose2,
    pub limits: (f64, f64),
}

impl Joint {
    pub fn revolute(origin: Pose2, limits: (f64, f64)) -> Self {
        Self {
            kind: JointKind::Revolute,
            origin,
            limits,
        }
    }

    pub fn prismatic(origin: Pose2, limits: (f64, f64)) -> Self {
        Self {
            kind: JointKind::Prismatic,
            origin,
            limits,
        }
    }

    fn motion(&self, q: f64) -> Pose2 {
        match self.kind {
            JointKind::Revolute => Pose2::new(0.0, 0.0, q),
            JointKind::Prismatic => Pose2::new(q, 0.0, 0.0),
        }
    }
}

/// A named frame fixed in a link.
#[derive(Debug, Clone)]
pub struct Frame {
    pub name: String,
    pub offset: Pose2,
}

/// Rigid body following a joint: collision shapes plus named frames, both
/// expressed in the link frame.
#[derive(Debug, Clone, Default)]
pub struct Link {
    pub shapes: Vec<Shape>,
    pub frames: Vec<Frame>,
}

impl Link {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_shape(mut self, shape: Shape) -> Self {
        self.shapes.push(shape);
        self
    }

    pub fn with_frame(mut self, name: &str, offset: Pose2) -> Self {
        self.frames.push(Frame {
            name: name.to_string(),
            offset,
        });
        self
    }
}

/// A vector of joint values, one per chain joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration(Vec<f64>);

impl Configuration {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.clone()
    }
}

impl From<Vec<f64>> for Configuration {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl std::ops::Index<usize> for Configuration {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Configuration {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Options for the damped-least-squares IK iteration.
#[derive(Debug, Clone)]
pub struct IkOptions {
    /// Convergence tolerance on position (m) and, unless the orientation is
    /// free, on heading (rad).
    pub tol: f64,
    pub max_iters: usize,
    /// Damping factor lambda.
    pub damping: f64,
    /// Per-iteration clamp on the infinity norm of the joint update.
    pub step_clamp: f64,
    /// Solve for position only, leaving the frame heading unconstrained.
    pub orientation_free: bool,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iters: 200,
            damping: 0.1,
            step_clamp: 0.2,
            orientation_free: false,
        }
    }
}

/// An ordered list of (joint, link) pairs rooted at a base pose.
#[derive(Debug, Clone)]
pub struct KinematicChain {
    base: Pose2,
    joints: Vec<Joint>,
    links: Vec<Link>,
}

impl KinematicChain {
    pub fn new(
        base: Pose2,
        pairs: Vec<(Joint, Link)>,
    ) -> Result<Self, KinematicsError> {
        if pairs.is_empty() {
            return Err(KinematicsError::InvalidChain(
                "chain needs at least one joint".into(),
            ));
        }
        let mut names = std::collections::BTreeSet::new();
        for (joint, link) in &pairs {
            let (lo, hi) = joint.limits;
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(KinematicsError::InvalidChain(format!(
                    "joint limits [{lo}, {hi}] must be finite with lo <= hi"
                )));
            }
            for frame in &link.frames {
                if !names.insert(frame.name.clone()) {
                    return Err(KinematicsError::InvalidChain(format!(
                        "duplicate frame name `{}`",
                        frame.name
                    )));
                }
            }
        }
        let (joints, links) = pairs.into_iter().unzip();
        Ok(Self {
            base,
            joints,
            links,
        })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn base(&self) -> Pose2 {
        self.base
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn limits(&self) -> Vec<(f64, f64)> {
        self.joints.iter().map(|j| j.limits).collect()
    }

    pub fn clamp_to_limits(&self, q: &mut Configuration) {
        for (value, joint) in q.as_mut_slice().iter_mut().zip(&self.joints) {
            *value = value.clamp(joint.limits.0, joint.limits.1);
        }
    }

    pub fn within_limits(&self, q: &Configuration) -> bool {
        q.len() == self.dof()
            && q.as_slice()
                .iter()
                .zip(&self.joints)
                .all(|(v, j)| *v >= j.limits.0 - 1e-12 && *v <= j.limits.1 + 1e-12)
    }

    pub fn frame_names(&self) -> impl Iterator<Item = &str> {
        self.links
            .iter()
            .flat_map(|l| l.frames.iter().map(|f| f.name.as_str()))
    }

    pub fn has_frame(&self, name: &str) -> bool {
        self.frame_names().any(|n| n == name)
    }

    fn check_len(&self, q: &Configuration) -> Result<(), KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    fn frame_location(&self, name: &str) -> Option<(usize, Pose2)> {
        for (i, link) in self.links.iter().enumerate() {
            for frame in &link.frames {
                if frame.name == name {
                    return Some((i, frame.offset));
                }
            }
        }
        None
    }

    /// World pose of every link at configuration `q`.
    pub fn link_poses(&self, q: &Configuration) -> Result<Vec<Pose2>, KinematicsError> {
        self.check_len(q)?;
        let mut poses = Vec::with_capacity(self.dof());
        let mut t = self.base;
        for (joint, value) in self.joints.iter().zip(q.as_slice()) {
            t = t.compose(&joint.origin).compose(&joint.motion(*value));
            poses.push(t);
        }
        Ok(poses)
    }

    /// Forward kinematics: world pose of the named frame.
    pub fn fk(&self, q: &Configuration, frame: &str) -> Result<Pose2, KinematicsError> {
        self.check_len(q)?;
        let (link_index, offset) = self
            .frame_location(frame)
            .ok_or_else(|| KinematicsError::UnknownFrame(frame.to_string()))?;
        let mut t = self.base;
        for (joint, value) in self.joints.iter().zip(q.as_slice()).take(link_index + 1) {
            t = t.compose(&joint.origin).compose(&joint.motion(*value));
        }
        Ok(t.compose(&offset))
    }

    /// Geometric Jacobian of the named frame: rows are d(x, y, theta)/dq.
    pub fn jacobian(
        &self,
        q: &Configuration,
        frame: &str,
    ) -> Result<DMatrix<f64>, KinematicsError> {
        self.check_len(q)?;
        let (link_index, offset) = self
            .frame_location(frame)
            .ok_or_else(|| KinematicsError::UnknownFrame(frame.to_string()))?;

        // Pose of each joint frame (after its origin, before its motion)
        // up to and including the frame's link.
        let mut jac = DMatrix::zeros(3, self.dof());
        let mut t = self.base;
        let mut joint_frames = Vec::with_capacity(link_index + 1);
        for (joint, value) in self.joints.iter().zip(q.as_slice()).take(link_index + 1) {
            let pre_motion = t.compose(&joint.origin);
            joint_frames.push(pre_motion);
            t = pre_motion.compose(&joint.motion(*value));
        }
        let frame_pos = t.compose(&offset).position();

        for (j, (joint, pre)) in self
            .joints
            .iter()
            .zip(&joint_frames)
            .enumerate()
            .take(link_index + 1)
        {
            match joint.kind {
                JointKind::Revolute => {
                    let r = frame_pos - pre.position();
                    jac[(0, j)] = -r.y;
                    jac[(1, j)] = r.x;
                    jac[(2, j)] = 1.0;
                }
                JointKind::Prismatic => {
                    let dir = pre.rotate_vector(Vector2::new(1.0, 0.0));
                    jac[(0, j)] = dir.x;
                    jac[(1, j)] = dir.y;
                    jac[(2, j)] = 0.0;
                }
            }
        }
        Ok(jac)
    }

    /// Damped-least-squares inverse kinematics for the named frame.
    ///
    /// Iterates `dq = J^T (J J^T + lambda^2 I)^-1 e` from `q_init`, clamping
    /// each update and the running configuration to joint limits. When the
    /// residual stalls (a local minimum, typically a wrong elbow fold) the
    /// iterate is re-seeded from a deterministic pseudo-random stream, so
    /// the solve stays a pure function of its arguments. Returns
    /// [`KinematicsError::NonConvergent`] if no iterate meets the tolerance
    /// within `max_iters`; callers may still resample `q_init`.
    pub fn ik(
        &self,
        frame: &str,
        target: Pose2,
        q_init: &Configuration,
        opts: &IkOptions,
    ) -> Result<Configuration, KinematicsError> {
        self.check_len(q_init)?;
        if !self.has_frame(frame) {
            return Err(KinematicsError::UnknownFrame(frame.to_string()));
        }
        let rows = if opts.orientation_free { 2 } else { 3 };
        let mut q = q_init.clone();
        self.clamp_to_limits(&mut q);

        const STALL_WINDOW: usize = 15;
        const MIN_IMPROVEMENT: f64 = 1e-9;
        let mut restart = SplitMix64::new(0x1c_5eed);
        let mut best_score = f64::INFINITY;
        let mut best_pos_err = f64::INFINITY;
        let mut best_ang_err = f64::INFINITY;
        let mut stalled = 0;

        for _ in 0..=opts.max_iters {
            let pose = self.fk(&q, frame)?;
            let dp = target.position() - pose.position();
            let dtheta = angle_diff(target.theta, pose.theta);
            let pos_err = dp.norm();
            let ang_err = dtheta.abs();
            let converged = pos_err <= opts.tol && (opts.orientation_free || ang_err <= opts.tol);
            if converged {
                return Ok(q);
            }

            let score = pos_err + if opts.orientation_free { 0.0 } else { ang_err };
            if score < best_score - MIN_IMPROVEMENT {
                best_score = score;
                best_pos_err = pos_err;
                best_ang_err = ang_err;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= STALL_WINDOW {
                    for (value, joint) in q.as_mut_slice().iter_mut().zip(&self.joints) {
                        *value = restart.uniform(joint.limits.0, joint.limits.1);
                    }
                    stalled = 0;
                    continue;
                }
            }

            let full_jac = self.jacobian(&q, frame)?;
            let jac = full_jac.rows(0, rows).into_owned();
            let mut err = DVector::zeros(rows);
            err[0] = dp.x;
            err[1] = dp.y;
            if rows == 3 {
                err[2] = dtheta;
            }

            let jjt = &jac * jac.transpose()
                + DMatrix::identity(rows, rows) * (opts.damping * opts.damping);
            let Some(inv) = jjt.try_inverse() else {
                break;
            };
            let mut dq = jac.transpose() * inv * err;
            let max_step = dq.amax();
            if max_step > opts.step_clamp {
                dq *= opts.step_clamp / max_step;
            }
            for (value, delta) in q.as_mut_slice().iter_mut().zip(dq.iter()) {
                *value += delta;
            }
            self.clamp_to_limits(&mut q);
        }
        Err(KinematicsError::NonConvergent {
            position_error: best_pos_err,
            angle_error: if opts.orientation_free { 0.0 } else { best_ang_err },
        })
    }

    /// All link collision shapes resolved into world coordinates.
    pub fn world_shapes(&self, q: &Configuration) -> Result<Vec<Shape>, KinematicsError> {
        let poses = self.link_poses(q)?;
        let mut out = Vec::new();
        for (link, pose) in self.links.iter().zip(&poses) {
            for shape in &link.shapes {
                out.push(shape.transformed(pose));
            }
        }
        Ok(out)
    }

    /// True when any link shape intersects any static scene shape.
    pub fn collides_with_scene(
        &self,
        q: &Configuration,
        scene: &[Shape],
    ) -> Result<bool, KinematicsError> {
        if scene.is_empty() {
            return Ok(false);
        }
        let shapes = self.world_shapes(q)?;
        Ok(shapes
            .iter()
            .any(|s| scene.iter().any(|o| shapes_intersect(s, o))))
    }
}

/// Tiny deterministic generator for IK restart seeds.
struct SplitMix64(u64);

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        Self(seed)
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let unit = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + unit * (hi - lo)
    }
}

/// A planar revolute arm with the given link lengths, a `"tip"` frame at
/// the end of the last link and an `"ee"` alias for it.
pub fn serial_arm(link_lengths: &[f64], limit: f64) -> KinematicChain {
    let mut pairs = Vec::new();
    for (i, len) in link_lengths.iter().enumerate() {
        let origin = if i == 0 {
            Pose2::identity()
        } else {
            Pose2::new(link_lengths[i - 1], 0.0, 0.0)
        };
        let mut link = Link::new().with_shape(Shape::Segment(
            Vector2::new(0.0, 0.0),
            Vector2::new(*len, 0.0),
        ));
        if i == link_lengths.len() - 1 {
            link = link
                .with_frame("tip", Pose2::new(*len, 0.0, 0.0))
                .with_frame("ee", Pose2::new(*len, 0.0, 0.0));
        }
        pairs.push((Joint::revolute(origin, (-limit, limit)), link));
    }
    KinematicChain::new(Pose2::identity(), pairs).expect("serial arm is a valid chain")
}
