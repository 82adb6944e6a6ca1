//! Planar rigid transforms and angle utilities.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Normalize an angle to the half-open interval `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let a = theta.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// Shortest signed angular difference `a - b`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// A pose in the plane: translation plus heading, SE(2).
///
/// `theta` is kept normalized to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    /// Compose `self * other`, with `other` expressed in this pose's frame.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            -(c * self.x + s * self.y),
            -(-s * self.x + c * self.y),
            -self.theta,
        )
    }

    /// Map a point from this pose's frame into the parent frame.
    pub fn transform_point(&self, p: Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.theta.sin_cos();
        Vector2::new(
            self.x + c * p.x - s * p.y,
            self.y + s * p.x + c * p.y,
        )
    }

    /// Rotate a direction vector by this pose's heading.
    pub fn rotate_vector(&self, v: Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.theta.sin_cos();
        Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn normalize_boundaries() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert_eq!(normalize_angle(3.0 * PI), PI);
        assert_relative_eq!(normalize_angle(TAU + 0.25), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn compose_inverse_is_identity() {
        let p = Pose2::new(1.3, -0.7, 2.1);
        let id = p.compose(&p.inverse());
        assert_relative_eq!(id.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(id.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(id.theta, 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn normalized_range(theta in -100.0f64..100.0) {
            let a = normalize_angle(theta);
            prop_assert!(a > -PI && a <= PI);
            // Same direction as the input angle.
            prop_assert!((a.sin() - theta.sin()).abs() < 1e-9);
            prop_assert!((a.cos() - theta.cos()).abs() < 1e-9);
        }

        #[test]
        fn compose_matches_point_transform(
            x in -2.0f64..2.0, y in -2.0f64..2.0, t in -3.0f64..3.0,
            px in -2.0f64..2.0, py in -2.0f64..2.0,
        ) {
            let pose = Pose2::new(x, y, t);
            let via_compose = pose.compose(&Pose2::new(px, py, 0.0));
            let via_point = pose.transform_point(Vector2::new(px, py));
            prop_assert!((via_compose.x - via_point.x).abs() < 1e-12);
            prop_assert!((via_compose.y - via_point.y).abs() < 1e-12);
        }
    }
}
