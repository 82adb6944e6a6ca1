//! Planar collision primitives for link and scene geometry.

use super::pose::Pose2;
use nalgebra::Vector2;

/// Collision geometry attached to a link (coordinates in the link frame)
/// or placed statically in the world.
#[derive(Debug, Clone)]
pub enum Shape {
    /// Line segment between two endpoints.
    Segment(Vector2<f64>, Vector2<f64>),
    /// Circle with center and radius.
    Circle(Vector2<f64>, f64),
}

impl Shape {
    /// The same shape expressed in the parent frame of `pose`.
    pub fn transformed(&self, pose: &Pose2) -> Shape {
        match self {
            Shape::Segment(a, b) => {
                Shape::Segment(pose.transform_point(*a), pose.transform_point(*b))
            }
            Shape::Circle(c, r) => Shape::Circle(pose.transform_point(*c), *r),
        }
    }
}

/// Closest point to `p` on the segment `ab`.
pub fn closest_point_on_segment(
    a: Vector2<f64>,
    b: Vector2<f64>,
    p: Vector2<f64>,
) -> Vector2<f64> {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= f64::EPSILON {
        return a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

pub fn segment_point_distance(a: Vector2<f64>, b: Vector2<f64>, p: Vector2<f64>) -> f64 {
    (p - closest_point_on_segment(a, b, p)).norm()
}

fn orient(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_intersect(
    a: Vector2<f64>,
    b: Vector2<f64>,
    c: Vector2<f64>,
    d: Vector2<f64>,
) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // Collinear/touching cases via point-on-segment distance.
    let eps = 1e-12;
    segment_point_distance(c, d, a) < eps
        || segment_point_distance(c, d, b) < eps
        || segment_point_distance(a, b, c) < eps
        || segment_point_distance(a, b, d) < eps
}

/// Intersection test between two world-frame shapes.
pub fn shapes_intersect(a: &Shape, b: &Shape) -> bool {
    match (a, b) {
        (Shape::Circle(c1, r1), Shape::Circle(c2, r2)) => (c1 - c2).norm() <= r1 + r2,
        (Shape::Circle(c, r), Shape::Segment(p, q))
        | (Shape::Segment(p, q), Shape::Circle(c, r)) => segment_point_distance(*p, *q, *c) <= *r,
        (Shape::Segment(a1, a2), Shape::Segment(b1, b2)) => {
            segments_intersect(*a1, *a2, *b1, *b2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    #[test]
    fn closest_point_clamps_to_endpoints() {
        let c = closest_point_on_segment(v(0.0, 0.0), v(1.0, 0.0), v(2.0, 1.0));
        assert_eq!(c, v(1.0, 0.0));
        let c = closest_point_on_segment(v(0.0, 0.0), v(1.0, 0.0), v(0.5, 1.0));
        assert_eq!(c, v(0.5, 0.0));
    }

    #[test]
    fn circle_segment_intersection() {
        let seg = Shape::Segment(v(-1.0, 0.5), v(1.0, 0.5));
        assert!(shapes_intersect(&seg, &Shape::Circle(v(0.0, 0.0), 0.6)));
        assert!(!shapes_intersect(&seg, &Shape::Circle(v(0.0, 0.0), 0.4)));
    }

    #[test]
    fn crossing_segments() {
        let a = Shape::Segment(v(-1.0, -1.0), v(1.0, 1.0));
        let b = Shape::Segment(v(-1.0, 1.0), v(1.0, -1.0));
        let c = Shape::Segment(v(2.0, 2.0), v(3.0, 2.0));
        assert!(shapes_intersect(&a, &b));
        assert!(!shapes_intersect(&a, &c));
    }
}
