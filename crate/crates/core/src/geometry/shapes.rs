use crate::kinematics::RigidTransform2D;
use crate::prelude::*;
use crate::{Error, Result};

pub type Vec2 = [f64; 2];

#[inline]
pub(crate) fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

/// Convex task-space geometry in a body-local frame.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexShape2D {
    Point(Vec2),
    Disk { center: Vec2, radius: f64 },
    /// Counter-clockwise, strictly convex, at least three vertices.
    Polygon(Vec<Vec2>),
}

impl ConvexShape2D {
    pub fn point(p: Vec2) -> Self {
        ConvexShape2D::Point(p)
    }

    pub fn disk(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidShape(format!("disk radius must be positive, got {radius}")));
        }
        Ok(ConvexShape2D::Disk { center, radius })
    }

    pub fn polygon(vertices: Vec<Vec2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidShape(format!("polygon needs at least 3 vertices, got {n}")));
        }
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if cross(sub(b, a), sub(c, b)) <= 1e-12 {
                return Err(Error::InvalidShape("polygon not counter-clockwise convex".to_string()));
            }
        }
        // a strictly left-turning closed loop can still wind more than once
        let mut turn = 0.0;
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            let (e1, e2) = (sub(b, a), sub(c, b));
            turn += cross(e1, e2).atan2(dot(e1, e2));
        }
        if (turn - 2.0 * core::f64::consts::PI).abs() > 1e-6 {
            return Err(Error::InvalidShape("polygon not counter-clockwise convex".to_string()));
        }
        Ok(ConvexShape2D::Polygon(vertices))
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::polygon(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    /// A point guaranteed to lie in the shape.
    pub fn centroid(&self) -> Vec2 {
        match self {
            ConvexShape2D::Point(p) => *p,
            ConvexShape2D::Disk { center, .. } => *center,
            ConvexShape2D::Polygon(v) => {
                let n = v.len() as f64;
                let s = v.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
                [s[0] / n, s[1] / n]
            }
        }
    }

    fn posed(&self, x: &RigidTransform2D) -> Posed {
        match self {
            ConvexShape2D::Point(p) => Posed::Point(x.apply(*p)),
            ConvexShape2D::Disk { center, radius } => Posed::Disk(x.apply(*center), *radius),
            ConvexShape2D::Polygon(v) => Posed::Polygon(v.iter().map(|p| x.apply(*p)).collect()),
        }
    }
}

enum Posed {
    Point(Vec2),
    Disk(Vec2, f64),
    Polygon(Vec<Vec2>),
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    (0..n).all(|i| cross(sub(poly[(i + 1) % n], poly[i]), sub(p, poly[i])) >= 0.0)
}

fn point_polygon_boundary_distance(p: Vec2, poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| point_segment_distance(p, poly[i], poly[(i + 1) % n])).fold(f64::INFINITY, f64::min)
}

fn separated_along_edges(a: &[Vec2], b: &[Vec2]) -> bool {
    let n = a.len();
    (0..n).any(|i| {
        let e = sub(a[(i + 1) % n], a[i]);
        let normal = [e[1], -e[0]];
        let max_a = a.iter().map(|p| dot(normal, *p)).fold(f64::NEG_INFINITY, f64::max);
        let min_b = b.iter().map(|p| dot(normal, *p)).fold(f64::INFINITY, f64::min);
        min_b > max_a
    })
}

fn polygons_intersect(a: &[Vec2], b: &[Vec2]) -> bool {
    !separated_along_edges(a, b) && !separated_along_edges(b, a)
}

fn polygon_polygon_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    let da = a.iter().map(|p| point_polygon_boundary_distance(*p, b)).fold(f64::INFINITY, f64::min);
    let db = b.iter().map(|p| point_polygon_boundary_distance(*p, a)).fold(f64::INFINITY, f64::min);
    da.min(db)
}

/// Order-independent dispatch: `rank` puts the pair into canonical order.
fn rank(p: &Posed) -> u8 {
    match p {
        Posed::Point(_) => 0,
        Posed::Disk(..) => 1,
        Posed::Polygon(_) => 2,
    }
}

fn posed_intersect(a: &Posed, b: &Posed) -> bool {
    if rank(a) > rank(b) {
        return posed_intersect(b, a);
    }
    match (a, b) {
        (Posed::Point(p), Posed::Point(q)) => p == q,
        (Posed::Point(p), Posed::Disk(c, r)) => dot(sub(*p, *c), sub(*p, *c)) <= r * r,
        (Posed::Point(p), Posed::Polygon(v)) => point_in_polygon(*p, v),
        (Posed::Disk(c1, r1), Posed::Disk(c2, r2)) => dot(sub(*c1, *c2), sub(*c1, *c2)) <= (r1 + r2) * (r1 + r2),
        (Posed::Disk(c, r), Posed::Polygon(v)) => point_in_polygon(*c, v) || point_polygon_boundary_distance(*c, v) <= *r,
        (Posed::Polygon(u), Posed::Polygon(v)) => polygons_intersect(u, v),
        _ => unreachable!(),
    }
}

fn posed_distance(a: &Posed, b: &Posed) -> f64 {
    if rank(a) > rank(b) {
        return posed_distance(b, a);
    }
    if posed_intersect(a, b) {
        return 0.0;
    }
    let d = match (a, b) {
        (Posed::Point(p), Posed::Point(q)) => norm(sub(*p, *q)),
        (Posed::Point(p), Posed::Disk(c, r)) => norm(sub(*p, *c)) - r,
        (Posed::Point(p), Posed::Polygon(v)) => point_polygon_boundary_distance(*p, v),
        (Posed::Disk(c1, r1), Posed::Disk(c2, r2)) => norm(sub(*c1, *c2)) - r1 - r2,
        (Posed::Disk(c, r), Posed::Polygon(v)) => point_polygon_boundary_distance(*c, v) - r,
        (Posed::Polygon(u), Posed::Polygon(v)) => polygon_polygon_distance(u, v),
        _ => unreachable!(),
    };
    // keep "zero iff intersecting" exact under roundoff
    d.max(f64::MIN_POSITIVE)
}

/// Whether the world-frame images share a point (boundary contact counts).
pub fn shapes_intersect(s1: &ConvexShape2D, x1: &RigidTransform2D, s2: &ConvexShape2D, x2: &RigidTransform2D) -> bool {
    posed_intersect(&s1.posed(x1), &s2.posed(x2))
}

/// Euclidean distance between the world-frame images; zero iff they intersect.
pub fn shape_distance(s1: &ConvexShape2D, x1: &RigidTransform2D, s2: &ConvexShape2D, x2: &RigidTransform2D) -> f64 {
    posed_distance(&s1.posed(x1), &s2.posed(x2))
}

/// Convex description of `p ∈ shape` in body-local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    /// `p = p₀`.
    Fixed(Vec2),
    /// `‖p − c‖² ≤ r²`.
    Ball { center: Vec2, radius: f64 },
    /// `nᵢ·p ≤ cᵢ` for each `(nᵢ, cᵢ)`, outward unit normals.
    HalfPlanes(Vec<(Vec2, f64)>),
}

impl Membership {
    /// Largest constraint violation at `p` (`≤ 0` inside).
    pub fn violation(&self, p: Vec2) -> f64 {
        match self {
            Membership::Fixed(q) => (p[0] - q[0]).abs().max((p[1] - q[1]).abs()),
            Membership::Ball { center, radius } => dot(sub(p, *center), sub(p, *center)) - radius * radius,
            Membership::HalfPlanes(rows) => rows.iter().map(|(n, c)| dot(*n, p) - c).fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

pub fn membership_constraints(shape: &ConvexShape2D) -> Membership {
    match shape {
        ConvexShape2D::Point(p) => Membership::Fixed(*p),
        ConvexShape2D::Disk { center, radius } => Membership::Ball { center: *center, radius: *radius },
        ConvexShape2D::Polygon(v) => {
            let n = v.len();
            let rows = (0..n)
                .map(|i| {
                    let e = sub(v[(i + 1) % n], v[i]);
                    let len = norm(e);
                    let normal = [e[1] / len, -e[0] / len];
                    (normal, dot(normal, v[i]))
                })
                .collect();
            Membership::HalfPlanes(rows)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64) -> RigidTransform2D {
        RigidTransform2D::new(0.0, [x, y])
    }

    fn unit_square() -> ConvexShape2D {
        ConvexShape2D::rectangle(-0.5, -0.5, 0.5, 0.5).unwrap()
    }

    #[test]
    fn disk_pairs() {
        let d = ConvexShape2D::disk([0.0, 0.0], 0.5).unwrap();
        assert!(shapes_intersect(&d, &at(0.0, 0.0), &d, &at(0.9, 0.0)));
        assert!(!shapes_intersect(&d, &at(0.0, 0.0), &d, &at(1.1, 0.0)));
        let small = ConvexShape2D::disk([0.0, 0.0], 0.1).unwrap();
        let dist = shape_distance(&small, &at(0.0, 0.0), &small, &at(1.0, 0.0));
        assert!((dist - 0.8).abs() < 1e-15);
        assert_eq!(shape_distance(&d, &at(0.0, 0.0), &d, &at(0.9, 0.0)), 0.0);
    }

    #[test]
    fn square_and_point() {
        let sq = unit_square();
        let id = RigidTransform2D::identity();
        assert!(shapes_intersect(&sq, &id, &ConvexShape2D::point([0.5, 0.5]), &id));
        let d = shape_distance(&ConvexShape2D::point([2.0, 0.0]), &id, &sq, &id);
        assert!((d - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rotated_square_vs_disk() {
        let sq = unit_square();
        let rot = RigidTransform2D::new(core::f64::consts::FRAC_PI_4, [0.0, 0.0]);
        let disk = ConvexShape2D::disk([0.0, 0.0], 0.1).unwrap();
        // corner of the rotated square reaches √2/2 ≈ 0.7071 along x
        assert!(shapes_intersect(&sq, &rot, &disk, &at(0.80, 0.0)));
        assert!(!shapes_intersect(&sq, &rot, &disk, &at(0.81, 0.0)));
        let d = shape_distance(&sq, &rot, &disk, &at(1.0, 0.0));
        assert!((d - (1.0 - 0.5f64.sqrt() - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn polygon_polygon() {
        let sq = unit_square();
        assert!(shapes_intersect(&sq, &at(0.0, 0.0), &sq, &at(1.0, 0.0)));
        assert!(!shapes_intersect(&sq, &at(0.0, 0.0), &sq, &at(1.0, 1.0001)));
        let d = shape_distance(&sq, &at(0.0, 0.0), &sq, &at(3.0, 0.0));
        assert!((d - 2.0).abs() < 1e-15);
        let rot = RigidTransform2D::new(core::f64::consts::FRAC_PI_4, [2.0, 0.0]);
        let d = shape_distance(&sq, &at(0.0, 0.0), &sq, &rot);
        assert!((d - (2.0 - 0.5 - 0.5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn polygon_validation() {
        assert!(ConvexShape2D::polygon(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(ConvexShape2D::polygon(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(ConvexShape2D::polygon(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        assert!(ConvexShape2D::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).is_ok());
        // pentagram: every turn is left but it winds twice
        let star: Vec<Vec2> = (0..5)
            .map(|k| {
                let t = (2 * k) as f64 * 2.0 * core::f64::consts::PI / 5.0;
                [t.cos(), t.sin()]
            })
            .collect();
        assert!(ConvexShape2D::polygon(star).is_err());
    }

    #[test]
    fn membership_examples() {
        assert_eq!(membership_constraints(&ConvexShape2D::point([1.0, 2.0])), Membership::Fixed([1.0, 2.0]));
        assert_eq!(
            membership_constraints(&ConvexShape2D::disk([0.0, 0.0], 1.0).unwrap()),
            Membership::Ball { center: [0.0, 0.0], radius: 1.0 }
        );
        let tri = ConvexShape2D::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let m = membership_constraints(&tri);
        let Membership::HalfPlanes(rows) = &m else { panic!() };
        assert_eq!(rows.len(), 3);
        assert!(m.violation([0.25, 0.25]) < 0.0);
        for p in [[-0.1, 0.2], [0.2, -0.1], [0.6, 0.6]] {
            assert!(m.violation(p) > 0.0);
        }
    }
}
