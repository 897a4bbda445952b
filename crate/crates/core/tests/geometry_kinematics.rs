use std::f64::consts::PI;

use irisnp::geometry::{membership_constraints, shape_distance, shapes_intersect, unit_ball_volume, Membership};
use irisnp::kinematics::PairSpec;
use irisnp::sampling::RngState;
use irisnp::{ConvexShape2D, DMatrix, DVector, HPolyhedron, Hyperellipsoid, PlanarChain, RigidTransform2D, Scene};
use proptest::prelude::*;

fn shape_strategy() -> impl Strategy<Value = ConvexShape2D> {
    prop_oneof![
        (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y)| ConvexShape2D::point([x, y])),
        (-1.0..1.0f64, -1.0..1.0f64, 0.05..1.0f64).prop_map(|(x, y, r)| ConvexShape2D::disk([x, y], r).unwrap()),
        (3usize..8, prop::collection::vec(0.0..0.5f64, 8), 0.1..1.0f64, 0.2..1.5f64, -1.0..1.0f64).prop_map(
            |(k, jitter, rx, ry, cx)| {
                let verts = (0..k)
                    .map(|i| {
                        let t = 2.0 * PI * (i as f64 + jitter[i]) / k as f64;
                        [cx + rx * t.cos(), ry * t.sin()]
                    })
                    .collect();
                ConvexShape2D::polygon(verts).unwrap()
            }
        ),
    ]
}

fn pose_strategy() -> impl Strategy<Value = RigidTransform2D> {
    (-PI..PI, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(t, x, y)| RigidTransform2D::new(t, [x, y]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn distance_symmetric_and_zero_iff_intersecting(
        s1 in shape_strategy(), x1 in pose_strategy(), s2 in shape_strategy(), x2 in pose_strategy()
    ) {
        let d12 = shape_distance(&s1, &x1, &s2, &x2);
        let d21 = shape_distance(&s2, &x2, &s1, &x1);
        prop_assert!((d12 - d21).abs() <= 1e-12);
        prop_assert_eq!(d12 == 0.0, shapes_intersect(&s1, &x1, &s2, &x2));
        prop_assert!(d12 >= 0.0);
    }

    #[test]
    fn distance_is_lower_bounded_by_sampled_points(
        s1 in shape_strategy(), x1 in pose_strategy(), s2 in shape_strategy(), x2 in pose_strategy()
    ) {
        // any pair of member points is at least the reported distance apart
        let d = shape_distance(&s1, &x1, &s2, &x2);
        let pts = |s: &ConvexShape2D, x: &RigidTransform2D| -> Vec<[f64; 2]> {
            match s {
                ConvexShape2D::Point(p) => vec![x.apply(*p)],
                ConvexShape2D::Disk { center, radius } => (0..16)
                    .map(|k| {
                        let t = k as f64 * PI / 8.0;
                        x.apply([center[0] + radius * t.cos(), center[1] + radius * t.sin()])
                    })
                    .collect(),
                ConvexShape2D::Polygon(v) => v.iter().map(|p| x.apply(*p)).collect(),
            }
        };
        for a in pts(&s1, &x1) {
            for b in pts(&s2, &x2) {
                let gap = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                prop_assert!(gap >= d - 1e-9);
            }
        }
    }

    #[test]
    fn volume_times_det_is_unit_ball_volume(entries in prop::collection::vec(-1.0..1.0f64, 9), n in 2usize..4) {
        let c = DMatrix::from_fn(n, n, |i, j| entries[i * 3 + j] * 0.5 + if i == j { 2.0 } else { 0.0 });
        let e = Hyperellipsoid::new(c.clone(), DVector::zeros(n)).unwrap();
        let rel = (e.volume().unwrap() * c.determinant().abs() - unit_ball_volume(n)) / unit_ball_volume(n);
        prop_assert!(rel.abs() < 1e-10);
    }

    #[test]
    fn inscribed_ellipsoid_samples_stay_inside(
        entries in prop::collection::vec(-1.0..1.0f64, 4), center in prop::collection::vec(-0.2..0.2f64, 2), seed in any::<u64>()
    ) {
        let ct = DMatrix::from_fn(2, 2, |i, j| entries[i * 2 + j] * 0.2 + if i == j { 0.4 } else { 0.0 });
        let e = Hyperellipsoid::from_shape_factor(&ct, DVector::from_vec(center)).unwrap();
        let p = HPolyhedron::from_bounds(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        prop_assume!(e.is_inside(&p, 0.0).unwrap());
        let mut rng = RngState::new(seed);
        let mut accepted = 0;
        while accepted < 1000 {
            let u = DVector::from_fn(2, |_, _| rng.uniform_range(-1.0, 1.0));
            if u.norm() > 1.0 {
                continue;
            }
            accepted += 1;
            let x = e.center() + &ct * u;
            prop_assert!(p.contains(&x, 1e-9).unwrap());
        }
    }
}

#[test]
fn triangle_membership_is_inward() {
    let tri = ConvexShape2D::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
    let Membership::HalfPlanes(rows) = membership_constraints(&tri) else { panic!("expected half-planes") };
    assert_eq!(rows.len(), 3);
    let m = Membership::HalfPlanes(rows);
    assert!(m.violation([0.25, 0.25]) < 0.0);
    for p in [[-0.1, 0.2], [0.2, -0.1], [0.6, 0.6]] {
        assert!(m.violation(p) > 0.0);
    }
}

fn random_chain(lengths: &[f64]) -> PlanarChain {
    let n = lengths.len();
    PlanarChain::new(lengths.to_vec(), vec![-PI; n], vec![PI; n], RigidTransform2D::new(0.3, [0.5, -0.2])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn poses_compose_link_by_link(
        lengths in prop::collection::vec(0.1..2.0f64, 1..6),
        angles in prop::collection::vec(-PI..PI, 6)
    ) {
        let chain = random_chain(&lengths);
        let q = &angles[..lengths.len()];
        for k in 1..=lengths.len() {
            let prev = chain.fk_pose(q, k - 1).unwrap();
            let link = RigidTransform2D::new(q[k - 1], [0.0, 0.0]).compose(&RigidTransform2D::new(0.0, [lengths[k - 1], 0.0]));
            let expect = prev.compose(&link);
            let got = chain.fk_pose(q, k).unwrap();
            let (t1, t2) = (expect.translation(), got.translation());
            prop_assert!((t1[0] - t2[0]).abs() < 1e-12 && (t1[1] - t2[1]).abs() < 1e-12);
            let ((c1, s1), (c2, s2)) = (expect.rotation(), got.rotation());
            prop_assert!((c1 - c2).abs() < 1e-12 && (s1 - s2).abs() < 1e-12);
            prop_assert!((c2 * c2 + s2 * s2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_central_differences(
        lengths in prop::collection::vec(0.1..2.0f64, 1..5),
        angles in prop::collection::vec(-PI..PI, 5),
        body_pick in 0usize..5,
        local in (-0.5..0.5f64, -0.5..0.5f64, -PI..PI),
        point in (-0.5..0.5f64, -0.5..0.5f64)
    ) {
        let n = lengths.len();
        let body = body_pick % (n + 1);
        let scene = Scene::new(
            random_chain(&lengths),
            vec![(body, RigidTransform2D::new(local.2, [local.0, local.1]), ConvexShape2D::point([0.0, 0.0]))],
            vec![],
            PairSpec::Explicit(vec![]),
        )
        .unwrap();
        let q = &angles[..n];
        let p = [point.0, point.1];
        let jac = scene.fk_point_jacobian(q, 0, p).unwrap();
        for j in 0..n {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[j] += 1e-6;
            qm[j] -= 1e-6;
            let wp = scene.fk_point(&qp, 0, p).unwrap();
            let wm = scene.fk_point(&qm, 0, p).unwrap();
            for r in 0..2 {
                prop_assert!(((wp[r] - wm[r]) / 2e-6 - jac[(r, j)]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn collision_ignores_pair_order(angles in prop::collection::vec(-PI..PI, 3), seed in any::<u64>()) {
        let chain = random_chain(&[1.0, 0.8, 0.6]);
        let robot: Vec<_> = (1..=3)
            .map(|b| (b, RigidTransform2D::identity(), ConvexShape2D::rectangle(-0.5, -0.05, 0.0, 0.05).unwrap()))
            .collect();
        let world = vec![
            (RigidTransform2D::new(0.0, [1.5, 0.5]), ConvexShape2D::disk([0.0, 0.0], 0.3).unwrap()),
            (RigidTransform2D::new(0.0, [-0.5, 1.2]), ConvexShape2D::disk([0.0, 0.0], 0.4).unwrap()),
        ];
        let auto = Scene::new(chain.clone(), robot.clone(), world.clone(), PairSpec::Auto).unwrap();
        let mut pairs = auto.pairs().to_vec();
        let mut rng = RngState::new(seed);
        for i in (1..pairs.len()).rev() {
            let j = (rng.uniform() * (i + 1) as f64) as usize;
            pairs.swap(i, j.min(i));
        }
        let shuffled = Scene::new(chain, robot, world, PairSpec::Explicit(pairs)).unwrap();
        prop_assert_eq!(auto.in_collision(&angles).unwrap(), shuffled.in_collision(&angles).unwrap());
    }
}
