use nalgebra::{Rotation3, Unit};
use proptest::prelude::*;
use stableplace_core::baselines::{outward, ChsaAnalysis, RansacParams};
use stableplace_core::geom::{
    convex_hull, fit_plane_ransac, pose_delta, PlaneModel, Point3, PointCloud, RigidPose, TriMesh, Vector3,
};
use stableplace_core::planner::{placement_rotation, select_plane, PlannerParams, ScoredCloud};
use stableplace_core::settle::{SettleModel, SettleParams, TableConfig};
use stableplace_core::shapes;

fn point() -> impl Strategy<Value = Point3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vector3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-zero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z).normalize())
}

fn rotation() -> impl Strategy<Value = Rotation3<f64>> {
    (unit(), 0.0..std::f64::consts::TAU).prop_map(|(a, t)| Rotation3::from_axis_angle(&Unit::new_normalize(a), t))
}

fn pose() -> impl Strategy<Value = RigidPose> {
    (rotation(), point()).prop_map(|(r, t)| RigidPose::new(r, t.coords))
}

fn shape() -> impl Strategy<Value = TriMesh> {
    prop_oneof![
        (0.2..2.0f64, 0.2..2.0f64, 0.2..2.0f64).prop_map(|(a, b, c)| shapes::cuboid(a, b, c)),
        (0.1..1.0f64, 0.1..1.0f64, 0.1..1.0f64).prop_map(|(b, h, d)| shapes::wedge(b, h, d)),
        Just(shapes::desk_corpus()[2].mesh.clone()),
        Just(shapes::desk_corpus()[7].mesh.clone()),
    ]
}

fn contains(hull: &TriMesh, pts: &[Point3]) -> bool {
    hull.faces.iter().enumerate().all(|(i, f)| {
        let n = hull.face_cross(i).normalize();
        pts.iter().all(|p| (p - hull.vertices[f[0]]).dot(&n) <= 1e-9)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hull_contains_and_is_idempotent(pts in prop::collection::vec(point(), 4..120)) {
        let hull = convex_hull(&pts).unwrap();
        prop_assert!(hull.is_watertight());
        prop_assert!(contains(&hull, &pts));
        let again = convex_hull(&hull.vertices).unwrap();
        prop_assert_eq!(again.vertices.len(), hull.vertices.len());
        let (a, b) = (hull.mass_properties().unwrap().volume, again.mass_properties().unwrap().volume);
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn mass_properties_follow_rigid_motion(mesh in shape(), p in pose()) {
        let a = mesh.mass_properties().unwrap();
        let b = mesh.transformed(&p).mass_properties().unwrap();
        prop_assert!((a.volume - b.volume).abs() <= 1e-9 * a.volume.max(1.0));
        prop_assert!((p.apply(&a.com) - b.com).norm() <= 1e-9);
    }

    #[test]
    fn pose_delta_is_a_metric(a in pose(), b in pose(), c in pose()) {
        prop_assert_eq!(pose_delta(&a, &a), 0.0);
        prop_assert!((pose_delta(&a, &b) - pose_delta(&b, &a)).abs() <= 1e-12);
        prop_assert!(pose_delta(&a, &c) <= pose_delta(&a, &b) + pose_delta(&b, &c) + 1e-12);
    }

    #[test]
    fn ransac_is_reproducible(pts in prop::collection::vec(point(), 10..80), seed in any::<u64>()) {
        let cloud = PointCloud::new(pts).unwrap();
        let a = fit_plane_ransac(&cloud, 0.05, 64, seed).unwrap();
        let b = fit_plane_ransac(&cloud, 0.05, 64, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn settle_is_deterministic_and_frame_invariant(mesh in shape(), r in rotation(), yaw in 0.0..360.0f64) {
        let model = SettleModel::new(&mesh).unwrap();
        let params = SettleParams::default();
        let table = TableConfig::tilted(10.0, yaw).unwrap();
        let start = model.drop_pose(r, &table);
        let (o1, t1) = model.settle(&start, &table, &params).unwrap();
        let (o2, t2) = model.settle(&start, &table, &params).unwrap();
        prop_assert_eq!(&t1.movements, &t2.movements);
        prop_assert_eq!(o1.final_pose, o2.final_pose);
        // Spinning the whole scene about the vertical axis changes nothing in the object frame.
        let spin = Rotation3::from_axis_angle(&Vector3::z_axis(), 1.1);
        let table2 = TableConfig { normal: spin * table.normal, tilt_deg: table.tilt_deg };
        let start2 = RigidPose::new(spin * start.rotation, spin * start.translation);
        let (o3, _) = model.settle(&start2, &table2, &params).unwrap();
        prop_assert_eq!(o1.resting_face, o3.resting_face);
        prop_assert!((o1.resting_direction - o3.resting_direction).norm() <= 1e-6);
    }

    #[test]
    fn com_height_never_rises_on_flat_table(mesh in shape(), r in rotation()) {
        let model = SettleModel::new(&mesh).unwrap();
        let table = TableConfig::flat();
        let (_, trace) = model.settle(&model.drop_pose(r, &table), &table, &SettleParams::default()).unwrap();
        let heights: Vec<f64> = trace.poses.iter().skip(1).map(|p| p.apply(&model.com).z).collect();
        for w in heights.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{:?}", heights);
        }
    }

    #[test]
    fn chsa_probabilities_sum_to_one(pts in prop::collection::vec(point(), 6..80)) {
        let a = ChsaAnalysis::new(&PointCloud::new(pts).unwrap()).unwrap();
        let total: f64 = a.probability.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        for &s in &a.sinks() {
            prop_assert_eq!(a.sink_of[s], s);
        }
    }

    #[test]
    fn placement_rotation_aligns_normal(n in unit(), up in unit(), c in point()) {
        let plane = PlaneModel { a: n.x, b: n.y, c: n.z, d: 0.0, inliers: vec![], tolerance: 0.0 };
        let c = if plane.signed_distance(&c).abs() < 1e-6 { c + n * 0.5 } else { c };
        let r = placement_rotation(&plane, &c, &up);
        let out = outward(&plane, &c);
        prop_assert!((r * out + up).norm() <= 1e-9);
        if out.dot(&-up) > -1.0 + 1e-6 {
            // Minimal rotation: the axis is orthogonal to both normals.
            if let Some((axis, _)) = r.axis_angle() {
                prop_assert!(axis.dot(&out).abs() <= 1e-6 && axis.dot(&up).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn select_plane_ranking_ignores_score_scale(c in 0.7..1.0f64, seed in any::<u64>()) {
        let mut pts = Vec::new();
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for (k, (z, n, s)) in [(0.0, 60, 0.9), (1.0, 40, 1.0), (2.0, 30, 0.8)].into_iter().enumerate() {
            for i in 0..n {
                pts.push(Point3::new((i % 8) as f64 * 0.1, (i / 8) as f64 * 0.1, z));
                scores.push(s);
                labels.push(k as i64);
            }
        }
        let rank = |scale: f64| {
            let cloud = PointCloud::new(pts.clone())
                .unwrap()
                .with_scores(scores.iter().map(|s| s * scale).collect())
                .unwrap()
                .with_labels(labels.clone())
                .unwrap();
            let params = PlannerParams { tau: 0.5, ransac: RansacParams::default(), ..PlannerParams::default() };
            let r = select_plane(&ScoredCloud::from_labels(cloud).unwrap(), &params, seed).unwrap();
            r.planes.iter().map(|p| p.cluster).collect::<Vec<_>>()
        };
        prop_assert_eq!(rank(1.0), rank(c));
    }
}
