use nalgebra::{DMatrix, Rotation3, Vector3};
use proptest::prelude::*;

use graffmatch::association::{build_consistency_graph, MatchConfig, Metric, PairMask};
use graffmatch::landmarks::{Landmark, LandmarkSet, Line3, Plane3, RigidTransform};
use graffmatch::manifold::{graff_distance, orthonormalize, principal_angles, stiefel};
use graffmatch::metrics::lmr_curve;
use graffmatch::solver::{is_feasible, solve_relaxed, SolverConfig};

const RHO: f64 = 40.0;

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-range..range).prop_map(Vector3::from)
}

fn direction() -> impl Strategy<Value = Vector3<f64>> {
    vec3(1.0).prop_filter("non-degenerate direction", |v| v.norm() > 0.1)
}

fn landmark() -> impl Strategy<Value = Landmark> {
    (any::<bool>(), direction(), vec3(50.0)).prop_map(|(is_line, dir, p)| {
        if is_line {
            Landmark::line(0, Line3::new(dir, p).unwrap())
        } else {
            Landmark::plane(1, Plane3::through_point(dir, p).unwrap())
        }
    })
}

/// Rigid motion with `‖t‖ ≤ 100`.
fn transform() -> impl Strategy<Value = RigidTransform> {
    (
        prop::array::uniform3(-std::f64::consts::PI..std::f64::consts::PI),
        vec3(1.0),
        0.0..100.0,
    )
        .prop_map(|(e, dir, mag)| {
            let t = if dir.norm() > 1e-6 { dir.normalize() * mag } else { Vector3::zeros() };
            RigidTransform::from_rotation(Rotation3::from_euler_angles(e[0], e[1], e[2]), t)
        })
}

fn same_subspace(x: &Landmark, y: &Landmark, tol: f64) -> bool {
    let (gx, gy) = (x.to_graff(), y.to_graff());
    (gx.projector() - gy.projector()).norm() < tol && (gx.displacement() - gy.displacement()).norm() < tol
}

fn landmark_set(xs: Vec<Landmark>) -> LandmarkSet {
    let xs = xs
        .into_iter()
        .enumerate()
        .map(|(i, mut l)| {
            l.id = i as u64;
            l
        })
        .collect();
    LandmarkSet::new("s", xs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn distance_is_rigid_motion_invariant(x in landmark(), y in landmark(), t in transform()) {
        let d = graff_distance(&x.to_graff(), &y.to_graff(), RHO).unwrap();
        let dt = graff_distance(&x.transformed(&t).to_graff(), &y.transformed(&t).to_graff(), RHO).unwrap();
        prop_assert!((d - dt).abs() < 1e-9, "d={d} dt={dt}");
    }

    #[test]
    fn distance_is_symmetric(x in landmark(), y in landmark()) {
        let a = graff_distance(&x.to_graff(), &y.to_graff(), RHO).unwrap();
        let b = graff_distance(&y.to_graff(), &x.to_graff(), RHO).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn principal_angles_are_bounded_and_sorted(x in landmark(), y in landmark()) {
        let th = principal_angles(&stiefel(&x.to_graff()), &stiefel(&y.to_graff())).unwrap();
        let s = th.as_slice();
        prop_assert!(s.iter().all(|t| t.is_finite() && (0.0..=std::f64::consts::FRAC_PI_2).contains(t)));
        prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn self_distance_is_zero(x in landmark(), t in transform()) {
        let g = x.transformed(&t).to_graff();
        prop_assert!(graff_distance(&g, &g, RHO).unwrap() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn composition_and_inverse(x in landmark(), a in transform(), b in transform()) {
        let composed = x.transformed(&b.compose(&a));
        let stepwise = x.transformed(&a).transformed(&b);
        prop_assert!(same_subspace(&composed, &stepwise, 1e-9));
        let back = x.transformed(&a).transformed(&a.inverse());
        prop_assert!(same_subspace(&back, &x, 1e-9));
    }

    #[test]
    fn plane_transform_keeps_incidence(n in direction(), p in vec3(50.0), s in -20.0..20.0f64, r in -20.0..20.0f64, t in transform()) {
        let plane = Plane3::through_point(n, p).unwrap();
        let (u, v) = graffmatch::landmarks::plane_basis(plane.normal());
        let q = p + u * s + v * r;
        let moved = graffmatch::landmarks::transform_plane(&plane, &t);
        prop_assert!(moved.signed_distance(&t.apply(&q)).abs() < 1e-9);
        prop_assert!(moved.offset() >= 0.0);
    }

    #[test]
    fn line_transform_keeps_incidence(a in direction(), p in vec3(50.0), s in -30.0..30.0f64, t in transform()) {
        let line = Line3::new(a, p).unwrap();
        let q = p + line.direction() * s;
        let moved = graffmatch::landmarks::transform_line(&line, &t);
        prop_assert!(moved.distance_to(&t.apply(&q)) < 1e-9);
        prop_assert!(moved.direction().dot(moved.closest_point()).abs() < 1e-9);
    }

    #[test]
    fn orthonormalize_spans_input(cols in prop::collection::vec(vec3(5.0), 1..3)) {
        let m = DMatrix::from_fn(3, cols.len(), |i, j| cols[j][i]);
        prop_assume!(m.singular_values().min() > 1e-3 * m.singular_values().max());
        let q = orthonormalize(&m).unwrap();
        prop_assert!((q.tr_mul(&q) - DMatrix::identity(cols.len(), cols.len())).norm() < 1e-12);
        let proj = &q * q.transpose();
        prop_assert!((&proj * &m - &m).norm() < 1e-9 * m.norm().max(1.0));
    }

    #[test]
    fn lmr_curve_is_monotone(oirs in prop::collection::vec(0.0..=1.0f64, 1..50)) {
        let c = lmr_curve(&oirs, 0.01);
        prop_assert!(c.values.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(c.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_is_invariant_under_rigid_motion(xs in prop::collection::vec(landmark(), 2..7), t in transform()) {
        let si = landmark_set(xs);
        let moved = si.transformed(&t);
        let cfg = MatchConfig::default();
        let g0 = build_consistency_graph(&si, &si, &cfg).unwrap();
        let g1 = build_consistency_graph(&si, &moved, &cfg).unwrap();
        prop_assert_eq!(&g0.hypotheses, &g1.hypotheses);
        prop_assert!((&g0.weights - &g1.weights).amax() < 1e-9);
        prop_assert_eq!(&g1.weights, &g1.weights.transpose());
        prop_assert!((0..g1.len()).all(|p| g1.weights[(p, p)] == 1.0));
        let floor = (-cfg.epsilon.powi(2) / (2.0 * cfg.sigma.powi(2))).exp();
        prop_assert!(g1.weights.iter().all(|&w| w == 0.0 || (w > floor && w <= 1.0)));
    }

    #[test]
    fn graph_build_is_thread_count_independent(xs in prop::collection::vec(landmark(), 2..8), t in transform()) {
        let si = landmark_set(xs);
        let sj = si.transformed(&t);
        for metric in [Metric::Graff, Metric::GraffNaive] {
            let cfg = MatchConfig::for_metric(metric);
            let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()
                .install(|| build_consistency_graph(&si, &sj, &cfg).unwrap());
            let parallel = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap()
                .install(|| build_consistency_graph(&si, &sj, &cfg).unwrap());
            prop_assert_eq!(serial.weights, parallel.weights);
        }
    }

    #[test]
    fn relaxed_solution_is_feasible_and_stable(
        n in 2usize..14,
        edges in prop::collection::vec((0usize..14, 0usize..14, 0.05..1.0f64), 0..40),
        banned in prop::collection::vec((0usize..14, 0usize..14), 0..10),
    ) {
        let mut m = DMatrix::identity(n, n);
        let mut forbidden = PairMask::new(n);
        for (p, q, w) in edges {
            if p < n && q < n && p != q {
                m[(p, q)] = w;
                m[(q, p)] = w;
            }
        }
        for (p, q) in banned {
            if p < n && q < n && p != q {
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                forbidden.set(p, q, true);
            }
        }
        let cfg = SolverConfig::default();
        let sel = solve_relaxed(&m, &forbidden, &cfg).unwrap();
        prop_assert!(!sel.indices.is_empty());
        prop_assert!(is_feasible(&sel.indices, &m, &forbidden));
        prop_assert!(sel.density >= 1.0);

        // An extra hypothesis with no edges must not change the answer.
        let mut grown = DMatrix::zeros(n + 1, n + 1);
        grown.view_mut((0, 0), (n, n)).copy_from(&m);
        grown[(n, n)] = 1.0;
        let again = solve_relaxed(&grown, &forbidden.grown(1, false), &cfg).unwrap();
        prop_assert_eq!(again.indices, sel.indices);
    }
}
