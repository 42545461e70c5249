use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use renorm::convex::{BiorthogonalSystem, ConvexBody, Subspace};
use renorm::nets::{slab_decompose, verify_cover, NetConfig, PolarNet};
use renorm::projection::{project, quotient_norm, ProjectionProblem};
use renorm::smooth::{BaseNorm, Norm, NormKind, PerturbedNorm, SmoothFunction};
use renorm::smoothing::{build_smoothed, FacetSetup, PipelineOptions, PlaneNorm, Schedule, SmoothedNorm};
use renorm::Vector;

fn vec2() -> impl Strategy<Value = Vector> {
    prop::collection::vec(-2.0f64..2.0, 2).prop_map(Vector::from_vec)
}

fn vec3() -> impl Strategy<Value = Vector> {
    prop::collection::vec(-2.0f64..2.0, 3).prop_map(Vector::from_vec)
}

fn perturbed(d: usize, eps: f64) -> Arc<PerturbedNorm> {
    let base: Arc<dyn Norm> = Arc::new(BaseNorm::new(NormKind::PNorm(4), d).unwrap());
    let basis = vec![
        Vector::from_vec(vec![1.0, 0.3, 0.0]),
        Vector::from_vec(vec![-0.2, 1.0, 0.4]),
        Vector::from_vec(vec![0.1, 0.0, 1.0]),
    ];
    Arc::new(PerturbedNorm::new(base, BiorthogonalSystem::from_basis(basis).unwrap(), eps).unwrap())
}

fn square() -> &'static SmoothedNorm {
    static SN: OnceLock<SmoothedNorm> = OnceLock::new();
    SN.get_or_init(|| {
        build_smoothed(
            &ConvexBody::cube(2),
            Arc::new(BaseNorm::euclidean(2)),
            0.1,
            0.9,
            &PipelineOptions::default(),
        )
        .unwrap()
        .smoothed
    })
}

fn nonzero(x: &Vector) -> bool {
    x.norm() > 1e-3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perturbed_norm_is_a_convex_norm(x in vec3(), y in vec3(), t in 0.1f64..3.0) {
        let n = perturbed(3, 0.05);
        let mid = n.value(&((&x + &y) * 0.5));
        prop_assert!(mid <= 0.5 * (n.value(&x) + n.value(&y)) + 1e-12);
        prop_assert!((n.value(&(&x * t)) - t * n.value(&x)).abs() <= 1e-12 * (1.0 + t * n.value(&x)));
        prop_assert!(n.value(&x) >= n.base().value(&x) - 1e-15);
    }

    #[test]
    fn projection_is_optimal_and_idempotent(x in vec3(), c in -1.0f64..1.0) {
        prop_assume!(nonzero(&x));
        let n: Arc<dyn Norm> = perturbed(3, 0.05);
        let e = Subspace::from_vectors(3, vec![Vector::from_vec(vec![1.0, 1.0, 0.0])]).unwrap();
        let p = project(&ProjectionProblem::new(n.clone(), e.clone(), x.clone())).unwrap();
        let best = n.value(&(&x - &p.point));
        let other = &p.point + e.basis()[0].clone() * (0.1 * c);
        prop_assert!(best <= n.value(&(&x - other)) + 1e-12);
        let again = project(&ProjectionProblem::new(n.clone(), e.clone(), p.point.clone())).unwrap();
        prop_assert!((&again.point - &p.point).amax() <= 1e-9);
        prop_assert!((quotient_norm(n.clone(), &e, &x).unwrap() - best).abs() <= 1e-12 * (1.0 + best));
    }

    #[test]
    fn quotient_norm_is_a_seminorm(x in vec3(), y in vec3(), t in -3.0f64..3.0) {
        let n: Arc<dyn Norm> = perturbed(3, 0.05);
        let e = Subspace::from_vectors(3, vec![Vector::from_vec(vec![0.0, 1.0, 1.0])]).unwrap();
        let q = |v: &Vector| quotient_norm(n.clone(), &e, v).unwrap();
        let (qx, qy) = (q(&x), q(&y));
        prop_assert!(q(&(&x + &y)) <= qx + qy + 1e-10);
        prop_assert!((q(&(&x * t)) - t.abs() * qx).abs() <= 1e-10 * (1.0 + qx));
        let shifted = &x + e.basis()[0].clone() * t;
        prop_assert!((q(&shifted) - qx).abs() <= 1e-10 * (1.0 + qx));
    }

    /// The plane norm is monotone in `|a|, |b|`, so its composition with the
    /// convex non-negative pair `(a p_n, q_n)` is convex.
    #[test]
    fn lattice_composition_is_midpoint_convex(x in vec3(), y in vec3(), n in 0usize..=3, a in 0.0f64..1.0) {
        let setup = FacetSetup::new(perturbed(3, 0.05), PlaneNorm::default(), 0.05, 0.5).unwrap();
        let f = |v: &Vector| setup.n_value(&setup.context(v).unwrap(), 1.0, n, a);
        let mid = f(&((&x + &y) * 0.5));
        prop_assert!(mid <= 0.5 * (f(&x) + f(&y)) + 1e-10);
    }

    #[test]
    fn plane_norm_is_lattice_monotone(a in -3.0f64..3.0, b in -3.0f64..3.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let n = PlaneNorm::default();
        prop_assert!(n.value(s * a, t * b) <= n.value(a, b) + 1e-14);
    }

    #[test]
    fn schedule_terms_are_monotone(l in 0.34f64..0.99, k in 1u64..40, f in 0.0f64..1.2, g in 0.0f64..1.2) {
        let s = Schedule::new(l).unwrap();
        let (lo, hi) = if f <= g { (f, g) } else { (g, f) };
        prop_assert!(s.term(k, lo).0 <= s.term(k, hi).0);
        if lo <= s.lambda(k) {
            prop_assert_eq!(s.term(k, lo).0, 0.0);
        }
    }

    #[test]
    fn smoothed_gauge_is_a_norm(x in vec2(), y in vec2(), t in 0.2f64..4.0) {
        prop_assume!(nonzero(&x) && nonzero(&y));
        let sn = square();
        let (mx, my) = (sn.gauge(&x).unwrap(), sn.gauge(&y).unwrap());
        prop_assert!(sn.gauge(&(&x + &y)).unwrap() <= mx + my + 1e-9 * (mx + my));
        prop_assert!((sn.gauge(&(&x * t)).unwrap() - t * mx).abs() <= 1e-9 * t * mx);
        prop_assert!((sn.gauge(&-&x).unwrap() - mx).abs() <= 1e-9 * mx);
        let e = sn.gauge_detail(&x).unwrap();
        prop_assert!(e.f_q <= e.mu * (1.0 + 1e-9) && e.mu <= e.f_q / 0.9 * (1.0 + 1e-9));
    }

    #[test]
    fn smoothed_gauge_is_close_to_the_square(x in vec2()) {
        prop_assume!(nonzero(&x));
        let mu = square().gauge(&x).unwrap();
        let target = x.amax();
        prop_assert!((mu / target - 1.0).abs() <= 4.0 * 0.1 + 0.1 + 0.02);
    }

    #[test]
    fn random_covers_partition_their_nets(seed in 0u64..1000, eps in 0.06f64..0.12) {
        let body = ConvexBody::random_polytope(2, 8, seed).unwrap();
        let net = PolarNet::build(&NetConfig::new(body, BiorthogonalSystem::standard(2), eps).unwrap()).unwrap();
        let check = verify_cover(&net, &slab_decompose(&net, eps));
        prop_assert!(check.passed(), "{:?}", check);
    }
}
