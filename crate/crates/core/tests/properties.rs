use num_complex::Complex64;
use proptest::prelude::*;
use spinflow::linalg::eigenvalues;
use spinflow::stability::cyclic_spectrum_at_half;
use spinflow::{integrate, jacobian, rescaling_consistency, CyclicParams, ModelSpec, RngStream};

fn mean_field_spec(k: usize) -> impl Strategy<Value = ModelSpec> {
    scaled_spec(k, 3.0)
}

fn scaled_spec(k: usize, scale: f64) -> impl Strategy<Value = ModelSpec> {
    (
        prop::collection::vec(prop::collection::vec(-scale..scale, k), k),
        prop::collection::vec(-scale..scale, k),
    )
        .prop_map(|(alpha, a)| ModelSpec::mean_field(&alpha, &a).unwrap())
}

fn any_spec() -> impl Strategy<Value = ModelSpec> {
    (1usize..6).prop_flat_map(mean_field_spec)
}

fn cyclic_params(max_j: f64) -> impl Strategy<Value = CyclicParams> {
    (3usize..9).prop_flat_map(move |k| {
        (prop::collection::vec(prop::bool::ANY, k), 0.01..max_j)
            .prop_map(|(signs, j)| CyclicParams::new(signs.iter().map(|s| if *s { 1 } else { -1 }).collect(), j))
    })
}

fn spec_and_point(range: std::ops::Range<f64>) -> impl Strategy<Value = (ModelSpec, Vec<f64>)> {
    (1usize..6).prop_flat_map(move |k| (mean_field_spec(k), prop::collection::vec(range.clone(), k)))
}

proptest! {
    #[test]
    fn rates_are_nonnegative((spec, x) in spec_and_point(-3.0..4.0)) {
        let (f, g) = spec.eval_f_g(&x);
        prop_assert!(f.iter().chain(&g).all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn clamps_hold_outside_the_cube((spec, x) in spec_and_point(-1.0..2.0)) {
        let (f, g) = spec.eval_f_g(&x);
        for i in 0..x.len() {
            if x[i] >= 1.0 {
                prop_assert_eq!(f[i], 0.0);
            }
            if x[i] <= 0.0 {
                prop_assert_eq!(g[i], 0.0);
            }
        }
    }

    #[test]
    fn velocity_is_f_minus_g((spec, x) in spec_and_point(-0.5..1.5)) {
        let (f, g) = spec.eval_f_g(&x);
        let v = spec.velocity(&x);
        for i in 0..x.len() {
            prop_assert_eq!(v[i], f[i] - g[i]);
        }
    }

    #[test]
    fn cyclic_velocity_matches_closed_form(
        (params, x) in cyclic_params(8.0).prop_flat_map(|p| {
            let k = p.k;
            (Just(p), prop::collection::vec(0.0..=1.0f64, k))
        })
    ) {
        let spec = ModelSpec::cyclic(&params).unwrap();
        let v = spec.velocity(&x);
        for i in 0..params.k {
            let s = f64::from(params.signs[i]);
            let u = s * params.coupling * (x[(i + 1) % params.k] - 0.5);
            let direct = u.exp() - x[i] * (u.exp() + (-u).exp());
            prop_assert!((v[i] - direct).abs() <= 1e-12, "{} vs {}", v[i], direct);
        }
        prop_assert!(spec.velocity(&vec![0.5; params.k]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn jacobian_matches_central_differences(
        (spec, x) in (1usize..6).prop_flat_map(|k| (scaled_spec(k, 1.0), prop::collection::vec(0.05..0.95f64, k)))
    ) {
        let jac = jacobian(&spec, &x);
        let h = 1e-5;
        let k = x.len();
        for j in 0..k {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[j] += h;
            lo[j] -= h;
            let (vh, vl) = (spec.velocity(&hi), spec.velocity(&lo));
            for i in 0..k {
                let fd = (vh[i] - vl[i]) / (2.0 * h);
                prop_assert!((jac[(i, j)] - fd).abs() < 1e-6, "({i},{j}): {} vs {fd}", jac[(i, j)]);
            }
        }
    }

    #[test]
    fn cyclic_jacobian_spectrum_is_shifted_roots(params in cyclic_params(6.0)) {
        let spec = ModelSpec::cyclic(&params).unwrap();
        let computed = eigenvalues(&jacobian(&spec, &vec![0.5; params.k])).unwrap();
        let expected = cyclic_spectrum_at_half(&params, params.coupling);
        prop_assert!(multiset_distance(&computed, &expected) < 1e-8);
    }

    #[test]
    fn rescaling_is_exact(
        spec in any_spec(),
        n in 1u32..40,
        seed in any::<u64>(),
    ) {
        let k = spec.dim();
        let x0: Vec<f64> = (0..k).map(|i| ((i as u32 * 7 + 3) % (n + 1)) as f64 / f64::from(n)).collect();
        prop_assert!(rescaling_consistency(&spec, &x0, n, 0.5, RngStream::new(seed, 1)).unwrap());
    }
}

/// Greedy matching distance between two multisets of complex numbers.
fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

#[test]
fn flow_stays_in_the_cube() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let k = rng.random_range(3..=6);
        let signs = (0..k).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let params = CyclicParams::new(signs, rng.random_range(0.1..=6.0));
        let spec = ModelSpec::cyclic(&params).unwrap();
        let x0: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
        let traj = integrate(&spec, &x0, 50.0, 1e-3, 0.01).unwrap();
        for s in &traj.states {
            assert!(s.iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v)), "{params:?} left the cube: {s:?}");
        }
    }
}
