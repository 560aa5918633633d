use grassmann_hull::faer::Mat;
use grassmann_hull::{
    chordal_distance, distance_matrix, embed, flag_component, principal_angles, random_subspace,
    random_subspaces, reconstruction_error, solve_weights, stratify, weighted_flag_mean,
    ChsaParams, Embedding, MdsDim, Subspace,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn orthogonal(k: usize, seed: u64) -> Mat<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    random_subspace(k, k, &mut rng).unwrap().into_basis()
}

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (2usize..12).prop_flat_map(|n| (Just(n), 1..=n))
}

fn objective(x: &[f64], ys: &Mat<f64>, w: &[f64], p: &ChsaParams) -> f64 {
    let q = x.len();
    let mut res = 0.0;
    for c in 0..q {
        let fit: f64 = (0..ys.nrows()).map(|j| w[j] * ys[(j, c)]).sum();
        res += (x[c] - fit).powi(2);
    }
    let l2: f64 = w.iter().map(|v| v * v).sum();
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    p.gamma * l2 + p.lambda * l1 + res
}

fn cloud(p: usize, q: usize, seed: u64) -> Mat<f64> {
    use rand::Rng;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Mat::from_fn(p, q, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn basis_change_is_invisible((n, k) in shape(), seed in any::<u64>()) {
        let pts = random_subspaces(3, n, k, seed).unwrap();
        let q = orthogonal(k, seed ^ 1);
        let rotated = Subspace::from_orthonormal(pts[0].basis() * &q).unwrap();
        prop_assert!(chordal_distance(&pts[0], &rotated).unwrap() < 1e-7);
        for other in &pts[1..] {
            let a = chordal_distance(&pts[0], other).unwrap();
            let b = chordal_distance(&rotated, other).unwrap();
            prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn distance_range_and_symmetry((n, k) in shape(), seed in any::<u64>()) {
        let pts = random_subspaces(2, n, k, seed).unwrap();
        let ab = chordal_distance(&pts[0], &pts[1]).unwrap();
        let ba = chordal_distance(&pts[1], &pts[0]).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!((0.0..=(k as f64).sqrt() + 1e-12).contains(&ab));
    }

    #[test]
    fn angles_agree_with_distance((n, k) in shape(), seed in any::<u64>()) {
        let pts = random_subspaces(2, n, k, seed).unwrap();
        let th = principal_angles(&pts[0], &pts[1]).unwrap();
        let via: f64 = th.iter().map(|t| t.sin().powi(2)).sum::<f64>().sqrt();
        prop_assert!((via - chordal_distance(&pts[0], &pts[1]).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn flag_is_scale_invariant(seed in any::<u64>(), c in 0.01f64..100.0) {
        let gens = random_subspaces(3, 10, 3, seed).unwrap();
        let w = [0.2, 0.3, 0.5];
        let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
        let a = weighted_flag_mean(&gens, &w).unwrap();
        let b = weighted_flag_mean(&gens, &scaled).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.singular_values().iter().zip(b.singular_values()) {
            prop_assert!((x * c.sqrt() - y).abs() < 1e-10 * y.max(1.0));
        }
        for k in 1..=a.len() {
            let d = chordal_distance(&flag_component(&a, k).unwrap(), &flag_component(&b, k).unwrap())
                .unwrap();
            prop_assert!(d < 1e-10, "component {}: {}", k, d);
        }
    }

    #[test]
    fn flag_of_copies_is_the_input((n, k) in shape(), seed in any::<u64>(), r in 1usize..5) {
        let a = random_subspaces(1, n, k, seed).unwrap().remove(0);
        let copies = vec![a.clone(); r];
        let weights: Vec<f64> = (0..r).map(|i| 0.5 + i as f64).collect();
        let fm = weighted_flag_mean(&copies, &weights).unwrap();
        prop_assert_eq!(fm.len(), k);
        prop_assert!(chordal_distance(&flag_component(&fm, k).unwrap(), &a).unwrap() < 1e-10);
    }

    #[test]
    fn flag_is_orthonormal_and_contained(seed in any::<u64>(), g in 1usize..4) {
        let gens = random_subspaces(g, 12, 2, seed).unwrap();
        let w: Vec<f64> = (0..g).map(|i| 1.0 + i as f64).collect();
        let fm = weighted_flag_mean(&gens, &w).unwrap();
        let u = fm.directions();
        let gram = u.transpose() * u;
        for i in 0..fm.len() {
            for j in 0..fm.len() {
                let e = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[(i, j)] - e).abs() < 1e-10);
            }
        }
        // project onto the span of all generator columns
        let cols: Vec<_> = gens.iter().flat_map(|s| (0..2).map(move |c| s.basis().col(c).to_owned())).collect();
        let span_raw = Mat::from_fn(12, cols.len(), |i, j| cols[j][i]);
        let span = grassmann_hull::orthonormalize(span_raw.as_ref(), 1e-10).unwrap();
        let s = span.basis();
        for k in 1..=fm.len() {
            let v = flag_component(&fm, k).unwrap();
            let b = v.basis();
            let resid = b - s * (s.transpose() * b);
            prop_assert!(resid.norm_l2() < 1e-10);
        }
    }

    #[test]
    fn chordal_sets_embed_isometrically(seed in any::<u64>(), p in 10usize..40) {
        let pts = random_subspaces(p, 7, 2, seed).unwrap();
        let d = distance_matrix(&pts).unwrap();
        let e = embed(&d, MdsDim::Auto).unwrap();
        prop_assert!(e.negative_mass() < 1e-8);
        let x = e.coordinates();
        for c in 0..e.dim() {
            let mean: f64 = (0..p).map(|i| x[(i, c)]).sum::<f64>() / p as f64;
            prop_assert!(mean.abs() < 1e-10);
        }
        let b = grassmann_hull::double_center(&d);
        let diff = (x * x.transpose() - &b).norm_l2() / b.norm_l2();
        prop_assert!(diff < 1e-8);
    }

    #[test]
    fn reconstruction_error_ignores_rotation(seed in any::<u64>()) {
        let pts = random_subspaces(20, 6, 2, seed).unwrap();
        let d = distance_matrix(&pts).unwrap();
        let e = embed(&d, MdsDim::Fixed(3)).unwrap();
        let q = orthogonal(e.dim(), seed ^ 7);
        let rotated = Embedding::from_parts(
            e.coordinates() * &q,
            e.eigenvalues().to_vec(),
            e.requested(),
            e.negative_mass(),
        )
        .unwrap();
        let a = reconstruction_error(&e, &d).unwrap();
        let b = reconstruction_error(&rotated, &d).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn weights_are_affine_and_no_worse_than_simple_guesses(
        seed in any::<u64>(), q in 1usize..5, big in prop::bool::ANY
    ) {
        let pts = cloud(8, q, seed);
        let params = if big {
            ChsaParams { gamma: 1e-2, lambda: 1e-2, ..ChsaParams::default() }
        } else {
            ChsaParams::default()
        };
        let x: Vec<f64> = (0..q).map(|c| pts[(0, c)]).collect();
        let ys = Mat::from_fn(7, q, |j, c| pts[(j + 1, c)]);
        let w = solve_weights(&x, ys.as_ref(), &params).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 10.0 * params.solver_tolerance);
        let at = objective(&x, &ys, &w, &params);
        let uniform = vec![1.0 / 7.0; 7];
        prop_assert!(at <= objective(&x, &ys, &uniform, &params) + 1e-12);
        for j in 0..7 {
            let mut e = vec![0.0; 7];
            e[j] = 1.0;
            prop_assert!(at <= objective(&x, &ys, &e, &params) + 1e-12);
        }
    }

    #[test]
    fn translation_leaves_weights_alone(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let pts = cloud(30, 3, seed);
        let moved = Mat::from_fn(30, 3, |i, j| pts[(i, j)] + shift * (j as f64 + 1.0));
        let a = stratify(pts.as_ref(), &ChsaParams::default()).unwrap();
        let b = stratify(moved.as_ref(), &ChsaParams::default()).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            prop_assert_eq!(&ra.neighbor_indices, &rb.neighbor_indices);
            for (x, y) in ra.weights.iter().zip(&rb.weights) {
                prop_assert!((x - y).abs() < 1e-8, "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn stratify_is_deterministic(seed in any::<u64>()) {
        let pts = cloud(40, 4, seed);
        let a = stratify(pts.as_ref(), &ChsaParams::default()).unwrap();
        let b = stratify(pts.as_ref(), &ChsaParams::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn triangle_inequality_on_random_triples() {
    let pts = random_subspaces(3000, 10, 3, 99).unwrap();
    for t in pts.chunks(3) {
        let ab = chordal_distance(&t[0], &t[1]).unwrap();
        let bc = chordal_distance(&t[1], &t[2]).unwrap();
        let ac = chordal_distance(&t[0], &t[2]).unwrap();
        assert!(ac <= ab + bc + 1e-12);
        assert!(ab <= ac + bc + 1e-12);
        assert!(bc <= ab + ac + 1e-12);
    }
}

#[test]
fn orthogonal_coordinate_subspaces_reach_the_maximum() {
    let n = 8;
    let a = Subspace::from_orthonormal(Mat::from_fn(n, 3, |i, j| (i == j) as u8 as f64)).unwrap();
    let b =
        Subspace::from_orthonormal(Mat::from_fn(n, 3, |i, j| (i == j + 4) as u8 as f64)).unwrap();
    assert!((chordal_distance(&a, &b).unwrap() - 3f64.sqrt()).abs() < 1e-15);
    assert!(principal_angles(&a, &b)
        .unwrap()
        .iter()
        .all(|t| (t - std::f64::consts::FRAC_PI_2).abs() < 1e-15));
}
