use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rectify_core::linalg::{dist, unit_ball_volume};
use rectify_core::reifenberg::*;
use rectify_core::*;

fn circle(count: usize, noise: f64, seed: u64) -> AtomicMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..count)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / count as f64;
            let r = 1.0 + noise * rng.gen_range(-1.0..1.0);
            vec![r * t.cos(), r * t.sin()]
        })
        .collect();
    AtomicMeasure::from_weighted_points(&pts, &vec![2.0 * PI / count as f64; count]).unwrap()
}

fn planar_grid(n: usize, spacing: f64, noise: f64, seed: u64) -> AtomicMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = (1.0 / spacing).round() as i64;
    let mut pts = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            let mut p = vec![0.0; n];
            p[0] = i as f64 * spacing;
            p[1] = j as f64 * spacing;
            for c in p.iter_mut().skip(2) {
                *c = noise * rng.gen_range(-1.0..1.0);
            }
            pts.push(p);
        }
    }
    let w = vec![spacing * spacing; pts.len()];
    AtomicMeasure::from_weighted_points(&pts, &w).unwrap()
}

#[test]
fn partition_sums_to_one_near_centers() {
    let r = 0.5;
    let centers = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.2, 0.6]];
    let p = build_partition(&centers, r).unwrap();
    let mut max_grad: f64 = 0.0;
    for i in -60..=60 {
        for j in -60..=60 {
            let x = [i as f64 * 0.05, j as f64 * 0.05];
            let w = p.weights_and_gradients(&x);
            let total: f64 = w.iter().map(|(_, v, _)| v).sum();
            assert!((0.0..=1.0 + 1e-12).contains(&total));
            for (c, v, g) in &w {
                assert!((0.0..=1.0).contains(v));
                assert!(dist(&x, &centers[*c]) <= 3.0 * r);
                max_grad = max_grad.max(g[0].hypot(g[1]) * r);
            }
            if centers.iter().any(|c| dist(&x, c) <= 2.0 * r) {
                assert!((total - 1.0).abs() < 1e-8);
            }
        }
    }
    println!("partition gradient constant in R^2: {max_grad:.3}");
    assert!(max_grad <= 3.0);
}

#[test]
fn partition_gradient_matches_finite_differences() {
    let centers = vec![vec![0.0, 0.0, 0.0], vec![1.1, 0.0, 0.2], vec![0.3, 1.2, 0.0]];
    let p = build_partition(&centers, 1.0).unwrap();
    let h = 1e-6;
    for x in [[0.9, 1.9, 0.1], [2.5, 0.4, -0.2], [-2.2, 0.1, 0.3], [1.4, 1.5, 0.0]] {
        for (c, _, g) in p.weights_and_gradients(&x) {
            for a in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += h;
                xm[a] -= h;
                let at = |y: &[f64]| p.weights(y).iter().find(|(i, _)| *i == c).map(|(_, w)| *w).unwrap_or(0.0);
                let fd = (at(&xp) - at(&xm)) / (2.0 * h);
                assert!((fd - g[a]).abs() < 1e-6, "{x:?} center {c} axis {a}: {fd} vs {}", g[a]);
            }
        }
    }
}

#[test]
fn sigma_is_identity_off_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centers = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
    let planes = vec![
        AffinePlane::new(vec![0.0, 0.0, 0.1], vec![vec![1.0, 0.2, 0.0]]).unwrap(),
        AffinePlane::new(vec![1.0, 0.1, 0.0], vec![vec![1.0, 0.0, 0.3]]).unwrap(),
    ];
    let sigma = SigmaMap::new(build_partition(&centers, 1.0).unwrap(), planes).unwrap();
    for _ in 0..500 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-8.0..8.0)).collect();
        if centers.iter().all(|c| dist(&x, c) >= 3.0) {
            assert_eq!(sigma_apply(&sigma, &x), x);
        }
    }
}

// Random planes close to the x-axis in R^2, centers on a grid of spacing r.
fn coherent_sigma(delta: f64, seed: u64) -> SigmaMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = 1.0;
    let centers: Vec<Vec<f64>> = (-8..=8).map(|i| vec![i as f64 * r, 0.0]).collect();
    let planes = centers
        .iter()
        .map(|c| {
            let tilt = delta * rng.gen_range(-1.0..1.0);
            let offset = delta * r * rng.gen_range(-1.0..1.0);
            AffinePlane::new(vec![c[0], offset], vec![vec![1.0, tilt]]).unwrap()
        })
        .collect();
    SigmaMap::new(build_partition(&centers, r).unwrap(), planes).unwrap()
}

#[test]
fn sigma_error_term_is_small_for_coherent_planes() {
    let delta = 0.01;
    let axis = AffinePlane::coordinate(2, 1);
    let mut worst_e: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    for seed in 0..5 {
        let sigma = coherent_sigma(delta, seed);
        for i in -200..=200 {
            for j in -10..=10 {
                let x = [i as f64 * 0.02, j as f64 * 0.05];
                let e = linalg::sub(&sigma.apply(&x), &project(&x, &axis));
                worst_e = worst_e.max(linalg::norm(&e));
                let jac = sigma.jacobian(&x);
                // Jacobian of the projection onto the axis is diag(1, 0).
                let de = [jac[0] - 1.0, jac[1], jac[2], jac[3]];
                worst_grad = worst_grad.max(linalg::frobenius(&de));
            }
        }
    }
    println!("sigma error constants: |e| / delta = {:.2}, |grad e| / delta = {:.2}", worst_e / delta, worst_grad / delta);
    assert!(worst_e <= 10.0 * delta);
    assert!(worst_grad <= 20.0 * delta);
}

/// Graph norm `sup |g| / r + Lip(g)` over the x-axis of the image of a graph.
fn image_graph_norm(sigma: &SigmaMap, amplitude: f64) -> f64 {
    let xs: Vec<f64> = (-300..=300).map(|i| i as f64 * 0.01).collect();
    let image: Vec<Vec<f64>> = xs.iter().map(|&x| sigma.apply(&[x, amplitude * (3.0 * x).sin()])).collect();
    let sup = image.iter().map(|p| p[1].abs()).fold(0.0, f64::max);
    let mut lip: f64 = 0.0;
    for w in image.windows(2) {
        let du = w[1][0] - w[0][0];
        assert!(du > 0.0, "image is not a graph over the axis");
        lip = lip.max((w[1][1] - w[0][1]).abs() / du);
    }
    sup + lip
}

#[test]
fn squash_preserves_graphs_with_linear_norm() {
    let mut previous = f64::INFINITY;
    for delta in [0.04, 0.02, 0.01, 0.005] {
        let sigma = coherent_sigma(delta, 11);
        let norm = image_graph_norm(&sigma, delta / 3.0);
        let c = norm / (2.0 * delta);
        println!("delta {delta}: image graph norm {norm:.4e}, constant {c:.2}");
        assert!(norm < previous);
        assert!(c < 10.0);
        previous = norm;
    }
}

#[test]
fn flat_reconstruction_is_identity() {
    let mu = planar_grid(3, 0.05, 0.0, 0);
    let cfg = DisplacementConfig::new(2);
    let atlas = reconstruct(&mu, 2, &cfg, &ReconstructParams::new(4)).unwrap();
    assert!(atlas.hypothesis_ok);
    assert!(atlas.step_count() >= 2);
    let samples = atlas.owned_samples();
    let plane = AffinePlane::coordinate(3, 2);
    for i in 0..=atlas.step_count() {
        for &s in &samples {
            assert!(plane_distance(atlas.sample(i, s), &plane) <= 1e-10);
            assert!(dist(atlas.sample(i, s), atlas.sample(0, s)) <= 1e-10);
        }
    }
    for r in [0.3, 0.5] {
        let area = measure_estimate(&atlas, &Ball::new(vec![0.1, -0.05, 0.0], r).unwrap()).unwrap();
        assert!((area - PI * r * r).abs() <= 1e-6, "{area}");
    }
}

#[test]
fn line_data_gives_unit_distortion() {
    let pts: Vec<Vec<f64>> = (0..400).map(|i| vec![-1.0 + i as f64 / 200.0, 0.0]).collect();
    let mu = AtomicMeasure::from_weighted_points(&pts, &vec![1.0 / 200.0; 400]).unwrap();
    let atlas = reconstruct(&mu, 1, &DisplacementConfig::new(1), &ReconstructParams::new(3)).unwrap();
    let pairs = atlas.neighbor_pairs();
    for i in 1..=atlas.step_count() {
        assert_eq!(bilipschitz_distortion(&atlas, i, &pairs).unwrap(), 1.0);
    }
    assert!(bilipschitz_distortion(&atlas, 0, &pairs).is_err());
}

#[test]
fn perturbed_plane_area_is_close_to_flat() {
    let mu = planar_grid(3, 0.02, 1e-3, 5);
    let atlas = reconstruct(&mu, 2, &DisplacementConfig::new(2), &ReconstructParams::new(6)).unwrap();
    let r = 0.5;
    let area = measure_estimate(&atlas, &Ball::new(vec![0.0, 0.0, 0.0], r).unwrap()).unwrap();
    let flat = unit_ball_volume(2) * r * r;
    assert!((area / flat - 1.0).abs() <= 0.01, "{area} vs {flat}");
}

#[test]
fn circle_reconstruction_tracks_the_circle() {
    let delta = 1e-3;
    let mu = circle(2000, delta, 1);
    let atlas = reconstruct(&mu, 1, &DisplacementConfig::new(1), &ReconstructParams::new(20)).unwrap();
    let last = atlas.step_count();
    let surface = atlas.points(last, &atlas.owned_samples());
    let truth: Vec<Vec<f64>> = (0..20000)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / 20000.0;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let haus = hausdorff_distance(&surface, &truth).unwrap();
    println!("circle: {last} steps, Hausdorff {haus:.3e} = {:.2} delta", haus / delta);
    assert!(haus <= 10.0 * delta);
    assert!(atlas.max_atom_distance <= 10.0 * delta);
    assert_eq!(atlas.remainder_atoms, 0);

    // Arc of the unit circle inside B_1(p) for p on the circle: |angle| <= pi/3.
    let arc = measure_estimate(&atlas, &Ball::new(vec![1.0, 0.0], 1.0).unwrap()).unwrap();
    assert!((arc - 2.0 * PI / 3.0).abs() <= 0.02, "{arc}");

    for step in &atlas.steps {
        let delta_step = step
            .patches
            .iter()
            .map(|p| p.displacement)
            .fold(0.0, f64::max)
            .sqrt();
        println!(
            "  r {:.4}: motion/r {:.3e}, distortion-1 {:.3e}, delta_step {:.3e}",
            step.scale,
            step.max_motion,
            step.distortion - 1.0,
            delta_step
        );
    }
}

#[test]
fn circle_total_distortion_from_a_flat_root() {
    let mu = circle(2000, 1e-3, 2);
    let params = ReconstructParams::new(1).with_root_scale(1.0 / 16.0);
    let atlas = reconstruct(&mu, 1, &DisplacementConfig::new(1), &params).unwrap();
    let pairs = atlas.neighbor_pairs();
    let total = composed_distortion(&atlas, 0, atlas.step_count(), &pairs);
    let product: f64 = (1..=atlas.step_count())
        .map(|i| bilipschitz_distortion(&atlas, i, &atlas.active_pairs(i)).unwrap())
        .product();
    println!("total distortion {total:.5}, product of steps {product:.5}");
    assert_eq!(atlas.step_count(), 1);
    assert!(total <= 1.01);
}

#[test]
fn graph_patches_are_flat_relative_to_displacement() {
    let count = 10_000;
    let pts: Vec<Vec<f64>> = (0..count)
        .map(|i| {
            let x = -1.0 + 2.0 * i as f64 / (count - 1) as f64;
            vec![x, 0.05 * x.sin()]
        })
        .collect();
    let w: Vec<f64> = pts.iter().map(|p| 2.0 / count as f64 * (1.0 + (0.05 * p[0].cos()).powi(2)).sqrt()).collect();
    let mu = AtomicMeasure::from_weighted_points(&pts, &w).unwrap();
    let atlas = reconstruct(&mu, 1, &DisplacementConfig::new(1), &ReconstructParams::new(6)).unwrap();
    assert!(atlas.step_count() >= 3);
    for step in &atlas.steps {
        let delta_step = step.patches.iter().map(|p| p.displacement).fold(0.0, f64::max).sqrt();
        let lip = step.patches.iter().map(|p| p.graph_lip).fold(0.0, f64::max);
        let c = lip / delta_step;
        println!("  r {:.4}: Lip(g) {lip:.3e}, delta {delta_step:.3e}, constant {c:.2}", step.scale);
        assert!(lip <= 50.0 * delta_step);
    }
}

#[test]
fn holes_are_excised_and_reported() {
    let mut pts: Vec<Vec<f64>> = (0..400).map(|i| vec![-1.0 + i as f64 / 200.0, 0.0]).collect();
    pts.retain(|p| p[0].abs() > 0.3);
    let mu = AtomicMeasure::from_weighted_points(&pts, &vec![1.0 / 200.0; pts.len()]).unwrap();
    let params = ReconstructParams::new(4).with_root_scale(1.0);
    let atlas = reconstruct(&mu, 1, &DisplacementConfig::new(1), &params).unwrap();
    let bad: usize = atlas.steps.iter().map(|s| s.bad.len()).sum();
    assert!(bad > 0);
    let alive = atlas.alive_samples();
    let last = atlas.step_count();
    assert!(alive.len() < atlas.owned_samples().len());
    for &s in &alive {
        let p = atlas.sample(last, s);
        assert!(p[1].abs() <= 1e-12);
    }
    assert_eq!(atlas.covered_atoms + atlas.remainder_atoms, mu.len());
}

#[test]
fn too_little_mass_names_the_ball() {
    let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.01, 0.0]).collect();
    let mu = AtomicMeasure::from_weighted_points(&pts, &vec![1e-9; 50]).unwrap();
    let params = ReconstructParams::new(2).with_root_scale(0.5);
    let err = reconstruct(&mu, 1, &DisplacementConfig::new(1), &params).unwrap_err();
    assert!(matches!(err, Error::PlaneFitImpossible { radius, .. } if radius == 0.5));
}

#[test]
fn measure_outside_root_is_an_error() {
    let mu = planar_grid(3, 0.1, 0.0, 0);
    let atlas = reconstruct(&mu, 2, &DisplacementConfig::new(2), &ReconstructParams::new(2)).unwrap();
    let far = Ball::new(vec![50.0, 0.0, 0.0], 1.0).unwrap();
    assert!(matches!(measure_estimate(&atlas, &far), Err(Error::OutsideRoot { .. })));
}

#[test]
fn area_is_additive_over_disjoint_balls() {
    let mu = circle(2000, 1e-3, 4);
    let atlas = reconstruct(&mu, 1, &DisplacementConfig::new(1), &ReconstructParams::new(20)).unwrap();
    let whole = measure_estimate(&atlas, &Ball::new(vec![1.0, 0.0], 0.6).unwrap()).unwrap();
    let a = measure_estimate(&atlas, &Ball::new(vec![(0.3f64).cos(), (0.3f64).sin()], 0.25).unwrap()).unwrap();
    let b = measure_estimate(&atlas, &Ball::new(vec![(0.3f64).cos(), -(0.3f64).sin()], 0.25).unwrap()).unwrap();
    let mid = measure_estimate(&atlas, &Ball::new(vec![1.0, 0.0], 0.05).unwrap()).unwrap();
    // Three disjoint balls against their union's arc minus the uncovered gaps.
    let gaps = whole - a - b - mid;
    let arc = |c: f64| 2.0 * (c / 2.0).asin() * 2.0;
    let expected_gaps = arc(0.6) - 2.0 * arc(0.25) - arc(0.05);
    assert!((gaps - expected_gaps).abs() <= 0.01 * whole);
}

#[test]
fn inverse_recovers_root_parameters() {
    let mu = circle(2000, 1e-3, 6);
    let atlas = reconstruct(&mu, 1, &DisplacementConfig::new(1), &ReconstructParams::new(3)).unwrap();
    let last = atlas.step_count();
    let samples = atlas.owned_samples();
    let mut worst: f64 = 0.0;
    for &s in samples.iter().step_by(97) {
        let z = atlas.sample(last, s).to_vec();
        let (u, residual) = atlas.inverse(&z).unwrap();
        assert!(residual <= 1e-9, "{residual}");
        worst = worst.max(dist(&u, atlas.sample(0, s)));
    }
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn report_serializes_patches() {
    let mu = circle(500, 0.0, 0);
    let atlas = reconstruct(&mu, 1, &DisplacementConfig::new(1), &ReconstructParams::new(2)).unwrap();
    let report = atlas.report();
    assert_eq!(report.scales.len(), atlas.step_count());
    assert!(report.scales.iter().all(|s| !s.patches.is_empty()));
    assert!(report.total_distortion >= 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sigma_fixes_points_with_no_weight(
        cx in -1.0f64..1.0, cy in -1.0f64..1.0,
        px in -10.0f64..10.0, py in -10.0f64..10.0,
        tilt in -1.0f64..1.0,
    ) {
        let centers = vec![vec![cx, cy]];
        let plane = AffinePlane::new(vec![cx, cy + 0.1], vec![vec![1.0, tilt]]).unwrap();
        let sigma = SigmaMap::new(build_partition(&centers, 0.5).unwrap(), vec![plane]).unwrap();
        let x = vec![px, py];
        if sigma.partition().leftover(&x) == 1.0 {
            prop_assert_eq!(sigma.apply(&x), x);
        }
    }

    #[test]
    fn separated_centers_always_partition(
        seed in 0u64..1000,
        r in 0.1f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let candidates: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]).collect();
        let mut centers: Vec<Vec<f64>> = Vec::new();
        for c in candidates {
            if centers.iter().all(|d| dist(&c, d) >= r) {
                centers.push(c);
            }
        }
        let p = build_partition(&centers, r).unwrap();
        for c in &centers {
            let total: f64 = p.weights(c).iter().map(|(_, w)| w).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
