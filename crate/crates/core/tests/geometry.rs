use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rectify_core::geometry::one_sided;
use rectify_core::linalg::{dist, dot, norm, sub};
use rectify_core::{grassmann_distance, hausdorff_distance, plane_distance, project, AffinePlane};

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_plane(rng: &mut ChaCha8Rng, n: usize, k: usize, base: Vec<f64>) -> AffinePlane {
    let dirs = (0..k).map(|_| gaussian(rng, n)).collect();
    AffinePlane::new(base, dirs).unwrap()
}

fn unit_sphere(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let v = gaussian(rng, k);
    let l = norm(&v);
    v.iter().map(|x| x / l).collect()
}

/// Largest eigenvalue of `B^T pi_{W^perp} B` by power iteration, where `B`
/// holds the directions of `v`. Its square root is the sine of the largest
/// principal angle.
fn largest_principal_sine(v: &AffinePlane, w: &AffinePlane) -> f64 {
    let k = v.dim();
    let cols: Vec<Vec<f64>> = v.directions().iter().map(|d| w.normal_part(d)).collect();
    let gram: Vec<f64> = (0..k * k).map(|i| dot(&cols[i / k], &cols[i % k])).collect();
    let mut x = vec![1.0; k];
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let y: Vec<f64> = (0..k).map(|i| (0..k).map(|j| gram[i * k + j] * x[j]).sum()).collect();
        let l = norm(&y);
        if l == 0.0 {
            return 0.0;
        }
        lambda = l;
        x = y.iter().map(|t| t / l).collect();
    }
    lambda.sqrt()
}

/// Foot of the perpendicular from the origin and the radius of `plane ∩ B_1`.
fn disk(plane: &AffinePlane) -> (Vec<f64>, f64) {
    let c = project(&vec![0.0; plane.ambient_dim()], plane);
    let r = (1.0 - dot(&c, &c)).max(0.0).sqrt();
    (c, r)
}

/// Exact distance from `x` to the disk `plane ∩ B_1`.
fn distance_to_disk(x: &[f64], plane: &AffinePlane) -> f64 {
    let (c, r) = disk(plane);
    let foot = project(x, plane);
    let normal = dist(x, &foot);
    let radial = (dist(&foot, &c) - r).max(0.0);
    normal.hypot(radial)
}

fn disk_boundary(plane: &AffinePlane, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
    let (c, r) = disk(plane);
    let k = plane.dim();
    let centered = plane.through(c);
    (0..count)
        .map(|_| {
            let u: Vec<f64> = unit_sphere(rng, k).iter().map(|t| t * r).collect();
            centered.embed(&u)
        })
        .collect()
}

#[test]
fn projection_examples() {
    let plane = AffinePlane::new(vec![0.0, 0.0, 1.0], vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
    assert_eq!(project(&[3.0, 4.0, 5.0], &plane), vec![3.0, 4.0, 1.0]);
    let axis = AffinePlane::coordinate(3, 1);
    assert!((plane_distance(&[1.0, 1.0, 1.0], &axis) - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn projection_agrees_with_least_squares_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let base = gaussian(&mut rng, 3);
        let plane = random_plane(&mut rng, 3, 1, base);
        let x = gaussian(&mut rng, 3);
        let d = plane.directions()[0].clone();
        let b = plane.base().to_vec();
        let f = |t: f64| dist(&x, &b.iter().zip(&d).map(|(p, q)| p + t * q).collect::<Vec<_>>());
        let (mut lo, mut hi) = (-50.0, 50.0);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        assert!((f(0.5 * (lo + hi)) - plane_distance(&x, &plane)).abs() < 1e-9);
    }
}

#[test]
fn grassmann_distance_is_largest_principal_sine() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.gen_range(2..=6);
        let k = rng.gen_range(1..n);
        let v = random_plane(&mut rng, n, k, vec![0.0; n]);
        let w = random_plane(&mut rng, n, k, vec![0.0; n]);
        let oracle = largest_principal_sine(&v, &w);
        assert!((grassmann_distance(&v, &w) - oracle).abs() < 1e-7, "{} vs {oracle}", grassmann_distance(&v, &w));
    }
}

#[test]
fn grassmann_distance_matches_sampled_hausdorff_of_unit_disks() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let v = random_plane(&mut rng, 3, 1, vec![0.0; 3]);
        let w = random_plane(&mut rng, 3, 1, vec![0.0; 3]);
        let sample = |p: &AffinePlane| -> Vec<Vec<f64>> {
            (0..=4000).map(|i| p.embed(&[-1.0 + i as f64 / 2000.0])).collect()
        };
        let dh = hausdorff_distance(&sample(&v), &sample(&w)).unwrap();
        assert!((dh - grassmann_distance(&v, &w)).abs() < 2e-3);
    }
}

#[test]
fn two_sided_containment_constant() {
    // Offset plus tilt over a disk of radius at least sqrt(3)/2, plus the
    // boundary shift of the disks: 1 + 2/sqrt(3) + 1/sqrt(3).
    let shape = 1.0 + 3f64.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=5);
        let k = rng.gen_range(1..n);
        let base: Vec<f64> = unit_sphere(&mut rng, n).iter().map(|t| t * rng.gen_range(0.0..0.45)).collect();
        let v = random_plane(&mut rng, n, k, base.clone());
        let size = 10f64.powf(rng.gen_range(-4.0..-1.5));
        let dirs: Vec<Vec<f64>> = v
            .directions()
            .iter()
            .map(|d| d.iter().zip(gaussian(&mut rng, n)).map(|(a, g)| a + size * g).collect())
            .collect();
        let wbase: Vec<f64> = base.iter().zip(gaussian(&mut rng, n)).map(|(a, g)| a + size * g).collect();
        let w = AffinePlane::new(wbase, dirs).unwrap();
        let vb = disk_boundary(&v, &mut rng, 4000);
        let wb = disk_boundary(&w, &mut rng, 4000);
        let delta = vb.iter().map(|x| plane_distance(x, &w)).fold(0.0, f64::max);
        let dh = vb
            .iter()
            .map(|x| distance_to_disk(x, &w))
            .chain(wb.iter().map(|x| distance_to_disk(x, &v)))
            .fold(0.0, f64::max);
        worst = worst.max(dh / delta);
    }
    assert!(worst <= 10.0 * shape, "measured c = {worst}");
}

#[test]
fn hausdorff_examples() {
    let a = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
    let b = vec![vec![0.0, 0.5]];
    assert_eq!(hausdorff_distance(&a, &b).unwrap(), 1.25f64.sqrt());
    assert_eq!(one_sided(&b, &a), 0.5);
    assert!(hausdorff_distance(&a, &[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn complement_preserves_distance(seed in any::<u64>(), n in 2usize..7, kk in 1usize..6) {
        let k = 1 + kk % (n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_plane(&mut rng, n, k, vec![0.0; n]);
        let w = random_plane(&mut rng, n, k, vec![0.0; n]);
        let d = grassmann_distance(&v, &w);
        prop_assert!((d - grassmann_distance(&v.complement(), &w.complement())).abs() <= 1e-8);
    }

    #[test]
    fn projector_difference_is_bounded(seed in any::<u64>(), n in 2usize..7, kk in 1usize..6) {
        let k = 1 + kk % (n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_plane(&mut rng, n, k, vec![0.0; n]);
        let w = random_plane(&mut rng, n, k, vec![0.0; n]);
        let d = grassmann_distance(&v, &w);
        for _ in 0..8 {
            let x = gaussian(&mut rng, n);
            let diff = norm(&sub(&project(&x, &v), &project(&x, &w)));
            prop_assert!(diff <= 2.0 * d * norm(&x) + 1e-12);
            prop_assert!(diff <= d * norm(&x) * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal(seed in any::<u64>(), n in 1usize..7, kk in 0usize..6) {
        let k = kk % (n + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = gaussian(&mut rng, n);
        let plane = random_plane(&mut rng, n, k, base);
        let x = gaussian(&mut rng, n);
        let p = project(&x, &plane);
        prop_assert!(plane_distance(&p, &plane) < 1e-12);
        let r = sub(&x, &p);
        for d in plane.directions() {
            prop_assert!(dot(&r, d).abs() < 1e-12);
        }
    }
}
