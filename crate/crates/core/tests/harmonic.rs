use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rectify_core::harmonic::{self, EnergyField, QuadratureConfig, StratumConfig, SymmetryConfig};
use rectify_core::{AffinePlane, AtomicMeasure, Ball, Error};

fn radial() -> EnergyField {
    EnergyField::radial_projection(3)
}

fn tight() -> QuadratureConfig {
    QuadratureConfig {
        rel_tol: 1e-10,
        ..QuadratureConfig::default()
    }
}

#[test]
fn radial_energy_at_origin_is_eight_pi() {
    for r in [0.25, 0.5, 1.0] {
        let t = harmonic::theta(&radial(), &[0.0; 3], r).unwrap();
        assert!((t - 8.0 * PI).abs() <= 1e-3 * 8.0 * PI, "r = {r}: {t}");
    }
}

#[test]
fn radial_energy_off_origin_matches_shell_formula() {
    // For |x| = d < r: int_{B_r(x)} 2/|y|^2 = 2 * 2 pi int rho^2/rho^2 (1 - cos psi(rho)) d rho,
    // with the cap cut by the ball; integrate that one-dimensional formula directly.
    let d: f64 = 0.3;
    let r: f64 = 0.5;
    let steps = 200_000;
    let mut integral = 0.0;
    for i in 0..steps {
        let rho = (i as f64 + 0.5) / steps as f64 * (r + d);
        let fraction = if rho <= r - d {
            1.0
        } else {
            // fraction of the sphere |y| = rho inside |y - x| <= r
            let cos_psi = ((rho * rho + d * d - r * r) / (2.0 * rho * d)).clamp(-1.0, 1.0);
            (1.0 - cos_psi) / 2.0
        };
        integral += 2.0 * 4.0 * PI * fraction * (r + d) / steps as f64;
    }
    let t = harmonic::theta(&radial(), &[d, 0.0, 0.0], r).unwrap();
    assert!((t - integral / r).abs() < 1e-4 * t, "{t} vs {}", integral / r);
}

#[test]
fn constant_and_linear_energies() {
    let c = EnergyField::constant(3, vec![1.0, 0.0, 0.0]);
    assert_eq!(harmonic::theta(&c, &[0.2, 0.1, 0.0], 0.7).unwrap(), 0.0);
    let a = vec![1.0, 2.0, 0.0, 0.0, 1.0, -1.0, 3.0, 0.0, 0.5];
    let f = EnergyField::linear(3, 3, a.clone()).unwrap();
    let frob: f64 = a.iter().map(|v| v * v).sum();
    let t = harmonic::theta(&f, &[0.0; 3], 1.0).unwrap();
    assert!((t - frob * 4.0 * PI / 3.0).abs() < 1e-12 * t);
}

#[test]
fn energy_is_infinite_for_planar_radial_projection() {
    let f = EnergyField::radial_projection(2);
    assert_eq!(harmonic::theta(&f, &[0.1, 0.0], 0.5), Err(Error::EnergyInfinite));
    assert!(harmonic::theta(&f, &[1.0, 0.0], 0.5).is_ok());
}

#[test]
fn extension_energy_matches_product_formula() {
    // w/|w| on R^4 along e1: density 2/|w|^2; at x = 0 the inner 3-ball integral is 8 pi s.
    let f = EnergyField::k_symmetric_extension(4, 1).unwrap();
    let r: f64 = 0.8;
    // 2 int_0^r 8 pi sqrt(r^2 - t^2) dt = 8 pi * pi r^2 / 2
    let exact = 8.0 * PI * PI * r * r / 2.0 / (r * r);
    let t = harmonic::theta(&f, &[0.3, 0.0, 0.0, 0.0], r).unwrap();
    assert!((t - exact).abs() < 1e-4 * exact, "{t} vs {exact}");
}

/// `int_{B_s(w)} 2/|y|^2` over a 3-ball with `|w| = d`, by spherical shells about the origin.
fn shell_integral(d: f64, s: f64) -> f64 {
    let (a, b) = ((d - s).abs(), d + s);
    let cap = (b - a) - (b * b - a * a) / (4.0 * d) - (d * d - s * s) / (2.0 * d) * (b / a).ln();
    2.0 * (4.0 * PI * (s - d).max(0.0) + 2.0 * PI * cap)
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / (2 * m) as f64;
    let inner: f64 = (1..2 * m).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn extension_energy_off_the_singular_line() {
    let f = EnergyField::k_symmetric_extension(4, 1).unwrap();
    let x = [0.1, 0.12, 0.05, 0.0];
    let r: f64 = 0.5;
    let d = (0.12f64 * 0.12 + 0.05 * 0.05).sqrt();
    // t = r sin(tau) along the line; the slice radius r cos(tau) meets the line at tau*.
    let slice = |tau: f64| shell_integral(d, r * tau.cos()) * r * tau.cos();
    let kink = (d / r).acos();
    let exact = 2.0 * (simpson(slice, 0.0, kink, 200_000) + simpson(slice, kink, 0.5 * PI, 200_000)) / (r * r);
    let t = harmonic::theta(&f, &x, r).unwrap();
    assert!((t - exact).abs() < 2e-4 * exact, "{t} vs {exact}");
}

#[test]
fn drops_vanish_at_the_homogeneity_point() {
    for (s, r) in [(0.1, 0.4), (0.25, 1.0), (0.01, 0.08)] {
        let w = harmonic::energy_drop(&radial(), &[0.0; 3], s, r).unwrap();
        assert!(w.abs() < 1e-6, "{w}");
    }
    let c = EnergyField::constant(3, vec![0.0, 1.0, 0.0]);
    assert_eq!(harmonic::energy_drop(&c, &[0.5; 3], 0.1, 0.4).unwrap(), 0.0);
}

#[test]
fn drop_off_origin_matches_integrated_boundary_energy() {
    let f = radial();
    let x = [0.5, 0.0, 0.0];
    let q = tight();
    let w = harmonic::energy_drop_with(&f, &x, 0.1, 0.4, &q).unwrap();
    assert!(w > 0.0);
    // integrate d theta / d rho = 2 rho^{-1} int_{dB_rho} |d_nu f|^2 over [0.1, 0.4]
    let steps = 64;
    let (a, b) = (0.1, 0.4);
    let h = (b - a) / steps as f64;
    let mut integral = 0.0;
    for i in 0..=steps {
        let rho = a + i as f64 * h;
        let weight = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        integral += weight * harmonic::radial_boundary_energy(&f, &x, rho, &q).unwrap();
    }
    integral *= h / 3.0;
    assert!((integral - w).abs() < 1e-3 * w, "{integral} vs {w}");
}

#[test]
fn derivative_identity_at_random_points() {
    let f = radial();
    let q = tight();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.6..0.6)).collect();
        let r = rng.gen_range(0.1..0.8);
        let h = 1e-4 * r;
        let dt = (harmonic::theta_with(&f, &x, r + h, &q).unwrap() - harmonic::theta_with(&f, &x, r - h, &q).unwrap()) / (2.0 * h);
        let b = harmonic::radial_boundary_energy(&f, &x, r, &q).unwrap();
        assert!((dt - b).abs() <= 1e-2 * b.abs().max(1e-12), "{x:?} {r}: {dt} vs {b}");
    }
}

#[test]
fn custom_homogeneous_field_is_not_monotone_everywhere_but_is_finite() {
    let f = EnergyField::from_tag("homogeneous_custom", 3).unwrap();
    assert!(!f.is_stationary());
    let t = harmonic::theta(&f, &[0.0; 3], 1.0).unwrap();
    let t_half = harmonic::theta(&f, &[0.0; 3], 0.5).unwrap();
    assert!(t.is_finite() && t > 0.0);
    assert!((t - t_half).abs() < 1e-4 * t);
}

#[test]
fn energy_point_records_dyadic_drops() {
    let p = harmonic::energy_point(&radial(), &[0.2, 0.0, 0.0], 0.5, &[2, 3, 4]).unwrap();
    assert_eq!(p.drops.len(), 3);
    assert!(p.drops.iter().all(|(_, w)| *w >= -1e-4 * p.theta));
}

#[test]
fn radial_projection_is_zero_symmetric() {
    let ball = Ball::new(vec![0.0; 3], 1.0).unwrap();
    let r = harmonic::symmetry_distance(&radial(), &ball, 0, &[]).unwrap();
    assert!(r.value < 1e-24, "{}", r.value);
}

#[test]
fn extension_is_symmetric_along_its_axis_only() {
    let f = EnergyField::k_symmetric_extension(3, 1).unwrap();
    let ball = Ball::new(vec![0.4, 0.0, 0.0], 0.5).unwrap();
    let axis = AffinePlane::coordinate(3, 1);
    let along = harmonic::symmetry_distance(&f, &ball, 1, &[axis]).unwrap();
    assert!(along.value < 1e-24, "{}", along.value);
    let probe = AffinePlane::linear(3, vec![vec![0.0, 1.0, 0.0]]).unwrap();
    let across = harmonic::symmetry_distance(&f, &ball, 1, &[probe]).unwrap();
    assert!(across.value > 0.1, "{}", across.value);
}

#[test]
fn radial_projection_has_no_symmetric_line() {
    let ball = Ball::new(vec![0.0; 3], 0.5).unwrap();
    let r = harmonic::symmetry_distance(&radial(), &ball, 1, &[]).unwrap();
    assert!(r.value > 0.1, "{}", r.value);
    assert_eq!(r.plane.dim(), 1);
}

#[test]
fn smooth_field_has_empty_stratum() {
    let f = EnergyField::from_tag("smooth", 3).unwrap();
    let s = harmonic::quantitative_stratum(&f, 0, 0.05, 1.0 / 8.0, 1.0 / 8.0).unwrap();
    assert!(s.points.is_empty());
    assert!(s.grid_points > 0);
}

#[test]
fn radial_stratum_concentrates_at_the_origin() {
    let r = 1.0 / 16.0;
    let s = harmonic::quantitative_stratum(&radial(), 0, 0.05, r, r).unwrap();
    assert!(!s.points.is_empty());
    assert!(s.points.iter().all(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt() <= 8.0 * r));
    assert!(s.approximate);
    assert!(s.measure.weights().iter().all(|&w| w == 1.0));
}

#[test]
fn strata_are_nested() {
    let domain = Ball::new(vec![0.0; 3], 0.5).unwrap();
    let r = 1.0 / 16.0;
    let cfg = StratumConfig::default();
    let f = EnergyField::k_symmetric_extension(3, 1).unwrap();
    let mut previous: Option<Vec<Vec<f64>>> = None;
    for k in 0..3 {
        let s = harmonic::quantitative_stratum_in(&f, &domain, k, 0.05, r, r, &cfg).unwrap();
        if let Some(prev) = &previous {
            for p in prev {
                assert!(s.points.contains(p), "k = {k}: {p:?}");
            }
        }
        previous = Some(s.points);
    }
}

#[test]
fn regularity_scale_of_radial_projection() {
    let f = radial();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let d = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let expected = (d / (1.0 + 2f64.sqrt())).min(1.0);
        assert!((harmonic::regularity_scale(&f, &x) - expected).abs() < 1e-12);
    }
    assert_eq!(harmonic::regularity_scale(&f, &[0.0; 3]), 0.0);
    let c = EnergyField::constant(3, vec![1.0, 0.0, 0.0]);
    assert_eq!(harmonic::regularity_scale(&c, &[0.3; 3]), 1.0);
}

#[test]
fn regularity_sublevel_volume_is_a_ball() {
    let f = radial();
    let domain = Ball::new(vec![0.0; 3], 1.0).unwrap();
    for r in [1.0 / 8.0, 1.0 / 32.0] {
        let v = harmonic::regularity_sublevel_volume(&f, &domain, r, 9);
        let exact = 4.0 * PI / 3.0 * ((1.0 + 2f64.sqrt()) * r).powi(3);
        assert!((v - exact).abs() < 0.03 * exact, "{r}: {v} vs {exact}");
    }
}

#[test]
fn tube_volume_of_a_point() {
    let v = harmonic::tube_volume(&[vec![0.0; 3]], 0.5, 0.5 / 8.0);
    let exact = 4.0 * PI / 3.0 * 0.125;
    assert!((v - exact).abs() < 0.15 * exact);
}

#[test]
fn best_approximation_single_atom_is_trivial() {
    let mu = AtomicMeasure::from_points(&[vec![0.0; 3]]).unwrap();
    let b = harmonic::best_approx_check(&radial(), &mu, &[0.0; 3], 0.1, 0, 0.05, &QuadratureConfig::default()).unwrap();
    assert_eq!(b.lhs, 0.0);
    assert!(b.rhs.abs() < 1e-6);
    assert!(b.zero_symmetry < 1e-24);
}

fn shell_measure() -> AtomicMeasure {
    let mut pts = vec![vec![0.0; 3]];
    for i in 0..6 {
        let mut p = vec![0.0; 3];
        p[i / 2] = if i % 2 == 0 { 0.3 } else { -0.3 };
        pts.push(p);
    }
    AtomicMeasure::from_points(&pts).unwrap()
}

#[test]
fn best_approximation_on_the_shell_fixture() {
    let mu = shell_measure();
    let q = QuadratureConfig::default();
    let b = harmonic::best_approx_check(&radial(), &mu, &[0.0; 3], 1.0, 0, 0.05, &q).unwrap();
    assert!(b.lhs > 0.0 && b.rhs > 0.0);
    let fine = harmonic::best_approx_check(&radial(), &mu, &[0.0; 3], 1.0, 0, 0.05, &q.refined()).unwrap();
    assert!((fine.ratio / b.ratio - 1.0).abs() < 0.2);
    assert!(b.preconditions_hold);
}

#[test]
fn halving_the_node_spacing_keeps_theta() {
    let q = QuadratureConfig::default();
    let x = [0.2, -0.1, 0.3];
    let a = harmonic::theta_with(&radial(), &x, 0.6, &q).unwrap();
    let b = harmonic::theta_with(&radial(), &x, 0.6, &q.refined()).unwrap();
    assert!((a - b).abs() < 2e-4 * a);
}

#[test]
fn symmetry_config_controls_candidate_count() {
    let ball = Ball::new(vec![0.0; 3], 0.5).unwrap();
    let cfg = SymmetryConfig::default();
    let c = harmonic::plane_candidates(&radial(), &ball, 2, 10, &cfg);
    assert_eq!(c.len(), 11);
    assert!(c.iter().all(|p| p.dim() == 2 && p.base() == [0.0; 3]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn theta_is_monotone_in_the_radius(
        x in prop::collection::vec(-0.8f64..0.8, 3),
        s in 0.02f64..1.0,
        t in 0.0f64..1.0,
    ) {
        let r = s + t * (1.0 - s);
        let f = radial();
        let ts = harmonic::theta(&f, &x, s).unwrap();
        let tr = harmonic::theta(&f, &x, r).unwrap();
        prop_assert!(ts <= tr + 1e-4 * tr, "{} > {}", ts, tr);
    }

    #[test]
    fn symmetry_distance_is_nonnegative(
        c in prop::collection::vec(-0.5f64..0.5, 3),
        radius in 0.05f64..0.5,
    ) {
        let ball = Ball::new(c, radius).unwrap();
        let cfg = SymmetryConfig { grassmann_samples: 8, ..SymmetryConfig::default() };
        for k in 0..3 {
            let cands = harmonic::plane_candidates(&radial(), &ball, k, 8, &cfg);
            let r = harmonic::symmetry_distance_with(&radial(), &ball, k, &cands, &cfg).unwrap();
            prop_assert!(r.value >= 0.0);
        }
    }
}
