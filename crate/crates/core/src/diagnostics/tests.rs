use super::*;
use crate::space::{Weight, Window};
use rand::Rng;
use std::f64::consts::PI;

fn radii() -> Vec<f64> {
    vec![0.1, 0.05, 0.02, 0.01, 0.005]
}

#[test]
fn euclidean_dimensions_are_exact_inside() {
    for n in 1..=3 {
        let s = SpaceInstance::euclidean(Window::unit(n)).unwrap();
        let r = estimate_beta(&s, 200, &radii(), 1).unwrap();
        assert!((r.beta_hat - 2f64.powi(n as i32)).abs() < 1e-9, "{r:?}");
        assert!((r.dimension_hat - n as f64).abs() < 0.05);
        assert_eq!(r.dimension_hat, r.beta_hat.ln() / 2f64.ln());
        assert!(r.samples > 0 && r.skipped_zero_mass == 0);
    }
}

/// Fraction of a `k x k` grid on the bounding square of `B_r(c)` that lies
/// in the disk and in `[0, 1]^2`, times the square area.
fn grid_area(c: &[f64], r: f64, k: usize) -> f64 {
    let h = 2.0 * r / k as f64;
    let mut hits = 0usize;
    for i in 0..k {
        for j in 0..k {
            let x = c[0] - r + (i as f64 + 0.5) * h;
            let y = c[1] - r + (j as f64 + 0.5) * h;
            if (x - c[0]).powi(2) + (y - c[1]).powi(2) <= r * r
                && (0.0..=1.0).contains(&x)
                && (0.0..=1.0).contains(&y)
            {
                hits += 1;
            }
        }
    }
    hits as f64 * h * h
}

#[test]
fn boundary_balls_keep_the_convex_bound() {
    let s = SpaceInstance::euclidean(Window::unit(2)).unwrap();
    let opts = DiagOptions {
        include_boundary: true,
        ..Default::default()
    };
    let r = estimate_beta_with(&s, 500, &[0.3, 0.1, 0.03], 2, &opts).unwrap();
    assert!(r.beta_hat <= 4.0 + 1e-12 && r.skipped_boundary == 0);
    let w = &r.worst_case;
    let oracle = grid_area(&w.point, 2.0 * w.radius, 2000) / grid_area(&w.point, w.radius, 2000);
    assert!(
        (oracle / r.beta_hat - 1.0).abs() < 5e-3,
        "{oracle} vs {}",
        r.beta_hat
    );
}

#[test]
fn heisenberg_is_four_dimensional() {
    let s = SpaceInstance::heisenberg(Window::centered(&[1.0, 1.0, 1.0])).unwrap();
    let r = estimate_beta(&s, 200, &[0.2, 0.1, 0.05, 0.02], 3).unwrap();
    assert!((r.beta_hat - 16.0).abs() < 1e-9);
    assert!((r.dimension_hat - 4.0).abs() < 0.1);
}

#[test]
fn larger_budget_never_lowers_beta() {
    let s = SpaceInstance::weighted(Window::unit(2), Weight::DEFAULT).unwrap();
    let mut prev = 0.0;
    for n in [10, 40, 160] {
        let r = estimate_beta(&s, n, &radii(), 4).unwrap();
        assert!(r.beta_hat >= prev);
        prev = r.beta_hat;
    }
    // interior ratio 4 (1 + A sin(kx) phi(2kr)) / (1 + A sin(kx) phi(kr)),
    // phi(s) = 2 J1(s) / s, maximized over the admissible centres
    let phi = |s: f64| 2.0 * libm::j1(s) / s;
    let k = 2.0 * PI;
    let mut oracle: f64 = 0.0;
    for r in radii() {
        for i in 0..=4000 {
            let x = 2.0 * r + (1.0 - 4.0 * r) * i as f64 / 4000.0;
            let a = 0.5 * (k * x).sin();
            oracle = oracle.max(4.0 * (1.0 + a * phi(2.0 * k * r)) / (1.0 + a * phi(k * r)));
        }
    }
    assert!(
        prev <= oracle + 1e-9 && prev > 0.98 * oracle,
        "{prev} vs {oracle}"
    );
}

#[test]
fn density_traces() {
    let e = SpaceInstance::euclidean(Window::unit(2)).unwrap();
    let d = estimate_density_bounds(&e, 2.0, 50, &radii(), 0).unwrap();
    assert!((d.a_hat - PI).abs() < 1e-12 && (d.b_hat - PI).abs() < 1e-12);
    assert_eq!(d.trace_rows().len(), 50 * 5);
    assert!(d.r_ladder.windows(2).all(|w| w[0] > w[1]));

    let w = SpaceInstance::weighted(Window::unit(2), Weight::DEFAULT).unwrap();
    let d = estimate_density_bounds(&w, 2.0, 2000, &[0.1, 0.01, 0.001], 0).unwrap();
    assert!((d.a_hat / (PI / 2.0) - 1.0).abs() < 0.02, "{d:?}");
    assert!((d.b_hat / (1.5 * PI) - 1.0).abs() < 0.02);
    for t in &d.traces {
        let want = Weight::DEFAULT.value(t.point[0]) * PI;
        assert!((t.ratios[2] / want - 1.0).abs() < 1e-3);
        assert!(t.ratios.iter().all(|v| *v > 0.0));
    }
    assert!(d.a_hat <= d.b_hat);
}

/// Independent volume of the unit Koranyi ball by rejection from its box.
fn koranyi_volume(n: usize) -> f64 {
    let mut rng = crate::rng::stream(17, Domain::BallMass, 0);
    let mut hits = 0usize;
    for _ in 0..n {
        let x = 2.0 * rng.random::<f64>() - 1.0;
        let y = 2.0 * rng.random::<f64>() - 1.0;
        let t = 0.5 * rng.random::<f64>() - 0.25;
        let g = ((x * x + y * y).powi(2) + 16.0 * t * t).powf(0.25);
        if g <= 1.0 {
            hits += 1;
        }
    }
    2.0 * 2.0 * 0.5 * hits as f64 / n as f64
}

#[test]
fn heisenberg_density_is_the_unit_ball_volume() {
    let h = SpaceInstance::heisenberg(Window::centered(&[1.0, 1.0, 1.0])).unwrap();
    let d = estimate_density_bounds(&h, 4.0, 40, &[0.2, 0.05, 0.01], 5).unwrap();
    let oracle = koranyi_volume(4_000_000);
    assert!(
        (d.a_hat / oracle - 1.0).abs() < 0.005,
        "{} vs {oracle}",
        d.a_hat
    );
    assert!((d.b_hat - d.a_hat).abs() < 1e-12);
}

#[test]
fn volume_lower_bound() {
    for n in 1..=3 {
        let s = SpaceInstance::euclidean(Window::unit(n)).unwrap();
        let r = check_volume_lower(&s, 2f64.powi(n as i32), 2000, 6).unwrap();
        assert!(r.pass && r.min_slack > 0.0, "{r:?}");
        let bad = check_volume_lower(&s, 2f64.powi(n as i32) / 2.0, 2000, 6).unwrap();
        assert!(!bad.pass && bad.violations > 0);
        let w = bad.witness.unwrap();
        assert!(w.lhs < w.rhs && w.r < w.r0);
    }
    let h = SpaceInstance::heisenberg(Window::centered(&[1.0, 1.0, 1.0])).unwrap();
    let r = check_volume_lower(&h, 16.0, 500, 7).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn cantor_diagnostics_run_at_finite_depth() {
    let c = SpaceInstance::from_descriptor(
        &serde_json::from_str(r#"{"kind":"FatCantor","window":{"min":[0.0],"max":[1.0]}}"#)
            .unwrap(),
    )
    .unwrap();
    let radii = default_radii(&c).unwrap();
    assert!(radii.iter().all(|r| *r >= radius_floor(&c)));
    let b = estimate_beta(&c, 500, &radii, 8).unwrap();
    assert!(b.beta_hat >= 2.0 && b.beta_hat.is_finite());
    let v = check_volume_lower(&c, b.beta_hat, 2000, 9).unwrap();
    assert!(v.n_trials == 2000);
}

#[test]
fn bad_inputs() {
    let s = SpaceInstance::euclidean(Window::unit(2)).unwrap();
    assert!(estimate_beta(&s, 0, &radii(), 0).is_err());
    assert!(estimate_beta(&s, 10, &[], 0).is_err());
    assert!(matches!(
        estimate_beta(&s, 10, &[0.9], 0),
        Err(Error::Precondition(_))
    ));
    assert!(estimate_density_bounds(&s, 0.0, 10, &radii(), 0).is_err());
    assert!(check_volume_lower(&s, 0.5, 10, 0).is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn running_max_is_monotone(seed in 0u64..1000, n in 1usize..60) {
            let s = SpaceInstance::banach(Window::unit(2), 1.0).unwrap();
            let a = estimate_beta(&s, n, &radii(), seed).unwrap();
            let b = estimate_beta(&s, n + 17, &radii(), seed).unwrap();
            prop_assert!(b.beta_hat >= a.beta_hat);
            prop_assert!(a.beta_hat >= 1.0);
        }

        #[test]
        fn euclidean_lower_bound_holds(seed in 0u64..1000) {
            let s = SpaceInstance::euclidean(Window::unit(2)).unwrap();
            prop_assert!(check_volume_lower(&s, 4.0, 200, seed).unwrap().pass);
        }
    }
}
