//! Cross-module checks through the public API only.

use bvylab::diagnostics::{
    check_volume_lower, default_radii, estimate_beta, estimate_density_bounds,
};
use bvylab::estimator::{bound_check, limit_fit, rescaled_curve, BVYConfig, EstimatorChoice};
use bvylab::lipcalc::{FormulaId, TestFunction};
use bvylab::par::{map_indexed, map_indexed_seq};
use bvylab::rng::{derive_seed, stream, Domain};
use bvylab::space::{SpaceInstance, Window};
use rand::Rng;

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .unwrap()
}

fn bump_on_square() -> (SpaceInstance, TestFunction) {
    let s = SpaceInstance::euclidean(Window::unit(2)).unwrap();
    let u = TestFunction::new(
        FormulaId::SmoothBump,
        Window::new(vec![0.2, 0.2], vec![0.8, 0.8]).unwrap(),
    );
    (s, u)
}

#[test]
fn parallel_and_sequential_maps_agree() {
    let f = |i: usize| stream(11, Domain::Window, i as u64).random::<f64>();
    let n = 3 * bvylab::par::CHUNK + 17;
    let seq = map_indexed_seq(n, f);
    for threads in [1, 3, 8] {
        assert_eq!(pool(threads).install(|| map_indexed(n, f)), seq);
    }
}

#[test]
fn curves_do_not_depend_on_the_pool() {
    let (s, u) = bump_on_square();
    for estimator in [EstimatorChoice::Direct, EstimatorChoice::Localized] {
        let cfg = BVYConfig {
            seed: 9,
            estimator,
            n_outer: 3000,
            n_pairs: 60_000,
            ..Default::default()
        };
        let one = pool(1).install(|| rescaled_curve(&s, &u, &cfg).unwrap());
        let many = pool(5).install(|| rescaled_curve(&s, &u, &cfg).unwrap());
        assert_eq!(one, many);
    }
}

#[test]
fn descriptor_round_trip_reproduces_estimates() {
    let (s, u) = bump_on_square();
    let text = serde_json::to_string(&s.descriptor()).unwrap();
    let back = SpaceInstance::from_descriptor(&serde_json::from_str(&text).unwrap()).unwrap();
    let cfg = BVYConfig {
        seed: 1,
        n_outer: 2000,
        ..Default::default()
    };
    assert_eq!(
        rescaled_curve(&s, &u, &cfg).unwrap(),
        rescaled_curve(&back, &u, &cfg).unwrap()
    );
}

#[test]
fn seeds_change_the_draws() {
    let (s, u) = bump_on_square();
    let cfg = |seed| BVYConfig {
        seed,
        n_outer: 2000,
        ..Default::default()
    };
    let a = rescaled_curve(&s, &u, &cfg(1)).unwrap();
    let b = rescaled_curve(&s, &u, &cfg(2)).unwrap();
    assert_ne!(a, b);
    assert_ne!(derive_seed(1, 2), derive_seed(2, 1));
}

/// Diagnostics feed the bound check, and the fitted limit sits inside it.
#[test]
fn diagnostics_feed_the_bound_sandwich() {
    let (s, u) = bump_on_square();
    let radii = default_radii(&s).unwrap();
    let dens = estimate_density_bounds(&s, 2.0, 300, &radii, 21).unwrap();
    assert!(dens.a_hat > 0.0 && dens.b_hat >= dens.a_hat);
    let cfg = BVYConfig {
        seed: 4,
        n_outer: 20_000,
        ..Default::default()
    };
    let rep = bound_check(&s, &u, &cfg, dens.a_hat, dens.b_hat, 20_000).unwrap();
    let fit = limit_fit(&rescaled_curve(&s, &u, &cfg).unwrap()).unwrap();
    assert!(
        rep.lower_bound <= fit.limit && fit.limit <= rep.upper_bound,
        "{rep:?} {fit:?}"
    );

    let beta = estimate_beta(&s, 1000, &radii, 22).unwrap();
    let vol = check_volume_lower(&s, beta.beta_hat, 2000, 23).unwrap();
    assert_eq!(vol.violations, 0);
}
