use super::*;
use crate::space::Weight;

fn unit_square() -> SpaceInstance {
    SpaceInstance::euclidean(Window::unit(2)).unwrap()
}

fn heis() -> SpaceInstance {
    SpaceInstance::heisenberg(Window::centered(&[1.0, 1.0, 1.0])).unwrap()
}

fn inner_box(n: usize) -> Window {
    Window::new(vec![0.2; n], vec![0.8; n]).unwrap()
}

fn heis_coord() -> TestFunction {
    TestFunction::new(FormulaId::HeisCoord, Window::centered(&[0.7, 0.7, 0.7]))
}

/// Every smooth catalogue entry paired with a space it lives on.
fn smooth_catalogue() -> Vec<(SpaceInstance, TestFunction)> {
    let mut out = Vec::new();
    let spaces = [
        unit_square(),
        SpaceInstance::banach(Window::unit(2), 1.0).unwrap(),
        SpaceInstance::banach(Window::unit(2), f64::INFINITY).unwrap(),
        SpaceInstance::weighted(Window::unit(2), Weight::DEFAULT).unwrap(),
        SpaceInstance::euclidean(Window::unit(3)).unwrap(),
    ];
    for s in spaces {
        let n = s.topo_dim();
        for f in [
            FormulaId::Linear,
            FormulaId::SmoothBump,
            FormulaId::ProductSine,
        ] {
            out.push((s.clone(), TestFunction::new(f, inner_box(n))));
        }
    }
    out.push((heis(), heis_coord()));
    out.push((
        heis(),
        TestFunction::new(FormulaId::SmoothBump, Window::centered(&[0.7, 0.7, 0.7])),
    ));
    out
}

#[test]
fn eval_examples() {
    let s = unit_square();
    let lin = TestFunction::new(FormulaId::Linear, Window::unit(2));
    assert_eq!(eval(&s, &lin, &s.point(&[0.3, 0.7]).unwrap()).unwrap(), 0.3);

    let bump = TestFunction::new(FormulaId::SmoothBump, inner_box(2));
    assert_eq!(
        eval(&s, &bump, &s.point(&[0.1, 0.5]).unwrap()).unwrap(),
        0.0
    );

    let cone = TestFunction::new(FormulaId::Cone, inner_box(2));
    let c = s.point(&[0.5, 0.5]).unwrap();
    assert!((eval(&s, &cone, &c).unwrap() - 0.2).abs() < 1e-15);
}

#[test]
fn incompatible_pairs_are_rejected() {
    assert!(matches!(
        heis_coord().bind(&unit_square()),
        Err(Error::Unsupported { .. })
    ));
    let lin = TestFunction::new(FormulaId::Linear, inner_box(2)).with_params(FunctionParams {
        taper: Some(0.0),
        ..Default::default()
    });
    assert!(lin.bind(&unit_square()).is_err());
    let wide = TestFunction::new(FormulaId::SmoothBump, inner_box(2)).with_params(FunctionParams {
        radius: Some(0.5),
        ..Default::default()
    });
    assert!(wide.bind(&unit_square()).is_err());
}

#[test]
fn catalogue_respects_lipschitz_bound() {
    for (space, f) in smooth_catalogue() {
        let b = f.bind(&space).unwrap();
        let l = b.lip_bound().unwrap();
        let mut rng = stream(1, Domain::GlobalLip, 0);
        let region = space.neighbourhood(b.support(), 0.05);
        for i in 0..10_000 {
            let x = space.draw_in_region(&region, &mut rng);
            let y = if i % 2 == 0 {
                space.draw_in_region(&region, &mut rng)
            } else {
                match space.draw_local(&x, 0.02, &mut rng) {
                    Some(y) => y,
                    None => continue,
                }
            };
            let d = space.metric(&x, &y);
            let du = (b.eval_raw(&x) - b.eval_raw(&y)).abs();
            assert!(
                du <= l * d * (1.0 + 1e-12) + 1e-15,
                "{f:?} on {:?}: {du} > {l} * {d}",
                space.kind()
            );
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    for (space, f) in smooth_catalogue() {
        let b = f.bind(&space).unwrap();
        let mut rng = stream(2, Domain::Window, 0);
        for _ in 0..200 {
            let x = space.draw_in_region(b.support(), &mut rng);
            let g = b.gradient(&x).unwrap();
            let h = 1e-6;
            if space.kind() == SpaceKind::Heisenberg1 {
                // horizontal derivative along X_i is d/ds u(x * (s e_i))
                for i in 0..2 {
                    let mut e = [0.0; 3];
                    e[i] = h;
                    let p = heisenberg::mul(&[x[0], x[1], x[2]], &e);
                    e[i] = -h;
                    let m = heisenberg::mul(&[x[0], x[1], x[2]], &e);
                    let fd = (b.eval_raw(&[p[0], p[1], p[2], 0.0])
                        - b.eval_raw(&[m[0], m[1], m[2], 0.0]))
                        / (2.0 * h);
                    assert!((fd - g[i]).abs() < 1e-5, "{fd} vs {}", g[i]);
                }
            } else {
                for i in 0..space.topo_dim() {
                    let (mut p, mut m) = (x, x);
                    p[i] += h;
                    m[i] -= h;
                    let fd = (b.eval_raw(&p) - b.eval_raw(&m)) / (2.0 * h);
                    assert!(
                        (fd - g[i]).abs() < 1e-5,
                        "{:?}: {fd} vs {}",
                        f.formula_id,
                        g[i]
                    );
                }
            }
        }
    }
}

#[test]
fn ladder_converges_to_gradient_norm() {
    let s = unit_square();
    let f = TestFunction::new(FormulaId::ProductSine, Window::unit(2));
    let x = s.point(&[0.3, 0.6]).unwrap();
    let g = f.bind(&s).unwrap().analytic_lip(x.raw()).unwrap();
    let cfg = LipConfig {
        radii: vec![1e-1, 1e-2, 1e-3],
        seed: 3,
        ..Default::default()
    };
    let lad = lip_ladder(&s, &f, &x, &cfg).unwrap();
    let last = lad.radii.len() - 1;
    assert!((lad.l_vals[last] / g - 1.0).abs() < 0.02);
    assert!((lad.big_l_vals[last] / g - 1.0).abs() < 0.02);
}

#[test]
fn cone_apex_in_one_dimension() {
    let s = SpaceInstance::euclidean(Window::unit(1)).unwrap();
    let f = TestFunction::new(FormulaId::Cone, Window::new(vec![0.2], vec![0.8]).unwrap());
    let x = s.point(&[0.5]).unwrap();
    let lad = lip_ladder(&s, &f, &x, &LipConfig::default()).unwrap();
    for (l, big) in lad.l_vals.iter().zip(&lad.big_l_vals) {
        assert!(*l >= 0.95 && *big <= 1.0 + 1e-12);
    }
}

#[test]
fn zero_function_has_flat_ladder() {
    let s = unit_square();
    let f = TestFunction::new(FormulaId::SmoothBump, inner_box(2)).scaled(0.0);
    let lad = lip_ladder(
        &s,
        &f,
        &s.point(&[0.5, 0.5]).unwrap(),
        &LipConfig::default(),
    )
    .unwrap();
    assert!(lad.l_vals.iter().chain(&lad.big_l_vals).all(|v| *v == 0.0));
    assert_eq!(global_lip(&s, &f, 0).unwrap(), 0.0);
}

#[test]
fn pointwise_constants_of_coordinate_functions() {
    let s = unit_square();
    let lin = TestFunction::new(FormulaId::Linear, Window::unit(2));
    assert_eq!(
        pointwise_lipschitz(
            &s,
            &lin,
            &s.point(&[0.4, 0.4]).unwrap(),
            &LipConfig::default()
        )
        .unwrap(),
        (1.0, 1.0)
    );

    let h = heis();
    let f = heis_coord();
    let x = h.point(&[0.05, -0.05, 0.01]).unwrap();
    assert_eq!(
        pointwise_lipschitz(&h, &f, &x, &LipConfig::default()).unwrap(),
        (1.0, 1.0)
    );
    // the estimator at depth agrees with the Pansu differential
    let lad = lip_ladder(&h, &f, &x, &LipConfig::default()).unwrap();
    let last = lad.radii.len() - 1;
    assert!((lad.l_vals[last] - 1.0).abs() < 0.03);
    assert!((lad.big_l_vals[last] - 1.0).abs() < 0.03);
}

#[test]
fn global_lip_values() {
    let s = unit_square();
    let lin = TestFunction::new(FormulaId::Linear, Window::unit(2));
    assert_eq!(global_lip(&s, &lin, 0).unwrap(), 1.0);
    let cone = TestFunction::new(FormulaId::Cone, inner_box(2));
    let est = global_lip(&s, &cone, 0).unwrap();
    assert!((0.95..=1.10).contains(&est), "{est}");

    // independent check of the true constant on a grid of pairs
    let b = cone.bind(&s).unwrap();
    let grid: Vec<Coords> = (0..60)
        .flat_map(|i| {
            (0..60).map(move |j| [0.2 + 0.01 * i as f64, 0.2 + 0.01 * j as f64, 0.0, 0.0])
        })
        .collect();
    let mut best: f64 = 0.0;
    for (k, x) in grid.iter().enumerate() {
        for y in grid.iter().skip(k + 1).step_by(7) {
            best = best.max((b.core(x) - b.core(y)).abs() / s.metric(x, y));
        }
    }
    assert!(best <= 1.0 + 1e-12 && best > 0.99);
}

#[test]
fn blowups() {
    let s = unit_square();
    let lin = TestFunction::new(FormulaId::Linear, Window::unit(2));
    let bl = blowup(&s, &lin, &s.point(&[0.5, 0.5]).unwrap()).unwrap();
    assert_eq!(bl.eval(&[0.3, -2.0, 0.0, 0.0]), 0.3);

    let h = heis();
    let bl = blowup(&h, &heis_coord(), &h.point(&[0.0, 0.1, 0.0]).unwrap()).unwrap();
    assert_eq!(bl.eval(&[0.25, 0.5, 0.75, 0.0]), 0.25);

    let cone = TestFunction::new(FormulaId::Cone, inner_box(2));
    assert!(blowup(&s, &cone, &s.point(&[0.4, 0.4]).unwrap()).is_err());
    let w = SpaceInstance::weighted(Window::unit(2), Weight::DEFAULT).unwrap();
    assert!(blowup(&w, &lin, &w.point(&[0.4, 0.4]).unwrap()).is_err());
}

#[test]
fn blowup_defect_shrinks() {
    let cases = [
        (
            unit_square(),
            TestFunction::new(FormulaId::SmoothBump, inner_box(2)),
            vec![0.45, 0.55],
        ),
        (heis(), heis_coord(), vec![0.2, 0.15, 0.05]),
        (
            SpaceInstance::banach(Window::unit(2), f64::INFINITY).unwrap(),
            TestFunction::new(FormulaId::ProductSine, inner_box(2)),
            vec![0.4, 0.35],
        ),
    ];
    for (space, f, x) in cases {
        let x = space.point(&x).unwrap();
        let d: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|delta| blowup_defect(&space, &f, &x, *delta, 512, 5).unwrap())
            .collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0] * 1.05 + 1e-9), "{d:?}");
        assert!(d[3] < 1e-2 * d[0].max(1e-6) + 1e-6, "{d:?}");
    }
}

#[test]
fn descriptor_json() {
    let text = r#"{"formula_id":"heis_coord","params":{"rho0":0.2,"rho1":0.5},"support_box":{"min":[-1,-1,-1],"max":[1,1,1]}}"#;
    let f: TestFunction = serde_json::from_str(text).unwrap();
    assert_eq!(f.scale, 1.0);
    assert_eq!(f.params.rho1, Some(0.5));
    let back: TestFunction = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
    assert_eq!(back, f);
    assert!(serde_json::from_str::<TestFunction>(
        r#"{"formula_id":"wave","support_box":{"min":[0],"max":[1]}}"#
    )
    .is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ladder_invariants(idx in 0usize..17, ux in 0.0f64..1.0, uy in 0.0f64..1.0, uz in 0.0f64..1.0, seed in 0u64..1000) {
            let cat = smooth_catalogue();
            let (space, f) = &cat[idx % cat.len()];
            let b = f.bind(space).unwrap();
            let mut x = [0.0; MAX_DIM];
            space.window().lerp(&[ux, uy, uz][..space.topo_dim()], &mut x);
            let cfg = LipConfig { radii: vec![0.05, 0.01, 0.002], n_per_radius: 64, seed, ..Default::default() };
            let lad = lip_ladder_bound(&b, &x, &cfg).unwrap();
            let l = b.lip_bound().unwrap();
            for i in 0..lad.radii.len() {
                prop_assert!(lad.l_vals[i] <= lad.big_l_vals[i]);
                prop_assert!(lad.big_l_vals[i] <= l * (1.0 + 1e-12));
                if i > 0 {
                    prop_assert!(lad.big_l_vals[i] <= lad.big_l_vals[i - 1]);
                    prop_assert!(lad.l_vals[i] >= lad.l_vals[i - 1]);
                }
            }
            let (lip, big) = pointwise_bound(&b, &x, &cfg).unwrap();
            prop_assert!(lip <= big && big <= l * (1.0 + 1e-12));
        }

        #[test]
        fn scaling_of_pointwise_constants(idx in 0usize..17, ux in 0.0f64..1.0, uy in 0.0f64..1.0, c in -10.0f64..10.0) {
            let cat = smooth_catalogue();
            let (space, f) = &cat[idx % cat.len()];
            let mut x = [0.0; MAX_DIM];
            space.window().lerp(&[ux, uy, 0.5][..space.topo_dim()], &mut x);
            let cfg = LipConfig::default();
            let (a, b) = pointwise_bound(&f.bind(space).unwrap(), &x, &cfg).unwrap();
            let (ca, cb) = pointwise_bound(&f.scaled(c).bind(space).unwrap(), &x, &cfg).unwrap();
            prop_assert!((ca - c.abs() * a).abs() <= 1e-12 * (1.0 + ca));
            prop_assert!((cb - c.abs() * b).abs() <= 1e-12 * (1.0 + cb));
        }
    }
}

#[test]
fn smooth_functions_have_equal_lip_and_lip_estimates() {
    for (space, f) in smooth_catalogue() {
        let b = f.bind(&space).unwrap();
        let mut rng = stream(9, Domain::Window, 0);
        let mut tested = 0;
        while tested < 5 {
            let x = space.draw_in_region(b.support(), &mut rng);
            let g = b.analytic_lip(&x).unwrap();
            if g < 0.2 * b.lip_bound().unwrap() {
                continue;
            }
            tested += 1;
            let cfg = LipConfig {
                radii: vec![1e-2, 1e-3],
                seed: tested,
                ..Default::default()
            };
            let lad = lip_ladder_bound(&b, &x, &cfg).unwrap();
            let (l, big) = (lad.l_vals[1], lad.big_l_vals[1]);
            assert!(
                big / l - 1.0 < 0.03,
                "{:?} on {:?}: {l} vs {big}",
                f.formula_id,
                space.kind()
            );
            assert!(
                (big / g - 1.0).abs() < 0.03,
                "{:?} on {:?}: {big} vs {g}",
                f.formula_id,
                space.kind()
            );
        }
    }
}
