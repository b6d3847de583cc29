use std::f64::consts::PI;

use curveflow::energies::{
    evaluate, finite_difference, formula_gradient, grad_h0, grad_sobolev, gradient_mean, AvgFunction,
    EnergyConfig, EnergyKind, GFunction,
};
use curveflow::metrics::{inner, MetricSpec};
use curveflow::spectral::analyze;
use curveflow::{random, shapes, Curve, DeformationField, Error};
use proptest::prelude::*;

fn all_energies() -> Vec<EnergyKind> {
    vec![
        EnergyKind::Length,
        EnergyKind::Elastic,
        EnergyKind::CenterOfMass { target: vec![0.3, -0.2] },
        EnergyKind::StdDev,
        EnergyKind::AvgG(
            GFunction::Gaussian {
                center: vec![0.2, 0.1],
                width: 0.8,
            }
            .build(),
        ),
    ]
}

fn max_diff(a: &DeformationField, b: &DeformationField) -> f64 {
    (a.vectors() - b.vectors()).iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..3 {
        let mut rng = random::seeded(100 + seed);
        let c = random::smooth_curve(&mut rng, 128, 4).unwrap();
        for kind in all_energies() {
            let g = grad_h0(&kind, &c).unwrap();
            for _ in 0..20 {
                let h = random::smooth_field(&mut rng, &c, 8, 1.0);
                let fd = finite_difference(&kind, &c, &h, 1e-5).unwrap();
                let an = inner(&MetricSpec::H0, &c, &g, &h).unwrap();
                let scale = fd.abs().max(1e-3);
                assert!((fd - an).abs() < 1e-4 * scale, "{}: fd {fd} analytic {an}", kind.name());
            }
        }
    }
}

#[test]
fn sobolev_gradient_duality() {
    let specs = [
        MetricSpec::hj(1, 1.0),
        MetricSpec::hj(1, 0.1),
        MetricSpec::hj_tilde(1, 1.0),
        MetricSpec::HAlpha { alpha: 0.75, lambda: 1.0 },
        MetricSpec::HAlphaTilde { alpha: 0.5, lambda: 2.0 },
    ];
    let mut rng = random::seeded(7);
    let c = random::smooth_curve(&mut rng, 128, 5).unwrap();
    for kind in all_energies() {
        let g0 = grad_h0(&kind, &c).unwrap();
        for spec in &specs {
            let gs = grad_sobolev(&kind, &c, spec).unwrap();
            for _ in 0..5 {
                let h = random::field(&mut rng, &c);
                let lhs = inner(spec, &c, &gs, &h).unwrap();
                let rhs = inner(&MetricSpec::H0, &c, &g0, &h).unwrap();
                assert!((lhs - rhs).abs() < 1e-8 * rhs.abs().max(1.0), "{spec:?} {lhs} {rhs}");
            }
        }
    }
}

#[test]
fn sobolev_gradient_duality_higher_order() {
    // Rounding in the synthesized gradient is amplified by the metric
    // multiplier, roughly eps * max_l m(l) at the field band.
    let specs = [
        MetricSpec::hj(2, 0.5),
        MetricSpec::hj_tilde(2, 0.1),
        MetricSpec::HAlpha { alpha: 1.5, lambda: 1.0 },
    ];
    let mut rng = random::seeded(8);
    let c = random::smooth_curve(&mut rng, 128, 5).unwrap();
    for kind in all_energies() {
        let g0 = grad_h0(&kind, &c).unwrap();
        for spec in &specs {
            let gs = grad_sobolev(&kind, &c, spec).unwrap();
            for _ in 0..5 {
                let h = random::smooth_field(&mut rng, &c, 16, 1.0);
                let lhs = inner(spec, &c, &gs, &h).unwrap();
                let rhs = inner(&MetricSpec::H0, &c, &g0, &h).unwrap();
                assert!((lhs - rhs).abs() < 1e-8 * rhs.abs().max(1.0), "{spec:?} {lhs} {rhs}");
            }
        }
    }
}

#[test]
fn sobolev_duality_on_non_uniform_curve() {
    // The ellipse is sampled uniformly in angle, not in arc length.
    let c = shapes::ellipse(256, 2.0, 1.0).unwrap();
    let spec = MetricSpec::hj(1, 0.5);
    let mut rng = random::seeded(3);
    for kind in [EnergyKind::Length, EnergyKind::StdDev] {
        let g0 = grad_h0(&kind, &c).unwrap();
        let gs = grad_sobolev(&kind, &c, &spec).unwrap();
        for _ in 0..5 {
            let h = random::smooth_field(&mut rng, &c, 6, 1.0);
            let lhs = inner(&spec, &c, &gs, &h).unwrap();
            let rhs = inner(&MetricSpec::H0, &c, &g0, &h).unwrap();
            assert!((lhs - rhs).abs() < 1e-3 * rhs.abs().max(1.0), "{lhs} {rhs}");
        }
    }
}

#[test]
fn length_gradient_on_unit_circle() {
    let n = 256;
    let c = shapes::circle(n, 1.0).unwrap();
    let g = grad_h0(&EnergyKind::Length, &c).unwrap();
    let expect = DeformationField::position(&c).scaled(2.0 * PI);
    assert!(max_diff(&g, &expect) < 1e-3);

    let lambda = 1.0;
    let gs = grad_sobolev(&EnergyKind::Length, &c, &MetricSpec::hj(1, lambda)).unwrap();
    let expect = DeformationField::position(&c).scaled(2.0 * PI / (1.0 + lambda * 4.0 * PI * PI));
    assert!(max_diff(&gs, &expect) < 1e-4);
}

#[test]
fn circle_energy_values() {
    for r in [0.5, 1.0, 3.0] {
        let c = shapes::circle_at(128, r, [1.0, 2.0]).unwrap();
        let e = evaluate(&EnergyKind::Elastic, &c).unwrap();
        assert!((e - 2.0 * PI / r).abs() < 1e-10 * e);
        let s = evaluate(&EnergyKind::StdDev, &c).unwrap();
        assert!((s - r * r).abs() < 1e-12 * r * r);
        let m = evaluate(&EnergyKind::CenterOfMass { target: vec![0.0, 0.0] }, &c).unwrap();
        assert!((m - 2.5).abs() < 1e-12);
    }
}

#[test]
fn formula_gradients_agree_with_discrete() {
    let mut rng = random::seeded(11);
    let c = random::smooth_curve(&mut rng, 512, 3).unwrap();
    for kind in all_energies() {
        let exact = grad_h0(&kind, &c).unwrap();
        let formula = formula_gradient(&kind, &c).unwrap();
        let scale = exact.max_norm();
        let err = max_diff(&exact, &formula);
        assert!(err < 2e-3 * scale, "{}: {err} vs {scale}", kind.name());
    }
}

#[test]
fn center_of_mass_gradient_is_normal() {
    let mut rng = random::seeded(5);
    let c = random::smooth_curve(&mut rng, 256, 3).unwrap();
    let kind = EnergyKind::CenterOfMass { target: vec![1.0, 0.5] };
    let g = grad_h0(&kind, &c).unwrap();
    let t = curveflow::curve::unit_tangent(&c);
    let tangential = (0..c.samples())
        .map(|i| g.vector(i).dot(&t.vector(i)).abs())
        .fold(0.0f64, f64::max);
    assert!(tangential < 1e-3 * g.max_norm(), "{tangential}");
}

#[test]
fn tilde_transfer_decays_per_mode() {
    let mut rng = random::seeded(9);
    let c = random::smooth_curve(&mut rng, 128, 4).unwrap();
    let lambda = 0.5;
    let g0 = grad_h0(&EnergyKind::Elastic, &c).unwrap();
    let gt = grad_sobolev(&EnergyKind::Elastic, &c, &MetricSpec::hj_tilde(1, lambda)).unwrap();
    let s0 = analyze(&g0, &c).unwrap();
    let st = analyze(&gt, &c).unwrap();
    for l in 1..64i64 {
        let bound = s0.mode_energy(l).sqrt() / (lambda * (2.0 * PI * l as f64).powi(2));
        assert!(st.mode_energy(l).sqrt() <= bound * (1.0 + 1e-9) + 1e-14);
    }
}

#[test]
fn translation_equivariance() {
    let mut rng = random::seeded(21);
    let c = random::smooth_curve(&mut rng, 128, 4).unwrap();
    let v = [0.7, -1.3];
    let moved = c.translated(&v).unwrap();
    for kind in [EnergyKind::Length, EnergyKind::Elastic, EnergyKind::StdDev] {
        let a = grad_h0(&kind, &c).unwrap();
        let b = grad_h0(&kind, &moved).unwrap();
        assert!(max_diff(&a, &b) < 1e-9 * a.max_norm().max(1.0), "{}", kind.name());
    }
    let a = grad_h0(&EnergyKind::CenterOfMass { target: vec![0.1, 0.2] }, &c).unwrap();
    let b = grad_h0(&EnergyKind::CenterOfMass { target: vec![0.8, -1.1] }, &moved).unwrap();
    assert!(max_diff(&a, &b) < 1e-12);
}

#[test]
fn length_gradient_has_zero_mean() {
    let c = shapes::ellipse(200, 1.5, 0.5).unwrap();
    let m = gradient_mean(&EnergyKind::Length, &c).unwrap();
    assert!(m.iter().all(|x| x.abs() < 1e-12), "{m:?}");
}

#[test]
fn errors() {
    let small = shapes::circle(16, 1.0).unwrap();
    assert!(matches!(
        grad_h0(&EnergyKind::Elastic, &small),
        Err(Error::TooFewSamples { min: 32, got: 16 })
    ));
    let c = shapes::circle(64, 1.0).unwrap();
    let bad = EnergyKind::CenterOfMass { target: vec![0.0; 3] };
    assert!(matches!(evaluate(&bad, &c), Err(Error::DimensionMismatch(_))));
    let space = Curve::from_parametric(64, |t| vec![t.cos(), t.sin(), 0.3 * (2.0 * t).sin()]).unwrap();
    assert!(matches!(formula_gradient(&EnergyKind::StdDev, &space), Err(Error::PlanarOnly(_))));
    assert!(grad_h0(&EnergyKind::StdDev, &space).is_ok());
    assert!(matches!(
        grad_sobolev(&EnergyKind::Length, &c, &MetricSpec::ConformalH0),
        Err(Error::UnsupportedTransfer(_))
    ));
}

#[test]
fn space_curve_gradients() {
    let c = Curve::from_parametric(128, |t| vec![t.cos(), t.sin(), 0.3 * (2.0 * t).sin()]).unwrap();
    let mut rng = random::seeded(4);
    for kind in [EnergyKind::Length, EnergyKind::Elastic, EnergyKind::StdDev] {
        let g = grad_h0(&kind, &c).unwrap();
        let h = random::smooth_field(&mut rng, &c, 6, 1.0);
        let fd = finite_difference(&kind, &c, &h, 1e-5).unwrap();
        let an = inner(&MetricSpec::H0, &c, &g, &h).unwrap();
        assert!((fd - an).abs() < 1e-4 * fd.abs().max(1e-3));
    }
}

#[test]
fn custom_average_function() {
    let g = AvgFunction::new("x2", |x| x[0] * x[0], |x| vec![2.0 * x[0], 0.0]);
    let c = shapes::circle(256, 2.0).unwrap();
    // mean of 4cos² over the circle
    let e = evaluate(&EnergyKind::AvgG(g), &c).unwrap();
    assert!((e - 2.0).abs() < 1e-12);
}

#[test]
fn energy_config_round_trip() {
    let cfgs = vec![
        EnergyConfig::Length,
        EnergyConfig::Elastic,
        EnergyConfig::CenterOfMass { target: vec![1.0, 2.0] },
        EnergyConfig::StdDev,
        EnergyConfig::AvgG {
            g: GFunction::Linear { a: vec![1.0, 0.0] },
        },
    ];
    for cfg in cfgs {
        let s = serde_json::to_string(&cfg).unwrap();
        let back: EnergyConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
    }
    let parsed: EnergyConfig = serde_json::from_str(r#"{"energy":"center_of_mass","target":[0,0]}"#).unwrap();
    assert!(matches!(parsed.build(), EnergyKind::CenterOfMass { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn duality_holds_for_random_curves(seed in 0u64..10_000) {
        let mut rng = random::seeded(seed);
        let c = random::smooth_curve(&mut rng, 64, 3).unwrap();
        for kind in [EnergyKind::Length, EnergyKind::StdDev, EnergyKind::CenterOfMass { target: vec![0.0, 0.0] }] {
            let g = grad_h0(&kind, &c).unwrap();
            let h = random::smooth_field(&mut rng, &c, 6, 1.0);
            let fd = finite_difference(&kind, &c, &h, 1e-5).unwrap();
            let an = inner(&MetricSpec::H0, &c, &g, &h).unwrap();
            prop_assert!((fd - an).abs() < 1e-4 * fd.abs().max(1e-3));
        }
    }
}
