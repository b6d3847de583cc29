use std::f64::consts::PI;

use curveflow::spectral::{
    analyze, arc_derivative, frac_inner, sobolev_transfer, synthesize, SpectralField,
    TransferVariant,
};
use curveflow::{random, shapes, DeformationField, Error};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

fn zero_spectrum(n: usize, dim: usize, length: f64) -> SpectralField {
    SpectralField::from_coeffs(Array2::zeros((n, dim)), length).unwrap()
}

/// Direct O(N²) DFT used as oracle.
fn dft(h: &DeformationField, l: i64) -> Vec<Complex64> {
    let n = h.samples();
    (0..h.dim())
        .map(|d| {
            (0..n)
                .map(|i| {
                    Complex64::from_polar(1.0, -2.0 * PI * (l * i as i64) as f64 / n as f64)
                        * h.vector(i)[d]
                })
                .sum::<Complex64>()
                / n as f64
        })
        .collect()
}

#[test]
fn constant_field_spectrum() {
    let c = shapes::circle(32, 1.0).unwrap();
    let s = analyze(&DeformationField::constant(32, &[2.0, -1.0]), &c).unwrap();
    assert!((s.coeff(0)[0] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
    assert!((s.coeff(0)[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
    for (l, row) in s.modes() {
        if l != 0 {
            assert!(row.iter().all(|z| z.norm() < 1e-12));
        }
    }
}

#[test]
fn single_cosine_spectrum() {
    let n = 64;
    let c = shapes::circle(n, 1.0).unwrap();
    let a = [0.7, -0.2];
    let h = DeformationField::from_fn(&c, |i, _| {
        let x = (2.0 * PI * i as f64 / n as f64).cos();
        vec![a[0] * x, a[1] * x]
    })
    .unwrap();
    let s = analyze(&h, &c).unwrap();
    for (l, row) in s.modes() {
        for (d, z) in row.iter().enumerate() {
            let expected = if l.abs() == 1 { a[d] / 2.0 } else { 0.0 };
            assert!((z - Complex64::new(expected, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn analyze_requires_arc_uniform() {
    let c = shapes::ellipse(32, 2.0, 1.0).unwrap();
    let h = DeformationField::constant(32, &[1.0, 0.0]);
    assert!(matches!(analyze(&h, &c), Err(Error::NotArcUniform(_))));
}

#[test]
fn odd_sample_count_rejected() {
    let c = shapes::circle(33, 1.0).unwrap();
    let h = DeformationField::constant(33, &[1.0, 0.0]);
    assert!(matches!(analyze(&h, &c), Err(Error::OddSampleCount(33))));
}

#[test]
fn matches_direct_dft() {
    let mut rng = random::seeded(1);
    let c = shapes::circle(48, 1.0).unwrap();
    let h = random::field(&mut rng, &c);
    let s = analyze(&h, &c).unwrap();
    for l in -24..24 {
        let d = dft(&h, l);
        for (a, b) in s.coeff(l).iter().zip(&d) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn synthesize_constant_and_cosine() {
    let mut s = zero_spectrum(16, 2, 1.0);
    s.set_coeff(0, &[Complex64::new(3.0, 0.0), Complex64::new(-1.0, 0.0)]);
    let h = synthesize(&s).unwrap();
    for v in h.vectors().outer_iter() {
        assert!((v[0] - 3.0).abs() < 1e-14 && (v[1] + 1.0).abs() < 1e-14);
    }
    let mut s = zero_spectrum(16, 2, 1.0);
    let half = Complex64::new(0.25, 0.0);
    s.set_coeff(1, &[half, Complex64::new(0.0, 0.0)]);
    s.set_coeff(-1, &[half, Complex64::new(0.0, 0.0)]);
    let h = synthesize(&s).unwrap();
    for i in 0..16 {
        let expected = 0.5 * (2.0 * PI * i as f64 / 16.0).cos();
        assert!((h.vector(i)[0] - expected).abs() < 1e-14);
    }
}

#[test]
fn synthesize_flags_asymmetric() {
    let mut s = zero_spectrum(16, 2, 1.0);
    s.set_coeff(2, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    assert!(matches!(synthesize(&s), Err(Error::NotHermitian(_))));
}

#[test]
fn frac_inner_examples() {
    let c = shapes::circle(32, 1.0).unwrap();
    let s = analyze(&DeformationField::constant(32, &[1.0, 1.0]), &c).unwrap();
    assert_eq!(frac_inner(&s, &s, 1.0).unwrap(), 0.0);
    let mut s = zero_spectrum(32, 1, 2.0);
    s.set_coeff(1, &[Complex64::new(1.0, 0.0)]);
    s.set_coeff(-1, &[Complex64::new(1.0, 0.0)]);
    // Both l = ±1 terms carry unit amplitude.
    let v = frac_inner(&s, &s, 1.0).unwrap();
    assert!((v - 2.0 * (2.0 * PI).powi(2)).abs() < 1e-10);
    let mut one = zero_spectrum(32, 1, 2.0);
    one.set_coeff(1, &[Complex64::new(1.0, 0.0)]);
    assert!((frac_inner(&one, &one, 1.0).unwrap() - (2.0 * PI).powi(2)).abs() < 1e-10);
    assert!(frac_inner(&one, &one, 0.0).is_err());
    let other = zero_spectrum(32, 1, 3.0);
    assert!(frac_inner(&one, &other, 1.0).is_err());
}

#[test]
fn frac_inner_integer_order_matches_quadrature() {
    // Smooth field on a circle of radius 1.5: L^{2j-1}∫|h^(j)|² by the
    // trapezoid rule of analytic derivatives.
    let n = 128;
    let r = 1.5;
    let c = shapes::circle(n, r).unwrap();
    let l = c.length();
    let field = |s: f64, j: u32| -> [f64; 2] {
        // h(s) = (cos(2πs/L) + 0.3 sin(6πs/L), 0.5 cos(4πs/L))
        let w = 2.0 * PI / l;
        let d = |k: f64, phase: f64| (k * w).powi(j as i32) * (k * w * s + phase + j as f64 * PI / 2.0).cos();
        [d(1.0, 0.0) + 0.3 * d(3.0, -PI / 2.0), 0.5 * d(2.0, 0.0)]
    };
    let h = DeformationField::from_fn(&c, |i, _| field(l * i as f64 / n as f64, 0).to_vec()).unwrap();
    let s = analyze(&h, &c).unwrap();
    for j in 1..=2u32 {
        let quad: f64 = (0..n)
            .map(|i| {
                let v = field(l * i as f64 / n as f64, j);
                v[0] * v[0] + v[1] * v[1]
            })
            .sum::<f64>()
            * l
            / n as f64;
        let expected = l.powi(2 * j as i32 - 1) * quad;
        let got = frac_inner(&s, &s, j as f64).unwrap();
        assert!((got - expected).abs() / expected < 1e-6, "j={j}: {got} vs {expected}");
    }
}

#[test]
fn frac_inner_scale_invariant_bitwise() {
    let mut rng = random::seeded(4);
    let c = random::smooth_curve(&mut rng, 64, 4).unwrap();
    let h = random::field(&mut rng, &c);
    let k = random::field(&mut rng, &c);
    let a = frac_inner(&analyze(&h, &c).unwrap(), &analyze(&k, &c).unwrap(), 1.5).unwrap();
    let c2 = c.scaled(3.0).unwrap();
    let b = frac_inner(&analyze(&h, &c2).unwrap(), &analyze(&k, &c2).unwrap(), 1.5).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn transfer_examples() {
    let mut g = zero_spectrum(32, 2, 1.0);
    g.set_coeff(0, &[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]);
    for v in [TransferVariant::H, TransferVariant::HTilde] {
        assert_eq!(sobolev_transfer(&g, 0.3, 1.0, v).unwrap(), g);
    }
    let mut g = zero_spectrum(32, 1, 1.0);
    g.set_coeff(1, &[Complex64::new(1.0, 0.0)]);
    let out = sobolev_transfer(&g, 1.0, 1.0, TransferVariant::H).unwrap();
    let ratio = 1.0 / out.coeff(1)[0].re;
    assert!((ratio - (1.0 + 4.0 * PI * PI)).abs() < 1e-10);
    assert!((ratio - 40.478).abs() < 1e-3);
    assert!(sobolev_transfer(&g, 0.0, 1.0, TransferVariant::H).is_err());
    assert!(sobolev_transfer(&g, -1.0, 1.0, TransferVariant::HTilde).is_err());
}

#[test]
fn arc_derivative_of_cosine() {
    let n = 64;
    let r = 2.0;
    let c = shapes::circle(n, r).unwrap();
    let s = analyze(&DeformationField::position(&c), &c).unwrap();
    let d = synthesize(&arc_derivative(&s, 1)).unwrap();
    // Arc derivative of the exact trigonometric interpolant of the polygon
    // vertices is scaled by the chord/arc ratio.
    let scale = (c.length() / (2.0 * PI * r)).recip();
    for i in 0..n {
        let t = 2.0 * PI * i as f64 / n as f64;
        assert!((d.vector(i)[0] + scale * t.sin()).abs() < 1e-12);
        assert!((d.vector(i)[1] - scale * t.cos()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hermitian_parseval_roundtrip(seed in 0u64..10_000, half in 4usize..40) {
        let n = 2 * half;
        let mut rng = random::seeded(seed);
        let c = shapes::circle(n, 1.0 + seed as f64 * 1e-4).unwrap();
        let h = random::band_limited_field(&mut rng, n, 2, half);
        let s = analyze(&h, &c).unwrap();
        prop_assert!(s.hermitian_defect() < 1e-12);
        let direct: f64 = h.vectors().iter().map(|x| x * x).sum::<f64>() / n as f64;
        prop_assert!((s.power() - direct).abs() <= 1e-10 * direct.max(1.0));
        let back = synthesize(&s).unwrap();
        let err = (back.vectors() - h.vectors()).mapv(f64::abs).fold(0.0f64, |a, b| a.max(*b));
        prop_assert!(err < 1e-10);
    }

    #[test]
    fn transfer_duality_and_decay(seed in 0u64..10_000, lambda in 0.01..10.0f64, alpha in 0.5..3.0f64) {
        let n = 64;
        let mut rng = random::seeded(seed);
        let c = shapes::circle(n, 1.0).unwrap();
        let g = analyze(&random::band_limited_field(&mut rng, n, 2, 31), &c).unwrap();
        let h = analyze(&random::band_limited_field(&mut rng, n, 2, 31), &c).unwrap();
        let t = sobolev_transfer(&g, lambda, alpha, TransferVariant::H).unwrap();
        let lhs = t.weighted_pairing(&h, |l| 1.0 + lambda * curveflow::spectral::frac_weight(l, alpha)).unwrap();
        let rhs = g.weighted_pairing(&h, |_| 1.0).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        let tt = sobolev_transfer(&g, lambda, alpha, TransferVariant::HTilde).unwrap();
        let lhs = tt.weighted_pairing(&h, |l| curveflow::spectral::transfer_multiplier(l, lambda, alpha, TransferVariant::HTilde)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        // Damping factor strictly decreasing in |l|.
        let mut prev = f64::INFINITY;
        for l in 1..32i64 {
            let r = t.coeff(l)[0].norm() / g.coeff(l)[0].norm();
            prop_assert!(r < prev);
            prev = r;
        }
        prop_assert!(synthesize(&t).is_ok());
    }
}

#[test]
fn smooth_resample_stays_on_the_curve() {
    let (a, b) = (1.5, 0.6);
    let c = shapes::ellipse(256, a, b).unwrap();
    let r = curveflow::spectral::resample_smooth(&c, 256).unwrap();
    assert!(r.arc_uniformity() < 1e-12);
    for p in r.points().outer_iter() {
        assert!(((p[0] / a).powi(2) + (p[1] / b).powi(2) - 1.0).abs() < 1e-12);
    }
    let again = curveflow::spectral::resample_smooth(&r, 256).unwrap();
    assert_eq!(again, r);
}
