use std::f64::consts::PI;

use bosegas::lattice::{
    born_nested_direct, born_series, bracket_sum, bracket_sum_brute_force, bracket_term, e_lambda, lhy_integral,
    BornSeriesSpec, BracketKind, Reduction,
};
use bosegas::scattering::{scattering_length, RadialPotential, ScaledRegime};
use proptest::prelude::*;

#[test]
fn e_lambda_small_truncation() {
    let r = e_lambda(2, false).unwrap();
    assert!((r.partials[0].1 + 1.749_33).abs() < 1e-5, "{:?}", r.partials[0]);
    assert!(!r.extrapolated);
    assert!(e_lambda(1, true).is_err());
    assert!(e_lambda(3, true).unwrap().extrapolated);
}

#[test]
fn e_lambda_extrapolants_are_stable() {
    let a = e_lambda(40, true).unwrap();
    let b = e_lambda(60, true).unwrap();
    println!("e_Λ(40) = {:.8}, e_Λ(60) = {:.8}, diag {:.2e} {:.2e}", a.value, b.value, a.diagnostic, b.diagnostic);
    assert!((a.value - b.value).abs() < 1e-4);
    assert!((b.value - 10.4136).abs() < 1e-3);
    let n = b.extrapolants.len();
    assert!((b.extrapolants[n - 1].1 - b.extrapolants[n - 2].1).abs() <= b.diagnostic);
}

#[test]
fn e_lambda_extrapolant_steps_shrink_blockwise() {
    let r = e_lambda(120, true).unwrap();
    let steps: Vec<f64> = r.extrapolants.windows(2).filter(|w| w[0].0 >= 20).map(|w| (w[1].1 - w[0].1).abs()).collect();
    let block_max: Vec<f64> = steps.chunks(25).map(|c| c.iter().cloned().fold(0.0, f64::max)).collect();
    for w in block_max.windows(2) {
        assert!(w[1] < w[0], "{block_max:?}");
    }
}

#[test]
fn gp_bracket_decays_as_inverse_fourth_power() {
    let kind = BracketKind::Gp { a: 1.0 };
    let ps: Vec<f64> = (0..20).map(|i| 20.0 * PI * (5f64).powf(i as f64 / 19.0)).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = ps
        .iter()
        .map(|&p| (p.ln(), bracket_term(&kind, p).unwrap().abs().ln()))
        .unzip();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 4.0).abs() < 0.2, "{slope}");
}

#[test]
fn octant_bracket_matches_brute_force() {
    let kinds = [
        BracketKind::Gp { a: 0.7 },
        BracketKind::BetaRegime { vhat0: 3.0 },
        BracketKind::mean_field_from(&RadialPotential::soft_sphere(2.0, 0.3).unwrap()).unwrap(),
    ];
    for kind in &kinds {
        for m in 1..=6 {
            let cutoff = 2.0 * PI * m as f64;
            let fast = bracket_sum(kind, cutoff, false, Reduction::Deterministic).unwrap().value;
            let brute = bracket_sum_brute_force(kind, cutoff).unwrap();
            assert!((fast - brute).abs() < 1e-12 * brute.abs().max(1.0), "{kind:?} M={m}");
        }
    }
}

#[test]
fn tail_corrected_gp_sum_is_cutoff_stable() {
    let kind = BracketKind::Gp { a: 1.0 };
    let lo = bracket_sum(&kind, 40.0 * PI, true, Reduction::Deterministic).unwrap();
    let hi = bracket_sum(&kind, 80.0 * PI, true, Reduction::Deterministic).unwrap();
    assert!((lo.value - hi.value).abs() <= hi.diagnostic, "{} {} {}", lo.value, hi.value, hi.diagnostic);
    let raw = bracket_sum(&kind, 80.0 * PI, false, Reduction::Deterministic).unwrap();
    assert!((raw.value - hi.value).abs() > (lo.value - hi.value).abs());
}

#[test]
fn fast_and_deterministic_reductions_agree() {
    let kind = BracketKind::Gp { a: 0.3 };
    let d1 = bracket_sum(&kind, 60.0 * PI, true, Reduction::Deterministic).unwrap();
    let d2 = bracket_sum(&kind, 60.0 * PI, true, Reduction::Deterministic).unwrap();
    let f = bracket_sum(&kind, 60.0 * PI, true, Reduction::Fast).unwrap();
    assert_eq!(d1.value.to_bits(), d2.value.to_bits());
    assert!((d1.value - f.value).abs() <= 1e-12 * d1.value.abs());
}

#[test]
fn mean_field_tail_is_small_and_signed() {
    let v = RadialPotential::soft_sphere(1.0, 0.5).unwrap();
    let kind = BracketKind::mean_field_from(&v).unwrap();
    let r = bracket_sum(&kind, 30.0 * PI, true, Reduction::Deterministic).unwrap();
    let raw = bracket_sum(&kind, 30.0 * PI, false, Reduction::Deterministic).unwrap();
    assert!(r.value < 0.0 && r.value < raw.value);
}

#[test]
fn lhy_ratio_is_one() {
    let r = lhy_integral(1.0, 1e-6).unwrap();
    assert!((r.ratio.unwrap() - 1.0).abs() < 1e-4, "{:?}", r);
    let half = lhy_integral(1.0, 5e-7).unwrap();
    let rel = (half.energy_per_particle / (4.0 * PI * 5e-7)) / (r.energy_per_particle / (4.0 * PI * 1e-6));
    assert!((rel - 0.5f64.sqrt()).abs() < 1e-8);
}

fn soft_spec(order: usize) -> BornSeriesSpec {
    BornSeriesSpec::new(
        RadialPotential::soft_sphere(0.5, 1.0).unwrap(),
        ScaledRegime::new(10_000, 0.5).unwrap(),
        order,
    )
}

#[test]
fn born_first_orders() {
    let one = born_series(&soft_spec(1)).unwrap();
    let vhat0 = 0.5 * 4.0 / 3.0 * PI;
    assert!((one.value() - vhat0).abs() < 1e-14);
    let two = born_series(&soft_spec(2)).unwrap();
    assert!(two.steps[0] <= 0.0);
    let err = born_series(&BornSeriesSpec {
        momentum_cutoff: Some(2.0 * PI * 100.0 * 1.01),
        tail_tolerance: 1e-12,
        ..soft_spec(2)
    })
    .unwrap_err();
    match err {
        bosegas::Error::Accuracy { required, .. } => assert!(required.unwrap() > 2.0 * PI * 100.0),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn born_order_two_tracks_scaled_scattering_length() {
    let spec = soft_spec(3);
    let series = born_series(&spec).unwrap();
    let scaled = spec.potential.scale(&spec.regime);
    let a = scattering_length(&scaled, 20.0 * scaled.support_radius(), 1e-12).unwrap().scattering_length;
    let ode = 8.0 * PI * 1e4 * a;
    println!(
        "Born: order2 {:.9} order3 {:.9} ODE {:.9} |o2-ode| {:.3e} order-3 step {:.3e}",
        series.partials[1],
        series.partials[2],
        ode,
        (series.partials[1] - ode).abs(),
        series.steps[1].abs()
    );
    // the lattice order-2 value carries a finite-volume shift of relative size ~ V̂(0)/N,
    // far below the first Born correction itself
    assert!((series.partials[1] - ode).abs() < 0.05 * series.steps[0].abs());
}

#[test]
fn fft_nesting_matches_direct_sum() {
    let v = RadialPotential::soft_sphere(3.0, 1.0).unwrap();
    let regime = ScaledRegime::new(50, 0.5).unwrap();
    let spec = BornSeriesSpec {
        nested_radius: 4,
        momentum_cutoff: Some(2.0 * PI * 40.0),
        tail_tolerance: 1.0,
        ..BornSeriesSpec::new(v.clone(), regime, 5)
    };
    let series = born_series(&spec).unwrap();
    let direct = born_nested_direct(&v, &regime, 4, 3).unwrap();
    for (fft, d) in series.steps[1..].iter().zip(&direct) {
        assert!((fft - d).abs() < 1e-10 * d.abs().max(1e-300) + 1e-18, "{fft} vs {d}");
    }
}

#[test]
fn weak_coupling_born_terms_shrink_geometrically() {
    let v = RadialPotential::soft_sphere(0.2, 1.0).unwrap();
    let spec = BornSeriesSpec {
        nested_radius: 12,
        ..BornSeriesSpec::new(v, ScaledRegime::new(100, 0.3).unwrap(), 5)
    };
    let s = born_series(&spec).unwrap();
    let predicted = s.steps[0].abs() / s.partials[0].abs();
    for w in s.steps.windows(2) {
        let ratio = w[1].abs() / w[0].abs();
        assert!(ratio <= 1.1 * predicted, "{:?}", s.steps);
        assert!(w[0].signum() != w[1].signum());
    }
}

#[test]
fn continuum_born_ratios_grow_slightly() {
    // R - tanh(x)/κ = R (x²/3 - 2x⁴/15 + 17x⁶/315 - ...), x = κR: the ratio of
    // successive coefficients is 2/5 then 17/42, so a strict "shrinks at least as
    // fast as the first step" bound cannot hold even without a lattice
    let c = [1.0 / 3.0, 2.0 / 15.0, 17.0 / 315.0];
    assert!(c[2] / c[1] > c[1] / c[0]);
    assert!((c[2] / c[1]) / (c[1] / c[0]) < 1.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gp_brackets_are_negative(a in 1e-3f64..3.0, n in 1u32..200) {
        let p = 2.0 * PI * (n as f64).sqrt();
        let b = bracket_term(&BracketKind::Gp { a }, p).unwrap();
        prop_assert!(b < 0.0);
    }

    #[test]
    fn lhy_ratio_holds_across_density(a in 0.1f64..2.0, exp in -9.0f64..-4.0) {
        let rho = 10f64.powf(exp) / a.powi(3);
        let r = lhy_integral(a, rho).unwrap();
        prop_assert!((r.ratio.unwrap() - 1.0).abs() < 1e-6);
    }
}
