//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::Instant;

use bosegas::bogoliubov::{enumerate_excitations, Dispersion, SpectrumLimits};
use bosegas::lattice::{born_series, cube_sum, cube_sum_brute_force, e_lambda, lhy_integral, BornSeriesSpec};
use bosegas::neumann::{neumann_ground_state, ratio_residual_study, NeumannCore};
use bosegas::scattering::{scattering_length, RadialPotential, ScaledRegime};
use bosegas::vmc::{run_chains, scaling_probe, two_body_oracle, ChainParams, ScalingProbeSpec, TorusGas};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, pass: bool, detail: String, started: Instant) {
    println!(
        "criterion {n}: {} {detail} [{:.1} s]",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "criterion {n}: {detail}");
}

#[test]
fn criterion_01_hard_sphere_scattering_length() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for r in [0.5, 1.0, 2.0] {
        let a = scattering_length(&RadialPotential::hard_sphere(r).unwrap(), 10.0 * r, 1e-12)
            .unwrap()
            .scattering_length;
        worst = worst.max((a / r - 1.0).abs());
    }
    report(1, worst < 1e-10 && t.elapsed().as_secs_f64() < 1.0, format!("max rel err {worst:.2e}"), t);
}

#[test]
fn criterion_02_soft_sphere_closed_form() {
    let t = Instant::now();
    let a = scattering_length(&RadialPotential::soft_sphere(2.0, 1.0).unwrap(), 20.0, 1e-12)
        .unwrap()
        .scattering_length;
    let err = (a - (1.0 - 1f64.tanh())).abs();
    report(2, err < 1e-8 && t.elapsed().as_secs_f64() < 1.0, format!("a = {a:.12}, err {err:.2e}"), t);
}

#[test]
fn criterion_03_neumann_eigenvalue_asymptotics() {
    let t = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for ratio in [1e-1, 1e-2, 1e-3, 1e-4] {
        let s = neumann_ground_state(&NeumannCore::hard(ratio), 1.0, 1e-12).unwrap();
        let dev = s.eigenvalue / (3.0 * ratio) - 1.0;
        ok &= dev.abs() <= 5.0 * ratio;
        detail += &format!("a/l={ratio:.0e}: dev {dev:.3e}; ");
    }
    report(3, ok && t.elapsed().as_secs_f64() < 5.0, detail, t);
}

#[test]
fn criterion_04_gp_scaling_identity() {
    let t = Instant::now();
    let v = RadialPotential::soft_sphere(2.0, 1.0).unwrap();
    let a = scattering_length(&v, 20.0, 1e-12).unwrap().scattering_length;
    let mut worst: f64 = 0.0;
    for n in [100u64, 10_000] {
        let scaled = v.scale(&ScaledRegime::new(n, 1.0).unwrap());
        let an = scattering_length(&scaled, 20.0 * scaled.support_radius(), 1e-12)
            .unwrap()
            .scattering_length;
        worst = worst.max((n as f64 * an / a - 1.0).abs());
    }
    report(4, worst < 1e-6 && t.elapsed().as_secs_f64() < 5.0, format!("max rel err {worst:.2e}"), t);
}

#[test]
fn criterion_05_e_lambda_stability() {
    let t = Instant::now();
    let e40 = e_lambda(40, true).unwrap().value;
    let e60 = e_lambda(60, true).unwrap().value;
    let octant = (cube_sum(5) - cube_sum_brute_force(5)).abs();
    let pass = (e40 - e60).abs() < 1e-4 && octant < 1e-12 && (e60 - 10.41364).abs() < 1e-4;
    report(
        5,
        pass && t.elapsed().as_secs_f64() < 60.0,
        format!("e(40) = {e40:.7}, e(60) = {e60:.7}, diff {:.2e}, octant vs brute {octant:.1e}", (e40 - e60).abs()),
        t,
    );
}

#[test]
fn criterion_06_lhy_coefficient() {
    let t = Instant::now();
    let ratio = lhy_integral(1.0, 1e-6).unwrap().ratio.unwrap();
    report(
        6,
        (ratio - 1.0).abs() < 1e-4 && t.elapsed().as_secs_f64() < 10.0,
        format!("ratio {ratio:.12}"),
        t,
    );
}

#[test]
fn criterion_07_born_series_against_ode() {
    let t = Instant::now();
    let spec = BornSeriesSpec::new(
        RadialPotential::soft_sphere(0.5, 1.0).unwrap(),
        ScaledRegime::new(10_000, 0.5).unwrap(),
        3,
    );
    let series = born_series(&spec).unwrap();
    let scaled = spec.potential.scale(&spec.regime);
    let a = scattering_length(&scaled, 20.0 * scaled.support_radius(), 1e-12)
        .unwrap()
        .scattering_length;
    let ode = 8.0 * PI * 1e4 * a;
    let gap = (series.partials[1] - ode).abs();
    let step3 = series.steps[1].abs();
    report(
        7,
        gap <= step3 && t.elapsed().as_secs_f64() < 60.0,
        format!("order 2 {:.10}, ODE {ode:.10}, |diff| {gap:.3e}, order-3 step {step3:.3e}", series.partials[1]),
        t,
    );
}

type Occupation = Vec<([i32; 3], u32)>;

fn exhaustive(a: f64, zeta: f64) -> BTreeSet<Occupation> {
    let eps = |n: [i32; 3]| {
        let p2 = 4.0 * PI * PI * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as f64;
        (p2 * p2 + 16.0 * PI * a * p2).sqrt()
    };
    let r = (zeta.sqrt() / (2.0 * PI)).ceil() as i32 + 1;
    let mut modes = vec![];
    for x in -r..=r {
        for y in -r..=r {
            for z in -r..=r {
                if [x, y, z] != [0, 0, 0] && eps([x, y, z]) < zeta {
                    modes.push([x, y, z]);
                }
            }
        }
    }
    modes.sort();
    fn rec(modes: &[[i32; 3]], eps: &dyn Fn([i32; 3]) -> f64, i: usize, left: f64, cur: &mut Occupation, out: &mut BTreeSet<Occupation>) {
        if i == modes.len() {
            out.insert(cur.clone());
            return;
        }
        rec(modes, eps, i + 1, left, cur, out);
        let e = eps(modes[i]);
        let mut k = 1;
        while (k as f64) * e < left * (1.0 + 1e-12) {
            cur.push((modes[i], k));
            rec(modes, eps, i + 1, left - k as f64 * e, cur, out);
            cur.pop();
            k += 1;
        }
    }
    let mut out = BTreeSet::new();
    rec(&modes, &eps, 0, zeta, &mut vec![], &mut out);
    out.into_iter()
        .filter(|o| o.iter().map(|(n, k)| *k as f64 * eps(*n)).sum::<f64>() < zeta)
        .collect()
}

#[test]
fn criterion_08_spectrum_oracle_equivalence() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut mismatches = 0;
    let mut sizes = vec![];
    while checked < 10 {
        let a = rng.gen_range(0.0..3.0);
        let zeta = rng.gen_range(30.0..220.0);
        let oracle = exhaustive(a, zeta);
        if oracle.len() > 500 {
            continue;
        }
        let spectrum = enumerate_excitations(&Dispersion::Gp { a }, zeta, SpectrumLimits::default()).unwrap();
        let got: BTreeSet<Occupation> = spectrum
            .entries
            .iter()
            .map(|e| e.occupation.iter().map(|(m, k)| (m.n, *k)).collect())
            .collect();
        if got != oracle || got.len() != spectrum.entries.len() {
            mismatches += 1;
        }
        sizes.push(oracle.len());
        checked += 1;
    }
    report(
        8,
        mismatches == 0 && t.elapsed().as_secs_f64() < 30.0,
        format!("{mismatches} mismatches over entry counts {sizes:?}"),
        t,
    );
}

#[test]
fn criterion_09_vmc_two_body_oracle() {
    let t = Instant::now();
    let gas = TorusGas::new(1.0, 2, 0.01, 0.2).unwrap();
    let sol = neumann_ground_state(&NeumannCore::hard(0.01), 0.2, 1e-12).unwrap();
    let params = ChainParams {
        sweeps: 100_000,
        burn_in: 2_000,
        step_size: 0.05,
        seed: 9,
    };
    let e = run_chains(&gas, &sol, &params, 4).unwrap();
    let oracle = two_body_oracle(&gas, &sol).unwrap();
    let z = (e.total - oracle) / e.std_error;
    let rel = e.std_error / e.total;
    report(
        9,
        z.abs() <= 3.0 && rel < 0.02 && t.elapsed().as_secs_f64() < 120.0,
        format!("VMC {:.6} +- {:.6} vs oracle {oracle:.6} (z = {z:.2}, rel err {rel:.3})", e.total, e.std_error),
        t,
    );
}

#[test]
fn criterion_10_dyson_bound_trend() {
    let t = Instant::now();
    let n = 8usize;
    let box_side = 1.0;
    let rho = n as f64 / box_side;
    let ell = rho.cbrt().recip();
    let mut rows = vec![];
    let mut ok = true;
    for x in [1e-4, 1e-5, 1e-6] {
        let core = (x / rho).cbrt();
        let gas = TorusGas::new(box_side, n, core, ell).unwrap();
        let sol = neumann_ground_state(&NeumannCore::hard(core), ell, 1e-12).unwrap();
        let params = ChainParams {
            sweeps: 100_000,
            burn_in: 2_000,
            step_size: 0.1,
            seed: 31,
        };
        let e = run_chains(&gas, &sol, &params, 4).unwrap();
        let scale = 4.0 * PI * core * rho * n as f64;
        let ratio = e.total / scale;
        let sigma = e.std_error / scale;
        ok &= ratio >= 1.0 - 3.0 * sigma && ratio <= 1.0 + 10.0 * core * rho.cbrt();
        rows.push((x, ratio, sigma));
    }
    let monotone = rows.windows(2).all(|w| (w[1].1 - 1.0).abs() <= (w[0].1 - 1.0).abs() + 3.0 * (w[0].2 + w[1].2));
    let detail = rows
        .iter()
        .map(|(x, r, s)| format!("rho core^3 = {x:.0e}: ratio {r:.4} +- {s:.4}"))
        .collect::<Vec<_>>()
        .join("; ");
    report(10, ok && monotone && t.elapsed().as_secs_f64() < 600.0, detail, t);
}

#[test]
fn criterion_11_scaling_probe_exponents() {
    let t = Instant::now();
    let report_ = scaling_probe(&ScalingProbeSpec {
        ell_grid: vec![1e-3, 1.8e-3, 3.2e-3, 5.6e-3, 1e-2],
        n_for_proxy: 100_000,
        a: 1.0,
        quadrature_samples: 400_000,
        seed: 11,
    })
    .unwrap();
    let got: Vec<f64> = report_.exponents.iter().map(|e| e.exponent).collect();
    let pass = got.iter().zip([-1.0, -3.0, -4.0]).all(|(g, w)| (g - w).abs() <= 0.3);
    report(
        11,
        pass && t.elapsed().as_secs_f64() < 300.0,
        format!("exponents {:.3} {:.3} {:.3}", got[0], got[1], got[2]),
        t,
    );
}

#[test]
fn criterion_12_ratio_residual() {
    let t = Instant::now();
    let core = NeumannCore::hard(1e-3);
    let inner = neumann_ground_state(&core, 0.05, 1e-12).unwrap();
    let outer = neumann_ground_state(&core, 0.5, 1e-12).unwrap();
    let study = ratio_residual_study(&inner, &outer, 500, 2).unwrap();
    let pass = study.finest() < 1e-3 && (study.observed_order - 2.0).abs() < 0.3;
    report(
        12,
        pass && t.elapsed().as_secs_f64() < 10.0,
        format!("residuals {:?}, observed order {:.3}", study.levels, study.observed_order),
        t,
    );
}
