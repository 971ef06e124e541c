use std::f64::consts::PI;

use bosegas::neumann::{neumann_ground_state, NeumannCore, NeumannSolution};
use bosegas::vmc::{
    acceptance_probability, distance, estimate_energy, log_weight, proposal_density, run_chain, run_chains,
    scaling_probe, single_pair_check, two_body_oracle, two_body_oracle_with, vmc_energy, ChainParams,
    OracleRule, ParticleConfiguration, ScalingProbeSpec, TorusGas,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(l: f64, n: usize, core: f64, ell: f64) -> (TorusGas, NeumannSolution) {
    let gas = TorusGas::new(l, n, core, ell).unwrap();
    (gas, neumann_ground_state(&NeumannCore::hard(core), ell, 1e-12).unwrap())
}

fn params(sweeps: usize, seed: u64) -> ChainParams {
    ChainParams {
        sweeps,
        burn_in: 1000,
        step_size: 0.1,
        seed,
    }
}

#[test]
fn free_gas_accepts_everything_and_has_zero_energy() {
    let (gas, sol) = setup(1.0, 5, 0.0, 0.3);
    let (samples, diag) = run_chain(&gas, &sol, &params(500, 1)).unwrap();
    assert_eq!(diag.acceptance_rate, 1.0);
    let e = estimate_energy(&samples, &sol, &gas, &diag).unwrap();
    assert_eq!((e.a_term, e.b_term, e.total), (0.0, 0.0, 0.0));
}

#[test]
fn identical_seeds_give_identical_streams() {
    let (gas, sol) = setup(1.0, 4, 0.05, 0.3);
    let (a, da) = run_chain(&gas, &sol, &params(300, 7)).unwrap();
    let (b, db) = run_chain(&gas, &sol, &params(300, 7)).unwrap();
    assert_eq!(a, b);
    assert_eq!(da, db);
    let (c, _) = run_chain(&gas, &sol, &params(300, 8)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn samples_respect_the_hard_core() {
    let (gas, sol) = setup(1.0, 16, 0.08, 0.3);
    let (samples, diag) = run_chain(&gas, &sol, &params(400, 3)).unwrap();
    assert!(diag.acceptance_rate > 0.0 && diag.acceptance_rate < 1.0);
    for s in &samples {
        assert!(s.min_distance(1.0) > 0.08);
        assert!(log_weight(s, &sol, &gas).is_finite());
    }
}

#[test]
fn lattice_start_fails_when_too_dense() {
    let gas = TorusGas::new(1.0, 30, 0.3, 0.4).unwrap();
    let sol = neumann_ground_state(&NeumannCore::hard(0.3), 0.4, 1e-12).unwrap();
    assert!(run_chain(&gas, &sol, &params(10, 1)).is_err());
}

#[test]
fn two_body_oracle_rules_agree() {
    let (gas, sol) = setup(1.0, 2, 0.01, 0.2);
    let s = two_body_oracle_with(&gas, &sol, OracleRule::Simpson).unwrap();
    let g = two_body_oracle_with(&gas, &sol, OracleRule::Gauss).unwrap();
    assert!(s > 0.0);
    assert!((s - g).abs() < 1e-9 * g, "{s} {g}");
    // 8π core / L³ up to O(core/ℓ)
    let lead = 8.0 * PI * 0.01;
    assert!((g / lead - 1.0).abs() < 3.0 * 0.01 / 0.2);
}

#[test]
fn two_body_oracle_vanishes_without_core() {
    let (gas, sol) = setup(1.0, 2, 0.0, 0.2);
    assert_eq!(two_body_oracle(&gas, &sol).unwrap(), 0.0);
    let mut prev = f64::INFINITY;
    for core in [1e-2, 1e-3, 1e-4] {
        let (gas, sol) = setup(1.0, 2, core, 0.2);
        let e = two_body_oracle(&gas, &sol).unwrap();
        assert!(e < prev);
        prev = e;
    }
    assert!(prev < 1e-2);
}

#[test]
fn two_particle_estimate_matches_oracle() {
    let (gas, sol) = setup(1.0, 2, 0.02, 0.2);
    let e = run_chains(&gas, &sol, &params(100_000, 11), 4).unwrap();
    let oracle = two_body_oracle(&gas, &sol).unwrap();
    println!("N=2: {e:?} oracle {oracle}");
    assert_eq!(e.b_term, 0.0);
    assert!((e.total - oracle).abs() < 3.5 * e.std_error);
}

#[test]
fn pair_distance_histogram_follows_weight() {
    let (gas, sol) = setup(1.0, 2, 0.02, 0.2);
    let (samples, _) = run_chain(&gas, &sol, &params(200_000, 21)).unwrap();
    let edges = [0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4];
    let mut counts = vec![0usize; edges.len() - 1];
    for s in &samples {
        let r = distance(&s.positions[0], &s.positions[1], 1.0);
        if let Some(k) = edges.windows(2).position(|w| r >= w[0] && r < w[1]) {
            counts[k] += 1;
        }
    }
    // expected bin mass ∝ ∫ f² 4πr² over the bin, normalized over the whole box
    let norm = 1.0 - bosegas::quadrature::gauss_composite(|r| 4.0 * PI * r * r * sol.u(r), 0.0, 0.2, 16, 200);
    let n = samples.len() as f64;
    for (k, w) in edges.windows(2).enumerate() {
        let mass = bosegas::quadrature::gauss_composite(|r| 4.0 * PI * r * r * sol.value(r).powi(2), w[0], w[1], 16, 50) / norm;
        let expected = mass * n;
        // samples are correlated; allow for an integrated autocorrelation time of a few sweeps
        let sigma = (expected * (1.0 - mass) * 4.0).sqrt();
        assert!((counts[k] as f64 - expected).abs() < 3.0 * sigma, "bin {k}: {} vs {expected}", counts[k]);
    }
}

#[test]
fn error_bar_shrinks_with_more_samples() {
    let (gas, sol) = setup(1.0, 4, 0.02, 0.25);
    let small = vmc_energy(&gas, &sol, &params(40_000, 5)).unwrap();
    let large = vmc_energy(&gas, &sol, &params(160_000, 5)).unwrap();
    let ratio = small.std_error / large.std_error;
    println!("stderr ratio for 4x samples: {ratio}");
    assert!((ratio / 2.0 - 1.0).abs() < 0.25, "{ratio}");
}

#[test]
fn chains_merge_deterministically() {
    let (gas, sol) = setup(1.0, 4, 0.02, 0.25);
    let a = run_chains(&gas, &sol, &params(5_000, 2), 3).unwrap();
    let b = run_chains(&gas, &sol, &params(5_000, 2), 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_samples, 15_000);
    assert_eq!(a.total, a.a_term + a.b_term);
}

#[test]
fn b_term_is_small_against_a_term() {
    let mut ratios = vec![];
    for x in [1e-4, 1e-5, 1e-6] {
        let n = 8;
        let rho = n as f64;
        let core = (x / rho).cbrt();
        let ell = 0.5;
        let (gas, sol) = setup(1.0, n, core, ell);
        let e = vmc_energy(&gas, &sol, &params(40_000, 17)).unwrap();
        let bound = rho * core * ell * ell;
        ratios.push((e.b_term.abs() / e.a_term) / bound);
    }
    println!("|B|/A / (rho core ell^2): {ratios:?}");
    let c = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(c < 1.0, "{ratios:?}");
}

#[test]
fn single_pair_reduction_matches_closed_form() {
    for ell in [1e-3, 1e-2] {
        let c = single_pair_check(ell, 1e-5, 200_000, 9);
        assert!((c.monte_carlo - c.exact).abs() < 3.0 * c.std_error, "{c:?}");
    }
}

#[test]
fn probe_exponents() {
    let spec = ScalingProbeSpec {
        ell_grid: vec![1e-3, 2e-3, 4e-3, 7e-3, 1e-2],
        n_for_proxy: 100_000,
        a: 1.0,
        quadrature_samples: 200_000,
        seed: 3,
    };
    let report = scaling_probe(&spec).unwrap();
    println!("{report:#?}");
    for (e, want) in report.exponents.iter().zip([-1.0, -3.0, -4.0]) {
        assert!((e.exponent - want).abs() < 0.3, "{e:?}");
    }
}

#[test]
fn probe_without_interaction_is_zero() {
    let spec = ScalingProbeSpec {
        ell_grid: vec![1e-3, 2e-3, 5e-3, 1e-2],
        n_for_proxy: 10,
        a: 0.0,
        quadrature_samples: 1000,
        seed: 1,
    };
    let report = scaling_probe(&spec).unwrap();
    assert!(report.points.iter().all(|p| p.values == [0.0; 3]));
}

#[test]
fn probe_rejects_short_grids() {
    let spec = |grid: Vec<f64>| ScalingProbeSpec {
        ell_grid: grid,
        n_for_proxy: 10,
        a: 1.0,
        quadrature_samples: 1000,
        seed: 1,
    };
    assert!(scaling_probe(&spec(vec![1e-3, 2e-3, 4e-3])).is_err());
    assert!(scaling_probe(&spec(vec![1e-3, 2e-3, 4e-3, 5e-3])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn detailed_balance_on_two_particle_moves(seed in 0u64..10_000, step in 0.01f64..0.2) {
        let (gas, sol) = setup(1.0, 2, 0.03, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = ParticleConfiguration { positions: vec![[0.5, 0.5, 0.5], [0.5 + 0.1 * rng.gen::<f64>(), 0.5, 0.5 + 0.05]] };
        let mut y = x.clone();
        for c in 0..3 {
            y.positions[1][c] = (x.positions[1][c] + step * (rng.gen::<f64>() - 0.5)).rem_euclid(1.0);
        }
        let (wx, wy) = (log_weight(&x, &sol, &gas), log_weight(&y, &sol, &gas));
        let q_xy = proposal_density(&x.positions[1], &y.positions[1], step, 1.0);
        let q_yx = proposal_density(&y.positions[1], &x.positions[1], step, 1.0);
        prop_assert_eq!(q_xy, q_yx);
        let flow_xy = wx.exp() * q_xy * acceptance_probability(wx, wy);
        let flow_yx = wy.exp() * q_yx * acceptance_probability(wy, wx);
        prop_assert!((flow_xy - flow_yx).abs() <= 1e-12 * flow_xy.max(flow_yx).max(1e-300));
    }
}
