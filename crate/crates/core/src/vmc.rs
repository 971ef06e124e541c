//! Variational Monte Carlo for hard spheres on a periodic box with the Jastrow
//! trial state `∏_{i<j} f_ℓ(x_i - x_j)`, plus a deterministic two-body oracle
//! and a Monte Carlo probe of derivative expectations of a three-body proxy.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neumann::NeumannSolution;
use crate::quadrature;

pub type Vec3 = [f64; 3];

/// Fewest samples accepted by the blocking analysis.
pub const MIN_BLOCKING_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGas {
    pub box_side: f64,
    pub n_particles: usize,
    pub core_radius: f64,
    pub ell: f64,
}

impl TorusGas {
    /// Requires `core < ℓ ≤ L/2` and `ρ core³ < 1`.
    pub fn new(box_side: f64, n_particles: usize, core_radius: f64, ell: f64) -> Result<Self> {
        if !(box_side > 0.0 && box_side.is_finite()) {
            return Err(Error::domain(format!("box side must be positive, got {box_side}")));
        }
        if n_particles < 2 {
            return Err(Error::domain("need at least two particles"));
        }
        if !(core_radius >= 0.0 && core_radius < ell) {
            return Err(Error::domain(format!("need 0 <= core ({core_radius}) < ell ({ell})")));
        }
        if !(ell <= 0.5 * box_side) {
            return Err(Error::domain(format!(
                "ell = {ell} exceeds half the box side; minimum-image distances would be ambiguous"
            )));
        }
        let gas = Self {
            box_side,
            n_particles,
            core_radius,
            ell,
        };
        if !(gas.density() * core_radius.powi(3) < 1.0) {
            return Err(Error::domain("rho * core^3 must be below 1"));
        }
        Ok(gas)
    }

    pub fn volume(&self) -> f64 {
        self.box_side.powi(3)
    }

    pub fn density(&self) -> f64 {
        self.n_particles as f64 / self.volume()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfiguration {
    pub positions: Vec<Vec3>,
}

fn wrap(x: f64, l: f64) -> f64 {
    let y = x - l * (x / l).floor();
    if y >= l {
        0.0
    } else {
        y
    }
}

fn min_image_component(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

/// Minimum-image displacement `a - b`.
pub fn displacement(a: &Vec3, b: &Vec3, l: f64) -> Vec3 {
    [
        min_image_component(a[0] - b[0], l),
        min_image_component(a[1] - b[1], l),
        min_image_component(a[2] - b[2], l),
    ]
}

fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn distance(a: &Vec3, b: &Vec3, l: f64) -> f64 {
    norm(&displacement(a, b, l))
}

impl ParticleConfiguration {
    /// Cubic sublattice start, offset by half a spacing.
    pub fn lattice(gas: &TorusGas) -> Result<Self> {
        let m = (gas.n_particles as f64).cbrt().ceil() as usize;
        let m = if m * m * m < gas.n_particles { m + 1 } else { m };
        let spacing = gas.box_side / m as f64;
        if !(spacing > gas.core_radius) {
            return Err(Error::Setup(format!(
                "lattice spacing {spacing} does not clear the core radius {}",
                gas.core_radius
            )));
        }
        let positions = (0..gas.n_particles)
            .map(|k| {
                let (i, j, l) = (k % m, (k / m) % m, k / (m * m));
                [(i as f64 + 0.5) * spacing, (j as f64 + 0.5) * spacing, (l as f64 + 0.5) * spacing]
            })
            .collect();
        Ok(Self { positions })
    }

    pub fn min_distance(&self, l: f64) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.positions.len() {
            for j in 0..i {
                best = best.min(distance(&self.positions[i], &self.positions[j], l));
            }
        }
        best
    }
}

/// `2 log f(r)`, `-∞` inside the core.
fn pair_log_weight(sol: &NeumannSolution, core: f64, r: f64) -> f64 {
    if r <= core {
        return f64::NEG_INFINITY;
    }
    if r >= sol.ell {
        return 0.0;
    }
    let f = sol.value(r);
    if f > 0.0 {
        2.0 * f.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `Σ_{i<j} 2 log f_ℓ(d_ij)` with minimum-image distances.
pub fn log_weight(config: &ParticleConfiguration, sol: &NeumannSolution, gas: &TorusGas) -> f64 {
    let p = &config.positions;
    let mut total = 0.0;
    for i in 0..p.len() {
        for j in 0..i {
            total += pair_log_weight(sol, gas.core_radius, distance(&p[i], &p[j], gas.box_side));
            if total == f64::NEG_INFINITY {
                return total;
            }
        }
    }
    total
}

/// Metropolis acceptance probability from log weights.
pub fn acceptance_probability(log_w_old: f64, log_w_new: f64) -> f64 {
    if log_w_new == f64::NEG_INFINITY {
        return 0.0;
    }
    (log_w_new - log_w_old).exp().min(1.0)
}

/// Density of proposing `to` from `from` for a single particle: uniform in a
/// cube of side `step` centered on `from`, periodically wrapped.
pub fn proposal_density(from: &Vec3, to: &Vec3, step: f64, l: f64) -> f64 {
    let d = displacement(to, from, l);
    if d.iter().all(|c| c.abs() <= 0.5 * step) {
        step.powi(-3)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub sweeps: usize,
    pub burn_in: usize,
    pub step_size: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Production-phase acceptance rate.
    pub acceptance_rate: f64,
    /// Step size after burn-in tuning.
    pub step_size: f64,
    pub sweeps: usize,
    pub seed: u64,
}

const TUNE_WINDOW: usize = 50;

/// Runs one Metropolis chain and hands every post-burn-in sweep to `observer`.
pub fn run_chain_with<F: FnMut(&ParticleConfiguration)>(
    gas: &TorusGas,
    sol: &NeumannSolution,
    params: &ChainParams,
    mut observer: F,
) -> Result<ChainDiagnostics> {
    let l = gas.box_side;
    if !(params.step_size > 0.0 && params.step_size < 0.5 * l) {
        return Err(Error::domain(format!(
            "step size {} must lie in (0, L/2)",
            params.step_size
        )));
    }
    if (sol.ell - gas.ell).abs() > 1e-12 * gas.ell || (sol.core_radius() - gas.core_radius).abs() > 1e-12 * gas.ell {
        return Err(Error::domain("Neumann solution does not match the gas core and ell"));
    }
    let mut config = ParticleConfiguration::lattice(gas)?;
    if log_weight(&config, sol, gas) == f64::NEG_INFINITY {
        return Err(Error::Setup("lattice start violates the hard core".into()));
    }
    let n = gas.n_particles;
    let max_step = 0.5 * l * (1.0 - 1e-9);
    let mut step = params.step_size;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (mut accepted, mut proposed) = (0u64, 0u64);
    let (mut win_acc, mut win_prop) = (0u64, 0u64);

    for sweep in 0..params.burn_in + params.sweeps {
        let production = sweep >= params.burn_in;
        if sweep == params.burn_in {
            accepted = 0;
            proposed = 0;
        }
        for i in 0..n {
            let old = config.positions[i];
            let new = [
                wrap(old[0] + step * (rng.gen::<f64>() - 0.5), l),
                wrap(old[1] + step * (rng.gen::<f64>() - 0.5), l),
                wrap(old[2] + step * (rng.gen::<f64>() - 0.5), l),
            ];
            let mut delta = 0.0;
            for (j, pj) in config.positions.iter().enumerate() {
                if j == i {
                    continue;
                }
                let lw_new = pair_log_weight(sol, gas.core_radius, distance(&new, pj, l));
                if lw_new == f64::NEG_INFINITY {
                    delta = f64::NEG_INFINITY;
                    break;
                }
                delta += lw_new - pair_log_weight(sol, gas.core_radius, distance(&old, pj, l));
            }
            let u: f64 = rng.gen();
            let accept = delta != f64::NEG_INFINITY && (delta >= 0.0 || u < delta.exp());
            proposed += 1;
            win_prop += 1;
            if accept {
                config.positions[i] = new;
                accepted += 1;
                win_acc += 1;
            }
        }
        if !production {
            if (sweep + 1) % TUNE_WINDOW == 0 {
                let rate = win_acc as f64 / win_prop as f64;
                if rate > 0.6 {
                    step = (step * 1.2).min(max_step);
                } else if rate < 0.4 {
                    step *= 0.8;
                }
                win_acc = 0;
                win_prop = 0;
            }
            continue;
        }
        if gas.core_radius > 0.0 && !(config.min_distance(l) > gas.core_radius) {
            return Err(Error::solver("emitted sample violates the hard core"));
        }
        observer(&config);
    }
    Ok(ChainDiagnostics {
        acceptance_rate: if proposed > 0 { accepted as f64 / proposed as f64 } else { 0.0 },
        step_size: step,
        sweeps: params.sweeps,
        seed: params.seed,
    })
}

/// Runs a chain and keeps every sample.
pub fn run_chain(
    gas: &TorusGas,
    sol: &NeumannSolution,
    params: &ChainParams,
) -> Result<(Vec<ParticleConfiguration>, ChainDiagnostics)> {
    let mut samples = Vec::with_capacity(params.sweeps);
    let diag = run_chain_with(gas, sol, params, |c| samples.push(c.clone()))?;
    Ok((samples, diag))
}

/// `(A, B)` local terms of one configuration.
pub fn local_terms(config: &ParticleConfiguration, sol: &NeumannSolution, gas: &TorusGas) -> (f64, f64) {
    let p = &config.positions;
    let l = gas.box_side;
    let floor = gas.core_radius * (1.0 + 1e-12);
    let mut inside = 0usize;
    let mut b = 0.0;
    for j in 0..p.len() {
        let mut sum = [0.0; 3];
        let mut sq = 0.0;
        for i in 0..p.len() {
            if i == j {
                continue;
            }
            let d = displacement(&p[j], &p[i], l);
            let r = norm(&d);
            if r >= gas.ell {
                continue;
            }
            if i < j {
                inside += 1;
            }
            let rc = r.max(floor);
            let f = sol.value(rc);
            let s = if f > 0.0 { sol.derivative(rc) / f / r.max(f64::MIN_POSITIVE) } else { 0.0 };
            let g = [s * d[0], s * d[1], s * d[2]];
            for k in 0..3 {
                sum[k] += g[k];
            }
            sq += g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        }
        b -= sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2] - sq;
    }
    (2.0 * sol.eigenvalue * inside as f64, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub a_term: f64,
    pub b_term: f64,
    pub total: f64,
    pub std_error: f64,
    pub acceptance_rate: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Blocking levels `(standard error, its uncertainty)` from successive pair averaging.
pub fn blocking_levels(series: &[f64]) -> Vec<(f64, f64)> {
    let mut x = series.to_vec();
    let mut levels = Vec::new();
    while x.len() >= 32 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        levels.push((se, se / (2.0 * (n - 1.0)).sqrt()));
        x = x.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
    }
    levels
}

/// Standard error of the mean at the first blocking plateau.
pub fn blocking_error(series: &[f64]) -> Result<f64> {
    if series.len() < MIN_BLOCKING_SAMPLES {
        return Err(Error::accuracy(
            format!("blocking needs at least {MIN_BLOCKING_SAMPLES} samples, got {}", series.len()),
            Some(MIN_BLOCKING_SAMPLES as f64),
        ));
    }
    let levels = blocking_levels(series);
    for k in 0..levels.len().saturating_sub(2) {
        let (se, err) = levels[k];
        if levels[k + 1].0 - se <= 2.0 * err && levels[k + 2].0 - se <= 2.0 * err {
            return Ok(levels[k..=k + 2].iter().map(|l| l.0).fold(0.0, f64::max));
        }
    }
    Ok(levels.iter().map(|l| l.0).fold(0.0, f64::max))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

impl EnergyEstimate {
    pub fn from_series(a: &[f64], b: &[f64], acceptance_rate: f64, seed: u64) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::accuracy("empty or mismatched sample series", None));
        }
        let local: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        let std_error = blocking_error(&local)?;
        let (a_term, b_term) = (mean(a), mean(b));
        Ok(Self {
            a_term,
            b_term,
            total: a_term + b_term,
            std_error,
            acceptance_rate,
            n_samples: a.len(),
            seed,
        })
    }

    /// Sample-weighted merge in the given order.
    pub fn merge(parts: &[EnergyEstimate]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::domain("nothing to merge"))?;
        let n: f64 = parts.iter().map(|p| p.n_samples as f64).sum();
        let w = |f: fn(&EnergyEstimate) -> f64| parts.iter().map(|p| p.n_samples as f64 * f(p)).sum::<f64>() / n;
        let a_term = w(|p| p.a_term);
        let b_term = w(|p| p.b_term);
        let var: f64 = parts.iter().map(|p| (p.n_samples as f64 * p.std_error).powi(2)).sum();
        Ok(Self {
            a_term,
            b_term,
            total: a_term + b_term,
            std_error: var.sqrt() / n,
            acceptance_rate: w(|p| p.acceptance_rate),
            n_samples: n as usize,
            seed: first.seed,
        })
    }
}

pub fn estimate_energy(
    samples: &[ParticleConfiguration],
    sol: &NeumannSolution,
    gas: &TorusGas,
    diagnostics: &ChainDiagnostics,
) -> Result<EnergyEstimate> {
    let (a, b): (Vec<f64>, Vec<f64>) = samples.iter().map(|c| local_terms(c, sol, gas)).unzip();
    EnergyEstimate::from_series(&a, &b, diagnostics.acceptance_rate, diagnostics.seed)
}

/// Runs one chain, accumulating the estimator on the fly.
pub fn vmc_energy(gas: &TorusGas, sol: &NeumannSolution, params: &ChainParams) -> Result<EnergyEstimate> {
    let mut a = Vec::with_capacity(params.sweeps);
    let mut b = Vec::with_capacity(params.sweeps);
    let diag = run_chain_with(gas, sol, params, |c| {
        let (x, y) = local_terms(c, sol, gas);
        a.push(x);
        b.push(y);
    })?;
    EnergyEstimate::from_series(&a, &b, diag.acceptance_rate, diag.seed)
}

/// Independent chains with seeds `seed, seed + 1, …`, merged in seed order.
pub fn run_chains(gas: &TorusGas, sol: &NeumannSolution, params: &ChainParams, chains: usize) -> Result<EnergyEstimate> {
    if chains == 0 {
        return Err(Error::domain("need at least one chain"));
    }
    let parts: Vec<EnergyEstimate> = (0..chains as u64)
        .into_par_iter()
        .map(|k| {
            vmc_energy(
                gas,
                sol,
                &ChainParams {
                    seed: params.seed.wrapping_add(k),
                    ..*params
                },
            )
        })
        .collect::<Result<_>>()?;
    EnergyEstimate::merge(&parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleRule {
    Simpson,
    Gauss,
}

/// Exact `N = 2` energy `2λ ∫ χ f² / (L³ - ∫ (1 - f²))`.
pub fn two_body_oracle(gas: &TorusGas, sol: &NeumannSolution) -> Result<f64> {
    two_body_oracle_with(gas, sol, OracleRule::Gauss)
}

pub fn two_body_oracle_with(gas: &TorusGas, sol: &NeumannSolution, rule: OracleRule) -> Result<f64> {
    if gas.n_particles != 2 {
        return Err(Error::domain("the two-body oracle needs N = 2"));
    }
    if !(sol.ell <= 0.5 * gas.box_side) {
        return Err(Error::domain("ell must not exceed L/2"));
    }
    let core = sol.core_radius();
    let integrate = |g: &dyn Fn(f64) -> f64, a: f64, b: f64| -> f64 {
        if b <= a {
            return 0.0;
        }
        match rule {
            OracleRule::Simpson => {
                let n = 40_000;
                let h = (b - a) / n as f64;
                let v: Vec<f64> = (0..=n).map(|i| g(a + i as f64 * h)).collect();
                quadrature::simpson_uniform(&v, h)
            }
            OracleRule::Gauss => quadrature::gauss_composite(g, a, b, 16, 400),
        }
    };
    let shell = |r: f64| 4.0 * PI * r * r;
    let f2 = |r: f64| {
        let f = sol.value(r);
        f * f
    };
    let inner = |r: f64| shell(r) * f2(r);
    let outer = |r: f64| shell(r) * (1.0 - f2(r));
    let num = 2.0 * sol.eigenvalue * (integrate(&inner, 0.0, core) + integrate(&inner, core, sol.ell));
    let excluded = integrate(&outer, 0.0, core) + integrate(&outer, core, sol.ell);
    let den = gas.volume() - excluded;
    if !(num.is_finite() && den > 0.0) {
        return Err(Error::solver("two-body quadrature failed"));
    }
    Ok(num / den)
}

/// Run configuration from flat `key=value` text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmcConfig {
    pub box_side: f64,
    pub n_particles: usize,
    pub core: f64,
    pub ell: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub chains: usize,
    pub step_size: Option<f64>,
}

impl Default for VmcConfig {
    fn default() -> Self {
        Self {
            box_side: 1.0,
            n_particles: 2,
            core: 0.01,
            ell: 0.2,
            steps: 100_000,
            burn_in: 2_000,
            seed: 1,
            chains: 1,
            step_size: None,
        }
    }
}

pub const VMC_KEYS: [&str; 9] = ["L", "N", "core", "ell", "steps", "burn_in", "seed", "chains", "step_size"];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::domain(format!("invalid value '{value}' for key {key}")))
}

impl VmcConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "L" => self.box_side = parse_value(key, value)?,
            "N" => self.n_particles = parse_value(key, value)?,
            "core" => self.core = parse_value(key, value)?,
            "ell" => self.ell = parse_value(key, value)?,
            "steps" => self.steps = parse_value(key, value)?,
            "burn_in" => self.burn_in = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "chains" => self.chains = parse_value(key, value)?,
            "step_size" => self.step_size = Some(parse_value(key, value)?),
            _ => return Err(Error::domain(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::domain(format!("expected key=value, got '{line}'")))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    pub fn gas(&self) -> Result<TorusGas> {
        TorusGas::new(self.box_side, self.n_particles, self.core, self.ell)
    }

    pub fn chain_params(&self) -> ChainParams {
        ChainParams {
            sweeps: self.steps,
            burn_in: self.burn_in,
            step_size: self.step_size.unwrap_or(0.25 * self.ell),
            seed: self.seed,
        }
    }
}

pub const VMC_CSV_HEADER: &str = "N,L,core,ell,rho,A,B,total,stderr,acceptance,seed";

pub fn csv_row(gas: &TorusGas, e: &EnergyEstimate, precise: bool) -> String {
    let vals = [
        gas.box_side,
        gas.core_radius,
        gas.ell,
        gas.density(),
        e.a_term,
        e.b_term,
        e.total,
        e.std_error,
        e.acceptance_rate,
    ];
    let mut out = format!("{}", gas.n_particles);
    for v in vals {
        if precise {
            let _ = write!(out, ",{v:.16e}");
        } else {
            let _ = write!(out, ",{v}");
        }
    }
    let _ = write!(out, ",{}", e.seed);
    out
}

// ---------------------------------------------------------------------------
// Derivative probe of the three-body proxy on the unit torus.

/// `φ(r) = 1 - c/(r + ℓ)` and its radial derivatives.
#[derive(Debug, Clone, Copy)]
struct ProxyFactor {
    value: f64,
    grad: Vec3,
    hess: [[f64; 3]; 3],
}

impl ProxyFactor {
    fn new(d: &Vec3, c: f64, ell: f64) -> Self {
        let r = norm(d);
        let s = r + ell;
        let d1 = c / (s * s);
        let d2 = -2.0 * c / (s * s * s);
        let e = if r > 0.0 { [d[0] / r, d[1] / r, d[2] / r] } else { [0.0; 3] };
        let t = if r > 0.0 { d1 / r } else { 0.0 };
        let mut hess = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let delta = if a == b { 1.0 } else { 0.0 };
                hess[a][b] = d2 * e[a] * e[b] + t * (delta - e[a] * e[b]);
            }
        }
        Self {
            value: 1.0 - c / s,
            grad: [d1 * e[0], d1 * e[1], d1 * e[2]],
            hess,
        }
    }
}

/// Pairs `(i, j)` of the three factors, with `d = x_i - x_j`.
const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Squared norms of `∇₁Φ`, `∇₁∇₂Φ` and `∇₁∇₂∇₃Φ` plus `Φ²`.
fn proxy_integrands(x: &[Vec3; 3], c: f64, ell: f64) -> [f64; 4] {
    let factors: Vec<ProxyFactor> = PAIRS
        .iter()
        .map(|&(i, j)| ProxyFactor::new(&displacement(&x[i], &x[j], 1.0), c, ell))
        .collect();
    // derivative of factor f hit by particles (with tensor indices)
    let factor_term = |f: usize, hits: &[(usize, usize)]| -> f64 {
        let fac = &factors[f];
        let (i, _) = PAIRS[f];
        match hits {
            [] => fac.value,
            [(p, a)] => {
                if *p == i {
                    fac.grad[*a]
                } else {
                    -fac.grad[*a]
                }
            }
            [(_, a), (_, b)] => -fac.hess[*a][*b],
            _ => unreachable!(),
        }
    };
    let mut out = [0.0; 4];
    let phi = factors.iter().map(|f| f.value).product::<f64>();
    out[3] = phi * phi;
    for k in 1..=3usize {
        let particles: Vec<usize> = (0..k).collect();
        let mut total = 0.0;
        for idx in 0..3usize.pow(k as u32) {
            let comps: Vec<usize> = (0..k).map(|m| (idx / 3usize.pow(m as u32)) % 3).collect();
            let mut component = 0.0;
            for assign in 0..(1usize << k) {
                let mut hits: [Vec<(usize, usize)>; 3] = [vec![], vec![], vec![]];
                for (m, &p) in particles.iter().enumerate() {
                    let options: Vec<usize> = (0..3).filter(|&f| PAIRS[f].0 == p || PAIRS[f].1 == p).collect();
                    hits[options[(assign >> m) & 1]].push((p, comps[m]));
                }
                component += (0..3).map(|f| factor_term(f, &hits[f])).product::<f64>();
            }
            total += component * component;
        }
        out[k - 1] = total;
    }
    out
}

/// Pair-vector density mixing a uniform part with a radial part `∝ ℓ/(r+ℓ)²`
/// on the ball of radius 1/2.
#[derive(Debug, Clone, Copy)]
struct PairSampler {
    ell: f64,
    t_max: f64,
    uniform_weight: f64,
}

impl PairSampler {
    const RADIUS: f64 = 0.5;

    fn new(ell: f64) -> Self {
        Self {
            ell,
            t_max: Self::RADIUS / (Self::RADIUS + ell),
            uniform_weight: 0.1,
        }
    }

    fn density(&self, d: &Vec3) -> f64 {
        let r = norm(d);
        let radial = if r < Self::RADIUS {
            self.ell / (self.t_max * (r + self.ell).powi(2) * 4.0 * PI * r * r)
        } else {
            0.0
        };
        self.uniform_weight + (1.0 - self.uniform_weight) * radial
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        if rng.gen::<f64>() < self.uniform_weight {
            return [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
        }
        let t = self.t_max * rng.gen::<f64>();
        let r = self.ell * t / (1.0 - t);
        let z = 2.0 * rng.gen::<f64>() - 1.0;
        let az = 2.0 * PI * rng.gen::<f64>();
        let s = (1.0 - z * z).max(0.0).sqrt();
        [r * s * az.cos(), r * s * az.sin(), r * z]
    }
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    displacement(a, b, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub ell: f64,
    /// `⟨(-Δ₁)⟩`, `⟨(-Δ₁)(-Δ₂)⟩`, `⟨(-Δ₁)(-Δ₂)(-Δ₃)⟩` normalized by `‖Φ‖²`.
    pub values: [f64; 3],
    pub errors: [f64; 3],
}

/// Importance-sampled derivative expectations at one `ℓ`.
pub fn probe_point(ell: f64, c: f64, samples: usize, seed: u64) -> ProbePoint {
    let sampler = PairSampler::new(ell);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = [0.0; 4];
    let mut sum2 = [0.0; 4];
    for _ in 0..samples {
        // x₀ = 0; sample two of the three pair vectors through one of three channels
        let (u, v) = match rng.gen_range(0..3) {
            0 => (sampler.sample(&mut rng), sampler.sample(&mut rng)),
            1 => {
                let u = sampler.sample(&mut rng);
                let w = sampler.sample(&mut rng);
                (u, sub(&u, &w))
            }
            _ => {
                let v = sampler.sample(&mut rng);
                let w = sampler.sample(&mut rng);
                (sub(&v, &[-w[0], -w[1], -w[2]]), v)
            }
        };
        let uv = sub(&u, &v);
        let q = (sampler.density(&u) * sampler.density(&v)
            + sampler.density(&u) * sampler.density(&uv)
            + sampler.density(&v) * sampler.density(&uv))
            / 3.0;
        let vals = proxy_integrands(&[[0.0; 3], u, v], c, ell);
        for k in 0..4 {
            let w = vals[k] / q;
            sum[k] += w;
            sum2[k] += w * w;
        }
    }
    let n = samples as f64;
    let norm2 = sum[3] / n;
    let mut values = [0.0; 3];
    let mut errors = [0.0; 3];
    for k in 0..3 {
        let m = sum[k] / n;
        let var = (sum2[k] / n - m * m).max(0.0);
        values[k] = m / norm2;
        errors[k] = (var / n).sqrt() / norm2;
    }
    ProbePoint { ell, values, errors }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub monte_carlo: f64,
    pub std_error: f64,
    pub exact: f64,
}

/// Single-factor reduction: `∫_{|x|<1/2} |∇φ|²` by the probe's sampler versus
/// the closed form `4πc² t³/(3ℓ)`, `t = R/(R+ℓ)`.
pub fn single_pair_check(ell: f64, c: f64, samples: usize, seed: u64) -> PairCheck {
    let sampler = PairSampler::new(ell);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let u = sampler.sample(&mut rng);
        let r = norm(&u);
        let w = if r < PairSampler::RADIUS {
            let g = ProxyFactor::new(&u, c, ell).grad;
            (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) / sampler.density(&u)
        } else {
            0.0
        };
        s += w;
        s2 += w * w;
    }
    let n = samples as f64;
    let m = s / n;
    let t = PairSampler::RADIUS / (PairSampler::RADIUS + ell);
    PairCheck {
        monte_carlo: m,
        std_error: ((s2 / n - m * m).max(0.0) / n).sqrt(),
        exact: 4.0 * PI * c * c * t.powi(3) / (3.0 * ell),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedExponent {
    pub quantity: String,
    pub exponent: f64,
    /// Two standard errors of the slope.
    pub half_width: f64,
    pub prefactor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub exponents: Vec<FittedExponent>,
    pub points: Vec<ProbePoint>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbeSpec {
    pub ell_grid: Vec<f64>,
    pub n_for_proxy: u64,
    /// Scattering length of the proxy; the factor uses `a/N`.
    pub a: f64,
    pub quadrature_samples: usize,
    pub seed: u64,
}

/// Weighted log-log fit; returns `(slope, intercept, slope std error, reduced χ²)`.
fn log_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> (f64, f64, f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let w: Vec<f64> = sigma
        .iter()
        .zip(y)
        .map(|(s, v)| {
            let rel = (s / v).max(1e-12);
            1.0 / (rel * rel)
        })
        .collect();
    let sw: f64 = w.iter().sum();
    let mx = lx.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = ly.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = lx.iter().zip(&w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).zip(&w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2: f64 = lx
        .iter()
        .zip(&ly)
        .zip(&w)
        .map(|((a, c), b)| b * (c - intercept - slope * a).powi(2))
        .sum();
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let red = chi2 / dof;
    (slope, intercept, (red.max(1.0) / sxx).sqrt(), red)
}

pub fn scaling_probe(spec: &ScalingProbeSpec) -> Result<ScalingReport> {
    let grid = &spec.ell_grid;
    if grid.len() < 4 {
        return Err(Error::domain("the scaling fit needs at least 4 values of ell"));
    }
    if grid.iter().any(|&l| !(l > 0.0 && l < 0.05)) {
        return Err(Error::domain("ell values must be positive and well below the box size"));
    }
    let (lo, hi) = grid.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &l| (a.min(l), b.max(l)));
    if hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(Error::domain("ell grid must span at least one decade"));
    }
    if spec.n_for_proxy == 0 || spec.quadrature_samples < 100 {
        return Err(Error::domain("need N >= 1 and at least 100 quadrature samples"));
    }
    let c = spec.a / spec.n_for_proxy as f64;
    let points: Vec<ProbePoint> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &ell)| probe_point(ell, c, spec.quadrature_samples, spec.seed.wrapping_add(k as u64)))
        .collect();
    let mut warnings = Vec::new();
    let mut exponents = Vec::new();
    let names = ["-Lap1", "-Lap1 -Lap2", "-Lap1 -Lap2 -Lap3"];
    if c == 0.0 {
        for name in names {
            exponents.push(FittedExponent {
                quantity: name.into(),
                exponent: 0.0,
                half_width: 0.0,
                prefactor: 0.0,
            });
        }
        warnings.push("a = 0: all expectations vanish, exponents undefined".into());
        return Ok(ScalingReport {
            exponents,
            points,
            warnings,
        });
    }
    for (k, name) in names.iter().enumerate() {
        let x: Vec<f64> = points.iter().map(|p| p.ell).collect();
        let y: Vec<f64> = points.iter().map(|p| p.values[k]).collect();
        let s: Vec<f64> = points.iter().map(|p| p.errors[k]).collect();
        let (slope, intercept, se, red) = log_fit(&x, &y, &s);
        if red > 9.0 {
            warnings.push(format!("{name}: reduced chi-square {red:.1} of the power-law fit"));
        }
        exponents.push(FittedExponent {
            quantity: (*name).into(),
            exponent: slope,
            half_width: 2.0 * se,
            prefactor: intercept.exp(),
        });
    }
    Ok(ScalingReport {
        exponents,
        points,
        warnings,
    })
}
