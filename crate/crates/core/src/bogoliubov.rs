//! Bogoliubov dispersion laws, coefficient sequences, assembled ground-state
//! energies and the low-lying excitation spectrum on the unit torus.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, BornSeriesSpec, BracketKind, FourierFn, Reduction};
use crate::neumann::{NeumannCore, NeumannSolution};
use crate::quadrature;
use crate::scattering::{RadialPotential, ScaledRegime};

/// A nonzero momentum `p = 2πn` of the dual lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeMode {
    pub n: [i32; 3],
}

impl LatticeMode {
    pub fn new(n: [i32; 3]) -> Result<Self> {
        if n == [0, 0, 0] {
            return Err(Error::domain("the zero mode is not a lattice excitation"));
        }
        Ok(Self { n })
    }

    pub fn n2(&self) -> i64 {
        self.n.iter().map(|&c| c as i64 * c as i64).sum()
    }

    pub fn norm(&self) -> f64 {
        2.0 * PI * (self.n2() as f64).sqrt()
    }

    pub fn momentum(&self) -> [f64; 3] {
        self.n.map(|c| 2.0 * PI * c as f64)
    }
}

impl fmt::Display for LatticeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.n[0], self.n[1], self.n[2])
    }
}

/// All modes with `0 < |p| ≤ cutoff`, in lexicographic order of `n`.
pub fn modes_within(cutoff: f64) -> Vec<LatticeMode> {
    let r = (cutoff / (2.0 * PI)).floor() as i32;
    let max_n2 = (cutoff / (2.0 * PI)).powi(2) * (1.0 + 1e-15);
    let mut out = Vec::new();
    for x in -r..=r {
        for y in -r..=r {
            for z in -r..=r {
                let n2 = (x * x + y * y + z * z) as f64;
                if n2 > 0.0 && n2 <= max_n2 {
                    out.push(LatticeMode { n: [x, y, z] });
                }
            }
        }
    }
    out
}

/// Dispersion law of a single excitation.
#[derive(Clone)]
pub enum Dispersion {
    /// `√(|p|⁴ + 16πa p²)`.
    Gp { a: f64 },
    /// `√(|p|⁴ + 2p² V̂(p))`.
    MeanField { vhat: FourierFn },
}

impl fmt::Debug for Dispersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gp { a } => write!(f, "Gp {{ a: {a} }}"),
            Self::MeanField { .. } => write!(f, "MeanField"),
        }
    }
}

impl Dispersion {
    pub fn mean_field_from(potential: &RadialPotential) -> Result<Self> {
        potential.fourier(0.0)?;
        let v = potential.clone();
        Ok(Self::MeanField {
            vhat: std::sync::Arc::new(move |p| v.fourier(p)),
        })
    }

    /// `ε(|p|)`.
    pub fn energy(&self, p: f64) -> Result<f64> {
        match self {
            Self::Gp { a } => dispersion(p, DispersionLaw::Gp { a: *a }),
            Self::MeanField { vhat } => dispersion(p, DispersionLaw::MeanField { vhat_p: vhat(p)? }),
        }
    }

    /// A momentum beyond which `ε(p) ≥ zeta` is guaranteed.
    fn momentum_bound(&self, zeta: f64) -> Result<f64> {
        match self {
            // ε ≥ p²
            Self::Gp { .. } => Ok(zeta.sqrt()),
            // |V̂(p)| ≤ V̂(0) for V ≥ 0, so ε² ≥ p⁴ - 2p²V̂(0)
            Self::MeanField { vhat } => {
                let v0 = vhat(0.0)?.abs();
                Ok((v0 + (v0 * v0 + zeta * zeta).sqrt()).sqrt())
            }
        }
    }
}

/// Dispersion with the Fourier coefficient already evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DispersionLaw {
    Gp { a: f64 },
    MeanField { vhat_p: f64 },
}

pub fn dispersion(p: f64, law: DispersionLaw) -> Result<f64> {
    if !(p.is_finite() && p != 0.0) {
        return Err(Error::domain(format!("dispersion needs a nonzero momentum, got {p}")));
    }
    let p2 = p * p;
    match law {
        DispersionLaw::Gp { a } => {
            if !(a >= 0.0) {
                return Err(Error::domain(format!("scattering length must be >= 0, got {a}")));
            }
            Ok((p2 * p2 + 16.0 * PI * a * p2).sqrt())
        }
        DispersionLaw::MeanField { vhat_p } => {
            let arg = p2 * p2 + 2.0 * p2 * vhat_p;
            if !(arg >= 0.0) {
                return Err(Error::domain(format!("p⁴ + 2p²V̂(p) < 0 at |p| = {p}")));
            }
            Ok(arg.sqrt())
        }
    }
}

/// `τ_p = ½ artanh(-V̂(p)/(p² + V̂(p)))`.
pub fn tau(p: f64, vhat_p: f64) -> Result<f64> {
    let p2 = p * p;
    let den = p2 + vhat_p;
    if !(den > 0.0) {
        return Err(Error::domain(format!("p² + V̂(p) = {den} is not positive at |p| = {p}")));
    }
    let arg = -vhat_p / den;
    if !(arg.abs() < 1.0) {
        return Err(Error::domain(format!(
            "artanh argument {arg} outside (-1, 1) at |p| = {p}: coupling is non-perturbative"
        )));
    }
    Ok(0.5 * arg.atanh())
}

/// Inputs for the Bogoliubov coefficient maps; either part may be absent.
#[derive(Clone, Default)]
pub struct CoefficientSource {
    pub vhat: Option<FourierFn>,
    /// Neumann solution on the ball of radius `ℓ₀ < ½` and the particle number.
    pub neumann: Option<(NeumannSolution, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSequences {
    pub tau: Vec<(LatticeMode, f64)>,
    pub eta: Vec<(LatticeMode, f64)>,
    /// `-N ∫ w`, kept for export; the zero mode carries no Bogoliubov pair.
    pub eta_zero: Option<f64>,
    pub eta_zero_used: bool,
}

/// `ŵ(p) = 4π ∫ r² (1 - f(r)) sinc(pr) dr` over the ball of the solution.
pub fn w_hat(sol: &NeumannSolution, p: f64) -> Result<f64> {
    let (a, inner) = match sol.core {
        NeumannCore::HardCore { radius } => (radius, radius),
        NeumannCore::Potential { .. } => (0.0, sol.core_radius()),
    };
    let sinc = |x: f64| if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    let mut total = 0.0;
    if a > 0.0 {
        // w = 1 inside the hard core
        total += if p == 0.0 {
            a.powi(3) / 3.0
        } else {
            let x = p * a;
            (x.sin() - x * x.cos()) / p.powi(3)
        };
    }
    let f = |r: f64| r * r * (1.0 - sol.value(r)) * sinc(p * r);
    let mut edges = vec![a];
    if inner > a {
        edges.push(inner);
    }
    if 0.25 * sol.ell > edges[edges.len() - 1] {
        edges.push(0.25 * sol.ell);
    }
    edges.push(sol.ell);
    for w in edges.windows(2) {
        total += quadrature::integrate(f, w[0], w[1], 1e-16 * sol.ell.powi(3), 1e-13)?.value;
    }
    Ok(4.0 * PI * total)
}

pub fn coefficient_sequences(source: &CoefficientSource, cutoff: f64) -> Result<CoefficientSequences> {
    if !(cutoff >= 2.0 * PI) {
        return Err(Error::domain(format!("mode cutoff must be at least 2π, got {cutoff}")));
    }
    let modes = modes_within(cutoff);
    // every coefficient is radial: evaluate once per squared norm
    let mut shells: Vec<i64> = modes.iter().map(|m| m.n2()).collect();
    shells.sort_unstable();
    shells.dedup();
    let per_shell = |g: &dyn Fn(f64) -> Result<f64>| -> Result<Vec<(LatticeMode, f64)>> {
        let values: Vec<f64> = shells
            .iter()
            .map(|&n2| g(2.0 * PI * (n2 as f64).sqrt()))
            .collect::<Result<_>>()?;
        Ok(modes
            .iter()
            .map(|m| (*m, values[shells.binary_search(&m.n2()).expect("shell present")]))
            .collect())
    };
    let tau_map = match &source.vhat {
        Some(vhat) => per_shell(&|p| tau(p, vhat(p)?))?,
        None => vec![],
    };
    let (eta_map, eta_zero) = match &source.neumann {
        Some((sol, n)) => {
            if !(sol.ell < 0.5) {
                return Err(Error::domain(format!(
                    "ell0 = {} must be below 1/2 so the ball fits in the unit torus",
                    sol.ell
                )));
            }
            let n = *n as f64;
            (per_shell(&|p| Ok(-n * w_hat(sol, p)?))?, Some(-n * w_hat(sol, 0.0)?))
        }
        None => (vec![], None),
    };
    Ok(CoefficientSequences {
        tau: tau_map,
        eta: eta_map,
        eta_zero,
        eta_zero_used: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum RegimeTag {
    Gp,
    MeanField,
    Beta { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub leading: f64,
    pub finite_volume: f64,
    pub correction: f64,
    pub total: f64,
    pub regime_tag: RegimeTag,
}

impl EnergySummary {
    pub fn new(leading: f64, finite_volume: f64, correction: f64, regime_tag: RegimeTag) -> Self {
        Self {
            leading,
            finite_volume,
            correction,
            total: leading + finite_volume + correction,
            regime_tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnergyRegime {
    Gp { n: u64, a: f64 },
    MeanField { n: u64, potential: RadialPotential },
    Beta { n: u64, beta: f64, potential: RadialPotential },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyOptions {
    /// Cube truncation for `e_Λ`.
    pub m_max: u64,
    /// Ball cutoff of the bracket sums.
    pub bracket_cutoff: f64,
    pub tail_correction: bool,
    pub born_order: usize,
    pub born_cutoff: Option<f64>,
    pub born_nested_radius: usize,
    pub reduction: Reduction,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self {
            m_max: 40,
            bracket_cutoff: 80.0 * PI,
            tail_correction: true,
            born_order: 3,
            born_cutoff: None,
            born_nested_radius: 32,
            reduction: Reduction::Deterministic,
        }
    }
}

pub fn ground_state_energy(regime: &EnergyRegime, options: &EnergyOptions) -> Result<EnergySummary> {
    match regime {
        EnergyRegime::Gp { n, a } => {
            if *n < 1 {
                return Err(Error::domain("N must be at least 1"));
            }
            if !(*a >= 0.0) {
                return Err(Error::domain(format!("scattering length must be >= 0, got {a}")));
            }
            let leading = 4.0 * PI * a * (*n as f64 - 1.0);
            let e_lambda = lattice::e_lambda(options.m_max, true)?.value;
            let correction =
                lattice::bracket_sum(&BracketKind::Gp { a: *a }, options.bracket_cutoff, options.tail_correction, options.reduction)?
                    .value;
            Ok(EnergySummary::new(leading, e_lambda * a * a, correction, RegimeTag::Gp))
        }
        EnergyRegime::MeanField { n, potential } => {
            if *n < 1 {
                return Err(Error::domain("N must be at least 1"));
            }
            let vhat0 = potential.fourier(0.0)?;
            let leading = 0.5 * (*n as f64 - 1.0) * vhat0;
            let kind = BracketKind::mean_field_from(potential)?;
            let correction = lattice::bracket_sum(&kind, options.bracket_cutoff, options.tail_correction, options.reduction)?.value;
            Ok(EnergySummary::new(leading, 0.0, correction, RegimeTag::MeanField))
        }
        EnergyRegime::Beta { n, beta, potential } => {
            let regime = ScaledRegime::new(*n, *beta)?;
            let vhat0 = potential.fourier(0.0)?;
            let spec = BornSeriesSpec {
                momentum_cutoff: options.born_cutoff,
                nested_radius: options.born_nested_radius,
                ..BornSeriesSpec::new(potential.clone(), regime, options.born_order)
            };
            let a_n = lattice::born_series(&spec)?.value() / (8.0 * PI);
            let leading = 4.0 * PI * (*n as f64 - 1.0) * a_n;
            let correction =
                lattice::bracket_sum(&BracketKind::BetaRegime { vhat0 }, options.bracket_cutoff, options.tail_correction, options.reduction)?
                    .value;
            Ok(EnergySummary::new(leading, 0.0, correction, RegimeTag::Beta { beta: *beta }))
        }
    }
}

/// One excited level: occupation numbers and total energy `Σ n_p ε(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excitation {
    /// `(mode, n_p)` with `n_p ≥ 1`, in lexicographic mode order.
    pub occupation: Vec<(LatticeMode, u32)>,
    pub energy: f64,
}

impl Excitation {
    pub fn modes_label(&self) -> String {
        self.occupation
            .iter()
            .map(|(m, k)| format!("{k}@{m}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpectrum {
    pub entries: Vec<Excitation>,
    pub threshold: f64,
}

impl ExcitationSpectrum {
    /// CSV with columns `energy,modes`; modes as `n@(i,j,k)` joined by `;`.
    pub fn to_csv(&self, precise: bool) -> String {
        let mut out = String::from("energy,modes\n");
        for e in &self.entries {
            if precise {
                let _ = writeln!(out, "{:.16e},{}", e.energy, e.modes_label());
            } else {
                let _ = writeln!(out, "{},{}", e.energy, e.modes_label());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumLimits {
    pub max_threshold: f64,
    pub max_entries: usize,
}

impl Default for SpectrumLimits {
    fn default() -> Self {
        Self {
            max_threshold: 1e5,
            max_entries: 2_000_000,
        }
    }
}

/// Modes with `ε(p) < zeta`, sorted by energy then lexicographically.
pub fn spectrum_modes(law: &Dispersion, zeta: f64) -> Result<Vec<(LatticeMode, f64)>> {
    let bound = law.momentum_bound(zeta)?;
    let mut modes: Vec<(LatticeMode, f64)> = Vec::new();
    for m in modes_within(bound) {
        let e = law.energy(m.norm())?;
        if e < zeta {
            modes.push((m, e));
        }
    }
    modes.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(modes)
}

fn compare_entries(a: &Excitation, b: &Excitation) -> Ordering {
    a.energy.total_cmp(&b.energy).then_with(|| a.occupation.cmp(&b.occupation))
}

/// All occupation maps with total energy strictly below `zeta`, each once.
///
/// Quanta are added in non-decreasing mode order (modes sorted by energy), so
/// each multiset is generated exactly once and every total is summed in the
/// same order, which makes degenerate energies bit-identical.
pub fn enumerate_excitations(law: &Dispersion, zeta: f64, limits: SpectrumLimits) -> Result<ExcitationSpectrum> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::domain(format!("threshold must be positive and finite, got {zeta}")));
    }
    if zeta > limits.max_threshold {
        return Err(Error::domain(format!(
            "threshold {zeta} exceeds the configured cap {}",
            limits.max_threshold
        )));
    }
    let modes = spectrum_modes(law, zeta)?;
    let count = AtomicUsize::new(1);
    let overflow = |count: &AtomicUsize| count.load(AtomicOrdering::Relaxed) > limits.max_entries;

    fn dfs(
        modes: &[(LatticeMode, f64)],
        start: usize,
        energy: f64,
        zeta: f64,
        stack: &mut Vec<usize>,
        out: &mut Vec<(Vec<usize>, f64)>,
        count: &AtomicUsize,
        cap: usize,
    ) {
        for j in start..modes.len() {
            let e = energy + modes[j].1;
            if e >= zeta {
                break;
            }
            if count.fetch_add(1, AtomicOrdering::Relaxed) >= cap {
                return;
            }
            stack.push(j);
            out.push((stack.clone(), e));
            dfs(modes, j, e, zeta, stack, out, count, cap);
            stack.pop();
        }
    }

    let raw: Vec<(Vec<usize>, f64)> = (0..modes.len())
        .into_par_iter()
        .flat_map_iter(|first| {
            let mut out = Vec::new();
            if !overflow(&count) {
                let e = modes[first].1;
                count.fetch_add(1, AtomicOrdering::Relaxed);
                let mut stack = vec![first];
                out.push((stack.clone(), e));
                dfs(&modes, first, e, zeta, &mut stack, &mut out, &count, limits.max_entries + 1);
            }
            out
        })
        .collect();
    let total = count.load(AtomicOrdering::Relaxed);
    if total > limits.max_entries {
        return Err(Error::Resource {
            message: format!("spectrum below {zeta} has more than {} entries", limits.max_entries),
            estimate: total as u64,
        });
    }
    let mut entries = Vec::with_capacity(raw.len() + 1);
    entries.push(Excitation {
        occupation: vec![],
        energy: 0.0,
    });
    for (quanta, energy) in raw {
        let mut occ: Vec<(LatticeMode, u32)> = Vec::new();
        let mut ms: Vec<LatticeMode> = quanta.iter().map(|&j| modes[j].0).collect();
        ms.sort();
        for m in ms {
            match occ.last_mut() {
                Some((last, k)) if *last == m => *k += 1,
                _ => occ.push((m, 1)),
            }
        }
        entries.push(Excitation { occupation: occ, energy });
    }
    entries.sort_by(compare_entries);
    Ok(ExcitationSpectrum { entries, threshold: zeta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_and_gp_dispersion() {
        let p = 2.0 * PI;
        assert_eq!(dispersion(p, DispersionLaw::Gp { a: 0.0 }).unwrap(), p * p);
        let e = dispersion(p, DispersionLaw::Gp { a: 1.0 }).unwrap();
        assert!((e - (16.0 * PI.powi(4) + 64.0 * PI.powi(3)).sqrt()).abs() < 1e-12);
        assert!((e - 59.52).abs() < 0.01);
        assert!(dispersion(0.0, DispersionLaw::Gp { a: 1.0 }).is_err());
        assert!(dispersion(1.0, DispersionLaw::Gp { a: -1.0 }).is_err());
    }

    #[test]
    fn phonon_regime() {
        let a = 0.5;
        let target = (16.0 * PI * a).sqrt();
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let p = 10f64.powi(-k);
            let dev = (dispersion(p, DispersionLaw::Gp { a }).unwrap() / p - target).abs();
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn tau_signs_and_domain() {
        assert_eq!(tau(3.0, 0.0).unwrap(), 0.0);
        assert!(tau(3.0, 2.0).unwrap() < 0.0);
        assert!(matches!(tau(1.0, -0.6), Err(Error::Domain(_))));
    }

    #[test]
    fn summary_identity() {
        let s = EnergySummary::new(1.0, 1e-17, -3.0, RegimeTag::Gp);
        assert_eq!(s.total, 1.0 + 1e-17 + -3.0);
    }

    #[test]
    fn zero_mode_rejected() {
        assert!(LatticeMode::new([0, 0, 0]).is_err());
        assert_eq!(LatticeMode::new([1, -2, 0]).unwrap().n2(), 5);
    }

    #[test]
    fn csv_labels() {
        let e = Excitation {
            occupation: vec![(LatticeMode { n: [-1, 0, 0] }, 2), (LatticeMode { n: [0, 1, 0] }, 1)],
            energy: 3.0,
        };
        assert_eq!(e.modes_label(), "2@(-1,0,0);1@(0,1,0)");
    }

    #[test]
    fn resource_guard() {
        let err = enumerate_excitations(
            &Dispersion::Gp { a: 0.0 },
            200.0,
            SpectrumLimits {
                max_threshold: 1e4,
                max_entries: 100,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Resource { estimate, .. } if estimate > 100));
    }
}
