//! Truncated lattice sums over `ℤ³` and `2πℤ³`.
//!
//! * `e_lambda`: the conditionally convergent cube sum `Σ cos|p| / p²`.
//! * `bracket_sum`: the absolutely convergent second-order Bogoliubov sums,
//!   truncated on a ball and corrected by their asymptotic tail.
//! * `born_series`: iterated momentum sums for the scattering length of a
//!   scaled potential.
//! * `lhy_integral`: the continuum limit of the GP bracket.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::scattering::{RadialPotential, ScaledRegime};

/// Order of floating-point reductions in parallel sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Reduction {
    /// Fixed sequential order: bit-identical across runs and thread counts.
    #[default]
    Deterministic,
    /// Work-stealing order; agrees with the deterministic result to ~1e-12 relative.
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSumResult {
    pub value: f64,
    /// `(truncation, partial value)` for every truncation computed.
    pub partials: Vec<(u64, f64)>,
    /// `(truncation, extrapolant)`; empty when no acceleration was applied.
    pub extrapolants: Vec<(u64, f64)>,
    pub extrapolated: bool,
    /// Estimated remaining error, always `>= 0`.
    pub diagnostic: f64,
}

impl LatticeSumResult {
    /// CSV text with columns `M,partial,extrapolant`.
    pub fn to_csv(&self, precise: bool) -> String {
        let mut out = String::from("M,partial,extrapolant\n");
        for &(m, v) in &self.partials {
            let ext = self.extrapolants.iter().find(|e| e.0 == m).map(|e| e.1);
            let fmt = |x: f64| if precise { format!("{x:.16e}") } else { format!("{x}") };
            let _ = writeln!(out, "{m},{},{}", fmt(v), ext.map(fmt).unwrap_or_default());
        }
        out
    }
}

/// Number of sign/permutation images of a sorted triple `x ≥ y ≥ z ≥ 0`.
fn multiplicity(x: i64, y: i64, z: i64) -> u64 {
    let perms = if x == y && y == z {
        1
    } else if x == y || y == z {
        3
    } else {
        6
    };
    let signs = [x, y, z].iter().filter(|&&c| c != 0).count() as u32;
    perms * (1u64 << signs)
}

fn cos_term(n2: i64) -> f64 {
    let n2 = n2 as f64;
    n2.sqrt().cos() / n2
}

/// Contribution of the cube shell `max |p_i| = m` to `Σ cos|p| / p²`.
fn cube_shell(m: i64) -> f64 {
    let mut s = 0.0;
    for y in 0..=m {
        for z in 0..=y {
            s += multiplicity(m, y, z) as f64 * cos_term(m * m + y * y + z * z);
        }
    }
    s
}

/// `Σ cos|p| / p²` over the cube `|p_i| ≤ m` by direct enumeration of all points.
pub fn cube_sum_brute_force(m: i64) -> f64 {
    let mut s = 0.0;
    for x in -m..=m {
        for y in -m..=m {
            for z in -m..=m {
                let n2 = x * x + y * y + z * z;
                if n2 > 0 {
                    s += cos_term(n2);
                }
            }
        }
    }
    s
}

/// `Σ cos|p| / p²` over the cube `|p_i| ≤ m` using the 48-fold symmetry.
pub fn cube_sum(m: i64) -> f64 {
    (1..=m).map(cube_shell).sum()
}

/// `∫∫_{[0,c]²} F(√(x² + y² + c²)) dx dy` for the two boundary kernels used
/// by the accelerator, returned as `(∫ c sin r / r³, ∫ (c/r)(-sin r/r² - 2 cos r/r³))`.
fn face_integrals(c: f64) -> (f64, f64) {
    let (nodes, weights) = quadrature::gauss_legendre(8);
    let panels = (2.0 * c).ceil().max(1.0) as usize;
    let width = c / panels as f64;
    let mut xs = Vec::with_capacity(panels * 8);
    let mut ws = Vec::with_capacity(panels * 8);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * width;
        for (x, w) in nodes.iter().zip(&weights) {
            xs.push(mid + 0.5 * width * x);
            ws.push(0.5 * width * w);
        }
    }
    let (mut j, mut k) = (0.0, 0.0);
    for (i, (&x, &wx)) in xs.iter().zip(&ws).enumerate() {
        // the integrand is symmetric in x and y: diagonal once, off-diagonal twice
        for (&y, &wy) in xs[..=i].iter().zip(&ws[..=i]) {
            let w = if y == x { wx * wy } else { 2.0 * wx * wy };
            let r2 = x * x + y * y + c * c;
            let r = r2.sqrt();
            let (s, co) = r.sin_cos();
            let r3 = r2 * r;
            j += w * c * s / r3;
            k += w * (c / r) * (-s / r2 - 2.0 * co / r3);
        }
    }
    (j, k)
}

/// Smooth boundary part of the cube partial sum at half-side `c`:
/// the face integral of the summand's radial derivative plus the first
/// Euler-Maclaurin midpoint correction.
fn boundary_term(c: f64) -> f64 {
    let (j, k) = face_integrals(c);
    // six faces, four quadrants each; the midpoint correction carries a factor -1/24
    24.0 * j - k
}

/// Triangular-window mean of `x[lo..hi]`.
fn triangular_mean(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, v) in x.iter().enumerate() {
        let t = (j as f64 + 0.5) / n;
        let w = 1.0 - (2.0 * t - 1.0).abs();
        num += w * v;
        den += w;
    }
    num / den
}

/// The finite-volume constant `e_Λ = 2 - lim_M Σ_{|p_i| ≤ M} cos|p| / p²`.
///
/// Partials are `2 - S_M`. With `accelerate`, the smooth boundary part of each
/// `S_M` (a face integral at half-side `M + ½` with its midpoint correction)
/// is subtracted and the remainder is averaged with a triangular window over
/// `M/2 < M' ≤ M`; the window mean is the two-pass Cesàro mean of the tail.
pub fn e_lambda(m_max: u64, accelerate: bool) -> Result<LatticeSumResult> {
    if m_max < 2 {
        return Err(Error::domain(format!("M_max must be at least 2, got {m_max}")));
    }
    let m_max_i = i64::try_from(m_max).map_err(|_| Error::domain("M_max too large"))?;
    let shells: Vec<f64> = (1..=m_max_i).into_par_iter().map(cube_shell).collect();
    let mut sums = Vec::with_capacity(shells.len());
    let mut acc = 0.0;
    for s in &shells {
        acc += s;
        sums.push(acc);
    }
    let partials: Vec<(u64, f64)> = sums.iter().enumerate().map(|(i, s)| (i as u64 + 1, 2.0 - s)).collect();
    let quarter = (m_max as usize * 3).div_ceil(4).max(1);
    let spread = |v: &[(u64, f64)]| {
        let tail: Vec<f64> = v.iter().filter(|p| p.0 as usize >= quarter).map(|p| p.1).collect();
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if tail.is_empty() {
            0.0
        } else {
            hi - lo
        }
    };
    if !accelerate {
        return Ok(LatticeSumResult {
            value: partials.last().expect("m_max >= 2").1,
            diagnostic: spread(&partials),
            partials,
            extrapolants: vec![],
            extrapolated: false,
        });
    }
    let smooth: Vec<f64> = (1..=m_max_i)
        .into_par_iter()
        .map(|m| boundary_term(m as f64 + 0.5))
        .collect();
    let reduced: Vec<f64> = sums.iter().zip(&smooth).map(|(s, b)| s - b).collect();
    let mut extrapolants = Vec::new();
    for m in 2..=m_max as usize {
        let lo = m / 2;
        extrapolants.push((m as u64, 2.0 - triangular_mean(&reduced[lo..m])));
    }
    let value = extrapolants.last().expect("m_max >= 2").1;
    let last = extrapolants.iter().rev().take(2).map(|e| e.1).collect::<Vec<_>>();
    let step = if last.len() == 2 { (last[0] - last[1]).abs() } else { 0.0 };
    Ok(LatticeSumResult {
        value,
        diagnostic: spread(&extrapolants).max(step),
        partials,
        extrapolants,
        extrapolated: true,
    })
}

/// Fourier evaluator for the mean-field bracket.
pub type FourierFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// Which second-order bracket to sum.
#[derive(Clone)]
pub enum BracketKind {
    /// `p² + 8πa - √(p⁴ + 16πa p²) - (8πa)²/(2p²)`.
    Gp { a: f64 },
    /// `p² + V̂(p) - √(p⁴ + 2p² V̂(p))`.
    MeanField { vhat: FourierFn },
    /// `p² + V̂(0) - √(p⁴ + 2p² V̂(0)) - V̂(0)²/(2p²)`.
    BetaRegime { vhat0: f64 },
}

impl std::fmt::Debug for BracketKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Gp { a } => write!(f, "Gp {{ a: {a} }}"),
            Self::MeanField { .. } => write!(f, "MeanField"),
            Self::BetaRegime { vhat0 } => write!(f, "BetaRegime {{ vhat0: {vhat0} }}"),
        }
    }
}

impl BracketKind {
    pub fn mean_field_from(potential: &RadialPotential) -> Result<Self> {
        potential.fourier(0.0)?;
        let v = potential.clone();
        Ok(Self::MeanField {
            vhat: Arc::new(move |p| v.fourier(p)),
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Gp { a } if !(*a >= 0.0) => Err(Error::domain(format!("scattering length must be >= 0, got {a}"))),
            Self::BetaRegime { vhat0 } if !(*vhat0 >= 0.0) => {
                Err(Error::domain(format!("V̂(0) must be >= 0, got {vhat0}")))
            }
            _ => Ok(()),
        }
    }

    /// Coupling `g` of the subtracted forms (`8πa` or `V̂(0)`).
    fn coupling(&self) -> Option<f64> {
        match self {
            Self::Gp { a } => Some(8.0 * PI * a),
            Self::BetaRegime { vhat0 } => Some(*vhat0),
            Self::MeanField { .. } => None,
        }
    }
}

/// `s + g - √(s² + 2gs) - g²/(2s)` with `s = p²`, written without cancellation.
pub fn subtracted_bracket(p2: f64, g: f64) -> f64 {
    if g == 0.0 {
        return 0.0;
    }
    let r = (p2 * p2 + 2.0 * g * p2).sqrt();
    let d = p2 + g + r;
    -g * g * g * (1.0 + 2.0 * p2 / (p2 + r)) / (2.0 * p2 * d)
}

/// `s + v - √(s² + 2sv)` with `s = p²`.
pub fn mean_field_bracket(p2: f64, v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let r = (p2 * p2 + 2.0 * p2 * v).sqrt();
    v * v / (p2 + v + r)
}

/// Value of one bracket at `|p|`.
pub fn bracket_term(kind: &BracketKind, p: f64) -> Result<f64> {
    let p2 = p * p;
    match kind {
        BracketKind::MeanField { vhat } => {
            let v = vhat(p)?;
            if p2 + v <= 0.0 || p2 * p2 + 2.0 * p2 * v < 0.0 {
                return Err(Error::domain(format!("bracket undefined at |p| = {p} (V̂ = {v})")));
            }
            Ok(mean_field_bracket(p2, v))
        }
        k => Ok(subtracted_bracket(p2, k.coupling().expect("subtracted kind"))),
    }
}

/// `counts[n²]` = number of `n ∈ ℤ³` with that squared norm, for `n² ≤ max_n2`.
pub fn shell_counts(max_n2: u64) -> Vec<u64> {
    let r = (max_n2 as f64).sqrt().floor() as i64 + 1;
    let max_n2 = max_n2 as i64;
    (0..=r)
        .into_par_iter()
        .fold(
            || vec![0u64; max_n2 as usize + 1],
            |mut acc, x| {
                for y in 0..=x {
                    let xy = x * x + y * y;
                    if xy > max_n2 {
                        break;
                    }
                    for z in 0..=y {
                        let n2 = xy + z * z;
                        if n2 > max_n2 {
                            break;
                        }
                        acc[n2 as usize] += multiplicity(x, y, z);
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; max_n2 as usize + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

fn reduce_sum(values: &[f64], mode: Reduction) -> f64 {
    match mode {
        Reduction::Deterministic => values.iter().sum(),
        Reduction::Fast => values.par_iter().sum(),
    }
}

/// `-½ Σ` of the `-g³/(2p⁴) + 5g⁴/(8p⁶)` asymptote over `|p| > Λ`, as an integral.
fn asymptotic_tail(g: f64, lambda: f64) -> (f64, f64) {
    let leading = -g.powi(3) / (4.0 * PI * PI * lambda);
    let next = 5.0 * g.powi(4) / (48.0 * PI * PI * lambda.powi(3));
    (-0.5 * (leading + next), (0.5 * next).abs())
}

/// Radius of the ball whose volume equals the lattice cells counted so far.
fn effective_radius(points_including_origin: u64) -> f64 {
    2.0 * PI * (3.0 * points_including_origin as f64 / (4.0 * PI)).cbrt()
}

/// `-½ Σ_{p ∈ 2πℤ³∖{0}, |p| ≤ cutoff}` of the chosen bracket.
///
/// With `tail_correction`, the part beyond the cutoff is added as an integral:
/// from the two-term asymptote for the subtracted brackets, by radial
/// quadrature for the mean-field one. The integral starts at the radius whose
/// ball volume matches the lattice points included, which removes most of the
/// boundary-count fluctuation. `diagnostic` is the largest change of the
/// corrected value over truncations in `[cutoff/2, cutoff]`, plus the size of
/// the next-order tail coefficient.
pub fn bracket_sum(kind: &BracketKind, cutoff: f64, tail_correction: bool, mode: Reduction) -> Result<LatticeSumResult> {
    kind.validate()?;
    if !(cutoff >= 2.0 * PI) || !cutoff.is_finite() {
        return Err(Error::domain(format!("cutoff must be at least 2π, got {cutoff}")));
    }
    let max_n2 = ((cutoff / (2.0 * PI)).powi(2) * (1.0 + 1e-15)).floor() as u64;
    let counts = shell_counts(max_n2);
    let shells: Vec<u64> = (1..=max_n2).filter(|&n2| counts[n2 as usize] > 0).collect();
    let term = |n2: u64| -> Result<f64> {
        let p = 2.0 * PI * (n2 as f64).sqrt();
        Ok(-0.5 * counts[n2 as usize] as f64 * bracket_term(kind, p)?)
    };
    let contributions: Vec<f64> = match mode {
        Reduction::Deterministic => shells.iter().map(|&n2| term(n2)).collect::<Result<_>>()?,
        Reduction::Fast => shells.par_iter().map(|&n2| term(n2)).collect::<Result<_>>()?,
    };
    let tail = |points: u64| -> Result<(f64, f64)> {
        if !tail_correction {
            return Ok((0.0, 0.0));
        }
        let lambda = effective_radius(points);
        match kind.coupling() {
            Some(g) => Ok(asymptotic_tail(g, lambda)),
            None => {
                let BracketKind::MeanField { vhat } = kind else { unreachable!() };
                let mut failure = None;
                let integral = quadrature::integrate_to_infinity(
                    |p| match vhat(p) {
                        Ok(v) => p * p * mean_field_bracket(p * p, v),
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    },
                    lambda,
                    1e-300,
                    1e-8,
                )?;
                if let Some(e) = failure {
                    return Err(e);
                }
                let value = -0.5 * integral.value / (2.0 * PI * PI);
                Ok((value, integral.error / (4.0 * PI * PI)))
            }
        }
    };

    // partials at integer radii in lattice units, corrected by their own tail
    let radius_max = (max_n2 as f64).sqrt().floor() as u64;
    let mut partials = Vec::with_capacity(radius_max as usize);
    let mut running = 0.0;
    let mut points = 1u64;
    let mut idx = 0;
    for k in 1..=radius_max {
        let lim = k * k;
        let start = idx;
        while idx < shells.len() && shells[idx] <= lim {
            points += counts[shells[idx] as usize];
            idx += 1;
        }
        running += reduce_sum(&contributions[start..idx], Reduction::Deterministic);
        partials.push((k, running + tail(points)?.0));
    }
    while idx < shells.len() {
        points += counts[shells[idx] as usize];
        idx += 1;
    }
    let raw = reduce_sum(&contributions, mode);
    let (tail_value, tail_err) = tail(points)?;
    let value = raw + tail_value;
    let half = radius_max / 2;
    let drift = partials
        .iter()
        .filter(|p| p.0 >= half.max(1))
        .map(|p| (p.1 - value).abs())
        .fold(0.0, f64::max);
    Ok(LatticeSumResult {
        value,
        partials,
        extrapolants: vec![],
        extrapolated: tail_correction,
        diagnostic: drift + tail_err,
    })
}

/// Brute-force enumeration of the same truncated bracket sum (no tail), for checks.
pub fn bracket_sum_brute_force(kind: &BracketKind, cutoff: f64) -> Result<f64> {
    kind.validate()?;
    let r = (cutoff / (2.0 * PI)).floor() as i64;
    let mut s = 0.0;
    for x in -r..=r {
        for y in -r..=r {
            for z in -r..=r {
                let n2 = x * x + y * y + z * z;
                let p = 2.0 * PI * (n2 as f64).sqrt();
                if n2 > 0 && p <= cutoff * (1.0 + 1e-15) {
                    s += bracket_term(kind, p)?;
                }
            }
        }
    }
    Ok(-0.5 * s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornSeriesSpec {
    pub potential: RadialPotential,
    pub regime: ScaledRegime,
    /// Highest order `m`; order 1 is `V̂(0)`.
    pub order: usize,
    /// Momentum cutoff of the single sum; `None` picks 8 Fourier widths `2π N^β / R`.
    pub momentum_cutoff: Option<f64>,
    /// Ball radius (lattice units) of the nested sums evaluated by FFT convolution.
    pub nested_radius: usize,
    /// Allowed estimated truncation error of the second-order sum, relative to `V̂(0)`.
    pub tail_tolerance: f64,
}

impl BornSeriesSpec {
    pub fn new(potential: RadialPotential, regime: ScaledRegime, order: usize) -> Self {
        Self {
            potential,
            regime,
            order,
            momentum_cutoff: None,
            nested_radius: 32,
            tail_tolerance: 1e-6,
        }
    }

    pub fn scale(&self) -> f64 {
        (self.regime.n_particles as f64).powf(self.regime.beta)
    }

    pub fn default_cutoff(&self) -> f64 {
        let support = self.potential.support_radius();
        8.0 * 2.0 * PI * self.scale() / support
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornSeries {
    /// Cumulative values of `8π a_N^β` for orders `1..=m`.
    pub partials: Vec<f64>,
    /// `partials[k] - partials[k-1]`, the individual Born terms beyond the first.
    pub steps: Vec<f64>,
    pub cutoff: f64,
    /// Estimated truncation error of the second-order sum.
    pub tail_estimate: f64,
}

impl BornSeries {
    pub fn value(&self) -> f64 {
        *self.partials.last().expect("order >= 1")
    }
}

const MAX_FFT_POINTS: usize = 1 << 24;

/// Finite Born series
/// `8π a_N^β = V̂(0) + Σ_{k≥1} (-1)^k/(2N)^k Σ_p K(p)/p² χ_k(p)`,
/// with `K(p) = V̂(p/N^β)`, `χ_1 = K` and `χ_{j+1}(p) = Σ_{q≠0} K(p-q)/q² χ_j(q)`.
///
/// The first correction is a single radial sum up to the momentum cutoff; the
/// nested terms are circular convolutions on a grid large enough that no
/// difference `p - q` of two points in the nested ball wraps around.
pub fn born_series(spec: &BornSeriesSpec) -> Result<BornSeries> {
    if spec.order < 1 {
        return Err(Error::domain("Born order must be at least 1"));
    }
    if spec.potential.is_hard_core() {
        return Err(Error::domain("non-integrable potential (hard core has no Born series)"));
    }
    let vhat0 = spec.potential.fourier(0.0)?;
    if spec.potential.is_trivial() {
        return Ok(BornSeries {
            partials: vec![0.0; spec.order],
            steps: vec![0.0; spec.order - 1],
            cutoff: 0.0,
            tail_estimate: 0.0,
        });
    }
    let n = spec.regime.n_particles as f64;
    let scale = spec.scale();
    let cutoff = spec.momentum_cutoff.unwrap_or_else(|| spec.default_cutoff());
    if !(cutoff >= 2.0 * PI * scale) {
        return Err(Error::domain(format!(
            "cutoff {cutoff} below the scaled support scale 2πN^β = {}",
            2.0 * PI * scale
        )));
    }
    let kernel = |p: f64| spec.potential.fourier(p / scale);

    let mut partials = vec![vhat0];
    let mut tail_estimate = 0.0;
    if spec.order >= 2 {
        let max_n2 = ((cutoff / (2.0 * PI)).powi(2) * (1.0 + 1e-15)).floor() as u64;
        let counts = shell_counts(max_n2);
        let mut sum = 0.0;
        for n2 in 1..=max_n2 {
            let c = counts[n2 as usize];
            if c == 0 {
                continue;
            }
            let p2 = 4.0 * PI * PI * n2 as f64;
            let k = kernel(p2.sqrt())?;
            sum += c as f64 * k * k / p2;
        }
        let term = -sum / (2.0 * n);
        let points = counts.iter().sum::<u64>();
        let lambda = effective_radius(points);
        let tail = quadrature::integrate_to_infinity(
            |p| kernel(p).map(|k| k * k).unwrap_or(0.0),
            lambda,
            1e-300,
            1e-6,
        )?;
        tail_estimate = tail.value / (2.0 * PI * PI) / (2.0 * n);
        if tail_estimate > spec.tail_tolerance * vhat0.abs() {
            // the tail decays like Λ^-3
            let needed = cutoff * (tail_estimate / (spec.tail_tolerance * vhat0.abs())).cbrt();
            return Err(Error::accuracy(
                format!("momentum cutoff {cutoff:.6e} leaves an estimated tail of {tail_estimate:.3e}"),
                Some(needed),
            ));
        }
        partials.push(vhat0 + term);
    }
    if spec.order >= 3 {
        let nested = nested_terms(&kernel, spec.nested_radius, spec.order - 2, n)?;
        for t in nested {
            let last = *partials.last().expect("non-empty");
            partials.push(last + t);
        }
    }
    let steps = partials.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(BornSeries {
        partials,
        steps,
        cutoff,
        tail_estimate,
    })
}

/// Smallest `n ≥ m` whose only prime factors are 2, 3 and 5.
fn fft_friendly(m: usize) -> usize {
    let mut n = m.max(1);
    loop {
        let mut k = n;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return n;
        }
        n += 1;
    }
}

struct Grid3 {
    size: usize,
    planner: FftPlanner<f64>,
}

impl Grid3 {
    fn transform(&mut self, data: &mut [Complex<f64>], inverse: bool) {
        let s = self.size;
        let fft = if inverse {
            self.planner.plan_fft_inverse(s)
        } else {
            self.planner.plan_fft_forward(s)
        };
        // axis 2 is contiguous
        fft.process(data);
        let mut line = vec![Complex::new(0.0, 0.0); s];
        for axis_stride in [s, s * s] {
            for base in 0..s * s {
                // enumerate line starts orthogonal to the current axis
                let (outer, inner) = (base / s, base % s);
                let start = if axis_stride == s {
                    outer * s * s + inner
                } else {
                    outer * s + inner
                };
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[start + i * axis_stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[start + i * axis_stride] = *v;
                }
            }
        }
    }
}

fn signed(i: usize, s: usize) -> i64 {
    if i <= s / 2 {
        i as i64
    } else {
        i as i64 - s as i64
    }
}

/// Terms `k = 2..=2+count-1` of the Born series by FFT convolution on a ball of `radius`.
fn nested_terms(kernel: &dyn Fn(f64) -> Result<f64>, radius: usize, count: usize, n: f64) -> Result<Vec<f64>> {
    let s = fft_friendly(4 * radius + 1);
    let total = s * s * s;
    if total > MAX_FFT_POINTS {
        return Err(Error::Resource {
            message: format!("nested Born grid of side {s} exceeds the memory guard"),
            estimate: total as u64,
        });
    }
    let r2 = (radius * radius) as i64;
    let mut kgrid = vec![Complex::new(0.0, 0.0); total];
    let mut ball = vec![0.0f64; total]; // K(q)/q² on the ball, 0 elsewhere
    let mut kq = vec![0.0f64; total];
    for i in 0..s {
        let x = signed(i, s);
        for j in 0..s {
            let y = signed(j, s);
            for k in 0..s {
                let z = signed(k, s);
                let n2 = x * x + y * y + z * z;
                let idx = (i * s + j) * s + k;
                let kv = kernel(2.0 * PI * (n2 as f64).sqrt())?;
                kgrid[idx] = Complex::new(kv, 0.0);
                if n2 > 0 && n2 <= r2 {
                    kq[idx] = kv;
                    ball[idx] = 1.0 / (4.0 * PI * PI * n2 as f64);
                }
            }
        }
    }
    let mut g = Grid3 {
        size: s,
        planner: FftPlanner::new(),
    };
    g.transform(&mut kgrid, false);
    let norm = 1.0 / total as f64;
    let mut chi: Vec<f64> = kq.clone();
    let mut out = Vec::with_capacity(count);
    for k in 2..2 + count {
        let mut psi: Vec<Complex<f64>> = chi.iter().zip(&ball).map(|(c, b)| Complex::new(c * b, 0.0)).collect();
        g.transform(&mut psi, false);
        for (p, kf) in psi.iter_mut().zip(&kgrid) {
            *p *= kf;
        }
        g.transform(&mut psi, true);
        chi = psi.iter().map(|c| c.re * norm).collect();
        let sum: f64 = (0..total).map(|i| kq[i] * ball[i] * chi[i]).sum();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        out.push(sign * sum / (2.0 * n).powi(k as i32));
    }
    Ok(out)
}

/// Nested Born terms by direct summation over the ball (quadratic cost per order).
pub fn born_nested_direct(potential: &RadialPotential, regime: &ScaledRegime, radius: usize, count: usize) -> Result<Vec<f64>> {
    let scale = (regime.n_particles as f64).powf(regime.beta);
    let n = regime.n_particles as f64;
    let r = radius as i64;
    let mut pts = Vec::new();
    for x in -r..=r {
        for y in -r..=r {
            for z in -r..=r {
                let n2 = x * x + y * y + z * z;
                if n2 > 0 && n2 <= r * r {
                    pts.push([x, y, z]);
                }
            }
        }
    }
    let kernel = |d: [i64; 3]| -> Result<f64> {
        let n2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64;
        potential.fourier(2.0 * PI * n2.sqrt() / scale)
    };
    let inv_p2: Vec<f64> = pts
        .iter()
        .map(|p| 1.0 / (4.0 * PI * PI * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) as f64))
        .collect();
    let kq: Vec<f64> = pts.iter().map(|&p| kernel(p)).collect::<Result<_>>()?;
    let mut chi = kq.clone();
    let mut out = Vec::with_capacity(count);
    for k in 2..2 + count {
        let next: Vec<f64> = pts
            .iter()
            .map(|p| {
                let mut s = 0.0;
                for (qi, q) in pts.iter().enumerate() {
                    s += kernel([p[0] - q[0], p[1] - q[1], p[2] - q[2]])? * inv_p2[qi] * chi[qi];
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;
        chi = next;
        let sum: f64 = (0..pts.len()).map(|i| kq[i] * inv_p2[i] * chi[i]).sum();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        out.push(sign * sum / (2.0 * n).powi(k as i32));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhyResult {
    /// Second-order energy per particle.
    pub energy_per_particle: f64,
    /// Ratio to `4πaρ · 128/(15√π) · (ρa³)^{1/2}`; `None` when `a = 0`.
    pub ratio: Option<f64>,
}

pub fn lhy_coefficient() -> f64 {
    128.0 / (15.0 * PI.sqrt())
}

/// Second-order energy per particle `-(1/2ρ) ∫ d³p/(2π)³ [bracket at g = 8πaρ]`.
pub fn lhy_integral(a: f64, rho: f64) -> Result<LhyResult> {
    if !(a >= 0.0 && a.is_finite()) || !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("need a >= 0 and rho > 0, got a = {a}, rho = {rho}")));
    }
    let gas = rho * a.powi(3);
    if !(gas < 1e-2) {
        return Err(Error::domain(format!("rho a³ = {gas} is not dilute (< 1e-2)")));
    }
    if a == 0.0 {
        return Ok(LhyResult {
            energy_per_particle: 0.0,
            ratio: None,
        });
    }
    let g = 8.0 * PI * a * rho;
    let scale = g.sqrt();
    let f = |p: f64| {
        if p == 0.0 {
            -0.5 * g * g
        } else {
            p * p * subtracted_bracket(p * p, g)
        }
    };
    let abs = 1e-15 * g.powf(2.5);
    let inner = quadrature::integrate(f, 0.0, 4.0 * scale, abs, 1e-13)?;
    let outer = quadrature::integrate_to_infinity(f, 4.0 * scale, abs, 1e-13)?;
    let integral = inner.value + outer.value;
    let energy = -integral / (2.0 * PI * PI) / (2.0 * rho);
    let reference = 4.0 * PI * a * rho * lhy_coefficient() * gas.sqrt();
    Ok(LhyResult {
        energy_per_particle: energy,
        ratio: Some(energy / reference),
    })
}
