//! Radial two-body potentials and the zero-energy scattering problem.
//!
//! The scattering solution solves `[-Δ + V/2] f = 0` with `f -> 1` at
//! infinity. In the radial variable `w(r) = r f(r)` this is `w'' = V(r) w / 2`,
//! and beyond the support of `V` the solution is exactly linear,
//! `w ∝ r - a`, which defines the scattering length `a`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::quadrature;

/// Samples `(radius, value)` of a tabulated potential.
///
/// Radii are strictly increasing and values non-negative. Between samples the
/// potential is linearly interpolated; below the first sample it is held at
/// the first value and beyond the last sample it is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl Table {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::domain("tabulated potential needs at least one sample"));
        }
        let mut radii = Vec::with_capacity(samples.len());
        let mut values = Vec::with_capacity(samples.len());
        for (i, &(r, v)) in samples.iter().enumerate() {
            if !r.is_finite() || !v.is_finite() || r < 0.0 {
                return Err(Error::domain(format!("invalid sample ({r}, {v}) at row {i}")));
            }
            if v < 0.0 {
                return Err(Error::domain(format!(
                    "tabulated potential has negative value {v} at r = {r}"
                )));
            }
            if let Some(&last) = radii.last() {
                if r <= last {
                    return Err(Error::domain(format!(
                        "tabulated radii must be strictly increasing (row {i}: {r} <= {last})"
                    )));
                }
            }
            radii.push(r);
            values.push(v);
        }
        Ok(Self { radii, values })
    }

    /// Reads the two-column text format: radius and value separated by
    /// whitespace, `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::domain(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::domain(format!("line {}: cannot parse '{s}'", lineno + 1)))
            };
            samples.push((parse(cols[0])?, parse(cols[1])?));
        }
        Self::new(samples)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::domain(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.radii.iter().copied().zip(self.values.iter().copied())
    }

    fn value(&self, r: f64) -> f64 {
        let n = self.radii.len();
        if r <= self.radii[0] {
            return self.values[0];
        }
        if r > self.radii[n - 1] {
            return 0.0;
        }
        let i = self.radii.partition_point(|&x| x < r);
        let (r0, r1) = (self.radii[i - 1], self.radii[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (r - r0) / (r1 - r0)
    }

    fn support(&self) -> f64 {
        match self.values.iter().rposition(|&v| v > 0.0) {
            None => 0.0,
            Some(i) if i + 1 < self.radii.len() => self.radii[i + 1],
            Some(i) => self.radii[i],
        }
    }

    fn scaled(&self, length: f64, height: f64) -> Self {
        Self {
            radii: self.radii.iter().map(|r| r * length).collect(),
            values: self.values.iter().map(|v| v * height).collect(),
        }
    }
}

/// A repulsive, radial, compactly supported two-body interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialPotential {
    HardSphere { radius: f64 },
    SoftSphere { height: f64, radius: f64 },
    Tabulated { table: Table },
    Zero,
}

impl RadialPotential {
    pub fn hard_sphere(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::domain(format!("hard-sphere radius must be >= 0, got {radius}")));
        }
        Ok(Self::HardSphere { radius })
    }

    pub fn soft_sphere(height: f64, radius: f64) -> Result<Self> {
        if !(height.is_finite() && height >= 0.0) {
            return Err(Error::domain(format!("soft-sphere height must be >= 0, got {height}")));
        }
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::domain(format!("soft-sphere radius must be >= 0, got {radius}")));
        }
        Ok(Self::SoftSphere { height, radius })
    }

    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self> {
        Ok(Self::Tabulated {
            table: Table::new(samples)?,
        })
    }

    /// Smallest `R` with `V(r) = 0` for every `r > R`.
    pub fn support_radius(&self) -> f64 {
        match self {
            Self::HardSphere { radius } => *radius,
            Self::SoftSphere { height, radius } => {
                if *height > 0.0 {
                    *radius
                } else {
                    0.0
                }
            }
            Self::Tabulated { table } => table.support(),
            Self::Zero => 0.0,
        }
    }

    /// `V(r)`; the hard core is `+inf` for `r < radius`.
    pub fn value(&self, r: f64) -> f64 {
        match self {
            Self::HardSphere { radius } => {
                if r < *radius {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Self::SoftSphere { height, radius } => {
                if r <= *radius {
                    *height
                } else {
                    0.0
                }
            }
            Self::Tabulated { table } => table.value(r),
            Self::Zero => 0.0,
        }
    }

    pub fn is_hard_core(&self) -> bool {
        matches!(self, Self::HardSphere { radius } if *radius > 0.0)
    }

    pub fn is_trivial(&self) -> bool {
        self.support_radius() == 0.0
    }

    /// Radii where the potential has kinks or jumps.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::HardSphere { radius } | Self::SoftSphere { radius, .. } => vec![*radius],
            Self::Tabulated { table } => {
                let s = table.support();
                table.radii.iter().copied().filter(|&r| r > 0.0 && r <= s).collect()
            }
            Self::Zero => vec![],
        }
    }

    /// Closed-form Fourier transform `4π ∫ r² V(r) sinc(pr) dr`.
    ///
    /// Exact for soft spheres and for piecewise-linear tables; this is the
    /// fast path used inside lattice sums. [`fourier_coefficient`] computes the
    /// same quantity by adaptive quadrature.
    pub fn fourier(&self, p: f64) -> Result<f64> {
        let p = p.abs();
        match self {
            Self::HardSphere { radius } if *radius > 0.0 => {
                Err(Error::domain("non-integrable potential (hard core has no Fourier transform)"))
            }
            Self::HardSphere { .. } | Self::Zero => Ok(0.0),
            Self::SoftSphere { height, radius } => Ok(4.0 * PI * height * ball_moment(p, *radius)),
            Self::Tabulated { table } => {
                let mut total = 0.0;
                // constant piece on [0, r_0]
                total += table.values[0] * ball_moment(p, table.radii[0]);
                for i in 1..table.radii.len() {
                    let (r0, r1) = (table.radii[i - 1], table.radii[i]);
                    let (v0, v1) = (table.values[i - 1], table.values[i]);
                    let slope = (v1 - v0) / (r1 - r0);
                    let c0 = v0 - slope * r0;
                    total += c0 * (ball_moment(p, r1) - ball_moment(p, r0))
                        + slope * (cubic_moment(p, r1) - cubic_moment(p, r0));
                }
                Ok(4.0 * PI * total)
            }
        }
    }

    /// The potential `r -> N^(3β-1) V(N^β r)`.
    pub fn scale(&self, regime: &ScaledRegime) -> Self {
        let n = regime.n_particles as f64;
        let length = n.powf(-regime.beta);
        let height = n.powf(3.0 * regime.beta - 1.0);
        match self {
            Self::HardSphere { radius } => Self::HardSphere {
                radius: radius * length,
            },
            Self::SoftSphere { height: h, radius } => Self::SoftSphere {
                height: h * height,
                radius: radius * length,
            },
            Self::Tabulated { table } => Self::Tabulated {
                table: table.scaled(length, height),
            },
            Self::Zero => Self::Zero,
        }
    }
}

/// `∫_0^R r² sinc(pr) dr`, stable at small `pR`.
fn ball_moment(p: f64, r: f64) -> f64 {
    let x = p * r;
    if x < 1e-2 {
        let x2 = x * x;
        r * r * r * (1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2 * x2 * x2 / 45360.0)
    } else {
        (x.sin() - x * x.cos()) / (p * p * p)
    }
}

/// `∫_0^R r³ sinc(pr) dr`, stable at small `pR`.
fn cubic_moment(p: f64, r: f64) -> f64 {
    let x = p * r;
    if x < 1e-2 {
        let x2 = x * x;
        r.powi(4) * (1.0 / 4.0 - x2 / 36.0 + x2 * x2 / 960.0 - x2 * x2 * x2 / 50400.0)
    } else {
        // (1/p) ∫ r² sin(pr) dr = (1/p) [2r sin/p² + (2/p³ - r²/p) cos]_0^R
        (2.0 * x * x.sin() + (2.0 - x * x) * x.cos() - 2.0) / p.powi(4)
    }
}

impl fmt::Display for RadialPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::HardSphere { radius } => write!(f, "hard:{radius}"),
            Self::SoftSphere { height, radius } => write!(f, "soft:{height},{radius}"),
            Self::Tabulated { table } => write!(f, "table[{} samples]", table.radii.len()),
            Self::Zero => write!(f, "zero"),
        }
    }
}

/// Parses `hard:<radius>`, `soft:<height>,<radius>`, `table:<path>` or `zero`.
impl FromStr for RadialPotential {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(Self::Zero);
        }
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("unrecognised potential '{s}'")))?;
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("cannot parse number '{t}' in '{s}'")))
        };
        match kind {
            "hard" => Self::hard_sphere(num(rest)?),
            "soft" => {
                let (h, r) = rest
                    .split_once(',')
                    .ok_or_else(|| Error::domain(format!("expected soft:<height>,<radius>, got '{s}'")))?;
                Self::soft_sphere(num(h)?, num(r)?)
            }
            "table" => Ok(Self::Tabulated {
                table: Table::from_path(Path::new(rest))?,
            }),
            _ => Err(Error::domain(format!("unknown potential kind '{kind}'"))),
        }
    }
}

/// Particle number and scaling exponent of the family `N^(3β-1) V(N^β ·)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledRegime {
    pub n_particles: u64,
    pub beta: f64,
}

impl ScaledRegime {
    pub fn new(n_particles: u64, beta: f64) -> Result<Self> {
        if n_particles < 1 {
            return Err(Error::domain("N must be at least 1"));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::domain(format!("beta must lie in [0, 1], got {beta}")));
        }
        Ok(Self { n_particles, beta })
    }
}

pub fn scale_potential(v: &RadialPotential, regime: &ScaledRegime) -> RadialPotential {
    v.scale(regime)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSolution {
    pub scattering_length: f64,
    /// `(r, f(r))`, normalized so that `f ≃ 1 - a/r` beyond the support.
    pub profile: Vec<(f64, f64)>,
    /// RMS deviation of `w = r f` from its straight-line fit, relative to the slope times `r_max`.
    pub fit_residual: f64,
    pub converged: bool,
}

/// Solves the zero-energy scattering equation and extracts the scattering length.
pub fn scattering_length(v: &RadialPotential, r_max: f64, tol: f64) -> Result<ScatteringSolution> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let support = v.support_radius();
    if !(r_max.is_finite() && r_max > 2.0 * support && r_max > 0.0) {
        return Err(Error::domain(format!(
            "r_max = {r_max} must exceed twice the support radius {support}"
        )));
    }
    if v.is_trivial() {
        return Ok(ScatteringSolution {
            scattering_length: 0.0,
            profile: vec![(0.0, 1.0), (r_max, 1.0)],
            fit_residual: 0.0,
            converged: true,
        });
    }

    let (start, mut segments) = match v {
        RadialPotential::HardSphere { radius } => (*radius, vec![]),
        _ => (0.0, v.breakpoints()),
    };
    segments.retain(|&b| b > start);
    segments.push(r_max);
    segments.dedup();

    let rel_tol = tol.clamp(1e-14, 1e-6);
    let abs_tol = rel_tol * 1e-6 * support.max(f64::MIN_POSITIVE);
    let mut samples: Vec<(f64, f64, f64)> = vec![(start, 0.0, 1.0)];
    let mut state = [0.0, 1.0];
    let mut r = start;
    for &end in &segments {
        let inside = end <= support;
        let width = end - r;
        let max_step = if inside { width / 40.0 } else { width / 400.0 };
        let ctl = StepControl::new(rel_tol, abs_tol).with_max_step(max_step);
        let pot = v.clone();
        // evaluate V strictly inside the segment so jumps at breakpoints are never straddled
        let (seg_lo, seg_hi) = (r, end);
        let nudge = (seg_hi - seg_lo) * 1e-12;
        state = ode::integrate(
            |x, y| {
                let xv = x.clamp(seg_lo + nudge, seg_hi - nudge);
                [y[1], 0.5 * pot.value(xv) * y[0]]
            },
            r,
            state,
            end,
            ctl,
            |x, y| {
                samples.push((x, y[0], y[1]));
                let big = y[0].abs().max(y[1].abs());
                if big > 1e100 {
                    let f = 1.0 / big;
                    for s in samples.iter_mut() {
                        s.1 *= f;
                        s.2 *= f;
                    }
                    f
                } else {
                    1.0
                }
            },
        )?;
        r = end;
    }
    debug_assert_eq!(state[0], samples.last().unwrap().1);

    // least squares w = s r + b over the outer 20% of [support, r_max]
    let fit_lo = support + 0.8 * (r_max - support);
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.0 >= fit_lo)
        .map(|s| (s.0, s.1))
        .collect();
    if pts.len() < 2 {
        return Err(Error::solver("not enough samples in the asymptotic fit region"));
    }
    let n = pts.len() as f64;
    let mean_r = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_w = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_r).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_r) * (p.1 - mean_w)).sum();
    let slope = sxy / sxx;
    let intercept = mean_w - slope * mean_r;
    if !(slope > 0.0) {
        return Err(Error::solver("asymptotic slope is not positive"));
    }
    let a = -intercept / slope;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let fit_residual = rms / (slope * r_max);

    let mut profile = Vec::with_capacity(samples.len() + 1);
    if start > 0.0 {
        profile.push((0.0, 0.0));
    }
    for &(x, w, dw) in &samples {
        let f = if x > 0.0 { w / (slope * x) } else { dw / slope };
        profile.push((x, f));
    }
    Ok(ScatteringSolution {
        scattering_length: a,
        profile,
        fit_residual,
        converged: fit_residual <= tol.max(1e-12),
    })
}

/// `V̂(p) = 4π ∫_0^R r² V(r) sinc(|p| r) dr` by adaptive quadrature.
pub fn fourier_coefficient(v: &RadialPotential, p_norm: f64) -> Result<f64> {
    if v.is_hard_core() {
        return Err(Error::domain("non-integrable potential (hard core has no Fourier transform)"));
    }
    if v.is_trivial() {
        return Ok(0.0);
    }
    let p = p_norm.abs();
    let mut edges = vec![0.0];
    edges.extend(v.breakpoints());
    edges.dedup();
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let pot = v.clone();
        // sample V strictly inside each piece; Kronrod nodes never hit the ends
        let integrand = |r: f64| {
            let x = p * r;
            let sinc = if x < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
            let rv = mid + (r - mid).clamp(-half, half);
            r * r * pot.value(rv) * sinc
        };
        let scale = pot.value(mid).abs().max(1e-300) * hi.powi(3);
        total += quadrature::integrate(integrand, lo, hi, 1e-15 * scale, 1e-13)?.value;
    }
    Ok(4.0 * PI * total)
}
