//! Ground state of the radial Neumann problem on a ball.
//!
//! Solves `-Δf + ½U f = λ f` on `|x| ≤ ℓ` with `f'(ℓ) = 0`, `f(ℓ) = 1`, where
//! the core is either a hard sphere (`f = 0` on `|x| ≤ a`) or a soft potential
//! `U`. Beyond `ℓ` the profile is `f ≡ 1` by convention; every evaluator here
//! honours that extension.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::quadrature::simpson_uniform;
use crate::scattering::RadialPotential;

/// Intervals per grid segment (even, for Simpson).
pub const DEFAULT_SEGMENT_INTERVALS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NeumannCore {
    HardCore { radius: f64 },
    Potential { potential: RadialPotential },
}

impl NeumannCore {
    pub fn hard(radius: f64) -> Self {
        Self::HardCore { radius }
    }

    pub fn potential(potential: RadialPotential) -> Self {
        match potential {
            RadialPotential::HardSphere { radius } => Self::HardCore { radius },
            p => Self::Potential { potential: p },
        }
    }

    /// Radius beyond which the core no longer acts.
    pub fn extent(&self) -> f64 {
        match self {
            Self::HardCore { radius } => *radius,
            Self::Potential { potential } => potential.support_radius(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.extent() == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Spacing {
    Uniform,
    Logarithmic,
}

/// Half-open index range `[start, end]` of one grid segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Segment {
    start: usize,
    end: usize,
    spacing: Spacing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannSolution {
    pub ell: f64,
    pub core: NeumannCore,
    pub eigenvalue: f64,
    /// `(r, f(r))` on `[core, ℓ]` (hard core) or `[0, ℓ]` (potential core).
    pub profile: Vec<(f64, f64)>,
    /// `(r, 1 - f(r)²)` on the same grid.
    pub u_profile: Vec<(f64, f64)>,
    derivative: Vec<f64>,
    segments: Vec<Segment>,
    /// Hard core only: `f = amplitude · sin(k (r - a)) / r`.
    closed_form: Option<(f64, f64)>,
}

impl NeumannSolution {
    pub fn core_radius(&self) -> f64 {
        self.core.extent()
    }

    /// `f(r)`, extended by 1 beyond `ℓ` and by 0 inside a hard core.
    pub fn value(&self, r: f64) -> f64 {
        if r >= self.ell {
            return 1.0;
        }
        if let Some((k, amp)) = self.closed_form {
            let a = self.core_radius();
            if r <= a {
                return 0.0;
            }
            return amp * (k * (r - a)).sin() / r;
        }
        if self.core.is_trivial() {
            return 1.0;
        }
        self.hermite(r).0
    }

    /// `f'(r)`; zero outside `(core, ℓ)`.
    pub fn derivative(&self, r: f64) -> f64 {
        if r >= self.ell {
            return 0.0;
        }
        if let Some((k, amp)) = self.closed_form {
            let a = self.core_radius();
            if r <= a {
                return 0.0;
            }
            let x = k * (r - a);
            return amp * (k * r * x.cos() - x.sin()) / (r * r);
        }
        if self.core.is_trivial() {
            return 0.0;
        }
        self.hermite(r).1
    }

    pub fn u(&self, r: f64) -> f64 {
        let f = self.value(r);
        1.0 - f * f
    }

    /// Derivative samples matching `profile`.
    pub fn derivative_samples(&self) -> &[f64] {
        &self.derivative
    }

    fn hermite(&self, r: f64) -> (f64, f64) {
        let p = &self.profile;
        if r <= p[0].0 {
            return (p[0].1, self.derivative[0]);
        }
        let i = p.partition_point(|s| s.0 < r).clamp(1, p.len() - 1);
        let (x0, y0, d0) = (p[i - 1].0, p[i - 1].1, self.derivative[i - 1]);
        let (x1, y1, d1) = (p[i].0, p[i].1, self.derivative[i]);
        let h = x1 - x0;
        let t = (r - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let slope = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
        (value, slope)
    }

    /// `∫_{|x|≤ℓ} g(r(x)) dx` by Simpson's rule on the stored grid, with the
    /// hard-core ball (where `f = f' = 0`) added analytically as `g_core · |B_a|`.
    fn ball_integral(&self, g: impl Fn(usize) -> f64, g_core: f64) -> f64 {
        let mut total = match self.core {
            NeumannCore::HardCore { radius } => g_core * 4.0 / 3.0 * PI * radius.powi(3),
            _ => 0.0,
        };
        for seg in &self.segments {
            let idx = seg.start..=seg.end;
            let n = seg.end - seg.start;
            match seg.spacing {
                Spacing::Uniform => {
                    let h = (self.profile[seg.end].0 - self.profile[seg.start].0) / n as f64;
                    let vals: Vec<f64> = idx
                        .map(|i| 4.0 * PI * self.profile[i].0.powi(2) * g(i))
                        .collect();
                    total += simpson_uniform(&vals, h);
                }
                Spacing::Logarithmic => {
                    let h = (self.profile[seg.end].0 / self.profile[seg.start].0).ln() / n as f64;
                    let vals: Vec<f64> = idx
                        .map(|i| 4.0 * PI * self.profile[i].0.powi(3) * g(i))
                        .collect();
                    total += simpson_uniform(&vals, h);
                }
            }
        }
        total
    }

    /// Two-column text `(r, f(r))`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# r f\n");
        for &(r, f) in &self.profile {
            let _ = writeln!(out, "{r:.16e} {f:.16e}");
        }
        out
    }
}

/// Builds the radial grid and its Simpson segments.
///
/// Uniform on `[0, inner]` when the core is a potential, logarithmic from the
/// core out to `ℓ/4` where profiles vary like `1/r`, uniform up to `ℓ`.
fn build_grid(inner: f64, ell: f64, from_origin: bool, intervals: usize) -> (Vec<f64>, Vec<Segment>) {
    let mut pts: Vec<f64> = Vec::new();
    let mut segs = Vec::new();
    let mut push = |pts: &mut Vec<f64>, lo: f64, hi: f64, spacing: Spacing| {
        let start = if pts.is_empty() {
            pts.push(lo);
            0
        } else {
            pts.len() - 1
        };
        for i in 1..=intervals {
            let t = i as f64 / intervals as f64;
            let r = match spacing {
                Spacing::Uniform => lo + (hi - lo) * t,
                Spacing::Logarithmic => lo * (hi / lo).powf(t),
            };
            pts.push(if i == intervals { hi } else { r });
        }
        segs.push(Segment {
            start,
            end: pts.len() - 1,
            spacing,
        });
    };
    if from_origin && inner > 0.0 {
        push(&mut pts, 0.0, inner, Spacing::Uniform);
    }
    let switch = 0.25 * ell;
    if inner > 0.0 && inner < switch {
        push(&mut pts, inner, switch, Spacing::Logarithmic);
        push(&mut pts, switch, ell, Spacing::Uniform);
    } else {
        push(&mut pts, inner, ell, Spacing::Uniform);
    }
    (pts, segs)
}

/// `sin x - x cos x` without cancellation at small `x`.
fn sin_minus_x_cos(x: f64) -> f64 {
    if x.abs() < 0.5 {
        // Σ_{n≥1} (-1)^{n+1} 2n x^{2n+1} / (2n+1)!
        let x2 = x * x;
        let mut term = x * x2 / 6.0; // x^3/3!
        let mut sum = 0.0;
        for n in 1..20 {
            let contrib = 2.0 * n as f64 * term;
            sum += contrib;
            if contrib.abs() < 1e-18 * sum.abs() {
                break;
            }
            term *= -x2 / (((2 * n + 2) * (2 * n + 3)) as f64);
        }
        sum
    } else {
        x.sin() - x * x.cos()
    }
}

/// Smallest positive root of `sin(kd) - kℓ cos(kd) = 0` with `d = ℓ - a`.
///
/// Written as `[sin(kd) - kd cos(kd)] - ka cos(kd)` to avoid the cancellation
/// that dominates when `a ≪ ℓ`.
pub fn hard_core_wavenumber(a: f64, ell: f64) -> Result<f64> {
    if !(a >= 0.0 && a < ell) {
        return Err(Error::domain(format!("core radius {a} must be smaller than ell = {ell}")));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let d = ell - a;
    let h = |k: f64| sin_minus_x_cos(k * d) - k * a * (k * d).cos();
    let mut lo = 0.0;
    let mut hi = 0.5 * PI / d;
    if !(h(hi) > 0.0) {
        return Err(Error::solver("eigenvalue bracket does not change sign"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn neumann_ground_state(core: &NeumannCore, ell: f64, tol: f64) -> Result<NeumannSolution> {
    neumann_ground_state_with_grid(core, ell, tol, DEFAULT_SEGMENT_INTERVALS)
}

pub fn neumann_ground_state_with_grid(
    core: &NeumannCore,
    ell: f64,
    tol: f64,
    intervals: usize,
) -> Result<NeumannSolution> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    if !(ell.is_finite() && ell > 0.0) {
        return Err(Error::domain(format!("ell must be positive, got {ell}")));
    }
    let extent = core.extent();
    if !(extent < ell) {
        return Err(Error::domain(format!("core extent {extent} must be smaller than ell = {ell}")));
    }
    let intervals = intervals.max(4) & !1;
    match core {
        NeumannCore::HardCore { radius } => hard_core_solution(*radius, ell, tol, intervals),
        NeumannCore::Potential { potential } if !potential.is_trivial() => {
            potential_core_solution(potential, ell, tol, intervals)
        }
        NeumannCore::Potential { .. } => {
            let (grid, segments) = build_grid(0.0, ell, false, intervals);
            Ok(NeumannSolution {
                ell,
                core: core.clone(),
                eigenvalue: 0.0,
                profile: grid.iter().map(|&r| (r, 1.0)).collect(),
                u_profile: grid.iter().map(|&r| (r, 0.0)).collect(),
                derivative: vec![0.0; grid.len()],
                segments,
                closed_form: None,
            })
        }
    }
}

fn hard_core_solution(a: f64, ell: f64, tol: f64, intervals: usize) -> Result<NeumannSolution> {
    let k = hard_core_wavenumber(a, ell)?;
    let d = ell - a;
    if a > 0.0 {
        // tan(kd) = kℓ, checked in the cancellation-free form
        let mismatch = (sin_minus_x_cos(k * d) - k * a * (k * d).cos()).abs();
        let scale = k * ell * (k * d).cos().abs().max(f64::MIN_POSITIVE);
        if mismatch > tol * scale {
            return Err(Error::solver(format!(
                "transcendental equation residual {mismatch:e} exceeds tolerance"
            )));
        }
    }
    let amplitude = if a > 0.0 { ell / (k * d).sin() } else { 1.0 };
    let (grid, segments) = build_grid(a, ell, false, intervals);
    let mut sol = NeumannSolution {
        ell,
        core: NeumannCore::HardCore { radius: a },
        eigenvalue: k * k,
        profile: Vec::with_capacity(grid.len()),
        u_profile: Vec::with_capacity(grid.len()),
        derivative: Vec::with_capacity(grid.len()),
        segments,
        closed_form: if a > 0.0 { Some((k, amplitude)) } else { None },
    };
    for (i, &r) in grid.iter().enumerate() {
        let last = i + 1 == grid.len();
        let (f, df) = if a == 0.0 || last {
            (1.0, 0.0)
        } else {
            (sol.value(r), sol.derivative(r))
        };
        sol.profile.push((r, f));
        sol.u_profile.push((r, 1.0 - f * f));
        sol.derivative.push(df);
    }
    Ok(sol)
}

/// Integrates `w'' = (½U - λ) w` from the origin across `grid`, returning
/// `(w, w')` at every grid point up to a common positive factor.
fn shoot(potential: &RadialPotential, lambda: f64, grid: &[f64], tol: f64) -> Result<Vec<[f64; 2]>> {
    let rel = tol.clamp(1e-13, 1e-8);
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(grid.len());
    out.push([0.0, 1.0]);
    let mut state: [f64; 2] = [0.0, 1.0];
    let h0 = grid[1];
    for pair in grid.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let nudge = (hi - lo) * 1e-9;
        let rhs = |x: f64, y: &[f64; 2]| {
            let xv = x.clamp(lo + nudge, hi - nudge);
            [y[1], (0.5 * potential.value(xv) - lambda) * y[0]]
        };
        let abs_now = rel * 1e-6 * (state[0].abs() + h0 * state[1].abs()).max(1e-300);
        state = ode::integrate(rhs, lo, state, hi, StepControl::new(rel, abs_now), |_, _| 1.0)?;
        out.push(state);
        let big = state[0].abs().max(state[1].abs());
        if big > 1e100 {
            let f = 1.0 / big;
            for s in out.iter_mut() {
                s[0] *= f;
                s[1] *= f;
            }
            state[0] *= f;
            state[1] *= f;
        }
    }
    Ok(out)
}

fn potential_core_solution(
    potential: &RadialPotential,
    ell: f64,
    tol: f64,
    intervals: usize,
) -> Result<NeumannSolution> {
    let support = potential.support_radius();
    let (grid, segments) = build_grid(support, ell, true, intervals);
    // the eigenvalue only needs the mismatch at ℓ; a coarse copy of the grid suffices
    let coarse: Vec<f64> = {
        let mut g = vec![0.0, support];
        let steps = 64;
        for i in 1..=steps {
            g.push(support + (ell - support) * i as f64 / steps as f64);
        }
        g.dedup();
        g
    };
    let mismatch = |lambda: f64| -> Result<f64> {
        let w = shoot(potential, lambda, &coarse, tol)?;
        let [wl, dwl] = *w.last().expect("non-empty grid");
        Ok((ell * dwl - wl) / (wl.abs().max(ell * dwl.abs())))
    };
    let mut lo = 0.0;
    let mut hi = {
        let k = hard_core_wavenumber(support, ell)?;
        k * k * (1.0 + 1e-9)
    };
    let m_lo = mismatch(lo)?;
    if !(m_lo > 0.0) {
        return Err(Error::solver("Neumann mismatch is not positive at zero eigenvalue"));
    }
    let cap = (PI / (ell - support)).powi(2);
    while mismatch(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > cap {
            return Err(Error::solver("could not bracket the Neumann eigenvalue"));
        }
    }
    let stop = tol.clamp(1e-15, 1e-6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= stop * hi || mid <= lo || mid >= hi {
            break;
        }
        if mismatch(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);

    let w = shoot(potential, lambda, &grid, tol)?;
    let norm = w.last().expect("non-empty grid")[0] / ell;
    let mut profile = Vec::with_capacity(grid.len());
    let mut u_profile = Vec::with_capacity(grid.len());
    let mut derivative = Vec::with_capacity(grid.len());
    for (i, (&r, s)) in grid.iter().zip(&w).enumerate() {
        let (f, df) = if i == 0 {
            (s[1] / norm, 0.0)
        } else if i + 1 == grid.len() {
            (1.0, 0.0)
        } else {
            (s[0] / (norm * r), (s[1] * r - s[0]) / (norm * r * r))
        };
        profile.push((r, f));
        u_profile.push((r, 1.0 - f * f));
        derivative.push(df);
    }
    Ok(NeumannSolution {
        ell,
        core: NeumannCore::Potential {
            potential: potential.clone(),
        },
        eigenvalue: lambda,
        profile,
        u_profile,
        derivative,
        segments,
        closed_form: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub r_exponent: f64,
    /// `‖u‖₁` over the ball.
    pub u_l1: f64,
    /// `‖u‖_r`.
    pub u_lr: f64,
    /// `‖∇f‖_r`; `None` when `r ≥ 3/2`, where the norm diverges as the core shrinks.
    pub gradf_lr: Option<f64>,
    /// `‖u‖_r / (ã ℓ^{3/r - 1})` with the effective length `ã = λℓ³/3`.
    pub predicted_scaling_ratio: f64,
}

pub fn profile_norms(sol: &NeumannSolution, r_exponent: f64) -> Result<NormReport> {
    let r = r_exponent;
    if !(1.0..3.0).contains(&r) {
        return Err(Error::domain(format!(
            "exponent {r} outside [1, 3): the L^r norm of u diverges like ∫ r^(2-r) dr at the core scale"
        )));
    }
    let u = |i: usize| sol.u_profile[i].1.max(0.0);
    let u_l1 = sol.ball_integral(u, 1.0);
    let u_lr = sol.ball_integral(|i| u(i).powf(r), 1.0).powf(1.0 / r);
    let gradf_lr = if r < 1.5 {
        Some(
            sol.ball_integral(|i| sol.derivative[i].abs().powf(r), 0.0)
                .powf(1.0 / r),
        )
    } else {
        None
    };
    let a_eff = sol.eigenvalue * sol.ell.powi(3) / 3.0;
    let predicted = a_eff * sol.ell.powf(3.0 / r - 1.0);
    Ok(NormReport {
        r_exponent: r,
        u_l1,
        u_lr,
        gradf_lr,
        predicted_scaling_ratio: if predicted > 0.0 { u_lr / predicted } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStudy {
    /// `(grid intervals, relative residual)` per refinement level.
    pub levels: Vec<(usize, f64)>,
    /// `log2` of the last residual ratio; 2 for a second-order stencil.
    pub observed_order: f64,
}

impl ResidualStudy {
    pub fn finest(&self) -> f64 {
        self.levels.last().map(|l| l.1).unwrap_or(0.0)
    }
}

/// Maximum relative residual of the ratio `g = f_{ℓ₀}/f_ℓ` in its PDE,
/// `-g'' - (2/r) g' - 2 (f_ℓ'/f_ℓ) g' + λ_ℓ χ_ℓ g - λ_{ℓ₀} g = 0`,
/// after two grid refinements from 500 intervals.
pub fn ratio_residual(inner: &NeumannSolution, outer: &NeumannSolution) -> Result<f64> {
    Ok(ratio_residual_study(inner, outer, 500, 2)?.finest())
}

pub fn ratio_residual_study(
    inner: &NeumannSolution,
    outer: &NeumannSolution,
    base_intervals: usize,
    refinements: usize,
) -> Result<ResidualStudy> {
    if inner.core != outer.core {
        return Err(Error::domain("ratio residual needs both solutions on the same core"));
    }
    if inner.ell > outer.ell {
        return Err(Error::domain(format!(
            "inner ell {} exceeds outer ell {}",
            inner.ell, outer.ell
        )));
    }
    if base_intervals < 8 {
        return Err(Error::domain("need at least 8 grid intervals"));
    }
    let mut levels = Vec::with_capacity(refinements + 1);
    for level in 0..=refinements {
        let n = base_intervals << level;
        levels.push((n, residual_on_grid(inner, outer, n)));
    }
    let observed_order = if levels.len() >= 2 {
        let (a, b) = (levels[levels.len() - 2].1, levels[levels.len() - 1].1);
        if a > 0.0 && b > 0.0 {
            (a / b).log2()
        } else {
            f64::INFINITY
        }
    } else {
        f64::NAN
    };
    if levels.len() >= 2 && levels[levels.len() - 1].1 > levels[levels.len() - 2].1 && levels[levels.len() - 1].1 > 1e-12 {
        return Err(Error::solver(format!(
            "grid refinement did not reduce the residual ({:e} -> {:e})",
            levels[levels.len() - 2].1,
            levels[levels.len() - 1].1
        )));
    }
    Ok(ResidualStudy {
        levels,
        observed_order,
    })
}

fn residual_on_grid(inner: &NeumannSolution, outer: &NeumannSolution, n: usize) -> f64 {
    let a = match outer.core {
        NeumannCore::HardCore { radius } => radius,
        NeumannCore::Potential { .. } => 0.0,
    };
    let (ell, ell0) = (inner.ell, outer.ell);
    let h = (ell0 - a) / n as f64;
    let r: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
    let g: Vec<f64> = r
        .iter()
        .map(|&x| {
            let den = inner.value(x);
            if den > 0.0 {
                outer.value(x) / den
            } else {
                f64::NAN
            }
        })
        .collect();
    let gmax = g.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = outer.eigenvalue * gmax;
    let mut worst = 0.0f64;
    for i in 2..n {
        let (x0, x, x1) = (r[i - 1], r[i], r[i + 1]);
        if (x0 < ell && x1 > ell) || x1 > ell0 || x0 <= a {
            continue;
        }
        let (g0, g1, g2) = (g[i - 1], g[i], g[i + 1]);
        if !(g0.is_finite() && g1.is_finite() && g2.is_finite()) {
            continue;
        }
        let dg = (g2 - g0) / (2.0 * h);
        let d2g = (g2 - 2.0 * g1 + g0) / (h * h);
        let f = inner.value(x);
        let df = inner.derivative(x);
        let chi = if x <= ell { 1.0 } else { 0.0 };
        let res = -d2g - 2.0 / x * dg - 2.0 * df / f * dg + inner.eigenvalue * chi * g1 - outer.eigenvalue * g1;
        worst = worst.max(res.abs());
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_core() {
        let s = neumann_ground_state(&NeumannCore::hard(0.0), 1.0, 1e-12).unwrap();
        assert_eq!(s.eigenvalue, 0.0);
        assert!(s.profile.iter().all(|p| p.1 == 1.0));
        let z = neumann_ground_state(&NeumannCore::potential(RadialPotential::Zero), 1.0, 1e-12).unwrap();
        assert_eq!(z.eigenvalue, 0.0);
    }

    #[test]
    fn hard_core_reference_value() {
        let s = neumann_ground_state(&NeumannCore::hard(0.01), 1.0, 1e-12).unwrap();
        assert!((s.eigenvalue - 0.030_548_0).abs() < 1e-6, "{}", s.eigenvalue);
        let k = s.eigenvalue.sqrt();
        assert!(((k * 0.99).tan() - k).abs() < 1e-10);
    }

    #[test]
    fn boundary_conditions() {
        let s = neumann_ground_state(&NeumannCore::hard(0.05), 0.7, 1e-12).unwrap();
        assert!((s.value(0.7 - 1e-12) - 1.0).abs() < 1e-9);
        assert!(s.derivative(0.7 - 1e-12).abs() < 1e-9);
        assert_eq!(s.value(0.05), 0.0);
        assert_eq!(s.value(2.0), 1.0);
        let mut prev = -1.0;
        for (&(r, f), &(_, u)) in s.profile.iter().zip(&s.u_profile) {
            assert!((0.0..=1.0 + 1e-14).contains(&f), "f({r}) = {f}");
            assert!(f >= prev);
            assert!((u - (1.0 - f * f)).abs() < 1e-15);
            prev = f;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(neumann_ground_state(&NeumannCore::hard(1.0), 1.0, 1e-8), Err(Error::Domain(_))));
        assert!(matches!(neumann_ground_state(&NeumannCore::hard(0.1), 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn soft_core_is_below_hard_core_of_same_support() {
        let v = RadialPotential::soft_sphere(50.0, 0.1).unwrap();
        let soft = neumann_ground_state(&NeumannCore::potential(v), 1.0, 1e-11).unwrap();
        let hard = neumann_ground_state(&NeumannCore::hard(0.1), 1.0, 1e-11).unwrap();
        assert!(soft.eigenvalue > 0.0 && soft.eigenvalue < hard.eigenvalue);
        assert!((soft.value(1.0 - 1e-9) - 1.0).abs() < 1e-6);
        assert!(soft.derivative(0.999_999).abs() < 1e-5);
    }

    #[test]
    fn soft_core_eigenvalue_tracks_scattering_length() {
        // λℓ³/3 ≈ a for a ≪ ℓ
        let v = RadialPotential::soft_sphere(2.0, 1.0).unwrap();
        let a = 1.0 - 1f64.tanh();
        let s = neumann_ground_state(&NeumannCore::potential(v), 100.0, 1e-11).unwrap();
        let ratio = s.eigenvalue * 100f64.powi(3) / (3.0 * a);
        assert!((ratio - 1.0).abs() < 5.0 * a / 100.0, "{ratio}");
    }

    #[test]
    fn hermite_reproduces_closed_form() {
        // build a potential-core solution for a steep soft core and compare
        // its interpolant to the stored samples at midpoints
        let v = RadialPotential::soft_sphere(10.0, 0.2).unwrap();
        let s = neumann_ground_state(&NeumannCore::potential(v), 1.0, 1e-11).unwrap();
        for w in s.profile.windows(2).step_by(37) {
            let mid = 0.5 * (w[0].0 + w[1].0);
            let f = s.value(mid);
            assert!(f >= w[0].1.min(w[1].1) - 1e-9 && f <= w[0].1.max(w[1].1) + 1e-9);
        }
    }

    #[test]
    fn l1_norm_of_u_bounded_by_ball() {
        let s = neumann_ground_state(&NeumannCore::hard(0.02), 0.5, 1e-12).unwrap();
        let rep = profile_norms(&s, 1.0).unwrap();
        assert!(rep.u_l1 > 0.0 && rep.u_l1 <= 4.0 / 3.0 * PI * 0.125);
        assert!(rep.gradf_lr.is_some());
        assert!(profile_norms(&s, 1.6).unwrap().gradf_lr.is_none());
        assert!(matches!(profile_norms(&s, 3.0), Err(Error::Domain(_))));
        assert!(matches!(profile_norms(&s, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn norms_vanish_without_core() {
        let s = neumann_ground_state(&NeumannCore::hard(0.0), 0.5, 1e-12).unwrap();
        let rep = profile_norms(&s, 1.2).unwrap();
        assert_eq!(rep.u_l1, 0.0);
        assert_eq!(rep.u_lr, 0.0);
        assert_eq!(rep.gradf_lr, Some(0.0));
    }

    #[test]
    fn identical_ell_gives_zero_residual() {
        let s = neumann_ground_state(&NeumannCore::hard(0.001), 0.3, 1e-12).unwrap();
        let r = ratio_residual(&s, &s).unwrap();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn residual_rejects_mismatched_cores() {
        let a = neumann_ground_state(&NeumannCore::hard(0.001), 0.05, 1e-12).unwrap();
        let b = neumann_ground_state(&NeumannCore::hard(0.002), 0.5, 1e-12).unwrap();
        assert!(matches!(ratio_residual(&a, &b), Err(Error::Domain(_))));
        assert!(matches!(ratio_residual(&b, &a), Err(Error::Domain(_))));
    }

    #[test]
    fn small_x_series() {
        for x in [1e-6f64, 1e-3, 0.1, 0.49, 0.51, 1.0] {
            let direct = x.sin() - x * x.cos();
            let tol = 1e-15 + 1e-10 * direct.abs();
            assert!((sin_minus_x_cos(x) - direct).abs() < tol.max(1e-16 * x), "{x}");
        }
    }
}
