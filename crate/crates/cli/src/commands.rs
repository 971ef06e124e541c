//! One handler per subcommand. Each returns named scalars, optional string
//! fields and an optional table.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write as _;

use bosegas::bogoliubov::{
    enumerate_excitations, ground_state_energy, Dispersion, EnergyOptions, EnergyRegime, RegimeTag, SpectrumLimits,
};
use bosegas::lattice::{self, BornSeriesSpec, BracketKind, Reduction};
use bosegas::neumann::{neumann_ground_state, profile_norms, ratio_residual, NeumannCore};
use bosegas::scattering::{fourier_coefficient, scattering_length, RadialPotential, ScaledRegime};
use bosegas::vmc::{self, ScalingProbeSpec, VmcConfig};

use crate::params::Params;
use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Optional trailing text column.
    pub labels: Option<(String, Vec<String>)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub values: BTreeMap<String, f64>,
    pub strings: BTreeMap<String, String>,
    pub table: Option<Table>,
}

impl Outcome {
    fn value(&mut self, k: &str, v: f64) {
        self.values.insert(k.to_string(), v);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Context {
    pub deterministic: bool,
}

impl Context {
    fn reduction(&self) -> Reduction {
        if self.deterministic {
            Reduction::Deterministic
        } else {
            Reduction::Fast
        }
    }
}

fn potential(p: &Params, key: &str) -> Result<RadialPotential, CliError> {
    let s: String = p.required(key)?;
    Ok(s.parse::<RadialPotential>()?)
}

pub fn run(p: &Params, ctx: Context) -> Result<Outcome, CliError> {
    match p.subcommand.as_str() {
        "scattering" => scattering(p),
        "neumann" => neumann(p),
        "elambda" => elambda(p),
        "bracket" => bracket(p, ctx),
        "born" => born(p),
        "lhy" => lhy(p),
        "energy" => energy(p, ctx),
        "spectrum" => spectrum(p),
        "vmc" => run_vmc(p),
        "probe" => probe(p),
        other => Err(CliError::Config(format!("subcommand '{other}' cannot be run here"))),
    }
}

fn write_file(path: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {path}: {e}")))
}

fn scattering(p: &Params) -> Result<Outcome, CliError> {
    let v = potential(p, "potential")?;
    let mut out = Outcome::default();
    if let Some(q) = p.parsed::<f64>("fourier")? {
        let vhat = fourier_coefficient(&v, q)?;
        out.value("fourier", vhat);
    }
    let rmax = p.or("rmax", 20.0 * v.support_radius().max(1.0))?;
    let sol = scattering_length(&v, rmax, p.or("tol", 1e-10)?)?;
    if let Some(path) = p.raw("profile") {
        let mut text = String::from("# r f\n");
        for (r, f) in &sol.profile {
            text += &format!("{r:.16e} {f:.16e}\n");
        }
        write_file(path, &text)?;
    }
    out.summary = format!("a = {:.6} for {v} (fit residual {:.1e})", sol.scattering_length, sol.fit_residual);
    out.value("a", sol.scattering_length);
    out.value("fit_residual", sol.fit_residual);
    out.value("converged", if sol.converged { 1.0 } else { 0.0 });
    out.table = Some(Table {
        header: vec!["r".into(), "f".into()],
        rows: sol.profile.iter().map(|&(r, f)| vec![r, f]).collect(),
        labels: None,
    });
    Ok(out)
}

fn neumann(p: &Params) -> Result<Outcome, CliError> {
    let core = match (p.parsed::<f64>("core")?, p.raw("potential")) {
        (Some(a), None) => NeumannCore::hard(a),
        (None, Some(_)) => NeumannCore::potential(potential(p, "potential")?),
        _ => return Err(CliError::Config("neumann needs exactly one of --core or --potential".into())),
    };
    let ell: f64 = p.required("ell")?;
    let tol = p.or("tol", 1e-12)?;
    let sol = neumann_ground_state(&core, ell, tol)?;
    if let Some(path) = p.raw("profile") {
        write_file(path, &sol.to_text())?;
    }
    let r = p.or("norm_r", 1.0)?;
    let norms = profile_norms(&sol, r)?;
    let mut out = Outcome::default();
    let a = core.extent();
    out.value("lambda", sol.eigenvalue);
    if a > 0.0 {
        out.value("lambda_ratio", sol.eigenvalue * ell.powi(3) / (3.0 * a));
    }
    out.value("r", r);
    out.value("u_l1", norms.u_l1);
    out.value("u_lr", norms.u_lr);
    if let Some(g) = norms.gradf_lr {
        out.value("gradf_lr", g);
    }
    out.value("predicted_scaling_ratio", norms.predicted_scaling_ratio);
    if let Some(ell0) = p.parsed::<f64>("ell0")? {
        let outer = neumann_ground_state(&core, ell0, tol)?;
        out.value("ratio_residual", ratio_residual(&sol, &outer)?);
    }
    out.summary = format!(
        "lambda = {:.9e}, lambda ell^3/(3a) = {}",
        sol.eigenvalue,
        out.values.get("lambda_ratio").map_or("n/a".to_string(), |v| format!("{v:.6}"))
    );
    out.table = Some(Table {
        header: vec!["r".into(), "u_l1".into(), "u_lr".into(), "gradf_lr".into(), "predicted_scaling_ratio".into()],
        rows: vec![vec![r, norms.u_l1, norms.u_lr, norms.gradf_lr.unwrap_or(f64::NAN), norms.predicted_scaling_ratio]],
        labels: None,
    });
    Ok(out)
}

fn lattice_table(res: &lattice::LatticeSumResult) -> Table {
    let ext: BTreeMap<u64, f64> = res.extrapolants.iter().copied().collect();
    Table {
        header: vec!["M".into(), "partial".into(), "extrapolant".into()],
        rows: res
            .partials
            .iter()
            .map(|&(m, s)| vec![m as f64, s, ext.get(&m).copied().unwrap_or(f64::NAN)])
            .collect(),
        labels: None,
    }
}

fn elambda(p: &Params) -> Result<Outcome, CliError> {
    let res = lattice::e_lambda(p.or("mmax", 40u64)?, p.flag("accelerate", true)?)?;
    let mut out = Outcome::default();
    out.summary = format!("e_Lambda = {:.7} (diagnostic {:.1e})", res.value, res.diagnostic);
    out.value("e_lambda", res.value);
    out.value("diagnostic", res.diagnostic);
    out.table = Some(lattice_table(&res));
    Ok(out)
}

fn bracket(p: &Params, ctx: Context) -> Result<Outcome, CliError> {
    let kind = match p.raw("kind").unwrap_or("gp") {
        "gp" => BracketKind::Gp { a: p.required("a")? },
        "mean-field" | "mean_field" => BracketKind::mean_field_from(&potential(p, "potential")?)?,
        "beta" => BracketKind::BetaRegime {
            vhat0: potential(p, "potential")?.fourier(0.0)?,
        },
        k => return Err(CliError::Config(format!("unknown bracket kind '{k}'"))),
    };
    let res = lattice::bracket_sum(&kind, p.or("cutoff", 80.0 * PI)?, p.flag("tail", true)?, ctx.reduction())?;
    let mut out = Outcome::default();
    out.summary = format!("bracket sum = {:.10e} (diagnostic {:.1e})", res.value, res.diagnostic);
    out.value("value", res.value);
    out.value("diagnostic", res.diagnostic);
    out.table = Some(lattice_table(&res));
    Ok(out)
}

fn born(p: &Params) -> Result<Outcome, CliError> {
    let regime = ScaledRegime::new(p.required("n")?, p.required("beta")?)?;
    let spec = BornSeriesSpec {
        momentum_cutoff: p.parsed("cutoff")?,
        nested_radius: p.or("nested_radius", 32usize)?,
        tail_tolerance: p.or("tail_tolerance", 1e-6)?,
        ..BornSeriesSpec::new(potential(p, "potential")?, regime, p.or("order", 3usize)?)
    };
    let series = lattice::born_series(&spec)?;
    let mut out = Outcome::default();
    out.summary = format!(
        "8 pi a_N = {:.10} after {} orders (cutoff {:.3e})",
        series.value(),
        series.partials.len(),
        series.cutoff
    );
    out.value("value", series.value());
    out.value("cutoff", series.cutoff);
    out.value("tail_estimate", series.tail_estimate);
    for (k, v) in series.partials.iter().enumerate() {
        out.value(&format!("partial_{}", k + 1), *v);
    }
    out.table = Some(Table {
        header: vec!["order".into(), "partial".into()],
        rows: series.partials.iter().enumerate().map(|(k, &v)| vec![(k + 1) as f64, v]).collect(),
        labels: None,
    });
    Ok(out)
}

fn lhy(p: &Params) -> Result<Outcome, CliError> {
    let res = lattice::lhy_integral(p.required("a")?, p.required("rho")?)?;
    let mut out = Outcome::default();
    out.value("energy_per_particle", res.energy_per_particle);
    if let Some(r) = res.ratio {
        out.value("ratio", r);
    }
    out.summary = format!(
        "second-order energy per particle {:.10e}, ratio to LHY {}",
        res.energy_per_particle,
        res.ratio.map_or("n/a".into(), |r| format!("{r:.10}"))
    );
    Ok(out)
}

fn energy(p: &Params, ctx: Context) -> Result<Outcome, CliError> {
    let n: u64 = p.required("n")?;
    let regime = match p.raw("regime").unwrap_or("gp") {
        "gp" => EnergyRegime::Gp { n, a: p.required("a")? },
        "mean-field" | "mean_field" => EnergyRegime::MeanField {
            n,
            potential: potential(p, "potential")?,
        },
        "beta" => EnergyRegime::Beta {
            n,
            beta: p.required("beta")?,
            potential: potential(p, "potential")?,
        },
        r => return Err(CliError::Config(format!("unknown regime '{r}'"))),
    };
    let defaults = EnergyOptions::default();
    let opts = EnergyOptions {
        m_max: p.or("mmax", defaults.m_max)?,
        bracket_cutoff: p.or("cutoff", defaults.bracket_cutoff)?,
        born_order: p.or("born_order", defaults.born_order)?,
        born_cutoff: p.parsed("born_cutoff")?,
        reduction: ctx.reduction(),
        ..defaults
    };
    let s = ground_state_energy(&regime, &opts)?;
    let mut out = Outcome::default();
    out.value("leading", s.leading);
    out.value("finite_volume", s.finite_volume);
    out.value("correction", s.correction);
    out.value("total", s.total);
    let tag = match s.regime_tag {
        RegimeTag::Gp => "gp".to_string(),
        RegimeTag::MeanField => "mean_field".to_string(),
        RegimeTag::Beta { beta } => {
            out.value("beta", beta);
            "beta".to_string()
        }
    };
    out.strings.insert("regime_tag".into(), tag);
    out.summary = format!(
        "E = {:.10e} (leading {:.6e}, finite volume {:.6e}, correction {:.6e})",
        s.total, s.leading, s.finite_volume, s.correction
    );
    Ok(out)
}

fn spectrum(p: &Params) -> Result<Outcome, CliError> {
    let law = match (p.parsed::<f64>("a")?, p.raw("potential")) {
        (Some(a), None) => Dispersion::Gp { a },
        (None, Some(_)) => Dispersion::mean_field_from(&potential(p, "potential")?)?,
        _ => return Err(CliError::Config("spectrum needs exactly one of --a or --potential".into())),
    };
    let defaults = SpectrumLimits::default();
    let limits = SpectrumLimits {
        max_entries: p.or("max_entries", defaults.max_entries)?,
        max_threshold: p.or("max_threshold", defaults.max_threshold)?,
    };
    let s = enumerate_excitations(&law, p.required("zeta")?, limits)?;
    let mut out = Outcome::default();
    out.value("entries", s.entries.len() as f64);
    out.value("threshold", s.threshold);
    out.summary = format!("{} levels below {}", s.entries.len(), s.threshold);
    out.table = Some(Table {
        header: vec!["energy".into()],
        rows: s.entries.iter().map(|e| vec![e.energy]).collect(),
        labels: Some(("modes".into(), s.entries.iter().map(|e| e.modes_label()).collect())),
    });
    Ok(out)
}

fn run_vmc(p: &Params) -> Result<Outcome, CliError> {
    let mut cfg = VmcConfig::default();
    for k in vmc::VMC_KEYS {
        if let Some(v) = p.raw(k) {
            cfg.set(k, v)?;
        }
    }
    let gas = cfg.gas()?;
    let sol = neumann_ground_state(&NeumannCore::hard(cfg.core), cfg.ell, 1e-12)?;
    let e = vmc::run_chains(&gas, &sol, &cfg.chain_params(), cfg.chains.max(1))?;
    if let Some(path) = p.raw("append") {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|err| CliError::Config(format!("cannot open {path}: {err}")))?;
        let mut text = String::new();
        if fresh {
            text += vmc::VMC_CSV_HEADER;
            text.push('\n');
        }
        text += &vmc::csv_row(&gas, &e, true);
        text.push('\n');
        f.write_all(text.as_bytes())
            .map_err(|err| CliError::Config(format!("cannot write {path}: {err}")))?;
    }
    let mut out = Outcome::default();
    out.value("N", gas.n_particles as f64);
    out.value("L", gas.box_side);
    out.value("core", gas.core_radius);
    out.value("ell", gas.ell);
    out.value("rho", gas.density());
    out.value("a_term", e.a_term);
    out.value("b_term", e.b_term);
    out.value("total", e.total);
    out.value("std_error", e.std_error);
    out.value("acceptance_rate", e.acceptance_rate);
    out.value("n_samples", e.n_samples as f64);
    out.value("seed", e.seed as f64);
    if gas.n_particles == 2 {
        out.value("two_body_oracle", vmc::two_body_oracle(&gas, &sol)?);
    }
    let dyson = 4.0 * PI * gas.core_radius * gas.density() * gas.n_particles as f64;
    out.summary = format!(
        "E = {:.6e} +- {:.1e} (A {:.6e}, B {:.3e}), E/(4 pi a rho N) = {:.4}, acceptance {:.3}",
        e.total,
        e.std_error,
        e.a_term,
        e.b_term,
        if dyson > 0.0 { e.total / dyson } else { f64::NAN },
        e.acceptance_rate
    );
    Ok(out)
}

fn probe(p: &Params) -> Result<Outcome, CliError> {
    let ells: Vec<f64> = match p.raw("ells") {
        Some(s) => s
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| CliError::Config(format!("invalid ell '{t}'"))))
            .collect::<Result<_, _>>()?,
        None => vec![1e-3, 1.8e-3, 3.2e-3, 5.6e-3, 1e-2],
    };
    let spec = ScalingProbeSpec {
        ell_grid: ells,
        n_for_proxy: p.or("n", 100_000u64)?,
        a: p.or("a", 1.0)?,
        quadrature_samples: p.or("samples", 200_000usize)?,
        seed: p.or("seed", 1u64)?,
    };
    let report = vmc::scaling_probe(&spec)?;
    let mut out = Outcome::default();
    for (k, e) in report.exponents.iter().enumerate() {
        out.value(&format!("exponent_{}", k + 1), e.exponent);
        out.value(&format!("half_width_{}", k + 1), e.half_width);
        out.value(&format!("prefactor_{}", k + 1), e.prefactor);
    }
    if !report.warnings.is_empty() {
        out.strings.insert("warnings".into(), report.warnings.join("; "));
    }
    out.summary = format!(
        "fitted ell exponents {}",
        report
            .exponents
            .iter()
            .map(|e| format!("{:.3} +- {:.3}", e.exponent, e.half_width))
            .collect::<Vec<_>>()
            .join(", ")
    );
    out.table = Some(Table {
        header: ["ell", "lap1", "lap1_err", "lap12", "lap12_err", "lap123", "lap123_err"]
            .map(String::from)
            .to_vec(),
        rows: report
            .points
            .iter()
            .map(|pt| {
                vec![pt.ell, pt.values[0], pt.errors[0], pt.values[1], pt.errors[1], pt.values[2], pt.errors[2]]
            })
            .collect(),
        labels: None,
    });
    Ok(out)
}
