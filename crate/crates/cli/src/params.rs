//! Subcommand parameter tables, config-file merging and typed access.

use std::collections::BTreeMap;
use std::path::Path;

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::CliError;

pub struct Key {
    pub id: &'static str,
    pub help: &'static str,
}

const fn key(id: &'static str, help: &'static str) -> Key {
    Key { id, help }
}

pub struct SubcommandSpec {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: &'static [Key],
}

pub const SUBCOMMANDS: &[SubcommandSpec] = &[
    SubcommandSpec {
        name: "scattering",
        about: "Scattering length of a radial potential",
        keys: &[
            key("potential", "hard:<r> | soft:<height>,<r> | table:<path> | zero"),
            key("rmax", "outer integration radius [default: 20 x support]"),
            key("tol", "fit tolerance [default: 1e-10]"),
            key("fourier", "also evaluate the Fourier coefficient at this |p|"),
            key("profile", "write (r, f) samples to this path"),
        ],
    },
    SubcommandSpec {
        name: "neumann",
        about: "Neumann ground state on a ball around a hard or soft core",
        keys: &[
            key("core", "hard-core radius"),
            key("potential", "core potential instead of a hard core"),
            key("ell", "ball radius"),
            key("tol", "root tolerance [default: 1e-12]"),
            key("norm_r", "exponent r of the norm table [default: 1]"),
            key("ell0", "outer radius for the ratio residual"),
            key("profile", "write (r, f) samples to this path"),
        ],
    },
    SubcommandSpec {
        name: "elambda",
        about: "Finite-volume constant e_Lambda from cube-truncated sums",
        keys: &[
            key("mmax", "largest cube half-width [default: 40]"),
            key("accelerate", "smooth the partial sums [default: true]"),
        ],
    },
    SubcommandSpec {
        name: "bracket",
        about: "Second-order bracket sum over the dual lattice",
        keys: &[
            key("kind", "gp | mean-field | beta [default: gp]"),
            key("a", "scattering length (gp)"),
            key("potential", "potential (mean-field, beta)"),
            key("cutoff", "momentum cutoff [default: 80 pi]"),
            key("tail", "add the asymptotic tail [default: true]"),
        ],
    },
    SubcommandSpec {
        name: "born",
        about: "Truncated Born series for 8 pi a_N",
        keys: &[
            key("potential", "unscaled potential"),
            key("n", "particle number N"),
            key("beta", "scaling exponent in [0, 1]"),
            key("order", "number of Born orders [default: 3]"),
            key("cutoff", "momentum cutoff of the first correction"),
            key("nested_radius", "lattice radius of nested orders [default: 32]"),
            key("tail_tolerance", "relative cutoff-tail tolerance [default: 1e-6]"),
        ],
    },
    SubcommandSpec {
        name: "lhy",
        about: "Continuum second-order energy against the LHY coefficient",
        keys: &[key("a", "scattering length"), key("rho", "density")],
    },
    SubcommandSpec {
        name: "energy",
        about: "Assembled ground-state energy",
        keys: &[
            key("regime", "gp | mean-field | beta [default: gp]"),
            key("n", "particle number N"),
            key("a", "scattering length (gp)"),
            key("potential", "potential (mean-field, beta)"),
            key("beta", "scaling exponent (beta)"),
            key("mmax", "cube truncation for e_Lambda [default: 40]"),
            key("cutoff", "bracket cutoff [default: 80 pi]"),
            key("born_order", "Born orders (beta) [default: 3]"),
            key("born_cutoff", "Born momentum cutoff (beta)"),
        ],
    },
    SubcommandSpec {
        name: "spectrum",
        about: "Excitation levels below a threshold",
        keys: &[
            key("a", "scattering length (Gross-Pitaevskii dispersion)"),
            key("potential", "potential (mean-field dispersion)"),
            key("zeta", "energy threshold"),
            key("max_entries", "abort beyond this many levels [default: 2000000]"),
            key("max_threshold", "largest accepted threshold [default: 1e5]"),
        ],
    },
    SubcommandSpec {
        name: "vmc",
        about: "Variational Monte Carlo for hard spheres on a periodic box",
        keys: &[
            key("L", "box side [default: 1]"),
            key("N", "particle number [default: 2]"),
            key("core", "hard-core radius [default: 0.01]"),
            key("ell", "correlation length [default: 0.2]"),
            key("steps", "production sweeps [default: 100000]"),
            key("burn_in", "burn-in sweeps [default: 2000]"),
            key("seed", "base seed [default: 1]"),
            key("chains", "independent chains [default: 1]"),
            key("step_size", "initial move size [default: ell/4]"),
            key("append", "append a result row to this CSV file"),
        ],
    },
    SubcommandSpec {
        name: "probe",
        about: "Derivative expectations of the three-body proxy versus ell",
        keys: &[
            key("ells", "comma-separated ell grid [default: 1e-3,1.8e-3,3.2e-3,5.6e-3,1e-2]"),
            key("n", "N in the proxy factor a/N [default: 100000]"),
            key("a", "scattering length of the proxy [default: 1]"),
            key("samples", "quadrature samples per ell [default: 200000]"),
            key("seed", "base seed [default: 1]"),
        ],
    },
    SubcommandSpec {
        name: "golden",
        about: "Rerun regression records and compare within tolerance",
        keys: &[key("records", "JSON array of golden records")],
    },
];

pub fn spec(name: &str) -> Option<&'static SubcommandSpec> {
    SUBCOMMANDS.iter().find(|s| s.name == name)
}

const UNITS: &str = "Lengths are in box units; energies in units of hbar^2/(2m length^2), \
with kinetic energy -Laplacian.\n\
Exit status: 0 success, 1 golden mismatch, 2 domain or configuration error, \
3 solver or accuracy error, 4 resource guard.";

pub fn command() -> Command {
    let mut cmd = Command::new("bosegas")
        .about("Numerical toolkit for the dilute Bose gas")
        .after_help(UNITS)
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("PATH").help("key=value file; flags override it"))
        .arg(Arg::new("output").long("output").short('o').global(true).value_name("PATH").help("write the result here instead of stdout"))
        .arg(
            Arg::new("format")
                .long("format")
                .global(true)
                .value_parser(["text", "csv", "json"])
                .default_value("text"),
        )
        .arg(
            Arg::new("deterministic")
                .long("deterministic")
                .global(true)
                .action(ArgAction::SetTrue)
                .help("fixed reduction order and 17-digit output"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_parser(clap::value_parser!(usize))
                .default_value("0")
                .help("worker threads, 0 = auto"),
        );
    for s in SUBCOMMANDS {
        let mut sub = Command::new(s.name).about(s.about);
        for k in s.keys {
            sub = sub.arg(Arg::new(k.id).long(k.id.replace('_', "-")).value_name("VALUE").help(k.help));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Canonical parameters of one run: config values overridden by flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub subcommand: String,
    pub values: BTreeMap<String, String>,
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl Params {
    pub fn new(subcommand: &str, values: BTreeMap<String, String>) -> Result<Self, CliError> {
        let spec = spec(subcommand).ok_or_else(|| CliError::Config(format!("unknown subcommand '{subcommand}'")))?;
        for k in values.keys() {
            if !spec.keys.iter().any(|key| key.id == k) {
                return Err(CliError::Config(format!("unknown key '{k}' for {subcommand}")));
            }
        }
        Ok(Self {
            subcommand: subcommand.to_string(),
            values,
        })
    }

    pub fn from_matches(subcommand: &str, m: &ArgMatches, config: Option<&Path>) -> Result<Self, CliError> {
        let mut values = match config {
            Some(p) => parse_config(
                &std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
            )?,
            None => BTreeMap::new(),
        };
        let spec = spec(subcommand).ok_or_else(|| CliError::Config(format!("unknown subcommand '{subcommand}'")))?;
        for k in spec.keys {
            if let Some(v) = m.get_one::<String>(k.id) {
                values.insert(k.id.to_string(), v.clone());
            }
        }
        Self::new(subcommand, values)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("invalid value '{s}' for {key}"))),
        }
    }

    pub fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.parsed(key)?
            .ok_or_else(|| CliError::Config(format!("{} needs --{}", self.subcommand, key.replace('_', "-"))))
    }

    pub fn flag(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(s) => Err(CliError::Config(format!("invalid boolean '{s}' for {key}"))),
        }
    }
}
