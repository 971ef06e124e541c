//! Regression records: rerun a subcommand and compare named values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::commands::{self, Context};
use crate::params::Params;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Paper,
    Derived,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenRecord {
    pub subcommand: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
    pub expected: BTreeMap<String, Expected>,
    pub provenance: Provenance,
}

pub fn parse_records(text: &str) -> Result<Vec<GoldenRecord>, CliError> {
    if text.trim().is_empty() {
        return Ok(vec![]);
    }
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("cannot parse golden records: {e}")))
}

pub struct GoldenReport {
    pub text: String,
    pub failures: usize,
}

/// Every record is validated before anything runs, so a missing subcommand
/// is a configuration error rather than a partial report.
pub fn check(records: &[GoldenRecord], ctx: Context) -> Result<GoldenReport, CliError> {
    let params: Vec<Params> = records
        .iter()
        .map(|r| {
            if r.subcommand == "golden" {
                return Err(CliError::Config("golden records cannot nest".into()));
            }
            Params::new(&r.subcommand, r.parameters.clone())
        })
        .collect::<Result<_, _>>()?;
    let mut text = String::new();
    let mut failures = 0;
    for (i, (rec, p)) in records.iter().zip(&params).enumerate() {
        let outcome = commands::run(p, ctx)?;
        for (name, exp) in &rec.expected {
            let got = outcome.values.get(name).copied();
            let (delta, pass) = match got {
                Some(v) => {
                    let d = v - exp.value;
                    (d, exp.tolerance > 0.0 && d.abs() <= exp.tolerance)
                }
                None => (f64::NAN, false),
            };
            if !pass {
                failures += 1;
            }
            let _ = writeln!(
                text,
                "record {i} {} {name}: got {} expected {:e} delta {delta:e} tol {:e} {}",
                rec.subcommand,
                got.map_or("missing".to_string(), |v| format!("{v:e}")),
                exp.value,
                exp.tolerance,
                if pass { "PASS" } else { "FAIL" }
            );
        }
    }
    let _ = writeln!(text, "{} records, {failures} failing values", records.len());
    Ok(GoldenReport { text, failures })
}
