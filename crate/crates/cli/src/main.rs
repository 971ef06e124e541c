mod commands;
mod golden;
mod params;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use bosegas::Error;

use commands::{Context, Outcome};
use params::Params;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Config(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(Error::Domain(_) | Error::Setup(_)) => 2,
            CliError::Core(Error::Solver(_) | Error::Accuracy { .. }) => 3,
            CliError::Core(Error::Resource { .. }) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(Error::Accuracy { message, required: Some(r) }) => {
                write!(f, "accuracy error: {message} (suggested value {r:e})")
            }
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

fn number(v: f64, deterministic: bool) -> String {
    if deterministic {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn render_csv(out: &Outcome, deterministic: bool) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(vec![]);
    let err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    match &out.table {
        Some(t) => {
            let mut header = t.header.clone();
            if let Some((name, _)) = &t.labels {
                header.push(name.clone());
            }
            w.write_record(&header).map_err(err)?;
            for (i, row) in t.rows.iter().enumerate() {
                let mut rec: Vec<String> = row.iter().map(|&v| number(v, deterministic)).collect();
                if let Some((_, labels)) = &t.labels {
                    rec.push(labels[i].clone());
                }
                w.write_record(&rec).map_err(err)?;
            }
        }
        None => {
            w.write_record(out.values.keys()).map_err(err)?;
            w.write_record(out.values.values().map(|&v| number(v, deterministic))).map_err(err)?;
        }
    }
    String::from_utf8(w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))?)
        .map_err(|e| CliError::Config(format!("csv: {e}")))
}

fn render_json(out: &Outcome) -> String {
    let mut map = serde_json::Map::new();
    for (k, v) in &out.values {
        map.insert(k.clone(), serde_json::json!(v));
    }
    for (k, v) in &out.strings {
        map.insert(k.clone(), serde_json::json!(v));
    }
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("finite values serialize");
    s.push('\n');
    s
}

fn render_text(out: &Outcome, deterministic: bool) -> String {
    let mut s = String::new();
    for (k, v) in &out.values {
        let _ = writeln!(s, "{k} = {}", number(*v, deterministic));
    }
    for (k, v) in &out.strings {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

fn run() -> Result<u8, CliError> {
    let matches = params::command().get_matches();
    let threads = *matches.get_one::<usize>("threads").expect("defaulted");
    if threads > 0 {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let config = sub.get_one::<String>("config").map(PathBuf::from);
    let output = sub.get_one::<String>("output").cloned();
    let format = sub.get_one::<String>("format").cloned().unwrap_or_else(|| "text".into());
    let ctx = Context {
        deterministic: sub.get_flag("deterministic"),
    };
    let p = Params::from_matches(name, sub, config.as_deref())?;

    if name == "golden" {
        let path: String = p.required("records")?;
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
        let records = golden::parse_records(&text)?;
        let report = golden::check(&records, ctx)?;
        print!("{}", report.text);
        return Ok(if report.failures == 0 { 0 } else { 1 });
    }

    let outcome = commands::run(&p, ctx)?;
    let body = match format.as_str() {
        "csv" => render_csv(&outcome, ctx.deterministic)?,
        "json" => render_json(&outcome),
        _ => render_text(&outcome, ctx.deterministic),
    };
    match output {
        Some(path) => {
            std::fs::write(&path, body).map_err(|e| CliError::Config(format!("cannot write {path}: {e}")))?;
            println!("{}", outcome.summary);
        }
        None if format == "text" => {
            println!("{}", outcome.summary);
            print!("{body}");
        }
        None => {
            eprintln!("{}", outcome.summary);
            print!("{body}");
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
