//! Command-line front end: `verify`, `mass` and `aspect`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::asymptotics::check_equivalence;
use crate::chart::hyperbolic_metric;
use crate::config::{Outcome, RouteSelection, RunConfig};
use crate::error::Error;
use crate::mass::{
    compare_reports, mass_aspect_samples, michel_mass, tractor_mass, worst, AspectSample, Comparison, MassReport,
    Status,
};
use crate::verify;

#[derive(Parser)]
#[command(name = "tractor-mass", version, about = "Asymptotically hyperbolic mass via tractor cocycles and the Michel integral")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the invariant suite (cocycle algebra, alignment, tractor identities, KID residuals).
    Verify(RunArgs),
    /// Compute the energy-momentum by one or both routes and compare them.
    Mass(RunArgs),
    /// Write the mass aspect over the quadrature nodes as CSV.
    Aspect(RunArgs),
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Flat key = value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ball dimension n (3 to 6).
    #[arg(long)]
    dim: Option<usize>,
    /// hyperbolic | schwarzschild-ads | aspect-perturbation | custom
    #[arg(long)]
    family: Option<String>,
    /// Family parameter as name=value; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// JSON file with the boundary function chi.
    #[arg(long)]
    chi: Option<PathBuf>,
    /// tractor | michel | both
    #[arg(long)]
    route: Option<String>,
    /// Quadrature level (1 to 8).
    #[arg(long)]
    level: Option<usize>,
    /// Largest epsilon of the schedule.
    #[arg(long)]
    eps0: Option<f64>,
    /// Ratio between successive epsilons.
    #[arg(long)]
    ratio: Option<f64>,
    /// Number of epsilons.
    #[arg(long)]
    count: Option<usize>,
    /// Richardson stages.
    #[arg(long)]
    stages: Option<usize>,
    /// Cross-route relative tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Extraction error above which a node is inconclusive.
    #[arg(long = "extraction-tol")]
    extraction_tol: Option<f64>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the mass aspect CSV here (mass command).
    #[arg(long = "aspect-csv")]
    aspect_csv: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    pub fn to_config(&self) -> Result<RunConfig, Error> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        let mut set = |key: &str, value: Option<String>| -> Result<(), Error> {
            match value {
                Some(v) => c.set(key, &v),
                None => Ok(()),
            }
        };
        set("dim", self.dim.map(|v| v.to_string()))?;
        set("family", self.family.clone())?;
        set("chi", self.chi.as_ref().map(|p| p.display().to_string()))?;
        set("route", self.route.clone())?;
        set("level", self.level.map(|v| v.to_string()))?;
        set("eps0", self.eps0.map(|v| v.to_string()))?;
        set("ratio", self.ratio.map(|v| v.to_string()))?;
        set("count", self.count.map(|v| v.to_string()))?;
        set("stages", self.stages.map(|v| v.to_string()))?;
        set("tol", self.tol.map(|v| v.to_string()))?;
        set("extraction_tol", self.extraction_tol.map(|v| v.to_string()))?;
        set("out", self.out.as_ref().map(|p| p.display().to_string()))?;
        set("aspect_csv", self.aspect_csv.as_ref().map(|p| p.display().to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        for p in &self.params {
            c.set("param", p)?;
        }
        c.validate()?;
        Ok(c)
    }
}

fn write_output(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub fn aspect_csv(n: usize, samples: &[AspectSample]) -> String {
    let mut s = String::from("index");
    for i in 1..=n {
        s.push_str(&format!(",omega_{i}"));
    }
    s.push_str(",weight,m,err\n");
    for a in samples {
        s.push_str(&a.index.to_string());
        for w in &a.omega {
            s.push_str(&format!(",{w}"));
        }
        s.push_str(&format!(",{},{},{:e}\n", a.weight, a.value, a.err));
    }
    s
}

fn outcome_of(status: Status) -> Outcome {
    match status {
        Status::Pass => Outcome::Pass,
        Status::Fail => Outcome::Fail,
        Status::Inconclusive => Outcome::Inconclusive,
    }
}

fn report_error(command: &str, config: &RunConfig, err: &Error) -> Outcome {
    let outcome = Outcome::of_error(err);
    let status = match outcome {
        Outcome::Inconclusive => "inconclusive",
        _ => "fail",
    };
    eprintln!("tractor-mass {command}: {err}");
    let body = json!({
        "command": command,
        "n": config.dim,
        "family": config.family,
        "params": config.params,
        "status": status,
        "error": err.to_string(),
    });
    if let Err(e) = write_output(config.out.as_deref(), &to_json(&body)) {
        eprintln!("tractor-mass: cannot write output: {e}");
    }
    outcome
}

#[derive(Serialize)]
struct MassOutput<'a> {
    command: &'static str,
    status: Status,
    seed: u64,
    reports: Vec<&'a MassReport>,
    comparison: Option<Comparison>,
}

pub fn cmd_verify(config: &RunConfig) -> Result<Outcome, Error> {
    let report = verify::run(config)?;
    write_output(config.out.as_deref(), &to_json(&report)).map_err(io_error)?;
    Ok(outcome_of(report.status))
}

pub fn cmd_mass(config: &RunConfig) -> Result<Outcome, Error> {
    let g = hyperbolic_metric(config.dim)?;
    let h = config.build_metric()?;
    let q = config.quadrature()?;
    let options = config.options();
    let tractor = match config.route {
        RouteSelection::Tractor | RouteSelection::Both => Some(tractor_mass(&g, &h, &q, &options)?),
        RouteSelection::Michel => None,
    };
    let michel = match config.route {
        RouteSelection::Michel | RouteSelection::Both => Some(michel_mass(&g, &h, &q, &options)?),
        RouteSelection::Tractor => None,
    };
    let reports: Vec<&MassReport> = tractor.iter().chain(michel.iter()).collect();
    let mut status = worst(reports.iter().map(|r| r.status()));
    let comparison = match (&tractor, &michel) {
        (Some(a), Some(b)) if status != Status::Inconclusive => {
            let cmp = compare_reports(a, b, config.tol);
            if !cmp.pass {
                status = Status::Fail;
            }
            Some(cmp)
        }
        _ => None,
    };
    if let Some(path) = &config.aspect_csv {
        let samples = match tractor.as_ref().and_then(|t| t.aspect.clone()) {
            Some(s) => s,
            None => mass_aspect_samples(&g, &h, &q, &options)?.0,
        };
        std::fs::write(path, aspect_csv(config.dim, &samples)).map_err(io_error)?;
    }
    let out = MassOutput {
        command: "mass",
        status,
        seed: config.seed,
        reports,
        comparison,
    };
    write_output(config.out.as_deref(), &to_json(&out)).map_err(io_error)?;
    Ok(outcome_of(status))
}

pub fn cmd_aspect(config: &RunConfig) -> Result<Outcome, Error> {
    let g = hyperbolic_metric(config.dim)?;
    let h = config.build_metric()?;
    check_equivalence(&g, &h, &config.schedule).and_then(|eq| {
        if eq.pass {
            Ok(())
        } else {
            Err(Error::NotEquivalent {
                order: eq.order.unwrap_or(f64::INFINITY),
                required: eq.required,
            })
        }
    })?;
    let q = config.quadrature()?;
    let (samples, _) = mass_aspect_samples(&g, &h, &q, &config.options())?;
    write_output(config.out.as_deref(), &aspect_csv(config.dim, &samples)).map_err(io_error)?;
    let flagged = samples.iter().filter(|s| !s.converged).count();
    if flagged > 0 {
        eprintln!("tractor-mass aspect: {flagged} inconclusive nodes");
        return Ok(Outcome::Inconclusive);
    }
    Ok(Outcome::Pass)
}

type CommandFn = fn(&RunConfig) -> Result<Outcome, Error>;

fn io_error(e: std::io::Error) -> Error {
    Error::InvalidParameter {
        field: "out".into(),
        message: e.to_string(),
    }
}

/// Parse `args` (program name first), run the command and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { Outcome::ConfigError.code() } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, args, command): (&str, &RunArgs, CommandFn) = match &cli.command {
        Command::Verify(a) => ("verify", a, cmd_verify),
        Command::Mass(a) => ("mass", a, cmd_mass),
        Command::Aspect(a) => ("aspect", a, cmd_aspect),
    };
    let config = match args.to_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("tractor-mass {name}: configuration error: {e}");
            return Outcome::ConfigError.code();
        }
    };
    let outcome = match command(&config) {
        Ok(o) => o,
        Err(e) => report_error(name, &config, &e),
    };
    outcome.code()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn run_in(dir: &TempDir, args: &[&str]) -> (i32, String) {
        let out = dir.path().join("out");
        let _ = std::fs::remove_file(&out);
        let mut full = vec!["tractor-mass".to_string()];
        full.extend(args.iter().map(|s| s.to_string()));
        full.push("--out".into());
        full.push(out.display().to_string());
        let code = run(full);
        (code, std::fs::read_to_string(&out).unwrap_or_default())
    }

    #[test]
    fn verify_exit_codes() {
        let dir = TempDir::new().unwrap();
        let (code, text) = run_in(&dir, &["verify"]);
        assert_eq!(code, 0, "{text}");
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["checks"].as_array().unwrap().iter().all(|c| c["status"] == "pass"));
        let (code, text) = run_in(&dir, &["verify", "--family", "aspect-perturbation", "--param", "order=0"]);
        assert_eq!(code, 1);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let eq = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "equivalence").unwrap().clone();
        assert_eq!(eq["status"], "fail");
        let coarse = ["verify", "--family", "schwarzschild-ads", "--param", "m=0.1", "--eps0", "0.5", "--count", "3", "--stages", "1"];
        let (code, text) = run_in(&dir, &coarse);
        assert_eq!(code, 2, "{text}");
        assert!(text.contains("inconclusive nodes"));
    }

    #[test]
    fn config_errors_exit_64() {
        let dir = TempDir::new().unwrap();
        assert_eq!(run_in(&dir, &["mass", "--dim", "9"]).0, 64);
        assert_eq!(run_in(&dir, &["mass", "--bogus"]).0, 64);
        assert_eq!(run_in(&dir, &["mass", "--family", "schwarzschild-ads", "--param", "m=-1"]).0, 64);
        assert_eq!(run_in(&dir, &["mass", "--route", "sideways"]).0, 64);
        assert_eq!(run_in(&dir, &["mass", "--family", "hyperbolic", "--param", "m=1"]).0, 64);
    }

    #[test]
    fn mass_report_schema_and_determinism() {
        let dir = TempDir::new().unwrap();
        let args = ["mass", "--family", "schwarzschild-ads", "--param", "m=0.1", "--level", "2"];
        let (code, a) = run_in(&dir, &args);
        assert_eq!(code, 0, "{a}");
        let (_, b) = run_in(&dir, &args);
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        let reports = v["reports"].as_array().unwrap();
        assert_eq!(reports.len(), 2);
        for r in reports {
            for key in ["route", "n", "family", "params", "p0", "p", "eps_table", "node_count", "checks"] {
                assert!(r.get(key).is_some(), "missing {key}");
            }
        }
        assert_eq!(v["comparison"]["pass"], true);
        let p0 = reports[0]["p0"].as_f64().unwrap();
        assert!((p0 + 1.6 * std::f64::consts::PI).abs() < 1e-6);
        let (code, single) = run_in(&dir, &["mass", "--route", "michel"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&single).unwrap();
        assert_eq!(v["reports"].as_array().unwrap().len(), 1);
        assert!(v["comparison"].is_null());
    }

    #[test]
    fn aspect_csv_output() {
        let dir = TempDir::new().unwrap();
        let (code, zero) = run_in(&dir, &["aspect", "--level", "1"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = zero.lines().collect();
        assert_eq!(lines[0], "index,omega_1,omega_2,omega_3,weight,m,err");
        assert_eq!(lines.len(), 1 + crate::quadrature::sphere_quadrature(2, 1).unwrap().len());
        assert!(lines[1..].iter().all(|l| l.split(',').nth(5) == Some("0")));
        let chi = dir.path().join("chi.json");
        std::fs::write(&chi, "[[1, 1, 1.0]]").unwrap();
        let args = ["aspect", "--family", "aspect-perturbation", "--chi", chi.to_str().unwrap(), "--level", "2"];
        let (code, a) = run_in(&dir, &args);
        assert_eq!(code, 0, "{a}");
        let (_, b) = run_in(&dir, &args);
        assert_eq!(a, b);
        let csv = dir.path().join("aspect.csv");
        let args = ["mass", "--family", "aspect-perturbation", "--chi", chi.to_str().unwrap(), "--level", "2", "--aspect-csv", csv.to_str().unwrap()];
        assert_eq!(run_in(&dir, &args).0, 0);
        assert_eq!(std::fs::read_to_string(&csv).unwrap(), a);
    }

    #[test]
    fn config_file_and_overrides() {
        let dir = TempDir::new().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "family = schwarzschild-ads\nparam.m = 0.2\nlevel = 1\nroute = tractor\n").unwrap();
        let (code, text) = run_in(&dir, &["mass", "--config", cfg.to_str().unwrap(), "--param", "m=0.05"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["reports"][0]["params"]["m"], "0.05");
        std::fs::write(&cfg, "level = many\n").unwrap();
        assert_eq!(run_in(&dir, &["mass", "--config", cfg.to_str().unwrap()]).0, 64);
    }
}
