//! Command-line front end. [`dispatch`] parses arguments, runs one
//! subcommand and returns the process exit code:
//! `0` on success, `1` on a domain error (JSON body on stderr) or a failed
//! verification, `2` on a usage error.

pub mod svg;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use zeromass::atlas::atlas;
use zeromass::exponent_plane::{classify_region, Domain, ExponentConfig};
use zeromass::fibering::{self, Functionals};
use zeromass::nehari::{self, NehariOptions};
use zeromass::parabolic::{self, EvolveOptions};
use zeromass::profile::{ProfileHeader, RadialProfile};
use zeromass::radial::{self, SolverOptions};
use zeromass::stability::{self, SpectralOptions};

pub use svg::render_atlas_svg;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}

/// Environment variable holding the default output directory.
pub const OUT_ENV: &str = "ZEROMASS_OUT";

#[derive(Debug, Parser, Serialize)]
#[command(name = "zeromass", version, about = "Radial laboratory for -Δu = λ|u|^{p-2}u - |u|^{q-2}u")]
pub struct Cli {
    /// Directory for artifacts.
    #[arg(long, global = true, env = OUT_ENV, default_value = "zeromass-out")]
    pub out: PathBuf,
    /// Seed for randomized probes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance override `key=value`; may repeat.
    #[arg(long = "tol", global = true, value_parser = parse_tol)]
    pub tol: Vec<(String, f64)>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|e| format!("{v:?}: {e}"))?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(format!("tolerance must be a positive number, got {v}"));
    }
    Ok((k.trim().to_string(), v))
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {v}"))
    }
}

fn nonnegative_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a nonnegative number, got {v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainArg {
    Entire,
    Ball,
    Exterior,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Exponents {
    #[arg(long, allow_negative_numbers = true)]
    pub p: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub q: f64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub dim: u32,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = DomainArg::Entire)]
    pub domain: DomainArg,
    /// Radius of the ball or of the excluded ball.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub radius: f64,
}

impl Exponents {
    fn config(&self) -> ExponentConfig {
        let domain = match self.domain {
            DomainArg::Entire => Domain::Entire,
            DomainArg::Ball => Domain::Ball { radius: self.radius },
            DomainArg::Exterior => Domain::Exterior { radius: self.radius },
        };
        ExponentConfig::new(self.p, self.q, self.dim, self.lambda, domain)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BallArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub p: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub q: f64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub dim: u32,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true, value_parser = positive_f64)]
    pub radius: f64,
    /// Grid nodes.
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(16..))]
    pub nodes: u64,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Necessary conditions and predicted sign of E'' for one configuration.
    Classify(Exponents),
    /// Sweep of the classifier over a window of the (p, q) plane.
    Atlas {
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        p_min: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 8.0)]
        p_max: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        q_min: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 8.0)]
        q_max: f64,
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(2..))]
        steps: u64,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        dim: u32,
        #[arg(long, value_enum, default_value_t = DomainArg::Entire)]
        domain: DomainArg,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
        radius: f64,
    },
    /// Fibering map of a function given by its functionals.
    Fiber {
        #[arg(long, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, allow_negative_numbers = true)]
        q: f64,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long = "T", allow_negative_numbers = true)]
        #[serde(rename = "T")]
        t: f64,
        #[arg(long = "A", allow_negative_numbers = true)]
        #[serde(rename = "A")]
        a: f64,
        #[arg(long = "B", allow_negative_numbers = true)]
        #[serde(rename = "B")]
        b: f64,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        dim: u32,
    },
    /// Radial ground state by shooting.
    Solve {
        #[command(flatten)]
        #[serde(flatten)]
        exponents: Exponents,
        /// Run even where the necessary existence conditions fail.
        #[arg(long)]
        override_region: bool,
    },
    /// Nehari minimisation on a ball.
    Nehari {
        #[command(flatten)]
        #[serde(flatten)]
        ball: BallArgs,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
    },
    /// Fold threshold estimate with its falsification certificate.
    LambdaStar {
        #[command(flatten)]
        #[serde(flatten)]
        ball: BallArgs,
        #[arg(long, default_value_t = 24)]
        probes: usize,
    },
    /// First eigenvalue of the linearisation about a stored profile.
    Spectrum {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 4096, value_parser = clap::value_parser!(u64).range(16..))]
        nodes: u64,
    },
    /// Gradient flow from a stored profile.
    Evolve {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 1e-4, allow_negative_numbers = true, value_parser = positive_f64)]
        dt: f64,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true, value_parser = nonnegative_f64)]
        t_end: f64,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        record_every: u64,
        #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(16..))]
        nodes: u64,
        /// Truncation radius for entire-space data.
        #[arg(long, allow_negative_numbers = true, value_parser = positive_f64)]
        radius: Option<f64>,
    },
    /// Acceptance battery.
    Verify {
        #[arg(long, default_value = "core", value_parser = ["core"])]
        suite: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::Atlas { .. } => "atlas",
            Command::Fiber { .. } => "fiber",
            Command::Solve { .. } => "solve",
            Command::Nehari { .. } => "nehari",
            Command::LambdaStar { .. } => "lambda-star",
            Command::Spectrum { .. } => "spectrum",
            Command::Evolve { .. } => "evolve",
            Command::Verify { .. } => "verify",
        }
    }

    fn tolerance_keys(&self) -> &'static [&'static str] {
        match self {
            Command::Solve { .. } => &["rtol", "gap_tol", "tail_tol"],
            Command::Nehari { .. } | Command::LambdaStar { .. } => &["rel_change"],
            Command::Evolve { .. } => &["converge_tol"],
            _ => &[],
        }
    }
}

/// Everything needed to reproduce an artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub params: Value,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub tolerances: BTreeMap<String, f64>,
    pub version: String,
}

impl RunConfig {
    fn from_cli(cli: &Cli) -> Result<Self, Failure> {
        let keys = cli.command.tolerance_keys();
        let mut tolerances = BTreeMap::new();
        for (k, v) in &cli.tol {
            if !keys.contains(&k.as_str()) {
                return Err(Failure::Usage(format!(
                    "--tol: unknown key {k:?} for {} (accepted: {})",
                    cli.command.name(),
                    if keys.is_empty() { "none".to_string() } else { keys.join(", ") }
                )));
            }
            tolerances.insert(k.clone(), *v);
        }
        let params = serde_json::to_value(&cli.command).expect("arguments serialise");
        // Unit variants serialise as strings, struct variants as one-key maps.
        let params = match params {
            Value::Object(mut m) if m.len() == 1 => m.remove(cli.command.name()).unwrap_or(Value::Null),
            other => other,
        };
        Ok(Self {
            subcommand: cli.command.name().to_string(),
            params,
            seed: cli.seed,
            output_dir: cli.out.clone(),
            tolerances,
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }

    fn tol(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(zeromass::Error),
    Io(String),
    VerifyFailed(usize),
}

impl From<zeromass::Error> for Failure {
    fn from(e: zeromass::Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = RunConfig::from_cli(&cli).and_then(|rc| run(&cli, &rc));
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            1
        }
        Err(Failure::Io(msg)) => {
            eprintln!("{}", json!({ "error": { "kind": "Io", "message": msg } }));
            1
        }
        Err(Failure::VerifyFailed(n)) => {
            eprintln!("{}", json!({ "error": { "kind": "VerifyFailed", "message": format!("{n} criteria failed") } }));
            1
        }
    }
}

fn write_json(dir: &Path, name: &str, rc: &RunConfig, result: Value) -> Result<Value, Failure> {
    let doc = json!({ "run_config": rc, "result": result });
    fs::write(dir.join(name), serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
    Ok(doc)
}

fn with_config_line(rc: &RunConfig, body: &str) -> String {
    format!("# run_config: {}\n{body}", serde_json::to_string(rc).expect("json"))
}

/// Profile CSV with its own header first, then the run configuration.
fn profile_csv(profile: &RadialProfile, p: f64, q: f64, lambda: f64, rc: &RunConfig) -> String {
    let csv = profile.to_csv(&ProfileHeader::new(profile, p, q, lambda));
    let (head, rest) = csv.split_once('\n').unwrap_or((&csv, ""));
    format!("{head}\n# run_config: {}\n{rest}", serde_json::to_string(rc).expect("json"))
}

fn print(doc: &Value) {
    println!("{}", serde_json::to_string_pretty(doc).expect("json"));
}

/// Drops the bulky profile arrays, which go to CSV instead.
fn without(mut v: Value, keys: &[&str]) -> Value {
    if let Value::Object(m) = &mut v {
        for k in keys {
            m.remove(*k);
        }
    }
    v
}

fn read_profile(path: &Path) -> Result<(RadialProfile, ProfileHeader), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(RadialProfile::from_csv(&text)?)
}

fn nehari_options(ball: &BallArgs, rc: &RunConfig) -> NehariOptions {
    let d = NehariOptions::default();
    NehariOptions { nodes: ball.nodes as usize, rel_change: rc.tol("rel_change", d.rel_change), ..d }
}

fn run(cli: &Cli, rc: &RunConfig) -> Result<(), Failure> {
    let out = &cli.out;
    fs::create_dir_all(out).map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
    match &cli.command {
        Command::Classify(e) => {
            let report = classify_region(&e.config())?;
            print(&write_json(out, "classify.json", rc, serde_json::to_value(report).expect("json"))?);
        }
        Command::Atlas { p_min, p_max, q_min, q_max, steps, dim, domain, radius } => {
            let ex = Exponents { p: 1.0, q: 2.0, dim: *dim, lambda: 1.0, domain: *domain, radius: *radius };
            let table = atlas((*p_min, *p_max), (*q_min, *q_max), *steps as usize, *dim, ex.config().domain)?;
            fs::write(out.join("atlas.csv"), with_config_line(rc, &table.to_csv()))?;
            let svg = render_atlas_svg(&table);
            let svg = svg.replacen(
                '\n',
                &format!("\n<!-- run_config: {} -->\n", serde_json::to_string(rc).expect("json").replace("--", "- -")),
                1,
            );
            fs::write(out.join("atlas.svg"), svg)?;
            let summary = json!({
                "dim": table.dim,
                "domain": table.domain,
                "steps": table.steps,
                "rows": table.rows.len(),
                "curve_cells": table.curve_cells.len(),
                "files": ["atlas.csv", "atlas.svg"],
            });
            print(&write_json(out, "atlas.json", rc, summary)?);
        }
        Command::Fiber { p, q, lambda, t, a, b, dim } => {
            let f = Functionals::new(*t, *a, *b);
            let points = fibering::stationary_points(&f, *lambda, *p, *q)?;
            let diag = fibering::diagnostics(&f, *lambda, *p, *q, *dim);
            let result = json!({
                "stationary_points": points,
                "lambda_u": fibering::rayleigh_lambda(&f, *p, *q).ok(),
                "lambda_E_u": fibering::rayleigh_lambda_e(&f, *p, *q).ok(),
                "diagnostics": diag,
            });
            print(&write_json(out, "fiber.json", rc, result)?);
        }
        Command::Solve { exponents, override_region } => {
            let cfg = exponents.config();
            let d = SolverOptions::default();
            let opts = SolverOptions {
                rtol: rc.tol("rtol", d.rtol),
                gap_tol: rc.tol("gap_tol", d.gap_tol),
                tail_tol: rc.tol("tail_tol", d.tail_tol),
                override_region: *override_region,
                ..d
            };
            let report = radial::solve(&cfg, &opts)?;
            fs::write(out.join("profile.csv"), profile_csv(&report.profile, cfg.p, cfg.q, cfg.lambda, rc))?;
            let mut v = without(serde_json::to_value(&report).expect("json"), &["profile"]);
            v["energy"] = json!(report.energy());
            v["validated"] = json!(report.is_validated());
            v["support_radius"] = json!(report.profile.support_radius);
            print(&write_json(out, "solve.json", rc, v)?);
        }
        Command::Nehari { ball, lambda } => {
            let opts = nehari_options(ball, rc);
            let gs = nehari::minimize_ground_state_with(ball.p, ball.q, ball.dim, ball.radius, *lambda, &opts)?;
            fs::write(out.join("profile.csv"), profile_csv(&gs.report.profile, ball.p, ball.q, *lambda, rc))?;
            let mut v = serde_json::to_value(&gs).expect("json");
            v["report"] = without(v["report"].take(), &["profile"]);
            print(&write_json(out, "nehari.json", rc, v)?);
        }
        Command::LambdaStar { ball, probes } => {
            let opts = nehari_options(ball, rc);
            let est = nehari::estimate_lambda_star_with(ball.p, ball.q, ball.dim, ball.radius, &opts)?;
            let cert = nehari::certify_threshold(&est, ball.p, ball.q, ball.dim, ball.radius, *probes, cli.seed, &opts)?;
            let grid = zeromass::grid::RadialGrid::new(ball.dim, ball.radius, ball.nodes as usize);
            let prof = grid.to_profile(&est.minimizer);
            fs::write(out.join("minimizer.csv"), profile_csv(&prof, ball.p, ball.q, est.lambda_star, rc))?;
            let v = json!({
                "estimate": est,
                "ratio": est.lambda_e_star / est.lambda_star,
                "certificate": cert,
                "certificate_passed": cert.passed(),
            });
            print(&write_json(out, "lambda_star.json", rc, v)?);
        }
        Command::Spectrum { profile, nodes } => {
            let (prof, header) = read_profile(profile)?;
            let opts = SpectralOptions { nodes: *nodes as usize, ..Default::default() };
            let rep = stability::min_eigenvalue_with(&prof, header.lambda, header.p, header.q, &opts)?;
            fs::write(out.join("eigenfunction.csv"), profile_csv(&rep.eigenfunction, header.p, header.q, header.lambda, rc))?;
            let v = without(serde_json::to_value(&rep).expect("json"), &["eigenfunction"]);
            print(&write_json(out, "spectrum.json", rc, v)?);
        }
        Command::Evolve { profile, dt, t_end, record_every, nodes, radius } => {
            let (prof, header) = read_profile(profile)?;
            let d = EvolveOptions::default();
            let opts = EvolveOptions {
                dt: *dt,
                t_end: *t_end,
                record_every: *record_every as usize,
                nodes: *nodes as usize,
                radius: *radius,
                converge_tol: rc.tol("converge_tol", d.converge_tol),
                ..d
            };
            let traj = parabolic::evolve_with(&prof, header.lambda, header.p, header.q, &opts)?;
            let dir = out.join("trajectory");
            fs::create_dir_all(&dir)?;
            let mut files = Vec::new();
            for (k, snap) in traj.snapshots.iter().enumerate() {
                let name = format!("snapshot_{k:05}.csv");
                fs::write(dir.join(&name), profile_csv(snap, header.p, header.q, header.lambda, rc))?;
                files.push(name);
            }
            let fitted = parabolic::growth_rate_fit(&traj, &prof).ok();
            let mut v = serde_json::to_value(&traj).expect("json");
            v["fitted_rate"] = json!(fitted);
            v["energy_identity_residual"] = json!(traj.energy_identity_residual());
            v["snapshots"] = json!(files);
            let doc = write_json(&dir, "trajectory.json", rc, v)?;
            print(&doc);
        }
        Command::Verify { .. } => {
            let report = zeromass::verify::run_all();
            for c in &report.criteria {
                println!("{}", c.line());
            }
            write_json(out, "verify.json", rc, serde_json::to_value(&report).expect("json"))?;
            let failed = report.criteria.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(Failure::VerifyFailed(failed));
            }
        }
    }
    Ok(())
}
