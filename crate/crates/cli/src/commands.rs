//! Command registry and the six built-in commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dualflow::certify::{
    certify_dual, check_equivalence, coercivity_report, default_widths, lambda_threshold_scan, negativity_probe,
    probe_curve, CertReport,
};
use dualflow::flow::{multisolve, random_start, solve, MultisolveOptions, SolveReport};
use dualflow::functionals::Diagnostics;
use dualflow::{io, DualMap, Error, Field, Regime, Result};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    ParameterError,
    NumericFailure,
    Shortfall,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::ParameterError => 2,
            Status::NumericFailure => 3,
            Status::Shortfall => 4,
        }
    }

    pub fn of_error(e: &Error) -> Self {
        match e {
            Error::Parameter(_) | Error::Shape(_) => Status::ParameterError,
            _ => Status::NumericFailure,
        }
    }
}

/// Directory receiving the files of one invocation.
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// Creates `<root>/<UTC timestamp>-<command>`, adding a counter when
    /// the name is taken.
    pub fn create(root: &Path, command: &str) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        let base = format!("{stamp}-{command}");
        for attempt in 0..1000 {
            let name = if attempt == 0 { base.clone() } else { format!("{base}-{attempt}") };
            let path = root.join(name);
            match std::fs::create_dir(&path) {
                Ok(()) => return Ok(Self { path }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e),
            }
        }
        Err(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("could not find a free run directory name under {}", root.display()),
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        io::atomic_write(&self.path.join(name), contents.as_bytes())
            .map_err(|e| Error::Numeric(format!("writing {name}: {e}")))
    }
}

/// The fixed summary keys plus command-specific extras.
#[derive(Debug, Default)]
pub struct Summary {
    pub converged: Option<bool>,
    pub diagnostics: Option<Diagnostics>,
    pub sign_change: Option<(f64, f64)>,
    pub constants: BTreeMap<String, f64>,
    pub extra: Map<String, Value>,
}

impl Summary {
    fn from_report(report: &SolveReport) -> Self {
        let mut s = Self {
            converged: Some(report.converged),
            diagnostics: Some(report.diagnostics),
            sign_change: Some(report.field.range()),
            ..Default::default()
        };
        s.constants.insert("iterations".into(), report.iterations as f64);
        s.constants.insert("boundary_max_abs".into(), report.field.boundary_max_abs());
        s
    }

    fn from_cert(report: &CertReport) -> Self {
        let mut s = Self {
            converged: Some(report.passed()),
            constants: report.constants.clone(),
            ..Default::default()
        };
        s.extra.insert("checks".into(), serde_json::to_value(&report.checks).expect("checks serialize"));
        if !report.notes.is_empty() {
            s.extra.insert("notes".into(), json!(report.notes));
        }
        s
    }

    pub fn to_json(&self, command: &str, config: &RunConfig) -> String {
        let d = self.diagnostics;
        let mut root = Map::new();
        root.insert("command".into(), json!(command));
        root.insert("params".into(), json!(config.model));
        root.insert("converged".into(), json!(self.converged));
        root.insert("energy_I".into(), json!(d.map(|d| d.energy_i)));
        root.insert("energy_J".into(), json!(d.map(|d| d.energy_j)));
        root.insert("mass".into(), json!(d.map(|d| d.mass)));
        root.insert("mu".into(), json!(d.map(|d| d.mu)));
        root.insert("residual_norm".into(), json!(d.map(|d| d.residual_norm)));
        root.insert(
            "sign_change".into(),
            match self.sign_change {
                Some((min, max)) => json!({ "min": min, "max": max }),
                None => Value::Null,
            },
        );
        root.insert("constants".into(), json!(self.constants));
        for (k, v) in &self.extra {
            root.insert(k.clone(), v.clone());
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(root)).expect("summary serializes");
        text.push('\n');
        text
    }
}

/// A named entry point. Implementations write their artifacts into `dir`
/// and return the summary and exit status; `main` writes `summary.json`.
pub trait Command: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, config: &RunConfig, dir: &RunDir) -> Result<(Status, Summary)>;
}

pub struct CommandRegistry {
    commands: Vec<Arc<dyn Command>>,
}

impl Default for CommandRegistry {
    fn default() -> Self {
        Self {
            commands: vec![
                Arc::new(Solve),
                Arc::new(Multisolve),
                Arc::new(CertifyDual),
                Arc::new(CheckEquivalence),
                Arc::new(Probe),
                Arc::new(Sweep),
            ],
        }
    }
}

impl CommandRegistry {
    pub fn get(&self, name: &str) -> Option<Arc<dyn Command>> {
        self.commands.iter().find(|c| c.name() == name).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.commands.iter().map(|c| c.name()).collect()
    }

    pub fn register(&mut self, command: Arc<dyn Command>) {
        self.commands.retain(|c| c.name() != command.name());
        self.commands.push(command);
    }
}

/// Result of [`run_command`].
#[derive(Debug)]
pub struct RunOutcome {
    pub status: Status,
    pub dir: PathBuf,
    /// Error text when the command failed before producing results.
    pub error: Option<String>,
}

/// Creates the run directory, echoes the config, runs the command and
/// writes `summary.json`. Errors after the directory exists are recorded in
/// the summary and mapped to an exit status.
pub fn run_command(registry: &CommandRegistry, name: &str, config: &RunConfig) -> std::io::Result<RunOutcome> {
    let command = registry.get(name).ok_or_else(|| {
        std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("unknown command '{name}' (expected one of {})", registry.names().join(", ")),
        )
    })?;
    let dir = RunDir::create(&config.output_root(), name)?;
    io::atomic_write(&dir.path().join("config.echo"), config.to_toml().as_bytes())?;
    let (status, summary, error) = match command.run(config, &dir) {
        Ok((status, summary)) => (status, summary, None),
        Err(e) => {
            let mut summary = Summary {
                converged: Some(false),
                ..Default::default()
            };
            summary.extra.insert("error".into(), json!(e.to_string()));
            (Status::of_error(&e), summary, Some(e.to_string()))
        }
    };
    io::atomic_write(&dir.path().join("summary.json"), summary.to_json(name, config).as_bytes())?;
    Ok(RunOutcome {
        status,
        dir: dir.path.clone(),
        error,
    })
}

fn write_solution(dir: &RunDir, index: usize, field: &Field) -> Result<()> {
    dir.write(&format!("solution-{index}.field"), &io::write_field(field))
}

struct Solve;

impl Command for Solve {
    fn name(&self) -> &'static str {
        "solve"
    }

    fn run(&self, config: &RunConfig, dir: &RunDir) -> Result<(Status, Summary)> {
        let grid = config.build_grid()?;
        let dual = DualMap::default();
        let params = &config.model;
        let v0 = random_start(&grid, config.run.sector, config.seed(), params.lambda, &dual, config.flow.tol_mass)?;
        let (report, stagnated) = match solve(&v0, params, &config.flow, &dual) {
            Ok(r) => (r, None),
            Err(Error::Stagnation { report, .. }) => (*report, Some("line search stagnated")),
            Err(e) => return Err(e),
        };
        dir.write("diagnostics.csv", &io::write_diagnostics_csv(&report.trace))?;
        write_solution(dir, 0, &report.field)?;
        let mut summary = Summary::from_report(&report);
        if let Some(reason) = stagnated {
            summary.extra.insert("stopped".into(), json!(reason));
        }
        let status = if report.converged { Status::Success } else { Status::NumericFailure };
        Ok((status, summary))
    }
}

struct Multisolve;

impl Command for Multisolve {
    fn name(&self) -> &'static str {
        "multisolve"
    }

    fn run(&self, config: &RunConfig, dir: &RunDir) -> Result<(Status, Summary)> {
        let grid = config.build_grid()?;
        let dual = DualMap::default();
        let options = MultisolveOptions {
            k: config.run.k,
            max_starts: config.run.max_starts,
            deflated_iters: config.run.deflated_iters,
            ..Default::default()
        };
        let outcome = multisolve(&grid, &config.model, &config.flow, &dual, &options)?;
        let all_rows: Vec<_> = outcome.solutions.iter().flat_map(|s| s.trace.iter()).collect();
        dir.write("diagnostics.csv", &io::write_diagnostics_csv(all_rows))?;
        let mut listed = Vec::new();
        for (i, s) in outcome.solutions.iter().enumerate() {
            write_solution(dir, i, &s.field)?;
            dir.write(&format!("diagnostics-{i}.csv"), &io::write_diagnostics_csv(&s.trace))?;
            let (min, max) = s.field.range();
            listed.push(json!({
                "energy_I": s.diagnostics.energy_i,
                "energy_J": s.diagnostics.energy_j,
                "mass": s.diagnostics.mass,
                "mu": s.diagnostics.mu,
                "residual_norm": s.diagnostics.residual_norm,
                "sign_change": { "min": min, "max": max },
                "boundary_max_abs": s.field.boundary_max_abs(),
            }));
        }
        let mut summary = match outcome.solutions.first() {
            Some(best) => Summary::from_report(best),
            None => Summary {
                converged: Some(false),
                ..Default::default()
            },
        };
        summary.constants.insert("pairs_found".into(), outcome.solutions.len() as f64);
        summary.constants.insert("starts_used".into(), outcome.starts_used as f64);
        summary.extra.insert("solutions".into(), Value::Array(listed));
        summary.extra.insert("shortfall".into(), json!(outcome.shortfall));
        let status = match (outcome.solutions.is_empty(), outcome.shortfall) {
            (true, _) => Status::NumericFailure,
            (false, true) => Status::Shortfall,
            (false, false) => Status::Success,
        };
        Ok((status, summary))
    }
}

fn cert_status(report: &CertReport) -> Status {
    if report.passed() {
        Status::Success
    } else {
        Status::NumericFailure
    }
}

struct CertifyDual;

impl Command for CertifyDual {
    fn name(&self) -> &'static str {
        "certify-dual"
    }

    fn run(&self, config: &RunConfig, _dir: &RunDir) -> Result<(Status, Summary)> {
        let report = certify_dual(&DualMap::default(), config.run.sample_count)?;
        Ok((cert_status(&report), Summary::from_cert(&report)))
    }
}

struct CheckEquivalence;

impl Command for CheckEquivalence {
    fn name(&self) -> &'static str {
        "check-equivalence"
    }

    fn run(&self, config: &RunConfig, _dir: &RunDir) -> Result<(Status, Summary)> {
        let report = check_equivalence(&config.model, &config.run.grid_sizes, config.run.trials, config.seed())?;
        Ok((cert_status(&report), Summary::from_cert(&report)))
    }
}

struct Probe;

impl Command for Probe {
    fn name(&self) -> &'static str {
        "probe"
    }

    fn run(&self, config: &RunConfig, dir: &RunDir) -> Result<(Status, Summary)> {
        let grid = config.build_grid()?;
        let dual = DualMap::default();
        let widths = if config.run.widths.is_empty() {
            default_widths(&grid)
        } else {
            config.run.widths.clone()
        };
        let curve: Vec<(f64, f64)> = probe_curve(&config.model, &dual, &widths, &grid)?
            .into_iter()
            .filter_map(|(b, e)| e.map(|e| (b, e)))
            .collect();
        dir.write("curve.csv", &io::write_curve_csv("width", "energy_I", &curve))?;
        let (best, width) = curve
            .iter()
            .map(|&(b, e)| (e, b))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .ok_or_else(|| Error::Degenerate("every trial width vanished on the grid".into()))?;
        let mut summary = Summary::from_cert(&coercivity_report(&config.model)?);
        summary.converged = None;
        summary.constants.insert("best_I".into(), best);
        summary.constants.insert("best_width".into(), width);
        Ok((Status::Success, summary))
    }
}

struct Sweep;

impl Command for Sweep {
    fn name(&self) -> &'static str {
        "sweep"
    }

    fn run(&self, config: &RunConfig, dir: &RunDir) -> Result<(Status, Summary)> {
        let grid = config.build_grid()?;
        let dual = DualMap::default();
        let mut summary = Summary::from_cert(&coercivity_report(&config.model)?);
        summary.converged = None;
        let lambdas = &config.run.lambda_grid;
        let (curve, lambda_star, warnings) = match config.model.regime() {
            Regime::Intermediate => {
                let scan = lambda_threshold_scan(&config.model, &dual, lambdas, &grid)?;
                summary.extra.insert("upward_closed".into(), json!(scan.upward_closed));
                (scan.curve, scan.lambda_star, scan.warnings)
            }
            Regime::Subcritical => {
                let widths = default_widths(&grid);
                let mut curve = Vec::with_capacity(lambdas.len());
                for &lambda in lambdas {
                    let (best, _) = negativity_probe(&config.model.with_lambda(lambda)?, &dual, &widths, &grid)?;
                    curve.push((lambda, best));
                }
                let star = curve.iter().find(|(_, e)| *e < 0.0).map(|(l, _)| *l);
                (curve, star, Vec::new())
            }
        };
        dir.write("curve.csv", &io::write_curve_csv("lambda", "best_I", &curve))?;
        summary.extra.insert("lambda_star".into(), json!(lambda_star));
        if !warnings.is_empty() {
            summary.extra.insert("warnings".into(), json!(warnings));
        }
        Ok((Status::Success, summary))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_the_six_commands() {
        let names = CommandRegistry::default().names();
        assert_eq!(
            names,
            ["solve", "multisolve", "certify-dual", "check-equivalence", "probe", "sweep"]
        );
    }

    #[test]
    fn error_kinds_map_to_statuses() {
        assert_eq!(Status::of_error(&Error::Parameter("x".into())).code(), 2);
        assert_eq!(Status::of_error(&Error::Numeric("x".into())).code(), 3);
        assert_eq!(Status::Shortfall.code(), 4);
    }

    #[test]
    fn summary_always_carries_the_fixed_keys() {
        let config = crate::config::parse_config("[model]\nN = 4\nm = 2\np = 3.0\nlambda = 10.0\n").unwrap();
        let text = Summary::default().to_json("probe", &config);
        let value: Value = serde_json::from_str(&text).unwrap();
        for key in [
            "command",
            "params",
            "converged",
            "energy_I",
            "energy_J",
            "mass",
            "mu",
            "residual_norm",
            "sign_change",
            "constants",
        ] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        assert_eq!(value["params"]["N"], 4);
    }
}
