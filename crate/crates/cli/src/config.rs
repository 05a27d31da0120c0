//! Run configuration: four TOML sections, `[model]`, `[grid]`, `[flow]` and
//! `[run]`. Unknown keys are errors.

use std::path::PathBuf;
use std::sync::Arc;

use dualflow::flow::{FlowConfig, MethodRegistry};
use dualflow::{Error, ModelParams, ReducedGrid, Result, Sector};
use serde::{Deserialize, Serialize};

/// Environment variable naming the output root when `run.output_dir` is unset.
pub const OUTPUT_ENV: &str = "DUALFLOW_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub run: RunOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Outer radius of the box in every reduced variable.
    #[serde(rename = "L")]
    pub length: f64,
    /// Cells per axis.
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { length: 8.0, n: 128 }
    }
}

/// Command-specific options. The seed lives in `[flow]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub sector: Sector,
    /// multisolve
    pub k: usize,
    pub max_starts: usize,
    pub deflated_iters: usize,
    /// certify-dual
    pub sample_count: usize,
    /// check-equivalence
    pub grid_sizes: Vec<usize>,
    pub trials: usize,
    /// sweep
    pub lambda_grid: Vec<f64>,
    /// probe and sweep; empty means log-spaced widths from `2h` to `L/6`
    pub widths: Vec<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            output_dir: None,
            sector: Sector::Antisymmetric,
            k: 3,
            max_starts: 12,
            deflated_iters: 5,
            sample_count: 10_000,
            grid_sizes: vec![64, 128, 256],
            trials: 5,
            lambda_grid: (0..=12).map(|i| 10f64.powf(-2.0 + 0.5 * i as f64)).collect(),
            widths: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.flow.seed
    }

    pub fn build_grid(&self) -> Result<Arc<ReducedGrid>> {
        Ok(Arc::new(ReducedGrid::new(self.model, self.grid.length, self.grid.n)?))
    }

    /// `run.output_dir`, else the environment variable, else `runs`.
    pub fn output_root(&self) -> PathBuf {
        self.run
            .output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.flow.validate()?;
        MethodRegistry::default().get(&self.flow.method)?;
        ReducedGrid::check(&self.model, self.grid.length, self.grid.n)?;
        let r = &self.run;
        let bad = |what: String| Err(Error::Parameter(what));
        // TOML integers are signed 64-bit
        if self.flow.seed > i64::MAX as u64 {
            return bad(format!("flow.seed must be at most {} (got {})", i64::MAX, self.flow.seed));
        }
        if r.k == 0 {
            return bad("run.k must be at least 1".into());
        }
        if r.max_starts == 0 {
            return bad("run.max_starts must be at least 1".into());
        }
        if r.sample_count < dualflow::certify::MIN_SAMPLES {
            return bad(format!(
                "run.sample_count must be at least {} (got {})",
                dualflow::certify::MIN_SAMPLES,
                r.sample_count
            ));
        }
        if r.trials < 5 {
            return bad(format!("run.trials must be at least 5 (got {})", r.trials));
        }
        if r.grid_sizes.len() < 2 || r.grid_sizes.windows(2).any(|w| w[0] >= w[1]) || r.grid_sizes[0] < 16 {
            return bad("run.grid_sizes needs at least two increasing sizes of 16 or more".into());
        }
        if r.lambda_grid.is_empty()
            || r.lambda_grid.iter().any(|l| !(*l > 0.0 && l.is_finite()))
            || r.lambda_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("run.lambda_grid must be nonempty, positive and increasing".into());
        }
        if r.widths.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return bad("run.widths must be positive".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses and validates a config.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_with_overrides(text, &[])
}

/// Applies `section.key=value` overrides to the parsed document before
/// validation. Values are read as TOML, falling back to a bare string.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parameter(format!("config: {e}")))?;
    for entry in overrides {
        apply_override(&mut doc, entry)?;
    }
    let config: RunConfig = doc
        .try_into()
        .map_err(|e: toml::de::Error| Error::Parameter(format!("config: {}", e.message())))?;
    config.validate()?;
    Ok(config)
}

fn apply_override(doc: &mut toml::Table, entry: &str) -> Result<()> {
    let bad = |what: String| Error::Parameter(format!("--set {entry}: {what}"));
    let (key, raw) = entry.split_once('=').ok_or_else(|| bad("expected section.key=value".into()))?;
    let (section, name) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| bad("key must be section.key".into()))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let table = doc
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match table {
        toml::Value::Table(t) => {
            t.insert(name.to_string(), value);
            Ok(())
        }
        _ => Err(bad(format!("'{section}' is not a section"))),
    }
}
