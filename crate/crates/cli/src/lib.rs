//! Batch front end for the `zkw` experiments: JSON configs in, CSV tables
//! and a hashed manifest out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use zkw_core::ZkError;

pub mod experiments;

pub use experiments::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] ZkError),
    #[error("manifests are not comparable: {0}")]
    ManifestMismatch(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXPERIMENTS: [&str; 9] = [
    "solve",
    "norm-inflation-1",
    "norm-inflation-2",
    "trilinear-sweep",
    "weighted-trilinear",
    "counting",
    "decompose",
    "thickened",
    "counterexample",
];

/// 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// A named CSV table held in memory until it is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: String,
    pub rows: Vec<String>,
}

impl Table {
    pub fn new(name: &str, header: &str) -> Self {
        Self {
            name: name.to_string(),
            header: header.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: String) {
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut s = String::with_capacity(self.rows.len() * 64);
        s.push_str(&self.header);
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s.into_bytes()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub metrics: BTreeMap<String, f64>,
    /// fraction of instances skipped for violating a hypothesis
    pub skipped_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub outputs: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
    pub skipped_fraction: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Validates `text` as a config for `experiment`.
pub fn parse_config(experiment: &str, text: &str) -> Result<ExperimentConfig> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    let obj = v
        .as_object()
        .ok_or_else(|| CliError::ConfigInvalid("config must be a JSON object".into()))?;
    let id = obj
        .get("experiment")
        .and_then(|x| x.as_str())
        .ok_or_else(|| CliError::ConfigInvalid("missing \"experiment\"".into()))?;
    if id != experiment {
        return Err(CliError::ConfigInvalid(format!(
            "config is for {id}, invoked as {experiment}"
        )));
    }
    serde_json::from_value(v).map_err(|e| CliError::ConfigInvalid(e.to_string()))
}

/// Runs the experiment inside a pool of `jobs` workers (all cores if unset).
pub fn execute(cfg: &ExperimentConfig, seed: Option<u64>, jobs: Option<usize>) -> Result<Outcome> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j.max(1));
    }
    let pool = b
        .build()
        .map_err(|e| CliError::ConfigInvalid(format!("thread pool: {e}")))?;
    pool.install(|| cfg.run(seed))
}

/// Parses, runs and writes tables plus `manifest.json` into `opts.out`.
pub fn run(experiment: &str, config_path: &Path, opts: &RunOptions) -> Result<(Manifest, Outcome)> {
    let text = fs::read_to_string(config_path)?;
    let cfg = parse_config(experiment, &text)?;
    let seed = opts.seed.or(cfg.seed());
    let outcome = execute(&cfg, seed, opts.jobs)?;
    fs::create_dir_all(&opts.out)?;
    let mut outputs = BTreeMap::new();
    for t in &outcome.tables {
        let bytes = t.to_bytes();
        fs::write(opts.out.join(&t.name), &bytes)?;
        outputs.insert(t.name.clone(), sha256_hex(&bytes));
    }
    let manifest = Manifest {
        experiment: experiment.to_string(),
        config_sha256: sha256_hex(text.as_bytes()),
        seed: if cfg.randomized() { seed } else { None },
        outputs,
        metrics: outcome.metrics.clone(),
        skipped_fraction: outcome.skipped_fraction,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(opts.out.join("manifest.json"), json + "\n")?;
    Ok((manifest, outcome))
}

pub fn exit_code(outcome: &Outcome) -> i32 {
    if outcome.skipped_fraction > 0.5 {
        2
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaFlag {
    Equal,
    WithinDispersion,
    Changed,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDelta {
    pub metric: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub delta: f64,
    pub flag: DeltaFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub experiment: String,
    pub outputs_identical: bool,
    pub deltas: Vec<MetricDelta>,
}

impl CompareReport {
    /// Metrics that differ, excluding the ones inside the recorded dispersion.
    pub fn flagged(&self) -> Vec<&MetricDelta> {
        self.deltas
            .iter()
            .filter(|d| matches!(d.flag, DeltaFlag::Changed | DeltaFlag::Missing))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs_identical && self.deltas.iter().all(|d| d.flag == DeltaFlag::Equal)
    }
}

/// Metric deltas between two manifests of one experiment. Ratio metrics
/// that move by less than the larger recorded `dispersion` are marked as
/// such rather than changed.
pub fn compare(a: &Manifest, b: &Manifest) -> Result<CompareReport> {
    if a.experiment != b.experiment {
        return Err(CliError::ManifestMismatch(format!("{} vs {}", a.experiment, b.experiment)));
    }
    let disp = match (a.metrics.get("dispersion"), b.metrics.get("dispersion")) {
        (Some(x), Some(y)) => Some(x.max(*y)),
        _ => None,
    };
    let mut names: Vec<&String> = a.metrics.keys().chain(b.metrics.keys()).collect();
    names.sort();
    names.dedup();
    let deltas = names
        .into_iter()
        .map(|m| {
            let (x, y) = (a.metrics.get(m).copied(), b.metrics.get(m).copied());
            let (delta, flag) = match (x, y) {
                (Some(x), Some(y)) => {
                    let d = y - x;
                    let same = x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan());
                    let flag = if same {
                        DeltaFlag::Equal
                    } else if m.contains("ratio") && disp.is_some_and(|s| d.abs() <= s) {
                        DeltaFlag::WithinDispersion
                    } else {
                        DeltaFlag::Changed
                    };
                    (d, flag)
                }
                _ => (f64::NAN, DeltaFlag::Missing),
            };
            MetricDelta {
                metric: m.clone(),
                a: x,
                b: y,
                delta,
                flag,
            }
        })
        .collect();
    Ok(CompareReport {
        experiment: a.experiment.clone(),
        outputs_identical: a.outputs == b.outputs,
        deltas,
    })
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))
}
