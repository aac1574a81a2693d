use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::run::{PointSummary, ScenarioOutput};
use crate::error::{Error, Result};
use crate::metrics::TrialResult;
use crate::spectral::MaskReport;

pub const RESULTS_FILE: &str = "results.csv";
pub const ENVELOPE_FILE: &str = "envelope.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a run; `config` can be fed back to `run`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub mask: Option<MaskReport>,
    pub points: Vec<PointSummary>,
}

impl RunManifest {
    pub fn new(cfg: &ScenarioConfig, output: &ScenarioOutput) -> Self {
        Self {
            version: format!("{}-{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            seed: cfg.seed,
            config: cfg.clone(),
            mask: output.mask_report.clone(),
            points: output.points.clone(),
        }
    }
}

pub fn results_csv(results: &[TrialResult]) -> String {
    let mut out = String::from(TrialResult::CSV_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Highest-AIR constellation at every (scheme, SNR) pair, in first-seen order.
pub fn envelope(results: &[TrialResult]) -> Vec<TrialResult> {
    let mut best: Vec<TrialResult> = Vec::new();
    for r in results {
        match best.iter_mut().find(|b| b.scheme == r.scheme && b.snr_db == r.snr_db) {
            Some(b) if r.air_mbps > b.air_mbps => *b = r.clone(),
            Some(_) => {}
            None => best.push(r.clone()),
        }
    }
    best
}

/// Accepts either a bare scenario config or a run manifest.
pub fn config_from_document(text: &str) -> Result<ScenarioConfig> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("config") {
        Some(inner) => {
            let cfg: ScenarioConfig = serde_json::from_value(inner.clone())?;
            cfg.validate()?;
            Ok(cfg)
        }
        None => ScenarioConfig::from_json(text),
    }
}

/// Writes `results.csv`, `envelope.csv` and `manifest.json` into `dir`.
pub fn emit_results(dir: &Path, cfg: &ScenarioConfig, output: &ScenarioOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(RESULTS_FILE), results_csv(&output.results))?;
    fs::write(dir.join(ENVELOPE_FILE), results_csv(&envelope(&output.results)))?;
    let manifest = serde_json::to_string_pretty(&RunManifest::new(cfg, output)).map_err(Error::from)?;
    fs::write(dir.join(MANIFEST_FILE), manifest + "\n")?;
    Ok(())
}
