use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ks1d_core::Outcome;
use serde::Serialize;

use crate::config::{is_numeric_key, parse_config, with_override};
use crate::scenario::run_scenario;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub value: String,
    pub dir: PathBuf,
    pub summary: Option<PathBuf>,
    pub outcome: Option<Outcome>,
    pub violations: Option<usize>,
    pub exit_code: i32,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepIndex {
    pub key: String,
    pub entries: Vec<SweepEntry>,
}

impl SweepIndex {
    /// 1 if any run failed, else 2 if any flagged violations, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.entries.iter().any(|e| e.exit_code == 1) {
            1
        } else if self.entries.iter().any(|e| e.exit_code == 2) {
            2
        } else {
            0
        }
    }
}

/// Parses `key=v1,v2,...`.
pub fn parse_axis(axis: &str) -> Result<(String, Vec<String>), CliError> {
    let (key, list) = axis
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("axis `{axis}` is not of the form key=v1,v2,...")))?;
    let key = key.trim().to_string();
    let values: Vec<String> = list
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    Ok((key, values))
}

fn run_one(template: &str, key: &str, value: &str, dir: &Path) -> SweepEntry {
    let mut entry = SweepEntry {
        value: value.into(),
        dir: dir.to_path_buf(),
        summary: None,
        outcome: None,
        violations: None,
        exit_code: 1,
        error: None,
    };
    let result = parse_config(&with_override(template, key, value))
        .map_err(CliError::from)
        .and_then(|config| run_scenario(&config, dir));
    match result {
        Ok(s) => {
            entry.summary = Some(dir.join("summary.json"));
            entry.outcome = s.outcome;
            entry.violations = Some(s.violations.total());
            entry.exit_code = s.exit_code();
        }
        Err(e) => entry.error = Some(e.to_string()),
    }
    entry
}

/// Runs `template` once per value of `key`, `jobs` runs at a time, each in
/// `out_dir/<key>=<value>`, and writes `out_dir/index.json`.
pub fn sweep(template: &str, key: &str, values: &[String], jobs: usize, out_dir: &Path) -> Result<SweepIndex, CliError> {
    if !is_numeric_key(key) {
        return Err(CliError::Usage(format!("`{key}` is not a numeric configuration key")));
    }
    if values.is_empty() {
        return Err(CliError::Usage("sweep axis has no values".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.parse::<f64>().map(f64::is_finite).unwrap_or(false)) {
        return Err(CliError::Usage(format!("axis value `{v}` is not a finite number")));
    }
    parse_config(template)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SweepEntry>>> = Mutex::new(vec![None; values.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, values.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(value) = values.get(k) else { break };
                let dir = out_dir.join(format!("{key}={value}"));
                let entry = run_one(template, key, value, &dir);
                slots.lock().expect("sweep slots")[k] = Some(entry);
            });
        }
    });
    let entries = slots
        .into_inner()
        .expect("sweep slots")
        .into_iter()
        .map(|e| e.expect("every value ran"))
        .collect();
    let index = SweepIndex {
        key: key.into(),
        entries,
    };
    let path = out_dir.join("index.json");
    fs::write(&path, serde_json::to_string_pretty(&index)? + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(index)
}
