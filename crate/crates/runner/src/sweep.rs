//! Parameter sweeps on a bounded pool of worker threads.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{info, warn};

use crate::config::{numeric_keys, ConfigError, ScenarioConfig};
use crate::{execute, RunError, RunReport};

#[derive(Debug)]
pub struct SweepCell {
    pub value: String,
    pub dir: PathBuf,
    pub result: Result<RunReport, RunError>,
}

/// Directory for one cell: `<param>=<value>` under `root`.
pub fn cell_dir(root: &Path, param: &str, value: &str) -> PathBuf {
    root.join(format!("{param}={value}"))
}

/// Run `base` once per value of `param`, at most `jobs` at a time. Cells are
/// returned in the order of `values`; a failing cell does not stop the rest.
pub fn sweep(base: &ScenarioConfig, param: &str, values: &[String], jobs: usize, root: &Path) -> Result<Vec<SweepCell>, ConfigError> {
    if !numeric_keys().any(|k| k == param) {
        return Err(ConfigError::UnknownKey { key: param.into(), line: 0 });
    }
    // validate every value before any work starts
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            cfg.set(param, v)?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;

    let slots: Vec<Mutex<Option<SweepCell>>> = values.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(values.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                let dir = cell_dir(root, param, &values[i]);
                info!("sweep cell {param} = {}", values[i]);
                let result = execute(cfg, &dir);
                if let Err(e) = &result {
                    warn!("sweep cell {param} = {} failed: {e}", values[i]);
                }
                *slots[i].lock().unwrap() = Some(SweepCell { value: values[i].clone(), dir, result });
            });
        }
    });
    Ok(slots.into_iter().map(|s| s.into_inner().unwrap().expect("every cell runs")).collect())
}
