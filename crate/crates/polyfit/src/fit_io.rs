//! Fit outputs: result JSON with wall time and the loss history CSV.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use polyfit_core::training::FitResult;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fit plus the time it took. The timing is the only field that differs
/// between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedFit {
    pub wall_time_s: f64,
    #[serde(flatten)]
    pub fit: FitResult,
}

/// Runs `f` and records its wall time.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

/// `epoch,loss` with one row per completed epoch.
pub fn loss_history_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (k, l) in history.iter().enumerate() {
        let _ = writeln!(s, "{},{}", k + 1, l);
    }
    s
}

/// `mode,r2,mae,split,note` for the training and validation curves.
pub fn metrics_csv(fit: &FitResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let fail = |e: csv::Error| Error::Data(format!("cannot encode CSV: {e}"));
    w.write_record(["split", "mode", "r2", "mae", "note"]).map_err(fail)?;
    for (split, ms) in [("train", &fit.train_metrics), ("validation", &fit.validation_metrics)] {
        for m in ms {
            w.write_record([split, m.mode.name(), &opt(m.r2), &opt(m.mae), m.note.as_deref().unwrap_or("")]).map_err(fail)?;
        }
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Data(e.to_string()))?).map_err(|e| Error::Data(e.to_string()))
}

pub fn save_fit(fit: &FitResult, wall: Duration, path: &Path) -> Result<()> {
    crate::write_json(path, &TimedFit { wall_time_s: wall.as_secs_f64(), fit: fit.clone() })
}
