use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::learning::TrainHistory;

use super::experiment::{ErrorStats, RunRecord};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn rows<T: serde::Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = writer(path)?;
    for item in items {
        w.serialize(item)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    w.flush()?;
    Ok(())
}

/// `raw.csv`: one row per (network, clamp, scheme).
pub fn write_raw(path: &Path, records: &[RunRecord]) -> Result<()> {
    rows(path, records)
}

/// `summary.csv`: one row per (scheme, clamp).
pub fn write_summary(path: &Path, stats: &ErrorStats) -> Result<()> {
    rows(path, &stats.cells)
}

/// One histogram file per scheme, `hist_<scheme>.csv`; when a policy has several clamps the
/// clamp name is appended (`hist_g12_max.csv`). Returns the paths written.
pub fn write_histograms(dir: &Path, stats: &ErrorStats) -> Result<Vec<PathBuf>> {
    let several = {
        let mut clamps: Vec<_> = stats.cells.iter().map(|c| c.clamp).collect();
        clamps.sort();
        clamps.dedup();
        clamps.len() > 1
    };
    let mut written = Vec::new();
    for cell in &stats.cells {
        let name = if several {
            format!("hist_{}_{}.csv", cell.scheme, cell.clamp.name())
        } else {
            format!("hist_{}.csv", cell.scheme)
        };
        let path = dir.join(name);
        rows(&path, &cell.histogram)?;
        written.push(path);
    }
    Ok(written)
}

/// Training history, one row per evaluation. The header is written even when empty.
pub fn write_history(path: &Path, history: &TrainHistory) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epoch", "mean_true_loglik", "mean_objective", "unconverged"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for r in &history.records {
        w.serialize((r.epoch, r.mean_true_loglik, r.mean_objective, r.unconverged))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
