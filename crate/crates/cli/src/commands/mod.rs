pub mod backtest;
pub mod behavior;
pub mod evaluate;
pub mod score;
pub mod synth;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use oprank_core::ingest::{self, Rejection};
use oprank_core::model::Calendar;

pub fn require_out(out: Option<&Path>) -> anyhow::Result<PathBuf> {
    let Some(out) = out else {
        bail!("--out <DIR> is required");
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out.to_path_buf())
}

pub fn require_calendar(calendar: Option<&Path>) -> anyhow::Result<Calendar> {
    let Some(path) = calendar else {
        bail!("--calendar <FILE> is required for this command");
    };
    ingest::load_calendar(path).with_context(|| format!("loading {}", path.display()))
}

/// Rejected rows are reported on stderr, not failures.
pub fn report_rejections(label: &str, rejections: &[Rejection]) {
    for rejection in rejections {
        eprintln!("{label}: rejected {rejection}");
    }
}

pub fn create_buffered(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}
