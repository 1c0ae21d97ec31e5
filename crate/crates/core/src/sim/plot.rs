use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{RatioSummary, Replicate};
use crate::error::{Error, Result};

pub fn write_ratio_csv<W: Write>(w: W, reps: &[Replicate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["replicate", "ratio"])?;
    for r in reps {
        w.write_record([r.index.to_string(), r.ratio.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(w: W, summary: &RatioSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["bin_left", "bin_right", "count"])?;
    for b in &summary.histogram {
        w.write_record([b.left.to_string(), b.right.to_string(), b.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Write the per-replicate ratios and, if requested, the histogram.
pub fn emit_plot_data(
    reps: &[Replicate],
    summary: &RatioSummary,
    ratios_path: &Path,
    hist_path: Option<&Path>,
) -> Result<()> {
    if reps.is_empty() {
        return Err(Error::invalid("no replicates to write"));
    }
    write_ratio_csv(BufWriter::new(File::create(ratios_path)?), reps)?;
    if let Some(p) = hist_path {
        write_histogram_csv(BufWriter::new(File::create(p)?), summary)?;
    }
    Ok(())
}
