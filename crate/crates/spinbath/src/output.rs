//! CSV and JSON writers.
//!
//! All numbers are printed through one fixed-precision formatter and rows are
//! emitted in deterministic order, so identical runs produce byte-identical
//! files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::chaos::{SpacingStatistics, s0_crossing};
use crate::error::{Error, Result};
use crate::hamiltonian::LabHamiltonian;
use crate::powder::{LocalFieldCurve, PowderAverage};
use crate::propagator::TrajectoryRecord;
use crate::structure::SpinSystem;

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// One trajectory: `time_s` plus P_z per recorded carbon.
pub fn write_trajectory(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["time_s".to_string()];
    header.extend(record.site_ids.iter().map(|id| format!("pz_site{id}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, &t) in record.times.iter().enumerate() {
        let mut row = vec![fmt(t)];
        row.extend(record.pz.iter().map(|series| fmt(series[i])));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// Powder mean and standard error: `time_s`, then `mean_site*`/`stderr_site*`
/// column pairs.
pub fn write_aggregate(path: &Path, avg: &PowderAverage) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["time_s".to_string()];
    for id in &avg.site_ids {
        header.push(format!("mean_site{id}"));
        header.push(format!("stderr_site{id}"));
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, &t) in avg.times.iter().enumerate() {
        let mut row = vec![fmt(t)];
        for k in 0..avg.site_ids.len() {
            row.push(fmt(avg.mean[k][i]));
            row.push(fmt(avg.stderr[k][i]));
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// Local-field dispersion curve: `n_protons, added_site_id, b_rad_s`.
pub fn write_local_field(path: &Path, curve: &LocalFieldCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["n_protons", "added_site_id", "b_rad_s"])
        .map_err(|e| csv_err(path, e))?;
    w.write_record(["0", "", &fmt(curve.b_rad_s[0])])
        .map_err(|e| csv_err(path, e))?;
    for (k, &id) in curve.proton_ids.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            id.to_string(),
            fmt(curve.b_rad_s[k + 1]),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// Spacing histogram: `s_lo, s_hi, density`.
pub fn write_spacing_histogram(path: &Path, stats: &SpacingStatistics) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["s_lo", "s_hi", "density"])
        .map_err(|e| csv_err(path, e))?;
    let h = &stats.histogram;
    for (k, &d) in h.density.iter().enumerate() {
        w.write_record([fmt(h.edge(k)), fmt(h.edge(k) + h.bin_width), fmt(d)])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// Read a spacing histogram back from the CSV produced by
/// [`write_spacing_histogram`], so η can be recomputed offline.
pub fn read_spacing_histogram(path: &Path) -> Result<crate::chaos::SpacingHistogram> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let parse_err = |detail: String| Error::Parse {
        path: path.display().to_string(),
        detail,
    };
    let mut edges = Vec::new();
    let mut density = Vec::new();
    for record in reader.records() {
        let row = record.map_err(|e| csv_err(path, e))?;
        if row.len() != 3 {
            return Err(parse_err(format!("expected 3 columns, got {}", row.len())));
        }
        let cell = |k: usize| -> Result<f64> {
            row[k].trim()
                .parse()
                .map_err(|_| parse_err(format!("bad number {:?}", &row[k])))
        };
        edges.push((cell(0)?, cell(1)?));
        density.push(cell(2)?);
    }
    if density.is_empty() {
        return Err(parse_err("histogram has no bins".into()));
    }
    let bin_width = edges[0].1 - edges[0].0;
    if bin_width <= 0.0 {
        return Err(parse_err("non-increasing bin edges".into()));
    }
    for (k, &(lo, hi)) in edges.iter().enumerate() {
        let expect = k as f64 * bin_width;
        if (lo - expect).abs() > 1e-9 || (hi - expect - bin_width).abs() > 1e-9 {
            return Err(parse_err(format!("bin {k} edges not on a uniform grid from 0")));
        }
    }
    Ok(crate::chaos::SpacingHistogram {
        bin_width,
        s_max: edges.last().unwrap().1,
        density,
        total_count: 0,
    })
}

/// JSON summary of one spacing-statistics run.
pub fn write_eta_summary(path: &Path, stats: &SpacingStatistics) -> Result<()> {
    let value = serde_json::json!({
        "n_protons": stats.n_p,
        "sector_n_up": stats.n_up,
        "sector_dimension": stats.dimension,
        "orientations": stats.per_orientation_eta.len(),
        "eta": stats.eta,
        "eta_per_orientation": stats.per_orientation_eta,
        "s0": stats.s0,
        "spacings_total": stats.histogram.total_count,
    });
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &value)
        .map_err(|e| Error::Parse { path: path.display().to_string(), detail: e.to_string() })?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// η sweep over bath sizes: `n_protons, sector_n_up, dimension, eta`.
pub fn write_eta_sweep(path: &Path, rows: &[SpacingStatistics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["n_protons", "sector_n_up", "dimension", "eta"])
        .map_err(|e| csv_err(path, e))?;
    for s in rows {
        w.write_record([
            s.n_p.to_string(),
            s.n_up.to_string(),
            s.dimension.to_string(),
            fmt(s.eta),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// Hamiltonian term dump at one instant: `site_i, site_j, kind, coeff_rad_s`.
/// Shift terms repeat the site id in both columns.
pub fn write_terms(
    path: &Path,
    system: &SpinSystem,
    h: &LabHamiltonian,
    t: f64,
) -> Result<()> {
    let ph = h.mas.phase_at(t);
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["site_i", "site_j", "kind", "coeff_rad_s"])
        .map_err(|e| csv_err(path, e))?;
    let id = |idx: usize| system.sites[idx].id.to_string();
    for term in &h.z_terms {
        w.write_record([id(term.site), id(term.site), "shift".into(), fmt(term.shift(&ph))])
            .map_err(|e| csv_err(path, e))?;
    }
    for (kind, pairs) in [("like", &h.like_pairs), ("unlike", &h.unlike_pairs)] {
        for p in pairs {
            w.write_record([id(p.site_i), id(p.site_j), kind.into(), fmt(p.coupling(&ph))])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    finish(w, path)
}

/// One early-time rate fit.
#[derive(Debug, Clone)]
pub struct RateRow {
    pub n_protons: usize,
    /// Fitted slope of 1 − P_z(C_ref); units 1/s (linear) or 1/s² (quadratic).
    pub slope: f64,
    pub intercept: f64,
    /// P_z(C_ref) at the end of the run, if the run extends past the window.
    pub saturation: Option<f64>,
}

/// Early-time slope table: `n_protons, slope, intercept, saturation_pz`.
pub fn write_rates(path: &Path, rows: &[RateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["n_protons", "slope", "intercept", "saturation_pz"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.n_protons.to_string(),
            fmt(r.slope),
            fmt(r.intercept),
            r.saturation.map(fmt).unwrap_or_default(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// Self-test summary for the synthetic spectra.
pub fn write_selftest_summary(path: &Path, kind: &str, n_levels: usize, eta: f64) -> Result<()> {
    let value = serde_json::json!({
        "kind": kind,
        "levels": n_levels,
        "eta": eta,
        "s0": s0_crossing(),
    });
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &value)
        .map_err(|e| Error::Parse { path: path.display().to_string(), detail: e.to_string() })?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
