//! CSV and JSON persistence.
//!
//! Column orders:
//!
//! - diagnostics: `t, err_u, err_du, E, res1_l2, res2_l2, H, coercivity_ok`
//! - KdV runs: `tau, mass, momentum, energy, Hs_norm, sup_norm, resolution_flag`
//! - residual cells: `epsilon, sites, res1_l2, res2_l2, defect_sup`
//! - error cells: see [`ERROR_CELL_COLUMNS`]
//! - metastability cells: see [`METASTABILITY_CELL_COLUMNS`]; series `t, distance, shift`
//!
//! Reals are written with 17 significant digits so that identical runs give
//! identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use super::{
    ErrorScanReport, ExperimentSpec, MetastabilityReport, NamedFit, NormGrowthReport,
    ResidualScanReport, Summary, SummaryFlags,
};
use crate::error::{Error, Result};
use crate::gkdv::KdvSample;
use crate::model::ErrorRecord;

pub const DIAGNOSTIC_COLUMNS: [&str; 8] =
    ["t", "err_u", "err_du", "E", "res1_l2", "res2_l2", "H", "coercivity_ok"];
pub const KDV_COLUMNS: [&str; 7] = [
    "tau",
    "mass",
    "momentum",
    "energy",
    "Hs_norm",
    "sup_norm",
    "resolution_flag",
];
pub const RESIDUAL_CELL_COLUMNS: [&str; 5] = ["epsilon", "sites", "res1_l2", "res2_l2", "defect_sup"];
pub const ERROR_CELL_COLUMNS: [&str; 19] = [
    "epsilon",
    "sites",
    "t0",
    "tau0",
    "sup_error",
    "sup_err_u",
    "sup_err_du",
    "initial_error",
    "perturbation_size",
    "delta",
    "critical_norm",
    "empirical_K",
    "derivative_C",
    "rate_mismatch",
    "coercivity_violations",
    "coercivity_guaranteed",
    "resolution_flag",
    "blow_up",
    "over_budget",
];
pub const METASTABILITY_CELL_COLUMNS: [&str; 11] = [
    "epsilon",
    "sites",
    "t0",
    "tau0",
    "delta",
    "sup_distance",
    "ratio",
    "observed_constant",
    "growth",
    "blow_up",
    "samples",
];

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_error_records_csv(path: &Path, records: &[ErrorRecord]) -> Result<()> {
    write_rows(
        path,
        &DIAGNOSTIC_COLUMNS,
        records.iter().map(|r| {
            vec![
                fmt_real(r.t),
                fmt_real(r.err_u),
                fmt_real(r.err_du),
                fmt_real(r.energy_quantity),
                fmt_real(r.res1_norm),
                fmt_real(r.res2_norm),
                fmt_real(r.h_lattice),
                r.coercivity_ok.to_string(),
            ]
        }),
    )
}

pub fn write_kdv_samples_csv(path: &Path, samples: &[KdvSample]) -> Result<()> {
    write_rows(
        path,
        &KDV_COLUMNS,
        samples.iter().map(|s| {
            vec![
                fmt_real(s.tau),
                fmt_real(s.mass),
                fmt_real(s.momentum),
                fmt_real(s.energy),
                fmt_real(s.hs_norm),
                fmt_real(s.sup_norm),
                s.resolution_flag.to_string(),
            ]
        }),
    )
}

/// Reads `(x, value)` pairs from the first two columns; a header row is
/// skipped if its first field is not a number.
pub fn read_points_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::invalid(format!("row {} has fewer than 2 columns", i + 1)));
        }
        let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
        match parsed {
            (Ok(x), Ok(v)) => out.push((x, v)),
            _ if i == 0 => continue,
            _ => return Err(Error::invalid(format!("row {} is not numeric", i + 1))),
        }
    }
    Ok(out)
}

pub fn write_summary_json(path: &Path, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn kind_name(spec: &ExperimentSpec) -> String {
    serde_json::to_value(spec.kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| "run".into())
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn summary(spec: &ExperimentSpec, fits: &[NamedFit], flags: SummaryFlags, wall: f64) -> Summary {
    Summary {
        spec: spec.clone(),
        fits: fits.to_vec(),
        flags,
        wall_time_s: wall,
    }
}

fn finish(
    dir: &Path,
    spec: &ExperimentSpec,
    fits: &[NamedFit],
    flags: SummaryFlags,
    wall: f64,
    mut written: Vec<PathBuf>,
) -> Result<Vec<PathBuf>> {
    let path = dir.join(format!("{}_summary.json", kind_name(spec)));
    write_summary_json(&path, &summary(spec, fits, flags, wall))?;
    written.push(path);
    Ok(written)
}

pub fn save_residual_scan(
    dir: &Path,
    spec: &ExperimentSpec,
    report: &ResidualScanReport,
    wall: f64,
) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let path = dir.join(format!("{}_cells.csv", kind_name(spec)));
    write_rows(
        &path,
        &RESIDUAL_CELL_COLUMNS,
        report.cells.iter().map(|c| {
            vec![
                c.epsilon.to_string(),
                c.sites.to_string(),
                fmt_real(c.res1_l2),
                fmt_real(c.res2_l2),
                fmt_real(c.defect_sup),
            ]
        }),
    )?;
    finish(dir, spec, &report.fits, SummaryFlags::default(), wall, vec![path])
}

/// Cell table, one diagnostics file per epsilon, and the summary.
pub fn save_error_scan(
    dir: &Path,
    spec: &ExperimentSpec,
    report: &ErrorScanReport,
    wall: f64,
) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let kind = kind_name(spec);
    let path = dir.join(format!("{kind}_cells.csv"));
    write_rows(
        &path,
        &ERROR_CELL_COLUMNS,
        report.cells.iter().map(|c| {
            vec![
                c.epsilon.to_string(),
                c.sites.to_string(),
                fmt_real(c.t0),
                fmt_real(c.tau0),
                fmt_real(c.sup_error),
                fmt_real(c.sup_err_u),
                fmt_real(c.sup_err_du),
                fmt_real(c.initial_error),
                fmt_real(c.perturbation_size),
                fmt_real(c.delta),
                c.critical_norm.map(fmt_real).unwrap_or_default(),
                fmt_real(c.empirical_k),
                fmt_real(c.derivative_constant),
                fmt_real(c.rate_mismatch),
                c.coercivity_violations.to_string(),
                c.coercivity_guaranteed.to_string(),
                c.under_resolved.to_string(),
                c.blow_up.to_string(),
                c.over_budget.to_string(),
            ]
        }),
    )?;
    let mut written = vec![path];
    for c in &report.cells {
        let p = dir.join(format!("{kind}_eps{}.csv", c.epsilon));
        write_error_records_csv(&p, &c.records)?;
        written.push(p);
    }
    finish(dir, spec, &report.fits, report.flags, wall, written)
}

pub fn save_metastability(
    dir: &Path,
    spec: &ExperimentSpec,
    report: &MetastabilityReport,
    wall: f64,
) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let kind = kind_name(spec);
    let path = dir.join(format!("{kind}_cells.csv"));
    write_rows(
        &path,
        &METASTABILITY_CELL_COLUMNS,
        report.cells.iter().map(|c| {
            vec![
                c.epsilon.to_string(),
                c.sites.to_string(),
                fmt_real(c.t0),
                fmt_real(c.tau0),
                fmt_real(c.delta),
                fmt_real(c.sup_distance),
                fmt_real(c.ratio),
                fmt_real(c.observed_constant),
                c.growth.to_string(),
                c.blow_up.to_string(),
                c.series.len().to_string(),
            ]
        }),
    )?;
    let mut written = vec![path];
    for c in &report.cells {
        let p = dir.join(format!("{kind}_eps{}.csv", c.epsilon));
        write_rows(
            &p,
            &["t", "distance", "shift"],
            c.series
                .iter()
                .map(|r| vec![fmt_real(r.0), fmt_real(r.1), fmt_real(r.2)]),
        )?;
        written.push(p);
    }
    finish(dir, spec, &report.fits, report.flags, wall, written)
}

pub fn save_norm_growth(
    dir: &Path,
    spec: &ExperimentSpec,
    report: &NormGrowthReport,
    wall: f64,
) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let path = dir.join(format!("{}_p{}.csv", kind_name(spec), spec.p));
    write_kdv_samples_csv(&path, &report.samples)?;
    finish(dir, spec, &report.fits, report.flags, wall, vec![path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_round_trip_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        fs::write(&a, "epsilon,value\n0.2,1.5\n0.1, 2.5\n").unwrap();
        assert_eq!(read_points_csv(&a).unwrap(), vec![(0.2, 1.5), (0.1, 2.5)]);
        let b = dir.path().join("b.csv");
        fs::write(&b, "0.2,1.5\n0.1,2.5\n").unwrap();
        assert_eq!(read_points_csv(&b).unwrap().len(), 2);
        let c = dir.path().join("c.csv");
        fs::write(&c, "0.2,1.5\n0.1,x\n").unwrap();
        assert!(read_points_csv(&c).is_err());
        assert!(read_points_csv(&dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn diagnostics_header_and_formatting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let rec = ErrorRecord {
            t: 0.5,
            err_u: 1e-3,
            err_du: 2e-3,
            energy_quantity: 3e-6,
            res1_norm: 1e-7,
            res2_norm: 2e-7,
            h_lattice: 48.9,
            coercivity_ok: true,
        };
        write_error_records_csv(&path, &[rec]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,err_u,err_du,E,res1_l2,res2_l2,H,coercivity_ok");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "5.0000000000000000e-1");
        assert_eq!(row[0].parse::<f64>().unwrap(), 0.5);
        assert_eq!(row[7], "true");
    }
}
