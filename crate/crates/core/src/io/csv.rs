//! CSV tables: header row, `.` decimals, LF line endings.

use crate::error::{Error, Result};
use crate::inference::{HyperTraceRow, ViTraceRow};
use crate::metrics::StructureRow;
use std::path::Path;

/// Shortest round-trip text of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Format(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::Format(format!("row has {} fields, header {}", r.len(), header.len())));
        }
        w.write_record(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.map(|r| r.iter().map(str::to_owned).collect())
                .map_err(|e| Error::Format(e.to_string()))
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

pub fn write_hyper_trace(path: &Path, rows: &[HyperTraceRow]) -> Result<()> {
    let l = rows.first().map_or(0, |r| r.beta.len());
    let mut header = vec!["iteration".to_string(), "alpha".into()];
    header.extend((0..l).map(|i| format!("beta_{i}")));
    header.extend((0..l).map(|i| format!("rho_{i}")));
    header.extend(["mu_chi2", "sigma_chi2", "chi2", "energy_data", "energy_reg"].map(String::from));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.iteration.to_string(), fmt_f64(r.alpha)];
            v.extend(r.beta.iter().map(|&x| fmt_f64(x)));
            v.extend(r.rho.iter().map(|&x| fmt_f64(x)));
            v.extend([r.mu_chi2, r.sigma_chi2, r.chi2, r.energy_data, r.energy_reg].map(fmt_f64));
            v
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &header, &body)
}

pub fn write_elbo_trace(path: &Path, rows: &[ViTraceRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                fmt_f64(r.elbo),
                fmt_f64(r.expected_energy),
                fmt_f64(r.entropy),
            ]
        })
        .collect();
    write_table(path, &["iteration", "elbo", "expected_energy", "entropy"], &body)
}

pub fn write_structures(path: &Path, rows: &[StructureRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.label.to_string(),
                r.voxels.to_string(),
                r.size_group.name().to_string(),
                fmt_f64(r.dice_mean),
                fmt_f64(r.dice_std),
                fmt_f64(r.asd_mean),
                fmt_f64(r.asd_std),
                fmt_f64(r.u_d),
                fmt_f64(r.u_l),
            ]
        })
        .collect();
    write_table(
        path,
        &["label", "voxels", "size_group", "dice_mean", "dice_std", "asd_mean", "asd_std", "u_d", "u_l"],
        &body,
    )
}
