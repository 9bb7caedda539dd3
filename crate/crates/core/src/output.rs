//! Artifact plumbing shared by the command-line front end: columnar tables,
//! ion-trap CSVs and the run manifest.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::iontrap::{DensityRun, McwfRun};
use crate::scalar::Real;
use crate::statistics::fmt_num;

/// Named columns of equal length, written as CSV with a header row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureTable {
    /// Free-form tag, e.g. the figure panel the table reproduces.
    pub tag: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FigureTable {
    pub fn new(tag: impl Into<String>, columns: &[&str]) -> Self {
        Self { tag: tag.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|&v| fmt_num(v)))?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// `gamma_t, F0, F1, F0_err, F1_err` from a trajectory run.
pub fn mcwf_time_series<T: Real>(run: &McwfRun<T>) -> FigureTable {
    let mut t = FigureTable::new("mcwf", &["gamma_t", "F0", "F1", "F0_err", "F1_err"]);
    for s in &run.snapshots {
        t.push(vec![
            s.t.as_f64(),
            s.fidelity[0].as_f64(),
            s.fidelity[1].as_f64(),
            s.fidelity_err[0].as_f64(),
            s.fidelity_err[1].as_f64(),
        ]);
    }
    t
}

/// Same layout as [`mcwf_time_series`] with zero errors.
pub fn density_time_series<T: Real>(run: &DensityRun<T>) -> FigureTable {
    let mut t = FigureTable::new("density", &["gamma_t", "F0", "F1", "F0_err", "F1_err"]);
    for s in &run.snapshots {
        t.push(vec![s.t.as_f64(), s.fidelity[0].as_f64(), s.fidelity[1].as_f64(), 0.0, 0.0]);
    }
    t
}

/// `n, Pi_n, Pi_n_err, P_n_target`; `target` is indexed by `n` and may be
/// shorter than `pi`.
pub fn phonon_snapshot<T: Real>(pi: &[T], pi_err: &[T], target: &[T]) -> FigureTable {
    let mut t = FigureTable::new("phonon", &["n", "Pi_n", "Pi_n_err", "P_n_target"]);
    for (n, p) in pi.iter().enumerate() {
        let err = pi_err.get(n).map_or(0.0, |e| e.as_f64());
        let tgt = target.get(n).map_or(0.0, |v| v.as_f64());
        t.push(vec![n as f64, p.as_f64(), err, tgt]);
    }
    t
}

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub version: String,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, parameters: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            parameters,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            outputs: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    /// Writes `table` to `dir/name` and lists it.
    pub fn write_table(&mut self, dir: &Path, name: &str, table: &FigureTable) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        table.write_csv(std::fs::File::create(dir.join(name))?)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes arbitrary bytes to `dir/name` and lists it.
    pub fn write_file(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), bytes)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("manifest.json"), json + "\n")
    }
}
