//! CSV and JSON artifacts. Every CSV has a header row, LF line endings and
//! shortest round-trip decimal formatting, so identical inputs give
//! byte-identical files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use idslab_core::floquet::BandStructure;
use idslab_core::ids::{ExhaustionRow, IdsCurve};
use idslab_core::ssf::ScanTable;
use idslab_core::wegner::WegnerRow;
use idslab_core::Hamiltonian;
use serde::Serialize;

pub const IDS_HEADER: [&str; 7] = ["E", "N_mean", "N_stderr", "box_L", "samples", "model", "seed"];
pub const WEGNER_HEADER: [&str; 9] = ["model", "E", "eps", "box_L", "n_plus", "mean", "stderr", "samples", "seed"];
pub const SCAN_HEADER: [&str; 6] = ["L", "sample", "gamma", "norm_alpha", "lhs", "rhs"];
pub const EXHAUSTION_HEADER: [&str; 6] = ["box_L", "E", "N_mean", "N_stderr", "bloch", "deviation"];
pub const BLOCH_IDS_HEADER: [&str; 2] = ["E", "N"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// `θ₁, …, θ_d` then `E₁, …, E_n`.
pub fn bands_header(dim: usize, bands: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("theta_{i}")).chain((1..=bands).map(|n| format!("E_{n}"))).collect()
}

/// Rows of strings written as CSV with a fixed header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

pub fn ids_table(curves: &[IdsCurve], seed: u64) -> Table {
    let mut t = Table::new(&IDS_HEADER);
    for c in curves {
        let box_l = c.meta.box_length.map(|l| l.to_string()).unwrap_or_default();
        for j in 0..c.energies.len() {
            t.push(vec![
                fmt_f64(c.energies[j]),
                fmt_f64(c.values[j]),
                fmt_f64(c.stderr[j]),
                box_l.clone(),
                c.meta.samples.to_string(),
                c.meta.model.as_str().to_string(),
                seed.to_string(),
            ]);
        }
    }
    t
}

pub fn bands_table(bands: &BandStructure) -> Table {
    let dim = bands.thetas.first().map_or(0, Vec::len);
    let mut t = Table::new(&bands_header(dim, bands.band_count()));
    for (theta, energies) in bands.thetas.iter().zip(&bands.bands) {
        t.push(theta.iter().chain(energies).map(|&x| fmt_f64(x)).collect());
    }
    t
}

pub fn bloch_ids_table(bands: &BandStructure, energies: &[f64]) -> Table {
    let mut t = Table::new(&BLOCH_IDS_HEADER);
    for &e in energies {
        t.push(vec![fmt_f64(e), fmt_f64(bands.bloch_ids(e))]);
    }
    t
}

pub fn wegner_table(rows: &[WegnerRow]) -> Table {
    let mut t = Table::new(&WEGNER_HEADER);
    for r in rows {
        t.push(vec![
            r.model.as_str().to_string(),
            fmt_f64(r.energy),
            fmt_f64(r.eps),
            r.box_length.to_string(),
            r.n_plus.to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.stderr),
            r.samples.to_string(),
            r.seed.to_string(),
        ]);
    }
    t
}

/// `gamma` is written as the space-separated offset, e.g. `3` or `1 -2`.
pub fn scan_table(scan: &ScanTable) -> Table {
    let mut t = Table::new(&SCAN_HEADER);
    for r in &scan.rows {
        let gamma: Vec<String> = r.gamma.coords().iter().map(i64::to_string).collect();
        t.push(vec![
            r.box_length.to_string(),
            r.sample.to_string(),
            gamma.join(" "),
            fmt_f64(r.norm),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
        ]);
    }
    t
}

pub fn exhaustion_table(rows: &[ExhaustionRow]) -> Table {
    let mut t = Table::new(&EXHAUSTION_HEADER);
    for r in rows {
        t.push(vec![
            r.box_length.to_string(),
            fmt_f64(r.energy),
            fmt_f64(r.mean),
            fmt_f64(r.stderr),
            fmt_opt(r.bloch),
            fmt_opt(r.deviation),
        ]);
    }
    t
}

/// Nonzero matrix entries as `row col value` lines.
pub fn triplet_text(h: &Hamiltonian) -> String {
    let mut s = String::new();
    for (i, j, v) in h.triplets() {
        s.push_str(&format!("{i} {j} {}\n", fmt_f64(v)));
    }
    s
}

pub fn measure_table(h: &Hamiltonian) -> Table {
    let mut t = Table::new(&["vertex", "measure"]);
    for (i, m) in h.measure().iter().enumerate() {
        t.push(vec![i.to_string(), fmt_f64(*m)]);
    }
    t
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

/// Collects artifacts and writes them into one directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_lf_and_round_trip_floats() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![fmt_f64(0.1), fmt_f64(1.0 / 3.0)]);
        t.push(vec![fmt_f64(2.0), fmt_f64(1e-7)]);
        let text = String::from_utf8(t.to_bytes()).unwrap();
        assert_eq!(text, "a,b\n0.1,0.3333333333333333\n2,0.0000001\n");
        let back: f64 = "0.3333333333333333".parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn bands_header_layout() {
        assert_eq!(bands_header(2, 3), ["theta_1", "theta_2", "E_1", "E_2", "E_3"]);
    }
}
