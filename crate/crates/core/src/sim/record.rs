use std::io::Write;

use super::config::DetectorKind;
use crate::diagnostics::{wilson_interval, BitPlaneStats, Z_95};

/// Monte Carlo result for one detector at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub detector: DetectorKind,
    pub nt: usize,
    pub nr: usize,
    /// QAM order.
    pub modulation: usize,
    pub snr_db: f64,
    pub frames: u64,
    pub total_bits: u64,
    pub bit_errors: u64,
    pub planes: BitPlaneStats,
    pub wall_time_s: f64,
    pub seed: u64,
}

impl BerRecord {
    pub fn ber(&self) -> f64 {
        if self.total_bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.total_bits as f64
        }
    }

    /// 95% Wilson interval of the BER.
    pub fn ber_interval(&self) -> (f64, f64) {
        wilson_interval(self.bit_errors, self.total_bits, Z_95)
    }

    /// 95% Wilson interval of the per-plane error rate over error frames.
    pub fn conditional_interval(&self, plane: usize) -> (f64, f64) {
        wilson_interval(
            self.planes.conditional_errors[plane],
            self.planes.conditional_bits[plane],
            Z_95,
        )
    }

    /// CSV row matching [`csv_header`]. Wall time is written as 0 when
    /// `timing` is false so reruns are byte-identical.
    pub fn csv_row(&self, timing: bool) -> String {
        let mut row = format!(
            "{},{},{},{},{},{},{},{},{:.6e}",
            self.detector,
            self.nt,
            self.nr,
            self.modulation,
            self.snr_db,
            self.frames,
            self.total_bits,
            self.bit_errors,
            self.ber()
        );
        for e in &self.planes.per_plane_errors {
            row.push_str(&format!(",{e}"));
        }
        let wall = if timing { self.wall_time_s } else { 0.0 };
        row.push_str(&format!(",{wall:.6},{}", self.seed));
        row
    }
}

/// `detector,nt,nr,mod,snr_db,frames,total_bits,bit_errors,ber,plane0_errors,...,planeK_errors,wall_time_s,seed`
pub fn csv_header(n_planes: usize) -> String {
    let mut header = String::from("detector,nt,nr,mod,snr_db,frames,total_bits,bit_errors,ber");
    for j in 0..n_planes {
        header.push_str(&format!(",plane{j}_errors"));
    }
    header.push_str(",wall_time_s,seed");
    header
}

/// Writes the header and one row per record.
pub fn write_csv<W: Write>(records: &[BerRecord], mut out: W, timing: bool) -> std::io::Result<()> {
    let n_planes = records.first().map_or(1, |r| r.planes.n_planes());
    writeln!(out, "{}", csv_header(n_planes))?;
    for r in records {
        writeln!(out, "{}", r.csv_row(timing))?;
    }
    out.flush()
}
