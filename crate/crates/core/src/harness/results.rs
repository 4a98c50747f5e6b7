//! Result rows and their CSV form.

use std::io::Write;

use crate::error::HarnessError;
use crate::scenario::Scheme;
use crate::sca::{SolveReport, Termination};

pub const CSV_HEADER: [&str; 14] = [
    "seed",
    "scheme",
    "swept_key",
    "swept_value",
    "tau_total",
    "tau_c",
    "tau_w",
    "tau_f",
    "eta_l",
    "n_l",
    "n_g",
    "sca_iterations",
    "converged",
    "wall_time",
];

/// Rounds to the 9 significant digits written to CSV, so that rows compare
/// equal after a round trip.
pub fn round9(x: f64) -> f64 {
    if x.is_finite() {
        format_float(x).parse().unwrap_or(x)
    } else {
        x
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.8e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub seed: u64,
    pub scheme: Scheme,
    pub swept_key: String,
    pub swept_value: f64,
    pub tau_total: f64,
    pub tau_c: f64,
    pub tau_w: f64,
    pub tau_f: f64,
    pub eta_l: f64,
    pub n_l: f64,
    pub n_g: f64,
    pub sca_iterations: usize,
    pub converged: bool,
    pub wall_time: f64,
}

impl ResultRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        seed: u64,
        scheme: Scheme,
        swept_key: &str,
        swept_value: f64,
        [tau_total, tau_c, tau_w, tau_f]: [f64; 4],
        [eta_l, n_l, n_g]: [f64; 3],
        sca_iterations: usize,
        converged: bool,
        wall_time: f64,
    ) -> Self {
        Self {
            seed,
            scheme,
            swept_key: swept_key.to_string(),
            swept_value: round9(swept_value),
            tau_total: round9(tau_total),
            tau_c: round9(tau_c),
            tau_w: round9(tau_w),
            tau_f: round9(tau_f),
            eta_l: round9(eta_l),
            n_l: round9(n_l),
            n_g: round9(n_g),
            sca_iterations,
            converged,
            wall_time: round9(wall_time),
        }
    }

    pub fn from_report(seed: u64, swept_key: &str, swept_value: f64, r: &SolveReport, wall_time: f64) -> Self {
        let l = &r.latency;
        Self::new(
            seed,
            r.scheme,
            swept_key,
            swept_value,
            [l.tau_total, l.tau_c, l.tau_w, l.tau_f],
            [r.point.eta_l, l.n_l, l.n_g],
            r.iterations,
            r.terminated_by == Termination::Threshold,
            wall_time,
        )
    }

    /// Row for a run that returned an error: numbers are NaN.
    pub fn failed(seed: u64, scheme: Scheme, swept_key: &str, swept_value: f64, wall_time: f64) -> Self {
        let nan = f64::NAN;
        Self::new(seed, scheme, swept_key, swept_value, [nan; 4], [nan; 3], 0, false, wall_time)
    }

    pub fn fields(&self) -> Vec<String> {
        let f = format_float;
        vec![
            self.seed.to_string(),
            self.scheme.to_string(),
            self.swept_key.clone(),
            f(self.swept_value),
            f(self.tau_total),
            f(self.tau_c),
            f(self.tau_w),
            f(self.tau_f),
            f(self.eta_l),
            f(self.n_l),
            f(self.n_g),
            self.sca_iterations.to_string(),
            self.converged.to_string(),
            f(self.wall_time),
        ]
    }

    pub fn from_record(rec: &csv::StringRecord) -> Result<Self, HarnessError> {
        if rec.len() != CSV_HEADER.len() {
            return Err(HarnessError::Row(format!("expected {} fields, got {}", CSV_HEADER.len(), rec.len())));
        }
        let bad = |name: &str, v: &str| HarnessError::Row(format!("{name}: cannot parse `{v}`"));
        let real = |i: usize| -> Result<f64, HarnessError> { rec[i].parse().map_err(|_| bad(CSV_HEADER[i], &rec[i])) };
        Ok(Self {
            seed: rec[0].parse().map_err(|_| bad("seed", &rec[0]))?,
            scheme: rec[1].parse().map_err(|_| bad("scheme", &rec[1]))?,
            swept_key: rec[2].to_string(),
            swept_value: real(3)?,
            tau_total: real(4)?,
            tau_c: real(5)?,
            tau_w: real(6)?,
            tau_f: real(7)?,
            eta_l: real(8)?,
            n_l: real(9)?,
            n_g: real(10)?,
            sca_iterations: rec[11].parse().map_err(|_| bad("sca_iterations", &rec[11]))?,
            converged: rec[12].parse().map_err(|_| bad("converged", &rec[12]))?,
            wall_time: real(13)?,
        })
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

/// Parses a results file, header included.
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(HarnessError::Row("unexpected header".into()));
    }
    rd.records().map(|rec| ResultRow::from_record(&rec?)).collect()
}

/// Parses one data line without a header.
pub fn parse_row(line: &str) -> Result<ResultRow, HarnessError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(line.as_bytes());
    let rec = rd
        .records()
        .next()
        .ok_or_else(|| HarnessError::Row("empty line".into()))??;
    ResultRow::from_record(&rec)
}
