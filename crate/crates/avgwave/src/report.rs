//! Result emission: a fixed CSV schema shared by every experiment and a JSON
//! summary carrying inputs, rows, and pass/fail verdicts. Numbers are
//! formatted with a fixed notation so identical runs are byte-identical.

use num_complex::Complex64;
use serde::Serialize;

use crate::ensemble::EnsembleEstimate;

pub const CSV_HEADER: &str = "dim,eps,t,xi0,xi1,route,mean_re,mean_im,stderr,n";

#[derive(Debug, Clone, Serialize)]
pub struct CsvRow {
    pub dim: usize,
    pub eps: Option<f64>,
    pub t: f64,
    pub xi: Vec<f64>,
    pub route: String,
    pub mean: Complex64,
    pub stderr: f64,
    pub n: usize,
}

impl CsvRow {
    pub fn from_estimate(
        dim: usize,
        eps: Option<f64>,
        t: f64,
        xi: &[f64],
        route: &str,
        est: &EnsembleEstimate,
    ) -> Self {
        CsvRow {
            dim,
            eps,
            t,
            xi: xi.to_vec(),
            route: route.to_string(),
            mean: est.mean,
            stderr: est.stderr,
            n: est.n_samples,
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

pub fn to_csv(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let xi0 = r.xi.first().copied().map(fmt).unwrap_or_default();
        let xi1 = r.xi.get(1).copied().map(fmt).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.dim,
            fmt_opt(r.eps),
            fmt(r.t),
            xi0,
            xi1,
            r.route,
            fmt(r.mean.re),
            fmt(r.mean.im),
            fmt(r.stderr),
            r.n
        ));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    /// Echo of the parsed configuration.
    pub inputs: serde_json::Value,
    pub master_seed: u64,
    pub rows: Vec<CsvRow>,
    pub verdicts: Vec<Verdict>,
    pub wall_seconds: f64,
    /// True when any ensemble tripped the sample-spread warning.
    pub variance_flagged: bool,
}

impl RunSummary {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}
