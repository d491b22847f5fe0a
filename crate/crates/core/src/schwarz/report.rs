use std::fmt::Write as _;

use serde::Serialize;

use crate::pde::io::fmt17;

use super::{theoretical_rate, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Tolerance,
    MaxIterations,
    Stagnation,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Tolerance => "tolerance",
            StopReason::MaxIterations => "max-iterations",
            StopReason::Stagnation => "stagnation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub q: usize,
    /// Max over subdomains of the entries below.
    pub e_q: f64,
    /// Sup-norm change of the interface traces produced by this iteration.
    pub update_norm: f64,
    /// Sup error against the reference per slab, or the per-slab trace
    /// update when no reference was supplied.
    pub subdomain_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchwarzReport {
    pub history: Vec<IterationRecord>,
    /// Least-squares slope of `ln E_q` against `q` over the tail half;
    /// `None` when fewer than two positive errors are available there.
    pub fitted_rate: Option<f64>,
    pub theoretical_rate: f64,
    pub gamma: f64,
    pub subdomain_count: usize,
    pub stop_reason: StopReason,
}

impl SchwarzReport {
    pub fn new(history: Vec<IterationRecord>, partition: &Partition, gamma: f64, stop_reason: StopReason) -> Self {
        let fitted_rate = fit_tail_rate(&history);
        Self {
            fitted_rate,
            theoretical_rate: theoretical_rate(partition, gamma),
            gamma,
            subdomain_count: partition.count(),
            stop_reason,
            history,
        }
    }

    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |r| r.q)
    }

    pub fn final_error(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.e_q)
    }

    /// First iteration with `E_q ≤ threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.history.iter().find(|r| r.e_q <= threshold).map(|r| r.q)
    }

    /// `Ē_k = max_{0≤j<window} E_{k+j}` for every full window in the history.
    pub fn windowed_maxima(&self, window: usize) -> Vec<f64> {
        let window = window.max(1);
        let e: Vec<f64> = self.history.iter().map(|r| r.e_q).collect();
        e.windows(window).map(|w| w.iter().copied().fold(0.0, f64::max)).collect()
    }

    /// CSV with header `q,E_q,update_norm,sup_err_1,…,sup_err_I`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,E_q,update_norm");
        for p in 1..=self.subdomain_count {
            let _ = write!(out, ",sup_err_{p}");
        }
        out.push('\n');
        for r in &self.history {
            let _ = write!(out, "{},{},{}", r.q, fmt17(r.e_q), fmt17(r.update_norm));
            for e in &r.subdomain_errors {
                out.push(',');
                out.push_str(&fmt17(*e));
            }
            out.push('\n');
        }
        out
    }
}

fn fit_tail_rate(history: &[IterationRecord]) -> Option<f64> {
    let tail = &history[history.len() / 2..];
    let points: Vec<(f64, f64)> = tail
        .iter()
        .filter(|r| r.e_q > 0.0 && r.e_q.is_finite())
        .map(|r| (r.q as f64, r.e_q.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}
