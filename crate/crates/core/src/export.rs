//! Serializable Hessian reports and plain-text matrix dumps.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::{classify, Inertia, Verdict};
use crate::error::Result;
use crate::hessian::HessianMatrix;

/// `p{agent}_{axis}` label for a stacked coordinate index (1-based agent).
pub fn coordinate_label(index: usize, dim: usize) -> String {
    const AXES: [&str; 3] = ["x", "y", "z"];
    format!("p{}_{}", index / dim + 1, AXES[index % dim])
}

/// Reduced Hessian with its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianExport {
    pub method: String,
    pub dimension: usize,
    pub coordinates: Vec<String>,
    /// Row-major.
    pub matrix: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub tau: f64,
    pub inertia: Inertia,
    pub verdict: Verdict,
}

impl HessianExport {
    pub fn new(method: &str, h: &HessianMatrix, dim: usize, tau_rel: f64) -> Result<Self> {
        let reduced = h.reduced();
        let spectrum = classify(&reduced, tau_rel)?;
        Ok(Self {
            method: method.to_string(),
            dimension: h.dimension(),
            coordinates: h.free_coordinates().iter().map(|&i| coordinate_label(i, dim)).collect(),
            matrix: rows(&reduced),
            eigenvalues: spectrum.eigenvalues,
            tau: spectrum.tau,
            inertia: spectrum.inertia,
            verdict: spectrum.verdict,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# {} hessian, dimension {}\n", self.method, self.dimension);
        let _ = writeln!(out, "# coordinates: {}", self.coordinates.join(" "));
        out.push_str(&matrix_text(&self.matrix));
        let eig: Vec<String> = self.eigenvalues.iter().map(|v| format!("{v:.12e}")).collect();
        let _ = writeln!(out, "# eigenvalues: {}", eig.join(" "));
        let i = &self.inertia;
        let _ = writeln!(
            out,
            "# inertia (-, 0, +): ({}, {}, {}), tau = {:e}, verdict: {}",
            i.negative,
            i.zero,
            i.positive,
            self.tau,
            verdict_name(self.verdict)
        );
        out
    }
}

/// Analytic and finite-difference Hessians side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianPair {
    pub analytic: HessianExport,
    pub fd: HessianExport,
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
}

impl HessianPair {
    pub fn new(analytic: HessianExport, fd: HessianExport) -> Self {
        let mut abs = 0.0f64;
        let mut scale = 1.0f64;
        for (ra, rf) in analytic.matrix.iter().zip(&fd.matrix) {
            for (a, f) in ra.iter().zip(rf) {
                abs = abs.max((a - f).abs());
                scale = scale.max(a.abs());
            }
        }
        Self {
            analytic,
            fd,
            max_abs_diff: abs,
            max_rel_diff: abs / scale,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "{}{}# max |analytic - fd| = {:e} (relative {:e})\n",
            self.analytic.to_text(),
            self.fd.to_text(),
            self.max_abs_diff,
            self.max_rel_diff
        )
    }
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::StrictMinimum => "strict-minimum",
        Verdict::PsdDegenerate => "psd-degenerate",
        Verdict::Saddle => "saddle",
    }
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Whitespace-separated rows in `%.17e`-style notation, which round-trips.
pub fn matrix_text(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:>24.16e}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}
