//! Post-processing of ensemble curves: onset threshold, crossover against
//! standard percolation, early power-law exponent and difference curves.
//!
//! Everything here is a pure function of the curve CSVs, so a summary can
//! be regenerated without re-running the ensemble.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ensemble::{fmt_sig, read_curve_csv, read_p_w_csv, CurveEstimate};
use crate::{Error, Result};

/// Efficiency level marking the effective onset of transport.
pub const ONSET_THRESHOLD: f64 = 0.01;
/// Grid points after a crossing over which the `m > 1` curve must stay ahead.
pub const CROSSOVER_PERSISTENCE: usize = 3;
/// Efficiency window of the power-law fit.
pub const FIT_WINDOW: (f64, f64) = (0.01, 0.1);
pub const MIN_FIT_POINTS: usize = 4;

/// Smallest grid `p` whose mean reaches `threshold`.
pub fn detect_p_a(curve: &[CurveEstimate], threshold: f64) -> Option<f64> {
    curve.iter().find(|c| c.mean >= threshold).map(|c| c.p)
}

/// First grid point where `curve_m` is at or above `curve_1` and stays so
/// for the next [`CROSSOVER_PERSISTENCE`] points. The search starts once
/// either curve reaches [`ONSET_THRESHOLD`]; below that both are zero up to
/// rounding and any "crossing" is noise. Returns the bond fraction and
/// `curve_m`'s mean there.
pub fn detect_p_b(curve_m: &[CurveEstimate], curve_1: &[CurveEstimate]) -> Result<Option<(f64, f64)>> {
    same_grid(curve_m, curve_1)?;
    let n = curve_m.len();
    let Some(start) = (0..n).find(|&i| curve_m[i].mean.max(curve_1[i].mean) >= ONSET_THRESHOLD) else {
        return Ok(None);
    };
    let above = |j: usize| curve_m[j].mean >= curve_1[j].mean;
    Ok((start..n)
        .find(|&i| (i..(i + 1 + CROSSOVER_PERSISTENCE).min(n)).all(above))
        .map(|i| (curve_m[i].p, curve_m[i].mean)))
}

fn same_grid(a: &[CurveEstimate], b: &[CurveEstimate]) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x.p - y.p).abs() > 1e-12) {
        return Err(Error::invalid("curves are not on the same grid"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    pub k: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    pub p_range: (f64, f64),
}

/// Least-squares slope of `ln(mean)` against `ln(p)` over the grid points
/// whose mean lies in `window`.
pub fn fit_power_law(curve: &[CurveEstimate], window: (f64, f64)) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|c| c.p > 0.0 && c.mean >= window.0 && c.mean <= window.1)
        .map(|c| (c.p.ln(), c.mean.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::NotFound(format!(
            "power-law window holds {} points, need {MIN_FIT_POINTS}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let k = sxy / sxx;
    let intercept = my - k * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    Ok(PowerLawFit {
        k,
        intercept,
        r_squared,
        points: pts.len(),
        p_range: (lo.exp(), hi.exp()),
    })
}

fn difference(a: &[CurveEstimate], b: &[CurveEstimate]) -> Result<Vec<CurveEstimate>> {
    same_grid(a, b)?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| CurveEstimate {
            p: x.p,
            mean: x.mean - y.mean,
            stderr: x.stderr.hypot(y.stderr),
            count: x.count.min(y.count),
        })
        .collect())
}

/// `⟨μ_c^1⟩ - ⟨μ_c^m⟩` on the shared grid.
pub fn delta_efficiency(curve_1: &[CurveEstimate], curve_m: &[CurveEstimate]) -> Result<Vec<CurveEstimate>> {
    difference(curve_1, curve_m)
}

/// `⟨μ_i^m⟩ - ⟨μ_c^m⟩` on the shared grid.
pub fn coherent_incoherent_gap(
    coherent: &[CurveEstimate],
    incoherent: &[CurveEstimate],
) -> Result<Vec<CurveEstimate>> {
    difference(incoherent, coherent)
}

/// Grid point with the smallest mean.
pub fn curve_min(curve: &[CurveEstimate]) -> Option<CurveEstimate> {
    curve.iter().copied().min_by(|a, b| a.mean.total_cmp(&b.mean))
}

/// Grid point with the largest mean.
pub fn curve_max(curve: &[CurveEstimate]) -> Option<CurveEstimate> {
    curve.iter().copied().max_by(|a, b| a.mean.total_cmp(&b.mean))
}

/// One row of the threshold summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub m: usize,
    pub p_a: Option<f64>,
    pub p_b: Option<f64>,
    pub mu_at_p_b: Option<f64>,
    pub fit: Option<PowerLawFit>,
    pub p_w: f64,
}

/// Summary rows for every `m` in `coherent`; `p_b` is measured against `m = 1`.
pub fn summarize(
    coherent: &std::collections::BTreeMap<usize, Vec<CurveEstimate>>,
    p_w: &std::collections::BTreeMap<usize, CurveEstimate>,
) -> Result<Vec<SummaryRow>> {
    let reference = coherent.get(&1);
    coherent
        .iter()
        .map(|(&m, curve)| {
            let (p_b, mu_at_p_b) = match (m, reference) {
                (1, _) | (_, None) => (None, None),
                (_, Some(base)) => match detect_p_b(curve, base)? {
                    Some((p, mu)) => (Some(p), Some(mu)),
                    None => (None, None),
                },
            };
            Ok(SummaryRow {
                m,
                p_a: detect_p_a(curve, ONSET_THRESHOLD),
                p_b,
                mu_at_p_b,
                fit: fit_power_law(curve, FIT_WINDOW).ok(),
                p_w: p_w.get(&m).map_or(f64::NAN, |e| e.mean),
            })
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), fmt_sig)
}

/// `m,p_a,p_b,mu_at_p_b,k,p_w`, with `n/a` for missing values.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("m,p_a,p_b,mu_at_p_b,k,p_w\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.m,
            opt(r.p_a),
            opt(r.p_b),
            opt(r.mu_at_p_b),
            opt(r.fit.as_ref().map(|f| f.k)),
            fmt_sig(r.p_w)
        );
    }
    out
}

/// Fit diagnostics: `m,k,intercept,r_squared,points,p_lo,p_hi,mu_lo,mu_hi`.
pub fn fit_diagnostics_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("m,k,intercept,r_squared,points,p_lo,p_hi,mu_lo,mu_hi\n");
    for r in rows {
        match &r.fit {
            Some(f) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.m,
                    fmt_sig(f.k),
                    fmt_sig(f.intercept),
                    fmt_sig(f.r_squared),
                    f.points,
                    fmt_sig(f.p_range.0),
                    fmt_sig(f.p_range.1),
                    fmt_sig(FIT_WINDOW.0),
                    fmt_sig(FIT_WINDOW.1)
                );
            }
            None => {
                let _ = writeln!(out, "{},n/a,n/a,n/a,0,n/a,n/a,{},{}", r.m, fmt_sig(FIT_WINDOW.0), fmt_sig(FIT_WINDOW.1));
            }
        }
    }
    out
}

/// Reads `mu_c.csv` and `p_w.csv` from `dir` and writes `summary.csv` and
/// `fit_diagnostics.csv` next to them.
pub fn analyze_dir(dir: &Path) -> Result<(Vec<SummaryRow>, Vec<PathBuf>)> {
    let need = |name: &str| -> Result<PathBuf> {
        let p = dir.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::NotFound(format!("missing curve file {}", p.display())))
        }
    };
    let coherent = read_curve_csv(&need("mu_c.csv")?)?;
    let p_w = read_p_w_csv(&need("p_w.csv")?)?;
    let rows = summarize(&coherent, &p_w)?;
    let summary = dir.join("summary.csv");
    let diag = dir.join("fit_diagnostics.csv");
    fs::write(&summary, summary_csv(&rows))?;
    fs::write(&diag, fit_diagnostics_csv(&rows))?;
    Ok((rows, vec![summary, diag]))
}
