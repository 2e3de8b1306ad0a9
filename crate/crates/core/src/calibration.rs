//! Re-derivation of the correction-factor model from scratch.
//!
//! 1. For each `(u, α)` cell, find the `p` that maximises the closed-form
//!    quantile (grid scan, then golden-section refinement).
//! 2. For each `u`, fit `p = a log(b α)` across the α grid.
//! 3. Fit `a(u)` with a degree-6 and `b(u)` with a degree-7 polynomial.
//!
//! Step 3 is done in a shifted and scaled variable `t ∈ [-1, 1]` and only
//! converted to raw monomials in `u` at the end; the monomial Vandermonde
//! matrix on `[0.9, 0.999]` is numerically singular.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::sig10;
use crate::quantile_approx::{evaluation_point_with_p, raw_quantile_at_point, CorrectionModel, GammaParams};

/// Absolute tolerance of the golden-section refinement in `p`.
pub const P_TOLERANCE: f64 = 1e-6;

const A_DEGREE: usize = 6;
const B_DEGREE: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationGrid {
    pub alphas: Vec<f64>,
    pub us: Vec<f64>,
    pub p_min: f64,
    pub p_max: f64,
    pub p_step: f64,
}

impl Default for CalibrationGrid {
    /// α = 1..=100, 100 evenly spaced u in [0.9, 0.999], p in [0.05, 1.5] step 0.01.
    fn default() -> Self {
        Self {
            alphas: (1..=100).map(f64::from).collect(),
            us: linspace(0.9, 0.999, 100),
            p_min: 0.05,
            p_max: 1.5,
            p_step: 0.01,
        }
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

fn strictly_increasing(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite()) && values.windows(2).all(|w| w[0] < w[1])
}

impl CalibrationGrid {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.us.is_empty() {
            return Err(Error::Invalid("calibration grids must be nonempty".into()));
        }
        if !strictly_increasing(&self.alphas) || !strictly_increasing(&self.us) {
            return Err(Error::Invalid("calibration grids must be strictly increasing".into()));
        }
        if self.alphas[0] <= 0.0 {
            return Err(Error::Invalid("calibration shapes must be positive".into()));
        }
        if !(self.us[0] > 0.0 && self.us[self.us.len() - 1] < 1.0) {
            return Err(Error::Invalid("calibration levels must lie in (0, 1)".into()));
        }
        if !(self.p_min > 0.0 && self.p_max > self.p_min && self.p_step > 0.0) {
            return Err(Error::Invalid(format!(
                "need 0 < p_min < p_max and p_step > 0, got p_min={} p_max={} p_step={}",
                self.p_min, self.p_max, self.p_step
            )));
        }
        Ok(())
    }
}

/// Maximiser of the quantile over the correction factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalP {
    pub p: f64,
    pub quantile: f64,
    /// The maximiser sits on `p_min` or `p_max`.
    pub at_boundary: bool,
}

/// Finds `p ∈ [p_min, p_max]` maximising the closed-form quantile at `(u, α, β)`.
///
/// Ties go to the smaller `p`.
pub fn optimal_p(u: f64, alpha: f64, beta: f64, grid: &CalibrationGrid) -> Result<OptimalP> {
    grid.validate()?;
    let params = GammaParams::new(alpha, beta)?;
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Invalid(format!("confidence level must lie in (0, 1), got {u}")));
    }
    let objective = |p: f64| {
        evaluation_point_with_p(p, &params)
            .and_then(|x_bar| raw_quantile_at_point(u, &params, x_bar))
            .ok()
            .filter(|q| !q.is_nan())
            .unwrap_or(f64::NEG_INFINITY)
    };

    let steps = ((grid.p_max - grid.p_min) / grid.p_step).floor() as usize;
    let mut nodes: Vec<f64> = (0..=steps).map(|k| grid.p_min + k as f64 * grid.p_step).collect();
    if grid.p_max - nodes[nodes.len() - 1] > 1e-12 {
        nodes.push(grid.p_max);
    }
    let values: Vec<f64> = nodes.iter().map(|&p| objective(p)).collect();
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    if values[best] == f64::NEG_INFINITY {
        return Err(Error::Invalid(format!(
            "closed-form quantile undefined over the whole search interval at u={u}, alpha={alpha}"
        )));
    }

    let lo = nodes[best.saturating_sub(1)];
    let hi = nodes[(best + 1).min(nodes.len() - 1)];
    let (p, quantile) = golden_section_max(objective, lo, hi, P_TOLERANCE);
    let (p, quantile) = if quantile >= values[best] {
        (p, quantile)
    } else {
        (nodes[best], values[best])
    };
    let at_boundary = p - grid.p_min <= P_TOLERANCE || grid.p_max - p <= P_TOLERANCE;
    Ok(OptimalP {
        p,
        quantile,
        at_boundary,
    })
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let candidates = [(lo, f(lo)), (c, fc), (d, fd), (hi, f(hi))];
    candidates.into_iter().fold(
        (lo, f64::NEG_INFINITY),
        |best, cand| if cand.1 > best.1 { cand } else { best },
    )
}

/// Least-squares fit of `p = a log(b α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogFit {
    pub a: f64,
    pub b: f64,
    /// Residual sum of squares.
    pub residual: f64,
    pub r_squared: f64,
}

/// Fits `p = a log(b α)` as the linear regression `p = a log α + a log b`.
pub fn fit_log_model(alphas: &[f64], p_stars: &[f64]) -> Result<LogFit> {
    if alphas.len() != p_stars.len() {
        return Err(Error::Invalid(format!(
            "{} shapes but {} correction factors",
            alphas.len(),
            p_stars.len()
        )));
    }
    if alphas.len() < 2 {
        return Err(Error::Insufficient("log fit needs at least two points".into()));
    }
    if alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Invalid("log fit needs positive shapes".into()));
    }
    let n = alphas.len() as f64;
    let xs: Vec<f64> = alphas.iter().map(|a| a.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = p_stars.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::RankDeficient("all shapes are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(p_stars).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    if slope == 0.0 {
        return Err(Error::Invalid(
            "flat correction factor: b is undefined when a = 0".into(),
        ));
    }
    let residual: f64 = xs
        .iter()
        .zip(p_stars)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let total: f64 = p_stars.iter().map(|y| (y - y_mean).powi(2)).sum();
    let r_squared = if total > 0.0 { 1.0 - residual / total } else { 1.0 };
    Ok(LogFit {
        a: slope,
        b: (intercept / slope).exp(),
        residual,
        r_squared,
    })
}

/// Least-squares polynomial of degree `degree` in `t = (u - centre) / half_width`,
/// returned as monomial coefficients in `u`.
fn fit_monomials(us: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    let lo = us.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = us.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let design = DMatrix::from_fn(us.len(), degree + 1, |i, j| ((us[i] - centre) / half).powi(j as i32));
    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > smax * 1e-12) {
        return Err(Error::RankDeficient(format!(
            "degree-{degree} design has condition number {:.3e}",
            smax / smin
        )));
    }
    let in_t = svd
        .solve(&DVector::from_column_slice(ys), 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;

    // t = s u + r; expand Σ e_k (s u + r)^k into powers of u
    let s = 1.0 / half;
    let r = -centre / half;
    let mut out = vec![0.0; degree + 1];
    for (k, e_k) in in_t.iter().enumerate() {
        let mut binom = 1.0;
        for (j, slot) in out.iter_mut().enumerate().take(k + 1) {
            *slot += e_k * binom * s.powi(j as i32) * r.powi((k - j) as i32);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    Ok(out)
}

/// Fits `a(u)` (degree 6) and `b(u)` (degree 7) through per-level log fits
/// given as `(u, a, b)` triples.
pub fn fit_polynomials(fits: &[(f64, f64, f64)], alpha_range: [f64; 2]) -> Result<CorrectionModel> {
    let mut us: Vec<f64> = fits.iter().map(|f| f.0).collect();
    us.sort_by(f64::total_cmp);
    us.dedup();
    if us.len() < B_DEGREE + 1 {
        return Err(Error::Insufficient(format!(
            "polynomial fit of b(u) needs at least {} distinct levels, got {}",
            B_DEGREE + 1,
            us.len()
        )));
    }
    let u_all: Vec<f64> = fits.iter().map(|f| f.0).collect();
    let a_vals: Vec<f64> = fits.iter().map(|f| f.1).collect();
    let b_vals: Vec<f64> = fits.iter().map(|f| f.2).collect();
    let c = fit_monomials(&u_all, &a_vals, A_DEGREE)?;
    let d = fit_monomials(&u_all, &b_vals, B_DEGREE)?;
    let model = CorrectionModel {
        c: c.try_into().expect("degree 6"),
        d: d.try_into().expect("degree 7"),
        alpha_range,
        u_range: [us[0], us[us.len() - 1]],
    };
    model.validate()?;
    Ok(model)
}

/// Per-level outcome of the log fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelFit {
    pub u: f64,
    pub fit: LogFit,
}

/// Optimal `p` for one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDiagnostic {
    pub u: f64,
    pub alpha: f64,
    pub p_star: f64,
    pub at_boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub level_fits: Vec<LevelFit>,
    pub model: CorrectionModel,
    /// Row-major in `(u, α)` grid order.
    pub diagnostics: Vec<CellDiagnostic>,
}

impl CalibrationResult {
    pub fn boundary_hits(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.at_boundary).count()
    }

    pub fn min_r_squared(&self) -> f64 {
        self.level_fits
            .iter()
            .map(|l| l.fit.r_squared)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Runs the whole pipeline. Cells are evaluated in parallel and gathered in
/// grid order, so the result does not depend on the thread count.
pub fn calibrate(grid: &CalibrationGrid) -> Result<CalibrationResult> {
    grid.validate()?;
    let n_alpha = grid.alphas.len();
    let diagnostics = (0..grid.us.len() * n_alpha)
        .into_par_iter()
        .map(|idx| {
            let (u, alpha) = (grid.us[idx / n_alpha], grid.alphas[idx % n_alpha]);
            let best = optimal_p(u, alpha, 1.0, grid)?;
            Ok(CellDiagnostic {
                u,
                alpha,
                p_star: best.p,
                at_boundary: best.at_boundary,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let level_fits = diagnostics
        .chunks(n_alpha)
        .map(|row| {
            let ps: Vec<f64> = row.iter().map(|c| c.p_star).collect();
            Ok(LevelFit {
                u: row[0].u,
                fit: fit_log_model(&grid.alphas, &ps)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let triples: Vec<(f64, f64, f64)> = level_fits.iter().map(|l| (l.u, l.fit.a, l.fit.b)).collect();
    let alpha_range = [grid.alphas[0], grid.alphas[n_alpha - 1]];
    let model = fit_polynomials(&triples, alpha_range)?;
    Ok(CalibrationResult {
        level_fits,
        model,
        diagnostics,
    })
}

/// Writes `u,alpha,p_star,boundary_flag` rows, preceded by a `#` line echoing
/// the search interval.
pub fn write_diagnostics_csv<W: Write>(mut out: W, grid: &CalibrationGrid, result: &CalibrationResult) -> Result<()> {
    writeln!(
        out,
        "# p_min={} p_max={} p_step={}",
        grid.p_min, grid.p_max, grid.p_step
    )?;
    writeln!(out, "u,alpha,p_star,boundary_flag")?;
    for d in &result.diagnostics {
        writeln!(
            out,
            "{},{},{},{}",
            sig10(d.u),
            sig10(d.alpha),
            sig10(d.p_star),
            u8::from(d.at_boundary)
        )?;
    }
    Ok(())
}
