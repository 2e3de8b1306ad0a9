//! The two reference tables: tail-approximation error on a (u, α) grid, and
//! exponential vs truncated exponential severities at N = μ = 500.
//!
//! Each row carries the published value next to the computed one.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::comparison::{compare_exponential, compare_truncated, MeanEvents, SeverityShape, SweepSpec};
use crate::error::Result;
use crate::format::{pct2, sig10};
use crate::quantile_approx::{gamma_quantile_approx, CorrectionModel, GammaParams};

pub const GRID_LEVELS: [f64; 4] = [0.95, 0.99, 0.995, 0.999];
pub const GRID_SHAPES: [f64; 7] = [1.0, 5.0, 10.0, 50.0, 100.0, 500.0, 1000.0];

/// Published relative errors in percent, indexed like the level × shape grid.
pub const PUBLISHED_ERROR_PCT: [[f64; 7]; 4] = [
    [-0.01, -0.02, -0.00, -0.00, -0.00, -0.06, -0.08],
    [-0.02, -0.08, -0.00, -0.00, -0.01, -0.17, -0.24],
    [-0.01, -0.05, -0.00, -0.02, -0.00, -0.18, -0.28],
    [-0.10, -0.88, -0.34, -0.08, -0.15, -0.53, -0.63],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorGridRow {
    pub u: f64,
    pub alpha: f64,
    pub approx: f64,
    pub exact: f64,
    pub rel_err_pct: f64,
    pub published_pct: f64,
    pub warn: bool,
}

/// Relative error of the closed-form quantile at unit rate over the
/// reference grid, level-major.
pub fn error_grid(model: &CorrectionModel) -> Result<Vec<ErrorGridRow>> {
    let cells: Vec<(usize, usize)> = (0..4).flat_map(|i| (0..7).map(move |j| (i, j))).collect();
    cells
        .par_iter()
        .map(|&(i, j)| {
            let (u, alpha) = (GRID_LEVELS[i], GRID_SHAPES[j]);
            let params = GammaParams::new(alpha, 1.0)?;
            let approx = gamma_quantile_approx(u, &params, model)?;
            let exact = params.quantile_exact(u)?;
            Ok(ErrorGridRow {
                u,
                alpha,
                approx: approx.value,
                exact,
                rel_err_pct: 100.0 * (approx.value - exact) / exact,
                published_pct: PUBLISHED_ERROR_PCT[i][j],
                warn: approx.is_flagged(),
            })
        })
        .collect()
}

pub fn write_error_grid_csv(rows: &[ErrorGridRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "u,alpha,approx,exact,rel_err_pct,published_pct,warn")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.2},{}",
            sig10(r.u),
            sig10(r.alpha),
            sig10(r.approx),
            sig10(r.exact),
            sig10(r.rel_err_pct),
            r.published_pct,
            u8::from(r.warn)
        )?;
    }
    Ok(())
}

pub const REFERENCE_PORTFOLIO: u32 = 500;
pub const REFERENCE_MEAN: f64 = 500.0;
pub const REFERENCE_KAPPA: f64 = 0.995;
pub const REFERENCE_EXPOSURES: [f64; 2] = [6000.0, 8000.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceComparisonRow {
    /// `exponential` or `L=<gross exposure>`.
    pub case: String,
    pub gross_exposure: Option<f64>,
    pub kappa_eff: f64,
    pub published_kappa_eff: f64,
    pub q_single: f64,
    pub q_aggregate: f64,
    pub diff_abs: f64,
    pub published_diff_abs: f64,
    pub diff_rel_pct: f64,
    pub published_diff_rel_pct: f64,
    pub warn: bool,
}

/// Exponential, L = 6000 and L = 8000 at N = 500, μ = 500, κ = 0.995 under
/// the given severity parameterisation.
pub fn reference_comparison(
    model: &CorrectionModel,
    alpha_unit: SeverityShape,
    mean_events: MeanEvents,
) -> Result<Vec<ReferenceComparisonRow>> {
    let spec = SweepSpec {
        n_values: vec![REFERENCE_PORTFOLIO],
        mu_values: vec![REFERENCE_MEAN],
        l_values: Some(REFERENCE_EXPOSURES.to_vec()),
        kappa: REFERENCE_KAPPA,
        alpha_unit,
        mean_events,
    };
    let mut rows = compare_exponential(&spec, model)?;
    rows.extend(compare_truncated(&spec, model)?);
    let published = [
        (0.995, 17013.22, 6.09),
        (0.991, 15475.54, 5.57),
        (0.994, 16985.01, 6.08),
    ];
    Ok(rows
        .into_iter()
        .zip(published)
        .map(|(r, (k, d, rel))| ReferenceComparisonRow {
            case: r
                .gross_exposure
                .map_or_else(|| "exponential".to_string(), |l| format!("L={l}")),
            gross_exposure: r.gross_exposure,
            kappa_eff: r.kappa_effective,
            published_kappa_eff: k,
            q_single: r.q_single,
            q_aggregate: r.q_aggregate,
            diff_abs: r.diff_abs,
            published_diff_abs: d,
            diff_rel_pct: 100.0 * r.diff_rel,
            published_diff_rel_pct: rel,
            warn: r.warn,
        })
        .collect())
}

pub fn write_reference_comparison_csv(rows: &[ReferenceComparisonRow], mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "case,kappa_eff,published_kappa_eff,q_single,q_aggregate,diff_abs,published_diff_abs,diff_rel_pct,published_diff_rel_pct,warn"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.3},{},{},{},{:.2},{},{:.2},{}",
            r.case,
            sig10(r.kappa_eff),
            r.published_kappa_eff,
            sig10(r.q_single),
            sig10(r.q_aggregate),
            sig10(r.diff_abs),
            r.published_diff_abs,
            pct2(r.diff_rel_pct / 100.0),
            r.published_diff_rel_pct,
            u8::from(r.warn)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_grid_is_complete_and_below_one_percent() {
        let rows = error_grid(&CorrectionModel::default()).unwrap();
        assert_eq!(rows.len(), 28);
        assert_eq!((rows[0].u, rows[0].alpha), (0.95, 1.0));
        assert_eq!((rows[27].u, rows[27].alpha), (0.999, 1000.0));
        for r in &rows {
            assert!(r.rel_err_pct.abs() < 1.0 && r.rel_err_pct <= 0.05, "{r:?}");
            assert_eq!(r.warn, r.alpha > 100.0);
        }
    }

    #[test]
    fn reference_comparison_has_three_cases_in_order() {
        let rows = reference_comparison(&CorrectionModel::default(), SeverityShape::UnitRate, MeanEvents::N).unwrap();
        let cases: Vec<&str> = rows.iter().map(|r| r.case.as_str()).collect();
        assert_eq!(cases, ["exponential", "L=6000", "L=8000"]);
        assert!(rows[1].diff_abs < rows[2].diff_abs && rows[2].diff_abs < rows[0].diff_abs);
        let mut buf = Vec::new();
        write_reference_comparison_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
