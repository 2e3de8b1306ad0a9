//! Single-loss vs aggregate-loss VaR across sweeps of portfolio size, mean
//! severity and gross exposure.
//!
//! For each cell the single-loss model (Erlang or truncated Erlang) and the
//! compound Poisson-Gamma model are given the same mean severity `μ`; the
//! difference of their quantiles is reported in absolute and relative terms.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sig10;
use crate::loss_models::{
    erlang_quantile, kappa_prime, kappa_prime_from_multiple, shifted_confidence, solve_lambda_from_mean,
    trunc_quantile, ConvolutionLoss, PoissonFrequency,
};
use crate::quantile_approx::{gamma_quantile_approx, CorrectionModel, GammaParams};

/// Aggregate shape `α' = (N + √N) α`: the Poisson count's mean plus one
/// standard deviation, times the per-severity shape.
pub fn alpha_prime(n_obligors: u32, alpha_unit: f64) -> Result<f64> {
    if n_obligors == 0 {
        return Err(Error::Invalid("portfolio needs at least one obligor".into()));
    }
    if !(alpha_unit > 0.0 && alpha_unit.is_finite()) {
        return Err(Error::Invalid(format!(
            "severity shape must be positive, got {alpha_unit}"
        )));
    }
    let n = n_obligors as f64;
    Ok((n + n.sqrt()) * alpha_unit)
}

/// Expected number of events used to shift the aggregate confidence level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanEvents {
    /// `E[N] = N`
    #[default]
    N,
    /// `E[N] = N + √N`
    NPlusSqrtN,
}

impl MeanEvents {
    pub fn value(self, n_obligors: u32) -> f64 {
        let n = n_obligors as f64;
        match self {
            MeanEvents::N => n,
            MeanEvents::NPlusSqrtN => n + n.sqrt(),
        }
    }
}

impl FromStr for MeanEvents {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "n" | "N" => Ok(MeanEvents::N),
            "n+sqrt" | "N+sqrt" | "n+sqrt(n)" => Ok(MeanEvents::NPlusSqrtN),
            other => Err(Error::Invalid(format!(
                "mean-events convention must be `n` or `n+sqrt`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for MeanEvents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeanEvents::N => "n",
            MeanEvents::NPlusSqrtN => "n+sqrt",
        })
    }
}

/// Per-severity Gamma parameterisation with mean `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SeverityShape {
    /// Rate 1, shape `μ`.
    #[default]
    UnitRate,
    /// Fixed shape `α`, rate `α/μ`.
    Fixed(f64),
}

impl SeverityShape {
    /// Shape for a severity of mean `mu`.
    pub fn shape(self, mu: f64) -> f64 {
        match self {
            SeverityShape::UnitRate => mu,
            SeverityShape::Fixed(alpha) => alpha,
        }
    }
}

impl FromStr for SeverityShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "mu" {
            return Ok(SeverityShape::UnitRate);
        }
        match s.parse::<f64>() {
            Ok(a) if a > 0.0 && a.is_finite() => Ok(SeverityShape::Fixed(a)),
            _ => Err(Error::Invalid(format!(
                "severity shape must be `mu` or a positive number, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for SeverityShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeverityShape::UnitRate => f.write_str("mu"),
            SeverityShape::Fixed(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub n_values: Vec<u32>,
    pub mu_values: Vec<f64>,
    /// Gross exposures; required by the truncated sweep, ignored otherwise.
    pub l_values: Option<Vec<f64>>,
    pub kappa: f64,
    pub alpha_unit: SeverityShape,
    pub mean_events: MeanEvents,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.mu_values.is_empty() {
            return Err(Error::Invalid("sweep needs at least one N and one mu".into()));
        }
        if self.n_values.contains(&0) {
            return Err(Error::Invalid("N must be at least 1".into()));
        }
        if self.mu_values.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::Invalid("mean severities must be positive".into()));
        }
        if let Some(ls) = &self.l_values {
            if ls.iter().any(|&l| !(l > 0.0)) {
                return Err(Error::Invalid("gross exposures must be positive".into()));
            }
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Invalid(format!(
                "confidence level must lie in (0, 1), got {}",
                self.kappa
            )));
        }
        if let SeverityShape::Fixed(a) = self.alpha_unit {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Invalid(format!("severity shape must be positive, got {a}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub n_obligors: u32,
    pub mu: f64,
    pub gross_exposure: Option<f64>,
    pub kappa: f64,
    /// `κ` for exponential severities, `κ'` for truncated ones.
    pub kappa_effective: f64,
    /// Shifted level of the aggregate model.
    pub u: f64,
    pub q_single: f64,
    pub q_aggregate: f64,
    pub diff_abs: f64,
    pub diff_rel: f64,
    /// Some quantile was evaluated outside the calibrated region.
    pub warn: bool,
}

fn aggregate_quantile(n: u32, mu: f64, spec: &SweepSpec, model: &CorrectionModel) -> Result<(f64, f64, bool)> {
    let alpha_unit = spec.alpha_unit.shape(mu);
    let params = GammaParams::new(alpha_prime(n, alpha_unit)?, alpha_unit / mu)?;
    let freq = PoissonFrequency::new(spec.mean_events.value(n))?;
    let u = shifted_confidence(spec.kappa, &freq)?;
    let q = gamma_quantile_approx(u, &params, model)?;
    Ok((u, q.value, q.is_flagged()))
}

fn row(
    n: u32,
    mu: f64,
    gross_exposure: Option<f64>,
    kappa: f64,
    kappa_effective: f64,
    single: (f64, bool),
    aggregate: (f64, f64, bool),
) -> ComparisonRow {
    let (q_single, w1) = single;
    let (u, q_aggregate, w2) = aggregate;
    let diff_abs = q_single - q_aggregate;
    ComparisonRow {
        n_obligors: n,
        mu,
        gross_exposure,
        kappa,
        kappa_effective,
        u,
        q_single,
        q_aggregate,
        diff_abs,
        diff_rel: diff_abs / q_single,
        warn: w1 || w2,
    }
}

/// Exponential severities with rate `1/μ` against Gamma severities of the
/// same mean. Rows are ordered by μ, then N.
pub fn compare_exponential(spec: &SweepSpec, model: &CorrectionModel) -> Result<Vec<ComparisonRow>> {
    spec.validate()?;
    let cells: Vec<(f64, u32)> = spec
        .mu_values
        .iter()
        .flat_map(|&mu| spec.n_values.iter().map(move |&n| (mu, n)))
        .collect();
    cells
        .par_iter()
        .map(|&(mu, n)| {
            let conv = ConvolutionLoss::exponential(n, 1.0 / mu)?;
            let single = erlang_quantile(spec.kappa, &conv, model)?;
            let aggregate = aggregate_quantile(n, mu, spec, model)?;
            Ok(row(
                n,
                mu,
                None,
                spec.kappa,
                spec.kappa,
                (single.value, single.is_flagged()),
                aggregate,
            ))
        })
        .collect()
}

/// Truncated exponential severities (rate solved so the truncated mean is
/// `μ`) against Gamma severities of mean `μ`. Rows are ordered by μ, L, N.
pub fn compare_truncated(spec: &SweepSpec, model: &CorrectionModel) -> Result<Vec<ComparisonRow>> {
    spec.validate()?;
    let ls = match &spec.l_values {
        Some(ls) if !ls.is_empty() => ls,
        _ => return Err(Error::Invalid("truncated comparison needs gross exposures".into())),
    };
    let mut cells = Vec::with_capacity(spec.mu_values.len() * ls.len() * spec.n_values.len());
    for &mu in &spec.mu_values {
        for &l in ls {
            for &n in &spec.n_values {
                cells.push((mu, l, n));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(mu, l, n)| {
            let lambda = solve_lambda_from_mean(mu, l)?;
            let conv = ConvolutionLoss::truncated(n, lambda, l)?;
            let single = trunc_quantile(spec.kappa, &conv, model)?;
            let level = kappa_prime(spec.kappa, &conv)?;
            let aggregate = aggregate_quantile(n, mu, spec, model)?;
            Ok(row(
                n,
                mu,
                Some(l),
                spec.kappa,
                level,
                (single.value, single.is_flagged()),
                aggregate,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaPrimePoint {
    pub c: f64,
    pub n_obligors: u32,
    pub kappa_prime: f64,
}

/// `κ'` over a grid of exposure multiples and portfolio sizes, ordered by N
/// then C. `N = 0` gives back `κ`.
pub fn kappa_prime_curve(c_values: &[f64], n_values: &[u32], kappa: f64) -> Result<Vec<KappaPrimePoint>> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Invalid(format!(
            "confidence level must lie in (0, 1), got {kappa}"
        )));
    }
    if let Some(c) = c_values.iter().find(|&&c| !(c > 0.0)) {
        return Err(Error::Invalid(format!("exposure multiple must be positive, got {c}")));
    }
    Ok(n_values
        .iter()
        .flat_map(|&n| {
            c_values.iter().map(move |&c| KappaPrimePoint {
                c,
                n_obligors: n,
                kappa_prime: kappa_prime_from_multiple(kappa, c, n),
            })
        })
        .collect())
}

pub const COMPARISON_HEADER: &str = "N,mu,L,kappa,kappa_eff,u,q_single,q_aggregate,diff_abs,diff_rel,warn";

pub fn write_comparison_csv(rows: &[ComparisonRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{COMPARISON_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n_obligors,
            sig10(r.mu),
            r.gross_exposure.map(sig10).unwrap_or_default(),
            sig10(r.kappa),
            sig10(r.kappa_effective),
            sig10(r.u),
            sig10(r.q_single),
            sig10(r.q_aggregate),
            sig10(r.diff_abs),
            sig10(r.diff_rel),
            u8::from(r.warn)
        )?;
    }
    Ok(())
}

pub fn write_kappa_curve_csv(points: &[KappaPrimePoint], mut out: impl Write) -> Result<()> {
    writeln!(out, "C,N,kappa_prime")?;
    for p in points {
        writeln!(out, "{},{},{}", sig10(p.c), p.n_obligors, sig10(p.kappa_prime))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::inverse_regularized_p;
    use approx::assert_relative_eq;

    fn spec(n_values: Vec<u32>, mu_values: Vec<f64>, l_values: Option<Vec<f64>>) -> SweepSpec {
        SweepSpec {
            n_values,
            mu_values,
            l_values,
            kappa: 0.995,
            alpha_unit: SeverityShape::UnitRate,
            mean_events: MeanEvents::N,
        }
    }

    #[test]
    fn alpha_prime_examples() {
        assert_relative_eq!(
            alpha_prime(500, 1.0).unwrap(),
            522.360_679_774_998,
            max_relative = 1e-15
        );
        assert_eq!(alpha_prime(1, 3.5).unwrap(), 7.0);
        assert_eq!(alpha_prime(10_000, 0.5).unwrap(), 5050.0);
        assert!(alpha_prime(0, 1.0).is_err());
        assert!(alpha_prime(5, 0.0).is_err());
    }

    #[test]
    fn conventions_parse() {
        assert_eq!("n".parse::<MeanEvents>().unwrap(), MeanEvents::N);
        assert_eq!("n+sqrt".parse::<MeanEvents>().unwrap(), MeanEvents::NPlusSqrtN);
        assert!("sqrt".parse::<MeanEvents>().is_err());
        assert_eq!("mu".parse::<SeverityShape>().unwrap(), SeverityShape::UnitRate);
        assert_eq!("2.5".parse::<SeverityShape>().unwrap(), SeverityShape::Fixed(2.5));
        assert!("-1".parse::<SeverityShape>().is_err());
        assert_eq!(MeanEvents::NPlusSqrtN.value(100), 110.0);
    }

    #[test]
    fn rows_satisfy_difference_identities() {
        let s = spec(vec![100, 500, 1000], vec![200.0, 500.0], None);
        let rows = compare_exponential(&s, &CorrectionModel::default()).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert_eq!(r.diff_abs, r.q_single - r.q_aggregate);
            assert!((r.diff_rel * r.q_single - r.diff_abs).abs() <= 1e-12 * r.diff_abs.abs().max(1.0));
        }
        // μ outer, N inner
        let order: Vec<(f64, u32)> = rows.iter().map(|r| (r.mu, r.n_obligors)).collect();
        assert_eq!(order[0], (200.0, 100));
        assert_eq!(order[2], (200.0, 1000));
        assert_eq!(order[3], (500.0, 100));
    }

    #[test]
    fn single_quantile_tracks_erlang_oracle() {
        let s = spec(vec![500], vec![500.0], None);
        let r = compare_exponential(&s, &CorrectionModel::default()).unwrap()[0];
        let exact = inverse_regularized_p(500.0, 0.995).unwrap() * 500.0;
        assert!(
            r.q_single <= exact && (exact - r.q_single) / exact < 5e-3,
            "{} vs {exact}",
            r.q_single
        );
        assert_relative_eq!(r.u, 0.99999, max_relative = 1e-14);
        assert!(r.warn);
    }

    #[test]
    fn exponential_difference_shrinks_with_portfolio_size() {
        let s = spec((1..=20).map(|k| 100 * k).collect(), vec![200.0, 500.0], None);
        let rows = compare_exponential(&s, &CorrectionModel::default()).unwrap();
        for curve in rows.chunks(20) {
            assert!(curve.windows(2).all(|w| w[1].diff_rel < w[0].diff_rel));
        }
        let spread_first = (rows[0].diff_rel - rows[20].diff_rel).abs();
        let spread_last = (rows[19].diff_rel - rows[39].diff_rel).abs();
        assert!(spread_last < spread_first);
    }

    #[test]
    fn fixed_shape_makes_relative_difference_scale_free() {
        let mut s = spec(vec![100, 700], vec![200.0, 500.0], None);
        s.alpha_unit = SeverityShape::Fixed(1.0);
        let rows = compare_exponential(&s, &CorrectionModel::default()).unwrap();
        assert_relative_eq!(rows[0].diff_rel, rows[2].diff_rel, max_relative = 1e-9);
        assert_relative_eq!(rows[1].diff_rel, rows[3].diff_rel, max_relative = 1e-9);
    }

    #[test]
    fn truncated_sweep_orders_and_approaches_exponential() {
        let model = CorrectionModel::default();
        let s = spec(vec![500], vec![500.0], Some(vec![6000.0, 8000.0]));
        let trunc = compare_truncated(&s, &model).unwrap();
        let exp = compare_exponential(&s, &model).unwrap()[0];
        assert!(trunc[0].diff_abs < trunc[1].diff_abs && trunc[1].diff_abs < exp.diff_abs);
        assert!((trunc[0].kappa_effective - 0.991).abs() <= 1e-3);
        assert!((trunc[1].kappa_effective - 0.994).abs() <= 1e-3);
        assert_eq!(trunc[0].gross_exposure, Some(6000.0));
    }

    #[test]
    fn truncated_sweep_rejects_tight_exposure() {
        let s = spec(vec![10], vec![500.0], Some(vec![1100.0]));
        assert!(matches!(
            compare_truncated(&s, &CorrectionModel::default()),
            Err(Error::TruncationTooTight { .. })
        ));
        let missing = spec(vec![10], vec![500.0], None);
        assert!(compare_truncated(&missing, &CorrectionModel::default()).is_err());
    }

    #[test]
    fn kappa_prime_curve_examples() {
        let pts = kappa_prime_curve(&[12.0, 800.0], &[0, 500], 0.995).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0].kappa_prime, 0.995);
        assert_eq!(pts[1].kappa_prime, 0.995);
        // (1 - e^{-12})^500 · 0.995
        let direct = 0.995 * (1.0 - (-12f64).exp()).powi(500);
        assert_relative_eq!(pts[2].kappa_prime, direct, max_relative = 1e-12);
        assert!((pts[2].kappa_prime - 0.9920).abs() < 1e-4);
        assert_relative_eq!(pts[3].kappa_prime, 0.995, max_relative = 1e-15);
        assert!(kappa_prime_curve(&[0.0], &[1], 0.995).is_err());
    }

    #[test]
    fn csv_layout() {
        let s = spec(vec![500], vec![500.0], Some(vec![6000.0]));
        let rows = compare_truncated(&s, &CorrectionModel::default()).unwrap();
        let mut buf = Vec::new();
        write_comparison_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(COMPARISON_HEADER));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 11);
        assert_eq!(fields[0], "500");
        assert_eq!(fields[2], "6000.000000");
        assert_eq!(fields[10], "1");
        let q: f64 = fields[6].parse().unwrap();
        assert_relative_eq!(q, rows[0].q_single, max_relative = 1e-9);
    }
}
