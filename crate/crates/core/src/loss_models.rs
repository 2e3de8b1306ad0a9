//! Closed-form VaR for the two portfolio loss models.
//!
//! * Aggregate loss: Poisson frequency, Gamma severities. At high confidence
//!   the portfolio quantile at `κ` is the severity quantile at the shifted
//!   level `u = 1 - (1 - κ)/E[N]`.
//! * Single loss: `N` obligors that all default, i.i.d. exponential or
//!   truncated exponential severities. The sum is Erlang (times a constant
//!   for truncation), so the Gamma tail approximation applies with `α = N`,
//!   `β = λ'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile_approx::{gamma_quantile_approx, CorrectionModel, Flagged, GammaParams};
use crate::special_fn::regularized_p;

/// Gross exposure must exceed this multiple of the exponential mean `1/λ'`.
pub const MIN_EXPOSURE_MULTIPLE: f64 = 9.0;

/// Poisson frequency with mean `E[N]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonFrequency {
    mean_events: f64,
}

impl PoissonFrequency {
    pub fn new(mean_events: f64) -> Result<Self> {
        if !(mean_events > 0.0 && mean_events.is_finite()) {
            return Err(Error::Invalid(format!(
                "Poisson mean must be positive, got {mean_events}"
            )));
        }
        Ok(Self { mean_events })
    }

    pub fn mean_events(&self) -> f64 {
        self.mean_events
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SeveritySpec {
    Exponential { lambda: f64 },
    TruncatedExponential { lambda: f64, gross_exposure: f64 },
    Gamma(GammaParams),
}

impl SeveritySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SeveritySpec::Exponential { lambda } => positive("rate", lambda),
            SeveritySpec::TruncatedExponential { lambda, gross_exposure } => {
                positive("rate", lambda)?;
                positive("gross exposure", gross_exposure)
            }
            SeveritySpec::Gamma(_) => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            SeveritySpec::Exponential { lambda } => 1.0 / lambda,
            SeveritySpec::TruncatedExponential { lambda, gross_exposure } => truncated_mean(lambda, gross_exposure),
            SeveritySpec::Gamma(p) => p.mean(),
        }
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{what} must be positive, got {v}")))
    }
}

/// Sum of `N` i.i.d. exponential or truncated exponential severities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionLoss {
    n_obligors: u32,
    severity: SeveritySpec,
}

impl ConvolutionLoss {
    pub fn exponential(n_obligors: u32, lambda: f64) -> Result<Self> {
        Self::new(n_obligors, SeveritySpec::Exponential { lambda })
    }

    pub fn truncated(n_obligors: u32, lambda: f64, gross_exposure: f64) -> Result<Self> {
        Self::new(
            n_obligors,
            SeveritySpec::TruncatedExponential { lambda, gross_exposure },
        )
    }

    pub fn new(n_obligors: u32, severity: SeveritySpec) -> Result<Self> {
        if n_obligors == 0 {
            return Err(Error::Invalid("portfolio needs at least one obligor".into()));
        }
        if matches!(severity, SeveritySpec::Gamma(_)) {
            return Err(Error::Invalid(
                "convolution model takes exponential or truncated exponential severities".into(),
            ));
        }
        severity.validate()?;
        Ok(Self { n_obligors, severity })
    }

    /// Heterogeneous obligors collapse to the common rate `λ' = inf λ_i`.
    /// The smallest rate has the heaviest tail, so this overstates the loss.
    pub fn from_rates(rates: &[f64], gross_exposure: Option<f64>) -> Result<Self> {
        let n = u32::try_from(rates.len()).map_err(|_| Error::Invalid("too many obligors".into()))?;
        let lambda = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        match gross_exposure {
            Some(l) => Self::truncated(n, lambda, l),
            None => Self::exponential(n, lambda),
        }
    }

    pub fn n_obligors(&self) -> u32 {
        self.n_obligors
    }

    pub fn severity(&self) -> SeveritySpec {
        self.severity
    }

    pub fn lambda_prime(&self) -> f64 {
        match self.severity {
            SeveritySpec::Exponential { lambda } | SeveritySpec::TruncatedExponential { lambda, .. } => lambda,
            SeveritySpec::Gamma(_) => unreachable!("rejected in constructor"),
        }
    }

    pub fn gross_exposure(&self) -> Option<f64> {
        match self.severity {
            SeveritySpec::TruncatedExponential { gross_exposure, .. } => Some(gross_exposure),
            _ => None,
        }
    }

    /// `C = L λ'`, the gross exposure in units of the exponential mean.
    pub fn exposure_multiple(&self) -> Option<f64> {
        self.gross_exposure().map(|l| l * self.lambda_prime())
    }

    /// Erlang shape/rate `(N, λ')`.
    pub fn erlang_params(&self) -> GammaParams {
        GammaParams::new(self.n_obligors as f64, self.lambda_prime()).expect("validated")
    }

    fn require_exponential(&self, function: &str) -> Result<()> {
        match self.severity {
            SeveritySpec::Exponential { .. } => Ok(()),
            _ => Err(Error::Invalid(format!("{function} needs exponential severities"))),
        }
    }

    fn require_truncated(&self, function: &str) -> Result<(f64, f64)> {
        match self.severity {
            SeveritySpec::TruncatedExponential { lambda, gross_exposure } => Ok((lambda, gross_exposure)),
            _ => Err(Error::Invalid(format!(
                "{function} needs truncated exponential severities"
            ))),
        }
    }
}

fn check_confidence(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "confidence level must lie in (0, 1), got {kappa}"
        )))
    }
}

/// `u = 1 - (1 - κ) / E[N]`.
pub fn shifted_confidence(kappa: f64, freq: &PoissonFrequency) -> Result<f64> {
    check_confidence(kappa)?;
    let u = 1.0 - (1.0 - kappa) / freq.mean_events;
    if u > 0.0 {
        Ok(u)
    } else {
        Err(Error::ShiftedConfidence { u })
    }
}

/// How a Gamma quantile is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantileMethod {
    /// Closed-form tail approximation.
    #[default]
    Approximation,
    /// Numerical inversion of the CDF.
    Exact,
}

/// VaR of the compound Poisson-Gamma aggregate loss: the severity quantile at
/// the shifted level.
pub fn var_aggregate(
    kappa: f64,
    freq: &PoissonFrequency,
    severity: &GammaParams,
    model: &CorrectionModel,
    method: QuantileMethod,
) -> Result<Flagged<f64>> {
    let u = shifted_confidence(kappa, freq)?;
    match method {
        QuantileMethod::Approximation => gamma_quantile_approx(u, severity, model),
        QuantileMethod::Exact => Ok(Flagged {
            value: severity.quantile_exact(u)?,
            warning: None,
        }),
    }
}

/// Erlang CDF `γ(N, λ'x) / (N-1)!`.
pub fn erlang_cdf(x: f64, conv: &ConvolutionLoss) -> Result<f64> {
    conv.require_exponential("erlang_cdf")?;
    if !(x >= 0.0) {
        return Err(Error::domain(
            "erlang_cdf",
            format!("loss must be nonnegative, got {x}"),
        ));
    }
    regularized_p(conv.n_obligors as f64, conv.lambda_prime() * x)
}

/// Closed-form `κ`-quantile of the Erlang single-loss distribution.
pub fn erlang_quantile(kappa: f64, conv: &ConvolutionLoss, model: &CorrectionModel) -> Result<Flagged<f64>> {
    conv.require_exponential("erlang_quantile")?;
    check_confidence(kappa)?;
    gamma_quantile_approx(kappa, &conv.erlang_params(), model)
}

/// `x / (e^x - 1)` complement, `1 - x/(e^x - 1)`, without cancellation near 0.
fn one_minus_x_over_expm1(x: f64) -> f64 {
    if x < 1e-2 {
        let x2 = x * x;
        x / 2.0 - x2 / 12.0 + x2 * x2 / 720.0 - x2 * x2 * x2 / 30_240.0
    } else if x > 700.0 {
        1.0
    } else {
        1.0 - x / x.exp_m1()
    }
}

fn truncated_mean(lambda: f64, gross_exposure: f64) -> f64 {
    if gross_exposure.is_infinite() {
        return 1.0 / lambda;
    }
    one_minus_x_over_expm1(lambda * gross_exposure) / lambda
}

/// Mean of the exponential distribution truncated to `(0, L)`:
/// `1/λ - L e^{-λL} / (1 - e^{-λL})`.
pub fn trunc_exp_mean(lambda: f64, gross_exposure: f64) -> Result<f64> {
    positive("rate", lambda)?;
    positive("gross exposure", gross_exposure)?;
    Ok(truncated_mean(lambda, gross_exposure))
}

/// The same mean written as `(1 - e^{Lλ} + Lλ) / (λ (1 - e^{Lλ}))`.
///
/// Overflows once `Lλ` passes ~709; use [`trunc_exp_mean`] instead.
pub fn trunc_exp_mean_unstable(lambda: f64, gross_exposure: f64) -> f64 {
    let x = gross_exposure * lambda;
    (1.0 - x.exp() + x) / (lambda * (1.0 - x.exp()))
}

/// Rate `λ'` whose truncated-exponential mean on `(0, L)` equals `mu`.
///
/// The truncated mean falls strictly from `L/2` (λ → 0) to 0, so any
/// `0 < mu < L/2` has exactly one solution. Found by bisection on `C = λL`.
pub fn solve_lambda_from_mean(mu: f64, gross_exposure: f64) -> Result<f64> {
    positive("target mean", mu)?;
    positive("gross exposure", gross_exposure)?;
    if gross_exposure.is_infinite() {
        return Ok(1.0 / mu);
    }
    if mu >= gross_exposure / 2.0 {
        return Err(Error::InfeasibleMean { mu, gross_exposure });
    }
    let mean_at = |c: f64| gross_exposure / c * one_minus_x_over_expm1(c);
    // at λ = 1/μ the truncated mean is already below μ
    let mut hi = gross_exposure / mu;
    let mut lo = hi / 2.0;
    while mean_at(lo) <= mu {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-300 {
            return Err(Error::NoConvergence {
                function: "solve_lambda_from_mean bracketing",
                iterations: 1000,
            });
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean_at(mid) > mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = if (mean_at(lo) - mu).abs() <= (mean_at(hi) - mu).abs() {
        lo
    } else {
        hi
    };
    let lambda = c / gross_exposure;
    let achieved = truncated_mean(lambda, gross_exposure);
    if (achieved - mu).abs() <= mu * 1e-12 {
        Ok(lambda)
    } else {
        Err(Error::NoConvergence {
            function: "solve_lambda_from_mean",
            iterations: 300,
        })
    }
}

/// `N ln(1 - e^{-λ'L})`, the log of the truncation normaliser.
fn ln_truncation_factor(n: u32, c: f64) -> f64 {
    n as f64 * (-(-c).exp()).ln_1p()
}

/// Convolution CDF for truncated severities in the closed form
/// `(1 - e^{-λ'L})^{-N} γ(N, λ'x) / Γ(N)`.
///
/// This is not a proper CDF: it exceeds 1 for large `x`. The quantile
/// compensates by inverting at [`kappa_prime`].
pub fn trunc_conv_cdf(x: f64, conv: &ConvolutionLoss) -> Result<f64> {
    let (lambda, l) = conv.require_truncated("trunc_conv_cdf")?;
    if !(x >= 0.0) {
        return Err(Error::domain(
            "trunc_conv_cdf",
            format!("loss must be nonnegative, got {x}"),
        ));
    }
    let p = regularized_p(conv.n_obligors as f64, lambda * x)?;
    Ok(p * (-ln_truncation_factor(conv.n_obligors, lambda * l)).exp())
}

/// `κ' = (1 - e^{-λ'L})^N κ`.
pub fn kappa_prime(kappa: f64, conv: &ConvolutionLoss) -> Result<f64> {
    let (lambda, l) = conv.require_truncated("kappa_prime")?;
    check_confidence(kappa)?;
    Ok(kappa_prime_from_multiple(kappa, lambda * l, conv.n_obligors))
}

/// `κ' = (1 - e^{-C})^N κ` for an exposure multiple `C`.
pub fn kappa_prime_from_multiple(kappa: f64, c: f64, n_obligors: u32) -> f64 {
    kappa * ln_truncation_factor(n_obligors, c).exp()
}

/// Closed-form quantile of the truncated single-loss model: the Erlang tail
/// approximation evaluated at `κ'`. Requires `C = λ'L > 9`.
pub fn trunc_quantile(kappa: f64, conv: &ConvolutionLoss, model: &CorrectionModel) -> Result<Flagged<f64>> {
    let (lambda, l) = conv.require_truncated("trunc_quantile")?;
    let c = lambda * l;
    if !(c > MIN_EXPOSURE_MULTIPLE) {
        return Err(Error::TruncationTooTight { c });
    }
    let level = kappa_prime(kappa, conv)?;
    gamma_quantile_approx(level, &conv.erlang_params(), model)
}
