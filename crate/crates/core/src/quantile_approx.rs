//! Closed-form Gamma quantile at high confidence levels.
//!
//! In the upper tail the Gamma CDF is close to a straight line. Linearising it
//! at an evaluation point `x̄ = μ + Δ` and inverting gives
//!
//! ```text
//! q(u) = x̄ + e^{βx̄} x̄ (βx̄)^{-α} (u Γ(α) - γ(α, βx̄))
//! x̄    = α/β · (1 + γ(α, α) / (p(u, α) (e^{-α} α^α + Γ(α))))
//! ```
//!
//! where the correction factor `p(u, α) = a(u) log(b(u) α)` comes from a
//! [`CorrectionModel`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::{inverse_regularized_p, ln_gamma_prefix, regularized_p};

/// Shape/rate pair of a Gamma distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    alpha: f64,
    beta: f64,
}

impl GammaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Invalid(format!("Gamma shape must be positive, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Invalid(format!("Gamma rate must be positive, got {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }

    /// `F(x) = P(α, βx)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        regularized_p(self.alpha, (self.beta * x).max(0.0))
    }

    /// Exact quantile by numerical inversion of the CDF.
    pub fn quantile_exact(&self, u: f64) -> Result<f64> {
        Ok(inverse_regularized_p(self.alpha, u)? / self.beta)
    }
}

/// Emitted when a correction factor is evaluated outside the region its
/// polynomials were fitted on. The value is still returned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeWarning {
    pub u: f64,
    pub alpha: f64,
    pub u_range: [f64; 2],
    pub alpha_range: [f64; 2],
}

impl fmt::Display for RangeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(u={}, alpha={}) outside calibrated region u in [{}, {}], alpha in [{}, {}]",
            self.u, self.alpha, self.u_range[0], self.u_range[1], self.alpha_range[0], self.alpha_range[1]
        )
    }
}

/// A value plus an optional out-of-range warning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub warning: Option<RangeWarning>,
}

impl<T> Flagged<T> {
    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Flagged<U> {
        Flagged {
            value: f(self.value),
            warning: self.warning,
        }
    }

    pub fn is_flagged(&self) -> bool {
        self.warning.is_some()
    }
}

/// Polynomial model of the correction factor, `p(u, α) = a(u) log(b(u) α)`
/// with `a(u) = Σ c_i u^i` (degree 6) and `b(u) = Σ d_i u^i` (degree 7).
///
/// Serialises as `{"c":[7],"d":[8],"alpha_range":[lo,hi],"u_range":[lo,hi]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionModel {
    pub c: [f64; 7],
    pub d: [f64; 8],
    pub alpha_range: [f64; 2],
    pub u_range: [f64; 2],
}

pub const DEFAULT_ALPHA_RANGE: [f64; 2] = [1.0, 100.0];
pub const DEFAULT_U_RANGE: [f64; 2] = [0.9, 0.999];

// Output of `calibration::calibrate(&CalibrationGrid::default())`, full precision.
const CALIBRATED_C: [f64; 7] = [
    -485552.3343396812,
    3091875.7888323604,
    -8201906.164232721,
    11601786.584772978,
    -9229465.62524437,
    3915133.474307921,
    -691871.6740164956,
];
const CALIBRATED_D: [f64; 8] = [
    2110539602.9217129,
    -15659983676.252495,
    49790306149.107735,
    -87934149566.22752,
    93165013192.32805,
    -59214797926.30532,
    20905749163.108894,
    -3162676934.617369,
];

impl Default for CorrectionModel {
    /// The calibrated model shipped with the crate.
    fn default() -> Self {
        Self {
            c: CALIBRATED_C,
            d: CALIBRATED_D,
            alpha_range: DEFAULT_ALPHA_RANGE,
            u_range: DEFAULT_U_RANGE,
        }
    }
}

/// Compensated Horner: the monomial terms are ~1e10 times larger than the
/// result, so plain Horner leaves ~1e-6 relative noise in `a(u)` and `b(u)`.
pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for &c in coeffs.iter().rev() {
        let p = hi * x;
        let p_err = hi.mul_add(x, -p);
        let s = p + c;
        let t = s - p;
        let s_err = (p - (s - t)) + (c - t);
        hi = s;
        lo = lo.mul_add(x, p_err + s_err);
    }
    hi + lo
}

impl CorrectionModel {
    /// The reference coefficients as published, to three significant
    /// figures. Rounding destroys the cancellation between terms of size
    /// 1e5..1e11, so `a(u)` and `b(u)` come out orders of magnitude wrong;
    /// kept for comparison only.
    pub fn published() -> Self {
        Self {
            c: [-4.83e5, 3.08e6, -8.16e6, 1.16e7, -9.19e6, 3.90e6, -6.90e5],
            d: [4.35e9, -3.23e10, 1.02e11, -1.80e11, 1.91e11, -1.21e11, 4.26e10, -6.44e9],
            alpha_range: DEFAULT_ALPHA_RANGE,
            u_range: DEFAULT_U_RANGE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.c.iter().chain(self.d.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Invalid("correction model coefficients must be finite".into()));
        }
        for (name, r) in [("alpha_range", self.alpha_range), ("u_range", self.u_range)] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(Error::Invalid(format!(
                    "{name} must be an ordered finite interval, got {r:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain numeric struct")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn a(&self, u: f64) -> f64 {
        horner(&self.c, u)
    }

    pub fn b(&self, u: f64) -> f64 {
        horner(&self.d, u)
    }

    pub fn in_range(&self, u: f64, alpha: f64) -> bool {
        (self.u_range[0]..=self.u_range[1]).contains(&u) && (self.alpha_range[0]..=self.alpha_range[1]).contains(&alpha)
    }

    fn warning(&self, u: f64, alpha: f64) -> Option<RangeWarning> {
        (!self.in_range(u, alpha)).then_some(RangeWarning {
            u,
            alpha,
            u_range: self.u_range,
            alpha_range: self.alpha_range,
        })
    }
}

/// `p(u, α) = a(u) log(b(u) α)`. Out-of-range inputs are flagged, not rejected.
pub fn correction_factor(u: f64, alpha: f64, model: &CorrectionModel) -> Result<Flagged<f64>> {
    let (a, b) = (model.a(u), model.b(u));
    let arg = b * alpha;
    if !(arg > 0.0) || !a.is_finite() {
        return Err(Error::InvalidCorrection { u, alpha, p: f64::NAN });
    }
    Ok(Flagged {
        value: a * arg.ln(),
        warning: model.warning(u, alpha),
    })
}

/// `γ(α, α) / (e^{-α} α^α + Γ(α))`, the β- and p-free part of `Δ/μ`.
fn shift_ratio(alpha: f64) -> Result<f64> {
    let p_at_mean = regularized_p(alpha, alpha)?;
    // divide through by Γ(α): e^{-α} α^α / Γ(α) = exp(prefix(α, α))
    Ok(p_at_mean / (ln_gamma_prefix(alpha, alpha).exp() + 1.0))
}

/// `x̄ = μ (1 + R(α) / p)` for an explicit correction factor `p > 0`.
pub fn evaluation_point_with_p(p: f64, params: &GammaParams) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Invalid(format!("correction factor must be positive, got {p}")));
    }
    let mu = params.mean();
    Ok(mu + mu * shift_ratio(params.alpha)? / p)
}

fn model_p(u: f64, params: &GammaParams, model: &CorrectionModel) -> Result<Flagged<f64>> {
    let p = correction_factor(u, params.alpha, model)?;
    if !(p.value > 0.0) {
        return Err(Error::InvalidCorrection {
            u,
            alpha: params.alpha,
            p: p.value,
        });
    }
    Ok(p)
}

/// Evaluation point `x̄ = μ + Δ` with `p` taken from the model.
pub fn evaluation_point(u: f64, params: &GammaParams, model: &CorrectionModel) -> Result<Flagged<f64>> {
    let p = model_p(u, params, model)?;
    Ok(Flagged {
        value: evaluation_point_with_p(p.value, params)?,
        warning: p.warning,
    })
}

/// Tangent line to the Gamma CDF at `x_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailLinearization {
    pub x_bar: f64,
    pub slope: f64,
    pub y_intercept: f64,
}

impl TailLinearization {
    pub fn at(params: &GammaParams, x_bar: f64) -> Result<Self> {
        if !(x_bar > 0.0) || !x_bar.is_finite() {
            return Err(Error::Invalid(format!(
                "evaluation point must be positive, got {x_bar}"
            )));
        }
        let z = params.beta * x_bar;
        // β e^{-z} z^{α-1} / Γ(α) = exp(prefix(α, z)) / x̄
        let density_scaled = ln_gamma_prefix(params.alpha, z).exp();
        let slope = density_scaled / x_bar;
        let y_intercept = regularized_p(params.alpha, z)? - density_scaled;
        Ok(Self {
            x_bar,
            slope,
            y_intercept,
        })
    }

    /// Linear CDF estimate at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.slope * x + self.y_intercept
    }

    /// Solves `slope * x + y_intercept = u`.
    pub fn invert(&self, u: f64) -> f64 {
        (u - self.y_intercept) / self.slope
    }
}

pub fn tail_linearization(u: f64, params: &GammaParams, model: &CorrectionModel) -> Result<Flagged<TailLinearization>> {
    let x_bar = evaluation_point(u, params, model)?;
    Ok(Flagged {
        value: TailLinearization::at(params, x_bar.value)?,
        warning: x_bar.warning,
    })
}

fn check_level(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(
            "gamma_quantile_approx",
            format!("confidence level must lie in (0, 1), got {u}"),
        ))
    }
}

/// Unchecked closed-form value; may be negative or infinite when `x_bar`
/// sits far out in the tail.
pub(crate) fn raw_quantile_at_point(u: f64, params: &GammaParams, x_bar: f64) -> Result<f64> {
    let z = params.beta * x_bar;
    let gap = u - regularized_p(params.alpha, z)?;
    // e^{z} z^{-α} Γ(α) x̄ = x̄ / exp(prefix(α, z))
    Ok(x_bar + gap * x_bar * (-ln_gamma_prefix(params.alpha, z)).exp())
}

/// The closed-form quantile for a given evaluation point.
pub fn quantile_at_point(u: f64, params: &GammaParams, x_bar: f64) -> Result<f64> {
    check_level(u)?;
    let q = raw_quantile_at_point(u, params, x_bar)?;
    if q.is_finite() && q > 0.0 {
        Ok(q)
    } else {
        Err(Error::Invalid(format!(
            "tail approximation breaks down at u={u}, alpha={}, x_bar={x_bar} (q={q})",
            params.alpha
        )))
    }
}

/// The closed-form quantile for an explicit correction factor.
pub fn quantile_with_p(u: f64, params: &GammaParams, p: f64) -> Result<f64> {
    quantile_at_point(u, params, evaluation_point_with_p(p, params)?)
}

/// Closed-form approximation of the Gamma quantile `F^{-1}(u; α, β)`.
pub fn gamma_quantile_approx(u: f64, params: &GammaParams, model: &CorrectionModel) -> Result<Flagged<f64>> {
    check_level(u)?;
    let x_bar = evaluation_point(u, params, model)?;
    Ok(Flagged {
        value: quantile_at_point(u, params, x_bar.value)?,
        warning: x_bar.warning,
    })
}

/// `(q_approx - q_exact) / q_exact`.
pub fn relative_error(u: f64, params: &GammaParams, model: &CorrectionModel) -> Result<Flagged<f64>> {
    let approx = gamma_quantile_approx(u, params, model)?;
    let exact = params.quantile_exact(u)?;
    Ok(approx.map(|q| (q - exact) / exact))
}
