//! Number formatting shared by every CSV and text report.
//!
//! Ten significant digits; fixed notation below 1e6 in magnitude, scientific
//! at or above. Output never depends on the process locale.

/// Format `x` with ten significant digits.
pub fn sig10(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".to_string() } else { "-inf".to_string() };
    }
    if x == 0.0 {
        return "0.000000000".to_string();
    }
    let mag = x.abs();
    if mag >= 1e6 {
        return format!("{x:.9e}");
    }
    let exponent = mag.log10().floor() as i32;
    let decimals = (9 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Percent with two decimals, as the published tables print it.
pub fn pct2(fraction: f64) -> String {
    format!("{:.2}", 100.0 * fraction)
}
