// VaR of a compound Poisson loss with Gamma severities.
//
// At confidence κ the aggregate quantile is the severity quantile at
// `u = 1 - (1 - κ)/E[N]`.

use credit_var::loss_models::{shifted_confidence, var_aggregate, PoissonFrequency, QuantileMethod};
use credit_var::quantile_approx::{CorrectionModel, GammaParams};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = CorrectionModel::default();
    let freq = PoissonFrequency::new(5.0)?;
    let severity = GammaParams::new(2.0, 0.01)?; // mean loss 200

    for kappa in [0.99, 0.995, 0.999] {
        let u = shifted_confidence(kappa, &freq)?;
        let approx = var_aggregate(kappa, &freq, &severity, &model, QuantileMethod::Approximation)?;
        let exact = var_aggregate(kappa, &freq, &severity, &model, QuantileMethod::Exact)?;
        println!(
            "kappa {kappa}: u = {u:.6}, VaR {:.2} (exact {:.2}){}",
            approx.value,
            exact.value,
            if approx.is_flagged() { "  [extrapolated]" } else { "" }
        );
    }

    // too few expected events push u below zero
    let sparse = PoissonFrequency::new(0.005)?;
    assert!(shifted_confidence(0.99, &sparse).is_err());
    Ok(())
}

fn main() {
    run_example().unwrap();
}
