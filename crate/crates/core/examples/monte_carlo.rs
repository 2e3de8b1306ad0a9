// Seeded Monte Carlo check of the closed-form single-loss and aggregate
// quantiles.

use credit_var::loss_models::{
    erlang_quantile, var_aggregate, ConvolutionLoss, PoissonFrequency, QuantileMethod, SeveritySpec,
};
use credit_var::mc_oracle::{
    empirical_quantile, simulate_losses, simulate_losses_with_threads, SimulationMode, SimulationSpec,
};
use credit_var::quantile_approx::{CorrectionModel, GammaParams};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = CorrectionModel::default();
    let kappa = 0.99;

    let spec = SimulationSpec {
        mode: SimulationMode::SingleLoss {
            n_obligors: 50,
            default_prob: 1.0,
        },
        severity: SeveritySpec::Exponential { lambda: 0.01 },
        n_paths: 40_000,
        seed: 2024,
    };
    let samples = simulate_losses(&spec)?;
    // any worker count reproduces the same paths
    assert_eq!(samples, simulate_losses_with_threads(&spec, 2)?);
    let est = empirical_quantile(&samples, kappa)?;
    let conv = ConvolutionLoss::exponential(50, 0.01)?;
    let closed = erlang_quantile(kappa, &conv, &model)?.value;
    let exact = conv.erlang_params().quantile_exact(kappa)?;
    println!(
        "Erlang: simulated {:.1} [{:.1}, {:.1}], closed form {:.1}, exact {:.1}",
        est.point, est.ci_low, est.ci_high, closed, exact
    );

    let severity = GammaParams::new(1.0, 0.05)?;
    let compound = SimulationSpec {
        mode: SimulationMode::Compound { mean_events: 10.0 },
        severity: SeveritySpec::Gamma(severity),
        n_paths: 40_000,
        seed: 2024,
    };
    // Gamma tails are light, so the single-large-loss shortcut falls well
    // short of the simulated aggregate quantile at moderate event counts
    let est = empirical_quantile(&simulate_losses(&compound)?, kappa)?;
    let freq = PoissonFrequency::new(10.0)?;
    let closed = var_aggregate(kappa, &freq, &severity, &model, QuantileMethod::Approximation)?.value;
    println!(
        "compound: simulated {:.1} [{:.1}, {:.1}], single-large-loss closed form {:.1}",
        est.point, est.ci_low, est.ci_high, closed
    );
    Ok(())
}

fn main() {
    run_example().unwrap();
}
