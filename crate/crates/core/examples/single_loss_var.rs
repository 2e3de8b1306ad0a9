// Single-loss VaR: N obligors that all default with exponential or
// truncated exponential exposures.

use credit_var::loss_models::{
    erlang_quantile, kappa_prime, solve_lambda_from_mean, trunc_exp_mean, trunc_quantile, ConvolutionLoss,
};
use credit_var::quantile_approx::CorrectionModel;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = CorrectionModel::default();
    let kappa = 0.995;

    // heterogeneous rates collapse to the smallest one (heaviest tail)
    let conv = ConvolutionLoss::from_rates(&[0.004, 0.002, 0.003, 0.0025], None)?;
    println!("lambda' = {}", conv.lambda_prime());

    let erlang = ConvolutionLoss::exponential(500, 1.0 / 500.0)?;
    let q = erlang_quantile(kappa, &erlang, &model)?;
    let exact = erlang.erlang_params().quantile_exact(kappa)?;
    println!("exponential: VaR {:.2} (exact {:.2})", q.value, exact);

    for l in [6000.0, 8000.0, 20000.0] {
        // pick the rate so the truncated mean stays 500
        let lambda = solve_lambda_from_mean(500.0, l)?;
        assert!((trunc_exp_mean(lambda, l)? - 500.0).abs() < 1e-9);
        let conv = ConvolutionLoss::truncated(500, lambda, l)?;
        let level = kappa_prime(kappa, &conv)?;
        let q = trunc_quantile(kappa, &conv, &model)?;
        println!(
            "L = {l}: C = {:.3}, kappa' = {level:.5}, VaR {:.2}",
            conv.exposure_multiple().unwrap_or(f64::NAN),
            q.value
        );
    }

    // exposure below nine mean losses is rejected
    let tight = ConvolutionLoss::truncated(500, 1.0 / 500.0, 4000.0)?;
    match trunc_quantile(kappa, &tight, &model) {
        Err(e) => println!("L = 4000: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
