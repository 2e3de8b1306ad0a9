// Closed-form Gamma tail quantile against the exact inverse.
//
// `cargo run --example gamma_quantile`

use credit_var::quantile_approx::{gamma_quantile_approx, CorrectionModel, GammaParams};
use credit_var::reports::error_grid;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = CorrectionModel::default();

    let params = GammaParams::new(10.0, 1.0)?;
    let approx = gamma_quantile_approx(0.99, &params, &model)?;
    let exact = params.quantile_exact(0.99)?;
    println!(
        "Gamma(10, 1) at 0.99: closed form {:.6}, exact {:.6}",
        approx.value, exact
    );

    // scale invariance: doubling the rate halves the quantile
    let faster = GammaParams::new(10.0, 2.0)?;
    let half = gamma_quantile_approx(0.99, &faster, &model)?;
    assert!((half.value * 2.0 - approx.value).abs() < 1e-9 * approx.value);

    // outside the calibrated shapes the value comes back with a warning
    let big = GammaParams::new(5000.0, 1.0)?;
    let q = gamma_quantile_approx(0.995, &big, &model)?;
    if let Some(w) = q.warning {
        println!("{w}");
    }

    println!("\n    u   alpha   rel err %");
    for row in error_grid(&model)? {
        println!("{:>6} {:>6} {:>10.4}", row.u, row.alpha, row.rel_err_pct);
        assert!(row.rel_err_pct.abs() < 1.0);
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
