// Re-derive the correction model on a coarse grid, save it, and check it
// against the exact quantile.

use credit_var::calibration::{calibrate, linspace, CalibrationGrid};
use credit_var::quantile_approx::{relative_error, CorrectionModel, GammaParams};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let grid = CalibrationGrid {
        alphas: (1..=50).map(|a| (2 * a) as f64).collect(),
        us: linspace(0.9, 0.999, 25),
        ..CalibrationGrid::default()
    };
    let result = calibrate(&grid)?;
    println!(
        "a(0.95) = {:.5}, b(0.95) = {:.4}, min R^2 = {:.5}, boundary hits = {}",
        result.model.a(0.95),
        result.model.b(0.95),
        result.min_r_squared(),
        result.boundary_hits()
    );

    let path = std::env::temp_dir().join(format!("credit_var_model_{}.json", std::process::id()));
    result.model.save(&path)?;
    let model = CorrectionModel::load(&path)?;
    std::fs::remove_file(&path)?;
    assert_eq!(model, result.model);

    for (u, alpha) in [(0.95, 5.0), (0.99, 50.0), (0.999, 10.0)] {
        let err = relative_error(u, &GammaParams::new(alpha, 1.0)?, &model)?;
        println!("u = {u}, alpha = {alpha}: {:+.4}%", 100.0 * err.value);
        assert!(err.value.abs() < 0.01);
    }
    Ok(())
}

fn main() {
    run_example().unwrap();
}
