// Single-loss vs aggregate-loss quantiles, the N = μ = 500 reference table
// and a sweep over portfolio size.

use credit_var::comparison::{compare_exponential, write_comparison_csv, MeanEvents, SeverityShape, SweepSpec};
use credit_var::quantile_approx::CorrectionModel;
use credit_var::reports::reference_comparison;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = CorrectionModel::default();

    println!("case          d_abs      (published)  d_rel %  (published)");
    for row in reference_comparison(&model, SeverityShape::UnitRate, MeanEvents::N)? {
        println!(
            "{:<12} {:>10.2} {:>12.2} {:>8.2} {:>10.2}",
            row.case, row.diff_abs, row.published_diff_abs, row.diff_rel_pct, row.published_diff_rel_pct
        );
    }

    let spec = SweepSpec {
        n_values: vec![100, 250, 500, 1000, 2000],
        mu_values: vec![200.0, 500.0],
        l_values: None,
        kappa: 0.995,
        alpha_unit: SeverityShape::UnitRate,
        mean_events: MeanEvents::N,
    };
    let rows = compare_exponential(&spec, &model)?;
    for curve in rows.chunks(spec.n_values.len()) {
        assert!(curve.windows(2).all(|w| w[1].diff_rel < w[0].diff_rel));
    }
    println!();
    write_comparison_csv(&rows, std::io::stdout().lock())?;
    Ok(())
}

fn main() {
    run_example().unwrap();
}
