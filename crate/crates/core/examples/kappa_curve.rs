// Effective confidence level of the truncated model as a function of the
// exposure multiple C and the portfolio size N.

use credit_var::comparison::{kappa_prime_curve, write_kappa_curve_csv};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cs: Vec<f64> = (18..=40).map(|k| k as f64 * 0.5).collect();
    let points = kappa_prime_curve(&cs, &[100, 500, 1000], 0.995)?;
    // κ' climbs back to κ as the exposure cap loosens
    for curve in points.chunks(cs.len()) {
        assert!(curve.windows(2).all(|w| w[1].kappa_prime >= w[0].kappa_prime));
    }
    write_kappa_curve_csv(&points, std::io::stdout().lock())?;
    Ok(())
}

fn main() {
    run_example().unwrap();
}
