//! Monte Carlo ground truth for the single-loss and compound loss models.
//!
//! Every path owns its RNG stream: ChaCha8 keyed by the seed, with the path
//! index as stream number. Samples therefore do not depend on how paths are
//! spread over threads, and serial and parallel runs agree bit for bit.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss_models::SeveritySpec;

/// Two-sided 95% normal quantile for the order-statistic interval.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimulationMode {
    /// `N` obligors, each defaulting with probability `default_prob`
    /// (1 means every obligor defaults).
    SingleLoss { n_obligors: u32, default_prob: f64 },
    /// Poisson number of losses with the given mean.
    Compound { mean_events: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub mode: SimulationMode,
    pub severity: SeveritySpec,
    pub n_paths: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Invalid("need at least one path".into()));
        }
        self.severity.validate()?;
        match self.mode {
            SimulationMode::SingleLoss {
                n_obligors,
                default_prob,
            } => {
                if n_obligors == 0 {
                    return Err(Error::Invalid("portfolio needs at least one obligor".into()));
                }
                if !(default_prob > 0.0 && default_prob <= 1.0) {
                    return Err(Error::Invalid(format!(
                        "default probability must lie in (0, 1], got {default_prob}"
                    )));
                }
            }
            SimulationMode::Compound { mean_events } => {
                if !(mean_events > 0.0 && mean_events.is_finite()) {
                    return Err(Error::Invalid(format!(
                        "Poisson mean must be positive, got {mean_events}"
                    )));
                }
            }
        }
        Ok(())
    }
}

enum Sampler {
    Exponential(Exp<f64>),
    /// `1 - e^{-λL}` kept alongside the rate for inverse-CDF draws.
    Truncated {
        lambda: f64,
        mass: f64,
    },
    Gamma(Gamma<f64>),
}

impl Sampler {
    fn new(severity: &SeveritySpec) -> Result<Self> {
        let bad = |e: rand_distr::ExpError| Error::Invalid(e.to_string());
        Ok(match *severity {
            SeveritySpec::Exponential { lambda } => Sampler::Exponential(Exp::new(lambda).map_err(bad)?),
            SeveritySpec::TruncatedExponential { lambda, gross_exposure } => Sampler::Truncated {
                lambda,
                mass: -(-lambda * gross_exposure).exp_m1(),
            },
            SeveritySpec::Gamma(p) => {
                Sampler::Gamma(Gamma::new(p.alpha(), 1.0 / p.beta()).map_err(|e| Error::Invalid(e.to_string()))?)
            }
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Exponential(d) => d.sample(rng),
            Sampler::Truncated { lambda, mass } => {
                let u: f64 = rng.random();
                -(-u * mass).ln_1p() / lambda
            }
            Sampler::Gamma(d) => d.sample(rng),
        }
    }
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn path_loss(mode: &SimulationMode, sampler: &Sampler, poisson: Option<&Poisson<f64>>, rng: &mut ChaCha8Rng) -> f64 {
    match *mode {
        SimulationMode::SingleLoss {
            n_obligors,
            default_prob,
        } => {
            let mut total = 0.0;
            for _ in 0..n_obligors {
                let defaults = default_prob >= 1.0 || rng.random::<f64>() < default_prob;
                let s = sampler.draw(rng);
                if defaults {
                    total += s;
                }
            }
            total
        }
        SimulationMode::Compound { .. } => {
            let n = poisson.expect("built for compound mode").sample(rng) as u64;
            (0..n).map(|_| sampler.draw(rng)).sum()
        }
    }
}

fn poisson_for(mode: &SimulationMode) -> Result<Option<Poisson<f64>>> {
    match *mode {
        SimulationMode::Compound { mean_events } => Poisson::new(mean_events)
            .map(Some)
            .map_err(|e| Error::Invalid(e.to_string())),
        SimulationMode::SingleLoss { .. } => Ok(None),
    }
}

/// Loss of path number `path`; the same `(spec.seed, path)` always gives the
/// same value.
pub fn simulate_path(spec: &SimulationSpec, path: u64) -> Result<f64> {
    spec.validate()?;
    let sampler = Sampler::new(&spec.severity)?;
    let poisson = poisson_for(&spec.mode)?;
    Ok(path_loss(
        &spec.mode,
        &sampler,
        poisson.as_ref(),
        &mut path_rng(spec.seed, path),
    ))
}

/// All path losses, in path order, on the global rayon pool.
pub fn simulate_losses(spec: &SimulationSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let sampler = Sampler::new(&spec.severity)?;
    let poisson = poisson_for(&spec.mode)?;
    Ok((0..spec.n_paths as u64)
        .into_par_iter()
        .map(|i| path_loss(&spec.mode, &sampler, poisson.as_ref(), &mut path_rng(spec.seed, i)))
        .collect())
}

/// [`simulate_losses`] on a dedicated pool of `threads` workers (0 = rayon's
/// default). The result does not depend on `threads`.
pub fn simulate_losses_with_threads(spec: &SimulationSpec, threads: usize) -> Result<Vec<f64>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| simulate_losses(spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_paths: usize,
    pub seed: Option<u64>,
}

impl QuantileEstimate {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Nearest-rank `κ`-quantile (the `⌈nκ⌉`-th smallest sample) with a 95%
/// distribution-free interval from the normal approximation to the binomial
/// count of samples below the true quantile.
///
/// Needs at least one expected sample above the quantile, `n(1-κ) ≥ 1`.
pub fn empirical_quantile(samples: &[f64], kappa: f64) -> Result<QuantileEstimate> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Invalid(format!(
            "confidence level must lie in (0, 1), got {kappa}"
        )));
    }
    let n = samples.len();
    let nf = n as f64;
    if nf * (1.0 - kappa) < 1.0 - 1e-9 {
        return Err(Error::Insufficient(format!(
            "{n} samples leave no tail above the {kappa} quantile; need at least {}",
            (1.0 / (1.0 - kappa)).ceil()
        )));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Invalid("samples contain NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);

    let centre = nf * kappa;
    // tolerate nκ landing a rounding error above an integer
    let rank = |r: f64| (r.max(1.0) as usize).min(n);
    let point_rank = rank((centre - 1e-9 * nf.max(1.0)).ceil());
    let half = Z_95 * (centre * (1.0 - kappa)).sqrt();
    let low_rank = rank((centre - half).floor()).min(point_rank);
    let high_rank = rank((centre + half).ceil() + 1.0).max(point_rank);
    Ok(QuantileEstimate {
        point: sorted[point_rank - 1],
        ci_low: sorted[low_rank - 1],
        ci_high: sorted[high_rank - 1],
        n_paths: n,
        seed: None,
    })
}

/// One loss per line, shortest round-trip decimal form.
pub fn write_samples(samples: &[f64], mut out: impl Write) -> Result<()> {
    for s in samples {
        writeln!(out, "{s}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile_approx::GammaParams;

    fn single(n: u32, severity: SeveritySpec, n_paths: usize, seed: u64) -> SimulationSpec {
        SimulationSpec {
            mode: SimulationMode::SingleLoss {
                n_obligors: n,
                default_prob: 1.0,
            },
            severity,
            n_paths,
            seed,
        }
    }

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn nearest_rank_on_integers() {
        let xs: Vec<f64> = (1..=1000).rev().map(f64::from).collect();
        let q = empirical_quantile(&xs, 0.995).unwrap();
        assert_eq!(q.point, 995.0);
        assert!(q.ci_low <= q.point && q.point <= q.ci_high);
        assert!(q.ci_low >= 990.0 && q.ci_high <= 1000.0, "{q:?}");
        assert_eq!(empirical_quantile(&xs, 0.5).unwrap().point, 500.0);
    }

    #[test]
    fn quantile_preconditions() {
        let xs = vec![1.0; 100];
        assert!(matches!(empirical_quantile(&xs, 0.995), Err(Error::Insufficient(_))));
        assert!(empirical_quantile(&xs, 0.99).is_ok());
        assert!(empirical_quantile(&xs, 1.0).is_err());
        assert!(empirical_quantile(&[f64::NAN; 200], 0.5).is_err());
    }

    #[test]
    fn exponential_mean_and_quantile() {
        let spec = single(1, SeveritySpec::Exponential { lambda: 1.0 }, 200_000, 7);
        let xs = simulate_losses(&spec).unwrap();
        let (m, se) = mean_and_se(&xs);
        assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
        let q = empirical_quantile(&xs, 0.99).unwrap();
        assert!(q.contains(100f64.ln()), "{q:?}");
    }

    #[test]
    fn truncated_draws_respect_support() {
        let spec = single(
            3,
            SeveritySpec::TruncatedExponential {
                lambda: 1.0,
                gross_exposure: 0.5,
            },
            20_000,
            3,
        );
        let xs = simulate_losses(&spec).unwrap();
        assert!(xs.iter().all(|&x| (0.0..=1.5).contains(&x)));
        let one = single(
            1,
            SeveritySpec::TruncatedExponential {
                lambda: 2.0,
                gross_exposure: 0.1,
            },
            20_000,
            4,
        );
        assert!(simulate_losses(&one).unwrap().iter().all(|&x| x < 0.1));
    }

    #[test]
    fn compound_mean_matches_wald_identity() {
        let g = GammaParams::new(1.0, 1.0 / 500.0).unwrap();
        let spec = SimulationSpec {
            mode: SimulationMode::Compound { mean_events: 500.0 },
            severity: SeveritySpec::Gamma(g),
            n_paths: 20_000,
            seed: 11,
        };
        let xs = simulate_losses(&spec).unwrap();
        let (m, se) = mean_and_se(&xs);
        assert!((m - 250_000.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn partial_defaults_scale_the_mean() {
        let spec = SimulationSpec {
            mode: SimulationMode::SingleLoss {
                n_obligors: 10,
                default_prob: 0.3,
            },
            severity: SeveritySpec::Exponential { lambda: 0.5 },
            n_paths: 50_000,
            seed: 5,
        };
        let xs = simulate_losses(&spec).unwrap();
        let (m, se) = mean_and_se(&xs);
        assert!((m - 6.0).abs() < 3.0 * se, "{m} ± {se}");
        assert!(xs.contains(&0.0));
    }

    #[test]
    fn seeded_runs_are_reproducible_across_thread_counts() {
        let spec = single(50, SeveritySpec::Exponential { lambda: 0.01 }, 5_000, 42);
        let a = simulate_losses_with_threads(&spec, 1).unwrap();
        let b = simulate_losses_with_threads(&spec, 4).unwrap();
        let c = simulate_losses(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(simulate_path(&spec, 123).unwrap(), a[123]);
        let other = simulate_losses(&SimulationSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = single(1, SeveritySpec::Exponential { lambda: 1.0 }, 10, 0);
        spec.n_paths = 0;
        assert!(simulate_losses(&spec).is_err());
        spec.n_paths = 10;
        spec.mode = SimulationMode::SingleLoss {
            n_obligors: 1,
            default_prob: 0.0,
        };
        assert!(simulate_losses(&spec).is_err());
        spec.mode = SimulationMode::Compound { mean_events: -1.0 };
        assert!(simulate_losses(&spec).is_err());
    }

    #[test]
    fn sample_dump_is_one_per_line() {
        let mut buf = Vec::new();
        write_samples(&[1.5, 0.1, 3e7], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
        assert_eq!(parsed, [1.5, 0.1, 3e7]);
    }
}
