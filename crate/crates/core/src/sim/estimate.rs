use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::event_driven::{extinction_time_rng, Engine};
use super::reference::reference_extinction_time_rng;
use super::{replica_rng, ExtinctionTime};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::GenesisModel;
use crate::stats::{linear_fit, quantile_sorted};

/// Monte Carlo estimate of the mean fraction of infected nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceSeries {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub replicas: usize,
    pub node_count: usize,
    /// Infected counts per replica, one row per replica.
    #[serde(skip)]
    pub counts: Vec<Vec<u32>>,
}

impl PrevalenceSeries {
    fn from_counts(grid: Vec<f64>, node_count: usize, counts: Vec<Vec<u32>>) -> Self {
        let replicas = counts.len();
        let n = node_count as f64;
        let r = replicas as f64;
        let mut mean = Vec::with_capacity(grid.len());
        let mut se = Vec::with_capacity(grid.len());
        // integer sums keep constant columns exact
        for g in 0..grid.len() {
            let s: u128 = counts.iter().map(|row| row[g] as u128).sum();
            let s2: u128 = counts.iter().map(|row| (row[g] as u128).pow(2)).sum();
            let spread = replicas as u128 * s2 - s * s;
            mean.push(s as f64 / (n * r));
            se.push((spread as f64 / (r * r * (r - 1.0) * n * n)).sqrt());
        }
        PrevalenceSeries {
            grid,
            mean,
            se,
            replicas,
            node_count,
            counts,
        }
    }

    /// CSV with header `t,mean,se,replicas`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean,se,replicas\n");
        for g in 0..self.grid.len() {
            writeln!(out, "{},{},{},{}", self.grid[g], self.mean[g], self.se[g], self.replicas)
                .expect("writing to a String");
        }
        out
    }
}

fn run_replica(model: &GenesisModel, grid: &[f64], rng: ChaCha8Rng, tol: &Tolerances) -> Result<Vec<u32>> {
    let horizon = *grid.last().expect("nonempty grid");
    let mut engine = Engine::new(model, rng, tol);
    let mut counts = Vec::with_capacity(grid.len());
    loop {
        let before = engine.infected_count() as u32;
        match engine.step(Some(horizon))? {
            Some(e) => {
                while counts.len() < grid.len() && grid[counts.len()] < e.time {
                    counts.push(before);
                }
            }
            None => {
                counts.resize(grid.len(), engine.infected_count() as u32);
                return Ok(counts);
            }
        }
    }
}

/// Mean prevalence and its standard error on `grid` (nondecreasing,
/// starting at or after zero) over `replicas` independent runs. Replica
/// `k` uses stream `k` of `seed`; the result does not depend on thread
/// scheduling.
pub fn estimate_prevalence(
    model: &GenesisModel,
    grid: &[f64],
    replicas: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<PrevalenceSeries> {
    if replicas < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 replicas, got {replicas}")));
    }
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter(
            "time grid must be nonempty, finite, nonnegative and nondecreasing".into(),
        ));
    }
    let horizon = *grid.last().expect("nonempty grid");
    let counts: Vec<Vec<u32>> = if horizon == 0.0 {
        vec![vec![model.initial_infected().len() as u32; grid.len()]; replicas]
    } else {
        (0..replicas)
            .into_par_iter()
            .map(|k| run_replica(model, grid, replica_rng(seed, k as u64), tol))
            .collect::<Result<_>>()?
    };
    Ok(PrevalenceSeries::from_counts(grid.to_vec(), model.network().node_count(), counts))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    /// Mean prevalence band whose grid points enter the fit.
    pub band: (f64, f64),
    pub min_points: usize,
    pub bootstrap: usize,
    /// Confidence level of the bootstrap interval.
    pub level: f64,
    pub seed: u64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions {
            band: (1e-3, 0.5),
            min_points: 5,
            bootstrap: 400,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    /// Least-squares slope of log mean prevalence against time.
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Grid indices used by the fit.
    pub points: Vec<usize>,
}

impl DecayEstimate {
    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

fn log_slope(grid: &[f64], means: &[f64], points: &[usize]) -> Option<(f64, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|&&g| means[g] > 0.0)
        .map(|&g| (grid[g], means[g].ln()))
        .unzip();
    (xs.len() >= 2).then(|| linear_fit(&xs, &ys))
}

/// Slope of `ln(mean prevalence)` over the grid points inside the band,
/// with a percentile bootstrap interval from resampling replicas.
pub fn estimate_decay_rate(series: &PrevalenceSeries, opts: &DecayOptions) -> Result<DecayEstimate> {
    let (lo, hi) = opts.band;
    let points: Vec<usize> = (0..series.grid.len())
        .filter(|&g| series.mean[g] >= lo && series.mean[g] <= hi)
        .collect();
    if points.len() < opts.min_points {
        return Err(Error::InsufficientData {
            found: points.len(),
            needed: opts.min_points,
        });
    }
    let (slope, intercept) = log_slope(&series.grid, &series.mean, &points).expect("enough positive points");
    let r = series.counts.len();
    let (ci_low, ci_high) = if r < 2 || opts.bootstrap == 0 {
        (slope, slope)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let n = series.node_count as f64;
        let mut slopes = Vec::with_capacity(opts.bootstrap);
        let mut sums = vec![0u64; series.grid.len()];
        for _ in 0..opts.bootstrap {
            sums.iter_mut().for_each(|s| *s = 0);
            for _ in 0..r {
                let row = &series.counts[rng.random_range(0..r)];
                for &g in &points {
                    sums[g] += row[g] as u64;
                }
            }
            let means: Vec<f64> = sums.iter().map(|&s| s as f64 / (n * r as f64)).collect();
            if let Some((s, _)) = log_slope(&series.grid, &means, &points) {
                slopes.push(s);
            }
        }
        slopes.sort_by(f64::total_cmp);
        let tail = (1.0 - opts.level) / 2.0;
        (quantile_sorted(&slopes, tail), quantile_sorted(&slopes, 1.0 - tail))
    };
    Ok(DecayEstimate {
        slope,
        intercept,
        ci_low,
        ci_high,
        points,
    })
}

/// `replicas` extinction times from the event-driven simulator, or from
/// the reference simulator when `reference` is set.
pub fn extinction_times(
    model: &GenesisModel,
    replicas: usize,
    seed: u64,
    reference: bool,
    tol: &Tolerances,
) -> Result<Vec<ExtinctionTime>> {
    (0..replicas)
        .into_par_iter()
        .map(|k| {
            let rng = replica_rng(seed, k as u64);
            if reference {
                reference_extinction_time_rng(model, rng, tol)
            } else {
                extinction_time_rng(model, rng, tol)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Network, NetworkKind};
    use crate::phase_type::PhaseType;

    fn exp_path(beta: f64, delta: f64, init: &[usize]) -> GenesisModel {
        GenesisModel::new(
            Network::generate(&NetworkKind::Path { n: 2 }).unwrap(),
            PhaseType::exponential(beta).unwrap(),
            PhaseType::exponential(delta).unwrap(),
            init.iter().copied(),
        )
        .unwrap()
    }

    #[test]
    fn initial_prevalence_is_exact() {
        let m = exp_path(0.1, 2.0, &[0]);
        let s = estimate_prevalence(&m, &[0.0, 1.0], 200, 1, &Tolerances::default()).unwrap();
        assert_eq!(s.mean[0], 0.5);
        assert_eq!(s.se[0], 0.0);
        assert!(s.mean.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(s.to_csv().starts_with("t,mean,se,replicas\n0,0.5,0,200\n"));
    }

    #[test]
    fn replica_count_and_grid_are_checked() {
        let m = exp_path(0.1, 2.0, &[0]);
        let tol = Tolerances::default();
        assert!(estimate_prevalence(&m, &[0.0, 1.0], 1, 1, &tol).is_err());
        assert!(estimate_prevalence(&m, &[1.0, 0.5], 10, 1, &tol).is_err());
    }

    #[test]
    fn prevalence_dies_below_threshold() {
        let m = exp_path(0.1, 2.0, &[0]);
        let s = estimate_prevalence(&m, &[0.0, 10.0], 2000, 3, &Tolerances::default()).unwrap();
        assert!(s.mean[1] <= 3.0 * s.se[1] + 1e-12);
    }

    #[test]
    fn pure_death_slope() {
        let delta = 1.3;
        let m = exp_path(1e-6, delta, &[0, 1]);
        let grid: Vec<f64> = (0..=30).map(|k| k as f64 * 0.1).collect();
        let s = estimate_prevalence(&m, &grid, 4000, 8, &Tolerances::default()).unwrap();
        let est = estimate_decay_rate(&s, &DecayOptions::default()).unwrap();
        assert!(est.ci_low <= est.slope && est.slope <= est.ci_high);
        assert!(est.ci_low <= -delta && -delta <= est.ci_high, "{est:?}");
    }

    #[test]
    fn band_without_points_is_an_error() {
        let m = exp_path(0.1, 2.0, &[0]);
        let s = estimate_prevalence(&m, &[0.0, 50.0, 60.0], 50, 3, &Tolerances::default()).unwrap();
        let opts = DecayOptions {
            band: (0.6, 0.9),
            ..DecayOptions::default()
        };
        assert!(matches!(
            estimate_decay_rate(&s, &opts),
            Err(Error::InsufficientData { found: 0, needed: 5 })
        ));
    }

    #[test]
    fn prevalence_is_reproducible() {
        let m = exp_path(1.0, 1.0, &[0]);
        let grid = [0.0, 0.5, 1.0, 2.0];
        let tol = Tolerances::default();
        let a = estimate_prevalence(&m, &grid, 300, 42, &tol).unwrap();
        let b = estimate_prevalence(&m, &grid, 300, 42, &tol).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        // the first replicas do not depend on the replica count
        let c = estimate_prevalence(&m, &grid, 500, 42, &tol).unwrap();
        assert_eq!(a.counts[..], c.counts[..300]);
    }
}
