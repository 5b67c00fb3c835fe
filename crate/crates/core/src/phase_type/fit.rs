//! Phase-type fitting: moment-matched hyper-Erlang initialization followed
//! by maximum-likelihood EM refinement over every branch-shape allocation
//! with at most `p` phases.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, LogNormal};

use super::{lognormal_params, PhaseType};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum FitTarget {
    /// Density values on an increasing grid starting at or above zero.
    Density { grid: Vec<f64>, values: Vec<f64> },
    /// Positive observations.
    Samples(Vec<f64>),
    /// Log-normal law given by its mean and variance.
    LogNormal { mean: f64, variance: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Number of draws from an analytic or gridded target.
    pub samples: usize,
    pub max_iter: usize,
    /// Stop once the log-likelihood gain per sample drops below this.
    pub tol: f64,
    /// Points of the diagnostic grid on `[0, grid_span × mean]`.
    pub grid_points: usize,
    pub grid_span: f64,
    /// Subsample size and EM iterations used to rank shape allocations.
    pub screen_samples: usize,
    pub screen_iter: usize,
    /// Number of best-ranked allocations refined on the full sample.
    pub refine: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            samples: 100_000,
            max_iter: 500,
            tol: 1e-7,
            grid_points: 2000,
            grid_span: 10.0,
            screen_samples: 10_000,
            screen_iter: 40,
            refine: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub shapes: Vec<usize>,
    /// Mean log-likelihood per sample of the selected fit.
    pub log_likelihood: f64,
    pub iterations: usize,
    /// How many moments the initialization of the selected fit matched.
    pub moments_matched: usize,
    pub candidates: usize,
    /// L1 distance between fitted and target densities, when the target
    /// density is known.
    pub l1_error: Option<f64>,
    pub grid_end: f64,
    pub grid_points: usize,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub phase_type: PhaseType,
    pub diagnostics: FitDiagnostics,
}

/// Mixture of Erlang branches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperErlang {
    pub weights: Vec<f64>,
    pub shapes: Vec<usize>,
    pub rates: Vec<f64>,
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

impl HyperErlang {
    /// Raw moment of order `k`.
    pub fn moment(&self, k: u32) -> f64 {
        self.weights
            .iter()
            .zip(&self.shapes)
            .zip(&self.rates)
            .map(|((w, &r), l)| {
                let rising: f64 = (0..k).map(|i| (r + i as usize) as f64).product();
                w * rising / l.powi(k as i32)
            })
            .sum()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self
                .weights
                .iter()
                .zip(&self.shapes)
                .zip(&self.rates)
                .filter(|((_, &r), _)| r == 1)
                .map(|((w, _), l)| w * l)
                .sum();
        }
        let lx = x.ln();
        self.weights
            .iter()
            .zip(&self.shapes)
            .zip(&self.rates)
            .map(|((w, &r), l)| {
                w * ((r as f64 - 1.0) * lx - l * x + r as f64 * l.ln() - ln_factorial(r - 1)).exp()
            })
            .sum()
    }

    pub fn to_phase_type(&self) -> Result<PhaseType> {
        let keep: Vec<usize> = (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect();
        let total: f64 = keep.iter().map(|&i| self.weights[i]).sum();
        let weights: Vec<f64> = keep.iter().map(|&i| self.weights[i] / total).collect();
        let shapes: Vec<usize> = keep.iter().map(|&i| self.shapes[i]).collect();
        let rates: Vec<f64> = keep.iter().map(|&i| self.rates[i]).collect();
        PhaseType::hyper_erlang(&weights, &shapes, &rates)
    }

    /// One EM pass; returns the mean log-likelihood of the parameters
    /// before the update.
    fn em_step(&mut self, xs: &[f64], lnxs: &[f64]) -> f64 {
        let b = self.shapes.len();
        let consts: Vec<f64> = (0..b)
            .map(|i| {
                let r = self.shapes[i] as f64;
                self.weights[i].max(f64::MIN_POSITIVE).ln() + r * self.rates[i].ln()
                    - ln_factorial(self.shapes[i] - 1)
            })
            .collect();
        let mut mass = vec![0.0; b];
        let mut first = vec![0.0; b];
        let mut logs = vec![0.0; b];
        let mut ll = 0.0;
        for (&x, &lx) in xs.iter().zip(lnxs) {
            let mut top = f64::NEG_INFINITY;
            for i in 0..b {
                logs[i] = consts[i] + (self.shapes[i] as f64 - 1.0) * lx - self.rates[i] * x;
                top = top.max(logs[i]);
            }
            let mut sum = 0.0;
            for l in logs.iter_mut() {
                *l = (*l - top).exp();
                sum += *l;
            }
            ll += top + sum.ln();
            for i in 0..b {
                let w = logs[i] / sum;
                mass[i] += w;
                first[i] += w * x;
            }
        }
        let n = xs.len() as f64;
        for i in 0..b {
            self.weights[i] = mass[i] / n;
            if mass[i] > 0.0 && first[i] > 0.0 {
                self.rates[i] = self.shapes[i] as f64 * mass[i] / first[i];
            }
        }
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
        ll / n
    }

    fn log_likelihood(&self, xs: &[f64], lnxs: &[f64]) -> f64 {
        self.clone().em_step(xs, lnxs)
    }
}

/// Iterates EM until the per-sample gain falls below `tol`. A decrease of
/// the log-likelihood beyond round-off is reported as divergence.
fn run_em(
    model: &mut HyperErlang,
    xs: &[f64],
    lnxs: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<(f64, usize)> {
    let mut previous = f64::NEG_INFINITY;
    for iteration in 0..max_iter {
        let snapshot = model.clone();
        let ll = model.em_step(xs, lnxs);
        if !ll.is_finite() {
            return Err(Error::FitDiverged {
                iteration,
                previous,
                current: ll,
                last: Box::new(snapshot.to_phase_type()?),
            });
        }
        if ll < previous - 1e-10 * previous.abs().max(1.0) {
            return Err(Error::FitDiverged {
                iteration,
                previous,
                current: ll,
                last: Box::new(snapshot.to_phase_type()?),
            });
        }
        if ll - previous < tol {
            // `ll` belongs to `snapshot`; the update is no worse.
            return Ok((model.log_likelihood(xs, lnxs).max(ll), iteration + 1));
        }
        previous = ll;
    }
    Ok((model.log_likelihood(xs, lnxs), max_iter))
}

/// All partitions of every total `1..=p`, parts in descending order.
fn shape_allocations(p: usize) -> Vec<Vec<usize>> {
    fn rec(remaining: usize, max_part: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(current.clone());
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            current.push(part);
            rec(remaining - part, part, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    for total in 1..=p {
        rec(total, total, &mut Vec::new(), &mut out);
    }
    out
}

/// Splits the sorted sample into equal-count blocks, one per branch, with
/// the largest shapes on the smallest values.
fn block_initialization(sorted: &[f64], shapes: &[usize]) -> HyperErlang {
    let b = shapes.len();
    let n = sorted.len();
    let mut rates = Vec::with_capacity(b);
    for i in 0..b {
        let block = &sorted[i * n / b..((i + 1) * n / b).max(i * n / b + 1).min(n)];
        let mean = block.iter().sum::<f64>() / block.len() as f64;
        rates.push(shapes[i] as f64 / mean.max(f64::MIN_POSITIVE));
    }
    HyperErlang {
        weights: vec![1.0 / b as f64; b],
        shapes: shapes.to_vec(),
        rates,
    }
}

/// Adjusts the block initialization to reproduce the first `k ≤ 3`
/// moments through a global rate scale, a rate spread and a weight tilt.
fn moment_match(init: &HyperErlang, target: &[f64; 3], k: usize) -> Option<HyperErlang> {
    let b = init.shapes.len();
    let centre = init.rates.iter().map(|r| r.ln()).sum::<f64>() / b as f64;
    let z: Vec<f64> = init.rates.iter().map(|r| r.ln() - centre).collect();
    let build = |theta: &[f64; 3]| -> HyperErlang {
        let rates = init
            .rates
            .iter()
            .zip(&z)
            .map(|(r, zi)| r * (theta[0] + theta[1] * zi).exp())
            .collect();
        let raw: Vec<f64> = init
            .weights
            .iter()
            .zip(&z)
            .map(|(w, zi)| w * (theta[2] * zi).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        HyperErlang {
            weights: raw.iter().map(|w| w / total).collect(),
            shapes: init.shapes.clone(),
            rates,
        }
    };
    let residual = |theta: &[f64; 3]| -> Option<Vec<f64>> {
        let h = build(theta);
        let r: Vec<f64> = (0..k)
            .map(|i| h.moment(i as u32 + 1).ln() - target[i].ln())
            .collect();
        r.iter().all(|x| x.is_finite()).then_some(r)
    };
    let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut theta = [0.0; 3];
    let mut res = residual(&theta)?;
    for _ in 0..100 {
        if res.iter().all(|x| x.abs() < 1e-10) {
            return Some(build(&theta));
        }
        let mut jac = nalgebra::DMatrix::zeros(k, k);
        for j in 0..k {
            let mut shifted = theta;
            shifted[j] += 1e-7;
            let rs = residual(&shifted)?;
            for i in 0..k {
                jac[(i, j)] = (rs[i] - res[i]) / 1e-7;
            }
        }
        let rhs = nalgebra::DVector::from_iterator(k, res.iter().map(|x| -x));
        let step = jac.lu().solve(&rhs)?;
        let mut scale = 1.0;
        let current = norm(&res);
        loop {
            let mut trial = theta;
            for j in 0..k {
                trial[j] += scale * step[j];
            }
            if let Some(r) = residual(&trial) {
                if norm(&r) < current {
                    theta = trial;
                    res = r;
                    break;
                }
            }
            scale *= 0.5;
            if scale < 1e-8 {
                return None;
            }
        }
    }
    None
}

struct Prepared {
    sorted: Vec<f64>,
    ln: Vec<f64>,
    mean: f64,
}

/// Draws a stratified sample: one uniform per stratum `[k/N, (k+1)/N)`,
/// mapped through the target quantile function.
fn stratified<R: Rng + ?Sized>(n: usize, rng: &mut R, quantile: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let u = (k as f64 + rng.random::<f64>()) / n as f64;
            quantile(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
        })
        .collect()
}

fn validate_density(grid: &[f64], values: &[f64]) -> Result<f64> {
    if grid.len() < 2 || grid.len() != values.len() {
        return Err(Error::InvalidParameter(
            "density target needs matching grid and values of length >= 2".into(),
        ));
    }
    if grid[0] < 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "density grid must be nonnegative and strictly increasing".into(),
        ));
    }
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("density values must be finite and >= 0".into()));
    }
    let mass: f64 = grid
        .windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
        .sum();
    if (mass - 1.0).abs() > 0.05 {
        return Err(Error::InvalidParameter(format!(
            "density integrates to {mass} on its grid, expected about 1"
        )));
    }
    Ok(mass)
}

fn interpolate(grid: &[f64], values: &[f64], t: f64) -> f64 {
    if t < grid[0] || t > grid[grid.len() - 1] {
        return 0.0;
    }
    let idx = grid.partition_point(|&g| g <= t);
    if idx == 0 {
        return values[0];
    }
    if idx >= grid.len() {
        return values[grid.len() - 1];
    }
    let (g0, g1) = (grid[idx - 1], grid[idx]);
    let w = (t - g0) / (g1 - g0);
    values[idx - 1] * (1.0 - w) + values[idx] * w
}

impl FitTarget {
    fn prepare<R: Rng + ?Sized>(&self, opts: &FitOptions, rng: &mut R) -> Result<Prepared> {
        let mut sorted = match self {
            FitTarget::Samples(xs) => {
                if xs.len() < 1000 {
                    return Err(Error::InvalidParameter(format!(
                        "sample target needs at least 1000 observations, got {}",
                        xs.len()
                    )));
                }
                if xs.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidParameter("samples must be positive and finite".into()));
                }
                xs.clone()
            }
            FitTarget::LogNormal { mean, variance } => {
                let (m, s) = lognormal_params(*mean, *variance)?;
                let law = LogNormal::new(m, s)
                    .map_err(|e| Error::InvalidParameter(format!("log-normal: {e}")))?;
                stratified(opts.samples, rng, |u| law.inverse_cdf(u))
            }
            FitTarget::Density { grid, values } => {
                let mass = validate_density(grid, values)?;
                let mut cdf = vec![0.0; grid.len()];
                for k in 1..grid.len() {
                    cdf[k] = cdf[k - 1]
                        + 0.5 * (grid[k] - grid[k - 1]) * (values[k] + values[k - 1]) / mass;
                }
                stratified(opts.samples, rng, |u| {
                    let idx = cdf.partition_point(|&c| c < u).clamp(1, grid.len() - 1);
                    let (c0, c1) = (cdf[idx - 1], cdf[idx]);
                    let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                    grid[idx - 1] + w * (grid[idx] - grid[idx - 1])
                })
            }
        };
        sorted.retain(|x| *x > 0.0);
        sorted.sort_by(|a, b| a.total_cmp(b));
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        let ln = sorted.iter().map(|x| x.ln()).collect();
        Ok(Prepared { sorted, ln, mean })
    }

    /// Mean of the target law, when it is known analytically or on a grid.
    fn exact_mean(&self) -> Option<f64> {
        match self {
            FitTarget::Samples(_) => None,
            FitTarget::LogNormal { mean, .. } => Some(*mean),
            FitTarget::Density { grid, values } => {
                let num: f64 = grid
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(g, v)| 0.5 * (g[1] - g[0]) * (g[0] * v[0] + g[1] * v[1]))
                    .sum();
                let den: f64 = grid
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
                    .sum();
                Some(num / den)
            }
        }
    }

    /// Density evaluator, when the target has one.
    fn density(&self) -> Option<Box<dyn Fn(f64) -> f64 + '_>> {
        match self {
            FitTarget::Samples(_) => None,
            FitTarget::LogNormal { mean, variance } => {
                let (m, s) = lognormal_params(*mean, *variance).ok()?;
                let law = LogNormal::new(m, s).ok()?;
                Some(Box::new(move |t| if t > 0.0 { law.pdf(t) } else { 0.0 }))
            }
            FitTarget::Density { grid, values } => {
                Some(Box::new(move |t| interpolate(grid, values, t)))
            }
        }
    }
}

/// Trapezoid L1 distance between a fitted law and a density on the
/// uniform grid `[0, end]` with `points` nodes.
pub(crate) fn l1_distance(
    fitted: &PhaseType,
    target: &dyn Fn(f64) -> f64,
    end: f64,
    points: usize,
) -> Result<f64> {
    let h = end / (points - 1) as f64;
    let fit = fitted.pdf_grid(h, points)?;
    let diffs: Vec<f64> = fit
        .iter()
        .enumerate()
        .map(|(k, f)| (f - target(k as f64 * h)).abs())
        .collect();
    Ok(diffs.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum())
}

/// Fits a phase-type law of order at most `order` to `target`.
pub fn ph_fit<R: Rng + ?Sized>(
    target: &FitTarget,
    order: usize,
    opts: &FitOptions,
    rng: &mut R,
) -> Result<FitResult> {
    if order == 0 {
        return Err(Error::InvalidParameter("fit order must be >= 1".into()));
    }
    if opts.grid_points < 2 || opts.samples == 0 {
        return Err(Error::InvalidParameter("fit options need samples and >= 2 grid points".into()));
    }
    let data = target.prepare(opts, rng)?;
    let target_moments = [
        data.mean,
        data.sorted.iter().map(|x| x * x).sum::<f64>() / data.sorted.len() as f64,
        data.sorted.iter().map(|x| x * x * x).sum::<f64>() / data.sorted.len() as f64,
    ];

    // Evenly spaced order statistics keep the screening subsample stratified.
    let stride = (data.sorted.len() / opts.screen_samples.max(1)).max(1);
    let screen_x: Vec<f64> = data.sorted.iter().step_by(stride).copied().collect();
    let screen_ln: Vec<f64> = data.ln.iter().step_by(stride).copied().collect();

    let allocations = shape_allocations(order);
    let candidates = allocations.len();
    let initial: Vec<(HyperErlang, usize)> = allocations
        .iter()
        .map(|shapes| {
            let block = block_initialization(&data.sorted, shapes);
            let max_k = if shapes.len() == 1 { 1 } else { 3 };
            (1..=max_k)
                .rev()
                .find_map(|k| moment_match(&block, &target_moments, k).map(|h| (h, k)))
                .unwrap_or((block, 0))
        })
        .collect();

    let mut screened: Vec<(f64, HyperErlang, usize)> = initial
        .into_par_iter()
        .map(|(mut h, k)| {
            let ll = run_em(&mut h, &screen_x, &screen_ln, opts.screen_iter, opts.tol)
                .map(|(ll, _)| ll)
                .unwrap_or(f64::NEG_INFINITY);
            (ll, h, k)
        })
        .collect();
    screened.sort_by(|a, b| b.0.total_cmp(&a.0));
    screened.truncate(opts.refine.max(1));

    let refined: Vec<Result<(f64, usize, HyperErlang, usize)>> = screened
        .into_par_iter()
        .map(|(_, mut h, k)| {
            let (ll, iters) = run_em(&mut h, &data.sorted, &data.ln, opts.max_iter, opts.tol)?;
            Ok((ll, iters, h, k))
        })
        .collect();
    let mut best: Option<(f64, usize, HyperErlang, usize)> = None;
    let mut first_err = None;
    for r in refined {
        match r {
            Ok(cand) => {
                if best.as_ref().is_none_or(|b| cand.0 > b.0) {
                    best = Some(cand);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let (ll, iterations, model, moments_matched) = match (best, first_err) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least one allocation is refined"),
    };

    let phase_type = model.to_phase_type()?.with_meta(
        "fit",
        serde_json::json!({ "family": "hyper-erlang", "shapes": model.shapes }),
    );
    let mean = target.exact_mean().unwrap_or(data.mean);
    let grid_end = opts.grid_span * mean;
    let l1_error = match target.density() {
        Some(f) => Some(l1_distance(&phase_type, f.as_ref(), grid_end, opts.grid_points)?),
        None => None,
    };
    Ok(FitResult {
        phase_type,
        diagnostics: FitDiagnostics {
            shapes: model.shapes,
            log_likelihood: ll,
            iterations,
            moments_matched,
            candidates,
            l1_error,
            grid_end,
            grid_points: opts.grid_points,
        },
    })
}
