//! Phase-type distributions `(φ, T)`: the law of the absorption time of a
//! finite continuous-time Markov chain with transient block `T` started
//! from `φ`. Exit rates are `b = -T 1`.

mod fit;

use std::collections::BTreeMap;

use nalgebra::LU;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::matrix::{expm_action_with, is_metzler, Matrix, Vector};

pub use fit::{ph_fit, FitDiagnostics, FitOptions, FitResult, FitTarget, HyperErlang};

/// Standard families used as constructors and fitting building blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseTypeKind {
    Exponential {
        rate: f64,
    },
    Erlang {
        shape: usize,
        rate: f64,
    },
    Hyperexponential {
        weights: Vec<f64>,
        rates: Vec<f64>,
    },
    HyperErlang {
        weights: Vec<f64>,
        shapes: Vec<usize>,
        rates: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseType {
    initial: Vector,
    sub: Matrix,
    exit: Vector,
    meta: BTreeMap<String, serde_json::Value>,
}

impl PhaseType {
    /// Validates `(initial, sub)` against the phase-type invariants.
    pub fn new(initial: Vector, sub: Matrix) -> Result<Self> {
        Self::new_with(initial, sub, &Tolerances::default())
    }

    pub fn new_with(initial: Vector, sub: Matrix, tol: &Tolerances) -> Result<Self> {
        let p = initial.len();
        if p == 0 {
            return Err(Error::InvalidPhaseType("order must be positive".into()));
        }
        if sub.shape() != (p, p) {
            return Err(Error::InvalidPhaseType(format!(
                "subgenerator is {}x{} but initial vector has length {p}",
                sub.nrows(),
                sub.ncols()
            )));
        }
        if initial.iter().chain(sub.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidPhaseType("non-finite entries".into()));
        }
        if initial.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidPhaseType("initial vector has negative mass".into()));
        }
        let total = initial.sum();
        if (total - 1.0).abs() > tol.prob_sum_tol {
            return Err(Error::InvalidPhaseType(format!(
                "initial vector sums to {total}, expected 1"
            )));
        }
        if !is_metzler(&sub) {
            return Err(Error::InvalidPhaseType(
                "subgenerator has a negative off-diagonal entry".into(),
            ));
        }
        let mut exit = Vector::zeros(p);
        for i in 0..p {
            let row = sub.row(i);
            let b = -row.sum();
            let scale = row.iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
            if b < -1e-12 * scale.max(1.0) {
                return Err(Error::InvalidPhaseType(format!(
                    "row {i} of the subgenerator has positive sum {}",
                    -b
                )));
            }
            exit[i] = b.max(0.0);
        }
        if exit.iter().all(|&b| b <= 0.0) {
            return Err(Error::InvalidPhaseType("no exit to the absorbing state".into()));
        }
        let rcond = reciprocal_condition(&sub);
        if !(rcond >= tol.min_rcond) {
            return Err(Error::InvalidPhaseType(format!(
                "subgenerator is singular or ill-conditioned (rcond = {rcond:e})"
            )));
        }
        Ok(PhaseType {
            initial,
            sub,
            exit,
            meta: BTreeMap::new(),
        })
    }

    pub fn construct(kind: &PhaseTypeKind) -> Result<Self> {
        match kind {
            PhaseTypeKind::Exponential { rate } => Self::exponential(*rate),
            PhaseTypeKind::Erlang { shape, rate } => Self::erlang(*shape, *rate),
            PhaseTypeKind::Hyperexponential { weights, rates } => {
                Self::hyperexponential(weights, rates)
            }
            PhaseTypeKind::HyperErlang {
                weights,
                shapes,
                rates,
            } => Self::hyper_erlang(weights, shapes, rates),
        }
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::erlang(1, rate)
    }

    pub fn erlang(shape: usize, rate: f64) -> Result<Self> {
        Self::hyper_erlang(&[1.0], &[shape], &[rate])
    }

    pub fn hyperexponential(weights: &[f64], rates: &[f64]) -> Result<Self> {
        Self::hyper_erlang(weights, &vec![1; rates.len()], rates)
    }

    /// Mixture of Erlang branches laid out as consecutive chains.
    pub fn hyper_erlang(weights: &[f64], shapes: &[usize], rates: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.len() != shapes.len() || shapes.len() != rates.len() {
            return Err(Error::InvalidParameter(
                "weights, shapes and rates must be nonempty and of equal length".into(),
            ));
        }
        if let Some(r) = rates.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidParameter(format!("rate must be positive, got {r}")));
        }
        if shapes.contains(&0) {
            return Err(Error::InvalidParameter("shapes must be >= 1".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let p: usize = shapes.iter().sum();
        let mut initial = Vector::zeros(p);
        let mut sub = Matrix::zeros(p, p);
        let mut offset = 0;
        for ((&w, &r), &rate) in weights.iter().zip(shapes).zip(rates) {
            initial[offset] = w / total;
            for k in 0..r {
                sub[(offset + k, offset + k)] = -rate;
                if k + 1 < r {
                    sub[(offset + k, offset + k + 1)] = rate;
                }
            }
            offset += r;
        }
        let mut ph = Self::new(initial, sub)?;
        ph.meta.insert(
            "family".into(),
            serde_json::json!({ "weights": weights, "shapes": shapes, "rates": rates }),
        );
        Ok(ph)
    }

    pub fn order(&self) -> usize {
        self.initial.len()
    }

    /// Initial distribution `φ`.
    pub fn initial(&self) -> &Vector {
        &self.initial
    }

    /// Subgenerator `T`.
    pub fn subgenerator(&self) -> &Matrix {
        &self.sub
    }

    /// Exit vector `b = -T 1`.
    pub fn exit(&self) -> &Vector {
        &self.exit
    }

    pub fn meta(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.meta
    }

    pub fn with_meta(mut self, key: &str, value: serde_json::Value) -> Self {
        self.meta.insert(key.to_string(), value);
        self
    }

    /// The same law with time stretched by `factor` (`X ↦ factor·X`).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let mut ph = Self::new(self.initial.clone(), &self.sub / factor)?;
        ph.meta = self.meta.clone();
        Ok(ph)
    }

    fn check_time(t: f64) -> Result<()> {
        if t >= 0.0 && t.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")))
        }
    }

    /// Transient phase occupation `e^{Tᵀt} φ`.
    fn occupation(&self, t: f64) -> Result<Vector> {
        expm_action_with(&self.sub.transpose(), &self.initial, t, &Tolerances::default())
    }

    /// Density `φᵀ e^{Tt} b`.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(self.occupation(t)?.dot(&self.exit).max(0.0))
    }

    /// Distribution function `1 - φᵀ e^{Tt} 1`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok((1.0 - self.occupation(t)?.sum()).clamp(0.0, 1.0))
    }

    /// Density on the uniform grid `0, h, 2h, …, (points-1)h`, stepping a
    /// nonnegative one-step propagator instead of exponentiating per point.
    pub fn pdf_grid(&self, step: f64, points: usize) -> Result<Vec<f64>> {
        Ok(self
            .occupation_grid(step, points)?
            .iter()
            .map(|w| w.dot(&self.exit).max(0.0))
            .collect())
    }

    pub fn cdf_grid(&self, step: f64, points: usize) -> Result<Vec<f64>> {
        Ok(self
            .occupation_grid(step, points)?
            .iter()
            .map(|w| (1.0 - w.sum()).clamp(0.0, 1.0))
            .collect())
    }

    fn occupation_grid(&self, step: f64, points: usize) -> Result<Vec<Vector>> {
        Self::check_time(step)?;
        let p = self.order();
        let tt = self.sub.transpose();
        let tol = Tolerances::default();
        let mut prop = Matrix::zeros(p, p);
        for j in 0..p {
            let col = expm_action_with(&tt, &Vector::from_fn(p, |i, _| (i == j) as u8 as f64), step, &tol)?;
            prop.set_column(j, &col);
        }
        let mut out = Vec::with_capacity(points);
        let mut w = self.initial.clone();
        for _ in 0..points {
            out.push(w.clone());
            w = &prop * &w;
        }
        Ok(out)
    }

    /// Raw moment `E[X^k] = (-1)^k k! φᵀ T^{-k} 1`.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidParameter("moment order must be >= 1".into()));
        }
        let lu = LU::new(self.sub.clone());
        let mut x = Vector::from_element(self.order(), 1.0);
        let mut factorial = 1.0;
        for i in 1..=k {
            x = lu.solve(&x).ok_or_else(|| {
                Error::InvalidPhaseType("singular subgenerator in moment computation".into())
            })?;
            x = -x;
            factorial *= i as f64;
        }
        Ok(factorial * self.initial.dot(&x))
    }

    pub fn mean(&self) -> f64 {
        // The subgenerator is validated invertible at construction.
        self.moment(1).expect("validated subgenerator")
    }

    pub fn variance(&self) -> f64 {
        let m1 = self.mean();
        self.moment(2).expect("validated subgenerator") - m1 * m1
    }

    fn draw_index<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, total: f64, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, w) in weights.enumerate() {
            if w > 0.0 {
                acc += w;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    /// Draw an initial phase from `φ`.
    pub fn sample_initial_phase<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        Self::draw_index(self.initial.iter().copied(), 1.0, rng)
    }

    /// Simulate the absorbing chain from `phase` until absorption.
    pub fn sample_from_phase<R: Rng + ?Sized>(&self, mut phase: usize, rng: &mut R) -> f64 {
        let p = self.order();
        let mut t = 0.0;
        loop {
            let out_rate = -self.sub[(phase, phase)];
            let e: f64 = Exp1.sample(rng);
            t += e / out_rate;
            let next = Self::draw_index(
                (0..=p).map(|j| {
                    if j == p {
                        self.exit[phase]
                    } else if j == phase {
                        0.0
                    } else {
                        self.sub[(phase, j)]
                    }
                }),
                out_rate,
                rng,
            );
            if next == p {
                return t;
            }
            phase = next;
        }
    }

    /// One absorption time of the chain `[[T, b], [0, 0]]` started from `φ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let phase = self.sample_initial_phase(rng);
        self.sample_from_phase(phase, rng)
    }

    /// Renewal epochs `τ_1 < τ_2 < …` of the chain whose phase is redrawn
    /// from `φ` at every absorption.
    pub fn renewal_times<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let mut clock = 0.0;
        (0..count)
            .map(|_| {
                clock += self.sample(rng);
                clock
            })
            .collect()
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn digest(&self) -> String {
        let record = PhaseTypeRecord::from(self);
        let canonical = PhaseTypeRecord {
            meta: BTreeMap::new(),
            ..record
        };
        let bytes = serde_json::to_vec(&canonical).expect("phase-type record serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PhaseTypeRecord::from(self)).expect("phase-type record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: PhaseTypeRecord = serde_json::from_str(text)?;
        record.try_into()
    }
}

/// `1 / (‖T‖₁ ‖T⁻¹‖₁)`, or zero when `T` is numerically singular.
fn reciprocal_condition(m: &Matrix) -> f64 {
    let norm1 = |a: &Matrix| {
        a.column_iter()
            .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0_f64, f64::max)
    };
    match m.clone().try_inverse() {
        Some(inv) if inv.iter().all(|x| x.is_finite()) => 1.0 / (norm1(m) * norm1(&inv)),
        _ => 0.0,
    }
}

/// On-disk form: `{order, initial, subgenerator (row-major), meta}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseTypeRecord {
    pub order: usize,
    pub initial: Vec<f64>,
    pub subgenerator: Vec<f64>,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl From<&PhaseType> for PhaseTypeRecord {
    fn from(ph: &PhaseType) -> Self {
        let p = ph.order();
        PhaseTypeRecord {
            order: p,
            initial: ph.initial.iter().copied().collect(),
            subgenerator: (0..p)
                .flat_map(|i| (0..p).map(move |j| (i, j)))
                .map(|(i, j)| ph.sub[(i, j)])
                .collect(),
            meta: ph.meta.clone(),
        }
    }
}

impl TryFrom<PhaseTypeRecord> for PhaseType {
    type Error = Error;

    fn try_from(r: PhaseTypeRecord) -> Result<Self> {
        if r.initial.len() != r.order || r.subgenerator.len() != r.order * r.order {
            return Err(Error::InvalidPhaseType(format!(
                "order {} does not match {} initial and {} subgenerator entries",
                r.order,
                r.initial.len(),
                r.subgenerator.len()
            )));
        }
        let mut ph = PhaseType::new(
            Vector::from_vec(r.initial),
            Matrix::from_row_slice(r.order, r.order, &r.subgenerator),
        )?;
        ph.meta = r.meta;
        Ok(ph)
    }
}

impl Serialize for PhaseType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PhaseTypeRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PhaseType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let record = PhaseTypeRecord::deserialize(d)?;
        record.try_into().map_err(serde::de::Error::custom)
    }
}

/// Location and scale `(m, s)` of the log-normal law with the given mean
/// and variance: `s² = ln(1 + v/μ²)`, `m = ln μ - s²/2`.
pub fn lognormal_params(mean: f64, variance: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0) || !(variance > 0.0) || !mean.is_finite() || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "log-normal mean and variance must be positive, got {mean}, {variance}"
        )));
    }
    let s2 = (variance / (mean * mean)).ln_1p();
    Ok((mean.ln() - 0.5 * s2, s2.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exponential_layout() {
        let ph = PhaseType::exponential(2.0).unwrap();
        assert_eq!(ph.initial(), &dvector![1.0]);
        assert_eq!(ph.subgenerator(), &dmatrix![-2.0]);
        assert_eq!(ph.exit(), &dvector![2.0]);
    }

    #[test]
    fn erlang_layout() {
        let ph = PhaseType::erlang(2, 3.0).unwrap();
        assert_eq!(ph.initial(), &dvector![1.0, 0.0]);
        assert_eq!(ph.subgenerator(), &dmatrix![-3.0, 3.0; 0.0, -3.0]);
        assert_eq!(ph.exit(), &dvector![0.0, 3.0]);
    }

    #[test]
    fn hyperexponential_mean() {
        let ph = PhaseType::hyperexponential(&[0.3, 0.7], &[1.0, 5.0]).unwrap();
        assert!((ph.moment(1).unwrap() - 0.44).abs() < 1e-14);
    }

    #[test]
    fn constructor_errors() {
        assert!(matches!(PhaseType::exponential(0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(PhaseType::exponential(-1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            PhaseType::hyperexponential(&[0.3, 0.6], &[1.0, 2.0]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(PhaseType::hyper_erlang(&[1.0], &[0], &[1.0]).is_err());
    }

    #[test]
    fn validation_rejects_bad_representations() {
        // initial mass does not sum to one
        assert!(PhaseType::new(dvector![0.5, 0.4], dmatrix![-1.0, 0.0; 0.0, -1.0]).is_err());
        // not Metzler
        assert!(PhaseType::new(dvector![1.0, 0.0], dmatrix![-1.0, -0.5; 0.0, -1.0]).is_err());
        // positive row sum
        assert!(PhaseType::new(dvector![1.0, 0.0], dmatrix![-1.0, 2.0; 0.0, -1.0]).is_err());
        // singular: closed class with no exit
        assert!(PhaseType::new(dvector![0.0, 1.0], dmatrix![-1.0, 1.0; 1.0, -1.0]).is_err());
        // no exit at all
        assert!(PhaseType::new(dvector![1.0], dmatrix![0.0]).is_err());
    }

    #[test]
    fn pdf_examples() {
        let lam = 1.3;
        let ph = PhaseType::exponential(lam).unwrap();
        assert!((ph.pdf(0.0).unwrap() - lam).abs() < 1e-15);
        let e2 = PhaseType::erlang(2, 2.0).unwrap();
        let expected = 4.0 * 0.5 * (-1.0f64).exp();
        assert!((e2.pdf(0.5).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.735759).abs() < 1e-6);
        assert!(ph.pdf(-1.0).is_err());
    }

    #[test]
    fn cdf_examples() {
        let ph = PhaseType::hyperexponential(&[0.2, 0.8], &[0.5, 3.0]).unwrap();
        assert_eq!(ph.cdf(0.0).unwrap(), 0.0);
        let e = PhaseType::exponential(1.0).unwrap();
        assert!((e.cdf(2f64.ln()).unwrap() - 0.5).abs() < 1e-14);
        let lam = 2.5;
        let er = PhaseType::erlang(2, lam).unwrap();
        for &t in &[0.5, 1.0, 2.0] {
            let exact = 1.0 - (-lam * t).exp() * (1.0 + lam * t);
            assert!((er.cdf(t).unwrap() - exact).abs() < 1e-13);
        }
        assert!(e.cdf(-0.1).is_err());
    }

    #[test]
    fn grid_matches_pointwise() {
        let ph = PhaseType::hyper_erlang(&[0.4, 0.6], &[3, 1], &[4.0, 0.7]).unwrap();
        let h = 0.05;
        let grid = ph.pdf_grid(h, 200).unwrap();
        let cdf = ph.cdf_grid(h, 200).unwrap();
        for k in [0, 1, 17, 99, 199] {
            let t = k as f64 * h;
            assert!((grid[k] - ph.pdf(t).unwrap()).abs() < 1e-12);
            assert!((cdf[k] - ph.cdf(t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn moment_examples() {
        let lam = 0.8;
        let e = PhaseType::exponential(lam).unwrap();
        assert!((e.moment(1).unwrap() - 1.0 / lam).abs() < 1e-14);
        assert!((e.moment(2).unwrap() - 2.0 / (lam * lam)).abs() < 1e-13);
        let er = PhaseType::erlang(2, 2.0).unwrap();
        assert!((er.moment(1).unwrap() - 1.0).abs() < 1e-14);
        assert!(e.moment(0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let ph = PhaseType::hyper_erlang(&[0.5, 0.5], &[2, 1], &[3.0, 1.0]).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| ph.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
        assert!(draw(7).iter().all(|&x| x > 0.0));
    }

    #[test]
    fn exponential_sample_mean() {
        let lam = 2.0;
        let ph = PhaseType::exponential(lam).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| ph.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = (1.0 / lam) / (n as f64).sqrt();
        assert!((mean - 1.0 / lam).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn erlang_sample_variance() {
        let ph = PhaseType::erlang(4, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| ph.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Var of the sample variance: (mu4 - sigma^4) / n, Erlang(4,4):
        // sigma^2 = 1/4, mu4 = 3 sigma^4 (1 + 2/k) = 3/16 * 1.5
        let mu4 = 3.0 / 16.0 * 1.5;
        let se = ((mu4 - 1.0 / 16.0) / n as f64).sqrt();
        assert!((var - 0.25).abs() < 3.0 * se, "{var}");
    }

    #[test]
    fn lognormal_param_examples() {
        let (m, s) = lognormal_params(1.0, 1.0).unwrap();
        assert!((s * s - 2f64.ln()).abs() < 1e-15);
        assert!((m + 2f64.ln() / 2.0).abs() < 1e-15);
        let (_, s) = lognormal_params(1.0, 4.0).unwrap();
        assert!((s * s - 5f64.ln()).abs() < 1e-15);
        for &(mu, v) in &[(0.5, 0.25), (1.5, 4.5), (3.0, 0.1)] {
            let (m, s) = lognormal_params(mu, v).unwrap();
            let mean = (m + s * s / 2.0).exp();
            let var = ((s * s).exp() - 1.0) * (2.0 * m + s * s).exp();
            assert!((mean - mu).abs() <= 1e-12 * mu);
            assert!((var - v).abs() <= 1e-12 * v);
        }
        assert!(lognormal_params(0.0, 1.0).is_err());
        assert!(lognormal_params(1.0, -1.0).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_stable() {
        let ph = PhaseType::hyper_erlang(&[0.1, 0.9], &[2, 3], &[1.0 / 3.0, std::f64::consts::PI])
            .unwrap();
        let back = PhaseType::from_json(&ph.to_json()).unwrap();
        assert_eq!(back, ph);
        assert_eq!(back.digest(), ph.digest());
    }

    #[test]
    fn json_rejects_inconsistent_order() {
        let text = r#"{"order": 2, "initial": [1.0], "subgenerator": [-1.0]}"#;
        assert!(PhaseType::from_json(text).is_err());
    }
}
