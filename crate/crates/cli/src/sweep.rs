//! Parameter sweeps of the bound rate over transmission and recovery means.
//!
//! Every cell pairs a transmission law and a recovery law from the config
//! menus with one transmission mean and one recovery mean, and records
//! `-η(𝓐)`. Log-normal laws are fitted once per (variance factor, order)
//! at unit mean and rescaled to each cell's mean: scaling a phase-type law
//! by `c` is exact, and both the fit and its L1 error are equivariant
//! under that scaling.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use genesis_core::phase_type::{ph_fit, FitOptions, FitTarget};
use genesis_core::stability::{bound_abscissa, decay_rate_bound_reduced};
use genesis_core::{GenesisModel, Network, NetworkKind, PhaseType, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MenuLaw {
    Exponential,
    /// Log-normal with variance `variance_factor × mean²`.
    LogNormal { variance_factor: f64 },
}

impl MenuLaw {
    /// Panel label: `exp`, or `ln` followed by the variance factor.
    pub fn label(&self) -> String {
        match self {
            MenuLaw::Exponential => "exp".into(),
            MenuLaw::LogNormal { variance_factor } => format!("ln{variance_factor}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Range {
            start: 0.5,
            stop: 1.5,
            step: 0.05,
        }
    }
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        let values = match self {
            GridSpec::List(v) => v.clone(),
            &GridSpec::Range { start, stop, step } => {
                if !(step > 0.0) || stop < start {
                    return Err(CliError::Usage(format!(
                        "bad grid range {start}:{step}:{stop}"
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // round away the accumulated binary noise of start + k step
                (0..count)
                    .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                    .collect()
            }
        };
        if values.is_empty() || values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(CliError::Usage("grids must be nonempty with positive finite values".into()));
        }
        Ok(values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphConfig {
    /// Edge-list file, relative to the config file.
    File {
        path: PathBuf,
        #[serde(default)]
        remap: bool,
    },
    Generate(NetworkKind),
}

/// How a grid value maps to a mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// The grid value is the mean.
    Absolute,
    /// The mean is the grid value divided by the graph's spectral radius.
    Normalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisBinding {
    pub transmission: Axis,
    pub recovery: Axis,
}

impl Default for AxisBinding {
    fn default() -> Self {
        AxisBinding {
            transmission: Axis::Absolute,
            recovery: Axis::Normalized,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    /// Assemble the `npq × npq` matrix.
    #[default]
    Full,
    /// Solve the `pq × pq` block at the largest adjacency eigenvalue.
    Reduced,
}

fn ten() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub version: u32,
    pub graph: GraphConfig,
    #[serde(default)]
    pub mu_t: GridSpec,
    #[serde(default)]
    pub mu_r: GridSpec,
    pub transmission: Vec<MenuLaw>,
    pub recovery: Vec<MenuLaw>,
    #[serde(default = "ten")]
    pub order_trans: usize,
    #[serde(default = "ten")]
    pub order_rec: usize,
    #[serde(default)]
    pub axes: AxisBinding,
    #[serde(default)]
    pub method: BoundMethod,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// CSV destination, relative to the config file.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: SweepConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let GraphConfig::File { path, .. } = &mut config.graph {
            *path = base.join(&*path);
        }
        if let Some(out) = &mut config.output {
            *out = base.join(&*out);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Usage(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        if self.transmission.is_empty() || self.recovery.is_empty() {
            return Err(CliError::Usage("distribution menus must be nonempty".into()));
        }
        if self.order_trans == 0 || self.order_rec == 0 {
            return Err(CliError::Usage("fit orders must be positive".into()));
        }
        for law in self.transmission.iter().chain(&self.recovery) {
            if let MenuLaw::LogNormal { variance_factor } = law {
                if !(*variance_factor > 0.0 && variance_factor.is_finite()) {
                    return Err(CliError::Usage("variance factors must be positive".into()));
                }
            }
        }
        self.mu_t.values()?;
        self.mu_r.values()?;
        Ok(())
    }

    pub fn load_graph(&self) -> Result<Network> {
        match &self.graph {
            GraphConfig::Generate(kind) => Ok(Network::generate(kind)?),
            GraphConfig::File { path, remap } => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Ok(if *remap {
                    Network::parse_edge_list_remapped(&text)?
                } else {
                    Network::parse_edge_list(&text)?
                })
            }
        }
    }
}

/// A unit-mean law from a menu, with its fit error when fitted.
#[derive(Clone, Debug)]
pub struct BaseLaw {
    pub phase_type: PhaseType,
    pub l1: Option<f64>,
}

/// Content address of a fit: the law, order, fit options and seed.
pub fn fit_key(law: &MenuLaw, order: usize, opts: &FitOptions, seed: u64) -> String {
    let record = serde_json::json!({ "law": law, "order": order, "fit": opts, "seed": seed });
    hex::encode(Sha256::digest(record.to_string().as_bytes()))
}

pub fn fit_base_law(law: &MenuLaw, order: usize, opts: &FitOptions, seed: u64) -> Result<BaseLaw> {
    match law {
        MenuLaw::Exponential => Ok(BaseLaw {
            phase_type: PhaseType::exponential(1.0)?,
            l1: None,
        }),
        MenuLaw::LogNormal { variance_factor } => {
            let target = FitTarget::LogNormal {
                mean: 1.0,
                variance: *variance_factor,
            };
            let fit = ph_fit(&target, order, opts, &mut ChaCha8Rng::seed_from_u64(seed))?;
            Ok(BaseLaw {
                phase_type: fit.phase_type,
                l1: fit.diagnostics.l1_error,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub panel_trans: String,
    pub panel_rec: String,
    pub mu_t: f64,
    pub mu_r_norm: f64,
    #[serde(rename = "eta_A")]
    pub eta_a: Option<f64>,
    pub bound_rate: Option<f64>,
    pub fit_l1_trans: Option<f64>,
    pub fit_l1_rec: Option<f64>,
    pub graph_hash: String,
    pub seed: u64,
    pub error: Option<String>,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "panel_trans",
    "panel_rec",
    "mu_t",
    "mu_r_norm",
    "eta_A",
    "bound_rate",
    "fit_l1_trans",
    "fit_l1_rec",
    "graph_hash",
    "seed",
    "error",
];

/// Everything shared by the cells of a sweep.
pub struct SweepContext {
    pub config: SweepConfig,
    pub seed: u64,
    pub graph: Network,
    pub spectral_radius: f64,
    pub graph_hash: String,
    /// Fitted base laws by content address.
    pub fits: BTreeMap<String, std::result::Result<BaseLaw, String>>,
}

impl SweepContext {
    /// Loads the graph and fits every distinct menu law, in parallel.
    pub fn prepare(config: SweepConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let graph = config.load_graph()?;
        let mut wanted: BTreeMap<String, (MenuLaw, usize)> = BTreeMap::new();
        for law in &config.transmission {
            wanted.insert(fit_key(law, config.order_trans, &config.fit, seed), (law.clone(), config.order_trans));
        }
        for law in &config.recovery {
            wanted.insert(fit_key(law, config.order_rec, &config.fit, seed), (law.clone(), config.order_rec));
        }
        let fits = wanted
            .into_par_iter()
            .map(|(key, (law, order))| {
                let fit = fit_base_law(&law, order, &config.fit, seed).map_err(|e| e.to_string());
                (key, fit)
            })
            .collect();
        Ok(SweepContext {
            spectral_radius: graph.spectral_radius(),
            graph_hash: graph.hash(),
            graph,
            config,
            seed,
            fits,
        })
    }

    fn base(&self, law: &MenuLaw, order: usize) -> std::result::Result<&BaseLaw, String> {
        match self.fits.get(&fit_key(law, order, &self.config.fit, self.seed)) {
            Some(Ok(base)) => Ok(base),
            Some(Err(e)) => Err(format!("fit of {} failed: {e}", law.label())),
            None => Err(format!("no fit for {}", law.label())),
        }
    }

    fn mean(&self, axis: Axis, value: f64) -> f64 {
        match axis {
            Axis::Absolute => value,
            Axis::Normalized => value / self.spectral_radius,
        }
    }

    /// `η(𝓐)` of one cell.
    pub fn cell_abscissa(&self, trans: &MenuLaw, rec: &MenuLaw, mu_t: f64, mu_r: f64) -> std::result::Result<f64, String> {
        let bt = self.base(trans, self.config.order_trans)?;
        let br = self.base(rec, self.config.order_rec)?;
        let scaled = |base: &BaseLaw, mean: f64| base.phase_type.scaled(mean).map_err(|e| e.to_string());
        let t = scaled(bt, self.mean(self.config.axes.transmission, mu_t))?;
        let r = scaled(br, self.mean(self.config.axes.recovery, mu_r))?;
        let model = GenesisModel::new(self.graph.clone(), t, r, [0]).map_err(|e| e.to_string())?;
        match self.config.method {
            BoundMethod::Full => bound_abscissa(&model, &self.config.tolerances),
            BoundMethod::Reduced => decay_rate_bound_reduced(&model).map(|rate| -rate),
        }
        .map_err(|e| e.to_string())
    }

    pub fn cell(&self, trans: &MenuLaw, rec: &MenuLaw, mu_t: f64, mu_r: f64) -> SweepRow {
        let l1 = |law: &MenuLaw, order| self.base(law, order).ok().and_then(|b| b.l1);
        let (eta, error) = match self.cell_abscissa(trans, rec, mu_t, mu_r) {
            Ok(eta) => (Some(eta), None),
            Err(e) => (None, Some(e)),
        };
        SweepRow {
            panel_trans: trans.label(),
            panel_rec: rec.label(),
            mu_t,
            mu_r_norm: mu_r,
            eta_a: eta,
            bound_rate: eta.map(|e| -e),
            fit_l1_trans: l1(trans, self.config.order_trans),
            fit_l1_rec: l1(rec, self.config.order_rec),
            graph_hash: self.graph_hash.clone(),
            seed: self.seed,
            error,
        }
    }

    /// All cells, panel-major, then transmission mean, then recovery mean.
    pub fn run(&self) -> Result<Vec<SweepRow>> {
        let mu_t = self.config.mu_t.values()?;
        let mu_r = self.config.mu_r.values()?;
        let mut jobs = Vec::new();
        for t in &self.config.transmission {
            for r in &self.config.recovery {
                for &x in &mu_t {
                    for &y in &mu_r {
                        jobs.push((t, r, x, y));
                    }
                }
            }
        }
        let work = || jobs.par_iter().map(|&(t, r, x, y)| self.cell(t, r, x, y)).collect();
        match self.config.workers {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
                Ok(pool.install(work))
            }
            None => Ok(work()),
        }
    }
}

pub fn run_sweep(config: SweepConfig, seed: u64) -> Result<Vec<SweepRow>> {
    SweepContext::prepare(config, seed)?.run()
}

/// Recomputes one row from its provenance columns and the config, fitting
/// only the two laws it needs.
pub fn recompute_cell(config: &SweepConfig, row: &SweepRow) -> Result<SweepRow> {
    let find = |menu: &[MenuLaw], label: &str| {
        menu.iter()
            .find(|l| l.label() == label)
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("label {label:?} is not in the config menus")))
    };
    let trans = find(&config.transmission, &row.panel_trans)?;
    let rec = find(&config.recovery, &row.panel_rec)?;
    let mut single = config.clone();
    single.transmission = vec![trans.clone()];
    single.recovery = vec![rec.clone()];
    let ctx = SweepContext::prepare(single, row.seed)?;
    if ctx.graph_hash != row.graph_hash {
        return Err(CliError::Usage(format!(
            "graph hash {} does not match the row's {}",
            ctx.graph_hash, row.graph_hash
        )));
    }
    Ok(ctx.cell(&trans, &rec, row.mu_t, row.mu_r_norm))
}

/// Writes the table as CSV, preceded by a `#` timestamp line when asked.
pub fn write_csv<W: Write>(rows: &[SweepRow], timestamp: Option<u64>, mut out: W) -> Result<()> {
    if let Some(secs) = timestamp {
        writeln!(out, "# generated at unix time {secs}").map_err(|e| CliError::io("<output>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))?;
    Ok(())
}

/// Reads a table written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::Usage(format!("{}: {other:?}", path.display())),
        })?;
    let headers = reader.headers()?.clone();
    let missing: Vec<&str> = CSV_COLUMNS
        .iter()
        .copied()
        .filter(|c| !headers.iter().any(|h| h == *c))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: missing columns {}",
            path.display(),
            missing.join(", ")
        )));
    }
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// For each transmission mean of a panel, the recovery grid value where the
/// bound rate changes sign, by linear interpolation between neighbors.
pub fn zero_crossings(rows: &[SweepRow], trans: &str, rec: &str) -> Vec<(f64, Option<f64>)> {
    let mut columns: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.panel_trans == trans && r.panel_rec == rec) {
        if let Some(v) = row.bound_rate {
            columns.entry(row.mu_t.to_bits()).or_default().push((row.mu_r_norm, v));
        }
    }
    let mut out: Vec<(f64, Option<f64>)> = columns
        .into_iter()
        .map(|(bits, mut col)| {
            col.sort_by(|a, b| a.0.total_cmp(&b.0));
            let crossing = col.windows(2).find_map(|w| {
                let ((y0, v0), (y1, v1)) = (w[0], w[1]);
                if v0 == 0.0 {
                    Some(y0)
                } else if (v0 > 0.0) != (v1 > 0.0) || v1 == 0.0 {
                    Some(y0 + (y1 - y0) * v0 / (v0 - v1))
                } else {
                    None
                }
            });
            (f64::from_bits(bits), crossing)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}
