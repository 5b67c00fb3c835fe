use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use genesis_core::phase_type::{ph_fit, FitOptions, FitTarget};
use genesis_core::sim::{estimate_decay_rate, estimate_prevalence, simulate_event_driven_with, DecayOptions};
use genesis_core::stability::{
    certify_stability, decay_rate_bound, exact_decay_rate, mean_extinction_time, predicted_state_count,
};
use genesis_core::{GenesisModel, StabilityReport, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};
use crate::render::render_all;
use crate::spec::{GraphSpec, LawSpec};
use crate::sweep::{read_csv, run_sweep, write_csv, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "genesis", version, about = "Networked SIS epidemics with phase-type transmission and recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a phase-type law to a log-normal, a sample file or a density file.
    FitPh(FitPhArgs),
    /// Certified decay rate of the first-order bound.
    Bound(BoundArgs),
    /// Decay rate of the exact Markov chain.
    Exact(ExactArgs),
    /// Estimate mean prevalence over a time grid by simulation.
    Simulate(SimulateArgs),
    /// Sweep the bound over transmission and recovery means.
    Sweep(SweepArgs),
    /// Draw SVG heatmaps from a sweep table.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct FitPhArgs {
    /// `lognormal:MEAN:VARFACTOR`, `samples:FILE` (one value per line) or
    /// `density:FILE` (CSV rows `t,f(t)` on an increasing grid).
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 10)]
    order: usize,
    #[arg(long)]
    seed: u64,
    /// JSON file with fit options.
    #[arg(long)]
    fit_options: Option<PathBuf>,
    /// Write the law here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Edge-list file or `gen:KIND:...`.
    #[arg(long)]
    graph: String,
    /// Relabel arbitrary node ids to 0..n.
    #[arg(long)]
    remap: bool,
    #[arg(long)]
    trans: String,
    #[arg(long)]
    rec: String,
    /// Initially infected nodes.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    initial: Vec<usize>,
    /// Phase count for fitted laws.
    #[arg(long, default_value_t = 10)]
    order: usize,
    /// JSON file with fit options.
    #[arg(long)]
    fit_options: Option<PathBuf>,
    /// JSON file overriding numerical tolerances and size caps.
    #[arg(long)]
    tolerances: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Seed for fitted laws.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the full stability report as JSON.
    #[arg(long)]
    json: bool,
    /// Classify these decay rates.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
}

#[derive(Debug, Args)]
struct ExactArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Also print the mean time to extinction.
    #[arg(long)]
    mean_time: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 1000)]
    replicas: usize,
    #[arg(long, default_value_t = 101)]
    grid_points: usize,
    /// Also fit the decay rate of mean prevalence.
    #[arg(long)]
    decay: bool,
    /// Prevalence CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the trajectory of the first replica here.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Overrides the config's output path; stdout when neither is given.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the generation time line.
    #[arg(long)]
    no_timestamp: bool,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Only this panel, as `TRANS:REC`.
    #[arg(long)]
    panel: Option<String>,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::FitPh(a) => fit_ph(a),
        Command::Bound(a) => bound(a),
        Command::Exact(a) => exact(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Render(a) => render(a),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn fit_options(path: Option<&Path>) -> Result<FitOptions> {
    path.map_or_else(|| Ok(FitOptions::default()), |p| Ok(serde_json::from_str(&read(p)?)?))
}

fn tolerances(path: Option<&Path>) -> Result<Tolerances> {
    path.map_or_else(|| Ok(Tolerances::default()), |p| Ok(serde_json::from_str(&read(p)?)?))
}

fn numbers(text: &str, path: &Path) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| CliError::Usage(format!("{}: cannot parse {t:?} as a number", path.display())))
        })
        .collect()
}

fn fit_target(spec: &str) -> Result<FitTarget> {
    let parts: Vec<&str> = spec.splitn(3, ':').collect();
    match parts.as_slice() {
        ["lognormal", mean, factor] => {
            let parse = |t: &str| {
                t.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("cannot parse {t:?} as a number")))
            };
            let mean = parse(mean)?;
            Ok(FitTarget::LogNormal {
                mean,
                variance: parse(factor)? * mean * mean,
            })
        }
        ["samples", _, ..] => {
            let path = Path::new(spec.strip_prefix("samples:").expect("matched prefix"));
            Ok(FitTarget::Samples(numbers(&read(path)?, path)?))
        }
        ["density", _, ..] => {
            let path = Path::new(spec.strip_prefix("density:").expect("matched prefix"));
            let values = numbers(&read(path)?, path)?;
            if values.len() % 2 != 0 {
                return Err(CliError::Usage(format!("{}: expected rows `t,f(t)`", path.display())));
            }
            let (grid, values) = values.chunks(2).map(|c| (c[0], c[1])).unzip();
            Ok(FitTarget::Density { grid, values })
        }
        _ => Err(CliError::Usage(format!(
            "unknown fit target {spec:?}; expected lognormal:MEAN:VARFACTOR, samples:FILE or density:FILE"
        ))),
    }
}

fn fit_ph(a: FitPhArgs) -> Result<()> {
    let target = fit_target(&a.target)?;
    let opts = fit_options(a.fit_options.as_deref())?;
    let fit = ph_fit(&target, a.order, &opts, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    eprintln!("{}", serde_json::to_string(&fit.diagnostics)?);
    emit(a.out.as_deref(), &(fit.phase_type.to_json() + "\n"))
}

fn build_model(a: &ModelArgs, seed: Option<u64>) -> Result<(GenesisModel, Tolerances)> {
    let graph = a.graph.parse::<GraphSpec>()?.load(a.remap)?;
    let opts = fit_options(a.fit_options.as_deref())?;
    let mut laws = Vec::new();
    for spec in [&a.trans, &a.rec] {
        let law = spec.parse::<LawSpec>()?.resolve(a.order, seed, &opts)?;
        if let Some(diag) = &law.fit {
            eprintln!("fit {spec}: {}", serde_json::to_string(diag)?);
        }
        laws.push(law.phase_type);
    }
    let rec = laws.pop().expect("two laws");
    let trans = laws.pop().expect("two laws");
    let model = GenesisModel::new(graph, trans, rec, a.initial.iter().copied())?;
    Ok((model, tolerances(a.tolerances.as_deref())?))
}

fn bound(a: BoundArgs) -> Result<()> {
    let (model, tol) = build_model(&a.model, a.seed)?;
    if a.json {
        let report = StabilityReport::compute(&model, &a.lambda, &tol)?;
        return emit(None, &(report.to_json() + "\n"));
    }
    let rate = decay_rate_bound(&model, &tol)?;
    let mut out = format!("{rate:?}\n");
    for &lambda in &a.lambda {
        let verdict = certify_stability(&model, lambda, &tol)?;
        out += &format!("{lambda:?} {}\n", serde_json::to_value(verdict)?.as_str().unwrap_or("?"));
    }
    emit(None, &out)
}

fn exact(a: ExactArgs) -> Result<()> {
    let (model, tol) = build_model(&a.model, a.seed)?;
    let rate = exact_decay_rate(&model, &tol)?;
    let mut out = format!("{rate:?}\nstates: {}\n", predicted_state_count(&model));
    if a.mean_time {
        out += &format!("mean extinction time: {:?}\n", mean_extinction_time(&model, &tol)?);
    }
    emit(None, &out)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    if a.grid_points < 2 {
        return Err(CliError::Usage("--grid-points must be at least 2".into()));
    }
    if !(a.horizon > 0.0 && a.horizon.is_finite()) {
        return Err(CliError::Usage(format!("--horizon must be positive, got {}", a.horizon)));
    }
    let (model, tol) = build_model(&a.model, Some(a.seed))?;
    if let Some(path) = &a.events {
        // replica 0 of the estimate below
        let log = simulate_event_driven_with(&model, a.horizon, a.seed, &tol)?;
        emit(Some(path), &log.to_text())?;
    }
    let step = a.horizon / (a.grid_points - 1) as f64;
    let grid: Vec<f64> = (0..a.grid_points).map(|k| k as f64 * step).collect();
    let series = estimate_prevalence(&model, &grid, a.replicas, a.seed, &tol)?;
    if a.decay {
        let est = estimate_decay_rate(
            &series,
            &DecayOptions {
                seed: a.seed,
                ..DecayOptions::default()
            },
        )?;
        eprintln!(
            "decay slope: {:?} interval: [{:?}, {:?}] points: {}",
            est.slope,
            est.ci_low,
            est.ci_high,
            est.points.len()
        );
    }
    emit(a.out.as_deref(), &series.to_csv())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut config = SweepConfig::load(&a.config)?;
    if a.workers.is_some() {
        config.workers = a.workers;
    }
    let out = a.out.or_else(|| config.output.clone());
    let rows = run_sweep(config, a.seed)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see the error column", rows.len());
    }
    let timestamp = (!a.no_timestamp).then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    });
    let mut buf = Vec::new();
    write_csv(&rows, timestamp, &mut buf)?;
    emit(out.as_deref(), &String::from_utf8(buf).expect("CSV is UTF-8"))
}

fn render(a: RenderArgs) -> Result<()> {
    let rows = read_csv(&a.csv)?;
    let panel = match &a.panel {
        Some(p) => Some(
            p.split_once(':')
                .ok_or_else(|| CliError::Usage(format!("--panel expects TRANS:REC, got {p:?}")))?,
        ),
        None => None,
    };
    for path in render_all(&rows, &a.out_dir, panel)? {
        println!("{}", path.display());
    }
    Ok(())
}
