//! Command-line specs for distributions and graphs.
//!
//! Distributions: `exp:RATE`, `erlang:K:RATE`, `hyperexp:W1,W2,..:R1,R2,..`,
//! `lognormal:MEAN:VARFACTOR` (variance `VARFACTOR × MEAN²`, fitted) and
//! `ph:FILE` (JSON written by `fit-ph`).
//!
//! Graphs: a path to an edge-list file, or `gen:path:N`, `gen:cycle:N`,
//! `gen:complete:N`, `gen:er:N:PROB:SEED`, `gen:rgg:N:RADIUS:SEED`.

use std::path::PathBuf;
use std::str::FromStr;

use genesis_core::phase_type::{ph_fit, FitDiagnostics, FitOptions, FitTarget};
use genesis_core::{Network, NetworkKind, PhaseType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum LawSpec {
    Exponential { rate: f64 },
    Erlang { shape: usize, rate: f64 },
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
    LogNormal { mean: f64, variance_factor: f64 },
    File(PathBuf),
}

fn number<T: FromStr>(text: &str, what: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("cannot parse {what} from {text:?}")))
}

fn list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',').map(|x| number(x, what)).collect()
}

impl FromStr for LawSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || {
            CliError::Usage(format!(
                "unknown distribution {s:?}; expected exp:RATE, erlang:K:RATE, \
                 hyperexp:W,..:R,.., lognormal:MEAN:VARFACTOR or ph:FILE"
            ))
        };
        match parts.as_slice() {
            ["exp", rate] => Ok(LawSpec::Exponential { rate: number(rate, "rate")? }),
            ["erlang", k, rate] => Ok(LawSpec::Erlang {
                shape: number(k, "shape")?,
                rate: number(rate, "rate")?,
            }),
            ["hyperexp", w, r] => Ok(LawSpec::HyperExponential {
                weights: list(w, "weight")?,
                rates: list(r, "rate")?,
            }),
            ["lognormal", mean, factor] => Ok(LawSpec::LogNormal {
                mean: number(mean, "mean")?,
                variance_factor: number(factor, "variance factor")?,
            }),
            ["ph", ..] if parts.len() >= 2 => Ok(LawSpec::File(PathBuf::from(&s[3..]))),
            _ => Err(bad()),
        }
    }
}

/// A resolved law, with fit diagnostics when it was fitted.
pub struct Law {
    pub phase_type: PhaseType,
    pub fit: Option<FitDiagnostics>,
}

impl LawSpec {
    pub fn needs_seed(&self) -> bool {
        matches!(self, LawSpec::LogNormal { .. })
    }

    /// Builds the law; log-normal targets are fitted at `order` with `seed`.
    pub fn resolve(&self, order: usize, seed: Option<u64>, opts: &FitOptions) -> Result<Law> {
        let exact = |phase_type| Ok(Law { phase_type, fit: None });
        match self {
            LawSpec::Exponential { rate } => exact(PhaseType::exponential(*rate)?),
            LawSpec::Erlang { shape, rate } => exact(PhaseType::erlang(*shape, *rate)?),
            LawSpec::HyperExponential { weights, rates } => {
                exact(PhaseType::hyperexponential(weights, rates)?)
            }
            LawSpec::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                exact(PhaseType::from_json(&text)?)
            }
            LawSpec::LogNormal { mean, variance_factor } => {
                let seed = seed.ok_or_else(|| {
                    CliError::Usage("fitting a log-normal law needs --seed".into())
                })?;
                let target = FitTarget::LogNormal {
                    mean: *mean,
                    variance: variance_factor * mean * mean,
                };
                let fit = ph_fit(&target, order, opts, &mut ChaCha8Rng::seed_from_u64(seed))?;
                Ok(Law {
                    phase_type: fit.phase_type,
                    fit: Some(fit.diagnostics),
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GraphSpec {
    File(PathBuf),
    Generated(NetworkKind),
}

impl FromStr for GraphSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let Some(rest) = s.strip_prefix("gen:") else {
            return Ok(GraphSpec::File(PathBuf::from(s)));
        };
        let parts: Vec<&str> = rest.split(':').collect();
        let kind = match parts.as_slice() {
            ["path", n] => NetworkKind::Path { n: number(n, "node count")? },
            ["cycle", n] => NetworkKind::Cycle { n: number(n, "node count")? },
            ["complete", n] => NetworkKind::Complete { n: number(n, "node count")? },
            ["er", n, prob, seed] => NetworkKind::ErdosRenyi {
                n: number(n, "node count")?,
                prob: number(prob, "edge probability")?,
                seed: number(seed, "seed")?,
            },
            ["rgg", n, radius, seed] => NetworkKind::RandomGeometric {
                n: number(n, "node count")?,
                radius: number(radius, "radius")?,
                seed: number(seed, "seed")?,
            },
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown generator {s:?}; expected gen:path:N, gen:cycle:N, gen:complete:N, \
                     gen:er:N:PROB:SEED or gen:rgg:N:RADIUS:SEED"
                )))
            }
        };
        Ok(GraphSpec::Generated(kind))
    }
}

impl GraphSpec {
    /// `remap` relabels arbitrary integer node ids to `0..n`.
    pub fn load(&self, remap: bool) -> Result<Network> {
        match self {
            GraphSpec::Generated(kind) => Ok(Network::generate(kind)?),
            GraphSpec::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let g = if remap {
                    Network::parse_edge_list_remapped(&text)
                } else {
                    Network::parse_edge_list(&text)
                };
                Ok(g?)
            }
        }
    }
}
