//! Run configuration: a JSON file, command-line flags on top, then defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rmtlab_core::{Complex64, SigmaMeasure, TestFunction, VectorLaw};

use crate::error::{Error, Result};
use crate::montecarlo::{ratio_consistent, ExperimentConfig, MIN_MOMENT_REPLICATES};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_REPLICATES: usize = 800;
pub const DEFAULT_N: usize = 512;
pub const SEED_ENV: &str = "RMTLAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Density,
    Spectrum,
    Clt,
    Cov,
    Moments,
    Variance,
    Norm,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Spectrum => "spectrum",
            Command::Clt => "clt",
            Command::Cov => "cov",
            Command::Moments => "moments",
            Command::Variance => "variance",
            Command::Norm => "norm",
        }
    }

    fn default_replicates(self) -> usize {
        match self {
            Command::Moments => MIN_MOMENT_REPLICATES,
            _ => DEFAULT_REPLICATES,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Every field optional; the shape of a config file and of the flag set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub command: Option<Command>,
    pub law: Option<String>,
    pub sigma: Option<String>,
    pub c: Option<f64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    #[serde(rename = "R")]
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub phi: Option<String>,
    pub eta: Option<f64>,
    pub z1: Option<Complex64>,
    pub z2: Option<Complex64>,
    pub delta: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
}

impl PartialConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Fields set in `top` win.
    pub fn overlay(self, top: PartialConfig) -> Self {
        Self {
            command: top.command.or(self.command),
            law: top.law.or(self.law),
            sigma: top.sigma.or(self.sigma),
            c: top.c.or(self.c),
            n: top.n.or(self.n),
            m: top.m.or(self.m),
            replicates: top.replicates.or(self.replicates),
            seed: top.seed.or(self.seed),
            phi: top.phi.or(self.phi),
            eta: top.eta.or(self.eta),
            z1: top.z1.or(self.z1),
            z2: top.z2.or(self.z2),
            delta: top.delta.or(self.delta),
            out: top.out.or(self.out),
            format: top.format.or(self.format),
            jobs: top.jobs.or(self.jobs),
        }
    }
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub law: String,
    pub sigma: String,
    pub c: f64,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "R")]
    pub replicates: usize,
    pub seed: u64,
    pub phi: String,
    pub eta: Option<f64>,
    pub z1: Complex64,
    pub z2: Complex64,
    pub delta: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub jobs: usize,
}

/// Seed used when none is configured: `RMTLAB_SEED` if set, else 42.
pub fn default_seed() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl RunConfig {
    pub fn resolve(p: PartialConfig) -> Result<Self> {
        let command = p
            .command
            .ok_or_else(|| Error::Usage("no command given".into()))?;
        let c = p.c.unwrap_or(1.0);
        let n = p.n.unwrap_or(DEFAULT_N);
        let cfg = Self {
            command,
            law: p.law.unwrap_or_else(|| "iid:gaussian".into()),
            sigma: p.sigma.unwrap_or_else(|| "1:1".into()),
            c,
            n,
            m: match p.m {
                Some(m) => m,
                None => crate::montecarlo::default_m(n, c),
            },
            replicates: p.replicates.unwrap_or(command.default_replicates()),
            seed: match p.seed {
                Some(s) => s,
                None => default_seed()?,
            },
            phi: p.phi.unwrap_or_else(|| "poly:0,1".into()),
            eta: p.eta,
            z1: p.z1.unwrap_or(Complex64::new(0.0, 1.0)),
            z2: p.z2.unwrap_or(Complex64::new(0.0, 2.0)),
            delta: p.delta.unwrap_or(0.5),
            out: p.out,
            format: p.format.unwrap_or_default(),
            jobs: p.jobs.unwrap_or_else(default_jobs),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.vector_law()?;
        self.sigma_measure()?;
        self.test_function()?;
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::Usage(format!("c must be finite and nonnegative, got {}", self.c)));
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::Usage("n and m must be positive".into()));
        }
        if !ratio_consistent(self.n, self.m, self.c) {
            return Err(Error::Usage(format!(
                "m/n = {}/{} conflicts with c = {}",
                self.m, self.n, self.c
            )));
        }
        if self.replicates < 2 {
            return Err(Error::Usage("R must be at least 2".into()));
        }
        if self.command == Command::Moments && self.replicates < MIN_MOMENT_REPLICATES {
            return Err(Error::Usage(format!("moments needs R ≥ {MIN_MOMENT_REPLICATES}")));
        }
        if let Some(eta) = self.eta {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::Usage(format!("eta must be positive, got {eta}")));
            }
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Usage(format!("delta must be positive, got {}", self.delta)));
        }
        if self.z1.im == 0.0 || self.z2.im == 0.0 {
            return Err(Error::Usage("z1 and z2 need nonzero imaginary parts".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Usage("jobs must be positive".into()));
        }
        Ok(())
    }

    pub fn vector_law(&self) -> Result<VectorLaw> {
        let law: VectorLaw = self.law.parse().map_err(usage)?;
        law.validate().map_err(usage)?;
        Ok(law)
    }

    pub fn sigma_measure(&self) -> Result<SigmaMeasure> {
        SigmaMeasure::parse(&self.sigma, self.c).map_err(usage)
    }

    pub fn test_function(&self) -> Result<TestFunction> {
        self.phi.parse().map_err(usage)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig::new(
            self.vector_law()?,
            self.sigma_measure()?,
            self.n,
            Some(self.m),
            self.replicates,
            self.seed,
        )?
        .with_jobs(self.jobs))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: PartialConfig = serde_json::from_str(text)?;
        Self::resolve(p)
    }

    /// The configuration as echoed into output metadata; the worker count is
    /// left out because it never changes results.
    pub fn echo(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(map) = v.as_object_mut() {
            map.remove("jobs");
        }
        Ok(v)
    }
}

/// Input errors from the core are usage errors, not numerical failures.
fn usage(e: rmtlab_core::Error) -> Error {
    Error::Usage(e.to_string())
}

/// Parses `re,im`, or `a+bi` forms such as `i`, `-2i`, `1+i`, `0.5-0.25i`, `3`.
pub fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse complex number '{s}'");
    if let Some((re, im)) = t.split_once(',') {
        let re = re.parse::<f64>().map_err(|_| bad())?;
        let im = im.parse::<f64>().map_err(|_| bad())?;
        return Ok(Complex64::new(re, im));
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not an exponent sign or the leading one
    let bytes = body.as_bytes();
    let mut cut = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            cut = Some(k);
            break;
        }
    }
    let (re_part, im_part) = match cut {
        Some(k) => (&body[..k], &body[k..]),
        None => ("", body),
    };
    let re = if re_part.is_empty() {
        0.0
    } else {
        re_part.parse::<f64>().map_err(|_| bad())?
    };
    let im = match im_part {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(Complex64::new(re, im))
}
