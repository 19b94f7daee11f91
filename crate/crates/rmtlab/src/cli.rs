//! Command-line parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Map, Value};

use rmtlab_core::ensemble::resolvent_trace;
use rmtlab_core::mp::{atom_at_zero, density_estimate, spectral_bracket, DEFAULT_ETA_SCHEDULE};
use rmtlab_core::variance::{sobolev_norm, VarianceSettings};
use rmtlab_core::Complex64;

use crate::config::{parse_complex, Command, Format, PartialConfig, RunConfig};
use crate::error::Result;
use crate::io::{meta_path, open_output, write_csv_rows, write_json, DensityPoint};
use crate::montecarlo::{
    clt_from_spectra, cov_from_spectra, esd_from_spectra, predicted_variance, run_moment_check,
    simulate_spectra, DEFAULT_BINS, DEFAULT_LADDER,
};

/// Points on the density grid.
pub const DENSITY_POINTS: usize = 400;

/// Simulation and limit computations for rank-one sample covariance ensembles.
///
/// Flags override values from `--config`. `moments` runs the fixed dimension
/// ladder 16, 64, 256 and ignores `--n`. `--eta` sets the largest smoothing
/// level; three halvings follow it.
#[derive(Debug, Parser)]
#[command(name = "rmtlab", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// iid:gaussian | iid:rademacher | iid:uniform | sphere | lpball:<p>
    #[arg(long)]
    pub law: Option<String>,
    /// Atoms of σ as τ:weight pairs, e.g. 1:0.5,2:0.5
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Replicates.
    #[arg(long = "R")]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// poly:c0,c1,... | exp:t | bump:center,width
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Complex number such as 1+i, -2i or 0.5,1
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub z1: Option<Complex64>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub z2: Option<Complex64>,
    /// Sobolev excess: the norm uses s = 2 + delta.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl Cli {
    pub fn partial(&self) -> PartialConfig {
        PartialConfig {
            command: self.command,
            law: self.law.clone(),
            sigma: self.sigma.clone(),
            c: self.c,
            n: self.n,
            m: self.m,
            replicates: self.replicates,
            seed: self.seed,
            phi: self.phi.clone(),
            eta: self.eta,
            z1: self.z1,
            z2: self.z2,
            delta: self.delta,
            out: self.out.clone(),
            format: self.format,
            jobs: self.jobs,
        }
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => PartialConfig::from_json_file(path)?,
            None => PartialConfig::default(),
        };
        RunConfig::resolve(base.overlay(self.partial()))
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.run_config().and_then(|cfg| dispatch(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rmtlab: {e}");
            e.exit_code()
        }
    }
}

/// The report of one command, plus its CSV form.
struct Artifact {
    report: Value,
    csv: Vec<u8>,
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv_rows(&mut buf, rows)?;
    Ok(buf)
}

fn schedule(eta: Option<f64>) -> Vec<f64> {
    match eta {
        Some(e) => vec![e, e / 2.0, e / 4.0, e / 8.0],
        None => DEFAULT_ETA_SCHEDULE.to_vec(),
    }
}

fn variance_settings(eta: Option<f64>) -> VarianceSettings {
    let mut s = VarianceSettings::default();
    if let Some(e) = eta {
        s.eta_levels = schedule(Some(e));
    }
    s
}

/// Runs the configured command and writes its artifacts.
pub fn dispatch(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    log::info!("{} with seed {} on {} worker(s)", cfg.command, cfg.seed, cfg.jobs);
    let artifact = match cfg.command {
        Command::Density => density(cfg)?,
        Command::Spectrum => spectrum(cfg)?,
        Command::Clt => clt(cfg)?,
        Command::Cov => cov(cfg)?,
        Command::Moments => moments(cfg)?,
        Command::Variance => variance(cfg)?,
        Command::Norm => norm(cfg)?,
    };
    let meta = json!({
        "command": cfg.command,
        "config": cfg.echo()?,
        "versions": { "rmtlab": env!("CARGO_PKG_VERSION"), "rmtlab-core": rmtlab_core::VERSION },
    });
    match cfg.format {
        Format::Json => {
            let mut doc = Map::new();
            doc.insert("meta".into(), meta);
            match artifact.report {
                Value::Object(fields) => doc.extend(fields),
                other => {
                    doc.insert("report".into(), other);
                }
            }
            write_json(open_output(cfg.out.as_deref())?, &Value::Object(doc))?;
        }
        Format::Csv => {
            let mut w = open_output(cfg.out.as_deref())?;
            w.write_all(&artifact.csv)?;
            w.flush()?;
            if let Some(out) = &cfg.out {
                write_json(open_output(Some(&meta_path(out)))?, &meta)?;
            }
        }
    }
    // elapsed time stays out of the artifacts so reruns are byte-identical
    log::info!("{} finished in {:.3} s", cfg.command, start.elapsed().as_secs_f64());
    Ok(())
}

#[derive(Serialize)]
struct DensityRow {
    lambda: f64,
    rho: f64,
    converged: bool,
    disagreement: f64,
}

fn density(cfg: &RunConfig) -> Result<Artifact> {
    let sigma = cfg.sigma_measure()?;
    let etas = schedule(cfg.eta);
    let (lo, hi) = spectral_bracket(&sigma);
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
    let (a, b) = (lo - pad, hi + pad);
    let mut rows = Vec::with_capacity(DENSITY_POINTS);
    for k in 0..DENSITY_POINTS {
        let lambda = a + (b - a) * k as f64 / (DENSITY_POINTS - 1) as f64;
        let est = density_estimate(lambda, &sigma, &etas)?;
        rows.push(DensityRow {
            lambda,
            rho: est.value,
            converged: est.converged,
            disagreement: est.disagreement,
        });
    }
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        log::warn!("{unconverged} density points did not settle under extrapolation");
    }
    let points: Vec<DensityPoint> = rows.iter().map(|r| DensityPoint { lambda: r.lambda, rho: r.rho }).collect();
    Ok(Artifact {
        report: json!({
            "sigma": sigma.spec_string(),
            "c": sigma.c(),
            "atom_at_zero": atom_at_zero(&sigma),
            "eta_schedule": etas,
            "unconverged": unconverged,
            "points": rows,
        }),
        csv: csv_bytes(&points)?,
    })
}

fn spectrum(cfg: &RunConfig) -> Result<Artifact> {
    let exp = cfg.experiment()?;
    let spectra = simulate_spectra(&exp)?;
    let report = esd_from_spectra(&exp, &spectra, DEFAULT_BINS)?;
    Ok(Artifact {
        csv: csv_bytes(&report.histogram)?,
        report: serde_json::to_value(&report)?,
    })
}

#[derive(Serialize)]
struct ValueRow {
    replicate: usize,
    value: f64,
}

fn clt(cfg: &RunConfig) -> Result<Artifact> {
    let exp = cfg.experiment()?;
    let phi = cfg.test_function()?;
    let spectra = simulate_spectra(&exp)?;
    let predicted = predicted_variance(&exp.law, &exp.sigma, &phi, &variance_settings(cfg.eta))?;
    for flag in &predicted.flags {
        log::warn!("variance limit: {flag}");
    }
    let mut report = clt_from_spectra(&exp, &phi, &spectra, predicted.v, true)?;
    let values = report.values.take().unwrap_or_default();
    let rows: Vec<ValueRow> = values
        .into_iter()
        .enumerate()
        .map(|(replicate, value)| ValueRow { replicate, value })
        .collect();
    Ok(Artifact {
        csv: csv_bytes(&rows)?,
        report: serde_json::to_value(&report)?,
    })
}

#[derive(Serialize)]
struct GammaRow {
    replicate: usize,
    re_gamma_z1: f64,
    im_gamma_z1: f64,
    re_gamma_z2: f64,
    im_gamma_z2: f64,
}

fn cov(cfg: &RunConfig) -> Result<Artifact> {
    let exp = cfg.experiment()?;
    let spectra = simulate_spectra(&exp)?;
    let report = cov_from_spectra(&exp, &spectra, cfg.z1, cfg.z2)?;
    let mut rows = Vec::with_capacity(spectra.len());
    for (replicate, s) in spectra.iter().enumerate() {
        let g1 = resolvent_trace(s, cfg.z1)?;
        let g2 = resolvent_trace(s, cfg.z2)?;
        rows.push(GammaRow {
            replicate,
            re_gamma_z1: g1.re,
            im_gamma_z1: g1.im,
            re_gamma_z2: g2.re,
            im_gamma_z2: g2.im,
        });
    }
    Ok(Artifact {
        csv: csv_bytes(&rows)?,
        report: serde_json::to_value(&report)?,
    })
}

fn moments(cfg: &RunConfig) -> Result<Artifact> {
    let law = cfg.vector_law()?;
    let report = run_moment_check(&law, &DEFAULT_LADDER, cfg.replicates, cfg.seed, cfg.jobs)?;
    Ok(Artifact {
        csv: csv_bytes(&report.rows)?,
        report: serde_json::to_value(&report)?,
    })
}

fn variance(cfg: &RunConfig) -> Result<Artifact> {
    let law = cfg.vector_law()?;
    let report = predicted_variance(&law, &cfg.sigma_measure()?, &cfg.test_function()?, &variance_settings(cfg.eta))?;
    for flag in &report.flags {
        log::warn!("variance limit: {flag}");
    }
    Ok(Artifact {
        csv: csv_bytes(&report.v_eta)?,
        report: serde_json::to_value(&report)?,
    })
}

#[derive(Serialize)]
struct NormRow {
    phi: String,
    s: f64,
    norm: f64,
}

fn norm(cfg: &RunConfig) -> Result<Artifact> {
    let phi = cfg.test_function()?;
    let s = 2.0 + cfg.delta;
    let row = NormRow {
        phi: phi.label(),
        s,
        norm: sobolev_norm(&phi, s)?,
    };
    Ok(Artifact {
        csv: csv_bytes(std::slice::from_ref(&row))?,
        report: serde_json::to_value(&row)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples_parse() {
        let cli = Cli::try_parse_from([
            "rmtlab", "clt", "--law", "iid:gaussian", "--sigma", "1:1", "--c", "1", "--n", "512", "--R", "800",
        ])
        .unwrap();
        let cfg = cli.run_config().unwrap();
        assert_eq!(cfg.command, Command::Clt);
        assert_eq!((cfg.n, cfg.m, cfg.replicates), (512, 512, 800));

        let cli = Cli::try_parse_from(["rmtlab", "density", "--sigma", "1:0.5,2:0.5", "--c", "0.5"]).unwrap();
        let sigma = cli.run_config().unwrap().sigma_measure().unwrap();
        assert_eq!(sigma.atoms().len(), 2);

        let cli = Cli::try_parse_from(["rmtlab", "clt", "--law", "lpball:0"]).unwrap();
        assert_eq!(cli.run_config().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn negative_spectral_parameters() {
        let cli = Cli::try_parse_from(["rmtlab", "cov", "--z1", "-1-i", "--z2", "0.5,-2"]).unwrap();
        assert_eq!(cli.z1, Some(Complex64::new(-1.0, -1.0)));
        assert_eq!(cli.z2, Some(Complex64::new(0.5, -2.0)));
    }

    #[test]
    fn unknown_command_is_usage_error() {
        assert_eq!(run(["rmtlab", "frobnicate"]), 1);
        assert_eq!(run(["rmtlab", "--n", "4"]), 1);
    }
}
