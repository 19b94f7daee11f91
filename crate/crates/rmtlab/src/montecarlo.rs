//! Replicated experiments over the rank-one ensemble.
//!
//! Replicate `r` always draws from `replicate_rng(seed, r)` and results are
//! gathered in replicate order, so every report is bit-identical for any
//! worker count.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rmtlab_core::ensemble::{
    add_rank_one, empirical_cdf, g_diag, linear_statistic, make_taus, mirror_upper, resolvent_trace,
};
use rmtlab_core::linalg::{symmetric_eigenvalues, RealMatrix};
use rmtlab_core::mp::{solve_f, LimitCdf};
use rmtlab_core::rng::{replicate_rng, replicate_seed};
use rmtlab_core::stats::{jackknife_variance_se, ks_distance, ks_pvalue, ks_standard_normal, mean, moments};
use rmtlab_core::variance::{cov_kernel, sobolev_norm, variance_limit, VarianceReport, VarianceSettings};
use rmtlab_core::vectors::{estimate_moments, quadratic_form_variance};
use rmtlab_core::{Complex64, SigmaMeasure, SpectralSample, TestFunction, VectorLaw};

use crate::error::{Error, Result};

/// Relative tolerance of `m/n` against `c`.
pub const RATIO_TOLERANCE: f64 = 0.2;
/// Eigenvalues with `|λ| ≤ ZERO_SNAP · max|λ|` count as exact zeros in the
/// ESD comparison, where the limit may carry an atom at 0.
pub const ZERO_SNAP: f64 = 1e-9;

/// `m = round(c n)`, at least 1.
pub fn default_m(n: usize, c: f64) -> usize {
    ((c * n as f64).round() as usize).max(1)
}

/// `|m/n - c| ≤ 0.2 c + 1/n`; the `1/n` slack admits the rounding of
/// `c n` and the `c = 0` case with a single vector.
pub fn ratio_consistent(n: usize, m: usize, c: f64) -> bool {
    let nf = n as f64;
    (m as f64 / nf - c).abs() <= RATIO_TOLERANCE * c + 1.0 / nf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub law: VectorLaw,
    pub sigma: SigmaMeasure,
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Worker threads; does not affect results.
    #[serde(skip)]
    pub jobs: usize,
}

impl ExperimentConfig {
    /// `m = None` derives `m` from `σ.c`.
    pub fn new(
        law: VectorLaw,
        sigma: SigmaMeasure,
        n: usize,
        m: Option<usize>,
        replicates: usize,
        seed: u64,
    ) -> Result<Self> {
        law.validate()?;
        if n == 0 {
            return Err(Error::Usage("n must be at least 1".into()));
        }
        if replicates < 2 {
            return Err(Error::Usage("at least 2 replicates are needed".into()));
        }
        let m = m.unwrap_or_else(|| default_m(n, sigma.c()));
        if m == 0 {
            return Err(Error::Usage("m must be at least 1".into()));
        }
        if !ratio_consistent(n, m, sigma.c()) {
            return Err(Error::Usage(format!(
                "m/n = {m}/{n} is inconsistent with c = {}",
                sigma.c()
            )));
        }
        Ok(Self {
            law,
            sigma,
            n,
            m,
            replicates,
            seed,
            jobs: 1,
        })
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }

    pub fn taus(&self) -> Result<Vec<f64>> {
        Ok(make_taus(&self.sigma, self.m)?)
    }
}

/// Runs `work(r)` for `r = 0..replicates` on `jobs` threads and returns the
/// results in replicate order.
pub fn run_replicates<T, F>(replicates: usize, jobs: usize, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Pool(e.to_string()))?;
    let done = AtomicUsize::new(0);
    let batch = (replicates / 10).max(1);
    pool.install(|| {
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                let out = work(r as u64);
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if k % batch == 0 || k == replicates {
                    log::info!("{k}/{replicates} replicates");
                }
                out
            })
            .collect()
    })
}

/// One realization of `M` together with `Σ τ_α ‖y_α‖²` accumulated from the
/// vectors themselves.
pub fn simulate_matrix(cfg: &ExperimentConfig, taus: &[f64], replicate: u64) -> Result<(RealMatrix, f64)> {
    let mut rng = replicate_rng(cfg.seed, replicate);
    let mut m = RealMatrix::zeros(cfg.n, cfg.n);
    let mut y = vec![0.0; cfg.n];
    let mut trace = 0.0;
    for &tau in taus {
        cfg.law.sample_into(&mut y, &mut rng)?;
        trace += tau * y.iter().map(|v| v * v).sum::<f64>();
        add_rank_one(&mut m, tau, &y)?;
    }
    mirror_upper(&mut m);
    Ok((m, trace))
}

/// `Tr M = Σ τ_α ‖y_α‖²` per replicate, from the same streams as
/// [`simulate_spectra`] but without forming `M`.
pub fn simulate_traces(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let taus = cfg.taus()?;
    run_replicates(cfg.replicates, cfg.jobs, |r| {
        let mut rng = replicate_rng(cfg.seed, r);
        let mut y = vec![0.0; cfg.n];
        let mut trace = 0.0;
        for &tau in &taus {
            cfg.law.sample_into(&mut y, &mut rng)?;
            trace += tau * y.iter().map(|v| v * v).sum::<f64>();
        }
        Ok(trace)
    })
}

pub fn simulate_spectra(cfg: &ExperimentConfig) -> Result<Vec<SpectralSample>> {
    let taus = cfg.taus()?;
    let law = cfg.law.to_string();
    let tau = cfg.sigma.spec_string();
    run_replicates(cfg.replicates, cfg.jobs, |r| {
        let (m, _) = simulate_matrix(cfg, &taus, r)?;
        Ok(SpectralSample::from_matrix(
            &m,
            cfg.m,
            replicate_seed(cfg.seed, r),
            law.clone(),
            tau.clone(),
        )?)
    })
}

// ---------------------------------------------------------------------------
// Empirical spectral distribution

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayBin {
    pub lo: f64,
    pub hi: f64,
    /// Fraction of pooled eigenvalues in the bin.
    pub empirical: f64,
    /// Limit-measure mass of the bin.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsdReport {
    pub law: String,
    pub sigma: String,
    pub c: f64,
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub seed: u64,
    pub pooled: usize,
    pub ks_distance: f64,
    pub atom_mass: f64,
    /// Fraction of pooled eigenvalues snapped to 0.
    pub zero_fraction: f64,
    pub histogram: Vec<OverlayBin>,
}

pub const DEFAULT_BINS: usize = 50;

pub fn run_esd(cfg: &ExperimentConfig, bins: usize) -> Result<EsdReport> {
    let spectra = simulate_spectra(cfg)?;
    esd_from_spectra(cfg, &spectra, bins)
}

/// Pools the spectra and compares them with the limit measure.
pub fn esd_from_spectra(cfg: &ExperimentConfig, spectra: &[SpectralSample], bins: usize) -> Result<EsdReport> {
    if bins == 0 {
        return Err(Error::Usage("bins must be at least 1".into()));
    }
    let mut pooled: Vec<f64> = spectra.iter().flat_map(|s| s.eigenvalues.iter().copied()).collect();
    if pooled.is_empty() {
        return Err(Error::Usage("no eigenvalues to pool".into()));
    }
    let scale = pooled.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut zeros = 0usize;
    for v in pooled.iter_mut() {
        if v.abs() <= ZERO_SNAP * scale {
            *v = 0.0;
            zeros += 1;
        }
    }
    pooled.sort_by(f64::total_cmp);
    let limit = LimitCdf::new(&cfg.sigma)?;
    let ks = ks_distance(&pooled, |x| limit.cdf(x), |x| limit.cdf_left(x));

    let (_, hi_bracket) = rmtlab_core::mp::spectral_bracket(&cfg.sigma);
    let lo = pooled[0].min(0.0);
    let hi = pooled[pooled.len() - 1].max(hi_bracket);
    let width = (hi - lo) / bins as f64;
    let sample = SpectralSample::from_eigenvalues(pooled.clone());
    let ecdf = empirical_cdf(&sample);
    let histogram = (0..bins)
        .map(|k| {
            let a = lo + k as f64 * width;
            let b = if k + 1 == bins { hi } else { a + width };
            let last = k + 1 == bins;
            let (empirical, lim) = if last {
                (ecdf.mass(a, b), limit.cdf(b) - limit.cdf_left(a))
            } else {
                (ecdf.mass(a, b) - ecdf.mass(b, b), limit.cdf_left(b) - limit.cdf_left(a))
            };
            OverlayBin {
                lo: a,
                hi: b,
                empirical,
                limit: lim,
            }
        })
        .collect();
    Ok(EsdReport {
        law: cfg.law.to_string(),
        sigma: cfg.sigma.spec_string(),
        c: cfg.sigma.c(),
        n: cfg.n,
        m: cfg.m,
        replicates: spectra.len(),
        seed: cfg.seed,
        pooled: pooled.len(),
        ks_distance: ks,
        atom_mass: limit.atom(),
        zero_fraction: zeros as f64 / pooled.len() as f64,
        histogram,
    })
}

// ---------------------------------------------------------------------------
// CLT for linear statistics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub law: String,
    pub sigma: String,
    pub c: f64,
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub seed: u64,
    pub phi: String,
    pub a: f64,
    pub b: f64,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub sample_variance_se: f64,
    pub predicted_variance: f64,
    /// `(sample - predicted)/predicted`; absent when the prediction is 0.
    pub relative_error: Option<f64>,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// KS distance of standardized replicates to `N(0, 1)`; absent for a
    /// degenerate sample.
    pub ks_statistic: Option<f64>,
    pub ks_pvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub values: Option<Vec<f64>>,
}

/// `N_n[φ]` per replicate.
pub fn linear_statistics(spectra: &[SpectralSample], phi: &TestFunction) -> Result<Vec<f64>> {
    spectra
        .iter()
        .map(|s| linear_statistic(s, phi).map_err(Error::from))
        .collect()
}

/// Limit variance of `N_n°[φ]` for the law's `(a, b)`.
pub fn predicted_variance(
    law: &VectorLaw,
    sigma: &SigmaMeasure,
    phi: &TestFunction,
    settings: &VarianceSettings,
) -> Result<VarianceReport> {
    let profile = law.moment_profile()?;
    Ok(variance_limit(phi, sigma, profile.a, profile.b, settings)?)
}

pub fn run_clt(
    cfg: &ExperimentConfig,
    phi: &TestFunction,
    settings: &VarianceSettings,
    keep_values: bool,
) -> Result<CltReport> {
    let spectra = simulate_spectra(cfg)?;
    let predicted = predicted_variance(&cfg.law, &cfg.sigma, phi, settings)?.v;
    clt_from_spectra(cfg, phi, &spectra, predicted, keep_values)
}

/// Replicate statistics against a given prediction; centering is by the
/// replicate mean.
pub fn clt_from_spectra(
    cfg: &ExperimentConfig,
    phi: &TestFunction,
    spectra: &[SpectralSample],
    predicted: f64,
    keep_values: bool,
) -> Result<CltReport> {
    let values = linear_statistics(spectra, phi)?;
    let profile = cfg.law.moment_profile()?;
    let mo = moments(&values);
    let (ks_statistic, ks_p) = if mo.variance > 0.0 {
        let sd = mo.variance.sqrt();
        let z: Vec<f64> = values.iter().map(|v| (v - mo.mean) / sd).collect();
        let d = ks_standard_normal(&z);
        (Some(d), Some(ks_pvalue(d, z.len())))
    } else {
        (None, None)
    };
    Ok(CltReport {
        law: cfg.law.to_string(),
        sigma: cfg.sigma.spec_string(),
        c: cfg.sigma.c(),
        n: cfg.n,
        m: cfg.m,
        replicates: values.len(),
        seed: cfg.seed,
        phi: phi.label(),
        a: profile.a,
        b: profile.b,
        sample_mean: mo.mean,
        sample_variance: mo.variance,
        sample_variance_se: if mo.variance > 0.0 { mo.variance_se } else { 0.0 },
        predicted_variance: predicted,
        relative_error: (predicted != 0.0).then(|| (mo.variance - predicted) / predicted),
        skewness: mo.skewness,
        excess_kurtosis: mo.excess_kurtosis,
        ks_statistic,
        ks_pvalue: ks_p,
        values: keep_values.then_some(values),
    })
}

// ---------------------------------------------------------------------------
// Exact variance of the trace

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub law: String,
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    /// `Σ τ_α² Var‖y‖²` from the exact quadratic-form variance with `A = I`.
    pub exact_variance: f64,
    pub sample_variance: f64,
    pub sample_variance_se: f64,
    /// `(sample - exact) / se`.
    pub z_score: f64,
}

/// `Var{Tr M}` exactly and from replicates of `Σ τ_α ‖y_α‖²`.
pub fn run_trace_check(cfg: &ExperimentConfig) -> Result<TraceReport> {
    let traces = simulate_traces(cfg)?;
    let identity = RealMatrix::identity(cfg.n).to_complex();
    let per_vector = quadratic_form_variance(&identity, &cfg.law.moment_profile()?)?;
    let taus = cfg.taus()?;
    let exact = per_vector * taus.iter().map(|t| t * t).sum::<f64>();
    let mo = moments(&traces);
    let se = jackknife_variance_se(&traces);
    Ok(TraceReport {
        law: cfg.law.to_string(),
        n: cfg.n,
        m: cfg.m,
        replicates: traces.len(),
        exact_variance: exact,
        sample_variance: mo.variance,
        sample_variance_se: se,
        z_score: if se > 0.0 { (mo.variance - exact) / se } else { 0.0 },
    })
}

// ---------------------------------------------------------------------------
// Resolvent-trace covariance

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovReport {
    pub law: String,
    pub sigma: String,
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub seed: u64,
    pub z1: Complex64,
    pub z2: Complex64,
    pub mean_gamma_z1: Complex64,
    pub mean_gamma_z2: Complex64,
    /// Replicate estimate of `E{γ°(z1) γ(z2)}`.
    pub empirical: Complex64,
    pub empirical_se_re: f64,
    pub empirical_se_im: f64,
    pub predicted: Complex64,
    pub diff_re: f64,
    pub diff_im: f64,
    /// Both components within 4 standard errors (plus a `1e-9` floor).
    pub within_4se: bool,
    /// Eigenvalues of the covariance of `(Re γ(z1), Im γ(z1), Re γ(z2), Im γ(z2))`.
    pub covariance_eigenvalues: Vec<f64>,
    pub covariance_psd: bool,
}

pub fn run_cov(cfg: &ExperimentConfig, z1: Complex64, z2: Complex64) -> Result<CovReport> {
    let spectra = simulate_spectra(cfg)?;
    cov_from_spectra(cfg, &spectra, z1, z2)
}

pub fn cov_from_spectra(
    cfg: &ExperimentConfig,
    spectra: &[SpectralSample],
    z1: Complex64,
    z2: Complex64,
) -> Result<CovReport> {
    let g1: Vec<Complex64> = spectra
        .iter()
        .map(|s| resolvent_trace(s, z1))
        .collect::<rmtlab_core::Result<_>>()?;
    let g2: Vec<Complex64> = spectra
        .iter()
        .map(|s| resolvent_trace(s, z2))
        .collect::<rmtlab_core::Result<_>>()?;
    let r = g1.len();
    if r < 2 {
        return Err(Error::Usage("at least 2 replicates are needed".into()));
    }
    let rf = r as f64;
    let m1: Complex64 = g1.iter().sum::<Complex64>() / rf;
    let m2: Complex64 = g2.iter().sum::<Complex64>() / rf;
    let products: Vec<Complex64> = g1.iter().zip(&g2).map(|(a, b)| (a - m1) * (b - m2)).collect();
    let empirical = products.iter().sum::<Complex64>() / (rf - 1.0);
    let re: Vec<f64> = products.iter().map(|p| p.re).collect();
    let im: Vec<f64> = products.iter().map(|p| p.im).collect();
    let se = |xs: &[f64]| {
        let mu = mean(xs);
        (xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (rf - 1.0) / rf).sqrt() * rf / (rf - 1.0)
    };
    let (se_re, se_im) = (se(&re), se(&im));
    let profile = cfg.law.moment_profile()?;
    let predicted = cov_kernel(z1, z2, &cfg.sigma, profile.a, profile.b)?;
    let diff = empirical - predicted;
    let floor = 1e-9 * predicted.norm().max(1.0);
    let within = diff.re.abs() <= 4.0 * se_re + floor && diff.im.abs() <= 4.0 * se_im + floor;

    let parts: Vec<[f64; 4]> = g1.iter().zip(&g2).map(|(a, b)| [a.re, a.im, b.re, b.im]).collect();
    let mut means = [0.0; 4];
    for p in &parts {
        for k in 0..4 {
            means[k] += p[k] / rf;
        }
    }
    let cov = RealMatrix::from_fn(4, 4, |i, j| {
        parts.iter().map(|p| (p[i] - means[i]) * (p[j] - means[j])).sum::<f64>() / (rf - 1.0)
    });
    let eig = symmetric_eigenvalues(&cov)?;
    let top = eig.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let psd = eig.iter().all(|&v| v >= -1e-9 * top.max(1e-300));
    Ok(CovReport {
        law: cfg.law.to_string(),
        sigma: cfg.sigma.spec_string(),
        n: cfg.n,
        m: cfg.m,
        replicates: r,
        seed: cfg.seed,
        z1,
        z2,
        mean_gamma_z1: m1,
        mean_gamma_z2: m2,
        empirical,
        empirical_se_re: se_re,
        empirical_se_im: se_im,
        predicted,
        diff_re: diff.re,
        diff_im: diff.im,
        within_4se: within,
        covariance_eigenvalues: eig,
        covariance_psd: psd,
    })
}

// ---------------------------------------------------------------------------
// Moment constants

pub const DEFAULT_LADDER: [usize; 3] = [16, 64, 256];
pub const MIN_MOMENT_REPLICATES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub n: usize,
    pub replicates: usize,
    pub a22: f64,
    pub a22_se: f64,
    pub a22_exact: f64,
    pub kappa4: f64,
    pub kappa4_se: f64,
    pub kappa4_exact: f64,
    /// `n³ (a22 - n⁻²)` from the estimate.
    pub a_hat: f64,
    pub a_hat_se: f64,
    /// `n³ (a22_exact - n⁻²)`.
    pub a_exact_n: f64,
    /// `n² κ4` from the estimate.
    pub b_hat: f64,
    pub b_hat_se: f64,
    pub b_exact_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub law: String,
    pub seed: u64,
    /// Limiting coefficients of the law.
    pub a: f64,
    pub b: f64,
    pub rows: Vec<MomentRow>,
}

/// Moment estimates across a dimension ladder; rung `k` uses stream `k`.
pub fn run_moment_check(
    law: &VectorLaw,
    ladder: &[usize],
    replicates: usize,
    seed: u64,
    jobs: usize,
) -> Result<MomentReport> {
    if replicates < MIN_MOMENT_REPLICATES {
        return Err(Error::Usage(format!(
            "moment checks need at least {MIN_MOMENT_REPLICATES} replicates"
        )));
    }
    let profile = law.moment_profile()?;
    let rows = run_replicates(ladder.len(), jobs, |k| {
        let n = ladder[k as usize];
        let mut rng = replicate_rng(seed, k);
        let est = estimate_moments(law, n, replicates, &mut rng)?;
        let nf = n as f64;
        let (n2, n3) = (nf * nf, nf * nf * nf);
        let a22_exact = profile.a22_exact(n);
        let kappa4_exact = profile.kappa4_exact(n);
        Ok(MomentRow {
            n,
            replicates,
            a22: est.a22,
            a22_se: est.a22_se,
            a22_exact,
            kappa4: est.kappa4,
            kappa4_se: est.kappa4_se,
            kappa4_exact,
            a_hat: n3 * (est.a22 - 1.0 / n2),
            a_hat_se: n3 * est.a22_se,
            a_exact_n: n3 * (a22_exact - 1.0 / n2),
            b_hat: n2 * est.kappa4,
            b_hat_se: n2 * est.kappa4_se,
            b_exact_n: n2 * kappa4_exact,
        })
    })?;
    Ok(MomentReport {
        law: law.to_string(),
        seed,
        a: profile.a,
        b: profile.b,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Quadratic forms

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFormReport {
    pub law: String,
    pub n: usize,
    pub replicates: usize,
    pub exact_variance: f64,
    pub sample_variance: f64,
    pub sample_variance_se: f64,
}

impl QuadraticFormReport {
    /// `|sample - exact| ≤ k · se`, with a `1e-9` floor for degenerate forms.
    pub fn within(&self, k: f64) -> bool {
        (self.sample_variance - self.exact_variance).abs()
            <= k * self.sample_variance_se + 1e-9 * self.exact_variance.abs().max(1.0)
    }
}

/// Exact `Var (Ay, y)` against `replicates` draws of `(Ay, y)`.
pub fn quadratic_form_check(
    law: &VectorLaw,
    a: &RealMatrix,
    replicates: usize,
    seed: u64,
) -> Result<QuadraticFormReport> {
    let n = a.rows();
    let exact = quadratic_form_variance(&a.to_complex(), &law.moment_profile()?)?;
    let mut rng = replicate_rng(seed, 0);
    let mut y = vec![0.0; n];
    let mut forms = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        law.sample_into(&mut y, &mut rng)?;
        let ay = a.mat_vec(&y);
        forms.push(ay.iter().zip(&y).map(|(u, v)| u * v).sum::<f64>());
    }
    let mo = moments(&forms);
    Ok(QuadraticFormReport {
        law: law.to_string(),
        n,
        replicates,
        exact_variance: exact,
        sample_variance: mo.variance,
        sample_variance_se: if mo.variance > 0.0 { mo.variance_se } else { 0.0 },
    })
}

// ---------------------------------------------------------------------------
// Variance bound

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub variance: f64,
    pub variance_se: f64,
    /// `variance / ‖φ‖²_{2+δ}`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub phi: String,
    pub delta: f64,
    pub norm: f64,
    pub rows: Vec<BoundRow>,
    /// `max ratio / min ratio`.
    pub spread: f64,
}

pub fn bound_row(cfg: &ExperimentConfig, spectra: &[SpectralSample], phi: &TestFunction, norm: f64) -> Result<BoundRow> {
    if norm == 0.0 {
        return Err(rmtlab_core::Error::ZeroNorm.into());
    }
    let values = linear_statistics(spectra, phi)?;
    let mo = moments(&values);
    Ok(BoundRow {
        n: cfg.n,
        m: cfg.m,
        replicates: values.len(),
        variance: mo.variance,
        variance_se: mo.variance_se,
        ratio: mo.variance / (norm * norm),
    })
}

pub fn bound_report(phi: &TestFunction, delta: f64, norm: f64, rows: Vec<BoundRow>) -> BoundReport {
    let max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    BoundReport {
        phi: phi.label(),
        delta,
        norm,
        rows,
        spread: max / min,
    }
}

/// `Var{N_n[φ]} / ‖φ‖²_{2+δ}` across dimensions, with `m = round(c n)`.
pub fn run_variance_bound(
    base: &ExperimentConfig,
    dims: &[usize],
    phi: &TestFunction,
    delta: f64,
) -> Result<BoundReport> {
    let norm = sobolev_norm(phi, 2.0 + delta)?;
    let mut rows = Vec::with_capacity(dims.len());
    for &n in dims {
        let cfg = ExperimentConfig::new(base.law, base.sigma.clone(), n, None, base.replicates, base.seed)?
            .with_jobs(base.jobs);
        let spectra = simulate_spectra(&cfg)?;
        rows.push(bound_row(&cfg, &spectra, phi, norm)?);
    }
    Ok(bound_report(phi, delta, norm, rows))
}

// ---------------------------------------------------------------------------
// Diagonal resolvent products

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GDiagReport {
    pub n: usize,
    pub m: usize,
    pub replicates: usize,
    pub z1: Complex64,
    pub z2: Complex64,
    pub values: Vec<Complex64>,
    pub mean: Complex64,
    /// `f(z1) f(z2)`.
    pub limit: Complex64,
    /// `|mean - limit|`.
    pub distance: f64,
}

pub fn run_g_diag(cfg: &ExperimentConfig, z1: Complex64, z2: Complex64) -> Result<GDiagReport> {
    let taus = cfg.taus()?;
    let values = run_replicates(cfg.replicates, cfg.jobs, |r| {
        let (m, _) = simulate_matrix(cfg, &taus, r)?;
        Ok(g_diag(&m, z1, z2)?)
    })?;
    let mean = values.iter().sum::<Complex64>() / values.len() as f64;
    let limit = solve_f(z1, &cfg.sigma)?.f * solve_f(z2, &cfg.sigma)?.f;
    Ok(GDiagReport {
        n: cfg.n,
        m: cfg.m,
        replicates: values.len(),
        z1,
        z2,
        distance: (mean - limit).norm(),
        values,
        mean,
        limit,
    })
}
