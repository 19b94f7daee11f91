//! The rank-one ensemble `M = Σ_α τ_α y_α y_αᵀ` and statistics of its
//! spectrum.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen, RealMatrix};

/// Tolerance on `Σ w_i = 1`.
const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Discrete limiting distribution `σ` of the weights `τ_α`, together with
/// the aspect ratio `c = lim m/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaMeasure {
    atoms: Vec<(f64, f64)>,
    c: f64,
}

impl SigmaMeasure {
    /// `atoms` are `(τ_i, w_i)` pairs; they are stored sorted by `τ`.
    pub fn new(mut atoms: Vec<(f64, f64)>, c: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("sigma has no atoms".into()));
        }
        for &(tau, w) in &atoms {
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(Error::InvalidParameter(format!("atom location {tau} must be >= 0")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!("atom weight {w} must be > 0")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter(format!("sigma weights sum to {total}, not 1")));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidParameter(format!("ratio c = {c} must be >= 0")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { atoms, c })
    }

    /// `δ_τ` with ratio `c`.
    pub fn point_mass(tau: f64, c: f64) -> Result<Self> {
        Self::new(vec![(tau, 1.0)], c)
    }

    /// Parses `"τ:w,τ:w,…"`.
    pub fn parse(spec: &str, c: f64) -> Result<Self> {
        let mut atoms = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (t, w) = part
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("sigma atom '{part}' is not 'tau:weight'")))?;
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad tau in '{part}'")))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad weight in '{part}'")))?;
            atoms.push((t, w));
        }
        Self::new(atoms, c)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn with_c(&self, c: f64) -> Result<Self> {
        Self::new(self.atoms.clone(), c)
    }

    /// `∫ τ^k dσ`.
    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|&(t, w)| w * t.powi(k)).sum()
    }

    pub fn tau_min(&self) -> f64 {
        self.atoms[0].0
    }

    pub fn tau_max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// Mass of `σ` at `τ = 0`.
    pub fn zero_weight(&self) -> f64 {
        self.atoms.iter().filter(|a| a.0 == 0.0).map(|a| a.1).sum()
    }

    /// The single atom location, if `σ` is a point mass.
    pub fn single_atom(&self) -> Option<f64> {
        match self.atoms.as_slice() {
            [(t, _)] => Some(*t),
            _ => None,
        }
    }

    /// Compact `"τ:w,…"` description.
    pub fn spec_string(&self) -> String {
        let parts: Vec<String> = self.atoms.iter().map(|(t, w)| format!("{t}:{w}")).collect();
        parts.join(",")
    }
}

/// `τ_α = Q_σ((α - ½)/m)` for `α = 1..m`, where `Q_σ(u)` is the smallest
/// atom whose cumulative weight reaches `u` (left-closed atoms).
pub fn make_taus(sigma: &SigmaMeasure, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidDimension("m must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(sigma.atoms.len());
    let mut acc = 0.0;
    for &(t, w) in &sigma.atoms {
        acc += w;
        cumulative.push((t, acc));
    }
    let last = sigma.atoms[sigma.atoms.len() - 1].0;
    Ok((1..=m)
        .map(|alpha| {
            let u = (alpha as f64 - 0.5) / m as f64;
            cumulative
                .iter()
                .find(|&&(_, f)| u <= f + 1e-12)
                .map_or(last, |&(t, _)| t)
        })
        .collect())
}

/// `M = Σ_α τ_α y_α y_αᵀ`.
///
/// Only the upper triangle is accumulated and then mirrored, so the result
/// is exactly symmetric.
pub fn assemble<V: AsRef<[f64]>>(taus: &[f64], vectors: &[V]) -> Result<RealMatrix> {
    if taus.len() != vectors.len() {
        return Err(Error::DimensionMismatch {
            expected: taus.len(),
            found: vectors.len(),
        });
    }
    let n = vectors.first().map_or(0, |v| v.as_ref().len());
    if n == 0 {
        return Err(Error::InvalidDimension("need at least one non-empty vector".into()));
    }
    let mut m = RealMatrix::zeros(n, n);
    for (&tau, y) in taus.iter().zip(vectors) {
        add_rank_one(&mut m, tau, y.as_ref())?;
    }
    mirror_upper(&mut m);
    Ok(m)
}

/// Adds `τ y yᵀ` to the upper triangle of `m`; finish with
/// [`mirror_upper`].
pub fn add_rank_one(m: &mut RealMatrix, tau: f64, y: &[f64]) -> Result<()> {
    let n = m.require_square()?;
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if tau == 0.0 {
        return Ok(());
    }
    for i in 0..n {
        let t = tau * y[i];
        let row = &mut m.row_mut(i)[i..];
        for (mij, &yj) in row.iter_mut().zip(&y[i..]) {
            *mij += t * yj;
        }
    }
    Ok(())
}

/// Copies the upper triangle onto the lower one.
pub fn mirror_upper(m: &mut RealMatrix) {
    let n = m.rows().min(m.cols());
    for i in 0..n {
        for j in 0..i {
            let v = m.get(j, i);
            m.set(i, j, v);
        }
    }
}

/// Eigenvalues of one realization of `M` plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub law: String,
    pub tau: String,
}

impl SpectralSample {
    /// Wraps eigenvalues, sorting them.
    pub fn new(
        mut eigenvalues: Vec<f64>,
        m: usize,
        seed: u64,
        law: impl Into<String>,
        tau: impl Into<String>,
    ) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self {
            n: eigenvalues.len(),
            eigenvalues,
            m,
            seed,
            law: law.into(),
            tau: tau.into(),
        }
    }

    /// Decomposes `matrix` and records the spectrum.
    pub fn from_matrix(
        matrix: &RealMatrix,
        m: usize,
        seed: u64,
        law: impl Into<String>,
        tau: impl Into<String>,
    ) -> Result<Self> {
        let values = symmetric_eigen(matrix, false)?.values;
        Ok(Self::new(values, m, seed, law, tau))
    }

    /// Unlabelled sample, mostly for tests.
    pub fn from_eigenvalues(eigenvalues: Vec<f64>) -> Self {
        Self::new(eigenvalues, 0, 0, "", "")
    }
}

/// Fourier grid used when a test function is transformed numerically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierGrid {
    /// The grid covers `[-extent, extent)`.
    pub extent: f64,
    /// Requested spacing; rounded so the point count is a power of two.
    pub step: f64,
}

impl Default for FourierGrid {
    fn default() -> Self {
        Self {
            extent: 32.0,
            step: 1.0 / 32.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TestFunctionKind {
    /// `Σ_k c_k λ^k`, degree at most 4.
    Poly(Vec<f64>),
    /// `exp(-t λ)`.
    Exp(f64),
    /// `exp(-(λ - center)² / (2 width²))`.
    Bump { center: f64, width: f64 },
}

/// Maximum supported polynomial degree.
pub const MAX_POLY_DEGREE: usize = 4;

impl TestFunctionKind {
    fn validate(&self) -> Result<()> {
        match self {
            TestFunctionKind::Poly(c) => {
                if c.is_empty() || c.len() > MAX_POLY_DEGREE + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "polynomial needs 1 to {} coefficients",
                        MAX_POLY_DEGREE + 1
                    )));
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite coefficient".into()));
                }
            }
            TestFunctionKind::Exp(t) if !t.is_finite() => {
                return Err(Error::InvalidParameter("exp rate must be finite".into()));
            }
            TestFunctionKind::Bump { center, width } => {
                if !(center.is_finite() && width.is_finite() && *width > 0.0) {
                    return Err(Error::InvalidParameter("bump needs finite center and width > 0".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for TestFunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunctionKind::Poly(c) => {
                f.write_str("poly:")?;
                for (i, v) in c.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
            TestFunctionKind::Exp(t) => write!(f, "exp:{t}"),
            TestFunctionKind::Bump { center, width } => write!(f, "bump:{center},{width}"),
        }
    }
}

impl FromStr for TestFunctionKind {
    type Err = Error;

    /// `poly:c0,c1,… | exp:t | bump:center,width`
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("test function '{s}' has no ':'")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<core::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("bad number in '{s}'")))?;
        let kind = match (name.trim(), nums.as_slice()) {
            ("poly", _) => TestFunctionKind::Poly(nums),
            ("exp", [t]) => TestFunctionKind::Exp(*t),
            ("bump", [center, width]) => TestFunctionKind::Bump {
                center: *center,
                width: *width,
            },
            _ => return Err(Error::Parse(format!("unknown test function '{s}'"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl From<TestFunctionKind> for String {
    fn from(k: TestFunctionKind) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for TestFunctionKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A test function `φ` for linear statistics `Σ_j φ(λ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: TestFunctionKind,
    #[serde(default)]
    pub grid: FourierGrid,
}

impl TestFunction {
    pub fn new(kind: TestFunctionKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            grid: FourierGrid::default(),
        })
    }

    pub fn with_grid(mut self, grid: FourierGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn poly(coefficients: &[f64]) -> Result<Self> {
        Self::new(TestFunctionKind::Poly(coefficients.to_vec()))
    }

    pub fn exp(t: f64) -> Result<Self> {
        Self::new(TestFunctionKind::Exp(t))
    }

    pub fn bump(center: f64, width: f64) -> Result<Self> {
        Self::new(TestFunctionKind::Bump { center, width })
    }

    pub fn label(&self) -> String {
        self.kind.to_string()
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            TestFunctionKind::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            TestFunctionKind::Exp(t) => (-t * x).exp(),
            TestFunctionKind::Bump { center, width } => {
                let u = (x - center) / width;
                (-0.5 * u * u).exp()
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            TestFunctionKind::Poly(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * x + k as f64 * ck),
            TestFunctionKind::Exp(t) => -t * (-t * x).exp(),
            TestFunctionKind::Bump { center, width } => {
                let u = (x - center) / width;
                -u / width * (-0.5 * u * u).exp()
            }
        }
    }

    /// True when `φ` is constant.
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            TestFunctionKind::Poly(c) => c.iter().skip(1).all(|&v| v == 0.0),
            TestFunctionKind::Exp(t) => *t == 0.0,
            TestFunctionKind::Bump { .. } => false,
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s.parse()?)
    }
}

/// `N_n[φ] = Σ_j φ(λ_j)`, not normalized.
pub fn linear_statistic(sample: &SpectralSample, phi: &TestFunction) -> Result<f64> {
    let mut total = 0.0;
    for &lambda in &sample.eigenvalues {
        let v = phi.eval(lambda);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{} at {lambda}", phi.label())));
        }
        total += v;
    }
    Ok(total)
}

/// Normalized counting measure of a spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    /// `N_n((-∞, x])`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// `N_n([lo, hi])`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if self.sorted.is_empty() || hi < lo {
            return 0.0;
        }
        let below = self.sorted.partition_point(|&v| v < lo);
        let upto = self.sorted.partition_point(|&v| v <= hi);
        (upto - below) as f64 / self.sorted.len() as f64
    }
}

pub fn empirical_cdf(sample: &SpectralSample) -> EmpiricalCdf {
    let mut sorted = sample.eigenvalues.clone();
    sorted.sort_by(f64::total_cmp);
    EmpiricalCdf { sorted }
}

/// Histogram normalized by `n` (each eigenvalue carries mass `1/n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

/// `bins` equal bins on `range`, or on `[λ_min, λ_max]` when `range` is
/// `None`. Values outside the range are not counted; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be at least 1".into()));
    }
    if values.is_empty() {
        return Err(Error::InvalidDimension("empty spectrum".into()));
    }
    let (lo, hi) = range.unwrap_or_else(|| {
        values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    });
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = values.len() as f64;
    Ok(Histogram {
        edges,
        mass: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

pub fn sample_histogram(sample: &SpectralSample, bins: usize) -> Result<Histogram> {
    histogram(&sample.eigenvalues, bins, None)
}

fn require_off_axis(z: Complex64) -> Result<()> {
    if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
        Err(Error::RealSpectralParameter)
    } else {
        Ok(())
    }
}

/// `γ_n(z) = Tr (M - z)⁻¹ = Σ_j 1/(λ_j - z)`.
pub fn resolvent_trace(sample: &SpectralSample, z: Complex64) -> Result<Complex64> {
    require_off_axis(z)?;
    Ok(trace_from_values(&sample.eigenvalues, z))
}

fn trace_from_values(values: &[f64], z: Complex64) -> Complex64 {
    values.iter().map(|&l| (Complex64::new(l, 0.0) - z).inv()).sum()
}

/// Both sides of the rank-one identity
/// `γ_n - γ_n^α = -B/A`, with `A = 1 + τ(G^α y, y)`, `B = τ((G^α)² y, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankOneCheck {
    /// From the spectra of `M` and `M^α = M - τ y yᵀ`.
    pub direct: Complex64,
    /// `-B/A`.
    pub formula: Complex64,
    pub a: Complex64,
    pub b: Complex64,
    /// `|B/A| ≤ 1/|Im z|`.
    pub bound_holds: bool,
}

impl RankOneCheck {
    pub fn discrepancy(&self) -> f64 {
        (self.direct - self.formula).norm()
    }
}

/// Removes `τ y yᵀ` from `m` and evaluates the trace difference of the
/// resolvents two ways.
pub fn rank_one_resolvent_check(
    m: &RealMatrix,
    tau: f64,
    y: &[f64],
    z: Complex64,
) -> Result<RankOneCheck> {
    require_off_axis(z)?;
    let n = m.require_square()?;
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let reduced = RealMatrix::from_fn(n, n, |i, j| {
        let (p, q) = if i <= j { (i, j) } else { (j, i) };
        m.get(p, q) - tau * y[p] * y[q]
    });
    let full_values = symmetric_eigen(m, false)?.values;
    let reduced_eig = symmetric_eigen(&reduced, true)?;
    let direct = trace_from_values(&full_values, z) - trace_from_values(&reduced_eig.values, z);

    // (G^α y, y) and ((G^α)² y, y) through the spectral measure of y.
    let mut g1 = Complex64::new(0.0, 0.0);
    let mut g2 = Complex64::new(0.0, 0.0);
    for (k, &lambda) in reduced_eig.values.iter().enumerate() {
        let v = reduced_eig.vector(k).expect("vectors requested");
        let w = dot(v, y);
        let r = (Complex64::new(lambda, 0.0) - z).inv();
        g1 += r * (w * w);
        g2 += r * r * (w * w);
    }
    let a = Complex64::new(1.0, 0.0) + g1 * tau;
    let b = g2 * tau;
    let ratio = b / a;
    let bound_holds = ratio.norm() <= (1.0 + 1e-12) / z.im.abs();
    Ok(RankOneCheck {
        direct,
        formula: -ratio,
        a,
        b,
        bound_holds,
    })
}

/// `g_n(z1, z2) = n⁻¹ Σ_j G_jj(z1) G_jj(z2)` with resolvent diagonals taken
/// from the eigendecomposition, `G_jj(z) = Σ_k v_k[j]² / (λ_k - z)`.
pub fn g_diag(m: &RealMatrix, z1: Complex64, z2: Complex64) -> Result<Complex64> {
    require_off_axis(z1)?;
    require_off_axis(z2)?;
    let n = m.require_square()?;
    let eig = symmetric_eigen(m, true)?;
    let vectors = eig.vectors.as_ref().expect("vectors requested");
    let mut d1 = vec![Complex64::new(0.0, 0.0); n];
    let mut d2 = vec![Complex64::new(0.0, 0.0); n];
    for (k, &lambda) in eig.values.iter().enumerate() {
        let r1 = (Complex64::new(lambda, 0.0) - z1).inv();
        let r2 = (Complex64::new(lambda, 0.0) - z2).inv();
        for (j, &v) in vectors.row(k).iter().enumerate() {
            let w = v * v;
            d1[j] += r1 * w;
            d2[j] += r2 * w;
        }
    }
    let total: Complex64 = d1.iter().zip(&d2).map(|(a, b)| a * b).sum();
    Ok(total / n as f64)
}
