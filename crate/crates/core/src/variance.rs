//! Limiting variance functionals of linear eigenvalue statistics.
//!
//! The covariance kernel is
//! `C(z1, z2) = ∂²/∂z1∂z2 [2 log(Δf/Δz) - (a+b) f(z1) f(z2) Δz/Δf]` and the
//! variance of `N_n°[φ]` is the `η ↓ 0` limit of
//! `V_η[φ] = (2π²)⁻¹ ∫∫ Re[C(z1, z̄2) - C(z1, z2)] φ(λ1) φ(λ2) dλ1 dλ2`,
//! `z_j = λ_j + iη`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::ensemble::{SigmaMeasure, TestFunction, TestFunctionKind};
use crate::error::{Error, Result};
use crate::fft::fft_in_place;
use crate::mp::{f_prime_at, neville_at_zero, solve_f, spectral_bracket, support_edges_mp};

/// Points on the Cauchy circle used for Taylor coefficients of `f`.
const CAUCHY_POINTS: usize = 64;
/// Taylor coefficients kept in the coincidence expansion.
const TAYLOR_TERMS: usize = 8;
/// Zero-padding factor of the Sobolev-norm transform.
const SOBOLEV_PADDING: usize = 4;

/// Quadrature and extrapolation settings for [`variance_limit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSettings {
    /// Decreasing `η` levels extrapolated to 0.
    pub eta_levels: Vec<f64>,
    /// Initial points per axis.
    pub grid_points: usize,
    /// Refinement stops with an error beyond this many points per axis.
    pub max_grid_points: usize,
    /// Relative change accepted between successive grid doublings.
    pub refine_tolerance: f64,
    /// Extra room on both sides of the spectral bracket; `None` means
    /// `max(1, 10 η_max)`.
    pub margin: Option<f64>,
    /// `|z1 - z2| < coincidence · |Im z1|` switches to the Taylor expansion.
    pub coincidence: f64,
}

impl Default for VarianceSettings {
    fn default() -> Self {
        Self {
            eta_levels: vec![0.16, 0.08, 0.04, 0.02],
            grid_points: 400,
            max_grid_points: 3200,
            refine_tolerance: 5e-3,
            margin: None,
            coincidence: 1e-3,
        }
    }
}

impl VarianceSettings {
    fn margin_for(&self, eta_max: f64) -> f64 {
        self.margin.unwrap_or_else(|| (10.0 * eta_max).max(1.0))
    }

    fn validate(&self) -> Result<()> {
        if self.eta_levels.is_empty()
            || self.eta_levels.iter().any(|&e| !(e > 0.0 && e.is_finite()))
            || self.eta_levels.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(Error::InvalidParameter("eta levels must be positive and decreasing".into()));
        }
        if self.grid_points < 3 || self.max_grid_points < self.grid_points {
            return Err(Error::InvalidParameter("grid needs at least 3 points".into()));
        }
        if !(self.refine_tolerance > 0.0) || !(self.coincidence >= 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Sobolev norm

/// `‖φ‖_s = (∫ (1 + 2|k|)^{2s} |φ̂(k)|² dk)^{1/2}` with
/// `φ̂(k) = ∫ e^{ikx} φ(x) dx`, on the test function's Fourier grid.
pub fn sobolev_norm(phi: &TestFunction, s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("Sobolev index {s} must be > 0")));
    }
    let grid = phi.grid;
    if !(grid.extent > 0.0 && grid.step > 0.0 && grid.step < grid.extent) {
        return Err(Error::InvalidParameter("Fourier grid needs 0 < step < extent".into()));
    }
    let n = ((2.0 * grid.extent / grid.step).round() as usize).next_power_of_two();
    let dx = 2.0 * grid.extent / n as f64;
    let center = match phi.kind {
        TestFunctionKind::Bump { center, .. } => center,
        _ => 0.0,
    };
    let mut values: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(phi.eval(center - grid.extent + j as f64 * dx), 0.0))
        .collect();
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.re.abs()));
    if values.iter().any(|v| !v.re.is_finite()) {
        return Err(Error::NonFinite(format!("{} on the Fourier grid", phi.label())));
    }
    if peak == 0.0 {
        return Ok(0.0);
    }
    let boundary = values[0].re.abs().max(values[n - 1].re.abs());
    if boundary > 1e-6 * peak {
        return Err(Error::NonDecaying(format!(
            "{} is {boundary:.3e} at the grid boundary (peak {peak:.3e})",
            phi.label()
        )));
    }
    // Zero padding refines the k-grid; the origin shift only changes phases.
    let len = n * SOBOLEV_PADDING;
    values.resize(len, Complex64::new(0.0, 0.0));
    fft_in_place(&mut values, 1.0);
    let dk = 2.0 * PI / (len as f64 * dx);
    let k_max = PI / dx;
    let (mut total, mut tail) = (0.0, 0.0);
    for (m, v) in values.iter().enumerate() {
        let idx = if m < len / 2 { m as f64 } else { m as f64 - len as f64 };
        let k = idx * dk;
        let term = (1.0 + 2.0 * k.abs()).powf(2.0 * s) * (v * dx).norm_sqr() * dk;
        total += term;
        if k.abs() > 0.5 * k_max {
            tail += term;
        }
    }
    // Euler-Maclaurin term for the kink of |k| at 0 (|φ̂|² is even).
    total += 2.0 / 3.0 * s * dk * dk * (values[0] * dx).norm_sqr();
    if tail > 1e-8 * total {
        return Err(Error::GridTooCoarse(format!(
            "weighted spectrum beyond k = {:.3} carries {:.3e} of the norm",
            0.5 * k_max,
            tail / total
        )));
    }
    Ok(total.sqrt())
}

/// `measured / ‖φ‖²_{2+δ}`.
pub fn variance_bound_ratio(phi: &TestFunction, delta: f64, measured_variance: f64) -> Result<f64> {
    let norm = sobolev_norm(phi, 2.0 + delta)?;
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(measured_variance / (norm * norm))
}

// ---------------------------------------------------------------------------
// Covariance kernel

/// `f` and `f'` at one point.
#[derive(Debug, Clone, Copy)]
struct Jet {
    z: Complex64,
    f: Complex64,
    d: Complex64,
}

impl Jet {
    fn at(z: Complex64, sigma: &SigmaMeasure) -> Result<Self> {
        let f = solve_f(z, sigma)?.f;
        Ok(Self {
            z,
            f,
            d: f_prime_at(z, f, sigma)?,
        })
    }

    fn conj(self) -> Self {
        Self {
            z: self.z.conj(),
            f: self.f.conj(),
            d: self.d.conj(),
        }
    }
}

/// Divided difference `Q = Δf/Δz` and its partial derivatives.
#[derive(Debug, Clone, Copy)]
struct Divided {
    q: Complex64,
    q1: Complex64,
    q2: Complex64,
    q12: Complex64,
}

fn combine(d: Divided, j1: &Jet, j2: &Jet, ab: f64) -> Complex64 {
    let Divided { q, q1, q2, q12 } = d;
    let qq = q * q;
    let l = (q * q12 - q1 * q2) / qq;
    let p = j1.f * j2.f;
    let p1 = j1.d * j2.f;
    let p2 = j1.f * j2.d;
    let p12 = j1.d * j2.d;
    let s = p12 / q - (p1 * q2 + p2 * q1) / qq - p * q12 / qq + p * q1 * q2 * 2.0 / (qq * q);
    l * 2.0 - s * ab
}

fn divided_direct(j1: &Jet, j2: &Jet) -> Divided {
    let dz = j1.z - j2.z;
    let q = (j1.f - j2.f) / dz;
    Divided {
        q,
        q1: (j1.d - q) / dz,
        q2: (q - j2.d) / dz,
        q12: (j1.d + j2.d - q * 2.0) / (dz * dz),
    }
}

/// Taylor coefficients of `f` around `w` from a discrete Cauchy integral.
fn taylor_coefficients(w: Complex64, sigma: &SigmaMeasure) -> Result<[Complex64; TAYLOR_TERMS]> {
    let r = 0.5 * w.im.abs();
    let mut samples = Vec::with_capacity(CAUCHY_POINTS);
    for k in 0..CAUCHY_POINTS {
        let theta = 2.0 * PI * k as f64 / CAUCHY_POINTS as f64;
        samples.push(solve_f(w + Complex64::from_polar(r, theta), sigma)?.f);
    }
    fft_in_place(&mut samples, -1.0);
    let mut coefficients = [Complex64::new(0.0, 0.0); TAYLOR_TERMS];
    let mut scale = 1.0 / CAUCHY_POINTS as f64;
    for (j, c) in coefficients.iter_mut().enumerate() {
        *c = samples[j] * scale;
        scale /= r;
    }
    Ok(coefficients)
}

/// Kernel terms from a Taylor expansion around the midpoint, for nearly
/// coincident arguments.
fn kernel_coincident(z1: Complex64, z2: Complex64, sigma: &SigmaMeasure, ab: f64) -> Result<Complex64> {
    let w = (z1 + z2) * 0.5;
    let c = taylor_coefficients(w, sigma)?;
    let (u, v) = (z1 - w, z2 - w);
    let zero = Complex64::new(0.0, 0.0);
    let pow = |x: Complex64, k: usize| -> Complex64 {
        let mut p = Complex64::new(1.0, 0.0);
        for _ in 0..k {
            p *= x;
        }
        p
    };
    let (mut q, mut q1, mut q2, mut q12) = (zero, zero, zero, zero);
    // Q = Σ_j c_j Σ_{i+l=j-1} u^i v^l
    for (j, &cj) in c.iter().enumerate().skip(1) {
        for i in 0..j {
            let l = j - 1 - i;
            q += cj * pow(u, i) * pow(v, l);
            if i > 0 {
                q1 += cj * (i as f64) * pow(u, i - 1) * pow(v, l);
            }
            if l > 0 {
                q2 += cj * (l as f64) * pow(u, i) * pow(v, l - 1);
            }
            if i > 0 && l > 0 {
                q12 += cj * ((i * l) as f64) * pow(u, i - 1) * pow(v, l - 1);
            }
        }
    }
    let jet = |x: Complex64| -> (Complex64, Complex64) {
        let mut f = zero;
        let mut d = zero;
        for (j, &cj) in c.iter().enumerate() {
            f += cj * pow(x, j);
            if j > 0 {
                d += cj * (j as f64) * pow(x, j - 1);
            }
        }
        (f, d)
    };
    let (f1, d1) = jet(u);
    let (f2, d2) = jet(v);
    Ok(combine(
        Divided { q, q1, q2, q12 },
        &Jet { z: z1, f: f1, d: d1 },
        &Jet { z: z2, f: f2, d: d2 },
        ab,
    ))
}

fn kernel_from_jets(
    j1: &Jet,
    j2: &Jet,
    sigma: &SigmaMeasure,
    ab: f64,
    coincidence: f64,
) -> Result<(Complex64, bool)> {
    if (j1.z - j2.z).norm() < coincidence * j1.z.im.abs() {
        Ok((kernel_coincident(j1.z, j2.z, sigma, ab)?, true))
    } else {
        Ok((combine(divided_direct(j1, j2), j1, j2, ab), false))
    }
}

/// `C(z1, z2)` with the default coincidence threshold.
pub fn cov_kernel(z1: Complex64, z2: Complex64, sigma: &SigmaMeasure, a: f64, b: f64) -> Result<Complex64> {
    cov_kernel_with(z1, z2, sigma, a, b, VarianceSettings::default().coincidence)
}

/// `C(z1, z2)`; `|z1 - z2| < coincidence · |Im z1|` uses the Taylor branch.
pub fn cov_kernel_with(
    z1: Complex64,
    z2: Complex64,
    sigma: &SigmaMeasure,
    a: f64,
    b: f64,
    coincidence: f64,
) -> Result<Complex64> {
    let j1 = Jet::at(z1, sigma)?;
    let j2 = Jet::at(z2, sigma)?;
    Ok(kernel_from_jets(&j1, &j2, sigma, a + b, coincidence)?.0)
}

// ---------------------------------------------------------------------------
// Double integral

/// One `η` level of the double integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaLevel {
    pub eta: f64,
    pub value: f64,
    /// Value on the previous (coarser) grid.
    pub coarse_value: f64,
    /// Points per axis of the accepted grid.
    pub grid_points: usize,
    /// `max |C|` over both kernels on the accepted grid.
    pub max_abs_kernel: f64,
    /// Kernel evaluations that went through the Taylor branch.
    pub coincident_pairs: usize,
}

struct GridSum {
    value: f64,
    absolute: f64,
    max_abs_kernel: f64,
    coincident_pairs: usize,
}

fn grid_sum(
    phi: &TestFunction,
    eta: f64,
    sigma: &SigmaMeasure,
    ab: f64,
    range: (f64, f64),
    points: usize,
    coincidence: f64,
) -> Result<GridSum> {
    let (lo, hi) = range;
    let h = (hi - lo) / (points - 1) as f64;
    let mut jets = Vec::with_capacity(points);
    let mut weights = Vec::with_capacity(points);
    for k in 0..points {
        let lambda = lo + k as f64 * h;
        jets.push(Jet::at(Complex64::new(lambda, eta), sigma)?);
        let end = k == 0 || k == points - 1;
        let v = phi.eval(lambda);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{} at {lambda}", phi.label())));
        }
        weights.push(if end { 0.5 * h * v } else { h * v });
    }
    let (mut value, mut absolute, mut max_abs, mut coincident) = (0.0, 0.0, 0.0_f64, 0);
    for i in 0..points {
        let ji = &jets[i];
        let mut row = 0.0;
        let mut row_abs = 0.0;
        for j in i..points {
            let jj = &jets[j];
            let (same, hit) = kernel_from_jets(ji, jj, sigma, ab, coincidence)?;
            let (cross, _) = kernel_from_jets(ji, &jj.conj(), sigma, ab, coincidence)?;
            coincident += hit as usize;
            max_abs = max_abs.max(same.norm()).max(cross.norm());
            let mult = if j == i { 1.0 } else { 2.0 };
            let term = mult * (cross - same).re * weights[j];
            row += term;
            row_abs += term.abs();
        }
        value += row * weights[i];
        absolute += row_abs * weights[i].abs();
    }
    let norm = 1.0 / (2.0 * PI * PI);
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("V_eta at eta = {eta}")));
    }
    Ok(GridSum {
        value: value * norm,
        absolute: absolute * norm,
        max_abs_kernel: max_abs,
        coincident_pairs: coincident,
    })
}

fn lambda_range(sigma: &SigmaMeasure, margin: f64) -> (f64, f64) {
    let (lo, hi) = spectral_bracket(sigma);
    (lo - margin, hi + margin)
}

/// `V_η[φ]` by the trapezoid rule, doubling the grid until the relative
/// change drops below the refinement tolerance.
pub fn variance_eta(
    phi: &TestFunction,
    eta: f64,
    sigma: &SigmaMeasure,
    a: f64,
    b: f64,
    settings: &VarianceSettings,
) -> Result<EtaLevel> {
    settings.validate()?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta = {eta} must be > 0")));
    }
    let margin = settings.margin_for(settings.eta_levels[0].max(eta));
    variance_eta_on(phi, eta, sigma, a + b, lambda_range(sigma, margin), settings)
}

fn variance_eta_on(
    phi: &TestFunction,
    eta: f64,
    sigma: &SigmaMeasure,
    ab: f64,
    range: (f64, f64),
    settings: &VarianceSettings,
) -> Result<EtaLevel> {
    let mut points = settings.grid_points;
    let mut coarse = grid_sum(phi, eta, sigma, ab, range, points, settings.coincidence)?;
    loop {
        let fine_points = 2 * points - 1;
        if fine_points > settings.max_grid_points {
            return Err(Error::GridTooCoarse(format!(
                "double integral at eta = {eta} still moving on {points} points per axis (value {:e})",
                coarse.value
            )));
        }
        let fine = grid_sum(phi, eta, sigma, ab, range, fine_points, settings.coincidence)?;
        let change = (fine.value - coarse.value).abs();
        if change <= settings.refine_tolerance * fine.value.abs() + 1e-9 * fine.absolute {
            return Ok(EtaLevel {
                eta,
                value: fine.value,
                coarse_value: coarse.value,
                grid_points: fine_points,
                max_abs_kernel: fine.max_abs_kernel,
                coincident_pairs: fine.coincident_pairs,
            });
        }
        points = fine_points;
        coarse = fine;
    }
}

/// Result of [`variance_limit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// Extrapolated `V[φ]`.
    #[serde(rename = "V")]
    pub v: f64,
    /// Extrapolant from all but the smallest `η`.
    pub v_previous: f64,
    #[serde(rename = "V_eta")]
    pub v_eta: Vec<EtaLevel>,
    pub phi: String,
    pub sigma: String,
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub lambda_range: (f64, f64),
    pub settings: VarianceSettings,
    /// Diagnostics about the level sequence; empty when everything is
    /// within tolerance.
    pub flags: Vec<String>,
}

/// `V[φ] = lim_{η↓0} V_η[φ]` by polynomial extrapolation over the `η`
/// levels.
pub fn variance_limit(
    phi: &TestFunction,
    sigma: &SigmaMeasure,
    a: f64,
    b: f64,
    settings: &VarianceSettings,
) -> Result<VarianceReport> {
    settings.validate()?;
    let margin = settings.margin_for(settings.eta_levels[0]);
    let range = lambda_range(sigma, margin);
    let mut levels = Vec::with_capacity(settings.eta_levels.len());
    for &eta in &settings.eta_levels {
        levels.push(variance_eta_on(phi, eta, sigma, a + b, range, settings)?);
    }
    let xs: Vec<f64> = levels.iter().map(|l| l.eta).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.value).collect();
    let (v, v_previous) = neville_at_zero(&xs, &ys);
    let scale = ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
    let mut flags = Vec::new();
    if (v - v_previous).abs() > 0.01 * v.abs() + 1e-6 * scale {
        flags.push(format!("extrapolants differ: {v} vs {v_previous}"));
    }
    let diffs: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.windows(2).any(|d| d[0] * d[1] < 0.0) {
        flags.push("eta levels are not monotone".into());
    }
    if v < -(1e-6 * scale + 1e-9) {
        flags.push(format!("negative limit {v}"));
    }
    Ok(VarianceReport {
        v,
        v_previous,
        v_eta: levels,
        phi: phi.label(),
        sigma: sigma.spec_string(),
        c: sigma.c(),
        a,
        b,
        lambda_range: range,
        settings: settings.clone(),
        flags,
    })
}

/// Chebyshev nodes per axis in [`variance_mp_closed`].
pub const CHEBYSHEV_NODES: usize = 512;

/// Closed-form limit for `τ ≡ 1`, with `λ = a_m + 2√c cos θ` turning both
/// integrals into smooth θ-integrals evaluated by the midpoint rule.
pub fn variance_mp_closed(phi: &TestFunction, c: f64, a: f64, b: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("ratio c = {c} must be > 0")));
    }
    let n = CHEBYSHEV_NODES;
    let (_, _, am) = support_edges_mp(c);
    let sc = c.sqrt();
    let dtheta = PI / n as f64;
    let mut cos = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let ct = ((k as f64 + 0.5) * dtheta).cos();
        let l = am + 2.0 * sc * ct;
        let v = phi.eval(l);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{} at {l}", phi.label())));
        }
        cos.push(ct);
        lambda.push(l);
        values.push(v);
    }
    let mut first = 0.0;
    for i in 0..n {
        let d = phi.derivative(lambda[i]);
        first += d * d * 4.0 * c * (1.0 - cos[i] * cos[i]);
        for j in i + 1..n {
            let q = (values[i] - values[j]) / (lambda[i] - lambda[j]);
            first += 2.0 * q * q * 4.0 * c * (1.0 - cos[i] * cos[j]);
        }
    }
    first *= dtheta * dtheta / (2.0 * PI * PI);
    let moment: f64 = values.iter().zip(&cos).map(|(v, ct)| v * 2.0 * sc * ct).sum::<f64>() * dtheta;
    Ok(first + (a + b) / (4.0 * c * PI * PI) * moment * moment)
}
