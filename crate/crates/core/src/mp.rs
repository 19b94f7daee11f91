//! The limiting Stieltjes transform `f` of the normalized counting measure,
//! defined by `z f = c - 1 - c ∫ (1 + τ f)⁻¹ dσ(τ)` with `Im f · Im z ≥ 0`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::ensemble::SigmaMeasure;
use crate::error::{Error, Result};

/// Residual at which [`solve_f`] stops.
pub const TOLERANCE: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 10_000;
/// Smallest damping factor the fixed point may fall back to.
const MIN_DAMPING: f64 = 1.0 / 64.0;
/// Residual below which Newton steps are tried.
const NEWTON_SWITCH: f64 = 1e-4;
/// `|c Σ wτ/(1+τf)² - z|` below this is treated as an edge singularity.
const EDGE_DENOMINATOR: f64 = 1e-14;

/// Default `η` schedule for density reconstruction.
pub const DEFAULT_ETA_SCHEDULE: [f64; 4] = [0.08, 0.04, 0.02, 0.01];
/// Allowed relative gap between the last two extrapolants.
const DENSITY_AGREEMENT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpSolution {
    pub f: Complex64,
    pub residual: f64,
    pub iterations: usize,
}

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn require_off_axis(z: Complex64) -> Result<()> {
    if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
        Err(Error::RealSpectralParameter)
    } else {
        Ok(())
    }
}

/// `|z f - (c - 1) + c Σ w_i/(1 + τ_i f)|`.
pub fn residual(z: Complex64, f: Complex64, sigma: &SigmaMeasure) -> f64 {
    let c = sigma.c();
    let s: Complex64 = sigma
        .atoms()
        .iter()
        .map(|&(t, w)| w / (c64(1.0, 0.0) + f * t))
        .sum();
    (z * f - (c - 1.0) + s * c).norm()
}

/// `1/(-z + c Σ wτ/(1+τf))`; same fixed points as the defining equation,
/// but maps the upper half-plane into itself.
fn resolvent_map(z: Complex64, f: Complex64, sigma: &SigmaMeasure) -> Complex64 {
    let s: Complex64 = sigma
        .atoms()
        .iter()
        .map(|&(t, w)| c64(w * t, 0.0) / (c64(1.0, 0.0) + f * t))
        .sum();
    (s * sigma.c() - z).inv()
}

fn newton_step(z: Complex64, f: Complex64, sigma: &SigmaMeasure) -> Complex64 {
    let c = sigma.c();
    let (mut s0, mut s1) = (c64(0.0, 0.0), c64(0.0, 0.0));
    for &(t, w) in sigma.atoms() {
        let d = (c64(1.0, 0.0) + f * t).inv();
        s0 += d * w;
        s1 += d * d * (w * t);
    }
    let value = z * f - (c - 1.0) + s0 * c;
    let slope = z - s1 * c;
    f - value / slope
}

/// Solves for `f(z)`.
///
/// Damped fixed-point iteration from `f = -1/z`, halving the damping when the
/// residual grows, followed by Newton steps once the residual is small.
/// Close to the real axis, where the iteration barely contracts, a failed
/// direct attempt is followed by continuation: solve at `Im z = 2` and halve
/// the height down to `Im z`, starting each level from the previous
/// solution. Converged values get up to two extra Newton steps.
/// `f(z̄) = conj f(z)` holds exactly since the lower half-plane is mapped to
/// the upper one.
pub fn solve_f(z: Complex64, sigma: &SigmaMeasure) -> Result<MpSolution> {
    require_off_axis(z)?;
    if z.im < 0.0 {
        let s = solve_f(z.conj(), sigma)?;
        return Ok(MpSolution { f: s.f.conj(), ..s });
    }
    let direct = iterate(z, -z.inv(), sigma, NEWTON_SWITCH, DIRECT_BUDGET);
    let s = match direct {
        Ok(s) => s,
        Err(_) if z.im < CONTINUATION_START => continuation(z, sigma, DIRECT_BUDGET)?,
        Err(e) => return Err(e),
    };
    if !s.f.is_finite() {
        return Err(Error::NonFinite("Stieltjes transform".into()));
    }
    Ok(polish(z, s, sigma))
}

/// Iterations allowed before falling back to continuation.
const DIRECT_BUDGET: usize = 2_000;
/// Height at which continuation starts.
const CONTINUATION_START: f64 = 2.0;

fn continuation(z: Complex64, sigma: &SigmaMeasure, spent: usize) -> Result<MpSolution> {
    let top = c64(z.re, CONTINUATION_START);
    let mut s = iterate(top, -top.inv(), sigma, NEWTON_SWITCH, MAX_ITERATIONS - spent)?;
    let mut used = spent + s.iterations;
    let mut eta = CONTINUATION_START;
    while eta > z.im {
        eta = (eta * 0.5).max(z.im);
        let zk = c64(z.re, eta);
        let budget = MAX_ITERATIONS.saturating_sub(used);
        // the previous level is a good start, so Newton is tried right away
        s = iterate(zk, s.f, sigma, f64::INFINITY, budget)?;
        used += s.iterations;
    }
    Ok(MpSolution { iterations: used, ..s })
}

/// Damped fixed point from `f0`, with Newton steps below `newton_below`.
fn iterate(
    z: Complex64,
    f0: Complex64,
    sigma: &SigmaMeasure,
    newton_below: f64,
    budget: usize,
) -> Result<MpSolution> {
    let bound = 1.0 / z.im;
    let mut f = f0;
    let mut r = residual(z, f, sigma);
    let mut theta = 1.0;
    let mut iterations = 0;
    while r > TOLERANCE {
        if iterations >= budget {
            return Err(Error::NoConvergence {
                what: "Stieltjes transform fixed point",
                iterations,
                residual: r,
            });
        }
        iterations += 1;
        if r < newton_below {
            let g = newton_step(z, f, sigma);
            if g.im > 0.0 && g.is_finite() && g.norm() <= bound * (1.0 + 1e-12) {
                let rg = residual(z, g, sigma);
                if rg < r {
                    f = g;
                    r = rg;
                    continue;
                }
            }
        }
        let g = f * (1.0 - theta) + resolvent_map(z, f, sigma) * theta;
        let rg = residual(z, g, sigma);
        if rg > r {
            theta = (theta * 0.5).max(MIN_DAMPING);
        }
        f = g;
        r = rg;
    }
    Ok(MpSolution {
        f,
        residual: r,
        iterations,
    })
}

/// Up to two Newton steps on a converged value; kernels take second divided
/// differences of `f`, so rounding-level accuracy matters.
fn polish(z: Complex64, mut s: MpSolution, sigma: &SigmaMeasure) -> MpSolution {
    for _ in 0..2 {
        let g = newton_step(z, s.f, sigma);
        let rg = residual(z, g, sigma);
        if !(g.im > 0.0 && rg < s.residual) {
            break;
        }
        s.f = g;
        s.residual = rg;
    }
    s
}

/// `f'(z)` from the value `f = f(z)`.
pub fn f_prime_at(z: Complex64, f: Complex64, sigma: &SigmaMeasure) -> Result<Complex64> {
    let s: Complex64 = sigma
        .atoms()
        .iter()
        .map(|&(t, w)| {
            let d = (c64(1.0, 0.0) + f * t).inv();
            d * d * (w * t)
        })
        .sum();
    let denom = s * sigma.c() - z;
    if denom.norm() < EDGE_DENOMINATOR {
        return Err(Error::EdgeProximity(alloc::format!(
            "derivative denominator {:.3e} at z = {z}",
            denom.norm()
        )));
    }
    Ok(f / denom)
}

pub fn f_prime(z: Complex64, sigma: &SigmaMeasure) -> Result<Complex64> {
    let f = solve_f(z, sigma)?.f;
    f_prime_at(z, f, sigma)
}

/// Herglotz root of `z f² + (z - c + 1) f + 1 = 0`, the transform for
/// `σ = δ_1`.
pub fn closed_form_f_mp(z: Complex64, c: f64) -> Complex64 {
    if c == 0.0 {
        return -z.inv();
    }
    let b = z - c + 1.0;
    let disc = (b * b - z * 4.0).sqrt();
    // q = -(b ± √disc)/2 with the sign avoiding cancellation; roots q/z, 1/q.
    let q = if (b.conj() * disc).re >= 0.0 {
        -(b + disc) * 0.5
    } else {
        -(b - disc) * 0.5
    };
    let roots = [q / z, q.inv()];
    let s = z.im.signum();
    let bound = 1.0 / z.im.abs();
    let score = |f: &Complex64| {
        let herglotz = f.im * s >= 0.0;
        let bounded = f.norm() <= bound * (1.0 + 1e-9);
        (herglotz as u8 + bounded as u8, f.im * s)
    };
    let (r0, r1) = (score(&roots[0]), score(&roots[1]));
    if r1.0 > r0.0 || (r1.0 == r0.0 && r1.1 > r0.1) {
        roots[1]
    } else {
        roots[0]
    }
}

/// `((1-√c)², (1+√c)², 1+c)`.
pub fn support_edges_mp(c: f64) -> (f64, f64, f64) {
    let s = c.sqrt();
    ((1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s), 1.0 + c)
}

/// An interval containing the support of the limit measure.
pub fn spectral_bracket(sigma: &SigmaMeasure) -> (f64, f64) {
    let s = sigma.c().sqrt();
    (0.0, sigma.tau_max() * (1.0 + s) * (1.0 + s))
}

/// Mass of the limit measure at `λ = 0`: `max(0, 1 - c(1 - σ{0}))`.
pub fn atom_at_zero(sigma: &SigmaMeasure) -> f64 {
    (1.0 - sigma.c() * (1.0 - sigma.zero_weight())).max(0.0)
}

/// Value of the polynomial through `(xs[i], ys[i])` at 0, together with the
/// value from all but the last point.
pub(crate) fn neville_at_zero(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mut p = ys.to_vec();
    let mut prev = ys[0];
    // after pass k, p[i] interpolates points i..=i+k
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (xs[i + k] * p[i] - xs[i] * p[i + 1]) / (xs[i + k] - xs[i]);
        }
        if k == n - 2 {
            prev = p[0];
        }
    }
    (p[0], prev)
}

/// Density reconstruction with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    /// Extrapolated density, clamped at 0.
    pub value: f64,
    /// Amount removed by clamping.
    pub clamp: f64,
    /// `(η, π⁻¹ Im f(λ + iη))`.
    pub levels: Vec<(f64, f64)>,
    /// Gap between the last two extrapolants.
    pub disagreement: f64,
    /// Whether the gap is within tolerance.
    pub converged: bool,
}

fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.len() < 2 {
        return Err(Error::InvalidParameter("eta schedule needs at least two levels".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) || schedule.iter().any(|&e| !(e >= 1e-6)) {
        return Err(Error::InvalidParameter(
            "eta schedule must decrease and stay >= 1e-6".into(),
        ));
    }
    Ok(())
}

/// `π⁻¹ Im f(λ + iη)` on the schedule, extrapolated to `η = 0`.
///
/// The Cauchy profile of the atom at 0 (if any) is removed before the
/// extrapolation, so the result is the density of the continuous part.
pub fn density_estimate(lambda: f64, sigma: &SigmaMeasure, schedule: &[f64]) -> Result<DensityEstimate> {
    validate_schedule(schedule)?;
    let atom = atom_at_zero(sigma);
    let mut levels = Vec::with_capacity(schedule.len());
    for &eta in schedule {
        let f = solve_f(c64(lambda, eta), sigma)?.f;
        let cauchy = atom * eta / (lambda * lambda + eta * eta);
        levels.push((eta, (f.im - cauchy) / PI));
    }
    let xs: Vec<f64> = levels.iter().map(|l| l.0).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.1).collect();
    let (v, prev) = neville_at_zero(&xs, &ys);
    let disagreement = (v - prev).abs();
    let scale = ys.iter().fold(1.0_f64, |m, y| m.max(y.abs()));
    let converged = disagreement <= DENSITY_AGREEMENT * v.abs() + 1e-4 * scale;
    Ok(DensityEstimate {
        value: v.max(0.0),
        clamp: (-v).max(0.0),
        levels,
        disagreement,
        converged,
    })
}

/// Density of the limit measure at `λ` (continuous part).
pub fn density(lambda: f64, sigma: &SigmaMeasure, schedule: &[f64]) -> Result<DensityEstimate> {
    let est = density_estimate(lambda, sigma, schedule)?;
    if !est.converged {
        return Err(Error::Extrapolation(alloc::format!(
            "density at {lambda}: last extrapolants differ by {:.3e}",
            est.disagreement
        )));
    }
    Ok(est)
}

/// Density for `σ = δ_1`: `√((a₊-λ)(λ-a₋)) / (2πλ)` on the bulk.
pub fn density_mp_closed(lambda: f64, c: f64) -> f64 {
    let (lo, hi, _) = support_edges_mp(c);
    if c == 0.0 || lambda <= lo || lambda >= hi || lambda <= 0.0 {
        return 0.0;
    }
    ((hi - lambda) * (lambda - lo)).sqrt() / (2.0 * PI * lambda)
}

/// Continuous-part mass of `σ = δ_1` below `x`, by the θ-substitution
/// `λ = a_m - 2√c cos θ`.
fn mp_continuous_cdf(x: f64, c: f64) -> f64 {
    let (lo, hi, am) = support_edges_mp(c);
    if c == 0.0 || x <= lo {
        return 0.0;
    }
    let total = c.min(1.0);
    if x >= hi {
        return total;
    }
    let sc = c.sqrt();
    let theta = ((am - x) / (2.0 * sc)).clamp(-1.0, 1.0).acos();
    let mut g = theta.sin() / (2.0 * sc) + (1.0 + c) * theta / (4.0 * c);
    if c != 1.0 {
        let k = (1.0 + sc) / (1.0 - sc).abs();
        let half = 0.5 * theta;
        g -= (1.0 - c).abs() / (2.0 * c) * (k * half.sin()).atan2(half.cos());
    }
    (2.0 * c / PI * g).clamp(0.0, total)
}

/// Number of grid cells of a tabulated limit CDF.
const TABLE_CELLS: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
enum CdfKind {
    /// `σ = δ_τ`: the scaled closed form.
    Scaled { tau: f64, c: f64 },
    /// Cumulative trapezoid table of the continuous part.
    Table { xs: Vec<f64>, cum: Vec<f64> },
}

/// Distribution function of the limit measure, atom at 0 included.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCdf {
    atom: f64,
    kind: CdfKind,
}

impl LimitCdf {
    /// Closed form for point masses, numerical table otherwise.
    pub fn new(sigma: &SigmaMeasure) -> Result<Self> {
        match sigma.single_atom() {
            Some(tau) if tau > 0.0 => Ok(Self {
                atom: atom_at_zero(sigma),
                kind: CdfKind::Scaled { tau, c: sigma.c() },
            }),
            _ => Self::tabulated(sigma),
        }
    }

    /// Integrates the reconstructed density on a uniform grid over the
    /// spectral bracket and rescales it to the continuous mass.
    pub fn tabulated(sigma: &SigmaMeasure) -> Result<Self> {
        let atom = atom_at_zero(sigma);
        let (lo, hi) = spectral_bracket(sigma);
        if atom >= 1.0 || hi <= lo {
            return Ok(Self {
                atom: 1.0,
                kind: CdfKind::Table {
                    xs: vec![0.0, 1.0],
                    cum: vec![0.0, 0.0],
                },
            });
        }
        let width = hi - lo;
        let schedule: Vec<f64> = [4e-3, 2e-3, 1e-3, 5e-4].iter().map(|s| s * width).collect();
        let h = width / TABLE_CELLS as f64;
        let xs: Vec<f64> = (0..=TABLE_CELLS).map(|k| lo + k as f64 * h).collect();
        let mut rho = Vec::with_capacity(xs.len());
        for &x in &xs {
            rho.push(density_estimate(x, sigma, &schedule)?.value);
        }
        let mut cum = vec![0.0; xs.len()];
        for k in 1..xs.len() {
            cum[k] = cum[k - 1] + 0.5 * h * (rho[k - 1] + rho[k]);
        }
        let total = cum[cum.len() - 1];
        if !(total > 0.0) {
            return Err(Error::NonFinite("limit density integrates to zero".into()));
        }
        let scale = (1.0 - atom) / total;
        cum.iter_mut().for_each(|v| *v *= scale);
        Ok(Self {
            atom,
            kind: CdfKind::Table { xs, cum },
        })
    }

    pub fn atom(&self) -> f64 {
        self.atom
    }

    fn continuous(&self, x: f64) -> f64 {
        match &self.kind {
            CdfKind::Scaled { tau, c } => mp_continuous_cdf(x / tau, *c),
            CdfKind::Table { xs, cum } => {
                if x <= xs[0] {
                    return 0.0;
                }
                let last = xs.len() - 1;
                if x >= xs[last] {
                    return cum[last];
                }
                let k = xs.partition_point(|&v| v <= x) - 1;
                let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
                cum[k] + t * (cum[k + 1] - cum[k])
            }
        }
    }

    /// `F(x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let atom = if x >= 0.0 { self.atom } else { 0.0 };
        (atom + self.continuous(x)).min(1.0)
    }

    /// `F(x-)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let atom = if x > 0.0 { self.atom } else { 0.0 };
        (atom + self.continuous(x)).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn delta(c: f64) -> SigmaMeasure {
        SigmaMeasure::point_mass(1.0, c).unwrap()
    }

    /// Roots of `a f² + b f + d` by the textbook formula; independent of the
    /// cancellation-avoiding form used in the library.
    fn quadratic_roots(a: Complex64, b: Complex64, d: Complex64) -> [Complex64; 2] {
        let s = (b * b - a * d * 4.0).sqrt();
        [(-b + s) / (a * 2.0), (-b - s) / (a * 2.0)]
    }

    #[test]
    fn trivial_cases() {
        let s = solve_f(c64(0.0, 2.0), &delta(0.0)).unwrap();
        assert!((s.f - c64(0.0, 0.5)).norm() < 1e-15);
        let zero = SigmaMeasure::point_mass(0.0, 1.0).unwrap();
        let s = solve_f(c64(0.0, 1.0), &zero).unwrap();
        assert!((s.f - c64(0.0, 1.0)).norm() < 1e-15);
        assert!(solve_f(c64(1.0, 0.0), &delta(1.0)).is_err());
    }

    #[test]
    fn delta_one_at_i() {
        let s = solve_f(c64(0.0, 1.0), &delta(1.0)).unwrap();
        assert!(s.residual <= TOLERANCE);
        let roots = quadratic_roots(c64(0.0, 1.0), c64(0.0, 1.0), c64(1.0, 0.0));
        let oracle = roots.into_iter().find(|r| r.im > 0.0).unwrap();
        assert!((s.f - oracle).norm() < 1e-12);
        assert_relative_eq!(s.f.re, 0.300_242_6, epsilon = 1e-6);
        assert_relative_eq!(s.f.im, 0.624_810_5, epsilon = 1e-6);
        assert!((closed_form_f_mp(c64(0.0, 1.0), 1.0) - oracle).norm() < 1e-14);
    }

    #[test]
    fn solver_matches_closed_form_and_is_herglotz() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &c in &[0.25, 0.5, 1.0, 2.0] {
            let sigma = delta(c);
            for _ in 0..20 {
                let im = rng.random_range(0.05..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let z = c64(rng.random_range(-1.0..6.0), im);
                let s = solve_f(z, &sigma).unwrap();
                assert!(s.residual <= TOLERANCE);
                assert!(s.f.im * z.im >= 0.0);
                assert!((s.f - closed_form_f_mp(z, c)).norm() <= 1e-10);
                let sc = solve_f(z.conj(), &sigma).unwrap();
                assert_eq!(sc.f, s.f.conj());
            }
        }
    }

    #[test]
    fn converges_close_to_the_real_axis() {
        for &c in &[0.5, 1.0, 2.0] {
            let sigma = delta(c);
            let (_, hi, _) = support_edges_mp(c);
            for k in 0..=60 {
                let lambda = -0.2 + (hi + 0.4) * k as f64 / 60.0;
                for &eta in &[1e-2, 1e-3, 1e-4] {
                    let z = c64(lambda, eta);
                    let s = solve_f(z, &sigma).unwrap();
                    assert!(s.residual <= TOLERANCE, "c={c} z={z}");
                    assert!(s.f.im > 0.0);
                    let roots = quadratic_roots(z, z - c + 1.0, c64(1.0, 0.0));
                    let gap = roots.iter().map(|r| (s.f - r).norm()).fold(f64::INFINITY, f64::min);
                    assert!(gap <= 1e-8 * s.f.norm().max(1.0), "c={c} z={z} gap={gap}");
                }
            }
        }
    }

    #[test]
    fn general_sigma_residual_and_herglotz() {
        let sigma = SigmaMeasure::parse("0:0.2,0.5:0.3,3:0.5", 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let z = c64(rng.random_range(-2.0..12.0), rng.random_range(0.01..3.0));
            let s = solve_f(z, &sigma).unwrap();
            assert!(s.residual <= TOLERANCE);
            assert!(s.f.im > 0.0);
            assert!(s.f.norm() <= 1.0 / z.im);
        }
    }

    #[test]
    fn total_mass_is_one() {
        for sigma in [delta(1.0), delta(0.3), SigmaMeasure::parse("1:0.5,2:0.5", 2.0).unwrap()] {
            let t = 1e3;
            let f = solve_f(c64(0.0, t), &sigma).unwrap().f;
            assert_relative_eq!(t * f.im, 1.0, epsilon = 1e-2);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for (sigma, z) in [
            (delta(1.0), c64(0.0, 1.0)),
            (delta(0.5), c64(1.3, 0.2)),
            (SigmaMeasure::parse("0.5:0.5,2:0.5", 1.5).unwrap(), c64(3.0, -0.4)),
        ] {
            let h = 1e-5;
            let fp = f_prime(z, &sigma).unwrap();
            let fd = (solve_f(z + h, &sigma).unwrap().f - solve_f(z - h, &sigma).unwrap().f) / (2.0 * h);
            assert!((fp - fd).norm() <= 1e-6 * fp.norm());
        }
        let z = c64(0.7, 0.9);
        let fp = f_prime(z, &delta(0.0)).unwrap();
        assert!((fp - (z * z).inv()).norm() < 1e-14);
    }

    #[test]
    fn edges() {
        assert_eq!(support_edges_mp(1.0), (0.0, 4.0, 2.0));
        assert_eq!(support_edges_mp(0.25), (0.25, 2.25, 1.25));
        assert_eq!(support_edges_mp(0.0), (1.0, 1.0, 1.0));
    }

    #[test]
    fn neville_recovers_polynomials() {
        let xs = [0.08, 0.04, 0.02, 0.01];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - x + 3.0 * x * x - 5.0 * x * x * x).collect();
        let (v, prev) = neville_at_zero(&xs, &ys);
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
        assert!((prev - 2.0).abs() > 1e-6);
    }

    #[test]
    fn density_values() {
        let d = density(2.0, &delta(1.0), &DEFAULT_ETA_SCHEDULE).unwrap();
        assert_relative_eq!(d.value, 1.0 / (2.0 * PI), epsilon = 1e-3);
        let d = density(-1.0, &delta(1.0), &DEFAULT_ETA_SCHEDULE).unwrap();
        assert!(d.value.abs() < 1e-3);
        let d = density(1.0, &delta(0.25), &DEFAULT_ETA_SCHEDULE).unwrap();
        let closed = closed_form_f_mp(c64(1.0, 1e-12), 0.25).im / PI;
        assert_relative_eq!(d.value, closed, epsilon = 1e-3);
        assert_relative_eq!(closed, density_mp_closed(1.0, 0.25), epsilon = 1e-9);
        assert!(density(1.0, &delta(1.0), &[0.01, 0.02]).is_err());
    }

    #[test]
    fn closed_cdf_matches_quadrature() {
        // midpoint rule in s with λ = a₋ + W s², smooth at the lower edge
        for &c in &[0.25, 1.0, 2.0] {
            let (lo, hi, _) = support_edges_mp(c);
            let w = hi - lo;
            let n = 200_000;
            let h = 1.0 / n as f64;
            let mut acc = 0.0;
            for k in 0..n {
                let s = (k as f64 + 0.5) * h;
                acc += density_mp_closed(lo + w * s * s, c) * 2.0 * w * s * h;
                if k % 40_000 == 39_999 {
                    let x = lo + w * (s + 0.5 * h).powi(2);
                    assert_relative_eq!(mp_continuous_cdf(x, c), acc, epsilon = 1e-6);
                }
            }
            assert_relative_eq!(acc, c.min(1.0), epsilon = 1e-6);
        }
    }

    #[test]
    fn atom_at_zero_for_small_ratio() {
        let sigma = delta(0.4);
        assert_relative_eq!(atom_at_zero(&sigma), 0.6);
        // the continuous part reconstructed from f alone carries mass c
        let table = LimitCdf::tabulated(&sigma).unwrap();
        let closed = LimitCdf::new(&sigma).unwrap();
        let mut gap: f64 = 0.0;
        for k in 0..=300 {
            let x = -0.5 + 4.0 * k as f64 / 300.0;
            gap = gap.max((table.cdf(x) - closed.cdf(x)).abs());
        }
        assert!(gap < 0.02, "gap {gap}");
        assert_eq!(closed.cdf_left(0.0), 0.0);
        assert_relative_eq!(closed.cdf(0.0), 0.6);
        assert_relative_eq!(closed.cdf(10.0), 1.0);
        assert_eq!(atom_at_zero(&delta(2.0)), 0.0);
    }

    #[test]
    fn scaled_point_mass_cdf() {
        let cdf = LimitCdf::new(&SigmaMeasure::point_mass(2.0, 1.0).unwrap()).unwrap();
        assert_relative_eq!(cdf.cdf(4.0), mp_continuous_cdf(2.0, 1.0));
        assert_relative_eq!(cdf.cdf(4.0), 0.5 + 1.0 / PI, epsilon = 1e-12);
    }
}
