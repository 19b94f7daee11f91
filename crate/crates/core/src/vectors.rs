//! Isotropic random vectors.
//!
//! Every law here is isotropic (`E y_j = 0`, `E y_j y_k = δ_jk / n`) and
//! unconditional (invariant under coordinate sign flips), so its fourth
//! mixed moments are fixed by two numbers,
//!
//! ```text
//! E y_j y_k y_p y_q = a22 (δ_jk δ_pq + δ_jp δ_kq + δ_jq δ_kp) + κ4 δ_jk δ_jp δ_jq,
//! ```
//!
//! with `a22 = E y_j² y_k²` (`j ≠ k`) and `κ4 = E y_j⁴ - 3 a22`.
//! [`MomentProfile`] gives both exactly at every `n` together with their
//! large-`n` coefficients `a = lim n³(a22 - n⁻²)` and `b = lim n² κ4`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::special::{exp_finite, ln_beta, ln_gamma};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Distribution of the i.i.d. coordinates of `x` in `y = x / √n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseLaw {
    Gaussian,
    Rademacher,
    /// Uniform on `[-√3, √3]` (unit variance).
    Uniform,
}

impl BaseLaw {
    /// Fourth moment `E x⁴` of the unit-variance coordinate.
    pub fn fourth_moment(self) -> f64 {
        match self {
            BaseLaw::Gaussian => 3.0,
            BaseLaw::Rademacher => 1.0,
            BaseLaw::Uniform => 9.0 / 5.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            BaseLaw::Gaussian => "gaussian",
            BaseLaw::Rademacher => "rademacher",
            BaseLaw::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum VectorLaw {
    /// `y = x / √n` with i.i.d. symmetric unit-variance coordinates.
    IidScaled(BaseLaw),
    /// Uniform on the unit sphere.
    Sphere,
    /// Uniform on the unit `ℓ_p` ball, rescaled to be isotropic.
    LpBall(f64),
}

impl VectorLaw {
    pub fn validate(&self) -> Result<()> {
        if let VectorLaw::LpBall(p) = *self {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "lpball exponent must be finite and positive, got {p}"
                )));
            }
        }
        Ok(())
    }

    /// One draw of the isotropic vector in dimension `n`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let mut out = vec![0.0; n];
        self.sample_into(&mut out, rng)?;
        Ok(out)
    }

    /// Fills `out` with one draw; the dimension is `out.len()`.
    pub fn sample_into<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) -> Result<()> {
        let n = out.len();
        if n == 0 {
            return Err(Error::InvalidDimension("vector dimension must be at least 1".into()));
        }
        self.validate()?;
        match *self {
            VectorLaw::IidScaled(base) => {
                let s = 1.0 / (n as f64).sqrt();
                match base {
                    BaseLaw::Gaussian => {
                        for v in out.iter_mut() {
                            let g: f64 = StandardNormal.sample(rng);
                            *v = g * s;
                        }
                    }
                    BaseLaw::Rademacher => {
                        for v in out.iter_mut() {
                            *v = if rng.random::<bool>() { s } else { -s };
                        }
                    }
                    BaseLaw::Uniform => {
                        for v in out.iter_mut() {
                            *v = rng.random_range(-SQRT_3..SQRT_3) * s;
                        }
                    }
                }
            }
            VectorLaw::Sphere => loop {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
                let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for v in out.iter_mut() {
                        *v /= norm;
                    }
                    break;
                }
            },
            VectorLaw::LpBall(p) => {
                // |g|^p ~ Gamma(1/p), e ~ Exp(1); g / (Σ|g|^p + e)^(1/p) is
                // uniform on the ball.
                let shape = Gamma::new(1.0 / p, 1.0)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let mut total = 0.0;
                for v in out.iter_mut() {
                    let w: f64 = shape.sample(rng);
                    total += w;
                    let mag = w.powf(1.0 / p);
                    *v = if rng.random::<bool>() { mag } else { -mag };
                }
                let e: f64 = Exp1.sample(rng);
                total += e;
                let s = isotropy_scale_lp(n, p)? / total.powf(1.0 / p);
                for v in out.iter_mut() {
                    *v *= s;
                }
            }
        }
        Ok(())
    }

    /// Exact fourth-moment profile of the law.
    pub fn moment_profile(&self) -> Result<MomentProfile> {
        self.validate()?;
        let (a, b) = match *self {
            VectorLaw::IidScaled(base) => (0.0, base.fourth_moment() - 3.0),
            VectorLaw::Sphere => (-2.0, 0.0),
            VectorLaw::LpBall(p) => (-4.0 / p, lp_kurtosis_ratio(p) - 3.0),
        };
        Ok(MomentProfile { law: *self, a, b })
    }
}

impl fmt::Display for VectorLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorLaw::IidScaled(base) => write!(f, "iid:{}", base.name()),
            VectorLaw::Sphere => f.write_str("sphere"),
            VectorLaw::LpBall(p) => write!(f, "lpball:{p}"),
        }
    }
}

impl FromStr for VectorLaw {
    type Err = Error;

    /// `iid:gaussian | iid:rademacher | iid:uniform | sphere | lpball:<p>`
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let law = match s {
            "iid:gaussian" => VectorLaw::IidScaled(BaseLaw::Gaussian),
            "iid:rademacher" => VectorLaw::IidScaled(BaseLaw::Rademacher),
            "iid:uniform" => VectorLaw::IidScaled(BaseLaw::Uniform),
            "sphere" => VectorLaw::Sphere,
            _ => match s.strip_prefix("lpball:") {
                Some(p) => {
                    let p: f64 = p
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad lpball exponent in '{s}'")))?;
                    VectorLaw::LpBall(p)
                }
                None => return Err(Error::Parse(format!("unknown vector law '{s}'"))),
            },
        };
        law.validate()?;
        Ok(law)
    }
}

impl From<VectorLaw> for String {
    fn from(law: VectorLaw) -> String {
        law.to_string()
    }
}

impl TryFrom<String> for VectorLaw {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// `Γ(1/p)Γ(5/p)/Γ(3/p)²`, the limit of `E x⁴ / (E x²)²` per coordinate.
fn lp_kurtosis_ratio(p: f64) -> f64 {
    libm::exp(ln_gamma(1.0 / p) + ln_gamma(5.0 / p) - 2.0 * ln_gamma(3.0 / p))
}

/// Factor that makes the uniform law on the unit `ℓ_p` ball isotropic:
/// `(B(1/p, 2/p) / (n B(n/p + 1, 2/p)))^{1/2}`.
pub fn isotropy_scale_lp(n: usize, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidDimension("n must be at least 1".into()));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must be finite and positive, got {p}")));
    }
    let nf = n as f64;
    let log_sq = ln_beta(1.0 / p, 2.0 / p) - libm::log(nf) - ln_beta(nf / p + 1.0, 2.0 / p);
    exp_finite(0.5 * log_sq, "lp isotropy scale")
}

/// Exact mixed fourth moments of an isotropic law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    pub law: VectorLaw,
    /// Coefficient of `n⁻³` in `a22`.
    pub a: f64,
    /// Coefficient of `n⁻²` in `κ4`.
    pub b: f64,
}

impl MomentProfile {
    /// `E y_j² y_k²`, `j ≠ k`, at dimension `n`.
    pub fn a22_exact(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self.law {
            VectorLaw::IidScaled(_) => 1.0 / (nf * nf),
            VectorLaw::Sphere => 1.0 / (nf * (nf + 2.0)),
            VectorLaw::LpBall(p) => lp_pair_ratio(n, p) / (nf * nf),
        }
    }

    /// `E y_j⁴ - 3 a22` at dimension `n`.
    pub fn kappa4_exact(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self.law {
            VectorLaw::IidScaled(base) => (base.fourth_moment() - 3.0) / (nf * nf),
            VectorLaw::Sphere => 0.0,
            VectorLaw::LpBall(p) => {
                lp_pair_ratio(n, p) * (lp_kurtosis_ratio(p) - 3.0) / (nf * nf)
            }
        }
    }

    /// `E y_j⁴` at dimension `n`.
    pub fn fourth_exact(&self, n: usize) -> f64 {
        self.kappa4_exact(n) + 3.0 * self.a22_exact(n)
    }

    /// Exact `E y_j y_k y_p y_q`.
    pub fn mixed_moment(&self, n: usize, j: usize, k: usize, p: usize, q: usize) -> f64 {
        let d = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
        let a22 = self.a22_exact(n);
        a22 * (d(j, k) * d(p, q) + d(j, p) * d(k, q) + d(j, q) * d(k, p))
            + self.kappa4_exact(n) * d(j, k) * d(j, p) * d(j, q)
    }
}

/// `n² a22` for the isotropic `ℓ_p` ball,
/// `Γ(A + 2/p)² / (Γ(A) Γ(A + 4/p))` with `A = n/p + 1`.
///
/// Derived from the Dirichlet structure of `(|x_1|^p, …, |x_n|^p)`: both the
/// scale and the pair moment are ratios of the same Gamma functions.
fn lp_pair_ratio(n: usize, p: f64) -> f64 {
    let big_a = n as f64 / p + 1.0;
    libm::exp(2.0 * ln_gamma(big_a + 2.0 / p) - ln_gamma(big_a) - ln_gamma(big_a + 4.0 / p))
}

/// Monte Carlo estimates of `a22` and `κ4` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub n: usize,
    pub replicates: usize,
    pub a22: f64,
    pub a22_se: f64,
    pub kappa4: f64,
    pub kappa4_se: f64,
}

/// Pools `y_j² y_k²` over all ordered pairs `j ≠ k` and `y_j⁴` over all
/// coordinates, one summary per draw, so that standard errors account for
/// the dependence inside a draw.
pub fn estimate_moments<R: Rng + ?Sized>(
    law: &VectorLaw,
    n: usize,
    replicates: usize,
    rng: &mut R,
) -> Result<MomentEstimate> {
    if replicates < 2 {
        return Err(Error::InvalidParameter("need at least 2 replicates".into()));
    }
    if n < 2 {
        return Err(Error::InvalidDimension("pair moments need n >= 2".into()));
    }
    let nf = n as f64;
    let mut y = vec![0.0; n];
    let (mut s_a, mut ss_a, mut s_k, mut ss_k) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..replicates {
        law.sample_into(&mut y, rng)?;
        let (mut s2, mut s4) = (0.0, 0.0);
        for &v in &y {
            let v2 = v * v;
            s2 += v2;
            s4 += v2 * v2;
        }
        let pair = (s2 * s2 - s4) / (nf * (nf - 1.0));
        let kap = s4 / nf - 3.0 * pair;
        s_a += pair;
        ss_a += pair * pair;
        s_k += kap;
        ss_k += kap * kap;
    }
    let r = replicates as f64;
    let se = |s: f64, ss: f64| {
        let m = s / r;
        (((ss - r * m * m) / (r - 1.0)).max(0.0) / r).sqrt()
    };
    Ok(MomentEstimate {
        n,
        replicates,
        a22: s_a / r,
        a22_se: se(s_a, ss_a),
        kappa4: s_k / r,
        kappa4_se: se(s_k, ss_k),
    })
}

/// Exact `Var (A y, y) = E|(Ay, y) - E(Ay, y)|²` for symmetric `A`:
/// `(a22 - n⁻²)|Tr A|² + 2 a22 Tr(AA*) + κ4 Σ_j |A_jj|²`.
pub fn quadratic_form_variance(a: &ComplexMatrix, profile: &MomentProfile) -> Result<f64> {
    let n = a.require_square()?;
    if n == 0 {
        return Err(Error::InvalidDimension("empty matrix".into()));
    }
    let scale = a.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((a.get(i, j) - a.get(j, i)).norm());
        }
    }
    if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }
    let nf = n as f64;
    let trace: Complex64 = (0..n).map(|i| a.get(i, i)).sum();
    let frob: f64 = a.as_slice().iter().map(|v| v.norm_sqr()).sum();
    let diag: f64 = (0..n).map(|i| a.get(i, i).norm_sqr()).sum();
    let a22 = profile.a22_exact(n);
    let k4 = profile.kappa4_exact(n);
    Ok((a22 - 1.0 / (nf * nf)) * trace.norm_sqr() + 2.0 * a22 * frob + k4 * diag)
}
