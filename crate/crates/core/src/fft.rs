//! In-place radix-2 FFT.

use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

/// `x[m] ← Σ_j x[j] exp(sign · 2πi·jm/N)`; `N` must be a power of two.
pub(crate) fn fft_in_place(x: &mut [Complex64], sign: f64) {
    let n = x.len();
    assert!(n.is_power_of_two(), "fft length {n} is not a power of two");
    if n < 2 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            x.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let angle = sign * 2.0 * PI / len as f64;
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                // twiddles recomputed per k to keep rounding independent of n
                let w = Complex64::from_polar(1.0, angle * k as f64);
                let a = x[start + k];
                let b = x[start + k + half] * w;
                x[start + k] = a + b;
                x[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn matches_naive_dft() {
        for &n in &[1usize, 2, 8, 64] {
            let x: Vec<Complex64> = (0..n)
                .map(|j| Complex64::new((j as f64 * 0.7).sin(), (j as f64 * 1.3).cos()))
                .collect();
            for &sign in &[-1.0, 1.0] {
                let mut y = x.clone();
                fft_in_place(&mut y, sign);
                for m in 0..n {
                    let naive: Complex64 = x
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v * Complex64::from_polar(1.0, sign * 2.0 * PI * (j * m) as f64 / n as f64))
                        .sum();
                    assert!((naive - y[m]).norm() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn round_trip() {
        let x: Vec<Complex64> = (0..256).map(|j| Complex64::new(j as f64, -(j as f64))).collect();
        let mut y = x.clone();
        fft_in_place(&mut y, -1.0);
        fft_in_place(&mut y, 1.0);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b / 256.0).norm() < 1e-9);
        }
    }
}
