use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// K complex frequency bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(bins: Vec<Complex64>) -> Self {
        Self { bins }
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// Twiddle table for a fixed transform size: `w(p) = exp(j*2*pi*p/k)`.
///
/// All bank sizes in this crate are small (K <= 64), so transforms are
/// direct matrix products against this table rather than an FFT.
#[derive(Debug, Clone)]
pub struct Twiddles {
    k: usize,
    w: Vec<Complex64>,
}

impl Twiddles {
    pub fn new(k: usize) -> Self {
        let w = (0..k)
            .map(|p| Complex64::from_polar(1.0, 2.0 * PI * p as f64 / k as f64))
            .collect();
        Self { k, w }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `W_K^p` for any integer exponent (wraps modulo K).
    #[inline]
    pub fn pow(&self, p: i64) -> Complex64 {
        self.w[p.rem_euclid(self.k as i64) as usize]
    }

    /// Unnormalized forward: `X[k] = sum_n x[n] W_K^{-kn}`.
    pub fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.k);
        (0..self.k)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(n, &xn)| xn * self.pow(-((k * n) as i64)))
                    .sum()
            })
            .collect()
    }

    /// Unnormalized inverse pattern: `y[r] = sum_k x[k] W_K^{kr}`.
    pub fn inverse_unnormalized(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.k);
        (0..self.k)
            .map(|r| {
                x.iter()
                    .enumerate()
                    .map(|(k, &xk)| xk * self.pow((k * r) as i64))
                    .sum()
            })
            .collect()
    }
}

/// Unnormalized forward DFT: `bins[k] = sum_n x[n] W_K^{-kn}`.
pub fn dft(x: &[Complex64], k: usize) -> Result<Spectrum> {
    if x.len() != k {
        return Err(Error::dimension(format!(
            "dft: input length {} != K {}",
            x.len(),
            k
        )));
    }
    if k == 0 {
        return Err(Error::dimension("dft: K must be >= 1".to_string()));
    }
    Ok(Spectrum::new(Twiddles::new(k).forward(x)))
}

/// Inverse DFT with 1/K normalization; exact inverse of [`dft`].
pub fn idft(spectrum: &Spectrum) -> Result<Vec<Complex64>> {
    let k = spectrum.len();
    if k == 0 {
        return Err(Error::dimension("idft: empty spectrum".to_string()));
    }
    let scale = 1.0 / k as f64;
    Ok(Twiddles::new(k)
        .inverse_unnormalized(spectrum.bins())
        .into_iter()
        .map(|v| v * scale)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let x = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let s = dft(&x, 4).unwrap();
        for b in s.bins() {
            assert!((b - c(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn constant_gives_dc_bin() {
        let v = c(0.3, -0.7);
        let x = vec![v; 4];
        let s = dft(&x, 4).unwrap();
        assert!((s.bins()[0] - v * 4.0).norm() < 1e-13);
        for b in &s.bins()[1..] {
            assert!(b.norm() < 1e-13);
        }
    }

    #[test]
    fn idft_of_dc_spike_is_all_ones() {
        let mut bins = vec![c(0.0, 0.0); 8];
        bins[0] = c(8.0, 0.0);
        let x = idft(&Spectrum::new(bins)).unwrap();
        for v in x {
            assert!((v - c(1.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn roundtrip_matches_naive_oracle() {
        // Naive O(K^2) summation, written independently of Twiddles.
        fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
            let k = x.len();
            (0..k)
                .map(|ki| {
                    (0..k)
                        .map(|n| {
                            let ang = -2.0 * std::f64::consts::PI * (ki * n) as f64 / k as f64;
                            x[n] * Complex64::from_polar(1.0, ang)
                        })
                        .sum()
                })
                .collect()
        }
        let mut state = 0x12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x: Vec<_> = (0..16).map(|_| c(next(), next())).collect();
        let s = dft(&x, 16).unwrap();
        let oracle = naive_dft(&x);
        for (a, b) in s.bins().iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-12);
        }
        let back = idft(&s).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dimension_errors() {
        assert!(dft(&[c(1.0, 0.0)], 2).is_err());
        assert!(idft(&Spectrum::new(vec![])).is_err());
    }
}
