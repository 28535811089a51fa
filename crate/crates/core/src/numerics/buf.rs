use num_complex::Complex64;

use crate::error::{Error, Result};

/// Contiguous complex baseband samples tagged with a sample rate.
///
/// The universal signal currency of this crate: generators produce it,
/// filter banks consume and emit it, metrics compare two of them.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBuf {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl ComplexBuf {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::config(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if let Some(idx) = samples.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::config(format!("non-finite sample at index {idx}")));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Self {
        Self { samples: vec![Complex64::new(0.0, 0.0); len], sample_rate_hz }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rate() {
        assert!(ComplexBuf::new(vec![], 0.0).is_err());
        assert!(ComplexBuf::new(vec![], -1.0).is_err());
        assert!(ComplexBuf::new(vec![], f64::NAN).is_err());
    }

    #[test]
    fn rejects_non_finite_samples() {
        let s = vec![Complex64::new(1.0, 0.0), Complex64::new(f64::NAN, 0.0)];
        let err = ComplexBuf::new(s, 1.0).unwrap_err();
        assert!(err.to_string().contains("index 1"));
    }

    #[test]
    fn power_of_unit_tone() {
        let s: Vec<_> = (0..64)
            .map(|n| Complex64::from_polar(1.0, 0.1 * n as f64))
            .collect();
        let b = ComplexBuf::new(s, 1e6).unwrap();
        assert!((b.power() - 1.0).abs() < 1e-12);
    }
}
