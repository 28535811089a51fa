use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ComplexBuf;

/// Floor applied when the aligned error is (numerically) zero.
pub const NMSE_FLOOR_DB: f64 = -120.0;

/// Best integer lag in `[-max_lag, max_lag]` aligning `estimate` to
/// `reference`, by complex cross-correlation peak.
pub fn best_lag(estimate: &[Complex64], reference: &[Complex64], max_lag: i64) -> i64 {
    let mut best = 0i64;
    let mut best_mag = f64::NEG_INFINITY;
    for lag in -max_lag..=max_lag {
        let mut acc = Complex64::new(0.0, 0.0);
        for (l, r) in reference.iter().enumerate() {
            let idx = l as i64 + lag;
            if idx >= 0 && (idx as usize) < estimate.len() {
                acc += estimate[idx as usize] * r.conj();
            }
        }
        let mag = acc.norm();
        if mag > best_mag {
            best_mag = mag;
            best = lag;
        }
    }
    best
}

/// Normalized mean squared error in dB after integer-lag alignment:
/// `10*log10(sum|est' - ref|^2 / sum|ref|^2)` over the aligned overlap.
/// Returns the NMSE and the lag that was used.
pub fn nmse_db_with_lag(
    estimate: &ComplexBuf,
    reference: &ComplexBuf,
    max_lag: usize,
) -> Result<(f64, i64)> {
    if estimate.sample_rate_hz() != reference.sample_rate_hz() {
        return Err(Error::dimension(format!(
            "sample rate mismatch: {} vs {}",
            estimate.sample_rate_hz(),
            reference.sample_rate_hz()
        )));
    }
    if reference.energy() <= 0.0 {
        return Err(Error::UndefinedMetric("zero-energy reference".into()));
    }
    let est = estimate.samples();
    let refs = reference.samples();
    let lag = if max_lag == 0 { 0 } else { best_lag(est, refs, max_lag as i64) };

    let lo = (-lag).max(0) as usize;
    let hi = refs.len().min((est.len() as i64 - lag).max(0) as usize);
    if lo >= hi {
        return Err(Error::UndefinedMetric("empty overlap after alignment".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for l in lo..hi {
        let e = est[(l as i64 + lag) as usize] - refs[l];
        num += e.norm_sqr();
        den += refs[l].norm_sqr();
    }
    if den <= 0.0 {
        return Err(Error::UndefinedMetric("zero-energy reference in overlap".into()));
    }
    let nmse = 10.0 * (num / den).log10();
    Ok((nmse.max(NMSE_FLOOR_DB), lag))
}

/// See [`nmse_db_with_lag`]; discards the reported lag.
pub fn nmse_db(estimate: &ComplexBuf, reference: &ComplexBuf, max_lag: usize) -> Result<f64> {
    nmse_db_with_lag(estimate, reference, max_lag).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(len: usize, omega: f64, rate: f64) -> ComplexBuf {
        let s: Vec<_> = (0..len)
            .map(|n| Complex64::from_polar(1.0, omega * n as f64))
            .collect();
        ComplexBuf::new(s, rate).unwrap()
    }

    #[test]
    fn identical_signals_hit_floor() {
        let x = tone(128, 0.3, 1.0);
        assert_eq!(nmse_db(&x, &x, 8).unwrap(), NMSE_FLOOR_DB);
    }

    #[test]
    fn zero_estimate_gives_zero_db() {
        let x = tone(128, 0.3, 1.0);
        let z = ComplexBuf::zeros(128, 1.0);
        let v = nmse_db(&z, &x, 0).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn ten_percent_scale_is_minus_20db() {
        let x = tone(256, 0.11, 1.0);
        let scaled =
            ComplexBuf::new(x.samples().iter().map(|s| s * 1.1).collect(), 1.0).unwrap();
        let v = nmse_db(&scaled, &x, 0).unwrap();
        assert!((v + 20.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn invariant_to_integer_delay() {
        let x = tone(256, 0.7, 1.0);
        let mut delayed = vec![Complex64::new(0.0, 0.0); 5];
        delayed.extend_from_slice(x.samples());
        let d = ComplexBuf::new(delayed, 1.0).unwrap();
        let (v, lag) = nmse_db_with_lag(&d, &x, 16).unwrap();
        assert_eq!(lag, 5);
        assert_eq!(v, NMSE_FLOOR_DB);
    }

    #[test]
    fn zero_reference_is_undefined() {
        let z = ComplexBuf::zeros(64, 1.0);
        let x = tone(64, 0.1, 1.0);
        assert!(matches!(nmse_db(&x, &z, 0), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn rate_mismatch_rejected() {
        let a = tone(64, 0.1, 1.0);
        let b = tone(64, 0.1, 2.0);
        assert!(nmse_db(&a, &b, 0).is_err());
    }
}
