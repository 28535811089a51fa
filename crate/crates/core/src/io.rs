//! File formats: headerless interleaved little-endian float32 I/Q sample
//! files ("cf32", the de-facto SDR interchange convention) and JSON for
//! structured artifacts (trained filters, mux plans). Sample rates are not
//! stored in cf32 files; they live in the experiment config.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::learn::TrainedFilterFile;
use crate::numerics::ComplexBuf;

/// Read a cf32 file: pairs of little-endian f32 (I, Q).
pub fn read_cf32(path: impl AsRef<Path>) -> Result<Vec<Complex64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::dimension(format!(
            "cf32 file length {} is not a multiple of 8 bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64;
            Complex64::new(re, im)
        })
        .collect())
}

/// Read a cf32 file and attach the configured sample rate.
pub fn read_cf32_buf(path: impl AsRef<Path>, sample_rate_hz: f64) -> Result<ComplexBuf> {
    ComplexBuf::new(read_cf32(path)?, sample_rate_hz)
}

/// Write samples as cf32. Values are narrowed to f32.
pub fn write_cf32(path: impl AsRef<Path>, samples: &[Complex64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(samples.len() * 8);
    for v in samples {
        bytes.extend_from_slice(&(v.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Write any serializable artifact as pretty JSON.
pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_trained_filter(path: impl AsRef<Path>, f: &TrainedFilterFile) -> Result<()> {
    save_json(path, f)
}

pub fn load_trained_filter(path: impl AsRef<Path>) -> Result<TrainedFilterFile> {
    load_json(path)
}
