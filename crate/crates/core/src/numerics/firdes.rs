use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real-valued FIR prototype with declared symmetry and normalized cutoff.
///
/// `cutoff_norm` is the one-sided cutoff in radians/sample, so a lowpass
/// passing the band `(-wc, wc)` has `cutoff_norm = wc`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter {
    taps: Vec<f64>,
    cutoff_norm: f64,
    symmetric: bool,
}

impl PrototypeFilter {
    pub fn new(taps: Vec<f64>, cutoff_norm: f64, symmetric: bool) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::config("filter must have at least one tap"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("filter taps must be finite"));
        }
        if !(cutoff_norm > 0.0 && cutoff_norm <= PI) {
            return Err(Error::config(format!(
                "cutoff {cutoff_norm} out of range (0, pi]"
            )));
        }
        if symmetric {
            let n = taps.len() - 1;
            for i in 0..taps.len() {
                if taps[i] != taps[n - i] {
                    return Err(Error::config(format!(
                        "declared symmetric but taps[{i}] != taps[{}]",
                        n - i
                    )));
                }
            }
        }
        Ok(Self { taps, cutoff_norm, symmetric })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cutoff_norm(&self) -> f64 {
        self.cutoff_norm
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    /// Unit impulse; handy as an identity filter in tests and probes.
    pub fn delta() -> Self {
        Self { taps: vec![1.0], cutoff_norm: PI, symmetric: true }
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            taps: self.taps.iter().map(|t| t * gain).collect(),
            cutoff_norm: self.cutoff_norm,
            symmetric: self.symmetric,
        }
    }

    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Rect,
    Hamming,
    Kaiser(f64),
}

/// Zeroth-order modified Bessel function of the first kind (series form).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x2 = (x / 2.0) * (x / 2.0);
    for k in 1..64 {
        term *= half_x2 / (k * k) as f64;
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

fn window_value(window: Window, i: usize, n: usize) -> f64 {
    match window {
        Window::Rect => 1.0,
        Window::Hamming => {
            let m = (n - 1) as f64;
            0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / m).cos()
        }
        Window::Kaiser(beta) => {
            let m = (n - 1) as f64;
            let r = 2.0 * i as f64 / m - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / bessel_i0(beta)
        }
    }
}

/// Windowed-sinc lowpass with one-sided cutoff `cutoff_norm`, normalized to
/// unit DC gain. `num_taps` must be odd so the filter is exactly symmetric
/// about its center tap.
pub fn design_windowed_sinc(
    cutoff_norm: f64,
    num_taps: usize,
    window: Window,
) -> Result<PrototypeFilter> {
    if num_taps == 0 || num_taps % 2 == 0 {
        return Err(Error::config(format!(
            "num_taps must be odd and positive, got {num_taps}"
        )));
    }
    if !(cutoff_norm > 0.0 && cutoff_norm <= PI) {
        return Err(Error::config(format!(
            "cutoff {cutoff_norm} out of range (0, pi]"
        )));
    }
    if let Window::Kaiser(beta) = window {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::config(format!("kaiser beta {beta} invalid")));
        }
    }
    let center = (num_taps - 1) / 2;
    // Build the first half plus center, mirror for exact symmetry.
    let mut half = vec![0.0; center + 1];
    for (i, h) in half.iter_mut().enumerate() {
        let t = i as f64 - center as f64;
        let sinc = if t == 0.0 {
            cutoff_norm / PI
        } else {
            (cutoff_norm * t).sin() / (PI * t)
        };
        *h = sinc * window_value(window, i, num_taps);
    }
    let mut taps = vec![0.0; num_taps];
    for i in 0..=center {
        taps[i] = half[i];
        taps[num_taps - 1 - i] = half[i];
    }
    let dc: f64 = taps.iter().sum();
    if dc.abs() < 1e-30 {
        return Err(Error::config("degenerate design: zero DC gain"));
    }
    for t in taps.iter_mut() {
        *t /= dc;
    }
    PrototypeFilter::new(taps, cutoff_norm, true)
}

/// Magnitude response on `n_points` frequencies spanning `[-pi, pi)`,
/// in dB relative to the peak.
pub fn freq_response(filter: &PrototypeFilter, n_points: usize) -> Result<Vec<(f64, f64)>> {
    if n_points < filter.len() {
        return Err(Error::dimension(format!(
            "n_points {} < filter length {}",
            n_points,
            filter.len()
        )));
    }
    let mags: Vec<(f64, f64)> = (0..n_points)
        .map(|i| {
            let omega = -PI + 2.0 * PI * i as f64 / n_points as f64;
            let h: Complex64 = filter
                .taps()
                .iter()
                .enumerate()
                .map(|(n, &t)| Complex64::from_polar(t, -omega * n as f64))
                .sum();
            (omega, h.norm())
        })
        .collect();
    let peak = mags.iter().map(|&(_, m)| m).fold(0.0_f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::config("all-zero filter has no magnitude response"));
    }
    Ok(mags
        .into_iter()
        .map(|(w, m)| (w, 20.0 * (m / peak).max(1e-30).log10()))
        .collect())
}

/// Magnitude (linear) of the filter's DTFT at a single frequency.
pub fn magnitude_at(filter: &PrototypeFilter, omega: f64) -> f64 {
    let h: Complex64 = filter
        .taps()
        .iter()
        .enumerate()
        .map(|(n, &t)| Complex64::from_polar(t, -omega * n as f64))
        .sum();
    h.norm()
}
