//! Baseband waveform generators (pulse-shaped QPSK, 802.15.4-style O-QPSK,
//! GMSK), an AWGN channel, and a QPSK demodulator for BER studies.
//!
//! Everything is deterministic under its seed.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ComplexBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Qpsk,
    ZigbeeOqpsk,
    Gmsk,
}

/// Complex symbols on the unit constellation, plus how they were made.
#[derive(Debug, Clone)]
pub struct SymbolStream {
    pub symbols: Vec<Complex64>,
    pub scheme: Scheme,
    pub seed: u64,
}

/// Root-raised-cosine pulse spanning `span` symbols at `sps` samples per
/// symbol, scaled so its energy equals `sps` (unit average power shaping
/// for unit-magnitude symbols).
pub fn rrc_pulse(sps: usize, rolloff: f64, span: usize) -> Vec<f64> {
    let len = span * sps + 1;
    let center = (len - 1) as f64 / 2.0;
    let b = rolloff;
    let mut p: Vec<f64> = (0..len)
        .map(|n| {
            let t = (n as f64 - center) / sps as f64;
            if t.abs() < 1e-12 {
                1.0 - b + 4.0 * b / PI
            } else if (t.abs() - 1.0 / (4.0 * b)).abs() < 1e-9 {
                (b / std::f64::consts::SQRT_2)
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * b)).sin()
                        + (1.0 - 2.0 / PI) * (PI / (4.0 * b)).cos())
            } else {
                ((PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos())
                    / (PI * t * (1.0 - (4.0 * b * t).powi(2)))
            }
        })
        .collect();
    let energy: f64 = p.iter().map(|v| v * v).sum();
    let scale = (sps as f64 / energy).sqrt();
    for v in p.iter_mut() {
        *v *= scale;
    }
    p
}

fn shape(symbols: &[Complex64], sps: usize, pulse: &[f64]) -> Vec<Complex64> {
    let out_len = symbols.len().saturating_sub(1) * sps + pulse.len();
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];
    for (i, &a) in symbols.iter().enumerate() {
        let base = i * sps;
        for (j, &pj) in pulse.iter().enumerate() {
            out[base + j] += a * pj;
        }
    }
    out
}

/// Random QPSK symbols shaped by a root-raised-cosine filter (span 8
/// symbols), unit average power.
pub fn gen_qpsk(
    n_symbols: usize,
    sps: usize,
    rrc_rolloff: f64,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<(SymbolStream, ComplexBuf)> {
    if sps < 2 {
        return Err(Error::config(format!("sps must be >= 2, got {sps}")));
    }
    if !(rrc_rolloff > 0.0 && rrc_rolloff <= 1.0) {
        return Err(Error::config(format!("rolloff {rrc_rolloff} out of (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols: Vec<Complex64> = (0..n_symbols)
        .map(|_| {
            let bits = rng.next_u32();
            let re = if bits & 1 == 0 { 1.0 } else { -1.0 };
            let im = if bits & 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();
    let pulse = rrc_pulse(sps, rrc_rolloff, 8);
    let buf = ComplexBuf::new(shape(&symbols, sps, &pulse), sample_rate_hz)?;
    Ok((SymbolStream { symbols, scheme: Scheme::Qpsk, seed }, buf))
}

/// QPSK symbols rendered from an explicit symbol vector (used to produce
/// the same content at two sample rates).
pub fn shape_qpsk(
    symbols: &[Complex64],
    sps: usize,
    rrc_rolloff: f64,
    sample_rate_hz: f64,
) -> Result<ComplexBuf> {
    let pulse = rrc_pulse(sps, rrc_rolloff, 8);
    ComplexBuf::new(shape(symbols, sps, &pulse), sample_rate_hz)
}

/// 802.15.4 2.4 GHz chip sequence for data symbol `sym` (0..16), chips
/// mapped to +-1.
pub fn zigbee_chip_sequence(sym: usize) -> [f64; 32] {
    const BASE: [u8; 32] = [
        1, 1, 0, 1, 1, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 1,
        1, 1, 0,
    ];
    let shift = (sym % 8) * 4;
    let invert_q = sym >= 8;
    let mut out = [0.0; 32];
    for (i, v) in out.iter_mut().enumerate() {
        let bit = BASE[(i + 32 - shift) % 32];
        let mut chip = if bit == 1 { 1.0 } else { -1.0 };
        if invert_q && i % 2 == 1 {
            chip = -chip;
        }
        *v = chip;
    }
    out
}

fn zigbee_chips(bits: &[u8]) -> Vec<f64> {
    bits.chunks(4)
        .flat_map(|nib| {
            let sym = nib
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &b)| acc | ((b as usize & 1) << i));
            zigbee_chip_sequence(sym)
        })
        .collect()
}

fn oqpsk_half_sine(chips: &[f64], sps: usize) -> Vec<Complex64> {
    // even chips drive I, odd chips drive Q; each chip is a half-sine of
    // duration two chip periods, giving the usual MSK-like unit envelope
    let n_chips = chips.len();
    let len = (n_chips + 1) * sps;
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (ci, &chip) in chips.iter().enumerate() {
        let base = ci * sps;
        for n in 0..2 * sps {
            let p = chip * (PI * n as f64 / (2.0 * sps as f64)).sin();
            if ci % 2 == 0 {
                out[base + n].re += p;
            } else {
                out[base + n].im += p;
            }
        }
    }
    out
}

/// IEEE 802.15.4-style O-QPSK: 4-bit symbols spread to 32 chips, half-sine
/// pulse shaping, `sps` samples per chip. `n_bits` must be a multiple of 4.
pub fn gen_zigbee_oqpsk(
    n_bits: usize,
    sps: usize,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<ComplexBuf> {
    if n_bits == 0 || n_bits % 4 != 0 {
        return Err(Error::config(format!(
            "n_bits must be a positive multiple of 4, got {n_bits}"
        )));
    }
    if sps < 2 {
        return Err(Error::config(format!("sps must be >= 2, got {sps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..n_bits).map(|_| (rng.next_u32() & 1) as u8).collect();
    zigbee_from_bits(&bits, sps, sample_rate_hz)
}

/// Same as [`gen_zigbee_oqpsk`] but from explicit bits.
pub fn zigbee_from_bits(bits: &[u8], sps: usize, sample_rate_hz: f64) -> Result<ComplexBuf> {
    let chips = zigbee_chips(bits);
    ComplexBuf::new(oqpsk_half_sine(&chips, sps), sample_rate_hz)
}

fn gaussian_pulse(sps: usize, bt: f64, span: usize) -> Vec<f64> {
    // frequency pulse: rect(T) convolved with a Gaussian of the given BT
    let sigma = (2.0_f64.ln()).sqrt() / (2.0 * PI * bt);
    let len = span * sps + 1;
    let center = (len - 1) as f64 / 2.0;
    let g: Vec<f64> = (0..len)
        .map(|n| {
            let t = (n as f64 - center) / sps as f64;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    // convolve with a one-bit rect, then normalize area to 1
    let mut pulse = vec![0.0; len + sps - 1];
    for (i, &gv) in g.iter().enumerate() {
        for j in 0..sps {
            pulse[i + j] += gv;
        }
    }
    let sum: f64 = pulse.iter().sum();
    pulse.iter_mut().for_each(|v| *v /= sum);
    pulse
}

/// Gaussian-filtered MSK with modulation index 0.5 and exactly unit
/// envelope.
pub fn gen_gmsk(
    n_bits: usize,
    sps: usize,
    bt: f64,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<ComplexBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..n_bits).map(|_| (rng.next_u32() & 1) as u8).collect();
    gmsk_from_bits(&bits, sps, bt, sample_rate_hz)
}

/// Same as [`gen_gmsk`] but from explicit bits.
pub fn gmsk_from_bits(bits: &[u8], sps: usize, bt: f64, sample_rate_hz: f64) -> Result<ComplexBuf> {
    if !(bt > 0.0 && bt <= 1.0) {
        return Err(Error::config(format!("BT {bt} out of (0, 1]")));
    }
    if sps < 2 || bits.is_empty() {
        return Err(Error::config("need sps >= 2 and at least one bit"));
    }
    let pulse = gaussian_pulse(sps, bt, 4);
    // instantaneous frequency = filtered NRZ, integrated at h = 0.5
    let nrz_len = bits.len() * sps;
    let freq_len = nrz_len + pulse.len() - 1;
    let mut freq = vec![0.0; freq_len];
    for (bi, &b) in bits.iter().enumerate() {
        let v = if b == 1 { 1.0 } else { -1.0 };
        for s in 0..sps {
            let n = bi * sps + s;
            for (j, &pj) in pulse.iter().enumerate() {
                freq[n + j] += v * pj;
            }
        }
    }
    let mut phase = 0.0;
    let samples: Vec<Complex64> = freq
        .iter()
        .map(|&f| {
            phase += PI / 2.0 * f / sps as f64;
            Complex64::from_polar(1.0, phase)
        })
        .collect();
    ComplexBuf::new(samples, sample_rate_hz)
}

/// Adds circular complex Gaussian noise with power
/// `signal_power / 10^(snr_db/10)`. An infinite `snr_db` returns the input
/// unchanged.
pub fn awgn(x: &ComplexBuf, snr_db: f64, seed: u64) -> Result<ComplexBuf> {
    if snr_db.is_nan() {
        return Err(Error::config("snr_db must not be NaN"));
    }
    if snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    let p = x.power();
    if p <= 0.0 {
        return Err(Error::config("awgn needs a nonzero-power signal"));
    }
    let noise_power = p / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || {
        // Box-Muller
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        (r * (2.0 * PI * u2).cos(), r * (2.0 * PI * u2).sin())
    };
    let samples: Vec<Complex64> = x
        .samples()
        .iter()
        .map(|&s| {
            let (a, b) = gauss();
            s + Complex64::new(sigma * a, sigma * b)
        })
        .collect();
    ComplexBuf::new(samples, x.sample_rate_hz())
}

/// Matched-filter QPSK receiver: correlation timing recovery against the
/// known symbols, hard decisions, bit error rate over all symbols.
pub fn qpsk_ber(rx: &ComplexBuf, tx: &SymbolStream, sps: usize, rolloff: f64) -> Result<f64> {
    if tx.symbols.is_empty() {
        return Err(Error::config("no reference symbols"));
    }
    let mut mf = rrc_pulse(sps, rolloff, 8);
    let energy: f64 = mf.iter().map(|v| v * v).sum();
    let inv = 1.0 / energy.sqrt();
    mf.iter_mut().for_each(|v| *v *= inv);

    // full convolution with the unit-energy matched filter
    let rxs = rx.samples();
    let y_len = rxs.len() + mf.len() - 1;
    let mut y = vec![Complex64::new(0.0, 0.0); y_len];
    for (n, &s) in rxs.iter().enumerate() {
        if s.re == 0.0 && s.im == 0.0 {
            continue;
        }
        for (j, &h) in mf.iter().enumerate() {
            y[n + j] += s * h;
        }
    }

    let n_sym = tx.symbols.len();
    let probe = n_sym.min(256);
    let max_tau = y_len.saturating_sub((n_sym - 1) * sps + 1);
    if max_tau == 0 {
        return Err(Error::Timing("received buffer shorter than symbol span".into()));
    }
    let mut best_tau = 0usize;
    let mut best_mag = -1.0;
    let mut second = -1.0;
    for tau in 0..max_tau {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, a) in tx.symbols.iter().take(probe).enumerate() {
            acc += y[tau + i * sps] * a.conj();
        }
        let mag = acc.norm();
        if mag > best_mag {
            second = best_mag;
            best_mag = mag;
            best_tau = tau;
        } else if mag > second {
            second = mag;
        }
    }
    // sanity: the peak must actually correlate with the reference
    let ref_energy: f64 = tx.symbols.iter().take(probe).map(|a| a.norm_sqr()).sum();
    let sig_energy: f64 = (0..probe).map(|i| y[best_tau + i * sps].norm_sqr()).sum();
    let norm_corr = best_mag / (ref_energy * sig_energy).sqrt().max(1e-300);
    if !norm_corr.is_finite() || norm_corr < 0.3 {
        return Err(Error::Timing(format!(
            "correlation peak too weak ({norm_corr:.3}) for timing recovery"
        )));
    }

    let mut bit_errors = 0usize;
    for (i, a) in tx.symbols.iter().enumerate() {
        let d = y[best_tau + i * sps];
        if (d.re >= 0.0) != (a.re >= 0.0) {
            bit_errors += 1;
        }
        if (d.im >= 0.0) != (a.im >= 0.0) {
            bit_errors += 1;
        }
    }
    Ok(bit_errors as f64 / (2 * n_sym) as f64)
}
