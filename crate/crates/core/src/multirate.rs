//! Interpolation, decimation, and the stateless polyphase decomposition of
//! filters and signals.
//!
//! Boundary handling is zero-padding outside the signal support everywhere.
//! Whole-buffer semantics only; there is no streaming state.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{ComplexBuf, PrototypeFilter};

/// Which prototype a polyphase set was derived from, and with which stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyphaseRole {
    /// Branch taps `p_rho(m) = h(m*M - rho)`.
    Analysis { m: usize },
    /// Branch taps `q_rho(m) = f(m*L + rho)`.
    Synthesis { l: usize },
}

/// K per-branch subfilters produced by stateless decomposition of a
/// prototype. Branches are stored dense with uniform zero-padded length.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyphaseSet {
    branches: Vec<Vec<f64>>,
    k: usize,
    role: PolyphaseRole,
}

impl PolyphaseSet {
    pub fn branches(&self) -> &[Vec<f64>] {
        &self.branches
    }

    pub fn branch(&self, rho: usize) -> &[f64] {
        &self.branches[rho]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn role(&self) -> PolyphaseRole {
        self.role
    }

    pub fn branch_len(&self) -> usize {
        self.branches[0].len()
    }
}

/// `x'(m) = sum_r g(m - rL) x(r)`; transposed convolution with stride L.
/// Output length is `(len(x)-1)*L + len(g)`, rate is `L *` input rate.
pub fn interpolate(x: &ComplexBuf, l: usize, g: &PrototypeFilter) -> Result<ComplexBuf> {
    if l == 0 {
        return Err(Error::config("interpolation factor must be >= 1"));
    }
    let out = interpolate_samples(x.samples(), l, g.taps());
    ComplexBuf::new(out, x.sample_rate_hz() * l as f64)
}

pub(crate) fn interpolate_samples(x: &[Complex64], l: usize, g: &[f64]) -> Vec<Complex64> {
    if x.is_empty() {
        return Vec::new();
    }
    let out_len = (x.len() - 1) * l + g.len();
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];
    for (r, &xr) in x.iter().enumerate() {
        if xr.re == 0.0 && xr.im == 0.0 {
            continue;
        }
        let base = r * l;
        for (j, &gj) in g.iter().enumerate() {
            out[base + j] += xr * gj;
        }
    }
    out
}

/// `x'(m) = sum_n h(Mm - n) x(n)`; equals downsampling the full
/// convolution of `x` with `h` by M at phase 0. Rate drops by M.
pub fn decimate(x: &ComplexBuf, m: usize, h: &PrototypeFilter) -> Result<ComplexBuf> {
    if m == 0 {
        return Err(Error::config("decimation factor must be >= 1"));
    }
    let out = decimate_samples(x.samples(), m, h.taps());
    ComplexBuf::new(out, x.sample_rate_hz() / m as f64)
}

pub(crate) fn decimate_samples(x: &[Complex64], m: usize, h: &[f64]) -> Vec<Complex64> {
    if x.is_empty() {
        return Vec::new();
    }
    let conv_len = x.len() + h.len() - 1;
    let out_len = conv_len.div_ceil(m);
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];
    for (mi, o) in out.iter_mut().enumerate() {
        let pos = mi * m; // index into the full convolution
        let n_lo = pos.saturating_sub(h.len() - 1);
        let n_hi = pos.min(x.len() - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for n in n_lo..=n_hi {
            acc += x[n] * h[pos - n];
        }
        *o = acc;
    }
    out
}

/// Branch taps `p_rho(m) = h(m*M - rho)` for `rho` in `[0, K)`.
/// Requires `K = M * I` for an integer oversampling ratio `I`.
pub fn polyphase_decompose_analysis(
    h: &PrototypeFilter,
    k: usize,
    m: usize,
) -> Result<PolyphaseSet> {
    if k == 0 || m == 0 || k % m != 0 {
        return Err(Error::config(format!(
            "K ({k}) must be a positive multiple of M ({m})"
        )));
    }
    let taps = h.taps();
    let branch_len = (taps.len() - 1 + k - 1) / m + 1;
    let branches = (0..k)
        .map(|rho| {
            (0..branch_len)
                .map(|mi| {
                    let idx = mi as i64 * m as i64 - rho as i64;
                    if idx >= 0 && (idx as usize) < taps.len() {
                        taps[idx as usize]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Ok(PolyphaseSet { branches, k, role: PolyphaseRole::Analysis { m } })
}

/// Branch taps `q_rho(m) = f(m*L + rho)` for `rho` in `[0, K)`.
/// Requires `K = L * I` for an integer oversampling ratio `I`.
pub fn polyphase_decompose_synthesis(
    f: &PrototypeFilter,
    k: usize,
    l: usize,
) -> Result<PolyphaseSet> {
    if k == 0 || l == 0 || k % l != 0 {
        return Err(Error::config(format!(
            "K ({k}) must be a positive multiple of L ({l})"
        )));
    }
    let taps = f.taps();
    let branch_len = (taps.len() - 1) / l + 1;
    let branches = (0..k)
        .map(|rho| {
            (0..branch_len)
                .map(|mi| {
                    let idx = mi * l + rho;
                    if idx < taps.len() {
                        taps[idx]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Ok(PolyphaseSet { branches, k, role: PolyphaseRole::Synthesis { l } })
}

/// Branch `rho` holds `x(rK + rho)`; trailing partial frame zero-padded.
pub fn signal_decompose(x: &[Complex64], k: usize) -> Result<Vec<Vec<Complex64>>> {
    if k == 0 {
        return Err(Error::config("K must be >= 1"));
    }
    let frames = x.len().div_ceil(k).max(1);
    let mut branches = vec![vec![Complex64::new(0.0, 0.0); frames]; k];
    for (n, &v) in x.iter().enumerate() {
        branches[n % k][n / k] = v;
    }
    Ok(branches)
}

/// `s(rK + rho) = branch_rho(r)`; inverse of [`signal_decompose`].
pub fn interleave(branches: &[Vec<Complex64>], k: usize) -> Result<Vec<Complex64>> {
    if branches.len() != k || k == 0 {
        return Err(Error::dimension(format!(
            "expected {k} branches, got {}",
            branches.len()
        )));
    }
    let frames = branches[0].len();
    if branches.iter().any(|b| b.len() != frames) {
        return Err(Error::dimension("unequal branch lengths"));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); frames * k];
    for (rho, branch) in branches.iter().enumerate() {
        for (r, &v) in branch.iter().enumerate() {
            out[r * k + rho] = v;
        }
    }
    Ok(out)
}
