//! Oversampled analysis and synthesis filter banks.
//!
//! Each bank exists in two algebraically identical forms: a direct
//! evaluation of the defining sums (the oracle) and a stateless polyphase
//! form (branch filtering plus a K-point DFT/IDFT pattern). The polyphase
//! form is the production path; the direct form exists so equivalence can
//! be asserted, not assumed.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::multirate::{
    interpolate_samples, polyphase_decompose_analysis, polyphase_decompose_synthesis,
    signal_decompose,
};
use crate::numerics::{design_windowed_sinc, ComplexBuf, PrototypeFilter, Twiddles, Window};

#[derive(Debug, Clone)]
pub struct AnalysisBankConfig {
    pub k: usize,
    pub m: usize,
    pub i: usize,
    pub prototype: PrototypeFilter,
}

impl AnalysisBankConfig {
    pub fn new(k: usize, m: usize, i: usize, prototype: PrototypeFilter) -> Result<Self> {
        if k == 0 || m == 0 || i == 0 || k != m * i {
            return Err(Error::config(format!(
                "analysis bank requires K = M*I, got K={k}, M={m}, I={i}"
            )));
        }
        Ok(Self { k, m, i, prototype })
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisBankConfig {
    pub k: usize,
    pub l: usize,
    pub i: usize,
    pub prototype: PrototypeFilter,
}

impl SynthesisBankConfig {
    pub fn new(k: usize, l: usize, i: usize, prototype: PrototypeFilter) -> Result<Self> {
        if k == 0 || l == 0 || i == 0 || k != l * i {
            return Err(Error::config(format!(
                "synthesis bank requires K = L*I, got K={k}, L={l}, I={i}"
            )));
        }
        Ok(Self { k, l, i, prototype })
    }
}

/// K x T matrix of complex subband samples at the reduced rate.
///
/// `subband_rate_hz = I * subband_interval_hz`: the oversampling property.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandFrame {
    data: Vec<Vec<Complex64>>,
    subband_rate_hz: f64,
    subband_interval_hz: f64,
}

impl SubbandFrame {
    pub fn new(
        data: Vec<Vec<Complex64>>,
        subband_rate_hz: f64,
        subband_interval_hz: f64,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::dimension("frame must have at least one row"));
        }
        let t = data[0].len();
        if data.iter().any(|r| r.len() != t) {
            return Err(Error::dimension("frame rows must have uniform length"));
        }
        Ok(Self { data, subband_rate_hz, subband_interval_hz })
    }

    pub fn zeros(k: usize, t: usize, subband_rate_hz: f64, subband_interval_hz: f64) -> Self {
        Self {
            data: vec![vec![Complex64::new(0.0, 0.0); t]; k],
            subband_rate_hz,
            subband_interval_hz,
        }
    }

    pub fn k(&self) -> usize {
        self.data.len()
    }

    pub fn t(&self) -> usize {
        self.data[0].len()
    }

    pub fn rows(&self) -> &[Vec<Complex64>] {
        &self.data
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.data[k]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut Vec<Complex64> {
        &mut self.data[k]
    }

    pub fn subband_rate_hz(&self) -> f64 {
        self.subband_rate_hz
    }

    pub fn subband_interval_hz(&self) -> f64 {
        self.subband_interval_hz
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().flatten().map(|v| v.norm_sqr()).sum()
    }
}

/// Number of subband time steps covering the full filter/signal support.
fn analysis_frames(input_len: usize, taps: usize, m: usize) -> usize {
    if input_len == 0 {
        return 1;
    }
    (input_len + taps - 2) / m + 1
}

/// Literal evaluation of `X(m,k) = sum_n h(mM-n) x(n) W_K^{-kn}`
/// (modulate, filter, downsample). Serves as the equivalence oracle for
/// [`afb_polyphase`].
pub fn afb_direct(x: &ComplexBuf, cfg: &AnalysisBankConfig) -> Result<SubbandFrame> {
    let h = cfg.prototype.taps();
    let t = analysis_frames(x.len(), h.len(), cfg.m);
    let tw = Twiddles::new(cfg.k);
    let xs = x.samples();
    let mut data = vec![vec![Complex64::new(0.0, 0.0); t]; cfg.k];
    for m in 0..t {
        let pos = m * cfg.m;
        if xs.is_empty() {
            continue;
        }
        let n_lo = pos.saturating_sub(h.len() - 1);
        let n_hi = pos.min(xs.len().saturating_sub(1));
        for k in 0..cfg.k {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in n_lo..=n_hi.min(xs.len().wrapping_sub(1)) {
                acc += xs[n] * h[pos - n] * tw.pow(-((k * n) as i64));
            }
            data[k][m] = acc;
        }
    }
    SubbandFrame::new(
        data,
        x.sample_rate_hz() / cfg.m as f64,
        x.sample_rate_hz() / cfg.k as f64,
    )
}

/// Stateless polyphase analysis: decompose the signal and prototype into K
/// branches, interpolate each branch by I with its subfilter, then apply a
/// K-point DFT pattern across branches per output time index. Numerically
/// equal to [`afb_direct`].
pub fn afb_polyphase(x: &ComplexBuf, cfg: &AnalysisBankConfig) -> Result<SubbandFrame> {
    let h = cfg.prototype.taps();
    let t = analysis_frames(x.len(), h.len(), cfg.m);
    let branches = signal_decompose(x.samples(), cfg.k)?;
    let pset = polyphase_decompose_analysis(&cfg.prototype, cfg.k, cfg.m)?;
    // u[rho][m] = sum_r p_rho(m - r*I) x_rho(r)
    let mut u = vec![vec![Complex64::new(0.0, 0.0); t]; cfg.k];
    for rho in 0..cfg.k {
        let interp = interpolate_samples(&branches[rho], cfg.i, pset.branch(rho));
        let n = interp.len().min(t);
        u[rho][..n].copy_from_slice(&interp[..n]);
    }
    let tw = Twiddles::new(cfg.k);
    let mut data = vec![vec![Complex64::new(0.0, 0.0); t]; cfg.k];
    let mut col = vec![Complex64::new(0.0, 0.0); cfg.k];
    for m in 0..t {
        for rho in 0..cfg.k {
            col[rho] = u[rho][m];
        }
        let spec = tw.forward(&col);
        for k in 0..cfg.k {
            data[k][m] = spec[k];
        }
    }
    SubbandFrame::new(
        data,
        x.sample_rate_hz() / cfg.m as f64,
        x.sample_rate_hz() / cfg.k as f64,
    )
}

/// Literal evaluation of `s(n) = sum_k W_K^{kn} sum_m S(m,k) f(n-Lm)`.
/// Oracle for [`sfb_polyphase`].
pub fn sfb_direct(frame: &SubbandFrame, cfg: &SynthesisBankConfig) -> Result<ComplexBuf> {
    if frame.k() != cfg.k {
        return Err(Error::dimension(format!(
            "frame has {} rows, bank expects {}",
            frame.k(),
            cfg.k
        )));
    }
    let f = cfg.prototype.taps();
    let t = frame.t();
    let out_len = (t - 1) * cfg.l + f.len();
    let tw = Twiddles::new(cfg.k);
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];
    for k in 0..cfg.k {
        for (m, &s) in frame.row(k).iter().enumerate() {
            if s.re == 0.0 && s.im == 0.0 {
                continue;
            }
            let base = m * cfg.l;
            for (j, &fj) in f.iter().enumerate() {
                let n = base + j;
                out[n] += tw.pow((k * n) as i64) * s * fj;
            }
        }
    }
    ComplexBuf::new(out, frame.subband_rate_hz() * cfg.l as f64)
}

/// Stateless polyphase synthesis: per time index apply the unnormalized
/// K-point IDFT pattern across subbands, filter each branch with its
/// subfilter at stride I, then interleave. Numerically equal to
/// [`sfb_direct`].
pub fn sfb_polyphase(frame: &SubbandFrame, cfg: &SynthesisBankConfig) -> Result<ComplexBuf> {
    if frame.k() != cfg.k {
        return Err(Error::dimension(format!(
            "frame has {} rows, bank expects {}",
            frame.k(),
            cfg.k
        )));
    }
    let f = cfg.prototype.taps();
    let t = frame.t();
    let out_len = (t - 1) * cfg.l + f.len();
    let s_hat = idft_pattern(frame);
    let qset = polyphase_decompose_synthesis(&cfg.prototype, cfg.k, cfg.l)?;
    let r_out = out_len.div_ceil(cfg.k);
    let mut branches = vec![vec![Complex64::new(0.0, 0.0); r_out]; cfg.k];
    for rho in 0..cfg.k {
        // With rho = d*L + rho_m, time index n = rK + rho gives
        // f(n - Lm) = q_{rho_m}(rI + d - m): decimation by I at phase d.
        let d = rho / cfg.l;
        let q = qset.branch(rho % cfg.l);
        let x = &s_hat[rho];
        for r in 0..r_out {
            let pos = r * cfg.i + d;
            let m_lo = pos.saturating_sub(q.len() - 1);
            let m_hi = pos.min(t - 1);
            let mut acc = Complex64::new(0.0, 0.0);
            for m in m_lo..=m_hi {
                acc += x[m] * q[pos - m];
            }
            branches[rho][r] = acc;
        }
    }
    let mut out = crate::multirate::interleave(&branches, cfg.k)?;
    out.truncate(out_len);
    ComplexBuf::new(out, frame.subband_rate_hz() * cfg.l as f64)
}

/// `s_hat[rho][m] = sum_k S(m,k) W_K^{k rho}` (no 1/K factor; any scaling
/// is folded into [`cascade_gain`]).
pub(crate) fn idft_pattern(frame: &SubbandFrame) -> Vec<Vec<Complex64>> {
    let k = frame.k();
    let t = frame.t();
    let tw = Twiddles::new(k);
    let mut s_hat = vec![vec![Complex64::new(0.0, 0.0); t]; k];
    let mut col = vec![Complex64::new(0.0, 0.0); k];
    for m in 0..t {
        for (ki, row) in frame.rows().iter().enumerate() {
            col[ki] = row[m];
        }
        let v = tw.inverse_unnormalized(&col);
        for rho in 0..k {
            s_hat[rho][m] = v[rho];
        }
    }
    s_hat
}

/// Re-map analysis subband rows into a (usually larger) synthesis ring.
///
/// Row `k` of the input carries the content at signed frequency index
/// `ks = k` for `k < K_in/2` and `ks = k - K_in` otherwise; it lands in
/// output bin `(ks + shift) mod K_out`. Rows are accumulated, so overlapping
/// placements add.
pub fn embed_frame(frame: &SubbandFrame, k_out: usize, shift: i64) -> Result<SubbandFrame> {
    let k_in = frame.k();
    if k_out < k_in {
        return Err(Error::dimension(format!(
            "cannot embed {k_in} subbands into a {k_out}-bin ring"
        )));
    }
    let mut out = SubbandFrame::zeros(
        k_out,
        frame.t(),
        frame.subband_rate_hz(),
        frame.subband_interval_hz(),
    );
    for k in 0..k_in {
        let ks = if (k as i64) < (k_in as i64 + 1) / 2 {
            k as i64
        } else {
            k as i64 - k_in as i64
        };
        let bin = (ks + shift).rem_euclid(k_out as i64) as usize;
        let dst = out.row_mut(bin);
        for (m, &v) in frame.row(k).iter().enumerate() {
            dst[m] += v;
        }
    }
    Ok(out)
}

/// Rotate ring bin `b` by `W_K^{-b*delay}`.
///
/// The synthesis bank re-applies each subband carrier with phase zero at
/// n = 0, while the cascade envelope is delayed by the prototypes' group
/// delay. Unless that delay is a multiple of K the carriers and envelope
/// end up offset -- a distortion no symmetric prototype can remove. This
/// rotation re-references the carriers to the delayed envelope, making the
/// AFB -> SFB cascade a pure delay of `delay` output samples.
pub fn align_carriers(frame: &mut SubbandFrame, delay: i64) {
    let k = frame.k();
    let tw = Twiddles::new(k);
    for b in 0..k {
        let rot = tw.pow(-(b as i64) * delay);
        for v in frame.row_mut(b).iter_mut() {
            *v *= rot;
        }
    }
}

/// Passband scale factor of the AFB -> SFB cascade. The cascade is LTI
/// once the carriers are re-referenced (see [`align_carriers`]), so the
/// gain is computed exactly: push a unit impulse through the aligned
/// cascade, evaluate the zero-phase frequency response of the result, and
/// average it over the interior of the input band (the band a K-bin ring
/// covers sits half a subband below symmetric, see the signed-bin mapping
/// in [`embed_frame`]). Callers divide by this to normalize the cascade to
/// unity passband gain.
pub fn cascade_gain(acfg: &AnalysisBankConfig, scfg: &SynthesisBankConfig) -> Result<f64> {
    if acfg.i != scfg.i {
        return Err(Error::config(format!(
            "oversampling mismatch: analysis I={} vs synthesis I={}",
            acfg.i, scfg.i
        )));
    }
    if scfg.l % acfg.m != 0 {
        return Err(Error::config(format!(
            "cascade rate ratio {}/{} is not an integer",
            scfg.l, acfg.m
        )));
    }
    let ratio = scfg.l / acfg.m;
    let lag = (acfg.prototype.len() - 1) / 2 * ratio + (scfg.prototype.len() - 1) / 2;
    let len = acfg.prototype.len() + 4 * acfg.m;
    let mut sig = vec![Complex64::new(0.0, 0.0); len];
    sig[0] = Complex64::new(1.0, 0.0);
    let x = ComplexBuf::new(sig, acfg.k as f64)?; // nominal rate
    let frame = afb_polyphase(&x, acfg)?;
    let mut frame = embed_frame(&frame, scfg.k, 0)?;
    align_carriers(&mut frame, lag as i64);
    let out = sfb_polyphase(&frame, scfg)?;
    let g = out.samples();
    // zero-phase response averaged over the central 90% of the band
    // [-pi/ratio - d, pi/ratio - d], d = half an analysis subband
    let d = std::f64::consts::PI / (acfg.k * ratio) as f64;
    let half = 0.9 * std::f64::consts::PI / ratio as f64;
    let grid = 257usize;
    let mut acc = 0.0;
    for t in 0..grid {
        let omega = -half - d + 2.0 * half * t as f64 / (grid - 1) as f64;
        let resp: Complex64 = g
            .iter()
            .enumerate()
            .map(|(n, &v)| v * Complex64::from_polar(1.0, -omega * (n as f64 - lag as f64)))
            .sum();
        acc += resp.re;
    }
    // the output-rate DTFT of an interpolator carries a factor of the rate
    // ratio in the passband (an input tone of amplitude 1 concentrates into
    // 1/ratio of the output band); divide it out to get the tone gain
    let mean = acc / (grid * ratio) as f64;
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::config("cascade gain probe produced no signal"));
    }
    Ok(mean)
}

/// Kaiser(8) windowed sinc at cutoff `pi/K` with `8K+1` taps: the stock
/// analysis prototype when nothing else is configured.
pub fn default_analysis_prototype(k: usize) -> Result<PrototypeFilter> {
    design_windowed_sinc(std::f64::consts::PI / k as f64, 8 * k + 1, Window::Kaiser(8.0))
}

/// Kaiser(8) windowed sinc at cutoff `2*pi/K` (wide enough to cover the
/// analysis transition band) with `8K+1` taps, scaled by L for unity
/// cascade passband gain.
pub fn default_synthesis_prototype(k: usize, l: usize) -> Result<PrototypeFilter> {
    let f = design_windowed_sinc(2.0 * std::f64::consts::PI / k as f64, 8 * k + 1, Window::Kaiser(8.0))?;
    Ok(f.scaled(l as f64))
}
