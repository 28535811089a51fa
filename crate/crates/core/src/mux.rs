//! The spectrum multiplexer proper: stream specs, the subband-mapping
//! planner, the polyphase filter-bank multiplexer, and the two baselines
//! (direct interpolate-and-modulate, block DFT/IDFT).
//!
//! All three methods are normalized to unity per-stream passband gain and
//! emit zero-delay outputs (filter group delays are trimmed), so their
//! outputs can be compared sample-for-sample.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{
    afb_polyphase, cascade_gain, default_analysis_prototype, embed_frame, sfb_polyphase,
    AnalysisBankConfig, SubbandFrame, SynthesisBankConfig,
};
use crate::numerics::{design_windowed_sinc, dft, idft, ComplexBuf, PrototypeFilter, Window};
use crate::waveforms::Scheme;

/// One baseband stream to be placed inside the wideband output.
#[derive(Debug, Clone)]
pub struct StreamSpec {
    pub payload: ComplexBuf,
    /// Center frequency relative to the wideband center, Hz. May be negative.
    pub center_offset_hz: f64,
    pub scheme: Scheme,
}

impl StreamSpec {
    pub fn new(payload: ComplexBuf, center_offset_hz: f64, scheme: Scheme) -> Self {
        Self { payload, center_offset_hz, scheme }
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.payload.sample_rate_hz()
    }
}

/// The shared wideband output grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WidebandSpec {
    pub sample_rate_hz: f64,
    pub k_syn: usize,
    pub i: usize,
}

impl WidebandSpec {
    pub fn new(sample_rate_hz: f64, k_syn: usize, i: usize) -> Result<Self> {
        if !(sample_rate_hz > 0.0) {
            return Err(Error::config("wideband sample rate must be positive"));
        }
        if k_syn == 0 || i == 0 || k_syn % i != 0 {
            return Err(Error::config(format!(
                "wideband requires K_syn divisible by I, got K_syn={k_syn}, I={i}"
            )));
        }
        Ok(Self { sample_rate_hz, k_syn, i })
    }

    pub fn l_syn(&self) -> usize {
        self.k_syn / self.i
    }

    /// Frequency spacing between adjacent synthesis bins, Hz.
    pub fn subband_interval_hz(&self) -> f64 {
        self.sample_rate_hz / self.k_syn as f64
    }
}

/// Per-stream routing derived by [`plan_mux`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamPlan {
    pub k_ana: usize,
    pub m_ana: usize,
    /// Bin shift: analysis bin k (signed) lands in synthesis bin
    /// `(k + shift) mod K_syn`.
    pub shift: i64,
    /// Integer rate ratio wideband/stream.
    pub ratio: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuxPlan {
    pub k_syn: usize,
    pub l_syn: usize,
    pub i: usize,
    pub subband_interval_hz: f64,
    pub streams: Vec<StreamPlan>,
}

/// Synthesis-ring bins occupied by a stream's analysis subbands.
fn stream_bins(k_ana: usize, shift: i64, k_syn: usize) -> Vec<usize> {
    (0..k_ana)
        .map(|k| {
            let ks = if (k as i64) < (k_ana as i64 + 1) / 2 {
                k as i64
            } else {
                k as i64 - k_ana as i64
            };
            (ks + shift).rem_euclid(k_syn as i64) as usize
        })
        .collect()
}

/// Derive the subband routing for a set of streams: per stream
/// `K_ana = rate / interval`, `M_ana = K_ana / I`, `shift = offset / interval`.
pub fn plan_mux(streams: &[StreamSpec], wb: &WidebandSpec) -> Result<MuxPlan> {
    plan_mux_with(streams, wb, false)
}

pub fn plan_mux_with(
    streams: &[StreamSpec],
    wb: &WidebandSpec,
    allow_overlap: bool,
) -> Result<MuxPlan> {
    if streams.is_empty() {
        return Err(Error::Plan("no streams to place".into()));
    }
    let interval = wb.subband_interval_hz();
    let mut plans = Vec::with_capacity(streams.len());
    for (idx, s) in streams.iter().enumerate() {
        let rate = s.sample_rate_hz();
        if s.center_offset_hz.abs() + rate / 2.0 > wb.sample_rate_hz / 2.0 + 1e-9 {
            return Err(Error::Plan(format!(
                "stream {idx} at offset {} Hz with rate {} Hz does not fit inside the {} Hz wideband",
                s.center_offset_hz, rate, wb.sample_rate_hz
            )));
        }
        let k_ana_f = rate / interval;
        let k_ana = k_ana_f.round();
        if (k_ana_f - k_ana).abs() > 1e-9 || k_ana < 1.0 {
            return Err(Error::Plan(format!(
                "stream {idx} rate {rate} Hz is not an integer multiple of the {interval} Hz subband interval"
            )));
        }
        let k_ana = k_ana as usize;
        if k_ana % wb.i != 0 {
            return Err(Error::Plan(format!(
                "stream {idx}: K_ana={k_ana} not divisible by oversample ratio I={}",
                wb.i
            )));
        }
        let shift_f = s.center_offset_hz / interval;
        let shift = shift_f.round();
        if (shift_f - shift).abs() > 1e-9 {
            return Err(Error::Plan(format!(
                "stream {idx}: offset not grid-aligned ({} Hz is not a multiple of {interval} Hz)",
                s.center_offset_hz
            )));
        }
        let ratio_f = wb.sample_rate_hz / rate;
        let ratio = ratio_f.round();
        if (ratio_f - ratio).abs() > 1e-9 || ratio < 1.0 {
            return Err(Error::Plan(format!(
                "stream {idx} rate {rate} Hz does not divide the wideband rate"
            )));
        }
        plans.push(StreamPlan {
            k_ana,
            m_ana: k_ana / wb.i,
            shift: shift as i64,
            ratio: ratio as usize,
        });
    }
    if !allow_overlap {
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        for (idx, p) in plans.iter().enumerate() {
            for bin in stream_bins(p.k_ana, p.shift, wb.k_syn) {
                if let Some(&other) = owner.get(&bin) {
                    return Err(Error::Plan(format!(
                        "streams {other} and {idx} collide on synthesis bin {bin}"
                    )));
                }
                owner.insert(bin, idx);
            }
        }
    }
    Ok(MuxPlan {
        k_syn: wb.k_syn,
        l_syn: wb.l_syn(),
        i: wb.i,
        subband_interval_hz: interval,
        streams: plans,
    })
}

fn check_plan(streams: &[StreamSpec], plan: &MuxPlan, wb: &WidebandSpec) -> Result<()> {
    if streams.len() != plan.streams.len() {
        return Err(Error::Plan(format!(
            "plan covers {} streams, got {}",
            plan.streams.len(),
            streams.len()
        )));
    }
    if plan.k_syn != wb.k_syn || plan.i != wb.i {
        return Err(Error::Plan("plan was derived for a different wideband grid".into()));
    }
    for (idx, (s, p)) in streams.iter().zip(&plan.streams).enumerate() {
        let expect = wb.sample_rate_hz / p.ratio as f64;
        if (s.sample_rate_hz() - expect).abs() > 1e-6 * expect {
            return Err(Error::Plan(format!(
                "stream {idx} rate {} Hz does not match plan ratio {}",
                s.sample_rate_hz(),
                p.ratio
            )));
        }
    }
    Ok(())
}

/// Zero-pad every payload to the duration of the longest stream, so all
/// methods see time-aligned inputs.
fn normalized_payloads(streams: &[StreamSpec]) -> Vec<ComplexBuf> {
    let duration = streams
        .iter()
        .map(|s| s.payload.len() as f64 / s.sample_rate_hz())
        .fold(0.0f64, f64::max);
    streams
        .iter()
        .map(|s| {
            let want = (duration * s.sample_rate_hz()).round() as usize;
            let mut v = s.payload.samples().to_vec();
            v.resize(want.max(v.len()), Complex64::new(0.0, 0.0));
            ComplexBuf::new(v, s.sample_rate_hz()).expect("padded payload is valid")
        })
        .collect()
}

fn trim_leading(buf: ComplexBuf, n: usize) -> Result<ComplexBuf> {
    let rate = buf.sample_rate_hz();
    let mut v = buf.into_samples();
    v.drain(..n.min(v.len()));
    ComplexBuf::new(v, rate)
}

/// Filter-bank multiplexer: per-stream polyphase analysis, bin routing per
/// the plan, one shared polyphase synthesis bank.
///
/// `analysis` maps K_ana to a prototype; rates without an entry get
/// [`default_analysis_prototype`]. The cascade through `synthesis` is
/// normalized to unity passband gain per stream, and the output is trimmed
/// to zero group delay.
pub fn mux_nnpfb(
    streams: &[StreamSpec],
    plan: &MuxPlan,
    analysis: &BTreeMap<usize, PrototypeFilter>,
    synthesis: &PrototypeFilter,
    wb: &WidebandSpec,
) -> Result<ComplexBuf> {
    check_plan(streams, plan, wb)?;
    let payloads = normalized_payloads(streams);
    if payloads[0].is_empty() {
        return ComplexBuf::new(Vec::new(), wb.sample_rate_hz);
    }
    let scfg = SynthesisBankConfig::new(wb.k_syn, wb.l_syn(), wb.i, synthesis.clone())?;

    // One analysis config + gain probe per distinct K_ana.
    let mut banks: BTreeMap<usize, (AnalysisBankConfig, f64)> = BTreeMap::new();
    let mut delay_wb: Option<usize> = None;
    for p in &plan.streams {
        if !banks.contains_key(&p.k_ana) {
            let proto = match analysis.get(&p.k_ana) {
                Some(f) => f.clone(),
                None => default_analysis_prototype(p.k_ana)?,
            };
            let acfg = AnalysisBankConfig::new(p.k_ana, p.m_ana, wb.i, proto)?;
            let gain = cascade_gain(&acfg, &scfg)?;
            banks.insert(p.k_ana, (acfg, gain));
        }
        let d = (banks[&p.k_ana].0.prototype.len() - 1) / 2 * p.ratio;
        match delay_wb {
            None => delay_wb = Some(d),
            Some(prev) if prev != d => {
                return Err(Error::Plan(format!(
                    "analysis group delays differ across streams ({prev} vs {d} wideband samples); \
                     use prototypes with matched delay"
                )));
            }
            Some(_) => {}
        }
    }

    let frames: Vec<SubbandFrame> = payloads
        .par_iter()
        .zip(&plan.streams)
        .map(|(x, p)| {
            let (acfg, gain) = &banks[&p.k_ana];
            let mut frame = afb_polyphase(x, acfg)?;
            let scale = 1.0 / gain;
            for k in 0..frame.k() {
                for v in frame.row_mut(k).iter_mut() {
                    *v *= scale;
                }
            }
            embed_frame(&frame, wb.k_syn, p.shift)
        })
        .collect::<Result<Vec<_>>>()?;

    // Ordered sum over streams into one synthesis-ring frame.
    let t_max = frames.iter().map(|f| f.t()).max().unwrap();
    let mut combined = SubbandFrame::zeros(
        wb.k_syn,
        t_max,
        frames[0].subband_rate_hz(),
        wb.subband_interval_hz(),
    );
    for f in &frames {
        if (f.subband_rate_hz() - combined.subband_rate_hz()).abs()
            > 1e-6 * combined.subband_rate_hz()
        {
            return Err(Error::Plan("streams have unequal subband rates".into()));
        }
        for k in 0..wb.k_syn {
            let dst = combined.row_mut(k);
            for (m, &v) in f.row(k).iter().enumerate() {
                dst[m] += v;
            }
        }
    }

    // Re-reference the subband carriers to the cascade group delay, then
    // trim that delay off the front: the output is aligned to t=0.
    let trim = delay_wb.unwrap() + (synthesis.len() - 1) / 2;
    crate::filterbank::align_carriers(&mut combined, trim as i64);
    let out = sfb_polyphase(&combined, &scfg)?;
    trim_leading(out, trim)
}

/// Stock anti-imaging filter for a rate-`ratio` interpolator: textbook
/// Hamming windowed sinc at cutoff `pi/ratio`, `32*ratio + 1` taps (odd so
/// the group delay is integer), scaled by the ratio for unity passband gain.
pub fn default_anti_imaging(ratio: usize) -> Result<PrototypeFilter> {
    let f = design_windowed_sinc(
        std::f64::consts::PI / ratio as f64,
        32 * ratio + 1,
        Window::Hamming,
    )?;
    Ok(f.scaled(ratio as f64))
}

/// Baseline 1: time-domain interpolation and modulation. Each stream is
/// interpolated to the wideband rate, frequency-shifted to its offset, and
/// the shifted streams are summed.
pub fn mux_direct(streams: &[StreamSpec], wb: &WidebandSpec) -> Result<ComplexBuf> {
    if streams.is_empty() {
        return Err(Error::Plan("no streams to place".into()));
    }
    let payloads = normalized_payloads(streams);
    if payloads[0].is_empty() {
        return ComplexBuf::new(Vec::new(), wb.sample_rate_hz);
    }
    let parts: Vec<Vec<Complex64>> = payloads
        .par_iter()
        .zip(streams)
        .map(|(x, s)| {
            let ratio_f = wb.sample_rate_hz / s.sample_rate_hz();
            let ratio = ratio_f.round();
            if (ratio_f - ratio).abs() > 1e-9 || ratio < 1.0 {
                return Err(Error::config(format!(
                    "stream rate {} Hz does not divide the wideband rate",
                    s.sample_rate_hz()
                )));
            }
            let ratio = ratio as usize;
            let g = default_anti_imaging(ratio)?;
            let up = crate::multirate::interpolate(x, ratio, &g)?;
            // Drop the filter's own group delay so streams stay aligned at
            // the shared t=0 regardless of their ratios.
            let up = trim_leading(up, (g.len() - 1) / 2)?;
            let w = 2.0 * std::f64::consts::PI * s.center_offset_hz / wb.sample_rate_hz;
            Ok(up
                .samples()
                .iter()
                .enumerate()
                .map(|(n, &v)| v * Complex64::from_polar(1.0, w * n as f64))
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let len = parts.iter().map(Vec::len).max().unwrap();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for p in &parts {
        for (o, &v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    ComplexBuf::new(out, wb.sample_rate_hz)
}

/// Baseline 2: block DFT/IDFT. Non-overlapping `dft_block`-sample blocks of
/// each stream are transformed, shifted onto the wideband frequency grid,
/// and inverse-transformed at the wideband rate. The blocks are processed
/// independently; the resulting edge leakage is inherent to the method.
pub fn mux_dft(streams: &[StreamSpec], wb: &WidebandSpec, dft_block: usize) -> Result<ComplexBuf> {
    if streams.is_empty() {
        return Err(Error::Plan("no streams to place".into()));
    }
    if dft_block == 0 {
        return Err(Error::config("DFT block size must be >= 1"));
    }
    let payloads = normalized_payloads(streams);
    if payloads[0].is_empty() {
        return ComplexBuf::new(Vec::new(), wb.sample_rate_hz);
    }
    let parts: Vec<Vec<Complex64>> = payloads
        .par_iter()
        .zip(streams)
        .map(|(x, s)| {
            let ratio_f = wb.sample_rate_hz / s.sample_rate_hz();
            let ratio = ratio_f.round();
            if (ratio_f - ratio).abs() > 1e-9 || ratio < 1.0 {
                return Err(Error::Plan(format!(
                    "stream rate {} Hz does not divide the wideband rate",
                    s.sample_rate_hz()
                )));
            }
            let ratio = ratio as usize;
            let n_idft = dft_block * ratio;
            let resolution = s.sample_rate_hz() / dft_block as f64;
            let shift_f = s.center_offset_hz / resolution;
            let shift = shift_f.round();
            if (shift_f - shift).abs() > 1e-9 {
                return Err(Error::Plan(format!(
                    "offset {} Hz not aligned to the {resolution} Hz DFT grid",
                    s.center_offset_hz
                )));
            }
            let shift = shift as i64;
            let mut xs = x.samples().to_vec();
            let blocks = xs.len().div_ceil(dft_block);
            xs.resize(blocks * dft_block, Complex64::new(0.0, 0.0));
            let mut out = Vec::with_capacity(blocks * n_idft);
            for b in 0..blocks {
                let spec = dft(&xs[b * dft_block..(b + 1) * dft_block], dft_block)?;
                let mut wide = vec![Complex64::new(0.0, 0.0); n_idft];
                for (k, &v) in spec.bins().iter().enumerate() {
                    let ks = if (k as i64) < (dft_block as i64 + 1) / 2 {
                        k as i64
                    } else {
                        k as i64 - dft_block as i64
                    };
                    let bin = (ks + shift).rem_euclid(n_idft as i64) as usize;
                    wide[bin] += v;
                }
                let block = idft(&crate::numerics::Spectrum::new(wide))?;
                // The 1/N_idft inverse shrinks a tone by 1/ratio; undo it.
                out.extend(block.iter().map(|&v| v * ratio as f64));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let len = parts.iter().map(Vec::len).max().unwrap();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for p in &parts {
        for (o, &v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    ComplexBuf::new(out, wb.sample_rate_hz)
}

/// Ideal-ish receiver front end used to score the multiplexers: shift the
/// stream's band to baseband, low-pass sharply, decimate to the native
/// rate. Zero group delay (the filter delay is dropped after decimation).
pub fn demux_reference(
    wideband: &ComplexBuf,
    spec: &StreamSpec,
    wb: &WidebandSpec,
) -> Result<ComplexBuf> {
    let ratio_f = wb.sample_rate_hz / spec.sample_rate_hz();
    let ratio = ratio_f.round();
    if (ratio_f - ratio).abs() > 1e-9 || ratio < 1.0 {
        return Err(Error::config(format!(
            "stream rate {} Hz does not divide the wideband rate",
            spec.sample_rate_hz()
        )));
    }
    let ratio = ratio as usize;
    if (wideband.sample_rate_hz() - wb.sample_rate_hz).abs() > 1e-6 * wb.sample_rate_hz {
        return Err(Error::dimension("wideband buffer rate does not match the spec"));
    }
    let w = -2.0 * std::f64::consts::PI * spec.center_offset_hz / wb.sample_rate_hz;
    let shifted: Vec<Complex64> = wideband
        .samples()
        .iter()
        .enumerate()
        .map(|(n, &v)| v * Complex64::from_polar(1.0, w * n as f64))
        .collect();
    if shifted.is_empty() {
        return ComplexBuf::new(Vec::new(), spec.sample_rate_hz());
    }
    // 64*ratio + 1 taps: (N-1)/2 is a multiple of the ratio, so the group
    // delay is an integer number of stream-rate samples and can be dropped.
    // Cutoff opens past pi/ratio by two analysis subbands so the whole
    // decimation alias group of a full-band stream is passed: interpolators
    // split Nyquist-edge content across both band edges (symmetric filters)
    // or render it single-sided (ring placement), and the copies only
    // recombine at full amplitude if the front end passes them all.
    let k_ana = (wb.k_syn as f64 / ratio as f64).round().max(2.0);
    let cutoff =
        (std::f64::consts::PI / ratio as f64 * (1.0 + 2.4 / k_ana)).min(std::f64::consts::PI);
    let h = design_windowed_sinc(cutoff, 128 * ratio + 1, Window::Kaiser(10.0))?;
    let base = ComplexBuf::new(shifted, wb.sample_rate_hz)?;
    let down = crate::multirate::decimate(&base, ratio, &h)?;
    trim_leading(down, (h.len() - 1) / (2 * ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{forward, CascadeShape, LearnableSynthesisFilter};
    use crate::numerics::nmse_db;
    use crate::waveforms::gen_qpsk;
    use std::f64::consts::PI;

    const MHZ: f64 = 1e6;

    fn tone(f_hz: f64, rate: f64, len: usize) -> ComplexBuf {
        let w = 2.0 * PI * f_hz / rate;
        let v: Vec<_> = (0..len).map(|n| Complex64::from_polar(1.0, w * n as f64)).collect();
        ComplexBuf::new(v, rate).unwrap()
    }

    fn zigbee_wideband() -> WidebandSpec {
        WidebandSpec::new(16.0 * MHZ, 32, 2).unwrap()
    }

    fn three_streams(len: usize) -> Vec<StreamSpec> {
        [-5.0, 0.0, 5.0]
            .iter()
            .map(|&off| {
                StreamSpec::new(
                    tone(0.0, 4.0 * MHZ, len),
                    off * MHZ,
                    Scheme::ZigbeeOqpsk,
                )
            })
            .collect()
    }

    /// Frequency of the periodogram peak of `x`, Hz, resolution rate/len.
    fn peak_hz(x: &ComplexBuf) -> f64 {
        let n = x.len();
        let spec = dft(x.samples(), n).unwrap();
        let (k, _) = spec
            .bins()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        let ks = if k < (n + 1) / 2 { k as i64 } else { k as i64 - n as i64 };
        ks as f64 * x.sample_rate_hz() / n as f64
    }

    #[test]
    fn plan_matches_three_zigbee_task() {
        let wb = zigbee_wideband();
        let plan = plan_mux(&three_streams(64), &wb).unwrap();
        assert_eq!(plan.k_syn, 32);
        assert_eq!(plan.l_syn, 16);
        assert_eq!(plan.subband_interval_hz, 0.5 * MHZ);
        let shifts: Vec<_> = plan.streams.iter().map(|p| p.shift).collect();
        assert_eq!(shifts, vec![-10, 0, 10]);
        for p in &plan.streams {
            assert_eq!(p.k_ana, 8);
            assert_eq!(p.m_ana, 4);
            assert_eq!(p.ratio, 4);
        }
    }

    #[test]
    fn plan_single_centered_stream_is_identity() {
        let wb = zigbee_wideband();
        let s = vec![StreamSpec::new(tone(0.0, 4.0 * MHZ, 64), 0.0, Scheme::Qpsk)];
        let plan = plan_mux(&s, &wb).unwrap();
        assert_eq!(plan.streams[0].shift, 0);
        assert_eq!(plan.streams[0].k_ana, 8);
    }

    #[test]
    fn plan_rejects_collisions_and_misalignment() {
        let wb = zigbee_wideband();
        let two = vec![
            StreamSpec::new(tone(0.0, 4.0 * MHZ, 64), 0.0, Scheme::Qpsk),
            StreamSpec::new(tone(0.0, 4.0 * MHZ, 64), 0.0, Scheme::Qpsk),
        ];
        let err = plan_mux(&two, &wb).unwrap_err();
        assert!(matches!(err, Error::Plan(_)), "got {err}");
        assert!(err.to_string().contains("collide"));
        // allow_overlap accepts the same layout.
        assert!(plan_mux_with(&two, &wb, true).is_ok());

        let off = vec![StreamSpec::new(tone(0.0, 4.0 * MHZ, 64), 0.3 * MHZ, Scheme::Qpsk)];
        let err = plan_mux(&off, &wb).unwrap_err();
        assert!(err.to_string().contains("not grid-aligned"));

        let wide = vec![StreamSpec::new(tone(0.0, 16.0 * MHZ, 64), 4.0 * MHZ, Scheme::Qpsk)];
        assert!(plan_mux(&wide, &wb).is_err());

        let odd_rate = vec![StreamSpec::new(tone(0.0, 3.0 * MHZ, 64), 0.0, Scheme::Qpsk)];
        assert!(plan_mux(&odd_rate, &wb).is_err());
    }

    #[test]
    fn plan_serializes_to_json() {
        let wb = zigbee_wideband();
        let plan = plan_mux(&three_streams(64), &wb).unwrap();
        let j = serde_json::to_string(&plan).unwrap();
        let back: MuxPlan = serde_json::from_str(&j).unwrap();
        assert_eq!(back.streams[2].shift, 10);
    }

    #[test]
    fn nnpfb_single_stream_matches_forward_cascade() {
        let wb = WidebandSpec::new(16.0 * MHZ, 16, 2).unwrap();
        let (_, x) = gen_qpsk(64, 4, 0.35, 8.0 * MHZ, 7).unwrap();
        let streams = vec![StreamSpec::new(x.clone(), 0.0, Scheme::Qpsk)];
        let plan = plan_mux(&streams, &wb).unwrap();
        let syn = crate::filterbank::default_synthesis_prototype(16, 8).unwrap();
        let out = mux_nnpfb(&streams, &plan, &BTreeMap::new(), &syn, &wb).unwrap();

        let acfg = AnalysisBankConfig::new(8, 4, 2, default_analysis_prototype(8).unwrap()).unwrap();
        let scfg = SynthesisBankConfig::new(16, 8, 2, syn.clone()).unwrap();
        let gain = cascade_gain(&acfg, &scfg).unwrap();
        let learn_syn = LearnableSynthesisFilter::from_prototype(&syn).unwrap();
        let raw = forward(&x, &acfg, &learn_syn, &CascadeShape::new(16, 8, 2).unwrap()).unwrap();

        let trim = (acfg.prototype.len() - 1) / 2 * 2 + (syn.len() - 1) / 2;
        let a = out.samples();
        let b = &raw.samples()[trim..];
        let n = a.len().min(b.len());
        let scale_err: f64 = (0..n)
            .map(|i| (a[i] * gain - b[i]).norm())
            .fold(0.0, f64::max);
        let peak = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(scale_err < 1e-10 * peak.max(1.0), "max err {scale_err}");
    }

    #[test]
    fn tone_placement_all_methods() {
        let wb = zigbee_wideband();
        let f0 = 0.7 * MHZ;
        let streams: Vec<StreamSpec> = [-5.0, 0.0, 5.0]
            .iter()
            .map(|&off| StreamSpec::new(tone(f0, 4.0 * MHZ, 2048), off * MHZ, Scheme::Qpsk))
            .collect();
        let plan = plan_mux(&streams, &wb).unwrap();
        let syn = crate::filterbank::default_synthesis_prototype(32, 16).unwrap();
        for (name, out) in [
            ("nnpfb", mux_nnpfb(&streams, &plan, &BTreeMap::new(), &syn, &wb).unwrap()),
            ("direct", mux_direct(&streams, &wb).unwrap()),
            ("dft", mux_dft(&streams, &wb, 8).unwrap()),
        ] {
            for &off in &[-5.0, 0.0, 5.0] {
                let one = StreamSpec::new(tone(f0, 4.0 * MHZ, 2048), off * MHZ, Scheme::Qpsk);
                let down = demux_reference(&out, &one, &wb).unwrap();
                let bin = down.sample_rate_hz() / down.len() as f64;
                let peak = peak_hz(&down);
                assert!(
                    (peak - f0).abs() <= bin + 1e-6,
                    "{name} offset {off}: peak {peak} Hz, want {f0} +/- {bin}"
                );
            }
            // And directly on the wideband periodogram.
            let peak = peak_hz(&out);
            let bin = out.sample_rate_hz() / out.len() as f64;
            let targets = [-5.0 * MHZ + f0, f0, 5.0 * MHZ + f0];
            let nearest = targets
                .iter()
                .map(|t| (peak - t).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= bin + 1e-6, "{name}: wideband peak {peak} Hz");
        }
    }

    #[test]
    fn superposition_all_methods() {
        let wb = zigbee_wideband();
        let (_, a) = gen_qpsk(48, 4, 0.35, 4.0 * MHZ, 11).unwrap();
        let (_, b) = gen_qpsk(48, 4, 0.35, 4.0 * MHZ, 12).unwrap();
        let zero = ComplexBuf::zeros(a.len(), 4.0 * MHZ);
        let pair = |x: &ComplexBuf, y: &ComplexBuf| {
            vec![
                StreamSpec::new(x.clone(), -5.0 * MHZ, Scheme::Qpsk),
                StreamSpec::new(y.clone(), 5.0 * MHZ, Scheme::Qpsk),
            ]
        };
        let both = pair(&a, &b);
        let only_a = pair(&a, &zero);
        let only_b = pair(&zero, &b);
        let plan = plan_mux(&both, &wb).unwrap();
        let syn = crate::filterbank::default_synthesis_prototype(32, 16).unwrap();
        let run = |method: &str, s: &[StreamSpec]| -> ComplexBuf {
            match method {
                "nnpfb" => mux_nnpfb(s, &plan, &BTreeMap::new(), &syn, &wb).unwrap(),
                "direct" => mux_direct(s, &wb).unwrap(),
                _ => mux_dft(s, &wb, 8).unwrap(),
            }
        };
        for name in ["nnpfb", "direct", "dft"] {
            let full = run(name, &both);
            let pa = run(name, &only_a);
            let pb = run(name, &only_b);
            let peak = full.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
            let err = full
                .samples()
                .iter()
                .zip(pa.samples().iter().zip(pb.samples()))
                .map(|(&s, (&x, &y))| (s - (x + y)).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10 * peak.max(1.0), "{name}: superposition error {err}");
        }
    }

    #[test]
    fn dft_identity_at_unity_ratio() {
        let wb = WidebandSpec::new(4.0 * MHZ, 8, 2).unwrap();
        let (_, x) = gen_qpsk(32, 4, 0.35, 4.0 * MHZ, 3).unwrap();
        let streams = vec![StreamSpec::new(x.clone(), 0.0, Scheme::Qpsk)];
        let out = mux_dft(&streams, &wb, 8).unwrap();
        let n = x.len();
        let err = x
            .samples()
            .iter()
            .zip(&out.samples()[..n])
            .map(|(&a, &b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "identity error {err}");
    }

    #[test]
    fn direct_demux_loopback() {
        let wb = zigbee_wideband();
        let (_, x) = gen_qpsk(256, 4, 0.35, 4.0 * MHZ, 21).unwrap();
        let spec = StreamSpec::new(x.clone(), 0.0, Scheme::Qpsk);
        let streams = vec![spec.clone()];
        let out = mux_direct(&streams, &wb).unwrap();
        let back = demux_reference(&out, &spec, &wb).unwrap();
        let nmse = nmse_db(&back, &x, 64).unwrap();
        assert!(nmse <= -35.0, "loopback NMSE {nmse} dB");
    }

    #[test]
    fn empty_band_leakage_is_low() {
        let wb = zigbee_wideband();
        let (_, a) = gen_qpsk(256, 4, 0.35, 4.0 * MHZ, 31).unwrap();
        let (_, b) = gen_qpsk(256, 4, 0.35, 4.0 * MHZ, 32).unwrap();
        let streams = vec![
            StreamSpec::new(a.clone(), -5.0 * MHZ, Scheme::Qpsk),
            StreamSpec::new(b.clone(), 5.0 * MHZ, Scheme::Qpsk),
        ];
        let plan = plan_mux(&streams, &wb).unwrap();
        let syn = crate::filterbank::default_synthesis_prototype(32, 16).unwrap();
        let empty = StreamSpec::new(ComplexBuf::zeros(a.len(), 4.0 * MHZ), 0.0, Scheme::Qpsk);
        for (name, out) in [
            ("nnpfb", mux_nnpfb(&streams, &plan, &BTreeMap::new(), &syn, &wb).unwrap()),
            ("direct", mux_direct(&streams, &wb).unwrap()),
        ] {
            let silent = demux_reference(&out, &empty, &wb).unwrap();
            let active = demux_reference(&out, &streams[0], &wb).unwrap();
            let ratio_db = 10.0 * (silent.energy() / active.energy()).log10();
            assert!(ratio_db <= -40.0, "{name}: empty-band leakage {ratio_db} dB");
        }
    }

    #[test]
    fn empty_payloads_give_empty_output() {
        let wb = zigbee_wideband();
        let streams = vec![StreamSpec::new(
            ComplexBuf::new(Vec::new(), 4.0 * MHZ).unwrap(),
            0.0,
            Scheme::Qpsk,
        )];
        let plan = plan_mux(&streams, &wb).unwrap();
        let syn = crate::filterbank::default_synthesis_prototype(32, 16).unwrap();
        assert!(mux_nnpfb(&streams, &plan, &BTreeMap::new(), &syn, &wb).unwrap().is_empty());
        assert!(mux_direct(&streams, &wb).unwrap().is_empty());
        assert!(mux_dft(&streams, &wb, 8).unwrap().is_empty());
    }
}
