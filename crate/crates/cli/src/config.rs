//! JSON experiment configuration shared by all subcommands. The schema is
//! documented in the repository README; every section is optional except
//! `wideband` and `bank`, and each command validates only what it needs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pfbmux_core::error::{Error, Result};
use pfbmux_core::filterbank::{
    default_analysis_prototype, default_synthesis_prototype, AnalysisBankConfig,
};
use pfbmux_core::learn::{CascadeShape, LearnableSynthesisFilter, Optimizer};
use pfbmux_core::mux::{StreamSpec, WidebandSpec};
use pfbmux_core::numerics::{design_windowed_sinc, ComplexBuf, PrototypeFilter, Window};
use pfbmux_core::waveforms::{gen_qpsk, gmsk_from_bits, zigbee_from_bits, Scheme, SymbolStream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub wideband: WidebandCfg,
    pub bank: BankCfg,
    #[serde(default)]
    pub streams: Vec<StreamCfg>,
    #[serde(default)]
    pub training: Option<TrainingCfg>,
    #[serde(default)]
    pub evaluation: Option<EvalCfg>,
    #[serde(default)]
    pub bench: Option<BenchCfg>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidebandCfg {
    pub sample_rate_hz: f64,
    pub k_syn: usize,
    pub i: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankCfg {
    pub k_ana: usize,
    pub m_ana: usize,
    /// Analysis prototype; stock Kaiser sinc at pi/K when omitted.
    #[serde(default)]
    pub analysis: Option<FilterCfg>,
    /// Synthesis prototype source; stock Kaiser sinc at 2pi/K when omitted.
    #[serde(default)]
    pub synthesis: Option<SynthesisCfg>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterCfg {
    KaiserSinc { cutoff_norm: f64, taps: usize, beta: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthesisCfg {
    /// Load a filter produced by `pfbmux train`.
    TrainedFilter { path: PathBuf },
    /// Fixed windowed-sinc design, scaled by L for unity cascade gain.
    KaiserSinc { cutoff_norm: f64, taps: usize, beta: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamCfg {
    pub scheme: Scheme,
    pub center_offset_hz: f64,
    pub sample_rate_hz: f64,
    /// Path to an interleaved LE float32 I/Q file; generated when omitted.
    #[serde(default)]
    pub payload: Option<PathBuf>,
    /// Generated-payload size: QPSK symbols, or bits for the others.
    #[serde(default = "default_units")]
    pub units: usize,
    #[serde(default = "default_sps")]
    pub sps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_units() -> usize {
    256
}

fn default_sps() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingCfg {
    pub epochs: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
    /// 0 means full batch.
    #[serde(default)]
    pub batch: usize,
    #[serde(default)]
    pub seed: u64,
    /// Low-rate sample rate of the training pairs.
    pub pair_rate_hz: f64,
    /// High/low rate ratio of the pairs.
    pub ratio: usize,
    pub pairs: Vec<PairMixCfg>,
    #[serde(default = "default_synthesis_len")]
    pub synthesis_len: usize,
}

fn default_optimizer() -> Optimizer {
    Optimizer::ConjugateGradient
}

fn default_synthesis_len() -> usize {
    253
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairMixCfg {
    pub scheme: Scheme,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalCfg {
    /// Values >= 300 dB are treated as noiseless.
    pub snr_db: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_dft_block")]
    pub dft_block: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_methods() -> Vec<String> {
    vec!["nnpfb".into(), "direct".into(), "dft".into()]
}

fn default_dft_block() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchCfg {
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    /// Payload-size ladder, in stream units (QPSK symbols / bits).
    pub sizes: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_dft_block")]
    pub dft_block: usize,
}

fn default_reps() -> usize {
    10
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(Error::from)
    }

    pub fn wideband_spec(&self) -> Result<WidebandSpec> {
        WidebandSpec::new(self.wideband.sample_rate_hz, self.wideband.k_syn, self.wideband.i)
    }

    pub fn analysis_prototype(&self) -> Result<PrototypeFilter> {
        match &self.bank.analysis {
            None => default_analysis_prototype(self.bank.k_ana),
            Some(FilterCfg::KaiserSinc { cutoff_norm, taps, beta }) => {
                design_windowed_sinc(*cutoff_norm, *taps, Window::Kaiser(*beta))
            }
        }
    }

    pub fn analysis_bank(&self) -> Result<AnalysisBankConfig> {
        AnalysisBankConfig::new(
            self.bank.k_ana,
            self.bank.m_ana,
            self.wideband.i,
            self.analysis_prototype()?,
        )
    }

    /// Per-ring analysis prototypes for `mux_nnpfb`; one entry, since the
    /// config describes a single analysis geometry.
    pub fn analysis_map(&self) -> Result<BTreeMap<usize, PrototypeFilter>> {
        let mut map = BTreeMap::new();
        map.insert(self.bank.k_ana, self.analysis_prototype()?);
        Ok(map)
    }

    pub fn cascade_shape(&self) -> Result<CascadeShape> {
        let wb = self.wideband_spec()?;
        CascadeShape::new(wb.k_syn, wb.l_syn(), wb.i)
    }

    pub fn synthesis_prototype(&self, config_dir: &Path) -> Result<PrototypeFilter> {
        let wb = self.wideband_spec()?;
        match &self.bank.synthesis {
            None => default_synthesis_prototype(wb.k_syn, wb.l_syn()),
            Some(SynthesisCfg::KaiserSinc { cutoff_norm, taps, beta }) => {
                let f = design_windowed_sinc(*cutoff_norm, *taps, Window::Kaiser(*beta))?;
                Ok(f.scaled(wb.l_syn() as f64))
            }
            Some(SynthesisCfg::TrainedFilter { path }) => {
                let resolved = resolve(config_dir, path);
                let file = pfbmux_core::io::load_trained_filter(&resolved)?;
                let learned: LearnableSynthesisFilter = file.filter()?;
                Ok(learned.materialize())
            }
        }
    }

    /// Realize the configured streams: read payload files when given,
    /// otherwise render deterministically from the scheme and seed. QPSK
    /// symbol streams are returned for BER scoring where applicable.
    pub fn realize_streams(
        &self,
        config_dir: &Path,
        payload_override: &[PathBuf],
    ) -> Result<Vec<(StreamSpec, Option<SymbolStream>)>> {
        if !payload_override.is_empty() && payload_override.len() != self.streams.len() {
            return Err(Error::config(format!(
                "{} --in files for {} configured streams",
                payload_override.len(),
                self.streams.len()
            )));
        }
        self.streams
            .iter()
            .enumerate()
            .map(|(idx, s)| {
                let over = payload_override.get(idx);
                let path = over.or(s.payload.as_ref());
                if let Some(p) = path {
                    let buf =
                        pfbmux_core::io::read_cf32_buf(resolve(config_dir, p), s.sample_rate_hz)?;
                    Ok((StreamSpec::new(buf, s.center_offset_hz, s.scheme), None))
                } else {
                    let (syms, buf) = render_payload(s)?;
                    Ok((StreamSpec::new(buf, s.center_offset_hz, s.scheme), syms))
                }
            })
            .collect()
    }
}

pub fn render_payload(s: &StreamCfg) -> Result<(Option<SymbolStream>, ComplexBuf)> {
    render_payload_sized(s, s.units)
}

pub fn render_payload_sized(
    s: &StreamCfg,
    units: usize,
) -> Result<(Option<SymbolStream>, ComplexBuf)> {
    match s.scheme {
        Scheme::Qpsk => {
            let (syms, buf) = gen_qpsk(units, s.sps, 0.35, s.sample_rate_hz, s.seed)?;
            Ok((Some(syms), buf))
        }
        Scheme::ZigbeeOqpsk => {
            let bits = random_bits(units, s.seed);
            Ok((None, zigbee_from_bits(&bits, s.sps, s.sample_rate_hz)?))
        }
        Scheme::Gmsk => {
            let bits = random_bits(units, s.seed);
            Ok((None, gmsk_from_bits(&bits, s.sps, 0.5, s.sample_rate_hz)?))
        }
    }
}

fn random_bits(count: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen_range(0..2u8)).collect()
}

/// Relative paths in the config resolve against the config file location.
pub fn resolve(config_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        config_dir.join(path)
    }
}
