//! Implementations behind the five subcommands. Each returns a core
//! `Result`; `main` maps error classes to exit codes.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use pfbmux_core::error::{Error, Result};
use pfbmux_core::filterbank::cascade_gain;
use pfbmux_core::learn::{
    make_training_pairs, train, LearnableSynthesisFilter, TrainConfig, TrainedFilterFile,
    TrainedFilterMeta,
};
use pfbmux_core::mux::{
    demux_reference, mux_dft, mux_direct, mux_nnpfb, plan_mux, MuxPlan, StreamSpec, WidebandSpec,
};
use pfbmux_core::numerics::{freq_response, nmse_db, ComplexBuf, PrototypeFilter};
use pfbmux_core::waveforms::{awgn, qpsk_ber, Scheme};

use crate::config::{render_payload_sized, ExperimentConfig};

/// On-disk form of a fixed (designed, not trained) prototype.
#[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
pub struct DesignedFilterFile {
    pub taps: Vec<f64>,
    pub cutoff_norm: f64,
}

fn write_response_csv(path: &Path, filter: &PrototypeFilter) -> Result<()> {
    let resp = freq_response(filter, 1024)?;
    let mut out = String::from("omega_norm,magnitude_db\n");
    for (w, db) in resp {
        out.push_str(&format!("{w},{db}\n"));
    }
    std::fs::write(path, out).map_err(Error::from)
}

/// `design`: write both prototypes and their frequency responses into the
/// output directory.
pub fn cmd_design(cfg: &ExperimentConfig, config_dir: &Path, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let analysis = cfg.analysis_prototype()?;
    let synthesis = cfg.synthesis_prototype(config_dir)?;
    for (name, f) in [("analysis", &analysis), ("synthesis", &synthesis)] {
        let file = DesignedFilterFile { taps: f.taps().to_vec(), cutoff_norm: f.cutoff_norm() };
        pfbmux_core::io::save_json(out_dir.join(format!("{name}_prototype.json")), &file)?;
        write_response_csv(&out_dir.join(format!("{name}_response.csv")), f)?;
    }
    println!(
        "{}",
        json!({
            "analysis_taps": analysis.len(),
            "analysis_cutoff_norm": analysis.cutoff_norm(),
            "synthesis_taps": synthesis.len(),
            "synthesis_cutoff_norm": synthesis.cutoff_norm(),
            "out_dir": out_dir,
        })
    );
    Ok(())
}

/// `train`: fit the synthesis prototype on the configured pair mixture;
/// writes the trained filter JSON and a loss-curve CSV next to it.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    out_path: &Path,
    seed_override: Option<u64>,
) -> Result<()> {
    let tc = cfg
        .training
        .as_ref()
        .ok_or_else(|| Error::config("config has no `training` section"))?;
    let wb = cfg.wideband_spec()?;
    let shape = cfg.cascade_shape()?;
    let acfg = cfg.analysis_bank()?;

    let mut pairs = Vec::new();
    for mix in &tc.pairs {
        pairs.extend(make_training_pairs(
            mix.scheme,
            mix.count,
            tc.pair_rate_hz,
            tc.ratio,
            cfg.bank.k_ana,
            mix.seed,
        )?);
    }
    let seed = seed_override.unwrap_or(tc.seed);
    let init = LearnableSynthesisFilter::init_model_driven(
        wb.k_syn,
        wb.l_syn(),
        2.0 * std::f64::consts::PI / wb.k_syn as f64,
        tc.synthesis_len,
    )?;
    let train_cfg = TrainConfig {
        epochs: tc.epochs,
        optimizer: tc.optimizer,
        batch: tc.batch,
        seed,
        train_analysis: false,
    };
    let outcome = train(&pairs, &train_cfg, &init, &acfg, &shape)?;
    let final_loss = *outcome.loss_curve.last().unwrap();

    let file = TrainedFilterFile {
        total_len: outcome.filter.total_len(),
        half_taps: outcome.filter.half_taps().to_vec(),
        cutoff_norm: outcome.filter.cutoff_norm(),
        k: wb.k_syn,
        l: wb.l_syn(),
        i: wb.i,
        metadata: TrainedFilterMeta { seed, epochs: tc.epochs, final_loss },
    };
    if let Some(dir) = out_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    pfbmux_core::io::save_trained_filter(out_path, &file)?;

    let loss_path = out_path.with_extension("loss.csv");
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in outcome.loss_curve.iter().enumerate() {
        csv.push_str(&format!("{e},{l}\n"));
    }
    std::fs::write(&loss_path, csv)?;

    println!(
        "{}",
        json!({
            "epochs": tc.epochs,
            "pairs": pairs.len(),
            "final_loss": final_loss,
            "filter": out_path,
            "loss_curve": loss_path,
        })
    );
    Ok(())
}

fn run_method(
    method: &str,
    streams: &[StreamSpec],
    plan: &MuxPlan,
    analysis: &BTreeMap<usize, PrototypeFilter>,
    synthesis: &PrototypeFilter,
    wb: &WidebandSpec,
    dft_block: usize,
) -> Result<ComplexBuf> {
    match method {
        "nnpfb" => mux_nnpfb(streams, plan, analysis, synthesis, wb),
        "direct" => mux_direct(streams, wb),
        "dft" => mux_dft(streams, wb, dft_block),
        other => Err(Error::config(format!(
            "unknown method `{other}` (expected nnpfb, direct, or dft)"
        ))),
    }
}

/// `mux`: combine the configured streams into one wideband cf32 file and
/// print a JSON summary of what was done.
pub fn cmd_mux(
    cfg: &ExperimentConfig,
    config_dir: &Path,
    method: &str,
    inputs: &[PathBuf],
    out_path: &Path,
) -> Result<()> {
    let wb = cfg.wideband_spec()?;
    let streams: Vec<StreamSpec> = cfg
        .realize_streams(config_dir, inputs)?
        .into_iter()
        .map(|(s, _)| s)
        .collect();
    let plan = plan_mux(&streams, &wb)?;

    let dft_block = cfg.evaluation.as_ref().map(|e| e.dft_block).unwrap_or(cfg.bank.k_ana);
    let (out, gain) = if method == "nnpfb" {
        let synthesis = cfg.synthesis_prototype(config_dir)?;
        let analysis = cfg.analysis_map()?;
        let scfg = pfbmux_core::filterbank::SynthesisBankConfig::new(
            wb.k_syn,
            wb.l_syn(),
            wb.i,
            synthesis.clone(),
        )?;
        let gain = cascade_gain(&cfg.analysis_bank()?, &scfg)?;
        (mux_nnpfb(&streams, &plan, &analysis, &synthesis, &wb)?, gain)
    } else {
        let analysis = BTreeMap::new();
        let synthesis = PrototypeFilter::delta();
        (run_method(method, &streams, &plan, &analysis, &synthesis, &wb, dft_block)?, 1.0)
    };

    pfbmux_core::io::write_cf32(out_path, out.samples())?;
    let summary = json!({
        "samples_out": out.len(),
        "gain": gain,
        "plan": plan,
    });
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{summary}").map_err(Error::from)?;
    Ok(())
}

/// `eval`: mux -> AWGN sweep -> demux; per-stream NMSE always, BER for
/// QPSK payloads. Emits a plot-ready CSV.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    config_dir: &Path,
    out_path: &Path,
    seed_override: Option<u64>,
) -> Result<()> {
    let ec = cfg
        .evaluation
        .as_ref()
        .ok_or_else(|| Error::config("config has no `evaluation` section"))?;
    let wb = cfg.wideband_spec()?;
    let realized = cfg.realize_streams(config_dir, &[])?;
    let streams: Vec<StreamSpec> = realized.iter().map(|(s, _)| s.clone()).collect();
    let plan = plan_mux(&streams, &wb)?;
    let synthesis = cfg.synthesis_prototype(config_dir)?;
    let analysis = cfg.analysis_map()?;
    let noise_seed = seed_override.unwrap_or(ec.seed);

    let mut csv = String::from("snr_db,method,stream,nmse_db,ber\n");
    for method in &ec.methods {
        let clean =
            run_method(method, &streams, &plan, &analysis, &synthesis, &wb, ec.dft_block)?;
        for (si, &snr) in ec.snr_db.iter().enumerate() {
            // >= 300 dB means noiseless (JSON cannot express infinity)
            let noisy = if snr >= 300.0 {
                clean.clone()
            } else {
                awgn(&clean, snr, noise_seed.wrapping_add(si as u64))?
            };
            for (idx, (spec, syms)) in realized.iter().enumerate() {
                let back = demux_reference(&noisy, spec, &wb)?;
                let nmse = nmse_db(&back, &spec.payload, 64)?;
                let ber = match syms {
                    Some(tx) if spec.scheme == Scheme::Qpsk => {
                        let sps = cfg.streams[idx].sps;
                        Some(qpsk_ber(&back, tx, sps, 0.35)?)
                    }
                    _ => None,
                };
                csv.push_str(&format!(
                    "{snr},{method},{idx},{nmse:.4},{}\n",
                    ber.map(|b| format!("{b:.6}")).unwrap_or_default()
                ));
            }
        }
    }
    std::fs::write(out_path, &csv)?;
    println!(
        "{}",
        json!({
            "metrics": out_path,
            "methods": ec.methods,
            "snr_points": ec.snr_db.len(),
            "streams": streams.len(),
        })
    );
    Ok(())
}

/// `bench`: wall-clock each method over a payload-size ladder; reports
/// median and interquartile range, asserting nothing about absolute times.
pub fn cmd_bench(cfg: &ExperimentConfig, config_dir: &Path, out_path: &Path) -> Result<()> {
    let bc = cfg
        .bench
        .as_ref()
        .ok_or_else(|| Error::config("config has no `bench` section"))?;
    if bc.repetitions == 0 {
        return Err(Error::config("bench repetitions must be >= 1"));
    }
    let wb = cfg.wideband_spec()?;
    let synthesis = cfg.synthesis_prototype(config_dir)?;
    let analysis = cfg.analysis_map()?;

    let mut csv = String::from("method,size_units,payload_samples,reps,median_ms,iqr_ms\n");
    for &size in &bc.sizes {
        let streams: Vec<StreamSpec> = cfg
            .streams
            .iter()
            .map(|s| {
                let (_, buf) = render_payload_sized(s, size)?;
                Ok(StreamSpec::new(buf, s.center_offset_hz, s.scheme))
            })
            .collect::<Result<_>>()?;
        if streams.is_empty() {
            return Err(Error::config("bench requires at least one configured stream"));
        }
        let payload_samples = streams[0].payload.len();
        let plan = plan_mux(&streams, &wb)?;
        for method in &bc.methods {
            let mut times_ms = Vec::with_capacity(bc.repetitions);
            for _ in 0..bc.repetitions {
                let t0 = Instant::now();
                let out =
                    run_method(method, &streams, &plan, &analysis, &synthesis, &wb, bc.dft_block)?;
                let dt = t0.elapsed().as_secs_f64() * 1e3;
                std::hint::black_box(out.len());
                times_ms.push(dt);
            }
            times_ms.sort_by(|a, b| a.total_cmp(b));
            let med = median(&times_ms);
            let q1 = median(&times_ms[..times_ms.len().div_ceil(2)]);
            let q3 = median(&times_ms[times_ms.len() / 2..]);
            csv.push_str(&format!(
                "{method},{size},{payload_samples},{},{med:.3},{:.3}\n",
                bc.repetitions,
                q3 - q1
            ));
        }
    }
    std::fs::write(out_path, &csv)?;
    print!("{csv}");
    Ok(())
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
