//! Shared fixtures for the multiplexer benchmarks.

use std::collections::BTreeMap;

use pfbmux_core::filterbank::default_synthesis_prototype;
use pfbmux_core::mux::{mux_dft, mux_direct, mux_nnpfb, plan_mux, MuxPlan, StreamSpec, WidebandSpec};
use pfbmux_core::numerics::{ComplexBuf, PrototypeFilter};
use pfbmux_core::waveforms::{zigbee_from_bits, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The three-O-QPSK 4 MHz -> 16 MHz task at a given payload size (bits).
pub struct Scenario {
    pub streams: Vec<StreamSpec>,
    pub wb: WidebandSpec,
    pub plan: MuxPlan,
    pub synthesis: PrototypeFilter,
}

impl Scenario {
    pub fn three_zigbee(bits: usize, seed: u64) -> Self {
        let wb = WidebandSpec::new(16e6, 32, 2).unwrap();
        let streams: Vec<StreamSpec> = [(-5e6, seed), (0.0, seed + 1), (5e6, seed + 2)]
            .iter()
            .map(|&(off, s)| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let payload: Vec<u8> = (0..bits).map(|_| rng.gen_range(0..2u8)).collect();
                StreamSpec::new(
                    zigbee_from_bits(&payload, 2, 4e6).unwrap(),
                    off,
                    Scheme::ZigbeeOqpsk,
                )
            })
            .collect();
        let plan = plan_mux(&streams, &wb).unwrap();
        let synthesis = default_synthesis_prototype(32, 16).unwrap();
        Self { streams, wb, plan, synthesis }
    }

    pub fn run(&self, method: &str) -> ComplexBuf {
        match method {
            "nnpfb" => {
                mux_nnpfb(&self.streams, &self.plan, &BTreeMap::new(), &self.synthesis, &self.wb)
                    .unwrap()
            }
            "direct" => mux_direct(&self.streams, &self.wb).unwrap(),
            "dft" => mux_dft(&self.streams, &self.wb, 8).unwrap(),
            other => panic!("unknown method {other}"),
        }
    }
}
