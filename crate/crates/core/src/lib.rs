//! Multirate DSP library for oversampled polyphase filter banks with a
//! gradient-trained synthesis prototype, used as a distortion-minimizing
//! spectrum multiplexer.
//!
//! The pipeline: an analysis filter bank decomposes each narrow-band
//! baseband stream into oversampled subbands; a subband-mapping plan routes
//! them into the bins of a shared synthesis filter bank, which emits a
//! single wideband stream. The synthesis prototype can be learned by
//! gradient descent on paired dual-rate waveforms (the cascade output is
//! linear in the taps, so gradients are exact). Direct
//! interpolate-and-modulate and block-DFT multiplexers are provided as
//! baselines.

pub mod error;
pub mod filterbank;
pub mod io;
pub mod learn;
pub mod multirate;
pub mod mux;
pub mod numerics;
pub mod waveforms;

pub use error::{Error, Result};
pub use numerics::ComplexBuf;
