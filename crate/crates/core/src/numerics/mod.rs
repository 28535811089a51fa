//! Complex-buffer foundation, small direct DFT/IDFT kernels, windowed-sinc
//! prototype design, and quality metrics.

mod buf;
mod dft;
mod firdes;
mod metrics;

pub use buf::ComplexBuf;
pub use dft::{dft, idft, Spectrum, Twiddles};
pub use firdes::{design_windowed_sinc, freq_response, magnitude_at, PrototypeFilter, Window};
pub use metrics::{best_lag, nmse_db, nmse_db_with_lag, NMSE_FLOOR_DB};
