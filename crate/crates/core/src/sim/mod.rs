//! Experiment configuration, the Monte Carlo engine and result records.

pub mod config;
pub mod engine;
pub mod record;

pub use config::{snr_range, ConfigMap, DetectorKind, ExperimentConfig};
pub use engine::{
    frame_stream, paired_compare, run_ber_sweep, DetectorFrame, Frame, Simulator, StreamPurpose,
};
pub use record::{csv_header, write_csv, BerRecord};
