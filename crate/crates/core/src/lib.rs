//! Large-MIMO signal detection.
//!
//! The crate covers the flat-fading V-BLAST system model ([`model`]), PAM/QAM
//! constellations with the weighted ±1 bit decomposition ([`modem`]), the
//! detectors ([`detect`]), empirical instruments for bit-plane reliability
//! and local-minimum structure ([`diagnostics`]), and a seeded, parallel
//! Monte Carlo BER harness ([`sim`]).

pub mod detect;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod modem;
pub mod sim;

pub use detect::{
    bp_gai_detect, hybrid_rts_bp_detect, las_detect, ml_detect, ml_metric, mmse_initial,
    rts_detect, BpParams, DetectorOutput, HybridParams, RtsParams,
};
pub use error::{Error, Result};
pub use model::{ComplexChannel, NoiseSpec, RealSystemModel, SnrMode};
pub use modem::{BitPlanes, PamConstellation, Symbol};
pub use sim::{
    paired_compare, run_ber_sweep, BerRecord, DetectorKind, ExperimentConfig, Simulator,
};
