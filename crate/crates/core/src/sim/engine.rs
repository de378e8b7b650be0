//! Monte Carlo BER engine.
//!
//! Frames are the unit of work. Frame `f` draws its channel, data and noise
//! from three ChaCha streams keyed on `(master_seed, f, purpose)`, so every
//! detector in a paired run sees the same `(H, x, n)` and the result does not
//! depend on how frames are spread over workers. Frames are evaluated in
//! fixed-size batches in parallel and folded in frame order; the stopping
//! rule is applied frame by frame during the fold, and any frames evaluated
//! past the stopping point are discarded.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rayon::ThreadPool;

use super::config::{DetectorKind, ExperimentConfig};
use super::record::BerRecord;
use crate::detect::{
    bp_gai_detect, hybrid_rts_bp_detect_from, las_detect, ml_detect_with_cap, mmse_initial,
    rts_detect, DetectorOutput, HybridParams,
};
use crate::diagnostics::{plane_errors, BitPlaneStats};
use crate::error::{Error, Result};
use crate::model::{generate_channel, snr_to_sigma2_with_mode, NoiseSpec, RealSystemModel};
use crate::modem::{PamConstellation, Symbol};

/// Frames evaluated per parallel batch. Fixed so results never depend on
/// the worker count.
const BATCH: u64 = 64;

/// Purpose tag of a per-frame random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Channel = 1,
    Data = 2,
    Noise = 3,
}

/// Counter-based substream: the ChaCha key holds the master seed and the
/// purpose tag, the stream id is the frame index.
pub fn frame_stream(master_seed: u64, frame: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(frame);
    rng
}

/// One simulated transmission.
#[derive(Debug, Clone)]
pub struct Frame {
    pub index: u64,
    pub model: RealSystemModel,
    pub truth: Vec<Symbol>,
}

/// What one detector did on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorFrame {
    pub detector: DetectorKind,
    pub output: DetectorOutput,
    pub plane_errors: Vec<u64>,
    pub seconds: f64,
}

impl DetectorFrame {
    pub fn bit_errors(&self) -> u64 {
        self.plane_errors.iter().sum()
    }
}

pub struct Simulator {
    cfg: ExperimentConfig,
    constellation: PamConstellation,
    hybrid: HybridParams,
    needs_gram: bool,
    pool: ThreadPool,
}

impl Simulator {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
        Ok(Self {
            constellation: cfg.constellation()?,
            hybrid: cfg.hybrid_params(),
            needs_gram: cfg.detectors.iter().any(|d| d.needs_gram()),
            cfg,
            pool,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn constellation(&self) -> &PamConstellation {
        &self.constellation
    }

    /// Complex noise variance for `snr_db`, or 0 when noise is disabled.
    pub fn sigma2(&self, snr_db: f64) -> f64 {
        if self.cfg.noiseless {
            0.0
        } else {
            snr_to_sigma2_with_mode(snr_db, self.cfg.nt, &self.constellation, self.cfg.snr_mode)
        }
    }

    pub fn generate_frame(&self, sigma2: f64, index: u64) -> Result<Frame> {
        let seed = self.cfg.master_seed;
        let hc = generate_channel(
            self.cfg.nt,
            self.cfg.nr,
            &mut frame_stream(seed, index, StreamPurpose::Channel),
        );
        let truth = self.constellation.random_vector(
            self.cfg.nt,
            &mut frame_stream(seed, index, StreamPurpose::Data),
        );
        let h = hc.to_real();
        let clean =
            &h * nalgebra::DVector::from_iterator(truth.len(), truth.iter().map(|&v| v as f64));
        let noise = if sigma2 > 0.0 {
            NoiseSpec::new(sigma2)?
        } else {
            NoiseSpec::disabled()
        };
        let y = noise.add_noise(&clean, &mut frame_stream(seed, index, StreamPurpose::Noise));
        let mut model = RealSystemModel::new(h, y, sigma2)?;
        if self.needs_gram {
            model = model.with_gram();
        }
        Ok(Frame {
            index,
            model,
            truth,
        })
    }

    /// Runs one detector on `model`. Local searches start from the MMSE
    /// initial vector.
    pub fn detect(&self, kind: DetectorKind, model: &RealSystemModel) -> Result<DetectorOutput> {
        let c = &self.constellation;
        Ok(match kind {
            DetectorKind::Ml => ml_detect_with_cap(model, c, self.cfg.ml_cap)?,
            DetectorKind::Mmse => {
                let x = mmse_initial(model, c)?;
                DetectorOutput {
                    metric: model.residual_norm2(&x),
                    x_hat: x,
                    iterations_used: 0,
                    trace: None,
                }
            }
            DetectorKind::Las => las_detect(model, c, &mmse_initial(model, c)?),
            DetectorKind::Rts => rts_detect(model, c, &self.cfg.rts, &mmse_initial(model, c)?),
            DetectorKind::Bp => {
                let bp = bp_gai_detect(model, &self.cfg.bp);
                DetectorOutput {
                    metric: model.residual_norm2(&bp.decisions),
                    x_hat: bp.decisions,
                    iterations_used: self.cfg.bp.iterations,
                    trace: None,
                }
            }
            DetectorKind::Hybrid => {
                hybrid_rts_bp_detect_from(model, c, &self.hybrid, &mmse_initial(model, c)?)?
            }
        })
    }

    /// Generates frame `index` and runs every configured detector on it.
    pub fn simulate_frame(&self, sigma2: f64, index: u64) -> Result<(Frame, Vec<DetectorFrame>)> {
        let frame = self.generate_frame(sigma2, index)?;
        let mut results = Vec::with_capacity(self.cfg.detectors.len());
        for &kind in &self.cfg.detectors {
            let start = Instant::now();
            let output = self.detect(kind, &frame.model)?;
            let seconds = start.elapsed().as_secs_f64();
            let plane_errors = plane_errors(&frame.truth, &output.x_hat, &self.constellation)?;
            results.push(DetectorFrame {
                detector: kind,
                output,
                plane_errors,
                seconds,
            });
        }
        Ok((frame, results))
    }

    /// Simulates one SNR point for every detector on identical frames.
    pub fn run_point(&self, snr_db: f64) -> Result<Vec<BerRecord>> {
        let sigma2 = self.sigma2(snr_db);
        let n_det = self.cfg.detectors.len();
        let n_planes = self.constellation.n_bits();
        let dims = (2 * self.cfg.nt) as u64;
        let mut stats = vec![BitPlaneStats::new(n_planes); n_det];
        let mut seconds = vec![0.0; n_det];
        let mut frames = 0u64;
        let cap = self.cfg.frames_per_point;
        let target = self.cfg.target_bit_errors;

        let done = |stats: &[BitPlaneStats]| {
            target.is_some_and(|t| stats.iter().all(|s| s.total_errors() >= t))
        };

        'batches: while frames < cap {
            let end = (frames + BATCH).min(cap);
            let batch: Vec<Result<Vec<DetectorFrame>>> = self.pool.install(|| {
                (frames..end)
                    .into_par_iter()
                    .map(|f| self.simulate_frame(sigma2, f).map(|(_, r)| r))
                    .collect()
            });
            for result in batch {
                for (k, det) in result?.into_iter().enumerate() {
                    stats[k].add_frame(&det.plane_errors, dims);
                    seconds[k] += det.seconds;
                }
                frames += 1;
                if done(&stats) {
                    break 'batches;
                }
            }
        }

        Ok(self
            .cfg
            .detectors
            .iter()
            .zip(stats)
            .zip(seconds)
            .map(|((&detector, planes), wall)| BerRecord {
                detector,
                nt: self.cfg.nt,
                nr: self.cfg.nr,
                modulation: self.cfg.modulation,
                snr_db,
                frames,
                total_bits: planes.total_bits(),
                bit_errors: planes.total_errors(),
                planes,
                wall_time_s: wall,
                seed: self.cfg.master_seed,
            })
            .collect())
    }

    /// Every SNR point, records ordered by SNR then detector.
    pub fn run(&self) -> Result<Vec<BerRecord>> {
        let mut out = Vec::new();
        for &snr in &self.cfg.snr_grid {
            out.extend(self.run_point(snr)?);
        }
        Ok(out)
    }
}

/// BER sweep of the single configured detector.
pub fn run_ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>> {
    if cfg.detectors.len() != 1 {
        return Err(Error::Config(format!(
            "a sweep runs exactly one detector, got {}",
            cfg.detectors.len()
        )));
    }
    Simulator::new(cfg.clone())?.run()
}

/// Paired run: every detector sees identical frames. A point stops once
/// every detector has reached the error target, so frame counts match.
pub fn paired_compare(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>> {
    if cfg.detectors.len() < 2 {
        return Err(Error::Config(
            "a paired comparison needs at least two detectors".into(),
        ));
    }
    Simulator::new(cfg.clone())?.run()
}
