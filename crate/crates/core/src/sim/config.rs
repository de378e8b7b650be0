//! Experiment configuration and its plain-text file format.
//!
//! Files are flat `key = value` lines grouped under `[section]` headers.
//! `#` starts a comment. Every key is addressed as `section.key`, which is
//! also how command-line overrides are applied (see [`ConfigMap::set`]).
//!
//! ```text
//! [system]
//! nt = 16            # transmit antennas
//! nr = 16            # receive antennas
//! mod = 16           # QAM order: 4, 16 or 64
//!
//! [sweep]
//! snr_start = 10     # dB
//! snr_stop = 20      # dB, inclusive
//! snr_step = 2       # dB
//! snr_points = 11,13 # explicit grid; overrides start/stop/step
//! snr_mode = per-antenna   # or ebn0
//! frames = 10000     # frame cap per SNR point
//! target_errors = 200      # stop a point early once reached; 0 disables
//! seed = 1
//! workers = 1
//! noise = on         # off simulates sigma2 = 0
//! timing = on        # off writes wall_time_s = 0 for byte-stable output
//!
//! [detector]
//! detectors = rts,hybrid   # ml, mmse, las, rts, bp, hybrid
//!
//! [rts]
//! max_iters = 500    # default depends on the modulation
//! tabu_init = 2
//! tabu_min = 1
//! tabu_max = 32      # default 2 nt
//! stable_window = 50
//! growth = 1.1
//! early_stop = 1.1   # alpha of the noise-floor test, or off
//!
//! [bp]
//! iters = 20
//! damping = 0.4
//!
//! [hybrid]
//! outer = 2
//!
//! [ml]
//! cap = 16777216     # largest exhaustive search allowed
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::detect::{BpParams, HybridParams, RtsParams, DEFAULT_ML_CAP};
use crate::error::{Error, Result};
use crate::model::SnrMode;
use crate::modem::PamConstellation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    Ml,
    Mmse,
    Las,
    Rts,
    Bp,
    Hybrid,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Ml,
        DetectorKind::Mmse,
        DetectorKind::Las,
        DetectorKind::Rts,
        DetectorKind::Bp,
        DetectorKind::Hybrid,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            DetectorKind::Ml => "ml",
            DetectorKind::Mmse => "mmse",
            DetectorKind::Las => "las",
            DetectorKind::Rts => "rts",
            DetectorKind::Bp => "bp",
            DetectorKind::Hybrid => "hybrid",
        }
    }

    /// Whether the detector reads the cached Gram matrix.
    pub fn needs_gram(self) -> bool {
        !matches!(self, DetectorKind::Ml | DetectorKind::Bp)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|d| d.tag() == s || (s == "rts-bp" && *d == DetectorKind::Hybrid))
            .ok_or_else(|| Error::Config(format!("unknown detector '{s}'")))
    }
}

/// One Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub nt: usize,
    pub nr: usize,
    /// QAM order.
    pub modulation: usize,
    pub snr_grid: Vec<f64>,
    pub snr_mode: SnrMode,
    pub detectors: Vec<DetectorKind>,
    pub frames_per_point: u64,
    /// Stop a point once every detector has this many bit errors.
    pub target_bit_errors: Option<u64>,
    pub master_seed: u64,
    pub rts: RtsParams,
    pub bp: BpParams,
    pub hybrid_outer: usize,
    pub workers: usize,
    /// Simulate with `sigma2 = 0`.
    pub noiseless: bool,
    /// Write measured wall time; when false the CSV is byte-stable.
    pub record_timing: bool,
    pub ml_cap: u128,
}

impl ExperimentConfig {
    /// Defaults for an `nt x nr` system with `qam`-QAM.
    pub fn new(nt: usize, nr: usize, qam: usize) -> Result<Self> {
        let c = PamConstellation::for_qam(qam)?;
        Ok(Self {
            nt,
            nr,
            modulation: qam,
            snr_grid: vec![10.0],
            snr_mode: SnrMode::PerAntenna,
            detectors: vec![DetectorKind::Rts],
            frames_per_point: 10_000,
            target_bit_errors: Some(200),
            master_seed: 1,
            rts: RtsParams::for_constellation(&c),
            bp: BpParams::default(),
            hybrid_outer: 2,
            workers: 1,
            noiseless: false,
            record_timing: true,
            ml_cap: DEFAULT_ML_CAP,
        })
    }

    pub fn constellation(&self) -> Result<PamConstellation> {
        PamConstellation::for_qam(self.modulation)
    }

    pub fn hybrid_params(&self) -> HybridParams {
        HybridParams {
            outer_iterations: self.hybrid_outer,
            rts: self.rts.clone(),
            bp: self.bp.clone(),
        }
    }

    /// Bits carried by one frame, `2 nt log2 sqrt(M)`.
    pub fn bits_per_frame(&self) -> u64 {
        let c = self.constellation().expect("validated modulation");
        (2 * self.nt * c.n_bits()) as u64
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.nt == 0 || self.nr == 0 {
            return fail("nt and nr must be at least 1".into());
        }
        if ![4, 16, 64].contains(&self.modulation) {
            return fail(format!(
                "modulation must be 4, 16 or 64, got {}",
                self.modulation
            ));
        }
        if self.snr_grid.is_empty() {
            return fail("SNR grid is empty".into());
        }
        if self.snr_grid.iter().any(|s| !s.is_finite()) {
            return fail("SNR grid values must be finite".into());
        }
        if self.detectors.is_empty() {
            return fail("no detector selected".into());
        }
        if self.frames_per_point == 0 {
            return fail("frames per point must be at least 1".into());
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        if self.hybrid_outer == 0 {
            return fail("hybrid outer iterations must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.bp.damping) {
            return fail(format!(
                "BP damping must lie in [0, 1), got {}",
                self.bp.damping
            ));
        }
        if self.bp.iterations == 0 {
            return fail("BP iterations must be at least 1".into());
        }
        if self.rts.max_iterations == 0 {
            return fail("RTS iterations must be at least 1".into());
        }
        if self.rts.growth < 1.0 || !self.rts.growth.is_finite() {
            return fail("RTS tabu growth must be >= 1".into());
        }
        let c = self.constellation()?;
        if self.detectors.contains(&DetectorKind::Bp) && c.m() != 2 {
            return fail("the bp detector handles ±1 alphabets only (mod = 4)".into());
        }
        if self.detectors.contains(&DetectorKind::Ml) {
            let candidates = (c.m() as u128)
                .checked_pow(2 * self.nt as u32)
                .unwrap_or(u128::MAX);
            if candidates > self.ml_cap {
                return Err(Error::OracleScale {
                    candidates,
                    cap: self.ml_cap,
                });
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Serializes every setting, defaults included, in the file format.
    /// Parsing the text back with [`ConfigMap::parse`] rebuilds `self`.
    pub fn to_config_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut t = String::new();
        t.push_str("# frames: fresh i.i.d. CN(0,1) channel, data and noise per frame\n");
        t.push_str("# stop rule: frame cap or target_errors reached by every detector\n");
        t.push_str(&format!(
            "[system]\nnt = {}\nnr = {}\nmod = {}\n\n",
            self.nt, self.nr, self.modulation
        ));
        t.push_str("[sweep]\n");
        t.push_str(&format!(
            "snr_points = {}\n",
            join(self.snr_grid.iter().map(f64::to_string).collect())
        ));
        t.push_str(&format!("snr_mode = {}\n", self.snr_mode));
        t.push_str(&format!("frames = {}\n", self.frames_per_point));
        t.push_str(&format!(
            "target_errors = {}\n",
            self.target_bit_errors.unwrap_or(0)
        ));
        t.push_str(&format!("seed = {}\n", self.master_seed));
        t.push_str(&format!("workers = {}\n", self.workers));
        t.push_str(&format!(
            "noise = {}\n",
            if self.noiseless { "off" } else { "on" }
        ));
        t.push_str(&format!(
            "timing = {}\n\n",
            if self.record_timing { "on" } else { "off" }
        ));
        t.push_str(&format!(
            "[detector]\ndetectors = {}\n\n",
            join(self.detectors.iter().map(|d| d.tag().to_string()).collect())
        ));
        let r = &self.rts;
        t.push_str(&format!(
            "[rts]\nmax_iters = {}\ntabu_init = {}\ntabu_min = {}\ntabu_max = {}\nstable_window = {}\ngrowth = {}\nearly_stop = {}\n\n",
            r.max_iterations,
            r.initial_tabu_period,
            r.min_tabu_period,
            r.max_tabu_period.unwrap_or(2 * self.nt),
            r.stable_window,
            r.growth,
            r.early_stop_alpha.map_or("off".to_string(), |a| a.to_string()),
        ));
        t.push_str(&format!(
            "[bp]\niters = {}\ndamping = {}\n\n",
            self.bp.iterations, self.bp.damping
        ));
        t.push_str(&format!(
            "[hybrid]\nouter = {}\n\n[ml]\ncap = {}\n",
            self.hybrid_outer, self.ml_cap
        ));
        t
    }
}

/// Inclusive SNR grid `start, start + step, ..., <= stop`.
pub fn snr_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !step.is_finite() || step <= 0.0 || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Config(
            "SNR range needs finite bounds and a positive step".into(),
        ));
    }
    if stop < start {
        return Err(Error::Config("SNR stop lies below start".into()));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| start + k as f64 * step).collect())
}

/// `section.key -> value` pairs collected from a file and overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "system.nt",
    "system.nr",
    "system.mod",
    "sweep.snr_start",
    "sweep.snr_stop",
    "sweep.snr_step",
    "sweep.snr_points",
    "sweep.snr_mode",
    "sweep.frames",
    "sweep.target_errors",
    "sweep.seed",
    "sweep.workers",
    "sweep.noise",
    "sweep.timing",
    "detector.detectors",
    "detector.detector",
    "rts.max_iters",
    "rts.tabu_init",
    "rts.tabu_min",
    "rts.tabu_max",
    "rts.stable_window",
    "rts.growth",
    "rts.early_stop",
    "bp.iters",
    "bp.damping",
    "hybrid.outer",
    "ml.cap",
];

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses the sectioned `key = value` format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    Error::Config(format!("line {}: malformed section header", lineno + 1))
                })?;
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_ascii_lowercase();
            if section.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: key '{key}' appears before any [section]",
                    lineno + 1
                )));
            }
            map.set(&format!("{section}.{key}"), value.trim())?;
        }
        Ok(map)
    }

    /// Sets `section.key`, replacing any earlier value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown configuration key '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
            })
            .transpose()
    }

    fn switch(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "on" | "true" | "yes" | "1" => Ok(true),
                "off" | "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!("invalid switch '{v}' for {key}"))),
            })
            .transpose()
    }

    /// Builds and validates the experiment.
    pub fn build(&self) -> Result<ExperimentConfig> {
        let nt = self.parsed("system.nt")?.unwrap_or(16);
        let nr = self.parsed("system.nr")?.unwrap_or(nt);
        let qam = self.parsed("system.mod")?.unwrap_or(4);
        let mut cfg = ExperimentConfig::new(nt, nr, qam)?;

        if let Some(list) = self.get("sweep.snr_points") {
            cfg.snr_grid = list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("invalid SNR point '{s}'")))
                })
                .collect::<Result<_>>()?;
        } else {
            let start = self.parsed("sweep.snr_start")?.unwrap_or(10.0);
            let stop = self.parsed("sweep.snr_stop")?.unwrap_or(start);
            let step = self.parsed("sweep.snr_step")?.unwrap_or(1.0);
            cfg.snr_grid = snr_range(start, stop, step)?;
        }
        if let Some(mode) = self.parsed::<SnrMode>("sweep.snr_mode")? {
            cfg.snr_mode = mode;
        }
        if let Some(f) = self.parsed("sweep.frames")? {
            cfg.frames_per_point = f;
        }
        if let Some(t) = self.parsed::<u64>("sweep.target_errors")? {
            cfg.target_bit_errors = (t > 0).then_some(t);
        }
        if let Some(s) = self.parsed("sweep.seed")? {
            cfg.master_seed = s;
        }
        if let Some(w) = self.parsed("sweep.workers")? {
            cfg.workers = w;
        }
        if let Some(noise) = self.switch("sweep.noise")? {
            cfg.noiseless = !noise;
        }
        if let Some(t) = self.switch("sweep.timing")? {
            cfg.record_timing = t;
        }

        let list = self
            .get("detector.detectors")
            .or_else(|| self.get("detector.detector"));
        if let Some(list) = list {
            cfg.detectors = list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(str::parse)
                .collect::<Result<_>>()?;
        }

        if let Some(v) = self.parsed("rts.max_iters")? {
            cfg.rts.max_iterations = v;
        }
        if let Some(v) = self.parsed("rts.tabu_init")? {
            cfg.rts.initial_tabu_period = v;
        }
        if let Some(v) = self.parsed("rts.tabu_min")? {
            cfg.rts.min_tabu_period = v;
        }
        if let Some(v) = self.parsed("rts.tabu_max")? {
            cfg.rts.max_tabu_period = Some(v);
        }
        if let Some(v) = self.parsed("rts.stable_window")? {
            cfg.rts.stable_window = v;
        }
        if let Some(v) = self.parsed("rts.growth")? {
            cfg.rts.growth = v;
        }
        if let Some(v) = self.get("rts.early_stop") {
            cfg.rts.early_stop_alpha = match v.to_ascii_lowercase().as_str() {
                "off" | "none" | "false" => None,
                _ => Some(self.parsed("rts.early_stop")?.expect("present")),
            };
        }
        if let Some(v) = self.parsed("bp.iters")? {
            cfg.bp.iterations = v;
        }
        if let Some(v) = self.parsed("bp.damping")? {
            cfg.bp.damping = v;
        }
        if let Some(v) = self.parsed("hybrid.outer")? {
            cfg.hybrid_outer = v;
        }
        if let Some(v) = self.parsed("ml.cap")? {
            cfg.ml_cap = v;
        }

        cfg.validate()?;
        Ok(cfg)
    }
}
