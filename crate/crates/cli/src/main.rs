//! `largemimo` command-line simulator.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error (including
//! a failed `check`).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use largemimo::diagnostics::{run_invariant_checks, wilson_interval, Z_95};
use largemimo::sim::{write_csv, ConfigMap, DetectorKind, Simulator};
use largemimo::{BerRecord, Error, ExperimentConfig, Result};

const SEED_ENV: &str = "LARGEMIMO_SEED";

#[derive(Parser)]
#[command(name = "largemimo", version, about = "Large-MIMO detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BER sweep of one detector.
    Ber {
        #[command(flatten)]
        sweep: SweepArgs,
        /// ml, mmse, las, rts, bp or hybrid.
        #[arg(long)]
        detector: Option<DetectorKind>,
    },
    /// Paired run of several detectors on identical frames.
    Compare {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Comma-separated detector list, e.g. rts,hybrid.
        #[arg(long, value_delimiter = ',')]
        detectors: Option<Vec<DetectorKind>>,
    },
    /// Per-bit-plane error rates of RTS, overall and conditional on error frames.
    LsbStats {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Invariant and diagnostic checks.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    nr: Option<usize>,
    /// QAM order: 4, 16 or 64.
    #[arg(long = "mod")]
    modulation: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    snr_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    snr_stop: Option<f64>,
    #[arg(long)]
    snr_step: Option<f64>,
    /// Explicit comma-separated SNR grid in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_points: Option<String>,
    /// per-antenna or ebn0.
    #[arg(long)]
    snr_mode: Option<String>,
    /// Frame cap per SNR point.
    #[arg(long)]
    frames: Option<u64>,
    /// Stop a point once this many bit errors are seen (0 disables).
    #[arg(long)]
    target_errors: Option<u64>,
    /// Master seed; falls back to the config file, then $LARGEMIMO_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// CSV output path; stdout when absent. A `.meta` sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulate without noise.
    #[arg(long)]
    no_noise: bool,
    /// Write wall_time_s as 0 so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    rts_max_iters: Option<usize>,
    #[arg(long)]
    rts_tabu_init: Option<usize>,
    #[arg(long)]
    bp_iters: Option<usize>,
    #[arg(long)]
    bp_damping: Option<f64>,
    #[arg(long)]
    hybrid_outer: Option<usize>,
}

impl SweepArgs {
    fn config_map(&self) -> Result<ConfigMap> {
        let mut map = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                ConfigMap::parse(&text)?
            }
            None => ConfigMap::new(),
        };
        if self.snr_start.is_some() || self.snr_stop.is_some() || self.snr_step.is_some() {
            // A range on the command line replaces an explicit grid from the file.
            map.remove("sweep.snr_points");
        }
        let overrides = [
            ("system.nt", text(self.nt)),
            ("system.nr", text(self.nr)),
            ("system.mod", text(self.modulation)),
            ("sweep.snr_start", text(self.snr_start)),
            ("sweep.snr_stop", text(self.snr_stop)),
            ("sweep.snr_step", text(self.snr_step)),
            ("sweep.snr_points", self.snr_points.clone()),
            ("sweep.snr_mode", self.snr_mode.clone()),
            ("sweep.frames", text(self.frames)),
            ("sweep.target_errors", text(self.target_errors)),
            ("sweep.seed", text(self.seed)),
            ("sweep.workers", text(self.workers)),
            ("sweep.noise", self.no_noise.then(|| "off".into())),
            ("sweep.timing", self.no_timing.then(|| "off".into())),
            ("rts.max_iters", text(self.rts_max_iters)),
            ("rts.tabu_init", text(self.rts_tabu_init)),
            ("bp.iters", text(self.bp_iters)),
            ("bp.damping", text(self.bp_damping)),
            ("hybrid.outer", text(self.hybrid_outer)),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                map.set(key, &v)?;
            }
        }

        if map.get("sweep.seed").is_none() {
            if let Ok(seed) = std::env::var(SEED_ENV) {
                map.set("sweep.seed", &seed)?;
            }
        }
        Ok(map)
    }

    fn build(&self, detectors: Option<Vec<DetectorKind>>) -> Result<ExperimentConfig> {
        let mut map = self.config_map()?;
        if let Some(list) = detectors {
            let tags: Vec<&str> = list.iter().map(|d| d.tag()).collect();
            map.set("detector.detectors", &tags.join(","))?;
        }
        map.build()
    }
}

fn text<T: ToString>(v: Option<T>) -> Option<String> {
    v.map(|v| v.to_string())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let file = File::create(p)
                .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", p.display())))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

fn emit_records(cfg: &ExperimentConfig, records: &[BerRecord], out: Option<&Path>) -> Result<()> {
    write_csv(records, open_output(out)?, cfg.record_timing)?;
    if let Some(out) = out {
        std::fs::write(meta_path(out), cfg.to_config_text())?;
        for r in records {
            let (lo, hi) = r.ber_interval();
            eprintln!(
                "{:>6} snr {:>6.2} dB  ber {:.3e}  [{:.2e}, {:.2e}]  {} errors / {} frames",
                r.detector.tag(),
                r.snr_db,
                r.ber(),
                lo,
                hi,
                r.bit_errors,
                r.frames
            );
        }
    }
    Ok(())
}

fn lsb_stats(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let records = Simulator::new(cfg.clone())?.run()?;
    let mut w = open_output(out)?;
    writeln!(
        w,
        "snr_db,plane,errors,bits,rate,error_frames,cond_errors,cond_bits,cond_rate,cond_lo95,cond_hi95"
    )?;
    for r in &records {
        let p = &r.planes;
        for j in 0..p.n_planes() {
            let (lo, hi) = wilson_interval(p.conditional_errors[j], p.conditional_bits[j], Z_95);
            writeln!(
                w,
                "{},{j},{},{},{:.6e},{},{},{},{:.6e},{:.6e},{:.6e}",
                r.snr_db,
                p.per_plane_errors[j],
                p.per_plane_bits[j],
                p.rate(j),
                p.error_frames,
                p.conditional_errors[j],
                p.conditional_bits[j],
                p.conditional_rate(j),
                lo,
                hi
            )?;
        }
    }
    w.flush()?;
    if let Some(out) = out {
        std::fs::write(meta_path(out), cfg.to_config_text())?;
    }
    Ok(())
}

fn check(seed: u64) -> bool {
    let outcomes = run_invariant_checks(seed);
    for o in &outcomes {
        println!(
            "[{}] {}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    outcomes.iter().all(|o| o.passed)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Ber { sweep, detector } => {
            let cfg = sweep.build(detector.map(|d| vec![d]))?;
            let records = largemimo::run_ber_sweep(&cfg)?;
            emit_records(&cfg, &records, sweep.out.as_deref())?;
        }
        Command::Compare { sweep, detectors } => {
            let cfg = sweep.build(detectors)?;
            let records = largemimo::paired_compare(&cfg)?;
            emit_records(&cfg, &records, sweep.out.as_deref())?;
        }
        Command::LsbStats { sweep } => {
            let cfg = sweep.build(Some(vec![DetectorKind::Rts]))?;
            lsb_stats(&cfg, sweep.out.as_deref())?;
        }
        Command::Check { seed } => return Ok(check(seed)),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
