//! Acceptance suite. Runs as a plain binary (no libtest harness) so every
//! criterion prints exactly one `[PASS]`/`[FAIL]` line.
//!
//! `cargo test -p largemimo --test acceptance` runs criteria 1-4, 6 and 7.
//! Criterion 5 is a full-scale sweep; add `-- --ignored` to include it.

use std::process::ExitCode;
use std::time::Instant;

use largemimo::detect::{
    bp_gai_detect, cancel_upper_planes, mmse_initial, BpParams, IncrementalMetric, RtsParams,
};
use largemimo::diagnostics::{run_invariant_checks, BitPlaneStats};
use largemimo::model::{generate_channel, snr_to_sigma2, NoiseSpec};
use largemimo::modem::BitPlanes;
use largemimo::sim::{write_csv, DetectorKind, Simulator};
use largemimo::{
    ml_metric, rts_detect, BerRecord, ExperimentConfig, PamConstellation, RealSystemModel, Symbol,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = (bool, String);

/// (id, name, check, long-running)
type Criterion = (u8, &'static str, fn() -> Verdict, bool);

fn config(nt: usize, qam: usize, detectors: &[DetectorKind], snr: &[f64]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(nt, nt, qam).unwrap();
    cfg.detectors = detectors.to_vec();
    cfg.snr_grid = snr.to_vec();
    cfg.record_timing = false;
    cfg
}

fn intervals_disjoint(a: (f64, f64), b: (f64, f64)) -> bool {
    a.1 < b.0 || b.1 < a.0
}

/// SNR at which the BER curve crosses `target`, interpolating log10(BER)
/// linearly in dB between the first bracketing pair of points.
fn crossing(points: &[(f64, f64)], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        if b0 >= target && b1 <= target && b0 > 0.0 && b1 > 0.0 {
            let t = if b0 == b1 {
                0.0
            } else {
                (b0.log10() - target.log10()) / (b0.log10() - b1.log10())
            };
            Some(s0 + t * (s1 - s0))
        } else {
            None
        }
    })
}

fn curve(records: &[BerRecord], detector: DetectorKind) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.detector == detector)
        .map(|r| (r.snr_db, r.ber()))
        .collect()
}

fn lifted(
    nt: usize,
    qam: usize,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> (RealSystemModel, Vec<Symbol>, PamConstellation) {
    let c = PamConstellation::for_qam(qam).unwrap();
    let h = generate_channel(nt, nt, rng).to_real();
    let x = c.random_vector(nt, rng);
    let clean = &h * DVector::from_iterator(x.len(), x.iter().map(|&v| v as f64));
    let sigma2 = snr_to_sigma2(snr_db, nt, &c);
    let y = NoiseSpec::new(sigma2).unwrap().add_noise(&clean, rng);
    (RealSystemModel::new(h, y, sigma2).unwrap(), x, c)
}

fn oracle_equivalence() -> Verdict {
    let mut detail = Vec::new();
    let mut ok = true;
    for nt in [2, 3] {
        let cfg = config(
            nt,
            4,
            &[DetectorKind::Ml, DetectorKind::Rts, DetectorKind::Hybrid],
            &[14.0],
        );
        let sim = Simulator::new(cfg).unwrap();
        let sigma2 = sim.sigma2(14.0);
        let frames = 2000;
        let (mut agree, mut hybrid_above) = (0, 0);
        for f in 0..frames {
            let (_, d) = sim.simulate_frame(sigma2, f).unwrap();
            agree += (d[1].output.x_hat == d[0].output.x_hat) as u64;
            hybrid_above += (d[2].output.metric > d[1].output.metric) as u64;
        }
        let rate = agree as f64 / frames as f64;
        ok &= rate >= 0.99 && hybrid_above == 0;
        detail.push(format!(
            "{nt}x{nt}: rts=ml in {:.2}% of {frames} frames, hybrid above rts on {hybrid_above}",
            100.0 * rate
        ));
    }
    (ok, detail.join("; "))
}

fn bp_matches_rts() -> Verdict {
    let grid: Vec<f64> = (5..=14).map(f64::from).collect();
    let mut cfg = config(16, 4, &[DetectorKind::Rts, DetectorKind::Bp], &grid);
    cfg.frames_per_point = 200_000;
    cfg.target_bit_errors = Some(200);
    let records = Simulator::new(cfg).unwrap().run().unwrap();
    let enough = records.iter().all(|r| r.bit_errors >= 200);
    let rts = crossing(&curve(&records, DetectorKind::Rts), 1e-2);
    let bp = crossing(&curve(&records, DetectorKind::Bp), 1e-2);
    match (rts, bp) {
        (Some(r), Some(b)) => (
            enough && (r - b).abs() <= 1.0,
            format!("SNR at BER 1e-2: rts {r:.2} dB, bp {b:.2} dB, gap {:.2} dB (limit 1.0); >=200 errors per point: {enough}", (r - b).abs()),
        ),
        _ => (false, format!("1e-2 not bracketed by the {}-{} dB grid", grid[0], grid[grid.len() - 1])),
    }
}

fn lsb_dominance() -> Verdict {
    // Coarse pass for the SNR where RTS BER is closest to 1e-2.
    let coarse = [38.0, 40.0, 42.0, 44.0, 46.0, 48.0];
    let mut cfg = config(32, 64, &[DetectorKind::Rts], &coarse);
    cfg.frames_per_point = 600;
    cfg.target_bit_errors = None;
    let records = Simulator::new(cfg.clone()).unwrap().run().unwrap();
    let pick = records
        .iter()
        .min_by(|a, b| {
            let da = (a.ber().max(1e-12).log10() + 2.0).abs();
            let db = (b.ber().max(1e-12).log10() + 2.0).abs();
            da.total_cmp(&db)
        })
        .unwrap();
    let snr = pick.snr_db;

    let sim = Simulator::new(cfg).unwrap();
    let sigma2 = sim.sigma2(snr);
    let mut stats = BitPlaneStats::new(3);
    let mut frame = 0;
    while stats.conditional_bits[0] < 100_000 {
        let (_, d) = sim.simulate_frame(sigma2, frame).unwrap();
        stats.add_frame(&d[0].plane_errors, 64);
        frame += 1;
    }
    let ci = |j: usize| {
        largemimo::diagnostics::wilson_interval(
            stats.conditional_errors[j],
            stats.conditional_bits[j],
            largemimo::diagnostics::Z_95,
        )
    };
    let (p0, p2) = (ci(0), ci(2));
    let ber = stats.total_errors() as f64 / stats.total_bits() as f64;
    (
        stats.conditional_rate(0) > stats.conditional_rate(2) && intervals_disjoint(p0, p2),
        format!(
            "32x32 64-QAM at {snr} dB (rts ber {ber:.2e}, {frame} frames, {} error-frame bits): plane0 {:.4} [{:.4}, {:.4}] vs plane2 {:.4} [{:.4}, {:.4}]",
            stats.conditional_bits[0],
            stats.conditional_rate(0),
            p0.0,
            p0.1,
            stats.conditional_rate(2),
            p2.0,
            p2.1
        ),
    )
}

fn hybrid_gain_direction() -> Verdict {
    let mut cfg = config(
        16,
        16,
        &[DetectorKind::Rts, DetectorKind::Hybrid],
        &[24.0, 26.0, 28.0],
    );
    cfg.frames_per_point = 200_000;
    cfg.target_bit_errors = Some(200);
    let records = Simulator::new(cfg).unwrap().run().unwrap();
    let mut never_worse = true;
    let mut significant = false;
    let mut detail = Vec::new();
    for point in records.chunks(2) {
        let (rts, hyb) = (&point[0], &point[1]);
        never_worse &= hyb.ber() <= rts.ber();
        significant |=
            hyb.ber() < rts.ber() && intervals_disjoint(hyb.ber_interval(), rts.ber_interval());
        detail.push(format!(
            "{} dB rts {:.2e} hybrid {:.2e}",
            rts.snr_db,
            rts.ber(),
            hyb.ber()
        ));
    }
    (
        never_worse && significant,
        format!(
            "16x16 16-QAM: {}; significant gap: {significant}",
            detail.join(", ")
        ),
    )
}

fn full_scale_gap() -> Verdict {
    let grid: Vec<f64> = (0..=16).map(|k| 28.0 + 2.0 * k as f64).collect();
    let mut cfg = config(32, 64, &[DetectorKind::Rts, DetectorKind::Hybrid], &grid);
    cfg.frames_per_point = 100_000;
    // Errors arrive in bursts of tens of bits per failed frame.
    cfg.target_bit_errors = Some(2000);
    let records = Simulator::new(cfg).unwrap().run().unwrap();
    let rts = crossing(&curve(&records, DetectorKind::Rts), 1e-3);
    let hyb = crossing(&curve(&records, DetectorKind::Hybrid), 1e-3);
    let table: Vec<String> = records
        .chunks(2)
        .map(|p| format!("{}:{:.1e}/{:.1e}", p[0].snr_db, p[0].ber(), p[1].ber()))
        .collect();
    match (rts, hyb) {
        (Some(r), Some(h)) => {
            let gap = r - h;
            (
                (gap - 3.6).abs() <= 1.5,
                format!("SNR at BER 1e-3: rts {r:.2} dB, hybrid {h:.2} dB, gap {gap:.2} dB (target 3.6 +- 1.5); snr:rts/hybrid {}", table.join(" ")),
            )
        }
        _ => (
            false,
            format!(
                "1e-3 not bracketed for both detectors; snr:rts/hybrid {}",
                table.join(" ")
            ),
        ),
    }
}

fn invariant_suite() -> Verdict {
    let mut failed: Vec<String> = run_invariant_checks(1)
        .into_iter()
        .filter(|o| !o.passed)
        .map(|o| o.name.to_string())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut fail = |name: &str| failed.push(name.to_string());

    // RTS best-metric traces and incremental deltas.
    let (mut trace_ok, mut delta_ok, mut bp_ok, mut cancel_ok) = (true, true, true, true);
    for k in 0..40 {
        let qam = [4, 16, 64][k % 3];
        let (model, truth, c) = lifted(8, qam, 20.0, &mut rng);
        let model = model.with_gram();
        let init = mmse_initial(&model, &c).unwrap();
        let params = RtsParams {
            trace: true,
            ..RtsParams::for_constellation(&c)
        };
        let out = rts_detect(&model, &c, &params, &init);
        trace_ok &= out.trace.unwrap().windows(2).all(|w| w[1] <= w[0]);

        let gram = model.gram().unwrap();
        let mut inc = IncrementalMetric::new(&model, gram, init.clone());
        for _ in 0..50 {
            let i = rng.random_range(0..16);
            let v = c.point(rng.random_range(0..c.m()));
            let predicted = inc.metric() + inc.delta(i, v);
            inc.apply(i, v);
            let exact = ml_metric(&model, inc.x());
            delta_ok &= (predicted - exact).abs() <= 1e-6 * exact.max(1.0);
        }

        if qam == 4 {
            let bp = bp_gai_detect(&model, &BpParams::default());
            bp_ok &= bp
                .messages
                .prob_plus
                .iter()
                .all(|p| (0.0..=1.0).contains(p));
            bp_ok &= bp.llr_sum.iter().all(|l| l.is_finite());
        } else {
            // y - sum_{j>=1} 2^j H b^(j) = H b^(0) + n when the upper planes are right.
            let planes = BitPlanes::from_symbols(&truth, &c).unwrap();
            let noise = model.y() - model.apply(&truth);
            let lsb: Vec<Symbol> = planes.plane(0).iter().map(|&b| b as Symbol).collect();
            let gap = (cancel_upper_planes(&model, &planes) - (model.apply(&lsb) + noise)).amax();
            cancel_ok &= gap < 1e-9;
        }
    }
    if !trace_ok {
        fail("rts_trace_monotone");
    }
    if !delta_ok {
        fail("incremental_delta");
    }
    if !bp_ok {
        fail("bp_probability_bounds");
    }
    if !cancel_ok {
        fail("cancellation_identity");
    }

    // Byte-identical reruns across worker counts.
    let csv = |workers| {
        let mut cfg = config(
            4,
            16,
            &[DetectorKind::Rts, DetectorKind::Hybrid],
            &[14.0, 18.0],
        );
        cfg.frames_per_point = 500;
        cfg.target_bit_errors = Some(100);
        cfg.workers = workers;
        let mut buf = Vec::new();
        write_csv(
            &Simulator::new(cfg).unwrap().run().unwrap(),
            &mut buf,
            false,
        )
        .unwrap();
        buf
    };
    let first = csv(1);
    if first != csv(1) || first != csv(2) || first != csv(4) {
        fail("byte_identical_reruns");
    }

    let ok = failed.is_empty();
    (
        ok,
        if ok {
            "all checks passed (lift norm, bit round trip, local-minimum equivalence, Gram moments, traces, deltas, BP bounds, cancellation, reruns)".into()
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

fn complexity_scaling() -> Verdict {
    let iterations = 500;
    let params = RtsParams {
        max_iterations: iterations,
        early_stop_alpha: None,
        ..RtsParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sizes = [8usize, 16, 32];
    let mut times = Vec::new();
    for &nt in &sizes {
        let frames: Vec<_> = (0..20).map(|_| lifted(nt, 16, 20.0, &mut rng)).collect();
        let inits: Vec<_> = frames
            .iter()
            .map(|(m, _, c)| mmse_initial(m, c).unwrap())
            .collect();
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let start = Instant::now();
            for ((model, _, c), init) in frames.iter().zip(&inits) {
                let out = rts_detect(model, c, &params, init);
                assert_eq!(out.iterations_used, iterations);
            }
            best = best.min(start.elapsed().as_secs_f64() / frames.len() as f64);
        }
        times.push(best);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let shown: Vec<String> = sizes
        .iter()
        .zip(&times)
        .map(|(n, t)| format!("{n}x{n} {:.1} us", t * 1e6))
        .collect();
    (
        slope <= 2.3,
        format!("per-frame rts time at {iterations} iterations (Gram included): {}; log-log slope {slope:.2} (limit 2.3)", shown.join(", ")),
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let include_long = args
        .iter()
        .any(|a| a == "--ignored" || a == "--include-ignored");
    // libtest-style listing probes expect an empty list from harness-less targets.
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }

    let criteria: [Criterion; 7] = [
        (
            1,
            "oracle equivalence at small scale",
            oracle_equivalence,
            false,
        ),
        (
            2,
            "bp within 1 dB of rts at 16x16 4-QAM",
            bp_matches_rts,
            false,
        ),
        (3, "lsb dominance at 32x32 64-QAM", lsb_dominance, false),
        (
            4,
            "hybrid gain direction at 16x16 16-QAM",
            hybrid_gain_direction,
            false,
        ),
        (
            5,
            "full-scale rts to hybrid gap at 32x32 64-QAM",
            full_scale_gap,
            true,
        ),
        (6, "invariant suite", invariant_suite, false),
        (7, "rts complexity scaling", complexity_scaling, false),
    ];

    let mut all_ok = true;
    for (id, name, run, long) in criteria {
        if long && !include_long {
            println!("[SKIP] criterion {id}: {name} (long-running; pass --ignored to run)");
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = run();
        all_ok &= ok;
        println!(
            "[{}] criterion {id}: {name} ({:.1} s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
