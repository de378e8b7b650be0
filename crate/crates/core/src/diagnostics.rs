//! Instruments for bit-plane reliability and local-minimum structure.
//!
//! * [`BitPlaneStats`] counts bit errors per plane of the weighted ±1
//!   decomposition, overall and restricted to frames with a symbol error.
//! * [`verify_local_minimum`] checks single-coordinate optimality of a
//!   vector using the reduced condition
//!   `2 lambda y^T h_i <= 2 lambda r^T h_i + lambda^2 f_ii` with `r = H x`.
//! * [`awgn_reference_ber`] is the exact SISO AWGN BER of square QAM under
//!   the same bit labelling.
//! * [`gram_moments`] and [`run_invariant_checks`] back the `check` command.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detect::{bp_gai_detect, BpParams};
use crate::error::{Error, Result};
use crate::model::{
    generate_channel, snr_linear, stack_complex, Complex64, RealSystemModel, SnrMode,
};
use crate::modem::{bits_to_symbol, PamConstellation, Symbol};

/// Per-plane error counts. Plane 0 is the LSB.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitPlaneStats {
    pub per_plane_errors: Vec<u64>,
    pub per_plane_bits: Vec<u64>,
    /// Errors counted only over frames with at least one symbol error.
    pub conditional_errors: Vec<u64>,
    pub conditional_bits: Vec<u64>,
    pub frames: u64,
    pub error_frames: u64,
}

impl BitPlaneStats {
    pub fn new(n_planes: usize) -> Self {
        Self {
            per_plane_errors: vec![0; n_planes],
            per_plane_bits: vec![0; n_planes],
            conditional_errors: vec![0; n_planes],
            conditional_bits: vec![0; n_planes],
            frames: 0,
            error_frames: 0,
        }
    }

    pub fn n_planes(&self) -> usize {
        self.per_plane_errors.len()
    }

    /// Adds one frame given its per-plane error counts and the number of
    /// bits each plane carries.
    pub fn add_frame(&mut self, plane_errors: &[u64], bits_per_plane: u64) {
        let in_error = plane_errors.iter().any(|&e| e > 0);
        self.frames += 1;
        self.error_frames += in_error as u64;
        for (j, &e) in plane_errors.iter().enumerate() {
            self.per_plane_errors[j] += e;
            self.per_plane_bits[j] += bits_per_plane;
            if in_error {
                self.conditional_errors[j] += e;
                self.conditional_bits[j] += bits_per_plane;
            }
        }
    }

    /// Associative merge of two accumulators.
    pub fn merge(&mut self, other: &BitPlaneStats) {
        if self.n_planes() == 0 {
            *self = Self::new(other.n_planes());
        }
        assert_eq!(self.n_planes(), other.n_planes(), "plane count mismatch");
        let add = |a: &mut Vec<u64>, b: &Vec<u64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.per_plane_errors, &other.per_plane_errors);
        add(&mut self.per_plane_bits, &other.per_plane_bits);
        add(&mut self.conditional_errors, &other.conditional_errors);
        add(&mut self.conditional_bits, &other.conditional_bits);
        self.frames += other.frames;
        self.error_frames += other.error_frames;
    }

    pub fn total_errors(&self) -> u64 {
        self.per_plane_errors.iter().sum()
    }

    pub fn total_bits(&self) -> u64 {
        self.per_plane_bits.iter().sum()
    }

    pub fn rate(&self, plane: usize) -> f64 {
        ratio(self.per_plane_errors[plane], self.per_plane_bits[plane])
    }

    pub fn conditional_rate(&self, plane: usize) -> f64 {
        ratio(self.conditional_errors[plane], self.conditional_bits[plane])
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-plane disagreements between `truth` and `estimate` for one frame.
pub fn plane_errors(
    truth: &[Symbol],
    estimate: &[Symbol],
    constellation: &PamConstellation,
) -> Result<Vec<u64>> {
    if truth.len() != estimate.len() {
        return Err(Error::Config("truth and estimate lengths differ".into()));
    }
    let mut errors = vec![0u64; constellation.n_bits()];
    for (&t, &e) in truth.iter().zip(estimate) {
        let ti = constellation.index_of(t).ok_or(Error::NotInAlphabet {
            value: t,
            m: constellation.m(),
        })?;
        let ei = constellation.index_of(e).ok_or(Error::NotInAlphabet {
            value: e,
            m: constellation.m(),
        })?;
        let diff = ti ^ ei;
        for (j, err) in errors.iter_mut().enumerate() {
            *err += ((diff >> j) & 1) as u64;
        }
    }
    Ok(errors)
}

/// Bit-plane statistics of a single frame.
pub fn bit_plane_error_stats(
    truth: &[Symbol],
    estimate: &[Symbol],
    constellation: &PamConstellation,
) -> Result<BitPlaneStats> {
    let errors = plane_errors(truth, estimate, constellation)?;
    let mut stats = BitPlaneStats::new(constellation.n_bits());
    stats.add_frame(&errors, truth.len() as u64);
    Ok(stats)
}

/// 95% (or any `z`) Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// z-value of a two-sided 95% interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Which substitutions count as neighbours of a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighborhood {
    /// Every alternative alphabet value of every coordinate.
    Full,
    /// Alphabet values at distance 2 only (the RTS/LAS neighbourhood).
    Nearest,
}

/// A substitution that lowers the metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub coord: usize,
    pub value: Symbol,
    pub lambda: i32,
    /// Metric decrease, `> 0`.
    pub decrease: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMinimumReport {
    pub is_local_minimum: bool,
    pub violations: usize,
    /// The violation with the largest decrease.
    pub worst: Option<Violation>,
}

/// Metric change `||y - H(x + lambda e_i)||^2 - ||y - H x||^2`, both norms
/// evaluated from scratch.
pub fn direct_move_gain(model: &RealSystemModel, x: &[Symbol], coord: usize, lambda: i32) -> f64 {
    let mut moved = x.to_vec();
    moved[coord] += lambda;
    let yf = model.y();
    let hx = model.apply(x);
    let hm = model.apply(&moved);
    (yf - hm).norm_squared() - (yf - hx).norm_squared()
}

/// Reduced-form gain `2 lambda r^T h_i + lambda^2 f_ii - 2 lambda y^T h_i`
/// from precomputed `F x` and `H^T y`.
#[inline]
pub fn reduced_move_gain(fx_i: f64, hty_i: f64, f_ii: f64, lambda: i32) -> f64 {
    let l = lambda as f64;
    2.0 * l * fx_i + l * l * f_ii - 2.0 * l * hty_i
}

/// Checks that no single-coordinate substitution in `neighborhood` lowers
/// the ML metric. A move counts as a violation only if it lowers the metric
/// by more than `1e-9` relative to the current metric.
pub fn verify_local_minimum_in(
    model: &RealSystemModel,
    x: &[Symbol],
    constellation: &PamConstellation,
    neighborhood: Neighborhood,
) -> Result<LocalMinimumReport> {
    if let Some(&bad) = x.iter().find(|&&v| !constellation.contains(v)) {
        return Err(Error::NotInAlphabet {
            value: bad,
            m: constellation.m(),
        });
    }
    let gram = model.gram_or_compute();
    let xf = DVector::from_iterator(x.len(), x.iter().map(|&v| v as f64));
    let fx = gram.as_ref() * xf;
    let hty = model.matched_filter();
    let tol = 1e-9 * model.residual_norm2(x).max(1e-300);

    let mut report = LocalMinimumReport {
        is_local_minimum: true,
        violations: 0,
        worst: None,
    };
    for (i, &xi) in x.iter().enumerate() {
        let candidates: Vec<Symbol> = match neighborhood {
            Neighborhood::Full => constellation
                .points()
                .iter()
                .copied()
                .filter(|&p| p != xi)
                .collect(),
            Neighborhood::Nearest => constellation.nearest_neighbors(xi).collect(),
        };
        for value in candidates {
            let lambda = value - xi;
            let gain = reduced_move_gain(fx[i], hty[i], gram[(i, i)], lambda);
            if gain < -tol {
                report.is_local_minimum = false;
                report.violations += 1;
                let v = Violation {
                    coord: i,
                    value,
                    lambda,
                    decrease: -gain,
                };
                if report.worst.is_none_or(|w| v.decrease > w.decrease) {
                    report.worst = Some(v);
                }
            }
        }
    }
    Ok(report)
}

/// [`verify_local_minimum_in`] over the full alphabet neighbourhood.
pub fn verify_local_minimum(
    model: &RealSystemModel,
    x: &[Symbol],
    constellation: &PamConstellation,
) -> Result<LocalMinimumReport> {
    verify_local_minimum_in(model, x, constellation, Neighborhood::Full)
}

/// Gaussian upper tail `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `P(a < Z < b)` for standard normal `Z`, accurate in both tails.
fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        q_function(a) - q_function(b)
    } else if b <= 0.0 {
        q_function(-b) - q_function(-a)
    } else {
        1.0 - q_function(-a) - q_function(b)
    }
}

/// Exact BER of square `qam`-QAM over a SISO AWGN channel with
/// nearest-point decisions and the weighted ±1 (natural binary) labelling.
///
/// Each PAM dimension is evaluated independently: for every transmitted
/// point and every decision region the transition probability is a
/// difference of Gaussian tails, weighted by the Hamming distance between
/// the two labels.
pub fn awgn_reference_ber(snr_db: f64, qam: usize, mode: SnrMode) -> Result<f64> {
    let c = PamConstellation::for_qam(qam)?;
    let sigma2 = c.qam_symbol_energy() / snr_linear(snr_db, &c, mode);
    let std = (sigma2 / 2.0).sqrt();
    let m = c.m();
    let mut weighted = 0.0;
    for k in 0..m {
        let p = c.point(k) as f64;
        for l in 0..m {
            if l == k {
                continue;
            }
            let lo = if l == 0 {
                f64::NEG_INFINITY
            } else {
                c.point(l) as f64 - 1.0
            };
            let hi = if l == m - 1 {
                f64::INFINITY
            } else {
                c.point(l) as f64 + 1.0
            };
            let prob = normal_interval((lo - p) / std, (hi - p) / std);
            weighted += prob * (k ^ l).count_ones() as f64;
        }
    }
    Ok(weighted / (m * c.n_bits()) as f64)
}

/// Sample moments of `F = H^T H` over random lifted channels.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMoments {
    pub nt: usize,
    pub nr: usize,
    pub draws: usize,
    pub diag_mean: f64,
    pub offdiag_mean: f64,
    pub offdiag_var: f64,
    /// Largest `|f_{i, i+nt}|`; these pairs vanish by the block structure.
    pub quadrature_pair_max: f64,
}

impl GramMoments {
    /// Off-diagonal variance implied by i.i.d. CN(0,1) entries: each
    /// `f_ij` sums `2 nr` products of independent `N(0, 1/2)` pairs.
    pub fn analytic_offdiag_var(&self) -> f64 {
        self.nr as f64 / 2.0
    }
}

pub fn gram_moments<R: Rng + ?Sized>(
    nt: usize,
    nr: usize,
    draws: usize,
    rng: &mut R,
) -> GramMoments {
    let n = 2 * nt;
    let (mut diag_sum, mut diag_count) = (0.0, 0usize);
    let (mut off_sum, mut off_sq, mut off_count) = (0.0, 0.0, 0usize);
    let mut quad_max: f64 = 0.0;
    for _ in 0..draws {
        let h = generate_channel(nt, nr, rng).to_real();
        let f = crate::model::gram_matrix(&h);
        for j in 0..n {
            diag_sum += f[(j, j)];
            diag_count += 1;
            for i in 0..j {
                if j == i + nt {
                    quad_max = quad_max.max(f[(i, j)].abs());
                } else {
                    off_sum += f[(i, j)];
                    off_sq += f[(i, j)] * f[(i, j)];
                    off_count += 1;
                }
            }
        }
    }
    let off_mean = off_sum / off_count.max(1) as f64;
    GramMoments {
        nt,
        nr,
        draws,
        diag_mean: diag_sum / diag_count.max(1) as f64,
        offdiag_mean: off_mean,
        offdiag_var: off_sq / off_count.max(1) as f64 - off_mean * off_mean,
        quadrature_pair_max: quad_max,
    }
}

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn random_model<R: Rng + ?Sized>(nt: usize, nr: usize, rng: &mut R) -> RealSystemModel {
    let hc = generate_channel(nt, nr, rng);
    let yc = DVector::from_fn(nr, |_, _| {
        Complex64::new(
            rng.random::<f64>() * 4.0 - 2.0,
            rng.random::<f64>() * 4.0 - 2.0,
        )
    });
    RealSystemModel::lift_to_real(&hc, &yc, 0.5).expect("dimensions match")
}

/// Lift norm preservation over `pairs` random instances; returns the worst
/// relative discrepancy.
pub fn lift_norm_discrepancy<R: Rng + ?Sized>(pairs: usize, rng: &mut R) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let nt = rng.random_range(1..=8);
        let nr = rng.random_range(1..=8);
        let hc = generate_channel(nt, nr, rng);
        let xc = DVector::from_fn(nt, |_, _| {
            Complex64::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            )
        });
        let yc = DVector::from_fn(nr, |_, _| {
            Complex64::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            )
        });
        let complex = (&yc - hc.entries() * &xc).norm_squared();
        let model = RealSystemModel::lift_to_real(&hc, &yc, 1.0).expect("dimensions match");
        let real = (model.y() - model.h() * stack_complex(&xc)).norm_squared();
        worst = worst.max((complex - real).abs() / complex.max(f64::MIN_POSITIVE));
    }
    worst
}

/// Worst relative disagreement between the direct and reduced forms of the
/// single-coordinate optimality condition over `probes` random probes. The
/// scale of each comparison is the larger of the gain and the current
/// metric, since the direct form subtracts two metrics of that size.
pub fn local_condition_discrepancy<R: Rng + ?Sized>(probes: usize, rng: &mut R) -> f64 {
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < probes {
        let nt = rng.random_range(1..=6);
        let nr = rng.random_range(nt..=8);
        let c = PamConstellation::new(1 << rng.random_range(1..=3)).expect("power of two");
        let model = random_model(nt, nr, rng).with_gram();
        let gram = model.gram().expect("cached");
        let hty = model.matched_filter();
        for _ in 0..50 {
            let x = c.random_vector(nt, rng);
            let xf = DVector::from_iterator(x.len(), x.iter().map(|&v| v as f64));
            let fx = gram * xf;
            let i = rng.random_range(0..x.len());
            let target = c.point(rng.random_range(0..c.m()));
            let lambda = target - x[i];
            let direct = direct_move_gain(&model, &x, i, lambda);
            let reduced = reduced_move_gain(fx[i], hty[i], gram[(i, i)], lambda);
            let scale = direct
                .abs()
                .max(reduced.abs())
                .max(model.residual_norm2(&x))
                .max(1e-300);
            worst = worst.max((direct - reduced).abs() / scale);
            done += 1;
        }
    }
    worst
}

/// The invariant and diagnostic suite behind the `check` command.
pub fn run_invariant_checks(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let lift = lift_norm_discrepancy(1000, &mut rng);
    out.push(outcome(
        "lift_norm_preservation",
        lift < 1e-10,
        format!("worst relative discrepancy {lift:.3e} over 1000 instances (limit 1e-10)"),
    ));

    let mut sym: f64 = 0.0;
    for _ in 0..100 {
        let model =
            random_model(rng.random_range(1..=16), rng.random_range(1..=16), &mut rng).with_gram();
        let f = model.gram().expect("cached");
        sym = sym.max((f - f.transpose()).amax());
    }
    out.push(outcome(
        "gram_symmetry",
        sym < 1e-12,
        format!("max |F - F^T| = {sym:.3e} (limit 1e-12)"),
    ));

    let mut round_trip_ok = true;
    let mut lsb_ok = true;
    for n in 1..=6 {
        let c = PamConstellation::new(1 << n).expect("power of two");
        for &x in c.points() {
            let mut bits = c.symbol_to_bits(x).expect("in alphabet");
            round_trip_ok &= bits_to_symbol(&bits) == x;
            bits[0] = -bits[0];
            lsb_ok &= (bits_to_symbol(&bits) - x).abs() == 2;
        }
    }
    out.push(outcome(
        "bit_round_trip",
        round_trip_ok,
        "exhaustive over 2..64-PAM".into(),
    ));
    out.push(outcome(
        "lsb_flip_is_nearest_neighbour",
        lsb_ok,
        "exhaustive over 2..64-PAM".into(),
    ));

    let cond = local_condition_discrepancy(10_000, &mut rng);
    out.push(outcome(
        "local_minimum_condition_equivalence",
        cond < 1e-9,
        format!("worst relative discrepancy {cond:.3e} over 10000 probes (limit 1e-9)"),
    ));

    let moments = gram_moments(16, 16, 2000, &mut rng);
    let diag_err = (moments.diag_mean - moments.nt as f64).abs() / moments.nt as f64;
    out.push(outcome(
        "gram_diagonal_mean",
        diag_err < 0.02,
        format!(
            "mean f_ii = {:.4} vs nt = {} (relative error {:.2}%, limit 2%)",
            moments.diag_mean,
            moments.nt,
            diag_err * 100.0
        ),
    ));
    let analytic = moments.analytic_offdiag_var();
    let var_err = (moments.offdiag_var - analytic).abs() / analytic;
    let mean_ok = moments.offdiag_mean.abs() < 0.05 * moments.offdiag_var.sqrt();
    out.push(outcome(
        "gram_offdiagonal_moments",
        mean_ok && var_err < 0.05 && moments.quadrature_pair_max < 1e-12,
        format!(
            "mean {:.4}, variance {:.4} vs nr/2 = {:.1} ({:.2}% off, limit 5%); ratio to nt/4 = {:.3}; \
             quadrature pairs max |f| = {:.1e}",
            moments.offdiag_mean,
            moments.offdiag_var,
            analytic,
            var_err * 100.0,
            moments.offdiag_var / (moments.nt as f64 / 4.0),
            moments.quadrature_pair_max
        ),
    ));

    let mut bp_ok = true;
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let diag = DVector::from_fn(n, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let model = RealSystemModel::new(nalgebra::DMatrix::from_diagonal(&diag), y.clone(), 0.3)
            .expect("square diagonal model");
        let dec = bp_gai_detect(&model, &BpParams::default()).decisions;
        for k in 0..n {
            let mf = diag[k] * y[k];
            bp_ok &= dec[k] == if mf >= 0.0 { 1 } else { -1 };
        }
    }
    out.push(outcome(
        "bp_diagonal_matched_filter",
        bp_ok,
        "200 random interference-free systems".into(),
    ));

    out
}
