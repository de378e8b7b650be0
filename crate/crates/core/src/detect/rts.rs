//! Reactive tabu search over nearest-neighbour substitutions.
//!
//! Each iteration scans every coordinate `i` and every alphabet point at
//! distance 2 from `x_i` (at most `2n` neighbours), moves to the best
//! admissible neighbour even when it is worse than the current vector, and
//! forbids returning coordinate `i` to the value it just left for
//! `tabu_period` iterations. A tabu move is still admissible when it would
//! beat the best metric seen so far.
//!
//! The tabu period reacts to cycling: every accepted vector is fingerprinted
//! with a Zobrist hash, a revisit grows the period to
//! `min(ceil(1.1 P) + 1, P_max)`, and `stable_window` iterations without a
//! revisit shrink it by one down to `P_min`.
//!
//! Metric changes come from [`IncrementalMetric`], so one iteration costs
//! `O(n)` after the `O(n^2)` set-up that forms `H^T y` and the gradient.

use std::collections::HashSet;

use nalgebra::DMatrix;

use super::{DetectorOutput, IncrementalMetric};
use crate::model::RealSystemModel;
use crate::modem::{PamConstellation, Symbol};

#[derive(Debug, Clone, PartialEq)]
pub struct RtsParams {
    pub max_iterations: usize,
    pub initial_tabu_period: usize,
    pub min_tabu_period: usize,
    /// `None` means `2 nt`, the number of real coordinates.
    pub max_tabu_period: Option<usize>,
    /// Iterations without a revisit before the period shrinks by one.
    pub stable_window: usize,
    /// Multiplicative growth applied on a revisit.
    pub growth: f64,
    /// Stop once `best_metric < alpha * n_obs * sigma2 / 2`. `None` disables it.
    pub early_stop_alpha: Option<f64>,
    /// Record the best metric after every iteration.
    pub trace: bool,
}

impl Default for RtsParams {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            initial_tabu_period: 2,
            min_tabu_period: 1,
            max_tabu_period: None,
            stable_window: 50,
            growth: 1.1,
            early_stop_alpha: Some(1.1),
            trace: false,
        }
    }
}

impl RtsParams {
    /// Defaults with the iteration budget scaled to the constellation:
    /// 300 for 4-QAM, 500 for 16-QAM and 1000 for 64-QAM and above.
    pub fn for_constellation(constellation: &PamConstellation) -> Self {
        let max_iterations = match constellation.m() {
            2 => 300,
            4 => 500,
            _ => 1000,
        };
        Self {
            max_iterations,
            ..Self::default()
        }
    }
}

/// Search state of one RTS run.
#[derive(Debug, Clone)]
pub struct RtsState<'a> {
    search: IncrementalMetric<'a>,
    m: usize,
    pub best: Vec<Symbol>,
    pub best_metric: f64,
    /// `tabu[i * M + k]` is the first iteration at which moving coordinate
    /// `i` onto alphabet point `k` is allowed again.
    pub tabu: Vec<usize>,
    pub tabu_period: usize,
    pub visited_fingerprints: HashSet<u64>,
    pub repetition_count: usize,
    fingerprint: u64,
    since_repetition: usize,
    min_period: usize,
    max_period: usize,
    stable_window: usize,
    growth: f64,
}

#[inline]
fn zobrist(coord: usize, level: usize, m: usize) -> u64 {
    // splitmix64 finaliser of the (coordinate, level) cell index.
    let mut z = ((coord * m + level) as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<'a> RtsState<'a> {
    pub fn new(
        model: &RealSystemModel,
        gram: &'a DMatrix<f64>,
        constellation: &PamConstellation,
        params: &RtsParams,
        init: Vec<Symbol>,
    ) -> Self {
        let m = constellation.m();
        let n = init.len();
        let fingerprint = init
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                zobrist(
                    i,
                    constellation.index_of(x).expect("init outside alphabet"),
                    m,
                )
            })
            .fold(0, |acc, k| acc ^ k);
        let search = IncrementalMetric::new(model, gram, init);
        let min_period = params.min_tabu_period.max(1);
        let max_period = params.max_tabu_period.unwrap_or(n).max(min_period);
        let mut visited = HashSet::with_capacity(params.max_iterations + 1);
        visited.insert(fingerprint);
        Self {
            best: search.x().to_vec(),
            best_metric: search.metric(),
            search,
            m,
            tabu: vec![0; n * m],
            tabu_period: params.initial_tabu_period.clamp(min_period, max_period),
            visited_fingerprints: visited,
            repetition_count: 0,
            fingerprint,
            since_repetition: 0,
            min_period,
            max_period,
            stable_window: params.stable_window.max(1),
            growth: params.growth,
        }
    }

    pub fn current(&self) -> &[Symbol] {
        self.search.x()
    }

    pub fn current_metric(&self) -> f64 {
        self.search.metric()
    }

    /// One tabu-search move at iteration `iter`. Returns `false` only when
    /// the neighbourhood is empty.
    pub fn step(&mut self, constellation: &PamConstellation, iter: usize) -> bool {
        let current_metric = self.search.metric();
        let mut admissible: Option<(usize, Symbol, f64)> = None;
        let mut fallback: Option<(usize, Symbol, f64)> = None;

        for i in 0..self.search.x().len() {
            let xi = self.search.x()[i];
            for v in constellation.nearest_neighbors(xi) {
                let d = self.search.delta(i, v);
                let level = ((v + self.m as i32 - 1) / 2) as usize;
                let is_tabu = iter < self.tabu[i * self.m + level];
                let aspirates = current_metric + d < self.best_metric;
                let slot = if !is_tabu || aspirates {
                    &mut admissible
                } else {
                    &mut fallback
                };
                if slot.is_none_or(|(_, _, bd)| d < bd) {
                    *slot = Some((i, v, d));
                }
            }
        }

        let Some((i, v, _)) = admissible.or(fallback) else {
            return false;
        };
        let old = self.search.x()[i];
        let old_level = ((old + self.m as i32 - 1) / 2) as usize;
        let new_level = ((v + self.m as i32 - 1) / 2) as usize;
        self.search.apply(i, v);
        self.tabu[i * self.m + old_level] = iter + 1 + self.tabu_period;
        self.fingerprint ^= zobrist(i, old_level, self.m) ^ zobrist(i, new_level, self.m);

        if !self.visited_fingerprints.insert(self.fingerprint) {
            self.repetition_count += 1;
            self.since_repetition = 0;
            let grown = (self.tabu_period as f64 * self.growth).ceil() as usize + 1;
            self.tabu_period = grown.min(self.max_period);
        } else {
            self.since_repetition += 1;
            if self.since_repetition >= self.stable_window {
                self.since_repetition = 0;
                self.tabu_period = self.tabu_period.saturating_sub(1).max(self.min_period);
            }
        }

        if self.search.metric() < self.best_metric {
            self.best_metric = self.search.metric();
            self.best.copy_from_slice(self.search.x());
        }
        true
    }
}

/// Reactive tabu search from `init`. Returns the best vector visited.
pub fn rts_detect(
    model: &RealSystemModel,
    constellation: &PamConstellation,
    params: &RtsParams,
    init: &[Symbol],
) -> DetectorOutput {
    let gram = model.gram_or_compute();
    let mut state = RtsState::new(model, gram.as_ref(), constellation, params, init.to_vec());
    let threshold = params
        .early_stop_alpha
        .map(|alpha| alpha * model.n_obs() as f64 * model.sigma2() / 2.0);
    let mut trace = params
        .trace
        .then(|| Vec::with_capacity(params.max_iterations));

    let mut iterations = 0;
    while iterations < params.max_iterations {
        if threshold.is_some_and(|t| state.best_metric < t) {
            break;
        }
        if !state.step(constellation, iterations) {
            break;
        }
        iterations += 1;
        if let Some(t) = trace.as_mut() {
            t.push(state.best_metric);
        }
    }

    let mut out = DetectorOutput::new(model, state.best, iterations);
    out.trace = trace;
    out
}
