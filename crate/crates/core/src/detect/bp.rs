//! Belief propagation with Gaussian approximation of interference (GAI).
//!
//! Observation node `i` sees `y_i = h_ik x_k + z_ik`, where the interference
//! plus noise `z_ik` is modelled as Gaussian with
//!
//! ```text
//! mu_ik     = sum_{j != k} h_ij E_i(x_j)
//! sigma2_ik = sum_{j != k} h_ij^2 Var_i(x_j) + sigma2 / 2
//! ```
//!
//! and sends `Lambda_i^k = 2 h_ik (y_i - mu_ik) / sigma2_ik` to variable `k`.
//! Variable `k` returns the extrinsic probability
//! `p_i^k+ = sigmoid(sum_{l != i} Lambda_l^k)`, from which
//! `E_i(x_k) = 2p - 1` and `Var_i(x_k) = 1 - E^2`. All edges update every
//! round (flooding) and the probabilities are damped,
//! `p <- (1 - delta) p_new + delta p_old`.
//!
//! Both interference sums run over all real coordinates `j != k`.
//!
//! Variables are ±1. The final decision is `sgn(sum_i Lambda_i^k)` with
//! `sgn(0) = +1`.

use crate::model::RealSystemModel;
use crate::modem::Symbol;

const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BpParams {
    pub iterations: usize,
    /// Weight kept from the previous probability, in `[0, 1)`.
    pub damping: f64,
}

impl Default for BpParams {
    fn default() -> Self {
        Self {
            iterations: 20,
            damping: 0.4,
        }
    }
}

/// Per-edge messages, stored row-major by observation node
/// (`index = i * n_vars + k`).
#[derive(Debug, Clone, PartialEq)]
pub struct BpMessages {
    pub n_obs: usize,
    pub n_vars: usize,
    /// `Lambda_i^k`.
    pub llr: Vec<f64>,
    /// `p_i^k+`.
    pub prob_plus: Vec<f64>,
    /// `E_i(x_k)`.
    pub mean: Vec<f64>,
    /// `Var_i(x_k)`.
    pub var: Vec<f64>,
}

impl BpMessages {
    /// Uninformative start: every `p = 1/2`, `E = 0`, `Var = 1`.
    pub fn new(n_obs: usize, n_vars: usize) -> Self {
        let edges = n_obs * n_vars;
        Self {
            n_obs,
            n_vars,
            llr: vec![0.0; edges],
            prob_plus: vec![0.5; edges],
            mean: vec![0.0; edges],
            var: vec![1.0; edges],
        }
    }

    #[inline]
    pub fn edge(&self, obs: usize, var: usize) -> usize {
        obs * self.n_vars + var
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpOutput {
    /// `sgn(sum_i Lambda_i^k)` per variable.
    pub decisions: Vec<Symbol>,
    /// `sum_i Lambda_i^k` per variable.
    pub llr_sum: Vec<f64>,
    pub messages: BpMessages,
}

/// Logistic function evaluated without overflow.
#[inline]
fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Extrinsic `p(x = +1)` sent back to the node whose own LLR is `own`,
/// given the total LLR over all observation nodes.
#[inline]
pub fn extrinsic_probability(total: f64, own: f64) -> f64 {
    sigmoid(total - own)
}

/// Runs `params.iterations` flooding rounds of GAI belief propagation on a
/// model with ±1 variables.
pub fn bp_gai_detect(model: &RealSystemModel, params: &BpParams) -> BpOutput {
    let (n_obs, n_vars) = (model.n_obs(), model.n_vars());
    let half_sigma2 = model.sigma2() / 2.0;
    let variance_floor = half_sigma2.max(VARIANCE_FLOOR);
    let damping = params.damping.clamp(0.0, 1.0);

    // Row-major copy of H so each observation node reads a contiguous row.
    let h_rows: Vec<f64> = model.h().transpose().as_slice().to_vec();
    let y = model.y().as_slice();

    let mut msg = BpMessages::new(n_obs, n_vars);
    let mut llr_sum = vec![0.0; n_vars];

    for round in 0..params.iterations.max(1) {
        // Observation nodes.
        for i in 0..n_obs {
            let row = &h_rows[i * n_vars..(i + 1) * n_vars];
            let base = i * n_vars;
            let mean = &msg.mean[base..base + n_vars];
            let var = &msg.var[base..base + n_vars];
            let mut total_mean = 0.0;
            let mut total_var = half_sigma2;
            for k in 0..n_vars {
                total_mean += row[k] * mean[k];
                total_var += row[k] * row[k] * var[k];
            }
            let llr = &mut msg.llr[base..base + n_vars];
            for k in 0..n_vars {
                let mu = total_mean - row[k] * mean[k];
                let s2 = (total_var - row[k] * row[k] * var[k]).max(variance_floor);
                llr[k] = 2.0 * row[k] * (y[i] - mu) / s2;
            }
        }

        llr_sum.iter_mut().for_each(|s| *s = 0.0);
        for i in 0..n_obs {
            for (s, l) in llr_sum
                .iter_mut()
                .zip(&msg.llr[i * n_vars..(i + 1) * n_vars])
            {
                *s += l;
            }
        }

        if round + 1 == params.iterations.max(1) {
            break;
        }

        // Variable nodes.
        for e in 0..n_obs * n_vars {
            let k = e % n_vars;
            let p_new = extrinsic_probability(llr_sum[k], msg.llr[e]);
            let p = (1.0 - damping) * p_new + damping * msg.prob_plus[e];
            let mean = 2.0 * p - 1.0;
            msg.prob_plus[e] = p;
            msg.mean[e] = mean;
            msg.var[e] = (1.0 - mean * mean).max(0.0);
        }
    }

    let decisions = llr_sum
        .iter()
        .map(|&l| if l >= 0.0 { 1 } else { -1 })
        .collect();
    BpOutput {
        decisions,
        llr_sum,
        messages: msg,
    }
}
