//! Detection algorithms for the real-valued model.
//!
//! All detectors minimise (or approximate the minimiser of) the ML metric
//! `||y - H x||^2` over the product of PAM alphabets:
//!
//! * [`ml_detect`]: exhaustive search, oracle scale only.
//! * [`mmse_initial`]: quantised regularised least squares, used as the
//!   starting vector of the local searches.
//! * [`las_detect`]: greedy nearest-neighbour descent.
//! * [`rts_detect`]: reactive tabu search.
//! * [`bp_gai_detect`]: belief propagation with Gaussian approximation of
//!   interference, ±1 variables only.
//! * [`hybrid_rts_bp_detect`]: RTS with BP refinement of the LSB plane.

mod bp;
mod hybrid;
mod las;
mod ml;
mod mmse;
mod rts;

pub use bp::{bp_gai_detect, extrinsic_probability, BpMessages, BpOutput, BpParams};
pub use hybrid::{
    cancel_upper_planes, hybrid_rts_bp_detect, hybrid_rts_bp_detect_from, recombine_lsb,
    HybridParams,
};
pub use las::las_detect;
pub use ml::{ml_detect, ml_detect_with_cap, DEFAULT_ML_CAP};
pub use mmse::{mmse_estimate, mmse_initial};
pub use rts::{rts_detect, RtsParams, RtsState};

use nalgebra::{DMatrix, DVector};

use crate::model::RealSystemModel;
use crate::modem::Symbol;

/// Result of one detector invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    pub x_hat: Vec<Symbol>,
    /// `||y - H x_hat||^2`, recomputed from scratch.
    pub metric: f64,
    pub iterations_used: usize,
    /// Best metric after each iteration, when tracing was requested.
    pub trace: Option<Vec<f64>>,
}

impl DetectorOutput {
    pub(crate) fn new(model: &RealSystemModel, x_hat: Vec<Symbol>, iterations_used: usize) -> Self {
        Self {
            metric: model.residual_norm2(&x_hat),
            x_hat,
            iterations_used,
            trace: None,
        }
    }
}

/// ML metric `||y - H x||^2`.
pub fn ml_metric(model: &RealSystemModel, x: &[Symbol]) -> f64 {
    model.residual_norm2(x)
}

/// ML metric tracked under single-coordinate substitutions.
///
/// With `F = H^T H`, `z = H^T y` and `g = F x - z`, replacing `x_i` by
/// `x_i + lambda` changes the metric by `lambda * (2 g_i + lambda f_ii)` and
/// the gradient by `lambda * F[:, i]`. Both are `O(n)` or cheaper.
#[derive(Debug, Clone)]
pub struct IncrementalMetric<'a> {
    gram: &'a DMatrix<f64>,
    x: Vec<Symbol>,
    grad: Vec<f64>,
    metric: f64,
}

impl<'a> IncrementalMetric<'a> {
    pub fn new(model: &RealSystemModel, gram: &'a DMatrix<f64>, x: Vec<Symbol>) -> Self {
        let n = model.n_vars();
        assert_eq!(x.len(), n, "symbol vector length");
        assert_eq!(gram.shape(), (n, n), "Gram matrix shape");
        let xf = DVector::from_iterator(n, x.iter().map(|&v| v as f64));
        let grad = (gram * xf - model.matched_filter()).data.as_vec().clone();
        let metric = model.residual_norm2(&x);
        Self {
            gram,
            x,
            grad,
            metric,
        }
    }

    pub fn x(&self) -> &[Symbol] {
        &self.x
    }

    pub fn metric(&self) -> f64 {
        self.metric
    }

    /// Metric change if coordinate `i` were set to `value`.
    #[inline]
    pub fn delta(&self, i: usize, value: Symbol) -> f64 {
        let lambda = (value - self.x[i]) as f64;
        lambda * (2.0 * self.grad[i] + lambda * self.gram[(i, i)])
    }

    /// Sets coordinate `i` to `value`, returning the metric change.
    #[inline]
    pub fn apply(&mut self, i: usize, value: Symbol) -> f64 {
        let d = self.delta(i, value);
        let lambda = (value - self.x[i]) as f64;
        let n = self.x.len();
        let col = &self.gram.as_slice()[i * n..(i + 1) * n];
        for (g, &f) in self.grad.iter_mut().zip(col) {
            *g += lambda * f;
        }
        self.x[i] = value;
        self.metric += d;
        d
    }

    pub fn into_x(self) -> Vec<Symbol> {
        self.x
    }
}
