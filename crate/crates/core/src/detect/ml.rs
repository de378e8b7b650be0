use nalgebra::DVector;

use super::DetectorOutput;
use crate::error::{Error, Result};
use crate::model::RealSystemModel;
use crate::modem::PamConstellation;

/// Default cap on the number of candidates scanned by [`ml_detect`].
pub const DEFAULT_ML_CAP: u128 = 1 << 24;

/// Exhaustive ML detection with the default candidate cap.
pub fn ml_detect(
    model: &RealSystemModel,
    constellation: &PamConstellation,
) -> Result<DetectorOutput> {
    ml_detect_with_cap(model, constellation, DEFAULT_ML_CAP)
}

/// Exhaustive ML detection. Candidates are visited in lexicographic order
/// of the symbol vector and only a strictly smaller metric replaces the
/// incumbent, so ties resolve to the lexicographically smallest vector.
///
/// Residuals are kept per search depth (`r_d = y - sum_{k<d} h_k x_k`), so
/// no round-off accumulates across leaves.
pub fn ml_detect_with_cap(
    model: &RealSystemModel,
    constellation: &PamConstellation,
    cap: u128,
) -> Result<DetectorOutput> {
    let n = model.n_vars();
    let candidates = (constellation.m() as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX);
    if candidates > cap {
        return Err(Error::OracleScale { candidates, cap });
    }

    let h = model.h();
    let mut residuals: Vec<DVector<f64>> = vec![model.y().clone(); n + 1];
    let mut idx = vec![0usize; n];
    let mut best = vec![constellation.point(0); n];
    let mut best_metric = f64::INFINITY;

    // Odometer over alphabet indices, coordinate 0 most significant.
    let mut depth = 0;
    loop {
        if depth == n {
            let m = residuals[n].norm_squared();
            if m < best_metric {
                best_metric = m;
                for (b, &k) in best.iter_mut().zip(&idx) {
                    *b = constellation.point(k);
                }
            }
            // Backtrack to the deepest coordinate that can still advance.
            loop {
                if depth == 0 {
                    return Ok(DetectorOutput::new(model, best, candidates as usize));
                }
                depth -= 1;
                idx[depth] += 1;
                if idx[depth] < constellation.m() {
                    break;
                }
                idx[depth] = 0;
            }
        }
        let value = constellation.point(idx[depth]) as f64;
        let (head, tail) = residuals.split_at_mut(depth + 1);
        tail[0].copy_from(&head[depth]);
        tail[0].axpy(-value, &h.column(depth), 1.0);
        depth += 1;
    }
}
