//! Hybrid RTS-BP detection.
//!
//! One outer round:
//! 1. run RTS and split its output `x^` into bit planes `b^(j)`;
//! 2. rebuild the interference of every plane but the LSB,
//!    `I = sum_{j>=1} 2^j H b^(j)`, and cancel it: `y~ = y - I`;
//! 3. run GAI-BP on `(H, y~)` as a ±1 system to re-estimate the LSB plane
//!    and recombine `x^^ = b^^(0) + sum_{j>=1} 2^j b^(j)`;
//! 4. start the next round's RTS from `x^^`.
//!
//! The result is the lowest-metric vector among every RTS output and every
//! recombined vector, so the hybrid never ends above plain RTS on the ML
//! metric when both start from the same vector.

use nalgebra::DVector;

use super::{bp_gai_detect, mmse_initial, rts_detect, BpParams, DetectorOutput, RtsParams};
use crate::error::Result;
use crate::model::RealSystemModel;
use crate::modem::{Bit, BitPlanes, PamConstellation, Symbol};

#[derive(Debug, Clone, PartialEq)]
pub struct HybridParams {
    pub outer_iterations: usize,
    pub rts: RtsParams,
    pub bp: BpParams,
}

impl HybridParams {
    pub fn for_constellation(constellation: &PamConstellation) -> Self {
        Self {
            outer_iterations: 2,
            rts: RtsParams::for_constellation(constellation),
            bp: BpParams::default(),
        }
    }
}

/// `y - sum_{j>=1} 2^j H b^(j)`.
pub fn cancel_upper_planes(model: &RealSystemModel, planes: &BitPlanes) -> DVector<f64> {
    model.y() - model.apply(&planes.weighted_sum(1))
}

/// Replaces the LSB plane and recombines, `b^^(0) + sum_{j>=1} 2^j b^(j)`.
pub fn recombine_lsb(planes: &BitPlanes, lsb: &[Bit]) -> Vec<Symbol> {
    planes
        .weighted_sum(1)
        .into_iter()
        .zip(lsb)
        .map(|(upper, &b)| upper + b as i32)
        .collect()
}

/// Hybrid detection starting from the MMSE initial vector.
pub fn hybrid_rts_bp_detect(
    model: &RealSystemModel,
    constellation: &PamConstellation,
    params: &HybridParams,
) -> Result<DetectorOutput> {
    let init = mmse_initial(model, constellation)?;
    hybrid_rts_bp_detect_from(model, constellation, params, &init)
}

/// Hybrid detection from an explicit initial vector. For 2-PAM there are no
/// upper planes to cancel and this is plain RTS.
pub fn hybrid_rts_bp_detect_from(
    model: &RealSystemModel,
    constellation: &PamConstellation,
    params: &HybridParams,
    init: &[Symbol],
) -> Result<DetectorOutput> {
    if constellation.m() < 4 {
        return Ok(rts_detect(model, constellation, &params.rts, init));
    }

    let mut start = init.to_vec();
    let mut best: Option<DetectorOutput> = None;
    let mut total_iterations = 0;
    let mut trace = params.rts.trace.then(Vec::new);

    let offer = |candidate: DetectorOutput, best: &mut Option<DetectorOutput>| {
        if best.as_ref().is_none_or(|b| candidate.metric < b.metric) {
            *best = Some(candidate);
        }
    };

    for _ in 0..params.outer_iterations.max(1) {
        let rts = rts_detect(model, constellation, &params.rts, &start);
        total_iterations += rts.iterations_used;
        if let (Some(t), Some(rt)) = (trace.as_mut(), rts.trace.as_ref()) {
            let floor = best.as_ref().map_or(f64::INFINITY, |b| b.metric);
            t.extend(rt.iter().map(|&m| m.min(floor)));
        }

        let planes = BitPlanes::from_symbols(&rts.x_hat, constellation)?;
        offer(rts, &mut best);

        let cancelled = model.with_observation(cancel_upper_planes(model, &planes))?;
        let bp = bp_gai_detect(&cancelled, &params.bp);
        let lsb: Vec<Bit> = bp.decisions.iter().map(|&d| d as Bit).collect();
        let recombined = recombine_lsb(&planes, &lsb);
        offer(DetectorOutput::new(model, recombined.clone(), 0), &mut best);

        start = recombined;
    }

    let mut out = best.expect("at least one outer round");
    out.iterations_used = total_iterations;
    out.trace = trace;
    Ok(out)
}
