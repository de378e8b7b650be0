use super::{DetectorOutput, IncrementalMetric};
use crate::model::RealSystemModel;
use crate::modem::{PamConstellation, Symbol};

/// Likelihood ascent search: steepest descent over nearest-neighbour
/// substitutions, stopping at the first local minimum.
pub fn las_detect(
    model: &RealSystemModel,
    constellation: &PamConstellation,
    init: &[Symbol],
) -> DetectorOutput {
    debug_assert!(init.iter().all(|&x| constellation.contains(x)));
    let gram = model.gram_or_compute();
    let mut search = IncrementalMetric::new(model, gram.as_ref(), init.to_vec());
    let n = init.len();
    let mut steps = 0;

    loop {
        let mut best: Option<(usize, Symbol, f64)> = None;
        for i in 0..n {
            for v in constellation.nearest_neighbors(search.x()[i]) {
                let d = search.delta(i, v);
                if d < best.map_or(0.0, |b| b.2) {
                    best = Some((i, v, d));
                }
            }
        }
        match best {
            Some((i, v, _)) => {
                search.apply(i, v);
                steps += 1;
            }
            None => break,
        }
    }

    DetectorOutput::new(model, search.into_x(), steps)
}
