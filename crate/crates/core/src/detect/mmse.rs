use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::RealSystemModel;
use crate::modem::{PamConstellation, Symbol};

/// Unquantised estimate `(F + (sigma2/2) I)^-1 H^T y`.
pub fn mmse_estimate(model: &RealSystemModel) -> Result<DVector<f64>> {
    let n = model.n_vars();
    let gram = model.gram_or_compute();
    let a: DMatrix<f64> = gram.as_ref() + DMatrix::identity(n, n) * (model.sigma2() / 2.0);
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numeric("regularised Gram matrix is not positive definite".into()))?;
    let est = chol.solve(&model.matched_filter());
    if est.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "MMSE solve produced non-finite values".into(),
        ));
    }
    Ok(est)
}

/// Componentwise nearest-point quantisation of [`mmse_estimate`].
pub fn mmse_initial(
    model: &RealSystemModel,
    constellation: &PamConstellation,
) -> Result<Vec<Symbol>> {
    Ok(mmse_estimate(model)?
        .iter()
        .map(|&v| constellation.quantize(v))
        .collect())
}
