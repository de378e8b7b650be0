//! Flat-fading V-BLAST channel generation and the real-valued system model.
//!
//! The complex model `y_c = H_c x_c + n_c` is lifted to `y = H x + n` with
//! `H = [[Re H_c, -Im H_c], [Im H_c, Re H_c]]`, `y = [Re y_c; Im y_c]` and
//! `x = [Re x_c; Im x_c]`. The first `nt` real coordinates are the in-phase
//! PAM streams and the last `nt` the quadrature ones.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::modem::{PamConstellation, Symbol};

pub type Complex64 = Complex<f64>;

/// `nr x nt` matrix of complex channel gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannel {
    entries: DMatrix<Complex64>,
}

impl ComplexChannel {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Config("channel dimensions must be positive".into()));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Config("channel entries must be finite".into()));
        }
        Ok(Self { entries })
    }

    pub fn nt(&self) -> usize {
        self.entries.ncols()
    }

    pub fn nr(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// The `2nr x 2nt` real block form.
    pub fn to_real(&self) -> DMatrix<f64> {
        let (nr, nt) = (self.nr(), self.nt());
        DMatrix::from_fn(2 * nr, 2 * nt, |r, c| {
            let z = self.entries[(r % nr, c % nt)];
            match (r < nr, c < nt) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        })
    }
}

/// Draws an `nr x nt` channel with i.i.d. CN(0, 1) entries.
pub fn generate_channel<R: Rng + ?Sized>(nt: usize, nr: usize, rng: &mut R) -> ComplexChannel {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let entries = DMatrix::from_fn(nr, nt, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    ComplexChannel { entries }
}

/// Stacks a complex vector as `[Re; Im]`.
pub fn stack_complex(v: &DVector<Complex64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Real-valued system `y = H x + n` with complex noise variance `sigma2`.
#[derive(Debug, Clone)]
pub struct RealSystemModel {
    h: DMatrix<f64>,
    y: DVector<f64>,
    sigma2: f64,
    gram: Option<DMatrix<f64>>,
}

impl RealSystemModel {
    /// Wraps an arbitrary real model. Detectors only rely on `h` being
    /// `n_obs x n_vars`; the lifted block structure is not required here.
    pub fn new(h: DMatrix<f64>, y: DVector<f64>, sigma2: f64) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::Config("channel dimensions must be positive".into()));
        }
        if y.len() != h.nrows() {
            return Err(Error::Config(format!(
                "observation length {} does not match {} channel rows",
                y.len(),
                h.nrows()
            )));
        }
        if !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(Error::Config(format!(
                "noise variance must be finite and >= 0, got {sigma2}"
            )));
        }
        Ok(Self {
            h,
            y,
            sigma2,
            gram: None,
        })
    }

    /// Lifts `(H_c, y_c)` to the real model.
    pub fn lift_to_real(hc: &ComplexChannel, yc: &DVector<Complex64>, sigma2: f64) -> Result<Self> {
        if yc.len() != hc.nr() {
            return Err(Error::Config(format!(
                "complex observation length {} does not match nr = {}",
                yc.len(),
                hc.nr()
            )));
        }
        Self::new(hc.to_real(), stack_complex(yc), sigma2)
    }

    /// Computes and caches `F = H^T H`. The upper triangle is mirrored so
    /// the cached matrix is exactly symmetric.
    pub fn with_gram(mut self) -> Self {
        if self.gram.is_none() {
            self.gram = Some(gram_matrix(&self.h));
        }
        self
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn gram(&self) -> Option<&DMatrix<f64>> {
        self.gram.as_ref()
    }

    /// Cached Gram matrix, or a freshly computed one.
    pub fn gram_or_compute(&self) -> std::borrow::Cow<'_, DMatrix<f64>> {
        match &self.gram {
            Some(f) => std::borrow::Cow::Borrowed(f),
            None => std::borrow::Cow::Owned(gram_matrix(&self.h)),
        }
    }

    /// Real observation dimension (`2 nr` for a lifted model).
    pub fn n_obs(&self) -> usize {
        self.h.nrows()
    }

    /// Real variable dimension (`2 nt` for a lifted model).
    pub fn n_vars(&self) -> usize {
        self.h.ncols()
    }

    /// Same channel and noise level with a different observation. The Gram
    /// cache is kept since it does not depend on `y`.
    pub fn with_observation(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.n_obs() {
            return Err(Error::Config("observation length mismatch".into()));
        }
        Ok(Self {
            h: self.h.clone(),
            y,
            sigma2: self.sigma2,
            gram: self.gram.clone(),
        })
    }

    /// `H^T y`.
    pub fn matched_filter(&self) -> DVector<f64> {
        self.h.tr_mul(&self.y)
    }

    /// `H x` for a symbol vector.
    pub fn apply(&self, x: &[Symbol]) -> DVector<f64> {
        let xf = DVector::from_iterator(x.len(), x.iter().map(|&v| v as f64));
        &self.h * xf
    }

    /// `||y - H x||^2`, computed from scratch.
    pub fn residual_norm2(&self, x: &[Symbol]) -> f64 {
        assert_eq!(x.len(), self.n_vars(), "symbol vector length");
        (&self.y - self.apply(x)).norm_squared()
    }
}

pub(crate) fn gram_matrix(h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h.ncols();
    let mut f = DMatrix::zeros(n, n);
    for j in 0..n {
        let cj = h.column(j);
        for i in 0..=j {
            let v = h.column(i).dot(&cj);
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    f
}

/// How the SNR axis is calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrMode {
    /// Average received SNR per receive antenna, `nt * Es / sigma2`.
    #[default]
    PerAntenna,
    /// Per-bit `Eb/N0 = SNR / log2(M)` with `M` the QAM order.
    EbN0,
}

impl std::str::FromStr for SnrMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "snr" | "per-antenna" | "symbol" => Ok(Self::PerAntenna),
            "ebn0" | "eb/n0" => Ok(Self::EbN0),
            other => Err(Error::Config(format!("unknown SNR mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for SnrMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PerAntenna => "per-antenna",
            Self::EbN0 => "ebn0",
        })
    }
}

/// Linear per-antenna SNR for a dB value under `mode`.
pub fn snr_linear(snr_db: f64, constellation: &PamConstellation, mode: SnrMode) -> f64 {
    let lin = 10f64.powf(snr_db / 10.0);
    match mode {
        SnrMode::PerAntenna => lin,
        SnrMode::EbN0 => lin * (constellation.qam_order() as f64).log2(),
    }
}

/// Complex noise variance `sigma2 = nt * Es / SNR` for the per-antenna SNR.
pub fn snr_to_sigma2(snr_db: f64, nt: usize, constellation: &PamConstellation) -> f64 {
    snr_to_sigma2_with_mode(snr_db, nt, constellation, SnrMode::PerAntenna)
}

pub fn snr_to_sigma2_with_mode(
    snr_db: f64,
    nt: usize,
    constellation: &PamConstellation,
    mode: SnrMode,
) -> f64 {
    nt as f64 * constellation.qam_symbol_energy() / snr_linear(snr_db, constellation, mode)
}

/// Complex noise variance; each real component has variance `sigma2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    sigma2: f64,
}

impl NoiseSpec {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::Config(format!(
                "noise variance must be > 0, got {sigma2}"
            )));
        }
        Ok(Self { sigma2 })
    }

    /// Noise switched off (`sigma2 = 0`).
    pub fn disabled() -> Self {
        Self { sigma2: 0.0 }
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn per_real_component_variance(&self) -> f64 {
        self.sigma2 / 2.0
    }

    /// Adds i.i.d. `N(0, sigma2/2)` to every entry of `clean`. One standard
    /// normal is consumed per entry even when noise is disabled.
    pub fn add_noise<R: Rng + ?Sized>(&self, clean: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let std = self.per_real_component_variance().sqrt();
        clean.map(|v| {
            let z: f64 = rng.sample(StandardNormal);
            v + std * z
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_lift() {
        let hc = ComplexChannel::new(DMatrix::from_element(1, 1, c(1.0, 1.0))).unwrap();
        let h = hc.to_real();
        let x = DVector::from_vec(vec![1.0, -1.0]);
        let hx = &h * x;
        assert_eq!(hx.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn zero_channel_lift() {
        let hc = ComplexChannel::new(DMatrix::from_element(2, 3, c(0.0, 0.0))).unwrap();
        let yc = DVector::from_vec(vec![c(0.5, -1.0), c(2.0, 3.0)]);
        let m = RealSystemModel::lift_to_real(&hc, &yc, 1.0).unwrap();
        assert!(m.h().iter().all(|&v| v == 0.0));
        assert_eq!(m.y().as_slice(), &[0.5, 2.0, -1.0, 3.0]);
        assert_eq!(m.h().shape(), (4, 6));
    }

    #[test]
    fn lift_rejects_mismatch() {
        let hc = ComplexChannel::new(DMatrix::from_element(2, 2, c(1.0, 0.0))).unwrap();
        let yc = DVector::from_vec(vec![c(0.0, 0.0)]);
        assert!(matches!(
            RealSystemModel::lift_to_real(&hc, &yc, 1.0),
            Err(Error::Config(_))
        ));
        assert!(ComplexChannel::new(DMatrix::from_element(1, 1, c(f64::NAN, 0.0))).is_err());
    }

    #[test]
    fn random_residuals_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hc = generate_channel(2, 3, &mut rng);
        let xc = DVector::from_fn(2, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>()));
        let yc = DVector::from_fn(3, |_, _| c(rng.random::<f64>(), -rng.random::<f64>()));
        let complex_norm = (&yc - hc.entries() * &xc).norm_squared();
        let m = RealSystemModel::lift_to_real(&hc, &yc, 1.0).unwrap();
        let real_norm = (m.y() - m.h() * stack_complex(&xc)).norm_squared();
        assert!((complex_norm - real_norm).abs() / complex_norm < 1e-12);
    }

    #[test]
    fn channel_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hc = generate_channel(1000, 1000, &mut rng);
        let n = hc.entries().len() as f64;
        let power: f64 = hc.entries().iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        let re_mean: f64 = hc.entries().iter().map(|z| z.re).sum::<f64>() / n;
        let re_var: f64 = hc
            .entries()
            .iter()
            .map(|z| (z.re - re_mean).powi(2))
            .sum::<f64>()
            / n;
        assert!((power - 1.0).abs() < 0.01, "power {power}");
        assert!((re_var - 0.5).abs() < 0.01, "var {re_var}");
    }

    #[test]
    fn channel_is_reproducible() {
        let a = generate_channel(4, 4, &mut ChaCha8Rng::seed_from_u64(7));
        let b = generate_channel(4, 4, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn gram_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hc = generate_channel(8, 6, &mut rng);
        let yc = DVector::from_element(6, c(0.0, 0.0));
        let m = RealSystemModel::lift_to_real(&hc, &yc, 1.0)
            .unwrap()
            .with_gram();
        let f = m.gram().unwrap();
        assert_eq!(f, &f.transpose());
        let reference = m.h().transpose() * m.h();
        let scale = reference.amax();
        assert!((f - reference).amax() / scale < 1e-9);
    }

    #[test]
    fn sigma2_calibration() {
        let qam4 = PamConstellation::for_qam(4).unwrap();
        let qam64 = PamConstellation::for_qam(64).unwrap();
        assert!((snr_to_sigma2(3.0103, 1, &qam4) - 1.0).abs() < 1e-4);
        assert_eq!(snr_to_sigma2(0.0, 32, &qam64), 1344.0);
        let mut prev = f64::INFINITY;
        for db in (0..60).map(|d| d as f64) {
            let s = snr_to_sigma2(db, 8, &qam64);
            assert!(s < prev);
            prev = s;
        }
        // Eb/N0 mode: 4-QAM carries 2 bits per symbol.
        let ebn0 = snr_to_sigma2_with_mode(0.0, 1, &qam4, SnrMode::EbN0);
        assert!((ebn0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise() {
        let clean = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(NoiseSpec::disabled().add_noise(&clean, &mut rng), clean);
        assert!(NoiseSpec::new(0.0).is_err());
        assert!(NoiseSpec::new(-1.0).is_err());

        let spec = NoiseSpec::new(2.0).unwrap();
        assert_eq!(spec.per_real_component_variance(), 1.0);
        let zeros = DVector::zeros(1_000_000);
        let noisy = spec.add_noise(&zeros, &mut rng);
        let var = noisy.norm_squared() / noisy.len() as f64;
        assert!((var - 1.0).abs() < 0.01, "var {var}");

        let a = spec.add_noise(&clean, &mut ChaCha8Rng::seed_from_u64(4));
        let b = spec.add_noise(&clean, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }
}
