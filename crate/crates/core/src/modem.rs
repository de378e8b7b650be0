//! M-PAM / square M-QAM constellations and the weighted ±1 bit decomposition.
//!
//! A PAM point is written as `x = sum_j 2^j * b_j` with every `b_j` in
//! `{-1, +1}`. Plane 0 is the least significant bit. Flipping it always moves
//! a symbol to a Euclidean nearest neighbour (distance 2). Square M-QAM is two
//! independent `sqrt(M)`-PAMs, one per real dimension of the lifted model.

use rand::Rng;

use crate::error::{Error, Result};

/// A PAM symbol value. Points are small odd integers, so `i32` is exact.
pub type Symbol = i32;

/// One bit of the weighted decomposition, `-1` or `+1`.
pub type Bit = i8;

/// M-PAM alphabet `{2k - 1 - M : k = 1..M}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PamConstellation {
    m: usize,
    n_bits: usize,
    points: Vec<Symbol>,
}

impl PamConstellation {
    /// Builds the `m`-PAM alphabet. `m` must be a power of two, at least 2.
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 || !m.is_power_of_two() || m > 1 << 16 {
            return Err(Error::Config(format!(
                "PAM size must be a power of two >= 2, got {m}"
            )));
        }
        let points = (1..=m as i32).map(|k| 2 * k - 1 - m as i32).collect();
        Ok(Self {
            m,
            n_bits: m.trailing_zeros() as usize,
            points,
        })
    }

    /// The PAM alphabet underlying square `qam`-QAM (`qam` = 4, 16, 64, ...).
    pub fn for_qam(qam: usize) -> Result<Self> {
        let side = (qam as f64).sqrt().round() as usize;
        if side * side != qam {
            return Err(Error::Config(format!(
                "{qam}-QAM is not a square constellation"
            )));
        }
        Self::new(side)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Bits per real dimension, `log2 M`.
    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn points(&self) -> &[Symbol] {
        &self.points
    }

    /// Order of the square QAM built from two copies of this PAM.
    pub fn qam_order(&self) -> usize {
        self.m * self.m
    }

    /// Position of `x` in the ordered alphabet.
    #[inline]
    pub fn index_of(&self, x: Symbol) -> Option<usize> {
        let shifted = x + self.m as i32 - 1;
        if shifted < 0 || shifted % 2 != 0 {
            return None;
        }
        let idx = (shifted / 2) as usize;
        (idx < self.m).then_some(idx)
    }

    #[inline]
    pub fn point(&self, index: usize) -> Symbol {
        2 * index as i32 + 1 - self.m as i32
    }

    pub fn contains(&self, x: Symbol) -> bool {
        self.index_of(x).is_some()
    }

    /// Nearest alphabet point; exact midpoints go to the more negative point.
    #[inline]
    pub fn quantize(&self, v: f64) -> Symbol {
        let t = (v + self.m as f64 - 1.0) / 2.0;
        let idx = (t - 0.5).ceil().clamp(0.0, (self.m - 1) as f64) as usize;
        self.point(idx)
    }

    /// Alphabet points at Euclidean distance 2 from `x` (one or two of them).
    #[inline]
    pub fn nearest_neighbors(&self, x: Symbol) -> impl Iterator<Item = Symbol> {
        let lo = -(self.m as i32) + 1;
        let hi = self.m as i32 - 1;
        [x - 2, x + 2]
            .into_iter()
            .filter(move |&p| p >= lo && p <= hi)
    }

    /// Mean of `p^2` over the alphabet, `(M^2 - 1) / 3`.
    pub fn average_energy(&self) -> f64 {
        let m = self.m as f64;
        (m * m - 1.0) / 3.0
    }

    /// Average energy of one complex QAM symbol, `2 (M^2 - 1) / 3`.
    pub fn qam_symbol_energy(&self) -> f64 {
        2.0 * self.average_energy()
    }

    /// Decomposes `x` into its `log2 M` weighted bits, plane 0 first.
    pub fn symbol_to_bits(&self, x: Symbol) -> Result<Vec<Bit>> {
        let idx = self.index_of(x).ok_or(Error::NotInAlphabet {
            value: x,
            m: self.m,
        })?;
        Ok(index_bits(idx, self.n_bits).collect())
    }

    /// Bit `plane` of symbol `x`. `x` must be in the alphabet.
    #[inline]
    pub fn bit(&self, x: Symbol, plane: usize) -> Bit {
        let idx = ((x + self.m as i32 - 1) / 2) as usize;
        if (idx >> plane) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// `2 * nt` i.i.d. uniform alphabet draws: one square-QAM vector in real form.
    pub fn random_vector<R: Rng + ?Sized>(&self, nt: usize, rng: &mut R) -> Vec<Symbol> {
        (0..2 * nt)
            .map(|_| self.point(rng.random_range(0..self.m)))
            .collect()
    }
}

fn index_bits(idx: usize, n_bits: usize) -> impl Iterator<Item = Bit> {
    (0..n_bits).map(move |j| if (idx >> j) & 1 == 1 { 1 } else { -1 })
}

/// Builds the `m`-PAM alphabet.
pub fn pam_alphabet(m: usize) -> Result<PamConstellation> {
    PamConstellation::new(m)
}

/// `sum_j 2^j b_j`. Always a point of the `2^len`-PAM alphabet.
pub fn bits_to_symbol(bits: &[Bit]) -> Symbol {
    bits.iter()
        .enumerate()
        .map(|(j, &b)| (1i32 << j) * b as i32)
        .sum()
}

/// Inverse of [`bits_to_symbol`] for a `2^n`-PAM symbol.
pub fn symbol_to_bits(x: Symbol, n: usize) -> Result<Vec<Bit>> {
    PamConstellation::new(1 << n)?.symbol_to_bits(x)
}

/// Bit planes of a real symbol vector: `planes[j][i]` is bit `j` of entry `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlanes {
    planes: Vec<Vec<Bit>>,
}

impl BitPlanes {
    pub fn from_symbols(symbols: &[Symbol], constellation: &PamConstellation) -> Result<Self> {
        let mut planes = vec![Vec::with_capacity(symbols.len()); constellation.n_bits()];
        for &x in symbols {
            let idx = constellation.index_of(x).ok_or(Error::NotInAlphabet {
                value: x,
                m: constellation.m(),
            })?;
            for (plane, b) in planes
                .iter_mut()
                .zip(index_bits(idx, constellation.n_bits()))
            {
                plane.push(b);
            }
        }
        Ok(Self { planes })
    }

    /// Wraps explicit planes. All planes must share one length and hold ±1 only.
    pub fn from_planes(planes: Vec<Vec<Bit>>) -> Result<Self> {
        let len = planes.first().map_or(0, Vec::len);
        if planes.is_empty() {
            return Err(Error::Config("at least one bit plane is required".into()));
        }
        for p in &planes {
            if p.len() != len || p.iter().any(|&b| b != 1 && b != -1) {
                return Err(Error::Config(
                    "bit planes must be equal-length ±1 vectors".into(),
                ));
            }
        }
        Ok(Self { planes })
    }

    pub fn n_planes(&self) -> usize {
        self.planes.len()
    }

    /// Number of real dimensions covered by each plane.
    pub fn len(&self) -> usize {
        self.planes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self, j: usize) -> &[Bit] {
        &self.planes[j]
    }

    pub fn replace_plane(&mut self, j: usize, bits: Vec<Bit>) -> Result<()> {
        if bits.len() != self.len() || bits.iter().any(|&b| b != 1 && b != -1) {
            return Err(Error::Config(
                "replacement plane must be a ±1 vector of matching length".into(),
            ));
        }
        self.planes[j] = bits;
        Ok(())
    }

    /// Recombines the planes, `x_i = sum_j 2^j b_i^(j)`.
    pub fn to_symbols(&self) -> Vec<Symbol> {
        self.weighted_sum(0)
    }

    /// `sum_{j >= from} 2^j b^(j)`, the contribution of planes `from..`.
    pub fn weighted_sum(&self, from: usize) -> Vec<Symbol> {
        let mut out = vec![0; self.len()];
        for (j, plane) in self.planes.iter().enumerate().skip(from) {
            for (o, &b) in out.iter_mut().zip(plane) {
                *o += (1i32 << j) * b as i32;
            }
        }
        out
    }
}
