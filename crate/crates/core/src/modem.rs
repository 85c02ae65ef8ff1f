//! Bit/symbol mapping and conversion of bit LLRs to symbol priors.
//!
//! LLRs follow `L = ln P(b = 0) / P(b = 1)` throughout the crate, and bit 0
//! maps to the antipodal level +1. Labels store the first bit of a symbol in
//! the most significant position.

use num_complex::Complex;

use crate::error::contract;
use crate::{Real, Result};

/// LLR magnitudes are clamped to this bound before exponentiation.
pub const LLR_CLAMP: f64 = 60.0;

pub fn clamp_llr<T: Real>(l: T) -> T {
    let c = T::lit(LLR_CLAMP);
    if l.is_nan() {
        T::zero()
    } else {
        l.max(-c).min(c)
    }
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln Σ exp(xᵢ)`; returns -∞ for an empty input.
pub fn log_sum_exp<T: Real>(xs: impl IntoIterator<Item = T> + Clone) -> T {
    let m = xs.clone().into_iter().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + xs.into_iter().map(|x| (x - m).exp()).sum::<T>().ln()
}

/// Labelled signal set with `2^bits_per_symbol` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation<T> {
    points: Vec<Complex<T>>,
    bits_per_symbol: usize,
    energy: T,
}

impl<T: Real> Constellation<T> {
    /// Gray-labelled unit-energy QPSK: the first bit selects the sign of the
    /// real part and the second the sign of the imaginary part.
    pub fn qpsk() -> Self {
        let a = T::FRAC_1_SQRT_2();
        let level = |b: usize| if b == 0 { a } else { -a };
        let points = (0..4).map(|label| Complex::new(level(label >> 1), level(label & 1))).collect();
        Self { points, bits_per_symbol: 2, energy: T::one() }
    }

    /// Point for `label`; the label is the bit pattern, first bit as MSB.
    pub fn point(&self, label: usize) -> Complex<T> {
        self.points[label]
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Average symbol energy Eₛ.
    pub fn energy(&self) -> T {
        self.energy
    }

    /// Value (0 or 1) of bit `l` in the label of `label`.
    pub fn label_bit(&self, label: usize, l: usize) -> u8 {
        ((label >> (self.bits_per_symbol - 1 - l)) & 1) as u8
    }

    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex<T>>> {
        let m = self.bits_per_symbol;
        if !bits.len().is_multiple_of(m) {
            return Err(contract(format!(
                "{} bits is not a multiple of {m} bits per symbol",
                bits.len()
            )));
        }
        Ok(bits
            .chunks(m)
            .map(|chunk| {
                let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
                self.points[label]
            })
            .collect())
    }

    /// Label of the point closest to `z` (the slicer `Q(·)`).
    pub fn nearest(&self, z: Complex<T>) -> usize {
        let mut best = 0;
        let mut best_d = T::infinity();
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Labels of the `m` points closest to `z`, nearest first.
    pub fn nearest_n(&self, z: Complex<T>, m: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.points.len()).collect();
        idx.sort_by(|&a, &b| {
            let da = (z - self.points[a]).norm_sqr();
            let db = (z - self.points[b]).norm_sqr();
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        idx.truncate(m);
        idx
    }

    pub fn demodulate_hard(&self, symbols: &[Complex<T>]) -> Vec<u8> {
        let m = self.bits_per_symbol;
        let mut out = Vec::with_capacity(symbols.len() * m);
        for &z in symbols {
            let label = self.nearest(z);
            out.extend((0..m).map(|l| self.label_bit(label, l)));
        }
        out
    }

    /// Log prior probability of every point given the bit LLRs of one
    /// symbol, assuming independent bits.
    pub fn log_apriori(&self, llrs: &[T]) -> Vec<T> {
        debug_assert_eq!(llrs.len(), self.bits_per_symbol);
        (0..self.points.len())
            .map(|label| {
                llrs.iter()
                    .enumerate()
                    .map(|(l, &llr)| {
                        let sign = if self.label_bit(label, l) == 0 { T::one() } else { -T::one() };
                        -softplus(-sign * clamp_llr(llr))
                    })
                    .sum()
            })
            .collect()
    }

    /// Prior probability of every point; sums to one.
    pub fn apriori_probs(&self, llrs: &[T]) -> Vec<T> {
        self.log_apriori(llrs).into_iter().map(T::exp).collect()
    }

    /// Prior mean and variance of the symbol described by `llrs`.
    pub fn soft_symbol(&self, llrs: &[T]) -> SoftSymbol<T> {
        let probs = self.apriori_probs(llrs);
        let mean = self
            .points
            .iter()
            .zip(&probs)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (s, &p)| acc + s * p);
        let variance = self
            .points
            .iter()
            .zip(&probs)
            .map(|(s, &p)| (s - mean).norm_sqr() * p)
            .sum::<T>()
            .max(T::zero())
            .min(self.energy);
        SoftSymbol { mean, variance }
    }
}

/// Prior mean and variance of one user's symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftSymbol<T> {
    pub mean: Complex<T>,
    pub variance: T,
}

impl<T: Real> SoftSymbol<T> {
    /// The uninformed prior of a zero-mean constellation with energy `es`.
    pub fn uninformed(es: T) -> Self {
        Self { mean: Complex::new(T::zero(), T::zero()), variance: es }
    }
}
