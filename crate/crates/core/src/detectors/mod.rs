//! Soft-cancellation MMSE detectors for one received vector.
//!
//! Every detector works on a [`Link`]: the channel matrix `G` held fixed
//! over a frame together with its Gram matrix `R = GᴴG` and the diagonal
//! loading `c = σ²/Eₛ`. Filters are evaluated in the K-dimensional user
//! space through the identity
//!
//! ```text
//! (c·I_L + G Δ Gᴴ)⁻¹ G = G (c·I_K + Δ R)⁻¹
//! ```
//!
//! so a filter is represented by its coefficient vector `x` with
//! `w = G x`, `wᴴy = xᴴ(Gᴴy)` and `μ = wᴴg_k = (R x)_k`. The plain
//! L-dimensional solve is kept as [`mmse_filter`] and serves as the
//! reference in tests.

mod feedback;
mod filter;
mod llr;
mod soft;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::OnceLock;

use num_complex::Complex;

pub use feedback::{hard_sic_detect, mf_pic_detect, mf_sic_detect, ml_detect};
pub use filter::{awgn_params, mmse_filter, mmse_filter_weighted, MIN_EFFECTIVE_NOISE};
pub use llr::extrinsic_llrs;
pub use soft::{mmse_estimate, soft_pic_estimate, soft_sic_estimate};

use crate::error::contract;
use crate::modem::{Constellation, SoftSymbol};
use crate::numerics::{ComplexMatrix, ComplexVector};
use crate::{Error, Real, Result};

use filter::StageFilter;

/// Detector variants, listed in their canonical reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    Mmse,
    Sic,
    Pic,
    MfSic,
    MfPic,
    /// Exhaustive maximum likelihood; hard output only.
    Ml,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Mmse,
        DetectorKind::Sic,
        DetectorKind::Pic,
        DetectorKind::MfSic,
        DetectorKind::MfPic,
        DetectorKind::Ml,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Mmse => "mmse",
            DetectorKind::Sic => "sic",
            DetectorKind::Pic => "pic",
            DetectorKind::MfSic => "mf-sic",
            DetectorKind::MfPic => "mf-pic",
            DetectorKind::Ml => "ml",
        }
    }

    /// Whether the detector produces soft estimates usable in the IDD loop.
    pub fn is_soft(self) -> bool {
        self != DetectorKind::Ml
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| contract(format!("unknown detector '{s}' (expected mmse, sic, pic, mf-sic, mf-pic or ml)")))
    }
}

/// Order in which successive detectors visit the users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectionOrder {
    /// User index order.
    #[default]
    Natural,
    /// Strongest channel column first, ties by index.
    ColumnNorm,
}

impl DetectionOrder {
    pub fn name(self) -> &'static str {
        match self {
            DetectionOrder::Natural => "natural",
            DetectionOrder::ColumnNorm => "norm",
        }
    }

    pub fn permutation<T: Real>(self, g: &ComplexMatrix<T>) -> Vec<usize> {
        let mut order: Vec<usize> = (0..g.cols()).collect();
        if self == DetectionOrder::ColumnNorm {
            let norms: Vec<T> = (0..g.cols()).map(|k| crate::numerics::norm_sq(&g.column(k))).collect();
            order.sort_by(|&a, &b| {
                norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
            });
        }
        order
    }
}

impl fmt::Display for DetectionOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectionOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(DetectionOrder::Natural),
            "norm" => Ok(DetectionOrder::ColumnNorm),
            _ => Err(contract(format!("unknown detection order '{s}' (expected natural or norm)"))),
        }
    }
}

/// Multiple-feedback parameters: the reliability radius `d_th` around each
/// constellation point and the number `M` of candidates tried when an
/// estimate falls outside every radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfConfig {
    pub threshold: f64,
    pub candidates: usize,
}

impl Default for MfConfig {
    fn default() -> Self {
        Self { threshold: 0.38, candidates: 4 }
    }
}

impl MfConfig {
    pub fn validate(&self, order: usize) -> Result<()> {
        if !(self.threshold >= 0.0) {
            return Err(contract(format!("d_th must be >= 0, got {}", self.threshold)));
        }
        if self.candidates == 0 || self.candidates > order {
            return Err(contract(format!(
                "candidate count must lie in 1..={order}, got {}",
                self.candidates
            )));
        }
        Ok(())
    }
}

/// Filter output modelled as `ŝ = μ s + z` with `z ~ CN(0, λ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftEstimate<T> {
    pub estimate: Complex<T>,
    /// Effective gain `μ = wᴴg`.
    pub gain: T,
    /// Effective noise variance `λ² = μ - μ²`.
    pub noise: T,
}

/// Result of one detector call: per-user soft estimates (empty for the
/// ML detector) and hard decisions as constellation labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub soft: Vec<SoftEstimate<T>>,
    pub hard: Vec<usize>,
}

/// Channel state shared by every detector call within a frame.
#[derive(Debug)]
pub struct Link<T> {
    g: ComplexMatrix<T>,
    gram: ComplexMatrix<T>,
    noise_var: T,
    energy: T,
    order: Vec<usize>,
    uninformed_inverse: OnceLock<ComplexMatrix<T>>,
    uninformed_stages: OnceLock<Vec<StageFilter<T>>>,
    stage_filters_built: AtomicUsize,
}

impl<T: Real> Link<T> {
    pub fn new(g: ComplexMatrix<T>, noise_var: T, energy: T, order: DetectionOrder) -> Result<Self> {
        if g.rows() == 0 || g.cols() == 0 {
            return Err(contract("channel matrix must be non-empty"));
        }
        if !(noise_var > T::zero()) || !noise_var.is_finite() {
            return Err(contract(format!("noise variance must be positive and finite, got {noise_var}")));
        }
        if !(energy > T::zero()) {
            return Err(contract(format!("symbol energy must be positive, got {energy}")));
        }
        let gram = g.gram();
        let order = order.permutation(&g);
        Ok(Self {
            g,
            gram,
            noise_var,
            energy,
            order,
            uninformed_inverse: OnceLock::new(),
            uninformed_stages: OnceLock::new(),
            stage_filters_built: AtomicUsize::new(0),
        })
    }

    pub fn g(&self) -> &ComplexMatrix<T> {
        &self.g
    }

    /// `R = GᴴG`.
    pub fn gram(&self) -> &ComplexMatrix<T> {
        &self.gram
    }

    pub fn noise_var(&self) -> T {
        self.noise_var
    }

    pub fn energy(&self) -> T {
        self.energy
    }

    /// Diagonal loading `c = σ²/Eₛ`.
    pub fn loading(&self) -> T {
        self.noise_var / self.energy
    }

    pub fn aps(&self) -> usize {
        self.g.rows()
    }

    pub fn users(&self) -> usize {
        self.g.cols()
    }

    /// Detection order used by the successive detectors.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Number of successive-stage filters computed on this link so far.
    /// Candidate evaluation never adds to it.
    pub fn stage_filters_built(&self) -> usize {
        self.stage_filters_built.load(AtomicOrdering::Relaxed)
    }

    fn count_stage_filters(&self, n: usize) {
        self.stage_filters_built.fetch_add(n, AtomicOrdering::Relaxed);
    }
}

/// Everything a detector needs for one channel use.
#[derive(Debug, Clone, Copy)]
pub struct DetectorContext<'a, T> {
    pub link: &'a Link<T>,
    pub y: &'a [Complex<T>],
    pub priors: &'a [SoftSymbol<T>],
    pub constellation: &'a Constellation<T>,
}

impl<'a, T: Real> DetectorContext<'a, T> {
    pub fn new(
        link: &'a Link<T>,
        y: &'a [Complex<T>],
        priors: &'a [SoftSymbol<T>],
        constellation: &'a Constellation<T>,
    ) -> Result<Self> {
        if y.len() != link.aps() {
            return Err(contract(format!("received vector of length {}, expected {}", y.len(), link.aps())));
        }
        if priors.len() != link.users() {
            return Err(contract(format!("{} priors for {} users", priors.len(), link.users())));
        }
        Ok(Self { link, y, priors, constellation })
    }

    /// True when no user has prior information (zero mean, full variance).
    pub fn priors_uninformed(&self) -> bool {
        let es = self.link.energy;
        self.priors.iter().all(|p| p.mean.re == T::zero() && p.mean.im == T::zero() && p.variance >= es)
    }

    /// Normalised residual variances `σ²_j / Eₛ`, capped at one.
    pub(crate) fn prior_weights(&self) -> Vec<T> {
        let es = self.link.energy;
        self.priors.iter().map(|p| (p.variance / es).min(T::one()).max(T::zero())).collect()
    }

    pub(crate) fn prior_means(&self) -> ComplexVector<T> {
        self.priors.iter().map(|p| p.mean).collect()
    }

    /// `Gᴴy`.
    pub(crate) fn matched(&self) -> Result<ComplexVector<T>> {
        self.link.g.adjoint_mul_vec(self.y)
    }
}

/// Runs `kind` on one channel use.
pub fn detect<T: Real>(kind: DetectorKind, ctx: &DetectorContext<'_, T>, mf: &MfConfig) -> Result<Detection<T>> {
    let hard_of = |soft: &[SoftEstimate<T>]| soft.iter().map(|s| ctx.constellation.nearest(s.estimate)).collect();
    match kind {
        DetectorKind::Mmse => {
            let soft = mmse_estimate(ctx)?;
            Ok(Detection { hard: hard_of(&soft), soft })
        }
        DetectorKind::Pic => {
            let soft = soft_pic_estimate(ctx)?;
            Ok(Detection { hard: hard_of(&soft), soft })
        }
        DetectorKind::Sic => {
            let soft = soft_sic_estimate(ctx)?;
            Ok(Detection { hard: hard_of(&soft), soft })
        }
        DetectorKind::MfSic => mf_sic_detect(ctx, mf),
        DetectorKind::MfPic => mf_pic_detect(ctx, mf),
        DetectorKind::Ml => Ok(Detection { soft: Vec::new(), hard: ml_detect(ctx)? }),
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn cn(rng: &mut ChaCha8Rng) -> Complex<f64> {
        let n: f64 = rng.sample(rand_distr::StandardNormal);
        let m: f64 = rng.sample(rand_distr::StandardNormal);
        Complex::new(n, m) * std::f64::consts::FRAC_1_SQRT_2
    }

    pub fn random_channel(seed: u64, l: usize, k: usize) -> ComplexMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(l, k, |_, _| cn(&mut rng))
    }

    /// Transmitted labels, received vector and the channel for one use.
    pub fn random_use(
        seed: u64,
        g: &ComplexMatrix<f64>,
        noise_var: f64,
    ) -> (Vec<usize>, ComplexVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qpsk = Constellation::<f64>::qpsk();
        let labels: Vec<usize> = (0..g.cols()).map(|_| rng.random_range(0..4)).collect();
        let s: Vec<_> = labels.iter().map(|&l| qpsk.point(l)).collect();
        let mut y = g.mul_vec(&s).unwrap();
        for v in y.iter_mut() {
            *v += cn(&mut rng) * noise_var.sqrt();
        }
        (labels, y)
    }

    pub fn random_priors(seed: u64, k: usize, spread: f64) -> Vec<SoftSymbol<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qpsk = Constellation::<f64>::qpsk();
        (0..k)
            .map(|_| qpsk.soft_symbol(&[rng.random_range(-spread..spread), rng.random_range(-spread..spread)]))
            .collect()
    }
}
