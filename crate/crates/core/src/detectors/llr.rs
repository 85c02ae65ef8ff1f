use super::SoftEstimate;
use crate::error::contract;
use crate::modem::{clamp_llr, log_sum_exp, Constellation};
use crate::{Real, Result};

/// Extrinsic bit LLRs of one filter output under the Gaussian model
/// `f(ŝ | s) ∝ exp(-|ŝ - μ s|² / λ²)`.
///
/// Each bit's a-posteriori LLR is marginalised over the points labelled
/// with that bit, weighted by the prior point probabilities, and the
/// prior LLR of the bit itself is removed. Outputs are clamped to
/// `±LLR_CLAMP`.
pub fn extrinsic_llrs<T: Real>(
    est: &SoftEstimate<T>,
    prior_llrs: &[T],
    constellation: &Constellation<T>,
) -> Result<Vec<T>> {
    let m = constellation.bits_per_symbol();
    if prior_llrs.len() != m {
        return Err(contract(format!("{} prior LLRs for {m} bits per symbol", prior_llrs.len())));
    }
    if !(est.noise > T::zero()) {
        return Err(contract(format!("effective noise variance must be positive, got {}", est.noise)));
    }
    let log_prior = constellation.log_apriori(prior_llrs);
    let metric: Vec<T> = constellation
        .points()
        .iter()
        .zip(&log_prior)
        .map(|(s, &lp)| -(est.estimate - s * est.gain).norm_sqr() / est.noise + lp)
        .collect();
    Ok((0..m)
        .map(|l| {
            let pick = |bit: u8| {
                metric
                    .iter()
                    .enumerate()
                    .filter(move |(label, _)| constellation.label_bit(*label, l) == bit)
                    .map(|(_, &v)| v)
            };
            let posterior = log_sum_exp(pick(0)) - log_sum_exp(pick(1));
            clamp_llr(posterior - clamp_llr(prior_llrs[l]))
        })
        .collect())
}
