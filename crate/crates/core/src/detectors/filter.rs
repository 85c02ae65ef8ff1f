//! MMSE filters: the direct L-dimensional solve and the user-space
//! machinery the detectors run on.

use std::borrow::Cow;

use num_complex::Complex;

use super::{DetectorContext, Link};
use crate::error::contract;
use crate::numerics::{dot, gram_plus_scaled_identity, hermitian_solve, ComplexMatrix, ComplexVector, Lu};
use crate::{Error, Real, Result};

/// Floor applied to the effective noise variance `λ²`.
pub const MIN_EFFECTIVE_NOISE: f64 = 1e-12;

fn gain_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1e4))
}

/// Validates `wᴴg` and returns its real part, clamped to `[0, 1]`.
pub(crate) fn checked_gain<T: Real>(mu: Complex<T>) -> Result<T> {
    let tol = gain_tolerance::<T>();
    if !(mu.im.abs() <= tol) {
        return Err(Error::Numerical(format!("filter gain has imaginary part {}", mu.im)));
    }
    if !(mu.re >= -tol && mu.re <= T::one() + tol) {
        return Err(Error::Numerical(format!("filter gain {} outside (0, 1]", mu.re)));
    }
    Ok(mu.re.max(T::zero()).min(T::one()))
}

pub(crate) fn effective_noise<T: Real>(mu: T) -> T {
    (mu - mu * mu).max(T::lit(MIN_EFFECTIVE_NOISE))
}

/// `w_k = (c·I + G diag(weights) Gᴴ)⁻¹ g_k` by a Hermitian solve in the
/// AP dimension.
pub fn mmse_filter_weighted<T: Real>(
    g: &ComplexMatrix<T>,
    weights: &[T],
    loading: T,
    k: usize,
) -> Result<ComplexVector<T>> {
    if k >= g.cols() {
        return Err(contract(format!("user {k} out of range for {} users", g.cols())));
    }
    let a = gram_plus_scaled_identity(g, weights, loading)?;
    hermitian_solve(&a, &g.column(k))
}

/// The soft-cancellation MMSE filter of user `k`: residual weights
/// `σ²_j/Eₛ` from the priors for every other user and one for `k`.
pub fn mmse_filter<T: Real>(ctx: &DetectorContext<'_, T>, k: usize) -> Result<ComplexVector<T>> {
    let mut weights = ctx.prior_weights();
    if k >= weights.len() {
        return Err(contract(format!("user {k} out of range for {} users", weights.len())));
    }
    weights[k] = T::one();
    mmse_filter_weighted(ctx.link.g(), &weights, ctx.link.loading(), k)
}

/// Effective gain `μ_k = w_kᴴ g_k` and noise variance `λ²_k = μ_k - μ_k²`
/// of the filter `w`.
pub fn awgn_params<T: Real>(link: &Link<T>, k: usize, w: &[Complex<T>]) -> Result<(T, T)> {
    if k >= link.users() || w.len() != link.aps() {
        return Err(contract("filter or user index does not match the link"));
    }
    let mu = checked_gain(dot(w, &link.g().column(k)))?;
    Ok((mu, effective_noise(mu)))
}

/// `(c·I + diag(weights)·R)⁻¹`.
pub(crate) fn weighted_inverse<T: Real>(link: &Link<T>, weights: &[T]) -> Result<ComplexMatrix<T>> {
    let r = link.gram();
    let c = link.loading();
    let k = r.rows();
    let b = ComplexMatrix::from_fn(k, k, |i, j| {
        let mut v = r[(i, j)] * weights[i];
        if i == j {
            v.re += c;
        }
        v
    });
    Lu::factor(b)?.inverse()
}

/// `(c·I + R)⁻¹`, shared by every call without prior information.
pub(crate) fn uninformed_inverse<T: Real>(link: &Link<T>) -> Result<&ComplexMatrix<T>> {
    if let Some(inv) = link.uninformed_inverse.get() {
        return Ok(inv);
    }
    let inv = weighted_inverse(link, &vec![T::one(); link.users()])?;
    Ok(link.uninformed_inverse.get_or_init(|| inv))
}

pub(crate) fn column<T: Real>(m: &ComplexMatrix<T>, j: usize) -> ComplexVector<T> {
    m.column(j)
}

/// `μ = (R x)_k` for the user-space coefficients `x` of a filter.
pub(crate) fn gain_of<T: Real>(link: &Link<T>, x: &[Complex<T>], k: usize) -> Result<T> {
    let row = link.gram().row(k);
    let mu = row.iter().zip(x).fold(Complex::new(T::zero(), T::zero()), |acc, (r, v)| acc + r * v);
    checked_gain(mu)
}

/// Changes the weight of user `j` by `alpha` in a maintained inverse of
/// `c·I + diag(weights)·R` (Sherman–Morrison on row `j`).
pub(crate) fn reweight<T: Real>(link: &Link<T>, inv: &mut ComplexMatrix<T>, j: usize, alpha: T) -> Result<()> {
    if alpha == T::zero() {
        return Ok(());
    }
    let k = inv.rows();
    let r = link.gram().row(j);
    let col: ComplexVector<T> = inv.column(j);
    let mut row = vec![Complex::new(T::zero(), T::zero()); k];
    for (a, &rv) in r.iter().enumerate() {
        if rv.re == T::zero() && rv.im == T::zero() {
            continue;
        }
        for (b, out) in inv.row(a).iter().zip(row.iter_mut()) {
            *out += rv * b;
        }
    }
    let den = Complex::new(T::one(), T::zero()) + row[j] * alpha;
    if !(den.norm() > T::epsilon()) {
        return Err(Error::Numerical("singular filter update".to_string()));
    }
    for a in 0..k {
        let f = col[a] * alpha / den;
        for b in 0..k {
            let d = f * row[b];
            inv[(a, b)] -= d;
        }
    }
    Ok(())
}

/// Filter of one successive stage in user-space form.
#[derive(Debug, Clone)]
pub(crate) struct StageFilter<T> {
    pub coeffs: ComplexVector<T>,
    pub gain: T,
}

/// Stage filters of hard-decision successive cancellation, one per
/// position of the detection order. At the stage of user `u`, users
/// already decided carry weight zero, `u` carries one and users still to
/// come keep their prior residual weight.
pub(crate) fn hard_stage_filters<'a, T: Real>(ctx: &DetectorContext<'a, T>) -> Result<Cow<'a, [StageFilter<T>]>> {
    let link = ctx.link;
    if ctx.priors_uninformed() {
        if let Some(stages) = link.uninformed_stages.get() {
            return Ok(Cow::Borrowed(stages));
        }
        let stages = build_hard_stages(link, &vec![T::one(); link.users()])?;
        return Ok(Cow::Borrowed(link.uninformed_stages.get_or_init(|| stages)));
    }
    Ok(Cow::Owned(build_hard_stages(link, &ctx.prior_weights())?))
}

fn build_hard_stages<T: Real>(link: &Link<T>, prior_weights: &[T]) -> Result<Vec<StageFilter<T>>> {
    let order = link.order();
    let mut weights = prior_weights.to_vec();
    weights[order[0]] = T::one();
    let mut inv = if weights.iter().all(|&w| w == T::one()) {
        uninformed_inverse(link)?.clone()
    } else {
        weighted_inverse(link, &weights)?
    };
    let mut stages = Vec::with_capacity(order.len());
    for (p, &u) in order.iter().enumerate() {
        if p > 0 {
            reweight(link, &mut inv, u, T::one() - weights[u])?;
            weights[u] = T::one();
        }
        let coeffs = column(&inv, u);
        let gain = gain_of(link, &coeffs, u)?;
        stages.push(StageFilter { coeffs, gain });
        if p + 1 < order.len() {
            reweight(link, &mut inv, u, -weights[u])?;
            weights[u] = T::zero();
        }
    }
    link.count_stage_filters(stages.len());
    Ok(stages)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::DetectionOrder;
    use super::*;
    use crate::modem::{Constellation, SoftSymbol};
    use crate::numerics::norm_sq;

    fn link(seed: u64, l: usize, k: usize, noise: f64) -> Link<f64> {
        Link::new(random_channel(seed, l, k), noise, 1.0, DetectionOrder::Natural).unwrap()
    }

    #[test]
    fn single_user_filter_is_scaled_matched_filter() {
        let lk = link(2, 5, 1, 0.3);
        let g = lk.g().column(0);
        let w = mmse_filter_weighted(lk.g(), &[1.0], 0.3, 0).unwrap();
        let scale = 1.0 / (0.3 + norm_sq(&g));
        for (a, b) in w.iter().zip(&g) {
            assert!((a - b * scale).norm() < 1e-12);
        }
        let (mu, lambda) = awgn_params(&lk, 0, &w).unwrap();
        let expect = norm_sq(&g) / (0.3 + norm_sq(&g));
        assert!((mu - expect).abs() < 1e-12);
        assert!((lambda - (mu - mu * mu)).abs() < 1e-15);
    }

    #[test]
    fn certain_interferers_give_matched_filter() {
        let lk = link(3, 6, 3, 0.2);
        let g = lk.g().column(1);
        let w = mmse_filter_weighted(lk.g(), &[0.0, 1.0, 0.0], 0.2, 1).unwrap();
        let scale = 1.0 / (0.2 + norm_sq(&g));
        for (a, b) in w.iter().zip(&g) {
            assert!((a - b * scale).norm() < 1e-12);
        }
    }

    #[test]
    fn gain_vanishes_with_noise() {
        let lk = link(4, 6, 3, 1e9);
        let w = mmse_filter_weighted(lk.g(), &[1.0; 3], lk.loading(), 0).unwrap();
        assert!(awgn_params(&lk, 0, &w).unwrap().0 < 1e-8);
    }

    #[test]
    fn gain_is_real_and_matches_quadratic_form() {
        let lk = link(5, 8, 4, 0.5);
        let qpsk = Constellation::qpsk();
        let priors = random_priors(6, 4, 3.0);
        let y = vec![Complex::new(0.0, 0.0); 8];
        let ctx = DetectorContext::new(&lk, &y, &priors, &qpsk).unwrap();
        for k in 0..4 {
            let w = mmse_filter(&ctx, k).unwrap();
            let raw = dot(&w, &lk.g().column(k));
            assert!(raw.im.abs() < 1e-10);
            // gₖᴴ A⁻¹ gₖ with A⁻¹gₖ solved a second time from scratch.
            let mut weights = ctx.prior_weights();
            weights[k] = 1.0;
            let a = gram_plus_scaled_identity(lk.g(), &weights, 0.5).unwrap();
            let v = crate::numerics::Lu::factor(a).unwrap().solve(&lk.g().column(k)).unwrap();
            let quad = dot(&lk.g().column(k), &v);
            assert!((quad - raw).norm() < 1e-10);
        }
    }

    #[test]
    fn user_space_filters_match_direct_solve() {
        let lk = link(7, 10, 5, 0.05);
        let weights = [0.3, 1.0, 0.0, 0.7, 0.01];
        let inv = weighted_inverse(&lk, &weights).unwrap();
        for k in 0..5 {
            let mut wts = weights;
            wts[k] = 1.0;
            let direct = mmse_filter_weighted(lk.g(), &wts, lk.loading(), k).unwrap();
            let mut inv_k = inv.clone();
            reweight(&lk, &mut inv_k, k, 1.0 - weights[k]).unwrap();
            let fast = lk.g().mul_vec(&column(&inv_k, k)).unwrap();
            for (a, b) in fast.iter().zip(&direct) {
                assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()));
            }
        }
    }

    #[test]
    fn hard_stages_match_direct_solves() {
        let lk = link(8, 12, 6, 0.02);
        let qpsk = Constellation::qpsk();
        let priors = random_priors(9, 6, 4.0);
        let y = vec![Complex::new(0.0, 0.0); 12];
        let ctx = DetectorContext::new(&lk, &y, &priors, &qpsk).unwrap();
        let stages = hard_stage_filters(&ctx).unwrap();
        let prior_w = ctx.prior_weights();
        for (p, &u) in lk.order().iter().enumerate() {
            let mut w = prior_w.clone();
            for &t in &lk.order()[..p] {
                w[t] = 0.0;
            }
            w[u] = 1.0;
            let direct = mmse_filter_weighted(lk.g(), &w, lk.loading(), u).unwrap();
            let fast = lk.g().mul_vec(&stages[p].coeffs).unwrap();
            for (a, b) in fast.iter().zip(&direct) {
                assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()));
            }
            let (mu, _) = awgn_params(&lk, u, &direct).unwrap();
            assert!((mu - stages[p].gain).abs() < 1e-10);
        }
    }

    #[test]
    fn uninformed_stages_are_cached() {
        let lk = link(10, 8, 4, 0.1);
        let qpsk = Constellation::qpsk();
        let priors = vec![SoftSymbol::uninformed(1.0); 4];
        let y = vec![Complex::new(0.0, 0.0); 8];
        let ctx = DetectorContext::new(&lk, &y, &priors, &qpsk).unwrap();
        hard_stage_filters(&ctx).unwrap();
        hard_stage_filters(&ctx).unwrap();
        assert_eq!(lk.stage_filters_built(), 4);
    }

    #[test]
    fn inconsistent_gain_is_reported() {
        assert!(matches!(checked_gain(Complex::new(1.5, 0.0)), Err(Error::Numerical(_))));
        assert!(matches!(checked_gain(Complex::new(0.5, 1e-3)), Err(Error::Numerical(_))));
        assert_eq!(checked_gain(Complex::new(1.0 + 1e-12, 0.0)).unwrap(), 1.0);
        assert_eq!(effective_noise(1.0), MIN_EFFECTIVE_NOISE);
    }

    #[test]
    fn single_precision_filters() {
        let g64 = random_channel(11, 8, 4);
        let lk = Link::new(g64.cast::<f32>(), 0.1f32, 1.0, DetectionOrder::Natural).unwrap();
        let inv = uninformed_inverse(&lk).unwrap();
        let fast = lk.g().mul_vec(&column(inv, 2)).unwrap();
        let direct = mmse_filter_weighted(lk.g(), &[1.0f32; 4], 0.1, 2).unwrap();
        for (a, b) in fast.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-4);
        }
    }
}
