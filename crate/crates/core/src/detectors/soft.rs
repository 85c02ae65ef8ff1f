use num_complex::Complex;

use super::filter::{column, effective_noise, gain_of, reweight, uninformed_inverse, weighted_inverse};
use super::{DetectorContext, SoftEstimate};
use crate::numerics::{dot, ComplexVector};
use crate::{Real, Result};

fn estimate<T: Real>(x: &[Complex<T>], v: &[Complex<T>], gain: T) -> SoftEstimate<T> {
    SoftEstimate { estimate: dot(x, v), gain, noise: effective_noise(gain) }
}

/// `v -= a · R[:, j]`
fn cancel<T: Real>(ctx: &DetectorContext<'_, T>, v: &mut [Complex<T>], a: Complex<T>, j: usize) {
    if a.re == T::zero() && a.im == T::zero() {
        return;
    }
    let r = ctx.link.gram();
    for (i, vi) in v.iter_mut().enumerate() {
        *vi -= r[(i, j)] * a;
    }
}

/// Linear MMSE filtering of the uncancelled received vector. Priors are
/// ignored.
pub fn mmse_estimate<T: Real>(ctx: &DetectorContext<'_, T>) -> Result<Vec<SoftEstimate<T>>> {
    let inv = uninformed_inverse(ctx.link)?;
    let z = ctx.matched()?;
    (0..ctx.link.users())
        .map(|k| {
            let x = column(inv, k);
            Ok(estimate(&x, &z, gain_of(ctx.link, &x, k)?))
        })
        .collect()
}

/// Parallel soft cancellation: every user sees
/// `y_k = y - Σ_{j≠k} s̄_j g_j` and is filtered with the MMSE filter whose
/// interference covariance uses the prior residual variances.
pub fn soft_pic_estimate<T: Real>(ctx: &DetectorContext<'_, T>) -> Result<Vec<SoftEstimate<T>>> {
    if ctx.priors_uninformed() {
        return mmse_estimate(ctx);
    }
    let link = ctx.link;
    let k = link.users();
    let weights = ctx.prior_weights();
    let means = ctx.prior_means();
    // B = c·I + diag(weights)·R; user k's filter matrix differs from B
    // only in row k, whose weight becomes one.
    let inv = weighted_inverse(link, &weights)?;
    let r = link.gram();
    let mut v: ComplexVector<T> = ctx.matched()?;
    for j in 0..k {
        cancel(ctx, &mut v, means[j], j);
    }
    (0..k)
        .map(|u| {
            let b = column(&inv, u);
            let rho = r.row(u).iter().zip(&b).fold(Complex::new(T::zero(), T::zero()), |acc, (a, c)| acc + a * c);
            let scale = Complex::new(T::one(), T::zero()) + rho * (T::one() - weights[u]);
            let x: ComplexVector<T> = b.iter().map(|c| c / scale).collect();
            let gain = gain_of(link, &x, u)?;
            let mut est = estimate(&x, &v, gain);
            est.estimate += means[u] * gain;
            Ok(est)
        })
        .collect()
}

/// Successive soft cancellation in the link's detection order. The user
/// at each stage has the prior means of the users before it removed, its
/// filter counts their prior residual variances, and users after it are
/// left uncancelled with full weight. Without priors this is exactly the
/// linear MMSE output.
pub fn soft_sic_estimate<T: Real>(ctx: &DetectorContext<'_, T>) -> Result<Vec<SoftEstimate<T>>> {
    if ctx.priors_uninformed() {
        return mmse_estimate(ctx);
    }
    let link = ctx.link;
    let weights = ctx.prior_weights();
    let means = ctx.prior_means();
    let mut inv = uninformed_inverse(link)?.clone();
    let mut v = ctx.matched()?;
    let mut out = vec![SoftEstimate { estimate: Complex::new(T::zero(), T::zero()), gain: T::zero(), noise: T::one() }; link.users()];
    let order = link.order();
    for (p, &u) in order.iter().enumerate() {
        let x = column(&inv, u);
        out[u] = estimate(&x, &v, gain_of(link, &x, u)?);
        if p + 1 < order.len() {
            cancel(ctx, &mut v, means[u], u);
            reweight(link, &mut inv, u, weights[u] - T::one())?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::filter::{mmse_filter, mmse_filter_weighted};
    use super::super::testutil::*;
    use super::super::{DetectionOrder, Link};
    use super::*;
    use crate::modem::{Constellation, SoftSymbol};
    use crate::numerics::axpy;

    fn direct_pic(ctx: &DetectorContext<'_, f64>) -> Vec<Complex<f64>> {
        let k = ctx.link.users();
        (0..k)
            .map(|u| {
                let mut yk = ctx.y.to_vec();
                for j in (0..k).filter(|&j| j != u) {
                    axpy(-ctx.priors[j].mean, &ctx.link.g().column(j), &mut yk);
                }
                dot(&mmse_filter(ctx, u).unwrap(), &yk)
            })
            .collect()
    }

    #[test]
    fn pic_matches_direct_evaluation() {
        for seed in 0..5 {
            let lk = Link::new(random_channel(seed, 6, 2 + seed as usize % 3), 0.4, 1.0, DetectionOrder::Natural).unwrap();
            let k = lk.users();
            let (_, y) = random_use(seed + 100, lk.g(), 0.4);
            let priors = random_priors(seed + 200, k, 3.0);
            let qpsk = Constellation::qpsk();
            let ctx = DetectorContext::new(&lk, &y, &priors, &qpsk).unwrap();
            let fast = soft_pic_estimate(&ctx).unwrap();
            let direct = direct_pic(&ctx);
            for u in 0..k {
                assert!((fast[u].estimate - direct[u]).norm() < 1e-10);
                let w = mmse_filter(&ctx, u).unwrap();
                let (mu, lambda) = super::super::awgn_params(&lk, u, &w).unwrap();
                assert!((fast[u].gain - mu).abs() < 1e-10);
                assert!((fast[u].noise - lambda).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn perfect_priors_recover_symbols() {
        let lk = Link::new(random_channel(3, 6, 3), 1e-12, 1.0, DetectionOrder::Natural).unwrap();
        let qpsk = Constellation::qpsk();
        let (labels, y) = random_use(4, lk.g(), 0.0);
        let priors: Vec<_> = labels.iter().map(|&l| SoftSymbol { mean: qpsk.point(l), variance: 0.0 }).collect();
        let ctx = DetectorContext::new(&lk, &y, &priors, &qpsk).unwrap();
        for (est, &l) in soft_pic_estimate(&ctx).unwrap().iter().zip(&labels) {
            assert!((est.estimate - qpsk.point(l)).norm() < 1e-6);
        }
    }

    #[test]
    fn zero_priors_collapse_to_mmse() {
        for seed in 0..20 {
            let lk = Link::new(random_channel(seed, 8, 4), 0.3, 1.0, DetectionOrder::ColumnNorm).unwrap();
            let (_, y) = random_use(seed + 50, lk.g(), 0.3);
            let qpsk = Constellation::qpsk();
            let priors = vec![SoftSymbol::uninformed(1.0); 4];
            let ctx = DetectorContext::new(&lk, &y, &priors, &qpsk).unwrap();
            let mmse = mmse_estimate(&ctx).unwrap();
            let pic = soft_pic_estimate(&ctx).unwrap();
            let sic = soft_sic_estimate(&ctx).unwrap();
            for u in 0..4 {
                let w = mmse_filter_weighted(lk.g(), &[1.0; 4], 0.3, u).unwrap();
                let direct = dot(&w, &y);
                assert!((mmse[u].estimate - direct).norm() < 1e-10);
                assert!((pic[u].estimate - direct).norm() < 1e-10);
                assert!((sic[u].estimate - direct).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn sic_matches_direct_evaluation() {
        let lk = Link::new(random_channel(12, 8, 4), 0.2, 1.0, DetectionOrder::ColumnNorm).unwrap();
        let (_, y) = random_use(13, lk.g(), 0.2);
        let priors = random_priors(14, 4, 4.0);
        let qpsk = Constellation::qpsk();
        let ctx = DetectorContext::new(&lk, &y, &priors, &qpsk).unwrap();
        let fast = soft_sic_estimate(&ctx).unwrap();
        let order = lk.order().to_vec();
        for (p, &u) in order.iter().enumerate() {
            let mut w = vec![1.0; 4];
            let mut yk = y.clone();
            for &t in &order[..p] {
                w[t] = priors[t].variance;
                axpy(-priors[t].mean, &lk.g().column(t), &mut yk);
            }
            let f = mmse_filter_weighted(lk.g(), &w, 0.2, u).unwrap();
            assert!((fast[u].estimate - dot(&f, &yk)).norm() < 1e-10);
        }
    }

    #[test]
    fn single_user_sic_equals_pic() {
        let lk = Link::new(random_channel(15, 4, 1), 0.5, 1.0, DetectionOrder::Natural).unwrap();
        let (_, y) = random_use(16, lk.g(), 0.5);
        let priors = random_priors(17, 1, 2.0);
        let qpsk = Constellation::qpsk();
        let ctx = DetectorContext::new(&lk, &y, &priors, &qpsk).unwrap();
        let a = soft_sic_estimate(&ctx).unwrap();
        let b = soft_pic_estimate(&ctx).unwrap();
        assert!((a[0].estimate - b[0].estimate).norm() < 1e-12);
    }
}
