//! Hard-decision feedback detectors: conventional SIC, multiple-feedback
//! SIC and PIC, and exhaustive ML.

use num_complex::Complex;

use super::filter::{effective_noise, hard_stage_filters, StageFilter};
use super::soft::soft_pic_estimate;
use super::{Detection, DetectorContext, MfConfig, SoftEstimate};
use crate::error::contract;
use crate::numerics::{dot, norm_sq, ComplexVector};
use crate::{Real, Result};

/// Largest hypothesis count the exhaustive detector accepts.
pub const ML_MAX_HYPOTHESES: usize = 1 << 20;

/// `v += a · R[:, j]`
fn add_column<T: Real>(ctx: &DetectorContext<'_, T>, v: &mut [Complex<T>], a: Complex<T>, j: usize) {
    let r = ctx.link.gram();
    for (i, vi) in v.iter_mut().enumerate() {
        *vi += r[(i, j)] * a;
    }
}

/// `‖y - G s‖²`
fn residual<T: Real>(ctx: &DetectorContext<'_, T>, s: &[Complex<T>]) -> Result<T> {
    let gs = ctx.link.g().mul_vec(s)?;
    Ok(ctx.y.iter().zip(&gs).map(|(a, b)| (a - b).norm_sqr()).sum())
}

/// Matched-filter output with every user's prior mean removed,
/// `Gᴴ(y - Σ_j s̄_j g_j)`.
fn mean_cancelled<T: Real>(ctx: &DetectorContext<'_, T>) -> Result<ComplexVector<T>> {
    let mut acc = ctx.matched()?;
    for (j, p) in ctx.priors.iter().enumerate() {
        add_column(ctx, &mut acc, -p.mean, j);
    }
    Ok(acc)
}

fn stage_estimate<T: Real>(stage: &StageFilter<T>, v: &[Complex<T>]) -> SoftEstimate<T> {
    SoftEstimate { estimate: dot(&stage.coeffs, v), gain: stage.gain, noise: effective_noise(stage.gain) }
}

fn empty_estimates<T: Real>(k: usize) -> Vec<SoftEstimate<T>> {
    vec![SoftEstimate { estimate: Complex::new(T::zero(), T::zero()), gain: T::zero(), noise: T::one() }; k]
}

/// Conventional SIC with hard-decision feedback in the link's detection
/// order. Users not yet detected are cancelled with their prior means.
pub fn hard_sic_detect<T: Real>(ctx: &DetectorContext<'_, T>) -> Result<Detection<T>> {
    let stages = hard_stage_filters(ctx)?;
    let k = ctx.link.users();
    let mut acc = mean_cancelled(ctx)?;
    let mut soft = empty_estimates(k);
    let mut hard = vec![0; k];
    for (p, &u) in ctx.link.order().iter().enumerate() {
        add_column(ctx, &mut acc, ctx.priors[u].mean, u);
        soft[u] = stage_estimate(&stages[p], &acc);
        hard[u] = ctx.constellation.nearest(soft[u].estimate);
        add_column(ctx, &mut acc, -ctx.constellation.point(hard[u]), u);
    }
    Ok(Detection { soft, hard })
}

/// Multiple-feedback SIC.
///
/// Each stage filters the received vector with the decided users removed.
/// If the output lies within `d_th` of a constellation point it is sliced
/// as in conventional SIC. Otherwise each of the `M` nearest points is
/// tried as the decision: the remaining users are detected by conventional
/// SIC on top of it, reusing the stage filters, and the candidate whose
/// completed symbol vector leaves the smallest residual `‖y - Gφ‖²` is
/// kept (earliest candidate on ties).
pub fn mf_sic_detect<T: Real>(ctx: &DetectorContext<'_, T>, mf: &MfConfig) -> Result<Detection<T>> {
    let constellation = ctx.constellation;
    mf.validate(constellation.order())?;
    let stages = hard_stage_filters(ctx)?;
    let threshold = T::lit(mf.threshold);
    let order = ctx.link.order();
    let k = ctx.link.users();
    let mut acc = mean_cancelled(ctx)?;
    let mut soft = empty_estimates(k);
    let mut decided: ComplexVector<T> = ctx.priors.iter().map(|p| p.mean).collect();
    let mut hard = vec![0; k];
    let mut phi = decided.clone();
    for (p, &u) in order.iter().enumerate() {
        add_column(ctx, &mut acc, ctx.priors[u].mean, u);
        soft[u] = stage_estimate(&stages[p], &acc);
        let est = soft[u].estimate;
        let nearest = constellation.nearest(est);
        let reliable = (est - constellation.point(nearest)).norm() <= threshold;
        hard[u] = if reliable {
            nearest
        } else {
            let mut best = (T::infinity(), nearest);
            for label in constellation.nearest_n(est, mf.candidates) {
                phi.copy_from_slice(&decided);
                let c = constellation.point(label);
                phi[u] = c;
                let mut branch = acc.clone();
                add_column(ctx, &mut branch, -c, u);
                for (q, &v) in order.iter().enumerate().skip(p + 1) {
                    add_column(ctx, &mut branch, ctx.priors[v].mean, v);
                    let choice = constellation.point(constellation.nearest(dot(&stages[q].coeffs, &branch)));
                    phi[v] = choice;
                    add_column(ctx, &mut branch, -choice, v);
                }
                let r = residual(ctx, &phi)?;
                if r < best.0 {
                    best = (r, label);
                }
            }
            best.1
        };
        decided[u] = constellation.point(hard[u]);
        add_column(ctx, &mut acc, -decided[u], u);
    }
    Ok(Detection { soft, hard })
}

/// Multiple-feedback PIC: soft-PIC estimates, then for every estimate
/// outside the `d_th` radius the `M` nearest points are tried with all
/// other users held at their sliced estimates, keeping the candidate of
/// smallest residual. Soft outputs are those of soft PIC.
pub fn mf_pic_detect<T: Real>(ctx: &DetectorContext<'_, T>, mf: &MfConfig) -> Result<Detection<T>> {
    let constellation = ctx.constellation;
    mf.validate(constellation.order())?;
    let soft = soft_pic_estimate(ctx)?;
    let threshold = T::lit(mf.threshold);
    let sliced: Vec<usize> = soft.iter().map(|s| constellation.nearest(s.estimate)).collect();
    let base: ComplexVector<T> = sliced.iter().map(|&l| constellation.point(l)).collect();
    let mut hard = sliced.clone();
    let mut phi = base.clone();
    for (u, s) in soft.iter().enumerate() {
        if (s.estimate - base[u]).norm() <= threshold {
            continue;
        }
        let mut best = (T::infinity(), sliced[u]);
        for label in constellation.nearest_n(s.estimate, mf.candidates) {
            phi[u] = constellation.point(label);
            let r = residual(ctx, &phi)?;
            if r < best.0 {
                best = (r, label);
            }
        }
        phi[u] = base[u];
        hard[u] = best.1;
    }
    Ok(Detection { soft, hard })
}

/// Exhaustive maximum-likelihood detection, `argmin_s ‖y - G s‖²` over all
/// constellation vectors (first in lexicographic label order on ties).
pub fn ml_detect<T: Real>(ctx: &DetectorContext<'_, T>) -> Result<Vec<usize>> {
    let k = ctx.link.users();
    let q = ctx.constellation.order();
    let total = (0..k).try_fold(1usize, |acc, _| acc.checked_mul(q).filter(|&n| n <= ML_MAX_HYPOTHESES));
    let Some(total) = total else {
        return Err(contract(format!("exhaustive search over {q}^{k} hypotheses is too large")));
    };
    let g = ctx.link.g();
    let columns: Vec<Vec<ComplexVector<T>>> = (0..k)
        .map(|j| {
            let col = g.column(j);
            ctx.constellation.points().iter().map(|&s| col.iter().map(|&c| c * s).collect()).collect()
        })
        .collect();
    let mut labels = vec![0usize; k];
    let mut best = (T::infinity(), labels.clone());
    let mut r: ComplexVector<T> = ctx.y.to_vec();
    for _ in 0..total {
        r.copy_from_slice(ctx.y);
        for (j, &l) in labels.iter().enumerate() {
            for (ri, ci) in r.iter_mut().zip(&columns[j][l]) {
                *ri -= ci;
            }
        }
        let d = norm_sq(&r);
        if d < best.0 {
            best = (d, labels.clone());
        }
        // Odometer increment, last user fastest.
        for j in (0..k).rev() {
            labels[j] += 1;
            if labels[j] < q {
                break;
            }
            labels[j] = 0;
        }
    }
    Ok(best.1)
}
