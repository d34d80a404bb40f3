//! Closed-form projections onto boxes, half-spaces, vector epigraphs and the
//! weighted ℓ1 ball.

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2};

/// Componentwise clamp onto `[lo, hi]`.
pub fn project_box(x: &mut [f64], lo: f64, hi: f64) {
    debug_assert!(lo < hi);
    for v in x {
        *v = v.clamp(lo, hi);
    }
}

/// Projection onto `{ζ : ⟨τ, ζ⟩ ≤ η}`.
pub fn project_halfspace(zeta: &mut [f64], tau: &[f64], eta: f64) {
    debug_assert_eq!(zeta.len(), tau.len());
    let excess = dot(tau, zeta) - eta;
    if excess <= 0.0 {
        return;
    }
    let step = excess / dot(tau, tau);
    for (z, t) in zeta.iter_mut().zip(tau) {
        *z -= step * t;
    }
}

/// Projection of `(s, ζ)` onto the epigraph of `|·|`.
pub fn project_epi_abs(s: f64, zeta: f64) -> (f64, f64) {
    let a = s.abs();
    if a <= zeta {
        (s, zeta)
    } else if a <= -zeta {
        (0.0, 0.0)
    } else {
        let beta = 0.5 * (1.0 + zeta / a);
        (beta * s, beta * a)
    }
}

/// Projection of `(s, ζ)` onto the epigraph of `‖·‖₂`; `s` is overwritten
/// with `t` and `θ` is returned.
pub fn project_epi_l2(s: &mut [f64], zeta: f64) -> f64 {
    let ns = norm2(s);
    if ns <= zeta {
        return zeta;
    }
    if ns <= -zeta {
        s.fill(0.0);
        return 0.0;
    }
    let beta = 0.5 * (1.0 + zeta / ns);
    for v in s.iter_mut() {
        *v *= beta;
    }
    beta * ns
}

/// Projection of `(s, ζ)` onto the epigraph of `‖·‖∞` for nonnegative `s`
/// (singular values); `s` is overwritten with `t` and `θ` is returned.
///
/// With `ν` the ascending sort of `s` (and sentinels `ν₀ = −∞`,
/// `ν_{M+1} = +∞`), `k̄` is the unique index for which
/// `ν_{k̄−1} < (ζ + Σ_{k≥k̄} ν_k) / (M − k̄ + 2) ≤ ν_{k̄}`; then
/// `θ = max{ζ + Σ_{k≥k̄} ν_k, 0} / (M − k̄ + 2)` and `t_m = min{s_m, θ}`.
pub fn project_epi_linf(s: &mut [f64], zeta: f64) -> Result<f64> {
    if let Some(v) = s.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Contract(format!(
            "epigraph of the max norm expects nonnegative inputs, got {v}"
        )));
    }
    let theta = linf_level(s, zeta);
    for v in s.iter_mut() {
        *v = v.min(theta);
    }
    Ok(theta)
}

fn linf_level(s: &[f64], zeta: f64) -> f64 {
    let m = s.len();
    let mut nu = s.to_vec();
    nu.sort_by(f64::total_cmp);
    // k̄ scanned from M+1 down to 1 (one-based), tail = Σ_{k ≥ k̄} ν_k. Each
    // level is a weighted mean of the previous one and ν_k̄, so the upper
    // bracket ν_k̄ ≥ level holds by construction and only the lower one is
    // tested; this keeps the scan exact under rounding.
    let mut tail = 0.0;
    for kbar in (1..=m + 1).rev() {
        if kbar <= m {
            tail += nu[kbar - 1];
        }
        let denom = (m + 2 - kbar) as f64;
        let level = (zeta + tail) / denom;
        if kbar == 1 || nu[kbar - 2] < level {
            return (zeta + tail).max(0.0) / denom;
        }
    }
    unreachable!()
}

/// Projection onto the epigraph of `‖·‖∞` for arbitrary-sign vectors, by
/// projecting magnitudes and restoring signs.
pub(crate) fn project_epi_linf_signed(s: &mut [f64], zeta: f64) -> f64 {
    let mags: Vec<f64> = s.iter().map(|v| v.abs()).collect();
    let theta = linf_level(&mags, zeta);
    for v in s.iter_mut() {
        *v = v.abs().min(theta).copysign(*v);
    }
    theta
}

/// Euclidean projection onto the weighted ℓ1 ball `{v : Σ τ_i |v_i| ≤ η}`.
///
/// The soft-threshold level `λ` solving `Σ τ_i (|v_i| − λ τ_i)₊ = η` is found
/// by pivoting on the breakpoints `|v_i| / τ_i` (a selection-style search,
/// no full sort); the result is `sign(v_i) (|v_i| − λ τ_i)₊`.
pub fn project_l1_ball(v: &mut [f64], tau: &[f64], eta: f64) {
    debug_assert_eq!(v.len(), tau.len());
    let total: f64 = v.iter().zip(tau).map(|(a, t)| t * a.abs()).sum();
    if total <= eta {
        return;
    }
    let lambda = l1_threshold(v, tau, eta);
    for (a, t) in v.iter_mut().zip(tau) {
        *a = (a.abs() - lambda * t).max(0.0).copysign(*a);
    }
}

fn l1_threshold(v: &[f64], tau: &[f64], eta: f64) -> f64 {
    let breakpoint = |i: usize| v[i].abs() / tau[i];
    let mut candidates: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
    let mut upper = Vec::with_capacity(candidates.len());
    let mut lower = Vec::with_capacity(candidates.len());
    let (mut act_sum, mut act_sq) = (0.0, 0.0);
    while !candidates.is_empty() {
        let pivot = breakpoint(candidates[candidates.len() / 2]);
        upper.clear();
        lower.clear();
        let (mut up_sum, mut up_sq) = (0.0, 0.0);
        for &i in &candidates {
            if breakpoint(i) >= pivot {
                up_sum += tau[i] * v[i].abs();
                up_sq += tau[i] * tau[i];
                upper.push(i);
            } else {
                lower.push(i);
            }
        }
        let mass = (act_sum + up_sum) - pivot * (act_sq + up_sq);
        if mass <= eta {
            // λ ≤ pivot: everything at or above the pivot is active
            act_sum += up_sum;
            act_sq += up_sq;
            std::mem::swap(&mut candidates, &mut lower);
        } else {
            // λ > pivot: the pivot and everything below it vanish
            candidates.clear();
            candidates.extend(upper.iter().copied().filter(|&i| breakpoint(i) > pivot));
        }
    }
    ((act_sum - eta) / act_sq).max(0.0)
}
