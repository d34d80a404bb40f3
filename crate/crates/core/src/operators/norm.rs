use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LinearOperator;
use crate::matrix::norm2;

/// Inflation applied to power-iteration estimates before they enter a step
/// size bound.
pub const NORM_SAFETY_FACTOR: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    /// `√λ_max(opᵀ op)` as estimated by power iteration.
    pub estimate: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NormEstimate {
    /// The estimate inflated by [`NORM_SAFETY_FACTOR`].
    pub fn bound(&self) -> f64 {
        self.estimate * NORM_SAFETY_FACTOR
    }
}

/// Spectral norm of `op` by power iteration on `opᵀ op`, started from a
/// seeded random vector. Stops when the eigenvalue estimate changes by at
/// most `tol` relative; otherwise returns the last estimate flagged as not
/// converged.
pub fn operator_norm(op: &dyn LinearOperator, tol: f64, max_iter: usize, seed: u64) -> NormEstimate {
    let n = op.input_len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut nv = norm2(&v);
    if n == 0 || nv == 0.0 {
        return NormEstimate {
            estimate: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    v.iter_mut().for_each(|a| *a /= nv);
    let mut fwd = vec![0.0; op.output_len()];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0f64;
    for it in 1..=max_iter {
        op.apply_into(&v, &mut fwd);
        op.adjoint_into(&fwd, &mut w);
        nv = norm2(&w);
        if nv == 0.0 {
            return NormEstimate {
                estimate: 0.0,
                iterations: it,
                converged: true,
            };
        }
        let next = nv;
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b / nv;
        }
        if (next - lambda).abs() <= tol * next {
            return NormEstimate {
                estimate: next.sqrt(),
                iterations: it,
                converged: true,
            };
        }
        lambda = next;
    }
    log::warn!("power iteration did not reach tolerance {tol:e} in {max_iter} iterations");
    NormEstimate {
        estimate: lambda.sqrt(),
        iterations: max_iter,
        converged: false,
    }
}
