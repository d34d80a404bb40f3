//! Synthetic scenes and independent reference computations shared by the
//! integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use stnltv::matrix::Mat;
use stnltv::MultiComponentImage;

/// Smooth two-region cube used for the solver comparisons.
pub fn smooth_image(w: usize, h: usize, r: usize) -> MultiComponentImage {
    MultiComponentImage::from_fn(w, h, r, |row, col, b| {
        let base = if (row + 2 * col) < (w + h) { 60.0 } else { 180.0 };
        base + 20.0 * ((row as f64 * 0.4 + b as f64).sin() + (col as f64 * 0.3).cos())
    })
}

/// Piecewise-smooth multiband scene: a background ramp, a disk, a bar and a
/// diagonal stripe, each with its own spectrum that varies smoothly across
/// bands, plus fine periodic texture inside the disk.
pub fn piecewise_smooth(w: usize, h: usize, r: usize) -> MultiComponentImage {
    let (wf, hf) = (w as f64, h as f64);
    MultiComponentImage::from_fn(w, h, r, |row, col, b| {
        let (y, x) = (row as f64 / hf, col as f64 / wf);
        let t = b as f64 / r.max(2) as f64;
        let mut v = 40.0 + 60.0 * x + 30.0 * t * y;
        let (dy, dx) = (y - 0.38, x - 0.35);
        if dy * dy + dx * dx < 0.05 {
            v = 170.0 - 80.0 * t + 15.0 * ((row as f64 * 1.3).sin() * (col as f64 * 1.1).cos());
        }
        if (0.62..0.82).contains(&y) && (0.15..0.85).contains(&x) {
            v = 90.0 + 100.0 * t * t + 25.0 * x;
        }
        if (x + y - 1.25).abs() < 0.07 {
            v = 220.0 - 40.0 * (t - 0.5).abs();
        }
        v
    })
}

pub fn to_dmatrix(x: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(x.rows(), x.cols(), x.as_slice())
}

pub fn from_dmatrix(x: &DMatrix<f64>) -> Mat {
    Mat::from_vec(x.nrows(), x.ncols(), x.transpose().as_slice().to_vec())
}

/// Minimizer of a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo <= 1e-13 * (1.0 + hi.abs()) {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Level `θ ≥ 0` of the epigraph projection of `(s, ζ)` for a gauge whose
/// sublevel-set distance is `dist2(θ)`: the minimizer of
/// `(θ − ζ)² + dist2(θ)`.
pub fn epigraph_level(zeta: f64, scale: f64, dist2: impl Fn(f64) -> f64) -> f64 {
    let hi = scale + zeta.abs() + 1.0;
    golden(|th| (th - zeta).powi(2) + dist2(th), 0.0, hi)
}

/// `(t, θ)` nearest to `(s, ζ)` with `|t| ≤ θ`.
pub fn oracle_epi_abs(s: f64, zeta: f64) -> (f64, f64) {
    let th = epigraph_level(zeta, s.abs(), |th| (s.abs() - th).max(0.0).powi(2));
    (s.clamp(-th, th), th)
}

pub fn oracle_epi_l2(s: &[f64], zeta: f64) -> (Vec<f64>, f64) {
    let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let th = epigraph_level(zeta, n, |th| (n - th).max(0.0).powi(2));
    let scale = if n > th { th / n } else { 1.0 };
    (s.iter().map(|v| v * scale).collect(), th)
}

pub fn oracle_epi_linf(s: &[f64], zeta: f64) -> (Vec<f64>, f64) {
    let top = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let th = epigraph_level(zeta, top, |th| s.iter().map(|v| (v.abs() - th).max(0.0).powi(2)).sum());
    (s.iter().map(|v| v.clamp(-th, th)).collect(), th)
}

/// Projection onto `{ζ : ⟨τ, ζ⟩ ≤ η}` by bisection on the multiplier.
pub fn oracle_halfspace(zeta: &[f64], tau: &[f64], eta: f64) -> Vec<f64> {
    let at = |l: f64| -> Vec<f64> { zeta.iter().zip(tau).map(|(z, t)| z - l * t).collect() };
    let excess = |l: f64| at(l).iter().zip(tau).map(|(z, t)| z * t).sum::<f64>() - eta;
    if excess(0.0) <= 0.0 {
        return zeta.to_vec();
    }
    let mut hi = 1.0;
    while excess(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Projection onto `{v : Σ τ_i |v_i| ≤ η}` by bisection on the soft-threshold
/// level.
pub fn oracle_l1_ball(v: &[f64], tau: &[f64], eta: f64) -> Vec<f64> {
    let at = |l: f64| -> Vec<f64> {
        v.iter()
            .zip(tau)
            .map(|(a, t)| (a.abs() - l * t).max(0.0).copysign(*a))
            .collect()
    };
    let mass = |l: f64| at(l).iter().zip(tau).map(|(a, t)| a.abs() * t).sum::<f64>();
    if mass(0.0) <= eta {
        return v.to_vec();
    }
    let (mut lo, mut hi) = (0.0, v.iter().zip(tau).map(|(a, t)| a.abs() / t).fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > eta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Thin SVD from nalgebra with singular values in descending order.
pub fn reference_svd(x: &Mat) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = to_dmatrix(x).svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_columns(&order.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>());
    let vt = DMatrix::from_rows(&order.iter().map(|&i| vt.row(i).into_owned()).collect::<Vec<_>>());
    (u, s, vt)
}

fn reassemble(u: &DMatrix<f64>, t: &[f64], vt: &DMatrix<f64>) -> Mat {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(t));
    from_dmatrix(&(u * d * vt))
}

/// Matrix epigraph projections through an independent SVD and one-dimensional
/// searches on the levels.
pub fn oracle_epi_nuclear(x: &Mat, zeta: &[f64]) -> (Mat, Vec<f64>) {
    let (u, s, vt) = reference_svd(x);
    let pairs: Vec<(f64, f64)> = s.iter().zip(zeta).map(|(&sv, &z)| oracle_epi_abs(sv, z)).collect();
    let t: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[b].total_cmp(&t[a]));
    (reassemble(&u, &t, &vt), order.iter().map(|&i| pairs[i].1).collect())
}

pub fn oracle_epi_spectral(x: &Mat, zeta: f64) -> (Mat, f64) {
    let (u, s, vt) = reference_svd(x);
    let (t, th) = oracle_epi_linf(&s, zeta);
    (reassemble(&u, &t, &vt), th)
}

pub fn oracle_epi_frobenius(x: &Mat, zeta: f64) -> (Mat, f64) {
    let (t, th) = oracle_epi_l2(x.as_slice(), zeta);
    (Mat::from_vec(x.rows(), x.cols(), t), th)
}

/// Random orthogonal matrix from the QR factor of a Gaussian-like matrix.
pub fn orthogonal(n: usize, entries: impl FnMut(usize, usize) -> f64) -> Mat {
    let q = DMatrix::from_fn(n, n, entries).qr().q();
    from_dmatrix(&q)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_distance(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}
