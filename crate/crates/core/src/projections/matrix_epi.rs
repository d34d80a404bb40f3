use std::fmt;
use std::str::FromStr;

use super::scalar::{project_epi_abs, project_epi_l2, project_epi_linf};
use super::svd::thin_svd;
use crate::error::{ensure_len, Error, Result};
use crate::matrix::Mat;

/// Schatten exponent of the per-pixel matrix norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Schatten {
    /// Nuclear norm.
    One,
    /// Frobenius norm.
    Two,
    /// Spectral norm.
    Inf,
}

impl Schatten {
    /// Singular values (or the Frobenius norm) of `block`, as stored in the
    /// auxiliary variable: `min(rows, cols)` values for `p = 1`, one otherwise.
    pub fn aux_len(self, rows: usize, cols: usize) -> usize {
        match self {
            Schatten::One => rows.min(cols),
            Schatten::Two | Schatten::Inf => 1,
        }
    }
}

impl fmt::Display for Schatten {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schatten::One => "1",
            Schatten::Two => "2",
            Schatten::Inf => "inf",
        })
    }
}

impl FromStr for Schatten {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(Schatten::One),
            "2" => Ok(Schatten::Two),
            "inf" | "infinity" | "∞" => Ok(Schatten::Inf),
            other => Err(Error::Config(format!("unsupported Schatten exponent {other:?} (use 1, 2 or inf)"))),
        }
    }
}

impl serde::Serialize for Schatten {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Accepts `"1"`, `"2"`, `"inf"` or the bare integers 1 and 2.
impl<'de> serde::Deserialize<'de> for Schatten {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = Schatten;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a Schatten exponent: 1, 2 or \"inf\"")
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Schatten, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Schatten, E> {
                v.to_string().parse().map_err(E::custom)
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Schatten, E> {
                v.to_string().parse().map_err(E::custom)
            }
        }
        d.deserialize_any(Visitor)
    }
}

/// Projection of `(X, ζ)` onto the epigraph set of the Schatten norm.
///
/// For `p = 1`, `ζ` carries one entry per singular value (descending order)
/// and each pair `(σ_m, ζ_m)` is projected onto `epi |·|`; for `p = 2` and
/// `p = ∞`, `ζ` is a scalar and the singular-value vector is projected onto
/// `epi ‖·‖₂` or `epi ‖·‖∞`. The result is reassembled as `U diag(t) Vᵀ`.
/// The `p = 2` case works on the flattened matrix without an SVD.
pub fn project_epi_matrix(x: &Mat, zeta: &[f64], norm: Schatten) -> Result<(Mat, Vec<f64>)> {
    let mut out = x.clone();
    let mut z = zeta.to_vec();
    let (r, c) = (x.rows(), x.cols());
    project_epi_block(out.as_mut_slice(), r, c, &mut z, norm)?;
    Ok((out, z))
}

/// In-place form of [`project_epi_matrix`] on a row-major block.
pub(crate) fn project_epi_block(
    block: &mut [f64],
    rows: usize,
    cols: usize,
    zeta: &mut [f64],
    norm: Schatten,
) -> Result<()> {
    ensure_len("auxiliary variable", zeta.len(), norm.aux_len(rows, cols))?;
    if norm == Schatten::Two {
        zeta[0] = project_epi_l2(block, zeta[0]);
        return Ok(());
    }
    let k = rows.min(cols);
    if k == 0 {
        if norm == Schatten::Inf {
            zeta[0] = zeta[0].max(0.0);
        }
        return Ok(());
    }
    let svd = thin_svd(&Mat::from_vec(rows, cols, block.to_vec()))?;
    let mut t = svd.s.clone();
    match norm {
        Schatten::One => {
            let mut theta = vec![0.0; k];
            for ((tm, zm), th) in t.iter_mut().zip(zeta.iter()).zip(theta.iter_mut()) {
                (*tm, *th) = project_epi_abs(*tm, *zm);
            }
            // ζ_m labels the m-th largest singular value of the output, so
            // relabel after shrinkage may have reordered the t_m
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| t[b].total_cmp(&t[a]));
            for (zm, &i) in zeta.iter_mut().zip(&order) {
                *zm = theta[i];
            }
        }
        Schatten::Inf => zeta[0] = project_epi_linf(&mut t, zeta[0])?,
        Schatten::Two => unreachable!(),
    }
    svd.reassemble_into(&t, block);
    Ok(())
}
