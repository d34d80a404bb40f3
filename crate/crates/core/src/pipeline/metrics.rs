use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{ensure_len, Error, Result};
use crate::image::MultiComponentImage;
use crate::matrix::{distance, norm2};

/// `10 log10(‖x̄‖² / ‖x̂ − x̄‖²)` in dB; `+∞` when `x̂ = x̄`.
pub fn snr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    ensure_len("estimate", estimate.len(), reference.len())?;
    let signal = norm2(reference);
    if signal == 0.0 {
        return Err(Error::Contract("SNR of a zero reference is undefined".into()));
    }
    let err = distance(estimate, reference);
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (signal / err).log10())
}

/// Restoration quality and cost of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// SNR over the whole cube, dB.
    pub snr: f64,
    /// Mean of the per-component SNRs, dB.
    pub msnr: f64,
    pub band_snr: Vec<f64>,
    pub seconds: f64,
    pub iterations: usize,
}

impl MetricsReport {
    pub fn new(estimate: &MultiComponentImage, reference: &MultiComponentImage, seconds: f64, iterations: usize) -> Result<Self> {
        if estimate.dims() != reference.dims() {
            return Err(Error::Dimension(format!(
                "estimate is {:?}, reference is {:?}",
                estimate.dims(),
                reference.dims()
            )));
        }
        let band_snr = (0..reference.components())
            .map(|r| snr(estimate.band(r), reference.band(r)))
            .collect::<Result<Vec<_>>>()?;
        let msnr = band_snr.iter().sum::<f64>() / band_snr.len() as f64;
        Ok(Self {
            snr: snr(estimate.data(), reference.data())?,
            msnr,
            band_snr,
            seconds,
            iterations,
        })
    }

    /// `component,snr_db` rows for each band, then `all` (SNR) and `mean`
    /// (M-SNR). Timing is left out so the file is reproducible.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,snr_db\n");
        for (r, v) in self.band_snr.iter().enumerate() {
            writeln!(out, "{r},{v}").unwrap();
        }
        writeln!(out, "all,{}", self.snr).unwrap();
        writeln!(out, "mean,{}", self.msnr).unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_examples() {
        assert_eq!(snr(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), f64::INFINITY);
        assert!(snr(&[0.0, 0.0], &[3.0, 4.0]).unwrap().abs() < 1e-12);
        let v = snr(&[3.0, 3.0], &[3.0, 4.0]).unwrap();
        assert!((v - 10.0 * 25f64.log10()).abs() < 1e-12);
        assert!((v - 13.979400086720377).abs() < 1e-12);
        assert!(snr(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn msnr_is_mean_of_band_column() {
        let x = MultiComponentImage::from_fn(4, 4, 3, |r, c, b| (r + c + 3 * b + 1) as f64);
        let y = MultiComponentImage::from_fn(4, 4, 3, |r, c, b| (r + c + 3 * b + 1) as f64 + 0.1 * (b + 1) as f64);
        let rep = MetricsReport::new(&y, &x, 0.0, 1).unwrap();
        let csv = rep.to_csv();
        let rows: Vec<(String, f64)> = csv
            .lines()
            .skip(1)
            .map(|l| {
                let (k, v) = l.split_once(',').unwrap();
                (k.to_string(), v.parse().unwrap())
            })
            .collect();
        let bands: Vec<f64> = rows.iter().filter(|(k, _)| k.parse::<usize>().is_ok()).map(|r| r.1).collect();
        let mean = rows.iter().find(|(k, _)| k == "mean").unwrap().1;
        assert_eq!(bands.len(), 3);
        assert!((mean - bands.iter().sum::<f64>() / 3.0).abs() < 1e-12);
    }
}
