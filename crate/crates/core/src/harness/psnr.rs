use crate::color::RgbImage;
use crate::error::{Error, Result};

/// Value reported for identical images.
pub const PSNR_IDENTICAL_DB: f64 = 99.0;

fn luma(p: [u8; 3]) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

/// Peak signal-to-noise ratio of the BT.601 luma, in dB.
pub fn psnr_baseline(reference: &RgbImage, dist: &RgbImage) -> Result<f64> {
    if !reference.same_dims(dist) {
        return Err(Error::DimensionMismatch(format!(
            "reference is {}x{}, distorted is {}x{}",
            reference.width(),
            reference.height(),
            dist.width(),
            dist.height()
        )));
    }
    let n = reference.pixels().len() as f64;
    let mse = reference.pixels().iter().zip(dist.pixels()).map(|(&a, &b)| (luma(a) - luma(b)).powi(2)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(PSNR_IDENTICAL_DB);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}
