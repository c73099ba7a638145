//! Deterministic synthetic distortion ladders.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::color::RgbImage;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistortionKind {
    GaussianNoise,
    GaussianBlur,
    JpegLikeBlocking,
    ContrastShift,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 4] = [
        DistortionKind::GaussianNoise,
        DistortionKind::GaussianBlur,
        DistortionKind::JpegLikeBlocking,
        DistortionKind::ContrastShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistortionKind::GaussianNoise => "gaussian_noise",
            DistortionKind::GaussianBlur => "gaussian_blur",
            DistortionKind::JpegLikeBlocking => "jpeg_like_blocking",
            DistortionKind::ContrastShift => "contrast_shift",
        }
    }

    /// Severity of step `i` (1-based) of an `n`-step ladder. Noise sigma runs
    /// geometrically from 2 to 32, blur sigma from 0.5 to 4, the quantizer
    /// scale from 0.25 to 4, and contrast is reduced linearly to a quarter.
    pub fn ladder_severity(self, i: usize, n: usize) -> f64 {
        let t = if n > 1 { (i - 1) as f64 / (n - 1) as f64 } else { 0.0 };
        match self {
            DistortionKind::GaussianNoise => 2.0 * 16f64.powf(t),
            DistortionKind::GaussianBlur => 0.5 * 8f64.powf(t),
            DistortionKind::JpegLikeBlocking => 0.25 * 16f64.powf(t),
            DistortionKind::ContrastShift => 0.75 * i as f64 / n as f64,
        }
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistortionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown distortion kind {s:?}")))
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn channel_planes(img: &RgbImage) -> [Vec<f64>; 3] {
    std::array::from_fn(|c| img.pixels().iter().map(|p| p[c] as f64).collect())
}

fn from_planes(img: &RgbImage, planes: &[Vec<f64>; 3]) -> RgbImage {
    let pixels = (0..img.pixels().len()).map(|i| [to_u8(planes[0][i]), to_u8(planes[1][i]), to_u8(planes[2][i])]).collect();
    RgbImage::new(img.width(), img.height(), pixels).expect("same dimensions as source")
}

fn add_noise(img: &RgbImage, sigma: f64, seed: u64) -> RgbImage {
    if sigma == 0.0 {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = img
        .pixels()
        .iter()
        .map(|p| {
            p.map(|c| {
                let z: f64 = StandardNormal.sample(&mut rng);
                to_u8(c as f64 + sigma * z)
            })
        })
        .collect();
    RgbImage::new(img.width(), img.height(), pixels).expect("same dimensions as source")
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -1 - i;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn blur(img: &RgbImage, sigma: f64) -> RgbImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let (w, h) = (img.width(), img.height());
    let planes = channel_planes(img).map(|p| {
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = kernel.iter().enumerate().map(|(j, k)| k * p[y * w + reflect(x as isize + j as isize - radius, w)]).sum();
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                out[y * w + x] = kernel.iter().enumerate().map(|(j, k)| k * tmp[reflect(y as isize + j as isize - radius, h) * w + x]).sum();
            }
        }
        out
    });
    from_planes(img, &planes)
}

// JPEG Annex K luminance quantization table.
const QUANT: [f64; 64] = [
    16., 11., 10., 16., 24., 40., 51., 61., 12., 12., 14., 19., 26., 58., 60., 55., 14., 13., 16., 24., 40., 57., 69., 56.,
    14., 17., 22., 29., 51., 87., 80., 62., 18., 22., 37., 56., 68., 109., 103., 77., 24., 35., 55., 64., 81., 104., 113.,
    92., 49., 64., 78., 87., 103., 121., 120., 101., 72., 92., 95., 98., 112., 100., 103., 99.,
];

fn dct_basis() -> [[f64; 8]; 8] {
    std::array::from_fn(|u| {
        let a = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
        std::array::from_fn(|x| a * (std::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / 16.0).cos())
    })
}

/// 8x8 block DCT with the JPEG luminance table scaled by `scale`, applied to
/// every channel. Partial blocks at the borders are padded by replication.
fn blocking(img: &RgbImage, scale: f64) -> RgbImage {
    if scale <= 0.0 {
        return img.clone();
    }
    let basis = dct_basis();
    let (w, h) = (img.width(), img.height());
    let planes = channel_planes(img).map(|p| {
        let mut out = p.clone();
        for by in (0..h).step_by(8) {
            for bx in (0..w).step_by(8) {
                let block: [[f64; 8]; 8] =
                    std::array::from_fn(|y| std::array::from_fn(|x| p[(by + y).min(h - 1) * w + (bx + x).min(w - 1)] - 128.0));
                let mut coef = [[0.0; 8]; 8];
                for v in 0..8 {
                    for u in 0..8 {
                        let mut s = 0.0;
                        for y in 0..8 {
                            for x in 0..8 {
                                s += basis[v][y] * basis[u][x] * block[y][x];
                            }
                        }
                        let q = (QUANT[v * 8 + u] * scale).max(1e-9);
                        coef[v][u] = (s / q).round() * q;
                    }
                }
                for y in 0..8.min(h - by) {
                    for x in 0..8.min(w - bx) {
                        let mut s = 0.0;
                        for v in 0..8 {
                            for u in 0..8 {
                                s += basis[v][y] * basis[u][x] * coef[v][u];
                            }
                        }
                        out[(by + y) * w + bx + x] = s + 128.0;
                    }
                }
            }
        }
        out
    });
    from_planes(img, &planes)
}

/// Pulls every channel toward its mean by `amount` in [0, 1].
fn contrast(img: &RgbImage, amount: f64) -> RgbImage {
    let alpha = 1.0 - amount.clamp(0.0, 1.0);
    let planes = channel_planes(img).map(|p| {
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        p.iter().map(|v| mean + alpha * (v - mean)).collect()
    });
    from_planes(img, &planes)
}

/// Applies one distortion at the given severity. Severity 0 is the identity
/// for every kind.
pub fn apply_distortion(img: &RgbImage, kind: DistortionKind, severity: f64, seed: u64) -> RgbImage {
    match kind {
        DistortionKind::GaussianNoise => add_noise(img, severity, seed),
        DistortionKind::GaussianBlur => blur(img, severity),
        DistortionKind::JpegLikeBlocking => blocking(img, severity),
        DistortionKind::ContrastShift => contrast(img, severity),
    }
}

/// A ladder of `levels` increasingly severe versions of `reference`, paired
/// with their severity rank (1 = mildest). Noise levels share one seeded
/// noise field, so each step is a scaled-up copy of the previous one.
pub fn generate_distortions(reference: &RgbImage, kind: DistortionKind, levels: usize, seed: u64) -> Result<Vec<(RgbImage, usize)>> {
    if levels < 2 {
        return Err(Error::InvalidParams(format!("a ladder needs at least 2 levels, got {levels}")));
    }
    Ok((1..=levels)
        .map(|i| (apply_distortion(reference, kind, kind.ladder_severity(i, levels), seed), i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RgbImage {
        RgbImage::from_fn(128, 128, |x, y| {
            [((x * 3 + y) % 256) as u8, ((x ^ y) * 2 % 256) as u8, (128.0 + 100.0 * ((x as f64) * 0.2).sin()) as u8]
        })
        .unwrap()
    }

    fn mse(a: &RgbImage, b: &RgbImage) -> f64 {
        let s: f64 = a
            .pixels()
            .iter()
            .zip(b.pixels())
            .flat_map(|(p, q)| (0..3).map(move |c| (p[c] as f64 - q[c] as f64).powi(2)))
            .sum();
        s / (3 * a.pixels().len()) as f64
    }

    #[test]
    fn zero_severity_is_identity() {
        let img = base();
        for kind in DistortionKind::ALL {
            assert_eq!(apply_distortion(&img, kind, 0.0, 1), img, "{kind}");
        }
    }

    #[test]
    fn ladders_are_seeded() {
        let img = base();
        for kind in DistortionKind::ALL {
            let a = generate_distortions(&img, kind, 3, 7).unwrap();
            let b = generate_distortions(&img, kind, 3, 7).unwrap();
            assert_eq!(a, b);
        }
        let c = generate_distortions(&img, DistortionKind::GaussianNoise, 3, 8).unwrap();
        assert_ne!(c, generate_distortions(&img, DistortionKind::GaussianNoise, 3, 7).unwrap());
    }

    #[test]
    fn mse_rises_along_every_ladder() {
        let img = base();
        for kind in DistortionKind::ALL {
            let ladder = generate_distortions(&img, kind, 5, 3).unwrap();
            let errs: Vec<f64> = ladder.iter().map(|(d, _)| mse(&img, d)).collect();
            for w in errs.windows(2) {
                assert!(w[1] > w[0], "{kind}: {errs:?}");
            }
        }
    }

    #[test]
    fn noise_ladder_sigmas() {
        let s: Vec<f64> = (1..=5).map(|i| DistortionKind::GaussianNoise.ladder_severity(i, 5)).collect();
        for (a, b) in s.iter().zip([2.0, 4.0, 8.0, 16.0, 32.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parsing_and_level_check() {
        assert_eq!("jpeg_like_blocking".parse::<DistortionKind>().unwrap(), DistortionKind::JpegLikeBlocking);
        assert!("salt".parse::<DistortionKind>().is_err());
        assert!(generate_distortions(&base(), DistortionKind::GaussianBlur, 1, 0).is_err());
    }
}
