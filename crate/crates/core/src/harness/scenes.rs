//! Procedural test scenes with natural-image statistics.
//!
//! Each scene sums bilinearly interpolated Gaussian lattices at octave
//! spacings 1..256 with amplitude proportional to the spacing, which gives
//! the roughly 1/f amplitude spectrum of photographs, then overlays a few
//! hard-edged discs. Chroma comes from independent fields scaled by
//! `saturation`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::color::RgbImage;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// 0 gives a neutral gray scene; around 1 is vividly colored.
    pub saturation: f64,
}

fn octave_field(rng: &mut ChaCha8Rng, w: usize, h: usize, roughness: f64) -> Vec<f64> {
    let mut field = vec![0.0; w * h];
    let mut spacing = 1usize;
    while spacing <= 256 {
        let gw = w / spacing + 2;
        let gh = h / spacing + 2;
        let grid: Vec<f64> = (0..gw * gh).map(|_| StandardNormal.sample(rng)).collect();
        let amp = (spacing as f64).powf(roughness);
        for y in 0..h {
            let fy = y as f64 / spacing as f64;
            let (y0, ty) = (fy.floor() as usize, fy.fract());
            for x in 0..w {
                let fx = x as f64 / spacing as f64;
                let (x0, tx) = (fx.floor() as usize, fx.fract());
                let g = |i: usize, j: usize| grid[j * gw + i];
                let top = g(x0, y0) * (1.0 - tx) + g(x0 + 1, y0) * tx;
                let bottom = g(x0, y0 + 1) * (1.0 - tx) + g(x0 + 1, y0 + 1) * tx;
                field[y * w + x] += amp * (top * (1.0 - ty) + bottom * ty);
            }
        }
        spacing *= 2;
    }
    field
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
    v.iter_mut().for_each(|x| *x = (*x - m) / s);
}

pub fn synthetic_scene(spec: SceneSpec) -> RgbImage {
    let SceneSpec { seed, width: w, height: h, saturation } = spec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roughness = 0.9 + 0.3 * rng.random::<f64>();
    let mut lum = octave_field(&mut rng, w, h, roughness);
    let mut c1 = octave_field(&mut rng, w, h, roughness + 0.2);
    let mut c2 = octave_field(&mut rng, w, h, roughness + 0.2);
    standardize(&mut lum);
    standardize(&mut c1);
    standardize(&mut c2);

    let discs = 3 + (rng.random::<u32>() % 5) as usize;
    for _ in 0..discs {
        let cx = rng.random::<f64>() * w as f64;
        let cy = rng.random::<f64>() * h as f64;
        let r = (0.05 + 0.2 * rng.random::<f64>()) * w.min(h) as f64;
        let dl = rng.random::<f64>() * 2.0 - 1.0;
        let (d1, d2) = (rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy < r * r {
                    let i = y * w + x;
                    lum[i] = 0.6 * lum[i] + dl;
                    c1[i] = 0.6 * c1[i] + d1;
                    c2[i] = 0.6 * c2[i] + d2;
                }
            }
        }
    }

    let base = 90.0 + 70.0 * rng.random::<f64>();
    let contrast = 30.0 + 20.0 * rng.random::<f64>();
    let chroma = 40.0 * saturation;
    RgbImage::from_fn(w, h, |x, y| {
        let i = y * w + x;
        let l = base + contrast * lum[i];
        let (u, v) = (chroma * c1[i], chroma * c2[i]);
        let to_u8 = |v: f64| v.round().clamp(0.0, 255.0) as u8;
        [to_u8(l + 1.2 * v), to_u8(l - 0.35 * u - 0.6 * v), to_u8(l + 1.8 * u)]
    })
    .expect("scene dimensions are at least the minimum")
}

/// `count` varied scenes of `size`x`size`; saturation alternates across a
/// muted-to-vivid range.
pub fn scene_suite(count: usize, size: usize, seed: u64) -> Vec<RgbImage> {
    (0..count)
        .map(|i| {
            synthetic_scene(SceneSpec {
                seed: seed.wrapping_add(i as u64 * 7919),
                width: size,
                height: size,
                saturation: [0.0, 0.15, 0.4, 0.8, 1.2][i % 5],
            })
        })
        .collect()
}
