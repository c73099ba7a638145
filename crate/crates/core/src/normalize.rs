//! Two-tier feature distribution normalization.
//!
//! Tier 1 works patch by patch inside one feature map: the 5x5 center of each
//! 13x13 patch is mean-subtracted, divided by the ratio of center to surround
//! standard deviation, and has its mean restored. Tier 2 subtracts the grand
//! mean of all detail maps of a channel from each of them.

use crate::error::{Error, Result};
use crate::plane::{self, Plane};
use crate::wavelet::FeatureMap;

/// Patch layout used by tier 1, in feature-map coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchGeometry {
    pub patch_size: usize,
    pub center_size: usize,
    pub overlap: usize,
}

impl Default for PatchGeometry {
    fn default() -> Self {
        Self { patch_size: 13, center_size: 5, overlap: 4 }
    }
}

impl PatchGeometry {
    pub fn stride(&self) -> usize {
        self.patch_size - self.overlap
    }

    /// Offset of the center block from the patch origin on each axis.
    pub fn center_offset(&self) -> usize {
        (self.patch_size - self.center_size) / 2
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.center_size >= 1
            && self.patch_size >= self.center_size
            && (self.patch_size - self.center_size).is_multiple_of(2)
            && self.overlap < self.patch_size;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid patch geometry {self:?}")))
        }
    }
}

/// Divisive normalization factor from the center and surround deviations.
/// A zero surround deviation falls back to the center deviation alone.
pub fn normalization_factor(sigma_center: f64, sigma_surround: f64) -> f64 {
    if sigma_surround != 0.0 {
        sigma_center / sigma_surround
    } else {
        sigma_center
    }
}

#[derive(Clone, Copy)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

fn gather(p: &Plane, r: Rect, out: &mut Vec<f64>) {
    out.clear();
    for y in r.y0..r.y1 {
        out.extend_from_slice(&p.row(y)[r.x0..r.x1]);
    }
}

/// Rewrites `center` of `out` as `(c - mean) / r + mean`, where mean and the
/// center deviation come from `src`. Degenerate factors leave it untouched.
fn normalize_block(src: &Plane, out: &mut Plane, center: Rect, sigma_surround: Option<f64>, buf: &mut Vec<f64>) {
    gather(src, center, buf);
    let mean = plane::mean(buf);
    let sigma_center = plane::std_dev(buf);
    let r = match sigma_surround {
        Some(s) => normalization_factor(sigma_center, s),
        None => sigma_center,
    };
    if r.is_nan() || r <= 0.0 || !r.is_finite() {
        return;
    }
    for y in center.y0..center.y1 {
        for x in center.x0..center.x1 {
            out.set(x, y, (src.get(x, y) - mean) / r + mean);
        }
    }
}

/// Center-surround divisive normalization of one map.
///
/// Patches start at the top-left corner with stride `patch_size - overlap`
/// and are clipped at the right and bottom edges. Samples that fall in no
/// center keep their values. Maps narrower or shorter than one patch are one
/// patch whose center is the whole map, which gives a unit factor.
pub fn tier1_normalize(map: &FeatureMap, geom: &PatchGeometry) -> FeatureMap {
    let src = &map.coeffs;
    let (w, h) = (src.width(), src.height());
    let mut out = src.clone();
    if w >= geom.patch_size && h >= geom.patch_size {
        let off = geom.center_offset();
        let stride = geom.stride().max(1);
        let (mut cbuf, mut sbuf) = (Vec::new(), Vec::new());
        for y0 in (0..h).step_by(stride) {
            if y0 + off >= h {
                break;
            }
            for x0 in (0..w).step_by(stride) {
                if x0 + off >= w {
                    break;
                }
                let surround = Rect { x0, y0, x1: (x0 + geom.patch_size).min(w), y1: (y0 + geom.patch_size).min(h) };
                let center = Rect {
                    x0: x0 + off,
                    y0: y0 + off,
                    x1: (x0 + off + geom.center_size).min(w),
                    y1: (y0 + off + geom.center_size).min(h),
                };
                gather(src, surround, &mut sbuf);
                let sigma_surround = plane::std_dev(&sbuf);
                normalize_block(src, &mut out, center, Some(sigma_surround), &mut cbuf);
            }
        }
    }
    FeatureMap { coeffs: out, ..map.clone() }
}

/// Single-window variant: the map is tiled by non-overlapping `k`x`k`
/// windows (clipped at the edges) and each window is normalized by its own
/// deviation, with no surround term.
pub fn single_window_normalize(map: &FeatureMap, k: usize) -> Result<FeatureMap> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!("window size must be odd, got {k}")));
    }
    let src = &map.coeffs;
    let (w, h) = (src.width(), src.height());
    let mut out = src.clone();
    let mut buf = Vec::new();
    for y0 in (0..h).step_by(k) {
        for x0 in (0..w).step_by(k) {
            let win = Rect { x0, y0, x1: (x0 + k).min(w), y1: (y0 + k).min(h) };
            normalize_block(src, &mut out, win, None, &mut buf);
        }
    }
    Ok(FeatureMap { coeffs: out, ..map.clone() })
}

/// Subtracts the grand mean of every detail map in `maps` from each of them.
/// The approximation map is left bit-identical. Returns the mean removed.
pub fn tier2_normalize(maps: &mut [FeatureMap]) -> f64 {
    let (sum, count) = maps
        .iter()
        .filter(|m| m.is_detail())
        .fold((0.0, 0usize), |(s, n), m| (s + m.coeffs.data().iter().sum::<f64>(), n + m.coeffs.len()));
    if count == 0 {
        return 0.0;
    }
    let grand_mean = sum / count as f64;
    for m in maps.iter_mut().filter(|m| m.is_detail()) {
        for v in m.coeffs.data_mut() {
            *v -= grand_mean;
        }
    }
    grand_mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{Channel, Orientation};
    use proptest::prelude::*;

    fn fmap(coeffs: Plane, o: Orientation) -> FeatureMap {
        FeatureMap { level: 4, orientation: o, channel: Channel::L, coeffs }
    }

    fn textured(w: usize, h: usize, seed: u64) -> Plane {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Plane::from_fn(w, h, |x, y| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * (1.0 + x as f64 / 10.0) + (y as f64 * 0.3).sin()
        })
    }

    #[test]
    fn constant_map_is_fixed_point() {
        let m = fmap(Plane::filled(40, 31, 2.5), Orientation::H);
        assert_eq!(tier1_normalize(&m, &PatchGeometry::default()), m);
        assert_eq!(single_window_normalize(&m, 3).unwrap(), m);
    }

    #[test]
    fn zero_surround_uses_center_deviation() {
        assert_eq!(normalization_factor(2.0, 0.0), 2.0);
        assert_eq!(normalization_factor(2.0, 4.0), 0.5);
        assert_eq!(normalization_factor(0.0, 0.0), 0.0);
    }

    #[test]
    fn matched_statistics_give_unit_factor() {
        // Center: twelve +1, twelve -1 and one 0 (mean 0, variance 24/25).
        // Ring: half +a, half -a with a^2 = 24/25, so the whole patch has the
        // same mean and variance as the center.
        let a = (24.0f64 / 25.0).sqrt();
        let mut center_i = 0;
        let mut ring_i = 0;
        let p = Plane::from_fn(13, 13, |x, y| {
            if (4..9).contains(&x) && (4..9).contains(&y) {
                center_i += 1;
                match center_i {
                    13 => 0.0,
                    i if i % 2 == 0 => 1.0,
                    _ => -1.0,
                }
            } else {
                ring_i += 1;
                if ring_i % 2 == 0 { a } else { -a }
            }
        });
        let m = fmap(p, Orientation::V);
        let out = tier1_normalize(&m, &PatchGeometry::default());
        assert!(out.coeffs.max_abs_diff(&m.coeffs) < 1e-12);
    }

    #[test]
    fn center_rescaled_to_surround_deviation() {
        let p = textured(13, 13, 3);
        let m = fmap(p.clone(), Orientation::V);
        let out = tier1_normalize(&m, &PatchGeometry::default());
        let sigma_s = p.std_dev();
        let center: Vec<f64> = (4..9).flat_map(|y| (4..9).map(move |x| (x, y))).map(|(x, y)| p.get(x, y)).collect();
        let (mc, sc) = (plane::mean(&center), plane::std_dev(&center));
        for y in 0..13 {
            for x in 0..13 {
                let expect = if (4..9).contains(&x) && (4..9).contains(&y) {
                    (p.get(x, y) - mc) * sigma_s / sc + mc
                } else {
                    p.get(x, y)
                };
                assert!((out.coeffs.get(x, y) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_maps_pass_through() {
        let m = fmap(textured(12, 40, 9), Orientation::D);
        assert_eq!(tier1_normalize(&m, &PatchGeometry::default()), m);
    }

    #[test]
    fn untouched_outside_centers() {
        let m = fmap(textured(31, 29, 5), Orientation::H);
        let out = tier1_normalize(&m, &PatchGeometry::default());
        let in_center = |v: usize| v % 9 >= 4;
        for y in 0..29 {
            for x in 0..31 {
                if !(in_center(x) && in_center(y)) {
                    assert_eq!(out.coeffs.get(x, y), m.coeffs.get(x, y));
                }
            }
        }
        assert_ne!(out, m);
    }

    #[test]
    fn single_window_hand_value() {
        // Values 0..8 in one 3x3 window: mean 4, population sigma sqrt(60/9).
        let p = Plane::from_fn(3, 3, |x, y| (y * 3 + x) as f64);
        let out = single_window_normalize(&fmap(p, Orientation::H), 3).unwrap();
        let sigma = 2.581_988_897_471_611;
        assert!((out.coeffs.get(0, 0) - 2.450_806_661_517_033).abs() < 1e-12);
        for i in 0..9 {
            let c = i as f64;
            assert!((out.coeffs.data()[i] - ((c - 4.0) / sigma + 4.0)).abs() < 1e-12);
        }
        assert!(single_window_normalize(&fmap(Plane::zeros(3, 3), Orientation::H), 4).is_err());
    }

    #[test]
    fn tier2_constants() {
        let mut maps = vec![
            fmap(Plane::filled(4, 4, 7.0), Orientation::A),
            fmap(Plane::filled(5, 5, 2.0), Orientation::H),
            fmap(Plane::filled(5, 5, 4.0), Orientation::V),
        ];
        let approx_before = maps[0].clone();
        let mean = tier2_normalize(&mut maps);
        assert_eq!(mean, 3.0);
        assert!(maps[1].coeffs.data().iter().all(|&v| v == -1.0));
        assert!(maps[2].coeffs.data().iter().all(|&v| v == 1.0));
        assert_eq!(maps[0], approx_before);

        let before = maps.clone();
        assert_eq!(tier2_normalize(&mut maps), 0.0);
        assert_eq!(maps, before);
    }

    proptest! {
        #[test]
        fn tier1_preserves_center_means(seed in 0u64..1000, w in 13usize..40, h in 13usize..40) {
            let m = fmap(textured(w, h, seed), Orientation::H);
            let out = tier1_normalize(&m, &PatchGeometry::default());
            for y0 in (0..h).step_by(9).filter(|y| y + 4 < h) {
                for x0 in (0..w).step_by(9).filter(|x| x + 4 < w) {
                    let cells: Vec<(usize, usize)> = (y0 + 4..(y0 + 9).min(h))
                        .flat_map(|y| (x0 + 4..(x0 + 9).min(w)).map(move |x| (x, y)))
                        .collect();
                    let a: f64 = cells.iter().map(|&(x, y)| m.coeffs.get(x, y)).sum::<f64>();
                    let b: f64 = cells.iter().map(|&(x, y)| out.coeffs.get(x, y)).sum::<f64>();
                    prop_assert!((a - b).abs() / cells.len() as f64 <= 1e-9 * (1.0 + a.abs()));
                }
            }
        }

        #[test]
        fn tier1_scale_covariant(seed in 0u64..1000, alpha in 0.01f64..100.0) {
            let m = fmap(textured(30, 27, seed), Orientation::D);
            let scaled = fmap(m.coeffs.map(|v| v * alpha), Orientation::D);
            let a = tier1_normalize(&m, &PatchGeometry::default());
            let b = tier1_normalize(&scaled, &PatchGeometry::default());
            for (x, y) in a.coeffs.data().iter().zip(b.coeffs.data()) {
                prop_assert!((x * alpha - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn tier2_zero_grand_mean(seed in 0u64..1000) {
            let mut maps = vec![
                fmap(textured(9, 7, seed), Orientation::A),
                fmap(textured(20, 11, seed + 1).map(|v| v + 3.0), Orientation::H),
                fmap(textured(6, 6, seed + 2).map(|v| v * 5.0 - 1.0), Orientation::D),
            ];
            tier2_normalize(&mut maps);
            let all: Vec<f64> = maps[1..].iter().flat_map(|m| m.coeffs.data().to_vec()).collect();
            let range = all.iter().cloned().fold(f64::MIN, f64::max) - all.iter().cloned().fold(f64::MAX, f64::min);
            prop_assert!(plane::mean(&all).abs() <= 1e-9 * range);
        }
    }
}
