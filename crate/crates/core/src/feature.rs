//! Pooling, concatenation and the L1 perceptual distance.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::color::{srgb_to_lab, LabImage, RgbImage};
use crate::error::{Error, Result};
use crate::normalize::{single_window_normalize, tier1_normalize, tier2_normalize, PatchGeometry};
use crate::plane::Plane;
use crate::scaling::{
    branch_for, compute_gains, decide_branch, Branch, ChannelStats, ColorRatio, NormMode, ScalingParams, ScalingReport,
};
use crate::wavelet::{decompose, Channel, Decomposition, Orientation};

/// Pooling tile size.
pub const POOL_SIZE: usize = 3;

/// Version written into feature dumps; bump when the layout order changes.
pub const FEATURE_FORMAT_VERSION: u16 = 1;

/// Non-overlapping `k`x`k` max pooling from the top-left corner; edge tiles
/// are clipped to the map.
pub fn max_pool(map: &Plane, k: usize) -> Plane {
    assert!(k >= 1, "pool size must be positive");
    let (w, h) = (map.width(), map.height());
    let (ow, oh) = (w.div_ceil(k), h.div_ceil(k));
    Plane::from_fn(ow, oh, |tx, ty| {
        let mut best = f64::NEG_INFINITY;
        for y in ty * k..((ty + 1) * k).min(h) {
            for &v in &map.row(y)[tx * k..((tx + 1) * k).min(w)] {
                best = best.max(v);
            }
        }
        best
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub channel: Channel,
    pub level: u8,
    pub orientation: Orientation,
    pub height: usize,
    pub width: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Concatenated pooled maps of one image with their layout manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Vec<Segment>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values of each segment in layout order.
    pub fn segments(&self) -> impl Iterator<Item = (&Segment, &[f64])> {
        let mut offset = 0;
        self.layout.iter().map(move |s| {
            let vals = &self.values[offset..offset + s.len()];
            offset += s.len();
            (s, vals)
        })
    }

    /// Feature dump: `CIIQF`, version u16, segment count u16, then for each
    /// segment (channel u8, level u8, orientation u8, height u16, width u16)
    /// followed by its row-major f32 values. Little-endian throughout.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(b"CIIQF")?;
        w.write_all(&FEATURE_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.layout.len() as u16).to_le_bytes())?;
        for (s, vals) in self.segments() {
            w.write_all(&[s.channel.code(), s.level, s.orientation.code()])?;
            w.write_all(&(s.height as u16).to_le_bytes())?;
            w.write_all(&(s.width as u16).to_le_bytes())?;
            for &v in vals {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let bad = |m: &str| Error::MalformedDump(m.into());
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic).map_err(|_| bad("short header"))?;
        if &magic != b"CIIQF" {
            return Err(bad("bad CIIQF magic"));
        }
        let mut u16buf = [0u8; 2];
        r.read_exact(&mut u16buf).map_err(|_| bad("short header"))?;
        let version = u16::from_le_bytes(u16buf);
        if version != FEATURE_FORMAT_VERSION {
            return Err(Error::MalformedDump(format!("unsupported version {version}")));
        }
        r.read_exact(&mut u16buf).map_err(|_| bad("short header"))?;
        let count = u16::from_le_bytes(u16buf) as usize;
        let mut layout = Vec::with_capacity(count);
        let mut values = Vec::new();
        for _ in 0..count {
            let mut head = [0u8; 7];
            r.read_exact(&mut head).map_err(|_| bad("truncated segment header"))?;
            let channel = Channel::from_code(head[0]).ok_or_else(|| bad("bad channel code"))?;
            let orientation = Orientation::from_code(head[2]).ok_or_else(|| bad("bad orientation code"))?;
            let height = u16::from_le_bytes([head[3], head[4]]) as usize;
            let width = u16::from_le_bytes([head[5], head[6]]) as usize;
            let mut raw = vec![0u8; 4 * width * height];
            r.read_exact(&mut raw).map_err(|_| bad("truncated segment values"))?;
            values.extend(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64));
            layout.push(Segment { channel, level: head[1], orientation, height, width });
        }
        Ok(Self { values, layout })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// `sum |a_i - b_i|` over two vectors with identical layouts.
pub fn l1_distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    if a.layout != b.layout || a.values.len() != b.values.len() {
        return Err(Error::LayoutMismatch);
    }
    Ok(a.values.iter().zip(&b.values).fold(0.0, |e, (x, y)| e + (x - y).abs()))
}

/// Decomposes each Lab plane and applies both normalization tiers.
pub fn normalized_decompositions(lab: &LabImage, p: &ScalingParams) -> Result<[Decomposition; 3]> {
    let geom = PatchGeometry::default();
    let one = |plane: &Plane, channel| -> Result<Decomposition> {
        let mut d = decompose(plane, channel)?;
        for m in d.maps.iter_mut().filter(|m| m.is_detail()) {
            *m = match p.mode {
                NormMode::CenterSurround => tier1_normalize(m, &geom),
                NormMode::SingleWindow(k) => single_window_normalize(m, k)?,
            };
        }
        tier2_normalize(&mut d.maps);
        Ok(d)
    };
    Ok([one(&lab.l, Channel::L)?, one(&lab.a, Channel::A)?, one(&lab.b, Channel::B)?])
}

/// Pools every map and concatenates them in decomposition order: channel
/// L, a, b; level ascending; orientation A, H, V, D.
pub fn assemble(decomps: &[Decomposition; 3], include_approximation: bool) -> FeatureVector {
    let mut values = Vec::new();
    let mut layout = Vec::new();
    for d in decomps {
        for m in &d.maps {
            if !include_approximation && !m.is_detail() {
                continue;
            }
            let pooled = max_pool(&m.coeffs, POOL_SIZE);
            layout.push(Segment {
                channel: m.channel,
                level: m.level,
                orientation: m.orientation,
                height: pooled.height(),
                width: pooled.width(),
            });
            values.extend_from_slice(pooled.data());
        }
    }
    FeatureVector { values, layout }
}

/// An image taken through decomposition, normalization and pooling, with the
/// statistics the gains depend on.
///
/// Max pooling commutes exactly with multiplication by a positive gain (float
/// rounding is monotone), so pooling before scaling yields the same bits as
/// scaling before pooling. This lets one prepared image be scored under many
/// (K1, K2) settings.
#[derive(Clone, Debug)]
pub struct PreparedImage {
    pooled: FeatureVector,
    pub stats: ChannelStats,
    pub cr: ColorRatio,
}

impl PreparedImage {
    pub fn new(lab: &LabImage, p: &ScalingParams) -> Result<Self> {
        p.validate()?;
        let decomps = normalized_decompositions(lab, p)?;
        let stats = ChannelStats::gather(&decomps);
        let (cr, _) = decide_branch(&stats, p);
        Ok(Self { pooled: assemble(&decomps, true), stats, cr })
    }

    pub fn own_branch(&self, p: &ScalingParams) -> Branch {
        branch_for(self.cr.value, p)
    }

    pub fn report(&self, p: &ScalingParams, branch: Branch) -> ScalingReport {
        ScalingReport { cr: self.cr, branch, gains: compute_gains(&self.stats, p, branch) }
    }

    /// Gain per pooled segment, `None` for excluded segments.
    fn segment_gains(&self, p: &ScalingParams, branch: Branch) -> Vec<Option<f64>> {
        let gains = compute_gains(&self.stats, p, branch);
        let mut it = gains.iter();
        self.pooled
            .layout
            .iter()
            .map(|s| {
                if s.orientation == Orientation::A {
                    p.include_approximation.then_some(1.0)
                } else {
                    Some(it.next().expect("one gain per detail segment").delta)
                }
            })
            .collect()
    }

    pub fn feature(&self, p: &ScalingParams, branch: Branch) -> FeatureVector {
        let gains = self.segment_gains(p, branch);
        let mut values = Vec::with_capacity(self.pooled.len());
        let mut layout = Vec::with_capacity(self.pooled.layout.len());
        for ((seg, vals), g) in self.pooled.segments().zip(gains) {
            if let Some(g) = g {
                layout.push(*seg);
                values.extend(vals.iter().map(|v| v * g));
            }
        }
        FeatureVector { values, layout }
    }

    /// L1 distance to `other` without materializing either feature vector.
    /// Both images are scaled under `branch`.
    pub fn distance(&self, other: &PreparedImage, p: &ScalingParams, branch: Branch) -> Result<f64> {
        if self.pooled.layout != other.pooled.layout {
            return Err(Error::LayoutMismatch);
        }
        let (ga, gb) = (self.segment_gains(p, branch), other.segment_gains(p, branch));
        let mut e = 0.0;
        for (((_, a), (_, b)), (ga, gb)) in self.pooled.segments().zip(other.pooled.segments()).zip(ga.into_iter().zip(gb)) {
            if let (Some(ga), Some(gb)) = (ga, gb) {
                for (x, y) in a.iter().zip(b) {
                    e += (x * ga - y * gb).abs();
                }
            }
        }
        Ok(e)
    }
}

/// Full feature extraction. With `branch = None` the scaling branch is decided
/// from this image's own color ratio.
pub fn build_feature(lab: &LabImage, p: &ScalingParams, branch: Option<Branch>) -> Result<(FeatureVector, ScalingReport)> {
    let prep = PreparedImage::new(lab, p)?;
    let branch = branch.unwrap_or_else(|| prep.own_branch(p));
    Ok((prep.feature(p, branch), prep.report(p, branch)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QualityScore {
    /// L1 distance between the feature vectors; larger is worse.
    pub e: f64,
    pub branch: Branch,
    /// Color ratio of the reference image.
    pub cr: f64,
    pub params: ScalingParams,
}

/// Scores `dist` against `reference`. The scaling branch is decided from the
/// reference and imposed on the distorted image, so the score is not
/// symmetric in its arguments.
pub fn score_pair(reference: &RgbImage, dist: &RgbImage, p: &ScalingParams) -> Result<QualityScore> {
    if !reference.same_dims(dist) {
        return Err(Error::DimensionMismatch(format!(
            "reference is {}x{}, distorted is {}x{}",
            reference.width(),
            reference.height(),
            dist.width(),
            dist.height()
        )));
    }
    score_lab_pair(&srgb_to_lab(reference), &srgb_to_lab(dist), p)
}

pub fn score_lab_pair(reference: &LabImage, dist: &LabImage, p: &ScalingParams) -> Result<QualityScore> {
    let r = PreparedImage::new(reference, p)?;
    let d = PreparedImage::new(dist, p)?;
    score_prepared(&r, &d, p)
}

pub fn score_prepared(reference: &PreparedImage, dist: &PreparedImage, p: &ScalingParams) -> Result<QualityScore> {
    let branch = reference.own_branch(p);
    let e = reference.distance(dist, p, branch)?;
    Ok(QualityScore { e, branch, cr: reference.cr.value, params: *p })
}
