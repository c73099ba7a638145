//! Per-subband frequency scaling and the chroma-ratio color adaptation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane;
use crate::wavelet::{Channel, Decomposition, Orientation, LEVELS};

/// How tier 1 normalization is performed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    CenterSurround,
    SingleWindow(usize),
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormMode::CenterSurround => f.write_str("cs"),
            NormMode::SingleWindow(k) => write!(f, "win{k}"),
        }
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cs" | "center_surround" => Ok(NormMode::CenterSurround),
            "win3" => Ok(NormMode::SingleWindow(3)),
            "win5" => Ok(NormMode::SingleWindow(5)),
            "win7" => Ok(NormMode::SingleWindow(7)),
            other => Err(Error::InvalidParams(format!("unknown mode {other:?} (expected cs, win3, win5, win7)"))),
        }
    }
}

impl Serialize for NormMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NormMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Tunables of the scoring pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub k1: f64,
    pub k2: f64,
    pub cr_threshold: f64,
    pub sigma_floor: f64,
    pub mode: NormMode,
    /// Pool and concatenate the approximation maps into the feature vector.
    pub include_approximation: bool,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            k1: 31.0,
            k2: 3.0,
            cr_threshold: 0.25,
            sigma_floor: 1e-6,
            mode: NormMode::CenterSurround,
            include_approximation: true,
        }
    }
}

impl ScalingParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return bad("k1 must be finite and >= 0");
        }
        if !(self.k2 >= 0.0 && self.k2.is_finite()) {
            return bad("k2 must be finite and >= 0");
        }
        if self.cr_threshold.is_nan() || self.cr_threshold <= 0.0 {
            return bad("cr_threshold must be > 0");
        }
        if self.sigma_floor.is_nan() || self.sigma_floor <= 0.0 {
            return bad("sigma_floor must be > 0");
        }
        if let NormMode::SingleWindow(k) = self.mode {
            if k == 0 || k.is_multiple_of(2) {
                return bad("single-window size must be odd");
            }
        }
        Ok(())
    }
}

/// Which scaling formula applies to an image pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Standard,
    Colorful,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Standard => "standard",
            Branch::Colorful => "colorful",
        })
    }
}

/// Deviation of one normalized detail map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapSigma {
    pub channel: Channel,
    pub level: u8,
    pub orientation: Orientation,
    pub sigma: f64,
}

/// Standard deviations gathered from the normalized decompositions of an image.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStats {
    pub per_map: Vec<MapSigma>,
    /// Indexed by level - 1; each pools that level's three detail orientations.
    pub sigma_l: [f64; LEVELS],
    pub sigma_a: [f64; LEVELS],
    pub sigma_b: [f64; LEVELS],
}

impl ChannelStats {
    /// `decomps` must be the L, a and b decompositions, in that order.
    pub fn gather(decomps: &[Decomposition; 3]) -> Self {
        let mut per_map = Vec::new();
        let mut pooled = [[0.0; LEVELS]; 3];
        for (ci, d) in decomps.iter().enumerate() {
            for m in d.details() {
                per_map.push(MapSigma {
                    channel: d.channel,
                    level: m.level,
                    orientation: m.orientation,
                    sigma: m.coeffs.std_dev(),
                });
            }
            for level in 1..=LEVELS as u8 {
                let values: Vec<f64> = d.level_details(level).flat_map(|m| m.coeffs.data().iter().copied()).collect();
                pooled[ci][level as usize - 1] = plane::std_dev(&values);
            }
        }
        Self { per_map, sigma_l: pooled[0], sigma_a: pooled[1], sigma_b: pooled[2] }
    }

    /// Product of the chroma deviations at `level`.
    pub fn sigma_chroma(&self, level: u8) -> f64 {
        let i = level as usize - 1;
        self.sigma_a[i] * self.sigma_b[i]
    }

    pub fn map_sigma(&self, channel: Channel, level: u8, orientation: Orientation) -> Option<f64> {
        self.per_map
            .iter()
            .find(|m| m.channel == channel && m.level == level && m.orientation == orientation)
            .map(|m| m.sigma)
    }
}

/// Color ratio of an image. `degenerate` is set when some luminance level had
/// a deviation below the floor and the floor was used in its place.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColorRatio {
    pub value: f64,
    pub degenerate: bool,
}

/// Sum over the first `levels` levels of `(sigma_a + sigma_b) / sigma_L`.
pub fn compute_color_ratio(stats: &ChannelStats, levels: usize, sigma_floor: f64) -> ColorRatio {
    let mut degenerate = false;
    let value = (0..levels.min(LEVELS))
        .map(|i| {
            let mut sl = stats.sigma_l[i];
            if sl < sigma_floor {
                degenerate = true;
                sl = sigma_floor;
            }
            (stats.sigma_a[i] + stats.sigma_b[i]) / sl
        })
        .sum();
    ColorRatio { value, degenerate }
}

pub fn branch_for(cr: f64, p: &ScalingParams) -> Branch {
    if cr >= p.cr_threshold {
        Branch::Colorful
    } else {
        Branch::Standard
    }
}

/// `K2 / sigma + K1`, with sigma floored.
pub fn scale_factor(sigma: f64, p: &ScalingParams) -> f64 {
    p.k2 / sigma.max(p.sigma_floor) + p.k1
}

/// `K2 / sigma_L + K2 / sigma_ab + K1`, both deviations floored.
pub fn color_adapted_scale_factor(sigma_l: f64, sigma_ab: f64, p: &ScalingParams) -> f64 {
    p.k2 / sigma_l.max(p.sigma_floor) + p.k2 / sigma_ab.max(p.sigma_floor) + p.k1
}

/// Gain applied to one detail map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapGain {
    pub channel: Channel,
    pub level: u8,
    pub orientation: Orientation,
    pub sigma: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub cr: ColorRatio,
    pub branch: Branch,
    pub gains: Vec<MapGain>,
}

impl ScalingReport {
    /// Diagnostic CSV with one row per detail map.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("channel,s,o,sigma,delta,cr,branch\n");
        for g in &self.gains {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                g.channel.name(),
                g.level,
                g.orientation.name(),
                crate::fmt_sig(g.sigma),
                crate::fmt_sig(g.delta),
                crate::fmt_sig(self.cr.value),
                self.branch
            ));
        }
        out
    }
}

/// Decides the branch from an image's own statistics.
pub fn decide_branch(stats: &ChannelStats, p: &ScalingParams) -> (ColorRatio, Branch) {
    let cr = compute_color_ratio(stats, LEVELS, p.sigma_floor);
    (cr, branch_for(cr.value, p))
}

/// Gains for every detail map in `stats.per_map` order. In the standard
/// branch each map uses its own deviation; in the colorful branch all maps of
/// a level, in all channels, share the color-adapted gain.
pub fn compute_gains(stats: &ChannelStats, p: &ScalingParams, branch: Branch) -> Vec<MapGain> {
    stats
        .per_map
        .iter()
        .map(|m| {
            let delta = match branch {
                Branch::Standard => scale_factor(m.sigma, p),
                Branch::Colorful => {
                    color_adapted_scale_factor(stats.sigma_l[m.level as usize - 1], stats.sigma_chroma(m.level), p)
                }
            };
            MapGain { channel: m.channel, level: m.level, orientation: m.orientation, sigma: m.sigma, delta }
        })
        .collect()
}

/// Multiplies each detail map by its gain; approximation maps are untouched.
/// When `forced` is `None` the branch is decided from these decompositions.
pub fn apply_scaling(decomps: &mut [Decomposition; 3], p: &ScalingParams, forced: Option<Branch>) -> ScalingReport {
    let stats = ChannelStats::gather(decomps);
    let (cr, own) = decide_branch(&stats, p);
    let branch = forced.unwrap_or(own);
    let gains = compute_gains(&stats, p, branch);
    let mut it = gains.iter();
    for d in decomps.iter_mut() {
        for m in d.details_mut() {
            let g = it.next().expect("one gain per detail map");
            debug_assert!(g.channel == m.channel && g.level == m.level && g.orientation == m.orientation);
            for v in m.coeffs.data_mut() {
                *v *= g.delta;
            }
        }
    }
    ScalingReport { cr, branch, gains }
}
