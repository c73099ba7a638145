//! Full-reference image quality assessment from low-level wavelet features.
//!
//! The pipeline converts both images to CIELab, decomposes every plane with a
//! seven-level BIOR 1.5 wavelet, normalizes each subband against its local
//! center-surround statistics, rescales subbands by a deviation-driven gain
//! (with a chroma-adaptive variant for colorful images), max-pools, and
//! compares the concatenated features with an L1 distance. Larger scores mean
//! larger perceptual difference.
//!
//! The [`harness`] module evaluates the metric against subjective scores.

pub mod color;
pub mod config;
pub mod error;
pub mod feature;
pub mod harness;
pub mod normalize;
pub mod plane;
pub mod scaling;
pub mod wavelet;

pub use color::{load_image, srgb_to_lab, LabImage, RgbImage};
pub use error::{Error, Result};
pub use feature::{build_feature, l1_distance, max_pool, score_pair, FeatureVector, PreparedImage, QualityScore};
pub use plane::Plane;
pub use scaling::{Branch, NormMode, ScalingParams};
pub use wavelet::{decompose, reconstruct, Channel, Decomposition, FeatureMap, Orientation};

/// Rounds to six significant digits, the precision of every emitted number.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Six-significant-digit text form of `x`.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    if r.is_finite() {
        format!("{r}")
    } else {
        "nan".into()
    }
}
