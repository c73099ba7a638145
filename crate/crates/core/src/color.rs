//! 8-bit sRGB input images and their CIELab (D65, 2° observer) planes.

use std::path::Path;

use image::{DynamicImage, ImageReader};

use crate::error::{Error, Result};
use crate::plane::Plane;

/// Smallest accepted width or height. Seven dyadic levels need at least 128
/// samples per axis to leave a non-empty coarsest band.
pub const MIN_DIMENSION: usize = 128;

/// An 8-bit sRGB image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        if width < MIN_DIMENSION || height < MIN_DIMENSION {
            return Err(Error::ImageTooSmall { width, height, min: MIN_DIMENSION });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn same_dims(&self, other: &RgbImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn to_image(&self) -> image::RgbImage {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer matches dimensions")
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::UnsupportedFormat { path: path.into(), reason: other.to_string() },
            })
    }
}

/// CIELab planes aligned with the source image.
#[derive(Clone, Debug, PartialEq)]
pub struct LabImage {
    pub l: Plane,
    pub a: Plane,
    pub b: Plane,
}

impl LabImage {
    pub fn width(&self) -> usize {
        self.l.width()
    }

    pub fn height(&self) -> usize {
        self.l.height()
    }

    pub fn planes(&self) -> [&Plane; 3] {
        [&self.l, &self.a, &self.b]
    }
}

/// Decodes a PNG or BMP file into an 8-bit sRGB image.
///
/// Gray images are replicated to three channels and alpha is dropped.
/// Sources with more than 8 bits per channel are rejected.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(image::ImageFormat::Png) | Some(image::ImageFormat::Bmp) => {}
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: format!("expected PNG or BMP, found {other:?}"),
            })
        }
    }
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => {
            Error::NotFound(path.into())
        }
        other => Error::UnsupportedFormat { path: path.into(), reason: other.to_string() },
    })?;
    let rgb = match decoded {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => decoded.to_rgb8(),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: format!("only 8-bit channels are accepted, found {:?}", other.color()),
            })
        }
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb.pixels().map(|p| p.0).collect();
    RgbImage::new(w, h, pixels)
}

// sRGB primaries to XYZ, D65.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

// White is the image of RGB (1,1,1) so that neutral grays land exactly on a = b = 0.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

fn srgb_to_linear(v: u8) -> f64 {
    let c = v as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    let v = if c <= 0.0031308 { c * 12.92 } else { 1.055 * c.powf(1.0 / 2.4) - 0.055 };
    v * 255.0
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let t = f * f * f;
    if t > EPSILON {
        t
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

/// Converts a single sRGB pixel to (L, a, b).
pub fn pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz: [f64; 3] = std::array::from_fn(|i| {
        RGB_TO_XYZ[i][0] * lin[0] + RGB_TO_XYZ[i][1] * lin[1] + RGB_TO_XYZ[i][2] * lin[2]
    });
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Inverse of [`pixel_to_lab`], rounded and clamped to 8 bits.
pub fn lab_to_pixel(lab: [f64; 3]) -> [u8; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [lab_f_inv(fx) * WHITE[0], lab_f_inv(fy) * WHITE[1], lab_f_inv(fz) * WHITE[2]];
    std::array::from_fn(|i| {
        let lin = XYZ_TO_RGB[i][0] * xyz[0] + XYZ_TO_RGB[i][1] * xyz[1] + XYZ_TO_RGB[i][2] * xyz[2];
        linear_to_srgb(lin).round() as u8
    })
}

/// Per-pixel conversion of the whole image into L, a and b planes.
pub fn srgb_to_lab(img: &RgbImage) -> LabImage {
    let n = img.pixels.len();
    let (mut l, mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &p in &img.pixels {
        let [pl, pa, pb] = pixel_to_lab(p);
        l.push(pl);
        a.push(pa);
        b.push(pb);
    }
    let (w, h) = (img.width, img.height);
    LabImage { l: Plane::new(w, h, l), a: Plane::new(w, h, a), b: Plane::new(w, h, b) }
}
