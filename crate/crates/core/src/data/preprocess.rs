use crate::error::{Error, Result};
use crate::models::IMAGE_SIZE;

/// Decoded image with 8-bit-range samples (0..=255), interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    /// 1 (gray) or 3 (RGB).
    pub channels: usize,
    pub data: Vec<f64>,
}

impl RawImage {
    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Self {
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    fn luminance(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.clone(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
                .collect(),
        }
    }
}

/// Grayscale, bilinear resize to `128×128` (half-pixel centres), scale by
/// `1/255`.
pub fn preprocess(raw: &RawImage) -> Result<Vec<f64>> {
    if raw.width == 0 || raw.height == 0 {
        return Err(Error::Validation("image has a zero dimension".into()));
    }
    if raw.channels != 1 && raw.channels != 3 {
        return Err(Error::Validation(format!("unsupported channel count {}", raw.channels)));
    }
    if raw.data.len() != raw.width * raw.height * raw.channels {
        return Err(Error::Dimension(format!(
            "{}×{}×{} image with {} samples",
            raw.width,
            raw.height,
            raw.channels,
            raw.data.len()
        )));
    }
    let gray = raw.luminance();
    let resized = resize_bilinear(&gray, raw.width, raw.height, IMAGE_SIZE, IMAGE_SIZE);
    Ok(resized.into_iter().map(|v| (v / 255.0).clamp(0.0, 1.0)).collect())
}

/// Source coordinate and blend weight for each output index.
fn taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let x = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = x.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, x - lo as f64)
        })
        .collect()
}

fn resize_bilinear(img: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let xs = taps(w, out_w);
    let ys = taps(h, out_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = img[y0 * w + x0] * (1.0 - fx) + img[y0 * w + x1] * fx;
            let bottom = img[y1 * w + x0] * (1.0 - fx) + img[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}
