//! Image datasets: manifest loading, preprocessing, patient-grouped
//! splitting, and a synthetic generator.

mod manifest;
mod preprocess;
mod split;
mod synth;

pub use manifest::{load_dataset, write_manifest, ManifestRow};
pub use preprocess::{preprocess, RawImage};
pub use split::{split, split_patients, SplitAssignment, PINNED_TRAIN_PATIENTS, TEST_FRACTION};
pub use synth::{synth_generate, SynthConfig};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::models::IMAGE_SIZE;

/// A preprocessed `128×128` image in `[0, 1]` with its label and subject.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSample {
    pub pixels: Vec<f64>,
    /// 0 = non-demented, 1 = demented.
    pub label: u8,
    pub patient_id: u32,
}

impl ImageSample {
    pub fn new(pixels: Vec<f64>, label: u8, patient_id: u32) -> Result<Self> {
        if pixels.len() != IMAGE_SIZE * IMAGE_SIZE {
            return Err(Error::Dimension(format!(
                "sample has {} pixels, expected {}",
                pixels.len(),
                IMAGE_SIZE * IMAGE_SIZE
            )));
        }
        if label > 1 {
            return Err(Error::Validation(format!("non-binary label {label}")));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation("pixel outside [0, 1]".into()));
        }
        Ok(Self {
            pixels,
            label,
            patient_id,
        })
    }
}

/// Stacks the selected samples into `[N, 1, 128, 128]`.
pub fn images_tensor(samples: &[ImageSample], indices: &[usize]) -> Result<Tensor> {
    let mut data = Vec::with_capacity(indices.len() * IMAGE_SIZE * IMAGE_SIZE);
    for &i in indices {
        data.extend_from_slice(&samples[i].pixels);
    }
    Tensor::new(vec![indices.len(), 1, IMAGE_SIZE, IMAGE_SIZE], data)
}

pub fn labels(samples: &[ImageSample], indices: &[usize]) -> Vec<u8> {
    indices.iter().map(|&i| samples[i].label).collect()
}
