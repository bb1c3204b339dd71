use crate::autodiff::Tensor;
use crate::data::ImageSample;
use crate::error::{Error, Result};
use crate::models::{FrozenFeatures, IMAGE_SIZE};

/// Labelled rows of a fixed shape (images or cached feature vectors) with
/// the subject each row came from. May be empty.
#[derive(Clone, Debug, PartialEq)]
pub struct Examples {
    row_shape: Vec<usize>,
    data: Vec<f64>,
    labels: Vec<u8>,
    patients: Vec<u32>,
}

impl Examples {
    pub fn new(row_shape: Vec<usize>, data: Vec<f64>, labels: Vec<u8>, patients: Vec<u32>) -> Result<Self> {
        let row: usize = row_shape.iter().product();
        if row == 0 || data.len() != row * labels.len() || patients.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} values, {} labels and {} patient ids for rows of shape {row_shape:?}",
                data.len(),
                labels.len(),
                patients.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Validation(format!("non-binary label {l}")));
        }
        Ok(Self {
            row_shape,
            data,
            labels,
            patients,
        })
    }

    pub fn from_images(samples: &[ImageSample]) -> Result<Self> {
        Self::new(
            vec![1, IMAGE_SIZE, IMAGE_SIZE],
            samples.iter().flat_map(|s| s.pixels.iter().copied()).collect(),
            samples.iter().map(|s| s.label).collect(),
            samples.iter().map(|s| s.patient_id).collect(),
        )
    }

    /// Runs image rows through the frozen extractor once.
    pub fn to_features(&self, frozen: &FrozenFeatures) -> Result<Self> {
        if self.is_empty() {
            return Self::new(vec![frozen.output_dim()], Vec::new(), Vec::new(), Vec::new());
        }
        let f = frozen.extract(&self.tensor_all()?)?;
        Self::new(
            vec![frozen.output_dim()],
            f.into_data(),
            self.labels.clone(),
            self.patients.clone(),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row_shape(&self) -> &[usize] {
        &self.row_shape
    }

    pub fn row_len(&self) -> usize {
        self.row_shape.iter().product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let r = self.row_len();
        &self.data[i * r..(i + 1) * r]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn patient_ids(&self) -> &[u32] {
        &self.patients
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            row_shape: self.row_shape.clone(),
            data: indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            patients: indices.iter().map(|&i| self.patients[i]).collect(),
        }
    }

    /// Rows `indices` stacked into `[len, row_shape...]`.
    pub fn tensor(&self, indices: &[usize]) -> Result<Tensor> {
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(&self.row_shape);
        Tensor::new(
            shape,
            indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
        )
    }

    pub fn tensor_all(&self) -> Result<Tensor> {
        let mut shape = vec![self.len()];
        shape.extend_from_slice(&self.row_shape);
        Tensor::new(shape, self.data.clone())
    }
}
