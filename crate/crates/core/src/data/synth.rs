use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{write_manifest, write_pgm, ManifestRow};
use super::ImageSample;
use crate::error::{Error, Result};
use crate::models::IMAGE_SIZE;

const BACKGROUND: f64 = 0.35;
const FIELD_WAVES: usize = 3;
const FIELD_AMPLITUDE: f64 = 0.03;
const PATIENT_BRIGHTNESS: f64 = 0.03;
const NOISE_SIGMA: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_patients: u32,
    pub images_per_patient: u32,
    pub seed: u64,
    /// Intensity added inside the central ellipse for class 1.
    pub signal_strength: f64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients < 4 {
            return Err(Error::Config(format!(
                "need at least 4 patients, got {}",
                self.n_patients
            )));
        }
        if self.images_per_patient == 0 {
            return Err(Error::Config("images_per_patient must be positive".into()));
        }
        if !self.signal_strength.is_finite() || self.signal_strength < 0.0 {
            return Err(Error::Config(format!(
                "invalid signal strength {}",
                self.signal_strength
            )));
        }
        Ok(())
    }
}

/// Patient 1 is class 0, patient 2 class 1, and the rest alternate the same
/// way by parity.
pub fn patient_label(patient_id: u32) -> u8 {
    u8::from(patient_id.is_multiple_of(2))
}

/// Ellipse placement shared by every image of one subject.
struct Anatomy {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    brightness: f64,
}

fn stream(seed: u64, patient: u32, image: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((patient as u64) << 32) | image as u64);
    rng
}

fn render(anatomy: &Anatomy, label: u8, signal: f64, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let waves: Vec<(f64, f64, f64)> = (0..FIELD_WAVES)
        .map(|_| {
            (
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("positive sigma");
    let n = IMAGE_SIZE as f64;
    let mut out = Vec::with_capacity(IMAGE_SIZE * IMAGE_SIZE);
    for y in 0..IMAGE_SIZE {
        for x in 0..IMAGE_SIZE {
            let (u, v) = (x as f64 / n, y as f64 / n);
            let mut value = BACKGROUND + anatomy.brightness;
            for &(fx, fy, phase) in &waves {
                value += FIELD_AMPLITUDE * (2.0 * PI * (fx * u + fy * v) + phase).cos();
            }
            let dx = (x as f64 - anatomy.cx) / anatomy.rx;
            let dy = (y as f64 - anatomy.cy) / anatomy.ry;
            if label == 1 && dx * dx + dy * dy <= 1.0 {
                value += signal;
            }
            value += noise.sample(rng);
            out.push((value.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

fn generate(cfg: &SynthConfig) -> Vec<(ManifestRow, Vec<u8>)> {
    (1..=cfg.n_patients)
        .into_par_iter()
        .flat_map_iter(|pid| {
            let mut prng = stream(cfg.seed, pid, u32::MAX);
            let c = IMAGE_SIZE as f64 / 2.0;
            let anatomy = Anatomy {
                cx: c + prng.gen_range(-6.0..6.0),
                cy: c + prng.gen_range(-6.0..6.0),
                rx: 28.0 + prng.gen_range(-4.0..4.0),
                ry: 20.0 + prng.gen_range(-3.0..3.0),
                brightness: prng.gen_range(-PATIENT_BRIGHTNESS..PATIENT_BRIGHTNESS),
            };
            let label = patient_label(pid);
            (0..cfg.images_per_patient)
                .map(|k| {
                    let pixels = render(&anatomy, label, cfg.signal_strength, &mut stream(cfg.seed, pid, k));
                    let row = ManifestRow {
                        path: format!("img_p{pid:03}_{k:03}.pgm"),
                        patient_id: pid,
                        label,
                    };
                    (row, pixels)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Generates a labelled image set. With `out_dir` the images are written as
/// PGM files next to a `manifest.csv` that lists them.
pub fn synth_generate(cfg: &SynthConfig, out_dir: Option<&Path>) -> Result<Vec<ImageSample>> {
    cfg.validate()?;
    let items = generate(cfg);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        items
            .par_iter()
            .try_for_each(|(row, px)| write_pgm(&dir.join(&row.path), IMAGE_SIZE, IMAGE_SIZE, px))?;
        let rows: Vec<ManifestRow> = items.iter().map(|(r, _)| r.clone()).collect();
        write_manifest(&dir.join("manifest.csv"), &rows)?;
    }
    items
        .into_iter()
        .map(|(row, px)| {
            ImageSample::new(
                px.into_iter().map(|p| p as f64 / 255.0).collect(),
                row.label,
                row.patient_id,
            )
        })
        .collect()
}
