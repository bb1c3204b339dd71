use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::preprocess::{preprocess, RawImage};
use super::ImageSample;
use crate::error::{Error, Result};

/// One line of `manifest.csv`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub patient_id: u32,
    pub label: u8,
}

fn decode(bytes: &[u8]) -> std::result::Result<RawImage, String> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm).map_err(|e| e.to_string())?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let (channels, data) = match img {
        DynamicImage::ImageLuma8(g) => (1, g.into_raw()),
        other if other.color().has_color() => (3, other.to_rgb8().into_raw()),
        other => (1, other.to_luma8().into_raw()),
    };
    Ok(RawImage {
        width,
        height,
        channels,
        data: data.into_iter().map(f64::from).collect(),
    })
}

/// Reads `path,patient_id,label` rows and loads every image, in manifest
/// order. Relative image paths resolve against the manifest's directory.
pub fn load_dataset(manifest_path: &Path) -> Result<Vec<ImageSample>> {
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader =
        csv::Reader::from_path(manifest_path).map_err(|e| Error::Load(format!("{}: {e}", manifest_path.display())))?;
    let rows = reader
        .deserialize::<ManifestRow>()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Load(format!("manifest row {}: {e}", i + 1))))
        .collect::<Result<Vec<_>>>()?;

    rows.par_iter()
        .enumerate()
        .map(|(i, row)| {
            let at = |msg: String| Error::Load(format!("manifest row {} ({}): {msg}", i + 1, row.path));
            if row.label > 1 {
                return Err(at(format!("non-binary label {}", row.label)));
            }
            let path: PathBuf = base.join(&row.path);
            let bytes = std::fs::read(&path).map_err(|e| at(e.to_string()))?;
            let raw = decode(&bytes).map_err(at)?;
            let pixels = preprocess(&raw).map_err(|e| at(e.to_string()))?;
            ImageSample::new(pixels, row.label, row.patient_id).map_err(|e| at(e.to_string()))
        })
        .collect()
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    if rows.is_empty() {
        w.write_record(["path", "patient_id", "label"])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Binary (P5) 8-bit graymap.
pub(crate) fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    PnmEncoder::new(out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(pixels, width as u32, height as u32, ExtendedColorType::L8)
        .map_err(|e| Error::Io(std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::IMAGE_SIZE;

    #[test]
    fn empty_manifest_gives_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("manifest.csv");
        write_manifest(&m, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&m).unwrap(), "path,patient_id,label\n");
        assert!(load_dataset(&m).unwrap().is_empty());
    }

    #[test]
    fn rows_load_in_order_with_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let px: Vec<u8> = (0..64 * 32).map(|i| (i % 251) as u8).collect();
        write_pgm(&dir.path().join("a.pgm"), 64, 32, &px).unwrap();
        write_pgm(&dir.path().join("b.pgm"), 4, 4, &[200; 16]).unwrap();
        let rows = vec![
            ManifestRow {
                path: "a.pgm".into(),
                patient_id: 3,
                label: 1,
            },
            ManifestRow {
                path: "b.pgm".into(),
                patient_id: 4,
                label: 0,
            },
            ManifestRow {
                path: "a.pgm".into(),
                patient_id: 3,
                label: 1,
            },
        ];
        let m = dir.path().join("manifest.csv");
        write_manifest(&m, &rows).unwrap();
        let ds = load_dataset(&m).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!((ds[1].patient_id, ds[1].label), (4, 0));
        assert_eq!(ds[0], ds[2]);
        assert!(ds[1].pixels.iter().all(|&p| (p - 200.0 / 255.0).abs() < 1e-12));
        assert!(ds.iter().all(|s| s.pixels.len() == IMAGE_SIZE * IMAGE_SIZE));
    }

    #[test]
    fn load_errors_name_the_row() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.pgm"), b"P5\n2 2\n255\n\x01").unwrap();
        write_pgm(&dir.path().join("ok.pgm"), 2, 2, &[1, 2, 3, 4]).unwrap();
        let cases = [
            ("missing.pgm", 0, "row 1"),
            ("bad.pgm", 0, "row 1"),
            ("ok.pgm", 2, "non-binary label 2"),
        ];
        for (path, label, needle) in cases {
            let m = dir.path().join("m.csv");
            std::fs::write(&m, format!("path,patient_id,label\n{path},3,{label}\n")).unwrap();
            let err = load_dataset(&m).unwrap_err().to_string();
            assert!(err.contains(needle), "{err}");
        }
    }
}
