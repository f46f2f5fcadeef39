//! On-disk dataset format: manifest.json + per-item raw blobs (bit-exact) and
//! lossy PNG exports under view/ for human inspection.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::dataset::{DataConfig, DatasetBundle, SequesteredSplit};
use crate::error::{Error, Result};
use crate::types::{Image, LabelMap, Modality};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitMeta {
    pub name: String,
    pub modality: Modality,
    pub count: usize,
    pub labeled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DataConfig,
    pub splits: Vec<SplitMeta>,
}

fn image_path(dir: &Path, name: &str, i: usize) -> PathBuf {
    dir.join(name).join(format!("item_{i:04}.image.f32"))
}

fn labels_path(dir: &Path, name: &str, i: usize) -> PathBuf {
    dir.join(name).join(format!("item_{i:04}.labels.u8"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Lossless persist: pixel values as row-major little-endian f32, labels as
/// raw u8.
pub fn save_split(
    dir: &Path,
    name: &str,
    images: &[Image],
    labels: Option<&[LabelMap]>,
) -> Result<()> {
    let split_dir = dir.join(name);
    fs::create_dir_all(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
    for (i, img) in images.iter().enumerate() {
        let bytes: Vec<u8> = img.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        write_file(&image_path(dir, name, i), &bytes)?;
    }
    if let Some(labels) = labels {
        for (i, m) in labels.iter().enumerate() {
            write_file(&labels_path(dir, name, i), &m.data)?;
        }
    }
    Ok(())
}

/// Lossless load; blob sizes are checked against the manifest shape.
pub fn load_split(
    dir: &Path,
    meta: &SplitMeta,
    height: usize,
    width: usize,
    classes: usize,
) -> Result<(Vec<Image>, Vec<LabelMap>)> {
    let mut images = Vec::with_capacity(meta.count);
    let mut labels = Vec::with_capacity(meta.count);
    for i in 0..meta.count {
        let path = image_path(dir, &meta.name, i);
        let bytes = read_file(&path)?;
        if bytes.len() != height * width * 4 {
            return Err(Error::BlobMismatch {
                name: path.display().to_string(),
                expected: height * width * 4,
                got: bytes.len(),
            });
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let img = Image { height, width, modality: meta.modality, data };
        img.validate()?;
        images.push(img);

        if meta.labeled {
            let path = labels_path(dir, &meta.name, i);
            let data = read_file(&path)?;
            if data.len() != height * width {
                return Err(Error::BlobMismatch {
                    name: path.display().to_string(),
                    expected: height * width,
                    got: data.len(),
                });
            }
            let m = LabelMap { height, width, classes, data };
            m.validate()?;
            labels.push(m);
        }
    }
    Ok((images, labels))
}

fn split_meta(bundle: &DatasetBundle) -> Vec<SplitMeta> {
    let m = |name: &str, modality, count| SplitMeta {
        name: name.into(),
        modality,
        count,
        labeled: true,
    };
    vec![
        m("a_train", Modality::A, bundle.a_train.len()),
        m("a_val", Modality::A, bundle.a_val.len()),
        m("b_train", Modality::B, bundle.b_train.len()),
        m("b_val", Modality::B, bundle.b_val.len()),
        m("b_test", Modality::B, bundle.b_test.len()),
    ]
}

fn unzip_refs(items: &[(Image, LabelMap)]) -> (Vec<Image>, Vec<LabelMap>) {
    items.iter().cloned().unzip()
}

pub fn save_dataset(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest { config: bundle.config.clone(), splits: split_meta(bundle) };
    let json = serde_json::to_string_pretty(&manifest)?;
    write_file(&dir.join("manifest.json"), json.as_bytes())?;

    let (imgs, labels) = unzip_refs(&bundle.a_train);
    save_split(dir, "a_train", &imgs, Some(&labels))?;
    let (imgs, labels) = unzip_refs(&bundle.a_val);
    save_split(dir, "a_val", &imgs, Some(&labels))?;
    save_split(dir, "b_train", bundle.b_train.images(), Some(bundle.b_train.raw_labels()))?;
    let (imgs, labels) = unzip_refs(&bundle.b_val);
    save_split(dir, "b_val", &imgs, Some(&labels))?;
    let (imgs, labels) = unzip_refs(&bundle.b_test);
    save_split(dir, "b_test", &imgs, Some(&labels))?;

    let view = dir.join("view");
    fs::create_dir_all(&view).map_err(|e| Error::io(&view, e))?;
    for meta in split_meta(bundle) {
        let images: Vec<&Image> = match meta.name.as_str() {
            "a_train" => bundle.a_train.iter().map(|p| &p.0).collect(),
            "a_val" => bundle.a_val.iter().map(|p| &p.0).collect(),
            "b_train" => bundle.b_train.images().iter().collect(),
            "b_val" => bundle.b_val.iter().map(|p| &p.0).collect(),
            _ => bundle.b_test.iter().map(|p| &p.0).collect(),
        };
        for (i, img) in images.iter().enumerate() {
            let path = view.join(format!("{}_{i:04}.png", meta.name));
            write_view_png(&path, img)?;
        }
    }
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<DatasetBundle> {
    let path = dir.join("manifest.json");
    let json = read_file(&path)?;
    let manifest: Manifest = serde_json::from_slice(&json).map_err(|e| Error::CorruptManifest {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let (h, w) = (manifest.config.anatomy.height, manifest.config.anatomy.width);
    let classes = crate::types::NUM_CLASSES;

    let mut splits = std::collections::HashMap::new();
    for meta in &manifest.splits {
        splits.insert(meta.name.clone(), load_split(dir, meta, h, w, classes)?);
    }
    let mut take = |name: &str| -> Result<(Vec<Image>, Vec<LabelMap>)> {
        splits.remove(name).ok_or_else(|| Error::CorruptManifest {
            path: path.clone(),
            reason: format!("missing split {name}"),
        })
    };
    let zip = |(imgs, labels): (Vec<Image>, Vec<LabelMap>)| -> Vec<(Image, LabelMap)> {
        imgs.into_iter().zip(labels).collect()
    };
    let a_train = zip(take("a_train")?);
    let a_val = zip(take("a_val")?);
    let (b_imgs, b_labels) = take("b_train")?;
    let b_val = zip(take("b_val")?);
    let b_test = zip(take("b_test")?);
    Ok(DatasetBundle {
        config: manifest.config,
        a_train,
        a_val,
        b_train: SequesteredSplit::new(b_imgs, b_labels),
        b_val,
        b_test,
    })
}

/// [-1, 1] -> 0..=255, endpoints exact.
pub fn quantize_unit(v: f32) -> u8 {
    (((v.clamp(-1.0, 1.0) + 1.0) / 2.0) * 255.0).round() as u8
}

pub fn write_gray_png(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    assert_eq!(data.len(), width * height);
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writer
        .write_image_data(data)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

/// View-only, lossy export.
pub fn write_view_png(path: &Path, img: &Image) -> Result<()> {
    let data: Vec<u8> = img.data.iter().map(|v| quantize_unit(*v)).collect();
    write_gray_png(path, img.width, img.height, &data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::{build_dataset, generate_bundle};

    fn tiny_config() -> DataConfig {
        DataConfig { a_train: 2, a_val: 1, b_train: 2, b_val: 1, b_test: 2, ..DataConfig::desk() }
    }

    #[test]
    fn dataset_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = build_dataset(&tiny_config(), dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(bundle.a_train, loaded.a_train);
        assert_eq!(bundle.b_test, loaded.b_test);
        assert_eq!(bundle.b_train.images(), loaded.b_train.images());
        assert_eq!(loaded.b_train.label_reads(), 0);
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        build_dataset(&tiny_config(), d1.path()).unwrap();
        build_dataset(&tiny_config(), d2.path()).unwrap();
        let collect = |root: &Path| {
            let mut files: Vec<(String, Vec<u8>)> = walk(root, root);
            files.sort();
            files
        };
        fn walk(root: &Path, dir: &Path) -> Vec<(String, Vec<u8>)> {
            let mut out = Vec::new();
            for entry in fs::read_dir(dir).unwrap() {
                let p = entry.unwrap().path();
                if p.is_dir() {
                    out.extend(walk(root, &p));
                } else {
                    let rel = p.strip_prefix(root).unwrap().display().to_string();
                    out.push((rel, fs::read(&p).unwrap()));
                }
            }
            out
        }
        assert_eq!(collect(d1.path()), collect(d2.path()));
    }

    #[test]
    fn truncated_blob_is_a_size_error() {
        let dir = tempfile::tempdir().unwrap();
        build_dataset(&tiny_config(), dir.path()).unwrap();
        let victim = dir.path().join("b_test").join("item_0000.image.f32");
        let bytes = fs::read(&victim).unwrap();
        fs::write(&victim, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::BlobMismatch { .. })));
    }

    #[test]
    fn corrupt_manifest_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        build_dataset(&tiny_config(), dir.path()).unwrap();
        fs::write(dir.path().join("manifest.json"), b"{ not json").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::CorruptManifest { .. })));
    }

    #[test]
    fn png_quantization_endpoints() {
        assert_eq!(quantize_unit(-1.0), 0);
        assert_eq!(quantize_unit(1.0), 255);
        assert_eq!(quantize_unit(0.0), 128);
    }

    #[test]
    fn view_pngs_exist() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = build_dataset(&tiny_config(), dir.path()).unwrap();
        let first = dir.path().join("view").join("a_train_0000.png");
        assert!(first.exists());
        drop(bundle);
    }
}
