//! Dataset handling: normalized iris images, manifests, synthetic texture
//! generation, and checkpoint persistence.

mod checkpoint;
mod pgm;
mod synth;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, FORMAT_VERSION};
pub use pgm::{load_image, save_pgm, save_raw};
pub use synth::{generate_synthetic, SynthSpec};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Single-channel normalized iris image with values in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrisImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, `width * height` values.
    pub pixels: Vec<f32>,
}

impl IrisImage {
    pub fn new(width: usize, height: usize, mut pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch {
                op: "iris image",
                left: vec![width, height],
                right: vec![pixels.len()],
            });
        }
        for p in &mut pixels {
            *p = p.clamp(0.0, 1.0);
        }
        Ok(IrisImage {
            width,
            height,
            pixels,
        })
    }

    /// View as a `[1, 1, h, w]` tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(vec![1, 1, self.height, self.width], self.pixels.clone())
            .expect("consistent by construction")
    }
}

/// Stack images into a `[n, 1, h, w]` batch tensor.
pub fn batch_tensor(images: &[&IrisImage]) -> Result<Tensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::Input("cannot batch zero images".into()))?;
    let (w, h) = (first.width, first.height);
    let mut data = Vec::with_capacity(images.len() * w * h);
    for img in images {
        if img.width != w || img.height != h {
            return Err(Error::ShapeMismatch {
                op: "batch",
                left: vec![w, h],
                right: vec![img.width, img.height],
            });
        }
        data.extend_from_slice(&img.pixels);
    }
    Tensor::from_vec(vec![images.len(), 1, h, w], data)
}

/// Which eye an image came from; left and right irises of one subject count
/// as different classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eye {
    Left,
    Right,
}

impl Eye {
    pub fn index(self) -> usize {
        match self {
            Eye::Left => 0,
            Eye::Right => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Eye::Left => "left",
            Eye::Right => "right",
        }
    }
}

impl std::str::FromStr for Eye {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Eye::Left),
            "right" => Ok(Eye::Right),
            other => Err(Error::Input(format!("unknown eye {other:?}"))),
        }
    }
}

/// One dataset record: an image file with its identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    /// Path relative to the manifest's directory.
    pub path: String,
    /// Compact class id (contiguous from 0 after compaction).
    pub class_id: usize,
    pub subject_id: usize,
    pub eye: Eye,
}

/// File-backed dataset description.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    pub root: PathBuf,
}

impl DatasetManifest {
    /// Raw class id before compaction: left and right eyes are distinct.
    pub fn raw_class_id(subject_id: usize, eye: Eye) -> usize {
        2 * subject_id + eye.index()
    }

    /// Recover the (subject, eye) pair a raw class id encodes.
    pub fn decode_raw_class_id(raw: usize) -> (usize, Eye) {
        (raw / 2, if raw % 2 == 0 { Eye::Left } else { Eye::Right })
    }

    /// Build from (path, subject, eye) triples, assigning compact class ids
    /// in ascending raw-id order.
    pub fn from_entries(root: impl Into<PathBuf>, entries: Vec<(String, usize, Eye)>) -> Self {
        let mut raw_ids: Vec<usize> = entries
            .iter()
            .map(|(_, s, e)| Self::raw_class_id(*s, *e))
            .collect();
        raw_ids.sort_unstable();
        raw_ids.dedup();
        let compact: BTreeMap<usize, usize> =
            raw_ids.into_iter().enumerate().map(|(i, r)| (r, i)).collect();
        let records = entries
            .into_iter()
            .map(|(path, subject_id, eye)| ManifestRecord {
                path,
                class_id: compact[&Self::raw_class_id(subject_id, eye)],
                subject_id,
                eye,
            })
            .collect();
        DatasetManifest {
            records,
            root: root.into(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.class_id + 1)
            .max()
            .unwrap_or(0)
    }

    /// Serialize as CSV with header `path,class_id,subject_id,eye`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("path,class_id,subject_id,eye\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.path,
                r.class_id,
                r.subject_id,
                r.eye.as_str()
            ));
        }
        s
    }

    pub fn from_csv(root: impl Into<PathBuf>, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format {
                offset: 0,
                what: "empty manifest".into(),
            })?
            .trim();
        if header != "path,class_id,subject_id,eye" {
            return Err(Error::Format {
                offset: 0,
                what: format!("unexpected manifest header {header:?}"),
            });
        }
        let mut records = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Format {
                    offset: lineno + 2,
                    what: format!("manifest line has {} fields, expected 4", fields.len()),
                });
            }
            let parse_usize = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| Error::Format {
                    offset: lineno + 2,
                    what: format!("bad integer {s:?} in manifest"),
                })
            };
            records.push(ManifestRecord {
                path: fields[0].trim().to_string(),
                class_id: parse_usize(fields[1])?,
                subject_id: parse_usize(fields[2])?,
                eye: fields[3].trim().parse()?,
            });
        }
        Ok(DatasetManifest {
            records,
            root: root.into(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let root = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Self::from_csv(root, &text)
    }
}

/// In-memory dataset: images with compact class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<IrisImage>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub width: usize,
    pub height: usize,
}

impl Dataset {
    pub fn new(images: Vec<IrisImage>, labels: Vec<usize>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Input("dataset has no images".into()));
        }
        if images.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        let (w, h) = (images[0].width, images[0].height);
        for img in &images {
            if img.width != w || img.height != h {
                return Err(Error::Input(format!(
                    "mixed resolutions: {}x{} vs {w}x{h}",
                    img.width, img.height
                )));
            }
        }
        let num_classes = labels.iter().map(|l| l + 1).max().unwrap_or(0);
        Ok(Dataset {
            images,
            labels,
            num_classes,
            width: w,
            height: h,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Indices of every sample of each class, in dataset order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.num_classes];
        for (i, &label) in self.labels.iter().enumerate() {
            by_class[label].push(i);
        }
        by_class
    }

    /// Load every image referenced by a manifest.
    pub fn from_manifest(manifest: &DatasetManifest) -> Result<Self> {
        if manifest.records.is_empty() {
            return Err(Error::Input("manifest has no records".into()));
        }
        let mut images = Vec::with_capacity(manifest.records.len());
        let mut labels = Vec::with_capacity(manifest.records.len());
        for r in &manifest.records {
            images.push(load_image(&manifest.root.join(&r.path))?);
            labels.push(r.class_id);
        }
        Dataset::new(images, labels)
    }

    /// Restrict to the given classes, relabelling them contiguously in the
    /// order provided. Returns the restricted dataset and, per new label,
    /// the original class id.
    pub fn subset_by_classes(&self, classes: &[usize]) -> Result<(Dataset, Vec<usize>)> {
        let mut remap = BTreeMap::new();
        for (new, &old) in classes.iter().enumerate() {
            if old >= self.num_classes {
                return Err(Error::Input(format!(
                    "class {old} out of range ({} classes)",
                    self.num_classes
                )));
            }
            remap.insert(old, new);
        }
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for (img, &label) in self.images.iter().zip(self.labels.iter()) {
            if let Some(&new) = remap.get(&label) {
                images.push(img.clone());
                labels.push(new);
            }
        }
        let ds = Dataset::new(images, labels)?;
        Ok((ds, classes.to_vec()))
    }
}

/// Write a dataset to disk as PGM files plus `manifest.csv`.
///
/// Classes are mapped to synthetic subjects: class `2s` is subject `s`'s
/// left eye, class `2s+1` the right.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(dataset.len());
    let mut counters = vec![0usize; dataset.num_classes];
    for (img, &class) in dataset.images.iter().zip(dataset.labels.iter()) {
        let sample = counters[class];
        counters[class] += 1;
        let name = format!("class{class:03}_sample{sample:03}.pgm");
        save_pgm(&dir.join(&name), img)?;
        let (subject, eye) = DatasetManifest::decode_raw_class_id(class);
        entries.push((name, subject, eye));
    }
    let manifest = DatasetManifest::from_entries(dir, entries);
    manifest.save(&dir.join("manifest.csv"))?;
    Ok(manifest)
}
