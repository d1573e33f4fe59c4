//! Verification machinery: signature extraction, dissimilarity scoring,
//! gallery/probe protocols, and DET/EER/AUC metrics.

mod metrics;
mod protocol;

pub use metrics::{det_metrics, DetCurve, DetPoint, ScoreSet, VerificationMetrics};
pub use protocol::{
    build_gallery_probe, cross_dataset_experiment, run_verification, verify_signatures,
    CrossReport, FoldOutcome, GalleryProbe, ProbeClaim,
};

use crate::data::{batch_tensor, Dataset, IrisImage};
use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::tape::Tape;

/// Template vector extracted from the global-averaging layer, used as the
/// matching unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub values: Vec<f32>,
    pub class_id: usize,
    pub sample_id: usize,
}

impl Signature {
    pub fn new(values: Vec<f32>, class_id: usize, sample_id: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("signature has non-finite components".into()));
        }
        Ok(Signature {
            values,
            class_id,
            sample_id,
        })
    }
}

/// Extract the signature of one image (batch norm in inference mode).
/// Only models with the global-averaging head can produce signatures.
pub fn extract_signature(model: &Classifier, image: &IrisImage) -> Result<Signature> {
    let mut sigs = extract_signatures(model, std::slice::from_ref(image), &[0], &[0])?;
    Ok(sigs.remove(0))
}

/// Extract signatures for a set of images with their identities attached.
pub fn extract_signatures(
    model: &Classifier,
    images: &[IrisImage],
    class_ids: &[usize],
    sample_ids: &[usize],
) -> Result<Vec<Signature>> {
    if images.len() != class_ids.len() || images.len() != sample_ids.len() {
        return Err(Error::Contract(
            "images, class ids and sample ids must have equal lengths".into(),
        ));
    }
    let mut out = Vec::with_capacity(images.len());
    for (chunk_start, chunk) in images.chunks(16).enumerate().map(|(i, c)| (i * 16, c)) {
        let refs: Vec<&IrisImage> = chunk.iter().collect();
        let x = batch_tensor(&refs)?;
        let mut tape = Tape::inference();
        let xv = tape.input(&x);
        let fwd = model.forward_infer(&mut tape, xv)?;
        let emb = fwd.embedding.ok_or_else(|| {
            Error::Capability(
                "this model has no signature layer (fully connected head); \
                 build the classifier with the tel head to extract signatures"
                    .into(),
            )
        })?;
        let emb = tape.value(emb);
        let width = emb.shape()[1];
        for (row_idx, row) in emb.data().chunks_exact(width).enumerate() {
            let i = chunk_start + row_idx;
            out.push(Signature::new(row.to_vec(), class_ids[i], sample_ids[i])?);
        }
    }
    Ok(out)
}

/// Extract a signature per dataset sample, numbering samples within each class.
pub fn dataset_signatures(model: &Classifier, dataset: &Dataset) -> Result<Vec<Signature>> {
    let mut per_class = vec![0usize; dataset.num_classes];
    let sample_ids: Vec<usize> = dataset
        .labels
        .iter()
        .map(|&c| {
            let s = per_class[c];
            per_class[c] += 1;
            s
        })
        .collect();
    extract_signatures(model, &dataset.images, &dataset.labels, &sample_ids)
}

/// Euclidean distance between the unit-normalized vectors; range `[0, 2]`,
/// scale-invariant in either argument.
pub fn dissimilarity(a: &Signature, b: &Signature) -> Result<f32> {
    if a.values.len() != b.values.len() {
        return Err(Error::ShapeMismatch {
            op: "dissimilarity",
            left: vec![a.values.len()],
            right: vec![b.values.len()],
        });
    }
    let norm = |v: &[f32]| -> f64 { v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt() };
    let (na, nb) = (norm(&a.values), norm(&b.values));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateSignature);
    }
    let mut acc = 0.0f64;
    for (x, y) in a.values.iter().zip(b.values.iter()) {
        let d = *x as f64 / na - *y as f64 / nb;
        acc += d * d;
    }
    Ok(acc.sqrt() as f32)
}

/// Signature CSV: `class_id,sample_id,v0,...,v{n-1}` per row, with header.
pub fn signatures_to_csv(signatures: &[Signature]) -> String {
    let width = signatures.first().map(|s| s.values.len()).unwrap_or(0);
    let mut s = String::from("class_id,sample_id");
    for i in 0..width {
        s.push_str(&format!(",v{i}"));
    }
    s.push('\n');
    for sig in signatures {
        s.push_str(&format!("{},{}", sig.class_id, sig.sample_id));
        for v in &sig.values {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}
