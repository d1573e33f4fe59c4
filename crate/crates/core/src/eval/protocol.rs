//! Gallery/probe verification protocols.
//!
//! Construction rule for a set of held-out classes: identities are split
//! half/half into enrolled (genuine) and imposter identities. Each enrolled
//! class contributes half its samples to the gallery and probes the rest
//! against its own claim; every imposter sample probes a uniformly random
//! enrolled class. A probe's score against a claimed class is the minimum
//! dissimilarity over that class's gallery samples.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{
    dataset_signatures, det_metrics, dissimilarity, ScoreSet, Signature, VerificationMetrics,
};
use crate::models::Classifier;
use crate::rng::{stream, tags};

/// A probe signature with the identity it claims to be.
#[derive(Debug, Clone)]
pub struct ProbeClaim {
    pub signature: Signature,
    pub claimed_class: usize,
}

/// Enrolled gallery plus claimed probes.
#[derive(Debug, Clone, Default)]
pub struct GalleryProbe {
    pub gallery: Vec<Signature>,
    pub probes: Vec<ProbeClaim>,
}

/// Score every probe against its claimed identity.
pub fn run_verification(gallery: &[Signature], probes: &[ProbeClaim]) -> Result<ScoreSet> {
    let mut scores = ScoreSet::default();
    for probe in probes {
        let mut best: Option<f32> = None;
        for enrolled in gallery.iter().filter(|g| g.class_id == probe.claimed_class) {
            let d = dissimilarity(&probe.signature, enrolled)?;
            best = Some(match best {
                Some(b) if b <= d => b,
                _ => d,
            });
        }
        let score = best.ok_or_else(|| {
            Error::Protocol(format!(
                "claimed class {} has no enrolled gallery samples",
                probe.claimed_class
            ))
        })?;
        if probe.signature.class_id == probe.claimed_class {
            scores.genuine.push(score);
        } else {
            scores.imposter.push(score);
        }
    }
    Ok(scores)
}

/// Split held-out signatures into a gallery and claimed probes per the
/// module's construction rule. `signatures` must cover at least 2 classes.
pub fn build_gallery_probe(signatures: &[Signature], seed: u64) -> Result<GalleryProbe> {
    let mut rng = stream(seed, tags::PROTOCOL);
    let mut classes: Vec<usize> = {
        let mut c: Vec<usize> = signatures.iter().map(|s| s.class_id).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    if classes.len() < 2 {
        return Err(Error::Protocol(format!(
            "gallery/probe construction needs at least 2 classes, got {}",
            classes.len()
        )));
    }
    classes.shuffle(&mut rng);
    let imposter_count = classes.len() / 2;
    let (imposter_classes, enrolled_classes) = classes.split_at(imposter_count);

    let mut out = GalleryProbe::default();
    for &class in enrolled_classes {
        let mut samples: Vec<&Signature> =
            signatures.iter().filter(|s| s.class_id == class).collect();
        samples.shuffle(&mut rng);
        let enrolled = samples.len().div_ceil(2);
        for s in &samples[..enrolled] {
            out.gallery.push((*s).clone());
        }
        for s in &samples[enrolled..] {
            out.probes.push(ProbeClaim {
                signature: (*s).clone(),
                claimed_class: class,
            });
        }
    }
    for &class in imposter_classes {
        for s in signatures.iter().filter(|s| s.class_id == class) {
            let claimed = enrolled_classes[rng.gen_range(0..enrolled_classes.len())];
            out.probes.push(ProbeClaim {
                signature: s.clone(),
                claimed_class: claimed,
            });
        }
    }
    Ok(out)
}

/// Per-fold outcome of the cross-dataset protocol.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub classes: Vec<usize>,
    pub scores: ScoreSet,
    pub metrics: VerificationMetrics,
}

impl FoldOutcome {
    pub fn eer(&self) -> f64 {
        self.metrics.eer
    }

    pub fn auc(&self) -> f64 {
        self.metrics.auc
    }
}

/// Cross-dataset evaluation report (no fine-tuning on the target data).
#[derive(Debug, Clone)]
pub struct CrossReport {
    pub folds: Vec<FoldOutcome>,
    pub mean_eer: f64,
    pub mean_auc: f64,
}

impl CrossReport {
    /// Plain-text `key: value` report with the fold table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("protocol: cross-dataset\n");
        s.push_str(&format!("folds: {}\n", self.folds.len()));
        for f in &self.folds {
            s.push_str(&format!(
                "fold {}: classes={} eer={:.6} auc={:.6}\n",
                f.fold,
                f.classes.len(),
                f.metrics.eer,
                f.metrics.auc
            ));
        }
        s.push_str(&format!("mean_eer: {:.6}\n", self.mean_eer));
        s.push_str(&format!("mean_auc: {:.6}\n", self.mean_auc));
        s
    }
}

/// Evaluate a trained model on a disjoint dataset: classes are partitioned
/// into `folds` groups (the last takes any remainder), each fold runs the
/// gallery/probe protocol, and the mean EER/AUC over folds is reported.
pub fn cross_dataset_experiment(
    model: &Classifier,
    target: &Dataset,
    folds: usize,
    seed: u64,
) -> Result<CrossReport> {
    if folds == 0 {
        return Err(Error::Protocol("need at least one fold".into()));
    }
    if target.num_classes < 2 * folds {
        return Err(Error::Protocol(format!(
            "{} classes cannot fill {} folds with >= 2 classes each",
            target.num_classes, folds
        )));
    }
    let signatures = dataset_signatures(model, target)?;
    let mut classes: Vec<usize> = (0..target.num_classes).collect();
    let mut rng = stream(seed, tags::PROTOCOL);
    classes.shuffle(&mut rng);

    let per_fold = classes.len() / folds;
    let mut outcomes = Vec::with_capacity(folds);
    for fold in 0..folds {
        let start = fold * per_fold;
        let end = if fold + 1 == folds {
            classes.len() // last fold takes the remainder
        } else {
            start + per_fold
        };
        let fold_classes: Vec<usize> = classes[start..end].to_vec();
        let fold_sigs: Vec<Signature> = signatures
            .iter()
            .filter(|s| fold_classes.contains(&s.class_id))
            .cloned()
            .collect();
        let gp = build_gallery_probe(&fold_sigs, seed ^ (fold as u64 + 1))?;
        let scores = run_verification(&gp.gallery, &gp.probes)?;
        let metrics = det_metrics(&scores)?;
        outcomes.push(FoldOutcome {
            fold,
            classes: fold_classes,
            scores,
            metrics,
        });
    }
    let mean_eer = outcomes.iter().map(|o| o.metrics.eer).sum::<f64>() / outcomes.len() as f64;
    let mean_auc = outcomes.iter().map(|o| o.metrics.auc).sum::<f64>() / outcomes.len() as f64;
    Ok(CrossReport {
        folds: outcomes,
        mean_eer,
        mean_auc,
    })
}

/// Convenience wrapper: score held-out signatures and compute metrics.
pub fn verify_signatures(signatures: &[Signature], seed: u64) -> Result<(ScoreSet, VerificationMetrics)> {
    let gp = build_gallery_probe(signatures, seed)?;
    let scores = run_verification(&gp.gallery, &gp.probes)?;
    let metrics = det_metrics(&scores)?;
    Ok((scores, metrics))
}
