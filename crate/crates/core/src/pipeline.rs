//! End-to-end experiment drivers: class-disjoint within-dataset protocol
//! and the architecture ablation table.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{
    build_gallery_probe, dataset_signatures, det_metrics, run_verification, ScoreSet,
    VerificationMetrics,
};
use crate::layers::PoolKind;
use crate::models::{classifier_param_report, Classifier, HeadKind, NamedTensors};
use crate::rng::{stream, tags};
use crate::train::{train_stage1, train_stage2, EncoderInit, TrainConfig, TrainReport};

/// Split dataset classes into disjoint train/test groups (default 80/20).
pub fn class_split(
    num_classes: usize,
    test_fraction: f32,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if num_classes < 5 {
        return Err(Error::Protocol(format!(
            "within-dataset protocol needs at least 5 classes, got {num_classes}"
        )));
    }
    let mut classes: Vec<usize> = (0..num_classes).collect();
    let mut rng = stream(seed, tags::SPLIT);
    classes.shuffle(&mut rng);
    let n_test = ((num_classes as f32 * test_fraction).round() as usize).clamp(2, num_classes - 2);
    let (test, train) = classes.split_at(n_test);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Configuration of the full two-stage within-dataset experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub stage1: TrainConfig,
    pub stage2: TrainConfig,
    /// Fraction of classes held out for verification.
    pub test_fraction: f32,
    /// Also train the ablation variants (random init, fully connected
    /// head, max pooling) for the comparison table.
    pub ablation: bool,
    /// Epoch budget for the non-target ablation rows.
    pub ablation_epochs: usize,
    /// Epoch budget for the extra stage-1 run an ablation row may need
    /// (pre-training under the other pooling kind).
    pub ablation_stage1_epochs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut stage1 = TrainConfig::stage1();
        stage1.target_metric = Some(0.82);
        let mut stage2 = TrainConfig::stage2();
        stage2.target_metric = Some(0.98);
        ExperimentConfig {
            seed: 7,
            stage1,
            stage2,
            test_fraction: 0.2,
            ablation: true,
            ablation_epochs: 5,
            ablation_stage1_epochs: 10,
        }
    }
}

/// Outcome of the verification phase on held-out classes.
#[derive(Debug, Clone)]
pub struct WithinReport {
    pub train_classes: Vec<usize>,
    pub test_classes: Vec<usize>,
    pub stage1: TrainReport,
    pub stage2: TrainReport,
    pub scores: ScoreSet,
    pub metrics: VerificationMetrics,
}

impl WithinReport {
    /// Plain-text `key: value` report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("protocol: within-dataset\n");
        s.push_str(&format!("train_classes: {}\n", self.train_classes.len()));
        s.push_str(&format!("test_classes: {}\n", self.test_classes.len()));
        s.push_str(&format!(
            "stage1_best_ssim: {:.6} (epoch {})\n",
            self.stage1.best_metric, self.stage1.best_epoch
        ));
        s.push_str(&format!(
            "stage2_best_accuracy: {:.6} (epoch {})\n",
            self.stage2.best_metric, self.stage2.best_epoch
        ));
        s.push_str(&format!("genuine_scores: {}\n", self.scores.genuine.len()));
        s.push_str(&format!("imposter_scores: {}\n", self.scores.imposter.len()));
        s.push_str(&format!("eer: {:.6}\n", self.metrics.eer));
        s.push_str(&format!("auc: {:.6}\n", self.metrics.auc));
        s
    }
}

/// One trained architecture variant in the comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub pretrained: bool,
    pub head: HeadKind,
    pub pool: PoolKind,
    pub val_accuracy: f32,
    pub params: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Plain-text table of the architecture comparison.
    pub fn to_text(&self) -> String {
        let mut s = String::from("init        head  pool  val_accuracy  params      epochs\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<11} {:<5} {:<5} {:<13.4} {:<11} {}\n",
                if r.pretrained { "pretrained" } else { "random" },
                r.head.as_str(),
                r.pool.as_str(),
                r.val_accuracy,
                r.params,
                r.epochs_run
            ));
        }
        s
    }
}

/// Full experiment result: target model, verification outcome, ablation table.
pub struct ExperimentOutcome {
    pub model: Classifier,
    pub within: WithinReport,
    pub ablation: Option<AblationReport>,
}

fn ablation_row(report: &TrainReport, cfg: &TrainConfig, dataset: &Dataset, pretrained: bool) -> AblationRow {
    let params = classifier_param_report(cfg.head, dataset.num_classes, dataset.width, dataset.height)
        .map(|r| r.total())
        .unwrap_or(0);
    AblationRow {
        pretrained,
        head: cfg.head,
        pool: cfg.pool,
        val_accuracy: report.best_metric,
        params,
        epochs_run: report.epoch_loss.len(),
    }
}

/// Run the complete within-dataset experiment: disjoint class split,
/// stage-1 pre-training, stage-2 refinement of the target variant,
/// verification on the held-out classes, and (optionally) the ablation
/// variants trained under a reduced epoch budget.
pub fn full_experiment(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let (train_classes, test_classes) = class_split(dataset.num_classes, cfg.test_fraction, cfg.seed)?;
    let (train_ds, _) = dataset.subset_by_classes(&train_classes)?;
    let (test_ds, _) = dataset.subset_by_classes(&test_classes)?;

    // stage-1 pre-training uses the pooling kind of the target variant
    let mut stage1_cfg = cfg.stage1.clone();
    stage1_cfg.pool = cfg.stage2.pool;
    stage1_cfg.seed = cfg.seed;
    let (autoencoder, stage1_report) = train_stage1(&train_ds, &stage1_cfg)?;
    let pretrained: NamedTensors = autoencoder
        .encoder
        .state()
        .into_iter()
        .map(|(n, t)| (format!("encoder.{n}"), t))
        .collect();
    let mut stage1_cache: HashMap<&str, NamedTensors> = HashMap::new();
    stage1_cache.insert(cfg.stage2.pool.as_str(), pretrained.clone());

    // target variant
    let mut stage2_cfg = cfg.stage2.clone();
    stage2_cfg.seed = cfg.seed;
    let (model, stage2_report) =
        train_stage2(&train_ds, EncoderInit::Pretrained(pretrained), &stage2_cfg)?;

    // verification on held-out classes
    let signatures = dataset_signatures(&model, &test_ds)?;
    let gp = build_gallery_probe(&signatures, cfg.seed)?;
    let scores = run_verification(&gp.gallery, &gp.probes)?;
    let metrics = det_metrics(&scores)?;

    let within = WithinReport {
        train_classes,
        test_classes,
        stage1: stage1_report,
        stage2: stage2_report.clone(),
        scores,
        metrics,
    };

    let ablation = if cfg.ablation {
        let mut rows = Vec::new();

        let budget = |mut c: TrainConfig| {
            c.epochs = cfg.ablation_epochs.min(c.epochs.max(1));
            c.target_metric = None;
            c.seed = cfg.seed;
            c
        };

        // stage-1 state per pooling kind, trained lazily under the
        // reduced ablation budget when the target run didn't produce it
        let pretrained_for = |pool: PoolKind,
                                  cache: &mut HashMap<&str, NamedTensors>|
         -> Result<NamedTensors> {
            if let Some(s) = cache.get(pool.as_str()) {
                return Ok(s.clone());
            }
            let mut s1 = stage1_cfg.clone();
            s1.pool = pool;
            s1.epochs = cfg.ablation_stage1_epochs.max(1);
            let (ae, _) = train_stage1(&train_ds, &s1)?;
            let state: NamedTensors = ae
                .encoder
                .state()
                .into_iter()
                .map(|(n, t)| (format!("encoder.{n}"), t))
                .collect();
            cache.insert(pool.as_str(), state.clone());
            Ok(state)
        };

        // random init, fully connected head, max pooling
        let mut c_random = budget(cfg.stage2.clone());
        c_random.pool = PoolKind::Max;
        c_random.head = HeadKind::TwoFc;
        let (_, r_random) = train_stage2(&train_ds, EncoderInit::Random, &c_random)?;
        rows.push(ablation_row(&r_random, &c_random, &train_ds, false));

        // pretrained encoder, fully connected head, max pooling
        let c_pre_max = c_random.clone();
        let max_state = pretrained_for(PoolKind::Max, &mut stage1_cache)?;
        let (_, r_pre_max) =
            train_stage2(&train_ds, EncoderInit::Pretrained(max_state), &c_pre_max)?;
        rows.push(ablation_row(&r_pre_max, &c_pre_max, &train_ds, true));

        // pretrained encoder, fully connected head, window-mean pooling
        let mut c_pre_eap = budget(cfg.stage2.clone());
        c_pre_eap.pool = PoolKind::Eap;
        c_pre_eap.head = HeadKind::TwoFc;
        let eap_state = pretrained_for(PoolKind::Eap, &mut stage1_cache)?;
        let (_, r_pre_eap) =
            train_stage2(&train_ds, EncoderInit::Pretrained(eap_state), &c_pre_eap)?;
        rows.push(ablation_row(&r_pre_eap, &c_pre_eap, &train_ds, true));

        // the target variant row reuses the full training run
        rows.push(ablation_row(&stage2_report, &stage2_cfg, &train_ds, true));

        Some(AblationReport { rows })
    } else {
        None
    };

    Ok(ExperimentOutcome {
        model,
        within,
        ablation,
    })
}
