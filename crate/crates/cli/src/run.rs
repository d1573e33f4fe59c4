//! Subcommand implementations.

use std::path::Path;

use iristex::data::{
    generate_synthetic, load_checkpoint, save_checkpoint, save_dataset, Checkpoint,
    CheckpointMeta, Dataset, DatasetManifest,
};
use iristex::eval::{
    build_gallery_probe, cross_dataset_experiment, dataset_signatures, det_metrics,
    run_verification, signatures_to_csv,
};
use iristex::models::{classifier_param_report, NamedTensors};
use iristex::pipeline::class_split;
use iristex::train::{train_stage1, train_stage2, EncoderInit, TrainReport};
use iristex::{Error, HeadKind, PoolKind, Result};

use crate::config::RunConfig;
use crate::Command;

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData { spec, out, seed } => gen_data(spec.as_deref(), &out, seed),
        Command::Pretrain {
            data,
            config,
            out,
            pool,
            seed,
            epochs,
        } => pretrain(&data, config.as_deref(), &out, pool, seed, epochs),
        Command::Train {
            data,
            config,
            init,
            pool,
            head,
            out,
            seed,
            epochs,
        } => train(&data, config.as_deref(), &init, pool, head, &out, seed, epochs),
        Command::Extract { model, data, out } => extract(&model, &data, &out),
        Command::Eval {
            model,
            data,
            protocol,
            config,
            out,
        } => eval(&model, &data, &protocol, config.as_deref(), &out),
        Command::Params {
            pool,
            head,
            classes,
            width,
            height,
        } => params(&pool, &head, classes, width, height),
    }
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.csv");
    if !manifest_path.exists() {
        return Err(Error::Input(format!(
            "no manifest.csv under {}",
            dir.display()
        )));
    }
    let manifest = DatasetManifest::load(&manifest_path)?;
    Dataset::from_manifest(&manifest)
}

fn gen_data(spec: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = RunConfig::load(spec)?;
    if let Some(s) = seed {
        cfg.synth.seed = s;
    }
    let dataset = generate_synthetic(&cfg.synth)?;
    std::fs::create_dir_all(out)?;
    save_dataset(&dataset, out)?;
    cfg.echo(out, true)?;
    println!(
        "wrote {} images across {} classes to {}",
        dataset.len(),
        dataset.num_classes,
        out.display()
    );
    Ok(())
}

fn write_train_artifacts(out: &Path, report: &TrainReport) -> Result<()> {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    std::fs::write(out.with_file_name(format!("{stem}.loss.csv")), report.loss_csv())?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn pretrain(
    data: &Path,
    config: Option<&Path>,
    out: &Path,
    pool: Option<String>,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(p) = pool {
        cfg.stage1.pool = p.parse()?;
    }
    if let Some(s) = seed {
        cfg.stage1.seed = s;
    }
    if let Some(e) = epochs {
        cfg.stage1.epochs = e;
    }
    let dataset = load_dataset(data)?;
    let (train_classes, _) = class_split(
        dataset.num_classes,
        cfg.protocol.test_fraction,
        cfg.protocol.seed,
    )?;
    let (train_ds, _) = dataset.subset_by_classes(&train_classes)?;

    let (autoencoder, report) = train_stage1(&train_ds, &cfg.stage1)?;
    let tensors: NamedTensors = autoencoder
        .encoder
        .state()
        .into_iter()
        .map(|(n, t)| (format!("encoder.{n}"), t))
        .collect();
    let ckpt = Checkpoint::new(
        tensors,
        CheckpointMeta {
            stage: Some(1),
            pool: Some(cfg.stage1.pool.as_str().into()),
            seed: Some(cfg.stage1.seed),
            epoch: Some(report.best_epoch),
            input_width: Some(train_ds.width),
            input_height: Some(train_ds.height),
            train_classes: Some(train_classes),
            ..Default::default()
        },
    );
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save_checkpoint(out, &ckpt)?;
    write_train_artifacts(out, &report)?;
    cfg.echo(out, false)?;
    println!(
        "stage-1 done: best val ssim {:.4} at epoch {}; checkpoint {}",
        report.best_metric,
        report.best_epoch,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    data: &Path,
    config: Option<&Path>,
    init: &str,
    pool: Option<String>,
    head: Option<String>,
    out: &Path,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(p) = pool {
        cfg.stage2.pool = p.parse()?;
    }
    if let Some(h) = head {
        cfg.stage2.head = h.parse()?;
    }
    if let Some(s) = seed {
        cfg.stage2.seed = s;
    }
    if let Some(e) = epochs {
        cfg.stage2.epochs = e;
    }
    let dataset = load_dataset(data)?;

    // encoder initialization and the training class split; a stage-1
    // checkpoint pins the split it was trained with
    let (encoder_init, train_classes) = if init == "random" {
        let (train_classes, _) = class_split(
            dataset.num_classes,
            cfg.protocol.test_fraction,
            cfg.protocol.seed,
        )?;
        (EncoderInit::Random, train_classes)
    } else {
        let ckpt = load_checkpoint(Path::new(init))?;
        let classes = match &ckpt.meta.train_classes {
            Some(c) => c.clone(),
            None => {
                class_split(
                    dataset.num_classes,
                    cfg.protocol.test_fraction,
                    cfg.protocol.seed,
                )?
                .0
            }
        };
        (EncoderInit::Pretrained(ckpt.tensors), classes)
    };
    let (train_ds, _) = dataset.subset_by_classes(&train_classes)?;

    let (model, report) = train_stage2(&train_ds, encoder_init, &cfg.stage2)?;
    let ckpt = Checkpoint::new(
        model.state(),
        CheckpointMeta {
            stage: Some(2),
            pool: Some(cfg.stage2.pool.as_str().into()),
            head: Some(model.head_kind().as_str().into()),
            seed: Some(cfg.stage2.seed),
            epoch: Some(report.best_epoch),
            num_classes: Some(train_ds.num_classes),
            input_width: Some(train_ds.width),
            input_height: Some(train_ds.height),
            train_classes: Some(train_classes),
        },
    );
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save_checkpoint(out, &ckpt)?;
    write_train_artifacts(out, &report)?;
    cfg.echo(out, false)?;
    println!(
        "stage-2 done: best val accuracy {:.4} at epoch {}; checkpoint {}",
        report.best_metric,
        report.best_epoch,
        out.display()
    );
    Ok(())
}

fn check_resolution(ckpt: &Checkpoint, ds: &Dataset) -> Result<()> {
    if let (Some(w), Some(h)) = (ckpt.meta.input_width, ckpt.meta.input_height) {
        if w != ds.width || h != ds.height {
            return Err(Error::Input(format!(
                "model was trained on {w}x{h} images, dataset is {}x{}",
                ds.width, ds.height
            )));
        }
    }
    Ok(())
}

fn extract(model: &Path, data: &Path, out: &Path) -> Result<()> {
    let ckpt = load_checkpoint(model)?;
    let classifier = ckpt.build_classifier()?;
    let dataset = load_dataset(data)?;
    check_resolution(&ckpt, &dataset)?;
    let signatures = dataset_signatures(&classifier, &dataset)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out, signatures_to_csv(&signatures))?;
    println!("wrote {} signatures to {}", signatures.len(), out.display());
    Ok(())
}

fn eval(
    model: &Path,
    data: &Path,
    protocol: &str,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let ckpt = load_checkpoint(model)?;
    let classifier = ckpt.build_classifier()?;
    let dataset = load_dataset(data)?;
    check_resolution(&ckpt, &dataset)?;
    std::fs::create_dir_all(out)?;

    match protocol {
        "within" => {
            // held-out classes: everything the checkpoint did not train on
            let trained = ckpt.meta.train_classes.clone().ok_or_else(|| {
                Error::State(
                    "checkpoint does not record its training classes; \
                     cannot reconstruct the held-out split"
                        .into(),
                )
            })?;
            let test_classes: Vec<usize> = (0..dataset.num_classes)
                .filter(|c| !trained.contains(c))
                .collect();
            if test_classes.len() < 2 {
                return Err(Error::Protocol(format!(
                    "only {} held-out classes available",
                    test_classes.len()
                )));
            }
            let (test_ds, _) = dataset.subset_by_classes(&test_classes)?;
            let signatures = dataset_signatures(&classifier, &test_ds)?;
            let gp = build_gallery_probe(&signatures, cfg.protocol.seed)?;
            let scores = run_verification(&gp.gallery, &gp.probes)?;
            let metrics = det_metrics(&scores)?;

            std::fs::write(out.join("scores.csv"), scores.to_csv())?;
            std::fs::write(out.join("det.csv"), metrics.curve.to_csv())?;
            let mut report = String::new();
            report.push_str("protocol: within-dataset\n");
            report.push_str(&format!("test_classes: {}\n", test_classes.len()));
            report.push_str(&format!("genuine_scores: {}\n", scores.genuine.len()));
            report.push_str(&format!("imposter_scores: {}\n", scores.imposter.len()));
            report.push_str(&format!("eer: {:.6}\n", metrics.eer));
            report.push_str(&format!("auc: {:.6}\n", metrics.auc));
            std::fs::write(out.join("report.txt"), &report)?;
            cfg.echo(out, true)?;
            println!("eer: {:.6}\nauc: {:.6}", metrics.eer, metrics.auc);
        }
        "cross" => {
            let report =
                cross_dataset_experiment(&classifier, &dataset, cfg.protocol.folds, cfg.protocol.seed)?;
            for fold in &report.folds {
                std::fs::write(
                    out.join(format!("det_fold{}.csv", fold.fold)),
                    fold.metrics.curve.to_csv(),
                )?;
                std::fs::write(
                    out.join(format!("scores_fold{}.csv", fold.fold)),
                    fold.scores.to_csv(),
                )?;
            }
            std::fs::write(out.join("report.txt"), report.to_text())?;
            cfg.echo(out, true)?;
            println!(
                "mean_eer: {:.6}\nmean_auc: {:.6}",
                report.mean_eer, report.mean_auc
            );
        }
        other => {
            return Err(Error::Config(format!(
                "unknown protocol {other:?} (expected \"within\" or \"cross\")"
            )))
        }
    }
    Ok(())
}

fn params(pool: &str, head: &str, classes: usize, width: usize, height: usize) -> Result<()> {
    let pool: PoolKind = pool.parse()?;
    let head: HeadKind = head.parse()?;
    let report = classifier_param_report(head, classes, width, height)?;
    println!(
        "variant: pool={} head={} classes={classes} input={width}x{height}",
        pool.as_str(),
        head.as_str()
    );
    print!("{}", report.to_text());
    Ok(())
}
