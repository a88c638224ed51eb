//! `ascnet train`: fit one branch on cached training-split features.

use anyhow::{bail, Result};
use ascnet::audio::Split;
use ascnet::checkpoint::{Checkpoint, CheckpointHeader};
use ascnet::cnn7::build_cnn7;
use ascnet::config::RunConfig;
use ascnet::frontend::{split_patches, FrontendKind, N_CHANNELS};
use ascnet::train::{patch_accuracy, train, PatchDataset};
use log::info;
use serde_json::json;

use crate::run::{cached_features, load_config, load_entries, write_file, Metadata};
use crate::TrainArgs;

/// The configuration a branch actually trains with, after command-line overrides.
pub fn effective_config(mut cfg: RunConfig, kind: FrontendKind, epochs: Option<usize>) -> Result<RunConfig> {
    if let Some(e) = epochs {
        cfg.training.epochs = e;
    }
    cfg.validate()?;
    Ok(cfg.for_branch(kind))
}

pub fn run(args: TrainArgs) -> Result<()> {
    let kinds = args.branch.kinds();
    let [kind] = kinds[..] else {
        bail!(ascnet::Error::Config("train takes exactly one branch".into()));
    };
    let meta = Metadata::start("train");
    let cfg = effective_config(load_config(&args.config)?, kind, args.epochs)?;
    let entries = load_entries(&cfg, &cfg.manifest_path())?;
    let shape = [cfg.frontend.n_bins, cfg.patches.frames, N_CHANNELS];
    let mut data = PatchDataset::new(shape, cfg.labels.len());
    for e in entries.iter().filter(|e| e.split == Split::Train) {
        let spec = cached_features(&cfg, &args.config, kind, &e.id())?;
        let patches = split_patches(&spec, &e.id(), cfg.patches.frames, cfg.patches.overlap)?;
        let label = e.label_index(&cfg.labels).expect("manifest labels validated");
        data.push_patches(patches, label)?;
    }
    if data.is_empty() {
        bail!(ascnet::Error::Validation("manifest has no training recordings".into()));
    }

    let model = build_cnn7(cfg.model.variant, cfg.labels.len())?.with_input_shape(shape)?;
    let mut net = model.network::<f32>(cfg.training.seed)?;
    let hash = cfg.hash();
    let dir = cfg.run_dir(kind);
    info!(
        "training {} on {kind}: {} patches, {} epochs -> {}",
        cfg.model.variant,
        data.len(),
        cfg.training.epochs,
        dir.display()
    );
    let curve = train(
        &mut net,
        &data,
        &cfg.training,
        &cfg.augment.mixup,
        &cfg.augment.spec_augment,
        |e| info!("epoch {:>3}  loss {:.4}  acc {:.3}", e.epoch, e.mean_loss, e.train_acc),
    )?;
    let accuracy = patch_accuracy(&net, &data)?;
    info!("final training-patch accuracy {:.1}%", 100.0 * accuracy);

    let header = CheckpointHeader {
        model,
        frontend: cfg.frontend.clone(),
        config_hash: hash.clone(),
    };
    let checkpoint = Checkpoint::from_network(header, &net);
    write_file(&dir.join("checkpoint.asck"), checkpoint.encode())?;
    write_file(&dir.join("loss.csv"), curve.to_csv())?;
    write_file(&dir.join("config.toml"), cfg.to_toml())?;
    let summary = json!({
        "branch": kind,
        "config_hash": hash,
        "patches": data.len(),
        "epochs": cfg.training.epochs,
        "final_loss": curve.last().map(|e| e.mean_loss),
        "train_patch_accuracy": accuracy,
        "trainable_params": net.trainable_count(),
    });
    write_file(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    meta.write(&dir)?;
    println!("{}", dir.display());
    Ok(())
}
