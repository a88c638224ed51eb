//! `ascnet eval`: recording-level accuracy, optionally with product fusion.

use std::path::PathBuf;

use anyhow::{bail, Result};
use ascnet::audio::Split;
use ascnet::checkpoint::Checkpoint;
use ascnet::config::RunConfig;
use ascnet::frontend::FrontendKind;
use ascnet::nn::Network;
use ascnet::train::{evaluate, Branch, EvalOptions, EvalReport, RecordingFeatures};
use ascnet::Error;
use log::info;

use crate::run::{cached_features, load_config, load_entries, write_file, Metadata};
use crate::train::effective_config;
use crate::{expand_branches, EvalArgs};

fn load_branch(cfg: &RunConfig, kind: FrontendKind, explicit: Option<&PathBuf>) -> Result<Network<f32>> {
    let path = explicit
        .cloned()
        .unwrap_or_else(|| cfg.run_dir(kind).join("checkpoint.asck"));
    if !path.exists() {
        bail!(Error::Config(format!(
            "no checkpoint for branch {kind} at {}; train it with `ascnet train --branch {kind}`",
            path.display()
        )));
    }
    let ck = Checkpoint::load(&path)?;
    let expected = cfg.frontend_for(kind);
    if ck.header.frontend != expected {
        bail!(Error::Config(format!(
            "{} was trained on {} features, not the configured {kind} front end",
            path.display(),
            ck.header.frontend.kind
        )));
    }
    if ck.header.model.class_count != cfg.labels.len() {
        bail!(Error::Config(format!(
            "{} predicts {} classes, config lists {}",
            path.display(),
            ck.header.model.class_count,
            cfg.labels.len()
        )));
    }
    info!("{kind}: {}", path.display());
    Ok(ck.to_network()?)
}

pub fn run(args: EvalArgs) -> Result<()> {
    let meta = Metadata::start("eval");
    let base = load_config(&args.config)?;
    let kinds = expand_branches(&args.branches);
    if args.fuse && kinds.len() < 2 {
        bail!(Error::Config(format!("--fuse needs at least 2 branches, got {}", kinds.len())));
    }
    if !args.checkpoints.is_empty() && args.checkpoints.len() != kinds.len() {
        bail!(Error::Config(format!(
            "{} checkpoints given for {} branches",
            args.checkpoints.len(),
            kinds.len()
        )));
    }
    let cfg = effective_config(base, kinds[0], args.epochs)?;
    let models = kinds
        .iter()
        .enumerate()
        .map(|(i, &k)| load_branch(&cfg.for_branch(k), k, args.checkpoints.get(i)))
        .collect::<Result<Vec<_>>>()?;

    let entries = load_entries(&cfg, &cfg.manifest_path())?;
    let recordings = entries
        .iter()
        .filter(|e| e.split == Split::Eval)
        .map(|e| {
            let id = e.id();
            let branches = kinds
                .iter()
                .map(|&k| cached_features(&cfg, &args.config, k, &id))
                .collect::<Result<Vec<_>>>()?;
            Ok(RecordingFeatures {
                label: e.label_index(&cfg.labels).expect("manifest labels validated"),
                device: e.device_id.clone(),
                id,
                branches,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if recordings.is_empty() {
        bail!(Error::Validation("manifest has no evaluation recordings".into()));
    }

    let opts = |fuse| EvalOptions {
        patch_frames: cfg.patches.frames,
        overlap: cfg.patches.overlap,
        fuse,
        batch_size: 64,
    };
    let out_root = args.out.clone().unwrap_or_else(|| cfg.reports_dir());
    let mut jobs: Vec<(String, Vec<usize>, bool)> = Vec::new();
    if args.fuse {
        let name = kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("+");
        jobs.push((format!("fused-{name}"), (0..kinds.len()).collect(), true));
    } else {
        for (i, k) in kinds.iter().enumerate() {
            jobs.push((k.as_str().to_string(), vec![i], false));
        }
    }
    for (name, idx, fuse) in jobs {
        let branches: Vec<Branch<'_>> = idx
            .iter()
            .map(|&i| Branch {
                name: kinds[i].as_str().to_string(),
                model: &models[i],
            })
            .collect();
        let subset: Vec<RecordingFeatures> = recordings
            .iter()
            .map(|r| RecordingFeatures {
                branches: idx.iter().map(|&i| r.branches[i].clone()).collect(),
                ..r.clone()
            })
            .collect();
        let report: EvalReport = evaluate(&branches, &subset, &cfg.labels, &opts(fuse))?;
        let dir = out_root.join(&name);
        write_file(&dir.join("report.json"), report.to_json())?;
        write_file(&dir.join("report.txt"), report.to_text())?;
        meta.write(&dir)?;
        info!("{name}: {:.1}% over {} recordings -> {}", report.accuracy, report.total, dir.display());
        print!("{}", report.to_text());
    }
    Ok(())
}
