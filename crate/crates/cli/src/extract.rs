//! `ascnet extract`: audio → cached spectrograms, one file per recording and front end.

use std::path::Path;

use anyhow::Result;
use ascnet::audio::{read_wav, ManifestEntry};
use ascnet::frontend::{read_cached, write_cached, Frontend};
use log::{error, info};
use rayon::prelude::*;

use crate::run::{audio_path, load_config, load_entries};
use crate::{expand_branches, ExtractArgs};

enum Status {
    Computed,
    Skipped,
}

fn extract_one(
    frontend: &Frontend,
    dir: &Path,
    manifest: &Path,
    entry: &ManifestEntry,
) -> ascnet::Result<Status> {
    let id = entry.id();
    if read_cached(dir, &id, frontend.config())?.is_some() {
        return Ok(Status::Skipped);
    }
    let clip = read_wav(audio_path(manifest, entry))?;
    let spec = frontend.process(&clip)?;
    write_cached(dir, &id, &spec, frontend.config())?;
    Ok(Status::Computed)
}

pub fn run(args: ExtractArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let manifest = args.manifest.clone().unwrap_or_else(|| cfg.manifest_path());
    let entries = load_entries(&cfg, &manifest)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build()?;

    let mut failures: Vec<(String, ascnet::Error)> = Vec::new();
    for kind in expand_branches(&args.frontends) {
        let frontend = Frontend::new(cfg.frontend_for(kind))?;
        let dir = match &args.out {
            Some(out) => out.join(kind.as_str()),
            None => cfg.features_dir(kind),
        };
        let results: Vec<ascnet::Result<Status>> = pool.install(|| {
            entries
                .par_iter()
                .map(|e| extract_one(&frontend, &dir, &manifest, e))
                .collect()
        });
        let (mut computed, mut skipped) = (0, 0);
        for (entry, r) in entries.iter().zip(results) {
            match r {
                Ok(Status::Computed) => computed += 1,
                Ok(Status::Skipped) => skipped += 1,
                Err(e) => {
                    error!("{kind}: {}: {e}", entry.path.display());
                    failures.push((format!("{kind}:{}", entry.id()), e));
                }
            }
        }
        info!(
            "{kind}: {computed} computed, {skipped} up to date, {} failed -> {}",
            entries.len() - computed - skipped,
            dir.display()
        );
    }
    let failed = failures.len();
    match failures.into_iter().next() {
        None => Ok(()),
        Some((first, err)) => Err(anyhow::Error::new(err)
            .context(format!("{failed} extraction(s) failed, first: {first}"))),
    }
}
