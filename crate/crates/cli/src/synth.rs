//! `ascnet synth-dataset`: write the synthetic corpus.

use anyhow::Result;
use ascnet::synth::{write_corpus, SynthConfig};
use log::info;

use crate::SynthArgs;

pub fn run(args: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        train_clips_per_class: args.train_per_class,
        eval_clips_per_class: args.eval_per_class,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let corpus = write_corpus(&args.out, &cfg)?;
    info!("{} clips -> {}", corpus.clips, args.out.display());
    println!("{}", corpus.config.display());
    Ok(())
}
