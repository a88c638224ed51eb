//! `ascnet audit`: parameter ledger and size budget check.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use ascnet::audit::{count_params, ensemble_size, BnConvention};
use ascnet::checkpoint::Checkpoint;
use ascnet::cnn7::build_cnn7;
use ascnet::Error;
use serde_json::json;

use crate::run::write_file;
use crate::AuditArgs;

pub fn run(args: AuditArgs) -> Result<()> {
    if args.ensemble == 0 {
        bail!(Error::Validation("--ensemble must be at least 1".into()));
    }
    let (spec, stored) = match (&args.variant, &args.checkpoint) {
        (Some(v), None) => (build_cnn7(*v, args.classes)?, None),
        (None, Some(path)) => {
            let ck = Checkpoint::load(path)?;
            let count = ck.trainable_count();
            (ck.header.model, Some(count))
        }
        _ => bail!(Error::Config("give exactly one of --variant or --checkpoint".into())),
    };
    let report = count_params(&spec)?;
    if let Some(stored) = stored {
        if stored != report.with_bn.params {
            bail!(Error::Validation(format!(
                "checkpoint stores {stored} trainable values but the audit counts {}",
                report.with_bn.params
            )));
        }
    }

    let convention: BnConvention = args.bn.into();
    let reports = vec![report.clone(); args.ensemble];
    let total_kb = ensemble_size(&reports, convention);
    let mut text = report.to_text();
    if args.ensemble > 1 {
        let _ = writeln!(
            text,
            "ensemble of {}: {:.2} KB with BN, {:.2} KB without BN",
            args.ensemble,
            ensemble_size(&reports, BnConvention::Inclusive),
            ensemble_size(&reports, BnConvention::Exclusive)
        );
    }
    let json = serde_json::to_string_pretty(&json!({
        "report": report,
        "ensemble": args.ensemble,
        "convention": convention,
        "total_kb": total_kb,
        "max_kb": args.assert_max_kb,
    }))? + "\n";

    if let Some(out) = &args.out {
        write_file(&out.join("audit.json"), &json)?;
        write_file(&out.join("audit.txt"), &text)?;
    }
    if args.json {
        print!("{json}");
    } else {
        print!("{text}");
    }
    if let Some(max) = args.assert_max_kb {
        let tag = match convention {
            BnConvention::Inclusive => "with BN",
            BnConvention::Exclusive => "without BN",
        };
        if total_kb > max {
            bail!(Error::Validation(format!("size {total_kb:.2} KB ({tag}) exceeds {max} KB")));
        }
        log::info!("size {total_kb:.2} KB ({tag}) is within {max} KB");
    }
    Ok(())
}
