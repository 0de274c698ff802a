//! `g2cr`: run verification campaigns from a config file.
//!
//! Exit status: 0 when every declared expectation holds, 1 on a verdict
//! mismatch, 2 on a usage error, 3 on a config error, 4 on a runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use g2cr::campaign::{run_campaign, Campaign, CampaignError, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "g2cr",
    version,
    about = "G2 structures, CR twistor spaces and instantons: verification campaigns"
)]
struct Args {
    /// Plain-text `key = value` config file (see docs/config.md).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Campaign to run, overriding the config.
    #[arg(long, value_name = "NAME", value_parser = clap::builder::PossibleValuesParser::new(Campaign::NAMES))]
    campaign: Option<String>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
    /// Output directory for CSV and summary files.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core). Never changes any reported number.
    #[arg(long, value_name = "K")]
    workers: Option<usize>,
}

fn configure(args: &Args) -> Result<RunConfig, CampaignError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &args.campaign {
        cfg.campaign = Campaign::parse(c)
            .ok_or_else(|| CampaignError::Usage(format!("unknown campaign `{c}`")))?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.samples {
        cfg.samples = n;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = configure(&args).and_then(|cfg| run_campaign(&cfg));
    match outcome {
        Ok(outcome) => {
            for r in &outcome.reports {
                for v in &r.verdicts {
                    let mark = if v.matches() { "ok" } else { "MISMATCH" };
                    let expected = v.expected.as_deref().unwrap_or("-");
                    println!(
                        "{:<14} {:<22} {:<20} expected {:<20} {mark}",
                        r.campaign.name(),
                        v.key,
                        v.value,
                        expected
                    );
                }
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if !outcome.all_match() {
                eprint!("{}", outcome.mismatch_diff());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("g2cr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
