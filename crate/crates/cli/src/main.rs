use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use forgeset_cli::experiments::{
    cmd_coreset, cmd_mixture, cmd_oracle, cmd_report, cmd_select, cmd_transfer, cmd_unlearn_eval,
};
use forgeset_cli::workspace::direction_name;
use forgeset_cli::{CliError, CliResult, ExperimentConfig, Overrides, Run};

/// Worst-case forget set selection and unlearning evaluation.
#[derive(Parser)]
#[command(name = "forgeset", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (must exist).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run the oracle even when it exceeds the subset guard.
    #[arg(long, global = true)]
    force_guard: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Write the train/test datasets.
    Gen,
    /// Pretrain the model.
    Train,
    /// Worst/easiest selections and random baseline masks.
    Select,
    /// Unlearn and evaluate every method on every mask kind.
    UnlearnEval,
    /// Exhaustive Retrain ranking of all budget-sized subsets.
    Oracle,
    /// Worst-case sets transferred across models.
    Transfer,
    /// Training on the complement of the worst-case set.
    Coreset,
    /// Worst-case/random mixtures.
    Mixture,
    /// The full pipeline and summary.md.
    Report,
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("FORGESET_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("FORGESET_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn execute(cli: &Cli) -> CliResult<()> {
    init_threads()?;
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = cfg.apply(&Overrides { seed: cli.seed, out: cli.out.clone() });
    let run = Run::open(cfg, cli.force_guard)?;
    let out = run.out.display().to_string();
    match cli.verb {
        Verb::Gen => println!("wrote {out}/train.csv ({} rows) and {out}/test.csv ({} rows)", run.train.len(), run.test.len()),
        Verb::Train => {
            run.pretrained()?;
            println!("wrote {out}/model.ckpt");
        }
        Verb::Select => {
            let s = cmd_select(&run)?;
            for sel in &s.selections {
                println!("{}: {} samples -> {out}/mask_{}.txt", direction_name(sel.direction), sel.sample_mask.len(), direction_name(sel.direction));
            }
            println!("random: {} masks -> {out}/masks/", s.random.len());
        }
        Verb::UnlearnEval => {
            cmd_unlearn_eval(&run)?;
            print!("{}", std::fs::read_to_string(run.path("report.md")).unwrap_or_default());
        }
        Verb::Oracle => {
            let o = cmd_oracle(&run)?;
            println!("{} subsets ranked -> {out}/oracle.csv (min UA {:.2})", o.summary.subsets, o.summary.min_ua);
            if let (Some(ua), Some(f)) = (o.summary.selected_ua, o.summary.fraction_below) {
                println!("selected worst-case set: UA {ua:.2}, {:.2}% of subsets strictly lower", 100.0 * f);
            }
        }
        Verb::Transfer => {
            cmd_transfer(&run)?;
            print!("{}", std::fs::read_to_string(run.path("transfer.md")).unwrap_or_default());
        }
        Verb::Coreset => {
            cmd_coreset(&run)?;
            print!("{}", std::fs::read_to_string(run.path("coreset.md")).unwrap_or_default());
        }
        Verb::Mixture => {
            cmd_mixture(&run)?;
            print!("{}", std::fs::read_to_string(run.path("mixture.md")).unwrap_or_default());
        }
        Verb::Report => {
            cmd_report(&run)?;
            println!("wrote {out}/summary.md");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("forgeset: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
