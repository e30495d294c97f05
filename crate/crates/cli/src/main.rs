mod args;

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use serde::Serialize;

use args::{Cli, Command, Format, SynthKind};
use senti::corpus::write_dataset;
use senti::eval::render_metrics_text;
use senti::pipeline::{self, RunConfig, TrainSummary, OUTPUT_DIR_ENV};
use senti::synthetic::{keyword_corpus, long_range_corpus, LongRangeConfig};
use senti::train;

fn main() -> ExitCode {
    let cli = Cli::parse_from(args::normalize_flags(std::env::args_os()));
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("senti: error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

/// The error chain joined with `: `, skipping causes that the previous
/// message already ends with.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) -> Result<()> {
    let out = match format {
        Format::Json => serde_json::to_string_pretty(value)? + "\n",
        Format::Text => text(),
    };
    std::io::stdout().lock().write_all(out.as_bytes())?;
    Ok(())
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let env = std::env::var(OUTPUT_DIR_ENV).ok();
    Ok(RunConfig::resolve(
        cli.config.as_deref(),
        env.as_deref(),
        cli.overrides.to_map(),
    )?)
}

fn default_model_dir(config: &RunConfig, given: Option<PathBuf>) -> PathBuf {
    given.unwrap_or_else(|| {
        config
            .output_dir
            .join(pipeline::model_dir_name(config.model))
    })
}

fn run(cli: Cli) -> Result<()> {
    let format = cli.format;
    let mut config = resolve(&cli)?;
    match cli.command {
        Command::Preprocess { input } => {
            if let Some(p) = input {
                config.train_path = Some(p);
            }
            let stats = pipeline::run_preprocess(&config)?;
            emit(format, &stats, || stats.to_text())
        }
        Command::TrainEmbeddings => {
            let s = pipeline::run_train_embeddings(&config)?;
            emit(format, &s, || {
                format!(
                    "embeddings: {} rows x {} dims ({}), sha256 {}\n",
                    s.rows,
                    s.dim,
                    if s.pretrained { "skip-gram" } else { "random" },
                    s.sha256
                )
            })
        }
        Command::Train => {
            let s = pipeline::run_train(&config)?;
            emit(format, &s, || train_text(&s))
        }
        Command::Evaluate { model_dir, input } => {
            let dir = default_model_dir(&config, model_dir);
            let input = input
                .or(config.test_path.clone())
                .context("no labeled input: pass --input or --test-path")?;
            let report = pipeline::run_evaluate(&dir, &input, config.averaging)?;
            emit(format, &report, || render_metrics_text(&report))
        }
        Command::Predict { model_dir, text } => {
            let dir = default_model_dir(&config, model_dir);
            let ckpt =
                train::restore(&dir).with_context(|| format!("loading {}", dir.display()))?;
            match text {
                Some(t) => {
                    let p = pipeline::predict_text(&ckpt, &t)?;
                    emit(format, &p, || p.to_text())
                }
                None => {
                    let stdin = std::io::stdin();
                    let mut any = false;
                    for line in stdin.lock().lines() {
                        let line = line.context("reading stdin")?;
                        if line.trim().is_empty() {
                            continue;
                        }
                        any = true;
                        let p = pipeline::predict_text(&ckpt, &line)?;
                        match format {
                            Format::Json => println!("{}", serde_json::to_string(&p)?),
                            Format::Text => print!("{}", p.to_text()),
                        }
                    }
                    if !any {
                        bail!("no text given on the command line or stdin");
                    }
                    Ok(())
                }
            }
        }
        Command::Compare => {
            let report = pipeline::run_compare(&config)?;
            match format {
                Format::Json => println!("{}", report.to_json()),
                Format::Text => print!("{}", report.to_text()),
            }
            Ok(())
        }
        Command::Synth {
            kind,
            count,
            length,
            output,
        } => {
            let records = match kind {
                SynthKind::Keyword => keyword_corpus(count, length, config.seed),
                SynthKind::LongRange => {
                    long_range_corpus(count, &LongRangeConfig::default(), config.seed)
                }
            };
            let file = std::fs::File::create(&output)
                .with_context(|| format!("creating {}", output.display()))?;
            write_dataset(std::io::BufWriter::new(file), &records)?;
            if kind == SynthKind::LongRange {
                log::warn!(
                    "use --tokenizer whitespace --maxlen {} to keep every token",
                    LongRangeConfig::default().max_len()
                );
            }
            Ok(())
        }
    }
}

fn train_text(s: &TrainSummary) -> String {
    let mut out = format!("model: {} -> {}\n", s.kind.display_name(), s.bundle);
    if let Some(r) = &s.training {
        for e in &r.epochs {
            let _ = writeln!(
                out,
                "epoch {:>3}  loss {:.4}  train accuracy {:.4}  clipped {}/{}",
                e.epoch, e.mean_loss, e.accuracy, e.clipped_steps, e.steps
            );
        }
    }
    if let Some(m) = &s.evaluation {
        out.push_str(&render_metrics_text(m));
    }
    out
}
