//! Command-line pipeline: train teachers, calibrate them, distil students
//! in vanilla and calibrated mode, and report the comparison.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;

use calikd::distill::KdMode;
use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "calikd", version, about = "Calibrated knowledge distillation experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set train.max_epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output root directory.
    #[arg(long, env = "CALIKD_OUT", global = true)]
    pub out: Option<PathBuf>,
    /// Restrict to one seed (default: every configured seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Restrict to one teacher size (default: every configured size).
    #[arg(long, global = true)]
    pub size: Option<usize>,
    /// Distillation mode (default: both).
    #[arg(long, value_enum, global = true)]
    pub mode: Option<ModeArg>,
    /// Sweep worker count (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    Vanilla,
    Calibrated,
}

impl From<ModeArg> for KdMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Vanilla => KdMode::Vanilla,
            ModeArg::Calibrated => KdMode::Calibrated,
        }
    }
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Train teacher networks and store their held-out logits.
    TrainTeacher,
    /// Fit the temperature on validation logits; before/after table.
    Calibrate,
    /// Distil the student from a stored teacher.
    Distill,
    /// Every stage for every (size, seed) cell, then the report.
    Sweep,
    /// Aggregate a completed sweep into tables and a verdict.
    Report,
    /// Recompute stored metrics from stored logits and models.
    Verify,
}

/// Run one command; returns the text to print on success.
pub fn run(cli: &Cli) -> Result<String> {
    let g = &cli.global;
    let config = ExperimentConfig::resolve(g.config.as_deref(), &g.overrides)?;
    let out = g
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    let ctx = Context::new(config, &out);

    if let Some(seed) = g.seed {
        if !ctx.config.seeds.contains(&seed) {
            return Err(CliError::Validation(format!(
                "seed {seed} is not in seeds {:?}",
                ctx.config.seeds
            )));
        }
    }
    if let Some(size) = g.size {
        ctx.check_size(size)?;
    }
    let sizes: Vec<usize> = g.size.map_or_else(|| ctx.config.teacher_sizes.clone(), |s| vec![s]);
    let seeds: Vec<u64> = g.seed.map_or_else(|| ctx.config.seeds.clone(), |s| vec![s]);
    let modes: Vec<KdMode> = g.mode.map_or_else(|| KdMode::ALL.to_vec(), |m| vec![m.into()]);
    let cells = || sizes.iter().flat_map(|&s| seeds.iter().map(move |&seed| (s, seed)));

    let mut out = String::new();
    match cli.command {
        Command::TrainTeacher => {
            let splits = ctx.config.load_splits()?;
            ctx.write_config()?;
            for (size, seed) in cells() {
                let b = commands::train_teacher(&ctx, &splits, size, seed)?;
                out.push_str(&format!(
                    "teacher size={size} seed={seed} params={} train_loss={:.6} test_accuracy={:.4}\n",
                    b.parameters, b.train_final_loss, b.test_accuracy
                ));
            }
        }
        Command::Calibrate => {
            ctx.write_config()?;
            for (size, seed) in cells() {
                let r = commands::calibrate(&ctx, size, seed)?;
                let (header, rows) =
                    commands::calibration_table(&[("validation", r.validation), ("test", r.test)]);
                out.push_str(&format!("teacher size={size} seed={seed}\n"));
                out.push_str(&report::render_text(&header, &rows));
            }
        }
        Command::Distill => {
            let splits = ctx.config.load_splits()?;
            ctx.write_config()?;
            for (size, seed) in cells() {
                for &mode in &modes {
                    let r = commands::distill(&ctx, &splits, size, seed, mode)?;
                    out.push_str(&format!(
                        "student teacher={size} seed={seed} mode={mode} temperature={:.4} test_accuracy={:.4}\n",
                        r.effective_temperature, r.test_accuracy
                    ));
                }
            }
        }
        Command::Sweep => {
            let splits = ctx.config.load_splits()?;
            ctx.write_config()?;
            let jobs = g
                .jobs
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            out = commands::sweep(&ctx, &splits, jobs)?.render();
        }
        Command::Report => {
            out = commands::report(&ctx)?.render();
        }
        Command::Verify => {
            let splits = ctx.config.load_splits()?;
            let s = commands::verify(&ctx, &splits)?;
            out = format!(
                "verified teachers={} calibrations={} students={} report={}\n",
                s.teachers, s.calibrations, s.students, s.report_checked
            );
        }
    }
    Ok(out)
}
