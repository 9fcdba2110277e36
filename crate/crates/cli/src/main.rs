// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use fallcascade_cli::{commands, RunConfig, DEFAULT_OUT, OUT_ENV};

#[derive(Parser)]
#[command(name = "fallcascade", version, about = "Fall detection over an edge-to-cloud escalation cascade")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the experiment seed (the dataset seed for `synth`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic dataset as trace files plus a manifest.
    Synth,
    /// Run the leave-one-subject-out evaluation and write reports.
    Run,
    /// Compare report B against baseline report A.
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        #[arg(long)]
        variant_a: Option<String>,
        #[arg(long)]
        variant_b: Option<String>,
    },
    /// Check the configuration and the files it references.
    Validate,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    let mut cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    match cli.command {
        Command::Synth => {
            let s = commands::synth(&cfg, cli.seed, &out)?;
            println!(
                "wrote {} traces ({} falls, {} ADLs) from {} subjects",
                s.traces, s.falls, s.adls, s.subjects
            );
            println!("manifest {}", s.manifest.display());
        }
        Command::Run => {
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let s = commands::run(&cfg, &out)?;
            for v in &s.report.variants {
                let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |x| format!("{x:.4}"));
                println!(
                    "{:<14} acc {} f1 {} student acc {} top-layer windows {}",
                    v.name,
                    fmt(v.pooled.acc),
                    fmt(v.pooled.f1),
                    fmt(v.student.acc),
                    v.routing.top_volume()
                );
            }
            println!("report {}", s.report_path.display());
            println!("digest {}", s.digest);
        }
        Command::Compare {
            report_a,
            report_b,
            variant_a,
            variant_b,
        } => {
            let c = commands::compare(&report_a, &report_b, variant_a.as_deref(), variant_b.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&c)?);
        }
        Command::Validate => {
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            cfg.validate()?;
            println!("config ok");
        }
    }
    Ok(())
}
