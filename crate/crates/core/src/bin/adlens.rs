use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adlens::aesthetics::{decode_image, extract_features};
use adlens::pipeline::{Pipeline, PipelineError, ServingArtifacts, Stage};
use adlens::tuner::{suggest, TunerParams};

#[derive(Parser)]
#[command(name = "adlens", version, about = "Engagement scoring and aesthetic tuning for promotional images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the corpus and normalize engagement per page.
    Ingest(ConfigArg),
    /// Label biases and fit the per-bias transforms.
    Debias(ConfigArg),
    /// Extract aesthetic features for every labeled post.
    Features(ConfigArg),
    /// Train the regressor and classifiers.
    Train(ConfigArg),
    /// Score the held-out split.
    Evaluate(ConfigArg),
    /// Run every stage in order and print the report.
    Run(ConfigArg),
    /// Suggest feature changes for one image.
    Tune {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value = "adlens.json")]
        config: PathBuf,
    },
    /// Serve the HTTP API over the trained artifacts.
    Serve(ConfigArg),
}

#[derive(clap::Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

fn stage(cfg: &ConfigArg, s: Stage) -> Result<(), PipelineError> {
    let p = Pipeline::from_config_file(&cfg.config)?;
    let counts = p.run_stage(s)?;
    println!("{}", serde_json::to_string_pretty(&counts).expect("serializable"));
    Ok(())
}

fn serving(p: &Pipeline) -> Result<ServingArtifacts, PipelineError> {
    let a = ServingArtifacts::load(&p.config().artifact_path())?;
    if a.registry.hash() != p.registry().hash() {
        return Err(PipelineError::Data {
            stage: Stage::Evaluate,
            message: "served registry does not match the configuration".into(),
        });
    }
    Ok(a)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Ingest(c) => stage(&c, Stage::Ingest),
        Command::Debias(c) => stage(&c, Stage::Debias),
        Command::Features(c) => stage(&c, Stage::Features),
        Command::Train(c) => stage(&c, Stage::Train),
        Command::Evaluate(c) => stage(&c, Stage::Evaluate),
        Command::Run(c) => {
            let report = Pipeline::from_config_file(&c.config)?.run()?;
            adlens::pipeline::write_report(std::io::stdout().lock(), &report).map_err(|e| PipelineError::Stage {
                stage: Stage::Evaluate,
                message: e.to_string(),
            })
        }
        Command::Tune { image, k, s, t, config } => {
            let p = Pipeline::from_config_file(&config)?;
            let a = serving(&p)?;
            let data = |e: String| PipelineError::Data {
                stage: Stage::Features,
                message: e,
            };
            let bytes = std::fs::read(&image).map_err(|e| data(format!("{}: {e}", image.display())))?;
            let img = decode_image(&bytes).map_err(|e| data(e.to_string()))?;
            let x = extract_features(&img, &a.registry).map_err(|e| data(e.to_string()))?;
            let d = &p.config().tuner;
            let params = TunerParams {
                k: k.unwrap_or(d.k),
                s: s.unwrap_or(d.s),
                t: t.unwrap_or(d.t),
                ..d.clone()
            };
            let out = suggest(&a.model, &a.registry, &x, &params).map_err(|e| data(e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
            Ok(())
        }
        Command::Serve(c) => {
            let p = Pipeline::from_config_file(&c.config)?;
            let a = serving(&p)?;
            let svc = &p.config().service;
            let addr = format!("{}:{}", svc.bind, svc.port);
            let addr = addr.parse().map_err(|e| PipelineError::Config(adlens::config::ConfigError::OutOfRange {
                field: "service.bind".into(),
                message: format!("{addr}: {e}"),
            }))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| PipelineError::Stage {
                stage: Stage::Evaluate,
                message: e.to_string(),
            })?;
            rt.block_on(adlens::service::serve(a, addr)).map_err(|e| PipelineError::Stage {
                stage: Stage::Evaluate,
                message: e.to_string(),
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
