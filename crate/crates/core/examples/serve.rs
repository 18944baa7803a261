//! Trains on the mini corpus and serves the HTTP API on 127.0.0.1:8080.
//!
//! curl localhost:8080/v1/health
//! curl -X POST localhost:8080/v1/whatif -H 'content-type: application/json' \
//!      -d '{"features": {...}, "deltas": {"mean_saturation": 10}}'

use adlens::pipeline::{Pipeline, ServingArtifacts};
use adlens::synth::{mini_spec, write_fixture};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let dir = tempfile::tempdir()?;
    let fx = write_fixture(dir.path(), &mini_spec())?;
    let pipeline = Pipeline::from_config_file(&fx.config_path)?;
    pipeline.run()?;
    let artifacts = ServingArtifacts::load(&pipeline.config().artifact_path())?;
    adlens::service::serve(artifacts, "127.0.0.1:8080".parse()?).await?;
    Ok(())
}
