//! Runs every stage on the 60-post mini corpus and prints the report.

use adlens::pipeline::{write_report, Pipeline};
use adlens::synth::{mini_spec, write_fixture};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let fx = write_fixture(dir.path(), &mini_spec())?;
    let report = Pipeline::from_config_file(&fx.config_path)?.run()?;
    write_report(std::io::stdout().lock(), &report)?;
    Ok(())
}
