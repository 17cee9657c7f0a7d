//! A small sample-size sweep written as CSV to standard output.

use deepconv::harness::{run_experiment, write_experiment_csv, ExperimentConfig};

fn main() -> deepconv::Result<()> {
    let cfg = ExperimentConfig { n_grid: vec![100, 300], seeds: vec![0, 1, 2], epochs: 100, ..ExperimentConfig::desk(10) };
    let res = run_experiment(&cfg)?;
    write_experiment_csv(&res, std::io::stdout().lock())?;
    Ok(())
}
