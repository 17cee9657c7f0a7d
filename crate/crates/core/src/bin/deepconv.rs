//! Command-line front end. Exit codes: 0 success, 2 validation error,
//! 3 numerical failure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use deepconv::capacity::{bound_report, BoundInputs};
use deepconv::dataset::Dataset;
use deepconv::dcnn::Dcnn;
use deepconv::deepen::{interpolate_with, DeepenOptions};
use deepconv::harness::{
    run_experiment, run_pipeline, simulate, sweep_depth, write_experiment_csv, ExperimentConfig, PipelineConfig, SimSpec,
    SIM_M,
};
use deepconv::trainer::{fit, init_net, TrainConfig};
use deepconv::{Error, Result};

#[derive(Parser)]
#[command(name = "deepconv", version, about = "Deep convolutional networks: training, deepening and capacity bounds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a simulated training and test sample as CSV.
    Simulate {
        #[arg(long, default_value_t = 10)]
        d: usize,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        test_n: usize,
        #[arg(long, default_value_t = 0.1)]
        noise_sd: f64,
        #[arg(long, default_value_t = 10.0)]
        halfwidth: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Test CSV path; defaults to the training path with a `.test.csv` suffix.
        #[arg(long)]
        test_out: Option<PathBuf>,
    },
    /// Train a network by least squares.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 2)]
        filter_len: usize,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Label bound `M` used for truncation.
        #[arg(long, default_value_t = SIM_M)]
        m: f64,
        /// Give every bias entry its own parameter.
        #[arg(long)]
        untied: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trained network JSON.
        #[arg(long, visible_alias = "out-net")]
        out: PathBuf,
        /// Per-epoch training MSE as CSV.
        #[arg(long)]
        out_report: Option<PathBuf>,
    },
    /// Deepen a teacher into an interpolating student.
    Deepen {
        #[arg(long)]
        teacher: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 4)]
        filter_len: usize,
        #[arg(long, default_value_t = 0.5)]
        eps_frac: f64,
        #[arg(long)]
        n_rep: Option<usize>,
        #[arg(long, default_value_t = SIM_M)]
        m: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Student network JSON.
        #[arg(long)]
        out: PathBuf,
        /// Plan and construction report JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate pseudo-dimension, covering and rate bounds.
    Bounds {
        #[arg(long)]
        j: usize,
        #[arg(long, default_value_t = 2)]
        s: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = SIM_M)]
        m: f64,
        /// Accepted for uniformity; the bounds are deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep sample sizes and write test RMSE as CSV.
    Experiment {
        #[arg(long, default_value_t = 10)]
        d: usize,
        /// Comma-separated sample sizes; defaults to the desk grid.
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
        /// Use the full grid up to n = 6000.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        epochs: Option<usize>,
        /// Base seed; runs use `seed .. seed + seeds`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a teacher, deepen it, and compare both.
    Pipeline {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        alpha: f64,
        #[arg(long, default_value_t = 4)]
        s: usize,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report JSON.
        #[arg(long)]
        out: PathBuf,
        /// Optional student network JSON.
        #[arg(long)]
        student_out: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_data(path: &Path, m: f64) -> Result<Dataset> {
    Dataset::read_csv(BufReader::new(File::open(path)?), m)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Simulate { d, n, test_n, noise_sd, halfwidth, seed, out, test_out } => {
            let spec = SimSpec { d, n, test_n, noise_sd, domain_halfwidth: halfwidth, seed };
            let (train, test) = simulate(&spec)?;
            let test_out = test_out.unwrap_or_else(|| out.with_extension("test.csv"));
            train.write_csv(create(&out)?)?;
            test.write_csv(create(&test_out)?)?;
            println!("wrote {} and {}", out.display(), test_out.display());
        }
        Cmd::Train { data, test, depth, filter_len, epochs, lr, m, untied, seed, out, out_report } => {
            let train = read_data(&data, m)?;
            let test = read_data(&test, m)?;
            let depth = depth.unwrap_or_else(|| sweep_depth(train.len()));
            let cfg = TrainConfig { step_size: lr, tied_bias: !untied, ..TrainConfig::for_sample(train.len(), epochs, seed) };
            let net = init_net(train.dim(), depth, filter_len, &cfg, Some(m))?;
            let (net, rep) = fit(&net, &train, &test, &cfg)?;
            let mut w = create(&out)?;
            w.write_all(net.to_json()?.as_bytes())?;
            w.flush()?;
            if let Some(p) = out_report {
                let mut w = csv::Writer::from_writer(create(&p)?);
                w.write_record(["epoch", "train_mse"])?;
                for (e, v) in rep.train_mse.iter().enumerate() {
                    w.write_record([(e + 1).to_string(), format!("{v:.12e}")])?;
                }
                w.flush()?;
            }
            println!("test_rmse {:.6} final_train_mse {:.6}", rep.test_rmse, rep.train_mse.last().copied().unwrap_or(f64::NAN));
        }
        Cmd::Deepen { teacher, data, filter_len, eps_frac, n_rep, m, seed, out, report } => {
            let teacher = Dcnn::from_json(&std::fs::read_to_string(&teacher)?)?;
            let data = read_data(&data, m)?;
            let opts = DeepenOptions { eps_frac, n_rep, ..DeepenOptions::new(filter_len, seed) };
            let res = interpolate_with(&teacher, &data, &opts)?;
            let mut w = create(&out)?;
            w.write_all(res.student.to_json()?.as_bytes())?;
            w.flush()?;
            if let Some(p) = report {
                write_json(&p, &serde_json::json!({ "plan": res.plan, "report": res.report }))?;
            }
            println!(
                "student depth {} (J1 {}, J2 {}, J3 {}), final width {}, added parameters {}",
                res.student.depth(),
                res.report.j1,
                res.report.j2,
                res.report.j3,
                res.report.final_width,
                res.report.added_params.total()
            );
        }
        Cmd::Bounds { j, s, d, n, delta, c0, c, m, seed: _, out } => {
            let rep = bound_report(&BoundInputs { j, s, d, n, delta, c0, c, m })?;
            match out {
                Some(p) => write_json(&p, &rep)?,
                None => println!("{}", serde_json::to_string_pretty(&rep)?),
            }
        }
        Cmd::Experiment { d, n_grid, full, seeds, epochs, seed, out } => {
            let mut cfg = if full { ExperimentConfig::full(d) } else { ExperimentConfig::desk(d) };
            if let Some(g) = n_grid {
                cfg.n_grid = g;
            }
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            cfg.seeds = (seed..seed + seeds).collect();
            let res = run_experiment(&cfg)?;
            write_experiment_csv(&res, create(&out)?)?;
            for s in &res.summaries {
                println!("n {:>5}  J {:>2}  mean_rmse {:.4}  sd {:.4}", s.n, s.depth, s.mean_rmse, s.sd_rmse);
            }
        }
        Cmd::Pipeline { d, n, alpha, s, epochs, seed, out, student_out } => {
            let mut cfg = PipelineConfig { s, ..PipelineConfig::new(d, n, alpha, seed) };
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            let (rep, _, student) = run_pipeline(&cfg)?;
            write_json(&out, &rep)?;
            if let Some(p) = student_out {
                let mut w = create(&p)?;
                w.write_all(student.to_json()?.as_bytes())?;
                w.flush()?;
            }
            println!(
                "teacher rmse {:.4}, student rmse {:.4}, interpolation residual {:.2e}, student depth {}",
                rep.teacher_test_rmse, rep.student_test_rmse, rep.max_interpolation_residual, rep.student_depth
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
