//! Simulated regression data, sample-size sweeps with CSV output, and the
//! train-then-deepen pipeline.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::capacity::{bound_report, BoundInputs, BoundReport};
use crate::dataset::Dataset;
use crate::dcnn::Dcnn;
use crate::deepen::{interpolate_with, DeepenOptions, DeepenReport};
use crate::error::{Error, Result};
use crate::seqconv::FilterSeq;
use crate::trainer::{fit, init_net, rmse, TrainConfig};

/// Label bound of the simulated regression function.
pub const SIM_M: f64 = 2.0;
/// First line of every experiment CSV.
pub const EXPERIMENT_CSV_VERSION: &str = "# deepconv experiment csv v1";

/// Parameters of the simulated sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub d: usize,
    pub n: usize,
    pub test_n: usize,
    pub noise_sd: f64,
    pub domain_halfwidth: f64,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec { d: 10, n: 500, test_n: 2000, noise_sd: 0.1, domain_halfwidth: 10.0, seed: 0 }
    }
}

/// `sin(‖x‖₂⁴) + cos(‖x‖₂⁴)`.
pub fn regression_fn(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let t = r2 * r2;
    t.sin() + t.cos()
}

/// Derives an independent seed for stream `tag` of grid point `(seed, n)`.
pub fn split_seed(seed: u64, n: usize, tag: u64) -> u64 {
    let mut z = seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ tag.wrapping_mul(0xd1b5_4a32_d192_ed03);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Training sample with Gaussian label noise (clipped to `±M`) and a
/// noiseless test sample, inputs uniform on `[−h, h]^d`.
pub fn simulate(spec: &SimSpec) -> Result<(Dataset, Dataset)> {
    if spec.d == 0 || spec.n == 0 || spec.test_n == 0 {
        return Err(Error::invalid("d, n and test_n must be positive"));
    }
    if !(spec.noise_sd >= 0.0) || !(spec.domain_halfwidth > 0.0) {
        return Err(Error::invalid("noise_sd must be >= 0 and domain_halfwidth > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let h = spec.domain_halfwidth;
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let draw = |k: usize, noisy: bool, rng: &mut ChaCha8Rng| -> Result<Dataset> {
        let xs: Vec<Vec<f64>> = (0..k).map(|_| (0..spec.d).map(|_| rng.gen_range(-h..=h)).collect()).collect();
        let ys = xs
            .iter()
            .map(|x| {
                let y = regression_fn(x);
                if noisy {
                    (y + noise.sample(rng)).clamp(-SIM_M, SIM_M)
                } else {
                    y
                }
            })
            .collect();
        Dataset::new(xs, ys, SIM_M)
    };
    let train = draw(spec.n, true, &mut rng)?;
    let test = draw(spec.test_n, false, &mut rng)?;
    Ok((train, test))
}

/// A sample-size sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub filter_len: usize,
    pub test_n: usize,
    pub noise_sd: f64,
    pub domain_halfwidth: f64,
    pub step_size: f64,
    pub tied_bias: bool,
}

impl ExperimentConfig {
    /// Desk-scale grid `n ∈ {100, 300, 500, 1000}` with 5 seeds, `S = 2` and
    /// untied biases.
    pub fn desk(d: usize) -> Self {
        ExperimentConfig {
            d,
            n_grid: vec![100, 300, 500, 1000],
            seeds: (0..5).collect(),
            epochs: 300,
            filter_len: 2,
            test_n: 2000,
            noise_sd: 0.1,
            domain_halfwidth: 10.0,
            step_size: 1e-3,
            tied_bias: false,
        }
    }

    /// The full grid up to `n = 6000`.
    pub fn full(d: usize) -> Self {
        ExperimentConfig {
            n_grid: vec![100, 300, 500, 700, 1000, 1500, 2000, 3000, 4000, 5000, 6000],
            ..Self::desk(d)
        }
    }
}

/// Depth `⌈n^{1/3}⌉` used by the sweep.
pub fn sweep_depth(n: usize) -> usize {
    ceil_pow(n, 1.0 / 3.0)
}

/// `⌈n^α⌉`, exact on perfect powers.
pub fn ceil_pow(n: usize, alpha: f64) -> usize {
    let v = (n as f64).powf(alpha);
    let r = v.round();
    if (v - r).abs() < 1e-9 * v.max(1.0) {
        r as usize
    } else {
        v.ceil() as usize
    }
}

/// One trained run of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub depth: usize,
    /// `None` when training diverged.
    pub test_rmse: Option<f64>,
}

/// Mean and sample standard deviation of the finite runs at one `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub d: usize,
    pub n: usize,
    pub depth: usize,
    pub runs: usize,
    pub mean_rmse: f64,
    pub sd_rmse: f64,
}

/// Rows of a sweep in grid order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub rows: Vec<ExperimentRow>,
    pub summaries: Vec<ExperimentSummary>,
}

/// One training run of the sweep: data from `split_seed(seed, n, 0)`,
/// initialization and batching from `split_seed(seed, n, 1)`.
pub fn run_one(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<ExperimentRow> {
    let spec = SimSpec {
        d: cfg.d,
        n,
        test_n: cfg.test_n,
        noise_sd: cfg.noise_sd,
        domain_halfwidth: cfg.domain_halfwidth,
        seed: split_seed(seed, n, 0),
    };
    let (train, test) = simulate(&spec)?;
    let depth = sweep_depth(n);
    let tc = TrainConfig {
        step_size: cfg.step_size,
        tied_bias: cfg.tied_bias,
        ..TrainConfig::for_sample(n, cfg.epochs, split_seed(seed, n, 1))
    };
    let net = init_net(cfg.d, depth, cfg.filter_len, &tc, Some(SIM_M))?;
    let test_rmse = match fit(&net, &train, &test, &tc) {
        Ok((_, rep)) => Some(rep.test_rmse),
        Err(e) if e.is_numerical() => None,
        Err(e) => return Err(e),
    };
    Ok(ExperimentRow { d: cfg.d, n, seed, depth, test_rmse })
}

/// Runs every `(n, seed)` pair; divergent runs are kept as rows without an RMSE.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.n_grid.is_empty() || cfg.seeds.is_empty() || cfg.n_grid.contains(&0) {
        return Err(Error::invalid("the grid needs positive sample sizes and at least one seed"));
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &n in &cfg.n_grid {
        let mut vals = Vec::new();
        for &seed in &cfg.seeds {
            let row = run_one(cfg, n, seed)?;
            vals.extend(row.test_rmse);
            rows.push(row);
        }
        let (mean, sd) = mean_sd(&vals);
        summaries.push(ExperimentSummary { d: cfg.d, n, depth: sweep_depth(n), runs: vals.len(), mean_rmse: mean, sd_rmse: sd });
    }
    Ok(ExperimentResult { rows, summaries })
}

/// Mean and sample standard deviation (`NaN` where undefined).
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".into(), |x| format!("{x:.12e}"))
}

/// Writes the versioned CSV: a comment line, a header, one `run` row per
/// `(n, seed)` and one `summary` row per `n`.
pub fn write_experiment_csv<W: Write>(res: &ExperimentResult, out: W) -> Result<()> {
    let mut out = out;
    writeln!(out, "{EXPERIMENT_CSV_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "d", "n", "seed", "J", "test_rmse", "test_rmse_sd", "runs", "status"])?;
    for r in &res.rows {
        let status = if r.test_rmse.is_some() { "ok" } else { "diverged" };
        w.write_record([
            "run".to_string(),
            r.d.to_string(),
            r.n.to_string(),
            r.seed.to_string(),
            r.depth.to_string(),
            fmt_opt(r.test_rmse),
            String::new(),
            "1".into(),
            status.into(),
        ])?;
    }
    for s in &res.summaries {
        w.write_record([
            "summary".to_string(),
            s.d.to_string(),
            s.n.to_string(),
            String::new(),
            s.depth.to_string(),
            fmt_opt(Some(s.mean_rmse)),
            fmt_opt(Some(s.sd_rmse)),
            s.runs.to_string(),
            "ok".into(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Settings of the train-then-deepen pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub d: usize,
    pub n: usize,
    /// Teacher depth exponent, `J2 = ⌈n^α⌉`.
    pub alpha: f64,
    /// Student filter length; the teacher uses `s/2`.
    pub s: usize,
    pub seed: u64,
    pub epochs: usize,
    pub test_n: usize,
    pub noise_sd: f64,
    pub domain_halfwidth: f64,
    pub delta: f64,
}

impl PipelineConfig {
    pub fn new(d: usize, n: usize, alpha: f64, seed: u64) -> Self {
        PipelineConfig {
            d,
            n,
            alpha,
            s: 4,
            seed,
            epochs: 300,
            test_n: 2000,
            noise_sd: 0.1,
            domain_halfwidth: 10.0,
            delta: 0.05,
        }
    }
}

/// Outcome of [`run_pipeline`].
#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub teacher_depth: usize,
    pub teacher_params: usize,
    pub teacher_test_rmse: f64,
    pub student_test_rmse: f64,
    pub max_interpolation_residual: f64,
    pub student_depth: usize,
    pub student_final_width: usize,
    pub student_params: usize,
    pub slab_fraction: f64,
    pub deepen: DeepenReport,
    pub bounds: BoundReport,
    pub wall_time_secs: f64,
}

/// RMSE of [`Dcnn::predict_precise_batch`] outputs.
pub fn precise_rmse(net: &Dcnn, data: &Dataset) -> Result<f64> {
    let p = net.predict_precise_batch(&data.xs)?;
    let se: f64 = p.iter().zip(&data.ys).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((se / data.len() as f64).sqrt())
}

/// Trains a teacher of depth `⌈n^α⌉` and filter length `s/2` on simulated
/// data, deepens it with `N = 4n + 1` into an interpolating student, and
/// evaluates both on the noiseless test sample.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(PipelineReport, Dcnn, Dcnn)> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 0.5) {
        return Err(Error::invalid("alpha must lie in (0, 1/2)"));
    }
    if cfg.s % 2 == 1 || cfg.s < 4 || cfg.s > cfg.d {
        return Err(Error::invalid(format!("s must be even with 4 <= s <= d (s = {}, d = {})", cfg.s, cfg.d)));
    }
    let start = Instant::now();
    let spec = SimSpec {
        d: cfg.d,
        n: cfg.n,
        test_n: cfg.test_n,
        noise_sd: cfg.noise_sd,
        domain_halfwidth: cfg.domain_halfwidth,
        seed: split_seed(cfg.seed, cfg.n, 0),
    };
    let (train, test) = simulate(&spec)?;
    let depth = ceil_pow(cfg.n, cfg.alpha);
    let tc = TrainConfig::for_sample(cfg.n, cfg.epochs, split_seed(cfg.seed, cfg.n, 1));
    let init = init_net(cfg.d, depth, cfg.s / 2, &tc, Some(SIM_M))?;
    let (mut teacher, trep) = fit(&init, &train, &test, &tc)?;
    for l in &mut teacher.layers {
        let mut taps = l.filter.coeffs().to_vec();
        if taps[0] == 0.0 {
            taps[0] = 1e-12;
            l.filter = FilterSeq::new(taps)?;
        }
    }
    let opts = DeepenOptions { n_rep: Some(4 * cfg.n + 1), ..DeepenOptions::new(cfg.s, split_seed(cfg.seed, cfg.n, 2)) };
    let out = interpolate_with(&teacher, &train, &opts)?;
    let mut raw_student = out.student.clone();
    raw_student.truncation = None;
    let raw_fit = raw_student.predict_precise_batch(&train.xs)?;
    let resid = raw_fit.iter().zip(&train.ys).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let student_rmse = precise_rmse(&out.student, &test)?;
    let slab = test.xs.iter().filter(|x| out.plan.in_slab(x)).count() as f64 / test.len() as f64;
    let bounds = bound_report(&BoundInputs {
        j: depth.max(2),
        s: cfg.s / 2,
        d: cfg.d,
        n: cfg.n.max(3),
        delta: cfg.delta,
        c0: 1.0,
        c: 1.0,
        m: SIM_M,
    })?;
    let teacher_test_rmse = rmse(&teacher, &test)?;
    debug_assert!((teacher_test_rmse - trep.test_rmse).abs() < 1e-12);
    let report = PipelineReport {
        teacher_depth: depth,
        teacher_params: teacher.count_params()?,
        teacher_test_rmse,
        student_test_rmse: student_rmse,
        max_interpolation_residual: resid,
        student_depth: out.student.depth(),
        student_final_width: out.report.final_width,
        student_params: out.report.student_params,
        slab_fraction: slab,
        deepen: out.report,
        bounds,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((report, teacher, out.student))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_label_is_one() {
        assert_eq!(regression_fn(&[0.0; 10]), 1.0);
    }

    #[test]
    fn depth_rule() {
        assert_eq!(sweep_depth(1000), 10);
        assert_eq!(sweep_depth(100), 5);
        assert_eq!(sweep_depth(27), 3);
        assert_eq!(sweep_depth(28), 4);
    }

    #[test]
    fn mean_sd_basic() {
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
