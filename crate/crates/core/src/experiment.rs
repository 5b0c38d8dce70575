//! Experiment runner behind the `csgrad` binary.
//!
//! Configuration is a flat `key=value` text file, one pair per line, with `#`
//! starting a comment. Keys:
//!
//! | key              | commands                    | default            |
//! |------------------|-----------------------------|--------------------|
//! | `command`        | all (must match subcommand) | required           |
//! | `algorithm`      | run, sweep-noise, diag      | required for `run`, else `cs_sgd` |
//! | `d`, `K`         | all                         | required           |
//! | `n`, `T`         | run, sweep-noise, diag      | required           |
//! | `Q`              | `cs_sgd` runs               | required           |
//! | `sketch_rows`, `sketch_cols` | `sketch_sgd` runs | required         |
//! | `eta_rule`       | run, sweep-noise, diag      | `one_over_sqrt_T`; or `fixed(<value>)` |
//! | `noise_std`      | run, diag: one value; sweep-noise: comma list | `0` |
//! | `base_transform` | `cs_sgd` runs, recon-bench  | `wht`              |
//! | `lambdas`        | recon-bench (comma list)    | required           |
//! | `recon_nnz`, `recon_sigma` | recon-bench       | required           |
//! | `master_seed`    | all                         | required           |
//! | `num_trials`     | all                         | `1`                |
//! | `output_path`    | all (directory)             | required           |
//!
//! Trial `k` of a run uses the seed `derive_seed(master_seed, [TRIAL, k])`;
//! entry `(i, k)` of a noise sweep uses `derive_seed(master_seed, [TRIAL, i, k])`.
//! Under a trial seed the problem, the sensing matrix and the sketch draw
//! from the `PROBLEM`, `MATRIX` and `SKETCH` streams.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fedopt::{
    run_cs_sgd, run_cs_sgd_corrupted, run_sketch_sgd, run_vanilla_sgd, ChannelModel,
    DiagnosticsReport, EtaRule, FeedbackCorruption, RunConfig, RunTrace,
};
use crate::fiht::reconstruct;
use crate::rng::{derive_seed, stream, SplitMix64};
use crate::sensing::SensingMatrix;
use crate::signal::norm2_sq;
use crate::sketch::{CountSketch, CountSketchParams};
use crate::synth::{make_problem, make_recon_signal};
use crate::transform::{augmented_dim, BaseTransformKind, DCT_REFERENCE_MAX_DIM};

/// Header of every trace CSV.
pub const TRACE_HEADER: &str = "t,f,grad_norm,sp_g,sp_p,delta_nnz,feedback_norm,recon_residual";
pub const RECON_HEADER: &str = "lambda,method,trial,rel_error";
/// Identity residual threshold used by `diag`.
pub const DIAG_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Run,
    SweepNoise,
    ReconBench,
    Diag,
}

impl Command {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "run" => Some(Command::Run),
            "sweep-noise" => Some(Command::SweepNoise),
            "recon-bench" => Some(Command::ReconBench),
            "diag" => Some(Command::Diag),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::SweepNoise => "sweep-noise",
            Command::ReconBench => "recon-bench",
            Command::Diag => "diag",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    CsSgd,
    SketchSgd,
    VanillaSgd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub algorithm: Algorithm,
    pub d: usize,
    pub n: usize,
    pub rounds: usize,
    pub k: usize,
    pub q: Option<usize>,
    pub eta_rule: EtaRule,
    /// One value, or the sweep list for `sweep-noise`.
    pub noise_std: Vec<f64>,
    pub sketch_rows: Option<usize>,
    pub sketch_cols: Option<usize>,
    pub base_transform: BaseTransformKind,
    pub lambdas: Vec<f64>,
    pub recon_nnz: usize,
    pub recon_sigma: f64,
    pub master_seed: u64,
    pub num_trials: usize,
    pub output_path: PathBuf,
}

const KNOWN_KEYS: &[&str] = &[
    "command",
    "algorithm",
    "d",
    "n",
    "T",
    "K",
    "Q",
    "eta_rule",
    "noise_std",
    "sketch_rows",
    "sketch_cols",
    "base_transform",
    "lambdas",
    "recon_nnz",
    "recon_sigma",
    "master_seed",
    "num_trials",
    "output_path",
];

struct Pairs(BTreeMap<String, String>);

impl Pairs {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::config(key, "missing required key"))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
            })
            .transpose()
    }

    fn parse_required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?
            .ok_or_else(|| Error::config(key, "missing required key"))
    }

    fn float_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::config(key, format!("cannot parse `{s}`")))
                    })
                    .collect()
            })
            .transpose()
    }
}

/// Parses and fully validates a configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(line, format!("line {} is not a key=value pair", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::config(key, "unknown key"));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::config(key, "duplicate key"));
        }
    }
    let p = Pairs(map);

    let command_raw = p.required("command")?;
    let command = Command::parse(command_raw)
        .ok_or_else(|| Error::config("command", format!("unknown command `{command_raw}`")))?;

    let algorithm = match p.raw("algorithm") {
        Some("cs_sgd") => Algorithm::CsSgd,
        Some("sketch_sgd") => Algorithm::SketchSgd,
        Some("vanilla_sgd") => Algorithm::VanillaSgd,
        Some(other) => {
            return Err(Error::config("algorithm", format!("unknown algorithm `{other}`")))
        }
        None if command == Command::Run => {
            return Err(Error::config("algorithm", "missing required key"))
        }
        None => Algorithm::CsSgd,
    };
    if command == Command::Diag && algorithm != Algorithm::CsSgd {
        return Err(Error::config("algorithm", "diag only supports cs_sgd"));
    }

    let d: usize = p.parse_required("d")?;
    if d == 0 {
        return Err(Error::config("d", "must be positive"));
    }
    let k: usize = p.parse_required("K")?;
    if k == 0 || k > d {
        return Err(Error::config("K", format!("must be in 1..={d}")));
    }
    let master_seed: u64 = p.parse_required("master_seed")?;
    let num_trials: usize = p.parse("num_trials")?.unwrap_or(1);
    if num_trials == 0 {
        return Err(Error::config("num_trials", "must be positive"));
    }
    let output_path = PathBuf::from(p.required("output_path")?);

    let base_transform = match p.raw("base_transform") {
        None | Some("wht") => BaseTransformKind::Wht,
        Some("dct") => BaseTransformKind::Dct,
        Some(other) => {
            return Err(Error::config("base_transform", format!("unknown transform `{other}`")))
        }
    };
    if base_transform == BaseTransformKind::Dct && augmented_dim(d) > DCT_REFERENCE_MAX_DIM {
        return Err(Error::config(
            "base_transform",
            format!("dct is only available for d <= {DCT_REFERENCE_MAX_DIM}"),
        ));
    }

    let d_aug = augmented_dim(d);
    let mut cfg = ExperimentConfig {
        command,
        algorithm,
        d,
        n: 0,
        rounds: 0,
        k,
        q: None,
        eta_rule: EtaRule::OneOverSqrtT,
        noise_std: vec![0.0],
        sketch_rows: None,
        sketch_cols: None,
        base_transform,
        lambdas: Vec::new(),
        recon_nnz: 0,
        recon_sigma: 0.0,
        master_seed,
        num_trials,
        output_path,
    };

    if command == Command::ReconBench {
        let lambdas = p
            .float_list("lambdas")?
            .ok_or_else(|| Error::config("lambdas", "missing required key"))?;
        for &l in &lambdas {
            if !(l.is_finite() && l > 0.0) || (d as f64 / l).ceil() as usize > d_aug {
                return Err(Error::config("lambdas", format!("compression rate {l} out of range")));
            }
        }
        cfg.lambdas = lambdas;
        cfg.recon_nnz = p.parse_required("recon_nnz")?;
        if cfg.recon_nnz > d {
            return Err(Error::config("recon_nnz", format!("must be <= d = {d}")));
        }
        cfg.recon_sigma = p.parse_required("recon_sigma")?;
        if !(cfg.recon_sigma >= 0.0 && cfg.recon_sigma.is_finite()) {
            return Err(Error::config("recon_sigma", "must be finite and >= 0"));
        }
        return Ok(cfg);
    }

    cfg.n = p.parse_required("n")?;
    if cfg.n == 0 {
        return Err(Error::config("n", "must be positive"));
    }
    cfg.rounds = p.parse_required("T")?;
    cfg.eta_rule = match p.raw("eta_rule") {
        None | Some("one_over_sqrt_T") => EtaRule::OneOverSqrtT,
        Some(v) => {
            let inner = v
                .strip_prefix("fixed(")
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| Error::config("eta_rule", format!("unknown rule `{v}`")))?;
            let eta: f64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::config("eta_rule", format!("cannot parse `{inner}`")))?;
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::config("eta_rule", "step size must be positive"));
            }
            EtaRule::Fixed(eta)
        }
    };
    let noise = p.float_list("noise_std")?.unwrap_or_else(|| vec![0.0]);
    if command != Command::SweepNoise && noise.len() != 1 {
        return Err(Error::config("noise_std", "expected a single value"));
    }
    if noise.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::config("noise_std", "values must be finite and >= 0"));
    }
    cfg.noise_std = noise;

    match algorithm {
        Algorithm::CsSgd => {
            let q: usize = p.parse_required("Q")?;
            if q == 0 || q > d_aug {
                return Err(Error::config("Q", format!("must be in 1..={d_aug} (Q <= d_aug)")));
            }
            cfg.q = Some(q);
        }
        Algorithm::SketchSgd => {
            let rows: usize = p.parse_required("sketch_rows")?;
            let cols: usize = p.parse_required("sketch_cols")?;
            if rows == 0 {
                return Err(Error::config("sketch_rows", "must be positive"));
            }
            if cols == 0 {
                return Err(Error::config("sketch_cols", "must be positive"));
            }
            cfg.sketch_rows = Some(rows);
            cfg.sketch_cols = Some(cols);
        }
        Algorithm::VanillaSgd => {}
    }
    Ok(cfg)
}

/// Per-trial summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub trial: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub final_f: Option<f64>,
    /// Mean of `sp(p(t))` over the last (up to) 100 rounds.
    pub mean_sp_p_last100: Option<f64>,
    pub uplink_bytes_per_device_round: usize,
    pub compression_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseLevelSummary {
    pub noise_std: f64,
    pub mean_final_f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub trials: Vec<RunSummary>,
    pub mean_final_f: Option<f64>,
    pub by_noise: Vec<NoiseLevelSummary>,
}

/// A completed trial: its summary and trace.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub summary: RunSummary,
    pub trace: RunTrace,
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, &[stream::TRIAL, trial as u64])
}

pub fn sweep_seed(master: u64, level: usize, trial: usize) -> u64 {
    derive_seed(master, &[stream::TRIAL, level as u64, trial as u64])
}

/// Runs one trial of `config.algorithm` under `seed` with channel noise `w`.
pub fn run_trial(config: &ExperimentConfig, seed: u64, w: f64, diagnostics: bool) -> Result<RunTrace> {
    run_trial_inner(config, seed, w, diagnostics, None)
}

fn run_trial_inner(
    config: &ExperimentConfig,
    seed: u64,
    w: f64,
    diagnostics: bool,
    corruption: Option<FeedbackCorruption>,
) -> Result<RunTrace> {
    let problem = make_problem(config.d, config.n, derive_seed(seed, &[stream::PROBLEM]))?;
    let mut rc = RunConfig::new(config.rounds, config.eta_rule, config.k, seed);
    rc.channel = ChannelModel::gaussian(w)?;
    rc.diagnostics = diagnostics;
    match config.algorithm {
        Algorithm::CsSgd => {
            let q = config.q.ok_or_else(|| Error::config("Q", "missing required key"))?;
            let phi = SensingMatrix::generate(
                config.base_transform,
                config.d,
                q,
                derive_seed(seed, &[stream::MATRIX]),
            )?;
            match corruption {
                None => run_cs_sgd(&problem, &phi, &rc),
                Some(c) => run_cs_sgd_corrupted(&problem, &phi, &rc, c),
            }
        }
        Algorithm::SketchSgd => {
            let params = CountSketchParams::new(
                config.sketch_rows.unwrap_or(0),
                config.sketch_cols.unwrap_or(0),
                derive_seed(seed, &[stream::SKETCH]),
                config.d,
            )?;
            run_sketch_sgd(&problem, &CountSketch::new(params), &rc)
        }
        Algorithm::VanillaSgd => run_vanilla_sgd(&problem, &rc),
    }
}

/// Bytes one device uploads per round (8-byte reals).
pub fn uplink_bytes(config: &ExperimentConfig) -> usize {
    match config.algorithm {
        Algorithm::CsSgd => config.q.unwrap_or(0) * 8,
        Algorithm::SketchSgd => {
            config.sketch_rows.unwrap_or(0) * config.sketch_cols.unwrap_or(0) * 8
        }
        Algorithm::VanillaSgd => config.d * 8,
    }
}

pub fn compression_rate(config: &ExperimentConfig) -> f64 {
    (config.d * 8) as f64 / uplink_bytes(config) as f64
}

pub fn mean_sp_p_last(trace: &RunTrace, window: usize) -> Option<f64> {
    let start = trace.records.len().saturating_sub(window);
    let vals: Vec<f64> = trace.records[start..].iter().filter_map(|r| r.sp_p).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn summarize(config: &ExperimentConfig, trial: usize, seed: u64, w: f64, trace: &RunTrace) -> RunSummary {
    RunSummary {
        trial,
        noise_std: w,
        seed,
        final_f: trace.final_f,
        mean_sp_p_last100: mean_sp_p_last(trace, 100),
        uplink_bytes_per_device_round: uplink_bytes(config),
        compression_rate: compression_rate(config),
    }
}

/// Executes every trial (and every noise level for `sweep-noise`) in memory.
///
/// Results are ordered by noise level, then trial.
pub fn execute(config: &ExperimentConfig) -> Result<Vec<TrialOutcome>> {
    let jobs: Vec<(usize, usize, f64, u64)> = match config.command {
        Command::SweepNoise => config
            .noise_std
            .iter()
            .enumerate()
            .flat_map(|(li, &w)| {
                (0..config.num_trials).map(move |k| (li, k, w, sweep_seed(config.master_seed, li, k)))
            })
            .collect(),
        _ => (0..config.num_trials)
            .map(|k| (0, k, config.noise_std[0], trial_seed(config.master_seed, k)))
            .collect(),
    };
    jobs.par_iter()
        .map(|&(_, k, w, seed)| {
            let trace = run_trial(config, seed, w, false)?;
            Ok(TrialOutcome {
                summary: summarize(config, k, seed, w, &trace),
                trace,
            })
        })
        .collect()
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Renders a trace with [`TRACE_HEADER`]; reals use 17 significant digits and
/// missing values are empty fields.
pub fn trace_to_csv(trace: &RunTrace) -> String {
    let mut out = String::with_capacity(64 + trace.records.len() * 160);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.t,
            fmt_opt(r.f_value),
            fmt_opt(r.grad_norm),
            fmt_opt(r.sp_g),
            fmt_opt(r.sp_p),
            r.delta_nnz,
            fmt_f64(r.feedback_norm),
            fmt_f64(r.recon_residual),
        );
    }
    out
}

fn mean(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = vals.collect();
    v.filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

/// Runs `run` or `sweep-noise`, writing one trace CSV per trial plus
/// `summary.json` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentSummary> {
    if !matches!(config.command, Command::Run | Command::SweepNoise) {
        return Err(Error::config("command", "run_experiment handles run and sweep-noise"));
    }
    let outcomes = execute(config)?;
    ensure_dir(out_dir)?;
    let levels = if config.command == Command::SweepNoise {
        config.noise_std.len()
    } else {
        1
    };
    for (idx, o) in outcomes.iter().enumerate() {
        let name = if config.command == Command::SweepNoise {
            format!("trace_w{}_trial{}.csv", idx / config.num_trials, o.summary.trial)
        } else {
            format!("trace_trial{}.csv", o.summary.trial)
        };
        write(&out_dir.join(name), &trace_to_csv(&o.trace))?;
    }
    let by_noise = (0..levels)
        .map(|li| {
            let chunk = &outcomes[li * config.num_trials..(li + 1) * config.num_trials];
            NoiseLevelSummary {
                noise_std: config.noise_std[li],
                mean_final_f: mean(chunk.iter().map(|o| o.summary.final_f)),
            }
        })
        .collect();
    let summary = ExperimentSummary {
        config: config.clone(),
        mean_final_f: mean(outcomes.iter().map(|o| o.summary.final_f)),
        trials: outcomes.into_iter().map(|o| o.summary).collect(),
        by_noise,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    write(&out_dir.join("summary.json"), &(json + "\n"))?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconMethod {
    Fiht,
    CountSketch,
}

impl ReconMethod {
    fn name(self) -> &'static str {
        match self {
            ReconMethod::Fiht => "fiht",
            ReconMethod::CountSketch => "count_sketch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconRow {
    pub lambda: f64,
    pub method: ReconMethod,
    pub trial: usize,
    /// `‖g − ĝ‖² / ‖g‖²`; `None` for a zero signal.
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconLevelSummary {
    pub lambda: f64,
    pub q: usize,
    pub sketch_cols: usize,
    pub mean_fiht: Option<f64>,
    pub mean_count_sketch: Option<f64>,
}

/// `Q = ceil(d / λ)`.
pub fn recon_q(d: usize, lambda: f64) -> usize {
    (d as f64 / lambda).ceil() as usize
}

/// Sketch columns `ceil(d / (5λ))` for the 5-row sketch.
pub fn recon_sketch_cols(d: usize, lambda: f64) -> usize {
    ((d as f64 / (5.0 * lambda)).ceil() as usize).max(1)
}

pub const RECON_SKETCH_ROWS: usize = 5;

fn rel_error(g: &[f64], est: &[f64]) -> Option<f64> {
    let denom = norm2_sq(g);
    if denom == 0.0 {
        return None;
    }
    let diff: Vec<f64> = g.iter().zip(est).map(|(a, b)| a - b).collect();
    Some(norm2_sq(&diff) / denom)
}

/// Reconstruction benchmark rows, ordered by λ, method, trial.
///
/// Trial `k` reconstructs the signal drawn from stream `[SIGNAL, k]` of the
/// master seed, so every λ sees the same signals. Each λ has one sensing
/// matrix (stream `[MATRIX, i]`) and one sketch (stream `[SKETCH, i]`).
pub fn recon_bench_rows(config: &ExperimentConfig) -> Result<(Vec<ReconRow>, Vec<ReconLevelSummary>)> {
    let d = config.d;
    let signals: Vec<Vec<f64>> = (0..config.num_trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = SplitMix64::from_path(config.master_seed, &[stream::SIGNAL, k as u64]);
            make_recon_signal(d, config.recon_nnz, config.recon_sigma, &mut rng).map(|s| s.into_vec())
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut levels = Vec::new();
    for (li, &lambda) in config.lambdas.iter().enumerate() {
        let q = recon_q(d, lambda);
        let cols = recon_sketch_cols(d, lambda);
        let phi = SensingMatrix::generate(
            config.base_transform,
            d,
            q,
            derive_seed(config.master_seed, &[stream::MATRIX, li as u64]),
        )?;
        let sketch = CountSketch::new(CountSketchParams::new(
            RECON_SKETCH_ROWS,
            cols,
            derive_seed(config.master_seed, &[stream::SKETCH, li as u64]),
            d,
        )?);
        let fiht_err: Vec<Option<f64>> = signals
            .par_iter()
            .map(|g| {
                let y = crate::sensing::Measurement::from_vec_unchecked(phi.apply_slice(g));
                Ok(rel_error(g, &reconstruct(&y, &phi, config.k)?.to_vec()))
            })
            .collect::<Result<_>>()?;
        let cs_err: Vec<Option<f64>> = signals
            .par_iter()
            .map(|g| {
                let table = sketch.compress_slice(g);
                Ok(rel_error(g, &sketch.reconstruct(&table, config.k)?.to_vec()))
            })
            .collect::<Result<_>>()?;
        levels.push(ReconLevelSummary {
            lambda,
            q,
            sketch_cols: cols,
            mean_fiht: mean(fiht_err.iter().copied()),
            mean_count_sketch: mean(cs_err.iter().copied()),
        });
        for (method, errs) in [(ReconMethod::Fiht, fiht_err), (ReconMethod::CountSketch, cs_err)] {
            for (trial, rel_error) in errs.into_iter().enumerate() {
                rows.push(ReconRow {
                    lambda,
                    method,
                    trial,
                    rel_error,
                });
            }
        }
    }
    Ok((rows, levels))
}

pub fn recon_rows_to_csv(rows: &[ReconRow]) -> String {
    let mut out = String::from(RECON_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.lambda, r.method.name(), r.trial, fmt_opt(r.rel_error));
    }
    out
}

/// Writes `recon.csv` and `summary.json` into `out_dir`.
pub fn recon_bench(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<ReconLevelSummary>> {
    let (rows, levels) = recon_bench_rows(config)?;
    ensure_dir(out_dir)?;
    write(&out_dir.join("recon.csv"), &recon_rows_to_csv(&rows))?;
    let json = serde_json::to_string_pretty(&levels).map_err(|e| Error::Io(e.to_string()))?;
    write(&out_dir.join("summary.json"), &(json + "\n"))?;
    Ok(levels)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagOutcome {
    pub trial: usize,
    pub report: DiagnosticsReport,
    pub passed: bool,
}

impl DiagOutcome {
    fn new(trial: usize, report: DiagnosticsReport) -> Self {
        let passed = report.feedback_identity <= DIAG_THRESHOLD
            && report.measurement_identity <= DIAG_THRESHOLD
            && report.shadow_sgd_identity_with_noise <= DIAG_THRESHOLD;
        DiagOutcome {
            trial,
            report,
            passed,
        }
    }

    pub fn render(&self) -> String {
        let verdict = |v: f64| if v <= DIAG_THRESHOLD { "PASS" } else { "FAIL" };
        let r = &self.report;
        let mut s = format!("trial {} ({} states checked)\n", self.trial, r.rounds_checked);
        for (name, v) in [
            ("eps = Phi e", r.feedback_identity),
            ("z = Phi p + eta w", r.measurement_identity),
            ("x - e = x_tilde (incl. channel term)", r.shadow_sgd_identity_with_noise),
        ] {
            let _ = writeln!(s, "  {name:<38} max residual {v:.3e}  {}", verdict(v));
        }
        let _ = writeln!(
            s,
            "  {:<38} max residual {:.3e}  (info)",
            "x - e = x_tilde (noise-free recursion)", r.shadow_sgd_identity
        );
        s
    }
}

/// Runs every trial of a `cs_sgd` configuration with the identity checks on.
pub fn diag(config: &ExperimentConfig) -> Result<Vec<DiagOutcome>> {
    diag_inner(config, None)
}

/// As [`diag`], with `ε` perturbed after one round (negative control).
#[doc(hidden)]
pub fn diag_corrupted(config: &ExperimentConfig, corruption: FeedbackCorruption) -> Result<Vec<DiagOutcome>> {
    diag_inner(config, Some(corruption))
}

fn diag_inner(config: &ExperimentConfig, corruption: Option<FeedbackCorruption>) -> Result<Vec<DiagOutcome>> {
    if config.algorithm != Algorithm::CsSgd {
        return Err(Error::config("algorithm", "diag only supports cs_sgd"));
    }
    (0..config.num_trials)
        .into_par_iter()
        .map(|k| {
            let seed = trial_seed(config.master_seed, k);
            let trace = run_trial_inner(config, seed, config.noise_std[0], true, corruption)?;
            Ok(DiagOutcome::new(k, trace.diagnostics.unwrap_or_default()))
        })
        .collect()
}
