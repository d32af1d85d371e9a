//! Experiment harness: the 48-model architecture enumeration, benchmark
//! protocols, reservoir-size sweeps with outlier-trimmed aggregation,
//! runtime-scaling fits, and result persistence.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::s;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{
    gen_figure8, gen_mackey_glass, gen_narma10, gen_synthetic_digits, split_grouped,
    GroupedDataset, SequenceDataset, DIGIT_CHANNELS, DIGIT_CLASSES, FIGURE8_PREDICT_NOISE_SCALE,
    FIGURE8_TOTAL, MACKEY_GLASS_DROP, MACKEY_GLASS_TAU, MACKEY_GLASS_TOTAL, NARMA_NOISE_SCALE,
    NARMA_TOTAL,
};
use crate::error::{EsnError, Result};
use crate::esn::{build, Activation, EsnConfig, ReadoutVariant, WeightDistribution};
use crate::hpo::{score_string, score_string_vec, Direction, TrialParams};
use crate::metrics::{confusion, f1_macro, rmse};
use crate::training::{fit_classifier, classify, predict, train, PredictMode, PredictSetup};

/// Seeds used per sweep cell, averaged with outliers removed.
pub const SWEEP_SEEDS: usize = 15;

/// One node of the architecture tree: readout variant x reservoir
/// activation f x output activation g x weight distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub readout_variant: ReadoutVariant,
    pub reservoir_activation: Activation,
    pub output_activation: Activation,
    pub weight_distribution: WeightDistribution,
}

const VARIANTS: [ReadoutVariant; 4] = [
    ReadoutVariant::StateOnly,
    ReadoutVariant::InputState,
    ReadoutVariant::StateFeedback,
    ReadoutVariant::InputStateFeedback,
];
const RESERVOIR_FS: [Activation; 2] = [Activation::Tanh, Activation::Sinc];
const OUTPUT_GS: [Activation; 2] = [Activation::Tanh, Activation::Identity];
const DISTRIBUTIONS: [WeightDistribution; 3] = [
    WeightDistribution::Uniform,
    WeightDistribution::Bivalued,
    WeightDistribution::Laplace,
];

impl ModelSpec {
    /// Canonical code "V{1-4}-F{T|S}-G{T|I}-D{U|B|L}": readout variant 1-4
    /// (state-only, input+state, state+feedback, input+state+feedback),
    /// reservoir activation Tanh/Sinc, output activation Tanh/Identity,
    /// weight distribution Uniform/Bivalued/Laplace.
    pub fn label(&self) -> String {
        let v = match self.readout_variant {
            ReadoutVariant::StateOnly => 1,
            ReadoutVariant::InputState => 2,
            ReadoutVariant::StateFeedback => 3,
            ReadoutVariant::InputStateFeedback => 4,
        };
        let f = match self.reservoir_activation {
            Activation::Tanh => 'T',
            Activation::Sinc => 'S',
            Activation::Identity => '?',
        };
        let g = match self.output_activation {
            Activation::Tanh => 'T',
            Activation::Identity => 'I',
            Activation::Sinc => '?',
        };
        let d = match self.weight_distribution {
            WeightDistribution::Uniform => 'U',
            WeightDistribution::Bivalued => 'B',
            WeightDistribution::Laplace => 'L',
        };
        format!("V{v}-F{f}-G{g}-D{d}")
    }

    pub fn from_label(label: &str) -> Result<ModelSpec> {
        let bad = || EsnError::InvalidConfig(format!("unrecognized model label `{label}`"));
        let parts: Vec<&str> = label.split('-').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let readout_variant = match parts[0] {
            "V1" => ReadoutVariant::StateOnly,
            "V2" => ReadoutVariant::InputState,
            "V3" => ReadoutVariant::StateFeedback,
            "V4" => ReadoutVariant::InputStateFeedback,
            _ => return Err(bad()),
        };
        let reservoir_activation = match parts[1] {
            "FT" => Activation::Tanh,
            "FS" => Activation::Sinc,
            _ => return Err(bad()),
        };
        let output_activation = match parts[2] {
            "GT" => Activation::Tanh,
            "GI" => Activation::Identity,
            _ => return Err(bad()),
        };
        let weight_distribution = match parts[3] {
            "DU" => WeightDistribution::Uniform,
            "DB" => WeightDistribution::Bivalued,
            "DL" => WeightDistribution::Laplace,
            _ => return Err(bad()),
        };
        Ok(ModelSpec { readout_variant, reservoir_activation, output_activation, weight_distribution })
    }
}

/// All 48 architecture combinations, ordered by (variant, f, g, distribution).
pub fn enumerate_models() -> Vec<ModelSpec> {
    let mut specs = Vec::with_capacity(48);
    for variant in VARIANTS {
        for f in RESERVOIR_FS {
            for g in OUTPUT_GS {
                for dist in DISTRIBUTIONS {
                    specs.push(ModelSpec {
                        readout_variant: variant,
                        reservoir_activation: f,
                        output_activation: g,
                        weight_distribution: dist,
                    });
                }
            }
        }
    }
    specs
}

/// Broad task family, selecting a guideline-derived starting configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    /// Input-driven one-step prediction (e.g. NARMA).
    Prediction,
    /// Pattern generation via output feedback (e.g. figure-8).
    Generation,
    /// Chaotic series generation (e.g. Mackey-Glass).
    Chaotic,
    /// Grouped time-series classification (e.g. isolated digits).
    Classification,
}

/// Guideline defaults: sparse reservoir (d_W = 0.15), dense input
/// (d_in = 0.95); feedback only for generation tasks, where a self-recurrent
/// readout, low leak rate and a spectral radius near 1 preserve the long
/// memory the task needs; prediction tasks favor moderate leak and radius;
/// classification uses a fast reservoir and the averaged-state readout.
pub fn heuristic_defaults(
    kind: ProblemKind,
    n_inputs: usize,
    n_reservoir: usize,
    n_outputs: usize,
) -> EsnConfig {
    let mut cfg = EsnConfig::new(n_inputs, n_reservoir, n_outputs);
    cfg.density_w = 0.15;
    cfg.density_in = 0.95;
    match kind {
        ProblemKind::Prediction => {
            cfg.leak_rate = 0.5;
            cfg.spectral_radius = 0.8;
            cfg.density_fb = 0.0;
            cfg.feedback_scale = 0.0;
            cfg.readout_variant = ReadoutVariant::InputState;
        }
        ProblemKind::Generation | ProblemKind::Chaotic => {
            cfg.leak_rate = 0.1;
            cfg.spectral_radius = 0.95;
            cfg.density_fb = 0.95;
            cfg.feedback_scale = 1.0;
            cfg.readout_variant = if n_inputs == 0 {
                ReadoutVariant::StateFeedback
            } else {
                ReadoutVariant::InputStateFeedback
            };
        }
        ProblemKind::Classification => {
            cfg.leak_rate = 0.9;
            cfg.spectral_radius = 0.5;
            cfg.density_fb = 0.0;
            cfg.feedback_scale = 0.0;
            cfg.classifier_mode = true;
            cfg.readout_variant = ReadoutVariant::InputState;
        }
    }
    cfg
}

/// Continuous hyperparameters matching [`heuristic_defaults`], for use as
/// untuned sweep parameters.
pub fn heuristic_params(kind: ProblemKind) -> TrialParams {
    let cfg = heuristic_defaults(kind, 1, 1, 1);
    TrialParams {
        spectral_radius: cfg.spectral_radius,
        leak_rate: cfg.leak_rate,
        density_w: cfg.density_w,
        density_in: cfg.density_in,
        density_fb: cfg.density_fb,
        input_scale: cfg.input_scale,
        feedback_scale: cfg.feedback_scale,
        ridge_beta: 1e-6,
    }
}

/// The four built-in benchmark protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Benchmark {
    Narma10,
    Figure8,
    MackeyGlass,
    DigitsSynthetic,
}

impl FromStr for Benchmark {
    type Err = EsnError;

    fn from_str(s: &str) -> Result<Benchmark> {
        match s {
            "narma10" => Ok(Benchmark::Narma10),
            "figure8" => Ok(Benchmark::Figure8),
            "mackey-glass" => Ok(Benchmark::MackeyGlass),
            "digits-synthetic" => Ok(Benchmark::DigitsSynthetic),
            _ => Err(EsnError::InvalidConfig(format!("unknown benchmark `{s}`"))),
        }
    }
}

impl Benchmark {
    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Narma10 => "narma10",
            Benchmark::Figure8 => "figure8",
            Benchmark::MackeyGlass => "mackey-glass",
            Benchmark::DigitsSynthetic => "digits-synthetic",
        }
    }

    pub fn problem_kind(self) -> ProblemKind {
        match self {
            Benchmark::Narma10 => ProblemKind::Prediction,
            Benchmark::Figure8 => ProblemKind::Generation,
            Benchmark::MackeyGlass => ProblemKind::Chaotic,
            Benchmark::DigitsSynthetic => ProblemKind::Classification,
        }
    }

    /// (input channels, output channels)
    pub fn dims(self) -> (usize, usize) {
        match self {
            Benchmark::Narma10 => (1, 1),
            Benchmark::Figure8 => (0, 2),
            Benchmark::MackeyGlass => (0, 1),
            Benchmark::DigitsSynthetic => (DIGIT_CHANNELS, DIGIT_CLASSES),
        }
    }

    /// Default study budget.
    pub fn default_trials(self) -> usize {
        match self {
            Benchmark::DigitsSynthetic => 50,
            _ => 150,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Benchmark::DigitsSynthetic => Direction::Maximize,
            _ => Direction::Minimize,
        }
    }

    pub fn score_name(self) -> &'static str {
        match self {
            Benchmark::DigitsSynthetic => "f1_macro",
            _ => "rmse",
        }
    }

    /// Reservoir-state noise injected during training.
    fn train_noise(self) -> f64 {
        match self {
            Benchmark::Narma10 => NARMA_NOISE_SCALE,
            Benchmark::Figure8 => NARMA_NOISE_SCALE,
            Benchmark::MackeyGlass | Benchmark::DigitsSynthetic => 0.0,
        }
    }
}

/// A benchmark's data, either a regression sequence or grouped labeled series.
#[derive(Debug, Clone)]
pub enum BenchmarkData {
    Sequence(SequenceDataset),
    Grouped { train: GroupedDataset, test: GroupedDataset },
}

/// Builds the benchmark's dataset under its standard protocol.
pub fn default_data(benchmark: Benchmark, seed: u64) -> Result<BenchmarkData> {
    Ok(match benchmark {
        Benchmark::Narma10 => BenchmarkData::Sequence(gen_narma10(NARMA_TOTAL, seed)?),
        Benchmark::Figure8 => BenchmarkData::Sequence(gen_figure8(FIGURE8_TOTAL)?),
        Benchmark::MackeyGlass => BenchmarkData::Sequence(gen_mackey_glass(
            MACKEY_GLASS_TOTAL,
            MACKEY_GLASS_TAU,
            MACKEY_GLASS_DROP,
        )?),
        Benchmark::DigitsSynthetic => {
            let all = gen_synthetic_digits(DIGIT_CLASSES, DIGIT_CHANNELS, 16, 10, 3.0, seed)?;
            let (train, test) = split_grouped(&all, 0.75, 0.25, seed)?;
            BenchmarkData::Grouped { train, test }
        }
    })
}

/// Combines a benchmark's dimensions and problem-kind defaults with a model
/// spec's architecture switches and a trial's continuous hyperparameters.
pub fn config_for(
    benchmark: Benchmark,
    spec: &ModelSpec,
    params: &TrialParams,
    n_reservoir: usize,
) -> EsnConfig {
    let (k, l) = benchmark.dims();
    let mut cfg = heuristic_defaults(benchmark.problem_kind(), k, n_reservoir, l);
    cfg.readout_variant = spec.readout_variant;
    cfg.reservoir_activation = spec.reservoir_activation;
    cfg.output_activation = spec.output_activation;
    cfg.weight_distribution = spec.weight_distribution;
    cfg.spectral_radius = params.spectral_radius;
    cfg.leak_rate = params.leak_rate;
    cfg.density_w = params.density_w;
    cfg.density_in = params.density_in;
    cfg.density_fb = params.density_fb;
    cfg.input_scale = params.input_scale;
    cfg.feedback_scale = params.feedback_scale;
    cfg.noise_scale = benchmark.train_noise();
    cfg
}

/// Score and wall-clock timings of one build/train/evaluate run. Timings
/// cover the train and predict bodies only (no data generation or weight
/// sampling).
#[derive(Debug, Clone, Copy)]
pub struct RunResult {
    pub score: f64,
    pub train_ms: f64,
    pub predict_ms: f64,
}

fn ms(elapsed: std::time::Duration) -> f64 {
    elapsed.as_secs_f64() * 1e3
}

/// Runs one benchmark evaluation end to end with the benchmark's standard
/// split/washout/noise protocol. Regression scores are test RMSE;
/// classification scores test macro-F1.
pub fn run_benchmark(
    benchmark: Benchmark,
    spec: &ModelSpec,
    params: &TrialParams,
    data: &BenchmarkData,
    n_reservoir: usize,
    root_seed: u64,
) -> Result<RunResult> {
    let cfg = config_for(benchmark, spec, params, n_reservoir);
    match (benchmark, data) {
        (Benchmark::DigitsSynthetic, BenchmarkData::Grouped { train: tr, test: te }) => {
            let weights = build(&cfg, root_seed)?;
            let t0 = Instant::now();
            let model = fit_classifier(weights, cfg, tr, 0, params.ridge_beta)?;
            let train_ms = ms(t0.elapsed());
            let t1 = Instant::now();
            let mut truth = Vec::with_capacity(te.groups.len());
            let mut pred = Vec::with_capacity(te.groups.len());
            for group in &te.groups {
                let (_, label) = classify(&model, group.features.view())?;
                truth.push(group.label);
                pred.push(label);
            }
            let predict_ms = ms(t1.elapsed());
            let cm = confusion(&truth, &pred, te.n_classes)?;
            Ok(RunResult { score: f1_macro(&cm), train_ms, predict_ms })
        }
        (_, BenchmarkData::Sequence(ds)) => {
            let weights = build(&cfg, root_seed)?;
            let t0 = Instant::now();
            let model = train(
                weights,
                cfg,
                ds.train_inputs(),
                ds.train_targets(),
                ds.washout_train,
                params.ridge_beta,
            )?;
            let train_ms = ms(t0.elapsed());
            let test_targets = ds.test_targets();
            let test_len = ds.test_len;
            match benchmark {
                Benchmark::Narma10 => {
                    // Open-loop continuation over the test split; the first
                    // washout_test steps are run but not scored.
                    let setup = PredictSetup {
                        mode: PredictMode::TeacherForced,
                        horizon: test_len,
                        inputs: Some(ds.test_inputs()),
                        teacher_feedback: Some(test_targets),
                        noise_scale: 0.0,
                        initial_state: Some(model.final_train_state.clone()),
                    };
                    let t1 = Instant::now();
                    let (outputs, _) = predict(&model, setup)?;
                    let predict_ms = ms(t1.elapsed());
                    let w = ds.washout_test;
                    let score = rmse(
                        outputs.slice(s![.., w..]),
                        test_targets.slice(s![.., w..]),
                    )?;
                    Ok(RunResult { score, train_ms, predict_ms })
                }
                Benchmark::Figure8 => {
                    // Re-anchor with a teacher-forced washout pass, then
                    // free-run the remainder under the protocol's state noise
                    // and score only the free-run portion.
                    let w = ds.washout_test;
                    let t1 = Instant::now();
                    let warm = PredictSetup {
                        mode: PredictMode::TeacherForced,
                        horizon: w,
                        inputs: None,
                        teacher_feedback: Some(test_targets),
                        noise_scale: 0.0,
                        initial_state: Some(model.final_train_state.clone()),
                    };
                    let (_, state) = predict(&model, warm)?;
                    let free = PredictSetup {
                        mode: PredictMode::FreeRun,
                        horizon: test_len - w,
                        inputs: None,
                        teacher_feedback: None,
                        noise_scale: FIGURE8_PREDICT_NOISE_SCALE,
                        initial_state: Some(state),
                    };
                    let (outputs, _) = predict(&model, free)?;
                    let predict_ms = ms(t1.elapsed());
                    let score = rmse(outputs.view(), test_targets.slice(s![.., w..]))?;
                    Ok(RunResult { score, train_ms, predict_ms })
                }
                Benchmark::MackeyGlass => {
                    // Closed-loop generation continuing straight from the
                    // final training state, scored against the true series.
                    let setup = PredictSetup {
                        mode: PredictMode::FreeRun,
                        horizon: test_len,
                        inputs: None,
                        teacher_feedback: None,
                        noise_scale: 0.0,
                        initial_state: Some(model.final_train_state.clone()),
                    };
                    let t1 = Instant::now();
                    let (outputs, _) = predict(&model, setup)?;
                    let predict_ms = ms(t1.elapsed());
                    let score = rmse(outputs.view(), test_targets)?;
                    Ok(RunResult { score, train_ms, predict_ms })
                }
                Benchmark::DigitsSynthetic => unreachable!("grouped benchmark"),
            }
        }
        _ => Err(EsnError::InvalidConfig(
            "dataset kind does not match the benchmark".into(),
        )),
    }
}

/// Study objective for [`crate::hpo::run_study`]: maps a trial's parameters
/// and a derived root seed to the benchmark score.
pub fn study_objective<'a>(
    benchmark: Benchmark,
    spec: &'a ModelSpec,
    data: &'a BenchmarkData,
    n_reservoir: usize,
) -> impl Fn(&TrialParams, u64) -> Result<f64> + 'a {
    move |params, root_seed| {
        run_benchmark(benchmark, spec, params, data, n_reservoir, root_seed)
            .map(|r| r.score)
    }
}

/// Mean with 1.5-IQR outlier fences: values outside
/// [Q1 - 1.5 IQR, Q3 + 1.5 IQR] are dropped before averaging. Quartiles use
/// linear interpolation between order statistics.
pub fn trimmed_mean(values: &[f64]) -> Result<f64> {
    if values.len() < 3 {
        return Err(EsnError::TooFewValues { min: 3, got: values.len() });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |q: f64| -> f64 {
        let h = (sorted.len() - 1) as f64 * q;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (h - lo as f64)
    };
    let q1 = quantile(0.25);
    let q3 = quantile(0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let kept: Vec<f64> = sorted.into_iter().filter(|&v| v >= lo && v <= hi).collect();
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// One reservoir size within a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_reservoir: usize,
    /// Root seeds of the instantiations, in order.
    pub seeds: Vec<u64>,
    /// One score per seed; failed runs carry the direction's sentinel.
    #[serde(with = "score_string_vec")]
    pub seed_scores: Vec<f64>,
    #[serde(with = "score_string_vec")]
    pub train_ms: Vec<f64>,
    #[serde(with = "score_string_vec")]
    pub predict_ms: Vec<f64>,
    /// Seed indices whose runs failed; excluded from the trimming base.
    pub failed_seeds: Vec<usize>,
    #[serde(with = "score_string")]
    pub trimmed_score: f64,
    #[serde(with = "score_string")]
    pub trimmed_train_ms: f64,
    #[serde(with = "score_string")]
    pub trimmed_predict_ms: f64,
}

/// A model's scores and timings across reservoir sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub model_label: String,
    pub benchmark: String,
    pub score_name: String,
    pub rows: Vec<SweepRow>,
}

/// Trimmed mean over the non-failed subset, falling back to a plain mean
/// below 3 survivors and to the sentinel when every run failed.
fn aggregate(values: &[f64], failed: &[usize], sentinel: f64) -> f64 {
    let kept: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|(i, _)| !failed.contains(i))
        .map(|(_, &v)| v)
        .collect();
    match kept.len() {
        0 => sentinel,
        1 | 2 => kept.iter().sum::<f64>() / kept.len() as f64,
        _ => trimmed_mean(&kept).expect("len >= 3"),
    }
}

/// Runs the model at each reservoir size with seeds 0..n_seeds-1, recording
/// per-seed scores and per-phase wall times. Scores are deterministic given
/// the seed set; timings are not. One untimed warm-up run precedes the sweep.
pub fn size_sweep(
    benchmark: Benchmark,
    spec: &ModelSpec,
    params: &TrialParams,
    data: &BenchmarkData,
    sizes: &[usize],
    n_seeds: usize,
) -> Result<SweepRecord> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EsnError::InvalidConfig("sizes must be non-empty and ascending".into()));
    }
    let sentinel = benchmark.direction().sentinel();
    let _ = run_benchmark(benchmark, spec, params, data, sizes[0], 0); // warm-up
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut seeds = Vec::with_capacity(n_seeds);
        let mut seed_scores = Vec::with_capacity(n_seeds);
        let mut train_ms = Vec::with_capacity(n_seeds);
        let mut predict_ms = Vec::with_capacity(n_seeds);
        let mut failed_seeds = Vec::new();
        for seed in 0..n_seeds as u64 {
            seeds.push(seed);
            match run_benchmark(benchmark, spec, params, data, n, seed) {
                Ok(r) if r.score.is_finite() => {
                    seed_scores.push(r.score);
                    train_ms.push(r.train_ms);
                    predict_ms.push(r.predict_ms);
                }
                _ => {
                    failed_seeds.push(seeds.len() - 1);
                    seed_scores.push(sentinel);
                    train_ms.push(0.0);
                    predict_ms.push(0.0);
                }
            }
        }
        let trimmed_score = aggregate(&seed_scores, &failed_seeds, sentinel);
        let trimmed_train_ms = aggregate(&train_ms, &failed_seeds, 0.0);
        let trimmed_predict_ms = aggregate(&predict_ms, &failed_seeds, 0.0);
        rows.push(SweepRow {
            n_reservoir: n,
            seeds,
            seed_scores,
            train_ms,
            predict_ms,
            failed_seeds,
            trimmed_score,
            trimmed_train_ms,
            trimmed_predict_ms,
        });
    }
    Ok(SweepRecord {
        model_label: spec.label(),
        benchmark: benchmark.name().to_string(),
        score_name: benchmark.score_name().to_string(),
        rows,
    })
}

/// Which timed phase a complexity fit describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Train,
    Predict,
}

/// Power-law fit time ~ N^c from a log-log least-squares regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityFit {
    pub phase: Phase,
    pub exponent: f64,
    /// Root mean square residual of the log-log fit.
    pub residual: f64,
    pub sizes: Vec<usize>,
}

/// Least-squares slope of log(time) against log(N).
pub fn fit_complexity(phase: Phase, sizes: &[usize], times: &[f64]) -> Result<ComplexityFit> {
    if sizes.len() < 4 || sizes.len() != times.len() {
        return Err(EsnError::TooFewValues { min: 4, got: sizes.len().min(times.len()) });
    }
    if times.iter().any(|&t| t <= 0.0) {
        return Err(EsnError::NonPositiveTime);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|&t| t.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    Ok(ComplexityFit {
        phase,
        exponent: slope,
        residual: (ss_res / n).sqrt(),
        sizes: sizes.to_vec(),
    })
}

/// One profiled run: wall-clock of the training body (state harvesting plus
/// the ridge solve) and of the prediction phase. The prediction phase times
/// what inference adds on top of the shared state propagation: applying the
/// trained readout to each step's concatenation, which is linear in N.
pub fn profile_run(
    benchmark: Benchmark,
    spec: &ModelSpec,
    params: &TrialParams,
    data: &BenchmarkData,
    n_reservoir: usize,
    root_seed: u64,
) -> Result<(f64, f64)> {
    let ds = match data {
        BenchmarkData::Sequence(ds) => ds,
        BenchmarkData::Grouped { .. } => {
            let r = run_benchmark(benchmark, spec, params, data, n_reservoir, root_seed)?;
            return Ok((r.train_ms, r.predict_ms));
        }
    };
    let cfg = config_for(benchmark, spec, params, n_reservoir);
    let weights = build(&cfg, root_seed)?;
    let t0 = Instant::now();
    let model = train(
        weights,
        cfg,
        ds.train_inputs(),
        ds.train_targets(),
        ds.washout_train,
        params.ridge_beta,
    )?;
    let train_ms = ms(t0.elapsed());
    // Propagate the reservoir over the test split (untimed; this cost is
    // shared with training), then time the readout evaluation per step.
    let mut noise_rng = crate::esn::child_rng(root_seed, crate::esn::streams::NOISE);
    let harvested = crate::training::harvest(
        &model.weights,
        &model.config,
        ds.test_inputs(),
        ds.test_targets(),
        0,
        &mut noise_rng,
    )?;
    let columns: Vec<ndarray::Array1<f64>> =
        (0..harvested.design.ncols()).map(|t| harvested.design.column(t).to_owned()).collect();
    let t1 = Instant::now();
    let mut sink = 0.0;
    for z in &columns {
        let y = model.w_out.dot(z);
        sink += y[0];
    }
    let predict_ms = ms(t1.elapsed());
    if !sink.is_finite() {
        return Err(EsnError::NonFiniteState { step: 0 });
    }
    Ok((train_ms, predict_ms))
}

/// Times the pipeline at each size (one seeded run per size, after a
/// warm-up) and fits both phase exponents.
pub fn profile(
    benchmark: Benchmark,
    spec: &ModelSpec,
    params: &TrialParams,
    data: &BenchmarkData,
    sizes: &[usize],
    root_seed: u64,
) -> Result<(ComplexityFit, ComplexityFit)> {
    let _ = profile_run(benchmark, spec, params, data, sizes[0], root_seed); // warm-up
    let mut train_times = Vec::with_capacity(sizes.len());
    let mut predict_times = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let (train_ms, predict_ms) =
            profile_run(benchmark, spec, params, data, n, root_seed)?;
        train_times.push(train_ms);
        predict_times.push(predict_ms);
    }
    Ok((
        fit_complexity(Phase::Train, sizes, &train_times)?,
        fit_complexity(Phase::Predict, sizes, &predict_times)?,
    ))
}

const CSV_HEADER: [&str; 8] = [
    "model_label",
    "benchmark",
    "N",
    "seed",
    "score_name",
    "score",
    "train_ms",
    "predict_ms",
];

/// Writes sweep records as flat per-seed CSV rows.
pub fn export_results_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(CSV_HEADER)?;
    for record in records {
        for row in &record.rows {
            for (i, &seed) in row.seeds.iter().enumerate() {
                writer.write_record([
                    record.model_label.as_str(),
                    record.benchmark.as_str(),
                    &row.n_reservoir.to_string(),
                    &seed.to_string(),
                    record.score_name.as_str(),
                    &format!("{}", row.seed_scores[i]),
                    &format!("{}", row.train_ms[i]),
                    &format!("{}", row.predict_ms[i]),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// Reads per-seed CSV rows back into sweep records. Non-finite scores are
/// treated as failed seeds; trimmed aggregates are recomputed (they are a
/// pure function of the per-seed data, so a round trip is exact).
pub fn import_results_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut records: Vec<SweepRecord> = Vec::new();
    for (idx, result) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let rec = result.map_err(|e| EsnError::MalformedRecord { line, reason: e.to_string() })?;
        if rec.len() != CSV_HEADER.len() {
            return Err(EsnError::MalformedRecord {
                line,
                reason: format!("expected {} columns, got {}", CSV_HEADER.len(), rec.len()),
            });
        }
        let field = |i: usize| rec[i].trim().to_string();
        let parse_f = |i: usize| -> Result<f64> {
            rec[i].trim().parse().map_err(|e| EsnError::MalformedRecord {
                line,
                reason: format!("column {}: {e}", CSV_HEADER[i]),
            })
        };
        let parse_u = |i: usize| -> Result<u64> {
            rec[i].trim().parse().map_err(|e| EsnError::MalformedRecord {
                line,
                reason: format!("column {}: {e}", CSV_HEADER[i]),
            })
        };
        let (model_label, benchmark, score_name) = (field(0), field(1), field(4));
        let n_reservoir = parse_u(2)? as usize;
        let seed = parse_u(3)?;
        let (score, train_ms, predict_ms) = (parse_f(5)?, parse_f(6)?, parse_f(7)?);

        if records.last().map(|r: &SweepRecord| {
            r.model_label != model_label || r.benchmark != benchmark || r.score_name != score_name
        }) != Some(false)
        {
            records.push(SweepRecord { model_label, benchmark, score_name, rows: Vec::new() });
        }
        let record = records.last_mut().expect("just pushed");
        if record.rows.last().map(|r| r.n_reservoir != n_reservoir) != Some(false) {
            record.rows.push(SweepRow {
                n_reservoir,
                seeds: Vec::new(),
                seed_scores: Vec::new(),
                train_ms: Vec::new(),
                predict_ms: Vec::new(),
                failed_seeds: Vec::new(),
                trimmed_score: 0.0,
                trimmed_train_ms: 0.0,
                trimmed_predict_ms: 0.0,
            });
        }
        let row = record.rows.last_mut().expect("just pushed");
        if !score.is_finite() {
            row.failed_seeds.push(row.seeds.len());
        }
        row.seeds.push(seed);
        row.seed_scores.push(score);
        row.train_ms.push(train_ms);
        row.predict_ms.push(predict_ms);
    }
    for record in &mut records {
        let sentinel = if record.score_name == "f1_macro" {
            Direction::Maximize.sentinel()
        } else {
            Direction::Minimize.sentinel()
        };
        for row in &mut record.rows {
            row.trimmed_score = aggregate(&row.seed_scores, &row.failed_seeds, sentinel);
            row.trimmed_train_ms = aggregate(&row.train_ms, &row.failed_seeds, 0.0);
            row.trimmed_predict_ms = aggregate(&row.predict_ms, &row.failed_seeds, 0.0);
        }
    }
    Ok(records)
}

/// Writes sweep records as JSON (scores and timings as decimal strings so
/// sentinels and exact bit patterns survive the round trip).
pub fn export_results_json(records: &[SweepRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), records)?;
    Ok(())
}

pub fn import_results_json(path: &Path) -> Result<Vec<SweepRecord>> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// One line of the plot-ready report tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPoint {
    pub model_label: String,
    pub benchmark: String,
    pub n_reservoir: usize,
    #[serde(with = "score_string")]
    pub score: f64,
    #[serde(with = "score_string")]
    pub train_ms: f64,
    #[serde(with = "score_string")]
    pub predict_ms: f64,
}

/// Plot-ready tables plus both model rankings: by the best score any size
/// reached, and by the improvement trend from the smallest to the largest
/// size. The two orderings answer different questions, so both are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTables {
    pub points: Vec<ReportPoint>,
    pub rank_by_best: Vec<String>,
    pub rank_by_trend: Vec<String>,
}

pub fn report_tables(records: &[SweepRecord]) -> ReportTables {
    let mut points = Vec::new();
    let mut best: Vec<(String, f64)> = Vec::new();
    let mut trend: Vec<(String, f64)> = Vec::new();
    for record in records {
        let maximize = record.score_name == "f1_macro";
        let sign = if maximize { -1.0 } else { 1.0 };
        let mut model_best = f64::INFINITY;
        for row in &record.rows {
            points.push(ReportPoint {
                model_label: record.model_label.clone(),
                benchmark: record.benchmark.clone(),
                n_reservoir: row.n_reservoir,
                score: row.trimmed_score,
                train_ms: row.trimmed_train_ms,
                predict_ms: row.trimmed_predict_ms,
            });
            model_best = model_best.min(sign * row.trimmed_score);
        }
        best.push((record.model_label.clone(), model_best));
        if let (Some(first), Some(last)) = (record.rows.first(), record.rows.last()) {
            // Positive = the model improved as the reservoir grew.
            trend.push((
                record.model_label.clone(),
                sign * (first.trimmed_score - last.trimmed_score),
            ));
        }
    }
    best.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    trend.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    ReportTables {
        points,
        rank_by_best: best.into_iter().map(|(l, _)| l).collect(),
        rank_by_trend: trend.into_iter().map(|(l, _)| l).collect(),
    }
}
