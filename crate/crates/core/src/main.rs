//! `esnlab` command-line interface: dataset generation, training, studies,
//! size sweeps, runtime profiling, and report tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use esnlab::benchmarks::write_digit_features;
use esnlab::esn::{build, EsnConfig};
use esnlab::harness::{
    default_data, export_results_csv, export_results_json, import_results_csv,
    import_results_json, profile, report_tables, run_benchmark, size_sweep, study_objective,
    Benchmark, BenchmarkData, ModelSpec,
};
use esnlab::hpo::{run_study, SearchSpace, TrialParams, DEFAULT_SEEDS_PER_TRIAL};
use esnlab::training::train;
use esnlab::{EsnError, Result};

/// Echo state network experiment toolkit.
#[derive(Parser)]
#[command(name = "esnlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BenchmarkArg {
    /// One of: narma10, figure8, mackey-glass, digits-synthetic.
    #[arg(long, value_parser = parse_benchmark)]
    benchmark: Benchmark,
}

fn parse_benchmark(s: &str) -> std::result::Result<Benchmark, String> {
    s.parse::<Benchmark>().map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset and write it to disk.
    Gen {
        #[command(flatten)]
        benchmark: BenchmarkArg,
        /// Generator seed (overridden by ESNLAB_SEED).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path (JSON for sequences, CSV for digit features).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model from a JSON config and report its benchmark score.
    Train {
        /// JSON file mirroring the EsnConfig fields.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        benchmark: BenchmarkArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the run summary (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seeded hyperparameter study and save the study record.
    Optimize {
        #[command(flatten)]
        benchmark: BenchmarkArg,
        /// Canonical model label, e.g. V2-FT-GI-DU.
        #[arg(long)]
        model: String,
        /// Trial budget; defaults to the benchmark's protocol value.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        study_seed: u64,
        /// Reservoir size held constant during the study.
        #[arg(long, default_value_t = 100)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep reservoir sizes with multi-seed trimmed aggregation.
    Sweep {
        #[command(flatten)]
        benchmark: BenchmarkArg,
        #[arg(long)]
        model: String,
        /// JSON file with tuned TrialParams; omitted = guideline defaults.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Comma-separated ascending reservoir sizes.
        #[arg(long, value_delimiter = ',', default_values_t = vec![50, 150, 250, 350, 450])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 15)]
        seeds: usize,
        /// Output path; .json or .csv by extension (default CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit runtime-scaling exponents over a size ladder.
    Profile {
        #[command(flatten)]
        benchmark: BenchmarkArg,
        #[arg(long)]
        model: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![100, 200, 400, 800])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn exported sweep results into plot-ready tables.
    Report {
        /// Results file produced by `sweep` (.csv or .json).
        #[arg(long = "in")]
        input: PathBuf,
        /// Output format: csv or json.
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// ESNLAB_SEED, when set and parseable, overrides any seed argument.
fn effective_seed(cli_seed: u64) -> u64 {
    std::env::var("ESNLAB_SEED")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(cli_seed)
}

fn load_params(path: Option<&PathBuf>, benchmark: Benchmark) -> Result<TrialParams> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(esnlab::harness::heuristic_params(benchmark.problem_kind())),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { benchmark, seed, out } => {
            let seed = effective_seed(seed);
            match default_data(benchmark.benchmark, seed)? {
                BenchmarkData::Sequence(ds) => {
                    let file = std::fs::File::create(&out)?;
                    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &ds)?;
                }
                BenchmarkData::Grouped { mut train, test } => {
                    train.groups.extend(test.groups);
                    train.groups.sort_by_key(|g| g.group_id);
                    write_digit_features(&out, &train)?;
                }
            }
            println!("wrote {} dataset to {}", benchmark.benchmark.name(), out.display());
        }
        Command::Train { config, benchmark, seed, out } => {
            let benchmark = benchmark.benchmark;
            let seed = effective_seed(seed);
            let text = std::fs::read_to_string(&config)?;
            let cfg: EsnConfig = serde_json::from_str(&text)?;
            cfg.validate()?;
            let spec = ModelSpec {
                readout_variant: cfg.readout_variant,
                reservoir_activation: cfg.reservoir_activation,
                output_activation: cfg.output_activation,
                weight_distribution: cfg.weight_distribution,
            };
            let params = TrialParams {
                spectral_radius: cfg.spectral_radius,
                leak_rate: cfg.leak_rate,
                density_w: cfg.density_w,
                density_in: cfg.density_in,
                density_fb: cfg.density_fb,
                input_scale: cfg.input_scale,
                feedback_scale: cfg.feedback_scale,
                ridge_beta: 1e-6,
            };
            let data = default_data(benchmark, seed)?;
            let result = run_benchmark(benchmark, &spec, &params, &data, cfg.n_reservoir, seed)?;
            // Exercise a direct train call too so config errors surface with
            // the caller's exact dimensions.
            if let BenchmarkData::Sequence(ds) = &data {
                if cfg.n_inputs == ds.inputs.nrows() && cfg.n_outputs == ds.targets.nrows() {
                    let weights = build(&cfg, seed)?;
                    let _ = train(
                        weights,
                        cfg.clone(),
                        ds.train_inputs(),
                        ds.train_targets(),
                        ds.washout_train,
                        params.ridge_beta,
                    )?;
                }
            }
            let summary = serde_json::json!({
                "benchmark": benchmark.name(),
                "model_label": spec.label(),
                "seed": seed,
                "score_name": benchmark.score_name(),
                "score": format!("{}", result.score),
                "train_ms": format!("{}", result.train_ms),
                "predict_ms": format!("{}", result.predict_ms),
            });
            std::fs::write(&out, serde_json::to_string_pretty(&summary)?)?;
            println!("{} = {} ({})", benchmark.score_name(), result.score, out.display());
        }
        Command::Optimize { benchmark, model, trials, study_seed, size, out } => {
            let benchmark = benchmark.benchmark;
            let study_seed = effective_seed(study_seed);
            let spec = ModelSpec::from_label(&model)?;
            let trials = trials.unwrap_or_else(|| benchmark.default_trials());
            let space = if spec.readout_variant.uses_feedback()
                || benchmark.problem_kind() != esnlab::harness::ProblemKind::Prediction
            {
                SearchSpace::default_regression()
            } else {
                SearchSpace::default_no_feedback()
            };
            let data = default_data(benchmark, study_seed)?;
            let objective = study_objective(benchmark, &spec, &data, size);
            let study = run_study(
                &space,
                trials,
                study_seed,
                benchmark.direction(),
                DEFAULT_SEEDS_PER_TRIAL,
                &format!("{}-{}-N{}", benchmark.name(), model, size),
                benchmark.name(),
                &model,
                &objective,
            )?;
            study.save(&out)?;
            println!(
                "best trial {} with {} = {}",
                study.best_trial_index,
                benchmark.score_name(),
                study.best_trial().best_score
            );
        }
        Command::Sweep { benchmark, model, params, sizes, seeds, out } => {
            let benchmark = benchmark.benchmark;
            let spec = ModelSpec::from_label(&model)?;
            let params = load_params(params.as_ref(), benchmark)?;
            let data = default_data(benchmark, 0)?;
            let record = size_sweep(benchmark, &spec, &params, &data, &sizes, seeds)?;
            if out.extension().and_then(|e| e.to_str()) == Some("json") {
                export_results_json(std::slice::from_ref(&record), &out)?;
            } else {
                export_results_csv(std::slice::from_ref(&record), &out)?;
            }
            println!("swept {} sizes x {} seeds -> {}", sizes.len(), seeds, out.display());
        }
        Command::Profile { benchmark, model, sizes, seed, out } => {
            let benchmark = benchmark.benchmark;
            let seed = effective_seed(seed);
            let spec = ModelSpec::from_label(&model)?;
            let params = esnlab::harness::heuristic_params(benchmark.problem_kind());
            let data = default_data(benchmark, seed)?;
            let (train_fit, predict_fit) = profile(benchmark, &spec, &params, &data, &sizes, seed)?;
            let file = std::fs::File::create(&out)?;
            serde_json::to_writer_pretty(
                std::io::BufWriter::new(file),
                &serde_json::json!({ "train": train_fit, "predict": predict_fit }),
            )?;
            println!(
                "train exponent {:.3}, predict exponent {:.3} ({})",
                train_fit.exponent,
                predict_fit.exponent,
                out.display()
            );
        }
        Command::Report { input, format, out } => {
            let records = if input.extension().and_then(|e| e.to_str()) == Some("json") {
                import_results_json(&input)?
            } else {
                import_results_csv(&input)?
            };
            let tables = report_tables(&records);
            match format.as_str() {
                "json" => {
                    let file = std::fs::File::create(&out)?;
                    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &tables)?;
                }
                "csv" => {
                    let mut writer = csv::Writer::from_path(&out)?;
                    writer.write_record([
                        "model_label",
                        "benchmark",
                        "N",
                        "score",
                        "train_ms",
                        "predict_ms",
                    ])?;
                    for p in &tables.points {
                        writer.write_record([
                            p.model_label.as_str(),
                            p.benchmark.as_str(),
                            &p.n_reservoir.to_string(),
                            &format!("{}", p.score),
                            &format!("{}", p.train_ms),
                            &format!("{}", p.predict_ms),
                        ])?;
                    }
                    writer.flush()?;
                }
                other => {
                    return Err(EsnError::InvalidConfig(format!(
                        "unknown report format `{other}` (expected csv or json)"
                    )))
                }
            }
            println!("report with {} points -> {}", tables.points.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Exit codes: 0 success, 1 usage error, 2 run failure.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep clap's help/version output on stdout with success status.
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
