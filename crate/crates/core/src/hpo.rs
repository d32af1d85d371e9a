//! Seeded hyperparameter studies: each trial samples one parameter set and
//! evaluates it with several seeds, keeping the best score.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EsnError, Result};

/// How many model seeds each trial evaluates.
pub const DEFAULT_SEEDS_PER_TRIAL: usize = 10;

/// A one-dimensional sampling prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Prior {
    /// Uniform on [lo, hi).
    Uniform { lo: f64, hi: f64 },
    /// Uniform in log space on [lo, hi); requires lo > 0.
    LogUniform { lo: f64, hi: f64 },
    /// Held constant.
    Fixed(f64),
}

impl Prior {
    fn validate(&self, name: &str) -> Result<()> {
        match *self {
            Prior::Uniform { lo, hi } if lo < hi => Ok(()),
            Prior::LogUniform { lo, hi } if lo < hi && lo > 0.0 => Ok(()),
            Prior::Fixed(_) => Ok(()),
            _ => Err(EsnError::InvalidConfig(format!("prior for {name} needs lower < upper"))),
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Prior::Uniform { lo, hi } => rng.gen_range(lo..hi),
            Prior::LogUniform { lo, hi } => rng.gen_range(lo.ln()..hi.ln()).exp(),
            Prior::Fixed(v) => v,
        }
    }
}

/// Per-parameter priors for the continuous hyperparameters. Structural
/// choices (reservoir size, readout variant, activations, distribution)
/// are held constant during a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub spectral_radius: Prior,
    pub leak_rate: Prior,
    pub density_w: Prior,
    pub density_in: Prior,
    pub density_fb: Prior,
    pub input_scale: Prior,
    pub feedback_scale: Prior,
    pub ridge_beta: Prior,
}

impl SearchSpace {
    /// Default ranges bracketing every guideline value: rho in (0.01, 1.25],
    /// alpha in (0.01, 1.0], densities in [0.05, 1.0], scales log-uniform in
    /// [1e-3, 10], beta log-uniform in [1e-9, 1].
    pub fn default_regression() -> Self {
        SearchSpace {
            spectral_radius: Prior::Uniform { lo: 0.01, hi: 1.25 },
            leak_rate: Prior::Uniform { lo: 0.01, hi: 1.0 },
            density_w: Prior::Uniform { lo: 0.05, hi: 1.0 },
            density_in: Prior::Uniform { lo: 0.05, hi: 1.0 },
            density_fb: Prior::Uniform { lo: 0.05, hi: 1.0 },
            input_scale: Prior::LogUniform { lo: 1e-3, hi: 10.0 },
            feedback_scale: Prior::LogUniform { lo: 1e-3, hi: 10.0 },
            ridge_beta: Prior::LogUniform { lo: 1e-9, hi: 1.0 },
        }
    }

    /// Same ranges with the feedback path disabled (scaling and density of
    /// the feedback weights set to zero).
    pub fn default_no_feedback() -> Self {
        SearchSpace {
            density_fb: Prior::Fixed(0.0),
            feedback_scale: Prior::Fixed(0.0),
            ..Self::default_regression()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spectral_radius.validate("spectral_radius")?;
        self.leak_rate.validate("leak_rate")?;
        self.density_w.validate("density_w")?;
        self.density_in.validate("density_in")?;
        self.density_fb.validate("density_fb")?;
        self.input_scale.validate("input_scale")?;
        self.feedback_scale.validate("feedback_scale")?;
        self.ridge_beta.validate("ridge_beta")
    }
}

/// One sampled hyperparameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub spectral_radius: f64,
    pub leak_rate: f64,
    pub density_w: f64,
    pub density_in: f64,
    pub density_fb: f64,
    pub input_scale: f64,
    pub feedback_scale: f64,
    pub ridge_beta: f64,
}

/// Whether lower or higher scores win.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// e.g. RMSE.
    Minimize,
    /// e.g. macro-F1.
    Maximize,
}

impl Direction {
    /// The score recorded for a failed or non-finite run.
    pub fn sentinel(self) -> f64 {
        match self {
            Direction::Minimize => f64::INFINITY,
            Direction::Maximize => 0.0,
        }
    }

    pub fn is_better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Direction::Minimize => candidate < incumbent,
            Direction::Maximize => candidate > incumbent,
        }
    }
}

/// Deterministic trial sampling: a pure function of (space, study_seed,
/// trial_index). Parameters are drawn in fixed field order from a stream
/// dedicated to the trial; log-uniform priors are sampled in log space.
pub fn sample_trial(space: &SearchSpace, study_seed: u64, trial_index: u64) -> TrialParams {
    let mut rng = ChaCha8Rng::seed_from_u64(study_seed);
    rng.set_stream(trial_index);
    TrialParams {
        spectral_radius: space.spectral_radius.sample(&mut rng),
        leak_rate: space.leak_rate.sample(&mut rng),
        density_w: space.density_w.sample(&mut rng),
        density_in: space.density_in.sample(&mut rng),
        density_fb: space.density_fb.sample(&mut rng),
        input_scale: space.input_scale.sample(&mut rng),
        feedback_scale: space.feedback_scale.sample(&mut rng),
        ridge_beta: space.ridge_beta.sample(&mut rng),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Root seed for instantiation `seed_index` of trial `trial_index`.
pub fn derive_seed(study_seed: u64, trial_index: u64, seed_index: u64) -> u64 {
    splitmix64(splitmix64(study_seed ^ splitmix64(trial_index)) ^ seed_index)
}

/// Evaluates one parameter set with `n_seeds` model seeds; the objective
/// maps (params, root_seed) to a score. Errored or non-finite runs are
/// recorded as the direction's sentinel; the best finite score wins.
pub fn evaluate_config<F>(
    params: &TrialParams,
    n_seeds: usize,
    direction: Direction,
    study_seed: u64,
    trial_index: u64,
    objective: &F,
) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&TrialParams, u64) -> Result<f64>,
{
    if n_seeds == 0 {
        return Err(EsnError::InvalidConfig("n_seeds must be >= 1".into()));
    }
    let mut scores = Vec::with_capacity(n_seeds);
    let mut failures = 0;
    for seed_index in 0..n_seeds {
        let root_seed = derive_seed(study_seed, trial_index, seed_index as u64);
        let score = match objective(params, root_seed) {
            Ok(s) if s.is_finite() => s,
            _ => {
                failures += 1;
                direction.sentinel()
            }
        };
        scores.push(score);
    }
    if failures == n_seeds && scores.iter().all(|&s| s == direction.sentinel()) {
        return Err(EsnError::AllSeedsFailed(n_seeds));
    }
    let best = scores
        .iter()
        .copied()
        .fold(direction.sentinel(), |acc, s| if direction.is_better(s, acc) { s } else { acc });
    Ok((best, scores))
}

pub(crate) mod score_string {
    //! Scores persist as decimal strings to avoid precision drift across
    //! platforms; `format!("{}")` round-trips every finite f64 exactly.
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) mod score_string_vec {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&format!("{x}"))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.into_iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub params: TrialParams,
    #[serde(with = "score_string_vec")]
    pub seed_scores: Vec<f64>,
    #[serde(with = "score_string")]
    pub best_score: f64,
    /// True when every seed of the trial errored out.
    pub all_seeds_failed: bool,
}

/// Complete, reproducible record of one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub study_label: String,
    pub benchmark: String,
    pub model_label: String,
    pub direction: Direction,
    pub trials: Vec<TrialRecord>,
    pub best_trial_index: u64,
    pub study_seed: u64,
    pub n_seeds: usize,
}

impl StudyRecord {
    pub fn best_trial(&self) -> &TrialRecord {
        &self.trials[self.best_trial_index as usize]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<StudyRecord> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Runs trials 0..n_trials-1. All randomness derives from (study_seed,
/// trial_index, seed_index) so the record is a pure function of its inputs
/// regardless of execution order. A trial whose seeds all fail is recorded
/// with the sentinel best score; it never aborts the study.
#[allow(clippy::too_many_arguments)]
pub fn run_study<F>(
    space: &SearchSpace,
    n_trials: usize,
    study_seed: u64,
    direction: Direction,
    n_seeds: usize,
    study_label: &str,
    benchmark: &str,
    model_label: &str,
    objective: &F,
) -> Result<StudyRecord>
where
    F: Fn(&TrialParams, u64) -> Result<f64>,
{
    if n_trials == 0 {
        return Err(EsnError::InvalidConfig("n_trials must be >= 1".into()));
    }
    space.validate()?;
    let mut trials = Vec::with_capacity(n_trials);
    for trial_index in 0..n_trials as u64 {
        let params = sample_trial(space, study_seed, trial_index);
        let (best_score, seed_scores, all_seeds_failed) =
            match evaluate_config(&params, n_seeds, direction, study_seed, trial_index, objective)
            {
                Ok((best, scores)) => (best, scores, false),
                Err(EsnError::AllSeedsFailed(_)) => {
                    (direction.sentinel(), vec![direction.sentinel(); n_seeds], true)
                }
                Err(e) => return Err(e),
            };
        trials.push(TrialRecord { trial_index, params, seed_scores, best_score, all_seeds_failed });
    }
    let mut best_trial_index = 0u64;
    for t in &trials {
        if direction.is_better(t.best_score, trials[best_trial_index as usize].best_score) {
            best_trial_index = t.trial_index;
        }
    }
    Ok(StudyRecord {
        study_label: study_label.to_string(),
        benchmark: benchmark.to_string(),
        model_label: model_label.to_string(),
        direction,
        trials,
        best_trial_index,
        study_seed,
        n_seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic() {
        let space = SearchSpace::default_regression();
        let a = sample_trial(&space, 0, 3);
        let b = sample_trial(&space, 0, 3);
        assert_eq!(a, b);
        let c = sample_trial(&space, 0, 4);
        assert_ne!(a, c);
        let d = sample_trial(&space, 1, 3);
        assert_ne!(a, d);
    }

    #[test]
    fn fixed_prior_always_returns_its_value() {
        let space = SearchSpace {
            spectral_radius: Prior::Fixed(0.7),
            ..SearchSpace::default_no_feedback()
        };
        for i in 0..20 {
            let p = sample_trial(&space, 9, i);
            assert_eq!(p.spectral_radius, 0.7);
            assert_eq!(p.density_fb, 0.0);
            assert_eq!(p.feedback_scale, 0.0);
        }
    }

    #[test]
    fn samples_respect_their_ranges() {
        let space = SearchSpace::default_regression();
        for i in 0..500 {
            let p = sample_trial(&space, 2, i);
            assert!((0.01..1.25).contains(&p.spectral_radius));
            assert!((0.01..1.0).contains(&p.leak_rate));
            assert!((0.05..1.0).contains(&p.density_w));
            assert!((1e-3..10.0).contains(&p.input_scale));
            assert!((1e-9..1.0).contains(&p.ridge_beta));
        }
    }

    #[test]
    fn log_uniform_beta_is_uniform_in_log10() {
        // Kolmogorov-Smirnov statistic of log10(beta) against U[-9, 0].
        let space = SearchSpace::default_regression();
        let n = 10_000;
        let mut logs: Vec<f64> = (0..n)
            .map(|i| sample_trial(&space, 5, i).ridge_beta.log10())
            .collect();
        logs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &v) in logs.iter().enumerate() {
            let cdf = (v + 9.0) / 9.0;
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            ks = ks.max((cdf - lo).abs()).max((cdf - hi).abs());
        }
        assert!(ks < 0.02, "KS statistic {ks} too large");
    }

    #[test]
    fn derive_seed_varies_with_every_index() {
        let base = derive_seed(0, 0, 0);
        assert_ne!(base, derive_seed(0, 0, 1));
        assert_ne!(base, derive_seed(0, 1, 0));
        assert_ne!(base, derive_seed(1, 0, 0));
        assert_eq!(derive_seed(7, 3, 2), derive_seed(7, 3, 2));
    }

    #[test]
    fn evaluate_config_keeps_the_best_seed() {
        // Objective: score = seed mod 10 as a float; minimal over seeds.
        let obj = |_: &TrialParams, seed: u64| Ok((seed % 10) as f64);
        let params = sample_trial(&SearchSpace::default_regression(), 0, 0);
        let (best, scores) =
            evaluate_config(&params, 10, Direction::Minimize, 0, 0, &obj).unwrap();
        assert_eq!(scores.len(), 10);
        assert_eq!(best, scores.iter().cloned().fold(f64::INFINITY, f64::min));

        let (single, singles) =
            evaluate_config(&params, 1, Direction::Minimize, 0, 0, &obj).unwrap();
        assert_eq!(single, singles[0]);
    }

    #[test]
    fn failures_become_sentinels() {
        let params = sample_trial(&SearchSpace::default_regression(), 0, 0);
        let call = std::cell::Cell::new(0usize);
        let obj = |_: &TrialParams, _: u64| {
            let i = call.get();
            call.set(i + 1);
            match i {
                0 => Ok(0.5),
                1 => Ok(0.2),
                _ => Ok(f64::NAN),
            }
        };
        let (best, scores) = evaluate_config(&params, 3, Direction::Minimize, 0, 0, &obj).unwrap();
        assert_eq!(best, 0.2);
        assert_eq!(scores[2], f64::INFINITY);

        let all_fail =
            |_: &TrialParams, _: u64| -> Result<f64> { Err(EsnError::EmptyInput) };
        assert!(matches!(
            evaluate_config(&params, 3, Direction::Minimize, 0, 0, &all_fail),
            Err(EsnError::AllSeedsFailed(3))
        ));
    }

    #[test]
    fn study_identifies_the_minimal_rho_trial() {
        // Stub objective: the score is the sampled spectral radius itself.
        let space = SearchSpace::default_regression();
        let obj = |p: &TrialParams, _: u64| Ok(p.spectral_radius);
        let study = run_study(
            &space, 25, 0, Direction::Minimize, 3, "stub", "none", "V1", &obj,
        )
        .unwrap();
        assert_eq!(study.trials.len(), 25);
        let min_rho = study
            .trials
            .iter()
            .map(|t| t.params.spectral_radius)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(study.best_trial().params.spectral_radius, min_rho);

        let single = run_study(
            &space, 1, 0, Direction::Minimize, 3, "stub", "none", "V1", &obj,
        )
        .unwrap();
        assert_eq!(single.best_trial_index, 0);
    }

    #[test]
    fn monotone_budget_and_determinism() {
        let space = SearchSpace::default_regression();
        let obj = |p: &TrialParams, _: u64| Ok(p.ridge_beta);
        let full = run_study(
            &space, 30, 11, Direction::Minimize, 2, "s", "b", "m", &obj,
        )
        .unwrap();
        let partial = run_study(
            &space, 10, 11, Direction::Minimize, 2, "s", "b", "m", &obj,
        )
        .unwrap();
        assert!(full.best_trial().best_score <= partial.best_trial().best_score);
        let again = run_study(
            &space, 30, 11, Direction::Minimize, 2, "s", "b", "m", &obj,
        )
        .unwrap();
        assert_eq!(full, again);
    }

    #[test]
    fn failed_trials_do_not_abort_the_study() {
        let space = SearchSpace::default_regression();
        // Every trial with even index fails all its seeds.
        let obj = |p: &TrialParams, _: u64| -> Result<f64> {
            if p.leak_rate < 0.5 {
                Err(EsnError::EmptyInput)
            } else {
                Ok(p.leak_rate)
            }
        };
        let study = run_study(
            &space, 40, 3, Direction::Minimize, 2, "s", "b", "m", &obj,
        )
        .unwrap();
        assert_eq!(study.trials.len(), 40);
        assert!(study.trials.iter().any(|t| t.all_seeds_failed));
        assert!(study.best_trial().best_score.is_finite());
    }

    #[test]
    fn study_record_json_round_trip_is_exact() {
        let space = SearchSpace::default_regression();
        let obj = |p: &TrialParams, seed: u64| {
            if seed % 5 == 0 {
                Ok(f64::INFINITY)
            } else {
                Ok(p.spectral_radius * 1.000000000001)
            }
        };
        let study = run_study(
            &space, 8, 17, Direction::Minimize, 4, "rt", "narma10", "V2-FT-GT-DU", &obj,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.json");
        study.save(&path).unwrap();
        let loaded = StudyRecord::load(&path).unwrap();
        assert_eq!(study, loaded);
        for (a, b) in study.trials.iter().zip(loaded.trials.iter()) {
            for (x, y) in a.seed_scores.iter().zip(b.seed_scores.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn maximize_direction_prefers_larger_scores() {
        let space = SearchSpace::default_regression();
        let obj = |p: &TrialParams, _: u64| Ok(p.leak_rate);
        let study = run_study(
            &space, 20, 0, Direction::Maximize, 2, "s", "b", "m", &obj,
        )
        .unwrap();
        let max_alpha = study
            .trials
            .iter()
            .map(|t| t.params.leak_rate)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(study.best_trial().params.leak_rate, max_alpha);
        assert_eq!(Direction::Maximize.sentinel(), 0.0);
    }
}
