//! Readout training and inference: teacher-forced state harvesting, ridge
//! regression, prediction (teacher-forced and free-running), and
//! averaged-state classification.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::solveh::{FactorizeHInto, SolveH};
use ndarray_linalg::{EigValsh, UPLO};
use rand_chacha::ChaCha8Rng;

use crate::benchmarks::GroupedDataset;
use crate::error::{EsnError, Result};
use crate::esn::{
    activate, child_rng, concatenation, sample_noise, step, streams, Activation, EsnConfig,
    ReservoirState, WeightSet,
};

/// Condition-number estimate beyond which an unregularized solve is refused.
pub const SINGULAR_CONDITION_LIMIT: f64 = 1e12;
/// Teacher value substituted for 1.0 when the output activation is tanh.
pub const TANH_TARGET_CLIP: f64 = 0.99999;

/// A fitted model, ready for prediction, generation, or classification.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: EsnConfig,
    pub weights: WeightSet,
    pub w_out: Array2<f64>,
    pub ridge_beta: f64,
    pub washout: usize,
    /// Reservoir state at the end of training; free-running generation
    /// continues from here unless the caller supplies another state.
    pub final_train_state: ReservoirState,
}

/// Design and teacher matrices collected after washout.
#[derive(Debug, Clone)]
pub struct HarvestResult {
    /// concat-length x (T - washout)
    pub design: Array2<f64>,
    /// L x (T - washout)
    pub targets: Array2<f64>,
    pub final_state: ReservoirState,
}

/// Runs the reservoir over `inputs` under teacher forcing (the feedback term
/// uses the teacher output of the previous step, with y(-1) = 0) and collects
/// the post-washout readout concatenations. Noise is injected per the
/// configured `noise_scale` from `noise_rng`.
pub fn harvest(
    weights: &WeightSet,
    config: &EsnConfig,
    inputs: ArrayView2<f64>,
    teacher: ArrayView2<f64>,
    washout: usize,
    noise_rng: &mut ChaCha8Rng,
) -> Result<HarvestResult> {
    let t_total = teacher.ncols();
    if washout >= t_total {
        return Err(EsnError::WashoutTooLarge { washout, len: t_total });
    }
    if inputs.ncols() != t_total {
        return Err(EsnError::DimensionMismatch(format!(
            "inputs have {} columns, teacher has {}",
            inputs.ncols(),
            t_total
        )));
    }

    let n = config.n_reservoir;
    let c = config.concat_len();
    let kept = t_total - washout;
    let mut design = Array2::zeros((c, kept));
    let mut targets = Array2::zeros((config.n_outputs, kept));
    let mut state = ReservoirState::zeros(n, config.n_outputs);

    for t in 0..t_total {
        let noise = if config.noise_scale > 0.0 {
            Some(sample_noise(noise_rng, n, config.noise_scale))
        } else {
            None
        };
        let u = inputs.column(t);
        step(&mut state, u, noise.as_ref().map(|v| v.view()), weights, config)?;
        if t >= washout {
            let z = concatenation(config.readout_variant, u, state.x.view(), state.y_prev.view());
            design.column_mut(t - washout).assign(&z);
            targets.column_mut(t - washout).assign(&teacher.column(t));
        }
        // Teacher forcing: the next step sees the true output of this step.
        state.y_prev.assign(&teacher.column(t));
    }

    Ok(HarvestResult { design, targets, final_state: state })
}

/// Maps teacher targets into the readout's linear domain. A tanh output
/// activation requires arctanh of the targets, clipped into
/// `[-TANH_TARGET_CLIP, TANH_TARGET_CLIP]` so the transform is total.
pub fn output_inverse_transform(g: Activation, targets: &Array2<f64>) -> Array2<f64> {
    match g {
        Activation::Tanh => {
            targets.mapv(|v| v.clamp(-TANH_TARGET_CLIP, TANH_TARGET_CLIP).atanh())
        }
        _ => targets.clone(),
    }
}

/// Ridge regression: `W_out = Y Z^T (Z Z^T + beta I)^(-1)`, computed by a
/// symmetric factorization rather than an explicit inverse. With `beta = 0`
/// an ill-conditioned system is refused so studies record the failure.
pub fn fit_ridge(design: &Array2<f64>, targets: &Array2<f64>, beta: f64) -> Result<Array2<f64>> {
    let (c, m) = design.dim();
    if c == 0 || m == 0 || targets.ncols() != m {
        return Err(EsnError::EmptyInput);
    }
    let mut a = design.dot(&design.t());
    for i in 0..c {
        a[[i, i]] += beta;
    }
    if beta == 0.0 {
        let eigs = a.eigvalsh(UPLO::Lower)?;
        let max = eigs.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let min = eigs.iter().fold(f64::INFINITY, |acc, &v| acc.min(v.abs()));
        let cond = if min > 0.0 { max / min } else { f64::INFINITY };
        if cond > SINGULAR_CONDITION_LIMIT {
            return Err(EsnError::SingularSystem { cond });
        }
    }
    let b = targets.dot(&design.t());
    let factor = a.factorizeh_into()?;
    let l = targets.nrows();
    let mut w_out = Array2::zeros((l, c));
    for row in 0..l {
        let rhs = b.row(row).to_owned();
        let sol = factor.solveh(&rhs)?;
        w_out.row_mut(row).assign(&sol);
    }
    Ok(w_out)
}

/// Harvest under teacher forcing, transform targets for the output
/// activation, fit the readout by ridge regression, and package the model.
pub fn train(
    weights: WeightSet,
    config: EsnConfig,
    inputs: ArrayView2<f64>,
    teacher: ArrayView2<f64>,
    washout: usize,
    beta: f64,
) -> Result<TrainedModel> {
    let mut noise_rng = child_rng(weights.root_seed, streams::NOISE);
    let harvested = harvest(&weights, &config, inputs, teacher, washout, &mut noise_rng)?;
    let linear_targets = output_inverse_transform(config.output_activation, &harvested.targets);
    let w_out = fit_ridge(&harvested.design, &linear_targets, beta)?;
    Ok(TrainedModel {
        config,
        weights,
        w_out,
        ridge_beta: beta,
        washout,
        final_train_state: harvested.final_state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictMode {
    /// The feedback path is driven by a supplied teacher stream.
    TeacherForced,
    /// Closed loop: the model's own previous output feeds back.
    FreeRun,
}

/// Inputs to [`predict`]. `noise_scale` overrides the config's training
/// noise for the duration of the prediction.
pub struct PredictSetup<'a> {
    pub mode: PredictMode,
    pub horizon: usize,
    pub inputs: Option<ArrayView2<'a, f64>>,
    pub teacher_feedback: Option<ArrayView2<'a, f64>>,
    pub noise_scale: f64,
    pub initial_state: Option<ReservoirState>,
}

/// Runs the trained readout over `horizon` steps. Returns the L x horizon
/// output matrix and the final reservoir state (so a caller can continue a
/// generation run where the previous one stopped).
pub fn predict(model: &TrainedModel, setup: PredictSetup) -> Result<(Array2<f64>, ReservoirState)> {
    let config = &model.config;
    let weights = &model.weights;
    let n = config.n_reservoir;
    let l = config.n_outputs;

    if setup.mode == PredictMode::FreeRun
        && !weights.has_feedback_weights()
        && !config.readout_variant.uses_feedback()
    {
        return Err(EsnError::FreeRunWithoutFeedback);
    }
    if config.n_inputs > 0 && setup.inputs.is_none() {
        return Err(EsnError::DimensionMismatch(
            "model expects inputs but none were supplied".into(),
        ));
    }
    if let Some(inputs) = &setup.inputs {
        if inputs.ncols() < setup.horizon {
            return Err(EsnError::DimensionMismatch(format!(
                "{} input columns for a horizon of {}",
                inputs.ncols(),
                setup.horizon
            )));
        }
    }
    if setup.mode == PredictMode::TeacherForced {
        if let Some(fb) = &setup.teacher_feedback {
            if fb.ncols() < setup.horizon {
                return Err(EsnError::DimensionMismatch(format!(
                    "{} teacher columns for a horizon of {}",
                    fb.ncols(),
                    setup.horizon
                )));
            }
        }
    }

    let mut state = setup.initial_state.unwrap_or_else(|| ReservoirState::zeros(n, l));
    let mut noise_rng = child_rng(weights.root_seed, streams::NOISE);
    let empty = Array1::zeros(0);
    let mut outputs = Array2::zeros((l, setup.horizon));

    for t in 0..setup.horizon {
        let u: ArrayView1<f64> = match &setup.inputs {
            Some(inputs) => inputs.column(t),
            None => empty.view(),
        };
        let noise = if setup.noise_scale > 0.0 {
            Some(sample_noise(&mut noise_rng, n, setup.noise_scale))
        } else {
            None
        };
        step(&mut state, u, noise.as_ref().map(|v| v.view()), weights, config)?;
        let z = concatenation(config.readout_variant, u, state.x.view(), state.y_prev.view());
        let y = model.w_out.dot(&z).mapv(|v| activate(config.output_activation, v));
        if y.iter().any(|v| !v.is_finite()) {
            return Err(EsnError::NonFiniteState { step: state.time_index });
        }
        outputs.column_mut(t).assign(&y);
        match (setup.mode, &setup.teacher_feedback) {
            (PredictMode::TeacherForced, Some(fb)) => state.y_prev.assign(&fb.column(t)),
            _ => state.y_prev = y,
        }
    }
    Ok((outputs, state))
}

/// Mean readout concatenation over one group's samples (after the per-group
/// washout), with the reservoir starting from zero. `teacher` drives the
/// output components of the concatenation; inference passes `None` and those
/// components stay zero.
fn averaged_concatenation(
    weights: &WeightSet,
    config: &EsnConfig,
    group: ArrayView2<f64>,
    washout: usize,
    teacher: Option<&Array1<f64>>,
    noise_rng: &mut ChaCha8Rng,
) -> Result<Array1<f64>> {
    let samples = group.ncols();
    if samples == 0 {
        return Err(EsnError::EmptyGroup);
    }
    if washout >= samples {
        return Err(EsnError::WashoutTooLarge { washout, len: samples });
    }
    let n = config.n_reservoir;
    let mut state = ReservoirState::zeros(n, config.n_outputs);
    let mut sum = Array1::zeros(config.concat_len());
    for t in 0..samples {
        let noise = if config.noise_scale > 0.0 {
            Some(sample_noise(noise_rng, n, config.noise_scale))
        } else {
            None
        };
        let u = group.column(t);
        step(&mut state, u, noise.as_ref().map(|v| v.view()), weights, config)?;
        if t >= washout {
            sum += &concatenation(config.readout_variant, u, state.x.view(), state.y_prev.view());
        }
        if let Some(target) = teacher {
            state.y_prev.assign(target);
        }
    }
    Ok(sum / (samples - washout) as f64)
}

/// Trains a classifier readout: one design column per group, each the
/// time-average of the readout concatenation over that group's samples.
/// The reservoir is reset to zero between groups.
pub fn fit_classifier(
    weights: WeightSet,
    config: EsnConfig,
    dataset: &GroupedDataset,
    washout_per_group: usize,
    beta: f64,
) -> Result<TrainedModel> {
    if !config.classifier_mode {
        return Err(EsnError::InvalidConfig(
            "fit_classifier requires classifier_mode".into(),
        ));
    }
    let l = config.n_outputs;
    let hot = if config.output_activation == Activation::Tanh {
        TANH_TARGET_CLIP
    } else {
        1.0
    };
    let groups = &dataset.groups;
    if groups.is_empty() {
        return Err(EsnError::EmptyGroup);
    }

    let mut noise_rng = child_rng(weights.root_seed, streams::NOISE);
    let mut design = Array2::zeros((config.concat_len(), groups.len()));
    let mut targets = Array2::zeros((l, groups.len()));
    for (gi, group) in groups.iter().enumerate() {
        if group.label >= l {
            return Err(EsnError::UnknownLabel(group.label as i64));
        }
        let mut one_hot = Array1::zeros(l);
        one_hot[group.label] = hot;
        let avg = averaged_concatenation(
            &weights,
            &config,
            group.features.view(),
            washout_per_group,
            Some(&one_hot),
            &mut noise_rng,
        )?;
        design.column_mut(gi).assign(&avg);
        targets.column_mut(gi).assign(&one_hot);
    }

    let linear_targets = output_inverse_transform(config.output_activation, &targets);
    let w_out = fit_ridge(&design, &linear_targets, beta)?;
    let final_train_state = ReservoirState::zeros(config.n_reservoir, l);
    Ok(TrainedModel {
        config,
        weights,
        w_out,
        ridge_beta: beta,
        washout: washout_per_group,
        final_train_state,
    })
}

/// Scores one group and returns `(scores, predicted_label)`; ties break
/// toward the lowest class index. The reservoir starts from zero, so the
/// result is independent of any other group.
pub fn classify(model: &TrainedModel, group: ArrayView2<f64>) -> Result<(Array1<f64>, usize)> {
    let mut noise_rng = child_rng(model.weights.root_seed, streams::NOISE);
    let avg = averaged_concatenation(
        &model.weights,
        &model.config,
        group,
        model.washout,
        None,
        &mut noise_rng,
    )?;
    let scores = model
        .w_out
        .dot(&avg)
        .mapv(|v| activate(model.config.output_activation, v));
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((scores, best))
}
