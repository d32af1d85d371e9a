//! Echo state network core: configuration, seeded weight construction with
//! spectral-radius scaling, the leaky-integrator state update, and the four
//! readout wirings.

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::EigVals;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EsnError, Result};

/// Eigenvalue magnitude below which a reservoir is declared degenerate.
pub const EPS_EIGENVALUE: f64 = 1e-12;
/// How many times `build` resamples a degenerate reservoir before giving up.
pub const MAX_BUILD_ATTEMPTS: u64 = 8;

/// Fixed child-stream indices derived from one root seed. Every random
/// consumer gets its own stream so adding a consumer never perturbs the
/// others.
pub mod streams {
    pub const RESERVOIR: u64 = 0;
    pub const INPUT: u64 = 1;
    pub const FEEDBACK: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const INIT_STATE: u64 = 4;
    /// Offset between reservoir resampling attempts.
    pub const RESAMPLE_STRIDE: u64 = 16;
}

/// Deterministic child RNG for one consumer of a root seed.
pub fn child_rng(root_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Sinc,
    Identity,
}

/// Which vectors are concatenated in front of `W_out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutVariant {
    StateOnly,
    InputState,
    StateFeedback,
    InputStateFeedback,
}

impl ReadoutVariant {
    pub fn uses_input(self) -> bool {
        matches!(self, Self::InputState | Self::InputStateFeedback)
    }

    pub fn uses_feedback(self) -> bool {
        matches!(self, Self::StateFeedback | Self::InputStateFeedback)
    }

    /// Length of the readout concatenation. Variants that include the input
    /// also carry the constant bias value of 1.0.
    pub fn concat_len(self, n_inputs: usize, n_reservoir: usize, n_outputs: usize) -> usize {
        match self {
            Self::StateOnly => n_reservoir,
            Self::InputState => 1 + n_inputs + n_reservoir,
            Self::StateFeedback => n_reservoir + n_outputs,
            Self::InputStateFeedback => 1 + n_inputs + n_reservoir + n_outputs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDistribution {
    Uniform,
    Bivalued,
    Laplace,
}

/// All hyperparameters and architecture switches for one ESN model variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EsnConfig {
    pub n_inputs: usize,
    pub n_reservoir: usize,
    pub n_outputs: usize,
    pub spectral_radius: f64,
    pub leak_rate: f64,
    pub density_w: f64,
    pub density_in: f64,
    pub density_fb: f64,
    pub input_scale: f64,
    pub feedback_scale: f64,
    pub noise_scale: f64,
    pub reservoir_activation: Activation,
    pub output_activation: Activation,
    pub readout_variant: ReadoutVariant,
    pub weight_distribution: WeightDistribution,
    pub bias_enabled: bool,
    pub classifier_mode: bool,
}

impl EsnConfig {
    /// A plain input-driven ESN; callers adjust fields as needed.
    pub fn new(n_inputs: usize, n_reservoir: usize, n_outputs: usize) -> Self {
        Self {
            n_inputs,
            n_reservoir,
            n_outputs,
            spectral_radius: 0.9,
            leak_rate: 1.0,
            density_w: 0.15,
            density_in: 0.95,
            density_fb: 0.0,
            input_scale: 1.0,
            feedback_scale: 0.0,
            noise_scale: 0.0,
            reservoir_activation: Activation::Tanh,
            output_activation: Activation::Identity,
            readout_variant: ReadoutVariant::InputState,
            weight_distribution: WeightDistribution::Uniform,
            bias_enabled: true,
            classifier_mode: false,
        }
    }

    /// Checks every invariant; returns non-fatal warnings (e.g. a spectral
    /// radius at or above 1, which endangers the echo state property).
    pub fn validate(&self) -> Result<Vec<String>> {
        let err = |m: String| Err(EsnError::InvalidConfig(m));
        if self.n_reservoir < 1 {
            return err("n_reservoir must be >= 1".into());
        }
        if self.n_outputs < 1 {
            return err("n_outputs must be >= 1".into());
        }
        if !(self.leak_rate > 0.0 && self.leak_rate <= 1.0) {
            return err(format!("leak_rate must lie in (0, 1], got {}", self.leak_rate));
        }
        if !(self.spectral_radius > 0.0) {
            return err(format!("spectral_radius must be > 0, got {}", self.spectral_radius));
        }
        for (name, d) in [
            ("density_w", self.density_w),
            ("density_in", self.density_in),
            ("density_fb", self.density_fb),
        ] {
            if !(0.0..=1.0).contains(&d) {
                return err(format!("{name} must lie in [0, 1], got {d}"));
            }
        }
        for (name, s) in [
            ("input_scale", self.input_scale),
            ("feedback_scale", self.feedback_scale),
            ("noise_scale", self.noise_scale),
        ] {
            if !(s >= 0.0) {
                return err(format!("{name} must be >= 0, got {s}"));
            }
        }
        if self.reservoir_activation == Activation::Identity {
            return err("reservoir_activation must be tanh or sinc".into());
        }
        if self.output_activation == Activation::Sinc {
            return err("output_activation must be tanh or identity".into());
        }
        let mut warnings = Vec::new();
        if self.spectral_radius >= 1.0 {
            warnings.push(format!(
                "spectral_radius {} >= 1: the echo state property is no longer guaranteed",
                self.spectral_radius
            ));
        }
        Ok(warnings)
    }

    pub fn concat_len(&self) -> usize {
        self.readout_variant
            .concat_len(self.n_inputs, self.n_reservoir, self.n_outputs)
    }

    /// Input dimension seen by `W_in` (the bias input counts when enabled).
    pub fn extended_input_len(&self) -> usize {
        self.n_inputs + usize::from(self.bias_enabled)
    }
}

/// Compressed sparse row matrix; keeps the state update at O(nnz) per step.
#[derive(Debug, Clone)]
pub(crate) struct CsrMatrix {
    n_rows: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub(crate) fn from_dense(m: &Array2<f64>) -> Self {
        let (rows, cols) = m.dim();
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..rows {
            for j in 0..cols {
                let v = m[[i, j]];
                if v != 0.0 {
                    col_idx.push(j as u32);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        Self { n_rows: rows, row_ptr, col_idx, values }
    }

    pub(crate) fn matvec_into(&self, x: ArrayView1<f64>, out: &mut Array1<f64>) {
        let x = x.as_slice().expect("contiguous state vector");
        for i in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            out[i] = acc;
        }
    }
}

/// The realized random matrices of one seeded instantiation.
#[derive(Debug, Clone)]
pub struct WeightSet {
    pub w_in: Array2<f64>,
    pub w: Array2<f64>,
    pub w_fb: Array2<f64>,
    pub root_seed: u64,
    pub realized_spectral_radius: f64,
    w_csr: CsrMatrix,
}

impl WeightSet {
    /// Assembles a weight set from explicit matrices. The realized spectral
    /// radius is recomputed from `w` (zero for an all-zero reservoir).
    pub fn from_parts(
        w_in: Array2<f64>,
        w: Array2<f64>,
        w_fb: Array2<f64>,
        root_seed: u64,
    ) -> Result<Self> {
        let realized = if w.iter().all(|&v| v == 0.0) {
            0.0
        } else {
            spectral_radius(&w)?
        };
        let w_csr = CsrMatrix::from_dense(&w);
        Ok(Self { w_in, w, w_fb, root_seed, realized_spectral_radius: realized, w_csr })
    }

    pub fn has_feedback_weights(&self) -> bool {
        self.w_fb.iter().any(|&v| v != 0.0)
    }

    pub(crate) fn csr(&self) -> &CsrMatrix {
        &self.w_csr
    }
}

/// Reservoir state plus the previous output fed back on the next step.
#[derive(Debug, Clone)]
pub struct ReservoirState {
    pub x: Array1<f64>,
    pub y_prev: Array1<f64>,
    pub time_index: usize,
}

impl ReservoirState {
    pub fn zeros(n_reservoir: usize, n_outputs: usize) -> Self {
        Self {
            x: Array1::zeros(n_reservoir),
            y_prev: Array1::zeros(n_outputs),
            time_index: 0,
        }
    }

    /// Random initial state with entries in [-1, 1), drawn from the
    /// dedicated child stream.
    pub fn random(n_reservoir: usize, n_outputs: usize, root_seed: u64) -> Self {
        let mut rng = child_rng(root_seed, streams::INIT_STATE);
        Self {
            x: Array1::from_shape_fn(n_reservoir, |_| rng.gen_range(-1.0..1.0)),
            y_prev: Array1::zeros(n_outputs),
            time_index: 0,
        }
    }
}

/// Maximum absolute eigenvalue.
pub fn spectral_radius(w: &Array2<f64>) -> Result<f64> {
    let eigs = w.eigvals()?;
    Ok(eigs.iter().map(|c| c.norm()).fold(0.0, f64::max))
}

fn draw(dist: WeightDistribution, rng: &mut ChaCha8Rng) -> f64 {
    match dist {
        WeightDistribution::Uniform => rng.gen_range(-1.0..1.0),
        WeightDistribution::Bivalued => {
            if rng.gen::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        WeightDistribution::Laplace => {
            // Inverse CDF of the unit Laplace distribution.
            let u: f64 = rng.gen_range(-0.5..0.5);
            -u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
    }
}

/// Samples a `rows x cols` matrix where each entry is independently nonzero
/// with probability `density`, with nonzero values drawn from the named
/// zero-centered unit distribution.
pub fn sample_matrix(
    dist: WeightDistribution,
    rows: usize,
    cols: usize,
    density: f64,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            if rng.gen::<f64>() < density {
                m[[i, j]] = draw(dist, rng);
            }
        }
    }
    m
}

/// Rescales `w0` so its spectral radius equals `target_rho`.
pub fn scale_to_spectral_radius(w0: &Array2<f64>, target_rho: f64) -> Result<Array2<f64>> {
    let lambda = spectral_radius(w0)?;
    if lambda <= EPS_EIGENVALUE {
        return Err(EsnError::DegenerateReservoir(EPS_EIGENVALUE));
    }
    Ok(w0 * (target_rho / lambda))
}

/// Constructs the seeded weight set for a configuration. Deterministic:
/// identical `(config, root_seed)` yields identical matrices. A degenerate
/// reservoir draw is resampled up to [`MAX_BUILD_ATTEMPTS`] times from
/// distinct child streams.
pub fn build(config: &EsnConfig, root_seed: u64) -> Result<WeightSet> {
    config.validate()?;
    let n = config.n_reservoir;

    let mut rng_in = child_rng(root_seed, streams::INPUT);
    let mut w_in = sample_matrix(
        config.weight_distribution,
        n,
        config.extended_input_len(),
        config.density_in,
        &mut rng_in,
    );
    w_in *= config.input_scale;

    let uses_feedback = config.density_fb > 0.0 && config.feedback_scale > 0.0;
    let w_fb = if uses_feedback {
        let mut rng_fb = child_rng(root_seed, streams::FEEDBACK);
        let mut m = sample_matrix(
            config.weight_distribution,
            n,
            config.n_outputs,
            config.density_fb,
            &mut rng_fb,
        );
        m *= config.feedback_scale;
        m
    } else {
        Array2::zeros((n, config.n_outputs))
    };

    for attempt in 0..MAX_BUILD_ATTEMPTS {
        let mut rng_w = child_rng(root_seed, streams::RESERVOIR + attempt * streams::RESAMPLE_STRIDE);
        let w0 = sample_matrix(config.weight_distribution, n, n, config.density_w, &mut rng_w);
        match scale_to_spectral_radius(&w0, config.spectral_radius) {
            Ok(w) => {
                let realized = spectral_radius(&w)?;
                let w_csr = CsrMatrix::from_dense(&w);
                return Ok(WeightSet {
                    w_in,
                    w,
                    w_fb,
                    root_seed,
                    realized_spectral_radius: realized,
                    w_csr,
                });
            }
            Err(EsnError::DegenerateReservoir(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(EsnError::DegenerateReservoir(EPS_EIGENVALUE))
}

/// Component-wise activation. `sinc(0) := 1`, computed through a series
/// branch near zero to avoid catastrophic cancellation.
pub fn activate(kind: Activation, x: f64) -> f64 {
    match kind {
        Activation::Tanh => x.tanh(),
        Activation::Identity => x,
        Activation::Sinc => {
            let z = std::f64::consts::PI * x;
            if x.abs() < 1e-8 {
                1.0 - z * z / 6.0
            } else {
                z.sin() / z
            }
        }
    }
}

/// One leaky-integrator update:
/// `x' = (1 - a) x + a f(W_in [1; u] + W x + W_fb y_prev) + noise`.
/// The `noise` term is added as given (callers pre-scale their noise draw).
pub fn step(
    state: &mut ReservoirState,
    input: ArrayView1<f64>,
    noise: Option<ArrayView1<f64>>,
    weights: &WeightSet,
    config: &EsnConfig,
) -> Result<()> {
    let n = config.n_reservoir;
    if input.len() != config.n_inputs {
        return Err(EsnError::DimensionMismatch(format!(
            "input length {} != n_inputs {}",
            input.len(),
            config.n_inputs
        )));
    }

    let mut pre = Array1::zeros(n);
    weights.csr().matvec_into(state.x.view(), &mut pre);

    let mut u_ext = Array1::zeros(config.extended_input_len());
    let offset = if config.bias_enabled {
        u_ext[0] = 1.0;
        1
    } else {
        0
    };
    for (j, &v) in input.iter().enumerate() {
        u_ext[offset + j] = v;
    }
    pre += &weights.w_in.dot(&u_ext);
    if weights.has_feedback_weights() {
        pre += &weights.w_fb.dot(&state.y_prev);
    }

    let alpha = config.leak_rate;
    let f = config.reservoir_activation;
    let mut ok = true;
    for i in 0..n {
        let mut v = (1.0 - alpha) * state.x[i] + alpha * activate(f, pre[i]);
        if let Some(ns) = &noise {
            v += ns[i];
        }
        ok &= v.is_finite();
        state.x[i] = v;
    }
    if !ok {
        return Err(EsnError::NonFiniteState { step: state.time_index });
    }
    state.time_index += 1;
    Ok(())
}

/// Builds the readout concatenation for a variant. Input-bearing variants
/// prepend the constant bias value 1.0.
pub fn concatenation(
    variant: ReadoutVariant,
    input: ArrayView1<f64>,
    x: ArrayView1<f64>,
    y_prev: ArrayView1<f64>,
) -> Array1<f64> {
    let mut z = Vec::with_capacity(variant.concat_len(input.len(), x.len(), y_prev.len()));
    if variant.uses_input() {
        z.push(1.0);
        z.extend(input.iter());
    }
    z.extend(x.iter());
    if variant.uses_feedback() {
        z.extend(y_prev.iter());
    }
    Array1::from_vec(z)
}

/// Applies the trained readout: `y = g(W_out z)`; updates `state.y_prev`.
pub fn readout(
    variant: ReadoutVariant,
    state: &mut ReservoirState,
    input: ArrayView1<f64>,
    w_out: &Array2<f64>,
    g: Activation,
) -> Result<Array1<f64>> {
    let z = concatenation(variant, input, state.x.view(), state.y_prev.view());
    if w_out.ncols() != z.len() {
        return Err(EsnError::DimensionMismatch(format!(
            "W_out has {} columns but the {:?} concatenation has length {}",
            w_out.ncols(),
            variant,
            z.len()
        )));
    }
    let y = w_out.dot(&z).mapv(|v| activate(g, v));
    state.y_prev = y.clone();
    Ok(y)
}

/// Uniform noise vector in [-1, 1) scaled by `scale`.
pub fn sample_noise(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| scale * rng.gen_range(-1.0..1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn base_config(n: usize) -> EsnConfig {
        EsnConfig::new(1, n, 1)
    }

    #[test]
    fn sample_matrix_density_one_is_fully_nonzero() {
        let mut rng = child_rng(3, 0);
        let m = sample_matrix(WeightDistribution::Uniform, 2, 2, 1.0, &mut rng);
        assert!(m.iter().all(|&v| v != 0.0 && (-1.0..1.0).contains(&v)));
    }

    #[test]
    fn sample_matrix_bivalued_support() {
        let mut rng = child_rng(4, 0);
        let m = sample_matrix(WeightDistribution::Bivalued, 3, 3, 1.0, &mut rng);
        assert!(m.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn sample_matrix_nonzero_count_tracks_density() {
        // Binomial oracle: 3 sigma band around d * N^2 over repeated seeds.
        let d = 0.15_f64;
        let band = 3.0 * (10_000.0 * d * (1.0 - d)).sqrt();
        for seed in 0..5 {
            let mut rng = child_rng(seed, 0);
            let m = sample_matrix(WeightDistribution::Uniform, 100, 100, d, &mut rng);
            let nnz = m.iter().filter(|&&v| v != 0.0).count() as f64;
            assert!((nnz - 1500.0).abs() <= band, "seed {seed}: nnz {nnz}");
        }
    }

    #[test]
    fn distribution_sample_means_are_centered() {
        // 1e6 draws; mean within 4 standard errors of zero.
        for (dist, sd) in [
            (WeightDistribution::Uniform, 1.0 / 3f64.sqrt()),
            (WeightDistribution::Bivalued, 1.0),
            (WeightDistribution::Laplace, 2f64.sqrt()),
        ] {
            let mut rng = child_rng(11, 7);
            let n = 1_000_000;
            let mean: f64 = (0..n).map(|_| draw(dist, &mut rng)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 4.0 * sd / (n as f64).sqrt(), "{dist:?}: mean {mean}");
        }
    }

    #[test]
    fn scale_scalar_and_identity() {
        let w = scale_to_spectral_radius(&array![[2.0]], 0.5).unwrap();
        assert_abs_diff_eq!(w[[0, 0]], 0.5, epsilon = 1e-15);

        let w = scale_to_spectral_radius(&Array2::eye(2), 0.9).unwrap();
        assert_abs_diff_eq!(w[[0, 0]], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(w[[1, 1]], 0.9, epsilon = 1e-15);
    }

    #[test]
    fn scale_diagonal_matrix() {
        let w = scale_to_spectral_radius(&array![[1.0, 0.0], [0.0, 2.0]], 1.0).unwrap();
        assert_abs_diff_eq!(w[[0, 0]], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(w[[1, 1]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scale_rejects_degenerate() {
        let res = scale_to_spectral_radius(&Array2::zeros((3, 3)), 0.9);
        assert!(matches!(res, Err(EsnError::DegenerateReservoir(_))));
    }

    #[test]
    fn build_zero_feedback_density_gives_zero_w_fb() {
        let mut cfg = base_config(20);
        cfg.density_fb = 0.0;
        cfg.feedback_scale = 1.0;
        let ws = build(&cfg, 42).unwrap();
        assert!(ws.w_fb.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn build_is_deterministic() {
        let mut cfg = base_config(100);
        cfg.spectral_radius = 0.9;
        let a = build(&cfg, 7).unwrap();
        let b = build(&cfg, 7).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.w_in, b.w_in);
        assert_eq!(a.w_fb, b.w_fb);
        assert_eq!(a.realized_spectral_radius, b.realized_spectral_radius);
    }

    #[test]
    fn build_hits_requested_spectral_radius() {
        let mut cfg = base_config(100);
        cfg.spectral_radius = 0.99;
        cfg.density_w = 0.15;
        let ws = build(&cfg, 0).unwrap();
        // Independent recomputation on the built matrix.
        let rho = spectral_radius(&ws.w).unwrap();
        assert!((rho - 0.99).abs() <= 1e-9 * 0.99, "rho {rho}");
        assert!((ws.realized_spectral_radius - 0.99).abs() <= 1e-9 * 0.99);
    }

    #[test]
    fn activate_sinc_values() {
        assert_abs_diff_eq!(activate(Activation::Sinc, 0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(activate(Activation::Sinc, 1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            activate(Activation::Sinc, 0.5),
            2.0 / std::f64::consts::PI,
            epsilon = 1e-12
        );
        // Series branch agrees with the direct form just outside the cutoff.
        let x = 2e-8;
        let direct = (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x);
        assert_abs_diff_eq!(activate(Activation::Sinc, 1e-9), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(activate(Activation::Sinc, x), direct, epsilon = 1e-12);
    }

    #[test]
    fn step_zero_weights_gives_zero_state() {
        let cfg = base_config(2);
        let ws = WeightSet::from_parts(
            Array2::zeros((2, 2)),
            Array2::zeros((2, 2)),
            Array2::zeros((2, 1)),
            0,
        )
        .unwrap();
        let mut st = ReservoirState::zeros(2, 1);
        step(&mut st, array![0.3].view(), None, &ws, &cfg).unwrap();
        assert_eq!(st.x, Array1::<f64>::zeros(2));
        assert_eq!(st.time_index, 1);
    }

    #[test]
    fn step_small_leak_retains_state() {
        let mut cfg = base_config(2);
        cfg.leak_rate = 1e-12;
        let ws = WeightSet::from_parts(
            Array2::zeros((2, 2)),
            Array2::zeros((2, 2)),
            Array2::zeros((2, 1)),
            0,
        )
        .unwrap();
        let mut st = ReservoirState::zeros(2, 1);
        st.x = array![0.5, -0.25];
        step(&mut st, array![1.0].view(), None, &ws, &cfg).unwrap();
        assert_abs_diff_eq!(st.x[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(st.x[1], -0.25, epsilon = 1e-9);
    }

    #[test]
    fn step_half_leak_hand_value() {
        // alpha = 0.5, W = 0, W_in [1; u] = 1 for every neuron, tanh.
        let mut cfg = base_config(1);
        cfg.leak_rate = 0.5;
        let ws = WeightSet::from_parts(
            array![[1.0, 0.0]], // bias weight 1, input weight 0
            array![[0.0]],
            Array2::zeros((1, 1)),
            0,
        )
        .unwrap();
        let mut st = ReservoirState::zeros(1, 1);
        step(&mut st, array![0.0].view(), None, &ws, &cfg).unwrap();
        assert_abs_diff_eq!(st.x[0], 0.5 * 1f64.tanh(), epsilon = 1e-12);
    }

    #[test]
    fn bounded_states_with_full_leak_tanh() {
        let mut cfg = base_config(50);
        cfg.leak_rate = 1.0;
        let ws = build(&cfg, 5).unwrap();
        let mut st = ReservoirState::random(50, 1, 5);
        let mut rng = child_rng(5, 99);
        for _ in 0..200 {
            let u = array![rng.gen_range(-1.0..1.0)];
            step(&mut st, u.view(), None, &ws, &cfg).unwrap();
            assert!(st.x.iter().all(|&v| v > -1.0 && v < 1.0));
        }
    }

    #[test]
    fn readout_examples() {
        // STATE_ONLY dot product.
        let mut st = ReservoirState::zeros(2, 1);
        st.x = array![1.0, 0.0];
        let y = readout(
            ReadoutVariant::StateOnly,
            &mut st,
            ArrayView1::from(&[] as &[f64]),
            &array![[2.0, 3.0]],
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(y, array![2.0]);
        assert_eq!(st.y_prev, array![2.0]);

        // INPUT_STATE with only the bias weight set.
        let mut st = ReservoirState::zeros(2, 1);
        let y = readout(
            ReadoutVariant::InputState,
            &mut st,
            array![0.0].view(),
            &array![[5.0, 0.0, 0.0, 0.0]],
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(y, array![5.0]);

        // tanh output activation.
        let mut st = ReservoirState::zeros(1, 1);
        st.x = array![1.0];
        let y = readout(
            ReadoutVariant::StateOnly,
            &mut st,
            ArrayView1::from(&[] as &[f64]),
            &array![[0.5]],
            Activation::Tanh,
        )
        .unwrap();
        assert_abs_diff_eq!(y[0], 0.5f64.tanh(), epsilon = 1e-15);
    }

    #[test]
    fn readout_dimension_mismatch() {
        let mut st = ReservoirState::zeros(2, 1);
        let res = readout(
            ReadoutVariant::StateOnly,
            &mut st,
            ArrayView1::from(&[] as &[f64]),
            &array![[1.0, 2.0, 3.0]],
            Activation::Identity,
        );
        assert!(matches!(res, Err(EsnError::DimensionMismatch(_))));
    }

    #[test]
    fn validate_warns_at_unit_spectral_radius() {
        let mut cfg = base_config(10);
        cfg.spectral_radius = 1.1;
        let warnings = cfg.validate().unwrap();
        assert_eq!(warnings.len(), 1);

        cfg.spectral_radius = 0.0;
        assert!(cfg.validate().is_err());
        cfg.spectral_radius = 0.9;
        cfg.leak_rate = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn state_trajectory_is_deterministic() {
        let cfg = base_config(30);
        let ws = build(&cfg, 9).unwrap();
        let mut input_rng = child_rng(1, 0);
        let inputs: Vec<f64> = (0..100).map(|_| input_rng.gen_range(0.0..0.5)).collect();
        let run = |ws: &WeightSet| {
            let mut st = ReservoirState::zeros(30, 1);
            let mut noise_rng = child_rng(9, streams::NOISE);
            for &u in &inputs {
                let v = sample_noise(&mut noise_rng, 30, 1e-4);
                step(&mut st, array![u].view(), Some(v.view()), ws, &cfg).unwrap();
            }
            st.x
        };
        assert_eq!(run(&ws), run(&build(&cfg, 9).unwrap()));
    }
}
