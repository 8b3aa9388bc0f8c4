//! Linear models `f(x) = ⟨w, Φ(x)⟩` with explicit feature maps.
//!
//! Covers closed-form gradient descent dynamics, minimum-norm interpolation,
//! SuperNat (gradient steps interleaved with singular-value rescaling of the
//! features) and the Rademacher-style capacity bounds used to motivate it.
//! The squared loss is `½‖Φw - y‖²` summed over samples throughout.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{shape, Error, Result};
use crate::spectral::{svd, KernelMatrix};
use crate::trajectory::TrainingTrace;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-10;
/// Kernels with a larger condition number need the pseudo-inverse.
pub const MAX_CONDITION: f64 = 1e12;
/// Loss above which training is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e12;
/// Relative size under which a residual component counts as zero.
pub const ZERO_COMPONENT: f64 = 1e-12;
/// Tolerance for initial weights lying in the row span of `Φ`.
pub const SPAN_TOLERANCE: f64 = 1e-8;
/// Size of the held-out set drawn by [`noisy_feature_regression_setup`].
pub const VALIDATION_SIZE: usize = 500;
/// RBF bandwidth used by [`rbf_anisotropy_setup`].
pub const RBF_GAMMA: f64 = 1.0;

/// Feature matrix `Φ` (`n × P`) with its thin SVD truncated to the numerical
/// rank.
#[derive(Debug, Clone)]
pub struct LinearFeatures {
    matrix: DMatrix<f64>,
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
}

impl LinearFeatures {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let dec = svd(&matrix)?;
        let r = dec.rank(RANK_CUTOFF);
        Ok(Self {
            u: dec.u.columns(0, r).into_owned(),
            s: dec.singular_values.rows(0, r).into_owned(),
            v: dec.v.columns(0, r).into_owned(),
            matrix,
        })
    }

    /// Builds `Φ = U diag(s) Vᵀ` from orthonormal factors, keeping every
    /// given mode.
    pub fn from_svd(u: DMatrix<f64>, s: DVector<f64>, v: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != s.len() || v.ncols() != s.len() {
            return Err(Error::DimensionMismatch {
                context: "svd factors",
                expected: format!("{} columns", s.len()),
                got: format!("u {}, v {}", shape(u.nrows(), u.ncols()), shape(v.nrows(), v.ncols())),
            });
        }
        if s.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument("singular values must be finite and >= 0".into()));
        }
        let matrix = &u * DMatrix::from_diagonal(&s) * v.transpose();
        Ok(Self { matrix, u, s, v })
    }

    /// Same singular vectors, new singular values.
    pub fn with_singular_values(&self, s: DVector<f64>) -> Result<Self> {
        Self::from_svd(self.u.clone(), s, self.v.clone())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Left singular vectors, `n × r`.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.s
    }

    /// Right singular vectors, `P × r`.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn n_samples(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.matrix.ncols()
    }

    /// Nonzero kernel eigenvalues `λ_j = s_j²`.
    pub fn eigenvalues(&self) -> DVector<f64> {
        self.s.map(|x| x * x)
    }

    pub fn kernel(&self) -> KernelMatrix {
        KernelMatrix::from_parts(&self.matrix * self.matrix.transpose(), self.n_samples(), 1)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.s.norm()
    }

    pub fn outputs(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_weights(w)?;
        Ok(&self.matrix * w)
    }

    /// `Σ_j f_j u_j`.
    pub fn outputs_from_modes(&self, coefficients: &DVector<f64>) -> DVector<f64> {
        &self.u * coefficients
    }

    fn check_weights(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                context: "weight vector",
                expected: self.n_features().to_string(),
                got: w.len().to_string(),
            });
        }
        Ok(())
    }

    fn check_targets(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.n_samples() {
            return Err(Error::DimensionMismatch {
                context: "targets",
                expected: self.n_samples().to_string(),
                got: y.len().to_string(),
            });
        }
        Ok(())
    }

    /// Relative distance of `w` from the row span of `Φ`.
    pub fn span_residual(&self, w: &DVector<f64>) -> Result<f64> {
        self.check_weights(w)?;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let proj = &self.v * (self.v.transpose() * w);
        Ok((w - proj).norm() / norm)
    }

    /// Condition number of `K = ΦΦᵀ`; infinite when rank < n.
    pub fn kernel_condition(&self) -> f64 {
        if self.rank() < self.n_samples() || self.rank() == 0 {
            return f64::INFINITY;
        }
        let ratio = self.s[0] / self.s[self.rank() - 1];
        ratio * ratio
    }
}

/// `w* = Φᵀ K⁻¹ y`, the least-norm interpolator.
///
/// With `allow_pinv` an ill-conditioned kernel falls back to the
/// pseudo-inverse over singular values above [`RANK_CUTOFF`]` · s_max`.
pub fn min_norm_interpolator(f: &LinearFeatures, y: &DVector<f64>, allow_pinv: bool) -> Result<DVector<f64>> {
    f.check_targets(y)?;
    let condition = f.kernel_condition();
    if !(condition < MAX_CONDITION) && !allow_pinv {
        return Err(Error::Singular { condition });
    }
    let coeff = (f.u.transpose() * y).component_div(&f.s);
    Ok(&f.v * coeff)
}

/// Per-mode output coefficients after `t` gradient steps from `w0`:
/// `f_jt = f_j* + (1 - ηλ_j)^t (f_j0 - f_j*)`.
pub fn mode_dynamics(
    f: &LinearFeatures,
    y: &DVector<f64>,
    w0: &DVector<f64>,
    lr: f64,
    t: usize,
) -> Result<DVector<f64>> {
    f.check_targets(y)?;
    let residual = f.span_residual(w0)?;
    if residual > SPAN_TOLERANCE {
        return Err(Error::OutsideFeatureSpan { residual });
    }
    let target = f.u.transpose() * y;
    let start = (f.v.transpose() * w0).component_mul(&f.s);
    let t = i32::try_from(t).map_err(|_| Error::InvalidArgument("step count too large".into()))?;
    Ok(DVector::from_fn(f.rank(), |j, _| {
        let lam = f.s[j] * f.s[j];
        target[j] + (1.0 - lr * lam).powi(t) * (start[j] - target[j])
    }))
}

fn squared_loss(outputs: &DVector<f64>, y: &DVector<f64>) -> f64 {
    0.5 * (outputs - y).norm_squared()
}

/// Weights along a gradient descent run.
#[derive(Debug, Clone)]
pub struct LinearRun {
    /// `w_0, …, w_T`
    pub weights: Vec<DVector<f64>>,
    pub trace: TrainingTrace,
}

/// `T` steps of `δw = -η Φᵀ(Φw - y)` recording `‖δw_t‖₂` and `‖Φ‖_F`.
pub fn gd_train_linear(
    f: &LinearFeatures,
    y: &DVector<f64>,
    w0: &DVector<f64>,
    lr: f64,
    steps: usize,
) -> Result<LinearRun> {
    if !(lr > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
    }
    f.check_targets(y)?;
    f.check_weights(w0)?;
    let fro = f.matrix.norm();
    let mut trace = TrainingTrace::new();
    let mut weights = Vec::with_capacity(steps + 1);
    let mut w = w0.clone();
    for step in 0..steps {
        let out = &f.matrix * &w;
        let loss = squared_loss(&out, y);
        if !(loss <= DIVERGENCE_LOSS) {
            return Err(Error::Divergence { step, loss });
        }
        let delta = -(f.matrix.transpose() * (out - y)) * lr;
        trace.record(step, delta.norm(), fro)?;
        let next = &w + &delta;
        weights.push(std::mem::replace(&mut w, next));
    }
    weights.push(w);
    Ok(LinearRun { weights, trace })
}

/// Per-mode rescaling factors within the class `Φ_ν = Σ (s_j/√ν_j) u_j v_jᵀ`.
#[derive(Debug, Clone)]
pub struct NuSolution {
    pub nu: DVector<f64>,
    pub kappa: f64,
    /// Modes whose residual or label component was zero (clamped or dropped).
    pub flagged: Vec<usize>,
}

fn mode_components(f: &LinearFeatures, v: &DVector<f64>) -> Result<DVector<f64>> {
    f.check_targets(v)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("mode projection input"));
    }
    Ok((f.u.transpose() * v).abs())
}

/// Choice of the free constant `κ` in `ν_j = κ / |u_jᵀ ∇L|`.
///
/// The step objective is invariant under `ν → αν`, so any `κ > 0` is optimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NuNormalization {
    /// `κ = max_j |u_jᵀ ∇L|`: the mode with the largest residual keeps its
    /// scale and all others contract, so modes that stop carrying residual
    /// freeze.
    #[default]
    TopMode,
    /// `κ` keeps `Σ λ_j/ν_j = Σ λ_j`, i.e. the Frobenius norm of the
    /// features. The full spectral mass then moves to whichever mode has the
    /// largest residual, and every mode is eventually fitted.
    Frobenius,
}

/// `ν_j = κ / |u_jᵀ ∇L|` with `κ` set by `normalization`.
///
/// Zero components are clamped to [`ZERO_COMPONENT`] times the largest one.
/// If every component is zero the factors are uniform.
pub fn optimal_nu_supernat(
    f: &LinearFeatures,
    grad: &DVector<f64>,
    normalization: NuNormalization,
) -> Result<NuSolution> {
    let c = mode_components(f, grad)?;
    let r = f.rank();
    let top = c.max();
    if r == 0 {
        return Err(Error::DegenerateSpectrum);
    }
    if top == 0.0 {
        return Ok(NuSolution {
            nu: DVector::from_element(r, 1.0),
            kappa: 1.0,
            flagged: (0..r).collect(),
        });
    }
    let floor = ZERO_COMPONENT * top;
    let mut flagged = Vec::new();
    let c = DVector::from_fn(r, |j, _| {
        if c[j] < floor {
            flagged.push(j);
            floor
        } else {
            c[j]
        }
    });
    let kappa = match normalization {
        NuNormalization::TopMode => top,
        NuNormalization::Frobenius => {
            let lam = f.eigenvalues();
            lam.dot(&c) / lam.sum()
        }
    };
    Ok(NuSolution {
        nu: c.map(|cj| kappa / cj),
        kappa,
        flagged,
    })
}

/// `‖δw_GD‖_{A_ν} · ‖A_ν⁻¹ Φᵀ‖_F = η √(Σ ν_j λ_j c_j²) √(Σ λ_j / ν_j)`.
pub fn supernat_objective(f: &LinearFeatures, grad: &DVector<f64>, nu: &DVector<f64>, lr: f64) -> Result<f64> {
    let c = mode_components(f, grad)?;
    check_nu(f, nu)?;
    let lam = f.eigenvalues();
    let step: f64 = (0..f.rank()).map(|j| nu[j] * lam[j] * c[j] * c[j]).sum();
    let trace: f64 = (0..f.rank()).map(|j| lam[j] / nu[j]).sum();
    Ok(lr * step.sqrt() * trace.sqrt())
}

fn check_nu(f: &LinearFeatures, nu: &DVector<f64>) -> Result<()> {
    if nu.len() != f.rank() {
        return Err(Error::DimensionMismatch {
            context: "rescaling factors",
            expected: f.rank().to_string(),
            got: nu.len().to_string(),
        });
    }
    if nu.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument("rescaling factors must be > 0".into()));
    }
    Ok(())
}

/// `ν_j = κ λ_j / |u_jᵀ y|`, minimizing `‖w*‖_{A_ν} √Tr K_{A_ν}`.
///
/// Modes with a zero label component do not constrain the interpolator and
/// are dropped (`ν_j = ∞`). `κ` keeps `Σ λ_j/ν_j = Σ λ_j`.
pub fn optimal_norm_nu(f: &LinearFeatures, y: &DVector<f64>) -> Result<NuSolution> {
    let c = mode_components(f, y)?;
    let top = c.max();
    if f.rank() == 0 || top == 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    let lam = f.eigenvalues();
    let flagged: Vec<usize> = (0..f.rank()).filter(|&j| c[j] <= ZERO_COMPONENT * top).collect();
    let kept_sum: f64 = (0..f.rank()).filter(|j| !flagged.contains(j)).map(|j| c[j]).sum();
    let kappa = kept_sum / lam.sum();
    let nu = DVector::from_fn(f.rank(), |j, _| {
        if flagged.contains(&j) {
            f64::INFINITY
        } else {
            kappa * lam[j] / c[j]
        }
    });
    Ok(NuSolution { nu, kappa, flagged })
}

/// `‖w*‖_{A_ν} √Tr K_{A_ν}` with `‖w*‖²_{A_ν} = Σ ν_j (u_jᵀy)²/λ_j` and
/// `Tr K_{A_ν} = Σ λ_j/ν_j`. Infinite `ν_j` with a zero label component
/// contributes nothing.
pub fn optimal_norm_objective(f: &LinearFeatures, y: &DVector<f64>, nu: &DVector<f64>) -> Result<f64> {
    let c = mode_components(f, y)?;
    if nu.len() != f.rank() || nu.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument(
            "rescaling factors must be > 0, one per mode".into(),
        ));
    }
    let lam = f.eigenvalues();
    let mut norm_sq = 0.0;
    let mut trace = 0.0;
    for j in 0..f.rank() {
        if nu[j].is_infinite() {
            if c[j] > ZERO_COMPONENT * c.max() {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        norm_sq += nu[j] * c[j] * c[j] / lam[j];
        trace += lam[j] / nu[j];
    }
    Ok(norm_sq.sqrt() * trace.sqrt())
}

/// SuperNat iterate.
///
/// Weights are stored in the original representation (acting on the initial
/// features) next to the current singular values; the rescaled weights are
/// derived on demand. Tracking the rescaled weights directly would multiply
/// strongly contracted modes by huge factors and lose all precision.
#[derive(Debug, Clone)]
pub struct SuperNatState {
    initial: LinearFeatures,
    features: LinearFeatures,
    original_weights: DVector<f64>,
    history: Vec<DVector<f64>>,
    step: usize,
    normalization: NuNormalization,
}

impl SuperNatState {
    pub fn new(features: LinearFeatures, w0: DVector<f64>) -> Result<Self> {
        features.check_weights(&w0)?;
        Ok(Self {
            initial: features.clone(),
            features,
            original_weights: w0,
            history: Vec::new(),
            step: 0,
            normalization: NuNormalization::default(),
        })
    }

    pub fn with_normalization(mut self, normalization: NuNormalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn normalization(&self) -> NuNormalization {
        self.normalization
    }

    /// Current (rescaled) features `Φ_t`; same singular vectors as `Φ_0`.
    pub fn features(&self) -> &LinearFeatures {
        &self.features
    }

    pub fn initial_features(&self) -> &LinearFeatures {
        &self.initial
    }

    /// Weights in the current representation, `Φ_t w_t = Φ_0 w_orig`.
    /// Entries are infinite for modes contracted to zero.
    pub fn weights(&self) -> DVector<f64> {
        let v = self.initial.v();
        let coords = v.transpose() * &self.original_weights;
        let stretch = self
            .initial
            .singular_values()
            .component_div(self.features.singular_values());
        &self.original_weights + v * coords.component_mul(&stretch.map(|x| x - 1.0))
    }

    /// Weights acting on the initial features.
    pub fn original_weights(&self) -> &DVector<f64> {
        &self.original_weights
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Factors `ν_t` applied at each step.
    pub fn scale_history(&self) -> &[DVector<f64>] {
        &self.history
    }

    pub fn outputs(&self) -> DVector<f64> {
        self.initial.matrix() * &self.original_weights
    }

    /// Predictions for inputs whose initial feature rows are `phi`.
    pub fn predict(&self, phi: &DMatrix<f64>) -> Result<DVector<f64>> {
        if phi.ncols() != self.initial.n_features() {
            return Err(Error::DimensionMismatch {
                context: "prediction features",
                expected: format!("m x {}", self.initial.n_features()),
                got: shape(phi.nrows(), phi.ncols()),
            });
        }
        Ok(phi * &self.original_weights)
    }
}

/// Gradient step in the current representation followed by the
/// output-preserving reparametrization `Φ ← Φ A_ν⁻¹`, with `ν` from
/// [`optimal_nu_supernat`] on the pre-step residual.
///
/// In original coordinates the step is `δw = -η V diag(s_t²/s_0) Uᵀ ∇L`, so
/// the outputs move exactly as under plain gradient descent with `Φ_t`.
pub fn supernat_step(state: &SuperNatState, y: &DVector<f64>, lr: f64) -> Result<SuperNatState> {
    if !(lr > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
    }
    let f = &state.features;
    f.check_targets(y)?;
    let out = state.outputs();
    let loss = squared_loss(&out, y);
    if !(loss <= DIVERGENCE_LOSS) {
        return Err(Error::Divergence { step: state.step, loss });
    }
    let grad = out - y;
    let s_t = f.singular_values();
    let s_0 = state.initial.singular_values();
    let gain = s_t.component_mul(s_t).component_div(s_0);
    let delta = state.initial.v() * (f.u().transpose() * &grad).component_mul(&gain) * (-lr);
    let sol = optimal_nu_supernat(f, &grad, state.normalization)?;

    let mut nu = sol.nu;
    let mut s_new = s_t.component_div(&nu.map(f64::sqrt));
    if state.normalization == NuNormalization::Frobenius {
        // Remove round-off drift of the norm.
        let alpha = s_t.norm() / s_new.norm();
        s_new *= alpha;
        nu /= alpha * alpha;
    }
    let mut history = state.history.clone();
    history.push(nu);
    Ok(SuperNatState {
        initial: state.initial.clone(),
        features: f.with_singular_values(s_new)?,
        original_weights: &state.original_weights + delta,
        history,
        step: state.step + 1,
        normalization: state.normalization,
    })
}

/// Training data for the noisy feature regression plus a held-out set.
#[derive(Debug, Clone)]
pub struct NoisyRegression {
    pub features: LinearFeatures,
    pub y: DVector<f64>,
    pub validation_features: DMatrix<f64>,
    /// Noisy labels drawn like `y`.
    pub validation_y: DVector<f64>,
    /// Noise-free target `φ` on the validation inputs.
    pub validation_signal: DVector<f64>,
}

/// `Φ = [φ, φ_noise]` with `φ ~ N(0, 1)`, `φ_noise ~ N(0, I/d)` and
/// `y = φ + φ_noise φ_noiseᵀ ε`, `ε ~ N(0, σ² I)`.
pub fn noisy_regression_sample<R: Rng>(d: usize, n: usize, sigma2: f64, rng: &mut R) -> (DMatrix<f64>, DVector<f64>) {
    let signal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, (1.0 / d as f64).sqrt()).expect("positive std");
    let eps = Normal::new(0.0, sigma2.sqrt()).expect("nonnegative std");
    let mut phi = DMatrix::zeros(n, d + 1);
    for i in 0..n {
        phi[(i, 0)] = signal.sample(rng);
    }
    for k in 1..=d {
        for i in 0..n {
            phi[(i, k)] = noise.sample(rng);
        }
    }
    let e = DVector::from_fn(n, |_, _| eps.sample(rng));
    let phi_noise = phi.columns(1, d);
    let y = phi.column(0) + phi_noise * (phi_noise.transpose() * e);
    (phi, y)
}

/// Training set of size `n` and an independent validation set of
/// [`VALIDATION_SIZE`] samples from the same process.
pub fn noisy_feature_regression_setup(d: usize, n: usize, sigma2: f64, seed: u64) -> Result<NoisyRegression> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidArgument("d and n must be >= 1".into()));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (phi, y) = noisy_regression_sample(d, n, sigma2, &mut rng);
    let (validation_features, validation_y) = noisy_regression_sample(d, VALIDATION_SIZE, sigma2, &mut rng);
    let validation_signal = validation_features.column(0).into_owned();
    Ok(NoisyRegression {
        features: LinearFeatures::new(phi)?,
        y,
        validation_features,
        validation_y,
        validation_signal,
    })
}

/// Mean squared error of `Φ w` against `y`.
pub fn mean_squared_error(phi: &DMatrix<f64>, w: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    if phi.ncols() != w.len() || phi.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "mean squared error",
            expected: format!("{} x {}", y.len(), w.len()),
            got: shape(phi.nrows(), phi.ncols()),
        });
    }
    Ok((phi * w - y).norm_squared() / y.len().max(1) as f64)
}

/// Optional margin parameters of the multiclass bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginSpec {
    pub gamma: f64,
    pub n_classes: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RademacherBoundInput<'a> {
    radius: f64,
    kernel: &'a KernelMatrix,
    n_samples: usize,
    margin: Option<MarginSpec>,
}

impl<'a> RademacherBoundInput<'a> {
    pub fn new(radius: f64, kernel: &'a KernelMatrix, n_samples: usize, margin: Option<MarginSpec>) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("radius must be > 0, got {radius}")));
        }
        if n_samples == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        if let Some(m) = margin {
            if !(m.gamma > 0.0) || m.n_classes == 0 {
                return Err(Error::InvalidArgument(
                    "margin must be > 0 with at least one class".into(),
                ));
            }
        }
        Ok(Self {
            radius,
            kernel,
            n_samples,
            margin,
        })
    }
}

fn sqrt_trace(k: &KernelMatrix) -> Result<f64> {
    let tr = k.trace();
    if tr < 0.0 {
        return Err(Error::NotPsd(format!("kernel trace {tr} is negative")));
    }
    if !tr.is_finite() {
        return Err(Error::NonFinite("kernel trace"));
    }
    Ok(tr.sqrt())
}

/// `(M/n) √Tr K`, or `c^{3/2} M/(γ n) √Tr K` with margin parameters.
pub fn rademacher_bound(b: &RademacherBoundInput) -> Result<f64> {
    let base = b.radius / b.n_samples as f64 * sqrt_trace(b.kernel)?;
    Ok(match b.margin {
        None => base,
        Some(m) => (m.n_classes as f64).powf(1.5) / m.gamma * base,
    })
}

/// Monte-Carlo estimate of `(M/n) E_σ √(σᵀ K σ)` over Rademacher signs.
pub fn rademacher_mc_estimate(
    radius: f64,
    kernel: &KernelMatrix,
    n_samples: usize,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if draws == 0 || n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one draw and one sample".into()));
    }
    let k = kernel.entries();
    let r = k.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sigma = vec![0.0; r];
    let mut total = 0.0;
    for _ in 0..draws {
        for s in sigma.iter_mut() {
            *s = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let mut q = 0.0;
        for j in 0..r {
            let col = k.column(j);
            let mut acc = 0.0;
            for i in 0..r {
                acc += col[i] * sigma[i];
            }
            q += acc * sigma[j];
        }
        total += q.max(0.0).sqrt();
    }
    Ok(radius / n_samples as f64 * total / draws as f64)
}

/// `Σ_t (m_t/n) √Tr K_t`.
pub fn flow_bound(ms: &[f64], kernels: &[KernelMatrix], n_samples: usize) -> Result<f64> {
    if ms.len() != kernels.len() {
        return Err(Error::DimensionMismatch {
            context: "flow bound sequences",
            expected: ms.len().to_string(),
            got: kernels.len().to_string(),
        });
    }
    if n_samples == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if ms.iter().any(|&m| !(m >= 0.0)) {
        return Err(Error::InvalidArgument("step radii must be >= 0".into()));
    }
    ms.iter()
        .zip(kernels)
        .map(|(m, k)| Ok(m / n_samples as f64 * sqrt_trace(k)?))
        .sum()
}

/// `f(x)[y] - max_{y' ≠ y} f(x)[y']` per sample.
pub fn multiclass_margins(scores: &DMatrix<f64>, classes: &[usize]) -> Result<Vec<f64>> {
    let (n, c) = scores.shape();
    if classes.len() != n {
        return Err(Error::DimensionMismatch {
            context: "margin labels",
            expected: n.to_string(),
            got: classes.len().to_string(),
        });
    }
    if c < 2 {
        return Err(Error::InvalidArgument("margins need at least two classes".into()));
    }
    classes
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            if y >= c {
                return Err(Error::InvalidLabel {
                    row: i,
                    reason: format!("class {y} >= {c}"),
                });
            }
            let other = (0..c)
                .filter(|&k| k != y)
                .map(|k| scores[(i, k)])
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(scores[(i, y)] - other)
        })
        .collect()
}

/// Ramp loss: 1 for `m ≤ 0`, `1 - m/γ` on `(0, γ)`, 0 beyond.
pub fn ramp_loss(margin: f64, gamma: f64) -> f64 {
    if margin <= 0.0 {
        1.0
    } else if margin >= gamma {
        0.0
    } else {
        1.0 - margin / gamma
    }
}

/// `z(x) = √(2/P) cos(ωx + b)` with `ω ~ N(0, 2γ)`, `b ~ U[0, 2π)`; one row
/// per input point.
pub fn rbf_random_features(x: &DVector<f64>, n_features: usize, gamma: f64, seed: u64) -> Result<DMatrix<f64>> {
    if n_features == 0 || !(gamma > 0.0) {
        return Err(Error::InvalidArgument("need P >= 1 and gamma > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega_dist = Normal::new(0.0, (2.0 * gamma).sqrt()).expect("positive std");
    let phase_dist = Uniform::new(0.0, 2.0 * std::f64::consts::PI).expect("valid range");
    let omega: Vec<f64> = (0..n_features).map(|_| omega_dist.sample(&mut rng)).collect();
    let phase: Vec<f64> = (0..n_features).map(|_| phase_dist.sample(&mut rng)).collect();
    let scale = (2.0 / n_features as f64).sqrt();
    Ok(DMatrix::from_fn(x.len(), n_features, |i, p| {
        scale * (omega[p] * x[i] + phase[p]).cos()
    }))
}

/// Random-feature RBF model on an equally spaced grid with interpolated
/// spectrum.
#[derive(Debug, Clone)]
pub struct RbfAnisotropy {
    pub inputs: DVector<f64>,
    /// Nonzero kernel eigenvalues `l_j` of the unscaled features.
    pub original_eigenvalues: DVector<f64>,
    /// Features with eigenvalues `1 + c (l_j - 1)`.
    pub features: LinearFeatures,
    /// `sign(ψ_1(x))`, with `ψ_1` oriented so its largest-magnitude entry is
    /// positive.
    pub labels: DVector<f64>,
}

pub fn rbf_anisotropy_setup(n_points: usize, n_features: usize, a: f64, c: f64, seed: u64) -> Result<RbfAnisotropy> {
    if n_points < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: n_points,
        });
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidArgument(format!(
            "scaling factor must lie in [0, 1], got {c}"
        )));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("half-width must be > 0, got {a}")));
    }
    let inputs = DVector::from_fn(n_points, |i, _| -a + 2.0 * a * i as f64 / (n_points - 1) as f64);
    let phi = rbf_random_features(&inputs, n_features, RBF_GAMMA, seed)?;
    let base = LinearFeatures::new(phi)?;
    let original = base.eigenvalues();
    let rescaled = original.map(|l| ((1.0 - c) + c * l).sqrt());
    let psi = base.u().column(0);
    let orient = if psi[psi.iamax()] < 0.0 { -1.0 } else { 1.0 };
    let labels = psi.map(|p| if orient * p >= 0.0 { 1.0 } else { -1.0 });
    Ok(RbfAnisotropy {
        inputs,
        original_eigenvalues: original,
        features: base.with_singular_values(rescaled)?,
        labels,
    })
}
