//! Fully-connected networks with exact per-output tangent features.
//!
//! Parameters flatten in layer-major order. Within a layer the weight matrix
//! (shape `out × in`) comes first in row-major order, followed by the bias.
//! Tangent feature rows are sample-major: row `i * c + y` holds the gradient
//! of output `y` at sample `i`.
//!
//! Besides the explicit feature matrix, kernels can be assembled from the
//! backpropagation factors directly. For a dense layer the feature block of
//! sample `i` and output `y` is the outer product `δ_y(x_i) ⊗ a(x_i)`, so
//! `K^ℓ = (D Dᵀ) ∘ (A Aᵀ + 1)` and the `P`-dimensional features never need to
//! be materialized. This is what makes 256-wide, 6-layer networks tractable
//! on evaluation grids of a few thousand points.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{shape, Error, Result};
use crate::spectral::{sym_eig, KernelMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative; the ReLU derivative at 0 is 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    /// Variance of the Gaussian initializer for a given fan-in.
    fn init_variance(self, fan_in: usize) -> f64 {
        match self {
            Activation::Relu => 2.0 / fan_in as f64,
            Activation::Tanh => 1.0 / fan_in as f64,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation '{other}' (expected relu or tanh)"
            ))),
        }
    }
}

/// Layer widths from input to output. The last layer is always affine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpArch {
    widths: Vec<usize>,
    activation: Activation,
    bias: bool,
}

impl MlpArch {
    pub fn new(widths: Vec<usize>, activation: Activation, bias: bool) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "architecture needs at least an input and an output width".into(),
            ));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be >= 1".into()));
        }
        Ok(Self {
            widths,
            activation,
            bias,
        })
    }

    /// `depth` weight layers with `width` hidden units each.
    pub fn uniform(input: usize, width: usize, depth: usize, output: usize, activation: Activation) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(width, depth.saturating_sub(1)));
        widths.push(output);
        Self::new(widths, activation, true)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn has_bias(&self) -> bool {
        self.bias
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Number of weight layers.
    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn layer_param_count(&self, layer: usize) -> usize {
        let (fan_in, fan_out) = (self.widths[layer], self.widths[layer + 1]);
        fan_in * fan_out + if self.bias { fan_out } else { 0 }
    }

    pub fn num_params(&self) -> usize {
        (0..self.num_layers()).map(|l| self.layer_param_count(l)).sum()
    }

    /// Column range of each layer inside the flat parameter vector.
    pub fn layer_spans(&self) -> Vec<LayerSpan> {
        let mut start = 0;
        (0..self.num_layers())
            .map(|layer| {
                let end = start + self.layer_param_count(layer);
                let span = LayerSpan {
                    layer,
                    range: start..end,
                };
                start = end;
                span
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpan {
    pub layer: usize,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`
    pub weight: DMatrix<f64>,
    pub bias: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    arch: MlpArch,
    layers: Vec<DenseLayer>,
}

/// Gaussian initialization with variance `2/fan_in` (ReLU) or `1/fan_in`
/// (tanh); zero biases.
pub fn mlp_init(arch: &MlpArch, seed: u64) -> MlpParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = (0..arch.num_layers())
        .map(|l| {
            let (fan_in, fan_out) = (arch.widths[l], arch.widths[l + 1]);
            let std = arch.activation.init_variance(fan_in).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            let weight = DMatrix::from_fn(fan_out, fan_in, |_, _| normal.sample(&mut rng));
            DenseLayer {
                weight,
                bias: arch.bias.then(|| DVector::zeros(fan_out)),
            }
        })
        .collect();
    MlpParams {
        arch: arch.clone(),
        layers,
    }
}

impl MlpParams {
    pub fn zeros(arch: &MlpArch) -> Self {
        Self::from_flat(arch, &DVector::zeros(arch.num_params())).expect("length matches")
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.arch.num_params()
    }

    pub fn to_flat(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            let w = &layer.weight;
            for o in 0..w.nrows() {
                out.extend(w.row(o).iter());
            }
            if let Some(b) = &layer.bias {
                out.extend(b.iter());
            }
        }
        DVector::from_vec(out)
    }

    pub fn from_flat(arch: &MlpArch, flat: &DVector<f64>) -> Result<Self> {
        if flat.len() != arch.num_params() {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector",
                expected: arch.num_params().to_string(),
                got: flat.len().to_string(),
            });
        }
        let mut pos = 0;
        let layers = (0..arch.num_layers())
            .map(|l| {
                let (fan_in, fan_out) = (arch.widths[l], arch.widths[l + 1]);
                let weight = DMatrix::from_row_slice(fan_out, fan_in, &flat.as_slice()[pos..pos + fan_in * fan_out]);
                pos += fan_in * fan_out;
                let bias = arch.bias.then(|| {
                    let b = DVector::from_column_slice(&flat.as_slice()[pos..pos + fan_out]);
                    pos += fan_out;
                    b
                });
                DenseLayer { weight, bias }
            })
            .collect();
        Ok(Self {
            arch: arch.clone(),
            layers,
        })
    }

    /// `self + alpha * direction` in flat coordinates.
    pub fn offset(&self, direction: &DVector<f64>, alpha: f64) -> Result<Self> {
        Self::from_flat(&self.arch, &(self.to_flat() + direction * alpha))
    }
}

fn check_input(params: &MlpParams, x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() != params.arch.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "network input",
            expected: format!("n x {}", params.arch.input_dim()),
            got: shape(x.nrows(), x.ncols()),
        });
    }
    Ok(())
}

fn affine(h: &DMatrix<f64>, layer: &DenseLayer) -> DMatrix<f64> {
    let mut z = h * layer.weight.transpose();
    if let Some(b) = &layer.bias {
        for mut row in z.row_iter_mut() {
            row += b.transpose();
        }
    }
    z
}

/// Activations kept from a forward pass.
struct ForwardCache {
    /// Input to each layer (`n × fan_in`).
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<DMatrix<f64>>,
    output: DMatrix<f64>,
}

fn forward_cached(params: &MlpParams, x: &DMatrix<f64>) -> ForwardCache {
    let act = params.arch.activation;
    let last = params.layers.len() - 1;
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre = Vec::with_capacity(last);
    let mut h = x.clone();
    for (l, layer) in params.layers.iter().enumerate() {
        let z = affine(&h, layer);
        inputs.push(h);
        if l == last {
            h = z;
        } else {
            h = z.map(|v| act.apply(v));
            pre.push(z);
        }
    }
    ForwardCache { inputs, pre, output: h }
}

/// Network scores, `n × c`.
pub fn forward(params: &MlpParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_input(params, x)?;
    Ok(forward_cached(params, x).output)
}

/// Backpropagates an output cotangent `n × c`; returns per-layer deltas
/// (`n × fan_out`), first layer first.
fn backprop_deltas(params: &MlpParams, cache: &ForwardCache, cotangent: DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let act = params.arch.activation;
    let nl = params.layers.len();
    let mut deltas = vec![DMatrix::zeros(0, 0); nl];
    let mut delta = cotangent;
    for l in (0..nl).rev() {
        if l > 0 {
            let mut back = &delta * &params.layers[l].weight;
            back.zip_apply(&cache.pre[l - 1], |d, z| *d *= act.derivative(z));
            deltas[l] = std::mem::replace(&mut delta, back);
        } else {
            deltas[0] = std::mem::replace(&mut delta, DMatrix::zeros(0, 0));
        }
    }
    deltas
}

/// Backpropagation factors for every output class.
pub struct JacobianFactors {
    /// Layer inputs, `n × fan_in`.
    inputs: Vec<DMatrix<f64>>,
    /// `deltas[class][layer]`, `n × fan_out`.
    deltas: Vec<Vec<DMatrix<f64>>>,
    bias: bool,
    n_samples: usize,
    n_classes: usize,
}

impl JacobianFactors {
    pub fn new(params: &MlpParams, x: &DMatrix<f64>) -> Result<Self> {
        check_input(params, x)?;
        if x.nrows() == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        let cache = forward_cached(params, x);
        let (n, c) = (x.nrows(), params.arch.output_dim());
        let deltas = (0..c)
            .map(|y| {
                let mut seed = DMatrix::zeros(n, c);
                seed.column_mut(y).fill(1.0);
                backprop_deltas(params, &cache, seed)
            })
            .collect();
        Ok(Self {
            inputs: cache.inputs,
            deltas,
            bias: params.arch.bias,
            n_samples: n,
            n_classes: c,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn num_layers(&self) -> usize {
        self.inputs.len()
    }

    /// Layer `l` block of the cross kernel between two batches,
    /// `(n c) × (m c)`.
    pub fn layer_cross_kernel(&self, other: &JacobianFactors, l: usize) -> DMatrix<f64> {
        let (n, m, c) = (self.n_samples, other.n_samples, self.n_classes);
        let mut act_gram = &self.inputs[l] * other.inputs[l].transpose();
        if self.bias {
            act_gram.add_scalar_mut(1.0);
        }
        let mut out = DMatrix::zeros(n * c, m * c);
        for y in 0..c {
            for y2 in 0..c {
                let delta_gram = &self.deltas[y][l] * other.deltas[y2][l].transpose();
                for j in 0..m {
                    for i in 0..n {
                        out[(i * c + y, j * c + y2)] = delta_gram[(i, j)] * act_gram[(i, j)];
                    }
                }
            }
        }
        out
    }

    pub fn cross_kernel(&self, other: &JacobianFactors) -> DMatrix<f64> {
        let mut total = self.layer_cross_kernel(other, 0);
        for l in 1..self.num_layers() {
            total += self.layer_cross_kernel(other, l);
        }
        total
    }

    /// `‖Φ‖_F` without forming the features.
    pub fn feature_norm(&self) -> f64 {
        let mut sq = 0.0;
        for l in 0..self.num_layers() {
            let a_sq: Vec<f64> = self.inputs[l]
                .row_iter()
                .map(|r| r.norm_squared() + if self.bias { 1.0 } else { 0.0 })
                .collect();
            for per_class in &self.deltas {
                for (i, row) in per_class[l].row_iter().enumerate() {
                    sq += row.norm_squared() * a_sq[i];
                }
            }
        }
        sq.sqrt()
    }

    /// Explicit `(n c) × P` feature matrix.
    pub fn features(&self, spans: &[LayerSpan]) -> DMatrix<f64> {
        let (n, c) = (self.n_samples, self.n_classes);
        let p = spans.last().map_or(0, |s| s.range.end);
        let mut phi = DMatrix::zeros(n * c, p);
        for (l, span) in spans.iter().enumerate() {
            let a = &self.inputs[l];
            let fan_in = a.ncols();
            for y in 0..c {
                let d = &self.deltas[y][l];
                let fan_out = d.ncols();
                for i in 0..n {
                    let row = i * c + y;
                    for o in 0..fan_out {
                        let dv = d[(i, o)];
                        let base = span.range.start + o * fan_in;
                        for k in 0..fan_in {
                            phi[(row, base + k)] = dv * a[(i, k)];
                        }
                        if self.bias {
                            phi[(row, span.range.start + fan_out * fan_in + o)] = dv;
                        }
                    }
                }
            }
        }
        phi
    }
}

/// Per-(sample, class) parameter gradients.
#[derive(Debug, Clone)]
pub struct TangentFeatureMatrix {
    matrix: DMatrix<f64>,
    n_samples: usize,
    n_classes: usize,
    spans: Vec<LayerSpan>,
}

impl TangentFeatureMatrix {
    pub fn new(matrix: DMatrix<f64>, n_samples: usize, n_classes: usize, spans: Vec<LayerSpan>) -> Result<Self> {
        if matrix.nrows() != n_samples * n_classes {
            return Err(Error::DimensionMismatch {
                context: "tangent feature rows",
                expected: (n_samples * n_classes).to_string(),
                got: matrix.nrows().to_string(),
            });
        }
        let mut cursor = 0;
        for s in &spans {
            if s.range.start != cursor {
                return Err(Error::InvalidArgument("layer spans must partition the columns".into()));
            }
            cursor = s.range.end;
        }
        if cursor != matrix.ncols() {
            return Err(Error::InvalidArgument("layer spans must partition the columns".into()));
        }
        Ok(Self {
            matrix,
            n_samples,
            n_classes,
            spans,
        })
    }

    /// Single-span feature matrix, e.g. for a linear model.
    pub fn from_matrix(matrix: DMatrix<f64>, n_classes: usize) -> Result<Self> {
        let p = matrix.ncols();
        let n = matrix.nrows() / n_classes.max(1);
        Self::new(matrix, n, n_classes, vec![LayerSpan { layer: 0, range: 0..p }])
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn spans(&self) -> &[LayerSpan] {
        &self.spans
    }

    pub fn row_index(&self, sample: usize, class: usize) -> usize {
        sample * self.n_classes + class
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// Kernel of the columns belonging to one layer.
    pub fn layer_kernel(&self, layer: usize) -> Result<KernelMatrix> {
        let span = self
            .spans
            .iter()
            .find(|s| s.layer == layer)
            .ok_or(Error::IndexOutOfRange {
                index: layer,
                max: self.spans.len(),
            })?;
        let block = self.matrix.columns(span.range.start, span.range.len());
        Ok(KernelMatrix::from_parts(
            block * block.transpose(),
            self.n_samples,
            self.n_classes,
        ))
    }
}

/// Exact tangent features by per-output backpropagation.
pub fn tangent_features(params: &MlpParams, x: &DMatrix<f64>) -> Result<TangentFeatureMatrix> {
    let factors = JacobianFactors::new(params, x)?;
    let spans = params.arch.layer_spans();
    let matrix = factors.features(&spans);
    Ok(TangentFeatureMatrix {
        matrix,
        n_samples: factors.n_samples,
        n_classes: factors.n_classes,
        spans,
    })
}

/// `K = Φ Φᵀ`.
pub fn tangent_kernel(phi: &TangentFeatureMatrix) -> KernelMatrix {
    let m = &phi.matrix;
    KernelMatrix::from_parts(m * m.transpose(), phi.n_samples, phi.n_classes)
}

/// Tangent kernel assembled from backpropagation factors.
pub fn tangent_kernel_direct(params: &MlpParams, x: &DMatrix<f64>) -> Result<KernelMatrix> {
    let f = JacobianFactors::new(params, x)?;
    Ok(KernelMatrix::from_parts(f.cross_kernel(&f), f.n_samples, f.n_classes))
}

/// One kernel per weight layer; they sum to the full tangent kernel.
pub fn layerwise_kernels(params: &MlpParams, x: &DMatrix<f64>) -> Result<Vec<KernelMatrix>> {
    let f = JacobianFactors::new(params, x)?;
    Ok((0..f.num_layers())
        .map(|l| KernelMatrix::from_parts(f.layer_cross_kernel(&f, l), f.n_samples, f.n_classes))
        .collect())
}

/// `‖Φ‖_F` on a batch, computed without materializing the features.
pub fn tangent_feature_norm(params: &MlpParams, x: &DMatrix<f64>) -> Result<f64> {
    Ok(JacobianFactors::new(params, x)?.feature_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    /// Subtract the mean over all `(i, y)` rows.
    #[default]
    Joint,
    /// Subtract, for each class `y`, the mean over samples of rows `(·, y)`.
    PerClass,
}

/// Removes the mean tangent feature.
pub fn center_features(phi: &TangentFeatureMatrix, mode: Centering) -> Result<TangentFeatureMatrix> {
    if phi.n_samples < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: phi.n_samples,
        });
    }
    let mut m = phi.matrix.clone();
    let (n, c) = (phi.n_samples, phi.n_classes);
    match mode {
        Centering::Joint => {
            let rows = m.nrows() as f64;
            for mut col in m.column_iter_mut() {
                let mean = col.sum() / rows;
                col.add_scalar_mut(-mean);
            }
        }
        Centering::PerClass => {
            for y in 0..c {
                for mut col in m.column_iter_mut() {
                    let mean = (0..n).map(|i| col[i * c + y]).sum::<f64>() / n as f64;
                    for i in 0..n {
                        col[i * c + y] -= mean;
                    }
                }
            }
        }
    }
    Ok(TangentFeatureMatrix {
        matrix: m,
        ..phi.clone()
    })
}

/// Kernel principal components evaluated on a batch.
#[derive(Debug, Clone)]
pub struct PrincipalComponents {
    /// Top eigenvalues of the defining kernel.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors of the defining kernel, `(n c) × k`.
    pub sample_vectors: DMatrix<f64>,
    /// Component values at the evaluation points, `(m c) × k`.
    pub values: DMatrix<f64>,
}

/// `û_J(x) = ⟨v_J, Φ(x)⟩ / √λ_J`, written through kernels as
/// `K(x, X) u_J / λ_J` so the right singular vectors are never formed.
pub fn principal_components_from_kernels(
    defining: &KernelMatrix,
    cross: &DMatrix<f64>,
    k: usize,
) -> Result<PrincipalComponents> {
    if cross.ncols() != defining.dim() {
        return Err(Error::DimensionMismatch {
            context: "cross kernel columns",
            expected: defining.dim().to_string(),
            got: cross.ncols().to_string(),
        });
    }
    let eig = defining.eigen()?;
    let rank = eig.spectrum.numerical_rank();
    if k > rank {
        return Err(Error::RankExceeded { requested: k, rank });
    }
    let eigenvalues = eig.spectrum.values()[..k].to_vec();
    let sample_vectors = eig.vectors.columns(0, k).into_owned();
    let mut values = cross * &sample_vectors;
    for (j, mut col) in values.column_iter_mut().enumerate() {
        col /= eigenvalues[j];
    }
    Ok(PrincipalComponents {
        eigenvalues,
        sample_vectors,
        values,
    })
}

/// Principal components of the tangent kernel on `x_def`, evaluated on
/// `x_eval`.
pub fn principal_components(
    params: &MlpParams,
    x_def: &DMatrix<f64>,
    x_eval: &DMatrix<f64>,
    k: usize,
) -> Result<PrincipalComponents> {
    let fd = JacobianFactors::new(params, x_def)?;
    let fe = JacobianFactors::new(params, x_eval)?;
    let defining = KernelMatrix::from_parts(fd.cross_kernel(&fd), fd.n_samples, fd.n_classes);
    principal_components_from_kernels(&defining, &fe.cross_kernel(&fd), k)
}

/// Same as [`principal_components`] from explicit feature matrices.
pub fn principal_components_from_features(
    phi_def: &TangentFeatureMatrix,
    phi_eval: &TangentFeatureMatrix,
    k: usize,
) -> Result<PrincipalComponents> {
    let cross = phi_eval.matrix() * phi_def.matrix().transpose();
    principal_components_from_kernels(&tangent_kernel(phi_def), &cross, k)
}

/// Gradient of a scalar loss w.r.t. the sample outputs, indexed like the
/// rows of a tangent feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad(DVector<f64>);

impl LossGrad {
    pub fn new(v: DVector<f64>) -> Result<Self> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(Self(v))
        } else {
            Err(Error::NonFinite("loss gradient"))
        }
    }

    /// Flattens an `n × c` gradient sample-major.
    pub fn from_outputs(g: &DMatrix<f64>) -> Result<Self> {
        let (n, c) = g.shape();
        Self::new(DVector::from_iterator(
            n * c,
            (0..n).flat_map(|i| (0..c).map(move |y| g[(i, y)])),
        ))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Per-mode function updates of one gradient step.
#[derive(Debug, Clone)]
pub struct SpectralBias {
    pub eigenvalues: Vec<f64>,
    /// Kernel eigenvectors of the retained (nonzero) modes.
    pub modes: DMatrix<f64>,
    /// `δf_J = -η λ_J (u_Jᵀ ∇L)`.
    pub coefficients: Vec<f64>,
}

impl SpectralBias {
    /// `Σ_J δf_J u_J`.
    pub fn reconstruct(&self) -> DVector<f64> {
        &self.modes * DVector::from_column_slice(&self.coefficients)
    }
}

pub fn spectral_bias_from_kernel(k: &KernelMatrix, grad: &LossGrad, lr: f64) -> Result<SpectralBias> {
    if lr <= 0.0 {
        return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
    }
    if grad.0.len() != k.dim() {
        return Err(Error::DimensionMismatch {
            context: "loss gradient",
            expected: k.dim().to_string(),
            got: grad.0.len().to_string(),
        });
    }
    let eig = sym_eig(k.entries())?;
    let rank = eig.spectrum.numerical_rank();
    let eigenvalues = eig.spectrum.values()[..rank].to_vec();
    let modes = eig.vectors.columns(0, rank).into_owned();
    let proj = modes.transpose() * &grad.0;
    let coefficients = eigenvalues
        .iter()
        .zip(proj.iter())
        .map(|(lam, p)| -lr * lam * p)
        .collect();
    Ok(SpectralBias {
        eigenvalues,
        modes,
        coefficients,
    })
}

/// Decomposes the first-order function update of `δw = -η Φᵀ ∇L` in the
/// eigenbasis of the tangent kernel.
pub fn spectral_bias_decomposition(phi: &TangentFeatureMatrix, grad: &LossGrad, lr: f64) -> Result<SpectralBias> {
    spectral_bias_from_kernel(&tangent_kernel(phi), grad, lr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `½ Σ (f - t)²`
    Mse,
    /// Softmax cross-entropy over class indices.
    CrossEntropy,
    /// Logistic loss on a single output with `±1` labels.
    Bce,
}

impl std::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Loss::Mse),
            "cross_entropy" => Ok(Loss::CrossEntropy),
            "bce" => Ok(Loss::Bce),
            other => Err(Error::InvalidArgument(format!("unknown loss '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    Sum,
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Real-valued targets, `n × c`.
    Values(DMatrix<f64>),
    /// Class indices in `[0, c)`.
    Classes(Vec<usize>),
    /// `±1` labels for a single-output network.
    Binary(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(m) => m.nrows(),
            Targets::Classes(v) => v.len(),
            Targets::Binary(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dense target matrix (one-hot for classes).
    pub fn dense(&self, c: usize) -> Result<DMatrix<f64>> {
        match self {
            Targets::Values(m) => {
                if m.ncols() != c {
                    return Err(Error::DimensionMismatch {
                        context: "target columns",
                        expected: c.to_string(),
                        got: m.ncols().to_string(),
                    });
                }
                Ok(m.clone())
            }
            Targets::Classes(idx) => {
                let mut m = DMatrix::zeros(idx.len(), c);
                for (i, &y) in idx.iter().enumerate() {
                    if y >= c {
                        return Err(Error::InvalidLabel {
                            row: i,
                            reason: format!("class {y} >= {c}"),
                        });
                    }
                    m[(i, y)] = 1.0;
                }
                Ok(m)
            }
            Targets::Binary(v) => {
                if c != 1 {
                    return Err(Error::DimensionMismatch {
                        context: "binary targets need one output",
                        expected: "1".into(),
                        got: c.to_string(),
                    });
                }
                Ok(DMatrix::from_column_slice(v.len(), 1, v))
            }
        }
    }

    /// Labels in the form expected by [`crate::spectral::label_kernel`].
    pub fn label_matrix(&self, c: usize) -> Result<DMatrix<f64>> {
        match self {
            Targets::Values(_) => Err(Error::InvalidArgument(
                "label kernel needs class or binary targets".into(),
            )),
            _ => self.dense(c),
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Loss value and its gradient w.r.t. the scores.
pub fn loss_and_grad(
    loss: Loss,
    scores: &DMatrix<f64>,
    targets: &Targets,
    reduction: Reduction,
) -> Result<(f64, DMatrix<f64>)> {
    let (n, c) = scores.shape();
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            context: "targets",
            expected: n.to_string(),
            got: targets.len().to_string(),
        });
    }
    let (value, mut grad) = match loss {
        Loss::Mse => {
            let t = targets.dense(c)?;
            let diff = scores - t;
            (0.5 * diff.norm_squared(), diff)
        }
        Loss::CrossEntropy => {
            let Targets::Classes(idx) = targets else {
                return Err(Error::InvalidArgument("cross-entropy needs class targets".into()));
            };
            let mut grad = DMatrix::zeros(n, c);
            let mut total = 0.0;
            for i in 0..n {
                let y = idx[i];
                if y >= c {
                    return Err(Error::InvalidLabel {
                        row: i,
                        reason: format!("class {y} >= {c}"),
                    });
                }
                let row = scores.row(i);
                let mx = row.max();
                let sum: f64 = row.iter().map(|&s| (s - mx).exp()).sum();
                total += mx + sum.ln() - scores[(i, y)];
                for k in 0..c {
                    grad[(i, k)] = (scores[(i, k)] - mx).exp() / sum;
                }
                grad[(i, y)] -= 1.0;
            }
            (total, grad)
        }
        Loss::Bce => {
            let Targets::Binary(ys) = targets else {
                return Err(Error::InvalidArgument("bce needs ±1 targets".into()));
            };
            if c != 1 {
                return Err(Error::DimensionMismatch {
                    context: "bce output width",
                    expected: "1".into(),
                    got: c.to_string(),
                });
            }
            let mut grad = DMatrix::zeros(n, 1);
            let mut total = 0.0;
            for (i, &y) in ys.iter().enumerate() {
                let m = y * scores[(i, 0)];
                total += softplus(-m);
                grad[(i, 0)] = -y * sigmoid(-m);
            }
            (total, grad)
        }
    };
    match reduction {
        Reduction::Sum => Ok((value, grad)),
        Reduction::Mean => {
            grad /= n as f64;
            Ok((value / n as f64, grad))
        }
    }
}

/// `Φᵀ vec(g)` by a single backward pass, `g` being `n × c`.
pub fn pullback(params: &MlpParams, x: &DMatrix<f64>, output_grad: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_input(params, x)?;
    let c = params.arch.output_dim();
    if output_grad.shape() != (x.nrows(), c) {
        return Err(Error::DimensionMismatch {
            context: "output gradient",
            expected: shape(x.nrows(), c),
            got: shape(output_grad.nrows(), output_grad.ncols()),
        });
    }
    let cache = forward_cached(params, x);
    let deltas = backprop_deltas(params, &cache, output_grad.clone());
    let mut out = Vec::with_capacity(params.num_params());
    for (l, delta) in deltas.iter().enumerate() {
        let gw = delta.transpose() * &cache.inputs[l];
        for o in 0..gw.nrows() {
            out.extend(gw.row(o).iter());
        }
        if params.arch.bias {
            out.extend(delta.row_sum().iter());
        }
    }
    Ok(DVector::from_vec(out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub loss: Loss,
    pub reduction: Reduction,
    pub lr: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub params: MlpParams,
    pub velocity: DVector<f64>,
    /// Realized parameter change (includes the momentum contribution).
    pub delta: DVector<f64>,
    /// Raw gradient `∇_w L` at the pre-step parameters.
    pub gradient: DVector<f64>,
    /// Loss at the pre-step parameters.
    pub loss: f64,
}

/// Heavy-ball step: `v' = μ v - η ∇L`, `w' = w + v'`.
pub fn gd_step(
    params: &MlpParams,
    x: &DMatrix<f64>,
    targets: &Targets,
    opts: &StepOptions,
    velocity: &DVector<f64>,
) -> Result<StepOutcome> {
    if !(opts.lr > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be > 0, got {}",
            opts.lr
        )));
    }
    if !(0.0..1.0).contains(&opts.momentum) {
        return Err(Error::InvalidArgument(format!(
            "momentum must lie in [0, 1), got {}",
            opts.momentum
        )));
    }
    if velocity.len() != params.num_params() {
        return Err(Error::DimensionMismatch {
            context: "velocity",
            expected: params.num_params().to_string(),
            got: velocity.len().to_string(),
        });
    }
    let scores = forward(params, x)?;
    let (loss, g) = loss_and_grad(opts.loss, &scores, targets, opts.reduction)?;
    let gradient = pullback(params, x, &g)?;
    let new_velocity = velocity * opts.momentum - &gradient * opts.lr;
    let next = params.offset(&new_velocity, 1.0)?;
    Ok(StepOutcome {
        params: next,
        delta: new_velocity.clone(),
        velocity: new_velocity,
        gradient,
        loss,
    })
}

/// `‖f(w + εv) - f(w)‖_F` on `x_eval` for each unit direction `v`.
pub fn perturbation_response(
    params: &MlpParams,
    x_eval: &DMatrix<f64>,
    directions: &[DVector<f64>],
    magnitude: f64,
) -> Result<Vec<f64>> {
    let base = forward(params, x_eval)?;
    directions
        .iter()
        .map(|v| {
            if v.len() != params.num_params() {
                return Err(Error::DimensionMismatch {
                    context: "perturbation direction",
                    expected: params.num_params().to_string(),
                    got: v.len().to_string(),
                });
            }
            if (v.norm() - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidArgument(
                    "perturbation directions must be unit norm".into(),
                ));
            }
            let moved = forward(&params.offset(v, magnitude)?, x_eval)?;
            Ok((moved - &base).norm())
        })
        .collect()
}

/// Fraction of correctly classified samples.
pub fn accuracy(scores: &DMatrix<f64>, targets: &Targets) -> Result<f64> {
    let n = scores.nrows();
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            context: "targets",
            expected: n.to_string(),
            got: targets.len().to_string(),
        });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let correct = match targets {
        Targets::Binary(ys) => ys
            .iter()
            .enumerate()
            .filter(|(i, &y)| (scores[(*i, 0)] >= 0.0) == (y > 0.0))
            .count(),
        Targets::Classes(idx) => idx
            .iter()
            .enumerate()
            .filter(|(i, &y)| scores.row(*i).transpose().argmax().0 == y)
            .count(),
        Targets::Values(_) => return Err(Error::InvalidArgument("accuracy needs class or binary targets".into())),
    };
    Ok(correct as f64 / n as f64)
}
