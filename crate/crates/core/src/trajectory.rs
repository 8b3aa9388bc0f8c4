//! Training trajectories and the per-checkpoint alignment diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral::{cka, effective_rank, label_kernel, trace_ratios, uncentered_alignment, KernelMatrix};
use crate::tangent::{accuracy, forward, JacobianFactors, MlpParams, TangentFeatureMatrix, Targets};

/// Trace ratio indices at the reference size of 1000 kernel rows.
pub const REFERENCE_TRACE_KS: [usize; 3] = [40, 80, 160];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// `‖δw_t‖₂`
    pub update_norm: f64,
    /// `‖Φ_t‖_F`
    pub feature_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRecord {
    pub step: usize,
    pub cka_train: f64,
    pub cka_test: Option<f64>,
    pub erank: f64,
    /// `(k, T_k)` pairs with `k` already scaled to the kernel size.
    pub trace_ratios: Vec<(usize, f64)>,
    pub layer_cka: Vec<f64>,
    pub acc_train: f64,
    pub acc_test: Option<f64>,
    pub uncentered_train: Option<f64>,
    /// Train-batch kernel eigenvalues, non-increasing.
    pub spectrum: Vec<f64>,
}

/// Step records in strictly increasing order plus sparse checkpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    steps: Vec<StepRecord>,
    checkpoints: Vec<CheckpointRecord>,
}

impl TrainingTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn checkpoints(&self) -> &[CheckpointRecord] {
        &self.checkpoints
    }

    pub fn record(&mut self, step: usize, update_norm: f64, feature_norm: f64) -> Result<()> {
        if !(update_norm.is_finite() && update_norm >= 0.0 && feature_norm.is_finite() && feature_norm >= 0.0) {
            return Err(Error::NonFinite("step record norms"));
        }
        if let Some(last) = self.steps.last() {
            if step <= last.step {
                return Err(Error::InvalidArgument(format!(
                    "step {step} does not follow step {}",
                    last.step
                )));
            }
        }
        self.steps.push(StepRecord {
            step,
            update_norm,
            feature_norm,
        });
        Ok(())
    }

    /// Appends `‖δw‖₂` and `‖Φ‖_F`; the feature matrix is not retained.
    pub fn record_step(&mut self, step: usize, delta: &DVector<f64>, phi: &TangentFeatureMatrix) -> Result<()> {
        self.record(step, delta.norm(), phi.frobenius_norm())
    }

    pub fn push_checkpoint(&mut self, record: CheckpointRecord) -> Result<()> {
        if let Some(last) = self.checkpoints.last() {
            if record.step <= last.step {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint {} does not follow checkpoint {}",
                    record.step, last.step
                )));
            }
        }
        self.checkpoints.push(record);
        Ok(())
    }

    /// `Σ_t ‖δw_t‖₂ ‖Φ_t‖_F`.
    pub fn complexity(&self) -> f64 {
        self.steps.iter().map(|s| s.update_norm * s.feature_norm).sum()
    }

    /// Joins two traces; `later` must start after `self` ends.
    pub fn concat(mut self, later: TrainingTrace) -> Result<TrainingTrace> {
        for s in later.steps {
            self.record(s.step, s.update_norm, s.feature_norm)?;
        }
        for c in later.checkpoints {
            self.push_checkpoint(c)?;
        }
        Ok(self)
    }
}

/// Scales the reference indices to a kernel with `dim` rows (at least 1,
/// at most `dim`).
pub fn scaled_trace_ks(dim: usize) -> Vec<usize> {
    REFERENCE_TRACE_KS
        .iter()
        .map(|&k| ((k * dim) as f64 / 1000.0).round().clamp(1.0, dim.max(1) as f64) as usize)
        .collect()
}

/// 0, 1, 2, 5, 10, 20, 50, ... up to and including `last`.
pub fn log_schedule(last: usize) -> Vec<usize> {
    let mut out = vec![0];
    let mut decade = 1;
    'outer: loop {
        for m in [1, 2, 5] {
            let s = m * decade;
            if s >= last {
                break 'outer;
            }
            out.push(s);
        }
        decade *= 10;
    }
    if last > 0 {
        out.push(last);
    }
    out
}

/// Inputs and labels of an evaluation batch.
#[derive(Debug, Clone)]
pub struct EvalBatch {
    pub x: DMatrix<f64>,
    pub targets: Targets,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CheckpointOptions {
    pub uncentered: bool,
}

struct BatchKernels {
    layers: Vec<KernelMatrix>,
    total: KernelMatrix,
    labels: KernelMatrix,
    accuracy: f64,
}

fn batch_kernels(params: &MlpParams, batch: &EvalBatch) -> Result<BatchKernels> {
    let c = params.arch().output_dim();
    let f = JacobianFactors::new(params, &batch.x)?;
    let layers: Vec<KernelMatrix> = (0..f.num_layers())
        .map(|l| KernelMatrix::from_parts(f.layer_cross_kernel(&f, l), f.n_samples(), c))
        .collect();
    let total = layers.iter().skip(1).fold(layers[0].clone(), |acc, k| &acc + k);
    let labels = label_kernel(&batch.targets.label_matrix(c)?)?;
    let accuracy = accuracy(&forward(params, &batch.x)?, &batch.targets)?;
    Ok(BatchKernels {
        layers,
        total,
        labels,
        accuracy,
    })
}

/// Tangent kernel diagnostics on a train batch and an optional test batch.
///
/// Effective rank and trace ratios describe the uncentered train kernel; CKA
/// values use centered kernels.
pub fn checkpoint_metrics(
    step: usize,
    params: &MlpParams,
    train: &EvalBatch,
    test: Option<&EvalBatch>,
    opts: CheckpointOptions,
) -> Result<CheckpointRecord> {
    let tr = batch_kernels(params, train)?;
    let spectrum = tr.total.spectrum().clone();
    let erank = effective_rank(&spectrum)?;
    let ks = scaled_trace_ks(tr.total.dim());
    let ratios = trace_ratios(&spectrum, &ks)?;
    let cka_train = cka(&tr.total, &tr.labels)?;
    let layer_cka = tr
        .layers
        .iter()
        .map(|k| cka(k, &tr.labels))
        .collect::<Result<Vec<_>>>()?;
    let uncentered_train = if opts.uncentered {
        Some(uncentered_alignment(&tr.total, &tr.labels)?)
    } else {
        None
    };
    let (cka_test, acc_test) = match test {
        Some(batch) => {
            let te = batch_kernels(params, batch)?;
            (Some(cka(&te.total, &te.labels)?), Some(te.accuracy))
        }
        None => (None, None),
    };
    Ok(CheckpointRecord {
        step,
        cka_train,
        cka_test,
        erank,
        trace_ratios: ks.into_iter().zip(ratios).collect(),
        layer_cka,
        acc_train: tr.accuracy,
        acc_test,
        uncentered_train,
        spectrum: spectrum.values().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitAlignment {
    pub cka_easy: f64,
    pub cka_difficult: f64,
    /// `cka_easy / cka_difficult`
    pub ratio: f64,
}

/// CKA between tangent kernel and labels, separately on two equal-size
/// subsets.
pub fn split_alignment(params: &MlpParams, easy: &EvalBatch, difficult: &EvalBatch) -> Result<SplitAlignment> {
    if easy.x.nrows() != difficult.x.nrows() {
        return Err(Error::DimensionMismatch {
            context: "split alignment subsets",
            expected: easy.x.nrows().to_string(),
            got: difficult.x.nrows().to_string(),
        });
    }
    let e = batch_kernels(params, easy)?;
    let d = batch_kernels(params, difficult)?;
    let cka_easy = cka(&e.total, &e.labels)?;
    let cka_difficult = cka(&d.total, &d.labels)?;
    Ok(SplitAlignment {
        cka_easy,
        cka_difficult,
        ratio: cka_easy / cka_difficult,
    })
}
