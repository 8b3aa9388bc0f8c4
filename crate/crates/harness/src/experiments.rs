//! Experiment drivers. Each one writes its tables into a [`Sink`].

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tangent_align::datasets::{
    corrupt_labels, disk_dataset, disk_label, easy_difficult_mix, gaussian_clusters, grid_1d, grid_2d, load_csv,
    load_idx, CsvSchema, LabelKind, LabeledDataset, Labels,
};
use tangent_align::linear::{
    gd_train_linear, mean_squared_error, noisy_feature_regression_setup, optimal_norm_nu, optimal_norm_objective,
    rbf_anisotropy_setup, supernat_step, SuperNatState, DIVERGENCE_LOSS,
};
use tangent_align::spectral::{
    cka, dft_magnitudes, dominant_frequency, effective_rank, label_kernel, KernelMatrix, Spectrum,
};
use tangent_align::tangent::{
    accuracy, forward, gd_step, mlp_init, pullback, tangent_feature_norm, tangent_kernel_direct, MlpArch, MlpParams,
    Reduction, StepOptions,
};
use tangent_align::trajectory::{checkpoint_metrics, split_alignment, CheckpointOptions, EvalBatch, TrainingTrace};

use crate::config::{ComplexityUpdate, DatasetKind, ExperimentConfig, ExperimentKind};
use crate::output::{Sink, Table};
use crate::RunError;

const STREAM_DATA: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_TEST: u64 = 4;
const STREAM_CORRUPT: u64 = 5;
const STREAM_DIRECTIONS: u64 = 6;
const STREAM_PERMUTE: u64 = 7;
const STREAM_MINIBATCH: u64 = 8;
const STREAM_MIX: u64 = 9;

/// Independent seed for one consumer of the run seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

pub fn execute(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    match cfg.kind {
        ExperimentKind::DiskAlignment => disk_alignment(cfg, sink),
        ExperimentKind::Fourier1d => fourier_1d(cfg, sink),
        ExperimentKind::NoisyRegressionSupernat => noisy_regression(cfg, sink),
        ExperimentKind::RbfAnisotropy => rbf_anisotropy(cfg, sink),
        ExperimentKind::SplitAlignment => split_alignment_run(cfg, sink),
        ExperimentKind::ComplexitySweep => complexity_sweep(cfg, sink),
        ExperimentKind::PerturbationResponse => perturbation(cfg, sink),
    }
}

struct Split {
    train: LabeledDataset,
    test: LabeledDataset,
}

fn shuffled(ds: &LabeledDataset, seed: u64) -> Result<LabeledDataset, RunError> {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(ds.subset(&order)?)
}

fn take(ds: &LabeledDataset, start: usize, len: usize) -> Result<LabeledDataset, RunError> {
    let idx: Vec<usize> = (start..start + len).collect();
    Ok(ds.subset(&idx)?)
}

/// Shuffled cluster sample of exactly `total` points.
fn cluster_pool(cfg: &ExperimentConfig, total: usize) -> Result<LabeledDataset, RunError> {
    let per_class = total.div_ceil(cfg.n_classes);
    let ds = gaussian_clusters(
        per_class,
        cfg.n_classes,
        cfg.input_dim,
        cfg.cluster_separation,
        cfg.cluster_spread,
        sub_seed(cfg.seed, STREAM_DATA),
    )?;
    take(&shuffled(&ds, sub_seed(cfg.seed, STREAM_SHUFFLE))?, 0, total)
}

fn load_split(cfg: &ExperimentConfig) -> Result<Split, RunError> {
    let (n, m) = (cfg.n_train, cfg.n_test);
    let (train, test) = match cfg.dataset {
        DatasetKind::Disk => (
            disk_dataset(n, sub_seed(cfg.seed, STREAM_DATA))?,
            disk_dataset(m, sub_seed(cfg.seed, STREAM_TEST))?,
        ),
        DatasetKind::Clusters => {
            let pool = cluster_pool(cfg, n + m)?;
            (take(&pool, 0, n)?, take(&pool, n, m)?)
        }
        DatasetKind::Csv | DatasetKind::Idx => {
            let path = cfg
                .data_path
                .as_deref()
                .ok_or_else(|| RunError::Config("missing 'data_path'".into()))?;
            let ds = if cfg.dataset == DatasetKind::Csv {
                let labels = if cfg.loss == tangent_align::tangent::Loss::Bce {
                    LabelKind::Binary
                } else {
                    LabelKind::Classes(cfg.n_classes)
                };
                load_csv(
                    path,
                    CsvSchema {
                        has_header: cfg.csv_header,
                        labels,
                    },
                )?
            } else {
                let labels = cfg
                    .label_path
                    .as_deref()
                    .ok_or_else(|| RunError::Config("missing 'label_path'".into()))?;
                load_idx(path, labels)?
            };
            if ds.len() < n + m {
                return Err(RunError::Config(format!(
                    "'n_train' + 'n_test' = {} exceeds the {} rows in {}",
                    n + m,
                    ds.len(),
                    path.display()
                )));
            }
            let ds = shuffled(&ds, sub_seed(cfg.seed, STREAM_SHUFFLE))?;
            (take(&ds, 0, n)?, take(&ds, n, m)?)
        }
    };
    let train = if cfg.corruption > 0.0 {
        corrupt_labels(&train, cfg.corruption, sub_seed(cfg.seed, STREAM_CORRUPT))?
    } else {
        train
    };
    Ok(Split { train, test })
}

fn build_arch(cfg: &ExperimentConfig, input: usize, output: usize) -> Result<MlpArch, RunError> {
    let mut widths = vec![input];
    widths.extend(std::iter::repeat_n(cfg.width, cfg.depth - 1));
    widths.push(output);
    Ok(MlpArch::new(widths, cfg.activation, cfg.bias)?)
}

fn eval_batch(ds: &LabeledDataset, size: usize) -> Result<EvalBatch, RunError> {
    let head = take(ds, 0, size.min(ds.len()))?;
    Ok(EvalBatch {
        x: head.inputs().clone(),
        targets: head.targets(),
    })
}

struct Trained {
    params: MlpParams,
    trace: TrainingTrace,
    final_loss: f64,
}

type Hook<'a> = dyn FnMut(usize, &MlpParams) -> Result<(), RunError> + 'a;

/// Minibatch training with per-epoch reshuffling. Checkpoint metrics use
/// fixed probe batches (the first `probe_size` train and test points);
/// `hook` sees the parameters before every step and after the last one.
fn train_mlp(
    cfg: &ExperimentConfig,
    data: &Split,
    checkpoint_steps: &[usize],
    hook: &mut Hook<'_>,
) -> Result<Trained, RunError> {
    let train = &data.train;
    let arch = build_arch(cfg, train.input_dim(), train.labels().n_outputs())?;
    let mut params = mlp_init(&arch, sub_seed(cfg.seed, STREAM_INIT));
    let probe_train = eval_batch(train, cfg.probe_size)?;
    let probe_test = eval_batch(&data.test, cfg.probe_size)?;
    let opts = StepOptions {
        loss: cfg.loss,
        reduction: Reduction::Mean,
        lr: cfg.lr,
        momentum: cfg.momentum,
    };
    let metric_opts = CheckpointOptions {
        uncentered: cfg.uncentered,
    };
    let n = train.len();
    let batch = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_MINIBATCH));
    let mut cursor = n;
    let mut velocity = DVector::zeros(params.num_params());
    let mut trace = TrainingTrace::new();
    let mut final_loss = f64::NAN;
    for step in 0..=cfg.steps {
        if checkpoint_steps.binary_search(&step).is_ok() {
            let record = checkpoint_metrics(step, &params, &probe_train, Some(&probe_test), metric_opts)?;
            trace.push_checkpoint(record)?;
        }
        hook(step, &params)?;
        if step == cfg.steps {
            break;
        }
        if cursor + batch > n {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let mb = train.subset(&order[cursor..cursor + batch])?;
        cursor += batch;
        let feature_norm = tangent_feature_norm(&params, &probe_train.x)?;
        let out = gd_step(&params, mb.inputs(), &mb.targets(), &opts, &velocity)?;
        if !(out.loss <= DIVERGENCE_LOSS) {
            return Err(RunError::Divergence(format!("loss {} at step {step}", out.loss)));
        }
        let update = match cfg.complexity_update {
            ComplexityUpdate::Realized => out.delta.norm(),
            ComplexityUpdate::Gradient => cfg.lr * out.gradient.norm(),
        };
        trace.record(step, update, feature_norm)?;
        params = out.params;
        velocity = out.velocity;
        final_loss = out.loss;
    }
    if cfg.steps == 0 {
        let scores = forward(&params, train.inputs())?;
        final_loss = tangent_align::tangent::loss_and_grad(cfg.loss, &scores, &train.targets(), Reduction::Mean)?.0;
    }
    Ok(Trained {
        params,
        trace,
        final_loss,
    })
}

fn trace_table(trace: &TrainingTrace) -> Table {
    let mut t = Table::with_columns("trace.csv", &["step", "update_norm", "feat_fro_norm"]);
    for s in trace.steps() {
        t.push_values(&[s.step as f64, s.update_norm, s.feature_norm]);
    }
    t
}

fn checkpoint_table(trace: &TrainingTrace, n_layers: usize, uncentered: bool) -> Table {
    let mut header: Vec<String> = [
        "step",
        "cka_train",
        "cka_test",
        "erank",
        "t40",
        "t80",
        "t160",
        "acc_train",
        "acc_test",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..n_layers).map(|l| format!("cka_layer_{l}")));
    if uncentered {
        header.push("uncentered_train".into());
    }
    let mut t = Table::new("checkpoints.csv", header);
    for c in trace.checkpoints() {
        let mut row = vec![Some(c.step as f64), Some(c.cka_train), c.cka_test, Some(c.erank)];
        row.extend(c.trace_ratios.iter().map(|&(_, r)| Some(r)));
        row.extend([Some(c.acc_train), c.acc_test]);
        row.extend(c.layer_cka.iter().map(|&v| Some(v)));
        if uncentered {
            row.push(c.uncentered_train);
        }
        t.push(row);
    }
    t
}

fn emit_training(cfg: &ExperimentConfig, sink: &mut Sink, trained: &Trained) -> Result<(), RunError> {
    sink.emit(trace_table(&trained.trace))?;
    if !trained.trace.checkpoints().is_empty() {
        let layers = trained.params.arch().num_layers();
        sink.emit(checkpoint_table(&trained.trace, layers, cfg.uncentered))?;
        let ks = tangent_align::trajectory::scaled_trace_ks(
            cfg.probe_size.min(cfg.n_train) * trained.params.arch().output_dim(),
        );
        sink.note(
            "trace_ks",
            ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","),
        );
    }
    sink.note("complexity", trained.trace.complexity());
    sink.note("final_loss", trained.final_loss);
    Ok(())
}

fn spectrum_table(step: usize, s: &Spectrum) -> Table {
    let mut t = Table::with_columns(format!("spectrum_{step}.csv"), &["index", "eigenvalue"]);
    for (i, &v) in s.values().iter().enumerate() {
        t.push_values(&[i as f64, v]);
    }
    t
}

/// Grid coordinates followed by the first `k` eigenvectors, each flipped so
/// its largest-magnitude entry is positive.
fn eigenfunction_table(step: usize, grid: &DMatrix<f64>, vectors: &DMatrix<f64>, k: usize) -> Table {
    let coords = ["x", "y", "z"];
    let mut header: Vec<String> = (0..grid.ncols())
        .map(|c| coords.get(c).map_or(format!("x{c}"), |s| s.to_string()))
        .collect();
    header.extend((0..k).map(|j| format!("component_{j}")));
    let mut t = Table::new(format!("eigenfunctions_{step}.csv"), header);
    let signs: Vec<f64> = (0..k)
        .map(|j| {
            let col = vectors.column(j);
            if col[col.iamax()] < 0.0 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    for i in 0..grid.nrows() {
        let mut row: Vec<f64> = grid.row(i).iter().copied().collect();
        row.extend((0..k).map(|j| signs[j] * vectors[(i, j)]));
        t.push_values(&row);
    }
    t
}

/// `λ_j / λ_1` with 1-based `j`, if the spectrum is long enough.
fn ratio_to_top(s: &Spectrum, j: usize) -> Option<f64> {
    let v = s.values();
    (v.len() >= j && v[0] > 0.0).then(|| v[j - 1] / v[0])
}

fn disk_alignment(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let data = load_split(cfg)?;
    if data.train.input_dim() != 2 {
        return Err(RunError::Config(format!(
            "disk_alignment needs 2-dimensional inputs, dataset has {}",
            data.train.input_dim()
        )));
    }
    let grid = grid_2d(cfg.grid_side, -1.0, 1.0)?;
    let grid_labels = if cfg.dataset == DatasetKind::Disk {
        let y = DMatrix::from_fn(grid.nrows(), 1, |i, _| disk_label(grid[(i, 0)], grid[(i, 1)]));
        Some(label_kernel(&y)?)
    } else {
        None
    };
    let checkpoints = cfg.checkpoints.resolve(cfg.steps);
    let eigen_steps = cfg.eigen_steps.resolve(cfg.steps);
    let mut grid_table = Table::with_columns("grid.csv", &["step", "lambda_1", "ratio_20_1", "erank", "cka_labels"]);
    let mut emitted_k = 0;
    let mut hook = |step: usize, params: &MlpParams| -> Result<(), RunError> {
        if eigen_steps.binary_search(&step).is_err() {
            return Ok(());
        }
        let k = tangent_kernel_direct(params, &grid)?;
        let spectrum = if cfg.top_k > 0 {
            let eig = k.eigen()?;
            emitted_k = cfg.top_k.min(eig.spectrum.numerical_rank());
            sink.emit(eigenfunction_table(step, &grid, &eig.vectors, emitted_k))?;
            eig.spectrum
        } else {
            k.spectrum().clone()
        };
        let align = grid_labels.as_ref().map(|l| cka(&k, l)).transpose()?;
        grid_table.push(vec![
            Some(step as f64),
            Some(spectrum.max()),
            ratio_to_top(&spectrum, 20),
            Some(effective_rank(&spectrum)?),
            align,
        ]);
        sink.emit(spectrum_table(step, &spectrum))
    };
    let trained = train_mlp(cfg, &data, &checkpoints, &mut hook)?;
    sink.emit(grid_table)?;
    sink.note("eigenfunctions_k", emitted_k);
    emit_training(cfg, sink, &trained)
}

fn fourier_1d(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let x = grid_1d(cfg.grid_points, 0.0, 1.0)?;
    let arch = build_arch(cfg, 1, 1)?;
    let params = mlp_init(&arch, sub_seed(cfg.seed, STREAM_INIT));
    let eig = tangent_kernel_direct(&params, &x)?.eigen()?;
    let k = cfg.top_k.min(x.nrows());
    sink.emit(spectrum_table(0, &eig.spectrum))?;
    sink.emit(eigenfunction_table(0, &x, &eig.vectors, k))?;
    let n_freq = x.nrows() / 2 + 1;
    let mut header: Vec<String> = ["component", "eigenvalue", "dominant_frequency"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..n_freq).map(|f| format!("mag_{f}")));
    let mut dft = Table::new("dft_0.csv", header);
    let mut dominant = Vec::with_capacity(k);
    for j in 0..k {
        let v: Vec<f64> = eig.vectors.column(j).iter().copied().collect();
        let freq = dominant_frequency(&v)?;
        dominant.push(freq);
        let mut row = vec![j as f64, eig.spectrum.values()[j], freq as f64];
        row.extend(dft_magnitudes(&v)?);
        dft.push_values(&row);
    }
    sink.emit(dft)?;
    sink.note("eigenfunctions_k", k);
    if let Some(r) = ratio_to_top(&eig.spectrum, 10) {
        sink.note("ratio_10_1", r);
    }
    sink.note(
        "dominant_frequencies",
        dominant.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(","),
    );
    Ok(())
}

fn noisy_regression(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let s = noisy_feature_regression_setup(cfg.noise_dim, cfg.n_train, cfg.noise_var, cfg.seed)?;
    let lr = cfg.lr / cfg.n_train as f64;
    let w0 = DVector::zeros(cfg.noise_dim + 1);
    let gd = gd_train_linear(&s.features, &s.y, &w0, lr, cfg.steps)?;
    let mut curves = Table::with_columns(
        "curves.csv",
        &[
            "step",
            "gd_val_mse",
            "supernat_val_mse",
            "gd_val_mse_noisy",
            "supernat_val_mse_noisy",
            "gd_train_mse",
            "supernat_train_mse",
        ],
    );
    let phi = s.features.matrix();
    let mut state = SuperNatState::new(s.features.clone(), w0)?.with_normalization(cfg.supernat_norm);
    let mut last = (0.0, 0.0);
    for step in 0..=cfg.steps {
        let (wg, ws) = (&gd.weights[step], state.original_weights());
        let row = [
            mean_squared_error(&s.validation_features, wg, &s.validation_signal)?,
            mean_squared_error(&s.validation_features, ws, &s.validation_signal)?,
            mean_squared_error(&s.validation_features, wg, &s.validation_y)?,
            mean_squared_error(&s.validation_features, ws, &s.validation_y)?,
            mean_squared_error(phi, wg, &s.y)?,
            mean_squared_error(phi, ws, &s.y)?,
        ];
        if row.iter().any(|v| !(v.abs() <= DIVERGENCE_LOSS)) {
            return Err(RunError::Divergence(format!("validation error {row:?} at step {step}")));
        }
        last = (row[0], row[1]);
        let mut values = vec![step as f64];
        values.extend(row);
        curves.push_values(&values);
        if step < cfg.steps {
            state = supernat_step(&state, &s.y, lr)?;
        }
    }
    sink.emit(curves)?;
    sink.emit(trace_table(&gd.trace))?;
    sink.note("gd_final_val_mse", last.0);
    sink.note("supernat_final_val_mse", last.1);
    sink.note("supernat_better", last.1 < last.0);
    Ok(())
}

fn rbf_anisotropy(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let mut table = Table::with_columns("rbf.csv", &["scale", "l2_bound", "optimized_bound", "erank"]);
    let mut original = None;
    for &c in &cfg.rbf_scales {
        let setup = rbf_anisotropy_setup(cfg.rbf_points, cfg.rbf_features, cfg.rbf_extent, c, cfg.seed)?;
        let f = &setup.features;
        let n = cfg.rbf_points as f64;
        let uniform = DVector::from_element(f.rank(), 1.0);
        let l2 = optimal_norm_objective(f, &setup.labels, &uniform)? / n;
        let nu = optimal_norm_nu(f, &setup.labels)?;
        let optimized = optimal_norm_objective(f, &setup.labels, &nu.nu)? / n;
        let erank = effective_rank(&Spectrum::new(f.eigenvalues().iter().copied().collect()))?;
        table.push_values(&[c, l2, optimized, erank]);
        original.get_or_insert(setup.original_eigenvalues);
    }
    sink.emit(table)?;
    if let Some(l) = original {
        let mut t = Table::with_columns("rbf_spectrum.csv", &["index", "eigenvalue"]);
        for (i, &v) in l.iter().enumerate() {
            t.push_values(&[i as f64, v]);
        }
        sink.emit(t)?;
    }
    Ok(())
}

fn permute_labels(ds: &LabeledDataset, seed: u64) -> Result<LabeledDataset, RunError> {
    let mut perm: Vec<usize> = (0..ds.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let labels = match ds.labels() {
        Labels::Binary(v) => Labels::Binary(perm.iter().map(|&i| v[i]).collect()),
        Labels::Classes { indices, n_classes } => Labels::Classes {
            indices: perm.iter().map(|&i| indices[i]).collect(),
            n_classes: *n_classes,
        },
    };
    Ok(LabeledDataset::new(ds.inputs().clone(), labels, ds.meta().clone())?)
}

fn split_alignment_run(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let (ne, nd, nt) = (cfg.n_train, cfg.n_difficult, cfg.n_test);
    let pool = cluster_pool(cfg, ne + nd + nt)?;
    let easy = take(&pool, 0, ne)?;
    let difficult = permute_labels(&take(&pool, ne, nd)?, sub_seed(cfg.seed, STREAM_PERMUTE))?;
    let mixed = easy_difficult_mix(&easy, &difficult)?.shuffled(sub_seed(cfg.seed, STREAM_MIX))?;
    let data = Split {
        train: mixed.dataset,
        test: take(&pool, ne + nd, nt)?,
    };
    let m = cfg.probe_size.min(ne).min(nd);
    let easy_eval = eval_batch(&easy, m)?;
    let difficult_eval = eval_batch(&difficult, m)?;
    let checkpoints = cfg.checkpoints.resolve(cfg.steps);
    let mut split = Table::with_columns("split.csv", &["step", "cka_easy", "cka_difficult", "ratio"]);
    let mut hook = |step: usize, params: &MlpParams| -> Result<(), RunError> {
        if checkpoints.binary_search(&step).is_ok() {
            let s = split_alignment(params, &easy_eval, &difficult_eval)?;
            split.push_values(&[step as f64, s.cka_easy, s.cka_difficult, s.ratio]);
        }
        Ok(())
    };
    let trained = train_mlp(cfg, &data, &checkpoints, &mut hook)?;
    sink.emit(split)?;
    emit_training(cfg, sink, &trained)
}

fn complexity_sweep(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let clean = ExperimentConfig {
        corruption: 0.0,
        ..cfg.clone()
    };
    let base = load_split(&clean)?;
    let mut table = Table::with_columns(
        "complexity.csv",
        &["corruption", "complexity", "final_loss", "acc_train", "acc_test"],
    );
    for &level in &cfg.corruption_levels {
        let data = Split {
            train: corrupt_labels(&base.train, level, sub_seed(cfg.seed, STREAM_CORRUPT))?,
            test: base.test.clone(),
        };
        let trained = train_mlp(cfg, &data, &[], &mut |_, _| Ok(()))?;
        let acc_train = accuracy(&forward(&trained.params, data.train.inputs())?, &data.train.targets())?;
        let acc_test = accuracy(&forward(&trained.params, data.test.inputs())?, &data.test.targets())?;
        table.push_values(&[
            level,
            trained.trace.complexity(),
            trained.final_loss,
            acc_train,
            acc_test,
        ]);
    }
    sink.emit(table)
}

fn perturbation(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let data = load_split(cfg)?;
    let trained = train_mlp(cfg, &data, &[], &mut |_, _| Ok(()))?;
    let params = &trained.params;
    let x = eval_batch(&data.train, cfg.probe_size)?.x;
    let c = params.arch().output_dim();
    let kernel: KernelMatrix = tangent_kernel_direct(params, &x)?;
    let eig = kernel.eigen()?;
    let rank = eig.spectrum.numerical_rank();
    // Right singular vectors v_j = Φᵀ u_j / s_j through one backward pass each.
    let mut right = Vec::with_capacity(rank);
    for j in 0..rank {
        let s = eig.spectrum.values()[j].sqrt();
        let u = eig.vectors.column(j);
        let grad = DMatrix::from_fn(x.nrows(), c, |i, y| u[i * c + y]);
        let v = pullback(params, &x, &grad)? / s;
        right.push((s, &v / v.norm()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_DIRECTIONS));
    let k = cfg.n_directions.min(rank);
    let mut directions: Vec<DVector<f64>> = right[..k].iter().map(|(_, v)| v.clone()).collect();
    let mut first_order: Vec<f64> = right[..k].iter().map(|(s, _)| cfg.perturbation * s).collect();
    for _ in 0..cfg.n_directions {
        let r: DVector<f64> = DVector::from_fn(params.num_params(), |_, _| StandardNormal.sample(&mut rng));
        let r = &r / r.norm();
        // ‖Φ r‖² = Σ_j s_j² (v_jᵀ r)²
        let proj: f64 = right.iter().map(|(s, v)| (s * v.dot(&r)).powi(2)).sum();
        first_order.push(cfg.perturbation * proj.sqrt());
        directions.push(r);
    }
    let response = tangent_align::tangent::perturbation_response(params, &x, &directions, cfg.perturbation)?;
    let mut table = Table::with_columns(
        "response.csv",
        &["index", "singular", "singular_value", "response", "first_order"],
    );
    for (i, (&resp, &fo)) in response.iter().zip(&first_order).enumerate() {
        let singular = i < k;
        table.push(vec![
            Some(i as f64),
            Some(if singular { 1.0 } else { 0.0 }),
            singular.then(|| right[i].0),
            Some(resp),
            Some(fo),
        ]);
    }
    sink.emit(table)?;
    emit_training(cfg, sink, &trained)
}
