//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every key has a default
//! that depends on `kind`, so `kind` is applied before any other key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tangent_align::linear::NuNormalization;
use tangent_align::tangent::{Activation, Loss};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    DiskAlignment,
    Fourier1d,
    NoisyRegressionSupernat,
    RbfAnisotropy,
    SplitAlignment,
    ComplexitySweep,
    PerturbationResponse,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::DiskAlignment,
        ExperimentKind::Fourier1d,
        ExperimentKind::NoisyRegressionSupernat,
        ExperimentKind::RbfAnisotropy,
        ExperimentKind::SplitAlignment,
        ExperimentKind::ComplexitySweep,
        ExperimentKind::PerturbationResponse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DiskAlignment => "disk_alignment",
            ExperimentKind::Fourier1d => "fourier_1d",
            ExperimentKind::NoisyRegressionSupernat => "noisy_regression_supernat",
            ExperimentKind::RbfAnisotropy => "rbf_anisotropy",
            ExperimentKind::SplitAlignment => "split_alignment",
            ExperimentKind::ComplexitySweep => "complexity_sweep",
            ExperimentKind::PerturbationResponse => "perturbation_response",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            format!("unknown experiment kind '{s}' (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Disk,
    Clusters,
    Csv,
    Idx,
}

impl DatasetKind {
    fn name(self) -> &'static str {
        match self {
            DatasetKind::Disk => "disk",
            DatasetKind::Clusters => "clusters",
            DatasetKind::Csv => "csv",
            DatasetKind::Idx => "idx",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "disk" => Ok(DatasetKind::Disk),
            "clusters" => Ok(DatasetKind::Clusters),
            "csv" => Ok(DatasetKind::Csv),
            "idx" => Ok(DatasetKind::Idx),
            _ => Err(format!("unknown dataset '{s}' (expected disk, clusters, csv or idx)")),
        }
    }
}

/// Steps at which checkpoint metrics are computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    /// 0, 1, 2, 5, 10, 20, 50, … and the last step.
    Log,
    /// Every `n` steps and the last step.
    Every(usize),
    /// First and last step only.
    Ends,
    /// Explicit steps; those beyond the last step are ignored.
    Steps(Vec<usize>),
}

impl Schedule {
    pub fn resolve(&self, last: usize) -> Vec<usize> {
        let mut steps = match self {
            Schedule::Log => tangent_align::trajectory::log_schedule(last),
            Schedule::Every(n) => (0..=last).step_by(*n).chain([last]).collect(),
            Schedule::Ends => vec![0, last],
            Schedule::Steps(s) => s.iter().copied().filter(|&t| t <= last).collect(),
        };
        steps.sort_unstable();
        steps.dedup();
        steps
    }
}

impl FromStr for Schedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "log" => Ok(Schedule::Log),
            "ends" => Ok(Schedule::Ends),
            _ => {
                if let Some(n) = s.strip_prefix("every:") {
                    let n: usize = n.trim().parse().map_err(|_| format!("bad interval in '{s}'"))?;
                    if n == 0 {
                        return Err("interval must be >= 1".into());
                    }
                    return Ok(Schedule::Every(n));
                }
                parse_list(s)
                    .map(Schedule::Steps)
                    .map_err(|_| format!("expected 'log', 'ends', 'every:N' or a comma-separated step list, got '{s}'"))
            }
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Log => f.write_str("log"),
            Schedule::Ends => f.write_str("ends"),
            Schedule::Every(n) => write!(f, "every:{n}"),
            Schedule::Steps(s) => f.write_str(&join(s)),
        }
    }
}

/// What enters the complexity sum as `δw_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplexityUpdate {
    /// Realized parameter change, momentum included.
    Realized,
    /// Plain gradient step `-η ∇L`.
    Gradient,
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    let items: Result<Vec<T>, _> = s.split(',').map(|p| p.trim().parse::<T>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("expected a comma-separated list, got '{s}'")),
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub replicas: usize,
    pub threads: usize,

    pub activation: Activation,
    pub width: usize,
    pub depth: usize,
    pub bias: bool,

    pub loss: Loss,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub steps: usize,

    pub dataset: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    pub n_difficult: usize,
    pub corruption: f64,
    pub n_classes: usize,
    pub input_dim: usize,
    pub cluster_separation: f64,
    pub cluster_spread: f64,
    pub data_path: Option<PathBuf>,
    pub label_path: Option<PathBuf>,
    pub csv_header: bool,

    pub probe_size: usize,
    pub checkpoints: Schedule,
    pub eigen_steps: Schedule,
    pub grid_side: usize,
    pub grid_points: usize,
    pub top_k: usize,
    pub uncentered: bool,
    pub complexity_update: ComplexityUpdate,

    pub noise_dim: usize,
    pub noise_var: f64,
    pub supernat_norm: NuNormalization,

    pub rbf_points: usize,
    pub rbf_features: usize,
    pub rbf_extent: f64,
    pub rbf_scales: Vec<f64>,

    pub corruption_levels: Vec<f64>,
    pub n_directions: usize,
    pub perturbation: f64,
}

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "kind",
    "seed",
    "out_dir",
    "replicas",
    "threads",
    "activation",
    "width",
    "depth",
    "bias",
    "loss",
    "learning_rate",
    "momentum",
    "batch_size",
    "steps",
    "dataset",
    "n_train",
    "n_test",
    "n_difficult",
    "corruption",
    "n_classes",
    "input_dim",
    "cluster_separation",
    "cluster_spread",
    "data_path",
    "label_path",
    "csv_header",
    "probe_size",
    "checkpoints",
    "eigen_steps",
    "grid_side",
    "grid_points",
    "top_k",
    "uncentered",
    "complexity_update",
    "noise_dim",
    "noise_var",
    "supernat_norm",
    "rbf_points",
    "rbf_features",
    "rbf_extent",
    "rbf_scales",
    "corruption_levels",
    "n_directions",
    "perturbation",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_kind(ExperimentKind::DiskAlignment)
    }
}

impl ExperimentConfig {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            kind,
            seed: 0,
            out_dir: PathBuf::from(format!("runs/{}", kind.name())),
            replicas: 1,
            threads: 1,
            activation: Activation::Relu,
            width: 64,
            depth: 4,
            bias: true,
            loss: Loss::CrossEntropy,
            lr: 0.05,
            momentum: 0.9,
            batch_size: 100,
            steps: 1000,
            dataset: DatasetKind::Clusters,
            n_train: 500,
            n_test: 500,
            n_difficult: 100,
            corruption: 0.0,
            n_classes: 2,
            input_dim: 10,
            cluster_separation: 3.0,
            cluster_spread: 1.0,
            data_path: None,
            label_path: None,
            csv_header: false,
            probe_size: 100,
            checkpoints: Schedule::Log,
            eigen_steps: Schedule::Ends,
            grid_side: 50,
            grid_points: 50,
            top_k: 20,
            uncentered: false,
            complexity_update: ComplexityUpdate::Realized,
            noise_dim: 10,
            noise_var: 0.1,
            supernat_norm: NuNormalization::TopMode,
            rbf_points: 100,
            rbf_features: 200,
            rbf_extent: 5.0,
            rbf_scales: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            corruption_levels: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            n_directions: 10,
            perturbation: 1e-3,
        };
        match kind {
            ExperimentKind::DiskAlignment => {
                c.width = 256;
                c.depth = 6;
                c.loss = Loss::Bce;
                c.dataset = DatasetKind::Disk;
                c.steps = 2000;
                c.lr = 0.1;
            }
            ExperimentKind::Fourier1d => {
                c.activation = Activation::Tanh;
                c.width = 256;
                c.depth = 6;
                c.steps = 0;
                c.top_k = 21;
            }
            ExperimentKind::NoisyRegressionSupernat => {
                c.n_train = 50;
                c.steps = 2000;
                c.momentum = 0.0;
            }
            ExperimentKind::RbfAnisotropy => {
                c.steps = 0;
            }
            ExperimentKind::SplitAlignment => {
                c.n_train = 1000;
                c.n_difficult = 100;
            }
            ExperimentKind::ComplexitySweep => {
                c.n_train = 200;
                c.n_test = 200;
                c.steps = 500;
            }
            ExperimentKind::PerturbationResponse => {
                c.loss = Loss::Bce;
                c.dataset = DatasetKind::Disk;
                c.steps = 500;
            }
        }
        c
    }

    /// Current value of `key` as config text.
    pub fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        Some(match key {
            "kind" => self.kind.name().into(),
            "seed" => self.seed.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            "replicas" => self.replicas.to_string(),
            "threads" => self.threads.to_string(),
            "activation" => match self.activation {
                Activation::Relu => "relu".into(),
                Activation::Tanh => "tanh".into(),
            },
            "width" => self.width.to_string(),
            "depth" => self.depth.to_string(),
            "bias" => self.bias.to_string(),
            "loss" => match self.loss {
                Loss::Mse => "mse".into(),
                Loss::CrossEntropy => "cross_entropy".into(),
                Loss::Bce => "bce".into(),
            },
            "learning_rate" => self.lr.to_string(),
            "momentum" => self.momentum.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "steps" => self.steps.to_string(),
            "dataset" => self.dataset.name().into(),
            "n_train" => self.n_train.to_string(),
            "n_test" => self.n_test.to_string(),
            "n_difficult" => self.n_difficult.to_string(),
            "corruption" => self.corruption.to_string(),
            "n_classes" => self.n_classes.to_string(),
            "input_dim" => self.input_dim.to_string(),
            "cluster_separation" => self.cluster_separation.to_string(),
            "cluster_spread" => self.cluster_spread.to_string(),
            "data_path" => path(&self.data_path),
            "label_path" => path(&self.label_path),
            "csv_header" => self.csv_header.to_string(),
            "probe_size" => self.probe_size.to_string(),
            "checkpoints" => self.checkpoints.to_string(),
            "eigen_steps" => self.eigen_steps.to_string(),
            "grid_side" => self.grid_side.to_string(),
            "grid_points" => self.grid_points.to_string(),
            "top_k" => self.top_k.to_string(),
            "uncentered" => self.uncentered.to_string(),
            "complexity_update" => match self.complexity_update {
                ComplexityUpdate::Realized => "realized".into(),
                ComplexityUpdate::Gradient => "gradient".into(),
            },
            "noise_dim" => self.noise_dim.to_string(),
            "noise_var" => self.noise_var.to_string(),
            "supernat_norm" => match self.supernat_norm {
                NuNormalization::TopMode => "top_mode".into(),
                NuNormalization::Frobenius => "frobenius".into(),
            },
            "rbf_points" => self.rbf_points.to_string(),
            "rbf_features" => self.rbf_features.to_string(),
            "rbf_extent" => self.rbf_extent.to_string(),
            "rbf_scales" => join(&self.rbf_scales),
            "corruption_levels" => join(&self.corruption_levels),
            "n_directions" => self.n_directions.to_string(),
            "perturbation" => self.perturbation.to_string(),
            _ => return None,
        })
    }

    /// `(key, value)` for every key in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        KEYS.iter()
            .map(|&k| (k, self.get(k).expect("every key has a value")))
            .collect()
    }

    /// Sets one key from its text form. Unknown keys are reported by the
    /// caller; this returns a value error message.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), String> {
        fn num<T: FromStr>(raw: &str) -> Result<T, String> {
            raw.parse().map_err(|_| format!("cannot parse '{raw}'"))
        }
        fn flag(raw: &str) -> Result<bool, String> {
            match raw {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(format!("expected true or false, got '{raw}'")),
            }
        }
        let path = |raw: &str| (!raw.is_empty()).then(|| PathBuf::from(raw));
        match key {
            "kind" => self.kind = raw.parse()?,
            "seed" => self.seed = num(raw)?,
            "out_dir" => self.out_dir = PathBuf::from(raw),
            "replicas" => self.replicas = num(raw)?,
            "threads" => self.threads = num(raw)?,
            "activation" => self.activation = raw.parse().map_err(|e| format!("{e}"))?,
            "width" => self.width = num(raw)?,
            "depth" => self.depth = num(raw)?,
            "bias" => self.bias = flag(raw)?,
            "loss" => self.loss = raw.parse().map_err(|e| format!("{e}"))?,
            "learning_rate" => self.lr = num(raw)?,
            "momentum" => self.momentum = num(raw)?,
            "batch_size" => self.batch_size = num(raw)?,
            "steps" => self.steps = num(raw)?,
            "dataset" => self.dataset = raw.parse()?,
            "n_train" => self.n_train = num(raw)?,
            "n_test" => self.n_test = num(raw)?,
            "n_difficult" => self.n_difficult = num(raw)?,
            "corruption" => self.corruption = num(raw)?,
            "n_classes" => self.n_classes = num(raw)?,
            "input_dim" => self.input_dim = num(raw)?,
            "cluster_separation" => self.cluster_separation = num(raw)?,
            "cluster_spread" => self.cluster_spread = num(raw)?,
            "data_path" => self.data_path = path(raw),
            "label_path" => self.label_path = path(raw),
            "csv_header" => self.csv_header = flag(raw)?,
            "probe_size" => self.probe_size = num(raw)?,
            "checkpoints" => self.checkpoints = raw.parse()?,
            "eigen_steps" => self.eigen_steps = raw.parse()?,
            "grid_side" => self.grid_side = num(raw)?,
            "grid_points" => self.grid_points = num(raw)?,
            "top_k" => self.top_k = num(raw)?,
            "uncentered" => self.uncentered = flag(raw)?,
            "complexity_update" => {
                self.complexity_update = match raw {
                    "realized" => ComplexityUpdate::Realized,
                    "gradient" => ComplexityUpdate::Gradient,
                    _ => return Err(format!("expected realized or gradient, got '{raw}'")),
                }
            }
            "noise_dim" => self.noise_dim = num(raw)?,
            "noise_var" => self.noise_var = num(raw)?,
            "supernat_norm" => {
                self.supernat_norm = match raw {
                    "top_mode" => NuNormalization::TopMode,
                    "frobenius" => NuNormalization::Frobenius,
                    _ => return Err(format!("expected top_mode or frobenius, got '{raw}'")),
                }
            }
            "rbf_points" => self.rbf_points = num(raw)?,
            "rbf_features" => self.rbf_features = num(raw)?,
            "rbf_extent" => self.rbf_extent = num(raw)?,
            "rbf_scales" => self.rbf_scales = parse_list(raw)?,
            "corruption_levels" => self.corruption_levels = parse_list(raw)?,
            "n_directions" => self.n_directions = num(raw)?,
            "perturbation" => self.perturbation = num(raw)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Range and consistency checks. Each issue names the offending key.
    pub fn check(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut range = |key: &'static str, ok: bool, what: &str| {
            if !ok {
                issues.push(ConfigIssue::OutOfRange {
                    key: key.into(),
                    value: self.get(key).unwrap_or_default(),
                    expected: what.into(),
                });
            }
        };
        range("learning_rate", self.lr > 0.0 && self.lr.is_finite(), "> 0");
        range("momentum", (0.0..1.0).contains(&self.momentum), "in [0, 1)");
        range("replicas", self.replicas >= 1, ">= 1");
        range("threads", self.threads >= 1, ">= 1");
        range("width", self.width >= 1, ">= 1");
        range("depth", self.depth >= 1, ">= 1");
        range("batch_size", self.batch_size >= 1, ">= 1");
        range("n_train", self.n_train >= 2, ">= 2");
        range("n_test", self.n_test >= 2, ">= 2");
        range("n_difficult", self.n_difficult >= 2, ">= 2");
        range("corruption", (0.0..=1.0).contains(&self.corruption), "in [0, 1]");
        range("n_classes", self.n_classes >= 2, ">= 2");
        range("input_dim", self.input_dim >= 1, ">= 1");
        range("cluster_separation", self.cluster_separation >= 0.0, ">= 0");
        range("cluster_spread", self.cluster_spread >= 0.0, ">= 0");
        range("probe_size", self.probe_size >= 2, ">= 2");
        range("grid_side", self.grid_side >= 2, ">= 2");
        range("grid_points", self.grid_points >= 2, ">= 2");
        range("noise_dim", self.noise_dim >= 1, ">= 1");
        range("noise_var", self.noise_var >= 0.0 && self.noise_var.is_finite(), ">= 0");
        range("rbf_points", self.rbf_points >= 2, ">= 2");
        range("rbf_features", self.rbf_features >= 1, ">= 1");
        range("rbf_extent", self.rbf_extent > 0.0, "> 0");
        range(
            "rbf_scales",
            self.rbf_scales.iter().all(|c| (0.0..=1.0).contains(c)),
            "values in [0, 1]",
        );
        range(
            "corruption_levels",
            self.corruption_levels.iter().all(|c| (0.0..=1.0).contains(c)),
            "values in [0, 1]",
        );
        range("n_directions", self.n_directions >= 1, ">= 1");
        range(
            "perturbation",
            self.perturbation >= 0.0 && self.perturbation.is_finite(),
            ">= 0",
        );
        if matches!(self.dataset, DatasetKind::Csv | DatasetKind::Idx) && self.uses_dataset() {
            if self.data_path.is_none() {
                issues.push(ConfigIssue::Missing {
                    key: "data_path".into(),
                    reason: format!("required for dataset = {}", self.dataset.name()),
                });
            }
            if self.dataset == DatasetKind::Idx && self.label_path.is_none() {
                issues.push(ConfigIssue::Missing {
                    key: "label_path".into(),
                    reason: "required for dataset = idx".into(),
                });
            }
        }
        issues
    }

    fn uses_dataset(&self) -> bool {
        matches!(
            self.kind,
            ExperimentKind::DiskAlignment | ExperimentKind::ComplexitySweep | ExperimentKind::PerturbationResponse
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigIssue {
    Malformed {
        line: usize,
        text: String,
    },
    UnknownKey {
        line: usize,
        key: String,
        suggestion: Option<String>,
    },
    Duplicate {
        line: usize,
        key: String,
    },
    InvalidValue {
        line: usize,
        key: String,
        reason: String,
    },
    OutOfRange {
        key: String,
        value: String,
        expected: String,
    },
    Missing {
        key: String,
        reason: String,
    },
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigIssue::Malformed { line, text } => {
                write!(f, "line {line}: expected 'key = value', got '{text}'")
            }
            ConfigIssue::UnknownKey { line, key, suggestion } => {
                write!(f, "line {line}: unknown key '{key}'")?;
                if let Some(s) = suggestion {
                    write!(f, " (did you mean '{s}'?)")?;
                }
                Ok(())
            }
            ConfigIssue::Duplicate { line, key } => write!(f, "line {line}: duplicate key '{key}'"),
            ConfigIssue::InvalidValue { line, key, reason } => {
                write!(f, "line {line}: invalid value for '{key}': {reason}")
            }
            ConfigIssue::OutOfRange { key, value, expected } => {
                write!(f, "'{key}' = {value} is out of range (expected {expected})")
            }
            ConfigIssue::Missing { key, reason } => write!(f, "missing '{key}': {reason}"),
        }
    }
}

/// Closest known key within edit distance 3.
pub fn suggest_key(key: &str) -> Option<String> {
    KEYS.iter()
        .map(|k| (strsim::levenshtein(key, k), *k))
        .filter(|&(d, _)| d <= 3)
        .min()
        .map(|(_, k)| k.to_string())
}

#[derive(Debug)]
pub struct ParsedConfig {
    pub config: ExperimentConfig,
    pub issues: Vec<ConfigIssue>,
}

impl ParsedConfig {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Parses config text, collecting every problem instead of stopping at
/// the first.
pub fn parse_config(text: &str) -> ParsedConfig {
    let mut issues = Vec::new();
    let mut pairs: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut order = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            issues.push(ConfigIssue::Malformed {
                line,
                text: content.into(),
            });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            issues.push(ConfigIssue::Malformed {
                line,
                text: content.into(),
            });
            continue;
        }
        if !KEYS.contains(&key) {
            issues.push(ConfigIssue::UnknownKey {
                line,
                key: key.into(),
                suggestion: suggest_key(key),
            });
            continue;
        }
        if pairs.insert(key.into(), (line, value.into())).is_some() {
            issues.push(ConfigIssue::Duplicate { line, key: key.into() });
            continue;
        }
        order.push(key.to_string());
    }

    let mut config = ExperimentConfig::default();
    if let Some((line, value)) = pairs.get("kind") {
        match value.parse() {
            Ok(kind) => config = ExperimentConfig::for_kind(kind),
            Err(reason) => issues.push(ConfigIssue::InvalidValue {
                line: *line,
                key: "kind".into(),
                reason,
            }),
        }
    }
    for key in order.iter().filter(|k| k.as_str() != "kind") {
        let (line, value) = &pairs[key];
        if let Err(reason) = config.set(key, value) {
            issues.push(ConfigIssue::InvalidValue {
                line: *line,
                key: key.clone(),
                reason,
            });
        }
    }
    if issues.is_empty() {
        issues.extend(config.check());
    }
    ParsedConfig { config, issues }
}

pub fn read_config(path: &Path) -> std::io::Result<ParsedConfig> {
    Ok(parse_config(&std::fs::read_to_string(path)?))
}

/// Config text that reproduces `config` exactly.
pub fn render_config(config: &ExperimentConfig) -> String {
    config
        .entries()
        .into_iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_for_every_kind() {
        for kind in ExperimentKind::ALL {
            let c = ExperimentConfig::for_kind(kind);
            assert!(c.check().is_empty(), "{kind:?}: {:?}", c.check());
            let parsed = parse_config(&render_config(&c));
            assert!(parsed.is_valid(), "{:?}", parsed.issues);
            assert_eq!(parsed.config, c);
        }
    }

    #[test]
    fn comments_and_whitespace() {
        let p = parse_config("# header\nkind = fourier_1d   # trailing\n\n  width=32\n");
        assert!(p.is_valid(), "{:?}", p.issues);
        assert_eq!(p.config.kind, ExperimentKind::Fourier1d);
        assert_eq!(p.config.width, 32);
        assert_eq!(p.config.activation, Activation::Tanh);
    }

    #[test]
    fn kind_defaults_apply_before_overrides() {
        let p = parse_config("width = 8\nkind = disk_alignment\n");
        assert_eq!(p.config.width, 8);
        assert_eq!(p.config.depth, 6);
    }

    #[test]
    fn rejects_problems_with_key_names() {
        let p = parse_config("learning_rte = 0.1\n");
        assert_eq!(
            p.issues,
            vec![ConfigIssue::UnknownKey {
                line: 1,
                key: "learning_rte".into(),
                suggestion: Some("learning_rate".into()),
            }]
        );
        assert!(parse_config("zzzzzzzzzzzz = 1\n").issues[0]
            .to_string()
            .ends_with("'zzzzzzzzzzzz'"));
        let p = parse_config("learning_rate = 0.1\nmomentun = 0.5\n");
        assert!(p.issues[0].to_string().contains("did you mean 'momentum'"));

        let p = parse_config("learning_rate = -0.1\n");
        assert_eq!(p.issues.len(), 1);
        assert!(p.issues[0].to_string().contains("'learning_rate'"));

        let p = parse_config("steps = many\n");
        assert!(p.issues[0].to_string().contains("'steps'"));
        assert!(!parse_config("learning_rate 0.1\n").is_valid());
        assert!(!parse_config("seed = 1\nseed = 2\n").is_valid());
    }

    #[test]
    fn missing_paths_reported() {
        let p = parse_config("dataset = idx\n");
        let keys: Vec<String> = p.issues.iter().map(|i| i.to_string()).collect();
        assert!(keys.iter().any(|k| k.contains("data_path")));
        assert!(keys.iter().any(|k| k.contains("label_path")));
    }

    #[test]
    fn schedules() {
        assert_eq!(Schedule::Every(3).resolve(7), vec![0, 3, 6, 7]);
        assert_eq!(Schedule::Ends.resolve(0), vec![0]);
        assert_eq!("5,1,99".parse::<Schedule>().unwrap().resolve(10), vec![1, 5]);
        assert!("every:0".parse::<Schedule>().is_err());
        assert_eq!("every:4".parse::<Schedule>().unwrap().to_string(), "every:4");
    }
}
