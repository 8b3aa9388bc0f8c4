//! Synthetic generators and local-file loaders.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tangent::Targets;

/// Radius of the disk covering half of `[-1, 1]²`.
pub const DISK_RADIUS: f64 = 0.797_884_560_802_865_4;

#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// `±1`
    Binary(Vec<f64>),
    /// Indices in `[0, n_classes)`.
    Classes { indices: Vec<usize>, n_classes: usize },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Binary(v) => v.len(),
            Labels::Classes { indices, .. } => indices.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Network output width: 1 for binary labels.
    pub fn n_outputs(&self) -> usize {
        match self {
            Labels::Binary(_) => 1,
            Labels::Classes { n_classes, .. } => *n_classes,
        }
    }

    pub fn to_targets(&self) -> Targets {
        match self {
            Labels::Binary(v) => Targets::Binary(v.clone()),
            Labels::Classes { indices, .. } => Targets::Classes(indices.clone()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Labels::Binary(v) => {
                if let Some(row) = v.iter().position(|&y| y != 1.0 && y != -1.0) {
                    return Err(Error::InvalidLabel {
                        row,
                        reason: format!("binary label must be ±1, got {}", v[row]),
                    });
                }
            }
            Labels::Classes { indices, n_classes } => {
                if let Some(row) = indices.iter().position(|&y| y >= *n_classes) {
                    return Err(Error::InvalidLabel {
                        row,
                        reason: format!("class {} >= {n_classes}", indices[row]),
                    });
                }
            }
        }
        Ok(())
    }

    fn select(&self, idx: &[usize]) -> Labels {
        match self {
            Labels::Binary(v) => Labels::Binary(idx.iter().map(|&i| v[i]).collect()),
            Labels::Classes { indices, n_classes } => Labels::Classes {
                indices: idx.iter().map(|&i| indices[i]).collect(),
                n_classes: *n_classes,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetMeta {
    pub generator: String,
    pub seed: Option<u64>,
    pub corruption: f64,
    /// Sorted indices whose labels were resampled.
    pub corrupted: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: DMatrix<f64>,
    labels: Labels,
    meta: DatasetMeta,
}

impl LabeledDataset {
    pub fn new(inputs: DMatrix<f64>, labels: Labels, meta: DatasetMeta) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset labels",
                expected: inputs.nrows().to_string(),
                got: labels.len().to_string(),
            });
        }
        if !(0.0..=1.0).contains(&meta.corruption) {
            return Err(Error::InvalidArgument(format!(
                "corruption fraction must lie in [0, 1], got {}",
                meta.corruption
            )));
        }
        labels.validate()?;
        Ok(Self { inputs, labels, meta })
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn targets(&self) -> Targets {
        self.labels.to_targets()
    }

    /// Rows `idx` in the given order; corruption bookkeeping is dropped.
    pub fn subset(&self, idx: &[usize]) -> Result<LabeledDataset> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!(
                "row index {bad} out of range for {} samples",
                self.len()
            )));
        }
        Ok(LabeledDataset {
            inputs: self.inputs.select_rows(idx),
            labels: self.labels.select(idx),
            meta: DatasetMeta {
                corrupted: Vec::new(),
                ..self.meta.clone()
            },
        })
    }
}

pub fn disk_label(x: f64, y: f64) -> f64 {
    if (x * x + y * y).sqrt() <= DISK_RADIUS {
        1.0
    } else {
        -1.0
    }
}

/// `x ~ Unif[-1, 1]²`, label `+1` inside the disk of radius `√(2/π)`.
pub fn disk_dataset(n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = DMatrix::zeros(n, 2);
    for i in 0..n {
        inputs[(i, 0)] = rng.random_range(-1.0..=1.0);
        inputs[(i, 1)] = rng.random_range(-1.0..=1.0);
    }
    let labels = (0..n).map(|i| disk_label(inputs[(i, 0)], inputs[(i, 1)])).collect();
    LabeledDataset::new(
        inputs,
        Labels::Binary(labels),
        DatasetMeta {
            generator: "disk".into(),
            seed: Some(seed),
            ..Default::default()
        },
    )
}

fn linspace(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

/// `n` equally spaced points from `lo` to `hi` inclusive, as an `n × 1`
/// input matrix.
pub fn grid_1d(n: usize, lo: f64, hi: f64) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("grid needs lo < hi, got [{lo}, {hi}]")));
    }
    Ok(DMatrix::from_vec(n, 1, linspace(n, lo, hi)))
}

/// `side × side` grid over `[lo, hi]²`, row-major in the first coordinate.
pub fn grid_2d(side: usize, lo: f64, hi: f64) -> Result<DMatrix<f64>> {
    let axis = grid_1d(side, lo, hi)?;
    Ok(DMatrix::from_fn(side * side, 2, |r, c| {
        if c == 0 {
            axis[r / side]
        } else {
            axis[r % side]
        }
    }))
}

/// Isotropic Gaussian blobs around random class centers at distance
/// `separation` from the origin.
pub fn gaussian_clusters(
    n_per_class: usize,
    n_classes: usize,
    dim: usize,
    separation: f64,
    spread: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n_classes < 2 || dim == 0 || n_per_class == 0 {
        return Err(Error::InvalidArgument(
            "clusters need >= 2 classes, dim >= 1 and >= 1 sample per class".into(),
        ));
    }
    if !(spread >= 0.0) {
        return Err(Error::InvalidArgument(format!("spread must be >= 0, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| unit.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x / norm * separation).collect()
        })
        .collect();
    let n = n_per_class * n_classes;
    let mut inputs = DMatrix::zeros(n, dim);
    let mut indices = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % n_classes;
        for k in 0..dim {
            inputs[(i, k)] = centers[y][k] + spread * unit.sample(&mut rng);
        }
        indices.push(y);
    }
    LabeledDataset::new(
        inputs,
        Labels::Classes { indices, n_classes },
        DatasetMeta {
            generator: "gaussian_clusters".into(),
            seed: Some(seed),
            ..Default::default()
        },
    )
}

/// Resamples the labels of exactly `⌊fraction · n⌋` uniformly chosen rows,
/// uniformly over all classes (the original label may be drawn again).
pub fn corrupt_labels(ds: &LabeledDataset, fraction: f64, seed: u64) -> Result<LabeledDataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "corruption fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let n = ds.len();
    let count = (fraction * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut chosen = order[..count].to_vec();
    chosen.sort_unstable();
    let mut labels = ds.labels.clone();
    match &mut labels {
        Labels::Binary(v) => {
            for &i in &chosen {
                v[i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
        }
        Labels::Classes { indices, n_classes } => {
            for &i in &chosen {
                indices[i] = rng.random_range(0..*n_classes);
            }
        }
    }
    LabeledDataset::new(
        ds.inputs.clone(),
        labels,
        DatasetMeta {
            corruption: fraction,
            corrupted: chosen,
            ..ds.meta.clone()
        },
    )
}

/// Concatenated easy and difficult examples with a membership mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDataset {
    pub dataset: LabeledDataset,
    /// `true` for rows that came from the difficult set.
    pub difficult: Vec<bool>,
}

impl MixedDataset {
    pub fn easy_indices(&self) -> Vec<usize> {
        (0..self.difficult.len()).filter(|&i| !self.difficult[i]).collect()
    }

    pub fn difficult_indices(&self) -> Vec<usize> {
        (0..self.difficult.len()).filter(|&i| self.difficult[i]).collect()
    }

    /// Permutes rows, keeping (input, label, mask) triples together.
    pub fn shuffled(&self, seed: u64) -> Result<MixedDataset> {
        let mut order: Vec<usize> = (0..self.difficult.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(MixedDataset {
            dataset: self.dataset.subset(&order)?,
            difficult: order.iter().map(|&i| self.difficult[i]).collect(),
        })
    }
}

pub fn easy_difficult_mix(easy: &LabeledDataset, difficult: &LabeledDataset) -> Result<MixedDataset> {
    if easy.input_dim() != difficult.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "mixed dataset input dimension",
            expected: easy.input_dim().to_string(),
            got: difficult.input_dim().to_string(),
        });
    }
    let labels = match (&easy.labels, &difficult.labels) {
        (Labels::Binary(a), Labels::Binary(b)) => Labels::Binary(a.iter().chain(b).copied().collect()),
        (
            Labels::Classes {
                indices: a,
                n_classes: ca,
            },
            Labels::Classes {
                indices: b,
                n_classes: cb,
            },
        ) if ca == cb => Labels::Classes {
            indices: a.iter().chain(b).copied().collect(),
            n_classes: *ca,
        },
        _ => {
            return Err(Error::DimensionMismatch {
                context: "mixed dataset class count",
                expected: easy.labels.n_outputs().to_string(),
                got: difficult.labels.n_outputs().to_string(),
            })
        }
    };
    let (ne, nd) = (easy.len(), difficult.len());
    let mut inputs = DMatrix::zeros(ne + nd, easy.input_dim());
    inputs.rows_mut(0, ne).copy_from(&easy.inputs);
    inputs.rows_mut(ne, nd).copy_from(&difficult.inputs);
    let dataset = LabeledDataset::new(
        inputs,
        labels,
        DatasetMeta {
            generator: format!("{}+{}", easy.meta.generator, difficult.meta.generator),
            ..Default::default()
        },
    )?;
    Ok(MixedDataset {
        dataset,
        difficult: std::iter::repeat_n(false, ne)
            .chain(std::iter::repeat_n(true, nd))
            .collect(),
    })
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_error(path, "truncated header"))
}

/// Reads an IDX image file (`0x00000803`) and its label file
/// (`0x00000801`). Pixels are scaled to `[0, 1]`; the class count is the
/// largest label plus one.
pub fn load_idx(images: &Path, labels: &Path) -> Result<LabeledDataset> {
    let img = read_file(images)?;
    let lab = read_file(labels)?;
    let magic = be_u32(&img, 0, images)?;
    if magic != IDX_IMAGES {
        return Err(format_error(
            images,
            format!("bad magic {magic:#010x}, expected {IDX_IMAGES:#010x}"),
        ));
    }
    let magic = be_u32(&lab, 0, labels)?;
    if magic != IDX_LABELS {
        return Err(format_error(
            labels,
            format!("bad magic {magic:#010x}, expected {IDX_LABELS:#010x}"),
        ));
    }
    let n = be_u32(&img, 4, images)? as usize;
    let rows = be_u32(&img, 8, images)? as usize;
    let cols = be_u32(&img, 12, images)? as usize;
    let n_labels = be_u32(&lab, 4, labels)? as usize;
    if n != n_labels {
        return Err(format_error(labels, format!("{n_labels} labels for {n} images")));
    }
    let pixels = rows * cols;
    let body = &img[16..];
    if body.len() != n * pixels {
        return Err(format_error(
            images,
            format!("expected {} pixel bytes, found {}", n * pixels, body.len()),
        ));
    }
    let lbody = &lab[8..];
    if lbody.len() != n {
        return Err(format_error(
            labels,
            format!("expected {n} label bytes, found {}", lbody.len()),
        ));
    }
    let inputs = DMatrix::from_fn(n, pixels, |i, p| body[i * pixels + p] as f64 / 255.0);
    let indices: Vec<usize> = lbody.iter().map(|&b| b as usize).collect();
    let n_classes = indices.iter().max().map_or(1, |m| m + 1);
    LabeledDataset::new(
        inputs,
        Labels::Classes { indices, n_classes },
        DatasetMeta {
            generator: "idx".into(),
            ..Default::default()
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    /// Last column holds `±1`.
    Binary,
    /// Last column holds class indices below the given count.
    Classes(usize),
}

/// Comma-separated numeric rows, label in the last column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvSchema {
    pub has_header: bool,
    pub labels: LabelKind,
}

pub fn load_csv(path: &Path, schema: CsvSchema) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: e.to_string(),
        })?;
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() < 2 {
            return Err(parse_err(line, "need at least one feature and a label".into()));
        }
        let mut row = Vec::with_capacity(record.len());
        for cell in record.iter() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric cell '{cell}'")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite cell '{cell}'")));
            }
            row.push(v);
        }
        raw_labels.push((line, row.pop().expect("len >= 2")));
        width.get_or_insert(row.len());
        values.extend(row);
    }
    let Some(d) = width else {
        return Err(format_error(path, "no data rows"));
    };
    let n = raw_labels.len();
    let labels = match schema.labels {
        LabelKind::Binary => Labels::Binary(
            raw_labels
                .iter()
                .map(|&(line, v)| {
                    if v == 1.0 || v == -1.0 {
                        Ok(v)
                    } else {
                        Err(parse_err(line, format!("binary label must be ±1, got {v}")))
                    }
                })
                .collect::<Result<_>>()?,
        ),
        LabelKind::Classes(c) => Labels::Classes {
            indices: raw_labels
                .iter()
                .map(|&(line, v)| {
                    if v >= 0.0 && v.fract() == 0.0 && (v as usize) < c {
                        Ok(v as usize)
                    } else {
                        Err(parse_err(
                            line,
                            format!("class label must be an integer in [0, {c}), got {v}"),
                        ))
                    }
                })
                .collect::<Result<_>>()?,
            n_classes: c,
        },
    };
    LabeledDataset::new(
        DMatrix::from_row_slice(n, d, &values),
        labels,
        DatasetMeta {
            generator: "csv".into(),
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn disk_labels() {
        assert_eq!(disk_label(0.0, 0.0), 1.0);
        assert_eq!(disk_label(1.0, 1.0), -1.0);
        assert!((DISK_RADIUS - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        let ds = disk_dataset(10_000, 1).unwrap();
        let Labels::Binary(y) = ds.labels() else { panic!() };
        let pos = y.iter().filter(|&&v| v > 0.0).count() as f64 / 1e4;
        assert!((pos - 0.5).abs() < 0.03, "positive fraction {pos}");
        for i in 0..ds.len() {
            let (a, b) = (ds.inputs()[(i, 0)], ds.inputs()[(i, 1)]);
            assert!(a.abs() <= 1.0 && b.abs() <= 1.0);
            assert_eq!(y[i], disk_label(a, b));
        }
    }

    #[test]
    fn grids() {
        assert_eq!(grid_1d(2, -1.0, 3.0).unwrap().as_slice(), &[-1.0, 3.0]);
        assert_eq!(grid_1d(3, 0.0, 1.0).unwrap().as_slice(), &[0.0, 0.5, 1.0]);
        let g = grid_1d(50, 0.0, 1.0).unwrap();
        let h = g[1] - g[0];
        for i in 1..50 {
            assert!((g[i] - g[i - 1] - h).abs() <= 1e-15);
        }
        assert!(grid_1d(1, 0.0, 1.0).is_err());
        let g2 = grid_2d(3, -1.0, 1.0).unwrap();
        assert_eq!(g2.nrows(), 9);
        assert_eq!((g2[(5, 0)], g2[(5, 1)]), (0.0, 1.0));
    }

    #[test]
    fn corruption() {
        let ds = gaussian_clusters(1000, 10, 5, 3.0, 1.0, 2).unwrap();
        assert_eq!(corrupt_labels(&ds, 0.0, 1).unwrap().labels(), ds.labels());

        let all = corrupt_labels(&ds, 1.0, 3).unwrap();
        assert_eq!(all.meta().corrupted.len(), 10_000);
        let (Labels::Classes { indices: a, .. }, Labels::Classes { indices: b, .. }) = (ds.labels(), all.labels())
        else {
            panic!()
        };
        let same = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / 1e4;
        // Binomial(10⁴, 0.1): 5 standard deviations is 0.015.
        assert!((same - 0.1).abs() < 0.015, "agreement {same}");

        let part = corrupt_labels(&ds, 0.37, 4).unwrap();
        assert_eq!(part.meta().corrupted.len(), 3700);
        let Labels::Classes { indices: c, .. } = part.labels() else {
            panic!()
        };
        for i in 0..10_000 {
            if part.meta().corrupted.binary_search(&i).is_err() {
                assert_eq!(a[i], c[i]);
            }
        }
        assert_eq!(corrupt_labels(&ds, 0.37, 4).unwrap(), part);
        assert!(corrupt_labels(&ds, 1.5, 4).is_err());
    }

    #[test]
    fn mixing_and_shuffling() {
        let easy = gaussian_clusters(5, 2, 3, 2.0, 0.1, 1).unwrap();
        let hard = gaussian_clusters(2, 2, 3, 2.0, 0.1, 2).unwrap();
        let mix = easy_difficult_mix(&easy, &hard).unwrap();
        assert_eq!(mix.dataset.len(), 14);
        let (e, d) = (mix.easy_indices(), mix.difficult_indices());
        assert_eq!(e.len() + d.len(), 14);
        assert!(e.iter().all(|i| !d.contains(i)));

        let sh = mix.shuffled(9).unwrap();
        let Labels::Classes { indices: orig, .. } = mix.dataset.labels() else {
            panic!()
        };
        let Labels::Classes { indices: new, .. } = sh.dataset.labels() else {
            panic!()
        };
        for r in 0..14 {
            let row = sh.dataset.inputs().row(r);
            let src = (0..14).find(|&k| mix.dataset.inputs().row(k) == row).unwrap();
            assert_eq!(new[r], orig[src]);
            assert_eq!(sh.difficult[r], mix.difficult[src]);
        }

        let other = gaussian_clusters(2, 2, 4, 2.0, 0.1, 2).unwrap();
        assert!(easy_difficult_mix(&easy, &other).is_err());
    }

    #[test]
    fn generators_are_seeded() {
        assert_eq!(disk_dataset(20, 5).unwrap(), disk_dataset(20, 5).unwrap());
        assert_ne!(disk_dataset(20, 5).unwrap(), disk_dataset(20, 6).unwrap());
    }

    fn idx_pair(dir: &Path, image_magic: u32, n_img: u32, n_lab: u32) -> (std::path::PathBuf, std::path::PathBuf) {
        let mut img = Vec::new();
        img.extend(image_magic.to_be_bytes());
        img.extend(n_img.to_be_bytes());
        img.extend(2u32.to_be_bytes());
        img.extend(2u32.to_be_bytes());
        img.extend([0u8, 255, 51, 102, 204, 0, 255, 255]);
        let mut lab = Vec::new();
        lab.extend(IDX_LABELS.to_be_bytes());
        lab.extend(n_lab.to_be_bytes());
        lab.extend((0..n_lab).map(|i| [3u8, 7][i as usize % 2]));
        let (pi, pl) = (dir.join("img.idx"), dir.join("lab.idx"));
        fs::write(&pi, img).unwrap();
        fs::write(&pl, lab).unwrap();
        (pi, pl)
    }

    #[test]
    fn idx_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let (pi, pl) = idx_pair(dir.path(), IDX_IMAGES, 2, 2);
        let ds = load_idx(&pi, &pl).unwrap();
        assert_eq!(ds.inputs().shape(), (2, 4));
        assert_eq!(
            ds.inputs().row(0).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 1.0, 0.2, 0.4]
        );
        assert_eq!(
            ds.inputs().row(1).iter().copied().collect::<Vec<_>>(),
            vec![0.8, 0.0, 1.0, 1.0]
        );
        assert_eq!(
            ds.labels(),
            &Labels::Classes {
                indices: vec![3, 7],
                n_classes: 8
            }
        );

        let (pi, pl) = idx_pair(dir.path(), 0x0000_0801, 2, 2);
        assert!(matches!(load_idx(&pi, &pl), Err(Error::Format { .. })));
        let (pi, pl) = idx_pair(dir.path(), IDX_IMAGES, 2, 3);
        assert!(matches!(load_idx(&pi, &pl), Err(Error::Format { .. })));
    }

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn csv_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let schema = CsvSchema {
            has_header: false,
            labels: LabelKind::Classes(3),
        };
        let p = write(dir.path(), "a.csv", "0.5,1.5,2\n-1,0,0\n3.25,2,1\n");
        let ds = load_csv(&p, schema).unwrap();
        assert_eq!(
            ds.inputs(),
            &DMatrix::from_row_slice(3, 2, &[0.5, 1.5, -1.0, 0.0, 3.25, 2.0])
        );
        assert_eq!(
            ds.labels(),
            &Labels::Classes {
                indices: vec![2, 0, 1],
                n_classes: 3
            }
        );

        let empty = write(dir.path(), "e.csv", "");
        assert!(load_csv(&empty, schema).is_err());

        let headed = write(dir.path(), "h.csv", "x,y,label\n1,2,1\n");
        assert_eq!(
            load_csv(
                &headed,
                CsvSchema {
                    has_header: true,
                    ..schema
                }
            )
            .unwrap()
            .len(),
            1
        );
        assert!(matches!(load_csv(&headed, schema), Err(Error::Parse { line: 1, .. })));

        let bad = write(dir.path(), "b.csv", "1,2,0\n1,abc,1\n");
        assert!(matches!(load_csv(&bad, schema), Err(Error::Parse { line: 2, .. })));

        let bin = write(dir.path(), "bin.csv", "1,1\n2,-1\n");
        let ds = load_csv(
            &bin,
            CsvSchema {
                has_header: false,
                labels: LabelKind::Binary,
            },
        )
        .unwrap();
        assert_eq!(ds.labels(), &Labels::Binary(vec![1.0, -1.0]));
    }
}
