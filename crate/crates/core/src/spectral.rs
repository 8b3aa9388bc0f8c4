//! Dense spectral routines and the scalar diagnostics built on them.
//!
//! Eigen- and singular-value decompositions are delegated to `nalgebra`;
//! this module fixes the conventions the rest of the crate relies on
//! (non-increasing order, clamping of numerical zeros, symmetry checks) and
//! implements effective rank, trace ratios, kernel centering, CKA, label
//! kernels and the DFT magnitude spectrum used to inspect eigenvectors.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{shape, Error, Result};

/// Eigenvalues below `CLAMP_RELATIVE * max(λ)` count as exact zeros.
pub const CLAMP_RELATIVE: f64 = 1e-12;

/// Relative tolerance used when checking that an input matrix is symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Eigenvalues sorted in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Builds a spectrum from eigenvalues in any order.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Threshold below which an eigenvalue is treated as zero.
    pub fn clamp_threshold(&self) -> f64 {
        CLAMP_RELATIVE * self.max().max(0.0)
    }

    /// Eigenvalues with negatives and numerical zeros replaced by 0.
    pub fn clamped(&self) -> Vec<f64> {
        let thr = self.clamp_threshold();
        self.values
            .iter()
            .map(|&v| if v > thr && v > 0.0 { v } else { 0.0 })
            .collect()
    }

    /// Number of eigenvalues above the clamp threshold.
    pub fn numerical_rank(&self) -> usize {
        self.clamped().iter().filter(|&&v| v > 0.0).count()
    }

    /// True when no eigenvalue is below `-tol * max|λ|`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.values.iter().all(|&v| v >= -tol * scale)
    }

    /// `λ_j / λ_1` with 1-based `j`.
    pub fn ratio_to_top(&self, j: usize) -> Result<f64> {
        if j == 0 || j > self.values.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                max: self.values.len(),
            });
        }
        let top = self.max();
        if top <= 0.0 {
            return Err(Error::DegenerateSpectrum);
        }
        Ok(self.values[j - 1] / top)
    }
}

/// Eigenvalues paired with orthonormal eigenvectors (one per column).
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub spectrum: Spectrum,
    pub vectors: DMatrix<f64>,
}

/// Thin singular value decomposition `M = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    /// Number of singular values above `rel * s_max`.
    pub fn rank(&self, rel: f64) -> usize {
        let top = self.singular_values.iter().copied().fold(0.0, f64::max);
        self.singular_values
            .iter()
            .filter(|&&s| s > rel * top && s > 0.0)
            .count()
    }
}

fn ensure_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "symmetric matrix",
            expected: "square".into(),
            got: shape(a.nrows(), a.ncols()),
        });
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let asym = max_asymmetry(a);
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

fn symmetrized(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Symmetric eigendecomposition with eigenvalues in non-increasing order.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<EigenSystem> {
    check_symmetric(a)?;
    ensure_finite(a, "sym_eig input")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(EigenSystem {
            spectrum: Spectrum::new(Vec::new()),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = symmetrized(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenSystem {
        spectrum: Spectrum { values },
        vectors,
    })
}

/// Eigenvalues only; cheaper than [`sym_eig`] for large kernels.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Result<Spectrum> {
    check_symmetric(a)?;
    ensure_finite(a, "sym_eigenvalues input")?;
    if a.nrows() == 0 {
        return Ok(Spectrum::new(Vec::new()));
    }
    let vals = symmetrized(a).symmetric_eigenvalues();
    Ok(Spectrum::new(vals.iter().copied().collect()))
}

/// Thin SVD with singular values in non-increasing order.
pub fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    ensure_finite(m, "svd input")?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(rows, 0),
            singular_values: DVector::zeros(0),
            v: DMatrix::zeros(cols, 0),
        });
    }
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("u requested");
    let vt = dec.v_t.expect("v_t requested");
    let s = dec.singular_values;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    Ok(Svd {
        u: DMatrix::from_fn(rows, k, |r, c| u[(r, order[c])]),
        singular_values: DVector::from_iterator(k, order.iter().map(|&i| s[i])),
        v: DMatrix::from_fn(cols, k, |r, c| vt[(order[c], r)]),
    })
}

/// Exponential of the Shannon entropy (natural log) of the trace-normalized
/// clamped spectrum.
pub fn effective_rank(s: &Spectrum) -> Result<f64> {
    let vals = s.clamped();
    let total: f64 = vals.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    let entropy: f64 = vals
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / total;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp())
}

/// Fraction of spectral mass carried by the top `k` eigenvalues, for each
/// requested `k` (1-based, at most the spectrum length).
pub fn trace_ratios(s: &Spectrum, ks: &[usize]) -> Result<Vec<f64>> {
    let vals = s.clamped();
    let r = vals.len();
    let total: f64 = vals.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    let mut prefix = Vec::with_capacity(r + 1);
    prefix.push(0.0);
    for v in &vals {
        prefix.push(prefix.last().unwrap() + v);
    }
    ks.iter()
        .map(|&k| {
            if k == 0 || k > r {
                Err(Error::IndexOutOfRange { index: k, max: r })
            } else {
                Ok((prefix[k] / total).min(1.0))
            }
        })
        .collect()
}

/// Symmetric Gram matrix over `n_samples * n_classes` (sample, class) rows.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
    n_samples: usize,
    n_classes: usize,
    spectrum: OnceLock<Spectrum>,
}

impl KernelMatrix {
    pub fn new(entries: DMatrix<f64>, n_samples: usize, n_classes: usize) -> Result<Self> {
        let dim = n_samples * n_classes;
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::DimensionMismatch {
                context: "kernel matrix",
                expected: shape(dim, dim),
                got: shape(entries.nrows(), entries.ncols()),
            });
        }
        ensure_finite(&entries, "kernel matrix")?;
        check_symmetric(&entries)?;
        Ok(Self::from_parts(entries, n_samples, n_classes))
    }

    /// Square kernel with a single output per sample.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        Self::new(entries, n, 1)
    }

    pub(crate) fn from_parts(entries: DMatrix<f64>, n_samples: usize, n_classes: usize) -> Self {
        Self {
            entries,
            n_samples,
            n_classes,
            spectrum: OnceLock::new(),
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Eigenvalues, computed once and cached.
    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum
            .get_or_init(|| sym_eigenvalues(&self.entries).expect("kernel validated at construction"))
    }

    pub fn eigen(&self) -> Result<EigenSystem> {
        let sys = sym_eig(&self.entries)?;
        let _ = self.spectrum.set(sys.spectrum.clone());
        Ok(sys)
    }

    /// Smallest eigenvalue is at least `-tol * max eigenvalue`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.spectrum().is_psd(tol)
    }

    pub fn scaled(&self, alpha: f64) -> KernelMatrix {
        Self::from_parts(&self.entries * alpha, self.n_samples, self.n_classes)
    }
}

impl std::ops::Add for &KernelMatrix {
    type Output = KernelMatrix;

    fn add(self, rhs: &KernelMatrix) -> KernelMatrix {
        KernelMatrix::from_parts(&self.entries + &rhs.entries, self.n_samples, self.n_classes)
    }
}

/// Double centering `C K C` with `C = I - 11ᵀ/r`.
pub fn center_kernel(k: &KernelMatrix) -> KernelMatrix {
    KernelMatrix::from_parts(center_matrix(k.entries()), k.n_samples, k.n_classes)
}

pub(crate) fn center_matrix(k: &DMatrix<f64>) -> DMatrix<f64> {
    let r = k.nrows();
    if r == 0 {
        return k.clone();
    }
    let rf = r as f64;
    let row_means: Vec<f64> = (0..r).map(|i| k.row(i).sum() / rf).collect();
    let col_means: Vec<f64> = (0..r).map(|j| k.column(j).sum() / rf).collect();
    let grand = row_means.iter().sum::<f64>() / rf;
    DMatrix::from_fn(r, r, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

fn check_same_dim(a: &KernelMatrix, b: &KernelMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "kernel alignment",
            expected: shape(a.dim(), a.dim()),
            got: shape(b.dim(), b.dim()),
        });
    }
    Ok(())
}

fn normalized_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(Error::DegenerateKernel);
    }
    // Tr[A B] for symmetric A, B is the entrywise inner product.
    Ok((a.dot(b) / (na * nb)).min(1.0))
}

/// Centered kernel alignment `Tr[K_c K'_c] / (‖K_c‖_F ‖K'_c‖_F)`.
pub fn cka(k: &KernelMatrix, k2: &KernelMatrix) -> Result<f64> {
    check_same_dim(k, k2)?;
    let a = center_matrix(k.entries());
    let b = center_matrix(k2.entries());
    // Centered kernels that are zero up to round-off are treated as zero.
    let tiny = |c: &DMatrix<f64>, raw: &DMatrix<f64>| c.norm() <= 1e-13 * raw.norm();
    if tiny(&a, k.entries()) || tiny(&b, k2.entries()) {
        return Err(Error::DegenerateKernel);
    }
    normalized_inner(&a, &b)
}

/// Kernel alignment without centering.
pub fn uncentered_alignment(k: &KernelMatrix, k2: &KernelMatrix) -> Result<f64> {
    check_same_dim(k, k2)?;
    normalized_inner(k.entries(), k2.entries())
}

/// Rank-one kernel `Y Yᵀ` built from the concatenated label vector.
///
/// `labels` is `n × c`. With `c == 1` entries must be `±1`; otherwise each row
/// must be one-hot.
pub fn label_kernel(labels: &DMatrix<f64>) -> Result<KernelMatrix> {
    let (n, c) = labels.shape();
    let y = label_vector(labels)?;
    Ok(KernelMatrix::from_parts(&y * y.transpose(), n, c))
}

/// Sample-major concatenation of validated label rows.
pub fn label_vector(labels: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (n, c) = labels.shape();
    if c == 0 {
        return Err(Error::InvalidArgument("label matrix has no columns".into()));
    }
    for i in 0..n {
        if c == 1 {
            let v = labels[(i, 0)];
            if v != 1.0 && v != -1.0 {
                return Err(Error::InvalidLabel {
                    row: i,
                    reason: format!("binary label must be ±1, got {v}"),
                });
            }
        } else {
            let ones = labels.row(i).iter().filter(|&&v| v == 1.0).count();
            let zeros = labels.row(i).iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || zeros != c - 1 {
                return Err(Error::InvalidLabel {
                    row: i,
                    reason: "row is not one-hot".into(),
                });
            }
        }
    }
    Ok(DVector::from_iterator(
        n * c,
        (0..n).flat_map(|i| (0..c).map(move |y| labels[(i, y)])),
    ))
}

/// Magnitudes `|Σ_t v_t e^{-2πikt/n}|` for `k = 0..=n/2`.
pub fn dft_magnitudes(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(buf[..=n / 2].iter().map(|z| z.norm()).collect())
}

/// Frequency index carrying the largest DFT magnitude.
pub fn dominant_frequency(v: &[f64]) -> Result<usize> {
    let mags = dft_magnitudes(v)?;
    Ok(mags
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (k, &m)| if m > best.1 { (k, m) } else { best },
        )
        .0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        DMatrix::from_fn(rows, cols, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn sym_eig_identity_and_diagonal() {
        let e = sym_eig(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(e.spectrum.values(), &[1.0, 1.0, 1.0]);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = sym_eig(&d).unwrap();
        assert_eq!(e.spectrum.values(), &[3.0, 2.0, 1.0]);
        assert_relative_eq!(e.vectors[(0, 0)].abs(), 1.0);
        assert_relative_eq!(e.vectors[(2, 1)].abs(), 1.0);
    }

    #[test]
    fn sym_eig_reconstructs_random_symmetric() {
        let m = lcg_matrix(5, 5, 3);
        let a = &m + m.transpose();
        let e = sym_eig(&a).unwrap();
        let lam = DMatrix::from_diagonal(&DVector::from_vec(e.spectrum.values().to_vec()));
        let rec = &e.vectors * lam * e.vectors.transpose();
        assert!((rec - &a).norm() <= 1e-8 * a.norm());
        let gram = e.vectors.transpose() * &e.vectors;
        assert!((gram - DMatrix::identity(5, 5)).amax() < 1e-8);
        assert!(e.spectrum.values().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sym_eig_rejects_bad_input() {
        assert!(matches!(
            sym_eig(&DMatrix::zeros(2, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn svd_basic_cases() {
        let s = svd(&DMatrix::identity(4, 4)).unwrap();
        assert!(s.singular_values.iter().all(|&v| (v - 1.0).abs() < 1e-14));

        let a = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let b = DVector::from_vec(vec![3.0, 4.0]);
        let s = svd(&(&a * b.transpose())).unwrap();
        assert_relative_eq!(s.singular_values[0], 15.0, epsilon = 1e-12);
        assert!(s.singular_values[1].abs() < 1e-12);
    }

    #[test]
    fn svd_matches_gram_eigenvalues() {
        let m = lcg_matrix(6, 4, 11);
        let s = svd(&m).unwrap();
        let rec = &s.u * DMatrix::from_diagonal(&s.singular_values) * s.v.transpose();
        assert!((rec - &m).norm() <= 1e-8 * m.norm());
        let e = sym_eig(&(m.transpose() * &m)).unwrap();
        for (lam, sv) in e.spectrum.values().iter().zip(s.singular_values.iter()) {
            assert!((lam - sv * sv).abs() <= 1e-8 * lam.abs().max(1.0));
        }
    }

    #[test]
    fn svd_rejects_nan() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn effective_rank_examples() {
        assert_relative_eq!(
            effective_rank(&Spectrum::new(vec![2.0; 7])).unwrap(),
            7.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(effective_rank(&Spectrum::new(vec![5.0, 0.0, 0.0])).unwrap(), 1.0);
        // H = (3/2) ln 2
        assert_relative_eq!(
            effective_rank(&Spectrum::new(vec![0.5, 0.25, 0.25])).unwrap(),
            2f64.powf(1.5),
            epsilon = 1e-12
        );
        assert!(matches!(
            effective_rank(&Spectrum::new(vec![0.0, 0.0])),
            Err(Error::DegenerateSpectrum)
        ));
    }

    #[test]
    fn effective_rank_ignores_clamped_negatives() {
        let s = Spectrum::new(vec![1.0, 1.0, -1e-15, 1e-14]);
        assert_relative_eq!(effective_rank(&s).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(s.numerical_rank(), 2);
    }

    #[test]
    fn trace_ratio_examples() {
        let uni = Spectrum::new(vec![1.0; 5]);
        let t = trace_ratios(&uni, &[1, 2, 5]).unwrap();
        assert_eq!(t, vec![0.2, 0.4, 1.0]);
        assert_eq!(
            trace_ratios(&Spectrum::new(vec![1.0, 0.0, 0.0]), &[1]).unwrap(),
            vec![1.0]
        );
        assert_eq!(
            trace_ratios(&Spectrum::new(vec![4.0, 2.0, 1.0, 1.0]), &[2]).unwrap(),
            vec![0.75]
        );
        assert!(matches!(
            trace_ratios(&uni, &[6]),
            Err(Error::IndexOutOfRange { index: 6, max: 5 })
        ));
        assert!(trace_ratios(&uni, &[0]).is_err());
    }

    #[test]
    fn centering_examples() {
        let ones = KernelMatrix::from_matrix(DMatrix::from_element(4, 4, 1.0)).unwrap();
        assert!(center_kernel(&ones).entries().amax() < 1e-15);

        let m = lcg_matrix(4, 3, 5);
        let k = KernelMatrix::from_matrix(&m * m.transpose()).unwrap();
        let c = center_kernel(&k);
        for i in 0..4 {
            assert!(c.entries().row(i).sum().abs() < 1e-8);
            assert!(c.entries().column(i).sum().abs() < 1e-8);
        }
        let cc = center_kernel(&c);
        assert!((cc.entries() - c.entries()).amax() < 1e-10);
    }

    #[test]
    fn cka_examples() {
        let m = lcg_matrix(6, 3, 9);
        let k = KernelMatrix::from_matrix(&m * m.transpose()).unwrap();
        assert_relative_eq!(cka(&k, &k).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(cka(&k, &k.scaled(5.0)).unwrap(), 1.0, epsilon = 1e-12);

        // Centered a and b are orthogonal: a = (1,-1,0,0), b = (0,0,1,-1).
        let a = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![0.0, 0.0, 1.0, -1.0]);
        let ka = KernelMatrix::from_matrix(&a * a.transpose()).unwrap();
        let kb = KernelMatrix::from_matrix(&b * b.transpose()).unwrap();
        assert!(cka(&ka, &kb).unwrap().abs() < 1e-15);

        let ones = KernelMatrix::from_matrix(DMatrix::from_element(4, 4, 2.0)).unwrap();
        assert!(matches!(cka(&ka, &ones), Err(Error::DegenerateKernel)));
        let small = KernelMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(cka(&ka, &small), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn label_kernel_examples() {
        let y = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let k = label_kernel(&y).unwrap();
        assert_eq!(k.entries(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let y = DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 1.0]);
        let k = label_kernel(&y).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k.entries()[(i, j)], y[(i, 0)] * y[(j, 0)]);
            }
        }

        let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let k = label_kernel(&y).unwrap();
        assert_eq!(k.eigen().unwrap().spectrum.numerical_rank(), 1);

        let bad = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        assert!(matches!(label_kernel(&bad), Err(Error::InvalidLabel { .. })));
        let bad = DMatrix::from_column_slice(1, 1, &[0.5]);
        assert!(label_kernel(&bad).is_err());
    }

    fn naive_dft(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &x) in v.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    re += x * ang.cos();
                    im += x * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn dft_examples() {
        let mags = dft_magnitudes(&[2.0; 8]).unwrap();
        assert_relative_eq!(mags[0], 16.0, epsilon = 1e-12);
        assert!(mags[1..].iter().all(|&m| m < 1e-12));

        let n = 64;
        let tone: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 5.0 * t as f64 / n as f64).cos())
            .collect();
        assert_eq!(dominant_frequency(&tone).unwrap(), 5);

        let two: Vec<f64> = (0..n)
            .map(|t| {
                let x = t as f64 / n as f64;
                (2.0 * std::f64::consts::PI * 3.0 * x).cos() + 0.5 * (2.0 * std::f64::consts::PI * 9.0 * x).sin()
            })
            .collect();
        let fast = dft_magnitudes(&two).unwrap();
        let slow = naive_dft(&two);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(fast[3] > 30.0 && fast[9] > 15.0);
        assert!(dft_magnitudes(&[1.0]).is_err());
    }
}
