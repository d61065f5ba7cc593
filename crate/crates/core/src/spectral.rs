//! Graph Fourier transform, spectral filters and sampling masks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::graph::Graph;

/// Eigen-decomposition `L = U diag(lambda) U^T` of a graph Laplacian.
///
/// Eigenvalues ascend. Each eigenvector is signed so that its entry of largest
/// magnitude is positive (the lowest index wins ties), which keeps results
/// stable across linear-algebra backends.
#[derive(Debug, Clone, PartialEq)]
pub struct GftBasis {
    eigenvectors: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl GftBasis {
    pub fn from_graph(g: &Graph) -> Result<Self> {
        gft_basis(&g.laplacian())
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Orthonormal eigenvectors as columns.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// The `k`-th (0-based) eigenvector.
    pub fn eigenvector(&self, k: usize) -> DVector<f64> {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        forward_gft(self, x)
    }

    pub fn inverse(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        inverse_gft(self, s)
    }

    /// Dense operator `U diag(response) U^T`.
    pub fn operator(&self, response: &[f64]) -> Result<DMatrix<f64>> {
        check_len("spectral response", self.n(), response.len())?;
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= response[k];
        }
        Ok(&scaled * self.eigenvectors.transpose())
    }
}

fn symmetry_tolerance(l: &DMatrix<f64>) -> f64 {
    1e-10 * l.amax().max(1.0)
}

/// Eigen-decomposition of a symmetric matrix, sorted ascending with the sign convention applied.
pub fn gft_basis(l: &DMatrix<f64>) -> Result<GftBasis> {
    let n = l.nrows();
    if n == 0 {
        return Err(Error::param("empty matrix"));
    }
    check_len("square matrix", n, l.ncols())?;
    let tol = symmetry_tolerance(l);
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (l[(i, j)] - l[(j, i)]).abs();
            if !(diff <= tol) {
                return Err(Error::NotSymmetric { row: i, col: j, diff });
            }
        }
    }
    let eig = SymmetricEigen::new(l.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let mut eigenvectors = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        let max = v.amax();
        let pivot = v.iter().position(|x| x.abs() >= max - 1e-12 * max).unwrap_or(0);
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        eigenvectors.set_column(dst, &v);
        eigenvalues.push(eig.eigenvalues[src]);
    }
    Ok(GftBasis {
        eigenvectors,
        eigenvalues,
    })
}

/// `s = U^T x`.
pub fn forward_gft(basis: &GftBasis, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("forward GFT input", basis.n(), x.len())?;
    Ok(basis.eigenvectors.tr_mul(x))
}

/// `x = U s`.
pub fn inverse_gft(basis: &GftBasis, s: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("inverse GFT input", basis.n(), s.len())?;
    Ok(&basis.eigenvectors * s)
}

/// Diagonal spectral response `Sigma` in `x' = U Sigma U^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFilter {
    response: Vec<f64>,
}

impl SpectralFilter {
    pub fn new(response: Vec<f64>) -> Self {
        Self { response }
    }

    pub fn all_pass(n: usize) -> Self {
        Self::new(vec![1.0; n])
    }

    /// Binary filter keeping the listed (0-based) frequencies.
    pub fn bandlimited(n: usize, kept: &[usize]) -> Result<Self> {
        let mut response = vec![0.0; n];
        for &k in kept {
            if k >= n {
                return Err(Error::param(format!("frequency index {k} out of range 0..{n}")));
            }
            response[k] = 1.0;
        }
        Ok(Self::new(response))
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    /// Indices with nonzero response, ascending.
    pub fn kept(&self) -> Vec<usize> {
        self.response
            .iter()
            .enumerate()
            .filter(|(_, &r)| r != 0.0)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn is_indicator(&self) -> bool {
        self.response.iter().all(|&r| r == 0.0 || r == 1.0)
    }
}

/// `x' = U diag(response) U^T x`.
pub fn apply_spectral_filter(basis: &GftBasis, filt: &SpectralFilter, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("spectral filter", basis.n(), filt.len())?;
    let mut s = forward_gft(basis, x)?;
    for (sk, r) in s.iter_mut().zip(&filt.response) {
        *sk *= r;
    }
    inverse_gft(basis, &s)
}

/// Mean squared GFT coefficient per frequency over the rows of `training_signals` (T0 x N).
pub fn spectral_energy(training_signals: &DMatrix<f64>, basis: &GftBasis) -> Result<Vec<f64>> {
    let t0 = training_signals.nrows();
    if t0 == 0 {
        return Err(Error::param("need at least one training signal"));
    }
    check_len("training signal width", basis.n(), training_signals.ncols())?;
    // Row t of S = X U holds the spectrum of signal t.
    let spectra = training_signals * &basis.eigenvectors;
    Ok(spectra
        .column_iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / t0 as f64)
        .collect())
}

/// Keeps the `band_size` frequencies with the largest mean energy in the training signals.
/// Ties go to the lower frequency index.
pub fn greedy_bandlimit(training_signals: &DMatrix<f64>, basis: &GftBasis, band_size: usize) -> Result<SpectralFilter> {
    if band_size > basis.n() {
        return Err(Error::param(format!(
            "band size {band_size} exceeds number of frequencies {}",
            basis.n()
        )));
    }
    let energy = spectral_energy(training_signals, basis)?;
    Ok(top_k_filter(&energy, band_size))
}

pub(crate) fn top_k_filter(energy: &[f64], k: usize) -> SpectralFilter {
    let mut order: Vec<usize> = (0..energy.len()).collect();
    order.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]).then(a.cmp(&b)));
    let mut response = vec![0.0; energy.len()];
    for &idx in order.iter().take(k) {
        response[idx] = 1.0;
    }
    SpectralFilter::new(response)
}

/// Diagonal 0/1 sampling operator over the observed node set.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    observed: Vec<usize>,
    indicator: Vec<f64>,
}

impl SamplingMask {
    /// Mask over `n` nodes observing the given (0-based) indices. Duplicates are merged.
    pub fn new(n: usize, observed: &[usize]) -> Result<Self> {
        let mut indicator = vec![0.0; n];
        for &i in observed {
            if i >= n {
                return Err(Error::param(format!("observed node {i} out of range 0..{n}")));
            }
            indicator[i] = 1.0;
        }
        let observed = (0..n).filter(|&i| indicator[i] == 1.0).collect();
        Ok(Self { observed, indicator })
    }

    pub fn full(n: usize) -> Self {
        Self {
            observed: (0..n).collect(),
            indicator: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.indicator.len()
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn observed_count(&self) -> usize {
        self.observed.len()
    }

    pub fn as_diagonal(&self) -> &[f64] {
        &self.indicator
    }

    pub fn is_observed(&self, i: usize) -> bool {
        self.indicator[i] == 1.0
    }

    /// `D_S x`.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("sampling mask", self.n(), x.len())?;
        Ok(x.component_mul(&DVector::from_column_slice(&self.indicator)))
    }
}

/// Zeroes the unobserved entries of `x`.
pub fn apply_mask(mask: &SamplingMask, x: &DVector<f64>) -> Result<DVector<f64>> {
    mask.apply(x)
}
