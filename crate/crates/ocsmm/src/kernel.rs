//! Kernels on the input space and on probability distributions.
//!
//! The layer-1 kernels compute inner products between (mean embeddings of)
//! distributions: the empirical double average over two sample sets, or the
//! closed form for Gaussians under a Gaussian RBF base kernel. Layer 2
//! optionally re-kernelizes those inner products (RBF on the embedding
//! distance), with spherical normalization available in between. The Gram
//! matrix over a dataset of groups feeds the dual solver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Group;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, forward_solve_in_place, pairwise_sum, sq_dist};

/// Terms above which the empirical double sum switches to per-row sums
/// combined by pairwise reduction.
const PAIRWISE_THRESHOLD: usize = 4096;

/// Jitter ladder for the Gram PSD repair.
const PSD_JITTERS: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-9];

/// Pair count above which the median heuristic stops materializing all
/// squared distances and falls back to counting selection (2^27 pairs,
/// about 1 GiB of f64).
const MEDIAN_BUFFER_CAP: usize = 1 << 27;

// ---------------------------------------------------------------------------
// Base kernel
// ---------------------------------------------------------------------------

/// Supported base kernel families on the input space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    GaussianRbf,
}

/// Translation-invariant base kernel with unit scale, `k(x, x) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseKernel {
    pub family: KernelFamily,
    /// Bandwidth in input-space units.
    pub sigma: f64,
}

impl BaseKernel {
    /// Gaussian RBF with the given bandwidth.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(BaseKernel { family: KernelFamily::GaussianRbf, sigma })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Unchecked point evaluation (hot path; dimensions must match).
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::GaussianRbf => {
                (-sq_dist(x, y) / (2.0 * self.sigma * self.sigma)).exp()
            }
        }
    }
}

/// Gaussian RBF `exp(-||x-y||^2 / (2 sigma^2))`.
pub fn rbf_eval(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let base = BaseKernel::gaussian(sigma)?;
    Ok(base.eval(x, y))
}

// ---------------------------------------------------------------------------
// Gaussian summaries
// ---------------------------------------------------------------------------

/// A distribution summarized by its mean and covariance, used by the
/// analytic layer-1 kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl GaussianSummary {
    /// Validates shape, symmetry (1e-12) and positive semidefiniteness
    /// (smallest eigenvalue above -1e-10, checked by a shifted Cholesky).
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::invalid("empty mean vector"));
        }
        if cov.len() != d || cov.iter().any(|row| row.len() != d) {
            return Err(Error::invalid(format!("covariance must be {d}x{d}")));
        }
        for v in mean.iter().chain(cov.iter().flatten()) {
            if !v.is_finite() {
                return Err(Error::invalid("non-finite value in Gaussian summary"));
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (cov[i][j] - cov[j][i]).abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "covariance not symmetric at ({i},{j}): {} vs {}",
                        cov[i][j], cov[j][i]
                    )));
                }
            }
        }
        // PSD within tolerance: Sigma + 1e-10 I must admit a Cholesky factor.
        let mut shifted = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                shifted[i * d + j] = cov[i][j];
            }
            shifted[i * d + i] += 1e-10;
        }
        if cholesky_in_place(&mut shifted, d).is_err() {
            return Err(Error::invalid("covariance is not positive semidefinite"));
        }
        Ok(GaussianSummary { mean, cov })
    }

    /// Isotropic summary `N(mean, variance * I)`.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if variance < 0.0 || !variance.is_finite() {
            return Err(Error::invalid(format!("variance must be >= 0, got {variance}")));
        }
        let d = mean.len();
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { variance } else { 0.0 }).collect())
            .collect();
        GaussianSummary::new(mean, cov)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[Vec<f64>] {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Closed-form inner product of the mean embeddings of two Gaussians under
/// a Gaussian RBF base kernel:
/// `exp(-1/2 (m_i - m_j)^T B^{-1} (m_i - m_j)) / det(S_i/s^2 + S_j/s^2 + I)^{1/2}`
/// with `B = S_i + S_j + s^2 I`.
pub fn gaussian_analytic_inner(a: &GaussianSummary, b: &GaussianSummary, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let d = a.dim();
    let s2 = sigma * sigma;
    let mut bmat = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            bmat[i * d + j] = a.cov[i][j] + b.cov[i][j];
        }
        bmat[i * d + i] += s2;
    }
    // B is positive definite for sigma > 0 up to rounding; retry once with a
    // tiny shift before declaring the inputs broken.
    let mut factor = bmat.clone();
    if cholesky_in_place(&mut factor, d).is_err() {
        for i in 0..d {
            bmat[i * d + i] += 1e-10;
        }
        factor = bmat;
        if cholesky_in_place(&mut factor, d).is_err() {
            return Err(Error::numerical("singular B in analytic kernel"));
        }
    }
    let mut diff: Vec<f64> = (0..d).map(|k| a.mean[k] - b.mean[k]).collect();
    forward_solve_in_place(&factor, d, &mut diff);
    let quad: f64 = diff.iter().map(|v| v * v).sum();
    let mut det_scale = 1.0; // prod sigma / L_kk = det(B / sigma^2)^{-1/2}
    for k in 0..d {
        det_scale *= sigma / factor[k * d + k];
    }
    Ok((-0.5 * quad).exp() * det_scale)
}

/// Analytic kernel between two isotropic Gaussians given as point + variance.
/// Scalar form of [`gaussian_analytic_inner`], used for per-point mixtures.
#[inline]
fn analytic_iso(x: &[f64], wx: f64, y: &[f64], wy: f64, sigma: f64) -> f64 {
    let d = x.len();
    let s2 = sigma * sigma + (wx + wy);
    let ratio = sigma * sigma / s2;
    (-sq_dist(x, y) / (2.0 * s2)).exp() * ratio.powf(d as f64 / 2.0)
}

/// Analytic kernel between a full summary and an isotropic point Gaussian.
fn analytic_summary_iso(a: &GaussianSummary, y: &[f64], wy: f64, sigma: f64) -> Result<f64> {
    let iso = GaussianSummary::isotropic(y.to_vec(), wy)?;
    gaussian_analytic_inner(a, &iso, sigma)
}

// ---------------------------------------------------------------------------
// Empirical layer-1 kernel
// ---------------------------------------------------------------------------

/// Orders two point sets deterministically by (size, lexicographic content)
/// so double sums are evaluated in one fixed order regardless of argument
/// order. `omega` rides along for tie-breaking.
fn canonical_pair<'a>(
    a: (&'a [Vec<f64>], Option<&'a [f64]>),
    b: (&'a [Vec<f64>], Option<&'a [f64]>),
) -> ((&'a [Vec<f64>], Option<&'a [f64]>), (&'a [Vec<f64>], Option<&'a [f64]>)) {
    use std::cmp::Ordering;
    let ord = a.0.len().cmp(&b.0.len()).then_with(|| {
        let flat_a = a.0.iter().flatten().chain(a.1.unwrap_or(&[]).iter());
        let flat_b = b.0.iter().flatten().chain(b.1.unwrap_or(&[]).iter());
        for (x, y) in flat_a.zip(flat_b) {
            match x.total_cmp(y) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        Ordering::Equal
    });
    if ord == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    }
}

/// Double sum over two point sets, averaged, with `term` evaluated per pair.
/// Above [`PAIRWISE_THRESHOLD`] terms, rows are summed sequentially and
/// combined pairwise for a reproducible fixed summation scheme.
fn mean_double_sum<F>(outer: usize, inner: usize, term: F) -> f64
where
    F: Fn(usize, usize) -> f64,
{
    let total = outer * inner;
    let sum = if total <= PAIRWISE_THRESHOLD {
        let mut s = 0.0;
        for i in 0..outer {
            for j in 0..inner {
                s += term(i, j);
            }
        }
        s
    } else {
        let rows: Vec<f64> = (0..outer)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..inner {
                    s += term(i, j);
                }
                s
            })
            .collect();
        pairwise_sum(&rows)
    };
    sum / total as f64
}

/// Empirical estimate of the mean-embedding inner product between two
/// sample sets: the double average of the base kernel over all cross pairs.
pub fn emp_mean_inner(a: &[Vec<f64>], b: &[Vec<f64>], base: &BaseKernel) -> Result<f64> {
    base.validate()?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("empty group in empirical kernel"));
    }
    let d = a[0].len();
    if a.iter().chain(b.iter()).any(|p| p.len() != d) {
        return Err(Error::invalid("dimension mismatch between points"));
    }
    let ((oa, _), (ob, _)) = canonical_pair((a, None), (b, None));
    Ok(mean_double_sum(oa.len(), ob.len(), |i, j| base.eval(&oa[i], &ob[j])))
}

/// Mixture form of the analytic kernel for groups given as points with
/// per-point isotropic variances: the double average of the closed-form
/// kernel over all cross pairs. Missing variances are treated as zero
/// (Dirac atoms).
fn analytic_mixture_inner(
    a: &[Vec<f64>],
    wa: Option<&[f64]>,
    b: &[Vec<f64>],
    wb: Option<&[f64]>,
    sigma: f64,
) -> f64 {
    let (ca, cb) = canonical_pair((a, wa), (b, wb));
    let (pa, oa) = ca;
    let (pb, ob) = cb;
    let wa_at = |i: usize| oa.map_or(0.0, |w| w[i]);
    let wb_at = |j: usize| ob.map_or(0.0, |w| w[j]);
    mean_double_sum(pa.len(), pb.len(), |i, j| {
        analytic_iso(&pa[i], wa_at(i), &pb[j], wb_at(j), sigma)
    })
}

// ---------------------------------------------------------------------------
// Group kernel specification
// ---------------------------------------------------------------------------

/// How the layer-1 inner product between two groups is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level1 {
    /// Double average of the base kernel over observed sample points.
    Empirical,
    /// Closed form for Gaussian representations (explicit summary, or
    /// points with per-point uncertainty treated as a uniform mixture).
    GaussianAnalytic,
}

/// Bandwidth choice for the embedding-level RBF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaParam {
    Fixed(f64),
    /// Square root of the median squared RKHS distance between the
    /// (possibly normalized) embeddings; the default.
    MedianRkhs,
    /// gamma = sigma of the base kernel.
    MatchSigma,
}

/// Second-level kernel applied to the layer-1 inner products.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level2 {
    /// Use the inner products directly.
    Linear,
    /// `exp(-||mu_i - mu_j||^2 / (2 gamma^2))` on the RKHS distance.
    EmbeddingRbf { gamma: GammaParam },
}

/// Full distribution-kernel configuration: base kernel, layer-1 choice,
/// optional spherical normalization, layer-2 choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupKernelSpec {
    pub base: BaseKernel,
    pub level1: Level1,
    pub level2: Level2,
    /// Apply spherical normalization to the layer-1 Gram before layer 2.
    pub normalize: bool,
}

impl GroupKernelSpec {
    /// Empirical kernel with inner products used directly.
    pub fn empirical(sigma: f64) -> Result<Self> {
        Ok(GroupKernelSpec {
            base: BaseKernel::gaussian(sigma)?,
            level1: Level1::Empirical,
            level2: Level2::Linear,
            normalize: false,
        })
    }

    /// Analytic Gaussian kernel with inner products used directly.
    pub fn analytic(sigma: f64) -> Result<Self> {
        Ok(GroupKernelSpec {
            base: BaseKernel::gaussian(sigma)?,
            level1: Level1::GaussianAnalytic,
            level2: Level2::Linear,
            normalize: false,
        })
    }

    pub fn with_embedding_rbf(mut self, gamma: GammaParam) -> Self {
        self.level2 = Level2::EmbeddingRbf { gamma };
        self
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if let Level2::EmbeddingRbf { gamma: GammaParam::Fixed(g) } = self.level2 {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::invalid(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }

    /// True once every data-dependent parameter has a concrete value.
    pub fn is_resolved(&self) -> bool {
        !matches!(
            self.level2,
            Level2::EmbeddingRbf { gamma: GammaParam::MedianRkhs | GammaParam::MatchSigma }
        )
    }
}

/// Layer-1 inner product between two groups under a spec. Dispatches on the
/// groups' representations; symmetric in its arguments bit for bit.
pub fn level1_inner(a: &Group, b: &Group, spec: &GroupKernelSpec) -> Result<f64> {
    spec.validate()?;
    match (a.dim(), b.dim()) {
        (Some(da), Some(db)) if da != db => {
            return Err(Error::invalid(format!("group dimension mismatch: {da} vs {db}")))
        }
        _ => {}
    }
    let sigma = spec.base.sigma;
    match spec.level1 {
        Level1::Empirical => {
            if !a.has_points() || !b.has_points() {
                return Err(Error::invalid(format!(
                    "empirical kernel requires sample points (groups '{}', '{}')",
                    a.id, b.id
                )));
            }
            emp_mean_inner(&a.points, &b.points, &spec.base)
        }
        Level1::GaussianAnalytic => match (&a.summary, &b.summary) {
            (Some(sa), Some(sb)) => gaussian_analytic_inner(sa, sb, sigma),
            (Some(sa), None) => analytic_vs_points(sa, b, sigma),
            (None, Some(sb)) => analytic_vs_points(sb, a, sigma),
            (None, None) => {
                if !a.has_points() || !b.has_points() {
                    return Err(Error::invalid(format!(
                        "analytic kernel requires a Gaussian summary or points (groups '{}', '{}')",
                        a.id, b.id
                    )));
                }
                Ok(analytic_mixture_inner(
                    &a.points,
                    a.omega.as_deref(),
                    &b.points,
                    b.omega.as_deref(),
                    sigma,
                ))
            }
        },
    }
}

fn analytic_vs_points(summary: &GaussianSummary, g: &Group, sigma: f64) -> Result<f64> {
    if !g.has_points() {
        return Err(Error::invalid(format!(
            "analytic kernel requires a Gaussian summary or points (group '{}')",
            g.id
        )));
    }
    let n = g.points.len();
    let mut terms = Vec::with_capacity(n);
    for (j, p) in g.points.iter().enumerate() {
        let w = g.omega.as_ref().map_or(0.0, |o| o[j]);
        terms.push(analytic_summary_iso(summary, p, w, sigma)?);
    }
    let sum = if n <= PAIRWISE_THRESHOLD { terms.iter().sum() } else { pairwise_sum(&terms) };
    Ok(sum / n as f64)
}

/// RBF on the squared RKHS distance recovered from three inner products.
/// A squared distance below -1e-12 signals a broken layer-1 kernel.
pub fn embedding_rbf(k_ii: f64, k_jj: f64, k_ij: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    if k_ii < 0.0 || k_jj < 0.0 {
        return Err(Error::invalid("negative self inner product"));
    }
    let d2 = (k_ii + k_jj) - 2.0 * k_ij;
    if d2 < -1e-12 {
        return Err(Error::numerical(format!(
            "negative squared RKHS distance {d2}; layer-1 kernel is not PSD"
        )));
    }
    Ok((-d2.max(0.0) / (2.0 * gamma * gamma)).exp())
}

// ---------------------------------------------------------------------------
// Gram matrix
// ---------------------------------------------------------------------------

/// Symmetric matrix of distribution-kernel values over a dataset of groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: Vec<f64>,
    len: usize,
    spec: Option<GroupKernelSpec>,
}

impl GramMatrix {
    /// Wraps a row-major square matrix. The upper triangle is taken as the
    /// source of truth; the lower triangle must match within 1e-9 and is
    /// overwritten by the mirror. Non-finite entries are rejected.
    pub fn from_entries(mut entries: Vec<f64>, len: usize) -> Result<Self> {
        if len == 0 || entries.len() != len * len {
            return Err(Error::invalid(format!(
                "expected {}x{} entries, got {}",
                len,
                len,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite Gram entry"));
        }
        for i in 0..len {
            for j in (i + 1)..len {
                let u = entries[i * len + j];
                let l = entries[j * len + i];
                if (u - l).abs() > 1e-9 * (1.0 + u.abs().max(l.abs())) {
                    return Err(Error::invalid(format!(
                        "matrix not symmetric at ({i},{j}): {u} vs {l}"
                    )));
                }
                entries[j * len + i] = u;
            }
        }
        Ok(GramMatrix { entries, len, spec: None })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.len..(i + 1) * self.len]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// The spec that produced this matrix (with data-dependent parameters
    /// resolved), if it came from [`gram_matrix`].
    pub fn spec(&self) -> Option<&GroupKernelSpec> {
        self.spec.as_ref()
    }

    /// Smallest jitter from `{0, 1e-12, 1e-10, 1e-9}` whose addition to the
    /// diagonal lets a Cholesky factorization succeed.
    pub fn psd_jitter(&self) -> Result<f64> {
        for &jitter in &PSD_JITTERS {
            let mut work = self.entries.clone();
            for i in 0..self.len {
                work[i * self.len + i] += jitter;
            }
            if cholesky_in_place(&mut work, self.len).is_ok() {
                return Ok(jitter);
            }
        }
        Err(Error::numerical(
            "Gram matrix is not positive semidefinite within 1e-9 jitter",
        ))
    }

    /// Applies the PSD repair in place and returns the jitter used.
    pub fn ensure_psd(&mut self) -> Result<f64> {
        let jitter = self.psd_jitter()?;
        if jitter > 0.0 {
            for i in 0..self.len {
                self.entries[i * self.len + i] += jitter;
            }
        }
        Ok(jitter)
    }

    fn set_spec(mut self, spec: GroupKernelSpec) -> Self {
        self.spec = Some(spec);
        self
    }
}

/// Cosine-normalizes a Gram matrix: `K_ij / sqrt(K_ii K_jj)`. The diagonal
/// of the result is exactly 1. Fails on a non-positive diagonal entry.
pub fn spherical_normalize(gram: &GramMatrix) -> Result<GramMatrix> {
    let l = gram.len();
    for i in 0..l {
        if !(gram.get(i, i) > 0.0) {
            return Err(Error::invalid(format!(
                "non-positive diagonal entry {} at index {i}",
                gram.get(i, i)
            )));
        }
    }
    let mut entries = vec![0.0; l * l];
    for i in 0..l {
        entries[i * l + i] = 1.0;
        for j in (i + 1)..l {
            let v = gram.get(i, j) / (gram.get(i, i) * gram.get(j, j)).sqrt();
            entries[i * l + j] = v;
            entries[j * l + i] = v;
        }
    }
    Ok(GramMatrix { entries, len: l, spec: gram.spec })
}

/// Assembles the full distribution-kernel Gram matrix for a dataset:
/// layer-1 inner products, optional spherical normalization, then layer 2.
/// The returned matrix carries the spec with `gamma` resolved to a number.
///
/// Entries are computed independently (possibly in parallel) with a fixed
/// per-entry summation scheme, so the result never depends on scheduling.
pub fn gram_matrix(groups: &[Group], spec: &GroupKernelSpec) -> Result<GramMatrix> {
    spec.validate()?;
    if groups.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    for g in groups {
        g.validate()?;
    }
    let l = groups.len();
    let pairs: Vec<(usize, usize)> =
        (0..l).flat_map(|i| (i..l).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| level1_inner(&groups[i], &groups[j], spec))
        .collect::<Result<Vec<f64>>>()?;
    let mut entries = vec![0.0; l * l];
    for (&(i, j), &v) in pairs.iter().zip(values.iter()) {
        entries[i * l + j] = v;
        entries[j * l + i] = v;
    }
    let mut gram = GramMatrix { entries, len: l, spec: None };

    if spec.normalize {
        gram = spherical_normalize(&gram)?;
    }

    let resolved = match spec.level2 {
        Level2::Linear => *spec,
        Level2::EmbeddingRbf { gamma } => {
            let gamma = resolve_gamma(&gram, spec, gamma)?;
            let mut out = vec![0.0; l * l];
            for i in 0..l {
                for j in i..l {
                    let v = embedding_rbf(gram.get(i, i), gram.get(j, j), gram.get(i, j), gamma)?;
                    out[i * l + j] = v;
                    out[j * l + i] = v;
                }
            }
            gram = GramMatrix { entries: out, len: l, spec: None };
            spec.with_embedding_rbf(GammaParam::Fixed(gamma))
        }
    };
    Ok(gram.set_spec(resolved))
}

/// Resolves an embedding-RBF bandwidth against a layer-1 Gram.
fn resolve_gamma(level1: &GramMatrix, spec: &GroupKernelSpec, gamma: GammaParam) -> Result<f64> {
    match gamma {
        GammaParam::Fixed(g) => Ok(g),
        GammaParam::MatchSigma => Ok(spec.base.sigma),
        GammaParam::MedianRkhs => {
            let l = level1.len();
            if l < 2 {
                return Err(Error::invalid(
                    "median RKHS gamma needs at least 2 groups; pass a fixed gamma",
                ));
            }
            let mut d2s = Vec::with_capacity(l * (l - 1) / 2);
            for i in 0..l {
                for j in (i + 1)..l {
                    let d2 = (level1.get(i, i) + level1.get(j, j)) - 2.0 * level1.get(i, j);
                    d2s.push(d2.max(0.0));
                }
            }
            let med = median_in_place(&mut d2s);
            if !(med > 0.0) {
                return Err(Error::invalid(
                    "median RKHS distance is zero (identical embeddings); pass a fixed gamma",
                ));
            }
            Ok(med.sqrt())
        }
    }
}

// ---------------------------------------------------------------------------
// Median heuristic
// ---------------------------------------------------------------------------

/// Median of a slice: middle element, or the mean of the two middle
/// elements for an even count. Reorders the slice.
fn median_in_place(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    let n = values.len();
    let mid = n / 2;
    let (left, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        *upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + *upper) / 2.0
    }
}

/// Median of the squared distances over all distinct point pairs pooled
/// across groups (self-pairs excluded, within-group pairs included).
/// Returns sigma^2; callers take the square root for a bandwidth.
pub fn median_heuristic(groups: &[Group]) -> Result<f64> {
    let points: Vec<&[f64]> = groups
        .iter()
        .flat_map(|g| g.points.iter().map(|p| p.as_slice()))
        .collect();
    let n = points.len();
    if n < 2 {
        return Err(Error::invalid("median heuristic needs at least 2 points"));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::invalid("dimension mismatch between points"));
    }
    let pair_count = n * (n - 1) / 2;
    if pair_count <= MEDIAN_BUFFER_CAP {
        let mut buf = Vec::with_capacity(pair_count);
        for i in 0..n {
            for j in (i + 1)..n {
                buf.push(sq_dist(points[i], points[j]));
            }
        }
        Ok(median_in_place(&mut buf))
    } else {
        Ok(median_sq_dist_counting(&points, pair_count))
    }
}

/// The median heuristic corrected for known per-point measurement noise:
/// the median of `d^2_ij - d (omega_i + omega_j)` over all distinct pairs
/// (clamped at zero per pair). With isotropic noise of variance `omega` per
/// coordinate, `d (omega_i + omega_j)` is exactly the expected inflation of
/// the squared distance, so this recovers the clean-data scale that the
/// plain heuristic overestimates. Points without an uncertainty contribute
/// no correction.
pub fn median_heuristic_noise_corrected(groups: &[Group]) -> Result<f64> {
    let mut points: Vec<(&[f64], f64)> = Vec::new();
    for g in groups {
        for (k, p) in g.points.iter().enumerate() {
            let w = g.omega.as_ref().map_or(0.0, |o| o[k]);
            points.push((p.as_slice(), w));
        }
    }
    let n = points.len();
    if n < 2 {
        return Err(Error::invalid("median heuristic needs at least 2 points"));
    }
    let d = points[0].0.len() as f64;
    let pair_count = n * (n - 1) / 2;
    if pair_count > MEDIAN_BUFFER_CAP {
        return Err(Error::invalid(
            "noise-corrected median heuristic supports at most 2^27 point pairs",
        ));
    }
    let mut buf = Vec::with_capacity(pair_count);
    for i in 0..n {
        for j in (i + 1)..n {
            let raw = sq_dist(points[i].0, points[j].0);
            buf.push((raw - d * (points[i].1 + points[j].1)).max(0.0));
        }
    }
    let med = median_in_place(&mut buf);
    if !(med > 0.0) {
        return Err(Error::invalid(
            "noise-corrected median is zero; the measurement noise dominates the data scale",
        ));
    }
    Ok(med)
}

/// Exact median selection without materializing all pairs: binary search on
/// the bit pattern of the answer (non-negative f64 order matches u64 order),
/// counting pairs at or below each candidate. Slow but memory-flat; only
/// used beyond [`MEDIAN_BUFFER_CAP`] pairs.
fn median_sq_dist_counting(points: &[&[f64]], pair_count: usize) -> f64 {
    let n = points.len();
    let count_le = |v: f64| -> usize {
        let mut c = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if sq_dist(points[i], points[j]) <= v {
                    c += 1;
                }
            }
        }
        c
    };
    // kth smallest (0-based) = smallest value v with count_le(v) >= k + 1
    let kth = |k: usize| -> f64 {
        let (mut lo, mut hi) = (0u64, f64::MAX.to_bits());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if count_le(f64::from_bits(mid)) >= k + 1 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        f64::from_bits(lo)
    };
    if pair_count % 2 == 1 {
        kth(pair_count / 2)
    } else {
        (kth(pair_count / 2 - 1) + kth(pair_count / 2)) / 2.0
    }
}
