//! Small dense linear-algebra helpers used by the kernel layer.
//!
//! Matrices here are tiny (input-space dimension for the analytic kernel,
//! group count for the Gram PSD check), so a plain row-major `Vec<f64>`
//! Cholesky is all we need.

/// In-place Cholesky factorization of a symmetric matrix stored row-major.
///
/// On success the lower triangle holds `L` with `A = L Lᵀ`; the strict upper
/// triangle is left untouched. Returns `Err(())` on a non-positive pivot.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<(), ()> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(());
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// Forward substitution `L y = x` for a lower-triangular factor produced by
/// [`cholesky_in_place`]. Overwrites `x` with `y`.
pub(crate) fn forward_solve_in_place(l: &[f64], n: usize, x: &mut [f64]) {
    debug_assert_eq!(x.len(), n);
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
}

/// Sum of a slice by pairwise (tree) reduction.
///
/// Fixed scheme: blocks of up to 32 are summed sequentially, larger slices
/// split in half. The result depends only on the slice contents, never on
/// any caller-side blocking.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut s = 0.0;
    for k in 0..x.len() {
        let d = x[k] - y[k];
        s += d * d;
    }
    s
}
