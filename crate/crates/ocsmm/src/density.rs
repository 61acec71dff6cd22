//! Density estimation over the input space: fixed-bandwidth KDE, the
//! balloon and sample-smoothing variable-bandwidth estimators, and the
//! estimator induced by a fitted detector with the analytic Gaussian
//! kernel.
//!
//! With uniform weights the detector's kernel expansion is, summand by
//! summand, a Gaussian of combined bandwidth `sigma^2 + sigma_i^2 +
//! sigma_t^2` times the constant `(2 pi sigma^2)^{d/2}`; dividing by that
//! constant therefore turns the expansion into a proper mixture density.
//! That is what `normalized` toggles, and what makes the estimators here
//! agree exactly on their overlaps.

use crate::data::Group;
use crate::error::{Error, Result};
use crate::kernel::{level1_inner, Level1, Level2};
use crate::linalg::sq_dist;
use crate::model::OcsmmModel;

use std::f64::consts::PI;

/// Isotropic Gaussian density `N(y; center, variance * I)`.
#[inline]
fn gaussian_density(y: &[f64], center: &[f64], variance: f64) -> f64 {
    let d = y.len() as f64;
    let norm = (2.0 * PI * variance).powf(-d / 2.0);
    norm * (-sq_dist(y, center) / (2.0 * variance)).exp()
}

/// Uniform mixture of isotropic Gaussians with per-center variances.
/// All estimators below funnel through this one loop, so reductions
/// between them are exact.
fn mixture_density(centers: &[Vec<f64>], var_of: impl Fn(usize) -> f64, y: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (i, c) in centers.iter().enumerate() {
        sum += gaussian_density(y, c, var_of(i));
    }
    sum / centers.len() as f64
}

fn check_query(centers: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::invalid("no centers"));
    }
    if centers[0].len() != y.len() {
        return Err(Error::invalid(format!(
            "query dimension {} does not match centers dimension {}",
            y.len(),
            centers[0].len()
        )));
    }
    Ok(())
}

/// Fixed-bandwidth KDE with a normalized Gaussian kernel:
/// `(1/n) sum_i N(y; x_i, h^2 I)`.
pub fn kde_eval(centers: &[Vec<f64>], h: f64, y: &[f64]) -> Result<f64> {
    check_query(centers, y)?;
    if !(h > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    Ok(mixture_density(centers, |_| h * h, y))
}

/// Sample-smoothing estimator: each center carries its own bandwidth,
/// `(1/n) sum_i N(y; x_i, sigma_i^2 I)`.
pub fn vkde_sample_smoothing(centers: &[Vec<f64>], sigmas: &[f64], y: &[f64]) -> Result<f64> {
    check_query(centers, y)?;
    if sigmas.len() != centers.len() {
        return Err(Error::invalid(format!(
            "{} bandwidths for {} centers",
            sigmas.len(),
            centers.len()
        )));
    }
    if sigmas.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::invalid("per-point bandwidths must be positive"));
    }
    Ok(mixture_density(centers, |i| sigmas[i] * sigmas[i], y))
}

/// Balloon estimator: the bandwidth widens with the query's uncertainty,
/// `(1/n) sum_i N(y; x_i, (base^2 + test^2) I)`.
pub fn vkde_balloon(centers: &[Vec<f64>], base_sigma: f64, test_sigma: f64, y: &[f64]) -> Result<f64> {
    check_query(centers, y)?;
    if !(base_sigma > 0.0) {
        return Err(Error::invalid(format!("base bandwidth must be positive, got {base_sigma}")));
    }
    if !(test_sigma >= 0.0) {
        return Err(Error::invalid(format!("test bandwidth must be >= 0, got {test_sigma}")));
    }
    let var = base_sigma * base_sigma + test_sigma * test_sigma;
    Ok(mixture_density(centers, |_| var, y))
}

/// Density induced by a fitted detector with the analytic Gaussian kernel:
/// `sum_i alpha_i K(P_i, N(y; sigma_t^2 I))`, optionally divided by
/// `(2 pi sigma^2)^{d/2}` so each summand becomes a proper Gaussian
/// density of combined bandwidth. The offset `rho` plays no role here.
pub fn ocsmm_density(model: &OcsmmModel, test_sigma: f64, y: &[f64], normalized: bool) -> Result<f64> {
    let spec = model.spec();
    if spec.level1 != Level1::GaussianAnalytic
        || spec.level2 != Level2::Linear
        || spec.normalize
    {
        return Err(Error::invalid(
            "density requires an analytic-kernel model with linear layer 2 and no normalization",
        ));
    }
    if !(test_sigma >= 0.0) {
        return Err(Error::invalid(format!("test bandwidth must be >= 0, got {test_sigma}")));
    }
    let query = Group::from_points_with_omega("query", vec![y.to_vec()], vec![test_sigma * test_sigma]);
    let mut sum = 0.0;
    for (sv, &a) in model.support_groups().iter().zip(model.alpha()) {
        sum += a * level1_inner(sv, &query, spec)?;
    }
    if normalized {
        let d = y.len() as f64;
        let sigma = spec.base.sigma;
        sum /= (2.0 * PI * sigma * sigma).powf(d / 2.0);
    }
    Ok(sum)
}

/// A density estimator bundled with its data, for grid evaluation and ISE
/// measurement.
#[derive(Debug)]
pub enum DensityModel {
    FixedKde { centers: Vec<Vec<f64>>, bandwidth: f64 },
    Balloon { centers: Vec<Vec<f64>>, base_sigma: f64, test_sigma: f64 },
    SampleSmoothing { centers: Vec<Vec<f64>>, sigmas: Vec<f64> },
    OcsmmInduced { model: OcsmmModel, test_sigma: f64, normalized: bool },
}

impl DensityModel {
    pub fn fixed_kde(centers: Vec<Vec<f64>>, bandwidth: f64) -> Result<Self> {
        kde_eval(&centers, bandwidth, &vec![0.0; centers.first().map_or(1, |c| c.len())])?;
        Ok(DensityModel::FixedKde { centers, bandwidth })
    }

    pub fn balloon(centers: Vec<Vec<f64>>, base_sigma: f64, test_sigma: f64) -> Result<Self> {
        vkde_balloon(&centers, base_sigma, test_sigma, &vec![0.0; centers.first().map_or(1, |c| c.len())])?;
        Ok(DensityModel::Balloon { centers, base_sigma, test_sigma })
    }

    pub fn sample_smoothing(centers: Vec<Vec<f64>>, sigmas: Vec<f64>) -> Result<Self> {
        vkde_sample_smoothing(&centers, &sigmas, &vec![0.0; centers.first().map_or(1, |c| c.len())])?;
        Ok(DensityModel::SampleSmoothing { centers, sigmas })
    }

    pub fn ocsmm(model: OcsmmModel, test_sigma: f64, normalized: bool) -> Result<Self> {
        let d = model
            .support_groups()
            .first()
            .and_then(|g| g.dim())
            .ok_or_else(|| Error::invalid("model has no support groups"))?;
        ocsmm_density(&model, test_sigma, &vec![0.0; d], normalized)?;
        Ok(DensityModel::OcsmmInduced { model, test_sigma, normalized })
    }

    pub fn dim(&self) -> usize {
        match self {
            DensityModel::FixedKde { centers, .. }
            | DensityModel::Balloon { centers, .. }
            | DensityModel::SampleSmoothing { centers, .. } => centers[0].len(),
            DensityModel::OcsmmInduced { model, .. } => {
                model.support_groups()[0].dim().unwrap_or(0)
            }
        }
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        match self {
            DensityModel::FixedKde { centers, bandwidth } => kde_eval(centers, *bandwidth, y),
            DensityModel::Balloon { centers, base_sigma, test_sigma } => {
                vkde_balloon(centers, *base_sigma, *test_sigma, y)
            }
            DensityModel::SampleSmoothing { centers, sigmas } => {
                vkde_sample_smoothing(centers, sigmas, y)
            }
            DensityModel::OcsmmInduced { model, test_sigma, normalized } => {
                ocsmm_density(model, *test_sigma, y, *normalized)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Grids and quadrature
// ---------------------------------------------------------------------------

/// Rectangular evaluation grid: per-axis ranges with a common node count.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    /// Nodes per axis.
    pub nodes: usize,
}

impl GridSpec {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>, nodes: usize) -> Result<Self> {
        if mins.len() != maxs.len() || mins.is_empty() {
            return Err(Error::invalid("grid mins and maxs must match and be non-empty"));
        }
        if nodes < 2 {
            return Err(Error::invalid("grid needs at least 2 nodes per axis"));
        }
        if mins.iter().zip(&maxs).any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::invalid("grid mins must be strictly below maxs"));
        }
        Ok(GridSpec { mins, maxs, nodes })
    }

    /// Bounding box of the points, extended by `margin` on every side.
    pub fn around(points: &[Vec<f64>], margin: f64, nodes: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("no points to bound"));
        }
        let d = points[0].len();
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for p in points {
            for k in 0..d {
                mins[k] = mins[k].min(p[k]);
                maxs[k] = maxs[k].max(p[k]);
            }
        }
        for k in 0..d {
            mins[k] -= margin;
            maxs[k] += margin;
        }
        GridSpec::new(mins, maxs, nodes)
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    fn axis(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        let step = (self.maxs[k] - self.mins[k]) / (self.nodes - 1) as f64;
        (0..self.nodes).map(move |i| self.mins[k] + i as f64 * step)
    }

    /// All grid points in row-major order (last axis fastest).
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self.dim() {
            1 => self.axis(0).map(|x| vec![x]).collect(),
            2 => {
                let ys: Vec<f64> = self.axis(1).collect();
                self.axis(0)
                    .flat_map(|x| ys.iter().map(move |&y| vec![x, y]))
                    .collect()
            }
            d => panic!("grids are supported for d <= 2, got {d}"),
        }
    }

    /// Tensor-product trapezoid integral of `f` over the grid.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.try_integrate(|y| Ok(f(y))).expect("infallible integrand")
    }

    /// [`GridSpec::integrate`] with a fallible integrand.
    pub fn try_integrate(&self, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
        let n = self.nodes;
        let edge_weight = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        match self.dim() {
            1 => {
                let h = (self.maxs[0] - self.mins[0]) / (n - 1) as f64;
                let mut total = 0.0;
                for (i, x) in self.axis(0).enumerate() {
                    total += edge_weight(i) * f(&[x])?;
                }
                Ok(total * h)
            }
            2 => {
                let hx = (self.maxs[0] - self.mins[0]) / (n - 1) as f64;
                let hy = (self.maxs[1] - self.mins[1]) / (n - 1) as f64;
                let ys: Vec<f64> = self.axis(1).collect();
                let mut total = 0.0;
                for (i, x) in self.axis(0).enumerate() {
                    let wx = edge_weight(i);
                    for (j, &y) in ys.iter().enumerate() {
                        total += wx * edge_weight(j) * f(&[x, y])?;
                    }
                }
                Ok(total * hx * hy)
            }
            d => Err(Error::invalid(format!("quadrature is supported for d <= 2, got {d}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::GroupKernelSpec;
    use crate::model::{fit, FitConfig};
    use crate::rng::Stream;

    fn centers_1d(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn kde_single_center_at_peak() {
        let c = centers_1d(&[0.7]);
        let v = kde_eval(&c, 0.4, &[0.7]).unwrap();
        let expected = 1.0 / (0.4 * (2.0 * PI).sqrt());
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn kde_two_centers_midpoint() {
        let c = centers_1d(&[-1.0, 1.0]);
        let v = kde_eval(&c, 1.0, &[0.0]).unwrap();
        let expected = (-0.5f64).exp() / (2.0 * PI).sqrt();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.24197072451914337).abs() < 1e-12);
    }

    #[test]
    fn kde_integrates_to_one() {
        let c = centers_1d(&[-0.5, 0.3, 1.2]);
        let h = 0.6;
        let grid = GridSpec::new(vec![-0.5 - 8.0 * h], vec![1.2 + 8.0 * h], 2001).unwrap();
        let total = grid.integrate(|y| kde_eval(&c, h, y).unwrap());
        assert!((total - 1.0).abs() < 1e-3, "integral {total}");
    }

    #[test]
    fn kde_rejects_empty_and_bad_bandwidth() {
        assert!(kde_eval(&[], 1.0, &[0.0]).is_err());
        assert!(kde_eval(&centers_1d(&[0.0]), 0.0, &[0.0]).is_err());
    }

    #[test]
    fn smoothing_with_equal_sigmas_equals_kde_exactly() {
        let c = vec![vec![0.0, 0.0], vec![1.0, -0.5], vec![0.3, 0.8]];
        let h = 0.45;
        let sigmas = vec![h; 3];
        for y in [[0.0, 0.0], [0.5, 0.5], [-1.0, 2.0]] {
            let a = kde_eval(&c, h, &y).unwrap();
            let b = vkde_sample_smoothing(&c, &sigmas, &y).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn smoothing_single_center_is_gaussian() {
        let c = vec![vec![0.3, -0.2]];
        let v = vkde_sample_smoothing(&c, &[0.5], &[0.3, -0.2]).unwrap();
        let expected = 1.0 / (2.0 * PI * 0.25);
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn balloon_zero_test_sigma_is_kde_exactly() {
        let c = vec![vec![0.0], vec![2.0]];
        for y in [[0.1], [1.0], [3.0]] {
            let a = vkde_balloon(&c, 0.7, 0.0, &y).unwrap();
            let b = kde_eval(&c, 0.7, &y).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn balloon_pythagorean_combination() {
        let c = vec![vec![0.0], vec![1.5]];
        for y in [[0.0], [0.7], [2.0]] {
            let a = vkde_balloon(&c, 0.3, 0.4, &y).unwrap();
            let b = kde_eval(&c, 0.5, &y).unwrap();
            assert!((a - b).abs() <= 1e-15 * b);
        }
    }

    #[test]
    fn balloon_flattens_as_test_sigma_grows() {
        let c = vec![vec![0.0], vec![1.0]];
        let grid = GridSpec::new(vec![-3.0], vec![4.0], 101).unwrap();
        let max_at = |t: f64| -> f64 {
            grid.points()
                .iter()
                .map(|y| vkde_balloon(&c, 0.4, t, y).unwrap())
                .fold(0.0, f64::max)
        };
        let mut prev = max_at(0.0);
        for t in [0.5, 1.0, 2.0, 4.0] {
            let cur = max_at(t);
            assert!(cur < prev, "max did not decrease at test sigma {t}");
            prev = cur;
        }
    }

    fn dirac_groups(points: &[Vec<f64>], omega: Option<&[f64]>) -> Vec<Group> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| match omega {
                Some(w) => Group::from_points_with_omega(format!("p{i}"), vec![p.clone()], vec![w[i]]),
                None => Group::from_points(format!("p{i}"), vec![p.clone()]),
            })
            .collect()
    }

    #[test]
    fn ocsmm_density_nu1_equal_widths_matches_kde() {
        let mut stream = Stream::new(4);
        let points: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![stream.standard_normal(), stream.standard_normal()])
            .collect();
        let w = 0.09;
        let sigma = 0.5;
        let groups = dirac_groups(&points, Some(&vec![w; 40]));
        let spec = GroupKernelSpec::analytic(sigma).unwrap();
        let model = fit(&groups, &spec, 1.0, &FitConfig::default()).unwrap();
        let h = (sigma * sigma + w).sqrt();
        let grid = GridSpec::new(vec![-3.0, -3.0], vec![3.0, 3.0], 10).unwrap();
        for y in grid.points() {
            let a = ocsmm_density(&model, 0.0, &y, true).unwrap();
            let b = kde_eval(&points, h, &y).unwrap();
            assert!((a - b).abs() <= 1e-10 * b.max(1e-300), "at {y:?}: {a} vs {b}");
        }
    }

    #[test]
    fn ocsmm_density_nu1_varying_widths_matches_sample_smoothing() {
        let mut stream = Stream::new(8);
        let points: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![stream.standard_normal()])
            .collect();
        let omegas: Vec<f64> = (0..30).map(|_| stream.uniform(0.05, 0.4)).collect();
        let sigma = 0.4;
        let groups = dirac_groups(&points, Some(&omegas));
        let spec = GroupKernelSpec::analytic(sigma).unwrap();
        let model = fit(&groups, &spec, 1.0, &FitConfig::default()).unwrap();
        let widths: Vec<f64> = omegas.iter().map(|w| (sigma * sigma + w).sqrt()).collect();
        for y in GridSpec::new(vec![-3.0], vec![3.0], 50).unwrap().points() {
            let a = ocsmm_density(&model, 0.0, &y, true).unwrap();
            let b = vkde_sample_smoothing(&points, &widths, &y).unwrap();
            assert!((a - b).abs() <= 1e-10 * b.max(1e-300), "at {y:?}: {a} vs {b}");
        }
    }

    #[test]
    fn ocsmm_density_combined_case() {
        let mut stream = Stream::new(12);
        let points: Vec<Vec<f64>> = (0..25)
            .map(|_| vec![stream.standard_normal()])
            .collect();
        let omegas: Vec<f64> = (0..25).map(|_| stream.uniform(0.05, 0.4)).collect();
        let sigma = 0.4;
        let test_sigma = 0.3;
        let groups = dirac_groups(&points, Some(&omegas));
        let spec = GroupKernelSpec::analytic(sigma).unwrap();
        let model = fit(&groups, &spec, 1.0, &FitConfig::default()).unwrap();
        for y in GridSpec::new(vec![-3.0], vec![3.0], 50).unwrap().points() {
            let a = ocsmm_density(&model, test_sigma, &y, true).unwrap();
            let direct: f64 = points
                .iter()
                .zip(&omegas)
                .map(|(p, w)| {
                    gaussian_density(&y, p, sigma * sigma + w + test_sigma * test_sigma)
                })
                .sum::<f64>()
                / 25.0;
            assert!((a - direct).abs() <= 1e-10 * direct.max(1e-300));
        }
    }

    #[test]
    fn ocsmm_density_sparse_and_nonnegative_below_nu1() {
        let mut stream = Stream::new(16);
        let points: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![stream.standard_normal(), stream.standard_normal()])
            .collect();
        let groups = dirac_groups(&points, Some(&vec![0.1; 30]));
        let spec = GroupKernelSpec::analytic(0.5).unwrap();
        let model = fit(&groups, &spec, 0.3, &FitConfig::default()).unwrap();
        assert!(model.support_groups().len() < 30);
        for y in GridSpec::new(vec![-3.0, -3.0], vec![3.0, 3.0], 8).unwrap().points() {
            let v = ocsmm_density(&model, 0.0, &y, true).unwrap();
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn ocsmm_density_rejects_wrong_spec() {
        let groups = dirac_groups(&[vec![0.0], vec![1.0]], None);
        let spec = GroupKernelSpec::empirical(1.0).unwrap();
        let model = fit(&groups, &spec, 1.0, &FitConfig::default()).unwrap();
        assert!(ocsmm_density(&model, 0.0, &[0.0], true).is_err());
    }

    #[test]
    fn normalized_ocsmm_density_integrates_to_one() {
        let mut stream = Stream::new(20);
        let points: Vec<Vec<f64>> = (0..25)
            .map(|_| vec![stream.standard_normal(), 0.5 * stream.standard_normal()])
            .collect();
        let omegas: Vec<f64> = (0..25).map(|_| stream.uniform(0.2, 0.3)).collect();
        let sigma = 0.4;
        let groups = dirac_groups(&points, Some(&omegas));
        let spec = GroupKernelSpec::analytic(sigma).unwrap();
        let model = fit(&groups, &spec, 1.0, &FitConfig::default()).unwrap();
        let margin = 8.0 * (sigma * sigma + 0.3f64).sqrt();
        let grid = GridSpec::around(&points, margin, 401).unwrap();
        let total = grid.integrate(|y| ocsmm_density(&model, 0.0, y, true).unwrap());
        assert!((total - 1.0).abs() < 2e-2, "integral {total}");
    }

    #[test]
    fn grid_points_row_major_and_sized() {
        let grid = GridSpec::new(vec![0.0, 10.0], vec![1.0, 12.0], 3).unwrap();
        let pts = grid.points();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![0.0, 10.0]);
        assert_eq!(pts[1], vec![0.0, 11.0]);
        assert_eq!(pts[8], vec![1.0, 12.0]);
    }
}
