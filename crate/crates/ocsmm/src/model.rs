//! The fitted one-class detector over groups: fit on a dataset, score test
//! groups, flag anomalies, verify the nu-property, persist to a
//! self-describing model file.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Group, GroupRecord};
use crate::error::{Error, Result};
use crate::kernel::{
    embedding_rbf, gram_matrix, level1_inner, GammaParam, GramMatrix, GroupKernelSpec, Level2,
};
use crate::solver::{solve_dual, DualProblem, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Solver parameters carried through a fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitConfig {
    pub tol: f64,
    pub max_iter: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// Diagnostics of a completed fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    /// `1/2 a^T K a` at the solution.
    pub objective: f64,
    pub iterations: u64,
    pub converged: bool,
    pub nu: f64,
    /// Training set size.
    pub num_groups: usize,
    /// Sum of alpha over the full training set (support storage drops the
    /// zero tail, so the stored weights may sum to slightly less).
    pub alpha_sum: f64,
    /// KKT tolerance the solver ran with.
    pub tol: f64,
    /// Diagonal jitter added by the PSD repair, if any.
    pub psd_jitter: f64,
}

/// Immutable fitted detector: support groups with their weights, the
/// offset, and the (fully resolved) kernel spec.
#[derive(Debug, Clone)]
pub struct OcsmmModel {
    spec: GroupKernelSpec,
    support: Vec<Group>,
    alpha: Vec<f64>,
    rho: f64,
    /// Cached layer-1 self inner products of the support groups.
    support_self_inner: Vec<f64>,
    report: FitReport,
}

/// Per-group decision values over a dataset, with ranks and labels.
#[derive(Debug, Clone)]
pub struct ScoredDataset {
    pub group_ids: Vec<String>,
    pub decision: Vec<f64>,
    /// `decision < 0`.
    pub is_anomaly: Vec<bool>,
    /// `rank[i]` = position of group `i` in ascending decision order
    /// (0 = most anomalous); ties break by group index.
    pub rank: Vec<usize>,
    pub labels: Option<Vec<bool>>,
}

/// Outcome of the nu-property check on a training set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuPropertyReport {
    pub nu: f64,
    pub outlier_fraction: f64,
    pub sv_fraction: f64,
    pub holds: bool,
}

/// Fits the detector: Gram assembly, PSD repair, dual solve, support
/// extraction. Non-convergence is reported in the fit report, not raised.
pub fn fit(
    dataset: &[Group],
    spec: &GroupKernelSpec,
    nu: f64,
    config: &FitConfig,
) -> Result<OcsmmModel> {
    let mut gram = gram_matrix(dataset, spec)?;
    let jitter = gram.ensure_psd()?;
    fit_prepared(dataset, &gram, nu, config, jitter)
}

/// Fit step shared with the sweep path: the Gram is already assembled,
/// repaired, and carries the resolved spec.
pub(crate) fn fit_prepared(
    dataset: &[Group],
    gram: &GramMatrix,
    nu: f64,
    config: &FitConfig,
    psd_jitter: f64,
) -> Result<OcsmmModel> {
    let spec = *gram
        .spec()
        .ok_or_else(|| Error::invalid("Gram matrix lacks a kernel spec"))?;
    let problem = DualProblem::new(gram, nu)
        .with_tol(config.tol)
        .with_max_iter(config.max_iter);
    let solution = solve_dual(&problem)?;

    let mut support = Vec::new();
    let mut alpha = Vec::new();
    for &i in &solution.sv_index {
        support.push(dataset[i].clone());
        alpha.push(solution.alpha[i]);
    }
    let report = FitReport {
        objective: solution.objective,
        iterations: solution.iterations,
        converged: solution.converged,
        nu,
        num_groups: dataset.len(),
        alpha_sum: solution.alpha.iter().sum(),
        tol: config.tol,
        psd_jitter,
    };
    OcsmmModel::assemble(spec, support, alpha, solution.rho, report)
}

impl OcsmmModel {
    fn assemble(
        spec: GroupKernelSpec,
        support: Vec<Group>,
        alpha: Vec<f64>,
        rho: f64,
        report: FitReport,
    ) -> Result<Self> {
        spec.validate()?;
        if !spec.is_resolved() {
            return Err(Error::invalid("model spec has unresolved parameters"));
        }
        if support.is_empty() || support.len() != alpha.len() {
            return Err(Error::invalid("support groups and weights do not match"));
        }
        if alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid("support weights must be positive"));
        }
        if !rho.is_finite() {
            return Err(Error::numerical("non-finite offset"));
        }
        let support_self_inner = support
            .iter()
            .map(|g| level1_inner(g, g, &spec))
            .collect::<Result<Vec<f64>>>()?;
        if spec.normalize && support_self_inner.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::numerical("non-positive self inner product under normalization"));
        }
        Ok(OcsmmModel { spec, support, alpha, rho, support_self_inner, report })
    }

    pub fn spec(&self) -> &GroupKernelSpec {
        &self.spec
    }

    pub fn support_groups(&self) -> &[Group] {
        &self.support
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn fit_report(&self) -> &FitReport {
        &self.report
    }

    /// Layer-1 self inner products of the support groups, in support order.
    pub fn support_self_inner(&self) -> &[f64] {
        &self.support_self_inner
    }

    /// Decision value `sum_i alpha_i K(P_i, P) - rho`; negative means
    /// anomalous.
    pub fn decision(&self, group: &Group) -> Result<f64> {
        group.validate()?;
        let needs_self = self.spec.normalize
            || matches!(self.spec.level2, Level2::EmbeddingRbf { .. });
        let test_self = if needs_self {
            level1_inner(group, group, &self.spec)?
        } else {
            1.0
        };
        if self.spec.normalize && !(test_self > 0.0) {
            return Err(Error::numerical("non-positive self inner product under normalization"));
        }
        let mut sum = 0.0;
        for (i, sv) in self.support.iter().enumerate() {
            let k1 = level1_inner(sv, group, &self.spec)?;
            sum += self.alpha[i] * self.level2_value(i, k1, test_self)?;
        }
        Ok(sum - self.rho)
    }

    fn level2_value(&self, i: usize, k1: f64, test_self: f64) -> Result<f64> {
        let gamma = match self.spec.level2 {
            Level2::Linear => None,
            Level2::EmbeddingRbf { gamma: GammaParam::Fixed(g) } => Some(g),
            Level2::EmbeddingRbf { .. } => {
                return Err(Error::invalid("model spec has unresolved gamma"))
            }
        };
        let (kii, kjj, kij) = if self.spec.normalize {
            let k1n = k1 / (self.support_self_inner[i] * test_self).sqrt();
            (1.0, 1.0, k1n)
        } else {
            (self.support_self_inner[i], test_self, k1)
        };
        match gamma {
            None => Ok(kij),
            Some(g) => embedding_rbf(kii, kjj, kij, g),
        }
    }

    /// Applies [`OcsmmModel::decision`] to a dataset. Deterministic; may
    /// evaluate groups in parallel.
    pub fn score_dataset(&self, dataset: &[Group]) -> Result<ScoredDataset> {
        if dataset.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        let decision: Vec<f64> = dataset
            .par_iter()
            .map(|g| self.decision(g))
            .collect::<Result<Vec<f64>>>()?;
        Ok(ScoredDataset::from_decisions(dataset, decision))
    }

    /// Checks that the training outlier fraction stays at or below
    /// `nu + 1/l` and the support fraction at or above `nu - 1/l`.
    /// Outliers are counted with the solver tolerance as slack.
    pub fn nu_property_check(&self, training: &[Group]) -> Result<NuPropertyReport> {
        let scored = self.score_dataset(training)?;
        let l = training.len() as f64;
        let tol = self.report.tol;
        let outliers = scored.decision.iter().filter(|&&d| d < -tol).count();
        let outlier_fraction = outliers as f64 / l;
        let sv_fraction = self.support.len() as f64 / l;
        let nu = self.report.nu;
        Ok(NuPropertyReport {
            nu,
            outlier_fraction,
            sv_fraction,
            holds: outlier_fraction <= nu + 1.0 / l && sv_fraction >= nu - 1.0 / l,
        })
    }

    /// Writes the model as a single self-describing JSON document.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            kind: "ocsmm-model".into(),
            spec: self.spec,
            rho: self.rho,
            alpha: self.alpha.clone(),
            support_groups: self.support.iter().map(GroupRecord::from_group).collect(),
            fit_report: self.report.clone(),
        };
        let out = File::create(path.as_ref())?;
        let mut writer = BufWriter::new(out);
        serde_json::to_writer_pretty(&mut writer, &file)
            .map_err(|e| Error::invalid(format!("model serialization failed: {e}")))?;
        use std::io::Write;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }

    /// Loads and revalidates a model file written by [`OcsmmModel::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        let reader = BufReader::new(file);
        let parsed: ModelFile = serde_json::from_reader(reader)
            .map_err(|e| Error::Parse { line: 0, message: format!("model file: {e}") })?;
        if parsed.kind != "ocsmm-model" {
            return Err(Error::invalid(format!("not a model file (kind '{}')", parsed.kind)));
        }
        if parsed.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                parsed.format_version
            )));
        }
        let support = parsed
            .support_groups
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.into_group(i + 1))
            .collect::<Result<Vec<Group>>>()?;
        OcsmmModel::assemble(parsed.spec, support, parsed.alpha, parsed.rho, parsed.fit_report)
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: String,
    spec: GroupKernelSpec,
    rho: f64,
    alpha: Vec<f64>,
    support_groups: Vec<GroupRecord>,
    fit_report: FitReport,
}

impl ScoredDataset {
    pub(crate) fn from_decisions(dataset: &[Group], decision: Vec<f64>) -> Self {
        let n = decision.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| decision[a].total_cmp(&decision[b]).then(a.cmp(&b)));
        let mut rank = vec![0usize; n];
        for (pos, &idx) in order.iter().enumerate() {
            rank[idx] = pos;
        }
        let labels = if dataset.iter().any(|g| g.label.is_some()) {
            Some(dataset.iter().map(|g| g.label.unwrap_or(false)).collect())
        } else {
            None
        };
        ScoredDataset {
            group_ids: dataset.iter().map(|g| g.id.clone()).collect(),
            is_anomaly: decision.iter().map(|&d| d < 0.0).collect(),
            rank,
            decision,
            labels,
        }
    }

    /// Anomaly scores for ranking metrics: higher = more anomalous.
    pub fn anomaly_scores(&self) -> Vec<f64> {
        self.decision.iter().map(|d| -d).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_rotated_gaussians;
    use crate::kernel::{BaseKernel, GammaParam, GroupKernelSpec};
    use crate::rng::Stream;
    use crate::solver::gram_scores;

    fn random_point_group(stream: &mut Stream, id: &str, n: usize, center: f64) -> Group {
        let points = (0..n)
            .map(|_| vec![center + stream.standard_normal(), stream.standard_normal()])
            .collect();
        Group::from_points(id, points)
    }

    #[test]
    fn single_group_fit_is_degenerate() {
        let g = Group::from_points("a", vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let spec = GroupKernelSpec::empirical(1.0).unwrap();
        let model = fit(&[g.clone()], &spec, 0.5, &FitConfig::default()).unwrap();
        assert_eq!(model.alpha(), &[1.0]);
        let k_self = level1_inner(&g, &g, &spec).unwrap();
        assert_eq!(model.rho(), k_self);
        assert_eq!(model.decision(&g).unwrap(), 0.0);
    }

    #[test]
    fn nu_one_dirac_groups_uniform_alpha() {
        let mut stream = Stream::new(3);
        let groups: Vec<Group> = (0..15)
            .map(|i| {
                Group::from_points(
                    format!("g{i}"),
                    vec![vec![stream.standard_normal(), stream.standard_normal()]],
                )
            })
            .collect();
        let spec = GroupKernelSpec::empirical(1.0).unwrap();
        let model = fit(&groups, &spec, 1.0, &FitConfig::default()).unwrap();
        assert_eq!(model.alpha().len(), 15);
        for &a in model.alpha() {
            assert!((a - 1.0 / 15.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn ocsvm_reduction_on_singleton_groups() {
        let mut stream = Stream::new(11);
        for trial in 0..10 {
            let n = 8 + trial % 5;
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![stream.uniform(0.0, 2.0), stream.uniform(0.0, 2.0)])
                .collect();
            let groups: Vec<Group> = points
                .iter()
                .enumerate()
                .map(|(i, p)| Group::from_points(format!("p{i}"), vec![p.clone()]))
                .collect();
            let sigma = crate::kernel::median_heuristic(&groups).unwrap().sqrt();
            let spec = GroupKernelSpec::empirical(sigma).unwrap();
            let model = fit(&groups, &spec, 0.4, &FitConfig::default()).unwrap();

            // Same solver on the raw point Gram.
            let base = BaseKernel::gaussian(sigma).unwrap();
            let mut entries = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    entries[i * n + j] = base.eval(&points[i], &points[j]);
                }
            }
            let mut gram = GramMatrix::from_entries(entries, n).unwrap();
            gram.ensure_psd().unwrap();
            let sol = solve_dual(&DualProblem::new(&gram, 0.4)).unwrap();

            assert!((model.rho() - sol.rho).abs() <= 1e-10, "trial {trial}");
            let mut full_alpha = vec![0.0; n];
            for (g, &a) in model.support_groups().iter().zip(model.alpha()) {
                let idx: usize = g.id[1..].parse().unwrap();
                full_alpha[idx] = a;
            }
            for i in 0..n {
                assert!((full_alpha[i] - sol.alpha[i]).abs() <= 1e-10, "trial {trial} alpha {i}");
            }
        }
    }

    #[test]
    fn normalized_fit_has_unit_self_evaluations() {
        let mut stream = Stream::new(5);
        let groups: Vec<Group> = (0..6)
            .map(|i| random_point_group(&mut stream, &format!("g{i}"), 12, i as f64))
            .collect();
        let spec = GroupKernelSpec::empirical(1.0).unwrap().with_normalize(true);
        let model = fit(&groups, &spec, 0.5, &FitConfig::default()).unwrap();
        // The decision path normalizes self-inner-products to exactly 1.
        for (i, g) in model.support_groups().iter().enumerate() {
            let k1 = level1_inner(g, g, model.spec()).unwrap();
            let k1n = k1 / (model.support_self_inner()[i] * k1).sqrt();
            assert!((k1n - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn far_group_decision_approaches_minus_rho() {
        let mut stream = Stream::new(9);
        let groups: Vec<Group> = (0..5)
            .map(|i| random_point_group(&mut stream, &format!("g{i}"), 10, 0.0))
            .collect();
        let spec = GroupKernelSpec::empirical(0.5).unwrap();
        let model = fit(&groups, &spec, 0.5, &FitConfig::default()).unwrap();
        let far = Group::from_points("far", vec![vec![1e6, 1e6]]);
        let d = model.decision(&far).unwrap();
        assert!((d + model.rho()).abs() < 1e-300);
    }

    #[test]
    fn embedding_rbf_decision_bounded_by_one_minus_rho() {
        let mut stream = Stream::new(21);
        let groups: Vec<Group> = (0..6)
            .map(|i| random_point_group(&mut stream, &format!("g{i}"), 8, i as f64 * 0.5))
            .collect();
        let spec = GroupKernelSpec::empirical(1.0)
            .unwrap()
            .with_embedding_rbf(GammaParam::Fixed(1.0));
        let model = fit(&groups, &spec, 0.3, &FitConfig::default()).unwrap();
        let d = model.decision(&groups[0]).unwrap();
        assert!(d <= 1.0 - model.rho() + 1e-12);
    }

    #[test]
    fn identical_groups_score_identically() {
        let g = Group::from_points("a", vec![vec![0.0], vec![1.0]]);
        let groups: Vec<Group> = (0..4)
            .map(|i| Group { id: format!("g{i}"), ..g.clone() })
            .collect();
        let spec = GroupKernelSpec::empirical(1.0).unwrap();
        let model = fit(&groups, &spec, 1.0, &FitConfig::default()).unwrap();
        let scored = model.score_dataset(&groups).unwrap();
        for d in &scored.decision {
            assert_eq!(*d, scored.decision[0]);
        }
    }

    #[test]
    fn permuted_dataset_scores_permute() {
        let mut stream = Stream::new(33);
        let groups: Vec<Group> = (0..7)
            .map(|i| random_point_group(&mut stream, &format!("g{i}"), 6, i as f64 * 0.3))
            .collect();
        let spec = GroupKernelSpec::empirical(1.0).unwrap();
        let model = fit(&groups, &spec, 0.5, &FitConfig::default()).unwrap();
        let scored = model.score_dataset(&groups).unwrap();
        let perm = [4usize, 2, 0, 6, 1, 5, 3];
        let permuted: Vec<Group> = perm.iter().map(|&i| groups[i].clone()).collect();
        let scored_perm = model.score_dataset(&permuted).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(scored_perm.decision[k].to_bits(), scored.decision[i].to_bits());
        }
    }

    #[test]
    fn rank_is_a_permutation_ascending_in_decision() {
        let mut stream = Stream::new(44);
        let groups: Vec<Group> = (0..9)
            .map(|i| random_point_group(&mut stream, &format!("g{i}"), 5, (i % 3) as f64))
            .collect();
        let spec = GroupKernelSpec::empirical(1.0).unwrap();
        let model = fit(&groups, &spec, 0.4, &FitConfig::default()).unwrap();
        let scored = model.score_dataset(&groups).unwrap();
        let mut seen = vec![false; 9];
        for &r in &scored.rank {
            assert!(!seen[r]);
            seen[r] = true;
        }
        // rank 0 has the lowest decision value
        let min_idx = scored.rank.iter().position(|&r| r == 0).unwrap();
        for d in &scored.decision {
            assert!(scored.decision[min_idx] <= *d);
        }
    }

    #[test]
    fn decision_perturbation_is_lipschitz_in_delta_over_n() {
        let mut stream = Stream::new(55);
        let sigma = 1.0;
        let groups: Vec<Group> = (0..5)
            .map(|i| random_point_group(&mut stream, &format!("g{i}"), 20, i as f64 * 0.2))
            .collect();
        let spec = GroupKernelSpec::empirical(sigma).unwrap();
        let model = fit(&groups, &spec, 0.5, &FitConfig::default()).unwrap();
        let test = random_point_group(&mut stream, "t", 20, 0.5);
        let d0 = model.decision(&test).unwrap();
        let delta = 0.01;
        let mut perturbed = test.clone();
        perturbed.points[7][0] += delta;
        let d1 = model.decision(&perturbed).unwrap();
        // Empirically calibrated Lipschitz constant L = 1/sigma.
        let bound = (1.0 / sigma) * delta / 20.0;
        assert!((d1 - d0).abs() <= bound, "{} > {bound}", (d1 - d0).abs());
    }

    #[test]
    fn fits_on_distinct_groups_converge_with_positive_rho() {
        for seed in 0..5 {
            let mut stream = Stream::new(seed);
            let groups: Vec<Group> = (0..8)
                .map(|i| random_point_group(&mut stream, &format!("g{i}"), 10, i as f64 * 0.7))
                .collect();
            let spec = GroupKernelSpec::empirical(1.0).unwrap();
            let model = fit(&groups, &spec, 0.5, &FitConfig::default()).unwrap();
            assert!(model.fit_report().converged);
            assert!(model.rho().is_finite() && model.rho() > 0.0);
        }
    }

    #[test]
    fn nu_property_holds_on_random_fits() {
        for seed in 0..20 {
            let mut stream = Stream::new(100 + seed);
            let groups: Vec<Group> = (0..12)
                .map(|i| random_point_group(&mut stream, &format!("g{i}"), 8, (i % 4) as f64))
                .collect();
            let spec = GroupKernelSpec::empirical(1.0).unwrap();
            let model = fit(&groups, &spec, 0.3, &FitConfig::default()).unwrap();
            let report = model.nu_property_check(&groups).unwrap();
            assert!(report.holds, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn training_scores_match_gram_scores_up_to_support_drop() {
        let ds = synth_rotated_gaussians(1);
        let sigma = crate::kernel::median_heuristic(ds.groups()).unwrap().sqrt();
        let spec = GroupKernelSpec::empirical(sigma).unwrap();
        let mut gram = gram_matrix(ds.groups(), &spec).unwrap();
        let jitter = gram.ensure_psd().unwrap();
        let model = fit_prepared(ds.groups(), &gram, 0.1, &FitConfig::default(), jitter).unwrap();
        let sol = solve_dual(&DualProblem::new(&gram, 0.1)).unwrap();
        let via_gram = gram_scores(&gram, &sol.alpha);
        let scored = model.score_dataset(ds.groups()).unwrap();
        for (i, d) in scored.decision.iter().enumerate() {
            assert!((d - (via_gram[i] - sol.rho)).abs() < 1e-8, "group {i}");
        }
    }

    #[test]
    fn save_load_round_trip_reproduces_decisions_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut stream = Stream::new(77);
        let groups: Vec<Group> = (0..6)
            .map(|i| {
                let mut g = random_point_group(&mut stream, &format!("g{i}"), 7, i as f64 * 0.4);
                g.omega = Some(vec![0.1; 7]);
                g
            })
            .collect();
        let spec = GroupKernelSpec::analytic(0.8).unwrap();
        let model = fit(&groups, &spec, 0.5, &FitConfig::default()).unwrap();
        model.save(&path).unwrap();
        let loaded = OcsmmModel::load(&path).unwrap();
        assert_eq!(loaded.rho().to_bits(), model.rho().to_bits());
        for g in &groups {
            let a = model.decision(g).unwrap();
            let b = loaded.decision(g).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn load_rejects_wrong_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            "{\"format_version\":99,\"kind\":\"ocsmm-model\",\"spec\":{\"base\":{\"family\":\"gaussian_rbf\",\"sigma\":1.0},\"level1\":\"empirical\",\"level2\":\"linear\",\"normalize\":false},\"rho\":0.5,\"alpha\":[1.0],\"support_groups\":[{\"id\":\"a\",\"points\":[[0.0]]}],\"fit_report\":{\"objective\":0.1,\"iterations\":1,\"converged\":true,\"nu\":0.5,\"num_groups\":1,\"alpha_sum\":1.0,\"tol\":1e-6,\"psd_jitter\":0.0}}",
        )
        .unwrap();
        assert!(OcsmmModel::load(&path).is_err());
    }

    #[test]
    fn incompatible_representation_errors() {
        let groups = vec![Group::from_points("a", vec![vec![0.0], vec![1.0]])];
        let spec = GroupKernelSpec::empirical(1.0).unwrap();
        let model = fit(&groups, &spec, 1.0, &FitConfig::default()).unwrap();
        let s = crate::kernel::GaussianSummary::isotropic(vec![0.0], 0.1).unwrap();
        let summary_only = Group::from_summary("s", s);
        assert!(model.decision(&summary_only).is_err());
    }
}
