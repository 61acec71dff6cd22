//! Group datasets: the data model, JSONL/CSV I/O, and synthetic generators.
//!
//! A [`Group`] is the unit of anomaly detection: a set of observed points,
//! optionally with per-point measurement variances, or an explicit Gaussian
//! summary. Generators reproduce the synthetic protocols used throughout
//! the crate's evaluation: rotated-covariance Gaussian groups, mixture
//! groups with tweaked mixing proportions, noisy shapes with observed
//! per-point corruption, and random-aggregation injections.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::kernel::GaussianSummary;
use crate::rng::Stream;

// ---------------------------------------------------------------------------
// Data model
// ---------------------------------------------------------------------------

/// One group: an observed sample set and/or a Gaussian summary, plus an
/// optional evaluation label (`true` = anomalous).
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub id: String,
    /// Observed points, `n x d`. May be empty when a summary is present.
    pub points: Vec<Vec<f64>>,
    /// Per-point isotropic measurement variances, length `n`.
    pub omega: Option<Vec<f64>>,
    /// Explicit Gaussian representation.
    pub summary: Option<GaussianSummary>,
    /// Ground-truth anomaly label, used by evaluation only.
    pub label: Option<bool>,
}

impl Group {
    pub fn from_points(id: impl Into<String>, points: Vec<Vec<f64>>) -> Self {
        Group { id: id.into(), points, omega: None, summary: None, label: None }
    }

    pub fn from_points_with_omega(
        id: impl Into<String>,
        points: Vec<Vec<f64>>,
        omega: Vec<f64>,
    ) -> Self {
        Group { id: id.into(), points, omega: Some(omega), summary: None, label: None }
    }

    pub fn from_summary(id: impl Into<String>, summary: GaussianSummary) -> Self {
        Group { id: id.into(), points: Vec::new(), omega: None, summary: Some(summary), label: None }
    }

    pub fn with_label(mut self, label: bool) -> Self {
        self.label = Some(label);
        self
    }

    pub fn has_points(&self) -> bool {
        !self.points.is_empty()
    }

    /// Input-space dimension, from points or the summary.
    pub fn dim(&self) -> Option<usize> {
        self.points
            .first()
            .map(|p| p.len())
            .or_else(|| self.summary.as_ref().map(|s| s.dim()))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.has_points() && self.summary.is_none() {
            return Err(Error::invalid(format!(
                "group '{}' has neither points nor a Gaussian summary",
                self.id
            )));
        }
        if let Some(d) = self.dim() {
            if self.points.iter().any(|p| p.len() != d) {
                return Err(Error::invalid(format!("group '{}' has mixed point dimensions", self.id)));
            }
            if let Some(s) = &self.summary {
                if s.dim() != d {
                    return Err(Error::invalid(format!(
                        "group '{}': summary dimension {} != point dimension {d}",
                        self.id,
                        s.dim()
                    )));
                }
            }
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("group '{}' has non-finite points", self.id)));
        }
        if let Some(omega) = &self.omega {
            if omega.len() != self.points.len() {
                return Err(Error::invalid(format!(
                    "group '{}': {} uncertainties for {} points",
                    self.id,
                    omega.len(),
                    self.points.len()
                )));
            }
            if omega.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::invalid(format!(
                    "group '{}' has negative or non-finite uncertainty",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// An immutable collection of dimension-consistent groups with unique ids.
#[derive(Debug, Clone)]
pub struct GroupDataset {
    groups: Vec<Group>,
    dim: usize,
    /// Free-form generator metadata (name, seed, parameters).
    pub provenance: serde_json::Value,
}

impl GroupDataset {
    pub fn new(groups: Vec<Group>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("no groups"));
        }
        let mut dim = None;
        let mut ids = std::collections::HashSet::new();
        for g in &groups {
            g.validate()?;
            if !ids.insert(g.id.as_str()) {
                return Err(Error::invalid(format!("duplicate group id '{}'", g.id)));
            }
            let gd = g.dim().expect("validated group has a dimension");
            match dim {
                None => dim = Some(gd),
                Some(d) if d != gd => {
                    return Err(Error::invalid(format!(
                        "group '{}' has dimension {gd}, expected {d}",
                        g.id
                    )))
                }
                _ => {}
            }
        }
        Ok(GroupDataset {
            groups,
            dim: dim.unwrap(),
            provenance: serde_json::Value::Null,
        })
    }

    pub fn with_provenance(mut self, provenance: serde_json::Value) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn into_groups(self) -> Vec<Group> {
        self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Labels with missing values read as normal (the one-class convention).
    pub fn labels_or_normal(&self) -> Vec<bool> {
        self.groups.iter().map(|g| g.label.unwrap_or(false)).collect()
    }

    pub fn anomaly_count(&self) -> usize {
        self.groups.iter().filter(|g| g.label == Some(true)).count()
    }
}

// ---------------------------------------------------------------------------
// JSONL I/O
// ---------------------------------------------------------------------------

/// Wire format of one group, one JSON object per line.
#[derive(Serialize, Deserialize)]
pub(crate) struct GroupRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

impl GroupRecord {
    pub(crate) fn from_group(g: &Group) -> Self {
        GroupRecord {
            id: g.id.clone(),
            points: g.points.clone(),
            omega: g.omega.clone(),
            mean: g.summary.as_ref().map(|s| s.mean().to_vec()),
            cov: g.summary.as_ref().map(|s| s.cov().to_vec()),
            label: g.label.map(u8::from),
        }
    }

    pub(crate) fn into_group(self, line: usize) -> Result<Group> {
        let parse_err = |message: String| Error::Parse { line, message };
        let summary = match (self.mean, self.cov) {
            (Some(mean), Some(cov)) => Some(
                GaussianSummary::new(mean, cov).map_err(|e| parse_err(e.to_string()))?,
            ),
            (None, None) => None,
            _ => return Err(parse_err("mean and cov must be given together".into())),
        };
        let label = match self.label {
            None => None,
            Some(0) => Some(false),
            Some(1) => Some(true),
            Some(other) => return Err(parse_err(format!("label must be 0 or 1, got {other}"))),
        };
        let group = Group { id: self.id, points: self.points, omega: self.omega, summary, label };
        group.validate().map_err(|e| parse_err(e.to_string()))?;
        Ok(group)
    }
}

/// Loads a JSONL dataset (one group object per line; blank lines ignored).
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<GroupDataset> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut groups = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GroupRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        groups.push(record.into_group(line_no)?);
    }
    if groups.is_empty() {
        return Err(Error::invalid("no groups"));
    }
    GroupDataset::new(groups)
}

/// Writes a dataset as JSONL. Numbers round-trip exactly (shortest float
/// printing); non-finite values are rejected rather than written.
pub fn save_jsonl(dataset: &GroupDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    for g in dataset.groups() {
        g.validate()?;
        let record = GroupRecord::from_group(g);
        serde_json::to_writer(&mut writer, &record)
            .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Imports a flat CSV with columns `group_id, x1..xd[, omega][, label]`.
/// Rows sharing a `group_id` form one group, in first-appearance order.
pub fn import_csv(path: impl AsRef<Path>) -> Result<GroupDataset> {
    let mut reader = csv::Reader::from_path(path.as_ref())
        .map_err(|e| Error::invalid(format!("cannot open csv: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.first() != Some(&"group_id") {
        return Err(Error::Parse {
            line: 1,
            message: "first column must be group_id".into(),
        });
    }
    let x_cols: Vec<usize> = cols
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with('x') && c[1..].parse::<usize>().is_ok())
        .map(|(i, _)| i)
        .collect();
    if x_cols.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no coordinate columns x1..xd found".into(),
        });
    }
    let omega_col = cols.iter().position(|c| *c == "omega");
    let label_col = cols.iter().position(|c| *c == "label");

    let mut order: Vec<String> = Vec::new();
    let mut by_id: std::collections::HashMap<String, Group> = std::collections::HashMap::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let id = row.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::Parse { line, message: "empty group_id".into() });
        }
        let mut point = Vec::with_capacity(x_cols.len());
        for &c in &x_cols {
            let v: f64 = row
                .get(c)
                .unwrap_or("")
                .parse()
                .map_err(|e| Error::Parse { line, message: format!("bad coordinate: {e}") })?;
            point.push(v);
        }
        let omega = match omega_col {
            Some(c) => Some(row.get(c).unwrap_or("").parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad omega: {e}"),
            })?),
            None => None,
        };
        let label = match label_col {
            Some(c) => {
                let raw = row.get(c).unwrap_or("");
                match raw {
                    "" => None,
                    "0" => Some(false),
                    "1" => Some(true),
                    other => {
                        return Err(Error::Parse {
                            line,
                            message: format!("label must be 0 or 1, got {other}"),
                        })
                    }
                }
            }
            None => None,
        };
        let entry = by_id.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            let mut g = Group::from_points(id.clone(), Vec::new());
            if omega_col.is_some() {
                g.omega = Some(Vec::new());
            }
            g
        });
        entry.points.push(point);
        if let (Some(os), Some(w)) = (&mut entry.omega, omega) {
            os.push(w);
        }
        if label.is_some() {
            entry.label = label;
        }
    }
    let groups: Vec<Group> = order.into_iter().map(|id| by_id.remove(&id).unwrap()).collect();
    if groups.is_empty() {
        return Err(Error::invalid("no groups"));
    }
    GroupDataset::new(groups)
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

/// Covariance of the normal groups in the rotated-covariance protocol.
pub const ROTATED_BASE_COV: [[f64; 2]; 2] = [[0.01, 0.008], [0.008, 0.01]];

/// Samples one point from `N(mean, L L^T)` given the Cholesky factor `L`
/// (lower triangular, row-major 2x2).
fn sample_gaussian_2d(stream: &mut Stream, mean: [f64; 2], chol: [[f64; 2]; 2]) -> Vec<f64> {
    let z0 = stream.standard_normal();
    let z1 = stream.standard_normal();
    vec![
        mean[0] + chol[0][0] * z0,
        mean[1] + chol[1][0] * z0 + chol[1][1] * z1,
    ]
}

fn cholesky_2x2(c: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let l00 = c[0][0].sqrt();
    let l10 = c[0][1] / l00;
    let l11 = (c[1][1] - l10 * l10).sqrt();
    [[l00, 0.0], [l10, l11]]
}

/// Rotated-covariance Gaussian groups: 20 normal groups `N(m_i, S)` with
/// means uniform on `[0,1]^2`, 2 anomalous groups with the covariance
/// rotated by 60 degrees, and the last normal group translated by `[2, 2]`
/// (labeled anomalous). 100 points per group.
pub fn synth_rotated_gaussians(seed: u64) -> GroupDataset {
    let mut stream = Stream::new(seed);
    let base_chol = cholesky_2x2(ROTATED_BASE_COV);

    // R(60 deg) S R(60 deg)^T
    let (c, s) = (60f64.to_radians().cos(), 60f64.to_radians().sin());
    let b = ROTATED_BASE_COV;
    let r = [[c, -s], [s, c]];
    let mut rotated = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    acc += r[i][k] * b[k][l] * r[j][l];
                }
            }
            rotated[i][j] = acc;
        }
    }
    let rotated_chol = cholesky_2x2(rotated);

    let n_per_group = 100;
    let mut groups = Vec::with_capacity(22);
    for gi in 0..20 {
        let u = stream.uniform01();
        let mut mean = [u, u];
        let perturbed = gi == 19;
        if perturbed {
            mean[0] += 2.0;
            mean[1] += 2.0;
        }
        let points = (0..n_per_group)
            .map(|_| sample_gaussian_2d(&mut stream, mean, base_chol))
            .collect();
        groups.push(Group::from_points(format!("g{gi:02}"), points).with_label(perturbed));
    }
    for gi in 20..22 {
        let u = stream.uniform01();
        let mean = [u, u];
        let points = (0..n_per_group)
            .map(|_| sample_gaussian_2d(&mut stream, mean, rotated_chol))
            .collect();
        groups.push(Group::from_points(format!("g{gi:02}"), points).with_label(true));
    }
    GroupDataset::new(groups)
        .expect("generator output is valid")
        .with_provenance(json!({
            "generator": "rotated_gaussians",
            "seed": seed,
            "groups": 22,
            "points_per_group": n_per_group,
            "anomalies": 3,
        }))
}

/// Mixing proportions of the two normal group types and the anomalous type
/// in the Gaussian-mixture protocol.
pub const MIXTURE_NORMAL_A: [f64; 4] = [0.22, 0.64, 0.03, 0.11];
pub const MIXTURE_NORMAL_B: [f64; 4] = [0.22, 0.03, 0.64, 0.11];
pub const MIXTURE_ANOMALOUS: [f64; 4] = [0.61, 0.1, 0.06, 0.23];
pub const MIXTURE_MEANS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [0.0, 1.0], [1.0, 1.0]];
pub const MIXTURE_COMPONENT_VAR: f64 = 0.15;

/// Gaussian-mixture groups: 47 normal groups drawing one of two mixing
/// proportions (probability 0.48 / 0.52), 3 anomalous groups with a third
/// proportion; group sizes `Poisson(300)`, resampled on zero.
pub fn synth_mixture_groups(seed: u64) -> GroupDataset {
    let mut stream = Stream::new(seed);
    let std_dev = MIXTURE_COMPONENT_VAR.sqrt();
    let mut groups = Vec::with_capacity(50);
    for gi in 0..50 {
        let anomalous = gi >= 47;
        let props: &[f64; 4] = if anomalous {
            &MIXTURE_ANOMALOUS
        } else if stream.uniform01() < 0.48 {
            &MIXTURE_NORMAL_A
        } else {
            &MIXTURE_NORMAL_B
        };
        let mut n = stream.poisson(300.0);
        while n == 0 {
            n = stream.poisson(300.0);
        }
        let points = (0..n)
            .map(|_| {
                let comp = stream.pick_weighted(props);
                let m = MIXTURE_MEANS[comp];
                vec![stream.normal(m[0], std_dev), stream.normal(m[1], std_dev)]
            })
            .collect();
        groups.push(Group::from_points(format!("g{gi:02}"), points).with_label(anomalous));
    }
    GroupDataset::new(groups)
        .expect("generator output is valid")
        .with_provenance(json!({
            "generator": "mixture_groups",
            "seed": seed,
            "groups": 50,
            "anomalies": 3,
            "poisson_rate": 300.0,
        }))
}

/// Variance of the shape noise added to the clean curves (`epsilon`).
pub const SHAPE_NOISE_VAR: f64 = 0.05;
/// Range of the per-point corruption variances `omega`.
pub const CORRUPTION_VAR_RANGE: (f64, f64) = (0.2, 0.3);

/// Point on the unit circle.
pub fn circle_curve(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

/// Point on the four-petal flower `r = sin(4 theta) + 2`.
pub fn flower_curve(theta: f64) -> [f64; 2] {
    let r = (4.0 * theta).sin() + 2.0;
    [r * theta.cos(), r * theta.sin()]
}

fn synth_noisy_shape(
    seed: u64,
    n: usize,
    curve: impl Fn(f64) -> [f64; 2],
    theta_of: impl Fn(&mut Stream) -> f64,
    name: &str,
) -> Result<GroupDataset> {
    if n == 0 {
        return Err(Error::invalid("need at least one point"));
    }
    let mut stream = Stream::new(seed);
    let eps_std = SHAPE_NOISE_VAR.sqrt();
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let theta = theta_of(&mut stream);
        let c = curve(theta);
        let clean = [c[0] + eps_std * stream.standard_normal(), c[1] + eps_std * stream.standard_normal()];
        let omega = stream.uniform(CORRUPTION_VAR_RANGE.0, CORRUPTION_VAR_RANGE.1);
        let w_std = omega.sqrt();
        let observed = vec![
            clean[0] + w_std * stream.standard_normal(),
            clean[1] + w_std * stream.standard_normal(),
        ];
        groups.push(Group::from_points_with_omega(format!("p{i:04}"), vec![observed], vec![omega]));
    }
    Ok(GroupDataset::new(groups)?.with_provenance(json!({
        "generator": name,
        "seed": seed,
        "points": n,
        "noise_var": SHAPE_NOISE_VAR,
        "corruption_var_range": [CORRUPTION_VAR_RANGE.0, CORRUPTION_VAR_RANGE.1],
    })))
}

/// Noisy unit circle: points `curve(theta) + eps` with `eps ~ N(0, 0.05 I)`,
/// further corrupted by `N(0, omega_i I)` with `omega_i ~ U(0.2, 0.3)`;
/// each point becomes a single-point group carrying its observed `omega_i`.
pub fn synth_noisy_circle(seed: u64, n: usize) -> Result<GroupDataset> {
    synth_noisy_shape(
        seed,
        n,
        circle_curve,
        // theta uniform on (-pi, pi]
        |s| std::f64::consts::PI * (1.0 - 2.0 * s.uniform01()),
        "noisy_circle",
    )
}

/// Noisy flower (`r = sin(4 theta) + 2`), same noise and corruption scheme
/// as [`synth_noisy_circle`].
pub fn synth_noisy_flower(seed: u64, n: usize) -> Result<GroupDataset> {
    synth_noisy_shape(
        seed,
        n,
        flower_curve,
        // theta uniform on (0, 2 pi]
        |s| 2.0 * std::f64::consts::PI * (1.0 - s.uniform01()),
        "noisy_flower",
    )
}

/// Density of `curve(theta) + N(0, noise_var I)` for the unit circle with
/// uniform theta, in closed form:
/// `(2 pi s^2)^{-1} exp(-(rho - 1)^2 / (2 s^2)) * i0e(rho / s^2)`
/// where `rho = ||y||` and `i0e` is the exponentially scaled modified
/// Bessel function of order zero.
pub fn circle_truth_density(point: &[f64], noise_var: f64) -> f64 {
    assert_eq!(point.len(), 2);
    let rho = (point[0] * point[0] + point[1] * point[1]).sqrt();
    let s2 = noise_var;
    let radial = (-(rho - 1.0) * (rho - 1.0) / (2.0 * s2)).exp();
    radial * bessel_i0e(rho / s2) / (2.0 * std::f64::consts::PI * s2)
}

/// `e^{-x} I_0(x)` by the Abramowitz-Stegun 9.8.1/9.8.2 polynomial
/// approximations (absolute error below 2e-7).
fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x < 3.75 {
        let t = x / 3.75;
        let t2 = t * t;
        let i0 = 1.0
            + t2 * (3.5156229
                + t2 * (3.0899424
                    + t2 * (1.2067492 + t2 * (0.2659732 + t2 * (0.0360768 + t2 * 0.0045813)))));
        i0 * (-x).exp()
    } else {
        let t = 3.75 / x;
        let poly = 0.39894228
            + t * (0.01328592
                + t * (0.00225319
                    + t * (-0.00157565
                        + t * (0.00916281
                            + t * (-0.02057706
                                + t * (0.02635537 + t * (-0.01647633 + t * 0.00392377)))))));
        poly / x.sqrt()
    }
}

/// Appends `count` aggregation anomalies: groups whose points are sampled
/// uniformly without replacement (per group) from the pool of all points of
/// all normal groups, sized at the median normal group size. Individually
/// normal points, anomalous aggregation.
pub fn inject_aggregation_anomalies(
    dataset: &GroupDataset,
    count: usize,
    seed: u64,
) -> Result<GroupDataset> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let normal: Vec<&Group> = dataset
        .groups()
        .iter()
        .filter(|g| g.label != Some(true))
        .collect();
    if normal.is_empty() {
        return Err(Error::invalid("no normal groups to pool from"));
    }
    let pool: Vec<&[f64]> = normal
        .iter()
        .flat_map(|g| g.points.iter().map(|p| p.as_slice()))
        .collect();
    let mut sizes: Vec<usize> = normal.iter().map(|g| g.points.len()).collect();
    sizes.sort_unstable();
    let size = sizes[(sizes.len() - 1) / 2]; // lower median
    if size == 0 || pool.len() < size {
        return Err(Error::invalid(format!(
            "point pool too small: {} points for injected groups of size {size}",
            pool.len()
        )));
    }
    let mut stream = Stream::new(seed);
    let mut groups = dataset.groups().to_vec();
    let base = groups.len();
    for k in 0..count {
        let idx = stream.sample_indices(pool.len(), size);
        let points = idx.iter().map(|&i| pool[i].to_vec()).collect();
        groups.push(Group::from_points(format!("inj{:03}", base + k), points).with_label(true));
    }
    let mut provenance = dataset.provenance.clone();
    if let serde_json::Value::Object(map) = &mut provenance {
        map.insert("injected_anomalies".into(), json!(count));
        map.insert("injection_seed".into(), json!(seed));
    }
    Ok(GroupDataset::new(groups)?.with_provenance(provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn round_trip_single_group_is_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("one.jsonl");
        let g = Group::from_points_with_omega("a", vec![vec![0.1, -2.5e-7]], vec![0.25]);
        let ds = GroupDataset::new(vec![g]).unwrap();
        save_jsonl(&ds, &path).unwrap();
        let loaded = load_jsonl(&path).unwrap();
        assert_eq!(ds.groups(), loaded.groups());
    }

    #[test]
    fn round_trip_preserves_bits() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bits.jsonl");
        let awkward = vec![
            vec![0.1 + 0.2, 1.0 / 3.0],
            vec![f64::MIN_POSITIVE, -0.0],
        ];
        let ds = GroupDataset::new(vec![Group::from_points("a", awkward.clone())]).unwrap();
        save_jsonl(&ds, &path).unwrap();
        let loaded = load_jsonl(&path).unwrap();
        for (p, q) in loaded.groups()[0].points.iter().zip(awkward.iter()) {
            for (a, b) in p.iter().zip(q.iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn empty_file_errors() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let err = load_jsonl(&path).unwrap_err();
        assert!(err.to_string().contains("no groups"));
    }

    #[test]
    fn parse_error_reports_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"points\":[[0.0]]}\nnot json\n").unwrap();
        match load_jsonl(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn mixed_omega_presence_is_preserved() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("mixed.jsonl");
        let ds = GroupDataset::new(vec![
            Group::from_points_with_omega("a", vec![vec![0.0]], vec![0.3]),
            Group::from_points("b", vec![vec![1.0]]),
        ])
        .unwrap();
        save_jsonl(&ds, &path).unwrap();
        let loaded = load_jsonl(&path).unwrap();
        assert!(loaded.groups()[0].omega.is_some());
        assert!(loaded.groups()[1].omega.is_none());
    }

    #[test]
    fn summary_groups_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("summary.jsonl");
        let s = GaussianSummary::new(vec![0.5, -1.0], vec![vec![0.2, 0.01], vec![0.01, 0.3]]).unwrap();
        let ds = GroupDataset::new(vec![Group::from_summary("s", s).with_label(true)]).unwrap();
        save_jsonl(&ds, &path).unwrap();
        let loaded = load_jsonl(&path).unwrap();
        assert_eq!(ds.groups(), loaded.groups());
    }

    #[test]
    fn rejects_label_other_than_01() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("label.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"points\":[[0.0]],\"label\":2}\n").unwrap();
        assert!(load_jsonl(&path).is_err());
    }

    #[test]
    fn rejects_duplicate_ids() {
        let groups = vec![
            Group::from_points("a", vec![vec![0.0]]),
            Group::from_points("a", vec![vec![1.0]]),
        ];
        assert!(GroupDataset::new(groups).is_err());
    }

    #[test]
    fn csv_import_groups_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("flat.csv");
        std::fs::write(
            &path,
            "group_id,x1,x2,omega,label\na,0.0,1.0,0.25,0\na,0.5,1.5,0.21,0\nb,5.0,5.0,0.3,1\n",
        )
        .unwrap();
        let ds = import_csv(&path).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.groups()[0].points.len(), 2);
        assert_eq!(ds.groups()[0].omega.as_deref(), Some(&[0.25, 0.21][..]));
        assert_eq!(ds.groups()[1].label, Some(true));
    }

    #[test]
    fn rotated_generator_shape() {
        let ds = synth_rotated_gaussians(7);
        assert_eq!(ds.len(), 22);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.anomaly_count(), 3);
        for g in ds.groups() {
            assert_eq!(g.points.len(), 100);
        }
        // The perturbed group sits far outside the unit square.
        let g19 = &ds.groups()[19];
        assert_eq!(g19.label, Some(true));
        let mx: f64 = g19.points.iter().map(|p| p[0]).sum::<f64>() / 100.0;
        assert!(mx > 1.5, "perturbed mean x = {mx}");
    }

    #[test]
    fn rotated_sample_covariance_close_to_nominal() {
        let mut ok = 0;
        for seed in 0..10 {
            let ds = synth_rotated_gaussians(seed);
            let g = &ds.groups()[0];
            let n = g.points.len() as f64;
            let mean: Vec<f64> = (0..2)
                .map(|k| g.points.iter().map(|p| p[k]).sum::<f64>() / n)
                .collect();
            let mut cov = [[0.0; 2]; 2];
            for p in &g.points {
                for i in 0..2 {
                    for j in 0..2 {
                        cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]);
                    }
                }
            }
            let mut frob = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let diff = cov[i][j] / (n - 1.0) - ROTATED_BASE_COV[i][j];
                    frob += diff * diff;
                }
            }
            if frob.sqrt() <= 0.01 {
                ok += 1;
            }
        }
        assert!(ok >= 9, "sample covariance close in only {ok}/10 seeds");
    }

    #[test]
    fn mixture_generator_shape() {
        let ds = synth_mixture_groups(7);
        assert_eq!(ds.len(), 50);
        assert_eq!(ds.anomaly_count(), 3);
        for g in ds.groups() {
            assert!(!g.points.is_empty());
        }
        // Gaussian tail sanity bound (soft).
        let bound = 1.0 + 6.0 * MIXTURE_COMPONENT_VAR.sqrt();
        let worst = ds
            .groups()
            .iter()
            .flat_map(|g| g.points.iter().flatten())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= bound, "point at {worst} beyond soft bound {bound}");
    }

    #[test]
    fn mixture_anomalous_proportions_concentrate() {
        // Nearest-component assignment recovers the anomalous mixing
        // proportion within 0.08 at n ~ 300.
        for seed in [1, 2, 3] {
            let ds = synth_mixture_groups(seed);
            for g in &ds.groups()[47..] {
                let mut counts = [0usize; 4];
                for p in &g.points {
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for (c, m) in MIXTURE_MEANS.iter().enumerate() {
                        let d = (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2);
                        if d < best_d {
                            best_d = d;
                            best = c;
                        }
                    }
                    counts[best] += 1;
                }
                let n = g.points.len() as f64;
                for (c, expected) in MIXTURE_ANOMALOUS.iter().enumerate() {
                    let got = counts[c] as f64 / n;
                    assert!(
                        (got - expected).abs() <= 0.08,
                        "seed {seed} group {} component {c}: {got} vs {expected}",
                        g.id
                    );
                }
            }
        }
    }

    #[test]
    fn noisy_circle_structure() {
        let ds = synth_noisy_circle(3, 200).unwrap();
        assert_eq!(ds.len(), 200);
        for g in ds.groups() {
            assert_eq!(g.points.len(), 1);
            let w = g.omega.as_ref().unwrap()[0];
            assert!((CORRUPTION_VAR_RANGE.0..CORRUPTION_VAR_RANGE.1).contains(&w));
        }
    }

    #[test]
    fn noisy_circle_dispersion_panics_without_corruption() {
        // Reconstruct the pre-corruption radius dispersion by simulation:
        // curve + eps only should scatter around radius 1 with std well
        // below the corrupted data's scatter.
        let mut stream = Stream::new(5);
        let eps_std = SHAPE_NOISE_VAR.sqrt();
        let n = 4000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let theta = std::f64::consts::PI * (1.0 - 2.0 * stream.uniform01());
            let c = circle_curve(theta);
            let p = [c[0] + eps_std * stream.standard_normal(), c[1] + eps_std * stream.standard_normal()];
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0;
            sum += r;
            sumsq += r * r;
        }
        let mean = sum / n as f64;
        let std = (sumsq / n as f64 - mean * mean).sqrt();
        // Radial dispersion is on the order of sqrt(noise_var).
        assert!(std < 2.0 * SHAPE_NOISE_VAR.sqrt(), "std {std}");
        assert!(std > 0.5 * SHAPE_NOISE_VAR.sqrt(), "std {std}");
    }

    #[test]
    fn flower_radii_in_range() {
        for k in 0..1000 {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 / 1000.0);
            let p = flower_curve(theta);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((1.0 - 1e-9..=3.0 + 1e-9).contains(&r), "radius {r}");
        }
    }

    #[test]
    fn circle_truth_density_integrates_to_one() {
        // Trapezoid over [-3, 3]^2 with 301 nodes per axis.
        let n = 301;
        let (lo, hi) = (-3.0, 3.0);
        let h = (hi - lo) / (n - 1) as f64;
        let mut total = 0.0;
        for i in 0..n {
            let wx = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            for j in 0..n {
                let wy = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                let y = [lo + i as f64 * h, lo + j as f64 * h];
                total += wx * wy * circle_truth_density(&y, SHAPE_NOISE_VAR);
            }
        }
        total *= h * h;
        assert!((total - 1.0).abs() < 1e-3, "integral {total}");
    }

    #[test]
    fn circle_truth_density_matches_monte_carlo_at_a_point() {
        // Average of N(y; curve(theta), s^2 I) over sampled theta.
        let y = [0.9, 0.3];
        let mut stream = Stream::new(9);
        let n = 400_000;
        let s2 = SHAPE_NOISE_VAR;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * s2);
        let mut acc = 0.0;
        for _ in 0..n {
            let theta = std::f64::consts::PI * (1.0 - 2.0 * stream.uniform01());
            let c = circle_curve(theta);
            let d2 = (y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2);
            acc += norm * (-d2 / (2.0 * s2)).exp();
        }
        let mc = acc / n as f64;
        let exact = circle_truth_density(&y, s2);
        assert!(
            (mc - exact).abs() / exact < 0.02,
            "monte carlo {mc} vs analytic {exact}"
        );
    }

    #[test]
    fn inject_appends_labeled_groups_from_pool() {
        let ds = synth_rotated_gaussians(1);
        let injected = inject_aggregation_anomalies(&ds, 5, 99).unwrap();
        assert_eq!(injected.len(), 27);
        assert_eq!(injected.anomaly_count(), 8);
        // Pool membership: every injected point exists among normal points.
        let pool: std::collections::HashSet<Vec<u64>> = ds
            .groups()
            .iter()
            .filter(|g| g.label != Some(true))
            .flat_map(|g| g.points.iter())
            .map(|p| p.iter().map(|v| v.to_bits()).collect())
            .collect();
        for g in &injected.groups()[22..] {
            assert_eq!(g.label, Some(true));
            assert_eq!(g.points.len(), 100);
            for p in &g.points {
                let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
                assert!(pool.contains(&key));
            }
        }
    }

    #[test]
    fn injected_covariance_is_an_outlier_among_normal_groups() {
        let ds = synth_rotated_gaussians(2);
        let injected = inject_aggregation_anomalies(&ds, 1, 5).unwrap();
        let frob_from_nominal = |g: &Group| -> f64 {
            let n = g.points.len() as f64;
            let mean: Vec<f64> = (0..2)
                .map(|k| g.points.iter().map(|p| p[k]).sum::<f64>() / n)
                .collect();
            let mut acc = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let c: f64 = g
                        .points
                        .iter()
                        .map(|p| (p[i] - mean[i]) * (p[j] - mean[j]))
                        .sum::<f64>()
                        / (n - 1.0);
                    acc += (c - ROTATED_BASE_COV[i][j]).powi(2);
                }
            }
            acc.sqrt()
        };
        let normal_frobs: Vec<f64> = ds.groups()[..19].iter().map(frob_from_nominal).collect();
        let mean = normal_frobs.iter().sum::<f64>() / normal_frobs.len() as f64;
        let var = normal_frobs.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / normal_frobs.len() as f64;
        let threshold = mean + 3.0 * var.sqrt();
        let inj = injected.groups().last().unwrap();
        assert!(
            frob_from_nominal(inj) > threshold,
            "injected covariance not separated: {} <= {threshold}",
            frob_from_nominal(inj)
        );
    }

    #[test]
    fn generators_are_deterministic() {
        let a = synth_mixture_groups(11);
        let b = synth_mixture_groups(11);
        assert_eq!(a.groups(), b.groups());
        let c = synth_mixture_groups(12);
        assert_ne!(a.groups(), c.groups());
    }

    #[test]
    fn generated_datasets_survive_round_trip() {
        let dir = tempdir().unwrap();
        for (name, ds) in [
            ("rot", synth_rotated_gaussians(3)),
            ("mix", synth_mixture_groups(3)),
            ("circ", synth_noisy_circle(3, 50).unwrap()),
        ] {
            let path = dir.path().join(format!("{name}.jsonl"));
            save_jsonl(&ds, &path).unwrap();
            let loaded = load_jsonl(&path).unwrap();
            assert_eq!(ds.groups(), loaded.groups(), "{name}");
        }
    }
}
