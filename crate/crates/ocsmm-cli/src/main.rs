//! Command-line interface: synthetic data generation, fitting, scoring,
//! evaluation, nu sweeps, and density grids.
//!
//! Exit codes: 0 success, 2 usage/input error, 3 numerical non-convergence.
//! Every command writes a fully resolved `<out>.config.json` next to its
//! primary output. `OCSMM_THREADS` caps worker threads.

mod svg;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ocsmm::data::{
    import_csv, inject_aggregation_anomalies, load_jsonl, save_jsonl, synth_mixture_groups,
    synth_noisy_circle, synth_noisy_flower, synth_rotated_gaussians,
};
use ocsmm::density::{DensityModel, GridSpec};
use ocsmm::error::Error;
use ocsmm::eval::{nu_sweep, roc_auc, DEFAULT_NU_GRID};
use ocsmm::kernel::median_heuristic;
use ocsmm::model::{fit, FitConfig, OcsmmModel};
use ocsmm::{GammaParam, Group, GroupDataset, GroupKernelSpec};

#[derive(Parser)]
#[command(name = "ocsmm", version, about = "Group anomaly detection with one-class support measure machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as JSONL.
    Synth(SynthArgs),
    /// Fit a detector on a dataset and write the model file.
    Fit(FitArgs),
    /// Score a dataset with a fitted model.
    Score(ScoreArgs),
    /// Compute AUC/AP and the ROC curve from scores plus labels.
    Eval(EvalArgs),
    /// Fit one model per nu and tabulate metrics.
    Sweep(SweepArgs),
    /// Evaluate a density estimate on a grid.
    Density(DensityArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Rotated,
    Mixture,
    Circle,
    Flower,
}

#[derive(Args)]
struct SynthArgs {
    /// Which generator to run.
    #[arg(long, value_enum)]
    generator: Generator,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points for the circle/flower generators.
    #[arg(long, default_value_t = 500)]
    count: usize,
    /// Append this many aggregation anomalies drawn from the normal pool.
    #[arg(long)]
    inject: Option<usize>,
    #[arg(long, default_value_t = 1)]
    inject_seed: u64,
    /// Output JSONL path.
    #[arg(long)]
    out: PathBuf,
    /// Optional scatter plot of the generated points.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct KernelArgs {
    /// Layer-1 kernel between groups.
    #[arg(long, value_enum, default_value_t = KernelKind::Empirical)]
    kernel: KernelKind,
    /// Base RBF bandwidth sigma; defaults to sqrt(median pairwise squared
    /// distance) over all points.
    #[arg(long)]
    sigma: Option<f64>,
    /// Second-level kernel on the embeddings.
    #[arg(long, value_enum, default_value_t = Level2Kind::Linear)]
    level2: Level2Kind,
    /// Bandwidth for --level2 embedding-rbf: a number, "median"
    /// (median RKHS distance), or "paper" (gamma = sigma).
    #[arg(long, default_value = "median")]
    gamma: String,
    /// Spherically normalize the layer-1 Gram matrix.
    #[arg(long)]
    normalize: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Empirical,
    Analytic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level2Kind {
    Linear,
    EmbeddingRbf,
}

impl KernelArgs {
    fn resolve(&self, groups: &[Group]) -> Result<GroupKernelSpec, Error> {
        let sigma = match self.sigma {
            Some(s) => s,
            None => median_heuristic(groups)?.sqrt(),
        };
        let mut spec = match self.kernel {
            KernelKind::Empirical => GroupKernelSpec::empirical(sigma)?,
            KernelKind::Analytic => GroupKernelSpec::analytic(sigma)?,
        };
        spec = spec.with_normalize(self.normalize);
        if matches!(self.level2, Level2Kind::EmbeddingRbf) {
            let gamma = match self.gamma.as_str() {
                "median" => GammaParam::MedianRkhs,
                "paper" => GammaParam::MatchSigma,
                value => GammaParam::Fixed(value.parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!(
                        "--gamma must be a number, \"median\" or \"paper\", got \"{value}\""
                    ))
                })?),
            };
            spec = spec.with_embedding_rbf(gamma);
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 10_000_000)]
    max_iter: u64,
}

impl SolverArgs {
    fn config(&self) -> FitConfig {
        FitConfig { tol: self.tol, max_iter: self.max_iter }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Training dataset (JSONL, or CSV with --csv).
    #[arg(long)]
    data: PathBuf,
    /// Read --data as flat CSV (group_id, x1..xd[, omega][, label]).
    #[arg(long)]
    csv: bool,
    #[arg(long, default_value_t = 0.1)]
    nu: f64,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output model file (JSON).
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    csv: bool,
    /// Output scores CSV (id, decision, is_anomaly, rank).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Scores CSV produced by `score`.
    #[arg(long)]
    scores: PathBuf,
    /// Labeled dataset supplying ground truth, joined by id.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out_metrics: PathBuf,
    #[arg(long)]
    out_roc: PathBuf,
    #[arg(long)]
    roc_svg: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    csv: bool,
    /// Comma-separated nu grid; defaults to 0.1..0.9.
    #[arg(long)]
    nus: Option<String>,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityKind {
    Kde,
    Balloon,
    Smoothing,
    Ocsmm,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    csv: bool,
    #[arg(long, value_enum)]
    kind: DensityKind,
    /// Base bandwidth; defaults to the median heuristic sigma.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Query-side bandwidth for balloon/ocsmm.
    #[arg(long, default_value_t = 0.0)]
    test_sigma: f64,
    /// nu for the ocsmm kind.
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Emit raw kernel-expansion values instead of a normalized density
    /// (ocsmm kind only).
    #[arg(long)]
    unnormalized: bool,
    #[arg(long, default_value_t = 101)]
    grid_nodes: usize,
    /// Grid bounds as comma-separated coordinates; default: data hull
    /// plus a 3-bandwidth margin.
    #[arg(long)]
    grid_min: Option<String>,
    #[arg(long)]
    grid_max: Option<String>,
    /// Output grid CSV (coordinates..., density).
    #[arg(long)]
    out: PathBuf,
    /// Optional heatmap (2-D grids only).
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("OCSMM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Score(args) => cmd_score(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Density(args) => cmd_density(args),
    }
}

fn load_dataset(path: &Path, csv: bool) -> Result<GroupDataset, Error> {
    if csv {
        import_csv(path)
    } else {
        load_jsonl(path)
    }
}

fn write_config(out: &Path, config: serde_json::Value) -> Result<(), Error> {
    let path = out.with_extension(match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{ext}.config.json"),
        None => "config.json".to_string(),
    });
    fs::write(path, format!("{config:#}\n"))?;
    Ok(())
}

fn spec_json(spec: &GroupKernelSpec) -> serde_json::Value {
    serde_json::to_value(spec).expect("spec serializes")
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode, Error> {
    let (name, mut dataset) = match args.generator {
        Generator::Rotated => ("rotated", synth_rotated_gaussians(args.seed)),
        Generator::Mixture => ("mixture", synth_mixture_groups(args.seed)),
        Generator::Circle => ("circle", synth_noisy_circle(args.seed, args.count)?),
        Generator::Flower => ("flower", synth_noisy_flower(args.seed, args.count)?),
    };
    if let Some(count) = args.inject {
        dataset = inject_aggregation_anomalies(&dataset, count, args.inject_seed)?;
    }
    save_jsonl(&dataset, &args.out)?;
    if let Some(svg_path) = &args.svg {
        let points: Vec<(f64, f64, bool)> = dataset
            .groups()
            .iter()
            .flat_map(|g| {
                let anomalous = g.label == Some(true);
                g.points.iter().map(move |p| (p[0], p[1], anomalous))
            })
            .collect();
        fs::write(svg_path, svg::scatter(&points))?;
    }
    write_config(
        &args.out,
        json!({
            "command": "synth",
            "generator": name,
            "seed": args.seed,
            "count": args.count,
            "inject": args.inject,
            "inject_seed": args.inject.map(|_| args.inject_seed),
            "groups": dataset.len(),
            "anomalies": dataset.anomaly_count(),
            "provenance": dataset.provenance,
        }),
    )?;
    println!(
        "wrote {} groups ({} labeled anomalous) to {}",
        dataset.len(),
        dataset.anomaly_count(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit(args: FitArgs) -> Result<ExitCode, Error> {
    let dataset = load_dataset(&args.data, args.csv)?;
    let spec = args.kernel.resolve(dataset.groups())?;
    let nu_times_l = args.nu * dataset.len() as f64;
    if nu_times_l < 1.0 {
        eprintln!(
            "warning: nu * l = {nu_times_l:.3} < 1; the box constraint cannot bind and no group can be a margin outlier"
        );
    }
    let model = fit(dataset.groups(), &spec, args.nu, &args.solver.config())?;
    model.save(&args.model_out)?;
    let report = model.fit_report().clone();
    let nu_prop = model.nu_property_check(dataset.groups())?;
    let report_path = args.model_out.with_extension("report.json");
    fs::write(
        &report_path,
        format!(
            "{:#}\n",
            json!({
                "fit_report": report,
                "nu_property": nu_prop,
                "support_groups": model.support_groups().len(),
            })
        ),
    )?;
    write_config(
        &args.model_out,
        json!({
            "command": "fit",
            "data": args.data.display().to_string(),
            "nu": args.nu,
            "spec": spec_json(model.spec()),
            "tol": args.solver.tol,
            "max_iter": args.solver.max_iter,
            "model_out": args.model_out.display().to_string(),
        }),
    )?;
    println!(
        "fit: l={} sv={} rho={} objective={} converged={} (report: {})",
        dataset.len(),
        model.support_groups().len(),
        model.rho(),
        report.objective,
        report.converged,
        report_path.display()
    );
    if !report.converged {
        eprintln!("error: solver did not converge within {} iterations", report.iterations);
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_score(args: ScoreArgs) -> Result<ExitCode, Error> {
    let model = OcsmmModel::load(&args.model)?;
    let dataset = load_dataset(&args.data, args.csv)?;
    let scored = model.score_dataset(dataset.groups())?;
    let mut out = String::from("id,decision,is_anomaly,rank\n");
    for i in 0..scored.group_ids.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            scored.group_ids[i],
            scored.decision[i],
            u8::from(scored.is_anomaly[i]),
            scored.rank[i]
        ));
    }
    fs::write(&args.out, out)?;
    write_config(
        &args.out,
        json!({
            "command": "score",
            "model": args.model.display().to_string(),
            "data": args.data.display().to_string(),
            "spec": spec_json(model.spec()),
            "rho": model.rho(),
            "groups": dataset.len(),
            "flagged": scored.is_anomaly.iter().filter(|&&a| a).count(),
        }),
    )?;
    println!(
        "scored {} groups, {} flagged anomalous -> {}",
        dataset.len(),
        scored.is_anomaly.iter().filter(|&&a| a).count(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_scores_csv(path: &Path) -> Result<Vec<(String, f64)>, Error> {
    let content = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if idx == 0 {
            if !line.starts_with("id,decision") {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected scores CSV header id,decision,is_anomaly,rank".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let decision: f64 = fields[1].parse().map_err(|e| Error::Parse {
            line: idx + 1,
            message: format!("bad decision value: {e}"),
        })?;
        rows.push((fields[0].to_string(), decision));
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no score rows".into()));
    }
    Ok(rows)
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode, Error> {
    let scores = parse_scores_csv(&args.scores)?;
    let dataset = load_dataset(&args.data, false)?;
    let labels_by_id: HashMap<&str, bool> = dataset
        .groups()
        .iter()
        .map(|g| (g.id.as_str(), g.label.unwrap_or(false)))
        .collect();
    let mut anomaly_scores = Vec::with_capacity(scores.len());
    let mut labels = Vec::with_capacity(scores.len());
    for (id, decision) in &scores {
        let label = labels_by_id.get(id.as_str()).ok_or_else(|| {
            Error::InvalidArgument(format!("group '{id}' from scores not present in dataset"))
        })?;
        anomaly_scores.push(-decision);
        labels.push(*label);
    }
    let roc = roc_auc(&anomaly_scores, &labels)?;
    fs::write(
        &args.out_metrics,
        format!("metric,value\nauc,{}\nap,{}\n", roc.auc, roc.ap),
    )?;
    let mut roc_csv = String::from("fpr,tpr\n");
    for (f, t) in roc.fpr.iter().zip(&roc.tpr) {
        roc_csv.push_str(&format!("{f},{t}\n"));
    }
    fs::write(&args.out_roc, roc_csv)?;
    if let Some(svg_path) = &args.roc_svg {
        fs::write(svg_path, svg::roc(&roc.fpr, &roc.tpr, roc.auc))?;
    }
    write_config(
        &args.out_metrics,
        json!({
            "command": "eval",
            "scores": args.scores.display().to_string(),
            "data": args.data.display().to_string(),
            "auc": roc.auc,
            "ap": roc.ap,
        }),
    )?;
    println!("auc {} ap {} -> {}", roc.auc, roc.ap, args.out_metrics.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, Error> {
    let dataset = load_dataset(&args.data, args.csv)?;
    let spec = args.kernel.resolve(dataset.groups())?;
    let nus: Vec<f64> = match &args.nus {
        None => DEFAULT_NU_GRID.to_vec(),
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad nu value '{s}': {e}")))
            })
            .collect::<Result<Vec<f64>, Error>>()?,
    };
    let rows = nu_sweep(&dataset, &spec, &nus, &args.solver.config())?;
    let mut out = String::from("nu,auc,ap,outlier_fraction,sv_fraction,converged\n");
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.nu,
            r.auc,
            r.ap,
            r.outlier_fraction,
            r.sv_fraction,
            u8::from(r.converged)
        ));
    }
    fs::write(&args.out, out)?;
    write_config(
        &args.out,
        json!({
            "command": "sweep",
            "data": args.data.display().to_string(),
            "nus": nus,
            "spec": spec_json(&spec),
            "tol": args.solver.tol,
            "max_iter": args.solver.max_iter,
        }),
    )?;
    let best = rows.iter().map(|r| r.auc).fold(f64::NAN, f64::max);
    println!("{} rows, best auc {} -> {}", rows.len(), best, args.out.display());
    if rows.iter().any(|r| !r.converged) {
        eprintln!("error: at least one sweep row did not converge");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_coords(raw: &str, dim: usize) -> Result<Vec<f64>, Error> {
    let values: Vec<f64> = raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad coordinate '{s}': {e}")))
        })
        .collect::<Result<Vec<f64>, Error>>()?;
    if values.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "expected {dim} coordinates, got {}",
            values.len()
        )));
    }
    Ok(values)
}

fn cmd_density(args: DensityArgs) -> Result<ExitCode, Error> {
    let dataset = load_dataset(&args.data, args.csv)?;
    let dim = dataset.dim();
    if dim > 2 {
        return Err(Error::InvalidArgument(format!(
            "density grids are supported for d <= 2, dataset has d = {dim}"
        )));
    }
    let centers: Vec<Vec<f64>> = dataset
        .groups()
        .iter()
        .flat_map(|g| g.points.iter().cloned())
        .collect();
    let bandwidth = match args.bandwidth {
        Some(h) => h,
        None => median_heuristic(dataset.groups())?.sqrt(),
    };
    let (estimate, kind_name, extra): (DensityModel, &str, serde_json::Value) = match args.kind {
        DensityKind::Kde => (
            DensityModel::fixed_kde(centers.clone(), bandwidth)?,
            "kde",
            json!({}),
        ),
        DensityKind::Balloon => (
            DensityModel::balloon(centers.clone(), bandwidth, args.test_sigma)?,
            "balloon",
            json!({ "test_sigma": args.test_sigma }),
        ),
        DensityKind::Smoothing => {
            let mut sigmas = Vec::with_capacity(centers.len());
            for g in dataset.groups() {
                let omega = g.omega.as_ref().ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "--kind smoothing needs per-point omega (group '{}' has none)",
                        g.id
                    ))
                })?;
                for &w in omega {
                    sigmas.push((bandwidth * bandwidth + w).sqrt());
                }
            }
            (
                DensityModel::sample_smoothing(centers.clone(), sigmas)?,
                "smoothing",
                json!({ "widths": "sqrt(bandwidth^2 + omega_i)" }),
            )
        }
        DensityKind::Ocsmm => {
            let spec = GroupKernelSpec::analytic(bandwidth)?;
            let model = fit(dataset.groups(), &spec, args.nu, &FitConfig::default())?;
            if !model.fit_report().converged {
                eprintln!("error: density fit did not converge");
                return Ok(ExitCode::from(3));
            }
            let sv = model.support_groups().len();
            (
                DensityModel::ocsmm(model, args.test_sigma, !args.unnormalized)?,
                "ocsmm",
                json!({
                    "nu": args.nu,
                    "test_sigma": args.test_sigma,
                    "normalized": !args.unnormalized,
                    "support": sv,
                }),
            )
        }
    };

    let margin = 3.0 * (bandwidth * bandwidth + args.test_sigma * args.test_sigma).sqrt();
    let grid = match (&args.grid_min, &args.grid_max) {
        (Some(lo), Some(hi)) => GridSpec::new(
            parse_coords(lo, dim)?,
            parse_coords(hi, dim)?,
            args.grid_nodes,
        )?,
        (None, None) => GridSpec::around(&centers, margin, args.grid_nodes)?,
        _ => {
            return Err(Error::InvalidArgument(
                "--grid-min and --grid-max must be given together".into(),
            ))
        }
    };

    let points = grid.points();
    let mut values = Vec::with_capacity(points.len());
    for p in &points {
        values.push(estimate.eval(p)?);
    }
    let mut out = String::new();
    out.push_str(if dim == 1 { "x1,density\n" } else { "x1,x2,density\n" });
    for (p, v) in points.iter().zip(&values) {
        for c in p {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{v}\n"));
    }
    fs::write(&args.out, out)?;
    if let Some(svg_path) = &args.svg {
        if dim != 2 {
            return Err(Error::InvalidArgument("--svg heatmaps need a 2-D grid".into()));
        }
        fs::write(svg_path, svg::heatmap(args.grid_nodes, &values))?;
    }
    write_config(
        &args.out,
        json!({
            "command": "density",
            "data": args.data.display().to_string(),
            "kind": kind_name,
            "bandwidth": bandwidth,
            "grid_nodes": args.grid_nodes,
            "grid_min": grid.mins,
            "grid_max": grid.maxs,
            "options": extra,
        }),
    )?;
    println!("evaluated {} grid points -> {}", points.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
