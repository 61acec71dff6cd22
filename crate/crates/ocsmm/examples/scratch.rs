use ocsmm::data::{
    circle_truth_density, flower_curve, synth_noisy_circle, synth_noisy_flower, SHAPE_NOISE_VAR,
};
use ocsmm::density::{DensityModel, GridSpec};
use ocsmm::eval::density_ise;
use ocsmm::kernel::median_heuristic;
use ocsmm::model::{fit, FitConfig};
use ocsmm::rng::Stream;
use ocsmm::GroupKernelSpec;

/// Histogram of 1e6 pre-corruption flower samples, binned on the grid cells.
fn flower_truth_grid(seed: u64, grid: &GridSpec) -> Vec<f64> {
    let n = grid.nodes;
    let (x0, y0) = (grid.mins[0], grid.mins[1]);
    let dx = (grid.maxs[0] - grid.mins[0]) / (n - 1) as f64;
    let dy = (grid.maxs[1] - grid.mins[1]) / (n - 1) as f64;
    let mut counts = vec![0u32; n * n];
    let mut stream = Stream::new(seed ^ 0xFEED);
    let total = 1_000_000usize;
    let eps = SHAPE_NOISE_VAR.sqrt();
    for _ in 0..total {
        let theta = 2.0 * std::f64::consts::PI * (1.0 - stream.uniform01());
        let c = flower_curve(theta);
        let px = c[0] + eps * stream.standard_normal();
        let py = c[1] + eps * stream.standard_normal();
        // nearest node = cell center
        let i = ((px - x0) / dx + 0.5).floor();
        let j = ((py - y0) / dy + 0.5).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < n && (j as usize) < n {
            counts[(i as usize) * n + (j as usize)] += 1;
        }
    }
    counts
        .iter()
        .map(|&c| c as f64 / (total as f64 * dx * dy))
        .collect()
}

fn main() {
    let nodes = 101;
    for shape in ["circle", "flower"] {
        for nu in [1.0f64, 0.5] {
            {
                let mut wins = 0;
                let mut ratios = Vec::new();
                for seed in 0..10u64 {
                    let ds = if shape == "circle" {
                        synth_noisy_circle(seed, 500).unwrap()
                    } else {
                        synth_noisy_flower(seed, 500).unwrap()
                    };
                    let centers: Vec<Vec<f64>> =
                        ds.groups().iter().map(|g| g.points[0].clone()).collect();
                    let h_kde = median_heuristic(ds.groups()).unwrap().sqrt();
                    let sigma = ocsmm::kernel::median_heuristic_noise_corrected(ds.groups())
                        .unwrap()
                        .sqrt();
                    let extent = if shape == "circle" { 2.0 } else { 3.5 };
                    let grid = GridSpec::new(
                        vec![-extent, -extent],
                        vec![extent, extent],
                        nodes,
                    )
                    .unwrap();
                    // truth per node
                    let truth: Vec<f64> = if shape == "circle" {
                        grid.points()
                            .iter()
                            .map(|p| circle_truth_density(p, SHAPE_NOISE_VAR))
                            .collect()
                    } else {
                        flower_truth_grid(seed, &grid)
                    };
                    let pts = grid.points();
                    let truth_at = move |y: &[f64]| -> f64 {
                        // nearest node lookup (pts row-major)
                        let n = nodes;
                        let dx = (2.0 * extent) / (n - 1) as f64;
                        let i = ((y[0] + extent) / dx).round() as usize;
                        let j = ((y[1] + extent) / dx).round() as usize;
                        truth[i * n + j]
                    };
                    let _ = &pts;
                    let kde = DensityModel::fixed_kde(centers.clone(), sigma).unwrap();
                    let ise_kde = density_ise(&kde, &truth_at, &grid).unwrap();
                    let spec = GroupKernelSpec::analytic(sigma).unwrap();
                    let model = fit(ds.groups(), &spec, nu, &FitConfig::default()).unwrap();
                    let oc = DensityModel::ocsmm(model, 0.0, true).unwrap();
                    let ise_oc = density_ise(&oc, &truth_at, &grid).unwrap();
                    if ise_oc < ise_kde {
                        wins += 1;
                    }
                    ratios.push(((ise_oc / ise_kde) * 100.0).round() / 100.0);
                }
                println!(
                    "{shape} sscale {sscale:>5} nu {nu:>4}: ocsmm wins {wins}/10 ise-ratio {ratios:?}"
                );
            }
        }
    }
}
