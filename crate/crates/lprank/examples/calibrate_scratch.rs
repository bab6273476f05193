// Scratch calibration probe (temporary).

use std::time::Instant;

use lprank::dataset::SyntheticSpec;
use lprank::harness::{run_group, ExperimentConfig};
use lprank::metrics::median;
use lprank::qmodel::ModelWidths;
use lprank::ssl::{Method, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let noise: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let n_seeds: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let labels: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(30);
    let lr0: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let iters: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let w1: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(16);
    let batch: Option<usize> = args.get(7).and_then(|s| s.parse().ok());
    let lambda: f64 = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let refresh: usize = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(50);
    let ssl_iters: usize = args.get(10).and_then(|s| s.parse().ok()).unwrap_or(iters);

    let cfg = ExperimentConfig {
        synthetic: Some(SyntheticSpec {
            n_videos: 1200,
            frame_dim: 32,
            video_dim: 8,
            fps: 30.0,
            duration: 8.0,
            noise_scale: noise,
            seed: 2024,
        }),
        train: TrainConfig {
            widths: ModelWidths {
                f_hidden: [w1, w1 / 2],
                g_hidden: w1 / 2,
            },
            lr0,
            warmup_iters: iters,
            ssl_iters,
            refresh_every: refresh,
            batch_size: batch,
            lambda,
            ..TrainConfig::default()
        },
        jobs: 2,
        ..ExperimentConfig::default()
    };
    let (dataset, records) = cfg.load_records().unwrap();
    let seeds: Vec<u64> = (0..n_seeds as u64).collect();

    let mut sup: Vec<Option<f64>> = Vec::new();
    for method in [Method::Supervised, Method::Lpr] {
        let t0 = Instant::now();
        let outcomes =
            run_group(&records, &dataset, method, labels, &seeds, &cfg.train, cfg.jobs).unwrap();
        let all: Vec<Option<f64>> = outcomes.iter().map(|o| o.row.srocc).collect();
        let present: Vec<f64> = all.iter().filter_map(|&s| s).collect();
        println!(
            "noise={noise} lr={lr0} iters={iters} w={w1} lam={lambda} labels={labels} {method}: median={:.4?} n_absent={} elapsed={:.1?}",
            median(&present),
            all.iter().filter(|s| s.is_none()).count(),
            t0.elapsed()
        );
        if method == Method::Supervised {
            sup = all;
        } else {
            let gaps: Vec<f64> = all
                .iter()
                .zip(&sup)
                .filter_map(|(l, s)| Some(l.unwrap_or(f64::NAN) - s.unwrap_or(f64::NAN)))
                .collect();
            println!(
                "  per-seed gaps: {:?}",
                gaps.iter().map(|g| (g * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            );
            let firsts: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.report.refreshes.first().and_then(|r| r.rank_accuracy))
                .collect();
            let lasts: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.report.refreshes.last().and_then(|r| r.rank_accuracy))
                .collect();
            let deltas: Vec<f64> = firsts
                .iter()
                .zip(&lasts)
                .map(|(f, l)| ((l - f) * 10000.0).round() / 10000.0)
                .collect();
            println!("  acc first->last deltas: {:?} median={:?}", deltas, median(&deltas));
        }
    }
}
