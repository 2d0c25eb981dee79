use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gpdr::experiment::ExperimentConfig;
use gpdr::rng::seeded;
use rand_distr::{Distribution, Normal};

/// Three Gaussian blobs in four dimensions, written as a labelled CSV.
pub fn blobs_csv(dir: &Path, per_class: usize) -> PathBuf {
    let mut rng = seeded(77);
    let noise = Normal::new(0.0, 0.6).unwrap();
    let centres = [[0.0, 0.0, 0.0, 0.0], [3.0, 0.0, 1.0, -1.0], [0.0, 3.0, -1.0, 2.0]];
    let mut text = String::from("a,b,c,d,class\n");
    for (label, centre) in ["red", "green", "blue"].iter().zip(centres) {
        for _ in 0..per_class {
            for c in centre {
                write!(text, "{:.5},", c + noise.sample(&mut rng)).unwrap();
            }
            writeln!(text, "{label}").unwrap();
        }
    }
    let path = dir.join("blobs.csv");
    std::fs::write(&path, text).unwrap();
    path
}

/// A configuration small enough to run every method in seconds.
pub fn tiny_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        dataset: blobs_csv(dir, 30),
        output: dir.join("results"),
        k: vec![2],
        runs: 2,
        seed: 5,
        n_neighbors: 6,
        ..Default::default()
    };
    cfg.gp.population = 24;
    cfg.gp.generations = 3;
    cfg.gp.batch_size = 20;
    cfg.teacher.epochs = 20;
    cfg.eval.folds = 3;
    cfg.eval.forest.trees = 10;
    cfg.eval.decoder.epochs = 20;
    cfg
}
