//! Three interactive operations for the browser page in `www/`:
//! evolving a 2-D formula embedding of a toy dataset, comparing plain and
//! weighted Kendall τ of two distance rankings, and measuring geodesic
//! against straight-line distance on a sampled circle.
//!
//! Every export returns a JSON string; errors come back as `{"error": ...}`.

use gpdr::distances::{geodesic, pairwise_euclidean};
use gpdr::evolution::{evolve_observed, GpRunConfig};
use gpdr::fitness::{kendall_tau_row, weighted_kendall_tau_row, FitnessContext, FitnessSpec, Metric, WeightScheme};
use gpdr::numerics::Matrix;
use gpdr::rng::seeded;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

const TOY_NAMES: [&str; 3] = ["blobs", "helix", "rings"];

#[derive(Debug, Serialize)]
pub struct Embedding {
    pub dataset: String,
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub expressions: Vec<String>,
    pub history: Vec<f64>,
    pub fitness: f64,
}

#[derive(Debug, Serialize)]
pub struct TauReport {
    pub kendall: f64,
    pub weighted: f64,
    pub concordant: Vec<(usize, usize, bool)>,
}

#[derive(Debug, Serialize)]
pub struct CircleReport {
    pub points: Vec<[f64; 2]>,
    pub euclidean: f64,
    pub geodesic: f64,
    pub arc: f64,
    pub path: Vec<usize>,
}

fn json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| format!(r#"{{"error":"{e}"}}"#)),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

/// A labelled 3-D toy dataset: `blobs`, `helix` or `rings`.
pub fn toy_dataset(name: &str, n: usize, seed: u64) -> Result<(Matrix, Vec<usize>), String> {
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, 0.15).unwrap();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 3;
        let t = i as f64 / n as f64;
        let mut e = || noise.sample(&mut rng);
        let row = match name {
            "blobs" => {
                let c = [[0.0, 0.0, 0.0], [2.5, 0.5, 1.0], [0.5, 2.5, -1.0]][class];
                vec![c[0] + 2.0 * e(), c[1] + 2.0 * e(), c[2] + 2.0 * e()]
            }
            "helix" => {
                let a = 4.0 * std::f64::consts::PI * t;
                labels.push((3.0 * t) as usize);
                rows.push(vec![a.cos() + e(), a.sin() + e(), 2.0 * t + e()]);
                continue;
            }
            "rings" => {
                let a = 2.0 * std::f64::consts::PI * (i / 3) as f64 / (n / 3).max(1) as f64;
                let r = 1.0 + class as f64;
                vec![r * a.cos() + e(), r * a.sin() + e(), e()]
            }
            other => return Err(format!("unknown toy dataset {other:?}; choose one of {TOY_NAMES:?}")),
        };
        rows.push(row);
        labels.push(class);
    }
    Ok((Matrix::from_rows(&rows).map_err(|e| e.to_string())?, labels))
}

/// Evolve a 2-tree formula embedding of a toy dataset under Sammon stress
/// (`objective = "dist"`) or hyperbolic-weighted rank agreement (`"rank"`).
pub fn embed(name: &str, objective: &str, population: usize, generations: usize, seed: u64) -> Result<Embedding, String> {
    let (x, labels) = toy_dataset(name, 90, seed)?;
    let spec = match objective {
        "dist" => FitnessSpec::Dist { metric: Metric::Euclidean },
        "rank" => FitnessSpec::Rank {
            metric: Metric::Euclidean,
            weights: WeightScheme::Hyperbolic,
        },
        other => return Err(format!("unknown objective {other:?}; use \"dist\" or \"rank\"")),
    };
    let ctx = FitnessContext::new(spec, x.clone(), x.clone(), None).map_err(|e| e.to_string())?;
    let cfg = GpRunConfig {
        population: population.clamp(10, 500),
        generations: generations.clamp(1, 100),
        batch_size: 45,
        k: 2,
        seed,
        ..Default::default()
    };
    let result = evolve_observed(&ctx, &cfg, |_| {}).map_err(|e| e.to_string())?;
    let latent = result.best.latent(&x).map_err(|e| e.to_string())?;
    Ok(Embedding {
        dataset: name.to_string(),
        points: (0..latent.rows()).map(|i| [latent.get(i, 0), latent.get(i, 1)]).collect(),
        labels,
        expressions: result.expressions,
        history: result.history,
        fitness: result.best_fitness,
    })
}

/// Plain and hyperbolic-weighted τ of one distance row against another,
/// plus the concordance of every item pair.
pub fn tau(d: &[f64], dt: &[f64]) -> Result<TauReport, String> {
    if d.len() != dt.len() || d.len() < 2 {
        return Err(format!("need two rows of equal length ≥ 2, got {} and {}", d.len(), dt.len()));
    }
    if d.iter().chain(dt).any(|v| !v.is_finite()) {
        return Err("distances must be finite numbers".into());
    }
    let mut concordant = Vec::new();
    for i in 0..d.len() {
        for j in i + 1..d.len() {
            concordant.push((i, j, (d[i] - d[j]) * (dt[i] - dt[j]) > 0.0));
        }
    }
    Ok(TauReport {
        kendall: kendall_tau_row(d, dt),
        weighted: weighted_kendall_tau_row(d, dt, WeightScheme::Hyperbolic),
        concordant,
    })
}

/// Geodesic and Euclidean distance between antipodal points of an
/// `n`-point circle whose neighbourhood graph uses `nn` neighbours.
pub fn circle(n: usize, nn: usize) -> Result<CircleReport, String> {
    if !(4..=400).contains(&n) {
        return Err("circle needs between 4 and 400 points".into());
    }
    let points: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    let x = Matrix::from_rows(&points.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    let g = geodesic(&x, nn).map_err(|e| e.to_string())?;
    let e = pairwise_euclidean(&x);
    let far = n / 2;
    let mut path = vec![far];
    let mut at = far;
    while at != 0 {
        at = (0..n)
            .filter(|&j| j != at && (g.get(0, j) + e.get(j, at) - g.get(0, at)).abs() < 1e-9 && g.get(0, j) < g.get(0, at))
            .min_by(|&a, &b| g.get(0, a).total_cmp(&g.get(0, b)))
            .unwrap_or(0);
        path.push(at);
    }
    path.reverse();
    Ok(CircleReport {
        points,
        euclidean: e.get(0, far),
        geodesic: g.get(0, far),
        arc: std::f64::consts::PI * 2.0 * far as f64 / n as f64,
        path,
    })
}

#[wasm_bindgen]
pub fn toy_names() -> String {
    json(Ok(TOY_NAMES))
}

#[wasm_bindgen]
pub fn evolve_embedding(dataset: &str, objective: &str, population: usize, generations: usize, seed: u32) -> String {
    json(embed(dataset, objective, population, generations, u64::from(seed)))
}

#[wasm_bindgen]
pub fn kendall(d: Vec<f64>, dt: Vec<f64>) -> String {
    json(tau(&d, &dt))
}

#[wasm_bindgen]
pub fn circle_geodesic(n: usize, nn: usize) -> String {
    json(circle(n, nn))
}
