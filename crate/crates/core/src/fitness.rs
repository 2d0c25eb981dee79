//! The four fitness objectives. All are minimised.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::distances::{geodesic, pairwise_euclidean, DistanceMatrix, DEFAULT_NEIGHBORS};
use crate::error::{invalid, Error, Result};
use crate::gp::Genome;
use crate::numerics::Matrix;

/// Sammon stress between original distances `d` and embedded distances `dt`.
/// Pairs with a (near) zero original distance are left out of both sums.
pub fn sammon_stress(d: &DistanceMatrix, dt: &DistanceMatrix) -> Result<f64> {
    if d.n() != dt.n() {
        return Err(invalid(format!("distance matrices of size {} and {}", d.n(), dt.n())));
    }
    let mut total = 0.0;
    let mut stress = 0.0;
    for i in 0..d.n() {
        let (row, trow) = (d.row(i), dt.row(i));
        for j in (i + 1)..d.n() {
            let dij = row[j];
            if dij < 1e-12 {
                continue;
            }
            let diff = dij - trow[j];
            total += dij;
            stress += diff * diff / dij;
        }
    }
    if total == 0.0 {
        return Err(Error::DegenerateTarget("all original distances are zero".into()));
    }
    Ok(stress / total)
}

/// Per-item weights for the weighted rank correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Uniform,
    /// `w = 1 / (r + 1)` where `r` is the item's rank by original distance,
    /// rank 0 being the nearest.
    #[default]
    Hyperbolic,
}

impl WeightScheme {
    pub fn weight(self, rank: usize) -> f64 {
        match self {
            WeightScheme::Uniform => 1.0,
            WeightScheme::Hyperbolic => 1.0 / (rank as f64 + 1.0),
        }
    }
}

/// Counts of concordant, discordant and total pairs in one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankStats {
    pub concordant: u64,
    pub discordant: u64,
    pub pairs: u64,
}

struct Fenwick(Vec<u32>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Self(vec![0; n + 1])
    }

    fn add(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted positions `< i`.
    fn prefix(&self, i: usize) -> u32 {
        let mut i = i;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i &= i - 1;
        }
        s
    }
}

/// Ascending order of `v` (ties by index) and each item's position in it.
fn ordinal_ranks(v: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut rank = vec![0; v.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    (order, rank)
}

/// Integer key with the same order as `f64::total_cmp`, except that both
/// zeros map to one key.
fn order_key(x: f64) -> u64 {
    let bits = (x + 0.0).to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Dense ranks of `v`: equal values share a rank.
fn dense_ranks(v: &[f64]) -> (Vec<usize>, usize) {
    let mut sorted: Vec<(u64, u32)> = v.iter().map(|&x| order_key(x)).zip(0..).collect();
    sorted.sort_unstable();
    let mut rank = vec![0; v.len()];
    let mut r = 0;
    for w in 0..sorted.len() {
        if w > 0 && sorted[w].0 != sorted[w - 1].0 {
            r += 1;
        }
        rank[sorted[w].1 as usize] = r;
    }
    (rank, if v.is_empty() { 0 } else { r + 1 })
}

/// For every item `j`, (#concordant − #discordant) over its partners `l ≠ j`.
/// Pairs tied in either vector count as neither. O(N log N).
///
/// Only items listed in `d_order` take part; the others are ignored.
fn concordance_balance(d: &[f64], dt: &[f64], d_order: &[usize]) -> Vec<i64> {
    let n = d_order.len();
    let (dt_rank, levels) = dense_ranks(dt);
    let mut balance = vec![0i64; d.len()];
    let mut tree = Fenwick::new(levels);

    // partners with smaller d: concordant iff their dt is smaller
    let mut inserted = 0u32;
    let mut g = 0;
    while g < n {
        let mut h = g;
        while h < n && d[d_order[h]] == d[d_order[g]] {
            h += 1;
        }
        for &j in &d_order[g..h] {
            let below = tree.prefix(dt_rank[j]);
            let above = inserted - tree.prefix(dt_rank[j] + 1);
            balance[j] += i64::from(below) - i64::from(above);
        }
        for &j in &d_order[g..h] {
            tree.add(dt_rank[j]);
            inserted += 1;
        }
        g = h;
    }

    // partners with larger d: concordant iff their dt is larger
    let mut tree = Fenwick::new(levels);
    let mut inserted = 0u32;
    let mut h = n;
    while h > 0 {
        let mut g = h;
        while g > 0 && d[d_order[g - 1]] == d[d_order[h - 1]] {
            g -= 1;
        }
        for &j in &d_order[g..h] {
            let below = tree.prefix(dt_rank[j]);
            let above = inserted - tree.prefix(dt_rank[j] + 1);
            balance[j] += i64::from(above) - i64::from(below);
        }
        for &j in &d_order[g..h] {
            tree.add(dt_rank[j]);
            inserted += 1;
        }
        h = g;
    }
    balance
}

fn check_row(d: &[f64], dt: &[f64]) {
    assert_eq!(d.len(), dt.len(), "rank rows must have equal length");
    assert!(d.len() >= 2, "rank rows need at least two entries");
}

/// Concordant/discordant pair counts of one row pair.
pub fn rank_stats(d: &[f64], dt: &[f64]) -> RankStats {
    check_row(d, dt);
    let (order, _) = ordinal_ranks(d);
    let n = d.len() as u64;
    // every pair appears in two balances
    let net = concordance_balance(d, dt, &order).iter().sum::<i64>() / 2;
    let pairs = n * (n - 1) / 2;
    let untied = (pairs + tied_joint(d, dt) - tied_pairs(d) - tied_pairs(dt)) as i64;
    RankStats {
        concordant: ((untied + net) / 2) as u64,
        discordant: ((untied - net) / 2) as u64,
        pairs,
    }
}

fn tied_pairs(v: &[f64]) -> u64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    run_pairs(s.chunk_by(|a, b| a == b).map(<[f64]>::len))
}

fn tied_joint(d: &[f64], dt: &[f64]) -> u64 {
    let mut s: Vec<(f64, f64)> = d.iter().copied().zip(dt.iter().copied()).collect();
    s.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    run_pairs(s.chunk_by(|a, b| a == b).map(<[(f64, f64)]>::len))
}

fn run_pairs(runs: impl Iterator<Item = usize>) -> u64 {
    runs.map(|r| (r * (r.saturating_sub(1)) / 2) as u64).sum()
}

/// Kendall's τ-a: `(n_c − n_d) / (N(N−1)/2)`; tied pairs count as neither.
///
/// # Panics
/// If the rows differ in length or have fewer than two entries.
pub fn kendall_tau_row(d: &[f64], dt: &[f64]) -> f64 {
    check_row(d, dt);
    let (order, _) = ordinal_ranks(d);
    let total: i64 = concordance_balance(d, dt, &order).iter().sum();
    let n = d.len() as f64;
    total as f64 / (n * (n - 1.0))
}

/// Weighted τ with additive pair weights `w(r_j) + w(r_l)`, ranks taken
/// from ascending `d`: `Σ (w_j + w_l)·s_jl / Σ (w_j + w_l)` where `s_jl` is
/// +1, −1 or 0 for concordant, discordant or tied pairs.
///
/// # Panics
/// If the rows differ in length or have fewer than two entries.
pub fn weighted_kendall_tau_row(d: &[f64], dt: &[f64], scheme: WeightScheme) -> f64 {
    check_row(d, dt);
    let (order, _) = ordinal_ranks(d);
    weighted_tau_with_order(d, dt, &order, scheme)
}

fn weighted_tau_with_order(d: &[f64], dt: &[f64], d_order: &[usize], scheme: WeightScheme) -> f64 {
    let balance = concordance_balance(d, dt, d_order);
    let partners = (d_order.len() - 1) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (r, &j) in d_order.iter().enumerate() {
        let w = scheme.weight(r);
        num += w * balance[j] as f64;
        den += w * partners;
    }
    num / den
}

/// Negated mean over points of the weighted τ between each point's
/// original and embedded distance rows (self-distance excluded).
pub fn rank_fitness(d: &DistanceMatrix, dt: &DistanceMatrix, scheme: WeightScheme) -> Result<f64> {
    if d.n() != dt.n() {
        return Err(invalid(format!("distance matrices of size {} and {}", d.n(), dt.n())));
    }
    if d.n() < 3 {
        return Err(invalid("rank fitness needs at least three points"));
    }
    let n = d.n();
    let taus = crate::par::map_indices(n, |i| {
        let row = d.row_without_self(i);
        let trow = dt.row_without_self(i);
        weighted_kendall_tau_row(&row, &trow, scheme)
    });
    Ok(-taus.iter().sum::<f64>() / n as f64)
}

fn mean_squared_difference(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(invalid(format!("shapes {:?} and {:?} differ", a.shape(), b.shape())));
    }
    if a.as_slice().is_empty() {
        return Err(invalid("empty matrices"));
    }
    let s: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / a.as_slice().len() as f64)
}

/// Mean squared difference between teacher latent `l` and evolved latent `xt`.
pub fn teacher_fitness(l: &Matrix, xt: &Matrix) -> Result<f64> {
    mean_squared_difference(l, xt)
}

/// Mean squared reconstruction error of the evolved decoder.
pub fn gp_autoencoder_fitness(target: &Matrix, reconstruction: &Matrix) -> Result<f64> {
    mean_squared_difference(target, reconstruction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    Geodesic,
}

/// Which objective scores a genome. Distances on the latent side are
/// always Euclidean; `metric` applies to the original (target) space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "objective", rename_all = "snake_case")]
pub enum FitnessSpec {
    Dist { metric: Metric },
    Rank { metric: Metric, weights: WeightScheme },
    Teacher,
    GpAutoencoder,
}

impl FitnessSpec {
    pub fn needs_autoencoder(&self) -> bool {
        matches!(self, FitnessSpec::GpAutoencoder)
    }

    pub fn metric(&self) -> Option<Metric> {
        match self {
            FitnessSpec::Dist { metric } | FitnessSpec::Rank { metric, .. } => Some(*metric),
            _ => None,
        }
    }
}

/// Everything needed to score genomes for one run: the genome inputs, the
/// PCA-space target and whatever the objective derives from it, all over
/// the same rows. Batches index into these rows.
#[derive(Debug, Clone)]
pub struct FitnessContext {
    pub spec: FitnessSpec,
    pub inputs: Matrix,
    pub target: Matrix,
    target_distances: Option<DistanceMatrix>,
    teacher_latent: Option<Matrix>,
    /// Per row, the other rows in ascending target distance (ties by index);
    /// built on the first full-data rank scoring.
    full_rank_orders: OnceLock<Vec<Vec<usize>>>,
}

impl FitnessContext {
    pub fn new(spec: FitnessSpec, inputs: Matrix, target: Matrix, teacher_latent: Option<Matrix>) -> Result<Self> {
        Self::with_neighbors(spec, inputs, target, teacher_latent, DEFAULT_NEIGHBORS)
    }

    pub fn with_neighbors(
        spec: FitnessSpec,
        inputs: Matrix,
        target: Matrix,
        teacher_latent: Option<Matrix>,
        n_neighbors: usize,
    ) -> Result<Self> {
        if inputs.rows() != target.rows() {
            return Err(invalid(format!(
                "{} input rows but {} target rows",
                inputs.rows(),
                target.rows()
            )));
        }
        let target_distances = match spec.metric() {
            Some(Metric::Euclidean) => Some(pairwise_euclidean(&target)),
            Some(Metric::Geodesic) => Some(geodesic(&target, n_neighbors.min(target.rows() - 1))?),
            None => None,
        };
        match (&spec, &teacher_latent) {
            (FitnessSpec::Teacher, Some(l)) if l.rows() == inputs.rows() => {}
            (FitnessSpec::Teacher, Some(l)) => {
                return Err(invalid(format!("teacher latent has {} rows, expected {}", l.rows(), inputs.rows())))
            }
            (FitnessSpec::Teacher, None) => return Err(Error::Config("teacher objective needs a teacher latent".into())),
            (_, Some(_)) => return Err(Error::Config("teacher latent given for a non-teacher objective".into())),
            _ => {}
        }
        Ok(Self {
            spec,
            inputs,
            target,
            target_distances,
            teacher_latent,
            full_rank_orders: OnceLock::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.inputs.rows()
    }

    pub fn target_distances(&self) -> Option<&DistanceMatrix> {
        self.target_distances.as_ref()
    }

    pub fn teacher_latent(&self) -> Option<&Matrix> {
        self.teacher_latent.as_ref()
    }

    /// Checks the genome representation and shapes against the objective.
    pub fn check_genome(&self, genome: &Genome) -> Result<()> {
        let enc = genome.encoder();
        if enc.input_arity() != self.inputs.cols() {
            return Err(invalid(format!(
                "genome reads {} inputs, data has {}",
                enc.input_arity(),
                self.inputs.cols()
            )));
        }
        match (&self.spec, genome) {
            (FitnessSpec::GpAutoencoder, Genome::Autoencoder(a)) => {
                if a.decoder.k() != self.target.cols() {
                    return Err(invalid(format!(
                        "decoder has {} outputs, target has {} columns",
                        a.decoder.k(),
                        self.target.cols()
                    )));
                }
            }
            (FitnessSpec::GpAutoencoder, Genome::Multi(_)) => {
                return Err(Error::Config("the autoencoder objective needs encoder/decoder genomes".into()))
            }
            (_, Genome::Autoencoder(_)) => {
                return Err(Error::Config("only the autoencoder objective scores encoder/decoder genomes".into()))
            }
            (FitnessSpec::Teacher, Genome::Multi(m)) => {
                let l = self.teacher_latent.as_ref().expect("checked at construction");
                if m.k() != l.cols() {
                    return Err(invalid(format!("genome has {} trees, teacher latent {} columns", m.k(), l.cols())));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn try_score(&self, genome: &Genome, batch: &[usize]) -> Result<f64> {
        let x = self.inputs.select_rows(batch);
        match (&self.spec, genome) {
            (FitnessSpec::Dist { .. }, Genome::Multi(m)) => {
                let d = self.batch_distances(batch);
                sammon_stress(&d, &pairwise_euclidean(&m.encode(&x)?))
            }
            (FitnessSpec::Rank { weights, .. }, Genome::Multi(m)) => {
                let d = self.batch_distances(batch);
                rank_fitness(&d, &pairwise_euclidean(&m.encode(&x)?), *weights)
            }
            (FitnessSpec::Teacher, Genome::Multi(m)) => {
                let l = self.teacher_latent.as_ref().expect("checked at construction");
                teacher_fitness(&l.select_rows(batch), &m.encode(&x)?)
            }
            (FitnessSpec::GpAutoencoder, Genome::Autoencoder(a)) => {
                let (_, recon) = a.autoencode(&x)?;
                gp_autoencoder_fitness(&self.target.select_rows(batch), &recon)
            }
            _ => Err(Error::Config("genome representation does not match the objective".into())),
        }
    }

    fn batch_distances(&self, batch: &[usize]) -> DistanceMatrix {
        self.target_distances
            .as_ref()
            .expect("distance objectives precompute target distances")
            .submatrix(batch)
    }

    /// Fitness of `genome` on the rows `batch`; any failure or non-finite
    /// value maps to `+∞`.
    pub fn score(&self, genome: &Genome, batch: &[usize]) -> f64 {
        match self.try_score(genome, batch) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    }

    /// Fitness over every row of the context.
    pub fn score_all(&self, genome: &Genome) -> f64 {
        let value = match (&self.spec, genome) {
            (FitnessSpec::Rank { weights, .. }, Genome::Multi(m)) if self.rows() >= 3 => self.full_rank_fitness(m, *weights),
            _ => {
                let all: Vec<usize> = (0..self.rows()).collect();
                return self.score(genome, &all);
            }
        };
        match value {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    }

    /// `rank_fitness` over all rows, reusing the target-distance orderings.
    fn full_rank_fitness(&self, m: &crate::gp::MultiTree, scheme: WeightScheme) -> Result<f64> {
        let d = self.target_distances.as_ref().expect("distance objectives precompute target distances");
        let n = d.n();
        let orders = self.full_rank_orders.get_or_init(|| {
            crate::par::map_indices(n, |i| {
                let row = d.row(i);
                let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
                order
            })
        });
        let z = m.encode(&self.inputs)?;
        let taus = crate::par::map_indices(n, |i| {
            let zi = z.row(i);
            let dt: Vec<f64> = z
                .row_iter()
                .map(|zj| crate::distances::euclidean(zi, zj))
                .collect();
            weighted_tau_with_order(d.row(i), &dt, &orders[i], scheme)
        });
        Ok(-taus.iter().sum::<f64>() / n as f64)
    }
}

/// Free-function form of [`FitnessContext::score`].
pub fn score(genome: &Genome, ctx: &FitnessContext, batch: &[usize]) -> f64 {
    ctx.score(genome, batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{AutoencoderMultiTree, MultiTree, Tree};
    use crate::rng::seeded;
    use rand::seq::SliceRandom;
    use rand::Rng;

    /// Exhaustive pair enumeration.
    fn tau_oracle(d: &[f64], dt: &[f64], w: impl Fn(usize) -> f64) -> f64 {
        let n = d.len();
        let mut rank_order: Vec<usize> = (0..n).collect();
        rank_order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
        let mut rank = vec![0; n];
        for (r, &i) in rank_order.iter().enumerate() {
            rank[i] = r;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..n {
            for l in (j + 1)..n {
                let s = ((d[j] - d[l]).signum() * (dt[j] - dt[l]).signum()) as i32;
                let s = if d[j] == d[l] || dt[j] == dt[l] { 0 } else { s };
                let pw = w(rank[j]) + w(rank[l]);
                num += pw * s as f64;
                den += pw;
            }
        }
        num / den
    }

    fn random_vec(rng: &mut crate::rng::Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(0.0..10.0)).collect()
    }

    #[test]
    fn sammon_examples() {
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.5], vec![1.0, 1.0]]).unwrap();
        let d = pairwise_euclidean(&x);
        assert_eq!(sammon_stress(&d, &d).unwrap(), 0.0);
        let d = DistanceMatrix::from_vec(2, vec![0.0, 2.0, 2.0, 0.0]).unwrap();
        let dt = DistanceMatrix::from_vec(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(sammon_stress(&d, &dt).unwrap(), 0.25);
        let zero = DistanceMatrix::from_vec(2, vec![0.0; 4]).unwrap();
        assert!(matches!(sammon_stress(&zero, &dt), Err(Error::DegenerateTarget(_))));
    }

    #[test]
    fn sammon_matches_double_loop() {
        let mut rng = seeded(1);
        for _ in 0..20 {
            let a = Matrix::from_vec(5, 3, (0..15).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let b = Matrix::from_vec(5, 2, (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let (d, dt) = (pairwise_euclidean(&a), pairwise_euclidean(&b));
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..5 {
                for j in 0..5 {
                    if i < j {
                        num += (d.get(i, j) - dt.get(i, j)).powi(2) / d.get(i, j);
                        den += d.get(i, j);
                    }
                }
            }
            assert!((sammon_stress(&d, &dt).unwrap() - num / den).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_points_are_skipped() {
        let d = DistanceMatrix::from_vec(3, vec![0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0]).unwrap();
        let dt = DistanceMatrix::from_vec(3, vec![0.0, 5.0, 2.0, 5.0, 0.0, 2.0, 2.0, 2.0, 0.0]).unwrap();
        assert_eq!(sammon_stress(&d, &dt).unwrap(), 0.0);
    }

    #[test]
    fn tau_examples() {
        let d = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau_row(&d, &d.map(|v: f64| v.exp())), 1.0);
        assert_eq!(kendall_tau_row(&d, &d.map(|v| -v)), -1.0);
        let swapped = [2.0, 1.0, 3.0, 4.0];
        assert!((kendall_tau_row(&d, &swapped) - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(weighted_kendall_tau_row(&d, &d, WeightScheme::Hyperbolic), 1.0);
        assert_eq!(weighted_kendall_tau_row(&d, &d.map(|v| -v), WeightScheme::Hyperbolic), -1.0);

        // pairs (0,1) w 1+1/2 concordant, (0,2) w 1+1/3 concordant, (1,2) w 1/2+1/3 discordant
        let w = weighted_kendall_tau_row(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0], WeightScheme::Hyperbolic);
        let expected = (1.5 + 4.0 / 3.0 - 5.0 / 6.0) / (1.5 + 4.0 / 3.0 + 5.0 / 6.0);
        assert!((w - expected).abs() < 1e-15);
    }

    #[test]
    fn tau_matches_pair_enumeration() {
        let mut rng = seeded(2);
        for _ in 0..200 {
            let n = rng.random_range(2..=50);
            let d = random_vec(&mut rng, n);
            let dt = random_vec(&mut rng, n);
            assert!((kendall_tau_row(&d, &dt) - tau_oracle(&d, &dt, |_| 1.0)).abs() < 1e-12);
            let h = weighted_kendall_tau_row(&d, &dt, WeightScheme::Hyperbolic);
            assert!((h - tau_oracle(&d, &dt, |r| 1.0 / (r as f64 + 1.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_match_pair_enumeration() {
        let mut rng = seeded(3);
        for _ in 0..200 {
            let n = rng.random_range(2..=30);
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
            let dt: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
            assert!((kendall_tau_row(&d, &dt) - tau_oracle(&d, &dt, |_| 1.0)).abs() < 1e-12);
            let h = weighted_kendall_tau_row(&d, &dt, WeightScheme::Hyperbolic);
            assert!((h - tau_oracle(&d, &dt, |r| 1.0 / (r as f64 + 1.0))).abs() < 1e-12);

            let stats = rank_stats(&d, &dt);
            let (mut c, mut dd) = (0, 0);
            for j in 0..n {
                for l in (j + 1)..n {
                    let s = (d[j] - d[l]) * (dt[j] - dt[l]);
                    if s > 0.0 {
                        c += 1;
                    } else if s < 0.0 {
                        dd += 1;
                    }
                }
            }
            assert_eq!(stats, RankStats { concordant: c, discordant: dd, pairs: (n * (n - 1) / 2) as u64 });
        }
    }

    #[test]
    fn constant_embedding_scores_zero_tau() {
        assert_eq!(kendall_tau_row(&[1.0, 2.0, 3.0], &[0.0; 3]), 0.0);
        assert_eq!(weighted_kendall_tau_row(&[1.0, 2.0, 3.0], &[0.0; 3], WeightScheme::Hyperbolic), 0.0);
    }

    fn random_points(rng: &mut crate::rng::Rng, n: usize, p: usize) -> Matrix {
        Matrix::from_vec(n, p, (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn rank_fitness_examples() {
        let mut rng = seeded(4);
        let x = random_points(&mut rng, 6, 3);
        let d = pairwise_euclidean(&x);
        assert!((rank_fitness(&d, &d, WeightScheme::Hyperbolic).unwrap() + 1.0).abs() < 1e-15);

        // a strictly decreasing transform of every distance reverses every row
        let rev: Vec<f64> = (0..36)
            .map(|i| if i / 6 == i % 6 { 0.0 } else { 10.0 - d.as_slice()[i] })
            .collect();
        let rev = DistanceMatrix::from_vec(6, rev).unwrap();
        assert!((rank_fitness(&d, &rev, WeightScheme::Hyperbolic).unwrap() - 1.0).abs() < 1e-15);

        let dt = pairwise_euclidean(&random_points(&mut rng, 6, 2));
        let mut sum = 0.0;
        for i in 0..6 {
            let (a, b): (Vec<f64>, Vec<f64>) = (0..6).filter(|&j| j != i).map(|j| (d.get(i, j), dt.get(i, j))).unzip();
            sum += tau_oracle(&a, &b, |r| 1.0 / (r as f64 + 1.0));
        }
        assert!((rank_fitness(&d, &dt, WeightScheme::Hyperbolic).unwrap() + sum / 6.0).abs() < 1e-12);
    }

    #[test]
    fn mse_objectives() {
        let l = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let shifted = Matrix::from_vec(2, 2, l.as_slice().iter().map(|v| v + 0.5).collect()).unwrap();
        assert_eq!(teacher_fitness(&l, &l).unwrap(), 0.0);
        assert_eq!(teacher_fitness(&l, &shifted).unwrap(), 0.25);
        assert!(teacher_fitness(&l, &Matrix::zeros(2, 3)).is_err());
        assert!(gp_autoencoder_fitness(&l, &Matrix::zeros(1, 2)).is_err());

        let mut rng = seeded(5);
        let a = random_points(&mut rng, 3, 4);
        let b = random_points(&mut rng, 3, 4);
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                s += (a.get(i, j) - b.get(i, j)).powi(2);
            }
        }
        assert!((gp_autoencoder_fitness(&a, &b).unwrap() - s / 12.0).abs() < 1e-12);
        assert!((gp_autoencoder_fitness(&a, &Matrix::zeros(3, 4)).unwrap() - a.mean_square()).abs() < 1e-12);
    }

    fn projection_genome(k: usize, p: usize) -> Genome {
        Genome::Multi(MultiTree::new((0..k).map(|j| Tree::variable(j, p)).collect()).unwrap())
    }

    #[test]
    fn perfect_embedding_scores_zero() {
        let mut rng = seeded(6);
        let x = random_points(&mut rng, 20, 3);
        let ctx = FitnessContext::new(FitnessSpec::Dist { metric: Metric::Euclidean }, x.clone(), x, None).unwrap();
        let batch: Vec<usize> = (0..20).step_by(2).collect();
        assert_eq!(ctx.score(&projection_genome(3, 3), &batch), 0.0);
    }

    #[test]
    fn constant_genome_under_rank_scores_zero() {
        let mut rng = seeded(7);
        let x = random_points(&mut rng, 15, 3);
        let spec = FitnessSpec::Rank { metric: Metric::Euclidean, weights: WeightScheme::Hyperbolic };
        let ctx = FitnessContext::new(spec, x.clone(), x, None).unwrap();
        let g = Genome::Multi(MultiTree::new(vec![Tree::constant(1.0, 3); 2]).unwrap());
        assert_eq!(ctx.score_all(&g), 0.0);
    }

    #[test]
    fn score_is_the_composition_of_public_operations() {
        let mut rng = seeded(8);
        let x = random_points(&mut rng, 30, 4);
        let target = random_points(&mut rng, 30, 3);
        let mut batch: Vec<usize> = (0..30).collect();
        batch.shuffle(&mut rng);
        batch.truncate(12);
        let g = Genome::Multi(
            MultiTree::new(vec![
                crate::gp::parse_infix("x0 * x1 - x3", 4).unwrap(),
                crate::gp::parse_infix("x2 + 0.5", 4).unwrap(),
            ])
            .unwrap(),
        );
        let xb = x.select_rows(&batch);
        let latent = g.latent(&xb).unwrap();
        let dt = pairwise_euclidean(&latent);

        for metric in [Metric::Euclidean, Metric::Geodesic] {
            let full = match metric {
                Metric::Euclidean => pairwise_euclidean(&target),
                Metric::Geodesic => geodesic(&target, DEFAULT_NEIGHBORS).unwrap(),
            };
            let d = full.submatrix(&batch);
            let ctx = FitnessContext::new(FitnessSpec::Dist { metric }, x.clone(), target.clone(), None).unwrap();
            assert_eq!(ctx.score(&g, &batch), sammon_stress(&d, &dt).unwrap());
            let spec = FitnessSpec::Rank { metric, weights: WeightScheme::Hyperbolic };
            let ctx = FitnessContext::new(spec, x.clone(), target.clone(), None).unwrap();
            assert_eq!(ctx.score(&g, &batch), rank_fitness(&d, &dt, WeightScheme::Hyperbolic).unwrap());
        }

        let teacher = random_points(&mut rng, 30, 2);
        let ctx = FitnessContext::new(FitnessSpec::Teacher, x.clone(), target.clone(), Some(teacher.clone())).unwrap();
        assert_eq!(ctx.score(&g, &batch), teacher_fitness(&teacher.select_rows(&batch), &latent).unwrap());

        let enc = g.encoder().clone();
        let dec = MultiTree::new(vec![
            crate::gp::parse_infix("x0 - x1", 2).unwrap(),
            Tree::variable(1, 2),
            Tree::constant(0.25, 2),
        ])
        .unwrap();
        let amt = Genome::Autoencoder(AutoencoderMultiTree::new(enc, dec).unwrap());
        let ctx = FitnessContext::new(FitnessSpec::GpAutoencoder, x.clone(), target.clone(), None).unwrap();
        ctx.check_genome(&amt).unwrap();
        let Genome::Autoencoder(a) = &amt else { unreachable!() };
        let (_, recon) = a.autoencode(&xb).unwrap();
        assert_eq!(ctx.score(&amt, &batch), gp_autoencoder_fitness(&target.select_rows(&batch), &recon).unwrap());
        assert!(ctx.check_genome(&g).is_err());
        assert_eq!(ctx.score(&g, &batch), f64::INFINITY);
    }

    #[test]
    fn full_data_rank_scoring_matches_the_batch_path() {
        let mut rng = seeded(9);
        let mut x = random_points(&mut rng, 40, 3);
        for c in 0..3 {
            x.set(5, c, x.get(4, c));
        }
        let all: Vec<usize> = (0..40).collect();
        let genomes = [
            Genome::Multi(MultiTree::new(vec![crate::gp::parse_infix("x0 * x1", 3).unwrap(), Tree::variable(2, 3)]).unwrap()),
            Genome::Multi(MultiTree::new(vec![crate::gp::parse_infix("x0 + x0", 3).unwrap()]).unwrap()),
        ];
        for metric in [Metric::Euclidean, Metric::Geodesic] {
            for weights in [WeightScheme::Hyperbolic, WeightScheme::Uniform] {
                let ctx = FitnessContext::new(FitnessSpec::Rank { metric, weights }, x.clone(), x.clone(), None).unwrap();
                for g in &genomes {
                    assert_eq!(ctx.score_all(g), ctx.score(g, &all));
                }
            }
        }
    }

    #[test]
    fn context_validation() {
        let x = Matrix::zeros(4, 2);
        assert!(FitnessContext::new(FitnessSpec::Teacher, x.clone(), x.clone(), None).is_err());
        assert!(FitnessContext::new(FitnessSpec::Teacher, x.clone(), Matrix::zeros(3, 2), Some(x.clone())).is_err());
        let ctx = FitnessContext::new(FitnessSpec::Teacher, x.clone(), x.clone(), Some(Matrix::zeros(4, 1))).unwrap();
        assert!(ctx.check_genome(&projection_genome(2, 2)).is_err());
        assert!(ctx.check_genome(&projection_genome(1, 3)).is_err());
        ctx.check_genome(&projection_genome(1, 2)).unwrap();
    }
}
