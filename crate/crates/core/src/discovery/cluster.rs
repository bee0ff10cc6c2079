use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{DiscoveryError, Label, LabeledUser};
use crate::interaction::{fit_binning, BinningModel, FeatureVector, FEATURE_COUNT};

const MAX_ITERATIONS: usize = 100;
const TOLERANCE: f64 = 1e-9;
const MAX_SEEDINGS: usize = 10;
const ALPHA: f64 = 0.05;

/// Per-feature z-score parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub deviation: Vec<f64>,
}

impl Standardization {
    pub fn fit(corpus: &[FeatureVector]) -> Self {
        let n = corpus.len() as f64;
        let mut mean = vec![0.0; FEATURE_COUNT];
        let mut deviation = vec![0.0; FEATURE_COUNT];
        for v in corpus {
            for (m, x) in mean.iter_mut().zip(v.values()) {
                *m += x / n;
            }
        }
        for v in corpus {
            for ((d, m), x) in deviation.iter_mut().zip(&mean).zip(v.values()) {
                *d += (x - m) * (x - m) / n;
            }
        }
        for d in &mut deviation {
            // constant features map to 0 instead of dividing by zero
            *d = if *d > 0.0 { d.sqrt() } else { 1.0 };
        }
        Standardization { mean, deviation }
    }

    pub fn apply(&self, v: &FeatureVector) -> Vec<f64> {
        v.values().iter().zip(self.mean.iter().zip(&self.deviation)).map(|(x, (m, d))| (x - m) / d).collect()
    }
}

/// Welch two-sample test on learning gain between the two clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub standardization: Standardization,
    pub binning: BinningModel,
    pub sizes: Vec<usize>,
    pub mean_plg: Vec<f64>,
    pub separation: Separation,
    pub separated: bool,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, point);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

impl ClusterModel {
    /// Index of the nearest centroid in standardized space.
    pub fn assign(&self, features: &FeatureVector) -> usize {
        nearest(&self.centroids, &self.standardization.apply(features))
    }

    pub fn label_of(&self, features: &FeatureVector) -> Label {
        self.labels[self.assign(features)]
    }
}

fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> =
            points.iter().map(|p| centroids.iter().map(|c| sq_dist(c, p)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if r < *d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick].clone());
    }
    centroids
}

/// Lloyd iterations; returns centroids, assignments and iteration count.
fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<usize>, usize) {
    let dim = points[0].len();
    let mut assignment = vec![0; points.len()];
    let mut iterations = 0;
    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        for (a, p) in assignment.iter_mut().zip(points) {
            *a = nearest(&centroids, p);
        }
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (a, p) in assignment.iter().zip(points) {
            counts[*a] += 1;
            for (s, x) in sums[*a].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut movement: f64 = 0.0;
        for (c, (sum, n)) in centroids.iter_mut().zip(sums.into_iter().zip(counts)) {
            if n == 0 {
                continue;
            }
            let next: Vec<f64> = sum.into_iter().map(|s| s / n as f64).collect();
            movement = movement.max(sq_dist(c, &next).sqrt());
            *c = next;
        }
        if movement < TOLERANCE {
            break;
        }
    }
    for (a, p) in assignment.iter_mut().zip(points) {
        *a = nearest(&centroids, p);
    }
    (centroids, assignment, iterations)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

pub(crate) fn welch(a: &[f64], b: &[f64]) -> Separation {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if a.len() < 2 || b.len() < 2 {
        return Separation { t: 0.0, df: 0.0, p_value: 1.0, alpha: ALPHA };
    }
    if se2 == 0.0 {
        let p_value = if ma == mb { 1.0 } else { 0.0 };
        let t = if ma == mb { 0.0 } else { f64::INFINITY.copysign(ma - mb) };
        return Separation { t, df: na + nb - 2.0, p_value, alpha: ALPHA };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p_value = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Separation { t, df, p_value, alpha: ALPHA }
}

/// Two-means clustering over standardized behavior features, seeded with
/// k-means++ from `seed`. The cluster with the higher mean learning gain is
/// labeled HLG.
pub fn cluster_users(corpus: &[LabeledUser], k: usize, seed: u64) -> Result<ClusterModel, DiscoveryError> {
    if k != 2 {
        return Err(DiscoveryError::UnsupportedK(k));
    }
    if corpus.len() < 2 * k {
        return Err(DiscoveryError::CorpusTooSmall { got: corpus.len(), needed: 2 * k });
    }
    if let Some(u) = corpus.iter().find(|u| !u.plg.is_finite()) {
        return Err(DiscoveryError::NonFinitePlg(u.user.clone()));
    }
    let vectors: Vec<FeatureVector> = corpus.iter().map(|u| u.features).collect();
    if vectors.iter().all(|v| v.values() == vectors[0].values()) {
        return Err(DiscoveryError::DegenerateCorpus);
    }
    let standardization = Standardization::fit(&vectors);
    let binning = fit_binning(&vectors)?;
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| standardization.apply(v)).collect();

    for attempt in 0..MAX_SEEDINGS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let init = kmeans_pp_init(&points, k, &mut rng);
        let (centroids, assignment, iterations) = lloyd(&points, init);
        let mut sizes = vec![0; k];
        for &a in &assignment {
            sizes[a] += 1;
        }
        if sizes.contains(&0) {
            continue;
        }
        let plg_of = |c: usize| -> Vec<f64> {
            corpus.iter().zip(&assignment).filter(|(_, &a)| a == c).map(|(u, _)| u.plg).collect()
        };
        let (g0, g1) = (plg_of(0), plg_of(1));
        let mean_plg = vec![mean_var(&g0).0, mean_var(&g1).0];
        let labels =
            if mean_plg[0] >= mean_plg[1] { vec![Label::Hlg, Label::Llg] } else { vec![Label::Llg, Label::Hlg] };
        let separation = welch(&g0, &g1);
        return Ok(ClusterModel {
            k,
            centroids,
            labels,
            standardization,
            binning,
            sizes,
            mean_plg,
            separated: separation.p_value < ALPHA,
            separation,
            iterations,
        });
    }
    Err(DiscoveryError::EmptyCluster(MAX_SEEDINGS))
}
