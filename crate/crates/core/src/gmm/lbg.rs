//! Linde-Buzo-Gray binary-splitting codebook design, used to seed EM.

use super::{check_data, global_moments, variance_floor, FeatureKind, GmmModel, TrainingConfig};
use crate::error::{Error, Result};

const KMEANS_MAX_PASSES: usize = 50;
const KMEANS_TOLERANCE: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid per point; ties go to the lowest centroid index.
fn assign(data: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    data.iter()
        .map(|x| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centroids.iter().enumerate() {
                let d = sq_dist(x, c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Gives every empty cell the point farthest from its own centroid, taken
/// from a cell that can spare it.
fn reseed_empty(data: &[Vec<f64>], centroids: &mut [Vec<f64>], labels: &mut [usize]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let donor = (0..data.len())
            .filter(|&t| counts[labels[t]] > 1)
            .map(|t| (t, sq_dist(&data[t], &centroids[labels[t]])))
            .fold(None, |best: Option<(usize, f64)>, (t, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((t, d)),
            });
        // data.len() >= k guarantees a donor exists.
        if let Some((t, _)) = donor {
            counts[labels[t]] -= 1;
            labels[t] = j;
            counts[j] = 1;
            centroids[j] = data[t].clone();
        }
    }
}

fn cell_means(data: &[Vec<f64>], labels: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (x, &l) in data.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(x) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// Lloyd iterations until no centroid moves more than the tolerance, or the
/// pass limit. Returns the final labels (consistent with the returned
/// centroids, every cell non-empty).
fn kmeans(data: &[Vec<f64>], centroids: &mut Vec<Vec<f64>>, dim: usize) -> Vec<usize> {
    for _ in 0..KMEANS_MAX_PASSES {
        let mut labels = assign(data, centroids);
        reseed_empty(data, centroids, &mut labels);
        let next = cell_means(data, &labels, centroids.len(), dim);
        let moved = next
            .iter()
            .zip(centroids.iter())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0f64, f64::max);
        *centroids = next;
        if moved < KMEANS_TOLERANCE {
            break;
        }
    }
    let mut labels = assign(data, centroids);
    reseed_empty(data, centroids, &mut labels);
    *centroids = cell_means(data, &labels, centroids.len(), dim);
    labels
}

/// Builds an `M`-component model by binary splitting: start at the global
/// centroid, split every centroid into `c ± ε·σ` and refine with k-means,
/// until `M` cells exist. Cell statistics become the initial means, diagonal
/// variances (floored) and weights.
pub fn lbg_init(data: &[Vec<f64>], kind: FeatureKind, cfg: &TrainingConfig) -> Result<GmmModel> {
    cfg.validate()?;
    let m = cfg.components;
    if data.len() < m {
        return Err(Error::InsufficientData {
            have: data.len(),
            need: m,
        });
    }
    let dim = check_data(data)?;
    let (gmean, gvar) = global_moments(data, dim);
    let floor = variance_floor(&gvar, cfg.variance_floor_factor);
    let gstd: Vec<f64> = gvar.iter().map(|v| v.sqrt()).collect();

    let mut centroids = vec![gmean];
    let mut labels = vec![0usize; data.len()];
    while centroids.len() < m {
        centroids = centroids
            .iter()
            .flat_map(|c| {
                let up = c
                    .iter()
                    .zip(&gstd)
                    .map(|(v, s)| v + cfg.lbg_split_epsilon * s)
                    .collect();
                let down = c
                    .iter()
                    .zip(&gstd)
                    .map(|(v, s)| v - cfg.lbg_split_epsilon * s)
                    .collect();
                [up, down]
            })
            .collect();
        labels = kmeans(data, &mut centroids, dim);
    }

    let mut counts = vec![0usize; m];
    let mut var = vec![vec![0.0; dim]; m];
    for (x, &l) in data.iter().zip(&labels) {
        counts[l] += 1;
        for ((s, v), c) in var[l].iter_mut().zip(x).zip(&centroids[l]) {
            *s += (v - c) * (v - c);
        }
    }
    if counts.contains(&0) {
        return Err(Error::InsufficientData {
            have: data.len(),
            need: m,
        });
    }
    let n = data.len() as f64;
    let weights = counts.iter().map(|&c| c as f64 / n).collect();
    let variances = var
        .iter()
        .zip(&counts)
        .flat_map(|(v, &c)| {
            v.iter()
                .zip(&floor)
                .map(move |(s, f)| (s / c as f64).max(*f))
        })
        .collect();
    let means = centroids.into_iter().flatten().collect();
    GmmModel::new(kind, dim, weights, means, variances)
}
