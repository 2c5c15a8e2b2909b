//! Seeded k-means and the three latent-space validity indices
//! (silhouette, Davies-Bouldin, Calinski-Harabasz), all on Euclidean
//! distance over the unit-normalized embedding vectors.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::EngineError;

pub const KMEANS_MAX_ITERS: usize = 100;
pub const KMEANS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterMetrics {
    pub silhouette: f64,
    pub davies_bouldin: f64,
    pub calinski_harabasz: f64,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn to_f64(points: &[Embedding]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|e| e.vector.iter().map(|&x| f64::from(x)).collect())
        .collect()
}

/// Uniform f64 in [0, 1) from the top 53 bits of the stream.
fn next_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

// ─── K-means ────────────────────────────────────────────────────────────────

/// Seeded k-means++ initialization followed by Lloyd iterations (at most
/// 100, convergence at 1e-6 max centroid movement). Identical input and
/// seed yield identical labels.
pub fn assign_clusters(points: &[Embedding], k: usize, seed: u64) -> Result<Vec<usize>, EngineError> {
    if k < 2 {
        return Err(EngineError::InvalidInput("k must be at least 2".into()));
    }
    let n = points.len();
    if n <= k {
        return Err(EngineError::InvalidInput(format!(
            "need more points ({n}) than clusters ({k})"
        )));
    }
    let data = to_f64(points);
    if data.iter().all(|p| p == &data[0]) {
        return Err(EngineError::DegenerateClustering(
            "all points identical: only a single effective cluster exists".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding: first centroid uniform, then D² sampling.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(data[(rng.next_u64() % n as u64) as usize].clone());
    let mut dist_sq: Vec<f64> = data
        .iter()
        .map(|p| euclidean(p, &centroids[0]).powi(2))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist_sq.iter().sum();
        let choice = if total > 0.0 {
            let mut target = next_f64(&mut rng) * total;
            let mut picked = n - 1;
            for (i, &d) in dist_sq.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    picked = i;
                    break;
                }
            }
            picked
        } else {
            // Every remaining point coincides with a centroid; spread
            // deterministically over distinct points.
            (rng.next_u64() % n as u64) as usize
        };
        centroids.push(data[choice].clone());
        for (i, p) in data.iter().enumerate() {
            let d = euclidean(p, centroids.last().unwrap()).powi(2);
            if d < dist_sq[i] {
                dist_sq[i] = d;
            }
        }
    }

    let dim = data[0].len();
    let mut labels = vec![0usize; n];
    for _ in 0..KMEANS_MAX_ITERS {
        // Assignment: nearest centroid, ties to the lowest cluster id.
        for (i, p) in data.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = euclidean(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            labels[i] = best;
        }

        // Update; an emptied cluster is reseeded with the point farthest
        // from its current centroid.
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &label) in data.iter().zip(&labels) {
            counts[label] += 1;
            for (s, x) in sums[label].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut moved = 0.0f64;
        for c in 0..k {
            let new_centroid = if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&i, &j| {
                        euclidean(&data[i], &centroids[labels[i]])
                            .partial_cmp(&euclidean(&data[j], &centroids[labels[j]]))
                            .unwrap()
                            .then(j.cmp(&i))
                    })
                    .unwrap();
                data[far].clone()
            } else {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            };
            moved = moved.max(euclidean(&new_centroid, &centroids[c]));
            centroids[c] = new_centroid;
        }
        if moved < KMEANS_TOLERANCE {
            break;
        }
    }

    // Final assignment against the converged centroids.
    for (i, p) in data.iter().enumerate() {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d = euclidean(p, centroid);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        labels[i] = best;
    }
    Ok(labels)
}

// ─── Validity indices ───────────────────────────────────────────────────────

/// Compute silhouette, Davies-Bouldin, and Calinski-Harabasz for a labeled
/// embedding set. Labels must form clusters 0..k with none empty.
pub fn cluster_metrics(points: &[Embedding], labels: &[usize]) -> Result<ClusterMetrics, EngineError> {
    let n = points.len();
    if labels.len() != n {
        return Err(EngineError::InvalidInput(format!(
            "{} labels for {n} points",
            labels.len()
        )));
    }
    if n < 3 {
        return Err(EngineError::InvalidInput("need at least 3 points".into()));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(EngineError::InvalidInput("need at least 2 clusters".into()));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &label) in labels.iter().enumerate() {
        members[label].push(i);
    }
    if let Some(empty) = members.iter().position(Vec::is_empty) {
        return Err(EngineError::InvalidInput(format!("cluster {empty} is empty")));
    }

    let data = to_f64(points);
    let dim = data[0].len();

    // Silhouette: s(i) = (b(i) - a(i)) / max(a, b); a = mean intra-cluster
    // distance excluding self, b = min over other clusters of the mean
    // distance to that cluster. Singletons contribute 0.
    let mut silhouette_sum = 0.0;
    for i in 0..n {
        let own = labels[i];
        if members[own].len() == 1 {
            continue; // s(i) = 0
        }
        let a = members[own]
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| euclidean(&data[i], &data[j]))
            .sum::<f64>()
            / (members[own].len() - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| {
                members[c]
                    .iter()
                    .map(|&j| euclidean(&data[i], &data[j]))
                    .sum::<f64>()
                    / members[c].len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            silhouette_sum += (b - a) / denom;
        }
    }
    let silhouette = silhouette_sum / n as f64;

    // Centroids and per-cluster dispersion (mean member→centroid distance).
    let centroids: Vec<Vec<f64>> = members
        .iter()
        .map(|idx| {
            let mut c = vec![0.0f64; dim];
            for &i in idx {
                for (s, x) in c.iter_mut().zip(&data[i]) {
                    *s += x;
                }
            }
            c.into_iter().map(|s| s / idx.len() as f64).collect()
        })
        .collect();
    let dispersion: Vec<f64> = members
        .iter()
        .enumerate()
        .map(|(c, idx)| {
            idx.iter().map(|&i| euclidean(&data[i], &centroids[c])).sum::<f64>() / idx.len() as f64
        })
        .collect();

    // Davies-Bouldin: mean over clusters of the worst (σi + σj) / d(ci, cj).
    let mut db_sum = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = euclidean(&centroids[i], &centroids[j]);
            let ratio = if d > 0.0 {
                (dispersion[i] + dispersion[j]) / d
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
        db_sum += worst;
    }
    let davies_bouldin = db_sum / k as f64;

    // Calinski-Harabasz: [SS_between / (k-1)] / [SS_within / (n-k)].
    let mut global = vec![0.0f64; dim];
    for p in &data {
        for (g, x) in global.iter_mut().zip(p) {
            *g += x;
        }
    }
    for g in global.iter_mut() {
        *g /= n as f64;
    }
    let ss_between: f64 = members
        .iter()
        .enumerate()
        .map(|(c, idx)| idx.len() as f64 * euclidean(&centroids[c], &global).powi(2))
        .sum();
    let ss_within: f64 = members
        .iter()
        .enumerate()
        .map(|(c, idx)| {
            idx.iter()
                .map(|&i| euclidean(&data[i], &centroids[c]).powi(2))
                .sum::<f64>()
        })
        .sum();
    let calinski_harabasz = if ss_within > 0.0 {
        (ss_between / (k - 1) as f64) / (ss_within / (n - k) as f64)
    } else {
        f64::INFINITY
    };

    Ok(ClusterMetrics {
        silhouette,
        davies_bouldin,
        calinski_harabasz,
    })
}
