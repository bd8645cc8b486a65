use rand::Rng as _;

use super::knn::sq_dist;
use crate::rng::{rng_from, salt};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct KMeans {
    /// `[k, dim]` row-major.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances after each assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-6;

fn nearest(x: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.chunks(dim).enumerate() {
        let d = sq_dist(x, mu);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding. Stops after 100 iterations or
/// once no centroid moves more than 1e-6. Empty clusters keep their
/// previous centroid.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64) -> Result<KMeans> {
    let n = points.len() / dim.max(1);
    if k == 0 || k > n {
        return Err(Error::Config(format!("k-means with k = {k} on {n} points")));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut rng = rng_from(seed, salt::RESAMPLE);

    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centroids[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), &centroids[start..]));
        }
    }

    let mut assignments = vec![0; n];
    let mut objective = Vec::new();
    let mut iterations = 0;
    for _ in 0..MAX_ITER {
        iterations += 1;
        let mut obj = 0.0;
        for (i, a) in assignments.iter_mut().enumerate() {
            let (c, d) = nearest(row(i), &centroids, dim);
            *a = c;
            obj += d;
        }
        objective.push(obj);
        log::debug!("k-means iteration {iterations}: objective {obj}");

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, x) in sums[a * dim..(a + 1) * dim].iter_mut().zip(row(i)) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            for j in 0..dim {
                let new = sums[c * dim + j] / counts[c] as f64;
                shift = shift.max((new - centroids[c * dim + j]).abs());
                centroids[c * dim + j] = new;
            }
        }
        if shift < TOL {
            break;
        }
    }
    Ok(KMeans {
        centroids,
        assignments,
        objective,
        iterations,
    })
}
