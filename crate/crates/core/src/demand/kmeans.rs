use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const KMEANS_MAX_ITERS: usize = 100;
/// Independent seedings; the lowest-inertia result is kept.
pub const KMEANS_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans2 {
    pub labels: Vec<usize>,
    pub centroids: [[f64; 2]; 2],
    pub inertia: f64,
    pub iterations: usize,
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Sum of squared distances of each point to its assigned centroid.
pub fn inertia(points: &[[f64; 2]], labels: &[usize], centroids: &[[f64; 2]; 2]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| dist2(*p, centroids[l])).sum()
}

/// Two-cluster k-means: k-means++ seeding and Lloyd iterations, restarted
/// `KMEANS_RESTARTS` times.
pub fn kmeans_2(points: &[[f64; 2]], seed: u64) -> Result<KMeans2> {
    if points.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 points, got {}", points.len())));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::NonFinite("k-means input".into()));
    }
    if points.iter().all(|p| *p == points[0]) {
        return Err(Error::Degenerate("all points are identical".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeans2> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = lloyd(points, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd(points: &[[f64; 2]], rng: &mut ChaCha8Rng) -> KMeans2 {
    let first = points[rng.random_range(0..points.len())];
    let d: Vec<f64> = points.iter().map(|p| dist2(*p, first)).collect();
    let total: f64 = d.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut second = points[points.len() - 1];
    for (p, w) in points.iter().zip(&d) {
        if *w > 0.0 && u < *w {
            second = *p;
            break;
        }
        u -= w;
    }
    if second == first {
        // Rounding walked past every positive weight; take the farthest point.
        let far = d.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).expect("non-empty");
        second = points[far];
    }
    let mut centroids = [first, second];
    let mut labels = vec![usize::MAX; points.len()];
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERS {
        iterations += 1;
        let mut changed = false;
        for (p, l) in points.iter().zip(labels.iter_mut()) {
            let new = usize::from(dist2(*p, centroids[1]) < dist2(*p, centroids[0]));
            if new != *l {
                *l = new;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (k, c) in centroids.iter_mut().enumerate() {
            let members: Vec<&[f64; 2]> = points.iter().zip(&labels).filter(|(_, &l)| l == k).map(|(p, _)| p).collect();
            if !members.is_empty() {
                let n = members.len() as f64;
                *c = [
                    members.iter().map(|p| p[0]).sum::<f64>() / n,
                    members.iter().map(|p| p[1]).sum::<f64>() / n,
                ];
            }
        }
    }
    KMeans2 {
        inertia: inertia(points, &labels, &centroids),
        labels,
        centroids,
        iterations,
    }
}
