//! Streaming mean/variance (Welford) with parallel merging.

use serde::{Deserialize, Serialize};

pub const NORM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Population variance; 0 before two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 { 0.0 } else { (self.m2 / self.count as f64).max(0.0) }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Combines two disjoint sample sets (Chan et al.).
    pub fn merge(&self, other: &Welford) -> Welford {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let nf = n as f64;
        let (na, nb) = (self.count as f64, other.count as f64);
        Welford {
            count: n,
            mean: self.mean + delta * nb / nf,
            m2: self.m2 + other.m2 + delta * delta * na * nb / nf,
        }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (x - self.mean) / self.std().max(NORM_EPS)
    }
}

/// Updates the statistics with `x`, then normalizes `x` with them.
pub fn welford_update_and_normalize(stats: &mut Welford, x: f64) -> f64 {
    stats.update(x);
    stats.normalize(x)
}

/// Per-feature Welford statistics over fixed-length vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfordVec {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl WelfordVec {
    pub fn new(dim: usize) -> Self {
        WelfordVec {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &xi) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = xi - *m;
            *m += delta / n;
            *s += delta * (xi - *m);
        }
    }

    pub fn get(&self, i: usize) -> Welford {
        Welford {
            count: self.count,
            mean: self.mean[i],
            m2: self.m2[i],
        }
    }

    pub fn merge(&self, other: &WelfordVec) -> WelfordVec {
        if other.count == 0 {
            return self.clone();
        }
        if self.count == 0 {
            return other.clone();
        }
        let mut out = WelfordVec::new(self.dim());
        for i in 0..self.dim() {
            let w = self.get(i).merge(&other.get(i));
            out.count = w.count;
            out.mean[i] = w.mean;
            out.m2[i] = w.m2;
        }
        out
    }

    /// Normalizes in place, clipping to `[-clip, clip]`.
    pub fn normalize(&self, x: &mut [f64], clip: f64) {
        if self.count < 2 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let n = self.count as f64;
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.m2) {
            let std = (s / n).max(0.0).sqrt().max(NORM_EPS);
            *v = ((*v - m) / std).clamp(-clip, clip);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var)
    }

    #[test]
    fn first_sample_normalizes_to_zero() {
        let mut w = Welford::default();
        assert_eq!(welford_update_and_normalize(&mut w, 7.0), 0.0);
    }

    #[test]
    fn constant_stream_normalizes_to_zero() {
        let mut w = Welford::default();
        for _ in 0..100 {
            assert_eq!(welford_update_and_normalize(&mut w, 3.25), 0.0);
        }
    }

    #[test]
    fn one_to_thousand_matches_two_pass() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        let mut w = Welford::default();
        xs.iter().for_each(|&x| w.update(x));
        let (m, v) = two_pass(&xs);
        assert!((w.mean - m).abs() <= 1e-9 * m.abs());
        assert!((w.variance() - v).abs() <= 1e-9 * v);
    }

    #[test]
    fn merge_equals_sequential() {
        let xs: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 * 0.3 - 4.0).collect();
        let mut all = Welford::default();
        xs.iter().for_each(|&x| all.update(x));
        let mut a = Welford::default();
        let mut b = Welford::default();
        xs[..123].iter().for_each(|&x| a.update(x));
        xs[123..].iter().for_each(|&x| b.update(x));
        let m = a.merge(&b);
        assert_eq!(m.count, all.count);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.m2 - all.m2).abs() < 1e-9 * all.m2);
    }

    #[test]
    fn vector_stats_track_each_feature() {
        let mut w = WelfordVec::new(2);
        for i in 0..10 {
            w.update(&[i as f64, 5.0]);
        }
        let mut x = [9.0, 5.0];
        w.normalize(&mut x, 10.0);
        let (m, v) = two_pass(&(0..10).map(f64::from).collect::<Vec<_>>());
        assert!((x[0] - (9.0 - m) / v.sqrt()).abs() < 1e-12);
        assert_eq!(x[1], 0.0);
    }
}
