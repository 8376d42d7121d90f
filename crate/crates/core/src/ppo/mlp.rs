//! Dense feed-forward networks with manual backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn grad_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `y = x W + b` with `W` stored as (inputs x outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }
}

/// Orthogonal matrix of the given shape scaled by `gain` (Gram-Schmidt on a
/// Gaussian draw).
pub fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Array2<f64> {
    let (long, short) = (rows.max(cols), rows.min(cols));
    // `short` orthonormal vectors of length `long`.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for u in &basis {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-10 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        gain * if rows >= cols { basis[j][i] } else { basis[i][j] }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

/// Layer inputs saved by a forward pass: `inputs[0]` is the network input,
/// `inputs[i]` the activated output of hidden layer `i - 1`.
pub struct ForwardCache {
    pub inputs: Vec<Array2<f64>>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        hidden_gain: f64,
        output_gain: f64,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let gain = if i + 1 == n { output_gain } else { hidden_gain };
                Dense {
                    w: orthogonal(sizes[i], sizes[i + 1], gain, rng),
                    b: Array1::zeros(sizes[i + 1]),
                }
            })
            .collect();
        Mlp { layers, activation }
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Self {
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").w.ncols()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> (Array2<f64>, ForwardCache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.w);
            z += &layer.b;
            if i < last {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            inputs.push(h);
            h = z;
        }
        (h, ForwardCache { inputs })
    }

    /// Gradients of a scalar loss with respect to every parameter, given the
    /// loss gradient at the output.
    pub fn backward(&self, cache: &ForwardCache, d_out: Array2<f64>) -> Mlp {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut dz = d_out;
        for i in (0..self.layers.len()).rev() {
            let input = &cache.inputs[i];
            let gw = input.t().dot(&dz).as_standard_layout().into_owned();
            let gb = dz.sum_axis(Axis(0));
            grads.push(Dense { w: gw, b: gb });
            if i > 0 {
                let mut dh = dz.dot(&self.layers[i].w.t());
                dh.zip_mut_with(input, |d, &h| *d *= self.activation.grad_from_output(h));
                dz = dh;
            }
        }
        grads.reverse();
        Mlp {
            layers: grads,
            activation: self.activation,
        }
    }

    /// Every parameter slice in a fixed order (weights then bias per layer).
    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.w.as_slice().expect("standard layout"),
                    l.b.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.w.as_slice_mut().expect("standard layout"),
                    l.b.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_columns_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (r, c) in [(20, 6), (6, 20), (8, 8)] {
            let q = orthogonal(r, c, 1.0, &mut rng);
            let g = if r >= c { q.t().dot(&q) } else { q.dot(&q.t()) };
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g[[i, j]] - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = Mlp::zeros(&[5, 4, 3], Activation::Tanh);
        let y = m.forward(Array2::from_elem((2, 5), 0.7).view());
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for act in [Activation::Tanh, Activation::Relu] {
            let mut m = Mlp::new(&[3, 5, 2], act, 1.0, 1.0, &mut rng);
            let x = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64 - 1.5) * 0.4 + j as f64 * 0.3);
            // loss = sum(y * c)
            let c = Array2::from_shape_fn((4, 2), |(i, j)| 0.5 + i as f64 * 0.1 - j as f64 * 0.7);
            let (_, cache) = m.forward_cached(x.view());
            let g = m.backward(&cache, c.clone());
            let loss = |m: &Mlp| (m.forward(x.view()) * &c).sum();
            let analytic: Vec<f64> = g.params().concat();
            let mut k = 0;
            for p in 0..m.params().len() {
                for q in 0..m.params()[p].len() {
                    let h = 1e-6;
                    m.params_mut()[p][q] += h;
                    let up = loss(&m);
                    m.params_mut()[p][q] -= 2.0 * h;
                    let down = loss(&m);
                    m.params_mut()[p][q] += h;
                    let fd = (up - down) / (2.0 * h);
                    assert!((fd - analytic[k]).abs() < 1e-6, "{act:?} param {p}/{q}: {fd} vs {}", analytic[k]);
                    k += 1;
                }
            }
        }
    }
}
