use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected network with tanh hidden layers and a linear output.
///
/// Parameters live in one flat vector; layer `l` stores its weight matrix
/// (row-major, `out x in`) followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Per-layer activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`
    /// (after tanh for hidden layers).
    pub acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("non-empty cache")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Gram-Schmidt orthonormalization of a Gaussian matrix: rows are orthonormal
/// when `rows <= cols`, columns otherwise.
fn orthogonal(rows: usize, cols: usize, rng: &mut impl Rng) -> Vec<f64> {
    let (n, m, transpose) = if rows <= cols { (rows, cols, false) } else { (cols, rows, true) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-8 {
            v.iter_mut().for_each(|x| *x /= len);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = if transpose { basis[c][r] } else { basis[r][c] };
        }
    }
    out
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        Self { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)] }
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidArgument("a network needs at least two layer sizes".into()));
        }
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(Error::ShapeMismatch { expected, actual: params.len() });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite { location: format!("parameter {i}") });
        }
        Ok(Self { sizes: sizes.to_vec(), params })
    }

    /// Orthogonal init with gain `hidden_gain` on hidden layers and
    /// `output_gain` on the final layer; zero biases.
    pub fn orthogonal_init(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(sizes);
        let layers = sizes.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let gain = if l + 1 == layers { output_gain } else { hidden_gain };
            let w = orthogonal(fan_out, fan_in, rng);
            for (dst, src) in net.params[offset..offset + fan_in * fan_out].iter_mut().zip(w) {
                *dst = gain * src;
            }
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Offset of layer `l`'s weights within the flat vector.
    pub fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.sizes[..=l])
    }

    pub fn is_consistent(&self) -> bool {
        self.sizes.len() >= 2 && self.params.len() == param_count(&self.sizes)
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardCache> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch { expected: self.input_dim(), actual: input.len() });
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { location: "network input".into() });
        }
        let layers = self.n_layers();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let x = &acts[l];
            let mut y: Vec<f64> = (0..n_out)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            if l + 1 < layers {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { location: format!("forward pass, layer {l}") });
            }
            acts.push(y);
            offset += n_in * n_out + n_out;
        }
        Ok(ForwardCache { acts })
    }

    /// Reverse accumulation: adds `d loss / d params` into `grad` given
    /// `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64], grad: &mut [f64]) -> Result<()> {
        let layers = self.n_layers();
        debug_assert_eq!(grad.len(), self.params.len());
        let mut delta = grad_output.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = self.layer_offset(l);
            let x = &cache.acts[l];
            if delta.iter().any(|d| !d.is_finite()) {
                return Err(Error::NonFinite { location: format!("backward pass, layer {l}") });
            }
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut grad[offset + o * n_in..offset + (o + 1) * n_in];
                    row.iter_mut().zip(x).for_each(|(g, xi)| *g += d * xi);
                }
                grad[offset + n_in * n_out + o] += d;
            }
            if l > 0 {
                let w = &self.params[offset..offset + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d != 0.0 {
                        prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]).for_each(|(p, wi)| *p += d * wi);
                    }
                }
                // tanh'(u) = 1 - tanh(u)^2, and x holds tanh(u).
                prev.iter_mut().zip(x).for_each(|(p, a)| *p *= 1.0 - a * a);
                delta = prev;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_and_counts() {
        assert_eq!(param_count(&[19, 64, 64, 10]), 19 * 64 + 64 + 64 * 64 + 64 + 64 * 10 + 10);
        let net = Mlp::zeros(&[3, 4, 2]);
        assert_eq!(net.layer_offset(1), 16);
        assert!(net.is_consistent());
        assert!(matches!(Mlp::from_params(&[3, 2], vec![0.0; 7]), Err(Error::ShapeMismatch { .. })));
        assert!(Mlp::from_params(&[3, 2], vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::orthogonal_init(&[6, 4, 1], 1.0, 1.0, &mut rng);
        let w = &net.params[..24];
        for a in 0..4 {
            for b in 0..4 {
                let d: f64 = (0..6).map(|k| w[a * 6 + k] * w[b * 6 + k]).sum();
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = Mlp::zeros(&[3, 2]);
        assert!(matches!(net.forward(&[0.0; 2]), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(net.forward(&[0.0, f64::NAN, 0.0]), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::orthogonal_init(&[5, 7, 3], 1.0, 1.0, &mut rng);
        let x: Vec<f64> = (0..5).map(|i| 0.3 * i as f64 - 0.5).collect();
        // loss = sum(c_k * y_k)
        let c = [0.7, -1.3, 0.4];
        let loss = |p: &[f64]| {
            let n = Mlp { sizes: net.sizes.clone(), params: p.to_vec() };
            n.forward(&x).unwrap().output().iter().zip(c).map(|(y, c)| y * c).sum::<f64>()
        };
        let cache = net.forward(&x).unwrap();
        let mut grad = vec![0.0; net.params.len()];
        net.backward(&cache, &c, &mut grad).unwrap();
        let h = 1e-6;
        for i in 0..net.params.len() {
            let mut p = net.params.clone();
            p[i] += h;
            let up = loss(&p);
            p[i] -= 2.0 * h;
            let fd = (up - loss(&p)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7, "param {i}: {fd} vs {}", grad[i]);
        }
    }
}
