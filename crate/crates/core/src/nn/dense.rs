use rand::Rng;

use super::{check_len, uniform_init, Sequence};
use crate::error::NnError;

/// Fully connected network: `tanh` on hidden layers, identity on the output.
///
/// Parameters are stored flat; for each layer the weight matrix
/// (`out x in`, row-major) is followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl DenseNet {
    pub fn zeros(sizes: &[usize]) -> Result<Self, NnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::Architecture(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(DenseNet {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization of every
    /// weight and bias.
    pub fn random<R: Rng>(sizes: &[usize], rng: &mut R) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let n = w[0] * w[1] + w[1];
            uniform_init(&mut net.params[off..off + n], w[0], rng);
            off += n;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes)?;
        check_len(net.params.len(), params.len())?;
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off: usize = self.sizes[..=l]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[off..off + i * o];
        (w, &self.params[off + i * o..off + i * o + o])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let off: usize = self.sizes[..=l]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let (w, rest) = self.params[off..].split_at_mut(i * o);
        (w, &mut rest[..o])
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        check_len(self.input_size(), input.len())?;
        let mut acts = Vec::new();
        self.forward_into(input, &mut acts);
        Ok(acts.pop().unwrap())
    }

    /// Runs the net, leaving every layer's activation in `acts` (the input
    /// is not stored; `acts[l]` is the output of layer `l`).
    fn forward_into(&self, input: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.clear();
        let layers = self.sizes.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            let x: &[f64] = if l == 0 { input } else { &acts[l - 1] };
            let w = &self.params[off..off + ni * no];
            let b = &self.params[off + ni * no..off + ni * no + no];
            let mut y: Vec<f64> = (0..no)
                .map(|r| b[r] + dot(&w[r * ni..(r + 1) * ni], x))
                .collect();
            if l + 1 < layers {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
            off += ni * no + no;
        }
    }

    /// Mean squared error over all steps and output components, and its
    /// exact gradient with respect to every parameter.
    pub fn loss_and_grad(&self, seq: &Sequence) -> Result<(f64, Vec<f64>), NnError> {
        check_len(self.input_size(), seq.input_dim)?;
        check_len(self.output_size(), seq.output_dim)?;
        let n = seq.len();
        let scale = 1.0 / (n * seq.output_dim) as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::new();
        let mut delta: Vec<f64> = Vec::new();
        for step in 0..n {
            let x = seq.input(step);
            self.forward_into(x, &mut acts);
            let y = &acts[layers - 1];
            delta.clear();
            for (yo, to) in y.iter().zip(seq.target(step)) {
                let r = yo - to;
                loss += r * r;
                delta.push(2.0 * r * scale);
            }
            if !loss.is_finite() {
                return Err(NnError::NonFinite { step });
            }
            let mut off_end = self.params.len();
            for l in (0..layers).rev() {
                let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
                let off = off_end - (ni * no + no);
                let input: &[f64] = if l == 0 { x } else { &acts[l - 1] };
                let (gw, gb) = grad[off..off_end].split_at_mut(ni * no);
                for r in 0..no {
                    gb[r] += delta[r];
                    axpy(delta[r], input, &mut gw[r * ni..(r + 1) * ni]);
                }
                if l > 0 {
                    let w = &self.params[off..off + ni * no];
                    let mut prev = vec![0.0; ni];
                    for r in 0..no {
                        axpy(delta[r], &w[r * ni..(r + 1) * ni], &mut prev);
                    }
                    for (p, a) in prev.iter_mut().zip(&acts[l - 1]) {
                        *p *= 1.0 - a * a;
                    }
                    delta = prev;
                }
                off_end = off;
            }
        }
        Ok((loss * scale, grad))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
