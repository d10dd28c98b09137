use rand::Rng;

use super::dense::{axpy, dot};
use super::{check_len, sigmoid, uniform_init, Sequence};
use crate::error::NnError;

/// Single-layer LSTM with a linear read-out `H -> out`.
///
/// Flat parameter layout:
/// - gate weights `4H x (I + H)`, row-major, gate order `[input, forget,
///   candidate, output]`, columns `[x; h_prev]`
/// - gate biases `4H`
/// - read-out weights `out x H`, row-major
/// - read-out biases `out`
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet {
    input: usize,
    hidden: usize,
    output: usize,
    params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(h: usize) -> Self {
        LstmState {
            hidden: vec![0.0; h],
            cell: vec![0.0; h],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.hidden.iter().chain(&self.cell).all(|v| v.is_finite())
    }
}

struct Layout {
    w: usize,
    b: usize,
    wo: usize,
    bo: usize,
    end: usize,
}

impl LstmNet {
    fn layout(&self) -> Layout {
        let (i, h, o) = (self.input, self.hidden, self.output);
        let w = 0;
        let b = w + 4 * h * (i + h);
        let wo = b + 4 * h;
        let bo = wo + o * h;
        Layout {
            w,
            b,
            wo,
            bo,
            end: bo + o,
        }
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Result<Self, NnError> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(NnError::Architecture(format!(
                "invalid LSTM sizes {input}/{hidden}/{output}"
            )));
        }
        let mut net = LstmNet {
            input,
            hidden,
            output,
            params: Vec::new(),
        };
        net.params = vec![0.0; net.layout().end];
        Ok(net)
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization; the gate
    /// block uses fan-in `I + H`, the read-out uses `H`.
    pub fn random<R: Rng>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Result<Self, NnError> {
        let mut net = Self::zeros(input, hidden, output)?;
        let l = net.layout();
        uniform_init(&mut net.params[l.w..l.wo], input + hidden, rng);
        uniform_init(&mut net.params[l.wo..l.end], hidden, rng);
        Ok(net)
    }

    pub fn from_params(input: usize, hidden: usize, output: usize, params: Vec<f64>) -> Result<Self, NnError> {
        let mut net = Self::zeros(input, hidden, output)?;
        check_len(net.params.len(), params.len())?;
        net.params = params;
        Ok(net)
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn output_size(&self) -> usize {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Gate biases, `4H` values in gate order.
    pub fn gate_bias_mut(&mut self) -> &mut [f64] {
        let l = self.layout();
        &mut self.params[l.b..l.wo]
    }

    /// Read-out weights and biases, `out x H + out` values.
    pub fn readout_mut(&mut self) -> &mut [f64] {
        let l = self.layout();
        &mut self.params[l.wo..l.end]
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState::zeros(self.hidden)
    }

    /// Gate pre-activations for `z = [x; h]`.
    fn gates(&self, l: &Layout, z: &[f64], out: &mut [f64]) {
        let cols = self.input + self.hidden;
        let w = &self.params[l.w..l.b];
        let b = &self.params[l.b..l.wo];
        for (r, o) in out.iter_mut().enumerate() {
            *o = b[r] + dot(&w[r * cols..(r + 1) * cols], z);
        }
    }

    fn readout(&self, l: &Layout, h: &[f64]) -> Vec<f64> {
        let hs = self.hidden;
        let wo = &self.params[l.wo..l.bo];
        let bo = &self.params[l.bo..l.end];
        (0..self.output)
            .map(|r| bo[r] + dot(&wo[r * hs..(r + 1) * hs], h))
            .collect()
    }

    /// One cell update. Returns the read-out and the new state.
    pub fn step(&self, state: &LstmState, input: &[f64]) -> Result<(Vec<f64>, LstmState), NnError> {
        check_len(self.input, input.len())?;
        check_len(self.hidden, state.hidden.len())?;
        check_len(self.hidden, state.cell.len())?;
        let l = self.layout();
        let h = self.hidden;
        let mut z = Vec::with_capacity(self.input + h);
        z.extend_from_slice(input);
        z.extend_from_slice(&state.hidden);
        let mut pre = vec![0.0; 4 * h];
        self.gates(&l, &z, &mut pre);
        let mut next = LstmState::zeros(h);
        for k in 0..h {
            let i = sigmoid(pre[k]);
            let f = sigmoid(pre[h + k]);
            let g = pre[2 * h + k].tanh();
            let o = sigmoid(pre[3 * h + k]);
            let c = f * state.cell[k] + i * g;
            next.cell[k] = c;
            next.hidden[k] = o * c.tanh();
        }
        let y = self.readout(&l, &next.hidden);
        Ok((y, next))
    }

    /// Runs the sequence from a zero state and returns every read-out.
    pub fn run(&self, inputs: &Sequence) -> Result<Vec<Vec<f64>>, NnError> {
        let mut state = self.initial_state();
        let mut out = Vec::with_capacity(inputs.len());
        for s in 0..inputs.len() {
            let (y, next) = self.step(&state, inputs.input(s))?;
            out.push(y);
            state = next;
        }
        Ok(out)
    }

    /// Mean squared error of the teacher-forced sequence (zero initial
    /// state) and its exact gradient by backpropagation through time over
    /// the whole sequence.
    pub fn loss_and_grad(&self, seq: &Sequence) -> Result<(f64, Vec<f64>), NnError> {
        check_len(self.input, seq.input_dim)?;
        check_len(self.output, seq.output_dim)?;
        let l = self.layout();
        let (ni, h, no) = (self.input, self.hidden, self.output);
        let cols = ni + h;
        let n = seq.len();
        let scale = 1.0 / (n * no) as f64;

        // Forward pass, keeping what the backward pass needs.
        let mut zs = vec![0.0; n * cols];
        let mut acts = vec![0.0; n * 4 * h]; // i, f, g, o after nonlinearity
        let mut cells = vec![0.0; (n + 1) * h]; // cells[0] = initial
        let mut tanh_c = vec![0.0; n * h];
        let mut hs = vec![0.0; (n + 1) * h];
        let mut dys = vec![0.0; n * no];
        let mut loss = 0.0;
        let mut pre = vec![0.0; 4 * h];
        for s in 0..n {
            let z = &mut zs[s * cols..(s + 1) * cols];
            z[..ni].copy_from_slice(seq.input(s));
            z[ni..].copy_from_slice(&hs[s * h..(s + 1) * h]);
            self.gates(&l, &zs[s * cols..(s + 1) * cols], &mut pre);
            let a = &mut acts[s * 4 * h..(s + 1) * 4 * h];
            for k in 0..h {
                a[k] = sigmoid(pre[k]);
                a[h + k] = sigmoid(pre[h + k]);
                a[2 * h + k] = pre[2 * h + k].tanh();
                a[3 * h + k] = sigmoid(pre[3 * h + k]);
                let c = a[h + k] * cells[s * h + k] + a[k] * a[2 * h + k];
                cells[(s + 1) * h + k] = c;
                let tc = c.tanh();
                tanh_c[s * h + k] = tc;
                hs[(s + 1) * h + k] = a[3 * h + k] * tc;
            }
            let y = self.readout(&l, &hs[(s + 1) * h..(s + 2) * h]);
            for (k, (yo, to)) in y.iter().zip(seq.target(s)).enumerate() {
                let r = yo - to;
                loss += r * r;
                dys[s * no + k] = 2.0 * r * scale;
            }
            if !loss.is_finite() {
                return Err(NnError::NonFinite { step: s });
            }
        }

        // Backward pass.
        let mut grad = vec![0.0; self.params.len()];
        let (gw, rest) = grad.split_at_mut(l.b);
        let (gb, rest) = rest.split_at_mut(l.wo - l.b);
        let (gwo, gbo) = rest.split_at_mut(l.bo - l.wo);
        let w = &self.params[l.w..l.b];
        let wo = &self.params[l.wo..l.bo];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dh = vec![0.0; h];
        let mut dpre = vec![0.0; 4 * h];
        let mut dz = vec![0.0; cols];
        for s in (0..n).rev() {
            let hcur = &hs[(s + 1) * h..(s + 2) * h];
            dh.copy_from_slice(&dh_next);
            for r in 0..no {
                let dy = dys[s * no + r];
                gbo[r] += dy;
                axpy(dy, hcur, &mut gwo[r * h..(r + 1) * h]);
                axpy(dy, &wo[r * h..(r + 1) * h], &mut dh);
            }
            let a = &acts[s * 4 * h..(s + 1) * 4 * h];
            for k in 0..h {
                let (i, f, g, o) = (a[k], a[h + k], a[2 * h + k], a[3 * h + k]);
                let tc = tanh_c[s * h + k];
                let dc = dh[k] * o * (1.0 - tc * tc) + dc_next[k];
                dpre[k] = dc * g * i * (1.0 - i);
                dpre[h + k] = dc * cells[s * h + k] * f * (1.0 - f);
                dpre[2 * h + k] = dc * i * (1.0 - g * g);
                dpre[3 * h + k] = dh[k] * tc * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            let z = &zs[s * cols..(s + 1) * cols];
            dz.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..4 * h {
                let d = dpre[r];
                if d == 0.0 {
                    continue;
                }
                gb[r] += d;
                axpy(d, z, &mut gw[r * cols..(r + 1) * cols]);
                axpy(d, &w[r * cols..(r + 1) * cols], &mut dz);
            }
            dh_next.copy_from_slice(&dz[ni..]);
        }
        Ok((loss * scale, grad))
    }
}
