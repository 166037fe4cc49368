//! LSTM cell and layer, forward and backward.
//!
//! Gate rows are packed as `[input | forget | candidate | output]`, each
//! block `hidden_dim` rows tall. The same packing is used on disk.
//!
//! ```text
//! i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//! where `z = (bias + W_in·x_t) + W_rec·h_{t-1}`. Both products are formed
//! column by column from transposed kernels.

use serde::{Deserialize, Serialize};

use super::params::ParameterSet;
use super::tensor::{sigmoid, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `[4·hidden_dim × input_dim]`
    pub input_kernel: Matrix,
    /// `[4·hidden_dim × hidden_dim]`
    pub recurrent_kernel: Matrix,
    /// `[4·hidden_dim]`
    pub bias: Vec<f64>,
}

/// Which block of the packed gate rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Candidate = 2,
    Output = 3,
}

impl LstmLayerParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmLayerParams {
            input_dim,
            hidden_dim,
            input_kernel: Matrix::zeros(4 * hidden_dim, input_dim),
            recurrent_kernel: Matrix::zeros(4 * hidden_dim, hidden_dim),
            bias: vec![0.0; 4 * hidden_dim],
        }
    }

    /// Row range of one gate inside the packed kernels and bias.
    pub fn gate_rows(&self, gate: Gate) -> std::ops::Range<usize> {
        let h = self.hidden_dim;
        let start = gate as usize * h;
        start..start + h
    }

    pub fn validate(&self) -> Result<()> {
        let (i, h) = (self.input_dim, self.hidden_dim);
        if i == 0 || h == 0 {
            return Err(Error::shape("LSTM dimensions must be positive"));
        }
        let ok = self.input_kernel.rows() == 4 * h
            && self.input_kernel.cols() == i
            && self.recurrent_kernel.rows() == 4 * h
            && self.recurrent_kernel.cols() == h
            && self.bias.len() == 4 * h;
        if !ok {
            return Err(Error::shape(format!(
                "LSTM tensors inconsistent with input_dim={i}, hidden_dim={h}"
            )));
        }
        if !self.all_finite() {
            return Err(Error::Numeric("non-finite LSTM parameter".into()));
        }
        Ok(())
    }

    /// Transposed kernels used by the forward pass.
    pub(crate) fn kernels(&self) -> Kernels {
        Kernels {
            input_t: self.input_kernel.transpose(),
            recurrent_t: self.recurrent_kernel.transpose(),
        }
    }

    /// `bias + W_in·x`, the input half of the gate preactivation.
    pub(crate) fn input_projection(&self, kernels: &Kernels, x: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        kernels.input_t.matvec_t_add(x, &mut z);
        z
    }

    /// Finishes one step from a precomputed input projection.
    pub(crate) fn step_from_projection(
        &self,
        kernels: &Kernels,
        projection: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> StepCache {
        let h = self.hidden_dim;
        let mut gates = vec![0.0; 4 * h];
        kernels.recurrent_t.matvec_t_add(h_prev, &mut gates);
        for (z, p) in gates.iter_mut().zip(projection) {
            *z += p;
        }
        let (sig_a, rest) = gates.split_at_mut(2 * h);
        let (cand, sig_b) = rest.split_at_mut(h);
        for z in sig_a.iter_mut().chain(sig_b.iter_mut()) {
            *z = sigmoid(*z);
        }
        for z in cand.iter_mut() {
            *z = z.tanh();
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut h_out = vec![0.0; h];
        for j in 0..h {
            let (ig, fg, gg, og) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            c[j] = fg * c_prev[j] + ig * gg;
            tanh_c[j] = c[j].tanh();
            h_out[j] = og * tanh_c[j];
        }
        StepCache {
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            c,
            tanh_c,
            h: h_out,
        }
    }

    /// Backward through one step. Returns `(dz, dh_prev, dc_prev)` where
    /// `dz` is the gradient on the gate preactivations; kernel and bias
    /// gradients are formed from `dz` by the caller.
    pub(crate) fn step_backward(
        &self,
        step: &StepCache,
        dh: &[f64],
        dc_next: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden_dim;
        let g = &step.gates;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for j in 0..h {
            let (ig, fg, gg, og) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = step.tanh_c[j];
            let d_o = dh[j] * tc;
            let dc = dc_next[j] + dh[j] * og * (1.0 - tc * tc);
            dz[j] = dc * gg * ig * (1.0 - ig);
            dz[h + j] = dc * step.c_prev[j] * fg * (1.0 - fg);
            dz[2 * h + j] = dc * ig * (1.0 - gg * gg);
            dz[3 * h + j] = d_o * og * (1.0 - og);
            dc_prev[j] = dc * fg;
        }
        let mut dh_prev = vec![0.0; h];
        self.recurrent_kernel.matvec_t_add(&dz, &mut dh_prev);
        (dz, dh_prev, dc_prev)
    }

    /// Runs the layer over `seq` (`k × input_dim`) from zero state, keeping
    /// every step for backpropagation.
    pub fn forward_cached(&self, seq: &Matrix) -> Result<SequenceCache> {
        self.forward_cached_with(&self.kernels(), seq)
    }

    pub(crate) fn forward_cached_with(
        &self,
        kernels: &Kernels,
        seq: &Matrix,
    ) -> Result<SequenceCache> {
        self.check_sequence(seq)?;
        let h = self.hidden_dim;
        let mut steps: Vec<StepCache> = Vec::with_capacity(seq.rows());
        let zeros = vec![0.0; h];
        for t in 0..seq.rows() {
            let proj = self.input_projection(kernels, seq.row(t));
            let step = match steps.last() {
                Some(prev) => self.step_from_projection(kernels, &proj, &prev.h, &prev.c),
                None => self.step_from_projection(kernels, &proj, &zeros, &zeros),
            };
            steps.push(step);
        }
        Ok(SequenceCache {
            inputs: SequenceInputs::Rows(seq.clone()),
            steps,
        })
    }

    /// Same as [`forward_cached`](Self::forward_cached) for a sequence that
    /// repeats one input vector `k` times; the input projection is computed
    /// once. Results are bitwise identical to the general path.
    pub fn forward_repeated_cached(&self, x: &[f64], k: usize) -> Result<SequenceCache> {
        self.forward_repeated_cached_with(&self.kernels(), x, k)
    }

    pub(crate) fn forward_repeated_cached_with(
        &self,
        kernels: &Kernels,
        x: &[f64],
        k: usize,
    ) -> Result<SequenceCache> {
        if x.len() != self.input_dim {
            return Err(Error::shape(format!(
                "input has {} features, layer expects {}",
                x.len(),
                self.input_dim
            )));
        }
        if k == 0 {
            return Err(Error::shape("empty sequence"));
        }
        let h = self.hidden_dim;
        let proj = self.input_projection(kernels, x);
        let zeros = vec![0.0; h];
        let mut steps: Vec<StepCache> = Vec::with_capacity(k);
        for _ in 0..k {
            let step = match steps.last() {
                Some(prev) => self.step_from_projection(kernels, &proj, &prev.h, &prev.c),
                None => self.step_from_projection(kernels, &proj, &zeros, &zeros),
            };
            steps.push(step);
        }
        Ok(SequenceCache {
            inputs: SequenceInputs::Repeated(x.to_vec()),
            steps,
        })
    }

    /// BPTT through a cached sequence. `dh_seq` row `t` is the upstream
    /// gradient on `h_t`. Gradients are added into `grads`; the returned
    /// matrix holds the gradient on each input row (a single row when the
    /// input was repeated).
    pub fn backward(
        &self,
        cache: &SequenceCache,
        dh_seq: &Matrix,
        grads: &mut LstmLayerParams,
    ) -> Result<Matrix> {
        let h = self.hidden_dim;
        let k = cache.steps.len();
        if dh_seq.rows() != k || dh_seq.cols() != h {
            return Err(Error::shape(format!(
                "upstream gradient is {}x{}, expected {k}x{h}",
                dh_seq.rows(),
                dh_seq.cols()
            )));
        }
        // Gate-preactivation gradients and previous hidden states, one row per step.
        let mut dz_all = Matrix::zeros(k, 4 * h);
        let mut h_prev_all = Matrix::zeros(k, h);
        let mut dh_carry = vec![0.0; h];
        let mut dc_carry = vec![0.0; h];
        for t in (0..k).rev() {
            let mut dh = dh_seq.row(t).to_vec();
            for (a, b) in dh.iter_mut().zip(&dh_carry) {
                *a += b;
            }
            let (dz, dh_prev, dc_prev) = self.step_backward(&cache.steps[t], &dh, &dc_carry);
            dz_all.row_mut(t).copy_from_slice(&dz);
            h_prev_all
                .row_mut(t)
                .copy_from_slice(&cache.steps[t].h_prev);
            dh_carry = dh_prev;
            dc_carry = dc_prev;
        }
        grads
            .recurrent_kernel
            .add_transposed_product(&dz_all, &h_prev_all);
        let mut dz_sum = vec![0.0; 4 * h];
        for t in 0..k {
            for (s, d) in dz_sum.iter_mut().zip(dz_all.row(t)) {
                *s += d;
            }
        }
        for (b, d) in grads.bias.iter_mut().zip(&dz_sum) {
            *b += d;
        }
        match &cache.inputs {
            SequenceInputs::Rows(seq) => {
                grads.input_kernel.add_transposed_product(&dz_all, seq);
                let mut dx = Matrix::zeros(k, self.input_dim);
                for t in 0..k {
                    self.input_kernel.matvec_t_add(dz_all.row(t), dx.row_mut(t));
                }
                Ok(dx)
            }
            SequenceInputs::Repeated(x) => {
                grads.input_kernel.add_outer(&dz_sum, x);
                let mut dx = Matrix::zeros(1, self.input_dim);
                self.input_kernel.matvec_t_add(&dz_sum, dx.row_mut(0));
                Ok(dx)
            }
        }
    }

    fn check_sequence(&self, seq: &Matrix) -> Result<()> {
        if seq.rows() == 0 {
            return Err(Error::shape("empty sequence"));
        }
        if seq.cols() != self.input_dim {
            return Err(Error::shape(format!(
                "sequence has {} features, layer expects {}",
                seq.cols(),
                self.input_dim
            )));
        }
        Ok(())
    }
}

impl ParameterSet for LstmLayerParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.input_kernel.as_slice(),
            self.recurrent_kernel.as_slice(),
            &self.bias,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.input_kernel.as_mut_slice(),
            self.recurrent_kernel.as_mut_slice(),
            &mut self.bias,
        ]
    }

    fn zeros_like(&self) -> Self {
        LstmLayerParams::zeros(self.input_dim, self.hidden_dim)
    }
}

/// Kernels laid out column-major for the forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Kernels {
    input_t: Matrix,
    recurrent_t: Matrix,
}

/// Intermediates of one time step.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates, packed like the kernels.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CellCache {
    pub x: Vec<f64>,
    pub step: StepCache,
}

#[derive(Debug, Clone)]
pub enum SequenceInputs {
    Rows(Matrix),
    Repeated(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SequenceCache {
    pub inputs: SequenceInputs,
    pub steps: Vec<StepCache>,
}

impl SequenceCache {
    /// Hidden states stacked as `k × hidden_dim`.
    pub fn hidden_states(&self) -> Matrix {
        let h = self.steps.first().map_or(0, |s| s.h.len());
        let data = self
            .steps
            .iter()
            .flat_map(|s| s.h.iter().copied())
            .collect();
        Matrix::from_vec(self.steps.len(), h, data).expect("steps share hidden size")
    }

    pub fn last_hidden(&self) -> &[f64] {
        &self.steps.last().expect("non-empty sequence").h
    }
}

/// One LSTM step. Returns `(h_t, c_t, cache)`.
pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmLayerParams,
) -> Result<(Vec<f64>, Vec<f64>, CellCache)> {
    if x.len() != params.input_dim {
        return Err(Error::shape(format!(
            "x has {} features, cell expects {}",
            x.len(),
            params.input_dim
        )));
    }
    if h_prev.len() != params.hidden_dim || c_prev.len() != params.hidden_dim {
        return Err(Error::shape(format!(
            "state vectors must have length {}",
            params.hidden_dim
        )));
    }
    let kernels = params.kernels();
    let proj = params.input_projection(&kernels, x);
    let step = params.step_from_projection(&kernels, &proj, h_prev, c_prev);
    Ok((
        step.h.clone(),
        step.c.clone(),
        CellCache {
            x: x.to_vec(),
            step,
        },
    ))
}

/// Output of [`lstm_sequence_forward`].
#[derive(Debug, Clone, PartialEq)]
pub enum LstmOutput {
    /// Row `t` is `h_t`.
    Sequence(Matrix),
    /// Only the final hidden state.
    Last(Vec<f64>),
}

/// Runs a layer over `seq` (`k × input_dim`) starting from zero state.
pub fn lstm_sequence_forward(
    seq: &Matrix,
    params: &LstmLayerParams,
    return_sequences: bool,
) -> Result<LstmOutput> {
    let cache = params.forward_cached(seq)?;
    Ok(if return_sequences {
        LstmOutput::Sequence(cache.hidden_states())
    } else {
        LstmOutput::Last(cache.last_hidden().to_vec())
    })
}
