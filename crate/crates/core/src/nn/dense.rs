use serde::{Deserialize, Serialize};

use super::params::ParameterSet;
use super::tensor::Matrix;
use crate::error::{Error, Result};

/// Fully connected layer, `y = W·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    /// `[out_dim × in_dim]`
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseParams {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bias.len() != self.weight.rows() {
            return Err(Error::shape(format!(
                "dense bias has {} entries for {} outputs",
                self.bias.len(),
                self.weight.rows()
            )));
        }
        if !self.all_finite() {
            return Err(Error::Numeric("non-finite dense parameter".into()));
        }
        Ok(())
    }

    /// Applies the layer to every row of `x` independently.
    pub fn forward_time_distributed(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.out_dim());
        for t in 0..x.rows() {
            let y = dense_forward(x.row(t), self)?;
            out.row_mut(t).copy_from_slice(&y);
        }
        Ok(out)
    }

    /// Backward for the time-distributed form; returns `dx`.
    pub fn backward_time_distributed(
        &self,
        x: &Matrix,
        dy: &Matrix,
        grads: &mut DenseParams,
    ) -> Matrix {
        let mut dx = Matrix::zeros(x.rows(), self.in_dim());
        for t in 0..x.rows() {
            let d = dy.row(t);
            for (b, g) in grads.bias.iter_mut().zip(d) {
                *b += g;
            }
            grads.weight.add_outer(d, x.row(t));
            self.weight.matvec_t_add(d, dx.row_mut(t));
        }
        dx
    }
}

impl ParameterSet for DenseParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.weight.as_slice(), &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }

    fn zeros_like(&self) -> Self {
        DenseParams::zeros(self.in_dim(), self.out_dim())
    }
}

pub fn dense_forward(x: &[f64], params: &DenseParams) -> Result<Vec<f64>> {
    if x.len() != params.in_dim() {
        return Err(Error::shape(format!(
            "dense input has {} entries, expected {}",
            x.len(),
            params.in_dim()
        )));
    }
    let mut y = params.bias.clone();
    params.weight.matvec_add(x, &mut y);
    Ok(y)
}
