/// A collection of flat parameter tensors that optimizers and gradient
/// checks can walk in a fixed order.
///
/// Gradients are carried in a value of the same type as the parameters
/// they belong to (see [`ParameterSet::zeros_like`]), so shapes always match.
pub trait ParameterSet {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
    fn zeros_like(&self) -> Self
    where
        Self: Sized;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn shape_signature(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

impl ParameterSet for Vec<f64> {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }

    fn zeros_like(&self) -> Self {
        vec![0.0; self.len()]
    }
}
