use super::params::ParameterSet;
use crate::error::{Error, Result};

/// Central finite-difference gradient of `loss_fn` at `params`:
/// `(f(θ+h) − f(θ−h)) / 2h` per element. Each element is restored to its
/// exact original value after probing.
pub fn finite_diff_grad<P, F>(loss_fn: F, params: &P, h: f64) -> Result<P>
where
    P: ParameterSet + Clone,
    F: Fn(&P) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config(format!(
            "finite-difference step {h} must be positive"
        )));
    }
    let mut work = params.clone();
    let mut grads = params.zeros_like();
    let shapes = params.shape_signature();
    for (ti, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let orig = work.tensors()[ti][i];
            work.tensors_mut()[ti][i] = orig + h;
            let up = loss_fn(&work);
            work.tensors_mut()[ti][i] = orig - h;
            let down = loss_fn(&work);
            work.tensors_mut()[ti][i] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::Numeric(format!(
                    "loss not finite when probing tensor {ti} element {i}"
                )));
            }
            grads.tensors_mut()[ti][i] = (up - down) / (2.0 * h);
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::mae_loss;

    #[test]
    fn square_derivative() {
        let g = finite_diff_grad(|p: &Vec<f64>| p[0] * p[0], &vec![3.0], 1e-6).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn mae_single_element_slope() {
        let target = [0.0, 0.0, 0.0, 0.0];
        let g = finite_diff_grad(
            |p: &Vec<f64>| mae_loss(p, &target).unwrap().0,
            &vec![0.5, -0.3, 0.2, 0.9],
            1e-6,
        )
        .unwrap();
        assert!((g[0] - 0.25).abs() < 1e-9);
        assert!((g[1] + 0.25).abs() < 1e-9);
    }

    #[test]
    fn non_finite_loss_reported() {
        let r = finite_diff_grad(
            |p: &Vec<f64>| if p[0] < 0.0 { f64::NAN } else { p[0] },
            &vec![0.0],
            1e-6,
        );
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn bad_step() {
        assert!(finite_diff_grad(|_: &Vec<f64>| 0.0, &vec![0.0], 0.0).is_err());
    }
}
