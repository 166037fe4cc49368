use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

/// Per-element inverted-dropout scale factors: `0` with probability `rate`,
/// otherwise `1/(1-rate)`. One uniform draw per element, in order.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(vec![1.0; len]);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

pub fn dropout_apply<R: Rng + ?Sized>(
    x: &[f64],
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_rate(rate)?;
    match mode {
        Mode::Eval => Ok(x.to_vec()),
        Mode::Train => {
            let mask = dropout_mask(x.len(), rate, rng)?;
            Ok(x.iter().zip(&mask).map(|(v, s)| v * s).collect())
        }
    }
}
