use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    /// Two-way softmax over adjacent column pairs `(2j, 2j+1)`.
    Softmax2,
}

/// Direction of an [`activation`] call.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Forward,
    /// Backward with the upstream gradient w.r.t. the activation output.
    Backward(&'a Matrix),
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Applies `kind` to `input`. In backward mode `input` is the pre-activation
/// and the result is the gradient w.r.t. it.
pub fn activation(kind: Activation, input: &Matrix, mode: Mode<'_>) -> Result<Matrix> {
    if !input.is_finite() {
        return Err(Error::NonFinite(format!("{kind:?} input")));
    }
    match mode {
        Mode::Forward => kind.forward(input),
        Mode::Backward(upstream) => kind.backward(input, upstream),
    }
}

impl Activation {
    pub fn forward(self, input: &Matrix) -> Result<Matrix> {
        match self {
            Activation::Relu => Ok(input.map(|v| v.max(0.0))),
            Activation::Sigmoid => Ok(input.map(sigmoid)),
            Activation::Softmax2 => {
                check_even(input)?;
                let mut out = input.clone();
                for row in 0..out.rows() {
                    for pair in out.row_mut(row).chunks_exact_mut(2) {
                        let p1 = sigmoid(pair[1] - pair[0]);
                        pair[0] = 1.0 - p1;
                        pair[1] = p1;
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn backward(self, input: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        upstream.expect_shape("activation backward", input.shape())?;
        match self {
            Activation::Relu => input.zip_map(upstream, |x, g| if x > 0.0 { g } else { 0.0 }),
            Activation::Sigmoid => input.zip_map(upstream, |x, g| {
                let s = sigmoid(x);
                g * s * (1.0 - s)
            }),
            Activation::Softmax2 => {
                let soft = self.forward(input)?;
                let mut out = Matrix::zeros(input.rows(), input.cols());
                for r in 0..input.rows() {
                    let s = soft.row(r);
                    let g = upstream.row(r);
                    let o = out.row_mut(r);
                    for j in (0..s.len()).step_by(2) {
                        let dot = s[j] * g[j] + s[j + 1] * g[j + 1];
                        o[j] = s[j] * (g[j] - dot);
                        o[j + 1] = s[j + 1] * (g[j + 1] - dot);
                    }
                }
                Ok(out)
            }
        }
    }
}

fn check_even(input: &Matrix) -> Result<()> {
    if input.cols() % 2 != 0 {
        return Err(Error::shape("softmax2", "an even number of columns", input.cols()));
    }
    Ok(())
}
