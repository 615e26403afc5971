//! Forward/backward pairs for the handful of operations the network uses.

use super::{Matrix, ParamId, ParameterSet};
use crate::error::{Error, Result};

/// `x · W + b`, with `b` broadcast over rows.
pub fn dense_forward(x: &Matrix, w: &Matrix, b: Option<&[f64]>) -> Result<Matrix> {
    let mut out = x.matmul(w)?;
    if let Some(b) = b {
        if b.len() != w.cols() {
            return Err(Error::shape(
                "dense_forward",
                format!("bias of length {} for {} outputs", b.len(), w.cols()),
            ));
        }
        for r in 0..out.rows() {
            for (o, bias) in out.row_mut(r).iter_mut().zip(b) {
                *o += bias;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`dense_forward`]. `grad_w` and `grad_b` are accumulated into;
/// the input gradient is returned only when `want_grad_x` is set.
pub fn dense_backward(
    x: &Matrix,
    w: &Matrix,
    upstream: &Matrix,
    grad_w: &mut Matrix,
    grad_b: Option<&mut [f64]>,
    want_grad_x: bool,
) -> Result<Option<Matrix>> {
    if upstream.shape() != (x.rows(), w.cols()) || x.cols() != w.rows() {
        return Err(Error::shape(
            "dense_backward",
            format!(
                "x {:?}, W {:?}, upstream {:?}",
                x.shape(),
                w.shape(),
                upstream.shape()
            ),
        ));
    }
    x.matmul_tn_into(upstream, grad_w)?;
    if let Some(gb) = grad_b {
        upstream.col_sums_into(gb);
    }
    if want_grad_x {
        Ok(Some(upstream.matmul_nt(w)?))
    } else {
        Ok(None)
    }
}

/// A dense layer whose weights live in a [`ParameterSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Dense {
    pub fn forward(&self, params: &ParameterSet, x: &Matrix) -> Result<Matrix> {
        let bias = self.bias.map(|b| params.value(b).as_slice());
        dense_forward(x, params.value(self.weight), bias)
    }

    pub fn backward(
        &self,
        params: &mut ParameterSet,
        x: &Matrix,
        upstream: &Matrix,
        want_grad_x: bool,
    ) -> Result<Option<Matrix>> {
        if let Some(b) = self.bias {
            if upstream.cols() != params.grad(b).cols() {
                return Err(Error::shape("dense_backward", "bias width"));
            }
            upstream.col_sums_into(params.grad_mut(b).as_mut_slice());
        }
        let (w, grad_w) = params.split_mut(self.weight);
        dense_backward(x, w, upstream, grad_w, None, want_grad_x)
    }

    pub fn in_dim(&self, params: &ParameterSet) -> usize {
        params.value(self.weight).rows()
    }

    pub fn out_dim(&self, params: &ParameterSet) -> usize {
        params.value(self.weight).cols()
    }
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes `upstream` where the forward input was positive.
pub fn relu_backward(x: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    if x.shape() != upstream.shape() {
        return Err(Error::shape(
            "relu_backward",
            format!("{:?} vs {:?}", x.shape(), upstream.shape()),
        ));
    }
    let data = x
        .as_slice()
        .iter()
        .zip(upstream.as_slice())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(z: &Matrix) -> Result<Matrix> {
    if z.cols() == 0 {
        return Err(Error::shape("softmax_rows", "zero classes"));
    }
    if !z.is_finite() {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let mut out = z.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(out)
}

/// Joins feature blocks side by side: part `i` occupies the columns right
/// after parts `0..i`.
pub fn concat_cols(parts: &[&Matrix]) -> Result<Matrix> {
    let first = parts
        .first()
        .ok_or_else(|| Error::shape("concat_cols", "empty part list"))?;
    let rows = first.rows();
    if let Some(bad) = parts.iter().find(|p| p.rows() != rows) {
        return Err(Error::shape(
            "concat_cols",
            format!("batch {} vs {}", bad.rows(), rows),
        ));
    }
    let cols: usize = parts.iter().map(|p| p.cols()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for p in parts {
            data.extend_from_slice(p.row(r));
        }
    }
    Matrix::from_vec(rows, cols, data)
}

/// Inverse of [`concat_cols`]: slices a gradient back into per-part blocks.
pub fn split_cols(m: &Matrix, widths: &[usize]) -> Result<Vec<Matrix>> {
    if widths.iter().sum::<usize>() != m.cols() {
        return Err(Error::shape(
            "split_cols",
            format!("widths {:?} for {} columns", widths, m.cols()),
        ));
    }
    let mut start = 0;
    widths
        .iter()
        .map(|&w| {
            let part = m.columns(start, w);
            start += w;
            part
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn dense_small_cases() {
        let out = dense_forward(&m(&[&[1.0, 2.0]]), &Matrix::identity(2), Some(&[0.0, 0.0])).unwrap();
        assert_eq!(out, m(&[&[1.0, 2.0]]));
        let out = dense_forward(&m(&[&[1.0, 1.0]]), &m(&[&[1.0], &[1.0]]), Some(&[1.0])).unwrap();
        assert_eq!(out, m(&[&[3.0]]));
        assert!(dense_forward(&m(&[&[1.0, 1.0]]), &Matrix::identity(3), None).is_err());
    }

    #[test]
    fn dense_backward_scalar() {
        let x = m(&[&[2.0]]);
        let w = m(&[&[3.0]]);
        let mut gw = Matrix::zeros(1, 1);
        let mut gb = [0.0];
        let gx = dense_backward(&x, &w, &m(&[&[1.0]]), &mut gw, Some(&mut gb), true)
            .unwrap()
            .unwrap();
        assert_eq!(gx.get(0, 0), 3.0);
        assert_eq!(gw.get(0, 0), 2.0);
        assert_eq!(gb[0], 1.0);
    }

    #[test]
    fn dense_backward_zero_upstream() {
        let x = m(&[&[1.0, -2.0], &[0.5, 3.0]]);
        let w = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let mut gw = Matrix::zeros(2, 3);
        let mut gb = [0.0; 3];
        let gx = dense_backward(&x, &w, &Matrix::zeros(2, 3), &mut gw, Some(&mut gb), true)
            .unwrap()
            .unwrap();
        assert!(gx.as_slice().iter().chain(gw.as_slice()).chain(&gb).all(|&v| v == 0.0));
        assert!(dense_backward(&x, &w, &Matrix::zeros(3, 3), &mut gw, None, true).is_err());
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&m(&[&[-1.0, 0.0, 2.0]])), m(&[&[0.0, 0.0, 2.0]]));
        let neg = m(&[&[-1.0, -3.0]]);
        assert_eq!(relu(&neg), Matrix::zeros(1, 2));
        assert_eq!(relu_backward(&neg, &m(&[&[5.0, 5.0]])).unwrap(), Matrix::zeros(1, 2));
        assert_eq!(
            relu_backward(&m(&[&[1.0, 0.0]]), &m(&[&[5.0, 5.0]])).unwrap(),
            m(&[&[5.0, 0.0]])
        );
    }

    #[test]
    fn softmax_cases() {
        let p = softmax_rows(&m(&[&[0.0, 0.0, 0.0, 0.0]])).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let p = softmax_rows(&m(&[&[2f64.ln(), 0.0]])).unwrap();
        assert!((p.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        let p = softmax_rows(&m(&[&[1000.0, 0.0]])).unwrap();
        assert!(p.is_finite());
        assert_eq!(p.get(0, 0), 1.0);
        assert!(p.get(0, 1) < 1e-300);
        assert!(softmax_rows(&m(&[&[f64::NAN, 0.0]])).is_err());
        assert_eq!(softmax_rows(&m(&[&[-7.0]])).unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn concat_cases() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(concat_cols(&[&a]).unwrap(), a);
        let b = Matrix::zeros(2, 8);
        let c = Matrix::zeros(2, 8);
        assert_eq!(concat_cols(&[&b, &c]).unwrap().cols(), 16);
        assert!(concat_cols(&[]).is_err());
        assert!(concat_cols(&[&a, &Matrix::zeros(3, 1)]).is_err());
    }
}
