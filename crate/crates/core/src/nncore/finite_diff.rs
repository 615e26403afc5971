use super::{Matrix, ParameterSet};
use crate::error::{Error, Result};

/// Central-difference gradient of `f` with respect to every scalar in
/// `params`. Each coordinate is restored bit-exactly after probing.
pub fn finite_difference_grad<F>(params: &mut ParameterSet, eps: f64, mut f: F) -> Result<Vec<Matrix>>
where
    F: FnMut(&ParameterSet) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps {eps} must be > 0")));
    }
    let shapes: Vec<(usize, usize)> = params.iter().map(|p| p.value.shape()).collect();
    let mut out = Vec::with_capacity(shapes.len());
    for (pi, &(rows, cols)) in shapes.iter().enumerate() {
        let mut g = Matrix::zeros(rows, cols);
        for k in 0..rows * cols {
            let orig = param_entry(params, pi, k);
            set_param_entry(params, pi, k, orig + eps);
            let plus = f(params);
            set_param_entry(params, pi, k, orig - eps);
            let minus = f(params);
            set_param_entry(params, pi, k, orig);
            g.as_mut_slice()[k] = (plus - minus) / (2.0 * eps);
        }
        out.push(g);
    }
    Ok(out)
}

fn param_entry(params: &ParameterSet, pi: usize, k: usize) -> f64 {
    params.iter().nth(pi).unwrap().value.as_slice()[k]
}

fn set_param_entry(params: &mut ParameterSet, pi: usize, k: usize, v: f64) {
    params.iter_mut().nth(pi).unwrap().value.as_mut_slice()[k] = v;
}

/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Largest [`relative_error`] over matching gradient buffers.
pub fn max_relative_error(analytic: &[Matrix], numeric: &[Matrix]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.as_slice().iter().zip(n.as_slice()))
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let mut ps = ParameterSet::new();
        ps.add("t", Matrix::row_vector(&[3.0]));
        let g = finite_difference_grad(&mut ps, 1e-6, |p| {
            let t = p.iter().next().unwrap().value.get(0, 0);
            t * t
        })
        .unwrap();
        assert!((g[0].get(0, 0) - 6.0).abs() < 1e-6);
        assert_eq!(ps.iter().next().unwrap().value.get(0, 0), 3.0);
    }

    #[test]
    fn constant_function() {
        let mut ps = ParameterSet::new();
        ps.add("a", Matrix::from_vec(2, 2, vec![1.0, -2.0, 0.5, 7.0]).unwrap());
        let g = finite_difference_grad(&mut ps, 1e-6, |_| 4.2).unwrap();
        assert!(g[0].as_slice().iter().all(|v| v.abs() < 1e-9));
        assert!(finite_difference_grad(&mut ps, 0.0, |_| 0.0).is_err());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 2.1).abs() < 1e-15);
        assert!((relative_error(1e-12, 0.0) - 1e-4).abs() < 1e-15);
    }
}
