use super::Tensor;
use crate::error::{config_err, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Activation {
    Relu,
    Relu6,
    /// Per-channel slopes; channels are axis 0.
    Prelu(Vec<f32>),
    Sigmoid,
    /// Tanh approximation.
    Gelu,
    Softmax { axis: usize },
    /// `relu6(x) * x`
    Star,
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn relu6(x: f32) -> f32 {
    x.clamp(0.0, 6.0)
}

#[inline]
pub fn star(x: f32) -> f32 {
    relu6(x) * x
}

const SQRT_2_OVER_PI: f32 = 0.797_884_6;

#[inline]
pub fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044715 * x * x * x)).tanh())
}

#[inline]
pub(crate) fn prelu(x: f32, alpha: f32) -> f32 {
    if x >= 0.0 {
        x
    } else {
        alpha * x
    }
}

/// Numerically stable softmax over a contiguous slice.
pub fn softmax_in_place(xs: &mut [f32]) {
    let max = xs.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

pub fn activation(kind: &Activation, x: &Tensor) -> Result<Tensor> {
    Ok(match kind {
        Activation::Relu => x.map(|v| v.max(0.0)),
        Activation::Relu6 => x.map(relu6),
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Gelu => x.map(gelu),
        Activation::Star => x.map(star),
        Activation::Prelu(alpha) => {
            if x.rank() == 0 || alpha.len() != x.dim(0) {
                return config_err(format!(
                    "prelu has {} slopes for shape {:?}",
                    alpha.len(),
                    x.shape()
                ));
            }
            let inner = x.len() / x.dim(0);
            let mut out = x.clone();
            for (c, chunk) in out.data_mut().chunks_mut(inner.max(1)).enumerate() {
                for v in chunk {
                    *v = prelu(*v, alpha[c]);
                }
            }
            out
        }
        Activation::Softmax { axis } => {
            let axis = *axis;
            if axis >= x.rank() {
                return config_err(format!("softmax axis {axis} out of range for {:?}", x.shape()));
            }
            let n = x.dim(axis);
            let inner: usize = x.shape()[axis + 1..].iter().product();
            let outer: usize = x.shape()[..axis].iter().product();
            let mut out = x.clone();
            let mut buf = vec![0.0; n];
            for o in 0..outer {
                for i in 0..inner {
                    for (k, b) in buf.iter_mut().enumerate() {
                        *b = x.data()[(o * n + k) * inner + i];
                    }
                    softmax_in_place(&mut buf);
                    for (k, b) in buf.iter().enumerate() {
                        out.data_mut()[(o * n + k) * inner + i] = *b;
                    }
                }
            }
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rand_tensor, rng};

    #[test]
    fn uniform_softmax() {
        let y = activation(&Activation::Softmax { axis: 0 }, &Tensor::zeros(&[8])).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.125));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut r = rng(1);
        let x = rand_tensor(&mut r, &[3, 5, 4], 10.0);
        for axis in 0..3 {
            let y = activation(&Activation::Softmax { axis }, &x).unwrap();
            let (outer, n, inner) = match axis {
                0 => (1, 3, 20),
                1 => (3, 5, 4),
                _ => (15, 4, 1),
            };
            for o in 0..outer {
                for i in 0..inner {
                    let s: f32 = (0..n).map(|k| y.data()[(o * n + k) * inner + i]).sum();
                    assert!((s - 1.0).abs() < 1e-6);
                }
            }
            assert!(y.data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn prelu_and_star() {
        let x = Tensor::new(vec![2, 1], vec![-4.0, 4.0]).unwrap();
        let y = activation(&Activation::Prelu(vec![0.25, 0.25]), &x).unwrap();
        assert_eq!(y.data(), &[-1.0, 4.0]);
        assert_eq!(star(8.0), 48.0);
        assert_eq!(star(-1.0), 0.0);
        assert!(activation(&Activation::Prelu(vec![1.0]), &x).is_err());
    }

    #[test]
    fn gelu_tanh_approximation_close_to_erf_form() {
        // Reference values of x * Phi(x).
        for (x, reference) in [(-2.0f32, -0.045_500_26f32), (0.5, 0.345_731_38), (1.0, 0.841_344_7)] {
            assert!((gelu(x) - reference).abs() < 1e-3);
        }
        assert_eq!(gelu(0.0), 0.0);
    }

    #[test]
    fn softmax_axis_out_of_range() {
        assert!(activation(&Activation::Softmax { axis: 2 }, &Tensor::zeros(&[2, 2])).is_err());
    }
}
