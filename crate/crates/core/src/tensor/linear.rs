use super::Tensor;
use crate::error::{config_err, Result};

/// Affine map over the trailing axis: `[..., D_in]` → `[..., D_out]`.
pub fn linear(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    weight.expect_rank("linear weight", 2)?;
    let (d_out, d_in) = (weight.dim(0), weight.dim(1));
    bias.expect_shape("linear bias", &[d_out])?;
    if input.rank() == 0 || *input.shape().last().unwrap() != d_in {
        return config_err(format!(
            "linear expects trailing axis {d_in}, got shape {:?}",
            input.shape()
        ));
    }
    let rows = input.len() / d_in;
    let mut out = Vec::with_capacity(rows * d_out);
    for row in input.data().chunks(d_in) {
        for o in 0..d_out {
            out.push(dot(&weight.data()[o * d_in..(o + 1) * d_in], row) + bias.data()[o]);
        }
    }
    let mut shape = input.shape().to_vec();
    *shape.last_mut().unwrap() = d_out;
    Tensor::new(shape, out)
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// `out = W x + b` for a single vector.
pub(crate) fn affine_into(weight: &[f32], bias: &[f32], x: &[f32], out: &mut [f32]) {
    let d_in = x.len();
    for (o, y) in out.iter_mut().enumerate() {
        *y = dot(&weight[o * d_in..(o + 1) * d_in], x) + bias[o];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rand_tensor, rng};

    #[test]
    fn identity_and_constant() {
        let mut r = rng(1);
        let x = rand_tensor(&mut r, &[2, 3, 4], 1.0);
        let eye = Tensor::from_fn(&[4, 4], |i| if i / 4 == i % 4 { 1.0 } else { 0.0 });
        assert_eq!(linear(&x, &eye, &Tensor::zeros(&[4])).unwrap(), x);
        let b = Tensor::from_vec(vec![1.0, -2.0]);
        let y = linear(&x, &Tensor::zeros(&[2, 4]), &b).unwrap();
        assert_eq!(y.shape(), &[2, 3, 2]);
        assert!(y.data().chunks(2).all(|c| c == [1.0, -2.0]));
    }

    #[test]
    fn matches_dot_product_oracle() {
        let mut r = rng(2);
        let w = rand_tensor(&mut r, &[3, 4], 1.0);
        let b = rand_tensor(&mut r, &[3], 1.0);
        let x = rand_tensor(&mut r, &[4], 1.0);
        let y = linear(&x, &w, &b).unwrap();
        for o in 0..3 {
            let mut acc = b.data()[o] as f64;
            for i in 0..4 {
                acc += w.data()[o * 4 + i] as f64 * x.data()[i] as f64;
            }
            assert!((y.data()[o] as f64 - acc).abs() < 1e-6);
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(linear(&Tensor::zeros(&[3]), &Tensor::zeros(&[2, 4]), &Tensor::zeros(&[2])).is_err());
    }
}
