use super::bank::{aggregate_into, KernelBank, KernelMaps};
use crate::error::{config_err, Result};
use crate::tensor::{conv_frame, Tensor};

/// Two stacked pointwise adaptive layers folded into one layer with `K1 * K2` candidates.
///
/// Candidate `j * K1 + i` is `W2_j · W1_i`; its weight is `a2_j(t) · a1_i(t)`.
/// The first layer's bias passes through the second layer's mixed kernel,
/// so the folded bias `Σ_j a2_j(t) W2_j b1 + b2` varies per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ReparamPair {
    pub bank: KernelBank,
    /// `[K2, C_out]` rows `W2_j · b1`.
    pub carried_bias: Tensor,
    k1: usize,
    k2: usize,
}

pub fn reparam_pw_pair(first: &KernelBank, second: &KernelBank) -> Result<ReparamPair> {
    for (name, b) in [("first", first), ("second", second)] {
        let s = b.spec();
        if !b.is_pointwise() || s.groups != 1 || s.stride_f != 1 || s.pad_f != 0 {
            return config_err(format!("{name} bank is not a dense 1x1 convolution"));
        }
    }
    if second.c_in() != first.c_out() {
        return config_err(format!(
            "cannot compose {} -> {} with {} -> {}",
            first.c_in(),
            first.c_out(),
            second.c_in(),
            second.c_out()
        ));
    }
    let (k1, k2) = (first.kernels(), second.kernels());
    let (c_in, c_mid, c_out) = (first.c_in(), first.c_out(), second.c_out());
    let mut composed = Vec::with_capacity(k1 * k2 * c_out * c_in);
    for j in 0..k2 {
        let w2 = second.candidate(j);
        for i in 0..k1 {
            let w1 = first.candidate(i);
            for o in 0..c_out {
                for c in 0..c_in {
                    let s: f64 = (0..c_mid)
                        .map(|m| w2[o * c_mid + m] as f64 * w1[m * c_in + c] as f64)
                        .sum();
                    composed.push(s as f32);
                }
            }
        }
    }
    let mut carried = Vec::with_capacity(k2 * c_out);
    for j in 0..k2 {
        let w2 = second.candidate(j);
        for o in 0..c_out {
            let s: f64 = (0..c_mid)
                .map(|m| w2[o * c_mid + m] as f64 * first.bias().data()[m] as f64)
                .sum();
            carried.push(s as f32);
        }
    }
    let bank = KernelBank::new(
        Tensor::new(vec![k1 * k2, c_out, c_in, 1, 1], composed)?,
        second.bias().clone(),
        *second.spec(),
    )?;
    Ok(ReparamPair {
        bank,
        carried_bias: Tensor::new(vec![k2, c_out], carried)?,
        k1,
        k2,
    })
}

impl ReparamPair {
    /// Outer-product weights `a2_j · a1_i` at index `j * K1 + i`.
    pub fn combine_attention(&self, a1: &[f32], a2: &[f32]) -> Vec<f32> {
        a2.iter().flat_map(|&w2| a1.iter().map(move |&w1| w2 * w1)).collect()
    }

    pub fn frame_bias(&self, a2: &[f32]) -> Vec<f32> {
        let c_out = self.bank.c_out();
        let mut b = self.bank.bias().data().to_vec();
        for (j, aj) in a2.iter().enumerate() {
            for (bo, cb) in b.iter_mut().zip(&self.carried_bias.data()[j * c_out..(j + 1) * c_out]) {
                *bo += aj * cb;
            }
        }
        b
    }

    /// Single-layer forward given the two original attention sequences `[T, K1]`, `[T, K2]`.
    pub fn forward(&self, input: &Tensor, a1: &Tensor, a2: &Tensor) -> Result<Tensor> {
        input.expect_rank("reparam input", 3)?;
        let (c_in, t_len, f) = (input.dim(0), input.dim(1), input.dim(2));
        if c_in != self.bank.c_in() {
            return config_err(format!("expected {} input channels, got {c_in}", self.bank.c_in()));
        }
        a1.expect_shape("first attention", &[t_len, self.k1])?;
        a2.expect_shape("second attention", &[t_len, self.k2])?;
        let c_out = self.bank.c_out();
        let mut out = Tensor::zeros(&[c_out, t_len, f]);
        let mut kernel = vec![0.0; self.bank.kernel_len()];
        let mut frame = vec![0.0; c_out * f];
        for t in 0..t_len {
            let w1 = &a1.data()[t * self.k1..(t + 1) * self.k1];
            let w2 = &a2.data()[t * self.k2..(t + 1) * self.k2];
            let a = self.combine_attention(w1, w2);
            aggregate_into(&self.bank, &a, &KernelMaps::default(), &mut kernel);
            let bias = self.frame_bias(w2);
            conv_frame(
                input.data(),
                c_in,
                t_len,
                f,
                t,
                &kernel,
                Some(&bias),
                c_out,
                self.bank.spec(),
                f,
                &mut frame,
            );
            out.write_frame(t, &frame);
        }
        Ok(out)
    }
}
