use super::activation::sigmoid;
use super::Tensor;
use crate::error::{config_err, Result};

/// Weights of one GRU cell. Gate rows are stacked in the order
/// (update `z`, reset `r`, candidate `n`).
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub b_ih: Tensor,
    pub b_hh: Tensor,
}

impl GruParams {
    pub fn new(w_ih: Tensor, w_hh: Tensor, b_ih: Tensor, b_hh: Tensor) -> Result<Self> {
        w_ih.expect_rank("gru w_ih", 2)?;
        let three_h = w_ih.dim(0);
        if three_h % 3 != 0 || three_h == 0 {
            return config_err(format!("gru w_ih rows {three_h} not a positive multiple of 3"));
        }
        let h = three_h / 3;
        w_hh.expect_shape("gru w_hh", &[3 * h, h])?;
        b_ih.expect_shape("gru b_ih", &[3 * h])?;
        b_hh.expect_shape("gru b_hh", &[3 * h])?;
        Ok(Self { w_ih, w_hh, b_ih, b_hh })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Tensor::zeros(&[3 * hidden, input]),
            w_hh: Tensor::zeros(&[3 * hidden, hidden]),
            b_ih: Tensor::zeros(&[3 * hidden]),
            b_hh: Tensor::zeros(&[3 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.dim(1)
    }

    pub fn input(&self) -> usize {
        self.w_ih.dim(1)
    }

    /// Advances `h` by one step of input `x`. `scratch` is resized as needed.
    pub fn step(&self, x: &[f32], h: &mut [f32], scratch: &mut Vec<f32>) {
        let hs = self.hidden();
        let d = self.input();
        scratch.resize(6 * hs, 0.0);
        let (gi, gh) = scratch.split_at_mut(3 * hs);
        let wi = self.w_ih.data();
        let wh = self.w_hh.data();
        for row in 0..3 * hs {
            let mut a = self.b_ih.data()[row];
            for (w, xv) in wi[row * d..(row + 1) * d].iter().zip(x) {
                a += w * xv;
            }
            gi[row] = a;
            let mut b = self.b_hh.data()[row];
            for (w, hv) in wh[row * hs..(row + 1) * hs].iter().zip(h.iter()) {
                b += w * hv;
            }
            gh[row] = b;
        }
        for j in 0..hs {
            let z = sigmoid(gi[j] + gh[j]);
            let r = sigmoid(gi[hs + j] + gh[hs + j]);
            let n = (gi[2 * hs + j] + r * gh[2 * hs + j]).tanh();
            h[j] = (1.0 - z) * n + z * h[j];
        }
    }
}

/// Runs the recurrence over a `[T, D_in]` sequence from `h0`; returns `[T, H]`.
pub fn gru_seq(input: &Tensor, params: &GruParams, h0: &Tensor) -> Result<Tensor> {
    input.expect_rank("gru input", 2)?;
    let (t_len, d) = (input.dim(0), input.dim(1));
    if d != params.input() {
        return config_err(format!("gru expects input size {}, got {d}", params.input()));
    }
    let hs = params.hidden();
    h0.expect_shape("gru h0", &[hs])?;
    let mut h = h0.data().to_vec();
    let mut out = Vec::with_capacity(t_len * hs);
    let mut scratch = Vec::new();
    for t in 0..t_len {
        params.step(&input.data()[t * d..(t + 1) * d], &mut h, &mut scratch);
        out.extend_from_slice(&h);
    }
    Tensor::new(vec![t_len, hs], out)
}
