use crate::tensor::{ConvSpec, Tensor};
use crate::error::{config_err, Result};

/// `K` candidate kernels sharing one static bias.
///
/// Candidates are `[K, C_out, C_in / groups, K_t, K_f]`. A transposed bank is
/// depthwise along frequency with `K_t = 1` and upsamples instead of striding.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelBank {
    candidates: Tensor,
    bias: Tensor,
    spec: ConvSpec,
    c_in: usize,
    transposed: bool,
}

impl KernelBank {
    pub fn new(candidates: Tensor, bias: Tensor, spec: ConvSpec) -> Result<Self> {
        Self::build(candidates, bias, spec, false)
    }

    pub fn new_transposed(candidates: Tensor, bias: Tensor, spec: ConvSpec) -> Result<Self> {
        Self::build(candidates, bias, spec, true)
    }

    /// Wraps a single static kernel `[C_out, C_in / groups, K_t, K_f]` as a one-candidate bank.
    pub fn from_static(kernel: Tensor, bias: Tensor, spec: ConvSpec, transposed: bool) -> Result<Self> {
        kernel.expect_rank("static kernel", 4)?;
        let mut shape = vec![1];
        shape.extend_from_slice(kernel.shape());
        Self::build(kernel.reshape(&shape)?, bias, spec, transposed)
    }

    fn build(candidates: Tensor, bias: Tensor, spec: ConvSpec, transposed: bool) -> Result<Self> {
        candidates.expect_rank("kernel bank", 5)?;
        let (k, c_out, cg_in) = (candidates.dim(0), candidates.dim(1), candidates.dim(2));
        if k == 0 {
            return config_err("kernel bank needs at least one candidate");
        }
        let c_in = cg_in * spec.groups;
        spec.validate(c_in, c_out)?;
        candidates.expect_shape(
            "kernel bank",
            &[k, c_out, cg_in, spec.kernel_t, spec.kernel_f],
        )?;
        bias.expect_shape("kernel bank bias", &[c_out])?;
        if transposed && (spec.groups != c_out || c_in != c_out || spec.kernel_t != 1) {
            return config_err("transposed bank must be depthwise with kernel_t = 1");
        }
        Ok(Self {
            candidates,
            bias,
            spec,
            c_in,
            transposed,
        })
    }

    pub fn kernels(&self) -> usize {
        self.candidates.dim(0)
    }

    pub fn c_out(&self) -> usize {
        self.candidates.dim(1)
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn spec(&self) -> &ConvSpec {
        &self.spec
    }

    pub fn is_transposed(&self) -> bool {
        self.transposed
    }

    pub fn is_pointwise(&self) -> bool {
        self.spec.kernel_t == 1 && self.spec.kernel_f == 1 && !self.transposed
    }

    /// Flattened size `D` of one candidate.
    pub fn kernel_len(&self) -> usize {
        self.candidates.len() / self.kernels()
    }

    pub fn candidates(&self) -> &Tensor {
        &self.candidates
    }

    pub fn candidate(&self, k: usize) -> &[f32] {
        let d = self.kernel_len();
        &self.candidates.data()[k * d..(k + 1) * d]
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn out_freq(&self, f_in: usize) -> Result<usize> {
        if self.transposed {
            self.spec.out_freq_transposed(f_in)
        } else {
            self.spec.out_freq(f_in)
        }
    }

    /// Shape of one aggregated kernel.
    pub fn kernel_shape(&self) -> [usize; 4] {
        let s = self.candidates.shape();
        [s[1], s[2], s[3], s[4]]
    }
}

/// Optional maps multiplied into an aggregated kernel after mixing.
///
/// `spatial` has `K_t * K_f` entries, `chan_in` one per input channel and
/// `chan_out` one per output channel.
#[derive(Clone, Copy, Debug, Default)]
pub struct KernelMaps<'a> {
    pub spatial: Option<&'a [f32]>,
    pub chan_in: Option<&'a [f32]>,
    pub chan_out: Option<&'a [f32]>,
}

impl KernelMaps<'_> {
    pub fn is_empty(&self) -> bool {
        self.spatial.is_none() && self.chan_in.is_none() && self.chan_out.is_none()
    }

    fn check(&self, bank: &KernelBank) -> Result<()> {
        let checks = [
            ("spatial map", self.spatial, bank.spec.taps()),
            ("input channel map", self.chan_in, bank.c_in),
            ("output channel map", self.chan_out, bank.c_out()),
        ];
        for (name, map, want) in checks {
            if let Some(m) = map {
                if m.len() != want {
                    return config_err(format!("{name} has {} entries, expected {want}", m.len()));
                }
            }
        }
        Ok(())
    }
}

/// Mixes candidates with weights `a`, then applies maps. No shape checks.
pub(crate) fn aggregate_into(bank: &KernelBank, a: &[f32], maps: &KernelMaps, out: &mut [f32]) {
    let d = bank.kernel_len();
    let w = bank.candidates.data();
    for (o, wv) in out.iter_mut().zip(&w[..d]) {
        *o = a[0] * wv;
    }
    for (k, ak) in a.iter().enumerate().skip(1) {
        for (o, wv) in out.iter_mut().zip(&w[k * d..(k + 1) * d]) {
            *o += ak * wv;
        }
    }
    if maps.is_empty() {
        return;
    }
    let [c_out, cg_in, kt, kf] = bank.kernel_shape();
    let taps = kt * kf;
    let cg_out = c_out / bank.spec.groups;
    for o in 0..c_out {
        let g = o / cg_out;
        for ci in 0..cg_in {
            let base = (o * cg_in + ci) * taps;
            let mut scale = 1.0f32;
            if let Some(m) = maps.chan_out {
                scale *= m[o];
            }
            if let Some(m) = maps.chan_in {
                scale *= m[g * cg_in + ci];
            }
            for tap in 0..taps {
                let s = match maps.spatial {
                    Some(m) => scale * m[tap],
                    None => scale,
                };
                out[base + tap] *= s;
            }
        }
    }
}

/// `W = (Σ_k a_k W_k) ⊙ maps`, returned as `[C_out, C_in / groups, K_t, K_f]`.
pub fn aggregate_kernel(bank: &KernelBank, a: &[f32], maps: &KernelMaps) -> Result<Tensor> {
    if a.len() != bank.kernels() {
        return config_err(format!(
            "attention has {} weights for {} candidates",
            a.len(),
            bank.kernels()
        ));
    }
    maps.check(bank)?;
    let mut out = vec![0.0; bank.kernel_len()];
    aggregate_into(bank, a, maps, &mut out);
    Tensor::new(bank.kernel_shape().to_vec(), out)
}

pub(crate) fn check_maps(bank: &KernelBank, maps: &KernelMaps) -> Result<()> {
    maps.check(bank)
}
