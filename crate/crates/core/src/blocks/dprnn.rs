use serde::{Deserialize, Serialize};

use super::block::{gru_manifest, load_gru};
use crate::error::{config_err, Error, Result};
use crate::tensor::{affine_into, layer_norm_frame, GruParams, Tensor, LN_EPS};
use crate::weights::{Init, ParamSpec, WeightStore};

/// Sizes of a grouped dual-path recurrence.
///
/// Hidden sizes are totals across groups: each of the `groups` cells gets
/// `hidden / groups` units (per direction for the intra path).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DprnnSpec {
    pub groups: usize,
    pub intra_hidden: usize,
    pub inter_hidden: usize,
}

impl Default for DprnnSpec {
    fn default() -> Self {
        Self {
            groups: 2,
            intra_hidden: 8,
            inter_hidden: 16,
        }
    }
}

impl DprnnSpec {
    pub fn validate(&self, channels: usize) -> Result<()> {
        let g = self.groups;
        if g == 0 || channels % g != 0 || self.intra_hidden % g != 0 || self.inter_hidden % g != 0 {
            return config_err(format!(
                "{g} groups must divide channels ({channels}) and hidden sizes ({}, {})",
                self.intra_hidden, self.inter_hidden
            ));
        }
        if self.intra_hidden == 0 || self.inter_hidden == 0 {
            return config_err("recurrent hidden sizes must be positive");
        }
        Ok(())
    }
}

/// Intra-frame bidirectional and inter-frame causal grouped GRUs, each followed
/// by a joint affine projection, LN over `(C, F)` and a residual connection.
/// Group outputs are concatenated as `[g0 fwd, g0 bwd, g1 fwd, g1 bwd, ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedDprnn {
    spec: DprnnSpec,
    channels: usize,
    freq: usize,
    intra_fwd: Vec<GruParams>,
    intra_bwd: Vec<GruParams>,
    intra_fc_w: Tensor,
    intra_fc_b: Tensor,
    intra_ln: (Tensor, Tensor),
    inter: Vec<GruParams>,
    inter_fc_w: Tensor,
    inter_fc_b: Tensor,
    inter_ln: (Tensor, Tensor),
}

/// Inter-frame hidden states, one per (group, bin).
#[derive(Clone, Debug, PartialEq)]
pub struct DprnnState {
    hidden: Vec<f32>,
    scratch: Vec<f32>,
}

impl DprnnState {
    pub fn reset(&mut self) {
        self.hidden.fill(0.0);
    }
}

impl GroupedDprnn {
    pub fn manifest(prefix: &str, spec: &DprnnSpec, channels: usize, freq: usize) -> Result<Vec<ParamSpec>> {
        spec.validate(channels)?;
        let g = spec.groups;
        let cg = channels / g;
        let mut v = Vec::new();
        for gi in 0..g {
            for dir in ["fwd", "bwd"] {
                v.extend(gru_manifest(&format!("{prefix}.intra.g{gi}.{dir}"), cg, spec.intra_hidden / g));
            }
        }
        push_projection(&mut v, &format!("{prefix}.intra"), channels, 2 * spec.intra_hidden, freq);
        for gi in 0..g {
            v.extend(gru_manifest(&format!("{prefix}.inter.g{gi}"), cg, spec.inter_hidden / g));
        }
        push_projection(&mut v, &format!("{prefix}.inter"), channels, spec.inter_hidden, freq);
        Ok(v)
    }

    pub fn from_store(store: &WeightStore, prefix: &str, spec: &DprnnSpec, channels: usize, freq: usize) -> Result<Self> {
        spec.validate(channels)?;
        let g = spec.groups;
        let cg = channels / g;
        let (hi, he) = (spec.intra_hidden / g, spec.inter_hidden / g);
        let mut intra_fwd = Vec::new();
        let mut intra_bwd = Vec::new();
        let mut inter = Vec::new();
        for gi in 0..g {
            intra_fwd.push(load_gru(store, &format!("{prefix}.intra.g{gi}.fwd"), cg, hi)?);
            intra_bwd.push(load_gru(store, &format!("{prefix}.intra.g{gi}.bwd"), cg, hi)?);
            inter.push(load_gru(store, &format!("{prefix}.inter.g{gi}"), cg, he)?);
        }
        let proj = |path: &str, d: usize| -> Result<(Tensor, Tensor, Tensor, Tensor)> {
            Ok((
                store.fetch(&format!("{prefix}.{path}.fc.weight"), &[channels, d])?,
                store.fetch(&format!("{prefix}.{path}.fc.bias"), &[channels])?,
                store.fetch(&format!("{prefix}.{path}.ln.gamma"), &[channels, freq])?,
                store.fetch(&format!("{prefix}.{path}.ln.beta"), &[channels, freq])?,
            ))
        };
        let (intra_fc_w, intra_fc_b, ig, ib) = proj("intra", 2 * spec.intra_hidden)?;
        let (inter_fc_w, inter_fc_b, eg, eb) = proj("inter", spec.inter_hidden)?;
        Ok(Self {
            spec: *spec,
            channels,
            freq,
            intra_fwd,
            intra_bwd,
            intra_fc_w,
            intra_fc_b,
            intra_ln: (ig, ib),
            inter,
            inter_fc_w,
            inter_fc_b,
            inter_ln: (eg, eb),
        })
    }

    pub fn new_state(&self) -> DprnnState {
        DprnnState {
            hidden: vec![0.0; self.freq * self.spec.inter_hidden],
            scratch: Vec::new(),
        }
    }

    /// Concatenated intra-frame group outputs `[F, 2 * intra_hidden]` before the projection.
    pub fn intra_group_outputs(&self, frame: &[f32]) -> Vec<f32> {
        let (c, f) = (self.channels, self.freq);
        let g = self.spec.groups;
        let cg = c / g;
        let hg = self.spec.intra_hidden / g;
        let width = 2 * self.spec.intra_hidden;
        let mut u = vec![0.0; f * width];
        let mut x = vec![0.0; cg];
        let mut h = vec![0.0; hg];
        let mut scratch = Vec::new();
        for gi in 0..g {
            for (dir, cell) in [(0usize, &self.intra_fwd[gi]), (1, &self.intra_bwd[gi])] {
                h.fill(0.0);
                for step in 0..f {
                    let bin = if dir == 0 { step } else { f - 1 - step };
                    for (i, xv) in x.iter_mut().enumerate() {
                        *xv = frame[(gi * cg + i) * f + bin];
                    }
                    cell.step(&x, &mut h, &mut scratch);
                    let col = gi * 2 * hg + dir * hg;
                    u[bin * width + col..bin * width + col + hg].copy_from_slice(&h);
                }
            }
        }
        u
    }

    /// Projects per-bin features `u [F, D]` to `[C, F]`, normalizes and adds `residual`.
    fn project(weight: &Tensor, bias: &Tensor, ln: &(Tensor, Tensor), u: &[f32], residual: &[f32], c: usize, f: usize, out: &mut [f32]) {
        let d = weight.dim(1);
        let mut col = vec![0.0; c];
        for bin in 0..f {
            affine_into(weight.data(), bias.data(), &u[bin * d..(bin + 1) * d], &mut col);
            for (ci, v) in col.iter().enumerate() {
                out[ci * f + bin] = *v;
            }
        }
        layer_norm_frame(out, ln.0.data(), ln.1.data(), LN_EPS);
        for (o, r) in out.iter_mut().zip(residual) {
            *o += r;
        }
    }

    /// Processes one `[C, F]` frame.
    pub fn step(&self, frame: &[f32], state: &mut DprnnState, out: &mut [f32]) -> Result<()> {
        let (c, f) = (self.channels, self.freq);
        if frame.len() != c * f || out.len() != c * f {
            return Err(Error::ShapeMismatch {
                name: "dprnn frame".into(),
                expected: vec![c, f],
                actual: vec![frame.len()],
            });
        }
        let u = self.intra_group_outputs(frame);
        let mut mid = vec![0.0; c * f];
        Self::project(&self.intra_fc_w, &self.intra_fc_b, &self.intra_ln, &u, frame, c, f, &mut mid);

        let g = self.spec.groups;
        let cg = c / g;
        let hg = self.spec.inter_hidden / g;
        let width = self.spec.inter_hidden;
        let mut v = vec![0.0; f * width];
        let mut x = vec![0.0; cg];
        for bin in 0..f {
            for gi in 0..g {
                for (i, xv) in x.iter_mut().enumerate() {
                    *xv = mid[(gi * cg + i) * f + bin];
                }
                let h = &mut state.hidden[bin * width + gi * hg..bin * width + (gi + 1) * hg];
                self.inter[gi].step(&x, h, &mut state.scratch);
                v[bin * width + gi * hg..bin * width + (gi + 1) * hg].copy_from_slice(h);
            }
        }
        Self::project(&self.inter_fc_w, &self.inter_fc_b, &self.inter_ln, &v, &mid, c, f, out);
        Ok(())
    }

    /// Offline forward over `[C, T, F]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.expect_rank("dprnn input", 3)?;
        let t_len = x.dim(1);
        x.expect_shape("dprnn input", &[self.channels, t_len, self.freq])?;
        let mut state = self.new_state();
        let n = self.channels * self.freq;
        let mut frame = vec![0.0; n];
        let mut out_frame = vec![0.0; n];
        let mut out = Tensor::zeros(x.shape());
        for t in 0..t_len {
            x.read_frame(t, &mut frame);
            self.step(&frame, &mut state, &mut out_frame)?;
            out.write_frame(t, &out_frame);
        }
        Ok(out)
    }
}

fn push_projection(v: &mut Vec<ParamSpec>, prefix: &str, c: usize, d: usize, f: usize) {
    v.push(ParamSpec::uniform(format!("{prefix}.fc.weight"), &[c, d], d, c));
    v.push(ParamSpec::new(format!("{prefix}.fc.bias"), &[c], Init::Zeros));
    v.push(ParamSpec::new(format!("{prefix}.ln.gamma"), &[c, f], Init::Ones));
    v.push(ParamSpec::new(format!("{prefix}.ln.beta"), &[c, f], Init::Zeros));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rand_tensor, rng};
    use crate::weights::init_from_manifest;

    fn build(seed: u64) -> (GroupedDprnn, WeightStore) {
        let m = GroupedDprnn::manifest("d", &DprnnSpec::default(), 16, 33).unwrap();
        let store = init_from_manifest(&m, seed);
        (GroupedDprnn::from_store(&store, "d", &DprnnSpec::default(), 16, 33).unwrap(), store)
    }

    #[test]
    fn zero_projection_is_identity() {
        let (_, mut store) = build(1);
        for name in ["d.intra.fc.weight", "d.inter.fc.weight"] {
            let z = Tensor::zeros(store.get(name).unwrap().shape());
            store.replace(name, z).unwrap();
        }
        let d = GroupedDprnn::from_store(&store, "d", &DprnnSpec::default(), 16, 33).unwrap();
        let mut r = rng(2);
        let x = rand_tensor(&mut r, &[16, 4, 33], 1.0);
        assert_eq!(d.forward(&x).unwrap(), x);
    }

    #[test]
    fn groups_are_isolated_before_projection() {
        let (d, _) = build(3);
        let mut r = rng(4);
        let x = rand_tensor(&mut r, &[16, 1, 33], 1.0);
        let mut y = x.clone();
        for v in &mut y.data_mut()[8 * 33..] {
            *v += 0.5;
        }
        let (a, b) = (d.intra_group_outputs(x.data()), d.intra_group_outputs(y.data()));
        for bin in 0..33 {
            assert_eq!(&a[bin * 16..bin * 16 + 8], &b[bin * 16..bin * 16 + 8]);
            assert_ne!(&a[bin * 16 + 8..bin * 16 + 16], &b[bin * 16 + 8..bin * 16 + 16]);
        }
    }

    #[test]
    fn rearrangement_equals_permuted_projection() {
        let (d, _) = build(5);
        let mut r = rng(6);
        let x = rand_tensor(&mut r, &[16, 1, 33], 1.0);
        let u = d.intra_group_outputs(x.data());
        // Interleave the groups' features, as an explicit shuffle layer would.
        let perm: Vec<usize> = (0..16).map(|k| (k % 2) * 8 + k / 2).collect();
        let shuffled: Vec<f32> = u.chunks(16).flat_map(|row| perm.iter().map(move |&p| row[p])).collect();
        let w = &d.intra_fc_w;
        let permuted = Tensor::from_fn(&[16, 16], |i| w.data()[(i / 16) * 16 + perm[i % 16]]);
        let mut plain = vec![0.0; 16 * 33];
        let mut rearranged = vec![0.0; 16 * 33];
        GroupedDprnn::project(w, &d.intra_fc_b, &d.intra_ln, &u, x.data(), 16, 33, &mut plain);
        GroupedDprnn::project(&permuted, &d.intra_fc_b, &d.intra_ln, &shuffled, x.data(), 16, 33, &mut rearranged);
        for (a, b) in plain.iter().zip(&rearranged) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn inter_path_is_causal() {
        let (d, _) = build(7);
        let mut r = rng(8);
        let x = rand_tensor(&mut r, &[16, 6, 33], 1.0);
        let mut y = x.clone();
        for c in 0..16 {
            for v in &mut y.data_mut()[(c * 6 + 4) * 33..(c * 6 + 6) * 33] {
                *v = -3.0;
            }
        }
        let (a, b) = (d.forward(&x).unwrap(), d.forward(&y).unwrap());
        for c in 0..16 {
            let lo = c * 6 * 33;
            assert_eq!(&a.data()[lo..lo + 4 * 33], &b.data()[lo..lo + 4 * 33]);
        }
        assert!(a.all_finite());
    }

    #[test]
    fn indivisible_channels_rejected() {
        let spec = DprnnSpec {
            groups: 3,
            ..DprnnSpec::default()
        };
        assert!(GroupedDprnn::manifest("d", &spec, 16, 33).is_err());
    }
}
