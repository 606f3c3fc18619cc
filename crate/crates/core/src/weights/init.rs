use rand::Rng;

use super::io::WeightStore;
use crate::random::seeded_rng;
use crate::tensor::Tensor;

/// How a parameter is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    Uniform { fan_in: usize, fan_out: usize },
    Zeros,
    Ones,
    Const(f32),
}

impl Init {
    pub fn bound(&self) -> Option<f32> {
        match *self {
            Init::Uniform { fan_in, fan_out } => Some((6.0 / (fan_in + fan_out).max(1) as f64).sqrt() as f32),
            _ => None,
        }
    }
}

/// One named parameter of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: &[usize], init: Init) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            init,
        }
    }

    pub fn uniform(name: impl Into<String>, shape: &[usize], fan_in: usize, fan_out: usize) -> Self {
        Self::new(name, shape, Init::Uniform { fan_in, fan_out })
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws every parameter of `manifest`, in order, from one seeded stream.
pub fn init_from_manifest(manifest: &[ParamSpec], seed: u64) -> WeightStore {
    let mut rng = seeded_rng(seed);
    let mut store = WeightStore::new();
    for p in manifest {
        let t = match p.init {
            Init::Uniform { .. } => {
                let a = p.init.bound().expect("uniform has a bound");
                Tensor::from_fn(&p.shape, |_| loop {
                    let v = rng.gen_range(-a..a);
                    if v != -a {
                        break v;
                    }
                })
            }
            Init::Zeros => Tensor::zeros(&p.shape),
            Init::Ones => Tensor::full(&p.shape, 1.0),
            Init::Const(c) => Tensor::full(&p.shape, c),
        };
        store
            .insert(p.name.clone(), t)
            .expect("manifest names are unique");
    }
    store
}
