use adaptcrn::spectral::ERB_BANDS;
use adaptcrn::weights::init_random;
use adaptcrn::{Error, Model, ModelConfig, Tensor, WeightStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(n: usize, seed: u64) -> Vec<f32> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| r.gen_range(-0.5..0.5)).collect()
}

/// Forces the last decoder block to a positive constant and saturates the mask.
#[test]
fn saturated_unit_mask_reconstructs_the_input() {
    let cfg = ModelConfig {
        mask_beta: 1.0,
        ..ModelConfig::default()
    };
    let mut store = init_random(&cfg, 11).unwrap();
    for name in ["dec4.pw2.weight", "dec4.pw2.bias", "dec4.bn2.mean"] {
        store.get_mut(name).unwrap().data_mut().fill(0.0);
    }
    store.get_mut("dec4.bn2.beta").unwrap().data_mut().fill(1.0);
    store.get_mut("mask.alpha").unwrap().data_mut().fill(1e4);
    let model = Model::build(&cfg, &store).unwrap();
    let x = noise(9000, 1);
    let y = model.enhance(&x).unwrap();
    // The first hop is covered by a single window.
    let err = x[256..].iter().zip(&y[256..]).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
    assert!(err < 1e-5, "{err}");
}

#[test]
fn weight_file_round_trip_preserves_output() {
    let cfg = ModelConfig::default();
    let store = init_random(&cfg, 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.acnw");
    store.save(&path).unwrap();
    let loaded = WeightStore::load(&path).unwrap();
    assert_eq!(loaded.manifest_hash(), store.manifest_hash());
    let x = noise(4000, 2);
    let a = Model::build(&cfg, &store).unwrap().enhance(&x).unwrap();
    let b = Model::build(&cfg, &loaded).unwrap().enhance(&x).unwrap();
    assert_eq!(a, b);
}

#[test]
fn strategies_give_the_same_enhancement() {
    let x = noise(6000, 3);
    let store = init_random(&ModelConfig::default(), 13).unwrap();
    let outs: Vec<Vec<f32>> = adaptcrn::adaptive::Strategy::ALL
        .iter()
        .map(|&s| {
            let cfg = ModelConfig {
                strategy: s,
                ..ModelConfig::default()
            };
            Model::build(&cfg, &store).unwrap().enhance(&x).unwrap()
        })
        .collect();
    for o in &outs[1..] {
        let err = o.iter().zip(&outs[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
        assert!(err < 1e-4, "{err}");
    }
}

#[test]
fn sessions_share_one_model_across_threads() {
    let cfg = ModelConfig::default();
    let model = Model::build(&cfg, &init_random(&cfg, 14).unwrap()).unwrap();
    let inputs: Vec<Vec<f32>> = (0..3).map(|i| noise(256 * 20, 20 + i)).collect();
    let expected: Vec<Vec<f32>> = inputs.iter().map(|x| model.enhance_streaming(x).unwrap()).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = inputs
            .iter()
            .map(|x| s.spawn(|| model.enhance_streaming(x).unwrap()))
            .collect();
        for (h, e) in handles.into_iter().zip(&expected) {
            assert_eq!(&h.join().unwrap(), e);
        }
    });
}

#[test]
fn corrupted_weights_are_reported_by_name() {
    let cfg = ModelConfig::default();
    let mut store = init_random(&cfg, 15).unwrap();
    store.remove("dprnn1.inter.g1.w_hh");
    match Model::build(&cfg, &store) {
        Err(Error::MissingTensor(n)) => assert_eq!(n, "dprnn1.inter.g1.w_hh"),
        other => panic!("unexpected {other:?}"),
    }
    let mut store = init_random(&cfg, 15).unwrap();
    store.remove("enc3.ln.gamma");
    store.insert("enc3.ln.gamma", Tensor::zeros(&[16, ERB_BANDS])).unwrap();
    assert!(matches!(Model::build(&cfg, &store), Err(Error::ShapeMismatch { name, .. }) if name == "enc3.ln.gamma"));
}
