mod common;

use bindkit::geometry::RigidMotion;
use bindkit::model::{
    add_coordinate_noise, edge_loss, node_loss, total_loss, ComplexInputs, DecodingOrder, ModelConfig, NodeMask,
    RedNet,
};
use bindkit::residue::{MASK_TOKEN, NUM_CANONICAL, RESIDUE_VOCAB};
use bindkit::structure::Structure;
use bindkit::tensor::{Graph, Session, Tensor};
use common::{grad_check, grad_check_params, rng, toy_complex};
use rand::Rng;

fn tiny_config() -> ModelConfig {
    ModelConfig { width: 16, heads: 2, k_neighbors: 8, atom_k_max: 12, atom_radius: 8.0, ..ModelConfig::toy() }
}

#[test]
fn future_tokens_never_change_earlier_logits() {
    let (s, mask) = toy_complex(1, 30, 12);
    let cfg = tiny_config();
    let model = RedNet::new(cfg.clone(), 3).unwrap();
    let inp = ComplexInputs::build(&s, &mask, &cfg).unwrap();
    let cache = model.encode_cached(&inp).unwrap();
    let mut r = rng(5);
    for _ in 0..3 {
        let order = DecodingOrder::random(&mask, &mut r);
        let base = model.forward_cached(&inp, &cache, &inp.native, &order).unwrap();
        let t = r.random_range(0..order.positions().len());
        let mut tokens = inp.native.clone();
        for &p in &order.positions()[t..] {
            tokens[p] = r.random_range(0..NUM_CANONICAL);
        }
        let perturbed = model.forward_cached(&inp, &cache, &tokens, &order).unwrap();
        for &p in &order.positions()[..=t] {
            assert_eq!(base.row(p), perturbed.row(p), "position {p} leaked a future token");
        }
    }
}

#[test]
fn encoder_ignores_design_sequence() {
    let (s, mask) = toy_complex(2, 10, 10);
    let mut mutated = s.clone();
    for res in &mut mutated.chains[0].residues {
        res.aa = bindkit::residue::AminoAcid::Trp;
        res.name = "TRP".into();
    }
    let cfg = tiny_config();
    let model = RedNet::new(cfg.clone(), 4).unwrap();
    let a = model.encode_cached(&ComplexInputs::build(&s, &mask, &cfg).unwrap()).unwrap();
    let b = model.encode_cached(&ComplexInputs::build(&mutated, &mask, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn logits_invariant_under_rigid_motion() {
    let (s, mask) = toy_complex(3, 12, 14);
    let cfg = tiny_config();
    let model = RedNet::new(cfg.clone(), 5).unwrap();
    let order = DecodingOrder::random(&mask, &mut rng(6));
    let run = |st: &Structure| {
        let inp = ComplexInputs::build(st, &mask, &cfg).unwrap();
        model.forward(&inp, &inp.native, &order).unwrap()
    };
    let base = run(&s);
    let mut r = rng(7);
    for _ in 0..3 {
        let moved = run(&s.transformed(&RigidMotion::random(&mut r, 50.0)));
        for (a, b) in base.data().iter().zip(moved.data()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn chain_order_swap_permutes_logits() {
    let (s, mask) = toy_complex(4, 14, 16);
    let mut swapped = s.clone();
    swapped.chains.swap(0, 1);
    let (na, nb) = (s.chains[0].len(), s.chains[1].len());
    // original index -> swapped index
    let remap = |i: usize| if i < na { nb + i } else { i - na };
    let mut mask2 = vec![false; na + nb];
    for i in 0..na + nb {
        mask2[remap(i)] = mask[i];
    }
    let cfg = tiny_config();
    let model = RedNet::new(cfg.clone(), 8).unwrap();
    let order = DecodingOrder::random(&mask, &mut rng(9));
    let order2 = DecodingOrder::new(order.positions().iter().map(|&p| remap(p)).collect(), &mask2).unwrap();
    let inp = ComplexInputs::build(&s, &mask, &cfg).unwrap();
    let inp2 = ComplexInputs::build(&swapped, &mask2, &cfg).unwrap();
    let a = model.forward(&inp, &inp.native, &order).unwrap();
    let b = model.forward(&inp2, &inp2.native, &order2).unwrap();
    for i in 0..na + nb {
        for (x, y) in a.row(i).iter().zip(b.row(remap(i))) {
            assert!((x - y).abs() < 1e-9, "residue {i}: {x} vs {y}");
        }
    }
}

fn golden_logits() -> Vec<f64> {
    let (s, mask) = toy_complex(42, 10, 12);
    let cfg = tiny_config();
    let model = RedNet::new(cfg.clone(), 7).unwrap();
    let inp = ComplexInputs::build(&s, &mask, &cfg).unwrap();
    let order = DecodingOrder::left_to_right(&mask);
    let logits = model.forward(&inp, &inp.native, &order).unwrap();
    inp.design_positions().iter().flat_map(|&p| logits.row(p).to_vec()).collect()
}

#[test]
fn golden_logits_are_stable() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/toy_logits.json");
    let got = golden_logits();
    if std::env::var_os("BINDKIT_BLESS").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(&got).unwrap()).unwrap();
    }
    let want: Vec<f64> = serde_json::from_str(&std::fs::read_to_string(&path).expect("golden file")).unwrap();
    assert_eq!(want.len(), got.len());
    for (w, g) in want.iter().zip(&got) {
        assert!((w - g).abs() <= 1e-9 * w.abs().max(1.0), "{w} vs {g}");
    }
}

#[test]
fn full_model_gradients_at_20_residues() {
    let (s, mask) = toy_complex(10, 10, 10);
    let cfg = ModelConfig { width: 8, heads: 2, k_neighbors: 6, atom_k_max: 8, atom_radius: 7.0, ..ModelConfig::toy() };
    let model = RedNet::new(cfg.clone(), 11).unwrap();
    let inp = ComplexInputs::build(&s, &mask, &cfg).unwrap();
    let order = DecodingOrder::random(&mask, &mut rng(12));
    let k = inp.residue_layout.k;
    let edges: Vec<usize> = (0..inp.n * k).filter(|&e| inp.residue_layout.mask[e] && mask[e / k]).collect();
    let labels: Vec<usize> =
        edges.iter().map(|&e| inp.native[e / k] * RESIDUE_VOCAB + inp.native[inp.residue_layout.index[e]]).collect();
    let err = grad_check_params(&model.params, &[], Some(3), |sess, _| {
        let enc = model.encode(sess, &inp).unwrap();
        let states = model.decode(sess, &inp, enc, &inp.native, &order).unwrap();
        let logits = model.logits(sess, states).unwrap();
        let masks = [NodeMask::new("design", 1.0, mask.clone())];
        let node = node_loss(&mut sess.graph, logits, &inp.native, &masks).unwrap();
        let el = model.edge_logits(sess, &inp, states, enc, &edges).unwrap();
        let edge = edge_loss(&mut sess.graph, el, &labels).unwrap();
        total_loss(&mut sess.graph, node, edge, 1.0).unwrap()
    });
    assert!(err < 1e-5, "{err:e}");
}

#[test]
fn weights_round_trip_through_container() {
    let cfg = tiny_config();
    let model = RedNet::new(cfg.clone(), 13).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.bin");
    model.save(&path).unwrap();
    let loaded = RedNet::load(&path).unwrap();
    assert_eq!(loaded, model.rounded());
    assert_eq!(loaded.config, cfg);
    let (s, mask) = toy_complex(14, 8, 8);
    let inp = ComplexInputs::build(&s, &mask, &cfg).unwrap();
    let order = DecodingOrder::left_to_right(&mask);
    let a = loaded.forward(&inp, &inp.native, &order).unwrap();
    for (x, y) in a.data().iter().zip(model.forward(&inp, &inp.native, &order).unwrap().data()) {
        assert!((x - y).abs() < 1e-4 * y.abs().max(1.0), "single-precision weights drift too far");
    }
}

#[test]
fn invalid_orders_and_tokens_are_rejected() {
    let (s, mask) = toy_complex(15, 6, 6);
    let cfg = tiny_config();
    let model = RedNet::new(cfg.clone(), 1).unwrap();
    let inp = ComplexInputs::build(&s, &mask, &cfg).unwrap();
    let order = DecodingOrder::left_to_right(&mask);
    assert!(model.forward(&inp, &inp.native[..5], &order).is_err());
    let mut bad = inp.native.clone();
    bad[0] = RESIDUE_VOCAB;
    assert!(model.forward(&inp, &bad, &order).is_err());
    let other = DecodingOrder::left_to_right(&vec![true; inp.n]);
    assert!(model.forward(&inp, &inp.native, &other).is_err());
}

#[test]
fn loss_conventions() {
    let n = 4;
    let mut g = Graph::new();
    let logits = g.constant(Tensor::zeros(&[n, RESIDUE_VOCAB]));
    let labels = vec![0, 3, 5, MASK_TOKEN];
    let all = NodeMask::new("all", 1.0, vec![true; n]);
    let l = node_loss(&mut g, logits, &labels, &[all.clone()]).unwrap();
    assert!((g.value(l).item() - (RESIDUE_VOCAB as f64).ln()).abs() < 1e-12);

    let some = NodeMask::new("some", 1.0, vec![true, false, true, false]);
    let twice = NodeMask { weight: 2.0, ..some.clone() };
    let mut r = rng(1);
    let lg = g.constant(Tensor::from_fn(&[n, RESIDUE_VOCAB], |_| r.random_range(-2.0..2.0)));
    let one = node_loss(&mut g, lg, &labels, &[some]).unwrap();
    let two = node_loss(&mut g, lg, &labels, &[twice]).unwrap();
    assert_eq!(g.value(two).item(), 2.0 * g.value(one).item());

    let empty = NodeMask::new("none", 5.0, vec![false; n]);
    let z = node_loss(&mut g, lg, &labels, &[empty]).unwrap();
    assert_eq!(g.value(z).item(), 0.0);

    let el = g.constant(Tensor::from_fn(&[3, RESIDUE_VOCAB * RESIDUE_VOCAB], |i| (i % 7) as f64));
    let e = edge_loss(&mut g, el, &[0, 40, 1000]).unwrap();
    let only_node = total_loss(&mut g, one, e, 0.0).unwrap();
    assert_eq!(g.value(only_node).item(), g.value(one).item());
}

#[test]
fn loss_gradients() {
    for seed in 1..=5u64 {
        let mut r = rng(seed);
        let logits = Tensor::from_fn(&[4, RESIDUE_VOCAB], |_| r.random_range(-2.0..2.0));
        let edges = Tensor::from_fn(&[3, RESIDUE_VOCAB * RESIDUE_VOCAB], |_| r.random_range(-1.0..1.0));
        let labels = [1, 4, 7, 2];
        let err = grad_check(&[logits, edges], |g, v| {
            let masks = [NodeMask::new("a", 1.0, vec![true, true, false, true]), NodeMask::new("b", 0.5, vec![false, true, true, false])];
            let node = node_loss(g, v[0], &labels, &masks).unwrap();
            let edge = edge_loss(g, v[1], &[3, 500, 1088]).unwrap();
            total_loss(g, node, edge, 1.0).unwrap()
        });
        assert!(err < 1e-5, "seed {seed}: {err:e}");
    }
}

#[test]
fn coordinate_noise_statistics() {
    let (s, _) = toy_complex(16, 10, 10);
    assert_eq!(add_coordinate_noise(&s, 0.0, 1), s);
    assert_eq!(add_coordinate_noise(&s, 0.2, 9), add_coordinate_noise(&s, 0.2, 9));

    // large structure for the variance check
    let big = bindkit::synth::random_monomer(&mut rng(17), "BIG", 1300);
    let noisy = add_coordinate_noise(&big, 0.3, 5);
    let mut d: [Vec<f64>; 3] = Default::default();
    for (c0, c1) in big.chains.iter().zip(&noisy.chains) {
        for (r0, r1) in c0.residues.iter().zip(&c1.residues) {
            for (a0, a1) in r0.atoms.iter().zip(&r1.atoms) {
                for ax in 0..3 {
                    d[ax].push(a1.pos[ax] - a0.pos[ax]);
                }
            }
        }
    }
    assert!(d[0].len() >= 10_000);
    for v in &d {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
        assert!((sd - 0.3).abs() < 0.015, "stddev {sd}");
    }
}

#[test]
fn encoder_decoder_split_matches_single_graph() {
    let (s, mask) = toy_complex(18, 8, 9);
    let cfg = tiny_config();
    let model = RedNet::new(cfg.clone(), 19).unwrap();
    let inp = ComplexInputs::build(&s, &mask, &cfg).unwrap();
    let order = DecodingOrder::random(&mask, &mut rng(20));
    let mut sess = Session::new(&model.params, Graph::new());
    let enc = model.encode(&mut sess, &inp).unwrap();
    let st = model.decode(&mut sess, &inp, enc, &inp.native, &order).unwrap();
    let lg = model.logits(&mut sess, st).unwrap();
    assert_eq!(sess.graph.value(lg), &model.forward(&inp, &inp.native, &order).unwrap());
}
