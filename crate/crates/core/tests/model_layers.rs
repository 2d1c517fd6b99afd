mod common;

use bindkit::featurize::{build_glinter_graphs, GlinterGraph, GlinterInputs, LocalFrame};
use bindkit::geometry::{Mat3, RigidMotion, Vec3};
use bindkit::model::{CaConv, EgatLayer, GatLayer, NeighborLayout, PaddedNeighbors, PairBiasAttention};
use bindkit::synth;
use bindkit::tensor::{Graph, ParamStore, Session, Tensor};
use common::{grad_check_params, probe, randn, rng};

const SEEDS: [u64; 5] = [11, 12, 13, 14, 15];
const TOL: f64 = 1e-5;

fn ring_layout(n: usize, k: usize) -> NeighborLayout {
    let index: Vec<usize> = (0..n * k).map(|e| (e / k + 1 + e % k) % n).collect();
    NeighborLayout::new(n, k, &index, &vec![true; n * k])
}

#[test]
fn gat_gradients_6x3() {
    let (n, k, w, ew) = (6, 3, 8, 5);
    for seed in SEEDS {
        let mut r = rng(seed);
        let mut store = ParamStore::new();
        let layer = GatLayer::new(&mut store, "gat", w, ew, 2, 0.2, 0.0, &mut r);
        let mut nb = ring_layout(n, k);
        nb.mask[4] = false;
        let s = randn(&[n, w], &mut r);
        let p = randn(&[n * k, ew], &mut r);
        let err = grad_check_params(&store, &[s, p], None, |sess, v| {
            let out = layer.forward(sess, v[0], v[1], &nb).unwrap().nodes;
            probe(&mut sess.graph, out, seed)
        });
        assert!(err < TOL, "seed {seed}: {err:e}");
    }
}

#[test]
fn gat_closed_output_projections_leave_transition_only() {
    let (n, k, w) = (5, 2, 8);
    let mut r = rng(1);
    let mut store = ParamStore::new();
    let layer = GatLayer::new(&mut store, "gat", w, 3, 2, 0.2, 0.0, &mut r);
    for lin in [layer.pool_out, layer.attn_out] {
        store.get_mut(lin.weight).data_mut().fill(0.0);
        store.get_mut(lin.bias.unwrap()).data_mut().fill(0.0);
    }
    let s = randn(&[n, w], &mut r);
    let p = randn(&[n * k, 3], &mut r);
    let mut sess = Session::new(&store, Graph::new());
    let sv = sess.graph.constant(s.clone());
    let pv = sess.graph.constant(p);
    let out = layer.forward(&mut sess, sv, pv, &ring_layout(n, k)).unwrap().nodes;
    let t = layer.transition.forward(&mut sess, sv).unwrap();
    let expect = sess.graph.add(sv, t).unwrap();
    assert_eq!(sess.graph.value(out), sess.graph.value(expect));
}

#[test]
fn gat_single_and_empty_neighbourhoods() {
    let (n, k, w) = (3, 2, 4);
    let mut r = rng(2);
    let mut store = ParamStore::new();
    let layer = GatLayer::new(&mut store, "gat", w, 2, 2, 0.2, 0.0, &mut r);
    // node 0 keeps one neighbour, node 1 none, node 2 both
    let nb = NeighborLayout::new(n, k, &[1, 2, 0, 2, 0, 1], &[false, true, false, false, true, true]);
    let mut sess = Session::new(&store, Graph::new());
    let s = sess.graph.constant(randn(&[n, w], &mut r));
    let p = sess.graph.constant(randn(&[n * k, 2], &mut r));
    let out = layer.forward(&mut sess, s, p, &nb).unwrap();
    let a = sess.graph.value(out.attention).data();
    // layout [n, k, heads]
    for h in 0..2 {
        let at = |node: usize, slot: usize| a[(node * k + slot) * 2 + h];
        assert_eq!(at(0, 1), 1.0);
        assert_eq!(at(0, 0), 0.0);
        assert_eq!(at(1, 0) + at(1, 1), 0.0);
        assert!((at(2, 0) + at(2, 1) - 1.0).abs() < 1e-12);
    }
    assert!(sess.graph.value(out.nodes).data().iter().all(|x| x.is_finite()));
}

fn naive_attention(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = q[0].len() as f64;
    q.iter()
        .map(|qi| {
            let scores: Vec<f64> = k.iter().map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / d.sqrt()).collect();
            let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ex: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
            let z: f64 = ex.iter().sum();
            (0..v[0].len()).map(|c| ex.iter().zip(v).map(|(e, vj)| e / z * vj[c]).sum()).collect()
        })
        .collect()
}

fn matvec_rows(x: &Tensor, w: &Tensor) -> Vec<Vec<f64>> {
    let (n, din) = (x.shape()[0], x.shape()[1]);
    let dout = w.shape()[1];
    (0..n).map(|i| (0..dout).map(|o| (0..din).map(|c| x.data()[i * din + c] * w.data()[c * dout + o]).sum()).collect()).collect()
}

#[test]
fn pair_attention_without_bias_is_scaled_dot_product() {
    let (n, w, pw) = (5, 4, 3);
    let mut r = rng(3);
    let mut store = ParamStore::new();
    let layer = PairBiasAttention::new(&mut store, "attn", w, pw, 1, &mut r);
    store.get_mut(layer.bias.weight).data_mut().fill(0.0);
    let s = randn(&[n, w], &mut r);
    let mut sess = Session::new(&store, Graph::new());
    let sv = sess.graph.constant(s.clone());
    let pv = sess.graph.constant(randn(&[n * n, pw], &mut r));
    let out = layer.forward(&mut sess, sv, pv, &vec![true; n * n]).unwrap();

    let q = matvec_rows(&s, store.get(layer.query.weight));
    let kv = matvec_rows(&s, store.get(layer.key_value.weight));
    let k: Vec<Vec<f64>> = kv.iter().map(|row| row[..w].to_vec()).collect();
    let v: Vec<Vec<f64>> = kv.iter().map(|row| row[w..].to_vec()).collect();
    let o = naive_attention(&q, &k, &v);
    let gate_w = store.get(layer.gate.weight);
    let gate_b = store.get(layer.gate.bias.unwrap());
    let g = matvec_rows(&s, gate_w);
    let gated: Vec<f64> = (0..n * w)
        .map(|x| 1.0 / (1.0 + (-(g[x / w][x % w] + gate_b.data()[x % w])).exp()) * o[x / w][x % w])
        .collect();
    let expect = matvec_rows(&Tensor::new(vec![n, w], gated).unwrap(), store.get(layer.out.weight));
    for (i, row) in expect.iter().enumerate() {
        for (c, e) in row.iter().enumerate() {
            assert!((sess.graph.value(out.nodes).data()[i * w + c] - e).abs() < 1e-12);
        }
    }
}

#[test]
fn pair_attention_rows_and_masks() {
    let (n, w, pw, h) = (4, 8, 3, 2);
    let mut r = rng(4);
    let mut store = ParamStore::new();
    let layer = PairBiasAttention::new(&mut store, "attn", w, pw, h, &mut r);
    let mut allow = vec![true; n * n];
    allow[1] = false;
    allow[3] = false;
    for j in 0..n {
        allow[2 * n + j] = false;
    }
    let mut sess = Session::new(&store, Graph::new());
    let sv = sess.graph.constant(randn(&[n, w], &mut r));
    let pv = sess.graph.constant(randn(&[n * n, pw], &mut r));
    let out = layer.forward(&mut sess, sv, pv, &allow).unwrap();
    let a = sess.graph.value(out.attention).data();
    for hh in 0..h {
        for i in 0..n {
            let row = &a[(hh * n + i) * n..(hh * n + i + 1) * n];
            let sum: f64 = row.iter().sum();
            if i == 2 {
                assert_eq!(sum, 0.0);
            } else {
                assert!((sum - 1.0).abs() < 1e-12);
            }
            for j in 0..n {
                if !allow[i * n + j] {
                    assert_eq!(row[j], 0.0);
                }
            }
        }
    }
    let o = sess.graph.value(out.nodes).data();
    assert!(o[2 * w..3 * w].iter().all(|&x| x == 0.0), "fully masked row yields zero");
}

#[test]
fn pair_attention_gradients() {
    let (n, w, pw) = (4, 6, 3);
    for seed in SEEDS {
        let mut r = rng(seed);
        let mut store = ParamStore::new();
        let layer = PairBiasAttention::new(&mut store, "attn", w, pw, 2, &mut r);
        let allow: Vec<bool> = (0..n * n).map(|x| x % n <= x / n).collect();
        let s = randn(&[n, w], &mut r);
        let p = randn(&[n * n, pw], &mut r);
        let err = grad_check_params(&store, &[s, p], None, |sess, v| {
            let out = layer.forward(sess, v[0], v[1], &allow).unwrap().nodes;
            probe(&mut sess.graph, out, seed)
        });
        assert!(err < TOL, "seed {seed}: {err:e}");
    }
}

struct EgatFixture {
    x: Vec<Vec3>,
    y: Vec<Vec3>,
    nb: PaddedNeighbors,
    q: Tensor,
    k: Tensor,
    e: Tensor,
}

fn egat_fixture(seed: u64, w: usize, ew: usize) -> EgatFixture {
    let mut r = rng(seed);
    let x: Vec<Vec3> = (0..4).map(|_| Vec3::from_fn(|_, _| rand::Rng::random_range(&mut r, -5.0..5.0))).collect();
    let y: Vec<Vec3> = (0..7).map(|_| Vec3::from_fn(|_, _| rand::Rng::random_range(&mut r, -5.0..5.0))).collect();
    let edges = vec![(0, 1), (0, 2), (0, 6), (1, 0), (2, 3), (2, 4), (2, 5), (2, 1)];
    let (nb, _) = PaddedNeighbors::from_edges(4, &edges);
    let q = randn(&[4, w], &mut r);
    let k = randn(&[7, w], &mut r);
    let e = randn(&[4 * nb.width, ew], &mut r);
    EgatFixture { x, y, nb, q, k, e }
}

#[test]
fn egat_gradients() {
    let (w, ew) = (6, 3);
    for seed in SEEDS {
        let f = egat_fixture(seed, w, ew);
        let mut store = ParamStore::new();
        let layer = EgatLayer::new(&mut store, "egat", w, ew, 2, 0.2, &mut rng(seed + 100));
        let d2 = f.nb.squared_distances(&f.x, &f.y, 5.0);
        let err = grad_check_params(&store, &[f.q.clone(), f.k.clone(), d2, f.e.clone()], None, |sess, v| {
            let out = layer.forward(sess, v[0], v[1], v[2], v[3], &f.nb).unwrap();
            probe(&mut sess.graph, out, seed)
        });
        assert!(err < TOL, "seed {seed}: {err:e}");
    }
}

#[test]
fn egat_rigid_invariance_and_empty_rows() {
    let (w, ew) = (8, 3);
    let f = egat_fixture(5, w, ew);
    let mut store = ParamStore::new();
    let layer = EgatLayer::new(&mut store, "egat", w, ew, 2, 0.2, &mut rng(6));
    let run = |x: &[Vec3], y: &[Vec3]| {
        let mut sess = Session::new(&store, Graph::new());
        let q = sess.graph.constant(f.q.clone());
        let k = sess.graph.constant(f.k.clone());
        let d2 = sess.graph.constant(f.nb.squared_distances(x, y, 5.0));
        let e = sess.graph.constant(f.e.clone());
        let (out, att) = layer.forward_with_attention(&mut sess, q, k, d2, e, &f.nb).unwrap();
        (sess.graph.value(out).clone(), sess.graph.value(att).clone())
    };
    let (base, att) = run(&f.x, &f.y);
    let m = RigidMotion::random(&mut rng(7), 20.0);
    let xt: Vec<Vec3> = f.x.iter().map(|p| m.apply(p)).collect();
    let yt: Vec<Vec3> = f.y.iter().map(|p| m.apply(p)).collect();
    let (moved, _) = run(&xt, &yt);
    for (a, b) in base.data().iter().zip(moved.data()) {
        assert!((a - b).abs() < 1e-9);
    }
    // query 3 has no edges: its attention row is zero
    let wd = f.nb.width;
    assert!(att.data()[3 * wd * 2..4 * wd * 2].iter().all(|&a| a == 0.0));
}

#[test]
fn egat_splits_evenly_between_identical_equidistant_keys() {
    let w = 4;
    let mut store = ParamStore::new();
    let layer = EgatLayer::new(&mut store, "egat", w, 1, 2, 0.2, &mut rng(8));
    let x = vec![Vec3::zeros()];
    let y = vec![Vec3::new(3.0, 0.0, 0.0), Vec3::new(0.0, -3.0, 0.0)];
    let (nb, _) = PaddedNeighbors::from_edges(1, &[(0, 0), (0, 1)]);
    let mut sess = Session::new(&store, Graph::new());
    let q = sess.graph.constant(randn(&[1, w], &mut rng(9)));
    let krow = randn(&[1, w], &mut rng(10));
    let k = sess.graph.constant(Tensor::new(vec![2, w], [krow.data(), krow.data()].concat()).unwrap());
    let d2 = sess.graph.constant(nb.squared_distances(&x, &y, 1.0));
    let e = sess.graph.constant(Tensor::zeros(&[2, 1]));
    let (_, att) = layer.forward_with_attention(&mut sess, q, k, d2, e, &nb).unwrap();
    for &a in sess.graph.value(att).data() {
        assert!((a - 0.5).abs() < 1e-15);
    }
}

fn caconv_setup(seed: u64, hidden: usize) -> (bindkit::featurize::GlinterGraphs, ParamStore, CaConv) {
    let s = synth::random_monomer(&mut rng(seed), "T", 6);
    let graphs = build_glinter_graphs(&s, 7.0, 5.0, &GlinterInputs::default()).unwrap();
    let mut store = ParamStore::new();
    let conv = CaConv::for_graph(&mut store, "conv", &graphs.atom, hidden, &mut rng(seed + 1));
    (graphs, store, conv)
}

#[test]
fn caconv_gradients() {
    for seed in SEEDS {
        let (graphs, store, conv) = caconv_setup(seed, 6);
        let g = &graphs.atom;
        let src = Tensor::new(vec![g.n_sources, g.source_width], g.source_feats.clone()).unwrap();
        let tgt = Tensor::new(vec![g.n_targets, g.target_width], g.target_feats.clone()).unwrap();
        let err = grad_check_params(&store, &[], Some(40), |sess, _| {
            let sv = sess.graph.constant(src.clone());
            let tv = sess.graph.constant(tgt.clone());
            let out = conv.forward(sess, g, sv, tv).unwrap().nodes;
            probe(&mut sess.graph, out, seed)
        });
        assert!(err < TOL, "seed {seed}: {err:e}");
    }
}

fn run_conv(store: &ParamStore, conv: &CaConv, g: &GlinterGraph) -> (Tensor, Vec<bool>) {
    let mut sess = Session::new(store, Graph::new());
    let sv = sess.graph.constant(Tensor::new(vec![g.n_sources, g.source_width], g.source_feats.clone()).unwrap());
    let tv = sess.graph.constant(Tensor::new(vec![g.n_targets, g.target_width], g.target_feats.clone()).unwrap());
    let out = conv.forward(&mut sess, g, sv, tv).unwrap();
    (sess.graph.value(out.nodes).clone(), out.skipped)
}

#[test]
fn caconv_rigid_invariance() {
    let s = synth::random_monomer(&mut rng(20), "T", 12);
    let moved = s.transformed(&RigidMotion::random(&mut rng(21), 30.0));
    let a = build_glinter_graphs(&s, 8.0, 6.0, &GlinterInputs::default()).unwrap();
    let b = build_glinter_graphs(&moved, 8.0, 6.0, &GlinterInputs::default()).unwrap();
    for (ga, gb) in [(&a.residue, &b.residue), (&a.atom, &b.atom)] {
        let mut store = ParamStore::new();
        let conv = CaConv::for_graph(&mut store, "c", ga, 16, &mut rng(22));
        let (oa, _) = run_conv(&store, &conv, ga);
        let (ob, _) = run_conv(&store, &conv, gb);
        for (x, y) in oa.data().iter().zip(ob.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

/// One source at the origin with an identity frame and `n` targets.
fn star_graph(n: usize, frame: bool) -> GlinterGraph {
    let targets: Vec<Vec3> = (0..n).map(|i| Vec3::new(1.0 + i as f64, 0.5 * i as f64, -0.25)).collect();
    GlinterGraph {
        n_sources: 1,
        source_width: 2,
        source_feats: vec![0.3, -0.7],
        source_pos: vec![Vec3::zeros()],
        source_frames: vec![frame.then(|| LocalFrame { origin: Vec3::zeros(), rotation: Mat3::identity() })],
        n_targets: n,
        target_width: 2,
        target_feats: (0..2 * n).map(|i| (i as f64 * 0.37).sin()).collect(),
        target_pos: targets,
        edges: (0..n).map(|v| (0, v)).collect(),
        edge_width: 1,
        edge_feats: (0..n).map(|v| v as f64 * 0.1).collect(),
    }
}

#[test]
fn caconv_single_neighbour_passes_its_message() {
    let g = star_graph(1, true);
    let mut store = ParamStore::new();
    let conv = CaConv::for_graph(&mut store, "c", &g, 5, &mut rng(30));
    let (out, skipped) = run_conv(&store, &conv, &g);
    assert_eq!(skipped, vec![false]);
    // oracle: node(relu(message([x_q, x_v, e, p])))
    let input = Tensor::new(vec![1, 8], vec![0.3, -0.7, g.target_feats[0], g.target_feats[1], 0.0, 1.0, 0.0, -0.25]).unwrap();
    let mut sess = Session::new(&store, Graph::new());
    let x = sess.graph.constant(input);
    let m = conv.message.forward(&mut sess, x).unwrap();
    let m = sess.graph.relu(m);
    let o = conv.node.forward(&mut sess, m).unwrap();
    let o = sess.graph.relu(o);
    assert_eq!(sess.graph.value(o), &out);
}

#[test]
fn caconv_max_pool_gradient_hits_argmax_only() {
    let g = star_graph(4, true);
    let mut store = ParamStore::new();
    let conv = CaConv::for_graph(&mut store, "c", &g, 1, &mut rng(31));
    store.get_mut(conv.message.bias.unwrap()).data_mut()[0] = 10.0;
    store.get_mut(conv.node.bias.unwrap()).data_mut()[0] = 10.0;
    let src = Tensor::new(vec![1, 2], g.source_feats.clone()).unwrap();
    let tgt = Tensor::new(vec![4, 2], g.target_feats.clone()).unwrap();
    let mut sess = Session::new(&store, Graph::new());
    let sv = sess.graph.constant(src.clone());
    let tv = sess.graph.leaf(tgt.clone(), true);
    let out = conv.forward(&mut sess, &g, sv, tv).unwrap().nodes;
    let loss = sess.graph.sum_all(out);
    sess.graph.backward(loss).unwrap();
    let grad = sess.graph.grad(tv).unwrap();
    let rows_hit: Vec<usize> = (0..4).filter(|&r| grad.data()[r * 2..r * 2 + 2].iter().any(|&x| x != 0.0)).collect();
    assert_eq!(rows_hit.len(), 1, "exactly one neighbour receives gradient");
    let err = common::grad_check(&[tgt], |gr, v| {
        let mut s2 = Session::new(&store, std::mem::take(gr));
        let sv = s2.graph.constant(src.clone());
        let out = conv.forward(&mut s2, &g, sv, v[0]).unwrap().nodes;
        let l = s2.graph.sum_all(out);
        *gr = s2.graph;
        l
    });
    assert!(err < TOL, "{err:e}");
}

#[test]
fn caconv_skips_sources_without_frames() {
    let g = star_graph(3, false);
    let mut store = ParamStore::new();
    let conv = CaConv::for_graph(&mut store, "c", &g, 4, &mut rng(32));
    let (out, skipped) = run_conv(&store, &conv, &g);
    assert_eq!(skipped, vec![true]);
    assert!(out.data().iter().all(|&x| x == 0.0));
}
