mod common;

use bindkit::decoder::sequence_log_probs;
use bindkit::model::{ComplexInputs, DecodingOrder, ModelConfig, RedNet};
use bindkit::scoring::{
    kendall_tau_b, ndcg, rank_metrics, score_design, score_sequence, score_tables, spearman, Gain, LogProbTable,
    NdcgConfig, ScoreError, ScoreInputs,
};
use common::toy_complex;
use proptest::prelude::*;

/// Binder of `n` positions over a 3-letter alphabet with explicit tables.
fn tables(bound: Vec<Vec<f64>>, unbound: Vec<Vec<f64>>) -> (LogProbTable, LogProbTable) {
    (LogProbTable::full(bound), LogProbTable::full(unbound))
}

fn inputs<'a>(
    designed: &'a [usize],
    wildtype: &'a [usize],
    bound: &'a LogProbTable,
    unbound: &'a LogProbTable,
) -> ScoreInputs<'a> {
    ScoreInputs { designed, wildtype, bound, unbound, complex_tokens: designed, complex: bound }
}

#[test]
fn single_mutation_hand_values() {
    // position 1 mutated from token 0 to token 2
    let (b, u) = tables(
        vec![vec![-0.5, -1.5, -2.5], vec![-2.0, -4.0, -1.0]],
        vec![vec![-0.7, -1.0, -3.0], vec![-1.0, -5.0, -3.0]],
    );
    let r = score_sequence(&inputs(&[1, 2], &[1, 0], &b, &u)).unwrap();
    assert_eq!(r.n_mutated, 1);
    assert_eq!(r.ll_ref, Some(1.0));
    assert_eq!(r.ll_cd_ref, Some(3.0));
    assert_eq!(r.ll_mt, Some(-1.0));
    assert!((r.ll - (-1.5 + -1.0) / 2.0).abs() < 1e-15);
    assert!((r.ll_cd - ((-1.5 + -1.0) / 2.0 - (-1.0 + -3.0) / 2.0)).abs() < 1e-15);
    assert_eq!((r.n_binder, r.n_complex), (2, 2));
}

#[test]
fn wildtype_has_no_mutation_metrics() {
    let (b, u) = tables(vec![vec![-1.0, -2.0]; 3], vec![vec![-1.5, -0.5]; 3]);
    let r = score_sequence(&inputs(&[0, 1, 0], &[0, 1, 0], &b, &u)).unwrap();
    assert_eq!(r.n_mutated, 0);
    assert_eq!((r.ll_mt, r.ll_ref, r.ll_cd_ref), (None, Some(0.0), None));
}

#[test]
fn uniform_model_has_zero_contrast() {
    let row = vec![-(20f64).ln(); 20];
    let (b, u) = tables(vec![row.clone(); 4], vec![row; 4]);
    let r = score_sequence(&inputs(&[0, 5, 7, 19], &[0, 1, 7, 2], &b, &u)).unwrap();
    assert_eq!(r.ll_cd, 0.0);
    assert_eq!(r.ll_cd_ref, Some(0.0));
    assert!((r.ll + (20f64).ln()).abs() < 1e-15);
}

#[test]
fn contract_errors() {
    let (b, u) = tables(vec![vec![-1.0, -2.0]; 2], vec![vec![-1.0, -2.0]; 2]);
    assert!(matches!(score_sequence(&inputs(&[0, 1], &[0], &b, &u)), Err(ScoreError::Length { .. })));
    let holey = LogProbTable::new(vec![Some(vec![-1.0, -2.0]), None]);
    match score_sequence(&inputs(&[0, 1], &[0, 1], &holey, &u)) {
        Err(ScoreError::MissingRow { table: "bound", position: 1 }) => {}
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(score_sequence(&inputs(&[0, 3], &[0, 1], &b, &u)), Err(ScoreError::Token { position: 1, token: 3 })));
}

fn table_strategy(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-6.0f64..0.0, 5), n)
}

proptest! {
    #[test]
    fn constant_shift_telescopes(
        bound in table_strategy(6), unbound in table_strategy(6),
        designed in prop::collection::vec(0usize..5, 6), wildtype in prop::collection::vec(0usize..5, 6),
        c in -3.0f64..3.0,
    ) {
        let (b, u) = tables(bound, unbound);
        let base = score_sequence(&inputs(&designed, &wildtype, &b, &u)).unwrap();
        let (bs, us) = (b.shifted(c), u.shifted(c));
        let moved = score_sequence(&inputs(&designed, &wildtype, &bs, &us)).unwrap();
        prop_assert!((moved.ll - base.ll - c).abs() < 1e-12);
        prop_assert!((moved.ll_cd - base.ll_cd).abs() < 1e-12);
        match (moved.ll_cd_ref, base.ll_cd_ref) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (None, None) => {}
            _ => prop_assert!(false),
        }
    }

    #[test]
    fn all_mutated_mt_equals_ll(bound in table_strategy(5), unbound in table_strategy(5),
                                designed in prop::collection::vec(0usize..5, 5)) {
        let (b, u) = tables(bound, unbound);
        let wildtype: Vec<usize> = designed.iter().map(|&a| (a + 1) % 5).collect();
        let r = score_sequence(&inputs(&designed, &wildtype, &b, &u)).unwrap();
        prop_assert_eq!(r.n_mutated, 5);
        prop_assert!((r.ll_mt.unwrap() - r.ll).abs() < 1e-12);
    }
}

/// `f64::signum` maps 0.0 to 1.0, so ties need their own branch.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn brute_kendall_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty, mut n0) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            n0 += 1.0;
            let s = sign(x[i] - x[j]) * sign(y[i] - y[j]);
            if x[i] == x[j] {
                tx += 1.0;
            }
            if y[i] == y[j] {
                ty += 1.0;
            }
            if s > 0.0 {
                c += 1.0;
            } else if s < 0.0 {
                d += 1.0;
            }
        }
    }
    let denom = ((n0 - tx) * (n0 - ty)).sqrt();
    (denom > 0.0).then(|| (c - d) / denom)
}

#[test]
fn rank_examples() {
    let c = NdcgConfig::default();
    let up: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
    let m = rank_metrics(&up, &c).unwrap();
    assert_eq!((m.spearman, m.kendall, m.ndcg), (Some(1.0), Some(1.0), Some(1.0)));
    let down: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, -(i as f64))).collect();
    let m = rank_metrics(&down, &c).unwrap();
    assert_eq!((m.spearman, m.kendall), (Some(-1.0), Some(-1.0)));

    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [2.0, 1.0, 4.0, 3.0, 5.0];
    // 10 pairs, 2 discordant
    assert!((kendall_tau_b(&x, &y).unwrap() - 0.6).abs() < 1e-15);
    // d = (1, 1, 1, 1, 0): 1 - 6·4 / (5·24)
    assert!((spearman(&x, &y).unwrap() - 0.8).abs() < 1e-15);

    let flat = [(1.0, 3.0), (1.0, 2.0), (1.0, 5.0)];
    let m = rank_metrics(&flat, &c).unwrap();
    assert_eq!((m.spearman, m.kendall), (None, None));
    assert!(matches!(rank_metrics(&[(1.0, 1.0)], &c), Err(ScoreError::TooFew(1))));
}

#[test]
fn ndcg_hand_value() {
    let scores = [3.0, 2.0, 1.0];
    let aff = [0.0, 1.0, 0.5];
    let g = [0.0, 1.0, 2f64.sqrt() - 1.0];
    let dcg = g[0] / 1.0 + g[1] / 3f64.log2() + g[2] / 2.0;
    let ideal = g[1] / 1.0 + g[2] / 3f64.log2();
    let got = ndcg(&scores, &aff, &NdcgConfig::default()).unwrap();
    assert!((got - dcg / ideal).abs() < 1e-15);
    let lin = ndcg(&scores, &aff, &NdcgConfig { gain: Gain::Linear, top_k: Some(1) }).unwrap();
    assert_eq!(lin, 0.0);
}

proptest! {
    #[test]
    fn kendall_matches_brute_force(pairs in prop::collection::vec((0i32..6, 0i32..6), 2..40)) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        match (kendall_tau_b(&x, &y), brute_kendall_b(&x, &y)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b),
            (None, None) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn monotone_transform_invariance(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..30)) {
        let c = NdcgConfig::default();
        let base = rank_metrics(&pairs, &c).unwrap();
        let moved: Vec<(f64, f64)> = pairs.iter().map(|&(s, a)| (s.exp() * 3.0 - 7.0, a)).collect();
        let m = rank_metrics(&moved, &c).unwrap();
        prop_assert_eq!(base, m);
    }
}

#[test]
fn model_tables_follow_index_order() {
    let (s, mask) = toy_complex(4, 9, 11);
    let cfg = ModelConfig { width: 16, heads: 2, k_neighbors: 8, atom_k_max: 12, atom_radius: 8.0, ..ModelConfig::toy() };
    let model = RedNet::new(cfg.clone(), 4).unwrap();
    let designed: Vec<usize> = (0..9).map(|i| (i * 7) % 20).collect();
    let t = score_tables(&model, &s, &mask, &designed).unwrap();

    let inp = ComplexInputs::build(&s, &mask, &cfg).unwrap();
    let order = DecodingOrder::left_to_right(&mask);
    let forced = sequence_log_probs(&model, &inp, &t.complex_tokens, &order).unwrap();
    for (k, lp) in forced.iter().enumerate() {
        let row = t.bound.rows[k].as_ref().unwrap();
        assert!((row[designed[k]] - lp).abs() < 1e-12);
        let total: f64 = row.iter().map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    assert_eq!(t.complex_tokens.len(), 20);
    assert_eq!(t.unbound.len(), 9);

    let wildtype: Vec<usize> = s.chains[0].tokens();
    let r = score_design(&model, &s, &mask, &designed, &wildtype).unwrap();
    assert_eq!(r.n_mutated, designed.iter().zip(&wildtype).filter(|(a, b)| a != b).count());
    assert!(r.ll < 0.0 && r.ll_global < 0.0);
    assert!(matches!(score_design(&model, &s, &mask, &designed[..3], &wildtype), Err(ScoreError::Length { .. })));
}
