// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use easic::attacks::*;
use easic::corpus;
use easic::netlist::{parse_blif, Cell, LutMask, Netlist};
use easic::obfuscate::{run_obfuscation, ObfuscationConfig};
use easic::sim::EquivalencePolicy;
use easic::Library;
use proptest::prelude::*;

fn hist(freqs: &[(u64, usize)]) -> PatternHistogram {
    let masks = freqs.iter().flat_map(|&(p, f)| std::iter::repeat_n(LutMask::new(6, p).unwrap(), f));
    PatternHistogram::from_masks("h", Scope::Whole, masks)
}

fn three_luts() -> Netlist {
    parse_blif(
        ".model t\n.inputs a b c\n.outputs x y z\n.names a b x\n11 1\n.names b c y\n11 1\n.names a c z\n1- 1\n-1 1\n.end\n",
    )
    .unwrap()
}

#[test]
fn histogram_counts_and_orders() {
    let h = pattern_histogram(&three_luts(), Scope::Whole, None).unwrap();
    let and = LutMask::new(2, 0x8).unwrap().lift_to_6();
    let or = LutMask::new(2, 0xE).unwrap().lift_to_6();
    let got: Vec<(usize, u64, usize)> = h.entries.iter().map(|e| (e.id, e.pattern, e.freq)).collect();
    assert_eq!(got, [(1, and, 2), (2, or, 1)]);
    assert_eq!(h.total(), 3);
    let back = PatternHistogram::from_json(&h.to_json()).unwrap();
    assert_eq!(back, h);
}

#[test]
fn frequency_ties_by_ascending_pattern() {
    let h = hist(&[(9, 2), (3, 2), (5, 1)]);
    let order: Vec<u64> = h.entries.iter().map(|e| e.pattern).collect();
    assert_eq!(order, [3, 9, 5]);
}

#[test]
fn static_scope_needs_trace() {
    let n = corpus::alu4();
    let r = run_obfuscation(&n, ObfuscationConfig::new(50.0), &Library::default_library()).unwrap();
    assert!(matches!(pattern_histogram(&r.netlist, Scope::Static, None), Err(AttackError::ScopeUnavailable(_))));
    let st = PatternHistogram::from_result(&r, Scope::Static);
    let re = PatternHistogram::from_result(&r, Scope::Reconfigurable);
    let whole = PatternHistogram::from_result(&r, Scope::Whole);
    assert_eq!(st.total(), r.l_st.len());
    assert_eq!(re.total(), r.l_re.len());
    assert_eq!(whole, PatternHistogram { obf_percent: Some(50.0), ..pattern_histogram(&n, Scope::Whole, None).unwrap() });
}

#[test]
fn fully_obfuscated_static_histogram_is_empty() {
    let n = corpus::cmp8();
    let r = run_obfuscation(&n, ObfuscationConfig::new(100.0), &Library::default_library()).unwrap();
    assert!(PatternHistogram::from_result(&r, Scope::Static).is_empty());
}

#[test]
fn union_settles() {
    let hs: Vec<PatternHistogram> =
        corpus::corpus().iter().map(|n| pattern_histogram(n, Scope::Whole, None).unwrap()).collect();
    let single = corpus_union(&hs[..1]);
    assert_eq!(single.m(), hs[0].entries.len());
    let twice = corpus_union([&hs[0], &hs[0]]);
    assert_eq!(twice.m(), single.m());
    assert_eq!(twice.curve[1].new_patterns, 0);
    let u = corpus_union(&hs);
    assert!(u.curve.windows(2).all(|w| w[1].total >= w[0].total));
    assert!(u.m() <= hs.iter().map(|h| h.entries.len()).sum());
    assert!(u.curve.last().unwrap().new_patterns < u.curve[0].new_patterns);
}

#[test]
fn trendline_exact_fits() {
    let flat = hist(&[(1, 4), (2, 4), (3, 4)]);
    let t = fit_trendline::<f64>(&flat, 0).unwrap();
    assert!(t.max_abs_residual < 1e-9);
    assert!((t.coeffs[0] - 4.0).abs() < 1e-9);
    // 7, 5, 3, 1 lies on 9 - 2x.
    let line = hist(&[(1, 7), (2, 5), (3, 3), (4, 1)]);
    let t = fit_trendline::<f64>(&line, 1).unwrap();
    assert!(t.max_abs_residual < 1e-9);
    assert!((t.eval(5.0) + 1.0).abs() < 1e-9);
    assert!(matches!(fit_trendline::<f64>(&line, 4), Err(AttackError::Underdetermined { .. })));
    let t32 = fit_trendline::<f32>(&line, 1).unwrap();
    assert!(t32.max_abs_residual < 1e-3);
}

#[test]
fn riscv_outliers_defeat_a_cubic() {
    let h = pattern_histogram(&corpus::riscv_like(), Scope::Whole, None).unwrap();
    assert_eq!(h.entries.iter().filter(|e| e.freq > 100).count(), 3);
    let t = fit_trendline::<f64>(&h, 3).unwrap();
    assert!(t.max_abs_residual > 100.0, "max residual {}", t.max_abs_residual);
    assert!(t.worst_id <= 3);
}

fn reference_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

#[test]
fn pearson_examples() {
    let a = hist(&[(1, 5), (2, 3), (3, 1)]);
    assert!((correlate(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    let doubled = hist(&[(1, 10), (2, 6), (3, 2)]);
    assert!((correlate(&a, &doubled).unwrap() - 1.0).abs() < 1e-12);
    let b = hist(&[(7, 4), (8, 2), (9, 1)]);
    let r = correlate(&a, &b).unwrap();
    let oracle = reference_pearson(&[5.0, 3.0, 1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 4.0, 2.0, 1.0]);
    assert!((r - oracle).abs() < 1e-12);
    assert!(r < 0.0);
    assert_eq!(correlate(&hist(&[(1, 2)]), &hist(&[(1, 3)])), None);
}

proptest! {
    #[test]
    fn pearson_properties(fa in proptest::collection::vec(1usize..50, 2..12), fb in proptest::collection::vec(1usize..50, 2..12), k in 2usize..5) {
        let a = hist(&fa.iter().enumerate().map(|(i, &f)| (i as u64, f)).collect::<Vec<_>>());
        let b = hist(&fb.iter().enumerate().map(|(i, &f)| (i as u64 + 3, f)).collect::<Vec<_>>());
        let scaled = hist(&fa.iter().enumerate().map(|(i, &f)| (i as u64, f * k)).collect::<Vec<_>>());
        if let Some(r) = correlate(&a, &b) {
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert!((r - correlate(&b, &a).unwrap()).abs() < 1e-12);
        }
        if let Some(r) = correlate(&a, &a) {
            prop_assert!((r - 1.0).abs() < 1e-12);
            prop_assert!((correlate(&a, &scaled).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_conservation(masks in proptest::collection::vec((1u8..=6, any::<u64>()), 0..40)) {
        let ms: Vec<LutMask> = masks.iter().map(|&(w, b)| LutMask::new(w, b & LutMask::full(w)).unwrap()).collect();
        let h = PatternHistogram::from_masks("p", Scope::Whole, ms.iter().copied());
        prop_assert_eq!(h.total(), ms.len());
        prop_assert!(h.entries.iter().enumerate().all(|(k, e)| e.id == k + 1 && e.freq >= 1));
        prop_assert!(h.entries.windows(2).all(|w| w[0].freq >= w[1].freq));
        prop_assert_eq!(h.patterns().len(), h.entries.len());
    }
}

fn corpus_hists() -> Vec<PatternHistogram> {
    corpus::corpus().iter().map(|n| pattern_histogram(n, Scope::Whole, None).unwrap()).collect()
}

#[test]
fn composition_extremes() {
    let lib = Library::default_library();
    let db = corpus_hists();
    let n = corpus::sha_round();
    let r = run_obfuscation(&n, ObfuscationConfig::new(0.0), &lib).unwrap();
    let rep = composition_attack(&PatternHistogram::from_result(&r, Scope::Static), &db, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(rep.top().unwrap().0, "sha_round");
    assert!((rep.top().unwrap().1 - 1.0).abs() < 1e-12);
    assert_eq!(rep.classification, Classification::SelfCorrelation);

    let r = run_obfuscation(&n, ObfuscationConfig::new(100.0), &lib).unwrap();
    let rep = composition_attack(&PatternHistogram::from_result(&r, Scope::Static), &db, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(rep.classification, Classification::NoCorrelation);
    assert!(rep.warning.is_some());
    assert!(matches!(composition_attack(&db[0], &db[..1], 0.75), Err(AttackError::CorpusTooSmall(1))));
}

#[test]
fn search_space_chain() {
    let lib = Library::default_library();
    let n = corpus::riscv_like();
    let r = run_obfuscation(&n, ObfuscationConfig::new(80.0), &lib).unwrap();
    let bare = search_space_report(&r, None, None);
    assert_eq!(bare.l1, 1u128 << 64);
    assert_eq!((bare.l2, bare.l3, bare.l4), (None, None, None));
    assert_eq!(bare.key_bits, r.netlist.reconfigurable_luts().map(|c| 1usize << c.lut_mask().unwrap().width()).sum::<usize>());
    let db = corpus_hists();
    let u = corpus_union(&db);
    let matched = &db[0];
    let rep = search_space_report(&r, Some(&u), Some(matched));
    assert_eq!(rep.l2, Some(u.m() as u128));
    assert_eq!(rep.l3, Some(matched.entries.len() as u128));
    let (l2, l3, l4) = (rep.l2.unwrap(), rep.l3.unwrap(), rep.l4.unwrap());
    assert!(l4 <= l3 && l3 <= l2 && l2 <= rep.l1);
}

#[test]
fn brute_force_toys() {
    let p = EquivalencePolicy::default();
    let mut one = Netlist::new("inv");
    one.add_input("a");
    one.add_cell(Cell::lut("y", vec!["a".into()], LutMask::new(1, 0b01).unwrap())).unwrap();
    one.add_output("y");
    let out = brute_force_key(&one, &one, DEFAULT_MAX_KEY_BITS, p).unwrap();
    assert_eq!(out.key.bits, [true, false]);
    assert_eq!(out.trials, 2);

    let two = parse_blif(".model t\n.inputs a b\n.outputs x y\n.names a b x\n11 1\n.names a b y\n01 1\n10 1\n.end\n").unwrap();
    let out = brute_force_key(&two, &two, DEFAULT_MAX_KEY_BITS, p).unwrap();
    assert!(out.trials <= 256);
    assert_eq!(out.key.total_len(), 8);

    let big = corpus::alu4();
    assert!(matches!(brute_force_key(&big, &big, 20, p), Err(AttackError::KeyTooLarge { allowed: 20, .. })));
}

#[test]
fn brute_force_returns_an_equivalent_key() {
    // Two LUTs in series: only the composition is observable.
    let n = parse_blif(".model s\n.inputs a\n.outputs y\n.names a m\n0 1\n.names m y\n0 1\n.end\n").unwrap();
    let out = brute_force_key(&n, &n, 8, EquivalencePolicy::default()).unwrap();
    let _: BTreeMap<_, _> = out.key.masks().unwrap().into_iter().collect();
    assert!(out.trials <= 16);
}
