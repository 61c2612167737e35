// SPDX-License-Identifier: Apache-2.0

use easic::bitstream::{program, serialize, ConfigState};
use easic::corpus::{self, design};
use easic::netlist::{parse_blif, stats, Netlist};
use easic::obfuscate::{gen_case_constraints, run_obfuscation, static_target, sweep, ObfuscationConfig};
use easic::sim::{check_compiled, EquivalencePolicy, Simulator};
use easic::timing::{build_and_time, TimingOptions};
use easic::{ExactLibrary, Library, Rational};

fn lib() -> Library {
    Library::default_library()
}

fn programmed(n: &Netlist) -> Simulator {
    let bs = serialize(n);
    let st = program(ConfigState::blank(n), &bs).unwrap();
    Simulator::programmed(n, &st).unwrap()
}

#[test]
fn table_rounding() {
    let got: Vec<usize> = [98.0, 95.0, 92.0, 89.0, 86.0].iter().map(|&p| static_target(29, p)).collect();
    assert_eq!(got, [0, 1, 2, 3, 4]);
    assert_eq!(static_target(0, 50.0), 0);
    assert_eq!(static_target(10, 0.0), 10);
}

#[test]
fn full_and_zero_obfuscation() {
    let n = corpus::alu4();
    let total = stats(&n).total_luts();
    let r = run_obfuscation(&n, ObfuscationConfig::new(100.0), &lib()).unwrap();
    assert!(r.l_st.is_empty());
    assert_eq!(r.netlist, n);
    let r = run_obfuscation(&n, ObfuscationConfig::new(0.0), &lib()).unwrap();
    assert!(r.l_re.is_empty());
    assert_eq!(r.l_st.len(), total);
    assert_eq!(stats(&r.netlist).total_lut_re(), 0);
    assert_eq!(r.area.area_re, 0.0);
}

#[test]
fn slowest_lut_on_chain_goes_first() {
    let n = parse_blif(
        ".model c\n.inputs a b c d e f g h i\n.outputs z\n\
         .names a b c d e f x\n111111 1\n\
         .names x g h i y\n1111 1\n\
         .names y a z\n11 1\n.end\n",
    )
    .unwrap();
    let r = run_obfuscation(&n, ObfuscationConfig { obf_percent: 66.0, seed: 0 }, &lib()).unwrap();
    assert_eq!(r.l_st, ["x"]);
    assert_eq!(r.trace[0].endpoint.as_deref(), Some("z"));
    assert!(r.trace[0].cp_after < r.trace[0].cp_before);
}

#[test]
fn sbm_rows() {
    let n = corpus::sbm();
    for (p, st) in [(98.0, 0), (95.0, 1), (92.0, 2), (89.0, 3), (86.0, 4)] {
        let r = run_obfuscation(&n, ObfuscationConfig::new(p), &lib()).unwrap();
        let s = stats(&r.netlist);
        assert_eq!((s.total_lut_re(), s.lut_st_origin), (29 - st, st), "level {p}");
        assert_eq!(r.trace.len(), st);
    }
}

#[test]
fn partition_and_equivalence_on_corpus() {
    for d in corpus::DESIGNS {
        let n = design(d).unwrap();
        let golden = Simulator::new(&n).unwrap();
        let luts: std::collections::BTreeSet<String> = n.luts().map(|c| c.id().to_string()).collect();
        for p in [0.0, 25.0, 50.0, 75.0, 86.0, 92.0, 100.0] {
            let r = run_obfuscation(&n, ObfuscationConfig::new(p), &lib()).unwrap();
            let mut all: std::collections::BTreeSet<String> = r.l_st.iter().cloned().collect();
            assert_eq!(all.len(), r.l_st.len());
            assert!(r.l_re.iter().all(|id| all.insert(id.clone())), "{d}: l_st and l_re overlap");
            assert_eq!(all, luts);
            assert_eq!(r.l_st.len(), static_target(luts.len(), p));
            assert_eq!(r.netlist.reconfigurable_luts().count(), r.l_re.len());
            let rep = check_compiled(&golden, &programmed(&r.netlist), EquivalencePolicy::default()).unwrap();
            assert!(rep.equivalent(), "{d} at {p}%: {:?}", rep.counterexample);
        }
    }
}

#[test]
fn sweep_trends_are_monotone() {
    let levels = [100.0, 98.0, 95.0, 92.0, 89.0, 86.0];
    for n in corpus::corpus() {
        let rows = sweep(&n, &levels, &lib()).unwrap();
        for w in rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!(b.cp <= a.cp && b.sum_cp <= a.sum_cp, "{}: timing rose {a:?} -> {b:?}", n.name);
            assert!(b.area_re <= a.area_re && b.area_st >= a.area_st, "{}: area {a:?} -> {b:?}", n.name);
        }
    }
}

#[test]
fn exact_scalar_agrees_with_engine_graph() {
    // With rationals, timing the expanded netlist reproduces the engine's
    // own incremental timing exactly.
    let exact = ExactLibrary::default_library();
    for d in ["sbm", "alu4", "counter"] {
        let n = design(d).unwrap();
        let r = run_obfuscation(&n, ObfuscationConfig::new(50.0), &exact).unwrap();
        let again = build_and_time(&r.netlist, &exact, TimingOptions::default()).unwrap().report();
        assert_eq!(again.cp, r.timing.cp);
        let last = r.trace.last().unwrap();
        let cp: Rational = r.timing.cp;
        assert!((last.cp_after - (*cp.numer() as f64 / *cp.denom() as f64)).abs() < 1e-12);
    }
}

#[test]
fn deterministic_runs() {
    let n = corpus::sha_round();
    let a = run_obfuscation(&n, ObfuscationConfig::new(60.0), &lib()).unwrap();
    let b = run_obfuscation(&n, ObfuscationConfig::new(60.0), &lib()).unwrap();
    assert_eq!(a.netlist, b.netlist);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn case_constraints() {
    let n = parse_blif(".model t\n.inputs a b c\n.outputs y z\n.names a b y\n01 1\n11 1\n.names a c z\n11 1\n.end\n").unwrap();
    let cs = gen_case_constraints(&n);
    // y = in1 (b); a is free
    assert_eq!(cs.len(), 1);
    assert_eq!((cs[0].lut_id.as_str(), cs[0].pin, cs[0].constant), ("y", 0, 0));
}
