// SPDX-License-Identifier: Apache-2.0

//! Two-valued, bit-parallel simulation and equivalence checking.
//!
//! Every net holds a `u64` word, one stimulus per lane. Combinational
//! designs are checked exhaustively up to 16 data inputs and with random
//! vectors beyond that; sequential designs run lock-step with 64 independent
//! random input streams, all starting from the flip-flop init values.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstream::{apply, ConfigState};
use crate::netlist::{CellKind, GateKind, Netlist, NetlistError};

pub const EXHAUSTIVE_MAX_INPUTS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("unprogrammed LUT {0}")]
    Unprogrammed(String),
    #[error("port mismatch: {0}")]
    PortMismatch(String),
    #[error("expected {expected} input values, got {actual}")]
    InputLength { expected: usize, actual: usize },
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

#[derive(Debug, Clone)]
enum Op {
    Lut { bits: u64, width: u8, ins: Vec<usize>, out: usize },
    Gate { kind: GateKind, ins: Vec<usize>, out: usize },
}

/// A netlist compiled to a flat, levelized op list.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    input_idx: Vec<usize>,
    output_idx: Vec<usize>,
    clock_idx: Option<usize>,
    ops: Vec<Op>,
    /// (Q net, D net, init)
    ffs: Vec<(usize, usize, bool)>,
    ff_names: Vec<String>,
    nets: usize,
}

fn lut_word(bits: u64, width: u8, ins: &[u64]) -> u64 {
    if width == 0 {
        return if bits & 1 == 1 { !0 } else { 0 };
    }
    let half = 1u32 << (width - 1);
    let lo_mask = if half == 64 { !0 } else { (1u64 << half) - 1 };
    let lo = lut_word(bits & lo_mask, width - 1, ins);
    let hi = lut_word(if half == 64 { 0 } else { bits >> half }, width - 1, ins);
    let x = ins[width as usize - 1];
    (x & hi) | (!x & lo)
}

impl Simulator {
    pub fn new(netlist: &Netlist) -> Result<Self, SimError> {
        let order = netlist.comb_order()?;
        let mut index: HashMap<&str, usize> = HashMap::new();
        for net in netlist.nets() {
            let k = index.len();
            index.insert(net, k);
        }
        let ops = order
            .iter()
            .map(|c| {
                let ins: Vec<usize> = c.inputs.iter().map(|n| index[n.as_str()]).collect();
                let out = index[c.id()];
                match c.kind {
                    CellKind::Lut(m) => Op::Lut { bits: m.bits(), width: m.width(), ins, out },
                    CellKind::Gate(kind) => Op::Gate { kind, ins, out },
                    CellKind::Ff { .. } => unreachable!("flip-flops are not in the combinational order"),
                }
            })
            .collect();
        let mut ffs = Vec::new();
        let mut ff_names = Vec::new();
        for c in netlist.cells() {
            if let CellKind::Ff { init } = c.kind {
                ffs.push((index[c.id()], index[c.inputs[0].as_str()], init));
                ff_names.push(c.id().to_string());
            }
        }
        let inputs: Vec<String> = netlist.data_inputs().into_iter().map(String::from).collect();
        Ok(Simulator {
            input_idx: inputs.iter().map(|n| index[n.as_str()]).collect(),
            output_idx: netlist.outputs.iter().map(|n| index[n.as_str()]).collect(),
            clock_idx: netlist.clock.as_deref().and_then(|c| index.get(c).copied()),
            outputs: netlist.outputs.clone(),
            inputs,
            ops,
            ffs,
            ff_names,
            nets: index.len(),
        })
    }

    /// Like [`Simulator::new`], after loading masks from a configuration.
    pub fn programmed(netlist: &Netlist, state: &ConfigState) -> Result<Self, SimError> {
        let n = apply(netlist, state).map_err(SimError::Unprogrammed)?;
        Simulator::new(&n)
    }

    pub fn is_sequential(&self) -> bool {
        !self.ffs.is_empty()
    }

    pub fn initial_state(&self) -> Vec<u64> {
        self.ffs.iter().map(|&(_, _, init)| if init { !0 } else { 0 }).collect()
    }

    /// Evaluates one word of stimuli. `state` holds one word per flip-flop
    /// and is advanced to the next cycle.
    pub fn step_words(&self, state: &mut [u64], inputs: &[u64]) -> Vec<u64> {
        let mut v = vec![0u64; self.nets];
        for (&i, &w) in self.input_idx.iter().zip(inputs) {
            v[i] = w;
        }
        if let Some(c) = self.clock_idx {
            v[c] = 0;
        }
        for (&(q, _, _), &s) in self.ffs.iter().zip(state.iter()) {
            v[q] = s;
        }
        let mut buf = [0u64; 6];
        for op in &self.ops {
            match op {
                Op::Lut { bits, width, ins, out } => {
                    for (b, &i) in buf.iter_mut().zip(ins) {
                        *b = v[i];
                    }
                    v[*out] = lut_word(*bits, *width, &buf[..ins.len()]);
                }
                Op::Gate { kind, ins, out } => {
                    for (b, &i) in buf.iter_mut().zip(ins) {
                        *b = v[i];
                    }
                    v[*out] = kind.eval_word(&buf[..ins.len()]);
                }
            }
        }
        for (s, &(_, d, _)) in state.iter_mut().zip(&self.ffs) {
            *s = v[d];
        }
        self.output_idx.iter().map(|&o| v[o]).collect()
    }

    fn check_len(&self, inputs: &[bool]) -> Result<(), SimError> {
        if inputs.len() != self.inputs.len() {
            return Err(SimError::InputLength { expected: self.inputs.len(), actual: inputs.len() });
        }
        Ok(())
    }

    /// Evaluates one vector with flip-flops at their init values.
    pub fn eval(&self, inputs: &[bool]) -> Result<Vec<bool>, SimError> {
        self.check_len(inputs)?;
        let words: Vec<u64> = inputs.iter().map(|&b| b as u64).collect();
        let mut st = self.initial_state();
        Ok(self.step_words(&mut st, &words).iter().map(|w| w & 1 == 1).collect())
    }
}

pub fn eval_comb(netlist: &Netlist, inputs: &[bool]) -> Result<Vec<bool>, SimError> {
    Simulator::new(netlist)?.eval(inputs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimState {
    pub ff: BTreeMap<String, bool>,
    pub cycle: u64,
}

impl SimState {
    pub fn reset(netlist: &Netlist) -> Self {
        let ff = netlist
            .cells()
            .filter_map(|c| match c.kind {
                CellKind::Ff { init } => Some((c.id().to_string(), init)),
                _ => None,
            })
            .collect();
        SimState { ff, cycle: 0 }
    }
}

/// One clock cycle: outputs from the current state and inputs, then the
/// flip-flops capture their D values.
pub fn step(netlist: &Netlist, state: &SimState, inputs: &[bool]) -> Result<(SimState, Vec<bool>), SimError> {
    let sim = Simulator::new(netlist)?;
    sim.check_len(inputs)?;
    let mut words: Vec<u64> = sim.ff_names.iter().map(|n| state.ff.get(n).copied().unwrap_or(false) as u64).collect();
    let ins: Vec<u64> = inputs.iter().map(|&b| b as u64).collect();
    let out = sim.step_words(&mut words, &ins);
    let ff = sim.ff_names.iter().cloned().zip(words.iter().map(|w| w & 1 == 1)).collect();
    Ok((SimState { ff, cycle: state.cycle + 1 }, out.iter().map(|w| w & 1 == 1).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalencePolicy {
    pub seed: u64,
    pub random_vectors: usize,
    pub cycles: usize,
}

impl Default for EquivalencePolicy {
    fn default() -> Self {
        EquivalencePolicy { seed: 1, random_vectors: 10_000, cycles: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SimMode {
    Exhaustive { vectors: u64 },
    Random { seed: u64, vectors: usize },
    Sequential { seed: u64, cycles: usize, lanes: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    /// One input vector per cycle; a single entry for combinational checks.
    pub inputs: Vec<Vec<bool>>,
    pub cycle: usize,
    pub a_outputs: Vec<bool>,
    pub b_outputs: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub mode: SimMode,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub counterexample: Option<Counterexample>,
    pub coverage: String,
}

impl EquivalenceReport {
    pub fn equivalent(&self) -> bool {
        self.counterexample.is_none()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["verdict"] = serde_json::json!(if self.equivalent() { "equivalent" } else { "counterexample" });
        v
    }
}

fn lane(words: &[u64], l: usize) -> Vec<bool> {
    words.iter().map(|w| (w >> l) & 1 == 1).collect()
}

/// Compares `a` and `b` on a's data-input order. Configuration pins are
/// not part of a netlist, so nothing needs excluding.
pub fn check_equivalence(a: &Netlist, b: &Netlist, policy: EquivalencePolicy) -> Result<EquivalenceReport, SimError> {
    let sa = Simulator::new(a)?;
    let sb = Simulator::new(b)?;
    check_compiled(&sa, &sb, policy)
}

pub fn check_compiled(sa: &Simulator, sb: &Simulator, policy: EquivalencePolicy) -> Result<EquivalenceReport, SimError> {
    let mut ia = sa.inputs.clone();
    let mut ib = sb.inputs.clone();
    ia.sort();
    ib.sort();
    if ia != ib {
        return Err(SimError::PortMismatch(format!("inputs {:?} vs {:?}", sa.inputs, sb.inputs)));
    }
    if sa.outputs != sb.outputs {
        return Err(SimError::PortMismatch(format!("outputs {:?} vs {:?}", sa.outputs, sb.outputs)));
    }
    // Permutation of a's input words into b's order.
    let perm: Vec<usize> = sb.inputs.iter().map(|n| sa.inputs.iter().position(|m| m == n).unwrap()).collect();
    let to_b = |w: &[u64]| -> Vec<u64> { perm.iter().map(|&k| w[k]).collect() };
    let n = sa.inputs.len();
    let sequential = sa.is_sequential() || sb.is_sequential();
    let base = |mode, counterexample, coverage: String| EquivalenceReport {
        mode,
        inputs: sa.inputs.clone(),
        outputs: sa.outputs.clone(),
        counterexample,
        coverage,
    };

    if sequential {
        let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
        let (mut st_a, mut st_b) = (sa.initial_state(), sb.initial_state());
        let mut history: Vec<Vec<u64>> = Vec::with_capacity(policy.cycles);
        for cycle in 0..policy.cycles {
            let words: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
            let oa = sa.step_words(&mut st_a, &words);
            let ob = sb.step_words(&mut st_b, &to_b(&words));
            history.push(words);
            if let Some(l) = (0..64).find(|&l| oa.iter().zip(&ob).any(|(x, y)| (x ^ y) >> l & 1 == 1)) {
                let cx = Counterexample {
                    inputs: history.iter().map(|w| lane(w, l)).collect(),
                    cycle,
                    a_outputs: lane(&oa, l),
                    b_outputs: lane(&ob, l),
                };
                let mode = SimMode::Sequential { seed: policy.seed, cycles: policy.cycles, lanes: 64 };
                return Ok(base(mode, Some(cx), format!("diverged at cycle {cycle}")));
            }
        }
        let mode = SimMode::Sequential { seed: policy.seed, cycles: policy.cycles, lanes: 64 };
        let cov = format!("{} cycles x 64 independent random streams from reset", policy.cycles);
        return Ok(base(mode, None, cov));
    }

    let (blocks, mode, coverage): (Vec<(Vec<u64>, u64)>, SimMode, String) = if n <= EXHAUSTIVE_MAX_INPUTS {
        let total = 1u64 << n;
        let blocks = (0..total.div_ceil(64))
            .map(|b| {
                let words = (0..n)
                    .map(|i| (0..64u64).fold(0u64, |w, l| w | ((((b * 64 + l) >> i) & 1) << l)))
                    .collect();
                let live = (total - b * 64).min(64);
                (words, if live == 64 { !0 } else { (1u64 << live) - 1 })
            })
            .collect();
        (blocks, SimMode::Exhaustive { vectors: total }, format!("all {total} input vectors"))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
        let count = policy.random_vectors;
        let blocks = (0..count.div_ceil(64))
            .map(|b| {
                let words = (0..n).map(|_| rng.gen()).collect();
                let live = (count - b * 64).min(64);
                (words, if live == 64 { !0 } else { (1u64 << live) - 1 })
            })
            .collect();
        let mode = SimMode::Random { seed: policy.seed, vectors: count };
        (blocks, mode, format!("{count} random vectors of 2^{n}"))
    };
    let cx = blocks.par_iter().find_map_first(|(words, live)| {
        let oa = sa.step_words(&mut sa.initial_state(), words);
        let ob = sb.step_words(&mut sb.initial_state(), &to_b(words));
        let diff = oa.iter().zip(&ob).fold(0u64, |d, (x, y)| d | (x ^ y)) & live;
        (diff != 0).then(|| {
            let l = diff.trailing_zeros() as usize;
            Counterexample { inputs: vec![lane(words, l)], cycle: 0, a_outputs: lane(&oa, l), b_outputs: lane(&ob, l) }
        })
    });
    Ok(base(mode, cx, coverage))
}

/// Re-runs a counterexample on both designs; true when outputs still differ.
pub fn replay(a: &Netlist, b: &Netlist, cx: &Counterexample) -> Result<bool, SimError> {
    let sa = Simulator::new(a)?;
    let sb = Simulator::new(b)?;
    let perm: Vec<usize> = sb.inputs.iter().map(|n| sa.inputs.iter().position(|m| m == n).unwrap_or(0)).collect();
    let (mut st_a, mut st_b) = (sa.initial_state(), sb.initial_state());
    let (mut oa, mut ob) = (Vec::new(), Vec::new());
    for v in &cx.inputs {
        let w: Vec<u64> = v.iter().map(|&x| x as u64).collect();
        let wb: Vec<u64> = perm.iter().map(|&k| w[k]).collect();
        oa = sa.step_words(&mut st_a, &w);
        ob = sb.step_words(&mut st_b, &wb);
    }
    Ok(oa.iter().zip(&ob).any(|(x, y)| (x ^ y) & 1 == 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_blif, Cell, LutMask};
    use proptest::prelude::*;

    fn and_or(mask: u64) -> Netlist {
        let mut n = Netlist::new("t");
        n.add_input("a");
        n.add_input("b");
        n.add_cell(Cell::lut("y", vec!["a".into(), "b".into()], LutMask::new(2, mask).unwrap())).unwrap();
        n.add_output("y");
        n
    }

    #[test]
    fn and_lut() {
        let n = and_or(0x8);
        assert_eq!(eval_comb(&n, &[true, true]).unwrap(), [true]);
        assert_eq!(eval_comb(&n, &[true, false]).unwrap(), [false]);
    }

    #[test]
    fn tie_only() {
        let n = parse_blif(".model t\n.inputs a\n.outputs y\n.names y\n1\n.end\n").unwrap();
        for v in [false, true] {
            assert_eq!(eval_comb(&n, &[v]).unwrap(), [true]);
        }
    }

    #[test]
    fn toggle_register() {
        let n = parse_blif(".model t\n.inputs clk\n.outputs q\n.names q d\n0 1\n.latch d q re clk 0\n.end\n").unwrap();
        let mut st = SimState::reset(&n);
        let mut seen = Vec::new();
        for _ in 0..4 {
            let (next, out) = step(&n, &st, &[]).unwrap();
            seen.push(out[0]);
            st = next;
        }
        assert_eq!(seen, [false, true, false, true]);
    }

    #[test]
    fn ff_chain() {
        let n = parse_blif(
            ".model t\n.inputs clk\n.outputs q2\n.names one\n1\n.latch one q1 re clk 0\n.latch q1 q2 re clk 0\n.end\n",
        )
        .unwrap();
        let mut st = SimState::reset(&n);
        let mut seen = Vec::new();
        for _ in 0..4 {
            let (next, out) = step(&n, &st, &[]).unwrap();
            seen.push(out[0]);
            st = next;
        }
        assert_eq!(seen, [false, false, true, true]);
    }

    #[test]
    fn self_equivalent_and_counterexample() {
        let a = and_or(0x8);
        assert!(check_equivalence(&a, &a, EquivalencePolicy::default()).unwrap().equivalent());
        let b = and_or(0xE);
        let r = check_equivalence(&a, &b, EquivalencePolicy::default()).unwrap();
        let cx = r.counterexample.clone().unwrap();
        assert!(cx.inputs[0] == [true, false] || cx.inputs[0] == [false, true]);
        assert!(replay(&a, &b, &cx).unwrap());
        assert_eq!(r.to_json()["verdict"], "counterexample");
    }

    #[test]
    fn port_mismatch() {
        let mut b = and_or(0x8);
        b.add_output("a");
        assert!(matches!(check_equivalence(&and_or(0x8), &b, EquivalencePolicy::default()), Err(SimError::PortMismatch(_))));
    }

    #[test]
    fn unprogrammed_is_an_error() {
        let n = and_or(0x8);
        let st = ConfigState::blank(&n);
        assert_eq!(Simulator::programmed(&n, &st).unwrap_err(), SimError::Unprogrammed("y".into()));
    }

    proptest! {
        #[test]
        fn lut_word_matches_mask(bits in any::<u64>(), w in 1u8..=6) {
            let m = LutMask::new(w, bits & LutMask::full(w)).unwrap();
            let ins: Vec<u64> = (0..w).map(|i| (0..64u64).fold(0, |acc, l| acc | (((l >> i) & 1) << l))).collect();
            let out = lut_word(m.bits(), w, &ins);
            for l in 0..m.num_rows() {
                prop_assert_eq!((out >> l) & 1 == 1, m.eval(l));
            }
        }

        #[test]
        fn random_policy_is_seeded(seed in any::<u64>()) {
            let mut n = Netlist::new("w");
            for i in 0..20 {
                n.add_input(format!("i{i}"));
            }
            n.add_cell(Cell::gate("y", GateKind::And2, vec!["i0".into(), "i19".into()])).unwrap();
            n.add_output("y");
            let mut m = n.clone();
            m.replace_cell(Cell::gate("y", GateKind::Nand2, vec!["i0".into(), "i19".into()])).unwrap();
            let p = EquivalencePolicy { seed, ..Default::default() };
            let r1 = check_equivalence(&n, &m, p).unwrap();
            let r2 = check_equivalence(&n, &m, p).unwrap();
            prop_assert_eq!(&r1, &r2);
            prop_assert!(replay(&n, &m, r1.counterexample.as_ref().unwrap()).unwrap());
        }
    }
}
