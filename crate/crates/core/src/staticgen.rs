// SPDX-License-Identifier: Apache-2.0

//! LUT mask to static gate network conversion.
//!
//! A mask is turned into a reduced ordered BDD (variable order `in_0` at the
//! root, then `in_1`, ...) and every BDD node is mapped onto a MUX2 with
//! constant-input simplification. The resulting network has at most `n`
//! levels of AND2/OR2/MUX2 plus one shared inverter per select variable.

use std::collections::HashMap;

use thiserror::Error;

use crate::netlist::{GateKind, LutMask};
use crate::scalar::Scalar;
use crate::techlib::TechLibrary;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StaticGenError {
    #[error("gate network for {mask} differs at input vector {vector}")]
    Mismatch { mask: LutMask, vector: usize },
}

/// Reference to a BDD node or terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BddRef {
    Zero,
    One,
    Node(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BddNode {
    pub var: u8,
    pub lo: BddRef,
    pub hi: BddRef,
}

/// Reduced ordered BDD. Nodes are stored children first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bdd {
    pub width: u8,
    pub nodes: Vec<BddNode>,
    pub root: BddRef,
}

impl Bdd {
    pub fn eval(&self, index: usize) -> bool {
        let mut r = self.root;
        loop {
            match r {
                BddRef::Zero => return false,
                BddRef::One => return true,
                BddRef::Node(i) => {
                    let n = self.nodes[i];
                    r = if (index >> n.var) & 1 == 1 { n.hi } else { n.lo };
                }
            }
        }
    }

    pub fn internal_nodes(&self) -> usize {
        self.nodes.len()
    }
}

/// Splits a truth table over `vars` variables on its lowest variable.
fn cofactors(bits: u64, vars: u32) -> (u64, u64) {
    let half = 1u32 << (vars - 1);
    let (mut lo, mut hi) = (0u64, 0u64);
    for k in 0..half {
        lo |= ((bits >> (2 * k)) & 1) << k;
        hi |= ((bits >> (2 * k + 1)) & 1) << k;
    }
    (lo, hi)
}

struct BddBuilder {
    nodes: Vec<BddNode>,
    unique: HashMap<BddNode, usize>,
}

impl BddBuilder {
    fn build(&mut self, bits: u64, var: u8, width: u8) -> BddRef {
        let vars = u32::from(width - var);
        let full = if vars >= 6 { u64::MAX } else { (1u64 << (1u32 << vars)) - 1 };
        if bits & full == 0 {
            return BddRef::Zero;
        }
        if bits & full == full {
            return BddRef::One;
        }
        let (lo_bits, hi_bits) = cofactors(bits, vars);
        let lo = self.build(lo_bits, var + 1, width);
        let hi = self.build(hi_bits, var + 1, width);
        if lo == hi {
            return lo;
        }
        let node = BddNode { var, lo, hi };
        if let Some(&i) = self.unique.get(&node) {
            return BddRef::Node(i);
        }
        self.nodes.push(node);
        self.unique.insert(node, self.nodes.len() - 1);
        BddRef::Node(self.nodes.len() - 1)
    }
}

pub fn build_bdd(mask: LutMask) -> Bdd {
    let mut b = BddBuilder { nodes: Vec::new(), unique: HashMap::new() };
    let root = b.build(mask.bits(), 0, mask.width());
    Bdd { width: mask.width(), nodes: b.nodes, root }
}

/// A signal inside a gate network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Input(u8),
    Gate(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetGate {
    pub kind: GateKind,
    pub inputs: Vec<Signal>,
}

/// Static replacement for one LUT. Gates are in topological order and the
/// output is always driven by a gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateNetwork<T> {
    pub width: u8,
    pub gates: Vec<NetGate>,
    pub output: usize,
    /// Longest gate-delay sum from each input to the output; `None` when the
    /// input is not connected.
    pub arc_delay: Vec<Option<T>>,
    pub delay: T,
    pub area: T,
    pub depth: usize,
}

impl<T: Scalar> GateNetwork<T> {
    pub fn eval(&self, index: usize) -> bool {
        let mut values = vec![false; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            let ins: Vec<bool> = g
                .inputs
                .iter()
                .map(|s| match *s {
                    Signal::Input(k) => (index >> k) & 1 == 1,
                    Signal::Gate(j) => values[j],
                })
                .collect();
            values[i] = g.kind.eval(&ins);
        }
        values[self.output]
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    /// Inputs with a path to the output.
    pub fn support(&self) -> Vec<u8> {
        (0..self.width).filter(|&k| self.arc_delay[k as usize].is_some()).collect()
    }
}

struct Mapper {
    gates: Vec<NetGate>,
    inverters: HashMap<u8, usize>,
}

#[derive(Clone, Copy)]
enum Sig {
    Const(bool),
    Wire(Signal),
}

impl Mapper {
    fn push(&mut self, kind: GateKind, inputs: Vec<Signal>) -> Signal {
        self.gates.push(NetGate { kind, inputs });
        Signal::Gate(self.gates.len() - 1)
    }

    fn inv(&mut self, var: u8) -> Signal {
        if let Some(&g) = self.inverters.get(&var) {
            return Signal::Gate(g);
        }
        let s = self.push(GateKind::Inv, vec![Signal::Input(var)]);
        if let Signal::Gate(g) = s {
            self.inverters.insert(var, g);
        }
        s
    }

    fn node(&mut self, var: u8, lo: Sig, hi: Sig) -> Signal {
        let s = Signal::Input(var);
        match (lo, hi) {
            (Sig::Const(false), Sig::Const(true)) => s,
            (Sig::Const(true), Sig::Const(false)) => self.inv(var),
            (Sig::Const(false), Sig::Wire(h)) => self.push(GateKind::And2, vec![s, h]),
            (Sig::Wire(l), Sig::Const(false)) => {
                let ns = self.inv(var);
                self.push(GateKind::And2, vec![ns, l])
            }
            (Sig::Const(true), Sig::Wire(h)) => {
                let ns = self.inv(var);
                self.push(GateKind::Or2, vec![ns, h])
            }
            (Sig::Wire(l), Sig::Const(true)) => self.push(GateKind::Or2, vec![s, l]),
            (Sig::Wire(l), Sig::Wire(h)) => self.push(GateKind::Mux2, vec![s, l, h]),
            (Sig::Const(a), Sig::Const(b)) => unreachable!("reduced BDD has lo != hi, got {a} {b}"),
        }
    }
}

/// Maps each BDD node onto a simplified MUX2. Shared nodes share gates.
pub fn bdd_to_gates<T: Scalar>(bdd: &Bdd, lib: &TechLibrary<T>) -> GateNetwork<T> {
    let mut m = Mapper { gates: Vec::new(), inverters: HashMap::new() };
    let mut mapped: Vec<Signal> = Vec::with_capacity(bdd.nodes.len());
    let sig = |r: BddRef, mapped: &[Signal]| match r {
        BddRef::Zero => Sig::Const(false),
        BddRef::One => Sig::Const(true),
        BddRef::Node(i) => Sig::Wire(mapped[i]),
    };
    for node in &bdd.nodes {
        let lo = sig(node.lo, &mapped);
        let hi = sig(node.hi, &mapped);
        let s = m.node(node.var, lo, hi);
        mapped.push(s);
    }
    let output = match bdd.root {
        BddRef::Zero => m.push(GateKind::Tie0, vec![]),
        BddRef::One => m.push(GateKind::Tie1, vec![]),
        BddRef::Node(i) => match mapped[i] {
            Signal::Input(k) => m.push(GateKind::Buf, vec![Signal::Input(k)]),
            g => g,
        },
    };
    let Signal::Gate(output) = output else { unreachable!("output is a gate") };
    finish(bdd.width, m.gates, output, lib)
}

fn finish<T: Scalar>(width: u8, gates: Vec<NetGate>, output: usize, lib: &TechLibrary<T>) -> GateNetwork<T> {
    // Longest path from each input to each gate.
    let mut dist: Vec<Vec<Option<T>>> = Vec::with_capacity(gates.len());
    let mut level = vec![0usize; gates.len()];
    for (i, g) in gates.iter().enumerate() {
        let d = lib.gate_delay(g.kind);
        let mut row: Vec<Option<T>> = vec![None; width as usize];
        let mut lv = 0;
        for s in &g.inputs {
            match *s {
                Signal::Input(k) => {
                    let k = k as usize;
                    row[k] = Some(row[k].map_or(d, |x| x.max_of(d)));
                }
                Signal::Gate(j) => {
                    lv = lv.max(level[j]);
                    for k in 0..width as usize {
                        if let Some(x) = dist[j][k] {
                            let v = x + d;
                            row[k] = Some(row[k].map_or(v, |y| y.max_of(v)));
                        }
                    }
                }
            }
        }
        level[i] = lv + 1;
        dist.push(row);
    }
    let arc_delay = dist[output].clone();
    let delay = arc_delay
        .iter()
        .flatten()
        .copied()
        .reduce(|a, b| a.max_of(b))
        .unwrap_or_else(|| lib.gate_delay(gates[output].kind));
    let area = gates.iter().fold(T::zero(), |acc, g| acc + lib.gate_area(g.kind));
    GateNetwork { width, gates, output, arc_delay, delay, area, depth: level[output] }
}

/// Builds and verifies the static replacement of a LUT.
pub fn decompose_lut<T: Scalar>(mask: LutMask, lib: &TechLibrary<T>) -> Result<GateNetwork<T>, StaticGenError> {
    let net = bdd_to_gates(&build_bdd(mask), lib);
    for v in 0..mask.num_rows() {
        if net.eval(v) != mask.eval(v) {
            return Err(StaticGenError::Mismatch { mask, vector: v });
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lib() -> TechLibrary<f64> {
        TechLibrary::default_library()
    }

    fn mask(w: u8, b: u64) -> LutMask {
        LutMask::new(w, b).unwrap()
    }

    #[test]
    fn constant_one_is_terminal() {
        let bdd = build_bdd(mask(6, u64::MAX));
        assert_eq!(bdd.root, BddRef::One);
        assert!(bdd.nodes.is_empty());
    }

    #[test]
    fn projection_is_single_node() {
        let bdd = build_bdd(mask(2, 0xA));
        assert_eq!(bdd.nodes, vec![BddNode { var: 0, lo: BddRef::Zero, hi: BddRef::One }]);
        assert_eq!(bdd.root, BddRef::Node(0));
    }

    #[test]
    fn and_maps_to_one_and2() {
        let net = decompose_lut(mask(2, 0x8), &lib()).unwrap();
        assert_eq!(net.gates.len(), 1);
        assert_eq!(net.count(GateKind::And2), 1);
    }

    #[test]
    fn inverter_lut() {
        let net = decompose_lut(mask(1, 0x1), &lib()).unwrap();
        assert_eq!(net.gates, vec![NetGate { kind: GateKind::Inv, inputs: vec![Signal::Input(0)] }]);
    }

    #[test]
    fn xor_is_small() {
        let net = decompose_lut(mask(2, 0x6), &lib()).unwrap();
        assert!(net.gates.len() <= 3);
        for v in 0..4 {
            assert_eq!(net.eval(v), (v & 1) ^ (v >> 1) == 1);
        }
    }

    #[test]
    fn constant_zero_is_tie0() {
        let net = decompose_lut(mask(3, 0), &lib()).unwrap();
        assert_eq!(net.gates.len(), 1);
        assert_eq!(net.gates[0].kind, GateKind::Tie0);
        assert_eq!(net.delay, 0.0);
        assert!(net.support().is_empty());
    }

    #[test]
    fn buffer_is_single_buf() {
        let net = decompose_lut(mask(1, 0b10), &lib()).unwrap();
        assert_eq!(net.gates.len(), 1);
        assert_eq!(net.gates[0].kind, GateKind::Buf);
        assert_eq!(net.area, lib().gate_area(GateKind::Buf));
    }

    #[test]
    fn nor_uses_shared_inverters() {
        // !a & !b: two inverters plus one AND2 over a two-node BDD
        let net = decompose_lut(mask(2, 0x1), &lib()).unwrap();
        assert_eq!(net.count(GateKind::Inv), 2);
        assert_eq!(net.count(GateKind::And2), 1);
    }

    #[test]
    fn all_three_input_masks() {
        for bits in 0..256u64 {
            let m = mask(3, bits);
            let bdd = build_bdd(m);
            for v in 0..8 {
                assert_eq!(bdd.eval(v), m.eval(v));
            }
            decompose_lut(m, &lib()).unwrap();
        }
    }

    fn check_reduced_ordered(bdd: &Bdd) {
        let mut seen = std::collections::HashSet::new();
        for (i, n) in bdd.nodes.iter().enumerate() {
            assert_ne!(n.lo, n.hi);
            assert!(seen.insert(*n), "duplicate node {i}");
            for child in [n.lo, n.hi] {
                if let BddRef::Node(c) = child {
                    assert!(c < i);
                    assert!(bdd.nodes[c].var > n.var);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn lut6_bdd_matches_mask(bits in any::<u64>()) {
            let m = mask(6, bits);
            let bdd = build_bdd(m);
            check_reduced_ordered(&bdd);
            for v in 0..64 {
                prop_assert_eq!(bdd.eval(v), m.eval(v));
            }
            prop_assert_eq!(build_bdd(m), bdd);
        }

        #[test]
        fn network_bounds(width in 1u8..=6, raw in any::<u64>()) {
            let l = lib();
            let m = mask(width, raw & LutMask::full(width));
            let bdd = build_bdd(m);
            let net = decompose_lut(m, &l).unwrap();
            let inverters = net.count(GateKind::Inv);
            let extra = net.count(GateKind::Buf) + net.count(GateKind::Tie0) + net.count(GateKind::Tie1);
            prop_assert!(net.gates.len() - inverters - extra <= bdd.internal_nodes());
            prop_assert!(inverters <= width as usize);
            prop_assert!(net.delay <= l.lut_delay(width));
            prop_assert!(net.depth <= width as usize + 1);
            let again = decompose_lut(m, &l).unwrap();
            prop_assert_eq!(again, net);
        }
    }
}
