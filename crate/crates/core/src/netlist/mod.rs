// SPDX-License-Identifier: Apache-2.0

//! Hybrid netlist representation.
//!
//! A [`Netlist`] holds LUTs (reconfigurable or static), flip-flops and static
//! gates. Every cell drives exactly one net and is identified by the name of
//! that net, so cell ids and driven nets share one namespace, the same way
//! BLIF names things.

mod blif;
mod stats;
mod verilog;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blif::{emit_blif, parse_blif};
pub use stats::{stats, NetlistStats};
pub use verilog::{emit_verilog, legalize_identifier};

/// Largest supported LUT.
pub const MAX_LUT_WIDTH: u8 = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: .names block driving `{net}` has {inputs} inputs (at most 6 supported)")]
    TooManyInputs { line: usize, net: String, inputs: usize },
    #[error("net `{0}` has more than one driver")]
    MultipleDrivers(String),
    #[error("net `{net}` used by `{user}` has no driver")]
    Undriven { net: String, user: String },
    #[error("combinational cycle through `{0}`")]
    CombinationalCycle(String),
    #[error("invalid LUT mask: {0}")]
    InvalidMask(String),
    #[error("cell `{cell}`: {msg}")]
    InvalidCell { cell: String, msg: String },
    #[error("multiple clocks: `{0}` and `{1}`")]
    MultipleClocks(String, String),
    #[error("identifier collision after legalization: `{0}` and `{1}` both map to `{2}`")]
    NameCollision(String, String, String),
    #[error("unknown cell `{0}`")]
    UnknownCell(String),
}

/// Truth table of an n-input LUT.
///
/// Bit `i` of `bits` is the output when the inputs, read as a binary number
/// with `in_0` as the least significant bit, equal `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LutMask {
    width: u8,
    bits: u64,
}

impl LutMask {
    pub fn new(width: u8, bits: u64) -> Result<Self, NetlistError> {
        if width == 0 || width > MAX_LUT_WIDTH {
            return Err(NetlistError::InvalidMask(format!("width {width} outside 1..=6")));
        }
        if bits & !Self::full(width) != 0 {
            return Err(NetlistError::InvalidMask(format!(
                "bits {bits:#x} exceed 2^{} positions",
                1u32 << width
            )));
        }
        Ok(LutMask { width, bits })
    }

    /// Mask with all `2^width` positions set.
    pub fn full(width: u8) -> u64 {
        if width >= 6 {
            u64::MAX
        } else {
            (1u64 << (1u32 << width)) - 1
        }
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn num_rows(&self) -> usize {
        1usize << self.width
    }

    pub fn eval(&self, index: usize) -> bool {
        (self.bits >> index) & 1 == 1
    }

    pub fn is_constant(&self) -> Option<bool> {
        if self.bits == 0 {
            Some(false)
        } else if self.bits == Self::full(self.width) {
            Some(true)
        } else {
            None
        }
    }

    /// Extends the mask to six inputs, the extra inputs being ignored.
    pub fn lift_to_6(&self) -> u64 {
        let mut bits = self.bits;
        let mut span = 1u32 << self.width;
        while span < 64 {
            bits |= bits << span;
            span *= 2;
        }
        bits
    }

    /// Hex rendering with exactly `2^width / 4` digits (at least one).
    pub fn to_hex(&self) -> String {
        let digits = (self.num_rows() / 4).max(1);
        format!("{:0digits$x}", self.bits)
    }

    pub fn from_hex(width: u8, hex: &str) -> Result<Self, NetlistError> {
        let bits = u64::from_str_radix(hex.trim_start_matches("0x"), 16)
            .map_err(|e| NetlistError::InvalidMask(format!("`{hex}`: {e}")))?;
        Self::new(width, bits)
    }
}

impl fmt::Display for LutMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LUT{}:{}", self.width, self.to_hex())
    }
}

/// Fixed-function cells available in the standard-cell library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    Inv,
    Buf,
    And2,
    Or2,
    Nand2,
    Nor2,
    /// Inputs are `(sel, d0, d1)`; output is `d1` when `sel` is high.
    Mux2,
    Tie0,
    Tie1,
}

impl GateKind {
    pub const ALL: [GateKind; 9] = [
        GateKind::Inv,
        GateKind::Buf,
        GateKind::And2,
        GateKind::Or2,
        GateKind::Nand2,
        GateKind::Nor2,
        GateKind::Mux2,
        GateKind::Tie0,
        GateKind::Tie1,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Tie0 | GateKind::Tie1 => 0,
            GateKind::Inv | GateKind::Buf => 1,
            GateKind::And2 | GateKind::Or2 | GateKind::Nand2 | GateKind::Nor2 => 2,
            GateKind::Mux2 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Inv => "INV",
            GateKind::Buf => "BUF",
            GateKind::And2 => "AND2",
            GateKind::Or2 => "OR2",
            GateKind::Nand2 => "NAND2",
            GateKind::Nor2 => "NOR2",
            GateKind::Mux2 => "MUX2",
            GateKind::Tie0 => "TIE0",
            GateKind::Tie1 => "TIE1",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn eval(self, inputs: &[bool]) -> bool {
        match self {
            GateKind::Inv => !inputs[0],
            GateKind::Buf => inputs[0],
            GateKind::And2 => inputs[0] && inputs[1],
            GateKind::Or2 => inputs[0] || inputs[1],
            GateKind::Nand2 => !(inputs[0] && inputs[1]),
            GateKind::Nor2 => !(inputs[0] || inputs[1]),
            GateKind::Mux2 => {
                if inputs[0] {
                    inputs[2]
                } else {
                    inputs[1]
                }
            }
            GateKind::Tie0 => false,
            GateKind::Tie1 => true,
        }
    }

    /// Bit-parallel evaluation over 64 lanes.
    pub fn eval_word(self, inputs: &[u64]) -> u64 {
        match self {
            GateKind::Inv => !inputs[0],
            GateKind::Buf => inputs[0],
            GateKind::And2 => inputs[0] & inputs[1],
            GateKind::Or2 => inputs[0] | inputs[1],
            GateKind::Nand2 => !(inputs[0] & inputs[1]),
            GateKind::Nor2 => !(inputs[0] | inputs[1]),
            GateKind::Mux2 => (inputs[0] & inputs[2]) | (!inputs[0] & inputs[1]),
            GateKind::Tie0 => 0,
            GateKind::Tie1 => u64::MAX,
        }
    }

    /// The gate's function as a LUT mask over its inputs in pin order.
    pub fn truth_table(self) -> Option<LutMask> {
        let arity = self.arity();
        if arity == 0 {
            return None;
        }
        let mut bits = 0u64;
        let mut pins = vec![false; arity];
        for row in 0..(1usize << arity) {
            for (i, p) in pins.iter_mut().enumerate() {
                *p = (row >> i) & 1 == 1;
            }
            if self.eval(&pins) {
                bits |= 1 << row;
            }
        }
        Some(LutMask::new(arity as u8, bits).expect("gate arity <= 3"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Reconfigurable,
    Static,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Lut(LutMask),
    /// Inputs are `(D)` or `(D, clk)`; the output is `Q`.
    Ff { init: bool },
    Gate(GateKind),
}

impl CellKind {
    pub fn label(&self) -> String {
        match self {
            CellKind::Lut(m) => format!("LUT{}", m.width()),
            CellKind::Ff { .. } => "FF".to_string(),
            CellKind::Gate(g) => g.name().to_string(),
        }
    }
}

/// A netlist cell. Its id is the name of the net it drives.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub kind: CellKind,
    pub inputs: Vec<String>,
    pub output: String,
    pub mode: Mode,
    /// For static cells produced by LUT conversion: the id of the source LUT.
    #[serde(default)]
    pub origin: Option<String>,
}

impl Cell {
    pub fn lut(output: impl Into<String>, inputs: Vec<String>, mask: LutMask) -> Self {
        Cell { kind: CellKind::Lut(mask), inputs, output: output.into(), mode: Mode::Reconfigurable, origin: None }
    }

    pub fn gate(output: impl Into<String>, kind: GateKind, inputs: Vec<String>) -> Self {
        Cell { kind: CellKind::Gate(kind), inputs, output: output.into(), mode: Mode::Static, origin: None }
    }

    pub fn ff(output: impl Into<String>, inputs: Vec<String>, init: bool) -> Self {
        Cell { kind: CellKind::Ff { init }, inputs, output: output.into(), mode: Mode::Static, origin: None }
    }

    pub fn id(&self) -> &str {
        &self.output
    }

    pub fn is_ff(&self) -> bool {
        matches!(self.kind, CellKind::Ff { .. })
    }

    pub fn lut_mask(&self) -> Option<LutMask> {
        match self.kind {
            CellKind::Lut(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_reconfigurable(&self) -> bool {
        self.mode == Mode::Reconfigurable && matches!(self.kind, CellKind::Lut(_))
    }

    /// Inputs that carry data, i.e. everything except an FF clock pin.
    pub fn data_inputs(&self) -> &[String] {
        if self.is_ff() {
            &self.inputs[..1.min(self.inputs.len())]
        } else {
            &self.inputs
        }
    }
}

/// Where a net gets its value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver<'a> {
    Input,
    Cell(&'a Cell),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    cells: BTreeMap<String, Cell>,
    pub clock: Option<String>,
}

impl Netlist {
    pub fn new(name: impl Into<String>) -> Self {
        Netlist { name: name.into(), ..Default::default() }
    }

    pub fn add_input(&mut self, net: impl Into<String>) {
        self.inputs.push(net.into());
    }

    pub fn add_output(&mut self, net: impl Into<String>) {
        self.outputs.push(net.into());
    }

    /// Inserts a cell; fails if its output net already has a driver.
    pub fn add_cell(&mut self, cell: Cell) -> Result<(), NetlistError> {
        if self.cells.contains_key(&cell.output) || self.inputs.contains(&cell.output) {
            return Err(NetlistError::MultipleDrivers(cell.output));
        }
        self.cells.insert(cell.output.clone(), cell);
        Ok(())
    }

    pub fn remove_cell(&mut self, id: &str) -> Option<Cell> {
        self.cells.remove(id)
    }

    pub fn cell(&self, id: &str) -> Option<&Cell> {
        self.cells.get(id)
    }

    pub fn cell_mut(&mut self, id: &str) -> Option<&mut Cell> {
        self.cells.get_mut(id)
    }

    /// Cells sorted by id.
    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.values()
    }

    pub fn cells_mut(&mut self) -> impl Iterator<Item = &mut Cell> {
        self.cells.values_mut()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn luts(&self) -> impl Iterator<Item = &Cell> {
        self.cells().filter(|c| matches!(c.kind, CellKind::Lut(_)))
    }

    pub fn reconfigurable_luts(&self) -> impl Iterator<Item = &Cell> {
        self.cells().filter(|c| c.is_reconfigurable())
    }

    pub fn is_sequential(&self) -> bool {
        self.cells().any(Cell::is_ff)
    }

    /// Primary inputs other than the clock.
    pub fn data_inputs(&self) -> Vec<&str> {
        self.inputs
            .iter()
            .filter(|n| Some(n.as_str()) != self.clock.as_deref())
            .map(String::as_str)
            .collect()
    }

    pub fn driver(&self, net: &str) -> Option<Driver<'_>> {
        if let Some(c) = self.cells.get(net) {
            Some(Driver::Cell(c))
        } else if self.inputs.iter().any(|i| i == net) {
            Some(Driver::Input)
        } else {
            None
        }
    }

    /// All net names: inputs and cell outputs, sorted.
    pub fn nets(&self) -> Vec<&str> {
        let mut nets: Vec<&str> = self.inputs.iter().map(String::as_str).collect();
        nets.extend(self.cells.keys().map(String::as_str));
        nets.sort_unstable();
        nets
    }

    /// Map from net to the ids of cells reading it (data pins only).
    pub fn fanout(&self) -> HashMap<&str, Vec<&str>> {
        let mut fanout: HashMap<&str, Vec<&str>> = HashMap::new();
        for c in self.cells() {
            for i in c.data_inputs() {
                fanout.entry(i.as_str()).or_default().push(c.id());
            }
        }
        fanout
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), NetlistError> {
        let mut seen = HashSet::new();
        for i in &self.inputs {
            if !seen.insert(i.as_str()) {
                return Err(NetlistError::MultipleDrivers(i.clone()));
            }
        }
        for c in self.cells() {
            if !seen.insert(c.output.as_str()) {
                return Err(NetlistError::MultipleDrivers(c.output.clone()));
            }
        }
        if let Some(clk) = &self.clock {
            if !self.inputs.contains(clk) {
                return Err(NetlistError::Undriven { net: clk.clone(), user: "clock".into() });
            }
        }
        for c in self.cells() {
            self.check_cell(c)?;
            for i in &c.inputs {
                if !seen.contains(i.as_str()) {
                    return Err(NetlistError::Undriven { net: i.clone(), user: c.id().to_string() });
                }
            }
        }
        for o in &self.outputs {
            if !seen.contains(o.as_str()) {
                return Err(NetlistError::Undriven { net: o.clone(), user: "output port".into() });
            }
        }
        self.comb_order().map(|_| ())
    }

    fn check_cell(&self, c: &Cell) -> Result<(), NetlistError> {
        let bad = |msg: String| NetlistError::InvalidCell { cell: c.id().to_string(), msg };
        match &c.kind {
            CellKind::Lut(m) => {
                if c.inputs.len() != m.width() as usize {
                    return Err(bad(format!("{} inputs for a width-{} mask", c.inputs.len(), m.width())));
                }
            }
            CellKind::Ff { .. } => {
                if c.mode == Mode::Reconfigurable {
                    return Err(bad("only LUTs can be reconfigurable".into()));
                }
                match (&self.clock, c.inputs.len()) {
                    (None, 1) => {}
                    (Some(clk), 2) if &c.inputs[1] == clk => {}
                    (Some(clk), 2) => return Err(NetlistError::MultipleClocks(clk.clone(), c.inputs[1].clone())),
                    _ => return Err(bad(format!("flip-flop with {} inputs", c.inputs.len()))),
                }
            }
            CellKind::Gate(g) => {
                if c.mode == Mode::Reconfigurable {
                    return Err(bad("only LUTs can be reconfigurable".into()));
                }
                if c.inputs.len() != g.arity() {
                    return Err(bad(format!("{} expects {} inputs, got {}", g.name(), g.arity(), c.inputs.len())));
                }
            }
        }
        Ok(())
    }

    /// Combinational cells in topological order (ties by id).
    ///
    /// FFs break cycles: their outputs are sources and their inputs sinks.
    pub fn comb_order(&self) -> Result<Vec<&Cell>, NetlistError> {
        let comb: Vec<&Cell> = self.cells().filter(|c| !c.is_ff()).collect();
        let index: HashMap<&str, usize> = comb.iter().enumerate().map(|(i, c)| (c.id(), i)).collect();
        let mut indeg = vec![0usize; comb.len()];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); comb.len()];
        for (i, c) in comb.iter().enumerate() {
            for inp in &c.inputs {
                if let Some(&p) = index.get(inp.as_str()) {
                    indeg[i] += 1;
                    succ[p].push(i);
                }
            }
        }
        let mut queue: VecDeque<usize> = (0..comb.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(comb.len());
        while let Some(i) = queue.pop_front() {
            order.push(comb[i]);
            for &s in &succ[i] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    queue.push_back(s);
                }
            }
        }
        if order.len() != comb.len() {
            let stuck = (0..comb.len()).find(|&i| indeg[i] > 0).expect("some cell left");
            return Err(NetlistError::CombinationalCycle(comb[stuck].id().to_string()));
        }
        Ok(order)
    }

    /// Replaces a cell by another with the same output net.
    pub fn replace_cell(&mut self, cell: Cell) -> Result<Cell, NetlistError> {
        match self.cells.get_mut(&cell.output) {
            Some(slot) => Ok(std::mem::replace(slot, cell)),
            None => Err(NetlistError::UnknownCell(cell.output)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn mask_rejects_high_bits() {
        assert!(LutMask::new(2, 0x10).is_err());
        assert!(LutMask::new(0, 0).is_err());
        assert!(LutMask::new(7, 0).is_err());
        assert!(LutMask::new(6, u64::MAX).is_ok());
    }

    #[test]
    fn lift_replicates_unused_inputs() {
        let and2 = LutMask::new(2, 0x8).unwrap();
        assert_eq!(and2.lift_to_6(), 0x8888_8888_8888_8888);
        let buf = LutMask::new(1, 0b10).unwrap();
        assert_eq!(buf.lift_to_6(), 0xAAAA_AAAA_AAAA_AAAA);
    }

    #[test]
    fn hex_width() {
        assert_eq!(LutMask::new(1, 1).unwrap().to_hex(), "1");
        assert_eq!(LutMask::new(4, 0x00ff).unwrap().to_hex(), "00ff");
        assert_eq!(LutMask::from_hex(3, "e8").unwrap().bits(), 0xe8);
    }

    #[test]
    fn gate_truth_tables() {
        assert_eq!(GateKind::And2.truth_table().unwrap().bits(), 0x8);
        assert_eq!(GateKind::Or2.truth_table().unwrap().bits(), 0xE);
        assert_eq!(GateKind::Inv.truth_table().unwrap().bits(), 0x1);
        // sel = in0, d0 = in1, d1 = in2
        assert_eq!(GateKind::Mux2.truth_table().unwrap().bits(), 0xE4);
    }

    #[test]
    fn cycle_detected() {
        let mut n = Netlist::new("cyc");
        n.add_input("a");
        n.add_cell(Cell::gate("x", GateKind::And2, s(&["a", "y"]))).unwrap();
        n.add_cell(Cell::gate("y", GateKind::Inv, s(&["x"]))).unwrap();
        assert!(matches!(n.validate(), Err(NetlistError::CombinationalCycle(_))));
    }

    #[test]
    fn ff_breaks_cycle() {
        let mut n = Netlist::new("toggle");
        n.add_cell(Cell::gate("d", GateKind::Inv, s(&["q"]))).unwrap();
        n.add_cell(Cell::ff("q", s(&["d"]), false)).unwrap();
        n.add_output("q");
        n.validate().unwrap();
    }

    #[test]
    fn duplicate_driver_rejected() {
        let mut n = Netlist::new("dup");
        n.add_input("a");
        assert!(n.add_cell(Cell::gate("a", GateKind::Inv, s(&["a"]))).is_err());
    }

    #[test]
    fn undriven_rejected() {
        let mut n = Netlist::new("u");
        n.add_cell(Cell::gate("y", GateKind::Inv, s(&["nope"]))).unwrap();
        assert!(matches!(n.validate(), Err(NetlistError::Undriven { .. })));
    }

    #[test]
    fn reconfigurable_gate_rejected() {
        let mut n = Netlist::new("r");
        n.add_input("a");
        let mut c = Cell::gate("y", GateKind::Inv, s(&["a"]));
        c.mode = Mode::Reconfigurable;
        n.add_cell(c).unwrap();
        assert!(matches!(n.validate(), Err(NetlistError::InvalidCell { .. })));
    }
}
