// SPDX-License-Identifier: Apache-2.0

//! Structural Verilog writer for hybrid netlists.
//!
//! Reconfigurable LUTs become `LUT<n>` macro instances with data pins
//! `I0..I<n-1>`, output `O` and the configuration pins `serial_in`,
//! `serial_out` and `enable`. The macros are daisy-chained in
//! [`chain_order`](crate::bitstream::chain_order). Masks are not written:
//! the configuration is delivered by the bitstream.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{CellKind, GateKind, Mode, Netlist, NetlistError};
use crate::bitstream::chain_order;

const KEYWORDS: &[&str] = &[
    "always", "and", "assign", "begin", "buf", "case", "default", "else", "end", "endcase", "endmodule", "for",
    "function", "if", "initial", "inout", "input", "integer", "module", "nand", "nor", "not", "or", "output",
    "parameter", "reg", "supply0", "supply1", "wire", "xnor", "xor",
];

const SERIAL_IN: &str = "serial_in";
const SERIAL_OUT: &str = "serial_out";
const ENABLE: &str = "enable";

/// Maps a net or cell name onto a plain Verilog identifier.
pub fn legalize_identifier(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '$' { c } else { '_' })
        .collect();
    if out.is_empty() || !(out.as_bytes()[0].is_ascii_alphabetic() || out.as_bytes()[0] == b'_') {
        out.insert_str(0, "n_");
    }
    if KEYWORDS.contains(&out.as_str()) {
        out.push('_');
    }
    out
}

struct Names {
    map: BTreeMap<String, String>,
    taken: BTreeMap<String, String>,
}

impl Names {
    fn new() -> Self {
        Names { map: BTreeMap::new(), taken: BTreeMap::new() }
    }

    fn reserve(&mut self, original: &str, legal: String) -> Result<(), NetlistError> {
        if self.map.contains_key(original) {
            return Ok(());
        }
        if let Some(prev) = self.taken.get(&legal) {
            return Err(NetlistError::NameCollision(prev.clone(), original.to_string(), legal));
        }
        self.taken.insert(legal.clone(), original.to_string());
        self.map.insert(original.to_string(), legal);
        Ok(())
    }

    fn add(&mut self, original: &str) -> Result<(), NetlistError> {
        self.reserve(original, legalize_identifier(original))
    }

    fn get(&self, original: &str) -> &str {
        &self.map[original]
    }
}

/// Writes the hybrid netlist as structural Verilog.
pub fn emit_verilog(netlist: &Netlist) -> Result<String, NetlistError> {
    netlist.validate()?;
    let chain = chain_order(netlist);
    let mut names = Names::new();
    if !chain.is_empty() {
        for pin in [SERIAL_IN, SERIAL_OUT, ENABLE] {
            names.reserve(&format!("\0{pin}"), pin.to_string())?;
        }
    }
    for net in netlist.nets() {
        names.add(net)?;
    }
    let inputs: BTreeSet<&str> = netlist.inputs.iter().map(String::as_str).collect();
    // An output that is also an input gets its own port name.
    let mut out_ports = Vec::new();
    for o in &netlist.outputs {
        if inputs.contains(o.as_str()) {
            let port = format!("{o}__out");
            names.add(&port)?;
            out_ports.push((names.get(&port).to_string(), Some(o.as_str())));
        } else {
            out_ports.push((names.get(o).to_string(), None));
        }
    }
    let chain_wires: Vec<String> = (1..chain.len()).map(|k| format!("easic_chain_{k}")).collect();
    for w in &chain_wires {
        names.reserve(&format!("\0{w}"), w.clone())?;
    }
    let mut instances = BTreeSet::new();
    for c in netlist.cells() {
        let inst = format!("i_{}", legalize_identifier(c.id()));
        if !instances.insert(inst.clone()) {
            return Err(NetlistError::NameCollision(c.id().to_string(), c.id().to_string(), inst));
        }
    }

    let mut v = String::new();
    let module = legalize_identifier(&netlist.name);
    let mut ports: Vec<String> = netlist.inputs.iter().map(|i| names.get(i).to_string()).collect();
    ports.extend(out_ports.iter().map(|(p, _)| p.clone()));
    if !chain.is_empty() {
        ports.extend([SERIAL_IN, ENABLE, SERIAL_OUT].map(String::from));
    }
    let _ = writeln!(v, "// eASIC netlist `{}`: {} reconfigurable LUT(s) in the configuration chain", netlist.name, chain.len());
    let _ = writeln!(v, "module {module} ({});", ports.join(", "));
    for i in &netlist.inputs {
        let _ = writeln!(v, "  input {};", names.get(i));
    }
    for (p, _) in &out_ports {
        let _ = writeln!(v, "  output {p};");
    }
    if !chain.is_empty() {
        let _ = writeln!(v, "  input {SERIAL_IN};\n  input {ENABLE};\n  output {SERIAL_OUT};");
    }
    let outputs: BTreeSet<&str> = netlist.outputs.iter().map(String::as_str).collect();
    for c in netlist.cells() {
        if !outputs.contains(c.id()) {
            let _ = writeln!(v, "  wire {};", names.get(c.id()));
        }
    }
    for w in &chain_wires {
        let _ = writeln!(v, "  wire {w};");
    }
    for (p, src) in &out_ports {
        if let Some(src) = src {
            let _ = writeln!(v, "  assign {p} = {};", names.get(src));
        }
    }

    let position: BTreeMap<&str, usize> = chain.iter().enumerate().map(|(k, (id, _))| (id.as_str(), k)).collect();
    for c in netlist.cells() {
        let inst = format!("i_{}", legalize_identifier(c.id()));
        let pin = |n: &String| names.get(n).to_string();
        let out = names.get(c.id());
        match &c.kind {
            CellKind::Lut(mask) if c.mode == Mode::Reconfigurable => {
                let k = position[c.id()];
                let sin = if k == 0 { SERIAL_IN.to_string() } else { chain_wires[k - 1].clone() };
                let sout = if k + 1 == chain.len() { SERIAL_OUT.to_string() } else { chain_wires[k].clone() };
                let mut conns: Vec<String> =
                    c.inputs.iter().enumerate().map(|(j, n)| format!(".I{j}({})", pin(n))).collect();
                conns.push(format!(".O({out})"));
                conns.push(format!(".serial_in({sin})"));
                conns.push(format!(".enable({ENABLE})"));
                conns.push(format!(".serial_out({sout})"));
                let _ = writeln!(v, "  LUT{} {inst} ({});", mask.width(), conns.join(", "));
            }
            CellKind::Lut(mask) => {
                let mut conns: Vec<String> =
                    c.inputs.iter().enumerate().map(|(j, n)| format!(".I{j}({})", pin(n))).collect();
                conns.push(format!(".O({out})"));
                let w = mask.num_rows();
                let _ = writeln!(
                    v,
                    "  LUT{}_ST #(.INIT({w}'h{})) {inst} ({});",
                    mask.width(),
                    mask.to_hex(),
                    conns.join(", ")
                );
            }
            CellKind::Ff { .. } => {
                let ck = c.inputs.get(1).map(pin).unwrap_or_default();
                let _ = writeln!(v, "  DFF {inst} (.D({}), .CK({ck}), .Q({out}));", pin(&c.inputs[0]));
            }
            CellKind::Gate(g) => {
                let pins: &[&str] = match g {
                    GateKind::Inv | GateKind::Buf => &["A"],
                    GateKind::Mux2 => &["S", "A", "B"],
                    GateKind::Tie0 | GateKind::Tie1 => &[],
                    _ => &["A", "B"],
                };
                let mut conns: Vec<String> =
                    pins.iter().zip(&c.inputs).map(|(p, n)| format!(".{p}({})", pin(n))).collect();
                conns.push(format!(".Y({out})"));
                let _ = writeln!(v, "  {} {inst} ({});", g.name(), conns.join(", "));
            }
        }
    }
    v.push_str("endmodule\n");
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_blif, Cell, LutMask};

    #[test]
    fn legalization() {
        assert_eq!(legalize_identifier("a[3]"), "a_3_");
        assert_eq!(legalize_identifier("3x"), "n_3x");
        assert_eq!(legalize_identifier("wire"), "wire_");
        assert_eq!(legalize_identifier("u1$g0"), "u1$g0");
    }

    #[test]
    fn no_config_ports_without_luts() {
        let mut n = Netlist::new("t");
        n.add_input("a");
        n.add_cell(Cell::gate("y", GateKind::Inv, vec!["a".into()])).unwrap();
        n.add_output("y");
        let v = emit_verilog(&n).unwrap();
        assert!(!v.contains("serial_in"));
        assert!(!v.contains("serial_out"));
        assert!(v.contains("INV i_y (.A(a), .Y(y));"));
    }

    #[test]
    fn two_luts_are_daisy_chained() {
        let n = parse_blif(".model t\n.inputs a b\n.outputs y z\n.names a b z\n11 1\n.names a b y\n1- 1\n-1 1\n.end\n")
            .unwrap();
        let v = emit_verilog(&n).unwrap();
        // chain order is by id: y then z
        assert!(v.contains("LUT2 i_y (.I0(a), .I1(b), .O(y), .serial_in(serial_in), .enable(enable), .serial_out(easic_chain_1));"));
        assert!(v.contains("LUT2 i_z (.I0(a), .I1(b), .O(z), .serial_in(easic_chain_1), .enable(enable), .serial_out(serial_out));"));
        assert!(v.contains("module t (a, b, y, z, serial_in, enable, serial_out);"));
    }

    #[test]
    fn collision_reports_both_ids() {
        let mut n = Netlist::new("t");
        n.add_input("a.b");
        n.add_input("a_b");
        n.add_cell(Cell::gate("y", GateKind::And2, vec!["a.b".into(), "a_b".into()])).unwrap();
        n.add_output("y");
        match emit_verilog(&n) {
            Err(NetlistError::NameCollision(x, y, legal)) => {
                assert_eq!(legal, "a_b");
                let mut pair = [x, y];
                pair.sort();
                assert_eq!(pair, ["a.b".to_string(), "a_b".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_pin_collision() {
        let mut n = Netlist::new("t");
        n.add_input("enable");
        n.add_cell(Cell::lut("y", vec!["enable".into()], LutMask::new(1, 2).unwrap())).unwrap();
        n.add_output("y");
        assert!(matches!(emit_verilog(&n), Err(NetlistError::NameCollision(..))));
    }

    #[test]
    fn deterministic() {
        let n = parse_blif(".model t\n.inputs a b clk\n.outputs q\n.names a b d\n01 1\n.latch d q re clk 0\n.end\n")
            .unwrap();
        assert_eq!(emit_verilog(&n).unwrap(), emit_verilog(&n).unwrap());
    }
}
