// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{CellKind, Mode, Netlist};

/// Cell and port counts of a netlist.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetlistStats {
    /// Reconfigurable LUTs, indexed by width (index 0 unused).
    pub lut_re: [usize; 7],
    /// Static-mode LUT cells, indexed by width.
    pub lut_static: [usize; 7],
    /// Number of distinct LUTs that were converted into static gates.
    pub lut_st_origin: usize,
    pub ffs: usize,
    pub gates: BTreeMap<String, usize>,
    pub inputs: usize,
    pub outputs: usize,
}

impl NetlistStats {
    pub fn total_lut_re(&self) -> usize {
        self.lut_re.iter().sum()
    }

    pub fn total_gates(&self) -> usize {
        self.gates.values().sum()
    }

    /// LUTs of the source design: reconfigurable, static-mode and converted.
    pub fn total_luts(&self) -> usize {
        self.total_lut_re() + self.lut_static.iter().sum::<usize>() + self.lut_st_origin
    }
}

pub fn stats(netlist: &Netlist) -> NetlistStats {
    let mut s = NetlistStats { inputs: netlist.inputs.len(), outputs: netlist.outputs.len(), ..Default::default() };
    let mut origins = BTreeSet::new();
    for c in netlist.cells() {
        match &c.kind {
            CellKind::Lut(m) => match c.mode {
                Mode::Reconfigurable => s.lut_re[m.width() as usize] += 1,
                Mode::Static => s.lut_static[m.width() as usize] += 1,
            },
            CellKind::Ff { .. } => s.ffs += 1,
            CellKind::Gate(g) => *s.gates.entry(g.name().to_string()).or_default() += 1,
        }
        if let Some(o) = &c.origin {
            origins.insert(o.as_str());
        }
    }
    s.lut_st_origin = origins.len();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{Cell, GateKind, LutMask};

    #[test]
    fn empty_netlist_is_all_zero() {
        let s = stats(&Netlist::new("empty"));
        assert_eq!(s, NetlistStats::default());
        assert_eq!(s.total_luts(), 0);
    }

    #[test]
    fn counts_by_width_and_origin() {
        let mut n = Netlist::new("t");
        n.add_input("a");
        n.add_input("b");
        n.add_cell(Cell::lut("x", vec!["a".into(), "b".into()], LutMask::new(2, 8).unwrap())).unwrap();
        let mut g = Cell::gate("y", GateKind::Inv, vec!["a".into()]);
        g.origin = Some("y".into());
        n.add_cell(g).unwrap();
        n.add_cell(Cell::ff("q", vec!["x".into()], false)).unwrap();
        n.add_output("q");
        let s = stats(&n);
        assert_eq!(s.lut_re[2], 1);
        assert_eq!(s.lut_st_origin, 1);
        assert_eq!(s.ffs, 1);
        assert_eq!(s.total_gates(), 1);
        assert_eq!(s.total_luts(), 2);
        assert_eq!((s.inputs, s.outputs), (2, 1));
    }
}
