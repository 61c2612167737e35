// SPDX-License-Identifier: Apache-2.0

//! The obfuscation engine: converts reconfigurable LUTs into static gate
//! networks, slowest-on-the-critical-path first, until the requested share
//! of LUTs is static.
//!
//! Paths without any reconfigurable LUT can never yield a conversion, so
//! instead of excluding them one by one the engine asks the timing graph
//! for the worst path through at least one reconfigurable LUT directly.
//! Conversions at a lower obfuscation level always extend the sequence of
//! a higher level, so static sets of a sweep are nested.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{Cell, CellKind, LutMask, Netlist, NetlistError};
use crate::scalar::Scalar;
use crate::staticgen::{decompose_lut, GateNetwork, Signal, StaticGenError};
use crate::techlib::{cell_area, LibraryError, TechLibrary};
use crate::timing::{build_and_time, cmp_scalar, lut_support, TimingError, TimingOptions, TimingReport};

#[derive(Debug, Error)]
pub enum ObfuscationError {
    #[error("obfuscation percentage {0} is outside [0, 100]")]
    Percent(f64),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    StaticGen(#[from] StaticGenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObfuscationConfig {
    /// Share of LUTs that stays reconfigurable.
    pub obf_percent: f64,
    pub seed: u64,
}

impl ObfuscationConfig {
    pub fn new(obf_percent: f64) -> Self {
        ObfuscationConfig { obf_percent, seed: 0 }
    }
}

/// Number of LUTs to convert: floor(total × (100 − p) / 100).
pub fn static_target(total_luts: usize, obf_percent: f64) -> usize {
    let exact = total_luts as f64 * (100.0 - obf_percent) / 100.0;
    // Absorb representation error such as 29 × 0.05 = 1.4499999.
    ((exact + 1e-9).floor().max(0.0) as usize).min(total_luts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub endpoint: Option<String>,
    pub path: Vec<String>,
    pub lut: String,
    pub mask: String,
    pub width: u8,
    pub cp_before: f64,
    pub cp_after: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaReport<T> {
    pub area_re: T,
    pub area_st: T,
    pub other_static: T,
}

impl<T: Scalar> AreaReport<T> {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "area_re_um2": self.area_re.to_f64_lossy(),
            "area_st_um2": self.area_st.to_f64_lossy(),
            "other_static_um2": self.other_static.to_f64_lossy(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ObfuscationResult<T> {
    /// Hybrid output netlist with converted LUTs expanded into gates.
    pub netlist: Netlist,
    /// Converted LUT ids, in conversion order.
    pub l_st: Vec<String>,
    pub l_re: BTreeSet<String>,
    /// Masks of the converted LUTs.
    pub origin_masks: BTreeMap<String, LutMask>,
    pub networks: BTreeMap<String, GateNetwork<T>>,
    pub trace: Vec<TraceEntry>,
    pub fallback_count: usize,
    pub config: ObfuscationConfig,
    pub target: usize,
    pub timing: TimingReport<T>,
    pub area: AreaReport<T>,
}

impl<T: Scalar> ObfuscationResult<T> {
    pub fn trace_json(&self) -> serde_json::Value {
        serde_json::json!({
            "design": self.netlist.name,
            "obf_percent": self.config.obf_percent,
            "target": self.target,
            "fallback_count": self.fallback_count,
            "l_st": self.l_st,
            "l_re": self.l_re,
            "conversions": self.trace,
        })
    }
}

/// Origin masks recovered from a trace document.
pub fn origin_masks_from_trace(trace: &serde_json::Value) -> Result<BTreeMap<String, LutMask>, String> {
    let entries: Vec<TraceEntry> = serde_json::from_value(trace["conversions"].clone()).map_err(|e| e.to_string())?;
    entries
        .into_iter()
        .map(|e| LutMask::from_hex(e.width, &e.mask).map(|m| (e.lut, m)).map_err(|e| e.to_string()))
        .collect()
}

pub fn run_obfuscation<T: Scalar>(
    netlist: &Netlist,
    config: ObfuscationConfig,
    lib: &TechLibrary<T>,
) -> Result<ObfuscationResult<T>, ObfuscationError> {
    if !(0.0..=100.0).contains(&config.obf_percent) {
        return Err(ObfuscationError::Percent(config.obf_percent));
    }
    netlist.validate()?;
    let mut l_re: BTreeSet<String> = netlist.reconfigurable_luts().map(|c| c.id().to_string()).collect();
    let target = static_target(l_re.len(), config.obf_percent);
    let mut graph = build_and_time(netlist, lib, TimingOptions::default())?;
    let mut l_st = Vec::new();
    let mut networks = BTreeMap::new();
    let mut origin_masks = BTreeMap::new();
    let mut trace = Vec::new();
    let mut fallback_count = 0;
    let none = HashSet::new();

    let mut convert = |id: &str,
                       graph: &mut crate::timing::TimingGraph<T>,
                       l_re: &mut BTreeSet<String>|
     -> Result<(LutMask, f64, f64), ObfuscationError> {
        let mask = netlist.cell(id).and_then(Cell::lut_mask).expect("reconfigurable LUT");
        let cp_before = graph.report().cp.to_f64_lossy();
        let net = decompose_lut(mask, lib)?;
        graph.set_pin_delays(id, &net.arc_delay, net.delay)?;
        graph.update_timing(id)?;
        l_re.remove(id);
        l_st.push(id.to_string());
        networks.insert(id.to_string(), net);
        origin_masks.insert(id.to_string(), mask);
        Ok((mask, cp_before, graph.report().cp.to_f64_lossy()))
    };

    while trace.len() < target {
        let Some(path) = graph.find_critical_reconfigurable(&none) else { break };
        // Slowest reconfigurable LUT; ties go to the latest position.
        let mut slowest: Option<(T, &String)> = None;
        for c in &path.cells {
            if !l_re.contains(c) {
                continue;
            }
            let w = netlist.cell(c).and_then(Cell::lut_mask).map(|m| m.width()).unwrap_or(1);
            let d = lib.lut_delay(w);
            let better = match &slowest {
                None => true,
                Some((bd, _)) => cmp_scalar(d, *bd).is_ge(),
            };
            if better {
                slowest = Some((d, c));
            }
        }
        let Some((_, lut)) = slowest else { break };
        let lut = lut.clone();
        let (mask, cp_before, cp_after) = convert(&lut, &mut graph, &mut l_re)?;
        trace.push(TraceEntry {
            iteration: trace.len() + 1,
            endpoint: Some(path.endpoint.clone()),
            path: path.cells.clone(),
            lut,
            mask: mask.to_hex(),
            width: mask.width(),
            cp_before,
            cp_after,
            fallback: false,
        });
    }

    if trace.len() < target {
        // No timing path reaches the remaining LUTs.
        let fanout = netlist.fanout();
        let mut rest: Vec<(T, usize, String)> = l_re
            .iter()
            .map(|id| {
                let w = netlist.cell(id).and_then(Cell::lut_mask).map(|m| m.width()).unwrap_or(1);
                (lib.lut_delay(w), fanout.get(id.as_str()).map_or(0, Vec::len), id.clone())
            })
            .collect();
        rest.sort_by(|a, b| cmp_scalar(b.0, a.0).then(b.1.cmp(&a.1)).then_with(|| a.2.cmp(&b.2)));
        for (_, _, id) in rest.into_iter().take(target - trace.len()) {
            let (mask, cp_before, cp_after) = convert(&id, &mut graph, &mut l_re)?;
            fallback_count += 1;
            trace.push(TraceEntry {
                iteration: trace.len() + 1,
                endpoint: None,
                path: Vec::new(),
                lut: id,
                mask: mask.to_hex(),
                width: mask.width(),
                cp_before,
                cp_after,
                fallback: true,
            });
        }
    }

    let out = expand(netlist, &networks)?;
    let timing = build_and_time(&out, lib, TimingOptions::default())?.report();
    let area = area_report(&out, lib, &networks)?;
    Ok(ObfuscationResult {
        netlist: out,
        l_st,
        l_re,
        origin_masks,
        networks,
        trace,
        fallback_count,
        config,
        target,
        timing,
        area,
    })
}

/// Replaces each converted LUT with its gate network. Internal gates are
/// named `<lut>$g<k>`; the output gate keeps the LUT's net name.
pub fn expand<T: Scalar>(netlist: &Netlist, networks: &BTreeMap<String, GateNetwork<T>>) -> Result<Netlist, NetlistError> {
    let mut out = netlist.clone();
    for (id, net) in networks {
        let lut = out.remove_cell(id).ok_or_else(|| NetlistError::UnknownCell(id.clone()))?;
        let name = |k: usize| if k == net.output { id.clone() } else { format!("{id}$g{k}") };
        for (k, g) in net.gates.iter().enumerate() {
            let inputs = g
                .inputs
                .iter()
                .map(|s| match *s {
                    Signal::Input(p) => lut.inputs[p as usize].clone(),
                    Signal::Gate(j) => name(j),
                })
                .collect();
            let mut cell = Cell::gate(name(k), g.kind, inputs);
            cell.origin = Some(id.clone());
            out.add_cell(cell)?;
        }
    }
    out.validate()?;
    Ok(out)
}

fn area_report<T: Scalar>(
    netlist: &Netlist,
    lib: &TechLibrary<T>,
    networks: &BTreeMap<String, GateNetwork<T>>,
) -> Result<AreaReport<T>, LibraryError> {
    let mut r = AreaReport { area_re: T::zero(), area_st: T::zero(), other_static: T::zero() };
    for c in netlist.cells() {
        let a = cell_area(lib, c)?;
        if c.is_reconfigurable() {
            r.area_re = r.area_re + a;
        } else if c.origin.is_none() {
            r.other_static = r.other_static + a;
        }
    }
    r.area_st = networks.values().fold(T::zero(), |acc, n| acc + n.area);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseConstraint {
    pub lut_id: String,
    pub pin: usize,
    pub constant: u8,
}

/// Tie-offs for the pins a reconfigurable LUT does not depend on. Any value
/// deactivates such a pin; 0 is used.
pub fn gen_case_constraints(netlist: &Netlist) -> Vec<CaseConstraint> {
    let mut out = Vec::new();
    for c in netlist.reconfigurable_luts() {
        let CellKind::Lut(mask) = c.kind else { continue };
        let support = lut_support(mask);
        for pin in 0..mask.width() {
            if !support.contains(&pin) {
                out.push(CaseConstraint { lut_id: c.id().to_string(), pin: pin as usize, constant: 0 });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub obf: f64,
    pub sum_cp: T,
    pub cp: T,
    pub area_re: T,
    pub area_st: T,
    pub lut_re: usize,
    pub lut_st: usize,
}

pub const SWEEP_HEADER: &str = "obf,sum_cp_ns,cp_ns,area_re_um2,area_st_um2,lut_re,lut_st";

impl<T: Scalar> SweepRow<T> {
    pub fn from_result(r: &ObfuscationResult<T>) -> Self {
        SweepRow {
            obf: r.config.obf_percent,
            sum_cp: r.timing.sum_cp,
            cp: r.timing.cp,
            area_re: r.area.area_re,
            area_st: r.area.area_st,
            lut_re: r.l_re.len(),
            lut_st: r.l_st.len(),
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.4},{:.4},{},{}",
            self.obf,
            self.sum_cp.to_f64_lossy(),
            self.cp.to_f64_lossy(),
            self.area_re.to_f64_lossy(),
            self.area_st.to_f64_lossy(),
            self.lut_re,
            self.lut_st
        )
    }
}

/// Runs every level on its own copy of the netlist; rows keep the order of `levels`.
pub fn sweep<T: Scalar>(
    netlist: &Netlist,
    levels: &[f64],
    lib: &TechLibrary<T>,
) -> Result<Vec<SweepRow<T>>, ObfuscationError> {
    levels
        .par_iter()
        .map(|&p| run_obfuscation(netlist, ObfuscationConfig::new(p), lib).map(|r| SweepRow::from_result(&r)))
        .collect()
}

pub fn sweep_csv<T: Scalar>(rows: &[SweepRow<T>]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}
