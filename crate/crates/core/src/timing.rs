// SPDX-License-Identifier: Apache-2.0

//! Static timing analysis over hybrid netlists.
//!
//! The graph has one node per net: primary inputs (arrival 0), flip-flop
//! outputs (arrival clk-to-Q) and combinational cell outputs. Edges are the
//! pin-to-output arcs of combinational cells. Endpoints are primary outputs
//! and flip-flop D pins, the latter adding setup time.
//!
//! Reconfigurable LUTs only get arcs from the pins their mask depends on
//! (see [`lut_support`]); the other pins are held constant by case
//! constraints once the device is programmed.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{CellKind, LutMask, Netlist, NetlistError};
use crate::scalar::Scalar;
use crate::techlib::{cell_delay, LibraryError, TechLibrary};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimingError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("unknown timing node `{0}`")]
    UnknownNode(String),
}

/// Input positions the mask actually depends on.
pub fn lut_support(mask: LutMask) -> BTreeSet<u8> {
    (0..mask.width())
        .filter(|&i| (0..mask.num_rows()).any(|row| mask.eval(row) != mask.eval(row ^ (1 << i))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimingOptions {
    /// Drop arcs from pins outside a reconfigurable LUT's support.
    pub prune_unsupported_arcs: bool,
}

impl Default for TimingOptions {
    fn default() -> Self {
        TimingOptions { prune_unsupported_arcs: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeKind {
    Input,
    FfOutput,
    Comb,
}

#[derive(Debug, Clone, PartialEq)]
struct Node<T> {
    name: String,
    kind: NodeKind,
    /// All data input nets, in pin order (combinational nodes only).
    pins: Vec<usize>,
    /// Timing arcs: (input net, delay).
    arcs: Vec<(usize, T)>,
    /// Arrival of a combinational node without arcs.
    intrinsic: T,
    reconfigurable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint<T> {
    pub id: String,
    net: usize,
    /// Setup time for flip-flop endpoints, zero for primary outputs.
    pub setup: T,
    /// Capturing flip-flop, if any.
    pub capture: Option<String>,
}

/// Stable path identity: FNV-1a over the endpoint id and cell sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathId(pub u64);

impl PathId {
    pub fn of(endpoint: &str, cells: &[String]) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        eat(endpoint.as_bytes());
        for c in cells {
            eat(c.as_bytes());
        }
        PathId(h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedPath<T> {
    /// Cells from startpoint to endpoint. A launching or capturing flip-flop
    /// appears as the first or last element.
    pub cells: Vec<String>,
    pub delay: T,
    pub endpoint: String,
}

impl<T> TimedPath<T> {
    pub fn id(&self) -> PathId {
        PathId::of(&self.endpoint, &self.cells)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointTiming<T> {
    pub id: String,
    pub arrival: T,
    pub worst_path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport<T> {
    pub cp: T,
    pub sum_cp: T,
    pub endpoints: Vec<EndpointTiming<T>>,
    pub warning: Option<String>,
}

impl<T: Scalar> TimingReport<T> {
    /// Maximum clock frequency in MHz (delays in ns); `None` when CP is zero.
    pub fn fmax_mhz(&self) -> Option<f64> {
        let cp = self.cp.to_f64_lossy();
        (cp > 0.0).then(|| 1000.0 / cp)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "cp_ns": self.cp.to_f64_lossy(),
            "sum_cp_ns": self.sum_cp.to_f64_lossy(),
            "fmax_mhz": self.fmax_mhz(),
            "warning": self.warning,
            "endpoints": self.endpoints.iter().map(|e| serde_json::json!({
                "id": e.id,
                "arrival_ns": e.arrival.to_f64_lossy(),
                "worst_path": e.worst_path,
            })).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingGraph<T> {
    nodes: Vec<Node<T>>,
    index: HashMap<String, usize>,
    topo: Vec<usize>,
    topo_pos: Vec<usize>,
    fanout: Vec<Vec<usize>>,
    arrival: Vec<T>,
    endpoints: Vec<Endpoint<T>>,
    clk2q: T,
}

/// Builds the timing graph and computes arrivals in one topological pass.
pub fn build_and_time<T: Scalar>(
    netlist: &Netlist,
    lib: &TechLibrary<T>,
    options: TimingOptions,
) -> Result<TimingGraph<T>, TimingError> {
    let order = netlist.comb_order()?;
    let mut nodes = Vec::new();
    let mut index = HashMap::new();
    for net in netlist.nets() {
        let kind = match netlist.cell(net) {
            None => NodeKind::Input,
            Some(c) if c.is_ff() => NodeKind::FfOutput,
            Some(_) => NodeKind::Comb,
        };
        index.insert(net.to_string(), nodes.len());
        nodes.push(Node {
            name: net.to_string(),
            kind,
            pins: Vec::new(),
            arcs: Vec::new(),
            intrinsic: T::zero(),
            reconfigurable: false,
        });
    }
    for cell in netlist.cells().filter(|c| !c.is_ff()) {
        let i = index[cell.id()];
        let d = cell_delay(lib, cell)?;
        let pins: Vec<usize> = cell.inputs.iter().map(|n| index[n.as_str()]).collect();
        let keep: Vec<bool> = match cell.kind {
            CellKind::Lut(mask) if cell.is_reconfigurable() && options.prune_unsupported_arcs => {
                let support = lut_support(mask);
                (0..pins.len()).map(|p| support.contains(&(p as u8))).collect()
            }
            _ => vec![true; pins.len()],
        };
        let node = &mut nodes[i];
        node.arcs = pins.iter().zip(&keep).filter(|(_, k)| **k).map(|(&p, _)| (p, d)).collect();
        node.pins = pins;
        node.intrinsic = d;
        node.reconfigurable = cell.is_reconfigurable();
    }
    let topo: Vec<usize> = order.iter().map(|c| index[c.id()]).collect();
    let mut topo_pos = vec![usize::MAX; nodes.len()];
    for (k, &n) in topo.iter().enumerate() {
        topo_pos[n] = k;
    }
    let mut endpoints = Vec::new();
    for o in &netlist.outputs {
        endpoints.push(Endpoint { id: o.clone(), net: index[o.as_str()], setup: T::zero(), capture: None });
    }
    for c in netlist.cells().filter(|c| c.is_ff()) {
        endpoints.push(Endpoint {
            id: format!("{}/D", c.id()),
            net: index[c.inputs[0].as_str()],
            setup: lib.ff_setup,
            capture: Some(c.id().to_string()),
        });
    }
    endpoints.sort_by(|a, b| a.id.cmp(&b.id));
    let mut graph = TimingGraph {
        fanout: vec![Vec::new(); nodes.len()],
        arrival: vec![T::zero(); nodes.len()],
        nodes,
        index,
        topo,
        topo_pos,
        endpoints,
        clk2q: lib.ff_clk2q,
    };
    graph.rebuild_fanout();
    graph.recompute_all();
    Ok(graph)
}

impl<T: Scalar> TimingGraph<T> {
    fn rebuild_fanout(&mut self) {
        for f in &mut self.fanout {
            f.clear();
        }
        for &n in &self.topo {
            for &(p, _) in &self.nodes[n].arcs {
                self.fanout[p].push(n);
            }
        }
        for f in &mut self.fanout {
            f.sort_unstable();
            f.dedup();
        }
    }

    fn node_arrival(&self, n: usize) -> T {
        let node = &self.nodes[n];
        match node.kind {
            NodeKind::Input => T::zero(),
            NodeKind::FfOutput => self.clk2q,
            NodeKind::Comb => node
                .arcs
                .iter()
                .map(|&(p, d)| self.arrival[p] + d)
                .reduce(|a, b| a.max_of(b))
                .unwrap_or(node.intrinsic),
        }
    }

    /// Full topological recomputation of every arrival.
    pub fn recompute_all(&mut self) {
        for n in 0..self.nodes.len() {
            if self.nodes[n].kind != NodeKind::Comb {
                self.arrival[n] = self.node_arrival(n);
            }
        }
        for k in 0..self.topo.len() {
            let n = self.topo[k];
            self.arrival[n] = self.node_arrival(n);
        }
    }

    fn node(&self, name: &str) -> Result<usize, TimingError> {
        self.index.get(name).copied().ok_or_else(|| TimingError::UnknownNode(name.to_string()))
    }

    pub fn arrival(&self, net: &str) -> Option<T> {
        self.index.get(net).map(|&i| self.arrival[i])
    }

    pub fn endpoints(&self) -> &[Endpoint<T>] {
        &self.endpoints
    }

    pub fn endpoint_arrival(&self, e: &Endpoint<T>) -> T {
        self.arrival[e.net] + e.setup
    }

    pub fn is_reconfigurable(&self, cell: &str) -> bool {
        self.index.get(cell).is_some_and(|&i| self.nodes[i].reconfigurable)
    }

    /// Gives every arc of `cell` the same delay. Call [`update_timing`](Self::update_timing) afterwards.
    pub fn set_uniform_delay(&mut self, cell: &str, delay: T) -> Result<(), TimingError> {
        let i = self.node(cell)?;
        let node = &mut self.nodes[i];
        for arc in &mut node.arcs {
            arc.1 = delay;
        }
        node.intrinsic = delay;
        Ok(())
    }

    /// Replaces the arcs of `cell` with per-pin delays (`None` = no arc) and
    /// marks it static. Used when a LUT is swapped for a gate network.
    pub fn set_pin_delays(&mut self, cell: &str, pins: &[Option<T>], intrinsic: T) -> Result<(), TimingError> {
        let i = self.node(cell)?;
        let node = &mut self.nodes[i];
        node.arcs = node.pins.iter().zip(pins).filter_map(|(&p, d)| d.map(|d| (p, d))).collect();
        node.intrinsic = intrinsic;
        node.reconfigurable = false;
        self.rebuild_fanout();
        Ok(())
    }

    /// Recomputes arrivals over the transitive fan-out of `cell`.
    pub fn update_timing(&mut self, cell: &str) -> Result<usize, TimingError> {
        let start = self.node(cell)?;
        if self.nodes[start].kind != NodeKind::Comb {
            return Ok(0);
        }
        let mut queued = vec![false; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        heap.push(std::cmp::Reverse(self.topo_pos[start]));
        queued[start] = true;
        let mut touched = 0;
        while let Some(std::cmp::Reverse(pos)) = heap.pop() {
            let n = self.topo[pos];
            touched += 1;
            let new = self.node_arrival(n);
            let changed = new != self.arrival[n];
            self.arrival[n] = new;
            if changed || n == start {
                for &s in &self.fanout[n] {
                    if !queued[s] {
                        queued[s] = true;
                        heap.push(std::cmp::Reverse(self.topo_pos[s]));
                    }
                }
            }
        }
        Ok(touched)
    }

    pub fn report(&self) -> TimingReport<T> {
        let endpoints: Vec<EndpointTiming<T>> = self
            .endpoints
            .iter()
            .map(|e| EndpointTiming {
                id: e.id.clone(),
                arrival: self.endpoint_arrival(e),
                worst_path: self.backtrack(e).cells,
            })
            .collect();
        let warning = endpoints.is_empty().then(|| "design has no timing endpoints".to_string());
        let cp = endpoints.iter().map(|e| e.arrival).reduce(|a, b| a.max_of(b)).unwrap_or_else(T::zero);
        let sum_cp = endpoints.iter().fold(T::zero(), |acc, e| acc + e.arrival);
        TimingReport { cp, sum_cp, endpoints, warning }
    }

    /// Worst path into an endpoint, following max-arrival predecessors
    /// (ties towards the lexicographically smaller net).
    pub fn backtrack(&self, e: &Endpoint<T>) -> TimedPath<T> {
        let mut cells = Vec::new();
        let mut n = e.net;
        loop {
            let node = &self.nodes[n];
            match node.kind {
                NodeKind::Input => break,
                NodeKind::FfOutput => {
                    cells.push(node.name.clone());
                    break;
                }
                NodeKind::Comb => {
                    cells.push(node.name.clone());
                    let best = node.arcs.iter().max_by(|a, b| {
                        let (va, vb) = (self.arrival[a.0] + a.1, self.arrival[b.0] + b.1);
                        cmp_scalar(va, vb).then_with(|| self.nodes[b.0].name.cmp(&self.nodes[a.0].name))
                    });
                    match best {
                        Some(&(p, _)) => n = p,
                        None => break,
                    }
                }
            }
        }
        cells.reverse();
        if let Some(ff) = &e.capture {
            cells.push(ff.clone());
        }
        TimedPath { cells, delay: self.endpoint_arrival(e), endpoint: e.id.clone() }
    }

    /// Worst path whose id is not in `excluded`.
    pub fn find_critical(&self, excluded: &HashSet<PathId>) -> Option<TimedPath<T>> {
        self.search(excluded, false)
    }

    /// Worst non-excluded path through at least one reconfigurable LUT.
    pub fn find_critical_reconfigurable(&self, excluded: &HashSet<PathId>) -> Option<TimedPath<T>> {
        self.search(excluded, true)
    }

    /// Max arrival over paths that contain a reconfigurable LUT.
    fn required_arrivals(&self) -> Vec<Option<T>> {
        let mut req: Vec<Option<T>> = vec![None; self.nodes.len()];
        for &n in &self.topo {
            let node = &self.nodes[n];
            req[n] = if node.reconfigurable {
                Some(self.arrival[n])
            } else {
                node.arcs
                    .iter()
                    .filter_map(|&(p, d)| req[p].map(|a| a + d))
                    .reduce(|a, b| a.max_of(b))
            };
        }
        req
    }

    fn search(&self, excluded: &HashSet<PathId>, require: bool) -> Option<TimedPath<T>> {
        let req = require.then(|| self.required_arrivals());
        let bound = |n: usize, satisfied: bool| -> Option<T> {
            match &req {
                Some(r) if !satisfied => r[n],
                _ => Some(self.arrival[n]),
            }
        };
        let mut order: Vec<(T, &Endpoint<T>)> =
            self.endpoints.iter().filter_map(|e| bound(e.net, false).map(|b| (b + e.setup, e))).collect();
        order.sort_by(|a, b| cmp_scalar(b.0, a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        let mut best: Option<TimedPath<T>> = None;
        for (ub, e) in order {
            if let Some(b) = &best {
                match cmp_scalar(ub, b.delay) {
                    Ordering::Less => break,
                    Ordering::Equal if e.id > b.endpoint => break,
                    _ => {}
                }
            }
            if let Some(p) = self.search_endpoint(e, excluded, require, &bound) {
                let better = match &best {
                    None => true,
                    Some(b) => match cmp_scalar(p.delay, b.delay) {
                        Ordering::Greater => true,
                        Ordering::Equal => p.endpoint < b.endpoint,
                        Ordering::Less => false,
                    },
                };
                if better {
                    best = Some(p);
                }
            }
        }
        best
    }

    /// Best-first backward enumeration of paths into one endpoint, in
    /// non-increasing delay order, until one is not excluded.
    fn search_endpoint(
        &self,
        e: &Endpoint<T>,
        excluded: &HashSet<PathId>,
        require: bool,
        bound: &dyn Fn(usize, bool) -> Option<T>,
    ) -> Option<TimedPath<T>> {
        struct State<T> {
            node: usize,
            suffix: T,
            satisfied: bool,
            parent: Option<usize>,
        }
        let mut states: Vec<State<T>> = Vec::new();
        let mut heap: BinaryHeap<Entry<T>> = BinaryHeap::new();
        let mut seq = 0u64;
        let mut push = |states: &mut Vec<State<T>>, heap: &mut BinaryHeap<Entry<T>>, st: State<T>, prio: T, name: &str| {
            states.push(st);
            seq += 1;
            heap.push(Entry { prio, name: name.to_string(), seq, state: states.len() - 1 });
        };
        if let Some(b) = bound(e.net, false) {
            let st = State { node: e.net, suffix: e.setup, satisfied: false, parent: None };
            push(&mut states, &mut heap, st, b + e.setup, &self.nodes[e.net].name);
        }
        while let Some(entry) = heap.pop() {
            let (n, suffix, satisfied) = {
                let s = &states[entry.state];
                (s.node, s.suffix, s.satisfied)
            };
            let node = &self.nodes[n];
            let satisfied_here = satisfied || node.reconfigurable;
            let is_start = node.kind != NodeKind::Comb || node.arcs.is_empty();
            if is_start {
                if require && !satisfied_here {
                    continue;
                }
                let mut cells = Vec::new();
                if node.kind != NodeKind::Input {
                    cells.push(node.name.clone());
                }
                let mut cur = states[entry.state].parent;
                while let Some(k) = cur {
                    cells.push(self.nodes[states[k].node].name.clone());
                    cur = states[k].parent;
                }
                if let Some(ff) = &e.capture {
                    cells.push(ff.clone());
                }
                let path = TimedPath { cells, delay: self.arrival[n] + suffix, endpoint: e.id.clone() };
                if !excluded.contains(&path.id()) {
                    return Some(self.forward_delay(path, e));
                }
                continue;
            }
            for &(p, d) in &node.arcs {
                let sat = satisfied_here || !require;
                if let Some(b) = bound(p, sat) {
                    let st = State { node: p, suffix: suffix + d, satisfied: satisfied_here, parent: Some(entry.state) };
                    push(&mut states, &mut heap, st, b + suffix + d, &self.nodes[p].name);
                }
            }
        }
        None
    }

    /// Recomputes a path's delay front to back from the arc delays.
    fn forward_delay(&self, mut path: TimedPath<T>, e: &Endpoint<T>) -> TimedPath<T> {
        let comb: Vec<usize> = path
            .cells
            .iter()
            .filter_map(|c| self.index.get(c).copied())
            .filter(|&i| self.nodes[i].kind == NodeKind::Comb)
            .collect();
        let first = path.cells.first().and_then(|c| self.index.get(c).copied());
        let mut t = match first.map(|i| self.nodes[i].kind) {
            Some(NodeKind::FfOutput) => self.clk2q,
            _ => T::zero(),
        };
        let mut prev: Option<usize> = first.filter(|&i| self.nodes[i].kind == NodeKind::FfOutput);
        for (k, &n) in comb.iter().enumerate() {
            let node = &self.nodes[n];
            let d = match prev {
                Some(p) => node.arcs.iter().filter(|a| a.0 == p).map(|a| a.1).reduce(|a, b| a.max_of(b)),
                None if k == 0 && node.arcs.is_empty() => Some(node.intrinsic),
                None => {
                    // Path starts at a primary input feeding this node.
                    let pi_arcs = node.arcs.iter().filter(|a| self.nodes[a.0].kind == NodeKind::Input);
                    pi_arcs.map(|a| a.1).reduce(|a, b| a.max_of(b))
                }
            };
            t = t + d.unwrap_or(node.intrinsic);
            prev = Some(n);
        }
        path.delay = t + e.setup;
        path
    }
}

struct Entry<T> {
    prio: T,
    name: String,
    seq: u64,
    state: usize,
}

impl<T: Scalar> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Entry<T> {}

impl<T: Scalar> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Entry<T> {
    // Max-heap: larger priority first, then smaller name, then FIFO.
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_scalar(self.prio, other.prio)
            .then_with(|| other.name.cmp(&self.name))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub(crate) fn cmp_scalar<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}
