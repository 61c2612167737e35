// SPDX-License-Identifier: Apache-2.0

//! Delay and area model for static gates, flip-flops and LUT macros.
//!
//! Configuration file schema (delays in ns, areas in µm²):
//!
//! ```json
//! {
//!   "gates": { "INV": {"delay": 0.02, "area": 1.04}, "...": {} },
//!   "luts":  { "1": {"delay": 0.10, "area": 60.0}, "...": {}, "6": {} },
//!   "ff":    { "clk2q": 0.09, "setup": 0.04, "area": 6.24 }
//! }
//! ```
//!
//! Every gate kind and every LUT width 1..=6 must be present.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{Cell, CellKind, GateKind};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LibraryError {
    #[error("library config: {0}")]
    Parse(String),
    #[error("library is missing {what} for {kind}")]
    Missing { kind: String, what: &'static str },
    #[error("library value for {kind} {what} is invalid: {value}")]
    Invalid { kind: String, what: &'static str, value: String },
    #[error("unknown cell kind `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechLibrary<T> {
    pub gate_delay: BTreeMap<GateKind, T>,
    pub gate_area: BTreeMap<GateKind, T>,
    /// Indexed by LUT width; index 0 is unused.
    pub lut_delay: [T; 7],
    pub lut_area: [T; 7],
    pub ff_clk2q: T,
    pub ff_setup: T,
    pub ff_area: T,
    /// Set when some `lut_delay(n) < n * delay(MUX2)`.
    pub calibration_warning: bool,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    delay: Option<f64>,
    area: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FfEntry {
    clk2q: Option<f64>,
    setup: Option<f64>,
    area: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Config {
    gates: BTreeMap<String, Entry>,
    luts: BTreeMap<String, Entry>,
    ff: FfEntry,
}

fn field<T: Scalar>(kind: &str, what: &'static str, v: Option<f64>, positive: bool) -> Result<T, LibraryError> {
    let v = v.ok_or_else(|| LibraryError::Missing { kind: kind.to_string(), what })?;
    let ok = v.is_finite() && if positive { v > 0.0 } else { v >= 0.0 };
    if !ok {
        return Err(LibraryError::Invalid { kind: kind.to_string(), what, value: v.to_string() });
    }
    Ok(T::from_decimal(v))
}

impl<T: Scalar> TechLibrary<T> {
    /// Parses a JSON library description.
    pub fn load(text: &str) -> Result<Self, LibraryError> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| LibraryError::Parse(e.to_string()))?;
        for name in cfg.gates.keys() {
            if GateKind::from_name(name).is_none() {
                return Err(LibraryError::UnknownKind(name.clone()));
            }
        }
        for key in cfg.luts.keys() {
            if !matches!(key.as_str(), "1" | "2" | "3" | "4" | "5" | "6") {
                return Err(LibraryError::UnknownKind(format!("LUT{key}")));
            }
        }
        let mut gate_delay = BTreeMap::new();
        let mut gate_area = BTreeMap::new();
        for kind in GateKind::ALL {
            let entry = cfg
                .gates
                .get(kind.name())
                .ok_or_else(|| LibraryError::Missing { kind: kind.name().into(), what: "entry" })?;
            gate_delay.insert(kind, field(kind.name(), "delay", entry.delay, false)?);
            gate_area.insert(kind, field(kind.name(), "area", entry.area, true)?);
        }
        let mut lut_delay = [T::zero(); 7];
        let mut lut_area = [T::zero(); 7];
        for n in 1..=6 {
            let name = format!("LUT{n}");
            let entry = cfg
                .luts
                .get(&n.to_string())
                .ok_or_else(|| LibraryError::Missing { kind: name.clone(), what: "entry" })?;
            lut_delay[n] = field(&name, "delay", entry.delay, false)?;
            lut_area[n] = field(&name, "area", entry.area, true)?;
        }
        let mut lib = TechLibrary {
            gate_delay,
            gate_area,
            lut_delay,
            lut_area,
            ff_clk2q: field("FF", "clk2q", cfg.ff.clk2q, false)?,
            ff_setup: field("FF", "setup", cfg.ff.setup, false)?,
            ff_area: field("FF", "area", cfg.ff.area, true)?,
            calibration_warning: false,
        };
        lib.calibration_warning = !lib.is_calibrated();
        Ok(lib)
    }

    /// Built-in library; satisfies the calibration constraint.
    ///
    /// Besides `lut_delay(n) >= n * MUX2`, it also keeps
    /// `INV + max(AND2, OR2) <= MUX2` and `BUF <= MUX2`, which bounds every
    /// per-pin arc of a decomposed LUT by `n * MUX2`.
    pub fn default_library() -> Self {
        // (kind, delay in ps, area in 1/100 µm²)
        let gates = [
            (GateKind::Inv, 20, 104),
            (GateKind::Buf, 30, 140),
            (GateKind::And2, 45, 208),
            (GateKind::Or2, 50, 208),
            (GateKind::Nand2, 30, 156),
            (GateKind::Nor2, 35, 156),
            (GateKind::Mux2, 70, 364),
            (GateKind::Tie0, 0, 104),
            (GateKind::Tie1, 0, 104),
        ];
        let luts = [(0, 0), (100, 6000), (160, 11000), (230, 19000), (300, 29000), (370, 37000), (440, 45500)];
        let ps = |v: i64| T::ratio(v, 1000);
        let um = |v: i64| T::ratio(v, 100);
        let mut lut_delay = [T::zero(); 7];
        let mut lut_area = [T::zero(); 7];
        for (n, (d, a)) in luts.iter().enumerate().skip(1) {
            lut_delay[n] = ps(*d);
            lut_area[n] = um(*a);
        }
        let lib = TechLibrary {
            gate_delay: gates.iter().map(|&(k, d, _)| (k, ps(d))).collect(),
            gate_area: gates.iter().map(|&(k, _, a)| (k, um(a))).collect(),
            lut_delay,
            lut_area,
            ff_clk2q: ps(90),
            ff_setup: ps(40),
            ff_area: um(624),
            calibration_warning: false,
        };
        debug_assert!(lib.is_calibrated());
        lib
    }

    /// `lut_delay(n) >= n * delay(MUX2)` for every width.
    pub fn is_calibrated(&self) -> bool {
        let mux = self.gate_delay[&GateKind::Mux2];
        (1..=6).all(|n| self.lut_delay[n] >= T::from_usize(n).expect("small int") * mux)
    }

    pub fn gate_delay(&self, kind: GateKind) -> T {
        self.gate_delay[&kind]
    }

    pub fn gate_area(&self, kind: GateKind) -> T {
        self.gate_area[&kind]
    }

    pub fn lut_delay(&self, width: u8) -> T {
        self.lut_delay[width as usize]
    }

    pub fn lut_area(&self, width: u8) -> T {
        self.lut_area[width as usize]
    }

    /// Serializes back to the JSON config schema.
    pub fn to_json(&self) -> String {
        let gates = GateKind::ALL
            .iter()
            .map(|k| {
                let e = Entry {
                    delay: Some(self.gate_delay(*k).to_f64_lossy()),
                    area: Some(self.gate_area(*k).to_f64_lossy()),
                };
                (k.name().to_string(), e)
            })
            .collect();
        let luts = (1..=6u8)
            .map(|n| {
                let e = Entry { delay: Some(self.lut_delay(n).to_f64_lossy()), area: Some(self.lut_area(n).to_f64_lossy()) };
                (n.to_string(), e)
            })
            .collect();
        let cfg = Config {
            gates,
            luts,
            ff: FfEntry {
                clk2q: Some(self.ff_clk2q.to_f64_lossy()),
                setup: Some(self.ff_setup.to_f64_lossy()),
                area: Some(self.ff_area.to_f64_lossy()),
            },
        };
        serde_json::to_string_pretty(&cfg).expect("serializable")
    }
}

/// Delay of a cell's pin-to-output arc (clock-to-Q for flip-flops).
pub fn cell_delay<T: Scalar>(lib: &TechLibrary<T>, cell: &Cell) -> Result<T, LibraryError> {
    match &cell.kind {
        CellKind::Lut(m) => Ok(lib.lut_delay(m.width())),
        CellKind::Ff { .. } => Ok(lib.ff_clk2q),
        CellKind::Gate(g) => lib.gate_delay.get(g).copied().ok_or_else(|| LibraryError::UnknownKind(g.name().into())),
    }
}

pub fn cell_area<T: Scalar>(lib: &TechLibrary<T>, cell: &Cell) -> Result<T, LibraryError> {
    match &cell.kind {
        CellKind::Lut(m) => Ok(lib.lut_area(m.width())),
        CellKind::Ff { .. } => Ok(lib.ff_area),
        CellKind::Gate(g) => lib.gate_area.get(g).copied().ok_or_else(|| LibraryError::UnknownKind(g.name().into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::LutMask;
    use crate::scalar::Rational;

    fn default_json() -> String {
        TechLibrary::<f64>::default_library().to_json()
    }

    #[test]
    fn default_is_calibrated() {
        let lib = TechLibrary::<f64>::default_library();
        let mux = lib.gate_delay(GateKind::Mux2);
        for n in 1..=6u8 {
            assert!(lib.lut_delay(n) >= f64::from(n) * mux);
        }
        assert!(lib.is_calibrated());
        assert!(TechLibrary::<Rational>::default_library().is_calibrated());
    }

    #[test]
    fn load_is_deterministic_and_matches_default() {
        let a = TechLibrary::<f64>::load(&default_json()).unwrap();
        let b = TechLibrary::<f64>::load(&default_json()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, TechLibrary::<f64>::default_library());
        let exact = TechLibrary::<Rational>::load(&default_json()).unwrap();
        assert_eq!(exact, TechLibrary::<Rational>::default_library());
    }

    #[test]
    fn missing_area_names_kind() {
        let mut v: serde_json::Value = serde_json::from_str(&default_json()).unwrap();
        v["gates"]["AND2"].as_object_mut().unwrap().remove("area");
        let err = TechLibrary::<f64>::load(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("AND2"), "{err}");
    }

    #[test]
    fn missing_gate_names_kind() {
        let mut v: serde_json::Value = serde_json::from_str(&default_json()).unwrap();
        v["gates"].as_object_mut().unwrap().remove("OR2");
        let err = TechLibrary::<f64>::load(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("OR2"));
    }

    #[test]
    fn negative_and_unknown_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&default_json()).unwrap();
        v["gates"]["INV"]["delay"] = serde_json::json!(-1.0);
        assert!(matches!(TechLibrary::<f64>::load(&v.to_string()), Err(LibraryError::Invalid { .. })));
        let mut v: serde_json::Value = serde_json::from_str(&default_json()).unwrap();
        v["gates"]["XOR2"] = serde_json::json!({"delay": 0.1, "area": 1.0});
        assert!(matches!(TechLibrary::<f64>::load(&v.to_string()), Err(LibraryError::UnknownKind(_))));
        let mut v: serde_json::Value = serde_json::from_str(&default_json()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(matches!(TechLibrary::<f64>::load(&v.to_string()), Err(LibraryError::Parse(_))));
    }

    #[test]
    fn calibration_violation_is_a_warning() {
        let mut v: serde_json::Value = serde_json::from_str(&default_json()).unwrap();
        v["luts"]["6"]["delay"] = serde_json::json!(0.1);
        v["gates"]["MUX2"]["delay"] = serde_json::json!(0.05);
        let lib = TechLibrary::<f64>::load(&v.to_string()).unwrap();
        assert!(lib.calibration_warning);
    }

    #[test]
    fn lookups() {
        let lib = TechLibrary::<f64>::default_library();
        let tie = Cell::gate("t", GateKind::Tie1, vec![]);
        assert_eq!(cell_delay(&lib, &tie).unwrap(), 0.0);
        let lut6 = Cell::lut("l", (0..6).map(|i| format!("i{i}")).collect(), LutMask::new(6, 1).unwrap());
        assert_eq!(cell_delay(&lib, &lut6).unwrap(), lib.lut_delay(6));
        let ff = Cell::ff("q", vec!["d".into()], false);
        assert_eq!(cell_area(&lib, &ff).unwrap(), lib.ff_area);
    }
}
