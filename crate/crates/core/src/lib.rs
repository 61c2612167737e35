// SPDX-License-Identifier: Apache-2.0

//! Hybrid LUT/static-logic netlists: obfuscation by selective LUT
//! conversion, timing, configuration bitstreams, simulation and attack
//! analysis.

pub mod attacks;
pub mod bitstream;
pub mod corpus;
pub mod netlist;
pub mod obfuscate;
pub mod scalar;
pub mod sim;
pub mod staticgen;
pub mod techlib;
pub mod timing;

pub use netlist::{parse_blif, Cell, CellKind, GateKind, LutMask, Mode, Netlist, NetlistError};
pub use scalar::{Rational, Scalar};

pub type Library = techlib::TechLibrary<f64>;
pub type ExactLibrary = techlib::TechLibrary<Rational>;
pub type TimingGraph = timing::TimingGraph<f64>;
pub type ExactTimingGraph = timing::TimingGraph<Rational>;
