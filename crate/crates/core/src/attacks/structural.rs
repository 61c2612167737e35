// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{DMatrix, DVector, RealField};
use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::netlist::{LutMask, Netlist};
use crate::obfuscate::ObfuscationResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Whole,
    Static,
    Reconfigurable,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Whole => "whole",
            Scope::Static => "static",
            Scope::Reconfigurable => "reconfigurable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistEntry {
    pub id: usize,
    /// Mask lifted to six inputs.
    pub pattern: u64,
    pub freq: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternHistogram {
    pub design: String,
    pub scope: Scope,
    pub obf_percent: Option<f64>,
    pub entries: Vec<HistEntry>,
}

impl PatternHistogram {
    /// Counts masks; ids follow descending frequency, ties by ascending pattern.
    pub fn from_masks(design: &str, scope: Scope, masks: impl IntoIterator<Item = LutMask>) -> Self {
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for m in masks {
            *counts.entry(m.lift_to_6()).or_default() += 1;
        }
        let mut v: Vec<(u64, usize)> = counts.into_iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let entries = v.into_iter().enumerate().map(|(k, (pattern, freq))| HistEntry { id: k + 1, pattern, freq }).collect();
        PatternHistogram { design: design.to_string(), scope, obf_percent: None, entries }
    }

    pub fn from_result<T>(result: &ObfuscationResult<T>, scope: Scope) -> Self {
        let mut h = pattern_histogram(&result.netlist, scope, Some(&result.origin_masks)).expect("trace is present");
        h.obf_percent = Some(result.config.obf_percent);
        h
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.freq).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn freq_of(&self, pattern: u64) -> usize {
        self.entries.iter().find(|e| e.pattern == pattern).map_or(0, |e| e.freq)
    }

    pub fn patterns(&self) -> BTreeSet<u64> {
        self.entries.iter().map(|e| e.pattern).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "design": self.design,
            "scope": self.scope,
            "obf_percent": self.obf_percent,
            "lifted_to": 6,
            "entries": self.entries.iter().map(|e| serde_json::json!([e.id, format!("{:016x}", e.pattern), e.freq])).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, AttackError> {
        let bad = |what: &str| AttackError::Format(format!("histogram: bad {what}"));
        let design = v["design"].as_str().ok_or_else(|| bad("design"))?.to_string();
        let scope: Scope = serde_json::from_value(v["scope"].clone()).map_err(|_| bad("scope"))?;
        let mut entries = Vec::new();
        for e in v["entries"].as_array().ok_or_else(|| bad("entries"))? {
            let id = e[0].as_u64().ok_or_else(|| bad("id"))? as usize;
            let pattern = u64::from_str_radix(e[1].as_str().ok_or_else(|| bad("pattern"))?, 16).map_err(|_| bad("pattern"))?;
            let freq = e[2].as_u64().ok_or_else(|| bad("frequency"))? as usize;
            entries.push(HistEntry { id, pattern, freq });
        }
        Ok(PatternHistogram { design, scope, obf_percent: v["obf_percent"].as_f64(), entries })
    }

    /// `rank,frequency` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,frequency\n");
        for e in &self.entries {
            s.push_str(&format!("{},{}\n", e.id, e.freq));
        }
        s
    }
}

/// Histogram of one scope of a netlist. Converted LUTs are only visible
/// through `origin_masks`; the adversary is granted perfect reconstruction
/// of their functions.
pub fn pattern_histogram(
    netlist: &Netlist,
    scope: Scope,
    origin_masks: Option<&BTreeMap<String, LutMask>>,
) -> Result<PatternHistogram, AttackError> {
    let converted = netlist.cells().any(|c| c.origin.is_some());
    let origin = match origin_masks {
        Some(m) => m.values().copied().collect(),
        None if scope == Scope::Static || (scope == Scope::Whole && converted) => {
            return Err(AttackError::ScopeUnavailable(scope.to_string()))
        }
        None => Vec::new(),
    };
    let re = netlist.reconfigurable_luts().filter_map(|c| c.lut_mask());
    let static_luts = netlist.luts().filter(|c| !c.is_reconfigurable()).filter_map(|c| c.lut_mask());
    let masks: Vec<LutMask> = match scope {
        Scope::Reconfigurable => re.collect(),
        Scope::Static => static_luts.chain(origin).collect(),
        Scope::Whole => re.chain(static_luts).chain(origin).collect(),
    };
    Ok(PatternHistogram::from_masks(&netlist.name, scope, masks))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlePoint {
    pub design: String,
    pub luts: usize,
    pub new_patterns: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UniquePatternSet {
    pub patterns: BTreeSet<u64>,
    pub designs: Vec<String>,
    pub curve: Vec<SettlePoint>,
}

impl UniquePatternSet {
    pub fn m(&self) -> usize {
        self.patterns.len()
    }

    pub fn add(&mut self, h: &PatternHistogram) -> usize {
        let before = self.patterns.len();
        self.patterns.extend(h.entries.iter().map(|e| e.pattern));
        let new = self.patterns.len() - before;
        self.designs.push(h.design.clone());
        self.curve.push(SettlePoint { design: h.design.clone(), luts: h.total(), new_patterns: new, total: self.patterns.len() });
        new
    }

    pub fn curve_csv(&self) -> String {
        let mut s = String::from("step,design,luts,new_patterns,total\n");
        for (k, p) in self.curve.iter().enumerate() {
            s.push_str(&format!("{},{},{},{},{}\n", k + 1, p.design, p.luts, p.new_patterns, p.total));
        }
        s
    }
}

pub fn corpus_union<'a>(designs: impl IntoIterator<Item = &'a PatternHistogram>) -> UniquePatternSet {
    let mut u = UniquePatternSet::default();
    for h in designs {
        u.add(h);
    }
    u
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trendline<T> {
    /// Coefficients, constant term first.
    pub coeffs: Vec<T>,
    /// Observed minus fitted frequency, per entry.
    pub residuals: Vec<T>,
    pub max_abs_residual: T,
    /// Rank id with the largest absolute residual.
    pub worst_id: usize,
}

impl<T: RealField + Copy> Trendline<T> {
    pub fn eval(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }
}

/// Least-squares polynomial over (rank id, frequency).
pub fn fit_trendline<T: RealField + Copy>(h: &PatternHistogram, degree: usize) -> Result<Trendline<T>, AttackError> {
    let n = h.entries.len();
    if n < degree + 1 {
        return Err(AttackError::Underdetermined { degree, points: n });
    }
    let xs: Vec<T> = h.entries.iter().map(|e| nalgebra::convert::<f64, T>(e.id as f64)).collect();
    let ys = DVector::from_iterator(n, h.entries.iter().map(|e| nalgebra::convert::<f64, T>(e.freq as f64)));
    let a = DMatrix::from_fn(n, degree + 1, |r, c| xs[r].powi(c as i32));
    let svd = a.clone().svd(true, true);
    let eps = nalgebra::convert::<f64, T>(1e-12);
    let coef = svd.solve(&ys, eps).map_err(|e| AttackError::Format(e.to_string()))?;
    let fitted = &a * &coef;
    let residuals: Vec<T> = ys.iter().zip(fitted.iter()).map(|(y, f)| *y - *f).collect();
    let (worst, max) = residuals
        .iter()
        .enumerate()
        .fold((0, T::zero()), |(bi, bm), (i, r)| if r.abs() > bm { (i, r.abs()) } else { (bi, bm) });
    Ok(Trendline { coeffs: coef.iter().copied().collect(), residuals, max_abs_residual: max, worst_id: h.entries[worst].id })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpaceReport {
    pub key_bits: usize,
    /// Candidate masks per LUT6 under each attack stage.
    pub l1: u128,
    pub l2: Option<u128>,
    pub l3: Option<u128>,
    pub l4: Option<u128>,
}

/// Shrinks the per-LUT6 candidate set: naive, corpus patterns, patterns of
/// the matched design, and matched patterns not already accounted for by
/// the static portion.
pub fn search_space_report<T>(
    result: &ObfuscationResult<T>,
    corpus: Option<&UniquePatternSet>,
    matched: Option<&PatternHistogram>,
) -> SearchSpaceReport {
    search_space_of(&result.netlist, &result.origin_masks, corpus, matched)
}

/// [`search_space_report`] on an obfuscated netlist and its recorded origin masks.
pub fn search_space_of(
    netlist: &Netlist,
    origin_masks: &BTreeMap<String, LutMask>,
    corpus: Option<&UniquePatternSet>,
    matched: Option<&PatternHistogram>,
) -> SearchSpaceReport {
    let key_bits = crate::bitstream::serialize(netlist).total_len();
    let l1: u128 = 1 << 64;
    let l2 = corpus.map(|c| (c.m() as u128).min(l1));
    let cap = |v: u128, above: Option<u128>| v.min(above.unwrap_or(l1));
    let l3 = matched.map(|m| cap(m.entries.len() as u128, l2));
    let l4 = matched.map(|m| {
        let observed = PatternHistogram::from_masks("static", Scope::Static, origin_masks.values().copied());
        let left = m.entries.iter().filter(|e| e.freq > observed.freq_of(e.pattern)).count() as u128;
        cap(left, l3)
    });
    SearchSpaceReport { key_bits, l1, l2, l3, l4 }
}
