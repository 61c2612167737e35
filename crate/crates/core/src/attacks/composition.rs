// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AttackError, PatternHistogram};

pub const DEFAULT_THRESHOLD: f64 = 0.75;

/// Pearson correlation of the frequency vectors, aligned on the union of
/// patterns with absent patterns counted as zero. `None` when either vector
/// has zero variance.
pub fn correlate(a: &PatternHistogram, b: &PatternHistogram) -> Option<f64> {
    let union: BTreeSet<u64> = a.patterns().union(&b.patterns()).copied().collect();
    let xs: Vec<f64> = union.iter().map(|&p| a.freq_of(p) as f64).collect();
    let ys: Vec<f64> = union.iter().map(|&p| b.freq_of(p) as f64).collect();
    pearson(&xs, &ys)
}

pub(crate) fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return None;
    }
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    NoCorrelation,
    CrossCorrelation,
    SelfCorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub victim: String,
    pub obf_percent: Option<f64>,
    /// Ranked by descending r; undefined correlations last.
    pub matches: Vec<(String, Option<f64>)>,
    pub classification: Classification,
    pub threshold: f64,
    pub method: String,
    pub warning: Option<String>,
}

impl CorrelationReport {
    pub fn top(&self) -> Option<(&str, f64)> {
        self.matches.first().and_then(|(d, r)| r.map(|r| (d.as_str(), r)))
    }

    pub fn r_of(&self, design: &str) -> Option<f64> {
        self.matches.iter().find(|(d, _)| d == design).and_then(|(_, r)| *r)
    }
}

/// Correlates a victim's static-portion histogram with full-design
/// histograms of known circuits.
pub fn composition_attack(
    victim: &PatternHistogram,
    corpus: &[PatternHistogram],
    threshold: f64,
) -> Result<CorrelationReport, AttackError> {
    if corpus.len() < 2 {
        return Err(AttackError::CorpusTooSmall(corpus.len()));
    }
    let mut matches: Vec<(String, Option<f64>)> = corpus.iter().map(|h| (h.design.clone(), correlate(victim, h))).collect();
    matches.sort_by(|a, b| match (a.1, b.1) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.0.cmp(&b.0)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.0.cmp(&b.0),
    });
    let mut warning = None;
    let classification = if victim.is_empty() {
        warning = Some("static portion is empty".to_string());
        Classification::NoCorrelation
    } else {
        match matches.first() {
            Some((d, Some(r))) if *r >= threshold => {
                if *d == victim.design {
                    Classification::SelfCorrelation
                } else {
                    Classification::CrossCorrelation
                }
            }
            _ => Classification::NoCorrelation,
        }
    };
    Ok(CorrelationReport {
        victim: victim.design.clone(),
        obf_percent: victim.obf_percent,
        matches,
        classification,
        threshold,
        method: "pearson, zero-filled pattern union, masks lifted to 6 inputs".into(),
        warning,
    })
}
