// SPDX-License-Identifier: Apache-2.0

use std::time::{Duration, Instant};

use super::AttackError;
use crate::bitstream::{program, Bitstream, ConfigState};
use crate::netlist::Netlist;
use crate::sim::{check_compiled, EquivalencePolicy, Simulator};

pub const DEFAULT_MAX_KEY_BITS: usize = 20;

#[derive(Debug, Clone)]
pub struct BruteForceOutcome {
    /// First key whose programmed design matches the oracle. It need not be
    /// the designer's bitstream, only functionally equivalent to it.
    pub key: Bitstream,
    pub trials: u64,
    pub elapsed: Duration,
}

/// Tries every key in counting order, programming the chain and checking
/// the result against the oracle design.
pub fn brute_force_key(
    obfuscated: &Netlist,
    oracle: &Netlist,
    max_key_bits: usize,
    policy: EquivalencePolicy,
) -> Result<BruteForceOutcome, AttackError> {
    let start = Instant::now();
    let blank = ConfigState::blank(obfuscated);
    let len = blank.total_len();
    if len > max_key_bits || len >= 64 {
        return Err(AttackError::KeyTooLarge { required: len, allowed: max_key_bits.min(63) });
    }
    let golden = Simulator::new(oracle)?;
    let mut trials = 0;
    for k in 0..1u64 << len {
        trials += 1;
        let key = Bitstream {
            design: obfuscated.name.clone(),
            chain: blank.chain.clone(),
            bits: (0..len).map(|i| k >> i & 1 == 1).collect(),
        };
        let state = program(blank.clone(), &key).map_err(|e| AttackError::Format(e.to_string()))?;
        let candidate = Simulator::programmed(obfuscated, &state)?;
        if check_compiled(&golden, &candidate, policy)?.equivalent() {
            return Ok(BruteForceOutcome { key, trials, elapsed: start.elapsed() });
        }
    }
    Err(AttackError::Exhausted(trials))
}
