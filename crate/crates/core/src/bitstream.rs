// SPDX-License-Identifier: Apache-2.0

//! Configuration chain, bitstream serialization and scan programming.
//!
//! Reconfigurable LUTs form one daisy chain ordered by cell id. The bitstream
//! concatenates their masks in chain order, each mask LSB first. Programming
//! models the chain as a single shift register: while `enable` is high, one
//! bit enters at the head per cycle and everything moves one position towards
//! the tail, so the stream is shifted in last bit first.
//!
//! Binary `.ebs` layout (integers little-endian):
//!
//! ```text
//! "EASICBS1"
//! u32 name_len, name bytes
//! u32 chain_len, then per LUT: u32 id_len, id bytes, u8 width
//! u64 bit_count
//! ceil(bit_count / 8) bytes, bit i at byte i / 8, position i % 8
//! ```

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{LutMask, Netlist};

pub const MAGIC: &[u8; 8] = b"EASICBS1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitstreamError {
    #[error("bitstream length mismatch: expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("chain mismatch at position {position}: expected `{expected}`, got `{actual}`")]
    ChainMismatch { position: usize, expected: String, actual: String },
    #[error("malformed bitstream file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainEntry {
    pub id: String,
    pub width: u8,
}

impl ChainEntry {
    pub fn len(&self) -> usize {
        1 << self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Reconfigurable LUTs in daisy-chain order (lexicographic cell id).
pub fn chain_order(netlist: &Netlist) -> Vec<(String, u8)> {
    // Netlist::cells() already iterates in id order.
    netlist
        .reconfigurable_luts()
        .map(|c| (c.id().to_string(), c.lut_mask().expect("LUT").width()))
        .collect()
}

fn chain_entries(netlist: &Netlist) -> Vec<ChainEntry> {
    chain_order(netlist).into_iter().map(|(id, width)| ChainEntry { id, width }).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bitstream {
    pub design: String,
    pub chain: Vec<ChainEntry>,
    pub bits: Vec<bool>,
}

impl Bitstream {
    pub fn total_len(&self) -> usize {
        self.chain.iter().map(ChainEntry::len).sum()
    }

    /// Splits the bit vector back into per-LUT masks.
    pub fn masks(&self) -> Result<Vec<(String, LutMask)>, BitstreamError> {
        let expected = self.total_len();
        if self.bits.len() != expected {
            return Err(BitstreamError::LengthMismatch { expected, actual: self.bits.len() });
        }
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.chain.len());
        for e in &self.chain {
            let bits = pack(&self.bits[offset..offset + e.len()]);
            out.push((e.id.clone(), LutMask::new(e.width, bits).expect("slice fits width")));
            offset += e.len();
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_str(&mut out, &self.design);
        out.extend_from_slice(&(self.chain.len() as u32).to_le_bytes());
        for e in &self.chain {
            put_str(&mut out, &e.id);
            out.push(e.width);
        }
        out.extend_from_slice(&(self.bits.len() as u64).to_le_bytes());
        let mut bytes = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        out.extend_from_slice(&bytes);
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, BitstreamError> {
        let mut r = Reader { data, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(BitstreamError::Format("bad magic".into()));
        }
        let design = r.string()?;
        let n = r.u32()? as usize;
        let mut chain = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let id = r.string()?;
            let width = r.take(1)?[0];
            if !(1..=6).contains(&width) {
                return Err(BitstreamError::Format(format!("LUT `{id}` has width {width}")));
            }
            chain.push(ChainEntry { id, width });
        }
        let count = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")) as usize;
        let expected: usize = chain.iter().map(ChainEntry::len).sum();
        if count != expected {
            return Err(BitstreamError::LengthMismatch { expected, actual: count });
        }
        let payload = r.rest();
        if payload.len() != count.div_ceil(8) {
            return Err(BitstreamError::LengthMismatch { expected: count, actual: payload.len() * 8 });
        }
        let bits = (0..count).map(|i| (payload[i / 8] >> (i % 8)) & 1 == 1).collect();
        Ok(Bitstream { design, chain, bits })
    }

    /// JSON sidecar describing the chain.
    pub fn manifest(&self) -> ChainManifest {
        let mut offset = 0;
        let chain = self
            .chain
            .iter()
            .map(|e| {
                let entry = ManifestEntry { id: e.id.clone(), width: e.width, offset };
                offset += e.len();
                entry
            })
            .collect();
        ChainManifest { design: self.design.clone(), total_len: self.total_len(), chain }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainManifest {
    pub design: String,
    pub total_len: usize,
    pub chain: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub width: u8,
    pub offset: usize,
}

fn pack(bits: &[bool]) -> u64 {
    bits.iter().enumerate().fold(0, |acc, (i, &b)| acc | (u64::from(b) << i))
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BitstreamError> {
        if self.pos + n > self.data.len() {
            return Err(BitstreamError::Format("truncated file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, BitstreamError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String, BitstreamError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| BitstreamError::Format(e.to_string()))
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.data[self.pos..];
        self.pos = self.data.len();
        s
    }
}

/// Bitstream of the reconfigurable LUTs currently in `netlist`.
pub fn serialize(netlist: &Netlist) -> Bitstream {
    let chain = chain_entries(netlist);
    let mut bits = Vec::with_capacity(chain.iter().map(ChainEntry::len).sum());
    for e in &chain {
        let mask = netlist.cell(&e.id).and_then(|c| c.lut_mask()).expect("chain LUT");
        bits.extend((0..e.len()).map(|i| mask.eval(i)));
    }
    Bitstream { design: netlist.name.clone(), chain, bits }
}

/// Configuration registers of a device. `None` marks a bit never written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigState {
    pub chain: Vec<ChainEntry>,
    regs: VecDeque<Option<bool>>,
    pub cycles: u64,
}

impl ConfigState {
    /// Freshly fabricated device: no register holds a value yet.
    pub fn blank(netlist: &Netlist) -> Self {
        let chain = chain_entries(netlist);
        let len = chain.iter().map(ChainEntry::len).sum();
        ConfigState { chain, regs: VecDeque::from(vec![None; len]), cycles: 0 }
    }

    pub fn total_len(&self) -> usize {
        self.regs.len()
    }

    /// One clock of the configuration chain. Returns the bit on `serial_out`.
    pub fn shift(&mut self, serial_in: bool, enable: bool) -> Option<bool> {
        self.cycles += 1;
        if !enable || self.regs.is_empty() {
            return self.regs.back().copied().flatten();
        }
        let out = self.regs.pop_back().flatten();
        self.regs.push_front(Some(serial_in));
        out
    }

    /// Shifts in the first `count` cycles of a full programming sequence.
    pub fn shift_prefix(&mut self, bitstream: &Bitstream, count: usize, enable: bool) {
        for bit in bitstream.bits.iter().rev().take(count) {
            self.shift(*bit, enable);
        }
    }

    /// Per-LUT readback; `None` when any register of the LUT is unwritten.
    pub fn readback(&self) -> Vec<(String, Option<LutMask>)> {
        let mut offset = 0;
        self.chain
            .iter()
            .map(|e| {
                let slice = self.regs.range(offset..offset + e.len());
                offset += e.len();
                let mask = slice
                    .copied()
                    .collect::<Option<Vec<bool>>>()
                    .map(|bits| LutMask::new(e.width, pack(&bits)).expect("slice fits width"));
                (e.id.clone(), mask)
            })
            .collect()
    }

    pub fn masks(&self) -> BTreeMap<String, Option<LutMask>> {
        self.readback().into_iter().collect()
    }
}

fn check_compatible(state: &ConfigState, bitstream: &Bitstream) -> Result<(), BitstreamError> {
    let expected = state.total_len();
    if bitstream.bits.len() != expected || bitstream.total_len() != expected {
        return Err(BitstreamError::LengthMismatch { expected, actual: bitstream.bits.len() });
    }
    for (k, (a, b)) in state.chain.iter().zip(&bitstream.chain).enumerate() {
        if a != b {
            return Err(BitstreamError::ChainMismatch { position: k, expected: a.id.clone(), actual: b.id.clone() });
        }
    }
    Ok(())
}

/// Shifts a complete bitstream into the chain with `enable` high.
pub fn program(mut state: ConfigState, bitstream: &Bitstream) -> Result<ConfigState, BitstreamError> {
    check_compatible(&state, bitstream)?;
    state.shift_prefix(bitstream, bitstream.bits.len(), true);
    Ok(state)
}

/// Same as [`program`] but with an explicit `enable` level.
pub fn program_with_enable(
    mut state: ConfigState,
    bitstream: &Bitstream,
    enable: bool,
) -> Result<ConfigState, BitstreamError> {
    check_compatible(&state, bitstream)?;
    state.shift_prefix(bitstream, bitstream.bits.len(), enable);
    Ok(state)
}

/// Copy of `netlist` with every reconfigurable mask replaced by the readback
/// of `state`, or an error naming the first unprogrammed LUT.
pub fn apply(netlist: &Netlist, state: &ConfigState) -> Result<Netlist, String> {
    let mut out = netlist.clone();
    for (id, mask) in state.readback() {
        let mask = mask.ok_or_else(|| id.clone())?;
        let cell = out.cell_mut(&id).ok_or_else(|| id.clone())?;
        cell.kind = crate::netlist::CellKind::Lut(mask);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_blif;

    fn two_lut1() -> Netlist {
        parse_blif(".model t\n.inputs a\n.outputs u1 u2\n.names a u1\n1 1\n.names a u2\n0 1\n.end\n").unwrap()
    }

    #[test]
    fn chain_is_sorted() {
        let n = parse_blif(".model t\n.inputs a\n.outputs u2 u1\n.names a u2\n1 1\n.names a u1\n1 1\n.end\n").unwrap();
        let order: Vec<String> = chain_order(&n).into_iter().map(|(id, _)| id).collect();
        assert_eq!(order, ["u1", "u2"]);
    }

    #[test]
    fn empty_chain() {
        let mut n = Netlist::new("e");
        n.add_input("a");
        assert!(chain_order(&n).is_empty());
        let bs = serialize(&n);
        assert!(bs.bits.is_empty());
        assert_eq!(Bitstream::from_bytes(&bs.to_bytes()).unwrap(), bs);
    }

    #[test]
    fn and_lut_is_lsb_first() {
        let n = parse_blif(".model t\n.inputs a b\n.outputs y\n.names a b y\n11 1\n.end\n").unwrap();
        assert_eq!(serialize(&n).bits, [false, false, false, true]);
    }

    #[test]
    fn buffer_then_inverter() {
        assert_eq!(serialize(&two_lut1()).bits, [false, true, true, false]);
    }

    #[test]
    fn program_round_trip() {
        let n = two_lut1();
        let bs = serialize(&n);
        let state = program(ConfigState::blank(&n), &bs).unwrap();
        let expected: Vec<_> = n.reconfigurable_luts().map(|c| (c.id().to_string(), c.lut_mask())).collect();
        assert_eq!(state.readback(), expected);
        assert_eq!(state.cycles, 4);
    }

    #[test]
    fn wrong_length_names_both() {
        let n = two_lut1();
        let mut bs = serialize(&n);
        bs.bits.push(true);
        let err = program(ConfigState::blank(&n), &bs).unwrap_err();
        assert_eq!(err, BitstreamError::LengthMismatch { expected: 4, actual: 5 });
        assert!(err.to_string().contains('4') && err.to_string().contains('5'));
    }

    #[test]
    fn enable_low_is_noop() {
        let n = two_lut1();
        let bs = serialize(&n);
        let state = program_with_enable(ConfigState::blank(&n), &bs, false).unwrap();
        assert!(state.readback().iter().all(|(_, m)| m.is_none()));
    }

    #[test]
    fn file_round_trip_and_padding() {
        let n = two_lut1();
        let bs = serialize(&n);
        let bytes = bs.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(*bytes.last().unwrap(), 0b0110);
        assert_eq!(Bitstream::from_bytes(&bytes).unwrap(), bs);
        let truncated = &bytes[..bytes.len() - 1];
        assert!(matches!(Bitstream::from_bytes(truncated), Err(BitstreamError::LengthMismatch { .. })));
    }

    #[test]
    fn manifest_offsets() {
        let m = serialize(&two_lut1()).manifest();
        assert_eq!(m.total_len, 4);
        assert_eq!(m.chain[1].offset, 2);
    }
}
