// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use easic::bitstream::{program, serialize, Bitstream, ConfigState};
use easic::corpus;
use easic::netlist::{emit_blif, parse_blif, LutMask};
use easic::obfuscate::{run_obfuscation, ObfuscationConfig};
use easic::Library;
use proptest::prelude::*;

#[test]
fn round_trip_on_corpus() {
    let lib = Library::default_library();
    for n in corpus::corpus() {
        for p in [0.0, 25.0, 50.0, 75.0, 86.0, 92.0, 100.0] {
            let r = run_obfuscation(&n, ObfuscationConfig::new(p), &lib).unwrap();
            let bits = serialize(&r.netlist);
            let want: BTreeMap<String, Option<LutMask>> =
                r.netlist.reconfigurable_luts().map(|c| (c.id().to_string(), c.lut_mask())).collect();
            assert_eq!(bits.total_len(), want.values().map(|m| m.unwrap().num_rows()).sum::<usize>());
            let state = program(ConfigState::blank(&r.netlist), &bits).unwrap();
            assert_eq!(state.masks(), want, "{}@{p}", n.name);
            assert_eq!(Bitstream::from_bytes(&bits.to_bytes()).unwrap(), bits);

            // The emitted BLIF reproduces the same chain.
            let again = parse_blif(&emit_blif(&r.netlist).unwrap()).unwrap();
            assert_eq!(serialize(&again), bits);
        }
    }
}

#[test]
fn partial_shift_leaves_luts_unprogrammed() {
    let n = corpus::alu4();
    let bits = serialize(&n);
    let mut state = ConfigState::blank(&n);
    state.shift_prefix(&bits, bits.total_len() - 1, true);
    assert!(state.readback().iter().any(|(_, m)| m.is_none()));
}

proptest! {
    #[test]
    fn file_format_round_trip(widths in proptest::collection::vec(1u8..=6, 0..12), seed in any::<u64>()) {
        let mut n = easic::Netlist::new("p");
        n.add_input("a");
        let mut x = seed;
        for (k, &w) in widths.iter().enumerate() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let mask = LutMask::new(w, x & LutMask::full(w)).unwrap();
            n.add_cell(easic::Cell::lut(format!("l{k:02}"), vec!["a".to_string(); w as usize], mask)).unwrap();
            n.add_output(format!("l{k:02}"));
        }
        let bits = serialize(&n);
        let bytes = bits.to_bytes();
        prop_assert_eq!(Bitstream::from_bytes(&bytes).unwrap(), bits.clone());
        if !bits.bits.is_empty() {
            prop_assert!(Bitstream::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        }
    }
}
