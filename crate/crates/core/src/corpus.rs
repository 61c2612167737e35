// SPDX-License-Identifier: Apache-2.0

//! Deterministic, synthetic LUT-mapped designs used as the test and attack
//! corpus. Each generator mimics the LUT texture of the circuit class it is
//! named after; none of them is a tested implementation of that circuit
//! except where a test says so (adder, comparator, S-box, CRC).

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::netlist::{Cell, GateKind, LutMask, Netlist};

/// Corpus order; the attack tests rely on it being stable.
pub const DESIGNS: &[&str] = &[
    "riscv_like",
    "aes_sbox_like",
    "sha_round",
    "alu4",
    "sbm",
    "adder16",
    "mac",
    "cmp8",
    "crc16",
    "counter",
    "parity",
];

pub fn design(name: &str) -> Option<Netlist> {
    Some(match name {
        "riscv_like" => riscv_like(),
        "aes_sbox_like" => aes_sbox_like(),
        "sha_round" => sha_round(),
        "alu4" => alu4(),
        "sbm" => sbm(),
        "adder16" => adder16(),
        "mac" => mac(),
        "cmp8" => cmp8(),
        "crc16" => crc16(),
        "counter" => counter(),
        "parity" => parity(),
        _ => return None,
    })
}

pub fn corpus() -> Vec<Netlist> {
    DESIGNS.iter().map(|d| design(d).expect("known design")).collect()
}

/// Mask whose row `i` is `f(i)`.
pub fn mask_from_fn(width: u8, f: impl Fn(usize) -> bool) -> LutMask {
    let bits = (0..1usize << width).fold(0u64, |acc, i| acc | ((f(i) as u64) << i));
    LutMask::new(width, bits).expect("width checked by caller")
}

fn bit(i: usize, k: usize) -> bool {
    (i >> k) & 1 == 1
}

const XOR2: u64 = 0x6;
const AND2: u64 = 0x8;
const XOR3: u64 = 0x96;
const MAJ3: u64 = 0xE8;
/// (d0, d1, sel)
const MUX_DDS: u64 = 0xCA;
/// (sel, d0, d1)
const MUX_SDD: u64 = 0xE4;

struct Builder {
    n: Netlist,
}

impl Builder {
    fn new(name: &str, clocked: bool) -> Self {
        let mut n = Netlist::new(name);
        if clocked {
            n.add_input("clk");
            n.clock = Some("clk".into());
        }
        Builder { n }
    }

    fn input(&mut self, name: impl Into<String>) -> String {
        let name = name.into();
        self.n.add_input(name.clone());
        name
    }

    fn inputs(&mut self, prefix: &str, count: usize) -> Vec<String> {
        (0..count).map(|i| self.input(format!("{prefix}{i}"))).collect()
    }

    fn lut(&mut self, name: impl Into<String>, ins: &[&String], bits: u64) -> String {
        let name = name.into();
        let w = ins.len() as u8;
        let mask = LutMask::new(w, bits & LutMask::full(w)).expect("valid LUT");
        self.n.add_cell(Cell::lut(name.clone(), ins.iter().map(|s| s.to_string()).collect(), mask)).expect("unique");
        name
    }

    fn lut_fn(&mut self, name: impl Into<String>, ins: &[&String], f: impl Fn(usize) -> bool) -> String {
        let bits = mask_from_fn(ins.len() as u8, f).bits();
        self.lut(name, ins, bits)
    }

    fn gate(&mut self, name: impl Into<String>, kind: GateKind, ins: &[&String]) -> String {
        let name = name.into();
        self.n.add_cell(Cell::gate(name.clone(), kind, ins.iter().map(|s| s.to_string()).collect())).expect("unique");
        name
    }

    fn ff(&mut self, q: impl Into<String>, d: &str, init: bool) {
        let ins = match &self.n.clock {
            Some(c) => vec![d.to_string(), c.clone()],
            None => vec![d.to_string()],
        };
        self.n.add_cell(Cell::ff(q, ins, init)).expect("unique");
    }

    fn output(&mut self, net: &str) {
        self.n.add_output(net);
    }

    /// Ripple adder of XOR3/MAJ3 LUTs; returns the sum bits (carry dropped).
    fn add(&mut self, prefix: &str, a: &[String], b: &[String]) -> Vec<String> {
        let mut carry: Option<String> = None;
        let mut sum = Vec::new();
        for i in 0..a.len() {
            let last = i + 1 == a.len();
            match carry.clone() {
                None => {
                    sum.push(self.lut(format!("{prefix}_s{i}"), &[&a[i], &b[i]], XOR2));
                    if !last {
                        carry = Some(self.lut(format!("{prefix}_c{i}"), &[&a[i], &b[i]], AND2));
                    }
                }
                Some(c) => {
                    sum.push(self.lut(format!("{prefix}_s{i}"), &[&a[i], &b[i], &c], XOR3));
                    if !last {
                        carry = Some(self.lut(format!("{prefix}_c{i}"), &[&a[i], &b[i], &c], MAJ3));
                    }
                }
            }
        }
        sum
    }

    fn finish(self) -> Netlist {
        self.n.validate().expect("generated design is valid");
        self.n
    }
}

/// 16-bit adder with generate/propagate LUTs.
pub fn adder16() -> Netlist {
    let mut b = Builder::new("adder16", false);
    let a = b.inputs("a", 16);
    let y = b.inputs("b", 16);
    let mut c = b.input("cin");
    for i in 0..16 {
        let g = b.lut(format!("g{i}"), &[&a[i], &y[i]], AND2);
        let p = b.lut(format!("p{i}"), &[&a[i], &y[i]], XOR2);
        let s = b.lut(format!("s{i}"), &[&p, &c], XOR2);
        b.output(&s);
        // g | p & c
        c = b.lut(format!("c{}", i + 1), &[&g, &p, &c], 0xEA);
    }
    b.output(&c);
    b.finish()
}

/// 8-bit magnitude comparator: outputs eq, gt, lt.
pub fn cmp8() -> Netlist {
    let mut b = Builder::new("cmp8", false);
    let a = b.inputs("a", 8);
    let y = b.inputs("b", 8);
    let e: Vec<String> = (0..8).map(|i| b.lut(format!("e{i}"), &[&a[i], &y[i]], 0x9)).collect();
    let g: Vec<String> = (0..8).map(|i| b.lut(format!("g{i}"), &[&a[i], &y[i]], 0x2)).collect();
    let mut gt = g[0].clone();
    for i in 1..8 {
        gt = b.lut(format!("gt{i}"), &[&g[i], &e[i], &gt], 0xEA);
    }
    let lo = b.lut("eq_lo", &[&e[0], &e[1], &e[2], &e[3]], 0x8000);
    let hi = b.lut("eq_hi", &[&e[4], &e[5], &e[6], &e[7]], 0x8000);
    let eq = b.lut("eq", &[&lo, &hi], AND2);
    let lt = b.lut("lt", &[&gt, &eq], 0x1);
    for o in [&eq, &gt, &lt] {
        b.output(o);
    }
    b.finish()
}

/// 4-bit ALU: add, sub, and, or, xor, nand, pass, not.
pub fn alu4() -> Netlist {
    let mut b = Builder::new("alu4", false);
    let a = b.inputs("a", 4);
    let y = b.inputs("b", 4);
    let op = b.inputs("op", 3);
    let cin = b.input("cin");
    let is_sub = |i: usize, base: usize| (i >> base) & 7 == 1;
    let mut c = b.lut_fn("c0", &[&cin, &op[0], &op[1], &op[2]], |i| if is_sub(i, 1) { true } else { bit(i, 0) });
    let mut outs = Vec::new();
    for k in 0..4 {
        let bb = b.lut_fn(format!("bb{k}"), &[&y[k], &op[0], &op[1], &op[2]], |i| bit(i, 0) ^ is_sub(i, 1));
        let r = b.lut_fn(format!("y{k}"), &[&a[k], &bb, &c, &op[0], &op[1], &op[2]], |i| {
            let (x, z, ci) = (bit(i, 0), bit(i, 1), bit(i, 2));
            match (i >> 3) & 7 {
                0 | 1 => x ^ z ^ ci,
                2 => x & z,
                3 => x | z,
                4 => x ^ z,
                5 => !(x & z),
                6 => x,
                _ => !x,
            }
        });
        c = b.lut(format!("c{}", k + 1), &[&a[k], &bb, &c], MAJ3);
        b.output(&r);
        outs.push(r);
    }
    b.output(&c);
    let z = b.lut("zero", &[&outs[0], &outs[1], &outs[2], &outs[3]], 0x1);
    b.output(&z);
    b.finish()
}

/// Small sequential controller with exactly 29 LUTs.
pub fn sbm() -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5b3);
    let mut b = Builder::new("sbm", true);
    let mut pool: Vec<String> = b.inputs("req", 6);
    let state: Vec<String> = (0..8).map(|i| format!("st{i}")).collect();
    pool.extend(state.iter().cloned());
    let mut used = vec![false; pool.len()];
    let palette: Vec<u64> = (0..10).map(|_| rng.gen()).collect();
    let mut luts = Vec::new();
    for k in 0..29 {
        let w = [3usize, 4, 4, 5, 6][rng.gen_range(0..5)];
        let mut ins: Vec<usize> = (0..pool.len()).filter(|&i| !used[i]).take(w).collect();
        while ins.len() < w {
            let i = rng.gen_range(0..pool.len());
            if !ins.contains(&i) {
                ins.push(i);
            }
        }
        for &i in &ins {
            used[i] = true;
        }
        let names: Vec<&String> = ins.iter().map(|&i| &pool[i]).collect();
        let bits = *palette.choose(&mut rng).unwrap();
        let bits = if mask_degenerate(bits, w as u8) { bits ^ 1 } else { bits };
        let l = b.lut(format!("u{k:02}"), &names, bits);
        pool.push(l.clone());
        used.push(false);
        luts.push(l);
    }
    for (i, q) in state.iter().enumerate() {
        b.ff(q.clone(), &luts[21 + i], i % 2 == 0);
    }
    for (i, l) in luts.iter().enumerate() {
        if !used[i + 14] && i < 21 {
            b.output(l);
        }
    }
    b.output(&luts[28]);
    b.output(&luts[27]);
    b.finish()
}

fn mask_degenerate(bits: u64, w: u8) -> bool {
    let m = LutMask::new(w, bits & LutMask::full(w)).unwrap();
    m.is_constant().is_some()
}

/// Multiply-accumulate: acc <= acc + a * b, 4-bit operands, 8-bit accumulator.
pub fn mac() -> Netlist {
    let mut b = Builder::new("mac", true);
    let a = b.inputs("a", 4);
    let y = b.inputs("b", 4);
    let acc: Vec<String> = (0..8).map(|i| format!("acc{i}")).collect();
    // Partial-product rows folded into LUT4 sum/carry cells.
    let mut s: Vec<Option<String>> = vec![None; 8];
    for i in 0..4 {
        s[i] = Some(b.lut(format!("pp0_{i}"), &[&a[i], &y[0]], AND2));
    }
    for j in 1..4 {
        let mut carry: Option<String> = None;
        #[allow(clippy::needless_range_loop)]
        for i in 0..4 {
            let pos = i + j;
            let prev = s[pos].clone();
            let (sum, c) = match (prev, carry.clone()) {
                (Some(p), Some(c)) => (
                    b.lut_fn(format!("m{j}_{i}_s"), &[&a[i], &y[j], &p, &c], |r| (bit(r, 0) & bit(r, 1)) ^ bit(r, 2) ^ bit(r, 3)),
                    b.lut_fn(format!("m{j}_{i}_c"), &[&a[i], &y[j], &p, &c], |r| {
                        let t = (bit(r, 0) & bit(r, 1)) as u8 + bit(r, 2) as u8 + bit(r, 3) as u8;
                        t >= 2
                    }),
                ),
                (Some(p), None) => (
                    b.lut_fn(format!("m{j}_{i}_s"), &[&a[i], &y[j], &p], |r| (bit(r, 0) & bit(r, 1)) ^ bit(r, 2)),
                    b.lut(format!("m{j}_{i}_c"), &[&a[i], &y[j], &p], 0x80),
                ),
                (None, Some(c)) => (
                    b.lut_fn(format!("m{j}_{i}_s"), &[&a[i], &y[j], &c], |r| (bit(r, 0) & bit(r, 1)) ^ bit(r, 2)),
                    b.lut(format!("m{j}_{i}_c"), &[&a[i], &y[j], &c], 0x80),
                ),
                (None, None) => (b.lut(format!("m{j}_{i}_s"), &[&a[i], &y[j]], AND2), String::new()),
            };
            s[pos] = Some(sum);
            carry = (!c.is_empty()).then_some(c);
        }
        if let Some(c) = carry {
            s[j + 4] = Some(c);
        }
    }
    let prod: Vec<String> = s.into_iter().map(|x| x.expect("8-bit product")).collect();
    let next = b.add("acc_add", &acc, &prod);
    for (q, d) in acc.iter().zip(&next) {
        b.ff(q.clone(), d, false);
        b.output(q);
    }
    b.finish()
}

/// CRC-16/CCITT over one data byte per cycle (MSB first).
pub fn crc16() -> Netlist {
    let mut b = Builder::new("crc16", true);
    let d = b.inputs("d", 8);
    let q: Vec<String> = (0..16).map(|i| format!("crc{i}")).collect();
    // Symbolic state: bit set over 16 state vars and 8 data vars.
    let mut sym: Vec<u32> = (0..16).map(|i| 1u32 << i).collect();
    for k in (0..8).rev() {
        let fb = sym[15] ^ (1 << (16 + k));
        for i in (1..16).rev() {
            sym[i] = sym[i - 1];
        }
        sym[0] = fb;
        sym[5] ^= fb;
        sym[12] ^= fb;
    }
    let var = |v: usize| if v < 16 { q[v].clone() } else { d[v - 16].clone() };
    for (i, s) in sym.iter().enumerate() {
        let vars: Vec<String> = (0..24).filter(|v| s >> v & 1 == 1).map(var).collect();
        let next = xor_tree(&mut b, &format!("x{i}"), vars);
        b.ff(q[i].clone(), &next, true);
        b.output(&q[i]);
    }
    b.finish()
}

fn xor_tree(b: &mut Builder, prefix: &str, mut vars: Vec<String>) -> String {
    let mut level = 0;
    while vars.len() > 1 {
        vars = vars
            .chunks(6)
            .enumerate()
            .map(|(k, c)| {
                if c.len() == 1 {
                    return c[0].clone();
                }
                let refs: Vec<&String> = c.iter().collect();
                b.lut_fn(format!("{prefix}_{level}_{k}"), &refs, |r| r.count_ones() % 2 == 1)
            })
            .collect();
        level += 1;
    }
    vars.pop().expect("non-empty")
}

/// 8-bit up-counter with enable, parallel load and synchronous reset.
pub fn counter() -> Netlist {
    let mut b = Builder::new("counter", true);
    let en = b.input("en");
    let rst = b.input("rst");
    let load = b.input("load");
    let d = b.inputs("d", 8);
    let q: Vec<String> = (0..8).map(|i| format!("q{i}")).collect();
    let mut t = en.clone();
    for i in 0..8 {
        // rst ? 0 : load ? d : q ^ t
        let next = b.lut_fn(format!("n{i}"), &[&q[i], &t, &rst, &load, &d[i]], |r| {
            !bit(r, 2) && if bit(r, 3) { bit(r, 4) } else { bit(r, 0) ^ bit(r, 1) }
        });
        b.ff(q[i].clone(), &next, false);
        b.output(&q[i]);
        if i < 7 {
            t = b.lut(format!("t{}", i + 1), &[&t, &q[i]], AND2);
        }
    }
    let tc = b.lut("tc", &[&t, &q[7]], AND2);
    let z_lo = b.lut("z_lo", &[&q[0], &q[1], &q[2], &q[3]], 0x1);
    let z_hi = b.lut("z_hi", &[&q[4], &q[5], &q[6], &q[7]], 0x1);
    let zero = b.lut("zero", &[&z_lo, &z_hi], AND2);
    b.output(&tc);
    b.output(&zero);
    b.finish()
}

/// 64-input parity tree.
pub fn parity() -> Netlist {
    let mut b = Builder::new("parity", false);
    let x = b.inputs("x", 64);
    let p = xor_tree(&mut b, "p", x);
    b.output(&p);
    b.finish()
}

fn aes_sbox() -> [u8; 256] {
    let mut s = [0u8; 256];
    let (mut p, mut q) = (1u8, 1u8);
    loop {
        p = p ^ (p << 1) ^ if p & 0x80 != 0 { 0x1B } else { 0 };
        q ^= q << 1;
        q ^= q << 2;
        q ^= q << 4;
        if q & 0x80 != 0 {
            q ^= 0x09;
        }
        let x = q ^ q.rotate_left(1) ^ q.rotate_left(2) ^ q.rotate_left(3) ^ q.rotate_left(4);
        s[p as usize] = x ^ 0x63;
        if p == 1 {
            break;
        }
    }
    s[0] = 0x63;
    s
}

/// AES S-box: four LUT6 cofactors per output bit, recombined by LUT3
/// muxes and a final MUX2 primitive.
pub fn aes_sbox_like() -> Netlist {
    let sbox = aes_sbox();
    let mut b = Builder::new("aes_sbox_like", false);
    let x = b.inputs("x", 8);
    let lo: Vec<&String> = x[..6].iter().collect();
    for j in 0..8 {
        let f: Vec<String> = (0..4)
            .map(|hi| b.lut_fn(format!("f{j}_{hi}"), &lo, |r| sbox[r | (hi << 6)] >> j & 1 == 1))
            .collect();
        let m0 = b.lut(format!("m{j}_0"), &[&x[6], &f[0], &f[1]], MUX_SDD);
        let m1 = b.lut(format!("m{j}_1"), &[&x[6], &f[2], &f[3]], MUX_SDD);
        let y = b.gate(format!("y{j}"), GateKind::Mux2, &[&x[7], &m0, &m1]);
        b.output(&y);
    }
    b.finish()
}

/// One round of a SHA-2-style compression on 8-bit words.
pub fn sha_round() -> Netlist {
    let mut b = Builder::new("sha_round", false);
    let w: Vec<Vec<String>> = ["a", "b", "c", "d", "e", "f", "g", "h", "k"].iter().map(|p| b.inputs(p, 8)).collect();
    let rot = |v: &[String], r: usize| -> Vec<String> { (0..8).map(|i| v[(i + r) % 8].clone()).collect() };
    let sigma = |b: &mut Builder, name: &str, v: &[String], r: [usize; 3]| -> Vec<String> {
        let (x, y, z) = (rot(v, r[0]), rot(v, r[1]), rot(v, r[2]));
        (0..8).map(|i| b.lut(format!("{name}{i}"), &[&x[i], &y[i], &z[i]], XOR3)).collect()
    };
    let s1 = sigma(&mut b, "s1_", &w[4], [1, 3, 6]);
    let s0 = sigma(&mut b, "s0_", &w[0], [2, 5, 7]);
    let ch: Vec<String> = (0..8).map(|i| b.lut(format!("ch{i}"), &[&w[4][i], &w[5][i], &w[6][i]], 0xD8)).collect();
    let maj: Vec<String> = (0..8).map(|i| b.lut(format!("maj{i}"), &[&w[0][i], &w[1][i], &w[2][i]], MAJ3)).collect();
    let t = b.add("t1a", &w[7], &s1);
    let t = b.add("t1b", &t, &ch);
    let t1 = b.add("t1c", &t, &w[8]);
    let t2 = b.add("t2", &s0, &maj);
    let na = b.add("na", &t1, &t2);
    let ne = b.add("ne", &w[3], &t1);
    for o in na.iter().chain(&ne) {
        b.output(o);
    }
    b.finish()
}

/// Register file, read muxes, barrel shifter and random decode logic.
/// Three LUT patterns occur more than 100 times.
pub fn riscv_like() -> Netlist {
    const XLEN: usize = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(0x52_5635);
    let mut b = Builder::new("riscv_like", true);
    let we = b.input("we");
    let rd = b.inputs("rd", 3);
    let rs1 = b.inputs("rs1_", 3);
    let rs2 = b.inputs("rs2_", 3);
    let wdata = b.inputs("wdata", XLEN);
    let instr = b.inputs("instr", 12);
    let regs: Vec<Vec<String>> = (0..8).map(|r| (0..XLEN).map(|i| format!("x{r}_{i}")).collect()).collect();
    for (r, reg) in regs.iter().enumerate() {
        let en = b.lut_fn(format!("we{r}"), &[&we, &rd[0], &rd[1], &rd[2]], |i| bit(i, 0) && (i >> 1) == r);
        for (i, q) in reg.iter().enumerate() {
            let d = b.lut(format!("wm{r}_{i}"), &[q, &wdata[i], &en], MUX_DDS);
            b.ff(q.clone(), &d, false);
        }
    }
    let mux4 = mask_from_fn(6, |i| bit(i, (i >> 4) & 3)).bits();
    let read = |b: &mut Builder, port: &str, sel: &[String]| -> Vec<String> {
        (0..XLEN)
            .map(|i| {
                let lo = b.lut(format!("{port}_lo{i}"), &[&regs[0][i], &regs[1][i], &regs[2][i], &regs[3][i], &sel[0], &sel[1]], mux4);
                let hi = b.lut(format!("{port}_hi{i}"), &[&regs[4][i], &regs[5][i], &regs[6][i], &regs[7][i], &sel[0], &sel[1]], mux4);
                b.lut(format!("{port}_d{i}"), &[&lo, &hi, &sel[2]], MUX_DDS)
            })
            .collect()
    };
    let src1 = read(&mut b, "r1", &rs1);
    let src2 = read(&mut b, "r2", &rs2);
    let mut x = src1;
    for (stage, k) in [1usize, 2, 4, 8].into_iter().enumerate() {
        let sel = src2[stage].clone();
        x = (0..XLEN)
            .map(|i| {
                let name = format!("sh{k}_{i}");
                if i >= k {
                    b.lut(name, &[&sel, &x[i], &x[i - k]], MUX_SDD)
                } else {
                    b.lut(name, &[&sel, &x[i]], 0x4)
                }
            })
            .collect();
    }
    for o in x.iter().chain(&src2) {
        b.output(o);
    }
    let mut pool: Vec<String> = instr.clone();
    pool.extend(src2[8..16].iter().cloned());
    for k in 0..60 {
        let ins: Vec<String> = pool.choose_multiple(&mut rng, 6).cloned().collect();
        let refs: Vec<&String> = ins.iter().collect();
        let d = b.lut(format!("dec{k:02}"), &refs, rng.gen::<u64>() | 1);
        pool.push(d.clone());
        if k >= 30 {
            b.output(&d);
        }
    }
    b.finish()
}
