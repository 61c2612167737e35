// SPDX-License-Identifier: Apache-2.0

//! BLIF subset reader and writer.
//!
//! Supported directives: `.model`, `.inputs`, `.outputs`, `.names`, `.latch`
//! and `.end`. A `.names` block becomes a reconfigurable LUT whose first
//! listed input is `in_0` (the mask LSB). Zero-input blocks become tie cells.
//!
//! Static cells are written as ordinary covers preceded by a `#@static <KIND>`
//! comment; the reader restores the gate kind from it and checks the cover
//! against the gate's truth table. Other tools simply see a `.names` block.

use std::fmt::Write as _;

use super::{Cell, CellKind, GateKind, LutMask, Mode, Netlist, NetlistError, MAX_LUT_WIDTH};

const STATIC_TAG: &str = "#@static";

struct Line {
    number: usize,
    tokens: Vec<String>,
    /// `Some(kind)` for a `#@static` annotation line.
    annotation: Option<String>,
}

fn logical_lines(text: &str) -> Vec<Line> {
    let mut out = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix(STATIC_TAG) {
            out.push(Line { number, tokens: Vec::new(), annotation: Some(rest.trim().to_string()) });
            continue;
        }
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let (content, continued) = match content.trim_end().strip_suffix('\\') {
            Some(c) => (c, true),
            None => (content, false),
        };
        let (start, mut acc) = pending.take().unwrap_or((number, String::new()));
        acc.push(' ');
        acc.push_str(content);
        if continued {
            pending = Some((start, acc));
            continue;
        }
        let tokens: Vec<String> = acc.split_whitespace().map(str::to_string).collect();
        if !tokens.is_empty() {
            out.push(Line { number: start, tokens, annotation: None });
        }
    }
    if let Some((start, acc)) = pending {
        let tokens: Vec<String> = acc.split_whitespace().map(str::to_string).collect();
        if !tokens.is_empty() {
            out.push(Line { number: start, tokens, annotation: None });
        }
    }
    out
}

fn syntax(line: usize, msg: impl Into<String>) -> NetlistError {
    NetlistError::Syntax { line, msg: msg.into() }
}

/// Expands a cover into a mask over `width` inputs.
fn cover_to_bits(width: usize, cubes: &[(usize, String, char)]) -> Result<u64, NetlistError> {
    let mut on = 0u64;
    let mut polarity: Option<char> = None;
    for (line, cube, out) in cubes {
        if cube.len() != width {
            return Err(syntax(*line, format!("cube `{cube}` has {} literals, expected {width}", cube.len())));
        }
        match polarity {
            None => polarity = Some(*out),
            Some(p) if p != *out => return Err(syntax(*line, "cover mixes on-set and off-set rows")),
            _ => {}
        }
        let lits: Vec<char> = cube.chars().collect();
        for row in 0..(1usize << width) {
            let hit = lits.iter().enumerate().all(|(j, &l)| match l {
                '-' => true,
                '0' => (row >> j) & 1 == 0,
                '1' => (row >> j) & 1 == 1,
                _ => false,
            });
            if hit {
                on |= 1 << row;
            }
        }
        if let Some(bad) = lits.iter().find(|c| !matches!(c, '0' | '1' | '-')) {
            return Err(syntax(*line, format!("invalid literal `{bad}` in cube")));
        }
    }
    let full = if width == 0 { 1 } else { LutMask::full(width as u8) };
    Ok(match polarity {
        Some('0') => !on & full,
        _ => on,
    })
}

/// Parses BLIF text into a validated netlist.
pub fn parse_blif(text: &str) -> Result<Netlist, NetlistError> {
    let lines = logical_lines(text);
    let mut netlist = Netlist::new("top");
    let mut i = 0;
    let mut annotation: Option<(usize, String)> = None;
    let mut ended = false;
    while i < lines.len() {
        let line = &lines[i];
        i += 1;
        if let Some(kind) = &line.annotation {
            annotation = Some((line.number, kind.clone()));
            continue;
        }
        let head = line.tokens[0].as_str();
        if ended {
            return Err(syntax(line.number, format!("`{head}` after .end")));
        }
        match head {
            ".model" => {
                netlist.name = line.tokens.get(1).cloned().unwrap_or_else(|| "top".into());
            }
            ".inputs" => netlist.inputs.extend(line.tokens[1..].iter().cloned()),
            ".outputs" => netlist.outputs.extend(line.tokens[1..].iter().cloned()),
            ".clock" => {
                for clk in &line.tokens[1..] {
                    set_clock(&mut netlist, clk, line.number)?;
                }
            }
            ".names" => {
                if line.tokens.len() < 2 {
                    return Err(syntax(line.number, ".names without an output"));
                }
                let signals = &line.tokens[1..];
                let (output, inputs) = signals.split_last().expect("non-empty");
                if inputs.len() > MAX_LUT_WIDTH as usize {
                    return Err(NetlistError::TooManyInputs {
                        line: line.number,
                        net: output.clone(),
                        inputs: inputs.len(),
                    });
                }
                let mut cubes = Vec::new();
                while i < lines.len() && lines[i].annotation.is_none() && !lines[i].tokens[0].starts_with('.') {
                    let row = &lines[i];
                    let (cube, out) = match (inputs.len(), row.tokens.as_slice()) {
                        (0, [o]) => (String::new(), o.as_str()),
                        (_, [c, o]) => (c.clone(), o.as_str()),
                        _ => return Err(syntax(row.number, "malformed cover row")),
                    };
                    let out = match out {
                        "0" => '0',
                        "1" => '1',
                        _ => return Err(syntax(row.number, format!("invalid output literal `{out}`"))),
                    };
                    cubes.push((row.number, cube, out));
                    i += 1;
                }
                let bits = cover_to_bits(inputs.len(), &cubes)?;
                let cell = build_names_cell(output, inputs, bits, annotation.take(), line.number)?;
                netlist.add_cell(cell)?;
            }
            ".latch" => {
                let t = &line.tokens;
                if t.len() < 3 {
                    return Err(syntax(line.number, ".latch needs input and output"));
                }
                let (d, q) = (t[1].clone(), t[2].clone());
                let rest = &t[3..];
                let (control, init) = match rest {
                    [] => (None, None),
                    [init] => (None, Some(init.as_str())),
                    [_ty, ctrl] => (Some(ctrl.as_str()), None),
                    [_ty, ctrl, init] => (Some(ctrl.as_str()), Some(init.as_str())),
                    _ => return Err(syntax(line.number, "too many .latch fields")),
                };
                let init = match init {
                    None | Some("0") | Some("2") | Some("3") => false,
                    Some("1") => true,
                    Some(other) => return Err(syntax(line.number, format!("invalid latch init `{other}`"))),
                };
                let mut inputs = vec![d];
                if let Some(ctrl) = control.filter(|c| *c != "NIL") {
                    set_clock(&mut netlist, ctrl, line.number)?;
                    inputs.push(ctrl.to_string());
                }
                netlist.add_cell(Cell::ff(q, inputs, init))?;
                annotation = None;
            }
            ".end" => ended = true,
            other if other.starts_with('.') => {
                return Err(syntax(line.number, format!("unsupported directive `{other}`")));
            }
            other => return Err(syntax(line.number, format!("unexpected token `{other}`"))),
        }
    }
    // FFs parsed before a clock appeared elsewhere keep their single input;
    // bring them in line with the netlist clock.
    if let Some(clk) = netlist.clock.clone() {
        for c in netlist.cells_mut() {
            if c.is_ff() && c.inputs.len() == 1 {
                c.inputs.push(clk.clone());
            }
        }
    }
    netlist.validate()?;
    Ok(netlist)
}

fn set_clock(netlist: &mut Netlist, clk: &str, line: usize) -> Result<(), NetlistError> {
    match &netlist.clock {
        None => {
            netlist.clock = Some(clk.to_string());
            Ok(())
        }
        Some(c) if c == clk => Ok(()),
        Some(c) => {
            let _ = line;
            Err(NetlistError::MultipleClocks(c.clone(), clk.to_string()))
        }
    }
}

fn build_names_cell(
    output: &str,
    inputs: &[String],
    bits: u64,
    annotation: Option<(usize, String)>,
    line: usize,
) -> Result<Cell, NetlistError> {
    let inputs = inputs.to_vec();
    if inputs.is_empty() {
        let kind = if bits & 1 == 1 { GateKind::Tie1 } else { GateKind::Tie0 };
        let mut cell = Cell::gate(output, kind, inputs);
        cell.origin = annotation.and_then(|(_, a)| {
            a.split_whitespace().find_map(|p| p.strip_prefix("origin=")).map(str::to_string)
        });
        return Ok(cell);
    }
    let mask = LutMask::new(inputs.len() as u8, bits)?;
    match annotation {
        None => Ok(Cell::lut(output, inputs, mask)),
        Some((_, kind)) if kind.trim() == "LUT" => {
            let mut c = Cell::lut(output, inputs, mask);
            c.mode = Mode::Static;
            Ok(c)
        }
        Some((aline, annot)) => {
            let mut parts = annot.split_whitespace();
            let kind = parts.next().unwrap_or_default().to_string();
            let origin = parts.find_map(|p| p.strip_prefix("origin=")).map(str::to_string);
            let gate = GateKind::from_name(&kind).ok_or_else(|| syntax(aline, format!("unknown static kind `{kind}`")))?;
            if gate.truth_table() != Some(mask) {
                return Err(syntax(line, format!("cover of `{output}` does not match {kind}")));
            }
            let mut cell = Cell::gate(output, gate, inputs);
            cell.origin = origin;
            Ok(cell)
        }
    }
}

fn write_cover(out: &mut String, mask: LutMask) {
    let width = mask.width() as usize;
    for row in 0..mask.num_rows() {
        if mask.eval(row) {
            let cube: String = (0..width).map(|j| if (row >> j) & 1 == 1 { '1' } else { '0' }).collect();
            let _ = writeln!(out, "{cube} 1");
        }
    }
}

fn write_port_list(out: &mut String, directive: &str, nets: &[String]) {
    if nets.is_empty() {
        return;
    }
    let _ = write!(out, "{directive}");
    for (k, n) in nets.iter().enumerate() {
        if k > 0 && k % 16 == 0 {
            out.push_str(" \\\n");
        }
        let _ = write!(out, " {n}");
    }
    out.push('\n');
}

/// Writes a netlist as BLIF. Cells appear sorted by id.
pub fn emit_blif(netlist: &Netlist) -> Result<String, NetlistError> {
    netlist.validate()?;
    let mut out = String::new();
    let _ = writeln!(out, ".model {}", netlist.name);
    write_port_list(&mut out, ".inputs", &netlist.inputs);
    write_port_list(&mut out, ".outputs", &netlist.outputs);
    if let Some(clk) = &netlist.clock {
        let _ = writeln!(out, ".clock {clk}");
    }
    for cell in netlist.cells() {
        match &cell.kind {
            CellKind::Ff { init } => {
                let init = u8::from(*init);
                match cell.inputs.get(1) {
                    Some(clk) => {
                        let _ = writeln!(out, ".latch {} {} re {} {}", cell.inputs[0], cell.output, clk, init);
                    }
                    None => {
                        let _ = writeln!(out, ".latch {} {} {}", cell.inputs[0], cell.output, init);
                    }
                }
            }
            CellKind::Lut(mask) => {
                if cell.mode == Mode::Static {
                    let _ = writeln!(out, "{STATIC_TAG} LUT");
                }
                let _ = writeln!(out, ".names {} {}", cell.inputs.join(" "), cell.output);
                write_cover(&mut out, *mask);
            }
            CellKind::Gate(g) => {
                match &cell.origin {
                    Some(o) => {
                        let _ = writeln!(out, "{STATIC_TAG} {} origin={o}", g.name());
                    }
                    None => {
                        let _ = writeln!(out, "{STATIC_TAG} {}", g.name());
                    }
                }
                match g.truth_table() {
                    Some(mask) => {
                        let _ = writeln!(out, ".names {} {}", cell.inputs.join(" "), cell.output);
                        write_cover(&mut out, mask);
                    }
                    None => {
                        let _ = writeln!(out, ".names {}", cell.output);
                        if *g == GateKind::Tie1 {
                            out.push_str("1\n");
                        }
                    }
                }
            }
        }
    }
    out.push_str(".end\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn and_cover() {
        let n = parse_blif(".model t\n.inputs a b\n.outputs y\n.names a b y\n11 1\n.end\n").unwrap();
        let c = n.cell("y").unwrap();
        assert_eq!(c.lut_mask().unwrap().bits(), 0x8);
        assert!(c.is_reconfigurable());
    }

    #[test]
    fn or_cover_with_dont_cares() {
        let n = parse_blif(".model t\n.inputs a b\n.outputs y\n.names a b y\n1- 1\n-1 1\n.end\n").unwrap();
        assert_eq!(n.cell("y").unwrap().lut_mask().unwrap().bits(), 0xE);
    }

    #[test]
    fn first_input_is_lsb() {
        // y = a & !b: row index a + 2b = 1
        let n = parse_blif(".model t\n.inputs a b\n.outputs y\n.names a b y\n10 1\n.end\n").unwrap();
        assert_eq!(n.cell("y").unwrap().lut_mask().unwrap().bits(), 0x2);
    }

    #[test]
    fn constant_names() {
        let n = parse_blif(".model t\n.outputs y z\n.names y\n1\n.names z\n.end\n").unwrap();
        assert_eq!(n.cell("y").unwrap().kind, CellKind::Gate(GateKind::Tie1));
        assert_eq!(n.cell("z").unwrap().kind, CellKind::Gate(GateKind::Tie0));
    }

    #[test]
    fn off_set_cover() {
        let n = parse_blif(".model t\n.inputs a b\n.outputs y\n.names a b y\n11 0\n.end\n").unwrap();
        assert_eq!(n.cell("y").unwrap().lut_mask().unwrap().bits(), 0x7);
    }

    #[test]
    fn too_many_inputs() {
        let text = ".model t\n.inputs a b c d e f g\n.outputs y\n.names a b c d e f g y\n1111111 1\n.end\n";
        match parse_blif(text) {
            Err(NetlistError::TooManyInputs { line, inputs, .. }) => {
                assert_eq!(line, 4);
                assert_eq!(inputs, 7);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_line() {
        let text = ".model t\n.inputs a\n.outputs y\n.names a y\n1x 1\n.end\n";
        match parse_blif(text) {
            Err(NetlistError::Syntax { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn multiply_driven() {
        let text = ".model t\n.inputs a\n.outputs y\n.names a y\n1 1\n.names a y\n0 1\n.end\n";
        assert!(matches!(parse_blif(text), Err(NetlistError::MultipleDrivers(n)) if n == "y"));
    }

    #[test]
    fn undriven_input() {
        let text = ".model t\n.inputs a\n.outputs y\n.names a b y\n11 1\n.end\n";
        assert!(matches!(parse_blif(text), Err(NetlistError::Undriven { net, .. }) if net == "b"));
    }

    #[test]
    fn combinational_cycle() {
        let text = ".model t\n.inputs a\n.outputs y\n.names a z y\n11 1\n.names y z\n0 1\n.end\n";
        assert!(matches!(parse_blif(text), Err(NetlistError::CombinationalCycle(_))));
    }

    #[test]
    fn multiple_clocks_rejected() {
        let text = ".model t\n.inputs a c1 c2\n.outputs q r\n.latch a q re c1 0\n.latch a r re c2 0\n.end\n";
        assert!(matches!(parse_blif(text), Err(NetlistError::MultipleClocks(..))));
    }

    #[test]
    fn latch_and_continuation() {
        let text = ".model t\n.inputs a \\\n clk\n.outputs q\n.latch a q re clk 1\n.end\n";
        let n = parse_blif(text).unwrap();
        assert_eq!(n.inputs, vec!["a", "clk"]);
        assert_eq!(n.clock.as_deref(), Some("clk"));
        let q = n.cell("q").unwrap();
        assert_eq!(q.kind, CellKind::Ff { init: true });
        assert_eq!(q.inputs, vec!["a", "clk"]);
    }

    #[test]
    fn emit_and_lut() {
        let n = parse_blif(".model t\n.inputs a b\n.outputs y\n.names a b y\n11 1\n.end\n").unwrap();
        let text = emit_blif(&n).unwrap();
        assert!(text.contains(".names a b y\n11 1\n"));
        assert_eq!(parse_blif(&text).unwrap(), n);
    }

    #[test]
    fn emit_one_latch() {
        let n = parse_blif(".model t\n.inputs a clk\n.outputs q\n.latch a q re clk 0\n.end\n").unwrap();
        let text = emit_blif(&n).unwrap();
        assert_eq!(text.matches(".latch").count(), 1);
    }

    #[test]
    fn static_gates_round_trip() {
        let mut n = Netlist::new("g");
        n.add_input("a");
        n.add_input("b");
        n.add_input("s");
        for (out, kind, ins) in [
            ("y0", GateKind::And2, vec!["a", "b"]),
            ("y1", GateKind::Mux2, vec!["s", "a", "b"]),
            ("y2", GateKind::Inv, vec!["a"]),
            ("y3", GateKind::Tie1, vec![]),
            ("y4", GateKind::Tie0, vec![]),
            ("y5", GateKind::Nor2, vec!["a", "y2"]),
        ] {
            let mut cell = Cell::gate(out, kind, ins.into_iter().map(String::from).collect());
            if out == "y0" || out == "y3" {
                cell.origin = Some("u7".into());
            }
            n.add_cell(cell).unwrap();
            n.add_output(out);
        }
        let mut st = Cell::lut("y6", vec!["a".into(), "b".into()], LutMask::new(2, 0x6).unwrap());
        st.mode = Mode::Static;
        n.add_cell(st).unwrap();
        n.add_output("y6");
        let text = emit_blif(&n).unwrap();
        assert_eq!(parse_blif(&text).unwrap(), n);
    }

    #[test]
    fn mismatched_annotation_rejected() {
        let text = ".model t\n.inputs a b\n.outputs y\n#@static AND2\n.names a b y\n1- 1\n.end\n";
        assert!(matches!(parse_blif(text), Err(NetlistError::Syntax { line: 5, .. })));
    }
}
