//! Plain-text weight format.
//!
//! A file holds one or more blocks. Each block starts with a header line
//!
//! ```text
//! seqnet-weights v1 <kind> <n_layers> <d_in> <d_h>
//! ```
//!
//! with `kind` one of `gru`, `lstm` or `head`, followed by named sections.
//! A section is a line `<name> <rows> <cols>` and then `rows` lines of
//! `cols` decimal reals. Floats are written with Rust's shortest
//! round-trip formatting, so save followed by load is bit-exact.
//!
//! Section order per kind:
//! - `gru`: `W_z[l] U_z[l] b_z[l] W_r[l] U_r[l] b_r[l] W_h[l] U_h[l] b_h[l]`
//!   for each layer `l` starting at 1.
//! - `lstm`: `W_i[l] U_i[l] b_i[l] W_f[l] U_f[l] b_f[l] W_o[l] U_o[l]
//!   b_o[l] W_g[l] U_g[l] b_g[l]` per layer, then `W_out` and `b_out`.
//! - `head` (`n_layers` is 1, `d_in` the encoder width, `d_h` the feature
//!   width): `W_f b_f W_c b_c`; the classifier row count carries the class
//!   count.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::Error;
use crate::seqnet::{GruLayer, GruWeights, HeadWeights, LstmLayer, LstmWeights, Mat};
use crate::Result;

pub const MAGIC: &str = "seqnet-weights";
pub const VERSION: &str = "v1";

/// One parsed block of a weight file.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightsBlock {
    Gru(GruWeights),
    Lstm(LstmWeights),
    Head(HeadWeights),
}

fn fmt_matrix(out: &mut String, name: &str, m: &Mat) {
    out.push_str(&format!("{name} {} {}\n", m.rows(), m.cols()));
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

fn fmt_vector(out: &mut String, name: &str, v: &[f64]) {
    out.push_str(&format!("{name} 1 {}\n", v.len()));
    let row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

pub fn format_gru(w: &GruWeights) -> String {
    let mut out = format!("{MAGIC} {VERSION} gru {} {} {}\n", w.n_layers(), w.d_in(), w.d_h());
    for (i, layer) in w.layers.iter().enumerate() {
        let l = i + 1;
        fmt_matrix(&mut out, &format!("W_z[{l}]"), &layer.w_z);
        fmt_matrix(&mut out, &format!("U_z[{l}]"), &layer.u_z);
        fmt_vector(&mut out, &format!("b_z[{l}]"), &layer.b_z);
        fmt_matrix(&mut out, &format!("W_r[{l}]"), &layer.w_r);
        fmt_matrix(&mut out, &format!("U_r[{l}]"), &layer.u_r);
        fmt_vector(&mut out, &format!("b_r[{l}]"), &layer.b_r);
        fmt_matrix(&mut out, &format!("W_h[{l}]"), &layer.w_h);
        fmt_matrix(&mut out, &format!("U_h[{l}]"), &layer.u_h);
        fmt_vector(&mut out, &format!("b_h[{l}]"), &layer.b_h);
    }
    out
}

pub fn format_lstm(w: &LstmWeights) -> String {
    let mut out = format!("{MAGIC} {VERSION} lstm {} {} {}\n", w.n_layers(), w.d_in(), w.d_h());
    for (i, layer) in w.layers.iter().enumerate() {
        let l = i + 1;
        fmt_matrix(&mut out, &format!("W_i[{l}]"), &layer.w_i);
        fmt_matrix(&mut out, &format!("U_i[{l}]"), &layer.u_i);
        fmt_vector(&mut out, &format!("b_i[{l}]"), &layer.b_i);
        fmt_matrix(&mut out, &format!("W_f[{l}]"), &layer.w_f);
        fmt_matrix(&mut out, &format!("U_f[{l}]"), &layer.u_f);
        fmt_vector(&mut out, &format!("b_f[{l}]"), &layer.b_f);
        fmt_matrix(&mut out, &format!("W_o[{l}]"), &layer.w_o);
        fmt_matrix(&mut out, &format!("U_o[{l}]"), &layer.u_o);
        fmt_vector(&mut out, &format!("b_o[{l}]"), &layer.b_o);
        fmt_matrix(&mut out, &format!("W_g[{l}]"), &layer.w_g);
        fmt_matrix(&mut out, &format!("U_g[{l}]"), &layer.u_g);
        fmt_vector(&mut out, &format!("b_g[{l}]"), &layer.b_g);
    }
    fmt_matrix(&mut out, "W_out", &w.w_out);
    fmt_vector(&mut out, "b_out", &w.b_out);
    out
}

pub fn format_head(w: &HeadWeights) -> String {
    let mut out =
        format!("{MAGIC} {VERSION} head 1 {} {}\n", w.input_dim(), w.feature_dim());
    fmt_matrix(&mut out, "W_f", &w.w_f);
    fmt_vector(&mut out, "b_f", &w.b_f);
    fmt_matrix(&mut out, "W_c", &w.w_c);
    fmt_vector(&mut out, "b_c", &w.b_c);
    out
}

struct Lines<'a> {
    iter: core::str::Lines<'a>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines { iter: text.lines() }
    }

    fn next_nonempty(&mut self) -> Option<&'a str> {
        for line in self.iter.by_ref() {
            let t = line.trim();
            if !t.is_empty() {
                return Some(t);
            }
        }
        None
    }
}

fn section_err(section: &str, message: &str) -> Error {
    Error::WeightFormat { section: section.to_string(), message: message.to_string() }
}

fn parse_section(lines: &mut Lines<'_>, expect: &str, rows: usize, cols: usize) -> Result<Mat> {
    let header = lines
        .next_nonempty()
        .ok_or_else(|| section_err(expect, "missing section"))?;
    let mut parts = header.split_whitespace();
    let name = parts.next().unwrap_or("");
    if name != expect {
        return Err(section_err(expect, &format!("found `{name}` instead")));
    }
    let r: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| section_err(expect, "bad row count"))?;
    let c: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| section_err(expect, "bad column count"))?;
    if r != rows || c != cols {
        return Err(section_err(
            expect,
            &format!("shape {r}x{c} does not match declared {rows}x{cols}"),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let line = lines
            .next_nonempty()
            .ok_or_else(|| section_err(expect, "truncated matrix"))?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| section_err(expect, &format!("bad number `{tok}`")))?;
            data.push(v);
            count += 1;
        }
        if count != cols {
            return Err(section_err(expect, &format!("row has {count} values, want {cols}")));
        }
    }
    Ok(Mat::from_rows(rows, cols, data))
}

fn parse_vector(lines: &mut Lines<'_>, expect: &str, len: usize) -> Result<Vec<f64>> {
    Ok(parse_section(lines, expect, 1, len)?.as_slice().to_vec())
}

fn parse_gru_block(lines: &mut Lines<'_>, n_layers: usize, d_in: usize, d_h: usize) -> Result<GruWeights> {
    let mut layers = Vec::with_capacity(n_layers);
    for l in 1..=n_layers {
        let din = if l == 1 { d_in } else { d_h };
        layers.push(GruLayer {
            w_z: parse_section(lines, &format!("W_z[{l}]"), d_h, din)?,
            u_z: parse_section(lines, &format!("U_z[{l}]"), d_h, d_h)?,
            b_z: parse_vector(lines, &format!("b_z[{l}]"), d_h)?,
            w_r: parse_section(lines, &format!("W_r[{l}]"), d_h, din)?,
            u_r: parse_section(lines, &format!("U_r[{l}]"), d_h, d_h)?,
            b_r: parse_vector(lines, &format!("b_r[{l}]"), d_h)?,
            w_h: parse_section(lines, &format!("W_h[{l}]"), d_h, din)?,
            u_h: parse_section(lines, &format!("U_h[{l}]"), d_h, d_h)?,
            b_h: parse_vector(lines, &format!("b_h[{l}]"), d_h)?,
        });
    }
    Ok(GruWeights { layers })
}

fn parse_lstm_block(lines: &mut Lines<'_>, n_layers: usize, d_in: usize, d_h: usize) -> Result<LstmWeights> {
    let mut layers = Vec::with_capacity(n_layers);
    for l in 1..=n_layers {
        let din = if l == 1 { d_in } else { d_h };
        layers.push(LstmLayer {
            w_i: parse_section(lines, &format!("W_i[{l}]"), d_h, din)?,
            u_i: parse_section(lines, &format!("U_i[{l}]"), d_h, d_h)?,
            b_i: parse_vector(lines, &format!("b_i[{l}]"), d_h)?,
            w_f: parse_section(lines, &format!("W_f[{l}]"), d_h, din)?,
            u_f: parse_section(lines, &format!("U_f[{l}]"), d_h, d_h)?,
            b_f: parse_vector(lines, &format!("b_f[{l}]"), d_h)?,
            w_o: parse_section(lines, &format!("W_o[{l}]"), d_h, din)?,
            u_o: parse_section(lines, &format!("U_o[{l}]"), d_h, d_h)?,
            b_o: parse_vector(lines, &format!("b_o[{l}]"), d_h)?,
            w_g: parse_section(lines, &format!("W_g[{l}]"), d_h, din)?,
            u_g: parse_section(lines, &format!("U_g[{l}]"), d_h, d_h)?,
            b_g: parse_vector(lines, &format!("b_g[{l}]"), d_h)?,
        });
    }
    let w_out = parse_section(lines, "W_out", 4, d_h)?;
    let b_out = parse_vector(lines, "b_out", 4)?;
    Ok(LstmWeights { layers, w_out, b_out })
}

fn parse_head_block(lines: &mut Lines<'_>, d_g: usize, d_f: usize) -> Result<HeadWeights> {
    let w_f = parse_section(lines, "W_f", d_f, d_g)?;
    let b_f = parse_vector(lines, "b_f", d_f)?;
    // Class count comes from the classifier's own section header.
    let header = lines
        .next_nonempty()
        .ok_or_else(|| section_err("W_c", "missing section"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("W_c") {
        return Err(section_err("W_c", "missing section"));
    }
    let classes: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| section_err("W_c", "bad row count"))?;
    let cols: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| section_err("W_c", "bad column count"))?;
    if cols != d_f {
        return Err(section_err("W_c", &format!("shape {classes}x{cols}, want columns {d_f}")));
    }
    let mut data = Vec::with_capacity(classes * d_f);
    for _ in 0..classes {
        let line = lines
            .next_nonempty()
            .ok_or_else(|| section_err("W_c", "truncated matrix"))?;
        for tok in line.split_whitespace() {
            data.push(tok.parse().map_err(|_| section_err("W_c", "bad number"))?);
        }
    }
    if data.len() != classes * d_f {
        return Err(section_err("W_c", "wrong number of values"));
    }
    let w_c = Mat::from_rows(classes, d_f, data);
    let b_c = parse_vector(lines, "b_c", classes)?;
    Ok(HeadWeights { w_f, b_f, w_c, b_c })
}

/// Parses every block in `text`.
pub fn parse_weights(text: &str) -> Result<Vec<WeightsBlock>> {
    let mut lines = Lines::new(text);
    let mut blocks = Vec::new();
    while let Some(header) = lines.next_nonempty() {
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 6 || parts[0] != MAGIC {
            return Err(section_err("header", "expected `seqnet-weights v1 <kind> <n> <d_in> <d_h>`"));
        }
        if parts[1] != VERSION {
            return Err(section_err("header", &format!("unsupported version {}", parts[1])));
        }
        let n_layers: usize =
            parts[3].parse().map_err(|_| section_err("header", "bad layer count"))?;
        let d_in: usize = parts[4].parse().map_err(|_| section_err("header", "bad d_in"))?;
        let d_h: usize = parts[5].parse().map_err(|_| section_err("header", "bad d_h"))?;
        if n_layers == 0 || d_in == 0 || d_h == 0 {
            return Err(section_err("header", "dimensions must be positive"));
        }
        let block = match parts[2] {
            "gru" => WeightsBlock::Gru(parse_gru_block(&mut lines, n_layers, d_in, d_h)?),
            "lstm" => WeightsBlock::Lstm(parse_lstm_block(&mut lines, n_layers, d_in, d_h)?),
            "head" => WeightsBlock::Head(parse_head_block(&mut lines, d_in, d_h)?),
            other => return Err(section_err("header", &format!("unknown kind `{other}`"))),
        };
        blocks.push(block);
    }
    if blocks.is_empty() {
        return Err(section_err("header", "empty weight file"));
    }
    Ok(blocks)
}
