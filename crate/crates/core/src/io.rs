//! Text file formats for graphs, signals and sketches.
//!
//! Graph:
//! ```text
//! EXPANDER 1
//! <n> <m> <d> <D|->
//! <d ascending neighbor indices of left node 0>
//! ...
//! ```
//! Signal: `SIGNAL 1 <n>` followed by one `<index> <value>` line per nonzero
//! entry, indices ascending. Sketch: `SKETCH 1 <m>` followed by `m` values,
//! one per line.
//!
//! A signal or sketch whose values all parse as integers is read in exact
//! mode; otherwise in floating mode. Errors carry 1-based line numbers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::scalar::Scalar;
use crate::signal::{Sketch, SparseSignal};

/// Non-empty lines must all be consumed; a single trailing newline is fine.
struct Lines<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let mut lines: Vec<&str> = text.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        Lines { lines, pos: 0 }
    }

    /// Next line and its 1-based number.
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let line = self.pos + 1;
        let text = self
            .lines
            .get(self.pos)
            .ok_or_else(|| Error::parse(line, format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok((line, text.strip_suffix('\r').unwrap_or(text)))
    }

    fn finish(&self) -> Result<()> {
        match self.lines.get(self.pos) {
            Some(_) => Err(Error::parse(self.pos + 1, "trailing content after end of data")),
            None => Ok(()),
        }
    }
}

fn parse_usize(line: usize, tok: &str, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} {tok:?}")))
}

fn expect_header<'a>(line: usize, text: &'a str, magic: &str, fields: usize) -> Result<Vec<&'a str>> {
    let toks: Vec<&str> = text.split_ascii_whitespace().collect();
    if toks.first() != Some(&magic) {
        return Err(Error::parse(line, format!("expected header starting with {magic}")));
    }
    if toks.get(1) != Some(&"1") {
        return Err(Error::parse(line, "unsupported format version"));
    }
    if toks.len() != fields {
        return Err(Error::parse(line, format!("header must have {fields} fields")));
    }
    Ok(toks)
}

pub fn format_graph(g: &BipartiteGraph) -> String {
    let mut out = String::new();
    out.push_str("EXPANDER 1\n");
    let dd = g.right_degree().map_or_else(|| "-".to_string(), |v| v.to_string());
    let _ = writeln!(out, "{} {} {} {}", g.n(), g.m(), g.d(), dd);
    for row in g.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_graph(text: &str) -> Result<BipartiteGraph> {
    let mut lines = Lines::new(text);
    let (line, header) = lines.next("header")?;
    let toks: Vec<&str> = header.split_ascii_whitespace().collect();
    if toks != ["EXPANDER", "1"] {
        return Err(Error::parse(line, "expected header `EXPANDER 1`"));
    }
    let (line, dims) = lines.next("dimensions")?;
    let toks: Vec<&str> = dims.split_ascii_whitespace().collect();
    if toks.len() != 4 {
        return Err(Error::parse(line, "expected `<n> <m> <d> <D|->`"));
    }
    let n = parse_usize(line, toks[0], "n")?;
    let m = parse_usize(line, toks[1], "m")?;
    let d = parse_usize(line, toks[2], "d")?;
    let declared_right = match toks[3] {
        "-" => None,
        tok => Some(parse_usize(line, tok, "D")?),
    };
    if n == 0 || d == 0 || d > m {
        return Err(Error::parse(line, format!("need n >= 1 and 1 <= d <= m, got n={n} m={m} d={d}")));
    }

    let mut rows = Vec::with_capacity(n);
    for row in 0..n {
        let (line, text) = lines.next(&format!("row {row}"))?;
        let entries = text
            .split_ascii_whitespace()
            .map(|tok| parse_usize(line, tok, "neighbor index"))
            .collect::<Result<Vec<usize>>>()?;
        if entries.len() != d {
            return Err(Error::parse(
                line,
                format!("row {row} has {} entries, expected {d}", entries.len()),
            ));
        }
        if let Some(&bad) = entries.iter().find(|&&r| r >= m) {
            return Err(Error::Validation(format!(
                "line {line}: row {row} has neighbor {bad} outside [0, {m})"
            )));
        }
        if entries.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("line {line}: row {row} repeats a neighbor")));
        }
        if entries.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::parse(line, format!("row {row} is not in ascending order")));
        }
        rows.push(entries);
    }
    lines.finish()?;

    let g = BipartiteGraph::from_rows(m, d, rows)?;
    if g.right_degree() != declared_right {
        return Err(Error::Validation(format!(
            "header declares right degree {declared_right:?}, rows give {:?}",
            g.right_degree()
        )));
    }
    Ok(g)
}

pub fn save_graph(g: &BipartiteGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_graph(g))?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<BipartiteGraph> {
    parse_graph(&fs::read_to_string(path)?)
}

/// A signal file read in whichever mode its values require.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalFile {
    Exact(SparseSignal<i64>),
    Float(SparseSignal<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SketchFile {
    Exact(Sketch<i64>),
    Float(Sketch<f64>),
}

/// Parses the collected value tokens as integers if possible, else floats.
fn parse_values<T: Scalar>(tokens: &[(usize, &str)]) -> Result<Vec<T>> {
    tokens
        .iter()
        .map(|&(line, tok)| {
            T::parse_text(tok).ok_or_else(|| Error::parse(line, format!("invalid value {tok:?}")))
        })
        .collect()
}

fn all_integral(tokens: &[(usize, &str)]) -> bool {
    tokens.iter().all(|(_, tok)| i64::parse_text(tok).is_some())
}

pub fn format_signal<T: Scalar>(x: &SparseSignal<T>) -> String {
    let mut out = format!("SIGNAL 1 {}\n", x.dim());
    for (j, v) in x.iter() {
        let _ = writeln!(out, "{j} {}", v.to_text());
    }
    out
}

pub fn parse_signal(text: &str) -> Result<SignalFile> {
    let mut lines = Lines::new(text);
    let (line, header) = lines.next("header")?;
    let toks = expect_header(line, header, "SIGNAL", 3)?;
    let n = parse_usize(line, toks[2], "n")?;

    let mut indices = Vec::new();
    let mut values = Vec::new();
    while lines.pos < lines.lines.len() {
        let (line, text) = lines.next("entry")?;
        let toks: Vec<&str> = text.split_ascii_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::parse(line, "expected `<index> <value>`"));
        }
        let j = parse_usize(line, toks[0], "index")?;
        if j >= n {
            return Err(Error::parse(line, format!("index {j} outside [0, {n})")));
        }
        if indices.last().is_some_and(|&(_, prev)| prev >= j) {
            return Err(Error::parse(line, "indices must be strictly ascending"));
        }
        indices.push((line, j));
        values.push((line, toks[1]));
    }

    let idx = indices.into_iter().map(|(_, j)| j);
    if all_integral(&values) {
        let vals = parse_values::<i64>(&values)?;
        Ok(SignalFile::Exact(SparseSignal::from_entries(n, idx.zip(vals))?))
    } else {
        let vals = parse_values::<f64>(&values)?;
        Ok(SignalFile::Float(SparseSignal::from_entries(n, idx.zip(vals))?))
    }
}

pub fn format_sketch<T: Scalar>(y: &Sketch<T>) -> String {
    let mut out = format!("SKETCH 1 {}\n", y.m());
    for v in y.values() {
        out.push_str(&v.to_text());
        out.push('\n');
    }
    out
}

pub fn parse_sketch(text: &str) -> Result<SketchFile> {
    let mut lines = Lines::new(text);
    let (line, header) = lines.next("header")?;
    let toks = expect_header(line, header, "SKETCH", 3)?;
    let m = parse_usize(line, toks[2], "m")?;
    let mut values = Vec::with_capacity(m);
    for i in 0..m {
        let (line, text) = lines.next(&format!("value {i}"))?;
        let toks: Vec<&str> = text.split_ascii_whitespace().collect();
        if toks.len() != 1 {
            return Err(Error::parse(line, "expected a single value"));
        }
        values.push((line, toks[0]));
    }
    lines.finish()?;
    if all_integral(&values) {
        Ok(SketchFile::Exact(Sketch::new(parse_values(&values)?)))
    } else {
        Ok(SketchFile::Float(Sketch::new(parse_values(&values)?)))
    }
}

pub fn load_signal(path: impl AsRef<Path>) -> Result<SignalFile> {
    parse_signal(&fs::read_to_string(path)?)
}

pub fn load_sketch(path: impl AsRef<Path>) -> Result<SketchFile> {
    parse_sketch(&fs::read_to_string(path)?)
}
