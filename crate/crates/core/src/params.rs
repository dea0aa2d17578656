//! Plain-text parameter files shared by the neural models.
//!
//! ```text
//! triadic-params 1
//! kind mlp
//! meta input_dim 7
//! block w1 100 7
//! <100 lines of 7 space-separated values>
//! ...
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! file read back reproduces the parameters bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};

const MAGIC: &str = "triadic-params 1";

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamFile {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub blocks: Vec<Block>,
}

impl ParamFile {
    pub fn new(kind: &str) -> Self {
        ParamFile { kind: kind.into(), ..Default::default() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn block(&mut self, name: &str, rows: usize, cols: usize, data: &[f64]) -> &mut Self {
        assert_eq!(rows * cols, data.len(), "block {name} shape");
        self.blocks.push(Block { name: name.into(), rows, cols, data: data.to_vec() });
        self
    }

    pub fn get_meta(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Format(format!("missing meta `{key}`")))
    }

    pub fn get_block(&self, name: &str) -> Result<&Block> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Format(format!("missing block `{name}`")))
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "kind {}", self.kind).unwrap();
        for (k, v) in &self.meta {
            writeln!(s, "meta {k} {v}").unwrap();
        }
        for b in &self.blocks {
            writeln!(s, "block {} {} {}", b.name, b.rows, b.cols).unwrap();
            for r in 0..b.rows {
                let row = &b.data[r * b.cols..(r + 1) * b.cols];
                let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                writeln!(s, "{}", line.join(" ")).unwrap();
            }
        }
        writeln!(s, "end").unwrap();
        out.write_all(s.as_bytes())?;
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Format(format!("unexpected end of file, expected {what}")))
        };
        if next("header")?.trim() != MAGIC {
            return Err(Error::Format("not a parameter file".into()));
        }
        let kind = next("kind")?;
        let kind = kind
            .strip_prefix("kind ")
            .ok_or_else(|| Error::Format("missing kind line".into()))?
            .to_string();
        let mut file = ParamFile::new(&kind);
        loop {
            let line = next("block or end")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["end"] => return Ok(file),
                ["meta", key, rest @ ..] => {
                    file.meta.push((key.to_string(), rest.join(" ")));
                }
                ["block", name, rows, cols] => {
                    let parse = |s: &str| {
                        s.parse::<usize>().map_err(|_| Error::Format(format!("bad size `{s}`")))
                    };
                    let (rows, cols) = (parse(rows)?, parse(cols)?);
                    let name = name.to_string();
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let row = next("block row")?;
                        let before = data.len();
                        for tok in row.split_whitespace() {
                            data.push(tok.parse::<f64>().map_err(|_| {
                                Error::Format(format!("bad value `{tok}` in block {name}"))
                            })?);
                        }
                        if data.len() - before != cols {
                            return Err(Error::Format(format!("block {name}: ragged row")));
                        }
                    }
                    file.blocks.push(Block { name, rows, cols, data });
                }
                _ => return Err(Error::Format(format!("unexpected line `{line}`"))),
            }
        }
    }
}
