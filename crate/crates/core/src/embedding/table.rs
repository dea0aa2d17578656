use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-node vectors of a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
}

const MAGIC: &[u8; 4] = b"EMBT";
const VERSION: u32 = 1;

impl EmbeddingTable {
    /// `data` is row-major, one row of `dim` values per id.
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != ids.len() * dim {
            return Err(Error::Shape { expected: ids.len() * dim, actual: data.len() });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate node id {id} in embedding")));
            }
        }
        Ok(EmbeddingTable { ids, index, dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    /// CSV with header `node_id,e0..e{dim-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["node_id".to_string()];
        header.extend((0..self.dim).map(|i| format!("e{i}")));
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let dim = r.headers()?.len().saturating_sub(1);
        let (mut ids, mut data) = (Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            ids.push(rec.get(0).unwrap_or("").to_string());
            for v in rec.iter().skip(1) {
                data.push(v.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{v}` is not a number"),
                })?);
            }
        }
        Self::new(ids, dim, data)
    }

    /// Binary layout, little endian: magic `EMBT`, u32 version, u64 node
    /// count, u64 dimension, then per node a u32 id length, the UTF-8 id and
    /// `dim` f64 values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        out.write_all(&(self.dim as u64).to_le_bytes())?;
        for (i, id) in self.ids.iter().enumerate() {
            out.write_all(&(id.len() as u32).to_le_bytes())?;
            out.write_all(id.as_bytes())?;
            for v in self.row(i) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not an embedding table".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported embedding version {version}")));
        }
        input.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        input.read_exact(&mut b8)?;
        let dim = u64::from_le_bytes(b8) as usize;
        let mut ids = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * dim);
        for _ in 0..n {
            input.read_exact(&mut b4)?;
            let mut id = vec![0u8; u32::from_le_bytes(b4) as usize];
            input.read_exact(&mut id)?;
            ids.push(String::from_utf8(id).map_err(|e| Error::Format(e.to_string()))?);
            for _ in 0..dim {
                input.read_exact(&mut b8)?;
                data.push(f64::from_le_bytes(b8));
            }
        }
        Self::new(ids, dim, data)
    }
}

/// How two node vectors are combined into one edge vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Merge {
    #[default]
    Hadamard,
    Average,
    AbsDiff,
    SquaredDiff,
    Concat,
}

impl Merge {
    pub const ALL: [Merge; 5] =
        [Merge::Hadamard, Merge::Average, Merge::AbsDiff, Merge::SquaredDiff, Merge::Concat];

    pub fn output_dim(self, node_dim: usize) -> usize {
        if self == Merge::Concat {
            2 * node_dim
        } else {
            node_dim
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Merge::Hadamard => "hadamard",
            Merge::Average => "average",
            Merge::AbsDiff => "abs_diff",
            Merge::SquaredDiff => "squared_diff",
            Merge::Concat => "concat",
        }
    }

    pub fn apply(self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let zip = a.iter().zip(b);
        match self {
            Merge::Hadamard => zip.map(|(x, y)| x * y).collect(),
            Merge::Average => zip.map(|(x, y)| (x + y) / 2.0).collect(),
            Merge::AbsDiff => zip.map(|(x, y)| (x - y).abs()).collect(),
            Merge::SquaredDiff => zip.map(|(x, y)| (x - y) * (x - y)).collect(),
            Merge::Concat => a.iter().chain(b).copied().collect(),
        }
    }
}

impl fmt::Display for Merge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Merge {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Merge::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown merge operator `{s}`")))
    }
}

/// Edge vector for the pair `(i, j)` of node ids.
pub fn embed_edge(table: &EmbeddingTable, i: &str, j: &str, merge: Merge) -> Result<Vec<f64>> {
    let a = table.get(i).ok_or_else(|| Error::UnknownNode(i.to_string()))?;
    let b = table.get(j).ok_or_else(|| Error::UnknownNode(j.to_string()))?;
    Ok(merge.apply(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::new(
            vec!["a".into(), "b".into(), "z".into()],
            3,
            vec![1.0, -2.0, 0.5, 3.0, 0.25, -1.0, 0.0, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn merge_identities() {
        let t = table();
        assert_eq!(embed_edge(&t, "a", "z", Merge::Hadamard).unwrap(), vec![0.0, -0.0, 0.0]);
        assert_eq!(embed_edge(&t, "a", "a", Merge::Average).unwrap(), t.get("a").unwrap());
        assert_eq!(
            embed_edge(&t, "a", "b", Merge::AbsDiff).unwrap(),
            embed_edge(&t, "b", "a", Merge::AbsDiff).unwrap()
        );
        assert_eq!(embed_edge(&t, "a", "b", Merge::Concat).unwrap().len(), 6);
        assert!(matches!(embed_edge(&t, "a", "q", Merge::Hadamard), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn csv_and_binary_roundtrip() {
        let t = table();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("node_id,e0,e1,e2\n"));
        assert_eq!(EmbeddingTable::read_csv(buf.as_slice()).unwrap(), t);
        let mut bin = Vec::new();
        t.write_binary(&mut bin).unwrap();
        assert_eq!(EmbeddingTable::read_binary(bin.as_slice()).unwrap(), t);
        bin[0] = b'X';
        assert!(EmbeddingTable::read_binary(bin.as_slice()).is_err());
    }
}
