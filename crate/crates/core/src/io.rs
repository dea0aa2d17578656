//! CSV ingest and export for networks.
//!
//! Nodes: `student_id,school_id,course,class_group,gender,crt,q1,q2,q3`
//! where gender is `M`, `F` or `NB` and `q1..q3` are 1 for a selfish answer.
//! Edges: `src,dst,weight` with weight in {-2, -1, 1, 2}.
//!
//! Students with any empty attribute are dropped together with every edge
//! that touches them; the [`LoadReport`] lists who was dropped.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Gender, Prosociality, SignedDigraph, StudentAttributes, Weight};

pub const NODE_HEADER: [&str; 9] =
    ["student_id", "school_id", "course", "class_group", "gender", "crt", "q1", "q2", "q3"];
pub const EDGE_HEADER: [&str; 3] = ["src", "dst", "weight"];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub dropped_students: Vec<String>,
    pub dropped_edges: usize,
}

#[derive(Debug)]
pub struct Loaded {
    pub graph: SignedDigraph,
    pub report: LoadReport,
}

fn column_map(headers: &csv::StringRecord, expected: &[&str], what: &str) -> Result<Vec<usize>> {
    expected
        .iter()
        .map(|name| {
            headers.iter().position(|h| h.trim() == *name).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("{what} header is missing column `{name}`"),
            })
        })
        .collect()
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_bit(s: &str, line: u64, col: &str) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(parse_err(line, format!("{col} must be 0 or 1, got `{other}`"))),
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r)
}

/// Builds a graph from node and edge tables.
pub fn load_network<N: Read, E: Read>(nodes: N, edges: E) -> Result<Loaded> {
    let mut graph = SignedDigraph::new();
    let mut report = LoadReport::default();

    let mut rdr = reader(nodes);
    let cols = column_map(rdr.headers()?, &NODE_HEADER, "nodes")?;
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let field = |c: usize| rec.get(cols[c]).unwrap_or("");
        let id = field(0);
        if id.is_empty() {
            return Err(parse_err(line, "empty student_id"));
        }
        if (1..9).any(|c| field(c).is_empty()) {
            report.dropped_students.push(id.to_string());
            continue;
        }
        let course = field(2)
            .parse::<i32>()
            .map_err(|_| parse_err(line, format!("course `{}` is not an integer", field(2))))?;
        let gender = Gender::from_code(field(4))
            .ok_or_else(|| parse_err(line, format!("gender `{}` not one of M, F, NB", field(4))))?;
        let crt = field(5)
            .parse::<u8>()
            .ok()
            .filter(|c| *c <= 3)
            .ok_or_else(|| parse_err(line, format!("crt `{}` not in 0..=3", field(5))))?;
        let q1 = parse_bit(field(6), line, "q1")?;
        let q2 = parse_bit(field(7), line, "q2")?;
        let q3 = parse_bit(field(8), line, "q3")?;
        graph
            .add_student(StudentAttributes {
                student_id: id.to_string(),
                school_id: field(1).to_string(),
                course,
                class_group: field(3).to_string(),
                gender,
                crt,
                prosociality: Prosociality::from_answers(q1, q2, q3),
            })
            .map_err(|e| parse_err(line, e.to_string()))?;
    }

    let mut rdr = reader(edges);
    let cols = column_map(rdr.headers()?, &EDGE_HEADER, "edges")?;
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let field = |c: usize| rec.get(cols[c]).unwrap_or("");
        let (src, dst) = (field(0), field(1));
        let raw = field(2)
            .parse::<i64>()
            .map_err(|_| parse_err(line, format!("weight `{}` is not an integer", field(2))))?;
        let weight = Weight::new(raw)?;
        if report.dropped_students.iter().any(|d| d == src || d == dst) {
            report.dropped_edges += 1;
            continue;
        }
        let a = graph
            .index_of(src)
            .ok_or_else(|| Error::Validation(format!("line {line}: unknown student `{src}`")))?;
        let b = graph
            .index_of(dst)
            .ok_or_else(|| Error::Validation(format!("line {line}: unknown student `{dst}`")))?;
        graph.add_edge(a, b, weight).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("line {line}: {m}")),
            other => other,
        })?;
    }
    Ok(Loaded { graph, report })
}

pub fn load_network_files(nodes: &Path, edges: &Path) -> Result<Loaded> {
    load_network(File::open(nodes)?, File::open(edges)?)
}

/// Writes the nodes table. Answers are emitted canonically: a student with
/// `s` selfish answers gets `q1..qs = 1` and the rest 0.
pub fn write_nodes<W: Write>(g: &SignedDigraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(NODE_HEADER)?;
    for s in g.students() {
        let selfish = s.prosociality.selfish_answers();
        let q = |k: u8| if k < selfish { "1" } else { "0" };
        w.write_record([
            s.student_id.as_str(),
            s.school_id.as_str(),
            &s.course.to_string(),
            s.class_group.as_str(),
            s.gender.code(),
            &s.crt.to_string(),
            q(0),
            q(1),
            q(2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges<W: Write>(g: &SignedDigraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EDGE_HEADER)?;
    for e in g.edges() {
        w.write_record([
            g.student(e.src).student_id.as_str(),
            g.student(e.dst).student_id.as_str(),
            &e.weight.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_network(g: &SignedDigraph, nodes: &Path, edges: &Path) -> Result<()> {
    write_nodes(g, File::create(nodes)?)?;
    write_edges(g, File::create(edges)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NODES: &str = "student_id,school_id,course,class_group,gender,crt,q1,q2,q3\n\
        A,s1,1,a,M,2,1,0,0\n\
        B,s1,1,a,F,0,0,0,0\n";

    #[test]
    fn two_nodes_one_edge() {
        let l = load_network(NODES.as_bytes(), "src,dst,weight\nA,B,2\n".as_bytes()).unwrap();
        assert_eq!(l.graph.node_count(), 2);
        assert_eq!(l.graph.edge_count(), 1);
        let a = l.graph.index_of("A").unwrap();
        assert!((l.graph.student(a).prosociality.value() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dropped_node_drops_edges() {
        let nodes = format!("{NODES}C,s1,1,a,NB,,0,0,1\n");
        let l = load_network(nodes.as_bytes(), "src,dst,weight\nA,C,-1\nA,B,1\n".as_bytes())
            .unwrap();
        assert_eq!(l.graph.node_count(), 2);
        assert_eq!(l.graph.edge_count(), 1);
        assert_eq!(l.report.dropped_students, vec!["C".to_string()]);
        assert_eq!(l.report.dropped_edges, 1);
    }

    #[test]
    fn bad_inputs() {
        let e = load_network(NODES.as_bytes(), "src,dst,weight\nA,B,3\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::InvalidWeight(3)));
        let e = load_network(NODES.as_bytes(), "src,dst,weight\nA,B,1\nA,B,2\n".as_bytes())
            .unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
        let nodes = format!("{NODES}C,s1,x,a,M,1,0,0,0\n");
        let e = load_network(nodes.as_bytes(), "src,dst,weight\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e:?}");
        let e = load_network("id,x\n".as_bytes(), "src,dst,weight\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn roundtrip() {
        let l = load_network(NODES.as_bytes(), "src,dst,weight\nA,B,-2\nB,A,1\n".as_bytes())
            .unwrap();
        let (mut n, mut e) = (Vec::new(), Vec::new());
        write_nodes(&l.graph, &mut n).unwrap();
        write_edges(&l.graph, &mut e).unwrap();
        let again = load_network(n.as_slice(), e.as_slice()).unwrap();
        assert_eq!(again.graph.students(), l.graph.students());
        assert_eq!(again.graph.edges().collect::<Vec<_>>(), l.graph.edges().collect::<Vec<_>>());
    }
}
