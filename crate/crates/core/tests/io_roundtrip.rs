use std::io::Cursor;

use triadic::io::{load_network, write_edges, write_nodes};
use triadic::synth::{generate, SynthConfig};
use triadic::Error;

#[test]
fn generated_network_round_trips() {
    let g = generate(&SynthConfig { n_schools: 1, courses_per_school: 1, seed: 2, ..SynthConfig::default() }).unwrap();
    let (mut nodes, mut edges) = (Vec::new(), Vec::new());
    write_nodes(&g, &mut nodes).unwrap();
    write_edges(&g, &mut edges).unwrap();
    let back = load_network(Cursor::new(&nodes), Cursor::new(&edges)).unwrap();
    assert!(back.report.dropped_students.is_empty());
    assert_eq!(back.graph.students(), g.students());
    assert_eq!(back.graph.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
}

const NODES: &str = "student_id,school_id,course,class_group,gender,crt,q1,q2,q3
a,s,1,A,F,2,0,0,1
b,s,1,A,M,0,1,1,1
c,s,1,B,NB,3,,0,0
";

#[test]
fn incomplete_students_are_dropped_with_their_edges() {
    let edges = "src,dst,weight\na,b,2\nb,c,-1\nc,a,1\n";
    let l = load_network(NODES.as_bytes(), edges.as_bytes()).unwrap();
    assert_eq!(l.graph.node_count(), 2);
    assert_eq!(l.graph.edge_count(), 1);
    assert_eq!(l.report.dropped_students, vec!["c".to_string()]);
    assert_eq!(l.report.dropped_edges, 2);
}

#[test]
fn rejects_bad_weight_and_self_loop() {
    let bad = load_network(NODES.as_bytes(), "src,dst,weight\na,b,0\n".as_bytes());
    assert!(matches!(bad, Err(Error::InvalidWeight(..))));
    let looped = load_network(NODES.as_bytes(), "src,dst,weight\na,a,1\n".as_bytes());
    assert!(looped.is_err());
    let unknown = load_network(NODES.as_bytes(), "src,dst,weight\na,zz,1\n".as_bytes());
    assert!(unknown.is_err());
}
