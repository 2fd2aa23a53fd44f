use pathdist_core::{is_subpath, Edge, EdgeId, RoadNetError, RoadNetwork};
use proptest::prelude::*;

fn diamond() -> RoadNetwork {
    // a -e1-> b -e2-> c -e3-> d -e4-> e, plus e5: c -> a and e9: d -> b.
    RoadNetwork::new([
        Edge::new("e1", "a", "b", 100.0, 50.0).unwrap(),
        Edge::new("e2", "b", "c", 100.0, 50.0).unwrap(),
        Edge::new("e3", "c", "d", 100.0, 50.0).unwrap(),
        Edge::new("e4", "d", "e", 100.0, 50.0).unwrap(),
        Edge::new("e5", "c", "a", 100.0, 50.0).unwrap(),
        Edge::new("e9", "d", "b", 100.0, 50.0).unwrap(),
    ])
    .unwrap()
}

#[test]
fn concat_joins_adjacent_paths() {
    let net = diamond();
    let p = net
        .concat(&net.path(["e1"]).unwrap(), &net.path(["e2"]).unwrap())
        .unwrap();
    assert_eq!(
        p.unwrap().edges(),
        &[EdgeId::from("e1"), EdgeId::from("e2")]
    );
}

#[test]
fn concat_of_non_adjacent_paths_is_none() {
    let net = diamond();
    let p = net
        .concat(&net.path(["e1"]).unwrap(), &net.path(["e3"]).unwrap())
        .unwrap();
    assert!(p.is_none());
}

#[test]
fn concat_revisiting_a_vertex_is_none() {
    let net = diamond();
    let p1 = net.path(["e1", "e2"]).unwrap();
    let p2 = net.path(["e5"]).unwrap();
    assert!(net.concat(&p1, &p2).unwrap().is_none());
}

#[test]
fn concat_rejects_unknown_edges() {
    let net = diamond();
    let other = RoadNetwork::new([Edge::new("x1", "b", "z", 1.0, 1.0).unwrap()]).unwrap();
    let foreign = other.path(["x1"]).unwrap();
    let err = net
        .concat(&net.path(["e1"]).unwrap(), &foreign)
        .unwrap_err();
    assert!(matches!(err, RoadNetError::UnknownEdge(e) if e.as_str() == "x1"));
}

#[test]
fn subpath_cases() {
    let net = diamond();
    let full = net.path(["e1", "e2", "e3", "e4"]).unwrap();
    assert!(is_subpath(&net.path(["e2", "e3"]).unwrap(), &full));
    assert!(is_subpath(&full, &full));
    let short = net.path(["e1", "e2", "e3"]).unwrap();
    assert!(!is_subpath(
        &net.path(["e1", "e2"]).unwrap(),
        &net.path(["e2", "e3"]).unwrap()
    ));
    assert!(!is_subpath(&full, &short));
}

#[test]
fn non_contiguous_run_is_not_a_subpath() {
    // ⟨e1,e3⟩ is not even a path here, so compare raw runs through a network
    // where it is one.
    let net = RoadNetwork::new([
        Edge::new("e1", "a", "b", 1.0, 1.0).unwrap(),
        Edge::new("e2", "b", "c", 1.0, 1.0).unwrap(),
        Edge::new("e3", "b", "d", 1.0, 1.0).unwrap(),
        Edge::new("e4", "c", "b2", 1.0, 1.0).unwrap(),
    ])
    .unwrap();
    let sub = net.path(["e1", "e3"]).unwrap();
    let p = net.path(["e1", "e2", "e4"]).unwrap();
    assert!(!is_subpath(&sub, &p));
}

#[test]
fn path_construction_rejects_bad_sequences() {
    let net = diamond();
    assert!(matches!(
        net.path(Vec::<&str>::new()),
        Err(RoadNetError::EmptyPath)
    ));
    assert!(matches!(
        net.path(["e1", "e3"]),
        Err(RoadNetError::NotAdjacent(..))
    ));
    assert!(
        matches!(net.path(["e1", "e2", "e5"]), Err(RoadNetError::RepeatedVertex(v)) if v == "a")
    );
    assert!(
        matches!(net.path(["e2", "e3", "e9"]), Err(RoadNetError::RepeatedVertex(v)) if v == "b")
    );
    assert!(matches!(
        net.path(["zz"]),
        Err(RoadNetError::UnknownEdge(_))
    ));
}

#[test]
fn edges_are_validated() {
    assert!(Edge::new("x", "a", "a", 1.0, 1.0).is_err());
    assert!(Edge::new("x", "a", "b", 0.0, 1.0).is_err());
    assert!(Edge::new("x", "a", "b", 1.0, -3.0).is_err());
    let dup = RoadNetwork::new([
        Edge::new("x", "a", "b", 1.0, 1.0).unwrap(),
        Edge::new("x", "b", "c", 1.0, 1.0).unwrap(),
    ]);
    assert!(matches!(dup, Err(RoadNetError::DuplicateEdge(_))));
}

#[test]
fn adjacency_index_matches_edges() {
    let net = diamond();
    assert_eq!(net.vertices().len(), 5);
    assert_eq!(net.outgoing("c"), &[EdgeId::from("e3"), EdgeId::from("e5")]);
    assert!(net.outgoing("e").is_empty());
    for e in net.edges() {
        assert!(net.vertices().contains(&e.start) && net.vertices().contains(&e.end));
        assert!(net.outgoing(&e.start).contains(&e.id));
    }
}

#[test]
fn csv_round_trip() {
    let text =
        "edge_id,from_vertex,to_vertex,length_m,speed_limit_kmh\ne1,a,b,120.5,50\ne2,b,c,80,30\n";
    let net = RoadNetwork::from_csv_reader(text.as_bytes()).unwrap();
    assert_eq!(net.edge_count(), 2);
    let e1 = net.edge(&EdgeId::from("e1")).unwrap();
    assert_eq!((e1.length, e1.speed_limit), (120.5, 50.0));
    let again = RoadNetwork::from_csv_reader(net.to_csv_string().as_bytes()).unwrap();
    assert_eq!(
        again.edges().collect::<Vec<_>>(),
        net.edges().collect::<Vec<_>>()
    );
}

#[test]
fn csv_errors_carry_line_numbers() {
    let bad_header = "id,from,to,len,speed\ne1,a,b,1,1\n";
    assert!(matches!(
        RoadNetwork::from_csv_reader(bad_header.as_bytes()),
        Err(RoadNetError::Parse { line: 1, .. })
    ));
    let bad_row =
        "edge_id,from_vertex,to_vertex,length_m,speed_limit_kmh\ne1,a,b,1,1\ne2,b,c,oops,1\n";
    assert!(matches!(
        RoadNetwork::from_csv_reader(bad_row.as_bytes()),
        Err(RoadNetError::Parse { line: 3, .. })
    ));
    let bad_edge = "edge_id,from_vertex,to_vertex,length_m,speed_limit_kmh\ne1,a,a,1,1\n";
    assert!(matches!(
        RoadNetwork::from_csv_reader(bad_edge.as_bytes()),
        Err(RoadNetError::Parse { line: 2, .. })
    ));
}

#[test]
fn free_flow_time_uses_speed_limit() {
    let e = Edge::new("x", "a", "b", 500.0, 50.0).unwrap();
    assert!((e.free_flow_seconds() - 36.0).abs() < 1e-9);
}

fn line(n: usize) -> RoadNetwork {
    RoadNetwork::new((0..n).map(|i| {
        Edge::new(
            format!("e{i}"),
            format!("v{i}"),
            format!("v{}", i + 1),
            1.0,
            1.0,
        )
        .unwrap()
    }))
    .unwrap()
}

proptest! {
    #[test]
    fn concat_contains_both_parts(a in 0usize..8, mid in 1usize..8, len in 1usize..8) {
        let net = line(24);
        let p1 = net.path((a..a + mid).map(|i| format!("e{i}"))).unwrap();
        let p2 = net.path((a + mid..a + mid + len).map(|i| format!("e{i}"))).unwrap();
        let joined = net.concat(&p1, &p2).unwrap().unwrap();
        prop_assert_eq!(joined.len(), p1.len() + p2.len());
        prop_assert!(is_subpath(&p1, &joined) && is_subpath(&p2, &joined));
    }

    #[test]
    fn prefixes_and_suffixes_are_paths(a in 0usize..10, len in 1usize..12) {
        let net = line(24);
        let p = net.path((a..a + len).map(|i| format!("e{i}"))).unwrap();
        for k in 1..=p.len() {
            prop_assert!(net.path(p.edges()[..k].to_vec()).is_ok());
            prop_assert!(net.path(p.edges()[p.len() - k..].to_vec()).is_ok());
        }
    }

    #[test]
    fn subpath_is_transitive(a in 0usize..6, l1 in 1usize..6, o2 in 0usize..6, l2 in 1usize..6, o3 in 0usize..6, l3 in 1usize..6) {
        let net = line(40);
        let big = net.path((a..a + l1 + l2 + l3 + o2 + o3).map(|i| format!("e{i}"))).unwrap();
        let s = a + o2;
        let mid = net.path((s..s + l2 + l3 + o3).map(|i| format!("e{i}"))).unwrap();
        let t = s + o3;
        let small = net.path((t..t + l3).map(|i| format!("e{i}"))).unwrap();
        prop_assert!(is_subpath(&small, &mid) && is_subpath(&mid, &big));
        prop_assert!(is_subpath(&small, &big));
    }
}
