//! Directed road-network model and path algebra.
//!
//! A [`RoadNetwork`] owns a set of [`Edge`]s keyed by their external id. A
//! [`Path`] is a validated sequence of adjacent edges that never revisits a
//! vertex. Paths are cheap to slice: every prefix, suffix and contiguous run of
//! a valid path is itself a valid path.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::ops::Range;
use std::path::Path as FsPath;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// External edge identifier, as supplied by input files.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(Arc<str>);

impl EdgeId {
    pub fn new(id: impl AsRef<str>) -> Self {
        EdgeId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EdgeId {
    fn from(s: &str) -> Self {
        EdgeId::new(s)
    }
}

impl From<String> for EdgeId {
    fn from(s: String) -> Self {
        EdgeId(Arc::from(s))
    }
}

impl Serialize for EdgeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for EdgeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(EdgeId::from(s))
    }
}

/// Vertex identifier. Vertices only exist as edge endpoints.
pub type VertexId = String;

#[derive(Debug, thiserror::Error)]
pub enum RoadNetError {
    #[error("unknown edge id `{0}`")]
    UnknownEdge(EdgeId),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(EdgeId),
    #[error("edge `{id}`: {reason}")]
    InvalidEdge { id: EdgeId, reason: String },
    #[error("path is empty")]
    EmptyPath,
    #[error("edges `{0}` and `{1}` are not adjacent")]
    NotAdjacent(EdgeId, EdgeId),
    #[error("path revisits vertex `{0}`")]
    RepeatedVertex(VertexId),
    #[error("network file line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A directed road segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    #[serde(rename = "edge_id")]
    pub id: EdgeId,
    #[serde(rename = "from_vertex")]
    pub start: VertexId,
    #[serde(rename = "to_vertex")]
    pub end: VertexId,
    #[serde(rename = "length_m")]
    pub length: f64,
    #[serde(rename = "speed_limit_kmh")]
    pub speed_limit: f64,
}

impl Edge {
    pub fn new(
        id: impl Into<EdgeId>,
        start: impl Into<VertexId>,
        end: impl Into<VertexId>,
        length: f64,
        speed_limit: f64,
    ) -> Result<Self, RoadNetError> {
        let edge = Edge {
            id: id.into(),
            start: start.into(),
            end: end.into(),
            length,
            speed_limit,
        };
        edge.validate()?;
        Ok(edge)
    }

    fn validate(&self) -> Result<(), RoadNetError> {
        let fail = |reason: &str| {
            Err(RoadNetError::InvalidEdge {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.start == self.end {
            return fail("start and end vertex coincide");
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return fail("length must be positive");
        }
        if !(self.speed_limit > 0.0 && self.speed_limit.is_finite()) {
            return fail("speed limit must be positive");
        }
        Ok(())
    }

    /// Free-flow traversal time in seconds at the speed limit.
    pub fn free_flow_seconds(&self) -> f64 {
        self.length / (self.speed_limit / 3.6)
    }
}

/// A directed graph of road segments.
#[derive(Debug, Clone, Default)]
pub struct RoadNetwork {
    vertices: BTreeSet<VertexId>,
    edges: BTreeMap<EdgeId, Edge>,
    order: Vec<EdgeId>,
    outgoing: HashMap<VertexId, Vec<EdgeId>>,
}

impl RoadNetwork {
    pub fn new(edges: impl IntoIterator<Item = Edge>) -> Result<Self, RoadNetError> {
        let mut net = RoadNetwork::default();
        for edge in edges {
            edge.validate()?;
            if net.edges.contains_key(&edge.id) {
                return Err(RoadNetError::DuplicateEdge(edge.id));
            }
            net.vertices.insert(edge.start.clone());
            net.vertices.insert(edge.end.clone());
            net.outgoing
                .entry(edge.start.clone())
                .or_default()
                .push(edge.id.clone());
            net.order.push(edge.id.clone());
            net.edges.insert(edge.id.clone(), edge);
        }
        Ok(net)
    }

    /// Reads the `edge_id,from_vertex,to_vertex,length_m,speed_limit_kmh` CSV format.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, RoadNetError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
        const EXPECTED: [&str; 5] = [
            "edge_id",
            "from_vertex",
            "to_vertex",
            "length_m",
            "speed_limit_kmh",
        ];
        if headers.iter().collect::<Vec<_>>() != EXPECTED {
            return Err(RoadNetError::Parse {
                line: 1,
                message: format!("expected header `{}`", EXPECTED.join(",")),
            });
        }
        let mut edges = Vec::new();
        for (i, row) in rdr.deserialize::<Edge>().enumerate() {
            let line = i as u64 + 2;
            let edge = row.map_err(|e| csv_error(e, line))?;
            edge.validate().map_err(|e| RoadNetError::Parse {
                line,
                message: e.to_string(),
            })?;
            edges.push(edge);
        }
        Self::new(edges)
    }

    pub fn from_csv_path(path: impl AsRef<FsPath>) -> Result<Self, RoadNetError> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn to_csv_string(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for edge in self.edges() {
            wtr.serialize(edge).expect("in-memory csv write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }

    pub fn edge(&self, id: &EdgeId) -> Option<&Edge> {
        self.edges.get(id)
    }

    pub fn require(&self, id: &EdgeId) -> Result<&Edge, RoadNetError> {
        self.edges
            .get(id)
            .ok_or_else(|| RoadNetError::UnknownEdge(id.clone()))
    }

    /// Edges in input order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.order.iter().map(move |id| &self.edges[id])
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &BTreeSet<VertexId> {
        &self.vertices
    }

    /// Edges leaving `vertex`.
    pub fn outgoing(&self, vertex: &str) -> &[EdgeId] {
        self.outgoing.get(vertex).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn adjacent(&self, first: &EdgeId, second: &EdgeId) -> Result<bool, RoadNetError> {
        Ok(self.require(first)?.end == self.require(second)?.start)
    }

    /// Builds a validated path from edge ids.
    pub fn path<I, E>(&self, edges: I) -> Result<Path, RoadNetError>
    where
        I: IntoIterator<Item = E>,
        E: Into<EdgeId>,
    {
        let edges: Vec<EdgeId> = edges.into_iter().map(Into::into).collect();
        Path::new(self, edges)
    }

    /// `p1 ∘ p2`, or `None` when the paths are not adjacent or the result
    /// would revisit a vertex.
    pub fn concat(&self, p1: &Path, p2: &Path) -> Result<Option<Path>, RoadNetError> {
        for id in p1.edges().iter().chain(p2.edges()) {
            self.require(id)?;
        }
        if !self.adjacent(p1.last(), p2.first())? {
            return Ok(None);
        }
        let joined: Vec<EdgeId> = p1.edges().iter().chain(p2.edges()).cloned().collect();
        match Path::new(self, joined) {
            Ok(p) => Ok(Some(p)),
            Err(RoadNetError::RepeatedVertex(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// The vertex sequence `e1.s, e2.s, …, en.s, en.d` of a path.
    pub fn vertices_of(&self, path: &Path) -> Vec<&VertexId> {
        let mut out: Vec<&VertexId> = path.edges().iter().map(|e| &self.edges[e].start).collect();
        out.push(&self.edges[path.last()].end);
        out
    }
}

fn csv_error(e: csv::Error, fallback_line: u64) -> RoadNetError {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    RoadNetError::Parse {
        line,
        message: e.to_string(),
    }
}

/// A non-empty sequence of adjacent edges visiting distinct vertices.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    edges: Arc<[EdgeId]>,
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨")?;
        for (i, e) in self.edges.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "⟩")
    }
}

impl Serialize for Path {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.edges.iter())
    }
}

/// Deserialization checks only that the path is non-empty; adjacency needs the
/// network, so callers holding one should re-validate with [`Path::new`].
impl<'de> Deserialize<'de> for Path {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let edges = Vec::<EdgeId>::deserialize(deserializer)?;
        if edges.is_empty() {
            return Err(serde::de::Error::custom("empty path"));
        }
        Ok(Path::from_trusted(edges))
    }
}

impl Path {
    pub fn new(network: &RoadNetwork, edges: Vec<EdgeId>) -> Result<Self, RoadNetError> {
        if edges.is_empty() {
            return Err(RoadNetError::EmptyPath);
        }
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let first = network.require(&edges[0])?;
        seen.insert(&first.start);
        for pair in edges.windows(2) {
            let a = network.require(&pair[0])?;
            let b = network.require(&pair[1])?;
            if a.end != b.start {
                return Err(RoadNetError::NotAdjacent(a.id.clone(), b.id.clone()));
            }
        }
        for id in &edges {
            let end = &network.edges[id].end;
            if !seen.insert(end) {
                return Err(RoadNetError::RepeatedVertex(end.clone()));
            }
        }
        Ok(Path {
            edges: edges.into(),
        })
    }

    /// Wraps edge ids already known to form a valid path (e.g. a slice of one).
    pub(crate) fn from_trusted(edges: Vec<EdgeId>) -> Self {
        debug_assert!(!edges.is_empty());
        Path {
            edges: edges.into(),
        }
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    /// Always false; paths have at least one edge.
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn first(&self) -> &EdgeId {
        &self.edges[0]
    }

    pub fn last(&self) -> &EdgeId {
        &self.edges[self.edges.len() - 1]
    }

    /// Contiguous sub-path over edge positions `range`.
    pub fn slice(&self, range: Range<usize>) -> Path {
        assert!(
            range.start < range.end && range.end <= self.len(),
            "bad sub-path range"
        );
        Path::from_trusted(self.edges[range].to_vec())
    }

    /// Position of `sub` inside `self` when it occurs as a contiguous run.
    pub fn find(&self, sub: &Path) -> Option<usize> {
        find_run(&self.edges, &sub.edges)
    }

    pub fn contains_subpath(&self, sub: &Path) -> bool {
        self.find(sub).is_some()
    }
}

/// True iff `sub` occurs as a contiguous run of edges inside `path`.
pub fn is_subpath(sub: &Path, path: &Path) -> bool {
    path.contains_subpath(sub)
}

pub(crate) fn find_run(haystack: &[EdgeId], needle: &[EdgeId]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    // Paths never repeat an edge, so the first edge pins the only candidate.
    let start = haystack.iter().position(|e| e == &needle[0])?;
    (haystack.len() - start >= needle.len() && haystack[start..start + needle.len()] == *needle)
        .then_some(start)
}
