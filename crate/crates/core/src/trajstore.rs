//! Map-matched trajectories and qualified-trajectory lookup.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::roadnet::{EdgeId, Path, RoadNetError, RoadNetwork};
use crate::time::{TimeInterval, DAY_MINUTES};

#[derive(Debug, thiserror::Error)]
pub enum TrajError {
    #[error("trajectory `{id}`: {source}")]
    Path { id: String, source: RoadNetError },
    #[error("trajectory `{id}` record {index}: exit before enter")]
    ExitBeforeEnter { id: String, index: usize },
    #[error("trajectory `{id}` record {index}: negative or non-finite cost")]
    BadCost { id: String, index: usize },
    #[error("trajectory `{id}` record {index}: timestamps go backwards")]
    OutOfOrder { id: String, index: usize },
    #[error("trajectory file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One edge traversal; times are seconds since the Unix epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTraversal {
    pub edge: EdgeId,
    pub enter: f64,
    pub exit: f64,
    pub cost: f64,
}

impl EdgeTraversal {
    /// A travel-time record (cost = exit − enter).
    pub fn timed(edge: impl Into<EdgeId>, enter: f64, exit: f64) -> Self {
        EdgeTraversal {
            edge: edge.into(),
            enter,
            exit,
            cost: exit - enter,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: String,
    pub records: Vec<EdgeTraversal>,
}

/// Per-edge costs of one qualified traversal of a query path.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector {
    /// Index of the trajectory inside its store (stores sort trajectories by id).
    pub trajectory: usize,
    /// Record position where the traversal starts.
    pub position: usize,
    /// Entry time on the path's first edge, seconds since the epoch.
    pub entry: f64,
    /// Entry time of day in minutes, after the store's UTC offset.
    pub minute: f64,
    pub costs: Vec<f64>,
}

impl CostVector {
    pub fn total(&self) -> f64 {
        self.costs.iter().sum()
    }
}

/// Immutable trajectory collection indexed by edge.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryStore {
    trajectories: Vec<Trajectory>,
    index: HashMap<EdgeId, Vec<(u32, u32)>>,
    utc_offset_minutes: i32,
}

impl TrajectoryStore {
    pub fn ingest(
        network: &RoadNetwork,
        trajectories: impl IntoIterator<Item = Trajectory>,
    ) -> Result<Self, TrajError> {
        Self::ingest_with_offset(network, trajectories, 0)
    }

    /// Ingests with a fixed offset from UTC used for time-of-day qualification.
    pub fn ingest_with_offset(
        network: &RoadNetwork,
        trajectories: impl IntoIterator<Item = Trajectory>,
        utc_offset_minutes: i32,
    ) -> Result<Self, TrajError> {
        let mut trajectories: Vec<Trajectory> = trajectories.into_iter().collect();
        for t in &trajectories {
            validate(network, t)?;
        }
        trajectories.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index: HashMap<EdgeId, Vec<(u32, u32)>> = HashMap::new();
        for (ti, t) in trajectories.iter().enumerate() {
            for (pos, r) in t.records.iter().enumerate() {
                index
                    .entry(r.edge.clone())
                    .or_default()
                    .push((ti as u32, pos as u32));
            }
        }
        Ok(TrajectoryStore {
            trajectories,
            index,
            utc_offset_minutes,
        })
    }

    pub fn read_jsonl<R: BufRead>(network: &RoadNetwork, reader: R) -> Result<Self, TrajError> {
        Self::ingest(network, read_jsonl(reader)?)
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn utc_offset_minutes(&self) -> i32 {
        self.utc_offset_minutes
    }

    /// Number of traversal records on `edge`.
    pub fn edge_record_count(&self, edge: &EdgeId) -> usize {
        self.index.get(edge).map_or(0, Vec::len)
    }

    /// Time of day in minutes for an epoch timestamp.
    pub fn minute_of_day(&self, epoch_seconds: f64) -> f64 {
        let day = DAY_MINUTES as f64 * 60.0;
        let local = epoch_seconds + self.utc_offset_minutes as f64 * 60.0;
        local.rem_euclid(day) / 60.0
    }

    /// Every traversal of `p`, regardless of time, ordered by trajectory.
    pub fn occurrences(&self, p: &Path) -> Vec<CostVector> {
        let Some(hits) = self.index.get(p.first()) else {
            return Vec::new();
        };
        let n = p.len();
        let mut out = Vec::new();
        for &(ti, pos) in hits {
            let recs = &self.trajectories[ti as usize].records[pos as usize..];
            if recs.len() < n || !recs.iter().zip(p.edges()).all(|(r, e)| &r.edge == e) {
                continue;
            }
            let entry = recs[0].enter;
            out.push(CostVector {
                trajectory: ti as usize,
                position: pos as usize,
                entry,
                minute: self.minute_of_day(entry),
                costs: recs[..n].iter().map(|r| r.cost).collect(),
            });
        }
        out
    }

    /// Occurrences of `P ∘ ⟨next⟩` given the occurrences of `P`.
    pub fn extend_occurrences(&self, occurrences: &[CostVector], next: &EdgeId) -> Vec<CostVector> {
        occurrences
            .iter()
            .filter_map(|c| {
                let recs = &self.trajectories[c.trajectory].records;
                let r = recs.get(c.position + c.costs.len())?;
                (&r.edge == next).then(|| {
                    let mut ext = c.clone();
                    ext.costs.push(r.cost);
                    ext
                })
            })
            .collect()
    }

    /// Traversals of `p` whose entry time of day falls in `interval`.
    pub fn qualified(&self, p: &Path, interval: &TimeInterval) -> Vec<CostVector> {
        let mut v = self.occurrences(p);
        v.retain(|c| interval.contains(c.minute));
        v
    }

    /// A new store without the trajectories at the given indices.
    pub fn without(&self, excluded: &[usize]) -> TrajectoryStore {
        let mut drop = vec![false; self.trajectories.len()];
        for &i in excluded {
            drop[i] = true;
        }
        let kept: Vec<Trajectory> = self
            .trajectories
            .iter()
            .zip(&drop)
            .filter(|(_, d)| !**d)
            .map(|(t, _)| t.clone())
            .collect();
        let mut index: HashMap<EdgeId, Vec<(u32, u32)>> = HashMap::new();
        for (ti, t) in kept.iter().enumerate() {
            for (pos, r) in t.records.iter().enumerate() {
                index
                    .entry(r.edge.clone())
                    .or_default()
                    .push((ti as u32, pos as u32));
            }
        }
        TrajectoryStore {
            trajectories: kept,
            index,
            utc_offset_minutes: self.utc_offset_minutes,
        }
    }
}

fn validate(network: &RoadNetwork, t: &Trajectory) -> Result<(), TrajError> {
    let edges: Vec<EdgeId> = t.records.iter().map(|r| r.edge.clone()).collect();
    if !edges.is_empty() {
        Path::new(network, edges).map_err(|source| TrajError::Path {
            id: t.id.clone(),
            source,
        })?;
    }
    let mut last = f64::NEG_INFINITY;
    for (index, r) in t.records.iter().enumerate() {
        if r.exit < r.enter {
            return Err(TrajError::ExitBeforeEnter {
                id: t.id.clone(),
                index,
            });
        }
        if !(r.cost >= 0.0 && r.cost.is_finite()) {
            return Err(TrajError::BadCost {
                id: t.id.clone(),
                index,
            });
        }
        if r.enter < last {
            return Err(TrajError::OutOfOrder {
                id: t.id.clone(),
                index,
            });
        }
        last = r.exit;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    edge: String,
    enter: String,
    exit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryLine {
    id: String,
    records: Vec<RecordLine>,
}

fn parse_time(s: &str) -> Result<f64, String> {
    let t = DateTime::parse_from_rfc3339(s).map_err(|e| format!("bad timestamp `{s}`: {e}"))?;
    Ok(t.timestamp() as f64 + t.timestamp_subsec_nanos() as f64 * 1e-9)
}

fn format_time(epoch_seconds: f64) -> String {
    let secs = epoch_seconds.floor();
    let nanos = ((epoch_seconds - secs) * 1e9).round() as u32;
    let t = DateTime::<Utc>::from_timestamp(secs as i64, nanos.min(999_999_999))
        .expect("timestamp in range");
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Parses the JSON Lines trajectory format; blank lines are skipped.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<Trajectory>, TrajError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| TrajError::Parse {
            line: i + 1,
            message,
        };
        let parsed: TrajectoryLine = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let mut records = Vec::with_capacity(parsed.records.len());
        for r in parsed.records {
            let enter = parse_time(&r.enter).map_err(err)?;
            let exit = parse_time(&r.exit).map_err(err)?;
            records.push(EdgeTraversal {
                edge: EdgeId::from(r.edge),
                enter,
                exit,
                cost: r.cost.unwrap_or(exit - enter),
            });
        }
        out.push(Trajectory {
            id: parsed.id,
            records,
        });
    }
    Ok(out)
}

/// Writes trajectories as JSON Lines. Costs equal to `exit − enter` are left implicit.
pub fn write_jsonl<W: Write>(mut w: W, trajectories: &[Trajectory]) -> std::io::Result<()> {
    for t in trajectories {
        let line = TrajectoryLine {
            id: t.id.clone(),
            records: t
                .records
                .iter()
                .map(|r| RecordLine {
                    edge: r.edge.to_string(),
                    enter: format_time(r.enter),
                    exit: format_time(r.exit),
                    cost: (r.cost != r.exit - r.enter).then_some(r.cost),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
