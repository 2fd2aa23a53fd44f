//! Synthetic grid networks and trajectories with known cost distributions.
//!
//! Edge costs are drawn from time-of-day dependent mixtures of uniforms.
//! Adjacent edges along a route are coupled autoregressively:
//! `cost(e_{i+1}) = f · base + ρ · (cost(e_i) − mean(e_i))`, clipped at 0 and
//! rounded to whole seconds, where `f` is an optional per-trip driver factor
//! that adds dependence of every order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::histogram::{Bucket, HistError, Histogram1D};
use crate::roadnet::{Edge, EdgeId, Path, RoadNetError, RoadNetwork};
use crate::time::{TimeInterval, DAY_MINUTES};
use crate::trajstore::{EdgeTraversal, Trajectory};

/// Draws used by [`ground_truth_marginal`].
pub const TRUTH_DRAWS: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("grid needs at least one row and one column, got {rows}×{cols}")]
    ZeroDimension { rows: usize, cols: usize },
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid route: {0}")]
    Route(#[from] RoadNetError),
    #[error(transparent)]
    Histogram(#[from] HistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformComponent {
    pub weight: f64,
    pub low: f64,
    pub high: f64,
}

/// Base cost mixture for edges entered during `[start, end)` minutes of day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostProfile {
    pub start: u32,
    pub end: u32,
    pub components: Vec<UniformComponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RouteSpec {
    /// Random contiguous stretches of the row-0 eastbound corridor.
    Corridor { min_len: usize, max_len: usize },
    /// Fixed edge sequences, chosen uniformly.
    Fixed { paths: Vec<Vec<String>> },
}

fn default_length() -> f64 {
    500.0
}

fn default_speed() -> f64 {
    50.0
}

fn default_origin() -> f64 {
    // 2024-01-01T00:00:00Z
    1_704_067_200.0
}

/// Generator specification; the JSON model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthModel {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "default_length")]
    pub length_m: f64,
    #[serde(default = "default_speed")]
    pub speed_limit_kmh: f64,
    /// Base mixtures shared by all edges; must partition the day.
    pub profiles: Vec<CostProfile>,
    /// Per-edge replacements for `profiles`.
    #[serde(default)]
    pub edge_profiles: BTreeMap<String, Vec<CostProfile>>,
    /// Coupling between consecutive edges, in [0, 1].
    #[serde(default)]
    pub rho: f64,
    /// Per-trip factor drawn uniformly from `[1 − s, 1 + s]` and applied to every base draw.
    #[serde(default)]
    pub driver_spread: f64,
    /// Departure windows in minutes of day; departures are uniform over their union.
    pub departures: Vec<[u32; 2]>,
    pub routes: RouteSpec,
    /// Epoch seconds of the generated day's midnight (UTC).
    #[serde(default = "default_origin")]
    pub origin: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GroundTruthModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Model(m));
        if self.rows == 0 || self.cols == 0 {
            return Err(SynthError::ZeroDimension {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho {} outside [0, 1]", self.rho));
        }
        if !(0.0..1.0).contains(&self.driver_spread) {
            return bad(format!(
                "driver_spread {} outside [0, 1)",
                self.driver_spread
            ));
        }
        validate_profiles(&self.profiles)?;
        for (e, p) in &self.edge_profiles {
            validate_profiles(p).map_err(|err| SynthError::Model(format!("edge `{e}`: {err}")))?;
        }
        if self.departures.is_empty()
            || self
                .departures
                .iter()
                .any(|w| w[0] >= w[1] || w[1] > DAY_MINUTES)
        {
            return bad("departure windows must be non-empty sub-intervals of the day".into());
        }
        match &self.routes {
            RouteSpec::Corridor { min_len, max_len } => {
                if *min_len == 0 || min_len > max_len || *max_len >= self.cols {
                    return bad(format!(
                        "corridor stretches need 1 ≤ min_len ≤ max_len < cols ({min_len}, {max_len}, {})",
                        self.cols
                    ));
                }
            }
            RouteSpec::Fixed { paths } => {
                if paths.is_empty() {
                    return bad("no fixed routes".into());
                }
            }
        }
        Ok(())
    }

    fn profiles_for(&self, edge: &EdgeId) -> &[CostProfile] {
        self.edge_profiles
            .get(edge.as_str())
            .unwrap_or(&self.profiles)
    }

    /// The base mixture of `edge` when entered at `minute` of day.
    pub fn base(&self, edge: &EdgeId, minute: f64) -> &[UniformComponent] {
        let profiles = self.profiles_for(edge);
        let m = minute.rem_euclid(DAY_MINUTES as f64);
        &profiles
            .iter()
            .find(|p| (p.start as f64) <= m && m < p.end as f64)
            .unwrap_or(&profiles[profiles.len() - 1])
            .components
    }
}

fn validate_profiles(profiles: &[CostProfile]) -> Result<(), SynthError> {
    let bad = |m: &str| Err(SynthError::Model(m.to_string()));
    if profiles.is_empty()
        || profiles[0].start != 0
        || profiles[profiles.len() - 1].end != DAY_MINUTES
    {
        return bad("profiles must cover the whole day");
    }
    if profiles.windows(2).any(|w| w[0].end != w[1].start)
        || profiles.iter().any(|p| p.start >= p.end)
    {
        return bad("profiles must be contiguous and non-empty");
    }
    for p in profiles {
        if p.components.is_empty() {
            return bad("profile without components");
        }
        if p.components
            .iter()
            .any(|c| !(c.weight > 0.0) || !(c.low >= 0.0) || !(c.high > c.low))
        {
            return bad("components need positive weight and 0 ≤ low < high");
        }
        let w: f64 = p.components.iter().map(|c| c.weight).sum();
        if (w - 1.0).abs() > 1e-9 {
            return bad("component weights must sum to 1");
        }
    }
    Ok(())
}

fn mixture_mean(components: &[UniformComponent]) -> f64 {
    components
        .iter()
        .map(|c| c.weight * (c.low + c.high) / 2.0)
        .sum()
}

fn draw_mixture(components: &[UniformComponent], rng: &mut ChaCha8Rng) -> f64 {
    let mut x: f64 = rng.gen();
    for c in components {
        if x < c.weight {
            return rng.gen_range(c.low..c.high);
        }
        x -= c.weight;
    }
    let c = components[components.len() - 1];
    rng.gen_range(c.low..c.high)
}

fn corridor_id(col: usize) -> String {
    format!("e{}", col + 1)
}

/// Directed grid: one edge each way between horizontally and vertically
/// adjacent vertices `v{r}_{c}`. Row 0's eastbound edges are `e1, e2, …`; the
/// rest are named by direction, row and column of their start (`W0_3`, `S1_2`).
pub fn gen_network(rows: usize, cols: usize) -> Result<RoadNetwork, SynthError> {
    gen_network_with(rows, cols, default_length(), default_speed())
}

pub fn gen_network_with(
    rows: usize,
    cols: usize,
    length: f64,
    speed: f64,
) -> Result<RoadNetwork, SynthError> {
    if rows == 0 || cols == 0 {
        return Err(SynthError::ZeroDimension { rows, cols });
    }
    let v = |r: usize, c: usize| format!("v{r}_{c}");
    let mut edges = Vec::new();
    let mut push = |id: String, a: String, b: String| -> Result<(), SynthError> {
        edges.push(Edge::new(id, a, b, length, speed)?);
        Ok(())
    };
    for r in 0..rows {
        for c in 0..cols.saturating_sub(1) {
            let east = if r == 0 {
                corridor_id(c)
            } else {
                format!("E{r}_{c}")
            };
            push(east, v(r, c), v(r, c + 1))?;
            push(format!("W{r}_{}", c + 1), v(r, c + 1), v(r, c))?;
        }
    }
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols {
            push(format!("S{r}_{c}"), v(r, c), v(r + 1, c))?;
            push(format!("N{}_{c}", r + 1), v(r + 1, c), v(r, c))?;
        }
    }
    Ok(RoadNetwork::new(edges)?)
}

/// The network described by a model.
pub fn model_network(model: &GroundTruthModel) -> Result<RoadNetwork, SynthError> {
    model.validate()?;
    gen_network_with(
        model.rows,
        model.cols,
        model.length_m,
        model.speed_limit_kmh,
    )
}

/// The row-0 eastbound corridor of a model's network.
pub fn corridor(network: &RoadNetwork, cols: usize) -> Result<Path, SynthError> {
    Ok(network.path((0..cols - 1).map(|c| EdgeId::from(corridor_id(c))))?)
}

/// Costs of consecutive edges entered from `minute` on, with the coupling.
fn draw_costs(
    model: &GroundTruthModel,
    edges: &[EdgeId],
    minute: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let factor = if model.driver_spread > 0.0 {
        rng.gen_range(1.0 - model.driver_spread..1.0 + model.driver_spread)
    } else {
        1.0
    };
    let mut costs = Vec::with_capacity(edges.len());
    let mut clock = minute;
    let mut prev: Option<(f64, f64)> = None;
    for e in edges {
        let base = model.base(e, clock);
        let mut c = factor * draw_mixture(base, rng);
        if let Some((pc, pm)) = prev {
            c += model.rho * (pc - pm);
        }
        let c = c.max(0.0).round();
        prev = Some((c, mixture_mean(base)));
        clock += c / 60.0;
        costs.push(c);
    }
    costs
}

fn draw_departure(model: &GroundTruthModel, rng: &mut ChaCha8Rng) -> f64 {
    let total: u32 = model.departures.iter().map(|w| w[1] - w[0]).sum();
    let mut x = rng.gen_range(0.0..total as f64);
    for w in &model.departures {
        let len = (w[1] - w[0]) as f64;
        if x < len {
            return w[0] as f64 + x;
        }
        x -= len;
    }
    model.departures[model.departures.len() - 1][1] as f64 - 1e-9
}

/// `n` trajectories drawn from the model; trajectory `i` uses its own
/// random stream, so output does not depend on `n` for shared indices.
pub fn gen_trajectories(
    model: &GroundTruthModel,
    network: &RoadNetwork,
    n: usize,
) -> Result<Vec<Trajectory>, SynthError> {
    model.validate()?;
    let routes: Vec<Path> = match &model.routes {
        RouteSpec::Corridor { .. } => vec![corridor(network, model.cols)?],
        RouteSpec::Fixed { paths } => paths
            .iter()
            .map(|p| network.path(p.iter().map(|e| EdgeId::from(e.as_str()))))
            .collect::<Result<_, _>>()?,
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(i as u64);
        let route = match &model.routes {
            RouteSpec::Corridor { min_len, max_len } => {
                let len = rng.gen_range(*min_len..=*max_len);
                let start = rng.gen_range(0..=routes[0].len() - len);
                routes[0].slice(start..start + len)
            }
            RouteSpec::Fixed { .. } => routes[rng.gen_range(0..routes.len())].clone(),
        };
        let minute = (draw_departure(model, &mut rng) * 60.0).round() / 60.0;
        let costs = draw_costs(model, route.edges(), minute, &mut rng);
        let mut t = model.origin + minute * 60.0;
        let records = route
            .edges()
            .iter()
            .zip(costs)
            .map(|(e, c)| {
                let r = EdgeTraversal::timed(e.clone(), t, t + c);
                t += c;
                r
            })
            .collect();
        out.push(Trajectory {
            id: format!("t{i:06}"),
            records,
        });
    }
    Ok(out)
}

/// Monte Carlo distribution of the cost sum of `p` entered uniformly within
/// `interval`, with no coupling into the first edge, on `resolution` cells.
pub fn ground_truth_marginal(
    model: &GroundTruthModel,
    p: &Path,
    interval: &TimeInterval,
    resolution: f64,
) -> Result<Histogram1D, SynthError> {
    ground_truth_marginal_with(model, p, interval, resolution, TRUTH_DRAWS)
}

pub fn ground_truth_marginal_with(
    model: &GroundTruthModel,
    p: &Path,
    interval: &TimeInterval,
    resolution: f64,
    draws: usize,
) -> Result<Histogram1D, SynthError> {
    model.validate()?;
    if !(resolution > 0.0) || draws == 0 {
        return Err(SynthError::Model(
            "resolution and draw count must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed ^ 0x7275_7468);
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for _ in 0..draws {
        let minute = rng.gen_range(interval.start() as f64..interval.end() as f64);
        let total: f64 = draw_costs(model, p.edges(), minute, &mut rng).iter().sum();
        *counts
            .entry((total / resolution).floor() as i64)
            .or_insert(0) += 1;
    }
    let buckets = counts
        .into_iter()
        .map(|(k, c)| {
            let l = k as f64 * resolution;
            (
                Bucket {
                    l,
                    u: l + resolution,
                },
                c as f64 / draws as f64,
            )
        })
        .collect();
    Ok(Histogram1D::normalized(buckets)?)
}
