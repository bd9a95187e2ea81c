//! Instance model: TSPLIB parsing, TSPLIB-rounded distances, tours and the
//! best-known-solution registry.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

pub type Node = u32;

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("unsupported EDGE_WEIGHT_TYPE `{0}`")]
    UnsupportedMetric(String),
    #[error("malformed TSPLIB file: {0}")]
    MalformedFile(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("malformed BKS registry line {line}: {reason}")]
    MalformedBks { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Euc2d,
    Ceil2d,
}

impl Metric {
    pub fn tsplib_name(self) -> &'static str {
        match self {
            Metric::Euc2d => "EUC_2D",
            Metric::Ceil2d => "CEIL_2D",
        }
    }
}

impl FromStr for Metric {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "EUC_2D" => Ok(Metric::Euc2d),
            "CEIL_2D" => Ok(Metric::Ceil2d),
            other => Err(InstanceError::UnsupportedMetric(other.to_string())),
        }
    }
}

/// Immutable node coordinates plus the metric that turns them into integer
/// edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    name: String,
    coords: Vec<(f64, f64)>,
    metric: Metric,
}

impl TspInstance {
    pub fn new(
        name: impl Into<String>,
        coords: Vec<(f64, f64)>,
        metric: Metric,
    ) -> Result<Self, InstanceError> {
        if coords.len() < 3 {
            return Err(InstanceError::MalformedFile(format!(
                "need at least 3 nodes, got {}",
                coords.len()
            )));
        }
        if let Some(i) = coords
            .iter()
            .position(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(InstanceError::MalformedFile(format!(
                "non-finite coordinate at node {}",
                i + 1
            )));
        }
        Ok(Self {
            name: name.into(),
            coords,
            metric,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    pub fn coord(&self, i: Node) -> (f64, f64) {
        self.coords[i as usize]
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn euclidean(&self, i: Node, j: Node) -> f64 {
        let (xi, yi) = self.coords[i as usize];
        let (xj, yj) = self.coords[j as usize];
        let dx = xi - xj;
        let dy = yi - yj;
        (dx * dx + dy * dy).sqrt()
    }

    /// TSPLIB integer distance: `nint` for EUC_2D, ceiling for CEIL_2D.
    #[inline]
    pub fn distance(&self, i: Node, j: Node) -> i64 {
        round_metric(self.metric, self.euclidean(i, j))
    }

    pub fn tour_length(&self, order: &[Node]) -> Result<i64, InstanceError> {
        check_permutation(order, self.n())?;
        Ok(self.cycle_length(order))
    }

    /// Length of a closed walk over `order` without validating it.
    pub fn cycle_length(&self, order: &[Node]) -> i64 {
        if order.is_empty() {
            return 0;
        }
        let mut total = 0;
        for w in order.windows(2) {
            total += self.distance(w[0], w[1]);
        }
        total + self.distance(order[order.len() - 1], order[0])
    }

    /// Axis-aligned bounding box `(min_x, min_y, max_x, max_y)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let mut bb = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.coords {
            bb.0 = bb.0.min(x);
            bb.1 = bb.1.min(y);
            bb.2 = bb.2.max(x);
            bb.3 = bb.3.max(y);
        }
        bb
    }

    pub fn to_tsplib(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NAME : {}", self.name);
        let _ = writeln!(out, "TYPE : TSP");
        let _ = writeln!(out, "DIMENSION : {}", self.n());
        let _ = writeln!(out, "EDGE_WEIGHT_TYPE : {}", self.metric.tsplib_name());
        let _ = writeln!(out, "NODE_COORD_SECTION");
        for (i, (x, y)) in self.coords.iter().enumerate() {
            // `{}` on f64 prints the shortest string that round-trips.
            let _ = writeln!(out, "{} {} {}", i + 1, x, y);
        }
        out.push_str("EOF\n");
        out
    }
}

#[inline]
pub fn round_metric(metric: Metric, d: f64) -> i64 {
    match metric {
        Metric::Euc2d => (d + 0.5).floor() as i64,
        Metric::Ceil2d => d.ceil() as i64,
    }
}

pub fn check_permutation(order: &[Node], n: usize) -> Result<(), InstanceError> {
    if order.len() != n {
        return Err(InstanceError::InvalidPermutation(format!(
            "expected {} nodes, got {}",
            n,
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &v in order {
        let v = v as usize;
        if v >= n {
            return Err(InstanceError::InvalidPermutation(format!(
                "node {v} out of range"
            )));
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(InstanceError::InvalidPermutation(format!(
                "node {v} visited twice"
            )));
        }
    }
    Ok(())
}

/// Parse a TSPLIB `NODE_COORD_SECTION` file. Node ids are remapped to dense
/// 0-based indices in file order.
pub fn parse_tsplib(text: &str) -> Result<TspInstance, InstanceError> {
    let malformed = |msg: String| InstanceError::MalformedFile(msg);

    let mut name = String::from("unnamed");
    let mut dimension: Option<usize> = None;
    let mut metric: Option<Metric> = None;
    let mut coords = Vec::new();
    let mut in_coords = false;

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        if in_coords {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [_id, x, y] = parts[..] else {
                return Err(malformed(format!("bad coordinate line `{line}`")));
            };
            let x: f64 = x
                .parse()
                .map_err(|_| malformed(format!("bad x coordinate in `{line}`")))?;
            let y: f64 = y
                .parse()
                .map_err(|_| malformed(format!("bad y coordinate in `{line}`")))?;
            coords.push((x, y));
            continue;
        }
        if line.starts_with("NODE_COORD_SECTION") {
            in_coords = true;
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            if line.ends_with("_SECTION") {
                return Err(malformed(format!("unsupported section `{line}`")));
            }
            return Err(malformed(format!("unexpected line `{line}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "NAME" => name = value.to_string(),
            "DIMENSION" => {
                dimension = Some(
                    value
                        .parse()
                        .map_err(|_| malformed(format!("bad DIMENSION `{value}`")))?,
                )
            }
            "EDGE_WEIGHT_TYPE" => metric = Some(value.parse()?),
            "TYPE" => {
                if value != "TSP" {
                    return Err(malformed(format!("unsupported TYPE `{value}`")));
                }
            }
            _ => {}
        }
    }

    let dimension = dimension.ok_or_else(|| malformed("missing DIMENSION".into()))?;
    let metric = metric.ok_or_else(|| malformed("missing EDGE_WEIGHT_TYPE".into()))?;
    if !in_coords {
        return Err(malformed("missing NODE_COORD_SECTION".into()));
    }
    if coords.len() != dimension {
        return Err(malformed(format!(
            "DIMENSION is {dimension} but {} coordinates were listed",
            coords.len()
        )));
    }
    TspInstance::new(name, coords, metric)
}

/// A Hamiltonian cycle with its cached integer length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tour {
    order: Vec<Node>,
    length: i64,
}

impl Tour {
    pub fn new(inst: &TspInstance, order: Vec<Node>) -> Result<Self, InstanceError> {
        let length = inst.tour_length(&order)?;
        Ok(Self { order, length })
    }

    /// Caller guarantees `order` is a permutation and `length` is its length.
    pub(crate) fn from_parts(order: Vec<Node>, length: i64) -> Self {
        debug_assert!(check_permutation(&order, order.len()).is_ok());
        Self { order, length }
    }

    pub fn order(&self) -> &[Node] {
        &self.order
    }

    pub fn into_order(self) -> Vec<Node> {
        self.order
    }

    pub fn len(&self) -> i64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// The two tour neighbours of every node.
    pub fn adjacency(&self) -> Vec<[Node; 2]> {
        let n = self.order.len();
        let mut adj = vec![[0; 2]; n];
        for k in 0..n {
            let v = self.order[k] as usize;
            adj[v] = [self.order[(k + n - 1) % n], self.order[(k + 1) % n]];
        }
        adj
    }

    /// Undirected edges as `(min, max)` pairs, sorted.
    pub fn edges(&self) -> Vec<(Node, Node)> {
        let n = self.order.len();
        let mut e: Vec<_> = (0..n)
            .map(|k| {
                let (a, b) = (self.order[k], self.order[(k + 1) % n]);
                (a.min(b), a.max(b))
            })
            .collect();
        e.sort_unstable();
        e
    }

    /// Rotation/reflection-independent equality.
    pub fn same_cycle(&self, other: &Tour) -> bool {
        self.order.len() == other.order.len() && self.edges() == other.edges()
    }
}

/// Best-known lengths keyed by instance name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BksRegistry {
    entries: HashMap<String, i64>,
}

impl BksRegistry {
    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| InstanceError::MalformedBks {
                line: idx + 1,
                reason: reason.to_string(),
            };
            let mut parts = line.split_whitespace();
            let (Some(name), Some(len), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected `name length`"));
            };
            let len: i64 = len.parse().map_err(|_| bad("length is not an integer"))?;
            if len <= 0 {
                return Err(bad("length must be positive"));
            }
            entries.insert(name.to_string(), len);
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, name: impl Into<String>, len: i64) {
        assert!(len > 0, "best-known lengths are positive");
        self.entries.insert(name.into(), len);
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.entries.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
