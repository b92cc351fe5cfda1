//! Mixed Markov graphs, parameter coordinates and the edge/parameter groups
//! that tie them together.
//!
//! Nodes are either discrete (`Z_j`) or continuous (`Y_gamma`). Indices are
//! zero-based in code; display names (`Z1`, `Y1`, ...) are one-based. The global
//! node order puts the `q` discrete nodes first, followed by the `p`
//! continuous ones.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variable counts of a mixed model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedDims {
    pub q: usize,
    pub p: usize,
    /// Level count `K_j` per discrete variable.
    pub levels: Vec<u32>,
}

impl MixedDims {
    pub fn binary(q: usize, p: usize) -> Self {
        Self {
            q,
            p,
            levels: vec![2; q],
        }
    }

    pub fn with_levels(levels: Vec<u32>, p: usize) -> Result<Self> {
        let dims = Self {
            q: levels.len(),
            p,
            levels,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q + self.p == 0 {
            return Err(Error::InvalidInput(
                "model needs at least one variable".into(),
            ));
        }
        if self.levels.len() != self.q {
            return Err(Error::Dimension(format!(
                "{} level counts for {} discrete variables",
                self.levels.len(),
                self.q
            )));
        }
        if let Some(k) = self.levels.iter().find(|&&k| k < 2) {
            return Err(Error::InvalidInput(format!("level count {k} < 2")));
        }
        Ok(())
    }

    pub fn is_binary(&self) -> bool {
        self.levels.iter().all(|&k| k == 2)
    }

    pub fn num_nodes(&self) -> usize {
        self.q + self.p
    }

    /// Node at a global index (discrete nodes first).
    pub fn node(&self, index: usize) -> Node {
        if index < self.q {
            Node::Discrete(index)
        } else {
            Node::Continuous(index - self.q)
        }
    }

    pub fn index_of(&self, node: Node) -> usize {
        match node {
            Node::Discrete(j) => j,
            Node::Continuous(g) => self.q + g,
        }
    }

    pub fn contains(&self, node: Node) -> bool {
        match node {
            Node::Discrete(j) => j < self.q,
            Node::Continuous(g) => g < self.p,
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.num_nodes()).map(|i| self.node(i))
    }

    /// Number of possible edges, `C(q + p, 2)`.
    pub fn num_possible_edges(&self) -> usize {
        let n = self.num_nodes();
        n * n.saturating_sub(1) / 2
    }

    /// All non-intercept parameter coordinates of the model, in a fixed order.
    pub fn interaction_coords(&self) -> Vec<Coord> {
        let mut out = Vec::new();
        for j in 0..self.q {
            for k in (j + 1)..self.q {
                for lj in 1..self.levels[j] {
                    for lk in 1..self.levels[k] {
                        out.push(Coord::LambdaPair { j, k, lj, lk });
                    }
                }
            }
        }
        for j in 0..self.q {
            for level in 1..self.levels[j] {
                for gamma in 0..self.p {
                    out.push(Coord::Eta { j, level, gamma });
                }
            }
        }
        for gamma in 0..self.p {
            for mu in (gamma + 1)..self.p {
                out.push(Coord::Phi0 { gamma, mu });
            }
        }
        for j in 0..self.q {
            for level in 1..self.levels[j] {
                for gamma in 0..self.p {
                    for mu in (gamma + 1)..self.p {
                        out.push(Coord::Phi {
                            j,
                            level,
                            gamma,
                            mu,
                        });
                    }
                }
            }
        }
        out
    }
}

/// A variable in the mixed graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Discrete(usize),
    Continuous(usize),
}

impl Node {
    pub fn is_discrete(self) -> bool {
        matches!(self, Node::Discrete(_))
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Discrete(j) => write!(f, "Z{}", j + 1),
            Node::Continuous(g) => write!(f, "Y{}", g + 1),
        }
    }
}

impl FromStr for Node {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bad node name {s:?}"));
        let (kind, rest) = s.split_at_checked(1).ok_or_else(bad)?;
        let one_based: usize = rest.parse().map_err(|_| bad())?;
        if one_based == 0 {
            return Err(bad());
        }
        match kind {
            "Z" => Ok(Node::Discrete(one_based - 1)),
            "Y" => Ok(Node::Continuous(one_based - 1)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Node {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Node {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Unordered node pair, stored with the smaller node first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(Node, Node)", into = "(Node, Node)")]
pub struct Edge(Node, Node);

impl Edge {
    pub fn new(a: Node, b: Node) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Edge(a, b)),
            std::cmp::Ordering::Greater => Ok(Edge(b, a)),
            std::cmp::Ordering::Equal => Err(Error::InvalidInput(format!("self-loop at {a}"))),
        }
    }

    pub fn first(&self) -> Node {
        self.0
    }

    pub fn second(&self) -> Node {
        self.1
    }

    pub fn nodes(&self) -> (Node, Node) {
        (self.0, self.1)
    }

    pub fn touches(&self, node: Node) -> bool {
        self.0 == node || self.1 == node
    }
}

impl TryFrom<(Node, Node)> for Edge {
    type Error = Error;
    fn try_from((a, b): (Node, Node)) -> Result<Self> {
        Edge::new(a, b)
    }
}

impl From<Edge> for (Node, Node) {
    fn from(e: Edge) -> Self {
        (e.0, e.1)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}--{}", self.0, self.1)
    }
}

/// Address of a single model parameter.
///
/// Levels are codes of non-baseline discrete levels (`1..K_j`); binary models
/// only use level 1. Symmetric pairs are stored with `j < k` and `gamma < mu`
/// (except the `Phi0` diagonal, where `gamma == mu`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Coord {
    Lambda {
        j: usize,
        level: u32,
    },
    LambdaPair {
        j: usize,
        k: usize,
        lj: u32,
        lk: u32,
    },
    Eta0 {
        gamma: usize,
    },
    Eta {
        j: usize,
        level: u32,
        gamma: usize,
    },
    Phi0 {
        gamma: usize,
        mu: usize,
    },
    Phi {
        j: usize,
        level: u32,
        gamma: usize,
        mu: usize,
    },
}

impl Coord {
    pub fn lambda_pair(j: usize, k: usize) -> Self {
        Self::lambda_pair_levels(j, k, 1, 1)
    }

    pub fn lambda_pair_levels(j: usize, k: usize, lj: u32, lk: u32) -> Self {
        if j < k {
            Coord::LambdaPair { j, k, lj, lk }
        } else {
            Coord::LambdaPair {
                j: k,
                k: j,
                lj: lk,
                lk: lj,
            }
        }
    }

    pub fn eta(j: usize, gamma: usize) -> Self {
        Coord::Eta { j, level: 1, gamma }
    }

    pub fn phi0(gamma: usize, mu: usize) -> Self {
        Coord::Phi0 {
            gamma: gamma.min(mu),
            mu: gamma.max(mu),
        }
    }

    pub fn phi(j: usize, gamma: usize, mu: usize) -> Self {
        Self::phi_level(j, 1, gamma, mu)
    }

    pub fn phi_level(j: usize, level: u32, gamma: usize, mu: usize) -> Self {
        Coord::Phi {
            j,
            level,
            gamma: gamma.min(mu),
            mu: gamma.max(mu),
        }
    }

    /// Intercept-type coordinates carry no edge information.
    pub fn is_intercept(&self) -> bool {
        match *self {
            Coord::Lambda { .. } | Coord::Eta0 { .. } => true,
            Coord::Phi0 { gamma, mu } => gamma == mu,
            _ => false,
        }
    }

    /// Edges whose parameter group contains this coordinate.
    pub fn edges(&self) -> Vec<Edge> {
        let e = |a, b| Edge::new(a, b).expect("distinct nodes");
        match *self {
            Coord::Lambda { .. } | Coord::Eta0 { .. } => vec![],
            Coord::LambdaPair { j, k, .. } => vec![e(Node::Discrete(j), Node::Discrete(k))],
            Coord::Eta { j, gamma, .. } => vec![e(Node::Discrete(j), Node::Continuous(gamma))],
            Coord::Phi0 { gamma, mu } if gamma == mu => vec![],
            Coord::Phi0 { gamma, mu } => vec![e(Node::Continuous(gamma), Node::Continuous(mu))],
            Coord::Phi { j, gamma, mu, .. } => vec![
                e(Node::Discrete(j), Node::Continuous(gamma)),
                e(Node::Discrete(j), Node::Continuous(mu)),
                e(Node::Continuous(gamma), Node::Continuous(mu)),
            ],
        }
    }
}

/// Parameters whose joint nullity is equivalent to the absence of an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGroup {
    pub edge: Edge,
    pub coords: Vec<Coord>,
}

impl EdgeGroup {
    pub fn new(dims: &MixedDims, edge: Edge) -> Result<Self> {
        let (a, b) = edge.nodes();
        if !dims.contains(a) || !dims.contains(b) {
            return Err(Error::Dimension(format!("edge {edge} outside the model")));
        }
        let mut coords = Vec::new();
        match (a, b) {
            (Node::Discrete(j), Node::Discrete(k)) => {
                for lj in 1..dims.levels[j] {
                    for lk in 1..dims.levels[k] {
                        coords.push(Coord::lambda_pair_levels(j, k, lj, lk));
                    }
                }
            }
            (Node::Discrete(j), Node::Continuous(gamma)) => {
                for level in 1..dims.levels[j] {
                    coords.push(Coord::Eta { j, level, gamma });
                    for mu in (0..dims.p).filter(|&mu| mu != gamma) {
                        coords.push(Coord::phi_level(j, level, gamma, mu));
                    }
                }
            }
            (Node::Continuous(gamma), Node::Continuous(mu)) => {
                coords.push(Coord::phi0(gamma, mu));
                for j in 0..dims.q {
                    for level in 1..dims.levels[j] {
                        coords.push(Coord::phi_level(j, level, gamma, mu));
                    }
                }
            }
            (Node::Continuous(_), Node::Discrete(_)) => unreachable!("edges store discrete first"),
        }
        Ok(Self { edge, coords })
    }
}

/// Undirected graph over the nodes of a mixed model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovGraph {
    pub dims: MixedDims,
    edges: BTreeSet<Edge>,
}

impl MarkovGraph {
    pub fn empty(dims: MixedDims) -> Self {
        Self {
            dims,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(dims: MixedDims, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut g = Self::empty(dims);
        for e in edges {
            g.add_edge(e)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<bool> {
        let (a, b) = edge.nodes();
        if !self.dims.contains(a) || !self.dims.contains(b) {
            return Err(Error::Dimension(format!("edge {edge} outside the model")));
        }
        Ok(self.edges.insert(edge))
    }

    pub fn contains(&self, edge: &Edge) -> bool {
        self.edges.contains(edge)
    }

    pub fn has_edge(&self, a: Node, b: Node) -> bool {
        Edge::new(a, b).is_ok_and(|e| self.edges.contains(&e))
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn edge_set(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, node: Node) -> usize {
        self.edges.iter().filter(|e| e.touches(node)).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.dims.num_nodes()];
        for e in &self.edges {
            deg[self.dims.index_of(e.first())] += 1;
            deg[self.dims.index_of(e.second())] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// True when some edge closes a triangle.
    pub fn has_triangle(&self) -> bool {
        let n = self.dims.num_nodes();
        let mut adj = vec![BTreeSet::new(); n];
        for e in &self.edges {
            let (a, b) = (
                self.dims.index_of(e.first()),
                self.dims.index_of(e.second()),
            );
            adj[a].insert(b);
            adj[b].insert(a);
        }
        self.edges.iter().any(|e| {
            let (a, b) = (
                self.dims.index_of(e.first()),
                self.dims.index_of(e.second()),
            );
            adj[a].intersection(&adj[b]).next().is_some()
        })
    }

    /// Edge-list JSON: `{"dims": {...}, "edges": [["Z1","Y2"], ...]}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: MarkovGraph = serde_json::from_str(s)?;
        g.dims.validate()?;
        for e in &g.edges {
            if !g.dims.contains(e.first()) || !g.dims.contains(e.second()) {
                return Err(Error::Dimension(format!("edge {e} outside the model")));
            }
        }
        Ok(g)
    }

    pub fn to_dot(&self) -> String {
        self.to_dot_styled(&DotStyle::default())
    }

    /// DOT rendering: circles for discrete nodes, squares for continuous ones.
    pub fn to_dot_styled(&self, style: &DotStyle) -> String {
        render_dot(&self.dims, self.edges.iter().map(|e| (*e, None)), style)
    }
}

/// Optional DOT decorations.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DotStyle {
    /// Fill color per node name (`"Z3" -> "red"`).
    #[serde(default)]
    pub colors: BTreeMap<String, String>,
    /// Display label per node name.
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

pub(crate) fn render_dot(
    dims: &MixedDims,
    edges: impl Iterator<Item = (Edge, Option<f64>)>,
    style: &DotStyle,
) -> String {
    use std::fmt::Write;
    let mut out = String::from("graph G {\n");
    for node in dims.nodes() {
        let name = node.to_string();
        let shape = if node.is_discrete() {
            "circle"
        } else {
            "square"
        };
        let _ = write!(out, "  {name} [shape={shape}");
        if let Some(label) = style.labels.get(&name) {
            let _ = write!(out, ", label=\"{}\"", label.replace('"', "\\\""));
        }
        if let Some(color) = style.colors.get(&name) {
            let _ = write!(out, ", style=filled, fillcolor=\"{color}\"");
        }
        out.push_str("];\n");
    }
    for (e, score) in edges {
        match score {
            Some(s) => {
                let _ = writeln!(out, "  {} -- {} [weight={s}];", e.first(), e.second());
            }
            None => {
                let _ = writeln!(out, "  {} -- {};", e.first(), e.second());
            }
        }
    }
    out.push_str("}\n");
    out
}
