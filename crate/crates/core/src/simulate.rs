//! Ground-truth graphs, parameters and exact samples.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64`; separate concerns use separate streams of the same seed,
//! so a given seed always produces the same graph, parameters and data.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::MixedDataset;
use crate::error::{Error, Result};
use crate::exec::task_rng;
use crate::graph::{Coord, Edge, MarkovGraph, MixedDims, Node};
use crate::model::{self, CgParams, DEFAULT_MAX_Q, PD_ENUMERATION_MAX_Q, PD_MARGIN};

const GRAPH_STREAM: u64 = 0;
const PARAM_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum GraphKind {
    /// Path over the first `num_edges + 1` nodes.
    Chain,
    /// Uniform `num_edges`-edge graph, regenerated until all degrees are within the cap.
    ErdosRenyiCapped,
    /// First node joined to `hub_degree` random nodes, remaining edges Erdos-Renyi.
    Hub { hub_degree: usize },
    /// First `size` nodes fully connected, the rest isolated.
    Clique { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub dims: MixedDims,
    pub num_edges: usize,
    /// Degree cap; for hubs it applies to every node except the hub.
    pub max_degree: Option<usize>,
    /// Regenerate graphs containing a triangle.
    #[serde(default)]
    pub triangle_free: bool,
    pub seed: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_attempts() -> usize {
    10_000
}

impl GraphSpec {
    pub fn new(kind: GraphKind, dims: MixedDims, num_edges: usize, seed: u64) -> Self {
        Self {
            kind,
            dims,
            num_edges,
            max_degree: None,
            triangle_free: false,
            seed,
            max_attempts: default_attempts(),
        }
    }

    pub fn chain(dims: MixedDims, num_edges: usize, seed: u64) -> Self {
        Self::new(GraphKind::Chain, dims, num_edges, seed)
    }

    pub fn erdos_renyi(dims: MixedDims, num_edges: usize, max_degree: usize, seed: u64) -> Self {
        Self {
            max_degree: Some(max_degree),
            ..Self::new(GraphKind::ErdosRenyiCapped, dims, num_edges, seed)
        }
    }

    pub fn hub(dims: MixedDims, num_edges: usize, hub_degree: usize, seed: u64) -> Self {
        Self {
            max_degree: Some(hub_degree),
            ..Self::new(GraphKind::Hub { hub_degree }, dims, num_edges, seed)
        }
    }

    pub fn clique(dims: MixedDims, size: usize, seed: u64) -> Self {
        Self::new(
            GraphKind::Clique { size },
            dims,
            size * size.saturating_sub(1) / 2,
            seed,
        )
    }

    pub fn with_triangle_free(mut self, on: bool) -> Self {
        self.triangle_free = on;
        self
    }

    pub fn with_max_attempts(mut self, attempts: usize) -> Self {
        self.max_attempts = attempts;
        self
    }

    fn check_feasible(&self) -> Result<()> {
        self.dims.validate()?;
        let n = self.dims.num_nodes();
        let m = self.num_edges;
        let infeasible = |msg: String| Err(Error::Infeasible(msg));
        if m > self.dims.num_possible_edges() {
            return infeasible(format!(
                "{m} edges exceed the {} possible",
                self.dims.num_possible_edges()
            ));
        }
        if let Some(cap) = self.max_degree {
            let budget = match self.kind {
                GraphKind::Hub { hub_degree } => {
                    hub_degree + (n.saturating_sub(1) * cap).saturating_sub(hub_degree) / 2
                }
                _ => n * cap / 2,
            };
            if m > budget {
                return infeasible(format!(
                    "{m} edges cannot fit under max degree {cap} on {n} nodes"
                ));
            }
        }
        match self.kind {
            GraphKind::Chain => {
                if m > 0 && m + 1 > n {
                    return infeasible(format!(
                        "chain with {m} edges needs {} nodes, have {n}",
                        m + 1
                    ));
                }
                if self.max_degree.is_some_and(|c| c < 2 && m > 1) {
                    return infeasible("chain needs max degree 2".into());
                }
            }
            GraphKind::ErdosRenyiCapped => {}
            GraphKind::Hub { hub_degree } => {
                if n == 0 || hub_degree >= n {
                    return infeasible(format!(
                        "hub degree {hub_degree} needs more than {n} nodes"
                    ));
                }
                if hub_degree > m {
                    return infeasible(format!("hub degree {hub_degree} exceeds {m} edges"));
                }
                if m - hub_degree > (n - 1) * (n - 2) / 2 {
                    return infeasible("too many non-hub edges".into());
                }
            }
            GraphKind::Clique { size } => {
                if size > n {
                    return infeasible(format!("clique of {size} on {n} nodes"));
                }
                if m != size * size.saturating_sub(1) / 2 {
                    return infeasible(format!(
                        "clique of {size} has {} edges, not {m}",
                        size * size.saturating_sub(1) / 2
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Map a rank in `0..C(n, 2)` to the pair `(a, b)` with `a < b`.
fn unrank_pair(mut r: usize, n: usize) -> (usize, usize) {
    let mut a = 0;
    loop {
        let row = n - 1 - a;
        if r < row {
            return (a, a + 1 + r);
        }
        r -= row;
        a += 1;
    }
}

fn edge_between(dims: &MixedDims, a: usize, b: usize) -> Edge {
    Edge::new(dims.node(a), dims.node(b)).expect("distinct nodes")
}

/// One uniform draw of `m` distinct pairs among `nodes`.
fn random_edges(dims: &MixedDims, nodes: &[usize], m: usize, rng: &mut impl Rng) -> Vec<Edge> {
    let n = nodes.len();
    let total = n * n.saturating_sub(1) / 2;
    index::sample(rng, total, m)
        .into_iter()
        .map(|r| {
            let (a, b) = unrank_pair(r, n);
            edge_between(dims, nodes[a], nodes[b])
        })
        .collect()
}

/// Generate a ground-truth graph. Discrete variables occupy the first `q`
/// node indices.
pub fn gen_graph(spec: &GraphSpec) -> Result<MarkovGraph> {
    spec.check_feasible()?;
    let dims = &spec.dims;
    let n = dims.num_nodes();
    let mut rng = task_rng(spec.seed, GRAPH_STREAM);
    let acceptable = |g: &MarkovGraph, hub: Option<usize>| {
        let degree_ok = spec.max_degree.is_none_or(|cap| {
            g.degrees()
                .iter()
                .enumerate()
                .all(|(i, &d)| Some(i) == hub || d <= cap)
        });
        degree_ok && !(spec.triangle_free && g.has_triangle())
    };

    match spec.kind {
        GraphKind::Chain => {
            let g = MarkovGraph::from_edges(
                dims.clone(),
                (0..spec.num_edges).map(|i| edge_between(dims, i, i + 1)),
            )?;
            Ok(g)
        }
        GraphKind::Clique { size } => {
            let edges = (0..size).flat_map(|a| ((a + 1)..size).map(move |b| (a, b)));
            MarkovGraph::from_edges(dims.clone(), edges.map(|(a, b)| edge_between(dims, a, b)))
        }
        GraphKind::ErdosRenyiCapped => {
            let nodes: Vec<usize> = (0..n).collect();
            for _ in 0..spec.max_attempts {
                let g = MarkovGraph::from_edges(
                    dims.clone(),
                    random_edges(dims, &nodes, spec.num_edges, &mut rng),
                )?;
                if acceptable(&g, None) {
                    return Ok(g);
                }
            }
            Err(Error::RejectionBudget(spec.max_attempts))
        }
        GraphKind::Hub { hub_degree } => {
            let others: Vec<usize> = (1..n).collect();
            for _ in 0..spec.max_attempts {
                let mut g = MarkovGraph::empty(dims.clone());
                for i in index::sample(&mut rng, n - 1, hub_degree) {
                    g.add_edge(edge_between(dims, 0, others[i]))?;
                }
                for e in random_edges(dims, &others, spec.num_edges - hub_degree, &mut rng) {
                    g.add_edge(e)?;
                }
                if acceptable(&g, Some(0)) {
                    return Ok(g);
                }
            }
            Err(Error::RejectionBudget(spec.max_attempts))
        }
    }
}

/// Magnitudes and seed for synthetic parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParamGenSpec {
    /// Magnitude of `lambda_j`, `lambda_jk` and `eta_j`.
    pub main_value: f64,
    /// Magnitude of off-diagonal `Phi0` and `Phi_j` entries.
    pub phi_value: f64,
    /// Global multiplier on all nonzero values.
    pub scale: f64,
    /// Whether `Phi_j` entries inside complete triangles are nonzero.
    pub interactions: bool,
    pub seed: u64,
}

impl Default for ParamGenSpec {
    fn default() -> Self {
        Self {
            main_value: 1.0,
            phi_value: 2.0,
            scale: 1.0,
            interactions: true,
            seed: 0,
        }
    }
}

impl ParamGenSpec {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Random-sign parameters supported on `graph`, with a diagonally dominant
/// `Phi0` and normalized `lambda0`.
///
/// A `Phi_j^{gamma mu}` entry is only nonzero when `Z_j`, `Y_gamma` and `Y_mu`
/// are pairwise adjacent; every other coordinate outside the present edge
/// groups is exactly zero.
pub fn gen_params(graph: &MarkovGraph, spec: &ParamGenSpec) -> Result<CgParams> {
    if !(spec.main_value > 0.0 && spec.phi_value > 0.0 && spec.scale > 0.0) {
        return Err(Error::InvalidInput(
            "parameter magnitudes must be positive".into(),
        ));
    }
    let dims = &graph.dims;
    if !dims.is_binary() {
        return Err(Error::InvalidInput(
            "parameter generation needs binary discrete variables".into(),
        ));
    }
    let (q, p) = (dims.q, dims.p);
    let mut rng = task_rng(spec.seed, PARAM_STREAM);
    let main = spec.main_value * spec.scale;
    let phi = spec.phi_value * spec.scale;
    let sign =
        move |rng: &mut rand_chacha::ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };

    let mut params = CgParams::zeros(q, p);
    for j in 0..q {
        params.lambda[j] = main * sign(&mut rng);
    }
    for e in graph.edges() {
        let coord = match e.nodes() {
            (Node::Discrete(j), Node::Discrete(k)) => Coord::lambda_pair(j, k),
            (Node::Discrete(j), Node::Continuous(g)) => Coord::eta(j, g),
            (Node::Continuous(g), Node::Continuous(m)) => Coord::phi0(g, m),
            _ => unreachable!(),
        };
        let v = match coord {
            Coord::Phi0 { .. } => phi,
            _ => main,
        };
        params.set(coord, v * sign(&mut rng));
    }
    if spec.interactions {
        for j in 0..q {
            let zj = Node::Discrete(j);
            for g in 0..p {
                for m in (g + 1)..p {
                    let (yg, ym) = (Node::Continuous(g), Node::Continuous(m));
                    if graph.has_edge(zj, yg) && graph.has_edge(zj, ym) && graph.has_edge(yg, ym) {
                        params.set(Coord::phi(j, g, m), phi * sign(&mut rng));
                    }
                }
            }
        }
    }
    params.phi0.fill_diagonal(0.0);
    // The scale applies to the diagonal as well, so the margin shrinks with
    // it whenever enumeration (not dominance) certifies definiteness.
    let margin = if q <= PD_ENUMERATION_MAX_Q {
        PD_MARGIN * spec.scale
    } else {
        PD_MARGIN
    };
    params.set_dominant_diagonal(margin);
    params.certify_pd()?;
    params.normalize(DEFAULT_MAX_Q)
}

/// `n` exact draws: a cell from the full `P_z` table, then
/// `y = xi_z + L^{-T} e` with `K_z = L L^T` and `e` standard normal.
pub fn sample(params: &CgParams, n: usize, seed: u64) -> Result<MixedDataset> {
    sample_with_cap(params, n, seed, DEFAULT_MAX_Q)
}

pub fn sample_with_cap(
    params: &CgParams,
    n: usize,
    seed: u64,
    max_q: usize,
) -> Result<MixedDataset> {
    params.validate()?;
    let (q, p) = (params.q(), params.p());
    model::check_cap(q, max_q)?;
    let probs = params.cell_probabilities(max_q)?;
    let mut rng = task_rng(seed, SAMPLE_STREAM);
    let cell_dist =
        WeightedIndex::new(&probs).map_err(|e| Error::InvalidParams(format!("cell table: {e}")))?;

    let cells: Vec<usize> = (0..n).map(|_| cell_dist.sample(&mut rng)).collect();
    let mut z = DMatrix::<u32>::zeros(n, q);
    let mut y = DMatrix::<f64>::zeros(n, p);

    let mut factors: std::collections::HashMap<usize, (DVector<f64>, DMatrix<f64>)> =
        Default::default();
    for (i, &cell) in cells.iter().enumerate() {
        let zc = model::cell_from_index(cell, q);
        for j in 0..q {
            z[(i, j)] = zc[j] as u32;
        }
        if p == 0 {
            continue;
        }
        if !factors.contains_key(&cell) {
            let t = params.canonical_at(&zc)?;
            let chol = model::cholesky(&t.k, &zc)?;
            let mean = chol.solve(&t.h);
            factors.insert(cell, (mean, chol.l()));
        }
        let (mean, l) = &factors[&cell];
        let e = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let dev = l
            .transpose()
            .solve_upper_triangular(&e)
            .expect("Cholesky factor has a positive diagonal");
        for g in 0..p {
            y[(i, g)] = mean[g] + dev[g];
        }
    }
    MixedDataset::binary(z, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unrank_covers_all_pairs() {
        let n = 6;
        let pairs: Vec<_> = (0..n * (n - 1) / 2).map(|r| unrank_pair(r, n)).collect();
        let mut expected = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                expected.push((a, b));
            }
        }
        assert_eq!(pairs, expected);
    }

    #[test]
    fn chain_of_eighty_edges() {
        let g = gen_graph(&GraphSpec::chain(MixedDims::binary(10, 90), 80, 1)).unwrap();
        assert_eq!(g.num_edges(), 80);
        let deg = g.degrees();
        assert!(deg[..81].iter().all(|&d| d == 1 || d == 2));
        assert!(deg[81..].iter().all(|&d| d == 0));
    }

    #[test]
    fn zero_edges_gives_empty_graph() {
        for spec in [
            GraphSpec::chain(MixedDims::binary(2, 3), 0, 1),
            GraphSpec::erdos_renyi(MixedDims::binary(2, 3), 0, 3, 1),
        ] {
            assert_eq!(gen_graph(&spec).unwrap().num_edges(), 0);
        }
    }

    #[test]
    fn infeasible_specs_rejected() {
        let dims = MixedDims::binary(2, 3);
        assert!(matches!(
            gen_graph(&GraphSpec::chain(dims.clone(), 5, 0)),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            gen_graph(&GraphSpec::erdos_renyi(dims.clone(), 8, 2, 0)),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            gen_graph(&GraphSpec::hub(dims, 3, 5, 0)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn rejection_budget_reported() {
        // 5 nodes, 5 edges, cap 2, triangle-free: only the 5-cycle qualifies.
        let spec = GraphSpec::erdos_renyi(MixedDims::binary(1, 4), 5, 2, 3)
            .with_triangle_free(true)
            .with_max_attempts(1);
        let mut saw_budget = false;
        for seed in 0..20 {
            let spec = GraphSpec {
                seed,
                ..spec.clone()
            };
            if let Err(Error::RejectionBudget(1)) = gen_graph(&spec) {
                saw_budget = true;
            }
        }
        assert!(saw_budget);
    }

    #[test]
    fn hub_has_exact_degree() {
        let dims = MixedDims::binary(10, 90);
        for seed in 0..10 {
            let g = gen_graph(&GraphSpec::hub(dims.clone(), 80, 10, seed)).unwrap();
            assert_eq!(g.num_edges(), 80);
            assert_eq!(g.degree(Node::Discrete(0)), 10);
            assert!(g.degrees()[1..].iter().all(|&d| d <= 10));
        }
    }

    #[test]
    fn clique_block() {
        let g = gen_graph(&GraphSpec::clique(MixedDims::binary(4, 12), 8, 0)).unwrap();
        assert_eq!(g.num_edges(), 28);
        assert_eq!(g.degrees()[8..].iter().sum::<usize>(), 0);
    }

    #[test]
    fn empty_graph_params_are_independent() {
        let g = MarkovGraph::empty(MixedDims::binary(3, 4));
        let params = gen_params(&g, &ParamGenSpec::seeded(2)).unwrap();
        assert_eq!(params.graph(0.0).num_edges(), 0);
        let off_diag = params.phi0.clone() - DMatrix::from_diagonal(&params.phi0.diagonal());
        assert_eq!(off_diag.norm(), 0.0);
        assert!(params.lambda.iter().all(|v| v.abs() == 1.0));
    }

    #[test]
    fn scaled_magnitudes() {
        let g = gen_graph(&GraphSpec::clique(MixedDims::binary(2, 4), 6, 0)).unwrap();
        let spec = ParamGenSpec {
            scale: 0.1,
            ..ParamGenSpec::seeded(5)
        };
        let params = gen_params(&g, &spec).unwrap();
        let mut mags: Vec<f64> = params
            .dims()
            .interaction_coords()
            .into_iter()
            .map(|c| params.get(c).abs())
            .filter(|&v| v > 0.0)
            .collect();
        mags.sort_by(f64::total_cmp);
        mags.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        assert_eq!(mags.len(), 2);
        assert!((mags[0] - 0.1).abs() < 1e-15 && (mags[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_data() {
        let g = gen_graph(&GraphSpec::erdos_renyi(MixedDims::binary(3, 5), 6, 3, 11)).unwrap();
        let params = gen_params(&g, &ParamGenSpec::seeded(11)).unwrap();
        let a = sample(&params, 50, 4).unwrap();
        let b = sample(&params, 50, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample(&params, 50, 5).unwrap());
    }
}
