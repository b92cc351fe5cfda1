//! Mixed graphical models for binary and continuous data.
//!
//! The model is a simplified conditional Gaussian density with pairwise
//! discrete interactions and discrete-dependent canonical means and
//! precisions. Structure is estimated by node-wise penalized regressions
//! (logistic for discrete nodes, linear for continuous nodes) whose overlapping
//! edge groups are handled by a weighted-l1 surrogate penalty.

pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod exec;
pub mod graph;
pub mod model;
pub mod neighborhood;
pub mod simulate;
pub mod solver;
pub mod stability;

pub use dataset::{ColumnKind, ColumnSchema, IngestOptions, MixedDataset, Schema};
pub use error::{Error, Result};
pub use evaluate::{auc, average_tables, roc, roc_edges, Level, RocRow, RocTable};
pub use exec::Execution;
pub use graph::{Coord, DotStyle, Edge, EdgeGroup, MarkovGraph, MixedDims, Node};
pub use model::{graph_of, CanonicalTriple, CellMoments, CgParams, PdCertificate};
pub use neighborhood::{
    fit_all, FitAllOptions, FitAllResult, GraphEstimate, GridSpec, PenaltyScale, PenaltyVariant,
};
pub use simulate::{gen_graph, gen_params, sample, GraphKind, GraphSpec, ParamGenSpec};
pub use solver::{
    fit_path, fit_weighted_l1, reference_prox, FitResult, Loss, PenalizedProblem, ReferencePenalty,
    SolverOptions,
};
pub use stability::{stability_select, StabilityOptions, StabilityResult};
