//! Gradients, Hessians and gradient flows of graph-structured multi-agent
//! coordination potentials.
//!
//! The crate assembles analytic derivatives of edge-tension distance
//! potentials and planar signed-area triangle penalties, checks them against
//! central finite differences, integrates the gradient flow `ṗ = -∇V` and
//! classifies equilibria by the inertia of the Hessian.

pub mod dynamics;
pub mod error;
pub mod export;
pub mod fd;
pub mod gen;
pub mod graph;
pub mod hessian;
pub mod kinematics;
pub mod par;
pub mod potentials;
pub mod problem;
pub mod reproduce;

pub use dynamics::{
    classify, find_and_classify, integrate, multi_start, report_at, EquilibriumReport, Inertia, IntegratorParams,
    Spectrum, Termination, Trajectory, Verdict, DEFAULT_TAU_REL,
};
pub use error::{DomainKind, Error, Result};
pub use fd::{fd_gradient, fd_hessian, verify, FdParams, VerifyReport};
pub use graph::{Edge, Graph, IncidenceMatrix};
pub use hessian::{
    assemble_weight_matrices, free_gradient, gradient, hessian_area, hessian_block, hessian_edge_general,
    hessian_total, hessian_z4_direct, HessianMatrix, WeightMatrices,
};
pub use kinematics::{
    edge_block_matrix, relative_positions, rigidity_matrix, signed_area, Configuration, RelativePositions,
};
pub use problem::ProblemSpecFile;
pub use potentials::{
    total_potential, AreaTerm, DomainGuards, EdgeFamily, EdgeFamilyEval, PotentialSpec, ShapeFn, ShapeFunction,
};
