//! LP machinery: a dense vertex-returning simplex and a restricted-master
//! column-generation engine driven by pricing oracles.

mod colgen;
mod simplex;

pub use colgen::{
    phase1_feasibility, solve_master, ColGenOptions, ColGenResult, Column, ColumnProblem, IterationRecord, Phase,
    Phase1Result, Priced,
};
pub use simplex::{dense_lp_solve, dense_lp_solve_with, DenseLp, LpSolution, RowKind, Sense, SimplexOptions};
