//! Linear-programming oracle for the stability region and minimum cost.

pub mod counterexample;
pub mod flow;
pub mod simplex;

pub use counterexample::{check_balance, counterexample_check, BalanceVerdict};
pub use flow::{Beta, Feasibility, FlowKind, FlowModel, FlowVar, LpBackend, MinCost, EXACT_TABLEAU_LIMIT, EXACT_VARIABLE_LIMIT};
pub use simplex::{solve, verify_farkas, FarkasCertificate, LinearProgram, LpOutcome, Relation, Solution};
