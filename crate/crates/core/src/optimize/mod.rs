//! Independent solvers: a dense simplex for the distortion LPs,
//! Blahut–Arimoto for the mutual-information problem, and a KKT checker.

pub mod blahut;
pub mod kkt;
pub mod lp;
pub mod simplex;

pub use blahut::{blahut_arimoto, blahut_arimoto_with, BaOptions, RdSolution};
pub use kkt::{kkt_check, KktReport};
pub use lp::{lp_pddp, lp_pddp_with_cap, lp_rpd, lp_rpd_two_block, lp_rpd_with_cap, LpSolution, DEFAULT_LP_CAP};
pub use simplex::{LinearProgram, LpStatus, Relation};
