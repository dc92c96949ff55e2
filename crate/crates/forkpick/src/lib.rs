//! Exact computations on rooted binary phylogenetic trees and networks:
//! display predicates (weak / ordinary / rigid), temporal tree-child checks,
//! fork- and cherry-picking sequences, minimum-weight sequence solvers,
//! constructive network building, and brute-force enumeration oracles.
//!
//! All values are immutable after construction and all operations are pure
//! functions, so everything here is safe to share across threads.

#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]
#![allow(clippy::type_complexity)]

pub mod construct;
pub mod display;
pub mod dot;
pub mod forkops;
pub mod model;
pub mod netcheck;
pub mod newick;
pub mod oracle;
pub mod search;
