//! Placement delivery arrays and a private coded distributed computing
//! simulator built on top of them.
//!
//! The crate has six parts:
//!
//! - [`pda`]: the array data model, validation of the three defining
//!   conditions, regularity and multiplicity queries, integer relabeling.
//! - [`construct`]: the combinatorial builder for regular arrays, the
//!   single-row array, the block extension product, and the two composed
//!   constructions used throughout.
//! - [`sim`]: an end-to-end, bit-exact simulation of the private
//!   map-shuffle-reduce protocol an extended array describes, plus an
//!   independent oracle for checking decoded outputs.
//! - [`loads`]: exact rational computation and communication loads, the
//!   non-private baselines, and the trade-off sweep.
//! - [`audit`]: statistical privacy audits of the query distribution
//!   (uniformity and demand independence).
//! - [`io`]: the text format for arrays, report documents, and the sweep
//!   CSV encoding.
//!
//! Everything is deterministic given the configured seeds. With the
//! `parallel` feature (on by default) the trial and batch loops run on the
//! rayon thread pool; without it they run sequentially with identical
//! results.

pub mod audit;
pub mod construct;
mod exec;
pub mod io;
pub mod loads;
pub mod pda;
pub mod sim;

#[cfg(test)]
pub(crate) mod testutil;
