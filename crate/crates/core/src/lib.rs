//! Reserve-zone design for wind-dominated power systems.
//!
//! The crate bundles everything needed to size and place operating reserves
//! when zone boundaries themselves are decision variables: a DC network
//! model, a copula-based wind scenario engine, sequential / stochastic
//! benchmark market clearings, a connectivity-aware grid partitioning
//! block, the bilevel zonal clearing recast as a single MILP, and a
//! multi-cut Benders decomposition of the same problem. A small embedded
//! LP/MILP solver keeps the whole pipeline self-contained; MPS export is
//! the escape hatch for industrial-scale instances.

pub mod benders;
pub mod markets;
pub mod milp;
pub mod net;
pub mod partition;
pub mod scen;
pub mod zonal;
