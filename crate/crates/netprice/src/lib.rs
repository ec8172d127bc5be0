//! Consumption equilibria and monopoly pricing for a divisible good sold to
//! agents on an influence network.
//!
//! Agents have linear-quadratic utility with a positive local network
//! effect; at fixed prices their usage levels form a unique equilibrium
//! ([`equilibrium`]). On top of that second stage the crate solves the
//! seller's pricing problems: closed-form individualized prices
//! ([`discriminatory`]), the optimal single uniform price via centrality-gain
//! dropout segments ([`uniform`]), and the NP-hard full/discounted two-price
//! assignment via exact enumeration or a relax-and-round pipeline with a
//! 0.878-style certificate ([`two_price`]). The [`value_of_info`] module
//! quantifies the profit gap between network-blind and fully informed
//! pricing with spectral bounds, and [`generators`] builds the network
//! families used by the bundled simulation studies.
//!
//! The `netprice` binary exposes all of it for batch use; see the crate
//! README.

pub mod centrality;
pub mod cli;
pub mod discriminatory;
pub mod equilibrium;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod model;
pub mod two_price;
pub mod uniform;
pub mod value_of_info;

pub use error::{Error, Result};
pub use model::{ConsumptionVector, MarketInstance, PriceVector, ValidationReport, Violation};
