//! Sleep scheduling for renewable-powered relay stations in a cell served by
//! a grid-powered base station.
//!
//! Relays sleep for a fraction of each slot. Sleeping saves battery but sends
//! their users to the base station (or blocks them), so the planner trades
//! grid energy at the base station against blocking probability over a
//! finite horizon.
//!
//! ```
//! use relaysleep::{policy, Problem, Scenario};
//!
//! let scenario = Scenario::bundled_default();
//! let problem = Problem::new(&scenario).unwrap();
//! let plan = policy::reduced_dp(&problem).unwrap();
//! assert_eq!(plan.slots.len(), 24);
//! ```

pub mod cli;
pub mod energy;
pub mod error;
pub mod loadmodel;
pub mod mcoracle;
pub mod model;
pub mod policy;
pub mod quadrature;
pub mod scenario;
pub mod topology;

pub use error::{Error, Result};
pub use model::Problem;
pub use policy::{Algorithm, SleepPolicy};
pub use scenario::Scenario;
