//! Charger planning and opportunity-charging scheduling for electric truck
//! fleets.
//!
//! The crate covers the whole chain: GPS traces to gridded instances
//! ([`ingest`]), parking-duration statistics ([`uncertainty`]), the planning
//! MILP ([`model`]) and its solvers ([`solver`]), the fix-and-optimize loop
//! ([`heuristic`]), multi-day planning ([`planner`]) and schedule replay with
//! reporting ([`replay`], [`report`]).

pub mod bundle;
pub mod error;
pub mod heuristic;
pub mod ingest;
pub mod installation;
pub mod lp;
pub mod model;
pub mod planner;
pub mod replay;
pub mod report;
pub mod solver;
pub mod synth;
pub mod types;
pub mod uncertainty;

pub use error::{Error, Result};
pub use installation::Installation;
pub use model::{build_model, CaseProfile, ModelConfig, PlanningModel, PowerSource};
pub use solver::{solve, Solution, SolveSettings, SolveStatus};
pub use types::{ChargerKind, ChargerType, FleetInstance, SlotRef, TimeGrid, Truck, Zone};
pub use uncertainty::UncertaintyMoments;
