//! Two-dimensional effective-diffusion room model driven by four VAV packaged air
//! conditioners, convective windows/doors, and an exogenous outside temperature.

pub mod exogenous;
pub mod field;
pub mod geometry;
pub mod ptac;
pub mod scenario;
pub mod sim;

pub use exogenous::ExogenousSignal;
pub use field::{apply_boundary, step_field, GhostValues, TemperatureField, ThermalParams};
pub use geometry::{BoundarySegment, Edge, GridCoord, RoomGeometry, SegmentKind, UNITS};
pub use ptac::{bulk_convection_heat, ptac_lag_step, vav_switch, DelayLine, PtacParams, PtacUnit};
pub use scenario::{ControlMode, DetrendConfig, Scenario, ScenarioConfig};
pub use sim::{extract_probe_state, simulate, write_field_history, Controller, SimulationOutput, Trajectory, Vec4};
