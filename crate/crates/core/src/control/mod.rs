//! Damping assignment for a Koopman mode and the spring-mass oracle.

mod calibrate;
mod law;
mod mass_point;

pub use calibrate::{calibrate_d, run_closed_loop, Calibration, D_MAX, D_MIN};
pub use law::{
    closed_loop_mode_rate, control_input, control_input_raw, mode_state, save_input_log, write_input_log,
    ControllerConfig, ControllerRecord, DampingController, ModeState,
};
pub use mass_point::{mass_point_oracle, MassPointParams, MassPointTrajectory};
