use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by the flows, maps and simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Crossing-scan samples per rotation period of the piece being flowed.
    pub scan_divisions: usize,
    /// Extrema of an event function closer than this to zero are tangential contacts.
    pub graze_tol: f64,
    /// Crossings closer than this to the start time are ignored.
    pub min_time: f64,
    /// Half-width of the excursion search window, in right rotation periods.
    pub excursion_window: f64,
    /// Bound on the duration of one left excursion, in left rotation periods.
    pub left_return_periods: f64,
    /// Orbits leaving the ball of this radius are declared divergent.
    pub escape_bound: f64,
    /// Section crossings farther than `proximity * |mu|` from `X_int` are ignored.
    pub proximity: f64,
    pub rk_rtol: f64,
    pub rk_atol: f64,
    /// Time tolerance of switching-event location on dense RK output.
    pub rk_event_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            scan_divisions: 64,
            graze_tol: 1e-9,
            min_time: 1e-9,
            excursion_window: 0.5,
            left_return_periods: 100.0,
            escape_bound: 1e6,
            proximity: 0.4,
            rk_rtol: 1e-10,
            rk_atol: 1e-12,
            rk_event_tol: 1e-11,
        }
    }
}
