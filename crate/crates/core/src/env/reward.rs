//! EI-MWAQ: exponentially increasing maximum-wait aggregated queue reward.

use serde::{Deserialize, Serialize};

use crate::microsim::WaitSnapshot;
use crate::network::{CorridorNetwork, SiteKind};

/// Vehicle approaches at the intersection.
pub const INT_APPROACHES: f64 = 4.0;
/// Vehicle approach directions at a mid-block crosswalk.
pub const MB_APPROACHES: f64 = 2.0;
pub const VEH_SCALE: f64 = 8.0;
pub const PED_SCALE: f64 = 10.0;
pub const REWARD_FLOOR: f64 = -1e5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub q_int_veh: f64,
    pub q_int_ped: f64,
    /// L2 norm of the per-mid-block vehicle terms.
    pub q_mb_veh: f64,
    pub q_mb_ped: f64,
    pub r_int_veh: f64,
    pub r_int_ped: f64,
    pub r_mb_veh: f64,
    pub r_mb_ped: f64,
    /// Linear (non-exponential) variant, reported for diagnostics only.
    pub mwaq: f64,
    pub unclipped: f64,
    pub total: f64,
}

/// Evaluates the reward of one wait snapshot. Counts and waits must be
/// finite and non-negative.
pub fn compute_reward(net: &CorridorNetwork, snapshot: &WaitSnapshot) -> RewardBreakdown {
    let mut b = RewardBreakdown::default();
    let mut mb_veh_sq = 0.0;
    let mut mb_ped_sq = 0.0;
    for (site, w) in net.signals.iter().zip(&snapshot.sites) {
        let veh = w.n_wait_veh as f64 * w.max_wait_veh_s;
        let ped = w.n_wait_ped as f64 * w.max_wait_ped_s;
        match site.kind {
            SiteKind::Intersection => {
                b.q_int_veh += veh / (VEH_SCALE * INT_APPROACHES);
                b.q_int_ped += ped / (PED_SCALE * INT_APPROACHES);
            }
            SiteKind::MidBlock => {
                mb_veh_sq += (veh / (VEH_SCALE * MB_APPROACHES)).powi(2);
                mb_ped_sq += (ped / PED_SCALE).powi(2);
            }
        }
    }
    b.q_mb_veh = mb_veh_sq.sqrt();
    b.q_mb_ped = mb_ped_sq.sqrt();
    b.r_int_veh = b.q_int_veh.exp();
    b.r_int_ped = b.q_int_ped.exp();
    b.r_mb_veh = b.q_mb_veh.exp();
    b.r_mb_ped = b.q_mb_ped.exp();
    b.mwaq = -(b.q_int_veh + b.q_int_ped + b.q_mb_veh + b.q_mb_ped);
    b.unclipped = -(b.r_int_veh + b.r_int_ped + b.r_mb_veh + b.r_mb_ped);
    b.total = b.unclipped.clamp(REWARD_FLOOR, 0.0);
    b
}
