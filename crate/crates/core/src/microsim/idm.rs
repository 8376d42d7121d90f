use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intelligent Driver Model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Desired speed (m/s).
    pub v0: f64,
    /// Maximum acceleration (m/s^2).
    pub a_max: f64,
    /// Comfortable deceleration (m/s^2).
    pub b: f64,
    /// Desired time headway (s).
    pub headway_s: f64,
    /// Jam distance (m).
    pub s0: f64,
    pub delta: f64,
    pub length_m: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            v0: 13.89,
            a_max: 0.73,
            b: 1.67,
            headway_s: 1.6,
            s0: 2.0,
            delta: 4.0,
            length_m: 5.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("v0", self.v0),
            ("a_max", self.a_max),
            ("b", self.b),
            ("headway_s", self.headway_s),
            ("s0", self.s0),
            ("delta", self.delta),
            ("length_m", self.length_m),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("idm.{name}"), "must be finite and > 0"));
            }
        }
        if self.delta < 1.0 {
            return Err(Error::config("idm.delta", "must be >= 1"));
        }
        Ok(())
    }

    /// Comfortable stopping distance from speed `v`.
    pub fn stopping_distance(&self, v: f64) -> f64 {
        v * v / (2.0 * self.b)
    }
}

/// IDM acceleration. `leader` is `(leader_speed, bumper_gap)`; `None` means
/// free road.
pub fn idm_accel(v: f64, leader: Option<(f64, f64)>, p: &IdmParams) -> Result<f64> {
    let free = p.a_max * (1.0 - (v / p.v0).powf(p.delta));
    let Some((v_lead, gap)) = leader else {
        return Ok(free);
    };
    if !(gap > 0.0) {
        return Err(Error::Domain(format!("IDM gap must be > 0 with a leader, got {gap}")));
    }
    let dv = v - v_lead;
    let dynamic = v * p.headway_s + v * dv / (2.0 * (p.a_max * p.b).sqrt());
    let s_star = p.s0 + dynamic.max(0.0);
    Ok(free - p.a_max * (s_star / gap).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_road_limits() {
        let p = IdmParams::default();
        assert!(idm_accel(p.v0, None, &p).unwrap().abs() < 1e-15);
        assert_eq!(idm_accel(0.0, None, &p).unwrap(), 0.73);
    }

    #[test]
    fn closing_in_on_leader_matches_direct_formula() {
        // Frozen from a scratch evaluation of the textbook formula:
        //   s* = 2 + 10*1.6 + 10*2/(2*sqrt(0.73*1.67)) = 27.0573...
        //   a  = 0.73*(1 - (10/13.89)^4 - (s*/20)^2)
        let p = IdmParams::default();
        let a = idm_accel(10.0, Some((8.0, 20.0)), &p).unwrap();
        let s_star: f64 = 2.0 + 16.0 + 20.0 / (2.0 * (0.73f64 * 1.67).sqrt());
        let expected = 0.73 * (1.0 - (10.0f64 / 13.89).powi(4) - (s_star / 20.0).powi(2));
        assert!((a - expected).abs() < 1e-9);
        assert!((a - (-0.8021563565569)).abs() < 1e-12, "{a}");
    }

    #[test]
    fn non_positive_gap_is_domain_error() {
        let p = IdmParams::default();
        assert!(matches!(idm_accel(5.0, Some((0.0, 0.0)), &p), Err(Error::Domain(_))));
        assert!(matches!(idm_accel(5.0, Some((0.0, -1.0)), &p), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_params_rejected() {
        let p = IdmParams {
            delta: 0.5,
            ..IdmParams::default()
        };
        assert!(p.validate().is_err());
        let p = IdmParams {
            b: -1.0,
            ..IdmParams::default()
        };
        assert!(p.validate().is_err());
        assert!(IdmParams::default().validate().is_ok());
    }
}
