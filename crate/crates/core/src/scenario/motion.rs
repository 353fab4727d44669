use serde::{Deserialize, Serialize};

use super::AgentMissionState;
use crate::error::{Error, Result};
use crate::geom::{signed_turn, wrap_degrees};

/// Unicycle with rate-limited heading and speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionLimits {
    pub turn_rate_deg_s: f64,
    pub accel_m_s2: f64,
    pub max_speed: f64,
}

impl Default for MotionLimits {
    fn default() -> Self {
        MotionLimits {
            turn_rate_deg_s: 20.0,
            accel_m_s2: 0.5,
            max_speed: 2.0,
        }
    }
}

impl MotionLimits {
    pub fn validate(&self) -> Result<()> {
        if self.turn_rate_deg_s > 0.0 && self.accel_m_s2 > 0.0 && self.max_speed > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid motion limits {self:?}")))
        }
    }
}

/// Moves the vehicle toward the desired heading and speed for `dt`
/// seconds, then advances its position at the new heading and speed.
pub fn step_motion(
    agent: &mut AgentMissionState,
    desired_heading: f64,
    desired_speed: f64,
    limits: &MotionLimits,
    energy_wh_per_m: f64,
    battery_capacity_wh: f64,
    dt: f64,
) {
    let max_turn = limits.turn_rate_deg_s * dt;
    let turn = signed_turn(agent.heading, desired_heading).clamp(-max_turn, max_turn);
    agent.heading = wrap_degrees(agent.heading + turn);

    let max_dv = limits.accel_m_s2 * dt;
    let dv = (desired_speed.clamp(0.0, limits.max_speed) - agent.speed).clamp(-max_dv, max_dv);
    agent.speed = (agent.speed + dv).clamp(0.0, limits.max_speed);

    let step = agent.speed * dt;
    agent.position = agent.position.advanced(agent.heading, step);
    agent.distance_traveled += step;
    agent.battery_used = (agent.distance_traveled * energy_wh_per_m / battery_capacity_wh).min(1.0);
}
