use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const ZERO: PidGains = PidGains {
        kp: 0.0,
        ki: 0.0,
        kd: 0.0,
    };

    pub fn is_zero(&self) -> bool {
        self.kp == 0.0 && self.ki == 0.0 && self.kd == 0.0
    }
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains {
            kp: 0.6,
            ki: 0.05,
            kd: 0.05,
        }
    }
}

/// Positional PID over one monitoring period (`dt = 1`), derivative on
/// error, with the integral clamped to `±integral_limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct PidController {
    gains: PidGains,
    integral_limit: f64,
    integral: f64,
    prev_error: f64,
    initialized: bool,
}

impl PidController {
    pub fn new(gains: PidGains, integral_limit: f64) -> Self {
        PidController {
            gains,
            integral_limit: integral_limit.abs(),
            integral: 0.0,
            prev_error: 0.0,
            initialized: false,
        }
    }

    pub fn gains(&self) -> PidGains {
        self.gains
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// Adjustment to apply to `current` to move it toward `target`.
    pub fn step(&mut self, target: f64, current: f64) -> f64 {
        let error = target - current;
        if !self.initialized {
            self.prev_error = error;
            self.initialized = true;
        }
        self.integral = (self.integral + error).clamp(-self.integral_limit, self.integral_limit);
        let derivative = error - self.prev_error;
        self.prev_error = error;
        self.gains.kp * error + self.gains.ki * self.integral + self.gains.kd * derivative
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = 0.0;
        self.initialized = false;
    }
}
