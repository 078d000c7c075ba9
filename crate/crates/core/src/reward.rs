//! Delay measures and the normalized reward.

/// Linear delay of one vehicle, `1 - v / v_max`.
pub fn individual_delay(speed: f64, v_max: f64) -> f64 {
    1.0 - speed / v_max
}

/// `Σ (1 - (v / v_max)²)` over the given speeds.
pub fn total_squared_delay<I>(speeds: I, v_max: f64) -> f64
where
    I: IntoIterator<Item = f64>,
{
    speeds
        .into_iter()
        .map(|v| {
            let x = v / v_max;
            1.0 - x * x
        })
        .sum()
}

/// Running maximum of the total squared delay, shared by a whole training run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardState {
    pub tsd_max: f64,
}

impl Default for RewardState {
    fn default() -> Self {
        Self { tsd_max: 1.0 }
    }
}

impl RewardState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Updates the running maximum and returns `1 - tsd / tsd_max`.
    pub fn reward(&mut self, tsd: f64) -> f64 {
        self.tsd_max = self.tsd_max.max(tsd);
        (1.0 - tsd / self.tsd_max).clamp(0.0, 1.0)
    }

    /// Reward without touching the running maximum.
    pub fn peek(&self, tsd: f64) -> f64 {
        (1.0 - tsd / self.tsd_max.max(tsd)).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_values() {
        assert_eq!(individual_delay(14.0, 14.0), 0.0);
        assert_eq!(individual_delay(0.0, 14.0), 1.0);
        assert_eq!(individual_delay(7.0, 14.0), 0.5);
    }

    #[test]
    fn tsd_values() {
        assert_eq!(total_squared_delay([14.0, 14.0], 14.0), 0.0);
        assert_eq!(total_squared_delay([0.0], 14.0), 1.0);
        assert_eq!(total_squared_delay([7.0, 7.0], 14.0), 1.5);
        assert_eq!(total_squared_delay(std::iter::empty(), 14.0), 0.0);
    }

    #[test]
    fn reward_values() {
        let mut s = RewardState::new();
        assert_eq!(s.reward(0.0), 1.0);
        assert_eq!(s.reward(7.0), 0.0);
        let mut s = RewardState { tsd_max: 10.0 };
        assert!((s.reward(4.0) - 0.6).abs() < 1e-15);
        assert_eq!(s.tsd_max, 10.0);
        assert_eq!(s.peek(20.0), 0.0);
        assert_eq!(s.tsd_max, 10.0);
    }
}
