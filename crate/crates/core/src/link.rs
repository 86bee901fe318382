//! Fiber transmission and elementary-link success probabilities.

use thiserror::Error;

/// Loss coefficient of current telecom fiber, in km^-1.
pub const DEFAULT_GAMMA: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("distance must be finite and non-negative, got {0} km")]
    NegativeDistance(f64),
    #[error("loss coefficient must be finite and non-negative, got {0}")]
    InvalidGamma(f64),
    #[error("attempt count must be at least 1")]
    ZeroAttempts,
}

/// Link-generation settings applied uniformly to every elementary link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    gamma: f64,
    attempts: u32,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            gamma: DEFAULT_GAMMA,
            attempts: 1,
        }
    }
}

impl LinkParams {
    pub fn new(gamma: f64, attempts: u32) -> Result<Self, LinkError> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(LinkError::InvalidGamma(gamma));
        }
        if attempts == 0 {
            return Err(LinkError::ZeroAttempts);
        }
        Ok(LinkParams { gamma, attempts })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    /// Probability that at least one of the attempts over a fiber of
    /// length `d` km succeeds.
    pub fn success(&self, d: f64) -> Result<f64, LinkError> {
        link_success(d, self)
    }
}

/// Fiber transmission `10^(-gamma d / 10)`.
pub fn transmission(d: f64, gamma: f64) -> Result<f64, LinkError> {
    if !(d >= 0.0) || d.is_infinite() {
        return Err(LinkError::NegativeDistance(d));
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(LinkError::InvalidGamma(gamma));
    }
    Ok(10f64.powf(-gamma * d / 10.0))
}

/// `1 - (1 - eta)^attempts`.
pub fn link_success(d: f64, params: &LinkParams) -> Result<f64, LinkError> {
    let eta = transmission(d, params.gamma)?;
    if params.attempts == 1 {
        return Ok(eta);
    }
    let fail = 1.0 - eta;
    let fail_all = match i32::try_from(params.attempts) {
        Ok(m) => fail.powi(m),
        Err(_) => fail.powf(params.attempts as f64),
    };
    Ok(1.0 - fail_all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn transmission_values() {
        assert_eq!(transmission(0.0, 0.2).unwrap(), 1.0);
        assert!((transmission(50.0, 0.2).unwrap() - 0.1).abs() < 1e-15);
        // 15x15 grid spacing on a 100 km square: 10^(-2/14)
        let eta = transmission(100.0 / 14.0, 0.2).unwrap();
        assert!((eta - 0.719685673).abs() < 1e-9, "{eta}");
        assert_eq!(
            transmission(-1.0, 0.2),
            Err(LinkError::NegativeDistance(-1.0))
        );
        assert!(transmission(f64::NAN, 0.2).is_err());
    }

    #[test]
    fn single_attempt_is_transmission() {
        let p = LinkParams::new(0.2, 1).unwrap();
        for d in [0.0, 3.3, 50.0, 141.0] {
            assert_eq!(p.success(d).unwrap(), transmission(d, 0.2).unwrap());
        }
    }

    #[test]
    fn two_attempts_at_ten_percent() {
        let p = LinkParams::new(0.2, 2).unwrap();
        assert!((p.success(50.0).unwrap() - 0.19).abs() < 1e-15);
    }

    #[test]
    fn attempts_strictly_increase_success() {
        let mut prev = 0.0;
        for k in 0..=10 {
            let p = LinkParams::new(0.2, 1 << k).unwrap().success(120.0).unwrap();
            assert!(p > prev && p <= 1.0, "m={} p={p}", 1 << k);
            prev = p;
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert_eq!(LinkParams::new(0.2, 0), Err(LinkError::ZeroAttempts));
        assert_eq!(LinkParams::new(-0.1, 1), Err(LinkError::InvalidGamma(-0.1)));
    }

    proptest! {
        #[test]
        fn transmission_decreasing(d in 0.0f64..500.0, dd in 0.01f64..50.0, g in 0.01f64..1.0, dg in 0.01f64..1.0) {
            let t = transmission(d, g).unwrap();
            prop_assert!(transmission(d + dd, g).unwrap() < t);
            prop_assert!(transmission(d, g + dg).unwrap() < t);
            prop_assert!(t > 0.0 && t <= 1.0);
        }

        #[test]
        fn success_nondecreasing_in_attempts(d in 0.0f64..300.0, m in 1u32..64) {
            let a = LinkParams::new(0.2, m).unwrap().success(d).unwrap();
            let b = LinkParams::new(0.2, m + 1).unwrap().success(d).unwrap();
            prop_assert!(b >= a);
        }
    }
}
