//! Compute-doubling extrapolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BASE_YEAR: f64 = 2022.0;
pub const DEFAULT_DOUBLING_MONTHS: f64 = 18.0;

/// Speedup accumulated after `years` when compute doubles every `doubling_months`.
pub fn speedup_after(years: f64, doubling_months: f64) -> f64 {
    (12.0 * years / doubling_months).exp2()
}

/// Years until a device `ratio` times slower catches up.
pub fn years_to_parity(ratio: f64, doubling_months: f64) -> f64 {
    doubling_months / 12.0 * ratio.log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendForecast {
    pub base_year: f64,
    pub doubling_months: f64,
    pub slowdown_ratio: f64,
    pub years_to_parity: f64,
    pub parity_year: f64,
}

pub fn parity_year(base_year: f64, slow_time: f64, fast_time: f64, doubling_months: f64) -> Result<TrendForecast> {
    if !(doubling_months.is_finite() && doubling_months > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "doubling period must be > 0 months, got {doubling_months}"
        )));
    }
    if !(fast_time.is_finite() && fast_time > 0.0 && slow_time.is_finite()) {
        return Err(Error::InvalidSpec("times must be finite and > 0".into()));
    }
    if slow_time < fast_time {
        return Err(Error::InvalidRatio {
            slow: slow_time,
            fast: fast_time,
        });
    }
    let ratio = slow_time / fast_time;
    let years = years_to_parity(ratio, doubling_months);
    Ok(TrendForecast {
        base_year,
        doubling_months,
        slowdown_ratio: ratio,
        years_to_parity: years,
        parity_year: base_year + years,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_law() {
        assert_eq!(speedup_after(0.0, 18.0), 1.0);
        assert_eq!(speedup_after(1.5, 18.0), 2.0);
        assert!((speedup_after(5.0, 18.0) - 10.079).abs() < 1e-3);
        assert_eq!(years_to_parity(8.0, 18.0), 4.5);
    }

    #[test]
    fn nx_against_a40() {
        let f = parity_year(2022.0, 1.78, 0.27, 18.0).unwrap();
        assert!((2026.0..=2028.0).contains(&f.parity_year), "{}", f.parity_year);
        assert_eq!(f.parity_year, f.base_year + f.years_to_parity);
    }

    #[test]
    fn equal_times_mean_parity_now() {
        let f = parity_year(2022.0, 0.3, 0.3, 18.0).unwrap();
        assert_eq!(f.years_to_parity, 0.0);
        assert_eq!(f.parity_year, 2022.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(parity_year(2022.0, 0.1, 0.2, 18.0), Err(Error::InvalidRatio { .. })));
        assert!(parity_year(2022.0, 1.0, 0.0, 18.0).is_err());
        assert!(parity_year(2022.0, 1.0, 0.5, 0.0).is_err());
    }
}
