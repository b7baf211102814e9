//! Binomial confidence intervals.

use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The endpoints are exact at the boundary counts; rounding would
    // otherwise leave p̂ just outside the interval.
    Interval {
        lo: if successes == 0 { 0.0 } else { (centre - half).max(0.0) },
        hi: if successes >= trials { 1.0 } else { (centre + half).min(1.0) },
    }
}

/// `(min, median, max)` of a sample; `None` when empty.
pub fn min_median_max(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    Some((v[0], median, v[n - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_value() {
        // 8 of 10 at 95%: (0.4902, 0.9433)
        let ci = wilson_interval(8, 10, Z95);
        assert!((ci.lo - 0.490_162).abs() < 1e-5, "{ci:?}");
        assert!((ci.hi - 0.943_318).abs() < 1e-5, "{ci:?}");
    }

    #[test]
    fn wilson_edges_stay_in_unit_interval() {
        let all = wilson_interval(50, 50, Z95);
        assert!(all.hi <= 1.0 && all.lo > 0.9);
        let none = wilson_interval(0, 50, Z95);
        assert!(none.lo >= 0.0 && none.hi < 0.1);
    }

    #[test]
    fn quadrupling_trials_halves_width() {
        for &p in &[0.2, 0.5, 0.9] {
            let n = 400u64;
            let w1 = wilson_interval((p * n as f64) as u64, n, Z95).width();
            let w4 = wilson_interval((p * 4.0 * n as f64) as u64, 4 * n, Z95).width();
            let ratio = w4 / w1;
            assert!((ratio - 0.5).abs() < 0.02, "p = {p}: ratio {ratio}");
        }
    }

    #[test]
    fn median_of_even_sample() {
        assert_eq!(min_median_max(&[4.0, 1.0, 3.0, 2.0]), Some((1.0, 2.5, 4.0)));
        assert_eq!(min_median_max(&[]), None);
    }
}
