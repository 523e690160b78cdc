//! Threshold values and threshold policies.

use std::fmt;
use std::str::FromStr;

/// An integer threshold `>= -1`, or "unbounded within the truncation".
///
/// `Unbounded` is what the generic threshold function returns when the
/// sequence never exceeds the level on the evaluated range; it is written
/// as `inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Threshold {
    Finite(i64),
    Unbounded,
}

impl Threshold {
    pub const REJECT_ALL: Threshold = Threshold::Finite(-1);

    /// Whether `x <= self`.
    pub fn covers(self, x: usize) -> bool {
        match self {
            Threshold::Finite(b) => (x as i64) <= b,
            Threshold::Unbounded => true,
        }
    }

    pub fn finite(self) -> Option<i64> {
        match self {
            Threshold::Finite(b) => Some(b),
            Threshold::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Threshold::Unbounded)
    }

    pub fn plus_one(self) -> Threshold {
        match self {
            Threshold::Finite(b) => Threshold::Finite(b + 1),
            Threshold::Unbounded => Threshold::Unbounded,
        }
    }

    /// Whether the threshold sits within `margin` states of `x_max`.
    pub fn too_close_to(self, x_max: usize, margin: usize) -> bool {
        match self {
            Threshold::Finite(b) => b + margin as i64 > x_max as i64,
            Threshold::Unbounded => true,
        }
    }
}

impl PartialOrd for Threshold {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Threshold {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self, other) {
            (Threshold::Finite(a), Threshold::Finite(b)) => a.cmp(b),
            (Threshold::Finite(_), Threshold::Unbounded) => Less,
            (Threshold::Unbounded, Threshold::Finite(_)) => Greater,
            (Threshold::Unbounded, Threshold::Unbounded) => Equal,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(b) => write!(f, "{b}"),
            Threshold::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for Threshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Threshold::Unbounded);
        }
        let b: i64 = s.parse().map_err(|_| format!("not a threshold: `{s}`"))?;
        if b < -1 {
            return Err(format!("threshold must be >= -1, got {b}"));
        }
        Ok(Threshold::Finite(b))
    }
}

/// `T_f(theta) = sup { k >= 0 : f(k) <= theta }` over the given range,
/// `-1` when no element qualifies, and `Unbounded` when the last element
/// still qualifies (the supremum may lie beyond the range).
pub fn threshold_t(f: &[f64], theta: f64) -> Threshold {
    if f.last().is_some_and(|&last| last <= theta) {
        return Threshold::Unbounded;
    }
    match f.iter().rposition(|&v| v <= theta) {
        Some(k) => Threshold::Finite(k as i64),
        None => Threshold::REJECT_ALL,
    }
}

/// A stationary threshold rule: run the low rate iff `x <= service`
/// (always at `x = 0`), admit iff `x <= admission`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ThresholdPolicy {
    pub service: Threshold,
    pub admission: Threshold,
}

impl ThresholdPolicy {
    pub fn new(service: Threshold, admission: Threshold) -> Self {
        Self { service, admission }
    }

    /// Admission-only rule: low rate everywhere.
    pub fn admission_only(admission: Threshold) -> Self {
        Self { service: Threshold::Unbounded, admission }
    }

    pub fn reject_all() -> Self {
        Self::admission_only(Threshold::REJECT_ALL)
    }

    pub fn serves_fast(&self, x: usize) -> bool {
        x > 0 && !self.service.covers(x)
    }

    pub fn admits(&self, x: usize) -> bool {
        self.admission.covers(x)
    }

    /// `B^s >= B^d + 1`: the fast server is never on while arrivals are admitted
    /// at the next epoch.
    pub fn service_above_admission(&self) -> bool {
        self.service >= self.admission.plus_one()
    }
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bs={} Bd={}", self.service, self.admission)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn definition_examples() {
        assert_eq!(threshold_t(&[0.0, 1.0, 2.0, 3.0], 1.5), Threshold::Finite(1));
        assert_eq!(threshold_t(&[5.0, 6.0, 7.0], 1.0), Threshold::REJECT_ALL);
        assert_eq!(threshold_t(&[0.0, 0.0, 0.0], 0.0), Threshold::Unbounded);
        assert_eq!(threshold_t(&[], 0.0), Threshold::REJECT_ALL);
    }

    #[test]
    fn ties_count_as_below() {
        assert_eq!(threshold_t(&[0.0, 1.0, 2.0], 1.0), Threshold::Finite(1));
    }

    #[test]
    fn ordering_and_display() {
        assert!(Threshold::Unbounded > Threshold::Finite(1_000_000));
        assert!(Threshold::REJECT_ALL < Threshold::Finite(0));
        assert_eq!(Threshold::Unbounded.to_string(), "inf");
        assert_eq!("inf".parse::<Threshold>(), Ok(Threshold::Unbounded));
        assert_eq!("-1".parse::<Threshold>(), Ok(Threshold::REJECT_ALL));
        assert!("-2".parse::<Threshold>().is_err());
    }

    #[test]
    fn policy_semantics() {
        let p = ThresholdPolicy::new(Threshold::Finite(2), Threshold::Finite(0));
        assert!(!p.serves_fast(0));
        assert!(!p.serves_fast(2));
        assert!(p.serves_fast(3));
        assert!(p.admits(0));
        assert!(!p.admits(1));
        assert!(p.service_above_admission());
        let q = ThresholdPolicy::new(Threshold::Finite(0), Threshold::Finite(2));
        assert!(!q.serves_fast(0), "empty system always runs slow");
        assert!(q.serves_fast(1));
        assert!(!q.service_above_admission());
    }

    #[test]
    fn too_close() {
        assert!(!Threshold::Finite(56).too_close_to(64, 8));
        assert!(Threshold::Finite(57).too_close_to(64, 8));
        assert!(Threshold::Unbounded.too_close_to(64, 8));
    }

    proptest! {
        #[test]
        fn monotone_in_level(mut f in prop::collection::vec(-10.0f64..10.0, 1..30),
                             a in -12.0f64..12.0, b in -12.0f64..12.0) {
            f.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(threshold_t(&f, lo) <= threshold_t(&f, hi));
        }

        #[test]
        fn pointwise_smaller_sequence_has_larger_threshold(
            mut f in prop::collection::vec(-10.0f64..10.0, 1..30),
            bump in prop::collection::vec(0.0f64..3.0, 30),
            theta in -12.0f64..12.0,
        ) {
            f.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let g: Vec<f64> = f.iter().zip(&bump).map(|(a, b)| a + b).collect();
            prop_assert!(threshold_t(&f, theta) >= threshold_t(&g, theta));
        }
    }
}
