use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SignalMatrix;

/// Smallest selection ever accepted, whatever the factor count.
pub const MIN_INTERVAL_ROWS: usize = 10;

/// Inclusive time window in the data's own time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Interval {
    pub fn new(t_start: f64, t_end: f64) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite() && t_start < t_end) {
            return Err(Error::InvalidInput(format!("interval needs start < end, got {t_start}:{t_end}")));
        }
        Ok(Interval { t_start, t_end, label: None })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_start <= t && t <= self.t_end
    }
}

impl FromStr for Interval {
    type Err = Error;

    /// `start:end`, e.g. `1000:1600`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) =
            s.split_once(':').ok_or_else(|| Error::InvalidInput(format!("interval '{s}' is not start:end")))?;
        let num = |x: &str| {
            x.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad interval bound '{x}'")))
        };
        Interval::new(num(a)?, num(b)?)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.t_start, self.t_end)
    }
}

/// Rows with `t_start <= t <= t_end`. At least `max(k + 2, 10)` rows must
/// remain so a `k`-factor fit keeps positive residual degrees of freedom.
pub fn select_interval(m: &SignalMatrix, iv: &Interval, k: usize) -> Result<SignalMatrix> {
    let rows: Vec<usize> = m.times().iter().enumerate().filter(|(_, t)| iv.contains(**t)).map(|(r, _)| r).collect();
    let need = (k + 2).max(MIN_INTERVAL_ROWS);
    if rows.len() < need {
        return Err(Error::InvalidInput(format!(
            "interval {iv} selects {} rows, need at least {need}",
            rows.len()
        )));
    }
    m.select_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn matrix() -> SignalMatrix {
        let values = DMatrix::from_fn(20, 2, |t, i| (t * (i + 1)) as f64 + if t % 3 == 0 { 0.5 } else { 0.0 });
        let times = (0..20).map(|t| 100.0 + 2.0 * t as f64).collect();
        SignalMatrix::new(times, values, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn parse_and_display() {
        let iv: Interval = "100:138".parse().unwrap();
        assert_eq!((iv.t_start, iv.t_end), (100.0, 138.0));
        assert_eq!(iv.to_string(), "100:138");
        assert!("5:5".parse::<Interval>().is_err());
        assert!("7:3".parse::<Interval>().is_err());
        assert!("abc".parse::<Interval>().is_err());
    }

    #[test]
    fn covering_interval_is_identity() {
        let m = matrix();
        assert_eq!(select_interval(&m, &Interval::new(0.0, 1e6).unwrap(), 1).unwrap(), m);
    }

    #[test]
    fn between_samples_is_too_small() {
        let m = matrix();
        assert!(select_interval(&m, &Interval::new(100.5, 101.5).unwrap(), 1).is_err());
    }

    #[test]
    fn bounds_are_inclusive() {
        let m = matrix();
        let s = select_interval(&m, &Interval::new(104.0, 122.0).unwrap(), 1).unwrap();
        assert_eq!(s.times().first(), Some(&104.0));
        assert_eq!(s.times().last(), Some(&122.0));
        assert_eq!(s.n_rows(), 10);
        assert!(select_interval(&m, &Interval::new(104.0, 121.9).unwrap(), 1).is_err());
        assert!(select_interval(&m, &Interval::new(100.0, 138.0).unwrap(), 18).is_ok());
        assert!(select_interval(&m, &Interval::new(100.0, 138.0).unwrap(), 19).is_err());
    }
}
