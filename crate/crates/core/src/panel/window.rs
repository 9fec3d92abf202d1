use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::Panel;
use crate::error::{Error, Result};

/// Minimum estimation-window length.
pub const MIN_ESTIMATION_LEN: usize = 10;

/// Estimation/event split of a panel timeline.
///
/// Indexes are 0-based positions in the panel timeline. The estimation
/// window is `start..event_start` and the event window is
/// `event_start..end`; together they partition the usable timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSplit {
    pub start: usize,
    pub event_start: usize,
    pub end: usize,
}

impl WindowSplit {
    pub fn new(start: usize, event_start: usize, end: usize) -> Result<Self> {
        if event_start < start + MIN_ESTIMATION_LEN {
            return Err(Error::Window(format!(
                "estimation window has {} points, need at least {MIN_ESTIMATION_LEN}",
                event_start.saturating_sub(start)
            )));
        }
        if end <= event_start {
            return Err(Error::Window("event window is empty".into()));
        }
        Ok(WindowSplit { start, event_start, end })
    }

    /// Estimation window length τ₀.
    pub fn tau0(&self) -> usize {
        self.event_start - self.start
    }

    /// Event window length τ₁.
    pub fn tau1(&self) -> usize {
        self.end - self.event_start
    }

    /// τ₀ + τ₁.
    pub fn tau(&self) -> usize {
        self.end - self.start
    }

    pub fn estimation(&self) -> Range<usize> {
        self.start..self.event_start
    }

    pub fn event(&self) -> Range<usize> {
        self.event_start..self.end
    }

    pub fn full(&self) -> Range<usize> {
        self.start..self.end
    }

    /// Index of the last estimation-window point (T₁).
    pub fn last_estimation(&self) -> usize {
        self.event_start - 1
    }
}

/// Splits the usable timeline at `event_date`; the event window runs to the
/// end of the timeline.
pub fn split_windows(panel: &Panel, event_date: NaiveDate) -> Result<WindowSplit> {
    split_windows_until(panel, event_date, None)
}

/// Like [`split_windows`] but the event window stops at `end_date`
/// (inclusive) when given.
pub fn split_windows_until(
    panel: &Panel,
    event_date: NaiveDate,
    end_date: Option<NaiveDate>,
) -> Result<WindowSplit> {
    let tl = panel.timeline();
    let (first, last) = (tl[0], tl[tl.len() - 1]);
    if event_date <= first || event_date > last {
        return Err(Error::Window(format!(
            "event date {event_date} is not strictly inside the timeline {first}..{last}"
        )));
    }
    let event_start = tl.partition_point(|d| *d < event_date);
    let end = match end_date {
        None => tl.len(),
        Some(e) => {
            if e < event_date || e > last {
                return Err(Error::Window(format!(
                    "event window end {e} must lie in {event_date}..{last}"
                )));
            }
            tl.partition_point(|d| *d <= e)
        }
    };
    WindowSplit::new(panel.first_usable(), event_start, end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Station;
    use nalgebra::DMatrix;

    fn panel(tau: usize) -> Panel {
        let d0 = NaiveDate::from_ymd_opt(2021, 6, 1).unwrap();
        Panel::new(
            vec![Station::new("A", 0.0, 0.0)],
            (0..tau).map(|i| d0 + chrono::Days::new(i as u64)).collect(),
            DMatrix::from_element(1, tau, 1.0),
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn second_timestamp_is_too_early() {
        let p = panel(12);
        let err = split_windows(&p, p.timeline()[1]).unwrap_err();
        assert!(matches!(err, Error::Window(_)));
    }

    #[test]
    fn partition_and_idempotence() {
        let p = panel(40);
        let a = split_windows(&p, p.timeline()[25]).unwrap();
        let b = split_windows(&p, p.timeline()[25]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tau0() + a.tau1(), 40);
        assert_eq!(a.last_estimation(), 24);
    }

    #[test]
    fn explicit_end() {
        let p = panel(40);
        let s = split_windows_until(&p, p.timeline()[25], Some(p.timeline()[30])).unwrap();
        assert_eq!(s.tau1(), 6);
    }

    #[test]
    fn outside_timeline() {
        let p = panel(20);
        let late = p.timeline()[19] + chrono::Days::new(1);
        assert!(split_windows(&p, late).is_err());
        assert!(split_windows(&p, p.timeline()[0]).is_err());
    }
}
