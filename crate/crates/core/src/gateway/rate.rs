use std::collections::VecDeque;

use serde::Serialize;

use crate::clock::NANOS_PER_MILLI;

/// Nominal client publish period (50 Hz).
pub const NOMINAL_PERIOD_MS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    /// Intervals in the window.
    pub intervals: usize,
    pub mean_interval_ms: f64,
    /// Standard deviation of the intervals.
    pub jitter_ms: f64,
    /// Samples presumed lost: each gap of k nominal periods counts k - 1.
    pub drop_estimate: u64,
}

/// Sliding-window inter-arrival statistics for one stream.
#[derive(Debug, Clone)]
pub struct RateMonitor {
    nominal_ms: f64,
    window: usize,
    last_ns: Option<u64>,
    gaps_ms: VecDeque<f64>,
}

impl Default for RateMonitor {
    fn default() -> Self {
        Self::new(NOMINAL_PERIOD_MS, 250)
    }
}

impl RateMonitor {
    pub fn new(nominal_ms: f64, window: usize) -> Self {
        assert!(nominal_ms > 0.0 && window > 0);
        Self { nominal_ms, window, last_ns: None, gaps_ms: VecDeque::with_capacity(window) }
    }

    pub fn record(&mut self, arrival_ns: u64) {
        if let Some(prev) = self.last_ns {
            let gap = arrival_ns.saturating_sub(prev) as f64 / NANOS_PER_MILLI as f64;
            if self.gaps_ms.len() == self.window {
                self.gaps_ms.pop_front();
            }
            self.gaps_ms.push_back(gap);
        }
        self.last_ns = Some(arrival_ns);
    }

    /// `None` until two samples have arrived.
    pub fn report(&self) -> Option<RateReport> {
        let n = self.gaps_ms.len();
        if n == 0 {
            return None;
        }
        let mean = self.gaps_ms.iter().sum::<f64>() / n as f64;
        let var = self.gaps_ms.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n as f64;
        let drop_estimate = self
            .gaps_ms
            .iter()
            .map(|g| ((g / self.nominal_ms).round() as u64).saturating_sub(1))
            .sum();
        Some(RateReport { intervals: n, mean_interval_ms: mean, jitter_ms: var.sqrt(), drop_estimate })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS: u64 = NANOS_PER_MILLI;

    #[test]
    fn needs_two_samples() {
        let mut m = RateMonitor::default();
        assert!(m.report().is_none());
        m.record(0);
        assert!(m.report().is_none());
        m.record(100 * MS);
        let r = m.report().unwrap();
        assert_eq!(r.mean_interval_ms, 100.0);
        assert_eq!(r.jitter_ms, 0.0);
    }

    #[test]
    fn steady_fifty_hz() {
        let mut m = RateMonitor::default();
        // +/- 0.5 ms of deterministic wobble
        for i in 0..500u64 {
            let wobble = if i % 2 == 0 { 0 } else { MS / 2 };
            m.record(i * 20 * MS + wobble);
        }
        let r = m.report().unwrap();
        assert!((r.mean_interval_ms - 20.0).abs() <= 1.0);
        assert_eq!(r.drop_estimate, 0);
        assert_eq!(r.intervals, 250);
    }

    #[test]
    fn long_gap_counts_drops() {
        let mut m = RateMonitor::default();
        let mut t = 0;
        for _ in 0..10 {
            m.record(t);
            t += 20 * MS;
        }
        t += 480 * MS; // 500 ms since the previous sample
        m.record(t);
        assert!(m.report().unwrap().drop_estimate >= 24);
    }
}
