use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::clock::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakerState {
    Closed,
    Open,
    HalfOpen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BreakerConfig {
    pub failure_threshold: u32,
    pub open_secs: u64,
    pub probes: u32,
}

impl Default for BreakerConfig {
    fn default() -> Self {
        Self {
            failure_threshold: 5,
            open_secs: 30,
            probes: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakerSnapshot {
    pub state: BreakerState,
    pub consecutive_failures: u32,
    pub opened_at: Option<DateTime<Utc>>,
}

/// Ticket for one admitted call; hand it back with the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Normal,
    Probe { epoch: u64 },
}

#[derive(Debug)]
struct Inner {
    state: BreakerState,
    consecutive_failures: u32,
    opened_at: Option<DateTime<Utc>>,
    probes_issued: u32,
    probe_successes: u32,
    /// Bumped on every transition into half-open, so late probe results from
    /// an earlier window are ignored.
    epoch: u64,
}

pub struct CircuitBreaker {
    config: BreakerConfig,
    clock: Arc<dyn Clock>,
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for CircuitBreaker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CircuitBreaker")
            .field("config", &self.config)
            .field("snapshot", &self.snapshot())
            .finish()
    }
}

impl CircuitBreaker {
    pub fn new(config: BreakerConfig, clock: Arc<dyn Clock>) -> Self {
        Self {
            config,
            clock,
            inner: Mutex::new(Inner {
                state: BreakerState::Closed,
                consecutive_failures: 0,
                opened_at: None,
                probes_issued: 0,
                probe_successes: 0,
                epoch: 0,
            }),
        }
    }

    pub fn config(&self) -> &BreakerConfig {
        &self.config
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn open(&self, inner: &mut Inner) {
        inner.state = BreakerState::Open;
        inner.opened_at = Some(self.clock.now());
        inner.probes_issued = 0;
        inner.probe_successes = 0;
    }

    fn refresh(&self, inner: &mut Inner) {
        if inner.state == BreakerState::Open {
            let opened = inner.opened_at.unwrap_or_else(|| self.clock.now());
            if self.clock.now() >= opened + Duration::seconds(self.config.open_secs as i64) {
                inner.state = BreakerState::HalfOpen;
                inner.probes_issued = 0;
                inner.probe_successes = 0;
                inner.epoch += 1;
            }
        }
    }

    /// Current state, applying any due open → half-open transition.
    pub fn state(&self) -> BreakerState {
        let mut inner = self.lock();
        self.refresh(&mut inner);
        inner.state
    }

    pub fn snapshot(&self) -> BreakerSnapshot {
        let mut inner = self.lock();
        self.refresh(&mut inner);
        BreakerSnapshot {
            state: inner.state,
            consecutive_failures: inner.consecutive_failures,
            opened_at: inner.opened_at,
        }
    }

    /// Admits a call, or `None` when it must short-circuit.
    pub fn try_acquire(&self) -> Option<Admission> {
        let mut inner = self.lock();
        self.refresh(&mut inner);
        match inner.state {
            BreakerState::Closed => Some(Admission::Normal),
            BreakerState::Open => None,
            BreakerState::HalfOpen => {
                if inner.probes_issued < self.config.probes {
                    inner.probes_issued += 1;
                    Some(Admission::Probe { epoch: inner.epoch })
                } else {
                    None
                }
            }
        }
    }

    pub fn record_success(&self, admission: Admission) {
        let mut inner = self.lock();
        match (admission, inner.state) {
            (Admission::Normal, BreakerState::Closed) => inner.consecutive_failures = 0,
            (Admission::Probe { epoch }, BreakerState::HalfOpen) if epoch == inner.epoch => {
                inner.probe_successes += 1;
                if inner.probe_successes >= self.config.probes {
                    inner.state = BreakerState::Closed;
                    inner.consecutive_failures = 0;
                    inner.opened_at = None;
                }
            }
            _ => {}
        }
    }

    pub fn record_failure(&self, admission: Admission) {
        let mut inner = self.lock();
        match (admission, inner.state) {
            (Admission::Normal, BreakerState::Closed) => {
                inner.consecutive_failures += 1;
                if inner.consecutive_failures >= self.config.failure_threshold {
                    self.open(&mut inner);
                }
            }
            (Admission::Probe { epoch }, BreakerState::HalfOpen) if epoch == inner.epoch => {
                inner.consecutive_failures += 1;
                self.open(&mut inner);
            }
            _ => {}
        }
    }

    /// Forces a state; used by the gated test hook.
    pub fn force(&self, state: BreakerState) {
        let mut inner = self.lock();
        match state {
            BreakerState::Open => self.open(&mut inner),
            BreakerState::Closed => {
                inner.state = BreakerState::Closed;
                inner.consecutive_failures = 0;
                inner.opened_at = None;
            }
            BreakerState::HalfOpen => {
                inner.state = BreakerState::HalfOpen;
                inner.probes_issued = 0;
                inner.probe_successes = 0;
                inner.epoch += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ManualClock;

    fn breaker(probes: u32) -> (CircuitBreaker, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::new(Utc::now()));
        let config = BreakerConfig { probes, ..Default::default() };
        (CircuitBreaker::new(config, clock.clone()), clock)
    }

    #[test]
    fn opens_after_threshold() {
        let (b, _) = breaker(1);
        for _ in 0..4 {
            let a = b.try_acquire().unwrap();
            b.record_failure(a);
        }
        assert_eq!(b.state(), BreakerState::Closed);
        let a = b.try_acquire().unwrap();
        b.record_failure(a);
        assert_eq!(b.state(), BreakerState::Open);
        assert!(b.try_acquire().is_none());
    }

    #[test]
    fn success_resets_count() {
        let (b, _) = breaker(1);
        for _ in 0..4 {
            b.record_failure(Admission::Normal);
        }
        b.record_success(Admission::Normal);
        assert_eq!(b.snapshot().consecutive_failures, 0);
    }

    #[test]
    fn half_open_admits_probe_count() {
        let (b, clock) = breaker(2);
        b.force(BreakerState::Open);
        clock.advance(Duration::seconds(29));
        assert!(b.try_acquire().is_none());
        clock.advance(Duration::seconds(1));
        let p1 = b.try_acquire().unwrap();
        let p2 = b.try_acquire().unwrap();
        assert!(b.try_acquire().is_none());
        b.record_success(p1);
        assert_eq!(b.state(), BreakerState::HalfOpen);
        b.record_success(p2);
        assert_eq!(b.state(), BreakerState::Closed);
    }

    #[test]
    fn failed_probe_reopens() {
        let (b, clock) = breaker(1);
        b.force(BreakerState::Open);
        clock.advance(Duration::seconds(30));
        let p = b.try_acquire().unwrap();
        b.record_failure(p);
        assert_eq!(b.state(), BreakerState::Open);
        clock.advance(Duration::seconds(30));
        assert_eq!(b.state(), BreakerState::HalfOpen);
    }
}
