use chrono::{DateTime, Duration, Utc};

/// Source of event timestamps. Timestamps are informational, so any clock
/// gives the same state.
pub trait Clock: Send {
    fn now(&mut self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&mut self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Starts at `start` and advances by `step` on every reading.
#[derive(Debug, Clone, Copy)]
pub struct StepClock {
    next: DateTime<Utc>,
    step: Duration,
}

impl StepClock {
    pub fn new(start: DateTime<Utc>, step: Duration) -> Self {
        StepClock { next: start, step }
    }

    /// Fixed origin, one second per reading.
    pub fn deterministic() -> Self {
        StepClock::new(DateTime::UNIX_EPOCH, Duration::seconds(1))
    }

    /// Jumps forward, e.g. between simulated rounds.
    pub fn advance(&mut self, by: Duration) {
        self.next += by;
    }
}

impl Clock for StepClock {
    fn now(&mut self) -> DateTime<Utc> {
        let t = self.next;
        self.next += self.step;
        t
    }
}
