//! Diagnostic events emitted by the engine and the splitting baseline.

use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// All live particles stopped at a level; `ess` is measured before resampling.
    LevelReached { level: usize, ess: f64, active: usize },
    Resampled { level: usize, ess: f64 },
    ParticleZeroed { particle: usize, reason: ZeroReason },
    Degenerate { level: usize },
    /// One kill-and-clone iteration of adaptive multilevel splitting.
    SplittingIteration { iteration: usize, level: f64, killed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroReason {
    EmptySupport,
    StepCap,
    ZeroIncrement,
    ZeroTerminalDensity,
}

pub trait EventSink: Sync {
    fn record(&self, event: Event);
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl EventSink for NullSink {
    fn record(&self, _event: Event) {}
}

/// Forwards events to the `log` facade at debug level.
#[derive(Debug, Default, Clone, Copy)]
pub struct LogSink;

impl EventSink for LogSink {
    fn record(&self, event: Event) {
        match &event {
            Event::Degenerate { .. } => log::warn!("{event:?}"),
            Event::ParticleZeroed { .. } => log::trace!("{event:?}"),
            _ => log::debug!("{event:?}"),
        }
    }
}

/// Keeps every event in memory; mostly useful in tests.
#[derive(Debug, Default)]
pub struct CollectingSink {
    events: Mutex<Vec<Event>>,
}

impl CollectingSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> Vec<Event> {
        self.events.lock().expect("sink poisoned").clone()
    }
}

impl EventSink for CollectingSink {
    fn record(&self, event: Event) {
        self.events.lock().expect("sink poisoned").push(event);
    }
}
