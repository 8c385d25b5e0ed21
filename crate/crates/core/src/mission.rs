//! Mission switching: a configurable transition table over coverage and
//! active-sensing modes, with the reduced two-stage mission as the default.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MissionMode {
    CppLowBudget,
    CppHighBudget,
    ActiveSensing,
    Stopped,
}

impl std::fmt::Display for MissionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MissionMode::CppLowBudget => "cpp-low",
            MissionMode::CppHighBudget => "cpp-high",
            MissionMode::ActiveSensing => "active-sensing",
            MissionMode::Stopped => "stopped",
        };
        f.write_str(s)
    }
}

/// A mission event, tagged with the simulation time it occurred at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    CoveragePassComplete,
    /// Number of positive binary readings seen in the triggering report.
    ContaminantDetected(u32),
    BudgetExhausted,
    NoDetectionsInWindow,
    MeasurementQuotaReached,
}

/// Guard thresholds for the general switching model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guards {
    /// Minimum positive readings for a detection to count.
    pub detection_level: u32,
    /// Seconds without a detection before the no-detection event fires.
    pub no_detection_window: f64,
}

impl Default for Guards {
    fn default() -> Self {
        Self {
            detection_level: 1,
            no_detection_window: 300.0,
        }
    }
}

/// Transition table: (mode, event kind) -> next mode; unmatched pairs stay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    pub guards: Guards,
    edges: Vec<(MissionMode, EdgeTrigger, MissionMode)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum EdgeTrigger {
    CoveragePassComplete,
    /// Fires when the detected level meets the guard.
    ContaminantAtLevel,
    BudgetExhausted,
    NoDetectionsInWindow,
    MeasurementQuotaReached,
}

impl TransitionTable {
    /// Two-stage mission: one coverage pass, then active sensing until the
    /// measurement quota, then stop. No edge ever leaves AS for coverage.
    pub fn reduced_model() -> Self {
        Self {
            guards: Guards::default(),
            edges: vec![
                (
                    MissionMode::CppLowBudget,
                    EdgeTrigger::CoveragePassComplete,
                    MissionMode::ActiveSensing,
                ),
                (
                    MissionMode::CppLowBudget,
                    EdgeTrigger::BudgetExhausted,
                    MissionMode::ActiveSensing,
                ),
                (
                    MissionMode::ActiveSensing,
                    EdgeTrigger::MeasurementQuotaReached,
                    MissionMode::Stopped,
                ),
            ],
        }
    }

    /// Full switching model with low/high-budget coverage and AS re-entry.
    pub fn general_model(guards: Guards) -> Result<Self> {
        if guards.detection_level == 0 {
            return Err(Error::Config("detection level guard must be >= 1".into()));
        }
        if !(guards.no_detection_window > 0.0) {
            return Err(Error::Config(
                "no-detection window guard must be positive".into(),
            ));
        }
        let mut edges = vec![
            (
                MissionMode::CppLowBudget,
                EdgeTrigger::NoDetectionsInWindow,
                MissionMode::CppHighBudget,
            ),
            (
                MissionMode::CppLowBudget,
                EdgeTrigger::ContaminantAtLevel,
                MissionMode::ActiveSensing,
            ),
            (
                MissionMode::CppHighBudget,
                EdgeTrigger::ContaminantAtLevel,
                MissionMode::ActiveSensing,
            ),
            (
                MissionMode::ActiveSensing,
                EdgeTrigger::NoDetectionsInWindow,
                MissionMode::CppHighBudget,
            ),
            (
                MissionMode::ActiveSensing,
                EdgeTrigger::MeasurementQuotaReached,
                MissionMode::Stopped,
            ),
        ];
        edges.extend(Self::reduced_model().edges.into_iter().filter(|e| {
            // Keep the reduced coverage-complete edges too.
            matches!(
                e.1,
                EdgeTrigger::CoveragePassComplete | EdgeTrigger::BudgetExhausted
            )
        }));
        Ok(Self { guards, edges })
    }

    fn trigger_of(&self, kind: EventKind) -> Option<EdgeTrigger> {
        match kind {
            EventKind::CoveragePassComplete => Some(EdgeTrigger::CoveragePassComplete),
            EventKind::ContaminantDetected(level) => {
                if level >= self.guards.detection_level {
                    Some(EdgeTrigger::ContaminantAtLevel)
                } else {
                    None
                }
            }
            EventKind::BudgetExhausted => Some(EdgeTrigger::BudgetExhausted),
            EventKind::NoDetectionsInWindow => Some(EdgeTrigger::NoDetectionsInWindow),
            EventKind::MeasurementQuotaReached => Some(EdgeTrigger::MeasurementQuotaReached),
        }
    }
}

/// Pure table lookup; Stopped is absorbing and unmatched pairs stay put.
pub fn step(mode: MissionMode, event: &TransitionEvent, table: &TransitionTable) -> MissionMode {
    if mode == MissionMode::Stopped {
        return MissionMode::Stopped;
    }
    let Some(trigger) = table.trigger_of(event.kind) else {
        return mode;
    };
    for &(from, t, to) in &table.edges {
        if from == mode && t == trigger {
            return to;
        }
    }
    mode
}

/// One row of the mode-change log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeChange {
    pub time: f64,
    pub from: MissionMode,
    pub to: MissionMode,
    pub event: EventKind,
}

/// Replay a timestamp-ordered event trace, returning the final mode and the
/// mode-change log.
pub fn replay(
    start: MissionMode,
    events: &[TransitionEvent],
    table: &TransitionTable,
) -> (MissionMode, Vec<ModeChange>) {
    let mut mode = start;
    let mut log = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for ev in events {
        debug_assert!(ev.time >= last_t, "events must be in timestamp order");
        last_t = ev.time;
        let next = step(mode, ev, table);
        if next != mode {
            log.push(ModeChange {
                time: ev.time,
                from: mode,
                to: next,
                event: ev.kind,
            });
            mode = next;
        }
    }
    (mode, log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(time: f64, kind: EventKind) -> TransitionEvent {
        TransitionEvent { time, kind }
    }

    #[test]
    fn reduced_cpp_to_as() {
        let t = TransitionTable::reduced_model();
        let m = step(
            MissionMode::CppLowBudget,
            &ev(10.0, EventKind::CoveragePassComplete),
            &t,
        );
        assert_eq!(m, MissionMode::ActiveSensing);
    }

    #[test]
    fn reduced_ignores_coverage_event_in_as() {
        let t = TransitionTable::reduced_model();
        let m = step(
            MissionMode::ActiveSensing,
            &ev(20.0, EventKind::CoveragePassComplete),
            &t,
        );
        assert_eq!(m, MissionMode::ActiveSensing);
    }

    #[test]
    fn reduced_quota_stops() {
        let t = TransitionTable::reduced_model();
        let m = step(
            MissionMode::ActiveSensing,
            &ev(900.0, EventKind::MeasurementQuotaReached),
            &t,
        );
        assert_eq!(m, MissionMode::Stopped);
    }

    #[test]
    fn reduced_never_returns_to_cpp() {
        let t = TransitionTable::reduced_model();
        let all = [
            EventKind::CoveragePassComplete,
            EventKind::ContaminantDetected(5),
            EventKind::BudgetExhausted,
            EventKind::NoDetectionsInWindow,
            EventKind::MeasurementQuotaReached,
        ];
        for kind in all {
            let m = step(MissionMode::ActiveSensing, &ev(1.0, kind), &t);
            assert!(
                !matches!(m, MissionMode::CppLowBudget | MissionMode::CppHighBudget),
                "AS left for {kind:?}"
            );
        }
    }

    #[test]
    fn stopped_absorbing() {
        for table in [
            TransitionTable::reduced_model(),
            TransitionTable::general_model(Guards::default()).unwrap(),
        ] {
            let all = [
                EventKind::CoveragePassComplete,
                EventKind::ContaminantDetected(10),
                EventKind::BudgetExhausted,
                EventKind::NoDetectionsInWindow,
                EventKind::MeasurementQuotaReached,
            ];
            for kind in all {
                assert_eq!(
                    step(MissionMode::Stopped, &ev(0.0, kind), &table),
                    MissionMode::Stopped
                );
            }
        }
    }

    #[test]
    fn general_low_to_high_on_silence() {
        let t = TransitionTable::general_model(Guards::default()).unwrap();
        let m = step(
            MissionMode::CppLowBudget,
            &ev(300.0, EventKind::NoDetectionsInWindow),
            &t,
        );
        assert_eq!(m, MissionMode::CppHighBudget);
    }

    #[test]
    fn general_as_back_to_high_cpp() {
        let t = TransitionTable::general_model(Guards::default()).unwrap();
        let m = step(
            MissionMode::ActiveSensing,
            &ev(600.0, EventKind::NoDetectionsInWindow),
            &t,
        );
        assert_eq!(m, MissionMode::CppHighBudget);
    }

    #[test]
    fn detection_guard_respected() {
        let guards = Guards {
            detection_level: 3,
            no_detection_window: 100.0,
        };
        let t = TransitionTable::general_model(guards).unwrap();
        let below = step(
            MissionMode::CppLowBudget,
            &ev(5.0, EventKind::ContaminantDetected(2)),
            &t,
        );
        assert_eq!(below, MissionMode::CppLowBudget);
        let at = step(
            MissionMode::CppLowBudget,
            &ev(6.0, EventKind::ContaminantDetected(3)),
            &t,
        );
        assert_eq!(at, MissionMode::ActiveSensing);
    }

    #[test]
    fn general_rejects_bad_guards() {
        assert!(TransitionTable::general_model(Guards {
            detection_level: 0,
            no_detection_window: 100.0
        })
        .is_err());
        assert!(TransitionTable::general_model(Guards {
            detection_level: 1,
            no_detection_window: 0.0
        })
        .is_err());
    }

    #[test]
    fn replay_happy_path_trace() {
        // Oracle: hand-walked trace through the reduced model.
        let t = TransitionTable::reduced_model();
        let events = vec![
            ev(5.0, EventKind::ContaminantDetected(1)), // ignored in reduced model
            ev(700.0, EventKind::CoveragePassComplete),
            ev(710.0, EventKind::CoveragePassComplete), // ignored, already AS
            ev(1490.0, EventKind::MeasurementQuotaReached),
        ];
        let (final_mode, log) = replay(MissionMode::CppLowBudget, &events, &t);
        assert_eq!(final_mode, MissionMode::Stopped);
        assert_eq!(log.len(), 2);
        assert_eq!(
            (log[0].from, log[0].to, log[0].time),
            (MissionMode::CppLowBudget, MissionMode::ActiveSensing, 700.0)
        );
        assert_eq!(
            (log[1].from, log[1].to, log[1].time),
            (MissionMode::ActiveSensing, MissionMode::Stopped, 1490.0)
        );
    }

    #[test]
    fn replay_is_pure_function_of_trace() {
        let t = TransitionTable::general_model(Guards::default()).unwrap();
        let events = vec![
            ev(300.0, EventKind::NoDetectionsInWindow),
            ev(420.0, EventKind::ContaminantDetected(2)),
            ev(800.0, EventKind::NoDetectionsInWindow),
            ev(950.0, EventKind::ContaminantDetected(1)),
            ev(1400.0, EventKind::MeasurementQuotaReached),
        ];
        let a = replay(MissionMode::CppLowBudget, &events, &t);
        let b = replay(MissionMode::CppLowBudget, &events, &t);
        assert_eq!(a, b);
        assert_eq!(a.0, MissionMode::Stopped);
    }
}
