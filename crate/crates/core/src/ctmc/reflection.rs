//! Replay of a recorded scheme B run through its Poisson-driver representation.
//!
//! Each logged event is attributed to one of four unit-rate drivers:
//! arrivals `N₁`, acceptances `N₂`, and feedback `N₃` (while `Y < 0`) or
//! `N₄` (while `Y > 0`). The free process
//!
//! ```text
//! Z(t) = X(0) + γN₁ − γN₂ + N₃ − N₄
//! ```
//!
//! is reflected at zero, `X(t) = Z(t) + (−min_{s≤t} Z(s)) ∨ 0`. The result
//! must coincide with the directly simulated `X`, whose truncation rules
//! (`−(γ ∧ X)` on acceptance, no change on a downward feedback at `X = 0`)
//! never look at `Z`.

use thiserror::Error;

use super::{EventKind, EventRecord, SystemState};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReflectionError {
    #[error("event {index}: {reason}")]
    DriverMismatch { index: usize, reason: String },
}

/// Reconstructs `X` after every event (the first entry is `X(0)`).
///
/// `gamma` is the integer jump size. The `Y` path is taken from the `dy`
/// fields and must agree with the driver attribution of each event.
pub fn reflect_representation(
    initial: &SystemState,
    events: &[EventRecord],
    gamma: i64,
) -> Result<Vec<i64>, ReflectionError> {
    let mut y = initial.y;
    let mut z = initial.x;
    let mut running_min = initial.x;
    let mut path = Vec::with_capacity(events.len() + 1);
    let mut x = initial.x;
    path.push(x);

    for (index, e) in events.iter().enumerate() {
        let mismatch = |reason: String| ReflectionError::DriverMismatch { index, reason };
        let (expected_dy, dz) = match e.kind {
            EventKind::Arrival => (-1, gamma),
            EventKind::Acceptance => {
                if x <= 0 {
                    return Err(mismatch("acceptance with no pending invitations".into()));
                }
                (1, -gamma)
            }
            EventKind::FeedbackUp => {
                if y >= 0 {
                    return Err(mismatch(format!("upward feedback at Y = {y}")));
                }
                (0, 1)
            }
            EventKind::FeedbackDown => {
                if y <= 0 {
                    return Err(mismatch(format!("downward feedback at Y = {y}")));
                }
                (0, -1)
            }
            EventKind::Rejection => return Err(mismatch("rejections have no driver in scheme B".into())),
        };
        if e.dy != expected_dy {
            return Err(mismatch(format!("{:?} changes Y by {}, not {}", e.kind, e.dy, expected_dy)));
        }
        y += e.dy;
        z += dz;
        running_min = running_min.min(z);
        x = z + (-running_min).max(0);
        path.push(x);
    }
    Ok(path)
}

/// One-event reflection `max(x + dz, 0)`, the incremental form of the map.
pub fn reflect_step(x: i64, dz: i64) -> i64 {
    (x + dz).max(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(kind: EventKind, dy: i64) -> EventRecord {
        EventRecord { t: 1.0, kind, dy, dx: 0 }
    }

    #[test]
    fn boundary_acceptance_matches_truncation() {
        let initial = SystemState::b(0, 2);
        let path = reflect_representation(&initial, &[event(EventKind::Acceptance, 1)], 3).unwrap();
        assert_eq!(path, vec![2, 0]);
        assert_eq!(2 - 3.min(2), 0);
        assert_eq!(reflect_step(2, -3), 0);
    }

    #[test]
    fn interior_acceptance() {
        let initial = SystemState::b(0, 5);
        let path = reflect_representation(&initial, &[event(EventKind::Acceptance, 1)], 2).unwrap();
        assert_eq!(path, vec![5, 3]);
    }

    #[test]
    fn reflection_remembers_the_running_minimum() {
        // X: 1 -(acc γ=3)-> 0 -(feedback down)-> 0 -(arrival)-> 3
        let initial = SystemState::b(1, 1);
        let events = [
            event(EventKind::Acceptance, 1),
            event(EventKind::FeedbackDown, 0),
            event(EventKind::Arrival, -1),
        ];
        assert_eq!(reflect_representation(&initial, &events, 3).unwrap(), vec![1, 0, 0, 3]);
    }

    #[test]
    fn inconsistent_drivers_are_rejected() {
        let initial = SystemState::b(0, 4);
        let err = reflect_representation(&initial, &[event(EventKind::Arrival, 1)], 2).unwrap_err();
        assert!(matches!(err, ReflectionError::DriverMismatch { index: 0, .. }));
        let err = reflect_representation(&initial, &[event(EventKind::FeedbackUp, 0)], 2).unwrap_err();
        assert!(matches!(err, ReflectionError::DriverMismatch { .. }));
        let empty = SystemState::b(0, 0);
        assert!(reflect_representation(&empty, &[event(EventKind::Acceptance, 1)], 2).is_err());
    }
}
