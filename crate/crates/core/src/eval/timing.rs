use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub label: String,
    pub wall_seconds: f64,
}

/// Runs `action` under a monotonic clock. On failure the error is wrapped in
/// [`Error::Timed`] so the elapsed time is not lost.
pub fn time_execution<T, F>(label: &str, action: F) -> Result<(T, TimingRecord)>
where
    F: FnOnce() -> Result<T>,
{
    let start = Instant::now();
    let outcome = action();
    let wall_seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(v) => Ok((
            v,
            TimingRecord {
                label: label.to_string(),
                wall_seconds,
            },
        )),
        Err(e) => Err(Error::Timed {
            label: label.to_string(),
            seconds: wall_seconds,
            source: Box::new(e),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn noop_is_fast() {
        let ((), rec) = time_execution("noop", || Ok(())).unwrap();
        assert!(rec.wall_seconds >= 0.0 && rec.wall_seconds < 0.1);
        assert_eq!(rec.label, "noop");
    }

    #[test]
    fn sleep_is_measured() {
        let (v, rec) = time_execution("sleep", || {
            std::thread::sleep(Duration::from_millis(50));
            Ok(7)
        })
        .unwrap();
        assert_eq!(v, 7);
        assert!(
            (0.05..=0.5).contains(&rec.wall_seconds),
            "{}",
            rec.wall_seconds
        );
    }

    #[test]
    fn failure_keeps_elapsed_time() {
        let err = time_execution::<(), _>("fit", || {
            std::thread::sleep(Duration::from_millis(5));
            Err(Error::Precondition("bad".into()))
        })
        .unwrap_err();
        match err {
            Error::Timed {
                label,
                seconds,
                source,
            } => {
                assert_eq!(label, "fit");
                assert!(seconds >= 0.005);
                assert!(matches!(*source, Error::Precondition(_)));
            }
            other => panic!("{other:?}"),
        }
    }
}
