use std::panic::{self, AssertUnwindSafe};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::{self, Scope};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::predictors::{PredictionRecord, PredictionRequest, Predictor, PredictorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    /// Ticks advance immediately; every invocation runs to completion and is
    /// declared a timeout afterwards if it took longer than the deadline.
    #[default]
    Virtual,
    /// Ticks are paced at `delta_t` of wall-clock time and late results are
    /// abandoned.
    Realtime,
}

impl std::str::FromStr for TimeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "virtual" => Ok(Self::Virtual),
            "realtime" | "real_time" => Ok(Self::Realtime),
            other => Err(format!("unknown time mode `{other}` (virtual, realtime)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Deadlined<T> {
    Completed { value: T, elapsed: Duration },
    TimedOut { elapsed: Duration },
}

impl<T> Deadlined<T> {
    pub fn is_timeout(&self) -> bool {
        matches!(self, Deadlined::TimedOut { .. })
    }

    pub fn elapsed(&self) -> Duration {
        match self {
            Deadlined::Completed { elapsed, .. } | Deadlined::TimedOut { elapsed } => *elapsed,
        }
    }
}

fn classify<T>(value: T, elapsed: Duration, deadline: Duration) -> Deadlined<T> {
    if elapsed > deadline {
        Deadlined::TimedOut { elapsed }
    } else {
        Deadlined::Completed { value, elapsed }
    }
}

/// Runs a one-off invocation under a deadline.
///
/// In realtime mode the invocation runs on its own thread and is abandoned
/// once the deadline passes; its result is dropped whenever it arrives.
pub fn enforce_deadline<T, F>(invocation: F, deadline: Duration, mode: TimeMode) -> Deadlined<T>
where
    T: Send + 'static,
    F: FnOnce() -> T + Send + 'static,
{
    let start = Instant::now();
    match mode {
        TimeMode::Virtual => {
            let value = invocation();
            classify(value, start.elapsed(), deadline)
        }
        TimeMode::Realtime => {
            let (tx, rx) = mpsc::channel();
            thread::spawn(move || {
                let _ = tx.send(invocation());
            });
            match rx.recv_timeout(deadline) {
                Ok(value) => classify(value, start.elapsed(), deadline),
                Err(_) => Deadlined::TimedOut {
                    elapsed: start.elapsed(),
                },
            }
        }
    }
}

pub(crate) type Invocation = Result<Vec<PredictionRecord>, PredictorError>;

pub(crate) fn call_guarded(predictor: &mut dyn Predictor, request: &PredictionRequest) -> Invocation {
    panic::catch_unwind(AssertUnwindSafe(|| predictor.predict(request))).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".to_owned());
        Err(PredictorError::Fatal(format!("predictor panicked: {msg}")))
    })
}

/// Invokes a predictor for the replay engine, inline or on a worker thread.
///
/// The worker owns the predictor for the duration of a scene. When it falls
/// behind it only runs the newest queued request; results for abandoned
/// requests are discarded by sequence number.
pub(crate) enum PredictorRunner<'scope, 'p> {
    Inline {
        predictor: &'p mut dyn Predictor,
        mode: TimeMode,
    },
    Worker {
        jobs: Option<Sender<(u64, PredictionRequest)>>,
        results: Receiver<(u64, Invocation, Duration)>,
        next_seq: u64,
        _scope: std::marker::PhantomData<&'scope ()>,
    },
}

impl<'scope, 'p: 'scope> PredictorRunner<'scope, 'p> {
    pub(crate) fn new<'env>(
        scope: &'scope Scope<'scope, 'env>,
        predictor: &'p mut dyn Predictor,
        mode: TimeMode,
    ) -> Self {
        if mode == TimeMode::Virtual || predictor.enforces_deadline() {
            return PredictorRunner::Inline { predictor, mode };
        }
        let (job_tx, job_rx) = mpsc::channel::<(u64, PredictionRequest)>();
        let (res_tx, res_rx) = mpsc::channel();
        scope.spawn(move || {
            while let Ok(mut job) = job_rx.recv() {
                while let Ok(newer) = job_rx.try_recv() {
                    job = newer;
                }
                let start = Instant::now();
                let out = call_guarded(predictor, &job.1);
                if res_tx.send((job.0, out, start.elapsed())).is_err() {
                    break;
                }
            }
        });
        PredictorRunner::Worker {
            jobs: Some(job_tx),
            results: res_rx,
            next_seq: 0,
            _scope: std::marker::PhantomData,
        }
    }

    pub(crate) fn invoke(&mut self, request: PredictionRequest) -> Deadlined<Invocation> {
        let deadline = request.deadline;
        match self {
            PredictorRunner::Inline { predictor, mode } => {
                let start = Instant::now();
                let out = call_guarded(&mut **predictor, &request);
                let elapsed = start.elapsed();
                match out {
                    Err(PredictorError::Timeout) => Deadlined::TimedOut { elapsed },
                    // Self-timed predictors in realtime mode already enforced
                    // the deadline; their elapsed time is advisory.
                    out if *mode == TimeMode::Realtime => Deadlined::Completed { value: out, elapsed },
                    out => classify(out, elapsed, deadline),
                }
            }
            PredictorRunner::Worker {
                jobs,
                results,
                next_seq,
                ..
            } => {
                let seq = *next_seq;
                *next_seq += 1;
                let start = Instant::now();
                let Some(tx) = jobs.as_ref() else {
                    return Deadlined::TimedOut { elapsed: Duration::ZERO };
                };
                if tx.send((seq, request)).is_err() {
                    return Deadlined::Completed {
                        value: Err(PredictorError::Fatal("predictor worker exited".into())),
                        elapsed: start.elapsed(),
                    };
                }
                loop {
                    let remaining = deadline.saturating_sub(start.elapsed());
                    match results.recv_timeout(remaining) {
                        Ok((s, out, elapsed)) if s == seq => {
                            return match out {
                                Err(PredictorError::Timeout) => Deadlined::TimedOut { elapsed },
                                out => classify(out, elapsed.min(start.elapsed()), deadline),
                            };
                        }
                        Ok(_) => continue,
                        Err(RecvTimeoutError::Timeout) => {
                            return Deadlined::TimedOut {
                                elapsed: start.elapsed(),
                            }
                        }
                        Err(RecvTimeoutError::Disconnected) => {
                            return Deadlined::Completed {
                                value: Err(PredictorError::Fatal("predictor worker exited".into())),
                                elapsed: start.elapsed(),
                            }
                        }
                    }
                }
            }
        }
    }

    /// Stops the worker; the scope still waits for an in-flight invocation.
    pub(crate) fn shutdown(&mut self) {
        if let PredictorRunner::Worker { jobs, .. } = self {
            jobs.take();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instant_never_times_out() {
        for mode in [TimeMode::Virtual, TimeMode::Realtime] {
            let out = enforce_deadline(|| 7, Duration::from_millis(200), mode);
            assert!(matches!(out, Deadlined::Completed { value: 7, .. }));
        }
    }

    #[test]
    fn virtual_mode_flags_after_completion() {
        let deadline = Duration::from_millis(50);
        let out = enforce_deadline(
            move || {
                thread::sleep(2 * deadline);
                1
            },
            deadline,
            TimeMode::Virtual,
        );
        assert!(out.is_timeout());
        assert!(out.elapsed() >= 2 * deadline);
    }

    #[test]
    fn realtime_mode_abandons_late_result() {
        let deadline = Duration::from_millis(200);
        let start = Instant::now();
        let out = enforce_deadline(
            move || {
                thread::sleep(2 * deadline);
                1
            },
            deadline,
            TimeMode::Realtime,
        );
        let wall = start.elapsed();
        assert!(out.is_timeout());
        assert!(wall < deadline + Duration::from_millis(100), "took {wall:?}");
    }

    #[test]
    fn parses_modes() {
        assert_eq!("virtual".parse::<TimeMode>(), Ok(TimeMode::Virtual));
        assert_eq!("realtime".parse::<TimeMode>(), Ok(TimeMode::Realtime));
        assert!("fast".parse::<TimeMode>().is_err());
    }
}
