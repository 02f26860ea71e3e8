//! Simulated message-passing ranks.
//!
//! Each rank runs as a scoped thread and talks to the others only through a
//! shared mailbox keyed by `(source, destination, tag)`, delivered in send
//! order. The group can run ranks freely in parallel or hand a single baton
//! around so exactly one rank executes at a time, in rank order or in a
//! seeded shuffled order. Every reduction accumulates in ascending rank order,
//! so results do not depend on the schedule.

mod kernels;

pub use kernels::{bbd_apply, bbd_factor, bj_apply, dist_spmv, BbdFactors, DistVector};

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Condvar, Mutex, MutexGuard};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::{Error, Scalar};

pub type Tag = u32;

pub const TAG_ALLREDUCE: Tag = 1;
pub const TAG_REDUCE: Tag = 2;
pub const TAG_BROADCAST: Tag = 3;
pub const TAG_HALO: Tag = 10;
pub const TAG_SCHUR: Tag = 20;
pub const TAG_GATHER: Tag = 21;
pub const TAG_SOLUTION: Tag = 22;

const DEFAULT_STEP_BUDGET: usize = 50_000_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("rank {rank} out of range for a group of {nranks}")]
    InvalidRank { rank: usize, nranks: usize },
    #[error("deadlock: every live rank is blocked ({blocked:?} as (rank, source, tag))")]
    Deadlock { blocked: Vec<(usize, usize, Tag)> },
    #[error("step budget of {0} transport operations exceeded")]
    StepBudgetExceeded(usize),
    #[error("expected {expected} ranks, found {found}")]
    RankCountMismatch { expected: usize, found: usize },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("rank {0} aborted because another rank failed")]
    Aborted(usize),
    #[error("group needs at least one rank")]
    EmptyGroup,
}

/// Order in which ranks execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// All ranks run concurrently.
    #[default]
    Threaded,
    /// One rank at a time; the baton moves to the next runnable rank in
    /// ascending cyclic order whenever the holder blocks or finishes.
    Serial,
    /// One rank at a time; the next runnable rank is drawn from a seeded
    /// shuffle at every hand-off.
    Shuffled(u64),
}

/// One point-to-point message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TraceEvent {
    /// Sender-local sequence number.
    pub step: usize,
    pub src: usize,
    pub dst: usize,
    pub tag: Tag,
    pub bytes: usize,
}

#[derive(Debug, Default)]
struct GroupLog {
    seq: Vec<usize>,
    events: Vec<TraceEvent>,
    messages: usize,
    bytes: usize,
}

/// A fixed set of ranks plus its transport statistics.
#[derive(Debug)]
pub struct RankGroup {
    nranks: usize,
    schedule: Schedule,
    trace_enabled: bool,
    step_budget: usize,
    log: Mutex<GroupLog>,
}

impl RankGroup {
    pub fn new(nranks: usize) -> Result<Self, RuntimeError> {
        if nranks == 0 {
            return Err(RuntimeError::EmptyGroup);
        }
        Ok(Self {
            nranks,
            schedule: Schedule::Threaded,
            trace_enabled: false,
            step_budget: DEFAULT_STEP_BUDGET,
            log: Mutex::new(GroupLog {
                seq: vec![0; nranks],
                ..Default::default()
            }),
        })
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_trace(mut self, enabled: bool) -> Self {
        self.trace_enabled = enabled;
        self
    }

    /// Transport operations allowed per [`RankGroup::run`] before the
    /// watchdog aborts it.
    pub fn with_step_budget(mut self, budget: usize) -> Self {
        self.step_budget = budget;
        self
    }

    pub fn nranks(&self) -> usize {
        self.nranks
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    fn log(&self) -> MutexGuard<'_, GroupLog> {
        self.log.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Messages sent since creation or the last reset.
    pub fn message_count(&self) -> usize {
        self.log().messages
    }

    pub fn bytes_sent(&self) -> usize {
        self.log().bytes
    }

    /// Recorded messages sorted by `(step, src, dst, tag)`.
    pub fn trace(&self) -> Vec<TraceEvent> {
        let mut ev = self.log().events.clone();
        ev.sort();
        ev
    }

    pub fn reset_stats(&self) {
        let mut log = self.log();
        *log = GroupLog {
            seq: vec![0; self.nranks],
            ..Default::default()
        };
    }

    /// Trace as text, one `step src dst tag bytes` line per message.
    pub fn format_trace(&self) -> String {
        let mut out = String::new();
        for e in self.trace() {
            let _ = writeln!(out, "{} {} {} {} {}", e.step, e.src, e.dst, e.tag, e.bytes);
        }
        out
    }

    pub fn write_trace<P: AsRef<Path>>(&self, path: P) -> std::io::Result<()> {
        std::fs::write(path, self.format_trace())
    }

    /// Runs `f` once per rank and returns the per-rank results in rank
    /// order. If any rank fails, the error of the lowest failing rank is
    /// returned, preferring root causes over the aborts they trigger.
    pub fn run<T, R, F>(&self, f: F) -> Result<Vec<R>, Error>
    where
        T: Scalar,
        R: Send,
        F: Fn(&Comm<'_, T>) -> Result<R, Error> + Sync,
    {
        let n = self.nranks;
        let seq = self.log().seq.clone();
        let first = match self.schedule {
            Schedule::Threaded => None,
            Schedule::Serial => Some(0),
            Schedule::Shuffled(_) => Some(0),
        };
        let mut rng = match self.schedule {
            Schedule::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed ^ self.log().messages as u64)),
            _ => None,
        };
        let first = match (first, rng.as_mut()) {
            (Some(_), Some(r)) => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(r);
                Some(order[0])
            }
            (f, _) => f,
        };
        let shared = Shared {
            state: Mutex::new(State {
                mailboxes: HashMap::new(),
                waiting: vec![None; n],
                done: vec![false; n],
                baton: first,
                ops: 0,
                seq,
                events: Vec::new(),
                messages: 0,
                bytes: 0,
                failed: None,
                rng,
            }),
            cv: Condvar::new(),
            nranks: n,
            serialized: self.schedule != Schedule::Threaded,
            trace: self.trace_enabled,
            budget: self.step_budget,
        };
        let results: Vec<Result<R, Error>> = if n == 1 {
            vec![shared.run_rank(0, &f)]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..n)
                    .map(|rank| {
                        let shared = &shared;
                        let f = &f;
                        scope.spawn(move || shared.run_rank(rank, f))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
                    .collect()
            })
        };
        let st = shared.state.into_inner().unwrap_or_else(|e| e.into_inner());
        {
            let mut log = self.log();
            log.seq = st.seq;
            log.messages += st.messages;
            log.bytes += st.bytes;
            log.events.extend(st.events);
        }
        let mut out = Vec::with_capacity(n);
        let mut first_runtime: Option<Error> = None;
        let mut first_cause: Option<Error> = None;
        for r in results {
            match r {
                Ok(v) => out.push(v),
                Err(Error::Runtime(e)) => {
                    first_runtime.get_or_insert(Error::Runtime(e));
                }
                Err(e) => {
                    first_cause.get_or_insert(e);
                }
            }
        }
        match first_cause.or(first_runtime) {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

struct State<T> {
    mailboxes: HashMap<(usize, usize, Tag), VecDeque<Vec<T>>>,
    waiting: Vec<Option<(usize, Tag)>>,
    done: Vec<bool>,
    baton: Option<usize>,
    ops: usize,
    seq: Vec<usize>,
    events: Vec<TraceEvent>,
    messages: usize,
    bytes: usize,
    failed: Option<RuntimeError>,
    rng: Option<ChaCha8Rng>,
}

impl<T> State<T> {
    fn available(&self, src: usize, dst: usize, tag: Tag) -> bool {
        self.mailboxes.get(&(src, dst, tag)).is_some_and(|q| !q.is_empty())
    }

    fn runnable(&self, r: usize) -> bool {
        !self.done[r]
            && match self.waiting[r] {
                None => true,
                Some((src, tag)) => self.available(src, r, tag),
            }
    }

    fn blocked(&self) -> Vec<(usize, usize, Tag)> {
        (0..self.done.len())
            .filter_map(|r| self.waiting[r].filter(|_| !self.done[r]).map(|(s, t)| (r, s, t)))
            .collect()
    }

    fn deadlocked(&self) -> bool {
        let live = (0..self.done.len()).filter(|&r| !self.done[r]).count();
        live > 0 && (0..self.done.len()).all(|r| self.done[r] || (self.waiting[r].is_some() && !self.runnable(r)))
    }

    /// Moves the baton off `from` to the next runnable rank.
    fn pass_baton(&mut self, from: usize) {
        let n = self.done.len();
        let order: Vec<usize> = match self.rng.as_mut() {
            Some(rng) => {
                let mut o: Vec<usize> = (0..n).collect();
                o.shuffle(rng);
                o
            }
            None => (1..=n).map(|k| (from + k) % n).collect(),
        };
        match order.into_iter().find(|&r| self.runnable(r)) {
            Some(r) => self.baton = Some(r),
            None => {
                self.baton = None;
                if self.done.iter().any(|d| !d) && self.failed.is_none() {
                    self.failed = Some(RuntimeError::Deadlock {
                        blocked: self.blocked(),
                    });
                }
            }
        }
    }
}

struct Shared<T> {
    state: Mutex<State<T>>,
    cv: Condvar,
    nranks: usize,
    serialized: bool,
    trace: bool,
    budget: usize,
}

impl<T: Scalar> Shared<T> {
    fn lock(&self) -> MutexGuard<'_, State<T>> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn wait<'a>(&self, g: MutexGuard<'a, State<T>>) -> MutexGuard<'a, State<T>> {
        self.cv.wait(g).unwrap_or_else(|e| e.into_inner())
    }

    fn run_rank<R, F>(&self, rank: usize, f: &F) -> Result<R, Error>
    where
        F: Fn(&Comm<'_, T>) -> Result<R, Error>,
    {
        if self.serialized {
            let mut st = self.lock();
            while st.baton != Some(rank) && st.failed.is_none() {
                st = self.wait(st);
            }
            if st.failed.is_some() {
                st.done[rank] = true;
                self.cv.notify_all();
                return Err(RuntimeError::Aborted(rank).into());
            }
        }
        let comm = Comm { rank, shared: self };
        let out = f(&comm);
        let mut st = self.lock();
        st.done[rank] = true;
        st.waiting[rank] = None;
        if self.serialized {
            if st.baton == Some(rank) {
                st.pass_baton(rank);
            }
        } else if st.deadlocked() && st.failed.is_none() {
            st.failed = Some(RuntimeError::Deadlock { blocked: st.blocked() });
        }
        self.cv.notify_all();
        out
    }

    fn tick(&self, st: &mut State<T>) -> Result<(), RuntimeError> {
        st.ops += 1;
        if st.ops > self.budget {
            let e = RuntimeError::StepBudgetExceeded(self.budget);
            st.failed.get_or_insert(e.clone());
            self.cv.notify_all();
            return Err(e);
        }
        Ok(())
    }
}

/// Per-rank handle to the transport.
pub struct Comm<'a, T> {
    rank: usize,
    shared: &'a Shared<T>,
}

impl<T: Scalar> Comm<'_, T> {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nranks(&self) -> usize {
        self.shared.nranks
    }

    fn check_rank(&self, r: usize) -> Result<(), RuntimeError> {
        if r >= self.shared.nranks {
            return Err(RuntimeError::InvalidRank {
                rank: r,
                nranks: self.shared.nranks,
            });
        }
        Ok(())
    }

    /// Non-blocking send.
    pub fn send(&self, dst: usize, tag: Tag, payload: Vec<T>) -> Result<(), RuntimeError> {
        self.check_rank(dst)?;
        let mut st = self.shared.lock();
        if let Some(e) = &st.failed {
            return Err(e.clone());
        }
        self.shared.tick(&mut st)?;
        let bytes = payload.len() * T::wire_bytes();
        let step = st.seq[self.rank];
        st.seq[self.rank] += 1;
        st.messages += 1;
        st.bytes += bytes;
        if self.shared.trace {
            st.events.push(TraceEvent {
                step,
                src: self.rank,
                dst,
                tag,
                bytes,
            });
        }
        st.mailboxes
            .entry((self.rank, dst, tag))
            .or_default()
            .push_back(payload);
        self.shared.cv.notify_all();
        Ok(())
    }

    /// Blocks until the oldest message from `src` with `tag` arrives.
    pub fn recv(&self, src: usize, tag: Tag) -> Result<Vec<T>, RuntimeError> {
        self.check_rank(src)?;
        let me = self.rank;
        let mut st = self.shared.lock();
        self.shared.tick(&mut st)?;
        loop {
            if let Some(e) = &st.failed {
                return Err(e.clone());
            }
            if let Some(msg) = st.mailboxes.get_mut(&(src, me, tag)).and_then(|q| q.pop_front()) {
                st.waiting[me] = None;
                return Ok(msg);
            }
            st.waiting[me] = Some((src, tag));
            if self.shared.serialized {
                st.pass_baton(me);
                self.shared.cv.notify_all();
                while st.baton != Some(me) && st.failed.is_none() {
                    st = self.shared.wait(st);
                }
            } else {
                if st.deadlocked() {
                    let e = RuntimeError::Deadlock { blocked: st.blocked() };
                    st.failed = Some(e.clone());
                    self.shared.cv.notify_all();
                    return Err(e);
                }
                st = self.shared.wait(st);
            }
        }
    }

    /// Sum over ranks, accumulated at rank 0 in ascending rank order and
    /// returned to everyone.
    pub fn allreduce_sum(&self, local: T) -> Result<T, RuntimeError> {
        let n = self.nranks();
        if self.rank == 0 {
            let mut acc = local;
            for src in 1..n {
                acc += self.recv(src, TAG_ALLREDUCE)?[0];
            }
            for dst in 1..n {
                self.send(dst, TAG_ALLREDUCE, vec![acc])?;
            }
            Ok(acc)
        } else {
            self.send(0, TAG_ALLREDUCE, vec![local])?;
            Ok(self.recv(0, TAG_ALLREDUCE)?[0])
        }
    }

    /// Elementwise sum of equal-length vectors, available only at rank 0.
    pub fn reduce_to_root(&self, local: Vec<T>) -> Result<Option<Vec<T>>, RuntimeError> {
        if self.rank != 0 {
            self.send(0, TAG_REDUCE, local)?;
            return Ok(None);
        }
        let mut acc = local;
        for src in 1..self.nranks() {
            let part = self.recv(src, TAG_REDUCE)?;
            if part.len() != acc.len() {
                return Err(RuntimeError::LayoutMismatch(format!(
                    "reduce: rank {src} sent {} values, expected {}",
                    part.len(),
                    acc.len()
                )));
            }
            for (a, p) in acc.iter_mut().zip(part) {
                *a += p;
            }
        }
        Ok(Some(acc))
    }

    /// Replicates rank 0's payload; other ranks pass `None`.
    pub fn broadcast(&self, payload: Option<Vec<T>>) -> Result<Vec<T>, RuntimeError> {
        if self.rank == 0 {
            let data = payload.unwrap_or_default();
            for dst in 1..self.nranks() {
                self.send(dst, TAG_BROADCAST, data.clone())?;
            }
            Ok(data)
        } else {
            self.recv(0, TAG_BROADCAST)
        }
    }
}
