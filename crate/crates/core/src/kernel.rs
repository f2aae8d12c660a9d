//! Deterministic discrete-event simulation core.
//!
//! Integer-picosecond time, a totally ordered event queue, named single-bit
//! signals and edge-triggered callbacks. Simultaneous events are delivered in
//! insertion (sequence) order — the only tie-break; anything needing physical
//! race semantics models them explicitly on top.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Sub};

use crate::error::Error;
use crate::vcd::VcdWriter;

/// Simulation timestamp in integer picoseconds.
///
/// All delay parameters are integer ps so races are exact and reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn ps(self) -> u64 {
        self.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl Sub<SimTime> for SimTime {
    type Output = u64;
    fn sub(self, rhs: SimTime) -> u64 {
        self.0 - rhs.0
    }
}

/// Handle to a registered signal (net).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignalId(u32);

impl SignalId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Handle returned by [`KernelCore::schedule`]; the global sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventId(pub u64);

/// Edge selector for [`Kernel::on_edge`] subscriptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Rising,
    Falling,
    Any,
}

impl Edge {
    fn matches(self, old: bool, new: bool) -> bool {
        match self {
            Edge::Rising => !old && new,
            Edge::Falling => old && !new,
            Edge::Any => old != new,
        }
    }
}

/// A delivered value change, passed to edge callbacks.
#[derive(Debug, Clone, Copy)]
pub struct Delivery {
    pub signal: SignalId,
    pub value: bool,
    pub time: SimTime,
}

/// Edge callback. Runs synchronously at delivery time with scheduling access;
/// may schedule new events at `time >= now`.
pub type EdgeCallback = Box<dyn FnMut(&mut KernelCore, &Delivery)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct QueuedEvent {
    time: SimTime,
    seq: u64,
    signal: SignalId,
    value: bool,
}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug)]
struct SignalState {
    scope: String,
    name: String,
    value: bool,
    last_transition: SimTime,
    transition_count: u64,
}

/// Scheduling/state half of the kernel, handed to edge callbacks.
///
/// Holds the clock, the queue and all signal state; subscriptions live in the
/// outer [`Kernel`] so callbacks can schedule and read values re-entrantly.
pub struct KernelCore {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    signals: Vec<SignalState>,
    scheduled: u64,
    delivered: u64,
    deliveries_at_now: u64,
    delivery_cap: u64,
    vcd: Option<VcdWriter>,
}

impl KernelCore {
    /// Current simulation time.
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Current value of a signal.
    pub fn value(&self, id: SignalId) -> bool {
        self.signals[id.index()].value
    }

    /// Time of the signal's last actual transition.
    pub fn last_transition(&self, id: SignalId) -> SimTime {
        self.signals[id.index()].last_transition
    }

    /// Number of actual value changes delivered on this signal.
    pub fn transition_count(&self, id: SignalId) -> u64 {
        self.signals[id.index()].transition_count
    }

    /// Full hierarchical name, `scope.name`.
    pub fn signal_name(&self, id: SignalId) -> String {
        let s = &self.signals[id.index()];
        format!("{}.{}", s.scope, s.name)
    }

    /// Enqueue a value change on `signal` at time `at`.
    ///
    /// Scheduling in the past is rejected; scheduling at the current time is
    /// permitted (delta-cycle style) and gets a fresh sequence number.
    pub fn schedule(
        &mut self,
        signal: SignalId,
        value: bool,
        at: SimTime,
    ) -> Result<EventId, Error> {
        if at < self.now {
            return Err(Error::TimeViolation { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.scheduled += 1;
        self.queue.push(Reverse(QueuedEvent {
            time: at,
            seq,
            signal,
            value,
        }));
        Ok(EventId(seq))
    }

    /// Total events scheduled so far.
    pub fn scheduled_count(&self) -> u64 {
        self.scheduled
    }

    /// Total events delivered so far.
    pub fn delivered_count(&self) -> u64 {
        self.delivered
    }

    /// Sum of transition counts over all signals whose scope equals `scope`.
    pub fn scope_transitions(&self, scope: &str) -> u64 {
        self.signals
            .iter()
            .filter(|s| s.scope == scope)
            .map(|s| s.transition_count)
            .sum()
    }

    /// Scope names in first-registration order.
    pub fn scopes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.signals {
            if !out.iter().any(|x| x == &s.scope) {
                out.push(s.scope.clone());
            }
        }
        out
    }
}

/// The discrete-event kernel: [`KernelCore`] plus the subscription table.
///
/// Single-threaded; independent instances may run in parallel across samples.
pub struct Kernel {
    core: KernelCore,
    subs: Vec<Vec<(Edge, EdgeCallback)>>,
}

impl Default for Kernel {
    fn default() -> Self {
        Self::new()
    }
}

impl Kernel {
    pub fn new() -> Self {
        Kernel {
            core: KernelCore {
                now: SimTime::ZERO,
                next_seq: 0,
                queue: BinaryHeap::new(),
                signals: Vec::new(),
                scheduled: 0,
                delivered: 0,
                deliveries_at_now: 0,
                delivery_cap: 1_000_000,
                vcd: None,
            },
            subs: Vec::new(),
        }
    }

    /// Register a signal under `scope`, initialised to 0.
    pub fn add_signal(&mut self, scope: &str, name: &str) -> SignalId {
        let id = SignalId(self.core.signals.len() as u32);
        self.core.signals.push(SignalState {
            scope: scope.to_string(),
            name: name.to_string(),
            value: false,
            last_transition: SimTime::ZERO,
            transition_count: 0,
        });
        self.subs.push(Vec::new());
        id
    }

    /// Subscribe `callback` to `edge` transitions of `signal`.
    ///
    /// Callbacks on one signal run in registration order. A no-change
    /// delivery (scheduled value equals current) invokes nothing.
    pub fn on_edge(
        &mut self,
        signal: SignalId,
        edge: Edge,
        callback: impl FnMut(&mut KernelCore, &Delivery) + 'static,
    ) {
        self.subs[signal.index()].push((edge, Box::new(callback)));
    }

    /// Set the per-timestamp delivery cap used to detect zero-delay loops.
    pub fn set_delivery_cap(&mut self, cap: u64) {
        self.core.delivery_cap = cap;
    }

    /// Start VCD recording. Call after all signals are registered: the header
    /// lists every signal, identifiers in registration order, and dumps the
    /// current values.
    pub fn enable_vcd(&mut self) {
        let mut w = VcdWriter::new();
        let sigs: Vec<(&str, &str)> = self
            .core
            .signals
            .iter()
            .map(|s| (s.scope.as_str(), s.name.as_str()))
            .collect();
        w.write_header(&sigs);
        let init: Vec<bool> = self.core.signals.iter().map(|s| s.value).collect();
        w.write_dumpvars(&init);
        self.core.vcd = Some(w);
    }

    /// Finish recording and return the VCD bytes, if recording was enabled.
    pub fn take_vcd(&mut self) -> Option<Vec<u8>> {
        self.core.vcd.take().map(|w| w.into_bytes())
    }

    pub fn core(&self) -> &KernelCore {
        &self.core
    }

    pub fn core_mut(&mut self) -> &mut KernelCore {
        &mut self.core
    }

    /// Convenience passthrough to [`KernelCore::schedule`].
    pub fn schedule(
        &mut self,
        signal: SignalId,
        value: bool,
        at: SimTime,
    ) -> Result<EventId, Error> {
        self.core.schedule(signal, value, at)
    }

    /// Deliver every event with `time <= deadline` in (time, seq) order.
    ///
    /// Returns the number of delivered events. Simulation time ends at the
    /// last delivered event (unchanged if nothing was delivered).
    pub fn run_until(&mut self, deadline: SimTime) -> Result<u64, Error> {
        let mut count = 0u64;
        while let Some(Reverse(ev)) = self.core.queue.peek().copied() {
            if ev.time > deadline {
                break;
            }
            self.core.queue.pop();
            if ev.time > self.core.now {
                self.core.now = ev.time;
                self.core.deliveries_at_now = 0;
            }
            self.core.deliveries_at_now += 1;
            if self.core.deliveries_at_now > self.core.delivery_cap {
                return Err(Error::TimeLoop {
                    at: self.core.now,
                    cap: self.core.delivery_cap,
                });
            }
            self.core.delivered += 1;
            count += 1;

            let idx = ev.signal.index();
            let old = self.core.signals[idx].value;
            if ev.value != old {
                {
                    let st = &mut self.core.signals[idx];
                    st.value = ev.value;
                    st.last_transition = ev.time;
                    st.transition_count += 1;
                }
                if let Some(vcd) = self.core.vcd.as_mut() {
                    vcd.change(ev.time.ps(), idx, ev.value);
                }
                let delivery = Delivery {
                    signal: ev.signal,
                    value: ev.value,
                    time: ev.time,
                };
                // Split borrow: callbacks live in `subs`, state in `core`.
                let core = &mut self.core;
                for (edge, cb) in self.subs[idx].iter_mut() {
                    if edge.matches(old, ev.value) {
                        cb(core, &delivery);
                    }
                }
            }
        }
        Ok(count)
    }

    /// Drain the queue completely.
    pub fn run_to_completion(&mut self) -> Result<u64, Error> {
        self.run_until(SimTime(u64::MAX))
    }

    /// True if events remain queued.
    pub fn has_pending(&self) -> bool {
        !self.core.queue.is_empty()
    }
}
