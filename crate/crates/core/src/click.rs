//! Two-phase bundled-data handshake machinery.
//!
//! A click-element stage fires when a new request phase arrives and the
//! downstream acknowledge phase has caught up:
//! `fire = (req_in ^ phase_in) & !(ack_in ^ phase_out)`. The fire pulse
//! toggles both phases after `fire_to_phase_delay`, which clears the fire
//! condition (self-resetting pulse). Request transitions reach the next stage
//! through the bundled-data matched delay, so registered datapath work must
//! finish within `stage_forward_delay`; the builder rejects anything else.
//!
//! Tokens latched at each stage carry opaque ids for FIFO and conservation
//! checking; a protocol monitor flags request transitions that arrive while a
//! fire is pending or that cancel an unabsorbed token.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::rc::Rc;

use crate::error::Error;
use crate::kernel::{Delivery, Edge, Kernel, KernelCore, SignalId, SimTime};

/// The click-element fire condition, purely combinational.
pub fn click_fire(req_in: bool, phase_in: bool, ack_in: bool, phase_out: bool) -> bool {
    (req_in ^ phase_in) && !(ack_in ^ phase_out)
}

/// Two-input Muller C-element: follows the inputs when they agree, holds
/// otherwise.
pub fn c_element(a: bool, b: bool, c_prev: bool) -> bool {
    if a == b {
        a
    } else {
        c_prev
    }
}

/// Timing and behaviour of the pipeline and its environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    pub stages: usize,
    /// Matched request-path delay per stage.
    pub stage_forward_delay: u64,
    /// Fire edge to phase toggle.
    pub fire_to_phase_delay: u64,
    /// Registered datapath latency per stage; each must fit inside the
    /// matched delay.
    pub datapath_delays: Vec<u64>,
    /// Source settle time between acknowledge and the next request toggle.
    pub source_delay: u64,
    /// Default sink acknowledge latency.
    pub sink_delay: u64,
    /// Inject a token only after the previous inference completed.
    pub serialize: bool,
    /// Four-phase bridge deadlock watchdog.
    pub timeout: u64,
    /// Bridge gate delay.
    pub bridge_delay: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stages: 3,
            stage_forward_delay: 100,
            fire_to_phase_delay: 20,
            datapath_delays: vec![60, 60, 60],
            source_delay: 60,
            sink_delay: 40,
            serialize: false,
            timeout: 1_000_000,
            bridge_delay: 10,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.stages == 0 {
            return Err(Error::Config("pipeline.stages must be positive".into()));
        }
        if self.stage_forward_delay == 0 || self.fire_to_phase_delay == 0 {
            return Err(Error::Config(
                "pipeline stage delays must be positive".into(),
            ));
        }
        if self.datapath_delays.len() != self.stages {
            return Err(Error::Config(format!(
                "pipeline.datapath_delays has {} entries for {} stages",
                self.datapath_delays.len(),
                self.stages
            )));
        }
        for (i, &d) in self.datapath_delays.iter().enumerate() {
            if d > self.stage_forward_delay {
                return Err(Error::Config(format!(
                    "stage {} datapath delay {} exceeds matched delay {}",
                    i, d, self.stage_forward_delay
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
struct PipeState {
    to_send: VecDeque<u64>,
    source_queue: VecDeque<u64>,
    regs: Vec<Option<u64>>,
    staged: Vec<VecDeque<u64>>,
    outputs: Vec<(u64, SimTime)>,
    injection_times: Vec<SimTime>,
    injected: u64,
    completions: u64,
    inject_pending: bool,
    violations: u64,
    fire_counts: Vec<u64>,
    in_reset: bool,
}

/// A built pipeline: stage nets, source/sink hooks and monitors.
pub struct ClickPipeline {
    cfg: PipelineConfig,
    req: Vec<SignalId>,
    ack: Vec<SignalId>,
    phase_in: Vec<SignalId>,
    phase_out: Vec<SignalId>,
    fire: Vec<SignalId>,
    completion: SignalId,
    state: Rc<RefCell<PipeState>>,
}

impl ClickPipeline {
    /// Wire `cfg.stages` click elements req->req / ack<-ack into `kernel`
    /// under the `pipeline` scope, with data latching and protocol monitors.
    pub fn build(kernel: &mut Kernel, cfg: &PipelineConfig) -> Result<Self, Error> {
        cfg.validate()?;
        let n = cfg.stages;
        let scope = "pipeline";

        let req: Vec<SignalId> = (0..=n)
            .map(|i| kernel.add_signal(scope, &format!("req{i}")))
            .collect();
        let ack: Vec<SignalId> = (0..=n)
            .map(|i| kernel.add_signal(scope, &format!("ack{i}")))
            .collect();
        let phase_in: Vec<SignalId> = (0..n)
            .map(|i| kernel.add_signal(scope, &format!("phi_in{i}")))
            .collect();
        let phase_out: Vec<SignalId> = (0..n)
            .map(|i| kernel.add_signal(scope, &format!("phi_out{i}")))
            .collect();
        let fire: Vec<SignalId> = (0..n)
            .map(|i| kernel.add_signal(scope, &format!("fire{i}")))
            .collect();
        let commit: Vec<SignalId> = (0..n)
            .map(|i| kernel.add_signal(scope, &format!("lat{i}")))
            .collect();
        let completion = kernel.add_signal(scope, "done");

        let state = Rc::new(RefCell::new(PipeState {
            regs: vec![None; n],
            staged: vec![VecDeque::new(); n],
            fire_counts: vec![0; n],
            ..PipeState::default()
        }));

        for i in 0..n {
            let (req_i, ack_next) = (req[i], ack[i + 1]);
            let (phi, pho, fire_i) = (phase_in[i], phase_out[i], fire[i]);

            // Combinational fire evaluation on every input change.
            let st = state.clone();
            let eval = move |core: &mut KernelCore, _d: &Delivery| {
                if st.borrow().in_reset {
                    return;
                }
                let cond = click_fire(
                    core.value(req_i),
                    core.value(phi),
                    core.value(ack_next),
                    core.value(pho),
                );
                if cond != core.value(fire_i) {
                    let now = core.now();
                    core.schedule(fire_i, cond, now).unwrap();
                }
            };
            kernel.on_edge(req_i, Edge::Any, eval.clone());
            kernel.on_edge(ack_next, Edge::Any, eval.clone());
            kernel.on_edge(phi, Edge::Any, eval.clone());
            kernel.on_edge(pho, Edge::Any, eval);

            // Fire pulse toggles both phases after the fire-to-phase delay.
            let ftp = cfg.fire_to_phase_delay;
            let st = state.clone();
            kernel.on_edge(fire_i, Edge::Rising, move |core, d| {
                if st.borrow().in_reset {
                    return;
                }
                let phi_v = core.value(phi);
                let pho_v = core.value(pho);
                core.schedule(phi, !phi_v, d.time + ftp).unwrap();
                core.schedule(pho, !pho_v, d.time + ftp).unwrap();
            });

            // req_out mirrors phase_in through the matched delay.
            let fwd = cfg.stage_forward_delay;
            let req_next = req[i + 1];
            kernel.on_edge(phase_in[i], Edge::Any, move |core, d| {
                core.schedule(req_next, d.value, d.time + fwd).unwrap();
            });

            // ack_out mirrors phase_out immediately.
            let ack_i = ack[i];
            kernel.on_edge(phase_out[i], Edge::Any, move |core, d| {
                core.schedule(ack_i, d.value, d.time).unwrap();
            });

            // Data latch: capture the upstream register at the fire edge and
            // commit it on a fresh delta event, so simultaneous fires still
            // read pre-update values.
            let st = state.clone();
            let commit_i = commit[i];
            let last = i == n - 1;
            kernel.on_edge(fire_i, Edge::Rising, move |core, d| {
                let mut s = st.borrow_mut();
                if s.in_reset {
                    return;
                }
                s.fire_counts[i] += 1;
                let token = if i == 0 {
                    s.source_queue.pop_front()
                } else {
                    s.regs[i - 1]
                };
                match token {
                    Some(tok) => {
                        s.staged[i].push_back(tok);
                        if last {
                            s.outputs.push((tok, d.time));
                        }
                        drop(s);
                        let v = core.value(commit_i);
                        core.schedule(commit_i, !v, d.time).unwrap();
                    }
                    None => s.violations += 1,
                }
            });
            let st = state.clone();
            kernel.on_edge(commit_i, Edge::Any, move |_core, _d| {
                let mut s = st.borrow_mut();
                if let Some(tok) = s.staged[i].pop_front() {
                    s.regs[i] = Some(tok);
                }
            });

            // Protocol monitor: a request transition while fire is pending,
            // or one that cancels an unabsorbed token, is a violation.
            let st = state.clone();
            kernel.on_edge(req_i, Edge::Any, move |core, d| {
                let mut s = st.borrow_mut();
                if s.in_reset {
                    return;
                }
                if core.value(fire_i) {
                    s.violations += 1;
                }
                if core.value(phi) == d.value {
                    s.violations += 1;
                }
            });
        }

        // Source bookkeeping: record actual injection instants.
        let st = state.clone();
        kernel.on_edge(req[0], Edge::Any, move |_core, d| {
            let mut s = st.borrow_mut();
            s.injection_times.push(d.time);
            s.inject_pending = false;
        });

        // Source driver: try on every source-side acknowledge.
        let st = state.clone();
        let (req0, ack0) = (req[0], ack[0]);
        let (src_delay, serialize) = (cfg.source_delay, cfg.serialize);
        kernel.on_edge(ack[0], Edge::Any, move |core, _d| {
            try_inject(&st, core, req0, ack0, src_delay, serialize);
        });
        let st = state.clone();
        kernel.on_edge(completion, Edge::Any, move |core, _d| {
            st.borrow_mut().completions += 1;
            try_inject(&st, core, req0, ack0, src_delay, serialize);
        });

        Ok(ClickPipeline {
            cfg: cfg.clone(),
            req,
            ack,
            phase_in,
            phase_out,
            fire,
            completion,
            state,
        })
    }

    /// Echo requests back as acknowledges after `sink_delay`, and count each
    /// as a completed inference. Used when no classification backend owns
    /// the tail of the pipeline.
    pub fn install_default_sink(&self, kernel: &mut Kernel) {
        self.install_sink_with_delay(kernel, self.cfg.sink_delay);
    }

    /// Default sink with an explicit acknowledge latency.
    pub fn install_sink_with_delay(&self, kernel: &mut Kernel, delay: u64) {
        let ack_n = *self.ack.last().unwrap();
        let done = self.completion;
        let st = self.state.clone();
        kernel.on_edge(*self.req.last().unwrap(), Edge::Any, move |core, d| {
            if st.borrow().in_reset {
                return;
            }
            core.schedule(ack_n, d.value, d.time + delay).unwrap();
            let v = core.value(done);
            core.schedule(done, !v, d.time + delay).unwrap();
        });
    }

    /// Queue token ids for injection.
    pub fn queue_tokens(&self, tokens: impl IntoIterator<Item = u64>) {
        self.state.borrow_mut().to_send.extend(tokens);
    }

    /// Kick the source: inject the first queued token when the handshake
    /// allows.
    pub fn start(&self, core: &mut KernelCore) {
        try_inject(
            &self.state,
            core,
            self.req[0],
            self.ack[0],
            self.cfg.source_delay,
            self.cfg.serialize,
        );
    }

    /// Assert reset: stage activity stops, latched tokens are dropped, and
    /// every pipeline net is driven low once in-flight events have landed.
    /// Hold it with [`ClickPipeline::release_reset`] to resume.
    pub fn reset(&self, core: &mut KernelCore) {
        {
            let mut s = self.state.borrow_mut();
            s.in_reset = true;
            s.regs.iter_mut().for_each(|r| *r = None);
            s.staged.iter_mut().for_each(VecDeque::clear);
            s.source_queue.clear();
            s.to_send.clear();
            s.inject_pending = false;
        }
        // Everything already scheduled lands within one phase toggle plus one
        // matched delay; the zeros go in after that horizon.
        let settle = self.cfg.fire_to_phase_delay + self.cfg.stage_forward_delay + 1;
        let t = core.now() + settle;
        for i in 0..self.cfg.stages {
            for net in [self.phase_in[i], self.phase_out[i], self.fire[i]] {
                core.schedule(net, false, t).unwrap();
            }
        }
        for net in self.req.iter().chain(self.ack.iter()) {
            core.schedule(*net, false, t).unwrap();
        }
    }

    /// Release a held reset; the pipeline restarts clean.
    pub fn release_reset(&self) {
        self.state.borrow_mut().in_reset = false;
    }

    pub fn fire_net(&self, stage: usize) -> SignalId {
        self.fire[stage]
    }

    pub fn req_net(&self, idx: usize) -> SignalId {
        self.req[idx]
    }

    pub fn ack_net(&self, idx: usize) -> SignalId {
        self.ack[idx]
    }

    pub fn phase_in_net(&self, stage: usize) -> SignalId {
        self.phase_in[stage]
    }

    pub fn phase_out_net(&self, stage: usize) -> SignalId {
        self.phase_out[stage]
    }

    /// Completion net; the classification backend toggles it once per
    /// finished inference.
    pub fn completion_net(&self) -> SignalId {
        self.completion
    }

    /// Token currently latched in `stage`.
    pub fn stage_token(&self, stage: usize) -> Option<u64> {
        self.state.borrow().regs[stage]
    }

    /// Tokens that completed the final stage, in fire order.
    pub fn outputs(&self) -> Vec<(u64, SimTime)> {
        self.state.borrow().outputs.clone()
    }

    pub fn injection_times(&self) -> Vec<SimTime> {
        self.state.borrow().injection_times.clone()
    }

    pub fn violations(&self) -> u64 {
        self.state.borrow().violations
    }

    pub fn fire_counts(&self) -> Vec<u64> {
        self.state.borrow().fire_counts.clone()
    }
}

fn try_inject(
    state: &Rc<RefCell<PipeState>>,
    core: &mut KernelCore,
    req0: SignalId,
    ack0: SignalId,
    source_delay: u64,
    serialize: bool,
) {
    let mut s = state.borrow_mut();
    if s.inject_pending || s.to_send.is_empty() {
        return;
    }
    if core.value(ack0) != core.value(req0) {
        return;
    }
    if serialize && s.completions < s.injected {
        return;
    }
    let tok = s.to_send.pop_front().unwrap();
    s.source_queue.push_back(tok);
    s.injected += 1;
    s.inject_pending = true;
    let nv = !core.value(req0);
    let now = core.now();
    drop(s);
    core.schedule(req0, nv, now + source_delay).unwrap();
}

// ---------------------------------------------------------------------------
// Four-to-two phase interface.

#[derive(Debug, Default)]
struct BridgeState {
    pending: u64,
    open: bool,
    rise_scheduled: bool,
    pulse_count: u64,
    open_seq: Option<u64>,
    watchdog_queue: VecDeque<u64>,
    deadlocks: u64,
    pulses: Vec<(SimTime, Option<SimTime>)>,
}

/// Bridges a two-phase net onto a four-phase request: every transition of
/// the two-phase net produces exactly one rise, and the return-to-zero edge
/// follows the downstream completion. Back-to-back transitions queue so
/// pulses never overlap.
pub struct PhaseBridge {
    req: SignalId,
    completion: SignalId,
    state: Rc<RefCell<BridgeState>>,
}

impl PhaseBridge {
    pub fn build(
        kernel: &mut Kernel,
        scope: &str,
        two_phase: SignalId,
        timeout: u64,
        gate_delay: u64,
    ) -> Self {
        let req = kernel.add_signal(scope, "fp_req");
        let completion = kernel.add_signal(scope, "fp_done");
        let watchdog = kernel.add_signal(scope, "fp_wd");
        let state = Rc::new(RefCell::new(BridgeState::default()));

        let st = state.clone();
        kernel.on_edge(two_phase, Edge::Any, move |core, _d| {
            st.borrow_mut().pending += 1;
            try_rise(&st, core, req, completion, watchdog, timeout, gate_delay);
        });

        let st = state.clone();
        kernel.on_edge(req, Edge::Rising, move |_core, d| {
            let mut s = st.borrow_mut();
            s.open = true;
            s.rise_scheduled = false;
            s.pulses.push((d.time, None));
        });

        let st = state.clone();
        kernel.on_edge(req, Edge::Falling, move |core, d| {
            {
                let mut s = st.borrow_mut();
                s.open = false;
                s.open_seq = None;
                if let Some(last) = s.pulses.last_mut() {
                    last.1 = Some(d.time);
                }
            }
            try_rise(&st, core, req, completion, watchdog, timeout, gate_delay);
        });

        let st = state.clone();
        kernel.on_edge(completion, Edge::Rising, move |core, d| {
            if st.borrow().open {
                core.schedule(req, false, d.time + gate_delay).unwrap();
            }
        });

        let st = state.clone();
        kernel.on_edge(completion, Edge::Falling, move |core, _d| {
            try_rise(&st, core, req, completion, watchdog, timeout, gate_delay);
        });

        let st = state.clone();
        kernel.on_edge(watchdog, Edge::Any, move |_core, _d| {
            let mut s = st.borrow_mut();
            if let Some(seq) = s.watchdog_queue.pop_front() {
                if s.open && s.open_seq == Some(seq) {
                    s.deadlocks += 1;
                }
            }
        });

        PhaseBridge {
            req,
            completion,
            state,
        }
    }

    /// The four-phase request net (rises once per two-phase transition).
    pub fn req_net(&self) -> SignalId {
        self.req
    }

    /// The completion net the downstream drives high when done, low once
    /// its outputs have returned to zero.
    pub fn completion_net(&self) -> SignalId {
        self.completion
    }

    /// Completed and open pulses as (rise, fall) pairs.
    pub fn pulses(&self) -> Vec<(SimTime, Option<SimTime>)> {
        self.state.borrow().pulses.clone()
    }

    pub fn deadlocks(&self) -> u64 {
        self.state.borrow().deadlocks
    }
}

#[allow(clippy::too_many_arguments)]
fn try_rise(
    state: &Rc<RefCell<BridgeState>>,
    core: &mut KernelCore,
    req: SignalId,
    completion: SignalId,
    watchdog: SignalId,
    timeout: u64,
    gate_delay: u64,
) {
    let mut s = state.borrow_mut();
    if s.pending == 0 || s.open || s.rise_scheduled {
        return;
    }
    if core.value(req) || core.value(completion) {
        return;
    }
    s.pending -= 1;
    let seq = s.pulse_count;
    s.pulse_count += 1;
    s.open_seq = Some(seq);
    s.rise_scheduled = true;
    s.watchdog_queue.push_back(seq);
    let now = core.now();
    drop(s);
    core.schedule(req, true, now + gate_delay).unwrap();
    // Alternate the watchdog level by pulse parity so every check event is a
    // real transition even when several checks are in flight.
    core.schedule(watchdog, seq.is_multiple_of(2), now + gate_delay + timeout)
        .unwrap();
}
