//! Batch simulation assembly.
//!
//! One kernel instance streams every sample of a batch through the click
//! pipeline: clause evaluation hangs off the first fire, classification off
//! the last. The digital mode computes sums and argmax at the final stage;
//! the time-domain modes bridge the final stage phase onto a four-phase race
//! launch, schedule per-class race pulses, and let the WTA grant terminate
//! the inference. Per-class race delays and arbitration outcomes are pure
//! functions of the sample, so they are precomputed and the kernel schedule
//! realises them as observable net activity (VCD, transition counts).

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use crate::arbitration::{arbitrate, GrantVector};
use crate::click::{ClickPipeline, PhaseBridge};
use crate::config::{Mode, RunConfig};
use crate::error::Error;
use crate::inference::{infer, Inference};
use crate::kernel::{Edge, Kernel, SignalId, SimTime};
use crate::metrics::{collect_transitions, MetricsReport};
use crate::model::{Sample, TmModel, Variant};
use crate::time_domain::{bit_width, cotm_race_delays, hamming_race_delays, CotmClassPath};

/// Everything recorded about one sample.
#[derive(Debug, Clone)]
pub struct SampleResult {
    pub index: usize,
    pub label: Option<usize>,
    pub oracle_pred: usize,
    pub oracle_sums: Vec<i64>,
    /// Winner of the time-domain race; `None` in digital-oracle mode.
    pub td_pred: Option<usize>,
    /// Oracle agreement; trivially true in digital-oracle mode.
    pub agree: bool,
    pub completion_time: SimTime,
    pub meta_events: u32,
    pub hamming_delays: Option<Vec<u64>>,
    pub cotm_paths: Option<Vec<CotmClassPath>>,
    pub grant_time: Option<SimTime>,
}

/// Result of a full batch run.
#[derive(Debug)]
pub struct RunOutput {
    pub mode: Mode,
    pub samples: Vec<SampleResult>,
    pub metrics: MetricsReport,
    pub vcd: Option<Vec<u8>>,
    pub protocol_violations: u64,
    pub deadlocks: u64,
    pub one_hot_violations: u64,
}

impl RunOutput {
    pub fn agreement_counts(&self) -> (usize, usize) {
        let agree = self.samples.iter().filter(|s| s.agree).count();
        (agree, self.samples.len())
    }
}

fn sample_seed(run_seed: u64, index: usize) -> u64 {
    // splitmix64 round over the run seed and sample index.
    let mut z = run_seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Precomputed per-sample plan: oracle result plus, for timed modes, race
/// delays and the arbitration outcome relative to the launch instant.
struct SamplePlan {
    oracle: Inference,
    hamming_delays: Option<Vec<u64>>,
    cotm_paths: Option<Vec<CotmClassPath>>,
    race_delays: Vec<u64>,
    grant: Option<GrantVector>,
}

fn plan_samples(
    model: &TmModel,
    samples: &[Sample],
    cfg: &RunConfig,
) -> Result<Vec<SamplePlan>, Error> {
    let td = cfg.td_config();
    let mutex = cfg.mutex_model();
    let tree = cfg.tree_delays();
    samples
        .iter()
        .enumerate()
        .map(|(idx, sample)| {
            let oracle = infer(model, sample)?;
            let (hamming_delays, cotm_paths, race_delays) = match cfg.mode {
                Mode::DigitalOracle => (None, None, Vec::new()),
                Mode::HammingTd => {
                    let d = hamming_race_delays(model, &oracle.clause_vectors, &td)?;
                    (Some(d.clone()), None, d)
                }
                Mode::CotmIdeal | Mode::CotmArchitectural => {
                    let mode = cfg.mode.cotm_mode().unwrap();
                    let paths = cotm_race_delays(model, &oracle.clause_vectors[0], &td, mode)?;
                    let d: Vec<u64> = paths.iter().map(|p| p.final_delay).collect();
                    (None, Some(paths), d)
                }
            };
            let grant = if cfg.mode == Mode::DigitalOracle {
                None
            } else {
                let arrivals: Vec<Option<SimTime>> =
                    race_delays.iter().map(|&d| Some(SimTime(d))).collect();
                Some(arbitrate(
                    cfg.arbiter,
                    &arrivals,
                    &mutex,
                    &tree,
                    sample_seed(cfg.seed, idx),
                )?)
            };
            Ok(SamplePlan {
                oracle,
                hamming_delays,
                cotm_paths,
                race_delays,
                grant,
            })
        })
        .collect()
}

#[derive(Default)]
struct RunProgress {
    fired_first: usize,
    launched: usize,
    completions: Vec<SimTime>,
    grants_high: u32,
    one_hot_violations: u64,
    cell_parity: bool,
}

/// Run the full batch in one kernel instance.
pub fn run_batch(model: &TmModel, samples: &[Sample], cfg: &RunConfig) -> Result<RunOutput, Error> {
    if samples.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    cfg.mode.check_variant(model.variant())?;
    if cfg.mode != Mode::DigitalOracle {
        cfg.td_config().validate()?;
    }
    let plans = plan_samples(model, samples, cfg)?;
    let n = samples.len();
    let num_classes = model.num_classes();

    let mut kernel = Kernel::new();
    kernel.set_delivery_cap(cfg.delivery_cap);
    let pipe = ClickPipeline::build(&mut kernel, &cfg.pipeline_config())?;
    let last_stage = cfg.stages - 1;

    // Clause-output nets, scheduled after the stage-0 datapath delay.
    let clause_nets: Vec<Vec<SignalId>> = match model.variant() {
        Variant::Multiclass => (0..num_classes)
            .map(|cl| {
                (0..model.num_clauses())
                    .map(|j| kernel.add_signal("clause_eval", &format!("c{cl}_{j}")))
                    .collect()
            })
            .collect(),
        Variant::Coalesced => vec![(0..model.num_clauses())
            .map(|j| kernel.add_signal("clause_eval", &format!("c{j}")))
            .collect()],
    };

    let progress = Rc::new(RefCell::new(RunProgress {
        completions: vec![SimTime::ZERO; n],
        ..RunProgress::default()
    }));

    // Shared, immutable plan data for the handlers.
    let plan: Rc<Vec<SamplePlan>> = Rc::new(plans);
    let dp_first = cfg.pipeline_config().datapath_delays[0];
    let dp_last = *cfg.pipeline_config().datapath_delays.last().unwrap();

    // First fire: drive the clause nets for the token being latched.
    {
        let plan = plan.clone();
        let progress = progress.clone();
        let clause_nets = clause_nets.clone();
        kernel.on_edge(pipe.fire_net(0), Edge::Rising, move |core, d| {
            let k = {
                let mut p = progress.borrow_mut();
                let k = p.fired_first;
                p.fired_first += 1;
                k
            };
            if k >= plan.len() {
                return;
            }
            for (group, nets) in plan[k].oracle.clause_vectors.iter().zip(clause_nets.iter()) {
                for (&bit, &net) in group.0.iter().zip(nets.iter()) {
                    core.schedule(net, bit, d.time + dp_first).unwrap();
                }
            }
        });
    }

    let sink_delay = cfg.sink_delay;
    let ack_tail = pipe.ack_net(cfg.stages);
    let done_net = pipe.completion_net();

    let mut bridge: Option<PhaseBridge> = None;

    if cfg.mode == Mode::DigitalOracle {
        // Signed sums exposed as offset-encoded bit nets for the activity
        // proxy; completion follows the stage datapath delay.
        let offset = model.max_abs_sum();
        let width = bit_width(2 * offset + 1);
        let sum_nets: Vec<Vec<SignalId>> = (0..num_classes)
            .map(|cl| {
                (0..width)
                    .map(|b| kernel.add_signal("digital_classifier", &format!("sum{cl}_b{b}")))
                    .collect()
            })
            .collect();
        let plan = plan.clone();
        let progress = progress.clone();
        kernel.on_edge(pipe.fire_net(last_stage), Edge::Rising, move |core, d| {
            let k = {
                let mut p = progress.borrow_mut();
                let k = p.launched;
                p.launched += 1;
                k
            };
            if k >= plan.len() {
                return;
            }
            let t_done = d.time + dp_last;
            for (cl, nets) in sum_nets.iter().enumerate() {
                let encoded = (plan[k].oracle.sums.0[cl] + offset as i64) as u64;
                for (b, &net) in nets.iter().enumerate() {
                    core.schedule(net, (encoded >> b) & 1 == 1, t_done).unwrap();
                }
            }
            progress.borrow_mut().completions[k] = t_done;
            // Acknowledge the tail and count the inference.
            let ack_v = core.value(ack_tail);
            core.schedule(ack_tail, !ack_v, t_done + sink_delay)
                .unwrap();
            let done_v = core.value(done_net);
            core.schedule(done_net, !done_v, t_done + sink_delay)
                .unwrap();
        });
    } else {
        // Time-domain terminal: bridge the final stage phase onto the
        // four-phase race launch.
        let br = PhaseBridge::build(
            &mut kernel,
            "time_domain",
            pipe.phase_in_net(last_stage),
            cfg.timeout,
            cfg.bridge_delay,
        );
        let race_dr = br.req_net();
        let race_done = br.completion_net();

        // Race nets per class (plus differential rails for the coalesced
        // architectural path).
        let is_cotm = matches!(cfg.mode, Mode::CotmIdeal | Mode::CotmArchitectural);
        let rail_nets: Vec<(SignalId, SignalId)> = if is_cotm {
            (0..num_classes)
                .map(|c| {
                    (
                        kernel.add_signal("time_domain", &format!("race_s{c}")),
                        kernel.add_signal("time_domain", &format!("race_m{c}")),
                    )
                })
                .collect()
        } else {
            Vec::new()
        };
        let race_nets: Vec<SignalId> = (0..num_classes)
            .map(|c| {
                let name = if is_cotm {
                    format!("sr{c}")
                } else {
                    format!("race{c}")
                };
                kernel.add_signal("time_domain", &name)
            })
            .collect();
        let grant_nets: Vec<SignalId> = (0..num_classes)
            .map(|c| kernel.add_signal("arbiter", &format!("grant{c}")))
            .collect();
        let cell_net = kernel.add_signal("arbiter", "cell_activity");

        let d_celement = cfg.d_celement;
        let bridge_delay = cfg.bridge_delay;
        let launch_skew = cfg.launch_skew;

        // Launch handler: on every four-phase rise, schedule the race pulses
        // and the precomputed arbitration outcome for the next token.
        {
            let plan = plan.clone();
            let progress = progress.clone();
            let race_nets = race_nets.clone();
            let rail_nets = rail_nets.clone();
            let grant_nets = grant_nets.clone();
            kernel.on_edge(race_dr, Edge::Rising, move |core, d| {
                let k = {
                    let mut p = progress.borrow_mut();
                    let k = p.launched;
                    p.launched += 1;
                    k
                };
                if k >= plan.len() {
                    return;
                }
                let sp = &plan[k];
                // Single-rail launch: differential rails settle first, the
                // race control joins them through a C-element.
                let sr_offset = if let Some(paths) = &sp.cotm_paths {
                    let mut max_rail = 0u64;
                    for (path, &(s_net, m_net)) in paths.iter().zip(rail_nets.iter()) {
                        // The M rail carries the configured launch skew, the
                        // same offset the TDC measurement saw.
                        let m_delay =
                            (path.rail_delay_m as i128 + launch_skew as i128).max(0) as u64;
                        core.schedule(s_net, true, d.time + path.rail_delay_s)
                            .unwrap();
                        core.schedule(m_net, true, d.time + m_delay).unwrap();
                        max_rail = max_rail.max(path.rail_delay_s).max(m_delay);
                    }
                    max_rail + d_celement
                } else {
                    0
                };
                let launch = d.time + sr_offset;
                for (&net, &delay) in race_nets.iter().zip(sp.race_delays.iter()) {
                    core.schedule(net, true, launch + delay).unwrap();
                }
                let gv = sp.grant.as_ref().unwrap();
                let grant_abs = launch + gv.grant_time.ps();
                core.schedule(grant_nets[gv.winner], true, grant_abs)
                    .unwrap();
                let slowest = launch + sp.race_delays.iter().copied().max().unwrap_or(0);
                let all_settled = SimTime(grant_abs.ps().max(slowest.ps()));
                // Cell activity trace, alternating so every event is an edge.
                let mut cell_times = gv.cell_events.clone();
                cell_times.sort();
                let mut parity = {
                    let mut p = progress.borrow_mut();
                    let par = p.cell_parity;
                    p.cell_parity = (par as usize + cell_times.len()) % 2 == 1;
                    par
                };
                for t in cell_times {
                    parity = !parity;
                    core.schedule(cell_net, parity, launch + t.ps()).unwrap();
                }
                {
                    let mut p = progress.borrow_mut();
                    p.completions[k] = grant_abs;
                }
                // Completion back to the bridge once the grant is out and
                // every race pulse (losers included) has landed.
                core.schedule(race_done, true, all_settled + d_celement)
                    .unwrap();
            });
        }

        // Return-to-zero: when the bridge request falls, withdraw every race
        // and grant pulse, then complete the four-phase cycle.
        {
            let race_nets = race_nets.clone();
            let rail_nets = rail_nets.clone();
            let grant_nets = grant_nets.clone();
            kernel.on_edge(race_dr, Edge::Falling, move |core, d| {
                let t = d.time + bridge_delay;
                for &net in race_nets.iter().chain(grant_nets.iter()) {
                    if core.value(net) {
                        core.schedule(net, false, t).unwrap();
                    }
                }
                for &(s, m) in &rail_nets {
                    if core.value(s) {
                        core.schedule(s, false, t).unwrap();
                    }
                    if core.value(m) {
                        core.schedule(m, false, t).unwrap();
                    }
                }
                core.schedule(race_done, false, t + bridge_delay).unwrap();
            });
        }

        // Grant monitor (one-hot at every instant) and tail acknowledge.
        for &g in &grant_nets {
            let progress = progress.clone();
            kernel.on_edge(g, Edge::Any, move |core, d| {
                let mut p = progress.borrow_mut();
                if d.value {
                    p.grants_high += 1;
                    if p.grants_high > 1 {
                        p.one_hot_violations += 1;
                    }
                    let ack_v = core.value(ack_tail);
                    core.schedule(ack_tail, !ack_v, d.time + sink_delay)
                        .unwrap();
                    let done_v = core.value(done_net);
                    core.schedule(done_net, !done_v, d.time + sink_delay)
                        .unwrap();
                } else {
                    p.grants_high -= 1;
                }
            });
        }

        bridge = Some(br);
    }

    if cfg.vcd {
        kernel.enable_vcd();
    }

    pipe.queue_tokens(0..n as u64);
    pipe.start(kernel.core_mut());
    kernel.run_to_completion()?;

    // Structural cross-checks. Failures here are simulator bugs.
    let outputs = pipe.outputs();
    if outputs.len() != n || outputs.iter().enumerate().any(|(i, o)| o.0 != i as u64) {
        return Err(Error::Invariant(format!(
            "token conservation failed: {} of {} tokens, order {:?}",
            outputs.len(),
            n,
            outputs.iter().map(|o| o.0).collect::<Vec<_>>()
        )));
    }
    let deadlocks = bridge.as_ref().map(|b| b.deadlocks()).unwrap_or(0);
    let protocol_violations = pipe.violations();
    let first_injection = pipe.injection_times()[0];
    let vcd = kernel.take_vcd();
    let transition_counts: BTreeMap<String, u64> = collect_transitions(kernel.core());
    // The kernel owns the subscription closures and with them the last
    // strong references to the shared plan/progress state.
    drop(pipe);
    drop(kernel);

    let progress = Rc::try_unwrap(progress)
        .map_err(|_| Error::Invariant("progress still shared".into()))
        .map(RefCell::into_inner)?;
    if progress.launched != n {
        return Err(Error::Invariant(format!(
            "{} of {} inferences launched",
            progress.launched, n
        )));
    }

    let plan = Rc::try_unwrap(plan).map_err(|_| Error::Invariant("plan still shared".into()))?;
    let mut results = Vec::with_capacity(n);
    let mut meta_total = 0u64;
    for (idx, (sp, sample)) in plan.into_iter().zip(samples.iter()).enumerate() {
        let td_pred = sp.grant.as_ref().map(|g| g.winner);
        let agree = td_pred.map(|p| p == sp.oracle.predicted).unwrap_or(true);
        let meta = sp.grant.as_ref().map(|g| g.meta_events).unwrap_or(0);
        meta_total += meta as u64;
        results.push(SampleResult {
            index: idx,
            label: sample.label,
            oracle_pred: sp.oracle.predicted,
            oracle_sums: sp.oracle.sums.0.clone(),
            td_pred,
            agree,
            completion_time: progress.completions[idx],
            meta_events: meta,
            hamming_delays: sp.hamming_delays,
            cotm_paths: sp.cotm_paths,
            grant_time: sp.grant.as_ref().map(|_| progress.completions[idx]),
        });
    }

    let last_completion = *progress
        .completions
        .iter()
        .max()
        .expect("at least one sample");
    let agree_count = results.iter().filter(|r| r.agree).count();
    let metrics = MetricsReport::new(
        (
            model.num_features() as u64,
            model.num_clauses() as u64,
            model.num_classes() as u64,
        ),
        n as u64,
        first_injection,
        last_completion,
        transition_counts,
        agree_count as f64 / n as f64,
        meta_total,
        cfg.power,
    )?;

    Ok(RunOutput {
        mode: cfg.mode,
        samples: results,
        metrics,
        vcd,
        protocol_violations,
        deadlocks,
        one_hot_violations: progress.one_hot_violations,
    })
}
