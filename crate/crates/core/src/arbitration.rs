//! Winner-Takes-All terminal of the time-domain path.
//!
//! A behavioural Mutex (window + penalty + policy, not electrical detail)
//! underlies two arbiter topologies: a binary tournament of m-1 cells and an
//! all-pairs mesh of m(m-1)/2 cells. Randomness for metastable resolutions
//! comes from a per-call seeded generator, never global state.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::kernel::SimTime;

/// Tie policy when two inputs land inside the metastability window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutexPolicy {
    /// The lower-index input always wins; fully deterministic.
    LowIndex,
    /// The winner is drawn from the seeded generator.
    SeededRandom,
}

/// Behavioural Mutex parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MutexModel {
    /// Propagation delay of a clean grant.
    pub d_mutex: u64,
    /// Arrival gap at or below which the latch goes metastable.
    pub delta_meta: u64,
    /// Extra settling time charged to a metastable resolution.
    pub meta_penalty: u64,
    pub policy: MutexPolicy,
}

impl Default for MutexModel {
    fn default() -> Self {
        // The window sits below the 10 ps TDC/DCDE steps so distinct class
        // sums race cleanly by default, and the zero penalty keeps exact
        // ties on the policy path through every arbiter layer: tied inputs
        // resolve to the lower index, matching the classifier's tie rule.
        // Robustness studies raise both knobs explicitly.
        MutexModel {
            d_mutex: 30,
            delta_meta: 5,
            meta_penalty: 0,
            policy: MutexPolicy::LowIndex,
        }
    }
}

/// Which input a Mutex granted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Outcome of one Mutex resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MutexOutcome {
    pub winner: Side,
    pub grant_time: SimTime,
    pub metastable: bool,
}

/// One-hot arbitration result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrantVector {
    pub grant: Vec<bool>,
    pub winner: usize,
    pub grant_time: SimTime,
    /// Metastable resolutions across the whole arbitration.
    pub meta_events: u32,
    /// Cells that saw at least one request.
    pub cells_exercised: u32,
    /// Resolution times of exercised cells, for activity tracing.
    pub cell_events: Vec<SimTime>,
}

impl GrantVector {
    fn new(m: usize, winner: usize, grant_time: SimTime) -> Self {
        let mut grant = vec![false; m];
        grant[winner] = true;
        GrantVector {
            grant,
            winner,
            grant_time,
            meta_events: 0,
            cells_exercised: 0,
            cell_events: Vec::new(),
        }
    }
}

fn resolve_with(
    t_a: Option<SimTime>,
    t_b: Option<SimTime>,
    mutex: &MutexModel,
    rng: &mut ChaCha8Rng,
) -> MutexOutcome {
    match (t_a, t_b) {
        (Some(a), Some(b)) => {
            let gap = a.ps().abs_diff(b.ps());
            if gap > mutex.delta_meta {
                let (winner, t) = if a <= b { (Side::A, a) } else { (Side::B, b) };
                MutexOutcome {
                    winner,
                    grant_time: t + mutex.d_mutex,
                    metastable: false,
                }
            } else {
                let winner = match mutex.policy {
                    MutexPolicy::LowIndex => Side::A,
                    MutexPolicy::SeededRandom => {
                        if rng.gen_bool(0.5) {
                            Side::A
                        } else {
                            Side::B
                        }
                    }
                };
                MutexOutcome {
                    winner,
                    grant_time: SimTime(a.ps().max(b.ps())) + mutex.d_mutex + mutex.meta_penalty,
                    metastable: true,
                }
            }
        }
        (Some(a), None) => MutexOutcome {
            winner: Side::A,
            grant_time: a + mutex.d_mutex,
            metastable: false,
        },
        (None, Some(b)) => MutexOutcome {
            winner: Side::B,
            grant_time: b + mutex.d_mutex,
            metastable: false,
        },
        (None, None) => panic!("mutex_resolve requires at least one arrival"),
    }
}

/// Resolve a two-way race. An absent competitor (`None`) never arrives, so
/// the present input wins cleanly. Arrivals closer than the metastability
/// window resolve by policy with a penalised grant time.
pub fn mutex_resolve(
    t_a: Option<SimTime>,
    t_b: Option<SimTime>,
    mutex: &MutexModel,
    seed: u64,
) -> MutexOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    resolve_with(t_a, t_b, mutex, &mut rng)
}

/// Per-layer forward latency added on top of the Mutex grant in the tree
/// arbiter: the OR merge plus the C-element join.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeDelays {
    pub d_or: u64,
    pub d_celement: u64,
}

impl Default for TreeDelays {
    fn default() -> Self {
        TreeDelays {
            d_or: 15,
            d_celement: 25,
        }
    }
}

/// Tree-based arbiter: a binary tournament over ceil(log2 m) layers.
///
/// Non-power-of-two widths get bye slots (inputs that never arrive). The
/// winning pulse accumulates `d_mutex + d_or + d_celement` per layer.
pub fn tba_arbitrate(
    arrivals: &[Option<SimTime>],
    mutex: &MutexModel,
    tree: &TreeDelays,
    seed: u64,
) -> Result<GrantVector, Error> {
    let m = arrivals.len();
    if m == 0 {
        return Err(Error::Config("arbitration over zero classes".into()));
    }
    if arrivals.iter().all(Option::is_none) {
        return Err(Error::Invariant("no race pulse ever arrives".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer_tail = tree.d_or + tree.d_celement;
    let mut meta_events = 0u32;
    let mut cells = 0u32;
    let mut cell_events = Vec::new();

    // (class, arrival) entries; byes are None arrivals.
    let mut round: Vec<(usize, Option<SimTime>)> = arrivals.iter().copied().enumerate().collect();
    if m == 1 {
        // Degenerate tree: one cell with a bye.
        let out = resolve_with(round[0].1, None, mutex, &mut rng);
        let mut gv = GrantVector::new(1, 0, out.grant_time + layer_tail);
        gv.cells_exercised = 1;
        gv.cell_events.push(out.grant_time);
        return Ok(gv);
    }
    while round.len() > 1 {
        if round.len() % 2 == 1 {
            round.push((usize::MAX, None));
        }
        let mut next = Vec::with_capacity(round.len() / 2);
        for pair in round.chunks(2) {
            let (ca, ta) = pair[0];
            let (cb, tb) = pair[1];
            match (ta, tb) {
                (None, None) => {
                    // Structurally a cell, but nothing to arbitrate.
                    next.push((ca.min(cb), None));
                }
                _ => {
                    let out = resolve_with(ta, tb, mutex, &mut rng);
                    cells += 1;
                    cell_events.push(out.grant_time);
                    if out.metastable {
                        meta_events += 1;
                    }
                    let winner_class = match out.winner {
                        Side::A => ca,
                        Side::B => cb,
                    };
                    next.push((winner_class, Some(out.grant_time + layer_tail)));
                }
            }
        }
        round = next;
    }
    let (winner, time) = round[0];
    let grant_time = time.ok_or_else(|| Error::Invariant("tournament lost all pulses".into()))?;
    let mut gv = GrantVector::new(m, winner, grant_time);
    gv.meta_events = meta_events;
    gv.cells_exercised = cells;
    gv.cell_events = cell_events;
    Ok(gv)
}

/// Mesh arbiter: every pair of classes meets in its own Mutex; the class
/// that wins all m-1 pairings is granted after (m-1) cell delays.
///
/// Random metastable resolutions can produce a cyclic outcome with no
/// all-pairs winner; the class with the most pairing wins (policy tie-break)
/// is granted so the output stays one-hot under every seed.
pub fn mesh_arbitrate(
    arrivals: &[Option<SimTime>],
    mutex: &MutexModel,
    seed: u64,
) -> Result<GrantVector, Error> {
    let m = arrivals.len();
    if m == 0 {
        return Err(Error::Config("arbitration over zero classes".into()));
    }
    if arrivals.iter().all(Option::is_none) {
        return Err(Error::Invariant("no race pulse ever arrives".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if m == 1 {
        let t = arrivals[0].unwrap();
        return Ok(GrantVector::new(1, 0, t));
    }
    let mut wins = vec![0u32; m];
    let mut meta_with = vec![Vec::new(); m];
    let mut meta_events = 0u32;
    let mut cells = 0u32;
    let mut cell_events = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if arrivals[i].is_none() && arrivals[j].is_none() {
                continue;
            }
            let out = resolve_with(arrivals[i], arrivals[j], mutex, &mut rng);
            cells += 1;
            cell_events.push(out.grant_time);
            if out.metastable {
                meta_events += 1;
                meta_with[i].push(j);
                meta_with[j].push(i);
            }
            match out.winner {
                Side::A => wins[i] += 1,
                Side::B => wins[j] += 1,
            }
        }
    }
    let best = *wins.iter().max().unwrap();
    let tied: Vec<usize> = (0..m).filter(|&i| wins[i] == best).collect();
    let winner = if tied.len() == 1 {
        tied[0]
    } else {
        match mutex.policy {
            MutexPolicy::LowIndex => tied[0],
            MutexPolicy::SeededRandom => tied[rng.gen_range(0..tied.len())],
        }
    };
    // Winner settles after its pulse has crossed m-1 cells; metastable
    // pairings settle from the later arrival and add their penalty.
    let mut base = arrivals[winner].expect("winner must have arrived");
    for &opp in &meta_with[winner] {
        if let Some(t) = arrivals[opp] {
            base = SimTime(base.ps().max(t.ps()));
        }
    }
    let grant_time =
        base + (m as u64 - 1) * mutex.d_mutex + mutex.meta_penalty * meta_with[winner].len() as u64;
    let mut gv = GrantVector::new(m, winner, grant_time);
    gv.meta_events = meta_events;
    gv.cells_exercised = cells;
    gv.cell_events = cell_events;
    Ok(gv)
}

/// Arbiter topology selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Tba,
    Mesh,
}

impl Topology {
    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Tba => "tba",
            Topology::Mesh => "mesh",
        }
    }
}

/// Structural cost of a WTA network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArbiterCost {
    pub depth: u32,
    pub cell_count: u64,
    pub latency_ps: u64,
}

/// Depth, cell count and forward latency of a WTA over `m >= 2` classes.
///
/// Tree: ceil(log2 m) layers, m-1 cells, one (Mutex + OR + C-element) per
/// layer. Mesh: m-1 stages of m(m-1)/2 cells, one Mutex delay per stage.
/// The ceiling on the tree depth matters only off powers of two.
pub fn arbiter_cost(
    topology: Topology,
    m: u64,
    mutex: &MutexModel,
    tree: &TreeDelays,
) -> Result<ArbiterCost, Error> {
    if m < 2 {
        return Err(Error::Config("arbiter_cost requires m >= 2".into()));
    }
    Ok(match topology {
        Topology::Tba => {
            let depth = 64 - (m - 1).leading_zeros(); // ceil(log2 m)
            ArbiterCost {
                depth,
                cell_count: m - 1,
                latency_ps: depth as u64 * (mutex.d_mutex + tree.d_or + tree.d_celement),
            }
        }
        Topology::Mesh => ArbiterCost {
            depth: (m - 1) as u32,
            cell_count: m * (m - 1) / 2,
            latency_ps: (m - 1) * mutex.d_mutex,
        },
    })
}

/// Dispatch helper used by the simulator.
pub fn arbitrate(
    topology: Topology,
    arrivals: &[Option<SimTime>],
    mutex: &MutexModel,
    tree: &TreeDelays,
    seed: u64,
) -> Result<GrantVector, Error> {
    match topology {
        Topology::Tba => tba_arbitrate(arrivals, mutex, tree, seed),
        Topology::Mesh => mesh_arbitrate(arrivals, mutex, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mx() -> MutexModel {
        MutexModel::default()
    }

    fn some(ts: &[u64]) -> Vec<Option<SimTime>> {
        ts.iter().map(|&t| Some(SimTime(t))).collect()
    }

    #[test]
    fn clear_gap_grants_earlier() {
        let out = mutex_resolve(Some(SimTime(100)), Some(SimTime(200)), &mx(), 0);
        assert_eq!(out.winner, Side::A);
        assert_eq!(out.grant_time, SimTime(130));
        assert!(!out.metastable);
    }

    #[test]
    fn window_hit_resolves_by_policy_with_penalty() {
        let wide = MutexModel {
            delta_meta: 20,
            meta_penalty: 50,
            ..mx()
        };
        let out = mutex_resolve(Some(SimTime(100)), Some(SimTime(105)), &wide, 0);
        assert_eq!(out.winner, Side::A);
        assert!(out.metastable);
        assert_eq!(out.grant_time, SimTime(105 + 30 + 50));
    }

    #[test]
    fn equal_arrivals_random_policy_replays() {
        let m = MutexModel {
            policy: MutexPolicy::SeededRandom,
            ..mx()
        };
        let a = mutex_resolve(Some(SimTime(70)), Some(SimTime(70)), &m, 99);
        let b = mutex_resolve(Some(SimTime(70)), Some(SimTime(70)), &m, 99);
        assert_eq!(a, b);
    }

    #[test]
    fn absent_competitor_loses() {
        let out = mutex_resolve(None, Some(SimTime(42)), &mx(), 0);
        assert_eq!(out.winner, Side::B);
        assert_eq!(out.grant_time, SimTime(72));
    }

    #[test]
    fn tba_tournament_hand_trace() {
        // Layers: (300,100)->1@170, (200,400)->2@270, final 1@240.
        let gv = tba_arbitrate(
            &some(&[300, 100, 200, 400]),
            &mx(),
            &TreeDelays::default(),
            0,
        )
        .unwrap();
        assert_eq!(gv.winner, 1);
        assert_eq!(gv.grant, vec![false, true, false, false]);
        assert_eq!(gv.grant_time, SimTime(240));
        assert_eq!(gv.cells_exercised, 3);
    }

    #[test]
    fn tba_single_class() {
        let gv = tba_arbitrate(&some(&[500]), &mx(), &TreeDelays::default(), 0).unwrap();
        assert_eq!(gv.winner, 0);
        // One bye cell: 500 + 30 + 15 + 25.
        assert_eq!(gv.grant_time, SimTime(570));
    }

    #[test]
    fn tba_bye_slot_hand_trace() {
        // (50,10)->1@80, (90,bye)->2@160, final 1@150.
        let gv = tba_arbitrate(&some(&[50, 10, 90]), &mx(), &TreeDelays::default(), 0).unwrap();
        assert_eq!(gv.winner, 1);
        assert_eq!(gv.grant_time, SimTime(150));
    }

    #[test]
    fn mesh_all_pairs_hand_trace() {
        let gv = mesh_arbitrate(&some(&[50, 10, 90]), &mx(), 0).unwrap();
        assert_eq!(gv.winner, 1);
        assert_eq!(gv.cells_exercised, 3);
        // 10 + 2 * d_mutex.
        assert_eq!(gv.grant_time, SimTime(70));
    }

    #[test]
    fn mesh_equal_arrivals_low_index_policy() {
        let gv = mesh_arbitrate(&some(&[40, 40, 40]), &mx(), 0).unwrap();
        assert_eq!(gv.winner, 0);
        assert_eq!(gv.meta_events, 3);
    }

    #[test]
    fn mesh_two_classes_matches_mutex() {
        for (a, b) in [(100u64, 200u64), (100, 110), (90, 90)] {
            let gv = mesh_arbitrate(&some(&[a, b]), &mx(), 7).unwrap();
            let out = mutex_resolve(Some(SimTime(a)), Some(SimTime(b)), &mx(), 7);
            let expect = match out.winner {
                Side::A => 0,
                Side::B => 1,
            };
            assert_eq!(gv.winner, expect);
            assert_eq!(gv.grant_time, out.grant_time);
        }
    }

    #[test]
    fn cost_formulas() {
        let costs = |t, m| arbiter_cost(t, m, &mx(), &TreeDelays::default()).unwrap();
        let tba8 = costs(Topology::Tba, 8);
        assert_eq!(tba8.cell_count, 7);
        assert_eq!(tba8.depth, 3);
        assert_eq!(tba8.latency_ps, 3 * (30 + 15 + 25));
        let mesh8 = costs(Topology::Mesh, 8);
        assert_eq!(mesh8.cell_count, 28);
        let mesh2 = costs(Topology::Mesh, 2);
        assert_eq!(mesh2.cell_count, 1);
        assert_eq!(mesh2.latency_ps, 30);
    }

    proptest! {
        #[test]
        fn one_hot_under_any_pattern(
            seed in any::<u64>(),
            ts in proptest::collection::vec(0u64..400, 2..10),
            random_policy in any::<bool>(),
        ) {
            // Narrow arrival range forces plenty of metastable windows.
            let mutex = MutexModel {
                policy: if random_policy { MutexPolicy::SeededRandom } else { MutexPolicy::LowIndex },
                ..mx()
            };
            let arr = some(&ts);
            for topo in [Topology::Tba, Topology::Mesh] {
                let gv = arbitrate(topo, &arr, &mutex, &TreeDelays::default(), seed).unwrap();
                prop_assert_eq!(gv.grant.iter().filter(|g| **g).count(), 1);
                prop_assert!(gv.grant[gv.winner]);
            }
        }

        #[test]
        fn clean_races_pick_argmin_and_agree(
            seed in any::<u64>(),
            perm_seed in any::<u64>(),
            n in 2usize..9,
        ) {
            use rand::seq::SliceRandom;
            // Arrivals spaced beyond the window: gaps of 100 > delta_meta.
            let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
            let mut times: Vec<u64> = (0..n as u64).map(|i| 50 + 100 * i).collect();
            times.shuffle(&mut rng);
            let arr = some(&times);
            let argmin = times
                .iter()
                .enumerate()
                .min_by_key(|(i, t)| (**t, *i))
                .unwrap()
                .0;
            let tba = tba_arbitrate(&arr, &mx(), &TreeDelays::default(), seed).unwrap();
            let mesh = mesh_arbitrate(&arr, &mx(), seed).unwrap();
            prop_assert_eq!(tba.winner, argmin);
            prop_assert_eq!(mesh.winner, argmin);
            prop_assert_eq!(tba.meta_events, 0);
            prop_assert_eq!(mesh.meta_events, 0);
        }

        #[test]
        fn mesh_permutation_equivariance(
            perm_seed in any::<u64>(),
            n in 2usize..7,
        ) {
            use rand::seq::SliceRandom;
            let times: Vec<u64> = (0..n as u64).map(|i| 30 + 90 * i).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
            perm.shuffle(&mut rng);
            let permuted: Vec<u64> = perm.iter().map(|&p| times[p]).collect();
            let base = mesh_arbitrate(&some(&times), &mx(), 1).unwrap();
            let moved = mesh_arbitrate(&some(&permuted), &mx(), 1).unwrap();
            // The winner follows the permutation.
            prop_assert_eq!(perm[moved.winner], base.winner);
        }
    }
}
