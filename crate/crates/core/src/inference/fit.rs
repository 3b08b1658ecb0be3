use std::borrow::Cow;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::InferenceConfig;
use crate::blockmodel::{description_length, HierarchicalPartition, Level, Target};
use crate::multinet::{ContractedNetwork, Layer, LayeredGraph};
use crate::{LevelState, Objective};

/// Rounds without an improving merge before agglomeration gives up.
const PATIENCE: usize = 3;

/// Shared progress counter; `done` only ever grows.
#[derive(Debug, Default)]
pub struct Progress {
    done: AtomicU64,
    total: AtomicU64,
}

impl Progress {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_total(&self, n: u64) {
        self.total.fetch_add(n, Ordering::SeqCst);
    }

    fn tick(&self, n: u64) {
        self.done.fetch_add(n, Ordering::SeqCst);
    }

    pub fn fraction(&self) -> f64 {
        let total = self.total.load(Ordering::SeqCst);
        if total == 0 {
            return 0.0;
        }
        (self.done.load(Ordering::SeqCst) as f64 / total as f64).min(1.0)
    }
}

/// Metropolis rule: improvements always, uphill moves with `exp(-delta/T)`.
pub fn accept_move(delta: f64, temperature: f64, u: f64) -> bool {
    if delta < 0.0 {
        return true;
    }
    temperature > 0.0 && u < (-delta / temperature).exp()
}

/// Linear schedule from `t0` at sweep 0 down to 0 at the last sweep.
pub fn temperature(sweep: usize, sweeps: usize, t0: f64) -> f64 {
    if sweeps <= 1 {
        return 0.0;
    }
    t0 * (1.0 - sweep as f64 / (sweeps - 1) as f64)
}

pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn random_neighbor(graph: &LayeredGraph, v: u32, rng: &mut ChaCha8Rng) -> Option<u32> {
    let counts = Layer::ALL.map(|l| graph.neighbor_count(l, v));
    let total = counts[0] + counts[1];
    if total == 0 {
        return None;
    }
    let i = rng.gen_range(0..total);
    Some(if i < counts[0] {
        graph.neighbor_at(Layer::Text, v, i)
    } else {
        graph.neighbor_at(Layer::Metadata, v, i - counts[0])
    })
}

/// Candidate merge partner for a random block: the block of a random
/// same-kind neighbor of a neighbor of one of its members, else a random
/// block of the same kind.
fn propose_merge(
    state: &LevelState<'_>,
    rng: &mut ChaCha8Rng,
    kinds: &[usize],
) -> Option<(u32, u32)> {
    let total: usize = kinds.iter().map(|&k| state.active_blocks(k).len()).sum();
    if total == 0 {
        return None;
    }
    let mut i = rng.gen_range(0..total);
    let mut kind = kinds[0];
    for &k in kinds {
        let n = state.active_blocks(k).len();
        if i < n {
            kind = k;
            break;
        }
        i -= n;
    }
    let blocks = state.active_blocks(kind);
    let r = blocks[i];
    let members = state.members(r);
    let v = members[rng.gen_range(0..members.len())];
    let graph = state.graph();
    let s = random_neighbor(graph, v, rng)
        .and_then(|u| random_neighbor(graph, u, rng))
        .filter(|&x| state.kind_index(x) == kind)
        .map(|x| state.block_of(x))
        .filter(|&s| s != r);
    let s = match s {
        Some(s) => s,
        None => {
            let j = rng.gen_range(0..blocks.len() - 1);
            if blocks[j] == r {
                blocks[blocks.len() - 1]
            } else {
                blocks[j]
            }
        }
    };
    Some((r, s))
}

fn pair_key(delta: f64, r: u32, s: u32) -> (f64, u32, u32) {
    (delta, r.min(s), r.max(s))
}

fn better(a: (f64, u32, u32), b: (f64, u32, u32)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2))
}

/// Best merge among `m` sampled candidates, or among all pairs when
/// there are at most `m` of them. Only kinds in `kinds` are considered.
fn best_merge(
    state: &LevelState<'_>,
    rng: &mut ChaCha8Rng,
    m: usize,
    kinds: &[usize],
) -> Option<(f64, u32, u32)> {
    let kinds: Vec<usize> = kinds
        .iter()
        .copied()
        .filter(|&k| state.active_blocks(k).len() >= 2)
        .collect();
    if kinds.is_empty() {
        return None;
    }
    let pairs: usize = kinds
        .iter()
        .map(|&k| {
            let n = state.active_blocks(k).len();
            n * (n - 1) / 2
        })
        .sum();
    let mut best: Option<(f64, u32, u32)> = None;
    let mut consider = |delta: f64, r: u32, s: u32| {
        let key = pair_key(delta, r, s);
        if best.is_none_or(|b| better(key, b)) {
            best = Some(key);
        }
    };
    if pairs <= m {
        for &k in &kinds {
            let blocks = state.active_blocks(k);
            for (i, &r) in blocks.iter().enumerate() {
                for &s in &blocks[i + 1..] {
                    consider(state.merge_delta(r, s), r, s);
                }
            }
        }
    } else {
        for _ in 0..m {
            if let Some((r, s)) = propose_merge(state, rng, &kinds) {
                consider(state.merge_delta(r, s), r, s);
            }
        }
    }
    best
}

fn merge(state: &mut LevelState<'_>, r: u32, s: u32) {
    // the larger block survives; on equal size, the lower id
    let (from, into) = match state.block_size(r).cmp(&state.block_size(s)) {
        std::cmp::Ordering::Greater => (s, r),
        std::cmp::Ordering::Less => (r, s),
        std::cmp::Ordering::Equal => (r.max(s), r.min(s)),
    };
    state.apply_merge(from, into);
}

fn pick_kind(state: &LevelState<'_>, rng: &mut ChaCha8Rng, allowed: &[bool; 4]) -> Option<usize> {
    let weights = [0, 1, 2, 3].map(|k| {
        let n = state.active_blocks(k).len();
        if allowed[k] && n >= 2 {
            n
        } else {
            0
        }
    });
    let total: usize = weights.iter().sum();
    if total == 0 {
        return None;
    }
    let mut i = rng.gen_range(0..total);
    (0..4).find(|&k| {
        if i < weights[k] {
            true
        } else {
            i -= weights[k];
            false
        }
    })
}

fn pair_count(state: &LevelState<'_>, k: usize) -> usize {
    let n = state.active_blocks(k).len();
    n * n.saturating_sub(1) / 2
}

/// One agglomeration round over the kinds marked in `allowed`: picks a
/// kind with probability proportional to its block count, and applies the
/// best candidate merge of that kind if it lowers the description length.
/// Returns the kind and, on success, the delta.
pub fn agglomerate_step(
    state: &mut LevelState<'_>,
    rng: &mut ChaCha8Rng,
    m: usize,
    allowed: &[bool; 4],
) -> Option<(usize, Option<f64>)> {
    let kind = pick_kind(state, rng, allowed)?;
    let (delta, r, s) = best_merge(state, rng, m, &[kind])?;
    if delta < 0.0 {
        merge(state, r, s);
        Some((kind, Some(delta)))
    } else {
        Some((kind, None))
    }
}

/// Greedy merging from the current state; returns the number of merges.
///
/// A kind drops out once its best candidate fails to improve `PATIENCE`
/// times in a row (once, if all its pairs were examined); any successful
/// merge brings every kind back.
pub fn agglomerate(state: &mut LevelState<'_>, rng: &mut ChaCha8Rng, m: usize) -> usize {
    let mut merges = 0;
    let mut allowed = [true; 4];
    let mut misses = [0usize; 4];
    while let Some((kind, result)) = agglomerate_step(state, rng, m, &allowed) {
        match result {
            Some(_) => {
                merges += 1;
                allowed = [true; 4];
                misses = [0; 4];
            }
            None => {
                misses[kind] += 1;
                if misses[kind] >= PATIENCE || pair_count(state, kind) <= m {
                    allowed[kind] = false;
                }
            }
        }
    }
    merges
}

/// Merges regardless of cost until every kind has at most `target` blocks.
fn agglomerate_to(state: &mut LevelState<'_>, rng: &mut ChaCha8Rng, m: usize, target: [usize; 4]) {
    loop {
        let kinds: Vec<usize> = (0..4)
            .filter(|&k| state.active_blocks(k).len() > target[k])
            .collect();
        if kinds.is_empty() {
            break;
        }
        match best_merge(state, rng, m, &kinds) {
            Some((_, r, s)) => merge(state, r, s),
            None => break,
        }
    }
}

/// One Metropolis sweep over all nodes in random order; returns the
/// number of accepted moves that changed the state.
pub fn sweep(state: &mut LevelState<'_>, rng: &mut ChaCha8Rng, temperature: f64) -> usize {
    let graph = state.graph();
    let mut order: Vec<u32> = (0..graph.n_nodes() as u32).collect();
    order.shuffle(rng);
    let mut moved = 0;
    for v in order {
        let k = state.kind_index(v);
        if graph.counts()[k] < 2 {
            continue;
        }
        let blocks = state.active_blocks(k);
        let j = rng.gen_range(0..=blocks.len());
        let target = if j == blocks.len() {
            Target::Fresh
        } else {
            Target::Existing(blocks[j])
        };
        let delta = state.move_delta(v, target);
        let u: f64 = rng.gen();
        if accept_move(delta, temperature, u) {
            let before = state.block_of(v);
            if state.apply_move(v, target) != before {
                moved += 1;
            }
        }
    }
    moved
}

/// Agglomeration followed by annealed sweeps on one level graph.
pub fn fit_level(
    graph: &LayeredGraph,
    config: &InferenceConfig,
    rng: &mut ChaCha8Rng,
    progress: Option<&Progress>,
) -> Level {
    let mut state = LevelState::singletons(graph);
    agglomerate(&mut state, rng, config.merge_candidates);
    if let Some(p) = progress {
        p.tick(1);
    }
    for k in 0..config.sweeps {
        sweep(
            &mut state,
            rng,
            temperature(k, config.sweeps, config.initial_temperature),
        );
        if let Some(p) = progress {
            p.tick(1);
        }
    }
    state.to_level()
}

fn units_per_level(config: &InferenceConfig) -> u64 {
    1 + config.sweeps as u64
}

/// Builds the hierarchy level by level on successive block graphs.
pub fn fit_restart(
    graph: &LayeredGraph,
    config: &InferenceConfig,
    restart: usize,
    progress: Option<&Progress>,
) -> (HierarchicalPartition, Objective) {
    let mut rng = restart_rng(config.seed, restart);
    let max_levels = config.max_levels.max(1);
    let mut levels: Vec<Level> = Vec::new();
    let mut current: Cow<'_, LayeredGraph> = Cow::Borrowed(graph);
    let mut used = 0u64;
    loop {
        let l = levels.len();
        let items = current.counts();
        if l + 1 >= max_levels || items.iter().all(|&n| n <= 1) {
            levels.push(Level::collapse(items));
            break;
        }
        let mut level = fit_level(&current, config, &mut rng, progress);
        used += units_per_level(config);
        if l >= 1 {
            // a level that merges nothing, or everything, ends the hierarchy
            let stalled = level.is_top() || level.counts == items;
            if stalled && l == 1 && items.iter().any(|&n| n >= 3) {
                let mut state = LevelState::singletons(&current);
                agglomerate_to(
                    &mut state,
                    &mut rng,
                    config.merge_candidates,
                    items.map(|n| n.div_ceil(2)),
                );
                level = state.to_level();
            } else if stalled {
                levels.push(Level::collapse(items));
                break;
            }
        } else if level.is_top() {
            levels.push(level);
            break;
        }
        current = Cow::Owned(current.quotient(&level.blocks, level.counts));
        levels.push(level);
    }
    if let Some(p) = progress {
        let budget = max_levels as u64 * units_per_level(config);
        p.tick(budget.saturating_sub(used));
    }
    let mut partition = HierarchicalPartition::new(levels);
    partition.canonicalize(graph);
    let objective = description_length(graph, &partition).expect("fitted partition is valid");
    (partition, objective)
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub partition: HierarchicalPartition,
    pub objective: Objective,
    /// Index of the winning restart.
    pub restart: usize,
    pub restart_totals: Vec<f64>,
}

/// Runs all restarts in parallel and keeps the lowest total description
/// length, ties going to the lower restart index.
pub fn fit_graph(
    graph: &LayeredGraph,
    config: &InferenceConfig,
    progress: Option<&Progress>,
) -> FitResult {
    let restarts = config.restarts.max(1);
    if let Some(p) = progress {
        p.add_total(restarts as u64 * config.max_levels.max(1) as u64 * units_per_level(config));
    }
    let results: Vec<(HierarchicalPartition, Objective)> = (0..restarts)
        .into_par_iter()
        .map(|r| fit_restart(graph, config, r, progress))
        .collect();
    let restart_totals: Vec<f64> = results.iter().map(|(_, o)| o.total).collect();
    let mut best = 0;
    for (i, &t) in restart_totals.iter().enumerate() {
        if t < restart_totals[best] {
            best = i;
        }
    }
    let (partition, objective) = results.into_iter().nth(best).expect("at least one restart");
    FitResult {
        partition,
        objective,
        restart: best,
        restart_totals,
    }
}

pub fn fit_hierarchy(
    network: &ContractedNetwork,
    config: &InferenceConfig,
) -> (HierarchicalPartition, Objective) {
    let r = fit_graph(network.graph(), config, None);
    (r.partition, r.objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multinet::Edge;

    fn planted(rng: &mut ChaCha8Rng, nw: usize, nd: usize, tokens: usize) -> LayeredGraph {
        let mut text = Vec::new();
        for d in 0..nd {
            let g = d * 2 / nd;
            for _ in 0..tokens {
                let same = rng.gen_bool(10.0 / 11.0);
                let half = nw / 2;
                let group = if same { g } else { 1 - g };
                let w = group * half + rng.gen_range(0..half);
                text.push(Edge::new(w as u32, (nw + d) as u32, 1));
            }
        }
        LayeredGraph::new([nw, nd, 0, 0], text, vec![]).unwrap()
    }

    #[test]
    fn metropolis_rule_matches_formula() {
        assert!(accept_move(-0.5, 0.0, 0.99));
        assert!(!accept_move(0.0, 0.0, 0.0));
        assert!(!accept_move(1.0, 0.0, 0.0));
        let p = (-2.0f64 / 0.5).exp();
        assert!(accept_move(2.0, 0.5, p - 1e-12));
        assert!(!accept_move(2.0, 0.5, p + 1e-12));
        assert!(accept_move(0.0, 1.0, 0.999));
    }

    #[test]
    fn schedule_is_linear_to_zero() {
        assert_eq!(temperature(0, 5, 1.0), 1.0);
        assert_eq!(temperature(2, 5, 1.0), 0.5);
        assert_eq!(temperature(4, 5, 1.0), 0.0);
        assert_eq!(temperature(0, 1, 1.0), 0.0);
    }

    #[test]
    fn degenerate_network_is_one_level() {
        let g = LayeredGraph::new([1, 1, 0, 0], vec![Edge::new(0, 1, 3)], vec![]).unwrap();
        let r = fit_graph(&g, &InferenceConfig::default(), None);
        assert_eq!(r.partition.depth(), 1);
        assert_eq!(r.partition.levels[0].counts, [1, 1, 0, 0]);
    }

    #[test]
    fn greedy_phases_never_increase_dl() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = planted(&mut rng, 40, 20, 20);
        let mut state = LevelState::singletons(&g);
        let mut last = state.description_length();
        while let Some((_, Some(delta))) = agglomerate_step(&mut state, &mut rng, 20, &[true; 4]) {
            assert!(delta < 0.0);
            let now = state.description_length();
            assert!(now <= last + 1e-9);
            last = now;
        }
        for _ in 0..3 {
            sweep(&mut state, &mut rng, 0.0);
            let now = state.description_length();
            assert!(now <= last + 1e-9);
            last = now;
        }
    }

    #[test]
    fn fit_is_reproducible_and_hierarchical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = planted(&mut rng, 60, 30, 30);
        let cfg = InferenceConfig {
            seed: 11,
            restarts: 2,
            sweeps: 10,
            ..InferenceConfig::default()
        };
        let a = fit_graph(&g, &cfg, None);
        let b = fit_graph(&g, &cfg, None);
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.objective.total, b.objective.total);
        a.partition.validate(&g).unwrap();
        assert!(a.partition.is_complete());
        assert!(a.partition.depth() >= 2);
        assert_eq!(a.partition.levels[0].counts[0], 2);
    }

    #[test]
    fn progress_reaches_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = planted(&mut rng, 20, 10, 10);
        let p = Progress::new();
        let cfg = InferenceConfig {
            restarts: 2,
            sweeps: 3,
            ..InferenceConfig::default()
        };
        fit_graph(&g, &cfg, Some(&p));
        assert_eq!(p.fraction(), 1.0);
    }
}
