//! Independent Cascade diffusion: edge probabilities from interaction
//! weights, Monte Carlo spread estimation and an exact enumeration oracle
//! for small graphs.
//!
//! Every Monte Carlo sample is a live-edge world: the coin for edge `e` in
//! sample `i` is a pure function of `(master_seed, i, e)`. Estimates are
//! therefore independent of the traversal order and of how samples are
//! spread over threads, and two seed sets evaluated with the same master
//! seed see the same worlds.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Gender, InteractionGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbabilityMode {
    /// p(i -> j) = w(i -> j) / interactions received by i.
    #[default]
    Literal,
    /// p(i -> j) = w(i -> j) / interactions received by j.
    WeightedCascade,
}

impl ProbabilityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbabilityMode::Literal => "literal",
            ProbabilityMode::WeightedCascade => "weighted-cascade",
        }
    }
}

impl fmt::Display for ProbabilityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProbabilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(ProbabilityMode::Literal),
            "weighted-cascade" => Ok(ProbabilityMode::WeightedCascade),
            _ => Err(Error::InvalidParameter(format!("unknown probability mode `{s}`"))),
        }
    }
}

/// Directed graph with an activation probability per edge, in CSR form.
#[derive(Debug, Clone)]
pub struct ProbGraph {
    ids: Arc<[String]>,
    genders: Vec<Gender>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    probs: Vec<f64>,
    mode: Option<ProbabilityMode>,
}

impl ProbGraph {
    /// Build from explicit `(src, dst, p)` triples over nodes `0..genders.len()`.
    /// Probabilities are clamped to [0, 1]; parallel edges are kept.
    pub fn from_edges(genders: Vec<Gender>, mut edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = genders.len();
        if let Some(&(u, v, _)) = edges.iter().find(|&&(u, v, _)| u >= n || v >= n) {
            return Err(Error::InvalidParameter(format!("edge {u}->{v} outside 0..{n}")));
        }
        edges.sort_by_key(|e| (e.0, e.1));
        let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        Ok(Self::assemble(ids.into(), genders, &edges, None))
    }

    fn assemble(ids: Arc<[String]>, genders: Vec<Gender>, edges: &[(usize, usize, f64)], mode: Option<ProbabilityMode>) -> Self {
        let n = genders.len();
        let mut offsets = vec![0usize; n + 1];
        for &(u, _, _) in edges {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = edges.iter().map(|e| e.1).collect();
        let probs = edges
            .iter()
            .map(|e| if e.2.is_nan() { 0.0 } else { e.2.clamp(0.0, 1.0) })
            .collect();
        ProbGraph {
            ids,
            genders,
            offsets,
            targets,
            probs,
            mode,
        }
    }

    pub fn node_count(&self) -> usize {
        self.genders.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn mode(&self) -> Option<ProbabilityMode> {
        self.mode
    }

    pub fn ids(&self) -> &Arc<[String]> {
        &self.ids
    }

    pub fn gender(&self, v: usize) -> Gender {
        self.genders[v]
    }

    pub fn genders(&self) -> &[Gender] {
        &self.genders
    }

    /// `(edge index, target, probability)` of `v`'s outgoing edges.
    pub fn out_edges(&self, v: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (self.offsets[v]..self.offsets[v + 1]).map(move |e| (e, self.targets[e], self.probs[e]))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count()).flat_map(move |u| self.out_edges(u).map(move |(_, v, p)| (u, v, p)))
    }

    pub fn probability(&self, u: usize, v: usize) -> Option<f64> {
        self.out_edges(u).find(|&(_, t, _)| t == v).map(|(_, _, p)| p)
    }

    fn check_seeds(&self, seeds: &[usize]) -> Result<Vec<usize>> {
        if seeds.is_empty() {
            return Err(Error::InvalidParameter("seed set is empty".into()));
        }
        if let Some(&s) = seeds.iter().find(|&&s| s >= self.node_count()) {
            return Err(Error::NodeNotFound(format!("#{s}")));
        }
        let mut s = seeds.to_vec();
        s.sort_unstable();
        s.dedup();
        Ok(s)
    }
}

/// Activation probabilities derived from interaction counts. A zero
/// denominator yields probability 0.
pub fn edge_probabilities(g: &InteractionGraph, mode: ProbabilityMode) -> ProbGraph {
    let received: Vec<u64> = (0..g.node_count()).map(|v| g.in_weight(v)).collect();
    let edges: Vec<(usize, usize, f64)> = g
        .edges()
        .map(|(u, v, w)| {
            let denom = match mode {
                ProbabilityMode::Literal => received[u],
                ProbabilityMode::WeightedCascade => received[v],
            };
            let p = if denom == 0 { 0.0 } else { w as f64 / denom as f64 };
            (u, v, p)
        })
        .collect();
    ProbGraph::assemble(g.ids().clone(), g.genders().to_vec(), &edges, Some(mode))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Key of Monte Carlo sample `index` under `master_seed`.
pub fn sample_key(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index ^ 0x5851_F42D_4C95_7F2D))
}

/// Uniform [0, 1) draw for `edge` in the world identified by `key`.
fn edge_coin(key: u64, edge: usize) -> f64 {
    let bits = splitmix64(key.wrapping_add(splitmix64(edge as u64)));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Reusable BFS buffers for repeated cascades on one graph.
struct Scratch {
    mark: Vec<u32>,
    epoch: u32,
    queue: Vec<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            mark: vec![0; n],
            epoch: 0,
            queue: Vec::new(),
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
    }

    /// One cascade; returns `(spread, female count)` and leaves the
    /// activated set in `self.queue`.
    fn cascade(&mut self, pg: &ProbGraph, seeds: &[usize], key: u64) -> (u32, u32) {
        self.next_epoch();
        self.queue.clear();
        for &s in seeds {
            if self.mark[s] != self.epoch {
                self.mark[s] = self.epoch;
                self.queue.push(s);
            }
        }
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head];
            head += 1;
            for (e, v, p) in pg.out_edges(u) {
                if self.mark[v] == self.epoch || p <= 0.0 {
                    continue;
                }
                if p >= 1.0 || edge_coin(key, e) < p {
                    self.mark[v] = self.epoch;
                    self.queue.push(v);
                }
            }
        }
        let female = self.queue.iter().filter(|&&v| pg.gender(v).is_female()).count();
        (self.queue.len() as u32, female as u32)
    }

    /// Nodes newly reached from `v` in world `key` when the nodes set in
    /// `active` are already activated; they are left in `self.queue`.
    fn extend(&mut self, pg: &ProbGraph, v: usize, key: u64, active: &[u64]) -> (u32, u32) {
        let is_active = |u: usize| active[u / 64] >> (u % 64) & 1 == 1;
        self.next_epoch();
        self.queue.clear();
        if is_active(v) {
            return (0, 0);
        }
        self.mark[v] = self.epoch;
        self.queue.push(v);
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head];
            head += 1;
            for (e, w, p) in pg.out_edges(u) {
                if self.mark[w] == self.epoch || p <= 0.0 || is_active(w) {
                    continue;
                }
                if p >= 1.0 || edge_coin(key, e) < p {
                    self.mark[w] = self.epoch;
                    self.queue.push(w);
                }
            }
        }
        let female = self.queue.iter().filter(|&&u| pg.gender(u).is_female()).count();
        (self.queue.len() as u32, female as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionOutcome {
    /// Activated nodes in activation order, seeds first.
    pub activated: Vec<usize>,
    pub female_count: usize,
}

impl DiffusionOutcome {
    pub fn spread(&self) -> usize {
        self.activated.len()
    }

    pub fn female_ratio(&self) -> f64 {
        self.female_count as f64 / self.activated.len() as f64
    }
}

/// A single cascade in the world identified by `rng_seed`.
pub fn simulate_ic(pg: &ProbGraph, seeds: &[usize], rng_seed: u64) -> Result<DiffusionOutcome> {
    let seeds = pg.check_seeds(seeds)?;
    let mut scratch = Scratch::new(pg.node_count());
    let (_, female) = scratch.cascade(pg, &seeds, rng_seed);
    Ok(DiffusionOutcome {
        activated: std::mem::take(&mut scratch.queue),
        female_count: female as usize,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadEstimate {
    pub mean_spread: f64,
    /// Mean over samples of the female share of activated users (seeds included).
    pub mean_female_ratio: f64,
    /// Mean number of activated females.
    pub mean_female_count: f64,
    pub std_spread: f64,
    pub num_samples: usize,
}

/// Monte Carlo estimate over `num_samples` worlds derived from `master_seed`.
pub fn estimate_spread(pg: &ProbGraph, seeds: &[usize], num_samples: usize, master_seed: u64) -> Result<SpreadEstimate> {
    if num_samples == 0 {
        return Err(Error::InvalidParameter("num_samples must be positive".into()));
    }
    let seeds = pg.check_seeds(seeds)?;
    Ok(estimate_checked(pg, &seeds, num_samples, master_seed))
}

fn estimate_checked(pg: &ProbGraph, seeds: &[usize], num_samples: usize, master_seed: u64) -> SpreadEstimate {
    let n = pg.node_count();
    let outcomes: Vec<(u32, u32)> = (0..num_samples)
        .into_par_iter()
        .with_min_len(64)
        .map_init(
            || Scratch::new(n),
            |scratch, i| scratch.cascade(pg, seeds, sample_key(master_seed, i as u64)),
        )
        .collect();

    summarize(&outcomes)
}

/// Reduce per-sample `(spread, female)` counts in sample order, so the
/// floating-point sums do not depend on scheduling.
fn summarize(outcomes: &[(u32, u32)]) -> SpreadEstimate {
    let num_samples = outcomes.len();
    let mut sum: u64 = 0;
    let mut sum_sq: u128 = 0;
    let mut female_sum: u64 = 0;
    let mut ratio_sum = 0.0;
    for &(spread, female) in outcomes {
        sum += spread as u64;
        sum_sq += (spread as u128) * (spread as u128);
        female_sum += female as u64;
        ratio_sum += female as f64 / spread as f64;
    }
    let m = num_samples as f64;
    let mean = sum as f64 / m;
    let std = if num_samples > 1 {
        // m * sum(x^2) - (sum x)^2 is exact in integers.
        let numer = num_samples as u128 * sum_sq - (sum as u128) * (sum as u128);
        (numer as f64 / (m * (m - 1.0))).sqrt()
    } else {
        0.0
    };
    SpreadEstimate {
        mean_spread: mean,
        mean_female_ratio: ratio_sum / m,
        mean_female_count: female_sum as f64 / m,
        std_spread: std,
        num_samples,
    }
}

/// Largest edge count accepted by [`exact_spread_small`].
pub const EXACT_MAX_EDGES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactSpread {
    pub mean_spread: f64,
    /// Expectation of the per-outcome female share.
    pub female_ratio: f64,
    pub mean_female_count: f64,
}

/// Exact expectations by enumerating all 2^E live-edge outcomes.
pub fn exact_spread_small(pg: &ProbGraph, seeds: &[usize]) -> Result<ExactSpread> {
    let seeds = pg.check_seeds(seeds)?;
    let edges: Vec<(usize, usize, f64)> = pg.edges().collect();
    if edges.len() > EXACT_MAX_EDGES {
        return Err(Error::TooManyEdges {
            edges: edges.len(),
            max: EXACT_MAX_EDGES,
        });
    }
    let n = pg.node_count();
    let mut live_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut active = vec![false; n];
    let mut queue = Vec::with_capacity(n);
    let (mut spread, mut ratio, mut female_count) = (0.0, 0.0, 0.0);
    for mask in 0u32..(1u32 << edges.len()) {
        let mut prob = 1.0;
        live_adj.iter_mut().for_each(Vec::clear);
        for (i, &(u, v, p)) in edges.iter().enumerate() {
            if mask & (1 << i) != 0 {
                prob *= p;
                live_adj[u].push(v);
            } else {
                prob *= 1.0 - p;
            }
        }
        if prob == 0.0 {
            continue;
        }
        active.iter_mut().for_each(|a| *a = false);
        queue.clear();
        for &s in &seeds {
            active[s] = true;
            queue.push(s);
        }
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in &live_adj[u] {
                if !active[v] {
                    active[v] = true;
                    queue.push(v);
                }
            }
        }
        let females = queue.iter().filter(|&&v| pg.gender(v).is_female()).count() as f64;
        spread += prob * queue.len() as f64;
        female_count += prob * females;
        ratio += prob * females / queue.len() as f64;
    }
    Ok(ExactSpread {
        mean_spread: spread,
        female_ratio: ratio.clamp(0.0, 1.0),
        mean_female_count: female_count,
    })
}

/// Expected influence of a seed set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Influence {
    pub spread: f64,
    pub female_count: f64,
    pub female_ratio: f64,
}

impl Influence {
    pub const NONE: Influence = Influence {
        spread: 0.0,
        female_count: 0.0,
        female_ratio: 0.0,
    };

    fn from_estimate(e: &SpreadEstimate) -> Self {
        Influence {
            spread: e.mean_spread,
            female_count: e.mean_female_count,
            female_ratio: e.mean_female_ratio,
        }
    }
}

/// Objective used by the greedy seeders.
pub trait InfluenceOracle: Sync {
    fn node_count(&self) -> usize;

    /// Expected influence of `seeds` (non-empty, valid, duplicate-free).
    fn influence(&self, seeds: &[usize]) -> Influence;

    /// An empty seed set that can be grown one node at a time.
    fn growing(&self) -> Box<dyn GrowingSet + '_>
    where
        Self: Sized,
    {
        Box::new(Reevaluate {
            oracle: self,
            seeds: Vec::new(),
            current: Influence::NONE,
        })
    }
}

/// A seed set that answers "what if `v` were added" and accepts additions.
pub trait GrowingSet {
    fn seeds(&self) -> &[usize];
    /// Influence of the current set, [`Influence::NONE`] when empty.
    fn current(&self) -> Influence;
    /// Influence of the current set plus `v`, which must not be in it.
    fn with(&mut self, v: usize) -> Influence;
    fn push(&mut self, v: usize);
}

struct Reevaluate<'a, O> {
    oracle: &'a O,
    seeds: Vec<usize>,
    current: Influence,
}

impl<O: InfluenceOracle> GrowingSet for Reevaluate<'_, O> {
    fn seeds(&self) -> &[usize] {
        &self.seeds
    }

    fn current(&self) -> Influence {
        self.current
    }

    fn with(&mut self, v: usize) -> Influence {
        self.seeds.push(v);
        let inf = self.oracle.influence(&self.seeds);
        self.seeds.pop();
        inf
    }

    fn push(&mut self, v: usize) {
        self.current = self.with(v);
        self.seeds.push(v);
    }
}

/// Monte Carlo objective over a fixed set of live-edge worlds.
pub struct MonteCarloOracle<'a> {
    pub pg: &'a ProbGraph,
    pub num_samples: usize,
    pub master_seed: u64,
}

impl InfluenceOracle for MonteCarloOracle<'_> {
    fn node_count(&self) -> usize {
        self.pg.node_count()
    }

    fn influence(&self, seeds: &[usize]) -> Influence {
        let e = estimate_checked(self.pg, seeds, self.num_samples.max(1), self.master_seed);
        Influence::from_estimate(&e)
    }

    fn growing(&self) -> Box<dyn GrowingSet + '_> {
        let m = self.num_samples.max(1);
        let words = self.pg.node_count().div_ceil(64);
        Box::new(WorldCache {
            oracle: self,
            seeds: Vec::new(),
            words,
            active: vec![0; m * words],
            counts: vec![(0, 0); m],
        })
    }
}

/// Activated sets of the current seeds in every sampled world. Since the
/// worlds are fixed, adding a seed only needs a search from the new node
/// through not-yet-active nodes.
struct WorldCache<'a> {
    oracle: &'a MonteCarloOracle<'a>,
    seeds: Vec<usize>,
    words: usize,
    /// One bitset of `words` words per sample.
    active: Vec<u64>,
    counts: Vec<(u32, u32)>,
}

impl WorldCache<'_> {
    fn key(&self, i: usize) -> u64 {
        sample_key(self.oracle.master_seed, i as u64)
    }
}

impl GrowingSet for WorldCache<'_> {
    fn seeds(&self) -> &[usize] {
        &self.seeds
    }

    fn current(&self) -> Influence {
        if self.seeds.is_empty() {
            return Influence::NONE;
        }
        Influence::from_estimate(&summarize(&self.counts))
    }

    fn with(&mut self, v: usize) -> Influence {
        let pg = self.oracle.pg;
        let this = &*self;
        let outcomes: Vec<(u32, u32)> = (0..self.counts.len())
            .into_par_iter()
            .with_min_len(64)
            .map_init(
                || Scratch::new(pg.node_count()),
                |scratch, i| {
                    let active = &this.active[i * this.words..(i + 1) * this.words];
                    let (s, f) = scratch.extend(pg, v, this.key(i), active);
                    (this.counts[i].0 + s, this.counts[i].1 + f)
                },
            )
            .collect();
        Influence::from_estimate(&summarize(&outcomes))
    }

    fn push(&mut self, v: usize) {
        let pg = self.oracle.pg;
        let master = self.oracle.master_seed;
        self.active
            .par_chunks_mut(self.words)
            .zip(self.counts.par_iter_mut())
            .enumerate()
            .with_min_len(64)
            .for_each_init(
                || Scratch::new(pg.node_count()),
                |scratch, (i, (active, count))| {
                    let (s, f) = scratch.extend(pg, v, sample_key(master, i as u64), active);
                    for &u in &scratch.queue {
                        active[u / 64] |= 1 << (u % 64);
                    }
                    count.0 += s;
                    count.1 += f;
                },
            );
        self.seeds.push(v);
    }
}

/// Exact objective by enumeration; only for graphs within [`EXACT_MAX_EDGES`].
pub struct ExactOracle<'a> {
    pg: &'a ProbGraph,
}

impl<'a> ExactOracle<'a> {
    pub fn new(pg: &'a ProbGraph) -> Result<Self> {
        if pg.edge_count() > EXACT_MAX_EDGES {
            return Err(Error::TooManyEdges {
                edges: pg.edge_count(),
                max: EXACT_MAX_EDGES,
            });
        }
        Ok(ExactOracle { pg })
    }
}

impl InfluenceOracle for ExactOracle<'_> {
    fn node_count(&self) -> usize {
        self.pg.node_count()
    }

    fn influence(&self, seeds: &[usize]) -> Influence {
        if seeds.is_empty() {
            return Influence::NONE;
        }
        let e = exact_spread_small(self.pg, seeds).expect("edge bound checked at construction");
        Influence {
            spread: e.mean_spread,
            female_count: e.mean_female_count,
            female_ratio: e.female_ratio,
        }
    }
}
