//! Node-ranking measures: intensity, degree, HI-index, Target HI-index and
//! PageRank, plus per-gender ranked views.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Gender, InteractionGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    InIntensity,
    OutIntensity,
    InDegree,
    OutDegree,
    HiIndex,
    TargetHiIndex,
    PageRank,
    EmbeddingIndex,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::InIntensity => "in-intensity",
            Measure::OutIntensity => "out-intensity",
            Measure::InDegree => "in-degree",
            Measure::OutDegree => "out-degree",
            Measure::HiIndex => "hi-index",
            Measure::TargetHiIndex => "target-hi-index",
            Measure::PageRank => "pagerank",
            Measure::EmbeddingIndex => "embedding-index",
        }
    }

    /// Whether the measure depends on a target ratio.
    pub fn is_zeta_parameterized(self) -> bool {
        matches!(self, Measure::TargetHiIndex | Measure::EmbeddingIndex)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Measure::InIntensity,
            Measure::OutIntensity,
            Measure::InDegree,
            Measure::OutDegree,
            Measure::HiIndex,
            Measure::TargetHiIndex,
            Measure::PageRank,
            Measure::EmbeddingIndex,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown measure `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

/// One score per node of the graph the table was computed on.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    measure: Measure,
    zeta: Option<f64>,
    ids: Arc<[String]>,
    scores: Vec<f64>,
}

impl ScoreTable {
    /// Table aligned with `g`'s node order.
    pub fn new(measure: Measure, zeta: Option<f64>, g: &InteractionGraph, scores: Vec<f64>) -> Self {
        assert_eq!(scores.len(), g.node_count(), "score vector must cover every node");
        ScoreTable {
            measure,
            zeta,
            ids: g.ids().clone(),
            scores,
        }
    }

    /// Table over an arbitrary id list, e.g. one read back from disk.
    pub fn from_pairs(measure: Measure, zeta: Option<f64>, pairs: Vec<(String, f64)>) -> Self {
        let (ids, scores): (Vec<String>, Vec<f64>) = pairs.into_iter().unzip();
        ScoreTable {
            measure,
            zeta,
            ids: ids.into(),
            scores,
        }
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn zeta(&self) -> Option<f64> {
        self.zeta
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.ids.iter().map(String::as_str).zip(self.scores.iter().copied())
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.ids.iter().position(|x| x == id).map(|i| self.scores[i])
    }

    /// Scores reordered to `g`'s node indices. Errors with the first graph
    /// node the table lacks.
    pub fn aligned_to(&self, g: &InteractionGraph) -> Result<Cow<'_, [f64]>> {
        if Arc::ptr_eq(&self.ids, g.ids()) || *self.ids == **g.ids() {
            return Ok(Cow::Borrowed(&self.scores));
        }
        let lookup: HashMap<&str, f64> = self.iter().collect();
        g.ids()
            .iter()
            .map(|id| {
                lookup
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::MissingScore(id.clone()))
            })
            .collect::<Result<Vec<_>>>()
            .map(Cow::Owned)
    }

    /// `node_id<TAB>score` lines sorted by node id.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut order: Vec<usize> = (0..self.ids.len()).collect();
        order.sort_by(|&a, &b| crate::graph::compare_ids(&self.ids[a], &self.ids[b]));
        for i in order {
            writeln!(out, "{}\t{}", self.ids[i], self.scores[i])?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_tsv(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn intensity(g: &InteractionGraph, direction: Direction) -> ScoreTable {
    let (measure, scores) = match direction {
        Direction::In => (
            Measure::InIntensity,
            (0..g.node_count()).map(|v| g.in_weight(v) as f64).collect(),
        ),
        Direction::Out => (
            Measure::OutIntensity,
            (0..g.node_count()).map(|v| g.out_weight(v) as f64).collect(),
        ),
    };
    ScoreTable::new(measure, None, g, scores)
}

pub fn degree(g: &InteractionGraph, direction: Direction) -> ScoreTable {
    let (measure, scores) = match direction {
        Direction::In => (
            Measure::InDegree,
            (0..g.node_count()).map(|v| g.in_edges(v).len() as f64).collect(),
        ),
        Direction::Out => (
            Measure::OutDegree,
            (0..g.node_count()).map(|v| g.out_edges(v).len() as f64).collect(),
        ),
    };
    ScoreTable::new(measure, None, g, scores)
}

/// Which one-hop neighbours count towards N(v, n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborSet {
    /// Users who interact with v (v's audience).
    #[default]
    In,
    Out,
    Undirected,
}

/// How a neighbour's activity is measured against the threshold n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivityRule {
    /// Sent plus received interactions across the whole graph.
    #[default]
    Total,
    /// Sent interactions only.
    SentOnly,
    /// Interactions with v and interactions with everyone else must each reach n.
    Separate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiIndexConfig {
    pub neighbors: NeighborSet,
    pub activity: ActivityRule,
}

/// Precomputed per-node activity so neighbour thresholds are O(degree).
pub struct NeighborActivity<'g> {
    g: &'g InteractionGraph,
    cfg: HiIndexConfig,
    activity: Vec<u64>,
}

impl<'g> NeighborActivity<'g> {
    pub fn new(g: &'g InteractionGraph, cfg: HiIndexConfig) -> Self {
        let activity = (0..g.node_count())
            .map(|v| match cfg.activity {
                ActivityRule::SentOnly => g.out_weight(v),
                ActivityRule::Total | ActivityRule::Separate => g.total_weight(v),
            })
            .collect();
        NeighborActivity { g, cfg, activity }
    }

    /// `(neighbour, activity)` pairs for `v`, each neighbour once. A
    /// neighbour passes threshold n iff its activity is >= n.
    pub fn neighbors(&self, v: usize) -> Vec<(usize, u64)> {
        let g = self.g;
        let mut nbrs: Vec<usize> = match self.cfg.neighbors {
            NeighborSet::In => g.in_edges(v).iter().map(|&(u, _)| u).collect(),
            NeighborSet::Out => g.out_edges(v).iter().map(|&(u, _)| u).collect(),
            NeighborSet::Undirected => {
                let mut all: Vec<usize> = g
                    .in_edges(v)
                    .iter()
                    .chain(g.out_edges(v))
                    .map(|&(u, _)| u)
                    .collect();
                all.sort_unstable();
                all.dedup();
                all
            }
        };
        nbrs.retain(|&u| u != v);
        nbrs.into_iter()
            .map(|u| {
                let a = match self.cfg.activity {
                    ActivityRule::Separate => {
                        let with_v = g.weight(u, v) + g.weight(v, u);
                        with_v.min(self.activity[u] - with_v)
                    }
                    _ => self.activity[u],
                };
                (u, a)
            })
            .collect()
    }

    /// (N(v, n), N^F(v, n)).
    pub fn counts(&self, v: usize, n: u64) -> (usize, usize) {
        self.neighbors(v)
            .into_iter()
            .filter(|&(_, a)| a >= n)
            .fold((0, 0), |(all, fem), (u, _)| {
                (all + 1, fem + usize::from(self.g.gender(u).is_female()))
            })
    }

    /// Largest H with N(v, H) >= H.
    pub fn h_index(&self, v: usize) -> u64 {
        let mut acts: Vec<u64> = self.neighbors(v).into_iter().map(|(_, a)| a).collect();
        acts.sort_unstable_by(|a, b| b.cmp(a));
        acts.iter()
            .enumerate()
            .take_while(|&(i, &a)| a >= (i + 1) as u64)
            .count() as u64
    }
}

/// N(v, n): neighbours of `v` whose activity is at least `n`.
pub fn neighbor_activity_count(g: &InteractionGraph, v: &str, n: u64, cfg: HiIndexConfig) -> Result<usize> {
    let v = g.require(v)?;
    Ok(NeighborActivity::new(g, cfg).counts(v, n).0)
}

/// Per-node HI-index plus the neighbour counts at that threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HiDetail {
    pub h: u64,
    pub qualifying: usize,
    pub female_qualifying: usize,
}

impl HiDetail {
    /// Female share of the qualifying neighbours; `None` when there are none.
    pub fn female_ratio(&self) -> Option<f64> {
        (self.qualifying > 0).then(|| self.female_qualifying as f64 / self.qualifying as f64)
    }
}

pub fn hi_details(g: &InteractionGraph, cfg: HiIndexConfig) -> Vec<HiDetail> {
    let act = NeighborActivity::new(g, cfg);
    (0..g.node_count())
        .into_par_iter()
        .map(|v| {
            let h = act.h_index(v);
            let (qualifying, female_qualifying) = if h == 0 { (0, 0) } else { act.counts(v, h) };
            HiDetail {
                h,
                qualifying,
                female_qualifying,
            }
        })
        .collect()
}

pub fn hi_index(g: &InteractionGraph, cfg: HiIndexConfig) -> ScoreTable {
    let act = NeighborActivity::new(g, cfg);
    let scores = (0..g.node_count())
        .into_par_iter()
        .map(|v| act.h_index(v) as f64)
        .collect();
    ScoreTable::new(Measure::HiIndex, None, g, scores)
}

/// `1 - |ratio - zeta|`, the shared target-ratio penalty.
pub fn ratio_penalty(female_ratio: f64, zeta: f64) -> f64 {
    1.0 - (female_ratio - zeta).abs()
}

pub fn check_zeta(zeta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&zeta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("zeta must be in [0,1], got {zeta}")))
    }
}

/// TH(v, zeta) = H(v) * (1 - |N^F(v,H)/N(v,H) - zeta|), and 0 when H(v) = 0.
pub fn target_hi_index(g: &InteractionGraph, zeta: f64, cfg: HiIndexConfig) -> Result<ScoreTable> {
    check_zeta(zeta)?;
    Ok(target_hi_from_details(g, &hi_details(g, cfg), zeta))
}

/// Target HI-index from precomputed details, so several targets can share one HI pass.
pub fn target_hi_from_details(g: &InteractionGraph, details: &[HiDetail], zeta: f64) -> ScoreTable {
    let scores = details
        .iter()
        .map(|d| match d.female_ratio() {
            Some(ratio) if d.h > 0 => d.h as f64 * ratio_penalty(ratio, zeta),
            _ => 0.0,
        })
        .collect();
    ScoreTable::new(Measure::TargetHiIndex, Some(zeta), g, scores)
}

#[derive(Debug, Clone, Copy)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Transition probability proportional to edge weight; otherwise uniform over out-neighbours.
    pub weighted: bool,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 200,
            weighted: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PageRankResult {
    pub table: ScoreTable,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration; dangling mass is spread uniformly. Stops when the L1
/// change drops below `tol`.
pub fn pagerank(g: &InteractionGraph, cfg: &PageRankConfig) -> Result<PageRankResult> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::InvalidParameter("pagerank of an empty graph".into()));
    }
    if !(cfg.damping > 0.0 && cfg.damping < 1.0) {
        return Err(Error::InvalidParameter(format!("damping must be in (0,1), got {}", cfg.damping)));
    }
    let out_total: Vec<f64> = (0..n)
        .map(|v| {
            if cfg.weighted {
                g.out_weight(v) as f64
            } else {
                g.out_edges(v).len() as f64
            }
        })
        .collect();

    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&v| out_total[v] == 0.0).map(|v| rank[v]).sum();
        let base = (1.0 - cfg.damping) / nf + cfg.damping * dangling / nf;
        next.par_iter_mut().enumerate().for_each(|(v, slot)| {
            let inflow: f64 = g
                .in_edges(v)
                .iter()
                .map(|&(u, w)| {
                    let share = if cfg.weighted { w as f64 } else { 1.0 };
                    rank[u] * share / out_total[u]
                })
                .sum();
            *slot = base + cfg.damping * inflow;
        });
        let delta: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    let total: f64 = rank.iter().sum();
    rank.iter_mut().for_each(|r| *r /= total);
    Ok(PageRankResult {
        table: ScoreTable::new(Measure::PageRank, None, g, rank),
        iterations,
        converged,
    })
}

pub const TIEBREAK_ASCENDING_ID: &str = "ascending-node-id";

/// Node indices of each gender, best score first.
#[derive(Debug, Clone, PartialEq)]
pub struct GenderRanking {
    pub measure: Measure,
    pub zeta: Option<f64>,
    pub females: Vec<usize>,
    pub males: Vec<usize>,
    pub tiebreak: &'static str,
}

impl GenderRanking {
    pub fn of(&self, gender: Gender) -> &[usize] {
        match gender {
            Gender::Female => &self.females,
            Gender::Male => &self.males,
        }
    }
}

/// Descending order of `scores`, ties by ascending index (= ascending id).
pub fn rank_descending(scores: &[f64], nodes: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut v: Vec<usize> = nodes.collect();
    v.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    v
}

pub fn rank_by_gender(t: &ScoreTable, g: &InteractionGraph) -> Result<GenderRanking> {
    let scores = t.aligned_to(g)?;
    Ok(GenderRanking {
        measure: t.measure(),
        zeta: t.zeta(),
        females: rank_descending(&scores, g.nodes_of(Gender::Female)),
        males: rank_descending(&scores, g.nodes_of(Gender::Male)),
        tiebreak: TIEBREAK_ASCENDING_ID,
    })
}
