//! Externally trained per-node influence scores and the Embedding index
//! built on them.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::centrality::{check_zeta, ratio_penalty, HiIndexConfig, Measure, NeighborActivity, ScoreTable};
use crate::error::{Error, Result};
use crate::graph::InteractionGraph;

/// Influence score in [0, 1] for every node of a graph, in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceScores {
    scores: Vec<f64>,
    /// Rows naming nodes that are not in the graph.
    pub ignored_extra: usize,
}

impl InfluenceScores {
    pub fn from_vec(g: &InteractionGraph, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != g.node_count() {
            return Err(Error::InvalidParameter(format!(
                "expected {} scores, got {}",
                g.node_count(),
                scores.len()
            )));
        }
        if let Some((v, s)) = scores.iter().enumerate().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidParameter(format!("score {s} of node {} outside [0,1]", g.id(v))));
        }
        Ok(InfluenceScores {
            scores,
            ignored_extra: 0,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, v: usize) -> f64 {
        self.scores[v]
    }
}

/// Read a `node_id<TAB>score` file and check it covers `g`.
pub fn load_scores(path: &Path, g: &InteractionGraph) -> Result<InfluenceScores> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_scores(std::io::BufReader::new(file), path, g)
}

pub fn parse_scores<R: BufRead>(reader: R, path: &Path, g: &InteractionGraph) -> Result<InfluenceScores> {
    let malformed = |line: u64, column: &str, message: String| Error::Malformed {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        message,
    };
    let mut found: HashMap<usize, f64> = HashMap::with_capacity(g.node_count());
    let mut extra = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(raw), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(malformed(lineno, "score", "expected `node_id<TAB>score`".into()));
        };
        if id.is_empty() {
            return Err(malformed(lineno, "node_id", "empty node id".into()));
        }
        let score: f64 = raw
            .trim()
            .parse()
            .map_err(|_| malformed(lineno, "score", format!("not a number: `{raw}`")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::ScoreOutOfRange {
                path: path.to_path_buf(),
                line: lineno,
                value: score,
            });
        }
        match g.index_of(id) {
            Some(v) => {
                if found.insert(v, score).is_some() {
                    return Err(malformed(lineno, "node_id", format!("duplicate node {id}")));
                }
            }
            None => extra += 1,
        }
    }
    let missing: Vec<String> = (0..g.node_count())
        .filter(|v| !found.contains_key(v))
        .map(|v| g.id(v).to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingScores {
            count: missing.len(),
            ids: missing,
        });
    }
    if extra > 0 {
        log::warn!("{}: ignored {extra} score(s) for nodes not in the graph", path.display());
    }
    Ok(InfluenceScores {
        scores: (0..g.node_count()).map(|v| found[&v]).collect(),
        ignored_extra: extra,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingIndexConfig {
    /// Activity threshold n used for the neighbour female ratio.
    pub n_threshold: u64,
    pub zeta: f64,
    pub hi: HiIndexConfig,
}

impl EmbeddingIndexConfig {
    pub fn new(zeta: f64) -> Self {
        EmbeddingIndexConfig {
            n_threshold: 3,
            zeta,
            hi: HiIndexConfig::default(),
        }
    }
}

/// EI(v) = s_v * D_in(v) * (1 - |N^F(v,n)/N(v,n) - zeta|), and 0 when N(v, n) = 0.
pub fn embedding_index(g: &InteractionGraph, sc: &InfluenceScores, cfg: &EmbeddingIndexConfig) -> Result<ScoreTable> {
    check_zeta(cfg.zeta)?;
    if cfg.n_threshold == 0 {
        return Err(Error::InvalidParameter("n_threshold must be at least 1".into()));
    }
    if sc.scores.len() != g.node_count() {
        return Err(Error::InvalidParameter("influence scores do not match the graph".into()));
    }
    let act = NeighborActivity::new(g, cfg.hi);
    let scores = (0..g.node_count())
        .map(|v| {
            let (all, female) = act.counts(v, cfg.n_threshold);
            if all == 0 {
                return 0.0;
            }
            let ratio = female as f64 / all as f64;
            sc.get(v) * g.in_edges(v).len() as f64 * ratio_penalty(ratio, cfg.zeta)
        })
        .collect();
    Ok(ScoreTable::new(Measure::EmbeddingIndex, Some(cfg.zeta), g, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Gender, GraphBuilder, InteractionType};
    use approx::assert_abs_diff_eq;

    /// `hub` has ten in-neighbours (five female), each with activity >= 3.
    fn hub_graph() -> InteractionGraph {
        let mut b = GraphBuilder::new(InteractionType::Like);
        b.add_node("hub", Gender::Male);
        b.add_node("iso", Gender::Female);
        for i in 0..10 {
            let id = format!("f{i}");
            b.add_node(&id, if i % 2 == 0 { Gender::Female } else { Gender::Male });
            b.add_interactions(&id, "hub", 3).unwrap();
        }
        b.build()
    }

    fn tsv(g: &InteractionGraph, f: impl Fn(&str) -> f64) -> String {
        g.ids().iter().map(|id| format!("{id}\t{}\n", f(id))).collect()
    }

    fn parse(g: &InteractionGraph, body: &str) -> Result<InfluenceScores> {
        parse_scores(body.as_bytes(), Path::new("scores.tsv"), g)
    }

    #[test]
    fn loads_full_coverage() {
        let g = hub_graph();
        let body = tsv(&g, |_| 0.5) + "ghost\t0.1\n";
        let sc = parse(&g, &body).unwrap();
        assert_eq!(sc.ignored_extra, 1);
        assert!(sc.scores().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn missing_node_named() {
        let g = hub_graph();
        let body: String = tsv(&g, |_| 0.5).lines().filter(|l| !l.starts_with("iso")).map(|l| format!("{l}\n")).collect();
        match parse(&g, &body) {
            Err(Error::MissingScores { ids, count: 1 }) => assert_eq!(ids, vec!["iso".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_and_malformed() {
        let g = hub_graph();
        let body = tsv(&g, |id| if id == "hub" { 1.5 } else { 0.2 });
        assert!(matches!(parse(&g, &body), Err(Error::ScoreOutOfRange { value, .. }) if value == 1.5));
        let err = parse(&g, "hub\t0.5\nf0 0.3\n").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }), "{err}");
        let err = parse(&g, "hub\tabc\n").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }));
    }

    #[test]
    fn embedding_index_examples() {
        let g = hub_graph();
        let sc = InfluenceScores::from_vec(&g, vec![0.5; g.node_count()]).unwrap();
        let hub = g.require("hub").unwrap();
        let iso = g.require("iso").unwrap();

        let t = embedding_index(&g, &sc, &EmbeddingIndexConfig::new(0.5)).unwrap();
        assert_abs_diff_eq!(t.scores()[hub], 5.0, epsilon = 1e-12);
        assert_eq!(t.scores()[iso], 0.0);
        assert!(embedding_index(&g, &sc, &EmbeddingIndexConfig::new(1.5)).is_err());
    }

    #[test]
    fn embedding_index_maximal_penalty() {
        // All qualifying neighbours male, target fully female.
        let mut b = GraphBuilder::new(InteractionType::Like);
        b.add_node("hub", Gender::Female);
        for i in 0..10 {
            let id = format!("m{i}");
            b.add_node(&id, Gender::Male);
            b.add_interactions(&id, "hub", 4).unwrap();
        }
        let g = b.build();
        let sc = InfluenceScores::from_vec(&g, vec![0.5; g.node_count()]).unwrap();
        let t = embedding_index(&g, &sc, &EmbeddingIndexConfig::new(1.0)).unwrap();
        assert_eq!(t.scores()[g.require("hub").unwrap()], 0.0);
    }

    #[test]
    fn score_table_round_trip() {
        let g = hub_graph();
        let vals: Vec<f64> = (0..g.node_count()).map(|v| (v as f64 * 0.1234567890123).fract()).collect();
        let table = ScoreTable::new(Measure::EmbeddingIndex, None, &g, vals.clone());
        let mut buf = Vec::new();
        table.write_tsv(&mut buf).unwrap();
        let sc = parse_scores(buf.as_slice(), Path::new("x"), &g).unwrap();
        assert_eq!(sc.scores(), vals.as_slice());
    }
}
