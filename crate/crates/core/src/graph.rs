//! Gender-attributed interaction graphs: CSV ingestion, the inactive-user
//! filter and a synthetic generator.
//!
//! Nodes are stored in ascending id order (numeric when both ids parse as
//! integers, lexicographic otherwise), so a node's index doubles as its
//! tie-break rank everywhere else in the crate.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub const BOTH: [Gender; 2] = [Gender::Female, Gender::Male];

    /// Single-letter code used in the CSV formats.
    pub fn code(self) -> &'static str {
        match self {
            Gender::Female => "F",
            Gender::Male => "M",
        }
    }

    pub fn is_female(self) -> bool {
        self == Gender::Female
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Female => "female",
            Gender::Male => "male",
        })
    }
}

impl FromStr for Gender {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim() {
            "F" | "f" => Ok(Gender::Female),
            "M" | "m" => Ok(Gender::Male),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionType {
    Like,
    Comment,
    Tag,
}

impl InteractionType {
    pub fn as_str(self) -> &'static str {
        match self {
            InteractionType::Like => "like",
            InteractionType::Comment => "comment",
            InteractionType::Tag => "tag",
        }
    }
}

impl fmt::Display for InteractionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InteractionType {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "like" => Ok(InteractionType::Like),
            "comment" => Ok(InteractionType::Comment),
            "tag" => Ok(InteractionType::Tag),
            _ => Err(()),
        }
    }
}

/// One row of an interaction log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionRecord {
    pub sender: String,
    pub receiver: String,
    pub itype: InteractionType,
    pub timestamp: Option<i64>,
}

/// Total order on node ids: numeric if both parse as unsigned integers,
/// otherwise byte-lexicographic.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// Directed weighted graph of one interaction type.
///
/// Adjacency lists are sorted by neighbour index and hold the number of
/// interactions on that ordered pair (always >= 1).
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    itype: InteractionType,
    ids: Arc<[String]>,
    genders: Vec<Gender>,
    index: HashMap<String, usize>,
    out_adj: Vec<Vec<(usize, u64)>>,
    in_adj: Vec<Vec<(usize, u64)>>,
    edge_count: usize,
}

impl InteractionGraph {
    pub fn itype(&self) -> InteractionType {
        self.itype
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &Arc<[String]> {
        &self.ids
    }

    pub fn id(&self, v: usize) -> &str {
        &self.ids[v]
    }

    pub fn gender(&self, v: usize) -> Gender {
        self.genders[v]
    }

    pub fn genders(&self) -> &[Gender] {
        &self.genders
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::NodeNotFound(id.to_string()))
    }

    pub fn out_edges(&self, v: usize) -> &[(usize, u64)] {
        &self.out_adj[v]
    }

    pub fn in_edges(&self, v: usize) -> &[(usize, u64)] {
        &self.in_adj[v]
    }

    /// Weight of `u -> v`, 0 when absent.
    pub fn weight(&self, u: usize, v: usize) -> u64 {
        let adj = &self.out_adj[u];
        adj.binary_search_by_key(&v, |&(t, _)| t)
            .map(|i| adj[i].1)
            .unwrap_or(0)
    }

    pub fn out_weight(&self, v: usize) -> u64 {
        self.out_adj[v].iter().map(|&(_, w)| w).sum()
    }

    pub fn in_weight(&self, v: usize) -> u64 {
        self.in_adj[v].iter().map(|&(_, w)| w).sum()
    }

    /// Sent plus received interactions of `v`.
    pub fn total_weight(&self, v: usize) -> u64 {
        self.out_weight(v) + self.in_weight(v)
    }

    pub fn total_edge_weight(&self) -> u64 {
        (0..self.node_count()).map(|v| self.out_weight(v)).sum()
    }

    /// All edges as `(sender, receiver, weight)`, ordered by sender then receiver.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, adj)| adj.iter().map(move |&(v, w)| (u, v, w)))
    }

    pub fn nodes_of(&self, gender: Gender) -> impl Iterator<Item = usize> + '_ {
        self.genders
            .iter()
            .enumerate()
            .filter(move |(_, &g)| g == gender)
            .map(|(v, _)| v)
    }

    pub fn count_of(&self, gender: Gender) -> usize {
        self.genders.iter().filter(|&&g| g == gender).count()
    }

    /// Write the graph as a `nodes.csv` / `edges.csv` pair. Each unit of
    /// edge weight becomes one interaction row, so loading the files back
    /// reproduces the graph.
    pub fn write_csv(&self, nodes_path: &Path, edges_path: &Path) -> Result<()> {
        let mut nodes = csv::Writer::from_path(nodes_path).map_err(|e| csv_io(nodes_path, e))?;
        nodes
            .write_record(["id", "gender"])
            .map_err(|e| csv_io(nodes_path, e))?;
        for v in 0..self.node_count() {
            nodes
                .write_record([self.id(v), self.gender(v).code()])
                .map_err(|e| csv_io(nodes_path, e))?;
        }
        nodes.flush().map_err(|e| Error::io(nodes_path, e))?;

        let file = std::fs::File::create(edges_path).map_err(|e| Error::io(edges_path, e))?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "sender,receiver,type,timestamp").map_err(|e| Error::io(edges_path, e))?;
        let itype = self.itype.as_str();
        for (u, v, w) in self.edges() {
            for _ in 0..w {
                writeln!(out, "{},{},{},", self.id(u), self.id(v), itype)
                    .map_err(|e| Error::io(edges_path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(edges_path, e))?;
        Ok(())
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Malformed {
            path: path.to_path_buf(),
            line: 0,
            column: String::new(),
            message: format!("{other:?}"),
        },
    }
}

/// Incremental constructor; node ids are re-sorted on [`GraphBuilder::build`].
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    itype: InteractionType,
    nodes: Vec<(String, Gender)>,
    index: HashMap<String, usize>,
    edges: BTreeMap<(usize, usize), u64>,
    keep_self_loops: bool,
}

impl GraphBuilder {
    pub fn new(itype: InteractionType) -> Self {
        GraphBuilder {
            itype,
            nodes: Vec::new(),
            index: HashMap::new(),
            edges: BTreeMap::new(),
            keep_self_loops: false,
        }
    }

    pub fn keep_self_loops(mut self, keep: bool) -> Self {
        self.keep_self_loops = keep;
        self
    }

    /// Returns false if the id was already present.
    pub fn add_node(&mut self, id: &str, gender: Gender) -> bool {
        if self.index.contains_key(id) {
            return false;
        }
        self.index.insert(id.to_string(), self.nodes.len());
        self.nodes.push((id.to_string(), gender));
        true
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Adds `count` interactions from `sender` to `receiver`. Returns
    /// `Ok(false)` when the pair is a self-interaction that was dropped.
    pub fn add_interactions(&mut self, sender: &str, receiver: &str, count: u64) -> Result<bool> {
        let s = *self
            .index
            .get(sender)
            .ok_or_else(|| Error::NodeNotFound(sender.to_string()))?;
        let r = *self
            .index
            .get(receiver)
            .ok_or_else(|| Error::NodeNotFound(receiver.to_string()))?;
        Ok(self.add_by_index(s, r, count))
    }

    fn add_by_index(&mut self, s: usize, r: usize, count: u64) -> bool {
        if s == r && !self.keep_self_loops {
            return false;
        }
        if count > 0 {
            *self.edges.entry((s, r)).or_insert(0) += count;
        }
        true
    }

    pub fn build(self) -> InteractionGraph {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| compare_ids(&self.nodes[a].0, &self.nodes[b].0));
        let mut remap = vec![0usize; order.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }

        let n = order.len();
        let mut ids = Vec::with_capacity(n);
        let mut genders = Vec::with_capacity(n);
        for &old in &order {
            ids.push(self.nodes[old].0.clone());
            genders.push(self.nodes[old].1);
        }

        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (&(s, r), &w) in &self.edges {
            out_adj[remap[s]].push((remap[r], w));
            in_adj[remap[r]].push((remap[s], w));
        }
        for adj in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            adj.sort_unstable_by_key(|&(t, _)| t);
        }

        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        InteractionGraph {
            itype: self.itype,
            ids: ids.into(),
            genders,
            index,
            out_adj,
            in_adj,
            edge_count: self.edges.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub keep_self_loops: bool,
}

/// Read a `nodes.csv` (`id,gender`) and `edges.csv`
/// (`sender,receiver,type,timestamp`) pair, keeping only records of `itype`.
pub fn load_interactions(
    nodes_path: &Path,
    edges_path: &Path,
    itype: InteractionType,
    opts: LoadOptions,
) -> Result<InteractionGraph> {
    let mut builder = GraphBuilder::new(itype).keep_self_loops(opts.keep_self_loops);

    let mut nodes = open_csv(nodes_path)?;
    check_header(&mut nodes, nodes_path, &["id", "gender"])?;
    for row in nodes.records() {
        let row = row.map_err(|e| csv_error(nodes_path, e))?;
        let line = line_of(&row);
        let id = field(&row, 0, "id", nodes_path)?;
        let gender_str = field(&row, 1, "gender", nodes_path)?;
        if row.len() > 2 {
            return Err(malformed(nodes_path, line, "gender", format!("expected 2 fields, found {}", row.len())));
        }
        let gender = gender_str.parse().map_err(|_| Error::UnknownGender {
            path: nodes_path.to_path_buf(),
            line,
            value: gender_str.to_string(),
        })?;
        if !builder.add_node(id, gender) {
            return Err(Error::DuplicateNode {
                path: nodes_path.to_path_buf(),
                line,
                id: id.to_string(),
            });
        }
    }

    let mut edges = open_csv(edges_path)?;
    check_header(&mut edges, edges_path, &["sender", "receiver", "type", "timestamp"])?;
    let mut dropped = 0usize;
    for row in edges.records() {
        let row = row.map_err(|e| csv_error(edges_path, e))?;
        let record = parse_edge_row(&row, edges_path)?;
        let line = line_of(&row);
        for id in [&record.sender, &record.receiver] {
            if !builder.contains(id) {
                return Err(Error::UnknownNode {
                    path: edges_path.to_path_buf(),
                    line,
                    id: id.clone(),
                });
            }
        }
        if record.itype != itype {
            continue;
        }
        if !builder.add_interactions(&record.sender, &record.receiver, 1)? {
            dropped += 1;
        }
    }
    if dropped > 0 {
        log::debug!("{}: dropped {dropped} self-interaction(s)", edges_path.display());
    }
    Ok(builder.build())
}

fn parse_edge_row(row: &csv::StringRecord, path: &Path) -> Result<InteractionRecord> {
    let line = line_of(row);
    if row.len() < 3 || row.len() > 4 {
        let column = if row.len() < 3 { ["sender", "receiver", "type"][row.len().min(2)] } else { "timestamp" };
        return Err(malformed(path, line, column, format!("expected 3 or 4 fields, found {}", row.len())));
    }
    let sender = field(row, 0, "sender", path)?.to_string();
    let receiver = field(row, 1, "receiver", path)?.to_string();
    let type_str = field(row, 2, "type", path)?;
    let itype = type_str
        .parse()
        .map_err(|_| malformed(path, line, "type", format!("unknown interaction type `{type_str}`")))?;
    let timestamp = match row.get(3).map(str::trim) {
        None | Some("") => None,
        Some(ts) => Some(
            ts.parse::<i64>()
                .map_err(|_| malformed(path, line, "timestamp", format!("not an integer: `{ts}`")))?,
        ),
    };
    Ok(InteractionRecord {
        sender,
        receiver,
        itype,
        timestamp,
    })
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn check_header(reader: &mut csv::Reader<std::fs::File>, path: &Path, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    for (i, want) in expected.iter().enumerate() {
        match header.get(i) {
            Some(got) if got.eq_ignore_ascii_case(want) => {}
            got => {
                return Err(malformed(
                    path,
                    1,
                    want,
                    format!("expected header `{}`, found `{}`", expected.join(","), got.unwrap_or("")),
                ))
            }
        }
    }
    Ok(())
}

fn line_of(row: &csv::StringRecord) -> u64 {
    row.position().map(|p| p.line()).unwrap_or(0)
}

fn field<'r>(row: &'r csv::StringRecord, i: usize, column: &str, path: &Path) -> Result<&'r str> {
    match row.get(i) {
        Some(s) if !s.is_empty() => Ok(s),
        Some(_) => Err(malformed(path, line_of(row), column, "empty value".into())),
        None => Err(malformed(path, line_of(row), column, format!("missing field (row has {} fields)", row.len()))),
    }
}

fn malformed(path: &Path, line: u64, column: &str, message: String) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        message,
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::Utf8 { err, .. } => Error::Malformed {
            path: path.to_path_buf(),
            line,
            column: format!("#{}", err.field() + 1),
            message: "invalid UTF-8".into(),
        },
        other => Error::Malformed {
            path: path.to_path_buf(),
            line,
            column: String::new(),
            message: format!("{other:?}"),
        },
    }
}

/// Drop every node whose sent + received interaction count is below
/// `min_total`, together with its edges. Removal is repeated until no node
/// falls under the threshold, so the result is a fixed point.
pub fn filter_inactive(g: &InteractionGraph, min_total: u64) -> InteractionGraph {
    let n = g.node_count();
    let mut alive = vec![true; n];
    let mut totals: Vec<u64> = (0..n).map(|v| g.total_weight(v)).collect();
    let mut queue: Vec<usize> = (0..n).filter(|&v| totals[v] < min_total).collect();
    while let Some(v) = queue.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &(u, w) in g.out_edges(v).iter().chain(g.in_edges(v)) {
            if alive[u] && u != v {
                let before = totals[u];
                totals[u] -= w;
                if before >= min_total && totals[u] < min_total {
                    queue.push(u);
                }
            }
        }
    }
    subgraph(g, &alive)
}

/// Induced subgraph on the nodes with `keep[v]`.
pub fn subgraph(g: &InteractionGraph, keep: &[bool]) -> InteractionGraph {
    let mut b = GraphBuilder::new(g.itype()).keep_self_loops(true);
    for v in (0..g.node_count()).filter(|&v| keep[v]) {
        b.add_node(g.id(v), g.gender(v));
    }
    for (u, v, w) in g.edges() {
        if keep[u] && keep[v] {
            let (su, sv) = (b.index[g.id(u)], b.index[g.id(v)]);
            b.add_by_index(su, sv, w);
        }
    }
    b.build()
}

/// Parameters of the gender-biased preferential-attachment generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticGraphParams {
    pub n: usize,
    pub female_fraction: f64,
    /// Probability that an edge is restricted to same-gender partners.
    pub homophily: f64,
    /// Partners are drawn with probability proportional to `(degree + 1)^exponent`.
    pub attachment_exponent: f64,
    /// Mean of the geometric (support >= 1) edge-weight distribution.
    pub mean_intensity: f64,
    /// Edges attempted per arriving node.
    pub edges_per_node: usize,
    pub rng_seed: u64,
}

impl Default for SyntheticGraphParams {
    fn default() -> Self {
        SyntheticGraphParams {
            n: 2000,
            female_fraction: 0.5,
            homophily: 0.6,
            attachment_exponent: 1.0,
            mean_intensity: 2.0,
            edges_per_node: 4,
            rng_seed: 7,
        }
    }
}

impl SyntheticGraphParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if !(0.0..=1.0).contains(&self.female_fraction) {
            return bad(format!("female_fraction must be in [0,1], got {}", self.female_fraction));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return bad(format!("homophily must be in [0,1], got {}", self.homophily));
        }
        if !(self.attachment_exponent >= 0.0 && self.attachment_exponent.is_finite()) {
            return bad(format!("attachment_exponent must be >= 0, got {}", self.attachment_exponent));
        }
        if !(self.mean_intensity >= 1.0 && self.mean_intensity.is_finite()) {
            return bad(format!("mean_intensity must be >= 1, got {}", self.mean_intensity));
        }
        Ok(())
    }
}

/// Fenwick tree over non-negative weights with prefix-sum sampling.
struct WeightTree {
    tree: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

impl WeightTree {
    fn new(n: usize) -> Self {
        WeightTree {
            tree: vec![0.0; n + 1],
            weights: vec![0.0; n],
            total: 0.0,
        }
    }

    fn set(&mut self, i: usize, w: f64) {
        let delta = w - self.weights[i];
        self.weights[i] = w;
        self.total += delta;
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    /// Index `i` such that prefix(i) <= target < prefix(i + 1).
    fn find(&self, mut target: f64) -> usize {
        let n = self.weights.len();
        let mut pos = 0usize;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        // Rounding can land on a zero-weight slot; fall back to the nearest positive one.
        let mut i = pos.min(n - 1);
        while self.weights[i] <= 0.0 && i > 0 {
            i -= 1;
        }
        while self.weights[i] <= 0.0 && i + 1 < n {
            i += 1;
        }
        i
    }
}

/// Pair of per-gender trees so draws can be restricted to one gender.
struct GenderPools {
    trees: [WeightTree; 2],
}

impl GenderPools {
    fn new(n: usize) -> Self {
        GenderPools {
            trees: [WeightTree::new(n), WeightTree::new(n)],
        }
    }

    fn slot(g: Gender) -> usize {
        g as usize
    }

    fn set(&mut self, g: Gender, i: usize, w: f64) {
        self.trees[Self::slot(g)].set(i, w);
    }

    fn sample<R: Rng>(&self, rng: &mut R, only: Option<Gender>) -> Option<usize> {
        let tree = match only {
            Some(g) => &self.trees[Self::slot(g)],
            None => {
                let total = self.trees[0].total + self.trees[1].total;
                if total <= 0.0 {
                    return None;
                }
                let u = rng.random::<f64>() * total;
                return Some(if u < self.trees[0].total {
                    self.trees[0].find(u)
                } else {
                    self.trees[1].find(u - self.trees[0].total)
                });
            }
        };
        if tree.total <= 0.0 {
            return None;
        }
        Some(tree.find(rng.random::<f64>() * tree.total))
    }
}

/// Grow a graph one node at a time. Each arrival attempts `edges_per_node`
/// edges; each edge either goes out to an existing node (chosen by in-degree
/// preference) or comes in from one (chosen by out-degree preference), and
/// with probability `homophily` the partner is restricted to the arrival's
/// gender. Ids are `0..n`.
pub fn generate_synthetic(p: &SyntheticGraphParams) -> Result<InteractionGraph> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    let n = p.n;

    let females = (p.female_fraction * n as f64).round() as usize;
    let mut genders: Vec<Gender> = (0..n)
        .map(|i| if i < females { Gender::Female } else { Gender::Male })
        .collect();
    genders.shuffle(&mut rng);

    let weight_dist = Geometric::new(1.0 / p.mean_intensity)
        .map_err(|e| Error::InvalidParameter(format!("mean_intensity: {e}")))?;
    let attach = |deg: u64| ((deg + 1) as f64).powf(p.attachment_exponent);

    let mut b = GraphBuilder::new(InteractionType::Like);
    for (i, &g) in genders.iter().enumerate() {
        b.add_node(&i.to_string(), g);
    }

    let mut in_deg = vec![0u64; n];
    let mut out_deg = vec![0u64; n];
    // Targets are drawn by in-degree, senders by out-degree.
    let mut target_pool = GenderPools::new(n);
    let mut sender_pool = GenderPools::new(n);
    target_pool.set(genders[0], 0, attach(0));
    sender_pool.set(genders[0], 0, attach(0));

    for t in 1..n {
        let g = genders[t];
        for _ in 0..p.edges_per_node {
            let outgoing = rng.random_bool(0.5);
            let only = rng.random_bool(p.homophily).then_some(g);
            let pool = if outgoing { &target_pool } else { &sender_pool };
            let Some(partner) = pool.sample(&mut rng, only) else {
                continue;
            };
            let (s, r) = if outgoing { (t, partner) } else { (partner, t) };
            let w = 1 + weight_dist.sample(&mut rng);
            b.add_by_index(s, r, w);
            out_deg[s] += 1;
            in_deg[r] += 1;
            if s != t {
                sender_pool.set(genders[s], s, attach(out_deg[s]));
            }
            if r != t {
                target_pool.set(genders[r], r, attach(in_deg[r]));
            }
        }
        target_pool.set(g, t, attach(in_deg[t]));
        sender_pool.set(g, t, attach(out_deg[t]));
    }
    Ok(b.build())
}
