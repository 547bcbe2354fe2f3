//! Per-gender CCDFs, Mann-Whitney U tests over top percentiles, and the
//! glass-ceiling summary grid.

use std::io::Write;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::centrality::{self, Direction, HiIndexConfig, Measure, PageRankConfig, ScoreTable};
use crate::error::{Error, Result};
use crate::graph::{Gender, InteractionGraph};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcdfCurve {
    pub gender: Gender,
    /// `(x, f)`: a fraction `f` of the group scores at least `x`. Ascending in `x`.
    pub points: Vec<(f64, f64)>,
}

impl CcdfCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "value,fraction")?;
        for (x, f) in &self.points {
            writeln!(out, "{x},{f}")?;
        }
        Ok(())
    }
}

pub fn ccdf(t: &ScoreTable, g: &InteractionGraph, gender: Gender) -> Result<CcdfCurve> {
    let scores = t.aligned_to(g)?;
    let mut values: Vec<f64> = g.nodes_of(gender).map(|v| scores[v]).collect();
    if values.is_empty() {
        return Err(Error::EmptyGenderGroup { gender });
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mut points = Vec::new();
    let mut i = 0;
    while i < n {
        let x = values[i];
        points.push((x, (n - i) as f64 / n as f64));
        while i < n && values[i] == x {
            i += 1;
        }
    }
    Ok(CcdfCurve { gender, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueMethod {
    /// Exact null distribution of U (small samples without ties).
    Exact,
    /// Normal approximation with tie-corrected variance and continuity correction.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UTestResult {
    /// U of the first sample: pairs `(a_i, b_j)` with `a_i > b_j`, ties counting one half.
    pub u_statistic: f64,
    pub z_value: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub sided: Sidedness,
    pub method: PValueMethod,
}

/// Largest `n_a * n_b` for which the exact null distribution is used.
pub const EXACT_MAX_PAIRS: usize = 400;

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<UTestResult> {
    if a.is_empty() {
        return Err(Error::EmptySample("first sample is empty"));
    }
    if b.is_empty() {
        return Err(Error::EmptySample("second sample is empty"));
    }
    let (n_a, n_b) = (a.len(), b.len());
    let n = n_a + n_b;

    // Midranks over the pooled sample.
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        let in_a = pooled[i..j].iter().filter(|p| p.1).count();
        rank_sum_a += midrank * in_a as f64;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let (na, nb, nf) = (n_a as f64, n_b as f64, n as f64);
    let u = rank_sum_a - na * (na + 1.0) / 2.0;
    let mean = na * nb / 2.0;
    let var = na * nb / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)).max(1.0));
    let sd = var.max(0.0).sqrt();

    let dev = u - mean;
    let z = if sd > 0.0 {
        let corrected = (dev.abs() - 0.5).max(0.0);
        dev.signum() * corrected / sd
    } else {
        0.0
    };

    let (p, method) = if tie_term == 0.0 && n_a * n_b <= EXACT_MAX_PAIRS {
        (exact_two_sided_p(n_a, n_b, u), PValueMethod::Exact)
    } else {
        let p = if sd > 0.0 {
            2.0 * Normal::standard().sf(z.abs())
        } else {
            1.0
        };
        (p, PValueMethod::Normal)
    };

    Ok(UTestResult {
        u_statistic: u,
        z_value: z,
        p_value: p.clamp(0.0, 1.0),
        n_a,
        n_b,
        sided: Sidedness::TwoSided,
        method,
    })
}

/// Counts of U = k over all C(n_a + n_b, n_a) rank arrangements.
fn u_distribution(n_a: usize, n_b: usize) -> Vec<u128> {
    let max_u = n_a * n_b;
    // table[i][j] = distribution for sample sizes (i, j); built row by row.
    let mut prev: Vec<Vec<u128>> = (0..=n_b).map(|_| vec![1u128]).collect();
    for i in 1..=n_a {
        let mut cur: Vec<Vec<u128>> = Vec::with_capacity(n_b + 1);
        cur.push(vec![1u128]);
        for j in 1..=n_b {
            // Largest pooled value belongs to a (adds j to U) or to b.
            let len = i * j + 1;
            let mut d = vec![0u128; len];
            for (k, &c) in prev[j].iter().enumerate() {
                d[k + j] += c;
            }
            for (k, &c) in cur[j - 1].iter().enumerate() {
                d[k] += c;
            }
            cur.push(d);
        }
        prev = cur;
    }
    let mut dist = prev.swap_remove(n_b);
    dist.resize(max_u + 1, 0);
    dist
}

fn exact_two_sided_p(n_a: usize, n_b: usize, u: f64) -> f64 {
    let dist = u_distribution(n_a, n_b);
    let total: u128 = dist.iter().sum();
    let k = u.round() as usize;
    let lower: u128 = dist[..=k].iter().sum();
    let upper: u128 = dist[k..].iter().sum();
    let tail = lower.min(upper) as f64 / total as f64;
    (2.0 * tail).min(1.0)
}

/// One row of a percentile test table. `result` is `None` when either
/// group's top slice is empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercentileRow {
    pub percentile: f64,
    pub n_male: usize,
    pub n_female: usize,
    pub result: Option<UTestResult>,
}

pub const DEFAULT_PERCENTILES: [f64; 3] = [0.1, 0.01, 0.001];

/// Size of the top `p` slice of a group of `n`.
fn top_count(n: usize, p: f64) -> usize {
    ((p * n as f64) + 1e-9).floor() as usize
}

fn sorted_desc(scores: &[f64], g: &InteractionGraph, gender: Gender) -> Vec<f64> {
    let mut v: Vec<f64> = g.nodes_of(gender).map(|u| scores[u]).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Male (first sample) vs female scores within each gender's top `p` slice.
pub fn top_percentile_tests(t: &ScoreTable, g: &InteractionGraph, percentiles: &[f64]) -> Result<Vec<PercentileRow>> {
    if percentiles.is_empty() {
        return Err(Error::InvalidParameter("no percentiles given".into()));
    }
    if let Some(p) = percentiles.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::InvalidParameter(format!("percentile {p} outside (0,1]")));
    }
    let scores = t.aligned_to(g)?;
    let males = sorted_desc(&scores, g, Gender::Male);
    let females = sorted_desc(&scores, g, Gender::Female);
    Ok(percentiles
        .iter()
        .map(|&p| {
            let m = &males[..top_count(males.len(), p)];
            let f = &females[..top_count(females.len(), p)];
            PercentileRow {
                percentile: p,
                n_male: m.len(),
                n_female: f.len(),
                result: mann_whitney_u(m, f).ok(),
            }
        })
        .collect())
}

pub fn significance_stars(p: f64) -> &'static str {
    if p <= 0.001 {
        "***"
    } else if p <= 0.01 {
        "**"
    } else if p <= 0.05 {
        "*"
    } else {
        ""
    }
}

pub fn percentile_label(p: f64) -> String {
    format!("top_{}%", p * 100.0)
}

/// Wide table: one row per measure, one `p-value + stars` cell per percentile.
pub fn write_test_table<W: Write>(mut out: W, rows: &[(Measure, Vec<PercentileRow>)]) -> std::io::Result<()> {
    let Some((_, first)) = rows.first() else {
        return Ok(());
    };
    let header: Vec<String> = first.iter().map(|r| percentile_label(r.percentile)).collect();
    writeln!(out, "measure,{}", header.join(","))?;
    for (measure, cells) in rows {
        let cells: Vec<String> = cells
            .iter()
            .map(|r| match &r.result {
                Some(res) => format!("{:.4e}{}", res.p_value, significance_stars(res.p_value)),
                None => "n/a".into(),
            })
            .collect();
        writeln!(out, "{},{}", measure, cells.join(","))?;
    }
    Ok(())
}

/// Long table with the full test statistics.
pub fn write_test_details<W: Write>(mut out: W, rows: &[(Measure, Vec<PercentileRow>)]) -> std::io::Result<()> {
    writeln!(
        out,
        "measure,percentile,n_male,n_female,u_statistic,z_value,p_value,significance,method,sided"
    )?;
    for (measure, cells) in rows {
        for r in cells {
            match &r.result {
                Some(res) => writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{:?},two-sided",
                    measure,
                    r.percentile,
                    r.n_male,
                    r.n_female,
                    res.u_statistic,
                    res.z_value,
                    res.p_value,
                    significance_stars(res.p_value),
                    res.method
                )?,
                None => writeln!(
                    out,
                    "{},{},{},{},,,,,empty-sample,two-sided",
                    measure, r.percentile, r.n_male, r.n_female
                )?,
            }
        }
    }
    Ok(())
}

/// Measures that do not take a target ratio.
pub const ANALYSIS_MEASURES: [Measure; 6] = [
    Measure::InIntensity,
    Measure::OutIntensity,
    Measure::InDegree,
    Measure::OutDegree,
    Measure::HiIndex,
    Measure::PageRank,
];

/// Score table for a measure that needs only the graph.
pub fn compute_measure(g: &InteractionGraph, measure: Measure, hi: HiIndexConfig, pr: &PageRankConfig) -> Result<ScoreTable> {
    Ok(match measure {
        Measure::InIntensity => centrality::intensity(g, Direction::In),
        Measure::OutIntensity => centrality::intensity(g, Direction::Out),
        Measure::InDegree => centrality::degree(g, Direction::In),
        Measure::OutDegree => centrality::degree(g, Direction::Out),
        Measure::HiIndex => centrality::hi_index(g, hi),
        Measure::PageRank => centrality::pagerank(g, pr)?.table,
        Measure::TargetHiIndex | Measure::EmbeddingIndex => {
            return Err(Error::InvalidParameter(format!(
                "{measure} depends on a target ratio and cannot be summarised"
            )))
        }
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GlassCeilingConfig {
    /// Width of the top band in which the male curve must dominate.
    pub band: f64,
    pub alpha: f64,
    pub hi: HiIndexConfig,
    pub pagerank: PageRankConfig,
}

impl Default for GlassCeilingConfig {
    fn default() -> Self {
        GlassCeilingConfig {
            band: 0.01,
            alpha: 0.05,
            hi: HiIndexConfig::default(),
            pagerank: PageRankConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CeilingVerdict {
    GlassCeiling,
    NoGlassCeiling,
    NotApplicable,
}

impl CeilingVerdict {
    pub fn label(self) -> &'static str {
        match self {
            CeilingVerdict::GlassCeiling => "yes",
            CeilingVerdict::NoGlassCeiling => "no",
            CeilingVerdict::NotApplicable => "n/a",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CeilingRow {
    pub measure: Measure,
    pub verdict: CeilingVerdict,
    /// Male score >= female score at every aligned rank of the top band.
    pub male_dominates: bool,
    pub band_test: Option<UTestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlassCeilingReport {
    pub band: f64,
    pub alpha: f64,
    pub rows: Vec<CeilingRow>,
}

impl GlassCeilingReport {
    pub fn flagged(&self) -> impl Iterator<Item = Measure> + '_ {
        self.rows
            .iter()
            .filter(|r| r.verdict == CeilingVerdict::GlassCeiling)
            .map(|r| r.measure)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "measure,glass_ceiling,male_dominates_top_band,p_value")?;
        for r in &self.rows {
            let p = r.band_test.map(|t| t.p_value.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.measure, r.verdict.label(), r.male_dominates, p)?;
        }
        Ok(())
    }
}

/// Compare the two groups' top bands rank by rank, aligning by within-group
/// quantile when the bands differ in size.
fn male_dominates(males: &[f64], females: &[f64]) -> bool {
    let k = males.len().max(females.len());
    (0..k).all(|i| {
        let m = males[i * males.len() / k];
        let f = females[i * females.len() / k];
        m >= f
    })
}

pub fn ceiling_row(t: &ScoreTable, g: &InteractionGraph, cfg: &GlassCeilingConfig) -> Result<CeilingRow> {
    let scores = t.aligned_to(g)?;
    let males = sorted_desc(&scores, g, Gender::Male);
    let females = sorted_desc(&scores, g, Gender::Female);
    let m = &males[..top_count(males.len(), cfg.band)];
    let f = &females[..top_count(females.len(), cfg.band)];
    if m.is_empty() || f.is_empty() {
        return Ok(CeilingRow {
            measure: t.measure(),
            verdict: CeilingVerdict::NotApplicable,
            male_dominates: false,
            band_test: None,
        });
    }
    let dominates = male_dominates(m, f);
    let test = mann_whitney_u(m, f)?;
    let verdict = if dominates && test.p_value <= cfg.alpha {
        CeilingVerdict::GlassCeiling
    } else {
        CeilingVerdict::NoGlassCeiling
    };
    Ok(CeilingRow {
        measure: t.measure(),
        verdict,
        male_dominates: dominates,
        band_test: Some(test),
    })
}

pub fn glass_ceiling_summary(g: &InteractionGraph, measures: &[Measure], cfg: &GlassCeilingConfig) -> Result<GlassCeilingReport> {
    let rows = measures
        .iter()
        .map(|&m| ceiling_row(&compute_measure(g, m, cfg.hi, &cfg.pagerank)?, g, cfg))
        .collect::<Result<_>>()?;
    Ok(GlassCeilingReport {
        band: cfg.band,
        alpha: cfg.alpha,
        rows,
    })
}
