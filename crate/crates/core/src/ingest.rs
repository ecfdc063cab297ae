//! Edge-list parsing, weight normalization, duplicate handling, synthetic
//! graph generation and internal-opinion initialization.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SignedDigraph, TrustSum};
use crate::scalar::Scalar;

/// Seeded generator used for every random draw in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord<T> {
    pub src: String,
    pub dst: String,
    pub weight: T,
    pub timestamp: Option<i64>,
}

impl<T: Scalar> EdgeRecord<T> {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, weight: T) -> Self {
        EdgeRecord { src: src.into(), dst: dst.into(), weight, timestamp: None }
    }

    pub fn with_timestamp(mut self, ts: i64) -> Self {
        self.timestamp = Some(ts);
        self
    }
}

/// Builds a graph from records (see [`crate::graph::build_graph`]).
pub fn records_to_graph<T: Scalar>(
    records: &[EdgeRecord<T>],
) -> Result<(SignedDigraph<T>, crate::graph::BuildStats)> {
    let triples: Vec<(&str, &str, T)> =
        records.iter().map(|r| (r.src.as_str(), r.dst.as_str(), r.weight)).collect();
    crate::graph::build_graph(&triples)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeListFormat {
    pub delimiter: char,
    pub src_col: usize,
    pub dst_col: usize,
    pub weight_col: usize,
    pub timestamp_col: Option<usize>,
    pub has_header: bool,
    /// Single-character comment marker; lines starting with it are skipped.
    pub comment: Option<char>,
}

impl Default for EdgeListFormat {
    fn default() -> Self {
        EdgeListFormat {
            delimiter: ',',
            src_col: 0,
            dst_col: 1,
            weight_col: 2,
            timestamp_col: Some(3),
            has_header: false,
            comment: Some('#'),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedLine {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEdges<T> {
    pub records: Vec<EdgeRecord<T>>,
    pub malformed: Vec<MalformedLine>,
}

fn ascii_byte(c: char, what: &str) -> Result<u8> {
    if c.is_ascii() {
        Ok(c as u8)
    } else {
        Err(Error::InvalidParameter(format!("{what} must be an ASCII character, got {c:?}")))
    }
}

/// Parses a delimited edge list.
///
/// A timestamp column that is absent from a row is treated as missing, not
/// malformed. Fails only when the stream is unreadable or when every data
/// line is malformed.
pub fn parse_edge_list<T: Scalar, R: Read>(reader: R, format: &EdgeListFormat) -> Result<ParsedEdges<T>> {
    let mut builder = csv::ReaderBuilder::new();
    builder
        .delimiter(ascii_byte(format.delimiter, "delimiter")?)
        .has_headers(format.has_header)
        .flexible(true)
        .trim(csv::Trim::All);
    if let Some(c) = format.comment {
        builder.comment(Some(ascii_byte(c, "comment marker")?));
    }
    let mut rdr = builder.from_reader(reader);

    let required = format.src_col.max(format.dst_col).max(format.weight_col) + 1;
    let mut records = Vec::new();
    let mut malformed = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => return Err(e.into()),
                csv::ErrorKind::Utf8 { pos, .. } => {
                    malformed.push(MalformedLine {
                        line: pos.as_ref().map_or(0, |p| p.line()),
                        reason: "invalid UTF-8".into(),
                    });
                    continue;
                }
                _ => return Err(e.into()),
            },
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match parse_row(&record, format, required) {
            Ok(r) => records.push(r),
            Err(reason) => malformed.push(MalformedLine { line, reason }),
        }
    }
    if records.is_empty() && !malformed.is_empty() {
        let first = &malformed[0];
        return Err(Error::AllLinesMalformed {
            lines: malformed.len(),
            first_line: first.line as usize,
            reason: first.reason.clone(),
        });
    }
    Ok(ParsedEdges { records, malformed })
}

fn parse_row<T: Scalar>(
    row: &csv::StringRecord,
    format: &EdgeListFormat,
    required: usize,
) -> std::result::Result<EdgeRecord<T>, String> {
    if row.len() < required {
        return Err(format!("expected at least {required} columns, found {}", row.len()));
    }
    let src = &row[format.src_col];
    let dst = &row[format.dst_col];
    if src.is_empty() || dst.is_empty() {
        return Err("empty node label".into());
    }
    let raw = &row[format.weight_col];
    let weight: f64 = raw.parse().map_err(|_| format!("weight {raw:?} is not a number"))?;
    if !weight.is_finite() {
        return Err(format!("weight {raw:?} is not finite"));
    }
    let timestamp = match format.timestamp_col.and_then(|c| row.get(c)) {
        None | Some("") => None,
        Some(t) => Some(
            t.parse::<i64>()
                .or_else(|_| t.parse::<f64>().map(|v| v as i64))
                .map_err(|_| format!("timestamp {t:?} is not a number"))?,
        ),
    };
    Ok(EdgeRecord { src: src.to_string(), dst: dst.to_string(), weight: T::lit(weight), timestamp })
}

/// Writes records in the `src,dst,weight[,timestamp]` layout.
pub fn write_edge_list<T: Scalar, W: Write>(writer: W, records: &[EdgeRecord<T>], delimiter: char) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(ascii_byte(delimiter, "delimiter")?)
        .flexible(true)
        .from_writer(writer);
    for r in records {
        let weight = format!("{}", r.weight);
        match r.timestamp {
            Some(ts) => w.write_record([r.src.as_str(), r.dst.as_str(), weight.as_str(), ts.to_string().as_str()])?,
            None => w.write_record([r.src.as_str(), r.dst.as_str(), weight.as_str()])?,
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Normalization {
    DivideByMaxAbs,
    DivideByConstant(f64),
    Identity,
}

/// Scales weights into `[-1, 1]` and drops zero-weight records.
///
/// Returns the surviving records and the number dropped for being zero.
pub fn normalize_weights<T: Scalar>(
    records: Vec<EdgeRecord<T>>,
    scheme: Normalization,
) -> Result<(Vec<EdgeRecord<T>>, usize)> {
    let divisor = match scheme {
        Normalization::Identity => T::one(),
        Normalization::DivideByConstant(c) => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("normalization constant must be positive, got {c}")));
            }
            T::lit(c)
        }
        Normalization::DivideByMaxAbs => {
            let m = records.iter().fold(T::zero(), |m, r| m.max(r.weight.abs()));
            if m == T::zero() {
                return Err(Error::InvalidParameter(
                    "cannot normalize by max |weight|: no nonzero weights".into(),
                ));
            }
            m
        }
    };
    let mut dropped = 0;
    let mut out = Vec::with_capacity(records.len());
    for mut r in records {
        r.weight /= divisor;
        if r.weight == T::zero() {
            dropped += 1;
            continue;
        }
        if r.weight.abs() > T::one() {
            return Err(Error::WeightOutOfRange { src: r.src, dst: r.dst, weight: r.weight.as_f64() });
        }
        out.push(r);
    }
    Ok((out, dropped))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupePolicy {
    /// Most recent record wins: highest timestamp, then latest in input.
    #[default]
    KeepLast,
    /// First record in input order wins.
    KeepFirst,
    /// Arithmetic mean of the raw weights; timestamp is the latest seen.
    MeanWeight,
}

/// Collapses repeated `(src, dst)` pairs. Output keeps the first-appearance
/// order of each pair.
pub fn dedupe_edges<T: Scalar>(records: Vec<EdgeRecord<T>>, policy: DedupePolicy) -> Vec<EdgeRecord<T>> {
    let mut slot: HashMap<(String, String), usize> = HashMap::with_capacity(records.len());
    let mut out: Vec<EdgeRecord<T>> = Vec::with_capacity(records.len());
    let mut counts: Vec<usize> = Vec::with_capacity(records.len());

    for r in records {
        let key = (r.src.clone(), r.dst.clone());
        match slot.get(&key) {
            None => {
                slot.insert(key, out.len());
                out.push(r);
                counts.push(1);
            }
            Some(&k) => {
                let kept = &mut out[k];
                match policy {
                    DedupePolicy::KeepFirst => {}
                    DedupePolicy::KeepLast => {
                        // None sorts below any timestamp.
                        if r.timestamp >= kept.timestamp {
                            *kept = r;
                        }
                    }
                    DedupePolicy::MeanWeight => {
                        kept.weight += r.weight;
                        kept.timestamp = kept.timestamp.max(r.timestamp);
                        counts[k] += 1;
                    }
                }
            }
        }
    }
    if policy == DedupePolicy::MeanWeight {
        for (r, c) in out.iter_mut().zip(counts) {
            r.weight /= T::from_usize(c).unwrap();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Uniform,
    Normal,
    DegreeProportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitScheme {
    pub kind: InitKind,
    pub seed: u64,
}

/// Draws an internal-opinion vector with every entry in `[-1, 1]`.
///
/// * `Uniform`: i.i.d. `U(-1, 1)`.
/// * `Normal`: i.i.d. `N(0, 1)`, clipped to `[-1, 1]`.
/// * `DegreeProportional`: `s_i = sum_j |a_ji| / max_k sum_j |a_jk|`; the
///   seed is unused.
pub fn init_opinions<T: Scalar>(graph: &SignedDigraph<T>, scheme: InitScheme) -> Result<Vec<T>> {
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::InvalidParameter("cannot initialize opinions on an empty graph".into()));
    }
    let mut rng = rng_from_seed(scheme.seed);
    Ok(match scheme.kind {
        InitKind::Uniform => (0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect(),
        InitKind::Normal => (0..n)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                T::lit(clip_opinion(v))
            })
            .collect(),
        InitKind::DegreeProportional => {
            let sums: Vec<T> = (0..n).map(|i| graph.in_trust_sum_unchecked(i, TrustSum::Absolute)).collect();
            let max = sums.iter().fold(T::zero(), |m, v| m.max(*v));
            if max == T::zero() {
                return Err(Error::InvalidParameter(
                    "degree-proportional initialization needs at least one edge".into(),
                ));
            }
            sums.into_iter().map(|v| v / max).collect()
        }
    })
}

/// Clips a raw draw into the opinion interval.
pub fn clip_opinion(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

/// Distribution of edge-weight magnitudes for synthetic graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightDist {
    /// Uniform on `(low, high]`, `0 <= low < high <= 1`.
    Uniform { low: f64, high: f64 },
    Constant { value: f64 },
}

impl Default for WeightDist {
    fn default() -> Self {
        WeightDist::Uniform { low: 0.0, high: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub edge_prob: f64,
    pub negative_prob: f64,
    #[serde(default)]
    pub weights: WeightDist,
    pub seed: u64,
}

/// Directed Erdos-Renyi graph with signed weights.
///
/// Each ordered pair `(i, j)`, `i != j`, is present independently with
/// probability `edge_prob`; the sign is negative with probability
/// `negative_prob`. Pairs are visited with geometric skips so sparse graphs
/// cost `O(n + m)`.
pub fn gen_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<SignedDigraph<T>> {
    let SyntheticSpec { n, edge_prob: p, negative_prob: nu, weights, seed } = *spec;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("synthetic graph needs n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("edge probability must be in (0, 1], got {p}")));
    }
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::InvalidParameter(format!("negative probability must be in [0, 1], got {nu}")));
    }
    match weights {
        WeightDist::Uniform { low, high } if !(0.0 <= low && low < high && high <= 1.0) => {
            return Err(Error::InvalidParameter(format!("uniform weight range ({low}, {high}] invalid")));
        }
        WeightDist::Constant { value } if !(value > 0.0 && value <= 1.0) => {
            return Err(Error::InvalidParameter(format!("constant weight {value} not in (0, 1]")));
        }
        _ => {}
    }

    let mut rng = rng_from_seed(seed);
    let pairs = (n as u64) * (n as u64 - 1);
    let log_q = (1.0 - p).ln();
    let mut edges = Vec::new();
    let mut k: u64 = 0;
    loop {
        if p < 1.0 {
            let u: f64 = rng.random();
            // Number of absent pairs before the next present one.
            let skip = ((1.0 - u).ln() / log_q).floor();
            if !skip.is_finite() || skip >= (pairs - k) as f64 {
                break;
            }
            k += skip as u64;
        }
        if k >= pairs {
            break;
        }
        let i = (k / (n as u64 - 1)) as usize;
        let mut j = (k % (n as u64 - 1)) as usize;
        if j >= i {
            j += 1;
        }
        let magnitude = match weights {
            WeightDist::Uniform { low, high } => high - (high - low) * rng.random::<f64>(),
            WeightDist::Constant { value } => value,
        };
        let negative = nu > 0.0 && rng.random::<f64>() < nu;
        let w = if negative { -magnitude } else { magnitude };
        edges.push((i, j, T::lit(w)));
        k += 1;
    }
    SignedDigraph::from_indexed_edges(n, &edges)
}
