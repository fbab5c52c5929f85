//! Attribute datasets: CSV ingestion, train/validation/test splits and
//! balanced sampling of similar/dissimilar pairs.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error at line {line}: {source}")]
    Csv {
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column:?}: feature cell must be 0 or 1, found {value:?}")]
    NonBinaryCell {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: u64, id: String },
    #[error("feature value at index {index} must be 0 or 1, found {value}")]
    NonBinaryValue { index: usize, value: u8 },
    #[error("cannot parse feature row: {0}")]
    BadRow(String),
    #[error("item {id:?} has {found} features, expected {expected}")]
    FeatureCount {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("{part} partition would be empty for {items} items; use a larger dataset or adjust the ratios")]
    EmptyPartition { part: &'static str, items: usize },
    #[error("no similar pairs: every class has a single item")]
    NoSimilarPairs,
    #[error("no dissimilar pairs: all items share one class")]
    NoDissimilarPairs,
}

/// A fixed-length vector of binary attribute indicators.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeatureVector(Vec<u8>);

impl FeatureVector {
    pub fn new(values: Vec<u8>) -> Result<Self, DataError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(DataError::NonBinaryValue { index, value });
        }
        Ok(FeatureVector(values))
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        FeatureVector(bits.into_iter().map(u8::from).collect())
    }

    /// Indicator vector of length `m` with the given positions set.
    pub fn from_active(m: usize, active: &[usize]) -> Self {
        let mut v = vec![0u8; m];
        for &i in active {
            v[i] = 1;
        }
        FeatureVector(v)
    }

    /// Parses a comma separated row of `0`/`1` cells.
    pub fn parse_row(row: &str) -> Result<Self, DataError> {
        let values = row
            .split(',')
            .map(|cell| match cell.trim() {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(DataError::BadRow(format!("cell {other:?} is not 0 or 1"))),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Ok(FeatureVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.0[i] == 1
    }

    pub fn count_active(&self) -> usize {
        self.0.iter().filter(|&&v| v == 1).count()
    }

    /// Copy with `extra` trailing zero features.
    pub fn padded(&self, extra: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(v.len() + extra, 0);
        FeatureVector(v)
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledItem {
    pub id: String,
    pub label: String,
    pub features: FeatureVector,
}

impl LabeledItem {
    pub fn new(id: impl Into<String>, label: impl Into<String>, features: FeatureVector) -> Self {
        LabeledItem {
            id: id.into(),
            label: label.into(),
            features,
        }
    }
}

/// Items with class labels over a shared list of feature names. Immutable
/// once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledItemSet {
    feature_names: Vec<String>,
    items: Vec<LabeledItem>,
}

impl LabeledItemSet {
    pub fn new(feature_names: Vec<String>, items: Vec<LabeledItem>) -> Result<Self, DataError> {
        let m = feature_names.len();
        let mut seen = HashSet::with_capacity(items.len());
        for (row, item) in items.iter().enumerate() {
            if item.features.len() != m {
                return Err(DataError::FeatureCount {
                    id: item.id.clone(),
                    expected: m,
                    found: item.features.len(),
                });
            }
            if !seen.insert(item.id.as_str()) {
                return Err(DataError::DuplicateId {
                    line: row as u64 + 2,
                    id: item.id.clone(),
                });
            }
        }
        Ok(LabeledItemSet {
            feature_names,
            items,
        })
    }

    /// Item set with generated feature names `f1..fm`.
    pub fn with_default_names(items: Vec<LabeledItem>) -> Result<Self, DataError> {
        let m = items.first().map_or(0, |it| it.features.len());
        Self::new((1..=m).map(|i| format!("f{i}")).collect(), items)
    }

    pub fn items(&self) -> &[LabeledItem] {
        &self.items
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.items
            .iter()
            .map(|it| it.label.as_str())
            .collect::<HashSet<_>>()
            .len()
    }

    /// Items at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledItemSet {
        LabeledItemSet {
            feature_names: self.feature_names.clone(),
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
        }
    }
}

pub fn load_item_set(path: impl AsRef<Path>) -> Result<LabeledItemSet, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_item_set(file)
}

/// Parses the `id,label,<feature>...` CSV layout.
pub fn read_item_set<R: Read>(reader: R) -> Result<LabeledItemSet, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        None => return Err(DataError::MalformedHeader("file is empty".into())),
        Some(rec) => rec.map_err(|source| DataError::Csv { line: 1, source })?,
    };
    if header.len() < 3 {
        return Err(DataError::MalformedHeader(
            "expected `id,label` followed by at least one feature column".into(),
        ));
    }
    if &header[0] != "id" || &header[1] != "label" {
        return Err(DataError::MalformedHeader(format!(
            "first two columns must be `id,label`, found `{},{}`",
            &header[0], &header[1]
        )));
    }
    let feature_names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    let mut names_seen = HashSet::new();
    for name in &feature_names {
        if name.is_empty() {
            return Err(DataError::MalformedHeader("empty feature name".into()));
        }
        if !names_seen.insert(name.as_str()) {
            return Err(DataError::MalformedHeader(format!(
                "duplicate feature name {name:?}"
            )));
        }
    }

    let width = header.len();
    let mut items = Vec::new();
    let mut ids = HashSet::new();
    for rec in records {
        let rec = rec.map_err(|source| DataError::Csv {
            line: source.position().map_or(0, |p| p.line()),
            source,
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(DataError::RaggedRow {
                line,
                expected: width,
                found: rec.len(),
            });
        }
        let id = rec[0].to_owned();
        if !ids.insert(id.clone()) {
            return Err(DataError::DuplicateId { line, id });
        }
        let mut values = Vec::with_capacity(width - 2);
        for (col, cell) in rec.iter().skip(2).enumerate() {
            values.push(match cell {
                "0" => 0,
                "1" => 1,
                _ => {
                    return Err(DataError::NonBinaryCell {
                        line,
                        column: feature_names[col].clone(),
                        value: cell.to_owned(),
                    })
                }
            });
        }
        items.push(LabeledItem {
            id,
            label: rec[1].to_owned(),
            features: FeatureVector(values),
        });
    }
    Ok(LabeledItemSet {
        feature_names,
        items,
    })
}

pub fn write_item_set<W: Write>(set: &LabeledItemSet, writer: W) -> Result<(), DataError> {
    let csv_err = |source| DataError::Csv { line: 0, source };
    let mut wtr = csv::Writer::from_writer(writer);
    let header = ["id", "label"]
        .into_iter()
        .chain(set.feature_names.iter().map(String::as_str));
    wtr.write_record(header).map_err(csv_err)?;
    for item in &set.items {
        let mut row = vec![item.id.clone(), item.label.clone()];
        row.extend(item.features.as_slice().iter().map(u8::to_string));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| csv_err(e.into()))?;
    Ok(())
}

pub fn save_item_set(set: &LabeledItemSet, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_item_set(set, file)
}

/// Train/validation/test fractions plus the shuffle seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self, DataError> {
        let spec = SplitSpec {
            train_fraction: train,
            val_fraction: val,
            test_fraction: test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let fr = self.fractions();
        if fr.iter().any(|f| !f.is_finite() || *f < 0.0 || *f > 1.0) {
            return Err(DataError::InvalidSplit(format!(
                "fractions must lie in [0,1], got {fr:?}"
            )));
        }
        let sum: f64 = fr.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidSplit(format!(
                "fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train_fraction, self.val_fraction, self.test_fraction]
    }

    /// Partition sizes for `n` items by largest-remainder rounding. Ties in
    /// the remainder go to the earlier partition.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let quotas = self.fractions().map(|f| f * n as f64);
        let mut sizes = quotas.map(|q| q.floor() as usize);
        let assigned: usize = sizes.iter().sum();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            sizes[i] += 1;
        }
        sizes
    }
}

/// Seeded shuffle split into disjoint (train, val, test) sets. Items keep
/// their original relative order within each partition.
pub fn split_items(
    items: &LabeledItemSet,
    spec: &SplitSpec,
) -> Result<(LabeledItemSet, LabeledItemSet, LabeledItemSet), DataError> {
    spec.validate()?;
    let n = items.len();
    if n < 3 {
        return Err(DataError::InvalidSplit(format!(
            "need at least 3 items to split, got {n}"
        )));
    }
    let sizes = spec.sizes(n);
    for ((size, frac), part) in sizes
        .iter()
        .zip(spec.fractions())
        .zip(["train", "validation", "test"])
    {
        if *size == 0 && frac > 0.0 {
            return Err(DataError::EmptyPartition { part, items: n });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (train, rest) = order.split_at_mut(sizes[0]);
    let (val, test) = rest.split_at_mut(sizes[1]);
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok((items.subset(train), items.subset(val), items.subset(test)))
}

/// Similarity label: true iff both items carry the same class.
pub fn label_pair(a: &LabeledItem, b: &LabeledItem) -> bool {
    a.label == b.label
}

/// One labeled training pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairExample<'a> {
    pub x: &'a FeatureVector,
    pub y: &'a FeatureVector,
    pub similar: bool,
}

impl PairExample<'_> {
    /// The label as 0/1.
    pub fn s(&self) -> u8 {
        u8::from(self.similar)
    }
}

/// Positions of a sampled pair inside its item set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PairIndex {
    pub first: usize,
    pub second: usize,
    pub similar: bool,
}

/// Uniform sampler over the unordered similar and dissimilar pairs of an item
/// set, without materializing the quadratic pair lists.
///
/// Similar pairs: pick a class with probability proportional to its number of
/// member pairs, then two distinct members. Dissimilar pairs: pick the first
/// item with weight `n - n_class`, then a uniform item outside its class.
/// Both draws return the two items in random order.
#[derive(Clone, Debug)]
pub struct PairSampler<'a> {
    items: &'a LabeledItemSet,
    // item indices grouped by class
    by_class: Vec<usize>,
    class_start: Vec<usize>,
    class_size: Vec<usize>,
    // class of by_class[k]
    class_at: Vec<usize>,
    similar_cum: Vec<u64>,
    dissimilar_cum: Vec<u64>,
}

impl<'a> PairSampler<'a> {
    pub fn new(items: &'a LabeledItemSet) -> Result<Self, DataError> {
        let mut class_ids: HashMap<&str, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, item) in items.items().iter().enumerate() {
            let next = class_ids.len();
            let c = *class_ids.entry(item.label.as_str()).or_insert(next);
            if c == members.len() {
                members.push(Vec::new());
            }
            members[c].push(i);
        }
        let n = items.len() as u64;
        let class_size: Vec<usize> = members.iter().map(Vec::len).collect();
        let mut class_start = Vec::with_capacity(members.len());
        let mut by_class = Vec::with_capacity(items.len());
        let mut class_at = Vec::with_capacity(items.len());
        for (c, m) in members.iter().enumerate() {
            class_start.push(by_class.len());
            by_class.extend_from_slice(m);
            class_at.extend(std::iter::repeat_n(c, m.len()));
        }
        let similar_cum = cumulative(class_size.iter().map(|&k| {
            let k = k as u64;
            k * k.saturating_sub(1) / 2
        }));
        let dissimilar_cum = cumulative(class_at.iter().map(|&c| n - class_size[c] as u64));
        if similar_cum.last().copied().unwrap_or(0) == 0 {
            return Err(DataError::NoSimilarPairs);
        }
        if dissimilar_cum.last().copied().unwrap_or(0) == 0 {
            return Err(DataError::NoDissimilarPairs);
        }
        Ok(PairSampler {
            items,
            by_class,
            class_start,
            class_size,
            class_at,
            similar_cum,
            dissimilar_cum,
        })
    }

    pub fn items(&self) -> &'a LabeledItemSet {
        self.items
    }

    pub fn similar_pair_count(&self) -> u64 {
        *self.similar_cum.last().unwrap()
    }

    pub fn dissimilar_pair_count(&self) -> u64 {
        // every dissimilar pair is counted once from each side
        *self.dissimilar_cum.last().unwrap() / 2
    }

    pub fn sample_similar<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let c = draw_cumulative(&self.similar_cum, rng);
        let size = self.class_size[c];
        let a = rng.random_range(0..size);
        let mut b = rng.random_range(0..size - 1);
        if b >= a {
            b += 1;
        }
        let start = self.class_start[c];
        (self.by_class[start + a], self.by_class[start + b])
    }

    pub fn sample_dissimilar<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let k = draw_cumulative(&self.dissimilar_cum, rng);
        let c = self.class_at[k];
        let (start, size) = (self.class_start[c], self.class_size[c]);
        let mut r = rng.random_range(0..self.by_class.len() - size);
        if r >= start {
            r += size;
        }
        (self.by_class[k], self.by_class[r])
    }

    /// Draws the label with `P(similar) = positive_fraction`, then a uniform
    /// pair with that label.
    pub fn sample_pair<R: Rng + ?Sized>(&self, positive_fraction: f64, rng: &mut R) -> PairIndex {
        let similar = rng.random_bool(positive_fraction);
        let (first, second) = if similar {
            self.sample_similar(rng)
        } else {
            self.sample_dissimilar(rng)
        };
        PairIndex {
            first,
            second,
            similar,
        }
    }

    pub fn sample_indices<R: Rng + ?Sized>(
        &self,
        count: usize,
        positive_fraction: f64,
        rng: &mut R,
    ) -> Vec<PairIndex> {
        (0..count)
            .map(|_| self.sample_pair(positive_fraction, rng))
            .collect()
    }

    pub fn example(&self, pair: PairIndex) -> PairExample<'a> {
        let items = self.items.items();
        PairExample {
            x: &items[pair.first].features,
            y: &items[pair.second].features,
            similar: pair.similar,
        }
    }

    /// Balanced (0.5/0.5) mini-batch, sampled with replacement across slots.
    pub fn balanced_batch<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<PairExample<'a>> {
        (0..batch_size)
            .map(|_| self.example(self.sample_pair(0.5, rng)))
            .collect()
    }
}

/// One-shot convenience over [`PairSampler::balanced_batch`].
pub fn sample_balanced_batch<'a, R: Rng + ?Sized>(
    items: &'a LabeledItemSet,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<PairExample<'a>>, DataError> {
    Ok(PairSampler::new(items)?.balanced_batch(batch_size, rng))
}

fn cumulative(weights: impl Iterator<Item = u64>) -> Vec<u64> {
    weights
        .scan(0u64, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

fn draw_cumulative<R: Rng + ?Sized>(cum: &[u64], rng: &mut R) -> usize {
    let r = rng.random_range(0..*cum.last().unwrap());
    cum.partition_point(|&c| c <= r)
}
