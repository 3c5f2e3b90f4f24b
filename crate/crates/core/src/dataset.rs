//! Sparse labeled datasets: svmlight ingestion, normalization, partitioning
//! and synthetic generators.

use std::fmt::Write as _;

use crate::error::{arg_err, Error, Result};
use crate::rng::{CounterStream, Purpose};

/// A sparse vector with strictly ascending indices and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    indices: Vec<usize>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseVector {
    pub fn new(indices: Vec<usize>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return arg_err("indices and values differ in length");
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return arg_err("indices must be strictly ascending");
        }
        if indices.last().is_some_and(|&i| i >= dim) {
            return arg_err(format!("index out of range for dim {dim}"));
        }
        if values.iter().any(|&v| v == 0.0 || !v.is_finite()) {
            return arg_err("values must be finite and nonzero");
        }
        Ok(Self { indices, values, dim })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { indices: Vec::new(), values: Vec::new(), dim }
    }

    /// Drops exact zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .unzip();
        Self { indices, values, dim: dense.len() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.iter().map(|(j, v)| v * w[j]).sum()
    }

    /// `w += a * self`
    pub fn axpy_into(&self, a: f64, w: &mut [f64]) {
        for (j, v) in self.iter() {
            w[j] += a * v;
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, v) in self.iter() {
            out[j] = v;
        }
        out
    }

    fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }
}

/// Column view of a binary classification problem: `n` sparse examples of a
/// shared dimension `d` and their ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    examples: Vec<SparseVector>,
    labels: Vec<f64>,
    d: usize,
}

impl LabeledDataset {
    pub fn new(examples: Vec<SparseVector>, labels: Vec<f64>, d: usize) -> Result<Self> {
        if examples.len() != labels.len() {
            return arg_err(format!(
                "{} examples but {} labels",
                examples.len(),
                labels.len()
            ));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return arg_err(format!("label {bad} is not +1 or -1"));
        }
        if examples.iter().any(|x| x.dim() != d) {
            return arg_err(format!("every example must have dim {d}"));
        }
        Ok(Self { examples, labels, d })
    }

    pub fn empty(d: usize) -> Self {
        Self { examples: Vec::new(), labels: Vec::new(), d }
    }

    pub fn n(&self) -> usize {
        self.examples.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn examples(&self) -> &[SparseVector] {
        &self.examples
    }

    pub fn example(&self, i: usize) -> &SparseVector {
        &self.examples[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// Examples at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            d: self.d,
        }
    }

    /// Raises the dimensionality (for aligning a test file with a training
    /// file whose highest feature id is larger).
    pub fn with_dim(self, d: usize) -> Result<Self> {
        if d < self.d {
            return arg_err(format!("cannot shrink dim {} to {d}", self.d));
        }
        Ok(Self {
            examples: self.examples.into_iter().map(|x| x.with_dim(d)).collect(),
            labels: self.labels,
            d,
        })
    }

    /// Dense `d x n` copy, column-major.
    pub fn to_dense_columns(&self) -> Vec<Vec<f64>> {
        self.examples.iter().map(SparseVector::to_dense).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.examples
            .iter()
            .map(|x| x.sq_norm().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Summary line describing a train/test split and the number of nodes it is
/// spread over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetCard {
    pub name: String,
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
    pub n_nodes: usize,
}

impl DatasetCard {
    pub fn new(name: &str, n_train: usize, n_test: usize, d: usize, n_nodes: usize) -> Result<Self> {
        if n_train == 0 || n_test == 0 || d == 0 || n_nodes == 0 {
            return arg_err("dataset card counts must be positive");
        }
        Ok(Self { name: name.to_string(), n_train, n_test, d, n_nodes })
    }

    /// Comment lines placed at the top of result files.
    pub fn header(&self) -> String {
        format!(
            "# Name #Training #Testing #Features #Nodes\n# {} {} {} {} {}\n",
            self.name, self.n_train, self.n_test, self.d, self.n_nodes
        )
    }
}

fn parse_label(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad label '{tok}'"),
    })?;
    if v == 1.0 {
        Ok(1.0)
    } else if v == -1.0 || v == 0.0 {
        Ok(-1.0)
    } else {
        Err(Error::Parse { line, msg: format!("label '{tok}' is not binary") })
    }
}

/// Parses svmlight/libsvm text: one `<label> <idx>:<val> ...` example per
/// line, 1-based feature ids. Blank lines and `#` comments are skipped.
/// Labels `1`/`+1` map to +1, `-1`/`0` to -1. Explicit zero values are
/// dropped. `d` is the largest feature id seen unless `dim` forces a larger
/// one.
pub fn parse_svmlight(text: &str, dim: Option<usize>) -> Result<LabeledDataset> {
    let mut rows: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    let mut labels = Vec::new();
    let mut max_id = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut toks = body.split_whitespace();
        let Some(label_tok) = toks.next() else { continue };
        labels.push(parse_label(label_tok, line)?);

        let mut pairs: Vec<(usize, f64)> = Vec::new();
        for tok in toks {
            let (id, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected idx:val, got '{tok}'"),
            })?;
            let id: usize = id.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad feature index '{id}'"),
            })?;
            if id == 0 {
                return Err(Error::Parse { line, msg: "feature ids are 1-based".into() });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad feature value '{val}'"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse { line, msg: format!("non-finite value '{val}'") });
            }
            max_id = max_id.max(id);
            pairs.push((id - 1, val));
        }
        pairs.sort_by_key(|p| p.0);
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate feature index {}", w[0].0 + 1),
            });
        }
        rows.push(pairs.into_iter().filter(|p| p.1 != 0.0).unzip());
    }

    let d = match dim {
        Some(d) if d < max_id => {
            return arg_err(format!("dim {d} is smaller than feature id {max_id}"));
        }
        Some(d) => d,
        None => max_id,
    };
    let examples = rows
        .into_iter()
        .map(|(indices, values)| SparseVector { indices, values, dim: d })
        .collect();
    LabeledDataset::new(examples, labels, d)
}

/// Writes svmlight text that [`parse_svmlight`] reads back exactly.
pub fn to_svmlight(ds: &LabeledDataset) -> String {
    let mut out = String::new();
    for (x, &y) in ds.examples().iter().zip(ds.labels()) {
        out.push_str(if y > 0.0 { "+1" } else { "-1" });
        for (j, v) in x.iter() {
            let _ = write!(out, " {}:{}", j + 1, v);
        }
        out.push('\n');
    }
    out
}

/// Scales every non-empty example to unit Euclidean norm.
pub fn normalize_l2(ds: &LabeledDataset) -> LabeledDataset {
    let examples = ds
        .examples()
        .iter()
        .map(|x| {
            let norm = x.sq_norm().sqrt();
            if norm == 0.0 {
                return x.clone();
            }
            let values = x.values().iter().map(|v| v / norm).collect();
            SparseVector { indices: x.indices().to_vec(), values, dim: x.dim() }
        })
        .collect();
    LabeledDataset { examples, labels: ds.labels().to_vec(), d: ds.d() }
}

/// Index sets of a seeded partition of `0..n` into `k` parts whose sizes
/// differ by at most one. Each part is sorted ascending.
pub fn partition_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return arg_err("need at least one partition");
    }
    if k > n {
        return arg_err(format!("cannot split {n} examples into {k} parts"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    CounterStream::new(seed, Purpose::Partition, 0).shuffle(&mut order);
    let (base, extra) = (n / k, n % k);
    let mut parts = Vec::with_capacity(k);
    let mut start = 0;
    for p in 0..k {
        let len = base + usize::from(p < extra);
        let mut part = order[start..start + len].to_vec();
        part.sort_unstable();
        parts.push(part);
        start += len;
    }
    Ok(parts)
}

pub fn partition(ds: &LabeledDataset, k: usize, seed: u64) -> Result<Vec<LabeledDataset>> {
    Ok(partition_indices(ds.n(), k, seed)?
        .iter()
        .map(|idx| ds.subset(idx))
        .collect())
}

/// Parameters of the two-cluster generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    /// Number of examples placed in the slab around the decision boundary.
    pub s_target: usize,
    /// Offset of the bulk clusters along the class direction.
    pub margin: f64,
    /// Scale of the isotropic Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

/// Fraction of `margin` used for the slab points' offset; slab points are
/// spread over this interval around the boundary.
const SLAB_LO: f64 = 0.0;
const SLAB_HI: f64 = 0.2;

/// Two unit-normalized Gaussian clusters at `±margin·u` plus `s_target` slab
/// points near the boundary, so the hinge-type dual optimum is supported
/// mostly on the slab. The support size is a property of the solved problem
/// and must be measured, not assumed.
pub fn synth_sparse_dual(spec: &SynthSpec) -> Result<LabeledDataset> {
    let SynthSpec { n, d, s_target, margin, noise, seed } = *spec;
    if s_target == 0 || s_target > n {
        return arg_err(format!("s_target must be in 1..={n}"));
    }
    if !(margin > 0.0) {
        return arg_err("margin must be positive");
    }
    if d == 0 {
        return arg_err("d must be positive");
    }
    let mut rng = CounterStream::new(seed, Purpose::Synthetic, 0);
    let mut dir: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
    let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter_mut().for_each(|v| *v /= dn);

    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut in_slab = vec![false; n];
    for &i in &order[..s_target] {
        in_slab[i] = true;
    }

    let noise_scale = noise / (d as f64).sqrt();
    let mut examples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for &slab in &in_slab {
        let y = rng.sign();
        let offset = if slab {
            margin * (SLAB_LO + (SLAB_HI - SLAB_LO) * rng.uniform())
        } else {
            margin
        };
        let mut x: Vec<f64> = dir
            .iter()
            .map(|&u| y * offset * u + noise_scale * rng.gaussian())
            .collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
        examples.push(SparseVector::from_dense(&x));
        labels.push(y);
    }
    LabeledDataset::new(examples, labels, d)
}

/// Unit-norm examples with `nnz` nonzero coordinates each, drawn at random
/// positions: the energy of each example sits on a few coordinates, which is
/// the worst case for plain coordinate sampling. Labels follow the sign of a
/// random linear score.
pub fn synth_spiky(n: usize, d: usize, nnz: usize, seed: u64) -> Result<LabeledDataset> {
    if nnz == 0 || nnz > d {
        return arg_err(format!("nnz must be in 1..={d}"));
    }
    let mut rng = CounterStream::new(seed, Purpose::Synthetic, 1);
    let truth: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
    let mut examples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut dense = vec![0.0; d];
        let mut placed = 0;
        while placed < nnz {
            let j = rng.below(d);
            if dense[j] == 0.0 {
                dense[j] = rng.gaussian();
                if dense[j] != 0.0 {
                    placed += 1;
                }
            }
        }
        let norm = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
        dense.iter_mut().for_each(|v| *v /= norm);
        let score: f64 = dense.iter().zip(&truth).map(|(a, b)| a * b).sum();
        labels.push(if score >= 0.0 { 1.0 } else { -1.0 });
        examples.push(SparseVector::from_dense(&dense));
    }
    LabeledDataset::new(examples, labels, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_line() {
        let ds = parse_svmlight("+1 1:0.6 3:0.8", None).unwrap();
        assert_eq!(ds.n(), 1);
        assert_eq!(ds.d(), 3);
        assert_eq!(ds.labels(), &[1.0]);
        assert_eq!(ds.example(0).indices(), &[0, 2]);
        assert_eq!(ds.example(0).values(), &[0.6, 0.8]);
    }

    #[test]
    fn parse_two_lines() {
        let ds = parse_svmlight("-1 2:1.0\n+1 1:1.0\n", None).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.labels(), &[-1.0, 1.0]);
    }

    #[test]
    fn parse_malformed_value() {
        let err = parse_svmlight("+1 1:a", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn parse_duplicate_index() {
        let err = parse_svmlight("+1 1:1\n-1 2:1 2:3", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn parse_unsorted_and_zero_label() {
        let ds = parse_svmlight("0 5:2 1:1 3:0\n# comment\n\n1 2:4 # trailing", None).unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0]);
        assert_eq!(ds.example(0).indices(), &[0, 4]);
        assert_eq!(ds.example(0).values(), &[1.0, 2.0]);
        assert_eq!(ds.d(), 5);
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(parse_svmlight("2 1:1", None).is_err());
        assert!(parse_svmlight("+1 0:1", None).is_err());
        assert!(parse_svmlight("+1 1", None).is_err());
        assert!(parse_svmlight("+1 1:inf", None).is_err());
        assert!(parse_svmlight("+1 3:1", Some(2)).is_err());
    }

    #[test]
    fn parse_dim_override() {
        let ds = parse_svmlight("+1 2:1", Some(10)).unwrap();
        assert_eq!(ds.d(), 10);
        assert_eq!(ds.example(0).dim(), 10);
    }

    #[test]
    fn normalize_examples() {
        let ds = LabeledDataset::new(
            vec![
                SparseVector::new(vec![0, 1], vec![3.0, 4.0], 2).unwrap(),
                SparseVector::new(vec![1], vec![1.0], 2).unwrap(),
                SparseVector::zeros(2),
            ],
            vec![1.0, -1.0, 1.0],
            2,
        )
        .unwrap();
        let out = normalize_l2(&ds);
        assert_eq!(out.example(0).values(), &[0.6, 0.8]);
        assert_eq!(out.example(1).values(), &[1.0]);
        assert_eq!(out.example(2).nnz(), 0);
    }

    fn toy(n: usize) -> LabeledDataset {
        let ex = (0..n)
            .map(|i| SparseVector::new(vec![0], vec![i as f64 + 1.0], 1).unwrap())
            .collect();
        LabeledDataset::new(ex, vec![1.0; n], 1).unwrap()
    }

    #[test]
    fn partition_sizes() {
        let parts = partition(&toy(4), 2, 1).unwrap();
        assert_eq!(parts.iter().map(|p| p.n()).collect::<Vec<_>>(), vec![2, 2]);
        let parts = partition(&toy(5), 2, 1).unwrap();
        assert_eq!(parts.iter().map(|p| p.n()).collect::<Vec<_>>(), vec![3, 2]);
        let ds = toy(5);
        assert_eq!(partition(&ds, 1, 9).unwrap(), vec![ds.clone()]);
        assert!(partition(&ds, 6, 0).is_err());
        assert!(partition(&ds, 0, 0).is_err());
    }

    #[test]
    fn sparse_vector_invariants() {
        assert!(SparseVector::new(vec![1, 0], vec![1.0, 1.0], 2).is_err());
        assert!(SparseVector::new(vec![0], vec![0.0], 2).is_err());
        assert!(SparseVector::new(vec![2], vec![1.0], 2).is_err());
        assert!(LabeledDataset::new(vec![SparseVector::zeros(2)], vec![0.5], 2).is_err());
    }

    #[test]
    fn synth_is_deterministic() {
        let spec = SynthSpec { n: 50, d: 10, s_target: 5, margin: 1.0, noise: 0.5, seed: 4 };
        let a = synth_sparse_dual(&spec).unwrap();
        let b = synth_sparse_dual(&spec).unwrap();
        assert_eq!(to_svmlight(&a), to_svmlight(&b));
        for x in a.examples() {
            assert!((x.sq_norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn synth_noise_free_is_separable() {
        let spec = SynthSpec { n: 40, d: 6, s_target: 4, margin: 1e6, noise: 0.0, seed: 2 };
        let ds = synth_sparse_dual(&spec).unwrap();
        // Every example is ±dir, so dir itself separates them.
        let dir = ds.example(0).to_dense();
        let y0 = ds.label(0);
        for (x, &y) in ds.examples().iter().zip(ds.labels()) {
            assert!(y * y0 * x.dot_dense(&dir) > 0.0);
        }
    }
}
