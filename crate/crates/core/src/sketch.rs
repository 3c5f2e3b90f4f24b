//! Randomized reduction operators `A: R^d -> R^m` and empirical
//! Johnson-Lindenstrauss diagnostics.
//!
//! Six seeded kinds are supported:
//!
//! | kind        | map                                              | apply cost        |
//! |-------------|--------------------------------------------------|-------------------|
//! | `gauss`     | `A_ij ~ N(0, 1/m)`                               | `O(m nnz(x))`     |
//! | `rademacher`| `A_ij = ±1/sqrt(m)`                              | `O(m nnz(x))`     |
//! | `discrete`  | `A_ij = ±sqrt(3/m)` w.p. 1/6 each, else 0        | `O(m nnz(x))`     |
//! | `hash`      | `[Ax]_i = sum_{j: h(j)=i} xi_j x_j`              | `O(nnz(x))`       |
//! | `hadamard`  | `sqrt(d/m) P H D`, `d` padded to a power of two  | `O(d log d)`      |
//! | `sample`    | `sqrt(d/m) P`, coordinates drawn with replacement| `O(m + nnz(x))`   |
//!
//! Every random quantity is drawn from [`CounterStream`]s keyed by the seed
//! and a per-purpose stream id, so `(kind, d, m, seed)` fully determines the
//! operator on every platform. Dense matrices are materialized column-major
//! when `d * m <= 2^26`; above that entries are regenerated on demand from the
//! same stream words, so both paths produce identical bits.

use std::fmt;
use std::str::FromStr;

use crate::dataset::{LabeledDataset, SparseVector};
use crate::error::{arg_err, Error, Result};
use crate::rng::{standard_normal, unit_open, CounterStream, Purpose};

pub const MATERIALIZE_LIMIT: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperatorKind {
    GaussianProjection,
    RademacherProjection,
    SparseDiscreteProjection,
    HashingHD,
    HadamardPHD,
    SamplingP,
    /// A caller-supplied matrix; not reproducible from a seed.
    Explicit,
}

impl OperatorKind {
    pub const SEEDED: [OperatorKind; 6] = [
        OperatorKind::GaussianProjection,
        OperatorKind::RademacherProjection,
        OperatorKind::SparseDiscreteProjection,
        OperatorKind::HashingHD,
        OperatorKind::HadamardPHD,
        OperatorKind::SamplingP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::GaussianProjection => "gauss",
            OperatorKind::RademacherProjection => "rademacher",
            OperatorKind::SparseDiscreteProjection => "discrete",
            OperatorKind::HashingHD => "hash",
            OperatorKind::HadamardPHD => "hadamard",
            OperatorKind::SamplingP => "sample",
            OperatorKind::Explicit => "explicit",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OperatorKind::SEEDED
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown operator kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    /// Column-major `m x d` entries.
    Dense(Vec<f64>),
    /// Dense projection regenerated from its stream on every access.
    Streamed,
    Hash { buckets: Vec<usize>, signs: Vec<f64> },
    Hadamard { d_pad: usize, signs: Vec<f64>, coords: Vec<usize> },
    Sampling { coords: Vec<usize> },
}

/// A linear reduction operator. Immutable once built; `apply` is reentrant.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionOperator {
    kind: OperatorKind,
    d: usize,
    m: usize,
    seed: u64,
    repr: Repr,
}

fn projection_purpose(kind: OperatorKind) -> Purpose {
    match kind {
        OperatorKind::GaussianProjection => Purpose::GaussianProjection,
        OperatorKind::RademacherProjection => Purpose::RademacherProjection,
        _ => Purpose::SparseDiscreteProjection,
    }
}

fn projection_entry(kind: OperatorKind, word: u64, m: usize) -> f64 {
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();
    match kind {
        OperatorKind::GaussianProjection => standard_normal(word) * inv_sqrt_m,
        OperatorKind::RademacherProjection => {
            if word >> 63 == 0 {
                inv_sqrt_m
            } else {
                -inv_sqrt_m
            }
        }
        _ => {
            let u = unit_open(word);
            let mag = (3.0 / m as f64).sqrt();
            if u < 1.0 / 6.0 {
                mag
            } else if u < 1.0 / 3.0 {
                -mag
            } else {
                0.0
            }
        }
    }
}

fn draw_coords(seed: u64, purpose: Purpose, m: usize, range: usize) -> Vec<usize> {
    let mut rng = CounterStream::new(seed, purpose, 0);
    (0..m).map(|_| rng.below(range)).collect()
}

fn draw_signs(seed: u64, purpose: Purpose, len: usize) -> Vec<f64> {
    let mut rng = CounterStream::new(seed, purpose, 0);
    (0..len).map(|_| rng.sign()).collect()
}

fn check_dims(d: usize, m: usize) -> Result<()> {
    if d < 1 || m < 1 {
        return arg_err(format!("operator dimensions must be positive (d={d}, m={m})"));
    }
    Ok(())
}

/// In-place unnormalized fast Walsh-Hadamard transform; `data.len()` must be
/// a power of two.
pub fn fwht(data: &mut [f64]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

pub fn make_operator(kind: OperatorKind, d: usize, m: usize, seed: u64) -> Result<ReductionOperator> {
    ReductionOperator::with_materialization(kind, d, m, seed, d.saturating_mul(m) <= MATERIALIZE_LIMIT)
}

impl ReductionOperator {
    /// Like [`make_operator`] but lets the caller force the dense projections
    /// onto the materialized or the streamed path.
    pub fn with_materialization(
        kind: OperatorKind,
        d: usize,
        m: usize,
        seed: u64,
        materialize: bool,
    ) -> Result<Self> {
        check_dims(d, m)?;
        let repr = match kind {
            OperatorKind::GaussianProjection
            | OperatorKind::RademacherProjection
            | OperatorKind::SparseDiscreteProjection => {
                if materialize {
                    // Entry (r, c) is word r*d + c; walk the stream once.
                    let mut rng = CounterStream::new(seed, projection_purpose(kind), 0);
                    let mut cols = vec![0.0; d * m];
                    for r in 0..m {
                        for c in 0..d {
                            cols[c * m + r] = projection_entry(kind, rng.next_u64(), m);
                        }
                    }
                    Repr::Dense(cols)
                } else {
                    Repr::Streamed
                }
            }
            OperatorKind::HashingHD => Repr::Hash {
                buckets: draw_coords(seed, Purpose::HashBuckets, d, m),
                signs: draw_signs(seed, Purpose::HashSigns, d),
            },
            OperatorKind::HadamardPHD => {
                let d_pad = d.next_power_of_two();
                Repr::Hadamard {
                    d_pad,
                    signs: draw_signs(seed, Purpose::HadamardSigns, d_pad),
                    coords: draw_coords(seed, Purpose::HadamardSample, m, d_pad),
                }
            }
            OperatorKind::SamplingP => {
                Repr::Sampling { coords: draw_coords(seed, Purpose::Sampling, m, d) }
            }
            OperatorKind::Explicit => {
                return Err(Error::Argument("explicit operators need a matrix".into()))
            }
        };
        Ok(Self { kind, d, m, seed, repr })
    }

    /// Wraps a row-major `m x d` matrix.
    pub fn explicit(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        check_dims(d, m)?;
        if rows.iter().any(|r| r.len() != d) {
            return arg_err("ragged matrix");
        }
        let mut cols = vec![0.0; d * m];
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                cols[c * m + r] = v;
            }
        }
        Ok(Self { kind: OperatorKind::Explicit, d, m, seed: 0, repr: Repr::Dense(cols) })
    }

    /// `scale * I_d`.
    pub fn scaled_identity(d: usize, scale: f64) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|r| (0..d).map(|c| if r == c { scale } else { 0.0 }).collect())
            .collect();
        Self::explicit(&rows)
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::scaled_identity(d, 1.0)
    }

    /// Hashing operator with a given bucket map and sign vector.
    pub fn hashing_with(m: usize, buckets: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        let d = buckets.len();
        check_dims(d, m)?;
        if signs.len() != d || buckets.iter().any(|&b| b >= m) {
            return arg_err("bucket map and signs must cover d features with buckets < m");
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return arg_err("signs must be ±1");
        }
        Ok(Self { kind: OperatorKind::HashingHD, d, m, seed: 0, repr: Repr::Hash { buckets, signs } })
    }

    /// Randomized Hadamard operator with given signs (length `d_pad`) and
    /// sampled coordinates.
    pub fn hadamard_with(d: usize, signs: Vec<f64>, coords: Vec<usize>) -> Result<Self> {
        let m = coords.len();
        check_dims(d, m)?;
        let d_pad = d.next_power_of_two();
        if signs.len() != d_pad || coords.iter().any(|&c| c >= d_pad) {
            return arg_err("signs must have length d_pad and coords lie in [0, d_pad)");
        }
        Ok(Self {
            kind: OperatorKind::HadamardPHD,
            d,
            m,
            seed: 0,
            repr: Repr::Hadamard { d_pad, signs, coords },
        })
    }

    pub fn sampling_with(d: usize, coords: Vec<usize>) -> Result<Self> {
        let m = coords.len();
        check_dims(d, m)?;
        if coords.iter().any(|&c| c >= d) {
            return arg_err("sampled coordinates must be < d");
        }
        Ok(Self { kind: OperatorKind::SamplingP, d, m, seed: 0, repr: Repr::Sampling { coords } })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_materialized(&self) -> bool {
        !matches!(self.repr, Repr::Streamed)
    }

    /// Sampled coordinates for the sampling-based kinds.
    pub fn sampled_coords(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::Hadamard { coords, .. } | Repr::Sampling { coords } => Some(coords),
            _ => None,
        }
    }

    fn streamed_entry(&self, rng: &mut CounterStream, r: usize, c: usize) -> f64 {
        projection_entry(self.kind, rng.word_at((r * self.d + c) as u64), self.m)
    }

    pub fn apply(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.dim() != self.d {
            return arg_err(format!("vector has dim {} but operator expects {}", x.dim(), self.d));
        }
        let m = self.m;
        let mut out = vec![0.0; m];
        match &self.repr {
            Repr::Dense(cols) => {
                for (j, v) in x.iter() {
                    for (o, a) in out.iter_mut().zip(&cols[j * m..(j + 1) * m]) {
                        *o += a * v;
                    }
                }
            }
            Repr::Streamed => {
                // Same accumulation order as the dense path.
                let mut rng = CounterStream::new(self.seed, projection_purpose(self.kind), 0);
                for (j, v) in x.iter() {
                    for (r, o) in out.iter_mut().enumerate() {
                        *o += self.streamed_entry(&mut rng, r, j) * v;
                    }
                }
            }
            Repr::Hash { buckets, signs } => {
                for (j, v) in x.iter() {
                    out[buckets[j]] += signs[j] * v;
                }
            }
            Repr::Hadamard { d_pad, signs, coords } => {
                let mut buf = vec![0.0; *d_pad];
                for (j, v) in x.iter() {
                    buf[j] = signs[j] * v;
                }
                fwht(&mut buf);
                let scale = 1.0 / (m as f64).sqrt();
                for (o, &c) in out.iter_mut().zip(coords) {
                    *o = scale * buf[c];
                }
            }
            Repr::Sampling { coords } => {
                let scale = (self.d as f64 / m as f64).sqrt();
                let dense = x.to_dense();
                for (o, &c) in out.iter_mut().zip(coords) {
                    *o = scale * dense[c];
                }
            }
        }
        Ok(out)
    }

    pub fn apply_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply(&SparseVector::from_dense(x))
    }

    /// `A^T u`, truncated to the original `d` coordinates for padded kinds.
    pub fn adjoint(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.m {
            return arg_err(format!("vector has dim {} but operator has m = {}", u.len(), self.m));
        }
        let (d, m) = (self.d, self.m);
        let mut out = vec![0.0; d];
        match &self.repr {
            Repr::Dense(cols) => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = cols[j * m..(j + 1) * m].iter().zip(u).map(|(a, b)| a * b).sum();
                }
            }
            Repr::Streamed => {
                let mut rng = CounterStream::new(self.seed, projection_purpose(self.kind), 0);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = (0..m).map(|r| self.streamed_entry(&mut rng, r, j) * u[r]).sum();
                }
            }
            Repr::Hash { buckets, signs } => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = signs[j] * u[buckets[j]];
                }
            }
            Repr::Hadamard { d_pad, signs, coords } => {
                let scale = 1.0 / (m as f64).sqrt();
                let mut buf = vec![0.0; *d_pad];
                for (&c, &v) in coords.iter().zip(u) {
                    buf[c] += scale * v;
                }
                fwht(&mut buf);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = signs[j] * buf[j];
                }
            }
            Repr::Sampling { coords } => {
                let scale = (d as f64 / m as f64).sqrt();
                for (&c, &v) in coords.iter().zip(u) {
                    out[c] += scale * v;
                }
            }
        }
        Ok(out)
    }

    /// One-line replay header: `kind=<k> d=<d> m=<m> seed=<s>`.
    pub fn header(&self) -> Result<String> {
        if self.kind == OperatorKind::Explicit {
            return Err(Error::Unsupported("explicit operators have no replay header".into()));
        }
        Ok(OperatorSpec { kind: self.kind, d: self.d, m: self.m, seed: self.seed }.to_string())
    }
}

/// The replayable identity of a seeded operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub d: usize,
    pub m: usize,
    pub seed: u64,
}

impl OperatorSpec {
    pub fn build(&self) -> Result<ReductionOperator> {
        make_operator(self.kind, self.d, self.m, self.seed)
    }
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "kind={} d={} m={} seed={}", self.kind, self.d, self.m, self.seed)
    }
}

impl FromStr for OperatorSpec {
    type Err = Error;

    /// Parses the header written by [`ReductionOperator::header`]. Keys may
    /// come in any order but each must appear exactly once.
    fn from_str(s: &str) -> Result<Self> {
        let line = s.trim();
        let bad = |msg: String| Error::Parse { line: 1, msg };
        let (mut kind, mut d, mut m, mut seed) = (None, None, None, None);
        for tok in line.split_whitespace() {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got '{tok}'")))?;
            let num = || val.parse::<u64>().map_err(|_| bad(format!("bad number '{val}' for {key}")));
            let slot_taken = match key {
                "kind" => kind.replace(val.parse::<OperatorKind>().map_err(|e| bad(e.to_string()))?).is_some(),
                "d" => d.replace(num()? as usize).is_some(),
                "m" => m.replace(num()? as usize).is_some(),
                "seed" => seed.replace(num()?).is_some(),
                _ => return Err(bad(format!("unknown key '{key}'"))),
            };
            if slot_taken {
                return Err(bad(format!("duplicate key '{key}'")));
            }
        }
        match (kind, d, m, seed) {
            (Some(kind), Some(d), Some(m), Some(seed)) => {
                check_dims(d, m).map_err(|e| bad(e.to_string()))?;
                Ok(OperatorSpec { kind, d, m, seed })
            }
            _ => Err(bad("header needs kind, d, m and seed".into())),
        }
    }
}

/// Reduced data: a dense `m x n` matrix stored column by column, plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDataset {
    m: usize,
    cols: Vec<f64>,
    labels: Vec<f64>,
}

impl ReducedDataset {
    pub fn from_columns(m: usize, columns: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if columns.len() != labels.len() || columns.iter().any(|c| c.len() != m) {
            return arg_err("columns must all have length m and match the labels");
        }
        Ok(Self { m, cols: columns.concat(), labels })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.cols[i * self.m..(i + 1) * self.m]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
}

pub fn apply_dataset(op: &ReductionOperator, ds: &LabeledDataset) -> Result<ReducedDataset> {
    if ds.d() != op.d() {
        return arg_err(format!("dataset has d = {} but operator expects {}", ds.d(), op.d()));
    }
    let mut cols = Vec::with_capacity(ds.n() * op.m());
    for x in ds.examples() {
        cols.extend(op.apply(x)?);
    }
    Ok(ReducedDataset { m: op.m(), cols, labels: ds.labels().to_vec() })
}

/// Empirical distortion of an operator over a probe set.
#[derive(Debug, Clone, PartialEq)]
pub struct JlDiagnostic {
    pub kind: OperatorKind,
    pub d: usize,
    pub m: usize,
    pub seed: u64,
    /// `|‖Ap‖² − ‖p‖²| / ‖p‖²` per probe, in probe order.
    pub distortions: Vec<f64>,
    /// `(q, value)` at q = 0.5, 0.9, 0.99.
    pub quantiles: Vec<(f64, f64)>,
    /// Largest probe norm.
    pub r_max: f64,
    /// Largest `‖p‖∞ / ‖p‖₂` over the probes.
    pub spikiness: f64,
}

pub const JL_QUANTILES: [f64; 3] = [0.5, 0.9, 0.99];

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

pub fn jl_distortion(op: &ReductionOperator, probes: &[Vec<f64>]) -> Result<JlDiagnostic> {
    if probes.is_empty() {
        return arg_err("need at least one probe");
    }
    let mut distortions = Vec::with_capacity(probes.len());
    let (mut r_max, mut spikiness) = (0.0f64, 0.0f64);
    for p in probes {
        let sq: f64 = p.iter().map(|v| v * v).sum();
        if sq == 0.0 {
            return arg_err("probe vectors must be nonzero");
        }
        let ap = op.apply_dense(p)?;
        let asq: f64 = ap.iter().map(|v| v * v).sum();
        distortions.push((asq - sq).abs() / sq);
        r_max = r_max.max(sq.sqrt());
        let inf = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        spikiness = spikiness.max(inf / sq.sqrt());
    }
    let mut sorted = distortions.clone();
    sorted.sort_by(f64::total_cmp);
    let quantiles = JL_QUANTILES.iter().map(|&q| (q, quantile_sorted(&sorted, q))).collect();
    Ok(JlDiagnostic {
        kind: op.kind(),
        d: op.d(),
        m: op.m(),
        seed: op.seed(),
        distortions,
        quantiles,
        r_max,
        spikiness,
    })
}

impl JlDiagnostic {
    pub const CSV_HEADER: &'static str = "kind,d,m,seed,quantile,value";

    pub fn csv_rows(&self) -> Vec<String> {
        self.quantiles
            .iter()
            .map(|(q, v)| format!("{},{},{},{},{},{}", self.kind, self.d, self.m, self.seed, q, v))
            .collect()
    }

    pub fn median(&self) -> f64 {
        self.quantiles[0].1
    }
}

/// `count` Gaussian probe directions scaled to unit norm.
pub fn unit_probes(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = CounterStream::new(seed, Purpose::Probes, 0);
    (0..count)
        .map(|_| {
            let mut p: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            p.iter_mut().for_each(|v| *v /= norm);
            p
        })
        .collect()
}
