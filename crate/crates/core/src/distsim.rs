//! In-process simulation of distributed dual coordinate ascent.
//!
//! Each of `K` virtual nodes owns a block of examples and its dual variables.
//! In a round every node starts from the current global `w`, runs coordinate
//! ascent over its own block against a private copy of `w`, and reports its
//! block change `Δβ_k` and the matching `Δw_k`. The global state then moves by
//! the average `(1/K) Σ_k (Δβ_k, Δw_k)`. Because each node's change improves
//! the dual and the dual is concave, the average improves it too. Nodes are
//! processed in index order, so a run is a pure function of its inputs.
//!
//! The primal objective of the averaged iterate need not decrease from round
//! to round under the hinge loss, so each record reports the best primal
//! iterate seen so far. Its gap against the current dual is still a valid
//! certificate and never increases.

use std::time::Instant;

use crate::dataset::LabeledDataset;
use crate::dualsolve::{coordinate_step, predict_error, solve_reduced_sparse, Loss, SolveResult, SolverConfig};
use crate::error::{arg_err, Result};
use crate::rng::{CounterStream, Purpose};
use crate::sketch::{apply_dataset, ReductionOperator};

/// Rounds stop once the duality gap falls to this value.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub alpha: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistConfig {
    pub k_nodes: usize,
    /// Coordinate updates per node per round; `None` is one pass over the
    /// node's examples.
    pub local_updates: Option<usize>,
    pub max_rounds: usize,
    pub lambda: f64,
    pub loss: Loss,
    pub seed: u64,
    pub gap_tol: f64,
    pub warm_start: Option<WarmStart>,
}

impl DistConfig {
    pub fn new(k_nodes: usize, lambda: f64, loss: Loss) -> Self {
        Self {
            k_nodes,
            local_updates: None,
            max_rounds: 100,
            lambda,
            loss,
            seed: 0,
            gap_tol: DEFAULT_GAP_TOL,
            warm_start: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_nodes == 0 {
            return arg_err("k_nodes must be at least 1");
        }
        if self.local_updates == Some(0) {
            return arg_err("local_updates must be at least 1");
        }
        if !(self.lambda > 0.0) {
            return arg_err("lambda must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub comm_vectors: usize,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub test_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistRunTrace {
    /// Round 0 is the starting point.
    pub records: Vec<RoundRecord>,
    /// Dual variables, partitions concatenated in order.
    pub alpha: Vec<f64>,
    /// Primal iterate `-(1/λn) X α` matching `alpha`.
    pub w: Vec<f64>,
    /// Primal iterate with the lowest objective seen; its objective, gap and
    /// test error are what the records report.
    pub best_w: Vec<f64>,
    pub coordinate_updates: usize,
    pub converged: bool,
    /// Wall-clock seconds per round; not part of the deterministic output.
    pub round_seconds: Vec<f64>,
}

impl DistRunTrace {
    pub const CSV_HEADER: &'static str = "round,comm_vectors,primal_obj,gap,test_error";

    pub fn rounds_run(&self) -> usize {
        self.records.len() - 1
    }

    pub fn total_comm(&self) -> usize {
        self.records.iter().map(|r| r.comm_vectors).sum()
    }

    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("trace always holds round 0")
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{},{},{},{}\n", r.round, r.comm_vectors, r.primal_obj, r.gap, r.test_error));
        }
        out
    }

    /// First round whose test error is within `tol` of `target`.
    pub fn rounds_to_error(&self, target: f64, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| (r.test_error - target).abs() <= tol).map(|r| r.round)
    }
}

struct Best {
    primal: f64,
    w: Vec<f64>,
}

struct Node<'a> {
    data: &'a LabeledDataset,
    offset: usize,
    qnorm: Vec<f64>,
    order: Vec<usize>,
    cursor: usize,
    rng: CounterStream,
}

fn objectives(parts: &[LabeledDataset], loss: Loss, lambda: f64, beta: &[f64], w: &[f64]) -> (f64, f64) {
    let n = beta.len() as f64;
    let mut loss_sum = 0.0;
    let mut offset = 0;
    for p in parts {
        for (x, &y) in p.examples().iter().zip(p.labels()) {
            loss_sum += loss.value(1.0, y * x.dot_dense(w));
        }
        offset += p.n();
    }
    debug_assert_eq!(offset, beta.len());
    let dual_sum: f64 = beta.iter().map(|&b| loss.dual_term(1.0, b)).sum();
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    (loss_sum / n + reg, dual_sum / n - reg)
}

fn primal_from_parts(parts: &[LabeledDataset], d: usize, lambda: f64, beta: &[f64]) -> Vec<f64> {
    let scale = 1.0 / (lambda * beta.len() as f64);
    let mut w = vec![0.0; d];
    let mut offset = 0;
    for p in parts {
        for (j, (x, &y)) in p.examples().iter().zip(p.labels()).enumerate() {
            let b = beta[offset + j];
            if b != 0.0 {
                x.axpy_into(scale * b * y, &mut w);
            }
        }
        offset += p.n();
    }
    w
}

/// Runs rounds until the gap reaches `cfg.gap_tol` or `cfg.max_rounds`.
pub fn disdca_run(parts: &[LabeledDataset], test: &LabeledDataset, cfg: &DistConfig) -> Result<DistRunTrace> {
    cfg.validate()?;
    if parts.len() != cfg.k_nodes {
        return arg_err(format!("{} partitions for {} nodes", parts.len(), cfg.k_nodes));
    }
    let d = parts[0].d();
    if parts.iter().any(|p| p.d() != d) || test.d() != d {
        return arg_err("partitions and test set must share one dimension");
    }
    let n: usize = parts.iter().map(|p| p.n()).sum();
    if n == 0 {
        return arg_err("no training examples");
    }
    let labels: Vec<f64> = parts.iter().flat_map(|p| p.labels().iter().copied()).collect();
    let lambda = cfg.lambda;
    let inv_lambda_n = 1.0 / (lambda * n as f64);

    let (mut beta, mut w) = match &cfg.warm_start {
        None => (vec![0.0; n], vec![0.0; d]),
        Some(ws) => {
            if ws.alpha.len() != n || ws.w.len() != d {
                return arg_err(format!(
                    "warm start has {} duals and {} weights, expected {n} and {d}",
                    ws.alpha.len(),
                    ws.w.len()
                ));
            }
            let beta: Vec<f64> = labels.iter().zip(&ws.alpha).map(|(y, a)| -y * a).collect();
            if beta.iter().any(|&b| cfg.loss.clamp_beta(b) != b) {
                return arg_err("warm-start duals violate the loss constraints");
            }
            let implied = primal_from_parts(parts, d, lambda, &beta);
            let scale = 1.0f64.max(implied.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
            let mismatch = implied.iter().zip(&ws.w).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
            if mismatch > 1e-8 * scale {
                return arg_err(format!("warm-start w disagrees with -(1/λn)Xα by {mismatch:e}"));
            }
            (beta, ws.w.clone())
        }
    };

    let mut offset = 0;
    let mut nodes: Vec<Node> = parts
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let node = Node {
                data: p,
                offset,
                qnorm: p.examples().iter().map(|x| x.sq_norm() * inv_lambda_n).collect(),
                order: (0..p.n()).collect(),
                cursor: p.n(),
                rng: CounterStream::new(cfg.seed, Purpose::Permutation, k as u32),
            };
            offset += p.n();
            node
        })
        .collect();

    let mut best = Best { primal: f64::INFINITY, w: w.clone() };
    let mut record = |round: usize, comm: usize, beta: &[f64], w: &[f64]| -> Result<RoundRecord> {
        let (p, dual) = objectives(parts, cfg.loss, lambda, beta, w);
        if p < best.primal {
            best = Best { primal: p, w: w.to_vec() };
        }
        Ok(RoundRecord {
            round,
            comm_vectors: comm,
            primal_obj: best.primal,
            dual_obj: dual,
            gap: best.primal - dual,
            test_error: predict_error(&best.w, test)?,
        })
    };

    let mut records = vec![record(0, usize::from(cfg.warm_start.is_some()), &beta, &w)?];
    let mut round_seconds = Vec::new();
    let mut coordinate_updates = 0;
    let k = cfg.k_nodes;
    let weight = 1.0 / k as f64;

    while records.last().map(|r| r.gap).unwrap_or(f64::INFINITY) > cfg.gap_tol && records.len() <= cfg.max_rounds {
        let start = Instant::now();
        let mut new_beta = beta.clone();
        let mut new_w = w.clone();
        for node in nodes.iter_mut() {
            let updates = cfg.local_updates.unwrap_or(node.data.n());
            let mut local_w = w.clone();
            let mut local_beta: Vec<f64> = beta[node.offset..node.offset + node.data.n()].to_vec();
            for _ in 0..updates {
                if node.data.n() == 0 {
                    break;
                }
                if node.cursor == node.order.len() {
                    node.rng.shuffle(&mut node.order);
                    node.cursor = 0;
                }
                let i = node.order[node.cursor];
                node.cursor += 1;
                let y = node.data.label(i);
                let z = y * node.data.example(i).dot_dense(&local_w);
                let old = local_beta[i];
                let new = coordinate_step(cfg.loss, 1.0, old, z, node.qnorm[i]);
                coordinate_updates += 1;
                if new != old {
                    node.data.example(i).axpy_into((new - old) * y * inv_lambda_n, &mut local_w);
                    local_beta[i] = new;
                }
            }
            if k == 1 {
                new_beta[node.offset..node.offset + node.data.n()].copy_from_slice(&local_beta);
                new_w = local_w;
            } else {
                for (j, b) in local_beta.iter().enumerate() {
                    new_beta[node.offset + j] += weight * (b - beta[node.offset + j]);
                }
                for ((nw, lw), g) in new_w.iter_mut().zip(&local_w).zip(&w) {
                    *nw += weight * (lw - g);
                }
            }
        }
        beta = new_beta;
        w = new_w;
        round_seconds.push(start.elapsed().as_secs_f64());
        records.push(record(records.len(), k, &beta, &w)?);
    }

    let converged = records.last().map(|r| r.gap <= cfg.gap_tol).unwrap_or(false);
    let alpha = labels.iter().zip(&beta).map(|(y, b)| -y * b).collect();
    let best_w = best.w;
    Ok(DistRunTrace { records, alpha, w, best_w, coordinate_updates, converged, round_seconds })
}

/// `-(1/λn) X α` for partitioned data, partitions concatenated in order.
pub fn recompute_primal(parts: &[LabeledDataset], alpha: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n: usize = parts.iter().map(|p| p.n()).sum();
    if alpha.len() != n || parts.is_empty() {
        return arg_err("alpha length does not match the partitions");
    }
    let beta: Vec<f64> = parts
        .iter()
        .flat_map(|p| p.labels().iter().copied())
        .zip(alpha)
        .map(|(y, a)| -y * a)
        .collect();
    Ok(primal_from_parts(parts, parts[0].d(), lambda, &beta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsrrWarmStart {
    pub start: WarmStart,
    /// The reduced-space solve, including the reduced model `u`.
    pub reduced: SolveResult,
    /// Number of dual entries moved back into the feasible set.
    pub clamped: usize,
}

/// Solves the dual-sparse reduced problem on `A X` and maps its dual solution
/// back to the original space as a starting point.
pub fn dsrr_warmstart(ds: &LabeledDataset, op: &ReductionOperator, cfg: &SolverConfig) -> Result<DsrrWarmStart> {
    let rds = apply_dataset(op, ds)?;
    let reduced = solve_reduced_sparse(&rds, cfg)?;
    let mut clamped = 0;
    let alpha: Vec<f64> = reduced
        .alpha
        .iter()
        .zip(ds.labels())
        .map(|(&a, &y)| {
            let b = -y * a;
            let c = cfg.loss.clamp_beta(b);
            if c != b {
                clamped += 1;
            }
            -y * c
        })
        .collect();
    let w = crate::dualsolve::recover_primal(ds, &alpha, cfg.lambda)?;
    Ok(DsrrWarmStart { start: WarmStart { alpha, w }, reduced, clamped })
}

/// Permutes a dual vector from dataset order into the concatenated order of
/// the partitions described by `index_sets`.
pub fn gather_blocks(alpha: &[f64], index_sets: &[Vec<usize>]) -> Vec<f64> {
    index_sets.iter().flatten().map(|&i| alpha[i]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodTiming {
    pub method: String,
    pub reduce: f64,
    pub reduced_solve: f64,
    pub original_solve: f64,
}

impl MethodTiming {
    pub fn total(&self) -> f64 {
        self.reduce + self.reduced_solve + self.original_solve
    }
}

pub const TIMING_CSV_HEADER: &str = "method,reduce_s,reduced_solve_s,original_solve_s,total_s";

/// Seconds spent in the first `rounds` rounds of a trace.
pub fn rounds_time(trace: &DistRunTrace, rounds: usize) -> f64 {
    trace.round_seconds.iter().take(rounds).sum()
}

/// Per-method phase times: DSRR and DSRR-Rec stop after the reduced solve,
/// each DSRR-DisDCA-k adds `k` warm rounds, DisDCA is the cold run alone.
pub fn timing_breakdown(
    warm: &DistRunTrace,
    ks: &[usize],
    cold: &DistRunTrace,
    reduce_time: f64,
    reduced_solve_time: f64,
) -> Vec<MethodTiming> {
    let mut rows = vec![
        MethodTiming { method: "DSRR".into(), reduce: reduce_time, reduced_solve: reduced_solve_time, original_solve: 0.0 },
        MethodTiming {
            method: "DSRR-Rec".into(),
            reduce: reduce_time,
            reduced_solve: reduced_solve_time,
            original_solve: 0.0,
        },
    ];
    for &k in ks {
        rows.push(MethodTiming {
            method: format!("DSRR-DisDCA-{k}"),
            reduce: reduce_time,
            reduced_solve: reduced_solve_time,
            original_solve: rounds_time(warm, k),
        });
    }
    rows.push(MethodTiming {
        method: "DisDCA".into(),
        reduce: 0.0,
        reduced_solve: 0.0,
        original_solve: rounds_time(cold, cold.rounds_run()),
    });
    rows
}

pub fn timing_csv(rows: &[MethodTiming]) -> String {
    let mut out = format!("{TIMING_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.method, r.reduce, r.reduced_solve, r.original_solve, r.total()));
    }
    out
}
