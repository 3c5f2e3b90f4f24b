//! Empirical distortion `|‖Ap‖² − ‖p‖²| / ‖p‖²` over operator kinds and m.

use std::path::Path;
use std::str::FromStr;

use dsrr::dataset::synth_spiky;
use dsrr::sketch::{jl_distortion, make_operator, median, unit_probes, JlDiagnostic, OperatorKind};
use dsrr::{Error, Result};

use crate::config::ConfigMap;
use crate::svg::{line_chart, Axes, Series};
use crate::sweep::write_file;

/// `unit:COUNT` for Gaussian directions or `spiky:COUNT:NNZ` for vectors
/// supported on a few coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeSpec {
    Unit { count: usize },
    Spiky { count: usize, nnz: usize },
}

impl ProbeSpec {
    pub fn probes(&self, d: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        match *self {
            ProbeSpec::Unit { count } => Ok(unit_probes(d, count, seed)),
            ProbeSpec::Spiky { count, nnz } => {
                Ok(synth_spiky(count, d, nnz, seed)?.examples().iter().map(|x| x.to_dense()).collect())
            }
        }
    }
}

impl FromStr for ProbeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Argument(format!("probe spec must be unit:COUNT or spiky:COUNT:NNZ, got '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.parse::<usize>().ok().filter(|v| *v > 0).ok_or_else(bad);
        match parts.as_slice() {
            ["unit", c] => Ok(ProbeSpec::Unit { count: num(c)? }),
            ["spiky", c, z] => Ok(ProbeSpec::Spiky { count: num(c)?, nnz: num(z)? }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JlConfig {
    pub kinds: Vec<OperatorKind>,
    pub d: usize,
    pub ms: Vec<usize>,
    pub probes: ProbeSpec,
    pub seeds: Vec<u64>,
}

impl JlConfig {
    pub fn from_config(cfg: &ConfigMap) -> Result<Self> {
        let jl = JlConfig {
            kinds: cfg.list_or(
                "op",
                &[OperatorKind::GaussianProjection, OperatorKind::HashingHD, OperatorKind::HadamardPHD, OperatorKind::SamplingP],
            )?,
            d: cfg.one_or("d", 512)?,
            ms: cfg.list_or("m", &[32, 64, 128, 256, 512])?,
            probes: cfg.one_or("probes", ProbeSpec::Unit { count: 200 })?,
            seeds: cfg.seeds_or(&[0, 1, 2, 3, 4])?,
        };
        if jl.d == 0 || jl.kinds.is_empty() || jl.ms.is_empty() || jl.seeds.is_empty() {
            return Err(Error::Argument("jl needs d > 0 and nonempty op, m and seed lists".into()));
        }
        Ok(jl)
    }
}

/// One diagnostic per `(kind, m, seed)` in grid order. The probe set depends
/// only on the seed, so every operator sees the same probes.
pub fn run_jl(cfg: &JlConfig) -> Result<Vec<JlDiagnostic>> {
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let probes = cfg.probes.probes(cfg.d, seed)?;
        for &kind in &cfg.kinds {
            for &m in &cfg.ms {
                out.push(jl_distortion(&make_operator(kind, cfg.d, m, seed)?, &probes)?);
            }
        }
    }
    out.sort_by_key(|r| {
        (
            cfg.kinds.iter().position(|k| *k == r.kind),
            cfg.ms.iter().position(|m| *m == r.m),
            cfg.seeds.iter().position(|s| *s == r.seed),
        )
    });
    Ok(out)
}

pub fn jl_csv(rows: &[JlDiagnostic]) -> String {
    let mut out = format!("{}\n", JlDiagnostic::CSV_HEADER);
    for r in rows {
        for line in r.csv_rows() {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

/// Median over seeds of the per-run median distortion, one series per kind.
pub fn median_curves(rows: &[JlDiagnostic]) -> Vec<Series> {
    let mut series: Vec<Series> = Vec::new();
    for r in rows {
        let label = r.kind.to_string();
        if !series.iter().any(|s| s.label == label) {
            series.push(Series { label, points: Vec::new() });
        }
    }
    for s in &mut series {
        let mut ms: Vec<usize> = rows.iter().filter(|r| r.kind.name() == s.label).map(|r| r.m).collect();
        ms.dedup();
        for m in ms {
            let meds: Vec<f64> =
                rows.iter().filter(|r| r.kind.name() == s.label && r.m == m).map(JlDiagnostic::median).collect();
            s.points.push((m as f64, median(&meds)));
        }
    }
    series
}

pub fn write_outputs(rows: &[JlDiagnostic], out: &Path) -> Result<Vec<String>> {
    let svg = line_chart(
        "Median JL distortion",
        "m",
        "median distortion",
        &median_curves(rows),
        Axes { log_x: true, log_y: true },
    );
    Ok(vec![write_file(out, "jl.csv", &jl_csv(rows))?, write_file(out, "jl.svg", &svg)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_specs() {
        assert_eq!("unit:10".parse::<ProbeSpec>().unwrap(), ProbeSpec::Unit { count: 10 });
        assert_eq!("spiky:5:2".parse::<ProbeSpec>().unwrap(), ProbeSpec::Spiky { count: 5, nnz: 2 });
        for bad in ["unit", "unit:0", "spiky:3", "gauss:4", ""] {
            assert!(bad.parse::<ProbeSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn grid_rows_and_curves() {
        let cfg = JlConfig {
            kinds: vec![OperatorKind::GaussianProjection, OperatorKind::HashingHD],
            d: 64,
            ms: vec![8, 32],
            probes: ProbeSpec::Unit { count: 30 },
            seeds: vec![0, 1],
        };
        let rows = run_jl(&cfg).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(jl_csv(&rows).lines().count(), 1 + 8 * 3);
        let curves = median_curves(&rows);
        assert_eq!(curves.len(), 2);
        assert!(curves.iter().all(|c| c.points.len() == 2 && c.points[1].1 < c.points[0].1));
    }
}
