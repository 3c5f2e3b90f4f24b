//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, and a key may repeat to build a
//! grid: `m = 64` followed by `m = 128` is the same as `m = 64,128`. Settings
//! given on the command line replace the file's values for that key.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use dsrr::dataset::{parse_svmlight, LabeledDataset, SynthSpec};
use dsrr::Error;

pub const KNOWN_KEYS: &[&str] = &[
    "data",
    "test",
    "synth",
    "data_seed",
    "op",
    "m",
    "d",
    "tau",
    "tau_factor",
    "lambda",
    "loss",
    "seeds",
    "gap_tol",
    "max_epochs",
    "out",
    "suite",
    "nodes",
    "comm",
    "rounds",
    "probes",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, Vec<String>>,
}

pub const MAX_SEEDS: usize = 100_000;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_config(text: &str) -> Result<ConfigMap, Error> {
    let mut map = ConfigMap::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected key = value, got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN_KEYS.contains(&key) {
            return Err(parse_err(line_no, format!("unknown key '{key}'")));
        }
        if value.is_empty() {
            return Err(parse_err(line_no, format!("empty value for '{key}'")));
        }
        map.entries.entry(key.to_string()).or_default().push(value.to_string());
    }
    Ok(map)
}

impl ConfigMap {
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), vec![value.into()]);
    }

    /// Keys present in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &ConfigMap) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// The last value given for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).and_then(|v| v.last()).map(String::as_str)
    }

    /// All values of `key`, each split on commas.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, Error> {
        let Some(values) = self.entries.get(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for item in values.iter().flat_map(|v| v.split(',')) {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            out.push(
                item.parse()
                    .map_err(|_| Error::Argument(format!("bad value '{item}' for '{key}'")))?,
            );
        }
        if out.is_empty() {
            return Err(Error::Argument(format!("'{key}' has no values")));
        }
        Ok(Some(out))
    }

    pub fn list_or<T: FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>, Error> {
        Ok(self.list(key)?.unwrap_or_else(|| default.to_vec()))
    }

    /// Seed list where items may also be half-open ranges `a..b`, at most
    /// [`MAX_SEEDS`] in total.
    pub fn seeds_or(&self, default: &[u64]) -> Result<Vec<u64>, Error> {
        let Some(values) = self.entries.get("seeds") else {
            return Ok(default.to_vec());
        };
        let bad = |item: &str| Error::Argument(format!("bad seed '{item}'"));
        let mut out = Vec::new();
        for item in values.iter().flat_map(|v| v.split(',')).map(str::trim).filter(|i| !i.is_empty()) {
            match item.split_once("..") {
                Some((a, b)) => {
                    let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad(item))?, b.trim().parse().map_err(|_| bad(item))?);
                    if b.saturating_sub(a) as usize > MAX_SEEDS.saturating_sub(out.len()) {
                        return Err(Error::Argument(format!("seed range '{item}' exceeds {MAX_SEEDS} seeds")));
                    }
                    out.extend(a..b);
                }
                None => out.push(item.parse().map_err(|_| bad(item))?),
            }
            if out.len() > MAX_SEEDS {
                return Err(Error::Argument(format!("'seeds' lists more than {MAX_SEEDS} values")));
            }
        }
        if out.is_empty() {
            return Err(Error::Argument("'seeds' has no values".into()));
        }
        Ok(out)
    }

    pub fn one<T: FromStr>(&self, key: &str) -> Result<Option<T>, Error> {
        self.get(key)
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| Error::Argument(format!("bad value '{v}' for '{key}'")))
            })
            .transpose()
    }

    pub fn one_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, Error> {
        Ok(self.one(key)?.unwrap_or(default))
    }

    /// Renders the map back to the file format, one line per value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, values) in &self.entries {
            for v in values {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

/// Synthetic data shape without a seed: `n,d,s,margin,noise`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthShape {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub margin: f64,
    pub noise: f64,
}

impl SynthShape {
    pub fn spec(&self, n: usize, seed: u64) -> SynthSpec {
        SynthSpec { n, d: self.d, s_target: self.s.min(n), margin: self.margin, noise: self.noise, seed }
    }
}

impl FromStr for SynthShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::Argument(format!("synthetic spec must be n,d,s,margin,noise; got '{s}'"));
        if parts.len() != 5 {
            return Err(bad());
        }
        Ok(SynthShape {
            n: parts[0].parse().map_err(|_| bad())?,
            d: parts[1].parse().map_err(|_| bad())?,
            s: parts[2].parse().map_err(|_| bad())?,
            margin: parts[3].parse().map_err(|_| bad())?,
            noise: parts[4].parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File { train: PathBuf, test: Option<PathBuf> },
    Synth(SynthShape),
}

/// Fraction of a single file held out for testing when no test file is given.
pub const HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub name: String,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

impl DataSource {
    pub fn from_config(cfg: &ConfigMap) -> Result<Self, Error> {
        match (cfg.get("data"), cfg.get("synth")) {
            (Some(_), Some(_)) => Err(Error::Argument("give either data or synth, not both".into())),
            (Some(path), None) => Ok(DataSource::File {
                train: PathBuf::from(path),
                test: cfg.get("test").map(PathBuf::from),
            }),
            (None, Some(shape)) => Ok(DataSource::Synth(shape.parse()?)),
            (None, None) => Err(Error::Argument("no dataset: pass --data PATH or --synth n,d,s,margin,noise".into())),
        }
    }

    /// Loads the data. Synthetic sets draw `2n` examples from one generator
    /// and keep the second half for testing.
    pub fn load(&self, seed: u64) -> Result<LoadedData, Error> {
        match self {
            DataSource::Synth(shape) => {
                let n_test = shape.n.max(1);
                let all = dsrr::dataset::synth_sparse_dual(&shape.spec(shape.n + n_test, seed))?;
                let train: Vec<usize> = (0..shape.n).collect();
                let test: Vec<usize> = (shape.n..shape.n + n_test).collect();
                Ok(LoadedData {
                    name: format!("synth-{}x{}", shape.n, shape.d),
                    train: all.subset(&train),
                    test: all.subset(&test),
                })
            }
            DataSource::File { train, test } => {
                let read = |p: &PathBuf| {
                    std::fs::read_to_string(p)
                        .map_err(|e| Error::Argument(format!("cannot read {}: {e}", p.display())))
                };
                let name = train.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let full = parse_svmlight(&read(train)?, None)?;
                match test {
                    Some(tp) => {
                        let t = parse_svmlight(&read(tp)?, None)?;
                        let d = full.d().max(t.d());
                        Ok(LoadedData { name, train: full.with_dim(d)?, test: t.with_dim(d)? })
                    }
                    None => {
                        let n = full.n();
                        let n_test = ((n as f64 * HOLDOUT_FRACTION).round() as usize).clamp(1, n.saturating_sub(1).max(1));
                        let cut = n - n_test;
                        Ok(LoadedData {
                            name,
                            train: full.subset(&(0..cut).collect::<Vec<_>>()),
                            test: full.subset(&(cut..n).collect::<Vec<_>>()),
                        })
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_keys_build_grids() {
        let cfg = parse_config("# grid\nm = 64\nm=128,256\n\ntau = 0.1 # trailing\n").unwrap();
        assert_eq!(cfg.list::<usize>("m").unwrap().unwrap(), vec![64, 128, 256]);
        assert_eq!(cfg.one::<f64>("tau").unwrap(), Some(0.1));
        assert_eq!(cfg.one::<f64>("lambda").unwrap(), None);
    }

    #[test]
    fn overlay_replaces_whole_keys() {
        let mut file = parse_config("m = 64\nm = 128\nlambda = 0.1").unwrap();
        let mut cli = ConfigMap::default();
        cli.set("m", "32");
        file.overlay(&cli);
        assert_eq!(file.list::<usize>("m").unwrap().unwrap(), vec![32]);
        assert_eq!(file.get("lambda"), Some("0.1"));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(parse_config("m 64"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("\nbogus = 1"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("m ="), Err(Error::Parse { line: 1, .. })));
        assert!(parse_config("m = x").unwrap().list::<usize>("m").is_err());
    }

    #[test]
    fn text_round_trip() {
        let cfg = parse_config("m = 64\nm = 128\nop = gauss\n").unwrap();
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn seed_ranges() {
        let cfg = parse_config("seeds = 0..3, 7\nseeds = 10").unwrap();
        assert_eq!(cfg.seeds_or(&[]).unwrap(), vec![0, 1, 2, 7, 10]);
        assert_eq!(ConfigMap::default().seeds_or(&[4]).unwrap(), vec![4]);
        assert!(parse_config("seeds = 3..x").unwrap().seeds_or(&[]).is_err());
        assert!(parse_config("seeds = 5..5").unwrap().seeds_or(&[]).is_err());
        assert!(parse_config("seeds = 5..33333333333333335").unwrap().seeds_or(&[]).is_err());
        assert!(parse_config("seeds = 0..100000, 1").unwrap().seeds_or(&[]).is_err());
    }

    #[test]
    fn synth_shape() {
        let s: SynthShape = "100,20,5,0.5,0.1".parse().unwrap();
        assert_eq!((s.n, s.d, s.s), (100, 20, 5));
        assert!("1,2,3".parse::<SynthShape>().is_err());
    }
}
