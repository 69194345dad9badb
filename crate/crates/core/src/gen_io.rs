//! Synthetic instance generation and the instance / results file formats.
//!
//! Instance files are plain text:
//!
//! ```text
//! 3 3
//! # seed=7 mode=uniform rng=chacha8-msb
//! 110
//! 101
//! 011
//! ```
//!
//! The comment line is optional on read. Generation draws one `u64` per
//! entry from ChaCha8 (`rand_chacha`, seeded with `seed_from_u64`), row by
//! row. A uniform entry is the most significant bit of the draw; a biased
//! entry is 1 when the top 53 bits, scaled to `[0, 1)`, fall below `p`.
//! That stream is named `chacha8-msb` in file headers.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bits, Instance};

/// Identifier of the bit stream used by [`generate`].
pub const RNG_ID: &str = "chacha8-msb";

/// Approval probability used when a biased mode is requested without one.
pub const DEFAULT_BIAS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GenMode {
    Uniform,
    /// Each approval is drawn with the given probability.
    Biased(f64),
}

impl GenMode {
    pub fn probability(&self) -> f64 {
        match *self {
            GenMode::Uniform => 0.5,
            GenMode::Biased(p) => p,
        }
    }
}

impl fmt::Display for GenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenMode::Uniform => f.write_str("uniform"),
            GenMode::Biased(p) => write!(f, "biased:{p}"),
        }
    }
}

impl std::str::FromStr for GenMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(GenMode::Uniform),
            "biased" => Ok(GenMode::Biased(DEFAULT_BIAS)),
            _ => {
                let p = s
                    .strip_prefix("biased:")
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown generation mode {s:?}")))?;
                let mode = GenMode::Biased(p);
                check_probability(p)?;
                Ok(mode)
            }
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("approval probability {p} outside (0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub n: usize,
    pub m: usize,
    pub mode: GenMode,
    pub seed: u64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::invalid(format!(
                "n and m must be positive (n = {}, m = {})",
                self.n, self.m
            )));
        }
        if let GenMode::Biased(p) = self.mode {
            check_probability(p)?;
        }
        Ok(())
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            seed: self.seed,
            mode: self.mode,
            rng: RNG_ID.to_string(),
        }
    }
}

pub fn generate(config: &GenConfig) -> Result<Instance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let threshold = match config.mode {
        GenMode::Uniform => None,
        GenMode::Biased(p) => Some(p),
    };
    let profiles = (0..config.n)
        .map(|_| {
            let mut row = Bits::zeros(config.m);
            for j in 0..config.m {
                let draw = rng.next_u64();
                let bit = match threshold {
                    None => draw >> 63 == 1,
                    Some(p) => ((draw >> 11) as f64) * (1.0 / (1u64 << 53) as f64) < p,
                };
                row.set(j, bit);
            }
            row
        })
        .collect();
    Instance::new(config.m, profiles)
}

/// Header comment recording how an instance was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub mode: GenMode,
    pub rng: String,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "# seed={} mode={} rng={}", self.seed, self.mode, self.rng)
    }
}

fn parse_provenance(line: &str, lineno: usize) -> Result<Provenance> {
    let body = line.trim_start_matches('#').trim();
    let (mut seed, mut mode, mut rng) = (None, None, None);
    for field in body.split_whitespace() {
        let col = line.find(field).unwrap_or(0) + 1;
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(lineno, col, format!("expected key=value, found {field:?}")))?;
        match key {
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|e| {
                    Error::parse(lineno, col, format!("bad seed {value:?}: {e}"))
                })?)
            }
            "mode" => {
                mode = Some(
                    value
                        .parse::<GenMode>()
                        .map_err(|e| Error::parse(lineno, col, e.to_string()))?,
                )
            }
            "rng" => rng = Some(value.to_string()),
            _ => return Err(Error::parse(lineno, col, format!("unknown header key {key:?}"))),
        }
    }
    match (seed, mode, rng) {
        (Some(seed), Some(mode), Some(rng)) => Ok(Provenance { seed, mode, rng }),
        _ => Err(Error::parse(lineno, 1, "header needs seed, mode and rng")),
    }
}

/// Renders an instance in the text format.
pub fn format_instance(instance: &Instance, provenance: Option<&Provenance>) -> String {
    let mut out = String::with_capacity((instance.m() + 1) * (instance.n() + 2));
    out.push_str(&format!("{} {}\n", instance.n(), instance.m()));
    if let Some(p) = provenance {
        out.push_str(&format!("{p}\n"));
    }
    for p in instance.profiles() {
        out.push_str(&p.to_string());
        out.push('\n');
    }
    out
}

/// Parses the text format, returning the instance and its header if present.
pub fn parse_instance(text: &str) -> Result<(Instance, Option<Provenance>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (lineno, first) = lines
        .next()
        .ok_or_else(|| Error::parse(1, 1, "empty instance file"))?;
    let mut dims = first.split_whitespace();
    let mut dim = |name: &str| -> Result<usize> {
        let tok = dims
            .next()
            .ok_or_else(|| Error::parse(lineno, first.len() + 1, format!("missing {name}")))?;
        let col = first.find(tok).unwrap_or(0) + 1;
        tok.parse::<usize>()
            .map_err(|e| Error::parse(lineno, col, format!("bad {name} {tok:?}: {e}")))
    };
    let n = dim("n")?;
    let m = dim("m")?;
    if dims.next().is_some() {
        return Err(Error::parse(lineno, 1, "expected exactly \"n m\""));
    }
    if n == 0 || m == 0 {
        return Err(Error::parse(lineno, 1, "n and m must be positive"));
    }

    let mut provenance = None;
    let mut profiles = Vec::with_capacity(n);
    for (lineno, line) in lines {
        if profiles.is_empty() && provenance.is_none() && line.starts_with('#') {
            provenance = Some(parse_provenance(line, lineno)?);
            continue;
        }
        if profiles.len() == n {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::parse(lineno, 1, format!("more than n = {n} profile rows")));
        }
        if line.len() != m {
            return Err(Error::parse(
                lineno,
                line.len().min(m) + 1,
                format!("profile row has length {}, expected m = {m}", line.len()),
            ));
        }
        let row = line.parse::<Bits>().map_err(|e| match e {
            Error::Parse { column, message, .. } => Error::parse(lineno, column, message),
            other => other,
        })?;
        profiles.push(row);
    }
    if profiles.len() != n {
        return Err(Error::parse(
            text.lines().count() + 1,
            1,
            format!("found {} profile rows, expected n = {n}", profiles.len()),
        ));
    }
    Ok((Instance::new(m, profiles)?, provenance))
}

pub fn write_instance(
    instance: &Instance,
    provenance: Option<&Provenance>,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, format_instance(instance, provenance))?;
    Ok(())
}

pub fn read_instance_file(path: impl AsRef<Path>) -> Result<(Instance, Option<Provenance>)> {
    parse_instance(&fs::read_to_string(path)?)
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    read_instance_file(path).map(|(inst, _)| inst)
}

/// One solve, as recorded in result CSV files.
///
/// `root_gap_pct` is computed from the combinatorial root bound,
/// `(objective - root_bound) / objective * 100`, not from an LP relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub instance_id: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub objective: u64,
    pub time_s: f64,
    pub nodes: u64,
    pub root_bound: u64,
    pub root_gap_pct: f64,
    pub solved_at_root: bool,
    pub pct_fixed: f64,
    /// False when a budget stopped the search before optimality was proved.
    pub optimal: bool,
}

pub fn write_results<W: Write>(rows: &[ResultRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub const RESULT_COLUMNS: [&str; 12] = [
    "instance_id",
    "n",
    "m",
    "k",
    "objective",
    "time_s",
    "nodes",
    "root_bound",
    "root_gap_pct",
    "solved_at_root",
    "pct_fixed",
    "optimal",
];

pub fn write_results_csv(rows: &[ResultRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    write_results(rows, std::io::BufWriter::new(file))
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn t1() -> Instance {
        Instance::from_rows(&["110", "101", "011"]).unwrap()
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig {
            n: 3,
            m: 3,
            mode: GenMode::Uniform,
            seed: 7,
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = GenConfig { seed: 8, ..cfg };
        let big = |c: GenConfig| generate(&GenConfig { n: 40, m: 40, ..c }).unwrap();
        assert_ne!(big(cfg), big(other));
    }

    #[test]
    fn uniform_frequencies_concentrate() {
        for seed in 0..3 {
            let inst = generate(&GenConfig {
                n: 1000,
                m: 20,
                mode: GenMode::Uniform,
                seed,
            })
            .unwrap();
            for &g in inst.approval_counts() {
                let f = f64::from(g) / 1000.0;
                assert!((0.40..=0.60).contains(&f), "seed {seed}: {f}");
            }
        }
    }

    #[test]
    fn biased_frequencies_concentrate() {
        for seed in 0..3 {
            let inst = generate(&GenConfig {
                n: 1000,
                m: 20,
                mode: GenMode::Biased(0.25),
                seed,
            })
            .unwrap();
            for &g in inst.approval_counts() {
                let f = f64::from(g) / 1000.0;
                assert!((0.17..=0.33).contains(&f), "seed {seed}: {f}");
            }
        }
    }

    #[test]
    fn pooled_frequency_chi_square() {
        // One-degree-of-freedom chi-square on the pooled count; 10.83 is the 0.1% critical value.
        for (mode, p) in [(GenMode::Uniform, 0.5), (GenMode::Biased(0.3), 0.3)] {
            let inst = generate(&GenConfig {
                n: 400,
                m: 50,
                mode,
                seed: 11,
            })
            .unwrap();
            let total = 400.0 * 50.0;
            let ones: f64 = inst.approval_counts().iter().map(|&g| f64::from(g)).sum();
            let exp1 = total * p;
            let exp0 = total * (1.0 - p);
            let chi = (ones - exp1).powi(2) / exp1 + ((total - ones) - exp0).powi(2) / exp0;
            assert!(chi < 10.83, "{mode}: chi-square {chi}");
        }
    }

    #[test]
    fn config_validation() {
        let bad = |n, m, mode| {
            generate(&GenConfig {
                n,
                m,
                mode,
                seed: 0,
            })
            .is_err()
        };
        assert!(bad(0, 3, GenMode::Uniform));
        assert!(bad(3, 0, GenMode::Uniform));
        assert!(bad(3, 3, GenMode::Biased(0.0)));
        assert!(bad(3, 3, GenMode::Biased(1.0)));
        assert!(bad(3, 3, GenMode::Biased(f64::NAN)));
    }

    #[test]
    fn mode_strings() {
        assert_eq!("uniform".parse::<GenMode>().unwrap(), GenMode::Uniform);
        assert_eq!("biased".parse::<GenMode>().unwrap(), GenMode::Biased(0.25));
        assert_eq!("biased:0.3".parse::<GenMode>().unwrap(), GenMode::Biased(0.3));
        assert!("biased:1.5".parse::<GenMode>().is_err());
        assert!("skewed".parse::<GenMode>().is_err());
        assert_eq!(GenMode::Biased(0.25).to_string(), "biased:0.25");
    }

    #[test]
    fn instance_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t1.txt");
        write_instance(&t1(), None, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "3 3\n110\n101\n011\n");
        assert_eq!(read_instance(&path).unwrap(), t1());

        let prov = Provenance {
            seed: 7,
            mode: GenMode::Biased(0.25),
            rng: RNG_ID.into(),
        };
        write_instance(&t1(), Some(&prov), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "3 3\n# seed=7 mode=biased:0.25 rng=chacha8-msb\n110\n101\n011\n"
        );
        let (inst, back) = read_instance_file(&path).unwrap();
        assert_eq!(inst, t1());
        assert_eq!(back, Some(prov));
    }

    fn parse_err(text: &str) -> (usize, usize) {
        match parse_instance(text) {
            Err(Error::Parse { line, column, .. }) => (line, column),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_files() {
        assert_eq!(parse_err("3 3\n110\n10\n011\n"), (3, 3));
        assert_eq!(parse_err("3 3\n110\n1x1\n011\n"), (3, 2));
        assert_eq!(parse_err("3 3\n110\n101\n"), (4, 1));
        assert_eq!(parse_err("3 3\n110\n101\n011\n111\n"), (5, 1));
        assert_eq!(parse_err("3\n"), (1, 2));
        assert_eq!(parse_err("3 z\n"), (1, 3));
        assert_eq!(parse_err("0 3\n"), (1, 1));
        assert_eq!(parse_err("1 2\n# seed=x mode=uniform rng=a\n10\n"), (2, 3));
        assert_eq!(parse_err(""), (1, 1));
    }

    fn record(id: &str, k: usize) -> ResultRecord {
        ResultRecord {
            instance_id: id.into(),
            n: 3,
            m: 3,
            k,
            objective: 2,
            time_s: 0.000123,
            nodes: 5,
            root_bound: 1,
            root_gap_pct: 50.0,
            solved_at_root: false,
            pct_fixed: 100.0 / 3.0,
            optimal: true,
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_results_csv(&[], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(
            text.trim_end(),
            "instance_id,n,m,k,objective,time_s,nodes,root_bound,root_gap_pct,solved_at_root,pct_fixed,optimal"
        );

        write_results_csv(&[record("t1", 2)], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);

        let rows = vec![record("t1", 2), record("a,\"b\"", 1)];
        write_results_csv(&rows, &path).unwrap();
        assert_eq!(read_results_csv(&path).unwrap(), rows);
    }
}
