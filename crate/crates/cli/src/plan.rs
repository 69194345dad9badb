//! Benchmark plan files.
//!
//! One directive or entry per line, `#` starts a comment:
//!
//! ```text
//! time_limit 60
//! summary results/summary.csv
//! rows results/rows.csv
//! # n  m   mode         seeds  k
//! 50   30  uniform      1..5   all
//! 50   30  biased:0.25  1..5   1..50
//! ```

use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::time::Duration;

use kvote::gen_io::GenMode;

#[derive(Debug, Clone, PartialEq)]
pub enum KRange {
    All,
    Range(RangeInclusive<usize>),
}

impl KRange {
    /// Concrete bounds for an instance with `n` voters.
    pub fn bounds(&self, n: usize) -> (usize, usize) {
        match self {
            KRange::All => (1, n),
            KRange::Range(r) => (*r.start(), (*r.end()).min(n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub n: usize,
    pub m: usize,
    pub mode: GenMode,
    pub seeds: RangeInclusive<u64>,
    pub k: KRange,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchPlan {
    pub entries: Vec<PlanEntry>,
    pub time_limit: Option<Duration>,
    pub summary: Option<PathBuf>,
    pub rows: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("plan line {line}: {message}")]
pub struct PlanError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> PlanError {
    PlanError {
        line,
        message: message.into(),
    }
}

fn parse_range<T: std::str::FromStr + PartialOrd + Copy>(
    tok: &str,
    line: usize,
    what: &str,
) -> Result<RangeInclusive<T>, PlanError> {
    let num = |s: &str| {
        s.parse::<T>()
            .map_err(|_| err(line, format!("bad {what} {s:?}")))
    };
    let (lo, hi) = match tok.split_once("..") {
        Some((a, b)) => (num(a)?, num(b)?),
        None => {
            let v = num(tok)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(err(line, format!("empty {what} range {tok:?}")));
    }
    Ok(lo..=hi)
}

pub fn parse_plan(text: &str) -> Result<BenchPlan, PlanError> {
    let mut plan = BenchPlan::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        match toks.as_slice() {
            ["time_limit", secs] => {
                let s: f64 = secs
                    .parse()
                    .map_err(|_| err(line, format!("bad time limit {secs:?}")))?;
                if !(s > 0.0 && s.is_finite()) {
                    return Err(err(line, "time limit must be positive"));
                }
                plan.time_limit = Some(Duration::from_secs_f64(s));
            }
            ["summary", path] => plan.summary = Some(PathBuf::from(path)),
            ["rows", path] => plan.rows = Some(PathBuf::from(path)),
            [n, m, mode, seeds, k] => {
                let size = |s: &str, what: &str| match s.parse::<usize>() {
                    Ok(v) if v > 0 => Ok(v),
                    _ => Err(err(line, format!("{what} must be a positive integer, got {s:?}"))),
                };
                let n = size(n, "n")?;
                let m = size(m, "m")?;
                let mode: GenMode = mode.parse().map_err(|e: kvote::Error| err(line, e.to_string()))?;
                let seeds = parse_range::<u64>(seeds, line, "seed")?;
                let k = if *k == "all" {
                    KRange::All
                } else {
                    let r = parse_range::<usize>(k, line, "k")?;
                    if *r.start() == 0 || *r.start() > n {
                        return Err(err(line, format!("k range {k:?} outside [1, {n}]")));
                    }
                    KRange::Range(r)
                };
                plan.entries.push(PlanEntry {
                    n,
                    m,
                    mode,
                    seeds,
                    k,
                    line,
                });
            }
            _ => return Err(err(line, format!("unrecognised plan line {body:?}"))),
        }
    }
    if plan.entries.is_empty() {
        return Err(err(text.lines().count().max(1), "plan has no entries"));
    }
    Ok(plan)
}
