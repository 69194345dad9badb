//! Exact branch-and-bound for the k-sum problem, a brute-force oracle and
//! the k = n..1 sweep.
//!
//! The search is depth-first over the free candidates in ascending index
//! order, trying the majority value first. A node fixes a prefix of the free
//! candidates; voter `i` has accumulated a partial distance `lb_i` over the
//! fixed positions. Three lower bounds are combined at every node:
//!
//! * the sum of the `k` largest `lb_i`;
//! * for the set S of those `k` voters, `Σ_{i∈S} lb_i` plus
//!   `Σ_{j free} min(γ_j(S), k − γ_j(S))`;
//! * a Lagrangian bound: for voter weights `0 ≤ λ_i ≤ 1` with `Σ λ_i ≤ k`,
//!   the sum of the `k` largest distances is at least `Σ λ_i d_i`, whose
//!   minimum over completions separates per candidate. Weights are improved
//!   by projected supergradient ascent and inherited by child nodes.
//!
//! The second bound is the Lagrangian bound at the indicator of S. Every
//! Lagrangian evaluation also yields a completion whose exact score feeds
//! the incumbent.

use std::time::{Duration, Instant};

use crate::bounds::{self, FixedSet};
use crate::error::{Error, Result};
use crate::gen_io::ResultRecord;
use crate::model::{self, Committee, Instance, OwaWeights};
use crate::polysolve;

/// Default cap on committees enumerated by [`brute_force`].
pub const BRUTE_FORCE_BUDGET: u128 = 1 << 24;

// Slack subtracted from floating Lagrangian bounds before rounding up.
const BOUND_EPS: f64 = 1e-6;
const ROOT_ITERATIONS: usize = 400;
const NODE_ITERATIONS: usize = 12;
const TIME_CHECK_MASK: u64 = 0xff;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOptions {
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    pub preprocessing: bool,
    pub chain_bounds: bool,
    /// Committee used as an initial incumbent, typically the (k+1)-optimum.
    pub warm_start: Option<Committee>,
    /// A lower bound on z(k+1); with `chain_bounds` it yields ⌈k·z/(k+1)⌉ ≤ z(k).
    pub next_lower_bound: Option<u64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            node_limit: None,
            time_limit: None,
            preprocessing: true,
            chain_bounds: true,
            warm_start: None,
            next_lower_bound: None,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if self.node_limit == Some(0) {
            return Err(Error::invalid("node limit must be positive"));
        }
        if self.time_limit == Some(Duration::ZERO) {
            return Err(Error::invalid("time limit must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub nodes: u64,
    pub elapsed_secs: f64,
    /// Lower bound available before branching.
    pub root_lower_bound: u64,
    /// Proven lower bound at termination; equals the value when optimal.
    pub lower_bound: u64,
    pub solved_at_root: bool,
    pub fixed_count: usize,
    /// False when a budget stopped the search first.
    pub optimal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub weights: OwaWeights,
    pub committee: Committee,
    pub value: u64,
    pub stats: SolveStats,
}

impl Solution {
    /// `(value - root bound) / value * 100`, zero when the value is zero.
    pub fn root_gap_pct(&self) -> f64 {
        if self.value == 0 {
            0.0
        } else {
            (self.value - self.stats.root_lower_bound.min(self.value)) as f64 / self.value as f64
                * 100.0
        }
    }
}

pub fn brute_force(instance: &Instance, weights: OwaWeights) -> Result<Solution> {
    brute_force_with_budget(instance, weights, BRUTE_FORCE_BUDGET)
}

/// Enumerates all 2^m committees. Ties go to the lexicographically smallest
/// bit string.
pub fn brute_force_with_budget(
    instance: &Instance,
    weights: OwaWeights,
    budget: u128,
) -> Result<Solution> {
    weights.validate(instance.n())?;
    let m = instance.m();
    let count = if m >= 127 { u128::MAX } else { 1u128 << m };
    if count > budget {
        return Err(Error::ResourceLimit {
            what: format!("brute force over 2^{m} committees"),
            required: count,
            budget,
        });
    }
    let start = Instant::now();
    let mut best: Option<(u64, u64)> = None;
    let mut distances = vec![0u32; instance.n()];
    for code in 0..count as u64 {
        let x = Committee::from_code(code, m);
        for (d, p) in distances.iter_mut().zip(instance.profiles()) {
            *d = p.xor_count(x.bits());
        }
        let v = model::owa_value(&distances, weights);
        if best.is_none_or(|(bv, _)| v < bv) {
            best = Some((v, code));
        }
    }
    let (value, code) = best.expect("at least one committee");
    Ok(Solution {
        weights,
        committee: Committee::from_code(code, m),
        value,
        stats: SolveStats {
            nodes: count as u64,
            elapsed_secs: start.elapsed().as_secs_f64(),
            root_lower_bound: 0,
            lower_bound: value,
            solved_at_root: false,
            fixed_count: 0,
            optimal: true,
        },
    })
}

/// Lagrangian relaxation over voter weights for a fixed `k`.
struct Relaxation {
    k: usize,
    // columns[j][i] = p_ij as 0.0 / 1.0
    columns: Vec<Vec<f64>>,
}

struct Evaluation {
    bound: f64,
    /// Exact distances of the completion chosen by the relaxation.
    distances: Vec<f64>,
}

impl Relaxation {
    fn new(instance: &Instance, k: usize) -> Self {
        let columns = (0..instance.m())
            .map(|j| {
                (0..instance.n())
                    .map(|i| if instance.approves(i, j) { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        Relaxation {
            k,
            columns,
        }
    }

    /// Value of the relaxation at `lambda`; writes the completion into `completion`.
    fn evaluate(
        &self,
        partial: &[u32],
        free: &[usize],
        lambda: &[f64],
        completion: &mut Committee,
        out: &mut Evaluation,
    ) {
        let total: f64 = lambda.iter().sum();
        let mut bound: f64 = lambda
            .iter()
            .zip(partial)
            .map(|(&l, &d)| l * f64::from(d))
            .sum();
        for (g, &d) in out.distances.iter_mut().zip(partial) {
            *g = f64::from(d);
        }
        for &j in free {
            let col = &self.columns[j];
            let approving: f64 = lambda.iter().zip(col).map(|(l, p)| l * p).sum();
            let elect = approving > total - approving;
            completion.set(j, elect);
            if elect {
                bound += total - approving;
                for (g, p) in out.distances.iter_mut().zip(col) {
                    *g += 1.0 - p;
                }
            } else {
                bound += approving;
                for (g, p) in out.distances.iter_mut().zip(col) {
                    *g += p;
                }
            }
        }
        out.bound = bound;
    }

    /// Projects onto { 0 ≤ λ ≤ 1, Σ λ = k } by bisection on the shift.
    fn project(&self, lambda: &mut [f64]) {
        let k = self.k as f64;
        let (lo, hi) = lambda
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let (mut lo, mut hi) = (lo - 1.0, hi);
        let mass = |tau: f64, lambda: &[f64]| -> f64 {
            lambda.iter().map(|&v| (v - tau).clamp(0.0, 1.0)).sum()
        };
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mass(mid, lambda) > k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for v in lambda.iter_mut() {
            *v = (*v - hi).clamp(0.0, 1.0);
        }
        let total: f64 = lambda.iter().sum();
        if total > k {
            let scale = k / total;
            lambda.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// Integer bound implied by a floating relaxation value.
fn round_bound(value: f64) -> u64 {
    let v = (value - BOUND_EPS).ceil();
    if v <= 0.0 {
        0
    } else {
        v as u64
    }
}

/// Sum of the k largest entries of `values` (exact integers in f64).
fn top_k_f64(values: &[f64], k: usize, scratch: &mut Vec<u32>) -> u64 {
    scratch.clear();
    scratch.extend(values.iter().map(|&v| v as u32));
    top_k_in_place(scratch, k)
}

fn top_k_in_place(values: &mut [u32], k: usize) -> u64 {
    if k >= values.len() {
        return values.iter().map(|&v| u64::from(v)).sum();
    }
    let pivot = values.len() - k - 1;
    let (_, _, upper) = values.select_nth_unstable(pivot);
    upper.iter().map(|&v| u64::from(v)).sum()
}

/// Bound from the voter set S of the `k` largest partial distances
/// (ties by ascending index), completed by the free candidates.
fn subset_bound(
    instance: &Instance,
    k: usize,
    partial: &[u32],
    free: &[usize],
    order: &mut Vec<usize>,
) -> u64 {
    order.clear();
    order.extend(0..partial.len());
    let by_distance = |a: &usize, b: &usize| partial[*b].cmp(&partial[*a]).then(a.cmp(b));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, by_distance);
    }
    let chosen = &order[..k];
    let mut bound: u64 = chosen.iter().map(|&i| u64::from(partial[i])).sum();
    for &j in free {
        let g = chosen.iter().filter(|&&i| instance.approves(i, j)).count() as u64;
        bound += g.min(k as u64 - g);
    }
    bound
}

/// Lower bound on the k-sum optimum over all committees that agree with
/// `assignment` where it is `Some`.
pub fn node_lower_bound(instance: &Instance, k: usize, assignment: &[Option<bool>]) -> Result<u64> {
    OwaWeights::TopK(k).validate(instance.n())?;
    if assignment.len() != instance.m() {
        return Err(Error::invalid("assignment length differs from m"));
    }
    let mut partial = vec![0u32; instance.n()];
    let mut free = Vec::new();
    for (j, a) in assignment.iter().enumerate() {
        match *a {
            Some(v) => {
                for (i, d) in partial.iter_mut().enumerate() {
                    *d += u32::from(instance.approves(i, j) != v);
                }
            }
            None => free.push(j),
        }
    }
    let relax = Relaxation::new(instance, k);
    let mut lambda = vec![k as f64 / instance.n() as f64; instance.n()];
    let mut eval = Evaluation {
        bound: 0.0,
        distances: vec![0.0; instance.n()],
    };
    let mut completion = Committee::empty(instance.m());
    let mut order = Vec::new();
    let mut best = top_k_in_place(&mut partial.clone(), k)
        .max(subset_bound(instance, k, &partial, &free, &mut order));
    let target = (instance.m() * k) as f64;
    let mut step = 2.0;
    for _ in 0..ROOT_ITERATIONS {
        relax.evaluate(&partial, &free, &lambda, &mut completion, &mut eval);
        best = best.max(round_bound(eval.bound));
        if !ascend(&relax, &mut lambda, &eval, target, step) {
            break;
        }
        step *= 0.98;
    }
    Ok(best)
}

/// One projected supergradient step towards `target`; false when stationary.
fn ascend(relax: &Relaxation, lambda: &mut [f64], eval: &Evaluation, target: f64, step: f64) -> bool {
    let n = lambda.len() as f64;
    let mean: f64 = eval.distances.iter().sum::<f64>() / n;
    let norm: f64 = eval.distances.iter().map(|g| (g - mean).powi(2)).sum();
    if norm < 1e-12 {
        return false;
    }
    let gap = (target - eval.bound).max(1e-3);
    let alpha = step * gap / norm;
    for (l, g) in lambda.iter_mut().zip(&eval.distances) {
        *l += alpha * (g - mean);
    }
    relax.project(lambda);
    true
}

struct Search<'a> {
    instance: &'a Instance,
    k: usize,
    relax: Relaxation,
    free: Vec<usize>,
    majority: Vec<bool>,
    partial: Vec<u32>,
    current: Committee,
    lambdas: Vec<Vec<f64>>,
    eval: Evaluation,
    completion: Committee,
    scratch_u32: Vec<u32>,
    scratch_idx: Vec<usize>,
    incumbent: Committee,
    incumbent_value: u64,
    /// Global lower bound proved before search.
    floor: u64,
    nodes: u64,
    node_limit: Option<u64>,
    deadline: Option<Instant>,
    stopped: bool,
    frontier_bound: u64,
}

impl Search<'_> {
    fn offer(&mut self, candidate: &Committee, value: u64) {
        if value < self.incumbent_value {
            self.incumbent_value = value;
            self.incumbent = candidate.clone();
        }
    }

    fn done(&self) -> bool {
        self.incumbent_value <= self.floor
    }

    fn out_of_budget(&mut self) -> bool {
        if self.stopped {
            return true;
        }
        if self.node_limit.is_some_and(|l| self.nodes >= l) {
            self.stopped = true;
        } else if let Some(deadline) = self.deadline {
            if self.nodes & TIME_CHECK_MASK == 0 && Instant::now() >= deadline {
                self.stopped = true;
            }
        }
        self.stopped
    }

    fn score_completion(&mut self) -> u64 {
        top_k_f64(&self.eval.distances, self.k, &mut self.scratch_u32)
    }

    /// Majority completion of the current partial assignment.
    fn majority_heuristic(&mut self, depth: usize) {
        let mut x = self.current.clone();
        for &j in &self.free[depth..] {
            x.set(j, self.majority[j]);
        }
        self.scratch_u32.clear();
        self.scratch_u32
            .extend(self.instance.profiles().iter().map(|p| p.xor_count(x.bits())));
        let v = top_k_in_place(&mut self.scratch_u32, self.k);
        self.offer(&x, v);
    }

    /// Lower bound at the node for `free[depth..]`, improving the incumbent on the way.
    fn bound(&mut self, depth: usize, inherited: u64, iterations: usize) -> u64 {
        self.scratch_u32.clear();
        self.scratch_u32.extend_from_slice(&self.partial);
        let mut bound = inherited.max(top_k_in_place(&mut self.scratch_u32, self.k));
        if bound >= self.incumbent_value {
            return bound;
        }
        bound = bound.max(subset_bound(
            self.instance,
            self.k,
            &self.partial,
            &self.free[depth..],
            &mut self.scratch_idx,
        ));
        if bound >= self.incumbent_value {
            return bound;
        }

        if depth > 0 {
            let (head, tail) = self.lambdas.split_at_mut(depth);
            tail[0].copy_from_slice(&head[depth - 1]);
        }
        let mut lambda = std::mem::take(&mut self.lambdas[depth]);
        let mut step = 1.0;
        let mut best_seen = f64::NEG_INFINITY;
        let mut stale = 0;
        for _ in 0..iterations {
            self.completion = self.current.clone();
            self.relax.evaluate(
                &self.partial,
                &self.free[depth..],
                &lambda,
                &mut self.completion,
                &mut self.eval,
            );
            let value = self.score_completion();
            let completion = std::mem::replace(&mut self.completion, Committee::empty(0));
            self.offer(&completion, value);
            self.completion = completion;
            bound = bound.max(round_bound(self.eval.bound));
            if bound >= self.incumbent_value || self.done() {
                break;
            }
            if self.eval.bound > best_seen + 1e-9 {
                best_seen = self.eval.bound;
                stale = 0;
            } else {
                stale += 1;
                if stale >= 3 {
                    step *= 0.5;
                    stale = 0;
                }
            }
            let target = self.incumbent_value as f64;
            if !ascend(&self.relax, &mut lambda, &self.eval, target, step) {
                break;
            }
        }
        self.lambdas[depth] = lambda;
        bound
    }

    fn assign(&mut self, j: usize, value: bool) {
        self.current.set(j, value);
        let col = self.instance.column(j);
        for (i, d) in self.partial.iter_mut().enumerate() {
            *d += u32::from(col.get(i) != value);
        }
    }

    fn unassign(&mut self, j: usize, value: bool) {
        self.current.set(j, false);
        let col = self.instance.column(j);
        for (i, d) in self.partial.iter_mut().enumerate() {
            *d -= u32::from(col.get(i) != value);
        }
    }

    fn dfs(&mut self, depth: usize, inherited: u64) {
        if self.out_of_budget() {
            self.frontier_bound = self.frontier_bound.min(inherited);
            return;
        }
        self.nodes += 1;
        if depth == self.free.len() {
            self.scratch_u32.clear();
            self.scratch_u32.extend_from_slice(&self.partial);
            let v = top_k_in_place(&mut self.scratch_u32, self.k);
            let x = self.current.clone();
            self.offer(&x, v);
            return;
        }
        self.majority_heuristic(depth);
        let bound = self.bound(depth, inherited, NODE_ITERATIONS);
        if bound >= self.incumbent_value || self.done() {
            return;
        }
        let j = self.free[depth];
        let first = self.majority[j];
        for value in [first, !first] {
            if self.done() || bound >= self.incumbent_value {
                return;
            }
            if self.stopped {
                self.frontier_bound = self.frontier_bound.min(bound);
                return;
            }
            self.assign(j, value);
            self.dfs(depth + 1, bound);
            self.unassign(j, value);
        }
    }
}

/// Solves the k-sum problem exactly unless a budget is hit, in which case
/// the best committee found is returned with `optimal = false` and a proven
/// lower bound.
pub fn solve_ksum(instance: &Instance, k: usize, options: &SolveOptions) -> Result<Solution> {
    let start = Instant::now();
    let (n, m) = (instance.n(), instance.m());
    OwaWeights::TopK(k).validate(n)?;
    options.validate()?;
    if let Some(w) = &options.warm_start {
        if w.len() != m {
            return Err(Error::invalid("warm start committee has wrong length"));
        }
    }

    let fixed = if options.preprocessing {
        bounds::preprocess_fix(instance, k)?
    } else {
        FixedSet::default()
    };
    let assignment = fixed.assignment(m);
    let threshold = (n - n / 2) as u32;
    let majority: Vec<bool> = instance
        .approval_counts()
        .iter()
        .map(|&g| g >= threshold)
        .collect();

    let mut partial = vec![0u32; n];
    let mut current = Committee::empty(m);
    let mut free = Vec::new();
    for (j, a) in assignment.iter().enumerate() {
        match *a {
            Some(v) => {
                current.set(j, v);
                for (i, d) in partial.iter_mut().enumerate() {
                    *d += u32::from(instance.approves(i, j) != v);
                }
            }
            None => free.push(j),
        }
    }

    let floor = match (options.chain_bounds, options.next_lower_bound) {
        (true, Some(z)) => bounds::chain_lower(z, k),
        _ => 0,
    };

    let mut search = Search {
        instance,
        k,
        relax: Relaxation::new(instance, k),
        majority,
        partial,
        current,
        lambdas: vec![vec![k as f64 / n as f64; n]; free.len() + 1],
        eval: Evaluation {
            bound: 0.0,
            distances: vec![0.0; n],
        },
        completion: Committee::empty(m),
        scratch_u32: Vec::with_capacity(n),
        scratch_idx: Vec::with_capacity(n),
        incumbent: Committee::empty(m),
        incumbent_value: u64::MAX,
        floor,
        nodes: 0,
        node_limit: options.node_limit,
        deadline: options.time_limit.map(|t| start + t),
        stopped: false,
        frontier_bound: u64::MAX,
        free,
    };

    if let Some(w) = &options.warm_start {
        let v = model::top_k_sum(&instance.distances_unchecked(w), k);
        search.offer(w, v);
    }
    search.majority_heuristic(0);

    let root_bound = if search.done() {
        search.floor
    } else {
        let b = search.bound(0, floor, ROOT_ITERATIONS);
        search.floor = search.floor.max(b.min(search.incumbent_value));
        search.floor
    };
    let solved_at_root = search.done();
    if !solved_at_root {
        search.dfs(0, root_bound);
    }

    let value = search.incumbent_value;
    let lower_bound = if search.stopped && !search.done() {
        search.frontier_bound.min(value).max(root_bound)
    } else {
        value
    };
    let optimal = lower_bound == value;
    Ok(Solution {
        weights: OwaWeights::TopK(k),
        committee: search.incumbent,
        value,
        stats: SolveStats {
            nodes: search.nodes,
            elapsed_secs: start.elapsed().as_secs_f64(),
            root_lower_bound: root_bound,
            lower_bound,
            solved_at_root,
            fixed_count: fixed.len(),
            optimal,
        },
    })
}

impl Solution {
    /// CSV record for this solve.
    pub fn to_record(&self, instance_id: &str, instance: &Instance) -> ResultRecord {
        let k = match self.weights {
            OwaWeights::TopK(k) | OwaWeights::BottomH(k) => k,
        };
        ResultRecord {
            instance_id: instance_id.to_string(),
            n: instance.n(),
            m: instance.m(),
            k,
            objective: self.value,
            time_s: self.stats.elapsed_secs,
            nodes: self.stats.nodes,
            root_bound: self.stats.root_lower_bound,
            root_gap_pct: self.root_gap_pct(),
            solved_at_root: self.stats.solved_at_root,
            pct_fixed: self.stats.fixed_count as f64 / instance.m() as f64 * 100.0,
            optimal: self.stats.optimal,
        }
    }
}

/// Solves every k from n down to 1, each solve seeded by the previous one.
///
/// Position 0 holds k = n (closed-form minisum), the last position k = 1.
pub fn solve_all_k(instance: &Instance, options: &SolveOptions) -> Result<Vec<Solution>> {
    solve_down_to(instance, 1, options)
}

/// Like [`solve_all_k`] but stops after `k_min`.
pub fn solve_down_to(instance: &Instance, k_min: usize, options: &SolveOptions) -> Result<Vec<Solution>> {
    let n = instance.n();
    OwaWeights::TopK(k_min).validate(n)?;
    let start = Instant::now();
    let (committee, value) = polysolve::solve_minisum(instance);
    let fixed_count = if options.preprocessing {
        bounds::preprocess_fix(instance, n)?.len()
    } else {
        0
    };
    let mut out = vec![Solution {
        weights: OwaWeights::TopK(n),
        committee,
        value,
        stats: SolveStats {
            nodes: 0,
            elapsed_secs: start.elapsed().as_secs_f64(),
            root_lower_bound: value,
            lower_bound: value,
            solved_at_root: true,
            fixed_count,
            optimal: true,
        },
    }];
    for k in (k_min..n).rev() {
        let prev = out.last().expect("non-empty");
        let opts = SolveOptions {
            warm_start: Some(prev.committee.clone()),
            next_lower_bound: Some(prev.stats.lower_bound),
            ..options.clone()
        };
        out.push(solve_ksum(instance, k, &opts)?);
    }
    Ok(out)
}
