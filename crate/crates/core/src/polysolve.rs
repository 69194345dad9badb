//! Polynomial special cases: minisum, cardinality-constrained minisum and
//! the bottom-h (minimin) problem.

use crate::error::{Error, Result};
use crate::model::{Bits, Committee, Instance};

/// Default cap on the number of voter subsets enumerated by [`solve_bottom_h`].
pub const BOTTOM_H_BUDGET: u128 = 10_000_000;

/// Minisum committee: elect `j` iff γ_j ≥ ⌈n/2⌉.
pub fn solve_minisum(instance: &Instance) -> (Committee, u64) {
    let n = instance.n() as u32;
    let threshold = n - n / 2;
    let mut x = Committee::empty(instance.m());
    let mut value = 0u64;
    for (j, &g) in instance.approval_counts().iter().enumerate() {
        if g >= threshold {
            x.set(j, true);
            value += u64::from(n - g);
        } else {
            value += u64::from(g);
        }
    }
    (x, value)
}

/// Minisum restricted to committees of exactly `size` members: the `size`
/// most approved candidates, ties by ascending index.
pub fn solve_minisum_card(instance: &Instance, size: usize) -> Result<(Committee, u64)> {
    let m = instance.m();
    if size > m {
        return Err(Error::invalid(format!("committee size {size} outside [0, {m}]")));
    }
    let counts = instance.approval_counts();
    let mut by_votes: Vec<usize> = (0..m).collect();
    by_votes.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut x = Committee::empty(m);
    for &j in &by_votes[..size] {
        x.set(j, true);
    }
    let n = instance.n() as u64;
    let value = counts
        .iter()
        .enumerate()
        .map(|(j, &g)| if x.contains(j) { n - u64::from(g) } else { u64::from(g) })
        .sum();
    Ok((x, value))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BottomHSolution {
    pub committee: Committee,
    /// The `h` voters whose distances are summed, ascending.
    pub support: Vec<usize>,
    pub value: u64,
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub fn solve_bottom_h(instance: &Instance, h: usize) -> Result<BottomHSolution> {
    solve_bottom_h_with_budget(instance, h, BOTTOM_H_BUDGET)
}

/// Minimises the sum of the `h` smallest distances by enumerating every
/// support set S of size `h` and solving the minisum problem on S.
///
/// Complements of size `n - h` are enumerated instead when they are the
/// smaller family. The best support is the lexicographically smallest among
/// those attaining the optimum. Polynomial only for fixed `n - h` (or fixed
/// `h`); `budget` caps the enumeration.
pub fn solve_bottom_h_with_budget(
    instance: &Instance,
    h: usize,
    budget: u128,
) -> Result<BottomHSolution> {
    let n = instance.n();
    let m = instance.m();
    if h == 0 || h > n {
        return Err(Error::invalid(format!("h = {h} outside [1, {n}]")));
    }
    let count = binomial(n, h);
    if count > budget {
        return Err(Error::ResourceLimit {
            what: format!("bottom-h enumeration C({n}, {h})"),
            required: count,
            budget,
        });
    }

    let totals = instance.approval_counts();
    let via_complement = n - h < h;
    let pick = if via_complement { n - h } else { h };
    let h32 = h as u32;

    let mut best: Option<(u64, Vec<usize>)> = None;
    let mut counts = vec![0u32; m];
    let mut mask = Bits::zeros(n);
    for_each_combination(n, pick, |chosen| {
        for bit in 0..n {
            mask.set(bit, false);
        }
        for &i in chosen {
            mask.set(i, true);
        }
        for (j, c) in counts.iter_mut().enumerate() {
            let g = instance.column(j).and_count(&mask);
            *c = if via_complement { totals[j] - g } else { g };
        }
        let value: u64 = counts.iter().map(|&g| u64::from(g.min(h32 - g))).sum();
        let improves = match &best {
            None => true,
            Some((bv, _)) if value < *bv => true,
            Some((bv, bs)) if value == *bv => {
                let support = support_of(n, chosen, via_complement);
                support < *bs
            }
            _ => false,
        };
        if improves {
            best = Some((value, support_of(n, chosen, via_complement)));
        }
    });

    let (value, support) = best.expect("at least one subset of size h exists");
    let counts = crate::model::subset_counts(instance, &support)?;
    let mut committee = Committee::empty(m);
    for (j, &g) in counts.iter().enumerate() {
        // Tie at γ_j(S) = h/2 excludes the candidate.
        committee.set(j, g > h32 - g);
    }
    Ok(BottomHSolution {
        committee,
        support,
        value,
    })
}

fn support_of(n: usize, chosen: &[usize], complement: bool) -> Vec<usize> {
    if !complement {
        return chosen.to_vec();
    }
    let mut out = Vec::with_capacity(n - chosen.len());
    let mut next = chosen.iter().peekable();
    for i in 0..n {
        if next.peek() == Some(&&i) {
            next.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Calls `f` on every ascending `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] < n - k + pos {
                break;
            }
            if pos == 0 {
                return;
            }
        }
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}
