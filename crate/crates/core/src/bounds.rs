//! Variable fixing, the k / k+1 bound chain and separation for the
//! subset-cover formulations.

use crate::error::{Error, Result};
use crate::model::{self, Committee, Instance, OwaWeights};

/// Candidates whose value can be fixed before search.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixedSet {
    pub forced_one: Vec<usize>,
    pub forced_zero: Vec<usize>,
}

impl FixedSet {
    pub fn len(&self) -> usize {
        self.forced_one.len() + self.forced_zero.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-candidate fixed value, `None` when free.
    pub fn assignment(&self, m: usize) -> Vec<Option<bool>> {
        let mut out = vec![None; m];
        for &j in &self.forced_one {
            out[j] = Some(true);
        }
        for &j in &self.forced_zero {
            out[j] = Some(false);
        }
        out
    }

    pub fn admits(&self, x: &Committee) -> bool {
        self.forced_one.iter().all(|&j| x.contains(j))
            && self.forced_zero.iter().all(|&j| !x.contains(j))
    }
}

/// x_j = 1 when γ_j ≥ n − ⌊k/2⌋; x_j = 0 when γ_j ≤ ⌊k/2⌋.
///
/// Both thresholds can hold only at k = n with γ_j = n/2; the candidate is
/// then forced to one (the objective does not distinguish).
pub fn preprocess_fix(instance: &Instance, k: usize) -> Result<FixedSet> {
    let n = instance.n();
    OwaWeights::TopK(k).validate(n)?;
    let half = (k / 2) as u32;
    let upper = n as u32 - half;
    let mut fixed = FixedSet::default();
    for (j, &g) in instance.approval_counts().iter().enumerate() {
        let one = g >= upper;
        let zero = g <= half;
        debug_assert!(k == n || !(one && zero));
        if one {
            fixed.forced_one.push(j);
        } else if zero {
            fixed.forced_zero.push(j);
        }
    }
    Ok(fixed)
}

/// ⌈k · z(k+1) / (k+1)⌉, a lower bound on z(k).
pub fn chain_lower(z_next: u64, k: usize) -> u64 {
    let k = k as u64;
    (k * z_next).div_ceil(k + 1)
}

/// Upper bound on z(k) from any committee, typically an optimum for k+1:
/// its sum of the k largest distances.
pub fn chain_upper(instance: &Instance, x_next: &Committee, k: usize) -> Result<(u64, Committee)> {
    let report = model::score(instance, x_next, OwaWeights::TopK(k))?;
    Ok((report.score, x_next.clone()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundPair {
    pub lower: u64,
    pub upper: u64,
    pub witness: Committee,
}

/// Both chain bounds on z(k) from the (k+1)-sum optimum.
pub fn chain_bounds(
    instance: &Instance,
    z_next: u64,
    x_next: &Committee,
    k: usize,
) -> Result<BoundPair> {
    let lower = chain_lower(z_next, k);
    let (upper, witness) = chain_upper(instance, x_next, k)?;
    Ok(BoundPair {
        lower,
        upper,
        witness,
    })
}

/// A violated inequality of the x-only subset family:
/// Σ_j γ_j(S)(1 − x_j) + Σ_j (k − γ_j(S)) x_j ≤ v.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    /// Voters in S, ascending.
    pub voters: Vec<usize>,
    /// γ_j(S) for every candidate.
    pub counts: Vec<u32>,
    /// Σ_{i∈S} r̂_i − v̂ at the separated point.
    pub violation: f64,
}

impl Cut {
    pub fn k(&self) -> usize {
        self.voters.len()
    }

    /// Constant term Σ_j γ_j(S).
    pub fn constant(&self) -> i64 {
        self.counts.iter().map(|&g| i64::from(g)).sum()
    }

    /// Coefficient of x_j: k − 2 γ_j(S).
    pub fn coefficients(&self) -> Vec<i64> {
        let k = self.k() as i64;
        self.counts.iter().map(|&g| k - 2 * i64::from(g)).collect()
    }

    /// Left-hand side at a (possibly fractional) point.
    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.constant() as f64
            + self
                .coefficients()
                .iter()
                .zip(x)
                .map(|(&c, &xj)| c as f64 * xj)
                .sum::<f64>()
    }
}

/// Tolerance for fractional separation points.
pub const SEPARATION_TOL: f64 = 1e-9;

/// Finds a maximally violated constraint of the subset family at `(x_hat, v_hat)`.
///
/// S is formed from the k voters with largest r̂_i = Σ_j |x̂_j − p_ij|, ties
/// by ascending index. Integral points (binary x̂, integer v̂) are compared
/// exactly; otherwise a violation must exceed [`SEPARATION_TOL`].
pub fn separate(instance: &Instance, x_hat: &[f64], v_hat: f64, k: usize) -> Result<Option<Cut>> {
    let (n, m) = (instance.n(), instance.m());
    if x_hat.len() != m {
        return Err(Error::invalid(format!(
            "point has {} coordinates, instance has {m} candidates",
            x_hat.len()
        )));
    }
    OwaWeights::TopK(k).validate(n)?;
    if x_hat.iter().any(|v| !(0.0..=1.0).contains(v)) || !v_hat.is_finite() {
        return Err(Error::invalid("separation point outside [0, 1]^m"));
    }
    let integral = x_hat.iter().all(|&v| v == 0.0 || v == 1.0) && v_hat.fract() == 0.0;
    let tol = if integral { 0.0 } else { SEPARATION_TOL };

    let r: Vec<f64> = (0..n)
        .map(|i| {
            x_hat
                .iter()
                .enumerate()
                .map(|(j, &xj)| if instance.approves(i, j) { 1.0 - xj } else { xj })
                .sum()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
    let mut voters = order[..k].to_vec();
    voters.sort_unstable();
    let total: f64 = voters.iter().map(|&i| r[i]).sum();
    if total > v_hat + tol {
        let counts = model::subset_counts(instance, &voters)?;
        Ok(Some(Cut {
            voters,
            counts,
            violation: total - v_hat,
        }))
    } else {
        Ok(None)
    }
}

/// [`separate`] at a committee and an integer objective estimate.
pub fn separate_committee(
    instance: &Instance,
    x: &Committee,
    v_hat: u64,
    k: usize,
) -> Result<Option<Cut>> {
    let point: Vec<f64> = x.bits().iter().map(|b| if b { 1.0 } else { 0.0 }).collect();
    separate(instance, &point, v_hat as f64, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1() -> Instance {
        Instance::from_rows(&["110", "101", "011"]).unwrap()
    }

    fn c(s: &str) -> Committee {
        s.parse().unwrap()
    }

    #[test]
    fn fixing_examples() {
        let t = t1();
        let f = preprocess_fix(&t, 2).unwrap();
        assert_eq!(f.forced_one, vec![0, 1, 2]);
        assert!(f.forced_zero.is_empty());

        let inst = Instance::from_rows(&["1100", "1010", "1000", "1001"]).unwrap();
        let f = preprocess_fix(&inst, 1).unwrap();
        assert_eq!(f.forced_one, vec![0]);
        assert!(f.forced_zero.is_empty());
        let zeros = Instance::from_rows(&["100", "100"]).unwrap();
        assert_eq!(preprocess_fix(&zeros, 1).unwrap().forced_zero, vec![1, 2]);

        let ones = Instance::from_rows(&["111", "111", "111", "111"]).unwrap();
        for k in 1..=4 {
            assert_eq!(preprocess_fix(&ones, k).unwrap().forced_one, vec![0, 1, 2]);
        }
        assert!(preprocess_fix(&t, 0).is_err());
        assert!(preprocess_fix(&t, 4).is_err());
    }

    #[test]
    fn fixing_overlap_at_k_equals_n() {
        let inst = Instance::from_rows(&["10", "01"]).unwrap();
        let f = preprocess_fix(&inst, 2).unwrap();
        assert_eq!(f.forced_one, vec![0, 1]);
        assert!(f.forced_zero.is_empty());
    }

    #[test]
    fn chain_lower_examples() {
        assert_eq!(chain_lower(3, 2), 2);
        assert_eq!(chain_lower(0, 5), 0);
        assert_eq!(chain_lower(7, 6), 6);
        assert_eq!(chain_lower(5, 2), 4);
    }

    #[test]
    fn chain_upper_examples() {
        let t = t1();
        let (u, w) = chain_upper(&t, &c("111"), 2).unwrap();
        assert_eq!((u, w), (2, c("111")));
        assert_eq!(chain_upper(&t, &c("110"), 1).unwrap().0, 2);
        let pair = chain_bounds(&t, 3, &c("111"), 2).unwrap();
        assert!(pair.lower <= pair.upper);
    }

    #[test]
    fn separation_examples() {
        let t = t1();
        let cut = separate(&t, &[1.0, 1.0, 1.0], 0.0, 2).unwrap().unwrap();
        assert_eq!(cut.voters, vec![0, 1]);
        assert_eq!(cut.violation, 2.0);
        assert_eq!(cut.counts, vec![2, 1, 1]);
        assert_eq!(cut.lhs(&[1.0, 1.0, 1.0]), 2.0);

        assert!(separate(&t, &[1.0, 1.0, 1.0], 2.0, 2).unwrap().is_none());
        for k in 1..=3 {
            let bound = (k * 3) as f64;
            assert!(separate(&t, &[0.3, 0.9, 0.0], bound, k).unwrap().is_none());
        }
        assert!(separate(&t, &[1.0, 1.0], 0.0, 2).is_err());
        assert!(separate(&t, &[1.0, 1.5, 0.0], 0.0, 2).is_err());
        assert!(separate(&t, &[1.0, 1.0, 1.0], 0.0, 4).is_err());
    }

    #[test]
    fn fractional_tolerance() {
        let t = t1();
        // r = (0.5+0.5+0.5 ...): at x = (0.5,0.5,0.5) every r_i is 1.5
        let x = [0.5, 0.5, 0.5];
        assert!(separate(&t, &x, 3.0 - 1e-12, 2).unwrap().is_none());
        assert!(separate(&t, &x, 3.0 - 1e-6, 2).unwrap().is_some());
    }

    #[test]
    fn cut_evaluates_subset_distance() {
        let t = t1();
        let cut = separate_committee(&t, &c("110"), 0, 2).unwrap().unwrap();
        assert_eq!(cut.voters, vec![1, 2]);
        let x = [1.0, 1.0, 0.0];
        assert_eq!(cut.lhs(&x), 4.0);
        assert_eq!(
            model::subset_distance(&t, &cut.voters, &c("110")).unwrap(),
            4
        );
    }
}
