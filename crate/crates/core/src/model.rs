//! Domain types and exact scoring.
//!
//! Profiles and committees are packed bit vectors; the Hamming distance is a
//! word-wise XOR followed by a popcount. All scores are exact integers.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const WORD: usize = 64;

/// A fixed-length packed bit vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits {
            words: vec![0; len.div_ceil(WORD)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = Bits::zeros(len);
        for j in 0..len {
            b.set(j, true);
        }
        b
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut b = Bits::zeros(bits.len());
        for (j, &bit) in bits.iter().enumerate() {
            b.set(j, bit);
        }
        b
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        debug_assert!(j < self.len);
        (self.words[j / WORD] >> (j % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize, value: bool) {
        debug_assert!(j < self.len);
        let mask = 1u64 << (j % WORD);
        if value {
            self.words[j / WORD] |= mask;
        } else {
            self.words[j / WORD] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Number of positions where `self` and `other` differ. Lengths must match.
    #[inline]
    pub fn xor_count(&self, other: &Bits) -> u32 {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Number of positions set in both vectors. Lengths must match.
    #[inline]
    pub fn and_count(&self, other: &Bits) -> u32 {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |j| self.get(j))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.iter().collect()
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}

impl FromStr for Bits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut b = Bits::zeros(s.len());
        for (j, c) in s.bytes().enumerate() {
            match c {
                b'0' => {}
                b'1' => b.set(j, true),
                _ => {
                    return Err(Error::parse(
                        1,
                        j + 1,
                        format!("expected '0' or '1', found {:?}", c as char),
                    ))
                }
            }
        }
        Ok(b)
    }
}

/// An elected committee: bit `j` is set iff candidate `j` is elected.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Committee(Bits);

impl Committee {
    pub fn new(bits: Bits) -> Self {
        Committee(bits)
    }

    pub fn empty(m: usize) -> Self {
        Committee(Bits::zeros(m))
    }

    pub fn full(m: usize) -> Self {
        Committee(Bits::ones(m))
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Committee(Bits::from_bools(bits))
    }

    /// Committee whose bit string `x_1 x_2 ... x_m` reads `code` in binary,
    /// most significant bit first. Numeric order equals lexicographic order.
    pub fn from_code(code: u64, m: usize) -> Self {
        let mut bits = Bits::zeros(m);
        for j in 0..m {
            bits.set(j, (code >> (m - 1 - j)) & 1 == 1);
        }
        Committee(bits)
    }

    pub fn bits(&self) -> &Bits {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.get(j)
    }

    pub fn set(&mut self, j: usize, elected: bool) {
        self.0.set(j, elected);
    }

    /// Number of elected candidates.
    pub fn size(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn members(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.contains(j)).collect()
    }
}

impl fmt::Display for Committee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for Committee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Committee({})", self.0)
    }
}

impl FromStr for Committee {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse().map(Committee)
    }
}

/// An approval-voting instance: `n` voter profiles over `m` candidates.
#[derive(Clone, PartialEq, Eq)]
pub struct Instance {
    m: usize,
    profiles: Vec<Bits>,
    // Voter bitset per candidate: bit i of columns[j] is p_ij.
    columns: Vec<Bits>,
    approval_counts: Vec<u32>,
}

impl Instance {
    pub fn new(m: usize, profiles: Vec<Bits>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::invalid("an instance needs at least one voter"));
        }
        if m == 0 {
            return Err(Error::invalid("an instance needs at least one candidate"));
        }
        if let Some((i, p)) = profiles.iter().enumerate().find(|(_, p)| p.len() != m) {
            return Err(Error::invalid(format!(
                "profile {} has length {}, expected {m}",
                i + 1,
                p.len()
            )));
        }
        let n = profiles.len();
        let mut columns = vec![Bits::zeros(n); m];
        for (i, p) in profiles.iter().enumerate() {
            for (j, col) in columns.iter_mut().enumerate() {
                if p.get(j) {
                    col.set(i, true);
                }
            }
        }
        let approval_counts = columns.iter().map(Bits::count_ones).collect();
        Ok(Instance {
            m,
            profiles,
            columns,
            approval_counts,
        })
    }

    /// Builds an instance from rows such as `["110", "101", "011"]`.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let profiles = rows
            .iter()
            .map(|r| r.as_ref().parse())
            .collect::<Result<Vec<Bits>>>()?;
        let m = profiles.first().map_or(0, Bits::len);
        Instance::new(m, profiles)
    }

    /// Number of voters.
    #[inline]
    pub fn n(&self) -> usize {
        self.profiles.len()
    }

    /// Number of candidates.
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn profiles(&self) -> &[Bits] {
        &self.profiles
    }

    pub fn profile(&self, i: usize) -> &Bits {
        &self.profiles[i]
    }

    #[inline]
    pub fn approves(&self, i: usize, j: usize) -> bool {
        self.profiles[i].get(j)
    }

    /// Voters approving candidate `j`, as a bitset over voters.
    pub fn column(&self, j: usize) -> &Bits {
        &self.columns[j]
    }

    /// γ_j for every candidate.
    pub fn approval_counts(&self) -> &[u32] {
        &self.approval_counts
    }

    fn check_committee(&self, x: &Committee) -> Result<()> {
        if x.len() != self.m {
            return Err(Error::invalid(format!(
                "committee has length {}, instance has {} candidates",
                x.len(),
                self.m
            )));
        }
        Ok(())
    }

    fn check_voters(&self, voters: &[usize]) -> Result<Bits> {
        let mut seen = Bits::zeros(self.n());
        for &i in voters {
            if i >= self.n() {
                return Err(Error::invalid(format!(
                    "voter index {i} out of range for {} voters",
                    self.n()
                )));
            }
            if seen.get(i) {
                return Err(Error::invalid(format!("voter index {i} repeated")));
            }
            seen.set(i, true);
        }
        Ok(seen)
    }

    /// Hamming distance of every voter to `x`.
    pub fn distances(&self, x: &Committee) -> Result<Vec<u32>> {
        self.check_committee(x)?;
        Ok(self.distances_unchecked(x))
    }

    pub(crate) fn distances_unchecked(&self, x: &Committee) -> Vec<u32> {
        self.profiles.iter().map(|p| p.xor_count(x.bits())).collect()
    }
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Instance")
            .field("n", &self.n())
            .field("m", &self.m)
            .field("profiles", &self.profiles)
            .finish()
    }
}

/// Objective selector for the 0/1 OWA families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OwaWeights {
    /// Sum of the `k` largest distances.
    TopK(usize),
    /// Sum of the `h` smallest distances.
    BottomH(usize),
}

impl OwaWeights {
    pub fn validate(&self, n: usize) -> Result<()> {
        let (name, v) = match *self {
            OwaWeights::TopK(k) => ("k", k),
            OwaWeights::BottomH(h) => ("h", h),
        };
        if v == 0 || v > n {
            return Err(Error::invalid(format!("{name} = {v} outside [1, {n}]")));
        }
        Ok(())
    }
}

/// Distances, their ordering and the OWA score of one committee.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceReport {
    pub distances: Vec<u32>,
    /// Voter indices by non-increasing distance, ties by ascending index.
    pub order: Vec<usize>,
    pub score: u64,
}

pub fn hamming_distance(profile: &Bits, committee: &Committee) -> Result<u32> {
    if profile.len() != committee.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            profile.len(),
            committee.len()
        )));
    }
    Ok(profile.xor_count(committee.bits()))
}

pub fn approval_counts(instance: &Instance) -> Vec<u32> {
    instance.approval_counts().to_vec()
}

/// γ_j(S): approvals of each candidate among the voters in `voters`.
pub fn subset_counts(instance: &Instance, voters: &[usize]) -> Result<Vec<u32>> {
    let mask = instance.check_voters(voters)?;
    Ok(subset_counts_mask(instance, &mask))
}

pub(crate) fn subset_counts_mask(instance: &Instance, mask: &Bits) -> Vec<u32> {
    (0..instance.m())
        .map(|j| instance.column(j).and_count(mask))
        .collect()
}

/// d_S(x): total Hamming distance of the voters in `voters` to `x`.
pub fn subset_distance(instance: &Instance, voters: &[usize], x: &Committee) -> Result<u64> {
    let mask = instance.check_voters(voters)?;
    instance.check_committee(x)?;
    let direct: u64 = voters
        .iter()
        .map(|&i| u64::from(instance.profile(i).xor_count(x.bits())))
        .sum();
    debug_assert_eq!(
        direct,
        subset_distance_from_counts(&subset_counts_mask(instance, &mask), voters.len(), x)
    );
    Ok(direct)
}

/// Σ_j γ_j(S)(1 − x_j) + Σ_j (|S| − γ_j(S)) x_j.
pub fn subset_distance_from_counts(counts: &[u32], size: usize, x: &Committee) -> u64 {
    counts
        .iter()
        .enumerate()
        .map(|(j, &g)| {
            if x.contains(j) {
                size as u64 - u64::from(g)
            } else {
                u64::from(g)
            }
        })
        .sum()
}

/// Voter indices sorted by non-increasing distance, ties by ascending index.
pub fn ordering(distances: &[u32]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[b].cmp(&distances[a]).then(a.cmp(&b)));
    order
}

/// Sum of the `k` largest entries. `k` is clamped to the slice length.
pub fn top_k_sum(distances: &[u32], k: usize) -> u64 {
    if k >= distances.len() {
        return distances.iter().map(|&d| u64::from(d)).sum();
    }
    let mut buf = distances.to_vec();
    let (_, _, upper) = buf.select_nth_unstable_by(distances.len() - k - 1, |a, b| a.cmp(b));
    upper.iter().map(|&d| u64::from(d)).sum()
}

/// Sum of the `h` smallest entries. `h` is clamped to the slice length.
pub fn bottom_h_sum(distances: &[u32], h: usize) -> u64 {
    let total: u64 = distances.iter().map(|&d| u64::from(d)).sum();
    if h >= distances.len() {
        return total;
    }
    total - top_k_sum(distances, distances.len() - h)
}

pub fn owa_value(distances: &[u32], weights: OwaWeights) -> u64 {
    match weights {
        OwaWeights::TopK(k) => top_k_sum(distances, k),
        OwaWeights::BottomH(h) => bottom_h_sum(distances, h),
    }
}

pub fn score(instance: &Instance, x: &Committee, weights: OwaWeights) -> Result<DistanceReport> {
    weights.validate(instance.n())?;
    let distances = instance.distances(x)?;
    let order = ordering(&distances);
    let score = match weights {
        OwaWeights::TopK(k) => order[..k].iter().map(|&i| u64::from(distances[i])).sum(),
        OwaWeights::BottomH(h) => order[order.len() - h..]
            .iter()
            .map(|&i| u64::from(distances[i]))
            .sum(),
    };
    Ok(DistanceReport {
        distances,
        order,
        score,
    })
}
