//! Sparse multi-indices and their decreasing rearrangements.
//!
//! A [`MultiIndex`] maps modes `n >= 1` to nonnegative exponents and stores
//! only the nonzero entries, sorted by mode. The triple `(a, k, k')` of a
//! monomial `∏ I_n(0)^{a_n} z_n^{k_n} z̄_n^{k'_n}` defines the multiset in
//! which mode `n` appears `2a_n + k_n + k'_n` times; its nonincreasing
//! listing is the [`Rearrangement`] `(n_i)`. The starred rearrangement
//! `(n_i*)` lists `n` with multiplicity `|k_n - k'_n|`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

type Entries = SmallVec<[(u32, u32); 4]>;

/// Sparse finite map `mode -> exponent`, zero exponents never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Entries);

impl MultiIndex {
    pub fn new() -> Self {
        MultiIndex(Entries::new())
    }

    /// Builds from arbitrary `(mode, exponent)` pairs; duplicates are summed
    /// and zero exponents dropped.
    ///
    /// Panics on mode 0.
    pub fn from_pairs<I: IntoIterator<Item = (u32, u32)>>(pairs: I) -> Self {
        let mut map: BTreeMap<u32, u32> = BTreeMap::new();
        for (n, e) in pairs {
            assert!(n >= 1, "modes start at 1");
            *map.entry(n).or_insert(0) += e;
        }
        MultiIndex(map.into_iter().filter(|&(_, e)| e > 0).collect())
    }

    /// The unit index `e_n`.
    pub fn unit(n: u32) -> Self {
        Self::from_pairs([(n, 1)])
    }

    pub fn get(&self, n: u32) -> u32 {
        match self.0.binary_search_by_key(&n, |&(m, _)| m) {
            Ok(i) => self.0[i].1,
            Err(_) => 0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.0.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of modes with nonzero exponent.
    pub fn support_len(&self) -> usize {
        self.0.len()
    }

    /// Σ exponents.
    pub fn total(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn max_mode(&self) -> Option<u32> {
        self.0.last().map(|&(n, _)| n)
    }

    /// Pointwise sum.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        let mut out = Entries::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (n, e) = self.0[i];
            let (m, f) = other.0[j];
            match n.cmp(&m) {
                std::cmp::Ordering::Less => {
                    out.push((n, e));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((m, f));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((n, e + f));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        MultiIndex(out)
    }

    /// Adds `delta` to the exponent of mode `n`; `None` if the result would
    /// be negative.
    pub fn shifted(&self, n: u32, delta: i64) -> Option<MultiIndex> {
        let mut out = self.0.clone();
        match out.binary_search_by_key(&n, |&(m, _)| m) {
            Ok(i) => {
                let e = out[i].1 as i64 + delta;
                if e < 0 {
                    return None;
                }
                if e == 0 {
                    out.remove(i);
                } else {
                    out[i].1 = e as u32;
                }
            }
            Err(i) => {
                if delta < 0 {
                    return None;
                }
                if delta > 0 {
                    out.insert(i, (n, delta as u32));
                }
            }
        }
        Some(MultiIndex(out))
    }

    /// Pointwise difference; `None` if any exponent would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut out = self.clone();
        for (n, e) in other.iter() {
            out = out.shifted(n, -(e as i64))?;
        }
        Some(out)
    }

    /// Pointwise minimum `k ∧ k'`.
    pub fn meet(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(
            self.0
                .iter()
                .filter_map(|&(n, e)| {
                    let f = other.get(n);
                    (f > 0).then_some((n, e.min(f)))
                })
                .collect(),
        )
    }

    /// True when no mode carries a nonzero exponent in both indices.
    pub fn disjoint(&self, other: &MultiIndex) -> bool {
        self.0.iter().all(|&(n, _)| other.get(n) == 0)
    }

    pub fn to_map(&self) -> BTreeMap<u32, u32> {
        self.0.iter().copied().collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (n, e)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}:{e}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_map().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<u32, u32>::deserialize(d)?;
        if map.contains_key(&0) {
            return Err(serde::de::Error::custom("mode 0 is not allowed"));
        }
        Ok(MultiIndex::from_pairs(map))
    }
}

/// Sparse finitely supported integer sequence, used for `l = k - k'`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedIndex(SmallVec<[(u32, i32); 4]>);

impl SignedIndex {
    /// Panics on mode 0.
    pub fn from_pairs<I: IntoIterator<Item = (u32, i32)>>(pairs: I) -> Self {
        let mut map: BTreeMap<u32, i32> = BTreeMap::new();
        for (n, e) in pairs {
            assert!(n >= 1, "modes start at 1");
            *map.entry(n).or_insert(0) += e;
        }
        SignedIndex(map.into_iter().filter(|&(_, e)| e != 0).collect())
    }

    /// `k - k'`.
    pub fn difference(k: &MultiIndex, kp: &MultiIndex) -> Self {
        Self::from_pairs(
            k.iter()
                .map(|(n, e)| (n, e as i32))
                .chain(kp.iter().map(|(n, e)| (n, -(e as i32)))),
        )
    }

    pub fn get(&self, n: u32) -> i32 {
        match self.0.binary_search_by_key(&n, |&(m, _)| m) {
            Ok(i) => self.0[i].1,
            Err(_) => 0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, i32)> + '_ {
        self.0.iter().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Σ |l_n|.
    pub fn l1(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e.unsigned_abs()).sum()
    }

    /// Σ l_n n, exact.
    pub fn integer_part(&self) -> i64 {
        self.0.iter().map(|&(n, e)| n as i64 * e as i64).sum()
    }

    pub fn max_mode(&self) -> Option<u32> {
        self.0.last().map(|&(n, _)| n)
    }

    pub fn negated(&self) -> Self {
        SignedIndex(self.0.iter().map(|&(n, e)| (n, -e)).collect())
    }
}

impl fmt::Display for SignedIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (n, e)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}:{e}")?;
        }
        write!(f, "}}")
    }
}

/// Nonincreasing finite list of positive modes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Rearrangement(Vec<u32>);

impl Rearrangement {
    /// Sorts an arbitrary multiset listing into nonincreasing order.
    pub fn from_multiset(mut seq: Vec<u32>) -> Self {
        seq.sort_by(|a, b| b.cmp(a));
        Rearrangement(seq)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `n_i` with 1-based `i`, as in the usual notation.
    pub fn nth(&self, i: usize) -> Option<u32> {
        i.checked_sub(1).and_then(|j| self.0.get(j).copied())
    }

    /// `n_1^θ`, or 0 for the empty multiset.
    pub fn leading_power(&self, theta: f64) -> f64 {
        self.0.first().map_or(0.0, |&n| (n as f64).powf(theta))
    }

    /// Σ_i n_i^θ.
    pub fn power_sum(&self, theta: f64) -> f64 {
        self.0.iter().map(|&n| (n as f64).powf(theta)).sum()
    }

    /// Σ_{i >= 3} n_i^θ.
    pub fn tail_power_sum(&self, theta: f64) -> f64 {
        self.0.iter().skip(2).map(|&n| (n as f64).powf(theta)).sum()
    }
}

/// `(n_i)`: each mode `n` repeated `2a_n + k_n + k'_n` times.
pub fn rearrangement(a: &MultiIndex, k: &MultiIndex, kp: &MultiIndex) -> Rearrangement {
    let mut seq = Vec::with_capacity((2 * a.total() + k.total() + kp.total()) as usize);
    for (n, e) in a.iter() {
        seq.extend(std::iter::repeat_n(n, 2 * e as usize));
    }
    for (n, e) in k.iter().chain(kp.iter()) {
        seq.extend(std::iter::repeat_n(n, e as usize));
    }
    Rearrangement::from_multiset(seq)
}

/// `(n_i*)`: each mode `n` repeated `|k_n - k'_n|` times.
pub fn starred_rearrangement(k: &MultiIndex, kp: &MultiIndex) -> Rearrangement {
    starred_of(&SignedIndex::difference(k, kp))
}

/// Starred rearrangement of a signed index `l`.
pub fn starred_of(l: &SignedIndex) -> Rearrangement {
    let mut seq = Vec::with_capacity(l.l1() as usize);
    for (n, e) in l.iter() {
        seq.extend(std::iter::repeat_n(n, e.unsigned_abs() as usize));
    }
    Rearrangement::from_multiset(seq)
}

/// Both sides of the gap inequality
/// `Σ(2a_n+k_n+k'_n)n^θ − 2n_1^θ ≥ (2−2^θ) Σ_{i≥3} n_i^θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapTerms {
    pub lhs: f64,
    pub rhs: f64,
}

pub fn gap_terms(a: &MultiIndex, k: &MultiIndex, kp: &MultiIndex, theta: f64) -> Result<GapTerms> {
    check_theta(theta)?;
    let seq = rearrangement(a, k, kp);
    Ok(GapTerms {
        lhs: seq.power_sum(theta) - 2.0 * seq.leading_power(theta),
        rhs: (2.0 - 2f64.powf(theta)) * seq.tail_power_sum(theta),
    })
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("theta", format!("{theta} not in (0,1)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(pairs: &[(u32, u32)]) -> MultiIndex {
        MultiIndex::from_pairs(pairs.iter().copied())
    }

    /// Exhaustive search for signs μ_i ∈ {±1} with Σ μ_i n_i = 0.
    fn admits_zero_sum(seq: &[u32]) -> bool {
        assert!(seq.len() <= 20);
        if seq.is_empty() {
            return true;
        }
        let total: i64 = seq.iter().map(|&n| n as i64).sum();
        (0u32..(1 << (seq.len() - 1))).any(|mask| {
            let neg: i64 = seq[1..]
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &n)| n as i64)
                .sum();
            total == 2 * neg
        })
    }

    #[test]
    fn rearrangement_examples() {
        let e = MultiIndex::new();
        assert_eq!(rearrangement(&e, &mi(&[(3, 1), (1, 2)]), &e).as_slice(), &[3, 1, 1]);
        assert!(rearrangement(&e, &e, &e).is_empty());
        assert_eq!(
            rearrangement(&mi(&[(2, 1)]), &mi(&[(5, 1)]), &mi(&[(5, 2)])).as_slice(),
            &[5, 5, 5, 2, 2]
        );
    }

    #[test]
    fn starred_examples() {
        assert_eq!(starred_rearrangement(&mi(&[(5, 1)]), &mi(&[(5, 2)])).as_slice(), &[5]);
        assert!(starred_rearrangement(&mi(&[(7, 3)]), &mi(&[(7, 3)])).is_empty());
        assert_eq!(
            starred_rearrangement(&mi(&[(2, 3)]), &mi(&[(1, 1)])).as_slice(),
            &[2, 2, 2, 1]
        );
    }

    #[test]
    fn gap_examples() {
        let e = MultiIndex::new();
        for n in [1, 4, 9] {
            let g = gap_terms(&e, &mi(&[(n, 2)]), &e, 0.5).unwrap();
            assert_eq!(g.lhs, 0.0);
            assert_eq!(g.rhs, 0.0);
        }
        let g = gap_terms(&e, &mi(&[(2, 1), (1, 2)]), &e, 0.5).unwrap();
        let expected = 2.0 - 2f64.sqrt();
        assert!((g.lhs - expected).abs() < 1e-15);
        assert!((g.rhs - expected).abs() < 1e-15);
        assert!((g.lhs - 0.58579).abs() < 1e-5);

        let g = gap_terms(&e, &mi(&[(3, 1), (2, 1), (1, 1)]), &e, 0.5).unwrap();
        assert!((g.lhs - (1.0 + 2f64.sqrt() - 3f64.sqrt())).abs() < 1e-15);
        assert!((g.lhs - 0.68216).abs() < 1e-5);
        assert!((g.rhs - 0.58579).abs() < 1e-5);
    }

    #[test]
    fn gap_rejects_bad_theta() {
        let e = MultiIndex::new();
        for t in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(gap_terms(&e, &e, &e, t).is_err());
        }
    }

    #[test]
    fn empty_multiset_has_zero_leading_power() {
        let r = Rearrangement::default();
        assert_eq!(r.leading_power(0.5), 0.0);
        assert_eq!(r.nth(1), None);
    }

    #[test]
    fn multiindex_arithmetic() {
        let a = mi(&[(1, 2), (3, 1)]);
        let b = mi(&[(3, 2), (4, 1)]);
        assert_eq!(a.add(&b), mi(&[(1, 2), (3, 3), (4, 1)]));
        assert_eq!(a.meet(&b), mi(&[(3, 1)]));
        assert_eq!(a.add(&b).checked_sub(&b), Some(a.clone()));
        assert_eq!(a.checked_sub(&b), None);
        assert_eq!(a.shifted(1, -2), Some(mi(&[(3, 1)])));
        assert!(mi(&[(1, 0)]).is_empty());
        assert!(a.disjoint(&mi(&[(2, 5)])));
    }

    #[test]
    fn signed_index_basics() {
        let l = SignedIndex::difference(&mi(&[(1, 1), (2, 1)]), &mi(&[(2, 1), (3, 2)]));
        assert_eq!(l, SignedIndex::from_pairs([(1, 1), (3, -2)]));
        assert_eq!(l.l1(), 3);
        assert_eq!(l.integer_part(), -5);
        assert_eq!(l.to_string(), "{1:1,3:-2}");
    }

    fn arb_index() -> impl Strategy<Value = MultiIndex> {
        proptest::collection::vec((1u32..=12, 0u32..=4), 0..5).prop_map(MultiIndex::from_pairs)
    }

    proptest! {
        #[test]
        fn starred_dominated_by_full(a in arb_index(), k in arb_index(), kp in arb_index()) {
            let full = rearrangement(&a, &k, &kp);
            let star = starred_rearrangement(&k, &kp);
            prop_assert!(star.len() <= full.len());
            for (s, n) in star.as_slice().iter().zip(full.as_slice()) {
                prop_assert!(s <= n);
            }
        }

        #[test]
        fn rearrangement_is_order_invariant(
            pairs in proptest::collection::vec((1u32..=12, 0u32..=4), 0..6),
        ) {
            let fwd = MultiIndex::from_pairs(pairs.iter().copied());
            let rev = MultiIndex::from_pairs(pairs.iter().rev().copied());
            let e = MultiIndex::new();
            let r1 = rearrangement(&fwd, &e, &fwd);
            let r2 = rearrangement(&rev, &e, &rev);
            prop_assert_eq!(&r1, &r2);
            prop_assert_eq!(Rearrangement::from_multiset(r1.as_slice().to_vec()), r1);
        }

        #[test]
        fn gap_holds_under_zero_sum(
            k in proptest::collection::vec((1u32..=12, 1u32..=3), 1..5),
            theta in prop::sample::select(vec![0.3, 0.5, 0.8]),
        ) {
            let k = MultiIndex::from_pairs(k);
            let e = MultiIndex::new();
            let seq = rearrangement(&e, &k, &e);
            prop_assume!(seq.len() <= 12 && admits_zero_sum(seq.as_slice()));
            let g = gap_terms(&e, &k, &e, theta).unwrap();
            prop_assert!(g.lhs - g.rhs >= -1e-12, "{} < {}", g.lhs, g.rhs);
        }
    }
}
