//! Poisson bracket of plain polynomials and Lie-series composition.
//!
//! With `ż_n = −i ∂H/∂z̄_n` the bracket is
//! `{F, G} = −i Σ_n (∂_{z_n}F ∂_{z̄_n}G − ∂_{z̄_n}F ∂_{z_n}G)`, so that
//! `dG/dt = {G, H}` along the flow of `H`. On monomials
//! `{M_{akk'}, M_{AKK'}} = −i Σ_j (k_j K'_j − k'_j K_j) M_{a+A, k+K−e_j, k'+K'−e_j}`;
//! the `I(0)` factors pass through. Composition with the time-1 map of `F`
//! is `H ∘ X_F^1 = Σ_p ad_F^p H / p!` with `ad_F H = {H, F}`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hampoly::{Basis, HamiltonianPoly, Monomial};
use crate::par;

/// Terms of the first polynomial handled per parallel work item. Fixed so
/// that the accumulation order does not depend on the worker count.
const CHUNK: usize = 32;

fn mass_by_degree(h: &HamiltonianPoly, max_degree: u32) -> Vec<f64> {
    let mut s = vec![0.0; max_degree as usize + 1];
    for (m, c) in h.iter() {
        s[m.degree() as usize] += c.norm();
    }
    s
}

/// `{h1, h2}` truncated to the common truncation.
///
/// Pairs whose product degree `d1 + d2 − 2` exceeds `maxDegree` are skipped
/// by degree bucket and tallied in the result's dropped mass as
/// `Σ |c1||c2| d1 d2` over those buckets.
pub fn bracket(h1: &HamiltonianPoly, h2: &HamiltonianPoly) -> Result<HamiltonianPoly> {
    h1.expect_basis(Basis::Plain)?;
    h2.expect_basis(Basis::Plain)?;
    let trunc = h1.truncation();
    if trunc != h2.truncation() {
        return Err(Error::TruncationMismatch(trunc, h2.truncation()));
    }
    let max_deg = trunc.max_degree;

    let s1 = mass_by_degree(h1, max_deg);
    let s2 = mass_by_degree(h2, max_deg);
    let mut dropped = 0.0;
    for (d1, m1) in s1.iter().enumerate() {
        for (d2, m2) in s2.iter().enumerate() {
            if d1 + d2 > max_deg as usize + 2 {
                dropped += m1 * m2 * (d1 * d2) as f64;
            }
        }
    }

    let mut buckets: Vec<Vec<(&Monomial, Complex64)>> = vec![Vec::new(); max_deg as usize + 1];
    for (m, c) in h2.iter() {
        buckets[m.degree() as usize].push((m, *c));
    }
    let left: Vec<(&Monomial, Complex64)> = h1
        .iter()
        .filter(|(m, _)| !m.k.is_empty() || !m.kp.is_empty())
        .map(|(m, c)| (m, *c))
        .collect();
    let chunks: Vec<&[(&Monomial, Complex64)]> = left.chunks(CHUNK).collect();

    let partial = par::map(&chunks, |chunk| {
        let mut acc: BTreeMap<Monomial, Complex64> = BTreeMap::new();
        for &(m1, c1) in chunk.iter() {
            let d1 = m1.degree();
            let limit = (max_deg + 2).saturating_sub(d1).min(max_deg) as usize;
            for bucket in &buckets[..=limit] {
                for &(m2, c2) in bucket {
                    bracket_pair(m1, c1, m2, c2, &mut acc);
                }
            }
        }
        acc.into_iter().collect::<Vec<_>>()
    });

    let mut all: Vec<(Monomial, Complex64)> = partial.into_iter().flatten().collect();
    par::sort_stable_by(&mut all, |x, y| x.0.cmp(&y.0));
    let mut merged: Vec<(Monomial, Complex64)> = Vec::with_capacity(all.len());
    for (m, c) in all {
        match merged.last_mut() {
            Some((last, acc)) if *last == m => *acc += c,
            _ => merged.push((m, c)),
        }
    }
    let mut out = HamiltonianPoly::from_sorted_unchecked(Basis::Plain, trunc, merged);
    out.add_dropped(dropped);
    Ok(out)
}

fn bracket_pair(
    m1: &Monomial,
    c1: Complex64,
    m2: &Monomial,
    c2: Complex64,
    acc: &mut BTreeMap<Monomial, Complex64>,
) {
    let mut base: Option<(Monomial, Complex64)> = None;
    let modes = m1.k.iter().map(|(n, _)| n).chain(m1.kp.iter().map(|(n, _)| n));
    let mut seen: smallvec::SmallVec<[u32; 8]> = smallvec::SmallVec::new();
    for n in modes {
        if seen.contains(&n) {
            continue;
        }
        seen.push(n);
        let w = m1.k.get(n) as i64 * m2.kp.get(n) as i64 - m1.kp.get(n) as i64 * m2.k.get(n) as i64;
        if w == 0 {
            continue;
        }
        let (sum, prod) = base.get_or_insert_with(|| {
            (
                Monomial::plain(m1.a.add(&m2.a), m1.k.add(&m2.k), m1.kp.add(&m2.kp)),
                c1 * c2,
            )
        });
        let key = Monomial::plain(
            sum.a.clone(),
            sum.k.shifted(n, -1).expect("mode present in k + K"),
            sum.kp.shifted(n, -1).expect("mode present in k' + K'"),
        );
        // −i · w · c1 c2
        let coef = *prod * Complex64::new(0.0, -(w as f64));
        *acc.entry(key).or_default() += coef;
    }
}

/// Stopping rule for a Lie series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LieOrder {
    /// Orders always computed unless a term vanishes identically.
    pub min: usize,
    /// Hard cap.
    pub max: usize,
    /// Past `min`, stop once the last term's largest coefficient is below this.
    pub tol: f64,
}

impl LieOrder {
    pub fn fixed(order: usize) -> Self {
        LieOrder {
            min: order,
            max: order,
            tol: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LieOutcome {
    pub poly: HamiltonianPoly,
    /// Largest coefficient of the last term added.
    pub last_term_norm: f64,
    pub orders: usize,
}

/// `Σ_{p ≥ 1} weight(p) · ad_F^p h`.
pub fn ad_series(
    h: &HamiltonianPoly,
    f: &HamiltonianPoly,
    weight: impl Fn(usize) -> f64,
    order: LieOrder,
) -> Result<LieOutcome> {
    let mut sum = HamiltonianPoly::new(Basis::Plain, h.truncation());
    let mut term = h.clone();
    let mut last = 0.0;
    let mut p = 0;
    while p < order.max {
        p += 1;
        term = bracket(&term, f)?;
        if term.is_empty() {
            sum.add_dropped(term.dropped_mass() * weight(p));
            last = 0.0;
            break;
        }
        let w = weight(p);
        sum.add_scaled(&term, Complex64::new(w, 0.0))?;
        last = w * term.max_abs_coeff();
        if p >= order.min && last < order.tol {
            break;
        }
    }
    Ok(LieOutcome {
        poly: sum,
        last_term_norm: last,
        orders: p,
    })
}

pub(crate) fn inv_factorial(p: usize) -> f64 {
    (1..=p).fold(1.0, |acc, i| acc / i as f64)
}

/// Truncated Lie series `Σ_{p ≤ order} ad_F^p H / p!`.
pub fn lie_compose(h: &HamiltonianPoly, f: &HamiltonianPoly, order: usize) -> Result<LieOutcome> {
    lie_compose_with(h, f, LieOrder::fixed(order))
}

pub fn lie_compose_with(
    h: &HamiltonianPoly,
    f: &HamiltonianPoly,
    order: LieOrder,
) -> Result<LieOutcome> {
    if order.max == 0 {
        return Err(Error::invalid("order", "must be at least 1"));
    }
    let mut out = ad_series(h, f, inv_factorial, order)?;
    out.poly.add_scaled(h, Complex64::new(1.0, 0.0))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hampoly::Truncation;
    use crate::multiindex::MultiIndex;
    use proptest::prelude::*;

    fn mi(p: &[(u32, u32)]) -> MultiIndex {
        MultiIndex::from_pairs(p.iter().copied())
    }
    fn zz(k: &[(u32, u32)], kp: &[(u32, u32)]) -> Monomial {
        Monomial::plain(MultiIndex::new(), mi(k), mi(kp))
    }
    fn poly(trunc: Truncation, terms: &[(Monomial, Complex64)]) -> HamiltonianPoly {
        HamiltonianPoly::from_terms(Basis::Plain, trunc, terms.iter().cloned()).unwrap()
    }
    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn bracket_examples() {
        let t = Truncation::new(4, 4);
        let i1 = poly(t, &[(zz(&[(1, 1)], &[(1, 1)]), c(1.0, 0.0))]);
        let z1 = poly(t, &[(zz(&[(1, 1)], &[]), c(1.0, 0.0))]);
        let b = bracket(&i1, &z1).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.coeff(&zz(&[(1, 1)], &[])), c(0.0, 1.0));

        let z1 = poly(t, &[(zz(&[(1, 1)], &[]), c(1.0, 0.0))]);
        let zb2 = poly(t, &[(zz(&[], &[(2, 1)]), c(1.0, 0.0))]);
        assert!(bracket(&z1, &zb2).unwrap().is_empty());
    }

    #[test]
    fn bracket_keeps_action_factors() {
        let t = Truncation::new(4, 6);
        let h = poly(t, &[(Monomial::plain(mi(&[(2, 1)]), mi(&[(1, 1)]), mi(&[(1, 1)])), c(1.0, 0.0))]);
        let f = poly(t, &[(zz(&[], &[(1, 1)]), c(1.0, 0.0))]);
        let b = bracket(&h, &f).unwrap();
        assert_eq!(b.coeff(&Monomial::plain(mi(&[(2, 1)]), mi(&[]), mi(&[(1, 1)]))), c(0.0, -1.0));
    }

    #[test]
    fn overflowing_pairs_are_tallied() {
        let t = Truncation::new(2, 3);
        let h = poly(t, &[(zz(&[(1, 2)], &[(1, 1)]), c(2.0, 0.0))]);
        let b = bracket(&h, &h.scaled(c(0.0, 1.0))).unwrap();
        assert!(b.is_empty());
        assert_eq!(b.dropped_mass(), 2.0 * 2.0 * 9.0);
    }

    #[test]
    fn lie_compose_trivial_cases() {
        let t = Truncation::new(3, 4);
        let h = poly(t, &[(zz(&[(1, 1)], &[(2, 1)]), c(0.5, 0.1))]);
        let zero = HamiltonianPoly::new(Basis::Plain, t);
        assert_eq!(lie_compose(&h, &zero, 3).unwrap().poly, h);

        let i1 = poly(t, &[(zz(&[(1, 1)], &[(1, 1)]), c(1.0, 0.0))]);
        let i2 = poly(t, &[(zz(&[(2, 1)], &[(2, 1)]), c(3.0, 0.0))]);
        assert_eq!(lie_compose(&i1, &i2, 5).unwrap().poly, i1);
    }

    #[test]
    fn lie_compose_matches_exact_flow() {
        // F = ε(z_1 + z̄_1) generates ż_1 = −iε, so z_1(1) = z_1 − iε and
        // I_1 ∘ X_F^1 = I_1 + ε(i z̄_1 − i z_1) + ε²: exact at order 2.
        let t = Truncation::new(1, 2);
        let eps = 1e-2;
        let i1 = poly(t, &[(zz(&[(1, 1)], &[(1, 1)]), c(1.0, 0.0))]);
        let f = poly(t, &[(zz(&[(1, 1)], &[]), c(eps, 0.0)), (zz(&[], &[(1, 1)]), c(eps, 0.0))]);
        let out = lie_compose(&i1, &f, 2).unwrap().poly;
        let z = [c(0.3, -0.2)];
        let moved = [z[0] - c(0.0, eps)];
        let got = out.evaluate(&z, &[0.0]).unwrap();
        let want = i1.evaluate(&moved, &[0.0]).unwrap();
        assert!((got - want).norm() < 10.0 * eps.powi(3));
    }

    fn arb_poly(t: Truncation) -> impl Strategy<Value = HamiltonianPoly> {
        let key = (
            proptest::collection::vec((1u32..=4, 0u32..=2), 0..3),
            proptest::collection::vec((1u32..=4, 0u32..=2), 0..3),
        );
        proptest::collection::vec((key, -1.0f64..1.0, -1.0f64..1.0), 1..6).prop_map(move |raw| {
            let mut h = HamiltonianPoly::new(Basis::Plain, t);
            for ((k, kp), x, y) in raw {
                let m = Monomial::plain(
                    MultiIndex::new(),
                    MultiIndex::from_pairs(k),
                    MultiIndex::from_pairs(kp),
                );
                if t.admits(&m) {
                    h.accumulate(m, Complex64::new(x, y));
                }
            }
            h
        })
    }

    proptest! {
        #[test]
        fn antisymmetric(a in arb_poly(Truncation::new(4, 6)), b in arb_poly(Truncation::new(4, 6))) {
            let ab = bracket(&a, &b).unwrap();
            let ba = bracket(&b, &a).unwrap();
            let scale = ab.max_abs_coeff().max(1e-300);
            prop_assert!(ab.plus(&ba).unwrap().max_abs_coeff() <= 1e-12 * scale);
            prop_assert!(bracket(&a, &a).unwrap().max_abs_coeff() <= 1e-12 * a.max_abs_coeff().powi(2).max(1e-300));
        }

        #[test]
        fn leibniz(a in arb_poly(Truncation::new(4, 40)), b in arb_poly(Truncation::new(4, 40)), d in arb_poly(Truncation::new(4, 40))) {
            let lhs = bracket(&a.product(&b).unwrap(), &d).unwrap();
            let rhs = a
                .product(&bracket(&b, &d).unwrap())
                .unwrap()
                .plus(&bracket(&a, &d).unwrap().product(&b).unwrap())
                .unwrap();
            let scale = lhs.max_abs_coeff().max(rhs.max_abs_coeff()).max(1.0);
            prop_assert!(lhs.minus(&rhs).unwrap().max_abs_coeff() <= 1e-12 * scale);
        }
    }
}
