//! Independent reference computations shared by the integration tests and
//! the acceptance runner. Nothing here calls the engine's algebra.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use nlw_kam::{Basis, Complex64, HamiltonianPoly, Monomial, MultiIndex, SignedIndex, Truncation};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

/// Dense exponent vectors `(a, k, k')` over modes `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dense {
    pub a: Vec<u32>,
    pub k: Vec<u32>,
    pub kp: Vec<u32>,
}

fn to_vec(m: &MultiIndex, n: usize) -> Vec<u32> {
    let mut v = vec![0; n];
    for (mode, e) in m.iter() {
        v[mode as usize - 1] = e;
    }
    v
}

fn from_vec(v: &[u32]) -> MultiIndex {
    MultiIndex::from_pairs(v.iter().enumerate().filter(|(_, e)| **e > 0).map(|(i, e)| (i as u32 + 1, *e)))
}

pub fn dense(m: &Monomial, n: usize) -> Dense {
    Dense {
        a: to_vec(&m.a, n),
        k: to_vec(&m.k, n),
        kp: to_vec(&m.kp, n),
    }
}

pub fn sparse(d: &Dense) -> Monomial {
    Monomial::plain(from_vec(&d.a), from_vec(&d.k), from_vec(&d.kp))
}

fn degree(d: &Dense) -> u32 {
    d.a.iter().map(|e| 2 * e).sum::<u32>() + d.k.iter().sum::<u32>() + d.kp.iter().sum::<u32>()
}

/// `∂/∂z_j` (`conj = false`) or `∂/∂z̄_j` of one plain monomial.
fn derivative(d: &Dense, c: Complex64, j: usize, conj: bool) -> Option<(Dense, Complex64)> {
    let mut out = d.clone();
    let e = if conj { &mut out.kp[j] } else { &mut out.k[j] };
    if *e == 0 {
        return None;
    }
    let f = *e as f64;
    *e -= 1;
    Some((out, c * f))
}

fn product(x: &Dense, y: &Dense) -> Dense {
    let add = |p: &[u32], q: &[u32]| p.iter().zip(q).map(|(a, b)| a + b).collect();
    Dense {
        a: add(&x.a, &y.a),
        k: add(&x.k, &y.k),
        kp: add(&x.kp, &y.kp),
    }
}

/// `{F, G} = −i Σ_j (∂_{z_j}F ∂_{z̄_j}G − ∂_{z̄_j}F ∂_{z_j}G)` by explicit
/// differentiation and multiplication, keeping degrees ≤ `max_degree`.
pub fn bracket_oracle(f: &HamiltonianPoly, g: &HamiltonianPoly) -> HashMap<Dense, Complex64> {
    let t = f.truncation();
    let n = t.max_mode as usize;
    let mut out: HashMap<Dense, Complex64> = HashMap::new();
    let minus_i = Complex64::new(0.0, -1.0);
    for (mf, cf) in f.iter() {
        let df = dense(mf, n);
        for (mg, cg) in g.iter() {
            let dg = dense(mg, n);
            for j in 0..n {
                for (sign, fc, gc) in [(1.0, false, true), (-1.0, true, false)] {
                    let (Some((x, cx)), Some((y, cy))) = (derivative(&df, *cf, j, fc), derivative(&dg, *cg, j, gc)) else {
                        continue;
                    };
                    let p = product(&x, &y);
                    if degree(&p) > t.max_degree {
                        continue;
                    }
                    *out.entry(p).or_default() += minus_i * sign * cx * cy;
                }
            }
        }
    }
    out.retain(|_, c| c.norm() != 0.0);
    out
}

/// Largest coefficient difference between an engine polynomial and a dense map.
pub fn max_difference(p: &HamiltonianPoly, q: &HashMap<Dense, Complex64>) -> f64 {
    let n = p.truncation().max_mode as usize;
    let mut all: HashMap<Dense, Complex64> = q.clone();
    for (m, c) in p.iter() {
        *all.entry(dense(m, n)).or_default() -= *c;
    }
    all.values().fold(0.0f64, |m, c| m.max(c.norm()))
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(∏ n^{(2a+k+k')/2}, Σ(2a+k+k')n^θ − 2n_1^θ)` of a dense key.
fn weight(d: &Dense, theta: f64) -> (f64, f64) {
    let mut w = 1.0f64;
    let mut expo = 0.0;
    let mut top = 0usize;
    for i in 0..d.a.len() {
        let mult = 2 * d.a[i] + d.k[i] + d.kp[i];
        if mult > 0 {
            let nf = (i + 1) as f64;
            w *= nf.powf(mult as f64 / 2.0);
            expo += mult as f64 * nf.powf(theta);
            top = i + 1;
        }
    }
    if top > 0 {
        expo -= 2.0 * (top as f64).powf(theta);
    }
    (w, expo)
}

/// Class norms of an adapted polynomial, recomputed from the definitions:
/// class 0 weighs `|B|·w(M)`, class 1 `J_m M` weighs `m|B|·w(M)e^{−2ρm^θ}`,
/// class ≥ 2 keeps the two largest `J` modes and expands the other `J`
/// factors as `|z|² − I(0)` before aggregating.
pub fn norm_plus_oracle(p: &HamiltonianPoly, rho: f64, theta: f64) -> [f64; 3] {
    assert_eq!(p.basis(), Basis::Adapted);
    let n = p.truncation().max_mode as usize;
    let mut r = [0.0f64; 3];
    let mut class2: BTreeMap<(usize, usize, Dense), Complex64> = BTreeMap::new();
    for (m, c) in p.iter() {
        let d = dense(m, n);
        let b = to_vec(&m.b, n);
        let total: u32 = b.iter().sum();
        match total {
            0 => {
                let (w, e) = weight(&d, theta);
                r[0] = r[0].max(c.norm() * w * (-rho * e).exp());
            }
            1 => {
                let mode = b.iter().position(|&e| e == 1).unwrap() + 1;
                let mf = mode as f64;
                let (w, e) = weight(&d, theta);
                r[1] = r[1].max(c.norm() * mf * w * (-rho * (e + 2.0 * mf.powf(theta))).exp());
            }
            _ => {
                let mut modes: Vec<usize> = Vec::new();
                for (i, &e) in b.iter().enumerate() {
                    modes.extend(std::iter::repeat_n(i + 1, e as usize));
                }
                modes.sort_unstable_by(|x, y| y.cmp(x));
                let (m1, m2) = (modes[0], modes[1]);
                let mut rest = b.clone();
                rest[m1 - 1] -= 1;
                rest[m2 - 1] -= 1;
                // expand ∏ (|z_i|² − I_i(0))^{rest_i}
                let mut parts: Vec<(Vec<u32>, f64)> = vec![(vec![0; n], 1.0)];
                for i in 0..n {
                    let mut next = Vec::new();
                    for (j, coef) in &parts {
                        for take in 0..=rest[i] {
                            let mut jj = j.clone();
                            jj[i] = take;
                            let sign = if (rest[i] - take).is_multiple_of(2) { 1.0 } else { -1.0 };
                            next.push((jj, coef * sign * binom(rest[i], take)));
                        }
                    }
                    parts = next;
                }
                for (j, coef) in parts {
                    let mut inner = d.clone();
                    for i in 0..n {
                        inner.k[i] += j[i];
                        inner.kp[i] += j[i];
                        inner.a[i] += rest[i] - j[i];
                    }
                    *class2.entry((m1, m2, inner)).or_default() += c * coef;
                }
            }
        }
    }
    for ((m1, m2, inner), c) in class2 {
        let (w, e) = weight(&inner, theta);
        let (f1, f2) = (m1 as f64, m2 as f64);
        let v = c.norm() * f1 * f2 * w * (-rho * (e + 2.0 * f1.powf(theta) + 2.0 * f2.powf(theta))).exp();
        r[2] = r[2].max(v);
    }
    r
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `(λ_iλ_jλ_kλ_l)^{−1/2} ∫_0^π φ_iφ_jφ_kφ_l` by quadrature.
pub fn coupling_quadrature(modes: [u32; 4], lambdas: &[f64], panels: usize) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let integral = simpson(
        |x| modes.iter().map(|&n| c * (n as f64 * x).sin()).product(),
        0.0,
        std::f64::consts::PI,
        panels,
    );
    let lam: f64 = modes.iter().map(|&n| lambdas[n as usize - 1]).product();
    integral / lam.sqrt()
}

/// Exact distance of `Σ l_n ω_n` to the nearest integer (as f64), with the
/// ω entries converted exactly to rationals.
pub fn exact_distance_to_int(l: &SignedIndex, omega: &[f64]) -> f64 {
    let mut x = BigRational::from_integer(BigInt::from(0));
    for (n, e) in l.iter() {
        let w = BigRational::from_float(omega[n as usize - 1]).expect("finite ω");
        x += w * BigRational::from_integer(BigInt::from(e));
    }
    let fl = x.floor();
    let frac = &x - &fl;
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let d = if frac > half {
        BigRational::from_integer(BigInt::from(1)) - frac
    } else {
        frac
    };
    let num: f64 = d.numer().to_string().parse().unwrap();
    let den: f64 = d.denom().to_string().parse().unwrap();
    num / den
}

/// Exhaustive search for signs `μ_i ∈ {±1}` with `Σ μ_i n_i = 0`.
pub fn admits_zero_sum(seq: &[u32]) -> bool {
    if seq.is_empty() {
        return true;
    }
    let total: i64 = seq.iter().map(|&n| n as i64).sum();
    if total % 2 != 0 {
        return false;
    }
    // subset-sum reachability for total / 2
    let target = (total / 2) as usize;
    let mut reach = vec![false; target + 1];
    reach[0] = true;
    for &n in seq {
        for s in (n as usize..=target).rev() {
            if reach[s - n as usize] {
                reach[s] = true;
            }
        }
    }
    reach[target]
}

/// Random zero-sum-admissible `(a, k, k')` over modes `1..=max_mode`:
/// the signed modes are drawn first, then closed by one extra mode, and
/// `a` adds cancelling pairs.
pub fn random_zero_sum_key(rng: &mut impl Rng, max_mode: u32, max_len: usize) -> (MultiIndex, MultiIndex, MultiIndex) {
    loop {
        let len = rng.random_range(1..=max_len);
        let mut sum: i64 = 0;
        let mut items: Vec<u32> = Vec::with_capacity(len + 1);
        for _ in 0..len {
            let n = rng.random_range(1..=max_mode);
            sum += if rng.random_bool(0.5) { n as i64 } else { -(n as i64) };
            items.push(n);
        }
        let close = sum.unsigned_abs() as u32;
        if close > max_mode {
            continue;
        }
        if close > 0 {
            items.push(close);
        }
        let mut a: BTreeMap<u32, u32> = BTreeMap::new();
        for _ in 0..rng.random_range(0..=2) {
            *a.entry(rng.random_range(1..=max_mode)).or_default() += 1;
        }
        let mut k: BTreeMap<u32, u32> = BTreeMap::new();
        let mut kp: BTreeMap<u32, u32> = BTreeMap::new();
        for n in items {
            let side = if rng.random_bool(0.5) { &mut k } else { &mut kp };
            *side.entry(n).or_default() += 1;
        }
        return (
            MultiIndex::from_pairs(a),
            MultiIndex::from_pairs(k),
            MultiIndex::from_pairs(kp),
        );
    }
}

/// Gap inequality sides computed directly from the sorted multiset.
pub fn gap_oracle(a: &MultiIndex, k: &MultiIndex, kp: &MultiIndex, theta: f64) -> (f64, f64) {
    let mut seq: Vec<u32> = Vec::new();
    for (n, e) in a.iter() {
        seq.extend(std::iter::repeat_n(n, 2 * e as usize));
    }
    for (n, e) in k.iter().chain(kp.iter()) {
        seq.extend(std::iter::repeat_n(n, e as usize));
    }
    seq.sort_unstable_by(|x, y| y.cmp(x));
    let p = |n: u32| (n as f64).powf(theta);
    let lhs = seq.iter().map(|&n| p(n)).sum::<f64>() - 2.0 * seq.first().map_or(0.0, |&n| p(n));
    let rhs = (2.0 - 2f64.powf(theta)) * seq.iter().skip(2).map(|&n| p(n)).sum::<f64>();
    (lhs, rhs)
}

fn random_index(rng: &mut impl Rng, max_mode: u32, budget: u32) -> MultiIndex {
    let mut m: BTreeMap<u32, u32> = BTreeMap::new();
    for _ in 0..budget {
        *m.entry(rng.random_range(1..=max_mode)).or_default() += 1;
    }
    MultiIndex::from_pairs(m)
}

/// Random plain polynomial with `terms` keys of degree ≤ the truncation and
/// coefficients in the unit square.
pub fn random_plain(rng: &mut impl Rng, t: Truncation, terms: usize) -> HamiltonianPoly {
    let mut p = HamiltonianPoly::new(Basis::Plain, t);
    while p.len() < terms {
        let deg = rng.random_range(1..=t.max_degree);
        let a_deg = rng.random_range(0..=deg / 2) / 2;
        let rest = deg - 2 * a_deg;
        let kd = rng.random_range(0..=rest);
        let m = Monomial::plain(
            random_index(rng, t.max_mode, a_deg),
            random_index(rng, t.max_mode, kd),
            random_index(rng, t.max_mode, rest - kd),
        );
        if m.degree() == 0 {
            continue;
        }
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        p.add_term(m, c).unwrap();
    }
    p
}

/// Random non-averaged adapted polynomial of the given class (`|b|` = 0 or 1).
pub fn random_adapted_class(rng: &mut impl Rng, t: Truncation, class: u32, terms: usize) -> HamiltonianPoly {
    let mut p = HamiltonianPoly::new(Basis::Adapted, t);
    let mut guard = 0;
    while p.len() < terms && guard < 100 * terms {
        guard += 1;
        let budget = t.max_degree - 2 * class;
        let a_deg = rng.random_range(0..=budget / 4);
        let rest = budget - 2 * a_deg;
        if rest == 0 {
            continue;
        }
        let kd = rng.random_range(0..=rest);
        let l = random_index(rng, t.max_mode, kd);
        let kpd = rng.random_range(0..=rest - kd);
        let lp = random_index(rng, t.max_mode, kpd);
        let common = l.meet(&lp);
        let (l, lp) = (l.checked_sub(&common).unwrap(), lp.checked_sub(&common).unwrap());
        if l == lp {
            continue;
        }
        let b = if class == 1 {
            MultiIndex::unit(rng.random_range(1..=t.max_mode))
        } else {
            MultiIndex::new()
        };
        let m = Monomial::adapted(random_index(rng, t.max_mode, a_deg), b, l, lp);
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        p.add_term(m, c).unwrap();
    }
    p
}
