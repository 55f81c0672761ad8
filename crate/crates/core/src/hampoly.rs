//! Sparse Hamiltonian polynomials.
//!
//! A [`HamiltonianPoly`] is a map from [`Monomial`] keys to complex
//! coefficients in one of two bases:
//!
//! * plain: `∏ I_n(0)^{a_n} z_n^{k_n} z̄_n^{k'_n}` (`b` empty);
//! * adapted: `∏ I_n(0)^{a_n} J_n^{b_n} z_n^{l_n} z̄_n^{l'_n}` with
//!   `J_n = |z_n|² − I_n(0)` and `l_n l'_n = 0`.
//!
//! The torus actions `I_n(0)` are symbolic (the `a` index); they are inert
//! under the Poisson bracket and only take numeric values in [`evaluate`]
//! and in the frequency shift.
//!
//! Degrees count `I_n(0)` and `J_n` twice, so the degree of a key is
//! `Σ(2a + 2b + k + k')` and is preserved by basis conversion.
//!
//! [`evaluate`]: HamiltonianPoly::evaluate

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::{check_theta, MultiIndex, SignedIndex};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Plain,
    Adapted,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Basis::Plain => "plain",
            Basis::Adapted => "adapted",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Truncation {
    pub max_mode: u32,
    pub max_degree: u32,
}

impl Truncation {
    pub fn new(max_mode: u32, max_degree: u32) -> Self {
        Truncation {
            max_mode,
            max_degree,
        }
    }

    pub fn admits(&self, m: &Monomial) -> bool {
        m.degree() <= self.max_degree && m.max_mode().is_none_or(|n| n <= self.max_mode)
    }
}

/// Monomial key. In the plain basis `b` is empty and `(k, kp)` are the
/// `z`, `z̄` exponents; in the adapted basis they are `(l, l')`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub a: MultiIndex,
    pub b: MultiIndex,
    pub k: MultiIndex,
    pub kp: MultiIndex,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn plain(a: MultiIndex, k: MultiIndex, kp: MultiIndex) -> Self {
        Monomial {
            a,
            b: MultiIndex::new(),
            k,
            kp,
        }
    }

    pub fn adapted(a: MultiIndex, b: MultiIndex, l: MultiIndex, lp: MultiIndex) -> Self {
        Monomial { a, b, k: l, kp: lp }
    }

    pub fn degree(&self) -> u32 {
        2 * self.a.total() + 2 * self.b.total() + self.k.total() + self.kp.total()
    }

    pub fn max_mode(&self) -> Option<u32> {
        [&self.a, &self.b, &self.k, &self.kp]
            .iter()
            .filter_map(|m| m.max_mode())
            .max()
    }

    /// `k − k'` (equivalently `l − l'`).
    pub fn l_index(&self) -> SignedIndex {
        SignedIndex::difference(&self.k, &self.kp)
    }

    /// Number of `J` factors, `Σ b_n`.
    pub fn class(&self) -> u32 {
        self.b.total()
    }

    /// `k = k'`: the monomial depends on the actions only.
    pub fn is_diagonal(&self) -> bool {
        self.k == self.kp
    }

    /// Key with `k` and `k'` swapped (complex conjugate monomial).
    pub fn conjugate(&self) -> Monomial {
        Monomial {
            a: self.a.clone(),
            b: self.b.clone(),
            k: self.kp.clone(),
            kp: self.k.clone(),
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a={} b={} k={} k'={}", self.a, self.b, self.k, self.kp)
    }
}

/// `(log ∏ n^{(2a_n+k_n+k'_n)/2}, Σ(2a_n+k_n+k'_n)n^θ − 2n_1^θ)`.
pub(crate) fn weight_and_exponent(
    a: &MultiIndex,
    k: &MultiIndex,
    kp: &MultiIndex,
    theta: f64,
) -> (f64, f64) {
    let mut log_w = 0.0;
    let mut expo = 0.0;
    let mut top = 0u32;
    for (idx, scale) in [(a, 2.0), (k, 1.0), (kp, 1.0)] {
        for (n, e) in idx.iter() {
            let c = scale * e as f64;
            let nf = n as f64;
            log_w += 0.5 * c * nf.ln();
            expo += c * nf.powf(theta);
            top = top.max(n);
        }
    }
    if top > 0 {
        expo -= 2.0 * (top as f64).powf(theta);
    }
    (log_w, expo)
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// Calls `f(j, ∏ C(b_n, j_n))` for every `j ≤ b`.
fn for_each_binomial_part(b: &MultiIndex, f: &mut dyn FnMut(&MultiIndex, f64)) {
    let entries: Vec<(u32, u32)> = b.iter().collect();
    let mut cur: Vec<(u32, u32)> = Vec::with_capacity(entries.len());
    fn rec(
        entries: &[(u32, u32)],
        cur: &mut Vec<(u32, u32)>,
        coef: f64,
        f: &mut dyn FnMut(&MultiIndex, f64),
    ) {
        match entries.split_first() {
            None => f(&MultiIndex::from_pairs(cur.iter().copied()), coef),
            Some((&(n, e), rest)) => {
                for j in 0..=e {
                    cur.push((n, j));
                    rec(rest, cur, coef * binomial(e, j), f);
                    cur.pop();
                }
            }
        }
    }
    rec(&entries, &mut cur, 1.0, f);
}

/// Class-wise weighted norms of an adapted polynomial and their maximum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassNorms {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianPoly {
    basis: Basis,
    truncation: Truncation,
    terms: BTreeMap<Monomial, Complex64>,
    dropped: f64,
}

impl HamiltonianPoly {
    pub fn new(basis: Basis, truncation: Truncation) -> Self {
        HamiltonianPoly {
            basis,
            truncation,
            terms: BTreeMap::new(),
            dropped: 0.0,
        }
    }

    pub fn from_terms<I>(basis: Basis, truncation: Truncation, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Monomial, Complex64)>,
    {
        let mut h = Self::new(basis, truncation);
        for (m, c) in terms {
            h.add_term(m, c)?;
        }
        Ok(h)
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    /// ℓ1 upper bound on coefficient mass discarded by truncated products.
    pub fn dropped_mass(&self) -> f64 {
        self.dropped
    }

    pub fn add_dropped(&mut self, mass: f64) {
        self.dropped += mass;
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Complex64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    fn check_shape(&self, m: &Monomial) -> Result<()> {
        if !self.truncation.admits(m) {
            return Err(Error::TruncationOverflow {
                degree: m.degree(),
                max_mode: m.max_mode().unwrap_or(0),
                limit_mode: self.truncation.max_mode,
                limit_degree: self.truncation.max_degree,
            });
        }
        match self.basis {
            Basis::Plain if !m.b.is_empty() => {
                Err(Error::invalid("monomial", format!("plain key carries J factors: {m}")))
            }
            Basis::Adapted if !m.k.disjoint(&m.kp) => {
                Err(Error::invalid("monomial", format!("adapted key has l·l' ≠ 0: {m}")))
            }
            _ => Ok(()),
        }
    }

    /// Adds `c` to the coefficient of `m`.
    pub fn add_term(&mut self, m: Monomial, c: Complex64) -> Result<()> {
        self.check_shape(&m)?;
        self.accumulate(m, c);
        Ok(())
    }

    /// Unchecked accumulation; callers guarantee shape and truncation.
    pub(crate) fn accumulate(&mut self, m: Monomial, c: Complex64) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                if c != Complex64::new(0.0, 0.0) {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == Complex64::new(0.0, 0.0) {
                    o.remove();
                }
            }
        }
    }

    /// Builds from keys already sorted and merged; zero coefficients dropped.
    pub(crate) fn from_sorted_unchecked(
        basis: Basis,
        truncation: Truncation,
        terms: Vec<(Monomial, Complex64)>,
    ) -> Self {
        HamiltonianPoly {
            basis,
            truncation,
            terms: terms
                .into_iter()
                .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
                .collect(),
            dropped: 0.0,
        }
    }

    pub(crate) fn expect_basis(&self, basis: Basis) -> Result<()> {
        if self.basis == basis {
            Ok(())
        } else {
            Err(Error::WrongBasis {
                expected: basis.name(),
                found: self.basis.name(),
            })
        }
    }

    fn expect_compatible(&self, other: &Self) -> Result<()> {
        other.expect_basis(self.basis)?;
        if self.truncation != other.truncation {
            return Err(Error::TruncationMismatch(self.truncation, other.truncation));
        }
        Ok(())
    }

    /// `self += c · other`; dropped-mass tallies add up (scaled by `|c|`).
    pub fn add_scaled(&mut self, other: &Self, c: Complex64) -> Result<()> {
        self.expect_compatible(other)?;
        for (m, v) in other.iter() {
            self.accumulate(m.clone(), v * c);
        }
        self.dropped += c.norm() * other.dropped;
        Ok(())
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(other, Complex64::new(1.0, 0.0))?;
        Ok(out)
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(other, Complex64::new(-1.0, 0.0))?;
        Ok(out)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = Self::new(self.basis, self.truncation);
        for (m, v) in self.iter() {
            out.accumulate(m.clone(), v * c);
        }
        out.dropped = self.dropped * c.norm();
        out
    }

    /// Keeps the terms for which `keep` holds.
    pub fn filtered(&self, keep: impl Fn(&Monomial) -> bool) -> Self {
        HamiltonianPoly {
            basis: self.basis,
            truncation: self.truncation,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
            dropped: 0.0,
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Highest key degree, 0 for the empty polynomial.
    pub fn max_key_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Splits an adapted polynomial into classes `|b| = 0, 1, ≥ 2`.
    pub fn split_classes(&self) -> Result<[HamiltonianPoly; 3]> {
        self.expect_basis(Basis::Adapted)?;
        let mut out = [
            Self::new(Basis::Adapted, self.truncation),
            Self::new(Basis::Adapted, self.truncation),
            Self::new(Basis::Adapted, self.truncation),
        ];
        for (m, c) in self.iter() {
            out[m.class().min(2) as usize].terms.insert(m.clone(), *c);
        }
        Ok(out)
    }

    /// Checks `coeff(m) = conj(coeff(m̄))` to `tol` relative to the largest
    /// coefficient.
    pub fn is_real_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs_coeff().max(f64::MIN_POSITIVE);
        self.iter()
            .all(|(m, c)| (self.coeff(&m.conjugate()).conj() - c).norm() <= tol * scale)
    }

    /// Product of two plain polynomials; keys beyond the truncation are
    /// dropped and their mass tallied.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.expect_basis(Basis::Plain)?;
        self.expect_compatible(other)?;
        let mut out = Self::new(Basis::Plain, self.truncation);
        for (m1, c1) in self.iter() {
            for (m2, c2) in other.iter() {
                let m = Monomial::plain(m1.a.add(&m2.a), m1.k.add(&m2.k), m1.kp.add(&m2.kp));
                if self.truncation.admits(&m) {
                    out.accumulate(m, c1 * c2);
                } else {
                    out.dropped += c1.norm() * c2.norm();
                }
            }
        }
        Ok(out)
    }

    /// Rewrites `I_n^{b_n} = (I_n(0) + J_n)^{b_n}` with `b = k ∧ k'`.
    pub fn to_adapted(&self) -> Result<Self> {
        self.expect_basis(Basis::Plain)?;
        let mut out = Self::new(Basis::Adapted, self.truncation);
        out.dropped = self.dropped;
        for (m, c) in self.iter() {
            let b = m.k.meet(&m.kp);
            let l = m.k.checked_sub(&b).expect("k ≥ k∧k'");
            let lp = m.kp.checked_sub(&b).expect("k' ≥ k∧k'");
            if b.is_empty() {
                out.accumulate(Monomial::adapted(m.a.clone(), b, l, lp), *c);
                continue;
            }
            for_each_binomial_part(&b, &mut |j, coef| {
                let rest = b.checked_sub(j).expect("j ≤ b");
                let key = Monomial::adapted(m.a.add(&rest), j.clone(), l.clone(), lp.clone());
                out.accumulate(key, c * coef);
            });
        }
        Ok(out)
    }

    /// Rewrites `J_n = z_n z̄_n − I_n(0)`.
    pub fn to_plain(&self) -> Result<Self> {
        self.expect_basis(Basis::Adapted)?;
        let mut out = Self::new(Basis::Plain, self.truncation);
        out.dropped = self.dropped;
        for (m, c) in self.iter() {
            if m.b.is_empty() {
                out.accumulate(Monomial::plain(m.a.clone(), m.k.clone(), m.kp.clone()), *c);
                continue;
            }
            let total = m.b.total();
            for_each_binomial_part(&m.b, &mut |i, coef| {
                let rest = m.b.checked_sub(i).expect("i ≤ b");
                let sign = if (total - i.total()) % 2 == 0 { 1.0 } else { -1.0 };
                let key = Monomial::plain(m.a.add(&rest), m.k.add(i), m.kp.add(i));
                out.accumulate(key, c * (sign * coef));
            });
        }
        Ok(out)
    }

    /// Weighted sup-norm of a plain polynomial:
    /// `sup |B| ∏ n^{(2a_n+k_n+k'_n)/2} e^{−ρ(Σ(2a_n+k_n+k'_n)n^θ − 2n_1^θ)}`.
    pub fn norm_rho(&self, rho: f64, theta: f64) -> Result<f64> {
        self.expect_basis(Basis::Plain)?;
        check_theta(theta)?;
        let mut best = f64::NEG_INFINITY;
        for (m, c) in self.iter() {
            let (log_w, expo) = weight_and_exponent(&m.a, &m.k, &m.kp, theta);
            best = best.max(c.norm().ln() + log_w - rho * expo);
        }
        Ok(if best == f64::NEG_INFINITY { 0.0 } else { best.exp() })
    }

    /// Class-wise norms of an adapted polynomial.
    ///
    /// Class 1 keys `J_m M` weigh `|m B|` with surcharge `+2m^θ`; class 2
    /// keys `J_{m1} J_{m2} M` weigh `|m1 m2 B|` with `+2m1^θ + 2m2^θ`, the
    /// exponent base taken from the inner monomial `M`. Keys with three or
    /// more `J` factors are written as `J_{m1} J_{m2}` (two largest modes of
    /// `b`) times the plain expansion of the remaining factors, and
    /// coefficients are aggregated per `(m1, m2, M)` before taking the sup.
    pub fn norm_plus(&self, rho: f64, theta: f64) -> Result<ClassNorms> {
        self.expect_basis(Basis::Adapted)?;
        check_theta(theta)?;
        let mut log_r = [f64::NEG_INFINITY; 3];
        let mut class2: BTreeMap<(u32, u32, Monomial), Complex64> = BTreeMap::new();
        for (m, c) in self.iter() {
            match m.class() {
                0 => {
                    let (lw, e) = weight_and_exponent(&m.a, &m.k, &m.kp, theta);
                    log_r[0] = log_r[0].max(c.norm().ln() + lw - rho * e);
                }
                1 => {
                    let mode = m.b.max_mode().expect("class 1");
                    let mf = mode as f64;
                    let (lw, e) = weight_and_exponent(&m.a, &m.k, &m.kp, theta);
                    let v = c.norm().ln() + mf.ln() + lw - rho * (e + 2.0 * mf.powf(theta));
                    log_r[1] = log_r[1].max(v);
                }
                _ => {
                    let mut modes: Vec<u32> = m
                        .b
                        .iter()
                        .flat_map(|(n, e)| std::iter::repeat_n(n, e as usize))
                        .collect();
                    modes.sort_unstable_by(|x, y| y.cmp(x));
                    let (m1, m2) = (modes[0], modes[1]);
                    let rest = m
                        .b
                        .checked_sub(&MultiIndex::from_pairs([(m1, 1), (m2, 1)]))
                        .expect("two largest modes of b");
                    let total = rest.total();
                    for_each_binomial_part(&rest, &mut |i, coef| {
                        let drop = rest.checked_sub(i).expect("i ≤ rest");
                        let sign = if (total - i.total()) % 2 == 0 { 1.0 } else { -1.0 };
                        let inner = Monomial::plain(m.a.add(&drop), m.k.add(i), m.kp.add(i));
                        *class2.entry((m1, m2, inner)).or_default() += c * (sign * coef);
                    });
                }
            }
        }
        for ((m1, m2, inner), c) in &class2 {
            if c.norm() == 0.0 {
                continue;
            }
            let (f1, f2) = (*m1 as f64, *m2 as f64);
            let (lw, e) = weight_and_exponent(&inner.a, &inner.k, &inner.kp, theta);
            let surcharge = 2.0 * f1.powf(theta) + 2.0 * f2.powf(theta);
            let v = c.norm().ln() + f1.ln() + f2.ln() + lw - rho * (e + surcharge);
            log_r[2] = log_r[2].max(v);
        }
        let r = log_r.map(|x| if x == f64::NEG_INFINITY { 0.0 } else { x.exp() });
        Ok(ClassNorms {
            r0: r[0],
            r1: r[1],
            r2: r[2],
            max: r[0].max(r[1]).max(r[2]),
        })
    }

    fn check_state(&self, z: &[Complex64], i0: &[f64]) -> Result<()> {
        let need = self.truncation.max_mode;
        for len in [z.len(), i0.len()] {
            if (len as u32) < need {
                return Err(Error::MissingMode {
                    mode: len as u32 + 1,
                    available: len,
                });
            }
        }
        Ok(())
    }

    /// Numerical value at the state `z` (index `n − 1` holds `z_n`) with
    /// torus actions `i0`.
    pub fn evaluate(&self, z: &[Complex64], i0: &[f64]) -> Result<Complex64> {
        self.check_state(z, i0)?;
        let mut sum = Complex64::new(0.0, 0.0);
        for (m, c) in self.iter() {
            sum += c * self.monomial_value(m, z, i0);
        }
        Ok(sum)
    }

    fn monomial_value(&self, m: &Monomial, z: &[Complex64], i0: &[f64]) -> Complex64 {
        let mut v = Complex64::new(1.0, 0.0);
        for (n, e) in m.a.iter() {
            v *= i0[n as usize - 1].powi(e as i32);
        }
        for (n, e) in m.b.iter() {
            let zn = z[n as usize - 1];
            v *= (zn.norm_sqr() - i0[n as usize - 1]).powi(e as i32);
        }
        for (n, e) in m.k.iter() {
            v *= z[n as usize - 1].powi(e as i32);
        }
        for (n, e) in m.kp.iter() {
            v *= z[n as usize - 1].conj().powi(e as i32);
        }
        v
    }

    /// Hamiltonian vector field `ż_n = −i ∂H/∂z̄_n` of a plain polynomial,
    /// one entry per mode up to the truncation.
    pub fn vector_field(&self, z: &[Complex64], i0: &[f64]) -> Result<Vec<Complex64>> {
        self.expect_basis(Basis::Plain)?;
        self.check_state(z, i0)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.truncation.max_mode as usize];
        for (m, c) in self.iter() {
            for (n, e) in m.kp.iter() {
                let reduced = Monomial {
                    kp: m.kp.shifted(n, -1).expect("exponent ≥ 1"),
                    ..m.clone()
                };
                out[n as usize - 1] += c * e as f64 * self.monomial_value(&reduced, z, i0);
            }
        }
        let minus_i = Complex64::new(0.0, -1.0);
        Ok(out.into_iter().map(|v| minus_i * v).collect())
    }

    pub fn to_json(&self) -> PolyJson {
        let terms = self
            .iter()
            .map(|(m, c)| {
                let (k, kp, l, lp, b) = match self.basis {
                    Basis::Plain => (Some(m.k.clone()), Some(m.kp.clone()), None, None, None),
                    Basis::Adapted => (
                        None,
                        None,
                        Some(m.k.clone()),
                        Some(m.kp.clone()),
                        Some(m.b.clone()),
                    ),
                };
                TermJson {
                    a: m.a.clone(),
                    b,
                    k,
                    kp,
                    l,
                    lp,
                    re: c.re,
                    im: c.im,
                }
            })
            .collect();
        PolyJson {
            schema: SCHEMA_VERSION,
            basis: self.basis,
            max_mode: self.truncation.max_mode,
            max_degree: self.truncation.max_degree,
            dropped_mass: self.dropped,
            terms,
        }
    }

    pub fn from_json(doc: &PolyJson) -> Result<Self> {
        let trunc = Truncation::new(doc.max_mode, doc.max_degree);
        let mut h = Self::new(doc.basis, trunc);
        h.dropped = doc.dropped_mass;
        for t in &doc.terms {
            let key = match doc.basis {
                Basis::Plain => {
                    if t.b.is_some() || t.l.is_some() || t.lp.is_some() {
                        return Err(Error::invalid("terms", "plain term with adapted fields"));
                    }
                    Monomial::plain(
                        t.a.clone(),
                        t.k.clone().unwrap_or_default(),
                        t.kp.clone().unwrap_or_default(),
                    )
                }
                Basis::Adapted => {
                    if t.k.is_some() || t.kp.is_some() {
                        return Err(Error::invalid("terms", "adapted term with plain fields"));
                    }
                    Monomial::adapted(
                        t.a.clone(),
                        t.b.clone().unwrap_or_default(),
                        t.l.clone().unwrap_or_default(),
                        t.lp.clone().unwrap_or_default(),
                    )
                }
            };
            h.add_term(key, Complex64::new(t.re, t.im))?;
        }
        Ok(h)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_json())?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let doc: PolyJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_json(&doc)
    }
}

/// On-disk shape of a polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolyJson {
    pub schema: u32,
    pub basis: Basis,
    pub max_mode: u32,
    pub max_degree: u32,
    #[serde(default)]
    pub dropped_mass: f64,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub a: MultiIndex,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub b: Option<MultiIndex>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<MultiIndex>,
    #[serde(rename = "k'", skip_serializing_if = "Option::is_none", default)]
    pub kp: Option<MultiIndex>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub l: Option<MultiIndex>,
    #[serde(rename = "l'", skip_serializing_if = "Option::is_none", default)]
    pub lp: Option<MultiIndex>,
    pub re: f64,
    pub im: f64,
}
