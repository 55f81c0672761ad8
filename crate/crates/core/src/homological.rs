//! Averaging and small-divisor solution of `{N, F} + R0 + R1 − [R0] − [R1] = 0`.
//!
//! With `N = Σ λ_n z_n z̄_n` one has `{N, M} = i (Σ l_n λ_n) M` for an
//! adapted key with `l − l'` summed against `λ`, so the solution coefficient
//! is `F = i B / Σ(l_n − l'_n)λ_n`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hampoly::{Basis, HamiltonianPoly, Monomial, Truncation};
use crate::multiindex::{rearrangement, starred_of, MultiIndex};
use crate::par;
use crate::poisson::bracket;
use crate::resonance::{divisor, FrequencyModel};

/// `N = Σ_n λ_n z_n z̄_n` in the plain basis.
pub fn quadratic_part(fm: &FrequencyModel, trunc: Truncation) -> Result<HamiltonianPoly> {
    if fm.max_mode() < trunc.max_mode {
        return Err(Error::MissingMode {
            mode: fm.max_mode() + 1,
            available: fm.max_mode() as usize,
        });
    }
    HamiltonianPoly::from_terms(
        Basis::Plain,
        trunc,
        (1..=trunc.max_mode).map(|n| {
            let e = MultiIndex::unit(n);
            (
                Monomial::plain(MultiIndex::new(), e.clone(), e),
                Complex64::new(fm.lambda(n), 0.0),
            )
        }),
    )
}

#[derive(Clone, Debug)]
pub struct Averages {
    /// `[R0]`: class-0 keys with `l = l' = 0`.
    pub avg0: HamiltonianPoly,
    /// `[R1]`: class-1 keys with `l = l' = 0`.
    pub avg1: HamiltonianPoly,
    /// `R0 − [R0]`.
    pub rest0: HamiltonianPoly,
    /// `R1 − [R1]`.
    pub rest1: HamiltonianPoly,
}

fn is_averaged(m: &Monomial) -> bool {
    m.k.is_empty() && m.kp.is_empty()
}

pub fn averages(r0: &HamiltonianPoly, r1: &HamiltonianPoly) -> Result<Averages> {
    r0.expect_basis(Basis::Adapted)?;
    r1.expect_basis(Basis::Adapted)?;
    for (r, class) in [(r0, 0), (r1, 1)] {
        if let Some((m, _)) = r.iter().find(|(m, _)| m.class() != class) {
            return Err(Error::invalid("R", format!("key {m} is not of class {class}")));
        }
    }
    Ok(Averages {
        avg0: r0.filtered(is_averaged),
        avg1: r1.filtered(is_averaged),
        rest0: r0.filtered(|m| !is_averaged(m)),
        rest1: r1.filtered(|m| !is_averaged(m)),
    })
}

/// Counters collected while solving.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveStats {
    pub solved: usize,
    pub deferred: usize,
    /// Keys with `n_3* < n_2*` (or fewer than three starred modes).
    pub case1: usize,
    /// Keys with `n_3* = n_2*`.
    pub case2: usize,
    pub min_abs_divisor: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub f0: HamiltonianPoly,
    pub f1: HamiltonianPoly,
    /// Keys outside the truncation rule, left for the next step.
    pub deferred: HamiltonianPoly,
    /// The retained part of `R0 + R1 − [R0] − [R1]`, i.e. what `{N, F}` cancels.
    pub killed: HamiltonianPoly,
    pub stats: SolveStats,
}

enum Outcome {
    Solved(Monomial, Complex64, Complex64, f64, bool),
    Deferred(Monomial, Complex64),
}

/// Solves for `F` on every non-averaged key of `r0`, `r1` whose inner
/// multiset `(a, l, l')` satisfies `Σ_{i≥3} n_i^θ ≤ bs`; other keys go to
/// the deferred remainder.
pub fn solve(
    fm: &FrequencyModel,
    r0: &HamiltonianPoly,
    r1: &HamiltonianPoly,
    bs: f64,
    theta: f64,
) -> Result<Solution> {
    crate::multiindex::check_theta(theta)?;
    r0.expect_basis(Basis::Adapted)?;
    r1.expect_basis(Basis::Adapted)?;
    let trunc = r0.truncation();
    if trunc != r1.truncation() {
        return Err(Error::TruncationMismatch(trunc, r1.truncation()));
    }
    let mut items: Vec<(Monomial, Complex64, u32)> = Vec::with_capacity(r0.len() + r1.len());
    for (r, class) in [(r0, 0), (r1, 1)] {
        for (m, c) in r.iter() {
            if m.class() != class {
                return Err(Error::invalid("R", format!("key {m} is not of class {class}")));
            }
            if is_averaged(m) {
                return Err(Error::AveragedKey(m.to_string()));
            }
            items.push((m.clone(), *c, class));
        }
    }

    let outcomes = par::map(&items, |(m, c, _)| -> Result<Outcome> {
        let tail = rearrangement(&m.a, &m.k, &m.kp).tail_power_sum(theta);
        if tail > bs {
            return Ok(Outcome::Deferred(m.clone(), *c));
        }
        let l = m.l_index();
        let d = divisor(&l, fm)?;
        if d.is_zero() {
            return Err(Error::Resonance(l));
        }
        let dv = d.value();
        let star = starred_of(&l);
        let s = star.as_slice();
        let case1 = s.len() < 3 || s[2] < s[1];
        Ok(Outcome::Solved(m.clone(), *c, Complex64::new(0.0, 1.0) * c / dv, dv.abs(), case1))
    });

    let mut sol = Solution {
        f0: HamiltonianPoly::new(Basis::Adapted, trunc),
        f1: HamiltonianPoly::new(Basis::Adapted, trunc),
        deferred: HamiltonianPoly::new(Basis::Adapted, trunc),
        killed: HamiltonianPoly::new(Basis::Adapted, trunc),
        stats: SolveStats {
            min_abs_divisor: f64::INFINITY,
            ..SolveStats::default()
        },
    };
    for (outcome, (_, _, class)) in outcomes.into_iter().zip(&items) {
        match outcome? {
            Outcome::Solved(m, b, f, d, case1) => {
                let target = if *class == 0 { &mut sol.f0 } else { &mut sol.f1 };
                target.accumulate(m.clone(), f);
                sol.killed.accumulate(m, b);
                sol.stats.solved += 1;
                sol.stats.min_abs_divisor = sol.stats.min_abs_divisor.min(d);
                if case1 {
                    sol.stats.case1 += 1;
                } else {
                    sol.stats.case2 += 1;
                }
            }
            Outcome::Deferred(m, b) => {
                sol.deferred.accumulate(m, b);
                sol.stats.deferred += 1;
            }
        }
    }
    Ok(sol)
}

/// Largest coefficient of `{N, F0 + F1} + R0 + R1 − [R0] − [R1]`, computed
/// with the real bracket and expressed in the adapted basis. `r0`, `r1`
/// must be the parts handed to the solver (deferred keys excluded).
pub fn residual(
    n: &HamiltonianPoly,
    f0: &HamiltonianPoly,
    f1: &HamiltonianPoly,
    r0: &HamiltonianPoly,
    r1: &HamiltonianPoly,
    avg0: &HamiltonianPoly,
    avg1: &HamiltonianPoly,
) -> Result<f64> {
    let f = f0.plus(f1)?.to_plain()?;
    let mut total = bracket(n, &f)?.to_adapted()?;
    let one = Complex64::new(1.0, 0.0);
    total.add_scaled(r0, one)?;
    total.add_scaled(r1, one)?;
    total.add_scaled(avg0, -one)?;
    total.add_scaled(avg1, -one)?;
    Ok(total.max_abs_coeff())
}
