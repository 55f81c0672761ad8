//! Frequencies `λ_n = √(n² + V_n) = n + ω_n`, small divisors, the two
//! nonresonance conditions and Monte Carlo estimates of the resonant set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hampoly::weight_and_exponent;
use crate::multiindex::{check_theta, starred_of, MultiIndex, SignedIndex};
use crate::par;

/// Upper end of the potential range implied by `ω_n ∈ [0, 1/n]`.
pub const V_MAX: f64 = 3.0;

/// Frequencies of modes `1..=N`, stored as offsets `ω_n = λ_n − n` so that
/// divisors split into an exact integer part and a small real part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyModel {
    omega: Vec<f64>,
}

impl FrequencyModel {
    /// From potentials `V_n > −n²`, `ω_n = V_n / (√(n²+V_n) + n)`.
    pub fn from_potential(v: &[f64]) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::invalid("V", "at least one mode required"));
        }
        let mut omega = Vec::with_capacity(v.len());
        for (i, &vn) in v.iter().enumerate() {
            let n = (i + 1) as f64;
            if !vn.is_finite() || vn <= -n * n {
                return Err(Error::invalid("V", format!("V_{} = {vn} must be finite and > −n²", i + 1)));
            }
            omega.push(vn / ((n * n + vn).sqrt() + n));
        }
        Ok(FrequencyModel { omega })
    }

    /// From offsets `ω_n ≥ 0` (then `V_n = 2nω_n + ω_n²`).
    pub fn from_omega(omega: &[f64]) -> Result<Self> {
        if omega.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("omega", "offsets must be finite and ≥ 0"));
        }
        Self::from_offsets(omega)
    }

    /// From arbitrary finite offsets, e.g. shifted frequencies during the
    /// iteration.
    pub fn from_offsets(omega: &[f64]) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::invalid("omega", "at least one mode required"));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("omega", "offsets must be finite"));
        }
        Ok(FrequencyModel {
            omega: omega.to_vec(),
        })
    }

    pub fn max_mode(&self) -> u32 {
        self.omega.len() as u32
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn lambda(&self, n: u32) -> f64 {
        n as f64 + self.omega[n as usize - 1]
    }

    pub fn lambdas(&self) -> Vec<f64> {
        (1..=self.max_mode()).map(|n| self.lambda(n)).collect()
    }

    /// `V_n = λ_n² − n² = 2nω_n + ω_n²`.
    pub fn potential(&self) -> Vec<f64> {
        self.omega
            .iter()
            .enumerate()
            .map(|(i, w)| 2.0 * (i + 1) as f64 * w + w * w)
            .collect()
    }

    fn check_support(&self, l: &SignedIndex) -> Result<()> {
        match l.max_mode() {
            Some(n) if n > self.max_mode() => Err(Error::MissingMode {
                mode: n,
                available: self.omega.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// `Σ l_n λ_n` split as exact integer `Σ l_n n` plus compensated `Σ l_n ω_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divisor {
    pub integer: i64,
    pub fractional: f64,
}

impl Divisor {
    pub fn value(&self) -> f64 {
        self.integer as f64 + self.fractional
    }

    /// Zero only when the integer part vanishes and the offset part
    /// underflows.
    pub fn is_zero(&self) -> bool {
        self.integer == 0 && self.fractional.abs() < 1e-300
    }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

pub fn divisor(l: &SignedIndex, fm: &FrequencyModel) -> Result<Divisor> {
    fm.check_support(l)?;
    Ok(Divisor {
        integer: l.integer_part(),
        fractional: kahan_sum(l.iter().map(|(n, e)| e as f64 * fm.omega[n as usize - 1])),
    })
}

/// `‖x‖ = dist(x, ℤ)`, rounding half to even.
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round_ties_even()).abs()
}

/// Outcome of one inequality check: `lhs ≥ rhs` passes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub pass: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl ConditionCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        ConditionCheck {
            pass: lhs >= rhs,
            lhs,
            rhs,
            margin: lhs - rhs,
        }
    }
}

/// `log ∏ 1/(1 + l_n² n^p)` over the modes of `l` not in `skip`.
fn log_decay(l: &SignedIndex, p: i32, skip: &[u32]) -> f64 {
    l.iter()
        .filter(|(n, _)| !skip.contains(n))
        .map(|(n, e)| -((e as f64).powi(2) * (n as f64).powi(p)).ln_1p())
        .sum()
}

/// `‖Σ l_n ω_n‖ ≥ γ ∏ 1/(1 + l_n² n⁵)`.
pub fn check_condition_1(fm: &FrequencyModel, l: &SignedIndex, gamma: f64) -> Result<ConditionCheck> {
    if l.is_zero() {
        return Err(Error::invalid("l", "must be nonzero"));
    }
    let d = divisor(l, fm)?;
    let rhs = gamma * log_decay(l, 5, &[]).exp();
    Ok(ConditionCheck::new(dist_to_int(d.fractional), rhs))
}

/// Modes `n_1*`, `n_2*` when the second condition applies
/// (`n_3* < n_2*` and `Σ|l_n| ≥ 3`).
fn condition_2_modes(l: &SignedIndex) -> Option<(u32, u32)> {
    let star = starred_of(l);
    if star.len() < 3 {
        return None;
    }
    let s = star.as_slice();
    (s[2] < s[1]).then_some((s[0], s[1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum Condition2 {
    NotApplicable,
    Checked(ConditionCheck),
}

/// `‖Σ l_n ω_n‖ ≥ (γ³/16) ∏_{n ≠ n_1*, n_2*} (1 + l_n² n⁶)^{−4}`.
pub fn check_condition_2(fm: &FrequencyModel, l: &SignedIndex, gamma: f64) -> Result<Condition2> {
    let Some((n1, n2)) = condition_2_modes(l) else {
        return Ok(Condition2::NotApplicable);
    };
    let d = divisor(l, fm)?;
    let rhs = gamma.powi(3) / 16.0 * (4.0 * log_decay(l, 6, &[n1, n2])).exp();
    Ok(Condition2::Checked(ConditionCheck::new(dist_to_int(d.fractional), rhs)))
}

/// Offsets of draw number `draw`: `ω_n` uniform on `[0, 1/n]`. Each draw has
/// its own ChaCha stream, so draws are independent of evaluation order.
pub fn omega_draw(seed: u64, draw: u64, n_modes: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    (1..=n_modes)
        .map(|n| rng.random::<f64>() / n as f64)
        .collect()
}

pub fn sample_omega(seed: u64, n_modes: u32) -> Result<Vec<f64>> {
    if n_modes == 0 {
        return Err(Error::invalid("N", "at least one mode required"));
    }
    Ok(omega_draw(seed, 0, n_modes))
}

/// Number of nonzero `l` with support ≤ `s` among modes `1..=n` and entries
/// in `[−L, L]`.
pub fn grid_size(n: u32, big_l: u32, s: u32) -> u128 {
    let mut total: u128 = 0;
    let mut choose: u128 = 1;
    for size in 1..=s.min(n) as u128 {
        choose = choose * (n as u128 - size + 1) / size;
        total += choose * (2 * big_l as u128).pow(size as u32);
    }
    total
}

/// Every nonzero `l` with support ≤ `s` over modes `1..=n`, entries in
/// `[−L, L] \ {0}`; errors if the grid exceeds `budget`.
pub fn enumerate_grid(n: u32, big_l: u32, s: u32, budget: u128) -> Result<Vec<SignedIndex>> {
    let count = grid_size(n, big_l, s);
    if count > budget {
        return Err(Error::EnumerationBudget { count, budget });
    }
    let values: Vec<i32> = (-(big_l as i32)..=big_l as i32).filter(|&v| v != 0).collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut modes = Vec::new();
    fn subsets(start: u32, n: u32, left: u32, modes: &mut Vec<u32>, f: &mut dyn FnMut(&[u32])) {
        if !modes.is_empty() {
            f(modes);
        }
        if left == 0 {
            return;
        }
        for m in start..=n {
            modes.push(m);
            subsets(m + 1, n, left - 1, modes, f);
            modes.pop();
        }
    }
    subsets(1, n, s, &mut modes, &mut |support| {
        let mut idx = vec![0usize; support.len()];
        loop {
            out.push(SignedIndex::from_pairs(
                support.iter().zip(&idx).map(|(&m, &i)| (m, values[i])),
            ));
            let mut pos = 0;
            loop {
                if pos == idx.len() {
                    return;
                }
                idx[pos] += 1;
                if idx[pos] < values.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    });
    Ok(out)
}

/// Default cap on the enumerated `l` grid.
pub const DEFAULT_GRID_BUDGET: u128 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MeasureParams {
    pub n: u32,
    pub l: u32,
    pub s: u32,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FailureCounts {
    pub condition1: u64,
    pub condition2: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub gamma: f64,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "L")]
    pub l: u32,
    #[serde(rename = "S")]
    pub s: u32,
    pub samples: u64,
    pub fraction: f64,
    pub ci: f64,
    #[serde(rename = "failuresByCondition")]
    pub failures_by_condition: FailureCounts,
}

/// Per-`l` data for fast sampling: `x = Σ l_n ω_n`, then
/// `‖x‖ · inv1 < γ` fails the first condition and `‖x‖ · inv2 < γ³` the
/// second (`inv2 = 0` when it does not apply).
struct GridEntry {
    terms: Vec<(usize, f64)>,
    inv1: f64,
    inv2: f64,
}

fn prepare_grid(grid: &[SignedIndex]) -> Vec<GridEntry> {
    grid.iter()
        .map(|l| GridEntry {
            terms: l.iter().map(|(n, e)| (n as usize - 1, e as f64)).collect(),
            inv1: (-log_decay(l, 5, &[])).exp(),
            inv2: match condition_2_modes(l) {
                Some((n1, n2)) => 16.0 * (-4.0 * log_decay(l, 6, &[n1, n2])).exp(),
                None => 0.0,
            },
        })
        .collect()
}

/// For one ω: `(min ‖x‖ inv1, min ‖x‖ inv2)` over the grid.
fn sample_margins(grid: &[GridEntry], omega: &[f64]) -> (f64, f64) {
    let (mut m1, mut m2) = (f64::INFINITY, f64::INFINITY);
    for g in grid {
        let x: f64 = g.terms.iter().map(|&(i, e)| e * omega[i]).sum();
        let d = dist_to_int(x);
        m1 = m1.min(d * g.inv1);
        if g.inv2 > 0.0 {
            m2 = m2.min(d * g.inv2);
        }
    }
    (m1, m2)
}

/// Fraction of sampled ω failing either condition for some grid `l`, for
/// each γ in `gammas`. One pass over the samples serves all γ.
pub fn measure_scan(gammas: &[f64], p: MeasureParams, budget: u128) -> Result<Vec<MeasureReport>> {
    if p.n == 0 || p.l == 0 || p.s == 0 {
        return Err(Error::invalid("measure", "N, L and S must be positive"));
    }
    if p.samples == 0 {
        return Err(Error::invalid("samples", "must be positive"));
    }
    for &g in gammas {
        if !(0.0..1.0).contains(&g) {
            return Err(Error::invalid("gamma", format!("{g} not in [0,1)")));
        }
    }
    let grid = prepare_grid(&enumerate_grid(p.n, p.l, p.s, budget)?);
    let margins = par::map_range(p.samples as usize, |i| {
        sample_margins(&grid, &omega_draw(p.seed, i as u64, p.n))
    });
    Ok(gammas
        .iter()
        .map(|&gamma| {
            let g3 = gamma.powi(3);
            let mut counts = FailureCounts {
                condition1: 0,
                condition2: 0,
            };
            let mut failed = 0u64;
            for &(m1, m2) in &margins {
                let f1 = m1 < gamma;
                let f2 = m2 < g3;
                counts.condition1 += f1 as u64;
                counts.condition2 += f2 as u64;
                failed += (f1 || f2) as u64;
            }
            let fraction = failed as f64 / p.samples as f64;
            MeasureReport {
                gamma,
                n: p.n,
                l: p.l,
                s: p.s,
                samples: p.samples,
                fraction,
                ci: 1.96 * (fraction * (1.0 - fraction) / p.samples as f64).sqrt(),
                failures_by_condition: counts,
            }
        })
        .collect())
}

pub fn measure_estimate(gamma: f64, p: MeasureParams) -> Result<MeasureReport> {
    Ok(measure_scan(&[gamma], p, DEFAULT_GRID_BUDGET)?.remove(0))
}

/// Summary of both conditions for one ω over a finite grid of `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReport {
    pub gamma: f64,
    pub checked: u64,
    pub condition1_failures: u64,
    pub condition2_checked: u64,
    pub condition2_failures: u64,
    /// Smallest `‖x‖ / (γ ∏ …)` ratio for the first condition (≥ 1 passes).
    pub worst_ratio1: f64,
    pub worst_l1: String,
    pub worst_ratio2: Option<f64>,
    pub worst_l2: Option<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.condition1_failures == 0 && self.condition2_failures == 0
    }
}

pub fn audit(fm: &FrequencyModel, gamma: f64, big_l: u32, s: u32, budget: u128) -> Result<AuditReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid("gamma", format!("{gamma} not in (0,1)")));
    }
    let grid = enumerate_grid(fm.max_mode(), big_l, s, budget)?;
    audit_indices(fm, gamma, &grid)
}

/// Audit over every nonzero `l` with `Σ|l_n| ≤ radius` on modes `1..=N`,
/// which covers all divisors met by keys of degree ≤ `radius`.
pub fn audit_ball(fm: &FrequencyModel, gamma: f64, radius: u32, budget: u128) -> Result<AuditReport> {
    let ball = enumerate_l1_ball(fm.max_mode(), radius, budget)?;
    audit_indices(fm, gamma, &ball)
}

/// Nonzero `l` over modes `1..=n` with `Σ|l_n| ≤ radius`.
pub fn enumerate_l1_ball(n: u32, radius: u32, budget: u128) -> Result<Vec<SignedIndex>> {
    // points with support exactly k: C(n,k) 2^k C(radius,k)
    let mut count: u128 = 0;
    let binom = |a: u128, b: u128| -> u128 {
        if b > a {
            return 0;
        }
        (0..b).fold(1u128, |acc, i| acc * (a - i) / (i + 1))
    };
    for k in 1..=n.min(radius) as u128 {
        count += binom(n as u128, k) * (1u128 << k) * binom(radius as u128, k);
    }
    if count > budget {
        return Err(Error::EnumerationBudget { count, budget });
    }
    let mut out = Vec::with_capacity(count as usize);
    fn rec(mode: u32, n: u32, left: u32, cur: &mut Vec<(u32, i32)>, out: &mut Vec<SignedIndex>) {
        if mode > n {
            if !cur.is_empty() {
                out.push(SignedIndex::from_pairs(cur.iter().copied()));
            }
            return;
        }
        rec(mode + 1, n, left, cur, out);
        for mag in 1..=left as i32 {
            for v in [mag, -mag] {
                cur.push((mode, v));
                rec(mode + 1, n, left - mag as u32, cur, out);
                cur.pop();
            }
        }
    }
    rec(1, n, radius, &mut Vec::new(), &mut out);
    Ok(out)
}

fn audit_indices(fm: &FrequencyModel, gamma: f64, grid: &[SignedIndex]) -> Result<AuditReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid("gamma", format!("{gamma} not in (0,1)")));
    }
    let mut rep = AuditReport {
        gamma,
        checked: 0,
        condition1_failures: 0,
        condition2_checked: 0,
        condition2_failures: 0,
        worst_ratio1: f64::INFINITY,
        worst_l1: String::new(),
        worst_ratio2: None,
        worst_l2: None,
    };
    for l in grid {
        let c1 = check_condition_1(fm, l, gamma)?;
        rep.checked += 1;
        rep.condition1_failures += (!c1.pass) as u64;
        let r = c1.lhs / c1.rhs;
        if r < rep.worst_ratio1 {
            rep.worst_ratio1 = r;
            rep.worst_l1 = l.to_string();
        }
        if let Condition2::Checked(c2) = check_condition_2(fm, l, gamma)? {
            rep.condition2_checked += 1;
            rep.condition2_failures += (!c2.pass) as u64;
            let r = c2.lhs / c2.rhs;
            if rep.worst_ratio2.is_none_or(|w| r < w) {
                rep.worst_ratio2 = Some(r);
                rep.worst_l2 = Some(l.to_string());
            }
        }
    }
    Ok(rep)
}

/// Both sides of the compensation estimate:
/// `log[∏_{n ≠ n_1*, n_2*}(1 + l_n² n⁶)⁴ e^{−δ(Σ(2a+k+k')n^θ − 2n_1^θ)}]`
/// and `δ^{−5/θ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Compensation {
    pub log_lhs: f64,
    pub delta_power: f64,
}

impl Compensation {
    pub fn lhs(&self) -> f64 {
        self.log_lhs.exp()
    }

    /// Smallest `C` with `lhs ≤ e^{C δ^{−5/θ}}`.
    pub fn implied_constant(&self) -> f64 {
        self.log_lhs / self.delta_power
    }
}

pub fn compensation_terms(
    a: &MultiIndex,
    k: &MultiIndex,
    kp: &MultiIndex,
    delta: f64,
    theta: f64,
) -> Result<Compensation> {
    check_theta(theta)?;
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", format!("{delta} must be positive")));
    }
    let l = SignedIndex::difference(k, kp);
    let star = starred_of(&l);
    let skip: Vec<u32> = star.as_slice().iter().take(2).copied().collect();
    let (_, expo) = weight_and_exponent(a, k, kp, theta);
    Ok(Compensation {
        log_lhs: -4.0 * log_decay(&l, 6, &skip) - delta * expo,
        delta_power: delta.powf(-5.0 / theta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn si(p: &[(u32, i32)]) -> SignedIndex {
        SignedIndex::from_pairs(p.iter().copied())
    }

    #[test]
    fn divisor_examples() {
        let fm = FrequencyModel::from_potential(&[1.0, 0.0, 0.0]).unwrap();
        let d = divisor(&si(&[(1, 1), (2, 1), (3, -1)]), &fm).unwrap();
        assert!((d.value() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((d.value() - 0.41421).abs() < 1e-5);
        assert!(divisor(&SignedIndex::default(), &fm).unwrap().is_zero());
        let fm = FrequencyModel::from_potential(&[0.0]).unwrap();
        assert_eq!(divisor(&si(&[(1, 2)]), &fm).unwrap().value(), 2.0);
        assert!(divisor(&si(&[(2, 1)]), &fm).is_err());
    }

    #[test]
    fn frequency_model_round_trip() {
        let fm = FrequencyModel::from_potential(&[1.0, 0.5, 3.0]).unwrap();
        for (n, v) in [(1u32, 1.0f64), (2, 0.5), (3, 3.0)] {
            let nf = n as f64;
            assert!((fm.lambda(n) - (nf * nf + v).sqrt()).abs() < 1e-15);
        }
        let back = fm.potential();
        assert!((back[2] - 3.0).abs() < 1e-14);
        assert!(FrequencyModel::from_potential(&[-1.0]).is_err());
    }

    #[test]
    fn condition_1_examples() {
        let fm = FrequencyModel::from_omega(&[0.5]).unwrap();
        let c = check_condition_1(&fm, &si(&[(1, 1)]), 0.5).unwrap();
        assert!(c.pass);
        assert_eq!((c.lhs, c.rhs), (0.5, 0.25));

        let fm = FrequencyModel::from_omega(&[0.0; 4]).unwrap();
        assert!(!check_condition_1(&fm, &si(&[(2, 1), (3, -2)]), 0.1).unwrap().pass);

        let fm = FrequencyModel::from_omega(&[0.123, 0.01]).unwrap();
        assert!(check_condition_1(&fm, &si(&[(1, 3), (2, -1)]), 1e-300).unwrap().pass);
        assert!(check_condition_1(&fm, &SignedIndex::default(), 0.1).is_err());
    }

    #[test]
    fn condition_2_examples() {
        let fm = FrequencyModel::from_omega(&[0.3, 0.2, 0.1, 0.05, 0.01]).unwrap();
        let gamma: f64 = 0.2;
        match check_condition_2(&fm, &si(&[(5, 1), (3, -1), (1, 1)]), gamma).unwrap() {
            Condition2::Checked(c) => assert!((c.rhs - gamma.powi(3) / 256.0).abs() < 1e-18),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            check_condition_2(&fm, &si(&[(5, 1), (3, -1)]), gamma).unwrap(),
            Condition2::NotApplicable
        );
        assert_eq!(
            check_condition_2(&fm, &si(&[(2, 3)]), gamma).unwrap(),
            Condition2::NotApplicable
        );
    }

    #[test]
    fn sampling_is_deterministic_and_in_range() {
        assert_eq!(sample_omega(7, 3).unwrap(), sample_omega(7, 3).unwrap());
        for seed in 0..50 {
            let w = sample_omega(seed, 5).unwrap();
            assert!((0.0..=0.2).contains(&w[4]));
        }
        assert_ne!(omega_draw(7, 0, 3), omega_draw(7, 1, 3));
        assert!(sample_omega(1, 0).is_err());
    }

    #[test]
    fn mean_of_second_offset() {
        let n = 100_000u64;
        let xs: Vec<f64> = (0..n).map(|i| omega_draw(11, i, 2)[1]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sigma = (1.0 / 12.0f64).sqrt() * 0.5 / (n as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * sigma, "{mean}");
    }

    #[test]
    fn grid_enumeration() {
        assert_eq!(grid_size(12, 3, 3), 49_968);
        let g = enumerate_grid(4, 2, 2, 1_000).unwrap();
        assert_eq!(g.len() as u128, grid_size(4, 2, 2));
        let mut sorted = g.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), g.len());
        assert!(matches!(
            enumerate_grid(12, 3, 3, 100),
            Err(Error::EnumerationBudget { count: 49_968, .. })
        ));
    }

    #[test]
    fn measure_trivial_cases() {
        let p = MeasureParams {
            n: 5,
            l: 2,
            s: 2,
            samples: 1_000,
            seed: 3,
        };
        let r = measure_estimate(0.0, p).unwrap();
        assert_eq!(r.fraction, 0.0);
        let a = measure_scan(&[0.01, 0.05, 0.1], p, DEFAULT_GRID_BUDGET).unwrap();
        let b = measure_scan(&[0.01, 0.05, 0.1], p, DEFAULT_GRID_BUDGET).unwrap();
        assert_eq!(a, b);
        assert!(a[0].fraction <= a[1].fraction && a[1].fraction <= a[2].fraction);
    }

    #[test]
    fn compensation_examples() {
        let e = MultiIndex::new();
        let k = MultiIndex::from_pairs([(1, 1), (3, 2)]);
        let c = compensation_terms(&e, &k, &k, 0.1, 0.5).unwrap();
        assert!(c.lhs() <= 1.0);

        let c = compensation_terms(&e, &MultiIndex::from_pairs([(1, 1)]), &e, 0.1, 0.5).unwrap();
        assert!((c.lhs() - 0.1f64.exp()).abs() < 1e-15);
        assert!((c.delta_power - 1e10).abs() < 1e-3);

        let k = MultiIndex::from_pairs([(4, 1), (2, 1), (1, 1)]);
        let c1 = compensation_terms(&e, &k, &e, 0.1, 0.5).unwrap();
        let c2 = compensation_terms(&e, &k, &e, 0.2, 0.5).unwrap();
        assert!(c2.log_lhs < c1.log_lhs);
    }

    #[test]
    fn l1_ball_counts() {
        // 1-D ball of radius 3: ±1, ±2, ±3
        assert_eq!(enumerate_l1_ball(1, 3, 100).unwrap().len(), 6);
        // 2-D ball of radius 2: 2·2·2 (axis) + 4 (diagonal)
        assert_eq!(enumerate_l1_ball(2, 2, 100).unwrap().len(), 12);
        let ball = enumerate_l1_ball(6, 6, 1_000_000).unwrap();
        assert!(ball.iter().all(|l| l.l1() <= 6 && !l.is_zero()));
        let mut keys: Vec<String> = ball.iter().map(|l| l.to_string()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), ball.len());
        assert!(matches!(enumerate_l1_ball(6, 6, 10), Err(Error::EnumerationBudget { .. })));
    }
}
