//! Newton-type normal-form iteration with frequency freezing.
//!
//! Each step splits the remainder `R_s` into classes, moves the averages
//! into the frequencies (and a constant ledger), solves the homological
//! equation and composes with the time-1 map of the generator:
//!
//! `R_{s+1} = R2 + deferred + Σ_{p≥1} [ad_F^p R / p! + ad_F^p G / (p+1)!]`,
//! with `G = {N, F}` replaced by minus the killed part.
//!
//! The frequencies after `s` steps depend on the potential `V`; the
//! potential is re-solved after every step so that they equal the target
//! `n + ω_n`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hampoly::{Basis, ClassNorms, HamiltonianPoly, Truncation};
use crate::homological::{averages, solve, SolveStats};
use crate::nlw::{flow, CompiledField, Midpoint};
use crate::poisson::{ad_series, inv_factorial, LieOrder};
use crate::resonance::FrequencyModel;

/// A perturbation depending on the potential.
pub trait HamiltonianFamily: Sync {
    fn truncation(&self) -> Truncation;
    /// Numeric torus actions `I_n(0)` used for frequency shifts.
    fn torus(&self) -> &[f64];
    /// Plain-basis perturbation (no quadratic part) at the frequencies `fm`.
    fn perturbation(&self, fm: &FrequencyModel) -> Result<HamiltonianPoly>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KamParams {
    pub theta: f64,
    pub rho: f64,
    pub r: f64,
    pub epsilon: f64,
    /// Constant in `λ_s = e^{−C (ln 1/ε_{s+1})^{4/(θ+4)}}`.
    pub lambda_constant: f64,
    pub newton_tol: f64,
    pub fd_step: f64,
    pub newton_max_iter: usize,
    pub lie_min_order: usize,
    pub lie_max_order: usize,
    pub displacement_samples: usize,
    pub seed: u64,
}

impl KamParams {
    pub fn new(theta: f64, rho: f64, r: f64, epsilon: f64) -> Self {
        KamParams {
            theta,
            rho,
            r,
            epsilon,
            lambda_constant: 1.0,
            newton_tol: 1e-12,
            fd_step: 1e-7,
            newton_max_iter: 20,
            lie_min_order: 6,
            lie_max_order: 24,
            displacement_samples: 100,
            seed: 0,
        }
    }
}

/// Per-step parameters; step `s` maps `R_s` to `R_{s+1}`.
#[derive(Clone, Debug)]
pub struct Schedule {
    theta: f64,
    rho: f64,
    eps: f64,
    c: f64,
    eta0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScheduleRow {
    pub step: usize,
    pub rho: f64,
    pub delta: f64,
    pub eps: f64,
    pub b: f64,
    pub lambda: f64,
    pub eta: f64,
    pub d: f64,
}

impl Schedule {
    pub fn new(theta: f64, rho: f64, epsilon: f64, lambda_constant: f64, sup_omega: f64) -> Result<Self> {
        crate::multiindex::check_theta(theta)?;
        if !(rho > 0.0) {
            return Err(Error::invalid("rho", "must be positive"));
        }
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::invalid("epsilon", "must lie in [0, 1)"));
        }
        Ok(Schedule {
            theta,
            rho,
            eps: epsilon,
            c: lambda_constant,
            eta0: 1.1 - sup_omega,
        })
    }

    pub fn delta(&self, s: usize) -> f64 {
        self.rho / ((s + 1) * (s + 1)) as f64
    }

    /// `ρ_0 = ρ`, `ρ_{s+1} = ρ_s + 3δ_s`.
    pub fn rho(&self, s: usize) -> f64 {
        self.rho + (0..s).map(|i| 3.0 * self.delta(i)).sum::<f64>()
    }

    /// `ε_s = ε^{(3/2)^s}`.
    pub fn eps(&self, s: usize) -> f64 {
        self.eps.powf(1.5f64.powi(s as i32))
    }

    fn log_inv_eps(&self, s: usize) -> f64 {
        -self.eps.ln() * 1.5f64.powi(s as i32)
    }

    /// Truncation bound used by the solver at step `s`.
    pub fn b(&self, s: usize) -> f64 {
        let k = (s + 1) as f64;
        k * k * self.log_inv_eps(s + 1) / ((2.0 - 2f64.powf(self.theta)) * self.rho)
    }

    pub fn lambda(&self, s: usize) -> f64 {
        (-self.c * self.log_inv_eps(s + 1).powf(4.0 / (self.theta + 4.0))).exp()
    }

    pub fn eta(&self, s: usize) -> f64 {
        (0..s).fold(self.eta0, |eta, i| self.lambda(i) * eta / 20.0)
    }

    pub fn d(&self, s: usize) -> f64 {
        (1..=s)
            .map(|i| 1.0 / (std::f64::consts::PI.powi(2) * (i * i) as f64))
            .sum()
    }

    pub fn row(&self, s: usize) -> ScheduleRow {
        ScheduleRow {
            step: s,
            rho: self.rho(s),
            delta: self.delta(s),
            eps: self.eps(s),
            b: self.b(s),
            lambda: self.lambda(s),
            eta: self.eta(s),
            d: self.d(s),
        }
    }

    /// Class-norm targets for `R_s`: `(ε_s, ε_s^{0.6}, (1 + d_s)ε_0)`.
    pub fn targets(&self, s: usize) -> (f64, f64, f64) {
        (self.eps(s), self.eps(s).powf(0.6), (1.0 + self.d(s)) * self.eps)
    }
}

#[derive(Clone, Debug)]
pub struct KamState {
    pub step: usize,
    pub freqs: FrequencyModel,
    /// Adapted-basis remainder.
    pub remainder: HamiltonianPoly,
    /// Accumulated constant (averages of class 0 and the `−shift·I(0)` parts).
    pub constant: Complex64,
    pub potential: Vec<f64>,
    pub i0: Vec<f64>,
}

impl KamState {
    pub fn initial(family: &dyn HamiltonianFamily, potential: &[f64]) -> Result<Self> {
        let freqs = FrequencyModel::from_potential(potential)?;
        let remainder = family.perturbation(&freqs)?.to_adapted()?;
        Ok(KamState {
            step: 0,
            freqs,
            remainder,
            constant: Complex64::new(0.0, 0.0),
            potential: potential.to_vec(),
            i0: family.torus().to_vec(),
        })
    }

    pub fn norms(&self, rho: f64, theta: f64) -> Result<ClassNorms> {
        self.remainder.norm_plus(rho, theta)
    }

    /// `N + R` in the adapted basis, with `N = Σ λ_n (I_n(0) + J_n)` plus the
    /// constant ledger. `I_n(0)` factors of `N` are carried symbolically.
    pub fn hamiltonian(&self) -> Result<HamiltonianPoly> {
        let trunc = self.remainder.truncation();
        let n = crate::homological::quadratic_part(&self.freqs, trunc)?.to_adapted()?;
        let mut h = n.plus(&self.remainder)?;
        h.add_term(crate::hampoly::Monomial::one(), self.constant)?;
        Ok(h)
    }
}

/// `shift_n = Σ_a B^{(n)}_{a} ∏ I_m(0)^{a_m}` for an averaged class-1
/// polynomial; one entry per mode up to the truncation.
pub fn frequency_shift(avg1: &HamiltonianPoly, i0: &[f64]) -> Result<Vec<f64>> {
    avg1.expect_basis(Basis::Adapted)?;
    let n = avg1.truncation().max_mode as usize;
    if i0.len() < n {
        return Err(Error::MissingMode {
            mode: i0.len() as u32 + 1,
            available: i0.len(),
        });
    }
    let mut shift = vec![0.0; n];
    for (m, c) in avg1.iter() {
        if m.class() != 1 || !m.k.is_empty() || !m.kp.is_empty() {
            return Err(Error::NotAveraged(m.to_string()));
        }
        let mode = m.b.max_mode().expect("class 1") as usize;
        let mut v = c.re;
        for (a, e) in m.a.iter() {
            v *= i0[a as usize - 1].powi(e as i32);
        }
        shift[mode - 1] += v;
    }
    Ok(shift)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepDiagnostics {
    pub step: usize,
    pub solve: SolveStats,
    pub shifts: Vec<f64>,
    pub max_shift: f64,
    pub dropped_mass: f64,
    pub lie_orders: usize,
    pub last_term_norm: f64,
    pub generator_max_coeff: f64,
    pub generator_terms: usize,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub next: KamState,
    /// Generator `F` in the plain basis.
    pub generator: HamiltonianPoly,
    pub diag: StepDiagnostics,
}

/// One step `R_s → R_{s+1}`.
pub fn kam_step(state: &KamState, sched: &Schedule, params: &KamParams) -> Result<StepResult> {
    let s = state.step;
    let [r0, r1, r2] = state.remainder.split_classes()?;
    let av = averages(&r0, &r1)?;
    let sol = solve(&state.freqs, &av.rest0, &av.rest1, sched.b(s), params.theta)?;

    let shifts = frequency_shift(&av.avg1, &state.i0)?;
    let offsets: Vec<f64> = state
        .freqs
        .omega()
        .iter()
        .zip(&shifts)
        .map(|(w, d)| w + d)
        .collect();
    let mut constant = state.constant;
    for (m, c) in av.avg0.iter() {
        let mut v = *c;
        for (a, e) in m.a.iter() {
            v *= state.i0[a as usize - 1].powi(e as i32);
        }
        constant += v;
    }
    for (n, d) in shifts.iter().enumerate() {
        constant -= d * state.i0[n];
    }

    let f = sol.f0.plus(&sol.f1)?.to_plain()?;
    let mut next_r = r2.plus(&sol.deferred)?;
    let mut diag = StepDiagnostics {
        step: s,
        max_shift: shifts.iter().fold(0.0f64, |m, d| m.max(d.abs())),
        shifts,
        solve: sol.stats,
        dropped_mass: 0.0,
        lie_orders: 0,
        last_term_norm: 0.0,
        generator_max_coeff: f.max_abs_coeff(),
        generator_terms: f.len(),
    };
    if !f.is_empty() {
        let order = LieOrder {
            min: params.lie_min_order,
            max: params.lie_max_order,
            tol: 1e-2 * sched.eps(s + 1),
        };
        let r_plain = state.remainder.to_plain()?;
        let g_plain = sol.killed.to_plain()?.scaled(Complex64::new(-1.0, 0.0));
        let from_r = ad_series(&r_plain, &f, inv_factorial, order)?;
        let from_g = ad_series(&g_plain, &f, |p| inv_factorial(p + 1), order)?;
        let tail = from_r.poly.plus(&from_g.poly)?;
        diag.dropped_mass = tail.dropped_mass();
        diag.lie_orders = from_r.orders.max(from_g.orders);
        diag.last_term_norm = from_r.last_term_norm.max(from_g.last_term_norm);
        next_r = next_r.plus(&tail.to_adapted()?)?;
    }

    Ok(StepResult {
        next: KamState {
            step: s + 1,
            freqs: FrequencyModel::from_offsets(&offsets)?,
            remainder: next_r,
            constant,
            potential: state.potential.clone(),
            i0: state.i0.clone(),
        },
        generator: f,
        diag,
    })
}

/// States `0..=steps` and step results computed from the potential `v`.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub states: Vec<KamState>,
    pub steps: Vec<StepResult>,
}

impl Evolution {
    pub fn last(&self) -> &KamState {
        self.states.last().expect("at least the initial state")
    }
}

pub fn evolve(
    family: &dyn HamiltonianFamily,
    sched: &Schedule,
    params: &KamParams,
    potential: &[f64],
    steps: usize,
) -> Result<Evolution> {
    let mut states = vec![KamState::initial(family, potential)?];
    let mut results = Vec::with_capacity(steps);
    for _ in 0..steps {
        let r = kam_step(states.last().expect("nonempty"), sched, params)?;
        states.push(r.next.clone());
        results.push(r);
    }
    Ok(Evolution {
        states,
        steps: results,
    })
}

/// `Ṽ_n = λ_n² − n² = 2nω_n + ω_n²` for offsets `ω`.
pub fn vtilde(offsets: &[f64]) -> Vec<f64> {
    offsets
        .iter()
        .enumerate()
        .map(|(i, w)| 2.0 * (i + 1) as f64 * w + w * w)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FreezeReport {
    pub step: usize,
    pub iterations: usize,
    /// `max_n |λ_{n,s}(V*) − n − ω_n|`.
    pub residual: f64,
    /// `‖∂Ṽ/∂V − I‖_∞`.
    pub jacobian_deviation: f64,
    pub v_change: f64,
}

/// Chord-Newton solve of `Ṽ(V) = Ṽ*` given a map `V ↦ offsets(V)`.
///
/// The Jacobian of `Ṽ` is taken once by forward differences with step
/// `fd_step` and must satisfy `‖J − I‖_∞ < 1/2`.
pub fn freeze_parameters<F>(
    mut offsets_at: F,
    omega: &[f64],
    v_start: &[f64],
    tol: f64,
    fd_step: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, FreezeReport)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = omega.len();
    let target = DVector::from_vec(vtilde(omega));
    let residual_of = |off: &[f64]| {
        off.iter()
            .zip(omega)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };
    let mut v = v_start.to_vec();
    let mut off = offsets_at(&v)?;
    let base = DVector::from_vec(vtilde(&off));
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut vp = v.clone();
        vp[j] += fd_step;
        let col = DVector::from_vec(vtilde(&offsets_at(&vp)?));
        jac.set_column(j, &((col - &base) / fd_step));
    }
    let dev = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (jac[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
                .sum::<f64>()
        })
        .fold(0.0f64, f64::max);
    if !(dev < 0.5) {
        return Err(Error::JacobianDominance { norm: dev });
    }
    let lu = jac.lu();
    let mut current = base;
    let mut iterations = 0;
    loop {
        let res = residual_of(&off);
        if res <= tol {
            let change = v
                .iter()
                .zip(v_start)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            return Ok((
                v,
                FreezeReport {
                    step: 0,
                    iterations,
                    residual: res,
                    jacobian_deviation: dev,
                    v_change: change,
                },
            ));
        }
        if iterations >= max_iter {
            return Err(Error::NewtonDiverged {
                residual: res,
                iterations,
            });
        }
        let rhs = &target - &current;
        let dv = lu.solve(&rhs).ok_or(Error::JacobianDominance { norm: dev })?;
        for (vi, d) in v.iter_mut().zip(dv.iter()) {
            *vi += d;
        }
        off = offsets_at(&v)?;
        current = DVector::from_vec(vtilde(&off));
        iterations += 1;
    }
}

/// Sup-norm displacement `sup_n |Φ(z)_n − z_n| e^{r n^θ}` of the time-1 map
/// of `f`, maximized over random states with `|z_n| e^{r n^θ} < 1`.
pub fn displacement(
    f: &HamiltonianPoly,
    i0: &[f64],
    r: f64,
    theta: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if f.is_empty() || samples == 0 {
        return Ok(0.0);
    }
    let field = CompiledField::new(f, i0)?;
    let n = field.modes();
    let integ = Midpoint::new(field, 0.01)?;
    let weights: Vec<f64> = (1..=n).map(|k| (r * (k as f64).powf(theta)).exp()).collect();
    let mut worst = 0.0f64;
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let z0: Vec<Complex64> = weights
            .iter()
            .map(|w| {
                let amp = rng.random::<f64>() / w;
                Complex64::from_polar(amp, 2.0 * std::f64::consts::PI * rng.random::<f64>())
            })
            .collect();
        let traj = flow(&integ, &z0, 100, 100)?;
        let z1 = traj.states.last().expect("nonempty");
        for k in 0..n {
            worst = worst.max((z1[k] - z0[k]).norm() * weights[k]);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRow {
    pub step: usize,
    pub rho_s: f64,
    pub b_s: f64,
    pub norm_r0: f64,
    pub norm_r1: f64,
    pub norm_r2: f64,
    pub max_shift: f64,
    pub v_drift: f64,
    pub dropped_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepCheck {
    pub step: usize,
    pub norms: ClassNorms,
    pub targets: [f64; 3],
    pub accepted: bool,
    pub displacement: f64,
    pub displacement_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KamReport {
    pub steps: usize,
    pub schedule: Vec<ScheduleRow>,
    pub checks: Vec<StepCheck>,
    pub freezes: Vec<FreezeReport>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub final_frequencies: Vec<f64>,
    pub target_frequencies: Vec<f64>,
    pub potential_initial: Vec<f64>,
    pub potential_final: Vec<f64>,
    pub potential_drift: f64,
    pub potential_drift_bound: f64,
    pub final_norms_10rho: ClassNorms,
    pub final_r2_bound: f64,
    pub rejected_steps: usize,
    pub constant: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct KamRun {
    pub evolution: Evolution,
    pub rows: Vec<StepRow>,
    pub report: KamReport,
}

impl KamRun {
    pub fn final_state(&self) -> &KamState {
        self.evolution.last()
    }

    pub fn all_accepted(&self) -> bool {
        self.report.rejected_steps == 0
    }
}

/// Full iteration for target offsets `omega` (`λ_n = n + ω_n`).
pub fn run(
    family: &dyn HamiltonianFamily,
    omega: &[f64],
    params: &KamParams,
    max_steps: usize,
) -> Result<KamRun> {
    let n = family.truncation().max_mode as usize;
    if omega.len() != n {
        return Err(Error::invalid("omega", format!("expected {n} offsets, got {}", omega.len())));
    }
    let sup = omega.iter().fold(0.0f64, |m, w| m.max(*w));
    let sched = Schedule::new(params.theta, params.rho, params.epsilon, params.lambda_constant, sup)?;
    let v0 = vtilde(omega);
    let mut evo = evolve(family, &sched, params, &v0, 0)?;
    let steps = if evo.states[0].remainder.is_empty() { 0 } else { max_steps };

    let mut v = v0.clone();
    let mut freezes = Vec::with_capacity(steps);
    let mut drifts = vec![0.0; steps + 1];
    let mut misses = 0usize;
    let mut rejected = 0usize;
    let mut checks = Vec::with_capacity(steps);
    for s in 0..steps {
        let mut last_evo: Option<Evolution> = None;
        let (v_new, mut rep) = freeze_parameters(
            |vv| {
                let e = evolve(family, &sched, params, vv, s + 1)?;
                let off = e.last().freqs.omega().to_vec();
                last_evo = Some(e);
                Ok(off)
            },
            omega,
            &v,
            params.newton_tol,
            params.fd_step,
            params.newton_max_iter,
        )?;
        rep.step = s + 1;
        drifts[s + 1] = rep.v_change;
        freezes.push(rep);
        v = v_new;
        evo = match last_evo {
            Some(e) if e.states[0].potential == v => e,
            _ => evolve(family, &sched, params, &v, s + 1)?,
        };

        let state = evo.last();
        let norms = state.norms(sched.rho(s + 1), params.theta)?;
        let (t0, t1, t2) = sched.targets(s + 1);
        let accepted = norms.r0 <= t0 && norms.r1 <= t1 && norms.r2 <= t2;
        let gen = &evo.steps[s].generator;
        let disp = displacement(gen, &state.i0, params.r, params.theta, params.displacement_samples, params.seed)?;
        checks.push(StepCheck {
            step: s + 1,
            norms,
            targets: [t0, t1, t2],
            accepted,
            displacement: disp,
            displacement_bound: sched.eps(s).sqrt(),
        });
        if accepted {
            misses = 0;
        } else {
            misses += 1;
            rejected += 1;
            if misses >= 2 {
                return Err(Error::Contraction {
                    step: s + 1,
                    reason: format!(
                        "class norms ({:.3e}, {:.3e}, {:.3e}) exceed targets ({t0:.3e}, {t1:.3e}, {t2:.3e}) twice in a row",
                        norms.r0, norms.r1, norms.r2
                    ),
                });
            }
        }
    }

    let mut rows = Vec::with_capacity(evo.states.len());
    for (s, state) in evo.states.iter().enumerate() {
        let norms = state.norms(sched.rho(s), params.theta)?;
        let (max_shift, dropped) = if s == 0 {
            (0.0, state.remainder.dropped_mass())
        } else {
            let d = &evo.steps[s - 1].diag;
            (d.max_shift, d.dropped_mass)
        };
        rows.push(StepRow {
            step: s,
            rho_s: sched.rho(s),
            b_s: sched.b(s),
            norm_r0: norms.r0,
            norm_r1: norms.r1,
            norm_r2: norms.r2,
            max_shift,
            v_drift: drifts[s],
            dropped_mass: dropped,
        });
    }

    let last = evo.last();
    let final_norms = last.norms(10.0 * params.rho, params.theta)?;
    let drift = v.iter().zip(&v0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let report = KamReport {
        steps,
        schedule: (0..=steps).map(|s| sched.row(s)).collect(),
        checks,
        freezes,
        diagnostics: evo.steps.iter().map(|r| r.diag.clone()).collect(),
        final_frequencies: last.freqs.lambdas(),
        target_frequencies: omega.iter().enumerate().map(|(i, w)| (i + 1) as f64 + w).collect(),
        potential_initial: v0,
        potential_final: v.clone(),
        potential_drift: drift,
        potential_drift_bound: params.epsilon.powf(0.4),
        final_norms_10rho: final_norms,
        final_r2_bound: params.epsilon.powf(0.4),
        rejected_steps: rejected,
        constant: [last.constant.re, last.constant.im],
    };
    Ok(KamRun {
        evolution: evo,
        rows,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hampoly::Monomial;
    use crate::multiindex::MultiIndex;

    fn mi(p: &[(u32, u32)]) -> MultiIndex {
        MultiIndex::from_pairs(p.iter().copied())
    }

    #[test]
    fn schedule_shape() {
        let s = Schedule::new(0.5, 0.005, 1e-6, 1.0, 0.3).unwrap();
        assert_eq!(s.rho(0), 0.005);
        assert!((s.rho(1) - 0.02).abs() < 1e-15);
        assert!((s.eps(2) - 1e-6f64.powf(2.25)).abs() < 1e-25);
        for k in 0..6 {
            assert!(s.eps(k + 1) < s.eps(k));
            assert!(s.b(k + 1) > s.b(k));
            assert!(s.d(k) < 1.0 / 6.0);
            assert!(s.rho(k) < 10.0 * 0.005);
        }
        assert!((s.eta(0) - 0.8).abs() < 1e-15);
        assert!(s.eta(1) < s.eta(0));
    }

    #[test]
    fn frequency_shift_examples() {
        let t = Truncation::new(2, 6);
        let j = |n: u32, a: &[(u32, u32)]| Monomial::adapted(mi(a), MultiIndex::unit(n), mi(&[]), mi(&[]));
        let one = Complex64::new(1.0, 0.0);
        let h = HamiltonianPoly::from_terms(Basis::Adapted, t, [(j(1, &[(2, 1)]), one)]).unwrap();
        assert_eq!(frequency_shift(&h, &[0.0, 0.1]).unwrap(), vec![0.1, 0.0]);

        let z = HamiltonianPoly::new(Basis::Adapted, t);
        assert_eq!(frequency_shift(&z, &[0.3, 0.1]).unwrap(), vec![0.0, 0.0]);

        let h = HamiltonianPoly::from_terms(
            Basis::Adapted,
            t,
            [(j(2, &[(1, 1)]), one), (j(2, &[(1, 2)]), one)],
        )
        .unwrap();
        let s = frequency_shift(&h, &[0.05, 0.0]).unwrap();
        assert!((s[1] - 0.0525).abs() < 1e-16);

        let bad = HamiltonianPoly::from_terms(
            Basis::Adapted,
            t,
            [(Monomial::adapted(mi(&[]), MultiIndex::unit(1), MultiIndex::unit(2), mi(&[])), one)],
        )
        .unwrap();
        assert!(matches!(frequency_shift(&bad, &[0.1, 0.1]), Err(Error::NotAveraged(_))));
    }

    #[test]
    fn freeze_identity_map() {
        let omega = [0.3, 0.1, 0.05];
        let (v, rep) = freeze_parameters(
            |v| Ok(FrequencyModel::from_potential(v)?.omega().to_vec()),
            &omega,
            &[0.0; 3],
            1e-12,
            1e-7,
            20,
        )
        .unwrap();
        for (n, (vi, w)) in v.iter().zip(&omega).enumerate() {
            let nf = (n + 1) as f64;
            assert!((vi - (2.0 * nf * w + w * w)).abs() < 1e-10);
        }
        assert!(rep.residual <= 1e-12);

        let (v, _) = freeze_parameters(
            |v| Ok(FrequencyModel::from_potential(v)?.omega().to_vec()),
            &[0.0; 3],
            &[0.0; 3],
            1e-12,
            1e-7,
            20,
        )
        .unwrap();
        assert_eq!(v, vec![0.0; 3]);
    }

    #[test]
    fn freeze_perturbed_map_converges_fast() {
        let omega = [0.3, 0.1, 0.05];
        let map = |v: &[f64]| -> Result<Vec<f64>> {
            let bent: Vec<f64> = v
                .iter()
                .enumerate()
                .map(|(i, x)| x + 1e-3 * (x * (i + 1) as f64).sin() + 1e-3 * v[0] * v[0])
                .collect();
            Ok(FrequencyModel::from_potential(&bent)?.omega().to_vec())
        };
        let (_, rep) = freeze_parameters(map, &omega, &vtilde(&omega), 1e-12, 1e-7, 20).unwrap();
        assert!(rep.iterations <= 5);
        assert!(rep.residual <= 1e-12);
    }

    #[test]
    fn freeze_rejects_non_dominant_jacobian() {
        let r = freeze_parameters(
            |v| Ok(FrequencyModel::from_potential(&v.iter().map(|x| 3.0 * x).collect::<Vec<_>>())?.omega().to_vec()),
            &[0.1],
            &[0.2],
            1e-12,
            1e-7,
            20,
        );
        assert!(matches!(r, Err(Error::JacobianDominance { .. })));
    }

    struct Empty(Truncation, Vec<f64>);
    impl HamiltonianFamily for Empty {
        fn truncation(&self) -> Truncation {
            self.0
        }
        fn torus(&self) -> &[f64] {
            &self.1
        }
        fn perturbation(&self, _: &FrequencyModel) -> Result<HamiltonianPoly> {
            Ok(HamiltonianPoly::new(Basis::Plain, self.0))
        }
    }

    #[test]
    fn zero_perturbation_runs_zero_steps() {
        let fam = Empty(Truncation::new(3, 4), vec![0.1, 0.05, 0.01]);
        let params = KamParams::new(0.5, 0.005, 1.0, 0.0);
        let out = run(&fam, &[0.2, 0.1, 0.05], &params, 3).unwrap();
        assert_eq!(out.report.steps, 0);
        assert!(out.final_state().remainder.is_empty());
        assert_eq!(out.rows.len(), 1);
    }

    #[test]
    fn empty_remainder_step_is_identity() {
        let fam = Empty(Truncation::new(3, 4), vec![0.1, 0.05, 0.01]);
        let params = KamParams::new(0.5, 0.005, 1.0, 1e-6);
        let sched = Schedule::new(0.5, 0.005, 1e-6, 1.0, 0.2).unwrap();
        let st = KamState::initial(&fam, &vtilde(&[0.2, 0.1, 0.05])).unwrap();
        let r = kam_step(&st, &sched, &params).unwrap();
        assert!(r.generator.is_empty());
        assert_eq!(r.next.freqs, st.freqs);
        assert!(r.next.remainder.is_empty());
    }
}
