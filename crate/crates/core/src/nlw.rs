//! The truncated nonlinear wave equation `u_tt − u_xx + V*u + u³ = 0` on
//! `[0, π]` with Dirichlet conditions, in the eigenbasis
//! `φ_n = √(2/π) sin nx`, and tools to verify a normal form by integration.
//!
//! With `u = Σ (z_n + z̄_n) φ_n / √(2λ_n)` the Hamiltonian reads
//! `Σ λ_n |z_n|² + (ε/16) Σ_{ijkl} G_{ijkl} ∏ (z + z̄)` in working
//! coordinates, where `G_{ijkl} = (λ_iλ_jλ_kλ_l)^{−1/2} ∫ φ_iφ_jφ_kφ_l`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hampoly::{Basis, HamiltonianPoly, Monomial, Truncation};
use crate::kamdriver::HamiltonianFamily;
use crate::multiindex::MultiIndex;
use crate::resonance::FrequencyModel;

/// `Σ s_b s_c s_d [i + s_b j + s_c k + s_d l = 0]` over the eight sign
/// patterns; `sin i x sin j x sin k x sin l x` integrates to `π/8` times this.
pub fn sign_pattern_count(i: u32, j: u32, k: u32, l: u32) -> i32 {
    let mut count = 0;
    for sb in [1i64, -1] {
        for sc in [1i64, -1] {
            for sd in [1i64, -1] {
                if i as i64 + sb * j as i64 + sc * k as i64 + sd * l as i64 == 0 {
                    count += (sb * sc * sd) as i32;
                }
            }
        }
    }
    count
}

/// `G_{ijkl}`.
pub fn coupling(i: u32, j: u32, k: u32, l: u32, fm: &FrequencyModel) -> Result<f64> {
    for n in [i, j, k, l] {
        if n == 0 || n > fm.max_mode() {
            return Err(Error::MissingMode {
                mode: n,
                available: fm.max_mode() as usize,
            });
        }
    }
    let count = sign_pattern_count(i, j, k, l);
    if count == 0 {
        return Ok(0.0);
    }
    let integral = PI / 8.0 * (2.0 / PI).powi(2) * count as f64;
    let lam = fm.lambda(i) * fm.lambda(j) * fm.lambda(k) * fm.lambda(l);
    Ok(integral / lam.sqrt())
}

/// Quadratic plus quartic Hamiltonian in the plain basis.
pub fn build_hamiltonian(fm: &FrequencyModel, epsilon: f64, trunc: Truncation) -> Result<HamiltonianPoly> {
    crate::homological::quadratic_part(fm, trunc)?.plus(&quartic_part(fm, epsilon, trunc)?)
}

/// `(ε/16) Σ G_{ijkl} ∏ (z + z̄)` in the plain basis.
pub fn quartic_part(fm: &FrequencyModel, epsilon: f64, trunc: Truncation) -> Result<HamiltonianPoly> {
    if trunc.max_degree < 4 {
        return Err(Error::invalid("maxDegree", "the quartic term needs maxDegree ≥ 4"));
    }
    let n_max = trunc.max_mode;
    let mut h = HamiltonianPoly::new(Basis::Plain, trunc);
    if epsilon == 0.0 {
        return Ok(h);
    }
    let e = MultiIndex::new();
    for i in 1..=n_max {
        for j in 1..=n_max {
            for k in 1..=n_max {
                for l in 1..=n_max {
                    let g = coupling(i, j, k, l, fm)?;
                    if g == 0.0 {
                        continue;
                    }
                    let c = Complex64::new(epsilon / 16.0 * g, 0.0);
                    let modes = [i, j, k, l];
                    // each factor contributes z (bit clear) or z̄ (bit set)
                    for mask in 0u32..16 {
                        let mut zs = Vec::with_capacity(4);
                        let mut zbs = Vec::with_capacity(4);
                        for (bit, &n) in modes.iter().enumerate() {
                            if mask >> bit & 1 == 0 {
                                zs.push((n, 1));
                            } else {
                                zbs.push((n, 1));
                            }
                        }
                        h.accumulate(
                            Monomial::plain(e.clone(), MultiIndex::from_pairs(zs), MultiIndex::from_pairs(zbs)),
                            c,
                        );
                    }
                }
            }
        }
    }
    Ok(h)
}

/// The quartic wave-equation perturbation as a function of the potential.
#[derive(Clone, Debug)]
pub struct NlwFamily {
    truncation: Truncation,
    epsilon: f64,
    torus: Vec<f64>,
}

impl NlwFamily {
    pub fn new(truncation: Truncation, epsilon: f64, torus: Vec<f64>) -> Result<Self> {
        if torus.len() != truncation.max_mode as usize {
            return Err(Error::invalid(
                "torus",
                format!("expected {} actions, got {}", truncation.max_mode, torus.len()),
            ));
        }
        Ok(NlwFamily {
            truncation,
            epsilon,
            torus,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl HamiltonianFamily for NlwFamily {
    fn truncation(&self) -> Truncation {
        self.truncation
    }

    fn torus(&self) -> &[f64] {
        &self.torus
    }

    fn perturbation(&self, fm: &FrequencyModel) -> Result<HamiltonianPoly> {
        quartic_part(fm, self.epsilon, self.truncation)
    }
}

/// Torus actions `(3/4) A² e^{−2rn^θ}` in physical variables for amplitude `A`.
pub fn initial_torus(amplitude: f64, r: f64, theta: f64, n_modes: u32) -> Vec<f64> {
    scaled_torus(r, theta, n_modes)
        .into_iter()
        .map(|x| x * amplitude * amplitude)
        .collect()
}

/// Torus actions `(3/4) e^{−2rn^θ}` in working coordinates.
pub fn scaled_torus(r: f64, theta: f64, n_modes: u32) -> Vec<f64> {
    (1..=n_modes)
        .map(|n| 0.75 * (-2.0 * r * (n as f64).powf(theta)).exp())
        .collect()
}

/// One monomial of a derivative, with `I(0)` folded into the coefficient.
#[derive(Clone, Debug)]
struct Term {
    coef: Complex64,
    z: Vec<(usize, u32)>,
    zb: Vec<(usize, u32)>,
}

impl Term {
    fn eval(&self, pz: &[Vec<Complex64>], pzb: &[Vec<Complex64>]) -> Complex64 {
        let mut v = self.coef;
        for &(i, e) in &self.z {
            v *= pz[i][e as usize];
        }
        for &(i, e) in &self.zb {
            v *= pzb[i][e as usize];
        }
        v
    }
}

fn fold(
    m_a: &MultiIndex,
    k: &MultiIndex,
    kp: &MultiIndex,
    c: Complex64,
    i0: &[f64],
) -> (Complex64, Vec<(usize, u32)>, Vec<(usize, u32)>) {
    let mut coef = c;
    for (n, e) in m_a.iter() {
        coef *= i0[n as usize - 1].powi(e as i32);
    }
    (
        coef,
        k.iter().map(|(n, e)| (n as usize - 1, e)).collect(),
        kp.iter().map(|(n, e)| (n as usize - 1, e)).collect(),
    )
}

/// Vector field `ż = −iΛz + g(z)` compiled from a plain polynomial with
/// numeric torus actions: `Λ` collects every `|z_n|²` coefficient, `g` the
/// rest. Also carries the second derivatives for the variational equation.
#[derive(Clone, Debug)]
pub struct CompiledField {
    n: usize,
    max_exp: usize,
    lambda: Vec<f64>,
    /// `∂H/∂z̄_n` terms excluding the diagonal quadratic part.
    grad: Vec<(usize, Term)>,
    /// `∂²H/∂z̄_n∂z_m`.
    hess_zbz: Vec<(usize, usize, Term)>,
    /// `∂²H/∂z̄_n∂z̄_m`.
    hess_zbzb: Vec<(usize, usize, Term)>,
    energy: Vec<Term>,
}

impl CompiledField {
    pub fn new(h: &HamiltonianPoly, i0: &[f64]) -> Result<Self> {
        let h = match h.basis() {
            Basis::Plain => h.clone(),
            Basis::Adapted => h.to_plain()?,
        };
        let n = h.truncation().max_mode as usize;
        if i0.len() < n {
            return Err(Error::MissingMode {
                mode: i0.len() as u32 + 1,
                available: i0.len(),
            });
        }
        let mut lambda = vec![0.0; n];
        let mut grad = Vec::new();
        let mut hess_zbz = Vec::new();
        let mut hess_zbzb = Vec::new();
        let mut energy = Vec::new();
        for (m, c) in h.iter() {
            let (coef, z, zb) = fold(&m.a, &m.k, &m.kp, *c, i0);
            energy.push(Term {
                coef,
                z: z.clone(),
                zb: zb.clone(),
            });
            let diagonal = m.k.support_len() == 1 && m.k.total() == 1 && m.k == m.kp;
            for (nb, eb) in m.kp.iter() {
                let kp1 = m.kp.shifted(nb, -1).expect("exponent ≥ 1");
                let (c1, z1, zb1) = fold(&m.a, &m.k, &kp1, *c * eb as f64, i0);
                if diagonal {
                    lambda[nb as usize - 1] += c1.re;
                } else {
                    grad.push((
                        nb as usize - 1,
                        Term {
                            coef: c1,
                            z: z1,
                            zb: zb1,
                        },
                    ));
                }
                for (mz, ez) in m.k.iter() {
                    let k2 = m.k.shifted(mz, -1).expect("exponent ≥ 1");
                    let (c2, z2, zb2) = fold(&m.a, &k2, &kp1, *c * (eb * ez) as f64, i0);
                    hess_zbz.push((nb as usize - 1, mz as usize - 1, Term { coef: c2, z: z2, zb: zb2 }));
                }
                for (mb, e2) in kp1.iter() {
                    let kp2 = kp1.shifted(mb, -1).expect("exponent ≥ 1");
                    let (c2, z2, zb2) = fold(&m.a, &m.k, &kp2, *c * (eb * e2) as f64, i0);
                    hess_zbzb.push((nb as usize - 1, mb as usize - 1, Term { coef: c2, z: z2, zb: zb2 }));
                }
            }
        }
        Ok(CompiledField {
            n,
            max_exp: h.truncation().max_degree as usize,
            lambda,
            grad,
            hess_zbz,
            hess_zbzb,
            energy,
        })
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    /// Diagonal quadratic coefficients `Λ_n`.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    fn powers(&self, z: &[Complex64]) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
        let table = |conj: bool| {
            z.iter()
                .map(|&v| {
                    let v = if conj { v.conj() } else { v };
                    let mut row = Vec::with_capacity(self.max_exp + 1);
                    let mut p = Complex64::new(1.0, 0.0);
                    for _ in 0..=self.max_exp {
                        row.push(p);
                        p *= v;
                    }
                    row
                })
                .collect::<Vec<_>>()
        };
        (table(false), table(true))
    }

    /// `g(z)`, the non-diagonal part of `−i ∂H/∂z̄`.
    pub fn rest(&self, z: &[Complex64]) -> Vec<Complex64> {
        let (pz, pzb) = self.powers(z);
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (i, t) in &self.grad {
            out[*i] += t.eval(&pz, &pzb);
        }
        let minus_i = Complex64::new(0.0, -1.0);
        out.iter_mut().for_each(|v| *v *= minus_i);
        out
    }

    pub fn field(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut g = self.rest(z);
        for (i, v) in g.iter_mut().enumerate() {
            *v += Complex64::new(0.0, -self.lambda[i]) * z[i];
        }
        g
    }

    pub fn energy(&self, z: &[Complex64]) -> Complex64 {
        let (pz, pzb) = self.powers(z);
        self.energy.iter().map(|t| t.eval(&pz, &pzb)).sum()
    }

    /// Real `2N × 2N` Jacobian of the field in coordinates `(Re z, Im z)`.
    pub fn jacobian(&self, z: &[Complex64]) -> DMatrix<f64> {
        let n = self.n;
        let (pz, pzb) = self.powers(z);
        let mut a = DMatrix::<Complex64>::zeros(n, n);
        let mut b = DMatrix::<Complex64>::zeros(n, n);
        for (i, j, t) in &self.hess_zbz {
            a[(*i, *j)] += t.eval(&pz, &pzb);
        }
        for (i, j, t) in &self.hess_zbzb {
            b[(*i, *j)] += t.eval(&pz, &pzb);
        }
        let minus_i = Complex64::new(0.0, -1.0);
        a *= minus_i;
        b *= minus_i;
        let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let p = a[(i, j)] + b[(i, j)];
                let q = a[(i, j)] - b[(i, j)];
                m[(i, j)] = p.re;
                m[(i, n + j)] = -q.im;
                m[(n + i, j)] = p.im;
                m[(n + i, n + j)] = q.re;
            }
        }
        m
    }
}

/// Implicit-midpoint integrator for `ż = −i ∂H/∂z̄`. The diagonal part is
/// solved exactly inside each step; the rest by fixed-point iteration.
#[derive(Clone, Debug)]
pub struct Midpoint {
    field: CompiledField,
    h: f64,
    tol: f64,
    max_iter: usize,
}

pub const DEFAULT_SOLVER_TOL: f64 = 1e-14;

impl Midpoint {
    pub fn new(field: CompiledField, h: f64) -> Result<Self> {
        if !(h.is_finite() && h != 0.0) {
            return Err(Error::invalid("h", "step must be finite and nonzero"));
        }
        let max_lambda = field.lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        if h.abs() * max_lambda >= 0.5 {
            return Err(Error::invalid(
                "h",
                format!("h·max λ = {:.3} must stay below 0.5", h.abs() * max_lambda),
            ));
        }
        Ok(Midpoint {
            field,
            h,
            tol: DEFAULT_SOLVER_TOL,
            max_iter: 60,
        })
    }

    pub fn field(&self) -> &CompiledField {
        &self.field
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// One step from `z0` at time `t` (used for error reporting only).
    pub fn step(&self, z0: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        let h = self.h;
        let lam = &self.field.lambda;
        let plus: Vec<Complex64> = lam.iter().map(|l| Complex64::new(1.0, 0.5 * h * l)).collect();
        let minus: Vec<Complex64> = lam.iter().map(|l| Complex64::new(1.0, -0.5 * h * l)).collect();
        let mut z1: Vec<Complex64> = (0..z0.len()).map(|i| minus[i] / plus[i] * z0[i]).collect();
        if self.field.grad.is_empty() {
            return Ok(z1);
        }
        let scale = z0.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1e-300);
        let mut update = f64::INFINITY;
        for _ in 0..self.max_iter {
            let mid: Vec<Complex64> = z0.iter().zip(&z1).map(|(a, b)| 0.5 * (a + b)).collect();
            let g = self.field.rest(&mid);
            update = 0.0;
            for i in 0..z0.len() {
                let next = (minus[i] * z0[i] + h * g[i]) / plus[i];
                update = update.max((next - z1[i]).norm());
                z1[i] = next;
            }
            if update <= self.tol * scale {
                return Ok(z1);
            }
        }
        Err(Error::Integrator { time: t, update })
    }
}

/// States sampled along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

/// Integrates `steps` steps, keeping every `stride`-th state (and the last).
pub fn flow(integrator: &Midpoint, z0: &[Complex64], steps: usize, stride: usize) -> Result<Trajectory> {
    let stride = stride.max(1);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![z0.to_vec()],
    };
    let mut z = z0.to_vec();
    for s in 1..=steps {
        let t = (s - 1) as f64 * integrator.h;
        z = integrator.step(&z, t)?;
        if s % stride == 0 || s == steps {
            traj.times.push(s as f64 * integrator.h);
            traj.states.push(z.clone());
        }
    }
    Ok(traj)
}

/// Number of steps of size `h` covering `[0, t]`.
pub fn step_count(h: f64, t: f64) -> usize {
    (t / h.abs()).round() as usize
}

/// Point on the torus: `z_n = √I_n(0)`.
pub fn torus_point(i0: &[f64]) -> Vec<Complex64> {
    i0.iter().map(|a| Complex64::new(a.sqrt(), 0.0)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TorusReport {
    pub h: f64,
    pub horizon: f64,
    pub max_action_drift: f64,
    pub freq_error: f64,
    pub frequencies: Vec<f64>,
    pub targets: Vec<f64>,
    pub energy_drift: f64,
}

/// Least-squares slope of `y` against `t`.
fn slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in t.iter().zip(y) {
        num += (a - tm) * (b - ym);
        den += (a - tm) * (a - tm);
    }
    num / den
}

/// Integrates from the torus point for time `horizon` and reports relative
/// action drift, fitted frequencies (from the unwrapped phase, `z ∝ e^{−iλt}`)
/// against `targets`, and relative energy drift.
pub fn torus_residual(
    h_star: &HamiltonianPoly,
    i0: &[f64],
    targets: &[f64],
    h: f64,
    horizon: f64,
) -> Result<(TorusReport, Trajectory)> {
    let field = CompiledField::new(h_star, i0)?;
    let n = field.modes();
    if targets.len() < n {
        return Err(Error::MissingMode {
            mode: targets.len() as u32 + 1,
            available: targets.len(),
        });
    }
    if i0.iter().take(n).any(|a| *a <= 0.0) {
        return Err(Error::invalid("I0", "torus actions must be positive"));
    }
    let integ = Midpoint::new(field, h)?;
    let z0 = torus_point(&i0[..n]);
    let steps = step_count(h, horizon);
    let traj = flow(&integ, &z0, steps, 1)?;

    let e0 = integ.field().energy(&z0).re;
    let mut max_drift = 0.0f64;
    let mut energy_drift = 0.0f64;
    let mut phases = vec![Vec::with_capacity(traj.states.len()); n];
    for z in &traj.states {
        for i in 0..n {
            let d = (z[i].norm_sqr() - i0[i]).abs() / i0[i];
            max_drift = max_drift.max(d);
            let raw = z[i].arg();
            let p = &mut phases[i];
            let next = match p.last() {
                None => raw,
                Some(&prev) => {
                    let mut delta: f64 = raw - prev;
                    delta -= (delta / (2.0 * PI)).round() * 2.0 * PI;
                    prev + delta
                }
            };
            p.push(next);
        }
        let e = integ.field().energy(z).re;
        energy_drift = energy_drift.max((e - e0).abs() / e0.abs().max(1e-300));
    }
    let frequencies: Vec<f64> = phases.iter().map(|p| -slope(&traj.times, p)).collect();
    let freq_error = frequencies
        .iter()
        .zip(targets)
        .fold(0.0f64, |m, (f, t)| m.max((f - t).abs()));
    Ok((
        TorusReport {
            h,
            horizon,
            max_action_drift: max_drift,
            freq_error,
            frequencies,
            targets: targets[..n].to_vec(),
            energy_drift,
        },
        traj,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StabilityReport {
    pub h: f64,
    pub period: f64,
    pub max_modulus_deviation: f64,
    pub moduli: Vec<f64>,
}

/// Monodromy of the variational equation over one period `2π / max λ` of
/// the fastest mode, starting on the torus. Each step applies the Cayley
/// map `(I − hM/2)^{−1}(I + hM/2)` with `M` at the midpoint state.
pub fn linear_stability(h_star: &HamiltonianPoly, i0: &[f64], h: f64) -> Result<StabilityReport> {
    let field = CompiledField::new(h_star, i0)?;
    let n = field.modes();
    let max_lambda = field.lambda().iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if max_lambda == 0.0 {
        return Err(Error::invalid("H", "no quadratic part"));
    }
    let period = 2.0 * PI / max_lambda;
    let steps = (period / h).ceil() as usize;
    let dt = period / steps as f64;
    let integ = Midpoint::new(field, dt)?;
    let mut z = torus_point(&i0[..n]);
    let eye = DMatrix::<f64>::identity(2 * n, 2 * n);
    let mut phi = eye.clone();
    for s in 0..steps {
        let z1 = integ.step(&z, s as f64 * dt)?;
        let mid: Vec<Complex64> = z.iter().zip(&z1).map(|(a, b)| 0.5 * (a + b)).collect();
        let m = integ.field().jacobian(&mid) * (0.5 * dt);
        let lhs = &eye - &m;
        let rhs = (&eye + &m) * &phi;
        phi = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Integrator { time: s as f64 * dt, update: f64::NAN })?;
        z = z1;
    }
    let mut moduli: Vec<f64> = phi.complex_eigenvalues().iter().map(|e| e.norm()).collect();
    moduli.sort_by(f64::total_cmp);
    let dev = moduli.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    Ok(StabilityReport {
        h: dt,
        period,
        max_modulus_deviation: dev,
        moduli,
    })
}
