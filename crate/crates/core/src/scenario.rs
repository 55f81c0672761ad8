//! Configuration, pipelines and artifact emission for the command-line
//! driver. A pipeline is a pure function of its resolved configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hampoly::{HamiltonianPoly, PolyJson, Truncation, SCHEMA_VERSION};
use crate::homological;
use crate::kamdriver::{self, KamParams, KamReport, KamRun};
use crate::nlw::{self, NlwFamily, StabilityReport, TorusReport, Trajectory};
use crate::resonance::{self, AuditReport, FrequencyModel, MeasureParams, MeasureReport, DEFAULT_GRID_BUDGET};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct Tolerances {
    /// Frequency-freezing Newton tolerance.
    pub newton: f64,
    /// Homological residual, relative to the largest solved coefficient.
    pub residual: f64,
    /// Relative action drift on the torus.
    pub drift: f64,
    /// Extracted frequency error.
    pub frequency: f64,
    /// Floquet modulus deviation.
    pub floquet: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            newton: 1e-12,
            residual: 1e-12,
            drift: 1e-3,
            frequency: 1e-4,
            floquet: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { h: 0.002, horizon: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(rename = "L")]
    pub l: u32,
    #[serde(rename = "S")]
    pub s: u32,
    pub samples: u64,
    pub gammas: Vec<f64>,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            l: 3,
            s: 3,
            samples: 100_000,
            gammas: vec![0.02, 0.05, 0.1],
        }
    }
}

/// Scenario configuration. Every field has a default, so `{}` is valid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct Config {
    pub theta: f64,
    pub r: f64,
    pub rho: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub max_mode: u32,
    pub max_degree: u32,
    pub max_steps: usize,
    pub seed: u64,
    /// Target offsets `ω_n`; drawn from `seed` when absent.
    pub omega: Option<Vec<f64>>,
    pub lambda_constant: f64,
    pub displacement_samples: usize,
    pub tolerances: Tolerances,
    pub integrator: IntegratorConfig,
    pub measure: MeasureConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            theta: 0.5,
            r: 1.0,
            rho: 0.005,
            gamma: 0.1,
            epsilon: 1e-6,
            max_mode: 6,
            max_degree: 6,
            max_steps: 3,
            seed: 0,
            omega: None,
            lambda_constant: 1.0,
            displacement_samples: 100,
            tolerances: Tolerances::default(),
            integrator: IntegratorConfig::default(),
            measure: MeasureConfig::default(),
        }
    }
}

fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Leaf paths of `user`, checked against the shape of `defaults`.
fn collect_leaves(
    defaults: &Value,
    user: &Value,
    prefix: &str,
    out: &mut Vec<(Vec<String>, Value)>,
) -> Result<()> {
    let (Value::Object(d), Value::Object(u)) = (defaults, user) else {
        unreachable!("called on objects only");
    };
    for (k, v) in u {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match d.get(k) {
            None => return Err(config_err(&path, "unknown field")),
            Some(dv @ Value::Object(_)) => {
                if !v.is_object() {
                    return Err(config_err(&path, "expected an object"));
                }
                collect_leaves(dv, v, &path, out)?;
            }
            Some(_) => out.push((path.split('.').map(str::to_string).collect(), v.clone())),
        }
    }
    Ok(())
}

fn set_path(root: &mut Value, path: &[String], v: Value) {
    let mut cur = root;
    for k in &path[..path.len() - 1] {
        cur = cur.get_mut(k).expect("path checked against defaults");
    }
    cur[path.last().expect("nonempty path").as_str()] = v;
}

impl Config {
    /// Parses a JSON document; errors name the offending field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text).map_err(|e| config_err("<document>", e.to_string()))?;
        if !user.is_object() {
            return Err(config_err("<document>", "expected a JSON object"));
        }
        let defaults = serde_json::to_value(Config::default())?;
        let mut leaves = Vec::new();
        collect_leaves(&defaults, &user, "", &mut leaves)?;
        let mut merged = defaults.clone();
        for (path, v) in leaves {
            let mut probe = defaults.clone();
            set_path(&mut probe, &path, v.clone());
            if let Err(e) = serde_json::from_value::<Config>(probe) {
                return Err(config_err(&path.join("."), e.to_string()));
            }
            set_path(&mut merged, &path, v);
        }
        let cfg: Config = serde_json::from_value(merged).map_err(|e| config_err("<document>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(config_err(name, format!("{x} must be positive and finite")))
            }
        };
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(config_err("theta", format!("{} not in (0, 1)", self.theta)));
        }
        finite_pos("rho", self.rho)?;
        finite_pos("r", self.r)?;
        let r_min = 100.0 * self.rho / (2.0 - 2f64.powf(self.theta));
        if self.r <= r_min {
            return Err(config_err("r", format!("{} must exceed 100ρ/(2−2^θ) = {r_min}", self.r)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(config_err("gamma", format!("{} not in (0, 1)", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(config_err("epsilon", format!("{} not in [0, 1)", self.epsilon)));
        }
        if self.max_mode == 0 {
            return Err(config_err("maxMode", "must be at least 1"));
        }
        if self.max_degree < 4 {
            return Err(config_err("maxDegree", "must be at least 4"));
        }
        if let Some(w) = &self.omega {
            if w.len() != self.max_mode as usize {
                return Err(config_err("omega", format!("expected {} entries, got {}", self.max_mode, w.len())));
            }
            if let Some(x) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0 && **x < 1.0)) {
                return Err(config_err("omega", format!("entry {x} not in [0, 1)")));
            }
        }
        finite_pos("lambdaConstant", self.lambda_constant)?;
        let t = &self.tolerances;
        finite_pos("tolerances.newton", t.newton)?;
        finite_pos("tolerances.residual", t.residual)?;
        finite_pos("tolerances.drift", t.drift)?;
        finite_pos("tolerances.frequency", t.frequency)?;
        finite_pos("tolerances.floquet", t.floquet)?;
        finite_pos("integrator.h", self.integrator.h)?;
        finite_pos("integrator.T", self.integrator.horizon)?;
        let lam_max = self.max_mode as f64 + 1.0;
        if self.integrator.h * lam_max >= 0.5 {
            return Err(config_err(
                "integrator.h",
                format!("h·max λ ≤ {} must stay below 0.5", self.integrator.h * lam_max),
            ));
        }
        let m = &self.measure;
        if m.l == 0 {
            return Err(config_err("measure.L", "must be at least 1"));
        }
        if m.s == 0 {
            return Err(config_err("measure.S", "must be at least 1"));
        }
        if m.samples == 0 {
            return Err(config_err("measure.samples", "must be at least 1"));
        }
        if m.gammas.is_empty() {
            return Err(config_err("measure.gammas", "must not be empty"));
        }
        if let Some(g) = m.gammas.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            return Err(config_err("measure.gammas", format!("{g} not in (0, 1)")));
        }
        Ok(())
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::new(self.max_mode, self.max_degree)
    }

    pub fn target_omega(&self) -> Result<Vec<f64>> {
        match &self.omega {
            Some(w) => Ok(w.clone()),
            None => resonance::sample_omega(self.seed, self.max_mode),
        }
    }

    pub fn kam_params(&self) -> KamParams {
        KamParams {
            lambda_constant: self.lambda_constant,
            newton_tol: self.tolerances.newton,
            displacement_samples: self.displacement_samples,
            seed: self.seed,
            ..KamParams::new(self.theta, self.rho, self.r, self.epsilon)
        }
    }

    /// Working-coordinate torus actions `(3/4) e^{−2rn^θ}`.
    pub fn torus(&self) -> Vec<f64> {
        nlw::scaled_torus(self.r, self.theta, self.max_mode)
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Audit,
    Measure,
    Kam,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Audit => "audit",
            Command::Measure => "measure",
            Command::Kam => "kam",
            Command::Verify => "verify",
        }
    }
}

/// How a pipeline that produced artifacts ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// At least one KAM step missed its norm targets.
    RejectedSteps,
    /// The audit found a failing nonresonance check.
    Resonant,
}

/// In-memory artifacts, written by [`Artifacts::write`].
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.files.insert(name.to_string(), bytes);
        Ok(())
    }

    fn csv<R: Serialize>(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.files.insert(name.to_string(), bytes);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (name, bytes) in &self.files {
            let p = dir.join(name);
            fs::write(&p, bytes)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    command: &'static str,
    config_hash: String,
    config: &'a Config,
    #[serde(flatten)]
    payload: T,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Manifest<'a> {
    schema: u32,
    command: &'static str,
    config_hash: String,
    config: &'a Config,
    files: BTreeMap<String, String>,
}

fn envelope<T: Serialize>(command: Command, config: &Config, payload: T) -> Envelope<'_, T> {
    Envelope {
        schema: SCHEMA_VERSION,
        command: command.name(),
        config_hash: config.hash(),
        config,
        payload,
    }
}

pub struct Outcome {
    pub status: Status,
    pub artifacts: Artifacts,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct AuditPayload {
    omega: Vec<f64>,
    potential: Vec<f64>,
    radius: u32,
    passed: bool,
    audit: AuditReport,
}

fn audit_target(cfg: &Config) -> Result<(FrequencyModel, AuditReport)> {
    let fm = FrequencyModel::from_offsets(&cfg.target_omega()?)?;
    let rep = resonance::audit_ball(&fm, cfg.gamma, cfg.max_degree, DEFAULT_GRID_BUDGET)?;
    Ok((fm, rep))
}

fn nonresonance_error(rep: &AuditReport) -> Error {
    Error::Nonresonance(format!(
        "{} of {} first-condition checks and {} of {} second-condition checks fail at γ = {} (worst l = {})",
        rep.condition1_failures,
        rep.checked,
        rep.condition2_failures,
        rep.condition2_checked,
        rep.gamma,
        if rep.condition1_failures > 0 {
            rep.worst_l1.clone()
        } else {
            rep.worst_l2.clone().unwrap_or_default()
        }
    ))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct MeasurePayload {
    reports: Vec<MeasureReport>,
}

#[derive(Serialize)]
struct MeasureRow {
    gamma: f64,
    fraction: f64,
    ci: f64,
}

/// Homological residual of every step, relative to the largest solved
/// coefficient of that step.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidualCheck {
    pub step: usize,
    pub absolute: f64,
    pub relative: f64,
}

pub fn homological_residuals(run: &KamRun, cfg: &Config) -> Result<Vec<ResidualCheck>> {
    let mut out = Vec::new();
    for (s, state) in run.evolution.states.iter().enumerate().take(run.evolution.steps.len()) {
        let sched = kamdriver::Schedule::new(
            cfg.theta,
            cfg.rho,
            cfg.epsilon,
            cfg.lambda_constant,
            cfg.target_omega()?.iter().fold(0.0f64, |m, w| m.max(*w)),
        )?;
        let [r0, r1, _] = state.remainder.split_classes()?;
        let av = homological::averages(&r0, &r1)?;
        let sol = homological::solve(&state.freqs, &av.rest0, &av.rest1, sched.b(s), cfg.theta)?;
        let kept0 = av.rest0.minus(&sol.deferred.filtered(|m| m.class() == 0))?;
        let kept1 = av.rest1.minus(&sol.deferred.filtered(|m| m.class() == 1))?;
        let n = homological::quadratic_part(&state.freqs, state.remainder.truncation())?;
        let zero = HamiltonianPoly::new(crate::hampoly::Basis::Adapted, state.remainder.truncation());
        let abs = homological::residual(&n, &sol.f0, &sol.f1, &kept0, &kept1, &zero, &zero)?;
        let scale = sol.killed.max_abs_coeff();
        out.push(ResidualCheck {
            step: s,
            absolute: abs,
            relative: if scale > 0.0 { abs / scale } else { abs },
        });
    }
    Ok(out)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct KamPayload<'a> {
    omega: Vec<f64>,
    audit: &'a AuditReport,
    kam: &'a KamReport,
    homological_residuals: Vec<ResidualCheck>,
    normal_form_terms: usize,
}

/// Normal form `N_* + R2_*` (adapted basis) including the constant ledger.
pub fn normal_form(run: &KamRun) -> Result<HamiltonianPoly> {
    run.final_state().hamiltonian()
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub torus: TorusReport,
    pub torus_half_step: TorusReport,
    pub stability: StabilityReport,
    pub stability_half_step: StabilityReport,
    pub drift_ok: bool,
    pub frequency_ok: bool,
    pub floquet_ok: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct VerifyPayload<'a> {
    omega: Vec<f64>,
    kam: &'a KamReport,
    verify: &'a VerifyReport,
}

/// Torus flow and Floquet probe on the normal form, each at `h` and `h/2`.
pub fn verify_normal_form(run: &KamRun, cfg: &Config) -> Result<(VerifyReport, Trajectory)> {
    let h_star = normal_form(run)?;
    let state = run.final_state();
    let targets = state.freqs.lambdas();
    let h = cfg.integrator.h;
    let (torus, traj) = nlw::torus_residual(&h_star, &state.i0, &targets, h, cfg.integrator.horizon)?;
    let (torus_half, _) = nlw::torus_residual(&h_star, &state.i0, &targets, h / 2.0, cfg.integrator.horizon)?;
    let stability = nlw::linear_stability(&h_star, &state.i0, h)?;
    let stability_half = nlw::linear_stability(&h_star, &state.i0, h / 2.0)?;
    let t = &cfg.tolerances;
    let rep = VerifyReport {
        drift_ok: torus.max_action_drift <= t.drift && torus_half.max_action_drift <= t.drift,
        frequency_ok: torus.freq_error <= t.frequency && torus_half.freq_error <= t.frequency,
        floquet_ok: stability.max_modulus_deviation <= t.floquet
            && stability_half.max_modulus_deviation <= t.floquet,
        torus,
        torus_half_step: torus_half,
        stability,
        stability_half_step: stability_half,
    };
    Ok((rep, traj))
}

/// Rows kept in `trajectory.csv`, evenly spaced in time.
const TRAJECTORY_ROWS: usize = 1000;

fn trajectory_csv(traj: &Trajectory) -> (Vec<String>, Vec<Vec<f64>>) {
    let stride = (traj.times.len() / TRAJECTORY_ROWS).max(1);
    let n = traj.states.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    for k in 1..=n {
        header.push(format!("action_{k}"));
        header.push(format!("phase_{k}"));
    }
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .step_by(stride)
        .map(|(t, z)| {
            let mut row = vec![*t];
            for c in z {
                row.push(c.norm_sqr());
                row.push(c.arg());
            }
            row
        })
        .collect();
    (header, rows)
}

fn kam_run(cfg: &Config) -> Result<(Vec<f64>, AuditReport, KamRun)> {
    let (fm, audit) = audit_target(cfg)?;
    if !audit.passed() {
        return Err(nonresonance_error(&audit));
    }
    let family = NlwFamily::new(cfg.truncation(), cfg.epsilon, cfg.torus())?;
    let run = kamdriver::run(&family, fm.omega(), &cfg.kam_params(), cfg.max_steps)?;
    Ok((fm.omega().to_vec(), audit, run))
}

const STEP_HEADER: [&str; 9] = [
    "step", "rho_s", "B_s", "norm_r0", "norm_r1", "norm_r2", "max_shift", "v_drift", "dropped_mass",
];

fn step_rows(run: &KamRun) -> Vec<(usize, f64, f64, f64, f64, f64, f64, f64, f64)> {
    run.rows
        .iter()
        .map(|r| {
            (
                r.step, r.rho_s, r.b_s, r.norm_r0, r.norm_r1, r.norm_r2, r.max_shift, r.v_drift, r.dropped_mass,
            )
        })
        .collect()
}

/// Runs one pipeline and returns its artifacts (not yet written).
pub fn run_scenario(command: Command, cfg: &Config) -> Result<Outcome> {
    cfg.validate()?;
    let mut art = Artifacts::default();
    let mut status = Status::Ok;
    match command {
        Command::Audit => {
            let (fm, audit) = audit_target(cfg)?;
            let passed = audit.passed();
            art.json(
                "report.json",
                &envelope(command, cfg, AuditPayload {
                    omega: fm.omega().to_vec(),
                    potential: fm.potential(),
                    radius: cfg.max_degree,
                    passed,
                    audit: audit.clone(),
                }),
            )?;
            if !passed {
                status = Status::Resonant;
            }
        }
        Command::Measure => {
            let m = &cfg.measure;
            let reports = resonance::measure_scan(
                &m.gammas,
                MeasureParams {
                    n: cfg.max_mode,
                    l: m.l,
                    s: m.s,
                    samples: m.samples,
                    seed: cfg.seed,
                },
                DEFAULT_GRID_BUDGET,
            )?;
            art.csv(
                "measure.csv",
                &["gamma", "fraction", "ci"],
                reports.iter().map(|r| MeasureRow {
                    gamma: r.gamma,
                    fraction: r.fraction,
                    ci: r.ci,
                }),
            )?;
            art.json("report.json", &envelope(command, cfg, MeasurePayload { reports }))?;
        }
        Command::Kam => {
            let (omega, audit, run) = kam_run(cfg)?;
            let nf = normal_form(&run)?;
            art.csv("steps.csv", &STEP_HEADER, step_rows(&run))?;
            art.json::<PolyJson>("normal_form.json", &nf.to_json())?;
            art.json(
                "report.json",
                &envelope(command, cfg, KamPayload {
                    omega,
                    audit: &audit,
                    kam: &run.report,
                    homological_residuals: homological_residuals(&run, cfg)?,
                    normal_form_terms: nf.len(),
                }),
            )?;
            if !run.all_accepted() {
                status = Status::RejectedSteps;
            }
        }
        Command::Verify => {
            let (omega, _, run) = kam_run(cfg)?;
            let (rep, traj) = verify_normal_form(&run, cfg)?;
            let (header, rows) = trajectory_csv(&traj);
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            art.csv("trajectory.csv", &header, rows)?;
            art.csv("steps.csv", &STEP_HEADER, step_rows(&run))?;
            art.json(
                "report.json",
                &envelope(command, cfg, VerifyPayload {
                    omega,
                    kam: &run.report,
                    verify: &rep,
                }),
            )?;
            if !run.all_accepted() {
                status = Status::RejectedSteps;
            }
        }
    }
    finish(&mut art, command, cfg)?;
    Ok(Outcome { status, artifacts: art })
}

fn finish(art: &mut Artifacts, command: Command, cfg: &Config) -> Result<()> {
    let mut resolved = cfg.canonical_json().into_bytes();
    resolved.push(b'\n');
    art.files.insert("config.json".to_string(), resolved);
    let files = art
        .files
        .iter()
        .map(|(k, v)| (k.clone(), sha256_hex(v)))
        .collect();
    art.json(
        "manifest.json",
        &Manifest {
            schema: SCHEMA_VERSION,
            command: command.name(),
            config_hash: cfg.hash(),
            config: cfg,
            files,
        },
    )
}
