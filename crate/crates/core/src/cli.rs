//! Config-driven command-line front end.
//!
//! One binary, five subcommands — `simulate`, `certify`, `measure`,
//! `telegraph`, `memory` — each reading a JSON config file and writing its
//! results to files. Outputs are deterministic: the same config and seed
//! produce byte-identical files, because every floating-point number is
//! serialized with 17 significant digits (which round-trips an IEEE double
//! exactly) and all iteration orders are fixed.
//!
//! Flags: `--config <path>` (required), `--out <path>` (overrides the
//! config's `out` field), `--seed <u64>` (overrides the config's `seed`),
//! `--threads <n>` (measure only) and `--quiet` (suppress the one-line
//! summary).
//!
//! Exit codes: 0 success; 1 configuration or validation error (including
//! malformed JSON and unknown keys); 2 a certificate failed or a checked
//! inequality was falsified; 3 numerical failure (blow-up or non-finite
//! values).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::certify::{contraction_constants, operator_norm, DissipativityCertificate};
use crate::difference::solve_difference;
use crate::error::{Error, Result};
use crate::history::HistorySegment;
use crate::measure::{
    empirical_measure, ensemble_average, invariance_defect, time_average, Observable, Sampler,
};
use crate::memory::{
    check_absorbing_bound, check_energy_inequality, check_gamma_inequality, inequality_tolerance,
    integrate_memory, kernel_exponential, kernel_piecewise, kernel_tabulated, memory_diagnostics,
    GalerkinMemorySystem, KernelFamily, MemoryDiagnostics, MemoryKernel,
};
use crate::ndde::{integrate, integrate_with, IntegrateOptions, NddeSystem, Trajectory};
use crate::telegraph::{
    boundary_to_difference, boundary_to_ndde, cross_validate, decompose, join_waves, reconstruct,
    split_waves, BoundaryKind, TelegraphLine,
};

// ---------------------------------------------------------------------------
// Fixed-precision serialization
// ---------------------------------------------------------------------------

/// Formats a double with 17 significant digits (scientific notation); this
/// representation parses back to the identical bit pattern.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A JSON document assembled by the command runners. A hand-rolled writer
/// (rather than a generic serializer) keeps the float formatting pinned to
/// 17 significant digits.
enum JsonValue {
    Null,
    Bool(bool),
    Int(u64),
    Num(f64),
    Str(String),
    Arr(Vec<JsonValue>),
    Obj(Vec<(String, JsonValue)>),
}

impl JsonValue {
    fn render(&self) -> Result<String> {
        let mut out = String::new();
        self.write_into(&mut out, 0)?;
        out.push('\n');
        Ok(out)
    }

    fn write_into(&self, out: &mut String, indent: usize) -> Result<()> {
        match self {
            JsonValue::Null => out.push_str("null"),
            JsonValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            JsonValue::Int(i) => out.push_str(&i.to_string()),
            JsonValue::Num(x) => {
                if !x.is_finite() {
                    return Err(Error::NonFinite(format!("number {x} in a JSON report")));
                }
                out.push_str(&fmt_float(*x));
            }
            JsonValue::Str(s) => write_json_string(s, out),
            JsonValue::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return Ok(());
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    newline(out, indent + 1);
                    item.write_into(out, indent + 1)?;
                }
                newline(out, indent);
                out.push(']');
            }
            JsonValue::Obj(pairs) => {
                if pairs.is_empty() {
                    out.push_str("{}");
                    return Ok(());
                }
                out.push('{');
                for (i, (key, value)) in pairs.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    newline(out, indent + 1);
                    write_json_string(key, out);
                    out.push_str(": ");
                    value.write_into(out, indent + 1)?;
                }
                newline(out, indent);
                out.push('}');
            }
        }
        Ok(())
    }
}

fn newline(out: &mut String, indent: usize) {
    out.push('\n');
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn write_json_string(s: &str, out: &mut String) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn opt_num(x: Option<f64>) -> JsonValue {
    match x {
        Some(v) => JsonValue::Num(v),
        None => JsonValue::Null,
    }
}

// ---------------------------------------------------------------------------
// Config schemas
// ---------------------------------------------------------------------------

/// Preset right-hand sides buildable from a config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum SystemConfig {
    /// Scalar d/dt[x(t) − b·x(t−τ)] = −a·x(t) + p.
    LinearScalar { b: f64, a: f64, p: f64, tau: f64 },
    /// Two-dimensional transmission-line oscillator with nonlinear damping.
    BraytonMiranker {
        q: f64,
        m: f64,
        p: f64,
        b: f64,
        c: f64,
        alpha1: f64,
        alpha2: f64,
        tau: f64,
    },
    /// Lossless line with rate-form boundary conditions, as an NDDE.
    TelegraphDynamic { l: f64, c: f64, r0: f64, e: f64 },
}

impl SystemConfig {
    fn build(&self) -> Result<NddeSystem> {
        match *self {
            SystemConfig::LinearScalar { b, a, p, tau } => crate::ndde::linear_scalar(b, a, p, tau),
            SystemConfig::BraytonMiranker { q, m, p, b, c, alpha1, alpha2, tau } => {
                crate::ndde::brayton_miranker(crate::ndde::BraytonMirankerParams {
                    q,
                    m,
                    p,
                    b,
                    c,
                    alpha1,
                    alpha2,
                    tau,
                })
            }
            SystemConfig::TelegraphDynamic { l, c, r0, e } => {
                boundary_to_ndde(&TelegraphLine::new(l, c, r0, e, BoundaryKind::Dynamic)?)
            }
        }
    }
}

/// Initial history segment on [−τ, 0].
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum HistoryConfig {
    /// φ ≡ value, sampled on `intervals` grid cells.
    Constant { value: Vec<f64>, intervals: usize },
    /// Explicit node values, one row per node, uniformly spaced on [−τ, 0].
    Samples { values: Vec<Vec<f64>> },
}

impl HistoryConfig {
    fn build(&self, tau: f64) -> Result<HistorySegment> {
        match self {
            HistoryConfig::Constant { value, intervals } => {
                HistorySegment::constant(tau, *intervals, value)
            }
            HistoryConfig::Samples { values } => {
                let dim = values.first().map(|row| row.len()).unwrap_or(0);
                if dim == 0 || values.len() < 2 {
                    return Err(Error::Config(
                        "history samples need at least 2 non-empty rows".into(),
                    ));
                }
                if values.iter().any(|row| row.len() != dim) {
                    return Err(Error::Config("history sample rows differ in length".into()));
                }
                HistorySegment::new(dim, tau, values.concat())
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    seed: Option<u64>,
    out: Option<String>,
    system: SystemConfig,
    history: HistoryConfig,
    t_max: f64,
    h: f64,
    blowup_threshold: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertifyConfig {
    seed: Option<u64>,
    out: Option<String>,
    alpha: f64,
    beta: f64,
    #[serde(default)]
    gamma: f64,
    tau: f64,
    /// Operator norm ‖B‖, given directly …
    b_norm: Option<f64>,
    /// … or as an explicit matrix (rows) whose norm is computed.
    b_matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum ObservableConfig {
    Component { index: usize },
    ComponentSq { index: usize },
    DelayedComponent { index: usize },
    SupNorm,
}

impl ObservableConfig {
    fn build(&self) -> Observable {
        match *self {
            ObservableConfig::Component { index } => Observable::component(index),
            ObservableConfig::ComponentSq { index } => Observable::component_sq(index),
            ObservableConfig::DelayedComponent { index } => Observable::delayed_component(index),
            ObservableConfig::SupNorm => Observable::sup_norm(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InvarianceConfig {
    /// Snapshot spacing after burn-in.
    stride: f64,
    /// Advance time t* for the defect test; defaults to the system delay.
    t_star: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleConfig {
    n_traj: usize,
    /// Initial histories are constants drawn uniformly from
    /// [−amplitude, amplitude] per component.
    amplitude: f64,
    /// Grid intervals of the sampled histories (default 16).
    intervals: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureConfig {
    seed: Option<u64>,
    out: Option<String>,
    system: SystemConfig,
    history: HistoryConfig,
    t_max: f64,
    h: f64,
    #[serde(default)]
    burn_in: f64,
    observables: Vec<ObservableConfig>,
    invariance: Option<InvarianceConfig>,
    #[serde(default)]
    snapshots_csv: bool,
    ensemble: Option<EnsembleConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BoundaryConfig {
    Static,
    Dynamic,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineConfig {
    l: f64,
    c: f64,
    r0: f64,
    e: f64,
    boundary: BoundaryConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldGridConfig {
    n_x: usize,
    n_t: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TelegraphConfig {
    seed: Option<u64>,
    out: Option<String>,
    line: LineConfig,
    /// Initial voltage V₀(x) as polynomial coefficients in ascending powers.
    v0: Vec<f64>,
    /// Initial current I₀(x), same encoding.
    i0: Vec<f64>,
    /// Wave-profile grid intervals for the decomposition.
    nodes: usize,
    t_max: f64,
    /// Cross-validation grid spacing (static boundary) / integrator step
    /// (dynamic boundary).
    h: f64,
    grid: FieldGridConfig,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum KernelConfig {
    Exponential { mu0: f64, delta: f64 },
    PiecewiseConstant { mu0: f64, t_star: f64 },
    Tabulated { s: Vec<f64>, mu: Vec<f64> },
}

impl KernelConfig {
    fn build(&self) -> Result<MemoryKernel> {
        match self {
            KernelConfig::Exponential { mu0, delta } => kernel_exponential(*mu0, *delta),
            KernelConfig::PiecewiseConstant { mu0, t_star } => kernel_piecewise(*mu0, *t_star),
            KernelConfig::Tabulated { s, mu } => kernel_tabulated(s.clone(), mu.clone()),
        }
    }

    fn params_json(&self) -> JsonValue {
        match self {
            KernelConfig::Exponential { mu0, delta } => JsonValue::Obj(vec![
                ("mu0".into(), JsonValue::Num(*mu0)),
                ("delta".into(), JsonValue::Num(*delta)),
            ]),
            KernelConfig::PiecewiseConstant { mu0, t_star } => JsonValue::Obj(vec![
                ("mu0".into(), JsonValue::Num(*mu0)),
                ("t_star".into(), JsonValue::Num(*t_star)),
            ]),
            KernelConfig::Tabulated { s, .. } => JsonValue::Obj(vec![
                ("nodes".into(), JsonValue::Int(s.len() as u64)),
                ("s_max".into(), JsonValue::Num(*s.last().unwrap_or(&0.0))),
            ]),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemoryChecksConfig {
    #[serde(default = "default_true")]
    energy: bool,
    #[serde(default = "default_true")]
    gamma: bool,
    #[serde(default = "default_true")]
    absorbing: bool,
}

fn default_true() -> bool {
    true
}

impl Default for MemoryChecksConfig {
    fn default() -> Self {
        MemoryChecksConfig { energy: true, gamma: true, absorbing: true }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemoryConfig {
    seed: Option<u64>,
    out: Option<String>,
    /// Strictly increasing positive mode eigenvalues λ₁ < … < λ_m.
    lambdas: Vec<f64>,
    nu: f64,
    /// Optional structure constants c[j][i][k]; antisymmetrized in (i, k)
    /// before use so hand-written tables need not be exact.
    coupling: Option<Vec<Vec<Vec<f64>>>>,
    forcing: Vec<f64>,
    kernel: KernelConfig,
    x0: Vec<f64>,
    t_max: f64,
    h: f64,
    /// Memory-decay constant for the Γ-inequality check; defaults to the
    /// kernel's canonical constant.
    beta: Option<f64>,
    /// Envelope prefactor for the absorbing-bound check (default 100).
    c_fit: Option<f64>,
    checks: Option<MemoryChecksConfig>,
}

/// Shared accessors so the driver can resolve output path and seed without
/// knowing the concrete config type.
trait ConfigCommon {
    fn out(&self) -> Option<&str>;
    fn seed(&self) -> Option<u64>;
}

macro_rules! impl_config_common {
    ($($ty:ty),*) => {$(
        impl ConfigCommon for $ty {
            fn out(&self) -> Option<&str> {
                self.out.as_deref()
            }
            fn seed(&self) -> Option<u64> {
                self.seed
            }
        }
    )*};
}

impl_config_common!(SimulateConfig, CertifyConfig, MeasureConfig, TelegraphConfig, MemoryConfig);

// ---------------------------------------------------------------------------
// Output writers
// ---------------------------------------------------------------------------

/// Trajectory CSV: `t,x1,…,xn,breakpoint`, one row per stored node in
/// increasing time order.
fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut s = String::from("t");
    for k in 1..=traj.dim() {
        s.push_str(&format!(",x{k}"));
    }
    s.push_str(",breakpoint\n");
    for i in 0..traj.len() {
        s.push_str(&fmt_float(traj.time(i)));
        for &v in traj.state(i) {
            s.push(',');
            s.push_str(&fmt_float(v));
        }
        s.push_str(&format!(",{}\n", u8::from(traj.is_breakpoint(i))));
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Diagnostics CSV: `t,u_sq,grad_sq,eta_sq,gamma1,t_eta_sq,tail`.
fn write_diagnostics_csv(diag: &MemoryDiagnostics, path: &Path) -> Result<()> {
    let mut s = String::from("t,u_sq,grad_sq,eta_sq,gamma1,t_eta_sq,tail\n");
    for j in 0..diag.times.len() {
        for (i, col) in [
            diag.times[j],
            diag.u_sq[j],
            diag.grad_sq[j],
            diag.eta_sq[j],
            diag.gamma1[j],
            diag.t_eta_sq[j],
            diag.tail[j],
        ]
        .iter()
        .enumerate()
        {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&fmt_float(*col));
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn certificate_json(cert: &DissipativityCertificate) -> JsonValue {
    let checks = cert
        .checks()
        .into_iter()
        .map(|c| {
            JsonValue::Obj(vec![
                ("name".into(), JsonValue::Str(c.name)),
                ("passed".into(), JsonValue::Bool(c.passed)),
                ("detail".into(), JsonValue::Str(c.detail)),
            ])
        })
        .collect();
    JsonValue::Obj(vec![
        ("alpha".into(), JsonValue::Num(cert.alpha)),
        ("beta".into(), JsonValue::Num(cert.beta)),
        ("gamma".into(), JsonValue::Num(cert.gamma)),
        ("b_norm".into(), JsonValue::Num(cert.b_norm)),
        ("tau".into(), JsonValue::Num(cert.tau)),
        ("frak_c".into(), JsonValue::Num(cert.frak_c)),
        ("frak_c0".into(), JsonValue::Num(cert.frak_c0)),
        ("r".into(), JsonValue::Num(cert.r)),
        ("r_abs".into(), opt_num(cert.r_abs)),
        ("tau_star".into(), opt_num(cert.tau_star)),
        ("satisfied".into(), JsonValue::Bool(cert.satisfied)),
        ("checks".into(), JsonValue::Arr(checks)),
    ])
}

// ---------------------------------------------------------------------------
// Command runners
// ---------------------------------------------------------------------------

/// What a successful command hands back to the driver.
struct Outcome {
    summary: String,
    /// True when a certificate check or verified inequality failed: the
    /// command ran to completion but the mathematical claim did not hold
    /// (exit code 2).
    claim_failed: bool,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Outcome { summary, claim_failed: false }
    }
}

fn run_simulate(cfg: &SimulateConfig, out: &Path) -> Result<Outcome> {
    let sys = cfg.system.build()?;
    let phi = cfg.history.build(sys.tau())?;
    let mut opts = IntegrateOptions::default();
    if let Some(threshold) = cfg.blowup_threshold {
        opts.blowup_threshold = threshold;
    }
    let traj = integrate_with(&sys, &phi, cfg.t_max, cfg.h, &opts)?;
    let final_norm = traj.norm(traj.len() - 1);
    write_trajectory_csv(&traj, out)?;
    Ok(Outcome::ok(format!(
        "simulate: {} nodes on [{:.3}, {:.3}], final |x| = {:.6e} -> {}",
        traj.len(),
        traj.time(0),
        traj.final_time(),
        final_norm,
        out.display()
    )))
}

fn run_certify(cfg: &CertifyConfig, out: &Path) -> Result<Outcome> {
    let b_norm = match (&cfg.b_norm, &cfg.b_matrix) {
        (Some(n), None) => *n,
        (None, Some(rows)) => {
            let dim = rows.len();
            if dim == 0 || rows.iter().any(|r| r.len() != dim) {
                return Err(Error::Config("b_matrix must be square and non-empty".into()));
            }
            let flat: Vec<f64> = rows.concat();
            operator_norm(&nalgebra::DMatrix::from_row_slice(dim, dim, &flat))
        }
        _ => {
            return Err(Error::Config(
                "provide exactly one of b_norm or b_matrix".into(),
            ))
        }
    };
    let cert = contraction_constants(cfg.alpha, cfg.beta, cfg.gamma, b_norm, cfg.tau)?;
    let json = certificate_json(&cert).render()?;
    std::fs::write(out, json)?;
    let summary = format!(
        "certify: frak_c = {:.6e}, satisfied = {} -> {}",
        cert.frak_c,
        cert.satisfied,
        out.display()
    );
    Ok(Outcome { summary, claim_failed: !cert.satisfied })
}

fn run_measure(
    cfg: &MeasureConfig,
    out: &Path,
    seed: u64,
    threads: Option<usize>,
) -> Result<Outcome> {
    match threads {
        None => measure_body(cfg, out, seed),
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| measure_body(cfg, out, seed))
        }
    }
}

fn measure_body(cfg: &MeasureConfig, out: &Path, seed: u64) -> Result<Outcome> {
    let sys = cfg.system.build()?;
    let phi = cfg.history.build(sys.tau())?;
    if cfg.observables.is_empty() {
        return Err(Error::Config("need at least one observable".into()));
    }
    let observables: Vec<Observable> = cfg.observables.iter().map(|o| o.build()).collect();

    let mut obs_json = Vec::with_capacity(observables.len());
    match &cfg.ensemble {
        Some(ens) => {
            let dim = sys.dim();
            let tau = sys.tau();
            let amplitude = ens.amplitude;
            if !(amplitude >= 0.0) || !amplitude.is_finite() {
                return Err(Error::Config(format!(
                    "ensemble amplitude must be nonnegative, got {amplitude}"
                )));
            }
            let intervals = ens.intervals.unwrap_or(16);
            let sampler: Sampler = Arc::new(move |rng| {
                let v: Vec<f64> =
                    (0..dim).map(|_| rng.gen_range(-amplitude..=amplitude)).collect();
                HistorySegment::constant(tau, intervals, &v)
            });
            for obs in &observables {
                let stats = ensemble_average(
                    &sys,
                    &sampler,
                    ens.n_traj,
                    cfg.t_max,
                    cfg.h,
                    obs,
                    cfg.burn_in,
                    seed,
                )?;
                obs_json.push(JsonValue::Obj(vec![
                    ("label".into(), JsonValue::Str(obs.label().into())),
                    ("mean".into(), JsonValue::Num(stats.mean)),
                    ("stderr".into(), JsonValue::Num(stats.stderr)),
                ]));
            }
        }
        None => {
            let traj = integrate(&sys, &phi, cfg.t_max, cfg.h)?;
            for obs in &observables {
                let mean = time_average(&traj, obs, cfg.burn_in)?;
                obs_json.push(JsonValue::Obj(vec![
                    ("label".into(), JsonValue::Str(obs.label().into())),
                    ("mean".into(), JsonValue::Num(mean)),
                ]));
            }
        }
    }

    let mut snapshots_file: Option<PathBuf> = None;
    let invariance_json = match &cfg.invariance {
        Some(inv) => {
            let mu = empirical_measure(&sys, &phi, cfg.t_max, cfg.h, cfg.burn_in, inv.stride)?;
            let t_star = inv.t_star.unwrap_or(sys.tau());
            let report = invariance_defect(&mu, &sys, t_star, cfg.h, &observables)?;
            if cfg.snapshots_csv {
                let path = sibling_path(out, "snapshots.csv");
                let mut s = String::from("snapshot,theta");
                for k in 1..=sys.dim() {
                    s.push_str(&format!(",x{k}"));
                }
                s.push('\n');
                for (idx, snap) in mu.snapshots().iter().enumerate() {
                    for (j, &theta) in snap.nodes().iter().enumerate() {
                        s.push_str(&format!("{idx},{}", fmt_float(theta)));
                        for &v in snap.value(j) {
                            s.push(',');
                            s.push_str(&fmt_float(v));
                        }
                        s.push('\n');
                    }
                }
                std::fs::write(&path, s)?;
                snapshots_file = Some(path);
            }
            let defects = report
                .defects
                .iter()
                .map(|(label, d)| (label.clone(), JsonValue::Num(*d)))
                .collect();
            JsonValue::Obj(vec![
                ("t_star".into(), JsonValue::Num(report.t_star)),
                ("defects".into(), JsonValue::Obj(defects)),
                ("max".into(), JsonValue::Num(report.max_defect)),
            ])
        }
        None => JsonValue::Null,
    };

    let mut top = vec![
        ("observables".to_string(), JsonValue::Arr(obs_json)),
        ("invariance".to_string(), invariance_json),
    ];
    if let Some(path) = &snapshots_file {
        top.push(("snapshots_file".into(), JsonValue::Str(path.display().to_string())));
    }
    std::fs::write(out, JsonValue::Obj(top).render()?)?;
    Ok(Outcome::ok(format!(
        "measure: {} observable mean(s) over [{}, {:.3}]{} -> {}",
        observables.len(),
        cfg.burn_in,
        cfg.t_max,
        if cfg.ensemble.is_some() { " (ensemble)" } else { "" },
        out.display()
    )))
}

/// `<dir>/<stem>.<suffix>` next to `path`.
fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Evaluates a polynomial given by ascending coefficients (Horner form).
fn polynomial(coeffs: &[f64]) -> impl Fn(f64) -> f64 + '_ {
    move |x| coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn run_telegraph(cfg: &TelegraphConfig, out: &Path) -> Result<Outcome> {
    let kind = match cfg.line.boundary {
        BoundaryConfig::Static => BoundaryKind::Static,
        BoundaryConfig::Dynamic => BoundaryKind::Dynamic,
    };
    let line = TelegraphLine::new(cfg.line.l, cfg.line.c, cfg.line.r0, cfg.line.e, kind)?;
    if cfg.grid.n_x == 0 || cfg.grid.n_t == 0 {
        return Err(Error::Config("field grid needs n_x >= 1 and n_t >= 1".into()));
    }
    if !(cfg.t_max > 0.0) || !cfg.t_max.is_finite() {
        return Err(Error::Config(format!("t_max must be positive, got {}", cfg.t_max)));
    }
    let v0 = polynomial(&cfg.v0);
    let i0 = polynomial(&cfg.i0);
    let (phi0, psi0) = decompose(&v0, &i0, &line, cfg.nodes)?;
    let joint = join_waves(&phi0, &psi0)?;

    let (traj, discrepancy) = match kind {
        BoundaryKind::Static => {
            let worst = cross_validate(&v0, &i0, &line, cfg.t_max, cfg.h)?;
            let sys = boundary_to_difference(&line)?;
            let k_max = (cfg.t_max / line.tau()).ceil() as usize + 1;
            (solve_difference(&sys, &joint, k_max)?, Some(worst))
        }
        BoundaryKind::Dynamic => {
            let sys = boundary_to_ndde(&line)?;
            (integrate(&sys, &joint, cfg.t_max + line.tau(), cfg.h)?, None)
        }
    };
    let (phi, psi) = split_waves(&traj)?;

    let mut s = String::from("t,x,V,I\n");
    let mut rows = 0usize;
    for it in 0..=cfg.grid.n_t {
        let t = cfg.t_max * it as f64 / cfg.grid.n_t as f64;
        for ix in 0..=cfg.grid.n_x {
            let x = ix as f64 / cfg.grid.n_x as f64;
            let (v, i) = reconstruct(&phi, &psi, &line, x, t)?;
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_float(t),
                fmt_float(x),
                fmt_float(v),
                fmt_float(i)
            ));
            rows += 1;
        }
    }
    std::fs::write(out, s)?;
    let summary = match discrepancy {
        Some(d) => format!(
            "telegraph: {rows} field samples on [0, {}] x [0, 1], \
             max cross-validation discrepancy = {d:.6e} -> {}",
            cfg.t_max,
            out.display()
        ),
        None => format!(
            "telegraph: {rows} field samples on [0, {}] x [0, 1] (dynamic boundary) -> {}",
            cfg.t_max,
            out.display()
        ),
    };
    Ok(Outcome::ok(summary))
}

fn kernel_json(cfg: &KernelConfig, kernel: &MemoryKernel) -> JsonValue {
    let family = match kernel.family() {
        KernelFamily::Exponential => "exponential",
        KernelFamily::PiecewiseConstant => "piecewise_constant",
        KernelFamily::Tabulated => "tabulated",
    };
    let (k, delta) = kernel.decay_constants();
    JsonValue::Obj(vec![
        ("family".into(), JsonValue::Str(family.into())),
        ("params".into(), cfg.params_json()),
        ("kappa0".into(), JsonValue::Num(kernel.kappa0())),
        ("beta_nec".into(), JsonValue::Num(kernel.beta_nec())),
        ("K".into(), JsonValue::Num(k)),
        ("delta".into(), JsonValue::Num(delta)),
    ])
}

fn run_memory(cfg: &MemoryConfig, out: &Path) -> Result<Outcome> {
    let kernel = cfg.kernel.build()?;
    let m = cfg.lambdas.len();
    let tensor = match &cfg.coupling {
        Some(rows) => {
            let mut flat = Vec::with_capacity(m * m * m);
            if rows.len() != m {
                return Err(Error::Config("coupling must have one block per mode".into()));
            }
            for block in rows {
                if block.len() != m || block.iter().any(|r| r.len() != m) {
                    return Err(Error::Config("coupling blocks must be m x m".into()));
                }
                for row in block {
                    flat.extend_from_slice(row);
                }
            }
            GalerkinMemorySystem::antisymmetrize(m, &flat)?
        }
        None => vec![0.0; m * m * m],
    };
    let sys = GalerkinMemorySystem::new(
        cfg.lambdas.clone(),
        cfg.nu,
        cfg.forcing.clone(),
        tensor,
        kernel,
        "memory run",
    )?;
    let traj = integrate_memory(&sys, &cfg.x0, cfg.t_max, cfg.h)?;
    let diag = memory_diagnostics(&traj, sys.kernel(), &cfg.lambdas)?;
    write_diagnostics_csv(&diag, out)?;
    let kernel_path = sibling_path(out, "kernel.json");
    std::fs::write(&kernel_path, kernel_json(&cfg.kernel, sys.kernel()).render()?)?;

    let checks = cfg.checks.clone().unwrap_or_default();
    let tol = inequality_tolerance(&diag, cfg.nu);
    let mut parts = Vec::new();
    let mut failed = false;
    if checks.energy {
        let resid = check_energy_inequality(&diag, cfg.nu, &cfg.forcing, &cfg.lambdas)?;
        let ok = resid <= tol;
        failed |= !ok;
        parts.push(format!("energy residual {resid:.3e} ({})", verdict(ok)));
    }
    if checks.gamma {
        let beta = cfg.beta.unwrap_or_else(|| sys.kernel().beta_nec());
        let resid = check_gamma_inequality(&diag, sys.kernel(), beta)?;
        let ok = resid <= tol;
        failed |= !ok;
        parts.push(format!("gamma residual {resid:.3e} ({})", verdict(ok)));
    }
    if checks.absorbing {
        let x0_norm_sq: f64 = cfg.x0.iter().map(|v| v * v).sum();
        let report = check_absorbing_bound(
            &diag,
            sys.kernel(),
            cfg.nu,
            &cfg.lambdas,
            &cfg.forcing,
            x0_norm_sq,
            cfg.c_fit,
        )?;
        failed |= report.violated;
        parts.push(format!(
            "absorbing bound (gamma = {:.3e}) {}",
            report.gamma_rate,
            verdict(!report.violated)
        ));
    }
    if parts.is_empty() {
        parts.push("no checks requested".into());
    }
    let summary = format!(
        "memory: {} -> {} (+ {})",
        parts.join(", "),
        out.display(),
        kernel_path.display()
    );
    Ok(Outcome { summary, claim_failed: failed })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "VIOLATED"
    }
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "ergodyn",
    about = "Delay systems with memory: simulation, dissipativity certificates, \
             invariant-measure estimation",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output file (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the one-line summary on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct MeasureArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Worker threads for ensemble averaging (default: rayon's choice).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate a delay system and write the trajectory CSV.
    Simulate(CommonArgs),
    /// Compute a dissipativity certificate and write it as JSON.
    Certify(CommonArgs),
    /// Long-run averages, empirical measures, and invariance defects.
    Measure(MeasureArgs),
    /// Transmission-line reduction, field reconstruction, cross-validation.
    Telegraph(CommonArgs),
    /// Mode-truncated fluid system with memory: diagnostics and inequalities.
    Memory(CommonArgs),
}

fn load_config<C: DeserializeOwned>(path: &Path) -> Result<C> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    // serde_json's message carries the line/column of the offending token.
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn with_config<C, F>(args: &CommonArgs, f: F) -> Result<Outcome>
where
    C: DeserializeOwned + ConfigCommon,
    F: FnOnce(&C, &Path, u64) -> Result<Outcome>,
{
    let cfg: C = load_config(&args.config)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out().map(PathBuf::from))
        .ok_or_else(|| Error::Config("no output path: pass --out or set \"out\"".into()))?;
    let seed = args.seed.or(cfg.seed()).unwrap_or(0);
    f(&cfg, &out, seed)
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Invalid(_) | Error::OutOfRange(_) | Error::Config(_) | Error::Io(_) => 1,
        Error::NonFinite(_) | Error::Blowup { .. } => 3,
    }
}

/// Parses argv, runs the selected command, and returns the process exit
/// code (0 success, 1 config/validation, 2 failed certificate or falsified
/// inequality, 3 numerical failure).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (quiet, result) = match &cli.cmd {
        Cmd::Simulate(args) => {
            (args.quiet, with_config(args, |cfg: &SimulateConfig, out, _| run_simulate(cfg, out)))
        }
        Cmd::Certify(args) => {
            (args.quiet, with_config(args, |cfg: &CertifyConfig, out, _| run_certify(cfg, out)))
        }
        Cmd::Measure(margs) => (
            margs.common.quiet,
            with_config(&margs.common, |cfg: &MeasureConfig, out, seed| {
                run_measure(cfg, out, seed, margs.threads)
            }),
        ),
        Cmd::Telegraph(args) => (
            args.quiet,
            with_config(args, |cfg: &TelegraphConfig, out, _| run_telegraph(cfg, out)),
        ),
        Cmd::Memory(args) => {
            (args.quiet, with_config(args, |cfg: &MemoryConfig, out, _| run_memory(cfg, out)))
        }
    };
    match result {
        Ok(outcome) => {
            if !quiet {
                println!("{}", outcome.summary);
            }
            if outcome.claim_failed {
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
