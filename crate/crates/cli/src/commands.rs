use std::path::PathBuf;

use anew_core::accessibility::check_sufficient;
use anew_core::nonlinear::w_infinity;
use anew_core::states::white_noise_mix;
use anew_core::stats::{detection_rate, propagate, simulate_expectations};
use anew_core::tolerances::TOL_UNITARY;
use anew_core::witness::expectation_vector;
use anew_core::{
    check_analytic, iterate, iterate_restricted, w_infinity_restricted, AccessibilityCertificate,
    AnalyticLimit, DensityMatrix, IterationConfig, IterationMode, IterationState, LimitOutcome,
    Operator, StateSpec, Verdict,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    build_state, emit, load_witness, parse_scan, parse_state, parse_unitary, preset_defaults, Axis,
    CliError, CliResult, Format, Mode, Preset, ScanRange, Witness, WitnessSource,
};
use crate::Common;

/// Everything a run used, defaults included.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedConfig {
    pub command: &'static str,
    pub preset: Option<Preset>,
    pub witness: WitnessSource,
    pub state: StateSpec,
    pub unitary: String,
    pub unitary_matrix: Vec<Vec<[f64; 2]>>,
    pub n: usize,
    pub mode: Mode,
    pub format: Format,
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_analytic: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sufficient: Option<bool>,
}

struct Setup {
    witness: Witness,
    unitary: Operator,
    config: ResolvedConfig,
}

fn matrix_rows(op: &Operator) -> Vec<Vec<[f64; 2]>> {
    let m = op.matrix();
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

fn setup(
    common: &Common,
    command: &'static str,
    default_format: Format,
    state: Option<StateSpec>,
) -> CliResult<Setup> {
    let defaults = preset_defaults(common.preset);
    let witness = load_witness(common.witness.as_deref().unwrap_or(defaults.witness))?;
    let unitary_spec = common
        .unitary
        .clone()
        .unwrap_or_else(|| defaults.unitary.to_string());
    let unitary = parse_unitary(&unitary_spec, witness.decomposition.d_a())?;
    let state = match state {
        Some(s) => s,
        None => match &common.state {
            Some(text) => parse_state(text)?,
            None => defaults.state,
        },
    };
    if common.n == 0 {
        return Err(CliError::config("--n must be at least 1"));
    }
    let config = ResolvedConfig {
        command,
        preset: common.preset,
        witness: witness.source.clone(),
        state,
        unitary_matrix: matrix_rows(&unitary),
        unitary: unitary_spec,
        n: common.n,
        mode: common.mode,
        format: common.format.unwrap_or(default_format),
        out: common.out.clone(),
        scan: None,
        shots: None,
        trials: None,
        seed: None,
        skip_analytic: None,
        sufficient: None,
    };
    Ok(Setup {
        witness,
        unitary,
        config,
    })
}

fn is_involution(u: &Operator) -> bool {
    u.involution_deviation() <= TOL_UNITARY
}

/// The analytic certificate when `U² = 1`, the algebra certificate otherwise.
fn certificate_for(
    w: &Witness,
    u: &Operator,
    sufficient: bool,
) -> CliResult<AccessibilityCertificate> {
    let cert = if sufficient || !is_involution(u) {
        check_sufficient(&w.decomposition, &w.map, u)?
    } else {
        check_analytic(&w.decomposition, &w.map, u)?
    };
    Ok(cert)
}

struct Point {
    state: IterationState,
    limit: Option<AnalyticLimit>,
}

impl Point {
    fn detected_linear(&self) -> bool {
        self.state.linear_value() < 0.0
    }

    fn detected_nonlinear(&self) -> bool {
        self.detected_linear()
            || self.state.detected()
            || self.limit.is_some_and(|l| l.outcome.detected())
    }
}

fn evaluate(
    s: &Setup,
    rho: &DensityMatrix,
    cert: &AccessibilityCertificate,
    analytic: bool,
) -> CliResult<Point> {
    let w = &s.witness;
    let cfg = IterationConfig::constant(s.unitary.clone(), s.config.n);
    let point = match s.config.mode {
        Mode::Full => Point {
            state: iterate(rho, &w.map, &cfg)?,
            limit: if analytic {
                Some(w_infinity(rho, &w.map, &s.unitary)?)
            } else {
                None
            },
        },
        Mode::Restricted => {
            let v = expectation_vector(rho, &w.decomposition)?;
            let cfg = cfg.with_mode(IterationMode::RestrictedData);
            Point {
                state: iterate_restricted(&v, &w.decomposition, &w.map, &cfg, cert)?,
                limit: if analytic {
                    Some(w_infinity_restricted(
                        &v,
                        &w.decomposition,
                        &w.map,
                        &s.unitary,
                        cert,
                    )?)
                } else {
                    None
                },
            }
        }
    };
    Ok(point)
}

fn require_involution(u: &Operator) -> CliResult<()> {
    if !is_involution(u) {
        return Err(CliError::precondition(format!(
            "the closed-form limit needs U² = 1 (deviation {:.3e}); pass --skip-analytic to iterate only",
            u.involution_deviation()
        )));
    }
    Ok(())
}

fn to_json(value: &impl Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

/// CSV goes to `out` (config to a sidecar) or stdout (config to stderr).
fn emit_csv(config: &ResolvedConfig, csv: &str) -> CliResult<()> {
    emit(config.out.as_ref(), csv)?;
    let cfg = to_json(config);
    match &config.out {
        Some(path) => {
            let mut sidecar = path.clone().into_os_string();
            sidecar.push(".config.json");
            emit(Some(&PathBuf::from(sidecar)), &cfg)
        }
        None => {
            eprint!("{cfg}");
            Ok(())
        }
    }
}

fn json_only(config: &ResolvedConfig) -> CliResult<()> {
    if config.format == Format::Csv {
        return Err(CliError::config(format!(
            "{} emits JSON only",
            config.command
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalReport<'a> {
    config: &'a ResolvedConfig,
    w_values: &'a [f64],
    c_values: &'a [f64],
    w_linear: f64,
    w_nl_first: f64,
    kappa: f64,
    kappa_inv: f64,
    abs_k: f64,
    abs_c: f64,
    abs_d: f64,
    kappa_abs_k: f64,
    limit: Option<LimitOutcome>,
    w_infinity: Option<f64>,
    diverges: Option<bool>,
    detected_linear: bool,
    detected_nonlinear: bool,
    verdict: Verdict,
}

pub fn eval(common: &Common, skip_analytic: bool) -> CliResult<u8> {
    let mut s = setup(common, "eval", Format::Json, None)?;
    s.config.skip_analytic = Some(skip_analytic);
    if !skip_analytic {
        require_involution(&s.unitary)?;
    }
    let w = &s.witness;
    let rho = build_state(
        &s.config.state,
        (w.decomposition.d_a(), w.decomposition.d_b()),
    )?;
    let cert = certificate_for(w, &s.unitary, false)?;
    let point = evaluate(&s, &rho, &cert, !skip_analytic)?;
    let st = &point.state;
    match s.config.format {
        Format::Json => {
            let report = EvalReport {
                config: &s.config,
                w_values: &st.w_values,
                c_values: &st.c_values,
                w_linear: st.linear_value(),
                w_nl_first: st.w_values[1],
                kappa: st.kappa(),
                kappa_inv: st.kappa_inv,
                abs_k: st.k_value.norm(),
                abs_c: st.c_value.norm(),
                abs_d: st.d_value.norm(),
                kappa_abs_k: st.kappa_abs_k(),
                limit: point.limit.map(|l| l.outcome),
                w_infinity: point.limit.and_then(|l| l.outcome.value()),
                diverges: point.limit.map(|l| l.outcome.diverges()),
                detected_linear: point.detected_linear(),
                detected_nonlinear: point.detected_nonlinear(),
                verdict: cert.verdict,
            };
            emit(s.config.out.as_ref(), &to_json(&report))?;
        }
        Format::Csv => {
            let mut csv = String::from("n,w\n");
            for (n, w) in st.w_values.iter().enumerate() {
                csv.push_str(&format!("{n},{w}\n"));
            }
            emit_csv(&s.config, &csv)?;
        }
    }
    Ok(0)
}

#[derive(Clone, Copy, Debug, Serialize)]
struct ScanRow {
    param: f64,
    w_linear: f64,
    w_1: f64,
    w_inf: Option<f64>,
    diverged: bool,
    detected_linear: bool,
    detected_nonlinear: bool,
}

impl ScanRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}\n",
            self.param,
            self.w_linear,
            self.w_1,
            self.w_inf.map(|v| v.to_string()).unwrap_or_default(),
            u8::from(self.diverged),
            u8::from(self.detected_linear),
            u8::from(self.detected_nonlinear),
        )
    }
}

#[derive(Serialize)]
struct ScanReport<'a> {
    config: &'a ResolvedConfig,
    rows: &'a [ScanRow],
}

fn scan_state(range: &ScanRange, base: &StateSpec, value: f64) -> CliResult<DensityMatrix> {
    let spec = match (range.axis, base) {
        (Axis::Phi, StateSpec::PhiFamily { weight, .. }) => StateSpec::PhiFamily {
            phi: value,
            weight: *weight,
        },
        (Axis::Phi, _) => return Err(CliError::config("--scan phi needs a phi_family state")),
        (Axis::P, StateSpec::Smolin { .. }) => StateSpec::Smolin { p: value },
        (Axis::P, other) => return Ok(white_noise_mix(&anew_core::states::make(other)?, value)?),
    };
    Ok(anew_core::states::make(&spec)?)
}

pub const SCAN_HEADER: &str =
    "param,w_linear,w_1,w_inf,diverged,detected_linear,detected_nonlinear\n";

pub fn scan(common: &Common, scan: Option<&str>) -> CliResult<u8> {
    let defaults = preset_defaults(common.preset);
    let range = parse_scan(scan.unwrap_or(defaults.scan))?;
    let base = match (&common.state, range.axis) {
        (Some(text), _) => parse_state(text)?,
        (None, Axis::Phi) if common.preset.is_none() => StateSpec::PhiFamily {
            phi: std::f64::consts::PI,
            weight: None,
        },
        (None, _) => defaults.state,
    };
    let mut s = setup(common, "scan", Format::Csv, Some(base))?;
    s.config.scan = Some(range.clone());
    require_involution(&s.unitary)?;
    let cert = certificate_for(&s.witness, &s.unitary, false)?;
    let dims = (s.witness.decomposition.d_a(), s.witness.decomposition.d_b());
    let rows = range
        .grid()
        .into_par_iter()
        .map(|value| {
            let rho = scan_state(&range, &s.config.state, value)?;
            if rho.dim() != dims.0 * dims.1 {
                return Err(CliError::config(format!(
                    "--state: state has dimension {}, witness acts on {}x{}",
                    rho.dim(),
                    dims.0,
                    dims.1
                )));
            }
            let point = evaluate(&s, &rho, &cert, true)?;
            let limit = point.limit.expect("analytic limit requested");
            Ok(ScanRow {
                param: value,
                w_linear: point.state.linear_value(),
                w_1: point.state.w_values[1],
                w_inf: limit.outcome.value(),
                diverged: limit.outcome.diverges(),
                detected_linear: point.detected_linear(),
                detected_nonlinear: point.detected_linear() || limit.outcome.detected(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    match s.config.format {
        Format::Csv => {
            let mut csv = String::from(SCAN_HEADER);
            rows.iter().for_each(|r| csv.push_str(&r.csv()));
            emit_csv(&s.config, &csv)?;
        }
        Format::Json => emit(
            s.config.out.as_ref(),
            &to_json(&ScanReport {
                config: &s.config,
                rows: &rows,
            }),
        )?,
    }
    Ok(0)
}

#[derive(Serialize)]
struct AccessReport<'a> {
    config: &'a ResolvedConfig,
    certificate: &'a AccessibilityCertificate,
}

pub fn check_access(common: &Common, sufficient: bool) -> CliResult<u8> {
    let mut s = setup(common, "check-access", Format::Json, None)?;
    s.config.sufficient = Some(sufficient);
    json_only(&s.config)?;
    let cert = certificate_for(&s.witness, &s.unitary, sufficient)?;
    emit(
        s.config.out.as_ref(),
        &to_json(&AccessReport {
            config: &s.config,
            certificate: &cert,
        }),
    )?;
    Ok(if cert.verdict.is_analytic() { 0 } else { 4 })
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    config: &'a ResolvedConfig,
    seed: u64,
    shots: u64,
    trials: usize,
    verdict: Verdict,
    estimates: &'a [f64],
    estimate_stderr: &'a [f64],
    w_values: &'a [f64],
    w_stderr: &'a [f64],
    w_infinity: Option<f64>,
    w_infinity_stderr: Option<f64>,
    diverges: Option<bool>,
    significance: Option<f64>,
    linear_rate: f64,
    nonlinear_rate: f64,
    dominance_fraction: f64,
}

pub fn simulate(common: &Common, shots: u64, trials: usize, seed: u64) -> CliResult<u8> {
    let mut s = setup(common, "simulate", Format::Json, None)?;
    s.config.shots = Some(shots);
    s.config.trials = Some(trials);
    s.config.seed = Some(seed);
    json_only(&s.config)?;
    if shots == 0 || trials == 0 {
        return Err(CliError::config("--shots and --trials must be at least 1"));
    }
    let w = &s.witness;
    let rho = build_state(
        &s.config.state,
        (w.decomposition.d_a(), w.decomposition.d_b()),
    )?;
    let cert = certificate_for(w, &s.unitary, false)?;
    if !cert.verdict.is_analytic() {
        return Err(CliError::precondition(format!(
            "configuration is not certified accessible (worst residual {:.3e})",
            cert.worst_residual()
        )));
    }
    let cfg = IterationConfig::constant(s.unitary.clone(), s.config.n)
        .with_mode(IterationMode::RestrictedData);
    let record = simulate_expectations(&rho, &w.decomposition, shots, seed)?;
    let propagated = propagate(&record, &w.decomposition, &w.map, &cfg, &cert)?;
    let rates = detection_rate(
        &rho,
        &w.decomposition,
        &w.map,
        &cfg,
        &cert,
        shots,
        trials,
        seed,
    )?;
    let significance = match (propagated.w_infinity, propagated.w_infinity_stderr) {
        (Some(v), Some(e)) if e > 0.0 => Some(v.abs() / e),
        _ => None,
    };
    let report = SimulateReport {
        config: &s.config,
        seed,
        shots,
        trials,
        verdict: cert.verdict,
        estimates: &record.estimates.values,
        estimate_stderr: &record.stderr,
        w_values: &propagated.w_values,
        w_stderr: &propagated.w_stderr,
        w_infinity: propagated.w_infinity,
        w_infinity_stderr: propagated.w_infinity_stderr,
        diverges: propagated.diverges,
        significance,
        linear_rate: rates.linear_rate,
        nonlinear_rate: rates.nonlinear_rate,
        dominance_fraction: rates.dominance_fraction(),
    };
    emit(s.config.out.as_ref(), &to_json(&report))?;
    Ok(0)
}
