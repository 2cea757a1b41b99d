//! Finite-shot simulation of the term-by-term measurements.
//!
//! Each term `A_i⊗B_i` is measured projectively `shots` times. Outcomes are
//! sampled from the Born distribution over its (degeneracy-grouped)
//! eigenvalues. Restricted-path quantities are then evaluated on the noisy
//! estimates, with delta-method error bars from central finite differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::accessibility::AccessibilityCertificate;
use crate::cj_map::WitnessMap;
use crate::error::{Error, Result};
use crate::nonlinear::{iterate_restricted, w_infinity_restricted, IterationConfig, LimitOutcome};
use crate::operator::DensityMatrix;
use crate::tolerances::FD_STEP;
use crate::witness::{linear_witness_value, ExpectationVector, LocalDecomposition, Provenance};

/// Eigenvalues closer than this are merged into one outcome.
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub estimates: ExpectationVector,
    pub stderr: Vec<f64>,
    pub shots: u64,
    pub seed: u64,
}

/// Born outcome distribution of every term for a fixed state.
#[derive(Clone, Debug)]
pub struct BornTable {
    outcomes: Vec<Vec<(f64, f64)>>,
}

impl BornTable {
    pub fn new(rho: &DensityMatrix, d: &LocalDecomposition) -> Result<Self> {
        if rho.dim() != d.d_a() * d.d_b() {
            return Err(Error::DimensionMismatch {
                context: "simulated state",
                expected: format!("{}", d.d_a() * d.d_b()),
                found: format!("{}", rho.dim()),
            });
        }
        let outcomes = d
            .term_operators()
            .iter()
            .map(|op| {
                let (values, vectors) = op.eigh()?;
                let mut groups: Vec<(f64, f64)> = Vec::new();
                for (k, &lambda) in values.iter().enumerate() {
                    let v = vectors.column(k);
                    let p = (v.adjoint() * rho.op().matrix() * v)[(0, 0)].re.max(0.0);
                    match groups.last_mut() {
                        Some((mu, q)) if (lambda - *mu).abs() < DEGENERACY_TOL => *q += p,
                        _ => groups.push((lambda, p)),
                    }
                }
                let total: f64 = groups.iter().map(|g| g.1).sum();
                for g in &mut groups {
                    g.1 /= total;
                }
                Ok(groups)
            })
            .collect::<Result<_>>()?;
        Ok(Self { outcomes })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Outcome values and probabilities of term `i`.
    pub fn outcomes(&self, i: usize) -> &[(f64, f64)] {
        &self.outcomes[i]
    }

    pub fn sample(&self, shots: u64, seed: u64) -> Result<MeasurementRecord> {
        if shots == 0 {
            return Err(Error::InvalidConfig("shots must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(self.len());
        let mut stderr = Vec::with_capacity(self.len());
        for groups in &self.outcomes {
            let counts = multinomial(&mut rng, shots, groups);
            let n = shots as f64;
            let mean = groups
                .iter()
                .zip(&counts)
                .map(|((mu, _), &c)| mu * c as f64)
                .sum::<f64>()
                / n;
            let var = if shots > 1 {
                let ss: f64 = groups
                    .iter()
                    .zip(&counts)
                    .map(|((mu, _), &c)| c as f64 * (mu - mean).powi(2))
                    .sum();
                ss / (n - 1.0)
            } else {
                0.0
            };
            values.push(mean);
            stderr.push((var / n).sqrt());
        }
        Ok(MeasurementRecord {
            estimates: ExpectationVector::new(values, Provenance::Simulated),
            stderr,
            shots,
            seed,
        })
    }
}

fn multinomial(rng: &mut ChaCha8Rng, shots: u64, groups: &[(f64, f64)]) -> Vec<u64> {
    let mut remaining = shots;
    let mut mass = 1.0;
    let mut counts = Vec::with_capacity(groups.len());
    for (k, &(_, p)) in groups.iter().enumerate() {
        let c = if k + 1 == groups.len() {
            remaining
        } else if remaining == 0 || mass <= 0.0 {
            0
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q)
                .expect("valid binomial")
                .sample(rng)
        };
        counts.push(c);
        remaining -= c;
        mass -= p;
    }
    counts
}

/// Simulated estimates of every `⟨A_i⊗B_i⟩`; deterministic in `seed`.
pub fn simulate_expectations(
    rho: &DensityMatrix,
    d: &LocalDecomposition,
    shots: u64,
    seed: u64,
) -> Result<MeasurementRecord> {
    BornTable::new(rho, d)?.sample(shots, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Propagated {
    pub w_values: Vec<f64>,
    pub w_stderr: Vec<f64>,
    pub w_infinity: Option<f64>,
    pub w_infinity_stderr: Option<f64>,
    pub diverges: Option<bool>,
}

fn perturbed(v: &ExpectationVector, i: usize, h: f64) -> ExpectationVector {
    let mut out = v.clone();
    out.values[i] += h;
    out
}

fn limit_value(
    v: &ExpectationVector,
    d: &LocalDecomposition,
    map: &WitnessMap,
    cfg: &IterationConfig,
    access: &AccessibilityCertificate,
) -> Option<LimitOutcome> {
    let u = match &cfg.unitaries {
        crate::nonlinear::UnitarySchedule::Constant(u) => u,
        crate::nonlinear::UnitarySchedule::Sequence(_) => return None,
    };
    w_infinity_restricted(v, d, map, u, access)
        .ok()
        .map(|l| l.outcome)
}

/// `w_n` on the estimates with delta-method standard errors.
///
/// The closed-form limit is included for a constant involutive `U`.
pub fn propagate(
    record: &MeasurementRecord,
    d: &LocalDecomposition,
    map: &WitnessMap,
    cfg: &IterationConfig,
    access: &AccessibilityCertificate,
) -> Result<Propagated> {
    let v = &record.estimates;
    let center = iterate_restricted(v, d, map, cfg, access)?;
    let limit = limit_value(v, d, map, cfg, access);
    let len = center.w_values.len();
    let mut var = vec![0.0; len];
    let mut limit_var = limit.and_then(|l| l.value()).map(|_| 0.0);
    for (i, &s) in record.stderr.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let plus = perturbed(v, i, FD_STEP);
        let minus = perturbed(v, i, -FD_STEP);
        let wp = iterate_restricted(&plus, d, map, cfg, access)?;
        let wm = iterate_restricted(&minus, d, map, cfg, access)?;
        for ((acc, a), b) in var.iter_mut().zip(&wp.w_values).zip(&wm.w_values) {
            *acc += ((a - b) / (2.0 * FD_STEP) * s).powi(2);
        }
        if let Some(acc) = limit_var.as_mut() {
            let lp = limit_value(&plus, d, map, cfg, access).and_then(|l| l.value());
            let lm = limit_value(&minus, d, map, cfg, access).and_then(|l| l.value());
            match (lp, lm) {
                (Some(a), Some(b)) => *acc += ((a - b) / (2.0 * FD_STEP) * s).powi(2),
                _ => limit_var = None,
            }
        }
    }
    Ok(Propagated {
        w_values: center.w_values,
        w_stderr: var.into_iter().map(f64::sqrt).collect(),
        w_infinity: limit.and_then(|l| l.value()),
        w_infinity_stderr: limit_var.map(f64::sqrt),
        diverges: limit.map(|l| l.diverges()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub w_linear: f64,
    pub w_min: f64,
    pub detected_linear: bool,
    pub detected_nonlinear: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionRates {
    pub linear_rate: f64,
    pub nonlinear_rate: f64,
    pub shots: u64,
    pub trials: usize,
    pub seed: u64,
    #[serde(skip)]
    pub outcomes: Vec<TrialOutcome>,
}

impl DetectionRates {
    /// Trials where the nonlinear indicator is at least the linear one.
    pub fn dominance_fraction(&self) -> f64 {
        let ok = self
            .outcomes
            .iter()
            .filter(|t| t.detected_nonlinear || !t.detected_linear)
            .count();
        ok as f64 / self.outcomes.len() as f64
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trial `t` in a run seeded with `seed`.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    splitmix64(seed ^ splitmix64(t as u64))
}

/// Fraction of simulated experiments in which the linear estimate, resp.
/// some `w_n` with `n ≤ n_max`, is negative. Both indicators of a trial are
/// computed from the same record.
#[allow(clippy::too_many_arguments)]
pub fn detection_rate(
    rho: &DensityMatrix,
    d: &LocalDecomposition,
    map: &WitnessMap,
    cfg: &IterationConfig,
    access: &AccessibilityCertificate,
    shots: u64,
    trials: usize,
    seed: u64,
) -> Result<DetectionRates> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let table = BornTable::new(rho, d)?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let record = table.sample(shots, trial_seed(seed, t))?;
            let w_linear = linear_witness_value(&record.estimates, d)?;
            let state = iterate_restricted(&record.estimates, d, map, cfg, access)?;
            let w_min = state.min_value();
            let detected_linear = w_linear < 0.0;
            Ok(TrialOutcome {
                w_linear,
                w_min,
                detected_linear,
                detected_nonlinear: detected_linear || w_min < 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rate = |f: fn(&TrialOutcome) -> bool| {
        outcomes.iter().filter(|t| f(t)).count() as f64 / trials as f64
    };
    Ok(DetectionRates {
        linear_rate: rate(|t| t.detected_linear),
        nonlinear_rate: rate(|t| t.detected_nonlinear),
        shots,
        trials,
        seed,
        outcomes,
    })
}
