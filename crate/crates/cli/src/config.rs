use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anew_core::operator::{pauli_string, swap};
use anew_core::states::{self, BellState};
use anew_core::witness::{presets, DecompositionFile, ObservableSpec, TermSpec};
use anew_core::{DensityMatrix, Error, LocalDecomposition, Operator, StateSpec, WitnessMap};
use clap::ValueEnum;
use serde::Serialize;

/// Failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotUnitary { .. }
            | Error::NotInvolution { .. }
            | Error::VanishingDenominator { .. }
            | Error::NotAccessible(_) => Self::precondition(e.to_string()),
            _ => Self::config(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1,
    Fig2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Evaluate on the density matrix.
    Full,
    /// Evaluate from exact expectation values of the measured terms.
    Restricted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Phi,
    P,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRange {
    pub axis: Axis,
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl ScanRange {
    pub fn grid(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.end
                } else {
                    self.start + (self.end - self.start) * i as f64 / last
                }
            })
            .collect()
    }
}

/// `axis:start:end:steps`; bounds accept forms such as `pi`, `2pi`, `-pi/2`, `0.5*pi`.
pub fn parse_scan(text: &str) -> CliResult<ScanRange> {
    let parts: Vec<&str> = text.split(':').collect();
    let [axis, start, end, steps] = parts.as_slice() else {
        return Err(CliError::config(format!(
            "--scan: expected axis:start:end:steps, got '{text}'"
        )));
    };
    let axis = match *axis {
        "phi" => Axis::Phi,
        "p" => Axis::P,
        other => {
            return Err(CliError::config(format!(
                "--scan: unknown axis '{other}' (use phi or p)"
            )))
        }
    };
    let steps: usize = steps
        .parse()
        .map_err(|_| CliError::config(format!("--scan: steps '{steps}' is not an integer")))?;
    if steps < 2 {
        return Err(CliError::config("--scan: steps must be at least 2"));
    }
    Ok(ScanRange {
        axis,
        start: parse_number(start)?,
        end: parse_number(end)?,
        steps,
    })
}

pub fn parse_number(text: &str) -> CliResult<f64> {
    let bad = || CliError::config(format!("cannot parse number '{text}'"));
    let t = text.trim();
    let Some(idx) = t.find("pi") else {
        return t.parse().map_err(|_| bad());
    };
    let coeff = t[..idx].trim_end_matches('*');
    let coeff = match coeff {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let rest = &t[idx + 2..];
    let divisor = match rest.strip_prefix('/') {
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
        None if rest.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(coeff * std::f64::consts::PI / divisor)
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessSource {
    /// File path or builtin name.
    pub source: String,
    pub decomposition: DecompositionFile,
}

pub struct Witness {
    pub source: WitnessSource,
    pub decomposition: LocalDecomposition,
    pub map: WitnessMap,
}

fn builtin_witness(name: &str) -> Option<LocalDecomposition> {
    match name {
        "w0" | "W0" => Some(presets::two_qubit()),
        "smolin" => Some(presets::smolin()),
        _ => None,
    }
}

/// Loads a witness file, falling back to the builtin names `w0` and `smolin`.
pub fn load_witness(spec: &str) -> CliResult<Witness> {
    let path = Path::new(spec);
    let (file, decomposition) = if path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("--witness {spec}: {e}")))?;
        let file = DecompositionFile::from_json(&text)
            .map_err(|e| CliError::config(format!("{spec}: {e}")))?;
        let d = file
            .to_decomposition()
            .map_err(|e| CliError::config(format!("{spec}: {e}")))?;
        (file, d)
    } else if let Some(d) = builtin_witness(spec) {
        let file = pauli_file(spec).unwrap_or_else(|| DecompositionFile::from_decomposition(&d));
        (file, d)
    } else {
        return Err(CliError::config(format!(
            "--witness: no such file or builtin '{spec}'"
        )));
    };
    let map = WitnessMap::from_witness(
        &decomposition.assemble(),
        decomposition.d_a(),
        decomposition.d_b(),
    )?;
    Ok(Witness {
        source: WitnessSource {
            source: spec.to_string(),
            decomposition: file,
        },
        decomposition,
        map,
    })
}

fn pauli_file(name: &str) -> Option<DecompositionFile> {
    let terms: &[(f64, &str, &str)] = match name {
        "w0" | "W0" => &[
            (0.25, "I", "I"),
            (0.25, "X", "X"),
            (0.25, "Y", "Y"),
            (0.25, "Z", "Z"),
        ],
        "smolin" => &[
            (0.0625, "II", "II"),
            (-0.0625, "XX", "XX"),
            (-0.0625, "YY", "YY"),
            (-0.0625, "ZZ", "ZZ"),
        ],
        _ => return None,
    };
    let dim = 1 << terms[0].1.len();
    Some(DecompositionFile {
        d_a: dim,
        d_b: dim,
        terms: terms
            .iter()
            .map(|&(coeff, a, b)| TermSpec {
                coeff,
                a: ObservableSpec::Pauli(a.into()),
                b: ObservableSpec::Pauli(b.into()),
            })
            .collect(),
    })
}

/// A JSON literal or a path to a JSON file.
pub fn parse_state(text: &str) -> CliResult<StateSpec> {
    let body = if Path::new(text).is_file() {
        fs::read_to_string(text).map_err(|e| CliError::config(format!("--state {text}: {e}")))?
    } else {
        text.to_string()
    };
    serde_json::from_str(&body).map_err(|e| CliError::config(format!("--state: {e}")))
}

pub fn build_state(spec: &StateSpec, dims: (usize, usize)) -> CliResult<DensityMatrix> {
    let rho = states::make(spec)?;
    if rho.dim() != dims.0 * dims.1 {
        return Err(CliError::config(format!(
            "--state: state has dimension {}, witness acts on {}x{}",
            rho.dim(),
            dims.0,
            dims.1
        )));
    }
    Ok(rho)
}

/// `swap` (alias `swap_AA'`), `identity`, a Pauli string, or a JSON matrix (literal or file).
pub fn parse_unitary(text: &str, d_a: usize) -> CliResult<Operator> {
    let t = text.trim();
    let op = match t {
        "swap" | "swap_AA'" | "swap_AA" | "SWAP" => swap(d_a),
        "identity" | "id" => Operator::identity(&[d_a, d_a]),
        _ if t.starts_with('[') || Path::new(t).is_file() => {
            let body = if t.starts_with('[') {
                t.to_string()
            } else {
                fs::read_to_string(t)
                    .map_err(|e| CliError::config(format!("--unitary {t}: {e}")))?
            };
            let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(&body)
                .map_err(|e| CliError::config(format!("--unitary: {e}")))?;
            Operator::from_rows(&rows).map_err(|e| CliError::config(format!("--unitary: {e}")))?
        }
        _ => pauli_string(t).map_err(|e| CliError::config(format!("--unitary '{t}': {e}")))?,
    };
    if op.dim() != d_a * d_a {
        return Err(CliError::config(format!(
            "--unitary: operator has dimension {}, expected {} on A⊗A′",
            op.dim(),
            d_a * d_a
        )));
    }
    Ok(op.with_dims(vec![d_a, d_a])?)
}

/// Defaults implied by a preset: witness, state, unitary, scan.
pub struct PresetDefaults {
    pub witness: &'static str,
    pub state: StateSpec,
    pub unitary: &'static str,
    pub scan: &'static str,
}

pub fn preset_defaults(preset: Option<Preset>) -> PresetDefaults {
    match preset {
        Some(Preset::Fig1) => PresetDefaults {
            witness: "w0",
            state: StateSpec::PhiFamily {
                phi: std::f64::consts::PI,
                weight: None,
            },
            unitary: "ZZ",
            scan: "phi:0:2pi:101",
        },
        Some(Preset::Fig2) => PresetDefaults {
            witness: "smolin",
            state: StateSpec::Smolin { p: 0.0 },
            unitary: "swap",
            scan: "p:0:1:101",
        },
        None => PresetDefaults {
            witness: "w0",
            state: StateSpec::Bell {
                which: BellState::PhiPlus,
            },
            unitary: "swap",
            scan: "phi:0:2pi:101",
        },
    }
}

/// Writes `text` to `out`, or to stdout.
pub fn emit(out: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::config(format!("--out {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
