//! Check execution, verdicts and the run manifest.

use super::config::{
    Check, CoefficientCheck, ConfigError, CorrectionCheck, CountingCheck, DirectionKind, ExponentCheck, IdentitiesCheck,
    Prepared, ProfileCheck, RapidDecayCheck, Scenario, TraceLeadingCheck,
};
use super::output::{pairs_csv, profile_csv, series_csv};
use crate::asymptotics::{
    diag_series, fit_power_law, fit_power_law_ln_stable, predict_diag_leading, predict_trace_leading,
    trace_prediction_total, trace_series, verify_correction_order, verify_nonperiod_decay, verify_profile,
    verify_rapid_decay, DiagSetup, ProfileDirection, SeriesPoint,
};
use crate::error::{LabError, Result};
use crate::kernels::{trace_ft, Tolerance};
use crate::model::PointM;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub scenario_digest: String,
    pub measured: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

struct Outcome {
    measured: f64,
    predicted: f64,
    tolerance: f64,
    pass: bool,
    details: serde_json::Value,
    artifacts: Vec<Artifact>,
}

fn resolved_ln(series: &[SeriesPoint]) -> Vec<(f64, f64)> {
    series.iter().filter(|p| p.result.resolved()).map(|p| (p.lambda, p.ln_abs())).collect()
}

fn setup<'a>(p: &'a Prepared, point: &'a PointM) -> DiagSetup<'a> {
    DiagSetup {
        model: &p.model,
        cutoff: &p.cutoff,
        beta: &p.scenario.beta,
        s0: &p.scenario.s0,
        point,
        tol: Tolerance::Relative(p.scenario.tol),
    }
}

fn evaluate(p: &Prepared, index: usize, check: &Check) -> Result<Outcome> {
    let sc = &p.scenario;
    let grid = sc.lambda_grid.values();
    let tag = format!("{:02}_{}", index, check.name());
    let csv = |suffix: &str, bytes: Vec<u8>| Artifact { name: format!("{tag}{suffix}.csv"), bytes };
    let (d, r) = (p.model.d as f64, p.model.r as f64);
    Ok(match check {
        Check::Exponent(ExponentCheck { point, expected, tolerance, stability_threshold }) => {
            let series = diag_series(&setup(p, &p.points[*point]), &grid)?;
            let fit = fit_power_law_ln_stable(&resolved_ln(&series), *stability_threshold)?;
            let want = expected.unwrap_or(d + 0.5 * (1.0 - r));
            Outcome {
                measured: fit.exponent,
                predicted: want,
                tolerance: *tolerance,
                pass: (fit.exponent - want).abs() <= *tolerance,
                details: json!({ "fit": fit }),
                artifacts: vec![csv("", series_csv(&series, None))],
            }
        }
        Check::Coefficient(CoefficientCheck { point, lambda, tolerance }) => {
            let x = &p.points[*point];
            let pred = predict_diag_leading(&p.model, x, &sc.s0, &sc.beta, &p.cutoff, &[], 0.0, 0)?;
            let series = diag_series(&setup(p, x), &[*lambda])?;
            let ratio = (series[0].ln_abs() - pred.magnitude_at(*lambda).ln()).exp();
            Outcome {
                measured: ratio,
                predicted: 1.0,
                tolerance: *tolerance,
                pass: (ratio - 1.0).abs() <= *tolerance,
                details: json!({
                    "lambda": lambda,
                    "leading_coefficient": pred.coefficient.re,
                    "leading_exponent": pred.exponent,
                }),
                artifacts: vec![csv("", series_csv(&series, None))],
            }
        }
        Check::CorrectionOrder(CorrectionCheck { point, expected, tolerance }) => {
            let rep = verify_correction_order(&setup(p, &p.points[*point]), &grid)?;
            Outcome {
                measured: rep.fit.exponent,
                predicted: *expected,
                tolerance: *tolerance,
                pass: (rep.fit.exponent - expected).abs() <= *tolerance,
                details: json!({ "fit": rep.fit }),
                artifacts: vec![csv("", pairs_csv(["lambda", "relative_deviation"], &rep.samples))],
            }
        }
        Check::Profile(ProfileCheck { point, direction, factor, h_grid, lambda, tolerance }) => {
            let dir = match direction {
                DirectionKind::Normal => ProfileDirection::Normal { factor: *factor },
                DirectionKind::FixedRotation => ProfileDirection::FixedRotation { factor: *factor },
            };
            let rep = verify_profile(&setup(p, &p.points[*point]), dir, h_grid, *lambda, *tolerance)?;
            Outcome {
                measured: rep.max_rel_error,
                predicted: 0.0,
                tolerance: *tolerance,
                pass: rep.pass,
                details: json!({ "lambda": lambda }),
                artifacts: vec![csv("", profile_csv(&rep.rows))],
            }
        }
        Check::RapidDecay(RapidDecayCheck { point, factor, h0, scale_d, delta }) => {
            let rep = verify_rapid_decay(&setup(p, &p.points[*point]), *factor, *h0, *scale_d, *delta, &grid)?;
            Outcome {
                measured: rep.fixed_fit.exponent,
                predicted: crate::asymptotics::DECAY_EXPONENT,
                tolerance: 0.0,
                pass: rep.pass,
                details: json!({
                    "fixed_fit": rep.fixed_fit,
                    "control_fit": rep.control_fit,
                    "scaled_slope": rep.scaled_slope,
                    "scaled_r_squared": rep.scaled_r_squared,
                }),
                artifacts: vec![
                    csv("_fixed", series_csv(&rep.fixed, None)),
                    csv("_scaled", pairs_csv(["lambda_pow_2delta", "ln_ratio"], &rep.scaled)),
                ],
            }
        }
        Check::TraceLeading(TraceLeadingCheck { lambda, tolerance, exponent_tolerance }) => {
            let preds = predict_trace_leading(&p.model, &sc.s0, &sc.beta, &p.cutoff)?;
            let tol = Tolerance::Absolute(sc.tol);
            let at = trace_ft(&p.model, &p.cutoff, &sc.beta, &sc.s0, *lambda, tol)?;
            let want = trace_prediction_total(&preds, *lambda);
            let ratio = at.value().norm() / want.norm();
            let series = trace_series(&p.model, &p.cutoff, &sc.beta, &sc.s0, &grid, tol)?;
            let fit = fit_power_law_ln_stable(&resolved_ln(&series), 0.05)?;
            let exponent = preds.iter().map(|t| t.prediction.exponent).fold(f64::NEG_INFINITY, f64::max);
            let components: Vec<serde_json::Value> = preds
                .iter()
                .map(|t| {
                    json!({
                        "poles": t.component.poles.iter().map(|q| q.map(|q| q.value())).collect::<Vec<_>>(),
                        "exponent": t.prediction.exponent,
                        "coefficient": [t.prediction.coefficient.re, t.prediction.coefficient.im],
                        "poincare": [t.poincare.re, t.poincare.im],
                        "integral": t.integral,
                    })
                })
                .collect();
            Outcome {
                measured: ratio,
                predicted: 1.0,
                tolerance: *tolerance,
                pass: (ratio - 1.0).abs() <= *tolerance && (fit.exponent - exponent).abs() <= *exponent_tolerance,
                details: json!({
                    "lambda": lambda,
                    "components": components,
                    "fit": fit,
                    "expected_exponent": exponent,
                    "exponent_tolerance": exponent_tolerance,
                }),
                artifacts: vec![csv("", series_csv(&series, None))],
            }
        }
        Check::NonperiodDecay(_) => {
            let rep = verify_nonperiod_decay(&p.model, &p.cutoff, &sc.beta, &sc.s0, &grid, Tolerance::Absolute(sc.tol))?;
            Outcome {
                measured: rep.resolved_fit.map_or(f64::NAN, |f| f.exponent),
                predicted: crate::asymptotics::DECAY_EXPONENT,
                tolerance: 0.0,
                pass: rep.pass,
                details: json!({
                    "resolved_samples": rep.resolved,
                    "resolved_fit": rep.resolved_fit,
                    "literal_fit": rep.literal_fit,
                    "envelope_anchor": rep.envelope_anchor,
                    "all_below_envelope": rep.below_envelope.iter().all(|b| *b),
                }),
                artifacts: vec![csv("", series_csv(&rep.samples, Some(("below_envelope", &rep.below_envelope))))],
            }
        }
        Check::Counting(CountingCheck { radii, tolerance }) => {
            radii.validate()?;
            let rows: Vec<(f64, f64)> =
                radii.values().iter().map(|&rad| (rad, p.model.count_eigenvalues(rad) as f64)).collect();
            let fit = fit_power_law(&rows)?;
            Outcome {
                measured: fit.exponent,
                predicted: d + 1.0,
                tolerance: *tolerance,
                pass: (fit.exponent - d - 1.0).abs() <= *tolerance,
                details: json!({ "fit": fit }),
                artifacts: vec![csv("", pairs_csv(["radius", "count"], &rows))],
            }
        }
        Check::Identities(IdentitiesCheck { levels, lambda, tolerance }) => {
            let (norm_err, period_err, s0) = identities(p, *levels, *lambda)?;
            let worst = norm_err.max(period_err);
            Outcome {
                measured: worst,
                predicted: 0.0,
                tolerance: *tolerance,
                pass: worst <= *tolerance,
                details: json!({
                    "normalization_rel_error": norm_err,
                    "period_rel_error": period_err,
                    "period_s0": s0,
                }),
                artifacts: vec![],
            }
        }
    })
}

/// Worst relative errors of the level normalization and of the full-period identity.
fn identities(p: &Prepared, levels: u64, lambda: f64) -> Result<(f64, f64, Vec<f64>)> {
    let model = &p.model;
    let mut rng = StdRng::seed_from_u64(p.scenario.seed);
    let point = PointM::new((0..model.d).map(|_| rng.gen_range(0.05..0.95)).collect())?;
    let mut norm_err: f64 = 0.0;
    for level in 0..=levels {
        let brute = model.level_diagonal_sum_brute(level, &point)?;
        norm_err = norm_err.max((brute / model.level_diagonal_sum(level) - 1.0).abs());
    }
    // an element acting trivially on every eigenvalue: 2 pi m on factors, 2 pi m / c on constants
    let s0: Vec<f64> = (0..model.r)
        .map(|i| {
            let m = rng.gen_range(-2i32..=2) as f64;
            if i < model.d {
                2.0 * PI * m
            } else {
                2.0 * PI * m / model.constants()[i - model.d]
            }
        })
        .collect();
    let tol = Tolerance::Absolute(p.scenario.tol);
    let sc = &p.scenario;
    let at = trace_ft(model, &p.cutoff, &sc.beta, &s0, lambda, tol)?.value();
    let zero = trace_ft(model, &p.cutoff, &sc.beta, &vec![0.0; model.r], lambda, tol)?.value();
    let phase = crate::special::phase_mod_2pi(&sc.beta.iter().map(|b| lambda * b).collect::<Vec<_>>(), &s0);
    let want = zero * Complex64::from_polar(1.0, -phase);
    Ok((norm_err, (at - want).norm() / zero.norm(), s0))
}

/// Runs every check in config order. Computation errors fail the check and
/// are recorded in its details.
pub fn run_checks(p: &Prepared) -> (Vec<Verdict>, Vec<Artifact>) {
    let digest = p.scenario.digest();
    let mut verdicts = Vec::new();
    let mut artifacts = Vec::new();
    for (i, check) in p.scenario.checks.iter().enumerate() {
        let verdict = match evaluate(p, i, check) {
            Ok(o) => {
                artifacts.extend(o.artifacts);
                Verdict {
                    name: check.name().to_string(),
                    scenario_digest: digest.clone(),
                    measured: o.measured,
                    predicted: o.predicted,
                    tolerance: o.tolerance,
                    pass: o.pass,
                    details: o.details,
                }
            }
            Err(e) => Verdict {
                name: check.name().to_string(),
                scenario_digest: digest.clone(),
                measured: f64::NAN,
                predicted: f64::NAN,
                tolerance: f64::NAN,
                pass: false,
                details: json!({ "error": e.to_string() }),
            },
        };
        verdicts.push(verdict);
    }
    (verdicts, artifacts)
}

pub fn verdicts_json(digest: &str, verdicts: &[Verdict]) -> Vec<u8> {
    let doc = json!({ "schema_version": SCHEMA_VERSION, "scenario_digest": digest, "verdicts": verdicts });
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("verdicts serialize");
    bytes.push(b'\n');
    bytes
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_path: String,
    pub config_digest: String,
    pub config_file_sha256: String,
    pub files: Vec<FileEntry>,
    pub versions: serde_json::Value,
    pub threads: usize,
    /// Not covered by the determinism contract.
    pub wall_clock_seconds: f64,
    pub verdicts: Vec<Verdict>,
}

impl RunManifest {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Lab(#[from] LabError),
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> std::result::Result<FileEntry, RunError> {
    let path: PathBuf = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    Ok(FileEntry { path: name.to_string(), sha256: sha_hex(bytes), bytes: bytes.len() as u64 })
}

/// Parses the config, runs its checks and writes the CSV series,
/// `verdicts.json` and `manifest.json` into `out_dir`.
pub fn run(config_path: &Path, out_dir: &Path, tol: Option<f64>) -> std::result::Result<RunManifest, RunError> {
    let started = Instant::now();
    let raw = std::fs::read(config_path)
        .map_err(|e| ConfigError::Io { path: config_path.display().to_string(), message: e.to_string() })?;
    let text = String::from_utf8(raw.clone())
        .map_err(|e| ConfigError::Io { path: config_path.display().to_string(), message: e.to_string() })?;
    let scenario = Scenario::from_json(&text)?;
    let prepared = scenario.prepare(tol)?;
    std::fs::create_dir_all(out_dir).map_err(|e| RunError::Io(format!("{}: {e}", out_dir.display())))?;

    let (verdicts, artifacts) = run_checks(&prepared);
    let digest = prepared.scenario.digest();
    let mut files = Vec::new();
    for a in &artifacts {
        files.push(write_file(out_dir, &a.name, &a.bytes)?);
    }
    files.push(write_file(out_dir, "verdicts.json", &verdicts_json(&digest, &verdicts))?);

    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        config_path: config_path.display().to_string(),
        config_digest: digest,
        config_file_sha256: sha_hex(&raw),
        files,
        versions: json!({ "trace_lab": env!("CARGO_PKG_VERSION"), "verdict_schema": SCHEMA_VERSION }),
        threads: rayon::current_num_threads(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        verdicts,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_file(out_dir, "manifest.json", &bytes)?;
    Ok(manifest)
}
