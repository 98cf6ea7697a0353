//! Command bodies. Each takes a resolved configuration and returns the files
//! to write; nothing here touches the output directory.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::PathBuf;

use serde::Serialize;

use super::config::{
    ClassifyConfig, ContourConfig, EstimateConfig, FitConfig, InputConfig, ModelPaths, SimulateConfig, SweepConfig,
};
use super::manifest::Output;
use crate::classifier::{boundary_contour, ClassificationRule, ContourLevel, Label, RuleKind};
use crate::density::io::{load_model, to_json_string, ModelDocument};
use crate::density::{
    fit_mle, initial_guess, ModelFamily, NormalizationCheck, ParametricModel, TruncatedDensity, MIN_FIT_POINTS,
};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::geometry::LogPoint;
use crate::harness::{draw_mixture, mc_csv, mc_error_stats, sweep_csv, sweep_loss_vs_q, DensityPair, MixtureDraw};
use crate::ingest::{parse_csv, preprocess, ProcessedSample};
use crate::prevalence::{adaptive_classify, PrevalenceEstimate};
use crate::quadrature::QuadratureSpec;

/// Files, manifest ingredients and a one-line summary of a finished run. A
/// run can fail after producing partial outputs; `failure` then carries the
/// error to report once those are written.
pub struct Run {
    pub outputs: Vec<Output>,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub summary: String,
    pub failure: Option<Error>,
}

/// `(sample_id, reason)` per dropped record.
type Rejected = Vec<(String, String)>;

/// Samples in log space plus the dropped records.
fn load_samples(cfg: &InputConfig) -> Result<(Vec<ProcessedSample>, Rejected)> {
    if cfg.log_space {
        let mut columns = cfg.columns.clone();
        columns.reference = None;
        let records = parse_csv(&cfg.input, &columns)?;
        let samples = records
            .into_iter()
            .map(|r| ProcessedSample { sample_id: r.sample_id, label: r.label, point: LogPoint::new(r.mfi_a, r.mfi_b) })
            .collect();
        return Ok((samples, Vec::new()));
    }
    let records = parse_csv(&cfg.input, &cfg.columns)?;
    let out = preprocess(&records, &cfg.preprocess)?;
    let rejected = out.rejections.iter().map(|r| (r.sample_id.clone(), r.reason.to_string())).collect();
    Ok((out.samples, rejected))
}

fn rejection_csv(rejected: &[(String, String)]) -> String {
    let mut s = String::from("sample_id,reason\n");
    for (id, reason) in rejected {
        writeln!(s, "{id},{reason}").unwrap();
    }
    s
}

/// Model pair from files, or the built-in reference densities when both
/// paths are absent. Returns the files read.
fn load_pair(models: &ModelPaths) -> Result<(DensityPair, Vec<PathBuf>)> {
    match (&models.pos_model, &models.neg_model) {
        (Some(p), Some(n)) => Ok((DensityPair::new(load_model(p)?, load_model(n)?)?, vec![p.clone(), n.clone()])),
        (None, None) => {
            let (p, n) = fixtures::densities(&QuadratureSpec::default())?;
            Ok((DensityPair::new(p, n)?, Vec::new()))
        }
        _ => Err(Error::Config("give both model files or neither".into())),
    }
}

#[derive(Serialize)]
struct FitReport {
    family: ModelFamily,
    label: crate::ingest::SampleLabel,
    points: usize,
    used_points: usize,
    excluded_points: usize,
    log_likelihood: f64,
    init_log_likelihood: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
    normalization: NormalizationCheck,
    /// Share of the untruncated model's mass inside the domain.
    truncated_fraction: f64,
}

pub fn fit(cfg: &FitConfig) -> Result<Run> {
    cfg.validate()?;
    let (samples, rejected) = load_samples(&cfg.data)?;
    let label = cfg.fit_label();
    let points: Vec<LogPoint> = samples.iter().filter(|s| s.label == label).map(|s| s.point).collect();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::Precondition(format!(
            "{} usable {label} samples; fitting needs at least {MIN_FIT_POINTS}",
            points.len()
        )));
    }
    let init = initial_guess(&points, cfg.family, cfg.z_scale)?;
    let result = fit_mle(&points, &init, &cfg.fit)?;
    let density = TruncatedDensity::parametric(result.model, cfg.domain, &cfg.quad)?;
    let untruncated = match result.model {
        ParametricModel::Negative(_) => 1.0,
        ParametricModel::Positive(p) => p.z_scale,
    };
    let report = FitReport {
        family: cfg.family,
        label,
        points: points.len(),
        used_points: result.used_points,
        excluded_points: result.excluded_points,
        log_likelihood: result.log_likelihood,
        init_log_likelihood: result.init_log_likelihood,
        iterations: result.iterations,
        evaluations: result.evaluations,
        converged: result.converged,
        normalization: *density.normalization(),
        truncated_fraction: density.normalization().mass / untruncated,
    };
    Ok(Run {
        outputs: vec![
            Output::new("model.json", to_json_string(&ModelDocument::from_density(&density)?)?),
            Output::new("fit_report.json", to_json_string(&report)?),
            Output::new("rejections.csv", rejection_csv(&rejected)),
        ],
        seeds: vec![cfg.fit.seed],
        inputs: vec![cfg.data.input.clone()],
        summary: format!(
            "fitted {} model to {} points: log-likelihood {:.6}, {}",
            cfg.family,
            points.len(),
            result.log_likelihood,
            if result.converged { "converged" } else { "not converged" }
        ),
        failure: None,
    })
}

fn count_labels<'a>(labels: impl Iterator<Item = &'a Label>) -> BTreeMap<&'static str, usize> {
    let mut counts = BTreeMap::from([("holdout", 0), ("negative", 0), ("positive", 0)]);
    for l in labels {
        *counts.get_mut(l.as_str()).unwrap() += 1;
    }
    counts
}

fn counts_line(counts: &BTreeMap<&'static str, usize>, rejected: usize) -> String {
    format!(
        "positive: {}, negative: {}, holdout: {}, rejected: {}",
        counts["positive"], counts["negative"], counts["holdout"], rejected
    )
}

/// Splits samples into in-domain ones and rejections.
fn in_domain(
    samples: Vec<ProcessedSample>,
    rule: &ClassificationRule,
    rejected: &mut Vec<(String, String)>,
) -> Vec<ProcessedSample> {
    let d = rule.domain();
    samples
        .into_iter()
        .filter(|s| {
            let ok = d.contains(s.point);
            if !ok {
                rejected.push((s.sample_id.clone(), "outside model domain".into()));
            }
            ok
        })
        .collect()
}

fn labels_csv(rows: &[(String, Label, f64)]) -> String {
    let mut s = String::from("sample_id,label,score\n");
    for (id, label, score) in rows {
        writeln!(s, "{id},{label},{score:e}").unwrap();
    }
    s
}

#[derive(Serialize)]
struct ClassifySummary {
    counts: BTreeMap<&'static str, usize>,
    rejected: usize,
}

pub fn classify(cfg: &ClassifyConfig) -> Result<Run> {
    cfg.validate()?;
    let (pair, model_files) = load_pair(&cfg.models)?;
    let rule = ClassificationRule::new(cfg.rule, pair.pos, pair.neg, cfg.weights)?;
    let (samples, mut rejected) = load_samples(&cfg.data)?;
    let samples = in_domain(samples, &rule, &mut rejected);
    let rows = samples
        .iter()
        .map(|s| Ok((s.sample_id.clone(), rule.classify(s.point)?, rule.score(s.point)?)))
        .collect::<Result<Vec<_>>>()?;
    let counts = count_labels(rows.iter().map(|r| &r.1));
    let summary = counts_line(&counts, rejected.len());
    let mut inputs = vec![cfg.data.input.clone()];
    inputs.extend(model_files);
    Ok(Run {
        outputs: vec![
            Output::new("labels.csv", labels_csv(&rows)),
            Output::new("summary.json", to_json_string(&ClassifySummary { counts, rejected: rejected.len() })?),
            Output::new("rejections.csv", rejection_csv(&rejected)),
        ],
        seeds: Vec::new(),
        inputs,
        summary,
        failure: None,
    })
}

#[derive(Serialize)]
struct EstimateReport {
    /// The estimator's value after the last iteration, not the labeled
    /// positive share.
    p_hat: Option<f64>,
    converged: bool,
    iterations: usize,
    estimates: Vec<PrevalenceEstimate>,
    counts: BTreeMap<&'static str, usize>,
    rejected: usize,
    error: Option<String>,
}

pub fn estimate(cfg: &EstimateConfig) -> Result<Run> {
    cfg.validate()?;
    let (pair, model_files) = load_pair(&cfg.models)?;
    let probe = ClassificationRule::binary(cfg.adaptive.p_init, pair.pos.clone(), pair.neg.clone())?;
    let (samples, mut rejected) = load_samples(&cfg.data)?;
    let samples = in_domain(samples, &probe, &mut rejected);
    let ids: Vec<(String, LogPoint)> = samples.iter().map(|s| (s.sample_id.clone(), s.point)).collect();
    let mut inputs = vec![cfg.data.input.clone()];
    inputs.extend(model_files);
    let run = |report: &EstimateReport, labels: String, summary: String, failure| -> Result<Run> {
        Ok(Run {
            outputs: vec![
                Output::new("estimate.json", to_json_string(report)?),
                Output::new("labels.csv", labels),
                Output::new("rejections.csv", rejection_csv(&rejected)),
            ],
            seeds: Vec::new(),
            inputs: inputs.clone(),
            summary,
            failure,
        })
    };
    match adaptive_classify(&ids, pair.pos.clone(), pair.neg.clone(), &cfg.adaptive) {
        Ok(res) => {
            let rows: Vec<(String, Label, f64)> = res
                .labels
                .iter()
                .zip(&samples)
                .map(|((id, l), s)| Ok((id.clone(), *l, res.final_rule.score(s.point)?)))
                .collect::<Result<_>>()?;
            let counts = count_labels(res.labels.iter().map(|(_, l)| l));
            let summary = format!(
                "estimated prevalence {:.6} after {} iteration(s) ({}); {}",
                res.p_hat(),
                res.estimates.len(),
                if res.converged { "converged" } else { "not converged" },
                counts_line(&counts, rejected.len())
            );
            let report = EstimateReport {
                p_hat: Some(res.p_hat()),
                converged: res.converged,
                iterations: res.estimates.len(),
                estimates: res.estimates,
                counts,
                rejected: rejected.len(),
                error: None,
            };
            run(&report, labels_csv(&rows), summary, None)
        }
        Err(Error::AdaptiveAborted { completed, source }) => {
            let report = EstimateReport {
                p_hat: None,
                converged: false,
                iterations: completed.len(),
                estimates: completed.clone(),
                counts: count_labels(std::iter::empty()),
                rejected: rejected.len(),
                error: Some(source.to_string()),
            };
            run(
                &report,
                labels_csv(&[]),
                "estimation aborted".into(),
                Some(Error::AdaptiveAborted { completed, source }),
            )
        }
        Err(e) => Err(e),
    }
}

pub fn simulate(cfg: &SimulateConfig) -> Result<Run> {
    cfg.validate()?;
    let (pair, model_files) = load_pair(&cfg.models)?;
    let seed = cfg.experiment.base_seed;
    if let Some(emit) = cfg.emit {
        let draw = draw_mixture(&pair, emit.prevalence, emit.count, MixtureDraw::Bernoulli, seed)?;
        let mut s = String::from("id,rbd,s1,label\n");
        for (i, (r, truth)) in draw.points.iter().zip(&draw.truth).enumerate() {
            let label = if *truth { "positive" } else { "negative" };
            writeln!(s, "s{i},{},{},{label}", r.lx, r.ly).unwrap();
        }
        return Ok(Run {
            outputs: vec![Output::new("samples.csv", s)],
            seeds: vec![seed],
            inputs: model_files,
            summary: format!("wrote {} samples ({} positive) in log space", emit.count, draw.positives()),
            failure: None,
        });
    }
    let report = mc_error_stats(&cfg.experiment, &pair, cfg.known_prevalence)?;
    let failures: usize = report.cells.iter().map(|c| c.failures).sum();
    Ok(Run {
        outputs: vec![Output::new("mc.csv", mc_csv(&report)), Output::new("mc.json", to_json_string(&report)?)],
        seeds: vec![seed],
        inputs: model_files,
        summary: format!("{} cells, {} estimator failures", report.cells.len(), failures),
        failure: None,
    })
}

pub fn sweep(cfg: &SweepConfig) -> Result<Run> {
    cfg.validate()?;
    let (pair, model_files) = load_pair(&cfg.models)?;
    let report = sweep_loss_vs_q(cfg.true_p, &cfg.q_grid, &pair, &cfg.quad)?;
    Ok(Run {
        summary: format!("minimum loss at q = {}{}", report.argmin_q, if report.flat { " (flat curve)" } else { "" }),
        outputs: vec![
            Output::new("sweep.csv", sweep_csv(&report)),
            Output::new("sweep.json", to_json_string(&report)?),
        ],
        seeds: Vec::new(),
        inputs: model_files,
        failure: None,
    })
}

pub fn contour(cfg: &ContourConfig) -> Result<Run> {
    cfg.validate()?;
    let (pair, model_files) = load_pair(&cfg.models)?;
    let mut csv = String::from("polyline_id,x,y\n");
    let mut families = 0;
    let mut emit = |family: String, rule: &ClassificationRule, level: Option<ContourLevel>| -> Result<()> {
        let lines = boundary_contour(rule, cfg.resolution)?;
        families += 1;
        for (k, line) in lines.iter().filter(|l| level.is_none_or(|lv| l.level == lv)).enumerate() {
            for r in &line.points {
                writeln!(csv, "{family}/{k},{},{}", r.lx, r.ly).unwrap();
            }
        }
        Ok(())
    };
    for &p in &cfg.prevalences {
        let rule = ClassificationRule::binary(p, pair.pos.clone(), pair.neg.clone())?;
        emit(format!("p={p}"), &rule, None)?;
    }
    if let Some(i) = cfg.interval {
        let rule =
            ClassificationRule::new(RuleKind::Ternary(i), pair.pos.clone(), pair.neg.clone(), Default::default())?;
        emit("ternary_positive".into(), &rule, Some(ContourLevel::TernaryPositive))?;
        emit("ternary_negative".into(), &rule, Some(ContourLevel::TernaryNegative))?;
    }
    Ok(Run {
        outputs: vec![Output::new("contours.csv", csv)],
        seeds: Vec::new(),
        inputs: model_files,
        summary: format!("{families} polyline families"),
        failure: None,
    })
}
