//! Scenario execution. Items are evaluated in config order; the heavy inner
//! loops (grid scans, trials) parallelize through the worker pool, which the
//! `--jobs` flag caps. Report assembly is single-threaded and deterministic.

use loewner_core::bounds::{
    affine_bound, difference_bound, fundamental_bound, ratio_bound, BoundCertificate, CertConfig,
    CertScenario, EnvelopeSpec, MapAssignment, OperatorFamily, RatioSign, WeightGrid,
};
use loewner_core::envelope::{
    fit_envelopes_with_log, verify_envelope, EnvelopePair, FitConfig, LinearEnvelope,
    SigmoidCombination, VerifyConfig,
};
use loewner_core::spectral::IntervalBox;
use loewner_core::tails::{
    mc_tail_check, EnsembleSpec, TailFunctionSpec, TailQuery, TailStatistic,
};
use loewner_core::wbound::{
    domination_check, scaling_check, verify_w_bound, w_bound_constant, WBoundSpec,
};
use loewner_core::CoreError;

use crate::catalog;
use crate::config::{
    BoundRequest, ConfigError, EnvelopeChoice, OperatorSource, RatioSignSpec, ScenarioConfig,
    TailStatisticSpec,
};
use crate::report::{CertificateRecord, RunReport, RunResults, ToolInfo};

pub struct Overrides {
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub trials: Option<usize>,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(CoreError),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Core(e)
    }
}

pub struct Outcome {
    pub report: RunReport,
    pub summary: String,
}

fn region_from(pairs: &[[f64; 2]]) -> Result<IntervalBox, CoreError> {
    IntervalBox::new(pairs.iter().map(|p| (p[0], p[1])).collect())
}

pub fn execute(
    config: ScenarioConfig,
    seed: u64,
    overrides: &Overrides,
) -> Result<Outcome, RunError> {
    let (results, failures, rows) = match (
        &config.body.fit_envelope,
        &config.body.certify,
        &config.body.wbound,
        &config.body.tails,
    ) {
        (Some(s), _, _, _) => run_fit(s, seed, overrides, &config)?,
        (_, Some(s), _, _) => run_certify(s, seed, overrides, &config)?,
        (_, _, Some(s), _) => run_wbound(s, seed, overrides)?,
        (_, _, _, Some(s)) => run_tails(s, seed, overrides)?,
        _ => unreachable!("load_config enforces exactly one section"),
    };
    let status = if failures.is_empty() { "pass" } else { "fail" };
    let report = RunReport {
        schema_version: crate::config::SCHEMA_VERSION,
        tool: ToolInfo::current(),
        master_seed: seed,
        scenario: config,
        results,
        status: status.into(),
        failures,
    };
    let summary = crate::report::summary_table(&rows);
    Ok(Outcome { report, summary })
}

type RunParts = (RunResults, Vec<String>, Vec<(String, String, String)>);

fn run_fit(
    s: &crate::config::FitEnvelopeScenario,
    seed: u64,
    overrides: &Overrides,
    config: &ScenarioConfig,
) -> Result<RunParts, RunError> {
    let region = region_from(&s.region)?;
    let f = s.function.build(region.n_axes())?;
    let mut fit_cfg = FitConfig { seed, ..FitConfig::default() };
    if let Some(g) = overrides.grid.or(s.grid_per_axis) {
        fit_cfg.grid_per_axis = g;
    }
    if let Some(cap) = s.n_cap {
        fit_cfg.n_cap = cap;
    }
    let (pair, schedule) = fit_envelopes_with_log(|x| f(x), &region, s.epsilon, &fit_cfg)?;

    let verify_grid = s.verify_grid.unwrap_or(2 * (pair.verification_grid - 1) + 1);
    let mut verify_cfg = VerifyConfig::default();
    if let Some(tol) = config.tolerances.side_tol {
        verify_cfg.side_tol = tol;
    }
    let verification = verify_envelope(|x| f(x), &pair, verify_grid, &verify_cfg)?;

    for (path, combo) in [(&s.save_lower, &pair.lower), (&s.save_upper, &pair.upper)] {
        if let Some(path) = path {
            let text = serde_json::to_string_pretty(combo)
                .map_err(|e| ConfigError(format!("serialize envelope: {e}")))?;
            std::fs::write(path, text + "\n")
                .map_err(|e| ConfigError(format!("cannot write {path}: {e}")))?;
        }
    }

    let mut failures = Vec::new();
    if !verification.one_sided_violations.is_empty() {
        failures.push(format!(
            "envelope one-sidedness violated at {} grid points (side_tol {:.1e})",
            verification.one_sided_violations.len(),
            verify_cfg.side_tol
        ));
    }
    let rows = vec![(
        "fit-envelope".to_string(),
        if failures.is_empty() { "pass" } else { "FAIL" }.to_string(),
        format!(
            "gaps (upper {:.3e}, lower {:.3e}) <= epsilon {:.3e}; verified on {} points/axis",
            pair.achieved_gap_upper, pair.achieved_gap_lower, pair.epsilon, verify_grid
        ),
    )];
    Ok((RunResults::FitEnvelope { pair, verification, schedule }, failures, rows))
}

fn load_envelope_files(
    lower: &str,
    upper: &str,
    epsilon: f64,
    region: &IntervalBox,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<EnvelopePair, RunError> {
    let load = |path: &str| -> Result<SigmoidCombination, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {path}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{path}: {e}")))
    };
    let pair = EnvelopePair {
        lower: load(lower)?,
        upper: load(upper)?,
        epsilon,
        region: region.clone(),
        verification_grid: 65,
        achieved_gap_lower: f64::NAN,
        achieved_gap_upper: f64::NAN,
    };
    let report = verify_envelope(f, &pair, 65, &VerifyConfig::default())?;
    if !report.one_sided_violations.is_empty() {
        let worst = report
            .one_sided_violations
            .iter()
            .map(|v| v.amount)
            .fold(0.0f64, f64::max);
        return Err(RunError::Core(CoreError::Positivity {
            what: "loaded envelope one-sidedness".into(),
            min_eig: -worst,
        }));
    }
    let mut pair = pair;
    pair.achieved_gap_upper = report.max_upper_gap;
    pair.achieved_gap_lower = report.max_lower_gap;
    Ok(pair)
}

fn run_certify(
    s: &crate::config::CertifyScenario,
    seed: u64,
    overrides: &Overrides,
    config: &ScenarioConfig,
) -> Result<RunParts, RunError> {
    let region = region_from(&s.region)?;
    let n = region.n_axes();
    let f = s.function.build(n)?;
    let g = s.g.build()?;
    let weights =
        WeightGrid::new(s.weights.clone()).map_err(|e| ConfigError(e.to_string()))?;

    let family = match &s.operators {
        OperatorSource::Sampled { dim, counts, commuting } => {
            let ens = EnsembleSpec {
                dim: *dim,
                boxes: s.region.iter().map(|p| (p[0], p[1])).collect(),
                counts: counts.clone(),
                seed: seed ^ 0x6f7073,
                commuting: *commuting,
            };
            loewner_core::tails::sample_ensemble(&ens)?
        }
        OperatorSource::Files { axes } => {
            let mut ops = Vec::with_capacity(axes.len());
            for axis in axes {
                let mut row = Vec::with_capacity(axis.len());
                for path in axis {
                    row.push(crate::config::load_operator(path)?);
                }
                ops.push(row);
            }
            OperatorFamily::new(ops, region.clone(), 1e-8, 1e-8)?
        }
    };

    let map = s.map.build(family.dim(), seed)?;
    let maps = MapAssignment::Shared(map);

    let f_ref: &(dyn Fn(&[f64]) -> f64 + Sync) = &*f;
    let envelope = match &s.envelope {
        EnvelopeChoice::Linear { a, b, c, d } => EnvelopeSpec::Linear(LinearEnvelope {
            a: a.clone(),
            b: *b,
            c: c.clone(),
            d: *d,
        }),
        EnvelopeChoice::Fit { epsilon, grid_per_axis, n_cap } => {
            let mut fit_cfg = FitConfig { seed: seed ^ 0x656e76, ..FitConfig::default() };
            if let Some(gp) = grid_per_axis.or(overrides.grid) {
                fit_cfg.grid_per_axis = gp;
            }
            if let Some(cap) = n_cap {
                fit_cfg.n_cap = *cap;
            }
            let (pair, _) =
                fit_envelopes_with_log(|x| f_ref(x), &region, *epsilon, &fit_cfg)?;
            EnvelopeSpec::Sigmoid(pair)
        }
        EnvelopeChoice::Files { lower, upper, epsilon } => {
            EnvelopeSpec::Sigmoid(load_envelope_files(lower, upper, *epsilon, &region, f_ref)?)
        }
    };

    let mut cert_cfg = CertConfig::default();
    if let Some(tol) = overrides.tol.or(config.tolerances.cert_tol) {
        cert_cfg.cert_tol = tol;
    }
    if let Some(tol) = config.tolerances.commutator_tol {
        cert_cfg.commutator_tol = tol;
    }
    if let Some(grid) = overrides.grid.or(s.range_grid) {
        cert_cfg.range_grid = grid;
    }

    let scenario = CertScenario {
        family: &family,
        weights: &weights,
        maps: &maps,
        f: f_ref,
        envelope: &envelope,
        g: &g,
        cfg: cert_cfg,
    };

    let mut certificates: Vec<BoundCertificate> = Vec::with_capacity(s.bounds.len());
    for request in &s.bounds {
        let cert = match request {
            BoundRequest::Fundamental { side, comparison } => {
                let (f_uv, label) = catalog::comparison(comparison).ok_or_else(|| {
                    ConfigError(format!(
                        "unknown comparison `{comparison}`; nearest catalog match is `{}`",
                        catalog::nearest(comparison, catalog::COMPARISON_FUNCTIONS)
                    ))
                })?;
                fundamental_bound(&scenario, (*side).into(), &f_uv, label)?
            }
            BoundRequest::Affine { side, alpha } => {
                affine_bound(&scenario, (*side).into(), *alpha)?
            }
            BoundRequest::Ratio { side, sign } => {
                let sign = match sign {
                    RatioSignSpec::Positive => RatioSign::Positive,
                    RatioSignSpec::Negative => RatioSign::Negative,
                };
                ratio_bound(&scenario, (*side).into(), sign)?
            }
            BoundRequest::Difference { side } => difference_bound(&scenario, (*side).into())?,
        };
        certificates.push(cert);
    }

    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for cert in &certificates {
        let status = if cert.holds { "pass" } else { "FAIL" };
        rows.push((
            cert.inequality_id.clone(),
            status.to_string(),
            format!("constant {:.9e}, witness {:.3e}", cert.constant, cert.witness),
        ));
        if !cert.holds {
            failures.push(format!(
                "{} failed: witness {:.6e} below -{:.1e}",
                cert.inequality_id, cert.witness, scenario.cfg.cert_tol
            ));
        }
    }
    let records = certificates.iter().map(CertificateRecord::from_certificate).collect();
    Ok((RunResults::Certify { certificates: records }, failures, rows))
}

fn run_wbound(
    s: &crate::config::WboundScenario,
    seed: u64,
    overrides: &Overrides,
) -> Result<RunParts, RunError> {
    let family = s
        .family
        .iter()
        .map(|spec| spec.build())
        .collect::<Result<Vec<_>, _>>()?;
    let g = s.g.build()?;
    let map = loewner_core::maps::PolyMap::identity(s.dim);
    let spec = WBoundSpec::new(
        family,
        g,
        (s.interval[0], s.interval[1]),
        map,
        s.weights.clone(),
    )?;

    let constant = w_bound_constant(&spec)?;
    let mut failures = Vec::new();
    let mut rows = vec![(
        "wbound-constant".to_string(),
        "pass".to_string(),
        format!("constant {:.9e} at x = {:.6}", constant.constant, constant.arg_x),
    )];

    let trials = overrides.trials.or(s.trials);
    let verification = match trials {
        Some(t) => {
            let rep = verify_w_bound(&spec, t, seed)?;
            let ok = rep.pass_count == rep.trials && rep.worst_witness >= -1e-8;
            rows.push((
                "wbound-verify".to_string(),
                if ok { "pass" } else { "FAIL" }.to_string(),
                format!("{}/{} trials, worst witness {:.3e}", rep.pass_count, rep.trials, rep.worst_witness),
            ));
            if !ok {
                failures.push(format!(
                    "wbound verification passed only {}/{} trials (worst witness {:.6e})",
                    rep.pass_count, rep.trials, rep.worst_witness
                ));
            }
            Some(rep)
        }
        None => None,
    };

    let mut scaling = Vec::new();
    for &kappa in &s.scaling_kappas {
        let rep = scaling_check(&spec, kappa)?;
        rows.push((
            format!("wbound-scaling[{kappa}]"),
            if rep.holds { "pass" } else { "FAIL" }.to_string(),
            format!("base {:.9e}, scaled {:.9e}", rep.constant_base, rep.constant_scaled),
        ));
        if !rep.holds {
            failures.push(format!("scaling check failed for kappa = {kappa}"));
        }
        scaling.push(rep);
    }

    let domination = match &s.domination {
        Some(d) => {
            let rep = domination_check(&spec, d.u, d.upsilon_g)?;
            rows.push((
                "wbound-domination".to_string(),
                if rep.holds { "pass" } else { "FAIL" }.to_string(),
                match &rep.hypothesis_violation {
                    Some((y, excess)) => {
                        format!("hypothesis fails at y = {y:.6} (excess {excess:.3e})")
                    }
                    None => format!("W = {:.9e} <= bound {:.9e}", rep.w_composed, rep.bound),
                },
            ));
            if !rep.holds {
                failures.push("domination check failed".into());
            }
            Some(rep)
        }
        None => None,
    };

    Ok((RunResults::Wbound { constant, verification, scaling, domination }, failures, rows))
}

fn run_tails(
    s: &crate::config::TailsScenario,
    seed: u64,
    overrides: &Overrides,
) -> Result<RunParts, RunError> {
    let n = s.boxes.len();
    let f = s.f.function.build(n)?;
    let h = s.h.function.build(n)?;
    let g = s.g.build()?;
    let weights =
        WeightGrid::new(s.weights.clone()).map_err(|e| ConfigError(e.to_string()))?;
    let ens = EnsembleSpec {
        dim: s.dim,
        boxes: s.boxes.iter().map(|p| (p[0], p[1])).collect(),
        counts: s.counts.clone(),
        seed,
        commuting: s.commuting,
    };
    let envelope_of = |c: &[f64], d: f64| LinearEnvelope {
        a: vec![0.0; n],
        b: 0.0,
        c: c.to_vec(),
        d,
    };
    let f_ref: &(dyn Fn(&[f64]) -> f64 + Sync) = &*f;
    let h_ref: &(dyn Fn(&[f64]) -> f64 + Sync) = &*h;
    let f_spec = TailFunctionSpec {
        label: "f".into(),
        f: f_ref,
        upper: envelope_of(&s.f.upper_c, s.f.upper_d),
    };
    let h_spec = TailFunctionSpec {
        label: "h".into(),
        f: h_ref,
        upper: envelope_of(&s.h.upper_c, s.h.upper_d),
    };

    let trials = overrides.trials.or(s.trials).unwrap_or(2000);
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for statistic in &s.statistics {
        let query = TailQuery {
            theta: s.theta,
            ell: s.ell,
            trials,
            statistic: match statistic {
                TailStatisticSpec::Sum => TailStatistic::Sum,
                TailStatisticSpec::Product => TailStatistic::Product,
            },
        };
        let rep = mc_tail_check(&ens, &f_spec, &h_spec, &g, &weights, &query)?;
        let ok = rep.direction_holds
            && rep.domination_violations == 0
            && rep.certificate_violations == 0;
        let label = format!("tails-{:?}", query.statistic).to_lowercase();
        rows.push((
            label.clone(),
            if ok { "pass" } else { "FAIL" }.to_string(),
            format!(
                "p_lhs {:.4} <= p_rhs {:.4} (accepted {}, excluded {})",
                rep.p_lhs, rep.p_rhs, rep.accepted, rep.excluded
            ),
        ));
        if !ok {
            failures.push(format!(
                "{label}: direction {}, domination violations {}, certificate violations {}",
                rep.direction_holds, rep.domination_violations, rep.certificate_violations
            ));
        }
        reports.push(rep);
    }
    Ok((RunResults::Tails { reports }, failures, rows))
}
