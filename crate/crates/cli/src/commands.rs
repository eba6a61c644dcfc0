use std::path::{Path, PathBuf};

use magnilift::affine::{check_affine_pr, AffineOptions, AffineSystem, AffineSystemJson, AffineVerdict};
use magnilift::conjugate_certify::{
    certify_range_space, certify_vector, CertifyOptions, RealMeasurementMatrix, Status,
};
use magnilift::graph_model::{GraphInstance, MagnitudeObservation, SimpleGraph};
use magnilift::gram;
use magnilift::instance_gen::{generate, GenKind, GenParams, GenSpec};
use magnilift::quaternion::{quat_conjugate_pr_check, QuatFunction, QuatOptions, QuatSpace, QuatVerdict};
use magnilift::reconstruction::{
    reconstruct_auto, reconstruct_complete, reconstruct_propagate, Method, ReconstructOptions,
    ReconstructionError,
};
use magnilift::simplex_graph::{build_simplex_graph, check_hypotheses};
use magnilift::spline_hat::{
    check_criterion_tol, recover, sample_magnitudes, ComplexCoeffSeq, MagnitudeSamples, SplineError,
    DEFAULT_TOL,
};
use serde::Serialize;

use crate::input::{self, invalid, InputError};

/// Whether the result is a definitive answer (exit 0) or not (exit 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Definitive,
    Inconclusive,
}

pub struct Report {
    pub json: String,
    pub summary: String,
    pub outcome: Outcome,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Common {
    pub tol: Option<f64>,
    pub budget: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodArg {
    Auto,
    Complete,
    Propagate,
}

fn render<T: Serialize>(value: &T, summary: String, outcome: Outcome) -> Report {
    Report {
        json: magnilift::json::to_string(value).expect("serializable output"),
        summary,
        outcome,
    }
}

fn load_graph_instance(path: &Path) -> Result<(GraphInstance, SimpleGraph, MagnitudeObservation), InputError> {
    let inst: GraphInstance = input::read_json(path)?;
    let graph = inst.graph().map_err(|e| invalid(path, e))?;
    let obs = inst
        .observation(&graph)
        .map_err(|e| invalid(path, e))?
        .ok_or_else(|| invalid(path, "instance has neither norms nor a field"))?;
    Ok((inst, graph, obs))
}

#[derive(Serialize)]
struct ReconstructOutput {
    status: &'static str,
    certified_unique: bool,
    method: Option<Method>,
    residual: Option<f64>,
    field: Option<Vec<Vec<f64>>>,
    unreached: Vec<usize>,
    components: usize,
    message: Option<String>,
}

pub fn reconstruct_field(
    path: &Path,
    method: MethodArg,
    residual_tol: Option<f64>,
    pd_tol: Option<f64>,
    common: &Common,
) -> Result<Report, InputError> {
    let (inst, graph, obs) = load_graph_instance(path)?;
    let mut opts = ReconstructOptions::default();
    if let Some(t) = common.tol {
        opts.tol = t;
    }
    if let Some(t) = residual_tol {
        opts.residual_tol = t;
    }
    if let Some(t) = pd_tol {
        opts.pd_tol = t;
    }
    let run = match method {
        MethodArg::Auto => reconstruct_auto,
        MethodArg::Complete => reconstruct_complete,
        MethodArg::Propagate => reconstruct_propagate,
    };
    let failed = |status: &'static str, e: &ReconstructionError| ReconstructOutput {
        status,
        certified_unique: false,
        method: None,
        residual: None,
        field: None,
        unreached: Vec::new(),
        components: 0,
        message: Some(e.to_string()),
    };
    match run(&obs, &graph, inst.dim, &opts) {
        Ok(r) => {
            let status = if r.certified_unique { "Certified" } else { "NotCertified" };
            let summary = format!(
                "{status}: {} vertices, residual {:.3e}, {} component(s), {} unreached",
                graph.vertex_count(),
                r.residual,
                r.components,
                r.unreached.len()
            );
            let out = ReconstructOutput {
                status,
                certified_unique: r.certified_unique,
                method: Some(r.method),
                residual: Some(r.residual),
                field: Some(r.field.vectors().to_vec()),
                unreached: r.unreached,
                components: r.components,
                message: None,
            };
            Ok(render(&out, summary, Outcome::Definitive))
        }
        Err(e @ ReconstructionError::NoSimplex) => {
            let summary = format!("NoSimplex: {e}");
            Ok(render(&failed("NoSimplex", &e), summary, Outcome::Definitive))
        }
        Err(
            e @ (ReconstructionError::NotPsd { .. }
            | ReconstructionError::RankExceedsDim { .. }
            | ReconstructionError::IllConditioned { .. }
            | ReconstructionError::Inconsistent { .. }
            | ReconstructionError::PreconditionViolated { .. }
            | ReconstructionError::Degenerate),
        ) => {
            let status = match e {
                ReconstructionError::IllConditioned { .. } => "IllConditioned",
                ReconstructionError::Inconsistent { .. } => "Inconsistent",
                _ => "NumericalFailure",
            };
            let summary = format!("{status}: {e}");
            Ok(render(&failed(status, &e), summary, Outcome::Inconclusive))
        }
        Err(e) => Err(invalid(path, e)),
    }
}

#[derive(Serialize)]
struct SimplexGraphOutput {
    dim: usize,
    simplices: Vec<Vec<usize>>,
    edges: Vec<[usize; 2]>,
    connected: bool,
    uncovered: Vec<usize>,
    certified: bool,
}

pub fn simplex_graph(path: &Path, common: &Common) -> Result<Report, InputError> {
    let (inst, graph, obs) = load_graph_instance(path)?;
    let tol = common.tol.unwrap_or(gram::DEFAULT_PD_TOL);
    let sg = build_simplex_graph(&graph, &obs, inst.dim, tol).map_err(|e| invalid(path, e))?;
    let report = check_hypotheses(&sg, &graph);
    let summary = format!(
        "{} simplices, {} edges, connected: {}, uncovered: {}",
        sg.simplices.len(),
        sg.edges.len(),
        report.connected,
        report.uncovered_vertices.len()
    );
    let out = SimplexGraphOutput {
        dim: sg.dim,
        edges: sg.edges.iter().map(|&(a, b)| [a, b]).collect(),
        simplices: sg.simplices,
        connected: report.connected,
        uncovered: report.uncovered_vertices,
        certified: report.certified,
    };
    Ok(render(&out, summary, Outcome::Definitive))
}

pub fn certify_range(matrix: &Path, vector: Option<&PathBuf>, common: &Common) -> Result<Report, InputError> {
    let rows = input::read_matrix(matrix)?;
    let a = RealMeasurementMatrix::from_rows(&rows).map_err(|e| invalid(matrix, e))?;
    let mut opts = CertifyOptions {
        seed: common.seed,
        ..CertifyOptions::default()
    };
    if let Some(t) = common.tol {
        opts.tol = t;
    }
    if let Some(b) = common.budget {
        opts.budget = b;
    }
    let verdict = match vector {
        None => certify_range_space(&a, &opts),
        Some(vp) => {
            let x = input::read_complex_vector(vp)?;
            certify_vector(&a, &x, &opts).map_err(|e| invalid(vp, e))?
        }
    };
    let outcome = if verdict.status == Status::Inconclusive {
        Outcome::Inconclusive
    } else {
        Outcome::Definitive
    };
    let summary = format!(
        "{:?} ({}), nullspace dimension {}, {} samples",
        verdict.status,
        if verdict.exact { "exact" } else { "search" },
        verdict.nullspace_dim,
        verdict.samples
    );
    Ok(render(&verdict, summary, outcome))
}

#[derive(Serialize)]
struct HatCheckOutput {
    coeffs: serde_json::Value,
    retrievable: bool,
    support_gap: Option<i64>,
    im_positions: Vec<i64>,
    samples: MagnitudeSamples,
}

pub fn hat_check(path: &Path, common: &Common) -> Result<Report, InputError> {
    let text = input::read_text(path)?;
    let c = ComplexCoeffSeq::from_json(&text).map_err(|e| {
        // re-run through the shared parser for the position-annotated message
        input::parse_json::<serde_json::Value>(path, &text)
            .err()
            .unwrap_or_else(|| invalid(path, e))
    })?;
    let tol = common.tol.unwrap_or(DEFAULT_TOL);
    let r = check_criterion_tol(&c, tol);
    let summary = format!(
        "retrievable: {}, Im positions {:?}, support gap {:?}",
        r.retrievable, r.im_positions, r.support_gap
    );
    let out = HatCheckOutput {
        coeffs: c.to_json_value(),
        retrievable: r.retrievable,
        support_gap: r.support_gap,
        im_positions: r.im_positions,
        samples: sample_magnitudes(&c),
    };
    Ok(render(&out, summary, Outcome::Definitive))
}

#[derive(Serialize)]
struct HatRecoverOutput {
    status: &'static str,
    unique: bool,
    class_count: Option<usize>,
    classes: Vec<serde_json::Value>,
    message: Option<String>,
}

/// Accepts a samples object or the output of `hat-check`.
fn read_samples(path: &Path) -> Result<MagnitudeSamples, InputError> {
    let text = input::read_text(path)?;
    let value: serde_json::Value = input::parse_json(path, &text)?;
    match value.get("samples") {
        Some(inner) => serde_json::from_value(inner.clone()).map_err(|e| invalid(path, format!("samples: {e}"))),
        None => input::parse_json(path, &text),
    }
}

pub fn hat_recover(path: &Path, common: &Common) -> Result<Report, InputError> {
    let samples = read_samples(path)?;
    let tol = common.tol.unwrap_or(DEFAULT_TOL);
    match recover(&samples, tol) {
        Ok(classes) => {
            let n = classes.len();
            let out = HatRecoverOutput {
                status: if n == 1 { "Unique" } else { "NotUnique" },
                unique: n == 1,
                class_count: Some(n),
                classes: classes.iter().map(ComplexCoeffSeq::to_json_value).collect(),
                message: None,
            };
            Ok(render(&out, format!("{n} equivalence class(es)"), Outcome::Definitive))
        }
        Err(e @ SplineError::SupportGap(_)) => {
            let out = HatRecoverOutput {
                status: "Continuum",
                unique: false,
                class_count: None,
                classes: Vec::new(),
                message: Some(e.to_string()),
            };
            Ok(render(&out, format!("not unique: {e}"), Outcome::Definitive))
        }
        Err(e @ SplineError::TooManyBranches { .. }) => {
            let out = HatRecoverOutput {
                status: "Inconclusive",
                unique: false,
                class_count: None,
                classes: Vec::new(),
                message: Some(e.to_string()),
            };
            Ok(render(&out, e.to_string(), Outcome::Inconclusive))
        }
        Err(e) => Err(invalid(path, e)),
    }
}

pub fn quat_check(
    function: &Path,
    candidates: Option<&PathBuf>,
    space: Option<&PathBuf>,
    common: &Common,
) -> Result<Report, InputError> {
    let f: QuatFunction = input::read_json(function)?;
    let cands: Vec<QuatFunction> = match candidates {
        Some(p) => input::read_json(p)?,
        None => Vec::new(),
    };
    let space = match space {
        Some(p) => QuatSpace::Real(input::read_json(p)?),
        None => QuatSpace::Full,
    };
    let mut opts = QuatOptions {
        seed: common.seed,
        ..QuatOptions::default()
    };
    if let Some(t) = common.tol {
        opts.tol = t;
    }
    if let Some(b) = common.budget {
        opts.budget = b;
    }
    let report = quat_conjugate_pr_check(&f, &cands, &space, &opts).map_err(|e| invalid(function, e))?;
    let outcome = if report.verdict == QuatVerdict::Inconclusive {
        Outcome::Inconclusive
    } else {
        Outcome::Definitive
    };
    let summary = format!("{:?}: {}", report.verdict, report.reason);
    Ok(render(&report, summary, outcome))
}

pub fn affine_check(path: &Path, common: &Common) -> Result<Report, InputError> {
    let raw: AffineSystemJson = input::read_json(path)?;
    let sys = AffineSystem::from_json(&raw).map_err(|e| invalid(path, e))?;
    let mut opts = AffineOptions {
        seed: common.seed,
        ..AffineOptions::default()
    };
    if let Some(t) = common.tol {
        opts.tol = t;
    }
    if let Some(b) = common.budget {
        opts.budget = b;
    }
    let report = check_affine_pr(&sys, &opts);
    let outcome = if report.verdict == AffineVerdict::Inconclusive {
        Outcome::Inconclusive
    } else {
        Outcome::Definitive
    };
    let summary = format!("{:?}: {}", report.verdict, report.reasons.join("; "));
    Ok(render(&report, summary, outcome))
}

pub fn gen(kind: GenKind, params: GenParams, common: &Common) -> Result<Report, InputError> {
    let spec = GenSpec {
        seed: common.seed,
        kind,
        params,
    };
    let inst = generate(&spec).map_err(|e| InputError::Invalid {
        path: "gen".into(),
        message: e.to_string(),
    })?;
    let summary = format!("generated {} with seed {}", kind.name(), common.seed);
    Ok(render(&inst, summary, Outcome::Definitive))
}

/// Replaces the field of an instance by its observation.
pub fn observe(path: &Path, keep_field: bool) -> Result<Report, InputError> {
    let inst: GraphInstance = input::read_json(path)?;
    let graph = inst.graph().map_err(|e| invalid(path, e))?;
    let field = inst
        .vector_field()
        .map_err(|e| invalid(path, e))?
        .ok_or_else(|| invalid(path, "instance has no field to observe"))?;
    let obs = magnilift::graph_model::observe(&graph, &field).map_err(|e| invalid(path, e))?;
    let out = GraphInstance::from_parts(&graph, keep_field.then_some(&field), Some(&obs), inst.dim);
    let summary = format!(
        "observed {} vertex norms and {} edge norms",
        obs.vertex_norms().len(),
        obs.edge_norms().len()
    );
    Ok(render(&out, summary, Outcome::Definitive))
}
