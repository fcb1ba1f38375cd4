use std::fmt;
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use serde::Serialize;
use serde_json::{json, Value};

use openaqc::adiabatic::{adiabatic_evolve, adiabaticity_window, uniform_grid, CrossoverReport, WindowOptions};
use openaqc::dj::{closed_system_bound, eigenvalues_analytic, optimal_runtime, success_probabilities, DjInstance, FunctionSpec};
use openaqc::evolve::{compare_states, exact_evolve, projector_probability, EvolveOptions, Trajectory};
use openaqc::models::{parse_pauli_sum, sigma_minus, with_transverse_dephasing, InterpolatedModel};
use openaqc::operator::{devectorize, embed_single, vectorize};
use openaqc::spectral::{spectrum, track_frames};
use openaqc::theorem::check_model;
use openaqc::{par, CMatrix, CoherenceVector, GeneratorFamily, OperatorBasis, OperatorMatrix, C64};

use crate::config::{ConfigError, ModelKind, RunConfig};
use crate::output::{num, Table};

pub const ADIABATIC_GRID: usize = 2001;
pub const THEOREM_GRID: usize = 101;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(openaqc::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) if e.is_structural() => 4,
            CliError::Core(openaqc::Error::InvalidArgument(_)) => 2,
            CliError::Core(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<openaqc::Error> for CliError {
    fn from(e: openaqc::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// What a command hands back for rendering.
pub struct CommandOutput {
    pub outputs: Value,
    pub provenance: Value,
    /// Grid data for CSV; scalar commands fall back to key,value rows.
    pub table: Option<Table>,
}

/// A configured model with everything the commands need.
pub struct Resolved {
    pub name: String,
    pub family: Box<dyn GeneratorFamily>,
    pub basis: Arc<OperatorBasis>,
    pub model: InterpolatedModel,
    pub rho0: CoherenceVector,
    /// Projector whose probability counts as success at s = 1.
    pub success: OperatorMatrix,
    pub dj: Option<DjInstance>,
    /// One-qubit DJ with no extra channels: closed forms apply.
    pub closed_form: bool,
}

impl Resolved {
    pub fn new(cfg: &RunConfig) -> CliResult<Self> {
        let m = &cfg.model;
        let n = m.n_qubits;
        match m.kind {
            ModelKind::Dj => {
                let f = match &m.f {
                    Some(spec) => FunctionSpec::parse(spec, n)?,
                    None => FunctionSpec::first_bit(n)?,
                };
                let inst = DjInstance::new(f, m.omega, m.lambda.clone())?;
                let extras = m.emission > 0.0 || m.perturbation > 0.0 || !m.lindblad.is_empty();
                let model = add_extras(inst.model()?, cfg)?;
                let basis = inst.basis()?;
                let family: Box<dyn GeneratorFamily> =
                    if extras { Box::new(model.family()?) } else { Box::new(inst.family()?) };
                Ok(Self {
                    name: model.name.clone(),
                    family,
                    basis,
                    rho0: inst.initial_state()?,
                    success: inst.success_projector(),
                    closed_form: !extras && n == 1 && inst.lambdas[0] < 1.0,
                    model,
                    dj: Some(inst),
                })
            }
            ModelKind::Custom => {
                let h0 = parse_pauli_sum(m.h0.as_deref().unwrap_or_default(), n)?;
                let g = parse_pauli_sum(m.generator.as_deref().unwrap_or_default(), n)?;
                let ops = m.lindblad.iter().map(|e| parse_pauli_sum(e, n)).collect::<openaqc::Result<Vec<_>>>()?;
                let model = InterpolatedModel::new(format!("custom(n={n})"), n, h0.clone(), g, ops)?;
                let model = add_extras(model, cfg)?;
                let basis = model.basis().clone();
                let rho0 = vectorize(&ground_projector(&h0)?, &basis)?;
                let success = ground_projector(&model.hamiltonian(1.0))?;
                Ok(Self {
                    name: model.name.clone(),
                    family: Box::new(model.family()?),
                    basis,
                    rho0,
                    success,
                    dj: None,
                    closed_form: false,
                    model,
                })
            }
        }
    }

    /// Closed-form eigenvalues used to order blocks, when available.
    fn reference(&self) -> Option<Vec<C64>> {
        let inst = self.dj.as_ref().filter(|_| self.closed_form)?;
        Some(eigenvalues_analytic(inst.lambdas[0], inst.omega).to_vec())
    }
}

fn add_extras(mut model: InterpolatedModel, cfg: &RunConfig) -> CliResult<InterpolatedModel> {
    let m = &cfg.model;
    let n = m.n_qubits;
    if m.kind == ModelKind::Dj {
        for e in &m.lindblad {
            model = model.with_lindblad_op(parse_pauli_sum(e, n)?)?;
        }
    }
    if m.emission > 0.0 {
        let rate = C64::new((m.emission * m.omega).sqrt(), 0.0);
        for k in 0..n {
            model = model.with_lindblad_op(embed_single(&sigma_minus(), k, n) * rate)?;
        }
    }
    if m.perturbation > 0.0 {
        model = with_transverse_dephasing(model, m.perturbation)?;
    }
    Ok(model)
}

/// |g⟩⟨g| for the lowest eigenvector of a Hermitian matrix.
fn ground_projector(h: &CMatrix) -> CliResult<OperatorMatrix> {
    let eig = SymmetricEigen::new(h.clone());
    let k = eig.eigenvalues.imin();
    Ok(OperatorMatrix::projector(&eig.eigenvectors.column(k).into_owned()))
}

fn provenance(cfg: &RunConfig, grids: Value) -> Value {
    json!({
        "versions": { "openaqc": openaqc::VERSION, "openaqc-cli": env!("CARGO_PKG_VERSION") },
        "grids": grids,
        "tolerances": cfg.tolerances,
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("outputs serialize")
}

fn c64(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn spectrum_cmd(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let r = Resolved::new(cfg)?;
    let s_values = match cfg.run.grid {
        Some(p) => uniform_grid(p),
        None => cfg.run.s.clone(),
    };
    if s_values.is_empty() {
        return Err(CliError::Config("spectrum needs at least one s value".into()));
    }
    let opts = cfg.tolerances.track().spectral;
    let spectra = par::try_map(&s_values, |&s| spectrum(&r.family.generator(s)?, &opts))?;
    let mut table = Table::new(["s", "block", "re", "im", "dim", "cluster"]);
    let mut points = Vec::new();
    for (&s, spec) in s_values.iter().zip(&spectra) {
        for (k, b) in spec.blocks.iter().enumerate() {
            table.push([num(s), (k + 1).to_string(), num(b.eigenvalue.re), num(b.eigenvalue.im), b.dim.to_string(), (b.cluster + 1).to_string()]);
        }
        points.push(json!({
            "s": s,
            "eigenvalues": spec.eigenvalues().into_iter().map(c64).collect::<Vec<_>>(),
            "blocks": spec.blocks,
            "clusters": spec.clusters,
            "diagonalizable": spec.diagonalizable,
            "all_one_dimensional": spec.all_one_dimensional(),
        }));
    }
    let closed = r.reference().map(|e| e.into_iter().map(c64).collect::<Vec<_>>());
    Ok(CommandOutput {
        outputs: json!({ "model": r.name, "points": points, "closed_form_eigenvalues": closed }),
        provenance: provenance(cfg, json!({ "s_points": s_values.len() })),
        table: Some(table),
    })
}

fn window_options(cfg: &RunConfig) -> WindowOptions {
    WindowOptions {
        margin: cfg.run.margin,
        grid_points: cfg.run.grid,
        track: cfg.tolerances.crossover_track(),
        crossover: cfg.tolerances.crossover(),
        ..WindowOptions::default()
    }
}

fn crossover_report(r: &Resolved, cfg: &RunConfig, t: &[f64]) -> CliResult<CrossoverReport> {
    let reference = r.reference();
    Ok(adiabaticity_window(r.family.as_ref(), &r.rho0, t, reference.as_deref(), &window_options(cfg))?)
}

/// Columns T2c..Tnc; block 1 is the stationary block.
fn crossover_header(lead: &[&str], blocks: usize) -> Vec<String> {
    let mut h: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    h.extend((2..=blocks).map(|k| format!("T{k}c")));
    h.push("window_flag".into());
    h
}

fn crossover_rows(table: &mut Table, lead: &[String], report: &CrossoverReport) {
    for p in &report.points {
        let mut row = lead.to_vec();
        row.push(num(p.t_total));
        row.extend(p.times.iter().skip(1).map(|c| num(c.value)));
        row.push(u8::from(p.in_window).to_string());
        table.push(row);
    }
}

fn report_value(report: &CrossoverReport) -> Value {
    let mut v = to_value(report);
    v["eigenvalues"] = report.eigenvalues.iter().map(|&z| c64(z)).collect();
    v
}

pub fn crossover_cmd(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let t = cfg.t_values()?;
    let r = Resolved::new(cfg)?;
    let report = crossover_report(&r, cfg, &t)?;
    let mut table = Table::from_header(crossover_header(&["T"], report.eigenvalues.len()));
    crossover_rows(&mut table, &[], &report);
    Ok(CommandOutput {
        outputs: json!({ "model": r.name, "report": report_value(&report) }),
        provenance: provenance(cfg, json!({ "s_points": report.grid_points, "T_points": t.len() })),
        table: Some(table),
    })
}

pub fn sweep_cmd(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let t = cfg.t_values()?;
    let configs: Vec<RunConfig> = cfg
        .model
        .lambda
        .iter()
        .map(|&l| {
            let mut c = cfg.clone();
            c.model.lambda = vec![l];
            c
        })
        .collect();
    let runs = par::try_map(&configs, |c| -> CliResult<(String, CrossoverReport)> {
        let r = Resolved::new(c)?;
        let report = crossover_report(&r, c, &t)?;
        Ok((r.name, report))
    })?;
    let blocks = runs.iter().map(|(_, rep)| rep.eigenvalues.len()).max().unwrap_or(0);
    let mut table = Table::from_header(crossover_header(&["lambda", "T"], blocks));
    let mut out = Vec::new();
    for (c, (name, report)) in configs.iter().zip(&runs) {
        let lambda = c.model.lambda[0];
        crossover_rows(&mut table, &[num(lambda)], report);
        out.push(json!({ "lambda": lambda, "model": name, "report": report_value(report) }));
    }
    let s_points: Vec<usize> = runs.iter().map(|(_, rep)| rep.grid_points).collect();
    Ok(CommandOutput {
        outputs: json!({ "runs": out }),
        provenance: provenance(cfg, json!({ "s_points": s_points, "T_points": t.len() })),
        table: Some(table),
    })
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
struct Physicality {
    states: usize,
    max_trace_error: f64,
    max_hermiticity_error: f64,
    min_eigenvalue: f64,
    min_purity: f64,
    max_purity: f64,
}

impl Physicality {
    fn new() -> Self {
        Self { min_eigenvalue: f64::INFINITY, min_purity: f64::INFINITY, ..Self::default() }
    }

    fn add(&mut self, rho: &OperatorMatrix) {
        self.states += 1;
        self.max_trace_error = self.max_trace_error.max((rho.trace() - C64::new(1.0, 0.0)).norm());
        self.max_hermiticity_error = self.max_hermiticity_error.max(rho.hermiticity_error());
        let h = OperatorMatrix::new((rho.matrix() + rho.matrix().adjoint()) * C64::new(0.5, 0.0)).expect("finite state");
        let min = h.hermitian_eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        self.min_eigenvalue = self.min_eigenvalue.min(min);
        let p = rho.purity();
        self.min_purity = self.min_purity.min(p);
        self.max_purity = self.max_purity.max(p);
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    s: f64,
    p_success: f64,
    purity: f64,
}

struct PipelineSummary {
    value: Value,
    rows: Vec<TrajectoryRow>,
}

fn summarize(r: &Resolved, traj: &Trajectory, samples: usize, phys: &mut Physicality) -> CliResult<PipelineSummary> {
    let stride = (traj.len() / samples).max(1);
    let mut rows = Vec::new();
    for k in 0..traj.len() {
        let rho = devectorize(&traj.state(k), &r.basis)?;
        phys.add(&rho);
        if k % stride == 0 || k + 1 == traj.len() {
            let p = (r.success.matrix() * rho.matrix()).trace().re;
            rows.push(TrajectoryRow { s: traj.s[k], p_success: p, purity: rho.purity() });
        }
    }
    let last = traj.final_state();
    let mut value = json!({ "p_success": projector_probability(&last, &r.basis, &r.success)? });
    if let Some(inst) = &r.dj {
        let p_plus = projector_probability(&last, &r.basis, &inst.plus_projector())?;
        value["p_plus"] = json!(p_plus);
        value["p_minus"] = json!(1.0 - p_plus);
    }
    value["purity"] = json!(devectorize(&last, &r.basis)?.purity());
    Ok(PipelineSummary { value, rows })
}

pub fn evolve_cmd(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let t = cfg.single_t()?;
    let r = Resolved::new(cfg)?;
    let steps = cfg.run.steps * if cfg.run.step_doubling { 2 } else { 1 };
    let record_every = (steps / cfg.run.samples).max(1);
    let run = |n: usize, every: usize| exact_evolve(r.family.as_ref(), &r.rho0, t, &EvolveOptions { steps: n, record_every: every });
    let exact = run(steps, record_every)?;
    let refined = run(2 * steps, 2 * steps)?.final_state();
    // Richardson estimate for a second-order method
    let integrator_error = (exact.final_state().into_vector() - refined.as_vector()).norm() * 4.0 / 3.0;
    let grid_points = cfg.run.grid.unwrap_or(ADIABATIC_GRID);
    let frames = track_frames(r.family.as_ref(), &uniform_grid(grid_points), &cfg.tolerances.track())?;
    let adiabatic = adiabatic_evolve(&frames, &r.rho0, t)?;

    let mut phys = Physicality::new();
    let e = summarize(&r, &exact, cfg.run.samples, &mut phys)?;
    let a = summarize(&r, &adiabatic, cfg.run.samples, &mut phys)?;
    let (ef, af) = (exact.final_state(), adiabatic.final_state());
    let mut outputs = json!({
        "model": r.name,
        "T": t,
        "exact": e.value,
        "adiabatic": a.value,
        "trace_distance_pipelines": compare_states(&ef, &af, &r.basis)?.trace_distance,
        "integrator_error": integrator_error,
        "physicality": phys,
        "exact_trajectory": e.rows,
        "adiabatic_trajectory": a.rows,
    });
    if let Some(inst) = r.dj.as_ref().filter(|_| r.closed_form) {
        let want = vectorize(&inst.final_state_analytic(t)?, &r.basis)?;
        let (p_plus, p_minus) = success_probabilities(t, inst.lambdas[0], inst.omega, &inst.f)?;
        outputs["analytic"] = json!({
            "p_success": inst.success_probability_analytic(t)?,
            "p_plus": p_plus,
            "p_minus": p_minus,
            "trace_distance_exact": compare_states(&ef, &want, &r.basis)?.trace_distance,
            "trace_distance_adiabatic": compare_states(&af, &want, &r.basis)?.trace_distance,
        });
    }
    outputs["p_success"] = outputs["adiabatic"]["p_success"].clone();
    Ok(CommandOutput {
        outputs,
        provenance: provenance(cfg, json!({ "integrator_steps": steps, "reference_steps": 2 * steps, "s_points": grid_points })),
        table: None,
    })
}

pub fn optimal_cmd(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let target = cfg.run.target;
    if !(target > 0.5 && target < 1.0) {
        return Err(CliError::Config(format!("run.target must lie in (0.5, 1), got {target}")));
    }
    let r = Resolved::new(cfg)?;
    let inst = match r.dj.as_ref().filter(|_| r.closed_form) {
        Some(i) => i,
        None => {
            return Err(CliError::Config(
                "optimal needs a one-qubit dj model without extra channels".into(),
            ))
        }
    };
    let lambda = inst.lambdas[0];
    let bound = closed_system_bound(inst.omega);
    let mut outputs = json!({ "model": r.name, "target": target, "lambda": lambda, "closed_system_bound": bound });
    if lambda == 0.0 {
        outputs["T_star"] = Value::Null;
        outputs["verdict"] = json!("unbounded");
        return Ok(CommandOutput { outputs, provenance: provenance(cfg, json!({})), table: None });
    }
    let t_star = optimal_runtime(lambda, target, inst.omega)?;
    let report = crossover_report(&r, cfg, &[t_star])?;
    let p = &report.points[0];
    let verdict = if t_star < bound {
        "outside-window"
    } else if p.ratio >= cfg.run.margin {
        "comfortable"
    } else if p.ratio >= 1.0 {
        "marginal"
    } else {
        "outside-window"
    };
    outputs["T_star"] = json!(t_star);
    outputs["p_success_at_T_star"] = json!(inst.success_probability_analytic(t_star)?);
    outputs["max_crossover"] = json!(p.max);
    outputs["margin_ratio"] = json!(p.ratio);
    outputs["margin"] = json!(cfg.run.margin);
    outputs["crossover_times"] = p.times.iter().map(|c| json!(c.value)).collect();
    outputs["verdict"] = json!(verdict);
    Ok(CommandOutput { outputs, provenance: provenance(cfg, json!({ "s_points": report.grid_points })), table: None })
}

pub fn check_theorem_cmd(cfg: &RunConfig) -> CliResult<CommandOutput> {
    let r = Resolved::new(cfg)?;
    let points = cfg.run.grid.unwrap_or(THEOREM_GRID);
    let report = check_model(&r.model, &uniform_grid(points))?;
    let mut outputs = to_value(&report);
    outputs["all_pass"] = json!(report.all_pass());
    outputs["verdict"] = json!(if report.all_pass() { "pass" } else { "fail" });
    Ok(CommandOutput { outputs, provenance: provenance(cfg, json!({ "s_points": points })), table: None })
}
