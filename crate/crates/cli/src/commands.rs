use buffered_flow::diagnostics::{
    check_csv, detect_period, fit_decay_rate, operator_norm_probe, tail_increases, DecayFit, PERIOD_TOL,
};
use buffered_flow::graph::Violation;
use buffered_flow::resolvent::{
    a_priori_margin, direct_resolvent_a, matrix_perturbation_check, resolvent_a_series_with, resolvent_c,
    ResolventInput, SeriesOptions, DIRECT_MAX_DIM,
};
use buffered_flow::solver::random_state;
use buffered_flow::spectral::{fixed_space_dimension, has_unit_eigenvalue, kernel_residual, FixedVector};
use buffered_flow::{
    equilibrium_state, generate_family, is_irreducible, perron_fixed_vector, simulate as run_simulation,
    strongly_connected, validate as check_graph, Family, FlowModel, FlowState, Observers, Profile, StepPolicy,
};
use serde::Serialize;

use crate::output::{load_graph, write_json, write_text, Report};
use crate::plot::trajectory_svg;
use crate::{
    AnalyzeArgs, EquilibriumArgs, FamilyArgs, FamilyKind, Failure, GraphArgs, InitArg, PerturbArgs, ProbeArgs,
    ProfileArg, ResolventArgs, SimulateArgs, ValidateArgs,
};

/// Loads, validates and discretizes the graph.
fn load_model(args: &GraphArgs) -> Result<(FlowModel, String), Failure> {
    let (graph, hash) = load_graph(&args.graph)?;
    let report = check_graph(&graph, Profile::Unbuffered);
    if !report.is_valid() {
        return Err(Failure::Check(format!("invalid graph: {}", report.summary())));
    }
    Ok((FlowModel::new(graph, args.cells)?, hash))
}

fn edge_ids(model: &FlowModel) -> Vec<String> {
    model.graph.edges.iter().map(|e| e.id.clone()).collect()
}

fn buffer_ids(model: &FlowModel) -> Vec<String> {
    model
        .bundle
        .buffered
        .iter()
        .map(|&v| model.graph.vertices[v].id.clone())
        .collect()
}

#[derive(Serialize)]
struct ValidationResult {
    valid: bool,
    violations: Vec<String>,
    details: Vec<Violation>,
    out_degree: Vec<(String, usize)>,
}

pub fn validate(args: &ValidateArgs) -> Result<(), Failure> {
    let (graph, hash) = load_graph(&args.graph)?;
    let profile = match args.profile {
        ProfileArg::Buffered => Profile::Buffered,
        ProfileArg::Unbuffered => Profile::Unbuffered,
    };
    let report = check_graph(&graph, profile);
    if let Some(out) = &args.out {
        let result = ValidationResult {
            valid: report.is_valid(),
            violations: report.violations.iter().map(|v| v.to_string()).collect(),
            details: report.violations.clone(),
            out_degree: report.out_degree.clone(),
        };
        write_json(out, "validation.json", &Report::new("validate", Some(hash), args, result))?;
    }
    if report.is_valid() {
        eprintln!(
            "{}: valid ({} vertices, {} edges)",
            args.graph.display(),
            graph.vertices.len(),
            graph.edges.len()
        );
        Ok(())
    } else {
        for v in &report.violations {
            eprintln!("{}: {v}", args.graph.display());
        }
        Err(Failure::Check(format!("{} violation(s)", report.violations.len())))
    }
}

#[derive(Serialize)]
struct EquilibriumSummary {
    mass: f64,
    alpha: f64,
    edge_masses: Vec<f64>,
    buffer_levels: Vec<f64>,
    kernel_residual: f64,
}

#[derive(Serialize)]
struct Analysis {
    vertices: usize,
    edges: usize,
    buffers: usize,
    edge_ids: Vec<String>,
    buffer_ids: Vec<String>,
    strongly_connected: bool,
    irreducible: bool,
    unit_eigenvalue: bool,
    unit_eigenvalue_residual: f64,
    fixed_space_dimension: usize,
    perron: Option<FixedVector>,
    equilibrium: Option<EquilibriumSummary>,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let (model, hash) = load_model(&args.graph)?;
    let irreducible = is_irreducible(&model.bundle);
    let unit = has_unit_eigenvalue(&model.bundle);
    let perron = irreducible
        .then(|| perron_fixed_vector(&model.bundle, args.tol))
        .transpose()?;
    let equilibrium = match &perron {
        Some(w) => {
            let eq = equilibrium_state(&model, w, 1.0)?;
            Some(EquilibriumSummary {
                mass: 1.0,
                alpha: eq.alpha,
                edge_masses: eq.state.edge_masses(),
                buffer_levels: eq.buffer_levels().to_vec(),
                kernel_residual: kernel_residual(&model, &eq.state)?,
            })
        }
        None => None,
    };
    let result = Analysis {
        vertices: model.graph.vertices.len(),
        edges: model.num_edges(),
        buffers: model.num_buffers(),
        edge_ids: edge_ids(&model),
        buffer_ids: buffer_ids(&model),
        strongly_connected: strongly_connected(&model.graph),
        irreducible,
        unit_eigenvalue: unit.present,
        unit_eigenvalue_residual: unit.residual,
        fixed_space_dimension: fixed_space_dimension(&model.bundle, 1e-9),
        perron,
        equilibrium,
    };
    eprintln!(
        "strongly connected: {}, irreducible: {}, fixed space dimension: {}",
        result.strongly_connected, result.irreducible, result.fixed_space_dimension
    );
    write_json(&args.out, "analysis.json", &Report::new("analyze", Some(hash), args, result))?;
    Ok(())
}

fn initial_state(model: &FlowModel, init: InitArg, seed: u64) -> Result<FlowState, Failure> {
    match init {
        InitArg::Buffer => {
            let mut s = model.zero_state();
            if s.buffers.is_empty() {
                return Err(Failure::Usage("graph has no buffer; use --init random or --init bump".into()));
            }
            s.buffers[0] = 1.0;
            Ok(s)
        }
        InitArg::Random => Ok(random_state(model, seed, 1.0)),
        InitArg::Bump => {
            let mut s = model.zero_state();
            let n = model.cells();
            for (i, u) in s.edge_mut(0).iter_mut().enumerate() {
                *u = (std::f64::consts::PI * (i as f64 + 0.5) / n as f64).sin().powi(2);
            }
            let mass = s.total_mass();
            Ok(s.scaled(1.0 / mass))
        }
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    steps: usize,
    dt: f64,
    rows: usize,
    final_t: f64,
    initial_mass: f64,
    mass_drift: f64,
    min_value: f64,
    irreducible: bool,
    initial_distance: Option<f64>,
    final_distance: Option<f64>,
    rate_window: (f64, f64),
    decay: Option<DecayFit>,
    decay_error: Option<String>,
    period: Option<f64>,
    tail_increases: Option<usize>,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let (model, hash) = load_model(&args.graph)?;
    let init = initial_state(&model, args.init, args.seed)?;
    let mass = init.total_mass();
    let irreducible = is_irreducible(&model.bundle);
    let eq = if irreducible {
        let w = perron_fixed_vector(&model.bundle, buffered_flow::spectral::FIXED_TOL)?;
        Some(equilibrium_state(&model, &w, mass)?)
    } else {
        eprintln!("adjacency matrix is reducible; distances are not recorded");
        None
    };
    let policy = StepPolicy::with_theta(args.step.theta);
    let observers = Observers {
        cadence: args.cadence,
        equilibrium: eq.as_ref(),
        edge_masses: args.edge_masses,
    };
    let run = run_simulation(&model, &init, args.step.horizon, &policy, observers)?;
    let traj = &run.trajectory;
    let window = args
        .rate_window
        .unwrap_or((0.5 * args.step.horizon, args.step.horizon));

    let (decay, decay_error) = if eq.is_some() {
        match fit_decay_rate(traj, window) {
            Ok(fit) => (Some(fit), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    let initial_distance = traj.rows.first().and_then(|r| r.distance);
    let summary = SimulationSummary {
        steps: run.steps,
        dt: run.dt,
        rows: traj.rows.len(),
        final_t: run.final_state.t,
        initial_mass: mass,
        mass_drift: traj.mass_drift(),
        min_value: traj.min_value(),
        irreducible,
        initial_distance,
        final_distance: traj.final_distance(),
        rate_window: window,
        decay,
        decay_error,
        period: detect_period(traj, PERIOD_TOL * mass),
        tail_increases: initial_distance.map(|d0| tail_increases(traj, 1e-3 * d0)),
    };

    let csv = traj.to_csv(Some(window));
    check_csv(&csv).map_err(|e| Failure::Check(format!("trajectory failed its schema check: {e}")))?;
    write_text(&args.out, "trajectory.csv", &csv)?;
    if args.plot {
        write_text(&args.out, "trajectory.svg", &trajectory_svg(traj))?;
    }
    match summary.final_distance {
        Some(d) => eprintln!("{} steps, final distance {d:.3e}", run.steps),
        None => eprintln!("{} steps", run.steps),
    }
    write_json(&args.out, "summary.json", &Report::new("simulate", Some(hash), args, summary))?;
    Ok(())
}

#[derive(Serialize)]
struct EdgeDensity {
    id: String,
    weight_entry: f64,
    density: Vec<f64>,
}

#[derive(Serialize)]
struct BufferLevel {
    vertex: String,
    level: f64,
}

#[derive(Serialize)]
struct EquilibriumOutput {
    mass: f64,
    alpha: f64,
    cells: usize,
    kernel_residual: f64,
    edges: Vec<EdgeDensity>,
    buffers: Vec<BufferLevel>,
}

pub fn equilibrium(args: &EquilibriumArgs) -> Result<(), Failure> {
    let (model, hash) = load_model(&args.graph)?;
    let w = perron_fixed_vector(&model.bundle, args.tol)?;
    let eq = equilibrium_state(&model, &w, args.mass)?;
    let out = EquilibriumOutput {
        mass: eq.total_mass(),
        alpha: eq.alpha,
        cells: model.cells(),
        kernel_residual: kernel_residual(&model, &eq.state)?,
        edges: edge_ids(&model)
            .into_iter()
            .enumerate()
            .map(|(e, id)| EdgeDensity {
                id,
                weight_entry: w.entries[e],
                density: eq.edge_density(e).to_vec(),
            })
            .collect(),
        buffers: buffer_ids(&model)
            .into_iter()
            .zip(eq.buffer_levels())
            .map(|(vertex, &level)| BufferLevel { vertex, level })
            .collect(),
    };
    eprintln!("equilibrium of mass {} (alpha = {:.6})", args.mass, eq.alpha);
    write_json(&args.out, "equilibrium.json", &Report::new("equilibrium", Some(hash), args, out))?;
    Ok(())
}

#[derive(Serialize)]
struct Attempt<T: Serialize> {
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

impl<T: Serialize> Attempt<T> {
    fn from(result: Result<T, String>) -> Self {
        match result {
            Ok(v) => Self {
                ok: true,
                value: Some(v),
                message: None,
            },
            Err(m) => Self {
                ok: false,
                value: None,
                message: Some(m),
            },
        }
    }
}

#[derive(Serialize)]
struct ClosedForm {
    residual: f64,
    mu: Vec<f64>,
    buffers: Vec<f64>,
}

#[derive(Serialize)]
struct SeriesResult {
    terms: usize,
    residual: f64,
}

#[derive(Serialize)]
struct ResolventReport {
    lambda: f64,
    a_priori_margin: f64,
    rhs_norm: f64,
    closed_form: Attempt<ClosedForm>,
    series: Attempt<SeriesResult>,
    /// `‖series − direct‖` when both are available.
    series_direct_gap: Attempt<f64>,
}

pub fn resolvent(args: &ResolventArgs) -> Result<(), Failure> {
    let (model, hash) = load_model(&args.graph)?;
    let rhs = random_state(&model, args.seed, 1.0);
    let input = ResolventInput::new(args.lambda, rhs);
    if !(args.lambda > 0.0 && args.lambda.is_finite()) {
        return Err(Failure::Usage(format!("--lambda must be positive, got {}", args.lambda)));
    }
    let closed = resolvent_c(&model, &input).map(|out| ClosedForm {
        residual: out.residual,
        mu: out.mu.unwrap_or_default(),
        buffers: out.f.buffers,
    });
    let options = SeriesOptions {
        tol: args.tol,
        max_terms: args.max_terms,
    };
    let series = resolvent_a_series_with(&model, &input, &options);
    let gap = match &series {
        Ok(out) if model.dimension() <= DIRECT_MAX_DIM => direct_resolvent_a(&model, &input)
            .and_then(|direct| out.f.distance(&direct))
            .map_err(|e| e.to_string()),
        Ok(_) => Err(format!(
            "direct solve skipped: dimension {} exceeds {DIRECT_MAX_DIM}",
            model.dimension()
        )),
        Err(_) => Err("series did not converge".into()),
    };
    let report = ResolventReport {
        lambda: args.lambda,
        a_priori_margin: a_priori_margin(&model, args.lambda),
        rhs_norm: input.rhs.norm(),
        closed_form: Attempt::from(closed.map_err(|e| e.to_string())),
        series: Attempt::from(
            series
                .map(|out| SeriesResult {
                    terms: out.terms,
                    residual: out.residual,
                })
                .map_err(|e| e.to_string()),
        ),
        series_direct_gap: Attempt::from(gap),
    };
    for (name, message) in [
        ("closed form", &report.closed_form.message),
        ("series", &report.series.message),
    ] {
        if let Some(m) = message {
            eprintln!("{name}: {m}");
        }
    }
    write_json(&args.out, "resolvent.json", &Report::new("resolvent", Some(hash), args, report))?;
    Ok(())
}

pub fn perturb_check(args: &PerturbArgs) -> Result<(), Failure> {
    let report = matrix_perturbation_check(args.dim, args.trials, args.seed)?;
    let passed = report.all_passed();
    eprintln!("{}/{} pairs passed", report.passed, report.trials);
    write_json(&args.out, "perturb.json", &Report::new("perturb-check", None, args, report))?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Check("some surrogate checks failed".into()))
    }
}

pub fn family(args: &FamilyArgs) -> Result<(), Failure> {
    let kind = match args.kind {
        FamilyKind::Cycle => Family::Cycle(args.size),
        FamilyKind::ForkMerge => Family::ForkMerge(args.size),
        FamilyKind::RandomScc => Family::RandomScc {
            n: args.size,
            buffer_fraction: args.buffer_fraction,
            seed: args.seed,
        },
    };
    let graph = generate_family(kind)?;
    let mut text = graph.to_json();
    text.push('\n');
    let path = write_text(&args.out, "graph.json", &text)?;
    eprintln!(
        "wrote {} ({} vertices, {} edges)",
        path.display(),
        graph.vertices.len(),
        graph.edges.len()
    );
    Ok(())
}

pub fn probe_norm(args: &ProbeArgs) -> Result<(), Failure> {
    let (model, hash) = load_model(&args.graph)?;
    if model.num_buffers() == 0 {
        return Err(Failure::Check("the probe needs at least one buffered vertex".into()));
    }
    let policy = StepPolicy::with_theta(args.step.theta);
    let report = operator_norm_probe(&model, args.basis, args.step.horizon, &policy)?;
    eprintln!(
        "sup distance {:.3e} over {} initial states",
        report.sup_distance,
        report.distances.len()
    );
    write_json(&args.out, "probe.json", &Report::new("probe-norm", Some(hash), args, report))?;
    Ok(())
}
