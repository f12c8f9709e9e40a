use std::path::{Path, PathBuf};

use brenier_ot::brenier::pushforward_check;
use brenier_ot::experiments::{
    oracle_semidiscrete_ref, run_coupling_rate, run_figure1, run_map_rate, ExperimentConfig, Oracle1d, RateRun,
    Scenario,
};
use brenier_ot::measures::{derive_seed, read_measure, read_points, sample, DistributionSpec, Format};
use brenier_ot::metrics::{error_bound_check, BoundConstants, BoundReport};
use brenier_ot::ot_lp::{build_cost, solve_with_cost, verify_slackness, DualPair};
use brenier_ot::{BrenierPotential, PointCloudMeasure, SemiDual};
use clap::{ArgGroup, Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::{CmdResult, Failure, OutFormat, Run};

fn load_measure(path: &Path) -> CmdResult<PointCloudMeasure> {
    read_measure(path, Format::from_path(path)).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn config_value(value: &impl Serialize) -> CmdResult<serde_json::Value> {
    Ok(serde_json::to_value(value)?)
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    /// Source measure file (`.csv` with header `w,x1,...,xd`, or `.json`).
    #[arg(long)]
    mu: PathBuf,
    /// Target measure file.
    #[arg(long)]
    nu: PathBuf,
    /// Recentre the duals inside the optimal face when possible.
    #[arg(long)]
    strict_duals: bool,
}

#[derive(Serialize)]
struct SolveSummary {
    rows: usize,
    cols: usize,
    primal_value: f64,
    dual_value: f64,
    duality_gap: f64,
    pivots: usize,
    support_size: usize,
    max_active_residual: f64,
    max_dual_violation: f64,
    max_marginal_residual: f64,
    max_activation_residual: f64,
}

#[derive(Serialize)]
struct PlanFile<'a> {
    rows: usize,
    cols: usize,
    cells: &'a [(usize, usize, f64)],
}

pub fn solve(run: &mut Run, args: SolveArgs) -> CmdResult {
    run.config = config_value(&args)?;
    let mu = load_measure(&args.mu)?;
    let nu = load_measure(&args.nu)?;
    let cost = build_cost(&mu, &nu)?;
    let mut sol = solve_with_cost(&mu, &nu, &cost)?;
    if args.strict_duals {
        sol = sol.with_strict_duals(&cost);
    }
    let slack = verify_slackness(&sol, &cost)?;
    let phi = BrenierPotential::from_solution(&nu, &sol)?;
    let push = pushforward_check(&phi, &mu, &sol)?;

    let plan_path = run.table("plan");
    match run.format {
        OutFormat::Csv => sol.plan.write_csv(plan_path)?,
        OutFormat::Json => {
            let file = PlanFile {
                rows: sol.plan.rows(),
                cols: sol.plan.cols(),
                cells: sol.plan.cells(),
            };
            std::fs::write(plan_path, serde_json::to_string(&file)? + "\n")?;
        }
    }
    sol.duals.write_json(run.file("duals.json"))?;
    let summary = SolveSummary {
        rows: mu.len(),
        cols: nu.len(),
        primal_value: sol.primal_value,
        dual_value: sol.dual_value,
        duality_gap: sol.duality_gap(),
        pivots: sol.pivots,
        support_size: sol.plan.support_size(),
        max_active_residual: slack.max_active_residual,
        max_dual_violation: slack.max_dual_violation,
        max_marginal_residual: slack.max_marginal_residual,
        max_activation_residual: push.max_activation_residual,
    };
    run.write_json("summary.json", &summary)?;
    println!(
        "transport cost {:.12e}, duality gap {:.1e}, {} plan cells",
        summary.primal_value, summary.duality_gap, summary.support_size
    );
    Ok(())
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("dual_source").required(true).args(["duals", "mu"])))]
pub struct PotentialArgs {
    /// Target measure file; its atoms are the slopes of the potential.
    #[arg(long)]
    nu: PathBuf,
    /// Duals JSON `{f, g}` as written by `solve`.
    #[arg(long)]
    duals: Option<PathBuf>,
    /// Source measure file; the transport problem is solved to obtain the duals.
    #[arg(long)]
    mu: Option<PathBuf>,
    /// Raise inactive offsets until every piece touches the maximum.
    #[arg(long)]
    tighten: bool,
}

pub fn potential(run: &mut Run, args: PotentialArgs) -> CmdResult {
    run.config = config_value(&args)?;
    let nu = load_measure(&args.nu)?;
    let g = match (&args.duals, &args.mu) {
        (Some(path), _) => DualPair::<f64>::read_json(path)?.g,
        (None, Some(path)) => {
            let mu = load_measure(path)?;
            let cost = build_cost(&mu, &nu)?;
            solve_with_cost(&mu, &nu, &cost)?.with_strict_duals(&cost).duals.g
        }
        (None, None) => unreachable!("clap enforces the argument group"),
    };
    let mut phi = BrenierPotential::from_dual(&nu, &g)?;
    if args.tighten {
        phi = phi.tighten();
    }
    let phi = phi.normalized();
    phi.write_json(run.file("potential.json"))?;
    println!(
        "potential with {} pieces in dimension {}, Lipschitz constant {:.6}",
        phi.len(),
        phi.dim(),
        phi.lipschitz()
    );
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct MapArgs {
    /// Potential JSON `{atoms, g, tightened}`.
    #[arg(long)]
    potential: PathBuf,
    /// Points CSV with header `x1,...,xd`.
    #[arg(long)]
    points: PathBuf,
}

#[derive(Serialize)]
struct MapRow {
    x: Vec<f64>,
    value: f64,
    map: Vec<f64>,
    active: Vec<usize>,
}

pub fn map(run: &mut Run, args: MapArgs) -> CmdResult {
    run.config = config_value(&args)?;
    let phi = BrenierPotential::read_json(&args.potential)?;
    let (dim, coords) = read_points::<f64>(&args.points)?;
    if dim != phi.dim() {
        return Err(Failure::Validation(format!(
            "dimension mismatch: points have dimension {dim}, potential has {}",
            phi.dim()
        )));
    }
    let rows: Vec<MapRow> = coords
        .chunks(dim.max(1))
        .map(|x| MapRow {
            x: x.to_vec(),
            value: phi.eval(x),
            map: phi.monge_map(x),
            active: phi.active_set(x),
        })
        .collect();
    let path = run.table("map");
    match run.format {
        OutFormat::Json => std::fs::write(path, serde_json::to_string(&rows)? + "\n")?,
        OutFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            let mut header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
            header.push("value".into());
            header.extend((1..=dim).map(|k| format!("t{k}")));
            header.push("active".into());
            w.write_record(&header)?;
            for r in &rows {
                let mut rec: Vec<String> = r.x.iter().map(f64::to_string).collect();
                rec.push(r.value.to_string());
                rec.extend(r.map.iter().map(f64::to_string));
                rec.push(r.active.iter().map(usize::to_string).collect::<Vec<_>>().join(" "));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
    }
    println!("evaluated {} points", rows.len());
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct SemidualArgs {
    /// Source measure file (samples or quadrature nodes).
    #[arg(long)]
    mu: PathBuf,
    /// Target measure file.
    #[arg(long)]
    nu: PathBuf,
    /// Target bound on the optimality gap.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
}

#[derive(Serialize)]
struct SemidualSummary {
    objective: f64,
    moment_term: f64,
    transport_cost: f64,
    gap_bound: f64,
    residual: f64,
    iterations: usize,
}

#[derive(Serialize)]
struct OffsetRow {
    j: usize,
    g: f64,
}

pub fn semidual(run: &mut Run, args: SemidualArgs) -> CmdResult {
    run.config = config_value(&args)?;
    if !(args.tol > 0.0) {
        return Err(Failure::Validation(format!("tolerance must be positive, got {}", args.tol)));
    }
    let sd = SemiDual::new(load_measure(&args.mu)?, load_measure(&args.nu)?)?;
    let out = sd.minimize(None, args.tol, args.max_iter)?;
    let offsets: Vec<OffsetRow> = out.g.iter().enumerate().map(|(j, &g)| OffsetRow { j, g }).collect();
    write_rows(run, "offsets", &offsets)?;
    write_rows(run, "trace", &out.trace)?;
    sd.potential(&out.g)?.write_json(run.file("potential.json"))?;
    let summary = SemidualSummary {
        objective: out.objective,
        moment_term: sd.moment_term(),
        transport_cost: sd.moment_term() - out.objective,
        gap_bound: out.gap_bound,
        residual: out.residual,
        iterations: out.iterations,
    };
    run.write_json("summary.json", &summary)?;
    println!(
        "objective {:.12e}, transport cost {:.12e}, gap bound {:.1e} after {} iterations",
        summary.objective, summary.transport_cost, summary.gap_bound, summary.iterations
    );
    Ok(())
}

/// Writes serializable rows as `stem.csv` or a JSON array `stem.json`.
fn write_rows<R: Serialize>(run: &mut Run, stem: &str, rows: &[R]) -> CmdResult {
    let path = run.table(stem);
    match run.format {
        OutFormat::Json => std::fs::write(path, serde_json::to_string_pretty(rows)? + "\n")?,
        OutFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Experiment overrides shared by the rate commands.
#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Experiment configuration JSON; defaults to the scenario preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated source sample sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Comma-separated target sample sizes: one fixed size or one per `n`.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
}

impl GridArgs {
    fn build(&self, scenario: Scenario, seed: Option<u64>) -> CmdResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?
            }
            None => ExperimentConfig::preset(scenario),
        };
        if !self.n.is_empty() {
            cfg.n_grid = self.n.clone();
        }
        if !self.m.is_empty() {
            cfg.m_grid = self.m.clone();
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RatesArgs {
    /// `map-rate-1d` or `map-rate-2d-semidiscrete`; ignored with `--config`.
    #[arg(long, default_value = "map-rate-1d")]
    scenario: Scenario,
    #[command(flatten)]
    grid: GridArgs,
    /// Fresh source draws per trial for the error integral.
    #[arg(long)]
    eval_samples: Option<usize>,
    /// Quadrature nodes of the semi-discrete reference.
    #[arg(long)]
    reference_size: Option<usize>,
}

fn finish_rates(run: &mut Run, result: RateRun) -> CmdResult {
    match run.format {
        OutFormat::Csv => result.write_records_csv(run.file("records.csv"))?,
        OutFormat::Json => result.write_records_json(run.file("records.json"))?,
    }
    result.write_summary_json(run.file("summary.json"))?;
    let s = &result.summary;
    for level in &s.levels {
        println!(
            "n={:<6} m={:<6} trials={:<3} median={:.6e} envelope={:.6e}",
            level.n, level.m, level.completed, level.median, level.envelope
        );
    }
    println!(
        "slope {}, envelope {}, {} inversions, {} failed trials",
        s.slope.map_or("n/a".into(), |v| format!("{v:.3}")),
        if s.envelope_holds { "holds" } else { "violated" },
        s.inversions,
        s.failures.len()
    );
    if result.records.is_empty() {
        return Err(Failure::Numerical("every trial failed".into()));
    }
    Ok(())
}

pub fn rates(run: &mut Run, args: RatesArgs) -> CmdResult {
    let mut cfg = args.grid.build(args.scenario, run.seed)?;
    if let Some(v) = args.eval_samples {
        cfg.eval_samples = v;
    }
    if let Some(v) = args.reference_size {
        cfg.reference_size = v;
    }
    if !matches!(cfg.scenario, Scenario::MapRate1d | Scenario::MapRate2dSemidiscrete) {
        return Err(Failure::Validation(format!(
            "scenario {} is not a map-rate experiment; use `coupling-rates` or `demo`",
            cfg.scenario
        )));
    }
    run.seed = Some(cfg.seed);
    run.config = config_value(&cfg)?;
    let result = run_map_rate(&cfg)?;
    finish_rates(run, result)
}

#[derive(Debug, Args, Serialize)]
pub struct CouplingArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Pairs in the quantile reference coupling.
    #[arg(long)]
    pairs: Option<usize>,
}

pub fn coupling_rates(run: &mut Run, args: CouplingArgs) -> CmdResult {
    let mut cfg = args.grid.build(Scenario::CouplingRate, run.seed)?;
    if let Some(v) = args.pairs {
        cfg.reference_size = v;
    }
    run.seed = Some(cfg.seed);
    run.config = config_value(&cfg)?;
    let result = run_coupling_rate(&cfg)?;
    finish_rates(run, result)
}

#[derive(Debug, Args, Serialize)]
pub struct BoundsArgs {
    /// Instance JSON.
    #[arg(long)]
    instance: PathBuf,
}

fn default_sample_size() -> usize {
    200
}

fn default_mc_samples() -> usize {
    100_000
}

fn default_q() -> f64 {
    1.0
}

fn default_reference_size() -> usize {
    100_000
}

/// Input of `bounds-check`. Without a potential file, one is estimated from
/// `sample_size` source draws against the exact target.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsInstance {
    source: DistributionSpec,
    target: DistributionSpec,
    /// Potential JSON, relative to the instance file.
    #[serde(default)]
    potential: Option<PathBuf>,
    #[serde(default = "default_sample_size")]
    sample_size: usize,
    #[serde(default = "default_mc_samples")]
    mc_samples: usize,
    #[serde(default = "default_q")]
    q: f64,
    /// Quadrature nodes of the reference potential when `d ≥ 2`.
    #[serde(default = "default_reference_size")]
    reference_size: usize,
    #[serde(default)]
    density_bound: Option<f64>,
    #[serde(default)]
    lipschitz: Option<f64>,
}

#[derive(Serialize)]
struct Verdict {
    dim: usize,
    radius: f64,
    density_bound: f64,
    lipschitz: f64,
    reference: &'static str,
    report: BoundReport,
    /// `rhs − lhs` of the two-regime bound.
    bound_margin: f64,
    /// `δ + 1e-6 − (L¹ distance / C)⁴`.
    l1_margin: f64,
    holds: bool,
}

pub fn bounds_check(run: &mut Run, args: BoundsArgs) -> CmdResult {
    let text = std::fs::read_to_string(&args.instance)?;
    let inst: BoundsInstance = serde_json::from_str(&text)
        .map_err(|e| Failure::Validation(format!("{}: {e}", args.instance.display())))?;
    let seed = run.seed.unwrap_or(1);
    run.seed = Some(seed);
    run.config = config_value(&inst)?;
    inst.source.validate()?;
    inst.target.validate()?;
    if !inst.target.is_atomic() {
        return Err(Failure::Validation("target must be a finite-atoms law".into()));
    }
    let d = inst.source.dim();
    if inst.target.dim() != d {
        return Err(Failure::Validation("source and target dimensions differ".into()));
    }
    let nu = inst.target.quadrature(1)?;
    let phi = match &inst.potential {
        Some(p) => {
            let base = args.instance.parent().unwrap_or(Path::new("."));
            BrenierPotential::read_json(base.join(p))?
        }
        None => {
            let mu_hat: PointCloudMeasure = sample(&inst.source, inst.sample_size, derive_seed(seed, &[0]))?;
            let sol = brenier_ot::ot_lp::solve(&mu_hat, &nu)?;
            BrenierPotential::from_solution(&nu, &sol)?
        }
    };
    if phi.dim() != d {
        return Err(Failure::Validation("potential dimension differs from the source".into()));
    }
    let density_bound = match inst.density_bound.or(inst.source.density_bound()) {
        Some(m) => m,
        None => return Err(Failure::Validation("source has no bounded density; set density_bound".into())),
    };
    let radius = inst.source.support_radius().max(nu.support_radius()).max(phi.lipschitz());
    let lipschitz = inst.lipschitz.unwrap_or(radius);
    let consts = BoundConstants::new(radius, density_bound, d, inst.q, lipschitz)?;
    let mc: PointCloudMeasure = sample(&inst.source, inst.mc_samples, derive_seed(seed, &[1]))?;
    let (reference, report) = if d == 1 {
        let oracle = Oracle1d::new(&inst.source, &inst.target)?;
        ("quantile-1d", error_bound_check(&phi, &oracle, &mc, &consts))
    } else {
        let r = oracle_semidiscrete_ref(&inst.source, &nu, inst.reference_size)?;
        ("semidiscrete-grid", error_bound_check(&phi, &r.potential, &mc, &consts))
    };
    let verdict = Verdict {
        dim: d,
        radius,
        density_bound,
        lipschitz,
        reference,
        bound_margin: report.rhs - report.lhs,
        l1_margin: report.delta + 1e-6 - report.l1_ratio,
        holds: report.holds && report.l1_holds,
        report,
    };
    run.write_json("verdict.json", &verdict)?;
    println!(
        "case {}: lhs {:.6e} ≤ rhs {:.6e}: {}; fourth-root bound: {}",
        verdict.report.case,
        verdict.report.lhs,
        verdict.report.rhs,
        verdict.report.holds,
        verdict.report.l1_holds
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum DemoKind {
    /// Semi-discrete estimates on the unit square with four target atoms.
    Figure1,
}

#[derive(Debug, Args, Serialize)]
pub struct DemoArgs {
    #[arg(value_enum)]
    which: DemoKind,
    /// Comma-separated source sample sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Grid nodes used to compare cells across sample sizes.
    #[arg(long)]
    grid: Option<usize>,
}

pub fn demo(run: &mut Run, args: DemoArgs) -> CmdResult {
    let DemoKind::Figure1 = args.which;
    let mut cfg = ExperimentConfig::preset(Scenario::Figure1Demo);
    if !args.n.is_empty() {
        cfg.n_grid = args.n.clone();
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(g) = args.grid {
        cfg.eval_samples = g;
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    run.seed = Some(cfg.seed);
    run.config = config_value(&cfg)?;
    let out = run_figure1(&cfg)?;
    out.write(&run.out)?;
    for name in ["samples.csv", "atoms.csv", "cells.csv", "summary.json"] {
        run.outputs.push(name.into());
    }
    if run.format == OutFormat::Json {
        run.write_json("levels.json", &out.levels)?;
    }
    let s = &out.summary;
    println!(
        "distinct values {:?} for {} atoms; symmetric differences {:?}",
        s.distinct_values, s.atoms, s.symmetric_difference
    );
    Ok(())
}
