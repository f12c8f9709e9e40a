//! Rate experiments against ground-truth maps, and the piecewise-constant
//! map demo on the unit square.
//!
//! Every trial draws from its own stream keyed by `(seed, n, trial)`, so
//! records are reproducible individually and independent of the grid.
//! Wall times are the only fields that vary between identical runs.

mod oracle;
mod stats;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::brenier::BrenierPotential;
use crate::error::{Error, Result};
use crate::measures::{derive_seed, sample, DistributionSpec, Measure};
use crate::metrics::{coupling_w2, CouplingMeasure};
use crate::ot_lp::{build_cost, solve_with_cost};
use crate::scalar::dist_sq;

pub use oracle::{oracle_semidiscrete_ref, Oracle1d, SemidiscreteReference};
pub(crate) use oracle::Envelope1d;
pub use stats::{inversions, log_log_slope, mean, median, std_dev};

/// Largest `n · m` accepted per coupling trial.
pub const MAX_COUPLING_TRIAL: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "map-rate-1d")]
    MapRate1d,
    #[serde(rename = "map-rate-2d-semidiscrete")]
    MapRate2dSemidiscrete,
    #[serde(rename = "coupling-rate")]
    CouplingRate,
    #[serde(rename = "figure1-demo")]
    Figure1Demo,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::MapRate1d,
        Scenario::MapRate2dSemidiscrete,
        Scenario::CouplingRate,
        Scenario::Figure1Demo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::MapRate1d => "map-rate-1d",
            Scenario::MapRate2dSemidiscrete => "map-rate-2d-semidiscrete",
            Scenario::CouplingRate => "coupling-rate",
            Scenario::Figure1Demo => "figure1-demo",
        }
    }

    /// Rate shape whose multiple bounds the median error.
    pub fn rate(self, n: usize, m: usize) -> f64 {
        let (n, m) = (n as f64, m as f64);
        match self {
            Scenario::MapRate1d => (n.powf(-0.5) + m.powf(-0.5)).powf(0.25),
            Scenario::MapRate2dSemidiscrete | Scenario::Figure1Demo => (m / n).powf(0.125),
            Scenario::CouplingRate => (n.powf(-0.5) + m.powf(-0.5)).powf(0.125),
        }
    }

    pub fn rate_label(self) -> &'static str {
        match self {
            Scenario::MapRate1d => "(n^-1/2 + m^-1/2)^(1/4)",
            Scenario::MapRate2dSemidiscrete | Scenario::Figure1Demo => "(m/n)^(1/8)",
            Scenario::CouplingRate => "(n^-1/2 + m^-1/2)^(1/8)",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s || (s == "figure1" && *sc == Scenario::Figure1Demo))
            .ok_or_else(|| Error::Invalid(format!("unknown scenario {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Source sample sizes, strictly increasing.
    pub n_grid: Vec<usize>,
    /// Target sample sizes: empty for `m = n`, one entry for a fixed `m`,
    /// or one entry per `n`. Ignored when the target is used exactly.
    #[serde(default)]
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub source: DistributionSpec,
    pub target: DistributionSpec,
    /// Fresh source draws per trial for the L¹ error, or grid nodes for the demo.
    pub eval_samples: usize,
    /// Quadrature nodes of a grid reference, or pairs of a quantile coupling.
    pub reference_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn square() -> DistributionSpec {
    DistributionSpec::uniform_box(vec![0.0, 0.0], vec![1.0, 1.0])
}

fn four_atoms() -> DistributionSpec {
    DistributionSpec::atoms(
        vec![vec![0.2, 0.25], vec![0.75, 0.2], vec![0.3, 0.8], vec![0.8, 0.7]],
        vec![0.2, 0.3, 0.25, 0.25],
    )
}

impl ExperimentConfig {
    /// Default setup of each scenario.
    pub fn preset(scenario: Scenario) -> Self {
        let (n_grid, trials, source, target, eval_samples, reference_size) = match scenario {
            Scenario::MapRate1d => (
                vec![50, 100, 200, 400, 800, 1600, 3200],
                20,
                DistributionSpec::interval(0.0, 1.0),
                DistributionSpec::interval(2.0, 3.0),
                100_000,
                0,
            ),
            Scenario::MapRate2dSemidiscrete => (
                vec![100, 200, 400, 800, 1600, 3200, 6400],
                20,
                square(),
                four_atoms(),
                100_000,
                100_000,
            ),
            Scenario::CouplingRate => (
                vec![12, 25, 50, 100],
                20,
                DistributionSpec::interval(0.0, 1.0),
                DistributionSpec::interval(2.0, 3.0),
                0,
                2000,
            ),
            Scenario::Figure1Demo => (vec![100, 1000, 10_000], 3, square(), four_atoms(), 40_000, 0),
        };
        Self {
            scenario,
            n_grid,
            m_grid: Vec::new(),
            trials,
            seed: 1,
            source,
            target,
            eval_samples,
            reference_size,
            output: None,
        }
    }

    fn uses_exact_target(&self) -> bool {
        matches!(self.scenario, Scenario::MapRate2dSemidiscrete | Scenario::Figure1Demo)
    }

    /// `(n, m)` pairs of the grid.
    pub fn sizes(&self) -> Result<Vec<(usize, usize)>> {
        if self.uses_exact_target() {
            let m = self.target.quadrature(1)?.len();
            return Ok(self.n_grid.iter().map(|&n| (n, m)).collect());
        }
        match self.m_grid.len() {
            0 => Ok(self.n_grid.iter().map(|&n| (n, n)).collect()),
            1 => Ok(self.n_grid.iter().map(|&n| (n, self.m_grid[0])).collect()),
            k if k == self.n_grid.len() => Ok(self.n_grid.iter().copied().zip(self.m_grid.iter().copied()).collect()),
            k => Err(Error::Invalid(format!(
                "m grid has {k} entries for {} sample sizes",
                self.n_grid.len()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Invalid("empty n grid".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] == 0 {
            return Err(Error::Invalid(format!("n grid must be positive and increasing, got {:?}", self.n_grid)));
        }
        if self.trials == 0 {
            return Err(Error::Invalid("at least one trial is required".into()));
        }
        self.source.validate()?;
        self.target.validate()?;
        if self.source.is_atomic() {
            return Err(Error::Invalid("source law must have a density".into()));
        }
        if self.source.dim() != self.target.dim() {
            return Err(Error::DimensionMismatch(format!(
                "source in R^{} but target in R^{}",
                self.source.dim(),
                self.target.dim()
            )));
        }
        let sizes = self.sizes()?;
        if sizes.iter().any(|&(_, m)| m == 0) {
            return Err(Error::Invalid("target sample size must be positive".into()));
        }
        match self.scenario {
            Scenario::MapRate1d | Scenario::CouplingRate if self.source.dim() != 1 => {
                return Err(Error::Invalid(format!("{} runs on the line", self.scenario)));
            }
            Scenario::MapRate2dSemidiscrete | Scenario::Figure1Demo if !self.target.is_atomic() => {
                return Err(Error::Invalid(format!("{} needs a finite target", self.scenario)));
            }
            _ => {}
        }
        if self.scenario != Scenario::CouplingRate && self.eval_samples == 0 {
            return Err(Error::Invalid("evaluation budget must be positive".into()));
        }
        if self.scenario == Scenario::CouplingRate {
            if let Some(&(n, m)) = sizes.iter().find(|&&(n, m)| n.saturating_mul(m) > MAX_COUPLING_TRIAL) {
                return Err(Error::TooLarge(format!("coupling trial with n·m = {} > {MAX_COUPLING_TRIAL}", n * m)));
            }
            if self.reference_size == 0 {
                return Err(Error::Invalid("reference coupling needs at least one pair".into()));
            }
        }
        Ok(())
    }

    /// Seed of trial `trial` at sample size `n`.
    pub fn trial_seed(&self, n: usize, trial: usize) -> u64 {
        derive_seed(self.seed, &[n as u64, trial as u64])
    }
}

/// One measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub n: usize,
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
    /// L¹(μ) map error, or `W₂` between couplings.
    pub error_value: f64,
    pub oracle_kind: String,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: usize,
    pub m: usize,
    pub completed: usize,
    pub median: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub rate: f64,
    /// `Ĉ · rate`.
    pub envelope: f64,
}

/// Self-consistency of a grid reference under a 4× refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub nodes: usize,
    pub refined_nodes: usize,
    pub gap_bound: f64,
    pub residual: f64,
    /// L¹(μ) distance between the two reference maps; bounds the change of
    /// every measured error.
    pub shift: f64,
    /// Tenth of the smallest median error.
    pub band: f64,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub scenario: Scenario,
    pub oracle_kind: String,
    pub rate_label: String,
    pub levels: Vec<LevelSummary>,
    /// Least-squares slope of log median against log n over the upper half of the grid.
    pub slope: Option<f64>,
    /// Median over rate at the smallest n.
    pub envelope_constant: f64,
    pub envelope_holds: bool,
    pub inversions: usize,
    /// At most one increase of the median along the grid.
    pub monotone_holds: bool,
    pub failures: Vec<TrialFailure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceCheck>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRun {
    pub config: ExperimentConfig,
    pub records: Vec<RateRecord>,
    pub summary: RateSummary,
}

impl RateRun {
    /// Columns `n,m,trial,seed,error_value,oracle_kind,wall_time_ms`.
    pub fn write_records_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_records_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.records)?)?;
        Ok(())
    }

    pub fn write_summary_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.summary)?)?;
        Ok(())
    }
}

/// L¹ distance between two maps over the rows of `points`.
fn l1_distance(points: &[f64], dim: usize, a: impl Fn(&[f64]) -> Vec<f64>, b: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let rows = points.len() / dim;
    points
        .chunks_exact(dim)
        .map(|x| dist_sq(&a(x), &b(x)).sqrt())
        .sum::<f64>()
        / rows as f64
}

/// Potential of an optimal dual. With `strict`, the duals are recentred so
/// that only cells carrying mass are tight, when such duals exist.
fn estimated_potential(mu: &Measure<f64>, nu: &Measure<f64>, strict: bool) -> Result<BrenierPotential<f64>> {
    let cost = build_cost(mu, nu)?;
    let mut sol = solve_with_cost(mu, nu, &cost)?;
    if strict {
        sol = sol.with_strict_duals(&cost);
    }
    BrenierPotential::from_solution(nu, &sol)
}

#[allow(clippy::large_enum_variant)]
enum Reference {
    Line(Oracle1d, Option<Envelope1d>),
    Grid(SemidiscreteReference),
}

impl Reference {
    fn map(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Reference::Line(_, Some(env)) => vec![env.map(x[0])],
            Reference::Line(o, None) => vec![o.map(x[0])],
            Reference::Grid(r) => r.map(x),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Reference::Line(..) => "quantile-1d",
            Reference::Grid(_) => "semidiscrete-grid",
        }
    }
}

fn line_reference(cfg: &ExperimentConfig) -> Result<Reference> {
    let o = Oracle1d::new(&cfg.source, &cfg.target)?;
    let env = o.semidiscrete_potential().map(Envelope1d::new);
    Ok(Reference::Line(o, env))
}

fn map_trial(cfg: &ExperimentConfig, reference: &Reference, nu_exact: Option<&Measure<f64>>, n: usize, m: usize, seed: u64) -> Result<f64> {
    let d = cfg.source.dim();
    let mu_hat = sample::<f64>(&cfg.source, n, derive_seed(seed, &[0]))?;
    let nu_hat = match nu_exact {
        Some(nu) => nu.clone(),
        None => sample::<f64>(&cfg.target, m, derive_seed(seed, &[1]))?,
    };
    let phi = estimated_potential(&mu_hat, &nu_hat, nu_exact.is_some())?;
    let eval = cfg.source.draw_points(cfg.eval_samples, derive_seed(seed, &[2]));
    let err = if d == 1 {
        let env = Envelope1d::new(&phi);
        l1_distance(&eval, 1, |x| vec![env.map(x[0])], |x| reference.map(x))
    } else {
        l1_distance(&eval, d, |x| phi.monge_map(x), |x| reference.map(x))
    };
    if !err.is_finite() || err < 0.0 {
        return Err(Error::Numerical {
            message: "map error is not a finite nonnegative number".into(),
            residual: err,
        });
    }
    Ok(err)
}

fn run_trials(
    cfg: &ExperimentConfig,
    kind: &str,
    mut trial: impl FnMut(usize, usize, u64) -> Result<f64>,
) -> Result<(Vec<RateRecord>, Vec<TrialFailure>)> {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (n, m) in cfg.sizes()? {
        for t in 0..cfg.trials {
            let seed = cfg.trial_seed(n, t);
            let start = Instant::now();
            match trial(n, m, seed) {
                Ok(error_value) => records.push(RateRecord {
                    n,
                    m,
                    trial: t,
                    seed,
                    error_value,
                    oracle_kind: kind.to_string(),
                    wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                }),
                Err(e) => failures.push(TrialFailure {
                    n,
                    trial: t,
                    seed,
                    message: e.to_string(),
                }),
            }
        }
    }
    Ok((records, failures))
}

/// Summarizes records grouped by `(n, m)` in grid order.
pub fn summarize(
    cfg: &ExperimentConfig,
    oracle_kind: &str,
    records: &[RateRecord],
    failures: Vec<TrialFailure>,
) -> Result<RateSummary> {
    let sizes = cfg.sizes()?;
    let mut levels: Vec<LevelSummary> = sizes
        .iter()
        .map(|&(n, m)| {
            let v: Vec<f64> = records.iter().filter(|r| r.n == n && r.m == m).map(|r| r.error_value).collect();
            LevelSummary {
                n,
                m,
                completed: v.len(),
                median: median(&v),
                mean: if v.is_empty() { f64::NAN } else { mean(&v) },
                std_dev: std_dev(&v),
                rate: cfg.scenario.rate(n, m),
                envelope: f64::NAN,
            }
        })
        .collect();
    let c_hat = levels[0].median / levels[0].rate;
    for l in &mut levels {
        l.envelope = c_hat * l.rate;
    }
    let envelope_holds = c_hat.is_finite()
        && levels.iter().all(|l| l.median.is_finite() && l.median <= l.envelope * (1.0 + 1e-12));
    let medians: Vec<f64> = levels.iter().map(|l| l.median).collect();
    let inv = inversions(&medians);
    let upper = levels.len() / 2;
    let xs: Vec<f64> = levels[upper..].iter().map(|l| l.n as f64).collect();
    Ok(RateSummary {
        scenario: cfg.scenario,
        oracle_kind: oracle_kind.to_string(),
        rate_label: cfg.scenario.rate_label().to_string(),
        slope: log_log_slope(&xs, &medians[upper..]),
        envelope_constant: c_hat,
        envelope_holds,
        inversions: inv,
        monotone_holds: inv <= 1 && medians.iter().all(|v| v.is_finite()),
        levels,
        failures,
        reference: None,
    })
}

/// Map-rate experiment: for every `(n, trial)` the plan between the samples
/// yields a potential whose averaging gradient is compared with the
/// reference map in L¹(μ) on fresh source draws.
pub fn run_map_rate(cfg: &ExperimentConfig) -> Result<RateRun> {
    cfg.validate()?;
    let (reference, nu_exact, check) = match cfg.scenario {
        Scenario::MapRate1d => (line_reference(cfg)?, None, None),
        Scenario::MapRate2dSemidiscrete => {
            let nu = cfg.target.quadrature(1)?;
            let coarse = oracle_semidiscrete_ref(&cfg.source, &nu, cfg.reference_size)?;
            let fine = oracle_semidiscrete_ref(&cfg.source, &nu, 4 * cfg.reference_size)?;
            let pts = cfg.source.draw_points(cfg.eval_samples, derive_seed(cfg.seed, &[u64::MAX]));
            let shift = l1_distance(&pts, cfg.source.dim(), |x| coarse.map(x), |x| fine.map(x));
            let check = ReferenceCheck {
                nodes: coarse.nodes,
                refined_nodes: fine.nodes,
                gap_bound: coarse.gap_bound,
                residual: coarse.residual,
                shift,
                band: f64::NAN,
                consistent: false,
            };
            (Reference::Grid(coarse), Some(nu), Some(check))
        }
        other => return Err(Error::Invalid(format!("{other} is not a map-rate scenario"))),
    };
    let kind = reference.kind();
    let (records, failures) = run_trials(cfg, kind, |n, m, seed| map_trial(cfg, &reference, nu_exact.as_ref(), n, m, seed))?;
    let mut summary = summarize(cfg, kind, &records, failures)?;
    if let Some(mut check) = check {
        let smallest = summary.levels.iter().map(|l| l.median).fold(f64::INFINITY, f64::min);
        check.band = 0.1 * smallest;
        check.consistent = check.shift < check.band;
        summary.reference = Some(check);
    }
    Ok(RateRun {
        config: cfg.clone(),
        records,
        summary,
    })
}

/// Discretized quantile coupling `(Q_μ(u_k), Q_ν(u_k))` with `u_k = (k + ½)/K`.
pub fn quantile_coupling(mu: &DistributionSpec, nu: &DistributionSpec, pairs: usize) -> Result<CouplingMeasure<f64>> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::Invalid("quantile coupling needs laws on the line".into()));
    }
    if pairs == 0 {
        return Err(Error::Invalid("quantile coupling needs at least one pair".into()));
    }
    let mut coords = Vec::with_capacity(2 * pairs);
    for k in 0..pairs {
        let u = (k as f64 + 0.5) / pairs as f64;
        coords.push(mu.quantile_1d(u)?);
        coords.push(nu.quantile_1d(u)?);
    }
    CouplingMeasure::from_pairs(2, coords, vec![1.0 / pairs as f64; pairs])
}

/// Coupling-rate experiment on the line: `W₂` between the optimal plan of
/// the samples, seen as a measure on `R²`, and the quantile coupling.
pub fn run_coupling_rate(cfg: &ExperimentConfig) -> Result<RateRun> {
    cfg.validate()?;
    if cfg.scenario != Scenario::CouplingRate {
        return Err(Error::Invalid(format!("{} is not the coupling scenario", cfg.scenario)));
    }
    let reference = quantile_coupling(&cfg.source, &cfg.target, cfg.reference_size)?;
    let kind = "quantile-coupling-1d";
    let (records, failures) = run_trials(cfg, kind, |n, m, seed| {
        let mu_hat = sample::<f64>(&cfg.source, n, derive_seed(seed, &[0]))?;
        let nu_hat = sample::<f64>(&cfg.target, m, derive_seed(seed, &[1]))?;
        let cost = build_cost(&mu_hat, &nu_hat)?;
        let sol = solve_with_cost(&mu_hat, &nu_hat, &cost)?;
        let gamma = CouplingMeasure::from_plan(&mu_hat, &nu_hat, &sol.plan)?;
        coupling_w2(&gamma, &reference)
    })?;
    let summary = summarize(cfg, kind, &records, failures)?;
    Ok(RateRun {
        config: cfg.clone(),
        records,
        summary,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Figure1Level {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    /// Source samples, row-major.
    pub samples: Vec<f64>,
    /// Estimated map at the samples, row-major.
    pub images: Vec<f64>,
    /// Cell index of every grid node.
    pub labels: Vec<usize>,
    /// Distinct estimated map values over the grid.
    pub distinct_values: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Figure1Summary {
    pub atoms: usize,
    pub grid_nodes: usize,
    pub sample_sizes: Vec<usize>,
    pub distinct_values: Vec<usize>,
    /// Mean μ-mass on which the cells at consecutive sizes disagree.
    pub symmetric_difference: Vec<f64>,
    pub piecewise_constant: bool,
    pub stabilizes: bool,
}

#[derive(Clone, Debug)]
pub struct Figure1Output {
    pub atoms: Measure<f64>,
    pub grid: Measure<f64>,
    pub levels: Vec<Figure1Level>,
    pub summary: Figure1Summary,
}

/// Semi-discrete estimates at increasing sample sizes. The estimated map is
/// constant on each cell, so it takes as many values as there are atoms, and
/// the cells settle as `n` grows.
pub fn run_figure1(cfg: &ExperimentConfig) -> Result<Figure1Output> {
    cfg.validate()?;
    if cfg.scenario != Scenario::Figure1Demo {
        return Err(Error::Invalid(format!("{} is not the demo scenario", cfg.scenario)));
    }
    let atoms = cfg.target.quadrature(1)?;
    let grid = cfg.source.quadrature(cfg.eval_samples)?;
    let mut levels = Vec::new();
    for &n in &cfg.n_grid {
        for trial in 0..cfg.trials {
            let seed = cfg.trial_seed(n, trial);
            let mu_hat = sample::<f64>(&cfg.source, n, derive_seed(seed, &[0]))?;
            let phi = estimated_potential(&mu_hat, &atoms, true)?;
            let images = mu_hat.points().flat_map(|x| phi.monge_map(x)).collect();
            let mut values = BTreeSet::new();
            let mut labels = Vec::with_capacity(grid.len());
            for x in grid.points() {
                labels.push(phi.eval_argmax(x).1);
                values.insert(phi.monge_map(x).iter().map(|v| v.to_bits()).collect::<Vec<u64>>());
            }
            levels.push(Figure1Level {
                n,
                trial,
                seed,
                samples: mu_hat.coords().to_vec(),
                images,
                labels,
                distinct_values: values.len(),
            });
        }
    }
    let t = cfg.trials;
    let symmetric_difference: Vec<f64> = (1..cfg.n_grid.len())
        .map(|k| {
            (0..t)
                .map(|trial| {
                    let (a, b) = (&levels[(k - 1) * t + trial].labels, &levels[k * t + trial].labels);
                    a.iter().zip(b).zip(grid.weights()).filter(|((p, q), _)| p != q).map(|(_, w)| w).sum::<f64>()
                })
                .sum::<f64>()
                / t as f64
        })
        .collect();
    let distinct_values: Vec<usize> = levels.iter().map(|l| l.distinct_values).collect();
    let summary = Figure1Summary {
        atoms: atoms.len(),
        grid_nodes: grid.len(),
        sample_sizes: cfg.n_grid.clone(),
        piecewise_constant: distinct_values.iter().all(|&v| v == atoms.len()),
        distinct_values,
        stabilizes: symmetric_difference.windows(2).all(|w| w[1] < w[0]),
        symmetric_difference,
    };
    Ok(Figure1Output {
        atoms,
        grid,
        levels,
        summary,
    })
}

impl Figure1Output {
    /// Writes `samples.csv` (`n,trial,x…,t…`), `atoms.csv` (`y…,weight`),
    /// `cells.csv` (`n,x…,label`, first trial only) and `summary.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let d = self.atoms.dim();
        let axis = |p: &'static str| (0..d).map(move |k| format!("{p}{}", k + 1));

        let mut w = csv::Writer::from_path(dir.join("samples.csv"))?;
        let mut header = vec!["n".to_string(), "trial".to_string()];
        header.extend(axis("x"));
        header.extend(axis("t"));
        w.write_record(&header)?;
        for l in &self.levels {
            for (x, t) in l.samples.chunks_exact(d).zip(l.images.chunks_exact(d)) {
                let mut row = vec![l.n.to_string(), l.trial.to_string()];
                row.extend(x.iter().chain(t).map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("atoms.csv"))?;
        let mut header: Vec<String> = axis("y").collect();
        header.push("weight".into());
        w.write_record(&header)?;
        for (y, b) in self.atoms.points().zip(self.atoms.weights()) {
            let mut row: Vec<String> = y.iter().map(|v| v.to_string()).collect();
            row.push(b.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("cells.csv"))?;
        let mut header = vec!["n".to_string()];
        header.extend(axis("x"));
        header.push("label".into());
        w.write_record(&header)?;
        for l in self.levels.iter().filter(|l| l.trial == 0) {
            for (x, label) in self.grid.points().zip(&l.labels) {
                let mut row = vec![l.n.to_string()];
                row.extend(x.iter().map(|v| v.to_string()));
                row.push(label.to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;

        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary)?)?;
        Ok(())
    }
}
