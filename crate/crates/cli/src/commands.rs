//! The subcommands, as functions returning data; `main` does the printing.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use slngeo::blockdiag::{boundedness_verdict, BlockState, BoundednessReport, PeriodReport, Preset, PulseSystem};
use slngeo::families::{
    classify_exponential, classify_line, unbounded_certificate, ExponentialClass, LinearGeodesicSpec,
};
use slngeo::integrate::{
    integrate_window, FlowState, IntegratorOptions, PhaseState, ReducedState, Trajectory,
};
use slngeo::io::Table;
use slngeo::linalg::{nilpotency_index, DEFAULT_NILPOTENCY_TOLERANCE};
use slngeo::random::{random_block_state, random_phase_state, rng, seed_from_env};
use slngeo::{GroupPoint, SquareMatrix};

use crate::config::{Family, Format, ScenarioConfig, SweepConfig, SweepKind};
use crate::error::{invalid, CliError};

/// Horizon for locating two returns of a pulse orbit.
const PERIOD_SEARCH: f64 = 500.0;
/// Tolerance for recognising grouped pulse data.
const PULSE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub family: String,
    pub n: usize,
    pub samples: usize,
    pub t_first: f64,
    pub t_last: f64,
    pub energy: f64,
    /// Largest `|E - E0| / max(1, |E0|)`.
    pub max_energy_drift: f64,
    pub max_det_drift: f64,
    pub max_zeta_drift: f64,
    pub max_angmom_drift: f64,
    pub max_virial_residual: f64,
    pub classification: Option<String>,
    pub boundedness: Option<BoundednessReport>,
    pub period: Option<PeriodReport>,
    pub truncation: Option<String>,
    pub trajectory: Option<String>,
}

enum Initial {
    Phase(PhaseState),
    Reduced(ReducedState),
    Block(BlockState),
}

fn group_point(what: &str, m: &SquareMatrix) -> Result<GroupPoint, CliError> {
    GroupPoint::new(m.clone()).map_err(|e| invalid(what, e))
}

fn exponential_verdict(class: ExponentialClass, c: &SquareMatrix) -> Result<String, CliError> {
    Ok(match class {
        ExponentialClass::LinearNilpotent => {
            let k = nilpotency_index(c, DEFAULT_NILPOTENCY_TOLERANCE)?.unwrap_or(0);
            format!("Linear geodesic, index {k}")
        }
        other => other.to_string(),
    })
}

fn initial_state(family: &Family) -> Result<(Initial, Option<String>), CliError> {
    Ok(match family {
        Family::CustomPhase { a, adot } => {
            let g = group_point("a", a)?;
            let s = PhaseState::new(g, adot.clone()).map_err(|e| invalid("adot", e))?;
            (Initial::Phase(s), None)
        }
        Family::CustomReduced { beta, omega, zeta } => {
            let s = ReducedState::new(beta.clone(), omega.clone(), zeta.clone())
                .map_err(|e| invalid("reduced state", e))?;
            (Initial::Reduced(s), None)
        }
        Family::Linear { b, m } => {
            let spec = LinearGeodesicSpec::new(group_point("b", b)?, m.clone())
                .map_err(|e| invalid("linear geodesic", e))?;
            let verdict = format!("Linear geodesic, index {}", spec.index());
            (Initial::Phase(spec.phase_state(0.0)?), Some(verdict))
        }
        Family::Exponential { b, c } => {
            let class = classify_exponential(b, c).map_err(|e| invalid("exponential pair", e))?;
            let g = group_point("b", b)?;
            let v = b * c;
            let s = PhaseState::new(g, v).map_err(|e| invalid("c", e))?;
            (Initial::Phase(s), Some(exponential_verdict(class, c)?))
        }
        Family::Blockdiag { state } => (Initial::Block(state.clone()), None),
        Family::Preset { preset } => (Initial::Block(preset.state()), None),
    })
}

fn default_span(family: &Family) -> (f64, f64) {
    match family {
        Family::Preset { preset } => preset.window(),
        _ => (0.0, 10.0),
    }
}

fn flow<S: FlowState>(init: &S, span: (f64, f64), opts: &IntegratorOptions) -> Result<Trajectory<S>, CliError> {
    if !(span.0 <= 0.0 && 0.0 <= span.1 && span.0 < span.1) {
        return Err(CliError::Usage(format!(
            "t_span [{}, {}] must contain the initial time 0",
            span.0, span.1
        )));
    }
    opts.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(integrate_window(init, span.0, span.1, opts)?)
}

fn summarize<S: FlowState>(family: &Family, n: usize, tr: &Trajectory<S>) -> RunSummary {
    let e0 = tr.first().map_or(0.0, |s| s.report.energy);
    RunSummary {
        family: family.name().to_string(),
        n,
        samples: tr.len(),
        t_first: tr.first().map_or(0.0, |s| s.t),
        t_last: tr.last().map_or(0.0, |s| s.t),
        energy: e0,
        max_energy_drift: tr.max_of(|r| (r.energy - e0).abs() / e0.abs().max(1.0)),
        max_det_drift: tr.max_of(|r| r.det_drift),
        max_zeta_drift: tr.max_of(|r| r.zeta_drift),
        max_angmom_drift: tr.max_of(|r| r.angmom_drift),
        max_virial_residual: tr.max_of(|r| r.virial_residual),
        classification: None,
        boundedness: None,
        period: None,
        truncation: tr.truncation.as_ref().map(|t| t.to_string()),
        trajectory: None,
    }
}

/// Integrates a scenario without touching the file system.
pub fn simulate(config: &ScenarioConfig) -> Result<(Table, RunSummary), CliError> {
    let (init, classification) = initial_state(&config.family)?;
    let n = match &init {
        Initial::Phase(s) => s.dim(),
        Initial::Reduced(s) => s.dim(),
        Initial::Block(s) => s.dim(),
    };
    if let Some(expected) = config.n {
        if expected != n {
            return Err(CliError::Validation(format!(
                "config declares n = {expected} but the data has dimension {n}"
            )));
        }
    }
    let span = config.t_span.unwrap_or_else(|| default_span(&config.family));
    let opts = &config.integrator;
    let (table, mut summary) = match &init {
        Initial::Phase(s) => {
            let tr = flow(s, span, opts)?;
            (Table::from_trajectory(&tr), summarize(&config.family, n, &tr))
        }
        Initial::Reduced(s) => {
            let tr = flow(s, span, opts)?;
            (Table::from_trajectory(&tr), summarize(&config.family, n, &tr))
        }
        Initial::Block(s) => {
            let tr = flow(s, span, opts)?;
            let mut summary = summarize(&config.family, n, &tr);
            summary.boundedness = Some(boundedness_verdict(s));
            if let Ok((sys, planar)) = PulseSystem::from_block(s, PULSE_TOLERANCE) {
                summary.period = sys.period(planar, PERIOD_SEARCH, opts).ok();
            }
            (Table::from_block_trajectory(&tr), summary)
        }
    };
    summary.classification = classification;
    Ok((table, summary))
}

pub fn write_table(table: &Table, format: Format, path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => table.write_csv(file)?,
        Format::Json => table.write_json(file)?,
    }
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// `run`: writes the trajectory and `<stem>.summary.json` next to it.
pub fn run(config: &ScenarioConfig, out_dir: Option<&Path>) -> Result<RunSummary, CliError> {
    let (table, mut summary) = simulate(config)?;
    let stem = match &config.family {
        Family::Preset { preset } => preset.name(),
        other => other.name(),
    };
    let path = config.output.resolve(out_dir, stem);
    write_table(&table, config.output.format, &path)?;
    summary.trajectory = Some(path.display().to_string());
    write_json(&summary, &path.with_extension("summary.json"))?;
    Ok(summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ClassifyKind {
    /// `t -> A + tB`
    Line,
    /// `t -> A e^{tB}`
    Exp,
}

/// Verdict line, then the certificate line.
pub fn classify(kind: ClassifyKind, a: &SquareMatrix, b: &SquareMatrix) -> Result<Vec<String>, CliError> {
    if a.dim() != b.dim() {
        return Err(CliError::Validation(format!(
            "matrices have different sizes ({} and {})",
            a.dim(),
            b.dim()
        )));
    }
    let (verdict, velocity) = match kind {
        ClassifyKind::Line => {
            let verdict = if classify_line(a, b)? {
                let g = group_point("a", a)?;
                let k = nilpotency_index(&(g.inverse() * b), DEFAULT_NILPOTENCY_TOLERANCE)?.unwrap_or(0);
                format!("Linear geodesic, index {k}")
            } else {
                "NotGeodesic".to_string()
            };
            (verdict, b.clone())
        }
        ClassifyKind::Exp => {
            let class = classify_exponential(a, b).map_err(|e| invalid("exponential pair", e))?;
            (exponential_verdict(class, b)?, a * b)
        }
    };
    let certificate = match GroupPoint::new(a.clone()).and_then(|g| PhaseState::new(g, velocity)) {
        Ok(state) => {
            let report = unbounded_certificate(&state)?;
            match report.first {
                Some(first) => {
                    let all: Vec<String> = report.matches.iter().map(|c| c.to_string()).collect();
                    format!("certificate: {first} (matches: {})", all.join(", "))
                }
                None => "certificate: none".to_string(),
            }
        }
        Err(e) => format!("certificate: not applicable ({e})"),
    };
    Ok(vec![verdict, certificate])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FigureSummary {
    pub id: u32,
    pub path: String,
    pub samples: usize,
    pub window: (f64, f64),
    pub axis_min: Vec<f64>,
    pub axis_max: Vec<f64>,
    pub period: Option<f64>,
}

/// Semi-axis lengths of a preset over its window.
pub fn figure_table(preset: Preset, window: (f64, f64), dt: f64) -> Result<Table, CliError> {
    let opts = IntegratorOptions {
        dt_out: dt,
        ..Default::default()
    };
    let tr = flow(&preset.state(), window, &opts)?;
    if let Some(t) = &tr.truncation {
        return Err(CliError::Truncated(t.to_string()));
    }
    let m = preset.state().blocks();
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=m).map(|i| format!("axis_{i}")));
    let mut table = Table::new(columns);
    for s in &tr.samples {
        let mut row = vec![s.t];
        row.extend(s.state.axes());
        table.push(row)?;
    }
    Ok(table)
}

pub fn figures(id: u32, window: Option<(f64, f64)>, dt: f64, out_dir: &Path) -> Result<FigureSummary, CliError> {
    let preset = Preset::from_id(id).ok_or_else(|| CliError::Usage(format!("unknown figure id {id}")))?;
    let window = window.unwrap_or_else(|| preset.window());
    let table = figure_table(preset, window, dt)?;
    let path = out_dir.join(format!("{}.csv", preset.name()));
    write_table(&table, Format::Csv, &path)?;
    let m = table.columns.len() - 1;
    let axes: Vec<Vec<f64>> = (1..=m).map(|i| table.column(&format!("axis_{i}")).unwrap_or_default()).collect();
    let period = PulseSystem::from_block(&preset.state(), PULSE_TOLERANCE)
        .ok()
        .and_then(|(sys, init)| sys.period(init, PERIOD_SEARCH, &IntegratorOptions::default()).ok())
        .map(|p| p.period);
    Ok(FigureSummary {
        id,
        path: path.display().to_string(),
        samples: table.rows.len(),
        window,
        axis_min: axes.iter().map(|a| a.iter().cloned().fold(f64::INFINITY, f64::min)).collect(),
        axis_max: axes.iter().map(|a| a.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect(),
        period,
    })
}

const SWEEP_COLUMNS: [&str; 10] = [
    "index",
    "dim",
    "t_last",
    "energy_drift",
    "det_drift",
    "zeta_drift",
    "angmom_drift",
    "virial_residual",
    "norm_final",
    "truncated",
];

fn sweep_row<S: FlowState>(
    index: usize,
    dim: usize,
    init: &S,
    t_end: f64,
    opts: &IntegratorOptions,
    norm: impl Fn(&S) -> f64,
) -> Result<Vec<f64>, CliError> {
    let tr = flow(init, (0.0, t_end), opts)?;
    let e0 = tr.first().map_or(0.0, |s| s.report.energy);
    let last = tr.last().ok_or_else(|| CliError::Truncated("empty trajectory".into()))?;
    Ok(vec![
        index as f64,
        dim as f64,
        last.t,
        tr.max_of(|r| (r.energy - e0).abs() / e0.abs().max(1.0)),
        tr.max_of(|r| r.det_drift),
        tr.max_of(|r| r.zeta_drift),
        tr.max_of(|r| r.angmom_drift),
        tr.max_of(|r| r.virial_residual),
        norm(&last.state),
        f64::from(u8::from(tr.truncation.is_some())),
    ])
}

/// Runs the ensemble in parallel; scenario `k` uses seed `seed + k`, so the
/// table does not depend on scheduling.
pub fn sweep_table(config: &SweepConfig) -> Result<Table, CliError> {
    if config.dims.is_empty() || config.count == 0 {
        return Err(CliError::Usage("sweep needs non-empty dims and count > 0".into()));
    }
    if !(config.t_end > 0.0 && config.t_end.is_finite()) {
        return Err(CliError::Usage("sweep t_end must be positive".into()));
    }
    let seed = config.seed.unwrap_or_else(|| seed_from_env(0));
    let jobs: Vec<(usize, usize)> = config
        .dims
        .iter()
        .flat_map(|&d| std::iter::repeat_n(d, config.count))
        .enumerate()
        .collect();
    let rows: Vec<Result<Vec<f64>, CliError>> = jobs
        .par_iter()
        .map(|&(k, d)| {
            let mut r = rng(seed.wrapping_add(k as u64));
            match config.kind {
                SweepKind::Phase => {
                    if d < 2 {
                        return Err(CliError::Usage(format!("phase sweeps need n >= 2, got {d}")));
                    }
                    let init = random_phase_state(&mut r, d, config.sigma);
                    sweep_row(k, d, &init, config.t_end, &config.integrator, |s| s.a.matrix().hs_norm())
                }
                SweepKind::Block => {
                    if d < 1 {
                        return Err(CliError::Usage("block sweeps need at least one block".into()));
                    }
                    let init = random_block_state(&mut r, d, config.odd, config.sigma);
                    let n = init.dim();
                    sweep_row(k, n, &init, config.t_end, &config.integrator, |s| s.position_norm_sq().sqrt())
                }
            }
        })
        .collect();
    let mut table = Table::new(SWEEP_COLUMNS.iter().map(|c| c.to_string()).collect());
    for row in rows {
        table.push(row?)?;
    }
    Ok(table)
}

pub fn sweep(config: &SweepConfig, out_dir: Option<&Path>) -> Result<PathBuf, CliError> {
    let table = sweep_table(config)?;
    let path = config.output.resolve(out_dir, "sweep");
    write_table(&table, config.output.format, &path)?;
    Ok(path)
}
