//! The three experiments: two-qubit decay, chain decay with golden-rule
//! comparison, and the decay-rate scan over chain length.

use std::path::PathBuf;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::dynamics::{
    builtin_propagators, population_name, product_state, coherence_name, DensityMatrix,
    EvolveOptions, Trajectory,
};
use crate::error::{Error, Result};
use crate::generator::{builtin_generators, GeneratorOptions, MasterEquation};
use crate::rates::{
    builtin_chi_rules, fgr_three_qubit_closed_form, fit_decay_rate, rate_cascade,
    rates_vs_n_scan_for, scan_properties, CascadeRates, DecayFit, FgrCalculator,
};
use crate::system::{BathTopology, ChainSpec};
use crate::twoqubit::{gamma12, gamma34};
use crate::c;

use super::config::{ExperimentConfig, Scenario};
use super::output::{write_table, Cell, Table};

/// Invariant tolerances applied to every run.
pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.scenario {
        Scenario::TwoQubit => run_two_qubit(cfg),
        Scenario::Chain => run_chain(cfg),
        Scenario::ScanN => run_scan_n(cfg),
    }
}

fn chis(cfg: &ExperimentConfig, n: usize) -> Result<Vec<f64>> {
    match &cfg.chi {
        Some(v) => Ok(v.clone()),
        None => Ok(builtin_chi_rules().get(&cfg.chi_rule)?(cfg.chi_amplitude).chis(n)),
    }
}

fn generator(cfg: &ExperimentConfig, spec: &ChainSpec) -> Result<Box<dyn MasterEquation>> {
    builtin_generators().get(&cfg.generator)?(spec, &GeneratorOptions::default())
}

fn evolve_opts(cfg: &ExperimentConfig, t_end: f64, coherences: Vec<(usize, usize)>) -> EvolveOptions {
    EvolveOptions {
        dt: cfg.dt,
        t_end,
        snapshot_stride: cfg.snapshot_stride,
        coherences,
    }
}

fn propagate(
    cfg: &ExperimentConfig,
    gen: &dyn MasterEquation,
    rho0: &DensityMatrix,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    builtin_propagators().get(&cfg.propagator)?.propagate(gen, rho0, opts)
}

/// Trace and Hermiticity violations are fatal. Positivity violations are
/// fatal for the Lindblad equation and reported as warnings for the
/// non-secular two-qubit equation, which does not preserve positivity.
fn check_invariants(traj: &Trajectory, gen: &dyn MasterEquation, label: &str) -> Result<Option<String>> {
    let r = traj.report;
    r.check(TRACE_TOL, HERMITIAN_TOL, f64::NEG_INFINITY)
        .map_err(|e| Error::Invariant(format!("{label}: {e}")))?;
    let floor = gen.positivity_floor();
    if r.min_eigenvalue >= floor {
        return Ok(None);
    }
    let msg = format!(
        "{label}: minimum eigenvalue {:.3e} below {floor:.0e}",
        r.min_eigenvalue
    );
    if gen.name() == "redfield" {
        Ok(Some(format!("{msg} (non-secular equation, not positivity preserving)")))
    } else {
        Err(Error::Invariant(msg))
    }
}

/// Fit failures become warnings with an empty cell.
fn try_fit(traj: &Trajectory, name: &str, window: [f64; 2], label: &str, warnings: &mut Vec<String>) -> Option<DecayFit> {
    match fit_decay_rate(traj, name, (window[0], window[1])) {
        Ok(fit) => {
            if !fit.is_good() {
                warnings.push(format!("{label}: poor exponential fit, r^2 = {:.6}", fit.r_squared));
            }
            Some(fit)
        }
        Err(e) => {
            warnings.push(format!("{label}: {e}"));
            None
        }
    }
}

fn rel_error(fitted: Option<f64>, exact: f64) -> Option<f64> {
    match fitted {
        Some(f) if exact != 0.0 => Some((f - exact).abs() / exact.abs()),
        _ => None,
    }
}

fn finish(cfg: &ExperimentConfig, mut out: RunOutput, tables: Vec<(&str, Table)>) -> Result<RunOutput> {
    for (name, mut table) in tables {
        table.notes.extend(out.warnings.iter().map(|w| format!("warning: {w}")));
        out.files.push(write_table(cfg, name, &table)?);
    }
    Ok(out)
}

struct TwoQubitRun {
    bath: BathTopology,
    times: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    gamma33: (f64, Option<DecayFit>),
    gamma12: (f64, Option<DecayFit>),
}

fn two_qubit_run(cfg: &ExperimentConfig, spec: &ChainSpec, warnings: &mut Vec<String>) -> Result<TwoQubitRun> {
    let bath = spec.bath();
    let gen = generator(cfg, spec)?;
    let label = format!("{} {bath}", gen.name());

    let rho0 = product_state(gen.eigensystem(), "eg")?;
    let traj = propagate(cfg, gen.as_ref(), &rho0, &evolve_opts(cfg, cfg.t_end, vec![(2, 3)]))?;
    warnings.extend(check_invariants(&traj, gen.as_ref(), &label)?);
    let (p0, q0) = (rho0.matrix()[(2, 2)].re, rho0.matrix()[(2, 3)].norm());
    let p = traj.states.iter().map(|s| s[(2, 2)].re / p0).collect();
    let q = traj.states.iter().map(|s| s[(2, 3)].norm() / q0).collect();
    // P decays at 2Γ33 times the generator's rate scale.
    let fit33 = try_fit(&traj, &population_name(2), cfg.fit_window, &format!("{label} gamma33"), warnings)
        .map(|f| DecayFit {
            rate: f.rate / (2.0 * gen.rate_scale()),
            ..f
        });

    let psi = DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]) / c(2f64.sqrt(), 0.0);
    let coh0 = DensityMatrix::pure(&psi)?;
    let [ca, cb] = cfg.coherence_window;
    let coh = propagate(cfg, gen.as_ref(), &coh0, &evolve_opts(cfg, cb, vec![(0, 1)]))?;
    warnings.extend(check_invariants(&coh, gen.as_ref(), &format!("{label} coherence run"))?);
    let fit12 = try_fit(&coh, &coherence_name(0, 1), [ca, cb], &format!("{label} gamma12"), warnings)
        .map(|f| DecayFit {
            rate: f.rate / gen.rate_scale(),
            ..f
        });

    Ok(TwoQubitRun {
        bath,
        times: traj.snapshot_times,
        p,
        q,
        gamma33: (gamma34(spec)?.for_bath(bath), fit33),
        gamma12: (gamma12(spec)?.for_bath(bath), fit12),
    })
}

pub fn run_two_qubit(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let base = ChainSpec::new(2, cfg.omega, cfg.lambda, chis(cfg, 2)?, BathTopology::Common)?;
    let mut out = RunOutput::default();
    let runs = cfg
        .bath
        .topologies()
        .into_iter()
        .map(|b| two_qubit_run(cfg, &base.with_bath(b), &mut out.warnings))
        .collect::<Result<Vec<_>>>()?;

    let mut columns = vec!["t".to_string()];
    columns.extend(runs.iter().map(|r| format!("P_{}", r.bath)));
    columns.extend(runs.iter().map(|r| format!("Q_{}", r.bath)));
    let mut series = Table::new(columns);
    for (k, &t) in runs[0].times.iter().enumerate() {
        let mut row = vec![Cell::Num(t)];
        row.extend(runs.iter().map(|r| Cell::Num(r.p[k])));
        row.extend(runs.iter().map(|r| Cell::Num(r.q[k])));
        series.push(row);
    }
    if let [com, ind] = &runs[..] {
        let holds = com.p.iter().zip(&ind.p).all(|(a, b)| a >= b);
        series.notes.push(format!(
            "check P_common >= P_independent pointwise: {}",
            if holds { "holds" } else { "violated" }
        ));
    }

    let mut rates = Table::new(["quantity", "bath", "closed_form", "fitted", "rel_error", "r_squared", "samples"]);
    for (quantity, pick) in [
        ("gamma12", (|r: &TwoQubitRun| r.gamma12) as fn(&TwoQubitRun) -> (f64, Option<DecayFit>)),
        ("gamma33", |r: &TwoQubitRun| r.gamma33),
    ] {
        for r in &runs {
            let (exact, fit) = pick(r);
            let fitted = fit.map(|f| f.rate);
            rates.push(vec![
                quantity.into(),
                r.bath.label().into(),
                exact.into(),
                fitted.into(),
                rel_error(fitted, exact).into(),
                fit.map(|f| f.r_squared).into(),
                fit.map_or(Cell::Empty, |f| Cell::Int(f.samples)),
            ]);
        }
    }
    finish(cfg, out, vec![("two_qubit_timeseries.csv", series), ("two_qubit_rates.csv", rates)])
}

struct ChainRun {
    bath: BathTopology,
    /// 1-based initial eigenstate.
    initial: usize,
    times: Vec<f64>,
    /// `pops[i][k]`: population of eigenstate `i` at snapshot `k`.
    pops: Vec<Vec<f64>>,
    fit: Option<DecayFit>,
    warnings: Vec<String>,
}

fn chain_run(cfg: &ExperimentConfig, spec: &ChainSpec, initial: usize) -> Result<ChainRun> {
    let gen = generator(cfg, spec)?;
    let label = format!("{} {} from psi{initial}", gen.name(), spec.bath());
    let mut warnings = Vec::new();
    let rho0 = DensityMatrix::basis_state(gen.dim(), initial - 1)?;
    let traj = propagate(cfg, gen.as_ref(), &rho0, &evolve_opts(cfg, cfg.t_end, Vec::new()))?;
    warnings.extend(check_invariants(&traj, gen.as_ref(), &label)?);
    let fit = try_fit(&traj, &population_name(initial - 1), cfg.fit_window, &label, &mut warnings);
    let pops = (0..gen.dim())
        .map(|i| traj.states.iter().map(|s| s[(i, i)].re).collect())
        .collect();
    Ok(ChainRun {
        bath: spec.bath(),
        initial,
        times: traj.snapshot_times,
        pops,
        fit,
        warnings,
    })
}

pub fn run_chain(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let n = cfg.n_qubits;
    let base = ChainSpec::new(n, cfg.omega, cfg.lambda, chis(cfg, n)?, BathTopology::Common)?;
    let initial: Vec<usize> = if cfg.initial_states.is_empty() {
        (1..n).collect()
    } else {
        cfg.initial_states.clone()
    };
    let baths = cfg.bath.topologies();
    let jobs: Vec<(BathTopology, usize)> = initial
        .iter()
        .flat_map(|&i| baths.iter().map(move |&b| (b, i)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(b, i)| chain_run(cfg, &base.with_bath(b), i))
        .collect::<Result<Vec<_>>>()?;
    let mut out = RunOutput::default();
    out.warnings.extend(runs.iter().flat_map(|r| r.warnings.iter().cloned()));

    let eig = GeneratorOptions::default().eigensystem(&base)?;
    let specs: Vec<ChainSpec> = baths.iter().map(|&b| base.with_bath(b)).collect();
    let calcs = specs
        .iter()
        .map(|s| FgrCalculator::new(s, &eig))
        .collect::<Result<Vec<_>>>()?;
    let calc_for = |b: BathTopology| &calcs[baths.iter().position(|&x| x == b).unwrap()];
    let closed = if n == 3 { Some(fgr_three_qubit_closed_form(&base)?) } else { None };

    // Columns: every run's own population, then for N = 3 the cascade overlay
    // of all three levels for each run.
    let cascade: Vec<Option<Vec<[f64; 3]>>> = runs
        .iter()
        .map(|r| {
            if n != 3 {
                return Ok(None);
            }
            let rates = CascadeRates::from_calculator(calc_for(r.bath))?;
            r.times
                .iter()
                .map(|&t| rate_cascade(rates, r.initial - 1, t))
                .collect::<Result<Vec<_>>>()
                .map(Some)
        })
        .collect::<Result<_>>()?;

    let mut columns = vec!["t".to_string()];
    for r in &runs {
        columns.push(format!("P{}_{}", r.initial, r.bath));
    }
    for (r, cas) in runs.iter().zip(&cascade) {
        if cas.is_some() {
            for level in 1..=3 {
                columns.push(format!("from{}_P{level}_{}", r.initial, r.bath));
                columns.push(format!("from{}_P{level}_cascade_{}", r.initial, r.bath));
            }
        }
    }
    let mut series = Table::new(columns);
    for (k, &t) in runs[0].times.iter().enumerate() {
        let mut row = vec![Cell::Num(t)];
        row.extend(runs.iter().map(|r| Cell::Num(r.pops[r.initial - 1][k])));
        for (r, cas) in runs.iter().zip(&cascade) {
            if let Some(cas) = cas {
                for (level, &p) in cas[k].iter().enumerate() {
                    row.push(Cell::Num(r.pops[level][k]));
                    row.push(Cell::Num(p));
                }
            }
        }
        series.push(row);
    }
    if baths.len() == 2 && initial.contains(&1) {
        let com = runs.iter().find(|r| r.initial == 1 && r.bath == BathTopology::Common).unwrap();
        let ind = runs.iter().find(|r| r.initial == 1 && r.bath == BathTopology::Independent).unwrap();
        let holds = com.pops[0].iter().zip(&ind.pops[0]).all(|(a, b)| a >= b);
        series.notes.push(format!(
            "check P1_common >= P1_independent pointwise: {}",
            if holds { "holds" } else { "violated" }
        ));
    }

    let mut rates = Table::new([
        "state",
        "bath",
        "fgr_total",
        "closed_form",
        "fitted",
        "rel_error",
        "r_squared",
        "cascade_sup_error",
    ]);
    for (r, cas) in runs.iter().zip(&cascade) {
        let fgr = calc_for(r.bath).total(r.initial - 1)?;
        let closed_form = closed.and_then(|cf| match r.initial {
            1 => Some(cf.gamma1(r.bath)),
            2 => Some(cf.gamma2(r.bath)),
            _ => None,
        });
        let sup = cas.as_ref().map(|cas| {
            cas.iter()
                .enumerate()
                .flat_map(|(k, p)| (0..3).map(move |l| (k, l, p[l])))
                .map(|(k, l, p)| (p - r.pops[l][k]).abs())
                .fold(0.0, f64::max)
        });
        let fitted = r.fit.map(|f| f.rate);
        rates.push(vec![
            Cell::Int(r.initial),
            r.bath.label().into(),
            fgr.into(),
            closed_form.into(),
            fitted.into(),
            rel_error(fitted, fgr).into(),
            r.fit.map(|f| f.r_squared).into(),
            sup.into(),
        ]);
    }

    let mut transitions = Table::new(["from", "to", "frequency", "bath", "rate"]);
    for (b, calc) in baths.iter().zip(&calcs) {
        for tr in calc.report()?.transitions {
            transitions.push(vec![
                Cell::Int(tr.from + 1),
                Cell::Int(tr.to + 1),
                tr.frequency.into(),
                b.label().into(),
                tr.rate.into(),
            ]);
        }
    }
    finish(
        cfg,
        out,
        vec![
            ("chain_timeseries.csv", series),
            ("chain_rates.csv", rates),
            ("chain_transitions.csv", transitions),
        ],
    )
}

pub fn run_scan_n(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rule = builtin_chi_rules().get(&cfg.chi_rule)?(cfg.chi_amplitude);
    let range: Vec<usize> = (cfg.n_min..=cfg.n_max).collect();
    let rows = rates_vs_n_scan_for(cfg.omega, cfg.lambda, rule.as_ref(), &range, cfg.scan_state.into())?;
    let mut table = Table::new(["N", "gamma1_common", "gamma1_independent"]);
    for r in &rows {
        table.push(vec![Cell::Int(r.n), r.common.into(), r.independent.into()]);
    }
    let props = scan_properties(&rows);
    let mut out = RunOutput::default();
    for (name, ok) in props.checks() {
        table.notes.push(format!("check {name}: {}", if ok { "holds" } else { "violated" }));
        if !ok {
            out.warnings.push(format!("scan property violated: {name}"));
        }
    }
    finish(cfg, out, vec![("scan_n.csv", table)])
}
