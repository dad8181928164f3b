//! Time evolution of eigenbasis density matrices.
//!
//! Two propagators share the [`Propagator`] trait: a classical fixed-step
//! fourth-order Runge–Kutta integrator driven by [`MasterEquation::apply`]
//! (`"rk4"`), and an exact propagator `exp(L t)·vec(ρ0)` built from the
//! Liouvillian matrix (`"expm"`), which serves as the oracle for the first.
//!
//! Populations `P{i}` (1-based eigenstate labels) are recorded at every step,
//! together with any requested coherences `rho_{i}_{j}`. Full density
//! matrices are kept every `snapshot_stride` steps. States are never
//! renormalized; drift is measured and reported in [`InvariantReport`].

use std::collections::BTreeMap;

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::generator::{check_liouvillian_capacity, MasterEquation};
use crate::registry::Registry;
use crate::system::EigenSystem;
use crate::{c, CMatrix};

/// Trace drift beyond which an integration run is aborted.
pub const TRACE_FAILURE_TOL: f64 = 1e-6;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = -1e-8;

/// A Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Domain("density matrix must be square".into()));
        }
        let herm = hermiticity_defect(&m);
        if herm > HERMITIAN_TOL {
            return Err(Error::Domain(format!("not Hermitian (defect {herm:.3e})")));
        }
        let tr = m.trace();
        if (tr - c(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::Domain(format!("trace is {tr}, expected 1")));
        }
        let min = min_eigenvalue(&m);
        if min < POSITIVITY_TOL {
            return Err(Error::Domain(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ`.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        Self::new(psi * psi.adjoint())
    }

    /// Projector on basis state `k` of a `dim`-dimensional space.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Domain(format!("state {k} outside dimension {dim}")));
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(k, k)] = c(1.0, 0.0);
        Ok(Self(m))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim) / c(dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

/// Computational basis state `label` (e.g. `"eg"`) written in the eigenbasis
/// of `eig`.
pub fn product_state(eig: &EigenSystem, label: &str) -> Result<DensityMatrix> {
    let k = eig
        .basis_labels()
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::Domain(format!("basis state '{label}' is not in the {:?} subspace", eig.subspace())))?;
    let mut psi = DVector::zeros(eig.dim());
    psi[k] = c(1.0, 0.0);
    DensityMatrix::new(eig.to_eigenbasis(&(&psi * psi.adjoint()))?)
}


/// `max |ρ − ρ†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    crate::max_abs(&(m - m.adjoint()))
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// A recorded time series.
#[derive(Debug, Clone, PartialEq)]
pub enum Series {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Series {
    pub fn len(&self) -> usize {
        match self {
            Series::Real(v) => v.len(),
            Series::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Real values as-is, complex values by modulus.
    pub fn magnitudes(&self) -> Vec<f64> {
        match self {
            Series::Real(v) => v.clone(),
            Series::Complex(v) => v.iter().map(|z| z.norm()).collect(),
        }
    }

    fn push_real(&mut self, x: f64) {
        if let Series::Real(v) = self {
            v.push(x);
        }
    }

    fn push_complex(&mut self, z: Complex64) {
        if let Series::Complex(v) = self {
            v.push(z);
        }
    }
}

/// Worst invariant deviations seen along a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub max_trace_drift: f64,
    pub max_hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

impl Default for InvariantReport {
    fn default() -> Self {
        Self {
            max_trace_drift: 0.0,
            max_hermiticity_defect: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

impl InvariantReport {
    fn observe_trace(&mut self, drift: f64) {
        self.max_trace_drift = self.max_trace_drift.max(drift);
    }

    fn observe_state(&mut self, m: &CMatrix) {
        self.max_hermiticity_defect = self.max_hermiticity_defect.max(hermiticity_defect(m));
        self.min_eigenvalue = self.min_eigenvalue.min(min_eigenvalue(m));
    }

    /// Errors unless drift ≤ `trace_tol`, defect ≤ `hermitian_tol` and the
    /// lowest eigenvalue ≥ `positivity_floor`.
    pub fn check(&self, trace_tol: f64, hermitian_tol: f64, positivity_floor: f64) -> Result<()> {
        let mut problems = Vec::new();
        if self.max_trace_drift > trace_tol {
            problems.push(format!("trace drift {:.3e} > {trace_tol:.1e}", self.max_trace_drift));
        }
        if self.max_hermiticity_defect > hermitian_tol {
            problems.push(format!(
                "Hermiticity defect {:.3e} > {hermitian_tol:.1e}",
                self.max_hermiticity_defect
            ));
        }
        if self.min_eigenvalue < positivity_floor {
            problems.push(format!(
                "minimum eigenvalue {:.3e} < {positivity_floor:.1e}",
                self.min_eigenvalue
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Invariant(problems.join("; ")))
        }
    }
}

/// Time grid, recorded observables and density-matrix snapshots of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub generator: String,
    pub propagator: String,
    pub times: Vec<f64>,
    pub series: BTreeMap<String, Series>,
    pub snapshot_times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub report: InvariantReport,
}

impl Trajectory {
    pub fn series(&self, name: &str) -> Result<&Series> {
        self.series
            .get(name)
            .ok_or_else(|| Error::UndefinedObservable(format!("no series named '{name}'")))
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.nrows())
    }
}

pub fn population_name(i: usize) -> String {
    format!("P{}", i + 1)
}

pub fn coherence_name(i: usize, j: usize) -> String {
    format!("rho_{}_{}", i + 1, j + 1)
}

/// Integration settings. Coherence indices are 0-based eigenstate labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub coherences: Vec<(usize, usize)>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_end: 100.0,
            snapshot_stride: 10,
            coherences: Vec::new(),
        }
    }
}

impl EvolveOptions {
    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Domain(format!("end time must be >= 0, got {}", self.t_end)));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Domain("snapshot stride must be at least 1".into()));
        }
        if let Some(&(i, j)) = self.coherences.iter().find(|&&(i, j)| i >= dim || j >= dim) {
            return Err(Error::Domain(format!(
                "coherence ({i}, {j}) outside dimension {dim}"
            )));
        }
        Ok(())
    }

    /// Number of steps and the step actually used (`t_end / steps`).
    pub fn grid(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let steps = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (steps, self.t_end / steps as f64)
    }
}

struct Recorder {
    times: Vec<f64>,
    series: BTreeMap<String, Series>,
    pops: Vec<String>,
    coherences: Vec<((usize, usize), String)>,
}

impl Recorder {
    fn new(dim: usize, coherences: &[(usize, usize)]) -> Self {
        let pops: Vec<String> = (0..dim).map(population_name).collect();
        let coherences: Vec<_> = coherences.iter().map(|&(i, j)| ((i, j), coherence_name(i, j))).collect();
        let mut series = BTreeMap::new();
        for p in &pops {
            series.insert(p.clone(), Series::Real(Vec::new()));
        }
        for (_, name) in &coherences {
            series.insert(name.clone(), Series::Complex(Vec::new()));
        }
        Self {
            times: Vec::new(),
            series,
            pops,
            coherences,
        }
    }

    fn record(&mut self, t: f64, rho: &CMatrix) {
        self.times.push(t);
        for (i, name) in self.pops.iter().enumerate() {
            self.series.get_mut(name).unwrap().push_real(rho[(i, i)].re);
        }
        for ((i, j), name) in &self.coherences {
            self.series.get_mut(name).unwrap().push_complex(rho[(*i, *j)]);
        }
    }
}

/// A time-stepping strategy for linear master equations.
pub trait Propagator: Send + Sync {
    fn name(&self) -> &'static str;

    fn propagate(
        &self,
        gen: &dyn MasterEquation,
        rho0: &DensityMatrix,
        opts: &EvolveOptions,
    ) -> Result<Trajectory>;
}

/// Classical fourth-order Runge–Kutta with a fixed step.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rk4;

impl Propagator for Rk4 {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn propagate(
        &self,
        gen: &dyn MasterEquation,
        rho0: &DensityMatrix,
        opts: &EvolveOptions,
    ) -> Result<Trajectory> {
        let d = gen.dim();
        check_state_dim(rho0, d)?;
        opts.validate(d)?;
        let (steps, h) = opts.grid();
        let half = c(0.5 * h, 0.0);
        let full = c(h, 0.0);
        let sixth = c(h / 6.0, 0.0);
        let two = c(2.0, 0.0);

        let mut rec = Recorder::new(d, &opts.coherences);
        let mut report = InvariantReport::default();
        let mut snapshot_times = Vec::new();
        let mut states = Vec::new();

        let mut rho = rho0.matrix().clone();
        let tr0 = rho.trace();
        rec.record(0.0, &rho);
        report.observe_state(&rho);
        snapshot_times.push(0.0);
        states.push(rho.clone());

        for step in 1..=steps {
            let k1 = gen.apply(&rho)?;
            let k2 = gen.apply(&(&rho + &k1 * half))?;
            let k3 = gen.apply(&(&rho + &k2 * half))?;
            let k4 = gen.apply(&(&rho + &k3 * full))?;
            rho += (k1 + (k2 + k3) * two + k4) * sixth;

            let t = step as f64 * h;
            let drift = (rho.trace() - tr0).norm();
            if !drift.is_finite() || rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::IntegrationFailure {
                    time: t,
                    reason: "state became non-finite".into(),
                });
            }
            if drift > TRACE_FAILURE_TOL {
                return Err(Error::IntegrationFailure {
                    time: t,
                    reason: format!("trace drifted by {drift:.3e}"),
                });
            }
            report.observe_trace(drift);
            rec.record(t, &rho);
            if step % opts.snapshot_stride == 0 || step == steps {
                report.observe_state(&rho);
                snapshot_times.push(t);
                states.push(rho.clone());
            }
        }

        Ok(Trajectory {
            generator: gen.name().to_string(),
            propagator: self.name().to_string(),
            times: rec.times,
            series: rec.series,
            snapshot_times,
            states,
            report,
        })
    }
}

/// Exact propagation through the matrix exponential of the Liouvillian,
/// evaluated on the snapshot grid of the options.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpmOracle;

impl Propagator for ExpmOracle {
    fn name(&self) -> &'static str {
        "expm"
    }

    fn propagate(
        &self,
        gen: &dyn MasterEquation,
        rho0: &DensityMatrix,
        opts: &EvolveOptions,
    ) -> Result<Trajectory> {
        let d = gen.dim();
        check_state_dim(rho0, d)?;
        opts.validate(d)?;
        let (steps, h) = opts.grid();
        let mut times: Vec<f64> = (0..=steps)
            .filter(|s| s % opts.snapshot_stride == 0)
            .map(|s| s as f64 * h)
            .collect();
        if steps % opts.snapshot_stride != 0 {
            times.push(steps as f64 * h);
        }
        let mut traj = exact_trajectory(&gen.liouvillian()?, rho0, &times, &opts.coherences)?;
        traj.generator = gen.name().to_string();
        Ok(traj)
    }
}

fn check_state_dim(rho0: &DensityMatrix, d: usize) -> Result<()> {
    if rho0.dim() != d {
        return Err(Error::Consistency(format!(
            "initial state has dimension {}, generator has {d}",
            rho0.dim()
        )));
    }
    Ok(())
}

/// Fixed-step RK4 evolution with default snapshot stride.
pub fn evolve(
    gen: &dyn MasterEquation,
    rho0: &DensityMatrix,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let opts = EvolveOptions {
        dt,
        t_end,
        ..Default::default()
    };
    Rk4.propagate(gen, rho0, &opts)
}

/// `ρ(t) = unvec(exp(L t)·vec(ρ0))` at each requested time.
pub fn evolve_oracle(liouvillian: &CMatrix, rho0: &DensityMatrix, times: &[f64]) -> Result<Trajectory> {
    exact_trajectory(liouvillian, rho0, times, &[])
}

fn exact_trajectory(
    liouvillian: &CMatrix,
    rho0: &DensityMatrix,
    times: &[f64],
    coherences: &[(usize, usize)],
) -> Result<Trajectory> {
    let d = rho0.dim();
    check_liouvillian_capacity(d)?;
    if liouvillian.nrows() != d * d || liouvillian.ncols() != d * d {
        return Err(Error::Consistency(format!(
            "Liouvillian is {}x{}, state needs {}",
            liouvillian.nrows(),
            liouvillian.ncols(),
            d * d
        )));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::Domain(format!("oracle times must be >= 0, got {t}")));
    }
    let v0 = DVector::from_column_slice(rho0.matrix().as_slice());
    let tr0 = rho0.matrix().trace();
    let mut rec = Recorder::new(d, coherences);
    let mut report = InvariantReport::default();
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let prop = (liouvillian * c(t, 0.0)).exp();
        let v = prop * &v0;
        let rho = CMatrix::from_column_slice(d, d, v.as_slice());
        report.observe_trace((rho.trace() - tr0).norm());
        report.observe_state(&rho);
        rec.record(t, &rho);
        states.push(rho);
    }
    Ok(Trajectory {
        generator: String::from("liouvillian"),
        propagator: String::from("expm"),
        times: rec.times,
        series: rec.series,
        snapshot_times: times.to_vec(),
        states,
        report,
    })
}

/// Registry holding the built-in propagators.
pub fn builtin_propagators() -> Registry<Box<dyn Propagator>> {
    let mut reg: Registry<Box<dyn Propagator>> = Registry::new("propagator");
    reg.register("rk4", "fixed-step classical Runge-Kutta, order 4", Box::new(Rk4))
        .expect("fresh registry");
    reg.register(
        "expm",
        "exact exp(L t) on the snapshot grid (scaling and squaring)",
        Box::new(ExpmOracle),
    )
    .expect("fresh registry");
    reg
}

/// Element `(i, j)` over time: the recorded series when available, the
/// snapshots otherwise.
fn element_series(traj: &Trajectory, i: usize, j: usize) -> Result<(Vec<f64>, Vec<Complex64>)> {
    if i == j {
        if let Ok(Series::Real(v)) = traj.series(&population_name(i)) {
            return Ok((traj.times.clone(), v.iter().map(|&x| c(x, 0.0)).collect()));
        }
    } else if let Ok(Series::Complex(v)) = traj.series(&coherence_name(i, j)) {
        return Ok((traj.times.clone(), v.clone()));
    }
    if traj.states.is_empty() || i >= traj.dim() || j >= traj.dim() {
        return Err(Error::UndefinedObservable(format!(
            "element ({}, {}) neither recorded nor available from snapshots",
            i + 1,
            j + 1
        )));
    }
    Ok((
        traj.snapshot_times.clone(),
        traj.states.iter().map(|s| s[(i, j)]).collect(),
    ))
}

/// `P(t) = |ρ_33(t)|/|ρ_33(0)|` and `Q(t) = |ρ_34(t)|/|ρ_34(0)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitObservables {
    pub times: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Normalized `φ3` population and `φ3/φ4` coherence of a two-qubit run.
pub fn observables_two_qubit(traj: &Trajectory) -> Result<TwoQubitObservables> {
    if traj.dim() != 4 {
        return Err(Error::Consistency(format!(
            "two-qubit observables need a 4-dimensional run, got {}",
            traj.dim()
        )));
    }
    let (mut tp, mut r33) = element_series(traj, 2, 2)?;
    let (tq, r34) = element_series(traj, 2, 3)?;
    if tp != tq && tq == traj.snapshot_times {
        tp = tq.clone();
        r33 = traj.states.iter().map(|s| s[(2, 2)]).collect();
    }
    let norm = |v: &[Complex64], name: &str| -> Result<Vec<f64>> {
        let v0 = v.first().map_or(0.0, |z| z.norm());
        if v0 == 0.0 {
            return Err(Error::UndefinedObservable(format!("{name} vanishes at t = 0")));
        }
        Ok(v.iter().map(|z| z.norm() / v0).collect())
    };
    let p = norm(&r33, "rho_33")?;
    let q = norm(&r34, "rho_34")?;
    if tp != tq {
        return Err(Error::UndefinedObservable(
            "rho_33 and rho_34 recorded on different grids".into(),
        ));
    }
    Ok(TwoQubitObservables { times: tp, p, q })
}

/// Eigenstate populations on the snapshot grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Populations {
    pub times: Vec<f64>,
    /// `values[i][k]` is `⟨ψ_i|ρ(t_k)|ψ_i⟩`.
    pub values: Vec<Vec<f64>>,
}

/// `P_i(t) = ⟨ψ_i|ρ(t)|ψ_i⟩` from the stored snapshots.
pub fn populations(traj: &Trajectory, eig: &EigenSystem) -> Result<Populations> {
    if traj.states.is_empty() {
        return Err(Error::UndefinedObservable("trajectory has no snapshots".into()));
    }
    if traj.dim() != eig.dim() {
        return Err(Error::Consistency(format!(
            "trajectory dimension {} does not match eigensystem dimension {}",
            traj.dim(),
            eig.dim()
        )));
    }
    let mut values = vec![Vec::with_capacity(traj.states.len()); eig.dim()];
    for (k, s) in traj.states.iter().enumerate() {
        for (i, row) in values.iter_mut().enumerate() {
            let p = s[(i, i)];
            if p.im.abs() > 1e-12 || !(-1e-10..=1.0 + 1e-10).contains(&p.re) {
                return Err(Error::Invariant(format!(
                    "population {} at t = {} is {p}",
                    i + 1,
                    traj.snapshot_times[k]
                )));
            }
            row.push(p.re);
        }
    }
    Ok(Populations {
        times: traj.snapshot_times.clone(),
        values,
    })
}
