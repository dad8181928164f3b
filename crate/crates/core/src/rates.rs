//! Golden-rule transition rates between chain eigenstates, the three-level
//! decay cascade, exponential-rate fits and decay-rate scans over chain
//! length.
//!
//! The downward rate `n → m` samples the bath at `ω = E_n − E_m > 0`:
//! `γ_{n→m} = Σ_αβ γ_αβ(ω) Z^α_{mn} Z^β_{mn}`. For a common bath this is
//! `|Σ_α √J_α(ω) Z^α_{mn}|²`; for independent baths the cross terms vanish.
//! Upward rates are zero.

use rayon::prelude::*;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::system::{coupling_operators, single_excitation_eigensystem, BathTopology, ChainSpec, CouplingOperatorSet, EigenSystem};
use crate::twoqubit::rate_matrix;

/// Bohr frequencies at or below this (in units of `Ω`) carry no rate.
const ZERO_FREQ_TOL: f64 = 1e-12;

/// Caches the coupling operators of one spec/eigensystem pair.
pub struct FgrCalculator<'a> {
    spec: &'a ChainSpec,
    eig: &'a EigenSystem,
    z: CouplingOperatorSet,
}

impl<'a> FgrCalculator<'a> {
    pub fn new(spec: &'a ChainSpec, eig: &'a EigenSystem) -> Result<Self> {
        Ok(Self {
            spec,
            eig,
            z: coupling_operators(spec, eig)?,
        })
    }

    /// Rate of `n → m` (0-based eigenstate indices); zero unless `E_n > E_m`.
    pub fn rate(&self, n: usize, m: usize) -> Result<f64> {
        let d = self.eig.dim();
        if n >= d || m >= d {
            return Err(Error::Domain(format!("transition {n} -> {m} outside dimension {d}")));
        }
        let w = self.eig.bohr(n, m);
        if w <= ZERO_FREQ_TOL * self.spec.omega() {
            return Ok(0.0);
        }
        let gamma = rate_matrix(&self.spec.spectra(), self.spec.bath(), w);
        let k = self.z.len();
        let mut acc = 0.0;
        for a in 0..k {
            for b in 0..k {
                acc += gamma[(a, b)] * self.z.element(a, m, n) * self.z.element(b, m, n);
            }
        }
        Ok(acc)
    }

    /// Total decay rate of state `n`, `Σ_m γ_{n→m}`.
    pub fn total(&self, n: usize) -> Result<f64> {
        (0..self.eig.dim()).map(|m| self.rate(n, m)).sum()
    }

    pub fn report(&self) -> Result<RateReport> {
        let d = self.eig.dim();
        let mut transitions = Vec::new();
        for n in 0..d {
            for m in 0..d {
                let w = self.eig.bohr(n, m);
                if w > ZERO_FREQ_TOL * self.spec.omega() {
                    transitions.push(Transition {
                        from: n,
                        to: m,
                        frequency: w,
                        rate: self.rate(n, m)?,
                    });
                }
            }
        }
        let totals = (0..d).map(|n| self.total(n)).collect::<Result<Vec<_>>>()?;
        Ok(RateReport {
            bath: self.spec.bath(),
            spec: self.spec.clone(),
            transitions,
            totals,
            fitted: vec![None; d],
        })
    }
}

/// Golden-rule rate of `n → m` for the spec's bath topology.
pub fn fgr_rate(spec: &ChainSpec, eig: &EigenSystem, n: usize, m: usize) -> Result<f64> {
    FgrCalculator::new(spec, eig)?.rate(n, m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub frequency: f64,
    pub rate: f64,
}

/// Golden-rule rates of every downward transition, per-state totals and
/// optional fitted rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub bath: BathTopology,
    pub spec: ChainSpec,
    pub transitions: Vec<Transition>,
    pub totals: Vec<f64>,
    pub fitted: Vec<Option<DecayFit>>,
}

/// Closed-form three-qubit decay rates of `ψ1` and `ψ2`, split into the
/// independent-bath part and the common-bath interference part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeQubitRates {
    pub gamma1_ind: f64,
    pub gamma2_ind: f64,
    pub gamma1_int: f64,
    pub gamma2_int: f64,
}

impl ThreeQubitRates {
    pub fn gamma1(&self, bath: BathTopology) -> f64 {
        match bath {
            BathTopology::Common => self.gamma1_ind + self.gamma1_int,
            BathTopology::Independent => self.gamma1_ind,
        }
    }

    pub fn gamma2(&self, bath: BathTopology) -> f64 {
        match bath {
            BathTopology::Common => self.gamma2_ind + self.gamma2_int,
            BathTopology::Independent => self.gamma2_ind,
        }
    }
}

pub fn fgr_three_qubit_closed_form(spec: &ChainSpec) -> Result<ThreeQubitRates> {
    if spec.n_qubits() != 3 {
        return Err(Error::UnsupportedSize {
            op: "three-qubit closed-form rates",
            expected: "3",
            got: spec.n_qubits(),
        });
    }
    let w12 = spec.lambda().abs() * std::f64::consts::SQRT_2;
    let w13 = 2.0 * w12;
    let j = |alpha: usize, w: f64| spec.spectral(alpha).evaluate(w);
    let (j1_12, j3_12) = (j(0, w12)?, j(2, w12)?);
    let (j1_13, j2_13, j3_13) = (j(0, w13)?, j(1, w13)?, j(2, w13)?);
    // ω_23 = ω_12
    let (j1_23, j3_23) = (j1_12, j3_12);
    Ok(ThreeQubitRates {
        gamma1_ind: 0.5 * j1_12 + 0.25 * j1_13 + j2_13 + 0.5 * j3_12 + 0.25 * j3_13,
        gamma2_ind: 0.5 * j1_23 + 0.5 * j3_23,
        gamma1_int: -(j1_12 * j3_12).sqrt() - (j1_13 * j2_13).sqrt() + 0.5 * (j1_13 * j3_13).sqrt()
            - (j2_13 * j3_13).sqrt(),
        gamma2_int: -(j1_23 * j3_23).sqrt(),
    })
}

/// Transition rates of the three-level cascade `ψ1 → {ψ2, ψ3}`, `ψ2 → ψ3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeRates {
    pub g12: f64,
    pub g13: f64,
    pub g23: f64,
}

impl CascadeRates {
    pub fn from_calculator(fgr: &FgrCalculator<'_>) -> Result<Self> {
        Ok(Self {
            g12: fgr.rate(0, 1)?,
            g13: fgr.rate(0, 2)?,
            g23: fgr.rate(1, 2)?,
        })
    }
}

/// `(e^{−a t} − e^{−b t})/(b − a)`, continuous at `a = b`.
fn exp_difference(a: f64, b: f64, t: f64) -> f64 {
    let delta = b - a;
    if delta == 0.0 {
        return t * (-a * t).exp();
    }
    (-a * t).exp() * -(-delta * t).exp_m1() / delta
}

/// Populations `(P1, P2, P3)` at time `t` of the cascade
/// `dP1/dt = −(γ12 + γ13)P1`, `dP2/dt = −γ23 P2 + γ12 P1`, starting from
/// eigenstate `initial` (0-based).
pub fn rate_cascade(rates: CascadeRates, initial: usize, t: f64) -> Result<[f64; 3]> {
    let CascadeRates { g12, g13, g23 } = rates;
    if [g12, g13, g23].iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::Domain("cascade rates must be finite and >= 0".into()));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    let g1 = g12 + g13;
    let (p1, p2) = match initial {
        0 => ((-g1 * t).exp(), g12 * exp_difference(g1, g23, t)),
        1 => (0.0, (-g23 * t).exp()),
        2 => (0.0, 0.0),
        _ => return Err(Error::Domain(format!("cascade has three levels, got initial state {initial}"))),
    };
    Ok([p1, p2, 1.0 - p1 - p2])
}

/// Least-squares fit of `−log(value)` against time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub samples: usize,
}

impl DecayFit {
    /// Fits below this coefficient of determination are flagged in reports.
    pub const GOOD_FIT: f64 = 0.999;

    pub fn is_good(&self) -> bool {
        self.r_squared >= Self::GOOD_FIT
    }
}

pub const MIN_FIT_SAMPLES: usize = 20;

/// Default fit window: 10 % to 60 % of the run.
pub fn default_window(t_end: f64) -> (f64, f64) {
    (0.1 * t_end, 0.6 * t_end)
}

/// Decay rate of a recorded series (modulus for complex series) on
/// `window = (t_a, t_b)`, both ends inclusive.
pub fn fit_decay_rate(traj: &Trajectory, observable: &str, window: (f64, f64)) -> Result<DecayFit> {
    let values = traj.series(observable)?.magnitudes();
    fit_exponential(&traj.times, &values, window)
}

pub fn fit_exponential(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Consistency(format!(
            "{} times for {} values",
            times.len(),
            values.len()
        )));
    }
    let (ta, tb) = window;
    let eps = 1e-9 * ta.abs().max(tb.abs()).max(1.0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < ta - eps || t > tb + eps {
            continue;
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::FitDomain(format!("non-positive sample {v} at t = {t}")));
        }
        xs.push(t);
        ys.push(v.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::FitDomain(format!(
            "window [{ta}, {tb}] holds {} samples, need {MIN_FIT_SAMPLES}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit {
        rate: -slope,
        r_squared,
        samples: xs.len(),
    })
}

/// Assigns dissipation coefficients to the qubits of an `n`-qubit chain.
pub trait ChiRule: Send + Sync {
    fn name(&self) -> &'static str;
    fn chis(&self, n: usize) -> Vec<f64>;
}

/// `χ_i = a·sin(iπ/(2N))`, `i = 1..N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineProfile {
    pub amplitude: f64,
}

impl Default for SineProfile {
    fn default() -> Self {
        Self { amplitude: 0.1 }
    }
}

impl ChiRule for SineProfile {
    fn name(&self) -> &'static str {
        "sine"
    }

    fn chis(&self, n: usize) -> Vec<f64> {
        (1..=n)
            .map(|i| self.amplitude * (i as f64 * std::f64::consts::PI / (2.0 * n as f64)).sin())
            .collect()
    }
}

/// The same `χ` on every qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    pub value: f64,
}

impl ChiRule for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn chis(&self, n: usize) -> Vec<f64> {
        vec![self.value; n]
    }
}

pub type ChiRuleFactory = Box<dyn Fn(f64) -> Box<dyn ChiRule> + Send + Sync>;

/// Registry of `χ` rules, each built from a single amplitude parameter.
pub fn builtin_chi_rules() -> Registry<ChiRuleFactory> {
    let mut reg: Registry<ChiRuleFactory> = Registry::new("chi rule");
    reg.register(
        "sine",
        "chi_i = amplitude * sin(i*pi/(2N))",
        Box::new(|a| Box::new(SineProfile { amplitude: a }) as Box<dyn ChiRule>),
    )
    .expect("fresh registry");
    reg.register(
        "uniform",
        "chi_i = amplitude on every qubit",
        Box::new(|a| Box::new(Uniform { value: a }) as Box<dyn ChiRule>),
    )
    .expect("fresh registry");
    reg
}

/// Which single-excitation state a length scan follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanTarget {
    /// The first excited state of the single-excitation band: the
    /// second-lowest mode, `ψ_{N−1}` for `λ > 0`.
    #[default]
    FirstExcited,
    /// The top of the band, `ψ_1` for `λ > 0`.
    Highest,
}

impl ScanTarget {
    /// Index of the target in descending-energy order.
    pub fn index(self, n: usize) -> usize {
        match self {
            ScanTarget::FirstExcited => n - 2,
            ScanTarget::Highest => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub n: usize,
    pub common: f64,
    pub independent: f64,
}

pub const MAX_SCAN_QUBITS: usize = 64;

/// Total golden-rule decay rate of the first excited single-excitation
/// state for each chain length, both topologies.
pub fn rates_vs_n_scan(
    omega: f64,
    lambda: f64,
    chi_rule: &dyn ChiRule,
    n_range: &[usize],
) -> Result<Vec<ScanRow>> {
    rates_vs_n_scan_for(omega, lambda, chi_rule, n_range, ScanTarget::default())
}

pub fn rates_vs_n_scan_for(
    omega: f64,
    lambda: f64,
    chi_rule: &dyn ChiRule,
    n_range: &[usize],
    target: ScanTarget,
) -> Result<Vec<ScanRow>> {
    if let Some(&n) = n_range.iter().find(|&&n| !(2..=MAX_SCAN_QUBITS).contains(&n)) {
        if n > MAX_SCAN_QUBITS {
            return Err(Error::Capacity {
                what: "scan chain length",
                requested: n,
                limit: MAX_SCAN_QUBITS,
            });
        }
        return Err(Error::Domain(format!("scan needs chains of at least 2 qubits, got {n}")));
    }
    let mut rows = n_range
        .par_iter()
        .map(|&n| {
            let spec = ChainSpec::new(n, omega, lambda, chi_rule.chis(n), BathTopology::Common)?;
            let eig = single_excitation_eigensystem(&spec);
            let k = target.index(n);
            let common = FgrCalculator::new(&spec, &eig)?.total(k)?;
            let ind_spec = spec.with_bath(BathTopology::Independent);
            let independent = FgrCalculator::new(&ind_spec, &eig)?.total(k)?;
            Ok(ScanRow { n, common, independent })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.n);
    Ok(rows)
}

/// Qualitative properties of a length scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanProperties {
    /// `common ≤ independent` on every row.
    pub ordering: bool,
    /// Independent-bath rate strictly decreasing in `N`.
    pub independent_decreasing: bool,
    /// Successive differences of the common-bath rate shrink in magnitude
    /// from `N = 6` on.
    pub common_levelling_off: bool,
}

impl ScanProperties {
    pub fn checks(&self) -> [(&'static str, bool); 3] {
        [
            ("gamma1_common <= gamma1_independent", self.ordering),
            ("gamma1_independent strictly decreasing", self.independent_decreasing),
            ("gamma1_common differences shrinking for N >= 6", self.common_levelling_off),
        ]
    }

    pub fn all(&self) -> bool {
        self.ordering && self.independent_decreasing && self.common_levelling_off
    }
}

/// Rows must be sorted by `N` with unit spacing for the difference check.
pub fn scan_properties(rows: &[ScanRow]) -> ScanProperties {
    let ordering = rows.iter().all(|r| r.common <= r.independent);
    let independent_decreasing = rows.windows(2).all(|w| w[1].independent < w[0].independent);
    let tail: Vec<&ScanRow> = rows.iter().filter(|r| r.n >= 6).collect();
    let diffs: Vec<f64> = tail.windows(2).map(|w| (w[1].common - w[0].common).abs()).collect();
    let common_levelling_off = diffs.windows(2).all(|d| d[1] < d[0]);
    ScanProperties {
        ordering,
        independent_decreasing,
        common_levelling_off,
    }
}
