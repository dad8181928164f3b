//! Experiment configuration: scenario defaults, TOML file values and
//! command-line overrides, merged in that order.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::ScanTarget;
use crate::system::BathTopology;

/// Overrides the output directory of every run.
pub const OUT_DIR_ENV: &str = "DEPHASING_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    TwoQubit,
    Chain,
    ScanN,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::TwoQubit => "two-qubit",
            Scenario::Chain => "chain",
            Scenario::ScanN => "scan-n",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BathChoice {
    Common,
    Independent,
    Both,
}

impl BathChoice {
    pub fn topologies(self) -> Vec<BathTopology> {
        match self {
            BathChoice::Common => vec![BathTopology::Common],
            BathChoice::Independent => vec![BathTopology::Independent],
            BathChoice::Both => vec![BathTopology::Common, BathTopology::Independent],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScanState {
    FirstExcited,
    Highest,
}

impl From<ScanState> for ScanTarget {
    fn from(s: ScanState) -> Self {
        match s {
            ScanState::FirstExcited => ScanTarget::FirstExcited,
            ScanState::Highest => ScanTarget::Highest,
        }
    }
}

/// Values read from a config file or the command line. Every field is
/// optional; unset fields fall back to the scenario defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub scenario: Option<Scenario>,
    pub n_qubits: Option<usize>,
    pub omega: Option<f64>,
    pub lambda: Option<f64>,
    pub chi: Option<Vec<f64>>,
    pub chi_rule: Option<String>,
    pub chi_amplitude: Option<f64>,
    pub bath: Option<BathChoice>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub snapshot_stride: Option<usize>,
    pub fit_window: Option<[f64; 2]>,
    pub coherence_window: Option<[f64; 2]>,
    pub generator: Option<String>,
    pub propagator: Option<String>,
    pub initial_states: Option<Vec<usize>>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub scan_state: Option<ScanState>,
    pub output: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: ConfigOverrides) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { Self { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            scenario, n_qubits, omega, lambda, chi, chi_rule, chi_amplitude, bath, dt, t_end,
            snapshot_stride, fit_window, coherence_window, generator, propagator, initial_states,
            n_min, n_max, scan_state, output
        )
    }
}

/// A fully resolved experiment. Serialized verbatim into output headers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n_qubits: usize,
    pub omega: f64,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<Vec<f64>>,
    pub chi_rule: String,
    pub chi_amplitude: f64,
    pub bath: BathChoice,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub fit_window: [f64; 2],
    pub coherence_window: [f64; 2],
    pub generator: String,
    pub propagator: String,
    pub initial_states: Vec<usize>,
    pub n_min: usize,
    pub n_max: usize,
    pub scan_state: ScanState,
    pub output: PathBuf,
}

impl ExperimentConfig {
    /// Parameter set of the scenario with nothing overridden.
    pub fn defaults(scenario: Scenario) -> Self {
        let base = Self {
            scenario,
            n_qubits: 2,
            omega: 1.0,
            lambda: 0.1,
            chi: Some(vec![0.04, 0.01]),
            chi_rule: "sine".into(),
            chi_amplitude: 0.1,
            bath: BathChoice::Both,
            dt: 1e-2,
            t_end: 100.0,
            snapshot_stride: 10,
            fit_window: [10.0, 60.0],
            coherence_window: [1.0, 10.0],
            generator: "redfield".into(),
            propagator: "rk4".into(),
            initial_states: Vec::new(),
            n_min: 3,
            n_max: 10,
            scan_state: ScanState::FirstExcited,
            output: PathBuf::from("results"),
        };
        match scenario {
            Scenario::TwoQubit => base,
            Scenario::Chain => Self {
                n_qubits: 3,
                lambda: 0.2,
                chi: None,
                t_end: 200.0,
                fit_window: [20.0, 120.0],
                generator: "lindblad".into(),
                ..base
            },
            Scenario::ScanN => Self {
                n_qubits: 3,
                lambda: 0.2,
                chi: None,
                generator: "lindblad".into(),
                ..base
            },
        }
    }

    /// Applies overrides on top of the scenario defaults. The scenario
    /// must be set somewhere. `out_dir_env` wins over a file or flag-free
    /// output path but not over an explicit flag, which the caller passes
    /// as `flag_output`.
    pub fn resolve(
        overrides: ConfigOverrides,
        flag_output: Option<PathBuf>,
        out_dir_env: Option<PathBuf>,
    ) -> Result<Self> {
        let scenario = overrides
            .scenario
            .ok_or_else(|| Error::Config("no scenario given (two-qubit, chain or scan-n)".into()))?;
        let mut cfg = Self::defaults(scenario);
        let o = overrides;
        if let Some(n) = o.n_qubits {
            cfg.n_qubits = n;
        }
        if o.n_qubits.is_some() && o.chi.is_none() && scenario == Scenario::TwoQubit {
            cfg.chi = None;
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = o.$f { cfg.$f = v; })* };
        }
        set!(
            omega, lambda, chi_amplitude, bath, dt, t_end, snapshot_stride, generator, propagator,
            initial_states, n_min, n_max, scan_state
        );
        if let Some(rule) = o.chi_rule {
            cfg.chi_rule = rule;
            if o.chi.is_none() {
                cfg.chi = None;
            }
        }
        if o.chi.is_some() {
            cfg.chi = o.chi;
        }
        if o.t_end.is_some() && o.fit_window.is_none() {
            let t = cfg.t_end;
            cfg.fit_window = [0.1 * t, 0.6 * t];
        }
        if let Some(w) = o.fit_window {
            cfg.fit_window = w;
        }
        if let Some(w) = o.coherence_window {
            cfg.coherence_window = w;
        }
        if let Some(p) = flag_output.or(out_dir_env).or(o.output) {
            cfg.output = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("omega", self.omega),
            ("lambda", self.lambda),
            ("chi_amplitude", self.chi_amplitude),
            ("dt", self.dt),
            ("t_end", self.t_end),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if self.omega <= 0.0 {
            return bad(format!("omega must be positive, got {}", self.omega));
        }
        if self.dt <= 0.0 || self.t_end <= 0.0 {
            return bad(format!("dt and t_end must be positive, got {} and {}", self.dt, self.t_end));
        }
        if self.dt > self.t_end {
            return bad(format!("dt {} exceeds t_end {}", self.dt, self.t_end));
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be at least 1".into());
        }
        for (name, [a, b]) in [("fit_window", self.fit_window), ("coherence_window", self.coherence_window)] {
            if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b) {
                return bad(format!("{name} must satisfy 0 <= start < end, got [{a}, {b}]"));
            }
        }
        if self.fit_window[1] > self.t_end {
            return bad(format!(
                "fit_window end {} lies beyond t_end {}",
                self.fit_window[1], self.t_end
            ));
        }
        if let Some(chi) = &self.chi {
            if let Some(x) = chi.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return bad(format!("chi values must be finite and >= 0, got {x}"));
            }
            if self.scenario != Scenario::ScanN && chi.len() != self.n_qubits {
                return bad(format!(
                    "{} chi values given for {} qubits",
                    chi.len(),
                    self.n_qubits
                ));
            }
            if self.scenario == Scenario::ScanN {
                return bad("scan-n takes a chi rule, not a chi list".into());
            }
        }
        match self.scenario {
            Scenario::TwoQubit if self.n_qubits != 2 => {
                bad(format!("two-qubit scenario needs n_qubits = 2, got {}", self.n_qubits))
            }
            Scenario::Chain if self.n_qubits < 3 => {
                bad(format!("chain scenario needs n_qubits >= 3, got {}", self.n_qubits))
            }
            Scenario::Chain => {
                if let Some(i) = self.initial_states.iter().find(|&&i| i == 0 || i >= self.n_qubits) {
                    return bad(format!(
                        "initial state {i} outside 1..{}",
                        self.n_qubits - 1
                    ));
                }
                Ok(())
            }
            Scenario::ScanN if self.n_min < 2 || self.n_min > self.n_max => {
                bad(format!("scan range {}..={} is empty or below 2", self.n_min, self.n_max))
            }
            _ => Ok(()),
        }
    }

    /// TOML rendering used for provenance headers.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(s: Scenario) -> ConfigOverrides {
        ConfigOverrides {
            scenario: Some(s),
            ..Default::default()
        }
    }

    #[test]
    fn defaults_resolve() {
        for s in [Scenario::TwoQubit, Scenario::Chain, Scenario::ScanN] {
            let cfg = ExperimentConfig::resolve(scenario(s), None, None).unwrap();
            assert_eq!(cfg, ExperimentConfig::defaults(s));
        }
    }

    #[test]
    fn missing_scenario() {
        assert!(matches!(
            ExperimentConfig::resolve(ConfigOverrides::default(), None, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn file_then_flags() {
        let file: ConfigOverrides = toml::from_str("scenario = \"chain\"\nn_qubits = 5\nlambda = 0.3\n").unwrap();
        let flags = ConfigOverrides {
            lambda: Some(0.25),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(file.overlay(flags), None, None).unwrap();
        assert_eq!((cfg.n_qubits, cfg.lambda), (5, 0.25));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ConfigOverrides>("scenaro = \"chain\"").is_err());
    }

    #[test]
    fn output_precedence() {
        let mut o = scenario(Scenario::TwoQubit);
        o.output = Some("from-file".into());
        let env = Some(PathBuf::from("from-env"));
        let cfg = ExperimentConfig::resolve(o.clone(), None, env.clone()).unwrap();
        assert_eq!(cfg.output, PathBuf::from("from-env"));
        let cfg = ExperimentConfig::resolve(o, Some("from-flag".into()), env).unwrap();
        assert_eq!(cfg.output, PathBuf::from("from-flag"));
    }

    #[test]
    fn validation_failures() {
        let cases = [
            ConfigOverrides { n_qubits: Some(3), ..scenario(Scenario::TwoQubit) },
            ConfigOverrides { chi: Some(vec![0.1]), ..scenario(Scenario::TwoQubit) },
            ConfigOverrides { dt: Some(f64::NAN), ..scenario(Scenario::TwoQubit) },
            ConfigOverrides { n_qubits: Some(2), ..scenario(Scenario::Chain) },
            ConfigOverrides { initial_states: Some(vec![3]), ..scenario(Scenario::Chain) },
            ConfigOverrides { n_min: Some(8), n_max: Some(4), ..scenario(Scenario::ScanN) },
            ConfigOverrides { fit_window: Some([5.0, 1.0]), ..scenario(Scenario::TwoQubit) },
        ];
        for o in cases {
            assert!(ExperimentConfig::resolve(o.clone(), None, None).is_err(), "{o:?}");
        }
    }

    #[test]
    fn t_end_moves_fit_window() {
        let o = ConfigOverrides { t_end: Some(50.0), ..scenario(Scenario::TwoQubit) };
        let cfg = ExperimentConfig::resolve(o, None, None).unwrap();
        assert_eq!(cfg.fit_window, [5.0, 30.0]);
    }

    #[test]
    fn echo_is_stable() {
        let cfg = ExperimentConfig::defaults(Scenario::TwoQubit);
        assert_eq!(cfg.to_toml(), cfg.clone().to_toml());
        assert!(cfg.to_toml().contains("scenario = \"two-qubit\""));
    }
}
