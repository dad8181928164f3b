//! Two coupled qubits: the non-secular master equation in the eigenbasis,
//! its closed-form decay rates, and the reduction to single-qubit models.
//!
//! In the eigenbasis `φ1 = |ee⟩, φ2 = |gg⟩, φ3, φ4` the equation reads
//! `dρ_cd/dt = −iω_cd ρ_cd + Σ_kl γ^{cdkl} ρ_kl`. The coefficient tensor is
//! a sum of four terms built from `σ_z` matrix elements, the one-sided rate
//! matrix `M_αβ(ω)` and the step `θ(ω)` with `θ(0) = 1`, so zero-frequency
//! dephasing is kept. A common bath fills the off-diagonal `√(J_1 J_2)`
//! entries of `M`; independent baths leave them at zero.
//!
//! This equation damps the `φ3` population at `2Γ_33`, while the secular
//! Lindblad form of [`crate::lindblad`] gives `Γ_33` for the same process.
//! Both conventions are kept as written and are compared only against
//! their own closed forms; [`MasterEquation::rate_scale`] records the ratio.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::generator::{check_liouvillian_capacity, check_square, MasterEquation};
use crate::spectral::{cross_spectrum, SpectralDensity};
use crate::system::{coupling_operators, diagonalize, BathTopology, ChainSpec, EigenSystem, Subspace};
use crate::{c, CMatrix, RMatrix};

/// Bohr frequencies below this (in units of `Ω`) are treated as zero.
const ZERO_FREQ_TOL: f64 = 1e-9;

fn require_two(spec: &ChainSpec, op: &'static str) -> Result<()> {
    if spec.n_qubits() != 2 {
        return Err(Error::UnsupportedSize {
            op,
            expected: "2",
            got: spec.n_qubits(),
        });
    }
    Ok(())
}

/// One-sided bath rate matrix `M_αβ(ω)` for the given topology.
pub(crate) fn rate_matrix(spectra: &[SpectralDensity], bath: BathTopology, omega: f64) -> RMatrix {
    let n = spectra.len();
    RMatrix::from_fn(n, n, |a, b| {
        if a == b || bath == BathTopology::Common {
            cross_spectrum(&spectra[a], &spectra[b], omega)
        } else {
            0.0
        }
    })
}

/// Dense coefficient tensor `γ^{cdkl}` of the two-qubit equation.
#[derive(Debug, Clone)]
pub struct RedfieldTensor {
    eig: EigenSystem,
    bath: BathTopology,
    dim: usize,
    coeffs: Vec<f64>,
}

impl RedfieldTensor {
    #[inline]
    fn index(&self, c: usize, d: usize, k: usize, l: usize) -> usize {
        ((c * self.dim + d) * self.dim + k) * self.dim + l
    }

    /// `γ^{cdkl}`, 0-based eigenstate indices.
    pub fn get(&self, c: usize, d: usize, k: usize, l: usize) -> f64 {
        self.coeffs[self.index(c, d, k, l)]
    }

    pub fn bath(&self) -> BathTopology {
        self.bath
    }

    /// `ω_cd = E_c − E_d`.
    pub fn bohr(&self, c: usize, d: usize) -> f64 {
        self.eig.bohr(c, d)
    }
}

/// Builds the coefficient tensor for a two-qubit spec, using the spec's
/// bath topology.
pub fn redfield_tensor(spec: &ChainSpec) -> Result<RedfieldTensor> {
    require_two(spec, "two-qubit master equation")?;
    let eig = diagonalize(spec, Subspace::TwoQubitFull)?;
    let z = coupling_operators(spec, &eig)?;
    let spectra = spec.spectra();
    let dim = eig.dim();
    let tol = ZERO_FREQ_TOL * spec.omega();

    // m[(x, y)] = Σ_αβ θ(ω_xy) M_αβ(ω_xy) ...; contracted below per term.
    let rates: Vec<RMatrix> = (0..dim * dim)
        .map(|idx| {
            let (x, y) = (idx / dim, idx % dim);
            let mut w = eig.bohr(x, y);
            if w.abs() <= tol {
                w = 0.0;
            }
            // θ(ω) folded into the one-sided cross-spectrum
            rate_matrix(&spectra, spec.bath(), w)
        })
        .collect();
    let m = |x: usize, y: usize| &rates[x * dim + y];
    let channels = spectra.len();
    // Σ_αβ M_αβ(ω) Z^α_{pq} Z^β_{rs}
    let contract = |mat: &RMatrix, p: usize, q: usize, r: usize, s: usize| {
        let mut acc = 0.0;
        for a in 0..channels {
            for b in 0..channels {
                acc += mat[(a, b)] * z.element(a, p, q) * z.element(b, r, s);
            }
        }
        acc
    };

    let mut coeffs = vec![0.0; dim.pow(4)];
    for cc in 0..dim {
        for d in 0..dim {
            for k in 0..dim {
                for l in 0..dim {
                    let mut g = 0.0;
                    if d == l {
                        for n in 0..dim {
                            g -= contract(m(k, n), cc, n, n, k);
                        }
                    }
                    g += contract(m(k, cc), cc, k, l, d);
                    if cc == k {
                        for n in 0..dim {
                            g -= contract(m(l, n), l, n, n, d);
                        }
                    }
                    g += contract(m(l, d), cc, k, l, d);
                    coeffs[((cc * dim + d) * dim + k) * dim + l] = g;
                }
            }
        }
    }

    Ok(RedfieldTensor {
        eig,
        bath: spec.bath(),
        dim,
        coeffs,
    })
}

impl MasterEquation for RedfieldTensor {
    fn name(&self) -> &'static str {
        "redfield"
    }

    fn eigensystem(&self) -> &EigenSystem {
        &self.eig
    }

    fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        check_square(rho, self.dim)?;
        let d = self.dim;
        let mut out = CMatrix::zeros(d, d);
        for cc in 0..d {
            for dd in 0..d {
                let mut acc = c(0.0, -self.bohr(cc, dd)) * rho[(cc, dd)];
                let base = self.index(cc, dd, 0, 0);
                for k in 0..d {
                    for l in 0..d {
                        acc += rho[(k, l)] * self.coeffs[base + k * d + l];
                    }
                }
                out[(cc, dd)] = acc;
            }
        }
        Ok(out)
    }

    fn liouvillian(&self) -> Result<CMatrix> {
        let d = self.dim;
        check_liouvillian_capacity(d)?;
        let mut l = CMatrix::zeros(d * d, d * d);
        for cc in 0..d {
            for dd in 0..d {
                let row = cc + dd * d;
                for k in 0..d {
                    for ll in 0..d {
                        l[(row, k + ll * d)] = c(self.get(cc, dd, k, ll), 0.0);
                    }
                }
                l[(row, row)] += c(0.0, -self.bohr(cc, dd));
            }
        }
        Ok(l)
    }

    fn positivity_floor(&self) -> f64 {
        -1e-6
    }
}

/// A decay rate evaluated for both bath topologies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePair {
    pub common: f64,
    pub independent: f64,
}

impl RatePair {
    pub fn for_bath(&self, bath: BathTopology) -> f64 {
        match bath {
            BathTopology::Common => self.common,
            BathTopology::Independent => self.independent,
        }
    }
}

/// Decay rate `Γ_12` of the `φ1/φ2` coherence:
/// `4(√J_1(0) + √J_2(0))²` for a common bath, `4(J_1(0) + J_2(0))` otherwise.
pub fn gamma12(spec: &ChainSpec) -> Result<RatePair> {
    require_two(spec, "gamma12")?;
    let j1 = spec.spectral(0).evaluate(0.0)?;
    let j2 = spec.spectral(1).evaluate(0.0)?;
    Ok(RatePair {
        common: 4.0 * (j1.sqrt() + j2.sqrt()).powi(2),
        independent: 4.0 * (j1 + j2),
    })
}

/// `Γ_33 = Γ_34` at `ω_34 = 2λ`: `(√J_1 − √J_2)²` for a common bath,
/// `J_1 + J_2` otherwise.
pub fn gamma34(spec: &ChainSpec) -> Result<RatePair> {
    require_two(spec, "gamma34")?;
    let w = (2.0 * spec.lambda()).abs();
    let j1 = spec.spectral(0).evaluate(w)?;
    let j2 = spec.spectral(1).evaluate(w)?;
    Ok(RatePair {
        common: (j1.sqrt() - j2.sqrt()).powi(2),
        independent: j1 + j2,
    })
}

/// `ρ_12(t) = ρ_12(0)·exp[(−2iΩ − Γ_12)t]` for the spec's bath.
pub fn rho12_closed_form(spec: &ChainSpec, rho12_initial: Complex64, t: f64) -> Result<Complex64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    let rate = gamma12(spec)?.for_bath(spec.bath());
    Ok(rho12_initial * c(-rate * t, -2.0 * spec.omega() * t).exp())
}

/// Excitation sector of the two-qubit space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    SingleExcitation,
    NonSingleExcitation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectiveKind {
    /// Transverse coupling, `λJ_z − J_x Σ g_j(b_j + b_j†)`.
    SpinBoson,
    /// Longitudinal coupling, `Ω𝒥_z + 𝒥_z Σ ξ_j(b_j + b_j†)`.
    PureDephasing,
}

/// Single-qubit image of one sector under a common bath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveModel {
    pub kind: EffectiveKind,
    pub level_splitting: f64,
    pub chi_eff: f64,
}

impl EffectiveModel {
    pub fn spectral(&self) -> SpectralDensity {
        SpectralDensity::new(self.chi_eff).expect("non-negative by construction")
    }

    /// Decay rate predicted by the effective model: the spin-boson relaxation
    /// `J_eff(2λ)`, or the pure-dephasing coherence decay `4·J_eff(0)`.
    pub fn rate(&self) -> f64 {
        let s = self.spectral();
        match self.kind {
            EffectiveKind::SpinBoson => s.evaluate(2.0 * self.level_splitting.abs()).expect("ω >= 0"),
            EffectiveKind::PureDephasing => 4.0 * s.evaluate(0.0).expect("ω = 0"),
        }
    }
}

/// Maps a common-bath two-qubit sector onto a single effective qubit.
///
/// The couplings of the two qubits to each bath mode are taken fully
/// correlated with ratio `√(χ_1/χ_2)`, so `g_j = κ_1j − κ_2j` has spectrum
/// `(√χ_1 − √χ_2)²·ω coth ω` and `ξ_j = κ_1j + κ_2j` has `(√χ_1 + √χ_2)²·ω coth ω`.
pub fn map_to_effective_single_qubit(spec: &ChainSpec, sector: Sector) -> Result<EffectiveModel> {
    require_two(spec, "single-qubit mapping")?;
    if spec.bath() != BathTopology::Common {
        return Err(Error::Unsupported(
            "the single-qubit mapping needs a common bath".into(),
        ));
    }
    let (s1, s2) = (spec.chis()[0].sqrt(), spec.chis()[1].sqrt());
    Ok(match sector {
        Sector::SingleExcitation => EffectiveModel {
            kind: EffectiveKind::SpinBoson,
            level_splitting: spec.lambda(),
            chi_eff: (s1 - s2).powi(2),
        },
        Sector::NonSingleExcitation => EffectiveModel {
            kind: EffectiveKind::PureDephasing,
            level_splitting: spec.omega(),
            chi_eff: (s1 + s2).powi(2),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(bath: BathTopology) -> ChainSpec {
        ChainSpec::new(2, 1.0, 0.1, vec![0.04, 0.01], bath).unwrap()
    }

    fn j(chi: f64, w: f64) -> f64 {
        // independent of the spectral module: χ ω cosh ω / sinh ω
        if w == 0.0 {
            chi
        } else {
            chi * w * w.cosh() / w.sinh()
        }
    }

    // φ1..φ4 → 0..3
    const P1: usize = 0;
    const P2: usize = 1;
    const P3: usize = 2;
    const P4: usize = 3;

    #[test]
    fn population_coefficient() {
        let t = redfield_tensor(&reference(BathTopology::Common)).unwrap();
        let expected = -2.0 * (j(0.04, 0.2).sqrt() - j(0.01, 0.2).sqrt()).powi(2);
        assert!((t.get(P3, P3, P3, P3) - expected).abs() < 1e-14);
        assert!((t.get(P3, P3, P3, P3) + 2.0 * gamma34(&reference(BathTopology::Common)).unwrap().common).abs() < 1e-14);
    }

    #[test]
    fn coherence_coefficient() {
        let t = redfield_tensor(&reference(BathTopology::Common)).unwrap();
        let expected = -4.0 * (0.04f64.sqrt() + 0.01f64.sqrt()).powi(2);
        assert!((t.get(P1, P2, P1, P2) - expected).abs() < 1e-14);
        // populations of φ1 and φ2 are constants of motion
        for k in 0..4 {
            for l in 0..4 {
                assert_eq!(t.get(P1, P1, k, l), 0.0);
                assert_eq!(t.get(P2, P2, k, l), 0.0);
            }
        }
    }

    #[test]
    fn equal_spectra_close_the_single_excitation_channel() {
        let s = ChainSpec::new(2, 1.0, 0.1, vec![0.03, 0.03], BathTopology::Common).unwrap();
        let t = redfield_tensor(&s).unwrap();
        assert!(t.get(P3, P3, P3, P3).abs() < 1e-15);
        assert!(t.get(P3, P4, P4, P3).abs() < 1e-15);
    }

    #[test]
    fn coherence_equation_structure() {
        for bath in [BathTopology::Common, BathTopology::Independent] {
            let s = reference(bath);
            let t = redfield_tensor(&s).unwrap();
            let g = gamma34(&s).unwrap().for_bath(bath);
            assert!((t.bohr(P3, P4) - 0.2).abs() < 1e-14);
            assert!((t.get(P3, P4, P3, P4) + g).abs() < 1e-14);
            assert!((t.get(P3, P4, P4, P3) - g).abs() < 1e-14);
        }
    }

    #[test]
    fn tensor_symmetries() {
        for bath in [BathTopology::Common, BathTopology::Independent] {
            let t = redfield_tensor(&ChainSpec::new(2, 1.0, 0.17, vec![0.05, 0.02], bath).unwrap()).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    for k in 0..4 {
                        for l in 0..4 {
                            assert!((t.get(b, a, l, k) - t.get(a, b, k, l)).abs() < 1e-15);
                        }
                    }
                    let trace: f64 = (0..4).map(|cc| t.get(cc, cc, a, b)).sum();
                    assert!(trace.abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn closed_form_rates() {
        let g = gamma12(&reference(BathTopology::Common)).unwrap();
        assert!((g.common - 0.36).abs() < 1e-12);
        assert!((g.independent - 0.20).abs() < 1e-12);
        let g = gamma34(&reference(BathTopology::Common)).unwrap();
        assert!((g.common / 0.0101330 - 1.0).abs() < 1e-5);
        assert!((g.independent / 0.0506650 - 1.0).abs() < 1e-5);

        let one = ChainSpec::new(2, 1.0, 0.1, vec![0.07, 0.0], BathTopology::Common).unwrap();
        let g = gamma12(&one).unwrap();
        assert!((g.common - g.independent).abs() < 1e-15 && (g.common - 0.28).abs() < 1e-14);
        let g = gamma34(&one).unwrap();
        assert!((g.common - j(0.07, 0.2)).abs() < 1e-15 && (g.common - g.independent).abs() < 1e-15);

        let sym = ChainSpec::new(2, 1.0, 0.1, vec![0.02, 0.02], BathTopology::Common).unwrap();
        let g = gamma12(&sym).unwrap();
        assert!((g.common - 16.0 * 0.02).abs() < 1e-14 && (g.independent - 8.0 * 0.02).abs() < 1e-14);
        assert_eq!(gamma34(&sym).unwrap().common, 0.0);
    }

    #[test]
    fn rates_need_two_qubits() {
        let s = ChainSpec::new(3, 1.0, 0.1, vec![0.01; 3], BathTopology::Common).unwrap();
        assert!(matches!(gamma12(&s), Err(Error::UnsupportedSize { .. })));
        assert!(matches!(gamma34(&s), Err(Error::UnsupportedSize { .. })));
        assert!(matches!(redfield_tensor(&s), Err(Error::UnsupportedSize { .. })));
    }

    #[test]
    fn coherence_closed_form() {
        let s = reference(BathTopology::Common);
        assert_eq!(rho12_closed_form(&s, c(0.3, 0.1), 0.0).unwrap(), c(0.3, 0.1));
        let r = rho12_closed_form(&s, c(1.0, 0.0), 1.0).unwrap();
        assert!((r.norm() - (-0.36f64).exp()).abs() < 1e-14);
        assert!((r.norm() - 0.6977).abs() < 5e-5);
        assert!((r.arg() + 2.0).abs() < 1e-14);
        assert!(rho12_closed_form(&s, c(1.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn effective_models() {
        let s = reference(BathTopology::Common);
        let se = map_to_effective_single_qubit(&s, Sector::SingleExcitation).unwrap();
        assert_eq!(se.kind, EffectiveKind::SpinBoson);
        assert!((se.chi_eff - 0.01).abs() < 1e-15);
        assert!((se.rate() - gamma34(&s).unwrap().common).abs() < 1e-15);
        let ns = map_to_effective_single_qubit(&s, Sector::NonSingleExcitation).unwrap();
        assert_eq!(ns.kind, EffectiveKind::PureDephasing);
        assert_eq!(ns.level_splitting, 1.0);
        assert!((ns.chi_eff - 0.09).abs() < 1e-15);
        assert!((ns.rate() - 0.36).abs() < 1e-14);

        let sym = ChainSpec::new(2, 1.0, 0.1, vec![0.05, 0.05], BathTopology::Common).unwrap();
        assert_eq!(map_to_effective_single_qubit(&sym, Sector::SingleExcitation).unwrap().chi_eff, 0.0);
        assert!(matches!(
            map_to_effective_single_qubit(&reference(BathTopology::Independent), Sector::SingleExcitation),
            Err(Error::Unsupported(_))
        ));
    }
}
