//! Secular Lindblad generator for chains of any length.
//!
//! `dρ/dt = −i[H, ρ] + Σ_{ω,α,β} γ_αβ(ω)[Z̃_β ρ Z̃_α† − ½{Z̃_α† Z̃_β, ρ}]`,
//! where `Z̃_α(ω)` collects the eigenbasis elements `⟨m|σ_z^(α)|n⟩` with
//! `E_n − E_m = ω ≥ 0`. Only non-negative Bohr frequencies carry a rate, and
//! the `ω = 0` group supplies pure dephasing. The cross terms `α ≠ β` are
//! present only for a common bath.

use nalgebra::SymmetricEigen;

use crate::error::Result;
use crate::generator::{check_liouvillian_capacity, check_square, MasterEquation};
use crate::system::{coupling_operators, BathTopology, ChainSpec, EigenSystem};
use crate::twoqubit::rate_matrix;
use crate::{c, CMatrix, RMatrix};

/// Default Bohr-frequency grouping tolerance, in units of `Ω`.
pub const DEFAULT_GROUPING_TOL: f64 = 1e-9;

/// Transitions sharing one Bohr frequency.
#[derive(Debug, Clone)]
pub struct BohrGroup {
    /// Representative frequency (mean of the members, exactly 0 for the
    /// dephasing group).
    pub frequency: f64,
    /// `(m, n)` eigenstate pairs with `E_n − E_m ≈ frequency`.
    pub pairs: Vec<(usize, usize)>,
    /// `elements[(α, p)]` is `⟨ψ_m|Z^(α)|ψ_n⟩` for the `p`-th pair, the only
    /// nonzero entries of `Z̃_α(ω)`.
    pub elements: RMatrix,
    /// `γ_αβ(ω)`.
    pub rates: RMatrix,
}

impl BohrGroup {
    /// `Z̃_α(ω)` as a dense `d × d` matrix.
    pub fn operator(&self, alpha: usize, d: usize) -> RMatrix {
        let mut op = RMatrix::zeros(d, d);
        for (p, &(m, n)) in self.pairs.iter().enumerate() {
            op[(m, n)] = self.elements[(alpha, p)];
        }
        op
    }
}

/// Nonzero entries `(row, col, value)` of a real jump operator.
#[derive(Debug, Clone)]
struct SparseJump(Vec<(usize, usize, f64)>);

#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    eig: EigenSystem,
    bath: BathTopology,
    groups: Vec<BohrGroup>,
    warnings: Vec<String>,
    // derived, for `apply`
    jumps: Vec<SparseJump>,
    decay: CMatrix,
}

impl LindbladGenerator {
    pub fn groups(&self) -> &[BohrGroup] {
        &self.groups
    }

    pub fn bath(&self) -> BathTopology {
        self.bath
    }

    /// Grouping ambiguities found while clustering Bohr frequencies.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Jump operators obtained by diagonalizing each group's rate matrix.
    pub fn jump_operators(&self) -> Vec<CMatrix> {
        let d = self.eig.dim();
        self.jumps
            .iter()
            .map(|j| {
                let mut a = CMatrix::zeros(d, d);
                for &(r, col, x) in &j.0 {
                    a[(r, col)] = c(x, 0.0);
                }
                a
            })
            .collect()
    }
}

/// Builds the generator on `eig`, clustering Bohr frequencies that lie
/// within `grouping_tol·Ω` of their neighbour.
///
/// A cluster whose spread exceeds ten times the tolerance is kept but
/// recorded in [`LindbladGenerator::warnings`].
pub fn build_generator(
    spec: &ChainSpec,
    eig: EigenSystem,
    grouping_tol: f64,
) -> Result<LindbladGenerator> {
    if !(grouping_tol.is_finite() && grouping_tol > 0.0) {
        return Err(crate::Error::Domain(format!(
            "grouping tolerance must be positive, got {grouping_tol}"
        )));
    }
    let z = coupling_operators(spec, &eig)?;
    let tol = grouping_tol * spec.omega();
    let d = eig.dim();

    let mut transitions: Vec<(f64, usize, usize)> = Vec::new();
    for m in 0..d {
        for n in 0..d {
            let w = eig.bohr(n, m);
            if w >= -tol {
                transitions.push((w.max(0.0), m, n));
            }
        }
    }
    transitions.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut clusters: Vec<Vec<(f64, usize, usize)>> = Vec::new();
    for t in transitions {
        match clusters.last_mut() {
            Some(cl) if t.0 - cl.last().unwrap().0 <= tol => cl.push(t),
            _ => clusters.push(vec![t]),
        }
    }

    let spectra = spec.spectra();
    let mut warnings = Vec::new();
    let mut groups = Vec::with_capacity(clusters.len());
    for (gi, cl) in clusters.iter().enumerate() {
        let lo = cl.first().unwrap().0;
        let hi = cl.last().unwrap().0;
        if hi - lo > 10.0 * tol {
            warnings.push(format!(
                "Bohr group near {lo:.6e} spans {:.3e}, more than ten grouping tolerances",
                hi - lo
            ));
        }
        let frequency = if gi == 0 && lo <= tol {
            0.0
        } else {
            cl.iter().map(|t| t.0).sum::<f64>() / cl.len() as f64
        };
        let pairs: Vec<(usize, usize)> = cl.iter().map(|t| (t.1, t.2)).collect();
        let elements = RMatrix::from_fn(z.len(), pairs.len(), |a, p| {
            let (m, n) = pairs[p];
            z.element(a, m, n)
        });
        groups.push(BohrGroup {
            frequency,
            pairs,
            elements,
            rates: rate_matrix(&spectra, spec.bath(), frequency),
        });
    }

    let (jumps, decay) = jump_decomposition(&groups, d);
    Ok(LindbladGenerator {
        eig,
        bath: spec.bath(),
        groups,
        warnings,
        jumps,
        decay,
    })
}

/// `γ(ω) = Σ_k μ_k v_k v_kᵀ` gives jumps `A_k = √μ_k Σ_β v_kβ Z̃_β`, and
/// `Σ A_k† A_k` for the anticommutator. Diagonal rate matrices skip the
/// eigendecomposition.
fn jump_decomposition(groups: &[BohrGroup], d: usize) -> (Vec<SparseJump>, CMatrix) {
    let mut jumps = Vec::new();
    let mut decay = CMatrix::zeros(d, d);
    for g in groups {
        let k = g.rates.nrows();
        let diagonal = (0..k).all(|a| (0..k).all(|b| a == b || g.rates[(a, b)] == 0.0));
        let (mus, vecs) = if diagonal {
            (g.rates.diagonal(), RMatrix::identity(k, k))
        } else {
            let eig = SymmetricEigen::new(g.rates.clone());
            (eig.eigenvalues, eig.eigenvectors)
        };
        let scale = mus.amax();
        for (kk, &mu) in mus.iter().enumerate() {
            if mu <= 1e-15 * scale || mu <= 0.0 {
                continue;
            }
            let coeffs = g.elements.transpose() * vecs.column(kk) * mu.sqrt();
            let entries: Vec<(usize, usize, f64)> = g
                .pairs
                .iter()
                .zip(coeffs.iter())
                .filter(|(_, &x)| x != 0.0)
                .map(|(&(m, n), &x)| (m, n, x))
                .collect();
            if entries.is_empty() {
                continue;
            }
            // (A†A)_{ab} = Σ_i A_ia A_ib
            for &(i, a, x) in &entries {
                for &(i2, b, y) in &entries {
                    if i == i2 {
                        decay[(a, b)] += c(x * y, 0.0);
                    }
                }
            }
            jumps.push(SparseJump(entries));
        }
    }
    (jumps, decay)
}

impl MasterEquation for LindbladGenerator {
    fn name(&self) -> &'static str {
        "lindblad"
    }

    fn eigensystem(&self) -> &EigenSystem {
        &self.eig
    }

    fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let d = self.eig.dim();
        check_square(rho, d)?;
        let mut out = CMatrix::zeros(d, d);
        // −i[H, ρ] with H diagonal in the eigenbasis
        let e = self.eig.energies();
        for j in 0..d {
            for i in 0..d {
                out[(i, j)] = c(0.0, -(e[i] - e[j])) * rho[(i, j)];
            }
        }
        // A ρ A† entry by entry over the nonzeros of A
        for jump in &self.jumps {
            for &(i, k, x) in &jump.0 {
                for &(j, l, y) in &jump.0 {
                    out[(i, j)] += rho[(k, l)] * (x * y);
                }
            }
        }
        out -= (&self.decay * rho + rho * &self.decay) * c(0.5, 0.0);
        Ok(out)
    }

    /// Assembled term by term from the double sum over `α, β` with
    /// `vec(AXB) = (Bᵀ ⊗ A) vec(X)`, independently of the jump operators
    /// used by `apply`.
    fn liouvillian(&self) -> Result<CMatrix> {
        let d = self.eig.dim();
        check_liouvillian_capacity(d)?;
        let id = CMatrix::identity(d, d);
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            self.eig.energies().iter().map(|&x| c(x, 0.0)),
        ));
        let mut l = (id.kronecker(&h) - h.transpose().kronecker(&id)) * c(0.0, -1.0);
        for g in &self.groups {
            let ops: Vec<CMatrix> = (0..g.elements.nrows())
                .map(|a| g.operator(a, d).map(|x| c(x, 0.0)))
                .collect();
            for (a, za) in ops.iter().enumerate() {
                for (b, zb) in ops.iter().enumerate() {
                    let rate = g.rates[(a, b)];
                    if rate == 0.0 {
                        continue;
                    }
                    let prod = za.adjoint() * zb;
                    let term = za.conjugate().kronecker(zb)
                        - (id.kronecker(&prod) + prod.transpose().kronecker(&id)) * c(0.5, 0.0);
                    l += term * c(rate, 0.0);
                }
            }
        }
        Ok(l)
    }

    fn positivity_floor(&self) -> f64 {
        -1e-8
    }

    fn rate_scale(&self) -> f64 {
        0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{diagonalize, single_excitation_eigensystem, Subspace};

    fn chain(n: usize, lambda: f64, chis: Vec<f64>, bath: BathTopology) -> ChainSpec {
        ChainSpec::new(n, 1.0, lambda, chis, bath).unwrap()
    }

    fn three(bath: BathTopology) -> (ChainSpec, LindbladGenerator) {
        let chis = (1..=3)
            .map(|i| 0.1 * (i as f64 * std::f64::consts::PI / 6.0).sin())
            .collect();
        let s = chain(3, 0.2, chis, bath);
        let g = build_generator(&s, single_excitation_eigensystem(&s), DEFAULT_GROUPING_TOL).unwrap();
        (s, g)
    }

    #[test]
    fn three_qubit_bohr_groups() {
        let (_, g) = three(BathTopology::Common);
        let freqs: Vec<f64> = g.groups().iter().map(|g| g.frequency).collect();
        assert_eq!(freqs.len(), 3);
        assert_eq!(freqs[0], 0.0);
        assert!((freqs[1] - 0.2 * 2f64.sqrt()).abs() < 1e-12);
        assert!((freqs[2] - 0.4 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(g.groups()[1].pairs.len(), 2);
        assert!(g.warnings().is_empty());
    }

    #[test]
    fn independent_rates_are_diagonal() {
        let (s, g) = three(BathTopology::Independent);
        for grp in g.groups() {
            for a in 0..3 {
                for b in 0..3 {
                    let expected = if a == b {
                        s.spectral(a).evaluate(grp.frequency).unwrap()
                    } else {
                        0.0
                    };
                    assert_eq!(grp.rates[(a, b)], expected);
                }
            }
        }
    }

    #[test]
    fn common_rates_are_rank_one() {
        let (_, g) = three(BathTopology::Common);
        for grp in g.groups() {
            let ev = grp.rates.symmetric_eigenvalues();
            let mut v: Vec<f64> = ev.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            assert!(v[0] > -1e-14 && v[1].abs() < 1e-14 && v[2] > 0.0);
        }
        // one jump operator per group with a nonzero coupling
        assert_eq!(g.jump_operators().len(), 3);
    }

    #[test]
    fn two_qubit_dephasing_group() {
        let s = chain(2, 0.1, vec![0.04, 0.01], BathTopology::Common);
        let g = build_generator(&s, diagonalize(&s, Subspace::Full).unwrap(), DEFAULT_GROUPING_TOL).unwrap();
        let zero = &g.groups()[0];
        assert_eq!(zero.frequency, 0.0);
        for a in 0..2 {
            let op = zero.operator(a, 4);
            assert_eq!(op[(0, 0)], 1.0);
            assert_eq!(op[(1, 1)], -1.0);
        }
    }

    #[test]
    fn ground_state_is_stationary() {
        let s = chain(2, 0.1, vec![0.04, 0.01], BathTopology::Common);
        let g = build_generator(&s, diagonalize(&s, Subspace::Full).unwrap(), DEFAULT_GROUPING_TOL).unwrap();
        let mut rho = CMatrix::zeros(4, 4);
        rho[(1, 1)] = c(1.0, 0.0);
        assert!(crate::max_abs(&g.apply(&rho).unwrap()) < 1e-15);
    }

    #[test]
    fn maximally_mixed_input() {
        let (_, g) = three(BathTopology::Common);
        let rho = CMatrix::identity(3, 3) / c(3.0, 0.0);
        let out = g.apply(&rho).unwrap();
        assert!(crate::max_abs(&(&out - out.adjoint())) < 1e-15);
        assert!(out.trace().norm() < 1e-15);
    }

    #[test]
    fn top_state_population_rate() {
        let (s, g) = three(BathTopology::Common);
        let eig = single_excitation_eigensystem(&s);
        let z = coupling_operators(&s, &eig).unwrap();
        let mut rho = CMatrix::zeros(3, 3);
        rho[(0, 0)] = c(1.0, 0.0);
        let out = g.apply(&rho).unwrap();
        // brute force |Σ_α √J_α(ω) Z^α_{m0}|² summed over lower states
        let mut expected = 0.0;
        for m in 1..3 {
            let w = eig.bohr(0, m);
            let amp: f64 = (0..3)
                .map(|a| s.spectral(a).evaluate(w).unwrap().sqrt() * z.element(a, m, 0))
                .sum();
            expected += amp * amp;
        }
        assert!((out[(0, 0)].re + expected).abs() < 1e-14);
    }

    #[test]
    fn grouping_collision_is_reported() {
        // dense gaps chain into one cluster far wider than ten tolerances
        let s = chain(30, 5e-9, vec![0.01; 30], BathTopology::Common);
        let g = build_generator(&s, single_excitation_eigensystem(&s), 1e-9).unwrap();
        assert!(!g.warnings().is_empty());
        assert!(build_generator(&s, single_excitation_eigensystem(&s), 0.0).is_err());
    }

    #[test]
    fn capacity() {
        let s = chain(7, 0.1, vec![0.01; 7], BathTopology::Common);
        let g = build_generator(&s, diagonalize(&s, Subspace::Full).unwrap(), DEFAULT_GROUPING_TOL).unwrap();
        assert!(matches!(g.liouvillian(), Err(crate::Error::Capacity { .. })));
    }
}
