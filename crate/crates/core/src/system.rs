//! Coupled-qubit chain: Hamiltonian, eigensystems and the dephasing
//! coupling operators `σ_z^(α)` expressed in the energy eigenbasis.
//!
//! Computational basis states are indexed by bitmask with qubit 1 as the
//! most significant bit and a set bit meaning "excited". For two qubits the
//! order is `|gg⟩, |ge⟩, |eg⟩, |ee⟩`.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralDensity;
use crate::{CMatrix, RMatrix};

/// Largest chain for which the full `2^N` space may be built.
pub const MAX_FULL_QUBITS: usize = 12;

/// Eigenvector entries within this distance of the largest magnitude count
/// as tied when fixing the sign convention.
const SIGN_TIE_TOL: f64 = 1e-9;

/// Whether the qubits share one bath or each couple to a private one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BathTopology {
    Common,
    Independent,
}

impl BathTopology {
    pub fn label(self) -> &'static str {
        match self {
            BathTopology::Common => "common",
            BathTopology::Independent => "independent",
        }
    }
}

impl fmt::Display for BathTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which part of the Hilbert space an eigensystem covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subspace {
    /// All `2^N` states, eigenstates in descending energy.
    Full,
    /// The `N` states with exactly one excited qubit, descending energy.
    SingleExcitation,
    /// Two-qubit full space in the conventional labelling
    /// `φ1 = |ee⟩, φ2 = |gg⟩, φ3, φ4` (single-excitation pair, upper first).
    TwoQubitFull,
}

/// Full problem definition for an open chain of `N` coupled qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    n_qubits: usize,
    omega: f64,
    lambda: f64,
    chis: Vec<f64>,
    bath: BathTopology,
}

impl ChainSpec {
    pub fn new(
        n_qubits: usize,
        omega: f64,
        lambda: f64,
        chis: Vec<f64>,
        bath: BathTopology,
    ) -> Result<Self> {
        if n_qubits < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 qubits, got {n_qubits}"
            )));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "level spacing must be finite and positive, got {omega}"
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "coupling must be finite, got {lambda}"
            )));
        }
        if chis.len() != n_qubits {
            return Err(Error::InvalidSpec(format!(
                "{} dissipation coefficients for {} qubits",
                chis.len(),
                n_qubits
            )));
        }
        if let Some(bad) = chis.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidSpec(format!(
                "dissipation coefficients must be finite and >= 0, got {bad}"
            )));
        }
        Ok(Self {
            n_qubits,
            omega,
            lambda,
            chis,
            bath,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn chis(&self) -> &[f64] {
        &self.chis
    }

    pub fn bath(&self) -> BathTopology {
        self.bath
    }

    pub fn with_bath(&self, bath: BathTopology) -> Self {
        Self {
            bath,
            ..self.clone()
        }
    }

    /// Spectral density of qubit `alpha` (0-based).
    pub fn spectral(&self, alpha: usize) -> SpectralDensity {
        SpectralDensity::new(self.chis[alpha]).expect("validated at construction")
    }

    pub fn spectra(&self) -> Vec<SpectralDensity> {
        (0..self.n_qubits).map(|a| self.spectral(a)).collect()
    }
}

/// Eigen-energies and real eigenvectors of the chain Hamiltonian on a subspace.
///
/// `states` holds one eigenvector per column, expanded in the computational
/// basis listed by `basis`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    subspace: Subspace,
    n_qubits: usize,
    energies: Vec<f64>,
    states: RMatrix,
    basis: Vec<u64>,
}

impl EigenSystem {
    pub fn subspace(&self) -> Subspace {
        self.subspace
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn states(&self) -> &RMatrix {
        &self.states
    }

    pub fn state(&self, k: usize) -> DVector<f64> {
        self.states.column(k).into_owned()
    }

    /// Occupation bitmasks of the computational basis of this subspace.
    pub fn basis(&self) -> &[u64] {
        &self.basis
    }

    /// Basis labels such as `"eg"`, qubit 1 first.
    pub fn basis_labels(&self) -> Vec<String> {
        self.basis
            .iter()
            .map(|&b| occupation_label(b, self.n_qubits))
            .collect()
    }

    /// Bohr frequency `E_n − E_m`.
    pub fn bohr(&self, n: usize, m: usize) -> f64 {
        self.energies[n] - self.energies[m]
    }

    /// `V^T ρ V`: computational-basis operator to the eigenbasis.
    pub fn to_eigenbasis(&self, op: &CMatrix) -> Result<CMatrix> {
        self.check_dim(op)?;
        let v = self.states.map(|x| crate::c(x, 0.0));
        Ok(v.transpose() * op * v)
    }

    /// `V ρ V^T`: eigenbasis operator back to the computational basis.
    pub fn from_eigenbasis(&self, op: &CMatrix) -> Result<CMatrix> {
        self.check_dim(op)?;
        let v = self.states.map(|x| crate::c(x, 0.0));
        Ok(&v * op * v.transpose())
    }

    fn check_dim(&self, op: &CMatrix) -> Result<()> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::Consistency(format!(
                "operator is {}x{}, eigensystem has dimension {}",
                op.nrows(),
                op.ncols(),
                self.dim()
            )));
        }
        Ok(())
    }
}

fn occupation_label(bits: u64, n: usize) -> String {
    (0..n)
        .map(|i| if is_excited(bits, i, n) { 'e' } else { 'g' })
        .collect()
}

/// Whether qubit `alpha` (0-based, qubit 1 = most significant bit) is excited.
fn is_excited(bits: u64, alpha: usize, n: usize) -> bool {
    (bits >> (n - 1 - alpha)) & 1 == 1
}

fn computational_basis(n: usize, subspace: Subspace) -> Result<Vec<u64>> {
    match subspace {
        Subspace::SingleExcitation => Ok((0..n).map(|a| 1u64 << (n - 1 - a)).collect()),
        Subspace::Full | Subspace::TwoQubitFull => {
            if n > MAX_FULL_QUBITS {
                return Err(Error::Capacity {
                    what: "full-space qubits",
                    requested: n,
                    limit: MAX_FULL_QUBITS,
                });
            }
            if subspace == Subspace::TwoQubitFull && n != 2 {
                return Err(Error::UnsupportedSize {
                    op: "two-qubit labelling",
                    expected: "2",
                    got: n,
                });
            }
            Ok((0..1u64 << n).collect())
        }
    }
}

/// Chain Hamiltonian `(Ω/2)Σσ_z + λΣ(σ_-^(i)σ_+^(i+1) + h.c.)`, open boundary,
/// restricted to `subspace`. The matrix is real symmetric.
pub fn build_hamiltonian(spec: &ChainSpec, subspace: Subspace) -> Result<RMatrix> {
    let basis = computational_basis(spec.n_qubits, subspace)?;
    Ok(hamiltonian_on(spec, &basis))
}

fn hamiltonian_on(spec: &ChainSpec, basis: &[u64]) -> RMatrix {
    let n = spec.n_qubits;
    let dim = basis.len();
    let index = |bits: u64| basis.iter().position(|&b| b == bits);
    let mut h = RMatrix::zeros(dim, dim);
    for (col, &bits) in basis.iter().enumerate() {
        let excited = bits.count_ones() as f64;
        h[(col, col)] = 0.5 * spec.omega * (2.0 * excited - n as f64);
        for i in 0..n - 1 {
            // hop between neighbours i and i+1 when exactly one is excited
            if is_excited(bits, i, n) != is_excited(bits, i + 1, n) {
                let mask = (1u64 << (n - 1 - i)) | (1u64 << (n - 2 - i));
                if let Some(row) = index(bits ^ mask) {
                    h[(row, col)] += spec.lambda;
                }
            }
        }
    }
    h
}

/// Dense diagonalization of the chain Hamiltonian on `subspace`.
///
/// The full space is diagonalized block by block in excitation number, so
/// every eigenvector has a definite excitation count. Eigenvectors are real
/// with their largest-magnitude entry positive (first index on ties). For
/// `N = 2` the full space uses the [`Subspace::TwoQubitFull`] ordering.
pub fn diagonalize(spec: &ChainSpec, subspace: Subspace) -> Result<EigenSystem> {
    let n = spec.n_qubits;
    let subspace = match subspace {
        Subspace::Full if n == 2 => Subspace::TwoQubitFull,
        s => s,
    };
    let basis = computational_basis(n, subspace)?;
    let dim = basis.len();

    // (energy, excitation count, vector in `basis` coordinates)
    let mut pairs: Vec<(f64, u32, DVector<f64>)> = Vec::with_capacity(dim);
    let max_exc = basis.iter().map(|b| b.count_ones()).max().unwrap_or(0);
    let min_exc = basis.iter().map(|b| b.count_ones()).min().unwrap_or(0);
    for exc in min_exc..=max_exc {
        let positions: Vec<usize> = (0..dim)
            .filter(|&i| basis[i].count_ones() == exc)
            .collect();
        if positions.is_empty() {
            continue;
        }
        let block_basis: Vec<u64> = positions.iter().map(|&i| basis[i]).collect();
        let block = hamiltonian_on(spec, &block_basis);
        let eig = SymmetricEigen::new(block);
        for k in 0..positions.len() {
            let mut v = DVector::zeros(dim);
            for (local, &global) in positions.iter().enumerate() {
                v[global] = eig.eigenvectors[(local, k)];
            }
            normalize_sign(&mut v);
            pairs.push((eig.eigenvalues[k], exc, v));
        }
    }

    match subspace {
        Subspace::TwoQubitFull => {
            // |ee⟩, |gg⟩, then the single-excitation pair upper first
            let rank = |exc: u32| match exc {
                2 => 0,
                0 => 1,
                _ => 2,
            };
            pairs.sort_by(|a, b| {
                rank(a.1)
                    .cmp(&rank(b.1))
                    .then(b.0.total_cmp(&a.0))
            });
        }
        _ => pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1))),
    }

    let energies = pairs.iter().map(|p| p.0).collect();
    let states = RMatrix::from_columns(&pairs.iter().map(|p| p.2.clone()).collect::<Vec<_>>());
    Ok(EigenSystem {
        subspace,
        n_qubits: n,
        energies,
        states,
        basis,
    })
}

/// Flip `v` so that its largest-magnitude entry (first one on ties) is positive.
pub(crate) fn normalize_sign(v: &mut DVector<f64>) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(lead) = v.iter().find(|x| x.abs() >= max - SIGN_TIE_TOL) {
        if *lead < 0.0 {
            v.neg_mut();
        }
    }
}

/// Closed-form single-excitation eigensystem of the open chain.
///
/// `E_n = Ω(1 − N/2) + 2λ cos(nπ/(N+1))` with amplitudes
/// `√(2/(N+1)) sin(njπ/(N+1))` on site `j`, for `n = 1..N`. Index 0 is the
/// `n = 1` state, the highest one for `λ > 0`. Signs follow the sine formula,
/// not the largest-entry convention of [`diagonalize`].
pub fn single_excitation_eigensystem(spec: &ChainSpec) -> EigenSystem {
    let n = spec.n_qubits;
    let np1 = (n + 1) as f64;
    let norm = (2.0 / np1).sqrt();
    let pi = std::f64::consts::PI;
    let energies = (1..=n)
        .map(|k| spec.omega * (1.0 - n as f64 / 2.0) + 2.0 * spec.lambda * (k as f64 * pi / np1).cos())
        .collect();
    let states = RMatrix::from_fn(n, n, |j, k| {
        norm * (((k + 1) * (j + 1)) as f64 * pi / np1).sin()
    });
    EigenSystem {
        subspace: Subspace::SingleExcitation,
        n_qubits: n,
        energies,
        states,
        basis: computational_basis(n, Subspace::SingleExcitation).expect("no capacity limit"),
    }
}

/// `⟨m|σ_z^(α)|n⟩` for every qubit `α`, in an eigenbasis.
#[derive(Debug, Clone)]
pub struct CouplingOperatorSet {
    ops: Vec<RMatrix>,
}

impl CouplingOperatorSet {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Matrix of qubit `alpha` (0-based).
    pub fn get(&self, alpha: usize) -> &RMatrix {
        &self.ops[alpha]
    }

    pub fn iter(&self) -> impl Iterator<Item = &RMatrix> {
        self.ops.iter()
    }

    /// Element `⟨m|σ_z^(α)|n⟩`.
    pub fn element(&self, alpha: usize, m: usize, n: usize) -> f64 {
        self.ops[alpha][(m, n)]
    }
}

pub fn coupling_operators(spec: &ChainSpec, eig: &EigenSystem) -> Result<CouplingOperatorSet> {
    if eig.n_qubits != spec.n_qubits {
        return Err(Error::Consistency(format!(
            "eigensystem built for {} qubits, spec has {}",
            eig.n_qubits, spec.n_qubits
        )));
    }
    let n = spec.n_qubits;
    let ops = (0..n)
        .map(|alpha| {
            let diag = DVector::from_iterator(
                eig.basis.len(),
                eig.basis
                    .iter()
                    .map(|&b| if is_excited(b, alpha, n) { 1.0 } else { -1.0 }),
            );
            let v = &eig.states;
            let z = v.transpose() * RMatrix::from_diagonal(&diag) * v;
            // symmetrize away rounding
            (&z + z.transpose()) * 0.5
        })
        .collect();
    Ok(CouplingOperatorSet { ops })
}

/// `Σ_i (σ_z^(i) + 1)/2` on the full computational basis.
pub fn excitation_number(n_qubits: usize) -> Result<RMatrix> {
    let basis = computational_basis(n_qubits, Subspace::Full)?;
    Ok(DMatrix::from_diagonal(&DVector::from_iterator(
        basis.len(),
        basis.iter().map(|b| b.count_ones() as f64),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, lambda: f64) -> ChainSpec {
        ChainSpec::new(n, 1.0, lambda, vec![0.01; n], BathTopology::Common).unwrap()
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn spec_validation() {
        assert!(ChainSpec::new(1, 1.0, 0.1, vec![0.0], BathTopology::Common).is_err());
        assert!(ChainSpec::new(2, 0.0, 0.1, vec![0.0; 2], BathTopology::Common).is_err());
        assert!(ChainSpec::new(2, 1.0, 0.1, vec![0.0; 3], BathTopology::Common).is_err());
        assert!(ChainSpec::new(2, 1.0, 0.1, vec![0.1, -0.1], BathTopology::Common).is_err());
    }

    #[test]
    fn two_qubit_full_spectrum() {
        let h = build_hamiltonian(&spec(2, 0.1), Subspace::Full).unwrap();
        let ev = sorted(h.symmetric_eigenvalues().iter().copied().collect());
        for (a, b) in ev.iter().zip([-1.0, -0.1, 0.1, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uncoupled_is_diagonal() {
        let h = build_hamiltonian(&spec(2, 0.0), Subspace::Full).unwrap();
        assert_eq!(h, RMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.0, 0.0, 1.0])));
    }

    #[test]
    fn full_capacity() {
        let s = ChainSpec::new(13, 1.0, 0.1, vec![0.0; 13], BathTopology::Common).unwrap();
        assert!(matches!(
            build_hamiltonian(&s, Subspace::Full),
            Err(Error::Capacity { .. })
        ));
        assert!(build_hamiltonian(&s, Subspace::SingleExcitation).is_ok());
    }

    #[test]
    fn two_qubit_eigenstates_in_conventional_order() {
        let eig = diagonalize(&spec(2, 0.1), Subspace::Full).unwrap();
        assert_eq!(eig.subspace(), Subspace::TwoQubitFull);
        for (a, b) in eig.energies().iter().zip([1.0, -1.0, 0.1, -0.1]) {
            assert!((a - b).abs() < 1e-14);
        }
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // basis order gg, ge, eg, ee
        let expected = [
            [0.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, r, r, 0.0],
            [0.0, r, -r, 0.0],
        ];
        for (k, col) in expected.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                assert!((eig.states()[(i, k)] - x).abs() < 1e-12, "state {k}");
            }
        }
        assert_eq!(eig.basis_labels(), vec!["gg", "ge", "eg", "ee"]);
    }

    #[test]
    fn degenerate_pair_is_orthonormal() {
        let eig = diagonalize(&spec(2, 0.0), Subspace::Full).unwrap();
        assert!((eig.energies()[2]).abs() < 1e-15 && (eig.energies()[3]).abs() < 1e-15);
        let v = eig.states();
        let gram = v.transpose() * v;
        assert!((gram - RMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn three_qubit_closed_form_energies() {
        let eig = single_excitation_eigensystem(&spec(3, 0.2));
        let r2 = 2f64.sqrt();
        for (a, b) in eig.energies().iter().zip([-0.5 + 0.2 * r2, -0.5, -0.5 - 0.2 * r2]) {
            assert!((a - b).abs() < 1e-14);
        }
        let dense = diagonalize(&spec(3, 0.2), Subspace::SingleExcitation).unwrap();
        for (a, b) in eig.energies().iter().zip(dense.energies()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_qubit_closed_form_matches_pair_energies() {
        let eig = single_excitation_eigensystem(&spec(2, 0.37));
        assert!((eig.energies()[0] - 0.37).abs() < 1e-14);
        assert!((eig.energies()[1] + 0.37).abs() < 1e-14);
    }

    #[test]
    fn flat_band() {
        for n in 2..7 {
            let eig = single_excitation_eigensystem(&spec(n, 0.0));
            for e in eig.energies() {
                assert!((e - (1.0 - n as f64 / 2.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn two_qubit_coupling_elements() {
        let s = spec(2, 0.1);
        let eig = diagonalize(&s, Subspace::Full).unwrap();
        let z = coupling_operators(&s, &eig).unwrap();
        assert!((z.element(0, 2, 3) + 1.0).abs() < 1e-12);
        assert!(z.element(0, 2, 2).abs() < 1e-12);
        assert!((z.element(0, 0, 0) - 1.0).abs() < 1e-12);
        assert!((z.element(1, 2, 3) - 1.0).abs() < 1e-12);
        // constructive on φ1, φ2 and destructive on the φ3/φ4 pair
        for i in 0..2 {
            assert!((z.element(0, i, i) * z.element(1, i, i) - 1.0).abs() < 1e-12);
        }
        assert!((z.element(0, 2, 3) * z.element(1, 2, 3) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_operators_square_to_identity_in_full_space() {
        let s = spec(3, 0.3);
        let eig = diagonalize(&s, Subspace::Full).unwrap();
        let z = coupling_operators(&s, &eig).unwrap();
        for op in z.iter() {
            assert!((op * op - RMatrix::identity(8, 8)).amax() < 1e-12);
            assert!((op - op.transpose()).amax() == 0.0);
        }
    }

    #[test]
    fn mismatched_spec_is_rejected() {
        let eig = diagonalize(&spec(3, 0.3), Subspace::SingleExcitation).unwrap();
        assert!(matches!(
            coupling_operators(&spec(4, 0.3), &eig),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn excitation_number_commutes_with_hamiltonian() {
        for n in 2..6 {
            let s = spec(n, 0.23);
            let h = build_hamiltonian(&s, Subspace::Full).unwrap();
            let k = excitation_number(n).unwrap();
            assert!((&h * &k - &k * &h).amax() < 1e-12);
        }
    }

    #[test]
    fn basis_round_trip() {
        let s = spec(3, 0.2);
        let eig = diagonalize(&s, Subspace::SingleExcitation).unwrap();
        let op = CMatrix::from_fn(3, 3, |i, j| crate::c(i as f64, j as f64));
        let back = eig.from_eigenbasis(&eig.to_eigenbasis(&op).unwrap()).unwrap();
        assert!(crate::max_abs(&(back - op)) < 1e-12);
        assert!(eig.to_eigenbasis(&CMatrix::zeros(2, 2)).is_err());
    }
}
