//! Master-equation generators behind a common trait, selectable by name.
//!
//! Two equations are built in: the two-qubit non-secular equation
//! (`"redfield"`) and the secular Lindblad equation (`"lindblad"`). Both act
//! on density matrices written in the energy eigenbasis of their
//! [`EigenSystem`].

use crate::error::{Error, Result};
use crate::lindblad::{build_generator, DEFAULT_GROUPING_TOL};
use crate::registry::Registry;
use crate::system::{diagonalize, single_excitation_eigensystem, ChainSpec, EigenSystem, Subspace};
use crate::twoqubit::redfield_tensor;
use crate::{c, CMatrix};

/// Largest state dimension for which a Liouvillian matrix is formed
/// (`d² ≤ 10⁴`).
pub const MAX_LIOUVILLIAN_DIM: usize = 100;

/// A time-independent linear master equation `dρ/dt = L(ρ)`.
pub trait MasterEquation: Send + Sync {
    fn name(&self) -> &'static str;

    /// Basis in which `apply` reads and writes density matrices.
    fn eigensystem(&self) -> &EigenSystem;

    fn dim(&self) -> usize {
        self.eigensystem().dim()
    }

    /// `dρ/dt` for an eigenbasis density matrix `rho`.
    fn apply(&self, rho: &CMatrix) -> Result<CMatrix>;

    /// Superoperator matrix acting on column-stacked `vec(ρ)`, where entry
    /// `(i, j)` of `ρ` sits at index `i + j·d`.
    fn liouvillian(&self) -> Result<CMatrix>;

    /// Most negative eigenvalue tolerated on states produced by this equation.
    fn positivity_floor(&self) -> f64;

    /// Ratio of this equation's decay rates to those of the two-qubit
    /// non-secular form for the same process. The secular Lindblad form
    /// damps the `φ3` population and the `φ1/φ2` coherence at half the rate.
    fn rate_scale(&self) -> f64 {
        1.0
    }
}

pub(crate) fn check_square(rho: &CMatrix, dim: usize) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::Consistency(format!(
            "density matrix is {}x{}, generator dimension is {dim}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_liouvillian_capacity(dim: usize) -> Result<()> {
    if dim > MAX_LIOUVILLIAN_DIM {
        return Err(Error::Capacity {
            what: "Liouvillian state dimension",
            requested: dim,
            limit: MAX_LIOUVILLIAN_DIM,
        });
    }
    Ok(())
}

/// Builds the Liouvillian by applying the generator to every matrix unit.
///
/// Slower than [`MasterEquation::liouvillian`] but needs nothing beyond
/// `apply`, so it serves as a cross-check.
pub fn liouvillian_by_probing(gen: &dyn MasterEquation) -> Result<CMatrix> {
    let d = gen.dim();
    check_liouvillian_capacity(d)?;
    let mut l = CMatrix::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            let mut unit = CMatrix::zeros(d, d);
            unit[(i, j)] = c(1.0, 0.0);
            let out = gen.apply(&unit)?;
            for q in 0..d {
                for p in 0..d {
                    l[(p + q * d, i + j * d)] = out[(p, q)];
                }
            }
        }
    }
    Ok(l)
}

/// Construction options shared by the generator factories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorOptions {
    /// `None` picks the full space for two qubits and the
    /// single-excitation subspace otherwise.
    pub subspace: Option<Subspace>,
    /// Bohr-frequency grouping tolerance in units of `Ω`.
    pub grouping_tol: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            subspace: None,
            grouping_tol: DEFAULT_GROUPING_TOL,
        }
    }
}

impl GeneratorOptions {
    pub fn subspace_for(&self, spec: &ChainSpec) -> Subspace {
        self.subspace.unwrap_or(if spec.n_qubits() == 2 {
            Subspace::Full
        } else {
            Subspace::SingleExcitation
        })
    }

    /// Eigensystem on the chosen subspace. The single-excitation block uses
    /// the closed-form sine modes.
    pub fn eigensystem(&self, spec: &ChainSpec) -> Result<EigenSystem> {
        match self.subspace_for(spec) {
            Subspace::SingleExcitation => Ok(single_excitation_eigensystem(spec)),
            s => diagonalize(spec, s),
        }
    }
}

pub type GeneratorFactory = Box<
    dyn Fn(&ChainSpec, &GeneratorOptions) -> Result<Box<dyn MasterEquation>> + Send + Sync,
>;

/// Registry holding the built-in generators.
pub fn builtin_generators() -> Registry<GeneratorFactory> {
    let mut reg: Registry<GeneratorFactory> = Registry::new("generator");
    reg.register(
        "lindblad",
        "secular Lindblad equation with Bohr-frequency grouped jump operators, any N",
        Box::new(|spec, opts| {
            let eig = opts.eigensystem(spec)?;
            let gen = build_generator(spec, eig, opts.grouping_tol)?;
            Ok(Box::new(gen) as Box<dyn MasterEquation>)
        }),
    )
    .expect("fresh registry");
    reg.register(
        "redfield",
        "two-qubit non-secular equation in the eigenbasis, N = 2 full space only",
        Box::new(|spec, opts| {
            if opts.subspace_for(spec) == Subspace::SingleExcitation {
                return Err(Error::Unsupported(
                    "the two-qubit non-secular equation needs the full space".into(),
                ));
            }
            Ok(Box::new(redfield_tensor(spec)?) as Box<dyn MasterEquation>)
        }),
    )
    .expect("fresh registry");
    reg
}
