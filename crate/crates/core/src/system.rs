//! N-level open quantum system and its density matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relaxation `from -> to` with rate `rate` (eV). The jump operator is `|to><from|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpChannel {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// Pure dephasing through the projector `|level><level|` with strength in eV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingChannel {
    pub level: usize,
    pub strength: f64,
}

/// Optically allowed transition `upper <-> lower` (excitation numbers differ by one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub upper: usize,
    pub lower: usize,
    pub dipole: f64,
}

/// Immutable description of the absorber: levels, transition dipoles,
/// Lindblad channels, fluorescence yields and excitation grading.
///
/// Dipoles are relative transition strengths; the pulse's peak interaction
/// energy (meV) multiplies them to give the coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSystem {
    energies: Vec<f64>,
    dipoles: DMatrix<f64>,
    jumps: Vec<JumpChannel>,
    dephasing: Vec<DephasingChannel>,
    yields: Vec<f64>,
    excitation: Vec<u32>,
    couplings: Vec<Coupling>,
}

impl QuantumSystem {
    pub fn new(
        energies: Vec<f64>,
        dipoles: DMatrix<f64>,
        jumps: Vec<JumpChannel>,
        dephasing: Vec<DephasingChannel>,
        yields: Vec<f64>,
        excitation: Vec<u32>,
    ) -> Result<Self> {
        let dim = energies.len();
        if dim == 0 {
            return Err(Error::Dimension("system needs at least one level".into()));
        }
        if dipoles.nrows() != dim || dipoles.ncols() != dim {
            return Err(Error::Dimension(format!(
                "dipole matrix is {}x{}, expected {dim}x{dim}",
                dipoles.nrows(),
                dipoles.ncols()
            )));
        }
        if yields.len() != dim || excitation.len() != dim {
            return Err(Error::Dimension("yields and excitation grading need one entry per level".into()));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::Validation("energies must be finite".into()));
        }
        for a in 0..dim {
            if dipoles[(a, a)] != 0.0 {
                return Err(Error::Validation(format!("dipole diagonal ({a},{a}) must be zero")));
            }
            for b in 0..a {
                if dipoles[(a, b)] != dipoles[(b, a)] {
                    return Err(Error::Validation(format!("dipole matrix not symmetric at ({a},{b})")));
                }
                if !dipoles[(a, b)].is_finite() {
                    return Err(Error::Validation("dipoles must be finite".into()));
                }
            }
        }
        for j in &jumps {
            if j.from >= dim || j.to >= dim || j.from == j.to {
                return Err(Error::Validation(format!("bad jump channel {} -> {}", j.from, j.to)));
            }
            if !(j.rate >= 0.0 && j.rate.is_finite()) {
                return Err(Error::Validation(format!("jump rate must be >= 0, got {}", j.rate)));
            }
        }
        for d in &dephasing {
            if d.level >= dim {
                return Err(Error::Validation(format!("dephasing level {} out of range", d.level)));
            }
            if !(d.strength >= 0.0 && d.strength.is_finite()) {
                return Err(Error::Validation(format!("dephasing strength must be >= 0, got {}", d.strength)));
            }
        }
        if yields.iter().any(|y| !(*y >= 0.0 && y.is_finite())) {
            return Err(Error::Validation("yields must be >= 0".into()));
        }
        if excitation[0] != 0 {
            return Err(Error::Validation("excitation number of level 0 must be 0".into()));
        }

        let mut couplings = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                if excitation[a] == excitation[b] + 1 && dipoles[(a, b)] != 0.0 {
                    couplings.push(Coupling { upper: a, lower: b, dipole: dipoles[(a, b)] });
                }
            }
        }

        Ok(QuantumSystem { energies, dipoles, jumps, dephasing, yields, excitation, couplings })
    }

    /// Four-level dimer-like model: E = (0, 1.46, 1.55, 3.01) eV, all
    /// transitions equally strong except the forbidden 0 <-> 3, relaxation
    /// 3 -> 2 -> 1 -> 0 (48 fs, 160 fs, 160 ps) and 41.3 meV dephasing on
    /// every level. Fluorescence is collected from level 1 only.
    pub fn dimer_model() -> Self {
        let e1 = 1.46;
        let e2 = 1.55;
        let mut dipoles = DMatrix::from_element(4, 4, 1.0);
        for a in 0..4 {
            dipoles[(a, a)] = 0.0;
        }
        dipoles[(0, 3)] = 0.0;
        dipoles[(3, 0)] = 0.0;
        let jumps = vec![
            JumpChannel { from: 1, to: 0, rate: 4.13e-6 },
            JumpChannel { from: 2, to: 1, rate: 4.13e-3 },
            JumpChannel { from: 3, to: 2, rate: 13.78e-3 },
        ];
        let dephasing = (0..4).map(|level| DephasingChannel { level, strength: 41.3e-3 }).collect();
        QuantumSystem::new(
            vec![0.0, e1, e2, e1 + e2],
            dipoles,
            jumps,
            dephasing,
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0, 1, 1, 2],
        )
        .expect("built-in model is valid")
    }

    /// Resonant two-level system at `gap` eV with unit dipole and no channels.
    pub fn two_level(gap: f64) -> Self {
        let dipoles = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        QuantumSystem::new(vec![0.0, gap], dipoles, vec![], vec![], vec![0.0, 1.0], vec![0, 1])
            .expect("two-level system is valid")
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn dipoles(&self) -> &DMatrix<f64> {
        &self.dipoles
    }

    pub fn jumps(&self) -> &[JumpChannel] {
        &self.jumps
    }

    pub fn dephasing(&self) -> &[DephasingChannel] {
        &self.dephasing
    }

    pub fn yields(&self) -> &[f64] {
        &self.yields
    }

    pub fn excitation(&self) -> &[u32] {
        &self.excitation
    }

    /// Dipole-allowed transitions between adjacent excitation manifolds.
    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn with_yields(&self, yields: Vec<f64>) -> Result<Self> {
        let s = self.clone();
        QuantumSystem::new(s.energies, s.dipoles, s.jumps, s.dephasing, yields, s.excitation)
    }

    pub fn with_jumps(&self, jumps: Vec<JumpChannel>) -> Result<Self> {
        let s = self.clone();
        QuantumSystem::new(s.energies, s.dipoles, jumps, s.dephasing, s.yields, s.excitation)
    }

    pub fn with_dephasing(&self, dephasing: Vec<DephasingChannel>) -> Result<Self> {
        let s = self.clone();
        QuantumSystem::new(s.energies, s.dipoles, s.jumps, dephasing, s.yields, s.excitation)
    }

    pub fn with_dipoles(&self, dipoles: DMatrix<f64>) -> Result<Self> {
        let s = self.clone();
        QuantumSystem::new(s.energies, dipoles, s.jumps, s.dephasing, s.yields, s.excitation)
    }

    /// Total outgoing jump rate (eV) of each level.
    pub fn outgoing_rates(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for j in &self.jumps {
            out[j.from] += j.rate;
        }
        out
    }

    /// Fluorescence emission weight per level (1/fs): yield times the level's
    /// total spontaneous relaxation rate over hbar.
    pub fn emission_weights(&self) -> Vec<f64> {
        self.outgoing_rates()
            .iter()
            .zip(&self.yields)
            .map(|(r, y)| y * r / crate::units::HBAR)
            .collect()
    }

    /// Transition energies of the single-excitation manifold (eV).
    pub fn single_excitation_resonances(&self) -> Vec<f64> {
        self.couplings
            .iter()
            .filter(|c| self.excitation[c.lower] == 0)
            .map(|c| self.energies[c.upper] - self.energies[c.lower])
            .collect()
    }
}

/// Reduced density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: DMatrix<C64>,
}

/// Tolerances a physical density matrix must satisfy.
pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITICITY_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

impl DensityMatrix {
    pub fn from_matrix(data: DMatrix<C64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::Dimension("density matrix must be square".into()));
        }
        Ok(DensityMatrix { data })
    }

    /// `|a><b|` in a `dim`-level space.
    pub fn basis(dim: usize, a: usize, b: usize) -> Self {
        let mut data = DMatrix::zeros(dim, dim);
        data[(a, b)] = C64::new(1.0, 0.0);
        DensityMatrix { data }
    }

    pub fn pure_population(dim: usize, level: usize) -> Self {
        Self::basis(dim, level, level)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn as_slice(&self) -> &[C64] {
        self.data.as_slice()
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [C64] {
        self.data.as_mut_slice()
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn get(&self, a: usize, b: usize) -> C64 {
        self.data[(a, b)]
    }

    pub fn population(&self, level: usize) -> f64 {
        self.data[(level, level)].re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)].re).collect()
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// max |rho - rho^dagger| elementwise.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a..n {
                let d = (self.data[(a, b)] - self.data[(b, a)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Checks trace, Hermiticity and positivity against `scale` times the
    /// nominal tolerances.
    pub fn check_invariants(&self, scale: f64) -> std::result::Result<(), String> {
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > scale * TRACE_TOL {
            return Err(format!("trace drifted to {tr}"));
        }
        let h = self.hermiticity_error();
        if h > scale * HERMITICITY_TOL {
            return Err(format!("hermiticity error {h:e}"));
        }
        let m = self.min_eigenvalue();
        if m < -scale * POSITIVITY_TOL {
            return Err(format!("negative eigenvalue {m:e}"));
        }
        Ok(())
    }
}
