//! Fluorescence-style detection: collinear four-pulse trains, phase cycling
//! and discrete Fourier extraction of the phase signature.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result, ScanPoint};
use crate::field::{Delays, Pulse, PulseShape, PulseTrain, TRUNCATION};
use crate::lindblad::{ground_state, Integration, LindbladGenerator, Propagator, Trajectory};
use crate::spectrum::Component;
use crate::system::{DensityMatrix, QuantumSystem, C64};
use crate::units::HBAR;

/// Default acquisition window (fs), long against the 160 ps emitter lifetime.
pub const DEFAULT_T_ACQ: f64 = 500e3;

/// Phase lattice `{0..L-1} x {0..M-1} x {0..N-1}` with steps for pulses 2-4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCycle {
    pub l: usize,
    pub m: usize,
    pub n: usize,
    pub steps: [f64; 3],
}

impl Default for PhaseCycle {
    fn default() -> Self {
        PhaseCycle { l: 3, m: 3, n: 3, steps: [2.0 * PI / 3.0; 3] }
    }
}

impl PhaseCycle {
    pub fn new(l: usize, m: usize, n: usize, steps: [f64; 3]) -> Result<Self> {
        if l == 0 || m == 0 || n == 0 {
            return Err(Error::Validation("phase-cycle counts must be >= 1".into()));
        }
        if steps.iter().any(|s| !s.is_finite()) {
            return Err(Error::Validation("phase steps must be finite".into()));
        }
        Ok(PhaseCycle { l, m, n, steps })
    }

    pub fn len(&self) -> usize {
        self.l * self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, l: usize, m: usize, n: usize) -> usize {
        (l * self.m + m) * self.n + n
    }

    /// All `(l, m, n)` in index order.
    pub fn combinations(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.len());
        for l in 0..self.l {
            for m in 0..self.m {
                for n in 0..self.n {
                    out.push((l, m, n));
                }
            }
        }
        out
    }

    /// Phases of pulses 1-4.
    pub fn phases(&self, l: usize, m: usize, n: usize) -> [f64; 4] {
        [0.0, l as f64 * self.steps[0], m as f64 * self.steps[1], n as f64 * self.steps[2]]
    }
}

/// Phase signature `(beta, gamma, delta)` of pulses 2-4; pulse 1 carries
/// `alpha = -(beta + gamma + delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature {
    pub beta: i32,
    pub gamma: i32,
    pub delta: i32,
}

impl Signature {
    pub const REPHASING: Signature = Signature { beta: 1, gamma: 1, delta: -1 };
    pub const NONREPHASING: Signature = Signature { beta: -1, gamma: 1, delta: -1 };
    pub const DQC: Signature = Signature { beta: 1, gamma: -1, delta: -1 };

    pub fn new(beta: i32, gamma: i32, delta: i32) -> Self {
        Signature { beta, gamma, delta }
    }

    pub fn alpha(&self) -> i32 {
        -(self.beta + self.gamma + self.delta)
    }

    pub fn from_component(c: Component) -> Result<Self> {
        match c {
            Component::Rephasing => Ok(Signature::REPHASING),
            Component::Nonrephasing => Ok(Signature::NONREPHASING),
            Component::Dqc => Ok(Signature::DQC),
            Component::Total => Err(Error::Unsupported("total is not a phase signature".into())),
        }
    }
}

/// `(1/LMN) sum p(l,m,n) exp(-i (l beta d21 + m gamma d31 + n delta d41))`.
pub fn extract_component<T>(values: &[T], cycle: &PhaseCycle, signature: Signature) -> Result<C64>
where
    T: Copy + Into<C64>,
{
    if values.len() != cycle.len() {
        return Err(Error::Dimension(format!("{} values for a {}-point phase cycle", values.len(), cycle.len())));
    }
    let [d2, d3, d4] = cycle.steps;
    let mut acc = C64::new(0.0, 0.0);
    for (l, m, n) in cycle.combinations() {
        let phi = l as f64 * f64::from(signature.beta) * d2
            + m as f64 * f64::from(signature.gamma) * d3
            + n as f64 * f64::from(signature.delta) * d4;
        acc += values[cycle.index(l, m, n)].into() * C64::from_polar(1.0, -phi);
    }
    Ok(acc / cycle.len() as f64)
}

/// Scalar read out after the last pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectionMode {
    /// `sum_i yield_i rho_ii` right after the train.
    PopulationProxy,
    /// Emitted photons `sum_i w_i int_0^t_acq rho_ii(s) ds` with
    /// `w_i = yield_i * (outgoing rate of i) / hbar`.
    IntegratedFluorescence { t_acq: f64 },
}

/// Linear functional `Re sum_j w_j vec(rho)_j` for one detection mode.
#[derive(Debug, Clone)]
pub struct Detector {
    dim: usize,
    /// Weight per population.
    weights: Vec<f64>,
}

/// Population rate matrix `K` (1/fs), `d p / dt = K p`.
pub fn population_rates(system: &QuantumSystem) -> DMatrix<f64> {
    let n = system.dim();
    let mut k = DMatrix::zeros(n, n);
    for j in system.jumps() {
        k[(j.to, j.from)] += j.rate / HBAR;
        k[(j.from, j.from)] -= j.rate / HBAR;
    }
    k
}

impl Detector {
    pub fn new(system: &QuantumSystem, mode: DetectionMode) -> Result<Self> {
        let n = system.dim();
        let weights = match mode {
            DetectionMode::PopulationProxy => system.yields().to_vec(),
            DetectionMode::IntegratedFluorescence { t_acq } => {
                if !(t_acq >= 0.0 && t_acq.is_finite()) {
                    return Err(Error::Validation(format!("acquisition time must be >= 0, got {t_acq}")));
                }
                // Van Loan: the top-right block of exp([[K, I], [0, 0]] t) is int_0^t exp(K s) ds
                let k = population_rates(system);
                let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
                big.view_mut((0, 0), (n, n)).copy_from(&(&k * t_acq));
                for i in 0..n {
                    big[(i, n + i)] = t_acq;
                }
                let phi = big.exp().view((0, n), (n, n)).into_owned();
                let e = system.emission_weights();
                (0..n).map(|j| (0..n).map(|i| e[i] * phi[(i, j)]).sum()).collect()
            }
        };
        Ok(Detector { dim: n, weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn read_slice(&self, rho: &[C64]) -> f64 {
        (0..self.dim).map(|i| self.weights[i] * rho[i + i * self.dim].re).sum()
    }

    pub fn read(&self, rho: &DensityMatrix) -> f64 {
        self.read_slice(rho.as_slice())
    }
}

/// Trapezoid integral of `sum_i w_i rho_ii(t)` over `[t_0, t_0 + t_acq]` of
/// a recorded trajectory starting at `t_0`.
pub fn fluorescence_yield(system: &QuantumSystem, trajectory: &Trajectory, t_acq: f64) -> Result<f64> {
    if !(t_acq >= 0.0) {
        return Err(Error::Validation(format!("acquisition time must be >= 0, got {t_acq}")));
    }
    if trajectory.times.is_empty() {
        return Err(Error::Validation("empty trajectory".into()));
    }
    let t0 = trajectory.times[0];
    let t_end = t0 + t_acq;
    let last = *trajectory.times.last().unwrap_or(&t0);
    if last < t_end - 1e-9 * t_acq.max(1.0) {
        return Err(Error::Validation(format!("trajectory ends at {last} fs, before {t_end} fs")));
    }
    let w = system.emission_weights();
    let flux = |r: &DensityMatrix| -> f64 { w.iter().enumerate().map(|(i, wi)| wi * r.population(i)).sum() };
    let mut acc = 0.0;
    for k in 1..trajectory.times.len() {
        let (ta, tb) = (trajectory.times[k - 1], trajectory.times[k]);
        if ta >= t_end {
            break;
        }
        let (fa, fb) = (flux(&trajectory.states[k - 1]), flux(&trajectory.states[k]));
        if tb <= t_end {
            acc += 0.5 * (fa + fb) * (tb - ta);
        } else {
            let fe = fa + (fb - fa) * (t_end - ta) / (tb - ta);
            acc += 0.5 * (fa + fe) * (t_end - ta);
        }
    }
    Ok(acc)
}

/// Detected values for every phase combination of one four-pulse train.
/// Cycle phases are added to the phases already set on `train`.
pub fn run_phase_cycle(
    system: &QuantumSystem,
    train: &PulseTrain,
    cycle: &PhaseCycle,
    detector: &Detector,
    integration: &Integration,
) -> Result<Vec<f64>> {
    if train.len() != 4 {
        return Err(Error::Dimension(format!("fluorescence detection uses 4 pulses, got {}", train.len())));
    }
    if train.pulses().iter().any(|p| p.wavevector != [0.0; 3]) {
        return Err(Error::Unsupported("phase cycling assumes collinear pulses with zero wavevectors".into()));
    }
    let base: Vec<f64> = train.pulses().iter().map(|p| p.phase).collect();
    let generator = LindbladGenerator::new(system, train.carrier());
    let c = train.pulses().iter().map(|p| p.center).collect::<Vec<_>>();
    cycle
        .combinations()
        .par_iter()
        .map(|&(l, m, n)| {
            let ph = cycle.phases(l, m, n);
            let phases: Vec<f64> = base.iter().zip(ph).map(|(b, p)| b + p).collect();
            let tr = train.clone().with_phases(&phases)?;
            let mut prop = Propagator::new(&generator, integration.dt)?.with_monitor(integration.monitor);
            let mut rho = ground_state(system);
            prop.advance(&mut rho, &tr.at(&[0.0; 3]), tr.start(), tr.end()).map_err(|e| {
                e.at(ScanPoint {
                    tau_fs: c[1] - c[0],
                    waiting_fs: c[2] - c[1],
                    t_fs: c[3] - c[2],
                    phase_indices: Some((l, m, n)),
                })
            })?;
            Ok(detector.read(&rho))
        })
        .collect()
}

/// Inputs of a fluorescence scan.
#[derive(Debug, Clone)]
pub struct FdScan<'a> {
    pub system: &'a QuantumSystem,
    pub shape: PulseShape,
    pub cycle: PhaseCycle,
    pub tau: &'a [f64],
    pub waiting: f64,
    pub t: &'a [f64],
    pub integration: Integration,
}

/// Density matrices after the fourth pulse for every `(tau, t, l, m, n)`.
///
/// Detection is linear in the final state, so several detectors can be
/// applied to one scan.
#[derive(Debug, Clone)]
pub struct FdStates {
    n_tau: usize,
    n_t: usize,
    dim: usize,
    cycle: PhaseCycle,
    data: Vec<C64>,
}

impl FdStates {
    fn offset(&self, i: usize, k: usize, idx: usize) -> usize {
        ((i * self.n_t + k) * self.cycle.len() + idx) * self.dim * self.dim
    }

    pub fn state(&self, i: usize, k: usize, idx: usize) -> DMatrix<C64> {
        let o = self.offset(i, k, idx);
        DMatrix::from_column_slice(self.dim, self.dim, &self.data[o..o + self.dim * self.dim])
    }

    /// Detected values at `(tau_i, t_k)` in phase-cycle index order.
    pub fn values(&self, detector: &Detector, i: usize, k: usize) -> Vec<f64> {
        let n2 = self.dim * self.dim;
        (0..self.cycle.len())
            .map(|idx| {
                let o = self.offset(i, k, idx);
                detector.read_slice(&self.data[o..o + n2])
            })
            .collect()
    }

    /// Extracted `p(tau_i, t_k)` for one signature.
    pub fn signal(&self, detector: &Detector, signature: Signature) -> Result<DMatrix<C64>> {
        let mut out = DMatrix::zeros(self.n_tau, self.n_t);
        for i in 0..self.n_tau {
            for k in 0..self.n_t {
                out[(i, k)] = extract_component(&self.values(detector, i, k), &self.cycle, signature)?;
            }
        }
        Ok(out)
    }
}

fn check_axis(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() || v[0] < 0.0 || v.windows(2).any(|w| w[1] < w[0]) || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation(format!("{name} delays must be non-empty, >= 0 and ascending")));
    }
    Ok(())
}

impl FdScan<'_> {
    fn validate(&self) -> Result<()> {
        check_axis("tau", self.tau)?;
        check_axis("t", self.t)?;
        Delays::new(0.0, self.waiting, 0.0)?;
        Pulse::new(0.0, self.shape.sigma, self.shape.peak_interaction, self.shape.carrier)?;
        Ok(())
    }

    fn train(&self, tau: f64, t: f64, phases: &[f64]) -> Result<PulseTrain> {
        PulseTrain::from_delays(&self.shape, &Delays::new(tau, self.waiting, t)?, phases.len())?.with_phases(phases)
    }

    /// Final states on the whole grid. Pulse `n` has no effect before
    /// `t_n - cutoff`, so trajectories are shared along a tree: one pulse-1
    /// trajectory for all `tau`, then branches per phase of pulses 2, 3, 4.
    pub fn final_states(&self) -> Result<FdStates> {
        self.validate()?;
        let system = self.system;
        let dim = system.dim();
        let n2 = dim * dim;
        let cut = TRUNCATION * self.shape.sigma;
        let generator = LindbladGenerator::new(system, self.shape.carrier);
        let new_prop = || -> Result<Propagator<'_>> {
            Ok(Propagator::new(&generator, self.integration.dt)?.with_monitor(self.integration.monitor))
        };
        let point = |tau: f64, t: f64, lmn: Option<(usize, usize, usize)>| ScanPoint {
            tau_fs: tau,
            waiting_fs: self.waiting,
            t_fs: t,
            phase_indices: lmn,
        };

        let mut prefixes = Vec::with_capacity(self.tau.len());
        {
            let first = self.train(0.0, 0.0, &[0.0])?.at(&[0.0; 3]);
            let mut prop = new_prop()?;
            let mut rho = ground_state(system);
            let mut now = -cut;
            for &tau in self.tau {
                prop.advance(&mut rho, &first, now, tau - cut).map_err(|e| e.at(point(tau, 0.0, None)))?;
                now = tau - cut;
                prefixes.push(rho.clone());
            }
        }

        let c = self.cycle;
        let per_tau = self
            .tau
            .par_iter()
            .zip(prefixes.par_iter())
            .map(|(&tau, prefix)| -> Result<Vec<C64>> {
                let mut block = vec![C64::new(0.0, 0.0); self.t.len() * c.len() * n2];
                let mut prop = new_prop()?;
                let t3 = tau + self.waiting;
                for l in 0..c.l {
                    let ph2 = c.phases(l, 0, 0)[1];
                    let two = self.train(tau, 0.0, &[0.0, ph2])?.at(&[0.0; 3]);
                    let mut after2 = prefix.clone();
                    prop.advance(&mut after2, &two, tau - cut, t3 - cut)
                        .map_err(|e| e.at(point(tau, 0.0, Some((l, 0, 0)))))?;
                    for m in 0..c.m {
                        let ph3 = c.phases(0, m, 0)[2];
                        let three = self.train(tau, 0.0, &[0.0, ph2, ph3])?.at(&[0.0; 3]);
                        let mut rho3 = after2.clone();
                        let mut now = t3 - cut;
                        for (k, &t) in self.t.iter().enumerate() {
                            let t4 = t3 + t;
                            prop.advance(&mut rho3, &three, now, t4 - cut)
                                .map_err(|e| e.at(point(tau, t, Some((l, m, 0)))))?;
                            now = t4 - cut;
                            for n in 0..c.n {
                                let ph = c.phases(l, m, n);
                                let four = self.train(tau, t, &ph)?.at(&[0.0; 3]);
                                let mut rho = rho3.clone();
                                prop.advance(&mut rho, &four, t4 - cut, t4 + cut)
                                    .map_err(|e| e.at(point(tau, t, Some((l, m, n)))))?;
                                let o = (k * c.len() + c.index(l, m, n)) * n2;
                                block[o..o + n2].copy_from_slice(rho.as_slice());
                            }
                        }
                    }
                }
                Ok(block)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FdStates { n_tau: self.tau.len(), n_t: self.t.len(), dim, cycle: c, data: per_tau.concat() })
    }
}

/// Extracted `p(tau_i, t_k)` for one signature and detection mode.
pub fn fd_signal_scan(scan: &FdScan<'_>, signature: Signature, mode: DetectionMode) -> Result<DMatrix<C64>> {
    let detector = Detector::new(scan.system, mode)?;
    scan.final_states()?.signal(&detector, signature)
}
