//! Heterodyne-style detection: a spatial ensemble of absorbers driven by
//! non-collinear pulses, read out through the phase-matched polarization.
//!
//! Every absorber is propagated once per coherence time `tau`; all
//! phase-matching directions are read out from the same trajectories.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result, ScanPoint};
use crate::field::{Delays, Pulse, PulseShape, PulseTrain, Vec3, TRUNCATION};
use crate::lindblad::{ground_state, Integration, LindbladGenerator, Propagator};
use crate::numeric::CompensatedSum;
use crate::spectrum::Component;
use crate::system::{DensityMatrix, QuantumSystem, C64};

/// Absorbers handed to the thread pool per batch; bounds peak memory.
const BATCH: usize = 128;

/// Phase-matching direction as coefficients of `(k1, k2, k3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseMatch {
    Rephasing,
    Nonrephasing,
    Dqc,
}

impl PhaseMatch {
    pub const ALL: [PhaseMatch; 3] = [PhaseMatch::Rephasing, PhaseMatch::Nonrephasing, PhaseMatch::Dqc];

    pub fn coefficients(&self) -> [i32; 3] {
        match self {
            PhaseMatch::Rephasing => [-1, 1, 1],
            PhaseMatch::Nonrephasing => [1, -1, 1],
            PhaseMatch::Dqc => [1, 1, -1],
        }
    }

    pub fn component(&self) -> Component {
        match self {
            PhaseMatch::Rephasing => Component::Rephasing,
            PhaseMatch::Nonrephasing => Component::Nonrephasing,
            PhaseMatch::Dqc => Component::Dqc,
        }
    }

    pub fn from_component(c: Component) -> Result<Self> {
        match c {
            Component::Rephasing => Ok(PhaseMatch::Rephasing),
            Component::Nonrephasing => Ok(PhaseMatch::Nonrephasing),
            Component::Dqc => Ok(PhaseMatch::Dqc),
            Component::Total => Err(Error::Unsupported("total is not a phase-matching direction".into())),
        }
    }
}

/// `sum_n c_n k_n`.
pub fn signal_wavevector(coefficients: [i32; 3], ks: &[Vec3; 3]) -> Vec3 {
    let mut out = [0.0; 3];
    for (c, k) in coefficients.iter().zip(ks) {
        for d in 0..3 {
            out[d] += f64::from(*c) * k[d];
        }
    }
    out
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Random ensemble geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_absorbers: usize,
    /// Cube side in units of the wavelength `2 pi / |k1|`.
    pub box_scale: f64,
    pub seed: u64,
    pub wavevectors: [Vec3; 3],
}

impl EnsembleConfig {
    pub fn new(n_absorbers: usize, box_scale: f64, seed: u64, wavevectors: [Vec3; 3]) -> Result<Self> {
        let c = EnsembleConfig { n_absorbers, box_scale, seed, wavevectors };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_absorbers < 1 {
            return Err(Error::Validation("the ensemble needs at least one absorber".into()));
        }
        if !(self.box_scale >= 1.0 && self.box_scale.is_finite()) {
            return Err(Error::Validation(format!("box scale must be >= 1, got {}", self.box_scale)));
        }
        let [a, b, c] = &self.wavevectors;
        let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        let det = dot(&cross, c);
        let scale = self.wavevectors.iter().map(|k| dot(k, k).sqrt()).product::<f64>();
        if !(scale > 0.0) || det.abs() <= 1e-9 * scale {
            return Err(Error::Validation("wavevectors must be linearly independent".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / dot(&self.wavevectors[0], &self.wavevectors[0]).sqrt()
    }

    pub fn box_side(&self) -> f64 {
        self.box_scale * self.wavelength()
    }
}

/// Uniform positions (nm) in a cube of side `box_scale * wavelength`.
pub fn sample_positions(config: &EnsembleConfig) -> Vec<Vec3> {
    let side = config.box_side();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.n_absorbers)
        .map(|_| [rng.gen::<f64>() * side, rng.gen::<f64>() * side, rng.gen::<f64>() * side])
        .collect()
}

/// Positive-frequency dipole expectation `sum_{u above l} mu_ul rho_ul`.
pub fn coherence_readout(system: &QuantumSystem, rho: &DensityMatrix) -> C64 {
    system.couplings().iter().map(|c| rho.get(c.upper, c.lower) * c.dipole).sum()
}

/// `2 Re P`: the real polarization corresponding to an analytic signal.
pub fn real_polarization(p: &[C64]) -> Vec<f64> {
    p.iter().map(|z| 2.0 * z.re).collect()
}

/// Phase-matched polarization `sum_j exp(i k_s.r_j) d_j(t)` at `sample_times`
/// for absorbers at `positions`, each propagated from the ground state
/// through the whole `train`.
pub fn polarization(
    system: &QuantumSystem,
    train: &PulseTrain,
    positions: &[Vec3],
    direction: [i32; 3],
    sample_times: &[f64],
    integration: &Integration,
) -> Result<Vec<C64>> {
    if positions.is_empty() {
        return Err(Error::Dimension("polarization needs at least one absorber".into()));
    }
    if train.len() != 3 {
        return Err(Error::Dimension(format!("heterodyne detection uses 3 pulses, got {}", train.len())));
    }
    let ks = [train.pulses()[0].wavevector, train.pulses()[1].wavevector, train.pulses()[2].wavevector];
    let k_s = signal_wavevector(direction, &ks);
    let generator = LindbladGenerator::new(system, train.carrier());
    let per_absorber = positions
        .par_iter()
        .map(|r| {
            let mut prop = Propagator::new(&generator, integration.dt)?.with_monitor(integration.monitor);
            let mut rho = ground_state(system);
            let drive = train.at(r);
            let mut out = Vec::with_capacity(sample_times.len());
            prop.advance_sampled(&mut rho, &drive, train.start(), sample_times, |_, s| {
                out.push(coherence_readout(system, s));
                Ok(())
            })?;
            let phase = C64::from_polar(1.0, dot(&k_s, r));
            Ok(out.into_iter().map(|d| d * phase).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = vec![CompensatedSum::default(); sample_times.len()];
    for p in &per_absorber {
        for (a, v) in acc.iter_mut().zip(p) {
            a.add(*v);
        }
    }
    Ok(acc.iter().map(CompensatedSum::value).collect())
}

/// Pulse-, grid- and ensemble-level inputs of a heterodyne scan.
#[derive(Debug, Clone)]
pub struct HdScan<'a> {
    pub system: &'a QuantumSystem,
    pub shape: PulseShape,
    pub wavevectors: [Vec3; 3],
    pub positions: &'a [Vec3],
    pub tau: &'a [f64],
    pub waiting: f64,
    pub t: &'a [f64],
    pub integration: Integration,
}

fn check_axis(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() || v[0] < 0.0 || v.windows(2).any(|w| w[1] < w[0]) || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation(format!("{name} delays must be non-empty, >= 0 and ascending")));
    }
    Ok(())
}

impl HdScan<'_> {
    fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::Dimension("the ensemble needs at least one absorber".into()));
        }
        check_axis("tau", self.tau)?;
        check_axis("t", self.t)?;
        Delays::new(0.0, self.waiting, 0.0)?;
        Pulse::new(0.0, self.shape.sigma, self.shape.peak_interaction, self.shape.carrier)?;
        Ok(())
    }

    /// Dipole readout `d(tau_i, t_k)` of one absorber, without phase factor.
    fn absorber(&self, generator: &LindbladGenerator, r: &Vec3) -> Result<DMatrix<C64>> {
        let system = self.system;
        let cut = TRUNCATION * self.shape.sigma;
        let mut out = DMatrix::zeros(self.tau.len(), self.t.len());
        let mut prop = Propagator::new(generator, self.integration.dt)?.with_monitor(self.integration.monitor);
        let first = PulseTrain::from_delays(&self.shape, &Delays::new(0.0, 0.0, 0.0)?, 1)?
            .with_wavevectors(&self.wavevectors[..1])?
            .at(r);
        // only pulse 1 acts before tau_i - cut, so one trajectory serves every tau
        let mut prefix = ground_state(system);
        let mut t_prefix = -cut;
        for (i, &tau) in self.tau.iter().enumerate() {
            let point = |t: f64| ScanPoint { tau_fs: tau, waiting_fs: self.waiting, t_fs: t, phase_indices: None };
            prop.advance(&mut prefix, &first, t_prefix, tau - cut).map_err(|e| e.at(point(0.0)))?;
            t_prefix = tau - cut;
            let train = PulseTrain::from_delays(&self.shape, &Delays::new(tau, self.waiting, 0.0)?, 3)?
                .with_wavevectors(&self.wavevectors)?;
            let drive = train.at(r);
            let t3 = tau + self.waiting;
            let mut rho = prefix.clone();
            let mut now = t_prefix;
            for (k, &t) in self.t.iter().enumerate() {
                prop.advance(&mut rho, &drive, now, t3 + t).map_err(|e| e.at(point(t)))?;
                now = t3 + t;
                out[(i, k)] = coherence_readout(system, &rho);
            }
        }
        Ok(out)
    }

    /// One `tau x t` signal per requested direction, in the order given.
    pub fn run(&self, directions: &[[i32; 3]]) -> Result<Vec<DMatrix<C64>>> {
        self.validate()?;
        let generator = LindbladGenerator::new(self.system, self.shape.carrier);
        let (nt, nk) = (self.tau.len(), self.t.len());
        let k_s: Vec<Vec3> = directions.iter().map(|d| signal_wavevector(*d, &self.wavevectors)).collect();
        let mut acc = vec![vec![CompensatedSum::default(); nt * nk]; directions.len()];
        for batch in self.positions.chunks(BATCH) {
            let results = batch
                .par_iter()
                .map(|r| self.absorber(&generator, r))
                .collect::<Result<Vec<_>>>()?;
            for (r, d) in batch.iter().zip(&results) {
                for (a, ks) in acc.iter_mut().zip(&k_s) {
                    let phase = C64::from_polar(1.0, dot(ks, r));
                    for (cell, v) in a.iter_mut().zip(d.iter()) {
                        cell.add(v * phase);
                    }
                }
            }
        }
        Ok(acc
            .into_iter()
            .map(|a| DMatrix::from_iterator(nt, nk, a.iter().map(CompensatedSum::value)))
            .collect())
    }
}

/// Phase-matched `S(tau_i, t_k)` for each choice, from shared trajectories.
pub fn hd_signal_scan(scan: &HdScan<'_>, choices: &[PhaseMatch]) -> Result<Vec<DMatrix<C64>>> {
    let dirs: Vec<[i32; 3]> = choices.iter().map(PhaseMatch::coefficients).collect();
    scan.run(&dirs)
}
