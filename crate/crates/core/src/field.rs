//! Gaussian pulses, pulse trains and the rotating-wave interaction.
//!
//! A pulse `n` contributes `A_n g_n(t) exp(i(phi_n - k_n.r))` to the complex
//! drive seen by a ket excitation; the de-excitation element carries the
//! conjugate. Envelopes are cut off beyond [`TRUNCATION`] widths, where
//! they are below 1.3e-14.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{frame_energies, FieldDrive};
use crate::system::{QuantumSystem, C64};
use crate::units::{HC, MEV};

/// Envelope cutoff in units of sigma.
pub const TRUNCATION: f64 = 8.0;

pub type Vec3 = [f64; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// One Gaussian pulse. `peak_interaction` is in meV and scales the dipole
/// matrix; `wavevector` is in 1/nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub center: f64,
    pub sigma: f64,
    pub peak_interaction: f64,
    pub carrier: f64,
    pub phase: f64,
    pub wavevector: Vec3,
}

impl Pulse {
    pub fn new(center: f64, sigma: f64, peak_interaction: f64, carrier: f64) -> Result<Self> {
        let p = Pulse { center, sigma, peak_interaction, carrier, phase: 0.0, wavevector: [0.0; 3] };
        p.validate()?;
        Ok(p)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_wavevector(mut self, k: Vec3) -> Self {
        self.wavevector = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Validation(format!("pulse width must be > 0, got {}", self.sigma)));
        }
        if !(self.peak_interaction >= 0.0 && self.peak_interaction.is_finite()) {
            return Err(Error::Validation(format!(
                "peak interaction must be >= 0, got {}",
                self.peak_interaction
            )));
        }
        if !(self.center.is_finite() && self.carrier.is_finite() && self.phase.is_finite()) {
            return Err(Error::Validation("pulse parameters must be finite".into()));
        }
        if self.wavevector.iter().any(|k| !k.is_finite()) {
            return Err(Error::Validation("wavevector must be finite".into()));
        }
        Ok(())
    }

    /// Earliest time with a nonzero (truncated) envelope.
    pub fn start(&self) -> f64 {
        self.center - TRUNCATION * self.sigma
    }

    pub fn end(&self) -> f64 {
        self.center + TRUNCATION * self.sigma
    }

    /// Complex weight `A exp(i(phi - k.r))` in eV.
    pub fn weight(&self, position: &Vec3) -> C64 {
        C64::from_polar(self.peak_interaction * MEV, self.phase - dot(&self.wavevector, position))
    }

    #[inline]
    fn truncated_envelope(&self, t: f64) -> f64 {
        let x = t - self.center;
        if x.abs() > TRUNCATION * self.sigma {
            0.0
        } else {
            envelope(self, t)
        }
    }
}

/// `exp(-(t - t_n)^2 / (2 sigma^2))`.
pub fn envelope(pulse: &Pulse, t: f64) -> f64 {
    let x = (t - pulse.center) / pulse.sigma;
    (-0.5 * x * x).exp()
}

/// Shape shared by every pulse of a train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub sigma: f64,
    pub peak_interaction: f64,
    pub carrier: f64,
}

/// Inter-pulse delays (fs): `t2 = t1 + tau`, `t3 = t2 + waiting`, `t4 = t3 + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delays {
    pub tau: f64,
    pub waiting: f64,
    pub t: f64,
}

impl Delays {
    pub fn new(tau: f64, waiting: f64, t: f64) -> Result<Self> {
        for (name, v) in [("tau", tau), ("waiting", waiting), ("t", t)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("delay {name} must be >= 0, got {v}")));
            }
        }
        Ok(Delays { tau, waiting, t })
    }

    /// Pulse centres with the first pulse at 0.
    pub fn centers(&self) -> [f64; 4] {
        let t2 = self.tau;
        let t3 = t2 + self.waiting;
        [0.0, t2, t3, t3 + self.t]
    }
}

/// Ordered pulses sharing one carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain {
    pulses: Vec<Pulse>,
}

impl PulseTrain {
    pub fn new(pulses: Vec<Pulse>) -> Result<Self> {
        if pulses.is_empty() {
            return Err(Error::Validation("a pulse train needs at least one pulse".into()));
        }
        for p in &pulses {
            p.validate()?;
        }
        let c = pulses[0].carrier;
        if pulses.iter().any(|p| p.carrier != c) {
            return Err(Error::Unsupported("pulses in one train must share a carrier".into()));
        }
        if pulses.windows(2).any(|w| w[1].center < w[0].center) {
            return Err(Error::Validation("pulse centres must be non-decreasing".into()));
        }
        Ok(PulseTrain { pulses })
    }

    /// `count` pulses (3 or 4) of identical shape at the centres implied by `delays`.
    pub fn from_delays(shape: &PulseShape, delays: &Delays, count: usize) -> Result<Self> {
        if !(1..=4).contains(&count) {
            return Err(Error::Validation(format!("train length must be 1..=4, got {count}")));
        }
        let centers = delays.centers();
        let pulses = (0..count)
            .map(|n| Pulse::new(centers[n], shape.sigma, shape.peak_interaction, shape.carrier))
            .collect::<Result<Vec<_>>>()?;
        PulseTrain::new(pulses)
    }

    pub fn with_phases(mut self, phases: &[f64]) -> Result<Self> {
        if phases.len() != self.pulses.len() {
            return Err(Error::Dimension(format!("{} phases for {} pulses", phases.len(), self.pulses.len())));
        }
        for (p, phi) in self.pulses.iter_mut().zip(phases) {
            p.phase = *phi;
        }
        Ok(self)
    }

    pub fn with_wavevectors(mut self, ks: &[Vec3]) -> Result<Self> {
        if ks.len() != self.pulses.len() {
            return Err(Error::Dimension(format!("{} wavevectors for {} pulses", ks.len(), self.pulses.len())));
        }
        for (p, k) in self.pulses.iter_mut().zip(ks) {
            p.wavevector = *k;
        }
        Ok(self)
    }

    /// Scales the amplitude of pulse `index` (used to switch pulses off).
    pub fn with_amplitude(mut self, index: usize, peak_interaction: f64) -> Result<Self> {
        let n = self.pulses.len();
        let p = self
            .pulses
            .get_mut(index)
            .ok_or_else(|| Error::Dimension(format!("pulse {index} out of range for {n} pulses")))?;
        p.peak_interaction = peak_interaction;
        p.validate()?;
        Ok(self)
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn carrier(&self) -> f64 {
        self.pulses[0].carrier
    }

    pub fn start(&self) -> f64 {
        self.pulses.iter().map(Pulse::start).fold(f64::INFINITY, f64::min)
    }

    pub fn end(&self) -> f64 {
        self.pulses.iter().map(Pulse::end).fold(f64::NEG_INFINITY, f64::max)
    }

    /// The train as seen by an absorber at `position` (nm).
    pub fn at(&self, position: &Vec3) -> PositionedTrain {
        PositionedTrain {
            carrier: self.carrier(),
            terms: self
                .pulses
                .iter()
                .map(|p| (p.center, 1.0 / p.sigma, TRUNCATION * p.sigma, p.weight(position)))
                .collect(),
        }
    }
}

/// A pulse train with position phases folded into per-pulse weights.
#[derive(Debug, Clone)]
pub struct PositionedTrain {
    carrier: f64,
    /// (centre, 1/sigma, cutoff, weight)
    terms: Vec<(f64, f64, f64, C64)>,
}

impl FieldDrive for PositionedTrain {
    fn carrier(&self) -> f64 {
        self.carrier
    }

    #[inline]
    fn drive(&self, t: f64) -> C64 {
        let mut f = C64::new(0.0, 0.0);
        for &(c, inv_s, cut, w) in &self.terms {
            let x = t - c;
            if x.abs() <= cut {
                let u = x * inv_s;
                f += w * (-0.5 * u * u).exp();
            }
        }
        f
    }
}

/// Rotating-frame Hamiltonian pieces at time `t` for an absorber at
/// `position`: the interaction matrix and the static diagonal `H0'`.
pub fn interaction_hamiltonian(
    system: &QuantumSystem,
    train: &PulseTrain,
    t: f64,
    position: &Vec3,
) -> Result<(DMatrix<C64>, Vec<f64>)> {
    let carrier = train.carrier();
    if train.pulses().iter().any(|p| p.carrier != carrier) {
        return Err(Error::Unsupported("pulses in one train must share a carrier".into()));
    }
    let f: C64 = train
        .pulses()
        .iter()
        .map(|p| p.weight(position) * p.truncated_envelope(t))
        .sum();
    let n = system.dim();
    let mut h = DMatrix::zeros(n, n);
    for c in system.couplings() {
        let v = f * (-0.5 * c.dipole);
        h[(c.upper, c.lower)] = v;
        h[(c.lower, c.upper)] = v.conj();
    }
    Ok((h, frame_energies(system, carrier)))
}

/// Carrier and axis-folding metadata for one rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePolicy {
    /// eV; 0 selects the laboratory frame.
    pub carrier: f64,
    pub folding_factor: u32,
}

impl FramePolicy {
    pub fn new(carrier: f64, folding_factor: u32) -> Result<Self> {
        if !(carrier >= 0.0 && carrier.is_finite()) {
            return Err(Error::Validation(format!("carrier must be >= 0, got {carrier}")));
        }
        Ok(FramePolicy { carrier, folding_factor })
    }

    /// Vacuum wavelength of the carrier (nm).
    pub fn wavelength(&self) -> f64 {
        HC / self.carrier
    }
}

/// `E_m - n_m * carrier` for every level.
pub fn rotating_frame_energies(system: &QuantumSystem, policy: &FramePolicy) -> Vec<f64> {
    frame_energies(system, policy.carrier)
}

/// Coordinate-axis wavevectors of magnitude `2 pi / lambda(carrier)` (1/nm).
pub fn default_wavevectors(carrier: f64) -> [Vec3; 3] {
    let k = 2.0 * std::f64::consts::PI * carrier / HC;
    [[k, 0.0, 0.0], [0.0, k, 0.0], [0.0, 0.0, k]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{ground_state, propagate, DEFAULT_DT};

    fn shape(amp: f64) -> PulseShape {
        PulseShape { sigma: 10.0, peak_interaction: amp, carrier: 1.505 }
    }

    #[test]
    fn envelope_values() {
        let p = Pulse::new(30.0, 10.0, 1.0, 1.5).unwrap();
        assert_eq!(envelope(&p, 30.0), 1.0);
        assert!((envelope(&p, 40.0) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((envelope(&p, 40.0) - 0.6065).abs() < 1e-4);
        assert!(envelope(&p, p.end()) < 1.3e-14);
    }

    #[test]
    fn envelope_squared_integrates_to_sigma_root_pi() {
        let p = Pulse::new(0.0, 7.0, 1.0, 1.5).unwrap();
        let h = 0.01;
        let n = (12.0 * p.sigma / h) as i64;
        let s: f64 = (-n..=n).map(|k| envelope(&p, k as f64 * h).powi(2)).sum::<f64>() * h;
        assert!((s - p.sigma * std::f64::consts::PI.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn pulse_invariants() {
        assert!(Pulse::new(0.0, 0.0, 1.0, 1.5).is_err());
        assert!(Pulse::new(0.0, -1.0, 1.0, 1.5).is_err());
        assert!(Pulse::new(0.0, 1.0, -1.0, 1.5).is_err());
        let a = Pulse::new(0.0, 1.0, 1.0, 1.5).unwrap();
        let b = Pulse::new(5.0, 1.0, 1.0, 1.6).unwrap();
        assert!(matches!(PulseTrain::new(vec![a, b]), Err(Error::Unsupported(_))));
        assert!(Delays::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn train_centres_follow_delays() {
        let d = Delays::new(20.0, 5.0, 30.0).unwrap();
        let tr = PulseTrain::from_delays(&shape(3.0), &d, 4).unwrap();
        let c: Vec<f64> = tr.pulses().iter().map(|p| p.center).collect();
        assert_eq!(c, vec![0.0, 20.0, 25.0, 55.0]);
        assert_eq!(tr.start(), -80.0);
        assert_eq!(tr.end(), 135.0);
    }

    #[test]
    fn two_level_peak_coupling() {
        let s = QuantumSystem::two_level(1.5);
        let tr = PulseTrain::new(vec![Pulse::new(10.0, 10.0, 8.0, 1.5).unwrap()]).unwrap();
        let (h, h0) = interaction_hamiltonian(&s, &tr, 10.0, &[0.0; 3]).unwrap();
        assert!((h[(1, 0)] - C64::new(-4e-3, 0.0)).norm() < 1e-18);
        assert!((h[(0, 1)] - C64::new(-4e-3, 0.0)).norm() < 1e-18);
        assert_eq!(h0, vec![0.0, 0.0]);
    }

    #[test]
    fn phase_is_two_pi_periodic() {
        let s = QuantumSystem::dimer_model();
        let base = PulseTrain::new(vec![Pulse::new(0.0, 10.0, 27.0, 1.505).unwrap().with_phase(0.7)]).unwrap();
        let shifted =
            PulseTrain::new(vec![Pulse::new(0.0, 10.0, 27.0, 1.505).unwrap().with_phase(0.7 + 2.0 * std::f64::consts::PI)])
                .unwrap();
        let (a, _) = interaction_hamiltonian(&s, &base, 3.0, &[0.0; 3]).unwrap();
        let (b, _) = interaction_hamiltonian(&s, &shifted, 3.0, &[0.0; 3]).unwrap();
        // 2 pi is not exactly representable; equality holds to rounding of the phase
        assert!((&a - &b).iter().all(|d| d.norm() < 1e-17));
    }

    #[test]
    fn translation_multiplies_each_pulse_by_its_phase() {
        let s = QuantumSystem::dimer_model();
        let ks = default_wavevectors(1.505);
        let d = Delays::new(10.0, 0.0, 0.0).unwrap();
        let tr = PulseTrain::from_delays(&shape(9.0), &d, 3).unwrap().with_wavevectors(&ks).unwrap();
        let r = [12.0, -40.0, 300.0];
        let dr = [5.0, 77.0, -13.0];
        let r2 = [r[0] + dr[0], r[1] + dr[1], r[2] + dr[2]];
        let t = 4.0;
        let (h2, _) = interaction_hamiltonian(&s, &tr, t, &r2).unwrap();
        // rebuild from single-pulse trains at the original position
        let mut expect = DMatrix::<C64>::zeros(4, 4);
        for p in tr.pulses() {
            let single = PulseTrain::new(vec![*p]).unwrap();
            let (h, _) = interaction_hamiltonian(&s, &single, t, &r).unwrap();
            let ph = C64::from_polar(1.0, -dot(&p.wavevector, &dr));
            for c in s.couplings() {
                expect[(c.upper, c.lower)] += h[(c.upper, c.lower)] * ph;
                expect[(c.lower, c.upper)] += h[(c.lower, c.upper)] * ph.conj();
            }
        }
        assert!((&h2 - &expect).iter().all(|d| d.norm() < 1e-15));
    }

    #[test]
    fn hamiltonian_is_hermitian_and_rwa() {
        let s = QuantumSystem::dimer_model();
        let ks = default_wavevectors(1.505);
        let tr = PulseTrain::from_delays(&shape(56.0), &Delays::new(3.0, 2.0, 0.0).unwrap(), 3)
            .unwrap()
            .with_wavevectors(&ks)
            .unwrap()
            .with_phases(&[0.3, -1.2, 2.9])
            .unwrap();
        for k in 0..40 {
            let t = -20.0 + k as f64;
            let (h, _) = interaction_hamiltonian(&s, &tr, t, &[100.0, 3.0, -50.0]).unwrap();
            assert!((&h - h.adjoint()).iter().all(|d| d.norm() <= 1e-15));
            assert_eq!(h[(0, 3)], C64::new(0.0, 0.0));
            assert_eq!(h[(1, 2)], C64::new(0.0, 0.0));
            assert_eq!(h[(0, 0)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn positioned_drive_matches_hamiltonian() {
        let s = QuantumSystem::dimer_model();
        let ks = default_wavevectors(1.505);
        let tr = PulseTrain::from_delays(&shape(9.0), &Delays::new(10.0, 0.0, 0.0).unwrap(), 3)
            .unwrap()
            .with_wavevectors(&ks)
            .unwrap();
        let r = [1.0, 2.0, 3.0];
        let drive = tr.at(&r);
        let (h, _) = interaction_hamiltonian(&s, &tr, 5.0, &r).unwrap();
        assert!((h[(1, 0)] - drive.drive(5.0) * -0.5).norm() < 1e-18);
        assert_eq!(drive.drive(200.0), C64::new(0.0, 0.0));
    }

    #[test]
    fn frame_energies_of_model() {
        let s = QuantumSystem::dimer_model();
        let e = rotating_frame_energies(&s, &FramePolicy::new(1.505, 0).unwrap());
        let expect = [0.0, -0.045, 0.045, 0.0];
        for (a, b) in e.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let lab = rotating_frame_energies(&s, &FramePolicy::new(0.0, 0).unwrap());
        assert_eq!(lab, s.energies().to_vec());
        // doubly excited level shifts twice
        let e2 = rotating_frame_energies(&s, &FramePolicy::new(1.0, 0).unwrap());
        assert!((e2[3] - (3.01 - 2.0)).abs() < 1e-12);
        assert!(FramePolicy::new(-1.0, 0).is_err());
    }

    #[test]
    fn global_phase_leaves_populations_invariant() {
        let s = QuantumSystem::dimer_model();
        let d = Delays::new(20.0, 0.0, 20.0).unwrap();
        let phases = [0.0, 2.0944, 4.1888, 1.0];
        let shifted: Vec<f64> = phases.iter().map(|p| p + 1.3).collect();
        let run = |ph: &[f64]| {
            let tr = PulseTrain::from_delays(&shape(56.0), &d, 4).unwrap().with_phases(ph).unwrap();
            propagate(&s, &ground_state(&s), &tr.at(&[0.0; 3]), tr.start(), tr.end(), DEFAULT_DT).unwrap()
        };
        let a = run(&phases);
        let b = run(&shifted);
        for i in 0..4 {
            assert!((a.population(i) - b.population(i)).abs() < 1e-10);
        }
    }

    #[test]
    fn positions_are_irrelevant_without_wavevectors() {
        let s = QuantumSystem::dimer_model();
        let tr = PulseTrain::from_delays(&shape(27.0), &Delays::new(10.0, 0.0, 0.0).unwrap(), 3).unwrap();
        let a = propagate(&s, &ground_state(&s), &tr.at(&[0.0; 3]), tr.start(), 100.0, DEFAULT_DT).unwrap();
        let b = propagate(&s, &ground_state(&s), &tr.at(&[300.0, -7.0, 1e3]), tr.start(), 100.0, DEFAULT_DT).unwrap();
        assert_eq!(a, b);
    }
}
