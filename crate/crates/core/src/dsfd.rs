//! Perturbative reference: double-sided Feynman pathways in the impulsive
//! limit, evaluated with finite-window Liouville-space Fourier transforms.
//!
//! Each ket interaction contributes `+i mu`, each bra interaction `-i mu`
//! (pulse-area factors are dropped). Coherence intervals are transformed with
//! the laboratory-frame generator at absolute frequencies; the waiting time
//! uses the rotating-frame generator, as the time-domain simulation does.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fd::{DetectionMode, Detector, Signature};
use crate::hd::PhaseMatch;
use crate::liouville::{left, liouville_ft, liouvillian, propagator, right, vec_index, SuperOperator};
use crate::spectrum::{Component, Scheme, Spectrum2D, SpectrumMeta};
use crate::system::{QuantumSystem, C64};

/// Default transform window (fs).
pub const DEFAULT_TAU_F: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Ket,
    Bra,
}

/// One dipole interaction moving the `side` index from level `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interaction {
    pub side: Side,
    pub from: usize,
    pub to: usize,
}

impl Interaction {
    pub fn ket(from: usize, to: usize) -> Self {
        Interaction { side: Side::Ket, from, to }
    }

    pub fn bra(from: usize, to: usize) -> Self {
        Interaction { side: Side::Bra, from, to }
    }

    fn dipole(&self, system: &QuantumSystem) -> Result<f64> {
        let n = system.dim();
        if self.from >= n || self.to >= n {
            return Err(Error::Validation(format!("transition {}->{} outside a {n}-level system", self.from, self.to)));
        }
        let exc = system.excitation();
        let (a, b) = (exc[self.from] as i64, exc[self.to] as i64);
        let mu = system.dipoles()[(self.from, self.to)];
        if (a - b).abs() != 1 || mu == 0.0 {
            return Err(Error::Validation(format!("transition {}->{} is not dipole-allowed", self.from, self.to)));
        }
        Ok(mu)
    }

    fn raises(&self, system: &QuantumSystem) -> bool {
        system.excitation()[self.to] > system.excitation()[self.from]
    }

    /// Phase coefficient of the driving pulse.
    pub fn phase(&self, system: &QuantumSystem) -> i32 {
        match (self.side, self.raises(system)) {
            (Side::Ket, true) | (Side::Bra, false) => 1,
            (Side::Ket, false) | (Side::Bra, true) => -1,
        }
    }

    /// Superoperator `+i mu |to><from| X` (ket) or `-i mu X |from><to|` (bra).
    pub fn superoperator(&self, system: &QuantumSystem) -> Result<SuperOperator> {
        let mu = self.dipole(system)?;
        let n = system.dim();
        let mut op = DMatrix::<C64>::zeros(n, n);
        match self.side {
            Side::Ket => {
                op[(self.to, self.from)] = C64::new(1.0, 0.0);
                Ok(left(&op) * C64::new(0.0, mu))
            }
            Side::Bra => {
                op[(self.from, self.to)] = C64::new(1.0, 0.0);
                Ok(right(&op) * C64::new(0.0, -mu))
            }
        }
    }

    /// Element reached from `|a><b|`, if this interaction acts on it.
    fn step(&self, (a, b): (usize, usize)) -> Option<(usize, usize)> {
        match self.side {
            Side::Ket if a == self.from => Some((self.to, b)),
            Side::Bra if b == self.from => Some((a, self.to)),
            _ => None,
        }
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.side {
            Side::Ket => "K",
            Side::Bra => "B",
        };
        write!(f, "{s}{}{}", self.from, self.to)
    }
}

/// How a pathway is read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detection {
    /// Three interactions, then the positive-frequency dipole.
    Heterodyne,
    /// Four interactions ending in an excited population.
    Fluorescence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathwayLabel {
    Gsb,
    Se,
    Esa,
    Esa1,
    Esa2,
    Dqc,
}

impl PathwayLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PathwayLabel::Gsb => "GSB",
            PathwayLabel::Se => "SE",
            PathwayLabel::Esa => "ESA",
            PathwayLabel::Esa1 => "ESA1",
            PathwayLabel::Esa2 => "ESA2",
            PathwayLabel::Dqc => "DQC",
        }
    }
}

impl fmt::Display for PathwayLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Time-ordered interaction string; interaction `n` belongs to pulse `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pathway {
    pub interactions: Vec<Interaction>,
    pub detection: Detection,
    pub label: PathwayLabel,
}

impl Pathway {
    /// Phase coefficient of every pulse.
    pub fn phases(&self, system: &QuantumSystem) -> Vec<i32> {
        self.interactions.iter().map(|i| i.phase(system)).collect()
    }

    /// FD signature `(beta, gamma, delta)`; for heterodyne pathways the
    /// missing fourth coefficient closes the sum to zero.
    pub fn signature(&self, system: &QuantumSystem) -> Signature {
        let p = self.phases(system);
        let delta = if p.len() == 4 { p[3] } else { -(p[0] + p[1] + p[2]) };
        Signature::new(p[1], p[2], delta)
    }

    /// Drops the fourth interaction.
    pub fn truncated(&self) -> Vec<Interaction> {
        self.interactions[..3.min(self.interactions.len())].to_vec()
    }
}

impl fmt::Display for Pathway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.label)?;
        for i in &self.interactions {
            write!(f, " {i}")?;
        }
        Ok(())
    }
}

/// Elements reachable from `|a><b|` under the field-free generator.
fn reachable(l: &SuperOperator, dim: usize, start: (usize, usize)) -> Vec<(usize, usize)> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some((a, b)) = stack.pop() {
        let col = vec_index(a, b, dim);
        for x in 0..dim {
            for y in 0..dim {
                if l[(vec_index(x, y, dim), col)].norm() > 0.0 && seen.insert((x, y)) {
                    stack.push((x, y));
                }
            }
        }
    }
    seen.into_iter().collect()
}

fn allowed_interactions(system: &QuantumSystem) -> Vec<Interaction> {
    let mut out = vec![];
    for c in system.couplings() {
        for side in [Side::Ket, Side::Bra] {
            out.push(Interaction { side, from: c.lower, to: c.upper });
            out.push(Interaction { side, from: c.upper, to: c.lower });
        }
    }
    out.sort();
    out
}

fn label(system: &QuantumSystem, detection: Detection, elements: &[(usize, usize)]) -> PathwayLabel {
    let exc = system.excitation();
    let after2 = elements[2];
    if exc[after2.0].abs_diff(exc[after2.1]) == 2 {
        return PathwayLabel::Dqc;
    }
    if after2 == (0, 0) {
        return PathwayLabel::Gsb;
    }
    let doubly = |(a, b): (usize, usize)| exc[a] >= 2 || exc[b] >= 2;
    let early = elements[..elements.len().min(5)].iter().any(|e| doubly(*e));
    if !early {
        return PathwayLabel::Se;
    }
    match detection {
        Detection::Heterodyne => PathwayLabel::Esa,
        Detection::Fluorescence => {
            let last = elements[elements.len() - 1];
            if exc[last.0] >= 2 {
                PathwayLabel::Esa2
            } else {
                PathwayLabel::Esa1
            }
        }
    }
}

/// Every interaction string with the requested pulse-phase signature that
/// carries `|0><0|` to a readable element, by exhaustive generate-and-filter.
/// Populations may relax during the waiting time.
pub fn enumerate_pathways(system: &QuantumSystem, detection: Detection, signature: Signature) -> Vec<Pathway> {
    let dim = system.dim();
    let l = liouvillian(system, 0.0);
    let moves = allowed_interactions(system);
    let count = match detection {
        Detection::Heterodyne => 3,
        Detection::Fluorescence => 4,
    };
    let target: Vec<i32> = match detection {
        Detection::Heterodyne => vec![signature.alpha(), signature.beta, signature.gamma],
        Detection::Fluorescence => vec![signature.alpha(), signature.beta, signature.gamma, signature.delta],
    };
    let readable = |(a, b): (usize, usize)| match detection {
        Detection::Heterodyne => system.couplings().iter().any(|c| c.upper == a && c.lower == b),
        Detection::Fluorescence => a == b && a != 0,
    };
    // elements: [rho0, after V1, after V2, after G(T), after V3, (after V4)]
    let mut out: Vec<Pathway> = vec![];
    let mut seen = BTreeSet::new();
    let mut stack: Vec<(Vec<Interaction>, Vec<(usize, usize)>)> = vec![(vec![], vec![(0, 0)])];
    while let Some((seq, elems)) = stack.pop() {
        if seq.len() == count {
            if readable(*elems.last().expect("non-empty")) && seen.insert(seq.clone()) {
                out.push(Pathway { interactions: seq, detection, label: label(system, detection, &elems) });
            }
            continue;
        }
        let current = *elems.last().expect("non-empty");
        for mv in &moves {
            if mv.phase(system) != target[seq.len()] {
                continue;
            }
            let Some(next) = mv.step(current) else { continue };
            let mut s2 = seq.clone();
            s2.push(*mv);
            if s2.len() == 2 {
                for after_t in reachable(&l, dim, next) {
                    let mut e2 = elems.clone();
                    e2.push(next);
                    e2.push(after_t);
                    stack.push((s2.clone(), e2));
                }
            } else {
                let mut e2 = elems.clone();
                e2.push(next);
                stack.push((s2, e2));
            }
        }
    }
    out.sort_by(|a, b| a.label.cmp(&b.label).then(a.interactions.cmp(&b.interactions)));
    out
}

/// Evaluation settings shared by every pathway of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsfdSettings {
    pub waiting: f64,
    pub tau_f: f64,
    /// Frame of the waiting-time propagation (eV).
    pub carrier: f64,
    /// Fluorescence readout; ignored for heterodyne pathways.
    pub mode: DetectionMode,
}

impl Default for DsfdSettings {
    fn default() -> Self {
        DsfdSettings { waiting: 0.0, tau_f: DEFAULT_TAU_F, carrier: 1.505, mode: DetectionMode::PopulationProxy }
    }
}

/// Row vector of the positive-frequency dipole readout.
fn dipole_readout(system: &QuantumSystem) -> DMatrix<C64> {
    let n = system.dim();
    let mut r = DMatrix::zeros(1, n * n);
    for c in system.couplings() {
        r[(0, vec_index(c.upper, c.lower, n))] = C64::new(c.dipole, 0.0);
    }
    r
}

fn population_readout(system: &QuantumSystem, mode: DetectionMode) -> Result<DMatrix<C64>> {
    let n = system.dim();
    let d = Detector::new(system, mode)?;
    let mut r = DMatrix::zeros(1, n * n);
    for (i, w) in d.weights().iter().enumerate() {
        r[(0, vec_index(i, i, n))] = C64::new(*w, 0.0);
    }
    Ok(r)
}

/// Precomputed pieces of one pathway evaluated on many frequencies.
struct Prepared {
    v: Vec<SuperOperator>,
    rho0: DMatrix<C64>,
    g_wait: SuperOperator,
    lab: SuperOperator,
    final_readout: DMatrix<C64>,
    tau_sign: f64,
}

fn prepare(system: &QuantumSystem, p: &Pathway, s: &DsfdSettings) -> Result<Prepared> {
    let v = p.interactions.iter().map(|i| i.superoperator(system)).collect::<Result<Vec<_>>>()?;
    let expected = match p.detection {
        Detection::Heterodyne => 3,
        Detection::Fluorescence => 4,
    };
    if v.len() != expected {
        return Err(Error::Validation(format!("pathway has {} interactions, expected {expected}", v.len())));
    }
    if !(s.waiting >= 0.0) {
        return Err(Error::Validation(format!("waiting time must be >= 0, got {}", s.waiting)));
    }
    let n = system.dim();
    let mut rho0 = DMatrix::zeros(n * n, 1);
    rho0[(0, 0)] = C64::new(1.0, 0.0);
    let final_readout = match p.detection {
        Detection::Heterodyne => dipole_readout(system),
        Detection::Fluorescence => population_readout(system, s.mode)? * &v[3],
    };
    let alpha = p.interactions[0].phase(system);
    Ok(Prepared {
        g_wait: propagator(&liouvillian(system, s.carrier), s.waiting),
        lab: liouvillian(system, 0.0),
        rho0,
        v,
        final_readout,
        tau_sign: if alpha < 0 { -1.0 } else { 1.0 },
    })
}

impl Prepared {
    /// `G(T) V2 G_tau(w1) V1 rho0` for one excitation frequency.
    fn after_waiting(&self, g_tau: &SuperOperator) -> DMatrix<C64> {
        &self.v[2] * (&self.g_wait * (&self.v[1] * (g_tau * (&self.v[0] * &self.rho0))))
    }
}

/// Value of one pathway at `(omega1, omega3)` (absolute eV).
pub fn evaluate_pathway(
    system: &QuantumSystem,
    pathway: &Pathway,
    omega1: f64,
    omega3: f64,
    settings: &DsfdSettings,
) -> Result<C64> {
    let p = prepare(system, pathway, settings)?;
    let g1 = liouville_ft(&p.lab, omega1, settings.tau_f, p.tau_sign)?;
    let g3 = liouville_ft(&p.lab, omega3, settings.tau_f, 1.0)?;
    Ok((&p.final_readout * g3 * p.after_waiting(&g1))[(0, 0)])
}

/// Readout phase applied to a detected signal before the `-i` transform
/// prefactor, so that ground-state bleaching is positive in both schemes.
pub fn readout_phase(scheme: Scheme) -> C64 {
    match scheme {
        Scheme::Hd => C64::new(-1.0, 0.0),
        Scheme::Fd | Scheme::Dsfd => C64::new(0.0, -1.0),
    }
}

/// Sum over pathways on the grid `omega_tau x omega_t`, scaled by the
/// scheme's readout phase and `-i`.
pub fn pathway_sum_spectrum(
    system: &QuantumSystem,
    pathways: &[Pathway],
    settings: &DsfdSettings,
    omega_tau: &[f64],
    omega_t: &[f64],
) -> Result<DMatrix<C64>> {
    let mut total = DMatrix::<C64>::zeros(omega_tau.len(), omega_t.len());
    if pathways.is_empty() {
        return Ok(total);
    }
    let detection = pathways[0].detection;
    if pathways.iter().any(|p| p.detection != detection) {
        return Err(Error::Validation("pathways mix detection schemes".into()));
    }
    let lab = liouvillian(system, 0.0);
    let g3: Vec<SuperOperator> = omega_t
        .par_iter()
        .map(|w| liouville_ft(&lab, *w, settings.tau_f, 1.0))
        .collect::<Result<_>>()?;
    let prepared = pathways.iter().map(|p| prepare(system, p, settings)).collect::<Result<Vec<_>>>()?;
    let mut signs: Vec<f64> = prepared.iter().map(|p| p.tau_sign).collect();
    signs.dedup();
    for sign in signs {
        let g1: Vec<SuperOperator> = omega_tau
            .par_iter()
            .map(|w| liouville_ft(&lab, *w, settings.tau_f, sign))
            .collect::<Result<_>>()?;
        let group: Vec<&Prepared> = prepared.iter().filter(|p| p.tau_sign == sign).collect();
        // readout rows per pathway and detection frequency
        let rows: Vec<Vec<DMatrix<C64>>> =
            group.iter().map(|p| g3.iter().map(|g| &p.final_readout * g).collect()).collect();
        let block: Vec<Vec<C64>> = g1
            .par_iter()
            .map(|g| {
                let ys: Vec<DMatrix<C64>> = group.iter().map(|p| p.after_waiting(g)).collect();
                (0..omega_t.len())
                    .map(|k| rows.iter().zip(&ys).map(|(r, y)| (r[k].clone() * y)[(0, 0)]).sum())
                    .collect()
            })
            .collect();
        for (i, row) in block.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                total[(i, k)] += v;
            }
        }
    }
    let scheme = match detection {
        Detection::Heterodyne => Scheme::Hd,
        Detection::Fluorescence => Scheme::Fd,
    };
    Ok(total * (readout_phase(scheme) * C64::new(0.0, -1.0)))
}

/// Reference spectrum for rephasing, nonrephasing or their sum.
pub fn dsfd_spectrum(
    system: &QuantumSystem,
    detection: Detection,
    component: Component,
    settings: &DsfdSettings,
    omega_tau: &[f64],
    omega_t: &[f64],
) -> Result<Spectrum2D> {
    let signatures = match component {
        Component::Rephasing => vec![Signature::REPHASING],
        Component::Nonrephasing => vec![Signature::NONREPHASING],
        Component::Total => vec![Signature::REPHASING, Signature::NONREPHASING],
        Component::Dqc => return Err(Error::Unsupported("double-quantum reference spectra are not provided".into())),
    };
    let mut pathways = vec![];
    for s in signatures {
        pathways.extend(enumerate_pathways(system, detection, s));
    }
    let data = pathway_sum_spectrum(system, &pathways, settings, omega_tau, omega_t)?;
    let mut meta = SpectrumMeta::new(Scheme::Dsfd, component);
    meta.waiting_time = settings.waiting;
    meta.carrier = settings.carrier;
    Spectrum2D::new(data, omega_tau.to_vec(), omega_t.to_vec(), meta)
}

/// Impulsive time-domain signal `sum_p readout G(t) V3 G(T) V2 G(tau) V1 rho0`
/// on a delay grid, all propagation in the rotating frame at
/// `settings.carrier`. It carries no readout phase, matching the detected
/// signals of the time-domain schemes.
pub fn pathway_time_signal(
    system: &QuantumSystem,
    pathways: &[Pathway],
    settings: &DsfdSettings,
    tau: &[f64],
    t: &[f64],
) -> Result<DMatrix<C64>> {
    let rot = liouvillian(system, settings.carrier);
    let g_tau: Vec<SuperOperator> = tau.iter().map(|x| propagator(&rot, *x)).collect();
    let g_t: Vec<SuperOperator> = t.iter().map(|x| propagator(&rot, *x)).collect();
    let mut out = DMatrix::<C64>::zeros(tau.len(), t.len());
    for p in pathways {
        let prep = prepare(system, p, settings)?;
        let rows: Vec<DMatrix<C64>> = g_t.iter().map(|g| &prep.final_readout * g).collect();
        for (i, g) in g_tau.iter().enumerate() {
            let y = prep.after_waiting(g);
            for (k, r) in rows.iter().enumerate() {
                out[(i, k)] += (r * &y)[(0, 0)];
            }
        }
    }
    Ok(out)
}

/// Heterodyne direction of an FD signature (first three coefficients).
pub fn phase_match_of(signature: Signature) -> Option<PhaseMatch> {
    PhaseMatch::ALL.into_iter().find(|p| {
        let c = p.coefficients();
        c == [signature.alpha(), signature.beta, signature.gamma]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(p: &[Pathway]) -> Vec<(PathwayLabel, usize)> {
        let mut m = std::collections::BTreeMap::new();
        for x in p {
            *m.entry(x.label).or_insert(0) += 1;
        }
        m.into_iter().collect()
    }

    #[test]
    fn hd_rephasing_fixture_full_model() {
        let s = QuantumSystem::dimer_model();
        let p = enumerate_pathways(&s, Detection::Heterodyne, Signature::REPHASING);
        assert_eq!(p.len(), 18);
        assert_eq!(counts(&p), vec![(PathwayLabel::Gsb, 4), (PathwayLabel::Se, 9), (PathwayLabel::Esa, 5)]);
        let strings: BTreeSet<String> = p.iter().map(|x| x.to_string()).collect();
        for expected in ["GSB: B01 B10 K01", "SE: B02 K01 B20", "ESA: B01 K02 K23", "SE: B02 K02 K01", "ESA: B02 K02 K13"] {
            assert!(strings.contains(expected), "{expected} missing from {strings:?}");
        }
    }

    #[test]
    fn hd_rephasing_fixture_without_relaxation() {
        let s = QuantumSystem::dimer_model().with_jumps(vec![]).unwrap();
        let p = enumerate_pathways(&s, Detection::Heterodyne, Signature::REPHASING);
        assert_eq!(p.len(), 12);
        assert_eq!(counts(&p), vec![(PathwayLabel::Gsb, 4), (PathwayLabel::Se, 4), (PathwayLabel::Esa, 4)]);
    }

    #[test]
    fn signatures_are_respected_and_fd_is_a_superset() {
        let s = QuantumSystem::dimer_model();
        for sig in [Signature::REPHASING, Signature::NONREPHASING, Signature::DQC] {
            let hd = enumerate_pathways(&s, Detection::Heterodyne, sig);
            let fd = enumerate_pathways(&s, Detection::Fluorescence, sig);
            assert!(fd.len() >= hd.len(), "{sig:?}");
            for p in hd.iter().chain(&fd) {
                assert_eq!(p.signature(&s), sig);
            }
            let hd_strings: BTreeSet<Vec<Interaction>> = hd.iter().map(|p| p.interactions.clone()).collect();
            for p in &fd {
                assert!(hd_strings.contains(&p.truncated()), "{p}");
            }
            // the map drops the fourth interaction; only ESA2 shares an image with ESA1
            let mut images = std::collections::BTreeMap::<Vec<Interaction>, Vec<PathwayLabel>>::new();
            for p in &fd {
                images.entry(p.truncated()).or_default().push(p.label);
            }
            for labels in images.values().filter(|l| l.len() > 1) {
                assert!(labels.contains(&PathwayLabel::Esa2) || labels.iter().all(|l| *l != PathwayLabel::Esa1));
            }
            if sig != Signature::DQC {
                assert!(fd.iter().any(|p| p.label == PathwayLabel::Esa2));
            }
        }
    }

    #[test]
    fn forbidden_transition_is_rejected() {
        let s = QuantumSystem::dimer_model();
        let p = Pathway {
            interactions: vec![Interaction::ket(0, 3), Interaction::bra(0, 1), Interaction::bra(1, 0)],
            detection: Detection::Heterodyne,
            label: PathwayLabel::Esa,
        };
        assert!(matches!(evaluate_pathway(&s, &p, 1.46, 1.46, &DsfdSettings::default()), Err(Error::Validation(_))));
    }

    #[test]
    fn esa1_and_esa2_cancel_for_equal_yields() {
        let s = QuantumSystem::dimer_model().with_yields(vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let fd = enumerate_pathways(&s, Detection::Fluorescence, Signature::REPHASING);
        let settings = DsfdSettings { waiting: 100.0, mode: DetectionMode::PopulationProxy, ..Default::default() };
        let mut checked = 0;
        for esa2 in fd.iter().filter(|p| p.label == PathwayLabel::Esa2) {
            let head = esa2.truncated();
            let last = head[2];
            // partner: de-excite the ket to the level the bra sits on
            let bra_level = esa2.interactions[3].from;
            let partner = fd.iter().find(|p| {
                p.label == PathwayLabel::Esa1
                    && p.truncated() == head
                    && p.interactions[3] == Interaction::ket(last.to, bra_level)
            });
            let Some(esa1) = partner else { continue };
            if bra_level != 1 {
                continue;
            }
            for (w1, w3) in [(1.46, 1.55), (1.55, 1.46), (1.5, 1.5)] {
                let a = evaluate_pathway(&s, esa1, w1, w3, &settings).unwrap();
                let b = evaluate_pathway(&s, esa2, w1, w3, &settings).unwrap();
                assert!(a.norm() > 1e-6, "{esa1}: {a}");
                assert!((a + b).norm() <= 1e-9, "{esa1} {esa2}: {a} {b}");
            }
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn zero_dipoles_give_zero_spectrum() {
        let s = QuantumSystem::dimer_model();
        let dark = s.with_dipoles(DMatrix::zeros(4, 4)).unwrap();
        let axis = [1.44, 1.5, 1.56];
        let spec =
            dsfd_spectrum(&dark, Detection::Heterodyne, Component::Total, &DsfdSettings::default(), &axis, &axis).unwrap();
        assert!(spec.data().iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn summed_spectrum_matches_pathwise_evaluation() {
        let s = QuantumSystem::dimer_model();
        let settings = DsfdSettings { waiting: 20.0, ..Default::default() };
        let axis = [1.46, 1.51, 1.55];
        for detection in [Detection::Heterodyne, Detection::Fluorescence] {
            let spec = dsfd_spectrum(&s, detection, Component::Rephasing, &settings, &axis, &axis).unwrap();
            let paths = enumerate_pathways(&s, detection, Signature::REPHASING);
            let scheme = if detection == Detection::Heterodyne { Scheme::Hd } else { Scheme::Fd };
            for (i, w1) in axis.iter().enumerate() {
                for (k, w3) in axis.iter().enumerate() {
                    let direct: C64 = paths.iter().map(|p| evaluate_pathway(&s, p, *w1, *w3, &settings).unwrap()).sum();
                    let direct = direct * readout_phase(scheme) * C64::new(0.0, -1.0);
                    assert!((direct - spec.data()[(i, k)]).norm() < 1e-10 * direct.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn bleach_is_positive() {
        let s = QuantumSystem::dimer_model();
        let axis = [1.46, 1.55];
        for detection in [Detection::Heterodyne, Detection::Fluorescence] {
            let paths: Vec<Pathway> = enumerate_pathways(&s, detection, Signature::REPHASING)
                .into_iter()
                .filter(|p| p.label == PathwayLabel::Gsb)
                .collect();
            let spec = pathway_sum_spectrum(&s, &paths, &DsfdSettings::default(), &axis, &axis).unwrap();
            assert!(spec[(0, 0)].re > 0.0 && spec[(1, 1)].re > 0.0, "{detection:?} {spec}");
        }
    }

    #[test]
    fn esa1_resonance_sits_at_the_doubly_excited_transition() {
        // ESA from level 1 reads out the 1 -> 3 coherence at E3 - E1
        let s = QuantumSystem::dimer_model();
        let p = Pathway {
            interactions: vec![Interaction::bra(0, 1), Interaction::ket(0, 1), Interaction::ket(1, 3)],
            detection: Detection::Heterodyne,
            label: PathwayLabel::Esa,
        };
        let settings = DsfdSettings { tau_f: 300.0, ..Default::default() };
        let grid: Vec<f64> = (0..61).map(|k| 1.35 + 0.005 * k as f64).collect();
        let mut best = (0.0, 0.0, 0.0);
        for w1 in &grid {
            for w3 in &grid {
                let v = evaluate_pathway(&s, &p, *w1, *w3, &settings).unwrap().norm();
                if v > best.2 {
                    best = (*w1, *w3, v);
                }
            }
        }
        assert!((best.0 - 1.46).abs() <= 0.005, "{best:?}");
        assert!((best.1 - (3.01 - 1.46)).abs() <= 0.005, "{best:?}");
    }

    #[test]
    fn phase_match_lookup() {
        assert_eq!(phase_match_of(Signature::REPHASING), Some(PhaseMatch::Rephasing));
        assert_eq!(phase_match_of(Signature::NONREPHASING), Some(PhaseMatch::Nonrephasing));
        assert_eq!(phase_match_of(Signature::DQC), Some(PhaseMatch::Dqc));
    }
}
