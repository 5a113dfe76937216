//! Scan-to-spectrum assembly for both detection schemes.

use nalgebra::DMatrix;

use crate::dsfd::readout_phase;
use crate::error::{Error, Result};
use crate::fd::{DetectionMode, Detector, FdScan, PhaseCycle, Signature};
use crate::field::{PulseShape, Vec3};
use crate::hd::{HdScan, PhaseMatch};
use crate::lindblad::Integration;
use crate::spectrum::{fourier_2d, total_correlation, Component, DelayGrid, Scheme, Spectrum2D, SpectrumMeta, TransformOptions};
use crate::system::{QuantumSystem, C64};

/// Elementary components needed to assemble `requested`, deduplicated.
fn elementary(requested: &[Component]) -> Vec<Component> {
    let mut out = vec![];
    for c in requested {
        let parts: &[Component] = match c {
            Component::Total => &[Component::Rephasing, Component::Nonrephasing],
            other => std::slice::from_ref(other),
        };
        for p in parts {
            if !out.contains(p) {
                out.push(*p);
            }
        }
    }
    out
}

/// Transforms detected signals (keyed by elementary component) and
/// assembles the requested components in order.
pub fn assemble(
    scheme: Scheme,
    signals: &[(Component, DMatrix<C64>)],
    requested: &[Component],
    grid: &DelayGrid,
    options: &TransformOptions,
    meta: &SpectrumMeta,
) -> Result<Vec<Spectrum2D>> {
    let phase = readout_phase(scheme);
    let transformed = signals
        .iter()
        .map(|(c, s)| Ok((*c, fourier_2d(&(s * phase), grid, *c, options, meta.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    let find = |c: Component| -> Result<&Spectrum2D> {
        transformed
            .iter()
            .find(|(k, _)| *k == c)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Validation(format!("no {c} signal available")))
    };
    requested
        .iter()
        .map(|c| match c {
            Component::Total => total_correlation(find(Component::Rephasing)?, find(Component::Nonrephasing)?),
            other => Ok(find(*other)?.clone()),
        })
        .collect()
}

/// Heterodyne spectra for one waiting time.
#[derive(Debug, Clone)]
pub struct HdRequest<'a> {
    pub system: &'a QuantumSystem,
    pub shape: PulseShape,
    pub wavevectors: [Vec3; 3],
    pub positions: &'a [Vec3],
    pub grid: &'a DelayGrid,
    pub waiting: f64,
    pub integration: Integration,
    pub options: TransformOptions,
}

pub fn hd_spectra(req: &HdRequest<'_>, requested: &[Component], meta: &SpectrumMeta) -> Result<Vec<Spectrum2D>> {
    let parts = elementary(requested);
    let choices = parts.iter().map(|c| PhaseMatch::from_component(*c)).collect::<Result<Vec<_>>>()?;
    let (tau, t) = (req.grid.tau_values(), req.grid.t_values());
    let scan = HdScan {
        system: req.system,
        shape: req.shape,
        wavevectors: req.wavevectors,
        positions: req.positions,
        tau: &tau,
        waiting: req.waiting,
        t: &t,
        integration: req.integration,
    };
    let dirs: Vec<[i32; 3]> = choices.iter().map(PhaseMatch::coefficients).collect();
    let signals: Vec<(Component, DMatrix<C64>)> = parts.into_iter().zip(scan.run(&dirs)?).collect();
    assemble(Scheme::Hd, &signals, requested, req.grid, &req.options, meta)
}

/// Fluorescence spectra for one waiting time; each detection mode reuses
/// the same propagated states.
#[derive(Debug, Clone)]
pub struct FdRequest<'a> {
    pub system: &'a QuantumSystem,
    pub shape: PulseShape,
    pub cycle: PhaseCycle,
    pub grid: &'a DelayGrid,
    pub waiting: f64,
    pub integration: Integration,
    pub options: TransformOptions,
}

pub fn fd_spectra(
    req: &FdRequest<'_>,
    modes: &[DetectionMode],
    requested: &[Component],
    meta: &SpectrumMeta,
) -> Result<Vec<Vec<Spectrum2D>>> {
    let parts = elementary(requested);
    let signatures = parts.iter().map(|c| Signature::from_component(*c)).collect::<Result<Vec<_>>>()?;
    let (tau, t) = (req.grid.tau_values(), req.grid.t_values());
    let scan = FdScan {
        system: req.system,
        shape: req.shape,
        cycle: req.cycle,
        tau: &tau,
        waiting: req.waiting,
        t: &t,
        integration: req.integration,
    };
    let states = scan.final_states()?;
    modes
        .iter()
        .map(|mode| {
            let detector = Detector::new(req.system, *mode)?;
            let signals = parts
                .iter()
                .zip(&signatures)
                .map(|(c, s)| Ok((*c, states.signal(&detector, *s)?)))
                .collect::<Result<Vec<_>>>()?;
            assemble(Scheme::Fd, &signals, requested, req.grid, &req.options, meta)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FramePolicy;

    #[test]
    fn elementary_components_are_deduplicated() {
        let e = elementary(&[Component::Total, Component::Rephasing, Component::Dqc]);
        assert_eq!(e, vec![Component::Rephasing, Component::Nonrephasing, Component::Dqc]);
    }

    #[test]
    fn assemble_applies_readout_phase_and_sums_totals() {
        let grid = DelayGrid::square(10.0, 8, 0.0).unwrap();
        let options = TransformOptions { padding: 2, frame: FramePolicy::new(1.505, 0).unwrap() };
        let w = -0.045 / crate::units::HBAR;
        let r = DMatrix::from_fn(8, 8, |j, k| {
            let (tau, t) = (10.0 * j as f64, 10.0 * k as f64);
            C64::from_polar(1.0, -w * tau + w * t)
        });
        let nr = r.map(|z| z.conj());
        let meta = SpectrumMeta::new(Scheme::Hd, Component::Total);
        let signals = vec![(Component::Rephasing, r.clone()), (Component::Nonrephasing, nr.clone())];
        let out = assemble(Scheme::Hd, &signals, &[Component::Total, Component::Rephasing], &grid, &options, &meta).unwrap();
        let direct = fourier_2d(&(r * C64::new(-1.0, 0.0)), &grid, Component::Rephasing, &options, meta.clone()).unwrap();
        assert_eq!(out[1].data(), direct.data());
        assert_eq!(out[0].meta.component, Component::Total);
        assert!(assemble(Scheme::Hd, &signals[..1], &[Component::Total], &grid, &options, &meta).is_err());
    }
}
