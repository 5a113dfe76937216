//! Lindblad dynamics in the carrier's rotating frame.
//!
//! The field-free part of the generator is diagonal in the level basis for
//! the channel types used here (jumps `|j><i|` and projector dephasing), so
//! the hot path applies it elementwise. [`lindblad_rhs`] keeps the explicit
//! operator-product form and is used to cross-check the fast path.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::system::{DensityMatrix, QuantumSystem, C64, HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL};
use crate::units::HBAR;

/// Default RK4 step (fs).
pub const DEFAULT_DT: f64 = 0.25;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Source of the time-dependent interaction in the rotating frame.
///
/// `drive(t)` is the complex amplitude `f(t)` (eV) such that the coupling
/// element between an upper level `u` and a lower level `l` is
/// `H[u,l] = -1/2 * dipole[u,l] * f(t)` and `H[l,u]` its conjugate.
pub trait FieldDrive: Sync {
    fn carrier(&self) -> f64;
    fn drive(&self, t: f64) -> C64;
}

/// Field-free evolution viewed from a frame rotating at `carrier` (eV).
#[derive(Debug, Clone, Copy)]
pub struct NoField {
    pub carrier: f64,
}

impl FieldDrive for NoField {
    fn carrier(&self) -> f64 {
        self.carrier
    }
    fn drive(&self, _t: f64) -> C64 {
        C64::new(0.0, 0.0)
    }
}

/// Continuous-wave drive of constant complex amplitude (eV).
#[derive(Debug, Clone, Copy)]
pub struct ConstantDrive {
    pub carrier: f64,
    pub amplitude: C64,
}

impl FieldDrive for ConstantDrive {
    fn carrier(&self) -> f64 {
        self.carrier
    }
    fn drive(&self, _t: f64) -> C64 {
        self.amplitude
    }
}

/// Energies in the frame rotating at `carrier`: `E_m - n_m * carrier`.
pub fn frame_energies(system: &QuantumSystem, carrier: f64) -> Vec<f64> {
    system
        .energies()
        .iter()
        .zip(system.excitation())
        .map(|(e, n)| e - f64::from(*n) * carrier)
        .collect()
}

/// Precomputed right-hand side of the master equation for one frame.
///
/// Immutable after construction and shared freely between workers.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    dim: usize,
    /// `-(i/hbar)(E_a - E_b) - kappa_ab`, column-major.
    diagonal: Vec<C64>,
    /// (to, from, rate/hbar): population feeding by jumps.
    feeds: Vec<(usize, usize, f64)>,
    /// (upper, lower, -(i/hbar) * (-dipole/2)).
    couplings: Vec<(usize, usize, C64)>,
}

impl LindbladGenerator {
    pub fn new(system: &QuantumSystem, carrier: f64) -> Self {
        let dim = system.dim();
        let h0 = frame_energies(system, carrier);
        let out_rate = system.outgoing_rates();
        let mut deph = vec![0.0; dim];
        for d in system.dephasing() {
            deph[d.level] += d.strength;
        }
        let mut diagonal = vec![C64::new(0.0, 0.0); dim * dim];
        for b in 0..dim {
            for a in 0..dim {
                let mut kappa = 0.5 * (out_rate[a] + out_rate[b]);
                if a != b {
                    kappa += 0.5 * (deph[a] + deph[b]);
                }
                diagonal[a + b * dim] = -I * ((h0[a] - h0[b]) / HBAR) - C64::new(kappa / HBAR, 0.0);
            }
        }
        let feeds = system.jumps().iter().map(|j| (j.to, j.from, j.rate / HBAR)).collect();
        let couplings = system
            .couplings()
            .iter()
            .map(|c| (c.upper, c.lower, -I / HBAR * C64::new(-0.5 * c.dipole, 0.0)))
            .collect();
        LindbladGenerator { dim, diagonal, feeds, couplings }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `out = d rho / dt` for drive amplitude `f`.
    #[inline]
    pub fn apply(&self, rho: &[C64], f: C64, out: &mut [C64]) {
        let n = self.dim;
        for ((o, r), d) in out.iter_mut().zip(rho).zip(&self.diagonal) {
            *o = r * d;
        }
        for &(to, from, rate) in &self.feeds {
            out[to + to * n] += rho[from + from * n] * rate;
        }
        if f.re == 0.0 && f.im == 0.0 {
            return;
        }
        let fc = f.conj();
        for &(u, l, g) in &self.couplings {
            // g * V where V[u,l] = m f, V[l,u] = m f*, with m folded into g
            let vul = g * f;
            let vlu = g * fc;
            for y in 0..n {
                out[u + y * n] += vul * rho[l + y * n];
                out[l + y * n] += vlu * rho[u + y * n];
            }
            for x in 0..n {
                out[x + l * n] -= vul * rho[x + u * n];
                out[x + u * n] -= vlu * rho[x + l * n];
            }
        }
    }
}

/// Explicit-product dissipator `sum_j G_j (L rho L^+ - 1/2 {L^+ L, rho}) / hbar`.
pub fn dissipator(system: &QuantumSystem, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let n = system.dim();
    let mut out = DMatrix::zeros(n, n);
    let mut add = |l: &DMatrix<C64>, rate: f64| {
        let ld = l.adjoint();
        let ldl = &ld * l;
        let term = l * rho * &ld - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0);
        out += term * C64::new(rate / HBAR, 0.0);
    };
    for j in system.jumps() {
        let mut l = DMatrix::zeros(n, n);
        l[(j.to, j.from)] = C64::new(1.0, 0.0);
        add(&l, j.rate);
    }
    for d in system.dephasing() {
        let mut l = DMatrix::zeros(n, n);
        l[(d.level, d.level)] = C64::new(1.0, 0.0);
        add(&l, d.strength);
    }
    out
}

/// `d rho/dt = (i/hbar)[rho, H0' + H_int] + D(rho)` with `H0'` the diagonal of
/// level energies in the frame rotating at `carrier` (eV). `h_int` in eV.
pub fn lindblad_rhs(
    system: &QuantumSystem,
    rho: &DensityMatrix,
    h_int: &DMatrix<C64>,
    carrier: f64,
) -> Result<DMatrix<C64>> {
    let n = system.dim();
    if rho.dim() != n || h_int.nrows() != n || h_int.ncols() != n {
        return Err(Error::Dimension(format!(
            "system has {n} levels, rho is {0}x{0}, h_int is {1}x{2}",
            rho.dim(),
            h_int.nrows(),
            h_int.ncols()
        )));
    }
    let herm = (h_int - h_int.adjoint()).camax();
    if herm > 1e-12 {
        return Err(Error::Validation(format!("interaction Hamiltonian not Hermitian (defect {herm:e})")));
    }
    let h0 = frame_energies(system, carrier);
    let mut h = h_int.clone();
    for (m, e) in h0.iter().enumerate() {
        h[(m, m)] += C64::new(*e, 0.0);
    }
    let r = rho.matrix();
    let comm = r * &h - &h * r;
    Ok(comm * (I / HBAR) + dissipator(system, r))
}

/// `|0><0|`.
pub fn ground_state(system: &QuantumSystem) -> DensityMatrix {
    DensityMatrix::pure_population(system.dim(), 0)
}

/// How closely a propagation watches the density-matrix invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monitor {
    /// No checks (for propagating non-physical operators such as `|0><1|`).
    Off,
    /// Trace and Hermiticity every step, positivity at the end.
    Standard,
    /// Everything every step.
    Strict,
}

/// Step size and monitoring level used by the scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integration {
    pub dt: f64,
    pub monitor: Monitor,
}

impl Default for Integration {
    fn default() -> Self {
        Integration { dt: DEFAULT_DT, monitor: Monitor::Standard }
    }
}

/// Fixed-step RK4 integrator bound to one generator.
pub struct Propagator<'a> {
    generator: &'a LindbladGenerator,
    dt: f64,
    monitor: Monitor,
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl<'a> Propagator<'a> {
    pub fn new(generator: &'a LindbladGenerator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Validation(format!("time step must be > 0, got {dt}")));
        }
        let n2 = generator.dim() * generator.dim();
        let z = vec![C64::new(0.0, 0.0); n2];
        Ok(Propagator {
            generator,
            dt,
            monitor: Monitor::Standard,
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        })
    }

    pub fn with_monitor(mut self, monitor: Monitor) -> Self {
        self.monitor = monitor;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn steps_between(&self, t0: f64, t1: f64) -> usize {
        let span = t1 - t0;
        if span <= 0.0 {
            return 0;
        }
        ((span / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    #[inline]
    fn step(&mut self, y: &mut [C64], field: &dyn FieldDrive, t: f64, h: f64) {
        let g = self.generator;
        let f0 = field.drive(t);
        let fm = field.drive(t + 0.5 * h);
        let f1 = field.drive(t + h);
        g.apply(y, f0, &mut self.k1);
        for ((t_, y_), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *t_ = y_ + k * (0.5 * h);
        }
        g.apply(&self.tmp, fm, &mut self.k2);
        for ((t_, y_), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *t_ = y_ + k * (0.5 * h);
        }
        g.apply(&self.tmp, fm, &mut self.k3);
        for ((t_, y_), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *t_ = y_ + k * h;
        }
        g.apply(&self.tmp, f1, &mut self.k4);
        let h6 = h / 6.0;
        for i in 0..y.len() {
            y[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * h6;
        }
    }

    fn check_step(&self, rho: &DensityMatrix, trace0: C64, t: f64, full: bool) -> Result<()> {
        let drift = (rho.trace() - trace0).norm();
        if drift > 10.0 * TRACE_TOL {
            return Err(Error::Integration { time_fs: t, reason: format!("trace drift {drift:e}") });
        }
        let h = rho.hermiticity_error();
        if h > 10.0 * HERMITICITY_TOL {
            return Err(Error::Integration { time_fs: t, reason: format!("hermiticity error {h:e}") });
        }
        if full {
            let m = rho.min_eigenvalue();
            if m < -10.0 * POSITIVITY_TOL {
                return Err(Error::Integration { time_fs: t, reason: format!("negative eigenvalue {m:e}") });
            }
        }
        Ok(())
    }

    /// Advances `rho` in place from `t0` to `t1`; the step is shrunk so the
    /// interval is covered by a whole number of equal steps.
    pub fn advance(&mut self, rho: &mut DensityMatrix, field: &dyn FieldDrive, t0: f64, t1: f64) -> Result<()> {
        self.advance_with(rho, field, t0, t1, |_, _| {})
    }

    /// Like [`advance`](Self::advance) but calls `observe(t, rho)` after every step.
    pub fn advance_with<F>(
        &mut self,
        rho: &mut DensityMatrix,
        field: &dyn FieldDrive,
        t0: f64,
        t1: f64,
        mut observe: F,
    ) -> Result<()>
    where
        F: FnMut(f64, &DensityMatrix),
    {
        if rho.dim() != self.generator.dim() {
            return Err(Error::Dimension(format!(
                "state is {0}x{0}, generator expects {1} levels",
                rho.dim(),
                self.generator.dim()
            )));
        }
        if t1 < t0 {
            return Err(Error::Validation(format!("t1 ({t1}) precedes t0 ({t0})")));
        }
        let n = self.steps_between(t0, t1);
        if n == 0 {
            return Ok(());
        }
        let h = (t1 - t0) / n as f64;
        let trace0 = rho.trace();
        for s in 0..n {
            let t = t0 + s as f64 * h;
            self.step(rho.as_mut_slice(), field, t, h);
            let t_next = t0 + (s + 1) as f64 * h;
            if self.monitor != Monitor::Off {
                self.check_step(rho, trace0, t_next, self.monitor == Monitor::Strict)?;
            }
            observe(t_next, rho);
        }
        if self.monitor == Monitor::Standard {
            let m = rho.min_eigenvalue();
            if m < -10.0 * POSITIVITY_TOL {
                return Err(Error::Integration { time_fs: t1, reason: format!("negative eigenvalue {m:e}") });
            }
        }
        Ok(())
    }
}

impl Propagator<'_> {
    /// Advances through the non-decreasing `samples` (all `>= t0`), calling
    /// `visit(k, rho(samples[k]))` at each one.
    pub fn advance_sampled<F>(
        &mut self,
        rho: &mut DensityMatrix,
        field: &dyn FieldDrive,
        t0: f64,
        samples: &[f64],
        mut visit: F,
    ) -> Result<()>
    where
        F: FnMut(usize, &DensityMatrix) -> Result<()>,
    {
        let mut t = t0;
        for (k, &ts) in samples.iter().enumerate() {
            self.advance(rho, field, t, ts)?;
            t = ts;
            visit(k, rho)?;
        }
        Ok(())
    }
}

/// Sampled trajectory `(t_k, rho(t_k))`.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

/// Propagates `rho0` from `t0` to `t1` with fixed-step RK4.
pub fn propagate(
    system: &QuantumSystem,
    rho0: &DensityMatrix,
    field: &dyn FieldDrive,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    let generator = LindbladGenerator::new(system, field.carrier());
    let mut prop = Propagator::new(&generator, dt)?;
    let mut rho = rho0.clone();
    prop.advance(&mut rho, field, t0, t1)?;
    Ok(rho)
}

/// Propagates and records every integrator step, starting with `rho0` at `t0`.
pub fn propagate_recording(
    system: &QuantumSystem,
    rho0: &DensityMatrix,
    field: &dyn FieldDrive,
    t0: f64,
    t1: f64,
    dt: f64,
    monitor: Monitor,
) -> Result<Trajectory> {
    let generator = LindbladGenerator::new(system, field.carrier());
    let mut prop = Propagator::new(&generator, dt)?.with_monitor(monitor);
    let mut rho = rho0.clone();
    let mut traj = Trajectory { times: vec![t0], states: vec![rho0.clone()] };
    prop.advance_with(&mut rho, field, t0, t1, |t, r| {
        traj.times.push(t);
        traj.states.push(r.clone());
    })?;
    Ok(traj)
}
