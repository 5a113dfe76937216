//! Sweep execution: one spectrum file per sweep point plus a JSON manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{line_cut, LineCutReport};
use crate::config::{ExperimentConfig, FdReadout, ReferenceDetection, SweepParameter};
use crate::dsfd::{dsfd_spectrum, Detection, DsfdSettings};
use crate::error::{Error, Result};
use crate::field::{default_wavevectors, PulseShape};
use crate::hd::{sample_positions, EnsembleConfig};
use crate::pipeline::{fd_spectra, hd_spectra, FdRequest, HdRequest};
use crate::spectrum::{unfold_axes, Scheme, Spectrum2D, SpectrumMeta};
use crate::system::QuantumSystem;

pub const MANIFEST_VERSION: u32 = 1;

/// Fully resolved parameters of one spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub peak_interaction: f64,
    pub sigma: f64,
    pub waiting: f64,
    pub t_acq: f64,
    pub n_absorbers: usize,
}

impl SweepPoint {
    fn set(&mut self, p: SweepParameter, v: f64) {
        match p {
            SweepParameter::PeakInteraction => self.peak_interaction = v,
            SweepParameter::Sigma => self.sigma = v,
            SweepParameter::Waiting => self.waiting = v,
            SweepParameter::TAcq => self.t_acq = v,
            SweepParameter::NAbsorbers => self.n_absorbers = v as usize,
        }
    }
}

/// Cartesian product of the sweep axes in declaration order (last axis
/// fastest), each expanded over the grid's waiting times unless the waiting
/// time is swept itself.
pub fn sweep_points(config: &ExperimentConfig) -> Vec<SweepPoint> {
    let base = SweepPoint {
        peak_interaction: config.pulse.peak_interaction,
        sigma: config.pulse.sigma,
        waiting: 0.0,
        t_acq: config.fd.t_acq,
        n_absorbers: config.hd.n_absorbers,
    };
    let mut points = vec![base];
    for axis in &config.sweep {
        points = points
            .iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = *p;
                    q.set(axis.parameter, *v);
                    q
                })
            })
            .collect();
    }
    if config.sweep.iter().any(|a| a.parameter == SweepParameter::Waiting) {
        return points;
    }
    points
        .iter()
        .flat_map(|p| config.grid.waiting_times.iter().map(move |w| SweepPoint { waiting: *w, ..*p }))
        .collect()
}

/// Which parameters influence the output of `config`'s scheme.
fn uses_t_acq(config: &ExperimentConfig) -> bool {
    let fluorescence = config.fd.readout == FdReadout::Fluorescence;
    match config.scheme {
        Scheme::Fd => fluorescence,
        Scheme::Dsfd => fluorescence && config.dsfd.detection == ReferenceDetection::Fd,
        Scheme::Hd => false,
    }
}

fn stem(config: &ExperimentConfig, p: &SweepPoint, with_waiting: bool) -> String {
    let mut s = format!("{}_{}_A{}_s{}", config.scheme, config.component, p.peak_interaction, p.sigma);
    if config.scheme == Scheme::Hd {
        s.push_str(&format!("_N{}", p.n_absorbers));
    }
    if uses_t_acq(config) {
        s.push_str(&format!("_tacq{}", p.t_acq));
    }
    if with_waiting {
        s.push_str(&format!("_T{}", p.waiting));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory.
    pub file: String,
    pub point: SweepPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub point: SweepPoint,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    /// Wall time per entry, in entry order.
    pub entry_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub scheme: Scheme,
    pub component: crate::spectrum::Component,
    pub config: ExperimentConfig,
    pub entries: Vec<ManifestEntry>,
    pub cut_reports: Vec<String>,
    pub failures: Vec<Failure>,
    pub timing: Timing,
}

impl Manifest {
    /// Manifest without the timing block; identical across reruns.
    pub fn payload(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("timing");
        }
        v
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Settings that apply to every point and are resolved once.
struct Context<'a> {
    config: &'a ExperimentConfig,
    system: QuantumSystem,
}

impl Context<'_> {
    fn meta(&self, p: &SweepPoint) -> SpectrumMeta {
        let mut meta = SpectrumMeta::new(self.config.scheme, self.config.component);
        meta.waiting_time = p.waiting;
        meta.peak_interaction = p.peak_interaction;
        meta.sigma = p.sigma;
        meta.seed = self.config.seed;
        meta
    }

    fn shape(&self, p: &SweepPoint) -> PulseShape {
        PulseShape { sigma: p.sigma, peak_interaction: p.peak_interaction, carrier: self.config.pulse.carrier }
    }

    /// Spectra for points that differ at most in `t_acq`, in input order.
    fn compute(&self, group: &[SweepPoint]) -> Result<Vec<Spectrum2D>> {
        let c = self.config;
        let p = group[0];
        let options = c.transform_options()?;
        let component = [c.component];
        let mut meta = self.meta(&p);
        match c.scheme {
            Scheme::Hd => {
                let ks = default_wavevectors(c.pulse.carrier);
                let positions = sample_positions(&EnsembleConfig::new(p.n_absorbers, c.hd.box_scale, c.seed, ks)?);
                let req = HdRequest {
                    system: &self.system,
                    shape: self.shape(&p),
                    wavevectors: ks,
                    positions: &positions,
                    grid: &c.grid,
                    waiting: p.waiting,
                    integration: c.integration.into(),
                    options,
                };
                Ok(hd_spectra(&req, &component, &meta)?)
            }
            Scheme::Fd => {
                let req = FdRequest {
                    system: &self.system,
                    shape: self.shape(&p),
                    cycle: c.fd.phase_cycle()?,
                    grid: &c.grid,
                    waiting: p.waiting,
                    integration: c.integration.into(),
                    options,
                };
                let modes: Vec<_> = group.iter().map(|q| c.fd.mode(q.t_acq)).collect();
                Ok(fd_spectra(&req, &modes, &component, &meta)?.into_iter().flatten().collect())
            }
            Scheme::Dsfd => {
                let (w_tau, w_t) = unfold_axes(&c.grid, options.padding, &options.frame)?;
                let detection = match c.dsfd.detection {
                    ReferenceDetection::Hd => Detection::Heterodyne,
                    ReferenceDetection::Fd => Detection::Fluorescence,
                };
                meta.folding_factor = options.frame.folding_factor;
                group
                    .iter()
                    .map(|q| {
                        let settings = DsfdSettings {
                            waiting: q.waiting,
                            tau_f: c.dsfd.tau_f,
                            carrier: c.pulse.carrier,
                            mode: c.fd.mode(q.t_acq),
                        };
                        let mut s = dsfd_spectrum(&self.system, detection, c.component, &settings, &w_tau, &w_t)?;
                        s.meta = SpectrumMeta { component: c.component, carrier: c.pulse.carrier, ..meta.clone() };
                        Ok(s)
                    })
                    .collect()
            }
        }
    }
}

/// Points sharing everything but `t_acq` are computed together (FD reuses
/// the propagated states).
fn group_points(config: &ExperimentConfig, points: &[SweepPoint]) -> Vec<Vec<usize>> {
    let mut groups: Vec<(SweepPoint, Vec<usize>)> = vec![];
    for (i, p) in points.iter().enumerate() {
        let key = SweepPoint { t_acq: 0.0, ..*p };
        match groups.iter_mut().find(|(k, _)| *k == key && config.scheme == Scheme::Fd) {
            Some((_, members)) => members.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    groups.into_iter().map(|(_, m)| m).collect()
}

fn worker_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {n} workers: {e}")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Runs every sweep point, writing `spectra/*.txt`, `cuts/*.json` and
/// `manifest.json` under the configured output directory. Failed points are
/// listed in the manifest and reported together as one sweep error.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Manifest> {
    config.validate()?;
    let started = Instant::now();
    let out: PathBuf = config.output.clone();
    fs::create_dir_all(out.join("spectra"))?;
    let ctx = Context { config, system: config.model.build()? };
    let points = sweep_points(config);
    let pool = worker_pool(config.workers)?;

    let mut entries = vec![];
    let mut entry_seconds = vec![];
    let mut failures = vec![];
    let mut produced: Vec<(SweepPoint, Spectrum2D)> = vec![];
    for group in group_points(config, &points) {
        let members: Vec<SweepPoint> = group.iter().map(|i| points[*i]).collect();
        let t0 = Instant::now();
        match pool.install(|| ctx.compute(&members)) {
            Ok(spectra) => {
                let share = t0.elapsed().as_secs_f64() / members.len() as f64;
                for (p, s) in members.iter().zip(spectra) {
                    let file = format!("spectra/{}.txt", stem(config, p, true));
                    s.write(&out.join(&file))?;
                    entries.push(ManifestEntry { file, point: *p });
                    entry_seconds.push(share);
                    produced.push((*p, s));
                }
            }
            Err(e) => {
                for p in &members {
                    failures.push(Failure { point: *p, kind: e.kind().to_string(), message: e.to_string() });
                }
            }
        }
    }

    let mut cut_reports = vec![];
    if !config.cuts.is_empty() {
        fs::create_dir_all(out.join("cuts"))?;
        let mut by_series: BTreeMap<String, Vec<&Spectrum2D>> = BTreeMap::new();
        for (p, s) in &produced {
            by_series.entry(stem(config, p, false)).or_default().push(s);
        }
        for (series, spectra) in &by_series {
            for cut in &config.cuts {
                let report: LineCutReport = line_cut(spectra, *cut)?;
                let name = format!("cuts/{series}_{}.json", cut.to_string().replace(':', "_"));
                write_json(&out.join(&name), &report)?;
                cut_reports.push(name);
            }
        }
    }

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: config.seed,
        scheme: config.scheme,
        component: config.component,
        config: config.clone(),
        entries,
        cut_reports,
        failures,
        timing: Timing { total_seconds: started.elapsed().as_secs_f64(), entry_seconds },
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    if !manifest.failures.is_empty() {
        let summary = manifest
            .failures
            .iter()
            .map(|f| {
                format!(
                    "[A={} meV, sigma={} fs, T={} fs, t_acq={} fs, N={}] {}",
                    f.point.peak_interaction, f.point.sigma, f.point.waiting, f.point.t_acq, f.point.n_absorbers, f.message
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::Sweep { count: manifest.failures.len(), summary });
    }
    Ok(manifest)
}
