//! TOML experiment configuration.
//!
//! Every table is optional; an empty document yields the dimer model probed
//! by 10 fs pulses at 3 meV on the default 31 x 31 grid. Unknown keys are
//! rejected and every error names a line.

use std::fmt;
use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::CutSpec;
use crate::error::{Error, Result};
use crate::fd::{DetectionMode, PhaseCycle, DEFAULT_T_ACQ};
use crate::field::{FramePolicy, PulseShape};
use crate::lindblad::{Integration, Monitor, DEFAULT_DT};
use crate::spectrum::{Component, DelayGrid, Scheme, TransformOptions};
use crate::system::{DephasingChannel, JumpChannel, QuantumSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// Level structure; energies, rates and dephasing strengths in eV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub energies: Vec<f64>,
    pub excitation: Vec<u32>,
    /// Relative transition dipoles, one row per level.
    pub dipoles: Vec<Vec<f64>>,
    pub dephasing: Vec<f64>,
    pub yields: Vec<f64>,
    pub jumps: Vec<JumpConfig>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let mut dipoles = vec![vec![1.0; 4]; 4];
        for (a, row) in dipoles.iter_mut().enumerate() {
            row[a] = 0.0;
        }
        dipoles[0][3] = 0.0;
        dipoles[3][0] = 0.0;
        ModelConfig {
            energies: vec![0.0, 1.46, 1.55, 3.01],
            excitation: vec![0, 1, 1, 2],
            dipoles,
            dephasing: vec![41.3e-3; 4],
            yields: vec![0.0, 1.0, 0.0, 0.0],
            jumps: vec![
                JumpConfig { from: 1, to: 0, rate: 4.13e-6 },
                JumpConfig { from: 2, to: 1, rate: 4.13e-3 },
                JumpConfig { from: 3, to: 2, rate: 13.78e-3 },
            ],
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<QuantumSystem> {
        let n = self.energies.len();
        if self.dipoles.len() != n || self.dipoles.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("dipoles must be a {n}x{n} table")));
        }
        if self.dephasing.len() != n {
            return Err(Error::Dimension(format!("dephasing needs {n} entries")));
        }
        if self.dephasing.iter().chain(self.jumps.iter().map(|j| &j.rate)).any(|x| !(*x >= 0.0)) {
            return Err(Error::Validation("rates and dephasing must be >= 0".into()));
        }
        let dipoles = DMatrix::from_fn(n, n, |a, b| self.dipoles[a][b]);
        let jumps = self.jumps.iter().map(|j| JumpChannel { from: j.from, to: j.to, rate: j.rate }).collect();
        let dephasing = self
            .dephasing
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 0.0)
            .map(|(level, d)| DephasingChannel { level, strength: *d })
            .collect();
        QuantumSystem::new(self.energies.clone(), dipoles, jumps, dephasing, self.yields.clone(), self.excitation.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    pub sigma: f64,
    pub peak_interaction: f64,
    pub carrier: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig { sigma: 10.0, peak_interaction: 3.0, carrier: 1.505 }
    }
}

impl From<PulseConfig> for PulseShape {
    fn from(p: PulseConfig) -> Self {
        PulseShape { sigma: p.sigma, peak_interaction: p.peak_interaction, carrier: p.carrier }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    pub padding: usize,
    pub folding_factor: u32,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig { padding: 4, folding_factor: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonitorLevel {
    Off,
    Standard,
    Strict,
}

impl From<MonitorLevel> for Monitor {
    fn from(m: MonitorLevel) -> Self {
        match m {
            MonitorLevel::Off => Monitor::Off,
            MonitorLevel::Standard => Monitor::Standard,
            MonitorLevel::Strict => Monitor::Strict,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub monitor: MonitorLevel,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig { dt: DEFAULT_DT, monitor: MonitorLevel::Standard }
    }
}

impl From<IntegrationConfig> for Integration {
    fn from(c: IntegrationConfig) -> Self {
        Integration { dt: c.dt, monitor: c.monitor.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HdConfig {
    pub n_absorbers: usize,
    /// Cube side in carrier wavelengths.
    pub box_scale: f64,
}

impl Default for HdConfig {
    fn default() -> Self {
        HdConfig { n_absorbers: 500, box_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdReadout {
    /// Integrated fluorescence over `t_acq`.
    Fluorescence,
    /// Yield-weighted populations right after the fourth pulse.
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdConfig {
    pub readout: FdReadout,
    pub t_acq: f64,
    pub cycle: [usize; 3],
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { readout: FdReadout::Fluorescence, t_acq: DEFAULT_T_ACQ, cycle: [3, 3, 3] }
    }
}

impl FdConfig {
    pub fn mode(&self, t_acq: f64) -> DetectionMode {
        match self.readout {
            FdReadout::Fluorescence => DetectionMode::IntegratedFluorescence { t_acq },
            FdReadout::Population => DetectionMode::PopulationProxy,
        }
    }

    pub fn phase_cycle(&self) -> Result<PhaseCycle> {
        let [l, m, n] = self.cycle;
        let step = |k: usize| 2.0 * std::f64::consts::PI / k as f64;
        PhaseCycle::new(l, m, n, [step(l), step(m), step(n)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceDetection {
    Hd,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DsfdConfig {
    pub detection: ReferenceDetection,
    pub tau_f: f64,
}

impl Default for DsfdConfig {
    fn default() -> Self {
        DsfdConfig { detection: ReferenceDetection::Fd, tau_f: crate::dsfd::DEFAULT_TAU_F }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    PeakInteraction,
    Sigma,
    Waiting,
    TAcq,
    NAbsorbers,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::PeakInteraction => "peak_interaction",
            SweepParameter::Sigma => "sigma",
            SweepParameter::Waiting => "waiting",
            SweepParameter::TAcq => "t_acq",
            SweepParameter::NAbsorbers => "n_absorbers",
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub component: Component,
    pub seed: u64,
    /// Defaults to the available parallelism.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub output: PathBuf,
    /// Line cuts reported across the waiting times of each sweep point.
    pub cuts: Vec<CutSpec>,
    pub model: ModelConfig,
    pub pulse: PulseConfig,
    pub grid: DelayGrid,
    pub transform: TransformConfig,
    pub integration: IntegrationConfig,
    pub hd: HdConfig,
    pub fd: FdConfig,
    pub dsfd: DsfdConfig,
    pub sweep: Vec<SweepAxis>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scheme: Scheme::Fd,
            component: Component::Total,
            seed: 1,
            workers: None,
            output: PathBuf::from("out"),
            cuts: vec![],
            model: ModelConfig::default(),
            pulse: PulseConfig::default(),
            grid: DelayGrid::default(),
            transform: TransformConfig::default(),
            integration: IntegrationConfig::default(),
            hd: HdConfig::default(),
            fd: FdConfig::default(),
            dsfd: DsfdConfig::default(),
            sweep: vec![],
        }
    }
}

/// Where a validation problem lives in the document.
struct Located {
    table: Option<&'static str>,
    key: &'static str,
    message: String,
}

fn bad(table: Option<&'static str>, key: &'static str, message: impl Into<String>) -> Located {
    Located { table, key, message: message.into() }
}

impl ExperimentConfig {
    pub fn transform_options(&self) -> Result<TransformOptions> {
        Ok(TransformOptions {
            padding: self.transform.padding,
            frame: FramePolicy::new(self.pulse.carrier, self.transform.folding_factor)?,
        })
    }

    fn check(&self) -> std::result::Result<(), Located> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        // TOML integers are signed 64-bit
        if i64::try_from(self.seed).is_err() {
            return Err(bad(None, "seed", format!("seed must be <= {}", i64::MAX)));
        }
        if let Err(e) = self.model.build() {
            return Err(bad(Some("model"), "energies", e.to_string()));
        }
        let p = &self.pulse;
        if !positive(p.sigma) {
            return Err(bad(Some("pulse"), "sigma", format!("sigma must be > 0, got {}", p.sigma)));
        }
        if !(p.peak_interaction >= 0.0 && p.peak_interaction.is_finite()) {
            return Err(bad(Some("pulse"), "peak_interaction", "peak_interaction must be >= 0"));
        }
        if !positive(p.carrier) {
            return Err(bad(Some("pulse"), "carrier", "carrier must be > 0"));
        }
        if let Err(e) = self.grid.validate() {
            return Err(bad(Some("grid"), "tau_step", e.to_string()));
        }
        if self.transform.padding == 0 {
            return Err(bad(Some("transform"), "padding", "padding must be >= 1"));
        }
        if !positive(self.integration.dt) {
            return Err(bad(Some("integration"), "dt", "dt must be > 0"));
        }
        if self.hd.n_absorbers == 0 {
            return Err(bad(Some("hd"), "n_absorbers", "n_absorbers must be >= 1"));
        }
        if !positive(self.hd.box_scale) {
            return Err(bad(Some("hd"), "box_scale", "box_scale must be > 0"));
        }
        if !positive(self.fd.t_acq) {
            return Err(bad(Some("fd"), "t_acq", "t_acq must be > 0"));
        }
        if let Err(e) = self.fd.phase_cycle() {
            return Err(bad(Some("fd"), "cycle", e.to_string()));
        }
        if !positive(self.dsfd.tau_f) {
            return Err(bad(Some("dsfd"), "tau_f", "tau_f must be > 0"));
        }
        if self.workers == Some(0) {
            return Err(bad(None, "workers", "workers must be >= 1"));
        }
        match (self.scheme, self.component) {
            (Scheme::Dsfd, Component::Dqc) => {
                return Err(bad(None, "component", "double-quantum reference spectra are not supported"))
            }
            (Scheme::Dsfd, _) if self.dsfd.detection == ReferenceDetection::Hd && self.sweep_has(SweepParameter::TAcq) => {
                return Err(bad(None, "scheme", "t_acq sweeps need fluorescence detection"))
            }
            _ => {}
        }
        let mut seen = vec![];
        for axis in &self.sweep {
            if seen.contains(&axis.parameter) {
                return Err(bad(Some("sweep"), "parameter", format!("{} is swept twice", axis.parameter)));
            }
            seen.push(axis.parameter);
            if axis.values.is_empty() {
                return Err(bad(Some("sweep"), "values", format!("{} sweep has no values", axis.parameter)));
            }
            for v in &axis.values {
                let ok = match axis.parameter {
                    SweepParameter::Waiting => v.is_finite() && *v >= 0.0,
                    SweepParameter::NAbsorbers => positive(*v) && v.fract() == 0.0,
                    _ => positive(*v),
                };
                if !ok {
                    return Err(bad(Some("sweep"), "values", format!("invalid {} value {v}", axis.parameter)));
                }
            }
        }
        Ok(())
    }

    fn sweep_has(&self, p: SweepParameter) -> bool {
        self.sweep.iter().any(|a| a.parameter == p)
    }

    /// Checks every invariant; errors carry line 0 when no source text exists.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|l| Error::Parse { line: 0, message: l.message })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Line (1-based) of the first error-span byte.
fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `table` (top level when `None`); falls back to the
/// table header, then to line 1.
fn line_of(text: &str, table: Option<&str>, key: &str) -> usize {
    let mut current: Option<String> = None;
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if table == Some(name.as_str()) && header.is_none() {
                header = Some(i + 1);
            }
            current = Some(name);
            continue;
        }
        let in_table = match (table, &current) {
            (None, None) => true,
            (Some(t), Some(c)) => t == c,
            _ => false,
        };
        if in_table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    header.unwrap_or(1)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| line_at(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    config.check().map_err(|l| Error::Parse { line: line_of(text, l.table, l.key), message: l.message })?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.model.dephasing, vec![41.3e-3; 4]);
        assert_eq!((c.grid.n_tau, c.grid.n_t, c.grid.tau_step, c.grid.t_step), (31, 31, 10.0, 10.0));
        assert_eq!(c.model.build().unwrap(), QuantumSystem::dimer_model());
    }

    #[test]
    fn negative_sigma_is_a_parse_error_with_line() {
        let text = "scheme = \"hd\"\n\n[pulse]\nsigma = -1.0\n";
        match parse_config(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("sigma"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_mistyped_keys_are_rejected_with_lines() {
        match parse_config("seed = 3\n[grid]\nn_tau = 4\nbogus = 1\n") {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        match parse_config("seed = \"three\"\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("scheme = \"xd\"\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn invariant_violations_are_rejected() {
        for text in [
            "[hd]\nn_absorbers = 0\n",
            "[grid]\nn_tau = 1\n",
            "[fd]\nt_acq = 0.0\n",
            "[[sweep]]\nparameter = \"sigma\"\nvalues = [2.5, -1.0]\n",
            "[[sweep]]\nparameter = \"n_absorbers\"\nvalues = [12.5]\n",
            "[[sweep]]\nparameter = \"sigma\"\nvalues = [1.0]\n[[sweep]]\nparameter = \"sigma\"\nvalues = [2.0]\n",
            "scheme = \"dsfd\"\ncomponent = \"dqc\"\n",
            "workers = 0\n",
        ] {
            assert!(matches!(parse_config(text), Err(Error::Parse { .. })), "{text}");
        }
        match parse_config("[[sweep]]\nparameter = \"sigma\"\nvalues = [2.5, -1.0]\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn serialization_round_trips() {
        let text = r#"
scheme = "hd"
component = "rephasing"
seed = 42
workers = 3
output = "runs/a"
cuts = ["diagonal", "horizontal:1.46"]

[pulse]
sigma = 2.5
peak_interaction = 27.0

[grid]
n_tau = 16
n_t = 16
waiting_times = [0.0]

[hd]
n_absorbers = 250

[[sweep]]
parameter = "peak_interaction"
values = [9.0, 27.0, 56.0]

[[sweep]]
parameter = "sigma"
values = [2.5, 20.0]
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.scheme, Scheme::Hd);
        assert_eq!(c.sweep.len(), 2);
        assert_eq!(c.cuts, vec![CutSpec::Diagonal, CutSpec::Horizontal { omega_t: 1.46 }]);
        let again = parse_config(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
        let d = ExperimentConfig::default();
        assert_eq!(parse_config(&d.to_toml().unwrap()).unwrap(), d);
    }

    #[test]
    fn detection_modes_follow_the_readout() {
        let mut f = FdConfig::default();
        assert_eq!(f.mode(200.0), DetectionMode::IntegratedFluorescence { t_acq: 200.0 });
        f.readout = FdReadout::Population;
        assert_eq!(f.mode(200.0), DetectionMode::PopulationProxy);
        assert_eq!(f.phase_cycle().unwrap(), PhaseCycle::default());
    }

    #[test]
    fn seeds_beyond_the_toml_integer_range_are_rejected() {
        let mut c = ExperimentConfig::default();
        c.seed = i64::MAX as u64;
        assert!(c.validate().is_ok());
        c.seed += 1;
        assert!(matches!(c.validate(), Err(Error::Parse { .. })));
    }
}
