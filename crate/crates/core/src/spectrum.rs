//! 2D Fourier transforms of delay-domain signals and the spectrum file format.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FramePolicy;
use crate::system::C64;
use crate::units::HBAR;

/// Detection scheme a spectrum came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Hd,
    Fd,
    Dsfd,
}

/// Third-order signal class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Rephasing,
    Nonrephasing,
    Dqc,
    Total,
}

macro_rules! str_enum {
    ($ty:ty { $($variant:ident => $name:literal),* $(,)? }) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $(Self::$variant => $name),* }
            }
        }
        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Self::$variant),)*
                    other => Err(Error::Format(format!(concat!("unknown ", stringify!($ty), " '{}'"), other))),
                }
            }
        }
    };
}

str_enum!(Scheme { Hd => "hd", Fd => "fd", Dsfd => "dsfd" });
str_enum!(Component { Rephasing => "rephasing", Nonrephasing => "nonrephasing", Dqc => "dqc", Total => "total" });

impl Component {
    /// Sign of the exponent on the excitation axis: `-1` for rephasing.
    pub fn tau_sign(&self) -> Result<f64> {
        match self {
            Component::Rephasing => Ok(-1.0),
            Component::Nonrephasing | Component::Dqc => Ok(1.0),
            Component::Total => Err(Error::Unsupported(
                "total spectra are assembled from rephasing and nonrephasing parts".into(),
            )),
        }
    }
}

/// Uniform delay grid with the waiting times to visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayGrid {
    pub tau_step: f64,
    pub t_step: f64,
    pub n_tau: usize,
    pub n_t: usize,
    pub waiting_times: Vec<f64>,
}

impl Default for DelayGrid {
    fn default() -> Self {
        DelayGrid {
            tau_step: 10.0,
            t_step: 10.0,
            n_tau: 31,
            n_t: 31,
            waiting_times: (0..=10).map(|k| 5.0 * k as f64).collect(),
        }
    }
}

impl DelayGrid {
    pub fn new(tau_step: f64, t_step: f64, n_tau: usize, n_t: usize, waiting_times: Vec<f64>) -> Result<Self> {
        let g = DelayGrid { tau_step, t_step, n_tau, n_t, waiting_times };
        g.validate()?;
        Ok(g)
    }

    /// Square grid of `n` points per axis at `step` fs and a single waiting time.
    pub fn square(step: f64, n: usize, waiting: f64) -> Result<Self> {
        DelayGrid::new(step, step, n, n, vec![waiting])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_step > 0.0 && self.t_step > 0.0 && self.tau_step.is_finite() && self.t_step.is_finite()) {
            return Err(Error::Validation("grid steps must be > 0".into()));
        }
        if self.n_tau < 2 || self.n_t < 2 {
            return Err(Error::Validation("grids need at least 2 points per axis".into()));
        }
        if self.waiting_times.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Validation("waiting times must be >= 0".into()));
        }
        Ok(())
    }

    pub fn tau_values(&self) -> Vec<f64> {
        (0..self.n_tau).map(|j| j as f64 * self.tau_step).collect()
    }

    pub fn t_values(&self) -> Vec<f64> {
        (0..self.n_t).map(|k| k as f64 * self.t_step).collect()
    }
}

/// Zero padding and frame used to turn a delay-domain signal into a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformOptions {
    pub padding: usize,
    pub frame: FramePolicy,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions { padding: 4, frame: FramePolicy { carrier: 1.505, folding_factor: 0 } }
    }
}

/// Descriptive metadata carried by every spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMeta {
    pub scheme: Scheme,
    pub component: Component,
    pub waiting_time: f64,
    pub peak_interaction: f64,
    pub sigma: f64,
    pub seed: u64,
    pub carrier: f64,
    pub folding_factor: u32,
}

impl SpectrumMeta {
    pub fn new(scheme: Scheme, component: Component) -> Self {
        SpectrumMeta {
            scheme,
            component,
            waiting_time: 0.0,
            peak_interaction: 0.0,
            sigma: 0.0,
            seed: 0,
            carrier: 0.0,
            folding_factor: 0,
        }
    }
}

/// Complex spectrum on absolute energy axes (eV); rows follow `omega_tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    data: DMatrix<C64>,
    omega_tau: Vec<f64>,
    omega_t: Vec<f64>,
    pub meta: SpectrumMeta,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) && v.iter().all(|x| x.is_finite())
}

impl Spectrum2D {
    pub fn new(data: DMatrix<C64>, omega_tau: Vec<f64>, omega_t: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        if data.nrows() != omega_tau.len() || data.ncols() != omega_t.len() {
            return Err(Error::Dimension(format!(
                "data is {}x{}, axes have {} and {} points",
                data.nrows(),
                data.ncols(),
                omega_tau.len(),
                omega_t.len()
            )));
        }
        if !strictly_increasing(&omega_tau) || !strictly_increasing(&omega_t) {
            return Err(Error::Validation("spectrum axes must be strictly increasing".into()));
        }
        Ok(Spectrum2D { data, omega_tau, omega_t, meta })
    }

    pub fn data(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn omega_tau(&self) -> &[f64] {
        &self.omega_tau
    }

    pub fn omega_t(&self) -> &[f64] {
        &self.omega_t
    }

    pub fn real(&self) -> DMatrix<f64> {
        self.data.map(|z| z.re)
    }

    pub fn scaled(&self, c: f64) -> Spectrum2D {
        Spectrum2D { data: &self.data * C64::new(c, 0.0), ..self.clone() }
    }

    pub fn same_axes(&self, other: &Spectrum2D) -> bool {
        self.omega_tau == other.omega_tau && self.omega_t == other.omega_t
    }

    /// Bin nearest to `(w_tau, w_t)` (eV).
    pub fn nearest_bin(&self, w_tau: f64, w_t: f64) -> (usize, usize) {
        (nearest(&self.omega_tau, w_tau), nearest(&self.omega_t, w_t))
    }

    pub fn value_at(&self, w_tau: f64, w_t: f64) -> C64 {
        let (i, j) = self.nearest_bin(w_tau, w_t);
        self.data[(i, j)]
    }

    pub fn bin_width(&self) -> (f64, f64) {
        (self.omega_tau[1] - self.omega_tau[0], self.omega_t[1] - self.omega_t[0])
    }

    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut s = String::new();
        let axis = |v: &[f64]| v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "# pulse2d spectrum v1");
        let _ = writeln!(s, "# scheme: {}", m.scheme);
        let _ = writeln!(s, "# component: {}", m.component);
        let _ = writeln!(s, "# waiting_time_fs: {:.16e}", m.waiting_time);
        let _ = writeln!(s, "# peak_interaction_mev: {:.16e}", m.peak_interaction);
        let _ = writeln!(s, "# sigma_fs: {:.16e}", m.sigma);
        let _ = writeln!(s, "# seed: {}", m.seed);
        let _ = writeln!(s, "# carrier_ev: {:.16e}", m.carrier);
        let _ = writeln!(s, "# folding_factor: {}", m.folding_factor);
        let _ = writeln!(s, "# rows: {}", self.data.nrows());
        let _ = writeln!(s, "# cols: {}", self.data.ncols());
        let _ = writeln!(s, "# omega_tau_ev: {}", axis(&self.omega_tau));
        let _ = writeln!(s, "# omega_t_ev: {}", axis(&self.omega_t));
        for (label, part) in [("real", 0), ("imag", 1)] {
            let _ = writeln!(s, "# {label}");
            for i in 0..self.data.nrows() {
                let row: Vec<String> = (0..self.data.ncols())
                    .map(|j| {
                        let z = self.data[(i, j)];
                        format!("{:.16e}", if part == 0 { z.re } else { z.im })
                    })
                    .collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut real: Vec<Vec<f64>> = Vec::new();
        let mut imag: Vec<Vec<f64>> = Vec::new();
        let mut section = 0u8;
        let perr = |line: usize, message: String| Error::Parse { line, message };
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                match rest {
                    "real" => section = 1,
                    "imag" => section = 2,
                    _ => {
                        if let Some((k, v)) = rest.split_once(':') {
                            header.insert(k.trim().to_string(), (line_no, v.trim().to_string()));
                        }
                    }
                }
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|e| perr(line_no, format!("bad number '{x}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            match section {
                1 => real.push(row),
                2 => imag.push(row),
                _ => return Err(perr(line_no, "data before '# real' marker".into())),
            }
        }
        let get = |k: &str| -> Result<(usize, String)> {
            header.get(k).cloned().ok_or_else(|| Error::Format(format!("missing header field '{k}'")))
        };
        fn num<T: FromStr>(k: &str, (line, v): (usize, String)) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| Error::Parse { line, message: format!("{k}: {e}") })
        }
        let axis = |k: &str| -> Result<Vec<f64>> {
            let (line, v) = get(k)?;
            v.split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|e| Error::Parse { line, message: format!("{k}: {e}") }))
                .collect()
        };
        let rows: usize = num("rows", get("rows")?)?;
        let cols: usize = num("cols", get("cols")?)?;
        if real.len() != rows || imag.len() != rows || real.iter().chain(&imag).any(|r| r.len() != cols) {
            return Err(Error::Format(format!("expected {rows}x{cols} real and imaginary blocks")));
        }
        let data = DMatrix::from_fn(rows, cols, |i, j| C64::new(real[i][j], imag[i][j]));
        let (sl, sv) = get("scheme")?;
        let (cl, cv) = get("component")?;
        let meta = SpectrumMeta {
            scheme: sv.parse().map_err(|e: Error| perr(sl, e.to_string()))?,
            component: cv.parse().map_err(|e: Error| perr(cl, e.to_string()))?,
            waiting_time: num("waiting_time_fs", get("waiting_time_fs")?)?,
            peak_interaction: num("peak_interaction_mev", get("peak_interaction_mev")?)?,
            sigma: num("sigma_fs", get("sigma_fs")?)?,
            seed: num("seed", get("seed")?)?,
            carrier: num("carrier_ev", get("carrier_ev")?)?,
            folding_factor: num("folding_factor", get("folding_factor")?)?,
        };
        Spectrum2D::new(data, axis("omega_tau_ev")?, axis("omega_t_ev")?, meta)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Spectrum2D::from_text(&std::fs::read_to_string(path)?)
    }
}

fn nearest(axis: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, a) in axis.iter().enumerate() {
        if (a - x).abs() < (axis[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Raw FFT energies (eV) in ascending order, `j = -n/2 .. n/2 - 1`.
pub fn raw_axis(n_padded: usize, step: f64) -> Vec<f64> {
    let half = (n_padded / 2) as i64;
    let de = 2.0 * std::f64::consts::PI * HBAR / (n_padded as f64 * step);
    (-half..n_padded as i64 - half).map(|j| j as f64 * de).collect()
}

/// Absolute energy axes: raw frequencies shifted by `folding_factor` Nyquist
/// spans `2 pi hbar / step` and by the carrier.
pub fn unfold_axes(grid: &DelayGrid, padding: usize, policy: &FramePolicy) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.validate()?;
    if padding == 0 {
        return Err(Error::Validation("padding factor must be >= 1".into()));
    }
    let unfold = |n: usize, step: f64| -> Vec<f64> {
        let offset = f64::from(policy.folding_factor) * 2.0 * std::f64::consts::PI * HBAR / step + policy.carrier;
        raw_axis(n * padding, step).into_iter().map(|e| e + offset).collect()
    };
    Ok((unfold(grid.n_tau, grid.tau_step), unfold(grid.n_t, grid.t_step)))
}

/// Fails with a calibration error unless every resonance (eV) lies strictly
/// inside both axes.
pub fn check_resonances(axes: &(Vec<f64>, Vec<f64>), resonances: &[f64]) -> Result<()> {
    for (name, axis) in [("excitation", &axes.0), ("detection", &axes.1)] {
        let (lo, hi) = (axis[0], axis[axis.len() - 1]);
        for r in resonances {
            if !(*r > lo && *r < hi) {
                return Err(Error::Calibration(format!(
                    "resonance {r} eV outside the {name} axis [{lo}, {hi}] eV"
                )));
            }
        }
    }
    Ok(())
}

fn fft_columns(buf: &mut [C64], rows: usize, cols: usize, fft: &dyn Fft<f64>) {
    // buf is row-major rows x cols; transform along rows index for each column
    let mut col = vec![C64::new(0.0, 0.0); rows];
    for j in 0..cols {
        for i in 0..rows {
            col[i] = buf[i * cols + j];
        }
        fft.process(&mut col);
        for i in 0..rows {
            buf[i * cols + j] = col[i];
        }
    }
}

/// `-i sum_jk w_j w_k e^{s i w_tau tau_j} e^{i w_t t_k} S_jk dtau dt`, with
/// `s = -1` for rephasing, half weights on the first sample of each axis
/// (trapezoid end point) and no apodization.
pub fn fourier_2d(
    signal: &DMatrix<C64>,
    grid: &DelayGrid,
    component: Component,
    options: &TransformOptions,
    meta: SpectrumMeta,
) -> Result<Spectrum2D> {
    grid.validate()?;
    if signal.nrows() != grid.n_tau || signal.ncols() != grid.n_t {
        return Err(Error::Dimension(format!(
            "signal is {}x{}, grid is {}x{}",
            signal.nrows(),
            signal.ncols(),
            grid.n_tau,
            grid.n_t
        )));
    }
    let sign = component.tau_sign()?;
    let (axis_tau, axis_t) = unfold_axes(grid, options.padding, &options.frame)?;
    let rows = grid.n_tau * options.padding;
    let cols = grid.n_t * options.padding;
    let mut buf = vec![C64::new(0.0, 0.0); rows * cols];
    for j in 0..grid.n_tau {
        let wj = if j == 0 { 0.5 } else { 1.0 };
        for k in 0..grid.n_t {
            let wk = if k == 0 { 0.5 } else { 1.0 };
            buf[j * cols + k] = signal[(j, k)] * (wj * wk);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    let tau_fft = if sign < 0.0 { planner.plan_fft_forward(rows) } else { planner.plan_fft_inverse(rows) };
    fft_columns(&mut buf, rows, cols, tau_fft.as_ref());
    let t_fft = planner.plan_fft_inverse(cols);
    for row in buf.chunks_mut(cols) {
        t_fft.process(row);
    }
    let scale = C64::new(0.0, -grid.tau_step * grid.t_step);
    let (hr, hc) = (rows / 2, cols / 2);
    let data = DMatrix::from_fn(rows, cols, |i, j| {
        let si = (i + rows - hr) % rows;
        let sj = (j + cols - hc) % cols;
        buf[si * cols + sj] * scale
    });
    let mut meta = meta;
    meta.component = component;
    meta.carrier = options.frame.carrier;
    meta.folding_factor = options.frame.folding_factor;
    Spectrum2D::new(data, axis_tau, axis_t, meta)
}

/// Elementwise `R + NR`.
pub fn total_correlation(rephasing: &Spectrum2D, nonrephasing: &Spectrum2D) -> Result<Spectrum2D> {
    if !rephasing.same_axes(nonrephasing) {
        return Err(Error::AxisMismatch("rephasing and nonrephasing spectra have different axes".into()));
    }
    let mut meta = rephasing.meta.clone();
    meta.component = Component::Total;
    Spectrum2D::new(
        &rephasing.data + &nonrephasing.data,
        rephasing.omega_tau.clone(),
        rephasing.omega_t.clone(),
        meta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> DelayGrid {
        DelayGrid::square(10.0, n, 0.0).unwrap()
    }

    fn opts(padding: usize) -> TransformOptions {
        TransformOptions { padding, frame: FramePolicy { carrier: 0.0, folding_factor: 0 } }
    }

    fn meta() -> SpectrumMeta {
        SpectrumMeta::new(Scheme::Hd, Component::Rephasing)
    }

    fn exp_signal(g: &DelayGrid, w_tau: f64, w_t: f64, decay: f64) -> DMatrix<C64> {
        DMatrix::from_fn(g.n_tau, g.n_t, |j, k| {
            let (tau, t) = (j as f64 * g.tau_step, k as f64 * g.t_step);
            C64::from_polar((-(tau + t) / decay).exp(), (w_tau * tau - w_t * t) / HBAR)
        })
    }

    fn argmax(s: &Spectrum2D) -> (usize, usize) {
        let mut best = (0, 0);
        for i in 0..s.data().nrows() {
            for j in 0..s.data().ncols() {
                if s.data()[(i, j)].norm() > s.data()[best].norm() {
                    best = (i, j);
                }
            }
        }
        best
    }

    #[test]
    fn rephasing_peak_lands_on_its_frequencies() {
        let g = grid(31);
        let (w1, w3) = (-0.045, 0.045);
        // rephasing coherence during tau evolves with the opposite sign to t
        let s = exp_signal(&g, w1, w3, 200.0);
        let spec = fourier_2d(&s, &g, Component::Rephasing, &opts(4), meta()).unwrap();
        let (i, j) = argmax(&spec);
        let (bt, bd) = spec.bin_width();
        assert!((spec.omega_tau()[i] - w1).abs() <= bt);
        assert!((spec.omega_t()[j] - w3).abs() <= bd);
    }

    #[test]
    fn zero_and_linearity() {
        let g = grid(16);
        let z = DMatrix::zeros(16, 16);
        let spec = fourier_2d(&z, &g, Component::Nonrephasing, &opts(2), meta()).unwrap();
        assert!(spec.data().iter().all(|v| *v == C64::new(0.0, 0.0)));
        let s = exp_signal(&g, 0.03, 0.02, 80.0);
        let a = fourier_2d(&s, &g, Component::Rephasing, &opts(2), meta()).unwrap();
        let b = fourier_2d(&(&s * C64::new(4.0, 0.0)), &g, Component::Rephasing, &opts(2), meta()).unwrap();
        // power-of-two scale is exact in floating point
        assert_eq!(a.data() * C64::new(4.0, 0.0), *b.data());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = grid(16);
        let s = DMatrix::zeros(15, 16);
        assert!(matches!(
            fourier_2d(&s, &g, Component::Rephasing, &opts(1), meta()),
            Err(Error::Dimension(_))
        ));
        assert!(fourier_2d(&DMatrix::zeros(16, 16), &g, Component::Total, &opts(1), meta()).is_err());
    }

    #[test]
    fn matches_direct_sum() {
        let g = DelayGrid::new(7.0, 9.0, 5, 6, vec![0.0]).unwrap();
        let s = DMatrix::from_fn(5, 6, |j, k| C64::new((j * 3 + k) as f64 * 0.1, (j as f64 - k as f64) * 0.2));
        for comp in [Component::Rephasing, Component::Nonrephasing] {
            let spec = fourier_2d(&s, &g, comp, &opts(3), meta()).unwrap();
            let sign = comp.tau_sign().unwrap();
            for (a, wa) in spec.omega_tau().iter().enumerate() {
                for (b, wb) in spec.omega_t().iter().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..5 {
                        for k in 0..6 {
                            let w = if j == 0 { 0.5 } else { 1.0 } * if k == 0 { 0.5 } else { 1.0 };
                            let (tau, t) = (j as f64 * 7.0, k as f64 * 9.0);
                            acc += s[(j, k)] * w * C64::from_polar(1.0, (sign * wa * tau + wb * t) / HBAR);
                        }
                    }
                    acc *= C64::new(0.0, -63.0);
                    assert!((acc - spec.data()[(a, b)]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn parseval() {
        let g = grid(12);
        let s = exp_signal(&g, 0.02, -0.01, 40.0);
        let p = 4;
        let spec = fourier_2d(&s, &g, Component::Rephasing, &opts(p), meta()).unwrap();
        let freq: f64 = spec.data().iter().map(|z| z.norm_sqr()).sum();
        let mut time = 0.0;
        for j in 0..12 {
            for k in 0..12 {
                let w = if j == 0 { 0.5 } else { 1.0 } * if k == 0 { 0.5 } else { 1.0 };
                time += (s[(j, k)] * w).norm_sqr();
            }
        }
        let norm = (12 * p * 12 * p) as f64 * 100.0 * 100.0;
        assert!((freq / (time * norm) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sign_rule_maps_rephasing_onto_nonrephasing() {
        let g = grid(16);
        let s = exp_signal(&g, 0.03, 0.01, 60.0);
        let r = fourier_2d(&s, &g, Component::Rephasing, &opts(2), meta()).unwrap();
        let nr = fourier_2d(&s, &g, Component::Nonrephasing, &opts(2), meta()).unwrap();
        let n = r.data().nrows();
        let h = n / 2;
        let max = r.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 1..n {
            let mirrored = 2 * h - i; // bin -m
            for j in 0..r.data().ncols() {
                assert!((nr.data()[(i, j)] - r.data()[(mirrored, j)]).norm() < 1e-12 * max);
            }
        }
    }

    #[test]
    fn padding_does_not_move_peaks() {
        let g = grid(31);
        let s = exp_signal(&g, 0.037, -0.052, 150.0);
        let a = fourier_2d(&s, &g, Component::Rephasing, &opts(2), meta()).unwrap();
        let b = fourier_2d(&s, &g, Component::Rephasing, &opts(4), meta()).unwrap();
        let (ia, ja) = argmax(&a);
        let (ib, jb) = argmax(&b);
        let unpadded = 2.0 * std::f64::consts::PI * HBAR / (31.0 * 10.0);
        assert!((a.omega_tau()[ia] - b.omega_tau()[ib]).abs() <= unpadded);
        assert!((a.omega_t()[ja] - b.omega_t()[jb]).abs() <= unpadded);
    }

    #[test]
    fn axes_unfold_to_absolute_energies() {
        let g = DelayGrid::default();
        let policy = FramePolicy::new(1.505, 0).unwrap();
        let axes = unfold_axes(&g, 4, &policy).unwrap();
        let i = nearest(&axes.0, 1.505 - 0.045);
        assert!((axes.0[i] - 1.46).abs() < 0.5 * (axes.0[1] - axes.0[0]) + 1e-12);
        check_resonances(&axes, &[1.46, 1.55]).unwrap();
        // Nyquist half-span exceeds the 45 meV detunings
        assert!(std::f64::consts::PI * HBAR / 10.0 > 2.0 * 0.045);
        let raw = unfold_axes(&g, 1, &FramePolicy::new(0.0, 0).unwrap()).unwrap();
        assert_eq!(raw.0, raw_axis(31, 10.0));
        let folded = unfold_axes(&g, 1, &FramePolicy::new(0.0, 3).unwrap()).unwrap();
        let span = 2.0 * std::f64::consts::PI * HBAR / 10.0;
        assert!((folded.1[0] - raw.1[0] - 3.0 * span).abs() < 1e-12);
        assert!(matches!(
            check_resonances(&raw, &[1.46]),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn total_is_elementwise_sum() {
        let g = grid(8);
        let s = exp_signal(&g, 0.01, 0.02, 50.0);
        let r = fourier_2d(&s, &g, Component::Rephasing, &opts(1), meta()).unwrap();
        let zero = fourier_2d(&DMatrix::zeros(8, 8), &g, Component::Nonrephasing, &opts(1), meta()).unwrap();
        let t = total_correlation(&r, &zero).unwrap();
        assert_eq!(t.data(), r.data());
        assert_eq!(t.meta.component, Component::Total);
        let t2 = total_correlation(&r, &r).unwrap();
        assert_eq!(*t2.data(), r.data() * C64::new(2.0, 0.0));
        let other = fourier_2d(&s, &grid(9).clone(), Component::Rephasing, &opts(1), meta());
        assert!(other.is_err());
        let g9 = grid(9);
        let s9 = exp_signal(&g9, 0.01, 0.02, 50.0);
        let r9 = fourier_2d(&s9, &g9, Component::Rephasing, &opts(1), meta()).unwrap();
        assert!(matches!(total_correlation(&r, &r9), Err(Error::AxisMismatch(_))));
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let g = grid(6);
        let s = exp_signal(&g, 0.011, -0.03, 33.0);
        let mut m = meta();
        m.seed = 12345678901234;
        m.peak_interaction = 27.0;
        m.sigma = 10.0;
        m.waiting_time = 15.0;
        let spec = fourier_2d(&s, &g, Component::Nonrephasing, &TransformOptions::default(), m).unwrap();
        let back = Spectrum2D::from_text(&spec.to_text()).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_text(), spec.to_text());
    }

    #[test]
    fn malformed_text_is_rejected() {
        assert!(Spectrum2D::from_text("1 2 3\n").is_err());
        let g = grid(4);
        let spec = fourier_2d(&DMatrix::zeros(4, 4), &g, Component::Rephasing, &opts(1), meta()).unwrap();
        let text = spec.to_text().replace("# rows: 4", "# rows: 5");
        assert!(matches!(Spectrum2D::from_text(&text), Err(Error::Format(_))));
        let text = spec.to_text().replace("# scheme: hd", "# scheme: xx");
        assert!(matches!(Spectrum2D::from_text(&text), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn grid_defaults_and_validation() {
        let g = DelayGrid::default();
        assert_eq!(g.tau_values().last(), Some(&300.0));
        assert_eq!(g.waiting_times.len(), 11);
        assert!(DelayGrid::new(0.0, 10.0, 4, 4, vec![0.0]).is_err());
        assert!(DelayGrid::new(10.0, 10.0, 1, 4, vec![0.0]).is_err());
        assert!(DelayGrid::new(10.0, 10.0, 4, 4, vec![-5.0]).is_err());
    }
}
