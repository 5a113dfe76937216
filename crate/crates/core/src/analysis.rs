//! Line cuts, peak finding and spectrum comparison on real parts.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::Spectrum2D;

/// Line through the `(omega_tau, omega_t)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CutSpec {
    /// `omega_tau = omega_t`.
    Diagonal,
    /// Fixed detection energy `omega_t` (eV).
    Horizontal { omega_t: f64 },
}

impl fmt::Display for CutSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutSpec::Diagonal => f.write_str("diagonal"),
            CutSpec::Horizontal { omega_t } => write!(f, "horizontal:{omega_t}"),
        }
    }
}

impl FromStr for CutSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("diagonal") {
            return Ok(CutSpec::Diagonal);
        }
        if let Some(v) = s.strip_prefix("horizontal:") {
            let omega_t: f64 =
                v.trim().parse().map_err(|_| Error::Validation(format!("bad horizontal cut energy '{v}'")))?;
            if omega_t.is_finite() {
                return Ok(CutSpec::Horizontal { omega_t });
            }
        }
        Err(Error::Validation(format!("cut must be 'diagonal' or 'horizontal:<eV>', got '{s}'")))
    }
}

impl TryFrom<String> for CutSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CutSpec> for String {
    fn from(c: CutSpec) -> Self {
        c.to_string()
    }
}

/// One normalized intensity curve of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutCurve {
    pub waiting_time: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCutReport {
    pub cut: CutSpec,
    /// Excitation energies along the cut (eV).
    pub axis: Vec<f64>,
    pub curves: Vec<CutCurve>,
    /// Common maximum the curves were divided by.
    pub normalization: f64,
}

fn within(axis: &[f64], x: f64) -> bool {
    let half = 0.5 * (axis[1] - axis[0]).abs();
    x >= axis[0] - half && x <= axis[axis.len() - 1] + half
}

fn nearest(axis: &[f64], x: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn raw_cut(s: &Spectrum2D, cut: CutSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let re = s.real();
    match cut {
        CutSpec::Horizontal { omega_t } => {
            if !within(s.omega_t(), omega_t) {
                return Err(Error::Validation(format!("cut at {omega_t} eV lies outside the detection axis")));
            }
            let j = nearest(s.omega_t(), omega_t);
            Ok((s.omega_tau().to_vec(), (0..re.nrows()).map(|i| re[(i, j)]).collect()))
        }
        CutSpec::Diagonal => {
            let (axis, values): (Vec<f64>, Vec<f64>) = s
                .omega_tau()
                .iter()
                .enumerate()
                .filter(|(_, w)| within(s.omega_t(), **w))
                .map(|(i, w)| (*w, re[(i, nearest(s.omega_t(), *w))]))
                .unzip();
            if axis.is_empty() {
                return Err(Error::Validation("the axes do not overlap; no diagonal exists".into()));
            }
            Ok((axis, values))
        }
    }
}

/// Nearest-bin intensity (real part) along `cut` for each spectrum, all
/// divided by their common maximum magnitude.
pub fn line_cut(spectra: &[&Spectrum2D], cut: CutSpec) -> Result<LineCutReport> {
    let first = spectra.first().ok_or_else(|| Error::Validation("line cut needs at least one spectrum".into()))?;
    let mut axis = None;
    let mut curves = vec![];
    for s in spectra {
        if !s.same_axes(first) {
            return Err(Error::AxisMismatch("spectra in one report must share axes".into()));
        }
        let (a, v) = raw_cut(s, cut)?;
        axis.get_or_insert(a);
        curves.push(CutCurve { waiting_time: s.meta.waiting_time, values: v });
    }
    let norm = curves.iter().flat_map(|c| c.values.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
    if norm > 0.0 {
        for c in &mut curves {
            c.values.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(LineCutReport { cut, axis: axis.unwrap_or_default(), curves, normalization: norm })
}

/// Local maximum of the real part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub row: usize,
    pub col: usize,
    pub omega_tau: f64,
    pub omega_t: f64,
    pub value: f64,
}

/// Positive local maxima (8-neighbourhood) of the real part that reach
/// `threshold` times the global maximum, strongest first.
pub fn find_peaks(s: &Spectrum2D, threshold: f64) -> Vec<Peak> {
    let re = s.real();
    let max = re.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return vec![];
    }
    let (r, c) = re.shape();
    let mut peaks = vec![];
    for i in 0..r {
        for j in 0..c {
            let v = re[(i, j)];
            if v < threshold * max {
                continue;
            }
            let mut top = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= r as i64 || jj >= c as i64 {
                        continue;
                    }
                    let w = re[(ii as usize, jj as usize)];
                    // ties resolve toward the lowest index
                    if w > v || (w == v && (ii, jj) < (i as i64, j as i64)) {
                        top = false;
                    }
                }
            }
            if top {
                peaks.push(Peak { row: i, col: j, omega_tau: s.omega_tau()[i], omega_t: s.omega_t()[j], value: v });
            }
        }
    }
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    peaks
}

/// Displacement of a peak of `a` to the nearest peak of `b`, in bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakDelta {
    pub omega_tau: f64,
    pub omega_t: f64,
    pub d_tau: i64,
    pub d_t: i64,
}

impl PeakDelta {
    pub fn max_bins(&self) -> u64 {
        self.d_tau.unsigned_abs().max(self.d_t.unsigned_abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub relative_l2: f64,
    pub peak_deltas: Vec<PeakDelta>,
}

/// Peaks at or above this fraction of the maximum are matched.
pub const PEAK_THRESHOLD: f64 = 0.25;

fn max_normalized(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.amax();
    if n > 0.0 {
        m / n
    } else {
        m.clone()
    }
}

/// Coarser of two axes, restricted to where the other one is defined.
fn common_axis(x: &[f64], y: &[f64]) -> Vec<f64> {
    let (coarse, fine) = if (x[1] - x[0]).abs() >= (y[1] - y[0]).abs() { (x, y) } else { (y, x) };
    coarse.iter().copied().filter(|w| within(fine, *w)).collect()
}

fn resample(a: &Spectrum2D, b: &Spectrum2D) -> Result<(Spectrum2D, Spectrum2D)> {
    if a.same_axes(b) {
        return Ok((a.clone(), b.clone()));
    }
    let tau = common_axis(a.omega_tau(), b.omega_tau());
    let t = common_axis(a.omega_t(), b.omega_t());
    if tau.len() < 2 || t.len() < 2 {
        return Err(Error::AxisMismatch("spectra do not share a frequency region".into()));
    }
    let sample = |s: &Spectrum2D| {
        let data = DMatrix::from_fn(tau.len(), t.len(), |i, j| s.value_at(tau[i], t[j]));
        Spectrum2D::new(data, tau.clone(), t.clone(), s.meta.clone())
    };
    Ok((sample(a)?, sample(b)?))
}

/// Relative L2 distance of max-normalized real parts, measured against `b`,
/// plus the displacement of each significant peak of `a`. Spectra on
/// different grids are compared on the coarser grid over their overlap.
pub fn compare_spectra(a: &Spectrum2D, b: &Spectrum2D) -> Result<Comparison> {
    let (a, b) = resample(a, b)?;
    let (na, nb) = (max_normalized(&a.real()), max_normalized(&b.real()));
    let denom = nb.norm();
    let relative_l2 = if denom > 0.0 {
        (&na - &nb).norm() / denom
    } else if na.norm() == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let pb = find_peaks(&b, PEAK_THRESHOLD);
    let peak_deltas = find_peaks(&a, PEAK_THRESHOLD)
        .into_iter()
        .filter_map(|p| {
            pb.iter()
                .map(|q| (q.row as i64 - p.row as i64, q.col as i64 - p.col as i64))
                .min_by_key(|(x, y)| x * x + y * y)
                .map(|(d_tau, d_t)| PeakDelta { omega_tau: p.omega_tau, omega_t: p.omega_t, d_tau, d_t })
        })
        .collect();
    Ok(Comparison { relative_l2, peak_deltas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{Component, Scheme, SpectrumMeta};
    use crate::system::C64;

    fn axis(n: usize) -> Vec<f64> {
        (0..n).map(|k| 1.40 + 0.01 * k as f64).collect()
    }

    fn single_peak(at: (f64, f64), width: f64) -> Spectrum2D {
        let ax = axis(21);
        let data = DMatrix::from_fn(21, 21, |i, j| {
            let r2 = (ax[i] - at.0).powi(2) + (ax[j] - at.1).powi(2);
            C64::new((-r2 / (2.0 * width * width)).exp(), 0.3)
        });
        Spectrum2D::new(data, ax.clone(), ax, SpectrumMeta::new(Scheme::Fd, Component::Total)).unwrap()
    }

    #[test]
    fn diagonal_cut_peaks_at_the_resonance() {
        let s = single_peak((1.46, 1.46), 0.01);
        let r = line_cut(&[&s], CutSpec::Diagonal).unwrap();
        let (imax, _) = r.curves[0].values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((r.axis[imax] - 1.46).abs() < 1e-12);
        assert!((r.curves[0].values[imax] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn horizontal_cut_is_flat_away_from_the_peak_column() {
        let s = single_peak((1.46, 1.46), 0.004);
        let r = line_cut(&[&s], CutSpec::Horizontal { omega_t: 1.46 }).unwrap();
        for (w, v) in r.axis.iter().zip(&r.curves[0].values) {
            if (w - 1.46).abs() > 0.025 {
                assert!(v.abs() < 1e-6, "{w} {v}");
            }
        }
    }

    #[test]
    fn normalized_cut_is_scale_invariant() {
        let s = single_peak((1.46, 1.5), 0.02);
        let a = line_cut(&[&s], CutSpec::Diagonal).unwrap();
        let b = line_cut(&[&s.scaled(7.0)], CutSpec::Diagonal).unwrap();
        for (x, y) in a.curves[0].values.iter().zip(&b.curves[0].values) {
            assert!((x - y).abs() <= 1e-15, "{x} {y}");
        }
        assert!((b.normalization / a.normalization - 7.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_normalization_uses_the_common_maximum() {
        let s = single_peak((1.46, 1.46), 0.02);
        let half = s.scaled(0.5);
        let r = line_cut(&[&s, &half], CutSpec::Diagonal).unwrap();
        let m0 = r.curves[0].values.iter().cloned().fold(f64::MIN, f64::max);
        let m1 = r.curves[1].values.iter().cloned().fold(f64::MIN, f64::max);
        assert!((m0 - 1.0).abs() < 1e-12 && (m1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cut_outside_axes_is_rejected() {
        let s = single_peak((1.46, 1.46), 0.02);
        assert!(line_cut(&[&s], CutSpec::Horizontal { omega_t: 2.0 }).is_err());
        assert!(line_cut(&[], CutSpec::Diagonal).is_err());
    }

    #[test]
    fn cut_spec_parses() {
        assert_eq!("diagonal".parse::<CutSpec>().unwrap(), CutSpec::Diagonal);
        assert_eq!("horizontal:1.46".parse::<CutSpec>().unwrap(), CutSpec::Horizontal { omega_t: 1.46 });
        assert!("vertical:1".parse::<CutSpec>().is_err());
        assert!("horizontal:x".parse::<CutSpec>().is_err());
        let c = CutSpec::Horizontal { omega_t: 1.46 };
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, "\"horizontal:1.46\"");
        assert_eq!(serde_json::from_str::<CutSpec>(&json).unwrap(), c);
    }

    #[test]
    fn identical_and_scaled_spectra_compare_equal() {
        let s = single_peak((1.46, 1.55), 0.02);
        let c = compare_spectra(&s, &s).unwrap();
        assert_eq!(c.relative_l2, 0.0);
        assert!(!c.peak_deltas.is_empty());
        assert!(c.peak_deltas.iter().all(|d| d.max_bins() == 0));
        let c2 = compare_spectra(&s.scaled(2.0), &s).unwrap();
        assert!(c2.relative_l2 < 1e-15);
    }

    #[test]
    fn displaced_peak_is_reported_in_bins() {
        let a = single_peak((1.46, 1.50), 0.02);
        let b = single_peak((1.48, 1.49), 0.02);
        let c = compare_spectra(&a, &b).unwrap();
        assert_eq!((c.peak_deltas[0].d_tau, c.peak_deltas[0].d_t), (2, -1));
        assert!(c.relative_l2 > 0.1);
    }

    #[test]
    fn disjoint_axes_are_rejected_and_overlaps_resampled() {
        let a = single_peak((1.46, 1.46), 0.02);
        let far: Vec<f64> = (0..21).map(|k| 3.0 + 0.01 * k as f64).collect();
        let b = Spectrum2D::new(a.data().clone(), far.clone(), far, a.meta.clone()).unwrap();
        assert!(matches!(compare_spectra(&a, &b), Err(Error::AxisMismatch(_))));

        let fine: Vec<f64> = (0..41).map(|k| 1.40 + 0.005 * k as f64).collect();
        let data = DMatrix::from_fn(41, 41, |i, j| {
            let r2 = (fine[i] - 1.46f64).powi(2) + (fine[j] - 1.46f64).powi(2);
            C64::new((-r2 / (2.0 * 0.02 * 0.02)).exp(), 0.0)
        });
        let f = Spectrum2D::new(data, fine.clone(), fine, a.meta.clone()).unwrap();
        let c = compare_spectra(&f, &a).unwrap();
        assert!(c.relative_l2 < 1e-12, "{}", c.relative_l2);
    }

    #[test]
    fn peaks_are_found_strongest_first() {
        let ax = axis(21);
        let data = DMatrix::from_fn(21, 21, |i, j| {
            let g = |x: f64, y: f64, a: f64| a * (-((ax[i] - x).powi(2) + (ax[j] - y).powi(2)) / 2e-4).exp();
            C64::new(g(1.46, 1.46, 1.0) + g(1.55, 1.55, 0.6), 0.0)
        });
        let s = Spectrum2D::new(data, ax.clone(), ax, SpectrumMeta::new(Scheme::Hd, Component::Total)).unwrap();
        let p = find_peaks(&s, 0.25);
        assert_eq!(p.len(), 2);
        assert!((p[0].omega_tau - 1.46).abs() < 1e-12 && (p[1].omega_t - 1.55).abs() < 1e-12);
    }
}
