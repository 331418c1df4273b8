//! Linear array geometry on a uniform candidate grid, steering vectors,
//! beampattern evaluation and the pattern quality metrics used to judge a
//! design (peak sidelobe level, mainlobe ripple, half-power beamwidth and
//! aperture efficiency).
//!
//! Angles are in degrees measured from broadside. Element `m` of the steering
//! vector is `exp(j * 2π * (d/λ) * p_m * sin θ)` where `p_m` is the integer
//! grid index of the element and `d/λ` the grid spacing in wavelengths.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ANGLE_SLACK_DEG: f64 = 1e-9;

/// Relative threshold below which a weight is outside the beamformer support.
pub const SUPPORT_TOLERANCE: f64 = 1e-6;

/// Candidate grid of a linear array: spacing in wavelengths plus the integer
/// grid indices occupied by elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    spacing: f64,
    positions: Vec<usize>,
}

impl ArrayGeometry {
    pub fn new(spacing_wavelengths: f64, positions: Vec<usize>) -> Result<Self> {
        if !(spacing_wavelengths.is_finite() && spacing_wavelengths > 0.0) {
            return Err(Error::domain(format!(
                "grid spacing must be positive, got {spacing_wavelengths}"
            )));
        }
        if positions.is_empty() {
            return Err(Error::domain("array needs at least one element"));
        }
        if positions.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::domain("element positions must be strictly increasing"));
        }
        Ok(Self {
            spacing: spacing_wavelengths,
            positions,
        })
    }

    /// Filled uniform linear array with `n` elements.
    pub fn ula(n: usize, spacing_wavelengths: f64) -> Result<Self> {
        Self::new(spacing_wavelengths, (0..n).collect())
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `k0 * d = 2π d/λ`.
    pub fn wavenumber_times_d(&self) -> f64 {
        2.0 * PI * self.spacing
    }

    /// Physical aperture in wavelengths (first to last element).
    pub fn aperture(&self) -> f64 {
        (self.positions[self.len() - 1] - self.positions[0]) as f64 * self.spacing
    }

    /// Sub-array made of the given element indices (indices into `positions`).
    pub fn subarray(&self, members: &[usize]) -> Result<Self> {
        let mut positions = Vec::with_capacity(members.len());
        for &m in members {
            let p = *self
                .positions
                .get(m)
                .ok_or_else(|| Error::domain(format!("element index {m} out of range")))?;
            positions.push(p);
        }
        Self::new(self.spacing, positions)
    }

    pub fn steering_vector(&self, theta_deg: f64) -> Result<Vec<Complex64>> {
        check_angle(theta_deg)?;
        let phase = self.wavenumber_times_d() * theta_deg.to_radians().sin();
        Ok(self
            .positions
            .iter()
            .map(|&p| Complex64::from_polar(1.0, phase * p as f64))
            .collect())
    }
}

fn check_angle(theta_deg: f64) -> Result<()> {
    if !theta_deg.is_finite() || theta_deg.abs() > 90.0 + ANGLE_SLACK_DEG {
        return Err(Error::domain(format!("angle {theta_deg} deg outside [-90, 90]")));
    }
    Ok(())
}

/// Steering vector `a(θ)` of the array toward `theta_deg`.
pub fn steering_vector(geometry: &ArrayGeometry, theta_deg: f64) -> Result<Vec<Complex64>> {
    geometry.steering_vector(theta_deg)
}

/// Role of an angular sample in a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Mainlobe,
    Sidelobe,
    /// Sidelobe region of a communication beamformer.
    CommSidelobe,
    /// Excluded from every constraint and metric.
    Transition,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Mainlobe => "mainlobe",
            Region::Sidelobe => "sidelobe",
            Region::CommSidelobe => "comm_sidelobe",
            Region::Transition => "transition",
        }
    }

    pub fn is_sidelobe(self) -> bool {
        matches!(self, Region::Sidelobe | Region::CommSidelobe)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Labelled angular samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    angles: Vec<f64>,
    labels: Vec<Region>,
}

impl AngularGrid {
    pub fn new(angles: Vec<f64>, labels: Vec<Region>) -> Result<Self> {
        if angles.len() != labels.len() {
            return Err(Error::dim("angular grid labels", angles.len(), labels.len()));
        }
        if angles.windows(2).any(|a| a[0] >= a[1]) {
            return Err(Error::domain("grid angles must be strictly increasing"));
        }
        for &a in &angles {
            check_angle(a)?;
        }
        Ok(Self { angles, labels })
    }

    /// Uniform grid over `[lo, hi]` with every sample labelled `region`.
    pub fn uniform(lo: f64, hi: f64, step: f64, region: Region) -> Result<Self> {
        let angles = uniform_samples(lo, hi, step)?;
        let labels = vec![region; angles.len()];
        Self::new(angles, labels)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn labels(&self) -> &[Region] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles_in(&self, region: Region) -> Vec<f64> {
        self.angles
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == region)
            .map(|(&a, _)| a)
            .collect()
    }

    pub fn mainlobe_angles(&self) -> Vec<f64> {
        self.angles_in(Region::Mainlobe)
    }

    /// Samples labelled either radar or communication sidelobe.
    pub fn sidelobe_angles(&self) -> Vec<f64> {
        self.angles
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| l.is_sidelobe())
            .map(|(&a, _)| a)
            .collect()
    }
}

fn uniform_samples(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(lo <= hi) {
        return Err(Error::domain(format!("bad uniform grid [{lo}, {hi}] step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

/// Builds the labelled grid for a beam: a mainlobe sector sampled finely,
/// the rest of `[-90, 90]` sampled coarsely as sidelobe, with transition
/// bands excluded around the mainlobe edges and around listed directions.
#[derive(Debug, Clone)]
pub struct GridBuilder {
    pub mainlobe: (f64, f64),
    pub mainlobe_step: f64,
    pub sidelobe_step: f64,
    pub transition: f64,
    /// `(center, half_width)` bands labelled transition.
    pub exclusions: Vec<(f64, f64)>,
    /// Extra angles inserted as sidelobe samples (unless they fall in the mainlobe).
    pub extra_sidelobe: Vec<f64>,
    pub sidelobe_label: Region,
}

impl GridBuilder {
    pub fn new(mainlobe_lo: f64, mainlobe_hi: f64) -> Self {
        Self {
            mainlobe: (mainlobe_lo, mainlobe_hi),
            mainlobe_step: 0.25,
            sidelobe_step: 0.5,
            transition: 2.0,
            exclusions: Vec::new(),
            extra_sidelobe: Vec::new(),
            sidelobe_label: Region::Sidelobe,
        }
    }

    pub fn build(&self) -> Result<AngularGrid> {
        let (lo, hi) = self.mainlobe;
        check_angle(lo)?;
        check_angle(hi)?;
        if lo > hi {
            return Err(Error::domain("mainlobe lower edge above upper edge"));
        }
        let mut angles = uniform_samples(-90.0, 90.0, self.sidelobe_step)?;
        angles.extend(uniform_samples(lo, hi, self.mainlobe_step)?);
        angles.push(hi);
        angles.extend(self.extra_sidelobe.iter().copied());
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        angles.retain(|a| a.abs() <= 90.0);

        let eps = 1e-9;
        let labels = angles
            .iter()
            .map(|&a| {
                if a >= lo - eps && a <= hi + eps {
                    Region::Mainlobe
                } else if (a > lo - self.transition + eps && a < hi + self.transition - eps)
                    || self.exclusions.iter().any(|&(c, w)| (a - c).abs() < w - eps)
                {
                    Region::Transition
                } else {
                    self.sidelobe_label
                }
            })
            .collect();
        AngularGrid::new(angles, labels)
    }
}

/// Binary or relaxed antenna selection over the candidate grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionVector {
    entries: Vec<f64>,
    budget: usize,
    binary: bool,
}

impl SelectionVector {
    /// Binary selection of the listed candidate indices.
    pub fn from_indices(len: usize, selected: &[usize]) -> Result<Self> {
        let mut entries = vec![0.0; len];
        for &i in selected {
            if i >= len {
                return Err(Error::domain(format!("selected index {i} out of range {len}")));
            }
            if entries[i] == 1.0 {
                return Err(Error::domain(format!("index {i} selected twice")));
            }
            entries[i] = 1.0;
        }
        if selected.is_empty() {
            return Err(Error::domain("selection budget must be positive"));
        }
        Ok(Self {
            entries,
            budget: selected.len(),
            binary: true,
        })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let idx: Vec<usize> = bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        Self::from_indices(bits.len(), &idx)
    }

    /// Parses a `0`/`1` string such as `"1100"`.
    pub fn parse_bits(s: &str) -> Result<Self> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::domain(format!("invalid selection character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }

    /// Relaxed selection; entries must lie in `[0, 1]` and sum to `budget`.
    pub fn relaxed(entries: Vec<f64>, budget: usize, tol: f64) -> Result<Self> {
        if budget == 0 || budget > entries.len() {
            return Err(Error::domain(format!("budget {budget} outside (0, {}]", entries.len())));
        }
        if entries.iter().any(|&r| !(-tol..=1.0 + tol).contains(&r)) {
            return Err(Error::domain("relaxed selection entries outside [0, 1]"));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - budget as f64).abs() > tol.max(1e-12) * entries.len() as f64 {
            return Err(Error::domain(format!(
                "relaxed selection sums to {sum}, budget {budget}"
            )));
        }
        let binary = entries.iter().all(|&r| r == 0.0 || r == 1.0);
        Ok(Self {
            entries,
            budget,
            binary,
        })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.entries[i] >= 0.5
    }

    /// Indices with entry ≥ 0.5, ascending.
    pub fn selected_indices(&self) -> Vec<usize> {
        (0..self.entries.len()).filter(|&i| self.is_selected(i)).collect()
    }

    pub fn unselected_indices(&self) -> Vec<usize> {
        (0..self.entries.len()).filter(|&i| !self.is_selected(i)).collect()
    }

    /// Indices of the `budget` largest entries (ties to lower index), as a
    /// binary selection.
    pub fn round_to_budget(&self) -> Self {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by(|&a, &b| self.entries[b].total_cmp(&self.entries[a]).then(a.cmp(&b)));
        let mut chosen = order[..self.budget].to_vec();
        chosen.sort_unstable();
        Self::from_indices(self.entries.len(), &chosen).expect("budget within range")
    }

    pub fn complement(&self) -> Result<Self> {
        Self::from_indices(self.len(), &self.unselected_indices())
    }

    pub fn to_bit_string(&self) -> String {
        self.entries.iter().map(|&r| if r >= 0.5 { '1' } else { '0' }).collect()
    }
}

/// Complex weight vector over the elements of a geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    weights: Vec<Complex64>,
}

impl Beamformer {
    pub fn new(weights: Vec<Complex64>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<Complex64> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices with `|w_m| > SUPPORT_TOLERANCE * max|w|`.
    pub fn support(&self) -> Vec<usize> {
        let peak = self.weights.iter().map(|w| w.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return Vec::new();
        }
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| w.norm() > SUPPORT_TOLERANCE * peak)
            .map(|(i, _)| i)
            .collect()
    }

    /// Scatters sub-array weights back onto a candidate grid of length `len`.
    pub fn scatter(&self, members: &[usize], len: usize) -> Result<Self> {
        if members.len() != self.weights.len() {
            return Err(Error::dim("beamformer scatter", self.weights.len(), members.len()));
        }
        let mut full = vec![Complex64::new(0.0, 0.0); len];
        for (&m, &w) in members.iter().zip(&self.weights) {
            *full
                .get_mut(m)
                .ok_or_else(|| Error::domain(format!("member {m} out of range {len}")))? = w;
        }
        Ok(Self::new(full))
    }

    /// Weights restricted to the given element indices.
    pub fn gather(&self, members: &[usize]) -> Self {
        Self::new(members.iter().map(|&m| self.weights[m]).collect())
    }
}

/// `w^H a(θ)` at one angle.
pub fn pattern_at(weights: &[Complex64], geometry: &ArrayGeometry, theta_deg: f64) -> Result<Complex64> {
    if weights.len() != geometry.len() {
        return Err(Error::dim("pattern weights", geometry.len(), weights.len()));
    }
    let a = geometry.steering_vector(theta_deg)?;
    Ok(weights.iter().zip(&a).map(|(w, a)| w.conj() * a).sum())
}

/// `w^H a(θ_i)` over every sample of the grid.
pub fn pattern(weights: &[Complex64], geometry: &ArrayGeometry, grid: &AngularGrid) -> Result<Vec<Complex64>> {
    pattern_at_angles(weights, geometry, grid.angles())
}

pub fn pattern_at_angles(weights: &[Complex64], geometry: &ArrayGeometry, angles: &[f64]) -> Result<Vec<Complex64>> {
    if weights.len() != geometry.len() {
        return Err(Error::dim("pattern weights", geometry.len(), weights.len()));
    }
    angles.iter().map(|&t| pattern_at(weights, geometry, t)).collect()
}

fn region_peak(pattern: &[Complex64], grid: &AngularGrid, pick: impl Fn(Region) -> bool) -> Option<f64> {
    pattern
        .iter()
        .zip(grid.labels())
        .filter(|(_, &l)| pick(l))
        .map(|(p, _)| p.norm())
        .reduce(f64::max)
}

fn check_pattern_len(pattern: &[Complex64], grid: &AngularGrid) -> Result<()> {
    if pattern.len() != grid.len() {
        return Err(Error::dim("pattern samples", grid.len(), pattern.len()));
    }
    Ok(())
}

/// Highest sidelobe magnitude relative to the mainlobe peak, in dB.
pub fn peak_sidelobe_level(pattern: &[Complex64], grid: &AngularGrid) -> Result<f64> {
    check_pattern_len(pattern, grid)?;
    let side =
        region_peak(pattern, grid, Region::is_sidelobe).ok_or_else(|| Error::domain("grid has no sidelobe samples"))?;
    let main = region_peak(pattern, grid, |l| l == Region::Mainlobe)
        .ok_or_else(|| Error::domain("grid has no mainlobe samples"))?;
    Ok(20.0 * (side / main).log10())
}

/// Peak-to-peak magnitude variation over the mainlobe, in dB. A null inside
/// the mainlobe yields `+inf`.
pub fn mainlobe_ripple(pattern: &[Complex64], grid: &AngularGrid) -> Result<f64> {
    check_pattern_len(pattern, grid)?;
    let mags: Vec<f64> = pattern
        .iter()
        .zip(grid.labels())
        .filter(|(_, &l)| l == Region::Mainlobe)
        .map(|(p, _)| p.norm())
        .collect();
    if mags.len() < 2 {
        return Err(Error::domain("ripple needs at least two mainlobe samples"));
    }
    let max = mags.iter().copied().fold(f64::MIN, f64::max);
    let min = mags.iter().copied().fold(f64::MAX, f64::min);
    if min == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (max / min).log10())
}

/// Width in degrees between the first −3 dB crossings either side of the
/// global peak, interpolating linearly in magnitude between samples.
pub fn half_power_beamwidth(pattern: &[Complex64], grid: &AngularGrid) -> Result<f64> {
    check_pattern_len(pattern, grid)?;
    let mags: Vec<f64> = pattern.iter().map(|p| p.norm()).collect();
    let (peak_idx, peak) = mags
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::MIN), |best, (i, m)| if m > best.1 { (i, m) } else { best });
    if !(peak > 0.0) {
        return Err(Error::domain("pattern is identically zero"));
    }
    let ties = mags.iter().filter(|&&m| (m - peak).abs() <= 1e-12 * peak).count();
    if ties > 1 {
        return Err(Error::domain("pattern maximum is not unique"));
    }
    let level = peak / 2f64.sqrt();
    let angles = grid.angles();
    let crossing = |i: usize, j: usize| {
        // i is inside (>= level), j is outside (< level)
        let t = (mags[i] - level) / (mags[i] - mags[j]);
        angles[i] + t * (angles[j] - angles[i])
    };
    let left = (1..=peak_idx)
        .rev()
        .find(|&i| mags[i - 1] < level)
        .map(|i| crossing(i, i - 1))
        .ok_or_else(|| Error::domain("half-power level not crossed below the peak"))?;
    let right = (peak_idx..mags.len() - 1)
        .find(|&i| mags[i + 1] < level)
        .map(|i| crossing(i, i + 1))
        .ok_or_else(|| Error::domain("half-power level not crossed above the peak"))?;
    Ok(right - left)
}

/// Unnormalized sinc, `sin(x)/x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Broadside directivity of an `m`-element uniformly excited ULA with element
/// spacing `spacing` wavelengths.
pub fn uniform_directivity(m: usize, spacing: f64) -> f64 {
    let kd = 2.0 * PI * spacing;
    let mf = m as f64;
    let cross: f64 = (1..m).map(|i| (m - i) as f64 * sinc(i as f64 * kd)).sum();
    mf * mf / (mf + 2.0 * cross)
}

/// Broadside directivity of the tapered array (isotropic elements).
pub fn tapered_directivity(weights: &[Complex64], geometry: &ArrayGeometry) -> Result<f64> {
    if weights.len() != geometry.len() {
        return Err(Error::dim("aperture efficiency weights", geometry.len(), weights.len()));
    }
    if weights.iter().all(|w| w.norm() == 0.0) {
        return Err(Error::domain("aperture efficiency of all-zero weights"));
    }
    let kd = geometry.wavenumber_times_d();
    let pos = geometry.positions();
    let num = weights.iter().sum::<Complex64>().norm_sqr();
    let mut den = Complex64::new(0.0, 0.0);
    for (n, wn) in weights.iter().enumerate() {
        for (m, wm) in weights.iter().enumerate() {
            let dp = pos[n] as f64 - pos[m] as f64;
            den += wn * wm.conj() * sinc(dp * kd);
        }
    }
    Ok(num / den.re)
}

/// Directivity of the tapered array over that of a uniformly excited
/// filled ULA with the same element count and grid spacing. Elements with
/// exactly zero weight are treated as disconnected.
pub fn aperture_efficiency(weights: &[Complex64], geometry: &ArrayGeometry) -> Result<f64> {
    let gs = tapered_directivity(weights, geometry)?;
    let m = weights.iter().filter(|w| w.norm() > 0.0).count();
    Ok(gs / uniform_directivity(m, geometry.spacing()))
}

/// `|Σ w|² / (M Σ |w|²)` over the connected elements: the directivity ratio
/// when every element pair is decorrelated, as on a half-wavelength lattice.
pub fn taper_efficiency(weights: &[Complex64]) -> Result<f64> {
    let active: Vec<&Complex64> = weights.iter().filter(|w| w.norm() > 0.0).collect();
    if active.is_empty() {
        return Err(Error::domain("taper efficiency of all-zero weights"));
    }
    let num = active.iter().copied().sum::<Complex64>().norm_sqr();
    let den = active.len() as f64 * active.iter().map(|w| w.norm_sqr()).sum::<f64>();
    Ok(num / den)
}

/// Writes `angle_deg,gain_db,gain_real,gain_imag,region_label` rows.
pub fn write_pattern_csv<W: Write>(out: W, pattern: &[Complex64], grid: &AngularGrid) -> Result<()> {
    check_pattern_len(pattern, grid)?;
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "angle_deg,gain_db,gain_real,gain_imag,region_label")?;
    for ((a, p), l) in grid.angles().iter().zip(pattern).zip(grid.labels()) {
        let db = 20.0 * p.norm().log10();
        writeln!(out, "{a},{db},{},{},{}", p.re, p.im, l.as_str())?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let g = ArrayGeometry::new(0.3, vec![0, 3, 7, 11]).unwrap();
        for a in g.steering_vector(0.0).unwrap() {
            assert!((a - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn half_wavelength_pair_at_thirty_degrees() {
        let g = ArrayGeometry::new(0.5, vec![0, 2]).unwrap();
        let a = g.steering_vector(30.0).unwrap();
        assert!((a[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((a[1] - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn candidate_grid_steering_is_unit_modulus() {
        let g = ArrayGeometry::ula(40, 0.25).unwrap();
        let a = g.steering_vector(-37.3).unwrap();
        assert_eq!(a.len(), 40);
        assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn out_of_range_angle_is_rejected() {
        let g = ArrayGeometry::ula(4, 0.5).unwrap();
        assert!(matches!(g.steering_vector(90.5), Err(Error::Domain(_))));
        assert!(g.steering_vector(-90.0).is_ok());
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::new(0.5, vec![]).is_err());
        assert!(ArrayGeometry::new(0.5, vec![1, 1]).is_err());
        assert!(ArrayGeometry::new(0.0, vec![0]).is_err());
    }

    #[test]
    fn matched_filter_gives_unit_gain() {
        let g = ArrayGeometry::new(0.25, vec![0, 1, 5, 9, 20]).unwrap();
        let a = g.steering_vector(12.0).unwrap();
        let w: Vec<_> = a.iter().map(|x| x / g.len() as f64).collect();
        let p = pattern_at(&w, &g, 12.0).unwrap();
        assert!((p - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_weights_give_zero_pattern() {
        let g = ArrayGeometry::ula(6, 0.5).unwrap();
        let grid = AngularGrid::uniform(-90.0, 90.0, 1.0, Region::Sidelobe).unwrap();
        let p = pattern(&[c(0.0, 0.0); 6], &g, &grid).unwrap();
        assert!(p.iter().all(|x| x.norm() == 0.0));
        assert!(pattern(&[c(0.0, 0.0); 5], &g, &grid).is_err());
    }

    fn two_region_grid() -> AngularGrid {
        let angles = vec![-10.0, -5.0, 0.0, 5.0, 10.0];
        let labels = vec![
            Region::Sidelobe,
            Region::Mainlobe,
            Region::Mainlobe,
            Region::Transition,
            Region::Sidelobe,
        ];
        AngularGrid::new(angles, labels).unwrap()
    }

    #[test]
    fn psl_of_constant_levels() {
        let grid = two_region_grid();
        let p = vec![c(0.1, 0.0), c(1.0, 0.0), c(0.0, 1.0), c(5.0, 0.0), c(0.0, -0.1)];
        assert!((peak_sidelobe_level(&p, &grid).unwrap() + 20.0).abs() < 1e-12);
        let flat = vec![c(1.0, 0.0); 5];
        assert!(peak_sidelobe_level(&flat, &grid).unwrap().abs() < 1e-12);
    }

    #[test]
    fn psl_needs_sidelobes() {
        let grid = AngularGrid::uniform(-5.0, 5.0, 1.0, Region::Mainlobe).unwrap();
        let p = vec![c(1.0, 0.0); grid.len()];
        assert!(matches!(peak_sidelobe_level(&p, &grid), Err(Error::Domain(_))));
    }

    #[test]
    fn ripple_values() {
        let grid = two_region_grid();
        let p = vec![c(0.1, 0.0), c(1.0, 0.0), c(0.0, 0.912), c(5.0, 0.0), c(0.1, 0.0)];
        let r = mainlobe_ripple(&p, &grid).unwrap();
        assert!((r - 20.0 * (1.0f64 / 0.912).log10()).abs() < 1e-12);
        assert!((r - 0.8).abs() < 0.01);
        let z = vec![c(0.1, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(5.0, 0.0), c(0.1, 0.0)];
        assert_eq!(mainlobe_ripple(&z, &grid).unwrap(), f64::INFINITY);
        let flat = vec![c(0.3, 0.4); 5];
        assert_eq!(mainlobe_ripple(&flat, &grid).unwrap(), 0.0);
    }

    #[test]
    fn hpbw_of_triangle() {
        let grid = AngularGrid::uniform(-4.0, 4.0, 1.0, Region::Mainlobe).unwrap();
        let p: Vec<_> = grid
            .angles()
            .iter()
            .map(|a| c((1.0 - a.abs() / 4.0).max(0.0), 0.0))
            .collect();
        let level = 1.0 / 2f64.sqrt();
        let expected = 2.0 * 4.0 * (1.0 - level);
        assert!((half_power_beamwidth(&p, &grid).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn hpbw_needs_crossing() {
        let grid = AngularGrid::uniform(-2.0, 2.0, 1.0, Region::Mainlobe).unwrap();
        let p = vec![c(0.9, 0.0), c(0.95, 0.0), c(1.0, 0.0), c(0.95, 0.0), c(0.9, 0.0)];
        assert!(half_power_beamwidth(&p, &grid).is_err());
    }

    #[test]
    fn uniform_half_wavelength_efficiency_is_one() {
        for m in [1, 2, 7, 16] {
            let g = ArrayGeometry::ula(m, 0.5).unwrap();
            let w = vec![c(1.0, 0.0); m];
            assert!((uniform_directivity(m, 0.5) - m as f64).abs() < 1e-9);
            assert!((aperture_efficiency(&w, &g).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn disconnected_elements_do_not_count() {
        // uniform weights on every other element of a quarter-wave grid is a
        // uniform half-wave ULA
        let g = ArrayGeometry::ula(9, 0.25).unwrap();
        let w: Vec<_> = (0..9).map(|i| c(if i % 2 == 0 { 1.0 } else { 0.0 }, 0.0)).collect();
        assert!((aperture_efficiency(&w, &g).unwrap() - 5.0 / uniform_directivity(5, 0.25)).abs() < 1e-9);
        assert!((taper_efficiency(&w).unwrap() - 1.0).abs() < 1e-12);
        let t = [c(1.0, 0.0), c(0.5, 0.0)];
        assert!((taper_efficiency(&t).unwrap() - 2.25 / 2.5).abs() < 1e-12);
    }

    #[test]
    fn efficiency_rejects_zero() {
        let g = ArrayGeometry::ula(3, 0.5).unwrap();
        assert!(aperture_efficiency(&[c(0.0, 0.0); 3], &g).is_err());
    }

    #[test]
    fn grid_builder_labels() {
        let mut b = GridBuilder::new(-10.0, 10.0);
        b.exclusions.push((-40.0, 2.0));
        let g = b.build().unwrap();
        let label = |a: f64| {
            let i = g.angles().iter().position(|&x| (x - a).abs() < 1e-9).unwrap();
            g.labels()[i]
        };
        assert_eq!(label(0.0), Region::Mainlobe);
        assert_eq!(label(10.0), Region::Mainlobe);
        assert_eq!(label(11.5), Region::Transition);
        assert_eq!(label(12.0), Region::Sidelobe);
        assert_eq!(label(-40.0), Region::Transition);
        assert_eq!(label(-42.0), Region::Sidelobe);
        assert_eq!(label(90.0), Region::Sidelobe);
        assert!(g.angles().contains(&9.75));
    }

    #[test]
    fn selection_helpers() {
        let s = SelectionVector::parse_bits("1011").unwrap();
        assert_eq!(s.budget(), 3);
        assert_eq!(s.selected_indices(), vec![0, 2, 3]);
        assert_eq!(s.to_bit_string(), "1011");
        assert_eq!(s.complement().unwrap().selected_indices(), vec![1]);
        let r = SelectionVector::relaxed(vec![0.9, 0.2, 0.8, 0.1], 2, 1e-9).unwrap();
        assert!(!r.is_binary());
        assert_eq!(r.round_to_budget().selected_indices(), vec![0, 2]);
        assert!(SelectionVector::relaxed(vec![0.9, 0.2], 2, 1e-9).is_err());
        assert!(SelectionVector::parse_bits("10x").is_err());
    }

    #[test]
    fn support_uses_relative_tolerance() {
        let b = Beamformer::new(vec![c(1.0, 0.0), c(1e-8, 0.0), c(0.0, 0.5)]);
        assert_eq!(b.support(), vec![0, 2]);
    }

    #[test]
    fn pattern_csv_layout() {
        let grid = two_region_grid();
        let p = vec![c(0.1, 0.0); 5];
        let mut buf = Vec::new();
        write_pattern_csv(&mut buf, &p, &grid).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "angle_deg,gain_db,gain_real,gain_imag,region_label"
        );
        assert_eq!(lines.next().unwrap(), "-10,-20,0.1,0,sidelobe");
        assert_eq!(text.lines().count(), 6);
    }
}
