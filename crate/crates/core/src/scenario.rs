//! JSON scenario files. Angles are degrees and levels are dB throughout;
//! conversion to the linear quantities used by the solvers happens in the
//! `*_spec` builders.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{AngularGrid, ArrayGeometry, GridBuilder, Region};
use crate::error::{Error, Result};
use crate::selection::{JointDesign, SelectionConfig};
use crate::signaling::{ChannelModel, SymbolDictionary};
use crate::synthesis::{db_to_linear, ripple_bound_from_db, BeamShape, PatternSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub geometry: GeometryConfig,
    pub design: DesignConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub dictionary: Option<DictionaryConfig>,
    #[serde(default)]
    pub selection: SelectionSettings,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub ber: BerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub candidates: usize,
    /// Grid spacing in wavelengths.
    pub spacing: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            candidates: 40,
            spacing: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    /// One beamformer per symbol on one selected array.
    Single,
    /// Radar and communication beamformers on one selected array.
    Multi,
    /// Radar and communication beamformers on complementary subarrays.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamKind {
    Focused,
    Flattop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub kind: DesignKind,
    /// `M`, or `M_r` for a shared aperture.
    pub budget: usize,
    #[serde(default = "default_beam")]
    pub beam: BeamKind,
    #[serde(default)]
    pub target: f64,
    #[serde(default)]
    pub sector: Option<[f64; 2]>,
    pub comm_direction: f64,
    #[serde(default = "default_sidelobe_db")]
    pub sidelobe_db: f64,
    #[serde(default = "default_ripple_db")]
    pub ripple_db: f64,
    /// `[magnitude, phase_deg]` embedded while the array is selected;
    /// defaults to the largest-magnitude dictionary entry.
    #[serde(default)]
    pub selection_symbol: Option<[f64; 2]>,
}

fn default_beam() -> BeamKind {
    BeamKind::Focused
}

fn default_sidelobe_db() -> f64 {
    -20.0
}

fn default_ripple_db() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Radar mainlobe sector; defaults to the flat-top sector or to
    /// `target ± 4°`.
    pub mainlobe: Option<[f64; 2]>,
    pub mainlobe_step: f64,
    pub sidelobe_step: f64,
    pub transition: f64,
    /// Half-width of the band around `θ_c` left out of the radar sidelobe
    /// constraints; `0` keeps `θ_c` in the sidelobe region.
    pub comm_exclusion: f64,
    /// Half-width of the communication beam's mainlobe around `θ_c`.
    pub comm_mainlobe: f64,
    pub comm_transition: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            mainlobe: None,
            mainlobe_step: 0.25,
            sidelobe_step: 0.5,
            transition: 2.0,
            comm_exclusion: 2.0,
            comm_mainlobe: 3.0,
            comm_transition: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeConfig {
    Am,
    Pm,
    Qam,
    Ask2,
    Bpsk,
    Qpsk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    pub scheme: SchemeConfig,
    /// Amplitude levels (AM, QAM, ASK2 as `[high, low]`).
    #[serde(default)]
    pub levels: Vec<f64>,
    /// Phase levels in degrees (PM, QAM).
    #[serde(default)]
    pub phases_deg: Vec<f64>,
    /// Common amplitude for PM, BPSK and QPSK.
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl DictionaryConfig {
    pub fn build(&self) -> Result<SymbolDictionary> {
        let phases: Vec<f64> = self.phases_deg.iter().map(|p| p.to_radians()).collect();
        match self.scheme {
            SchemeConfig::Am => SymbolDictionary::am(&self.levels),
            SchemeConfig::Pm => SymbolDictionary::pm(self.amplitude, &phases),
            SchemeConfig::Qam => SymbolDictionary::qam(&self.levels, &phases),
            SchemeConfig::Ask2 => match self.levels[..] {
                [high, low] => SymbolDictionary::ask2(high, low),
                _ => Err(Error::Config("dictionary.levels: ask2 needs [high, low]".into())),
            },
            SchemeConfig::Bpsk => SymbolDictionary::bpsk(self.amplitude),
            SchemeConfig::Qpsk => SymbolDictionary::qpsk(self.amplitude),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSettings {
    pub gamma: f64,
    pub delta: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        let d = SelectionConfig::default();
        Self {
            gamma: d.gamma,
            delta: d.delta,
            max_iters: d.max_iters,
            restarts: d.restarts,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// `[re, im]`.
    pub beta: [f64; 2],
    pub transmit_power: f64,
    pub prf: f64,
    pub random_phase: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            beta: [1.0, 0.0],
            transmit_power: 1.0,
            prf: 1000.0,
            random_phase: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BerConfig {
    /// Dictionary for the link simulation; defaults to the design dictionary.
    pub dictionary: Option<DictionaryConfig>,
    /// `[start, stop, step]` in dB.
    pub snr_db: [f64; 3],
    pub trials: usize,
    /// Orthogonal waveforms per pulse, one curve each.
    pub waveforms: Vec<usize>,
    /// `[start, stop, step]` in degrees for the receiver-direction sweep.
    pub angles: [f64; 3],
    pub angle_snr_db: f64,
    pub seed: u64,
}

impl Default for BerConfig {
    fn default() -> Self {
        Self {
            dictionary: None,
            snr_db: [0.0, 60.0, 1.0],
            trials: 10_000,
            waveforms: vec![1],
            angles: [-90.0, 90.0, 0.5],
            angle_snr_db: 20.0,
            seed: 0,
        }
    }
}

/// Inclusive `[start, stop]` range with `step`.
pub fn sweep(range: [f64; 3]) -> Result<Vec<f64>> {
    let [lo, hi, step] = range;
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::Config(format!("bad sweep {range:?}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

fn check_angle(field: &str, a: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&a) {
        return Err(config_err(field, format!("angle {a} outside [-90, 90]")));
    }
    Ok(())
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    s.validate()?;
    Ok(s)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let k = self.geometry.candidates;
        if k == 0 {
            return Err(config_err("geometry.candidates", "must be positive"));
        }
        if !(self.geometry.spacing > 0.0) {
            return Err(config_err("geometry.spacing", "must be positive"));
        }
        let d = &self.design;
        if d.budget == 0 || d.budget > k {
            return Err(config_err("design.budget", format!("{} outside (0, {k}]", d.budget)));
        }
        if d.kind == DesignKind::Shared && d.budget == k {
            return Err(config_err("design.budget", "shared aperture needs budget < candidates"));
        }
        check_angle("design.target", d.target)?;
        check_angle("design.comm_direction", d.comm_direction)?;
        if let Some([lo, hi]) = d.sector {
            check_angle("design.sector", lo)?;
            check_angle("design.sector", hi)?;
            if lo >= hi {
                return Err(config_err("design.sector", "empty sector"));
            }
        }
        if d.beam == BeamKind::Flattop && d.sector.is_none() {
            return Err(config_err("design.sector", "required for a flat-top beam"));
        }
        if d.kind != DesignKind::Single && d.beam == BeamKind::Flattop {
            return Err(config_err("design.beam", "multi and shared designs use focused beams"));
        }
        if !(d.ripple_db > 0.0) {
            return Err(config_err("design.ripple_db", "must be positive"));
        }
        if let Some([lo, hi]) = self.grid.mainlobe {
            check_angle("grid.mainlobe", lo)?;
            check_angle("grid.mainlobe", hi)?;
            if lo > hi {
                return Err(config_err("grid.mainlobe", "lower edge above upper edge"));
            }
        }
        for (field, v) in [
            ("grid.mainlobe_step", self.grid.mainlobe_step),
            ("grid.sidelobe_step", self.grid.sidelobe_step),
        ] {
            if !(v > 0.0) {
                return Err(config_err(field, "must be positive"));
            }
        }
        if d.kind == DesignKind::Single && self.dictionary.is_none() {
            return Err(config_err("dictionary", "required for a single-beamformer design"));
        }
        if let Some(dict) = &self.dictionary {
            dict.build().map_err(|e| config_err("dictionary", e))?;
        }
        if let Some(dict) = &self.ber.dictionary {
            dict.build().map_err(|e| config_err("ber.dictionary", e))?;
        }
        self.selection_config()
            .validate()
            .map_err(|e| config_err("selection", e))?;
        self.channel_model(0.0)
            .validate()
            .map_err(|e| config_err("channel", e))?;
        if self.ber.trials == 0 {
            return Err(config_err("ber.trials", "must be at least 1"));
        }
        if self.ber.waveforms.contains(&0) {
            return Err(config_err("ber.waveforms", "entries must be at least 1"));
        }
        sweep(self.ber.snr_db).map_err(|e| config_err("ber.snr_db", e))?;
        sweep(self.ber.angles).map_err(|e| config_err("ber.angles", e))?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::ula(self.geometry.candidates, self.geometry.spacing)
    }

    pub fn selection_config(&self) -> SelectionConfig {
        SelectionConfig {
            gamma: self.selection.gamma,
            delta: self.selection.delta,
            max_iters: self.selection.max_iters,
            restarts: self.selection.restarts,
            seed: self.selection.seed,
            ..SelectionConfig::default()
        }
    }

    pub fn channel_model(&self, snr_db: f64) -> ChannelModel {
        ChannelModel {
            beta: Complex64::new(self.channel.beta[0], self.channel.beta[1]),
            transmit_power: self.channel.transmit_power,
            prf: self.channel.prf,
            random_phase: self.channel.random_phase,
            ..ChannelModel::default()
        }
        .with_snr_db(snr_db)
    }

    pub fn dictionary(&self) -> Result<Option<SymbolDictionary>> {
        self.dictionary.as_ref().map(DictionaryConfig::build).transpose()
    }

    pub fn ber_dictionary(&self) -> Result<SymbolDictionary> {
        self.ber
            .dictionary
            .as_ref()
            .or(self.dictionary.as_ref())
            .ok_or_else(|| config_err("ber.dictionary", "no dictionary for the link simulation"))?
            .build()
    }

    fn radar_mainlobe(&self) -> (f64, f64) {
        match (self.grid.mainlobe, self.design.beam, self.design.sector) {
            (Some([lo, hi]), _, _) => (lo, hi),
            (None, BeamKind::Flattop, Some([lo, hi])) => (lo, hi),
            _ => (self.design.target - 4.0, self.design.target + 4.0),
        }
    }

    /// Labelled grid of the radar beam.
    pub fn radar_grid(&self) -> Result<AngularGrid> {
        let (lo, hi) = self.radar_mainlobe();
        let mut b = GridBuilder::new(lo, hi);
        b.mainlobe_step = self.grid.mainlobe_step;
        b.sidelobe_step = self.grid.sidelobe_step;
        b.transition = self.grid.transition;
        let c = self.design.comm_direction;
        if self.grid.comm_exclusion > 0.0 {
            b.exclusions.push((c, self.grid.comm_exclusion));
        }
        if c < lo || c > hi {
            b.extra_sidelobe.push(c);
        }
        b.build()
    }

    /// Labelled grid of the communication beam of a multi or shared design.
    pub fn comm_grid(&self) -> Result<AngularGrid> {
        let c = self.design.comm_direction;
        let h = self.grid.comm_mainlobe;
        let mut b = GridBuilder::new((c - h).max(-90.0), (c + h).min(90.0));
        b.mainlobe_step = self.grid.mainlobe_step;
        b.sidelobe_step = self.grid.sidelobe_step;
        b.transition = self.grid.comm_transition;
        b.sidelobe_label = Region::CommSidelobe;
        b.extra_sidelobe.push(self.design.target);
        b.build()
    }

    /// Symbol embedded while selecting the array of a single design.
    pub fn selection_symbol(&self) -> Result<Option<Complex64>> {
        if let Some([m, p]) = self.design.selection_symbol {
            return Ok(Some(Complex64::from_polar(m, p.to_radians())));
        }
        Ok(self.dictionary()?.and_then(|d| {
            d.symbols()
                .iter()
                .copied()
                .reduce(|a, b| if b.norm() > a.norm() { b } else { a })
        }))
    }

    /// Radar beam spec without a symbol.
    pub fn radar_spec(&self) -> Result<PatternSpec> {
        let grid = self.radar_grid()?;
        let rho = db_to_linear(self.design.sidelobe_db);
        Ok(match self.design.beam {
            BeamKind::Focused => PatternSpec::focused(self.design.target, grid, rho),
            BeamKind::Flattop => {
                let [lo, hi] = self.design.sector.expect("validated");
                PatternSpec::flattop((lo, hi), grid, rho, ripple_bound_from_db(self.design.ripple_db))
            }
        })
    }

    /// Communication beam spec: unit gain toward `θ_c`.
    pub fn comm_spec(&self) -> Result<PatternSpec> {
        Ok(PatternSpec::focused(
            self.design.comm_direction,
            self.comm_grid()?,
            db_to_linear(self.design.sidelobe_db),
        ))
    }

    /// Joint selection problem described by the scenario.
    pub fn joint_design(&self) -> Result<JointDesign> {
        let geometry = self.geometry()?;
        let radar = self.radar_spec()?;
        let c = self.design.comm_direction;
        let budget = self.design.budget;
        Ok(match self.design.kind {
            DesignKind::Single => {
                let spec = match self.selection_symbol()? {
                    Some(s) => radar.with_symbol(c, s),
                    None => radar,
                };
                JointDesign::single(geometry, spec, budget)
            }
            DesignKind::Multi => JointDesign::multi(
                geometry,
                radar.with_symbol(c, Complex64::new(0.0, 0.0)),
                self.comm_spec()?,
                budget,
            ),
            DesignKind::Shared => JointDesign::shared(
                geometry,
                radar.with_symbol(c, Complex64::new(0.0, 0.0)),
                self.comm_spec()?,
                budget,
            ),
        })
    }

    /// Shape of the radar beam.
    pub fn radar_shape(&self) -> Result<BeamShape> {
        Ok(self.radar_spec()?.shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "minimal",
        "design": {"kind": "single", "budget": 10, "comm_direction": -40},
        "dictionary": {"scheme": "am", "levels": [0.05, 0.03]}
    }"#;

    #[test]
    fn defaults_applied() {
        let s = parse_scenario_str(MINIMAL).unwrap();
        assert_eq!(s.geometry.candidates, 40);
        assert_eq!(s.geometry.spacing, 0.25);
        assert_eq!(s.design.sidelobe_db, -20.0);
        assert_eq!(s.selection.restarts, 10);
        assert_eq!(s.selection.max_iters, 30);
        assert_eq!(s.selection_symbol().unwrap(), Some(Complex64::new(0.05, 0.0)));
        let g = s.radar_grid().unwrap();
        let i = g.angles().iter().position(|&a| a == -40.0).unwrap();
        assert_eq!(g.labels()[i], Region::Transition);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replace("\"name\"", "\"nmae\": 1, \"name\"");
        let e = parse_scenario_str(&bad).unwrap_err().to_string();
        assert!(e.contains("nmae"), "{e}");
        let bad = MINIMAL.replace("\"budget\"", "\"budgte\": 3, \"budget\"");
        assert!(parse_scenario_str(&bad).is_err());
    }

    #[test]
    fn budget_over_candidates_rejected() {
        let bad = MINIMAL.replace("\"budget\": 10", "\"budget\": 41");
        let e = parse_scenario_str(&bad).unwrap_err().to_string();
        assert!(e.contains("design.budget"), "{e}");
    }

    #[test]
    fn angle_range_checked() {
        let bad = MINIMAL.replace("-40", "-95");
        let e = parse_scenario_str(&bad).unwrap_err().to_string();
        assert!(e.contains("design.comm_direction"), "{e}");
    }

    #[test]
    fn flattop_needs_sector() {
        let bad = MINIMAL.replace("\"kind\": \"single\"", "\"kind\": \"single\", \"beam\": \"flattop\"");
        assert!(parse_scenario_str(&bad).is_err());
    }

    #[test]
    fn sweeps_are_inclusive() {
        assert_eq!(sweep([0.0, 2.0, 0.5]).unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(sweep([0.0, 1.0, 0.0]).is_err());
    }
}
