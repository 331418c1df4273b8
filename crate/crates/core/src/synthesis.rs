//! Beamformer design on a fixed array: focused and flat-top transmit
//! patterns with a communication symbol embedded toward `θ_c`, plus the
//! alternating-descent refinement of the flat-top mainlobe phase profile.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::{pattern_at_angles, AngularGrid, ArrayGeometry, Beamformer};
use crate::conic::DEFAULT_TOLERANCE;
use crate::error::{Error, Result};
use crate::formulation::{BeamRequirements, Formulation, MainlobeConstraint};

pub const DEFAULT_OUTER_ITERS: usize = 50;
pub const DEFAULT_OUTER_DELTA: f64 = 1e-4;

const CAP_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamShape {
    Focused { target: f64 },
    FlatTop { sector: (f64, f64) },
}

/// Requirements for one transmit beam.
#[derive(Debug, Clone)]
pub struct PatternSpec {
    pub shape: BeamShape,
    /// Mainlobe/sidelobe/transition labels used for constraints and metrics.
    pub grid: AngularGrid,
    /// `ρ`, linear.
    pub sidelobe_level: f64,
    /// `ε`, absolute deviation allowed over a flat-top mainlobe.
    pub ripple_bound: f64,
    pub comm_direction: Option<f64>,
    /// `Δ e^{jφ}` delivered toward `comm_direction`.
    pub symbol: Option<Complex64>,
    /// Upper bound on the sidelobe slack `α`; `Some(0.0)` enforces `ρ`.
    pub alpha_cap: Option<f64>,
    /// Per-element weight magnitude limit.
    pub weight_bound: Option<f64>,
    pub tolerance: f64,
    pub outer_delta: f64,
}

/// Absolute flat-top deviation whose magnitude band `[1 − ε, 1 + ε]` spans
/// `ripple_db` peak to peak (approximately, for small ripples).
pub fn ripple_bound_from_db(ripple_db: f64) -> f64 {
    (10f64.powf(ripple_db / 40.0) - 10f64.powf(-ripple_db / 40.0)) / 2.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

impl PatternSpec {
    pub fn focused(target: f64, grid: AngularGrid, sidelobe_level: f64) -> Self {
        Self::with_shape(BeamShape::Focused { target }, grid, sidelobe_level, 0.0)
    }

    pub fn flattop(sector: (f64, f64), grid: AngularGrid, sidelobe_level: f64, ripple_bound: f64) -> Self {
        Self::with_shape(BeamShape::FlatTop { sector }, grid, sidelobe_level, ripple_bound)
    }

    fn with_shape(shape: BeamShape, grid: AngularGrid, sidelobe_level: f64, ripple_bound: f64) -> Self {
        Self {
            shape,
            grid,
            sidelobe_level,
            ripple_bound,
            comm_direction: None,
            symbol: None,
            alpha_cap: Some(0.0),
            weight_bound: Some(1.0),
            tolerance: DEFAULT_TOLERANCE,
            outer_delta: DEFAULT_OUTER_DELTA,
        }
    }

    pub fn with_symbol(mut self, comm_direction: f64, symbol: Complex64) -> Self {
        self.comm_direction = Some(comm_direction);
        self.symbol = Some(symbol);
        self
    }

    /// Same spec carrying a different symbol.
    pub fn for_symbol(&self, symbol: Complex64) -> Self {
        let mut s = self.clone();
        s.symbol = Some(symbol);
        s
    }

    pub fn uncapped(&self) -> Self {
        let mut s = self.clone();
        s.alpha_cap = None;
        s
    }

    pub fn is_flattop(&self) -> bool {
        matches!(self.shape, BeamShape::FlatTop { .. })
    }

    /// Whether `θ_c` lies inside the mainlobe sector (flat-top) or on the
    /// focus direction.
    pub fn comm_in_mainlobe(&self) -> bool {
        match (self.comm_direction, self.shape) {
            (Some(c), BeamShape::FlatTop { sector: (lo, hi) }) => c >= lo && c <= hi,
            (Some(c), BeamShape::Focused { target }) => (c - target).abs() < 1e-9,
            _ => false,
        }
    }

    /// Checks the spec; returns human-readable warnings for questionable but
    /// solvable settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !(self.sidelobe_level > 0.0) {
            return Err(Error::domain("sidelobe level must be positive"));
        }
        if self.is_flattop() && !(self.ripple_bound > 0.0) {
            return Err(Error::domain("flat-top ripple bound must be positive"));
        }
        if let BeamShape::FlatTop { sector: (lo, hi) } = self.shape {
            if lo >= hi {
                return Err(Error::domain("flat-top sector is empty"));
            }
            if self.grid.mainlobe_angles().len() < 2 {
                return Err(Error::domain("flat-top mainlobe needs at least two samples"));
            }
        }
        if self.symbol.is_some() != self.comm_direction.is_some() {
            return Err(Error::domain(
                "symbol and communication direction must be given together",
            ));
        }
        if let Some(sym) = self.symbol {
            if self.comm_in_mainlobe() {
                if (sym.norm() - 1.0).abs() > self.ripple_bound.max(1e-9) {
                    warnings.push(format!(
                        "symbol magnitude {} toward a mainlobe user deviates from unit gain",
                        sym.norm()
                    ));
                }
            } else if sym.norm() > self.sidelobe_level {
                let msg = format!(
                    "symbol level {} exceeds sidelobe level {}",
                    sym.norm(),
                    self.sidelobe_level
                );
                if self.alpha_cap.is_some_and(|c| c <= 0.0) {
                    return Err(Error::Infeasible(msg));
                }
                warnings.push(msg);
            }
        }
        Ok(warnings)
    }

    pub(crate) fn requirements(&self, profile: &PhaseProfile) -> BeamRequirements {
        let mainlobe = match self.shape {
            BeamShape::Focused { target } => MainlobeConstraint::Point {
                angle: target,
                gain: Complex64::from_polar(1.0, profile.phases.first().copied().unwrap_or(0.0)),
            },
            BeamShape::FlatTop { .. } => MainlobeConstraint::Band {
                angles: profile.angles.clone(),
                phases: profile.phases.clone(),
                ripple: self.ripple_bound,
            },
        };
        let equalities = match (self.comm_direction, self.symbol) {
            (Some(c), Some(s)) => vec![(c, s)],
            _ => Vec::new(),
        };
        BeamRequirements {
            mainlobe,
            sidelobe_angles: self.grid.sidelobe_angles(),
            equalities,
        }
    }

    pub(crate) fn formulation<'a>(&self, geometry: &'a ArrayGeometry, profile: &PhaseProfile) -> Formulation<'a> {
        Formulation {
            geometry,
            sidelobe_level: self.sidelobe_level,
            alpha_cap: self.alpha_cap,
            weight_bound: self.weight_bound,
            beams: vec![(self.requirements(profile), None)],
            selection: None,
            fixed_selection: None,
        }
    }
}

/// Desired mainlobe phase `μ(θ)` at the constrained mainlobe samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    pub angles: Vec<f64>,
    pub phases: Vec<f64>,
}

/// Starting profile: `μ(θ_t) = 0` for a focused beam, `μ(θ_i) = −2π sin θ_i`
/// over the flat-top samples, with the phase reference moved to the centre
/// of `geometry`'s aperture. When the communication user sits inside a
/// flat-top sector the profile is rotated so it passes through the symbol
/// phase at `θ_c`.
pub fn init_phase_profile(spec: &PatternSpec, geometry: &ArrayGeometry) -> PhaseProfile {
    match spec.shape {
        BeamShape::Focused { target } => PhaseProfile {
            angles: vec![target],
            phases: vec![0.0],
        },
        BeamShape::FlatTop { .. } => {
            let pos = geometry.positions();
            let centre = (pos[0] + pos[pos.len() - 1]) as f64 / 2.0;
            let slope = geometry.wavenumber_times_d() * centre - 2.0 * PI;
            let mu = |t: f64| slope * t.to_radians().sin();
            let shift = match (spec.comm_direction, spec.symbol) {
                (Some(c), Some(s)) if spec.comm_in_mainlobe() => s.arg() - mu(c),
                _ => 0.0,
            };
            let angles = spec.grid.mainlobe_angles();
            let phases = angles.iter().map(|&t| mu(t) + shift).collect();
            PhaseProfile { angles, phases }
        }
    }
}

/// `e^{jμ(θ_i)} = w^H a(θ_i) / |w^H a(θ_i)|`.
pub fn update_phase_profile(weights: &[Complex64], geometry: &ArrayGeometry, angles: &[f64]) -> Result<PhaseProfile> {
    let gains = pattern_at_angles(weights, geometry, angles)?;
    let mut phases = Vec::with_capacity(gains.len());
    for (g, t) in gains.iter().zip(angles) {
        if g.norm() == 0.0 {
            return Err(Error::domain(format!("zero mainlobe gain at {t} deg")));
        }
        phases.push(g.arg());
    }
    Ok(PhaseProfile {
        angles: angles.to_vec(),
        phases,
    })
}

/// Outcome of a fixed-array design.
#[derive(Debug, Clone)]
pub struct FixedDesign {
    pub beamformer: Beamformer,
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `α` after every outer iteration.
    pub alpha_history: Vec<f64>,
    pub profile: PhaseProfile,
}

fn solve_once(geometry: &ArrayGeometry, spec: &PatternSpec, profile: &PhaseProfile) -> Result<(Vec<Complex64>, f64)> {
    match spec.formulation(geometry, profile).solve(spec.tolerance) {
        Ok(mut d) => Ok((d.weights.remove(0), d.alpha)),
        Err(Error::Infeasible(_)) => Err(Error::Infeasible(diagnose(geometry, spec, profile))),
        Err(e) => Err(e),
    }
}

/// Names the constraint groups that cannot be met, by re-solving with
/// groups removed.
fn diagnose(geometry: &ArrayGeometry, spec: &PatternSpec, profile: &PhaseProfile) -> String {
    let feasible = |s: &PatternSpec| s.formulation(geometry, profile).solve(s.tolerance).is_ok();
    let mut bare = spec.clone();
    bare.symbol = None;
    bare.comm_direction = None;
    let mainlobe = match spec.shape {
        BeamShape::Focused { target } => format!("unit gain at {target} deg"),
        BeamShape::FlatTop { sector } => format!("ripple bound over [{}, {}] deg", sector.0, sector.1),
    };
    let cap = spec.alpha_cap.map_or(String::new(), |c| {
        format!(
            " with sidelobes capped at {:.2} dB",
            20.0 * (spec.sidelobe_level + c).log10()
        )
    });
    if !feasible(&bare) {
        return format!("{mainlobe}{cap} is infeasible on this array");
    }
    if let (Some(c), Some(s)) = (spec.comm_direction, spec.symbol) {
        let mut uncapped = spec.clone();
        uncapped.alpha_cap = None;
        if feasible(&uncapped) {
            return format!(
                "symbol {:.4}∠{:.4} at {c} deg forces sidelobes above the cap{cap}",
                s.norm(),
                s.arg()
            );
        }
        return format!(
            "symbol {:.4}∠{:.4} at {c} deg conflicts with {mainlobe}",
            s.norm(),
            s.arg()
        );
    }
    format!("{mainlobe}{cap} is infeasible")
}

/// Focused beam: unit complex gain toward the target, minimal sidelobe slack.
pub fn design_focused(geometry: &ArrayGeometry, spec: &PatternSpec) -> Result<FixedDesign> {
    if spec.is_flattop() {
        return Err(Error::domain("design_focused needs a focused spec"));
    }
    spec.validate()?;
    let profile = init_phase_profile(spec, geometry);
    let (w, alpha) = solve_once(geometry, &spec.uncapped(), &profile)?;
    enforce_cap(
        geometry,
        spec,
        FixedDesign {
            beamformer: Beamformer::new(w),
            alpha,
            iterations: 1,
            converged: true,
            alpha_history: vec![alpha],
            profile,
        },
    )
}

/// The designs minimize `α` without its cap (the optimum is the same
/// whenever the capped problem is feasible); the cap is checked afterwards.
fn enforce_cap(geometry: &ArrayGeometry, spec: &PatternSpec, design: FixedDesign) -> Result<FixedDesign> {
    match spec.alpha_cap {
        Some(cap) if design.alpha > cap + CAP_SLACK => Err(Error::Infeasible(format!(
            "{} (best sidelobe level {:.2} dB after {} iteration(s))",
            diagnose(geometry, spec, &design.profile),
            20.0 * (spec.sidelobe_level + design.alpha).log10(),
            design.iterations
        ))),
        _ => Ok(design),
    }
}

/// Flat-top beam with alternating descent: solve for `w` with the current
/// profile, re-align the profile to the achieved mainlobe phase, repeat
/// until the weights move less than `spec.outer_delta`.
pub fn design_flattop(geometry: &ArrayGeometry, spec: &PatternSpec, max_outer_iters: usize) -> Result<FixedDesign> {
    if !spec.is_flattop() {
        return Err(Error::domain("design_flattop needs a flat-top spec"));
    }
    spec.validate()?;
    let mut profile = init_phase_profile(spec, geometry);
    let mut history = Vec::new();
    let mut prev: Option<Vec<Complex64>> = None;
    let mut converged = false;
    let max_iters = max_outer_iters.max(1);
    let mut iterations = 0;
    let free = spec.uncapped();
    loop {
        let (w, alpha) = solve_once(geometry, &free, &profile)?;
        iterations += 1;
        history.push(alpha);
        let moved = prev.as_ref().map(|p| weight_distance(p, &w));
        let next = refresh_profile(&w, geometry, spec, &profile)?;
        if moved.is_some_and(|d| d <= spec.outer_delta) {
            converged = true;
        }
        if converged || iterations >= max_iters {
            let design = FixedDesign {
                beamformer: Beamformer::new(w),
                alpha,
                iterations,
                converged,
                alpha_history: history,
                profile,
            };
            return enforce_cap(geometry, spec, design);
        }
        profile = next;
        prev = Some(w);
    }
}

/// Phase update that leaves samples pinned by a symbol equality untouched.
pub(crate) fn refresh_profile(
    w: &[Complex64],
    geometry: &ArrayGeometry,
    spec: &PatternSpec,
    profile: &PhaseProfile,
) -> Result<PhaseProfile> {
    if !spec.is_flattop() {
        return Ok(profile.clone());
    }
    update_phase_profile(w, geometry, &profile.angles)
}

pub(crate) fn weight_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Focused or flat-top design depending on the spec.
pub fn design(geometry: &ArrayGeometry, spec: &PatternSpec) -> Result<FixedDesign> {
    match spec.shape {
        BeamShape::Focused { .. } => design_focused(geometry, spec),
        BeamShape::FlatTop { .. } => design_flattop(geometry, spec, DEFAULT_OUTER_ITERS),
    }
}

/// One beamformer per dictionary symbol on a fixed array.
pub fn design_symbol_bank(
    geometry: &ArrayGeometry,
    spec: &PatternSpec,
    symbols: &[Complex64],
) -> Result<Vec<FixedDesign>> {
    if spec.comm_direction.is_none() && !symbols.is_empty() {
        return Err(Error::domain("symbol bank needs a communication direction"));
    }
    symbols
        .par_iter()
        .enumerate()
        .map(|(k, &s)| {
            design(geometry, &spec.for_symbol(s)).map_err(|e| match e {
                Error::Infeasible(msg) => Error::Infeasible(format!("symbol {k}: {msg}")),
                other => other,
            })
        })
        .collect()
}
