//! Assembles beampattern design constraints for one or more beamformers,
//! optionally coupled to an antenna selection vector, into a [`ConicProblem`].
//!
//! All beamformers share one sidelobe slack `α`: every sidelobe sample obeys
//! `|w^H a(θ)| ≤ ρ + α` and the objective is `α` plus, when a selection is
//! present, the linearized binary-promoting penalty
//! `γ [rᵀ(1 − 2 r_k) + r_kᵀ r_k]`.

use std::ops::Range;

use num_complex::Complex64;

use crate::array::ArrayGeometry;
use crate::conic::{solve, AffineExpr, ComplexVar, ConicProblem, ConicSolution, SolveStatus};
use crate::error::{Error, Result};

/// How the mainlobe of a beam is pinned.
#[derive(Debug, Clone, PartialEq)]
pub enum MainlobeConstraint {
    /// `w^H a(θ) = gain`.
    Point { angle: f64, gain: Complex64 },
    /// `|w^H a(θ_i) − e^{jμ_i}| ≤ ripple` for every sample.
    Band {
        angles: Vec<f64>,
        phases: Vec<f64>,
        ripple: f64,
    },
}

/// Everything one beamformer has to satisfy.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamRequirements {
    pub mainlobe: MainlobeConstraint,
    pub sidelobe_angles: Vec<f64>,
    /// Exact complex gains (symbols, nulls, unit gain toward a user).
    pub equalities: Vec<(f64, Complex64)>,
}

/// How a beam's element powers are tied to the selection vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// `|w_m|² ≤ r_m`.
    Common,
    /// `|w_m|² ≤ 1 − r_m`.
    Complementary,
}

/// Relaxed selection variables and the linearized concave penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTerms {
    pub budget: usize,
    /// Current binary iterate `r_k` the penalty is linearized around.
    pub anchor: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct Formulation<'a> {
    pub geometry: &'a ArrayGeometry,
    /// `ρ` on a linear scale.
    pub sidelobe_level: f64,
    /// Upper bound on `α` (`Some(0.0)` makes `ρ` a hard limit).
    pub alpha_cap: Option<f64>,
    /// `|w_m| ≤ bound` for beams that are not coupled to a selection.
    pub weight_bound: Option<f64>,
    pub beams: Vec<(BeamRequirements, Option<Coupling>)>,
    pub selection: Option<SelectionTerms>,
    /// Binary configuration the coupled beams must respect when no relaxed
    /// selection is optimized. Entries outside a beam's allowed set are
    /// pinned to zero; the rest obey `weight_bound`.
    pub fixed_selection: Option<Vec<bool>>,
}

/// Where each block of unknowns lives in the built problem.
#[derive(Debug, Clone)]
pub struct Layout {
    pub alpha: usize,
    pub beams: Vec<ComplexVar>,
    /// Candidate indices each beam's variables stand for.
    pub members: Vec<Vec<usize>>,
    pub selection: Option<Range<usize>>,
}

/// Extracted optimum of a [`Formulation`].
#[derive(Debug, Clone)]
pub struct SolvedDesign {
    pub weights: Vec<Vec<Complex64>>,
    pub alpha: f64,
    pub selection: Option<Vec<f64>>,
    pub objective: f64,
    /// The backend stalled short of its tolerance but the point satisfies
    /// every constraint within [`INEXACT_FEASIBILITY`] with a small gap.
    pub inexact: bool,
    pub solution: ConicSolution,
}

pub const INEXACT_FEASIBILITY: f64 = 1e-6;
pub const INEXACT_GAP: f64 = 1e-5;

const SAME_ANGLE: f64 = 1e-9;

impl Formulation<'_> {
    pub fn build(&self) -> Result<(ConicProblem, Layout)> {
        let k = self.geometry.len();
        if !(self.sidelobe_level > 0.0) {
            return Err(Error::domain("sidelobe level must be positive"));
        }
        let mut p = ConicProblem::new();
        let alpha = p.add_variable();
        p.set_objective(alpha, 1.0)?;
        // |w^H a| ≥ 0 already implies α ≥ −ρ; stating it keeps sidelobe-free problems bounded
        p.set_bounds(alpha, Some(-self.sidelobe_level), self.alpha_cap)?;

        let selection = match &self.selection {
            Some(sel) => {
                if sel.anchor.len() != k {
                    return Err(Error::dim("selection anchor", k, sel.anchor.len()));
                }
                if sel.budget == 0 || sel.budget > k {
                    return Err(Error::domain(format!(
                        "selection budget {} outside (0, {k}]",
                        sel.budget
                    )));
                }
                let r = p.add_variables(k);
                let mut sum = Vec::with_capacity(k);
                for (m, var) in r.clone().enumerate() {
                    p.set_bounds(var, Some(0.0), Some(1.0))?;
                    p.set_objective(var, sel.gamma * (1.0 - 2.0 * sel.anchor[m]))?;
                    sum.push((var, 1.0));
                }
                p.add_objective_constant(sel.gamma * sel.anchor.iter().map(|x| x * x).sum::<f64>());
                p.add_equality(sum, sel.budget as f64)?;
                Some(r)
            }
            None => None,
        };

        let mut beams = Vec::with_capacity(self.beams.len());
        let mut members = Vec::with_capacity(self.beams.len());
        for (req, coupling) in &self.beams {
            // a fixed configuration drops the switched-off antennas entirely
            let idx: Vec<usize> = match (coupling, &selection, &self.fixed_selection) {
                (Some(c), None, Some(fixed)) => {
                    if fixed.len() != k {
                        return Err(Error::dim("fixed selection", k, fixed.len()));
                    }
                    (0..k)
                        .filter(|&m| match c {
                            Coupling::Common => fixed[m],
                            Coupling::Complementary => !fixed[m],
                        })
                        .collect()
                }
                (Some(_), None, None) => {
                    return Err(Error::domain("beam coupled to a selection that is not present"));
                }
                _ => (0..k).collect(),
            };
            let w = p.add_complex_vector(idx.len());
            self.add_beam(&mut p, w, &idx, alpha, req)?;
            match (coupling, &selection) {
                (Some(c), Some(r)) => {
                    for m in 0..k {
                        let rm = r.start + m;
                        let s = match c {
                            Coupling::Common => AffineExpr::var(rm),
                            Coupling::Complementary => AffineExpr::default().term(rm, -1.0).plus(1.0),
                        };
                        p.add_weight_power_bound(w, m, s)?;
                    }
                }
                _ => {
                    let bound = match coupling {
                        Some(_) => Some(self.weight_bound.unwrap_or(1.0)),
                        None => self.weight_bound,
                    };
                    if let Some(b) = bound {
                        for m in 0..idx.len() {
                            p.add_weight_power_bound(w, m, AffineExpr::constant(b * b))?;
                        }
                    }
                }
            }
            beams.push(w);
            members.push(idx);
        }
        Ok((
            p,
            Layout {
                alpha,
                beams,
                members,
                selection,
            },
        ))
    }

    fn add_beam(
        &self,
        p: &mut ConicProblem,
        w: ComplexVar,
        members: &[usize],
        alpha: usize,
        req: &BeamRequirements,
    ) -> Result<()> {
        let g = self.geometry;
        let steer = |t: f64| -> Result<Vec<Complex64>> {
            let a = g.steering_vector(t)?;
            Ok(members.iter().map(|&m| a[m]).collect())
        };
        let pinned = |angle: f64| req.equalities.iter().any(|&(t, _)| (t - angle).abs() < SAME_ANGLE);
        match &req.mainlobe {
            MainlobeConstraint::Point { angle, gain } => {
                p.add_complex_equality(&steer(*angle)?, *gain, w)?;
            }
            MainlobeConstraint::Band { angles, phases, ripple } => {
                if angles.len() != phases.len() {
                    return Err(Error::dim("mainlobe phase profile", angles.len(), phases.len()));
                }
                for (&t, &mu) in angles.iter().zip(phases) {
                    if pinned(t) {
                        continue;
                    }
                    p.add_complex_deviation_bound(
                        &steer(t)?,
                        Complex64::from_polar(1.0, mu),
                        AffineExpr::constant(*ripple),
                        w,
                    )?;
                }
            }
        }
        for &t in &req.sidelobe_angles {
            if pinned(t) {
                continue;
            }
            p.add_complex_modulus_bound(&steer(t)?, AffineExpr::var(alpha).plus(self.sidelobe_level), w)?;
        }
        for &(t, gain) in &req.equalities {
            p.add_complex_equality(&steer(t)?, gain, w)?;
        }
        Ok(())
    }

    /// Builds, solves and unpacks. Infeasibility and solver trouble become
    /// errors.
    pub fn solve(&self, tol: f64) -> Result<SolvedDesign> {
        let (problem, layout) = self.build()?;
        let solution = solve(&problem, tol)?;
        let near = solution.residuals.primal <= INEXACT_FEASIBILITY && solution.residuals.gap.abs() <= INEXACT_GAP;
        let inexact = match solution.status {
            SolveStatus::Optimal => false,
            SolveStatus::NumericalFailure | SolveStatus::MaxIters if near => true,
            SolveStatus::Infeasible => return Err(Error::Infeasible("design constraints admit no solution".into())),
            other => {
                return Err(Error::Solver(format!(
                    "solver stopped with {other:?} ({}, primal residual {:.2e}, dual {:.2e}, gap {:.2e})",
                    solution.detail, solution.residuals.primal, solution.residuals.dual, solution.residuals.gap
                )))
            }
        };
        let x = &solution.primal;
        let k = self.geometry.len();
        Ok(SolvedDesign {
            weights: layout
                .beams
                .iter()
                .zip(&layout.members)
                .map(|(b, idx)| {
                    let mut full = vec![Complex64::new(0.0, 0.0); k];
                    for (&m, v) in idx.iter().zip(b.extract(x)) {
                        full[m] = v;
                    }
                    full
                })
                .collect(),
            alpha: x[layout.alpha],
            selection: layout.selection.map(|r| x[r].to_vec()),
            objective: solution.objective_value,
            inexact,
            solution,
        })
    }
}
