//! Joint antenna selection and beamforming.
//!
//! The binary selection is handled by sequential convex programming: each
//! subproblem relaxes `r` to `[0, 1]` with a linearized concave penalty, and
//! the next binary iterate comes from a swap rule driven by the solved
//! weight magnitudes. Every binary iterate is scored with a fixed-array
//! solve, and the best configuration over all iterates and restarts wins.

use std::io::Write;

use itertools::Itertools;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::array::{pattern, peak_sidelobe_level, ArrayGeometry, Beamformer, SelectionVector};
use crate::conic::{ConicProblem, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::formulation::{Coupling, Formulation, SelectionTerms};
use crate::synthesis::{init_phase_profile, refresh_profile, weight_distance, PatternSpec, PhaseProfile};

/// Largest number of subsets [`exhaustive_select`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    /// Penalty weight `γ` on the binary-promoting term.
    pub gamma: f64,
    /// Stop a start once `‖w^{(k+1)} − w^{(k)}‖₂ ≤ delta`.
    pub delta: f64,
    /// Iterations per start (`Q`).
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// `γ` is multiplied by this when a converged relaxed `r` is still far
    /// from binary.
    pub gamma_growth: f64,
    /// `max_m min(r_m, 1 − r_m)` above which the relaxed `r` counts as far
    /// from binary.
    pub binary_gap: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            delta: 1e-4,
            max_iters: 30,
            restarts: 10,
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
            gamma_growth: 2.0,
            binary_gap: 0.1,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !(self.delta > 0.0) {
            return Err(Error::domain("selection needs gamma >= 0 and delta > 0"));
        }
        if self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::domain("selection needs at least one iteration and one start"));
        }
        Ok(())
    }
}

/// Beams to be designed jointly on one candidate grid.
#[derive(Debug, Clone)]
pub struct JointDesign {
    pub geometry: ArrayGeometry,
    /// The first beam is the radar beam; its grid and `ρ` define the reported
    /// PSL and the shared sidelobe level.
    pub beams: Vec<(PatternSpec, Coupling)>,
    pub budget: usize,
}

impl JointDesign {
    pub fn single(geometry: ArrayGeometry, spec: PatternSpec, budget: usize) -> Self {
        Self {
            geometry,
            beams: vec![(spec, Coupling::Common)],
            budget,
        }
    }

    /// Radar and communication beamformers drawing on one selected array.
    pub fn multi(geometry: ArrayGeometry, radar: PatternSpec, comm: PatternSpec, budget: usize) -> Self {
        Self {
            geometry,
            beams: vec![(radar, Coupling::Common), (comm, Coupling::Common)],
            budget,
        }
    }

    /// Radar on the selected antennas, communications on the rest.
    pub fn shared(geometry: ArrayGeometry, radar: PatternSpec, comm: PatternSpec, radar_budget: usize) -> Self {
        Self {
            geometry,
            beams: vec![(radar, Coupling::Common), (comm, Coupling::Complementary)],
            budget: radar_budget,
        }
    }

    fn validate(&self) -> Result<()> {
        let k = self.geometry.len();
        if self.beams.is_empty() {
            return Err(Error::domain("joint design needs at least one beam"));
        }
        if self.budget == 0 || self.budget > k {
            return Err(Error::domain(format!("budget {} outside (0, {k}]", self.budget)));
        }
        if self.is_shared() && self.budget == k {
            return Err(Error::domain(
                "shared aperture needs at least one communication antenna",
            ));
        }
        for (spec, _) in &self.beams {
            spec.validate()?;
        }
        Ok(())
    }

    fn is_shared(&self) -> bool {
        self.beams.iter().any(|(_, c)| *c == Coupling::Complementary)
    }

    fn initial_profiles(&self) -> Vec<PhaseProfile> {
        self.beams
            .iter()
            .map(|(s, _)| init_phase_profile(s, &self.geometry))
            .collect()
    }

    fn formulation(&self, profiles: &[PhaseProfile]) -> Formulation<'_> {
        let (lead, _) = &self.beams[0];
        Formulation {
            geometry: &self.geometry,
            sidelobe_level: lead.sidelobe_level,
            alpha_cap: None,
            weight_bound: lead.weight_bound,
            beams: self
                .beams
                .iter()
                .zip(profiles)
                .map(|((s, c), p)| (s.requirements(p), Some(*c)))
                .collect(),
            selection: None,
            fixed_selection: None,
        }
    }

    fn subproblem(&self, anchor: &[f64], gamma: f64, profiles: &[PhaseProfile]) -> Formulation<'_> {
        let mut f = self.formulation(profiles);
        f.selection = Some(SelectionTerms {
            budget: self.budget,
            anchor: anchor.to_vec(),
            gamma,
        });
        f
    }

    /// Relaxed SCP subproblem linearized around the binary iterate `r_k`,
    /// using the initial phase profiles.
    pub fn build_scp_subproblem(&self, r_k: &SelectionVector, gamma: f64) -> Result<ConicProblem> {
        self.validate()?;
        if r_k.len() != self.geometry.len() {
            return Err(Error::dim("selection", self.geometry.len(), r_k.len()));
        }
        if r_k.budget() != self.budget {
            return Err(Error::domain(format!(
                "selection budget {} differs from design budget {}",
                r_k.budget(),
                self.budget
            )));
        }
        let (p, _) = self
            .subproblem(r_k.entries(), gamma, &self.initial_profiles())
            .build()?;
        Ok(p)
    }

    /// Minimal-`α` weights for a fixed binary configuration (uncapped `α`).
    pub fn evaluate(&self, selected: &[bool], tol: f64) -> Result<Evaluation> {
        self.evaluate_with(selected, &self.initial_profiles(), tol)
    }

    fn evaluate_with(&self, selected: &[bool], profiles: &[PhaseProfile], tol: f64) -> Result<Evaluation> {
        let mut f = self.formulation(profiles);
        f.fixed_selection = Some(selected.to_vec());
        let d = f.solve(tol)?;
        let lead = &self.beams[0].0;
        let p = pattern(&d.weights[0], &self.geometry, &lead.grid)?;
        let psl_db = peak_sidelobe_level(&p, &lead.grid)?;
        Ok(Evaluation {
            alpha: d.alpha,
            psl_db,
            weights: d.weights.into_iter().map(Beamformer::new).collect(),
        })
    }

    /// Per-antenna preference for selection: power demanded by beams living
    /// on the selected set minus power demanded by beams on its complement.
    fn swap_score(&self, weights: &[Vec<Complex64>]) -> Vec<f64> {
        let mut score = vec![0.0; self.geometry.len()];
        for ((_, c), w) in self.beams.iter().zip(weights) {
            let sign = match c {
                Coupling::Common => 1.0,
                Coupling::Complementary => -1.0,
            };
            for (s, x) in score.iter_mut().zip(w) {
                *s += sign * x.norm_sqr();
            }
        }
        score
    }
}

/// Fixed-configuration score of a binary selection.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub alpha: f64,
    pub psl_db: f64,
    /// Full-grid weights, one per beam.
    pub weights: Vec<Beamformer>,
}

impl Evaluation {
    fn better_than(&self, other: &Evaluation) -> bool {
        self.alpha < other.alpha - TIE_TOLERANCE
            || ((self.alpha - other.alpha).abs() <= TIE_TOLERANCE && self.psl_db < other.psl_db)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwapOutcome {
    pub selection: SelectionVector,
    /// Index brought into the selection.
    pub p1: Option<usize>,
    /// Index dropped from the selection.
    pub p2: Option<usize>,
    /// The swapped-in antenna does not outrank the swapped-out one.
    pub noop: bool,
    /// No legal swap exists (everything or nothing selected).
    pub fixed_point: bool,
}

/// Flips the unselected antenna with the largest `|w|` and the selected
/// antenna with the smallest `|w|`. Ties go to the lowest index.
pub fn swap_update(w: &Beamformer, r: &SelectionVector) -> Result<SwapOutcome> {
    if w.len() != r.len() {
        return Err(Error::dim("swap weights", r.len(), w.len()));
    }
    let score: Vec<f64> = w.weights().iter().map(|x| x.norm()).collect();
    swap_by_score(&score, r)
}

fn swap_by_score(score: &[f64], r: &SelectionVector) -> Result<SwapOutcome> {
    if !r.is_binary() {
        return Err(Error::domain("swap needs a binary selection"));
    }
    let mut p1: Option<usize> = None;
    let mut p2: Option<usize> = None;
    for (n, &s) in score.iter().enumerate() {
        if r.is_selected(n) {
            if p2.is_none_or(|b| s < score[b] - TIE_TOLERANCE) {
                p2 = Some(n);
            }
        } else if p1.is_none_or(|b| s > score[b] + TIE_TOLERANCE) {
            p1 = Some(n);
        }
    }
    let (Some(i), Some(o)) = (p1, p2) else {
        return Ok(SwapOutcome {
            selection: r.clone(),
            p1,
            p2,
            noop: true,
            fixed_point: true,
        });
    };
    let mut bits: Vec<bool> = (0..r.len()).map(|n| r.is_selected(n)).collect();
    bits[i] = true;
    bits[o] = false;
    Ok(SwapOutcome {
        selection: SelectionVector::from_bits(&bits)?,
        p1,
        p2,
        noop: score[i] <= score[o] + TIE_TOLERANCE,
        fixed_point: false,
    })
}

/// One row of the per-iteration convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub start: usize,
    pub iter: usize,
    pub alpha: f64,
    pub psl_db: f64,
    pub swap_p1: Option<usize>,
    pub swap_p2: Option<usize>,
    pub weight_delta: Option<f64>,
}

pub fn write_trace_csv<W: Write>(mut out: W, rows: &[TraceRow]) -> Result<()> {
    writeln!(out, "start,iter,alpha,psl_db,swap_p1,swap_p2,weight_delta")?;
    let opt = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        writeln!(
            out,
            "{},{},{:.10e},{:.6},{},{},{}",
            r.start,
            r.iter,
            r.alpha,
            r.psl_db,
            opt(r.swap_p1),
            opt(r.swap_p2),
            r.weight_delta.map_or(String::new(), |d| format!("{d:.6e}"))
        )?;
    }
    Ok(())
}

/// How a start ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Weight change fell below `delta`.
    Converged,
    /// The swap rule revisited its previous pair or undid the last swap.
    Cycle,
    /// No legal swap.
    FixedPoint,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct StartSummary {
    pub start: usize,
    pub selection: SelectionVector,
    pub alpha: f64,
    pub psl_db: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

impl StartSummary {
    pub fn converged(&self) -> bool {
        self.stop != StopReason::IterationLimit
    }
}

struct StartOutcome {
    summary: StartSummary,
    best: Evaluation,
    trace: Vec<TraceRow>,
}

/// Outcome of a joint selection run.
#[derive(Debug, Clone)]
pub struct DesignResult {
    pub selection: SelectionVector,
    /// One full-grid beamformer per beam of the design.
    pub beamformers: Vec<Beamformer>,
    pub alpha: f64,
    pub psl_db: f64,
    /// Iterations used by the winning start.
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub starts: Vec<StartSummary>,
    pub trace: Vec<TraceRow>,
}

fn start_rng(seed: u64, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    rng
}

fn random_bits(k: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut bits = vec![false; k];
    for i in rand::seq::index::sample(rng, k, m) {
        bits[i] = true;
    }
    bits
}

fn as_entries(bits: &[bool]) -> Vec<f64> {
    bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

fn stacked_distance(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| weight_distance(x, y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn binary_gap(r: &[f64]) -> f64 {
    r.iter().map(|&x| x.min(1.0 - x)).fold(0.0, f64::max)
}

fn scored(design: &JointDesign, bits: &[bool], profiles: &[PhaseProfile], tol: f64) -> Result<Evaluation> {
    match design.evaluate_with(bits, profiles, tol) {
        Err(Error::Infeasible(_)) => Ok(Evaluation {
            alpha: f64::INFINITY,
            psl_db: f64::INFINITY,
            weights: Vec::new(),
        }),
        other => other,
    }
}

fn pick_better(best: &mut Option<(Evaluation, Vec<bool>)>, ev: Evaluation, bits: &[bool]) {
    if best.as_ref().is_none_or(|(b, _)| ev.better_than(b)) {
        *best = Some((ev, bits.to_vec()));
    }
}

fn finish(
    start: usize,
    best: Option<(Evaluation, Vec<bool>)>,
    iterations: usize,
    stop: StopReason,
    trace: Vec<TraceRow>,
) -> Result<StartOutcome> {
    let Some((best, bits)) = best.filter(|(e, _)| e.alpha.is_finite()) else {
        return Err(Error::Infeasible(format!(
            "start {start}: no feasible configuration visited"
        )));
    };
    Ok(StartOutcome {
        summary: StartSummary {
            start,
            selection: SelectionVector::from_bits(&bits)?,
            alpha: best.alpha,
            psl_db: best.psl_db,
            iterations,
            stop,
        },
        best,
        trace,
    })
}

/// SCP with the swap rule from one random start.
fn swap_start(design: &JointDesign, cfg: &SelectionConfig, start: usize) -> Result<StartOutcome> {
    let k = design.geometry.len();
    let mut rng = start_rng(cfg.seed, start);
    let mut bits = random_bits(k, design.budget, &mut rng);
    let mut profiles = design.initial_profiles();
    let mut gamma = cfg.gamma;
    let mut prev_w: Option<Vec<Vec<Complex64>>> = None;
    let mut prev_pair: Option<(usize, usize)> = None;
    let mut best = None;
    let mut trace = Vec::new();
    let mut stop = StopReason::IterationLimit;
    let mut iterations = 0;

    for iter in 0..cfg.max_iters {
        iterations = iter + 1;
        let ev = scored(design, &bits, &profiles, cfg.tolerance)?;
        let (alpha, psl_db) = (ev.alpha, ev.psl_db);
        pick_better(&mut best, ev, &bits);

        let sol = design
            .subproblem(&as_entries(&bits), gamma, &profiles)
            .solve(cfg.tolerance)?;
        let delta = prev_w.as_ref().map(|p| stacked_distance(p, &sol.weights));
        let mut row = TraceRow {
            start,
            iter,
            alpha,
            psl_db,
            swap_p1: None,
            swap_p2: None,
            weight_delta: delta,
        };
        for ((spec, _), (w, prof)) in design.beams.iter().zip(sol.weights.iter().zip(profiles.iter_mut())) {
            *prof = refresh_profile(w, &design.geometry, spec, prof)?;
        }
        if delta.is_some_and(|d| d <= cfg.delta) {
            let relaxed = sol.selection.as_deref().unwrap_or(&[]);
            if binary_gap(relaxed) > cfg.binary_gap {
                gamma *= cfg.gamma_growth;
            } else {
                trace.push(row);
                stop = StopReason::Converged;
                break;
            }
        }

        let r = SelectionVector::from_bits(&bits)?;
        let swap = swap_by_score(&design.swap_score(&sol.weights), &r)?;
        row.swap_p1 = swap.p1;
        row.swap_p2 = swap.p2;
        trace.push(row);
        prev_w = Some(sol.weights);
        if swap.fixed_point {
            stop = StopReason::FixedPoint;
            break;
        }
        let pair = (swap.p1.unwrap_or(0), swap.p2.unwrap_or(0));
        let cycled = prev_pair.is_some_and(|q| q == pair || q == (pair.1, pair.0));
        bits = (0..k).map(|n| swap.selection.is_selected(n)).collect();
        if cycled {
            let ev = scored(design, &bits, &profiles, cfg.tolerance)?;
            pick_better(&mut best, ev, &bits);
            stop = StopReason::Cycle;
            break;
        }
        prev_pair = Some(pair);
    }
    finish(start, best, iterations, stop, trace)
}

/// Plain SCP from one random start: the penalty is re-linearized around the
/// relaxed solution, with no swap; the final relaxed `r` is rounded to its
/// `M` largest entries.
fn plain_start(design: &JointDesign, cfg: &SelectionConfig, start: usize) -> Result<StartOutcome> {
    let k = design.geometry.len();
    let mut rng = start_rng(cfg.seed, start);
    let mut anchor = as_entries(&random_bits(k, design.budget, &mut rng));
    let mut profiles = design.initial_profiles();
    let mut prev_w: Option<Vec<Vec<Complex64>>> = None;
    let mut stop = StopReason::IterationLimit;
    let mut iterations = 0;
    let mut trace = Vec::new();
    for iter in 0..cfg.max_iters {
        iterations = iter + 1;
        let sol = design.subproblem(&anchor, cfg.gamma, &profiles).solve(cfg.tolerance)?;
        let delta = prev_w.as_ref().map(|p| stacked_distance(p, &sol.weights));
        trace.push(TraceRow {
            start,
            iter,
            alpha: sol.alpha,
            psl_db: f64::NAN,
            swap_p1: None,
            swap_p2: None,
            weight_delta: delta,
        });
        for ((spec, _), (w, prof)) in design.beams.iter().zip(sol.weights.iter().zip(profiles.iter_mut())) {
            *prof = refresh_profile(w, &design.geometry, spec, prof)?;
        }
        anchor = sol.selection.clone().unwrap_or(anchor);
        prev_w = Some(sol.weights);
        if delta.is_some_and(|d| d <= cfg.delta) {
            stop = StopReason::Converged;
            break;
        }
    }
    let rounded = top_m(&anchor, design.budget)?;
    let bits: Vec<bool> = (0..k).map(|n| rounded.is_selected(n)).collect();
    let mut best = None;
    pick_better(&mut best, scored(design, &bits, &profiles, cfg.tolerance)?, &bits);
    finish(start, best, iterations, stop, trace)
}

fn top_m(entries: &[f64], m: usize) -> Result<SelectionVector> {
    let mut idx: Vec<usize> = (0..entries.len()).collect();
    idx.sort_by(|&a, &b| entries[b].total_cmp(&entries[a]).then(a.cmp(&b)));
    SelectionVector::from_indices(entries.len(), &idx[..m])
}

/// Which outer loop a start runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchRule {
    Swap,
    PlainScp,
}

/// Runs `starts` independent starts; start `i` draws its initial selection
/// from stream `i` of the seeded generator. Starts that never visit a
/// feasible configuration are dropped.
pub fn run_starts(
    design: &JointDesign,
    cfg: &SelectionConfig,
    starts: usize,
    rule: SearchRule,
) -> Result<Vec<StartSummary>> {
    Ok(collect_starts(design, cfg, starts, rule)?
        .into_iter()
        .map(|o| o.summary)
        .collect())
}

fn collect_starts(
    design: &JointDesign,
    cfg: &SelectionConfig,
    starts: usize,
    rule: SearchRule,
) -> Result<Vec<StartOutcome>> {
    design.validate()?;
    cfg.validate()?;
    (0..starts)
        .into_par_iter()
        .map(|s| match rule {
            SearchRule::Swap => swap_start(design, cfg, s),
            SearchRule::PlainScp => plain_start(design, cfg, s),
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .filter_map(|r| match r {
            Err(Error::Infeasible(_)) => None,
            other => Some(other),
        })
        .collect()
}

/// Joint selection with restarts; returns the best configuration found and
/// its minimal-`α` weights.
pub fn select(design: &JointDesign, cfg: &SelectionConfig, rule: SearchRule) -> Result<DesignResult> {
    design.validate()?;
    cfg.validate()?;
    let k = design.geometry.len();
    if design.budget == k {
        let bits = vec![true; k];
        let ev = design.evaluate(&bits, cfg.tolerance)?;
        let selection = SelectionVector::from_bits(&bits)?;
        return Ok(DesignResult {
            selection: selection.clone(),
            beamformers: ev.weights,
            alpha: ev.alpha,
            psl_db: ev.psl_db,
            iterations: 0,
            restarts: 0,
            converged: true,
            starts: vec![StartSummary {
                start: 0,
                selection,
                alpha: ev.alpha,
                psl_db: ev.psl_db,
                iterations: 0,
                stop: StopReason::FixedPoint,
            }],
            trace: Vec::new(),
        });
    }
    let outcomes = collect_starts(design, cfg, cfg.restarts, rule)?;
    let winner = (0..outcomes.len())
        .reduce(|a, b| {
            if outcomes[b].best.better_than(&outcomes[a].best) {
                b
            } else {
                a
            }
        })
        .ok_or_else(|| Error::Infeasible("no start reached a feasible configuration".into()))?;
    let w = &outcomes[winner];
    Ok(DesignResult {
        selection: w.summary.selection.clone(),
        beamformers: w.best.weights.clone(),
        alpha: w.best.alpha,
        psl_db: w.best.psl_db,
        iterations: w.summary.iterations,
        restarts: outcomes.len(),
        converged: w.summary.converged(),
        starts: outcomes.iter().map(|o| o.summary.clone()).collect(),
        trace: outcomes.iter().flat_map(|o| o.trace.iter().cloned()).collect(),
    })
}

pub fn select_single_beamformer(
    geometry: &ArrayGeometry,
    spec: &PatternSpec,
    budget: usize,
    cfg: &SelectionConfig,
) -> Result<DesignResult> {
    select(
        &JointDesign::single(geometry.clone(), spec.clone(), budget),
        cfg,
        SearchRule::Swap,
    )
}

/// `radar` should carry the null at `θ_c` as its symbol (`0`); `comm` is a
/// focused beam at `θ_c`.
pub fn select_multi_beamformer(
    geometry: &ArrayGeometry,
    radar: &PatternSpec,
    comm: &PatternSpec,
    budget: usize,
    cfg: &SelectionConfig,
) -> Result<DesignResult> {
    select(
        &JointDesign::multi(geometry.clone(), radar.clone(), comm.clone(), budget),
        cfg,
        SearchRule::Swap,
    )
}

pub fn select_shared_aperture(
    geometry: &ArrayGeometry,
    radar: &PatternSpec,
    comm: &PatternSpec,
    radar_budget: usize,
    cfg: &SelectionConfig,
) -> Result<DesignResult> {
    if radar_budget == 0 || radar_budget >= geometry.len() {
        return Err(Error::domain(format!(
            "radar budget {radar_budget} outside (0, {})",
            geometry.len()
        )));
    }
    select(
        &JointDesign::shared(geometry.clone(), radar.clone(), comm.clone(), radar_budget),
        cfg,
        SearchRule::Swap,
    )
}

#[derive(Debug, Clone)]
pub struct ExhaustiveResult {
    pub selection: SelectionVector,
    pub alpha: f64,
    pub psl_db: f64,
    pub subsets: usize,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Brute force over every `M`-subset of the candidate grid.
pub fn exhaustive_select(design: &JointDesign, tol: f64) -> Result<ExhaustiveResult> {
    design.validate()?;
    let k = design.geometry.len();
    let count = binomial(k, design.budget);
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::domain(format!(
            "C({k}, {}) = {count} subsets exceeds the limit of {EXHAUSTIVE_LIMIT}",
            design.budget
        )));
    }
    let subsets: Vec<Vec<usize>> = (0..k).combinations(design.budget).collect();
    let scores: Vec<Evaluation> = subsets
        .par_iter()
        .map(|s| {
            let mut bits = vec![false; k];
            s.iter().for_each(|&i| bits[i] = true);
            scored(design, &bits, &design.initial_profiles(), tol)
        })
        .collect::<Result<_>>()?;
    let best = (0..scores.len())
        .reduce(|a, b| if scores[b].better_than(&scores[a]) { b } else { a })
        .filter(|&i| scores[i].alpha.is_finite())
        .ok_or_else(|| Error::Infeasible("no subset admits the design".into()))?;
    Ok(ExhaustiveResult {
        selection: SelectionVector::from_indices(k, &subsets[best])?,
        alpha: scores[best].alpha,
        psl_db: scores[best].psl_db,
        subsets: subsets.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::GridBuilder;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn swap_rule_example() {
        let r = SelectionVector::from_indices(4, &[0, 1]).unwrap();
        let w = Beamformer::new(vec![c(0.9), c(0.1), c(0.8), c(0.2)]);
        let s = swap_update(&w, &r).unwrap();
        assert_eq!(s.p1, Some(2));
        assert_eq!(s.p2, Some(1));
        assert_eq!(s.selection.to_bit_string(), "1010");
        assert!(!s.noop);
    }

    #[test]
    fn swap_ties_and_degenerate() {
        let r = SelectionVector::from_indices(5, &[1, 3]).unwrap();
        let w = Beamformer::new(vec![c(0.0); 5]);
        let s = swap_update(&w, &r).unwrap();
        assert_eq!((s.p1, s.p2), (Some(0), Some(1)));
        assert!(s.noop && !s.fixed_point);
        let full = SelectionVector::from_indices(3, &[0, 1, 2]).unwrap();
        let s = swap_update(&Beamformer::new(vec![c(1.0); 3]), &full).unwrap();
        assert!(s.fixed_point);
        assert_eq!(s.selection, full);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(40, 10), 847_660_528);
        assert_eq!(binomial(3, 4), 0);
    }

    fn small_design(k: usize, m: usize) -> JointDesign {
        let g = ArrayGeometry::ula(k, 0.5).unwrap();
        let grid = GridBuilder::new(-8.0, 8.0).build().unwrap();
        JointDesign::single(g, PatternSpec::focused(0.0, grid, 0.3), m)
    }

    #[test]
    fn exhaustive_counts_subsets() {
        let r = exhaustive_select(&small_design(6, 3), 1e-8).unwrap();
        assert_eq!(r.subsets, 20);
        assert_eq!(r.selection.selected_indices().len(), 3);
        let one = exhaustive_select(&small_design(4, 4), 1e-8).unwrap();
        assert_eq!(one.subsets, 1);
    }

    #[test]
    fn full_budget_is_fixed_design() {
        let d = small_design(6, 6);
        let r = select(&d, &SelectionConfig::default(), SearchRule::Swap).unwrap();
        assert_eq!(r.selection.to_bit_string(), "111111");
        assert_eq!(r.restarts, 0);
    }

    #[test]
    fn swap_search_is_deterministic_and_budget_exact() {
        let d = small_design(8, 4);
        let cfg = SelectionConfig {
            restarts: 3,
            max_iters: 8,
            seed: 7,
            ..Default::default()
        };
        let a = select(&d, &cfg, SearchRule::Swap).unwrap();
        let b = select(&d, &cfg, SearchRule::Swap).unwrap();
        assert_eq!(a.selection, b.selection);
        assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
        assert_eq!(a.selection.selected_indices().len(), 4);
        let support = a.beamformers[0].support();
        assert!(support.iter().all(|&i| a.selection.is_selected(i)));
    }

    #[test]
    fn subproblem_budget_checked() {
        let d = small_design(6, 3);
        let r = SelectionVector::from_indices(6, &[0, 1]).unwrap();
        assert!(d.build_scp_subproblem(&r, 1.0).is_err());
        let r = SelectionVector::from_indices(6, &[0, 1, 2]).unwrap();
        assert!(d.build_scp_subproblem(&r, 0.0).is_ok());
    }
}
