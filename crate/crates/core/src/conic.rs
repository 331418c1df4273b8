//! Real second-order cone programs and helpers that embed complex-valued
//! beamforming constraints into them.
//!
//! A complex weight vector `w` of length `n` occupies `2n` consecutive real
//! variables: `Re w` followed by `Im w` (see [`ComplexVar`]). The helpers on
//! [`ConicProblem`] translate `w^H a` constraints into rows over those
//! variables, so callers never touch the embedding directly.
//!
//! Problems are solved with the Clarabel interior-point solver.

use std::io::Write;
use std::ops::Range;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// `Σ coeff·x[var] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(index: usize) -> Self {
        Self {
            terms: vec![(index, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, index: usize, coeff: f64) -> Self {
        self.terms.push((index, coeff));
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }
}

/// `‖tail‖₂ ≤ head`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderCone {
    pub head: AffineExpr,
    pub tail: Vec<AffineExpr>,
}

impl SecondOrderCone {
    pub fn dim(&self) -> usize {
        1 + self.tail.len()
    }

    /// Positive part of `‖tail‖ − head`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let norm = self.tail.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
        (norm - self.head.eval(x)).max(0.0)
    }
}

/// `terms·x = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Handle to a complex vector stored as `(Re; Im)` real variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexVar {
    pub start: usize,
    pub len: usize,
}

impl ComplexVar {
    pub fn re(&self, m: usize) -> usize {
        self.start + m
    }

    pub fn im(&self, m: usize) -> usize {
        self.start + self.len + m
    }

    /// Reads the complex vector back out of a primal solution.
    pub fn extract(&self, x: &[f64]) -> Vec<Complex64> {
        (0..self.len)
            .map(|m| Complex64::new(x[self.re(m)], x[self.im(m)]))
            .collect()
    }
}

/// Linear objective, equalities, variable bounds and second-order cones over
/// `num_vars` real variables.
#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    num_vars: usize,
    objective: Vec<f64>,
    objective_constant: f64,
    equalities: Vec<EqualityRow>,
    cones: Vec<SecondOrderCone>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn equalities(&self) -> &[EqualityRow] {
        &self.equalities
    }

    pub fn cones(&self) -> &[SecondOrderCone] {
        &self.cones
    }

    pub fn bounds(&self, var: usize) -> (Option<f64>, Option<f64>) {
        (self.lower[var], self.upper[var])
    }

    /// Appends `n` free variables and returns their index range.
    pub fn add_variables(&mut self, n: usize) -> Range<usize> {
        let start = self.num_vars;
        self.num_vars += n;
        self.objective.resize(self.num_vars, 0.0);
        self.lower.resize(self.num_vars, None);
        self.upper.resize(self.num_vars, None);
        start..self.num_vars
    }

    pub fn add_variable(&mut self) -> usize {
        self.add_variables(1).start
    }

    pub fn add_complex_vector(&mut self, len: usize) -> ComplexVar {
        let r = self.add_variables(2 * len);
        ComplexVar { start: r.start, len }
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) -> Result<()> {
        self.check_var(var)?;
        self.objective[var] = coeff;
        Ok(())
    }

    pub fn add_objective_constant(&mut self, c: f64) {
        self.objective_constant += c;
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) -> Result<()> {
        self.check_var(var)?;
        if let (Some(l), Some(u)) = (lower, upper) {
            if l > u {
                return Err(Error::domain(format!("empty bound [{l}, {u}] on variable {var}")));
            }
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
        Ok(())
    }

    pub fn add_equality(&mut self, terms: Vec<(usize, f64)>, rhs: f64) -> Result<()> {
        for &(i, _) in &terms {
            self.check_var(i)?;
        }
        self.equalities.push(EqualityRow { terms, rhs });
        Ok(())
    }

    pub fn add_cone(&mut self, head: AffineExpr, tail: Vec<AffineExpr>) -> Result<()> {
        if tail.is_empty() {
            return Err(Error::domain("second-order cone needs dimension >= 2"));
        }
        for e in std::iter::once(&head).chain(&tail) {
            if let Some(i) = e.max_index() {
                self.check_var(i)?;
            }
        }
        self.cones.push(SecondOrderCone { head, tail });
        Ok(())
    }

    fn check_var(&self, var: usize) -> Result<()> {
        if var >= self.num_vars {
            return Err(Error::dim("conic variable index", self.num_vars, var + 1));
        }
        Ok(())
    }

    fn check_block(&self, w: ComplexVar, a: &[Complex64]) -> Result<()> {
        if a.len() != w.len {
            return Err(Error::dim("complex constraint vector", w.len, a.len()));
        }
        if w.start + 2 * w.len > self.num_vars {
            return Err(Error::dim("complex variable block", self.num_vars, w.start + 2 * w.len));
        }
        Ok(())
    }

    /// Real and imaginary parts of `w^H a` as affine expressions.
    ///
    /// With `w = x + jy`: `Re = Σ x·Re a + y·Im a`, `Im = Σ x·Im a − y·Re a`.
    pub fn complex_gain(&self, a: &[Complex64], w: ComplexVar) -> Result<(AffineExpr, AffineExpr)> {
        self.check_block(w, a)?;
        let mut re = AffineExpr::default();
        let mut im = AffineExpr::default();
        for (m, am) in a.iter().enumerate() {
            re.terms.push((w.re(m), am.re));
            re.terms.push((w.im(m), am.im));
            im.terms.push((w.re(m), am.im));
            im.terms.push((w.im(m), -am.re));
        }
        Ok((re, im))
    }

    /// `w^H a = target`, as two real equality rows.
    pub fn add_complex_equality(&mut self, a: &[Complex64], target: Complex64, w: ComplexVar) -> Result<()> {
        let (re, im) = self.complex_gain(a, w)?;
        self.add_equality(re.terms, target.re)?;
        self.add_equality(im.terms, target.im)
    }

    /// `|w^H a| ≤ bound`.
    pub fn add_complex_modulus_bound(&mut self, a: &[Complex64], bound: AffineExpr, w: ComplexVar) -> Result<()> {
        let (re, im) = self.complex_gain(a, w)?;
        self.add_cone(bound, vec![re, im])
    }

    /// `|w^H a − center| ≤ radius`.
    pub fn add_complex_deviation_bound(
        &mut self,
        a: &[Complex64],
        center: Complex64,
        radius: AffineExpr,
        w: ComplexVar,
    ) -> Result<()> {
        let (re, im) = self.complex_gain(a, w)?;
        self.add_cone(radius, vec![re.plus(-center.re), im.plus(-center.im)])
    }

    /// `|w_m|² ≤ s` for an affine `s`, encoded as
    /// `‖(2 Re w_m, 2 Im w_m, 1 − s)‖ ≤ 1 + s`.
    pub fn add_weight_power_bound(&mut self, w: ComplexVar, m: usize, s: AffineExpr) -> Result<()> {
        if m >= w.len {
            return Err(Error::dim("weight power bound element", w.len, m + 1));
        }
        let one_minus = AffineExpr {
            terms: s.terms.iter().map(|&(i, c)| (i, -c)).collect(),
            constant: 1.0 - s.constant,
        };
        let head = s.plus(1.0);
        self.add_cone(
            head,
            vec![
                AffineExpr::default().term(w.re(m), 2.0),
                AffineExpr::default().term(w.im(m), 2.0),
                one_minus,
            ],
        )
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest absolute violation of any equality, bound or cone at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self
            .equalities
            .iter()
            .map(|r| (r.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() - r.rhs).abs());
        let cones = self.cones.iter().map(|c| c.violation(x));
        let bounds = (0..self.num_vars).map(|i| {
            let lo = self.lower[i].map_or(0.0, |l| (l - x[i]).max(0.0));
            let hi = self.upper[i].map_or(0.0, |u| (x[i] - u).max(0.0));
            lo.max(hi)
        });
        eq.chain(cones).chain(bounds).fold(0.0, f64::max)
    }

    /// Dumps the problem in a line-oriented triplet format:
    ///
    /// ```text
    /// vars <n>
    /// obj <col> <value>              (non-zeros only)
    /// obj_const <value>
    /// eq <row> <col> <value>
    /// eq_rhs <row> <value>
    /// bound <col> <lower|-inf> <upper|inf>   (bounded variables only)
    /// cone <k> <dim>
    /// cone_a <k> <row> <col> <value>   (row 0 is the cone head)
    /// cone_b <k> <row> <value>
    /// ```
    pub fn write_triplets<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "vars {}", self.num_vars)?;
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                writeln!(out, "obj {j} {c:e}")?;
            }
        }
        writeln!(out, "obj_const {:e}", self.objective_constant)?;
        for (r, row) in self.equalities.iter().enumerate() {
            for &(j, c) in &row.terms {
                writeln!(out, "eq {r} {j} {c:e}")?;
            }
            writeln!(out, "eq_rhs {r} {:e}", row.rhs)?;
        }
        for j in 0..self.num_vars {
            if self.lower[j].is_some() || self.upper[j].is_some() {
                let lo = self.lower[j].map_or("-inf".to_string(), |v| format!("{v:e}"));
                let hi = self.upper[j].map_or("inf".to_string(), |v| format!("{v:e}"));
                writeln!(out, "bound {j} {lo} {hi}")?;
            }
        }
        for (k, cone) in self.cones.iter().enumerate() {
            writeln!(out, "cone {k} {}", cone.dim())?;
            for (r, e) in std::iter::once(&cone.head).chain(&cone.tail).enumerate() {
                for &(j, c) in &e.terms {
                    writeln!(out, "cone_a {k} {r} {j} {c:e}")?;
                }
                if e.constant != 0.0 {
                    writeln!(out, "cone_b {k} {r} {:e}", e.constant)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// Largest absolute constraint violation of the returned primal point.
    pub primal: f64,
    /// Solver-reported scaled dual residual.
    pub dual: f64,
    /// Solver-reported relative duality gap.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub objective_value: f64,
    pub residuals: Residuals,
    pub iterations: u32,
    /// Backend status text.
    pub detail: String,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solves `problem` to tolerance `tol`.
pub fn solve(problem: &ConicProblem, tol: f64) -> Result<ConicSolution> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("solver tolerance must be positive, got {tol}")));
    }
    let n = problem.num_vars;
    if n == 0 {
        return Err(Error::domain("problem has no variables"));
    }

    let mut rows: Vec<usize> = Vec::new();
    let mut cols: Vec<usize> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    let mut push = |row: usize, terms: &[(usize, f64)], sign: f64| {
        for &(j, c) in terms {
            if c != 0.0 {
                rows.push(row);
                cols.push(j);
                vals.push(sign * c);
            }
        }
    };

    for row in &problem.equalities {
        push(b.len(), &row.terms, 1.0);
        b.push(row.rhs);
    }
    if !problem.equalities.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(problem.equalities.len()));
    }

    let mut n_bounds = 0;
    for j in 0..n {
        if let Some(lo) = problem.lower[j] {
            push(b.len(), &[(j, 1.0)], -1.0);
            b.push(-lo);
            n_bounds += 1;
        }
        if let Some(hi) = problem.upper[j] {
            push(b.len(), &[(j, 1.0)], 1.0);
            b.push(hi);
            n_bounds += 1;
        }
    }
    if n_bounds > 0 {
        cones.push(SupportedConeT::NonnegativeConeT(n_bounds));
    }

    for cone in &problem.cones {
        for e in std::iter::once(&cone.head).chain(&cone.tail) {
            push(b.len(), &e.terms, -1.0);
            b.push(e.constant);
        }
        cones.push(SupportedConeT::SecondOrderConeT(cone.dim()));
    }

    let m = b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows, cols, vals);
    let p = CscMatrix::zeros((n, n));
    let base = DefaultSettings {
        verbose: false,
        tol_gap_abs: tol,
        tol_gap_rel: tol,
        tol_feas: tol,
        tol_infeas_abs: tol,
        tol_infeas_rel: tol,
        // a stalled solve that still meets 10·tol is reported as optimal
        reduced_tol_gap_abs: 10.0 * tol,
        reduced_tol_gap_rel: 10.0 * tol,
        reduced_tol_feas: 10.0 * tol,
        max_iter: 200,
        ..DefaultSettings::default()
    };
    // Fallbacks for KKT trouble: stronger regularization, then no equilibration.
    let attempts = [
        base.clone(),
        DefaultSettings {
            static_regularization_constant: 1e-7,
            dynamic_regularization_delta: 1e-6,
            ..base.clone()
        },
        DefaultSettings {
            equilibrate_enable: false,
            ..base.clone()
        },
        DefaultSettings {
            max_step_fraction: 0.9,
            iterative_refinement_max_iter: 50,
            static_regularization_constant: 1e-9,
            ..base
        },
    ];
    let mut solver = None;
    for settings in attempts {
        let mut s = DefaultSolver::new(&p, &problem.objective, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        s.solve();
        let retry = matches!(
            s.solution.status,
            SolverStatus::NumericalError | SolverStatus::InsufficientProgress
        );
        solver = Some(s);
        if !retry {
            break;
        }
    }
    let solver = solver.expect("at least one attempt");

    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIters,
        _ => SolveStatus::NumericalFailure,
    };
    let primal = sol.x.clone();
    let residuals = Residuals {
        primal: problem.max_violation(&primal),
        dual: solver.info.res_dual,
        gap: solver.info.gap_rel,
    };
    Ok(ConicSolution {
        status,
        objective_value: problem.objective_value(&primal),
        primal,
        residuals,
        iterations: sol.iterations,
        detail: format!("{:?}", sol.status),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_basis_equality_pins_first_weight() {
        let mut p = ConicProblem::new();
        let w = p.add_complex_vector(3);
        let a = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        p.add_complex_equality(&a, Complex64::new(1.0, 0.0), w).unwrap();
        assert_eq!(p.equalities().len(), 2);
        let re = &p.equalities()[0];
        let im = &p.equalities()[1];
        let nz =
            |r: &EqualityRow| -> Vec<(usize, f64)> { r.terms.iter().copied().filter(|&(_, c)| c != 0.0).collect() };
        assert_eq!(nz(re), vec![(w.re(0), 1.0)]);
        assert_eq!(re.rhs, 1.0);
        assert_eq!(nz(im), vec![(w.im(0), -1.0)]);
        assert_eq!(im.rhs, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut p = ConicProblem::new();
        let w = p.add_complex_vector(3);
        let a = vec![Complex64::new(1.0, 0.0); 2];
        assert!(matches!(
            p.add_complex_equality(&a, Complex64::new(1.0, 0.0), w),
            Err(Error::Dimension { .. })
        ));
        assert!(p.add_complex_modulus_bound(&a, AffineExpr::constant(1.0), w).is_err());
        assert!(p.add_cone(AffineExpr::var(0), vec![]).is_err());
        assert!(p.add_equality(vec![(99, 1.0)], 0.0).is_err());
    }

    #[test]
    fn minimize_cone_head() {
        // min t s.t. ‖(x − 1, y − 1)‖ ≤ t
        let mut p = ConicProblem::new();
        let v = p.add_variables(3);
        let (x, y, t) = (v.start, v.start + 1, v.start + 2);
        p.set_objective(t, 1.0).unwrap();
        p.add_cone(
            AffineExpr::var(t),
            vec![AffineExpr::var(x).plus(-1.0), AffineExpr::var(y).plus(-1.0)],
        )
        .unwrap();
        let s = solve(&p, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(s.primal[t].abs() < 1e-7);
        assert!((s.primal[x] - 1.0).abs() < 1e-6);
        assert!((s.primal[y] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_radius_forces_zero_gain() {
        // min −Re(w1) s.t. |w1 + w2| ≤ 0, |w_m| ≤ 1
        let mut p = ConicProblem::new();
        let w = p.add_complex_vector(2);
        let a = vec![Complex64::new(1.0, 0.0); 2];
        p.add_complex_modulus_bound(&a, AffineExpr::constant(0.0), w).unwrap();
        for m in 0..2 {
            p.add_weight_power_bound(w, m, AffineExpr::constant(1.0)).unwrap();
        }
        p.set_objective(w.re(0), -1.0).unwrap();
        let s = solve(&p, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        let ws = w.extract(&s.primal);
        assert!((ws[0] + ws[1]).norm() < 1e-6);
        assert!((ws[0].re - 1.0).abs() < 1e-6);
    }

    #[test]
    fn power_bound_matches_quadratic() {
        // max Re(w) s.t. |w|² ≤ r, r ≤ 0.25 → w = 0.5
        let mut p = ConicProblem::new();
        let w = p.add_complex_vector(1);
        let r = p.add_variable();
        p.set_bounds(r, Some(0.0), Some(0.25)).unwrap();
        p.add_weight_power_bound(w, 0, AffineExpr::var(r)).unwrap();
        p.set_objective(w.re(0), -1.0).unwrap();
        let s = solve(&p, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.primal[w.re(0)] - 0.5).abs() < 1e-6);
        assert!(s.residuals.primal < 1e-7);
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let mut p = ConicProblem::new();
        let x = p.add_variable();
        p.add_equality(vec![(x, 1.0)], 1.0).unwrap();
        p.add_equality(vec![(x, 1.0)], 2.0).unwrap();
        p.set_bounds(x, Some(-10.0), Some(10.0)).unwrap();
        let s = solve(&p, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut p = ConicProblem::new();
        let x = p.add_variable();
        p.set_objective(x, 1.0).unwrap();
        p.set_bounds(x, None, Some(1.0)).unwrap();
        let s = solve(&p, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.status, SolveStatus::Unbounded);
    }

    #[test]
    fn triplet_dump_lists_everything() {
        let mut p = ConicProblem::new();
        let v = p.add_variables(2);
        p.set_objective(v.start, 1.0).unwrap();
        p.add_equality(vec![(v.start + 1, 2.0)], 3.0).unwrap();
        p.set_bounds(v.start, Some(0.0), None).unwrap();
        p.add_cone(AffineExpr::var(0), vec![AffineExpr::var(1).plus(1.0)])
            .unwrap();
        let mut buf = Vec::new();
        p.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for needle in [
            "vars 2",
            "obj 0 1e0",
            "eq 0 1 2e0",
            "eq_rhs 0 3e0",
            "bound 0 0e0 inf",
            "cone 0 2",
            "cone_a 0 1 1 1e0",
            "cone_b 0 1 1e0",
        ] {
            assert!(text.contains(needle), "missing {needle}:\n{text}");
        }
    }
}
