//! Bounded-variable simplex on a dense dictionary.
//!
//! Every row `i` of the constraint matrix gets a slack `s_i = A_i x`, so the
//! equality system is homogeneous and all right-hand sides live in the slack
//! bounds. The dictionary expresses each basic variable as a linear form in the
//! nonbasic ones: `x_B[i] = sum_j tab[i][j] * x_N[j]`. Since the system is
//! homogeneous the dictionary has no constant column, which lets branch and
//! bound reuse one tableau across nodes by changing bounds only.

use super::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pos {
    Basic(usize),
    Nonbasic(usize),
}

/// Entering/leaving selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum PivotRule {
    /// Smallest-index rule; never cycles.
    #[default]
    Bland,
    /// Largest reduced cost (or largest infeasibility in the dual), falling
    /// back to Bland's rule after a run of degenerate pivots.
    Hybrid,
}

const DEGENERATE_RUN: u32 = 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum PrimalOutcome {
    Optimal,
    /// Entering structural column and its direction (+1 / -1).
    Unbounded {
        col: usize,
        dir: i32,
    },
    /// Row multipliers proving infeasibility.
    Infeasible {
        farkas: Vec<Rational>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum DualOutcome {
    Optimal,
    Infeasible,
    /// The dual bound dropped to or below the cutoff.
    Cutoff,
    IterationLimit,
}

enum Step {
    Flip(Rational),
    Pivot { row: usize, t: Rational },
    Unbounded,
}

#[derive(Clone)]
pub(crate) struct Simplex {
    n: usize,
    m: usize,
    lower: Vec<Option<Rational>>,
    upper: Vec<Option<Rational>>,
    cost: Vec<Rational>,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
    pos: Vec<Pos>,
    tab: Vec<Vec<Rational>>,
    /// Reduced costs of the nonbasic columns.
    obj: Vec<Rational>,
    value: Vec<Rational>,
    pub pivots: u64,
}

impl Simplex {
    /// `rows` are the structural coefficient rows; `row_bounds` are the bounds
    /// on the row activities; `col_bounds` the structural bounds.
    pub fn new(
        rows: Vec<Vec<Rational>>,
        row_bounds: Vec<(Option<Rational>, Option<Rational>)>,
        col_bounds: Vec<(Option<Rational>, Option<Rational>)>,
        cost: Vec<Rational>,
    ) -> Self {
        let m = rows.len();
        let n = col_bounds.len();
        debug_assert_eq!(row_bounds.len(), m);
        debug_assert_eq!(cost.len(), n);
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for (l, u) in col_bounds.into_iter().chain(row_bounds) {
            lower.push(l);
            upper.push(u);
        }
        let mut full_cost = cost;
        full_cost.resize(n + m, Rational::zero());
        let mut value = vec![Rational::zero(); n + m];
        for j in 0..n {
            value[j] = match (&lower[j], &upper[j]) {
                (Some(l), _) => l.clone(),
                (None, Some(u)) => u.clone(),
                (None, None) => Rational::zero(),
            };
        }
        for (i, row) in rows.iter().enumerate() {
            let mut acc = Rational::zero();
            for (a, x) in row.iter().zip(&value[..n]) {
                acc.add_mul(a, x);
            }
            value[n + i] = acc;
        }
        let obj = full_cost[..n].to_vec();
        let mut pos = Vec::with_capacity(n + m);
        pos.extend((0..n).map(Pos::Nonbasic));
        pos.extend((0..m).map(Pos::Basic));
        Simplex {
            n,
            m,
            lower,
            upper,
            cost: full_cost,
            basis: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
            pos,
            tab: rows,
            obj,
            value,
            pivots: 0,
        }
    }

    pub fn structural_values(&self) -> Vec<Rational> {
        self.value[..self.n].to_vec()
    }

    pub fn objective_value(&self) -> Rational {
        let mut acc = Rational::zero();
        for (c, x) in self.cost[..self.n].iter().zip(&self.value) {
            acc.add_mul(c, x);
        }
        acc
    }

    fn below(&self, v: usize) -> bool {
        self.lower[v].as_ref().is_some_and(|l| self.value[v] < *l)
    }

    fn above(&self, v: usize) -> bool {
        self.upper[v].as_ref().is_some_and(|u| self.value[v] > *u)
    }

    fn can_increase(&self, v: usize) -> bool {
        self.upper[v].as_ref().is_none_or(|u| self.value[v] < *u)
    }

    fn can_decrease(&self, v: usize) -> bool {
        self.lower[v].as_ref().is_none_or(|l| self.value[v] > *l)
    }

    /// Moves nonbasic column `c` by `delta`, updating the basic values.
    fn shift(&mut self, c: usize, delta: &Rational) {
        if delta.is_zero() {
            return;
        }
        let e = self.nonbasic[c];
        self.value[e] += delta;
        for i in 0..self.m {
            let t = &self.tab[i][c];
            if !t.is_zero() {
                let b = self.basis[i];
                let change = t * delta;
                self.value[b] += change;
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.pivots += 1;
        let e = self.nonbasic[c];
        let l = self.basis[r];
        let inv = self.tab[r][c].recip();
        let mut newrow = std::mem::take(&mut self.tab[r]);
        let mut support = Vec::new();
        for (j, x) in newrow.iter_mut().enumerate() {
            if j == c {
                *x = inv.clone();
                support.push(j);
            } else if !x.is_zero() {
                *x = -(&*x * &inv);
                support.push(j);
            }
        }
        let update = |row: &mut Vec<Rational>, newrow: &[Rational]| {
            let f = std::mem::take(&mut row[c]);
            if f.is_zero() {
                row[c] = f;
                return;
            }
            for &j in &support {
                if j == c {
                    row[c] = &f * &newrow[c];
                } else {
                    row[j].add_mul(&f, &newrow[j]);
                }
            }
        };
        for i in 0..self.m {
            if i != r {
                update(&mut self.tab[i], &newrow);
            }
        }
        update(&mut self.obj, &newrow);
        self.tab[r] = newrow;
        self.basis[r] = e;
        self.nonbasic[c] = l;
        self.pos[e] = Pos::Basic(r);
        self.pos[l] = Pos::Nonbasic(c);
    }

    fn phase1_costs(&self) -> Option<Vec<Rational>> {
        let mut c1 = vec![0i32; self.m];
        let mut any = false;
        for (i, &b) in self.basis.iter().enumerate() {
            if self.below(b) {
                c1[i] = 1;
                any = true;
            } else if self.above(b) {
                c1[i] = -1;
                any = true;
            }
        }
        if !any {
            return None;
        }
        let mut d = vec![Rational::zero(); self.n];
        for (i, &s) in c1.iter().enumerate() {
            if s == 0 {
                continue;
            }
            for (dj, t) in d.iter_mut().zip(&self.tab[i]) {
                if !t.is_zero() {
                    if s > 0 {
                        *dj += t;
                    } else {
                        *dj -= t;
                    }
                }
            }
        }
        Some(d)
    }

    fn choose_entering(&self, d: &[Rational], bland: bool) -> Option<(usize, i32)> {
        let mut best: Option<(usize, i32)> = None;
        for (j, dj) in d.iter().enumerate() {
            let v = self.nonbasic[j];
            let dir = if dj.is_positive() && self.can_increase(v) {
                1
            } else if dj.is_negative() && self.can_decrease(v) {
                -1
            } else {
                continue;
            };
            best = match best {
                None => Some((j, dir)),
                Some((bj, bdir)) => {
                    let better = if bland {
                        v < self.nonbasic[bj]
                    } else {
                        let (a, b) = (dj.abs(), d[bj].abs());
                        a > b || (a == b && v < self.nonbasic[bj])
                    };
                    if better {
                        Some((j, dir))
                    } else {
                        Some((bj, bdir))
                    }
                }
            };
        }
        best
    }

    fn ratio_test(&self, c: usize, dir: i32, phase1: bool) -> Step {
        let e = self.nonbasic[c];
        let mut best: Option<(Rational, Option<usize>)> = None;
        let consider =
            |best: &mut Option<(Rational, Option<usize>)>, t: Rational, row: Option<usize>| {
                let replace = match best {
                    None => true,
                    Some((bt, brow)) => {
                        if t < *bt {
                            true
                        } else if t == *bt {
                            match (brow, row) {
                                (None, _) => false,
                                (Some(_), None) => true,
                                (Some(br), Some(r)) => self.basis[r] < self.basis[*br],
                            }
                        } else {
                            false
                        }
                    }
                };
                if replace {
                    *best = Some((t, row));
                }
            };
        if dir > 0 {
            if let Some(u) = &self.upper[e] {
                consider(&mut best, u - &self.value[e], None);
            }
        } else if let Some(l) = &self.lower[e] {
            consider(&mut best, &self.value[e] - l, None);
        }
        for i in 0..self.m {
            let t = &self.tab[i][c];
            if t.is_zero() {
                continue;
            }
            let b = self.basis[i];
            let x = &self.value[b];
            let increasing = t.is_positive() == (dir > 0);
            let rate = t.abs();
            let limit = if increasing {
                if phase1 && self.below(b) {
                    self.lower[b].as_ref().map(|l| l - x)
                } else if phase1 && self.above(b) {
                    None
                } else {
                    self.upper[b].as_ref().map(|u| u - x)
                }
            } else if phase1 && self.above(b) {
                self.upper[b].as_ref().map(|u| x - u)
            } else if phase1 && self.below(b) {
                None
            } else {
                self.lower[b].as_ref().map(|l| x - l)
            };
            if let Some(gap) = limit {
                consider(&mut best, gap / &rate, Some(i));
            }
        }
        match best {
            None => Step::Unbounded,
            Some((t, None)) => Step::Flip(t),
            Some((t, Some(row))) => Step::Pivot { row, t },
        }
    }

    fn apply_step(&mut self, c: usize, dir: i32, step: Step) -> bool {
        match step {
            Step::Unbounded => false,
            Step::Flip(t) => {
                let delta = if dir > 0 { t } else { -t };
                self.shift(c, &delta);
                true
            }
            Step::Pivot { row, t } => {
                let delta = if dir > 0 { t } else { -t };
                self.shift(c, &delta);
                self.pivot(row, c);
                true
            }
        }
    }

    /// Phase 1 (sum of infeasibilities) followed by phase 2.
    pub fn solve_primal(&mut self, rule: PivotRule) -> PrimalOutcome {
        let mut degenerate = 0u32;
        while let Some(d) = self.phase1_costs() {
            let bland = rule == PivotRule::Bland || degenerate >= DEGENERATE_RUN;
            let Some((c, dir)) = self.choose_entering(&d, bland) else {
                return PrimalOutcome::Infeasible {
                    farkas: self.phase1_certificate(&d),
                };
            };
            let step = self.ratio_test(c, dir, true);
            let zero = matches!(&step, Step::Pivot { t, .. } | Step::Flip(t) if t.is_zero());
            degenerate = if zero { degenerate + 1 } else { 0 };
            let moved = self.apply_step(c, dir, step);
            debug_assert!(moved, "phase 1 cannot be unbounded");
        }
        self.primal_phase2(rule)
    }

    fn primal_phase2(&mut self, rule: PivotRule) -> PrimalOutcome {
        let mut degenerate = 0u32;
        loop {
            let bland = rule == PivotRule::Bland || degenerate >= DEGENERATE_RUN;
            let Some((c, dir)) = self.choose_entering(&self.obj, bland) else {
                return PrimalOutcome::Optimal;
            };
            let step = self.ratio_test(c, dir, false);
            if matches!(step, Step::Unbounded) {
                return PrimalOutcome::Unbounded { col: c, dir };
            }
            let zero = matches!(&step, Step::Pivot { t, .. } | Step::Flip(t) if t.is_zero());
            degenerate = if zero { degenerate + 1 } else { 0 };
            self.apply_step(c, dir, step);
        }
    }

    /// Row multipliers `y` of the phase-1 functional; see `LpProblem::verify_farkas`.
    fn phase1_certificate(&self, d: &[Rational]) -> Vec<Rational> {
        (0..self.m)
            .map(|i| match self.pos[self.n + i] {
                Pos::Basic(r) => {
                    let b = self.basis[r];
                    if self.below(b) {
                        Rational::one()
                    } else if self.above(b) {
                        -Rational::one()
                    } else {
                        Rational::zero()
                    }
                }
                Pos::Nonbasic(j) => -&d[j],
            })
            .collect()
    }

    /// Direction of the unbounded ray over the structural variables.
    pub fn ray(&self, col: usize, dir: i32) -> Vec<Rational> {
        let mut ray = vec![Rational::zero(); self.n];
        let sign = Rational::from_int(dir as i64);
        let e = self.nonbasic[col];
        if e < self.n {
            ray[e] = sign.clone();
        }
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.n {
                ray[b] = &self.tab[i][col] * &sign;
            }
        }
        ray
    }

    /// Reduced cost of a nonbasic variable; `None` if it is basic.
    pub fn reduced_cost(&self, var: usize) -> Option<&Rational> {
        match self.pos[var] {
            Pos::Nonbasic(c) => Some(&self.obj[c]),
            Pos::Basic(_) => None,
        }
    }

    /// Changes the bounds of a structural variable while keeping the basis dual
    /// feasible: a nonbasic variable is moved to the bound its reduced cost
    /// prefers. Returns `false` if that bound is infinite.
    pub fn set_bounds(&mut self, var: usize, lo: Option<Rational>, hi: Option<Rational>) -> bool {
        self.lower[var] = lo;
        self.upper[var] = hi;
        match self.pos[var] {
            Pos::Basic(_) => true,
            Pos::Nonbasic(c) => {
                let d = &self.obj[c];
                let target = match (&self.lower[var], &self.upper[var]) {
                    (Some(l), Some(u)) if l == u => l.clone(),
                    (lo, hi) => {
                        if d.is_positive() {
                            match hi {
                                Some(u) => u.clone(),
                                None => return false,
                            }
                        } else if d.is_negative() {
                            match lo {
                                Some(l) => l.clone(),
                                None => return false,
                            }
                        } else {
                            let x = &self.value[var];
                            match (lo, hi) {
                                (Some(l), _) if x < l => l.clone(),
                                (_, Some(u)) if x > u => u.clone(),
                                _ => x.clone(),
                            }
                        }
                    }
                };
                let delta = &target - &self.value[var];
                self.shift(c, &delta);
                true
            }
        }
    }

    /// Dual simplex from a dual feasible basis. Stops early once the objective
    /// (an upper bound on the optimum) is `<= cutoff`.
    pub fn solve_dual(
        &mut self,
        rule: PivotRule,
        cutoff: Option<&Rational>,
        max_pivots: u64,
    ) -> DualOutcome {
        let mut degenerate = 0u32;
        let start = self.pivots;
        loop {
            if let Some(cut) = cutoff {
                if self.objective_value() <= *cut {
                    return DualOutcome::Cutoff;
                }
            }
            if self.pivots - start >= max_pivots {
                return DualOutcome::IterationLimit;
            }
            let bland = rule == PivotRule::Bland || degenerate >= DEGENERATE_RUN;
            let mut leave: Option<(usize, Rational)> = None;
            for (i, &b) in self.basis.iter().enumerate() {
                let viol = if self.below(b) {
                    self.lower[b].as_ref().unwrap() - &self.value[b]
                } else if self.above(b) {
                    &self.value[b] - self.upper[b].as_ref().unwrap()
                } else {
                    continue;
                };
                let better = match &leave {
                    None => true,
                    Some((bi, bv)) => {
                        if bland {
                            b < self.basis[*bi]
                        } else {
                            viol > *bv || (viol == *bv && b < self.basis[*bi])
                        }
                    }
                };
                if better {
                    leave = Some((i, viol));
                }
            }
            let Some((r, _)) = leave else {
                return DualOutcome::Optimal;
            };
            let b = self.basis[r];
            let increase = self.below(b);
            let target = if increase {
                self.lower[b].clone().unwrap()
            } else {
                self.upper[b].clone().unwrap()
            };
            let mut enter: Option<(usize, Rational)> = None;
            for (j, t) in self.tab[r].iter().enumerate() {
                if t.is_zero() {
                    continue;
                }
                let v = self.nonbasic[j];
                // Moving x_v in direction `dir` must push x_b toward its bound.
                let ok = if t.is_positive() == increase {
                    self.can_increase(v)
                } else {
                    self.can_decrease(v)
                };
                if !ok {
                    continue;
                }
                let ratio = self.obj[j].abs() / t.abs();
                let better = match &enter {
                    None => true,
                    Some((bj, br)) => ratio < *br || (ratio == *br && v < self.nonbasic[*bj]),
                };
                if better {
                    enter = Some((j, ratio));
                }
            }
            let Some((c, ratio)) = enter else {
                return DualOutcome::Infeasible;
            };
            degenerate = if ratio.is_zero() { degenerate + 1 } else { 0 };
            let delta = (&target - &self.value[b]) / &self.tab[r][c];
            self.shift(c, &delta);
            self.pivot(r, c);
        }
    }

    /// True if every nonbasic reduced cost has the sign its position allows.
    pub fn is_dual_feasible(&self) -> bool {
        self.obj.iter().enumerate().all(|(j, d)| {
            let v = self.nonbasic[j];
            (!d.is_positive() || !self.can_increase(v))
                && (!d.is_negative() || !self.can_decrease(v))
        })
    }

    pub fn is_primal_feasible(&self) -> bool {
        (0..self.n + self.m).all(|v| !self.below(v) && !self.above(v))
    }
}
