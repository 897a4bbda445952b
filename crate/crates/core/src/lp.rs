//! Dense two-phase simplex for the small linear programs that show up around
//! polytopes: Chebyshev centers, bounding boxes, feasibility and boundedness
//! tests.

use crate::prelude::*;
use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
/// After this many consecutive degenerate pivots the entering rule switches
/// from Dantzig to Bland, which cannot cycle.
const DEGENERATE_STREAK: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<(&[f64], f64)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, *value)),
            _ => None,
        }
    }
}

/// `minimize cᵀx` subject to `≤` and `=` rows. Variables are free unless
/// marked nonnegative.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    cost: Vec<f64>,
    nonneg: Vec<bool>,
    leq: Vec<(Vec<f64>, f64)>,
    eq: Vec<(Vec<f64>, f64)>,
    /// `-1` for maximization, whose cost is stored negated.
    sense: f64,
}

impl LinearProgram {
    pub fn minimize(cost: Vec<f64>) -> Self {
        let n = cost.len();
        LinearProgram { cost, nonneg: vec![false; n], leq: Vec::new(), eq: Vec::new(), sense: 1.0 }
    }

    pub fn maximize(cost: Vec<f64>) -> Self {
        let mut lp = Self::minimize(cost.into_iter().map(|c| -c).collect());
        lp.sense = -1.0;
        lp
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn set_nonnegative(&mut self, var: usize) {
        self.nonneg[var] = true;
    }

    pub fn add_leq(&mut self, row: Vec<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.cost.len());
        self.leq.push((row, rhs));
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.cost.len());
        self.eq.push((row, rhs));
    }

    /// Solves the program; the reported value is the objective as posed.
    pub fn solve(&self) -> Result<LpOutcome> {
        let n = self.cost.len();
        // column layout: structural (pos, then neg for free vars), slacks, artificials
        let mut col_of = Vec::with_capacity(n);
        let mut ncols = 0;
        for j in 0..n {
            let neg = if self.nonneg[j] { None } else { Some(ncols + 1) };
            col_of.push((ncols, neg));
            ncols += if neg.is_some() { 2 } else { 1 };
        }
        let n_struct = ncols;

        struct Row {
            coeffs: Vec<(usize, f64)>,
            slack: bool,
            rhs: f64,
        }
        let mut rows: Vec<Row> = Vec::new();
        let mut push_row = |row: &[f64], rhs: f64, slack: bool| -> bool {
            let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                // 0 ≤ rhs or 0 = rhs
                return if slack { rhs >= -1e-12 } else { rhs.abs() <= 1e-12 };
            }
            let mut coeffs = Vec::new();
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    let (p, q) = col_of[j];
                    coeffs.push((p, v / scale));
                    if let Some(q) = q {
                        coeffs.push((q, -v / scale));
                    }
                }
            }
            rows.push(Row { coeffs, slack, rhs: rhs / scale });
            true
        };
        for (row, rhs) in &self.leq {
            if !push_row(row, *rhs, true) {
                return Ok(LpOutcome::Infeasible);
            }
        }
        for (row, rhs) in &self.eq {
            if !push_row(row, *rhs, false) {
                return Ok(LpOutcome::Infeasible);
            }
        }

        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.slack).count();
        let art0 = n_struct + n_slack;
        let total = art0 + m;
        let width = total + 1;
        let mut t = Tableau { m, width, data: vec![0.0; (m + 1) * width], basis: vec![0; m] };

        let mut slack_idx = n_struct;
        for (i, r) in rows.iter().enumerate() {
            let sign = if r.rhs < 0.0 { -1.0 } else { 1.0 };
            for &(c, v) in &r.coeffs {
                *t.at(i, c) += sign * v;
            }
            if r.slack {
                *t.at(i, slack_idx) = sign;
                slack_idx += 1;
            }
            *t.at(i, art0 + i) = 1.0;
            *t.at(i, total) = sign * r.rhs;
            t.basis[i] = art0 + i;
        }

        // phase 1: minimize the sum of artificials
        for c in 0..art0 {
            let s: f64 = (0..m).map(|i| t.get(i, c)).sum();
            *t.at(m, c) = -s;
        }
        let s: f64 = (0..m).map(|i| t.get(i, total)).sum();
        *t.at(m, total) = -s;
        t.run(art0, true)?;
        let rhs_scale = 1.0 + (0..m).map(|i| t.get(i, total).abs()).fold(0.0, f64::max);
        if -t.get(m, total) > 1e-9 * rhs_scale {
            return Ok(LpOutcome::Infeasible);
        }
        // drive remaining artificials out of the basis
        let mut i = 0;
        while i < t.m {
            if t.basis[i] >= art0 {
                let col = (0..art0).find(|&c| t.get(i, c).abs() > 1e-9);
                match col {
                    Some(c) => t.pivot(i, c),
                    None => {
                        t.remove_row(i);
                        continue;
                    }
                }
            }
            i += 1;
        }

        // phase 2
        let mut cost = vec![0.0; total];
        for j in 0..n {
            let (p, q) = col_of[j];
            cost[p] = self.cost[j];
            if let Some(q) = q {
                cost[q] = -self.cost[j];
            }
        }
        let m = t.m;
        for c in 0..t.width {
            *t.at(m, c) = if c < total { cost.get(c).copied().unwrap_or(0.0) } else { 0.0 };
        }
        for i in 0..m {
            let cb = cost[t.basis[i]];
            if cb != 0.0 {
                for c in 0..t.width {
                    let v = t.get(i, c);
                    *t.at(m, c) -= cb * v;
                }
            }
        }
        if t.run(art0, false)? == Run::Unbounded {
            return Ok(LpOutcome::Unbounded);
        }

        let mut y = vec![0.0; total];
        for i in 0..t.m {
            y[t.basis[i]] = t.get(i, total);
        }
        let x: Vec<f64> = col_of
            .iter()
            .map(|&(p, q)| y[p] - q.map_or(0.0, |q| y[q]))
            .collect();
        let value = self.sense * x.iter().zip(&self.cost).map(|(a, b)| a * b).sum::<f64>();
        Ok(LpOutcome::Optimal { x, value })
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Run {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.width + j]
    }

    fn remove_row(&mut self, i: usize) {
        let w = self.width;
        self.data.drain(i * w..(i + 1) * w);
        self.basis.remove(i);
        self.m -= 1;
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.get(r, c);
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.get(i, c);
            if f != 0.0 {
                for j in 0..w {
                    let v = self.data[r * w + j];
                    self.data[i * w + j] -= f * v;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Primal simplex iterations over columns `< allowed`. With `bounded` the
    /// objective is known to be bounded below, so a column with no positive
    /// pivot is rounding noise: it is skipped until the next pivot.
    fn run(&mut self, allowed: usize, bounded: bool) -> Result<Run> {
        let rhs = self.width - 1;
        let mut streak = 0;
        let mut blocked = vec![false; allowed];
        let limit = 5000 + 200 * (self.m + allowed);
        for _ in 0..limit {
            let obj = self.m;
            let entering = if streak < DEGENERATE_STREAK {
                let mut best = None;
                let mut best_v = -COST_TOL;
                for c in 0..allowed {
                    let v = self.get(obj, c);
                    if v < best_v && !blocked[c] {
                        best_v = v;
                        best = Some(c);
                    }
                }
                best
            } else {
                (0..allowed).find(|&c| self.get(obj, c) < -COST_TOL && !blocked[c])
            };
            let Some(c) = entering else {
                return Ok(Run::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.get(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.get(i, rhs).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14 || (ratio <= br + 1e-14 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                if bounded {
                    blocked[c] = true;
                    continue;
                }
                return Ok(Run::Unbounded);
            };
            streak = if ratio <= 1e-14 { streak + 1 } else { 0 };
            blocked.iter_mut().for_each(|b| *b = false);
            self.pivot(r, c);
        }
        Err(Error::Numerical("simplex iteration limit".to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_maximization() {
        // max 3x + 2y, x + y ≤ 4, x + 3y ≤ 6, x,y ≥ 0 → (4,0), 12
        let mut lp = LinearProgram::maximize(vec![3.0, 2.0]);
        lp.set_nonnegative(0);
        lp.set_nonnegative(1);
        lp.add_leq(vec![1.0, 1.0], 4.0);
        lp.add_leq(vec![1.0, 3.0], 6.0);
        let (x, v) = lp.solve().unwrap().optimal().map(|(x, v)| (x.to_vec(), v)).unwrap();
        assert!((x[0] - 4.0).abs() < 1e-12 && x[1].abs() < 1e-12);
        assert!((v - 12.0).abs() < 1e-12);
    }

    #[test]
    fn free_variables_and_negative_rhs() {
        // min x + y with x ≥ -2, y ≥ -3 (as -x ≤ 2, -y ≤ 3) → (-2,-3)
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.add_leq(vec![-1.0, 0.0], 2.0);
        lp.add_leq(vec![0.0, -1.0], 3.0);
        let out = lp.solve().unwrap();
        let (x, v) = out.optimal().unwrap();
        assert!((x[0] + 2.0).abs() < 1e-12 && (x[1] + 3.0).abs() < 1e-12);
        assert!((v + 5.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.add_leq(vec![1.0], 0.0);
        lp.add_leq(vec![-1.0], -1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.add_leq(vec![1.0], 0.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_rows_with_redundancy() {
        // x + y = 1, 2x + 2y = 2, min x - y with x,y ≥ 0 → (0,1)
        let mut lp = LinearProgram::minimize(vec![1.0, -1.0]);
        lp.set_nonnegative(0);
        lp.set_nonnegative(1);
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.add_eq(vec![2.0, 2.0], 2.0);
        let (x, v) = lp.solve().unwrap().optimal().map(|(x, v)| (x.to_vec(), v)).unwrap();
        assert!(x[0].abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // many constraints through the same vertex (0,0)
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        for k in 0..20 {
            let a = 0.1 + k as f64 * 0.05;
            lp.add_leq(vec![a, 1.0], 0.0);
            lp.add_leq(vec![1.0, a], 0.0);
        }
        lp.add_leq(vec![-1.0, 0.0], 1.0);
        lp.add_leq(vec![0.0, -1.0], 1.0);
        let (_, v) = lp.solve().unwrap().optimal().map(|(x, v)| (x.to_vec(), v)).unwrap();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn bounded_run_skips_columns_without_a_pivot() {
        // column 1 carries a spurious negative reduced cost and no positive entry
        let mut t = Tableau {
            m: 1,
            width: 4,
            data: vec![
                1.0, -1e-3, 1.0, 2.0, //
                -1.0, -1e-6, 0.0, 0.0,
            ],
            basis: vec![2],
        };
        assert_eq!(t.run(3, true).unwrap(), Run::Optimal);
        assert_eq!(t.basis, vec![0]);
        assert_eq!(t.get(0, 3), 2.0);
        t.data[5] = -1e-6;
        assert_eq!(t.run(3, false).unwrap(), Run::Unbounded);
    }
}
