//! Dense bounded-variable primal simplex for small linear programs
//!
//! ```text
//! minimize c'x  subject to  A x = b,  l <= x <= u
//! ```
//!
//! with finite bounds on every variable. Phase 1 drives artificial variables
//! out of the basis; a redundant equality keeps its artificial basic but
//! fixed at zero. Pricing is Dantzig's rule, falling back to Bland's rule
//! after a run of degenerate pivots.
//!
//! [`solve`] optionally breaks ties between optimal vertices: it fixes every
//! nonbasic variable with a nonzero reduced cost (which keeps the optimal
//! face) and then minimizes a sequence of secondary objectives in turn.

use thiserror::Error;

const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub costs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Dense equality rows, each of length `costs.len()`.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("dimension mismatch in linear program")]
    Dimension,
    #[error("variable {0} has an empty or infinite bound range")]
    BadBounds(usize),
    #[error("simplex exceeded its iteration limit")]
    IterationLimit,
}

/// A secondary objective applied after the primary optimum.
pub type TieBreak = Vec<(usize, f64)>;

struct Tableau {
    m: usize,
    n: usize,
    /// `m` rows of `n` columns: the current `B^-1 A`.
    t: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.n + c]
    }

    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let mut d = costs.to_vec();
        for r in 0..self.m {
            let cb = costs[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[r * self.n..(r + 1) * self.n];
            for (dj, a) in d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
        d
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let n = self.n;
        let p = self.t[row * n + col];
        for c in 0..n {
            self.t[row * n + c] /= p;
        }
        let pivot_row: Vec<f64> = self.t[row * n..(row + 1) * n].to_vec();
        for r in 0..self.m {
            if r == row {
                continue;
            }
            let f = self.t[r * n + col];
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                self.t[r * n + c] -= f * pivot_row[c];
            }
            self.t[r * n + col] = 0.0;
        }
        self.is_basic[self.basis[row]] = false;
        self.basis[row] = col;
        self.is_basic[col] = true;
        self.pivots += 1;
    }

    /// Primal simplex on `costs` restricted to columns with `allowed`.
    fn optimize(&mut self, costs: &[f64], allowed: &[bool]) -> Result<(), LpError> {
        let limit = 50 * (self.m + self.n) + 1000;
        let mut degenerate = 0;
        for _ in 0..limit {
            let d = self.reduced_costs(costs);
            let bland = degenerate >= DEGENERATE_RUN;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.n {
                if self.is_basic[j] || !allowed[j] || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let at_lower = self.x[j] <= self.lower[j];
                let dir = if at_lower && d[j] < -COST_TOL {
                    1.0
                } else if !at_lower && d[j] > COST_TOL {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d[j].abs() > best {
                    best = d[j].abs();
                    entering = Some((j, dir));
                }
            }
            let Some((j, dir)) = entering else {
                return Ok(());
            };

            // Ratio test; the entering variable's own range is a candidate.
            let mut step = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let alpha = self.at(r, j) * dir;
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[r];
                let (limit, bound) = if alpha > 0.0 {
                    ((self.x[b] - self.lower[b]) / alpha, self.lower[b])
                } else {
                    ((self.upper[b] - self.x[b]) / -alpha, self.upper[b])
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    _ if limit < step - FEAS_TOL => true,
                    Some((lr, _)) if limit <= step + FEAS_TOL => {
                        if bland {
                            b < self.basis[lr]
                        } else {
                            self.at(r, j).abs() > self.at(lr, j).abs()
                        }
                    }
                    _ => false,
                };
                if better {
                    step = limit.min(step);
                    leave = Some((r, bound));
                }
            }

            degenerate = if step <= FEAS_TOL { degenerate + 1 } else { 0 };
            for r in 0..self.m {
                let b = self.basis[r];
                self.x[b] -= step * dir * self.at(r, j);
            }
            match leave {
                None => {
                    // Bound flip.
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((r, bound)) => {
                    let b = self.basis[r];
                    self.x[j] += step * dir;
                    self.x[b] = bound;
                    self.pivot(r, j);
                }
            }
        }
        Err(LpError::IterationLimit)
    }
}

fn validate(lp: &LinearProgram) -> Result<(), LpError> {
    let n = lp.costs.len();
    if lp.lower.len() != n || lp.upper.len() != n || lp.rows.len() != lp.rhs.len() {
        return Err(LpError::Dimension);
    }
    if lp.rows.iter().any(|r| r.len() != n) {
        return Err(LpError::Dimension);
    }
    for j in 0..n {
        if !lp.lower[j].is_finite() || !lp.upper[j].is_finite() || lp.lower[j] > lp.upper[j] {
            return Err(LpError::BadBounds(j));
        }
    }
    Ok(())
}

/// Solves the program, then minimizes each tie-break objective in order over
/// the optimal face left by the previous stages.
pub fn solve(lp: &LinearProgram, tie_breaks: &[TieBreak]) -> Result<LpSolution, LpError> {
    validate(lp)?;
    let n = lp.costs.len();
    let m = lp.rows.len();
    let total = n + m;

    let mut x = vec![0.0; total];
    x[..n].copy_from_slice(&lp.lower);
    let mut t = vec![0.0; m * total];
    for r in 0..m {
        let residual = lp.rhs[r] - lp.rows[r].iter().zip(&lp.lower).map(|(a, l)| a * l).sum::<f64>();
        let sign = if residual < 0.0 { -1.0 } else { 1.0 };
        for c in 0..n {
            t[r * total + c] = sign * lp.rows[r][c];
        }
        t[r * total + n + r] = 1.0;
        x[n + r] = residual.abs();
    }
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    lower.extend(std::iter::repeat_n(0.0, m));
    upper.extend(x[n..].iter().copied());
    let mut is_basic = vec![false; total];
    for b in is_basic.iter_mut().skip(n) {
        *b = true;
    }
    let mut tab = Tableau {
        m,
        n: total,
        t,
        basis: (n..total).collect(),
        is_basic,
        x,
        lower,
        upper,
        pivots: 0,
    };

    // Phase 1.
    let mut phase1 = vec![0.0; total];
    for c in phase1.iter_mut().skip(n) {
        *c = 1.0;
    }
    let all = vec![true; total];
    tab.optimize(&phase1, &all)?;
    let infeasibility: f64 = tab.x[n..].iter().sum();
    let scale = 1.0 + lp.rhs.iter().map(|b| b.abs()).fold(0.0, f64::max);
    if infeasibility > 1e-7 * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: tab.x[..n].to_vec(),
            objective: f64::NAN,
            pivots: tab.pivots,
        });
    }
    // Fix artificials at zero and pivot basic ones out where possible.
    for a in n..total {
        tab.upper[a] = 0.0;
        tab.x[a] = 0.0;
    }
    for r in 0..m {
        if tab.basis[r] < n {
            continue;
        }
        if let Some(c) = (0..n)
            .filter(|&c| !tab.is_basic[c])
            .max_by(|&a, &b| tab.at(r, a).abs().total_cmp(&tab.at(r, b).abs()))
            .filter(|&c| tab.at(r, c).abs() > 1e-7)
        {
            tab.pivot(r, c);
        }
    }

    // Phase 2.
    let mut allowed = vec![true; total];
    for a in allowed.iter_mut().skip(n) {
        *a = false;
    }
    let mut costs = lp.costs.clone();
    costs.extend(std::iter::repeat_n(0.0, m));
    tab.optimize(&costs, &allowed)?;
    let objective: f64 = lp.costs.iter().zip(&tab.x).map(|(c, x)| c * x).sum();

    let mut stage_costs = costs;
    for tie in tie_breaks {
        let d = tab.reduced_costs(&stage_costs);
        for j in 0..n {
            if !tab.is_basic[j] && d[j].abs() > COST_TOL {
                tab.lower[j] = tab.x[j];
                tab.upper[j] = tab.x[j];
            }
        }
        stage_costs = vec![0.0; total];
        for &(j, c) in tie {
            stage_costs[j] = c;
        }
        tab.optimize(&stage_costs, &allowed)?;
    }

    let mut xs = tab.x[..n].to_vec();
    for (j, v) in xs.iter_mut().enumerate() {
        *v = v.clamp(lp.lower[j], lp.upper[j]);
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x: xs,
        objective,
        pivots: tab.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(lp: &LinearProgram, x: &[f64]) -> f64 {
        lp.rows
            .iter()
            .zip(&lp.rhs)
            .map(|(r, b)| (r.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn small_program() {
        // min -x - 2y, x + y = 3, 0<=x<=2, 0<=y<=2  ->  x=1, y=2
        let lp = LinearProgram {
            costs: vec![-1.0, -2.0],
            lower: vec![0.0, 0.0],
            upper: vec![2.0, 2.0],
            rows: vec![vec![1.0, 1.0]],
            rhs: vec![3.0],
        };
        let sol = solve(&lp, &[]).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] - 2.0).abs() < 1e-12);
        assert!((sol.objective + 5.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_program() {
        let lp = LinearProgram {
            costs: vec![0.0, 0.0],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            rows: vec![vec![1.0, 1.0]],
            rhs: vec![3.0],
        };
        assert_eq!(solve(&lp, &[]).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let lp = LinearProgram {
            costs: vec![1.0, 1.0, 0.0],
            lower: vec![0.0, 0.0, -5.0],
            upper: vec![4.0, 4.0, 5.0],
            rows: vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, -1.0], vec![1.0, 1.0, 0.0]],
            rhs: vec![2.0, 1.0, 3.0],
        };
        let sol = solve(&lp, &[]).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!(residual(&lp, &sol.x) < 1e-9);
    }

    #[test]
    fn tie_break_prefers_first_variable_small() {
        // x + y = 1 with equal costs; minimizing x first gives x=0, y=1.
        let lp = LinearProgram {
            costs: vec![1.0, 1.0],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            rows: vec![vec![1.0, 1.0]],
            rhs: vec![1.0],
        };
        let sol = solve(&lp, &[vec![(0, 1.0)], vec![(1, 1.0)]]).unwrap();
        assert_eq!(sol.x, vec![0.0, 1.0]);
        let sol = solve(&lp, &[vec![(1, 1.0)]]).unwrap();
        assert_eq!(sol.x, vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_infinite_bounds() {
        let lp = LinearProgram {
            costs: vec![1.0],
            lower: vec![0.0],
            upper: vec![f64::INFINITY],
            rows: vec![],
            rhs: vec![],
        };
        assert_eq!(solve(&lp, &[]), Err(LpError::BadBounds(0)));
    }
}
