//! Independent reference solvers and fixtures shared by the integration
//! tests and the acceptance run.
#![allow(dead_code)]

use gridrel::loadflow::LoadFlowProblem;
use gridrel::model::{build_network, NetworkModel};
use gridrel::shedding::{ShedGenerator, ShedLine, ShedNode, SheddingProblem};
use num_complex::Complex64;
use rand::Rng;

const EPS: f64 = 1e-9;

/// Outcome of the reference LP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleLp {
    Optimal(f64),
    Infeasible,
}

/// Two-phase tableau simplex with Bland's rule on
/// `min c x  s.t.  A x = b,  x >= 0`.
fn standard_simplex(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> OracleLp {
    let m = a.len();
    let n = c.len();
    // Columns: x (n), artificials (m), rhs.
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let pivot = |t: &mut Vec<Vec<f64>>, r: usize, col: usize| {
        let p = t[r][col];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let row = t[r].clone();
        for (i, ti) in t.iter_mut().enumerate() {
            if i != r && ti[col] != 0.0 {
                let f = ti[col];
                for (v, rv) in ti.iter_mut().zip(&row) {
                    *v -= f * rv;
                }
            }
        }
    };

    // Runs Bland's rule on the given cost vector over the allowed columns.
    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let reduced = cost[j] - (0..m).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
                if reduced < -EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if t[i][col] > EPS {
                    let ratio = t[i][width - 1] / t[i][col];
                    let better = match leave {
                        None => true,
                        Some((r, best)) => ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[r]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                panic!("reference LP is unbounded");
            };
            pivot(t, r, col);
            basis[r] = col;
        }
    };

    let mut phase1 = vec![0.0; n + m];
    for v in &mut phase1[n..] {
        *v = 1.0;
    }
    run(&mut t, &mut basis, &phase1, n + m);
    let infeasibility: f64 = (0..m).filter(|&i| basis[i] >= n).map(|i| t[i][width - 1]).sum();
    if infeasibility > 1e-7 {
        return OracleLp::Infeasible;
    }
    // Drive remaining artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > 1e-7 && !basis.contains(&j)) {
                pivot(&mut t, i, j);
                basis[i] = j;
            }
        }
    }
    let mut phase2 = vec![0.0; n + m];
    phase2[..n].copy_from_slice(c);
    // Artificials left in the basis sit at zero on redundant rows; keep
    // them out of the entering candidates.
    run(&mut t, &mut basis, &phase2, n);
    let obj = (0..m).map(|i| phase2[basis[i]] * t[i][width - 1]).sum();
    OracleLp::Optimal(obj)
}

/// Reference optimum of `min c x, A x = b, l <= x <= u` (finite bounds).
pub fn bounded_lp(c: &[f64], a: &[Vec<f64>], b: &[f64], lower: &[f64], upper: &[f64]) -> OracleLp {
    let n = c.len();
    let m = a.len();
    // x = l + y, y + s = u - l, y, s >= 0.
    let mut rows = Vec::with_capacity(m + n);
    let mut rhs = Vec::with_capacity(m + n);
    for i in 0..m {
        let mut row = vec![0.0; 2 * n];
        row[..n].copy_from_slice(&a[i]);
        rows.push(row);
        rhs.push(b[i] - (0..n).map(|j| a[i][j] * lower[j]).sum::<f64>());
    }
    for j in 0..n {
        let mut row = vec![0.0; 2 * n];
        row[j] = 1.0;
        row[n + j] = 1.0;
        rows.push(row);
        rhs.push(upper[j] - lower[j]);
    }
    let mut cost = vec![0.0; 2 * n];
    cost[..n].copy_from_slice(c);
    match standard_simplex(&cost, &rows, &rhs) {
        OracleLp::Optimal(v) => OracleLp::Optimal(v + (0..n).map(|j| c[j] * lower[j]).sum::<f64>()),
        OracleLp::Infeasible => OracleLp::Infeasible,
    }
}

/// Reference optimum of the shedding problem, posed from scratch.
pub fn shedding_oracle(p: &SheddingProblem) -> OracleLp {
    let nn = p.nodes.len();
    let ng = p.generators.len();
    let nl = p.lines.len();
    let nv = nn + ng + nl;
    let mut c = vec![0.0; nv];
    let mut lower = vec![0.0; nv];
    let mut upper = vec![0.0; nv];
    let mut a = vec![vec![0.0; nv]; nn];
    let mut b = vec![0.0; nn];
    // generation - (demand - shed) - outflow + inflow = 0
    for (k, node) in p.nodes.iter().enumerate() {
        c[k] = node.cost;
        upper[k] = node.demand;
        a[k][k] = 1.0;
        b[k] = node.demand;
    }
    for (g, gen) in p.generators.iter().enumerate() {
        lower[nn + g] = gen.min;
        upper[nn + g] = gen.max;
        a[gen.node][nn + g] = 1.0;
    }
    for (l, line) in p.lines.iter().enumerate() {
        let v = nn + ng + l;
        lower[v] = -line.capacity;
        upper[v] = line.capacity;
        a[line.from][v] -= 1.0;
        a[line.to][v] += 1.0;
    }
    if ng == 0 {
        // Nothing can supply the nodes: the only point is full shedding.
        return OracleLp::Optimal(p.nodes.iter().map(|n| n.cost * n.demand).sum());
    }
    bounded_lp(&c, &a, &b, &lower, &upper)
}

/// Random connected instance with at most 8 nodes and 10 lines.
pub fn random_shedding_problem(rng: &mut impl Rng) -> SheddingProblem {
    let nn = rng.random_range(1..=8);
    let nodes = (0..nn)
        .map(|_| ShedNode {
            demand: if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..2.0) },
            cost: rng.random_range(0..5) as f64 + if rng.random_bool(0.5) { rng.random_range(0.0..1.0) } else { 0.0 },
        })
        .collect();
    let mut lines = Vec::new();
    for k in 1..nn {
        let parent = rng.random_range(0..k);
        let (from, to) = if rng.random_bool(0.5) { (parent, k) } else { (k, parent) };
        lines.push(ShedLine {
            from,
            to,
            capacity: rng.random_range(0.1..3.0),
        });
    }
    while lines.len() < 10 && nn > 1 && rng.random_bool(0.4) {
        let from = rng.random_range(0..nn);
        let to = rng.random_range(0..nn);
        if from != to {
            lines.push(ShedLine {
                from,
                to,
                capacity: rng.random_range(0.1..3.0),
            });
        }
    }
    let ng = rng.random_range(0..=3);
    let generators = (0..ng)
        .map(|_| {
            let min = if rng.random_bool(0.15) {
                rng.random_range(0.0..1.0)
            } else if rng.random_bool(0.3) {
                -rng.random_range(0.0..1.0)
            } else {
                0.0
            };
            ShedGenerator {
                node: rng.random_range(0..nn),
                min,
                max: min + rng.random_range(0.0..4.0),
                storage: rng.random_bool(0.2),
            }
        })
        .collect();
    SheddingProblem { nodes, generators, lines }
}

/// Bus voltage magnitudes from the full AC power-flow equations, solved by
/// damped Newton iterations in rectangular coordinates.
pub fn newton_voltages(p: &LoadFlowProblem) -> Vec<f64> {
    let n = p.net_p_mw.len();
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for br in &p.branches {
        let yb = Complex64::new(1.0, 0.0) / Complex64::new(br.resistance, br.reactance);
        y[br.from][br.from] += yb;
        y[br.to][br.to] += yb;
        y[br.from][br.to] -= yb;
        y[br.to][br.from] -= yb;
    }
    let others: Vec<usize> = (0..n).filter(|&i| i != p.slack).collect();
    let injection: Vec<Complex64> = (0..n)
        .map(|i| -Complex64::new(p.net_p_mw[i], p.net_q_mvar[i]) / p.base_mva)
        .collect();

    let voltages = |x: &[f64]| -> Vec<Complex64> {
        let mut v = vec![Complex64::new(p.slack_voltage, 0.0); n];
        for (k, &i) in others.iter().enumerate() {
            v[i] = Complex64::new(x[2 * k], x[2 * k + 1]);
        }
        v
    };
    let mismatch = |x: &[f64]| -> Vec<f64> {
        let v = voltages(x);
        let mut out = Vec::with_capacity(2 * others.len());
        for &i in &others {
            let current: Complex64 = (0..n).map(|j| y[i][j] * v[j]).sum();
            let s = v[i] * current.conj() - injection[i];
            out.push(s.re);
            out.push(s.im);
        }
        out
    };
    let norm = |f: &[f64]| f.iter().map(|v| v * v).sum::<f64>().sqrt();

    let m = 2 * others.len();
    let mut x: Vec<f64> = others.iter().flat_map(|_| [p.slack_voltage, 0.0]).collect();
    for _ in 0..100 {
        let f = mismatch(&x);
        let fnorm = norm(&f);
        if fnorm < 1e-14 {
            break;
        }
        // Central-difference Jacobian.
        let mut jac = vec![vec![0.0; m]; m];
        for c in 0..m {
            let h = 1e-7;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let (fp, fm) = (mismatch(&xp), mismatch(&xm));
            for r in 0..m {
                jac[r][c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let dx = gauss_solve(jac, f.iter().map(|v| -v).collect());
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + step * d).collect();
            if norm(&mismatch(&trial)) < fnorm || step < 1e-6 {
                x = trial;
                break;
            }
            step *= 0.5;
        }
    }
    voltages(&x).iter().map(|v| v.norm()).collect()
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// The bundled IEEE-33 feeder at peak load, without local generation.
pub fn ieee33_base_case() -> (NetworkModel, LoadFlowProblem) {
    let spec = gridrel::io::scenario::builtin_network("ieee33")
        .unwrap()
        .unwrap()
        .without_generation()
        .without_ict();
    let model = build_network(&spec).unwrap();
    let problem = LoadFlowProblem {
        slack: model.distribution_systems[0].root,
        slack_voltage: model.slack_voltage,
        net_p_mw: model.buses.iter().map(|b| b.load.as_ref().map_or(0.0, |l| l.peak_mw)).collect(),
        net_q_mvar: model.buses.iter().map(|b| b.load.as_ref().map_or(0.0, |l| l.peak_mvar)).collect(),
        branches: model
            .lines
            .iter()
            .enumerate()
            .map(|(i, l)| gridrel::loadflow::Branch {
                line: i,
                from: l.from_bus,
                to: l.to_bus,
                resistance: l.resistance,
                reactance: l.reactance,
            })
            .collect(),
        base_mva: model.base_mva,
        base_kv: model.base_kv,
    };
    (model, problem)
}

/// Hand-computed closed-form values of the bundled six-bus feeder:
/// per load point (id, failures per year, outage hours per year).
pub const FEEDER6_LOAD_POINTS: [(&str, f64, f64); 5] = [
    ("B2", 10.5, 20.0),
    ("B3", 10.5, 30.0),
    ("B4", 10.5, 37.5),
    ("B5", 10.5, 32.0),
    ("B6", 10.5, 32.0),
];
pub const FEEDER6_SAIFI: f64 = 10.5;
pub const FEEDER6_SAIDI: f64 = 4250.0 / 150.0;
pub const FEEDER6_ENS: f64 = 42.5;

/// Random radial network of 2 to 6 buses with bus 0 as slack.
pub fn random_radial_problem(rng: &mut impl Rng) -> LoadFlowProblem {
    let n = rng.random_range(2..=6);
    let branches = (1..n)
        .enumerate()
        .map(|(i, k)| {
            let parent = rng.random_range(0..k);
            let (from, to) = if rng.random_bool(0.5) { (parent, k) } else { (k, parent) };
            gridrel::loadflow::Branch {
                line: i,
                from,
                to,
                resistance: rng.random_range(0.002..0.05),
                reactance: rng.random_range(0.002..0.05),
            }
        })
        .collect();
    let mut net_p_mw: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..2.0)).collect();
    let mut net_q_mvar: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..1.0)).collect();
    net_p_mw[0] = 0.0;
    net_q_mvar[0] = 0.0;
    LoadFlowProblem {
        slack: 0,
        slack_voltage: rng.random_range(0.98..1.05),
        net_p_mw,
        net_q_mvar,
        branches,
        base_mva: 10.0,
        base_kv: 12.66,
    }
}

/// Largest per-bus complex power mismatch (p.u.) of a voltage vector
/// against the bus-admittance equations, slack bus excluded.
pub fn power_mismatch(p: &LoadFlowProblem, v: &[Complex64]) -> f64 {
    let n = v.len();
    let mut current = vec![Complex64::new(0.0, 0.0); n];
    for br in &p.branches {
        let i = (v[br.from] - v[br.to]) / Complex64::new(br.resistance, br.reactance);
        current[br.from] += i;
        current[br.to] -= i;
    }
    (0..n)
        .filter(|&i| i != p.slack)
        .map(|i| {
            let injected = v[i] * current[i].conj();
            let wanted = -Complex64::new(p.net_p_mw[i], p.net_q_mvar[i]) / p.base_mva;
            (injected - wanted).norm()
        })
        .fold(0.0, f64::max)
}
