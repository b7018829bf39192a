//! Forward-backward sweep load flow for radial sub-systems.
//!
//! Works in per unit on the problem's bases with constant-power loads.
//! The backward sweep accumulates branch currents from the leaves towards the
//! slack bus and the forward sweep updates voltages from the slack bus
//! outwards, until the largest voltage change between sweeps falls below the
//! tolerance.

use std::collections::VecDeque;

use num_complex::Complex64;
use thiserror::Error;

use crate::model::LineIdx;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Line this branch stands for in the network model.
    pub line: LineIdx,
    pub from: usize,
    pub to: usize,
    pub resistance: f64,
    pub reactance: f64,
}

/// A rooted radial sub-system. Buses are numbered locally `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadFlowProblem {
    pub slack: usize,
    pub slack_voltage: f64,
    /// Net consumption per bus in MW (demand minus local generation).
    pub net_p_mw: Vec<f64>,
    /// Net reactive consumption per bus in MVAr.
    pub net_q_mvar: Vec<f64>,
    pub branches: Vec<Branch>,
    pub base_mva: f64,
    pub base_kv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadFlowSolution {
    pub voltage: Vec<Complex64>,
    pub bus_voltage_magnitude: Vec<f64>,
    /// Sending-end active power per branch in MW, positive in the branch's
    /// from-to direction.
    pub line_active_flow: Vec<f64>,
    pub line_reactive_flow: Vec<f64>,
    pub total_losses: f64,
    /// Power delivered by the slack bus to the network in MW / MVAr,
    /// including its own consumption.
    pub slack_p_mw: f64,
    pub slack_q_mvar: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadFlowError {
    #[error("slack bus {0} out of range")]
    BadSlack(usize),
    #[error("branch {0} references a bus out of range")]
    BadBranch(usize),
    #[error("injection vectors do not match the bus count")]
    SizeMismatch,
    #[error("network is not radial")]
    NonRadial,
    #[error("bus {0} is not connected to the slack bus")]
    Disconnected(usize),
    #[error("tolerance must be positive")]
    BadTolerance,
}

impl LoadFlowProblem {
    pub fn bus_count(&self) -> usize {
        self.net_p_mw.len()
    }

    /// Orders buses outward from the slack. Returns the visiting order and,
    /// per bus, the branch that feeds it and the bus at the other end.
    fn orient(&self) -> Result<(Vec<usize>, Vec<Option<(usize, usize)>>), LoadFlowError> {
        let n = self.bus_count();
        if self.net_q_mvar.len() != n {
            return Err(LoadFlowError::SizeMismatch);
        }
        if self.slack >= n {
            return Err(LoadFlowError::BadSlack(self.slack));
        }
        if self.branches.len() + 1 != n {
            return Err(LoadFlowError::NonRadial);
        }
        let mut adjacency = vec![Vec::new(); n];
        for (bi, b) in self.branches.iter().enumerate() {
            if b.from >= n || b.to >= n || b.from == b.to {
                return Err(LoadFlowError::BadBranch(bi));
            }
            adjacency[b.from].push(bi);
            adjacency[b.to].push(bi);
        }
        let mut feeder: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([self.slack]);
        seen[self.slack] = true;
        while let Some(bus) = queue.pop_front() {
            order.push(bus);
            for &bi in &adjacency[bus] {
                if feeder[bus].is_some_and(|(f, _)| f == bi) {
                    continue;
                }
                let b = &self.branches[bi];
                let next = if b.from == bus { b.to } else { b.from };
                if seen[next] {
                    return Err(LoadFlowError::NonRadial);
                }
                seen[next] = true;
                feeder[next] = Some((bi, bus));
                queue.push_back(next);
            }
        }
        if let Some(b) = seen.iter().position(|s| !s) {
            return Err(LoadFlowError::Disconnected(b));
        }
        Ok((order, feeder))
    }
}

fn branch_currents(
    order: &[usize],
    feeder: &[Option<(usize, usize)>],
    load: &[Complex64],
    voltage: &[Complex64],
    currents: &mut [Complex64],
) {
    let n = voltage.len();
    let mut bus_current = vec![Complex64::new(0.0, 0.0); n];
    for b in 0..n {
        bus_current[b] = if load[b] == Complex64::new(0.0, 0.0) {
            Complex64::new(0.0, 0.0)
        } else {
            (load[b] / voltage[b]).conj()
        };
    }
    for &b in order.iter().rev() {
        if let Some((bi, parent)) = feeder[b] {
            let ib = bus_current[b];
            currents[bi] = ib;
            bus_current[parent] += ib;
        }
    }
}

/// Solves the load flow by forward-backward sweep. Non-convergence is
/// reported through `converged` with the last iterate, never as an error.
pub fn solve_fbs(
    problem: &LoadFlowProblem,
    tolerance: f64,
    max_iter: usize,
) -> Result<LoadFlowSolution, LoadFlowError> {
    if !(tolerance > 0.0) {
        return Err(LoadFlowError::BadTolerance);
    }
    let (order, feeder) = problem.orient()?;
    let n = problem.bus_count();
    let base = problem.base_mva;
    let load: Vec<Complex64> = (0..n)
        .map(|b| Complex64::new(problem.net_p_mw[b] / base, problem.net_q_mvar[b] / base))
        .collect();
    let slack_v = Complex64::new(problem.slack_voltage, 0.0);
    let mut voltage = vec![slack_v; n];
    let mut currents = vec![Complex64::new(0.0, 0.0); problem.branches.len()];
    let z: Vec<Complex64> = problem
        .branches
        .iter()
        .map(|b| Complex64::new(b.resistance, b.reactance))
        .collect();

    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter.max(1) {
        iterations += 1;
        branch_currents(&order, &feeder, &load, &voltage, &mut currents);
        let mut max_change: f64 = 0.0;
        for &b in &order {
            if let Some((bi, parent)) = feeder[b] {
                let v = voltage[parent] - z[bi] * currents[bi];
                max_change = max_change.max((v - voltage[b]).norm());
                voltage[b] = v;
            }
        }
        if max_change < tolerance {
            converged = true;
            break;
        }
    }
    branch_currents(&order, &feeder, &load, &voltage, &mut currents);

    let mut line_active_flow = vec![0.0; problem.branches.len()];
    let mut line_reactive_flow = vec![0.0; problem.branches.len()];
    let mut losses = 0.0;
    let mut slack_out = load[problem.slack];
    for &b in &order {
        if let Some((bi, parent)) = feeder[b] {
            let sending = voltage[parent] * currents[bi].conj();
            let sign = if problem.branches[bi].from == parent { 1.0 } else { -1.0 };
            line_active_flow[bi] = sign * sending.re * base;
            line_reactive_flow[bi] = sign * sending.im * base;
            losses += currents[bi].norm_sqr() * problem.branches[bi].resistance;
            if parent == problem.slack {
                slack_out += sending;
            }
        }
    }

    Ok(LoadFlowSolution {
        bus_voltage_magnitude: voltage.iter().map(|v| v.norm()).collect(),
        voltage,
        line_active_flow,
        line_reactive_flow,
        total_losses: losses * base,
        slack_p_mw: slack_out.re * base,
        slack_q_mvar: slack_out.im * base,
        iterations,
        converged,
    })
}

/// Converts an impedance in ohms to per unit on the given bases.
pub fn ohms_to_pu(ohms: f64, base_kv: f64, base_mva: f64) -> f64 {
    ohms * base_mva / (base_kv * base_kv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain(loads: &[(f64, f64)], z: (f64, f64)) -> LoadFlowProblem {
        let n = loads.len() + 1;
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for (i, &(lp, lq)) in loads.iter().enumerate() {
            p[i + 1] = lp;
            q[i + 1] = lq;
        }
        LoadFlowProblem {
            slack: 0,
            slack_voltage: 1.0,
            net_p_mw: p,
            net_q_mvar: q,
            branches: (0..loads.len())
                .map(|i| Branch {
                    line: i,
                    from: i,
                    to: i + 1,
                    resistance: z.0,
                    reactance: z.1,
                })
                .collect(),
            base_mva: 1.0,
            base_kv: 1.0,
        }
    }

    #[test]
    fn no_load_is_flat() {
        let sol = solve_fbs(&chain(&[(0.0, 0.0); 3], (0.01, 0.02)), 1e-8, 50).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 1);
        assert!(sol.bus_voltage_magnitude.iter().all(|&v| v == 1.0));
        assert!(sol.line_active_flow.iter().all(|&f| f == 0.0));
        assert_eq!(sol.total_losses, 0.0);
    }

    #[test]
    fn two_bus_matches_quadratic_root() {
        // |V|^4 + (2(rP+xQ) - 1)|V|^2 + |z|^2 |S|^2 = 0 for a lossy line.
        let (r, x, p, q): (f64, f64, f64, f64) = (0.01, 0.01, 0.1, 0.05);
        let b = 2.0 * (r * p + x * q) - 1.0;
        let c = (r * r + x * x) * (p * p + q * q);
        let v2 = (-b + (b * b - 4.0 * c).sqrt()) / 2.0;
        let sol = solve_fbs(&chain(&[(p, q)], (r, x)), 1e-12, 100).unwrap();
        assert!(sol.converged);
        assert!((sol.bus_voltage_magnitude[1] - v2.sqrt()).abs() < 1e-10);
        assert!((sol.bus_voltage_magnitude[1] - 0.99850).abs() < 5e-6);
    }

    #[test]
    fn chain_flow_telescopes() {
        let prob = chain(&[(0.1, 0.03); 3], (0.02, 0.01));
        let sol = solve_fbs(&prob, 1e-10, 50).unwrap();
        assert!(sol.converged);
        let demand: f64 = prob.net_p_mw.iter().sum();
        assert!((sol.line_active_flow[0] - demand - sol.total_losses).abs() < 1e-9);
        let v = &sol.bus_voltage_magnitude;
        assert!(v[0] > v[1] && v[1] > v[2] && v[2] > v[3]);
    }

    #[test]
    fn reversed_branch_reports_negative_flow() {
        let mut prob = chain(&[(0.1, 0.0)], (0.01, 0.0));
        prob.branches[0].from = 1;
        prob.branches[0].to = 0;
        let sol = solve_fbs(&prob, 1e-10, 50).unwrap();
        assert!(sol.line_active_flow[0] < -0.1);
    }

    #[test]
    fn rejects_bad_topologies() {
        let mut prob = chain(&[(0.1, 0.0); 2], (0.01, 0.0));
        prob.branches[1].from = 1;
        prob.branches[1].to = 0;
        prob.branches.push(Branch {
            line: 9,
            from: 1,
            to: 2,
            resistance: 0.0,
            reactance: 0.01,
        });
        assert_eq!(solve_fbs(&prob, 1e-8, 50), Err(LoadFlowError::NonRadial));
        let mut prob = chain(&[(0.1, 0.0); 2], (0.01, 0.0));
        prob.slack = 7;
        assert_eq!(solve_fbs(&prob, 1e-8, 50), Err(LoadFlowError::BadSlack(7)));
    }

    #[test]
    fn overload_reports_non_convergence() {
        let sol = solve_fbs(&chain(&[(50.0, 50.0)], (0.5, 0.5)), 1e-8, 50).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 50);
    }

    #[test]
    fn ohm_conversion() {
        // 12.66 kV / 10 MVA base gives 16.0276 ohm.
        assert!((ohms_to_pu(16.027_56, 12.66, 10.0) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn balance_and_convex_losses(
            loads in proptest::collection::vec((0.0f64..0.3, 0.0f64..0.2), 1..6),
            r in 0.001f64..0.05,
            x in 0.001f64..0.05,
        ) {
            let prob = chain(&loads, (r, x));
            let sol = solve_fbs(&prob, 1e-10, 100).unwrap();
            prop_assume!(sol.converged);
            let demand: f64 = prob.net_p_mw.iter().sum();
            prop_assert!((sol.slack_p_mw - demand - sol.total_losses).abs() < 1e-9);

            let half = LoadFlowProblem {
                net_p_mw: prob.net_p_mw.iter().map(|p| p / 2.0).collect(),
                net_q_mvar: prob.net_q_mvar.iter().map(|q| q / 2.0).collect(),
                ..prob.clone()
            };
            let sol_half = solve_fbs(&half, 1e-10, 100).unwrap();
            if sol.total_losses > 1e-12 {
                prop_assert!(sol_half.total_losses < sol.total_losses / 2.0);
            }
        }
    }
}
