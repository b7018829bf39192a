//! Minimum-cost load shedding on one sub-system.
//!
//! The decision variables are the shed power at each node, the output of each
//! generator and the active flow on each line. Every node balances
//!
//! ```text
//! sum(outgoing flow) - sum(incoming flow) = generation - (demand - shed)
//! ```
//!
//! and the objective is the cost-weighted shed power. Among equally cheap
//! solutions the total shed is minimized first, then the shed at each node
//! in index order, so shedding lands on the highest-indexed nodes. Storage
//! output is minimized last: batteries cover what other sources cannot and
//! absorb surplus.

use crate::lp::{self, LinearProgram, LpStatus};
use crate::model::{BusIdx, LineIdx, NetworkModel, SwitchState};

#[derive(Debug, Clone, PartialEq)]
pub struct ShedNode {
    /// Demand in MW.
    pub demand: f64,
    /// Cost per MWh of shed energy.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShedGenerator {
    pub node: usize,
    pub min: f64,
    pub max: f64,
    /// Storage is used last and charged from any surplus.
    pub storage: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShedLine {
    /// Node the positive flow direction leaves.
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SheddingProblem {
    pub nodes: Vec<ShedNode>,
    pub generators: Vec<ShedGenerator>,
    pub lines: Vec<ShedLine>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SheddingStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SheddingResult {
    pub shed: Vec<f64>,
    pub generation: Vec<f64>,
    pub line_flow: Vec<f64>,
    /// Cost rate of the shed power (cost per hour).
    pub objective: f64,
    pub status: SheddingStatus,
}

impl SheddingResult {
    fn all_shed(problem: &SheddingProblem, status: SheddingStatus) -> Self {
        let shed: Vec<f64> = problem.nodes.iter().map(|n| n.demand).collect();
        SheddingResult {
            objective: problem.nodes.iter().map(|n| n.cost * n.demand).sum(),
            shed,
            generation: problem.generators.iter().map(|g| g.min).collect(),
            line_flow: vec![0.0; problem.lines.len()],
            status,
        }
    }
}

impl SheddingProblem {
    /// Worst per-node balance violation of a candidate solution.
    pub fn balance_residual(&self, result: &SheddingResult) -> f64 {
        let mut net = vec![0.0; self.nodes.len()];
        for (k, n) in self.nodes.iter().enumerate() {
            net[k] -= n.demand - result.shed[k];
        }
        for (g, gen) in self.generators.iter().enumerate() {
            net[gen.node] += result.generation[g];
        }
        for (l, line) in self.lines.iter().enumerate() {
            net[line.from] -= result.line_flow[l];
            net[line.to] += result.line_flow[l];
        }
        net.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    fn to_lp(&self) -> LinearProgram {
        let nn = self.nodes.len();
        let ng = self.generators.len();
        let nl = self.lines.len();
        let nv = nn + ng + nl;
        let mut costs = vec![0.0; nv];
        let mut lower = vec![0.0; nv];
        let mut upper = vec![0.0; nv];
        let mut rows = vec![vec![0.0; nv]; nn];
        let mut rhs = vec![0.0; nn];
        for (k, node) in self.nodes.iter().enumerate() {
            costs[k] = node.cost;
            upper[k] = node.demand;
            rows[k][k] = -1.0;
            rhs[k] = -node.demand;
        }
        for (g, gen) in self.generators.iter().enumerate() {
            lower[nn + g] = gen.min;
            upper[nn + g] = gen.max;
            rows[gen.node][nn + g] -= 1.0;
        }
        for (l, line) in self.lines.iter().enumerate() {
            let v = nn + ng + l;
            lower[v] = -line.capacity;
            upper[v] = line.capacity;
            rows[line.from][v] += 1.0;
            rows[line.to][v] -= 1.0;
        }
        LinearProgram {
            costs,
            lower,
            upper,
            rows,
            rhs,
        }
    }
}

/// Solves the shedding problem to global optimality.
pub fn solve_shedding(problem: &SheddingProblem) -> SheddingResult {
    let nn = problem.nodes.len();
    let ng = problem.generators.len();
    if nn == 0 {
        return SheddingResult::all_shed(problem, SheddingStatus::Optimal);
    }
    if ng == 0 {
        // No source: every node must shed its whole demand.
        return SheddingResult::all_shed(problem, SheddingStatus::Optimal);
    }
    let lp = problem.to_lp();
    let mut ties = vec![(0..nn).map(|k| (k, 1.0)).collect::<Vec<_>>()];
    ties.extend((0..nn).map(|k| vec![(k, 1.0)]));
    let storage: Vec<(usize, f64)> = (0..ng)
        .filter(|&g| problem.generators[g].storage)
        .map(|g| (nn + g, 1.0))
        .collect();
    if !storage.is_empty() {
        ties.push(storage);
    }
    match lp::solve(&lp, &ties) {
        Ok(sol) if sol.status == LpStatus::Optimal => {
            let shed: Vec<f64> = sol.x[..nn].to_vec();
            SheddingResult {
                objective: shed.iter().zip(&problem.nodes).map(|(s, n)| s * n.cost).sum(),
                shed,
                generation: sol.x[nn..nn + ng].to_vec(),
                line_flow: sol.x[nn + ng..].to_vec(),
                status: SheddingStatus::Optimal,
            }
        }
        _ => SheddingResult::all_shed(problem, SheddingStatus::Infeasible),
    }
}

/// One power source inside a sub-system.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBound {
    pub bus: BusIdx,
    pub min: f64,
    pub max: f64,
}

/// Everything needed to pose the shedding problem for one sub-system.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemInput<'a> {
    pub buses: &'a [BusIdx],
    /// Demand per model bus in MW (including battery charging).
    pub demand_mw: &'a [f64],
    /// Shed cost per model bus.
    pub shed_cost: &'a [f64],
    pub sources: &'a [SourceBound],
    pub switch_states: &'a [SwitchState],
    pub failed_lines: &'a [bool],
    /// Scale factor per model line applied to its capacity.
    pub capacity_scale: &'a [f64],
}

/// Poses the shedding problem for a sub-system. Nodes follow the order of
/// `input.buses`; lines are the energized lines with both ends inside.
pub fn build_shedding_problem(model: &NetworkModel, input: &SubsystemInput<'_>) -> (SheddingProblem, Vec<LineIdx>) {
    let mut local = vec![usize::MAX; model.buses.len()];
    for (k, &b) in input.buses.iter().enumerate() {
        local[b] = k;
    }
    let nodes = input
        .buses
        .iter()
        .map(|&b| ShedNode {
            demand: input.demand_mw[b].max(0.0),
            cost: input.shed_cost[b],
        })
        .collect();
    let generators = input
        .sources
        .iter()
        .map(|s| ShedGenerator {
            node: local[s.bus],
            min: s.min,
            max: s.max,
            storage: false,
        })
        .collect();
    let mut lines = Vec::new();
    let mut line_ids = Vec::new();
    for (li, line) in model.lines.iter().enumerate() {
        if input.failed_lines[li] || local[line.from_bus] == usize::MAX || local[line.to_bus] == usize::MAX {
            continue;
        }
        if line.switchgear.iter().any(|&s| input.switch_states[s] == SwitchState::Open) {
            continue;
        }
        lines.push(ShedLine {
            from: local[line.from_bus],
            to: local[line.to_bus],
            capacity: line.capacity * input.capacity_scale[li],
        });
        line_ids.push(li);
    }
    (
        SheddingProblem {
            nodes,
            generators,
            lines,
        },
        line_ids,
    )
}
