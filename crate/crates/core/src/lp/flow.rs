//! Flow programs over the layered graph.
//!
//! Variables are `f_e^(q,s)` for each layered edge and duplication choice.
//! Conservation holds per `(layered node, status)`: transmitted copies (scaled
//! by `ζ`, split on reaching their destination), reloaded copies and exogenous
//! arrivals balance the outgoing flow. The multicast program ranges over `Ω`;
//! the unicast program is the same construction restricted to `(b_k, b_k)`
//! with one arrival stream per destination.

use std::collections::HashMap;

use num_traits::Zero;

use super::simplex::{solve, FarkasCertificate, LinearProgram, LpOutcome, Relation};
use crate::commodity::{enumerate_omega, unicast_choices, DupChoice, DupStatus};
use crate::error::{Error, Result};
use crate::graph::{
    group_capacity, layered_graph, CapacityGroup, LayeredEdgeKind, LayeredNetwork, Network,
    NodeId, Service,
};
use crate::scalar::{to_f64, BigRational, LpScalar, Rational};

/// Variable count at which [`LpBackend::Auto`] switches from exact to float.
pub const EXACT_VARIABLE_LIMIT: usize = 5_000;
/// Dense tableau size (rows times columns) above which [`LpBackend::Auto`]
/// also switches to float; exact pivots on larger tableaus take hours.
pub const EXACT_TABLEAU_LIMIT: usize = 400_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LpBackend {
    Exact,
    Float,
    #[default]
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    Multicast,
    Unicast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowVar {
    /// Index into [`LayeredNetwork::edges`].
    pub edge: usize,
    pub choice: DupChoice,
}

#[derive(Clone, Debug)]
pub enum Feasibility<T> {
    Feasible(Vec<T>),
    Infeasible(FarkasCertificate<T>),
}

impl<T> Feasibility<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

#[derive(Clone, Debug)]
pub struct MinCost<T> {
    pub cost: T,
    pub flows: Vec<T>,
}

/// Per-slot selection probabilities of the stationary randomized policy.
#[derive(Clone, Debug, Default)]
pub struct Beta {
    /// Per physical edge: `(stage, choice, probability)`.
    pub links: Vec<Vec<(usize, DupChoice, f64)>>,
    /// Per node: `(stage, choice, probability)` for processing.
    pub processors: Vec<Vec<(usize, DupChoice, f64)>>,
}

#[derive(Clone, Debug)]
pub struct FlowModel {
    network: Network,
    layered: LayeredNetwork,
    kind: FlowKind,
    vars: Vec<FlowVar>,
    cells: Vec<(usize, DupStatus)>,
    /// Sparse conservation rows: `(var, coefficient)` with outflow positive.
    rows: Vec<Vec<(usize, Rational)>>,
    /// Arrival rate per cell at unit load.
    demand: Vec<Rational>,
    groups: Vec<(CapacityGroup, Vec<(usize, Rational)>)>,
}

impl FlowModel {
    /// Multicast program: arrivals carry the all-ones status.
    pub fn multicast(network: &Network, service: &Service, rates: &[(NodeId, Rational)]) -> Result<Self> {
        let d = network.destination_count();
        let choices = enumerate_omega(d)?;
        let arrivals = rates.iter().map(|&(i, r)| (i, DupStatus::all(d), r)).collect();
        FlowModel::build(network, service, FlowKind::Multicast, &choices, arrivals)
    }

    /// Unicast program: one copy per destination created at the source.
    pub fn unicast(network: &Network, service: &Service, rates: &[(NodeId, Rational)]) -> Result<Self> {
        let d = network.destination_count();
        let arrivals = rates
            .iter()
            .flat_map(|&(i, r)| (0..d).map(move |k| (i, DupStatus::single(k), r)))
            .collect();
        FlowModel::build(network, service, FlowKind::Unicast, &unicast_choices(d), arrivals)
    }

    fn build(
        network: &Network,
        service: &Service,
        kind: FlowKind,
        choices: &[DupChoice],
        arrivals: Vec<(NodeId, DupStatus, Rational)>,
    ) -> Result<Self> {
        let layered = layered_graph(network, service);
        let last = layered.stages() - 1;
        // Destination index of each last-layer node.
        let mut dest_at = vec![None; layered.node_count()];
        for (k, &d) in network.destinations().iter().enumerate() {
            dest_at[layered.layered_id(d, last)] = Some(k);
        }
        let excluded = |u: usize, q: DupStatus| dest_at[u].is_some_and(|k| q.contains(k));
        let landing = |u: usize, s: DupStatus| match dest_at[u] {
            Some(k) if s.contains(k) => s.without(DupStatus::single(k)),
            _ => s,
        };

        let mut model = FlowModel {
            network: network.clone(),
            layered: layered.clone(),
            kind,
            vars: Vec::new(),
            cells: Vec::new(),
            rows: Vec::new(),
            demand: Vec::new(),
            groups: Vec::new(),
        };
        let mut cell_of: HashMap<(usize, DupStatus), usize> = HashMap::new();
        let mut cell = |m: &mut FlowModel, u: usize, q: DupStatus| -> usize {
            *cell_of.entry((u, q)).or_insert_with(|| {
                m.cells.push((u, q));
                m.rows.push(Vec::new());
                m.demand.push(Rational::zero());
                m.cells.len() - 1
            })
        };
        let mut group_of: HashMap<CapacityGroup, usize> = HashMap::new();

        for (eid, e) in layered.edges().iter().enumerate() {
            for &choice in choices {
                if excluded(e.tail, choice.q) {
                    continue;
                }
                let v = model.vars.len();
                model.vars.push(FlowVar { edge: eid, choice });
                let out = cell(&mut model, e.tail, choice.q);
                model.rows[out].push((v, Rational::from_integer(1)));
                let reload = choice.reload();
                if !reload.is_zero() {
                    let c = cell(&mut model, e.tail, reload);
                    model.rows[c].push((v, Rational::from_integer(-1)));
                }
                let landed = landing(e.head, choice.s);
                if !landed.is_zero() {
                    let c = cell(&mut model, e.head, landed);
                    model.rows[c].push((v, -e.zeta));
                }
                let g = *group_of.entry(e.group).or_insert_with(|| {
                    model.groups.push((e.group, Vec::new()));
                    model.groups.len() - 1
                });
                model.groups[g].1.push((v, e.rho));
            }
        }
        for (i, q, rate) in arrivals {
            if rate < Rational::zero() {
                return Err(Error::Scenario(format!("negative arrival rate at node {i}")));
            }
            if !network.sources().contains(&i) && !rate.is_zero() {
                return Err(Error::Scenario(format!("arrivals at non-source node {i}")));
            }
            let c = cell(&mut model, layered.layered_id(i, 0), q);
            model.demand[c] += rate;
        }
        // Merge duplicate coefficients (a choice whose reload and landing hit the same cell).
        for row in &mut model.rows {
            row.sort_by_key(|(v, _)| *v);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            row.retain(|(_, c)| !c.is_zero());
        }
        Ok(model)
    }

    pub fn kind(&self) -> FlowKind {
        self.kind
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn layered(&self) -> &LayeredNetwork {
        &self.layered
    }

    pub fn vars(&self) -> &[FlowVar] {
        &self.vars
    }

    /// Conservation cells `(layered node, status)`.
    pub fn cells(&self) -> &[(usize, DupStatus)] {
        &self.cells
    }

    fn unit_cost(&self, v: usize) -> Rational {
        let e = &self.layered.edges()[self.vars[v].edge];
        e.unit_cost * e.rho
    }

    fn base_program<T: LpScalar>(&self, extra_vars: usize) -> LinearProgram<T> {
        let mut lp = LinearProgram::new(self.vars.len() + extra_vars);
        for (group, members) in &self.groups {
            let cap = group_capacity(&self.network, *group);
            lp.add(
                members.iter().map(|(v, rho)| (*v, T::from_rational(rho))).collect(),
                Relation::Le,
                T::from_rational(&cap),
            );
        }
        lp
    }

    fn conservation_rows<T: LpScalar>(&self, lp: &mut LinearProgram<T>, load: &Rational) {
        for (row, demand) in self.rows.iter().zip(&self.demand) {
            lp.add(
                row.iter().map(|(v, c)| (*v, T::from_rational(c))).collect(),
                Relation::Eq,
                T::from_rational(&(*demand * *load)),
            );
        }
    }

    /// Program at fixed load; the objective is the operational cost when `with_cost`.
    pub fn program<T: LpScalar>(&self, load: &Rational, with_cost: bool) -> LinearProgram<T> {
        let mut lp = self.base_program(0);
        self.conservation_rows(&mut lp, load);
        if with_cost {
            lp.objective = (0..self.vars.len()).map(|v| T::from_rational(&self.unit_cost(v))).collect();
        }
        lp
    }

    /// Program maximizing the load multiplier `α` (last variable).
    pub fn max_load_program<T: LpScalar>(&self) -> LinearProgram<T> {
        let alpha = self.vars.len();
        let mut lp = self.base_program(1);
        for (row, demand) in self.rows.iter().zip(&self.demand) {
            let mut coeffs: Vec<(usize, T)> =
                row.iter().map(|(v, c)| (*v, T::from_rational(c))).collect();
            if !demand.is_zero() {
                coeffs.push((alpha, T::from_rational(&-*demand)));
            }
            lp.add(coeffs, Relation::Eq, T::zero());
        }
        lp.objective[alpha] = -T::one();
        lp
    }

    pub fn feasibility<T: LpScalar>(&self, load: &Rational) -> Result<Feasibility<T>> {
        match solve(&self.program::<T>(load, false))? {
            LpOutcome::Optimal(sol) => Ok(Feasibility::Feasible(sol.x)),
            LpOutcome::Infeasible(cert) => Ok(Feasibility::Infeasible(cert)),
            LpOutcome::Unbounded => Err(Error::Lp("feasibility program reported unbounded".into())),
        }
    }

    pub fn min_cost<T: LpScalar>(&self, load: &Rational) -> Result<MinCost<T>> {
        match solve(&self.program::<T>(load, true))? {
            LpOutcome::Optimal(sol) => Ok(MinCost { cost: sol.objective, flows: sol.x }),
            LpOutcome::Infeasible(_) => Err(Error::Infeasible),
            LpOutcome::Unbounded => Err(Error::Lp("cost program unbounded".into())),
        }
    }

    /// Largest multiplier `α` with `α·λ` feasible; `None` when unbounded.
    pub fn max_load<T: LpScalar>(&self) -> Result<Option<T>> {
        match solve(&self.max_load_program::<T>())? {
            LpOutcome::Optimal(sol) => Ok(Some(sol.x[self.vars.len()].clone())),
            LpOutcome::Unbounded => Ok(None),
            LpOutcome::Infeasible(_) => Err(Error::Lp("zero load reported infeasible".into())),
        }
    }

    /// Boundary multiplier by bisection on feasibility probes, to relative
    /// tolerance `rel_tol`. `hi` must be infeasible.
    pub fn max_load_bisection<T: LpScalar>(&self, hi: f64, rel_tol: f64) -> Result<f64> {
        let probe = |a: f64| -> Result<bool> {
            let r = crate::scalar::rational_from_f64(a)
                .ok_or_else(|| Error::Lp(format!("load {a} not representable")))?;
            Ok(self.feasibility::<T>(&r)?.is_feasible())
        };
        if probe(hi)? {
            return Err(Error::Lp(format!("upper bracket {hi} is feasible")));
        }
        let (mut lo, mut hi) = (0.0, hi);
        while hi - lo > rel_tol * hi.max(f64::MIN_POSITIVE) {
            let mid = 0.5 * (lo + hi);
            if probe(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Largest conservation violation of `x` at `load`, relative to the
    /// largest arrival rate.
    pub fn conservation_residual(&self, x: &[f64], load: f64) -> f64 {
        let scale = self.demand.iter().map(to_f64).fold(0.0, f64::max).max(1e-12) * load.max(1e-12);
        self.rows
            .iter()
            .zip(&self.demand)
            .map(|(row, dem)| {
                let act: f64 = row.iter().map(|(v, c)| to_f64(c) * x[*v]).sum();
                (act - to_f64(dem) * load).abs()
            })
            .fold(0.0, f64::max)
            / scale
    }

    /// Operational cost of a flow vector.
    pub fn cost_of(&self, x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(v, f)| to_f64(&self.unit_cost(v)) * f).sum()
    }

    /// Selection probabilities `β = ρ·f / C` per capacity group.
    pub fn beta(&self, x: &[f64]) -> Result<Beta> {
        let mut beta = Beta {
            links: vec![Vec::new(); self.network.edge_count()],
            processors: vec![Vec::new(); self.network.node_count()],
        };
        for (group, members) in &self.groups {
            let cap = to_f64(&group_capacity(&self.network, *group));
            let mut total = 0.0;
            for (v, rho) in members {
                let f = x[*v];
                if f <= 1e-12 {
                    continue;
                }
                if cap <= 0.0 {
                    return Err(Error::Lp("flow on a zero-capacity group".into()));
                }
                let p = to_f64(rho) * f / cap;
                total += p;
                let var = self.vars[*v];
                let stage = self.layered.edges()[var.edge].stage;
                match *group {
                    CapacityGroup::Link(e) => beta.links[e].push((stage, var.choice, p)),
                    CapacityGroup::Processor(i) => beta.processors[i].push((stage, var.choice, p)),
                }
            }
            if total > 1.0 + 1e-7 {
                return Err(Error::Lp(format!("selection probabilities sum to {total} > 1")));
            }
        }
        Ok(beta)
    }

    /// Per-variable description for reports: `(tail, head, stage, processing, choice)`.
    pub fn describe(&self, v: usize) -> (NodeId, NodeId, usize, bool, DupChoice) {
        let var = self.vars[v];
        let e = &self.layered.edges()[var.edge];
        let (tail, _) = self.layered.split_id(e.tail);
        let (head, _) = self.layered.split_id(e.head);
        let processing = matches!(e.kind, LayeredEdgeKind::Processing { .. });
        (tail, head, e.stage, processing, var.choice)
    }

    fn use_exact(&self, backend: LpBackend) -> bool {
        match backend {
            LpBackend::Exact => true,
            LpBackend::Float => false,
            LpBackend::Auto => {
                let rows = self.cells.len() + self.network.edge_count() + self.network.node_count();
                self.vars.len() < EXACT_VARIABLE_LIMIT && rows * (self.vars.len() + rows) <= EXACT_TABLEAU_LIMIT
            }
        }
    }

    /// Boundary multiplier as `f64`, solved with the chosen backend.
    pub fn boundary(&self, backend: LpBackend) -> Result<Option<f64>> {
        if self.use_exact(backend) {
            Ok(self.max_load::<BigRational>()?.map(|a| a.to_f64_lossy()))
        } else {
            self.max_load::<f64>()
        }
    }

    pub fn is_feasible(&self, load: &Rational, backend: LpBackend) -> Result<bool> {
        if self.use_exact(backend) {
            Ok(self.feasibility::<BigRational>(load)?.is_feasible())
        } else {
            Ok(self.feasibility::<f64>(load)?.is_feasible())
        }
    }

    pub fn min_cost_f64(&self, load: &Rational, backend: LpBackend) -> Result<MinCost<f64>> {
        if self.use_exact(backend) {
            let sol = self.min_cost::<BigRational>(load)?;
            Ok(MinCost {
                cost: sol.cost.to_f64_lossy(),
                flows: sol.flows.iter().map(|f| f.to_f64_lossy()).collect(),
            })
        } else {
            self.min_cost::<f64>(load)
        }
    }
}
