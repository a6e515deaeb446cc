//! Exact branch-and-bound MaxSAT.
//!
//! Unit soft clauses are folded into per-variable costs, hard unit clauses
//! fix variables up front, and the remaining clauses split the variables
//! into independent components that are searched one at a time.
//!
//! Within a component the search is a depth-first walk over the static
//! variable order, trying each variable's initial label before its flip.
//! Leaves are therefore visited in increasing flip-vector order, which makes
//! the first strictly improving leaf the tie-break winner. Hard clauses are
//! unit-propagated. The lower bound adds, to the cost already committed,
//! the cheapest label of every open variable plus a disjoint set of open
//! clauses that cannot be satisfied without paying extra.
//!
//! A flipped variable must stay the only true literal of at least one
//! clause that its flip satisfies, unless its unit costs favour the flip.
//! Otherwise flipping it back loses nothing and saves a flip, so no leaf
//! below can be the tie-break winner and the subtree is cut.
//!
//! Before searching, a greedy single-flip descent from the initial labels
//! supplies a provisional bound. It only prunes subtrees that are strictly
//! worse, and the first search leaf at least as good replaces it, so the
//! winner is still the first strictly improving leaf in search order.

use super::{
    improves, ClauseWeight, SolveError, SolveResult, SolveStatus, SolverConfig, WeightedClauseSet, COST_EPSILON,
};
use crate::model::{Assignment, Label};

pub fn solve(cs: &WeightedClauseSet, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    let n = cs.variables().len();
    if n > cfg.max_variables {
        return Err(SolveError::TooManyVariables { count: n, limit: cfg.max_variables });
    }
    let index: std::collections::HashMap<_, _> = cs.variables().iter().enumerate().map(|(i, v)| (v.id, i)).collect();
    let initial: Vec<bool> = cs.variables().iter().map(|v| v.initial.is_true()).collect();

    // cost_if[v][b]: unit-clause cost of setting v to b.
    let mut cost_if = vec![[0.0f64; 2]; n];
    let mut fixed: Vec<Option<bool>> = vec![None; n];
    let mut clauses: Vec<SearchClause> = Vec::new();
    for clause in cs.clauses() {
        let lits: Vec<(usize, bool)> = clause.literals().iter().map(|l| (index[&l.var], l.positive)).collect();
        match (clause.weight(), lits.as_slice()) {
            (ClauseWeight::Soft(w), &[(v, positive)]) => cost_if[v][usize::from(!positive)] += w,
            (ClauseWeight::Hard, &[(v, positive)]) => match fixed[v] {
                Some(value) if value != positive => return Ok(SolveResult::infeasible(cs, 0)),
                _ => fixed[v] = Some(positive),
            },
            (weight, _) => clauses.push(SearchClause {
                lits,
                weight: match weight {
                    ClauseWeight::Soft(w) => Some(w),
                    ClauseWeight::Hard => None,
                },
            }),
        }
    }

    let mut components = UnionFind::new(n);
    for c in &clauses {
        for pair in c.lits.windows(2) {
            components.union(pair[0].0, pair[1].0);
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        members[components.find(v)].push(v);
    }
    let mut component_clauses: Vec<Vec<SearchClause>> = vec![Vec::new(); n];
    for c in clauses {
        let root = components.find(c.lits[0].0);
        component_clauses[root].push(c);
    }

    let mut values = vec![false; n];
    let mut nodes = 0u64;
    for root in 0..n {
        let vars = &members[root];
        if vars.is_empty() {
            continue;
        }
        let mut search = Search::new(vars, &component_clauses[root], &initial, &cost_if, cfg.max_nodes - nodes.min(cfg.max_nodes));
        let outcome = search.run(&fixed);
        nodes += search.nodes;
        match outcome {
            Outcome::Solved(local) => {
                for (k, &v) in vars.iter().enumerate() {
                    values[v] = local[k];
                }
            }
            Outcome::Infeasible => return Ok(SolveResult::infeasible(cs, nodes)),
            Outcome::Aborted => return Err(SolveError::NodeLimit { limit: cfg.max_nodes }),
        }
    }

    let assignment: Assignment =
        cs.variables().iter().zip(&values).map(|(v, &value)| (v.id, Label::from(value))).collect();
    let optimal_cost = cs.cost_of(&assignment).finite().expect("search only returns feasible assignments");
    Ok(SolveResult { assignment, optimal_cost, status: SolveStatus::Optimal, nodes_explored: nodes })
}

#[derive(Clone, Debug)]
struct SearchClause {
    lits: Vec<(usize, bool)>,
    /// `None` for hard clauses.
    weight: Option<f64>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// The smaller index becomes the root, so roots follow variable order.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

enum Outcome {
    Solved(Vec<bool>),
    Infeasible,
    Aborted,
}

struct Incumbent {
    cost: f64,
    flips: usize,
    values: Vec<bool>,
    /// Found by the greedy descent rather than the search.
    provisional: bool,
}

/// Search state over one component, with variables renumbered `0..len` in
/// global order.
struct Search<'a> {
    vars: Vec<usize>,
    clauses: &'a [SearchClause],
    local_clauses: Vec<Vec<(usize, bool)>>,
    initial: Vec<bool>,
    cost_if: Vec<[f64; 2]>,
    /// (clause, literal polarity) occurrences per variable.
    occurs: Vec<Vec<(usize, bool)>>,
    value: Vec<Option<bool>>,
    pinned: Vec<bool>,
    satisfied: Vec<u32>,
    falsified: Vec<u32>,
    trail: Vec<usize>,
    cost: f64,
    flips: usize,
    best: Option<Incumbent>,
    stamp: Vec<u64>,
    generation: u64,
    nodes: u64,
    max_nodes: u64,
    aborted: bool,
}

impl<'a> Search<'a> {
    fn new(
        vars: &[usize],
        clauses: &'a [SearchClause],
        initial: &[bool],
        cost_if: &[[f64; 2]],
        max_nodes: u64,
    ) -> Self {
        let local_of = |g: usize| vars.binary_search(&g).expect("clause variable inside component");
        let local_clauses: Vec<Vec<(usize, bool)>> =
            clauses.iter().map(|c| c.lits.iter().map(|&(v, p)| (local_of(v), p)).collect()).collect();
        let mut occurs = vec![Vec::new(); vars.len()];
        for (ci, lits) in local_clauses.iter().enumerate() {
            for &(v, p) in lits {
                occurs[v].push((ci, p));
            }
        }
        Search {
            vars: vars.to_vec(),
            clauses,
            initial: vars.iter().map(|&g| initial[g]).collect(),
            cost_if: vars.iter().map(|&g| cost_if[g]).collect(),
            occurs,
            value: vec![None; vars.len()],
            pinned: vec![false; vars.len()],
            satisfied: vec![0; clauses.len()],
            falsified: vec![0; clauses.len()],
            local_clauses,
            trail: Vec::with_capacity(vars.len()),
            cost: 0.0,
            flips: 0,
            best: None,
            stamp: vec![0; vars.len()],
            generation: 0,
            nodes: 0,
            max_nodes,
            aborted: false,
        }
    }

    fn run(&mut self, fixed_global: &[Option<bool>]) -> Outcome {
        for k in 0..self.vars.len() {
            let Some(value) = fixed_global[self.vars[k]] else { continue };
            self.pinned[k] = true;
            match self.value[k] {
                Some(current) if current != value => return Outcome::Infeasible,
                Some(_) => {}
                None => {
                    let mark = self.trail.len();
                    if !self.assign(k, value) || !self.propagate(mark) {
                        return Outcome::Infeasible;
                    }
                }
            }
        }
        self.best = self.greedy();
        self.search(0);
        match (self.aborted, self.best.take()) {
            (true, _) => Outcome::Aborted,
            (false, Some(best)) => Outcome::Solved(best.values),
            (false, None) => Outcome::Infeasible,
        }
    }
}

impl Search<'_> {
    /// Assigns and updates clause counters. Returns false when a hard
    /// clause becomes falsified.
    fn assign(&mut self, v: usize, value: bool) -> bool {
        self.value[v] = Some(value);
        self.trail.push(v);
        self.cost += self.cost_if[v][usize::from(value)];
        if value != self.initial[v] {
            self.flips += 1;
        }
        let mut ok = true;
        for &(ci, positive) in &self.occurs[v] {
            if positive == value {
                self.satisfied[ci] += 1;
            } else {
                self.falsified[ci] += 1;
                if self.satisfied[ci] == 0 && self.falsified[ci] as usize == self.local_clauses[ci].len() {
                    match self.clauses[ci].weight {
                        Some(w) => self.cost += w,
                        None => ok = false,
                    }
                }
            }
        }
        ok
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().expect("trail above mark");
            let value = self.value[v].take().expect("trailed variables are assigned");
            self.cost -= self.cost_if[v][usize::from(value)];
            if value != self.initial[v] {
                self.flips -= 1;
            }
            for &(ci, positive) in &self.occurs[v] {
                if positive == value {
                    self.satisfied[ci] -= 1;
                } else {
                    if self.satisfied[ci] == 0 && self.falsified[ci] as usize == self.local_clauses[ci].len() {
                        if let Some(w) = self.clauses[ci].weight {
                            self.cost -= w;
                        }
                    }
                    self.falsified[ci] -= 1;
                }
            }
        }
    }

    /// Unit propagation over hard clauses for everything trailed since
    /// `from`. Returns false on conflict.
    fn propagate(&mut self, from: usize) -> bool {
        let mut head = from;
        while head < self.trail.len() {
            let v = self.trail[head];
            head += 1;
            let value = self.value[v].expect("trailed variables are assigned");
            for k in 0..self.occurs[v].len() {
                let (ci, positive) = self.occurs[v][k];
                if positive == value || self.clauses[ci].weight.is_some() || self.satisfied[ci] > 0 {
                    continue;
                }
                let len = self.local_clauses[ci].len();
                let open = len - self.falsified[ci] as usize;
                if open == 0 {
                    return false;
                }
                if open == 1 {
                    let (u, p) = *self.local_clauses[ci]
                        .iter()
                        .find(|&&(u, _)| self.value[u].is_none())
                        .expect("one open literal");
                    if !self.assign(u, p) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn needs_support(&self, v: usize) -> bool {
        let start = self.initial[v];
        self.value[v] == Some(!start)
            && !self.pinned[v]
            && self.cost_if[v][usize::from(start)] <= self.cost_if[v][usize::from(!start)]
    }

    fn supported(&self, v: usize) -> bool {
        let value = self.value[v];
        self.occurs[v].iter().any(|&(ci, positive)| Some(positive) == value && self.satisfied[ci] == 1)
    }

    /// Checks every flip whose support may have changed since `from`.
    fn flips_justified(&self, from: usize) -> bool {
        for &u in &self.trail[from..] {
            if self.needs_support(u) && !self.supported(u) {
                return false;
            }
            let value = self.value[u];
            for &(ci, positive) in &self.occurs[u] {
                if Some(positive) != value || self.satisfied[ci] != 2 {
                    continue;
                }
                for &(w, p) in &self.local_clauses[ci] {
                    if w != u && self.value[w] == Some(p) && self.needs_support(w) && !self.supported(w) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn lower_bound(&mut self) -> f64 {
        let mut lb = self.cost;
        for v in 0..self.value.len() {
            if self.value[v].is_none() {
                lb += self.cost_if[v][0].min(self.cost_if[v][1]);
            }
        }
        self.generation += 1;
        let generation = self.generation;
        // A pending flip stays justified only if some clause it alone
        // satisfies gets its remaining literals falsified, which flips every
        // open variable whose initial value satisfies its literal.
        for t in 0..self.trail.len() {
            let v = self.trail[t];
            if !self.needs_support(v) {
                continue;
            }
            let value = self.value[v];
            let mut cheapest = f64::INFINITY;
            for &(ci, positive) in &self.occurs[v] {
                if Some(positive) != value || self.satisfied[ci] != 1 {
                    continue;
                }
                let mut sum = 0.0;
                for &(u, p) in &self.local_clauses[ci] {
                    if self.value[u].is_none() && self.stamp[u] != generation && self.initial[u] == p {
                        let costs = self.cost_if[u];
                        sum += costs[usize::from(!p)] - costs[0].min(costs[1]);
                    }
                }
                cheapest = cheapest.min(sum);
            }
            if cheapest > 0.0 && cheapest.is_finite() {
                lb += cheapest;
                for &(ci, positive) in &self.occurs[v] {
                    if Some(positive) == value && self.satisfied[ci] == 1 {
                        for &(u, _) in &self.local_clauses[ci] {
                            if self.value[u].is_none() {
                                self.stamp[u] = generation;
                            }
                        }
                    }
                }
            }
        }
        for ci in 0..self.local_clauses.len() {
            let lits = &self.local_clauses[ci];
            if self.satisfied[ci] > 0 || self.falsified[ci] as usize == lits.len() {
                continue;
            }
            let mut extra = self.clauses[ci].weight.unwrap_or(f64::INFINITY);
            let mut usable = true;
            for &(u, p) in lits {
                if self.value[u].is_some() {
                    continue;
                }
                let costs = self.cost_if[u];
                let e = costs[usize::from(p)] - costs[0].min(costs[1]);
                if e <= 0.0 || self.stamp[u] == generation {
                    usable = false;
                    break;
                }
                extra = extra.min(e);
            }
            if usable {
                lb += extra;
                for &(u, _) in lits {
                    if self.value[u].is_none() {
                        self.stamp[u] = generation;
                    }
                }
            }
        }
        lb
    }

    /// Steepest single-flip descent from the initial labels, keeping the
    /// variables already assigned. `None` if it ends with a hard clause
    /// falsified.
    fn greedy(&self) -> Option<Incumbent> {
        let n = self.value.len();
        let mut values: Vec<bool> = (0..n).map(|v| self.value[v].unwrap_or(self.initial[v])).collect();
        let mut sat: Vec<u32> = self
            .local_clauses
            .iter()
            .map(|lits| lits.iter().filter(|&&(u, p)| values[u] == p).count() as u32)
            .collect();
        // (hard clauses falsified, soft cost) change of flipping v
        let delta = |v: usize, values: &[bool], sat: &[u32]| {
            let now = values[v];
            let mut hard = 0i64;
            let mut soft = self.cost_if[v][usize::from(!now)] - self.cost_if[v][usize::from(now)];
            for &(ci, positive) in &self.occurs[v] {
                let change = match (positive == now, sat[ci]) {
                    (true, 1) => 1,
                    (false, 0) => -1,
                    _ => continue,
                };
                match self.clauses[ci].weight {
                    Some(w) => soft += f64::from(change) * w,
                    None => hard += i64::from(change),
                }
            }
            (hard, soft)
        };
        for _ in 0..4 * n + 4 {
            let mut pick: Option<(usize, (i64, f64))> = None;
            for v in 0..n {
                if self.value[v].is_some() {
                    continue;
                }
                let d = delta(v, &values, &sat);
                let better = d.0 < 0 || (d.0 == 0 && d.1 < -COST_EPSILON);
                if better && pick.is_none_or(|(_, b)| d.0 < b.0 || (d.0 == b.0 && d.1 < b.1)) {
                    pick = Some((v, d));
                }
            }
            let Some((v, _)) = pick else { break };
            values[v] = !values[v];
            for &(ci, positive) in &self.occurs[v] {
                if positive == values[v] {
                    sat[ci] += 1;
                } else {
                    sat[ci] -= 1;
                }
            }
        }

        let mut cost = 0.0;
        for (ci, clause) in self.clauses.iter().enumerate() {
            if sat[ci] == 0 {
                cost += clause.weight?;
            }
        }
        cost += (0..n).map(|v| self.cost_if[v][usize::from(values[v])]).sum::<f64>();
        let flips = (0..n).filter(|&v| values[v] != self.initial[v]).count();
        Some(Incumbent { cost, flips, values, provisional: true })
    }

    fn pruned(&self, lb: f64) -> bool {
        match &self.best {
            None => false,
            Some(best) if best.provisional => {
                lb > best.cost + COST_EPSILON || (lb >= best.cost - COST_EPSILON && self.flips > best.flips)
            }
            Some(best) => lb > best.cost + COST_EPSILON || (lb >= best.cost - COST_EPSILON && self.flips >= best.flips),
        }
    }

    fn search(&mut self, start: usize) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            self.aborted = true;
            return;
        }
        let Some(v) = (start..self.value.len()).find(|&v| self.value[v].is_none()) else {
            let accept = match &self.best {
                Some(b) if b.provisional => !improves(b.cost, b.flips, Some((self.cost, self.flips))),
                best => improves(self.cost, self.flips, best.as_ref().map(|b| (b.cost, b.flips))),
            };
            if accept {
                let values = self.value.iter().map(|v| v.expect("leaf is complete")).collect();
                self.best = Some(Incumbent { cost: self.cost, flips: self.flips, values, provisional: false });
            }
            return;
        };
        let lb = self.lower_bound();
        if self.pruned(lb) {
            return;
        }
        let first = self.initial[v];
        for value in [first, !first] {
            let mark = self.trail.len();
            if self.assign(v, value) && self.propagate(mark) && self.flips_justified(mark) {
                self.search(v + 1);
            }
            self.undo_to(mark);
        }
    }
}
