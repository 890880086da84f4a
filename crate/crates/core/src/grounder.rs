//! Stratification and instantiation.
//!
//! Predicates are layered so that every external atom reads only predicates
//! that are fully evaluated before the rule containing it. Each stratum is
//! then grounded against one answer set of the strata below it: positive
//! body literals are joined semi-naively, and external atoms are evaluated
//! once their inputs are bound, binding their outputs to the tuples the
//! oracle enumerates. Those tuples may contain constants that appear nowhere
//! in the program, such as subprogram handles.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use thiserror::Error;

use crate::ast::{Atom, BodyPayload, Builtin, ExternalAtom, Literal, Program, Rule, Term};
use crate::engine::OracleContext;
use crate::error::{Error, Result};
use crate::external::{InputView, OracleEnv};
use crate::solver::GroundRule;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("cannot stratify program: {reason} (at {node})")]
pub struct CycleError {
    pub node: String,
    pub reason: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dependency {
    Positive,
    Negative,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Predicate(String),
    /// A constraint, by rule index.
    Constraint(usize),
}

impl std::fmt::Display for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Node::Predicate(p) => f.write_str(p),
            Node::Constraint(i) => write!(f, "constraint #{i}"),
        }
    }
}

/// Predicate dependency graph. Edges run from a body predicate to the head
/// predicates (or constraint) of its rule. Head predicates of one rule are
/// linked both ways so that a disjunction never spans two strata.
#[derive(Debug)]
pub struct DependencyGraph {
    pub graph: DiGraph<Node, Dependency>,
    nodes: HashMap<Node, NodeIndex>,
    /// The node each rule defines: its head predicates' node or its constraint node.
    owners: Vec<Vec<NodeIndex>>,
}

impl DependencyGraph {
    pub fn build(program: &Program, env: &OracleEnv) -> Result<Self> {
        let mut all: BTreeSet<Node> = BTreeSet::new();
        for (i, rule) in program.rules.iter().enumerate() {
            if rule.is_constraint() {
                all.insert(Node::Constraint(i));
            }
            for lit in &rule.head {
                all.insert(Node::Predicate(lit.predicate().to_string()));
            }
            for elem in &rule.body {
                if let BodyPayload::Literal(l) = &elem.payload {
                    all.insert(Node::Predicate(l.predicate().to_string()));
                }
            }
        }
        let mut graph = DiGraph::new();
        let mut nodes = HashMap::new();
        for node in all {
            let idx = graph.add_node(node.clone());
            nodes.insert(node, idx);
        }
        let mut owners = Vec::with_capacity(program.rules.len());
        for (i, rule) in program.rules.iter().enumerate() {
            let owner: Vec<NodeIndex> = if rule.is_constraint() {
                vec![nodes[&Node::Constraint(i)]]
            } else {
                let mut o: Vec<NodeIndex> = rule
                    .head
                    .iter()
                    .map(|l| nodes[&Node::Predicate(l.predicate().to_string())])
                    .collect();
                o.sort();
                o.dedup();
                o
            };
            for w in owner.windows(2) {
                graph.add_edge(w[0], w[1], Dependency::Positive);
                graph.add_edge(w[1], w[0], Dependency::Positive);
            }
            for elem in &rule.body {
                let deps: Vec<(NodeIndex, Dependency)> = match &elem.payload {
                    BodyPayload::Literal(l) => {
                        let kind = if elem.naf {
                            Dependency::Negative
                        } else {
                            Dependency::Positive
                        };
                        vec![(nodes[&Node::Predicate(l.predicate().to_string())], kind)]
                    }
                    BodyPayload::External(e) => env
                        .predicate_inputs(&e.name, &e.inputs)?
                        .into_iter()
                        .map(|p| {
                            let node = Node::Predicate(p);
                            let idx = match nodes.get(&node) {
                                Some(idx) => *idx,
                                None => {
                                    let idx = graph.add_node(node.clone());
                                    nodes.insert(node, idx);
                                    idx
                                }
                            };
                            (idx, Dependency::External)
                        })
                        .collect(),
                    BodyPayload::Builtin(_) => Vec::new(),
                };
                for (from, kind) in deps {
                    for &to in &owner {
                        graph.add_edge(from, to, kind);
                    }
                }
            }
            owners.push(owner);
        }
        Ok(DependencyGraph {
            graph,
            nodes,
            owners,
        })
    }

    pub fn node(&self, node: &Node) -> Option<NodeIndex> {
        self.nodes.get(node).copied()
    }
}

/// A group of predicates evaluated together, with the rules defining them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stratum {
    pub predicates: BTreeSet<String>,
    /// Rule indices into the program, in program order.
    pub rules: Vec<usize>,
    pub has_external: bool,
}

/// Orders the program's predicates into strata.
///
/// External edges and negative edges between components go strictly up;
/// positive edges may stay inside a stratum. Negation inside a component is
/// allowed, but never in a component that also holds an external atom, and
/// never in the same stratum as one.
pub fn stratify(program: &Program, env: &OracleEnv) -> Result<Vec<Stratum>> {
    let deps = DependencyGraph::build(program, env)?;
    let g = &deps.graph;
    // tarjan_scc yields components in reverse topological order.
    let mut sccs = tarjan_scc(g);
    sccs.reverse();
    let mut comp = vec![0usize; g.node_count()];
    for (ci, scc) in sccs.iter().enumerate() {
        for &n in scc {
            comp[n.index()] = ci;
        }
    }

    let mut has_external = vec![false; sccs.len()];
    let mut rules_of: Vec<Vec<usize>> = vec![Vec::new(); sccs.len()];
    for (ri, owner) in deps.owners.iter().enumerate() {
        let ci = comp[owner[0].index()];
        rules_of[ci].push(ri);
        if program.rules[ri].externals().next().is_some() {
            has_external[ci] = true;
        }
    }

    let mut internal_naf = vec![false; sccs.len()];
    let mut level = vec![0usize; sccs.len()];
    for edge in g.edge_indices() {
        let (from, to) = g.edge_endpoints(edge).expect("edge exists");
        let kind = g[edge];
        let (cf, ct) = (comp[from.index()], comp[to.index()]);
        if cf == ct {
            match kind {
                Dependency::External => {
                    return Err(CycleError {
                        node: g[to].to_string(),
                        reason: "recursion through an external atom".into(),
                    }
                    .into())
                }
                Dependency::Negative => internal_naf[cf] = true,
                Dependency::Positive => {}
            }
        }
    }
    for ci in 0..sccs.len() {
        if internal_naf[ci] && has_external[ci] {
            let node = sccs[ci].iter().map(|&n| g[n].to_string()).min().unwrap_or_default();
            return Err(CycleError {
                node,
                reason: "unstratified negation in a component with external atoms".into(),
            }
            .into());
        }
    }
    // Components are in topological order, so sources are final before use.
    for ci in 0..sccs.len() {
        for &n in &sccs[ci] {
            for edge in g.edges_directed(n, petgraph::Direction::Incoming) {
                use petgraph::visit::EdgeRef;
                let src = comp[edge.source().index()];
                if src == ci {
                    continue;
                }
                let step = match edge.weight() {
                    Dependency::Positive => 0,
                    Dependency::Negative | Dependency::External => 1,
                };
                level[ci] = level[ci].max(level[src] + step);
            }
        }
    }

    let max_level = level.iter().copied().max().unwrap_or(0);
    let mut strata = Vec::new();
    for l in 0..=max_level {
        let mut current = Stratum::default();
        let mut current_naf = false;
        for ci in (0..sccs.len()).filter(|&ci| level[ci] == l) {
            let mixes = (has_external[ci] && current_naf) || (internal_naf[ci] && current.has_external);
            if mixes {
                strata.push(std::mem::take(&mut current));
                current_naf = false;
            }
            current.has_external |= has_external[ci];
            current_naf |= internal_naf[ci];
            current.rules.extend(&rules_of[ci]);
            for &n in &sccs[ci] {
                if let Node::Predicate(p) = &g[n] {
                    current.predicates.insert(p.clone());
                }
            }
        }
        if !current.predicates.is_empty() || !current.rules.is_empty() {
            current.rules.sort_unstable();
            strata.push(current);
        }
    }
    for s in &mut strata {
        s.rules.sort_unstable();
    }
    Ok(strata)
}

/// Names of the ground replacement atoms `&aux_<name>_<k>`, one per external
/// atom occurrence in the program.
#[derive(Debug, Default)]
pub struct AuxNames {
    names: HashMap<(usize, usize), String>,
}

impl AuxNames {
    pub fn new(program: &Program) -> Self {
        let mut names = HashMap::new();
        let mut k = 0;
        for (ri, rule) in program.rules.iter().enumerate() {
            for (bi, elem) in rule.body.iter().enumerate() {
                if let BodyPayload::External(e) = &elem.payload {
                    names.insert((ri, bi), format!("&aux_{}_{k}", e.name));
                    k += 1;
                }
            }
        }
        AuxNames { names }
    }

    fn get(&self, rule: usize, elem: usize) -> &str {
        &self.names[&(rule, elem)]
    }
}

/// Whether a literal is a ground replacement atom for an external atom.
pub fn is_aux(literal: &Literal) -> bool {
    literal.predicate().starts_with('&')
}

type Key = (String, bool, usize);

fn key_of(l: &Literal) -> Key {
    (l.atom.predicate.clone(), l.negated, l.atom.arity())
}

/// Ground literals indexed by predicate, sign and arity.
#[derive(Default)]
struct Store {
    by_key: HashMap<Key, Vec<Vec<Term>>>,
    members: HashSet<Literal>,
}

impl Store {
    fn insert(&mut self, l: Literal) -> bool {
        if self.members.contains(&l) {
            return false;
        }
        self.by_key
            .entry(key_of(&l))
            .or_default()
            .push(l.atom.args.clone());
        self.members.insert(l);
        true
    }

    fn tuples(&self, key: &Key) -> &[Vec<Term>] {
        self.by_key.get(key).map(Vec::as_slice).unwrap_or(&[])
    }
}

type Binding = HashMap<String, Term>;

fn substitute(term: &Term, binding: &Binding) -> Term {
    match term {
        Term::Var(v) => binding.get(v).cloned().unwrap_or_else(|| term.clone()),
        other => other.clone(),
    }
}

fn substitute_literal(l: &Literal, binding: &Binding) -> Literal {
    Literal {
        atom: Atom::new(
            l.atom.predicate.clone(),
            l.atom.args.iter().map(|t| substitute(t, binding)).collect(),
        ),
        negated: l.negated,
    }
}

/// Unifies `pattern` with ground `values`, extending `binding`. Returns the
/// newly bound variables, or `None` on mismatch (with `binding` restored).
fn unify(pattern: &[Term], values: &[Term], binding: &mut Binding) -> Option<Vec<String>> {
    let mut added: Vec<String> = Vec::new();
    for (p, v) in pattern.iter().zip(values) {
        let ok = match p {
            Term::Var(name) => match binding.get(name) {
                Some(bound) => bound == v,
                None => {
                    binding.insert(name.clone(), v.clone());
                    added.push(name.clone());
                    true
                }
            },
            constant => constant == v,
        };
        if !ok {
            for name in &added {
                binding.remove(name);
            }
            return None;
        }
    }
    Some(added)
}

fn undo(binding: &mut Binding, added: Vec<String>) {
    for name in added {
        binding.remove(&name);
    }
}

/// Body element evaluation order for one rule: the first element (in
/// reading order) whose inputs are bound goes next.
fn plan(rule: &Rule) -> Result<Vec<usize>> {
    let mut bound: HashSet<&str> = HashSet::new();
    let mut order = Vec::with_capacity(rule.body.len());
    let mut pending: Vec<usize> = (0..rule.body.len()).collect();
    while !pending.is_empty() {
        let ready = pending.iter().position(|&i| {
            let elem = &rule.body[i];
            match (&elem.payload, elem.naf) {
                (BodyPayload::Literal(_), false) => true,
                (BodyPayload::External(e), false) => {
                    e.inputs.iter().filter_map(Term::as_var).all(|v| bound.contains(v))
                }
                (BodyPayload::Builtin(b), false) if b.is_assignment() => b
                    .input_terms()
                    .into_iter()
                    .filter_map(Term::as_var)
                    .all(|v| bound.contains(v)),
                _ => elem.variables().iter().all(|v| bound.contains(v)),
            }
        });
        let Some(pos) = ready else {
            let elem = &rule.body[pending[0]];
            let variable = elem
                .variables()
                .into_iter()
                .find(|v| !bound.contains(v))
                .unwrap_or_default()
                .to_string();
            return Err(Error::Unbound {
                variable,
                element: elem.to_string(),
            });
        };
        let i = pending.remove(pos);
        let elem = &rule.body[i];
        if !elem.naf {
            match &elem.payload {
                BodyPayload::Literal(l) => bound.extend(l.atom.args.iter().filter_map(Term::as_var)),
                BodyPayload::External(e) => bound.extend(e.outputs.iter().filter_map(Term::as_var)),
                BodyPayload::Builtin(b) if b.is_assignment() => {
                    bound.extend(b.lhs.as_var());
                }
                BodyPayload::Builtin(_) => {}
            }
        }
        order.push(i);
    }
    Ok(order)
}

struct RuleGrounder<'a> {
    index: usize,
    rule: &'a Rule,
    order: Vec<usize>,
    /// Body positions of positive literals over predicates of this stratum.
    recursive: Vec<usize>,
}

/// Grounds the rules of one stratum relative to `lower`, the literals that
/// hold in the strata below.
///
/// Returns the ground instances (with replacement atoms for external atoms)
/// and the replacement facts.
pub struct StratumGrounder<'a, 'c> {
    program: &'a Program,
    stratum: &'a Stratum,
    lower: Store,
    lower_literals: &'a BTreeSet<Literal>,
    cx: &'a OracleContext<'c>,
    aux: &'a AuxNames,
}

impl<'a, 'c> StratumGrounder<'a, 'c> {
    pub fn new(
        program: &'a Program,
        stratum: &'a Stratum,
        lower_literals: &'a BTreeSet<Literal>,
        cx: &'a OracleContext<'c>,
        aux: &'a AuxNames,
    ) -> Self {
        let mut lower = Store::default();
        for l in lower_literals {
            lower.insert(l.clone());
        }
        StratumGrounder {
            program,
            stratum,
            lower,
            lower_literals,
            cx,
            aux,
        }
    }

    pub fn ground(&self) -> Result<BTreeSet<GroundRule>> {
        let mut rules = Vec::new();
        for &ri in &self.stratum.rules {
            let rule = &self.program.rules[ri];
            if let Some((e, _)) = rule.externals().find(|(_, naf)| *naf) {
                return Err(Error::NafExternal(e.name.clone()));
            }
            for (e, _) in rule.externals() {
                self.cx
                    .session()
                    .env()
                    .check_arity(&e.name, e.inputs.len(), e.outputs.len())?;
            }
            let recursive = rule
                .body
                .iter()
                .enumerate()
                .filter(|(_, b)| {
                    matches!(&b.payload, BodyPayload::Literal(l)
                        if !b.naf && self.stratum.predicates.contains(l.predicate()))
                })
                .map(|(i, _)| i)
                .collect();
            rules.push(RuleGrounder {
                index: ri,
                rule,
                order: plan(rule)?,
                recursive,
            });
        }

        let mut out = BTreeSet::new();
        let mut all = Store::default();
        let mut fresh: Vec<Literal> = Vec::new();
        for r in rules.iter().filter(|r| r.recursive.is_empty()) {
            self.instantiate(r, None, &all, &Store::default(), &mut out, &mut fresh)?;
        }
        loop {
            let mut delta = Store::default();
            for l in fresh.drain(..) {
                if !all.members.contains(&l) {
                    delta.insert(l.clone());
                    all.insert(l);
                }
            }
            if delta.members.is_empty() {
                break;
            }
            for r in rules.iter().filter(|r| !r.recursive.is_empty()) {
                for &pos in &r.recursive {
                    self.instantiate(r, Some(pos), &all, &delta, &mut out, &mut fresh)?;
                }
            }
        }
        Ok(out)
    }

    fn instantiate(
        &self,
        r: &RuleGrounder<'_>,
        delta_at: Option<usize>,
        all: &Store,
        delta: &Store,
        out: &mut BTreeSet<GroundRule>,
        fresh: &mut Vec<Literal>,
    ) -> Result<()> {
        let mut binding = Binding::new();
        let mut aux = Vec::new();
        self.join(r, 0, delta_at, all, delta, &mut binding, &mut aux, out, fresh)
    }

    #[allow(clippy::too_many_arguments)]
    fn join(
        &self,
        r: &RuleGrounder<'_>,
        step: usize,
        delta_at: Option<usize>,
        all: &Store,
        delta: &Store,
        binding: &mut Binding,
        aux: &mut Vec<Literal>,
        out: &mut BTreeSet<GroundRule>,
        fresh: &mut Vec<Literal>,
    ) -> Result<()> {
        let Some(&bi) = r.order.get(step) else {
            self.emit(r, binding, aux, out, fresh);
            return Ok(());
        };
        let elem = &r.rule.body[bi];
        let mut next = |binding: &mut Binding, aux: &mut Vec<Literal>| {
            self.join(r, step + 1, delta_at, all, delta, binding, aux, out, fresh)
        };
        match (&elem.payload, elem.naf) {
            (BodyPayload::Literal(l), false) => {
                let key = key_of(l);
                let source = if !self.stratum.predicates.contains(l.predicate()) {
                    &self.lower
                } else if delta_at == Some(bi) {
                    delta
                } else {
                    all
                };
                for values in source.tuples(&key) {
                    if let Some(added) = unify(&l.atom.args, values, binding) {
                        next(binding, aux)?;
                        undo(binding, added);
                    }
                }
                Ok(())
            }
            (BodyPayload::Literal(_), true) => next(binding, aux),
            (BodyPayload::External(e), _) => {
                let (inputs, tuples) = self.call_external(e, binding)?;
                for tuple in tuples {
                    if let Some(added) = unify(&e.outputs, &tuple, binding) {
                        let mut args = inputs.clone();
                        args.extend(tuple.iter().cloned());
                        aux.push(Literal::positive(Atom::new(self.aux.get(r.index, bi), args)));
                        next(binding, aux)?;
                        aux.pop();
                        undo(binding, added);
                    }
                }
                Ok(())
            }
            (BodyPayload::Builtin(b), naf) => {
                let holds = self.builtin(b, naf, binding)?;
                match holds {
                    BuiltinOutcome::Fail => Ok(()),
                    BuiltinOutcome::Pass => next(binding, aux),
                    BuiltinOutcome::Bind(name) => {
                        let result = next(binding, aux);
                        binding.remove(&name);
                        result
                    }
                }
            }
        }
    }

    fn call_external(
        &self,
        e: &ExternalAtom,
        binding: &Binding,
    ) -> Result<(Vec<Term>, BTreeSet<Vec<Term>>)> {
        let inputs: Vec<Term> = e.inputs.iter().map(|t| substitute(t, binding)).collect();
        let env = self.cx.session().env();
        let preds = env.predicate_inputs(&e.name, &inputs)?;
        let view = InputView::restrict(self.lower_literals, &preds);
        let tuples = self.cx.evaluate(&e.name, &view, &inputs)?;
        Ok((inputs, tuples))
    }

    fn builtin(&self, b: &Builtin, naf: bool, binding: &mut Binding) -> Result<BuiltinOutcome> {
        let inputs: Vec<Term> = b.input_terms().into_iter().map(|t| substitute(t, binding)).collect();
        let tuples = self
            .cx
            .evaluate(b.oracle_name(), &InputView::new(), &inputs)?;
        if !b.is_assignment() {
            return Ok(if tuples.is_empty() == naf {
                BuiltinOutcome::Pass
            } else {
                BuiltinOutcome::Fail
            });
        }
        let value = tuples
            .into_iter()
            .next()
            .and_then(|t| t.into_iter().next())
            .expect("assignment oracles are functional");
        let lhs = substitute(&b.lhs, binding);
        match lhs {
            Term::Var(name) if !naf => {
                binding.insert(name.clone(), value);
                Ok(BuiltinOutcome::Bind(name))
            }
            Term::Var(name) => Err(Error::Unbound {
                variable: name,
                element: format!("not {b}"),
            }),
            ground => Ok(if (ground == value) != naf {
                BuiltinOutcome::Pass
            } else {
                BuiltinOutcome::Fail
            }),
        }
    }

    fn emit(
        &self,
        r: &RuleGrounder<'_>,
        binding: &Binding,
        aux: &[Literal],
        out: &mut BTreeSet<GroundRule>,
        fresh: &mut Vec<Literal>,
    ) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for elem in &r.rule.body {
            if let BodyPayload::Literal(l) = &elem.payload {
                let g = substitute_literal(l, binding);
                if elem.naf {
                    neg.push(g);
                } else {
                    pos.push(g);
                }
            }
        }
        pos.extend(aux.iter().cloned());
        let head: Vec<Literal> = r
            .rule
            .head
            .iter()
            .map(|l| substitute_literal(l, binding))
            .collect();
        fresh.extend(head.iter().cloned());
        for a in aux {
            out.insert(GroundRule::fact(a.clone()));
        }
        out.insert(GroundRule { head, pos, neg }.normalized());
    }
}

enum BuiltinOutcome {
    Pass,
    Fail,
    Bind(String),
}

/// Reduces the ground instances of a stratum to a program over the
/// stratum's own atoms: literals over lower predicates and replacement
/// atoms are decided by `lower`.
pub fn restrict_to_stratum(
    instances: &BTreeSet<GroundRule>,
    stratum: &Stratum,
    lower: &BTreeSet<Literal>,
) -> crate::solver::GroundProgram {
    let local = |l: &Literal| stratum.predicates.contains(l.predicate());
    let mut rules = Vec::new();
    'rules: for inst in instances {
        if inst.head.iter().any(is_aux) {
            continue;
        }
        let mut pos = Vec::new();
        for l in &inst.pos {
            if local(l) {
                pos.push(l.clone());
            } else if !is_aux(l) && !lower.contains(l) {
                continue 'rules;
            }
        }
        let mut neg = Vec::new();
        for l in &inst.neg {
            if local(l) {
                neg.push(l.clone());
            } else if lower.contains(l) {
                continue 'rules;
            }
        }
        rules.push(GroundRule {
            head: inst.head.clone(),
            pos,
            neg,
        });
    }
    crate::solver::GroundProgram::new(rules)
}

/// Predicates mentioned anywhere in the program, with the arities they are
/// used at.
pub fn predicate_arities(program: &Program) -> BTreeMap<String, BTreeSet<usize>> {
    let mut out: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for rule in &program.rules {
        let lits = rule.head.iter().chain(rule.body.iter().filter_map(|b| match &b.payload {
            BodyPayload::Literal(l) => Some(l),
            _ => None,
        }));
        for l in lits {
            out.entry(l.predicate().to_string())
                .or_default()
                .insert(l.atom.arity());
        }
    }
    out
}
