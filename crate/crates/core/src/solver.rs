//! Answer-set enumeration for ground disjunctive programs with strong
//! negation.
//!
//! The search assigns atoms one at a time and prunes with three kinds of
//! propagation: rule clauses (a rule whose body holds needs a true head
//! literal), support (an atom with no rule that could still derive it alone
//! is false) and consistency (`p` excludes `-p`). Each total assignment that
//! survives is kept only if it is a minimal model of its own reduct.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ast::Literal;
use crate::error::{Error, Result};

/// A variable-free rule. `neg` holds the literals under `not`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundRule {
    pub head: Vec<Literal>,
    pub pos: Vec<Literal>,
    pub neg: Vec<Literal>,
}

impl GroundRule {
    pub fn fact(literal: Literal) -> Self {
        GroundRule {
            head: vec![literal],
            pos: Vec::new(),
            neg: Vec::new(),
        }
    }

    /// Sorts and deduplicates each part so that equal rules compare equal.
    pub fn normalized(mut self) -> Self {
        for part in [&mut self.head, &mut self.pos, &mut self.neg] {
            part.sort();
            part.dedup();
        }
        self
    }

    pub fn body_holds(&self, i: &BTreeSet<Literal>) -> bool {
        self.pos.iter().all(|l| i.contains(l)) && !self.neg.iter().any(|l| i.contains(l))
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.head.iter().chain(&self.pos).chain(&self.neg)
    }
}

impl fmt::Display for GroundRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, lit) in self.head.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{lit}")?;
        }
        let body: Vec<String> = self
            .pos
            .iter()
            .map(|l| l.to_string())
            .chain(self.neg.iter().map(|l| format!("not {l}")))
            .collect();
        if !body.is_empty() {
            if !self.head.is_empty() {
                f.write_str(" ")?;
            }
            write!(f, ":- {}", body.join(", "))?;
        } else if self.head.is_empty() {
            f.write_str(":- ")?;
        }
        f.write_str(".")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct GroundProgram {
    pub rules: Vec<GroundRule>,
}

impl GroundProgram {
    pub fn new(rules: Vec<GroundRule>) -> Self {
        GroundProgram { rules }
    }

    pub fn atoms(&self) -> BTreeSet<Literal> {
        self.rules.iter().flat_map(|r| r.literals().cloned()).collect()
    }

    /// Rules sorted and deduplicated, one per line.
    pub fn canonical_text(&self) -> String {
        let mut rules: Vec<&GroundRule> = self.rules.iter().collect();
        rules.sort();
        rules.dedup();
        rules.iter().map(|r| format!("{r}\n")).collect()
    }
}

/// A set of ground literals.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interpretation(pub BTreeSet<Literal>);

impl Interpretation {
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Self {
        Interpretation(literals.into_iter().collect())
    }

    pub fn contains(&self, literal: &Literal) -> bool {
        self.0.contains(literal)
    }

    /// No literal occurs together with its complement.
    pub fn is_consistent(&self) -> bool {
        self.0
            .iter()
            .filter(|l| l.negated)
            .all(|l| !self.0.contains(&l.complement()))
    }
}

/// An answer set together with its position in the canonical order of its
/// program's answer sets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AnswerSet {
    pub literals: BTreeSet<Literal>,
    pub canonical_index: usize,
}

impl AnswerSet {
    pub fn contains(&self, literal: &Literal) -> bool {
        self.literals.contains(literal)
    }

    /// The literals sorted by their text, the order used for printing and
    /// for numbering literals in `&arguments`.
    pub fn canonical_literals(&self) -> Vec<&Literal> {
        canonical_order(&self.literals)
    }

    /// Deduplicates and assigns indices in canonical order: answer sets
    /// compared as sequences of their canonically ordered literal texts.
    pub fn canonical_list(sets: impl IntoIterator<Item = BTreeSet<Literal>>) -> Vec<AnswerSet> {
        let keyed: BTreeMap<Vec<String>, BTreeSet<Literal>> = sets
            .into_iter()
            .map(|literals| {
                let key = canonical_order(&literals)
                    .into_iter()
                    .map(Literal::to_string)
                    .collect();
                (key, literals)
            })
            .collect();
        keyed
            .into_values()
            .enumerate()
            .map(|(canonical_index, literals)| AnswerSet {
                literals,
                canonical_index,
            })
            .collect()
    }
}

/// Literals sorted by their text.
pub fn canonical_order<'a>(literals: impl IntoIterator<Item = &'a Literal>) -> Vec<&'a Literal> {
    let mut out: Vec<&Literal> = literals.into_iter().collect();
    out.sort_by_cached_key(|l| l.to_string());
    out
}

impl fmt::Display for AnswerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, lit) in self.canonical_literals().into_iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{lit}")?;
        }
        f.write_str("}")
    }
}

/// Gelfond–Lifschitz reduct: drops each rule with a `not l` where `l` is in
/// `i`, then strips the remaining `not` literals.
pub fn reduct(g: &GroundProgram, i: &Interpretation) -> GroundProgram {
    GroundProgram::new(
        g.rules
            .iter()
            .filter(|r| !r.neg.iter().any(|l| i.contains(l)))
            .map(|r| GroundRule {
                head: r.head.clone(),
                pos: r.pos.clone(),
                neg: Vec::new(),
            })
            .collect(),
    )
}

/// Whether `i` satisfies every rule of `g`, reading `not` classically
/// against `i`.
pub fn is_model(g: &GroundProgram, i: &Interpretation) -> bool {
    g.rules
        .iter()
        .all(|r| !r.body_holds(&i.0) || r.head.iter().any(|l| i.contains(l)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    /// Maximum number of undetermined atoms one search branch may have to
    /// decide; exceeding it is a resource error.
    pub max_atoms: usize,
}

pub const DEFAULT_MAX_ATOMS: usize = 24;

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_atoms: DEFAULT_MAX_ATOMS,
        }
    }
}

/// All answer sets of `g` in canonical order, with the default bound.
pub fn answer_sets(g: &GroundProgram) -> Result<Vec<AnswerSet>> {
    answer_sets_with(g, SolverConfig::default())
}

pub fn answer_sets_with(g: &GroundProgram, config: SolverConfig) -> Result<Vec<AnswerSet>> {
    let compiled = Compiled::new(g);
    let mut found = Vec::new();
    let mut assign = vec![Val::Unknown; compiled.atoms.len()];
    compiled.search(&mut assign, 0, config.max_atoms, &mut found)?;
    Ok(AnswerSet::canonical_list(found.into_iter().map(|model| {
        model
            .into_iter()
            .map(|a| compiled.atoms[a].clone())
            .collect::<BTreeSet<_>>()
    })))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Val {
    Unknown,
    True,
    False,
}

struct CompiledRule {
    head: Vec<usize>,
    pos: Vec<usize>,
    neg: Vec<usize>,
}

struct Compiled {
    atoms: Vec<Literal>,
    rules: Vec<CompiledRule>,
    /// Rules with the atom in the head.
    heads: Vec<Vec<usize>>,
    complement: Vec<Option<usize>>,
}

#[derive(PartialEq, Eq)]
enum BodyState {
    True,
    False,
    Open,
}

impl Compiled {
    fn new(g: &GroundProgram) -> Self {
        let atoms: Vec<Literal> = g.atoms().into_iter().collect();
        let index = |l: &Literal| atoms.binary_search(l).expect("atom collected above");
        let rules: Vec<CompiledRule> = g
            .rules
            .iter()
            .map(|r| {
                let mut head: Vec<usize> = r.head.iter().map(index).collect();
                head.sort_unstable();
                head.dedup();
                CompiledRule {
                    head,
                    pos: r.pos.iter().map(index).collect(),
                    neg: r.neg.iter().map(index).collect(),
                }
            })
            .collect();
        let mut heads = vec![Vec::new(); atoms.len()];
        for (ri, r) in rules.iter().enumerate() {
            for &h in &r.head {
                heads[h].push(ri);
            }
        }
        let complement = atoms
            .iter()
            .map(|l| atoms.binary_search(&l.complement()).ok())
            .collect();
        Compiled {
            atoms,
            rules,
            heads,
            complement,
        }
    }

    fn body_state(&self, r: &CompiledRule, assign: &[Val]) -> BodyState {
        let mut open = false;
        for &p in &r.pos {
            match assign[p] {
                Val::False => return BodyState::False,
                Val::Unknown => open = true,
                Val::True => {}
            }
        }
        for &n in &r.neg {
            match assign[n] {
                Val::True => return BodyState::False,
                Val::Unknown => open = true,
                Val::False => {}
            }
        }
        if open {
            BodyState::Open
        } else {
            BodyState::True
        }
    }

    /// Runs all propagators to a fixpoint. Returns false on conflict.
    fn propagate(&self, assign: &mut [Val]) -> bool {
        let mut changed = true;
        while changed {
            changed = false;
            for r in &self.rules {
                let state = self.body_state(r, assign);
                if state == BodyState::False {
                    continue;
                }
                if r.head.iter().any(|&h| assign[h] == Val::True) {
                    continue;
                }
                let open_heads: Vec<usize> = r
                    .head
                    .iter()
                    .copied()
                    .filter(|&h| assign[h] == Val::Unknown)
                    .collect();
                match (state, open_heads.len()) {
                    (BodyState::True, 0) => return false,
                    (BodyState::True, 1) => {
                        assign[open_heads[0]] = Val::True;
                        changed = true;
                    }
                    (BodyState::Open, 0) => {
                        // Body must fail; force it when one literal is left open.
                        let open_pos = r.pos.iter().filter(|&&p| assign[p] == Val::Unknown);
                        let open_neg = r.neg.iter().filter(|&&n| assign[n] == Val::Unknown);
                        let open: Vec<(usize, Val)> = open_pos
                            .map(|&p| (p, Val::False))
                            .chain(open_neg.map(|&n| (n, Val::True)))
                            .collect();
                        if let [(atom, val)] = open.as_slice() {
                            assign[*atom] = *val;
                            changed = true;
                        }
                    }
                    _ => {}
                }
            }
            for a in 0..self.atoms.len() {
                if assign[a] == Val::False {
                    continue;
                }
                let supported = self.heads[a].iter().any(|&ri| {
                    let r = &self.rules[ri];
                    self.body_state(r, assign) != BodyState::False
                        && !r.head.iter().any(|&h| h != a && assign[h] == Val::True)
                });
                if !supported {
                    if assign[a] == Val::True {
                        return false;
                    }
                    assign[a] = Val::False;
                    changed = true;
                }
                if assign[a] == Val::True {
                    if let Some(c) = self.complement[a] {
                        match assign[c] {
                            Val::True => return false,
                            Val::Unknown => {
                                assign[c] = Val::False;
                                changed = true;
                            }
                            Val::False => {}
                        }
                    }
                }
            }
        }
        true
    }

    fn search(
        &self,
        assign: &mut [Val],
        decisions: usize,
        limit: usize,
        found: &mut Vec<Vec<usize>>,
    ) -> Result<()> {
        if !self.propagate(assign) {
            return Ok(());
        }
        let Some(next) = assign.iter().position(|v| *v == Val::Unknown) else {
            let model: Vec<usize> = (0..assign.len())
                .filter(|&a| assign[a] == Val::True)
                .collect();
            if self.is_minimal(&model, assign) {
                found.push(model);
            }
            return Ok(());
        };
        if decisions >= limit {
            let open = assign.iter().filter(|v| **v == Val::Unknown).count();
            return Err(Error::TooManyAtoms {
                count: decisions + open,
                limit,
            });
        }
        for val in [Val::True, Val::False] {
            let mut branch = assign.to_vec();
            branch[next] = val;
            self.search(&mut branch, decisions + 1, limit, found)?;
        }
        Ok(())
    }

    /// Whether the total assignment's true atoms form a minimal model of the
    /// reduct. The assignment is already known to be a model.
    fn is_minimal(&self, model: &[usize], assign: &[Val]) -> bool {
        let local = |a: usize| model.binary_search(&a).ok();
        // Reduct rules whose body can hold inside the model, over local indices.
        let mut clauses: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for r in &self.rules {
            if r.neg.iter().any(|&n| assign[n] == Val::True) {
                continue;
            }
            let Some(body) = r.pos.iter().map(|&p| local(p)).collect::<Option<Vec<_>>>() else {
                continue;
            };
            let head: Vec<usize> = r.head.iter().filter_map(|&h| local(h)).collect();
            clauses.push((body, head));
        }
        if clauses.iter().all(|(_, head)| head.len() <= 1) {
            // Definite: the least model must be the whole candidate.
            let mut derived = vec![false; model.len()];
            let mut changed = true;
            while changed {
                changed = false;
                for (body, head) in &clauses {
                    if let [h] = head.as_slice() {
                        if !derived[*h] && body.iter().all(|&b| derived[b]) {
                            derived[*h] = true;
                            changed = true;
                        }
                    }
                }
            }
            return derived.iter().all(|d| *d);
        }
        !smaller_model_exists(model.len(), &clauses)
    }
}

/// Looks for a model of `clauses` (body → disjunctive head, over variables
/// `0..n`) in which at least one variable is false.
fn smaller_model_exists(n: usize, clauses: &[(Vec<usize>, Vec<usize>)]) -> bool {
    fn propagate(vals: &mut [Option<bool>], clauses: &[(Vec<usize>, Vec<usize>)]) -> bool {
        let mut changed = true;
        while changed {
            changed = false;
            for (body, head) in clauses {
                if body.iter().any(|&b| vals[b] == Some(false))
                    || head.iter().any(|&h| vals[h] == Some(true))
                {
                    continue;
                }
                let open: Vec<(usize, bool)> = body
                    .iter()
                    .filter(|&&b| vals[b].is_none())
                    .map(|&b| (b, false))
                    .chain(head.iter().filter(|&&h| vals[h].is_none()).map(|&h| (h, true)))
                    .collect();
                match open.as_slice() {
                    [] => return false,
                    [(v, val)] => {
                        vals[*v] = Some(*val);
                        changed = true;
                    }
                    _ => {}
                }
            }
            if vals.iter().all(|v| *v == Some(true)) {
                return false;
            }
            let open: Vec<usize> = (0..vals.len()).filter(|&v| vals[v].is_none()).collect();
            if let [v] = open.as_slice() {
                if vals.iter().all(|x| *x != Some(false)) {
                    vals[*v] = Some(false);
                    changed = true;
                }
            }
        }
        true
    }

    fn dpll(vals: &mut [Option<bool>], clauses: &[(Vec<usize>, Vec<usize>)]) -> bool {
        if !propagate(vals, clauses) {
            return false;
        }
        let Some(next) = vals.iter().position(Option::is_none) else {
            return true;
        };
        for val in [false, true] {
            let mut branch = vals.to_vec();
            branch[next] = Some(val);
            if dpll(&mut branch, clauses) {
                return true;
            }
        }
        false
    }

    let mut vals = vec![None; n];
    n > 0 && dpll(&mut vals, clauses)
}
