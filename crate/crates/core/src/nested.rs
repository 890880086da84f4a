//! Subprogram calls and the answer cache.
//!
//! `&callhex[P, p1, ..., pn](H)` and `&callhexfile[F, p1, ..., pn](H)` run a
//! subprogram (a string constant or a file) extended with the caller's facts
//! over `p1..pn`, store its answer sets in the session's [`AnswerCache`] and
//! return the entry's program handle. `&answersets`, `&predicates` and
//! `&arguments` then expose the stored answer sets to the caller.
//!
//! Program handles are allocated consecutively from 0 as entries are
//! stored; answer-set handles restart at 0 in each entry and follow the
//! canonical answer-set order.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, Condvar, Mutex};

use crate::ast::{Literal, Term};
use crate::engine::OracleContext;
use crate::error::{Error, Result};
use crate::external::{InputKind, InputSignature, InputView, Oracle, Tuple};
use crate::solver::AnswerSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceKind {
    Embedded,
    File,
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceKind::Embedded => "embedded",
            SourceKind::File => "file",
        })
    }
}

/// Identity of a call: what program, and which facts were injected.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProgramKey {
    pub kind: SourceKind,
    /// Canonical program text for embedded programs, absolute path for files.
    pub identity: String,
    /// Sorted.
    pub injected: Vec<Literal>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheEntry {
    pub program_handle: usize,
    pub key: ProgramKey,
    /// Indexed by answer-set handle.
    pub answer_sets: Vec<AnswerSet>,
}

impl CacheEntry {
    pub fn answer_set(&self, handle: usize) -> Result<&AnswerSet> {
        self.answer_sets.get(handle).ok_or_else(|| {
            Error::UnknownHandle(format!("({}, {handle})", self.program_handle))
        })
    }
}

#[derive(Default)]
struct CacheState {
    entries: Vec<Arc<CacheEntry>>,
    index: HashMap<ProgramKey, usize>,
    in_flight: HashSet<ProgramKey>,
}

/// Session-wide store of subprogram results.
///
/// Concurrent first requests for the same key are coalesced: one caller
/// evaluates, the others wait for its entry.
#[derive(Default)]
pub struct AnswerCache {
    state: Mutex<CacheState>,
    ready: Condvar,
}

impl fmt::Debug for AnswerCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries()).finish()
    }
}

impl AnswerCache {
    pub fn len(&self) -> usize {
        self.state.lock().expect("cache lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<Arc<CacheEntry>> {
        self.state.lock().expect("cache lock").entries.clone()
    }

    pub fn lookup(&self, key: &ProgramKey) -> Option<usize> {
        self.state.lock().expect("cache lock").index.get(key).copied()
    }

    pub fn entry(&self, program_handle: usize) -> Result<Arc<CacheEntry>> {
        self.state
            .lock()
            .expect("cache lock")
            .entries
            .get(program_handle)
            .cloned()
            .ok_or_else(|| Error::UnknownHandle(program_handle.to_string()))
    }

    pub fn reset(&self) {
        let mut state = self.state.lock().expect("cache lock");
        state.entries.clear();
        state.index.clear();
    }

    /// Returns the handle for `key`, running `evaluate` only if no entry
    /// exists yet. The handle is allocated when the result is stored.
    pub fn get_or_evaluate(
        &self,
        key: ProgramKey,
        evaluate: impl FnOnce() -> Result<Vec<AnswerSet>>,
    ) -> Result<usize> {
        {
            let mut state = self.state.lock().expect("cache lock");
            loop {
                if let Some(&h) = state.index.get(&key) {
                    return Ok(h);
                }
                if !state.in_flight.contains(&key) {
                    break;
                }
                state = self.ready.wait(state).expect("cache lock");
            }
            state.in_flight.insert(key.clone());
        }
        let result = evaluate();
        let mut state = self.state.lock().expect("cache lock");
        state.in_flight.remove(&key);
        let out = result.map(|answer_sets| {
            let handle = state.entries.len();
            state.entries.push(Arc::new(CacheEntry {
                program_handle: handle,
                key: key.clone(),
                answer_sets,
            }));
            state.index.insert(key, handle);
            handle
        });
        self.ready.notify_all();
        out
    }
}

/// Answer-set handles of the entry `program_handle`; empty when the
/// subprogram has no answer set.
pub fn answersets(cache: &AnswerCache, program_handle: usize) -> Result<BTreeSet<usize>> {
    let entry = cache.entry(program_handle)?;
    Ok((0..entry.answer_sets.len()).collect())
}

/// `(predicate, arity)` pairs occurring in one answer set, over both
/// positive and strongly negated literals.
pub fn predicates(
    cache: &AnswerCache,
    program_handle: usize,
    answer_set: usize,
) -> Result<BTreeSet<(String, usize)>> {
    let entry = cache.entry(program_handle)?;
    Ok(entry
        .answer_set(answer_set)?
        .literals
        .iter()
        .map(|l| (l.predicate().to_string(), l.atom.arity()))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowPosition {
    Argument(usize),
    Sign,
}

/// One row of `&arguments`: argument `position` of literal number
/// `literal_index` over `predicate`, or that literal's sign (0 positive,
/// 1 strongly negated).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LiteralRow {
    pub program_handle: usize,
    pub answerset_handle: usize,
    pub predicate: String,
    pub literal_index: usize,
    pub position: RowPosition,
    pub value: Term,
}

/// The constant naming the sign position in `&arguments` output.
pub const SIGN_MARKER: &str = "s";

impl LiteralRow {
    /// `(I, position-or-s, value)` as produced by `&arguments`.
    pub fn tuple(&self) -> Tuple {
        let position = match self.position {
            RowPosition::Argument(j) => Term::Int(j as i64),
            RowPosition::Sign => Term::constant(SIGN_MARKER),
        };
        vec![Term::Int(self.literal_index as i64), position, self.value.clone()]
    }
}

/// Rows for every literal over `predicate` in one answer set. Literals are
/// numbered per predicate in canonical order, across arities and signs.
pub fn arguments(
    cache: &AnswerCache,
    program_handle: usize,
    answer_set: usize,
    predicate: &str,
) -> Result<Vec<LiteralRow>> {
    let entry = cache.entry(program_handle)?;
    let set = entry.answer_set(answer_set)?;
    let mut rows = Vec::new();
    for (literal_index, lit) in set
        .canonical_literals()
        .into_iter()
        .filter(|l| l.predicate() == predicate)
        .enumerate()
    {
        let row = |position, value| LiteralRow {
            program_handle,
            answerset_handle: answer_set,
            predicate: predicate.to_string(),
            literal_index,
            position,
            value,
        };
        for (j, arg) in lit.atom.args.iter().enumerate() {
            rows.push(row(RowPosition::Argument(j), arg.clone()));
        }
        rows.push(row(RowPosition::Sign, Term::Int(i64::from(lit.negated))));
    }
    Ok(rows)
}

fn handle_of(oracle: &str, term: &Term) -> Result<usize> {
    match term {
        Term::Int(v) if *v >= 0 => Ok(*v as usize),
        other => Err(Error::UnknownHandle(format!("{other} (in &{oracle})"))),
    }
}

fn handle_term(h: usize) -> Term {
    Term::Int(h as i64)
}

/// `&callhex` and `&callhexfile`.
#[derive(Debug)]
pub struct CallHex {
    kind: SourceKind,
}

impl CallHex {
    pub fn embedded() -> Self {
        CallHex {
            kind: SourceKind::Embedded,
        }
    }

    pub fn file() -> Self {
        CallHex {
            kind: SourceKind::File,
        }
    }
}

impl Oracle for CallHex {
    fn name(&self) -> &str {
        match self.kind {
            SourceKind::Embedded => "callhex",
            SourceKind::File => "callhexfile",
        }
    }

    fn inputs(&self) -> InputSignature {
        InputSignature::Variadic {
            leading: vec![InputKind::Constant],
            rest: InputKind::Predicate,
        }
    }

    fn output_arity(&self) -> Option<usize> {
        Some(1)
    }

    fn enumerate(
        &self,
        cx: &OracleContext<'_>,
        inputs: &[Term],
        view: &InputView,
    ) -> Result<BTreeSet<Tuple>> {
        let source = match (&inputs[0], self.kind) {
            (Term::Str(s), _) => s.as_str(),
            (Term::Const(s), SourceKind::File) => s.as_str(),
            (other, _) => {
                return Err(Error::Oracle {
                    oracle: self.name().into(),
                    message: format!("expected a string constant, got {other}"),
                })
            }
        };
        let predicates: HashSet<&str> = inputs[1..]
            .iter()
            .filter_map(|t| match t {
                Term::Const(p) => Some(p.as_str()),
                _ => None,
            })
            .collect();
        if predicates.len() != inputs.len() - 1 {
            return Err(Error::Oracle {
                oracle: self.name().into(),
                message: "input predicates must be distinct predicate names".into(),
            });
        }
        let mut injected = InputView::new();
        for lit in view.literals().filter(|l| predicates.contains(l.predicate())) {
            injected.insert(lit.clone());
        }
        let handle = cx.session().call(cx, self.kind, source, &injected)?;
        Ok(BTreeSet::from([vec![handle_term(handle)]]))
    }
}

/// `&answersets[PH](AH)`.
#[derive(Debug)]
pub struct AnswerSetsAtom;

impl Oracle for AnswerSetsAtom {
    fn name(&self) -> &str {
        "answersets"
    }

    fn inputs(&self) -> InputSignature {
        InputSignature::Fixed(vec![InputKind::Constant])
    }

    fn output_arity(&self) -> Option<usize> {
        Some(1)
    }

    fn enumerate(
        &self,
        cx: &OracleContext<'_>,
        inputs: &[Term],
        _view: &InputView,
    ) -> Result<BTreeSet<Tuple>> {
        let ph = handle_of(self.name(), &inputs[0])?;
        Ok(answersets(cx.session().cache(), ph)?
            .into_iter()
            .map(|h| vec![handle_term(h)])
            .collect())
    }
}

/// `&predicates[PH, AH](P, A)`.
#[derive(Debug)]
pub struct PredicatesAtom;

impl Oracle for PredicatesAtom {
    fn name(&self) -> &str {
        "predicates"
    }

    fn inputs(&self) -> InputSignature {
        InputSignature::Fixed(vec![InputKind::Constant; 2])
    }

    fn output_arity(&self) -> Option<usize> {
        Some(2)
    }

    fn enumerate(
        &self,
        cx: &OracleContext<'_>,
        inputs: &[Term],
        _view: &InputView,
    ) -> Result<BTreeSet<Tuple>> {
        let ph = handle_of(self.name(), &inputs[0])?;
        let ah = handle_of(self.name(), &inputs[1])?;
        Ok(predicates(cx.session().cache(), ph, ah)?
            .into_iter()
            .map(|(p, a)| vec![Term::Const(p), Term::Int(a as i64)])
            .collect())
    }
}

/// `&arguments[PH, AH, pred](I, Pos, Val)`.
#[derive(Debug)]
pub struct ArgumentsAtom;

impl Oracle for ArgumentsAtom {
    fn name(&self) -> &str {
        "arguments"
    }

    fn inputs(&self) -> InputSignature {
        InputSignature::Fixed(vec![InputKind::Constant; 3])
    }

    fn output_arity(&self) -> Option<usize> {
        Some(3)
    }

    fn enumerate(
        &self,
        cx: &OracleContext<'_>,
        inputs: &[Term],
        _view: &InputView,
    ) -> Result<BTreeSet<Tuple>> {
        let ph = handle_of(self.name(), &inputs[0])?;
        let ah = handle_of(self.name(), &inputs[1])?;
        let Term::Const(pred) = &inputs[2] else {
            return Err(Error::Oracle {
                oracle: self.name().into(),
                message: format!("expected a predicate name, got {}", inputs[2]),
            });
        };
        Ok(arguments(cx.session().cache(), ph, ah, pred)?
            .iter()
            .map(LiteralRow::tuple)
            .collect())
    }
}
