//! External atoms: the oracle contract, the registry, and the arithmetic and
//! comparison built-ins.
//!
//! An oracle is a Boolean function of the interpretation, its input terms,
//! and an output tuple. Operationally it is an enumerator that lists, for a
//! given interpretation and inputs, the finite set of output tuples for which
//! it is true. `test` is derived from that set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::ast::{Literal, Term};
use crate::engine::OracleContext;
use crate::error::{Error, Result};

/// A ground output tuple.
pub type Tuple = Vec<Term>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    /// Names a predicate of the calling program; its extension is handed to
    /// the oracle through the [`InputView`].
    Predicate,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputSignature {
    Fixed(Vec<InputKind>),
    /// `leading` kinds followed by any number of `rest`.
    Variadic {
        leading: Vec<InputKind>,
        rest: InputKind,
    },
}

impl InputSignature {
    pub fn kind_at(&self, index: usize) -> Option<InputKind> {
        match self {
            InputSignature::Fixed(kinds) => kinds.get(index).copied(),
            InputSignature::Variadic { leading, rest } => {
                Some(leading.get(index).copied().unwrap_or(*rest))
            }
        }
    }

    pub fn accepts(&self, count: usize) -> bool {
        match self {
            InputSignature::Fixed(kinds) => kinds.len() == count,
            InputSignature::Variadic { leading, .. } => count >= leading.len(),
        }
    }

    fn describe(&self) -> String {
        match self {
            InputSignature::Fixed(kinds) => kinds.len().to_string(),
            InputSignature::Variadic { leading, .. } => format!("at least {}", leading.len()),
        }
    }
}

/// The part of an interpretation an oracle may look at: for each of its
/// predicate inputs, the literals over that predicate.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InputView {
    extensions: BTreeMap<String, BTreeSet<Literal>>,
}

impl InputView {
    pub fn new() -> Self {
        Self::default()
    }

    /// Restricts `literals` to the given predicate names. Every requested
    /// predicate appears in the view, possibly with an empty extension.
    pub fn restrict<'a>(
        literals: impl IntoIterator<Item = &'a Literal>,
        predicates: &[String],
    ) -> Self {
        let mut extensions: BTreeMap<String, BTreeSet<Literal>> = predicates
            .iter()
            .map(|p| (p.clone(), BTreeSet::new()))
            .collect();
        for lit in literals {
            if let Some(ext) = extensions.get_mut(lit.predicate()) {
                ext.insert(lit.clone());
            }
        }
        InputView { extensions }
    }

    pub fn insert(&mut self, literal: Literal) {
        self.extensions
            .entry(literal.predicate().to_string())
            .or_default()
            .insert(literal);
    }

    /// Literals over `predicate`, of any arity and either sign.
    pub fn extension(&self, predicate: &str) -> impl Iterator<Item = &Literal> {
        self.extensions.get(predicate).into_iter().flatten()
    }

    /// Argument tuples of the positive literals over `predicate`.
    pub fn tuples<'a>(&'a self, predicate: &str) -> impl Iterator<Item = &'a [Term]> + 'a {
        self.extension(predicate)
            .filter(|l| !l.negated)
            .map(|l| l.atom.args.as_slice())
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.extensions.values().flatten()
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.extensions.keys().map(String::as_str)
    }
}

pub trait Oracle: Send + Sync {
    fn name(&self) -> &str;

    fn inputs(&self) -> InputSignature;

    /// `None` accepts any number of output terms.
    fn output_arity(&self) -> Option<usize>;

    /// All output tuples for which the atom is true. Must be finite.
    fn enumerate(
        &self,
        cx: &OracleContext<'_>,
        inputs: &[Term],
        view: &InputView,
    ) -> Result<BTreeSet<Tuple>>;

    fn test(
        &self,
        cx: &OracleContext<'_>,
        inputs: &[Term],
        view: &InputView,
        outputs: &[Term],
    ) -> Result<bool> {
        Ok(self.enumerate(cx, inputs, view)?.contains(outputs))
    }
}

impl fmt::Debug for dyn Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "&{}", self.name())
    }
}

/// Name → oracle registry. Immutable once built; `register` returns an
/// extended copy.
#[derive(Clone, Default)]
pub struct OracleEnv {
    registry: BTreeMap<String, Arc<dyn Oracle>>,
}

impl fmt::Debug for OracleEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.registry.keys()).finish()
    }
}

impl OracleEnv {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The built-ins plus the five subprogram atoms.
    pub fn standard() -> Self {
        let mut env = Self::empty();
        let oracles: Vec<Arc<dyn Oracle>> = vec![
            Arc::new(Compare(crate::ast::CompareOp::Eq)),
            Arc::new(Compare(crate::ast::CompareOp::Ne)),
            Arc::new(Compare(crate::ast::CompareOp::Lt)),
            Arc::new(Compare(crate::ast::CompareOp::Le)),
            Arc::new(Compare(crate::ast::CompareOp::Gt)),
            Arc::new(Compare(crate::ast::CompareOp::Ge)),
            Arc::new(Plus),
            Arc::new(crate::nested::CallHex::embedded()),
            Arc::new(crate::nested::CallHex::file()),
            Arc::new(crate::nested::AnswerSetsAtom),
            Arc::new(crate::nested::PredicatesAtom),
            Arc::new(crate::nested::ArgumentsAtom),
        ];
        for oracle in oracles {
            env = env
                .register(oracle)
                .expect("standard oracle names are distinct");
        }
        env
    }

    pub fn register(&self, oracle: Arc<dyn Oracle>) -> Result<Self> {
        let name = oracle.name().to_string();
        if self.registry.contains_key(&name) {
            return Err(Error::DuplicateOracle(name));
        }
        let mut registry = self.registry.clone();
        registry.insert(name, oracle);
        Ok(OracleEnv { registry })
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn Oracle>> {
        self.registry
            .get(name)
            .ok_or_else(|| Error::UnknownOracle(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.registry.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.registry.keys().map(String::as_str)
    }

    /// Predicate names among `inputs` according to the oracle's signature.
    pub fn predicate_inputs(&self, name: &str, inputs: &[Term]) -> Result<Vec<String>> {
        let oracle = self.get(name)?;
        let sig = oracle.inputs();
        let mut preds = Vec::new();
        for (i, term) in inputs.iter().enumerate() {
            if sig.kind_at(i) == Some(InputKind::Predicate) {
                match term {
                    Term::Const(p) => preds.push(p.clone()),
                    other => {
                        return Err(Error::Oracle {
                            oracle: name.to_string(),
                            message: format!("input {} must be a predicate name, got {other}", i + 1),
                        })
                    }
                }
            }
        }
        Ok(preds)
    }

    /// Checks input and output counts of an occurrence of `name`.
    pub fn check_arity(&self, name: &str, inputs: usize, outputs: usize) -> Result<()> {
        let oracle = self.get(name)?;
        let sig = oracle.inputs();
        if !sig.accepts(inputs) {
            return Err(Error::ArityMismatch {
                oracle: name.to_string(),
                what: "inputs",
                expected: sig.describe(),
                found: inputs,
            });
        }
        if let Some(expected) = oracle.output_arity() {
            if expected != outputs {
                return Err(Error::ArityMismatch {
                    oracle: name.to_string(),
                    what: "outputs",
                    expected: expected.to_string(),
                    found: outputs,
                });
            }
        }
        Ok(())
    }

    /// Runs the enumerator of `name` after checking arity and that every
    /// input is ground.
    pub fn evaluate(
        &self,
        cx: &OracleContext<'_>,
        name: &str,
        view: &InputView,
        inputs: &[Term],
    ) -> Result<BTreeSet<Tuple>> {
        let oracle = self.get(name)?;
        if !oracle.inputs().accepts(inputs.len()) {
            return Err(Error::ArityMismatch {
                oracle: name.to_string(),
                what: "inputs",
                expected: oracle.inputs().describe(),
                found: inputs.len(),
            });
        }
        if let Some(var) = inputs.iter().find_map(Term::as_var) {
            return Err(Error::Unbound {
                variable: var.to_string(),
                element: format!("&{name}"),
            });
        }
        oracle.enumerate(cx, inputs, view)
    }
}

fn expect_int(oracle: &str, term: &Term) -> Result<i64> {
    match term {
        Term::Int(v) => Ok(*v),
        other => Err(Error::Arithmetic(format!(
            "`{oracle}` needs integer operands, got {other}"
        ))),
    }
}

/// `X op Y` for the six comparison operators. `=` is functional: given the
/// right side it yields the left; the others take both sides as inputs and
/// yield the empty tuple when the comparison holds.
#[derive(Debug)]
pub struct Compare(pub crate::ast::CompareOp);

impl Oracle for Compare {
    fn name(&self) -> &str {
        self.0.symbol()
    }

    fn inputs(&self) -> InputSignature {
        use crate::ast::CompareOp;
        match self.0 {
            CompareOp::Eq => InputSignature::Fixed(vec![InputKind::Constant]),
            _ => InputSignature::Fixed(vec![InputKind::Constant; 2]),
        }
    }

    fn output_arity(&self) -> Option<usize> {
        use crate::ast::CompareOp;
        Some(if self.0 == CompareOp::Eq { 1 } else { 0 })
    }

    fn enumerate(
        &self,
        _cx: &OracleContext<'_>,
        inputs: &[Term],
        _view: &InputView,
    ) -> Result<BTreeSet<Tuple>> {
        use crate::ast::CompareOp;
        let holds = match self.0 {
            CompareOp::Eq => return Ok(BTreeSet::from([vec![inputs[0].clone()]])),
            CompareOp::Ne => inputs[0] != inputs[1],
            CompareOp::Lt => inputs[0] < inputs[1],
            CompareOp::Le => inputs[0] <= inputs[1],
            CompareOp::Gt => inputs[0] > inputs[1],
            CompareOp::Ge => inputs[0] >= inputs[1],
        };
        Ok(if holds {
            BTreeSet::from([Vec::new()])
        } else {
            BTreeSet::new()
        })
    }
}

/// `X = Y + Z` with checked integer addition.
#[derive(Debug)]
pub struct Plus;

impl Oracle for Plus {
    fn name(&self) -> &str {
        "=+"
    }

    fn inputs(&self) -> InputSignature {
        InputSignature::Fixed(vec![InputKind::Constant; 2])
    }

    fn output_arity(&self) -> Option<usize> {
        Some(1)
    }

    fn enumerate(
        &self,
        _cx: &OracleContext<'_>,
        inputs: &[Term],
        _view: &InputView,
    ) -> Result<BTreeSet<Tuple>> {
        let a = expect_int("+", &inputs[0])?;
        let b = expect_int("+", &inputs[1])?;
        let sum = a
            .checked_add(b)
            .ok_or_else(|| Error::Arithmetic(format!("{a} + {b} overflows")))?;
        Ok(BTreeSet::from([vec![Term::Int(sum)]]))
    }
}
