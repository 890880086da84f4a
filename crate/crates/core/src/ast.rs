//! Syntax tree for HEX-lite programs.
//!
//! Every type here renders to a canonical textual form through `Display`.
//! That text reparses to a structurally equal value, and
//! [`Program::canonical_text`] builds on it to give subprograms a stable
//! identity in the answer cache.

use std::collections::BTreeSet;
use std::fmt;

/// A term. The derived order (integers, then symbols, then strings, then
/// variables) is the canonical term order used for literals and answer sets.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Int(i64),
    Const(String),
    Str(String),
    Var(String),
}

impl Term {
    pub fn constant(symbol: impl Into<String>) -> Self {
        Term::Const(symbol.into())
    }

    pub fn string(text: impl Into<String>) -> Self {
        Term::Str(text.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn is_ground(&self) -> bool {
        !matches!(self, Term::Var(_))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

impl From<i64> for Term {
    fn from(value: i64) -> Self {
        Term::Int(value)
    }
}

/// Writes `text` as a double-quoted string constant with canonical escapes.
pub fn write_quoted(f: &mut impl fmt::Write, text: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in text.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

/// Quotes and escapes `text` so that it can be embedded as a string constant.
pub fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    write_quoted(&mut out, text).expect("writing to a String cannot fail");
    out
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(v) => write!(f, "{v}"),
            Term::Const(s) | Term::Var(s) => f.write_str(s),
            Term::Str(s) => write_quoted(f, s),
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    for (i, arg) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{arg}")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            write_args(f, &self.args)?;
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// An atom or its strong (classical) negation.
///
/// Ordered by atom first, so `p(a)` and `-p(a)` sit next to each other.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl Literal {
    pub fn positive(atom: Atom) -> Self {
        Literal {
            atom,
            negated: false,
        }
    }

    pub fn negative(atom: Atom) -> Self {
        Literal {
            atom,
            negated: true,
        }
    }

    /// Shorthand for building ground test fixtures.
    pub fn fact(predicate: &str, args: &[Term]) -> Self {
        Literal::positive(Atom::new(predicate, args.to_vec()))
    }

    pub fn predicate(&self) -> &str {
        &self.atom.predicate
    }

    pub fn complement(&self) -> Literal {
        Literal {
            atom: self.atom.clone(),
            negated: !self.negated,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.atom.is_ground()
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("-")?;
        }
        write!(f, "{}", self.atom)
    }
}

/// `&name[inputs](outputs)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExternalAtom {
    pub name: String,
    pub inputs: Vec<Term>,
    pub outputs: Vec<Term>,
}

impl fmt::Display for ExternalAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "&{}", self.name)?;
        if !self.inputs.is_empty() {
            f.write_str("[")?;
            write_args(f, &self.inputs)?;
            f.write_str("]")?;
        }
        f.write_str("(")?;
        write_args(f, &self.outputs)?;
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

/// `lhs op rhs` or `lhs = rhs + addend`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Builtin {
    pub op: CompareOp,
    pub lhs: Term,
    pub rhs: Term,
    /// Only present when `op` is `Eq`.
    pub addend: Option<Term>,
}

impl Builtin {
    /// Name of the oracle this built-in is routed to.
    pub fn oracle_name(&self) -> &'static str {
        match (self.op, &self.addend) {
            (CompareOp::Eq, Some(_)) => "=+",
            (op, _) => op.symbol(),
        }
    }

    /// Whether the left-hand side is computed from the right-hand side
    /// (as opposed to both sides being compared).
    pub fn is_assignment(&self) -> bool {
        self.op == CompareOp::Eq
    }

    /// Terms the oracle needs ground before it can run.
    pub fn input_terms(&self) -> Vec<&Term> {
        if self.is_assignment() {
            std::iter::once(&self.rhs).chain(self.addend.as_ref()).collect()
        } else {
            vec![&self.lhs, &self.rhs]
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)?;
        if let Some(addend) = &self.addend {
            write!(f, " + {addend}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BodyPayload {
    Literal(Literal),
    External(ExternalAtom),
    Builtin(Builtin),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BodyElement {
    pub payload: BodyPayload,
    pub naf: bool,
}

impl BodyElement {
    pub fn pos(literal: Literal) -> Self {
        BodyElement {
            payload: BodyPayload::Literal(literal),
            naf: false,
        }
    }

    pub fn not(literal: Literal) -> Self {
        BodyElement {
            payload: BodyPayload::Literal(literal),
            naf: true,
        }
    }

    pub fn external(atom: ExternalAtom) -> Self {
        BodyElement {
            payload: BodyPayload::External(atom),
            naf: false,
        }
    }

    /// Variables in the order they are written.
    pub fn variables(&self) -> Vec<&str> {
        let terms: Vec<&Term> = match &self.payload {
            BodyPayload::Literal(l) => l.atom.args.iter().collect(),
            BodyPayload::External(e) => e.inputs.iter().chain(&e.outputs).collect(),
            BodyPayload::Builtin(b) => std::iter::once(&b.lhs)
                .chain(std::iter::once(&b.rhs))
                .chain(b.addend.as_ref())
                .collect(),
        };
        terms.into_iter().filter_map(Term::as_var).collect()
    }
}

impl fmt::Display for BodyElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.naf {
            f.write_str("not ")?;
        }
        match &self.payload {
            BodyPayload::Literal(l) => write!(f, "{l}"),
            BodyPayload::External(e) => write!(f, "{e}"),
            BodyPayload::Builtin(b) => write!(f, "{b}"),
        }
    }
}

/// Outcome of the safety check on a single rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Safety {
    Safe,
    Unsafe(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub head: Vec<Literal>,
    pub body: Vec<BodyElement>,
}

impl Rule {
    pub fn fact(literal: Literal) -> Self {
        Rule {
            head: vec![literal],
            body: Vec::new(),
        }
    }

    pub fn is_fact(&self) -> bool {
        self.head.len() == 1 && self.body.is_empty()
    }

    pub fn is_constraint(&self) -> bool {
        self.head.is_empty()
    }

    pub fn externals(&self) -> impl Iterator<Item = (&ExternalAtom, bool)> {
        self.body.iter().filter_map(|b| match &b.payload {
            BodyPayload::External(e) => Some((e, b.naf)),
            _ => None,
        })
    }

    /// Checks that every variable is bound by a positive body literal, by the
    /// output of a non-negated external atom whose inputs are bound, or by the
    /// left side of an `=` whose right side is bound.
    ///
    /// Returns the first unbound variable in reading order (head, then body).
    pub fn check_safety(&self) -> Safety {
        let mut bound: BTreeSet<&str> = BTreeSet::new();
        for elem in &self.body {
            if let (BodyPayload::Literal(l), false) = (&elem.payload, elem.naf) {
                bound.extend(l.atom.args.iter().filter_map(Term::as_var));
            }
        }
        loop {
            let before = bound.len();
            for elem in self.body.iter().filter(|b| !b.naf) {
                match &elem.payload {
                    BodyPayload::External(e) => {
                        let ready = e
                            .inputs
                            .iter()
                            .filter_map(Term::as_var)
                            .all(|v| bound.contains(v));
                        if ready {
                            bound.extend(e.outputs.iter().filter_map(Term::as_var));
                        }
                    }
                    BodyPayload::Builtin(b) if b.is_assignment() => {
                        let ready = b
                            .input_terms()
                            .into_iter()
                            .filter_map(Term::as_var)
                            .all(|v| bound.contains(v));
                        if let (true, Term::Var(v)) = (ready, &b.lhs) {
                            bound.insert(v);
                        }
                    }
                    _ => {}
                }
            }
            if bound.len() == before {
                break;
            }
        }
        let head_vars = self
            .head
            .iter()
            .flat_map(|l| l.atom.args.iter().filter_map(Term::as_var));
        let body_vars = self.body.iter().flat_map(|b| b.variables());
        match head_vars.chain(body_vars).find(|v| !bound.contains(v)) {
            Some(v) => Safety::Unsafe(v.to_string()),
            None => Safety::Safe,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, lit) in self.head.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{lit}")?;
        }
        if !self.body.is_empty() || self.head.is_empty() {
            if !self.head.is_empty() {
                f.write_str(" ")?;
            }
            f.write_str(":-")?;
            for (i, elem) in self.body.iter().enumerate() {
                f.write_str(if i == 0 { " " } else { ", " })?;
                write!(f, "{elem}")?;
            }
            if self.body.is_empty() {
                f.write_str(" ")?;
            }
        }
        f.write_str(".")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Program {
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Self {
        Program { rules }
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// One rule per line, rules sorted by their text. Equal programs up to
    /// rule order and layout give identical strings.
    pub fn canonical_text(&self) -> String {
        let mut lines: Vec<String> = self.rules.iter().map(Rule::to_string).collect();
        lines.sort();
        let mut out = String::new();
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Ground facts of the program (single-literal heads with empty bodies).
    pub fn facts(&self) -> BTreeSet<Literal> {
        self.rules
            .iter()
            .filter(|r| r.is_fact() && r.head[0].is_ground())
            .map(|r| r.head[0].clone())
            .collect()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(p: &str, args: &[&str]) -> Literal {
        let args = args
            .iter()
            .map(|a| {
                if a.starts_with(|c: char| c.is_uppercase()) {
                    Term::var(*a)
                } else {
                    Term::constant(*a)
                }
            })
            .collect();
        Literal::positive(Atom::new(p, args))
    }

    #[test]
    fn rule_rendering() {
        let fact = Rule::fact(lit("a", &[]));
        assert_eq!(fact.to_string(), "a.");
        let disj = Rule {
            head: vec![lit("a", &[]), lit("b", &[])],
            body: vec![],
        };
        assert_eq!(disj.to_string(), "a | b.");
        let constraint = Rule {
            head: vec![],
            body: vec![BodyElement::pos(lit("p", &[]))],
        };
        assert_eq!(constraint.to_string(), ":- p.");
        let empty = Rule {
            head: vec![],
            body: vec![],
        };
        assert_eq!(empty.to_string(), ":- .");
    }

    #[test]
    fn literal_rendering() {
        let l = Literal::negative(Atom::new("p", vec![Term::constant("a"), Term::Int(-3)]));
        assert_eq!(l.to_string(), "-p(a,-3)");
        assert_eq!(Term::string("a\"b\\").to_string(), r#""a\"b\\""#);
    }

    #[test]
    fn safety_naf_does_not_bind() {
        let r = Rule {
            head: vec![lit("p", &["X"])],
            body: vec![BodyElement::not(lit("q", &["X"]))],
        };
        assert_eq!(r.check_safety(), Safety::Unsafe("X".into()));
    }

    #[test]
    fn safety_external_chain() {
        // h(A) :- &g[X](A), &f(X).  X comes from &f, then feeds &g.
        let r = Rule {
            head: vec![lit("h", &["A"])],
            body: vec![
                BodyElement::external(ExternalAtom {
                    name: "g".into(),
                    inputs: vec![Term::var("X")],
                    outputs: vec![Term::var("A")],
                }),
                BodyElement::external(ExternalAtom {
                    name: "f".into(),
                    inputs: vec![],
                    outputs: vec![Term::var("X")],
                }),
            ],
        };
        assert_eq!(r.check_safety(), Safety::Safe);
    }

    #[test]
    fn safety_reports_first_variable_in_reading_order() {
        let r = Rule {
            head: vec![lit("p", &["Y", "X"])],
            body: vec![BodyElement::not(lit("q", &["X", "Y"]))],
        };
        assert_eq!(r.check_safety(), Safety::Unsafe("Y".into()));
    }

    #[test]
    fn canonical_text_sorts_rules() {
        let p1 = Program::new(vec![Rule::fact(lit("b", &[])), Rule::fact(lit("a", &[]))]);
        let p2 = Program::new(vec![Rule::fact(lit("a", &[])), Rule::fact(lit("b", &[]))]);
        assert_eq!(p1.canonical_text(), p2.canonical_text());
        assert_eq!(p1.canonical_text(), "a.\nb.\n");
        assert_eq!(Program::default().canonical_text(), "");
    }

    #[test]
    fn term_order_puts_integers_first() {
        let mut terms = vec![
            Term::string("a"),
            Term::constant("a"),
            Term::Int(10),
            Term::Int(2),
        ];
        terms.sort();
        assert_eq!(
            terms,
            vec![Term::Int(2), Term::Int(10), Term::constant("a"), Term::string("a")]
        );
    }
}
