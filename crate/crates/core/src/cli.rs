//! Batch front end: evaluate a program file and print its answer sets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;

use serde_json::{json, Value};

use crate::ast::{Literal, Term};
use crate::engine::{Session, SessionConfig, DEFAULT_MAX_DEPTH};
use crate::error::Error;
use crate::solver::AnswerSet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    /// `{lit1, lit2, ...}` per answer set, facts included.
    #[default]
    Default,
    /// Like `Default` but without the program's own facts.
    Facts,
    /// One JSON object per answer set.
    JsonLines,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub program_path: PathBuf,
    pub max_depth: usize,
    /// 0 prints all answer sets.
    pub max_answer_sets: usize,
    pub filter_predicates: Option<BTreeSet<String>>,
    pub trace_calls: bool,
    pub format: Format,
    pub parallel: bool,
}

impl RunConfig {
    pub fn new(program_path: impl Into<PathBuf>) -> Self {
        RunConfig {
            program_path: program_path.into(),
            max_depth: DEFAULT_MAX_DEPTH,
            max_answer_sets: 0,
            filter_predicates: None,
            trace_calls: false,
            format: Format::Default,
            parallel: false,
        }
    }
}

pub const EXIT_SATISFIABLE: u8 = 0;
pub const EXIT_UNSATISFIABLE: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

fn term_json(t: &Term) -> Value {
    match t {
        Term::Int(v) => json!(v),
        other => json!(other.to_string()),
    }
}

fn json_line(literals: &[&Literal]) -> String {
    let mut by_pred: BTreeMap<&str, Vec<Value>> = BTreeMap::new();
    for l in literals {
        let args: Vec<Value> = l.atom.args.iter().map(term_json).collect();
        by_pred
            .entry(l.predicate())
            .or_default()
            .push(json!({ "args": args, "sign": i32::from(l.negated) }));
    }
    serde_json::to_string(&by_pred).expect("JSON values serialize")
}

fn render(set: &AnswerSet, hidden: &BTreeSet<Literal>, config: &RunConfig) -> String {
    let shown: Vec<&Literal> = set
        .canonical_literals()
        .into_iter()
        .filter(|l| !hidden.contains(*l))
        .filter(|l| {
            config
                .filter_predicates
                .as_ref()
                .is_none_or(|f| f.contains(l.predicate()))
        })
        .collect();
    match config.format {
        Format::JsonLines => json_line(&shown),
        Format::Default | Format::Facts => {
            let parts: Vec<String> = shown.iter().map(|l| l.to_string()).collect();
            format!("{{{}}}", parts.join(", "))
        }
    }
}

fn describe(error: &Error, config: &RunConfig) -> String {
    match error {
        Error::Parse(e) => format!("{}:{e}", config.program_path.display()),
        other => format!("{}: {other}", config.program_path.display()),
    }
}

/// Runs one evaluation, writing answer sets to `out` and diagnostics to
/// `diag`. Returns 0 if there is an answer set, 1 if there is none and 2 on
/// error.
pub fn run(config: &RunConfig, out: &mut dyn Write, diag: &mut dyn Write) -> u8 {
    let session = Session::new(SessionConfig {
        max_depth: config.max_depth,
        parallel: config.parallel,
        ..SessionConfig::default()
    });
    let result = session.evaluate_file(&config.program_path);
    if config.trace_calls {
        for record in session.trace() {
            let _ = writeln!(diag, "{record}");
        }
    }
    let (program, sets) = match result {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(diag, "{}", describe(&e, config));
            return EXIT_ERROR;
        }
    };
    let hidden = match config.format {
        Format::Facts => program.facts(),
        _ => BTreeSet::new(),
    };
    let limit = match config.max_answer_sets {
        0 => sets.len(),
        n => n.min(sets.len()),
    };
    for set in &sets[..limit] {
        if writeln!(out, "{}", render(set, &hidden, config)).is_err() {
            return EXIT_ERROR;
        }
    }
    if sets.is_empty() {
        EXIT_UNSATISFIABLE
    } else {
        EXIT_SATISFIABLE
    }
}
