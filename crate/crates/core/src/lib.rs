//! Nested answer-set programming.
//!
//! Evaluates HEX-lite programs (disjunctive logic programs with strong
//! negation, negation as failure and external atoms) under the answer-set
//! semantics. Programs can call subprograms, given inline as string
//! constants or stored in files, through `&callhex` and `&callhexfile`, pass
//! them input facts, and inspect each of the callee's answer sets through
//! the handle-valued atoms `&answersets`, `&predicates` and `&arguments`.
//!
//! ```
//! use nestasp::{parse_program, Session};
//!
//! let host = parse_program(r#"ash(P, A) :- &callhex["a v b."](P), &answersets[P](A)."#).unwrap();
//! let sets = Session::default().evaluate(&host).unwrap();
//! assert_eq!(sets.len(), 1);
//! assert_eq!(sets[0].to_string(), "{ash(0,0), ash(0,1)}");
//! ```

pub mod ast;
pub mod cli;
pub mod engine;
pub mod error;
pub mod external;
pub mod grounder;
pub mod nested;
pub mod parser;
pub mod solver;

pub use ast::{Atom, BodyElement, ExternalAtom, Literal, Program, Rule, Term};
pub use engine::{Session, SessionConfig};
pub use error::{Error, Result};
pub use external::{InputView, Oracle, OracleEnv};
pub use parser::{parse_embedded, parse_program, ParseError};
pub use solver::{answer_sets, AnswerSet, GroundProgram, GroundRule, Interpretation};
