//! Text to [`Program`] translation.
//!
//! DLV-style concrete syntax: `head :- body.` with `|` between head
//! literals, `-p(..)` for strong negation, `not` for negation as failure and
//! `&name[inputs](outputs)` for external atoms. `←` is accepted for `:-`,
//! and `∨` or a bare `v` for `|` between head literals. `%` starts a
//! comment running to the end of the line.

use std::fmt;

use thiserror::Error;

use crate::ast::{
    Atom, BodyElement, BodyPayload, Builtin, CompareOp, ExternalAtom, Literal, Program, Rule,
    Safety, Term,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Safety,
    Escape,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax",
            ParseErrorKind::Safety => "safety",
            ParseErrorKind::Escape => "escape",
        })
    }
}

/// Line and column are 1-based and count characters.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind} error: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    If,
    Bar,
    Minus,
    Plus,
    Amp,
    Cmp(CompareOp),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Var(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Str(_) => f.write_str("string constant"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::If => f.write_str("`:-`"),
            Tok::Bar => f.write_str("`|`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Cmp(op) => write!(f, "`{}`", op.symbol()),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            pos: Pos { line: 1, column: 1 },
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.column = 1;
        } else {
            self.pos.column += 1;
        }
        Some(c)
    }

    fn error(pos: Pos, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        ParseError {
            line: pos.line,
            column: pos.column,
            message: message.into(),
            kind,
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Pos)>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let start = self.pos;
            let Some(c) = self.bump() else {
                out.push((Tok::Eof, start));
                return Ok(out);
            };
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                '|' | '∨' => Tok::Bar,
                '←' => Tok::If,
                '+' => Tok::Plus,
                '&' => Tok::Amp,
                '-' => Tok::Minus,
                '=' => Tok::Cmp(CompareOp::Eq),
                ':' => {
                    if self.chars.peek() == Some(&'-') {
                        self.bump();
                        Tok::If
                    } else {
                        return Err(Self::error(start, ParseErrorKind::Syntax, "expected `:-`"));
                    }
                }
                '!' => {
                    if self.chars.peek() == Some(&'=') {
                        self.bump();
                        Tok::Cmp(CompareOp::Ne)
                    } else {
                        return Err(Self::error(start, ParseErrorKind::Syntax, "expected `!=`"));
                    }
                }
                '<' => {
                    if self.chars.peek() == Some(&'=') {
                        self.bump();
                        Tok::Cmp(CompareOp::Le)
                    } else {
                        Tok::Cmp(CompareOp::Lt)
                    }
                }
                '>' => {
                    if self.chars.peek() == Some(&'=') {
                        self.bump();
                        Tok::Cmp(CompareOp::Ge)
                    } else {
                        Tok::Cmp(CompareOp::Gt)
                    }
                }
                '"' => Tok::Str(self.string_body(start)?),
                c if c.is_ascii_digit() => {
                    let mut digits = String::from(c);
                    while let Some(&d) = self.chars.peek() {
                        if !d.is_ascii_digit() {
                            break;
                        }
                        digits.push(d);
                        self.bump();
                    }
                    let value = digits.parse().map_err(|_| {
                        Self::error(start, ParseErrorKind::Syntax, "integer constant out of range")
                    })?;
                    Tok::Int(value)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut word = String::from(c);
                    while let Some(&d) = self.chars.peek() {
                        if !(d.is_alphanumeric() || d == '_') {
                            break;
                        }
                        word.push(d);
                        self.bump();
                    }
                    if word == "_" {
                        return Err(Self::error(
                            start,
                            ParseErrorKind::Syntax,
                            "anonymous variables are not supported",
                        ));
                    }
                    if c.is_lowercase() {
                        Tok::Ident(word)
                    } else if c.is_uppercase() || c == '_' {
                        Tok::Var(word)
                    } else {
                        return Err(Self::error(
                            start,
                            ParseErrorKind::Syntax,
                            format!("identifier `{word}` must start with a letter or `_`"),
                        ));
                    }
                }
                other => {
                    return Err(Self::error(
                        start,
                        ParseErrorKind::Syntax,
                        format!("unexpected character `{other}`"),
                    ))
                }
            };
            out.push((tok, start));
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == '%' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn string_body(&mut self, start: Pos) -> Result<String, ParseError> {
        let mut text = String::new();
        loop {
            let at = self.pos;
            match self.bump() {
                None => {
                    return Err(Self::error(
                        start,
                        ParseErrorKind::Syntax,
                        "unterminated string constant",
                    ))
                }
                Some('"') => return Ok(text),
                Some('\\') => match self.bump() {
                    Some('"') => text.push('"'),
                    Some('\\') => text.push('\\'),
                    Some('n') => text.push('\n'),
                    Some('t') => text.push('\t'),
                    Some(other) => {
                        return Err(Self::error(
                            at,
                            ParseErrorKind::Escape,
                            format!("invalid escape sequence `\\{other}`"),
                        ))
                    }
                    None => {
                        return Err(Self::error(
                            start,
                            ParseErrorKind::Syntax,
                            "unterminated string constant",
                        ))
                    }
                },
                Some(c) => text.push(c),
            }
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> Tok {
        let tok = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        tok
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        Lexer::error(self.pos(), ParseErrorKind::Syntax, message)
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.syntax(format!("expected {expected}, found {}", self.peek()))
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut rules = Vec::new();
        while *self.peek() != Tok::Eof {
            let start = self.pos();
            let rule = self.rule()?;
            if let Safety::Unsafe(var) = rule.check_safety() {
                return Err(Lexer::error(
                    start,
                    ParseErrorKind::Safety,
                    format!("unsafe variable {var} in rule `{rule}`"),
                ));
            }
            rules.push(rule);
        }
        Ok(Program::new(rules))
    }

    fn rule(&mut self) -> Result<Rule, ParseError> {
        let mut head = Vec::new();
        if !matches!(self.peek(), Tok::If | Tok::Dot) {
            head.push(self.classical_literal()?);
            loop {
                match self.peek() {
                    Tok::Bar => {
                        self.next();
                    }
                    Tok::Ident(v) if v == "v" => {
                        self.next();
                    }
                    _ => break,
                }
                head.push(self.classical_literal()?);
            }
        }
        let mut body = Vec::new();
        let mut has_if = false;
        if *self.peek() == Tok::If {
            self.next();
            has_if = true;
            if *self.peek() != Tok::Dot {
                body.push(self.body_element()?);
                while *self.peek() == Tok::Comma {
                    self.next();
                    body.push(self.body_element()?);
                }
            }
        }
        if head.is_empty() && !has_if {
            return Err(self.unexpected("a rule"));
        }
        self.expect(Tok::Dot, "`.`")?;
        Ok(Rule { head, body })
    }

    fn classical_literal(&mut self) -> Result<Literal, ParseError> {
        let negated = if *self.peek() == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        let Tok::Ident(predicate) = self.peek().clone() else {
            return Err(self.unexpected("a predicate name"));
        };
        self.next();
        let args = if *self.peek() == Tok::LParen {
            self.next();
            let args = self.terms(Tok::RParen)?;
            self.expect(Tok::RParen, "`)`")?;
            args
        } else {
            Vec::new()
        };
        Ok(Literal {
            atom: Atom::new(predicate, args),
            negated,
        })
    }

    fn starts_element(tok: &Tok) -> bool {
        matches!(
            tok,
            Tok::Ident(_) | Tok::Var(_) | Tok::Int(_) | Tok::Str(_) | Tok::Minus | Tok::Amp
        )
    }

    fn body_element(&mut self) -> Result<BodyElement, ParseError> {
        let naf = matches!(self.peek(), Tok::Ident(w) if w == "not")
            && Self::starts_element(self.peek_at(1));
        if naf {
            self.next();
        }
        let payload = match self.peek() {
            Tok::Amp => BodyPayload::External(self.external_atom()?),
            Tok::Minus if matches!(self.peek_at(1), Tok::Ident(_)) => {
                BodyPayload::Literal(self.classical_literal()?)
            }
            Tok::Ident(_) => {
                let lit = self.classical_literal()?;
                if let Tok::Cmp(_) = self.peek() {
                    if lit.atom.args.is_empty() && !lit.negated {
                        BodyPayload::Builtin(self.builtin(Term::Const(lit.atom.predicate))?)
                    } else {
                        return Err(self.syntax("comparison operands must be terms"));
                    }
                } else {
                    BodyPayload::Literal(lit)
                }
            }
            Tok::Var(_) | Tok::Int(_) | Tok::Str(_) | Tok::Minus => {
                let lhs = self.term()?;
                BodyPayload::Builtin(self.builtin(lhs)?)
            }
            _ => return Err(self.unexpected("a body element")),
        };
        Ok(BodyElement { payload, naf })
    }

    fn builtin(&mut self, lhs: Term) -> Result<Builtin, ParseError> {
        let Tok::Cmp(op) = *self.peek() else {
            return Err(self.unexpected("a comparison operator"));
        };
        self.next();
        let rhs = self.term()?;
        let addend = if *self.peek() == Tok::Plus {
            if op != CompareOp::Eq {
                return Err(self.syntax("`+` is only allowed on the right of `=`"));
            }
            self.next();
            Some(self.term()?)
        } else {
            None
        };
        Ok(Builtin {
            op,
            lhs,
            rhs,
            addend,
        })
    }

    fn external_atom(&mut self) -> Result<ExternalAtom, ParseError> {
        self.expect(Tok::Amp, "`&`")?;
        let Tok::Ident(name) = self.peek().clone() else {
            return Err(self.unexpected("an external atom name"));
        };
        self.next();
        let inputs = if *self.peek() == Tok::LBracket {
            self.next();
            let inputs = self.terms(Tok::RBracket)?;
            self.expect(Tok::RBracket, "`]`")?;
            inputs
        } else {
            Vec::new()
        };
        self.expect(Tok::LParen, "`(`")?;
        let outputs = self.terms(Tok::RParen)?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(ExternalAtom {
            name,
            inputs,
            outputs,
        })
    }

    /// Comma-separated terms up to (not including) `close`; may be empty.
    fn terms(&mut self, close: Tok) -> Result<Vec<Term>, ParseError> {
        let mut terms = Vec::new();
        if *self.peek() == close {
            return Ok(terms);
        }
        terms.push(self.term()?);
        while *self.peek() == Tok::Comma {
            self.next();
            terms.push(self.term()?);
        }
        Ok(terms)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let term = match self.peek().clone() {
            Tok::Ident(s) => Term::Const(s),
            Tok::Var(s) => Term::Var(s),
            Tok::Int(v) => Term::Int(v),
            Tok::Str(s) => Term::Str(s),
            Tok::Minus => {
                self.next();
                let Tok::Int(v) = *self.peek() else {
                    return Err(self.unexpected("an integer after `-`"));
                };
                Term::Int(-v)
            }
            _ => return Err(self.unexpected("a term")),
        };
        self.next();
        Ok(term)
    }
}

/// Parses a complete program.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    Parser { toks, at: 0 }.program()
}

/// Parses the already-unescaped payload of a string constant. Error
/// positions refer to the payload itself.
pub fn parse_embedded(payload: &str) -> Result<Program, ParseError> {
    parse_program(payload)
}
