//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the solver: reducts, model checks and stable
//! model enumeration are reimplemented from the definitions so that they can
//! serve as a reference.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nestasp::ast::{Atom, Literal, Term};
use nestasp::engine::Frame;
use nestasp::grounder::is_aux;
use nestasp::solver::{answer_sets, AnswerSet, GroundProgram, GroundRule};
use nestasp::{Program, Session};
use rand::Rng;

pub type LitSet = BTreeSet<Literal>;

pub fn programs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("programs")
}

pub fn lit(text: &str) -> Literal {
    let (negated, rest) = match text.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, text),
    };
    let (name, args) = match rest.split_once('(') {
        Some((n, a)) => (
            n,
            a.trim_end_matches(')')
                .split(',')
                .map(|s| match s.trim().parse::<i64>() {
                    Ok(v) => Term::Int(v),
                    Err(_) => Term::constant(s.trim()),
                })
                .collect(),
        ),
        None => (rest, Vec::new()),
    };
    let atom = Atom::new(name, args);
    if negated {
        Literal::negative(atom)
    } else {
        Literal::positive(atom)
    }
}

fn body_true(r: &GroundRule, i: &LitSet) -> bool {
    r.pos.iter().all(|l| i.contains(l)) && r.neg.iter().all(|l| !i.contains(l))
}

fn satisfied(r: &GroundRule, i: &LitSet) -> bool {
    !body_true(r, i) || r.head.iter().any(|l| i.contains(l))
}

/// Positive program obtained by deleting rules blocked by `i` and dropping
/// the remaining `not` literals.
pub fn gl_reduct(g: &GroundProgram, i: &LitSet) -> Vec<GroundRule> {
    g.rules
        .iter()
        .filter(|r| r.neg.iter().all(|l| !i.contains(l)))
        .map(|r| GroundRule {
            head: r.head.clone(),
            pos: r.pos.clone(),
            neg: Vec::new(),
        })
        .collect()
}

pub fn models(rules: &[GroundRule], i: &LitSet) -> bool {
    rules.iter().all(|r| satisfied(r, i))
}

pub fn consistent(i: &LitSet) -> bool {
    !i.iter().any(|l| i.contains(&l.complement()))
}

fn subsets(items: &[Literal]) -> impl Iterator<Item = LitSet> + '_ {
    assert!(items.len() <= 20, "subset enumeration over {} atoms", items.len());
    (0u32..(1 << items.len())).map(move |mask| {
        items
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, l)| l.clone())
            .collect()
    })
}

/// Least model of a program without disjunction or `not`.
fn least_model(rules: &[GroundRule]) -> LitSet {
    let mut m = LitSet::new();
    loop {
        let before = m.len();
        for r in rules {
            if r.pos.iter().all(|l| m.contains(l)) {
                m.extend(r.head.iter().cloned());
            }
        }
        if m.len() == before {
            return m;
        }
    }
}

/// True when no proper subset of `i` is a model of `rules`.
pub fn minimal_model(rules: &[GroundRule], i: &LitSet) -> bool {
    if rules.iter().all(|r| r.head.len() <= 1) {
        return least_model(rules) == *i;
    }
    let items: Vec<Literal> = i.iter().cloned().collect();
    let minimal = subsets(&items).all(|s| s.len() == i.len() || !models(rules, &s));
    minimal
}

/// Stable models by enumerating every subset of the program's literals.
pub fn naive_answer_sets(g: &GroundProgram) -> BTreeSet<LitSet> {
    let atoms: Vec<Literal> = g
        .rules
        .iter()
        .flat_map(|r| r.head.iter().chain(&r.pos).chain(&r.neg))
        .cloned()
        .collect::<LitSet>()
        .into_iter()
        .collect();
    subsets(&atoms)
        .filter(|s| {
            if !consistent(s) {
                return false;
            }
            let red = gl_reduct(g, s);
            models(&red, s) && minimal_model(&red, s)
        })
        .collect()
}

/// Checks that each set is a consistent, minimal model of its reduct and
/// that no set contains another.
pub fn assert_stable(g: &GroundProgram, sets: &[LitSet]) {
    for s in sets {
        assert!(consistent(s), "inconsistent answer set {s:?}");
        let red = gl_reduct(g, s);
        assert!(models(&red, s), "answer set {s:?} is not a model of its reduct");
        assert!(
            minimal_model(&red, s),
            "answer set {s:?} is not a minimal model of its reduct"
        );
    }
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            assert!(!a.is_subset(b) && !b.is_subset(a), "{a:?} and {b:?} are comparable");
        }
    }
}

pub fn assert_stable_sets(g: &GroundProgram, sets: &[AnswerSet]) {
    let plain: Vec<LitSet> = sets.iter().map(|s| s.literals.clone()).collect();
    assert_stable(g, &plain);
}

/// Checks the stable-model properties of a host program's answer sets
/// against its ground instantiation: every answer set must be an answer set
/// of one of the branch programs once replacement atoms are restored, and
/// the answer sets must form an antichain.
pub fn assert_host_stable(program: &Program, sets: &[AnswerSet]) {
    assert_host_stable_in(program, None, sets)
}

/// As [`assert_host_stable`], resolving subprogram files against `base_dir`.
pub fn assert_host_stable_in(program: &Program, base_dir: Option<&Path>, sets: &[AnswerSet]) {
    let frame = Frame {
        base_dir: base_dir.map(Path::to_path_buf),
        ..Frame::default()
    };
    let branches = Session::default()
        .ground_in(program, frame)
        .expect("host program grounds");
    let mut found = Vec::new();
    for g in &branches {
        let full = answer_sets(g).expect("branch program solves");
        let full: Vec<LitSet> = full.into_iter().map(|s| s.literals).collect();
        assert_stable(g, &full);
        found.extend(full);
    }
    for s in sets {
        assert!(
            found
                .iter()
                .any(|f| f.iter().filter(|l| !is_aux(l)).cloned().collect::<LitSet>() == s.literals),
            "{s} is not an answer set of any branch"
        );
    }
    let plain: Vec<LitSet> = sets.iter().map(|s| s.literals.clone()).collect();
    for (i, a) in plain.iter().enumerate() {
        assert!(consistent(a));
        for b in &plain[i + 1..] {
            assert!(!a.is_subset(b) && !b.is_subset(a), "{a:?} and {b:?} are comparable");
        }
    }
}

/// Random ground program over atoms `a0..a{atoms-1}` with strong negation,
/// `not`, constraints and heads of up to two literals.
pub fn random_ground_program(rng: &mut impl Rng, atoms: usize, rules: usize) -> GroundProgram {
    let pick = |rng: &mut dyn rand::RngCore| {
        let name = format!("a{}", rng.gen_range(0..atoms));
        let atom = Atom::new(name, Vec::new());
        if rng.gen_bool(0.2) {
            Literal::negative(atom)
        } else {
            Literal::positive(atom)
        }
    };
    let mut out = Vec::new();
    for _ in 0..rules {
        let head_len = match rng.gen_range(0..10) {
            0 => 0,
            1..=6 => 1,
            _ => 2,
        };
        let body_len = rng.gen_range(0..=3);
        let mut rule = GroundRule {
            head: (0..head_len).map(|_| pick(rng)).collect(),
            pos: Vec::new(),
            neg: Vec::new(),
        };
        for _ in 0..body_len {
            let l = pick(rng);
            if rng.gen_bool(0.4) {
                rule.neg.push(l);
            } else {
                rule.pos.push(l);
            }
        }
        out.push(rule.normalized());
    }
    GroundProgram::new(out)
}

/// Text form of a ground program that the parser reads back to the same
/// rules.
pub fn ground_program_text(g: &GroundProgram) -> String {
    g.rules.iter().map(|r| format!("{r}\n")).collect()
}

/// Evaluates a program file and checks the stable-model properties of the
/// result.
pub fn evaluate_checked(session: &Session, path: &Path) -> nestasp::Result<Vec<AnswerSet>> {
    let (program, sets) = session.evaluate_file(path)?;
    assert_host_stable_in(&program, path.parent(), &sets);
    Ok(sets)
}

/// Stable models by subset enumeration over the non-fact literals only.
/// Facts belong to every model of the reduct, so fixing them true loses no
/// answer set and keeps the search space small for fact-heavy programs.
pub fn naive_answer_sets_with_facts(g: &GroundProgram) -> BTreeSet<LitSet> {
    let facts: LitSet = g
        .rules
        .iter()
        .filter(|r| r.head.len() == 1 && r.pos.is_empty() && r.neg.is_empty())
        .map(|r| r.head[0].clone())
        .collect();
    let open: Vec<Literal> = g
        .rules
        .iter()
        .flat_map(|r| r.head.iter().chain(&r.pos).chain(&r.neg))
        .filter(|l| !facts.contains(*l))
        .cloned()
        .collect::<LitSet>()
        .into_iter()
        .collect();
    subsets(&open)
        .map(|s| &s | &facts)
        .filter(|s| {
            if !consistent(s) {
                return false;
            }
            let red = gl_reduct(g, s);
            models(&red, s) && minimal_model(&red, s)
        })
        .collect()
}

/// `a{k}` atoms of a random ground program renamed to `v(k)`.
pub fn with_valued_atoms(text: &str, atoms: usize) -> String {
    let mut out = text.to_string();
    for k in (0..atoms).rev() {
        out = out.replace(&format!("a{k}"), &format!("v({k})"));
    }
    out
}
