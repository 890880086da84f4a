//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance`. Exits non-zero if any criterion
//! fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use common::{
    assert_host_stable_in, assert_stable_sets, lit, naive_answer_sets,
    naive_answer_sets_with_facts, programs_dir, random_ground_program, with_valued_atoms, LitSet,
};
use nestasp::ast::{quote, Term};
use nestasp::cli::{run, Format, RunConfig};
use nestasp::solver::answer_sets;
use nestasp::{parse_program, AnswerSet, Error, Session};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of answer sets checked for the stable-model properties.
static CHECKED: AtomicUsize = AtomicUsize::new(0);

const REPEATS: usize = 5;
const SOLVER_CORPUS: usize = 250;
const SOLVER_BUDGET: Duration = Duration::from_secs(60);
const AGGREGATE_CASES: usize = 20;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

/// Evaluates a file, checking every answer set against the ground program.
fn evaluate(session: &Session, path: &Path) -> nestasp::Result<Vec<AnswerSet>> {
    let (program, sets) = session.evaluate_file(path)?;
    assert_host_stable_in(&program, path.parent(), &sets);
    CHECKED.fetch_add(sets.len(), Ordering::SeqCst);
    Ok(sets)
}

/// Stdout of the batch front end.
fn cli_output(path: &Path, format: Format, parallel: bool) -> (u8, String) {
    let config = RunConfig {
        format,
        parallel,
        ..RunConfig::new(path)
    };
    let mut out = Vec::new();
    let mut diag = Vec::new();
    let status = run(&config, &mut out, &mut diag);
    (status, String::from_utf8(out).expect("utf-8 output"))
}

fn golden(path: &Path, format: Format, expected: &str) -> Outcome {
    evaluate(&Session::default(), path).map_err(|e| e.to_string())?;
    let (status, out) = cli_output(path, format, false);
    ensure(status == 0, || format!("exit status {status}"))?;
    ensure(out == expected, || format!("got {out:?}, want {expected:?}"))?;
    Ok(format!("{} byte-exact", expected.trim_end()))
}

fn criterion_1() -> Outcome {
    golden(
        &programs_dir().join("example2.hex"),
        Format::Facts,
        "{handle(0)}\n",
    )
}

fn criterion_2() -> Outcome {
    let session = Session::default();
    let sets = evaluate(&session, &programs_dir().join("example3.hex")).map_err(|e| e.to_string())?;
    ensure(sets.len() == 1, || format!("{} answer sets", sets.len()))?;
    let value = |pred: &str| -> Vec<Term> {
        sets[0]
            .literals
            .iter()
            .filter(|l| l.predicate() == pred)
            .map(|l| l.atom.args[0].clone())
            .collect()
    };
    let (h1, h2, h3) = (value("h1"), value("h2"), value("h3"));
    ensure(h1.len() == 1 && h2.len() == 1 && h3.len() == 1, || {
        format!("{}", sets[0])
    })?;
    ensure(h1 == h2 && h1 != h3, || format!("{}", sets[0]))?;
    let both: BTreeSet<Term> = [h1[0].clone(), h3[0].clone()].into();
    ensure(both == [Term::Int(0), Term::Int(1)].into(), || format!("{}", sets[0]))?;
    ensure(sets[0].literals.len() == 3, || format!("{}", sets[0]))?;
    let count = session.evaluation_count();
    ensure(count == 2, || format!("{count} subprogram evaluations"))?;
    Ok(format!("{}; 2 evaluations for 3 call atoms", sets[0]))
}

fn criterion_3() -> Outcome {
    golden(
        &programs_dir().join("example4.hex"),
        Format::Default,
        "{ash(0,0), ash(0,1)}\n",
    )
}

/// Shortest s-t paths through `k` middle nodes, one answer set per path.
fn paths_program(k: usize) -> String {
    let mut text = String::new();
    for i in 1..=k {
        text += &format!("edge(s,m{i}). edge(m{i},t).\n");
    }
    text += "use(M) :- edge(s,M), edge(M,t), not other(M).\n";
    text += "other(M) :- edge(s,M), edge(M,t), use(N), M != N.\n";
    text += "path(s,M,t) :- use(M).\n";
    text
}

fn criterion_4() -> Outcome {
    let host = std::fs::read_to_string(programs_dir().join("example5.hex")).unwrap();
    let mut details = Vec::new();
    // The shipped paths.hex has three middle nodes.
    let shipped = std::fs::read_to_string(programs_dir().join("paths.hex")).unwrap();
    ensure(shipped.contains("edge(s,m3)") && !shipped.contains("m4"), || {
        "programs/paths.hex is not the three-path graph".into()
    })?;
    for k in [1, 3, 5] {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("paths.hex"), paths_program(k)).unwrap();
        std::fs::write(dir.path().join("host.hex"), &host).unwrap();

        let sub = parse_program(&paths_program(k)).unwrap();
        let ground = Session::default().ground(&sub).map_err(|e| e.to_string())?;
        ensure(ground.len() == 1, || "paths program is not single-branch".into())?;
        let naive = naive_answer_sets_with_facts(&ground[0]);
        ensure(naive.len() == k, || format!("naive count {} for k={k}", naive.len()))?;
        let solved: BTreeSet<LitSet> = Session::default()
            .evaluate(&sub)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|s| s.literals)
            .collect();
        ensure(solved == naive, || format!("solver disagrees with naive for k={k}"))?;

        let sets = evaluate(&Session::default(), &dir.path().join("host.hex"))
            .map_err(|e| e.to_string())?;
        ensure(sets.len() == 1, || format!("{} host answer sets", sets.len()))?;
        let numbers: Vec<String> = sets[0]
            .literals
            .iter()
            .filter(|l| l.predicate() == "number")
            .map(|l| l.to_string())
            .collect();
        ensure(numbers == [format!("number({k})")], || format!("{}", sets[0]))?;
        details.push(format!("number({k})"));
    }
    Ok(format!("{} for 1/3/5 paths, counts confirmed by enumeration", details.join(", ")))
}

fn criterion_5() -> Outcome {
    let path = programs_dir().join("example6.hex");
    let sets = evaluate(&Session::default(), &path).map_err(|e| e.to_string())?;
    let listed: LitSet = ["h(0,0)", "node(a)", "node(b)", "node(c)", "edge(b,a)", "edge(a,c)"]
        .map(lit)
        .into();
    ensure(sets.len() == 1 && sets[0].literals == listed, || {
        format!("{sets:?}")
    })?;
    golden(
        &path,
        Format::Default,
        "{edge(a,c), edge(b,a), h(0,0), node(a), node(b), node(c)}\n",
    )
}

fn criterion_6() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_9700);
    let mut total_sets = 0;
    for case in 0..SOLVER_CORPUS {
        let (atoms, rules) = (rng.gen_range(1..=10), rng.gen_range(1..=12));
        let g = random_ground_program(&mut rng, atoms, rules);
        let sets = answer_sets(&g).map_err(|e| e.to_string())?;
        assert_stable_sets(&g, &sets);
        CHECKED.fetch_add(sets.len(), Ordering::SeqCst);
        total_sets += sets.len();
        let got: BTreeSet<LitSet> = sets.into_iter().map(|s| s.literals).collect();
        ensure(got == naive_answer_sets(&g), || {
            format!("case {case}:\n{}", common::ground_program_text(&g))
        })?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < SOLVER_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{SOLVER_CORPUS} programs, {total_sets} answer sets, exact set-of-sets match in {:.1}s (budget 60s)",
        elapsed.as_secs_f64()
    ))
}

fn criterion_7() -> Outcome {
    let n = CHECKED.load(Ordering::SeqCst);
    ensure(n > 0, || "no answer sets were checked".into())?;
    Ok(format!(
        "{n} answer sets checked inline for consistency, reduct model, minimality, antichain"
    ))
}

fn chain(k: usize) -> String {
    let mut inner = "leaf.".to_string();
    for _ in 0..k {
        inner = format!("r(H) :- &callhex[{}](H).", quote(&inner));
    }
    inner
}

fn criterion_8() -> Outcome {
    for k in [3, 16] {
        let session = Session::default();
        let sets = session
            .evaluate(&parse_program(&chain(k)).unwrap())
            .map_err(|e| format!("k={k}: {e}"))?;
        ensure(sets.len() == 1 && session.evaluation_count() == k, || {
            format!("k={k}: {sets:?}")
        })?;
    }
    match Session::default().evaluate(&parse_program(&chain(17)).unwrap()) {
        Err(Error::DepthExceeded { max_depth: 16 }) => {}
        other => return Err(format!("k=17: {other:?}")),
    }
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("self.hex");
    std::fs::write(&file, r#"r(H) :- &callhexfile["self.hex"](H)."#).unwrap();
    match Session::default().evaluate_file(&file) {
        Err(Error::RecursiveCall { .. }) => {}
        other => return Err(format!("self-call: {other:?}")),
    }
    Ok("k=3 and k=16 succeed, k=17 depth-exceeded, self-calling file rejected".into())
}

/// Host program computing count, max, min, brave and cautious over the
/// subprogram's answer sets.
fn aggregate_host(sub: &str) -> String {
    format!(
        r#"sub(H) :- &callhex[{}](H).
as(A) :- sub(H), &answersets[H](A).
count(0) :- not as(0).
count(D) :- as(C), D = C + 1, not as(D).
val(X) :- sub(H), &answersets[H](A), &arguments[H, A, v](I, 0, X), &arguments[H, A, v](I, s, 0).
in(A, X) :- sub(H), &answersets[H](A), &arguments[H, A, v](I, 0, X), &arguments[H, A, v](I, s, 0).
smaller(X) :- val(X), val(Y), X < Y.
larger(X) :- val(X), val(Y), Y < X.
max(X) :- val(X), not smaller(X).
min(X) :- val(X), not larger(X).
brave(X) :- val(X).
missing(X) :- val(X), as(A), not in(A, X).
cautious(X) :- val(X), not missing(X).
"#,
        quote(sub)
    )
}

fn ints(set: &AnswerSet, pred: &str) -> BTreeSet<i64> {
    set.literals
        .iter()
        .filter(|l| l.predicate() == pred)
        .map(|l| match l.atom.args[0] {
            Term::Int(v) => v,
            ref other => panic!("{other}"),
        })
        .collect()
}

/// Random subprograms over `v(0)..v(5)`: one to three choices (disjunctions
/// or even loops) plus random rules, so answer-set counts vary.
fn aggregate_programs() -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa66_4e6a7e);
    (0..AGGREGATE_CASES)
        .map(|_| {
            let atoms = rng.gen_range(2..=6);
            let mut text = String::new();
            for _ in 0..rng.gen_range(1..=3) {
                let (i, j) = (rng.gen_range(0..atoms), rng.gen_range(0..atoms));
                text += &if rng.gen_bool(0.5) {
                    format!("v({i}) v v({j}).\n")
                } else {
                    format!("v({i}) :- not v({j}).\nv({j}) :- not v({i}).\n")
                };
            }
            let rules = rng.gen_range(1..=5);
            let g = random_ground_program(&mut rng, atoms, rules);
            text + &with_valued_atoms(&common::ground_program_text(&g), atoms)
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let mut shapes = BTreeSet::new();
    for (case, sub) in aggregate_programs().iter().enumerate() {
        let direct: Vec<LitSet> = Session::default()
            .evaluate(&parse_program(sub).unwrap())
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|s| s.literals)
            .collect();
        let values = |s: &LitSet| -> BTreeSet<i64> {
            s.iter()
                .filter(|l| l.predicate() == "v" && !l.negated)
                .map(|l| match l.atom.args[0] {
                    Term::Int(v) => v,
                    _ => unreachable!(),
                })
                .collect()
        };
        let per_set: Vec<BTreeSet<i64>> = direct.iter().map(values).collect();
        let union: BTreeSet<i64> = per_set.iter().flatten().copied().collect();
        // The intersection over no answer sets is taken to be empty.
        let intersection: BTreeSet<i64> = match per_set.split_first() {
            Some((first, rest)) => rest.iter().fold(first.clone(), |acc, s| &acc & s),
            None => BTreeSet::new(),
        };

        let host = parse_program(&aggregate_host(sub)).unwrap();
        let sets = Session::default().evaluate(&host).map_err(|e| e.to_string())?;
        assert_host_stable_in(&host, None, &sets);
        CHECKED.fetch_add(sets.len(), Ordering::SeqCst);
        ensure(sets.len() == 1, || format!("case {case}: {} host answer sets", sets.len()))?;
        let h = &sets[0];
        let expect = [
            ("count", BTreeSet::from([direct.len() as i64])),
            ("max", union.last().copied().into_iter().collect()),
            ("min", union.first().copied().into_iter().collect()),
            ("brave", union.clone()),
            ("cautious", intersection.clone()),
        ];
        for (pred, want) in expect {
            let got = ints(h, pred);
            ensure(got == want, || {
                format!("case {case} {pred}: host {got:?}, direct {want:?}\n{sub}")
            })?;
        }
        shapes.insert(direct.len());
    }
    ensure(shapes.len() > 2, || format!("corpus too uniform: {shapes:?}"))?;
    Ok(format!(
        "{AGGREGATE_CASES} subprograms with {:?} answer sets: count/max/min/brave/cautious agree",
        shapes
    ))
}

fn goldens() -> Vec<(PathBuf, Format)> {
    let p = programs_dir();
    vec![
        (p.join("example2.hex"), Format::Facts),
        (p.join("example3.hex"), Format::Default),
        (p.join("example4.hex"), Format::Default),
        (p.join("example5.hex"), Format::Default),
        (p.join("example6.hex"), Format::Default),
        (p.join("preds.hex"), Format::Default),
        (p.join("brave.hex"), Format::Default),
        (p.join("cautious.hex"), Format::Default),
    ]
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cases = goldens();
    for (i, sub) in aggregate_programs().iter().enumerate() {
        let file = dir.path().join(format!("aggregate{i}.hex"));
        std::fs::write(&file, aggregate_host(sub)).unwrap();
        cases.push((file, Format::JsonLines));
    }
    for (path, format) in &cases {
        let reference = cli_output(path, *format, false);
        for parallel in [false, true] {
            for _ in 0..REPEATS {
                let again = cli_output(path, *format, parallel);
                ensure(again == reference, || {
                    format!("{} differs (parallel={parallel})", path.display())
                })?;
            }
        }
    }
    Ok(format!(
        "{} programs byte-identical over {REPEATS} runs each, parallel on and off",
        cases.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Example 2 handle golden", criterion_1),
        ("Example 3 single evaluation", criterion_2),
        ("Example 4 answer-set handles golden", criterion_3),
        ("Example 5 counting", criterion_4),
        ("Example 6 edge reversal golden", criterion_5),
        ("solver vs naive enumeration", criterion_6),
        ("stable-model properties", criterion_7),
        ("nesting depth", criterion_8),
        ("aggregate and quantifier emulation", criterion_9),
        ("determinism", criterion_10),
    ];
    // Criterion 7 reports on the answer sets checked by all the others.
    let order = [0, 1, 2, 3, 4, 5, 7, 8, 9, 6];
    let mut results: Vec<Option<Outcome>> = vec![None; criteria.len()];
    panic::set_hook(Box::new(|_| {}));
    for i in order {
        let outcome = panic::catch_unwind(AssertUnwindSafe(criteria[i].1)).unwrap_or_else(|e| {
            let message = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(message)
        });
        results[i] = Some(outcome);
    }
    let _ = panic::take_hook();
    let mut failed = 0;
    for (i, ((name, _), outcome)) in criteria.iter().zip(results).enumerate() {
        match outcome.expect("every criterion ran") {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
