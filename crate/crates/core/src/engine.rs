//! Evaluation sessions.
//!
//! A [`Session`] owns everything shared by one top-level evaluation and all
//! the subprograms it calls: the oracle registry, the answer cache, the
//! oracle memo table and the files read so far. Programs are evaluated
//! stratum by stratum. Each stratum is grounded and solved once per answer
//! set of the strata below it, so a stratum with several answer sets splits
//! the evaluation into branches and the final result is their union.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::ast::{Literal, Program, Rule, Term};
use crate::error::{Error, Result};
use crate::external::{InputView, OracleEnv, Tuple};
use crate::grounder::{restrict_to_stratum, stratify, AuxNames, StratumGrounder};
use crate::nested::{AnswerCache, ProgramKey, SourceKind};
use crate::parser::{parse_embedded, parse_program};
use crate::solver::{answer_sets_with, AnswerSet, GroundProgram, GroundRule, SolverConfig};

pub const DEFAULT_MAX_DEPTH: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionConfig {
    /// Deepest allowed subprogram nesting; the top-level program is depth 0.
    pub max_depth: usize,
    pub solver: SolverConfig,
    /// Solve sibling branches on the rayon pool. Grounding, and with it
    /// handle allocation, stays sequential.
    pub parallel: bool,
    pub memoize: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            max_depth: DEFAULT_MAX_DEPTH,
            solver: SolverConfig::default(),
            parallel: false,
            memoize: true,
        }
    }
}

/// Where an evaluation sits in the call tree.
#[derive(Clone, Debug, Default)]
pub struct Frame {
    pub depth: usize,
    /// Directory that relative subprogram paths are resolved against first.
    pub base_dir: Option<PathBuf>,
    /// Keys of the subprograms currently being evaluated above this frame.
    pub stack: Vec<ProgramKey>,
}

/// What an oracle gets to see besides its inputs.
pub struct OracleContext<'a> {
    session: &'a Session,
    frame: Frame,
}

impl<'a> OracleContext<'a> {
    pub fn session(&self) -> &'a Session {
        self.session
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// Evaluates `name`, going through the session memo table.
    pub fn evaluate(&self, name: &str, view: &InputView, inputs: &[Term]) -> Result<BTreeSet<Tuple>> {
        let session = self.session;
        if !session.config.memoize {
            return session.env.evaluate(self, name, view, inputs);
        }
        let key = MemoKey {
            name: name.to_string(),
            inputs: inputs.to_vec(),
            view: view.clone(),
            base_dir: self.frame.base_dir.clone(),
        };
        if let Some(hit) = session.memo.lock().expect("memo lock").get(&key) {
            return Ok(hit.clone());
        }
        let result = session.env.evaluate(self, name, view, inputs)?;
        session
            .memo
            .lock()
            .expect("memo lock")
            .insert(key, result.clone());
        Ok(result)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct MemoKey {
    name: String,
    inputs: Vec<Term>,
    view: InputView,
    base_dir: Option<PathBuf>,
}

/// One subprogram evaluation, as reported by `--trace-calls`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallRecord {
    pub kind: SourceKind,
    pub identity: String,
    pub handle: usize,
    pub depth: usize,
}

impl fmt::Display for CallRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let identity = match self.kind {
            SourceKind::Embedded => crate::ast::quote(&self.identity),
            SourceKind::File => self.identity.clone(),
        };
        write!(
            f,
            "call kind={} handle={} depth={} identity={identity}",
            self.kind, self.handle, self.depth
        )
    }
}

pub struct Session {
    env: Arc<OracleEnv>,
    config: SessionConfig,
    cache: AnswerCache,
    memo: Mutex<HashMap<MemoKey, BTreeSet<Tuple>>>,
    files: Mutex<HashMap<PathBuf, Arc<Program>>>,
    trace: Mutex<Vec<CallRecord>>,
    evaluations: AtomicUsize,
}

impl Default for Session {
    fn default() -> Self {
        Session::new(SessionConfig::default())
    }
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("config", &self.config)
            .field("entries", &self.cache.len())
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Default)]
struct Branch {
    literals: BTreeSet<Literal>,
    rules: Vec<GroundRule>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Self {
        Session::with_env(OracleEnv::standard(), config)
    }

    pub fn with_env(env: OracleEnv, config: SessionConfig) -> Self {
        Session {
            env: Arc::new(env),
            config,
            cache: AnswerCache::default(),
            memo: Mutex::default(),
            files: Mutex::default(),
            trace: Mutex::default(),
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn env(&self) -> &OracleEnv {
        &self.env
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn cache(&self) -> &AnswerCache {
        &self.cache
    }

    /// Number of subprograms evaluated (cache misses) so far.
    pub fn evaluation_count(&self) -> usize {
        self.evaluations.load(Ordering::SeqCst)
    }

    pub fn trace(&self) -> Vec<CallRecord> {
        self.trace.lock().expect("trace lock").clone()
    }

    /// Forgets all cached results; the next call gets program handle 0.
    pub fn reset(&self) {
        self.cache.reset();
        self.memo.lock().expect("memo lock").clear();
        self.files.lock().expect("files lock").clear();
        self.trace.lock().expect("trace lock").clear();
        self.evaluations.store(0, Ordering::SeqCst);
    }

    pub fn root_context(&self) -> OracleContext<'_> {
        self.context(Frame::default())
    }

    pub fn context(&self, frame: Frame) -> OracleContext<'_> {
        OracleContext {
            session: self,
            frame,
        }
    }

    /// Answer sets of a top-level program, resolving subprogram files
    /// against the working directory.
    pub fn evaluate(&self, program: &Program) -> Result<Vec<AnswerSet>> {
        self.evaluate_in(program, Frame::default())
    }

    /// Parses and evaluates a program file; subprogram paths are resolved
    /// against the file's directory first.
    pub fn evaluate_file(&self, path: &Path) -> Result<(Program, Vec<AnswerSet>)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let program = parse_program(&text)?;
        let frame = Frame {
            base_dir: path.parent().map(Path::to_path_buf),
            ..Frame::default()
        };
        let sets = self.evaluate_in(&program, frame)?;
        Ok((program, sets))
    }

    pub fn evaluate_in(&self, program: &Program, frame: Frame) -> Result<Vec<AnswerSet>> {
        let branches = self.run(program, &frame, true)?;
        Ok(AnswerSet::canonical_list(
            branches.into_iter().map(|b| b.literals),
        ))
    }

    /// Ground programs of `program`, one per answer set of the strata that
    /// precede its top stratum. Lower strata with several answer sets
    /// contribute the chosen answer set as facts, so solving each returned
    /// program yields exactly the answer sets of that branch.
    pub fn ground(&self, program: &Program) -> Result<Vec<GroundProgram>> {
        self.ground_in(program, Frame::default())
    }

    pub fn ground_in(&self, program: &Program, frame: Frame) -> Result<Vec<GroundProgram>> {
        let branches = self.run(program, &frame, false)?;
        let unique: BTreeSet<Vec<GroundRule>> = branches
            .into_iter()
            .map(|b| {
                let mut rules = b.rules;
                rules.sort();
                rules.dedup();
                rules
            })
            .collect();
        Ok(unique.into_iter().map(GroundProgram::new).collect())
    }

    fn run(&self, program: &Program, frame: &Frame, solve_last: bool) -> Result<Vec<Branch>> {
        let strata = stratify(program, &self.env)?;
        let aux = AuxNames::new(program);
        let cx = self.context(frame.clone());
        let mut branches = vec![Branch::default()];
        for (si, stratum) in strata.iter().enumerate() {
            let mut grounded = Vec::with_capacity(branches.len());
            for branch in branches {
                let instances =
                    StratumGrounder::new(program, stratum, &branch.literals, &cx, &aux).ground()?;
                grounded.push((branch, instances));
            }
            if si + 1 == strata.len() && !solve_last {
                return Ok(grounded
                    .into_iter()
                    .map(|(mut b, inst)| {
                        b.rules.extend(inst);
                        b
                    })
                    .collect());
            }
            let solve = |(branch, instances): &(Branch, BTreeSet<GroundRule>)| {
                let local = restrict_to_stratum(instances, stratum, &branch.literals);
                answer_sets_with(&local, self.config.solver)
            };
            let solved: Vec<Result<Vec<AnswerSet>>> = if self.config.parallel {
                grounded.par_iter().map(solve).collect()
            } else {
                grounded.iter().map(solve).collect()
            };
            let mut next = Vec::new();
            for ((branch, instances), models) in grounded.into_iter().zip(solved) {
                let models = models?;
                let split = models.len() > 1;
                for model in models {
                    let mut b = branch.clone();
                    b.rules.extend(instances.iter().cloned());
                    if split {
                        b.rules
                            .extend(model.literals.iter().cloned().map(GroundRule::fact));
                    }
                    b.literals.extend(model.literals);
                    next.push(b);
                }
            }
            branches = next;
            if branches.is_empty() {
                break;
            }
        }
        Ok(branches)
    }

    fn load_file(&self, path: &Path) -> Result<Arc<Program>> {
        if let Some(p) = self.files.lock().expect("files lock").get(path) {
            return Ok(p.clone());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let program = parse_program(&text).map_err(|error| Error::SubprogramParse {
            origin: path.display().to_string(),
            error,
        })?;
        let program = Arc::new(program);
        self.files
            .lock()
            .expect("files lock")
            .entry(path.to_path_buf())
            .or_insert(program.clone());
        Ok(program)
    }

    fn resolve(&self, name: &str, base_dir: Option<&Path>) -> Result<PathBuf> {
        let candidates = base_dir
            .map(|d| d.join(name))
            .into_iter()
            .chain(std::iter::once(PathBuf::from(name)));
        for candidate in candidates {
            if candidate.is_file() {
                return candidate.canonicalize().map_err(|e| Error::Io {
                    path: candidate.clone(),
                    message: e.to_string(),
                });
            }
        }
        Err(Error::FileNotFound(name.to_string()))
    }

    /// Evaluates a subprogram (or finds it in the cache) and returns its
    /// program handle. `view` holds the facts to inject.
    pub fn call(
        &self,
        cx: &OracleContext<'_>,
        kind: SourceKind,
        source: &str,
        view: &InputView,
    ) -> Result<usize> {
        let (program, identity, base_dir) = match kind {
            SourceKind::Embedded => {
                let program = parse_embedded(source).map_err(|error| Error::SubprogramParse {
                    origin: "<embedded>".into(),
                    error,
                })?;
                let identity = program.canonical_text();
                (Arc::new(program), identity, cx.frame.base_dir.clone())
            }
            SourceKind::File => {
                let path = self.resolve(source, cx.frame.base_dir.as_deref())?;
                let program = self.load_file(&path)?;
                let dir = path.parent().map(Path::to_path_buf);
                (program, path.display().to_string(), dir)
            }
        };
        let injected: Vec<Literal> = view.literals().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let key = ProgramKey {
            kind,
            identity,
            injected,
        };
        if cx.frame.stack.contains(&key) {
            return Err(Error::RecursiveCall {
                identity: key.identity.clone(),
            });
        }
        let depth = cx.frame.depth + 1;
        self.cache.get_or_evaluate(key.clone(), || {
            if depth > self.config.max_depth {
                return Err(Error::DepthExceeded {
                    max_depth: self.config.max_depth,
                });
            }
            let mut full = (*program).clone();
            full.rules
                .extend(key.injected.iter().cloned().map(Rule::fact));
            let mut stack = cx.frame.stack.clone();
            stack.push(key.clone());
            let frame = Frame {
                depth,
                base_dir,
                stack,
            };
            let sets = self.evaluate_in(&full, frame)?;
            self.evaluations.fetch_add(1, Ordering::SeqCst);
            Ok(sets)
        })
        .inspect(|&handle| {
            let mut trace = self.trace.lock().expect("trace lock");
            if trace.iter().all(|r| r.handle != handle) {
                trace.push(CallRecord {
                    kind,
                    identity: key.identity.clone(),
                    handle,
                    depth,
                });
            }
        })
    }
}
