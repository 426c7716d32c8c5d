//! SMT-LIB v2 solver driver: one child process per query, script on stdin,
//! verdict and model on stdout.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::BmcError;

/// Environment variable naming the solver binary.
pub const SOLVER_ENV: &str = "CRN_SMT_SOLVER";
/// Optional environment variable with whitespace-separated solver arguments.
pub const SOLVER_ARGS_ENV: &str = "CRN_SMT_SOLVER_ARGS";

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// Integer assignment returned by `get-model`.
pub type Assignment = HashMap<String, i64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Sat(Assignment),
    Unsat,
    Unknown,
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Backend {
    program: PathBuf,
    args: Vec<String>,
}

/// One solver binary, or a portfolio of several that race on every query.
#[derive(Debug, Clone)]
pub struct SmtSolver {
    backends: Vec<Backend>,
    timeout: Duration,
}

impl SmtSolver {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        SmtSolver {
            backends: vec![Backend {
                program: program.into(),
                args,
            }],
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// Solver at `program` with the arguments its family needs to read a
    /// script from stdin.
    pub fn from_path(program: impl Into<PathBuf>) -> Self {
        let program = program.into();
        let stem = program
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_ascii_lowercase();
        let args: &[&str] = if stem.starts_with("z3") {
            &["-in", "-smt2"]
        } else if stem.starts_with("cvc5") || stem.starts_with("cvc4") {
            &["--lang=smt2", "--quiet"]
        } else if stem.starts_with("mathsat") {
            &["-input=smt2"]
        } else {
            &[]
        };
        Self::new(program, args.iter().map(|s| s.to_string()).collect())
    }

    /// Runs every member on each query and takes the first sat/unsat answer.
    /// Returns `None` for an empty list.
    pub fn portfolio(members: Vec<SmtSolver>) -> Option<Self> {
        let timeout = members.iter().map(|m| m.timeout).max()?;
        Some(SmtSolver {
            backends: members.into_iter().flat_map(|m| m.backends).collect(),
            timeout,
        })
    }

    /// Solver named by [`SOLVER_ENV`], else a portfolio of the known solvers
    /// found on `PATH`.
    pub fn discover() -> Option<Self> {
        if let Some(path) = std::env::var_os(SOLVER_ENV).filter(|p| !p.is_empty()) {
            let mut solver = Self::from_path(PathBuf::from(path));
            if let Ok(args) = std::env::var(SOLVER_ARGS_ENV) {
                solver.backends[0].args = args.split_whitespace().map(str::to_string).collect();
            }
            return Some(solver);
        }
        Self::portfolio(Self::discover_all())
    }

    /// Every known solver binary found on `PATH`, each on its own.
    pub fn discover_all() -> Vec<Self> {
        ["yices-smt2", "z3", "cvc5", "cvc4", "mathsat"]
            .iter()
            .filter_map(|name| find_on_path(name))
            .map(Self::from_path)
            .collect()
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Binary of the first member.
    pub fn program(&self) -> &Path {
        &self.backends[0].program
    }

    pub fn programs(&self) -> impl Iterator<Item = &Path> {
        self.backends.iter().map(|b| b.program.as_path())
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Short description, e.g. `yices-smt2+z3`.
    pub fn describe(&self) -> String {
        let names: Vec<String> = self
            .programs()
            .map(|p| {
                p.file_name().map_or_else(
                    || p.display().to_string(),
                    |n| n.to_string_lossy().into_owned(),
                )
            })
            .collect();
        names.join("+")
    }

    /// Runs a complete script ending in `(check-sat)` and `(get-model)`.
    pub fn check(&self, script: &str) -> Result<Verdict, BmcError> {
        let (tx, rx) = mpsc::channel();
        let mut children = Vec::with_capacity(self.backends.len());
        let mut launch_error = None;
        for b in &self.backends {
            match spawn(b, script, tx.clone()) {
                Ok(child) => children.push(child),
                Err(e) => launch_error = Some(e),
            }
        }
        drop(tx);
        if children.is_empty() {
            return Err(launch_error.unwrap_or(BmcError::SolverUnavailable));
        }

        let deadline = Instant::now() + self.timeout;
        let mut fallback: Option<Result<Verdict, BmcError>> = launch_error.map(Err);
        let mut pending = children.len();
        let outcome = loop {
            if pending == 0 {
                break fallback.expect("at least one member answered");
            }
            let left = deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(left) {
                Ok(out) => {
                    pending -= 1;
                    let verdict = out
                        .map_err(|e| BmcError::SolverOutput(e.to_string()))
                        .and_then(|o| parse_response(&o));
                    match verdict {
                        Ok(Verdict::Sat(_) | Verdict::Unsat) => break verdict,
                        // keep waiting; unknown beats an error as the final answer
                        _ if !matches!(fallback, Some(Ok(Verdict::Unknown))) => {
                            fallback = Some(verdict)
                        }
                        _ => {}
                    }
                }
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    break Err(BmcError::SolverTimeout {
                        seconds: self.timeout.as_secs_f64(),
                    })
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    break fallback.unwrap_or_else(|| {
                        Err(BmcError::SolverOutput("solver output lost".into()))
                    })
                }
            }
        };
        for mut child in children {
            let _ = child.kill();
            let _ = child.wait();
        }
        outcome
    }
}

/// Starts one member; its full stdout is sent on `tx` when it closes.
fn spawn(
    b: &Backend,
    script: &str,
    tx: mpsc::Sender<std::io::Result<String>>,
) -> Result<Child, BmcError> {
    let mut child = Command::new(&b.program)
        .args(&b.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| BmcError::SolverLaunch {
            program: b.program.display().to_string(),
            detail: e.to_string(),
        })?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = script.to_owned();
    thread::spawn(move || {
        // a solver that exits early closes the pipe; the verdict decides
        let _ = stdin.write_all(input.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    thread::spawn(move || {
        let mut out = String::new();
        let _ = tx.send(stdout.read_to_string(&mut out).map(|_| out));
    });
    Ok(child)
}

fn find_on_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(name))
        .find(|candidate| candidate.is_file())
}

/// Parses solver stdout: a verdict line, then for `sat` the model.
pub fn parse_response(out: &str) -> Result<Verdict, BmcError> {
    let mut lines = out.lines().map(str::trim).filter(|l| !l.is_empty());
    let verdict = lines
        .next()
        .ok_or_else(|| BmcError::SolverOutput("empty solver output".into()))?;
    match verdict {
        "sat" => {
            let rest: Vec<&str> = lines.collect();
            Ok(Verdict::Sat(parse_model(&rest.join("\n"))?))
        }
        "unsat" => Ok(Verdict::Unsat),
        "unknown" => Ok(Verdict::Unknown),
        other => Err(BmcError::SolverOutput(format!(
            "unexpected verdict line `{other}`"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Result<Vec<String>, BmcError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' | ')' => {
                tokens.push(c.to_string());
                chars.next();
            }
            ';' => while chars.next_if(|&c| c != '\n').is_some() {},
            '|' => {
                chars.next();
                let mut sym = String::new();
                loop {
                    match chars.next() {
                        Some('|') => break,
                        Some(c) => sym.push(c),
                        None => return Err(BmcError::SolverOutput("unterminated |symbol|".into())),
                    }
                }
                tokens.push(sym);
            }
            '"' => {
                chars.next();
                let mut s = String::from("\"");
                loop {
                    match chars.next() {
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            s.push('"');
                        }
                        Some('"') => break,
                        Some(c) => s.push(c),
                        None => return Err(BmcError::SolverOutput("unterminated string".into())),
                    }
                }
                tokens.push(s);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut atom = String::new();
                while let Some(c) = chars.next_if(|&c| !c.is_whitespace() && c != '(' && c != ')') {
                    atom.push(c);
                }
                tokens.push(atom);
            }
        }
    }
    Ok(tokens)
}

fn parse_sexps(tokens: &[String]) -> Result<Vec<Sexp>, BmcError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack.pop().filter(|_| !stack.is_empty()).ok_or_else(|| {
                    BmcError::SolverOutput("unbalanced parentheses in model".into())
                })?;
                stack
                    .last_mut()
                    .expect("outer frame")
                    .push(Sexp::List(done));
            }
            _ => stack.last_mut().expect("frame").push(Sexp::Atom(t.clone())),
        }
    }
    if stack.len() != 1 {
        return Err(BmcError::SolverOutput(
            "unbalanced parentheses in model".into(),
        ));
    }
    Ok(stack.pop().expect("top frame"))
}

fn int_value(e: &Sexp) -> Option<i64> {
    match e {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(items) => match &items[..] {
            [Sexp::Atom(minus), inner] if minus == "-" => int_value(inner).map(|v| -v),
            _ => None,
        },
    }
}

fn collect(e: &Sexp, out: &mut Assignment) {
    let Sexp::List(items) = e else { return };
    match &items[..] {
        // (define-fun x () Int v)
        [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(params), Sexp::Atom(sort), value]
            if kw == "define-fun" && params.is_empty() && sort == "Int" =>
        {
            if let Some(v) = int_value(value) {
                out.insert(name.clone(), v);
            }
        }
        // (= x v), as printed by yices
        [Sexp::Atom(eq), Sexp::Atom(name), value] if eq == "=" => {
            if let Some(v) = int_value(value) {
                out.insert(name.clone(), v);
            }
        }
        _ => items.iter().for_each(|child| collect(child, out)),
    }
}

/// Extracts integer constants from a `get-model` response.
pub fn parse_model(text: &str) -> Result<Assignment, BmcError> {
    let sexps = parse_sexps(&tokenize(text)?)?;
    let mut out = Assignment::new();
    for e in &sexps {
        collect(e, &mut out);
    }
    Ok(out)
}
