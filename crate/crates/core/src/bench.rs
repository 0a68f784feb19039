//! Benchmark harness: run every program in a suite several times and check
//! its assertions.
//!
//! A suite directory holds `<name>.njr` programs, each beside a
//! `<name>.asserts.json` file and optionally `<name>.agent.json` (script),
//! `<name>.trace.jsonl` (recorded trace) and `<name>.stdin` (input lines).
//! Pass rate is the fraction of assertions that hold, per run.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::{execute, AgentKind, RunConfig, StdinSource};
use crate::error::RunError;
use crate::host::{Cell, Heap, Value};
use crate::nfi::{serialize, WireValue};
use crate::run::RunResult;
use crate::trace::CacheStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Assertion {
    StdoutContains {
        text: String,
    },
    StdoutNotContains {
        text: String,
    },
    FinalValueEquals {
        value: WireValue,
    },
    /// A variable in the global frame at the end of the run.
    FinalVarEquals {
        var: String,
        value: WireValue,
    },
    /// A value reached from the final value by list indices and record keys.
    HeapPathEquals {
        path: Vec<String>,
        value: WireValue,
    },
}

/// Wire form of a value with lists and records expanded. Plain reference
/// cells and cycles stay as references.
pub fn deep_wire(v: &Value, heap: &Heap) -> WireValue {
    fn go(v: &Value, heap: &Heap, seen: &mut HashSet<u64>) -> WireValue {
        let Value::Addr(a) = v else {
            return serialize(v);
        };
        let Ok(cell) = heap.get(*a) else {
            return serialize(v);
        };
        if !seen.insert(a.0) {
            return serialize(v);
        }
        let out = match cell {
            Cell::Value(_) => serialize(v),
            Cell::List(items) => WireValue::List(items.iter().map(|i| go(i, heap, seen)).collect()),
            Cell::Record(fields) => WireValue::Record(
                fields
                    .iter()
                    .map(|(k, x)| (k.clone(), go(x, heap, seen)))
                    .collect(),
            ),
        };
        seen.remove(&a.0);
        out
    }
    go(v, heap, &mut HashSet::new())
}

impl Assertion {
    pub fn check(&self, result: &RunResult) -> bool {
        let heap = &result.state.heap;
        match self {
            Assertion::StdoutContains { text } => result.stdout.contains(text.as_str()),
            Assertion::StdoutNotContains { text } => !result.stdout.contains(text.as_str()),
            Assertion::FinalValueEquals { value } => {
                result.value().is_some_and(|v| &deep_wire(v, heap) == value)
            }
            Assertion::FinalVarEquals { var, value } => result
                .state
                .env
                .global()
                .and_then(|g| g.get(var))
                .is_some_and(|v| &deep_wire(v, heap) == value),
            Assertion::HeapPathEquals { path, value } => result
                .value()
                .map(|v| deep_wire(v, heap))
                .and_then(|w| w.at_path(path).cloned())
                .is_some_and(|w| &w == value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub pass_rate: f64,
    pub wall_time_s: f64,
    pub effects: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramRow {
    pub name: String,
    pub assertions: usize,
    pub runs: Vec<RunRow>,
    pub pass_rate_mean: f64,
    pub pass_rate_std: f64,
    pub time_mean_s: f64,
    pub time_min_s: f64,
    pub time_max_s: f64,
    pub effects_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub pass_rate_mean: f64,
    pub pass_rate_min: f64,
    pub pass_rate_max: f64,
    pub time_mean_s: f64,
    pub time_min_s: f64,
    pub time_max_s: f64,
    pub effects_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    /// How pass rates are counted; always "per-assertion".
    pub granularity: String,
    pub repeats: usize,
    pub programs: Vec<ProgramRow>,
    pub aggregate: Aggregate,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Population standard deviation.
fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    mean(&xs.iter().map(|x| (x - m).powi(2)).collect::<Vec<_>>()).sqrt()
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

impl ProgramRow {
    pub fn from_runs(name: String, assertions: usize, runs: Vec<RunRow>) -> Self {
        let rates: Vec<f64> = runs.iter().map(|r| r.pass_rate).collect();
        let times: Vec<f64> = runs.iter().map(|r| r.wall_time_s).collect();
        let effects: Vec<f64> = runs.iter().map(|r| r.effects as f64).collect();
        let (lo, hi) = if times.is_empty() {
            (0.0, 0.0)
        } else {
            min_max(&times)
        };
        ProgramRow {
            name,
            assertions,
            pass_rate_mean: mean(&rates),
            pass_rate_std: std_dev(&rates),
            time_mean_s: mean(&times),
            time_min_s: lo,
            time_max_s: hi,
            effects_mean: mean(&effects),
            runs,
        }
    }
}

impl Aggregate {
    pub fn from_rows(rows: &[ProgramRow]) -> Self {
        let rates: Vec<f64> = rows.iter().map(|r| r.pass_rate_mean).collect();
        let (rlo, rhi) = if rows.is_empty() {
            (0.0, 0.0)
        } else {
            min_max(&rates)
        };
        let (tlo, thi) = if rows.is_empty() {
            (0.0, 0.0)
        } else {
            (
                rows.iter()
                    .map(|r| r.time_min_s)
                    .fold(f64::INFINITY, f64::min),
                rows.iter()
                    .map(|r| r.time_max_s)
                    .fold(f64::NEG_INFINITY, f64::max),
            )
        };
        Aggregate {
            pass_rate_mean: mean(&rates),
            pass_rate_min: rlo,
            pass_rate_max: rhi,
            time_mean_s: mean(&rows.iter().map(|r| r.time_mean_s).collect::<Vec<_>>()),
            time_min_s: tlo,
            time_max_s: thi,
            effects_mean: mean(&rows.iter().map(|r| r.effects_mean).collect::<Vec<_>>()),
        }
    }
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "pass rate = fraction of passing assertions per run; {} repeat(s)\n",
            self.repeats
        );
        out.push_str(&format!(
            "{:<24} {:>6} {:>16} {:>10} {:>10} {:>10} {:>9}\n",
            "program", "asserts", "pass rate", "time (s)", "min (s)", "max (s)", "effects"
        ));
        for r in &self.programs {
            out.push_str(&format!(
                "{:<24} {:>6} {:>9.3} ± {:<4.3} {:>10.4} {:>10.4} {:>10.4} {:>9.1}\n",
                r.name,
                r.assertions,
                r.pass_rate_mean,
                r.pass_rate_std,
                r.time_mean_s,
                r.time_min_s,
                r.time_max_s,
                r.effects_mean
            ));
        }
        let a = &self.aggregate;
        out.push_str(&format!(
            "{:<24} {:>6} {:>9.3} [{:.3}, {:.3}] {:>10.4} {:>10.4} {:>10.4} {:>9.1}\n",
            "ALL",
            "",
            a.pass_rate_mean,
            a.pass_rate_min,
            a.pass_rate_max,
            a.time_mean_s,
            a.time_min_s,
            a.time_max_s,
            a.effects_mean
        ));
        out
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub base: RunConfig,
    pub repeats: usize,
    pub parallel: usize,
}

/// One program of a suite with its sidecar files.
#[derive(Debug, Clone)]
pub struct SuiteProgram {
    pub name: String,
    pub program: PathBuf,
    pub asserts: PathBuf,
    pub script: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub stdin: Option<PathBuf>,
}

pub fn discover(suite_dir: &Path) -> Result<Vec<SuiteProgram>, RunError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(suite_dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("njr") {
            continue;
        }
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let side = |ext: &str| {
            let p = suite_dir.join(format!("{name}.{ext}"));
            p.exists().then_some(p)
        };
        out.push(SuiteProgram {
            asserts: suite_dir.join(format!("{name}.asserts.json")),
            script: side("agent.json"),
            trace: side("trace.jsonl"),
            stdin: side("stdin"),
            program: path,
            name,
        });
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

fn run_once(
    p: &SuiteProgram,
    asserts: &[Assertion],
    base: &RunConfig,
    store: Option<&CacheStore>,
) -> RunRow {
    let mut cfg = base.clone();
    cfg.live_output = false;
    cfg.trace_out = None;
    cfg.script = p.script.clone();
    if cfg.agent == AgentKind::Replay {
        cfg.trace = p.trace.clone();
    }
    cfg.stdin = p
        .stdin
        .clone()
        .map_or(StdinSource::Empty, StdinSource::File);
    match execute(&cfg, &p.program, store) {
        Err(e) => RunRow {
            pass_rate: 0.0,
            wall_time_s: 0.0,
            effects: 0,
            error: Some(format!("{}: {e}", e.class().name())),
        },
        Ok(exec) => {
            let r = &exec.result;
            let passed = asserts.iter().filter(|a| a.check(r)).count();
            let error = r
                .outcome
                .as_ref()
                .err()
                .map(|f| format!("{}: {f}", f.class().name()));
            RunRow {
                pass_rate: if error.is_some() || asserts.is_empty() {
                    if error.is_some() {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    passed as f64 / asserts.len() as f64
                },
                wall_time_s: r.wall_time.as_secs_f64(),
                effects: r.effects,
                error,
            }
        }
    }
}

fn load_asserts(path: &Path) -> Result<Vec<Assertion>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Runs a suite. Per-program failures become 0-pass rows; only an
/// unreadable suite directory or cache store aborts.
pub fn run_suite(suite_dir: &Path, config: &BenchConfig) -> Result<BenchReport, RunError> {
    let programs = discover(suite_dir)?;
    let store = if config.base.cache {
        Some(config.base.cache_store()?)
    } else {
        None
    };
    let repeats = config.repeats.max(1);
    let asserts: Vec<Result<Vec<Assertion>, String>> =
        programs.iter().map(|p| load_asserts(&p.asserts)).collect();
    let jobs: Vec<(usize, usize)> = (0..programs.len())
        .flat_map(|i| (0..repeats).map(move |r| (i, r)))
        .collect();
    let results: Mutex<Vec<Option<RunRow>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let work = || loop {
        let j = next.fetch_add(1, Ordering::SeqCst);
        let Some(&(i, _)) = jobs.get(j) else { break };
        let row = match &asserts[i] {
            Err(e) => RunRow {
                pass_rate: 0.0,
                wall_time_s: 0.0,
                effects: 0,
                error: Some(format!("assertions: {e}")),
            },
            Ok(a) => run_once(&programs[i], a, &config.base, store.as_ref()),
        };
        results.lock().expect("results lock")[j] = Some(row);
    };
    let threads = config.parallel.max(1);
    if threads == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(work);
            }
        });
    }
    let mut rows = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every job ran"));
    let programs: Vec<ProgramRow> = programs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let runs: Vec<RunRow> = rows.by_ref().take(repeats).collect();
            let n = asserts[i].as_ref().map_or(0, Vec::len);
            ProgramRow::from_runs(p.name.clone(), n, runs)
        })
        .collect();
    Ok(BenchReport {
        granularity: "per-assertion".into(),
        repeats,
        aggregate: Aggregate::from_rows(&programs),
        programs,
    })
}
