//! Strict JSON model configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "s0": 100.0,
//!   "lambda": 1.0,
//!   "kernel": {"type": "exponential", "alpha": 0.5, "beta": 1.0},
//!   "marks": {"P": [[0.5, 0.5], [0.5, 0.5]], "a": [0.01, -0.01]}
//! }
//! ```
//!
//! Exactly one of `lambda` (fixed background) or
//! `regimes: {"A": [[...]], "lambdas": [...]}` is required. Optional keys:
//! `nonlinearity` (`{"type": "identity" | "saturating" | "scaled_soft", ...,
//! "lip"?}`), `max_events`, `truncate_power_law`, and `rate_estimation`
//! (`{"horizon", "burn_in"?, "paths", "seed"}`). Unknown keys are errors, and
//! every problem found is reported with its key path.

use serde_json::{json, Map, Value};

use crate::chains::{MarkChainSpec, RegimeSpec};
use crate::error::{LabError, Result};
use crate::hawkes::{Background, HawkesSpec, Nonlinearity, NonlinearitySpec, DEFAULT_MAX_EVENTS};
use crate::kernels::Kernel;
use crate::price::PriceModelSpec;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimationConfig {
    pub horizon: f64,
    pub burn_in: Option<f64>,
    pub paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub s0: f64,
    pub hawkes: HawkesSpec,
    pub marks: Option<MarkChainSpec>,
    pub rate_estimation: Option<RateEstimationConfig>,
}

impl RunConfig {
    /// The price model; fails when no mark chain is configured.
    pub fn model(&self) -> Result<PriceModelSpec> {
        let marks = self
            .marks
            .clone()
            .ok_or_else(|| LabError::Schema(vec!["marks: required for price models".into()]))?;
        PriceModelSpec::new(self.s0, self.hawkes.clone(), marks)
    }
}

struct Walker {
    errors: Vec<String>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Walker {
    fn err(&mut self, path: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{path}: {msg}"));
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str, allowed: &[&str]) -> Option<&'v Map<String, Value>> {
        match v.as_object() {
            Some(m) => {
                for k in m.keys() {
                    if !allowed.contains(&k.as_str()) {
                        self.err(&join(path, k), "unknown key");
                    }
                }
                Some(m)
            }
            None => {
                self.err(if path.is_empty() { "<root>" } else { path }, "expected an object");
                None
            }
        }
    }

    fn number(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let p = join(path, key);
        match m.get(key) {
            None => {
                self.err(&p, "missing");
                None
            }
            Some(v) => self.as_number(v, &p),
        }
    }

    fn as_number(&mut self, v: &Value, p: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.err(p, "expected a finite number");
                None
            }
        }
    }

    fn positive(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let x = self.number(m, path, key)?;
        if x > 0.0 {
            Some(x)
        } else {
            self.err(&join(path, key), format!("must be > 0, got {x}"));
            None
        }
    }

    fn non_negative(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        let x = self.number(m, path, key)?;
        if x >= 0.0 {
            Some(x)
        } else {
            self.err(&join(path, key), format!("must be >= 0, got {x}"));
            None
        }
    }

    fn unsigned(&mut self, m: &Map<String, Value>, path: &str, key: &str) -> Option<u64> {
        let p = join(path, key);
        match m.get(key).map(Value::as_u64) {
            None => {
                self.err(&p, "missing");
                None
            }
            Some(None) => {
                self.err(&p, "expected a non-negative integer");
                None
            }
            Some(Some(u)) => Some(u),
        }
    }

    fn vector(&mut self, v: Option<&Value>, p: &str) -> Option<Vec<f64>> {
        let Some(v) = v else {
            self.err(p, "missing");
            return None;
        };
        let Some(arr) = v.as_array() else {
            self.err(p, "expected an array of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(arr.len());
        let mut ok = true;
        for (i, x) in arr.iter().enumerate() {
            match self.as_number(x, &format!("{p}[{i}]")) {
                Some(x) => out.push(x),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn matrix(&mut self, v: Option<&Value>, p: &str) -> Option<Vec<Vec<f64>>> {
        let Some(v) = v else {
            self.err(p, "missing");
            return None;
        };
        let Some(rows) = v.as_array() else {
            self.err(p, "expected an array of rows");
            return None;
        };
        let mut out = Vec::with_capacity(rows.len());
        let mut ok = true;
        for (i, r) in rows.iter().enumerate() {
            match self.vector(Some(r), &format!("{p}[{i}]")) {
                Some(r) => out.push(r),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn kernel(&mut self, v: &Value, path: &str) -> Option<Kernel> {
        let kind = v.get("type").and_then(Value::as_str);
        let (allowed, kernel): (&[&str], _) = match kind {
            Some("exponential") => (&["type", "alpha", "beta"], 0),
            Some("power_law") => (&["type", "k", "c", "p"], 1),
            Some("zero") => (&["type"], 2),
            _ => {
                self.err(&join(path, "type"), "expected \"exponential\", \"power_law\" or \"zero\"");
                return None;
            }
        };
        let m = self.object(v, path, allowed)?;
        match kernel {
            0 => {
                let alpha = self.non_negative(m, path, "alpha");
                let beta = self.positive(m, path, "beta");
                Some(Kernel::Exponential { alpha: alpha?, beta: beta? })
            }
            1 => {
                let k = self.non_negative(m, path, "k");
                let c = self.positive(m, path, "c");
                let p = self.positive(m, path, "p");
                Some(Kernel::PowerLaw { k: k?, c: c?, p: p? })
            }
            _ => Some(Kernel::Zero),
        }
    }

    fn nonlinearity(&mut self, v: &Value, path: &str) -> Option<NonlinearitySpec> {
        let kind = v.get("type").and_then(Value::as_str);
        let (allowed, tag): (&[&str], _) = match kind {
            Some("identity") => (&["type", "lip"], 0),
            Some("saturating") => (&["type", "cap", "lip"], 1),
            Some("scaled_soft") => (&["type", "cap", "slope", "lip"], 2),
            _ => {
                self.err(&join(path, "type"), "expected \"identity\", \"saturating\" or \"scaled_soft\"");
                return None;
            }
        };
        let m = self.object(v, path, allowed)?;
        let kind = match tag {
            0 => Nonlinearity::Identity,
            1 => Nonlinearity::Saturating { cap: self.positive(m, path, "cap")? },
            _ => {
                let cap = self.positive(m, path, "cap");
                let slope = self.positive(m, path, "slope");
                Nonlinearity::ScaledSoft { cap: cap?, slope: slope? }
            }
        };
        let lip = if m.contains_key("lip") { Some(self.positive(m, path, "lip")?) } else { None };
        match NonlinearitySpec::new(kind, lip) {
            Ok(h) => Some(h),
            Err(e) => {
                self.err(path, e);
                None
            }
        }
    }
}

const ROOT_KEYS: &[&str] = &[
    "schema_version",
    "s0",
    "lambda",
    "regimes",
    "kernel",
    "nonlinearity",
    "marks",
    "max_events",
    "truncate_power_law",
    "rate_estimation",
];

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Value = serde_json::from_str(text).map_err(|e| LabError::Schema(vec![format!("<root>: invalid JSON: {e}")]))?;
    let mut w = Walker { errors: Vec::new() };
    let cfg = parse_root(&mut w, &root);
    match (cfg, w.errors.is_empty()) {
        (Some(cfg), true) => Ok(cfg),
        _ => Err(LabError::Schema(w.errors)),
    }
}

fn parse_root(w: &mut Walker, root: &Value) -> Option<RunConfig> {
    let m = w.object(root, "", ROOT_KEYS)?;
    if let Some(v) = m.get("schema_version") {
        if v.as_u64() != Some(SCHEMA_VERSION) {
            w.err("schema_version", format!("unsupported, expected {SCHEMA_VERSION}"));
        }
    }
    let s0 = if m.contains_key("s0") { w.number(m, "", "s0") } else { Some(0.0) };

    let background = match (m.get("lambda"), m.get("regimes")) {
        (Some(_), Some(_)) => {
            w.err("lambda", "give either lambda or regimes, not both");
            None
        }
        (None, None) => {
            w.err("lambda", "missing (or give regimes)");
            None
        }
        (Some(_), None) => w.positive(m, "", "lambda").map(Background::Fixed),
        (None, Some(r)) => {
            let rm = w.object(r, "regimes", &["A", "lambdas"]);
            rm.and_then(|rm| {
                let a = w.matrix(rm.get("A"), "regimes.A");
                let l = w.vector(rm.get("lambdas"), "regimes.lambdas");
                let spec = RegimeSpec { generator: a?, lambdas: l? };
                match spec.validate() {
                    Ok(()) => Some(Background::RegimeSwitched(spec)),
                    Err(e) => {
                        w.err("regimes", e);
                        None
                    }
                }
            })
        }
    };

    let kernel = match m.get("kernel") {
        Some(k) => w.kernel(k, "kernel"),
        None => {
            w.err("kernel", "missing");
            None
        }
    };
    let nonlinearity = match m.get("nonlinearity") {
        None | Some(Value::Null) => Some(None),
        Some(v) => w.nonlinearity(v, "nonlinearity").map(Some),
    };
    let max_events = if m.contains_key("max_events") {
        w.unsigned(m, "", "max_events").and_then(|v| {
            if v == 0 {
                w.err("max_events", "must be positive");
                None
            } else {
                Some(v as usize)
            }
        })
    } else {
        Some(DEFAULT_MAX_EVENTS)
    };
    let truncate = match m.get("truncate_power_law") {
        None => Some(false),
        Some(Value::Bool(b)) => Some(*b),
        Some(_) => {
            w.err("truncate_power_law", "expected a boolean");
            None
        }
    };

    let marks = match m.get("marks") {
        None => Some(None),
        Some(v) => w.object(v, "marks", &["P", "a"]).and_then(|mm| {
            let p = w.matrix(mm.get("P"), "marks.P");
            let a = w.vector(mm.get("a"), "marks.a");
            let spec = MarkChainSpec { transition: p?, marks: a? };
            match spec.validate() {
                Ok(()) => Some(Some(spec)),
                Err(e) => {
                    w.err("marks", e);
                    None
                }
            }
        }),
    };

    let rate_estimation = match m.get("rate_estimation") {
        None => Some(None),
        Some(v) => w.object(v, "rate_estimation", &["horizon", "burn_in", "paths", "seed"]).and_then(|rm| {
            let p = "rate_estimation";
            let horizon = w.positive(rm, p, "horizon");
            let burn_in = if rm.contains_key("burn_in") { w.non_negative(rm, p, "burn_in").map(Some) } else { Some(None) };
            let paths = w.unsigned(rm, p, "paths");
            let seed = w.unsigned(rm, p, "seed");
            let (horizon, burn_in, paths, seed) = (horizon?, burn_in?, paths?, seed?);
            if burn_in.is_some_and(|b| b >= horizon) {
                w.err("rate_estimation.burn_in", "must be below horizon");
                return None;
            }
            if paths < 2 {
                w.err("rate_estimation.paths", "must be at least 2");
                return None;
            }
            Some(Some(RateEstimationConfig { horizon, burn_in, paths: paths as usize, seed }))
        }),
    };

    let hawkes = HawkesSpec {
        background: background?,
        kernel: kernel?,
        nonlinearity: nonlinearity?,
        max_events: max_events?,
        truncate_power_law: truncate?,
    };
    Some(RunConfig { s0: s0?, hawkes, marks: marks?, rate_estimation: rate_estimation? })
}

fn kernel_json(k: &Kernel) -> Value {
    match *k {
        Kernel::Exponential { alpha, beta } => json!({"type": "exponential", "alpha": alpha, "beta": beta}),
        Kernel::PowerLaw { k, c, p } => json!({"type": "power_law", "k": k, "c": c, "p": p}),
        Kernel::Zero => json!({"type": "zero"}),
    }
}

/// JSON document that [`parse_config`] maps back to `cfg`.
pub fn config_to_json(cfg: &RunConfig) -> Value {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("s0".into(), json!(cfg.s0));
    match &cfg.hawkes.background {
        Background::Fixed(l) => {
            m.insert("lambda".into(), json!(l));
        }
        Background::RegimeSwitched(r) => {
            m.insert("regimes".into(), json!({"A": r.generator, "lambdas": r.lambdas}));
        }
    }
    m.insert("kernel".into(), kernel_json(&cfg.hawkes.kernel));
    if let Some(h) = &cfg.hawkes.nonlinearity {
        let mut v = serde_json::to_value(h.kind).expect("plain enum");
        v.as_object_mut().expect("tagged").insert("lip".into(), json!(h.lip));
        m.insert("nonlinearity".into(), v);
    }
    if let Some(marks) = &cfg.marks {
        m.insert("marks".into(), json!({"P": marks.transition, "a": marks.marks}));
    }
    m.insert("max_events".into(), json!(cfg.hawkes.max_events));
    m.insert("truncate_power_law".into(), json!(cfg.hawkes.truncate_power_law));
    if let Some(r) = &cfg.rate_estimation {
        let mut rm = Map::new();
        rm.insert("horizon".into(), json!(r.horizon));
        if let Some(b) = r.burn_in {
            rm.insert("burn_in".into(), json!(b));
        }
        rm.insert("paths".into(), json!(r.paths));
        rm.insert("seed".into(), json!(r.seed));
        m.insert("rate_estimation".into(), Value::Object(rm));
    }
    Value::Object(m)
}

pub fn write_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(&config_to_json(cfg)).expect("serializable") + "\n"
}
