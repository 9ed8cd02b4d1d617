//! JSON scenario documents.
//!
//! Numbers may be given literally or as `"$name"` references into the
//! `params` table. Complex matrices are arrays of rows whose entries are
//! `[re, im]` pairs or plain reals.

use ncw_core::balance::Variant;
use ncw_core::channel::UcpMap;
use ncw_core::cost::CostSpec;
use ncw_core::linalg::{CMatrix, C64};
use ncw_core::qstate::FaithfulState;
use ncw_core::solver::SolverOptions;
use ncw_core::systems::{self, CompositeSystem, DynamicsFamily, GenSystem, TwoQubitModel};
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

pub const SCHEMA_VERSION: u64 = 1;

/// A validation failure located at a JSON path.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ScenarioError {}

pub type Parsed<T> = Result<T, ScenarioError>;

fn err<T>(path: &str, message: impl fmt::Display) -> Parsed<T> {
    Err(ScenarioError {
        path: path.to_string(),
        message: message.to_string(),
    })
}

fn at(path: &str, key: &str) -> String {
    format!("{path}.{key}")
}

fn idx(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

/// One sweep axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: String,
    pub values: Vec<f64>,
}

/// A parsed scenario document. Systems are built on demand so that sweeps
/// can substitute parameters.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub params: BTreeMap<String, f64>,
    pub variant: Variant,
    pub solver: SolverOptions,
    pub source: String,
    pub target: String,
    pub sweep: Vec<Axis>,
    doc: Map<String, Value>,
}

/// Everything a distance computation needs.
pub struct Instance {
    pub source: GenSystem,
    pub target: GenSystem,
    pub spec: CostSpec,
}

/// Everything the reduction command needs.
pub struct CompositeInstance {
    pub source: CompositeSystem,
    pub target: CompositeSystem,
    pub times: Vec<f64>,
    pub spec: CostSpec,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Parsed<Self> {
        let text = std::fs::read_to_string(path).or_else(|e| err(&path.display().to_string(), e))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Self::from_str(&text, stem)
    }

    pub fn from_str(text: &str, default_id: &str) -> Parsed<Self> {
        let value: Value = serde_json::from_str(text).or_else(|e| err("$", format!("invalid JSON: {e}")))?;
        let Value::Object(doc) = value else {
            return err("$", "scenario must be a JSON object");
        };
        if let Some(v) = doc.get("version") {
            if v.as_u64() != Some(SCHEMA_VERSION) {
                return err("$.version", format!("unsupported version {v}, expected {SCHEMA_VERSION}"));
            }
        }
        let id = match doc.get("id") {
            None => default_id.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => return err("$.id", "expected a string"),
        };
        let mut params = BTreeMap::new();
        if let Some(p) = doc.get("params") {
            let Value::Object(p) = p else {
                return err("$.params", "expected an object of numbers");
            };
            for (k, v) in p {
                let x = v.as_f64().map(Ok).unwrap_or_else(|| err(&at("$.params", k), "expected a number"))?;
                params.insert(k.clone(), x);
            }
        }
        let variant = match doc.get("variant") {
            None => Variant::Plain,
            Some(Value::String(s)) => s.parse().or_else(|e| err("$.variant", e))?,
            Some(_) => return err("$.variant", "expected \"plain\" or \"modular\""),
        };
        let mut solver = SolverOptions::default();
        if let Some(s) = doc.get("solver") {
            let Value::Object(s) = s else {
                return err("$.solver", "expected an object");
            };
            for (k, v) in s {
                let path = at("$.solver", k);
                match k.as_str() {
                    "tol" => solver.tol = positive(v, &path)?,
                    "max_iter" => {
                        solver.max_iter = v.as_u64().map(|n| n as usize).map(Ok).unwrap_or_else(|| err(&path, "expected a non-negative integer"))?
                    }
                    "rho" => solver.rho = positive(v, &path)?,
                    other => return err(&path, format!("unknown solver option '{other}'")),
                }
            }
        }
        let name = |key: &str| -> Parsed<String> {
            match doc.get(key) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(_) => err(&at("$", key), "expected a system name"),
                None => err(&at("$", key), "missing"),
            }
        };
        let (source, target) = (name("source")?, name("target")?);
        let systems = match doc.get("systems") {
            Some(Value::Object(s)) => s,
            Some(_) => return err("$.systems", "expected an object"),
            None => return err("$.systems", "missing"),
        };
        for n in [&source, &target] {
            if !systems.contains_key(n) {
                return err("$", format!("system '{n}' is not defined in systems"));
            }
        }
        let sweep = match doc.get("sweep") {
            None => Vec::new(),
            Some(v) => parse_axes(v, &params)?,
        };
        let scenario = Self {
            id,
            params,
            variant,
            solver,
            source,
            target,
            sweep,
            doc,
        };
        // validate once at the first grid point; an empty axis has none
        let first = scenario.sweep.iter().map(|a| a.values.first().copied()).collect::<Option<Vec<f64>>>();
        if let Some(point) = first {
            scenario.resolver(&point).check_names()?;
        }
        Ok(scenario)
    }

    /// Parameter table with sweep values substituted.
    fn resolver(&self, point: &[f64]) -> Resolver<'_> {
        let mut params = self.params.clone();
        for (axis, v) in self.sweep.iter().zip(point) {
            params.insert(axis.param.clone(), *v);
        }
        Resolver { params, doc: &self.doc }
    }

    /// The source/target pair and cost at a sweep point (`point` may be
    /// shorter than the axes; missing axes keep their base values).
    pub fn instance(&self, point: &[f64]) -> Parsed<Instance> {
        let r = self.resolver(point);
        Ok(Instance {
            source: r.system(&self.source)?,
            target: r.system(&self.target)?,
            spec: r.cost()?,
        })
    }

    /// Source and target as composite systems, for the reduction command.
    pub fn composite_instance(&self, point: &[f64]) -> Parsed<CompositeInstance> {
        let r = self.resolver(point);
        let (source, t1) = r.composite(&self.source)?;
        let (target, t2) = r.composite(&self.target)?;
        let times = match self.doc.get("reduce_times") {
            Some(v) => r.numbers(v, "$.reduce_times")?,
            None if t1 == t2 => t1,
            None => return err("$.reduce_times", "source and target use different times; give reduce_times"),
        };
        Ok(CompositeInstance {
            source,
            target,
            times,
            spec: r.cost()?,
        })
    }
}

fn positive(v: &Value, path: &str) -> Parsed<f64> {
    match v.as_f64() {
        Some(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => err(path, "expected a positive number"),
    }
}

fn parse_axes(v: &Value, params: &BTreeMap<String, f64>) -> Parsed<Vec<Axis>> {
    let Value::Array(items) = v else {
        return err("$.sweep", "expected an array of axes");
    };
    let r = Resolver {
        params: params.clone(),
        doc: &Map::new(),
    };
    let mut axes: Vec<Axis> = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let path = idx("$.sweep", i);
        let Value::Object(o) = item else {
            return err(&path, "expected an object");
        };
        let param = match o.get("param") {
            Some(Value::String(s)) => s.clone(),
            _ => return err(&at(&path, "param"), "expected a parameter name"),
        };
        if axes.iter().any(|a| a.param == param) {
            return err(&at(&path, "param"), format!("parameter '{param}' swept twice"));
        }
        let values = if let Some(v) = o.get("values") {
            r.numbers(v, &at(&path, "values"))?
        } else {
            let start = r.number(o.get("start").unwrap_or(&Value::Null), &at(&path, "start"))?;
            let stop = r.number(o.get("stop").unwrap_or(&Value::Null), &at(&path, "stop"))?;
            let num = o.get("num").and_then(Value::as_u64).map(Ok).unwrap_or_else(|| err(&at(&path, "num"), "expected a non-negative integer"))? as usize;
            linspace(start, stop, num)
        };
        axes.push(Axis { param, values });
    }
    Ok(axes)
}

/// `num` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, num: usize) -> Vec<f64> {
    match num {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..num).map(|i| start + (stop - start) * i as f64 / (num - 1) as f64).collect(),
    }
}

struct Resolver<'a> {
    params: BTreeMap<String, f64>,
    doc: &'a Map<String, Value>,
}

impl Resolver<'_> {
    fn check_names(&self) -> Parsed<()> {
        if let Some(Value::Object(systems)) = self.doc.get("systems") {
            for name in systems.keys() {
                self.any_system(name, &mut Vec::new())?;
            }
        }
        self.cost()?;
        Ok(())
    }

    fn number(&self, v: &Value, path: &str) -> Parsed<f64> {
        match v {
            Value::Number(n) => n.as_f64().map(Ok).unwrap_or_else(|| err(path, "number out of range")),
            Value::String(s) => match s.strip_prefix('$') {
                Some(name) => self.params.get(name).copied().map(Ok).unwrap_or_else(|| err(path, format!("unknown parameter '{name}'"))),
                None => err(path, format!("expected a number or \"$param\", found \"{s}\"")),
            },
            Value::Null => err(path, "missing"),
            _ => err(path, "expected a number or \"$param\""),
        }
    }

    fn numbers(&self, v: &Value, path: &str) -> Parsed<Vec<f64>> {
        let Value::Array(items) = v else {
            return err(path, "expected an array of numbers");
        };
        items.iter().enumerate().map(|(i, x)| self.number(x, &idx(path, i))).collect()
    }

    fn pair(&self, v: &Value, path: &str) -> Parsed<[f64; 2]> {
        let xs = self.numbers(v, path)?;
        match xs.as_slice() {
            [a, b] => Ok([*a, *b]),
            _ => err(path, format!("expected 2 numbers, found {}", xs.len())),
        }
    }

    fn entry(&self, v: &Value, path: &str) -> Parsed<C64> {
        match v {
            Value::Array(_) => {
                let [re, im] = self.pair(v, path)?;
                Ok(C64::new(re, im))
            }
            _ => Ok(C64::new(self.number(v, path)?, 0.0)),
        }
    }

    fn matrix(&self, v: &Value, path: &str) -> Parsed<CMatrix> {
        let Value::Array(rows) = v else {
            return err(path, "expected an array of rows");
        };
        let n = rows.len();
        if n == 0 {
            return err(path, "empty matrix");
        }
        let mut data = Vec::with_capacity(n * n);
        let mut cols = None;
        for (i, row) in rows.iter().enumerate() {
            let rp = idx(path, i);
            let Value::Array(entries) = row else {
                return err(&rp, "expected a row array");
            };
            if *cols.get_or_insert(entries.len()) != entries.len() {
                return err(&rp, "rows have different lengths");
            }
            for (j, e) in entries.iter().enumerate() {
                data.push(self.entry(e, &idx(&rp, j))?);
            }
        }
        let cols = cols.unwrap_or(0);
        if cols != n {
            return err(path, format!("matrix must be square, found {n}x{cols}"));
        }
        Ok(CMatrix::from_row_slice(n, n, &data))
    }

    fn state(&self, v: &Value, path: &str) -> Parsed<FaithfulState> {
        let Value::Object(o) = v else {
            return err(path, "expected a state object");
        };
        let located = |r: ncw_core::Result<FaithfulState>, key: &str| r.or_else(|e| err(&at(path, key), e));
        if let Some(d) = o.get("density") {
            let m = self.matrix(d, &at(path, "density"))?;
            return located(FaithfulState::new(m), "density");
        }
        if let Some(d) = o.get("diag") {
            let w = self.numbers(d, &at(path, "diag"))?;
            return located(FaithfulState::diagonal(&w), "diag");
        }
        if let Some(p) = o.get("qubit_diag") {
            let p = self.number(p, &at(path, "qubit_diag"))?;
            return located(FaithfulState::qubit(p), "qubit_diag");
        }
        if let Some(n) = o.get("tracial") {
            return match n.as_u64() {
                Some(n) if n > 0 => Ok(FaithfulState::tracial(n as usize)),
                _ => err(&at(path, "tracial"), "expected a positive dimension"),
            };
        }
        err(path, "expected one of density, diag, qubit_diag, tracial")
    }

    fn dynamics(&self, v: Option<&Value>, state: &FaithfulState, path: &str) -> Parsed<DynamicsFamily> {
        let mut family = DynamicsFamily::new();
        let items = match v {
            None => return Ok(family),
            Some(Value::Array(items)) => items,
            Some(_) => return err(path, "expected an array of dynamics members"),
        };
        let n = state.dim();
        let mut labels: Vec<String> = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let ip = idx(path, i);
            let Value::Object(o) = item else {
                return err(&ip, "expected an object");
            };
            let label = match o.get("label") {
                Some(Value::String(s)) => s.clone(),
                Some(_) => return err(&at(&ip, "label"), "expected a string"),
                None if o.contains_key("modular") => "modular_flow".to_string(),
                None => format!("member{i}"),
            };
            if labels.contains(&label) {
                return err(&at(&ip, "label"), format!("duplicate label '{label}'"));
            }
            labels.push(label.clone());
            let ucp = |r: ncw_core::Result<UcpMap>, key: &str| r.or_else(|e| err(&at(&ip, key), e));
            family = if let Some(theta) = o.get("unitary_angle") {
                let theta = self.number(theta, &at(&ip, "unitary_angle"))?;
                if n != 2 {
                    return err(&at(&ip, "unitary_angle"), "angle dynamics needs a qubit system");
                }
                family.with_map(&label, ucp(UcpMap::unitary(&systems::angle_unitary(theta)), "unitary_angle")?)
            } else if let Some(u) = o.get("unitary") {
                let u = self.matrix(u, &at(&ip, "unitary"))?;
                family.with_map(&label, ucp(UcpMap::unitary(&u), "unitary")?)
            } else if let Some(h) = o.get("hamiltonian") {
                let h = self.matrix(h, &at(&ip, "hamiltonian"))?;
                match o.get("times") {
                    None => family.with_generator(&label, h),
                    Some(t) => {
                        let times = self.numbers(t, &at(&ip, "times"))?;
                        let mut samples = Vec::new();
                        for t in times {
                            let u = systems::unitary_group(&h, t).or_else(|e| err(&at(&ip, "hamiltonian"), e))?;
                            samples.push((t, ucp(UcpMap::unitary(&u), "hamiltonian")?));
                        }
                        family.with_samples(&label, samples)
                    }
                }
            } else if let Some(c) = o.get("choi") {
                let c = self.matrix(c, &at(&ip, "choi"))?;
                family.with_map(&label, ucp(UcpMap::from_choi(n, n, &c), "choi")?)
            } else if let Some(m) = o.get("modular") {
                if m != &Value::Bool(true) {
                    return err(&at(&ip, "modular"), "expected true");
                }
                family.with_generator(&label, state.log_density().clone())
            } else {
                return err(&ip, "expected one of unitary_angle, unitary, hamiltonian, choi, modular");
            };
        }
        family.validate(state).or_else(|e| err(path, e))?;
        Ok(family)
    }

    fn system_doc(&self, name: &str) -> Parsed<&Value> {
        match self.doc.get("systems") {
            Some(Value::Object(s)) => s.get(name).map(Ok).unwrap_or_else(|| err("$.systems", format!("unknown system '{name}'"))),
            _ => err("$.systems", "missing"),
        }
    }

    fn system(&self, name: &str) -> Parsed<GenSystem> {
        match self.any_system(name, &mut Vec::new())? {
            Built::Plain(s) => Ok(s),
            Built::Composite(c, _) => Ok(c.as_system()),
        }
    }

    fn composite(&self, name: &str) -> Parsed<(CompositeSystem, Vec<f64>)> {
        match self.any_system(name, &mut Vec::new())? {
            Built::Composite(c, times) => Ok((c, times)),
            Built::Plain(_) => err(&at("$.systems", name), "expected a composite system"),
        }
    }

    fn any_system(&self, name: &str, stack: &mut Vec<String>) -> Parsed<Built> {
        let path = at("$.systems", name);
        if stack.iter().any(|s| s == name) {
            return err(&path, "circular reference");
        }
        stack.push(name.to_string());
        let v = self.system_doc(name)?;
        let Value::Object(o) = v else {
            return err(&path, "expected an object");
        };
        let built = if let Some(c) = o.get("composite") {
            let (c, times) = self.composite_doc(c, &at(&path, "composite"))?;
            Built::Composite(c, times)
        } else if let Some(Value::String(base)) = o.get("reduce_of") {
            let (c, own_times) = match self.any_system(base, stack)? {
                Built::Composite(c, t) => (c, t),
                Built::Plain(_) => return err(&at(&path, "reduce_of"), format!("'{base}' is not a composite")),
            };
            let times = match o.get("times") {
                Some(t) => self.numbers(t, &at(&path, "times"))?,
                None => own_times,
            };
            Built::Plain(systems::reduce_system(&c, &times).or_else(|e| err(&path, e))?)
        } else if let Some(Value::String(base)) = o.get("augment_of") {
            match self.any_system(base, stack)? {
                Built::Composite(c, _) => Built::Plain(systems::augment(&c)),
                Built::Plain(_) => return err(&at(&path, "augment_of"), format!("'{base}' is not a composite")),
            }
        } else {
            let state = self.state(o.get("state").unwrap_or(&Value::Null), &at(&path, "state"))?;
            let dynamics = self.dynamics(o.get("dynamics"), &state, &at(&path, "dynamics"))?;
            let mut s = GenSystem::new(state, dynamics).or_else(|e| err(&path, e))?;
            if let Some(m) = o.get("include_modular") {
                s = s.with_modular(m.as_bool().map(Ok).unwrap_or_else(|| err(&at(&path, "include_modular"), "expected a boolean"))?);
            }
            Built::Plain(s)
        };
        stack.pop();
        Ok(built)
    }

    fn composite_doc(&self, v: &Value, path: &str) -> Parsed<(CompositeSystem, Vec<f64>)> {
        let Value::Object(o) = v else {
            return err(path, "expected an object");
        };
        let state_r = self.state(o.get("state_r").unwrap_or(&Value::Null), &at(path, "state_r"))?;
        let state_s = self.state(o.get("state_s").unwrap_or(&Value::Null), &at(path, "state_s"))?;
        if let Some(m) = o.get("two_qubit") {
            let mp = at(path, "two_qubit");
            let Value::Object(m) = m else {
                return err(&mp, "expected an object");
            };
            let get = |k: &str| self.pair(m.get(k).unwrap_or(&Value::Null), &at(&mp, k));
            let model = TwoQubitModel {
                theta: get("theta")?,
                phi: get("phi")?,
                u: get("u")?,
                v: get("v")?,
                lambda: self.number(m.get("lambda").unwrap_or(&Value::Null), &at(&mp, "lambda"))?,
            };
            let times = self.numbers(o.get("times").unwrap_or(&Value::Null), &at(path, "times"))?;
            let c = systems::two_qubit_composite(&model, &state_r, &state_s, &times).or_else(|e| err(path, e))?;
            return Ok((c, times));
        }
        let joint = state_r.product(&state_s).or_else(|e| err(path, e))?;
        let evolution = self.dynamics(o.get("evolution"), &joint, &at(path, "evolution"))?;
        let times = match o.get("times") {
            Some(t) => self.numbers(t, &at(path, "times"))?,
            None => Vec::new(),
        };
        let c = CompositeSystem::new(state_r, state_s, evolution).or_else(|e| err(path, e))?;
        Ok((c, times))
    }

    fn cost(&self) -> Parsed<CostSpec> {
        let Some(v) = self.doc.get("cost") else {
            return err("$.cost", "missing");
        };
        let Value::Array(items) = v else {
            return err("$.cost", "expected an array of matrices");
        };
        let k = items
            .iter()
            .enumerate()
            .map(|(i, m)| self.matrix(m, &idx("$.cost", i)))
            .collect::<Parsed<Vec<_>>>()?;
        CostSpec::new(k).or_else(|e| err("$.cost", e))
    }
}

enum Built {
    Plain(GenSystem),
    Composite(CompositeSystem, Vec<f64>),
}
