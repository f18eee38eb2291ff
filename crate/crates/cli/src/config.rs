//! Run configuration: TOML loading with full diagnostics, defaults, and a
//! canonical snapshot for hashing.

use std::fmt;
use std::path::{Path, PathBuf};

use lie_dichotomy::algebra::{make_descriptor, AlgebraKind};
use lie_dichotomy::envs::{AnisotropyMode, PerturbationConfig, DEFAULT_HORIZON, SE3_CONTROL_PERIOD};
use lie_dichotomy::expmap::SmoothnessParams;
use lie_dichotomy::optim::{Method, OptimizerConfig, Schedule};
use lie_dichotomy::policy::DEFAULT_CLIP_MULTIPLIER;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Validate,
    Dichotomy,
    Train,
    Bench,
    Anisotropy,
    Robustness,
    Joints,
    Se3,
    Witness,
    Slopes,
    Methods,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::Validate,
        Experiment::Dichotomy,
        Experiment::Train,
        Experiment::Bench,
        Experiment::Anisotropy,
        Experiment::Robustness,
        Experiment::Joints,
        Experiment::Se3,
        Experiment::Witness,
        Experiment::Slopes,
        Experiment::Methods,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Validate => "validate",
            Experiment::Dichotomy => "dichotomy",
            Experiment::Train => "train",
            Experiment::Bench => "bench",
            Experiment::Anisotropy => "anisotropy",
            Experiment::Robustness => "robustness",
            Experiment::Joints => "joints",
            Experiment::Se3 => "se3",
            Experiment::Witness => "witness",
            Experiment::Slopes => "slopes",
            Experiment::Methods => "methods",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraSpec {
    pub kind: AlgebraKind,
    pub n: usize,
}

/// Optimizer and policy settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub method: Method,
    pub eta: f64,
    pub schedule: Schedule,
    pub b_theta: f64,
    pub iterations: usize,
    pub episodes_per_iter: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub ambient_factor: usize,
    pub clip_multiplier: f64,
    pub log_fisher: bool,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        let o = OptimizerConfig::default();
        Self {
            method: o.method,
            eta: o.eta,
            schedule: o.schedule,
            b_theta: o.b_theta,
            iterations: o.iterations,
            episodes_per_iter: o.episodes_per_iter,
            gamma: o.gamma,
            sigma: 0.1,
            horizon: DEFAULT_HORIZON,
            ambient_factor: 3,
            clip_multiplier: DEFAULT_CLIP_MULTIPLIER,
            log_fisher: false,
        }
    }
}

impl OptimizerSpec {
    pub fn to_config(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            method: self.method,
            eta: self.eta,
            schedule: self.schedule,
            b_theta: self.b_theta,
            iterations: self.iterations,
            episodes_per_iter: self.episodes_per_iter,
            gamma: self.gamma,
            seed,
            log_fisher: self.log_fisher,
        }
    }
}

/// Experiment-specific sweep settings. `None` means the experiment default.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudySpec {
    pub radii: Option<Vec<f64>>,
    pub pairs: Option<usize>,
    pub trials: Option<usize>,
    pub joints: Option<Vec<usize>>,
    pub b_values: Option<Vec<f64>>,
    pub kappa_m: Option<Vec<f64>>,
    pub sigma_eps: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
    pub n_mc: Option<usize>,
    pub control_period: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub algebra: AlgebraSpec,
    pub optimizer: OptimizerSpec,
    pub perturbation: PerturbationConfig,
    /// Constants of the theoretical Lipschitz bound; `gamma`, `sigma`,
    /// `radius`, `n` and `compact` are taken from the optimizer and algebra.
    pub smoothness: SmoothnessParams,
    pub study: StudySpec,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

impl RunConfig {
    /// Defaults for `experiment` when no file is given.
    pub fn defaults(experiment: Experiment) -> Self {
        let optimizer = OptimizerSpec::default();
        let algebra = AlgebraSpec { kind: AlgebraKind::So3Product(10), n: 3 };
        let smoothness = SmoothnessParams {
            r_max: 1e3,
            b_phi: 1.0,
            b_a: 1.0,
            c_d: 1.0,
            gamma: optimizer.gamma,
            sigma: optimizer.sigma,
            radius: optimizer.b_theta,
            n: 30,
            compact: true,
        };
        let mut cfg = Self {
            experiment,
            algebra,
            optimizer,
            perturbation: PerturbationConfig::default(),
            smoothness,
            study: StudySpec::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            output_dir: PathBuf::from("results"),
        };
        match experiment {
            // Ablations log the Fisher over 40 iterations per seed.
            Experiment::Anisotropy | Experiment::Robustness | Experiment::Joints => {
                cfg.optimizer.iterations = 40;
                cfg.optimizer.log_fisher = true;
            }
            Experiment::Se3 => {
                cfg.algebra = AlgebraSpec { kind: AlgebraKind::Se3, n: 4 };
                cfg.optimizer.schedule = Schedule::Constant;
            }
            _ => {}
        }
        cfg.sync_smoothness();
        cfg
    }

    /// Copies optimizer and algebra values into the smoothness constants.
    pub fn sync_smoothness(&mut self) {
        self.smoothness.gamma = self.optimizer.gamma;
        self.smoothness.sigma = self.optimizer.sigma;
        self.smoothness.radius = self.optimizer.b_theta;
        if let Ok(d) = make_descriptor(self.algebra.kind, self.algebra.n) {
            self.smoothness.n = d.n();
            self.smoothness.compact = d.is_compact();
        }
    }

    /// Every violated invariant, one message per violation.
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if self.seeds.is_empty() {
            bad.push("seeds: must be nonempty".to_owned());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            bad.push("seeds: must be distinct".to_owned());
        }
        if let Err(e) = make_descriptor(self.algebra.kind, self.algebra.n) {
            bad.push(format!("algebra: {e}"));
        }
        let o = &self.optimizer;
        if let Err(e) = o.to_config(0).validate() {
            bad.push(format!("optimizer: {e}"));
        }
        if !(o.sigma > 0.0 && o.sigma.is_finite()) {
            bad.push(format!("optimizer.sigma: must be positive and finite (got {})", o.sigma));
        }
        if o.horizon == 0 {
            bad.push("optimizer.horizon: must be positive".to_owned());
        }
        if o.ambient_factor == 0 {
            bad.push("optimizer.ambient_factor: must be positive".to_owned());
        }
        if !(o.clip_multiplier > 0.0) {
            bad.push(format!("optimizer.clip_multiplier: must be positive (got {})", o.clip_multiplier));
        }
        if let Err(e) = self.perturbation.validate() {
            bad.push(format!("perturbation: {e}"));
        }
        if let Err(e) = self.smoothness.validate() {
            bad.push(format!("smoothness: {e}"));
        }
        let s = &self.study;
        if let Some(r) = &s.radii {
            if r.len() < 4 || r.windows(2).any(|w| !(w[0] < w[1])) || r.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                bad.push("study.radii: need at least 4 positive, finite, strictly ascending values".to_owned());
            }
        }
        if s.pairs.is_some_and(|p| p < 2) {
            bad.push("study.pairs: must be at least 2".to_owned());
        }
        if s.trials.is_some_and(|t| t < 50) {
            bad.push("study.trials: must be at least 50".to_owned());
        }
        if s.joints.as_ref().is_some_and(|j| j.is_empty() || j.contains(&0)) {
            bad.push("study.joints: must be nonempty and positive".to_owned());
        }
        if s.b_values.as_ref().is_some_and(|b| b.is_empty() || b.iter().any(|v| !(*v > 0.0))) {
            bad.push("study.b_values: must be nonempty and positive (inf allowed)".to_owned());
        }
        if s.kappa_m.as_ref().is_some_and(|k| k.is_empty() || k.iter().any(|v| !(*v >= 1.0 && v.is_finite()))) {
            bad.push("study.kappa_m: values must be finite and at least 1".to_owned());
        }
        if s.sigma_eps.as_ref().is_some_and(|k| k.is_empty() || k.iter().any(|v| !(*v >= 0.0 && v.is_finite()))) {
            bad.push("study.sigma_eps: values must be finite and nonnegative".to_owned());
        }
        if s.sigma.as_ref().is_some_and(|k| k.iter().any(|v| !(*v >= 0.0 && v.is_finite()))) {
            bad.push("study.sigma: values must be finite and nonnegative".to_owned());
        }
        if s.t.as_ref().is_some_and(|k| k.iter().any(|v| !v.is_finite())) {
            bad.push("study.t: values must be finite".to_owned());
        }
        if s.n_mc == Some(0) {
            bad.push("study.n_mc: must be positive".to_owned());
        }
        if s.control_period.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
            bad.push("study.control_period: must be positive and finite".to_owned());
        }
        bad
    }

    /// Canonical TOML text of the resolved configuration.
    pub fn snapshot(&self) -> String {
        let mut root = Table::new();
        root.insert("experiment".into(), self.experiment.name().into());
        root.insert("seeds".into(), Value::Array(self.seeds.iter().map(|&s| Value::Integer(s as i64)).collect()));
        root.insert("output_dir".into(), self.output_dir.display().to_string().into());

        let mut a = Table::new();
        let (kind, joints) = kind_name(self.algebra.kind);
        a.insert("kind".into(), kind.into());
        a.insert("n".into(), int(self.algebra.n));
        if let Some(j) = joints {
            a.insert("joints".into(), int(j));
        }
        root.insert("algebra".into(), Value::Table(a));

        let o = &self.optimizer;
        let mut t = Table::new();
        let (method, cg) = method_name(o.method);
        t.insert("method".into(), method.into());
        if let Some(k) = cg {
            t.insert("cg_iterations".into(), int(k));
        }
        t.insert("eta".into(), o.eta.into());
        t.insert("schedule".into(), schedule_name(o.schedule).into());
        t.insert("b_theta".into(), o.b_theta.into());
        t.insert("iterations".into(), int(o.iterations));
        t.insert("episodes_per_iter".into(), int(o.episodes_per_iter));
        t.insert("gamma".into(), o.gamma.into());
        t.insert("sigma".into(), o.sigma.into());
        t.insert("horizon".into(), int(o.horizon));
        t.insert("ambient_factor".into(), int(o.ambient_factor));
        t.insert("clip_multiplier".into(), o.clip_multiplier.into());
        t.insert("log_fisher".into(), o.log_fisher.into());
        root.insert("optimizer".into(), Value::Table(t));

        let p = &self.perturbation;
        let mut t = Table::new();
        t.insert("transition_noise_sigma".into(), p.transition_noise_sigma.into());
        t.insert("observation_noise_sigma".into(), p.observation_noise_sigma.into());
        t.insert("reward_noise_sigma".into(), p.reward_noise_sigma.into());
        let (aniso, kappa) = anisotropy_name(p.anisotropy);
        t.insert("anisotropy".into(), aniso.into());
        if let Some(k) = kappa {
            t.insert("kappa_m".into(), k.into());
        }
        root.insert("perturbation".into(), Value::Table(t));

        let s = &self.smoothness;
        let mut t = Table::new();
        t.insert("r_max".into(), s.r_max.into());
        t.insert("b_phi".into(), s.b_phi.into());
        t.insert("b_a".into(), s.b_a.into());
        t.insert("c_d".into(), s.c_d.into());
        root.insert("smoothness".into(), Value::Table(t));

        let st = &self.study;
        let mut t = Table::new();
        let floats = |v: &Vec<f64>| Value::Array(v.iter().map(|&x| Value::Float(x)).collect());
        let ints = |v: &Vec<usize>| Value::Array(v.iter().map(|&x| int(x)).collect());
        if let Some(v) = &st.radii {
            t.insert("radii".into(), floats(v));
        }
        if let Some(v) = st.pairs {
            t.insert("pairs".into(), int(v));
        }
        if let Some(v) = st.trials {
            t.insert("trials".into(), int(v));
        }
        if let Some(v) = &st.joints {
            t.insert("joints".into(), ints(v));
        }
        if let Some(v) = &st.b_values {
            t.insert("b_values".into(), floats(v));
        }
        if let Some(v) = &st.kappa_m {
            t.insert("kappa_m".into(), floats(v));
        }
        if let Some(v) = &st.sigma_eps {
            t.insert("sigma_eps".into(), floats(v));
        }
        if let Some(v) = &st.t {
            t.insert("t".into(), floats(v));
        }
        if let Some(v) = &st.sigma {
            t.insert("sigma".into(), floats(v));
        }
        if let Some(v) = st.n_mc {
            t.insert("n_mc".into(), int(v));
        }
        if let Some(v) = st.control_period {
            t.insert("control_period".into(), v.into());
        }
        root.insert("study".into(), Value::Table(t));
        toml::to_string(&root).expect("a TOML table always serializes")
    }

    /// SHA-256 of [`RunConfig::snapshot`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.snapshot().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn control_period(&self) -> f64 {
        self.study.control_period.unwrap_or(SE3_CONTROL_PERIOD)
    }
}

fn int(v: usize) -> Value {
    Value::Integer(v as i64)
}

fn kind_name(kind: AlgebraKind) -> (&'static str, Option<usize>) {
    match kind {
        AlgebraKind::SoN => ("so", None),
        AlgebraKind::SlN => ("sl", None),
        AlgebraKind::Se3 => ("se3", None),
        AlgebraKind::GlN => ("gl", None),
        AlgebraKind::DiagN => ("diag", None),
        AlgebraKind::So3Product(j) => ("so3_product", Some(j)),
    }
}

fn method_name(m: Method) -> (&'static str, Option<usize>) {
    match m {
        Method::Lpg => ("lpg", None),
        Method::AmbientPg => ("ambient", None),
        Method::NatGradChol => ("natgrad_chol", None),
        Method::NatGradCg(k) => ("natgrad_cg", Some(k)),
    }
}

fn schedule_name(s: Schedule) -> &'static str {
    match s {
        Schedule::ConstantOverSqrtT => "constant_over_sqrt_t",
        Schedule::Diminishing => "diminishing",
        Schedule::Constant => "constant",
    }
}

fn anisotropy_name(a: AnisotropyMode) -> (&'static str, Option<f64>) {
    match a {
        AnisotropyMode::Uniform => ("uniform", None),
        AnisotropyMode::AxisBiased => ("axis_biased", None),
        AnisotropyMode::Correlated(k) => ("correlated", Some(k)),
    }
}

/// Parse and validation problems, plus forward-compatibility warnings.
#[derive(Debug, Default)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

/// One TOML table with the keys read from it tracked for unknown-key warnings.
struct Section<'a> {
    table: Option<&'a Table>,
    path: String,
    seen: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn root(table: &'a Table) -> Self {
        Self { table: Some(table), path: String::new(), seen: Vec::new() }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_owned()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn sub(&mut self, name: &'static str, diag: &mut Diagnostics) -> Section<'a> {
        self.seen.push(name);
        let path = self.key(name);
        let table = match self.table.and_then(|t| t.get(name)) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                diag.errors.push(format!("{path}: expected a table"));
                None
            }
        };
        Section { table, path, seen: Vec::new() }
    }

    fn raw(&mut self, k: &'static str) -> Option<&'a Value> {
        self.seen.push(k);
        self.table.and_then(|t| t.get(k))
    }

    fn f64(&mut self, k: &'static str, diag: &mut Diagnostics) -> Option<f64> {
        let path = self.key(k);
        self.raw(k).and_then(|v| as_f64(v).or_else(|| fail(diag, &path, "a number")))
    }

    fn usize(&mut self, k: &'static str, diag: &mut Diagnostics) -> Option<usize> {
        let path = self.key(k);
        self.raw(k).and_then(|v| match v {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            _ => fail(diag, &path, "a nonnegative integer"),
        })
    }

    fn bool(&mut self, k: &'static str, diag: &mut Diagnostics) -> Option<bool> {
        let path = self.key(k);
        self.raw(k).and_then(|v| v.as_bool().or_else(|| fail(diag, &path, "a boolean")))
    }

    fn str(&mut self, k: &'static str, diag: &mut Diagnostics) -> Option<&'a str> {
        let path = self.key(k);
        self.raw(k).and_then(|v| v.as_str().or_else(|| fail(diag, &path, "a string")))
    }

    fn f64_list(&mut self, k: &'static str, diag: &mut Diagnostics) -> Option<Vec<f64>> {
        let path = self.key(k);
        self.raw(k).and_then(|v| {
            v.as_array().and_then(|a| a.iter().map(as_f64).collect::<Option<Vec<_>>>()).or_else(|| fail(diag, &path, "an array of numbers"))
        })
    }

    fn int_list(&mut self, k: &'static str, diag: &mut Diagnostics) -> Option<Vec<u64>> {
        let path = self.key(k);
        self.raw(k).and_then(|v| {
            v.as_array()
                .and_then(|a| a.iter().map(|x| x.as_integer().filter(|i| *i >= 0).map(|i| i as u64)).collect::<Option<Vec<_>>>())
                .or_else(|| fail(diag, &path, "an array of nonnegative integers"))
        })
    }

    fn finish(self, diag: &mut Diagnostics) {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.seen.contains(&k.as_str()) {
                    diag.warnings.push(format!("unknown field `{}` ignored", self.key(k)));
                }
            }
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn fail<T>(diag: &mut Diagnostics, path: &str, what: &str) -> Option<T> {
    diag.errors.push(format!("{path}: expected {what}"));
    None
}

fn parse_kind(name: &str, joints: Option<usize>) -> Option<AlgebraKind> {
    Some(match name {
        "so" => AlgebraKind::SoN,
        "sl" => AlgebraKind::SlN,
        "gl" => AlgebraKind::GlN,
        "diag" => AlgebraKind::DiagN,
        "se3" => AlgebraKind::Se3,
        "so3_product" => AlgebraKind::So3Product(joints.unwrap_or(10)),
        _ => return None,
    })
}

pub fn parse_method(name: &str, cg_iterations: Option<usize>) -> Option<Method> {
    Some(match name {
        "lpg" => Method::Lpg,
        "ambient" => Method::AmbientPg,
        "natgrad_chol" => Method::NatGradChol,
        "natgrad_cg" => Method::NatGradCg(cg_iterations.unwrap_or(10)),
        _ => return None,
    })
}

fn parse_schedule(name: &str) -> Option<Schedule> {
    Some(match name {
        "constant_over_sqrt_t" => Schedule::ConstantOverSqrtT,
        "diminishing" => Schedule::Diminishing,
        "constant" => Schedule::Constant,
        _ => return None,
    })
}

/// Parses configuration text. Errors list every problem found.
pub fn parse_config(text: &str) -> (Option<RunConfig>, Diagnostics) {
    let mut diag = Diagnostics::default();
    let root: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            diag.errors.push(format!("parse error: {e}"));
            return (None, diag);
        }
    };
    let mut top = Section::root(&root);

    let experiment = match top.str("experiment", &mut diag) {
        Some(name) => Experiment::parse(name).or_else(|| {
            let known: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            diag.errors.push(format!("experiment: unknown experiment `{name}` (expected one of {})", known.join(", ")));
            None
        }),
        None => {
            if !root.contains_key("experiment") {
                diag.errors.push("experiment: missing required field".to_owned());
            }
            None
        }
    };
    let mut cfg = RunConfig::defaults(experiment.unwrap_or(Experiment::Train));
    match top.int_list("seeds", &mut diag) {
        Some(s) => cfg.seeds = s,
        None if !root.contains_key("seeds") => diag.errors.push("seeds: missing required field".to_owned()),
        None => {}
    }
    if let Some(dir) = top.str("output_dir", &mut diag) {
        cfg.output_dir = PathBuf::from(dir);
    }

    let mut a = top.sub("algebra", &mut diag);
    let joints = a.usize("joints", &mut diag);
    if let Some(name) = a.str("kind", &mut diag) {
        match parse_kind(name, joints) {
            Some(k) => cfg.algebra.kind = k,
            None => diag.errors.push(format!("algebra.kind: unknown kind `{name}` (expected so, sl, gl, diag, se3, so3_product)")),
        }
    } else if let Some(j) = joints {
        cfg.algebra.kind = AlgebraKind::So3Product(j);
    }
    cfg.algebra.n = a.usize("n", &mut diag).unwrap_or(match cfg.algebra.kind {
        AlgebraKind::Se3 => 4,
        AlgebraKind::So3Product(_) => 3,
        _ => cfg.algebra.n,
    });
    a.finish(&mut diag);

    let mut o = top.sub("optimizer", &mut diag);
    let opt = &mut cfg.optimizer;
    let cg = o.usize("cg_iterations", &mut diag);
    if let Some(name) = o.str("method", &mut diag) {
        match parse_method(name, cg) {
            Some(m) => opt.method = m,
            None => {
                diag.errors.push(format!("optimizer.method: unknown method `{name}` (expected lpg, ambient, natgrad_chol, natgrad_cg)"))
            }
        }
    }
    if let Some(name) = o.str("schedule", &mut diag) {
        match parse_schedule(name) {
            Some(s) => opt.schedule = s,
            None => diag
                .errors
                .push(format!("optimizer.schedule: unknown schedule `{name}` (expected constant_over_sqrt_t, diminishing, constant)")),
        }
    }
    macro_rules! set {
        ($sec:ident, $field:expr, $key:literal, $getter:ident) => {
            if let Some(v) = $sec.$getter($key, &mut diag) {
                $field = v;
            }
        };
    }
    set!(o, opt.eta, "eta", f64);
    set!(o, opt.b_theta, "b_theta", f64);
    set!(o, opt.iterations, "iterations", usize);
    set!(o, opt.episodes_per_iter, "episodes_per_iter", usize);
    set!(o, opt.gamma, "gamma", f64);
    set!(o, opt.sigma, "sigma", f64);
    set!(o, opt.horizon, "horizon", usize);
    set!(o, opt.ambient_factor, "ambient_factor", usize);
    set!(o, opt.clip_multiplier, "clip_multiplier", f64);
    set!(o, opt.log_fisher, "log_fisher", bool);
    o.finish(&mut diag);

    let mut p = top.sub("perturbation", &mut diag);
    let pert = &mut cfg.perturbation;
    set!(p, pert.transition_noise_sigma, "transition_noise_sigma", f64);
    set!(p, pert.observation_noise_sigma, "observation_noise_sigma", f64);
    set!(p, pert.reward_noise_sigma, "reward_noise_sigma", f64);
    let kappa = p.f64("kappa_m", &mut diag);
    if let Some(name) = p.str("anisotropy", &mut diag) {
        match name {
            "uniform" => pert.anisotropy = AnisotropyMode::Uniform,
            "axis_biased" => pert.anisotropy = AnisotropyMode::AxisBiased,
            "correlated" => match kappa {
                Some(k) => pert.anisotropy = AnisotropyMode::Correlated(k),
                None => diag.errors.push("perturbation.kappa_m: missing required field for correlated anisotropy".to_owned()),
            },
            other => {
                diag.errors.push(format!("perturbation.anisotropy: unknown mode `{other}` (expected uniform, axis_biased, correlated)"))
            }
        }
    }
    p.finish(&mut diag);

    let mut s = top.sub("smoothness", &mut diag);
    let sm = &mut cfg.smoothness;
    set!(s, sm.r_max, "r_max", f64);
    set!(s, sm.b_phi, "b_phi", f64);
    set!(s, sm.b_a, "b_a", f64);
    set!(s, sm.c_d, "c_d", f64);
    s.finish(&mut diag);

    let mut st = top.sub("study", &mut diag);
    let study = &mut cfg.study;
    study.radii = st.f64_list("radii", &mut diag);
    study.pairs = st.usize("pairs", &mut diag);
    study.trials = st.usize("trials", &mut diag);
    study.joints = st.int_list("joints", &mut diag).map(|v| v.into_iter().map(|x| x as usize).collect());
    study.b_values = st.f64_list("b_values", &mut diag);
    study.kappa_m = st.f64_list("kappa_m", &mut diag);
    study.sigma_eps = st.f64_list("sigma_eps", &mut diag);
    study.t = st.f64_list("t", &mut diag);
    study.sigma = st.f64_list("sigma", &mut diag);
    study.n_mc = st.usize("n_mc", &mut diag);
    study.control_period = st.f64("control_period", &mut diag);
    st.finish(&mut diag);

    top.finish(&mut diag);
    cfg.sync_smoothness();
    diag.errors.extend(cfg.violations());
    if diag.errors.is_empty() {
        (Some(cfg), diag)
    } else {
        (None, diag)
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> (Option<RunConfig>, Diagnostics) {
    match std::fs::read_to_string(path) {
        Ok(text) => parse_config(&text),
        Err(e) => {
            let mut diag = Diagnostics::default();
            diag.errors.push(format!("{}: {e}", path.display()));
            (None, diag)
        }
    }
}
