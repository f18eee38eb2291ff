//! Experiment dispatch: resolved configuration in, tables and checks out.

use rayon::prelude::*;

use lie_dichotomy::algebra::{make_descriptor, AlgebraKind};
use lie_dichotomy::envs::{AnisotropyMode, LieGroupMdp, PerturbationConfig, Se3Env, So3JointsEnv, WitnessBandit};
use lie_dichotomy::estimation::kantorovich_bound;
use lie_dichotomy::experiments::{
    anisotropy_ablation, anisotropy_label, condition_table, convergence_study, default_anisotropy_conditions, default_methods,
    default_robustness_conditions, dichotomy_sweep, dichotomy_table, joints_sweep, method_comparison, per_seed_table, robustness_sweep,
    se3_divergence_study, se3_table, se3_trajectory_table, timing_bench, timing_table, validation_suite, witness_table, Check,
    ConditionSummary, DichotomyConfig, GrowthClass, RobustnessCondition, Se3StudyConfig, SlopeStudyConfig, StudyConfig, Table,
    TimingConfig,
};
use lie_dichotomy::expmap::theoretical_lipschitz;
use lie_dichotomy::optim::{train, Method, RunRecord};
use lie_dichotomy::policy::{AmbientPolicy, GaussianLiePolicy};
use lie_dichotomy::{Error, Result};

use crate::config::{Experiment, RunConfig};

/// Tables to write (the first becomes `results.csv`) and checks to report.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    /// Extra `key = value` lines for `meta.txt`.
    pub meta: Vec<(String, String)>,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_owned(), passed, detail }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.experiment {
        Experiment::Validate => Ok(Outcome { checks: validation_suite(cfg.seeds[0]), ..Outcome::default() }),
        Experiment::Dichotomy => dichotomy(cfg),
        Experiment::Train => train_runs(cfg),
        Experiment::Bench => bench(cfg),
        Experiment::Anisotropy => anisotropy(cfg),
        Experiment::Robustness => robustness(cfg),
        Experiment::Joints => joints(cfg),
        Experiment::Se3 => se3(cfg),
        Experiment::Witness => witness(cfg),
        Experiment::Slopes => slopes(cfg),
        Experiment::Methods => methods(cfg),
    }
}

fn so3_joints(cfg: &RunConfig) -> Result<usize> {
    match cfg.algebra.kind {
        AlgebraKind::So3Product(j) => Ok(j),
        other => Err(Error::Config(format!("algebra.kind: {} runs on so3_product, not {other}", cfg.experiment))),
    }
}

fn study_config(cfg: &RunConfig) -> Result<StudyConfig> {
    let o = &cfg.optimizer;
    let s = StudyConfig {
        joints: so3_joints(cfg)?,
        sigma: o.sigma,
        eta: o.eta,
        schedule: o.schedule,
        iterations: o.iterations,
        episodes_per_iter: o.episodes_per_iter,
        gamma: o.gamma,
        b_theta: o.b_theta,
        horizon: o.horizon,
        ambient_factor: o.ambient_factor,
        seeds: cfg.seeds.clone(),
    };
    s.validate()?;
    Ok(s)
}

fn bound_check(rows: &[ConditionSummary]) -> Check {
    let worst = rows.iter().map(|r| r.min_slack).fold(f64::INFINITY, f64::min);
    check("alignment above Kantorovich bound", worst >= -1e-10, format!("smallest slack {worst:.3e}"))
}

fn dichotomy(cfg: &RunConfig) -> Result<Outcome> {
    let defaults = DichotomyConfig::default();
    let d = DichotomyConfig {
        radii: cfg.study.radii.clone().unwrap_or(defaults.radii),
        pairs: cfg.study.pairs.unwrap_or(defaults.pairs),
        joints: match cfg.algebra.kind {
            AlgebraKind::So3Product(j) => j,
            _ => defaults.joints,
        },
        seeds: cfg.seeds.clone(),
    };
    let rows = dichotomy_sweep(&d)?;
    let mut checks = vec![
        check("compact row flat", rows[0].fit.class == GrowthClass::Flat, format!("{} classified {}", rows[0].label, rows[0].fit.class)),
        check("se(3) row not exponential", rows[1].fit.class != GrowthClass::Exponential, format!("classified {}", rows[1].fit.class)),
        check(
            "gl(2) row exponential",
            rows[2].fit.class == GrowthClass::Exponential,
            format!("classified {} with rate {:.3}", rows[2].fit.class, rows[2].fit.exponential.slope),
        ),
    ];
    let under = rows[2].probes.iter().all(|p| p.l_emp <= p.l_theory);
    checks.push(check("gl(2) witness below theoretical constant", under, String::new()));
    Ok(Outcome { tables: vec![dichotomy_table(&rows)], checks, meta: Vec::new() })
}

fn train_one(cfg: &RunConfig, seed: u64) -> Result<RunRecord> {
    let o = &cfg.optimizer;
    let opt = o.to_config(seed);
    let descriptor = make_descriptor(cfg.algebra.kind, cfg.algebra.n)?;
    let lie = || -> Result<GaussianLiePolicy> {
        GaussianLiePolicy::new(&descriptor, o.sigma)?.with_clip(o.clip_multiplier)?.with_anisotropy(cfg.perturbation.anisotropy)
    };
    macro_rules! go {
        ($env:expr) => {{
            let mut env = $env;
            if o.method == Method::AmbientPg {
                let policy = AmbientPolicy::new(env.descriptor(), o.ambient_factor, o.sigma, seed)?;
                Ok(train(&mut env, policy, &opt)?.1)
            } else {
                Ok(train(&mut env, lie()?, &opt)?.1)
            }
        }};
    }
    match cfg.algebra.kind {
        AlgebraKind::So3Product(j) => go!(So3JointsEnv::new(j, seed, cfg.perturbation)?.with_horizon(o.horizon)),
        AlgebraKind::Se3 => go!(Se3Env::new(seed, cfg.perturbation)?.with_horizon(o.horizon).with_control_period(cfg.control_period())?),
        AlgebraKind::GlN | AlgebraKind::DiagN | AlgebraKind::SlN => go!(WitnessBandit::new(descriptor.clone())?),
        AlgebraKind::SoN => Err(Error::Config("algebra.kind: no environment is defined on so(n); use so3_product".into())),
    }
}

fn train_runs(cfg: &RunConfig) -> Result<Outcome> {
    let records = cfg.seeds.par_iter().map(|&s| train_one(cfg, s)).collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(
        "train",
        &[
            "method",
            "seed",
            "iteration",
            "mean_return",
            "grad_norm",
            "theta_norm",
            "projection_triggered",
            "projection_residual",
            "alignment",
            "kappa_hat",
            "epsilon_f",
            "fallback",
            "rollout_us",
            "gradient_us",
            "precondition_us",
            "update_us",
        ],
    );
    let method = cfg.optimizer.method.to_string();
    let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
    for (seed, rec) in cfg.seeds.iter().zip(&records) {
        for r in &rec.rows {
            t.push(vec![
                method.as_str().into(),
                (*seed).into(),
                r.iteration.into(),
                r.mean_return.into(),
                r.grad_norm.into(),
                r.theta_norm.into(),
                r.projection_triggered.into(),
                r.projection_residual.into(),
                nan(r.alignment).into(),
                nan(r.kappa).into(),
                nan(r.epsilon_f).into(),
                r.fallback.into(),
                r.micros.rollout.into(),
                r.micros.gradient.into(),
                r.micros.precondition.into(),
                r.micros.update.into(),
            ]);
        }
    }
    let aborted: Vec<String> =
        cfg.seeds.iter().zip(&records).filter_map(|(s, r)| r.aborted.as_ref().map(|e| format!("seed {s}: {e}"))).collect();
    let b = cfg.optimizer.b_theta;
    let max_norm = records.iter().map(|r| r.max_theta_norm()).fold(0.0, f64::max);
    let mut worst_slack = f64::INFINITY;
    for r in records.iter().flat_map(|r| &r.rows) {
        if let (Some(a), Some(k)) = (r.alignment, r.kappa) {
            worst_slack = worst_slack.min(a - kantorovich_bound(k)?);
        }
    }
    let mut checks = vec![
        check("runs completed", aborted.is_empty(), aborted.join("; ")),
        check("radius bound respected", max_norm <= b * (1.0 + 1e-12), format!("max norm {max_norm:.6} against B = {b}")),
    ];
    if worst_slack.is_finite() {
        checks.push(check("alignment above Kantorovich bound", worst_slack >= -1e-10, format!("smallest slack {worst_slack:.3e}")));
    }
    let mut meta = Vec::new();
    if let Ok(l) = theoretical_lipschitz(&cfg.smoothness) {
        meta.push(("theoretical_lipschitz".to_owned(), format!("{l:.16e}")));
    }
    Ok(Outcome { tables: vec![t], checks, meta })
}

fn bench(cfg: &RunConfig) -> Result<Outcome> {
    let defaults = TimingConfig::default();
    let t = TimingConfig {
        joints: cfg.study.joints.clone().unwrap_or(defaults.joints),
        trials: cfg.study.trials.unwrap_or(defaults.trials),
        seed: cfg.seeds[0],
    };
    let s = timing_bench(&t)?;
    let checks = vec![
        check("factorization exponent 3 +/- 0.5", (s.factor_exponent - 3.0).abs() <= 0.5, format!("{:.3}", s.factor_exponent)),
        check("projection exponent 1 +/- 0.3", (s.project_exponent - 1.0).abs() <= 0.3, format!("{:.3}", s.project_exponent)),
        check("speedup nondecreasing in J", s.speedup_monotone, String::new()),
    ];
    Ok(Outcome { tables: vec![timing_table(&s)], checks, meta: Vec::new() })
}

fn anisotropy(cfg: &RunConfig) -> Result<Outcome> {
    let study = study_config(cfg)?;
    let modes: Vec<AnisotropyMode> = match &cfg.study.kappa_m {
        Some(ks) => ks.iter().map(|&k| if k == 1.0 { AnisotropyMode::Uniform } else { AnisotropyMode::Correlated(k) }).collect(),
        None => default_anisotropy_conditions(),
    };
    let rows = anisotropy_ablation(&study, &modes)?;
    // Alignment must fall as the designed spread grows.
    let mut graded: Vec<(f64, f64)> = modes
        .iter()
        .zip(&rows)
        .filter_map(|(m, r)| match m {
            AnisotropyMode::Uniform => Some((1.0, r.alignment)),
            AnisotropyMode::Correlated(k) => Some((*k, r.alignment)),
            AnisotropyMode::AxisBiased => None,
        })
        .collect();
    graded.sort_by(|a, b| a.0.total_cmp(&b.0));
    let decreasing = graded.windows(2).all(|w| w[1].1 < w[0].1);
    let checks = vec![
        check(
            "alignment strictly decreasing in kappa_M",
            decreasing,
            graded.iter().map(|(k, a)| format!("{k}: {a:.4}")).collect::<Vec<_>>().join(", "),
        ),
        bound_check(&rows),
    ];
    let labels: Vec<String> = modes.iter().map(|&m| anisotropy_label(m)).collect();
    let meta = vec![("conditions".to_owned(), labels.join(" "))];
    Ok(Outcome {
        tables: vec![
            condition_table("anisotropy", "condition", &rows),
            per_seed_table("anisotropy_per_seed", "condition", &cfg.seeds, &rows),
        ],
        checks,
        meta,
    })
}

fn robustness(cfg: &RunConfig) -> Result<Outcome> {
    let study = study_config(cfg)?;
    let conditions: Vec<RobustnessCondition> = match &cfg.study.sigma_eps {
        Some(levels) => {
            let mut c: Vec<RobustnessCondition> =
                default_robustness_conditions().into_iter().filter(|c| !c.label.starts_with("TRANSITION")).collect();
            let base = PerturbationConfig::default();
            for (i, &s) in levels.iter().enumerate() {
                c.insert(
                    1 + i,
                    RobustnessCondition {
                        label: format!("TRANSITION({s})"),
                        perturbation: PerturbationConfig { transition_noise_sigma: s, ..base },
                    },
                );
            }
            c
        }
        None => default_robustness_conditions(),
    };
    let rows = robustness_sweep(&study, &conditions)?;
    let mut transition: Vec<(f64, f64)> = conditions
        .iter()
        .zip(&rows)
        .filter(|(c, _)| c.label.starts_with("TRANSITION"))
        .map(|(c, r)| (c.perturbation.transition_noise_sigma, r.kappa))
        .collect();
    transition.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Ties within rounding count as nondecreasing.
    let nondecreasing = transition.windows(2).all(|w| w[0].1 <= w[1].1 * (1.0 + 1e-12));
    let checks = vec![
        check(
            "kappa_hat nondecreasing in sigma_eps",
            nondecreasing,
            transition.iter().map(|(s, k)| format!("{s}: {k:.4}")).collect::<Vec<_>>().join(", "),
        ),
        bound_check(&rows),
    ];
    Ok(Outcome {
        tables: vec![
            condition_table("robustness", "condition", &rows),
            per_seed_table("robustness_per_seed", "condition", &cfg.seeds, &rows),
        ],
        checks,
        meta: Vec::new(),
    })
}

fn joints(cfg: &RunConfig) -> Result<Outcome> {
    let study = study_config(cfg)?;
    let js = cfg.study.joints.clone().unwrap_or_else(|| vec![5, 10, 20]);
    let rows = joints_sweep(&study, &js)?;
    Ok(Outcome {
        tables: vec![condition_table("joints", "joints", &rows), per_seed_table("joints_per_seed", "joints", &cfg.seeds, &rows)],
        checks: vec![bound_check(&rows)],
        meta: Vec::new(),
    })
}

fn methods(cfg: &RunConfig) -> Result<Outcome> {
    let study = study_config(cfg)?;
    let rows = method_comparison(&study, &default_methods())?;
    let get = |m: Method| rows.iter().find(|r| r.label == m.to_string()).expect("every default method is run");
    let (lpg, amb, nat) = (get(Method::Lpg), get(Method::AmbientPg), get(Method::NatGradChol));
    let ratio = nat.precondition_us / lpg.precondition_us;
    let checks = vec![
        check(
            "return ordering NATGRAD >= LPG >= AMBIENT",
            nat.final_return >= lpg.final_return && lpg.final_return >= amb.final_return,
            format!("{:.2} / {:.2} / {:.2}", nat.final_return, lpg.final_return, amb.final_return),
        ),
        check("precondition cost NATGRAD >= 10x LPG", ratio >= 10.0, format!("{ratio:.1}x")),
    ];
    Ok(Outcome {
        tables: vec![condition_table("methods", "method", &rows), per_seed_table("methods_per_seed", "method", &cfg.seeds, &rows)],
        checks,
        meta: Vec::new(),
    })
}

fn se3(cfg: &RunConfig) -> Result<Outcome> {
    let o = &cfg.optimizer;
    let s = Se3StudyConfig {
        b_values: cfg.study.b_values.clone().unwrap_or_else(|| vec![f64::INFINITY, 2.0]),
        iterations: o.iterations,
        eta: o.eta,
        schedule: o.schedule,
        sigma: o.sigma,
        episodes_per_iter: o.episodes_per_iter,
        gamma: o.gamma,
        control_period: cfg.control_period(),
        seeds: cfg.seeds.clone(),
    };
    let runs = se3_divergence_study(&s)?;
    let mut checks = Vec::new();
    let bounded_ok = runs.iter().filter(|r| r.b_theta.is_finite()).all(|r| r.max_theta_norm <= r.b_theta * (1.0 + 1e-12));
    checks.push(check("finite radius never exceeded", bounded_ok, String::new()));
    let free: Vec<_> = runs.iter().filter(|r| r.b_theta.is_infinite()).collect();
    if !free.is_empty() {
        let reached = free.iter().filter(|r| r.max_theta_norm >= 10.0).count();
        checks.push(check(
            "unprojected norm reaches 10 on at least 4/5 of seeds",
            5 * reached >= 4 * free.len(),
            format!("{reached}/{} seeds", free.len()),
        ));
    }
    Ok(Outcome { tables: vec![se3_table(&runs), se3_trajectory_table(&runs)], checks, meta: Vec::new() })
}

fn witness(cfg: &RunConfig) -> Result<Outcome> {
    let ts = cfg.study.t.clone().unwrap_or_else(|| vec![0.0, 0.5, 1.0, 2.0]);
    let sigmas = cfg.study.sigma.clone().unwrap_or_else(|| vec![0.0, 0.1]);
    let table = witness_table(&ts, &sigmas, cfg.study.n_mc.unwrap_or(10_000), cfg.seeds[0])?;
    let col = |name: &str| table.floats(name);
    let (t, sigma, g2, g2_mc) = (col("t"), col("sigma"), col("g2"), col("g2_mc"));
    let mut worst: f64 = 0.0;
    let mut bound_ok = true;
    for i in 0..t.len() {
        if sigma[i] == 0.0 {
            worst = worst.max(((g2_mc[i] - g2[i]) / g2[i]).abs());
        }
        if t[i] >= 0.0 {
            bound_ok &= g2[i].abs() >= (2.0 * t[i]).exp();
        }
    }
    let checks = vec![
        check("noiseless second differences match g''", worst <= 1e-3, format!("max relative error {worst:.3e}")),
        check("|g''(t)| >= exp(2t) for t >= 0", bound_ok, String::new()),
    ];
    Ok(Outcome { tables: vec![table], checks, meta: Vec::new() })
}

fn slopes(cfg: &RunConfig) -> Result<Outcome> {
    let defaults = SlopeStudyConfig::default();
    let s = SlopeStudyConfig {
        joints: match cfg.algebra.kind {
            AlgebraKind::So3Product(j) => j,
            _ => defaults.joints,
        },
        seeds: cfg.seeds.clone(),
        ..defaults
    };
    let study = convergence_study(&s)?;
    let mut t = Table::new("slopes", &["fit", "slope", "intercept", "r_squared", "points"]);
    for (name, fit) in [("deterministic_running_gap", &study.deterministic), ("stochastic_grad_norm_sq", &study.stochastic)] {
        t.push(vec![name.into(), fit.slope.into(), fit.intercept.into(), fit.r_squared.into(), fit.points.len().into()]);
    }
    let mut pts = Table::new("slopes_points", &["horizon", "mean_grad_norm_sq"]);
    for (h, v) in s.horizons.iter().zip(&study.stochastic_means) {
        pts.push(vec![(*h).into(), (*v).into()]);
    }
    let checks = vec![
        check(
            "deterministic slope -1 +/- 0.1",
            (study.deterministic.slope + 1.0).abs() <= 0.1,
            format!("{:.4}", study.deterministic.slope),
        ),
        check("stochastic slope -0.5 +/- 0.15", (study.stochastic.slope + 0.5).abs() <= 0.15, format!("{:.4}", study.stochastic.slope)),
    ];
    Ok(Outcome { tables: vec![t, pts], checks, meta: Vec::new() })
}
