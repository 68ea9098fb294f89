use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use eptas_core::adaptive::{self, AdaptiveInstance, AdaptiveParams, BlockPolicy};
use eptas_core::generate::{random_costs, random_rvs, RvShape};
use eptas_core::oracle::{brute_force_adaptive, brute_force_pandora, brute_probemax, brute_prophets, brute_topr, OracleBudget};
use eptas_core::pandora::{self, cap_variables, PandoraInstance};
use eptas_core::probemax::{self, expected_top_r, greedy_baseline, ProbeMaxInstance, ProbeMaxParams};
use eptas_core::prophets::{self, Permutation, ProphetInstance, ProphetParams};
use eptas_core::rng::{stream, StreamRng};
use eptas_core::santa_claus::{self, planted_instance, verify, Assignment, SantaInstance, SantaParams};
use eptas_core::{Error, Mode};

use crate::{bench, Cli, Command, GenerateArgs, Global, ModeArg, Problem, ProbemaxAction, SantaAction, Shape, SolveAction};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))?;
    let value = serde_json::from_str(&text).map_err(Error::from).with_context(|| format!("parsing {}", path.display()))?;
    Ok(value)
}

fn emit(global: &Global, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match &global.out {
        Some(path) => fs::write(path, text).map_err(Error::from)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn bad_input(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidInput(msg.into()).into()
}

fn reference<T: DeserializeOwned>(global: &Global, path: Option<&Path>, brute: impl FnOnce() -> Result<T>) -> Result<Mode<T>> {
    Ok(match (global.mode, path) {
        (ModeArg::Enumerate, _) => Mode::Enumerate { budget: global.budget },
        (ModeArg::OracleGuided, Some(p)) => Mode::OracleGuided(read_json(p)?),
        (ModeArg::OracleGuided, None) => Mode::OracleGuided(brute()?),
    })
}

fn solver_rng(global: &Global) -> StreamRng {
    stream(global.seed, &[u64::MAX])
}

/// JSON-friendly number: infinities become the string "inf".
pub fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Generate(args) => generate(g, &args),
        Command::Santa {
            action: SantaAction::Solve {
                instance,
                rho,
                delta,
                reference,
            },
        } => santa_solve(g, &instance, rho, delta, reference.as_deref()),
        Command::Prophets {
            action: SolveAction::Solve { instance, reference },
        } => emit(g, &prophets_solve(g, &read_json(&instance)?, reference.as_deref())?),
        Command::Probemax {
            action: ProbemaxAction::Solve { instance, k, r, reference },
        } => {
            let mut inst: ProbeMaxInstance = read_json(&instance)?;
            inst.k = k.unwrap_or(inst.k);
            inst.r = r.unwrap_or(inst.r);
            emit(g, &probemax_solve(g, &inst, reference.as_deref())?)
        }
        Command::Adaptive {
            action: SolveAction::Solve { instance, reference },
        } => emit(g, &adaptive_solve(g, &read_json(&instance)?, reference.as_deref())?),
        Command::Pandora {
            action: SolveAction::Solve { instance, reference },
        } => emit(g, &pandora_solve(g, &read_json(&instance)?, reference.as_deref())?),
        Command::Oracle { problem, instance } => emit(g, &oracle(problem, &instance)?),
        Command::Bench(args) => bench::run(g, &args),
    }
}

pub fn rv_shape(shape: &Shape) -> Result<RvShape> {
    let s = RvShape {
        max_atoms: shape.atoms,
        max_value: shape.max_value,
        denominator: shape.denominator,
    };
    s.validate()?;
    Ok(s)
}

/// One random instance of `problem` as JSON.
pub fn instance_json(problem: Problem, shape: &Shape, rng: &mut StreamRng) -> Result<Value> {
    if shape.n == 0 {
        return Err(bad_input("n must be at least 1"));
    }
    if problem == Problem::Santa {
        if shape.m == 0 || !(shape.rho >= 1.0) {
            return Err(bad_input("planted instances need m >= 1 and rho >= 1"));
        }
        let (inst, hidden) = planted_instance(shape.m, shape.d, shape.n, shape.rho, rng);
        return Ok(json!({ "instance": inst, "hidden": hidden }));
    }
    let rvs = random_rvs(shape.n, &rv_shape(shape)?, rng);
    Ok(match problem {
        Problem::Prophets => serde_json::to_value(ProphetInstance::new(rvs)?)?,
        Problem::Probemax => serde_json::to_value(ProbeMaxInstance::new(rvs, shape.k, 1)?)?,
        Problem::Topr => serde_json::to_value(ProbeMaxInstance::new(rvs, shape.k, shape.r)?)?,
        Problem::Adaptive => serde_json::to_value(AdaptiveInstance::new(rvs, shape.k)?)?,
        Problem::Pandora => {
            if !(shape.max_cost >= 0.0) {
                return Err(bad_input("max cost must be non-negative"));
            }
            let costs = random_costs(shape.n, shape.max_cost, rng);
            serde_json::to_value(PandoraInstance::new(rvs, costs)?)?
        }
        Problem::Santa => unreachable!(),
    })
}

fn problem_name(problem: Problem) -> &'static str {
    match problem {
        Problem::Santa => "santa",
        Problem::Prophets => "prophets",
        Problem::Probemax => "probemax",
        Problem::Topr => "topr",
        Problem::Adaptive => "adaptive",
        Problem::Pandora => "pandora",
    }
}

fn generate(g: &Global, args: &GenerateArgs) -> Result<()> {
    let dir = g.out.clone().unwrap_or_else(|| ".".into());
    fs::create_dir_all(&dir).map_err(Error::from)?;
    for i in 0..args.count {
        let value = instance_json(args.problem, &args.shape, &mut stream(g.seed, &[i as u64]))?;
        let path = dir.join(format!("{}-{i:03}.json", problem_name(args.problem)));
        fs::write(&path, serde_json::to_string_pretty(&value)? + "\n").map_err(Error::from)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn santa_solve(g: &Global, path: &Path, rho: f64, delta: Option<f64>, reference: Option<&Path>) -> Result<()> {
    let raw: Value = read_json(path)?;
    // Accept both a bare instance and the generator's {instance, hidden} wrapper.
    let (inst, hidden): (SantaInstance, Option<Assignment>) = match raw.get("instance") {
        Some(inner) => (
            serde_json::from_value(inner.clone()).map_err(Error::from)?,
            raw.get("hidden").map(|h| serde_json::from_value(h.clone())).transpose().map_err(Error::from)?,
        ),
        None => (serde_json::from_value(raw).map_err(Error::from)?, None),
    };
    inst.validate()?;
    let mode = match g.mode {
        ModeArg::Enumerate => Mode::Enumerate { budget: g.budget },
        ModeArg::OracleGuided => match (reference, hidden) {
            (Some(p), _) => Mode::OracleGuided(read_json(p)?),
            (None, Some(h)) => Mode::OracleGuided(h),
            (None, None) => return Err(bad_input("oracle-guided mode needs --reference")),
        },
    };
    let mut params = SantaParams::new(g.eps, rho);
    params.delta = delta;
    params.retries = g.retries;
    let out = santa_claus::solve(&inst, &params, &mode, &mut solver_rng(g))?;
    let report = verify(&inst, &out.assignment, g.eps);
    emit(
        g,
        &json!({
            "assignment": out.assignment,
            "verified": report.passed(),
            "min_normalized_load": number(report.min_normalized_load()),
            "guesses_tried": out.guesses_tried,
            "roundings": out.roundings,
        }),
    )
}

pub fn prophets_solve(g: &Global, inst: &ProphetInstance, reference_path: Option<&Path>) -> Result<Value> {
    let mode = reference(g, reference_path, || Ok(brute_prophets(inst, &OracleBudget::default())?.0))?;
    let mut params = ProphetParams::new(g.eps);
    params.retries = g.retries;
    let out = prophets::solve(inst, &params, &mode, &mut solver_rng(g))?;
    let opt = brute_prophets(inst, &OracleBudget::default()).ok().map(|o| o.1);
    Ok(json!({
        "permutation": out.permutation,
        "value": out.value,
        "baseline_value": out.baseline_value,
        "opt_if_bruteforced": opt,
        "fallback": out.fallback,
        "guesses_evaluated": out.guesses_evaluated,
    }))
}

pub fn probemax_solve(g: &Global, inst: &ProbeMaxInstance, reference_path: Option<&Path>) -> Result<Value> {
    inst.validate()?;
    let eps = g.eps;
    let budget = OracleBudget::default();
    let mut rng = solver_rng(g);
    if inst.r == 1 {
        let mode = reference(g, reference_path, || Ok(brute_probemax(inst, &budget)?.0))?;
        let mut params = ProbeMaxParams::new(eps);
        params.retries = g.retries;
        let out = probemax::solve_nonadaptive(inst, &params, &mode, &mut rng)?;
        let equivalent = out
            .guess
            .as_ref()
            .map(|(guess, disc)| probemax::verify_cdf_equivalent(disc, &out.subset, guess));
        return Ok(json!({
            "subset": out.subset,
            "exact_value": out.value,
            "baseline": out.baseline_value,
            "fallback": out.fallback,
            "cdf_equivalent": equivalent,
        }));
    }
    let r = inst.r as f64;
    if r > eps.powi(-3) + 1e-9 {
        let out = probemax::solve_topr_large(inst, eps, &mut rng)?;
        return Ok(json!({
            "regime": "lp-rounding",
            "subset": out.subset,
            "exact_value": out.exact_value,
            "mc_value": { "mean": out.mc_value.0, "half_width_95": out.mc_value.1 },
            "baseline": greedy_topr(inst),
            "lp_value": out.lp_value,
            "attempts": out.attempts,
        }));
    }
    if inst.k as f64 > eps.powi(-4) + 1e-9 {
        let mode = g.mode;
        let guesses = g.budget;
        let retries = g.retries;
        let subset = probemax::solve_topr_partition(
            inst,
            eps,
            |part, rng| {
                let part_mode = match mode {
                    ModeArg::Enumerate => Mode::Enumerate { budget: guesses },
                    ModeArg::OracleGuided => Mode::OracleGuided(brute_probemax(part, &budget)?.0),
                };
                let mut params = ProbeMaxParams::new(eps);
                params.retries = retries;
                Ok(probemax::solve_nonadaptive(part, &params, &part_mode, rng)?.subset)
            },
            &mut rng,
        )?;
        let value = expected_top_r(&inst.subset_rvs(&subset), inst.r);
        return Ok(json!({ "regime": "partition", "subset": subset, "exact_value": value, "baseline": greedy_topr(inst) }));
    }
    if g.mode != ModeArg::OracleGuided {
        return Err(Error::WrongRegime("small r and small k are only supported in oracle-guided mode".into()).into());
    }
    let s_star: Vec<usize> = match reference_path {
        Some(p) => read_json(p)?,
        None => brute_topr(inst, &budget)?.0,
    };
    let (subset, value) = probemax::solve_topr_oracle(inst, eps, eps, &s_star, g.retries, &mut rng)?;
    Ok(json!({ "regime": "per-slot", "subset": subset, "exact_value": value, "baseline": greedy_topr(inst) }))
}

pub fn adaptive_solve(g: &Global, inst: &AdaptiveInstance, reference_path: Option<&Path>) -> Result<Value> {
    if g.mode != ModeArg::OracleGuided {
        return Err(bad_input("adaptive solving runs in oracle-guided mode only"));
    }
    let reference: BlockPolicy = match reference_path {
        Some(p) => read_json(p)?,
        None => brute_force_adaptive(inst, &OracleBudget::default())?.1,
    };
    let mut params = AdaptiveParams::new(g.eps);
    params.retries = g.retries;
    let out = adaptive::solve_adaptive(inst, &params, &Mode::OracleGuided(reference), &mut solver_rng(g))?;
    Ok(json!({
        "policy": out.policy,
        "value": out.value,
        "reference_value": out.reference_value,
        "cdf_equivalent": out.cdf_equivalent,
    }))
}

pub fn pandora_solve(g: &Global, inst: &PandoraInstance, reference_path: Option<&Path>) -> Result<Value> {
    inst.validate()?;
    let mode: Mode<Permutation> = reference(g, reference_path, || {
        let capped = cap_variables(inst)?;
        if capped.rvs.is_empty() {
            return Ok(Permutation::identity(0));
        }
        Ok(brute_prophets(&ProphetInstance::new(capped.rvs)?, &OracleBudget::default())?.0)
    })?;
    let mut params = ProphetParams::new(g.eps);
    params.retries = g.retries;
    let out = pandora::solve(inst, &params, &mode, &mut solver_rng(g))?;
    let dropped: Vec<usize> = (0..inst.n()).filter(|&i| out.capped.kappas[i].is_none()).collect();
    let kappas: Vec<Value> = out.capped.kappas.iter().map(|k| k.map_or(Value::Null, number)).collect();
    Ok(json!({
        "policy": out.policy,
        "utility": out.utility,
        "prophet_value": out.prophet_value,
        "kappas": kappas,
        "dropped": dropped,
    }))
}

fn oracle(problem: Problem, path: &Path) -> Result<Value> {
    let budget = OracleBudget::default();
    Ok(match problem {
        Problem::Prophets => {
            let (sigma, value) = brute_prophets(&read_json(path)?, &budget)?;
            json!({ "permutation": sigma, "value": value })
        }
        Problem::Probemax => {
            let inst: ProbeMaxInstance = read_json(path)?;
            inst.validate()?;
            let (subset, value) = brute_probemax(&inst, &budget)?;
            json!({ "subset": subset, "value": value })
        }
        Problem::Topr => {
            let inst: ProbeMaxInstance = read_json(path)?;
            inst.validate()?;
            let (subset, value) = brute_topr(&inst, &budget)?;
            json!({ "subset": subset, "value": value })
        }
        Problem::Adaptive => {
            let (value, policy) = brute_force_adaptive(&read_json(path)?, &budget)?;
            json!({ "policy": policy, "value": value })
        }
        Problem::Pandora => {
            let (policy, value) = brute_force_pandora(&read_json(path)?, &budget)?;
            json!({ "policy": policy, "value": value })
        }
        Problem::Santa => bail!(bad_input("no exhaustive oracle for santa instances")),
    })
}

/// Best non-adaptive top-r value of the greedy subset, the baseline column for top-r rows.
pub fn greedy_topr(inst: &ProbeMaxInstance) -> f64 {
    let (subset, _) = greedy_baseline(inst);
    expected_top_r(&inst.subset_rvs(&subset), inst.r)
}
