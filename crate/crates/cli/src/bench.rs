use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;
use serde_json::Value;

use eptas_core::adaptive::AdaptiveInstance;
use eptas_core::oracle::{brute_force_adaptive, brute_force_pandora, brute_probemax, brute_prophets, brute_topr, OracleBudget};
use eptas_core::pandora::PandoraInstance;
use eptas_core::probemax::{greedy_baseline, ProbeMaxInstance};
use eptas_core::prophets::{prophet_baseline, ProphetInstance};
use eptas_core::rng::stream;
use eptas_core::santa_claus::{self, check_rho_feasible, verify, Assignment, SantaInstance, SantaParams};
use eptas_core::{Error, Mode};

use crate::commands::{adaptive_solve, greedy_topr, instance_json, pandora_solve, probemax_solve, prophets_solve};
use crate::{BenchArgs, Global, ModeArg, Problem};

#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub instance_id: usize,
    pub seed: u64,
    pub algorithm_value: Option<f64>,
    pub oracle_value: Option<f64>,
    pub baseline_value: Option<f64>,
    pub ratio: Option<f64>,
    pub baseline_ratio: Option<f64>,
    pub wall_ms: f64,
    pub error: Option<String>,
}

struct Measured {
    algorithm: f64,
    oracle: Option<f64>,
    baseline: Option<f64>,
}

fn ratio(value: f64, oracle: f64) -> f64 {
    if oracle > 0.0 {
        value / oracle
    } else {
        1.0
    }
}

fn field(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or(f64::NAN)
}

fn measure(g: &Global, problem: Problem, instance: Value, with_oracle: bool) -> Result<Measured> {
    let budget = OracleBudget::default();
    Ok(match problem {
        Problem::Prophets => {
            let inst: ProphetInstance = serde_json::from_value(instance)?;
            let oracle = with_oracle.then(|| brute_prophets(&inst, &budget)).transpose()?;
            let out = prophets_solve(g, &inst, None)?;
            Measured {
                algorithm: field(&out, "value"),
                oracle: oracle.map(|o| o.1),
                baseline: Some(prophet_baseline(&inst).value),
            }
        }
        Problem::Probemax | Problem::Topr => {
            let inst: ProbeMaxInstance = serde_json::from_value(instance)?;
            let oracle = if !with_oracle {
                None
            } else if inst.r == 1 {
                Some(brute_probemax(&inst, &budget)?.1)
            } else {
                Some(brute_topr(&inst, &budget)?.1)
            };
            let out = probemax_solve(g, &inst, None)?;
            let baseline = if inst.r == 1 { greedy_baseline(&inst).1 } else { greedy_topr(&inst) };
            Measured {
                algorithm: field(&out, "exact_value"),
                oracle,
                baseline: Some(baseline),
            }
        }
        Problem::Adaptive => {
            let inst: AdaptiveInstance = serde_json::from_value(instance)?;
            let oracle = with_oracle.then(|| brute_force_adaptive(&inst, &budget)).transpose()?;
            let mut gg = g.clone();
            gg.mode = ModeArg::OracleGuided;
            let out = adaptive_solve(&gg, &inst, None)?;
            let greedy = ProbeMaxInstance::new(inst.rvs.clone(), inst.k.max(1).min(inst.n()), 1)?;
            Measured {
                algorithm: field(&out, "value"),
                oracle: oracle.map(|o| o.0),
                baseline: Some(greedy_baseline(&greedy).1),
            }
        }
        Problem::Pandora => {
            let inst: PandoraInstance = serde_json::from_value(instance)?;
            let oracle = with_oracle.then(|| brute_force_pandora(&inst, &budget)).transpose()?;
            let out = pandora_solve(g, &inst, None)?;
            Measured {
                algorithm: field(&out, "utility"),
                oracle: oracle.map(|o| o.1),
                baseline: None,
            }
        }
        Problem::Santa => {
            let inst: SantaInstance = serde_json::from_value(instance["instance"].clone())?;
            let hidden: Assignment = serde_json::from_value(instance["hidden"].clone())?;
            let rho = hidden_rho(&inst, &hidden);
            let mode = match g.mode {
                ModeArg::Enumerate => Mode::Enumerate { budget: g.budget },
                ModeArg::OracleGuided => Mode::OracleGuided(hidden),
            };
            let mut params = SantaParams::new(g.eps, rho);
            params.retries = g.retries;
            let out = santa_claus::solve(&inst, &params, &mode, &mut stream(g.seed, &[u64::MAX]))?;
            let report = verify(&inst, &out.assignment, g.eps);
            if !report.passed() {
                return Err(Error::Infeasible.into());
            }
            Measured {
                algorithm: report.min_normalized_load(),
                oracle: None,
                baseline: None,
            }
        }
    })
}

/// Smallest power of two at least 1 under which the hidden assignment is rho-feasible.
fn hidden_rho(inst: &SantaInstance, hidden: &Assignment) -> f64 {
    let mut rho = 1.0;
    while !check_rho_feasible(inst, hidden, rho) && rho < 1e6 {
        rho *= 2.0;
    }
    rho
}

pub fn rows(g: &Global, args: &BenchArgs) -> Vec<ResultRow> {
    (0..args.count)
        .map(|i| {
            let start = Instant::now();
            let measured = instance_json(args.problem, &args.shape, &mut stream(g.seed, &[i as u64]))
                .and_then(|inst| measure(g, args.problem, inst, !args.no_oracle));
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            match measured {
                Ok(m) => ResultRow {
                    instance_id: i,
                    seed: g.seed,
                    algorithm_value: Some(m.algorithm),
                    oracle_value: m.oracle,
                    baseline_value: m.baseline,
                    ratio: m.oracle.map(|o| ratio(m.algorithm, o)),
                    baseline_ratio: m.oracle.zip(m.baseline).map(|(o, b)| ratio(b, o)),
                    wall_ms,
                    error: None,
                },
                Err(e) => ResultRow {
                    instance_id: i,
                    seed: g.seed,
                    algorithm_value: None,
                    oracle_value: None,
                    baseline_value: None,
                    ratio: None,
                    baseline_ratio: None,
                    wall_ms,
                    error: Some(format!("{e:#}")),
                },
            }
        })
        .collect()
}

fn csv_text(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "instance_id",
            "seed",
            "algorithm_value",
            "oracle_value",
            "baseline_value",
            "ratio",
            "baseline_ratio",
            "wall_ms",
            "error",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn summary(label: &str, values: &[f64]) -> String {
    if values.is_empty() {
        return format!("| {label} | 0 | - | - |\n");
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    format!("| {label} | {} | {min:.4} | {mean:.4} |\n", values.len())
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

pub fn markdown(problem: Problem, rows: &[ResultRow]) -> String {
    let mut out = format!("# bench: {problem:?}\n\n");
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let baseline: Vec<f64> = rows.iter().filter_map(|r| r.baseline_ratio).collect();
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    out.push_str("| ratio | rows | min | mean |\n|---|---|---|---|\n");
    out.push_str(&summary("solver / oracle", &ratios));
    out.push_str(&summary("baseline / oracle", &baseline));
    let _ = writeln!(out, "\n{} instances, {errors} errors\n", rows.len());
    out.push_str("| id | solver | oracle | baseline | ratio | ms | error |\n|---|---|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {:.1} | {} |",
            r.instance_id,
            cell(r.algorithm_value),
            cell(r.oracle_value),
            cell(r.baseline_value),
            cell(r.ratio),
            r.wall_ms,
            r.error.as_deref().unwrap_or("")
        );
    }
    out
}

pub fn run(g: &Global, args: &BenchArgs) -> Result<()> {
    let rows = rows(g, args);
    let csv = csv_text(&rows)?;
    let md = markdown(args.problem, &rows);
    match &g.out {
        Some(prefix) => {
            if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(Error::from)?;
            }
            fs::write(prefix.with_extension("csv"), csv).map_err(Error::from)?;
            fs::write(prefix.with_extension("md"), &md).map_err(Error::from)?;
            print!("{md}");
        }
        None => print!("{csv}\n{md}"),
    }
    Ok(())
}
