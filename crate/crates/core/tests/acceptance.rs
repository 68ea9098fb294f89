//! End-to-end acceptance criteria. Run with
//! `cargo test --test acceptance -- --nocapture` to see one line per criterion.

use std::time::Instant;

use itertools::Itertools;
use rand::Rng;

use eptas_core::adaptive::{self, AdaptiveInstance, AdaptiveParams};
use eptas_core::distributions::{expected_max_or_zero, DiscreteRV};
use eptas_core::generate::{random_costs, random_rvs, RvShape};
use eptas_core::oracle::{brute_force_adaptive, brute_force_pandora, brute_probemax, brute_prophets, brute_topr, OracleBudget};
use eptas_core::pandora::{self, evaluate_commit, PandoraInstance};
use eptas_core::probemax::{self, build_topr_lp, expected_pick_count, ProbeMaxInstance, ProbeMaxParams};
use eptas_core::prophets::{self, prophet_baseline, schedule_of, stopping_value, Permutation, ProphetInstance, ProphetParams};
use eptas_core::rng::stream;
use eptas_core::rounding::{dependent_round, verify_degree_preservation, BipartiteFractional};
use eptas_core::santa_claus::{self, build_strong_lp, planted_instance, round_lp, verify, SantaParams};
use eptas_core::Mode;

struct Report {
    lines: Vec<(String, bool)>,
}

impl Report {
    fn record(&mut self, id: usize, pass: bool, detail: String) {
        let line = format!("AC{id:<2} {} {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((line, pass));
    }
}

fn shape(max_atoms: usize) -> RvShape {
    RvShape {
        max_atoms,
        max_value: 10,
        denominator: 8,
    }
}

/// Value of the threshold rule along `order` by walking every joint outcome.
fn stopping_by_enumeration(rvs: &[DiscreteRV], order: &[usize]) -> f64 {
    let seq: Vec<&DiscreteRV> = order.iter().map(|&i| &rvs[i]).collect();
    let r = schedule_of(&seq).values;
    let mut total = 0.0;
    for outcome in seq.iter().map(|rv| rv.atoms().iter()).multi_cartesian_product() {
        let prob: f64 = outcome.iter().map(|a| a.prob).product();
        let claimed = (0..seq.len()).find(|&t| outcome[t].value >= r[t + 1]).map_or(0.0, |t| outcome[t].value);
        total += prob * claimed;
    }
    total
}

fn ac1(report: &mut Report) {
    let start = Instant::now();
    let x = [
        [0.5, 0.25, 0.0, 0.75, 0.1],
        [0.3, 0.5, 0.9, 0.0, 0.2],
        [0.0, 0.6, 0.4, 0.35, 0.5],
        [1.0, 0.0, 0.15, 0.45, 0.3],
        [0.2, 0.65, 0.05, 0.5, 0.0],
    ];
    let edges: Vec<(usize, usize, f64)> = (0..5).flat_map(|l| (0..5).map(move |r| (l, r, x[l][r]))).collect();
    let graph = BipartiteFractional::new(5, 5, edges.clone()).unwrap();
    let seeds = 10_000u64;
    let mut hits = vec![0u32; edges.len()];
    for s in 0..seeds {
        for e in dependent_round(&graph, &mut stream(s, &[1])).chosen {
            hits[e] += 1;
        }
    }
    let worst = edges
        .iter()
        .zip(&hits)
        .map(|(e, &h)| (h as f64 / seeds as f64 - e.2).abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    report.record(
        1,
        worst <= 0.02 && secs < 5.0,
        format!("max |freq - x| = {worst:.4} over {seeds} seeds in {secs:.2}s"),
    );
}

fn ac2(report: &mut Report) {
    let runs = 10_000u64;
    let mut ok = 0;
    for s in 0..runs {
        let mut rng = stream(s, &[2]);
        let left = rng.gen_range(1..=10);
        let right = rng.gen_range(1..=20 - left);
        let mut edges = Vec::new();
        for l in 0..left {
            for r in 0..right {
                if rng.gen::<f64>() < 0.5 {
                    edges.push((l, r, rng.gen::<f64>()));
                }
            }
        }
        let graph = BipartiteFractional::new(left, right, edges).unwrap();
        if verify_degree_preservation(&graph, &dependent_round(&graph, &mut rng)) {
            ok += 1;
        }
    }
    report.record(2, ok == runs, format!("{ok}/{runs} runs preserve degrees"));
}

fn ac3(report: &mut Report) {
    let mut worst = 0.0f64;
    for s in 0..200u64 {
        let mut rng = stream(s, &[3]);
        let n = rng.gen_range(1..=5);
        let inst = ProphetInstance::new(random_rvs(n, &shape(3), &mut rng)).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let (_, dp) = stopping_value(&inst, &Permutation::new(order.clone()).unwrap());
        worst = worst.max((dp - stopping_by_enumeration(&inst.rvs, &order)).abs());
    }
    report.record(3, worst <= 1e-9, format!("max |DP - enumeration| = {worst:.2e} on 200 instances"));
}

fn ac4(report: &mut Report) {
    let mut violations = 0;
    let mut min_ratio = f64::INFINITY;
    for s in 0..500u64 {
        let mut rng = stream(s, &[4]);
        let n = rng.gen_range(1..=8);
        let inst = ProphetInstance::new(random_rvs(n, &shape(3), &mut rng)).unwrap();
        let refs: Vec<&DiscreteRV> = inst.rvs.iter().collect();
        let emax = expected_max_or_zero(&refs);
        let base = prophet_baseline(&inst);
        let exact = stopping_by_threshold(&inst.rvs, base.threshold);
        if exact < 0.5 * emax - 1e-12 || (exact - base.value).abs() > 1e-9 {
            violations += 1;
        }
        if emax > 0.0 {
            min_ratio = min_ratio.min(exact / emax);
        }
    }
    report.record(
        4,
        violations == 0,
        format!("{violations} violations on 500 instances, min baseline / E[max] = {min_ratio:.4}"),
    );
}

/// Single-threshold rule along the identity order, by enumeration.
fn stopping_by_threshold(rvs: &[DiscreteRV], threshold: f64) -> f64 {
    let mut total = 0.0;
    for outcome in rvs.iter().map(|rv| rv.atoms().iter()).multi_cartesian_product() {
        let prob: f64 = outcome.iter().map(|a| a.prob).product();
        total += prob * outcome.iter().find(|a| a.value >= threshold).map_or(0.0, |a| a.value);
    }
    total
}

fn ac5(report: &mut Report) {
    let start = Instant::now();
    let budget = OracleBudget::default();
    let mut min_ratio = f64::INFINITY;
    let mut fallbacks = 0;
    for s in 0..50u64 {
        let mut rng = stream(s, &[5]);
        let n = rng.gen_range(2..=7);
        let inst = ProphetInstance::new(random_rvs(n, &shape(3), &mut rng)).unwrap();
        let (sigma, opt) = brute_prophets(&inst, &budget).unwrap();
        let out = prophets::solve(&inst, &ProphetParams::new(0.1), &Mode::OracleGuided(sigma), &mut stream(s, &[5, 1])).unwrap();
        fallbacks += out.fallback as usize;
        min_ratio = min_ratio.min(if opt > 0.0 { out.value / opt } else { 1.0 });
    }
    let secs = start.elapsed().as_secs_f64();
    report.record(
        5,
        min_ratio >= 0.3 && secs < 120.0,
        format!("min ratio {min_ratio:.4} (bound 0.3), {fallbacks} fallbacks, {secs:.1}s"),
    );
}

fn ac6(report: &mut Report) {
    let start = Instant::now();
    let budget = OracleBudget::default();
    let mut min_ratio = f64::INFINITY;
    let mut not_equivalent = 0;
    let mut fallbacks = 0;
    let mut dims = 0;
    for s in 0..50u64 {
        let mut rng = stream(s, &[6]);
        let n = rng.gen_range(2..=10);
        let k = rng.gen_range(1..=4.min(n));
        let inst = ProbeMaxInstance::new(random_rvs(n, &shape(3), &mut rng), k, 1).unwrap();
        let (s_star, opt) = brute_probemax(&inst, &budget).unwrap();
        let out = probemax::solve_nonadaptive(&inst, &ProbeMaxParams::new(0.1), &Mode::OracleGuided(s_star), &mut stream(s, &[6, 1])).unwrap();
        let equivalent = match &out.guess {
            Some((guess, disc)) => probemax::verify_cdf_equivalent(disc, &out.subset, guess),
            None => out.subset.len() == n.min(k) && k >= n,
        };
        not_equivalent += !equivalent as usize;
        fallbacks += out.fallback as usize;
        dims += out.guess.as_ref().map_or(0, |g| g.0.critical_len());
        min_ratio = min_ratio.min(if opt > 0.0 { out.value / opt } else { 1.0 });
    }
    let secs = start.elapsed().as_secs_f64();
    report.record(
        6,
        min_ratio >= 0.77 && not_equivalent == 0 && fallbacks == 0 && secs < 300.0,
        format!("min ratio {min_ratio:.4} (bound 0.77), {not_equivalent} outputs not CDF-equivalent, {fallbacks} fallbacks, {dims} critical values in total, {secs:.1}s"),
    );
}

fn ac7(report: &mut Report) {
    let eps_out = 0.2;
    let mut solved = 0;
    let mut attempts = 0usize;
    let mut attempt_passes = 0usize;
    for s in 0..50u64 {
        let mut rng = stream(s, &[7]);
        let m = rng.gen_range(1..=3);
        let d = rng.gen_range(1..=3);
        let n = rng.gen_range(5..=40);
        let rho = rng.gen_range(1.0..=10.0);
        let (inst, hidden) = planted_instance(m, d, n, rho, &mut rng);
        let params = SantaParams::new(eps_out, rho);
        if let Ok(out) = santa_claus::solve(&inst, &params, &Mode::OracleGuided(hidden.clone()), &mut stream(s, &[7, 1])) {
            if verify(&inst, &out.assignment, eps_out).passed() {
                solved += 1;
            }
        }
        let norm = inst.normalize();
        let eps = params.inner_epsilon();
        let guess = santa_claus::guess_from_reference(&norm, &hidden, eps, rho, params.delta_for(&norm)).unwrap();
        let strong = build_strong_lp(&norm, &guess, eps).unwrap();
        let sol = strong.lp.solve();
        for a in 0..20u64 {
            attempts += 1;
            let asg = round_lp(&strong, &sol, &mut stream(s, &[7, 2, a]));
            attempt_passes += verify(&norm, &asg, eps_out).passed() as usize;
        }
    }
    let freq = attempt_passes as f64 / attempts as f64;
    report.record(
        7,
        solved >= 49 && freq >= 0.5,
        format!("{solved}/50 planted instances verified, per-attempt success {freq:.3}"),
    );
}

fn ac8(report: &mut Report) {
    let budget = OracleBudget::default();
    let mut claim62 = 0;
    let mut claim63 = 0;
    let mut zero_cost = 0;
    for s in 0..100u64 {
        let mut rng = stream(s, &[8]);
        let n = rng.gen_range(1..=5);
        let rvs = random_rvs(n, &shape(3), &mut rng);
        let costs = random_costs(n, 3.0, &mut rng);
        let inst = PandoraInstance::new(rvs.clone(), costs).unwrap();
        let capped = pandora::cap_variables(&inst).unwrap();
        let (_, opt_pandora) = brute_force_pandora(&inst, &budget).unwrap();
        let opt_y = if capped.rvs.is_empty() {
            0.0
        } else {
            brute_prophets(&ProphetInstance::new(capped.rvs.clone()).unwrap(), &budget).unwrap().1
        };
        claim62 += (opt_y < opt_pandora - 1e-9) as usize;

        let params = ProphetParams::new(0.1);
        let out = pandora::solve(&inst, &params, &Mode::Enumerate { budget: 16 }, &mut stream(s, &[8, 1])).unwrap();
        let retained: Vec<&DiscreteRV> = out
            .policy
            .order
            .iter()
            .map(|&i| &capped.rvs[capped.retained.iter().position(|&r| r == i).unwrap()])
            .collect();
        let retained_value = schedule_of(&retained).values[0];
        let utility = evaluate_commit(&inst, &out.policy).unwrap();
        let monotone = out.policy.thresholds.windows(2).all(|w| w[0] >= w[1]);
        let capped_ok = out.policy.order.iter().zip(&out.policy.thresholds).all(|(&i, &t)| t <= capped.kappas[i].unwrap());
        claim63 += (utility < retained_value - 1e-9 || !monotone || !capped_ok) as usize;

        let free = PandoraInstance::new(rvs.clone(), vec![0.0; n]).unwrap();
        let a = pandora::solve(&free, &params, &Mode::Enumerate { budget: 16 }, &mut stream(s, &[8, 2])).unwrap();
        let b = prophets::solve(&ProphetInstance::new(rvs).unwrap(), &params, &Mode::Enumerate { budget: 16 }, &mut stream(s, &[8, 2])).unwrap();
        zero_cost += (a.utility.to_bits() != b.value.to_bits() || a.policy.order != b.permutation.order) as usize;
    }
    report.record(
        8,
        claim62 == 0 && claim63 == 0 && zero_cost == 0,
        format!("100 instances: {claim62} capped-prophet bound violations, {claim63} conversion violations, {zero_cost} zero-cost mismatches"),
    );
}

fn ac9(report: &mut Report) {
    let mut worst = 0.0f64;
    let mut pairs = 0;
    let mut s = 0u64;
    while pairs < 1000 {
        let mut rng = stream(s, &[9]);
        s += 1;
        let rv = random_rvs(1, &shape(4), &mut rng).remove(0);
        if rv.mean() <= 0.0 {
            continue;
        }
        let cost = rng.gen_range(0.0..=rv.mean());
        if cost == 0.0 {
            continue;
        }
        let kappa = rv.weitzman_index(cost).unwrap();
        let residual = (rv.expected_excess(kappa) - cost).abs();
        worst = worst.max(residual);
        pairs += 1;
    }
    report.record(9, worst <= 1e-9, format!("max residual {worst:.2e} on 1000 pairs"));
}

fn ac10(report: &mut Report) {
    let budget = OracleBudget::default();
    let mut worst = f64::INFINITY;
    for s in 0..100u64 {
        let mut rng = stream(s, &[10]);
        let n = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=n);
        let r = rng.gen_range(1..=k);
        let inst = ProbeMaxInstance::new(random_rvs(n, &shape(3), &mut rng), k, r).unwrap();
        let lp = build_topr_lp(&inst).lp.solve();
        let (_, opt) = brute_topr(&inst, &budget).unwrap();
        worst = worst.min(lp.objective_value - opt);
    }
    report.record(10, worst >= -1e-7, format!("min (LP - OPT) = {worst:.3e} on 100 instances"));
}

fn ac11(report: &mut Report) {
    let eps = 0.5;
    let mut rng = stream(0, &[11]);
    let inst = ProbeMaxInstance::new(random_rvs(40, &shape(3), &mut rng), 20, 9).unwrap();
    let topr = build_topr_lp(&inst);
    let sol = topr.lp.solve();
    let picks = expected_pick_count(&topr, &sol, eps);
    let limit = (1.0 - eps * eps) * inst.r as f64;
    let mut within = 0;
    for s in 0..100u64 {
        if let Ok(out) = probemax::solve_topr_large(&inst, eps, &mut stream(s, &[11, 1])) {
            within += (out.subset.len() <= inst.k) as usize;
        }
    }
    report.record(
        11,
        within >= 99 && picks <= limit + 1e-9,
        format!("{within}/100 seeds within k, expected picks {picks:.4} <= {limit:.4}"),
    );
}

fn ac12(report: &mut Report) {
    let budget = OracleBudget::default();
    let mut failures = 0;
    let mut worst_eval = 0.0f64;
    let mut gaps = Vec::new();
    for s in 0..20u64 {
        let mut rng = stream(s, &[12]);
        let n = rng.gen_range(2..=5);
        let k = rng.gen_range(1..=2);
        let rvs = random_rvs(n, &RvShape { max_atoms: 2, ..shape(2) }, &mut rng);
        let inst = AdaptiveInstance::new(rvs, k).unwrap();
        let (opt, reference) = brute_force_adaptive(&inst, &budget).unwrap();
        let mut params = AdaptiveParams::new(0.1);
        params.phi = 0.0;
        match adaptive::solve_adaptive(&inst, &params, &Mode::OracleGuided(reference), &mut stream(s, &[12, 1])) {
            Ok(out) => {
                let enumerated = adaptive::evaluate_by_enumeration(&inst, &out.policy, &budget).unwrap();
                worst_eval = worst_eval.max((enumerated - out.value).abs());
                if !adaptive::feasibility_check(&out.policy, k) || !out.cdf_equivalent {
                    failures += 1;
                }
                gaps.push(if opt > 0.0 { out.value / opt } else { 1.0 });
            }
            Err(_) => failures += 1,
        }
    }
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
    report.record(
        12,
        failures == 0 && worst_eval <= 1e-9,
        format!("{failures} failures, max |eval - enumeration| = {worst_eval:.2e}, value / OPT min {min_gap:.4} mean {mean_gap:.4}"),
    );
}

#[test]
fn acceptance() {
    let mut report = Report { lines: Vec::new() };
    ac1(&mut report);
    ac2(&mut report);
    ac3(&mut report);
    ac4(&mut report);
    ac5(&mut report);
    ac6(&mut report);
    ac7(&mut report);
    ac8(&mut report);
    ac9(&mut report);
    ac10(&mut report);
    ac11(&mut report);
    ac12(&mut report);
    let failed: Vec<&String> = report.lines.iter().filter(|l| !l.1).map(|l| &l.0).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
