//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
//!
//! Built without the test harness so the report is always printed. The slow
//! population experiments take a few minutes.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use trustdyn_core::clustering::{cluster_typology, compute_features, label_purity, FeatureVector, KChoice};
use trustdyn_core::datagen::{
    default_generating_prior, generate_population, simulate_bayesian_agent, simulate_robot, Archetype,
    Population, PopulationSpec,
};
use trustdyn_core::evaluation::{
    build_schedule, compare_models, leave_one_out, run_agent_eval, sweep_report_gap, sweep_training_duration,
    EvalConfig, ModelTag, ProposedPredictor, SweepRow, TrustPredictor,
};
use trustdyn_core::inference::{
    fit_theta_map, fit_theta_mle, map_objective, mle_objective, prior_mode, PopulationFits, THETA_LOWER,
    THETA_UPPER,
};
use trustdyn_core::model::{
    asymmetry_gap, asymptotic_trust, failure_dominates, predict_trust, trust_log_density, trust_trajectory,
    update_state, BetaState, Outcome,
};
use trustdyn_core::optimize::SearchConfig;
use trustdyn_core::{AgentRecord, Marginal, PriorModel, ThetaParams};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn thetas_from_prior(count: usize, seed: u64) -> Vec<ThetaParams> {
    let pop = generate_population(&PopulationSpec {
        n_agents: count,
        n_trials: 1,
        seed,
        ..PopulationSpec::default()
    })
    .unwrap();
    pop.labels.iter().map(|l| l.theta.unwrap()).collect()
}

fn bayesian_population() -> Population {
    generate_population(&PopulationSpec {
        seed: 2024,
        ..PopulationSpec::default()
    })
    .unwrap()
}

fn core_model_exactness() -> Verdict {
    let theta = ThetaParams::new(2.0, 2.0, 1.0, 2.0).unwrap();
    let traj = trust_trajectory(&theta, &[Outcome::Success, Outcome::Success, Outcome::Failure]).unwrap();
    let want = [3.0 / 5.0, 4.0 / 6.0, 4.0 / 8.0];
    let err = traj.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(err <= 1e-9, format!("trajectory {traj:.4?}, max error {err:.1e}"))
}

fn stabilization() -> Verdict {
    let thetas = thetas_from_prior(50, 77);
    let mut details = Vec::new();
    let mut ok = true;
    for (ri, r) in [0.7, 0.8, 0.9].into_iter().enumerate() {
        let mut hits = 0;
        for (i, theta) in thetas.iter().enumerate() {
            let outcomes = simulate_robot(r, 10_000, 1000 * ri as u64 + i as u64).unwrap();
            let last = *trust_trajectory(theta, &outcomes).unwrap().last().unwrap();
            if (last - asymptotic_trust(theta, r).unwrap()).abs() <= 0.02 {
                hits += 1;
            }
        }
        ok &= hits as f64 >= 0.95 * thetas.len() as f64;
        details.push(format!("r={r}: {hits}/50"));
    }
    check(ok, details.join(", "))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

fn asymmetry_consistency() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut disagree = 0;
    for _ in 0..10_000 {
        let state = BetaState::new(log_uniform(&mut rng, 1e-2, 1e3), log_uniform(&mut rng, 1e-2, 1e3)).unwrap();
        let theta = ThetaParams::from_array([
            1.0,
            1.0,
            log_uniform(&mut rng, THETA_LOWER, THETA_UPPER),
            log_uniform(&mut rng, THETA_LOWER, THETA_UPPER),
        ]);
        let t = predict_trust(&state);
        let rise = predict_trust(&update_state(state, Outcome::Success, &theta)) - t;
        let drop = t - predict_trust(&update_state(state, Outcome::Failure, &theta));
        let gap = asymmetry_gap(&state, &theta);
        let direct = rise - drop;
        if gap.signum() != direct.signum() || failure_dominates(&state, &theta) != (drop > rise) {
            disagree += 1;
        }
    }
    check(disagree == 0, format!("{} of 10000 points agree", 10_000 - disagree))
}

fn beta_density() -> Verdict {
    let closed: [(f64, f64, fn(f64) -> f64); 3] = [
        (1.0, 1.0, |_| 1.0),
        (2.0, 2.0, |t| 6.0 * t * (1.0 - t)),
        (2.0, 5.0, |t| 30.0 * t * (1.0 - t).powi(4)),
    ];
    let mut worst: f64 = 0.0;
    for (a, b, pdf) in closed {
        let state = BetaState::new(a, b).unwrap();
        for t in [0.05, 0.2, 0.5, 0.7, 0.95] {
            worst = worst.max((trust_log_density(t, &state) - pdf(t).ln()).abs());
        }
    }
    // Simpson's rule on 20000 panels
    let state = BetaState::new(50.0, 20.0).unwrap();
    let n = 20_000;
    let h = 1.0 / n as f64;
    let f = |i: usize| {
        let t = i as f64 * h;
        if i == 0 || i == n {
            0.0
        } else {
            trust_log_density(t, &state).exp()
        }
    };
    let integral = h / 3.0 * (1..n).map(|i| if i % 2 == 1 { 4.0 * f(i) } else { 2.0 * f(i) }).sum::<f64>();
    check(
        worst <= 1e-6 && (integral - 1.0).abs() <= 1e-3,
        format!("max log-density error {worst:.1e}, integral {integral:.6}"),
    )
}

fn grid_best(objective: impl Fn(&ThetaParams) -> f64) -> f64 {
    let (lo, hi) = (THETA_LOWER.ln(), THETA_UPPER.ln());
    let axis: Vec<f64> = (0..8).map(|i| (lo + (i as f64 + 0.5) * (hi - lo) / 8.0).exp()).collect();
    let mut best = f64::NEG_INFINITY;
    for &a in &axis {
        for &b in &axis {
            for &s in &axis {
                for &f in &axis {
                    best = best.max(objective(&ThetaParams::from_array([a, b, s, f])));
                }
            }
        }
    }
    best
}

fn optimizer_dominance() -> Verdict {
    let prior = default_generating_prior();
    let search = SearchConfig::default();
    let mut wins = 0;
    for (i, theta) in thetas_from_prior(50, 55).iter().enumerate() {
        let seed = 500 + i as u64;
        let outcomes = simulate_robot(0.8, 100, seed).unwrap();
        let rec = simulate_bayesian_agent("x", theta, &outcomes, seed + 1).unwrap();
        let mle = fit_theta_mle(&rec, &search).unwrap();
        let sparse = rec.filter_reports(|m| m <= 10 || m % 10 == 0);
        let map = fit_theta_map(&sparse, &prior, &search).unwrap();
        let mle_ok = mle.objective >= grid_best(|t| mle_objective(t, &rec).unwrap());
        let map_ok = map.objective >= grid_best(|t| map_objective(t, &sparse, &prior));
        if mle_ok && map_ok {
            wins += 1;
        }
    }
    check(wins == 50, format!("{wins}/50 records at or above the grid best"))
}

fn prior_mode_identity() -> Verdict {
    let priors = [
        default_generating_prior(),
        PriorModel::from_marginals([
            Marginal::gamma(0.6, 0.2).unwrap(),
            Marginal::gamma(3.0, 1.5).unwrap(),
            Marginal::gamma(1.0, 0.05).unwrap(),
            Marginal::gamma(9.0, 0.1).unwrap(),
        ]),
    ];
    let empty = AgentRecord::new("z", vec![Outcome::Success; 10], BTreeMap::new()).unwrap();
    let mut worst: f64 = 0.0;
    for prior in &priors {
        let fit = fit_theta_map(&empty, prior, &SearchConfig::default()).unwrap();
        let mode = prior_mode(prior);
        for (a, b) in fit.theta.to_array().iter().zip(mode.to_array()) {
            worst = worst.max((a.ln() - b.ln()).abs());
        }
    }
    check(worst <= 1e-6, format!("max log-space deviation {worst:.1e}"))
}

fn trajectory_recovery() -> Verdict {
    let search = SearchConfig::default();
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for (i, theta) in thetas_from_prior(50, 99).iter().enumerate() {
        let seed = 7000 + 2 * i as u64;
        let outcomes = simulate_robot(0.8, 500, seed).unwrap();
        let rec = simulate_bayesian_agent("x", theta, &outcomes, seed + 1).unwrap();
        let fit = fit_theta_mle(&rec, &search).unwrap();
        let e = rmse(
            &trust_trajectory(&fit.theta, &outcomes).unwrap(),
            &trust_trajectory(theta, &outcomes).unwrap(),
        );
        worst = worst.max(e);
        if e <= 0.03 {
            hits += 1;
        }
    }
    check(hits >= 45, format!("{hits}/50 seeds within 0.03, worst {worst:.4}"))
}

fn model_comparison(pop: &Population) -> Verdict {
    let search = SearchConfig::default();
    let config = EvalConfig::new(10, 10, 100).unwrap();
    let predictors: Vec<Box<dyn TrustPredictor>> = ModelTag::ALL.iter().map(|t| t.predictor(search)).collect();
    let refs: Vec<&dyn TrustPredictor> = predictors.iter().map(|p| p.as_ref()).collect();
    let cmp = compare_models(&pop.records, &config, &refs, &search).unwrap();
    let mean = |tag: &str| cmp.reports.iter().find(|r| r.model_tag == tag).unwrap().mean;
    let (p, a, o) = (mean("proposed"), mean("armav"), mean("optimo"));
    let detail = cmp
        .reports
        .iter()
        .map(|r| format!("{} {:.4} (sd {:.4})", r.model_tag, r.mean, r.sd))
        .collect::<Vec<_>>()
        .join(", ");
    check(p < a && p < o && p <= 0.10, detail)
}

// at most one step against `rising` and that one smaller than 0.005
fn monotone_enough(rows: &[SweepRow], rising: bool) -> bool {
    let wrong: Vec<f64> = rows
        .windows(2)
        .map(|w| if rising { w[0].report.mean - w[1].report.mean } else { w[1].report.mean - w[0].report.mean })
        .filter(|d| *d > 0.0)
        .collect();
    wrong.len() <= 1 && wrong.iter().all(|d| *d < 0.005)
}

fn sweep_directions(pop: &Population) -> Verdict {
    let search = SearchConfig::default();
    let gaps = sweep_report_gap(&pop.records, 10, &[2, 5, 10, 25], &search).unwrap();
    let durations = sweep_training_duration(&pop.records, 10, &[5, 10, 20, 40], &search).unwrap();
    let fmt = |rows: &[SweepRow], name: &str| {
        rows.iter()
            .map(|r| format!("{name}={} {:.4}", r.value, r.report.mean))
            .collect::<Vec<_>>()
            .join(" ")
    };
    check(
        monotone_enough(&gaps, true) && monotone_enough(&durations, false),
        format!("{} | {}", fmt(&gaps, "q"), fmt(&durations, "l")),
    )
}

fn clustering_recovery() -> Verdict {
    let mut hits = 0;
    let mut purities = Vec::new();
    for s in 0..20u64 {
        let pop = generate_population(&PopulationSpec {
            seed: 1000 + s,
            mix: [0.6, 0.2, 0.2],
            ..PopulationSpec::default()
        })
        .unwrap();
        let search = SearchConfig { seed: s, ..SearchConfig::default() };
        let config = EvalConfig::new(10, 10, 100).unwrap();
        let report = leave_one_out(&pop.records, &config, &ProposedPredictor { search }, &search).unwrap();
        let features: Vec<FeatureVector> = pop
            .records
            .iter()
            .map(|r| compute_features(r, report.per_agent[&r.id]).unwrap())
            .collect();
        let typology = cluster_typology(&features, &KChoice::Elbow((1..=6).collect()), s).unwrap();
        let truth: Vec<Archetype> = pop.labels.iter().map(|l| l.archetype).collect();
        let purity = typology
            .agent_archetypes()
            .map(|a| label_purity(&a, &truth).unwrap())
            .unwrap_or(0.0);
        if typology.k == 3 && purity >= 0.9 {
            hits += 1;
        }
        purities.push(purity);
    }
    let min = purities.iter().copied().fold(1.0, f64::min);
    check(hits >= 19, format!("{hits}/20 seeds with k=3 and purity >= 0.9 (lowest purity {min:.3})"))
}

fn information_firewall(pop: &Population) -> Verdict {
    let search = SearchConfig { restarts: 6, ..SearchConfig::default() };
    let config = EvalConfig::new(10, 10, 100).unwrap();
    let schedule = build_schedule(&config);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let records = &pop.records[..8];
    let fits = PopulationFits::fit(records, &search);
    let mut audits = 0;

    // unscheduled reports of the scored agent
    for held in records.iter().take(3) {
        let prior = fits.prior_where(|id| *id != held.id).unwrap();
        let mut perturbed = held.clone();
        for m in 1..=held.n_trials() {
            if !schedule.contains(m) {
                perturbed = perturbed.with_report(m, rng.random_range(0.0..1.0)).unwrap();
            }
        }
        for tag in ModelTag::ALL {
            let p = tag.predictor(search);
            let a = run_agent_eval(held, Some(&prior), &config, p.as_ref()).unwrap();
            let b = run_agent_eval(&perturbed, Some(&prior), &config, p.as_ref()).unwrap();
            if a.predictions != b.predictions {
                return Err(format!("{tag} prediction changed for {}", held.id));
            }
            audits += 1;
        }
    }

    // the held-out agent's own reports never reach its prior
    for (i, held) in records.iter().enumerate().take(3) {
        let mut shuffled = records.to_vec();
        let trials: Vec<usize> = held.reports().keys().copied().collect();
        for m in trials {
            shuffled[i] = shuffled[i].with_report(m, rng.random_range(0.0..1.0)).unwrap();
        }
        let before = fits.prior_where(|id| *id != held.id).unwrap();
        let after = PopulationFits::fit(&shuffled, &search).prior_where(|id| *id != held.id).unwrap();
        if before != after {
            return Err(format!("prior for {} depends on its own reports", held.id));
        }
        audits += 1;
    }
    Ok(format!("{audits} perturbation audits, no prediction or prior changed"))
}

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_trustdyn")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn reproducibility() -> Verdict {
    let tmp = TempDir::new().unwrap();
    let d = |name: &str| tmp.path().join(name).to_str().unwrap().to_owned();
    let data = format!("{}/dataset.csv", d("sim"));
    let labels = format!("{}/labels.csv", d("sim"));
    let rmse_file = format!("{}/rmse_per_agent.csv", d("eval"));
    let prior = format!("{}/prior.json", d("fit"));
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("sim", vec!["simulate", "--agents", "12", "--trials", "60", "--mix", "0.6,0.2,0.2", "--seed", "4"]),
        ("fit", vec!["fit-prior", "--data", &data]),
        ("eval", vec!["evaluate", "--data", &data]),
        ("sweep", vec!["sweep", "--data", &data, "--gaps", "2,5,10"]),
        ("cluster", vec!["cluster", "--data", &data, "--rmse", &rmse_file, "--labels", &labels, "--k-max", "4"]),
        ("pred", vec!["predict", "--data", &data, "--prior", &prior]),
    ]
    .into_iter()
    .map(|(dir, args)| (dir, args.into_iter().map(str::to_owned).collect()))
    .collect();
    let mut compared = 0;
    for (dir, args) in &commands {
        let out = d(dir);
        let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
        full.extend(["--out", &out]);
        run_cli(&full);
        let first = snapshot(Path::new(&out));
        run_cli(&full);
        let second = snapshot(Path::new(&out));
        if first != second || first.is_empty() {
            return Err(format!("{} output differs between runs", args[0]));
        }
        compared += first.len();
    }
    Ok(format!("{} commands, {compared} files byte-identical on rerun", commands.len()))
}

fn main() {
    let pop = bayesian_population();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("core-model exactness", Box::new(core_model_exactness)),
        ("stabilization", Box::new(stabilization)),
        ("asymmetry consistency", Box::new(asymmetry_consistency)),
        ("beta density", Box::new(beta_density)),
        ("optimizer dominance", Box::new(optimizer_dominance)),
        ("prior-mode identity", Box::new(prior_mode_identity)),
        ("trajectory recovery", Box::new(trajectory_recovery)),
        ("model comparison", Box::new(|| model_comparison(&pop))),
        ("sweep directions", Box::new(|| sweep_directions(&pop))),
        ("clustering recovery", Box::new(clustering_recovery)),
        ("information firewall", Box::new(|| information_firewall(&pop))),
        ("reproducibility", Box::new(reproducibility)),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("criterion {:>2} PASS {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                println!("criterion {:>2} FAIL {name}: {d} [{secs:.1}s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
