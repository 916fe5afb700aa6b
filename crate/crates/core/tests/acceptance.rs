//! End-to-end acceptance gate. Runs every criterion and prints one
//! `PASS`/`FAIL` line each; exits non-zero if any criterion fails.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hawkes_lab::chains::{simulate_chain, two_state_chain, MarkChainSpec, RegimeSpec};
use hawkes_lab::estimation::fit_exp_hawkes;
use hawkes_lab::exec::Execution;
use hawkes_lab::hawkes::{simulate, simulate_with, time_rescale, HawkesSpec, Nonlinearity, NonlinearitySpec};
use hawkes_lab::kernels::Kernel;
use hawkes_lab::limits::{
    chpdo_coefficients, event_rate, nstate_coefficients, two_state_coefficients, two_state_v, RateBudget,
    RateProvenance,
};
use hawkes_lab::mc::{estimate_mean_rate, verify_fclt, VerifyParams};
use hawkes_lab::price::{simulate_price, PriceModelSpec};
use hawkes_lab::rng::PathStreams;
use hawkes_lab::stats::{ks_test, Moments};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reference_kernel() -> Kernel {
    Kernel::exponential(0.5, 1.0).unwrap()
}

fn rate_lln() -> Outcome {
    let spec = HawkesSpec::linear(1.0, reference_kernel()).unwrap();
    let horizon = 5000.0;
    let rates = Execution::Parallel
        .map_indexed(200, |i| {
            let mut s = PathStreams::new(2024, i as u64);
            let path = simulate_with(&spec, horizon, &mut s.events, &mut s.regimes)?;
            Ok(path.events.len() as f64 / horizon)
        })
        .map_err(|e| e.to_string())?;
    let m = Moments::of(&rates);
    let se = m.std_error_of_mean();
    let allowed = (3.0 * se).max(0.02 * 2.0);
    check(
        (m.mean - 2.0).abs() <= allowed,
        format!("mean N(T)/T = {:.5} vs 2.0 (SE {:.5}, allowed ±{:.5})", m.mean, se, allowed),
    )
}

fn fclt_report(model: &PriceModelSpec, target: f64, seed: u64) -> Outcome {
    let params = VerifyParams::new(1e4, 1.0, 2000, seed);
    let out = verify_fclt(model, &params).map_err(|e| e.to_string())?;
    let r = &out.report;
    let detail = format!(
        "Var(Z) = {:.4} vs {:.4} (SE {:.4}); KS p-value {:.3} (advisory)",
        r.empirical,
        r.theoretical,
        r.standard_error,
        r.ks_p_value.unwrap_or(f64::NAN)
    );
    check(r.pass && (r.theoretical - target).abs() < 1e-12, detail)
}

fn fclt_variance() -> Outcome {
    let hawkes = HawkesSpec::linear(1.0, reference_kernel()).unwrap();
    let model = PriceModelSpec::new(0.0, hawkes, two_state_chain(0.5, 0.5, 1.0).unwrap()).unwrap();
    fclt_report(&model, 2.0, 42)
}

fn regime_fclt() -> Outcome {
    let regimes = RegimeSpec::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]], vec![1.0, 3.0]).unwrap();
    let hawkes = HawkesSpec::regime_switched(regimes, reference_kernel()).unwrap();
    let model = PriceModelSpec::new(0.0, hawkes, two_state_chain(0.5, 0.5, 1.0).unwrap()).unwrap();
    fclt_report(&model, 4.0, 43)
}

fn reductions() -> Outcome {
    let mut worst: f64 = 0.0;
    let grid = [0.05, 0.2, 0.5, 0.7, 0.95];
    for &p in &grid {
        for &pp in &grid {
            for &delta in &[0.01, 1.0, 3.5] {
                let chain = two_state_chain(p, pp, delta).unwrap();
                let (s, sig) = chpdo_coefficients(p, pp, delta).unwrap();
                let (a2, s2) = two_state_coefficients(&chain).unwrap();
                let n = nstate_coefficients(&chain).unwrap();
                let v = two_state_v(&chain).unwrap();
                let scale = delta * delta;
                worst = worst
                    .max((a2 - s).abs() / delta)
                    .max((s2 - sig).abs() / scale)
                    .max((n.a_star - s).abs() / delta)
                    .max((n.sigma_star_sq - sig).abs() / scale)
                    .max((v[0] - n.solution.v[0]).abs() / scale)
                    .max((v[1] - n.solution.v[1]).abs() / scale);
            }
        }
    }
    // rows equal to π: σ̂*² = Var_π(a)
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 2..=6 {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        let pi: Vec<f64> = w.iter().map(|x| x / total).collect();
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let chain = MarkChainSpec::new(vec![pi.clone(); n], a.clone()).unwrap();
        let mean: f64 = pi.iter().zip(&a).map(|(p, x)| p * x).sum();
        let var: f64 = pi.iter().zip(&a).map(|(p, x)| p * (x - mean).powi(2)).sum();
        let c = nstate_coefficients(&chain).unwrap();
        worst = worst.max((c.sigma_star_sq - var).abs()).max((c.a_star - mean).abs());
    }
    check(worst <= 1e-12, format!("largest scaled discrepancy {worst:.2e}"))
}

/// Long-run variance of Σ(a(X_k) − a*) by batch means over 10⁷ steps, with
/// a bootstrap standard error over batches.
fn batch_means_variance(chain: &MarkChainSpec, a_star: f64, seed: u64) -> (f64, f64) {
    const STEPS: usize = 10_000_000;
    const BATCHES: usize = 1000;
    let len = STEPS / BATCHES;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = simulate_chain(chain, STEPS, &mut rng).unwrap();
    let sums: Vec<f64> = states
        .chunks(len)
        .map(|c| c.iter().map(|&s| chain.marks[s] - a_star).sum::<f64>())
        .collect();
    let estimate = |xs: &[f64]| xs.iter().map(|s| s * s).sum::<f64>() / (xs.len() * len) as f64;
    let var = estimate(&sums);
    let boots: Vec<f64> = (0..400)
        .map(|_| {
            let resample: Vec<f64> = (0..BATCHES).map(|_| sums[rng.random_range(0..BATCHES)]).collect();
            estimate(&resample)
        })
        .collect();
    (var, Moments::of(&boots).variance.sqrt())
}

fn nstate_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut lines = Vec::new();
    let mut ok = true;
    for k in 0..5 {
        let n = 3 + k % 3;
        let p: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
                let t: f64 = w.iter().sum();
                w.iter().map(|x| x / t).collect()
            })
            .collect();
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let chain = MarkChainSpec::new(p, a).unwrap();
        let c = nstate_coefficients(&chain).unwrap();
        let (var, se) = batch_means_variance(&chain, c.a_star, 1000 + k as u64);
        let pass = (var - c.sigma_star_sq).abs() <= 3.0 * se;
        ok &= pass;
        lines.push(format!("n={n}: {:.4} vs {:.4}±{:.4}", c.sigma_star_sq, var, se));
    }
    check(ok, lines.join("; "))
}

fn equivalences() -> Outcome {
    let linear = HawkesSpec::linear(1.3, reference_kernel()).unwrap();
    let single = HawkesSpec::regime_switched(RegimeSpec::single(1.3).unwrap(), reference_kernel()).unwrap();
    let identity = linear.clone().with_nonlinearity(NonlinearitySpec::identity()).unwrap();
    let marks = two_state_chain(0.3, 0.6, 0.01).unwrap();
    let mut compared = 0usize;
    for seed in 0..20 {
        let base = simulate(&linear, 500.0, seed).unwrap().events.times;
        for other in [&single, &identity] {
            if simulate(other, 500.0, seed).unwrap().events.times != base {
                return Err(format!("event paths differ at seed {seed}"));
            }
        }
        let price = |h: &HawkesSpec| {
            simulate_price(&PriceModelSpec::new(100.0, h.clone(), marks.clone()).unwrap(), 500.0, seed).unwrap().prices
        };
        let base_price = price(&linear);
        if price(&single) != base_price || price(&identity) != base_price {
            return Err(format!("price paths differ at seed {seed}"));
        }
        compared += base.len();
    }
    Ok(format!("20 seeds, {compared} events identical for N=1 regime and identity h"))
}

fn nonlinear_rates() -> Outcome {
    let identity = HawkesSpec::linear(1.0, reference_kernel())
        .unwrap()
        .with_nonlinearity(NonlinearitySpec::identity())
        .unwrap();
    let budget = RateBudget { horizon: 2000.0, burn_in: Some(200.0), paths: 200, seed: 9, ..Default::default() };
    let r = event_rate(&identity, Some(&budget)).map_err(|e| e.to_string())?;
    let se = r.se.unwrap_or(f64::NAN);
    let id_ok = r.provenance == RateProvenance::Estimated && (r.value - 2.0).abs() <= 3.0 * se;

    let mut clipped = Vec::new();
    let mut clip_ok = true;
    for kernel in [Kernel::Zero, reference_kernel()] {
        let spec = HawkesSpec::linear(1.0, kernel)
            .unwrap()
            .with_nonlinearity(NonlinearitySpec::new(Nonlinearity::Saturating { cap: 0.5 }, None).unwrap())
            .unwrap();
        let est = estimate_mean_rate(&spec, 2000.0, Some(0.0), 200, 10, Execution::Parallel).map_err(|e| e.to_string())?;
        clip_ok &= (est.rate - 0.5).abs() <= 3.0 * est.se;
        clipped.push(format!("{:.5}±{:.5}", est.rate, est.se));
    }
    check(
        id_ok && clip_ok,
        format!("identity h: {:.5}±{:.5} vs 2.0; saturating cap 0.5: {} vs 0.5", r.value, se, clipped.join(", ")),
    )
}

fn goodness_of_fit() -> Outcome {
    let truth = [1.0, 0.5, 1.0];
    let spec = HawkesSpec::linear(truth[0], Kernel::exponential(truth[1], truth[2]).unwrap()).unwrap();
    let horizon = 5000.0;
    let runs = Execution::Parallel
        .map_indexed(50, |i| {
            let ev = simulate(&spec, horizon, 500 + i as u64)?.events;
            let fit = fit_exp_hawkes(&ev.times, horizon, None)?;
            let fitted = HawkesSpec::linear(
                fit.params.lambda,
                Kernel::exponential(fit.params.alpha, fit.params.beta)?,
            )?;
            let residuals = time_rescale(&ev, &fitted, None)?;
            let ks = ks_test(&residuals, |x| 1.0 - (-x).exp());
            let est = [fit.params.lambda, fit.params.alpha, fit.params.beta];
            let within = fit
                .std_errors
                .is_some_and(|se| (0..3).all(|k| (est[k] - truth[k]).abs() <= 3.0 * se[k]));
            Ok((ks.p_value > 0.01, within))
        })
        .map_err(|e| e.to_string())?;
    let ks_pass = runs.iter().filter(|r| r.0).count();
    let se_pass = runs.iter().filter(|r| r.1).count();
    check(
        ks_pass >= 45 && se_pass >= 45,
        format!("KS p > 0.01 in {ks_pass}/50; all parameters within 3 SE in {se_pass}/50"),
    )
}

const DET_CONFIG: &str = r#"{
  "s0": 100.0,
  "lambda": 1.0,
  "kernel": {"type": "exponential", "alpha": 0.5, "beta": 1.0},
  "marks": {"P": [[0.6, 0.4], [0.3, 0.7]], "a": [0.01, -0.01]}
}"#;

const DET_NONLINEAR: &str = r#"{
  "s0": 100.0,
  "regimes": {"A": [[-0.5, 0.5], [0.5, -0.5]], "lambdas": [0.5, 1.5]},
  "kernel": {"type": "exponential", "alpha": 0.4, "beta": 1.0},
  "nonlinearity": {"type": "scaled_soft", "cap": 4.0, "slope": 0.5},
  "marks": {"P": [[0.6, 0.4], [0.3, 0.7]], "a": [0.01, -0.01]},
  "rate_estimation": {"horizon": 300, "paths": 16, "seed": 3}
}"#;

/// Run every subcommand with the given worker count; return all outputs.
fn cli_outputs(dir: &Path, workers: &str) -> Result<Vec<(String, Vec<u8>)>, String> {
    let cfg = dir.join("model.json");
    let nl = dir.join("nonlinear.json");
    std::fs::write(&cfg, DET_CONFIG).unwrap();
    std::fs::write(&nl, DET_NONLINEAR).unwrap();
    let out = |name: &str| dir.join(format!("{workers}-{name}"));
    let p = |path: &Path| path.to_str().unwrap().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["simulate".into(), "--config".into(), p(&cfg), "--horizon".into(), "2000".into(), "--seed".into(), "5".into(), "--out".into(), p(&out("events.csv")), "--report".into(), p(&out("simulate.json"))],
        vec!["simulate-price".into(), "--config".into(), p(&cfg), "--horizon".into(), "2000".into(), "--seed".into(), "5".into(), "--out".into(), p(&out("price.csv")), "--report".into(), p(&out("price.json"))],
        vec!["limits".into(), "--config".into(), p(&cfg), "--out".into(), p(&out("limits.json"))],
        vec!["limits".into(), "--config".into(), p(&nl), "--out".into(), p(&out("limits-nl.json"))],
        vec!["verify".into(), "--config".into(), p(&cfg), "--mode".into(), "fclt".into(), "--n".into(), "100".into(), "--paths".into(), "200".into(), "--seed".into(), "8".into(), "--out".into(), p(&out("fclt.json")), "--emit-samples".into(), p(&out("fclt-samples.csv"))],
        vec!["verify".into(), "--config".into(), p(&nl), "--mode".into(), "lln".into(), "--n".into(), "50".into(), "--paths".into(), "60".into(), "--seed".into(), "8".into(), "--out".into(), p(&out("lln-nl.json"))],
        vec!["fit".into(), "--events".into(), p(&out("events.csv")), "--horizon".into(), "2000".into(), "--out".into(), p(&out("fit.json"))],
        vec!["fit-marks".into(), "--prices".into(), p(&out("price.csv")), "--buckets".into(), "-inf,0,inf".into(), "--out".into(), p(&out("chain.json"))],
        vec!["residuals".into(), "--config".into(), p(&cfg), "--events".into(), p(&out("events.csv")), "--horizon".into(), "2000".into(), "--out".into(), p(&out("residuals.csv")), "--report".into(), p(&out("residuals.json"))],
    ];
    for args in runs {
        let mut argv = vec!["hawkes-lab".to_string()];
        argv.extend(args.iter().cloned());
        if matches!(args[0].as_str(), "limits" | "verify") {
            argv.extend(["--workers".to_string(), workers.to_string()]);
        }
        let code = hawkes_lab::cli::run_cli(&argv);
        if code != 0 && !(args[0] == "verify" && code == 2) {
            return Err(format!("`{}` exited with {code}", args.join(" ")));
        }
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            let stripped = name.strip_prefix(&format!("{workers}-"))?.to_string();
            Some((stripped, std::fs::read(dir.join(&name)).unwrap()))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let one = cli_outputs(dir.path(), "1")?;
    let four = cli_outputs(dir.path(), "4")?;
    let again = cli_outputs(dir.path(), "3")?;
    let json = one.iter().filter(|(n, _)| n.ends_with(".json")).count();
    if one.len() != four.len() || json < 8 {
        return Err(format!("expected matching output sets, got {} and {}", one.len(), four.len()));
    }
    for ((n1, b1), ((_, b4), (_, b3))) in one.iter().zip(four.iter().zip(&again)) {
        if b1 != b4 || b1 != b3 {
            return Err(format!("{n1} differs across worker counts"));
        }
    }
    Ok(format!("{} outputs ({json} JSON reports) byte-identical for 1, 3 and 4 workers", one.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("Hawkes rate LLN", rate_lln),
        ("FCLT variance", fclt_variance),
        ("Regime-switching FCLT variance", regime_fclt),
        ("Two-state and i.i.d. reductions", reductions),
        ("n-state variance oracle", nstate_oracle),
        ("Degenerate-regime and identity-h path equivalence", equivalences),
        ("Nonlinear rate cross-check", nonlinear_rates),
        ("Simulate-fit-rescale goodness of fit", goodness_of_fit),
        ("CLI determinism across worker counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
