//! Acceptance run: one PASS/FAIL line per check, non-zero exit if any fail.
//!
//! Pass substrings as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- tail tied`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;
use rankboot::mselect::{self, TuningInputs};
use rankboot::oracle::{self, GroupClassification, LimitSpec};
use rankboot::resampling::{recover_row_indices, resample_synchronous};
use rankboot::sim::{self, ScenarioResult};
use rankboot::{EstimatorSpec, PopulationData, StreamSeed};
use rankboot_cli::{cmd_analyze, CommonArgs, Effective, RunConfig};

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Normal CDF from Abramowitz and Stegun 26.2.17 (|error| < 7.5e-8), kept
/// separate from the library's implementation.
fn phi_cdf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.231_641_9 * x.abs());
    let poly = t
        * (0.319_381_530
            + t * (-0.356_563_782
                + t * (1.781_477_937 + t * (-1.821_255_978 + t * 1.330_274_429))));
    let upper = (-0.5 * x * x).exp() / (2.0 * PI).sqrt() * poly;
    if x >= 0.0 {
        1.0 - upper
    } else {
        upper
    }
}

fn phi_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn run(name: &str) -> ScenarioResult {
    let mut results = runs(name);
    assert_eq!(results.len(), 1);
    results.remove(0)
}

fn runs(name: &str) -> Vec<ScenarioResult> {
    sim::builtin(name, SEED)
        .unwrap()
        .iter()
        .map(|s| sim::run_scenario(s).unwrap())
        .collect()
}

fn mean_of(r: &ScenarioResult, metric: &str) -> f64 {
    r.summary(metric).unwrap().mean
}

fn tail_constant() -> Outcome {
    let t = Instant::now();
    let c_quad = oracle::tail_integral_quadrature(0.0);
    let c_ref = (2.0 * PI).sqrt().recip();
    let mut worst = 0.0f64;
    for a in [0.0, 0.5, 1.0, 2.0, 5.0] {
        worst = worst.max((oracle::tail_integral(a) - oracle::tail_integral_quadrature(a)).abs());
    }
    let elapsed = t.elapsed();
    outcome(
        (c_quad - c_ref).abs() < 1e-6 && worst < 1e-8 && elapsed < Duration::from_secs(1),
        format!(
            "C = {c_quad:.9} (|diff| {:.1e}); closed form vs quadrature max |diff| {worst:.1e}",
            (c_quad - c_ref).abs()
        ),
    )
}

fn tied_shift() -> Outcome {
    let t = Instant::now();
    let cls = GroupClassification::block(0, 4, 0);
    let sig = [1.0; 5];
    let shifted =
        oracle::bootstrap_limit_pmf(&cls, &sig, &[1.0, 0.0, 0.0, 0.0, 0.0], 1_000_000, SEED)
            .unwrap();
    let centred = oracle::bootstrap_limit_pmf(&cls, &sig, &[0.0; 5], 1_000_000, SEED).unwrap();
    let (m1, v1) = oracle::pmf_moments(&shifted);
    let (m0, v0) = oracle::pmf_moments(&centred);
    let analytic = 1.0 + 4.0 * phi_cdf(-1.0 / 2f64.sqrt());
    let elapsed = t.elapsed();
    outcome(
        (1.949..=1.969).contains(&m1)
            && (1.35..=1.45).contains(&v1)
            && (m0 - 3.0).abs() <= 0.01
            && (v0 - 2.0).abs() <= 0.02
            && elapsed < Duration::from_secs(10),
        format!("z1=1: mean {m1:.4} (analytic {analytic:.4}), var {v1:.4}; z=0: mean {m0:.4}, var {v0:.4}"),
    )
}

fn exchangeable() -> Outcome {
    let draws = 1_000_000;
    let mut worst_z = 0.0f64;
    for p in [2usize, 5, 10] {
        let spec = LimitSpec::exchangeable(p, 0).unwrap();
        let f = oracle::limit_rank_pmf(&spec, draws, SEED).unwrap();
        let r = oracle::r_limit_pmf(&vec![1.0; p], p / 2, draws, SEED).unwrap();
        for pmf in [&f, &r] {
            for k in 1..p {
                let want = k as f64 / p as f64;
                let se = (want * (1.0 - want) / draws as f64).sqrt();
                worst_z = worst_z.max((oracle::pmf_to_cdf(pmf, k) - want).abs() / se);
            }
        }
    }
    outcome(
        worst_z <= 3.0,
        format!("largest deviation from r/p over p in {{2,5,10}}: {worst_z:.2} standard errors"),
    )
}

fn support() -> Outcome {
    let t = Instant::now();
    let r = run("support");
    let mass = mean_of(&r, "mass_outside_block");
    outcome(
        mass < 0.01 && t.elapsed() < Duration::from_secs(60),
        format!("top-group mass outside ranks 1..3: {mass:.5}"),
    )
}

fn tied_block() -> Outcome {
    let t = Instant::now();
    let res = runs("tied-block");
    let pooled = |m: usize| {
        res.iter()
            .find(|r| r.m == m)
            .map(|r| mean_of(r, "top_block_tv_pooled"))
            .unwrap()
    };
    let per_rep = |m: usize| {
        res.iter()
            .find(|r| r.m == m)
            .map(|r| mean_of(r, "top_block_tv"))
            .unwrap()
    };
    let (small, full) = (pooled(300), pooled(1000));
    outcome(
        small < full && small < 0.10 && t.elapsed() < Duration::from_secs(300),
        format!(
            "TV of averaged rows: m=300 {small:.4}, m=1000 {full:.4} (per-dataset TV {:.4} vs {:.4})",
            per_rep(300),
            per_rep(1000)
        ),
    )
}

fn alpha_grid() -> Outcome {
    let t = Instant::now();
    let res = runs("alpha-grid");
    let width = |alpha: f64, n: usize| {
        res.iter()
            .find(|r| r.spec.n == n && matches!(r.spec.theta_rule, sim::ThetaRule::AlphaSpacing { alpha: a, .. } if a == alpha))
            .map(|r| mean_of(r, "mean_width"))
            .unwrap()
    };
    let mut monotone = true;
    for n in [400, 2500, 10_000] {
        monotone &= width(0.2, n) <= width(0.5, n) && width(0.5, n) <= width(0.8, n);
    }
    let (lo, hi) = (width(0.2, 10_000), width(0.8, 10_000));
    outcome(
        lo <= 2.0 && hi >= 8.0 && monotone && t.elapsed() < Duration::from_secs(600),
        format!(
            "n=10000 widths: alpha 0.2 {lo:.3}, 0.5 {:.3}, 0.8 {hi:.3}; nondecreasing in alpha at every n: {monotone}",
            width(0.5, 10_000)
        ),
    )
}

fn correlated() -> Outcome {
    let t = Instant::now();
    let res = runs("correlated");
    let mut pass = true;
    let mut parts = Vec::new();
    for rho in [0.0, 0.25, 0.5] {
        let pick = |sync: bool| {
            res.iter()
                .find(|r| {
                    r.spec.noise.rho == rho
                        && (r.spec.plan.scheme == rankboot::Scheme::Synchronous) == sync
                })
                .unwrap()
        };
        let (s, i) = (pick(true), pick(false));
        // datasets are shared between the two schemes, so differences pair up
        let diffs: Vec<f64> = s
            .rows
            .iter()
            .zip(&i.rows)
            .map(|(a, b)| a.value - b.value)
            .collect();
        let d_mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let d_sd = (diffs.iter().map(|d| (d - d_mean).powi(2)).sum::<f64>()
            / (diffs.len() - 1) as f64)
            .sqrt();
        let (es, ei) = (mean_of(s, "squared_error"), mean_of(i, "squared_error"));
        pass &= ei < es;
        parts.push(format!(
            "rho {rho}: sync {es:.4} indep {ei:.4} (paired diff {d_mean:.4} ± {:.4})",
            d_sd / (diffs.len() as f64).sqrt()
        ));
    }
    outcome(
        pass && t.elapsed() < Duration::from_secs(1200),
        parts.join("; "),
    )
}

fn high_dim() -> Outcome {
    let t = Instant::now();
    let res = runs("highdim");
    let errs: Vec<f64> = res
        .iter()
        .map(|r| mean_of(r, "error_top5_scaled"))
        .collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let ms: Vec<usize> = res.iter().map(|r| r.m).collect();
    outcome(
        decreasing && t.elapsed() < Duration::from_secs(1200),
        format!("scaled error at n = 20, 40, 60 (m = {ms:?}): {errs:.2?}"),
    )
}

fn linear_expected_rank() -> Outcome {
    let t = Instant::now();
    let r = run("linear-expected-rank");
    let n = r.spec.n as f64;
    let eps = n.powf(-0.6);
    let delta = (n / 2.0).sqrt() * eps;
    let sim_mean = mean_of(&r, "point_rank_1");
    let sd = r.summary("point_rank_1").unwrap().sd / (r.spec.dataset_reps as f64).sqrt();
    let asymptotic = (delta * phi_cdf(delta) + phi_pdf(delta)) / delta;
    let finite = oracle::expected_rank_linear_exact(1, delta, r.spec.p);
    let rel = (sim_mean - asymptotic).abs() / asymptotic;
    outcome(
        rel <= 0.10 && t.elapsed() < Duration::from_secs(600),
        format!(
            "delta {delta:.4}: simulated E(rank of item 1) {sim_mean:.4} ± {sd:.4}, asymptotic {asymptotic:.4} \
             (relative error {:.1}%), finite-p normal value {finite:.4}",
            100.0 * rel
        ),
    )
}

/// Tuning objective by trapezoid quadrature on [-8, 8], independent of the
/// library's Gauss–Hermite path.
fn objective_brute(m: usize, theta: &[f64], sigma: &[f64], n: f64) -> f64 {
    let s = (m as f64 / n).sqrt();
    let mut total = 0.0;
    for j in 0..theta.len() {
        for k in 0..theta.len() {
            if j == k {
                continue;
            }
            let b = n.sqrt() * (theta[k] - theta[j])
                / (sigma[j].powi(2) + sigma[k].powi(2)).sqrt()
                / n.ln().sqrt();
            let base = phi_cdf(-b);
            let f = |z: f64| (phi_cdf(s * (z - b)) - base).powi(2) * phi_pdf(z);
            let h = 0.01;
            let mut acc = 0.5 * (f(-8.0) + f(8.0));
            for i in 1..1600 {
                acc += f(-8.0 + i as f64 * h);
            }
            total += acc * h;
        }
    }
    total
}

fn m_selector() -> Outcome {
    let t = Instant::now();
    let n = 400usize;
    let cands = mselect::default_candidates(n as f64).unwrap();
    let mut notes = Vec::new();

    let tied = TuningInputs::new(&[0.5; 4], &[1.0; 4], n as f64, cands.clone()).unwrap();
    let sel = mselect::minimize(&tied).unwrap();
    let tied_ok = sel.m_star == cands[0];
    notes.push(format!("tied m* = {} (smallest {})", sel.m_star, cands[0]));

    let mut rng = StreamSeed::new(SEED).rng(0);
    let cols: Vec<Vec<f64>> = (0..5)
        .map(|j| {
            (0..n)
                .map(|_| j as f64 + rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let data = PopulationData::matrix(cols, None).unwrap();
    let sel = mselect::select_m(&data, &EstimatorSpec::MEAN, None).unwrap();
    let sep_ok = sel.m_star == n;
    notes.push(format!("separated m* = {} (largest {n})", sel.m_star));

    // brute-force grid: agreement, sign symmetry, monotone at ω̂ = 0
    let theta = [0.31, 0.3, 0.22, 0.05];
    let sigma = [1.0, 0.8, 1.3, 1.1];
    let neg: Vec<f64> = theta.iter().map(|v| -v).collect();
    let inputs = TuningInputs::new(&theta, &sigma, n as f64, cands.clone()).unwrap();
    let (mut worst, mut worst_sym) = (0.0f64, 0.0f64);
    let mut prev = f64::NEG_INFINITY;
    let mut monotone = true;
    for &m in &cands {
        let lib = mselect::tuning_objective(m, &inputs).unwrap();
        let brute = objective_brute(m, &theta, &sigma, n as f64);
        worst = worst.max((lib - brute).abs() / brute.max(1e-12));
        worst_sym = worst_sym.max((brute - objective_brute(m, &neg, &sigma, n as f64)).abs());
        let flat = objective_brute(m, &[0.0; 4], &sigma, n as f64);
        monotone &= flat >= prev;
        prev = flat;
        monotone &= mselect::tuning_objective(m, &tied).unwrap()
            >= mselect::tuning_objective(cands[0], &tied).unwrap();
    }
    notes.push(format!(
        "grid of {}: max relative diff vs brute force {worst:.1e}, sign asymmetry {worst_sym:.1e}, monotone at zero gap {monotone}",
        cands.len()
    ));
    outcome(
        tied_ok
            && sep_ok
            && worst < 1e-5
            && worst_sym < 1e-12
            && monotone
            && t.elapsed() < Duration::from_secs(60),
        notes.join("; "),
    )
}

fn degeneracy() -> Outcome {
    let (n, p) = (60usize, 6usize);
    let mut rng = StreamSeed::new(SEED).rng(1);
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|_| {
            (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let data = PopulationData::matrix(cols, None).unwrap();
    let mut all_ok = true;
    for b in 0..100u64 {
        let mut r = StreamSeed::new(SEED).child(7, b).rng(0);
        let res = resample_synchronous(&data, n, &mut r).unwrap();
        for j in 0..p {
            let idx = match recover_row_indices(&data, j, res.sample(j)) {
                Some(i) => i,
                None => {
                    all_ok = false;
                    continue;
                }
            };
            // independent route: linear search of the original column
            let linear: Vec<usize> = res
                .sample(j)
                .iter()
                .map(|v| data.sample(j).iter().position(|x| x == v).unwrap())
                .collect();
            all_ok &= linear == idx;
            for k in 0..p {
                let rebuilt: Vec<f64> = idx.iter().map(|&i| data.sample(k)[i]).collect();
                all_ok &= rebuilt == res.sample(k);
            }
        }
    }
    outcome(
        all_ok,
        "rows recovered from each resampled column rebuild every other column in 100 replicates"
            .into(),
    )
}

fn determinism() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.csv");
    let mut rng = StreamSeed::new(SEED).rng(2);
    let mut csv = String::from("a,b,c,d,e,f\n");
    for _ in 0..80 {
        let row: Vec<String> = (0..6)
            .map(|j| format!("{}", 0.05 * j as f64 + rng.sample::<f64, _>(StandardNormal)))
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    std::fs::write(&input, csv).unwrap();
    let mut outputs = Vec::new();
    for threads in [1usize, 4, 8] {
        let args = CommonArgs {
            config: None,
            run: RunConfig {
                input: Some(input.clone()),
                layout: Some("matrix".into()),
                replicates: Some(2000),
                fraction: Some(0.5),
                seed: Some(99),
                threads: Some(threads),
                out: Some(dir.path().join(format!("t{threads}"))),
                ..RunConfig::default()
            },
        };
        let eff = Effective::resolve("analyze", &args).unwrap();
        rankboot::par::with_threads(threads, || cmd_analyze(&eff)).unwrap();
        outputs.push(
            std::fs::read(dir.path().join(format!("t{threads}/rank_distribution.csv"))).unwrap(),
        );
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same && t.elapsed() < Duration::from_secs(60),
        format!("rank_distribution.csv identical at 1, 4 and 8 threads: {same}"),
    )
}

fn conditional() -> Outcome {
    let r = run("conditional");
    let v = mean_of(&r, "conditional_variance");
    let limit = oracle::pmf_moments(&oracle::r_limit_pmf(&[1.0; 5], 0, 200_000, SEED).unwrap()).1;
    outcome(
        (1.8..=2.2).contains(&v),
        format!(
            "mean conditional rank variance over top five: {v:.4} (limit law variance {limit:.4})"
        ),
    )
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 13] = [
        ("tail-constant", tail_constant),
        ("tied-shift", tied_shift),
        ("exchangeable", exchangeable),
        ("support", support),
        ("tied-block", tied_block),
        ("alpha-grid", alpha_grid),
        ("correlated", correlated),
        ("highdim", high_dim),
        ("linear-expected-rank", linear_expected_rank),
        ("m-selector", m_selector),
        ("degeneracy", degeneracy),
        ("determinism", determinism),
        ("conditional", conditional),
    ];
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = Vec::new();
    for (i, (name, check)) in checks.iter().enumerate() {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        println!(
            "[{:02}] {} {name}: {} ({:.1}s)",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(*name);
        }
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
