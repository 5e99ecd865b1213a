//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria that the method cannot meet as stated are reported as FAIL and
//! do not abort the run; set `SAACI_ACCEPTANCE_STRICT=1` to exit nonzero on
//! any FAIL.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saaci::bench::{aggregate, parse_config, run_study, Study};
use saaci::gauss::{build_projector, delta_half_widths, mvn_sample, projector_with_coupling, CovMatrix, SubspaceBasis};
use saaci::normal_map::{normal_map_residual, solve_box_normal_map, AffineOperator, NewtonOptions};
use saaci::polyhedral::{normal_map_pieces, BoxSet};
use saaci::pwnormal::{exact_ci, sample_z, PiecewiseNormalModel};
use saaci::special::chi2_quantile;
use saaci::svi::solve_lcp_lemke;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn study(text: &str) -> Study {
    Study::prepare(parse_config(text).expect("config parses"), None).expect("study prepares")
}

fn lcp_config(kind: &str, n: usize, reps: usize, budgets: &str) -> String {
    format!(
        "[problem]\nkind = \"{kind}\"\nn = {n}\n[study]\nsample_size = 500\nreplications = {reps}\nseed = 20240601\nbudgets = {budgets}\n"
    )
}

// The labelled numbers after `key:` on a line of CLI output.
fn numbers(out: &str, key: &str) -> Vec<f64> {
    let line = out.lines().find(|l| l.trim_start().starts_with(key)).unwrap_or_else(|| panic!("no line {key:?}"));
    line.trim_start()[key.len()..]
        .split_whitespace()
        .filter_map(|t| t.parse().ok())
        .collect()
}

fn after_colon(line: &str) -> Vec<f64> {
    line.split_once(':').map_or(Vec::new(), |(_, rest)| rest.split_whitespace().filter_map(|t| t.parse().ok()).collect())
}

fn near(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn worked_example() -> Outcome {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_saaci"))
        .args(["svi-ci", "--saa-file"])
        .arg(root().join("data/worked_example.toml"))
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    let text = String::from_utf8_lossy(&out.stdout);
    if !out.status.success() {
        return verdict(false, format!("svi-ci failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let z = numbers(&text, "z_N:");
    let m = numbers(&text, "M_N:");
    let shape = numbers(&text, "region shape (M_N^T Sigma_N^-1 M_N):");
    let zt = numbers(&text, "z_tilde:");
    let cell = text.lines().find(|l| l.starts_with("selected cell:")).unwrap_or("").trim_start_matches("selected cell: ");
    let zi: Vec<Vec<f64>> = text.lines().skip_while(|l| !l.starts_with("z0 intervals")).skip(1).take(2).map(after_colon).collect();
    let xi: Vec<Vec<f64>> = text.lines().skip_while(|l| !l.starts_with("x0 intervals")).skip(1).take(2).map(after_colon).collect();
    let checks = [
        ("z_N", near(&z, &[0.0293, -0.5475], 1e-3)),
        ("M_N", m == vec![0.9971, 0.0, 0.9721, 1.0]),
        ("shape", near(&shape, &[12.8464, 10.8122, 10.8122, 11.8753], 5e-3)),
        ("cell", cell == "(ZERO, MINUS)"),
        ("z_tilde", near(&zt, &[0.0, -0.5208], 1e-3)),
        ("z interval 2", near(&zi[1], &[-0.5777, -0.4640], 1e-3)),
        ("z interval 1", zi[0] == vec![0.0, 0.0]),
        ("x intervals", xi.iter().all(|v| v == &vec![0.0, 0.0])),
        ("runtime", elapsed < Duration::from_secs(1)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        failed.is_empty(),
        format!(
            "z_N=({:.4}, {:.4}) shape=({:.4}, {:.4}, {:.4}) cell={cell} z_tilde_2={:.4} [{:.4}, {:.4}] in {:.0?}{}",
            z[0], z[1], shape[0], shape[1], shape[3], zt[1], zi[1][0], zi[1][1], elapsed,
            if failed.is_empty() { String::new() } else { format!("; off: {failed:?}") }
        ),
    )
}

fn exact_coverage() -> Outcome {
    let start = Instant::now();
    let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 1.0, 2.0]);
    let k = BoxSet::new(vec![0.0, 0.0], vec![f64::INFINITY, 0.0]).unwrap();
    let gamma = normal_map_pieces(l, &k).unwrap();
    let sigma = CovMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5])).unwrap();
    let z0 = DVector::from_column_slice(&[0.0, -0.5]);
    let model = PiecewiseNormalModel::new(gamma, sigma, DVector::zeros(2)).unwrap().with_center(z0.clone()).unwrap();
    let reps = 10_000;
    let mut parts = Vec::new();
    let mut pass = true;
    for alpha in [0.05, 0.10] {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut hits = [0usize; 2];
        for _ in 0..reps {
            let z = sample_z(&model, &mut rng).unwrap();
            let r = exact_ci(&model, &z, alpha).unwrap();
            for j in 0..2 {
                hits[j] += r.contains(j, z0[j]) as usize;
            }
        }
        // The coverage identity covers coordinates along which E has extent;
        // the others are known exactly and get a zero-width interval.
        let e = model.lineality().basis();
        for j in (0..2).filter(|&j| e.row(j).amax() > 0.0) {
            let cov = hits[j] as f64 / reps as f64;
            pass &= (cov - (1.0 - alpha)).abs() <= 0.01;
            parts.push(format!("alpha={alpha}: (z0)_{} coverage {cov:.4}", j + 1));
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(10) && !parts.is_empty();
    verdict(pass, format!("{} in {elapsed:.1?}", parts.join(", ")))
}

fn region_coverage() -> Outcome {
    let start = Instant::now();
    let s = study(&lcp_config("lcp-two-active", 10, 2000, "[[0.05, 0.05]]"));
    let records = run_study(&s, workers()).unwrap();
    let sum = aggregate(&s, &records);
    let rate = sum.region_coverage(0);
    let elapsed = start.elapsed();
    verdict(
        (rate - 0.95).abs() <= 0.02 && elapsed < Duration::from_secs(120),
        format!("z0 in Q_N in {rate:.4} of {} replications ({} excluded) in {elapsed:.1?}", sum.completed, sum.excluded.len()),
    )
}

fn pipeline_coverage() -> Outcome {
    let start = Instant::now();
    let s = study(&lcp_config("lcp-mixed", 30, 500, "[[0.025, 0.025]]"));
    let sum = aggregate(&s, &run_study(&s, workers()).unwrap());
    let full_time = start.elapsed();
    let m = &sum.budgets[0].intervals;
    let f = m.z_summary(&sum.active_z).unwrap();
    let inactive = sum.inactive_z.iter().map(|&j| m.z_coverage(j)).fold(1.0, f64::min);

    let start = Instant::now();
    let smoke = study(&lcp_config("lcp-mixed", 10, 200, "[[0.025, 0.025]]"));
    let ssum = aggregate(&smoke, &run_study(&smoke, workers()).unwrap());
    let smoke_time = start.elapsed();
    let sf = ssum.budgets[0].intervals.z_summary(&ssum.active_z).unwrap();

    let checks = [
        ("MEDIAN", (f.median - 0.968).abs() <= 0.03),
        ("MIN", f.min >= 0.93),
        ("inactive", inactive >= 0.99),
        ("runtime", full_time < Duration::from_secs(20 * 60)),
        ("smoke MEDIAN", sf.median >= 0.93),
        ("smoke runtime", smoke_time < Duration::from_secs(120)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        failed.is_empty(),
        format!(
            "n=30: MIN {:.3} Q1 {:.3} MEDIAN {:.3} Q3 {:.3} MAX {:.3}, inactive min {inactive:.3} ({full_time:.1?}); n=10 smoke MEDIAN {:.3} ({smoke_time:.1?}){}",
            f.min, f.q1, f.median, f.q3, f.max, sf.median,
            if failed.is_empty() { String::new() } else { format!("; off: {failed:?}") }
        ),
    )
}

fn vertex_case() -> Outcome {
    let s = study(&lcp_config("lcp-zero", 30, 500, "[[0.025, 0.025], [0.01, 0.04]]"));
    let sum = aggregate(&s, &run_study(&s, workers()).unwrap());
    let vertex = "0".repeat(30);
    let mut pass = sum.excluded.is_empty();
    let mut parts = Vec::new();
    for b in &sum.budgets {
        let selected = b.cells.iter().find(|c| c.0 == vertex).map_or(0, |c| c.1);
        let m = &b.intervals;
        let all_point = m.z_mean_half_width.iter().chain(&m.x_mean_half_width).all(|w| *w == 0.0);
        let z_cov = (0..30).map(|j| m.z_coverage(j)).fold(1.0, f64::min);
        let x_cov = (0..30).map(|j| m.x_coverage(j)).fold(1.0, f64::min);
        pass &= selected == sum.completed && all_point && z_cov == 1.0 && x_cov == 1.0;
        parts.push(format!(
            "({}, {}): vertex selected {selected}/{}, lowest z/x coverage {z_cov:.3}/{x_cov:.3}",
            b.alphas.0, b.alphas.1, sum.completed
        ));
    }
    verdict(pass, parts.join("; "))
}

fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_gap = 0.0f64;
    let mut worst_res = 0.0f64;
    let mut failures = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=20);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let c = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        // Positive definite (not necessarily symmetric) matrices are P-matrices.
        let m = &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5 + (&c - c.transpose());
        let q = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let set = BoxSet::orthant(n);
        let op = AffineOperator::Dense(m.clone());
        let (newton, lemke) = match (solve_box_normal_map(&op, &q, &set, None, &NewtonOptions::default()), solve_lcp_lemke(&m, &q)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                failures += 1;
                continue;
            }
        };
        worst_gap = worst_gap.max((&newton.x - &lemke).amax());
        let comp = |x: &DVector<f64>| {
            let w = &m * x + &q;
            (0..n).map(|i| x[i].min(w[i]).abs()).fold(0.0, f64::max)
        };
        worst_res = worst_res.max(comp(&newton.x)).max(comp(&lemke)).max(normal_map_residual(&op, &q, &set, &newton.z).amax());
    }
    verdict(
        failures == 0 && worst_gap <= 1e-8 && worst_res <= 1e-10,
        format!("200 LCPs: max |x_newton - x_lemke| {worst_gap:.2e}, max complementarity residual {worst_res:.2e}, solver failures {failures}"),
    )
}

fn projector_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut basis_gap = 0.0f64;
    let mut idem = 0.0f64;
    let mut indep = 0.0f64;
    let mut falsified = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let k = rng.random_range(1..n);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let sigma = CovMatrix::new(&b * b.transpose() + DMatrix::identity(n, n) * 0.1).unwrap();
        let w = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
        let r = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0)) + DMatrix::identity(k, k) * 2.0;
        let e = SubspaceBasis::new(w.clone()).unwrap();
        let p = build_projector(&e, None, &sigma).unwrap();
        let w2 = DMatrix::from_fn(n, n - k, |_, _| rng.random_range(-1.0..1.0));
        if let Ok(q) = build_projector(&SubspaceBasis::new(&w * r).unwrap(), Some(&w2), &sigma) {
            basis_gap = basis_gap.max((p.matrix() - q.matrix()).amax());
        }
        let m = p.matrix();
        idem = idem.max((m * m - m).amax());
        indep = indep.max((m * sigma.matrix() * (DMatrix::identity(n, n) - m).transpose()).amax());
        let perturbed = p.coupling() + DMatrix::from_fn(k, n - k, |_, _| rng.random_range(0.05..0.5));
        let bad = projector_with_coupling(&e, None, &sigma, &perturbed).unwrap();
        let bm = bad.matrix();
        if (bm * sigma.matrix() * (DMatrix::identity(n, n) - bm).transpose()).amax() > 1e-6 {
            falsified += 1;
        }
    }
    // δ-coverage: P Y_j lands within δ_j with probability 1 - α.
    let sigma = CovMatrix::new(DMatrix::from_row_slice(3, 3, &[2.0, 0.6, 0.3, 0.6, 1.0, 0.2, 0.3, 0.2, 0.5])).unwrap();
    let e = SubspaceBasis::new(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0])).unwrap();
    let p = build_projector(&e, None, &sigma).unwrap();
    let alpha = 0.1;
    let d = delta_half_widths(&p, alpha).unwrap();
    let draws = 100_000;
    let mut hits = [0usize; 3];
    for _ in 0..draws {
        let y = p.apply(&mvn_sample(&sigma, &mut rng));
        for j in 0..3 {
            hits[j] += (y[j].abs() <= d[j]) as usize;
        }
    }
    let cov: Vec<f64> = hits.iter().map(|h| *h as f64 / draws as f64).collect();
    let cov_ok = cov.iter().all(|c| (c - (1.0 - alpha)).abs() <= 0.01);
    verdict(
        basis_gap <= 1e-9 && idem <= 1e-10 && indep <= 1e-10 && falsified == 100 && cov_ok,
        format!(
            "basis gap {basis_gap:.1e}, idempotence {idem:.1e}, independence {indep:.1e}, perturbed couplings rejected {falsified}/100, delta coverage {:.4}/{:.4}/{:.4}",
            cov[0], cov[1], cov[2]
        ),
    )
}

fn qp_comparison() -> Outcome {
    let start = Instant::now();
    let s = study(
        "[problem]\nkind = \"qp\"\nn = 300\n[study]\nsample_size = 2000\nreplications = 200\nseed = 20240601\nbudgets = [[0.01, 0.04], [0.025, 0.025]]\nbaseline_alpha = 0.05\n",
    );
    let sum = aggregate(&s, &run_study(&s, workers()).unwrap());
    let f = sum.budgets[0].intervals.z_summary(&sum.active_z).unwrap();
    let chi = chi2_quantile(1, 0.05).unwrap();
    let mut pass = f.median >= 0.93;
    let mut parts = vec![format!("(0.01, 0.04) active z coverage MIN {:.3} MEDIAN {:.3}", f.min, f.median)];
    for (k, b) in sum.budgets.iter().enumerate() {
        let target = (chi2_quantile(1, b.alphas.1).unwrap() / chi).sqrt();
        let ratios = sum.width_ratios(k).unwrap();
        let worst = ratios.iter().map(|r| (r / target - 1.0).abs()).fold(0.0, f64::max);
        let mid = saaci::bench::five_number(&ratios).unwrap().median;
        pass &= worst <= 0.15;
        parts.push(format!("alpha2={}: median ratio {mid:.4} vs {target:.4}, worst deviation {:.1}%", b.alphas.1, 100.0 * worst));
    }
    verdict(pass, format!("{} ({} completed, {:.1?})", parts.join("; "), sum.completed, start.elapsed()))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(&cfg, lcp_config("lcp-mixed", 12, 60, "[[0.025, 0.025], [0.01, 0.04]]")).unwrap();
    let run = |workers: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_saaci"))
            .args(["coverage", "--format", "csv", "--workers", workers, "--seed", "31", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .expect("binary runs");
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(dir.path().join(out).join("coverage.csv")).unwrap()
    };
    let a = run("1", "a");
    let b = run("4", "b");
    let c = run("1", "c");
    verdict(a == b && a == c, format!("{} bytes; 1 vs 4 workers identical: {}; rerun identical: {}", a.len(), a == b, a == c))
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; there is nothing to list.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 9] = [
        ("worked example golden run", worked_example),
        ("exact piecewise-normal coverage", exact_coverage),
        ("confidence-region coverage", region_coverage),
        ("pipeline coverage, mixed family", pipeline_coverage),
        ("vertex case selects {0}^n", vertex_case),
        ("solver oracle equivalence", solver_oracle),
        ("projector property suite", projector_suite),
        ("QP comparison with the baseline", qp_comparison),
        ("determinism across workers", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += !o.pass as usize;
        println!("{} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} PASS, {failed} FAIL", criteria.len() - failed);
    if failed > 0 && std::env::var("SAACI_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
