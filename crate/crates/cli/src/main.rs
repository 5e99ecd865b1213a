use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use saaci::bench::{self, derive_seed, ExperimentConfig, Format, StreamRole, Study};
use saaci::gauss::CovMatrix;
use saaci::inference::{confidence_region, infer};
use saaci::io::{parse_model_file, parse_saa_file};
use saaci::normal_map::AffineOperator;
use saaci::polyhedral::{default_tolerance, BoxSet, PieceKey};
use saaci::pwnormal::exact_ci;
use saaci::report::IntervalReport;
use saaci::svi::{jacobian_mn, solve_normal_map, solve_saa, SaaSolution, SolveSeeds};

#[derive(Parser)]
#[command(name = "saaci", version, about = "Confidence intervals for SAA solutions of stochastic variational inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Exact intervals for the center of a piecewise normal vector from one observation.
    ExactCi {
        /// Model file (TOML).
        #[arg(long)]
        model: PathBuf,
        /// Overrides the model file's level.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// One SAA solve for the problem in a config; prints z_N, x_N, M_N and Σ_N.
    SviSolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Use the [full_scale] section of the config.
        #[arg(long)]
        full_scale: bool,
        /// Also write the SAA data as a file `svi-ci` accepts.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Region, selected cell and intervals from SAA data.
    SviCi {
        #[arg(long)]
        saa_file: PathBuf,
        #[arg(long)]
        alpha1: Option<f64>,
        #[arg(long)]
        alpha2: Option<f64>,
    },
    /// Monte Carlo coverage study.
    Coverage {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// With --alpha2, replaces the config's budgets by one budget.
        #[arg(long, requires = "alpha2")]
        alpha1: Option<f64>,
        #[arg(long, requires = "alpha1")]
        alpha2: Option<f64>,
        /// Output directory; without it the result goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: OutFormat,
        #[arg(long)]
        full_scale: bool,
        #[arg(long)]
        workers: Option<usize>,
        /// Also write per-replication rows (needs --out).
        #[arg(long, requires = "out")]
        raw: bool,
    },
}

fn fmt_vec(v: &DVector<f64>) -> String {
    v.iter().map(|x| format!("{x:.10}")).collect::<Vec<_>>().join(" ")
}

fn fmt_mat(m: &DMatrix<f64>) -> String {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| format!("{:.10}", m[(i, j)])).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join(" ; ")
}

fn fmt_intervals(out: &mut String, name: &str, r: &IntervalReport) {
    let _ = writeln!(out, "{name} intervals (level {:.4}):", r.nominal_level());
    for j in 0..r.dim() {
        let _ = writeln!(out, "  {}: {:.10} {:.10}", j + 1, r.lower(j), r.upper(j));
    }
}

fn base_dir(path: &Path) -> Option<&Path> {
    path.parent().filter(|p| !p.as_os_str().is_empty())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: &Path, full_scale: bool) -> Result<ExperimentConfig> {
    let cfg = bench::parse_config(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(if full_scale { cfg.full_scale()? } else { cfg })
}

fn exact(model: &Path, alpha: Option<f64>) -> Result<String> {
    let file = parse_model_file(&read(model)?).with_context(|| format!("parsing {}", model.display()))?;
    let loaded = file.load(base_dir(model))?;
    let alpha = alpha.unwrap_or(loaded.alpha);
    let piece = loaded.model.classify(&loaded.observation)?;
    let r = exact_ci(&loaded.model, &loaded.observation, alpha)?;
    let mut out = String::new();
    let _ = writeln!(out, "observation: {}", fmt_vec(&loaded.observation));
    let piece = match piece {
        // 1 where the projection passes the coordinate through, 0 where it clamps.
        PieceKey::Pattern(p) => p.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>(),
        PieceKey::Index(i) => format!("#{}", i + 1),
    };
    let _ = writeln!(out, "piece: {piece}");
    let _ = writeln!(out, "lineality dimension: {}", loaded.model.lineality().dim());
    let _ = writeln!(out, "center: {}", fmt_vec(&r.center));
    fmt_intervals(&mut out, "z0", &r);
    Ok(out)
}

fn toml_vec(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "))
}

fn toml_mat(m: &DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows()).map(|i| toml_vec(&m.row(i).iter().copied().collect::<Vec<_>>())).collect();
    format!("[{}]", rows.join(", "))
}

fn svi_solve(config: &Path, seed: Option<u64>, full_scale: bool, out_path: Option<&Path>) -> Result<String> {
    let mut cfg = load_config(config, full_scale)?;
    if let Some(s) = seed {
        cfg.study.seed = s;
    }
    let study = Study::prepare(cfg, base_dir(config))?;
    let master = study.config.study.seed;
    let seeds = SolveSeeds {
        sample: derive_seed(master, 0, StreamRole::Sample),
        perturbation: derive_seed(master, 0, StreamRole::Perturbation),
    };
    let n_samples = study.config.study.sample_size;
    let (saa, sol) = solve_saa(&study.problem, n_samples, seeds)?;
    let mut out = String::new();
    let _ = writeln!(out, "problem: {}  n = {}  N = {}", study.problem.name, study.dim(), n_samples);
    let _ = writeln!(out, "z_N: {}", fmt_vec(&sol.z));
    let _ = writeln!(out, "x_N: {}", fmt_vec(&sol.x));
    let _ = writeln!(out, "M_N: {}", fmt_mat(&sol.jacobian));
    let _ = writeln!(out, "Sigma_N: {}", fmt_mat(sol.sigma.matrix()));
    if let Some(path) = out_path {
        let set = &study.problem.set;
        let text = format!(
            "sample_size = {}\na_bar = {}\nb_bar = {}\nsigma = {}\nset = {{ lower = {}, upper = {} }}\n",
            n_samples,
            toml_mat(&saa.a_bar),
            toml_vec(saa.b_bar.as_slice()),
            toml_mat(sol.sigma.matrix()),
            toml_vec(set.lower()),
            toml_vec(set.upper()),
        );
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(out)
}

fn svi_ci(saa_file: &Path, alpha1: Option<f64>, alpha2: Option<f64>) -> Result<String> {
    let file = parse_saa_file(&read(saa_file)?).with_context(|| format!("parsing {}", saa_file.display()))?;
    let base = base_dir(saa_file);
    let a_bar = file.a_bar.load(base)?.to_dense();
    let n = file.b_bar.len();
    let set: BoxSet = file.set.build(n)?;
    let b_bar = DVector::from_column_slice(&file.b_bar);
    let sigma = CovMatrix::new(file.sigma.load(base)?.to_dense())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let solved = solve_normal_map(&AffineOperator::Dense(a_bar.clone()), &b_bar, &set, &mut rng, 3)?;
    let jacobian = jacobian_mn(&a_bar, &solved.z, &set, default_tolerance(&solved.z))?;
    let sol = SaaSolution::from_parts(&set, solved.z, jacobian, sigma, file.sample_size)?;
    let (a1, a2) = (alpha1.unwrap_or(file.alpha1), alpha2.unwrap_or(file.alpha2));
    let region = confidence_region(&sol, a1)?;
    let inf = infer(&sol, &set, a1, a2)?;
    let mut out = String::new();
    let _ = writeln!(out, "z_N: {}", fmt_vec(&sol.z));
    let _ = writeln!(out, "x_N: {}", fmt_vec(&sol.x));
    let _ = writeln!(out, "M_N: {}", fmt_mat(&sol.jacobian));
    let _ = writeln!(out, "Sigma_N: {}", fmt_mat(sol.sigma.matrix()));
    let _ = writeln!(out, "region shape (M_N^T Sigma_N^-1 M_N): {}", fmt_mat(&region.shape));
    let _ = writeln!(out, "region threshold (chi2_n(alpha1)/N): {:.10}", region.threshold);
    let _ = writeln!(out, "solution cell: {}", inf.solution_cell);
    let cell = inf.z.selected_cell.as_ref().expect("inference selects a cell");
    let _ = writeln!(out, "selected cell: {cell}");
    let _ = writeln!(out, "z_tilde: {}", fmt_vec(&inf.z.center));
    let _ = writeln!(out, "x_tilde: {}", fmt_vec(&inf.x.center));
    fmt_intervals(&mut out, "z0", &inf.z);
    fmt_intervals(&mut out, "x0", &inf.x);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn coverage(
    config: &Path,
    seed: Option<u64>,
    reps: Option<usize>,
    alphas: Option<(f64, f64)>,
    out: Option<&Path>,
    format: OutFormat,
    full_scale: bool,
    workers: Option<usize>,
    raw: bool,
) -> Result<String> {
    let mut cfg = load_config(config, full_scale)?;
    if let Some(s) = seed {
        cfg.study.seed = s;
    }
    if let Some(r) = reps {
        cfg.study.replications = r;
    }
    if let Some(a) = alphas {
        cfg.study.budgets = vec![a];
    }
    cfg.validate()?;
    let workers = workers
        .or(cfg.study.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        bail!("--workers must be positive");
    }
    let study = Study::prepare(cfg, base_dir(config))?;
    let start = Instant::now();
    let records = bench::run_study(&study, workers)?;
    eprintln!("{} replications on {workers} workers in {:.1?}", records.len(), start.elapsed());
    let summary = bench::aggregate(&study, &records);
    let format = match format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Table => Format::Table,
    };
    match out {
        Some(dir) => {
            let written = bench::emit(&summary, raw.then_some(records.as_slice()), format, dir)
                .with_context(|| format!("writing to {}", dir.display()))?;
            Ok(written.iter().map(|p| format!("wrote {}\n", p.display())).collect())
        }
        None => Ok(match format {
            Format::Csv => bench::coverage_csv(&summary),
            Format::Table => bench::coverage_table(&summary),
        }),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let text = match cli.command {
        Command::ExactCi { model, alpha } => exact(&model, alpha)?,
        Command::SviSolve { config, seed, full_scale, out } => svi_solve(&config, seed, full_scale, out.as_deref())?,
        Command::SviCi { saa_file, alpha1, alpha2 } => svi_ci(&saa_file, alpha1, alpha2)?,
        Command::Coverage { config, seed, reps, alpha1, alpha2, out, format, full_scale, workers, raw } => coverage(
            &config,
            seed,
            reps,
            alpha1.zip(alpha2),
            out.as_deref(),
            format,
            full_scale,
            workers,
            raw,
        )?,
    };
    print!("{text}");
    Ok(())
}
