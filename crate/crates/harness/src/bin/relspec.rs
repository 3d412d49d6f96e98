use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use relspec_core::constructions::{quasidefinite_factor, spectral_norm, QuasidefiniteBlocks, C64};
use relspec_core::inclusion::{
    diagonalb_window, strip_window, window0, window_essential, window_refined, DiagonalbVariant,
    EssentialDesignation, GapWindow,
};
use relspec_core::io::{read_matrix, write_matrix_market};
use relspec_core::operator::{default_merge_tol, eigendecompose, gaps_of_sorted, inertia, inertia_of, SpectralGap};
use relspec_core::relative_form::{compress, minimal_b, BoundPair};
use relspec_core::tracker::{enclosure_bound0, enclosure_refined, track_with_guard, EssentialGap, Guard};
use relspec_core::SymmetricOperator;
use relspec_harness::ensemble::EnsembleSpec;
use relspec_harness::suites::DEFAULT_TOLERANCE;
use relspec_harness::{replay, verify, HarnessError, Suite, VerifyOptions};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Parser)]
#[command(name = "relspec", version, about = "Relative spectral perturbation bounds for dense symmetric matrices")]
struct Cli {
    /// Overrides the seed of a verify config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative slack for containment checks.
    #[arg(long, global = true, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Leave runtime and wall-clock time out of reports.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, spectral gaps and inertia of H.
    Spectrum {
        #[arg(long)]
        h: PathBuf,
    },
    /// Compress A against a + b|H|; b defaults to the smallest admissible value.
    Compress {
        #[command(flatten)]
        pair: MatrixPair,
        #[arg(long, allow_hyphen_values = true)]
        rel_a: f64,
        #[arg(long, allow_hyphen_values = true)]
        rel_b: Option<f64>,
    },
    /// Spectral inclusion window, checked against the eigenvalues of H + A.
    Window(WindowArgs),
    /// Quasidefinite congruence factorization of a block matrix.
    Factorize {
        /// JSON {"p": <leading block size>, "matrix": <path>}.
        #[arg(long)]
        config: PathBuf,
        /// Directory for W.mtx, D.mtx and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tracks the eigenvalues of H + εA inside a window.
    Track {
        #[command(flatten)]
        pair: MatrixPair,
        #[arg(long, allow_hyphen_values = true)]
        eps0: f64,
        #[arg(long, allow_hyphen_values = true)]
        eps1: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        /// lo,hi
        #[arg(long, allow_hyphen_values = true, value_parser = parse_pair)]
        window: (f64, f64),
        #[arg(long, value_enum)]
        guard: Option<GuardArg>,
        #[arg(long, default_value_t = 1.0)]
        rel_a: f64,
        #[arg(long, default_value_t = 0.0)]
        rel_b: f64,
        /// Also write the JSON certificate here.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Two-sided eigenvalue enclosures inside an essential gap.
    Bounds {
        #[command(flatten)]
        pair: MatrixPair,
        #[arg(long)]
        rel_a: f64,
        #[arg(long)]
        rel_b: f64,
        /// lo,hi
        #[arg(long, allow_hyphen_values = true, value_parser = parse_pair)]
        gap: (f64, f64),
        /// Use the compressed range of A.
        #[arg(long)]
        refined: bool,
    },
    /// Runs a verification suite over a seeded ensemble.
    Verify {
        /// Ensemble spec JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        suite: Suite,
        /// Failing trials are dumped here.
        #[arg(long)]
        artifacts: Option<PathBuf>,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reruns a dumped failing trial.
    Replay {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct MatrixPair {
    #[arg(long)]
    h: PathBuf,
    #[arg(long)]
    a: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum GuardArg {
    Lower,
    Upper,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WindowMode {
    Strip,
    W0,
    W,
    Ess,
    Diagb,
}

#[derive(Args)]
struct WindowArgs {
    /// H
    h: PathBuf,
    /// A
    a: PathBuf,
    #[arg(long = "a")]
    a_const: f64,
    #[arg(long = "b")]
    b_const: f64,
    #[arg(long, value_enum, default_value_t = WindowMode::W0)]
    mode: WindowMode,
    /// Designates |λ| ≥ threshold as the essential part (ess mode).
    #[arg(long)]
    essential_threshold: Option<f64>,
    /// The gap (or, in strip mode, the real part) to examine.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    point: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Shifted)]
    variant: VariantArg,
    #[arg(long)]
    a_plus: Option<f64>,
    #[arg(long)]
    a_minus: Option<f64>,
    #[arg(long)]
    b_plus: Option<f64>,
    #[arg(long)]
    b_minus: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Unshifted,
    Shifted,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let parse = |t: &str| -> Result<f64, String> {
        match t.trim() {
            "-inf" => Ok(f64::NEG_INFINITY),
            "inf" | "+inf" => Ok(f64::INFINITY),
            x => x.parse().map_err(|e| format!("{x:?}: {e}")),
        }
    };
    Ok((parse(lo)?, parse(hi)?))
}

type CliResult<T> = Result<T, HarnessError>;

fn load(path: &Path) -> CliResult<SymmetricOperator> {
    let m = read_matrix(path)?;
    if m.needs_warning() {
        eprintln!(
            "warning: {} is asymmetric (relative {:e}); using (M + Mᵀ)/2",
            path.display(),
            m.relative_asymmetry()
        );
    }
    Ok(m.operator)
}

fn emit(value: &impl Serialize) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` means the command ran and found a violation.
fn run(cli: &Cli) -> CliResult<bool> {
    match &cli.command {
        Command::Spectrum { h } => spectrum(cli, &load(h)?),
        Command::Compress { pair, rel_a, rel_b } => {
            let (h, a) = (load(&pair.h)?, load(&pair.a)?);
            let b = match rel_b {
                Some(b) => *b,
                None => minimal_b(&h, &a, *rel_a)?,
            };
            let bounds = BoundPair::new(*rel_a, b)?;
            let s = compress(&h, &a, bounds)?.summary();
            emit(&json!({"a": bounds.a, "b": bounds.b, "norm": s.norm, "c_minus": s.c_minus, "c_plus": s.c_plus}))?;
            Ok(true)
        }
        Command::Window(args) => window(args),
        Command::Factorize { config, out } => factorize(config, out.as_deref()),
        Command::Track {
            pair,
            eps0,
            eps1,
            steps,
            window,
            guard,
            rel_a,
            rel_b,
            certificate,
        } => {
            let (h, a) = (load(&pair.h)?, load(&pair.a)?);
            let w = GapWindow::new(window.0, window.1, relspec_core::inclusion::WindowSource::Window0);
            let guard = match guard {
                Some(GuardArg::Lower) => Some(Guard::Lower),
                Some(GuardArg::Upper) => Some(Guard::Upper),
                Some(GuardArg::Both) => Some(Guard::Both),
                None => Guard::default_for(&w),
            };
            let traj = track_with_guard(&h, &a, BoundPair::new(*rel_a, *rel_b)?, (*eps0, *eps1), w, *steps, guard)?;
            if let Some(path) = certificate {
                fs::write(path, serde_json::to_string_pretty(&traj)?)?;
            }
            match cli.format {
                Format::Json => emit(&traj)?,
                Format::Csv => print!("{}", trajectory_csv(&traj)),
            }
            Ok(true)
        }
        Command::Bounds {
            pair,
            rel_a,
            rel_b,
            gap,
            refined,
        } => {
            let (h, a) = (load(&pair.h)?, load(&pair.a)?);
            let bounds = BoundPair::new(*rel_a, *rel_b)?;
            if !(gap.0 < gap.1) {
                return Err(HarnessError::Spec(format!("gap needs lo < hi, got {},{}", gap.0, gap.1)));
            }
            let gap = EssentialGap {
                lower: gap.0,
                upper: gap.1,
            };
            let report = if *refined {
                let c = compress(&h, &a, bounds)?;
                enclosure_refined(&h, &a, bounds, c.c_minus, c.c_plus, gap)?
            } else {
                enclosure_bound0(&h, &a, bounds, gap)?
            };
            match cli.format {
                Format::Json => emit(&report)?,
                Format::Csv => {
                    println!("k,lambda_k,lower,upper,mu_k,within");
                    for r in &report.rows {
                        println!("{},{},{},{},{},{}", r.k, r.lambda_k, r.lower, r.upper, r.mu_k, r.within);
                    }
                }
            }
            Ok(report.all_within())
        }
        Command::Verify {
            config,
            suite,
            artifacts,
            out,
        } => {
            let mut spec: EnsembleSpec = serde_json::from_str(&fs::read_to_string(config)?)?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let opts = VerifyOptions {
                tolerance: cli.tol,
                timestamp: !cli.no_timestamp,
                artifacts: artifacts.clone(),
            };
            let report = verify(*suite, &spec, &opts)?;
            let text = match cli.format {
                Format::Json => serde_json::to_string_pretty(&report)? + "\n",
                Format::Csv => report.to_csv(),
            };
            match out {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
            eprintln!("{}: {} passed, {} failed", suite.name(), report.passed, report.failed);
            Ok(report.all_passed())
        }
        Command::Replay { dir } => {
            let outcome = replay(dir)?;
            emit(&outcome)?;
            Ok(outcome.passed)
        }
    }
}

fn spectrum(cli: &Cli, h: &SymmetricOperator) -> CliResult<bool> {
    let eig = eigendecompose(h)?;
    let tol = default_merge_tol(h);
    match cli.format {
        Format::Json => {
            let gaps: Vec<[f64; 2]> = gaps_of_sorted(&eig.values, tol)
                .iter()
                .filter(|g| g.lower.is_finite() && g.upper.is_finite())
                .map(|g| [g.lower, g.upper])
                .collect();
            emit(&json!({
                "values": eig.values,
                "gaps": gaps,
                "inertia": inertia_of(&eig.values, tol).as_array(),
            }))?;
        }
        Format::Csv => {
            println!("index,value");
            for (i, v) in eig.values.iter().enumerate() {
                println!("{i},{v}");
            }
        }
    }
    Ok(true)
}

fn trajectory_csv(traj: &relspec_core::tracker::Trajectory) -> String {
    let k = traj.curves.len();
    let mut out = String::from("epsilon");
    for i in 1..=k {
        out.push_str(&format!(",lambda_{i}"));
    }
    for i in 1..=k {
        out.push_str(&format!(",dlambda_{i}"));
    }
    out.push('\n');
    let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for (j, eps) in traj.grid.iter().enumerate() {
        out.push_str(&eps.to_string());
        for c in traj.curves.iter().chain(&traj.derivatives) {
            out.push(',');
            out.push_str(&cell(c.get(j).copied().flatten()));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct WindowOutput {
    window: [f64; 2],
    source: relspec_core::inclusion::WindowSource,
    empty: bool,
    verified: bool,
    /// Eigenvalues of H + A inside the window (imaginary parts of offending
    /// resolvent points in strip mode).
    violations: Vec<f64>,
}

fn gap_around(values: &[f64], point: f64) -> CliResult<SpectralGap> {
    let lower = values.iter().copied().filter(|&x| x <= point).fold(f64::NEG_INFINITY, f64::max);
    let upper = values.iter().copied().filter(|&x| x > point).fold(f64::INFINITY, f64::min);
    Ok(SpectralGap::new(lower, upper)?)
}

fn window(args: &WindowArgs) -> CliResult<bool> {
    let (h, a) = (load(&args.h)?, load(&args.a)?);
    let bounds = BoundPair::new(args.a_const, args.b_const)?;
    let h_vals = eigendecompose(&h)?.values;
    let t_vals = eigendecompose(&h.add(&a))?.values;
    let inside = |w: &GapWindow, vals: &[f64]| -> Vec<f64> { vals.iter().copied().filter(|&x| w.contains(x)).collect() };

    let (w, violations) = match args.mode {
        WindowMode::Strip => {
            let w = strip_window(bounds, args.point)?;
            // just outside the band the Neumann series for the resolvent converges
            let eta = 1.01 * w.upper.max(f64::MIN_POSITIVE);
            let z = C64::new(args.point, eta);
            let worst = h_vals
                .iter()
                .map(|&l| bounds.radius(l) / (C64::new(l, 0.0) - z).norm())
                .fold(0.0, f64::max);
            (w, if worst < 1.0 { vec![] } else { vec![eta] })
        }
        WindowMode::W0 | WindowMode::W => {
            let gap = gap_around(&h_vals, args.point)?;
            let w = if args.mode == WindowMode::W0 {
                window0(gap, bounds)?
            } else {
                let c = compress(&h, &a, bounds)?;
                window_refined(gap, bounds, c.c_minus, c.c_plus)?
            };
            (w, inside(&w, &t_vals))
        }
        WindowMode::Ess => {
            let m = args
                .essential_threshold
                .ok_or_else(|| HarnessError::Spec("ess mode needs --essential-threshold".into()))?;
            let designation = EssentialDesignation::Threshold(m);
            let designated = designation.resolve(&h_vals)?;
            let gap = gap_around(&designated, args.point)?;
            let c = compress(&h, &a, bounds)?;
            let w = window_essential(gap, bounds, Some((c.c_minus, c.c_plus)), &designated)?;
            let moved: Vec<f64> = designation.indices(&h_vals).iter().map(|&i| t_vals[i]).collect();
            (w, inside(&w, &moved))
        }
        WindowMode::Diagb => {
            let gap = gap_around(&h_vals, 0.0)?;
            let variant = match args.variant {
                VariantArg::Unshifted => DiagonalbVariant::Unshifted,
                VariantArg::Shifted => DiagonalbVariant::Shifted,
            };
            let w = diagonalb_window(
                gap,
                args.a_plus.unwrap_or(bounds.a),
                args.a_minus.unwrap_or(bounds.a),
                args.b_plus.unwrap_or(bounds.b),
                args.b_minus.unwrap_or(bounds.b),
                variant,
            )?;
            (w, inside(&w, &t_vals))
        }
    };
    let verified = violations.is_empty();
    emit(&WindowOutput {
        window: [w.lower, w.upper],
        source: w.source,
        empty: w.empty,
        verified,
        violations,
    })?;
    Ok(verified)
}

#[derive(Deserialize)]
struct BlockConfig {
    p: usize,
    matrix: PathBuf,
}

fn factorize(config: &Path, out: Option<&Path>) -> CliResult<bool> {
    let cfg: BlockConfig = serde_json::from_str(&fs::read_to_string(config)?)?;
    let path = if cfg.matrix.is_relative() {
        config.parent().unwrap_or(Path::new(".")).join(&cfg.matrix)
    } else {
        cfg.matrix.clone()
    };
    let t = load(&path)?;
    let n = t.dim();
    if cfg.p == 0 || cfg.p >= n {
        return Err(HarnessError::Spec(format!("need 0 < p < {n}, got {}", cfg.p)));
    }
    let (p, q) = (cfg.p, n - cfg.p);
    let m = t.matrix();
    let blocks = QuasidefiniteBlocks::new(
        SymmetricOperator::new(m.view((0, 0), (p, p)).into_owned())?,
        SymmetricOperator::new(-m.view((p, p), (q, q)).into_owned())?,
        m.view((0, p), (p, q)).into_owned(),
    )?;
    let fac = quasidefinite_factor(&blocks)?;
    let report = json!({
        "schur_norm": spectral_norm(fac.schur.matrix())?,
        "F_norm": fac.f_norm,
        "inertia": inertia(&t, 1e-12 * t.norm_max())?.as_array(),
    });
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_matrix_market(dir.join("W.mtx"), &fac.congruence.w)?;
        write_matrix_market(dir.join("D.mtx"), fac.congruence.d.matrix())?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    emit(&report)?;
    Ok(true)
}
