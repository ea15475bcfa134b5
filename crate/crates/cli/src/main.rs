use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use serde_json::{json, Value};

use matprolate::operators::Mutation;
use matprolate::timeband::{ModeSelection, TimeBand};
use matprolate::verify::{self, Check};
use matprolate::{CoeffVec, Error, Params, TbConfig};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
const EIGENFUNCTION_POINTS: usize = 201;

const EXIT_CHECK: u8 = 1;
const EXIT_PARAMS: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "matprolate", version, about = "Matrix-valued time-and-band limiting: checks, spectra, reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the identity suite; exit 1 if any check fails.
    Verify {
        /// Also emit the norm-ratio table and the H-matrix prefactor comparison.
        #[arg(long)]
        report_anomalies: bool,
    },
    /// Prolate spectrum: B-eigenvalues, Rayleigh values under M, cross residuals.
    Spectrum,
    /// Kernel identity residual on a grid x grid lattice of [-1, 1]^2.
    KernelCheck,
    /// Reconstruct a random band-limited function from noisy cap samples.
    Reconstruct,
    /// Sample prolate modes on a uniform grid of [-1, alpha].
    Eigenfunctions,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args, Debug)]
struct Opts {
    #[arg(long, global = true, default_value_t = 4.0)]
    n: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    p: f64,
    /// Band limit (highest polynomial degree kept).
    #[arg(long = "N", global = true, default_value_t = 10)]
    big_n: usize,
    /// Cap boundary in (-1, 1).
    #[arg(long, global = true, default_value_t = 0.3, allow_negative_numbers = true)]
    alpha: f64,
    /// Minimum Gauss order for the cap quadrature.
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file (default stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Points per axis for kernel-check.
    #[arg(long, global = true, default_value_t = 12)]
    grid: usize,
    /// Number of modes, or `all`.
    #[arg(long, global = true, default_value = "all")]
    modes: Modes,
    /// Standard deviation of the Gaussian noise added to each sample value.
    #[arg(long, global = true, default_value_t = 0.0)]
    noise: f64,
    /// Deliberate corruption of the differential operator (`drop-e0`).
    #[arg(long, global = true, default_value = "none")]
    mutate: Mutation,
}

#[derive(Clone, Copy, Debug)]
enum Modes {
    All,
    Count(usize),
}

impl std::str::FromStr for Modes {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(Modes::All);
        }
        s.parse()
            .map(Modes::Count)
            .map_err(|_| format!("expected an integer or 'all', got '{s}'"))
    }
}

impl From<Modes> for ModeSelection {
    fn from(m: Modes) -> Self {
        match m {
            Modes::All => ModeSelection::All,
            Modes::Count(k) => ModeSelection::Count(k),
        }
    }
}

/// What went wrong, mapped onto exit codes.
enum Failure {
    Params(String),
    Check(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if verify::is_parameter_error(&e) {
            Failure::Params(e.to_string())
        } else {
            Failure::Check(e.to_string())
        }
    }
}

/// Rendered output plus whether every check passed.
struct Output {
    text: String,
    pass: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| {
        emit(&cli.opts.out, &out.text)?;
        Ok(out.pass)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK),
        Err(Failure::Params(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PARAMS)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CHECK)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn emit(path: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

fn config(opts: &Opts) -> Result<TbConfig<f64>, Failure> {
    let params = Params::new(opts.n, opts.p)?;
    if !(opts.tol > 0.0) {
        return Err(Failure::Params(format!("tol must be positive, got {}", opts.tol)));
    }
    if !(opts.noise >= 0.0) {
        return Err(Failure::Params(format!("noise must be non-negative, got {}", opts.noise)));
    }
    Ok(TbConfig::new(params, opts.big_n, opts.alpha)?
        .with_quad_order(opts.quad_order)
        .with_mutation(opts.mutate))
}

fn params_json(opts: &Opts) -> Value {
    json!({
        "n": opts.n,
        "p": opts.p,
        "N": opts.big_n,
        "alpha": opts.alpha,
        "quad_order": opts.quad_order,
        "tol": opts.tol,
        "mutate": opts.mutate,
    })
}

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn to_json<S: Serialize>(v: &S) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    let opts = &cli.opts;
    let cfg = config(opts)?;
    match cli.command {
        Command::Verify { report_anomalies } => cmd_verify(opts, &cfg, report_anomalies),
        Command::Spectrum => cmd_spectrum(opts, &cfg),
        Command::KernelCheck => cmd_kernel_check(opts, &cfg),
        Command::Reconstruct => cmd_reconstruct(opts, &cfg),
        Command::Eigenfunctions => cmd_eigenfunctions(opts, &cfg),
    }
}

fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from("name,residual,tolerance,pass\n");
    for c in checks {
        let _ = writeln!(s, "{},{},{},{}", c.name, num(c.residual), num(c.tolerance), c.pass);
    }
    s
}

fn cmd_verify(opts: &Opts, cfg: &TbConfig<f64>, report_anomalies: bool) -> Result<Output, Failure> {
    let report = verify::run_suite(cfg, opts.tol)?;
    let pass = report.all_pass();
    for c in report.failed() {
        eprintln!("FAIL {}: residual {:e} > {:e}", c.name, c.residual, c.tolerance);
    }
    let text = match opts.format {
        Format::Csv => checks_csv(&report.checks),
        Format::Json => {
            let mut doc = json!({
                "params": params_json(opts),
                "checks": report.checks,
                "tool_version": TOOL_VERSION,
            });
            if report_anomalies {
                doc["anomalies"] = serde_json::to_value(verify::anomalies(&cfg.params)?).expect("serializes");
            }
            to_json(&doc)
        }
    };
    Ok(Output { text, pass })
}

fn cmd_spectrum(opts: &Opts, cfg: &TbConfig<f64>) -> Result<Output, Failure> {
    let tb = TimeBand::new(*cfg)?;
    let rep = tb.prolate_spectrum()?;
    let text = match opts.format {
        Format::Csv => {
            let mut s = String::from("index,b_eig,s_eig,cross_residual,cluster\n");
            for m in &rep.modes {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    m.index,
                    num(m.b_eig),
                    num(m.s_eig),
                    num(m.cross_residual),
                    m.cluster
                );
            }
            s
        }
        Format::Json => to_json(&json!({
            "params": params_json(opts),
            "spectrum": rep,
            "tool_version": TOOL_VERSION,
        })),
    };
    Ok(Output { text, pass: true })
}

fn cmd_kernel_check(opts: &Opts, cfg: &TbConfig<f64>) -> Result<Output, Failure> {
    if opts.grid < 2 {
        return Err(Failure::Params(format!("grid must be at least 2, got {}", opts.grid)));
    }
    let tb = TimeBand::new(*cfg)?;
    let pts: Vec<f64> = (0..opts.grid)
        .map(|i| -1.0 + 2.0 * i as f64 / (opts.grid - 1) as f64)
        .collect();
    let mut rows = Vec::with_capacity(pts.len() * pts.len());
    for &x in &pts {
        for &y in &pts {
            let k = tb.kernel_eval(x, y)?.frobenius();
            let abs = tb.kernel_identity_residual(x, y)?;
            rows.push((x, y, k, abs, abs / (1.0 + k)));
        }
    }
    let worst = rows.iter().fold(0.0f64, |acc, r| acc.max(r.4));
    let check = Check::new("kernel_identity", worst, opts.tol);
    let text = match opts.format {
        Format::Csv => {
            let mut s = String::from("x,y,kernel_norm,absolute_residual,residual\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{},{},{}", num(r.0), num(r.1), num(r.2), num(r.3), num(r.4));
            }
            s
        }
        Format::Json => to_json(&json!({
            "params": params_json(opts),
            "checks": [check],
            "grid": rows.iter().map(|r| json!({
                "x": r.0, "y": r.1, "kernel_norm": r.2, "absolute_residual": r.3, "residual": r.4,
            })).collect::<Vec<_>>(),
            "tool_version": TOOL_VERSION,
        })),
    };
    Ok(Output { text, pass: check.pass })
}

fn cmd_reconstruct(opts: &Opts, cfg: &TbConfig<f64>) -> Result<Output, Failure> {
    let tb = TimeBand::new(*cfg)?;
    let spectrum = tb.prolate_spectrum()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let truth = CoeffVec::new((0..cfg.dim()).map(|_| unit.sample(&mut rng)).collect())?;
    let mut samples = tb.sample(&truth)?;
    if opts.noise > 0.0 {
        let noise = Normal::new(0.0, opts.noise).map_err(|e| Failure::Params(e.to_string()))?;
        for v in &mut samples.values {
            v[0] += noise.sample(&mut rng);
            v[1] += noise.sample(&mut rng);
        }
    }
    let rec = tb.reconstruct(&samples, &spectrum, opts.modes.into(), opts.noise, Some(&truth))?;
    for w in &rec.warnings {
        eprintln!("warning: {w}");
    }
    let text = match opts.format {
        Format::Csv => {
            let mut s = String::from("x,truth_1,truth_2,recovered_1,recovered_2\n");
            for i in 0..EIGENFUNCTION_POINTS {
                let x = -1.0 + 2.0 * i as f64 / (EIGENFUNCTION_POINTS - 1) as f64;
                let t = tb.eval_coeffs(&truth, x);
                let r = tb.eval_coeffs(&rec.coeffs, x);
                let _ = writeln!(s, "{},{},{},{},{}", num(x), num(t[0]), num(t[1]), num(r[0]), num(r[1]));
            }
            s
        }
        Format::Json => to_json(&json!({
            "params": params_json(opts),
            "reconstruction": {
                "relative_error": rec.relative_error,
                "modes_kept": rec.modes_kept,
                "modes_available": spectrum.modes.len(),
                "smallest_kept_s": rec.smallest_kept_s,
                "samples": samples.x.len(),
                "noise": opts.noise,
                "seed": opts.seed,
                "warnings": rec.warnings,
            },
            "tool_version": TOOL_VERSION,
        })),
    };
    Ok(Output { text, pass: true })
}

fn cmd_eigenfunctions(opts: &Opts, cfg: &TbConfig<f64>) -> Result<Output, Failure> {
    let tb = TimeBand::new(*cfg)?;
    let spectrum = tb.prolate_spectrum()?;
    let count = match opts.modes {
        Modes::All => spectrum.modes.len(),
        Modes::Count(k) if k <= spectrum.modes.len() => k,
        Modes::Count(k) => {
            return Err(Failure::Params(format!("{k} modes requested, {} available", spectrum.modes.len())))
        }
    };
    let sampled: Vec<_> = spectrum.modes[..count]
        .iter()
        .map(|m| (m, tb.eigenfunction_grid(m, EIGENFUNCTION_POINTS)))
        .collect();
    let text = match opts.format {
        Format::Csv => {
            let mut s = String::from("mode,x,f1,f2\n");
            for (m, pts) in &sampled {
                for (x, v) in pts {
                    let _ = writeln!(s, "{},{},{},{}", m.index, num(*x), num(v[0]), num(v[1]));
                }
            }
            s
        }
        Format::Json => to_json(&json!({
            "params": params_json(opts),
            "eigenfunctions": sampled.iter().map(|(m, pts)| json!({
                "index": m.index,
                "b_eig": m.b_eig,
                "s_eig": m.s_eig,
                "x": pts.iter().map(|p| p.0).collect::<Vec<_>>(),
                "f1": pts.iter().map(|p| p.1[0]).collect::<Vec<_>>(),
                "f2": pts.iter().map(|p| p.1[1]).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "tool_version": TOOL_VERSION,
        })),
    };
    Ok(Output { text, pass: true })
}
