//! `mzlab`: batch experiments for the Marcinkiewicz integral and its weighted bounds.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use mzlab_core::domination::{geometric_levels, weak11_check};
use mzlab_core::dyadic::{build_grids, build_sparse_family, cz_decompose};
use mzlab_core::experiments::{
    parse_exponent, parse_grid, parse_int_range, run_sweep, weights_table, write_rows_csv, ExperimentConfig, NormOp,
    SweepKind,
};
use mzlab_core::fourier::{approximation_decay, decay_profile, decay_summary};
use mzlab_core::parallel::with_threads;
use mzlab_core::regression::{full_regression, generate_goldens, GoldenStore, DEFAULT_GOLDENS};
use mzlab_core::scenes::scene;
use mzlab_core::sphere::{bank_kernel, l1_sphere_norm, lq_sphere_norm, BANK_NAMES};
use mzlab_core::{MzError, SampledField};

#[derive(Parser)]
#[command(
    name = "mzlab",
    version,
    about = "Marcinkiewicz integral experiments: operators, weights, sparse bounds, sweeps"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Grid resolution N (cells per axis)
    #[arg(long, global = true)]
    n_grid: Option<usize>,
    /// Box half-width L
    #[arg(long = "box", global = true)]
    box_half_width: Option<f64>,
    /// Gauss-Legendre nodes in t
    #[arg(long, global = true)]
    t_nodes: Option<usize>,
    /// Seed for random cube banks and scenes
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// key=value configuration file; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Apply an operator to a scene and write the field
    Apply {
        /// Operator: identity, hlmax, tsing, marc, marc-dyadic, marc-l
        #[arg(long, default_value = "marc")]
        op: String,
        /// Angular kernel: cos, sin3, step, sing-q2, sing-q4
        #[arg(long)]
        omega: Option<String>,
        /// Scene name
        #[arg(long = "f", default_value = "gaussian")]
        scene: String,
        /// Mollification level for marc-l
        #[arg(long)]
        l: Option<i32>,
        /// csv or mzf (default: mzf for files ending in .mzf, csv otherwise)
        #[arg(long)]
        format: Option<String>,
    },
    /// Tabulate the angular kernel bank, or dump one kernel's samples
    Kernels {
        /// Print the samples of this kernel instead of the table
        #[arg(long)]
        samples: Option<String>,
    },
    /// Fourier decay profile of one truncated kernel
    Decay {
        /// Angular kernel: cos, sin3, step, sing-q2, sing-q4
        #[arg(long)]
        omega: Option<String>,
        /// Dyadic scale j
        #[arg(long, default_value_t = -1)]
        j: i32,
        /// Radius parameter t in [1, 2]
        #[arg(long, default_value_t = 1.5)]
        t: f64,
        /// Radial shells in the profile
        #[arg(long, default_value_t = 24)]
        shells: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Approximation of the dyadic square function by its mollified versions
    Approx {
        /// Angular kernel: cos, sin3, step, sing-q2, sing-q4
        #[arg(long)]
        omega: Option<String>,
        /// Levels, `lo..hi` or a comma list
        #[arg(long, default_value = "1..5")]
        levels: String,
        /// Comma list of scenes
        #[arg(long, default_value = "gaussian,two-bump,disk")]
        scenes: String,
    },
    /// Weight constants and the reverse Hoelder step over the power family
    Weights {
        /// Lebesgue exponent p
        #[arg(long)]
        p: Option<f64>,
        /// Power-weight exponents, `lo:hi:step` or a comma list
        #[arg(long)]
        a_grid: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Build and certify sparse families on all shifted grids
    SparseCheck {
        /// Scene name
        #[arg(long = "f", default_value = "gaussian")]
        scene: String,
        /// Sparseness parameter eta in (0, 1)
        #[arg(long)]
        eta: Option<f64>,
        /// CZ level; skipped when omitted
        #[arg(long)]
        lambda: Option<f64>,
        /// Directory for per-grid family JSON files
        #[arg(long)]
        families_dir: Option<PathBuf>,
    },
    /// Level-set ratios of mollified square functions
    Weak11 {
        /// Angular kernel: cos, sin3, step, sing-q2, sing-q4
        #[arg(long)]
        omega: Option<String>,
        /// Scene name
        #[arg(long = "f", default_value = "spike")]
        scene: String,
        /// Mollification levels, `lo..hi` or a comma list
        #[arg(long, default_value = "1,2,4")]
        levels: String,
        /// Number of geometric levels lambda
        #[arg(long, default_value_t = 24)]
        lambdas: usize,
    },
    /// Weighted norm sweep over power weights
    Sweep {
        #[arg(value_parser = ["theorem12", "theorem11", "buckley"])]
        kind: String,
        /// Angular kernel: cos, sin3, step, sing-q2, sing-q4
        #[arg(long)]
        omega: Option<String>,
        /// Operator whose norm is estimated (default: marc)
        #[arg(long)]
        operator: Option<String>,
        /// Kernel integrability exponent q (`inf` allowed)
        #[arg(long)]
        q: Option<String>,
        /// Lebesgue exponent p
        #[arg(long)]
        p: Option<f64>,
        /// Power-weight exponents, `lo:hi:step` or a comma list
        #[arg(long)]
        a_grid: Option<String>,
        /// Multiplier on the theoretical bound
        #[arg(long)]
        slack: Option<f64>,
        /// Random cubes added to the standard cube bank
        #[arg(long)]
        bank_random: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Golden-value regression suite
    Regress {
        /// Suite name or check id prefix
        #[arg(long)]
        filter: Option<String>,
        /// Golden store path (default: the store shipped with the library)
        #[arg(long)]
        goldens: Option<PathBuf>,
        /// Recompute and store golden values instead of checking them
        #[arg(long)]
        generate: bool,
        /// JUnit XML output path
        #[arg(long)]
        junit: Option<PathBuf>,
    },
}

/// A command outcome: whether its checks passed.
struct Outcome {
    pass: bool,
}

impl Outcome {
    fn from(pass: bool) -> Self {
        Self { pass }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = cli.global.threads;
    let run = || run(cli);
    let result = match threads {
        Some(t) => with_threads(t, run),
        None => run(),
    };
    match result {
        Ok(o) if o.pass => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    let io = e
        .downcast_ref::<io::Error>()
        .or_else(|| match e.downcast_ref::<MzError>() {
            Some(MzError::Io(io)) => Some(io),
            _ => None,
        });
    io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<MzError>() {
        Some(MzError::MissingArtifact(_)) => 3,
        Some(
            MzError::UnknownName(_)
            | MzError::InvalidArgument(_)
            | MzError::InvalidExponent(_)
            | MzError::InvalidGrid(_)
            | MzError::WeightWindow { .. }
            | MzError::Hypothesis(_)
            | MzError::Format(_),
        ) => 2,
        _ => 1,
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    MzError::InvalidArgument(msg.into()).into()
}

fn base_config(g: &Global) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &g.config {
        let text = fs::read_to_string(path)
            .map_err(|e| anyhow::Error::from(MzError::MissingArtifact(format!("config {}: {e}", path.display()))))?;
        cfg.apply_text(&text)?;
    }
    if let Some(n) = g.n_grid {
        cfg.n_grid = n;
    }
    if let Some(b) = g.box_half_width {
        cfg.box_half_width = b;
    }
    if let Some(t) = g.t_nodes {
        cfg.t_nodes = t;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn writer(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            ))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json(out: &Option<PathBuf>, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut w = writer(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_timing(out: &Option<PathBuf>, started: Instant) -> anyhow::Result<()> {
    if let Some(p) = out {
        let mut name = p.as_os_str().to_owned();
        name.push(".timing.json");
        let body = json!({ "wall_seconds": started.elapsed().as_secs_f64() });
        fs::write(PathBuf::from(name), serde_json::to_string_pretty(&body)? + "\n")?;
    }
    Ok(())
}

fn omega_or(cfg: &mut ExperimentConfig, omega: Option<String>) {
    if let Some(o) = omega {
        cfg.omega = o;
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let g = &cli.global;
    let mut cfg = base_config(g)?;
    match cli.command {
        Command::Apply {
            op,
            omega,
            scene: name,
            l,
            format,
        } => {
            omega_or(&mut cfg, omega);
            cfg.operator = op;
            if l.is_some() {
                cfg.l = l;
            }
            let f = scene(&name, cfg.grid()?)?;
            let out = NormOp::from_config(&cfg)?.apply(&f)?;
            let fmt = format.unwrap_or_else(|| match &g.out {
                Some(p) if p.extension().is_some_and(|e| e == "mzf") => "mzf".into(),
                _ => "csv".into(),
            });
            let mut w = writer(&g.out)?;
            match fmt.as_str() {
                "mzf" => out.write_mzf(&mut w)?,
                "csv" => out.write_csv(&mut w)?,
                other => bail!(usage(format!("unknown field format '{other}'"))),
            }
            w.flush()?;
            Ok(Outcome::from(true))
        }
        Command::Kernels { samples } => {
            let mut w = writer(&g.out)?;
            if let Some(name) = samples {
                bank_kernel(&name)?.to_csv(&mut w)?;
            } else {
                let rows: Vec<_> = BANK_NAMES
                    .iter()
                    .map(|name| -> anyhow::Result<_> {
                        let k = bank_kernel(name)?;
                        Ok(KernelRow {
                            name: name.to_string(),
                            q_class: k.q_class(),
                            mean: k.integral(),
                            l1: l1_sphere_norm(&k),
                            l2: lq_sphere_norm(&k, 2.0)?,
                            class_norm: lq_sphere_norm(&k, k.q_class())?,
                        })
                    })
                    .collect::<anyhow::Result<_>>()?;
                write_rows_csv(&mut w, &rows)?;
            }
            w.flush()?;
            Ok(Outcome::from(true))
        }
        Command::Decay {
            omega,
            j,
            t,
            shells,
            format,
        } => {
            omega_or(&mut cfg, omega);
            let om = bank_kernel(&cfg.omega)?;
            let grid = cfg.grid()?;
            let profile = decay_profile(&om, j, t, shells, grid)?;
            let summary = decay_summary(&om, j, t, grid)?;
            let pass = summary.rise_slope >= 0.8 && summary.tail_slope <= -0.1 && summary.collapse <= 0.1;
            match format {
                Format::Csv => {
                    let mut w = writer(&g.out)?;
                    write_rows_csv(&mut w, &profile.rows)?;
                    w.flush()?;
                    eprintln!("{}", serde_json::to_string(&summary)?);
                }
                Format::Json => write_json(&g.out, &json!({ "profile": profile, "summary": summary, "pass": pass }))?,
            }
            Ok(Outcome::from(pass))
        }
        Command::Approx { omega, levels, scenes } => {
            omega_or(&mut cfg, omega);
            let grid = cfg.grid()?;
            let ls = parse_int_range(&levels).map_err(usage)?;
            let fields: Vec<SampledField> = scenes
                .split(',')
                .map(|s| scene(s.trim(), grid))
                .collect::<Result<_, _>>()?;
            let r = approximation_decay(
                &bank_kernel(&cfg.omega)?.normalized()?,
                &fields,
                &ls,
                &cfg.quadrature()?,
            )?;
            let pass = r.theta_operator > 0.2 && r.agreement <= 0.05;
            write_json(&g.out, &json!({ "config": cfg, "result": r, "pass": pass }))?;
            Ok(Outcome::from(pass))
        }
        Command::Weights { p, a_grid, format } => {
            if let Some(p) = p {
                cfg.p = p;
            }
            if let Some(a) = a_grid {
                cfg.a_grid = Some(parse_grid(&a).map_err(usage)?);
            }
            let rows = weights_table(&cfg)?;
            let pass = rows.iter().all(|r| r.rh_holds);
            match format {
                Format::Csv => {
                    let mut w = writer(&g.out)?;
                    write_rows_csv(&mut w, &rows)?;
                    w.flush()?;
                }
                Format::Json => write_json(&g.out, &json!({ "config": cfg, "rows": rows, "pass": pass }))?,
            }
            Ok(Outcome::from(pass))
        }
        Command::SparseCheck {
            scene: name,
            eta,
            lambda,
            families_dir,
        } => {
            let eta = eta.unwrap_or(cfg.eta);
            let grid = cfg.grid()?;
            let f = scene(&name, grid)?.abs();
            let mut grids = Vec::new();
            let mut pass = true;
            for (k, spec) in build_grids(&grid).iter().enumerate() {
                let fam = build_sparse_family(&f, spec, eta)?;
                let verified = fam.verify().is_ok();
                pass &= verified;
                if let Some(dir) = &families_dir {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join(format!("family-{k}.json")), fam.to_json()?)?;
                }
                let mut entry =
                    json!({ "grid": k, "shift": spec.shift, "members": fam.members.len(), "verified": verified });
                if let Some(lambda) = lambda {
                    let cz = cz_decompose(&f, lambda, spec)?;
                    let mut recon = cz.good.clone();
                    for b in &cz.bad_parts {
                        recon = recon.add(&b.to_field(grid))?;
                    }
                    let err = recon.sub(&f)?.max_abs();
                    let mean = cz.bad_parts.iter().map(|b| b.mean().abs()).fold(0.0, f64::max);
                    pass &= err <= 1e-12 && mean <= 1e-10;
                    entry["cz"] = json!({ "cubes": cz.cubes.len(), "reconstruction": err, "bad_mean": mean });
                }
                grids.push(entry);
            }
            write_json(
                &g.out,
                &json!({ "scene": name, "eta": eta, "grids": grids, "pass": pass }),
            )?;
            Ok(Outcome::from(pass))
        }
        Command::Weak11 {
            omega,
            scene: name,
            levels,
            lambdas,
        } => {
            omega_or(&mut cfg, omega);
            let grid = cfg.grid()?;
            let ls = parse_int_range(&levels).map_err(usage)?;
            let f = scene(&name, grid)?;
            let om = bank_kernel(&cfg.omega)?.normalized()?;
            let base = mzlab_core::operators::SquarePlan::dyadic(&om, grid, &cfg.quadrature()?)?;
            let top = base.apply(&f)?.field.max_abs();
            let lv = geometric_levels(1e-3 * top, top, lambdas);
            let checks = ls
                .iter()
                .map(|&l| weak11_check(&mzlab_core::operators::SquarePlan::mollify(&base, l)?, &f, &lv))
                .collect::<Result<Vec<_>, _>>()?;
            let c_hat = checks.iter().map(|c| c.max_ratio_over_l).fold(0.0, f64::max);
            write_json(
                &g.out,
                &json!({ "config": cfg, "scene": name, "checks": checks, "c_hat": c_hat }),
            )?;
            Ok(Outcome::from(c_hat.is_finite()))
        }
        Command::Sweep {
            kind,
            omega,
            operator,
            q,
            p,
            a_grid,
            slack,
            bank_random,
            format,
        } => {
            omega_or(&mut cfg, omega);
            if let Some(o) = operator {
                cfg.operator = o;
            }
            if let Some(q) = q {
                cfg.q = parse_exponent(&q).map_err(usage)?;
            }
            if let Some(p) = p {
                cfg.p = p;
            }
            if let Some(a) = a_grid {
                cfg.a_grid = Some(parse_grid(&a).map_err(usage)?);
            }
            if let Some(s) = slack {
                cfg.slack = s;
            }
            if let Some(b) = bank_random {
                cfg.bank_random = b;
            }
            let started = Instant::now();
            let report = run_sweep(SweepKind::parse(&kind)?, &cfg)?;
            match format {
                Format::Json => {
                    let mut w = writer(&g.out)?;
                    w.write_all(report.to_json()?.as_bytes())?;
                    writeln!(w)?;
                    w.flush()?;
                }
                Format::Csv => {
                    let mut w = writer(&g.out)?;
                    report.write_csv(&mut w)?;
                    w.flush()?;
                }
            }
            write_timing(&g.out, started)?;
            info!("sweep {kind}: pass={}", report.pass);
            Ok(Outcome::from(report.pass))
        }
        Command::Regress {
            filter,
            goldens,
            generate,
            junit,
        } => {
            let path = goldens.unwrap_or_else(|| PathBuf::from(DEFAULT_GOLDENS));
            let started = Instant::now();
            if generate {
                let mut store = match GoldenStore::load(&path) {
                    Ok(s) => s,
                    Err(MzError::MissingArtifact(_)) => GoldenStore::default(),
                    Err(e) => return Err(e.into()),
                };
                let problems = generate_goldens(&mut store, filter.as_deref())?;
                store.save(&path)?;
                for p in &problems {
                    eprintln!("warning: property failed while generating: {p}");
                }
                eprintln!("wrote {} golden values to {}", store.values.len(), path.display());
                return Ok(Outcome::from(problems.is_empty()));
            }
            let store = GoldenStore::load(&path)?;
            let report = full_regression(&store, filter.as_deref())?;
            write_json(&g.out, &report)?;
            if let Some(j) = junit {
                write_file(&j, &report.to_junit())?;
            }
            write_timing(&g.out, started)?;
            for c in report.checks.iter().filter(|c| !c.messages.is_empty()) {
                eprintln!("{}/{}: {}", c.suite, c.name, c.messages.join("; "));
            }
            eprintln!("regression: {} passed, {} failed", report.passed, report.failed);
            Ok(Outcome::from(report.pass()))
        }
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct KernelRow {
    name: String,
    q_class: f64,
    mean: f64,
    l1: f64,
    l2: f64,
    class_norm: f64,
}
