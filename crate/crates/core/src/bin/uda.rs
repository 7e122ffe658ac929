use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use uda_core::commands::{self, ProbeFamily};
use uda_core::config::{OutputFormat, RunConfig};
use uda_core::linalg::HermitianOperator;
use uda_core::marginal::SubsystemCollection;
use uda_core::probes::counterexample_weight;
use uda_core::runlog::{self, RunRecord};
use uda_core::states::StateSpec;
use uda_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "uda", version, about = "Robustness certification for states determined by their marginals")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML or JSON run configuration (falls back to $MC_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Rank tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    solver_tol: Option<f64>,
    #[arg(long, global = true)]
    skip_uda_check: bool,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Append a run record to this directory.
    #[arg(long, global = true)]
    run_log: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify linear robustness of a state from its marginals.
    Certify {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        subsystems: PathBuf,
        /// Where to write the witness; defaults to `<out>.witness.json`.
        #[arg(long)]
        witness_out: Option<PathBuf>,
    },
    /// Robustness exponents of cluster and ring states, n = 4..7.
    Table1,
    /// Exact exponents of Dicke states from pair marginals.
    DickeClassify {
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        #[arg(long)]
        allow_large: bool,
    },
    /// Fit local and global deviation exponents along a family.
    Probe {
        #[arg(long, value_enum, default_value_t = FamilyKind::Tangent)]
        family: FamilyKind,
        #[arg(long)]
        state: Option<PathBuf>,
        /// Bare operator or a NOT_ROBUST verdict file.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[arg(long)]
        subsystems: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        ell: Option<usize>,
    },
    /// Evaluate the GME witness on measured pair marginals.
    Gme {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Kernel dimension by both constructions.
    KernelDim {
        #[arg(long)]
        subsystems: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyKind {
    Tangent,
    DickeCounterexample,
    Depolarizing,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Certify { .. } => "certify",
            Command::Table1 => "table1",
            Command::DickeClassify { .. } => "dicke-classify",
            Command::Probe { .. } => "probe",
            Command::Gme { .. } => "gme",
            Command::KernelDim { .. } => "kernel-dim",
        }
    }
}

struct Output {
    exit: i32,
    json: serde_json::Value,
    csv: Option<String>,
    text: String,
    default_format: OutputFormat,
}

impl Output {
    fn new<T: Serialize>(exit: i32, payload: &T, csv: Option<String>, text: String, default_format: OutputFormat) -> Result<Self> {
        Ok(Self {
            exit,
            json: serde_json::to_value(payload)?,
            csv,
            text,
            default_format,
        })
    }

    fn render(&self, format: OutputFormat) -> Result<String> {
        Ok(match format {
            OutputFormat::Json => serde_json::to_string_pretty(&self.json)? + "\n",
            OutputFormat::Csv => self
                .csv
                .clone()
                .ok_or_else(|| Error::InvalidInput("this command has no CSV form".into()))?,
            OutputFormat::Text => self.text.clone(),
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn config(g: &Global) -> Result<RunConfig> {
    let mut cfg = RunConfig::resolve(g.config.as_deref())?;
    if let Some(t) = g.tol {
        cfg.rank_tolerance = t;
    }
    if let Some(t) = g.solver_tol {
        cfg.solver_tolerance = t;
    }
    if g.skip_uda_check {
        cfg.skip_uda_check = true;
    }
    if g.jobs.is_some() {
        cfg.jobs = g.jobs;
    }
    if g.run_log.is_some() {
        cfg.run_log_dir = g.run_log.clone();
    }
    if g.format.is_some() {
        cfg.output_format = g.format;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32> {
    let cfg = config(&cli.global)?;
    let start = Instant::now();
    let out = dispatch(&cli.command, &cli.global, &cfg)?;
    let rendered = out.render(cfg.output_format.unwrap_or(out.default_format))?;
    match &cli.global.out {
        Some(p) => std::fs::write(p, &rendered)?,
        None => print!("{rendered}"),
    }
    if let Some(dir) = &cfg.run_log_dir {
        let mut rec = RunRecord::new(cli.command.name(), std::env::args().skip(1).collect(), cfg.clone());
        rec.exit_code = out.exit;
        rec.payload = out.json.clone();
        rec.duration_secs = start.elapsed().as_secs_f64();
        let path = runlog::append(dir, &rec)?;
        log::info!("run record written to {}", path.display());
    }
    Ok(out.exit)
}

fn witness_path(explicit: Option<&Path>, out: Option<&Path>) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| {
        out.map(|o| {
            let stem = o.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            o.with_file_name(format!("{stem}.witness.json"))
        })
    })
}

fn dispatch(cmd: &Command, g: &Global, cfg: &RunConfig) -> Result<Output> {
    match cmd {
        Command::Certify {
            state,
            subsystems,
            witness_out,
        } => {
            let v = commands::run_certify(state, subsystems, cfg)?;
            if let (Some(x), Some(p)) = (&v.witness, witness_path(witness_out.as_deref(), g.out.as_deref())) {
                std::fs::write(&p, serde_json::to_string_pretty(x)? + "\n")?;
            }
            let stage = serde_json::to_value(v.stage)?;
            let verdict = serde_json::to_value(v.verdict)?;
            let csv = format!(
                "state,verdict,stage,kernel_dim\n{},{},{},{}\n",
                v.diagnostics.state,
                verdict.as_str().unwrap_or_default(),
                stage.as_str().unwrap_or_default(),
                v.kernel_dim
            );
            let mut text = format!(
                "{}: {} at {} (kernel dim {}, rank {})\n",
                v.diagnostics.state,
                verdict.as_str().unwrap_or_default(),
                stage.as_str().unwrap_or_default(),
                v.kernel_dim,
                v.diagnostics.rank
            );
            for w in &v.diagnostics.warnings {
                text.push_str(&format!("warning: {w}\n"));
            }
            Output::new(v.exit_code(), &v, Some(csv), text, OutputFormat::Json)
        }
        Command::Table1 => {
            let rows = commands::table1(cfg)?;
            let failed = rows.iter().any(|r| r.status != "ok");
            let text = rows
                .iter()
                .map(|r| format!("{:<8} n={} alpha*={:<3} {}\n", r.family, r.n, r.alpha_star, r.status))
                .collect();
            Output::new(i32::from(failed), &rows, Some(commands::table1_csv(&rows)), text, OutputFormat::Csv)
        }
        Command::DickeClassify { n_max, allow_large } => {
            let rows = commands::dicke_classify(*n_max, *allow_large, cfg)?;
            let failed = rows.iter().any(|r| r.status != "ok");
            let text = rows
                .iter()
                .map(|r| {
                    format!(
                        "D({},{}) alpha*={:<3} route={:?} coefficient={:.6} {}\n",
                        r.n, r.k, r.alpha_star, r.route, r.coefficient, r.status
                    )
                })
                .collect();
            Output::new(i32::from(failed), &rows, Some(commands::dicke_csv(&rows)), text, OutputFormat::Csv)
        }
        Command::Probe {
            family,
            state,
            witness,
            subsystems,
            n,
            k,
            ell,
        } => {
            let fam = probe_family(*family, state.as_deref(), witness.as_deref(), subsystems.as_deref(), *n, *k, *ell)?;
            let res = commands::run_probe(&fam, cfg)?;
            let text = format!(
                "{}: slope_marginal={:.4} (r2 {:.6}) slope_global={:.4} (r2 {:.6}) within_windows={}\n",
                res.family,
                res.report.slope_marginal,
                res.report.r_squared_marginal,
                res.report.slope_global,
                res.report.r_squared_global,
                res.within_windows
            );
            let exit = if res.within_windows { 0 } else { 10 };
            Output::new(exit, &res, Some(res.report.to_csv()), text, OutputFormat::Json)
        }
        Command::Gme { data, n, k } => {
            let rep = commands::run_gme(data, *n, *k)?;
            let csv = format!(
                "n,k,beta,omega,threshold,measured_discrepancy,fidelity_lower_bound,certified\n{},{},{},{},{},{},{},{}\n",
                rep.target.n,
                rep.target.k,
                rep.beta,
                rep.omega,
                rep.threshold,
                rep.measured_discrepancy,
                rep.fidelity_lower_bound,
                rep.certified
            );
            let text = format!(
                "D({},{}): discrepancy {:.6e} vs threshold {:.6} -> {} (fidelity >= {:.6})\n",
                rep.target.n,
                rep.target.k,
                rep.measured_discrepancy,
                rep.threshold,
                if rep.certified { "GME certified" } else { "not certified" },
                rep.fidelity_lower_bound
            );
            Output::new(if rep.certified { 0 } else { 10 }, &rep, Some(csv), text, OutputFormat::Json)
        }
        Command::KernelDim { subsystems } => {
            let rep = commands::run_kernel_dim(subsystems, cfg)?;
            let csv = format!("n,pauli,svd,agree\n{},{},{},{}\n", rep.n, rep.pauli, rep.svd, rep.agree);
            let text = format!("kernel dimension: pauli {} svd {}\n", rep.pauli, rep.svd);
            Output::new(if rep.agree { 0 } else { 1 }, &rep, Some(csv), text, OutputFormat::Json)
        }
    }
}

fn probe_family(
    kind: FamilyKind,
    state: Option<&Path>,
    witness: Option<&Path>,
    subsystems: Option<&Path>,
    n: Option<usize>,
    k: Option<usize>,
    ell: Option<usize>,
) -> Result<ProbeFamily> {
    let need = |what: &str| Error::InvalidInput(format!("probe: --{what} is required for this family"));
    let load_s = |p: Option<&Path>| -> Result<Option<SubsystemCollection>> {
        p.map(|p| commands::load_json(p, "subsystems")).transpose()
    };
    match kind {
        FamilyKind::DickeCounterexample => {
            let n = n.ok_or_else(|| need("n"))?;
            let k = k.ok_or_else(|| need("k"))?;
            let ell = match ell {
                Some(l) => l,
                None => counterexample_weight(n, k).ok_or(Error::NoCounterexample { n, k })?,
            };
            Ok(ProbeFamily::DickeCounterexample { n, k, ell })
        }
        FamilyKind::Tangent => {
            let spec: StateSpec = commands::load_json(state.ok_or_else(|| need("state"))?, "state")?;
            let (x, from_verdict): (HermitianOperator, _) = commands::load_witness(witness.ok_or_else(|| need("witness"))?)?;
            let s = load_s(subsystems)?.or(from_verdict).ok_or_else(|| need("subsystems"))?;
            Ok(ProbeFamily::Tangent {
                rho: spec.materialize()?,
                witness: x,
                subsystems: s,
            })
        }
        FamilyKind::Depolarizing => {
            let spec: StateSpec = commands::load_json(state.ok_or_else(|| need("state"))?, "state")?;
            let s = load_s(subsystems)?.ok_or_else(|| need("subsystems"))?;
            Ok(ProbeFamily::Depolarizing {
                rho: spec.materialize()?,
                subsystems: s,
            })
        }
    }
}
