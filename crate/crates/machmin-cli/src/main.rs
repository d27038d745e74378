//! Command-line harness: generate instances, query the exact oracle, drive
//! the online schedulers, compare them in bulk, and check infeasibility
//! certificates.
//!
//! Exit codes: 0 success (feasible run / accepted certificate), 1 a run
//! failed or a certificate was rejected, 2 usage or input errors. All data
//! output is deterministic for fixed inputs; wall-clock timings appear only
//! behind `--timing`.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use machmin::{
    check_critical, check_weakly_critical, demand_lower_bound, extract_sjf_certificate, feasible,
    generate, implied_lower_bound, min_machines, simulate, simulation_lookahead, verify,
    AdaptiveConfig, AdaptiveHybrid, CmsScheduler, CriticalPair, GenKind, GenSpec, HybridConfig,
    HybridScheduler, Instance, OnlineScheduler, PolicyScheduler, Rat, RunResult, StopPolicy,
    Verdict,
};
use rayon::prelude::*;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_OK: u8 = 0;
const EXIT_FAILED_RUN: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "machmin",
    about = "Online machine minimization laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded instance file
    Gen(GenArgs),
    /// Compute the exact minimum machine count for an instance
    Oracle(OracleArgs),
    /// Run one online scheduler over an instance
    Run(RunArgs),
    /// Run a scheduler matrix over instance files and emit a CSV table
    Compare(CompareArgs),
    /// Check an infeasibility certificate against an instance
    Certify(CertifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Uniform,
    Bucketed,
    VeryTight,
    Loose,
    Laminar,
    Agreeable,
    AdversarialDoubling,
}

#[derive(Args)]
struct GenArgs {
    /// Instance family
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Number of jobs
    #[arg(long)]
    n: usize,
    /// Releases and deadlines are drawn inside [0, horizon]
    #[arg(long, default_value_t = 64)]
    horizon: i64,
    /// Largest job size
    #[arg(long, default_value_t = 16)]
    max_size: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lower end of the slack-share range (bucketed), e.g. 1/16
    #[arg(long)]
    l1: Option<String>,
    /// Upper end of the slack-share range (bucketed), e.g. 1/4
    #[arg(long)]
    l2: Option<String>,
    /// Tightness target (very-tight): slack share at most 1/m
    #[arg(long)]
    m: Option<u32>,
    /// Slack-share floor (loose), e.g. 1/2
    #[arg(long)]
    rho0: Option<String>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    /// Machine speed as a rational, e.g. 3/2
    #[arg(long, default_value = "1")]
    speed: String,
    /// Also extract a feasible schedule and verify it
    #[arg(long)]
    witness: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgArg {
    Edf,
    Sjf,
    Cms,
    Hybrid,
    HybridAdaptive,
}

#[derive(Args)]
struct RunArgs {
    instance: PathBuf,
    #[arg(long, value_enum)]
    alg: AlgArg,
    /// Fleet size for edf / sjf / cms
    #[arg(long)]
    machines: Option<usize>,
    /// Machine target m* for hybrid; initial estimate for hybrid-adaptive
    #[arg(long)]
    mstar: Option<u32>,
    /// Width multiplier for the deadline block
    #[arg(long, default_value_t = 16)]
    c_edf: usize,
    /// Width multiplier per size-ordered bucket block
    #[arg(long, default_value_t = 8)]
    c_sjf: usize,
    /// Width multiplier for the budgeted block
    #[arg(long, default_value_t = 8)]
    c_cms: usize,
    #[arg(long, default_value = "1")]
    speed: String,
    /// Attach the per-event placement/budget log (cms only)
    #[arg(long)]
    trace: bool,
    /// Keep scheduling until a deadline actually passes
    #[arg(long)]
    run_to_miss: bool,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Instance files
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    /// Scheduler spec, repeatable: edf@4, sjf@2, cms@8, hybrid@4,
    /// hybrid-adaptive[@initial]
    #[arg(long = "alg", required = true)]
    algs: Vec<String>,
    #[arg(long, default_value = "1")]
    speed: String,
    /// Output CSV path
    #[arg(long)]
    csv: PathBuf,
    /// Append a wall-time column (breaks byte-for-byte reproducibility)
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct CertifyArgs {
    /// Certificate JSON; with --from-run this slot holds the instance
    #[arg(value_name = "CERTIFICATE")]
    first: Option<PathBuf>,
    /// Instance file
    #[arg(value_name = "INSTANCE")]
    second: Option<PathBuf>,
    /// Extract the certificate from a run report (JSON from `run --out`)
    /// instead of reading one; the single positional is then the instance
    #[arg(long, value_name = "RUN")]
    from_run: Option<PathBuf>,
    /// Check the aggregate (weak) form instead of the per-job form
    #[arg(long)]
    weak: bool,
    /// Write the (extracted) certificate here
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes (e.g. `machmin ... | head`)
    // instead of panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Certify(a) => cmd_certify(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (
            n.trim().parse::<i64>().context("bad numerator")?,
            d.trim().parse::<i64>().context("bad denominator")?,
        ),
        None => (s.parse::<i64>().context("not a rational (use p or p/q)")?, 1),
    };
    if den == 0 {
        bail!("zero denominator in {s:?}");
    }
    Ok(Rat::new(num as i128, den as i128))
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read instance {}", path.display()))?;
    Instance::from_json(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn write_or_print(out: &Option<PathBuf>, data: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, data)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{data}"),
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<u8> {
    let need = |opt: &Option<String>, flag: &str| -> Result<Rat> {
        parse_rat(
            opt.as_deref()
                .ok_or_else(|| anyhow!("--kind {:?} requires {flag}", kind_name(a.kind)))?,
        )
    };
    let kind = match a.kind {
        KindArg::Uniform => GenKind::Uniform,
        KindArg::Bucketed => GenKind::Bucketed {
            lo: need(&a.l1, "--l1")?,
            hi: need(&a.l2, "--l2")?,
        },
        KindArg::VeryTight => GenKind::VeryTight {
            m: a.m.ok_or_else(|| anyhow!("--kind very-tight requires --m"))?,
        },
        KindArg::Loose => GenKind::Loose {
            rho0: need(&a.rho0, "--rho0")?,
        },
        KindArg::Laminar => GenKind::Laminar,
        KindArg::Agreeable => GenKind::Agreeable,
        KindArg::AdversarialDoubling => GenKind::AdversarialDoubling,
    };
    let spec = GenSpec {
        kind,
        n: a.n,
        horizon: a.horizon,
        max_size: a.max_size,
        seed: a.seed,
    };
    let inst = generate(&spec)?;
    let mut text = inst.to_json();
    text.push('\n');
    write_or_print(&a.out, &text)?;
    Ok(EXIT_OK)
}

fn kind_name(k: KindArg) -> &'static str {
    match k {
        KindArg::Uniform => "uniform",
        KindArg::Bucketed => "bucketed",
        KindArg::VeryTight => "very-tight",
        KindArg::Loose => "loose",
        KindArg::Laminar => "laminar",
        KindArg::Agreeable => "agreeable",
        KindArg::AdversarialDoubling => "adversarial-doubling",
    }
}

fn cmd_oracle(a: OracleArgs) -> Result<u8> {
    let inst = load_instance(&a.instance)?;
    let speed = parse_rat(&a.speed)?;
    let m_star = match min_machines(&inst, speed) {
        Ok(m) => m,
        Err(e) => {
            println!("infeasible at speed {speed}: {e}");
            return Ok(EXIT_FAILED_RUN);
        }
    };
    println!("m* = {m_star}");
    println!(
        "demand lower bound (unit speed) = {}",
        demand_lower_bound(&inst)
    );
    if a.witness {
        let res = feasible(&inst, m_star, speed, true);
        let witness = res
            .witness
            .ok_or_else(|| anyhow!("oracle refused to produce a witness"))?;
        verify(&witness, &inst, m_star as usize, speed)
            .map_err(|v| anyhow!("extracted schedule failed verification: {v}"))?;
        println!("witness = {}", serde_json::to_string(&witness)?);
        println!("witness verified: {} pieces", witness.len());
    }
    Ok(EXIT_OK)
}

fn fleet_size(machines: Option<usize>) -> Result<usize> {
    let m = machines.ok_or_else(|| anyhow!("this algorithm requires --machines"))?;
    if m == 0 {
        bail!("--machines must be at least 1");
    }
    Ok(m)
}

/// Instantiate a scheduler from command-line choices.
fn build_scheduler(
    alg: AlgArg,
    machines: Option<usize>,
    mstar: Option<u32>,
    (c_edf, c_sjf, c_cms): (usize, usize, usize),
    speed: Rat,
) -> Result<Box<dyn OnlineScheduler>> {
    Ok(match alg {
        AlgArg::Edf => Box::new(PolicyScheduler::edf(fleet_size(machines)?)),
        AlgArg::Sjf => Box::new(PolicyScheduler::sjf(fleet_size(machines)?)),
        AlgArg::Cms => Box::new(CmsScheduler::new(fleet_size(machines)?)),
        AlgArg::Hybrid => {
            let m_star = mstar.ok_or_else(|| anyhow!("--alg hybrid requires --mstar"))?;
            if m_star == 0 {
                bail!("--mstar must be at least 1");
            }
            Box::new(HybridScheduler::new(HybridConfig {
                m_star,
                c_edf,
                c_sjf,
                c_cms,
            }))
        }
        AlgArg::HybridAdaptive => {
            let initial = mstar.unwrap_or(4);
            if initial == 0 {
                bail!("--mstar (initial estimate) must be at least 1");
            }
            Box::new(AdaptiveHybrid::new(
                AdaptiveConfig {
                    initial,
                    c_edf,
                    c_sjf,
                    c_cms,
                },
                simulation_lookahead(),
                speed,
            ))
        }
    })
}

fn cmd_run(a: RunArgs) -> Result<u8> {
    let inst = load_instance(&a.instance)?;
    let speed = parse_rat(&a.speed)?;
    let stop = if a.run_to_miss {
        StopPolicy::RunToFirstMiss
    } else {
        StopPolicy::EarlyInfeasible
    };
    // The budget trace lives on the concrete scheduler, so the traced path
    // cannot go through the boxed-trait constructor.
    let (run, name, trace) = if a.trace {
        if a.alg != AlgArg::Cms {
            bail!("--trace is only meaningful for --alg cms");
        }
        let mut cms = CmsScheduler::with_trace(fleet_size(a.machines)?);
        let run = simulate(&mut cms, &inst, speed, stop);
        let trace = serde_json::to_value(cms.trace().unwrap_or(&[]))?;
        (run, cms.name(), Some(trace))
    } else {
        let mut sched = build_scheduler(
            a.alg,
            a.machines,
            a.mstar,
            (a.c_edf, a.c_sjf, a.c_cms),
            speed,
        )?;
        let run = simulate(sched.as_mut(), &inst, speed, stop);
        let name = sched.name();
        (run, name, None)
    };
    let mut report = serde_json::to_value(&run)?;
    report["scheduler"] = json!(name);
    if let Some(t) = trace {
        report["trace"] = t;
    }
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_or_print(&a.out, &text)?;
    Ok(if run.feasible { EXIT_OK } else { EXIT_FAILED_RUN })
}

/// Parsed `name[@param]` scheduler spec for the comparison matrix.
struct AlgSpec {
    label: String,
    alg: AlgArg,
    param: Option<u32>,
}

fn parse_alg_spec(s: &str) -> Result<AlgSpec> {
    let (name, param) = match s.split_once('@') {
        Some((n, p)) => (
            n,
            Some(
                p.parse::<u32>()
                    .with_context(|| format!("bad parameter in scheduler spec {s:?}"))?,
            ),
        ),
        None => (s, None),
    };
    let alg = match name {
        "edf" => AlgArg::Edf,
        "sjf" => AlgArg::Sjf,
        "cms" => AlgArg::Cms,
        "hybrid" => AlgArg::Hybrid,
        "hybrid-adaptive" => AlgArg::HybridAdaptive,
        _ => bail!("unknown scheduler {name:?} (use edf, sjf, cms, hybrid, hybrid-adaptive)"),
    };
    if matches!(alg, AlgArg::Edf | AlgArg::Sjf | AlgArg::Cms | AlgArg::Hybrid) && param.is_none() {
        bail!("scheduler spec {s:?} needs a parameter, e.g. {name}@4");
    }
    Ok(AlgSpec {
        label: s.to_string(),
        alg,
        param,
    })
}

struct CompareRow {
    instance: String,
    scheduler: String,
    n: usize,
    m_star: u32,
    machines_open: usize,
    machines_busy: usize,
    feasible: bool,
    failure: String,
    wall_ms: u128,
}

fn cmd_compare(a: CompareArgs) -> Result<u8> {
    let speed = parse_rat(&a.speed)?;
    let specs: Vec<AlgSpec> = a
        .algs
        .iter()
        .map(|s| parse_alg_spec(s))
        .collect::<Result<_>>()?;
    let instances: Vec<(String, Instance)> = a
        .instances
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            Ok((name, load_instance(p)?))
        })
        .collect::<Result<_>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(
            std::env::var("MACHMIN_THREADS")
                .ok()
                .and_then(|v| v.parse::<usize>().ok())
                .unwrap_or(0),
        )
        .build()
        .context("cannot build worker pool")?;

    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..specs.len()).map(move |s| (i, s)))
        .collect();
    let mut rows: Vec<CompareRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ii, si)| -> Result<CompareRow> {
                let (name, inst) = &instances[ii];
                let spec = &specs[si];
                let m_star = min_machines(inst, speed)
                    .map_err(|e| anyhow!("{name}: oracle refused: {e}"))?;
                let mut sched = build_scheduler(
                    spec.alg,
                    spec.param.map(|p| p as usize),
                    spec.param,
                    (16, 8, 8),
                    speed,
                )?;
                let started = Instant::now();
                let run = simulate(sched.as_mut(), inst, speed, StopPolicy::EarlyInfeasible);
                let wall_ms = started.elapsed().as_millis();
                let failure = match (&run.failure, &run.miss) {
                    (Some(f), _) => format!("{} at {}: {}", f.scheduler, f.time, f.reason),
                    (None, Some(m)) => {
                        format!("job {} misses deadline {} at {}", m.job, m.deadline, m.time)
                    }
                    (None, None) => String::new(),
                };
                Ok(CompareRow {
                    instance: name.clone(),
                    scheduler: spec.label.clone(),
                    n: inst.len(),
                    m_star,
                    machines_open: run.machines_open,
                    machines_busy: run.machines_busy,
                    feasible: run.feasible,
                    failure,
                    wall_ms,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    rows.sort_by(|a, b| (&a.instance, &a.scheduler).cmp(&(&b.instance, &b.scheduler)));

    let mut w = csv::Writer::from_path(&a.csv)
        .with_context(|| format!("cannot write {}", a.csv.display()))?;
    let mut header = vec![
        "instance",
        "scheduler",
        "n",
        "m_star",
        "machines_open",
        "machines_busy",
        "feasible",
        "failure",
    ];
    if a.timing {
        header.push("wall_ms");
    }
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![
            r.instance.clone(),
            r.scheduler.clone(),
            r.n.to_string(),
            r.m_star.to_string(),
            r.machines_open.to_string(),
            r.machines_busy.to_string(),
            r.feasible.to_string(),
            r.failure.clone(),
        ];
        if a.timing {
            rec.push(r.wall_ms.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!("{} rows -> {}", rows.len(), a.csv.display());
    Ok(EXIT_OK)
}

fn cmd_certify(a: CertifyArgs) -> Result<u8> {
    let (cert_path, inst_path) = match (&a.from_run, &a.first, &a.second) {
        (None, Some(cert), Some(inst)) => (Some(cert), inst),
        (Some(_), Some(inst), None) => (None, inst),
        _ => bail!(
            "usage: certify <certificate> <instance>  |  certify --from-run <run> <instance>"
        ),
    };
    let inst = load_instance(inst_path)?;
    let pair: CriticalPair = match (cert_path, &a.from_run) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read certificate {}", path.display()))?;
            CriticalPair::from_json(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read run report {}", path.display()))?;
            let run: RunResult = serde_json::from_str(&text)
                .map_err(|e| anyhow!("{}: not a run report: {e}", path.display()))?;
            match extract_sjf_certificate(&run, &inst) {
                Ok(pair) => pair,
                Err(e) => {
                    println!("no certificate: {e}");
                    return Ok(EXIT_FAILED_RUN);
                }
            }
        }
        (None, None) => unreachable!("resolved above"),
    };

    if let Some(out) = &a.out {
        let mut text = pair.to_json();
        text.push('\n');
        fs::write(out, text).with_context(|| format!("cannot write {}", out.display()))?;
    }

    println!(
        "pair: {} jobs, {} windows of total length {}, mu = {}, beta = {}, alpha = {}",
        pair.jobs.len(),
        pair.times.len(),
        pair.measure(),
        pair.mu,
        pair.beta,
        pair.alpha,
    );
    let verdict = if a.weak {
        check_weakly_critical(&pair, &inst)?
    } else {
        check_critical(&pair, &inst)?
    };
    let form = if a.weak { "weakly critical" } else { "critical" };
    match implied_lower_bound(pair.mu, pair.beta, pair.alpha) {
        Ok(bound) => println!("implied machine bound: {bound}"),
        Err(e) => println!("implied machine bound: unavailable ({e})"),
    }
    match verdict {
        Verdict::Accepted => {
            println!("{form}: yes");
            Ok(EXIT_OK)
        }
        Verdict::Rejected(r) => {
            println!("{form}: no — {r}");
            Ok(EXIT_FAILED_RUN)
        }
    }
}
