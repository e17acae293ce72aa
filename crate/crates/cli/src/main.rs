use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use vortexlab::harness::{exit_code, run_experiment, Config, Experiment, RunSummary};

/// Lattice experiments for the self-dual abelian Higgs model.
#[derive(Parser, Debug)]
#[command(name = "vortexlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Key-value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Run directory; defaults to `runs/<subcommand>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Fan out over `section.key=v1,v2,...`, one run directory per value.
    #[arg(long, value_name = "SECTION.KEY=V1,V2,...")]
    sweep: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct DecayArgs {
    #[command(flatten)]
    common: Common,
    /// Levels after the initial ball.
    #[arg(long)]
    levels: Option<usize>,
    /// Radius ratio between levels.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for a planar vortex and check energy quantization.
    SolveVortex(Common),
    /// Relax a pair by energy descent.
    Relax(Common),
    /// Energy, Modica, Euler–Lagrange and monotonicity diagnostics.
    Diagnose(Common),
    /// Tilt excess against a plane, optionally minimised.
    Excess(Common),
    /// Per-slice data and the good/bad classification.
    Slices(Common),
    /// Dyadic excess-decay table.
    Decay(DecayArgs),
    /// Quantitative stability of the planar vortex.
    Stability(Common),
    /// Energy expansion of the pullback competitor.
    CompetitorAudit(Common),
    /// Coulomb and interpolation gauge audits.
    GaugeAudit(Common),
    /// Gaffney constants over a width schedule.
    Gaffney(Common),
}

fn split_key(s: &str) -> anyhow::Result<(String, String, String)> {
    let (k, v) = s.split_once('=').with_context(|| format!("expected SECTION.KEY=VALUE, found `{s}`"))?;
    let (sec, key) = k.split_once('.').with_context(|| format!("expected SECTION.KEY, found `{k}`"))?;
    Ok((sec.trim().to_string(), key.trim().to_string(), v.trim().to_string()))
}

struct Plan {
    exp: Experiment,
    common: Common,
    extra: Vec<(String, String, String)>,
}

fn plan(cli: Cli) -> Plan {
    let (exp, common, extra) = match cli.command {
        Command::SolveVortex(c) => (Experiment::SolveVortex, c, vec![]),
        Command::Relax(c) => (Experiment::Relax, c, vec![]),
        Command::Diagnose(c) => (Experiment::Diagnose, c, vec![]),
        Command::Excess(c) => (Experiment::Excess, c, vec![]),
        Command::Slices(c) => (Experiment::Slices, c, vec![]),
        Command::Decay(d) => {
            let mut extra = vec![];
            if let Some(l) = d.levels {
                extra.push(("decay".into(), "levels".into(), l.to_string()));
            }
            if let Some(r) = d.rho {
                extra.push(("decay".into(), "rho".into(), r.to_string()));
            }
            (Experiment::Decay, d.common, extra)
        }
        Command::Stability(c) => (Experiment::Stability, c, vec![]),
        Command::CompetitorAudit(c) => (Experiment::CompetitorAudit, c, vec![]),
        Command::GaugeAudit(c) => (Experiment::GaugeAudit, c, vec![]),
        Command::Gaffney(c) => (Experiment::Gaffney, c, vec![]),
    };
    Plan { exp, common, extra }
}

fn report(s: &RunSummary) {
    for c in &s.checks {
        println!("{} {}: {:.6e} <= {:.6e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
    }
    println!("wrote {} ({} outputs, manifest {})", s.dir.display(), s.manifest.outputs.len(), s.manifest.hash());
}

fn execute(p: &Plan) -> Result<Vec<RunSummary>, (i32, String)> {
    let config_err = |e: anyhow::Error| (2, format!("{e:#}"));
    let mut cfg = Config::load(&p.common.config).map_err(|e| (exit_code(&e), format!("{}: {e}", p.common.config.display())))?;
    for o in &p.common.overrides {
        let (s, k, v) = split_key(o).map_err(config_err)?;
        cfg.set(&s, &k, v);
    }
    for (s, k, v) in &p.extra {
        cfg.set(s, k, v.clone());
    }
    let out = p.common.out.clone().unwrap_or_else(|| Path::new("runs").join(p.exp.name()));
    let jobs: Vec<(Config, PathBuf)> = match &p.common.sweep {
        None => vec![(cfg, out)],
        Some(spec) => {
            let (s, k, values) = split_key(spec).map_err(config_err)?;
            values
                .split(',')
                .enumerate()
                .map(|(i, v)| {
                    let mut c = cfg.clone();
                    c.set(&s, &k, v.trim());
                    (c, out.join(format!("sweep-{i:03}")))
                })
                .collect()
        }
    };
    let results: Vec<_> = jobs.into_par_iter().map(|(c, dir)| run_experiment(p.exp, &c, &dir)).collect();
    let mut summaries = Vec::with_capacity(results.len());
    for r in results {
        summaries.push(r.map_err(|e| (exit_code(&e), e.to_string()))?);
    }
    Ok(summaries)
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("VORTEXLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let p = plan(Cli::parse());
    match execute(&p) {
        Ok(summaries) => {
            summaries.iter().for_each(report);
            if summaries.iter().all(|s| s.passed()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code as u8)
        }
    }
}
