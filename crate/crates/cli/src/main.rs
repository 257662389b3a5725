use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dualproj::experiments::{
    cmd_converge, cmd_dualbasis, cmd_heat, cmd_smooth, cmd_spacetime, cmd_verify, ExperimentConfig, Operator, Preset,
    RateTable, Refinement, VerifyOptions,
};

#[derive(Parser, Debug)]
#[command(name = "dualproj", version, about = "Quasi-interpolation studies and identity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the identity suite over all supported (d, k); prints JSON.
    Verify {
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Perturb the table of one (d, k) pair, e.g. `2,3`.
        #[arg(long, hide = true, value_parser = parse_pair)]
        corrupt: Option<(usize, usize)>,
        /// Restrict to one (d, k) pair, e.g. `1,2`.
        #[arg(long, value_parser = parse_pair)]
        only: Vec<(usize, usize)>,
    },
    /// Print the dual basis coefficients for (d, k) as JSON.
    Dualbasis {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence study of an operator applied to a preset field.
    Converge(StudyArgs),
    /// Method-of-lines heat equation study (d = 1).
    Heat(StudyArgs),
    /// Dual-norm error of the operator applied to smooth or rough data.
    Smooth(StudyArgs),
    /// Space-time tensor operator study (one space dimension).
    Spacetime(StudyArgs),
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    op: Option<Operator>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    preset: Option<Preset>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Level-1 mesh as JSON.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long)]
    k_t: Option<usize>,
    /// `both` or `space`.
    #[arg(long, value_parser = parse_refinement)]
    refine: Option<Refinement>,
    /// Extra refinements of the dual-norm evaluation mesh.
    #[arg(long)]
    enrichment: Option<usize>,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `d,k`, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_refinement(s: &str) -> std::result::Result<Refinement, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).map_err(|_| format!("unknown refinement {s:?}"))
}

impl StudyArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.op {
            cfg.op = v;
        }
        if let Some(v) = self.d {
            cfg.d = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.levels {
            cfg.levels = v;
        }
        if let Some(v) = self.preset {
            cfg.preset = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = &self.mesh {
            cfg.mesh = Some(v.clone());
        }
        if let Some(v) = self.k_t {
            cfg.k_t = v;
        }
        if let Some(v) = self.refine {
            cfg.refine = v;
        }
        if self.enrichment.is_some() {
            cfg.enrichment = self.enrichment;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn study(args: &StudyArgs, run: fn(&ExperimentConfig) -> dualproj::Result<RateTable>) -> Result<ExitCode> {
    let cfg = args.config()?;
    let table = run(&cfg)?;
    emit(&table.to_csv()?, cfg.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Verify { out, corrupt, only } => {
            let report = cmd_verify(&VerifyOptions { corrupt, only })?;
            emit(&(serde_json::to_string_pretty(&report)? + "\n"), out.as_deref())?;
            for c in report.failures() {
                eprintln!(
                    "FAIL {} (d={}, k={}): residual {:.3e} > {:.1e}",
                    c.identity, c.d, c.k, c.residual, c.tolerance
                );
            }
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Dualbasis { d, k, out } => {
            let v = cmd_dualbasis(d, k)?;
            emit(&(serde_json::to_string_pretty(&v)? + "\n"), out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Converge(a) => study(&a, cmd_converge),
        Command::Heat(a) => study(&a, cmd_heat),
        Command::Smooth(a) => study(&a, cmd_smooth),
        Command::Spacetime(a) => {
            if a.op.is_some_and(|op| op != Operator::PiTensor) {
                bail!("the space-time study only runs the tensor operator");
            }
            study(&a, cmd_spacetime)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
