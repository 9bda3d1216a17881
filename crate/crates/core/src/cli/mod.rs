//! Command-line front end: manifest ingestion, command dispatch and report
//! emission. The `confnet` binary is a thin wrapper around [`run`].

mod commands;
pub mod manifest;
pub mod report;
mod selftest;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use crate::error::{Error, Result};
use crate::sampling::SamplePlan;

pub use commands::{guaranteed_flags, RECONSTRUCTION_TOL};
pub use manifest::{load_manifest, parse_manifest, Manifest, TensorEntry};
pub use report::{emit, Format, Outcome, Report, SelftestCase, VerdictLine};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Classify,
    VerifyProduct,
    Factorize,
    Codazzi,
    Selftest,
}

impl Command {
    /// Parses a command name as accepted on the command line.
    pub fn parse(name: &str) -> Option<Command> {
        <Command as ValueEnum>::from_str(name, false).ok()
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::VerifyProduct => "verify-product",
            Command::Factorize => "factorize",
            Command::Codazzi => "codazzi",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
}

/// Verify product, warped and conformal-product structures of metrics.
#[derive(Clone, Debug, Parser)]
#[command(name = "confnet", version)]
pub struct Options {
    /// Manifest describing the chart, metric, nets and tensors.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "classify")]
    pub command: Command,
    /// Overrides the manifest tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Overrides the number of random sample points.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Overrides the sampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}

impl Options {
    /// Options for `command` with no manifest and no overrides.
    pub fn new(command: Command) -> Options {
        Options {
            manifest: None,
            command,
            tolerance: None,
            samples: None,
            seed: None,
            format: FormatArg::Text,
        }
    }

    pub fn format(&self) -> Format {
        match self.format {
            FormatArg::Text => Format::Text,
            FormatArg::Json => Format::Json,
        }
    }

    fn plan(&self, base: SamplePlan) -> SamplePlan {
        SamplePlan {
            random: self.samples.unwrap_or(base.random),
            seed: self.seed.unwrap_or(base.seed),
            ..base
        }
    }
}

/// Executes one command and returns its finished report.
pub fn run(opts: &Options) -> Result<Report> {
    let manifest = opts.manifest.as_deref().map(load_manifest).transpose()?;
    run_on(opts, manifest)
}

/// Like [`run`], with the manifest already loaded; `opts.manifest` is ignored.
pub fn run_on(opts: &Options, manifest: Option<Manifest>) -> Result<Report> {
    let start = Instant::now();
    if let Some(t) = opts.tolerance {
        if !(t > 0.0) {
            return Err(Error::Precondition("tolerance must be positive".into()));
        }
    }
    let mut report = if opts.command == Command::Selftest {
        let (plan, tol) = match &manifest {
            Some(m) => (opts.plan(m.sampling), opts.tolerance.unwrap_or(m.tolerance)),
            None => (opts.plan(SamplePlan::default()), opts.tolerance.unwrap_or(1e-8)),
        };
        let mut report = Report::new("selftest", tol, plan);
        report.selftest = selftest::run(plan.seed, &plan, tol);
        report.verdicts = report
            .selftest
            .iter()
            .map(|c| VerdictLine {
                name: c.name.clone(),
                verdict: c.verdict,
                residual: c.residual,
                tolerance: c.tolerance,
            })
            .collect();
        report
    } else {
        let mut m = manifest.ok_or_else(|| Error::Precondition(format!("{} needs a manifest", opts.command.name())))?;
        m.sampling = opts.plan(m.sampling);
        m.tolerance = opts.tolerance.unwrap_or(m.tolerance);
        let mut report = Report::new(opts.command.name(), m.tolerance, m.sampling);
        match opts.command {
            Command::Classify => commands::classify(&m, &mut report)?,
            Command::VerifyProduct => commands::verify_product(&m, &mut report)?,
            Command::Factorize => commands::factorize(&m, &mut report)?,
            Command::Codazzi => commands::codazzi(&m, &mut report)?,
            Command::Selftest => unreachable!("handled above"),
        }
        report
    };
    report.finish(start.elapsed());
    Ok(report)
}
