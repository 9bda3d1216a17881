//! Reports and their text and JSON renderings.

use std::fmt::Write as _;
use std::io;
use std::time::Duration;

use serde::Serialize;

use crate::codazzi::CodazziReport;
use crate::nets::NetReport;
use crate::product::Factorization;
use crate::sampling::SamplePlan;
use crate::verdict::{Flag, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    /// Any failure fails; otherwise any inconclusive verdict makes the run
    /// inconclusive. Not-applicable verdicts are ignored.
    pub fn of<'a, I: IntoIterator<Item = &'a VerdictLine>>(lines: I) -> Outcome {
        let mut out = Outcome::Pass;
        for l in lines {
            match l.verdict {
                Verdict::Fails => return Outcome::Fail,
                Verdict::Inconclusive => out = Outcome::Inconclusive,
                Verdict::Holds | Verdict::NotApplicable => {}
            }
        }
        out
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 2,
            Outcome::Inconclusive => 3,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Inconclusive => "inconclusive",
        }
    }
}

/// One verdict with the residual and tolerance that decided it.
#[derive(Clone, Debug, Serialize)]
pub struct VerdictLine {
    pub name: String,
    pub verdict: Verdict,
    pub residual: f64,
    pub tolerance: f64,
}

impl VerdictLine {
    pub fn new(name: impl Into<String>, flag: Flag) -> VerdictLine {
        VerdictLine {
            name: name.into(),
            verdict: flag.verdict,
            residual: flag.max_residual,
            tolerance: flag.tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedCodazzi {
    pub name: String,
    pub report: CodazziReport,
}

/// Construction checks of a product spec.
#[derive(Clone, Debug, Serialize)]
pub struct ProductCheck {
    pub label: String,
    /// Flags the kind guarantees for the spec's net.
    pub guaranteed: Vec<String>,
    /// Largest connection-identity residual over the sampled field pairs.
    pub connection_identity: f64,
    pub classification: NetReport,
}

/// One self-test case.
#[derive(Clone, Debug, Serialize)]
pub struct SelftestCase {
    pub name: String,
    pub detail: String,
    pub verdict: Verdict,
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub tolerance: f64,
    pub sampling: SamplePlan,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub nets: Vec<NetReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub product: Option<ProductCheck>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub factorizations: Vec<Factorization>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub codazzi: Vec<NamedCodazzi>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub selftest: Vec<SelftestCase>,
    pub verdicts: Vec<VerdictLine>,
    pub outcome: Outcome,
    /// Text output only, so JSON stays reproducible.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl Report {
    pub fn new(command: &str, tolerance: f64, sampling: SamplePlan) -> Report {
        Report {
            command: command.to_string(),
            tolerance,
            sampling,
            nets: Vec::new(),
            product: None,
            factorizations: Vec::new(),
            codazzi: Vec::new(),
            selftest: Vec::new(),
            verdicts: Vec::new(),
            outcome: Outcome::Pass,
            wall_clock: Duration::ZERO,
        }
    }

    pub fn push(&mut self, prefix: &str, verdicts: impl IntoIterator<Item = (String, Flag)>) {
        self.verdicts.extend(
            verdicts
                .into_iter()
                .map(|(n, f)| VerdictLine::new(format!("{prefix}{n}"), f)),
        );
    }

    pub fn finish(&mut self, wall_clock: Duration) {
        self.outcome = Outcome::of(&self.verdicts);
        self.wall_clock = wall_clock;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

/// Writes floats as `%.12e`; non-finite values become `null`.
struct Scientific;

impl serde_json::ser::Formatter for Scientific {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.12e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{v:.12e}")
    }
}

pub fn to_json(report: &Report) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Scientific);
    report.serialize(&mut ser).expect("report serializes");
    out.push(b'\n');
    out
}

fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        "-".to_string()
    }
}

pub fn to_text(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command   {}", report.command);
    let _ = writeln!(s, "tolerance {}", sci(report.tolerance));
    let p = &report.sampling;
    let _ = writeln!(
        s,
        "sampling  grid {} margin {} random {} seed {}",
        p.grid, p.margin, p.random, p.seed
    );
    for (i, n) in report.nets.iter().enumerate() {
        let _ = writeln!(
            s,
            "net {i}: blocks {:?}, {} samples, h0 sum {}",
            n.blocks,
            n.samples,
            sci(n.h0_sum_residual)
        );
    }
    for f in &report.factorizations {
        let _ = writeln!(
            s,
            "factorization {:?}: path consistency {}, reconstruction {}",
            f.blocks,
            sci(f.path_consistency),
            sci(f.reconstruction_error)
        );
        if let Some(c) = &f.closed_form {
            let _ = writeln!(s, "  conformal factor {}", c.conformal_factor);
            for (i, w) in c.warping.iter().enumerate() {
                let _ = writeln!(s, "  warping {} {}", i + 1, w);
            }
        }
    }
    for c in &report.codazzi {
        let r = &c.report;
        let _ = writeln!(
            s,
            "tensor {}: ranks {}+{}, {} samples",
            c.name, r.rank_lambda, r.rank_mu, r.samples
        );
        if let Some(st) = &r.structure {
            let _ = writeln!(s, "  structure {}", serde_json::to_string(&st.case).unwrap_or_default());
        }
    }
    for c in &report.selftest {
        let _ = writeln!(s, "selftest {}: {}", c.name, c.detail);
    }
    let width = report.verdicts.iter().map(|v| v.name.len()).max().unwrap_or(0);
    for v in &report.verdicts {
        let _ = writeln!(
            s,
            "{:<width$}  {:<12}  residual {}  tol {}",
            v.name,
            v.verdict.symbol(),
            sci(v.residual),
            sci(v.tolerance)
        );
    }
    let _ = writeln!(s, "outcome   {}", report.outcome.symbol());
    let _ = writeln!(s, "wall-clock {:.3} s", report.wall_clock.as_secs_f64());
    s
}

pub fn emit(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Text => to_text(report).into_bytes(),
        Format::Json => to_json(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("classify", 1e-8, SamplePlan::default());
        r.push(
            "net0.",
            vec![
                ("TP".to_string(), Flag::new(1e-12, 1e-8)),
                ("CP".into(), Flag::new(f64::NAN, 1e-8)),
            ],
        );
        r.finish(Duration::from_millis(3));
        r
    }

    #[test]
    fn floats_use_twelve_digit_exponents() {
        let json = String::from_utf8(to_json(&sample())).unwrap();
        assert!(json.contains("\"tolerance\":1.000000000000e-8"), "{json}");
        assert!(json.contains("\"residual\":null"));
        assert!(!json.contains("wall"));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["verdicts"][0]["residual"].as_f64(), Some(1e-12));
    }

    #[test]
    fn outcome_precedence() {
        let r = sample();
        assert_eq!(r.outcome, Outcome::Inconclusive);
        let text = to_text(&r);
        assert_eq!(text.lines().filter(|l| l.starts_with("net0.")).count(), 2);
        let fail = VerdictLine::new("x", Flag::new(1.0, 1e-8));
        assert_eq!(Outcome::of(&[r.verdicts[1].clone(), fail]).exit_code(), 2);
    }
}
