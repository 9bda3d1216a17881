use serde::Serialize;

/// Outcome of comparing a residual against a tolerance.
///
/// A residual at most `tol` holds, one above `10·tol` fails, and anything in
/// between is reported as inconclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
    NotApplicable,
}

pub const FAIL_FACTOR: f64 = 10.0;

impl Verdict {
    pub fn of(residual: f64, tol: f64) -> Verdict {
        if residual.is_nan() {
            Verdict::Inconclusive
        } else if residual <= tol {
            Verdict::Holds
        } else if residual > FAIL_FACTOR * tol {
            Verdict::Fails
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }

    pub fn fails(self) -> bool {
        self == Verdict::Fails
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Holds => "pass",
            Verdict::Fails => "fail",
            Verdict::Inconclusive => "inconclusive",
            Verdict::NotApplicable => "n/a",
        }
    }
}

/// A verdict with the residual that decided it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Flag {
    pub verdict: Verdict,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl Flag {
    pub fn new(max_residual: f64, tolerance: f64) -> Flag {
        Flag {
            verdict: Verdict::of(max_residual, tolerance),
            max_residual,
            tolerance,
        }
    }

    pub fn not_applicable(tolerance: f64) -> Flag {
        Flag {
            verdict: Verdict::NotApplicable,
            max_residual: f64::NAN,
            tolerance,
        }
    }

    pub fn holds(&self) -> bool {
        self.verdict.holds()
    }

    pub fn fails(&self) -> bool {
        self.verdict.fails()
    }
}

/// Running maximum that tolerates an empty set.
pub fn max_of<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands() {
        assert_eq!(Verdict::of(1e-9, 1e-8), Verdict::Holds);
        assert_eq!(Verdict::of(5e-8, 1e-8), Verdict::Inconclusive);
        assert_eq!(Verdict::of(2e-7, 1e-8), Verdict::Fails);
    }
}
