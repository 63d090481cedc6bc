use crate::error::{Error, Result};
use crate::measurement::MeasurementBasis;
use serde::{Deserialize, Serialize};

/// Site layout of a weak-measurement readout block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutSchedule {
    /// First half in the real tilted basis, second half in the imaginary one.
    #[default]
    CosSin,
    /// Every site in the real tilted basis; cannot tell `φ` from `−φ`.
    CosOnly,
    /// A tenth of the sites split as in `CosSin` for a coarse estimate, the rest
    /// at a phase chosen from it. Outcome-dependent, so it has no fixed layout.
    Tuned,
}

impl ReadoutSchedule {
    /// Fixed basis blocks `(basis, site count)`, in order.
    pub fn blocks(&self, pair: (usize, usize), alpha: f64, n_m: usize) -> Result<Vec<(MeasurementBasis, usize)>> {
        match self {
            ReadoutSchedule::CosSin => {
                let first = n_m.div_ceil(2);
                Ok(vec![
                    (MeasurementBasis::real(pair, alpha), first),
                    (MeasurementBasis::imag(pair, alpha), n_m - first),
                ])
            }
            ReadoutSchedule::CosOnly => Ok(vec![(MeasurementBasis::real(pair, alpha), n_m)]),
            ReadoutSchedule::Tuned => Err(Error::InvalidArgument(
                "tuned readout picks its phase from outcomes and has no fixed layout".into(),
            )),
        }
    }
}

fn default_alpha() -> f64 {
    std::f64::consts::FRAC_PI_4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProgramStep {
    /// `n` repetitions of a small-angle step on `pair`, each followed by `wire_n` wire sites.
    Rotate {
        pair: (usize, usize),
        dalpha: f64,
        beta: f64,
        n: usize,
        wire_n: usize,
    },
    /// Weak-measurement readout of `C_i^{-1}C_j` over `n_m` sites.
    Measure {
        pair: (usize, usize),
        n_m: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        wire_n: usize,
        #[serde(default)]
        schedule: ReadoutSchedule,
    },
    /// Readout followed by a corrective rotation onto eigenvector `target`.
    Init {
        pair: (usize, usize),
        target: usize,
        n_m: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        budget: f64,
    },
}

impl ProgramStep {
    pub fn pair(&self) -> (usize, usize) {
        match *self {
            ProgramStep::Rotate { pair, .. } | ProgramStep::Measure { pair, .. } | ProgramStep::Init { pair, .. } => pair,
        }
    }

    /// Physical sites consumed, where fixed in advance.
    pub fn sites(&self) -> Option<usize> {
        match *self {
            ProgramStep::Rotate { n, wire_n, .. } => Some(n * (1 + wire_n)),
            ProgramStep::Measure { n_m, wire_n, .. } => Some(n_m * (1 + wire_n)),
            ProgramStep::Init { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateProgram {
    pub steps: Vec<ProgramStep>,
}

impl GateProgram {
    /// Errors listing every step whose pair is out of range for `d` outcomes.
    pub fn check(&self, d: usize) -> Result<()> {
        let bad: Vec<String> = self
            .steps
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                let (i, j) = s.pair();
                i >= j || j >= d
            })
            .map(|(k, s)| format!("step {k}: pair {:?} needs 0 ≤ i < j < {d}", s.pair()))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Total physical sites, or `None` if an init step makes it outcome-dependent.
    pub fn site_budget(&self) -> Option<usize> {
        self.steps.iter().map(|s| s.sites()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}
