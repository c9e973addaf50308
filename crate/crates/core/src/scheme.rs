//! Scheme and architecture selectors shared across modules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How weak pilots are served once the strong set is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Weak pilots use plain MR; ZF only among strong pilots.
    Pfzf,
    /// Weak pilots use MR projected away from every strong pilot.
    Pwpfzf,
}

/// Strong/weak pilot classification rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupingScheme {
    GPfzf,
    GPwpfzf,
    ThresholdPfzf,
    ThresholdPwpfzf,
    AllMr,
    AllFzf,
}

impl GroupingScheme {
    pub const ALL: [GroupingScheme; 6] = [
        GroupingScheme::GPfzf,
        GroupingScheme::GPwpfzf,
        GroupingScheme::ThresholdPfzf,
        GroupingScheme::ThresholdPwpfzf,
        GroupingScheme::AllMr,
        GroupingScheme::AllFzf,
    ];

    pub fn family(self) -> Family {
        match self {
            GroupingScheme::GPwpfzf | GroupingScheme::ThresholdPwpfzf => Family::Pwpfzf,
            _ => Family::Pfzf,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupingScheme::GPfzf => "gpfzf",
            GroupingScheme::GPwpfzf => "gpwpfzf",
            GroupingScheme::ThresholdPfzf => "pfzf",
            GroupingScheme::ThresholdPwpfzf => "pwpfzf",
            GroupingScheme::AllMr => "mr",
            GroupingScheme::AllFzf => "fzf",
        }
    }
}

impl fmt::Display for GroupingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GroupingScheme::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                format!("unknown grouping `{s}` (expected gpfzf|gpwpfzf|pfzf|pwpfzf|mr|fzf)")
            })
    }
}

/// Decoding architecture at the CPU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// Each AP pre-weights by its local SINR, the CPU only sums.
    Local,
    /// SINR-optimal large-scale fading decoding at the CPU.
    Olsfd,
    /// Plain sum of local estimates.
    Uniform,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::Local,
        Architecture::Olsfd,
        Architecture::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Local => "local",
            Architecture::Olsfd => "olsfd",
            Architecture::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown architecture `{s}` (expected local|olsfd|uniform)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for g in GroupingScheme::ALL {
            assert_eq!(g.name().parse::<GroupingScheme>().unwrap(), g);
        }
        for a in Architecture::ALL {
            assert_eq!(a.name().parse::<Architecture>().unwrap(), a);
        }
        assert!("zf".parse::<GroupingScheme>().is_err());
    }
}
