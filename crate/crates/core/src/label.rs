use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// The four fingerprint classes. Tented arches are folded into [`ClassLabel::A`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassLabel {
    /// Arch (including tented arch).
    A,
    /// Left loop.
    L,
    /// Right loop.
    R,
    /// Whorl.
    W,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown class label {0:?} (expected one of A, L, R, W, T)")]
pub struct ParseLabelError(pub String);

impl ClassLabel {
    pub const COUNT: usize = 4;
    pub const ALL: [ClassLabel; 4] = [ClassLabel::A, ClassLabel::L, ClassLabel::R, ClassLabel::W];

    /// Zero-based index, used for matrix rows and softmax outputs.
    pub fn index(self) -> usize {
        self as usize
    }

    /// One-based ordinal.
    pub fn ordinal(self) -> usize {
        self.index() + 1
    }

    pub fn from_index(index: usize) -> Option<ClassLabel> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::A => "A",
            ClassLabel::L => "L",
            ClassLabel::R => "R",
            ClassLabel::W => "W",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" | "T" | "TA" => Ok(ClassLabel::A),
            "L" => Ok(ClassLabel::L),
            "R" => Ok(ClassLabel::R),
            "W" => Ok(ClassLabel::W),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}
