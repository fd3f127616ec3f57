//! Reasoning paths and the interfaces a search needs from the outside world:
//! a step generator, an answer checker and a prefix encoder.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uvm_head::{Representation, UvmHead, ValuePosterior};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(pub u64);

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Final answer token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Answer(pub u32);

/// One reasoning step: the branch taken and the token it emitted.
///
/// Textual form is `child:token`, e.g. `2:13`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Step {
    pub child: u8,
    pub token: u16,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.child, self.token)
    }
}

impl FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed step `{s}`, expected `child:token`"));
        let (c, t) = s.split_once(':').ok_or_else(bad)?;
        Ok(Step {
            child: c.trim().parse().map_err(|_| bad())?,
            token: t.trim().parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for Step {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Step {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A (possibly partial) solution path `[s^1, ..., s^t]`, terminated by an
/// answer once complete.
///
/// A path is *complete* iff it carries an answer. A path can also be
/// *stalled*: the generator failed on it, so it is frozen without an answer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartialPath {
    pub question_id: QuestionId,
    pub steps: Vec<Step>,
    #[serde(default)]
    pub answer: Option<Answer>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub stalled: bool,
}

/// A path returned by search. Same representation; usually complete.
pub type SolutionPath = PartialPath;

impl PartialPath {
    pub fn root(question_id: QuestionId) -> Self {
        PartialPath {
            question_id,
            steps: Vec::new(),
            answer: None,
            stalled: false,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.answer.is_some()
    }

    /// Complete or stalled: no further expansion.
    pub fn is_finished(&self) -> bool {
        self.is_complete() || self.stalled
    }

    /// The prefix `S^(1:t)`. The answer is kept only when `t` covers every step.
    pub fn prefix(&self, t: usize) -> PartialPath {
        let t = t.min(self.steps.len());
        PartialPath {
            question_id: self.question_id,
            steps: self.steps[..t].to_vec(),
            answer: if t == self.steps.len() { self.answer } else { None },
            stalled: false,
        }
    }

    pub(crate) fn into_stalled(mut self) -> Self {
        self.stalled = true;
        self
    }
}

/// Proposes one more step for a partial path.
pub trait Generator: Sync {
    /// Extends `prefix` by exactly one step, attaching the answer when the path terminates.
    fn step(&self, prefix: &PartialPath, rng: &mut crate::rng::Stream) -> Result<PartialPath>;
}

/// Ground-truth answer checking.
pub trait AnswerChecker: Sync {
    /// `1` iff the complete path's answer is correct. Incomplete paths are an error.
    fn check(&self, path: &PartialPath) -> Result<u8>;

    fn ground_truth(&self, question: QuestionId) -> Result<Answer>;
}

/// Maps `(q, S^(1:t))` to the representation `x` fed to the value head.
pub trait PrefixEncoder: Sync {
    fn dim(&self) -> usize;

    fn encode(&self, prefix: &PartialPath) -> Result<Representation>;
}

/// Anything that can score a path with a (possibly degenerate) value posterior.
pub trait ValueModel: Sync {
    fn posterior(&self, path: &PartialPath) -> Result<ValuePosterior>;
}

/// A value head paired with the encoder that feeds it.
#[derive(Clone, Copy)]
pub struct EncodedHead<'a, E: ?Sized> {
    pub head: &'a UvmHead,
    pub encoder: &'a E,
}

impl<'a, E: PrefixEncoder + ?Sized> EncodedHead<'a, E> {
    pub fn new(head: &'a UvmHead, encoder: &'a E) -> Self {
        EncodedHead { head, encoder }
    }
}

impl<E: PrefixEncoder + ?Sized> ValueModel for EncodedHead<'_, E> {
    fn posterior(&self, path: &PartialPath) -> Result<ValuePosterior> {
        self.head.project(&self.encoder.encode(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_text_form() {
        let s: Step = "3:17".parse().unwrap();
        assert_eq!(s, Step { child: 3, token: 17 });
        assert_eq!(s.to_string(), "3:17");
        assert!("3-17".parse::<Step>().is_err());
        assert!("x:1".parse::<Step>().is_err());
    }

    #[test]
    fn prefix_keeps_answer_only_at_full_length() {
        let p = PartialPath {
            question_id: QuestionId(1),
            steps: vec![Step { child: 0, token: 1 }, Step { child: 1, token: 2 }],
            answer: Some(Answer(4)),
            stalled: false,
        };
        assert_eq!(p.prefix(1).answer, None);
        assert_eq!(p.prefix(1).len(), 1);
        assert_eq!(p.prefix(2), p);
    }
}
