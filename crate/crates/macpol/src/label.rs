//! Security label model and its textual syntax.
//!
//! A label attaches one qualifier per policy module to a subject or object,
//! e.g. `biba/10(10-10),mls/100(100-100)`. The grammar is strict: no
//! whitespace, unknown policy names are rejected, and every structured
//! result satisfies the model invariants.
//!
//! ```text
//! label        := policy ("," policy)*
//! policy       := name "/" qualifier
//! name         := "biba" | "mls"
//! qualifier    := element | element "(" element "-" element ")"
//! element      := grade (":" compartments)?
//! grade        := DECIMAL | "low" | "high" | "equal"
//! compartments := DECIMAL ("+" DECIMAL)*
//! DECIMAL      := [0-9]+
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::lattice;

/// Largest numeric grade a valid label may carry (16-bit grade space).
pub const GRADE_MAX: u64 = 65_535;
/// Smallest valid compartment identifier.
pub const COMPARTMENT_MIN: u16 = 1;
/// Largest valid compartment identifier.
pub const COMPARTMENT_MAX: u16 = 255;

// ---------------------------------------------------------------------------
// Grades and compartments
// ---------------------------------------------------------------------------

/// Vertical coordinate of a policy element: a numeric rank or one of the
/// sentinels `low`, `high`, `equal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Grade {
    /// Numeric rank. Valid labels keep it within `0..=GRADE_MAX`.
    Num(u64),
    /// Floor of the grade order.
    Low,
    /// Ceiling of the grade order.
    High,
    /// Wildcard that compares equal against everything.
    Equal,
}

impl Grade {
    /// True for `low`, `high` and `equal`.
    pub fn is_sentinel(self) -> bool {
        !matches!(self, Grade::Num(_))
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grade::Num(n) => write!(f, "{n}"),
            Grade::Low => f.write_str("low"),
            Grade::High => f.write_str("high"),
            Grade::Equal => f.write_str("equal"),
        }
    }
}

impl Serialize for Grade {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Compartment identifier. Valid labels keep it within `1..=COMPARTMENT_MAX`;
/// the wider storage type lets `validate` describe out-of-range inputs.
pub type CompartmentId = u16;

/// Set of compartment identifiers, the horizontal coordinate of an element.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct CompartmentSet(BTreeSet<CompartmentId>);

impl CompartmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, id: CompartmentId) -> bool {
        self.0.contains(&id)
    }

    pub fn insert(&mut self, id: CompartmentId) {
        self.0.insert(id);
    }

    pub fn iter(&self) -> impl Iterator<Item = CompartmentId> + '_ {
        self.0.iter().copied()
    }

    pub fn is_superset(&self, other: &Self) -> bool {
        self.0.is_superset(&other.0)
    }

    pub fn union(&self, other: &Self) -> Self {
        Self(self.0.union(&other.0).copied().collect())
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self(self.0.intersection(&other.0).copied().collect())
    }
}

impl FromIterator<CompartmentId> for CompartmentSet {
    fn from_iter<I: IntoIterator<Item = CompartmentId>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl fmt::Display for CompartmentSet {
    /// Ascending, joined by `+`: `1+2+3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for id in self.iter() {
            if !first {
                f.write_str("+")?;
            }
            write!(f, "{id}")?;
            first = false;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Elements
// ---------------------------------------------------------------------------

/// A grade plus a compartment set: one point of a policy lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PolicyElement {
    pub grade: Grade,
    pub compartments: CompartmentSet,
}

impl PolicyElement {
    pub fn new(grade: Grade, compartments: CompartmentSet) -> Self {
        Self { grade, compartments }
    }

    /// Element with the given grade and no compartments.
    pub fn bare(grade: Grade) -> Self {
        Self::new(grade, CompartmentSet::new())
    }
}

impl fmt::Display for PolicyElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.grade)?;
        if !self.compartments.is_empty() {
            write!(f, ":{}", self.compartments)?;
        }
        Ok(())
    }
}

/// Subject element with an effective point inside a `lo..hi` envelope the
/// subject may move within.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RangedElement {
    pub effective: PolicyElement,
    pub lo: PolicyElement,
    pub hi: PolicyElement,
}

impl fmt::Display for RangedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}-{})", self.effective, self.lo, self.hi)
    }
}

/// Per-policy qualifier: either a single element or a ranged one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Qualifier {
    Single(PolicyElement),
    Ranged(RangedElement),
}

impl Qualifier {
    /// The element access decisions are made against.
    pub fn effective(&self) -> &PolicyElement {
        match self {
            Qualifier::Single(e) => e,
            Qualifier::Ranged(r) => &r.effective,
        }
    }

    pub fn is_ranged(&self) -> bool {
        matches!(self, Qualifier::Ranged(_))
    }

    /// The qualifier as a range; a single element becomes the degenerate
    /// range `e(e-e)`.
    pub fn envelope(&self) -> RangedElement {
        match self {
            Qualifier::Single(e) => RangedElement {
                effective: e.clone(),
                lo: e.clone(),
                hi: e.clone(),
            },
            Qualifier::Ranged(r) => r.clone(),
        }
    }
}

impl fmt::Display for Qualifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Qualifier::Single(e) => e.fmt(f),
            Qualifier::Ranged(r) => r.fmt(f),
        }
    }
}

// ---------------------------------------------------------------------------
// Policy registry and composite labels
// ---------------------------------------------------------------------------

/// Registered policy modules. Unknown names are rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyName {
    Biba,
    Mls,
}

impl PolicyName {
    pub const ALL: [PolicyName; 2] = [PolicyName::Biba, PolicyName::Mls];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Biba => "biba",
            PolicyName::Mls => "mls",
        }
    }
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyName {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "biba" => Ok(PolicyName::Biba),
            "mls" => Ok(PolicyName::Mls),
            _ => Err(()),
        }
    }
}

impl Serialize for PolicyName {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// Ordered composition of named policy elements attached to a subject or an
/// object. Entry order is preserved; canonical text keeps it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MacLabel {
    entries: Vec<(PolicyName, Qualifier)>,
}

impl MacLabel {
    /// Builds a label without checking invariants; run [`validate`] to
    /// inspect them.
    pub fn from_entries(entries: impl IntoIterator<Item = (PolicyName, Qualifier)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (PolicyName, &Qualifier)> + '_ {
        self.entries.iter().map(|(n, q)| (*n, q))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, policy: PolicyName) -> Option<&Qualifier> {
        self.entries
            .iter()
            .find(|(n, _)| *n == policy)
            .map(|(_, q)| q)
    }

    /// The set of policies this label covers, in entry order.
    pub fn policies(&self) -> Vec<PolicyName> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn has_ranged(&self) -> bool {
        self.entries.iter().any(|(_, q)| q.is_ranged())
    }

    /// Label with every qualifier replaced by its effective element.
    pub fn effective_projection(&self) -> MacLabel {
        MacLabel::from_entries(
            self.entries()
                .map(|(n, q)| (n, Qualifier::Single(q.effective().clone()))),
        )
    }
}

impl fmt::Display for MacLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, qualifier) in self.entries() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{name}/{qualifier}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for MacLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, LabelError> {
        parse_label(s)
    }
}

impl Serialize for MacLabel {
    /// Labels serialize as their canonical text.
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Invariant a label can break.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationRule {
    GradeOutOfRange,
    CompartmentOutOfRange,
    SentinelWithCompartments,
    DuplicatePolicy,
    LoNotDominatedByHi,
    EffectiveOutsideRange,
}

impl ViolationRule {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationRule::GradeOutOfRange => "grade-out-of-range",
            ViolationRule::CompartmentOutOfRange => "compartment-out-of-range",
            ViolationRule::SentinelWithCompartments => "sentinel-with-compartments",
            ViolationRule::DuplicatePolicy => "duplicate-policy",
            ViolationRule::LoNotDominatedByHi => "lo-not-dominated-by-hi",
            ViolationRule::EffectiveOutsideRange => "effective-outside-range",
        }
    }
}

impl fmt::Display for ViolationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ViolationRule {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// One broken invariant: which field, which rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: ViolationRule,
}

impl Violation {
    fn new(field: impl Into<String>, rule: ViolationRule) -> Self {
        Self {
            field: field.into(),
            rule,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Checks every model invariant and returns the list of violations; empty
/// means the label is valid.
pub fn validate(label: &MacLabel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = Vec::new();
    for (name, qualifier) in label.entries() {
        if seen.contains(&name) {
            out.push(Violation::new(name.as_str(), ViolationRule::DuplicatePolicy));
        }
        seen.push(name);
        match qualifier {
            Qualifier::Single(e) => {
                validate_element(e, &format!("{name}"), &mut out);
            }
            Qualifier::Ranged(r) => {
                validate_element(&r.effective, &format!("{name}.effective"), &mut out);
                validate_element(&r.lo, &format!("{name}.lo"), &mut out);
                validate_element(&r.hi, &format!("{name}.hi"), &mut out);
                if !lattice::dominates(&r.hi, &r.lo) {
                    out.push(Violation::new(name.as_str(), ViolationRule::LoNotDominatedByHi));
                }
                if !lattice::in_range(&r.effective, r) {
                    out.push(Violation::new(
                        name.as_str(),
                        ViolationRule::EffectiveOutsideRange,
                    ));
                }
            }
        }
    }
    out
}

fn validate_element(e: &PolicyElement, field: &str, out: &mut Vec<Violation>) {
    match e.grade {
        Grade::Num(n) if n > GRADE_MAX => {
            out.push(Violation::new(format!("{field}.grade"), ViolationRule::GradeOutOfRange));
        }
        Grade::Num(_) => {}
        _ if !e.compartments.is_empty() => {
            out.push(Violation::new(field, ViolationRule::SentinelWithCompartments));
        }
        _ => {}
    }
    for id in e.compartments.iter() {
        if !(COMPARTMENT_MIN..=COMPARTMENT_MAX).contains(&id) {
            out.push(Violation::new(
                format!("{field}.compartments"),
                ViolationRule::CompartmentOutOfRange,
            ));
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Why a label string was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("syntax error at byte {pos}: {reason}")]
    Syntax { pos: usize, reason: String },
    #[error("invalid label: {}", violations_summary(.0))]
    Validation(Vec<Violation>),
}

fn violations_summary(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parses the textual label syntax. Malformed text yields
/// [`LabelError::Syntax`] with a byte position; well-formed text that breaks
/// a model invariant yields [`LabelError::Validation`].
pub fn parse_label(text: &str) -> Result<MacLabel, LabelError> {
    let label = Parser::new(text).parse()?;
    let violations = validate(&label);
    if violations.is_empty() {
        Ok(label)
    } else {
        Err(LabelError::Validation(violations))
    }
}

/// Canonical text for a valid label: compartments ascending, policies in
/// entry order, ranges printed whenever the qualifier is ranged.
/// `parse_label(format_label(x)) == x` for every valid `x`.
pub fn format_label(label: &MacLabel) -> String {
    label.to_string()
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn err<T>(&self, pos: usize, reason: impl Into<String>) -> Result<T, LabelError> {
        Err(LabelError::Syntax {
            pos,
            reason: reason.into(),
        })
    }

    fn expect(&mut self, byte: u8) -> Result<(), LabelError> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(self.pos, format!("expected `{}`", byte as char))
        }
    }

    fn parse(mut self) -> Result<MacLabel, LabelError> {
        let mut entries = vec![self.parse_policy()?];
        while self.peek() == Some(b',') {
            self.pos += 1;
            entries.push(self.parse_policy()?);
        }
        if self.pos != self.bytes.len() {
            return self.err(self.pos, "unexpected character");
        }
        Ok(MacLabel::from_entries(entries))
    }

    fn parse_policy(&mut self) -> Result<(PolicyName, Qualifier), LabelError> {
        let start = self.pos;
        let word = self.take_word();
        let name = match word.parse::<PolicyName>() {
            Ok(name) => name,
            Err(()) if word.is_empty() => return self.err(start, "expected policy name"),
            Err(()) => return self.err(start, format!("unknown policy `{word}`")),
        };
        self.expect(b'/')?;
        let qualifier = self.parse_qualifier()?;
        Ok((name, qualifier))
    }

    fn parse_qualifier(&mut self) -> Result<Qualifier, LabelError> {
        let effective = self.parse_element()?;
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let lo = self.parse_element()?;
            self.expect(b'-')?;
            let hi = self.parse_element()?;
            self.expect(b')')?;
            Ok(Qualifier::Ranged(RangedElement { effective, lo, hi }))
        } else {
            Ok(Qualifier::Single(effective))
        }
    }

    fn parse_element(&mut self) -> Result<PolicyElement, LabelError> {
        let grade = self.parse_grade()?;
        let compartments = if self.peek() == Some(b':') {
            self.pos += 1;
            self.parse_compartments()?
        } else {
            CompartmentSet::new()
        };
        Ok(PolicyElement::new(grade, compartments))
    }

    fn parse_grade(&mut self) -> Result<Grade, LabelError> {
        let start = self.pos;
        match self.peek() {
            Some(b'0'..=b'9') => Ok(Grade::Num(self.parse_decimal()?)),
            Some(b'a'..=b'z') => match self.take_word() {
                "low" => Ok(Grade::Low),
                "high" => Ok(Grade::High),
                "equal" => Ok(Grade::Equal),
                word => self.err(start, format!("invalid grade `{word}`")),
            },
            _ => self.err(start, "expected grade"),
        }
    }

    fn parse_compartments(&mut self) -> Result<CompartmentSet, LabelError> {
        let mut set = CompartmentSet::new();
        set.insert(self.parse_compartment_id()?);
        while self.peek() == Some(b'+') {
            self.pos += 1;
            set.insert(self.parse_compartment_id()?);
        }
        Ok(set)
    }

    fn parse_compartment_id(&mut self) -> Result<CompartmentId, LabelError> {
        // Saturates above u16; validation reports it as out of range.
        Ok(self.parse_decimal()?.min(u16::MAX as u64) as u16)
    }

    /// DECIMAL := [0-9]+, saturating at u64::MAX so that overlong numbers
    /// surface as validation errors rather than panics.
    fn parse_decimal(&mut self) -> Result<u64, LabelError> {
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(b @ b'0'..=b'9') = self.peek() {
            value = value
                .saturating_mul(10)
                .saturating_add(u64::from(b - b'0'));
            self.pos += 1;
        }
        if self.pos == start {
            self.err(start, "expected number")
        } else {
            Ok(value)
        }
    }

    fn take_word(&mut self) -> &'a str {
        let start = self.pos;
        while matches!(self.peek(), Some(b'a'..=b'z')) {
            self.pos += 1;
        }
        // Grammar bytes are all ASCII, so the slice is valid UTF-8.
        std::str::from_utf8(&self.bytes[start..self.pos]).unwrap()
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
