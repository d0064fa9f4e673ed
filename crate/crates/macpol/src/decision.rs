//! Access rules and multi-policy composition.
//!
//! Biba guards integrity (no read-down, no write-up) and MLS guards
//! confidentiality (no read-up, no write-down), both in the liberal
//! star-property variant. When several policy modules are loaded, every one
//! of them must allow an access for the composed verdict to be allow.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::label::{MacLabel, PolicyElement, PolicyName, Qualifier};
use crate::lattice::{dominates, in_range};

/// Direction of an information transfer with respect to the subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessOp {
    Read,
    Write,
}

impl AccessOp {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessOp::Read => "read",
            AccessOp::Write => "write",
        }
    }
}

impl fmt::Display for AccessOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AccessOp {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "read" => Ok(AccessOp::Read),
            "write" => Ok(AccessOp::Write),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Allow,
    Deny,
}

impl Verdict {
    pub fn allowed(self) -> bool {
        self == Verdict::Allow
    }

    fn from_bool(allowed: bool) -> Self {
        if allowed {
            Verdict::Allow
        } else {
            Verdict::Deny
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Allow => "allow",
            Verdict::Deny => "deny",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// Verdict of a single policy module, with the rule that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyVerdict {
    pub policy: PolicyName,
    pub verdict: Verdict,
    pub rule: &'static str,
}

/// Composed verdict: allow iff every per-policy verdict is allow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub breakdown: Vec<PolicyVerdict>,
}

impl Decision {
    /// Conjunction of the per-policy verdicts.
    pub fn from_breakdown(breakdown: Vec<PolicyVerdict>) -> Self {
        let verdict = Verdict::from_bool(breakdown.iter().all(|p| p.verdict.allowed()));
        Self { verdict, breakdown }
    }

    /// Unconditional allow with no per-policy entries.
    pub fn allow() -> Self {
        Self {
            verdict: Verdict::Allow,
            breakdown: Vec::new(),
        }
    }

    pub fn allowed(&self) -> bool {
        self.verdict.allowed()
    }

    /// Conjunction of several decisions, concatenating their breakdowns.
    pub fn combine(decisions: impl IntoIterator<Item = Decision>) -> Self {
        let mut breakdown = Vec::new();
        let mut verdict = Verdict::Allow;
        for d in decisions {
            if !d.allowed() {
                verdict = Verdict::Deny;
            }
            breakdown.extend(d.breakdown);
        }
        Self { verdict, breakdown }
    }
}

pub const RULE_BIBA_READ: &str = "biba-simple-integrity";
pub const RULE_BIBA_WRITE: &str = "biba-liberal-star";
pub const RULE_MLS_READ: &str = "mls-simple-security";
pub const RULE_MLS_WRITE: &str = "mls-liberal-star";
pub const RULE_RELABEL: &str = "relabel-range";

/// Why a pair of labels cannot be decided at all.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecisionError {
    #[error("policy sets differ: [{}] vs [{}]", names(.0), names(.1))]
    PolicyMismatch(Vec<PolicyName>, Vec<PolicyName>),
    #[error("{context} label must not be ranged (policy `{policy}`)")]
    UnexpectedRanged {
        policy: PolicyName,
        context: &'static str,
    },
}

fn names(list: &[PolicyName]) -> String {
    list.iter()
        .map(|p| p.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

/// Biba integrity: reads must come from at least the subject's integrity,
/// writes must not reach above it.
pub fn biba_decide(subject: &PolicyElement, object: &PolicyElement, op: AccessOp) -> Verdict {
    Verdict::from_bool(match op {
        AccessOp::Read => dominates(object, subject),
        AccessOp::Write => dominates(subject, object),
    })
}

/// MLS confidentiality: reads must stay at or below the subject's clearance,
/// writes must not leak below it.
pub fn mls_decide(subject: &PolicyElement, object: &PolicyElement, op: AccessOp) -> Verdict {
    Verdict::from_bool(match op {
        AccessOp::Read => dominates(subject, object),
        AccessOp::Write => dominates(object, subject),
    })
}

fn policy_decide(
    policy: PolicyName,
    subject: &PolicyElement,
    object: &PolicyElement,
    op: AccessOp,
) -> PolicyVerdict {
    let (verdict, rule) = match (policy, op) {
        (PolicyName::Biba, AccessOp::Read) => (biba_decide(subject, object, op), RULE_BIBA_READ),
        (PolicyName::Biba, AccessOp::Write) => (biba_decide(subject, object, op), RULE_BIBA_WRITE),
        (PolicyName::Mls, AccessOp::Read) => (mls_decide(subject, object, op), RULE_MLS_READ),
        (PolicyName::Mls, AccessOp::Write) => (mls_decide(subject, object, op), RULE_MLS_WRITE),
    };
    PolicyVerdict { policy, verdict, rule }
}

fn check_same_policies(a: &MacLabel, b: &MacLabel) -> Result<(), DecisionError> {
    let mut pa = a.policies();
    let mut pb = b.policies();
    pa.sort_unstable();
    pb.sort_unstable();
    if pa == pb {
        Ok(())
    } else {
        Err(DecisionError::PolicyMismatch(a.policies(), b.policies()))
    }
}

fn require_single<'a>(
    label: &'a MacLabel,
    policy: PolicyName,
    context: &'static str,
) -> Result<&'a PolicyElement, DecisionError> {
    match label.get(policy) {
        Some(Qualifier::Single(e)) => Ok(e),
        Some(Qualifier::Ranged(_)) => Err(DecisionError::UnexpectedRanged { policy, context }),
        None => unreachable!("policy sets already checked"),
    }
}

/// Composed access decision. Subject qualifiers may be ranged (the effective
/// element is used); object qualifiers must not be. Both labels must cover
/// the same policy set.
pub fn decide(subject: &MacLabel, object: &MacLabel, op: AccessOp) -> Result<Decision, DecisionError> {
    check_same_policies(subject, object)?;
    let mut breakdown = Vec::with_capacity(subject.len());
    for (policy, qualifier) in subject.entries() {
        let object_element = require_single(object, policy, "object")?;
        breakdown.push(policy_decide(policy, qualifier.effective(), object_element, op));
    }
    Ok(Decision::from_breakdown(breakdown))
}

/// Whether a session may move its effective label to `requested`: every
/// requested element must lie within the session's current envelope.
pub fn subject_relabel(current: &MacLabel, requested: &MacLabel) -> Result<Decision, DecisionError> {
    check_same_policies(current, requested)?;
    let mut breakdown = Vec::with_capacity(current.len());
    for (policy, qualifier) in current.entries() {
        let wanted = require_single(requested, policy, "requested")?;
        breakdown.push(PolicyVerdict {
            policy,
            verdict: Verdict::from_bool(in_range(wanted, &qualifier.envelope())),
            rule: RULE_RELABEL,
        });
    }
    Ok(Decision::from_breakdown(breakdown))
}

/// The session label after an allowed subject relabel: the envelope is kept,
/// only the effective point moves.
pub fn apply_subject_relabel(current: &MacLabel, requested: &MacLabel) -> MacLabel {
    MacLabel::from_entries(current.entries().map(|(policy, qualifier)| {
        let wanted = requested
            .get(policy)
            .expect("policy sets already checked")
            .effective()
            .clone();
        let new = match qualifier {
            Qualifier::Single(_) => Qualifier::Single(wanted),
            Qualifier::Ranged(r) => {
                let mut r = r.clone();
                r.effective = wanted;
                Qualifier::Ranged(r)
            }
        };
        (policy, new)
    }))
}

/// Whether a subject may relabel an object from `old` to `new`: both the old
/// and the new element must lie within the subject's envelope, per policy.
pub fn object_relabel(
    subject: &MacLabel,
    old: &MacLabel,
    new: &MacLabel,
) -> Result<Decision, DecisionError> {
    check_same_policies(subject, old)?;
    check_same_policies(subject, new)?;
    let mut breakdown = Vec::with_capacity(subject.len());
    for (policy, qualifier) in subject.entries() {
        let old_element = require_single(old, policy, "object")?;
        let new_element = require_single(new, policy, "object")?;
        let envelope = qualifier.envelope();
        breakdown.push(PolicyVerdict {
            policy,
            verdict: Verdict::from_bool(
                in_range(old_element, &envelope) && in_range(new_element, &envelope),
            ),
            rule: RULE_RELABEL,
        });
    }
    Ok(Decision::from_breakdown(breakdown))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::{parse_label, validate, CompartmentSet, Grade};

    fn el(g: u64, ids: &[u16]) -> PolicyElement {
        PolicyElement::new(Grade::Num(g), ids.iter().copied().collect())
    }

    fn label(text: &str) -> MacLabel {
        parse_label(text).unwrap()
    }

    #[test]
    fn biba_blocks_read_down() {
        assert_eq!(biba_decide(&el(10, &[]), &el(2, &[]), AccessOp::Read), Verdict::Deny);
        assert_eq!(biba_decide(&el(10, &[]), &el(2, &[]), AccessOp::Write), Verdict::Allow);
        assert_eq!(biba_decide(&el(2, &[]), &el(10, &[]), AccessOp::Read), Verdict::Allow);
    }

    #[test]
    fn mls_blocks_write_down() {
        let secret = el(100, &[]);
        let public = PolicyElement::bare(Grade::Low);
        assert_eq!(mls_decide(&secret, &public, AccessOp::Write), Verdict::Deny);
        assert_eq!(mls_decide(&public, &el(50, &[]), AccessOp::Read), Verdict::Deny);
        assert_eq!(
            mls_decide(&el(50, &[2]), &el(50, &[2]), AccessOp::Read),
            Verdict::Allow
        );
    }

    #[test]
    fn composed_read_allows_when_every_policy_allows() {
        let john = label("biba/10(10-10),mls/100(100-100)");
        let folder = label("biba/10,mls/low");
        let d = decide(&john, &folder, AccessOp::Read).unwrap();
        assert!(d.allowed());
        assert_eq!(d.breakdown.len(), 2);
    }

    #[test]
    fn composed_write_denies_on_single_policy() {
        let john = label("biba/10(10-10),mls/100(100-100)");
        let folder = label("biba/2,mls/low");
        let d = decide(&john, &folder, AccessOp::Write).unwrap();
        assert!(!d.allowed());
        assert_eq!(
            d.breakdown
                .iter()
                .map(|p| (p.policy, p.verdict))
                .collect::<Vec<_>>(),
            vec![
                (PolicyName::Biba, Verdict::Allow),
                (PolicyName::Mls, Verdict::Deny)
            ]
        );
    }

    #[test]
    fn equal_labels_allow_everything() {
        let temp = label("biba/equal,mls/equal");
        for op in [AccessOp::Read, AccessOp::Write] {
            assert!(decide(&temp, &temp, op).unwrap().allowed());
        }
    }

    #[test]
    fn mismatched_policy_sets_error() {
        let subject = label("biba/5(2-10)");
        let object = label("biba/2,mls/low");
        assert!(matches!(
            decide(&subject, &object, AccessOp::Read),
            Err(DecisionError::PolicyMismatch(..))
        ));
    }

    #[test]
    fn ranged_object_rejected() {
        let subject = label("biba/5(2-10)");
        let object = label("biba/5(2-10)");
        assert!(matches!(
            decide(&subject, &object, AccessOp::Read),
            Err(DecisionError::UnexpectedRanged { .. })
        ));
    }

    #[test]
    fn subject_relabel_within_envelope() {
        let jane = label("biba/5(2-10)");
        assert!(subject_relabel(&jane, &label("biba/2")).unwrap().allowed());
        assert!(subject_relabel(&jane, &label("biba/10")).unwrap().allowed());
        let mary = label("biba/2(2-2)");
        assert!(!subject_relabel(&mary, &label("biba/5")).unwrap().allowed());
    }

    #[test]
    fn subject_relabel_keeps_envelope() {
        let jane = label("biba/5(2-10)");
        let after = apply_subject_relabel(&jane, &label("biba/2"));
        assert_eq!(after.to_string(), "biba/2(2-10)");
        assert!(validate(&after).is_empty());
    }

    #[test]
    fn object_relabel_needs_old_and_new_in_range() {
        let jane = label("biba/5(2-10)");
        assert!(object_relabel(&jane, &label("biba/2"), &label("biba/10"))
            .unwrap()
            .allowed());
        let mary = label("biba/2(2-2)");
        assert!(!object_relabel(&mary, &label("biba/2"), &label("biba/5"))
            .unwrap()
            .allowed());
        // Idempotent relabel of an in-range object is always allowed.
        assert!(object_relabel(&jane, &label("biba/5"), &label("biba/5"))
            .unwrap()
            .allowed());
    }

    /// Elements over grades {0..3} and compartment subsets of {1,2}.
    fn small_domain() -> Vec<PolicyElement> {
        let mut out = Vec::new();
        for g in 0..=3u64 {
            for mask in 0..4u16 {
                let ids: CompartmentSet =
                    (1..=2u16).filter(|i| mask & (1 << (i - 1)) != 0).collect();
                out.push(PolicyElement::new(Grade::Num(g), ids));
            }
        }
        out
    }

    #[test]
    fn biba_and_mls_are_duals() {
        for s in small_domain() {
            for o in small_domain() {
                assert_eq!(
                    biba_decide(&s, &o, AccessOp::Read),
                    mls_decide(&s, &o, AccessOp::Write)
                );
                assert_eq!(
                    biba_decide(&s, &o, AccessOp::Write),
                    mls_decide(&s, &o, AccessOp::Read)
                );
            }
        }
    }

    #[test]
    fn allowed_flows_respect_dominance() {
        use crate::lattice::dominates;
        for s in small_domain() {
            for src in small_domain() {
                for dst in small_domain() {
                    if mls_decide(&s, &src, AccessOp::Read).allowed()
                        && mls_decide(&s, &dst, AccessOp::Write).allowed()
                    {
                        assert!(dominates(&dst, &src));
                    }
                    if biba_decide(&s, &src, AccessOp::Read).allowed()
                        && biba_decide(&s, &dst, AccessOp::Write).allowed()
                    {
                        assert!(dominates(&src, &dst));
                    }
                }
            }
        }
    }

    #[test]
    fn verdict_is_conjunction_of_breakdown() {
        let subjects = ["biba/2(2-2),mls/low(low-low)", "biba/10(10-10),mls/100(100-100)"];
        let objects = ["biba/2,mls/low", "biba/10,mls/50", "biba/equal,mls/equal"];
        for s in subjects {
            for o in objects {
                for op in [AccessOp::Read, AccessOp::Write] {
                    let d = decide(&label(s), &label(o), op).unwrap();
                    assert_eq!(
                        d.allowed(),
                        d.breakdown.iter().all(|p| p.verdict.allowed())
                    );
                }
            }
        }
    }
}
