//! Dominance partial order over policy elements.
//!
//! An element dominates another when its grade is at least as high and its
//! compartment set includes the other's. The sentinels bend that rule:
//! `equal` matches everything, `low` and `high` pin the ends of the grade
//! order, and between two sentinel grades the compartment rule is waived.

use serde::{Serialize, Serializer};

use crate::label::{Grade, PolicyElement, RangedElement};

/// Four-way outcome of comparing two elements under dominance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    Equal,
    Dominates,
    DominatedBy,
    Incomparable,
}

impl Ordering {
    pub fn as_str(self) -> &'static str {
        match self {
            Ordering::Equal => "equal",
            Ordering::Dominates => "dominates",
            Ordering::DominatedBy => "dominated-by",
            Ordering::Incomparable => "incomparable",
        }
    }
}

impl std::fmt::Display for Ordering {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Ordering {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// Grade order: `low <= Num(k) <= high`, numeric grades by integer value.
/// `equal` compares greater-or-equal against everything.
fn grade_ge(a: Grade, b: Grade) -> bool {
    match (a, b) {
        (Grade::Equal, _) | (_, Grade::Equal) => true,
        (Grade::High, _) => true,
        (_, Grade::High) => false,
        (_, Grade::Low) => true,
        (Grade::Low, _) => false,
        (Grade::Num(x), Grade::Num(y)) => x >= y,
    }
}

/// True when `a` dominates `b`: the grade rule holds and `a`'s compartments
/// include `b`'s. An `equal` grade on either side matches unconditionally.
/// Between two sentinel grades only the grade rule applies; against numeric
/// grades the compartment rule still holds.
pub fn dominates(a: &PolicyElement, b: &PolicyElement) -> bool {
    if a.grade == Grade::Equal || b.grade == Grade::Equal {
        return true;
    }
    if !grade_ge(a.grade, b.grade) {
        return false;
    }
    if a.grade.is_sentinel() && b.grade.is_sentinel() {
        return true;
    }
    a.compartments.is_superset(&b.compartments)
}

/// Classifies the pair under dominance. Elements involving the `equal`
/// sentinel report [`Ordering::Equal`]; mutual dominance without structural
/// equality cannot occur for valid labels.
pub fn compare(a: &PolicyElement, b: &PolicyElement) -> Ordering {
    if a.grade == Grade::Equal || b.grade == Grade::Equal {
        return Ordering::Equal;
    }
    match (dominates(a, b), dominates(b, a)) {
        (true, true) if a == b => Ordering::Equal,
        (true, false) => Ordering::Dominates,
        (false, true) => Ordering::DominatedBy,
        _ => Ordering::Incomparable,
    }
}

/// True when `e` lies within the range: `e` dominates `r.lo` and `r.hi`
/// dominates `e`.
pub fn in_range(e: &PolicyElement, r: &RangedElement) -> bool {
    dominates(e, &r.lo) && dominates(&r.hi, e)
}

/// Least upper bound of two numeric-grade elements: maximum grade, union of
/// compartments. `None` when either grade is a sentinel.
pub fn join(a: &PolicyElement, b: &PolicyElement) -> Option<PolicyElement> {
    match (a.grade, b.grade) {
        (Grade::Num(x), Grade::Num(y)) => Some(PolicyElement::new(
            Grade::Num(x.max(y)),
            a.compartments.union(&b.compartments),
        )),
        _ => None,
    }
}

/// Greatest lower bound of two numeric-grade elements: minimum grade,
/// intersection of compartments. `None` when either grade is a sentinel.
pub fn meet(a: &PolicyElement, b: &PolicyElement) -> Option<PolicyElement> {
    match (a.grade, b.grade) {
        (Grade::Num(x), Grade::Num(y)) => Some(PolicyElement::new(
            Grade::Num(x.min(y)),
            a.compartments.intersection(&b.compartments),
        )),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::CompartmentSet;

    fn el(grade: Grade, ids: &[u16]) -> PolicyElement {
        PolicyElement::new(grade, ids.iter().copied().collect())
    }

    fn num(g: u64) -> PolicyElement {
        el(Grade::Num(g), &[])
    }

    fn num_with(g: u64, ids: &[u16]) -> PolicyElement {
        el(Grade::Num(g), ids)
    }

    /// All elements over grades {0,1,2} and compartment subsets of {1,2,3}.
    fn num_domain() -> Vec<PolicyElement> {
        let mut out = Vec::new();
        for g in 0..=2u64 {
            for mask in 0..8u16 {
                let ids: CompartmentSet =
                    (1..=3u16).filter(|i| mask & (1 << (i - 1)) != 0).collect();
                out.push(PolicyElement::new(Grade::Num(g), ids));
            }
        }
        out
    }

    #[test]
    fn superset_compartments_dominate() {
        assert!(dominates(&num_with(50, &[1, 2]), &num_with(50, &[1])));
        assert!(!dominates(&num_with(50, &[1]), &num_with(50, &[1, 2])));
    }

    #[test]
    fn disjoint_compartments_are_incomparable() {
        let a = num_with(50, &[5, 9]);
        let b = num_with(50, &[5, 6, 7]);
        assert!(!dominates(&a, &b));
        assert!(!dominates(&b, &a));
        assert_eq!(compare(&a, &b), Ordering::Incomparable);
    }

    #[test]
    fn equal_matches_both_directions() {
        let equal = el(Grade::Equal, &[]);
        assert!(dominates(&equal, &num(7)));
        assert!(dominates(&num(7), &equal));
        assert_eq!(compare(&equal, &num(7)), Ordering::Equal);
        assert_eq!(compare(&num(7), &equal), Ordering::Equal);
    }

    #[test]
    fn equal_ignores_compartments() {
        let equal = el(Grade::Equal, &[]);
        assert!(dominates(&equal, &num_with(50, &[1, 2])));
        assert!(dominates(&num_with(50, &[1, 2]), &equal));
    }

    #[test]
    fn low_is_a_floor() {
        assert!(dominates(&num(100), &el(Grade::Low, &[])));
        assert!(!dominates(&el(Grade::Low, &[]), &num(0)));
    }

    #[test]
    fn grade_comparison_drives_dominance() {
        assert!(dominates(&num(10), &num(2)));
        assert_eq!(compare(&num(10), &num(2)), Ordering::Dominates);
        assert_eq!(compare(&num(2), &num(10)), Ordering::DominatedBy);
    }

    #[test]
    fn compare_is_reflexively_equal() {
        for x in num_domain() {
            assert_eq!(compare(&x, &x), Ordering::Equal);
        }
        let low = el(Grade::Low, &[]);
        assert_eq!(compare(&low, &low), Ordering::Equal);
    }

    #[test]
    fn in_range_spans_the_envelope() {
        let r = RangedElement {
            effective: num(5),
            lo: num(2),
            hi: num(10),
        };
        assert!(in_range(&num(2), &r));
        assert!(in_range(&num(10), &r));
        assert!(!in_range(&num(1), &r));
        assert!(!in_range(&num(11), &r));
    }

    #[test]
    fn numeric_sublattice_is_a_partial_order() {
        let domain = num_domain();
        for a in &domain {
            assert!(dominates(a, a), "reflexivity failed for {a}");
            for b in &domain {
                if dominates(a, b) && dominates(b, a) {
                    assert_eq!(a, b, "antisymmetry failed for {a} vs {b}");
                }
                for c in &domain {
                    if dominates(a, b) && dominates(b, c) {
                        assert!(dominates(a, c), "transitivity failed: {a} {b} {c}");
                    }
                }
            }
        }
    }

    #[test]
    fn sentinels_bound_each_fixed_compartment_set() {
        for e in num_domain() {
            let high = PolicyElement::new(Grade::High, e.compartments.clone());
            let low = PolicyElement::new(Grade::Low, e.compartments.clone());
            assert!(dominates(&high, &e));
            assert!(dominates(&e, &low));
        }
    }

    #[test]
    fn join_and_meet_are_tight_bounds() {
        let domain = num_domain();
        for a in &domain {
            for b in &domain {
                let j = join(a, b).unwrap();
                assert!(dominates(&j, a) && dominates(&j, b));
                let m = meet(a, b).unwrap();
                assert!(dominates(a, &m) && dominates(b, &m));
                for c in &domain {
                    if dominates(c, a) && dominates(c, b) {
                        assert!(dominates(c, &j), "{j} is not least for {a},{b}: {c}");
                    }
                    if dominates(a, c) && dominates(b, c) {
                        assert!(dominates(&m, c), "{m} is not greatest for {a},{b}: {c}");
                    }
                }
            }
        }
    }

    #[test]
    fn join_meet_undefined_for_sentinels() {
        let low = el(Grade::Low, &[]);
        assert!(join(&low, &num(1)).is_none());
        assert!(meet(&num(1), &low).is_none());
    }
}
