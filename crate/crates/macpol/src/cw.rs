//! Chinese Wall label algebra and its compilation onto MLS grades and
//! compartments.
//!
//! A clearance label is an N-position vector over the companies of N
//! industries, with `⊥` standing for "public information only" in that
//! industry, plus a distinguished SYSHIGH top. Compiling a configuration
//! assigns every lattice node an MLS grade and a compartment set such that
//! vector dominance and MLS dominance coincide, which is what makes the
//! policy enforceable by a grade-and-compartment kernel.

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::label::{CompartmentSet, Grade, PolicyElement};

/// Company number within an industry, starting at 1.
pub type CompanyId = u32;

/// Conflict-of-interest configuration: N industries, C companies each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CwConfig {
    industries: u32,
    companies: u32,
}

impl CwConfig {
    pub fn new(industries: u32, companies: u32) -> Result<Self, CwError> {
        if industries == 0 || companies == 0 {
            return Err(CwError::InvalidConfig);
        }
        Ok(Self { industries, companies })
    }

    pub fn industries(&self) -> u32 {
        self.industries
    }

    pub fn companies(&self) -> u32 {
        self.companies
    }

    /// Compartment for company `company` of the 0-based `industry`:
    /// industry-major, company-minor, so ids run 1..=C*N.
    fn compartment(&self, industry: usize, company: CompanyId) -> u16 {
        (industry as u32 * self.companies + company) as u16
    }
}

/// Chinese Wall clearance label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CwLabel {
    /// One entry per industry: `Some(company)` or `None` for ⊥.
    Vector(Vec<Option<CompanyId>>),
    /// Distinguished top of the lattice.
    SysHigh,
}

impl CwLabel {
    /// The all-⊥ label, dominated by every other label.
    pub fn bottom(industries: usize) -> Self {
        CwLabel::Vector(vec![None; industries])
    }

    pub fn vector(entries: impl IntoIterator<Item = Option<CompanyId>>) -> Self {
        CwLabel::Vector(entries.into_iter().collect())
    }

    pub fn entries(&self) -> Option<&[Option<CompanyId>]> {
        match self {
            CwLabel::Vector(v) => Some(v),
            CwLabel::SysHigh => None,
        }
    }

    /// Number of non-⊥ positions; `None` for SYSHIGH.
    pub fn level(&self) -> Option<usize> {
        self.entries().map(|v| v.iter().flatten().count())
    }
}

impl fmt::Display for CwLabel {
    /// `[1,bot]` for vectors, `SYSHIGH` for the top.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CwLabel::SysHigh => f.write_str("SYSHIGH"),
            CwLabel::Vector(v) => {
                f.write_str("[")?;
                for (i, entry) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    match entry {
                        Some(c) => write!(f, "{c}")?,
                        None => f.write_str("bot")?,
                    }
                }
                f.write_str("]")
            }
        }
    }
}

impl Serialize for CwLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CwError {
    #[error("label length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("labels are incompatible and cannot be joined")]
    Incompatible,
    #[error("conflict of interest: industry {industry} is bound to company {held}, requested {requested}")]
    WallViolation {
        industry: usize,
        held: CompanyId,
        requested: CompanyId,
    },
    #[error("infeasible configuration: needs {compartments_needed} compartments, limit is 255")]
    Infeasible { compartments_needed: u64 },
    #[error("industry index {index} out of bounds for {len} industries")]
    IndexOutOfBounds { index: usize, len: usize },
    #[error("company numbers start at 1")]
    InvalidCompany,
    #[error("operation not defined for SYSHIGH")]
    SysHighOperand,
    #[error("industry and company counts must be at least 1")]
    InvalidConfig,
}

fn check_len(a: &[Option<CompanyId>], b: &[Option<CompanyId>]) -> Result<(), CwError> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(CwError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        })
    }
}

/// Dominance: position-wise equal, or non-⊥ over ⊥. SYSHIGH dominates
/// everything; the all-⊥ label is dominated by everything.
pub fn cw_dominates(a: &CwLabel, b: &CwLabel) -> Result<bool, CwError> {
    match (a, b) {
        (CwLabel::SysHigh, _) => Ok(true),
        (_, CwLabel::SysHigh) => Ok(false),
        (CwLabel::Vector(va), CwLabel::Vector(vb)) => {
            check_len(va, vb)?;
            Ok(va
                .iter()
                .zip(vb)
                .all(|(x, y)| x == y || (x.is_some() && y.is_none())))
        }
    }
}

/// Compatibility: every position agrees or is ⊥ on at least one side.
/// Comparable labels are always compatible; SYSHIGH, being comparable to
/// everything, is compatible with everything.
pub fn cw_compatible(a: &CwLabel, b: &CwLabel) -> Result<bool, CwError> {
    match (a, b) {
        (CwLabel::SysHigh, _) | (_, CwLabel::SysHigh) => Ok(true),
        (CwLabel::Vector(va), CwLabel::Vector(vb)) => {
            check_len(va, vb)?;
            Ok(va
                .iter()
                .zip(vb)
                .all(|(x, y)| x == y || x.is_none() || y.is_none()))
        }
    }
}

/// Class-combining join: position-wise first non-⊥ entry. Defined only for
/// compatible labels; SYSHIGH absorbs.
pub fn cw_join(a: &CwLabel, b: &CwLabel) -> Result<CwLabel, CwError> {
    if !cw_compatible(a, b)? {
        return Err(CwError::Incompatible);
    }
    match (a, b) {
        (CwLabel::SysHigh, _) | (_, CwLabel::SysHigh) => Ok(CwLabel::SysHigh),
        (CwLabel::Vector(va), CwLabel::Vector(vb)) => Ok(CwLabel::Vector(
            va.iter().zip(vb).map(|(x, y)| x.or(*y)).collect(),
        )),
    }
}

/// Moving up the lattice: bind `industry` (0-based) to `company`. Re-binding
/// the same company is a no-op; any other company in an industry already
/// bound is a conflict of interest.
pub fn progress(current: &CwLabel, industry: usize, company: CompanyId) -> Result<CwLabel, CwError> {
    let CwLabel::Vector(v) = current else {
        return Err(CwError::SysHighOperand);
    };
    if industry >= v.len() {
        return Err(CwError::IndexOutOfBounds {
            index: industry,
            len: v.len(),
        });
    }
    if company == 0 {
        return Err(CwError::InvalidCompany);
    }
    match v[industry] {
        None => {
            let mut next = v.clone();
            next[industry] = Some(company);
            Ok(CwLabel::Vector(next))
        }
        Some(held) if held == company => Ok(current.clone()),
        Some(held) => Err(CwError::WallViolation {
            industry,
            held,
            requested: company,
        }),
    }
}

/// All `(C+1)^N` vector labels in level-major order (odometer order within
/// a level), followed by SYSHIGH.
pub fn generate_lattice(cfg: &CwConfig) -> Vec<CwLabel> {
    let n = cfg.industries as usize;
    let c = cfg.companies;
    let mut vectors: Vec<Vec<Option<CompanyId>>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(vectors.len() * (c as usize + 1));
        for prefix in &vectors {
            for entry in std::iter::once(None).chain((1..=c).map(Some)) {
                let mut v = prefix.clone();
                v.push(entry);
                next.push(v);
            }
        }
        vectors = next;
    }
    let mut labels: Vec<CwLabel> = vectors.into_iter().map(CwLabel::Vector).collect();
    labels.sort_by_key(|l| l.level());
    labels.push(CwLabel::SysHigh);
    labels
}

/// Feasibility of a configuration against the label implementation limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FeasibilityReport {
    /// C * N; must stay below 256.
    pub compartments_needed: u64,
    /// (C+1)^N login classes, the public all-⊥ one included.
    pub login_classes_needed: u128,
    /// N + 1 grades: one per level plus the public one.
    pub grades_needed: u32,
    pub feasible: bool,
}

pub fn feasibility(cfg: &CwConfig) -> FeasibilityReport {
    let compartments_needed = u64::from(cfg.companies) * u64::from(cfg.industries);
    let login_classes_needed = u128::from(cfg.companies + 1)
        .checked_pow(cfg.industries)
        .unwrap_or(u128::MAX);
    FeasibilityReport {
        compartments_needed,
        login_classes_needed,
        grades_needed: cfg.industries + 1,
        feasible: compartments_needed < 256,
    }
}

/// One compiled lattice node: the MLS grade and compartment set standing in
/// for the original clearance label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Triplet {
    pub grade: Grade,
    pub compartments: CompartmentSet,
    pub cw: CwLabel,
}

impl Triplet {
    /// The node as a policy element, for dominance checks.
    pub fn element(&self) -> PolicyElement {
        PolicyElement::new(self.grade, self.compartments.clone())
    }
}

/// The node as label text: `mls/20:1+3`, `mls/low`, `mls/high:1+2+3+4`.
pub fn triplet_to_label(t: &Triplet) -> String {
    format!("mls/{}", t.element())
}

/// Compiles the whole lattice into triplets, level by level.
///
/// Level-1 nodes get grade 10 and a fresh singleton compartment. A node at
/// level i gets grade i*10 and the union of the compartment sets of every
/// previously generated node its label dominates. The all-⊥ node is
/// `(low, ∅)` and SYSHIGH is `(high, {1..C*N})`.
pub fn compile(cfg: &CwConfig) -> Result<Vec<Triplet>, CwError> {
    let report = feasibility(cfg);
    if !report.feasible {
        return Err(CwError::Infeasible {
            compartments_needed: report.compartments_needed,
        });
    }
    let mut out: Vec<Triplet> = Vec::new();
    for cw in generate_lattice(cfg) {
        let triplet = match &cw {
            CwLabel::SysHigh => Triplet {
                grade: Grade::High,
                compartments: (1..=report.compartments_needed as u16).collect(),
                cw,
            },
            CwLabel::Vector(v) => match cw.level().unwrap() {
                0 => Triplet {
                    grade: Grade::Low,
                    compartments: CompartmentSet::new(),
                    cw,
                },
                1 => {
                    let (industry, company) = v
                        .iter()
                        .enumerate()
                        .find_map(|(k, e)| e.map(|c| (k, c)))
                        .unwrap();
                    Triplet {
                        grade: Grade::Num(10),
                        compartments: [cfg.compartment(industry, company)].into_iter().collect(),
                        cw,
                    }
                }
                level => {
                    let mut compartments = CompartmentSet::new();
                    for prev in &out {
                        if cw_dominates(&cw, &prev.cw)? {
                            compartments = compartments.union(&prev.compartments);
                        }
                    }
                    Triplet {
                        grade: Grade::Num(level as u64 * 10),
                        compartments,
                        cw,
                    }
                }
            },
        };
        out.push(triplet);
    }
    Ok(out)
}

/// login.conf-style stanzas for every lattice node except SYSHIGH, each
/// carrying a degenerate single-level range of the compiled element:
///
/// ```text
/// cw_1_bot:\
///         :label=mls/10:1(10:1-10:1):
/// ```
pub fn emit_login_classes(cfg: &CwConfig) -> Result<String, CwError> {
    let mut out = String::new();
    for triplet in compile(cfg)? {
        let CwLabel::Vector(v) = &triplet.cw else {
            continue;
        };
        let name: Vec<String> = v
            .iter()
            .map(|e| e.map_or_else(|| "bot".to_string(), |c| c.to_string()))
            .collect();
        let element = triplet.element().to_string();
        out.push_str(&format!(
            "cw_{}:\\\n        :label=mls/{element}({element}-{element}):\n",
            name.join("_")
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[i32]) -> CwLabel {
        CwLabel::Vector(
            entries
                .iter()
                .map(|&e| if e < 0 { None } else { Some(e as CompanyId) })
                .collect(),
        )
    }

    #[test]
    fn dominance_examples() {
        assert!(cw_dominates(&v(&[1, 1, 2]), &v(&[1, -1, 2])).unwrap());
        assert!(cw_dominates(&v(&[1, 1, -1]), &v(&[1, -1, -1])).unwrap());
        assert!(!cw_dominates(&v(&[1, 1, 2]), &v(&[1, 2, 2])).unwrap());
        assert!(!cw_dominates(&v(&[1, 2, 2]), &v(&[1, 1, 2])).unwrap());
    }

    #[test]
    fn bottom_is_dominated_by_all_and_syshigh_dominates_all() {
        let bottom = CwLabel::bottom(3);
        for label in generate_lattice(&CwConfig::new(3, 2).unwrap()) {
            assert!(cw_dominates(&label, &bottom).unwrap());
            assert!(cw_dominates(&CwLabel::SysHigh, &label).unwrap());
        }
        assert!(!cw_dominates(&bottom, &v(&[1, -1, -1])).unwrap());
        assert!(!cw_dominates(&v(&[1, 1, 1]), &CwLabel::SysHigh).unwrap());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            cw_dominates(&v(&[1]), &v(&[1, 2])),
            Err(CwError::LengthMismatch { left: 1, right: 2 })
        ));
        assert!(matches!(
            cw_compatible(&v(&[1]), &v(&[1, 2])),
            Err(CwError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn compatibility_examples() {
        // Incomparable yet compatible.
        assert!(cw_compatible(&v(&[1, -1, 2]), &v(&[-1, 3, 2])).unwrap());
        assert!(!cw_dominates(&v(&[1, -1, 2]), &v(&[-1, 3, 2])).unwrap());
        // Conflicting position 0.
        assert!(!cw_compatible(&v(&[1, 1, -1]), &v(&[2, -1, 1])).unwrap());
    }

    #[test]
    fn comparable_labels_are_compatible() {
        let cfg = CwConfig::new(2, 2).unwrap();
        for a in generate_lattice(&cfg) {
            for b in generate_lattice(&cfg) {
                if cw_dominates(&a, &b).unwrap() || cw_dominates(&b, &a).unwrap() {
                    assert!(cw_compatible(&a, &b).unwrap());
                }
            }
        }
    }

    #[test]
    fn join_examples() {
        assert_eq!(cw_join(&v(&[-1, 3, 1]), &v(&[2, -1, 1])).unwrap(), v(&[2, 3, 1]));
        let x = v(&[1, -1, 2]);
        assert_eq!(cw_join(&x, &x).unwrap(), x);
        assert_eq!(cw_join(&x, &CwLabel::bottom(3)).unwrap(), x);
        assert!(matches!(
            cw_join(&v(&[1, 1, -1]), &v(&[2, -1, 1])),
            Err(CwError::Incompatible)
        ));
    }

    #[test]
    fn lattice_node_counts() {
        assert_eq!(generate_lattice(&CwConfig::new(2, 2).unwrap()).len(), 10);
        assert_eq!(generate_lattice(&CwConfig::new(3, 2).unwrap()).len(), 28);
        let tiny = generate_lattice(&CwConfig::new(1, 1).unwrap());
        assert_eq!(tiny, vec![v(&[-1]), v(&[1]), CwLabel::SysHigh]);
    }

    #[test]
    fn progress_walks_the_trail() {
        // Public consultant takes on a bank, then an oil company.
        let mary = CwLabel::bottom(2);
        let banks_a = progress(&mary, 0, 1).unwrap();
        assert_eq!(banks_a, v(&[1, -1]));
        assert!(cw_dominates(&banks_a, &mary).unwrap());
        let oil_b = progress(&banks_a, 1, 2).unwrap();
        assert_eq!(oil_b, v(&[1, 2]));
        // Same company again: no-op.
        assert_eq!(progress(&banks_a, 0, 1).unwrap(), banks_a);
        // A second bank raises the wall.
        assert!(matches!(
            progress(&banks_a, 0, 2),
            Err(CwError::WallViolation {
                industry: 0,
                held: 1,
                requested: 2
            })
        ));
    }

    #[test]
    fn progress_bounds() {
        assert!(matches!(
            progress(&CwLabel::bottom(2), 2, 1),
            Err(CwError::IndexOutOfBounds { .. })
        ));
        assert!(matches!(progress(&CwLabel::bottom(2), 0, 0), Err(CwError::InvalidCompany)));
        assert!(matches!(progress(&CwLabel::SysHigh, 0, 1), Err(CwError::SysHighOperand)));
    }

    #[test]
    fn feasibility_boundaries() {
        let r = feasibility(&CwConfig::new(2, 2).unwrap());
        assert_eq!(r.compartments_needed, 4);
        assert_eq!(r.login_classes_needed, 9);
        assert_eq!(r.grades_needed, 3);
        assert!(r.feasible);

        let r = feasibility(&CwConfig::new(16, 16).unwrap());
        assert_eq!(r.compartments_needed, 256);
        assert!(!r.feasible);

        let r = feasibility(&CwConfig::new(1, 254).unwrap());
        assert_eq!(r.compartments_needed, 254);
        assert!(r.feasible);
    }

    #[test]
    fn compile_two_by_two() {
        let cfg = CwConfig::new(2, 2).unwrap();
        let triplets = compile(&cfg).unwrap();
        assert_eq!(triplets.len(), 10);
        let by_cw = |cw: &CwLabel| -> String {
            triplets
                .iter()
                .find(|t| &t.cw == cw)
                .map(triplet_to_label)
                .unwrap()
        };
        assert_eq!(by_cw(&v(&[-1, -1])), "mls/low");
        assert_eq!(by_cw(&v(&[1, -1])), "mls/10:1");
        assert_eq!(by_cw(&v(&[2, -1])), "mls/10:2");
        assert_eq!(by_cw(&v(&[-1, 1])), "mls/10:3");
        assert_eq!(by_cw(&v(&[-1, 2])), "mls/10:4");
        assert_eq!(by_cw(&v(&[1, 1])), "mls/20:1+3");
        assert_eq!(by_cw(&v(&[1, 2])), "mls/20:1+4");
        assert_eq!(by_cw(&v(&[2, 1])), "mls/20:2+3");
        assert_eq!(by_cw(&v(&[2, 2])), "mls/20:2+4");
        assert_eq!(by_cw(&CwLabel::SysHigh), "mls/high:1+2+3+4");
    }

    #[test]
    fn compile_rejects_infeasible() {
        assert!(matches!(
            compile(&CwConfig::new(16, 16).unwrap()),
            Err(CwError::Infeasible {
                compartments_needed: 256
            })
        ));
    }

    #[test]
    fn level_compartments_union_dominated_level_ones() {
        // The union over everything dominated equals the union over the
        // dominated level-1 singletons.
        for (n, c) in [(2u32, 3u32), (3, 2), (3, 3)] {
            let cfg = CwConfig::new(n, c).unwrap();
            let triplets = compile(&cfg).unwrap();
            let level_ones: Vec<&Triplet> = triplets
                .iter()
                .filter(|t| t.cw.level() == Some(1))
                .collect();
            for t in &triplets {
                if matches!(t.cw.level(), Some(l) if l >= 2) {
                    let mut expect = CompartmentSet::new();
                    for one in &level_ones {
                        if cw_dominates(&t.cw, &one.cw).unwrap() {
                            expect = expect.union(&one.compartments);
                        }
                    }
                    assert_eq!(t.compartments, expect, "node {}", t.cw);
                }
            }
        }
    }

    #[test]
    fn login_classes_two_by_two() {
        let text = emit_login_classes(&CwConfig::new(2, 2).unwrap()).unwrap();
        let stanzas: Vec<&str> = text.lines().filter(|l| l.starts_with("cw_")).collect();
        assert_eq!(stanzas.len(), 9);
        assert!(text.contains("cw_bot_bot:\\\n        :label=mls/low(low-low):\n"));
        assert!(text.contains("cw_1_1:\\\n        :label=mls/20:1+3(20:1+3-20:1+3):\n"));
        assert!(!text.contains("high"));
    }

    #[test]
    fn login_classes_smallest_config() {
        let text = emit_login_classes(&CwConfig::new(1, 1).unwrap()).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("cw_")).count(), 2);
    }
}
