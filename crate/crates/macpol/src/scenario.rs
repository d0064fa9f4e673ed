//! Virtual labeled filesystem: users, sessions, audited operations, and an
//! after-the-fact information-flow check.
//!
//! A [`World`] is built from a line-based fixture text (folders and users),
//! then driven by scripts of session operations. Every operation is decided
//! by the [`crate::decision`] rules and appended to an audit trail whether
//! allowed or denied; denied operations change nothing else. Reads taint the
//! session with the source path, writes push the session taint into the
//! target, and [`World::flow_check`] replays the audit to verify that every
//! un-relabeled taint flow respected both lattices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::decision::{
    self, AccessOp, Decision, DecisionError, Verdict,
};
use crate::label::{parse_label, validate, LabelError, MacLabel, PolicyName};
use crate::lattice::dominates;

pub type SessionId = String;

// ---------------------------------------------------------------------------
// World state
// ---------------------------------------------------------------------------

/// A labeled filesystem object; folders and files share the type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectNode {
    pub path: String,
    pub label: MacLabel,
    /// Origin paths of every read that has flowed into this object.
    pub taint: BTreeSet<String>,
    pub is_folder: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserAccount {
    pub name: String,
    pub login_label: MacLabel,
}

/// A logged-in subject. The label keeps the login envelope; only the
/// effective point moves on relabel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub user: String,
    pub label: MacLabel,
    pub taint: BTreeSet<String>,
}

impl Session {
    pub fn effective(&self) -> MacLabel {
        self.label.effective_projection()
    }
}

/// What an audit record was about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    DeclareFolder { path: String, label: MacLabel },
    DeclareUser { name: String, label: MacLabel },
    SessionStart { sid: SessionId, user: String },
    Setpmac { label: MacLabel },
    Setfmac { path: String, label: MacLabel },
    Read { path: String },
    Write { path: String },
    Create { path: String },
    Copy { src: String, dst: String },
    Move { src: String, dst: String },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::DeclareFolder { path, label } => write!(f, "folder {path} label {label}"),
            Action::DeclareUser { name, label } => write!(f, "user {name} label {label}"),
            Action::SessionStart { sid, user } => write!(f, "session {sid} user {user}"),
            Action::Setpmac { label } => write!(f, "setpmac {label}"),
            Action::Setfmac { path, label } => write!(f, "setfmac {path} {label}"),
            Action::Read { path } => write!(f, "read {path}"),
            Action::Write { path } => write!(f, "write {path}"),
            Action::Create { path } => write!(f, "create {path}"),
            Action::Copy { src, dst } => write!(f, "copy {src} {dst}"),
            Action::Move { src, dst } => write!(f, "move {src} {dst}"),
        }
    }
}

/// A sub-check of a composite operation, e.g. the folder write behind a
/// `create`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedCheck {
    pub what: String,
    pub decision: Decision,
}

/// State change applied by an allowed operation. Labels are snapshotted at
/// event time so the audit replays without the final world state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    FolderAdded { path: String, label: MacLabel },
    UserAdded { name: String },
    SessionStarted { sid: SessionId, user: String, label: MacLabel },
    SessionRelabeled { sid: SessionId, old: MacLabel, new: MacLabel },
    ObjectRead { path: String, label: MacLabel },
    ObjectWritten { path: String, label: MacLabel },
    ObjectCreated { path: String, label: MacLabel },
    ObjectRelabeled { path: String, old: MacLabel, new: MacLabel },
    ObjectDeleted { path: String },
}

/// Append-only audit entry; denied operations record a decision and no
/// effects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRecord {
    /// 1-based position in the trail.
    pub step: usize,
    pub session: Option<SessionId>,
    pub action: Action,
    pub decision: Decision,
    pub checks: Vec<NamedCheck>,
    pub effects: Vec<Effect>,
}

/// One broken information-flow rule found by [`World::flow_check`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowViolation {
    pub audit_step: usize,
    pub policy: PolicyName,
    pub origin: String,
    pub origin_label: MacLabel,
    pub object: String,
    pub object_label: MacLabel,
}

impl fmt::Display for FlowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step {}: {} flow from {} ({}) into {} ({})",
            self.audit_step, self.policy, self.origin, self.origin_label, self.object,
            self.object_label
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: {source}")]
    InvalidLabel { line: usize, source: LabelError },
    #[error("fixture failed at line {line}: {reason}")]
    Fixture { line: usize, reason: String },
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown path `{0}`")]
    UnknownPath(String),
    #[error("path already exists: `{0}`")]
    AlreadyExists(String),
    #[error("no containing folder for `{0}`")]
    MissingFolder(String),
    #[error("`{0}` is a folder")]
    IsAFolder(String),
    #[error("duplicate session id `{0}`")]
    DuplicateSession(String),
    #[error("duplicate user `{0}`")]
    DuplicateUser(String),
    #[error("object label must not be ranged: `{0}`")]
    RangedObjectLabel(String),
    #[error("invalid label: {0}")]
    Label(#[from] LabelError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

/// The simulated world. Single-owner mutable state; operations are
/// serialized on it.
#[derive(Debug, Clone, Default)]
pub struct World {
    objects: BTreeMap<String, ObjectNode>,
    users: BTreeMap<String, UserAccount>,
    sessions: BTreeMap<SessionId, Session>,
    audit: Vec<AuditRecord>,
    next_session: u32,
}

fn parent_folder(path: &str) -> Option<&str> {
    path.rsplit_once('/').map(|(parent, _)| parent)
}

impl World {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a world from fixture text; any rejected or denied line is an
    /// error.
    pub fn load(text: &str) -> Result<World, ScenarioError> {
        let mut world = World::new();
        let report = world.run_script(text)?;
        if let Some(step) = report
            .steps
            .iter()
            .find(|s| matches!(s.outcome, StepOutcome::Error(_)) || !s.met)
        {
            return Err(ScenarioError::Fixture {
                line: step.line,
                reason: match &step.outcome {
                    StepOutcome::Error(e) => e.clone(),
                    other => format!("unexpected outcome `{other}`"),
                },
            });
        }
        Ok(world)
    }

    pub fn objects(&self) -> &BTreeMap<String, ObjectNode> {
        &self.objects
    }

    pub fn users(&self) -> &BTreeMap<String, UserAccount> {
        &self.users
    }

    pub fn sessions(&self) -> &BTreeMap<SessionId, Session> {
        &self.sessions
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    fn push_audit(
        &mut self,
        session: Option<&str>,
        action: Action,
        decision: Decision,
        checks: Vec<NamedCheck>,
        effects: Vec<Effect>,
    ) {
        self.audit.push(AuditRecord {
            step: self.audit.len() + 1,
            session: session.map(str::to_string),
            action,
            decision,
            checks,
            effects,
        });
    }

    fn session(&self, sid: &str) -> Result<&Session, ScenarioError> {
        self.sessions
            .get(sid)
            .ok_or_else(|| ScenarioError::UnknownSession(sid.to_string()))
    }

    fn object(&self, path: &str) -> Result<&ObjectNode, ScenarioError> {
        self.objects
            .get(path)
            .ok_or_else(|| ScenarioError::UnknownPath(path.to_string()))
    }

    /// The folder a new object at `path` would live in.
    fn containing_folder(&self, path: &str) -> Result<&ObjectNode, ScenarioError> {
        let parent = parent_folder(path).ok_or_else(|| ScenarioError::MissingFolder(path.to_string()))?;
        let node = self
            .objects
            .get(parent)
            .ok_or_else(|| ScenarioError::MissingFolder(path.to_string()))?;
        if !node.is_folder {
            return Err(ScenarioError::MissingFolder(path.to_string()));
        }
        Ok(node)
    }

    // -- declarations -------------------------------------------------------

    pub fn add_folder(&mut self, path: &str, label: MacLabel) -> Result<(), ScenarioError> {
        if self.objects.contains_key(path) {
            return Err(ScenarioError::AlreadyExists(path.to_string()));
        }
        if label.has_ranged() {
            return Err(ScenarioError::RangedObjectLabel(path.to_string()));
        }
        let violations = validate(&label);
        if !violations.is_empty() {
            return Err(LabelError::Validation(violations).into());
        }
        self.objects.insert(
            path.to_string(),
            ObjectNode {
                path: path.to_string(),
                label: label.clone(),
                taint: BTreeSet::new(),
                is_folder: true,
            },
        );
        self.push_audit(
            None,
            Action::DeclareFolder { path: path.to_string(), label: label.clone() },
            Decision::allow(),
            Vec::new(),
            vec![Effect::FolderAdded { path: path.to_string(), label }],
        );
        Ok(())
    }

    pub fn add_user(&mut self, name: &str, label: MacLabel) -> Result<(), ScenarioError> {
        if self.users.contains_key(name) {
            return Err(ScenarioError::DuplicateUser(name.to_string()));
        }
        let violations = validate(&label);
        if !violations.is_empty() {
            return Err(LabelError::Validation(violations).into());
        }
        self.users.insert(
            name.to_string(),
            UserAccount { name: name.to_string(), login_label: label.clone() },
        );
        self.push_audit(
            None,
            Action::DeclareUser { name: name.to_string(), label },
            Decision::allow(),
            Vec::new(),
            vec![Effect::UserAdded { name: name.to_string() }],
        );
        Ok(())
    }

    // -- sessions -----------------------------------------------------------

    /// Starts a session with a generated id.
    pub fn session_start(&mut self, user: &str) -> Result<SessionId, ScenarioError> {
        loop {
            self.next_session += 1;
            let sid = format!("s{}", self.next_session);
            if !self.sessions.contains_key(&sid) {
                self.session_start_as(&sid, user)?;
                return Ok(sid);
            }
        }
    }

    /// Starts a session under a caller-chosen id; the session label is the
    /// user's login label with an empty taint.
    pub fn session_start_as(&mut self, sid: &str, user: &str) -> Result<(), ScenarioError> {
        if self.sessions.contains_key(sid) {
            return Err(ScenarioError::DuplicateSession(sid.to_string()));
        }
        let account = self
            .users
            .get(user)
            .ok_or_else(|| ScenarioError::UnknownUser(user.to_string()))?;
        let session = Session {
            user: user.to_string(),
            label: account.login_label.clone(),
            taint: BTreeSet::new(),
        };
        let label = session.label.clone();
        self.sessions.insert(sid.to_string(), session);
        self.push_audit(
            Some(sid),
            Action::SessionStart { sid: sid.to_string(), user: user.to_string() },
            Decision::allow(),
            Vec::new(),
            vec![Effect::SessionStarted { sid: sid.to_string(), user: user.to_string(), label }],
        );
        Ok(())
    }

    // -- relabels -----------------------------------------------------------

    /// Moves the session's effective label within its envelope.
    pub fn setpmac(&mut self, sid: &str, label: MacLabel) -> Result<Decision, ScenarioError> {
        let session = self.session(sid)?;
        let decision = decision::subject_relabel(&session.label, &label)?;
        let mut effects = Vec::new();
        if decision.allowed() {
            let old = session.label.clone();
            let new = decision::apply_subject_relabel(&old, &label);
            effects.push(Effect::SessionRelabeled {
                sid: sid.to_string(),
                old,
                new: new.clone(),
            });
            self.sessions.get_mut(sid).unwrap().label = new;
        }
        self.push_audit(Some(sid), Action::Setpmac { label }, decision.clone(), Vec::new(), effects);
        Ok(decision)
    }

    /// Relabels an object; both the old and the new label must lie within
    /// the session's envelope.
    pub fn setfmac(&mut self, sid: &str, path: &str, label: MacLabel) -> Result<Decision, ScenarioError> {
        let session = self.session(sid)?;
        let object = self.object(path)?;
        let decision = decision::object_relabel(&session.label, &object.label, &label)?;
        let mut effects = Vec::new();
        if decision.allowed() {
            let old = object.label.clone();
            effects.push(Effect::ObjectRelabeled {
                path: path.to_string(),
                old,
                new: label.clone(),
            });
            self.objects.get_mut(path).unwrap().label = label.clone();
        }
        self.push_audit(
            Some(sid),
            Action::Setfmac { path: path.to_string(), label },
            decision.clone(),
            Vec::new(),
            effects,
        );
        Ok(decision)
    }

    // -- object operations --------------------------------------------------

    /// Read: on allow, the session is tainted with the source path and the
    /// source's own taint.
    pub fn op_read(&mut self, sid: &str, path: &str) -> Result<Decision, ScenarioError> {
        let session = self.session(sid)?;
        let object = self.object(path)?;
        let decision = decision::decide(&session.label, &object.label, AccessOp::Read)?;
        let mut effects = Vec::new();
        if decision.allowed() {
            effects.push(Effect::ObjectRead { path: path.to_string(), label: object.label.clone() });
            let mut incoming = object.taint.clone();
            incoming.insert(path.to_string());
            self.sessions.get_mut(sid).unwrap().taint.extend(incoming);
        }
        self.push_audit(
            Some(sid),
            Action::Read { path: path.to_string() },
            decision.clone(),
            Vec::new(),
            effects,
        );
        Ok(decision)
    }

    /// Write: on allow, the session taint flows into the object.
    pub fn op_write(&mut self, sid: &str, path: &str) -> Result<Decision, ScenarioError> {
        let session = self.session(sid)?;
        let object = self.object(path)?;
        let decision = decision::decide(&session.label, &object.label, AccessOp::Write)?;
        let mut effects = Vec::new();
        if decision.allowed() {
            effects.push(Effect::ObjectWritten { path: path.to_string(), label: object.label.clone() });
            let taint = session.taint.clone();
            self.objects.get_mut(path).unwrap().taint.extend(taint);
        }
        self.push_audit(
            Some(sid),
            Action::Write { path: path.to_string() },
            decision.clone(),
            Vec::new(),
            effects,
        );
        Ok(decision)
    }

    /// Create: the new object is born with the session's effective label and
    /// needs write access to the containing folder.
    pub fn op_create(&mut self, sid: &str, path: &str) -> Result<Decision, ScenarioError> {
        let session = self.session(sid)?;
        if self.objects.contains_key(path) {
            return Err(ScenarioError::AlreadyExists(path.to_string()));
        }
        let folder = self.containing_folder(path)?;
        let birth = session.effective();
        let decision = decision::decide(&session.label, &folder.label, AccessOp::Write)?;
        let checks = vec![NamedCheck {
            what: format!("write folder {}", folder.path),
            decision: decision.clone(),
        }];
        let mut effects = Vec::new();
        if decision.allowed() {
            effects.push(Effect::ObjectCreated { path: path.to_string(), label: birth.clone() });
            self.objects.insert(
                path.to_string(),
                ObjectNode {
                    path: path.to_string(),
                    label: birth,
                    taint: BTreeSet::new(),
                    is_folder: false,
                },
            );
        }
        self.push_audit(
            Some(sid),
            Action::Create { path: path.to_string() },
            decision.clone(),
            checks,
            effects,
        );
        Ok(decision)
    }

    /// Copy: read the source, create the destination at the session's
    /// effective label, write it. All checks must pass before anything
    /// changes.
    pub fn op_copy(&mut self, sid: &str, src: &str, dst: &str) -> Result<Decision, ScenarioError> {
        let plan = self.plan_transfer(sid, src, dst, TransferKind::Copy)?;
        self.apply_transfer(sid, plan)
    }

    /// Move: like copy but the destination keeps the source's label and the
    /// source is deleted, which also needs write access to its folder.
    pub fn op_move(&mut self, sid: &str, src: &str, dst: &str) -> Result<Decision, ScenarioError> {
        let plan = self.plan_transfer(sid, src, dst, TransferKind::Move)?;
        self.apply_transfer(sid, plan)
    }

    fn plan_transfer(
        &self,
        sid: &str,
        src: &str,
        dst: &str,
        kind: TransferKind,
    ) -> Result<TransferPlan, ScenarioError> {
        let session = self.session(sid)?;
        let source = self.object(src)?;
        if source.is_folder {
            return Err(ScenarioError::IsAFolder(src.to_string()));
        }
        if self.objects.contains_key(dst) {
            return Err(ScenarioError::AlreadyExists(dst.to_string()));
        }
        let dst_folder = self.containing_folder(dst)?;
        let dst_label = match kind {
            TransferKind::Copy => session.effective(),
            TransferKind::Move => source.label.clone(),
        };

        let mut checks = vec![
            NamedCheck {
                what: format!("read {src}"),
                decision: decision::decide(&session.label, &source.label, AccessOp::Read)?,
            },
            NamedCheck {
                what: format!("write folder {}", dst_folder.path),
                decision: decision::decide(&session.label, &dst_folder.label, AccessOp::Write)?,
            },
            NamedCheck {
                what: format!("write {dst}"),
                decision: decision::decide(&session.label, &dst_label, AccessOp::Write)?,
            },
        ];
        if kind == TransferKind::Move {
            let src_folder = self.containing_folder(src)?;
            checks.push(NamedCheck {
                what: format!("write folder {}", src_folder.path),
                decision: decision::decide(&session.label, &src_folder.label, AccessOp::Write)?,
            });
        }
        Ok(TransferPlan {
            kind,
            src: src.to_string(),
            dst: dst.to_string(),
            src_label: source.label.clone(),
            dst_label,
            checks,
        })
    }

    fn apply_transfer(&mut self, sid: &str, plan: TransferPlan) -> Result<Decision, ScenarioError> {
        let decision = Decision::combine(plan.checks.iter().map(|c| c.decision.clone()));
        let mut effects = Vec::new();
        if decision.allowed() {
            effects.push(Effect::ObjectRead { path: plan.src.clone(), label: plan.src_label.clone() });
            effects.push(Effect::ObjectCreated { path: plan.dst.clone(), label: plan.dst_label.clone() });
            effects.push(Effect::ObjectWritten { path: plan.dst.clone(), label: plan.dst_label.clone() });

            let source_taint = self.objects[&plan.src].taint.clone();
            let session = self.sessions.get_mut(sid).unwrap();
            session.taint.extend(source_taint);
            session.taint.insert(plan.src.clone());
            let taint = session.taint.clone();
            self.objects.insert(
                plan.dst.clone(),
                ObjectNode {
                    path: plan.dst.clone(),
                    label: plan.dst_label.clone(),
                    taint,
                    is_folder: false,
                },
            );
            if plan.kind == TransferKind::Move {
                effects.push(Effect::ObjectDeleted { path: plan.src.clone() });
                self.objects.remove(&plan.src);
            }
        }
        let action = match plan.kind {
            TransferKind::Copy => Action::Copy { src: plan.src.clone(), dst: plan.dst.clone() },
            TransferKind::Move => Action::Move { src: plan.src.clone(), dst: plan.dst.clone() },
        };
        self.push_audit(Some(sid), action, decision.clone(), plan.checks, effects);
        Ok(decision)
    }

    // -- flow verification ---------------------------------------------------

    /// Replays the audit trail and reports every taint flow that reached an
    /// object without an intervening relabel and without both lattices
    /// agreeing to it. Independent of the decision rules: only dominance is
    /// consulted.
    pub fn flow_check(&self) -> Vec<FlowViolation> {
        let mut object_tags: BTreeMap<String, Vec<ReplayTag>> = BTreeMap::new();
        let mut session_tags: BTreeMap<String, Vec<ReplayTag>> = BTreeMap::new();
        let mut violations = Vec::new();

        for record in &self.audit {
            for effect in &record.effects {
                match effect {
                    Effect::SessionStarted { sid, .. } => {
                        session_tags.insert(sid.clone(), Vec::new());
                    }
                    Effect::ObjectCreated { path, .. } => {
                        object_tags.insert(path.clone(), Vec::new());
                    }
                    Effect::ObjectRead { path, label } => {
                        let sid = record.session.as_deref().unwrap_or_default();
                        let mut incoming = object_tags.get(path).cloned().unwrap_or_default();
                        incoming.push(ReplayTag {
                            origin: path.clone(),
                            origin_label: label.clone(),
                            laundered: false,
                        });
                        merge_tags(session_tags.entry(sid.to_string()).or_default(), incoming);
                    }
                    Effect::ObjectWritten { path, label } => {
                        let sid = record.session.as_deref().unwrap_or_default();
                        let incoming = session_tags.get(sid).cloned().unwrap_or_default();
                        for tag in &incoming {
                            if !tag.laundered {
                                check_flow(record.step, tag, path, label, &mut violations);
                            }
                        }
                        merge_tags(object_tags.entry(path.clone()).or_default(), incoming);
                    }
                    Effect::ObjectRelabeled { path, .. } => {
                        if let Some(tags) = object_tags.get_mut(path) {
                            for tag in tags {
                                tag.laundered = true;
                            }
                        }
                    }
                    Effect::ObjectDeleted { path } => {
                        object_tags.remove(path);
                    }
                    _ => {}
                }
            }
        }
        violations
    }

    // -- scripts -------------------------------------------------------------

    /// Parses the whole script, then executes it step by step, stopping at
    /// the first unmet expectation or execution error.
    pub fn run_script(&mut self, text: &str) -> Result<RunReport, ScenarioError> {
        let steps = parse_script(text)?;
        let mut reports = Vec::with_capacity(steps.len());
        let mut stopped = false;
        for step in steps {
            if stopped {
                reports.push(StepReport {
                    line: step.line,
                    text: step.text,
                    outcome: StepOutcome::Skipped,
                    expected: step.expect,
                    met: true,
                });
                continue;
            }
            let (outcome, met) = match self.execute(&step.command) {
                Ok(None) => (StepOutcome::Setup, true),
                Ok(Some(decision)) => {
                    let outcome = match decision.verdict {
                        Verdict::Allow => StepOutcome::Allowed,
                        Verdict::Deny => StepOutcome::Denied,
                    };
                    let met = step
                        .expect
                        .map_or(true, |expected| expected == decision.verdict);
                    (outcome, met)
                }
                Err(e) => (StepOutcome::Error(e.to_string()), false),
            };
            if !met || matches!(outcome, StepOutcome::Error(_)) {
                stopped = true;
            }
            reports.push(StepReport {
                line: step.line,
                text: step.text,
                outcome,
                expected: step.expect,
                met,
            });
        }
        let passed = reports
            .iter()
            .all(|s| s.met && !matches!(s.outcome, StepOutcome::Error(_)));
        Ok(RunReport { passed, steps: reports })
    }

    fn execute(&mut self, command: &Command) -> Result<Option<Decision>, ScenarioError> {
        match command {
            Command::Folder { path, label } => {
                self.add_folder(path, label.clone())?;
                Ok(None)
            }
            Command::User { name, label } => {
                self.add_user(name, label.clone())?;
                Ok(None)
            }
            Command::Session { sid, user } => {
                self.session_start_as(sid, user)?;
                Ok(None)
            }
            Command::Setpmac { sid, label } => Ok(Some(self.setpmac(sid, label.clone())?)),
            Command::Setfmac { sid, path, label } => {
                Ok(Some(self.setfmac(sid, path, label.clone())?))
            }
            Command::Read { sid, path } => Ok(Some(self.op_read(sid, path)?)),
            Command::Write { sid, path } => Ok(Some(self.op_write(sid, path)?)),
            Command::Create { sid, path } => Ok(Some(self.op_create(sid, path)?)),
            Command::Copy { sid, src, dst } => Ok(Some(self.op_copy(sid, src, dst)?)),
            Command::Move { sid, src, dst } => Ok(Some(self.op_move(sid, src, dst)?)),
        }
    }
}

/// Builds a world from fixture text.
pub fn load_scenario(text: &str) -> Result<World, ScenarioError> {
    World::load(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TransferKind {
    Copy,
    Move,
}

struct TransferPlan {
    kind: TransferKind,
    src: String,
    dst: String,
    src_label: MacLabel,
    dst_label: MacLabel,
    checks: Vec<NamedCheck>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ReplayTag {
    origin: String,
    origin_label: MacLabel,
    laundered: bool,
}

fn merge_tags(dest: &mut Vec<ReplayTag>, incoming: Vec<ReplayTag>) {
    for tag in incoming {
        if !dest.contains(&tag) {
            dest.push(tag);
        }
    }
}

/// Confidentiality must not flow down, integrity must not flow up.
fn check_flow(
    step: usize,
    tag: &ReplayTag,
    object: &str,
    object_label: &MacLabel,
    violations: &mut Vec<FlowViolation>,
) {
    for policy in PolicyName::ALL {
        let (Some(origin_q), Some(object_q)) =
            (tag.origin_label.get(policy), object_label.get(policy))
        else {
            continue;
        };
        let origin_element = origin_q.effective();
        let object_element = object_q.effective();
        let ok = match policy {
            PolicyName::Biba => dominates(origin_element, object_element),
            PolicyName::Mls => dominates(object_element, origin_element),
        };
        if !ok {
            violations.push(FlowViolation {
                audit_step: step,
                policy,
                origin: tag.origin.clone(),
                origin_label: tag.origin_label.clone(),
                object: object.to_string(),
                object_label: object_label.clone(),
            });
        }
    }
}

// ---------------------------------------------------------------------------
// Script format
// ---------------------------------------------------------------------------

/// Step outcome as reported by [`World::run_script`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    /// Declaration line (folder, user, session).
    Setup,
    Allowed,
    Denied,
    /// Execution error; the message explains.
    Error(String),
    /// Not executed because an earlier step failed.
    Skipped,
}

impl fmt::Display for StepOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepOutcome::Setup => f.write_str("setup"),
            StepOutcome::Allowed => f.write_str("allow"),
            StepOutcome::Denied => f.write_str("deny"),
            StepOutcome::Error(e) => write!(f, "error: {e}"),
            StepOutcome::Skipped => f.write_str("skipped"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepReport {
    pub line: usize,
    pub text: String,
    pub outcome: StepOutcome,
    #[serde(serialize_with = "serialize_expected")]
    pub expected: Option<Verdict>,
    pub met: bool,
}

fn serialize_expected<S: serde::Serializer>(
    value: &Option<Verdict>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    match value {
        Some(v) => serializer.serialize_some(v.as_str()),
        None => serializer.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub passed: bool,
    pub steps: Vec<StepReport>,
}

#[derive(Debug, Clone)]
enum Command {
    Folder { path: String, label: MacLabel },
    User { name: String, label: MacLabel },
    Session { sid: String, user: String },
    Setpmac { sid: String, label: MacLabel },
    Setfmac { sid: String, path: String, label: MacLabel },
    Read { sid: String, path: String },
    Write { sid: String, path: String },
    Create { sid: String, path: String },
    Copy { sid: String, src: String, dst: String },
    Move { sid: String, src: String, dst: String },
}

struct ScriptStep {
    line: usize,
    text: String,
    command: Command,
    expect: Option<Verdict>,
}

fn parse_script(text: &str) -> Result<Vec<ScriptStep>, ScenarioError> {
    let mut steps = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or_default().trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens: Vec<&str> = content.split_whitespace().collect();

        let expect = if tokens.len() >= 2 && tokens[tokens.len() - 2] == "expect" {
            let verdict = match tokens[tokens.len() - 1] {
                "allow" => Verdict::Allow,
                "deny" => Verdict::Deny,
                other => {
                    return Err(ScenarioError::Syntax {
                        line,
                        reason: format!("expected `allow` or `deny`, got `{other}`"),
                    })
                }
            };
            tokens.truncate(tokens.len() - 2);
            Some(verdict)
        } else {
            None
        };

        let syntax = |reason: &str| ScenarioError::Syntax { line, reason: reason.to_string() };
        let label = |text: &str| -> Result<MacLabel, ScenarioError> {
            parse_label(text).map_err(|source| ScenarioError::InvalidLabel { line, source })
        };

        let command = match tokens.as_slice() {
            ["folder", path, "label", l] => Command::Folder { path: path.to_string(), label: label(l)? },
            ["user", name, "label", l] => Command::User { name: name.to_string(), label: label(l)? },
            ["session", sid, "user", user] => {
                Command::Session { sid: sid.to_string(), user: user.to_string() }
            }
            ["setpmac", sid, l] => Command::Setpmac { sid: sid.to_string(), label: label(l)? },
            ["setfmac", sid, path, l] => {
                Command::Setfmac { sid: sid.to_string(), path: path.to_string(), label: label(l)? }
            }
            ["read", sid, path] => Command::Read { sid: sid.to_string(), path: path.to_string() },
            ["write", sid, path] => Command::Write { sid: sid.to_string(), path: path.to_string() },
            ["create", sid, path] => Command::Create { sid: sid.to_string(), path: path.to_string() },
            ["copy", sid, src, dst] => Command::Copy {
                sid: sid.to_string(),
                src: src.to_string(),
                dst: dst.to_string(),
            },
            ["move", sid, src, dst] => Command::Move {
                sid: sid.to_string(),
                src: src.to_string(),
                dst: dst.to_string(),
            },
            [keyword, ..] => return Err(syntax(&format!("unknown or malformed `{keyword}` line"))),
            [] => unreachable!("blank lines are skipped"),
        };

        if expect.is_some() && matches!(command, Command::Folder { .. } | Command::User { .. } | Command::Session { .. }) {
            return Err(syntax("declarations cannot carry an expectation"));
        }

        steps.push(ScriptStep { line, text: content.to_string(), command, expect });
    }
    Ok(steps)
}
