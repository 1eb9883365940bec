//! Offloading constraint analysis over a code-facts document.
//!
//! A method can be migrated as-is when its owner, parameter and return types
//! are serializable. It can be migrated with minor changes when every one of
//! those types is serializable or convertible, where an application type is
//! convertible if all of its supertypes and field types are serializable or
//! themselves convertible. Library types are never convertible. Separately,
//! methods reaching constrained platform subsystems (device hardware, local
//! file state) are flagged, directly or through their callees.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PRIMITIVES: &[&str] = &["boolean", "byte", "char", "short", "int", "long", "float", "double", "void"];

pub const DEFAULT_HARDWARE_CATALOG: &[&str] = &[
    "ui.notification",
    "ui.display",
    "hw.vibrate",
    "hw.bluetooth",
    "hw.wifi",
    "hw.usb",
    "ui.toast",
    "ui.dialog",
    "ui.input_method",
    "hw.camera",
    "hw.location",
    "hw.sensor",
    "hw.nfc",
    "hw.telephony",
    "hw.sms",
    "hw.audio",
    "hw.power",
    "hw.battery",
    "hw.clipboard",
    "hw.alarm",
];

pub const DEFAULT_FILESYSTEM_TAGS: &[&str] = &["fs.shared_preferences", "fs.file"];

pub const DEFAULT_ALWAYS_SERIALIZABLE: &[&str] = &[
    "java.lang.String",
    "java.lang.Boolean",
    "java.lang.Byte",
    "java.lang.Character",
    "java.lang.Short",
    "java.lang.Integer",
    "java.lang.Long",
    "java.lang.Float",
    "java.lang.Double",
    "java.lang.Number",
    "java.math.BigInteger",
    "java.math.BigDecimal",
    "java.util.Date",
    "java.util.ArrayList",
    "java.util.LinkedList",
    "java.util.HashMap",
    "java.util.HashSet",
    "java.util.TreeMap",
];

#[derive(Debug, Error)]
pub enum FactsError {
    #[error("malformed facts document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("duplicate type name `{0}`")]
    DuplicateType(String),
    #[error("empty type name")]
    EmptyName,
}

/// Platform-specific knobs of the analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintConfig {
    pub always_serializable: BTreeSet<String>,
    pub hardware_catalog: BTreeSet<String>,
    pub filesystem_tags: BTreeSet<String>,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        let set = |items: &[&str]| items.iter().map(|s| s.to_string()).collect();
        ConstraintConfig {
            always_serializable: set(DEFAULT_ALWAYS_SERIALIZABLE),
            hardware_catalog: set(DEFAULT_HARDWARE_CATALOG),
            filesystem_tags: set(DEFAULT_FILESYSTEM_TAGS),
        }
    }
}

impl ConstraintConfig {
    fn is_builtin(&self, name: &str) -> bool {
        PRIMITIVES.contains(&name) || self.always_serializable.contains(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeKind {
    #[serde(rename = "class", alias = "class-like")]
    Class,
    #[serde(rename = "interface", alias = "interface-like")]
    Interface,
}

// -- document schema --

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FactsDocument {
    #[serde(default)]
    types: Vec<TypeDoc>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TypeDoc {
    name: String,
    kind: TypeKind,
    #[serde(default)]
    is_library: bool,
    #[serde(default)]
    declares_serializable: bool,
    #[serde(default)]
    supertypes: Vec<String>,
    #[serde(default)]
    fields: Vec<FieldDoc>,
    #[serde(default)]
    methods: Vec<MethodDoc>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FieldDoc {
    name: String,
    #[serde(rename = "type")]
    type_name: String,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct MethodDoc {
    name: String,
    #[serde(default)]
    params: Vec<String>,
    #[serde(rename = "return", default = "void")]
    return_type: String,
    #[serde(default)]
    calls: Vec<CallDoc>,
    #[serde(default)]
    api_accesses: Vec<ApiAccess>,
}

fn void() -> String {
    "void".to_string()
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct CallDoc {
    owner: String,
    method: String,
}

// -- database --

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ApiAccess {
    pub subsystem: String,
    #[serde(default)]
    pub site: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeFact {
    pub name: String,
    pub kind: TypeKind,
    pub is_library: bool,
    pub declares_serializable: bool,
    pub supertypes: Vec<String>,
    /// `(field name, field type)`.
    pub fields: Vec<(String, String)>,
    /// Referenced but never declared; registered as an opaque library type.
    pub external_unknown: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodFact {
    pub owner: String,
    pub name: String,
    pub params: Vec<String>,
    pub return_type: String,
    pub calls: Vec<(String, String)>,
    pub api_accesses: Vec<ApiAccess>,
}

impl MethodFact {
    pub fn qualified_name(&self) -> String {
        format!("{}.{}", self.owner, self.name)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CodeFactsDb {
    pub types: BTreeMap<String, TypeFact>,
    pub methods: Vec<MethodFact>,
    /// Resolved call edges, by method index.
    pub callees: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

/// Named types a type expression depends on. Generic arguments are erased
/// into extra dependencies, array suffixes and wildcards are stripped.
pub fn type_components(expr: &str) -> Vec<String> {
    let mut out = Vec::new();
    for token in expr.split(['<', '>', ',']) {
        let mut t = token.trim();
        if let Some(rest) = t.strip_prefix('?') {
            t = rest.trim();
            t = t.strip_prefix("extends").or_else(|| t.strip_prefix("super")).unwrap_or(t).trim();
        }
        let t = t.trim_end_matches("[]").trim_end_matches("...").trim();
        let t = t.trim_end_matches("[]").trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    }
    out
}

impl CodeFactsDb {
    pub fn type_fact(&self, name: &str) -> Option<&TypeFact> {
        self.types.get(name)
    }

    pub fn method_index(&self, owner: &str, name: &str) -> Vec<usize> {
        self.methods.iter().enumerate().filter(|(_, m)| m.owner == owner && m.name == name).map(|(i, _)| i).collect()
    }

    /// Serializable as-is: primitive, configured built-in, or declared.
    pub fn is_serializable(&self, name: &str, config: &ConstraintConfig) -> bool {
        config.is_builtin(name) || self.types.get(name).is_some_and(|t| t.declares_serializable)
    }

    fn expr_serializable(&self, expr: &str, config: &ConstraintConfig) -> Vec<String> {
        type_components(expr).into_iter().filter(|c| !self.is_serializable(c, config)).collect()
    }

    /// Supertype and field-type dependencies of a declared type.
    pub fn member_dependencies(&self, name: &str) -> Vec<String> {
        let Some(t) = self.types.get(name) else { return Vec::new() };
        let mut deps: Vec<String> =
            t.supertypes.iter().chain(t.fields.iter().map(|(_, ty)| ty)).flat_map(|e| type_components(e)).collect();
        deps.sort();
        deps.dedup();
        deps
    }
}

/// Parses and resolves a facts document (JSON). Whitespace-only input is an
/// empty database.
pub fn load_facts(input: &str, config: &ConstraintConfig) -> Result<CodeFactsDb, FactsError> {
    let doc: FactsDocument =
        if input.trim().is_empty() { FactsDocument::default() } else { serde_json::from_str(input)? };

    let mut db = CodeFactsDb::default();
    let mut method_docs = Vec::new();
    for t in doc.types {
        if t.name.trim().is_empty() {
            return Err(FactsError::EmptyName);
        }
        if db.types.contains_key(&t.name) {
            return Err(FactsError::DuplicateType(t.name));
        }
        for m in t.methods {
            method_docs.push((t.name.clone(), m));
        }
        db.types.insert(
            t.name.clone(),
            TypeFact {
                name: t.name,
                kind: t.kind,
                is_library: t.is_library,
                declares_serializable: t.declares_serializable,
                supertypes: t.supertypes,
                fields: t.fields.into_iter().map(|f| (f.name, f.type_name)).collect(),
                external_unknown: false,
            },
        );
    }
    for (owner, m) in method_docs {
        db.methods.push(MethodFact {
            owner,
            name: m.name,
            params: m.params,
            return_type: m.return_type,
            calls: m.calls.into_iter().map(|c| (c.owner, c.method)).collect(),
            api_accesses: m.api_accesses,
        });
    }

    // every referenced name must resolve; unknown ones become opaque library types
    let mut referenced: BTreeSet<String> = BTreeSet::new();
    for t in db.types.values() {
        referenced
            .extend(t.supertypes.iter().chain(t.fields.iter().map(|(_, ty)| ty)).flat_map(|e| type_components(e)));
    }
    for m in &db.methods {
        referenced.extend(m.params.iter().chain([&m.return_type]).flat_map(|e| type_components(e)));
        referenced.extend(m.calls.iter().map(|(owner, _)| owner.clone()));
    }
    for name in referenced {
        if config.is_builtin(&name) || db.types.contains_key(&name) {
            continue;
        }
        db.warnings
            .push(format!("type `{name}` is referenced but not declared; treating it as an external library type"));
        db.types.insert(
            name.clone(),
            TypeFact {
                name,
                kind: TypeKind::Class,
                is_library: true,
                declares_serializable: false,
                supertypes: Vec::new(),
                fields: Vec::new(),
                external_unknown: true,
            },
        );
    }

    let mut by_name: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
    for (i, m) in db.methods.iter().enumerate() {
        by_name.entry((m.owner.as_str(), m.name.as_str())).or_default().push(i);
    }
    let mut warnings = Vec::new();
    let callees = db
        .methods
        .iter()
        .map(|m| {
            let mut out: Vec<usize> = Vec::new();
            for (owner, name) in &m.calls {
                match by_name.get(&(owner.as_str(), name.as_str())) {
                    Some(targets) => out.extend(targets),
                    None => warnings.push(format!(
                        "{}: call to `{owner}.{name}` is outside the facts database; ignored",
                        m.qualified_name()
                    )),
                }
            }
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect();
    db.callees = callees;
    db.warnings.extend(warnings);
    Ok(db)
}

// -- verdicts --

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockerKind {
    NotSerializable,
    NotConvertible,
    Hardware,
    Filesystem,
}

impl fmt::Display for BlockerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockerKind::NotSerializable => "not-serializable",
            BlockerKind::NotConvertible => "not-convertible",
            BlockerKind::Hardware => "hardware",
            BlockerKind::Filesystem => "filesystem",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Blocker {
    pub kind: BlockerKind,
    /// Offending type name or subsystem tag.
    pub subject: String,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub ok: bool,
    pub blockers: Vec<Blocker>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reach {
    None,
    Direct,
    Transitive,
}

impl Reach {
    pub fn is_constrained(self) -> bool {
        self != Reach::None
    }
}

impl fmt::Display for Reach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reach::None => "none",
            Reach::Direct => "direct",
            Reach::Transitive => "transitive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachVerdict {
    pub reach: Reach,
    pub blockers: Vec<Blocker>,
}

/// `(role, type expression)` of everything that crosses the wire on migration.
fn signature_types(m: &MethodFact) -> Vec<(String, &str)> {
    let mut out = vec![("owner".to_string(), m.owner.as_str())];
    out.extend(m.params.iter().enumerate().map(|(i, p)| (format!("parameter {}", i + 1), p.as_str())));
    out.push(("return type".to_string(), m.return_type.as_str()));
    out
}

/// Owner, parameters and return type are all serializable as-is.
pub fn directly_migratable(db: &CodeFactsDb, method: usize, config: &ConstraintConfig) -> Verdict {
    let m = &db.methods[method];
    let mut blockers = Vec::new();
    for (role, expr) in signature_types(m) {
        for bad in db.expr_serializable(expr, config) {
            blockers.push(Blocker {
                kind: BlockerKind::NotSerializable,
                explanation: format!("{role} type `{bad}` is not serializable"),
                subject: bad,
            });
        }
    }
    Verdict { ok: blockers.is_empty(), blockers }
}

fn blocked_by(db: &CodeFactsDb, name: &str, set: &BTreeSet<String>, config: &ConstraintConfig) -> Option<String> {
    db.member_dependencies(name).into_iter().find(|d| !db.is_serializable(d, config) && !set.contains(d))
}

fn removable(db: &CodeFactsDb, name: &str, config: &ConstraintConfig) -> bool {
    db.types.get(name).is_some_and(|t| !t.is_library) && !db.is_serializable(name, config)
}

fn initial_convertible(db: &CodeFactsDb, config: &ConstraintConfig) -> BTreeSet<String> {
    db.types.values().filter(|t| !t.is_library || db.is_serializable(&t.name, config)).map(|t| t.name.clone()).collect()
}

/// Types that are serializable or can be made serializable by editing
/// application code only: the greatest set `S` such that no
/// non-serializable application type in `S` depends on a type that is
/// neither serializable nor in `S`.
pub fn convertible_set(db: &CodeFactsDb, config: &ConstraintConfig) -> BTreeSet<String> {
    let mut set = initial_convertible(db, config);
    let mut dependents: HashMap<String, Vec<String>> = HashMap::new();
    for name in db.types.keys() {
        for dep in db.member_dependencies(name) {
            dependents.entry(dep).or_default().push(name.clone());
        }
    }
    let mut work: Vec<String> = set.iter().filter(|n| removable(db, n, config)).cloned().collect();
    while let Some(name) = work.pop() {
        if !set.contains(&name) || blocked_by(db, &name, &set, config).is_none() {
            continue;
        }
        set.remove(&name);
        if let Some(users) = dependents.get(&name) {
            work.extend(users.iter().filter(|u| set.contains(*u) && removable(db, u, config)).cloned());
        }
    }
    set
}

/// Removes types one at a time in the given order, sweeping until stable.
/// Yields the same set as [`convertible_set`] for any order.
pub fn convertible_set_in_order(db: &CodeFactsDb, config: &ConstraintConfig, order: &[String]) -> BTreeSet<String> {
    let mut set = initial_convertible(db, config);
    loop {
        let mut changed = false;
        for name in order {
            if set.contains(name) && removable(db, name, config) && blocked_by(db, name, &set, config).is_some() {
                set.remove(name);
                changed = true;
            }
        }
        if !changed {
            return set;
        }
    }
}

/// Types one simultaneous removal pass would drop from `set`.
pub fn removal_pass(db: &CodeFactsDb, config: &ConstraintConfig, set: &BTreeSet<String>) -> BTreeSet<String> {
    set.iter().filter(|n| removable(db, n, config) && blocked_by(db, n, set, config).is_some()).cloned().collect()
}

/// Owner, parameters and return type are serializable or convertible.
pub fn migratable_with_minor_changes(
    db: &CodeFactsDb,
    convertible: &BTreeSet<String>,
    method: usize,
    config: &ConstraintConfig,
) -> Verdict {
    let m = &db.methods[method];
    let mut blockers = Vec::new();
    for (role, expr) in signature_types(m) {
        for bad in db.expr_serializable(expr, config).into_iter().filter(|c| !convertible.contains(c)) {
            let why = match db.types.get(&bad) {
                Some(t) if t.is_library => "is a library type that is not serializable",
                Some(_) => "cannot be made serializable",
                None => "is not serializable",
            };
            blockers.push(Blocker {
                kind: BlockerKind::NotConvertible,
                explanation: format!("{role} type `{bad}` {why}"),
                subject: bad,
            });
        }
    }
    Verdict { ok: blockers.is_empty(), blockers }
}

fn api_reach(db: &CodeFactsDb, method: usize, tags: &BTreeSet<String>, kind: BlockerKind) -> ReachVerdict {
    let direct_hits = |i: usize| db.methods[i].api_accesses.iter().filter(|a| tags.contains(&a.subsystem));
    let mut blockers: Vec<Blocker> = direct_hits(method)
        .map(|a| Blocker {
            kind,
            subject: a.subsystem.clone(),
            explanation: format!("accesses `{}` at {}", a.subsystem, if a.site.is_empty() { "?" } else { &a.site }),
        })
        .collect();
    let direct = !blockers.is_empty();

    let mut visited = vec![false; db.methods.len()];
    visited[method] = true;
    let mut stack: Vec<usize> = db.callees[method].clone();
    stack.reverse();
    let mut transitive = false;
    while let Some(i) = stack.pop() {
        if std::mem::replace(&mut visited[i], true) {
            continue;
        }
        for a in direct_hits(i) {
            transitive = true;
            blockers.push(Blocker {
                kind,
                subject: a.subsystem.clone(),
                explanation: format!("reaches `{}` which accesses `{}`", db.methods[i].qualified_name(), a.subsystem),
            });
        }
        stack.extend(db.callees[i].iter().rev().filter(|&&c| !visited[c]));
    }
    let reach = if direct {
        Reach::Direct
    } else if transitive {
        Reach::Transitive
    } else {
        Reach::None
    };
    ReachVerdict { reach, blockers }
}

/// Access to device-bound subsystems listed in `catalog`, by the method itself
/// or anything it can call.
pub fn hardware_constraints(db: &CodeFactsDb, method: usize, catalog: &BTreeSet<String>) -> ReachVerdict {
    api_reach(db, method, catalog, BlockerKind::Hardware)
}

/// Access to non-synchronized local state (preferences, files): potential
/// unexpected behavior when executed remotely.
pub fn filesystem_constraints(db: &CodeFactsDb, method: usize, fs_tags: &BTreeSet<String>) -> ReachVerdict {
    api_reach(db, method, fs_tags, BlockerKind::Filesystem)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintFinding {
    pub owner: String,
    pub method: String,
    pub directly_migratable: bool,
    pub convertible: bool,
    pub hardware: Reach,
    pub filesystem: Reach,
    pub blockers: Vec<Blocker>,
}

/// Runs all four analyses on every method, in document order.
pub fn analyze_all(db: &CodeFactsDb, config: &ConstraintConfig) -> Vec<ConstraintFinding> {
    let convertible = convertible_set(db, config);
    (0..db.methods.len())
        .map(|i| {
            let m = &db.methods[i];
            let direct = directly_migratable(db, i, config);
            let minor = migratable_with_minor_changes(db, &convertible, i, config);
            let hw = hardware_constraints(db, i, &config.hardware_catalog);
            let fs = filesystem_constraints(db, i, &config.filesystem_tags);
            let mut blockers = direct.blockers;
            blockers.extend(minor.blockers);
            blockers.extend(hw.blockers);
            blockers.extend(fs.blockers);
            ConstraintFinding {
                owner: m.owner.clone(),
                method: m.name.clone(),
                directly_migratable: direct.ok,
                convertible: minor.ok,
                hardware: hw.reach,
                filesystem: fs.reach,
                blockers,
            }
        })
        .collect()
}

pub const FINDINGS_HEADER: &str =
    "# owner,method,directly_migratable,convertible_minor,hardware,filesystem,blocker_count";

pub fn render_findings(findings: &[ConstraintFinding]) -> String {
    let mut out = format!("{FINDINGS_HEADER}\n");
    for f in findings {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            f.owner,
            f.method,
            f.directly_migratable,
            f.convertible,
            f.hardware,
            f.filesystem,
            f.blockers.len()
        );
    }
    out
}

/// Share of methods in each constraint category, as percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintStats {
    pub total: usize,
    pub directly_migratable_pct: f64,
    pub minor_changes_pct: f64,
    pub hardware_pct: f64,
    pub filesystem_pct: f64,
    pub empty: bool,
}

pub fn summarize_stats(findings: &[ConstraintFinding]) -> ConstraintStats {
    let total = findings.len();
    let pct = |pred: &dyn Fn(&ConstraintFinding) -> bool| {
        if total == 0 {
            0.0
        } else {
            100.0 * findings.iter().filter(|f| pred(f)).count() as f64 / total as f64
        }
    };
    ConstraintStats {
        total,
        directly_migratable_pct: pct(&|f| f.directly_migratable),
        minor_changes_pct: pct(&|f| f.convertible),
        hardware_pct: pct(&|f| f.hardware.is_constrained()),
        filesystem_pct: pct(&|f| f.filesystem.is_constrained()),
        empty: total == 0,
    }
}

pub const STATS_ROWS: [&str; 5] = [
    "Number of methods",
    "Directly migratable",
    "Migratable with minor changes",
    "Hardware access constraints",
    "Potential unexpected behavior because of access to file system",
];

impl ConstraintStats {
    /// Table rows: label and rendered value (percentages with one decimal).
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            (STATS_ROWS[0], self.total.to_string()),
            (STATS_ROWS[1], format!("{:.1}%", self.directly_migratable_pct)),
            (STATS_ROWS[2], format!("{:.1}%", self.minor_changes_pct)),
            (STATS_ROWS[3], format!("{:.1}%", self.hardware_pct)),
            (STATS_ROWS[4], format!("{:.1}%", self.filesystem_pct)),
        ]
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("# hardware and file system rows count direct and transitive access\n");
        out.push_str("# member classes are declared field types\n");
        let _ = writeln!(out, "# empty={}", self.empty);
        out.push_str("statistic,value\n");
        for (label, value) in self.rows() {
            let _ = writeln!(out, "{label},{value}");
        }
        out
    }
}
