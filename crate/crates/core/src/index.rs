//! Static maps over a desugared, well-formed system: per-label kind, channel,
//! arguments, continuation, launched labels and interfaces.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::syntax::{desugar_bang, parse_system, Label, PrefixKind, Process, SyntaxError, Var};

/// Dense handle for a prefix label of one system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelId(pub u32);

/// Dense handle for a bound variable of one system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

impl LabelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WellFormedError {
    #[error("open system: variable `{0}` is free")]
    OpenSystem(Var),
    #[error("variable `{0}` is bound more than once")]
    DuplicateBinder(Var),
    #[error("duplicate label {0}")]
    DuplicateLabel(Label),
    #[error("bang `!{0}` must be desugared before indexing")]
    UndesugaredBang(Label),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{0}")]
    WellFormed(#[from] WellFormedError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinderKind {
    Restriction,
    /// Bound by the argument tuple of a receiver.
    Input(LabelId),
}

#[derive(Debug, Clone)]
pub struct PrefixInfo {
    pub label: Label,
    pub kind: PrefixKind,
    pub chan: VarId,
    pub args: Vec<VarId>,
    pub cont: Process,
    /// Labels of the threads spawned by the continuation.
    pub cont_beta: Vec<LabelId>,
    pub cont_fv: BTreeSet<VarId>,
    /// Free variables of the subprocess rooted at this prefix.
    pub interface: Vec<VarId>,
    /// Variables restricted in the continuation and used by a launched thread.
    pub fresh: Vec<VarId>,
}

#[derive(Debug, Clone)]
pub struct SystemIndex {
    root: Process,
    labels: Vec<Label>,
    label_lookup: HashMap<Label, LabelId>,
    vars: Vec<Var>,
    var_lookup: HashMap<Var, VarId>,
    binders: Vec<BinderKind>,
    prefixes: Vec<PrefixInfo>,
    root_beta: Vec<LabelId>,
    restriction_vars: Vec<VarId>,
    warnings: Vec<String>,
}

impl SystemIndex {
    /// Parses, desugars and indexes a system.
    pub fn from_source(text: &str) -> Result<SystemIndex, LoadError> {
        let parsed = parse_system(text)?;
        Ok(check_wellformed(&desugar_bang(&parsed))?)
    }

    pub fn root(&self) -> &Process {
        &self.root
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn label_ids(&self) -> impl Iterator<Item = LabelId> {
        (0..self.labels.len() as u32).map(LabelId)
    }

    pub fn label(&self, l: LabelId) -> &Label {
        &self.labels[l.index()]
    }

    pub fn var(&self, v: VarId) -> &Var {
        &self.vars[v.index()]
    }

    pub fn lookup_label(&self, l: &str) -> Option<LabelId> {
        self.label_lookup.get(&Label::new(l)).copied()
    }

    pub fn lookup_var(&self, v: &str) -> Option<VarId> {
        self.var_lookup.get(&Var::new(v)).copied()
    }

    pub fn prefix(&self, l: LabelId) -> &PrefixInfo {
        &self.prefixes[l.index()]
    }

    pub fn kind(&self, l: LabelId) -> PrefixKind {
        self.prefixes[l.index()].kind
    }

    pub fn chan(&self, l: LabelId) -> VarId {
        self.prefixes[l.index()].chan
    }

    pub fn interface(&self, l: LabelId) -> &[VarId] {
        &self.prefixes[l.index()].interface
    }

    /// Interface of a label given by name.
    pub fn interface_of(&self, l: &str) -> Result<Vec<Var>, UnknownLabel> {
        let id = self.lookup_label(l).ok_or_else(|| UnknownLabel(l.to_string()))?;
        Ok(self.interface(id).iter().map(|&v| self.var(v).clone()).collect())
    }

    pub fn root_beta(&self) -> &[LabelId] {
        &self.root_beta
    }

    pub fn binder(&self, v: VarId) -> &BinderKind {
        &self.binders[v.index()]
    }

    /// The variables bound by a restriction: the only possible name labels.
    pub fn restriction_vars(&self) -> &[VarId] {
        &self.restriction_vars
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Receiver/output pairs with matching arity, in label order.
    pub fn step_pairs(&self) -> Vec<(LabelId, LabelId)> {
        let mut out = Vec::new();
        for r in self.label_ids().filter(|&l| self.kind(l).is_receiver()) {
            for s in self.label_ids().filter(|&l| self.kind(l) == PrefixKind::Output) {
                if self.prefix(r).args.len() == self.prefix(s).args.len() {
                    out.push((r, s));
                }
            }
        }
        out
    }

    pub fn var_names(&self, vs: &[VarId]) -> Vec<String> {
        vs.iter().map(|&v| self.var(v).to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label {0}")]
pub struct UnknownLabel(pub String);

struct Builder {
    labels: Vec<Label>,
    label_lookup: HashMap<Label, LabelId>,
    vars: Vec<Var>,
    var_lookup: HashMap<Var, VarId>,
    binders: Vec<BinderKind>,
    prefixes: Vec<Option<PrefixInfo>>,
}

impl Builder {
    fn bind(&mut self, x: &Var, kind: BinderKind) -> Result<VarId, WellFormedError> {
        if self.var_lookup.contains_key(x) {
            return Err(WellFormedError::DuplicateBinder(x.clone()));
        }
        let id = VarId(self.vars.len() as u32);
        self.vars.push(x.clone());
        self.var_lookup.insert(x.clone(), id);
        self.binders.push(kind);
        Ok(id)
    }

    fn lookup(&self, x: &Var) -> Result<VarId, WellFormedError> {
        self.var_lookup.get(x).copied().ok_or_else(|| WellFormedError::OpenSystem(x.clone()))
    }

    /// First pass: allocate label and variable ids in preorder.
    fn declare(&mut self, p: &Process) -> Result<(), WellFormedError> {
        match p {
            Process::Nil => Ok(()),
            Process::Par(a, b) => {
                self.declare(a)?;
                self.declare(b)
            }
            Process::New(x, body) => {
                self.bind(x, BinderKind::Restriction)?;
                self.declare(body)
            }
            Process::Prefix(pre) => {
                if self.label_lookup.contains_key(&pre.label) {
                    return Err(WellFormedError::DuplicateLabel(pre.label.clone()));
                }
                let id = LabelId(self.labels.len() as u32);
                self.labels.push(pre.label.clone());
                self.label_lookup.insert(pre.label.clone(), id);
                self.prefixes.push(None);
                if pre.kind.is_receiver() {
                    for a in &pre.args {
                        self.bind(a, BinderKind::Input(id))?;
                    }
                }
                self.declare(&pre.cont)
            }
            Process::Bang(l, _) => Err(WellFormedError::UndesugaredBang(l.clone())),
        }
    }

    fn ids(&self, vs: &BTreeSet<Var>) -> Result<BTreeSet<VarId>, WellFormedError> {
        vs.iter().map(|v| self.lookup(v)).collect()
    }

    fn beta_ids(&self, p: &Process) -> Vec<LabelId> {
        let mut out: Vec<LabelId> = p.beta().iter().map(|l| self.label_lookup[l]).collect();
        out.sort();
        out
    }

    /// Second pass: fill per-prefix static maps.
    fn index(&mut self, p: &Process) -> Result<(), WellFormedError> {
        match p {
            Process::Nil | Process::Bang(..) => Ok(()),
            Process::Par(a, b) => {
                self.index(a)?;
                self.index(b)
            }
            Process::New(_, body) => self.index(body),
            Process::Prefix(pre) => {
                let id = self.label_lookup[&pre.label];
                let interface: Vec<VarId> = self.ids(&p.free_vars())?.into_iter().collect();
                let cont_fv = self.ids(&pre.cont.free_vars())?;
                let cont_beta = self.beta_ids(&pre.cont);
                let info = PrefixInfo {
                    label: pre.label.clone(),
                    kind: pre.kind,
                    chan: self.lookup(&pre.chan)?,
                    args: pre.args.iter().map(|a| self.lookup(a)).collect::<Result<_, _>>()?,
                    cont: (*pre.cont).clone(),
                    cont_beta,
                    cont_fv,
                    interface,
                    fresh: Vec::new(),
                };
                self.prefixes[id.index()] = Some(info);
                self.index(&pre.cont)
            }
        }
    }
}

/// Verifies closedness, unique labels and unique binders and builds the
/// static maps of a bang-free system.
pub fn check_wellformed(p: &Process) -> Result<SystemIndex, WellFormedError> {
    let mut b = Builder {
        labels: Vec::new(),
        label_lookup: HashMap::new(),
        vars: Vec::new(),
        var_lookup: HashMap::new(),
        binders: Vec::new(),
        prefixes: Vec::new(),
    };
    b.declare(p)?;
    if let Some(x) = p.free_vars().into_iter().next() {
        return Err(WellFormedError::OpenSystem(x));
    }
    b.index(p)?;
    let root_beta = b.beta_ids(p);
    let mut prefixes: Vec<PrefixInfo> = b.prefixes.into_iter().map(|i| i.expect("indexed")).collect();
    for l in 0..prefixes.len() {
        let mut launched: BTreeSet<VarId> = BTreeSet::new();
        for &m in &prefixes[l].cont_beta {
            launched.extend(prefixes[m.index()].interface.iter().copied());
        }
        prefixes[l].fresh = launched.difference(&prefixes[l].cont_fv).copied().collect();
    }
    let restriction_vars = (0..b.vars.len() as u32)
        .map(VarId)
        .filter(|v| b.binders[v.index()] == BinderKind::Restriction)
        .collect();

    let mut warnings = Vec::new();
    for (i, info) in prefixes.iter().enumerate() {
        let partner = prefixes
            .iter()
            .any(|o| o.kind.is_receiver() != info.kind.is_receiver() && o.args.len() == info.args.len());
        if !partner {
            warnings.push(format!(
                "{} at label {} has arity {} and no possible partner of that arity",
                info.kind,
                b.labels[i],
                info.args.len()
            ));
        }
    }

    Ok(SystemIndex {
        root: p.clone(),
        labels: b.labels,
        label_lookup: b.label_lookup,
        vars: b.vars,
        var_lookup: b.var_lookup,
        binders: b.binders,
        prefixes,
        root_beta,
        restriction_vars,
        warnings,
    })
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}
