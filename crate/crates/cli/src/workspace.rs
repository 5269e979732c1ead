//! Workspace files: one JSON document naming everything a command needs —
//! a vocabulary, structures, assignments, the quantifier set, and caps.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use efq_core::quantifiers::{QuantifierFile, QuantifierSet, QuantifierSpec};
use efq_core::structures::{Assignment, Context, Structure, StructureEntry, StructureFile, Vocabulary};
use efq_core::Caps;
use serde::{Deserialize, Serialize};

/// The serde form of a workspace; `--json` output embeds it verbatim so a
/// dumped workspace can be fed back in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkspaceFile {
    pub vocabulary: BTreeMap<String, usize>,
    pub structures: BTreeMap<String, StructureEntry>,
    #[serde(default)]
    pub assignments: BTreeMap<String, BTreeMap<String, usize>>,
    pub quantifiers: Vec<QuantifierSpec>,
    #[serde(default)]
    pub caps: Caps,
}

/// A loaded workspace with every reference resolved.
pub struct Workspace {
    pub file: WorkspaceFile,
    pub vocabulary: Vocabulary,
    pub structures: BTreeMap<String, Structure>,
    pub assignments: BTreeMap<String, Assignment>,
    pub qset: QuantifierSet,
    pub caps: Caps,
}

impl Workspace {
    pub fn load(path: &Path) -> Result<Workspace> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read workspace file `{}`", path.display()))?;
        let file: WorkspaceFile = serde_json::from_str(&text)
            .with_context(|| format!("workspace file `{}` is not valid", path.display()))?;
        Workspace::build(file)
    }

    pub fn build(file: WorkspaceFile) -> Result<Workspace> {
        check_caps(&file.caps)?;
        let sf = StructureFile {
            vocabulary: file.vocabulary.clone(),
            structures: file.structures.clone(),
        };
        let (vocabulary, structures) = sf.build().context("invalid structure section")?;
        let qf = QuantifierFile {
            quantifiers: file.quantifiers.clone(),
        };
        let qset = qf.build().context("invalid quantifier section")?;
        let assignments = file
            .assignments
            .iter()
            .map(|(name, bindings)| {
                (
                    name.clone(),
                    Assignment::new(bindings.iter().map(|(v, &e)| (v.clone(), e))),
                )
            })
            .collect();
        let caps = file.caps.clone();
        Ok(Workspace {
            file,
            vocabulary,
            structures,
            assignments,
            qset,
            caps,
        })
    }

    pub fn structure(&self, name: &str) -> Result<&Structure> {
        self.structures.get(name).with_context(|| {
            format!(
                "unknown structure `{name}`; the workspace defines: {}",
                keys(&self.structures)
            )
        })
    }

    pub fn assignment(&self, name: &str) -> Result<&Assignment> {
        self.assignments.get(name).with_context(|| {
            format!(
                "unknown assignment `{name}`; the workspace defines: {}",
                keys(&self.assignments)
            )
        })
    }

    /// A context from a structure name and an optional assignment name.
    pub fn context(&self, structure: &str, assignment: Option<&str>) -> Result<Context> {
        let s = self.structure(structure)?.clone();
        let a = match assignment {
            Some(name) => self.assignment(name)?.clone(),
            None => Assignment::empty(),
        };
        Context::new(s, a).with_context(|| format!("structure `{structure}` with {}", label(assignment)))
    }

    /// A context from a `NAME` or `NAME:ASSIGNMENT` spec.
    pub fn context_spec(&self, spec: &str) -> Result<Context> {
        match spec.split_once(':') {
            Some((s, a)) => self.context(s.trim(), Some(a.trim())),
            None => self.context(spec.trim(), None),
        }
    }

    /// A class of contexts from a comma-separated list of specs.
    pub fn class(&self, list: &str) -> Result<Vec<Context>> {
        let mut out = Vec::new();
        for spec in list.split(',') {
            let spec = spec.trim();
            if spec.is_empty() {
                bail!("empty entry in class list `{list}`");
            }
            out.push(self.context_spec(spec)?);
        }
        Ok(out)
    }
}

fn label(assignment: Option<&str>) -> String {
    match assignment {
        Some(a) => format!("assignment `{a}`"),
        None => "the empty assignment".to_string(),
    }
}

fn keys<V>(map: &BTreeMap<String, V>) -> String {
    if map.is_empty() {
        return "(none)".to_string();
    }
    map.keys().cloned().collect::<Vec<_>>().join(", ")
}

fn check_caps(caps: &Caps) -> Result<()> {
    let fields = [
        ("max_domain", caps.max_domain),
        ("max_class_contexts", caps.max_class_contexts),
        ("max_budget", caps.max_budget),
        ("max_rounds", caps.max_rounds),
        ("max_type_cells", caps.max_type_cells),
        ("fresh_vars", caps.fresh_vars),
        ("max_tuple_universe", caps.max_tuple_universe),
        ("max_family", caps.max_family),
        ("max_synth_entries", caps.max_synth_entries),
    ];
    for (name, value) in fields {
        if value == 0 {
            bail!("cap `{name}` must be positive");
        }
    }
    Ok(())
}

/// Parse an inline assignment like `x=0,y=2`.
pub fn parse_inline_assignment(text: &str) -> Result<BTreeMap<String, usize>> {
    let mut out = BTreeMap::new();
    for pair in text.split(',') {
        let pair = pair.trim();
        if pair.is_empty() {
            continue;
        }
        let Some((var, val)) = pair.split_once('=') else {
            bail!("binding `{pair}` is not of the form `var=element`");
        };
        let element: usize = val
            .trim()
            .parse()
            .with_context(|| format!("`{}` is not a domain element index", val.trim()))?;
        out.insert(var.trim().to_string(), element);
    }
    Ok(out)
}
