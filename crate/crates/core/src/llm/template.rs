use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Reiterate,
    Role,
    AttrFilter,
    SqlTransform,
    Datatype,
    ChartSelect,
    ChartEncode,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::Reiterate,
        TemplateId::Role,
        TemplateId::AttrFilter,
        TemplateId::SqlTransform,
        TemplateId::Datatype,
        TemplateId::ChartSelect,
        TemplateId::ChartEncode,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Reiterate => "reiterate",
            TemplateId::Role => "role",
            TemplateId::AttrFilter => "attr_filter",
            TemplateId::SqlTransform => "sql_transform",
            TemplateId::Datatype => "datatype",
            TemplateId::ChartSelect => "chart_select",
            TemplateId::ChartEncode => "chart_encode",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| TemplateError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TemplateError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` needs a binding for `{name}`")]
    MissingBinding { template: String, name: String },
    #[error("template file is malformed: {0}")]
    Malformed(String),
    #[error("template `{template}` uses undeclared placeholder `{name}`")]
    UndeclaredPlaceholder { template: String, name: String },
    #[error("template `{template}` declares unused placeholder `{name}`")]
    UnusedPlaceholder { template: String, name: String },
    #[error("cannot read template: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    String,
    StringList,
    StringMap,
}

impl FromStr for FieldKind {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "string" => Ok(FieldKind::String),
            "string_list" => Ok(FieldKind::StringList),
            "string_map" => Ok(FieldKind::StringMap),
            other => Err(TemplateError::Malformed(format!("unknown field kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputField {
    pub name: String,
    pub kind: FieldKind,
}

/// Expected shape of the JSON answer: an object holding these fields.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSchema {
    pub fields: Vec<OutputField>,
}

impl OutputSchema {
    pub fn new(fields: &[(&str, FieldKind)]) -> Self {
        Self {
            fields: fields
                .iter()
                .map(|(n, k)| OutputField { name: n.to_string(), kind: *k })
                .collect(),
        }
    }

    /// Checks that `value` is an object carrying every field with its kind.
    pub fn validate(&self, value: &serde_json::Value) -> Result<(), String> {
        let obj = value.as_object().ok_or("answer is not a JSON object")?;
        for field in &self.fields {
            let v = obj
                .get(&field.name)
                .ok_or_else(|| format!("missing field `{}`", field.name))?;
            let ok = match field.kind {
                FieldKind::String => v.is_string(),
                FieldKind::StringList => v
                    .as_array()
                    .is_some_and(|a| a.iter().all(serde_json::Value::is_string)),
                FieldKind::StringMap => v
                    .as_object()
                    .is_some_and(|m| m.values().all(serde_json::Value::is_string)),
            };
            if !ok {
                return Err(format!("field `{}` is not a {:?}", field.name, field.kind));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Literal(String),
    Placeholder(String),
}

/// A prompt with `{name}` placeholders. `{{` is a literal brace; a brace
/// not followed by an identifier and `}` is also literal, so JSON examples
/// inside a template need no escaping.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub text: String,
    pub placeholders: Vec<String>,
    pub output: OutputSchema,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn new(
        id: TemplateId,
        text: &str,
        placeholders: &[&str],
        output: OutputSchema,
    ) -> Result<Self, TemplateError> {
        let segments = tokenize(text);
        let used: BTreeSet<&str> = segments
            .iter()
            .filter_map(|s| match s {
                Segment::Placeholder(p) => Some(p.as_str()),
                Segment::Literal(_) => None,
            })
            .collect();
        let declared: BTreeSet<&str> = placeholders.iter().copied().collect();
        if let Some(name) = used.difference(&declared).next() {
            return Err(TemplateError::UndeclaredPlaceholder {
                template: id.to_string(),
                name: name.to_string(),
            });
        }
        if let Some(name) = declared.difference(&used).next() {
            return Err(TemplateError::UnusedPlaceholder {
                template: id.to_string(),
                name: name.to_string(),
            });
        }
        Ok(Self {
            id,
            text: text.to_string(),
            placeholders: placeholders.iter().map(|s| s.to_string()).collect(),
            output,
            segments,
        })
    }

    /// Parses the registry file format:
    ///
    /// ```text
    /// id: attr_filter
    /// placeholders: role, profiles, prompt
    /// output: attributes=string_list
    /// ---
    /// body...
    /// ```
    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        let (header, body) = source
            .split_once("\n---\n")
            .ok_or_else(|| TemplateError::Malformed("missing `---` separator".into()))?;
        let mut id = None;
        let mut placeholders = Vec::new();
        let mut output = Vec::new();
        for line in header.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| TemplateError::Malformed(format!("bad header line `{line}`")))?;
            let items = value.split(',').map(str::trim).filter(|s| !s.is_empty());
            match key.trim() {
                "id" => id = Some(value.trim().parse::<TemplateId>()?),
                "placeholders" => placeholders.extend(items),
                "output" => {
                    for item in items {
                        let (name, kind) = item.split_once('=').ok_or_else(|| {
                            TemplateError::Malformed(format!("bad output field `{item}`"))
                        })?;
                        output.push((name.trim(), kind.trim().parse::<FieldKind>()?));
                    }
                }
                other => {
                    return Err(TemplateError::Malformed(format!("unknown header `{other}`")))
                }
            }
        }
        let id = id.ok_or_else(|| TemplateError::Malformed("missing `id` header".into()))?;
        Self::new(id, body, &placeholders, OutputSchema::new(&output))
    }

    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.text.len());
        for segment in &self.segments {
            match segment {
                Segment::Literal(s) => out.push_str(s),
                Segment::Placeholder(name) => {
                    let value = bindings.get(name.as_str()).ok_or_else(|| {
                        TemplateError::MissingBinding {
                            template: self.id.to_string(),
                            name: name.clone(),
                        }
                    })?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }
}

fn tokenize(text: &str) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if rest.starts_with("{{") {
            literal.push('{');
            rest = &rest[2..];
        } else if c == '{' {
            match placeholder_at(rest) {
                Some(name) => {
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    rest = &rest[name.len() + 2..];
                    segments.push(Segment::Placeholder(name.to_string()));
                }
                None => {
                    literal.push('{');
                    rest = &rest[1..];
                }
            }
        } else {
            literal.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    segments
}

fn placeholder_at(s: &str) -> Option<&str> {
    let inner = &s[1..];
    let end = inner.find('}')?;
    let name = &inner[..end];
    let mut chars = name.chars();
    let first = chars.next()?;
    if (first.is_ascii_lowercase() || first == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
    {
        Some(name)
    } else {
        None
    }
}

const BUILTIN: [&str; 7] = [
    include_str!("../../templates/reiterate.txt"),
    include_str!("../../templates/role.txt"),
    include_str!("../../templates/attr_filter.txt"),
    include_str!("../../templates/sql_transform.txt"),
    include_str!("../../templates/datatype.txt"),
    include_str!("../../templates/chart_select.txt"),
    include_str!("../../templates/chart_encode.txt"),
];

/// All prompt templates, keyed by id.
#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl TemplateRegistry {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|src| PromptTemplate::parse(src).expect("built-in templates are valid"))
            .map(|t| (t.id, t))
            .collect();
        Self { templates }
    }

    /// Built-in templates overridden by any `<id>.txt` files in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut registry = Self::builtin();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{id}.txt"));
            if !path.exists() {
                continue;
            }
            let src = fs::read_to_string(&path)
                .map_err(|e| TemplateError::Io(format!("{}: {e}", path.display())))?;
            let template = PromptTemplate::parse(&src)?;
            if template.id != id {
                return Err(TemplateError::Malformed(format!(
                    "{} declares id `{}`",
                    path.display(),
                    template.id
                )));
            }
            registry.templates.insert(id, template);
        }
        Ok(registry)
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn render_prompt(
        &self,
        id: &str,
        bindings: &BTreeMap<&str, String>,
    ) -> Result<String, TemplateError> {
        let id: TemplateId = id.parse()?;
        self.get(id).render(bindings)
    }
}
