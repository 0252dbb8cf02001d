//! Fairness schema and intersectional group keys.
//!
//! A [`FairnessSchema`] declares the sensitive attributes with their finite
//! domains and the label attribute with its ordered values. Groups are
//! addressed by [`GroupKey`]s holding one entry per sensitive attribute,
//! either a concrete value (by domain index) or the wildcard ε.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A categorical attribute and its declared domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub values: Vec<String>,
}

impl Attribute {
    pub fn new<S: Into<String>, V: Into<String>>(
        name: S,
        values: impl IntoIterator<Item = V>,
    ) -> Self {
        Attribute {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    sensitive: Vec<Attribute>,
    label: Attribute,
}

/// Sensitive attributes plus the label attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct FairnessSchema {
    sensitive: Vec<Attribute>,
    label: Attribute,
    radix: Vec<usize>,
}

impl TryFrom<RawSchema> for FairnessSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        FairnessSchema::new(raw.sensitive, raw.label)
    }
}

impl From<FairnessSchema> for RawSchema {
    fn from(s: FairnessSchema) -> Self {
        RawSchema {
            sensitive: s.sensitive,
            label: s.label,
        }
    }
}

impl FairnessSchema {
    pub fn new(sensitive: Vec<Attribute>, label: Attribute) -> Result<Self> {
        if sensitive.is_empty() {
            return Err(Error::InvalidSchema(
                "at least one sensitive attribute is required".into(),
            ));
        }
        let mut names = HashSet::new();
        for attr in sensitive.iter().chain(std::iter::once(&label)) {
            if !names.insert(attr.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "attribute `{}` declared twice",
                    attr.name
                )));
            }
            let mut seen = HashSet::new();
            for v in &attr.values {
                if !seen.insert(v.as_str()) {
                    return Err(Error::InvalidSchema(format!(
                        "value `{v}` repeated in the domain of `{}`",
                        attr.name
                    )));
                }
            }
        }
        if let Some(a) = sensitive.iter().find(|a| a.values.is_empty()) {
            return Err(Error::InvalidSchema(format!(
                "domain of `{}` is empty",
                a.name
            )));
        }
        if label.values.len() < 2 {
            return Err(Error::InvalidSchema(format!(
                "label `{}` needs at least two values",
                label.name
            )));
        }
        let radix = sensitive.iter().map(|a| a.values.len()).collect();
        Ok(FairnessSchema {
            sensitive,
            label,
            radix,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSchema(e.to_string()))
    }

    pub fn sensitive(&self) -> &[Attribute] {
        &self.sensitive
    }

    pub fn label(&self) -> &Attribute {
        &self.label
    }

    /// Number of sensitive attributes.
    pub fn m(&self) -> usize {
        self.sensitive.len()
    }

    /// Number of label values.
    pub fn k(&self) -> usize {
        self.label.values.len()
    }

    pub fn label_name(&self, label: usize) -> &str {
        &self.label.values[label]
    }

    pub fn label_index(&self, value: &str) -> Result<usize> {
        self.label
            .index_of(value)
            .ok_or_else(|| Error::UnknownLabel(value.to_string()))
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.sensitive.iter().position(|a| a.name == name)
    }

    pub fn num_base_groups(&self) -> usize {
        self.radix.iter().product()
    }

    pub fn num_cells(&self) -> usize {
        self.num_base_groups() * self.k()
    }

    /// Mixed-radix index of a base group, first attribute most significant.
    pub fn base_index(&self, values: &[usize]) -> usize {
        values
            .iter()
            .zip(&self.radix)
            .fold(0, |acc, (&v, &r)| acc * r + v)
    }

    pub fn base_values(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.radix.len()];
        for (slot, &r) in out.iter_mut().zip(&self.radix).rev() {
            *slot = index % r;
            index /= r;
        }
        out
    }

    pub fn base_key(&self, index: usize) -> GroupKey {
        GroupKey::base(self.base_values(index))
    }

    pub fn base_keys(&self) -> impl Iterator<Item = GroupKey> + '_ {
        (0..self.num_base_groups()).map(|i| self.base_key(i))
    }

    /// Indices of the base groups a key matches, ascending.
    pub fn matching_bases(&self, key: &GroupKey) -> Vec<usize> {
        (0..self.num_base_groups())
            .filter(|&i| key.matches(&self.base_values(i)))
            .collect()
    }

    pub fn check_key(&self, key: &GroupKey) -> Result<()> {
        if key.len() != self.m() {
            return Err(Error::InvalidGroup(format!(
                "key has {} entries, schema has {} sensitive attributes",
                key.len(),
                self.m()
            )));
        }
        for (entry, attr) in key.entries().iter().zip(&self.sensitive) {
            if let GroupEntry::Value(v) = entry {
                if *v >= attr.values.len() {
                    return Err(Error::InvalidGroup(format!(
                        "value index {v} out of range for `{}`",
                        attr.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Base-group index of a wildcard-free key.
    pub fn base_index_of(&self, key: &GroupKey) -> Result<usize> {
        self.check_key(key)?;
        let values = key
            .concrete_values()
            .ok_or_else(|| Error::InvalidGroup(format!("{} is not a base group", self.display(key))))?;
        Ok(self.base_index(&values))
    }

    /// `(m,o)`-style rendering with ε for wildcards.
    pub fn display(&self, key: &GroupKey) -> String {
        let parts: Vec<&str> = key
            .entries()
            .iter()
            .zip(&self.sensitive)
            .map(|(e, a)| match e {
                GroupEntry::Value(v) => a.values[*v].as_str(),
                GroupEntry::Any => "ε",
            })
            .collect();
        format!("({})", parts.join(","))
    }

    /// Map of attribute name to value; wildcard attributes are omitted.
    pub fn group_to_map(&self, key: &GroupKey) -> BTreeMap<String, String> {
        key.entries()
            .iter()
            .zip(&self.sensitive)
            .filter_map(|(e, a)| match e {
                GroupEntry::Value(v) => Some((a.name.clone(), a.values[*v].clone())),
                GroupEntry::Any => None,
            })
            .collect()
    }

    /// Inverse of [`group_to_map`](Self::group_to_map): attributes absent
    /// from the map are wildcards.
    pub fn group_from_map(&self, map: &BTreeMap<String, String>) -> Result<GroupKey> {
        for name in map.keys() {
            if self.attribute_index(name).is_none() {
                return Err(Error::InvalidGroup(format!(
                    "`{name}` is not a sensitive attribute"
                )));
            }
        }
        let entries = self
            .sensitive
            .iter()
            .map(|a| match map.get(&a.name) {
                None => Ok(GroupEntry::Any),
                Some(v) if is_wildcard_token(v) => Ok(GroupEntry::Any),
                Some(v) => a.index_of(v).map(GroupEntry::Value).ok_or_else(|| {
                    Error::InvalidGroup(format!("`{v}` is not in the domain of `{}`", a.name))
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupKey(entries))
    }

    /// Parses `m,o`, `m,*`, `gender=m` or `*` into a key.
    ///
    /// Positional form lists one value per sensitive attribute (`*` or `ε`
    /// for a wildcard); named form lists `attr=value` pairs and leaves the
    /// remaining attributes as wildcards.
    pub fn parse_group(&self, text: &str) -> Result<GroupKey> {
        let text = text.trim();
        if text.is_empty() || is_wildcard_token(text) {
            return Ok(GroupKey::population(self.m()));
        }
        if text.contains('=') {
            let mut map = BTreeMap::new();
            for pair in text.split(',') {
                let (k, v) = pair.split_once('=').ok_or_else(|| {
                    Error::InvalidGroup(format!("expected attr=value, got `{pair}`"))
                })?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            return self.group_from_map(&map);
        }
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != self.m() {
            return Err(Error::InvalidGroup(format!(
                "`{text}` names {} values, schema has {} sensitive attributes",
                parts.len(),
                self.m()
            )));
        }
        let entries = parts
            .iter()
            .zip(&self.sensitive)
            .map(|(p, a)| {
                if is_wildcard_token(p) {
                    Ok(GroupEntry::Any)
                } else {
                    a.index_of(p).map(GroupEntry::Value).ok_or_else(|| {
                        Error::InvalidGroup(format!("`{p}` is not in the domain of `{}`", a.name))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupKey(entries))
    }
}

fn is_wildcard_token(s: &str) -> bool {
    matches!(s, "*" | "ε" | "eps" | "epsilon")
}

/// One position of a [`GroupKey`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupEntry {
    Value(usize),
    Any,
}

/// Intersectional group selector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupKey(Vec<GroupEntry>);

impl GroupKey {
    pub fn new(entries: Vec<GroupEntry>) -> Self {
        GroupKey(entries)
    }

    pub fn base(values: Vec<usize>) -> Self {
        GroupKey(values.into_iter().map(GroupEntry::Value).collect())
    }

    /// The all-wildcard key.
    pub fn population(m: usize) -> Self {
        GroupKey(vec![GroupEntry::Any; m])
    }

    pub fn entries(&self) -> &[GroupEntry] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_base(&self) -> bool {
        self.0.iter().all(|e| matches!(e, GroupEntry::Value(_)))
    }

    pub fn is_population(&self) -> bool {
        self.0.iter().all(|e| matches!(e, GroupEntry::Any))
    }

    pub fn concrete_values(&self) -> Option<Vec<usize>> {
        self.0
            .iter()
            .map(|e| match e {
                GroupEntry::Value(v) => Some(*v),
                GroupEntry::Any => None,
            })
            .collect()
    }

    /// Whether the base group with the given value indices belongs to this key.
    pub fn matches(&self, base: &[usize]) -> bool {
        self.0.iter().zip(base).all(|(e, &b)| match e {
            GroupEntry::Value(v) => *v == b,
            GroupEntry::Any => true,
        })
    }

    fn concrete_count(&self) -> usize {
        self.0
            .iter()
            .filter(|e| matches!(e, GroupEntry::Value(_)))
            .count()
    }

    fn order_key(&self) -> (usize, Vec<usize>, Vec<usize>) {
        let mut positions = Vec::new();
        let mut values = Vec::new();
        for (i, e) in self.0.iter().enumerate() {
            if let GroupEntry::Value(v) = e {
                positions.push(i);
                values.push(*v);
            }
        }
        (self.concrete_count(), positions, values)
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|e| match e {
                GroupEntry::Value(v) => v.to_string(),
                GroupEntry::Any => "ε".into(),
            })
            .collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Lists group keys in a fixed order: keys with fewer concrete attributes
/// first, then by which attributes are concrete, then by value order.
///
/// Without wildcards only the base groups are returned, in base-index
/// order. The all-wildcard key is never included.
pub fn enumerate_groups(schema: &FairnessSchema, include_wildcards: bool) -> Vec<GroupKey> {
    if !include_wildcards {
        return schema.base_keys().collect();
    }
    // Every key in ∏(dom ∪ {ε}); slot `len` encodes ε.
    let extended: Vec<usize> = schema.sensitive().iter().map(|a| a.values.len() + 1).collect();
    let total: usize = extended.iter().product();
    let mut keys: Vec<GroupKey> = (0..total)
        .map(|mut idx| {
            let mut entries = vec![GroupEntry::Any; extended.len()];
            for (slot, &r) in entries.iter_mut().zip(&extended).rev() {
                let v = idx % r;
                idx /= r;
                if v + 1 < r {
                    *slot = GroupEntry::Value(v);
                }
            }
            GroupKey(entries)
        })
        .filter(|k| !k.is_population())
        .collect();
    keys.sort_by_cached_key(GroupKey::order_key);
    keys
}
