//! Relation / category vocabulary shared by every module.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered vocabulary: relation and category names are resolved to dense ids
/// (index in the list) once at load time; everything downstream works on ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationVocab {
    /// Relation names; index = relation id.
    pub relations: Vec<String>,
    /// Object-category names; index = category id.
    pub categories: Vec<String>,
    /// Optional attribute schema: attribute name -> allowed values.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, Vec<String>>,
}

impl RelationVocab {
    pub fn new<S: Into<String>>(relations: Vec<S>, categories: Vec<S>) -> Result<Self> {
        Self::with_attributes(relations, categories, BTreeMap::new())
    }

    pub fn with_attributes<S: Into<String>>(
        relations: Vec<S>,
        categories: Vec<S>,
        attributes: BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        let vocab = RelationVocab {
            relations: relations.into_iter().map(Into::into).collect(),
            categories: categories.into_iter().map(Into::into).collect(),
            attributes,
        };
        vocab.validate()?;
        Ok(vocab)
    }

    pub fn validate(&self) -> Result<()> {
        check_unique("relation", &self.relations)?;
        check_unique("category", &self.categories)?;
        Ok(())
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn relation_id(&self, name: &str) -> Result<usize> {
        self.relations
            .iter()
            .position(|r| r == name)
            .ok_or_else(|| Error::Vocab(format!("unknown relation name {name:?}")))
    }

    pub fn category_id(&self, name: &str) -> Result<usize> {
        self.categories
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Vocab(format!("unknown category name {name:?}")))
    }

    pub fn relation_name(&self, id: usize) -> Result<&str> {
        self.relations
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| Error::Vocab(format!("relation id {id} out of range")))
    }

    pub fn category_name(&self, id: usize) -> Result<&str> {
        self.categories
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| Error::Vocab(format!("category id {id} out of range")))
    }

    /// Check one attribute assignment against the schema. With an empty
    /// schema any assignment passes (attributes are free-form then).
    pub fn check_attribute(&self, name: &str, value: &str) -> Result<()> {
        if self.attributes.is_empty() {
            return Ok(());
        }
        match self.attributes.get(name) {
            None => Err(Error::Vocab(format!("unknown attribute name {name:?}"))),
            Some(values) if values.iter().any(|v| v == value) => Ok(()),
            Some(_) => Err(Error::Vocab(format!(
                "value {value:?} not allowed for attribute {name:?}"
            ))),
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let vocab: RelationVocab = serde_json::from_str(&text)?;
        vocab.validate()?;
        Ok(vocab)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn check_unique(kind: &str, names: &[String]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(Error::Vocab(format!("duplicate {kind} name {name:?}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_dense_positions() {
        let v = RelationVocab::new(vec!["left", "right"], vec!["cat", "dog"]).unwrap();
        assert_eq!(v.relation_id("left").unwrap(), 0);
        assert_eq!(v.relation_id("right").unwrap(), 1);
        assert_eq!(v.category_id("dog").unwrap(), 1);
        assert_eq!(v.relation_name(1).unwrap(), "right");
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(RelationVocab::new(vec!["left", "left"], vec!["cat"]).is_err());
        assert!(RelationVocab::new(vec!["left"], vec!["cat", "cat"]).is_err());
    }

    #[test]
    fn unknown_names_are_vocab_errors() {
        let v = RelationVocab::new(vec!["left"], vec!["cat"]).unwrap();
        assert!(matches!(v.relation_id("up"), Err(Error::Vocab(_))));
        assert!(matches!(v.relation_name(3), Err(Error::Vocab(_))));
    }

    #[test]
    fn attribute_schema_enforced_when_present() {
        let mut attrs = BTreeMap::new();
        attrs.insert("size".to_string(), vec!["S".to_string(), "L".to_string()]);
        let v = RelationVocab::with_attributes(vec!["left"], vec!["cat"], attrs).unwrap();
        assert!(v.check_attribute("size", "S").is_ok());
        assert!(v.check_attribute("size", "XL").is_err());
        assert!(v.check_attribute("color", "red").is_err());

        let free = RelationVocab::new(vec!["left"], vec!["cat"]).unwrap();
        assert!(free.check_attribute("anything", "goes").is_ok());
    }
}
