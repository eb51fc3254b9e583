use std::collections::HashMap;

use crate::{Error, Result};

/// Ordered tag list with its inverse index.
///
/// Vocabularies built by ingestion are sorted by descending occurrence count
/// with ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagVocabulary {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagVocabulary {
    /// Builds a vocabulary that keeps `tags` in the given order.
    pub fn new(tags: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tags.len());
        for (i, t) in tags.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Invalid("empty tag string".into()));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate tag `{t}`")));
            }
        }
        Ok(TagVocabulary { tags, index })
    }

    /// Keeps the `top_n` most frequent tags, ordered by count descending and
    /// then by tag string.
    pub fn from_counts<'a, I>(counts: I, top_n: usize) -> Result<(Self, Vec<u64>)>
    where
        I: IntoIterator<Item = (&'a str, u64)>,
    {
        let mut all: Vec<(&str, u64)> = counts.into_iter().collect();
        if top_n == 0 {
            return Err(Error::Invalid("top_n must be at least 1".into()));
        }
        if top_n > all.len() {
            return Err(Error::Invalid(format!(
                "top_n {top_n} exceeds the number of distinct tags ({})",
                all.len()
            )));
        }
        all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        all.truncate(top_n);
        let counts = all.iter().map(|&(_, c)| c).collect();
        let vocab = TagVocabulary::new(all.into_iter().map(|(t, _)| t.to_string()).collect())?;
        Ok((vocab, counts))
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn tag(&self, id: usize) -> &str {
        &self.tags[id]
    }

    pub fn id(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    /// Like [`id`](Self::id) but reports unknown tags as an error.
    pub fn require(&self, tag: &str) -> Result<usize> {
        self.id(tag).ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }
}
