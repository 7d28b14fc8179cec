//! Document collection, tokenizer and conjunctive containment lookups.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use crate::error::{Error, Result};

/// Lowercases and splits on anything that is not alphanumeric. Unicode
/// letters and digits are kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Document {
            doc_id: doc_id.into(),
            text,
            tokens,
        }
    }
}

/// Reads a corpus file: one document per line, `doc_id <TAB> text`.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::format("corpus", idx + 1, "missing tab separator"))?;
        if id.trim().is_empty() {
            return Err(Error::format("corpus", idx + 1, "empty document id"));
        }
        docs.push(Document::new(id.trim(), text));
    }
    Ok(docs)
}

/// Term to sorted, duplicate-free postings of document ordinals.
///
/// Document ordinals index into the slice the index was built from.
#[derive(Debug, Clone, Default)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    ordinals: HashMap<String, usize>,
    postings: HashMap<String, Vec<u32>>,
}

impl InvertedIndex {
    pub fn build(docs: &[Document]) -> Result<Self> {
        let mut ordinals = HashMap::with_capacity(docs.len());
        let mut postings: HashMap<String, Vec<u32>> = HashMap::new();
        for (ord, doc) in docs.iter().enumerate() {
            if ordinals.insert(doc.doc_id.clone(), ord).is_some() {
                return Err(Error::DuplicateDocument(doc.doc_id.clone()));
            }
            let ord = ord as u32;
            for term in &doc.tokens {
                let list = postings.entry(term.clone()).or_default();
                // ordinals arrive in ascending order, so a repeat can only be the tail
                if list.last() != Some(&ord) {
                    list.push(ord);
                }
            }
        }
        Ok(InvertedIndex {
            doc_ids: docs.iter().map(|d| d.doc_id.clone()).collect(),
            ordinals,
            postings,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn doc_id(&self, ordinal: usize) -> &str {
        &self.doc_ids[ordinal]
    }

    pub fn ordinal(&self, doc_id: &str) -> Option<usize> {
        self.ordinals.get(doc_id).copied()
    }

    pub fn postings(&self, term: &str) -> &[u32] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All indexed terms with their document frequency, in arbitrary order.
    pub fn terms(&self) -> impl Iterator<Item = (&str, usize)> {
        self.postings.iter().map(|(t, p)| (t.as_str(), p.len()))
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    /// Ordinals of documents containing every distinct token of `query`.
    /// An empty token list yields an empty set.
    pub fn docs_containing_all_terms(&self, query: &str) -> Vec<u32> {
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        self.docs_containing_all(terms.iter().map(String::as_str))
    }

    /// Same as [`Self::docs_containing_all_terms`] for pre-tokenized terms.
    pub fn docs_containing_all<'a, I>(&self, terms: I) -> Vec<u32>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut lists: Vec<&[u32]> = terms.into_iter().map(|t| self.postings(t)).collect();
        if lists.is_empty() {
            return Vec::new();
        }
        lists.sort_by_key(|l| l.len());
        let mut acc: Vec<u32> = lists[0].to_vec();
        for list in &lists[1..] {
            if acc.is_empty() {
                break;
            }
            acc = intersect_sorted(&acc, list);
        }
        acc
    }

    /// Document ids (not ordinals) matching `query`, sorted.
    pub fn doc_ids_containing_all_terms(&self, query: &str) -> BTreeSet<String> {
        self.docs_containing_all_terms(query)
            .into_iter()
            .map(|o| self.doc_ids[o as usize].clone())
            .collect()
    }
}

fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<Document> {
        vec![Document::new("d1", "a b"), Document::new("d2", "b c")]
    }

    fn ids(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenizes() {
        assert_eq!(
            tokenize("Lecture-Notes 2012"),
            vec!["lecture", "notes", "2012"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("université"), vec!["université"]);
    }

    #[test]
    fn builds_postings() {
        let idx = InvertedIndex::build(&corpus()).unwrap();
        assert_eq!(idx.postings("b"), &[0, 1]);
        assert_eq!(idx.postings("a"), &[0]);
        assert_eq!(idx.document_frequency("zzz"), 0);

        let one = InvertedIndex::build(&[Document::new("d1", "b b b")]).unwrap();
        assert_eq!(one.postings("b"), &[0]);

        let empty = InvertedIndex::build(&[]).unwrap();
        assert_eq!(empty.num_docs(), 0);
        assert_eq!(empty.num_terms(), 0);
    }

    #[test]
    fn duplicate_doc_id_is_rejected() {
        let docs = vec![Document::new("d1", "a"), Document::new("d1", "b")];
        assert!(
            matches!(InvertedIndex::build(&docs), Err(Error::DuplicateDocument(id)) if id == "d1")
        );
    }

    #[test]
    fn conjunctive_containment() {
        let idx = InvertedIndex::build(&corpus()).unwrap();
        assert_eq!(idx.doc_ids_containing_all_terms("b"), ids(&["d1", "d2"]));
        assert!(idx.doc_ids_containing_all_terms("a c").is_empty());
        assert!(idx.doc_ids_containing_all_terms("nothing").is_empty());
        assert!(idx.doc_ids_containing_all_terms("").is_empty());
        assert_eq!(idx.doc_ids_containing_all_terms("B b"), ids(&["d1", "d2"]));
    }

    #[test]
    fn reads_corpus_file() {
        let docs = read_corpus("# c\nd1\tHello World\n\nd2\tfoo\n".as_bytes()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].tokens, vec!["hello", "world"]);
        assert!(read_corpus("no tab here\n".as_bytes()).is_err());
    }
}
