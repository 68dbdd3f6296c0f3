//! TF-IDF retrieval: smoothed idf, L2-normalized document vectors, cosine
//! ranking with stable tie-breaks, and the retrieve-and-append generation
//! wrapper.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::generator::Generator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalIndex {
    documents: Vec<Document>,
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    /// Sparse L2-normalized tf-idf vectors, sorted by term index.
    vectors: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub hits: Vec<Hit>,
    /// True when no query term was in the index vocabulary; the hit list is
    /// then empty but generation still proceeds.
    pub oov_query: bool,
}

impl RetrievalIndex {
    pub fn build(corpus: &[Document]) -> Result<RetrievalIndex> {
        if corpus.is_empty() {
            return Err(Error::Input("retrieval corpus is empty".into()));
        }
        let n = corpus.len() as f64;

        let doc_terms: Vec<BTreeMap<String, usize>> = corpus
            .iter()
            .map(|d| term_counts(&d.text))
            .collect();

        let mut vocabulary = BTreeMap::new();
        let mut df: Vec<usize> = Vec::new();
        for terms in &doc_terms {
            for term in terms.keys() {
                let next = vocabulary.len();
                let idx = *vocabulary.entry(term.clone()).or_insert(next);
                if idx == df.len() {
                    df.push(0);
                }
            }
        }
        for terms in &doc_terms {
            for term in terms.keys() {
                df[vocabulary[term]] += 1;
            }
        }
        // smoothed idf keeps every weight positive, so even a single-document
        // corpus yields a usable vector
        let idf: Vec<f64> = df
            .iter()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();

        let vectors = doc_terms
            .iter()
            .map(|terms| {
                let sparse: Vec<(usize, f64)> = terms
                    .iter()
                    .map(|(term, &tf)| {
                        let idx = vocabulary[term];
                        (idx, tf as f64 * idf[idx])
                    })
                    .collect();
                normalize(sparse)
            })
            .collect();

        Ok(RetrievalIndex {
            documents: corpus.to_vec(),
            vocabulary,
            idf,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == doc_id)
    }

    /// The document's normalized vector (index aligned with `documents`).
    pub fn vector(&self, i: usize) -> &[(usize, f64)] {
        &self.vectors[i]
    }

    fn query_vector(&self, query: &str) -> Option<Vec<(usize, f64)>> {
        let counts = term_counts(query);
        let sparse: Vec<(usize, f64)> = counts
            .iter()
            .filter_map(|(term, &tf)| {
                self.vocabulary
                    .get(term)
                    .map(|&idx| (idx, tf as f64 * self.idf[idx]))
            })
            .collect();
        if sparse.is_empty() {
            None
        } else {
            Some(normalize(sparse))
        }
    }
}

/// Top-k documents by cosine similarity, ties broken by ascending doc id.
/// Returns min(k, corpus size) hits; a query with no in-vocabulary terms
/// returns an empty flagged result instead of an error.
pub fn rag_retrieve(index: &RetrievalIndex, query: &str, k: usize) -> Result<Retrieval> {
    if index.is_empty() {
        return Err(Error::Input("retrieval index is empty".into()));
    }
    if k == 0 {
        return Ok(Retrieval {
            hits: Vec::new(),
            oov_query: false,
        });
    }
    let Some(qv) = index.query_vector(query) else {
        return Ok(Retrieval {
            hits: Vec::new(),
            oov_query: true,
        });
    };
    let mut scored: Vec<Hit> = index
        .documents
        .iter()
        .enumerate()
        .map(|(i, d)| Hit {
            doc_id: d.id.clone(),
            score: sparse_dot(&qv, &index.vectors[i]),
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    scored.truncate(k.min(index.len()));
    Ok(Retrieval {
        hits: scored,
        oov_query: false,
    })
}

/// Retrieve-and-append generation: the top-k documents are rendered into a
/// context block ahead of the prompt; k = 0 degenerates to plain
/// generation, and an out-of-vocabulary query proceeds with an explicit
/// "no context found" block.
pub fn rag_generate(
    problem_prompt: &str,
    index: &RetrievalIndex,
    generator: &dyn Generator,
    k: usize,
) -> Result<String> {
    if k == 0 {
        return generator.generate(problem_prompt);
    }
    let retrieval = rag_retrieve(index, problem_prompt, k)?;
    let prompt = render_rag_prompt(problem_prompt, index, &retrieval);
    generator.generate(&prompt)
}

/// The documented context block:
/// `Context:` then `[rank] doc_id: text` per hit, a blank line, the prompt.
pub fn render_rag_prompt(
    problem_prompt: &str,
    index: &RetrievalIndex,
    retrieval: &Retrieval,
) -> String {
    if retrieval.hits.is_empty() {
        return format!("Context: no context found.\n\n{problem_prompt}");
    }
    let mut block = String::from("Context:\n");
    for (rank, hit) in retrieval.hits.iter().enumerate() {
        let text = index
            .document(&hit.doc_id)
            .map(|d| d.text.as_str())
            .unwrap_or("");
        block.push_str(&format!("[{}] {}: {}\n", rank + 1, hit.doc_id, text));
    }
    format!("{block}\n{problem_prompt}")
}

/// Corpus ingestion: a JSON-lines file with {id, text, source} objects, or
/// a directory of plain-text files (id = file name, source = "file").
pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    if path.is_dir() {
        let mut docs = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(path)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for p in entries {
            let id = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            docs.push(Document {
                id,
                text: std::fs::read_to_string(&p)?,
                source: "file".into(),
            });
        }
        if docs.is_empty() {
            return Err(Error::Input(format!(
                "corpus directory {} has no files",
                path.display()
            )));
        }
        return Ok(docs);
    }
    let content = std::fs::read_to_string(path)?;
    let mut docs = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| Error::Load {
            line: Some(lineno + 1),
            message: format!("bad corpus document: {e}"),
        })?;
        docs.push(doc);
    }
    if docs.is_empty() {
        return Err(Error::Input(format!("corpus file {} is empty", path.display())));
    }
    Ok(docs)
}

/// Lowercased alphanumeric runs.
pub fn term_counts(text: &str) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for term in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        *counts.entry(term.to_lowercase()).or_insert(0) += 1;
    }
    counts
}

fn normalize(mut sparse: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    sparse.sort_by_key(|&(i, _)| i);
    let norm = sparse.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for entry in &mut sparse {
            entry.1 /= norm;
        }
    }
    sparse
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let mut sum = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    sum
}
