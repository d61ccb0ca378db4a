use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;

use crate::domain::EvidenceItem;
use crate::error::{Error, Result};

/// Query term bag: each term counts once.
pub type Query = BTreeSet<String>;

/// Lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
struct DocVector {
    counts: BTreeMap<String, u32>,
    norm: f64,
}

/// In-memory evidence corpus with a tf-idf index. Immutable once built.
#[derive(Debug, Clone)]
pub struct CorpusStore {
    items: Vec<EvidenceItem>,
    docs: Vec<DocVector>,
    idf: BTreeMap<String, f64>,
    pub now_year: i32,
}

impl CorpusStore {
    pub fn new(items: Vec<EvidenceItem>, now_year: i32) -> Result<Self> {
        let mut seen = HashSet::new();
        for item in &items {
            if !seen.insert(item.id.as_str()) {
                return Err(Error::Config(format!("duplicate evidence id `{}`", item.id)));
            }
        }

        let counts: Vec<BTreeMap<String, u32>> = items
            .iter()
            .map(|item| {
                let mut c = BTreeMap::new();
                for tok in tokenize(&item.text) {
                    *c.entry(tok).or_insert(0) += 1;
                }
                c
            })
            .collect();

        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for c in &counts {
            for term in c.keys() {
                *df.entry(term.clone()).or_insert(0) += 1;
            }
        }
        let n = items.len() as f64;
        let idf: BTreeMap<String, f64> = df
            .into_iter()
            .map(|(term, d)| (term, (n / d as f64).ln() + 1.0))
            .collect();

        let docs = counts
            .into_iter()
            .map(|counts| {
                let norm = counts
                    .iter()
                    .map(|(t, &c)| {
                        let w = f64::from(c) * idf[t];
                        w * w
                    })
                    .sum::<f64>()
                    .sqrt();
                DocVector { counts, norm }
            })
            .collect();

        Ok(Self {
            items,
            docs,
            idf,
            now_year,
        })
    }

    pub fn empty(now_year: i32) -> Self {
        Self::new(Vec::new(), now_year).expect("empty corpus has no duplicate ids")
    }

    /// Parse a JSONL corpus (blank lines ignored).
    pub fn from_jsonl<R: BufRead>(reader: R, now_year: i32) -> Result<Self> {
        let mut items = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            items.push(serde_json::from_str::<EvidenceItem>(&line)?);
        }
        Self::new(items, now_year)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("evidence items serialize"));
            out.push('\n');
        }
        out
    }

    pub fn items(&self) -> &[EvidenceItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn idf_table(&self) -> &BTreeMap<String, f64> {
        &self.idf
    }

    /// Weight of a query term; terms unseen in the corpus get the largest idf.
    fn query_weight(&self, term: &str) -> f64 {
        self.idf
            .get(term)
            .copied()
            .unwrap_or_else(|| (self.items.len() as f64 + 1.0).ln() + 1.0)
    }

    /// Cosine similarity of tf-idf vectors for item `index` and `query`.
    pub fn cosine(&self, index: usize, query: &Query) -> f64 {
        let doc = &self.docs[index];
        if doc.norm == 0.0 || query.is_empty() {
            return 0.0;
        }
        let mut dot = 0.0;
        let mut q_norm_sq = 0.0;
        for term in query {
            let wq = self.query_weight(term);
            q_norm_sq += wq * wq;
            if let Some(&c) = doc.counts.get(term) {
                dot += wq * f64::from(c) * self.idf[term];
            }
        }
        dot / (q_norm_sq.sqrt() * doc.norm)
    }
}
