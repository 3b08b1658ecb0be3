//! Random and cluster-ranked document samples, and the pruned word tree.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotations::AnnotationStore;
use crate::blockmodel::{BlockModelError, ExpandedPartition};
use crate::corpus::Vocabulary;
use crate::multinet::{NodeKind, TextLayer};

pub const DEFAULT_CLUSTER_SAMPLE: usize = 30;
pub const TOP_WORDS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplerError {
    #[error("requested {requested} documents but only {available} are available")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("sample size must be at least 1")]
    EmptyRequest,
    #[error("unknown {kind} {id}")]
    NotFound { kind: &'static str, id: String },
    #[error(transparent)]
    BlockModel(#[from] BlockModelError),
}

/// `n` distinct ids drawn uniformly without replacement, in draw order.
pub fn random_sample(
    doc_ids: &[String],
    n: usize,
    seed: u64,
    exclude: Option<&HashSet<String>>,
) -> Result<Vec<String>, SamplerError> {
    if n == 0 {
        return Err(SamplerError::EmptyRequest);
    }
    let pool: Vec<&String> = doc_ids
        .iter()
        .filter(|id| exclude.is_none_or(|ex| !ex.contains(*id)))
        .collect();
    if n > pool.len() {
        return Err(SamplerError::SampleTooLarge {
            requested: n,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub doc_id: String,
    pub probability: f64,
}

/// Share of each model document's tokens that fall in word cluster `cluster`.
pub fn cluster_probabilities(
    text: &TextLayer,
    partition: &ExpandedPartition,
    cluster: u32,
    level: usize,
) -> Result<Vec<f64>, SamplerError> {
    let words = partition.kind_slice(NodeKind::Word, level)?;
    let n_clusters = partition.block_counts(level)?[NodeKind::Word.index()];
    if cluster as usize >= n_clusters {
        return Err(SamplerError::NotFound {
            kind: "word cluster",
            id: cluster.to_string(),
        });
    }
    Ok((0..text.n_docs())
        .map(|d| {
            let mut hit = 0u64;
            let mut len = 0u64;
            for &(w, m) in text.doc_words(d) {
                len += m;
                if words[w as usize] == cluster {
                    hit += m;
                }
            }
            if len == 0 {
                0.0
            } else {
                hit as f64 / len as f64
            }
        })
        .collect())
}

/// Top `k` documents by probability of the word cluster, descending, ties
/// by ascending id; documents with probability zero are left out.
pub fn sample_by_word_cluster(
    text: &TextLayer,
    partition: &ExpandedPartition,
    cluster: u32,
    level: usize,
    k: usize,
) -> Result<Vec<RankedDoc>, SamplerError> {
    let probs = cluster_probabilities(text, partition, cluster, level)?;
    let mut ranked: Vec<RankedDoc> = probs
        .into_iter()
        .enumerate()
        .filter(|&(_, p)| p > 0.0)
        .map(|(d, p)| RankedDoc {
            doc_id: text.doc_ids()[d].clone(),
            probability: p,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.probability
            .total_cmp(&a.probability)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    ranked.truncate(k);
    Ok(ranked)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeKeyword {
    pub word_id: u32,
    pub term: String,
    pub frequency: u64,
    pub code_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordTreeNode {
    pub level: usize,
    pub cluster_id: u32,
    /// Selected-code keywords inside this cluster, most frequent first.
    pub keywords: Vec<TreeKeyword>,
    /// The most frequent member words, for hover display.
    pub top_words: Vec<String>,
    pub children: Vec<WordTreeNode>,
}

/// Members of `list` ordered by corpus frequency descending, then id.
fn by_frequency(vocab: &Vocabulary, list: &mut [u32]) {
    list.sort_by(|&a, &b| vocab.frequency(b).cmp(&vocab.frequency(a)).then(a.cmp(&b)));
}

/// Word clusters from the top level down, keeping only clusters whose
/// subtree holds a keyword of one of the selected codes.
pub fn pruned_word_tree(
    vocab: &Vocabulary,
    partition: &ExpandedPartition,
    annotations: &AnnotationStore,
    code_ids: &[String],
) -> Result<Vec<WordTreeNode>, SamplerError> {
    let mut owner: BTreeMap<u32, String> = BTreeMap::new();
    for id in code_ids {
        let code = annotations.code(id).ok_or_else(|| SamplerError::NotFound {
            kind: "code",
            id: id.clone(),
        })?;
        for &w in &code.keywords {
            owner.insert(w, code.id.clone());
        }
    }
    let depth = partition.depth();
    if owner.is_empty() || depth == 0 {
        return Ok(Vec::new());
    }
    let words: Vec<&[u32]> = (0..depth)
        .map(|l| partition.kind_slice(NodeKind::Word, l))
        .collect::<Result<_, _>>()?;
    // marked[l] = clusters at level l containing a selected keyword
    let mut marked: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); depth];
    for &w in owner.keys() {
        if w as usize >= words[0].len() {
            continue;
        }
        for l in 0..depth {
            marked[l].insert(words[l][w as usize]);
        }
    }
    let mut members: Vec<BTreeMap<u32, Vec<u32>>> = vec![BTreeMap::new(); depth];
    let mut children: Vec<BTreeMap<u32, BTreeSet<u32>>> = vec![BTreeMap::new(); depth];
    for w in 0..words[0].len() {
        for l in 0..depth {
            let c = words[l][w];
            if marked[l].contains(&c) {
                members[l].entry(c).or_default().push(w as u32);
                if l > 0 {
                    children[l].entry(c).or_default().insert(words[l - 1][w]);
                }
            }
        }
    }

    fn build(
        l: usize,
        c: u32,
        vocab: &Vocabulary,
        owner: &BTreeMap<u32, String>,
        members: &mut [BTreeMap<u32, Vec<u32>>],
        children: &[BTreeMap<u32, BTreeSet<u32>>],
        marked: &[BTreeSet<u32>],
    ) -> WordTreeNode {
        let mut list = members[l].remove(&c).unwrap_or_default();
        by_frequency(vocab, &mut list);
        let mut keywords: Vec<u32> = list
            .iter()
            .copied()
            .filter(|w| owner.contains_key(w))
            .collect();
        by_frequency(vocab, &mut keywords);
        let kids = if l == 0 {
            Vec::new()
        } else {
            children[l]
                .get(&c)
                .map(|set| {
                    set.iter()
                        .filter(|k| marked[l - 1].contains(k))
                        .map(|&k| build(l - 1, k, vocab, owner, members, children, marked))
                        .collect()
                })
                .unwrap_or_default()
        };
        WordTreeNode {
            level: l,
            cluster_id: c,
            keywords: keywords
                .into_iter()
                .map(|w| TreeKeyword {
                    word_id: w,
                    term: vocab.term(w).unwrap_or_default().to_string(),
                    frequency: vocab.frequency(w),
                    code_id: owner[&w].clone(),
                })
                .collect(),
            top_words: list
                .iter()
                .take(TOP_WORDS)
                .map(|&w| vocab.term(w).unwrap_or_default().to_string())
                .collect(),
            children: kids,
        }
    }

    let top = depth - 1;
    let roots: Vec<u32> = marked[top].iter().copied().collect();
    Ok(roots
        .into_iter()
        .map(|c| build(top, c, vocab, &owner, &mut members, &children, &marked))
        .collect())
}
