//! Oracles and fixtures shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::fs;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tessera_core::annotations::{AnnotationStore, NewHighlight};
use tessera_core::blockmodel::HierarchicalPartition;
use tessera_core::corpus::{ingest_corpus, Corpus, Span, Tokenizer};
use tessera_core::multinet::{Edge, Layer, LayeredGraph, NodeKind};

pub const DESK: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/desk_corpus.jsonl");

/// Kinds each layer connects, and the kind pairs that may carry edges.
fn layer_kinds(layer: Layer) -> (&'static [usize], &'static [(usize, usize)]) {
    match layer {
        Layer::Text => (&[0, 1], &[(0, 1)]),
        Layer::Metadata => (&[0, 2, 3], &[(0, 2), (2, 3)]),
    }
}

/// Description length recomputed straight from its definition:
/// per level and non-empty layer, `P - F` with
/// `F = sum over block pairs of e_rs ln(e_rs / (e_r e_s))` and
/// `P = B_pairs ln(E + 1) + sum over kinds of N_t ln B_t`.
pub fn oracle_dl(graph: &LayeredGraph, partition: &HierarchicalPartition) -> f64 {
    let n = graph.n_nodes();
    let kind: Vec<usize> = (0..n as u32).map(|v| graph.kind_of(v).index()).collect();
    // local item id of each node entering the current level
    let mut item: Vec<usize> = (0..n as u32).map(|v| graph.local(v)).collect();
    let mut items = graph.counts();
    let mut total = 0.0;
    for level in &partition.levels {
        let mut start = [0usize; 4];
        for k in 1..4 {
            start[k] = start[k - 1] + items[k - 1];
        }
        let block: Vec<usize> = (0..n)
            .map(|v| level.blocks[start[kind[v]] + item[v]] as usize)
            .collect();
        for layer in Layer::ALL {
            let mut e_rs: HashMap<((usize, usize), (usize, usize)), f64> = HashMap::new();
            let mut e_r: HashMap<(usize, usize), f64> = HashMap::new();
            let mut e = 0.0;
            for (u, v, m) in graph.edges(layer) {
                let a = (kind[u as usize], block[u as usize]);
                let b = (kind[v as usize], block[v as usize]);
                let key = if a < b { (a, b) } else { (b, a) };
                *e_rs.entry(key).or_default() += m as f64;
                *e_r.entry(a).or_default() += m as f64;
                *e_r.entry(b).or_default() += m as f64;
                e += m as f64;
            }
            if e == 0.0 {
                continue;
            }
            let mut f = 0.0;
            for (&(a, b), &x) in &e_rs {
                f += x * (x / (e_r[&a] * e_r[&b])).ln();
            }
            let (kinds, pairs) = layer_kinds(layer);
            let b_pairs: usize = pairs
                .iter()
                .map(|&(s, t)| level.counts[s] * level.counts[t])
                .sum();
            let mut p = b_pairs as f64 * (e + 1.0).ln();
            for &k in kinds {
                if level.counts[k] > 0 {
                    p += items[k] as f64 * (level.counts[k] as f64).ln();
                }
            }
            total += p - f;
        }
        item = block;
        items = level.counts;
    }
    total
}

/// All set partitions of `n` items as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(i: usize, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur[i] = b;
            rec(i + 1, max.max(b), cur, out);
        }
    }
    cur[0] = 0;
    rec(1, 0, &mut cur, &mut out);
    out
}

pub fn n_blocks(rgs: &[u32]) -> usize {
    rgs.iter().max().map_or(0, |&m| m as usize + 1)
}

/// Adjusted Rand index of two labelings.
pub fn ari(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: HashMap<(u32, u32), f64> = HashMap::new();
    let mut ra: HashMap<u32, f64> = HashMap::new();
    let mut rb: HashMap<u32, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *ra.entry(x).or_default() += 1.0;
        *rb.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&v| choose2(v)).sum();
    let sa: f64 = ra.values().map(|&v| choose2(v)).sum();
    let sb: f64 = rb.values().map(|&v| choose2(v)).sum();
    let total = choose2(a.len() as f64);
    let expected = sa * sb / total;
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Text-only bipartite graph from a word-by-document multiplicity matrix.
pub fn bipartite(matrix: &[Vec<u64>]) -> LayeredGraph {
    let w = matrix.len();
    let d = matrix.first().map_or(0, Vec::len);
    let mut edges = Vec::new();
    for (i, row) in matrix.iter().enumerate() {
        for (j, &m) in row.iter().enumerate() {
            if m > 0 {
                edges.push(Edge::new(i as u32, (w + j) as u32, m));
            }
        }
    }
    LayeredGraph::new([w, d, 0, 0], edges, vec![]).unwrap()
}

/// Random two-layer graph with every kind present.
pub fn random_multilayer(rng: &mut ChaCha8Rng, max_per_kind: usize) -> LayeredGraph {
    let counts = [
        rng.gen_range(2..=max_per_kind),
        rng.gen_range(2..=max_per_kind),
        rng.gen_range(1..=max_per_kind.min(4)),
        rng.gen_range(1..=max_per_kind.min(3)),
    ];
    let off = [
        0,
        counts[0],
        counts[0] + counts[1],
        counts[0] + counts[1] + counts[2],
    ];
    let node = |k: usize, i: usize| (off[k] + i) as u32;
    let mut text = Vec::new();
    for w in 0..counts[0] {
        for d in 0..counts[1] {
            if rng.gen_bool(0.5) {
                text.push(Edge::new(node(0, w), node(1, d), rng.gen_range(1..=3)));
            }
        }
    }
    let mut meta = Vec::new();
    for w in 0..counts[0] {
        let c = rng.gen_range(0..counts[2]);
        meta.push(Edge::new(node(0, w), node(2, c), rng.gen_range(1..=2)));
    }
    for c in 0..counts[2] {
        let k = rng.gen_range(0..counts[3]);
        meta.push(Edge::new(node(2, c), node(3, k), 1));
    }
    LayeredGraph::new(counts, text, meta).unwrap()
}

/// Random type-pure labels with at most `max_blocks` blocks per kind,
/// compacted to 0..B.
pub fn random_labels(rng: &mut ChaCha8Rng, graph: &LayeredGraph, max_blocks: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(graph.n_nodes());
    for kind in NodeKind::ALL {
        let n = graph.count(kind);
        let b = rng.gen_range(1..=n.clamp(1, max_blocks));
        let mut raw: Vec<u32> = (0..n)
            .map(|i| {
                if i < b {
                    i as u32
                } else {
                    rng.gen_range(0..b as u32)
                }
            })
            .collect();
        raw.shuffle(rng);
        out.extend(raw);
    }
    out
}

/// One JSON line per document with explicit tokens and a body made of the
/// same tokens separated by spaces.
pub fn token_jsonl(docs: &[Vec<String>]) -> String {
    let mut s = String::new();
    for (i, toks) in docs.iter().enumerate() {
        let rec = serde_json::json!({"id": format!("doc{i:05}"), "title": format!("Document {i}"), "body": toks.join(" ")});
        s.push_str(&rec.to_string());
        s.push('\n');
    }
    s
}

/// Corpus built from whitespace bodies, no stopwords, no stemming.
pub fn token_corpus(docs: &[Vec<String>]) -> Corpus {
    let tok = Tokenizer::with_stopwords(Default::default(), 1, false);
    ingest_corpus(token_jsonl(docs).as_bytes(), tok).unwrap()
}

pub fn desk_corpus() -> Corpus {
    ingest_corpus(
        std::io::BufReader::new(fs::File::open(DESK).unwrap()),
        Tokenizer::default(),
    )
    .unwrap()
}

/// Random highlights with keywords taken from each passage, plus some
/// category assignments. Rejected requests are skipped.
pub fn coding_script(
    corpus: &Corpus,
    store: &mut AnnotationStore,
    rng: &mut ChaCha8Rng,
    labels: &[&str],
) -> usize {
    let docs = corpus.documents();
    let mut accepted = 0;
    for _ in 0..rng.gen_range(1..=12) {
        let doc = &docs[rng.gen_range(0..docs.len())];
        let spans = doc.token_spans.as_ref().unwrap();
        if spans.is_empty() {
            continue;
        }
        let i = rng.gen_range(0..spans.len());
        let j = (i + rng.gen_range(0..6)).min(spans.len() - 1);
        let span = Span::new(spans[i].start, spans[j].end);
        let candidates = corpus.stem_candidates(doc.slice(span).unwrap());
        let mut keywords = BTreeSet::new();
        for _ in 0..rng.gen_range(0..=2) {
            keywords.extend(&candidates[rng.gen_range(0..candidates.len())].word_ids);
        }
        let req = NewHighlight {
            doc_id: doc.id.clone(),
            span,
            code_label: labels[rng.gen_range(0..labels.len())].to_string(),
            keywords,
            memo: format!("note {i}, \"quoted\"\nsecond line"),
        };
        if store.create_highlight(corpus, req).is_ok() {
            accepted += 1;
        }
    }
    let code_ids: Vec<String> = store.user_codes().map(|c| c.id.clone()).collect();
    for id in code_ids {
        if rng.gen_bool(0.4) {
            store
                .assign_category(&id, ["theme a", "theme b"][rng.gen_range(0..2)])
                .unwrap();
        }
    }
    accepted
}
