mod common;

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use proptest::prelude::*;

use common::desk_corpus;
use tessera_core::annotations::{AnnotationStore, HighlightPatch, NewHighlight, NON_KEYWORD};
use tessera_core::corpus::{Corpus, Span};

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(desk_corpus)
}

const LABELS: &[&str] = &["smoke", "crumb", "kin", "tide", "greens"];

#[derive(Clone, Debug)]
enum Op {
    Create {
        doc: usize,
        token: usize,
        len: usize,
        label: usize,
        picks: Vec<usize>,
    },
    Update {
        pick: usize,
        label: Option<usize>,
        picks: Option<Vec<usize>>,
        memo: Option<String>,
    },
    Delete {
        pick: usize,
    },
    Assign {
        pick: usize,
        category: usize,
    },
    Rename {
        pick: usize,
        label: usize,
    },
    DeleteCode {
        pick: usize,
    },
}

fn op() -> impl Strategy<Value = Op> {
    let picks = prop::collection::vec(0usize..8, 0..3);
    prop_oneof![
        4 => (0usize..200, 0usize..40, 0usize..6, 0..LABELS.len(), picks.clone())
            .prop_map(|(doc, token, len, label, picks)| Op::Create { doc, token, len, label, picks }),
        2 => (any::<usize>(), prop::option::of(0..LABELS.len()), prop::option::of(picks), prop::option::of("[a-z ,\"]{0,12}"))
            .prop_map(|(pick, label, picks, memo)| Op::Update { pick, label, picks, memo }),
        1 => any::<usize>().prop_map(|pick| Op::Delete { pick }),
        1 => (any::<usize>(), 0usize..3).prop_map(|(pick, category)| Op::Assign { pick, category }),
        1 => (any::<usize>(), 0..LABELS.len()).prop_map(|(pick, label)| Op::Rename { pick, label }),
        1 => any::<usize>().prop_map(|pick| Op::DeleteCode { pick }),
    ]
}

/// Keyword ids offered for a span, chosen by index modulo the candidates.
fn keywords(corpus: &Corpus, doc_id: &str, span: Span, picks: &[usize]) -> BTreeSet<u32> {
    let doc = corpus.document(doc_id).unwrap();
    let cands = corpus.stem_candidates(doc.slice(span).unwrap());
    if cands.is_empty() {
        return BTreeSet::new();
    }
    picks
        .iter()
        .flat_map(|&p| cands[p % cands.len()].word_ids.clone())
        .collect()
}

fn apply(store: &mut AnnotationStore, op: &Op) -> bool {
    let corpus = corpus();
    let code_ids: Vec<String> = store.user_codes().map(|c| c.id.clone()).collect();
    match op {
        Op::Create {
            doc,
            token,
            len,
            label,
            picks,
        } => {
            let doc = &corpus.documents()[*doc];
            let spans = doc.token_spans.as_ref().unwrap();
            let i = token % spans.len();
            let j = (i + len).min(spans.len() - 1);
            let span = Span::new(spans[i].start, spans[j].end);
            let req = NewHighlight {
                doc_id: doc.id.clone(),
                span,
                code_label: LABELS[*label].into(),
                keywords: keywords(corpus, &doc.id, span, picks),
                memo: String::new(),
            };
            store.create_highlight(corpus, req).is_ok()
        }
        Op::Update {
            pick,
            label,
            picks,
            memo,
        } => {
            if store.highlights.is_empty() {
                return false;
            }
            let h = store.highlights[pick % store.highlights.len()].clone();
            let patch = HighlightPatch {
                code_label: label.map(|l| LABELS[l].to_string()),
                keywords: picks
                    .as_ref()
                    .map(|p| keywords(corpus, &h.doc_id, h.span(), p)),
                memo: memo.clone(),
            };
            store.update_highlight(corpus, &h.id, patch).is_ok()
        }
        Op::Delete { pick } => {
            if store.highlights.is_empty() {
                return false;
            }
            let id = store.highlights[pick % store.highlights.len()].id.clone();
            store.delete_highlight(corpus, &id).is_ok()
        }
        Op::Assign { pick, category } => {
            !code_ids.is_empty()
                && store
                    .assign_category(&code_ids[pick % code_ids.len()], ["a", "b", "c"][*category])
                    .is_ok()
        }
        Op::Rename { pick, label } => {
            !code_ids.is_empty()
                && store
                    .rename_code(&code_ids[pick % code_ids.len()], LABELS[*label])
                    .is_ok()
        }
        Op::DeleteCode { pick } => {
            !code_ids.is_empty() && store.delete_code(&code_ids[pick % code_ids.len()]).is_ok()
        }
    }
}

fn check_invariants(store: &AnnotationStore) -> Result<(), TestCaseError> {
    let corpus = corpus();
    // single ownership
    let mut owners: HashMap<u32, usize> = HashMap::new();
    for code in store.user_codes() {
        for &w in &code.keywords {
            *owners.entry(w).or_default() += 1;
        }
    }
    prop_assert!(owners.values().all(|&n| n == 1));
    for w in 0..corpus.vocabulary().len() as u32 {
        let expected = store
            .user_codes()
            .find(|c| c.keywords.contains(&w))
            .map_or(NON_KEYWORD, |c| c.id.as_str());
        prop_assert_eq!(store.owner_of(w), expected);
    }
    prop_assert!(store.code(NON_KEYWORD).is_some());
    // non-overlap
    for doc in corpus.documents() {
        let spans: Vec<Span> = store
            .highlights_for_doc(&doc.id)
            .map(|h| h.span())
            .collect();
        for (i, a) in spans.iter().enumerate() {
            prop_assert!(spans[i + 1..].iter().all(|b| !a.overlaps(b)));
        }
    }
    // every highlight references an existing code
    for h in &store.highlights {
        prop_assert!(store.code(&h.code_id).is_some());
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mutations_keep_store_invariants(ops in prop::collection::vec(op(), 1..30)) {
        let mut store = AnnotationStore::new();
        for op in &ops {
            let before = store.clone();
            if apply(&mut store, op) {
                prop_assert_eq!(store.version, before.version + 1);
            } else {
                prop_assert_eq!(&store, &before);
            }
            check_invariants(&store)?;
        }
    }

    #[test]
    fn save_load_is_canonical(ops in prop::collection::vec(op(), 1..20)) {
        let mut store = AnnotationStore::new();
        for op in &ops {
            apply(&mut store, op);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.json");
        store.save(&path).unwrap();
        let loaded = AnnotationStore::load(&path).unwrap();
        prop_assert_eq!(loaded.canonical_json(), store.canonical_json());
        prop_assert_eq!(std::fs::read_to_string(&path).unwrap(), store.canonical_json());
        prop_assert_eq!(loaded, store);
    }

    #[test]
    fn export_reproduces_passages(ops in prop::collection::vec(op(), 1..20)) {
        let mut store = AnnotationStore::new();
        for op in &ops {
            apply(&mut store, op);
        }
        let csv_text = store.export_csv_string(corpus()).unwrap();
        let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
        let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
        prop_assert_eq!(rows.len(), store.highlights.len());
        for row in rows {
            let doc = corpus().document(&row[0]).unwrap();
            let span = Span::new(row[2].parse().unwrap(), row[3].parse().unwrap());
            prop_assert_eq!(doc.slice(span).unwrap(), &row[4]);
        }
    }
}
