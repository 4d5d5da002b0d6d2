mod common;

use std::time::{Duration, Instant};

use common::*;
use grammargate::ingest::{self, IngestError, ParserAdapterConfig};
use grammargate::{DependencyArc, LabelPolicy, ParsedSentence, Token};
use proptest::prelude::*;

fn sentence_strategy() -> impl Strategy<Value = ParsedSentence> {
    (1usize..8)
        .prop_flat_map(|n| {
            let words = proptest::collection::vec("[A-Za-z][a-z]{0,6}", n);
            let heads = proptest::collection::vec(0usize..=n, n);
            let labels = proptest::collection::vec(
                prop::sample::select(vec!["nsubj", "dobj", "det", "amod", "nsubjpass", "pobj", "compound", "advcl"]),
                n,
            );
            (Just(n), words, heads, labels, "[0-9a-z_-]{1,8}")
        })
        .prop_map(|(n, words, heads, labels, id)| {
            let policy = LabelPolicy::default();
            let tokens: Vec<Token> = words.iter().enumerate().map(|(i, w)| Token::new(i + 1, w.clone())).collect();
            let mut root_taken = false;
            let mut arcs = Vec::new();
            for d in 1..=n {
                let mut h = heads[d - 1];
                if h == d || (h == 0 && root_taken) {
                    h = if d == 1 { 2.min(n) } else { 1 };
                }
                if h == d {
                    continue;
                }
                root_taken |= h == 0;
                let label = if h == 0 { "root" } else { labels[d - 1] };
                arcs.push(DependencyArc::new(h, d, label, &policy).unwrap());
            }
            ParsedSentence::new(id, words.join(" "), tokens, arcs).unwrap()
        })
}

proptest! {
    #[test]
    fn conllu_round_trip(sentences in proptest::collection::vec(sentence_strategy(), 0..6)) {
        let text = ingest::write_conllu(&sentences);
        let back = ingest::read_conllu(text.as_bytes(), &LabelPolicy::default()).unwrap();
        prop_assert_eq!(back, sentences);
    }

    #[test]
    fn tsv_concatenation_preserves_rows(
        a in proptest::collection::vec(("[A-Z][a-z ]{0,20}\\.", any::<bool>()), 1..20),
        b in proptest::collection::vec(("[A-Z][a-z ]{0,20}\\.", any::<bool>()), 1..20),
    ) {
        let render = |rows: &[(String, bool)]| rows.iter().map(|(t, l)| format!("{t}\t{}\n", u8::from(*l))).collect::<String>();
        let read = |s: &str| ingest::read_cola_tsv(s.as_bytes()).unwrap().examples
            .into_iter().map(|e| (e.text, e.acceptable)).collect::<Vec<_>>();
        let joined = read(&(render(&a) + &render(&b)));
        let mut separate = read(&render(&a));
        separate.extend(read(&render(&b)));
        prop_assert_eq!(joined, separate);
    }
}

#[test]
fn table_one_sentence_reads_with_expected_relations() {
    let conllu = "\
# sent_id = t1
# text = The professor talked us into a stupor.
1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_
2\tprofessor\tprofessor\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\ttalked\ttalk\tVERB\t_\t_\t0\tROOT\t_\t_
4\tus\twe\tPRON\t_\t_\t3\tdobj\t_\t_
5\tinto\tinto\tADP\t_\t_\t3\tprep\t_\t_
6\ta\ta\tDET\t_\t_\t7\tdet\t_\t_
7\tstupor\tstupor\tNOUN\t_\t_\t5\tpobj\t_\t_
8\t.\t.\tPUNCT\t_\t_\t3\tpunct\t_\t_
";
    let p = ingest::read_conllu(conllu.as_bytes(), &LabelPolicy::default()).unwrap();
    assert_eq!(p.len(), 1);
    let counts = grammargate::count_relations(&p[0], &LabelPolicy::default());
    assert_eq!((counts.subjects, counts.objects), (1, 2));
    assert_eq!(p[0].arcs().iter().find(|a| a.is_root()).unwrap().label, "root");
}

fn adapter(mode: &str, timeout_ms: u64, batch: usize) -> ParserAdapterConfig {
    ParserAdapterConfig::new(python_cmd("fake_parser.py", mode), Duration::from_millis(timeout_ms), batch).unwrap()
}

#[test]
fn external_parser_pairs_outputs_by_position() {
    let texts: Vec<String> = (0..7).map(|i| format!("Dog{i} chased cats{i} today.")).collect();
    let parsed = ingest::parse_external(&texts, &adapter("ok", 20_000, 3), &LabelPolicy::default()).unwrap();
    assert_eq!(parsed.len(), 7);
    for (i, p) in parsed.iter().enumerate() {
        assert_eq!(p.id(), (i + 1).to_string());
        assert_eq!(p.text(), texts[i]);
        assert_eq!(p.tokens()[0].surface, format!("Dog{i}"));
    }
}

#[test]
fn external_parser_timeout() {
    let start = Instant::now();
    let r = ingest::parse_external(&["A b.".into()], &adapter("sleep", 500, 8), &LabelPolicy::default());
    assert!(matches!(r, Err(IngestError::ParserTimeout(_))), "{r:?}");
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn external_parser_crash_and_count_mismatch() {
    let texts = vec!["A b.".to_string(), "C d.".to_string()];
    let r = ingest::parse_external(&texts, &adapter("crash", 20_000, 8), &LabelPolicy::default());
    assert!(matches!(r, Err(IngestError::ParserCrash(Some(3)))), "{r:?}");
    let r = ingest::parse_external(&texts, &adapter("short", 20_000, 8), &LabelPolicy::default());
    assert!(matches!(r, Err(IngestError::CountMismatch { expected: 2, got: 1 })), "{r:?}");
}

#[test]
fn malformed_conllu_reports_line() {
    let bad = "1\tA\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\tx\tdep\t_\t_\n";
    match ingest::read_conllu(bad.as_bytes(), &LabelPolicy::default()) {
        Err(IngestError::MalformedBlock { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}
