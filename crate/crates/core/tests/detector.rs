mod common;

use common::*;
use grammargate::detector::{decide, ConnectorFlags, ConnectorHit, RelationCounts};
use grammargate::types::{DEFAULT_COMPLEX_CONNECTORS, DEFAULT_COMPOUND_CONNECTORS};
use grammargate::{classify_type, match_connectors, ConnectorCatalogue, LabelPolicy, SentenceType};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn flags(compound: bool, complex: bool) -> ConnectorFlags {
    let hit = |p: &str| ConnectorHit { pattern: p.into(), offset: 0 };
    ConnectorFlags {
        compound_hits: if compound { vec![hit(", and ")] } else { vec![] },
        complex_hits: if complex { vec![hit("because ")] } else { vec![] },
    }
}

#[test]
fn decision_table_all_36_cases() {
    let mut n = 0;
    for s in 0..3 {
        for o in 0..3 {
            for (c, x) in [(false, false), (true, false), (false, true), (true, true)] {
                let counts = RelationCounts { subjects: s, objects: o, compounds: 0 };
                let d = decide(counts, flags(c, x));
                assert_eq!(d.sentence_type, oracle_type(s, o, c, x), "s={s} o={o} compound={c} complex={x}");
                n += 1;
            }
        }
    }
    assert_eq!(n, 36);
}

#[test]
fn decision_table_through_parses() {
    let policy = LabelPolicy::default();
    let cat = ConnectorCatalogue::default();
    for s in 0..3 {
        for o in 0..3 {
            for (c, x) in [(false, false), (true, false), (false, true), (true, true)] {
                let text = clause_text("The cat chased the dog", c, x);
                let p = synthetic_parse("1", &text, s, o);
                assert_eq!(classify_type(&p, &policy, &cat).sentence_type, oracle_type(s, o, c, x), "{text} s={s} o={o}");
            }
        }
    }
}

#[test]
fn fired_rule_is_reported_in_the_trace() {
    let d = decide(RelationCounts { subjects: 1, objects: 1, compounds: 0 }, flags(false, true));
    assert_eq!(d.rule, 4);
    let fired: Vec<_> = d.trace.iter().filter(|r| r.fired).collect();
    assert_eq!(fired.len(), 1);
    assert_eq!(fired[0].rule, 4);
    assert!(d.trace.iter().take(3).all(|r| !r.fired));
}

#[test]
fn boundary_traps() {
    let cat = ConnectorCatalogue::default();
    assert!(match_connectors("Show me the way.", &cat).is_empty());
    assert!(match_connectors("Yours sincerely.", &cat).is_empty());
    assert!(match_connectors("Give it to whomever asks.", &cat).complex_hits.is_empty());
    let f = match_connectors("Since he left, we wept.", &cat);
    assert_eq!(f.complex_hits.len(), 1);
    assert_eq!(f.complex_hits[0].offset, 0);
}

#[test]
fn oracle_agreement_on_10k_seeded_sentences() {
    let cat = ConnectorCatalogue::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let s = random_sentence(&mut rng);
        assert_eq!(
            match_connectors(&s, &cat),
            brute_force_scan(&s, &DEFAULT_COMPOUND_CONNECTORS, &DEFAULT_COMPLEX_CONNECTORS),
            "{s:?}"
        );
    }
}

proptest! {
    #[test]
    fn oracle_agreement_on_arbitrary_text(s in "[ a-zA-Z,;.'-]{0,60}") {
        let cat = ConnectorCatalogue::default();
        prop_assert_eq!(
            match_connectors(&s, &cat),
            brute_force_scan(&s, &DEFAULT_COMPOUND_CONNECTORS, &DEFAULT_COMPLEX_CONNECTORS)
        );
    }

    #[test]
    fn oracle_agreement_with_custom_catalogues(
        compound in proptest::collection::btree_set("[a-c ,]{1,3}", 1..4),
        complex in proptest::collection::btree_set("[b-d ;]{1,3}", 1..4),
        s in "[a-dA-D ,;]{0,40}",
    ) {
        let complex: Vec<String> = complex.into_iter().filter(|p| !compound.contains(p)).collect();
        let compound: Vec<String> = compound.into_iter().collect();
        prop_assume!(!complex.is_empty());
        let cat = ConnectorCatalogue::new(&compound, &complex).unwrap();
        let c: Vec<&str> = compound.iter().map(String::as_str).collect();
        let x: Vec<&str> = complex.iter().map(String::as_str).collect();
        prop_assert_eq!(match_connectors(&s, &cat), brute_force_scan(&s, &c, &x));
    }

    #[test]
    fn more_arguments_never_untype(s in 0usize..4, o in 0usize..4, ds in 0usize..3, dobj in 0usize..3,
                                   c in any::<bool>(), x in any::<bool>()) {
        let before = decide(RelationCounts { subjects: s, objects: o, compounds: 0 }, flags(c, x)).sentence_type;
        let after = decide(RelationCounts { subjects: s + ds, objects: o + dobj, compounds: 0 }, flags(c, x)).sentence_type;
        if before.is_typed() {
            prop_assert_eq!(before, after);
        }
    }

    #[test]
    fn adding_a_connector_never_untypes(s in 1usize..4, o in 1usize..4, c in any::<bool>(), x in any::<bool>()) {
        let counts = RelationCounts { subjects: s, objects: o, compounds: 0 };
        prop_assert!(decide(counts, flags(c, x)).sentence_type.is_typed());
        prop_assert!(decide(counts, flags(true, x)).sentence_type.is_typed());
        prop_assert!(decide(counts, flags(c, true)).sentence_type.is_typed());
        prop_assert_eq!(decide(counts, flags(true, true)).sentence_type, SentenceType::CompoundComplex);
    }
}
