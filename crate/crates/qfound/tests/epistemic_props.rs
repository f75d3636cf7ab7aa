use proptest::prelude::*;
use qfound::epistemic::*;

const AGENTS: [&str; 3] = ["A", "B", "C"];

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = prop::sample::select(vec!["p", "q", "r"]).prop_map(Formula::atom);
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::negate),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
            (prop::sample::select(AGENTS.to_vec()), inner).prop_map(|(a, b)| Formula::knows(a, b)),
        ]
    })
}

fn seed_line() -> impl Strategy<Value = String> {
    (any::<bool>(), formula()).prop_map(|(taut, f)| format!("seed s {} {f}\n", if taut { "tautology" } else { "announcement" }))
}

fn header() -> impl Strategy<Value = String> {
    prop::collection::vec((0usize..3, 0usize..3), 0..4).prop_map(|edges| {
        let mut s: String = AGENTS.iter().map(|a| format!("agent {a} -\n")).collect();
        for (i, j) in edges {
            s.push_str(&format!("trust {} {}\n", AGENTS[i], AGENTS[j]));
        }
        s
    })
}

const DEPTH: usize = 12;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn formulas_survive_display_and_parse(f in formula()) {
        prop_assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn closure_grows_with_seeds(head in header(), seeds in prop::collection::vec(seed_line(), 1..4), extra in seed_line()) {
        let small_text = format!("{head}{}", seeds.concat());
        let big_text = format!("{small_text}{extra}");
        let small = derive_closure(&KnowledgeBase::parse(&small_text, TrustMode::Plain).unwrap(), DEPTH).unwrap();
        let big = derive_closure(&KnowledgeBase::parse(&big_text, TrustMode::Plain).unwrap(), DEPTH).unwrap();
        prop_assume!(small.fixpoint && big.fixpoint);
        for f in &small.formulas {
            prop_assert!(big.contains(f), "{} lost after adding {}", f, extra);
        }
    }

    #[test]
    fn closures_and_traces_are_deterministic(head in header(), seeds in prop::collection::vec(seed_line(), 1..5)) {
        let kb = KnowledgeBase::parse(&format!("{head}{}", seeds.concat()), TrustMode::Plain).unwrap();
        let a = derive_closure(&kb, DEPTH).unwrap();
        let b = derive_closure(&kb, DEPTH).unwrap();
        prop_assert_eq!(&a.formulas, &b.formulas);
        prop_assert_eq!(&a.contradictions, &b.contradictions);
        let all: Vec<usize> = (0..a.formulas.len()).collect();
        prop_assert_eq!(a.trace_for(&all), b.trace_for(&all));
    }

    #[test]
    fn every_derived_trace_checks(head in header(), seeds in prop::collection::vec(seed_line(), 1..5)) {
        let kb = KnowledgeBase::parse(&format!("{head}{}", seeds.concat()), TrustMode::Plain).unwrap();
        let c = derive_closure(&kb, DEPTH).unwrap();
        for i in 0..c.formulas.len() {
            let t = c.trace_for(&[i]);
            prop_assert_eq!(&t.steps.last().unwrap().conclusion, &c.formulas[i]);
            if let Err(e) = check_trace(&kb, &t) {
                return Err(TestCaseError::fail(format!("{e:?}\n{}", t.render())));
            }
        }
        for k in &c.contradictions {
            prop_assert!(check_trace(&kb, &c.trace_for(&[k.positive, k.negative])).is_ok());
        }
    }
}
