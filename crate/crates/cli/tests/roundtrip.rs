mod support;

use rand::SeedableRng;

use kanren_cli::parse;
use kanren_core::rel::standard_relations;
use support::{depth, to_disj_conc, Gen};

#[test]
fn printed_scripts_parse_back_identically() {
    let lib = standard_relations();
    let mut gen = Gen::with_nested_vars(rand::rngs::StdRng::seed_from_u64(2024));
    for i in 0..400 {
        let mut s = gen.script(i % 2 == 0);
        if i % 3 == 0 {
            s.run.goals[0] = to_disj_conc(&s.run.goals[0]);
        }
        assert!(depth(&s.run.goals[0]) <= 5);
        let text = s.to_string();
        let back = parse(&text, &lib).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(back, s, "{text}");
        // Whitespace is not significant.
        let spaced = text.replace(' ', "\n  ").replace('(', "( ");
        assert_eq!(parse(&spaced, &lib).unwrap(), s);
    }
}
