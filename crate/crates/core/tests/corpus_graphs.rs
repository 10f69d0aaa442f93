use csi_graphlab::corpus::get_example;
use csi_graphlab::objects::GroundTruth;
use csi_graphlab::DirectedGraph;

fn edges(g: &DirectedGraph) -> String {
    g.edges()
        .iter()
        .map(|(a, b)| format!("{a}->{b}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// (name, union, [(regime, descriptive, physical, counterfactual, ident)])
type Expected = (&'static str, &'static str, &'static [(&'static str, &'static str, &'static str, &'static str, &'static str)]);

const EXPECTED: &[Expected] = &[
    ("intro", "R->T T->Y", &[
        ("0", "R->T", "R->T T->Y", "R->T", "R->T"),
        ("1", "R->T T->Y", "R->T T->Y", "R->T T->Y", "R->T T->Y"),
    ]),
    ("intro-mediator", "M->T R->M T->Y", &[
        ("0", "R->M", "M->T R->M T->Y", "R->M", "R->M"),
        ("1", "M->T R->M T->Y", "M->T R->M T->Y", "M->T R->M T->Y", "M->T R->M T->Y"),
    ]),
    ("non-markov(1/3)", "X->R X->Y Y->R", &[
        ("a0", "X->R X->Y Y->R", "X->R X->Y Y->R", "X->R X->Y Y->R", "X->R X->Y Y->R"),
        ("a1", "X->R X->Y Y->R", "X->R X->Y Y->R", "X->R X->Y Y->R", "X->R X->Y Y->R"),
        ("b0", "X->R Y->R", "X->R X->Y Y->R", "X->R X->Y Y->R", "X->R X->Y Y->R"),
        ("b1", "X->R Y->R", "X->R X->Y Y->R", "X->R X->Y Y->R", "X->R X->Y Y->R"),
    ]),
    ("exo-gate", "R->Y X->Y", &[
        ("0", "R->Y", "R->Y", "R->Y", "R->Y"),
        ("1", "R->Y X->Y", "R->Y X->Y", "R->Y X->Y", "R->Y X->Y"),
    ]),
    ("cf-example", "R->Y X->R", &[
        ("0", "R->Y X->R", "R->Y X->R", "R->Y X->R", "R->Y X->R"),
        ("1", "R->Y X->R", "R->Y X->R", "R->Y X->R X->Y", "R->Y X->R"),
    ]),
    ("not-strong-faithful", "R->X X->Y", &[
        ("0", "R->X", "R->X X->Y", "R->X", "R->X"),
        ("1", "R->X", "R->X X->Y", "R->X", "R->X"),
    ]),
    ("p1-limit", "", &[("0", "", "", "", "")]),
    ("fig1-nochange-overlap", "C->X X->Y", &[
        ("0", "C->X", "C->X X->Y", "C->X", "C->X"),
        ("1", "C->X X->Y", "C->X X->Y", "C->X X->Y", "C->X X->Y"),
    ]),
    ("fig1-change-overlap", "C->X C->Y X->Y", &[
        ("0", "C->X C->Y", "C->X C->Y", "C->X C->Y", "C->X C->Y"),
        ("1", "C->X C->Y X->Y", "C->X C->Y X->Y", "C->X C->Y X->Y", "C->X C->Y X->Y"),
    ]),
    ("fig1-nochange-gated", "C->X X->Y", &[
        ("0", "C->X", "C->X X->Y", "C->X", "C->X"),
        ("1", "C->X X->Y", "C->X X->Y", "C->X X->Y", "C->X X->Y"),
    ]),
    ("fig1-change-gated", "C->X X->Y", &[
        ("0", "C->X", "C->X", "C->X", "C->X"),
        ("1", "C->X X->Y", "C->X X->Y", "C->X X->Y", "C->X X->Y"),
    ]),
];

#[test]
fn every_fixture_matches_its_expected_graphs() {
    for (name, union, regimes) in EXPECTED {
        let gt = GroundTruth::new(&get_example(name).unwrap()).unwrap();
        assert_eq!(edges(gt.union()), *union, "{name} union");
        assert_eq!(gt.regime_labels().len(), regimes.len(), "{name} regimes");
        for (r, d, p, cf, id) in *regimes {
            let rv = gt.regime(r).unwrap();
            assert_eq!(edges(&gt.descriptive(rv)), *d, "{name} descriptive {r}");
            assert_eq!(edges(&gt.physical(rv)), *p, "{name} physical {r}");
            assert_eq!(edges(&gt.counterfactual(rv).unwrap().0), *cf, "{name} counterfactual {r}");
            assert_eq!(edges(&gt.ident(rv)), *id, "{name} ident {r}");
        }
    }
}

#[test]
fn mechanism_graph_keeps_off_support_arguments() {
    let gt = GroundTruth::new(&get_example("cf-example").unwrap()).unwrap();
    assert!(gt.mechanism().contains_edge("X", "Y"));
    assert!(!gt.union().contains_edge("X", "Y"));
    let gt = GroundTruth::new(&get_example("p1-limit").unwrap()).unwrap();
    assert_eq!(edges(&gt.mechanism()), "R->T T->Y");
}
