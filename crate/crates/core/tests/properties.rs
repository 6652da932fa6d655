use proptest::prelude::*;

use cellwalk::cellular::graph_closure;
use cellwalk::ctqw::{compare_multisets, green_functions, green_multiset, hamiltonian_kboson, PenaltySpec};
use cellwalk::dtqw::support_spectrum_invariant;
use cellwalk::graphio::{parse_edge_list, parse_graph6, permute_graph, write_edge_list, write_graph6, Graph};
use cellwalk::linalg::{char_poly_exact, RationalMatrix};

fn graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let pairs = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
            Graph::from_edges(n, pairs.zip(bits).filter(|(_, b)| *b).map(|(e, _)| e))
        })
    })
}

fn graph_and_perm(max_n: usize) -> impl Strategy<Value = (Graph, Vec<usize>)> {
    graph(max_n).prop_flat_map(|g| {
        let n = g.n();
        (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph6_round_trip(g in graph(40)) {
        let text = write_graph6(&g).unwrap();
        prop_assert_eq!(parse_graph6(&text).unwrap(), g);
    }

    #[test]
    fn edge_list_round_trip(g in graph(20)) {
        prop_assert_eq!(parse_edge_list(&write_edge_list(&g)).unwrap(), g);
    }

    #[test]
    fn charpoly_is_relabelling_invariant((g, pi) in graph_and_perm(9)) {
        let h = permute_graph(&g, &pi).unwrap();
        prop_assert_eq!(char_poly_exact(&RationalMatrix::adjacency(&g)), char_poly_exact(&RationalMatrix::adjacency(&h)));
    }

    #[test]
    fn closure_colors_are_canonical((g, pi) in graph_and_perm(9)) {
        let (c, c2) = (graph_closure(&g), graph_closure(&permute_graph(&g, &pi).unwrap()));
        prop_assert_eq!(c.r(), c2.r());
        for u in 0..g.n() {
            for v in 0..g.n() {
                prop_assert_eq!(c.color(u, v), c2.color(pi[u], pi[v]));
            }
        }
    }

    #[test]
    fn arc_spectrum_is_relabelling_invariant((g, pi) in graph_and_perm(7)) {
        prop_assume!(g.edge_count() > 0);
        let h = permute_graph(&g, &pi).unwrap();
        prop_assert_eq!(support_spectrum_invariant(&g, 3).unwrap(), support_spectrum_invariant(&h, 3).unwrap());
    }

    #[test]
    fn green_multiset_is_relabelling_invariant((g, pi) in graph_and_perm(8), t in 0.1f64..3.0) {
        let h = hamiltonian_kboson(&g, 1, &PenaltySpec::none()).unwrap().h;
        let gm = green_functions(&h, t, 1e-12).unwrap();
        prop_assert!(gm.unitarity_defect() < 1e-9);
        let (a, b) = (green_multiset(&gm, 1e-8), green_multiset(&gm.permuted(&pi), 1e-8));
        prop_assert_eq!(compare_multisets(&a, &b), None);
        prop_assert_eq!(a.total(), g.n() * g.n());
    }
}
