use proptest::prelude::*;
use rk_affine::complex::ChromaticComplex;
use rk_affine::subdivision::geometry::{geometric_point, relative_area, Rational};
use rk_affine::subdivision::svg::{render, SvgStyle};
use rk_affine::subdivision::*;
use rk_affine::{ProcSet, ProcessId, Simplex};
use std::collections::{BTreeMap, BTreeSet};

/// Ordered set partitions of `0..n` by brute force: every map to ranks
/// whose image is an initial segment.
fn brute_force_partitions(n: usize) -> BTreeSet<Vec<Vec<usize>>> {
    let mut out = BTreeSet::new();
    let total = n.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let rank: Vec<usize> = (0..n)
            .map(|_| {
                let r = c % n;
                c /= n;
                r
            })
            .collect();
        let blocks = rank.iter().max().map_or(0, |m| m + 1);
        let parts: Vec<Vec<usize>> = (0..blocks)
            .map(|b| (0..n).filter(|&i| rank[i] == b).map(|i| i + 1).collect())
            .collect();
        if parts.iter().all(|p| !p.is_empty()) {
            out.insert(parts);
        }
    }
    out
}

fn as_ids(p: &OrderedPartition) -> Vec<Vec<usize>> {
    p.blocks()
        .iter()
        .map(|b| b.iter().map(|q| q.get()).collect())
        .collect()
}

#[test]
fn ordered_partitions_match_brute_force() {
    for n in 1..=4 {
        let oracle = brute_force_partitions(n);
        let ours: BTreeSet<_> = enumerate_is_runs(ProcSet::full(n))
            .iter()
            .map(as_ids)
            .collect();
        assert_eq!(ours, oracle, "n = {n}");
        assert_eq!(ordered_partition_count(n), oracle.len() as u128);
    }
    assert_eq!(
        (1..=4)
            .map(|n| brute_force_partitions(n).len())
            .collect::<Vec<_>>(),
        vec![1, 3, 13, 75]
    );
}

#[test]
fn facet_counts_are_powers_of_the_partition_count() {
    for (n, m) in [(1, 3), (2, 1), (2, 3), (3, 1), (3, 2), (4, 1), (4, 2)] {
        let c = chr_iter(n, m, DEFAULT_FACET_BUDGET).unwrap();
        let expected = brute_force_partitions(n).len().pow(m as u32);
        assert_eq!(c.top_facets().count(), expected, "n = {n}, m = {m}");
        assert!(c.is_pure());
    }
}

fn simplices_by_dimension(c: &ChromaticComplex) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for s in c.simplices() {
        *counts.entry(s.dimension()).or_default() += 1;
    }
    counts
}

#[test]
fn subdivisions_have_euler_characteristic_one() {
    for (n, m) in [(2, 2), (3, 1), (3, 2), (4, 1)] {
        let c = chr_iter(n, m, DEFAULT_FACET_BUDGET).unwrap();
        let chi: i64 = simplices_by_dimension(&c)
            .iter()
            .map(|(d, k)| if d % 2 == 0 { *k as i64 } else { -(*k as i64) })
            .sum();
        assert_eq!(chi, 1, "n = {n}, m = {m}");
    }
}

#[test]
fn triangle_subdivision_vertex_and_edge_counts() {
    // Chr s: 3 corners, 2 per side, 3 interior; 13 triangles, 3 * 3 boundary edges.
    let c = chr_iter(3, 1, DEFAULT_FACET_BUDGET).unwrap();
    let counts = simplices_by_dimension(&c);
    assert_eq!(counts[&0], 12);
    assert_eq!(counts[&2], 13);
    assert_eq!(counts[&1], 12 + 13 - 1);
}

/// Every ridge lies in one or two facets; ridges on the boundary of the
/// triangle number three times the edges of a subdivided side.
#[test]
fn subdivisions_are_pseudomanifolds_with_the_right_boundary() {
    for m in 1..=2 {
        let c = chr_iter(3, m, DEFAULT_FACET_BUDGET).unwrap();
        let mut cofaces: BTreeMap<Simplex, usize> = BTreeMap::new();
        for f in c.top_facets() {
            for r in f.faces().filter(|r| r.dimension() == 1) {
                *cofaces.entry(r).or_default() += 1;
            }
        }
        assert!(cofaces.values().all(|&k| k == 1 || k == 2));
        let boundary = cofaces.values().filter(|&&k| k == 1).count();
        assert_eq!(boundary, 3 * 3usize.pow(m as u32), "m = {m}");
    }
}

#[test]
fn geometric_facets_tile_the_triangle() {
    for m in 1..=2 {
        let c = chr_iter(3, m, DEFAULT_FACET_BUDGET).unwrap();
        let mut total = Rational::from_integer(0);
        for f in c.top_facets() {
            let p: Vec<_> = f
                .vertices()
                .iter()
                .map(|v| geometric_point(v, 3).unwrap())
                .collect();
            assert!(p.iter().all(|q| q.is_valid()));
            let a = relative_area(&p[0], &p[1], &p[2]);
            assert_ne!(a, Rational::from_integer(0), "degenerate facet at m = {m}");
            total += if a < Rational::from_integer(0) { -a } else { a };
        }
        assert_eq!(total, Rational::from_integer(1), "m = {m}");
    }
}

#[test]
fn iterating_chr_matches_direct_enumeration() {
    for n in 2..=3 {
        let once = chr_iter(n, 1, DEFAULT_FACET_BUDGET).unwrap();
        let twice = chr(&once).unwrap();
        assert_eq!(
            twice.simplices(),
            chr_iter(n, 2, DEFAULT_FACET_BUDGET).unwrap().simplices()
        );
        let from_simplex = chr(&ChromaticComplex::standard_simplex(n)).unwrap();
        assert_eq!(from_simplex.simplices(), once.simplices());
    }
}

#[test]
fn budget_refuses_large_requests() {
    assert!(chr_iter(4, 4, DEFAULT_FACET_BUDGET).is_err());
    assert!(chr_iter(5, 3, DEFAULT_FACET_BUDGET).is_err());
    assert!(chr_iter(3, 2, 100).is_err());
    assert!(chr_iter(3, 2, 169).is_ok());
}

#[test]
fn svg_draws_every_facet_with_process_colors() {
    let c = chr_iter(3, 1, DEFAULT_FACET_BUDGET).unwrap();
    let svg = render(&c, &SvgStyle::default(), &|_| false, &|_| false).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polygon").count(), 13);
    assert_eq!(svg.matches("<circle").count(), 12);
    for color in ["#d62728", "#1f4fd6", "#ffffff"] {
        assert_eq!(
            svg.matches(&format!("fill=\"{color}\"")).count(),
            4,
            "{color}"
        );
    }
}

fn arb_run(n: usize, m: usize) -> impl Strategy<Value = RunSequence> {
    let per_round = enumerate_is_runs(ProcSet::full(n));
    proptest::collection::vec(proptest::sample::select(per_round), m)
        .prop_map(|rounds| RunSequence::new(rounds).unwrap())
}

fn arb_perm(n: usize) -> impl Strategy<Value = Vec<ProcessId>> {
    Just((1..=n).map(ProcessId::of).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #[test]
    fn views_satisfy_the_snapshot_axioms(run in arb_run(4, 2)) {
        let v = RunViews::new(&run);
        for r in 0..2 {
            for p in run.participants().iter() {
                let sp = v.snapshot(r, p);
                prop_assert!(sp.contains(p));
                for q in run.participants().iter() {
                    let sq = v.snapshot(r, q);
                    prop_assert!(sp.is_subset(sq) || sq.is_subset(sp));
                    if sp.contains(q) {
                        prop_assert!(sq.is_subset(sp));
                    }
                }
            }
        }
    }

    #[test]
    fn permuting_a_run_permutes_its_facet(run in arb_run(3, 2), perm in arb_perm(3)) {
        let map = |s: ProcSet| s.iter().map(|p| perm[p.index()]).collect::<ProcSet>();
        let a = RunViews::new(&run);
        let b = RunViews::new(&run.permute(&perm));
        for p in run.participants().iter() {
            prop_assert_eq!(b.carrier(perm[p.index()]), map(a.carrier(p)));
            for r in 0..2 {
                prop_assert_eq!(b.snapshot(r, perm[p.index()]), map(a.snapshot(r, p)));
            }
        }
    }

    #[test]
    fn carriers_grow_with_views(run in arb_run(4, 2)) {
        let v = RunViews::new(&run);
        for p in run.participants().iter() {
            let c = v.carrier(p);
            prop_assert!(v.snapshot(1, p).is_subset(c));
            let from_views = v.snapshot(1, p).iter().fold(ProcSet::EMPTY, |a, j| a.union(v.snapshot(0, j)));
            prop_assert_eq!(c, from_views);
        }
    }
}
