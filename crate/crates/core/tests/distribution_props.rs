use proptest::prelude::*;

use stateful_rrm::distribution::{
    product_dist, w1, w1_aligned, w1_scalar, Component, Distribution, MixtureDistribution, Population,
    ScalarPointMass, StatePoint,
};
use stateful_rrm::losses::Classifier;

fn pop(features: Vec<f64>, p: usize, labels: &[f64]) -> Population {
    Population::uniform(features, p, labels.to_vec()).unwrap()
}

/// Every permutation of `0..n` (Heap's algorithm).
fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// Exact W1 between two equal-mass atom lists by trying every assignment.
fn brute_force_w1(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let n = a.len();
    let dist = |x: (f64, f64), y: (f64, f64)| ((x.0 - y.0).powi(2) + (x.1 - y.1).powi(2)).sqrt();
    permutations(n)
        .iter()
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| dist(a[i], b[j])).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Exact W1 on the line: integral of |F - G| over weighted atoms.
fn cdf_w1(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64)> = a.iter().map(|&(x, w)| (x, w)).chain(b.iter().map(|&(x, w)| (x, -w))).collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for k in 0..events.len() {
        diff += events[k].1;
        if k + 1 < events.len() {
            total += diff.abs() * (events[k + 1].0 - events[k].0);
        }
    }
    total
}

fn setup() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<bool>)> {
    (1usize..6, 1usize..4).prop_flat_map(|(n, p)| {
        (
            Just(n),
            Just(p),
            prop::collection::vec(-10.0..10.0f64, n * p),
            prop::collection::vec(-10.0..10.0f64, n * p),
            prop::collection::vec(-10.0..10.0f64, n * p),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn scalar_metric_axioms(a in 1.0..100.0f64, b in 1.0..100.0f64, c in 1.0..100.0f64) {
        let (a, b, c) = (ScalarPointMass::new(a).unwrap(), ScalarPointMass::new(b).unwrap(), ScalarPointMass::new(c).unwrap());
        prop_assert_eq!(w1_scalar(a, b), w1_scalar(b, a));
        prop_assert!(w1_scalar(a, b) >= 0.0);
        prop_assert_eq!(w1_scalar(a, a), 0.0);
        prop_assert_eq!(w1_scalar(a, b) == 0.0, a.value == b.value);
        prop_assert!(w1_scalar(a, c) <= w1_scalar(a, b) + w1_scalar(b, c) + 1e-12);
    }

    #[test]
    fn aligned_metric_axioms((n, p, fa, fb, fc, ys) in setup()) {
        let labels: Vec<f64> = ys.iter().map(|&y| if y { 1.0 } else { -1.0 }).collect();
        let (a, b, c): (Distribution, Distribution, Distribution) =
            (pop(fa, p, &labels).into(), pop(fb, p, &labels).into(), pop(fc, p, &labels).into());
        let ab = w1_aligned(&a, &b).unwrap();
        prop_assert_eq!(ab, w1_aligned(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(w1_aligned(&a, &a).unwrap(), 0.0);
        let scale = 1.0 + ab;
        prop_assert!(w1_aligned(&a, &c).unwrap() <= ab + w1_aligned(&b, &c).unwrap() + 1e-12 * scale);
        prop_assert!(n >= 1);
    }

    #[test]
    fn product_metric_axioms((_n, p, fa, fb, fc, ys) in setup(), t in prop::collection::vec(-5.0..5.0f64, 9)) {
        let labels: Vec<f64> = ys.iter().map(|&y| if y { 1.0 } else { -1.0 }).collect();
        let state = |f: Vec<f64>, k: usize| StatePoint::new(
            pop(f, p, &labels).into(),
            Classifier::unconstrained(t[3 * k..3 * k + 3].to_vec()),
        );
        let (a, b, c) = (state(fa, 0), state(fb, 1), state(fc, 2));
        let ab = product_dist(&a, &b).unwrap();
        prop_assert_eq!(ab, product_dist(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(product_dist(&a, &a).unwrap(), 0.0);
        prop_assert!(product_dist(&a, &c).unwrap() <= ab + product_dist(&b, &c).unwrap() + 1e-12 * (1.0 + ab));
    }

    /// A per-individual transform is coupled exactly: the cost is the
    /// weighted mean of the row displacements.
    #[test]
    fn transform_cost_is_mean_displacement((n, p, fa, fb, _fc, ys) in setup()) {
        let labels: Vec<f64> = ys.iter().map(|&y| if y { 1.0 } else { -1.0 }).collect();
        let a = pop(fa.clone(), p, &labels);
        let b = a.with_features(fb.clone()).unwrap();
        let expected: f64 = (0..n)
            .map(|i| {
                let d: f64 = (0..p).map(|j| (fa[i * p + j] - fb[i * p + j]).powi(2)).sum();
                d.sqrt() / n as f64
            })
            .sum();
        let got = w1_aligned(&a.into(), &b.into()).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * (1.0 + expected));
    }

    /// The identity coupling never beats the optimal assignment, and matches
    /// it when the identity is optimal (co-monotone rows on the line).
    #[test]
    fn aligned_bounds_brute_force(xs in prop::collection::vec(-10.0..10.0f64, 1..7), shift in prop::collection::vec(-3.0..3.0f64, 6)) {
        let n = xs.len();
        let labels = vec![1.0; n];
        let ys: Vec<f64> = xs.iter().zip(&shift).map(|(x, s)| x + s).collect();
        let a = pop(xs.clone(), 1, &labels);
        let b = pop(ys.clone(), 1, &labels);
        let atoms = |v: &[f64]| v.iter().map(|&x| (x, 1.0)).collect::<Vec<_>>();
        let exact = brute_force_w1(&atoms(&xs), &atoms(&ys));
        let ours = w1_aligned(&a.into(), &b.into()).unwrap();
        prop_assert!(ours >= exact - 1e-12);

        let mut sorted_x = xs.clone();
        sorted_x.sort_by(f64::total_cmp);
        let mut sorted_y = ys.clone();
        sorted_y.sort_by(f64::total_cmp);
        let ours = w1_aligned(&pop(sorted_x.clone(), 1, &labels).into(), &pop(sorted_y.clone(), 1, &labels).into()).unwrap();
        prop_assert!((ours - brute_force_w1(&atoms(&sorted_x), &atoms(&sorted_y))).abs() <= 1e-12);
    }

    /// Half-and-half mixture against one of its halves costs half the
    /// population distance, which is exact on the line for a uniform shift.
    #[test]
    fn mixture_half_distance_matches_cdf(xs in prop::collection::vec(-10.0..10.0f64, 1..12), shift in 0.01..5.0f64) {
        let n = xs.len();
        let labels = vec![-1.0; n];
        let p0 = pop(xs.clone(), 1, &labels);
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let p1 = pop(shifted.clone(), 1, &labels);
        let mix = MixtureDistribution::new(vec![
            Component { weight: 0.5, population: p0.clone() },
            Component { weight: 0.5, population: p1.clone() },
        ]).unwrap();
        let ours = w1(&mix.into(), &p1.clone().into()).unwrap();
        let pair = w1(&p0.into(), &p1.into()).unwrap();
        prop_assert!((ours - 0.5 * pair).abs() <= 1e-12 * (1.0 + pair));

        let w = 1.0 / n as f64;
        let left: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.5 * w)).chain(shifted.iter().map(|&x| (x, 0.5 * w))).collect();
        let right: Vec<(f64, f64)> = shifted.iter().map(|&x| (x, w)).collect();
        let exact = cdf_w1(&left, &right);
        prop_assert!((ours - exact).abs() <= 1e-9 * (1.0 + exact));
    }
}

/// The n = 3, p = 1 mixture example against an exact transport solve: the
/// pure side's atoms are split in two so both sides carry six atoms of mass
/// 1/6.
#[test]
fn mixture_example_against_brute_force_transport() {
    let labels = [1.0, -1.0, 1.0];
    let p0 = pop(vec![0.0, 1.5, -2.0], 1, &labels);
    let p1 = pop(vec![2.0, 3.5, 0.0], 1, &labels);
    let mix = MixtureDistribution::new(vec![
        Component { weight: 0.5, population: p0.clone() },
        Component { weight: 0.5, population: p1.clone() },
    ])
    .unwrap();
    let ours = w1(&mix.into(), &p1.clone().into()).unwrap();
    let pair = w1(&p0.clone().into(), &p1.clone().into()).unwrap();
    assert!((pair - 2.0).abs() < 1e-12);
    assert!((ours - 0.5 * pair).abs() < 1e-12);

    let atoms = |p: &Population| -> Vec<(f64, f64)> { (0..p.n()).map(|i| (p.row(i)[0], p.label(i))).collect() };
    let left: Vec<(f64, f64)> = atoms(&p0).into_iter().chain(atoms(&p1)).collect();
    let right: Vec<(f64, f64)> = atoms(&p1).into_iter().flat_map(|a| [a, a]).collect();
    let exact = brute_force_w1(&left, &right);
    assert!(ours >= exact - 1e-12);
    assert!((ours - exact).abs() < 1e-12, "ours {ours}, exact {exact}");
}

#[test]
fn one_row_populations_agree_with_point_masses() {
    for (a, b) in [(1.0, 4.0), (2.5, 1.0), (3.0, 3.0), (7.25, 1.5)] {
        let pa = pop(vec![a], 1, &[1.0]);
        let pb = pop(vec![b], 1, &[1.0]);
        let aligned = w1_aligned(&pa.into(), &pb.into()).unwrap();
        let scalar = w1_scalar(ScalarPointMass::new(a).unwrap(), ScalarPointMass::new(b).unwrap());
        assert_eq!(aligned, scalar);
    }
}

#[test]
fn product_distance_adds_both_parts() {
    let labels = [1.0, -1.0];
    let a = pop(vec![0.0, 1.0, 2.0, 3.0], 2, &labels);
    let b = a.with_features(vec![2.0, 1.0, 4.0, 3.0]).unwrap();
    let s = StatePoint::new(a.into(), Classifier::unconstrained(vec![0.0, 0.0]));
    let t = StatePoint::new(b.into(), Classifier::unconstrained(vec![0.3, 0.4]));
    assert!((product_dist(&s, &t).unwrap() - 2.5).abs() < 1e-12);
}
