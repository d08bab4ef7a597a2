//! Invariants checked over random inputs.

use bgfe::constraints::{weight_from, ConstraintSet, LinkType, PairwiseConstraint};
use bgfe::dgp::pair_counts;
use bgfe::dp_prior::{log_constrained_prior_unnormalized, log_eppf, StickWeights};
use bgfe::forecast::{hpdi, point_forecast, DrawMatrix};
use bgfe::mdd::log_mdd_harmonic_mean;
use bgfe::panel::{append_holdout, read_panel, split_holdout, write_panel_to, PanelDataset};
use bgfe::partition::{enumerate_partitions, GroupPartition};
use bgfe::partition_point::{variation_of_information, vi_objective, PosteriorSimilarity};
use bgfe::rng;
use bgfe::spc_kmeans::{kmeans_objective, pc_kmeans, KmeansConfig, PairCosts};
use proptest::prelude::*;
use rand::Rng;

fn normalized(log_mass: &[f64]) -> Vec<f64> {
    let m = log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_mass.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn pl(i: usize, j: usize, accuracy: f64) -> PairwiseConstraint {
    PairwiseConstraint {
        i,
        j,
        ctype: LinkType::PositiveLink,
        accuracy,
    }
}

/// Random constraints over `n` units; each pair is constrained with
/// probability one half.
fn random_constraints(n: usize, seed: u64) -> Vec<PairwiseConstraint> {
    let mut r = rng::from_seed(seed);
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<bool>() {
                let ctype = if r.random::<bool>() {
                    LinkType::PositiveLink
                } else {
                    LinkType::NegativeLink
                };
                out.push(PairwiseConstraint {
                    i,
                    j,
                    ctype,
                    accuracy: r.random_range(0.5..0.99),
                });
            }
        }
    }
    out
}

fn labels_strategy(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn panel_csv_round_trip(n in 1usize..5, t in 2usize..5, p in 1usize..3, q in 0usize..3, seed in any::<u64>()) {
        let mut r = rng::from_seed(seed);
        let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| r.random_range(-1e3..1e3)).collect() };
        let y = draw(n * t);
        let x = draw(n * t * p);
        let z = draw(n * t * q);
        let data = PanelDataset::from_arrays(n, t, y, x, p, z, q).unwrap();
        let mut buf = Vec::new();
        write_panel_to(&data, &mut buf).unwrap();
        let back = read_panel(buf.as_slice(), None).unwrap();
        prop_assert_eq!(back.dims(), data.dims());
        for i in 0..n {
            prop_assert_eq!(back.y_unit(i), data.y_unit(i));
            for s in 0..t {
                prop_assert_eq!(back.x_row(i, s), data.x_row(i, s));
                prop_assert_eq!(back.z_row(i, s), data.z_row(i, s));
            }
        }
        prop_assert_eq!(back.unit_ids(), data.unit_ids());
        prop_assert_eq!(back.x_names(), data.x_names());
        prop_assert_eq!(back.z_names(), data.z_names());
    }

    #[test]
    fn holdout_split_then_append_is_identity(n in 1usize..5, t in 4usize..8, h in 1usize..3, seed in any::<u64>()) {
        let mut r = rng::from_seed(seed);
        let y: Vec<f64> = (0..n * t).map(|_| r.random()).collect();
        let x: Vec<f64> = (0..n * t).map(|_| r.random()).collect();
        let data = PanelDataset::from_arrays(n, t, y, x, 1, Vec::new(), 0).unwrap();
        let (train, hold) = split_holdout(&data, h).unwrap();
        prop_assert_eq!(train.n_periods(), t - h);
        prop_assert_eq!(hold.horizon(), h);
        prop_assert_eq!(append_holdout(&train, &hold).unwrap(), data);
    }

    #[test]
    fn pair_terms_are_antisymmetric(psi in 0.5f64..0.99, c in 0.0f64..5.0, positive in any::<bool>(), k in 2usize..5) {
        let ctype = if positive { LinkType::PositiveLink } else { LinkType::NegativeLink };
        let cs = ConstraintSet::new(2, vec![PairwiseConstraint { i: 0, j: 1, ctype, accuracy: psi }], c).unwrap();
        let labels = vec![0, 0];
        let together = cs.candidate_term(1, 0, &labels);
        for other in 1..k {
            let apart = cs.candidate_term(1, other, &labels);
            prop_assert!((together + apart).abs() < 1e-12);
        }
        let w = weight_from(ctype, psi).unwrap();
        prop_assert!((together - 2.0 * c * w).abs() < 1e-9 * (1.0 + together.abs()));
    }

    #[test]
    fn raising_accuracy_favours_joined_partitions(
        psi_lo in 0.5f64..0.9, bump in 0.001f64..0.09, c in 0.01f64..2.0, a in 0.1f64..3.0, seed in any::<u64>()
    ) {
        let n = 5;
        let mut others = random_constraints(n, seed);
        others.retain(|k| (k.i, k.j) != (0, 1));
        let build = |psi: f64| {
            let mut v = others.clone();
            v.push(pl(0, 1, psi));
            ConstraintSet::new(n, v, c).unwrap()
        };
        let lo = build(psi_lo);
        let hi = build(psi_lo + bump);
        let parts = enumerate_partitions(n);
        let p_lo = normalized(&parts.iter().map(|g| log_constrained_prior_unnormalized(g, a, &lo)).collect::<Vec<_>>());
        let p_hi = normalized(&parts.iter().map(|g| log_constrained_prior_unnormalized(g, a, &hi)).collect::<Vec<_>>());
        for (g, (l, h)) in parts.iter().zip(p_lo.iter().zip(&p_hi)) {
            if g.same(0, 1) {
                prop_assert!(h >= &(l * (1.0 - 1e-12)), "{:?}: {} -> {}", g.labels(), l, h);
            }
        }
    }

    #[test]
    fn neutral_constraints_contribute_nothing(labels in labels_strategy(7, 3), c in 0.0f64..10.0, seed in any::<u64>()) {
        let mut v = random_constraints(7, seed);
        for k in &mut v {
            k.accuracy = 0.5;
        }
        let cs = ConstraintSet::new(7, v, c).unwrap();
        prop_assert!(cs.is_neutral());
        prop_assert_eq!(cs.tilt(&labels), 0.0);
        for i in 0..7 {
            prop_assert_eq!(cs.log_constraint_term(i, &labels), 0.0);
        }
    }

    #[test]
    fn stick_weights_leave_the_product_of_complements(xi in prop::collection::vec(0.0f64..1.0, 1..30)) {
        let sticks = StickWeights::from_xi(xi.clone());
        let used: f64 = sticks.pi().iter().sum();
        let rest: f64 = xi.iter().map(|x| 1.0 - x).product();
        prop_assert!((1.0 - used - rest).abs() < 1e-12);
    }

    #[test]
    fn eppf_sums_to_one(a in 0.01f64..20.0) {
        for n in 1..=8 {
            let total: f64 = enumerate_partitions(n).iter().map(|g| log_eppf(g, a).exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-10, "n={} total={}", n, total);
        }
    }

    #[test]
    fn constrained_prior_normalizes(a in 0.05f64..5.0, c in 0.0f64..3.0, seed in any::<u64>()) {
        let n = 6;
        let cs = ConstraintSet::new(n, random_constraints(n, seed), c).unwrap();
        let parts = enumerate_partitions(n);
        let p = normalized(&parts.iter().map(|g| log_constrained_prior_unnormalized(g, a, &cs)).collect::<Vec<_>>());
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // With no tilt the normalized mass is the EPPF itself.
        let free = ConstraintSet::new(n, Vec::new(), c).unwrap();
        for g in &parts {
            let l = log_constrained_prior_unnormalized(g, a, &free);
            prop_assert!((l - log_eppf(g, a)).abs() < 1e-12);
        }
    }

    #[test]
    fn positive_link_favours_joining_at_equal_sizes(psi in 0.51f64..0.99, c in 0.01f64..3.0, a in 0.1f64..3.0) {
        let n = 5;
        let cs = ConstraintSet::new(n, vec![pl(0, 1, psi)], c).unwrap();
        let parts = enumerate_partitions(n);
        let key = |g: &GroupPartition| { let mut s = g.sizes(); s.sort(); s };
        for g in parts.iter().filter(|g| g.same(0, 1)) {
            let lg = log_constrained_prior_unnormalized(g, a, &cs);
            for h in parts.iter().filter(|h| !h.same(0, 1) && key(h) == key(g)) {
                prop_assert!(lg > log_constrained_prior_unnormalized(h, a, &cs));
            }
        }
    }

    #[test]
    fn strong_constraints_concentrate_on_satisfying_partitions(
        truth in labels_strategy(6, 3), a in 0.1f64..3.0, seed in any::<u64>()
    ) {
        let n = truth.len();
        let mut r = rng::from_seed(seed);
        let mut v = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if r.random::<f64>() < 0.6 {
                    let ctype = if truth[i] == truth[j] { LinkType::PositiveLink } else { LinkType::NegativeLink };
                    v.push(PairwiseConstraint { i, j, ctype, accuracy: r.random_range(0.6..0.95) });
                }
            }
        }
        let cs = ConstraintSet::new(n, v.clone(), 200.0).unwrap();
        let parts = enumerate_partitions(n);
        let p = normalized(&parts.iter().map(|g| log_constrained_prior_unnormalized(g, a, &cs)).collect::<Vec<_>>());
        let satisfied = |g: &GroupPartition| v.iter().all(|k| g.same(k.i, k.j) == (k.ctype == LinkType::PositiveLink));
        let mass: f64 = parts.iter().zip(&p).filter(|(g, _)| satisfied(g)).map(|(_, w)| w).sum();
        prop_assert!(mass > 1.0 - 1e-9, "mass {}", mass);
    }

    #[test]
    fn vi_is_a_metric(a in labels_strategy(8, 4), b in labels_strategy(8, 4), c in labels_strategy(8, 4)) {
        let (ga, gb, gc) = (GroupPartition::from_labels(&a), GroupPartition::from_labels(&b), GroupPartition::from_labels(&c));
        let ab = variation_of_information(&ga, &gb).unwrap();
        let ba = variation_of_information(&gb, &ga).unwrap();
        let bc = variation_of_information(&gb, &gc).unwrap();
        let ac = variation_of_information(&ga, &gc).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(variation_of_information(&ga, &ga).unwrap().abs() < 1e-12);
        prop_assert_eq!(ab < 1e-12, ga == gb);
    }

    #[test]
    fn vi_objective_ignores_labels(draws in prop::collection::vec(labels_strategy(7, 3), 1..6), cand in labels_strategy(7, 3), perm_seed in any::<u64>()) {
        let refs: Vec<&[usize]> = draws.iter().map(|d| d.as_slice()).collect();
        let psm = PosteriorSimilarity::from_partitions(&refs).unwrap();
        let mut perm: Vec<usize> = (0..3).collect();
        let mut r = rng::from_seed(perm_seed);
        for i in (1..3).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let relabeled: Vec<usize> = cand.iter().map(|&g| perm[g]).collect();
        let canon = GroupPartition::from_labels(&cand);
        let base = vi_objective(canon.labels(), &psm);
        let other = vi_objective(GroupPartition::from_labels(&relabeled).labels(), &psm);
        prop_assert!((base - other).abs() < 1e-9);
    }

    #[test]
    fn hpdi_is_no_wider_than_central_interval(x in prop::collection::vec(-100.0f64..100.0, 20..300), alpha in 0.01f64..0.5) {
        let (lo, hi) = hpdi(&x, alpha);
        let mut s = x.clone();
        s.sort_by(|a, b| a.total_cmp(b));
        let n = s.len();
        let m = (((1.0 - alpha) * n as f64) - 1e-9).ceil() as usize;
        let m = m.clamp(1, n);
        let cut = (n - m) / 2;
        let central = s[cut + m - 1] - s[cut];
        prop_assert!(hi >= lo);
        prop_assert!(hi - lo <= central + 1e-12, "hpdi {} central {}", hi - lo, central);
        let inside = s.iter().filter(|&&v| v >= lo && v <= hi).count();
        prop_assert!(inside >= m);
    }

    #[test]
    fn point_forecast_minimizes_quadratic_risk(x in prop::collection::vec(-50.0f64..50.0, 2..200), other in -60.0f64..60.0) {
        let dm = DrawMatrix { n_draws: x.len(), n_units: 1, values: x.clone() };
        let m = point_forecast(&dm)[0];
        let risk = |c: f64| x.iter().map(|v| (v - c).powi(2)).sum::<f64>();
        prop_assert!(risk(m) <= risk(other) + 1e-9 * risk(other).max(1.0));
    }

    #[test]
    fn harmonic_mean_shifts_with_loglik(l in prop::collection::vec(-500.0f64..500.0, 1..100), k in -1e4f64..1e4) {
        let base = log_mdd_harmonic_mean(&l);
        let shifted: Vec<f64> = l.iter().map(|v| v + k).collect();
        prop_assert!((log_mdd_harmonic_mean(&shifted) - base - k).abs() < 1e-8 * (1.0 + k.abs()));
    }

    #[test]
    fn kmeans_descends_between_repairs(n in 4usize..30, k in 2usize..4, seed in any::<u64>()) {
        let mut r = rng::from_seed(seed);
        let points: Vec<f64> = (0..n * 2).map(|_| r.random_range(-5.0..5.0)).collect();
        let cs = ConstraintSet::new(n, random_constraints(n, seed ^ 7), 0.3).unwrap();
        let costs = PairCosts::from_constraints(&cs, 1.0).unwrap();
        let cfg = KmeansConfig { k, restarts: 1, ..KmeansConfig::default() };
        let st = pc_kmeans(&points, 2, &costs, &cfg, seed).unwrap();
        if st.repairs == 0 {
            for w in st.trajectory.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{:?}", st.trajectory);
            }
        }
        let check = kmeans_objective(&points, 2, &st.labels, &st.centroids, &costs);
        prop_assert!((check - st.objective).abs() < 1e-9 * check.abs().max(1.0));
    }

    #[test]
    fn kmeans_costs_match_gibbs_mass_up_to_a_constant(
        n in 2usize..7, k in 2usize..4, c in 0.01f64..3.0, seed in any::<u64>()
    ) {
        let mut r = rng::from_seed(seed);
        let points: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let centroids: Vec<f64> = (0..k).map(|_| r.random_range(-3.0..3.0)).collect();
        let cs = ConstraintSet::new(n, random_constraints(n, seed ^ 3), c).unwrap();
        let costs = PairCosts::kmeans_equivalent(&cs).unwrap();
        let mut first = None;
        let total = k.pow(n as u32);
        for code in 0..total {
            let mut rem = code;
            let labels: Vec<usize> = (0..n).map(|_| { let g = rem % k; rem /= k; g }).collect();
            let wcss: f64 = labels.iter().enumerate().map(|(i, &g)| (points[i] - centroids[g]).powi(2)).sum();
            let log_mass = -0.5 * wcss + cs.tilt(&labels);
            let sum = kmeans_objective(&points, 1, &labels, &centroids, &costs) + log_mass;
            match first {
                None => first = Some(sum),
                Some(f) => prop_assert!((sum - f).abs() < 1e-9 * f64::max(1.0, f.abs()), "{} vs {}", sum, f),
            }
        }
    }

    #[test]
    fn equal_blocks_give_closed_form_pair_counts(k in 1usize..7, m in 1usize..12) {
        let n = k * m;
        let labels: Vec<usize> = (0..n).map(|i| i / m).collect();
        let (within, across) = pair_counts(&GroupPartition::from_labels(&labels));
        prop_assert_eq!(2 * k * within, n * (n - k));
        prop_assert_eq!(2 * k * across, n * n * (k - 1));
    }
}

/// Best labelling over all `2^N` two-block splits with centroids at block
/// means.
fn brute_force_two_blocks(points: &[f64], d: usize, costs: &PairCosts) -> f64 {
    let n = points.len() / d;
    let mut best = f64::INFINITY;
    for mask in 1..(1u32 << n) - 1 {
        let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
        let mut centroids = vec![0.0; 2 * d];
        let mut counts = [0.0; 2];
        for i in 0..n {
            counts[labels[i]] += 1.0;
            for c in 0..d {
                centroids[labels[i] * d + c] += points[i * d + c];
            }
        }
        for g in 0..2 {
            for c in 0..d {
                centroids[g * d + c] /= counts[g];
            }
        }
        best = best.min(kmeans_objective(points, d, &labels, &centroids, costs));
    }
    best
}

#[test]
fn restarted_kmeans_finds_the_two_block_optimum() {
    let instances = 60;
    let mut hits = 0;
    for inst in 0..instances {
        let mut r = rng::stream(11, inst);
        let n = r.random_range(4..=10);
        let d = 2;
        let points: Vec<f64> = (0..n * d).map(|_| r.random_range(-4.0..4.0)).collect();
        let cs = ConstraintSet::new(n, random_constraints(n, inst + 100), 1.0).unwrap();
        let costs = PairCosts::from_constraints(&cs, r.random_range(0.1..2.0)).unwrap();
        let cfg = KmeansConfig { k: 2, restarts: 50, ..KmeansConfig::default() };
        let found = pc_kmeans(&points, d, &costs, &cfg, inst).unwrap().objective;
        let best = brute_force_two_blocks(&points, d, &costs);
        assert!(found >= best - 1e-9, "instance {inst}: {found} below brute force {best}");
        if found <= best + 1e-9 * best.abs().max(1.0) {
            hits += 1;
        }
    }
    assert!(hits * 100 >= 95 * instances, "{hits}/{instances} optimal");
}
