use mnn_core::bias_report::{aggregate_source, rank_normalize, DayPage};
use mnn_core::dataset::{clean_text, hash_encode, StopWords};
use mnn_core::evolution::mutate_in_place;
use mnn_core::stats::{pearson, wilcoxon_signed_rank, PairedSeries};
use mnn_core::topology::{random_mesh, SeedSpec};
use mnn_core::matrix::Matrix;
use mnn_core::{rng, Dims, MeshNetwork, StructureMask};
use rand::Rng;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    -1e3..1e3f64
}

fn page_scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..=1.0f64, 1..12)
}

fn page(source: &str, scores: &[f64]) -> DayPage {
    let entries = scores.iter().enumerate().map(|(i, &s)| (i as u32 + 1, s)).collect();
    DayPage::new(source, "2021-01-01", entries).unwrap()
}

proptest! {
    #[test]
    fn cleaning_is_idempotent(raw in "\\PC{0,80}") {
        let stop = StopWords::default_list();
        let once = clean_text(&raw, &stop);
        prop_assert_eq!(clean_text(&once, &stop), once.clone());
        prop_assert!(!once.contains("  "));
        prop_assert_eq!(once.trim(), once.as_str());
    }

    #[test]
    fn encoding_is_a_unit_bag_of_words(words in prop::collection::vec("[a-z]{1,8}", 0..20), dim in 1usize..64) {
        let text = words.join(" ");
        let v = hash_encode(&text, dim);
        prop_assert_eq!(v.len(), dim);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
        let mut reversed = words.clone();
        reversed.reverse();
        prop_assert_eq!(hash_encode(&reversed.join(" "), dim), v);
    }

    #[test]
    fn pearson_symmetric_and_bounded(xs in prop::collection::vec(finite(), 3..30), seed in any::<u64>()) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.3 + ((seed >> (i % 60)) & 7) as f64).collect();
        if let (Ok(a), Ok(b)) = (pearson(&xs, &ys), pearson(&ys, &xs)) {
            prop_assert_eq!(a, b);
            prop_assert!((-1.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn pearson_of_a_line_is_unit(xs in prop::collection::vec(finite(), 2..30), a in 0.01..100.0f64, b in finite()) {
        prop_assume!(xs.iter().any(|x| *x != xs[0]));
        let up: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let down: Vec<f64> = xs.iter().map(|x| -a * x + b).collect();
        prop_assert!((pearson(&xs, &up).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((pearson(&xs, &down).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_is_scale_invariant(d in prop::collection::vec(-5.0..5.0f64, 1..15), scale in 0.001..1000.0f64) {
        prop_assume!(d.iter().any(|x| *x != 0.0));
        let scaled: Vec<f64> = d.iter().map(|x| x * scale).collect();
        let a = wilcoxon_signed_rank(&PairedSeries::from_differences(&d).unwrap()).unwrap();
        let b = wilcoxon_signed_rank(&PairedSeries::from_differences(&scaled).unwrap()).unwrap();
        prop_assert_eq!(a.p_value, b.p_value);
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }

    #[test]
    fn rank_normalize_is_a_convex_combination(scores in page_scores(), decay in 0.01..=1.0f64) {
        let v = rank_normalize(&page("s", &scores), decay).unwrap();
        let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }

    #[test]
    fn bias_flips_with_labels(days in prop::collection::vec(page_scores(), 1..10), decay in 0.01..=1.0f64) {
        let pages: Vec<DayPage> = days.iter().map(|s| page("s", s)).collect();
        let flipped: Vec<DayPage> = days
            .iter()
            .map(|s| page("s", &s.iter().map(|x| -x).collect::<Vec<_>>()))
            .collect();
        let a = aggregate_source(&pages, decay).unwrap();
        let b = aggregate_source(&flipped, decay).unwrap();
        prop_assert_eq!(a.mean_bias, -b.mean_bias);
        prop_assert_eq!(a.normalized_bias, -b.normalized_bias);
        prop_assert_eq!(a.significant, a.normalized_bias.abs() > 0.5);
        let plain = aggregate_source(&pages, 1.0).unwrap();
        prop_assert_eq!(plain.normalized_bias, plain.mean_bias);
    }

    #[test]
    fn mutation_respects_mask(seed in any::<u64>(), density in 0.0..1.0f64, k in 1usize..200) {
        let dims = Dims::new(4, 7, 3, 2);
        let mask = StructureMask::support_of(&bernoulli_net(dims, density, seed));
        let mut net = random_mesh(dims, &SeedSpec { seed, ..SeedSpec::default() }).unwrap();
        let before = net.clone();
        mutate_in_place(&mut net, &mask, k, 1.0, &mut rng::stream(seed, &[9]));
        for ((a, b), m) in before.tensors().iter().zip(net.tensors()).zip(mask.tensors()) {
            for i in 0..a.len() {
                if !m[i] {
                    prop_assert_eq!(a[i], b[i]);
                }
            }
        }
    }

    #[test]
    fn mesh_round_trips(seed in any::<u64>(), d in 1usize..6, m in 1usize..6, steps in 1usize..5) {
        let net = random_mesh(Dims::new(d, m, 3, steps), &SeedSpec { seed, ..SeedSpec::default() }).unwrap();
        prop_assert_eq!(MeshNetwork::deserialize(&net.serialize()).unwrap(), net);
    }
}

/// A network whose entries are 1 with probability `density`, else 0.
fn bernoulli_net(dims: Dims, density: f64, seed: u64) -> MeshNetwork {
    let mut r = rng::stream(seed, &[7]);
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n).map(|_| if r.random_bool(density) { 1.0 } else { 0.0 }).collect()
    };
    let (d, m, c) = (dims.input, dims.mesh, dims.classes);
    MeshNetwork::new(
        Matrix::from_vec(m, d, draw(m * d)).unwrap(),
        Matrix::from_vec(m, m, draw(m * m)).unwrap(),
        draw(m),
        Matrix::from_vec(c, m, draw(c * m)).unwrap(),
        draw(c),
        dims.settle_steps,
    )
    .unwrap()
}
