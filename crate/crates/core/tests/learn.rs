use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rotinv_core::datasets::{GalaxyClass, Grouping};
use rotinv_core::learn::blda::blda_posterior_mean;
use rotinv_core::learn::{
    auc, average_precision, cv_classify, euclidean_rank, kfold_split, precision_at_k, retrieval_eval, ClassifierKind,
    ClassifierParams,
};

/// Probability that a positive outscores a negative, ties counting half,
/// over every positive/negative pair.
fn auc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                den += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// Random orthogonal matrix: Q factor of a Gaussian matrix.
fn orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let g = DMatrix::from_row_slice(d, d, &gaussian_rows(d, d, seed).concat());
    g.qr().q()
}

fn two_class(n: usize, d: usize, seed: u64) -> (DMatrix<f64>, Vec<bool>) {
    let rows = gaussian_rows(n, d, seed);
    let y: Vec<bool> = (0..n).map(|i| i % 2 == 1).collect();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] + if y[i] && j < 3 { 1.2 } else { 0.0 });
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn auc_matches_pair_count(raw in prop::collection::vec((0u8..12, any::<bool>()), 2..80)) {
        prop_assume!(raw.iter().any(|r| r.1) && raw.iter().any(|r| !r.1));
        // coarse scores force plenty of ties
        let scores: Vec<f64> = raw.iter().map(|r| r.0 as f64 * 0.25).collect();
        let labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
        prop_assert!((auc(&scores, &labels).unwrap() - auc_pairs(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn ranking_matches_naive_sort(pts in prop::collection::vec(prop::collection::vec(-3i8..4, 3), 2..40), q in any::<prop::sample::Index>()) {
        let gallery: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|&v| v as f64).collect()).collect();
        let query = q.index(gallery.len());
        let rl = euclidean_rank(query, &gallery).unwrap();
        let mut naive: Vec<(i64, usize)> = (0..gallery.len())
            .filter(|&i| i != query)
            .map(|i| (pts[i].iter().zip(&pts[query]).map(|(a, b)| (*a as i64 - *b as i64).pow(2)).sum(), i))
            .collect();
        naive.sort();
        prop_assert_eq!(rl.neighbors, naive.iter().map(|p| p.1).collect::<Vec<_>>());
        for (d, p) in rl.distances.iter().zip(&naive) {
            prop_assert!((d - (p.0 as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn precision_and_ap_bounds(labels in prop::collection::vec(0u8..3, 3..40), q in any::<prop::sample::Index>()) {
        let gallery: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![(i * 7 % 11) as f64]).collect();
        let query = q.index(labels.len());
        let n_c = labels.iter().filter(|&&l| l == labels[query]).count();
        prop_assume!(n_c >= 2);
        let rl = euclidean_rank(query, &gallery).unwrap();
        let ap = average_precision(&rl, &labels, n_c).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ap));
        for k in 1..=rl.len() {
            let p = precision_at_k(&rl, &labels, k).unwrap();
            let hits = rl.neighbors[..k].iter().filter(|&&i| labels[i] == labels[query]).count();
            prop_assert_eq!(p, hits as f64 / k as f64);
        }
    }

    #[test]
    fn retrieval_is_invariant_to_isometries(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let d = 4;
        let classes: Vec<GalaxyClass> = GalaxyClass::ALL.iter().flat_map(|&c| std::iter::repeat_n(c, 4)).collect();
        let noise = gaussian_rows(classes.len(), d, seed);
        let feats: Vec<Vec<f64>> = classes
            .iter()
            .zip(&noise)
            .map(|(c, z)| z.iter().enumerate().map(|(j, v)| 0.6 * v + ((c.index() * (j + 3)) % 5) as f64).collect())
            .collect();
        let rot = orthogonal(d, seed ^ 0xabc);
        let moved: Vec<Vec<f64>> = feats
            .iter()
            .map(|f| (rot.clone() * DVector::from_column_slice(f)).iter().map(|v| v + shift).collect())
            .collect();
        for g in [Grouping::Eleven, Grouping::Five, Grouping::Three] {
            let a = retrieval_eval(&feats, &classes, g).unwrap();
            let b = retrieval_eval(&moved, &classes, g).unwrap();
            prop_assert!((a.precision_mean - b.precision_mean).abs() < 1e-9);
            prop_assert!((a.map_mean - b.map_mean).abs() < 1e-9);
        }
    }

    #[test]
    fn stratified_folds_balance_each_class(labels in prop::collection::vec(0u8..4, 10..200), k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(k <= labels.len());
        let folds = kfold_split(&labels, k, seed).unwrap();
        prop_assert_eq!(&folds, &kfold_split(&labels, k, seed).unwrap());
        let mut sizes = vec![0usize; k];
        for &f in &folds {
            sizes[f] += 1;
        }
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for class in 0u8..4 {
            let mut per = vec![0usize; k];
            for (i, &f) in folds.iter().enumerate() {
                if labels[i] == class {
                    per[f] += 1;
                }
            }
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn blda_posterior_mean_matches_ridge_solve(n in 3usize..30, d in 1usize..40, seed in any::<u64>(), la in -3.0f64..3.0, lb in -3.0f64..3.0) {
        let (x, y) = two_class(n, d, seed);
        let (alpha, beta) = (10f64.powf(la), 10f64.powf(lb));
        // centered design and targets, then the normal equations by Cholesky
        let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
        let xc = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - means[j]);
        let t = DVector::from_iterator(n, y.iter().map(|&l| if l { 1.0 } else { -1.0 }));
        let tc = t.add_scalar(-t.mean());
        let a = xc.transpose() * &xc + DMatrix::identity(d, d) * (alpha / beta);
        let w_ref = a.cholesky().unwrap().solve(&(xc.transpose() * tc));
        let w = blda_posterior_mean(&x, &y, alpha, beta);
        let err = (&w - &w_ref).norm();
        prop_assert!(err <= 1e-9 * w_ref.norm().max(1e-3), "{} vs {}", err, w_ref.norm());
    }
}

#[test]
fn cross_validation_does_not_depend_on_thread_count() {
    let (x, y) = two_class(120, 12, 5);
    for kind in [ClassifierKind::Svm, ClassifierKind::Blda, ClassifierKind::StepLda, ClassifierKind::Elm] {
        let params = ClassifierParams { hidden: 20, seed: 9, ..ClassifierParams::default() };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| cv_classify(&x, &y, kind, &params, 10, 3).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(4), "{kind:?}");
        assert_eq!(one.folds.len(), 10);
        assert!(one.mean.auc > 0.8, "{kind:?}: {}", one.mean.auc);
    }
}
