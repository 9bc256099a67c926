use crossview_core::autodiff::Tape;
use crossview_core::fusion::{combine_losses, contrastive_loss, diag_loss};
use crossview_core::graph::{add_self_loops, knn_graph, Graph, Metric};
use crossview_core::pipeline::{evaluate, kfold_split, roc_auc};
use crossview_core::Tensor;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
}

fn features() -> impl Strategy<Value = Tensor> {
    (3usize..24, 1usize..5).prop_flat_map(|(n, d)| matrix(n, d))
}

fn looped(x: &Tensor, k: usize) -> Graph {
    add_self_loops(&knn_graph(x, k, Metric::Euclidean).unwrap()).unwrap()
}

fn one_hot(classes: &[usize]) -> Tensor {
    let mut y = Tensor::zeros(&[classes.len(), 2]);
    for (i, &c) in classes.iter().enumerate() {
        y.set(i, c, 1.0);
    }
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_symmetric_loopless_with_degree_bounds(x in features(), kf in 0.0f64..1.0) {
        let n = x.rows();
        let k = 1 + (kf * (n - 2) as f64) as usize;
        let g = knn_graph(&x, k, Metric::Euclidean).unwrap();
        for i in 0..n {
            prop_assert!(!g.has_edge(i, i));
            for j in 0..n {
                prop_assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
            }
        }
        for d in g.degrees() {
            prop_assert!(d >= k as f64 && d <= (n - 1) as f64);
        }
    }

    #[test]
    fn knn_edges_grow_with_k(x in features(), kf in 0.0f64..1.0) {
        let n = x.rows();
        let k = 1 + (kf * (n - 3) as f64) as usize;
        let small = knn_graph(&x, k, Metric::Euclidean).unwrap();
        let large = knn_graph(&x, k + 1, Metric::Euclidean).unwrap();
        for (i, j) in small.edges() {
            prop_assert!(large.has_edge(i, j));
        }
    }

    #[test]
    fn knn_permutation_equivariant(x in features(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let n = x.rows();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let px = x.select_rows(&perm).unwrap();
        let k = (n - 1).min(3);
        let g = knn_graph(&x, k, Metric::Euclidean).unwrap();
        let pg = knn_graph(&px, k, Metric::Euclidean).unwrap();
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(pg.has_edge(a, b), g.has_edge(perm[a], perm[b]));
            }
        }
    }

    #[test]
    fn positive_and_negative_supports_disjoint(
        xm in matrix(10, 2), xf in matrix(10, 3), s in matrix(10, 10), k in 1usize..6,
    ) {
        let (gm, gf) = (looped(&xm, k), looped(&xf, k));
        let y = one_hot(&(0..10).map(|i| i % 2).collect::<Vec<_>>());
        let mut tape = Tape::new();
        let sv = tape.constant(s);
        let t = contrastive_loss(&mut tape, sv, &gm, &gf, &y, None, 0.2).unwrap();
        let (dp, dn) = (tape.value(t.d_pos), tape.value(t.d_neg));
        for (a, b) in dp.data().iter().zip(dn.data()) {
            prop_assert_eq!(a * b, 0.0);
        }
    }

    #[test]
    fn raising_co_neighbour_similarity_never_raises_l_pos(
        xm in matrix(8, 2), s in prop::collection::vec(0.0f64..1.0, 64), pick in 0usize..64, bump in 0.01f64..0.5,
    ) {
        let g = looped(&xm, 2);
        let s = Tensor::new(vec![8, 8], s).unwrap();
        let y = one_hot(&[0, 1, 0, 1, 1, 0, 0, 1]);
        let (i, j) = (pick / 8, pick % 8);
        prop_assume!(g.has_edge(i, j));
        let l_pos = |s: &Tensor| {
            let mut tape = Tape::new();
            let sv = tape.constant(s.clone());
            let t = contrastive_loss(&mut tape, sv, &g, &g, &y, None, 0.2).unwrap();
            tape.value(t.l_pos).data()[0]
        };
        let mut raised = s.clone();
        raised.set(i, j, s.at(i, j) + bump);
        prop_assert!(l_pos(&raised) <= l_pos(&s));
    }

    #[test]
    fn l_neg_gradient_non_negative_off_both_graphs(
        xm in matrix(9, 2), xf in matrix(9, 2), s in prop::collection::vec(-1.0f64..0.5, 81),
    ) {
        let (gm, gf) = (looped(&xm, 2), looped(&xf, 2));
        let s = Tensor::new(vec![9, 9], s).unwrap();
        let y = one_hot(&[0, 1, 1, 0, 1, 0, 0, 1, 1]);
        let mut tape = Tape::new();
        let sv = tape.param(s.clone());
        let t = contrastive_loss(&mut tape, sv, &gm, &gf, &y, None, 0.2).unwrap();
        tape.backward(t.l_neg).unwrap();
        let grad = tape.grad(sv).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                // hinge active: 1 − S_ij > δ holds for every S_ij < 0.5
                if !gm.has_edge(i, j) && !gf.has_edge(i, j) {
                    prop_assert!(grad.at(i, j) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn total_loss_linear_in_each_component(
        c in prop::array::uniform4(-50.0f64..50.0), beta in 0.0f64..=1.0, which in 0usize..4, step in 0.1f64..5.0,
    ) {
        let at = |t: f64| {
            let mut v = c;
            v[which] += t * step;
            combine_losses(v[0], v[1], v[2], v[3], beta).unwrap()
        };
        let (a, b, d) = (at(0.0), at(1.0), at(2.0));
        prop_assert!(((b - a) - (d - b)).abs() < 1e-9);
    }

    #[test]
    fn diag_loss_falls_as_rows_move_toward_degrees(x in matrix(7, 2), s in matrix(7, 7), frac in 0.05f64..0.95) {
        let g = looped(&x, 2);
        let deg = g.degrees();
        let loss = |s: &Tensor| {
            let mut tape = Tape::new();
            let sv = tape.constant(s.clone());
            let l = diag_loss(&mut tape, sv, &g).unwrap();
            tape.value(l).data()[0]
        };
        let mut moved = s.clone();
        for i in 0..7 {
            for j in 0..7 {
                moved.set(i, j, s.at(i, j) + frac * (deg[i] - s.at(i, j)));
            }
        }
        prop_assert!(loss(&moved) < loss(&s));
    }

    #[test]
    fn kfold_partitions_and_balances(labels in prop::collection::vec(0usize..3, 10..80), folds in 2usize..6, seed in any::<u64>()) {
        let f = kfold_split(&labels, folds, seed).unwrap();
        let n = labels.len();
        let mut seen = vec![0; n];
        for m in &f.folds {
            for i in m.test_indices() {
                seen[i] += 1;
            }
            for i in 0..n {
                prop_assert_ne!(m.train[i], m.test[i]);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = f.folds.iter().map(|m| m.test_indices().len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        if f.stratified {
            for class in 0..3 {
                let per: Vec<usize> = f.folds.iter()
                    .map(|m| m.test_indices().iter().filter(|&&i| labels[i] == class).count())
                    .collect();
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
        }
        prop_assert_eq!(&f, &kfold_split(&labels, folds, seed).unwrap());
    }

    #[test]
    fn metrics_identities(p in prop::collection::vec(0.0f64..1.0, 4..60), flips in prop::collection::vec(any::<bool>(), 60)) {
        let n = p.len();
        let labels: Vec<usize> = (0..n).map(|i| usize::from((p[i] > 0.5) ^ flips[i])).collect();
        let mut probs = Tensor::zeros(&[n, 2]);
        for (i, &v) in p.iter().enumerate() {
            probs.set(i, 0, 1.0 - v);
            probs.set(i, 1, v);
        }
        let r = evaluate(&probs, &labels).unwrap();
        let total: u64 = r.confusion.iter().flatten().sum();
        prop_assert_eq!(total as usize, n);
        let trace = (r.confusion[0][0] + r.confusion[1][1]) as f64;
        prop_assert_eq!(r.accuracy, trace / n as f64);
        for c in 0..2 {
            let row: u64 = r.confusion[c].iter().sum();
            if row > 0 {
                prop_assert_eq!(r.per_class[c].sensitivity, r.confusion[c][c] as f64 / row as f64);
            }
        }
        let positive: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        if positive.iter().any(|&b| b) && positive.iter().any(|&b| !b) {
            let (auc, pts) = roc_auc(&p, &positive).unwrap();
            prop_assert!((0.0..=1.0).contains(&auc));
            prop_assert_eq!((pts[0].fpr, pts[0].tpr), (0.0, 0.0));
            let last = pts.last().unwrap();
            prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
            prop_assert!(pts.windows(2).all(|w| w[1].fpr >= w[0].fpr));
        }
    }

    #[test]
    fn repeated_backward_accumulates(x in matrix(3, 3)) {
        let mut tape = Tape::new();
        let v = tape.param(x);
        let sq = tape.square(v).unwrap();
        let l = tape.sum(sq).unwrap();
        tape.backward(l).unwrap();
        let once = tape.grad(v).unwrap().clone();
        tape.backward(l).unwrap();
        let twice = tape.grad(v).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            prop_assert!((2.0 * a - b).abs() < 1e-12);
        }
    }
}
