use intrank::datagen::{partial_fraction, square_free_factor, Polynomial};
use intrank::encoding::tree_positions;
use intrank::expr::{
    dag_stats, differentiate, eval_numeric, from_prefix, random_expr, simplify_basic, to_prefix, Env, Expr,
    GenConfig,
};
use intrank::neural::{rank_loss, rank_loss_grad};
use intrank::selector::{baseline_order, rank_methods};
use intrank::tokenizer::{decode, dedup, tokenize, Vocab};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn expr_from(seed: u64, ops: usize) -> Expr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_expr(&GenConfig::elementary(ops), &mut rng).unwrap()
}

fn value(e: &Expr, x: f64) -> Option<f64> {
    eval_numeric(e, &Env::x(x)).ok().filter(|v| v.is_finite() && v.abs() < 1e6)
}

fn poly(coeffs: &[i64]) -> Polynomial {
    Polynomial::from_ints(coeffs)
}

fn int_poly() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(-4i64..=4, 1..4).prop_map(|c| poly(&c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn prefix_round_trip(seed in any::<u64>(), ops in 1usize..12) {
        let e = expr_from(seed, ops);
        prop_assert_eq!(from_prefix(&to_prefix(&e)).unwrap(), e);
    }

    #[test]
    fn dag_never_exceeds_tree(seed in any::<u64>(), ops in 1usize..12) {
        let s = dag_stats(&expr_from(seed, ops));
        prop_assert!(s.dag_size <= s.tree_size);
        prop_assert!(s.depth < s.tree_size);
    }

    #[test]
    fn derivative_matches_finite_differences(seed in any::<u64>(), ops in 1usize..8, x in 0.3f64..2.5) {
        let e = expr_from(seed, ops);
        let d = differentiate(&e, "x").unwrap();
        let h = 1e-5;
        let (Some(a), Some(b), Some(c), Some(g)) =
            (value(&e, x - h), value(&e, x + h), value(&e, x), value(&d, x)) else { return Ok(()) };
        let fd = (b - a) / (2.0 * h);
        let coarse = (value(&e, x + 10.0 * h).unwrap_or(f64::NAN) - value(&e, x - 10.0 * h).unwrap_or(f64::NAN)) / (20.0 * h);
        prop_assume!((fd - coarse).abs() <= 1e-4 * (1.0 + fd.abs()) && c.is_finite());
        prop_assert!((fd - g).abs() <= 1e-4 * (1.0 + g.abs()), "{} -> {}: {} vs {}", e, d, fd, g);
    }

    #[test]
    fn simplify_keeps_value(seed in any::<u64>(), ops in 1usize..10, x in 0.3f64..2.5) {
        let e = expr_from(seed, ops);
        let s = simplify_basic(&e);
        if let (Some(a), Some(b)) = (value(&e, x), value(&s, x)) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{} vs {}", e, s);
        }
    }

    #[test]
    fn yun_factors_recompose(parts in prop::collection::vec((int_poly(), 1usize..4), 1..3)) {
        let mut p = Polynomial::one();
        for (q, k) in &parts {
            p = p.mul(&q.pow(*k));
        }
        prop_assume!(!p.is_zero());
        let factors = square_free_factor(&p).unwrap();
        let mut back = Polynomial::one();
        for (q, k) in &factors {
            prop_assert!(q.gcd(&q.derivative()).is_constant());
            back = back.mul(&q.pow(*k));
        }
        prop_assert!(p.div_rem(&back).1.is_zero());
        prop_assert_eq!(p.degree(), back.degree());
        for (i, (a, _)) in factors.iter().enumerate() {
            for (b, _) in &factors[i + 1..] {
                prop_assert!(a.gcd(b).is_constant());
            }
        }
    }

    #[test]
    fn partial_fractions_recombine(n in int_poly(), parts in prop::collection::vec((int_poly(), 1usize..3), 1..3)) {
        let mut d = Polynomial::one();
        for (q, k) in &parts {
            d = d.mul(&q.pow(*k));
        }
        prop_assume!(!d.is_zero() && !d.is_constant());
        let factors = square_free_factor(&d).unwrap();
        let pf = partial_fraction(&n, &factors).unwrap();
        let (num, den) = pf.recombine();
        let mut block = Polynomial::one();
        for (q, k) in &factors {
            block = block.mul(&q.pow(*k));
        }
        prop_assert_eq!(num.mul(&block), n.mul(&den));
        for t in &pf.terms {
            prop_assert!(t.numer.is_zero() || t.numer.degree() < t.base.degree());
        }
    }

    #[test]
    fn tokenize_decode_is_stable(seed in any::<u64>(), ops in 1usize..12) {
        let v = Vocab::standard();
        let e = expr_from(seed, ops);
        let t = tokenize(&e, &v, 512).unwrap();
        prop_assert_eq!(t.ids[0], v.cls());
        let back = decode(&t.ids, &v).unwrap();
        prop_assert_eq!(tokenize(&back, &v, 512).unwrap().ids, t.ids);
    }

    #[test]
    fn dedup_is_idempotent(seeds in prop::collection::vec(0u64..40, 0..30)) {
        let corpus: Vec<Expr> = seeds.iter().map(|&s| expr_from(s, 4)).collect();
        let once = dedup(&corpus);
        prop_assert_eq!(dedup(&once), once.clone());
        prop_assert!(once.len() <= corpus.len());
    }

    #[test]
    fn positions_are_one_hot_steps(seed in any::<u64>(), ops in 1usize..12, max_depth in 1usize..6) {
        let e = expr_from(seed, ops);
        let pos = tree_positions(&e, max_depth);
        prop_assert_eq!(pos[0].iter().map(|&b| b as usize).sum::<usize>(), 0);
        for p in &pos {
            prop_assert_eq!(p.len(), 2 * max_depth);
            let steps: Vec<_> = p.chunks(2).map(|c| (c[0], c[1])).collect();
            let used = steps.iter().take_while(|s| **s != (0, 0)).count();
            prop_assert!(steps[..used].iter().all(|s| *s == (1, 0) || *s == (0, 1)));
            prop_assert!(steps[used..].iter().all(|s| *s == (0, 0)));
        }
    }

    #[test]
    fn rank_loss_ignores_translation(
        rows in prop::collection::vec((-3.0f64..3.0, 1u32..5, any::<bool>()), 2..7),
        c in -5.0f64..5.0,
    ) {
        let p: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let y: Vec<u32> = rows.iter().map(|r| r.1).collect();
        let m: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let shifted: Vec<f64> = p.iter().map(|v| v + c).collect();
        let l = rank_loss(&p, &y, &m);
        prop_assert!(l >= 0.0);
        prop_assert!((l - rank_loss(&shifted, &y, &m)).abs() <= 1e-9 * (1.0 + l));
        let g = rank_loss_grad(&p, &y, &m);
        prop_assert!(g.iter().sum::<f64>().abs() < 1e-9);
        for (i, gi) in g.iter().enumerate() {
            if !m[i] {
                prop_assert_eq!(*gi, 0.0);
            }
        }
    }

    #[test]
    fn ranking_is_a_permutation_with_admissible_first(
        scores in prop::collection::vec(-2.0f64..2.0, 6),
        mask in prop::collection::vec(any::<bool>(), 6),
    ) {
        let admissible: Vec<usize> = (0..6).filter(|&i| mask[i]).collect();
        let order = rank_methods(&scores, &admissible, &baseline_order(6));
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        let k = admissible.len();
        prop_assert!(order[..k].iter().all(|m| mask[*m]));
        for w in order[..k].windows(2) {
            prop_assert!(scores[w[0]] <= scores[w[1]]);
        }
    }
}
