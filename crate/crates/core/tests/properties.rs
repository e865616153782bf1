use proptest::prelude::*;
use rsimle::datasets::{load_csv, save_csv};
use rsimle::metrics::precision_recall;
use rsimle::nn_index::{filter_by_epsilon, pairwise_distances, FilterSpace, Metric};
use rsimle::sampler::{acceptance_curve, rejection_sample, PriorSampler};
use rsimle::tensor::euclidean;
use rsimle::{Activation, GeneratorNet, Tensor2};

fn points(max_rows: usize, cols: usize) -> impl Strategy<Value = Tensor2> {
    (1..=max_rows).prop_flat_map(move |rows| {
        prop::collection::vec(-3.0f64..3.0, rows * cols)
            .prop_map(move |v| Tensor2::from_vec(rows, cols, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_is_antitone_in_epsilon(
        data in points(8, 2),
        samples in points(30, 2),
        e1 in 0.0f64..2.0,
        de in 0.0f64..2.0,
    ) {
        let dm = pairwise_distances(&data, &samples, Metric::Euclidean).unwrap();
        let wide = filter_by_epsilon(&dm, e1).unwrap();
        let narrow = filter_by_epsilon(&dm, e1 + de).unwrap();
        prop_assert!(narrow.iter().all(|j| wide.contains(j)));
    }

    #[test]
    fn accepted_samples_keep_their_distance(
        data in points(6, 2),
        seed in 0u64..1000,
        eps in 0.01f64..1.0,
        net_seed in 0u64..1000,
    ) {
        let net = GeneratorNet::new(&[2, 8, 2], Activation::Tanh, net_seed).unwrap();
        let mut sampler = PriorSampler::new(2, seed);
        match rejection_sample(&mut sampler, &net, &data, &FilterSpace::Raw, eps, 50, 5) {
            Ok(batch) => {
                for s in batch.accepted_samples.iter_rows() {
                    for d in data.iter_rows() {
                        prop_assert!(euclidean(s, d) >= eps);
                    }
                }
            }
            Err(rsimle::Error::DegenerateEpsilon { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn acceptance_curve_is_nonincreasing(
        data in points(6, 2),
        seed in 0u64..1000,
        mut eps in prop::collection::vec(0.0f64..2.0, 2..12),
    ) {
        eps.sort_by(f64::total_cmp);
        let net = GeneratorNet::new(&[2, 8, 2], Activation::Tanh, seed).unwrap();
        let curve = acceptance_curve(&net, &data, &FilterSpace::Raw, &eps, 300, seed).unwrap();
        prop_assert!(curve.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn precision_recall_ignore_order_and_rotation(
        real in points(12, 2),
        fake in points(12, 2),
        angle in 0.0f64..std::f64::consts::TAU,
        shift in -2.0f64..2.0,
    ) {
        prop_assume!(real.rows() > 3 && fake.rows() > 3);
        let base = precision_recall(&real, &fake, 3).unwrap();

        let rev = |t: &Tensor2| {
            let idx: Vec<usize> = (0..t.rows()).rev().collect();
            t.select_rows(&idx)
        };
        let permuted = precision_recall(&rev(&real), &rev(&fake), 3).unwrap();
        prop_assert_eq!(base, permuted);

        let (c, s) = (angle.cos(), angle.sin());
        let rot = |t: &Tensor2| {
            let rows: Vec<[f64; 2]> = t
                .iter_rows()
                .map(|r| [c * r[0] - s * r[1] + shift, s * r[0] + c * r[1] - shift])
                .collect();
            Tensor2::from_rows(&rows).unwrap()
        };
        let moved = precision_recall(&rot(&real), &rot(&fake), 3).unwrap();
        // rigid motions preserve every distance up to rounding; a point sitting
        // exactly on a ball boundary could flip, so allow one point either way
        prop_assert!((base.precision - moved.precision).abs() <= 1.0 / fake.rows() as f64 + 1e-12);
        prop_assert!((base.recall - moved.recall).abs() <= 1.0 / real.rows() as f64 + 1e-12);
    }

    #[test]
    fn forward_is_pure(z in points(10, 3), seed in 0u64..1000) {
        let net = GeneratorNet::new(&[3, 5, 2], Activation::Tanh, seed).unwrap();
        let a = net.forward(&z).unwrap();
        let b = net.forward(&z).unwrap();
        prop_assert_eq!(&a, &b);
        let first = net.forward(&z.select_rows(&[0])).unwrap();
        prop_assert_eq!(first.row(0), a.row(0));
    }

    #[test]
    fn csv_round_trip_is_exact(data in points(20, 3)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("points.csv");
        save_csv(&data, &path).unwrap();
        let back = load_csv(&path).unwrap();
        prop_assert_eq!(back, data);
    }
}
