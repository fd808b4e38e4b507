mod common;

use proptest::prelude::*;

use spikecast::data_ingest::{
    composite_average, label_spikes, normalize_table, zscore_normalize, PriceSeries, PriceTable, SeriesKind,
};
use spikecast::eval::{logistic_loss_and_grad, roc_auc, LogisticModel};
use spikecast::linalg::Matrix;
use spikecast::nn::softmax_rows;

fn series(values: &[f64]) -> PriceSeries {
    PriceSeries::raw("x", (0..values.len() as i32).collect(), values.to_vec())
}

fn non_constant(values: &[f64]) -> bool {
    values.iter().any(|v| (v - values[0]).abs() > 1e-3)
}

proptest! {
    #[test]
    fn zscore_has_zero_mean_unit_std(values in prop::collection::vec(-1e3..1e3f64, 2..60)) {
        prop_assume!(non_constant(&values));
        let z: Vec<f64> = zscore_normalize(&series(&values)).unwrap().present().map(|(_, v)| v).collect();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zscore_ignores_affine_rescaling(
        values in prop::collection::vec(1.0..500.0f64, 2..40),
        scale in 0.1..50.0f64,
        shift in -100.0..100.0f64,
    ) {
        prop_assume!(non_constant(&values));
        let moved: Vec<f64> = values.iter().map(|v| v * scale + shift).collect();
        let a = zscore_normalize(&series(&values)).unwrap();
        let b = zscore_normalize(&series(&moved)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x.unwrap() - y.unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn labels_match_brute_force(values in prop::collection::vec(0.5..300.0f64, 2..80)) {
        let got: Vec<u8> = label_spikes(&series(&values), 25.0).unwrap().labels.iter().map(|l| l.spike).collect();
        prop_assert_eq!(got, common::brute_force_labels(&values, 25.0));
    }

    #[test]
    fn labels_are_scale_invariant(values in prop::collection::vec(0.5..300.0f64, 2..40), scale in 0.01..100.0f64) {
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let a: Vec<u8> = label_spikes(&series(&values), 25.0).unwrap().labels.iter().map(|l| l.spike).collect();
        let b: Vec<u8> = label_spikes(&series(&scaled), 25.0).unwrap().labels.iter().map(|l| l.spike).collect();
        // Scaling can move a change across the strict boundary only through rounding.
        let near_boundary = values.windows(2).any(|w| ((w[1] - w[0]) / w[0] * 100.0 - 25.0).abs() < 1e-9);
        prop_assume!(!near_boundary);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn composite_of_copies_is_the_column(values in prop::collection::vec(1.0..100.0f64, 2..30), copies in 1usize..5) {
        prop_assume!(non_constant(&values));
        let years: Vec<i32> = (1990..1990 + values.len() as i32).collect();
        let names: Vec<String> = (0..copies).map(|i| format!("c{i}")).collect();
        let rows = values.iter().map(|&v| vec![Some(v); copies]).collect();
        let table = PriceTable::new(years, names, rows, SeriesKind::Raw).unwrap();
        let (norm, _) = normalize_table(&table).unwrap();
        let comp = composite_average(&norm).unwrap();
        let single = zscore_normalize(&series(&values)).unwrap();
        for (x, y) in comp.values.iter().zip(&single.values) {
            prop_assert!((x.unwrap() - y.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn auc_matches_pairwise_count(
        pairs in prop::collection::vec((0u8..4, 0u8..2), 2..120),
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let labels: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), common::pairwise_auc(&scores, &labels));
    }

    #[test]
    fn softmax_rows_are_distributions(cells in prop::collection::vec(-30.0..30.0f64, 16), shift in -100.0..100.0f64) {
        let m = Matrix::from_vec(4, 4, cells.clone());
        let s = softmax_rows(&m);
        for i in 0..4 {
            prop_assert!((s.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(s.row(i).iter().all(|&p| p > 0.0));
        }
        let shifted = Matrix::from_vec(4, 4, cells.iter().map(|c| c + shift).collect());
        prop_assert!(s.max_abs_diff(&softmax_rows(&shifted)) < 1e-9);
    }

    #[test]
    fn logreg_gradient_matches_finite_differences(
        w in prop::collection::vec(-1.0..1.0f64, 3),
        b in -0.5..0.5f64,
        xs in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 3), 4..20),
        seed in 0u64..1000,
    ) {
        let labels: Vec<u8> = (0..xs.len()).map(|i| ((seed >> (i % 10)) & 1) as u8).collect();
        let model = LogisticModel { weights: w.clone(), bias: b };
        let l2 = 1e-2;
        let (_, gw, gb) = logistic_loss_and_grad(&model, &xs, &labels, l2).unwrap();
        let loss = |m: &LogisticModel| logistic_loss_and_grad(m, &xs, &labels, l2).unwrap().0;
        let eps = 1e-6;
        for i in 0..w.len() {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            plus.weights[i] += eps;
            minus.weights[i] -= eps;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            prop_assert!((fd - gw[i]).abs() <= 1e-6, "w[{}]: fd {} analytic {}", i, fd, gw[i]);
        }
        let (mut plus, mut minus) = (model.clone(), model.clone());
        plus.bias += eps;
        minus.bias -= eps;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
        prop_assert!((fd - gb).abs() <= 1e-6);
    }
}
