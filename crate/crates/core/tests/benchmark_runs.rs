use swimnet::benchmark::{
    gaussian_blobs, run_barron, run_classification, stratified_folds, with_jobs, BarronData,
    BarronSpec, ClassificationSpec, METHOD_RANDOM_FEATURES, METHOD_SWIM,
};
use swimnet::Matrix;

fn small_spec() -> BarronSpec {
    BarronSpec {
        dim: 2,
        train_points: 400,
        test_points: 300,
        widths: vec![64],
        depths: vec![1],
        seeds: vec![1],
        ..BarronSpec::default()
    }
}

#[test]
fn one_width_one_depth_one_seed_gives_two_rows() {
    let rows = run_barron(&small_spec()).unwrap();
    assert_eq!(rows.len(), 2);
    let methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(methods, vec![METHOD_SWIM, METHOD_RANDOM_FEATURES]);
    for r in &rows {
        assert!(r.failure.is_none());
        assert!(r.value.is_finite() && r.value >= 0.0 && r.value <= 1.1, "{r:?}");
        assert!(r.fit_seconds >= 0.0);
    }
}

#[test]
fn reruns_are_identical() {
    let spec = BarronSpec {
        widths: vec![16, 32],
        depths: vec![1, 2],
        seeds: vec![3, 4],
        ..small_spec()
    };
    let a = run_barron(&spec).unwrap();
    let b = with_jobs(2, || run_barron(&spec)).unwrap().unwrap();
    assert_eq!(a.len(), 16);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((&x.method, x.depth, x.width, x.seed), (&y.method, y.depth, y.width, y.seed));
        assert_eq!(x.value.to_bits(), y.value.to_bits());
    }
}

#[test]
fn data_is_a_function_of_the_seed() {
    let a = BarronData::generate(3, 100, 50, 7);
    let b = BarronData::generate(3, 100, 50, 7);
    let c = BarronData::generate(3, 100, 50, 8);
    assert_eq!(a.digest(), b.digest());
    assert_ne!(a.digest(), c.digest());
}

fn blobs() -> (Matrix, Vec<usize>) {
    let centers = Matrix::from_rows(&[[0.0, 0.0, 0.0], [5.0, 5.0, 0.0]]).unwrap();
    gaussian_blobs(&centers, 60, 0.4, 2)
}

#[test]
fn separable_blobs_classified_perfectly() {
    let (x, classes) = blobs();
    let spec = ClassificationSpec {
        folds: 5,
        depths: vec![1, 2],
        width: 64,
        ..ClassificationSpec::default()
    };
    let report = run_classification(&x, &classes, &spec).unwrap();
    assert_eq!(report.rows.len(), 2 * 5 + 2);
    assert!(report.mean_accuracy.iter().all(|&a| a >= 0.99), "{:?}", report.mean_accuracy);
    assert!(spec.depths.contains(&report.best_depth));
}

#[test]
fn accuracy_invariant_under_label_renaming() {
    let centers = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
    let (x, classes) = gaussian_blobs(&centers, 40, 0.5, 6);
    let renamed: Vec<usize> = classes.iter().map(|&c| [2, 0, 1][c]).collect();
    let spec = ClassificationSpec {
        folds: 4,
        depths: vec![1],
        width: 30,
        ..ClassificationSpec::default()
    };
    let a = run_classification(&x, &classes, &spec).unwrap();
    let b = run_classification(&x, &renamed, &spec).unwrap();
    assert_eq!(a.fold_accuracy, b.fold_accuracy);
}

#[test]
fn single_class_and_tiny_classes_rejected() {
    let x = Matrix::from_fn(20, 2, |i, j| (i + j) as f64);
    let spec = ClassificationSpec {
        folds: 5,
        depths: vec![1],
        width: 8,
        ..ClassificationSpec::default()
    };
    assert!(run_classification(&x, &[0; 20], &spec).is_err());
    let mut classes = vec![0; 20];
    classes[3] = 1;
    classes[9] = 1;
    let err = run_classification(&x, &classes, &spec).unwrap_err();
    assert!(err.to_string().contains("class 1"), "{err}");
}

#[test]
fn folds_partition_rows() {
    let classes: Vec<usize> = (0..57).map(|i| i % 4).collect();
    let folds = stratified_folds(&classes, 6, 11).unwrap();
    let mut sizes = [0usize; 6];
    for &f in &folds {
        sizes[f] += 1;
    }
    assert_eq!(sizes.iter().sum::<usize>(), 57);
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
}
