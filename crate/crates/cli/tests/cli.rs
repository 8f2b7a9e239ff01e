use tangma_cli::cli_main;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("tangma").chain(args.iter().copied());
    let code = cli_main(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

#[test]
fn unknown_activation_is_a_usage_error() {
    let (code, _) = run(&["train", "--activation", "mish", "--dataset", "synthetic-mnist"]);
    assert_eq!(code, 2);
}

#[test]
fn missing_data_path_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let (code, _) = run(&["train", "--data", missing.to_str().unwrap(), "--epochs", "1"]);
    assert_eq!(code, 1);
}

#[test]
fn zero_batch_size_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&[
        "train",
        "--dataset",
        "synthetic-mnist",
        "--batch-size",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn train_then_eval_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, text) = run(&[
        "train",
        "--dataset",
        "synthetic-mnist",
        "--synthetic-samples",
        "120",
        "--epochs",
        "1",
        "--batch-size",
        "32",
        "--out",
        out,
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("epoch  1"));
    for f in ["metrics.csv", "params.csv", "model.ckpt"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);

    let ckpt = dir.path().join("model.ckpt");
    let (code, text) = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--dataset",
        "synthetic-mnist",
        "--synthetic-samples",
        "50",
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.starts_with("50 samples"), "{text}");

    // An MNIST checkpoint cannot score CIFAR-shaped data.
    let (code, _) = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--dataset",
        "synthetic-cifar",
        "--synthetic-samples",
        "10",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn gradcheck_ops_only_passes() {
    let (code, text) = run(&["gradcheck", "--ops-only", "--instances", "5"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("tangma.alpha"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn compare_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = run(&[
        "compare",
        "--activations",
        "tangma,relu",
        "--dataset",
        "synthetic-mnist",
        "--synthetic-samples",
        "80",
        "--epochs",
        "1",
        "--batch-size",
        "40",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("Final Val Accuracy (%)"));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(dir.path().join("tangma/metrics.csv").is_file());
    assert!(dir.path().join("relu/metrics.csv").is_file());
    // ReLU has no activation parameters to trace.
    assert!(!dir.path().join("relu/params.csv").exists());
}

#[test]
fn data_dir_env_locates_mnist() {
    let data = tempfile::tempdir().unwrap();
    let mut csv = String::new();
    for i in 0..40 {
        csv.push_str(&(i % 10).to_string());
        for p in 0..784 {
            csv.push_str(if (p + i) % 7 == 0 { ",255" } else { ",0" });
        }
        csv.push('\n');
    }
    std::fs::write(data.path().join("mnist_train.csv"), csv).unwrap();
    let out = tempfile::tempdir().unwrap();
    // Only this test touches the variable.
    std::env::set_var(tangma_cli::DATA_DIR_ENV, data.path());
    let (code, text) = run(&[
        "train",
        "--activation",
        "relu",
        "--epochs",
        "1",
        "--batch-size",
        "16",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    std::env::remove_var(tangma_cli::DATA_DIR_ENV);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("relu"));
}
