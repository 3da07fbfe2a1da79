use std::path::Path;

use clap::Parser;
use proptest::prelude::*;
use semexp::cli::{run, Cli};
use semexp::config::{parse_config, HarnessConfig};

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let text = format!(
        "run.out_dir = {}\nrun.seeds = 1,2\nrun.checkpoint_every = 2\n\
         dataset.size = 200\nclassifier.epochs = 2\n\
         ppo.total_updates = 4\nppo.eval_every = 2\nppo.eval_episodes = 5\nppo.rollout_length = 32\nppo.minibatch_size = 16\n",
        dir.join("out").display()
    );
    let path = dir.join("tiny.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn exec(args: &[&str]) -> Result<String, String> {
    let cli = Cli::try_parse_from(std::iter::once("semexp").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    run(cli, &mut out).map_err(|e| e.to_string())?;
    Ok(String::from_utf8(out).unwrap())
}

#[test]
fn full_pipeline_on_tiny_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");
    let data = out.join("data.sqd");

    let msg = exec(&["gen-data", "--config", cfg]).unwrap();
    assert!(msg.contains("wrote 200 samples"));
    assert!(data.exists());

    let data_s = data.to_str().unwrap();
    exec(&["train-classifier", "--config", cfg, "--data", data_s]).unwrap();
    let model = out.join("classifier/model.sqm");
    assert!(model.exists() && out.join("classifier/loss.csv").exists());
    let acc = exec(&["eval-classifier", "--config", cfg, "--model", model.to_str().unwrap(), "--data", data_s]).unwrap();
    assert!(acc.starts_with("elementwise_accuracy="));

    let msg = exec(&["train", "--config", cfg, "--method", "ours"]).unwrap();
    assert!(msg.contains("ours seed 1") && msg.contains("ours seed 2"));
    let run = out.join("ours/seed_1");
    for f in ["config.cfg", "log.csv", "final.sqm", "checkpoints/update_00002.sqm", "checkpoints/update_00004.sqm"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    exec(&["train", "--config", cfg, "--method", "ppo", "--seeds", "3"]).unwrap();

    let ckpt = run.join("final.sqm");
    let first = exec(&["evaluate", "--config", cfg, "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "5"]).unwrap();
    let again = exec(&["evaluate", "--config", cfg, "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "5"]).unwrap();
    assert!(first.starts_with("success_rate="));
    assert_eq!(first, again);

    let rep = exec(&["report", out.to_str().unwrap()]).unwrap();
    assert!(rep.contains("ours: 2 seeds") && rep.contains("ppo: 1 seeds"));
    assert!(out.join("comparison.csv").exists());
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(exec(&["report", dir.path().to_str().unwrap()]).is_err());
    let cfg = tiny_config(dir.path());
    let err = exec(&["train", "--config", cfg.to_str().unwrap(), "--method", "bogus"]).unwrap_err();
    assert!(err.contains("bogus"));
    assert!(exec(&["train", "--seeds", "1,x"]).is_err());
    assert!(exec(&["frobnicate"]).is_err());
    std::fs::write(dir.path().join("bad.cfg"), "ppo.gamma = 2\n").unwrap();
    let err = exec(&["train", "--config", dir.path().join("bad.cfg").to_str().unwrap()]).unwrap_err();
    assert!(err.contains("ppo.gamma"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn config_text_round_trips(
        updates in 1usize..5000,
        every in 1usize..100,
        beta in 0.0f64..10.0,
        n in 1usize..5,
        seeds in prop::collection::vec(any::<u64>(), 1..5),
    ) {
        let mut cfg = HarnessConfig::default();
        cfg.ppo.total_updates = updates;
        cfg.ppo.eval_every = every;
        cfg.query.beta = beta;
        cfg.query.n = n;
        cfg.run.seeds = seeds;
        let back = parse_config(&cfg.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), cfg.to_text());
        prop_assert_eq!(back.digest(), cfg.digest());
    }
}
