use ranksr_experiments::config::DATA_ROOT_ENV;
use ranksr_experiments::ExperimentConfig;

#[test]
fn only_the_data_root_follows_the_environment() {
    let text = "seed = 5\n[data]\nroot = \"/from/file\"\ntrain = \"t\"\n";
    let before = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(before.data.root.to_str(), Some("/from/file"));
    std::env::set_var(DATA_ROOT_ENV, "/from/env");
    let after = ExperimentConfig::from_toml(text).unwrap();
    std::env::remove_var(DATA_ROOT_ENV);
    assert_eq!(after.data.root.to_str(), Some("/from/env"));
    assert_eq!(after.data.train, before.data.train);
    assert_eq!(after.seed, 5);
}
