//! Synthetic end-to-end noise sweeps: generate mel-domain data with known
//! tags, drop positives at a per-tag rate, train, and compare evaluation
//! against clean and noisy test labels.

mod config;
mod report;
mod sweep;
mod synthetic;

pub use config::ExperimentConfig;
pub use report::write_report;
pub use sweep::{run_noise_sweep, ExperimentResult, TagResult};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec, TagTemplate};

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(drop: &str) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            "seed = 3\nn_tags = 3\nn_train = 60\nn_valid = 20\nn_test = 30\nn_mels = 8\nframes = 8\n\
             priors = 0.4\nbandwidths = 1\nenergies = 2\ndrop_rates = {drop}\narch = tiny\nmax_epochs = 3\n"
        ))
        .unwrap()
    }

    #[test]
    fn noiseless_sweep_has_full_tagability() {
        let r = run_noise_sweep(&quick("0")).unwrap();
        for t in &r.tags {
            assert_eq!(t.tagability, Some(1.0));
            assert_eq!(t.auc_clean, t.auc_noisy);
        }
        assert_eq!(r.injection.total_flips(), 0);
    }

    #[test]
    fn report_layout_and_determinism() {
        let r = run_noise_sweep(&quick("0, 0.3, 0.6")).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let files = write_report(&r, a.path()).unwrap();
        write_report(&r, b.path()).unwrap();
        for f in &files {
            let rel = f.strip_prefix(a.path()).unwrap();
            assert_eq!(std::fs::read(f).unwrap(), std::fs::read(b.path().join(rel)).unwrap(), "{rel:?}");
        }
        let csv = std::fs::read_to_string(a.path().join("result.csv")).unwrap();
        let rows = csv.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(rows, 1 + 3);
        assert!(csv.contains("# seed=3"));
        assert!(csv.contains(&format!("# config_hash={}", r.config.config_hash())));
        for name in ["config.txt", "nco.csv", "lvs.csv", "charts/nco.svg", "charts/lvs.svg", "charts/tagability_auc.svg", "checkpoint.ccnn"] {
            assert!(a.path().join(name).exists(), "{name}");
        }
        let svg = std::fs::read_to_string(a.path().join("charts/lvs.svg")).unwrap();
        assert!(svg.contains("seed=3"));
    }

    #[test]
    fn rerun_is_identical() {
        let cfg = quick("0, 0.3, 0.6");
        let a = run_noise_sweep(&cfg).unwrap();
        let b = run_noise_sweep(&cfg).unwrap();
        assert_eq!(a.tags, b.tags);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn empty_result_writes_nothing() {
        let mut r = run_noise_sweep(&quick("0")).unwrap();
        r.tags.clear();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert!(write_report(&r, &out).is_err());
        assert!(!out.exists());
    }
}
