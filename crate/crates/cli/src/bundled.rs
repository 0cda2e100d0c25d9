//! Configs compiled into the binary.

pub const ALL: &[(&str, &str)] = &[
    ("check-kernel", include_str!("../configs/check-kernel.json")),
    ("operator-test", include_str!("../configs/operator-test.json")),
    ("solve-linear", include_str!("../configs/solve-linear.json")),
    ("solve-nonlinear", include_str!("../configs/solve-nonlinear.json")),
    ("calibrate", include_str!("../configs/calibrate.json")),
    ("track-evolution", include_str!("../configs/track-evolution.json")),
    ("verify-estimates", include_str!("../configs/verify-estimates.json")),
    ("criterion-1", include_str!("../configs/criterion-1.json")),
    ("criterion-2", include_str!("../configs/criterion-2.json")),
    ("criterion-3", include_str!("../configs/criterion-3.json")),
    ("criterion-4", include_str!("../configs/criterion-4.json")),
    ("criterion-5", include_str!("../configs/criterion-5.json")),
    ("criterion-6", include_str!("../configs/criterion-6.json")),
    ("criterion-7", include_str!("../configs/criterion-7.json")),
    ("criterion-8", include_str!("../configs/criterion-8.json")),
    ("criterion-9", include_str!("../configs/criterion-9.json")),
    ("criterion-10", include_str!("../configs/criterion-10.json")),
];

pub fn get(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    ALL.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nlh_core::harness::config::LoadedConfig;
    use std::path::PathBuf;

    #[test]
    fn every_bundled_config_validates() {
        for (name, src) in ALL {
            let cfg = LoadedConfig::from_bytes(src.as_bytes(), PathBuf::from(".")).unwrap_or_else(|e| panic!("{name}: {e}"));
            if cfg.config.kernel.is_some() {
                cfg.kernel().unwrap_or_else(|e| panic!("{name}: {e}"));
            }
            if cfg.config.initial.is_some() {
                cfg.initial().unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
    }
}
