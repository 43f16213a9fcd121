//! The fixed 40-feature manifest and the named feature groups.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const N_FEATURES: usize = 40;

/// Feature names in manifest order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    // LOC
    "radius_of_gyration",
    // ACC, whole window
    "acc_x",
    "acc_y",
    "acc_z",
    "acc_xabs",
    "acc_yabs",
    "acc_zabs",
    // ACC, half window before the anchor
    "acc_x_bef",
    "acc_y_bef",
    "acc_z_bef",
    "acc_xabs_bef",
    "acc_yabs_bef",
    "acc_zabs_bef",
    // ACC, half window after the anchor
    "acc_x_aft",
    "acc_y_aft",
    "acc_z_aft",
    "acc_xabs_aft",
    "acc_yabs_aft",
    "acc_zabs_aft",
    // APP
    "facebook",
    "whatsapp",
    "instagram",
    "youtube",
    "chrome",
    "spotify",
    "android_dialer",
    "youtube_music",
    "googlequicksearchbox",
    "microsoft_launcher",
    // BAT
    "battery_level",
    "charging_true_count",
    "charging_false_count",
    "charging_ac",
    "charging_usb",
    "charging_unknown",
    // SCR
    "screen_on_count",
    "screen_off_count",
    // TIME
    "hours_elapsed",
    "minutes_elapsed",
    "weekend",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    Loc,
    Acc,
    App,
    Bat,
    Scr,
    Time,
}

impl Modality {
    pub const ALL: [Modality; 6] = [
        Modality::Loc,
        Modality::Acc,
        Modality::App,
        Modality::Bat,
        Modality::Scr,
        Modality::Time,
    ];

    /// Column range inside the manifest.
    pub fn range(self) -> std::ops::Range<usize> {
        match self {
            Modality::Loc => 0..1,
            Modality::Acc => 1..19,
            Modality::App => 19..29,
            Modality::Bat => 29..35,
            Modality::Scr => 35..37,
            Modality::Time => 37..40,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Loc => "LOC",
            Modality::Acc => "ACC",
            Modality::App => "APP",
            Modality::Bat => "BAT",
            Modality::Scr => "SCR",
            Modality::Time => "TIME",
        }
    }

    pub fn of_feature(index: usize) -> Modality {
        Self::ALL
            .into_iter()
            .find(|m| m.range().contains(&index))
            .expect("feature index out of range")
    }
}

pub const APP_RANGE: std::ops::Range<usize> = 19..29;
pub const WEEKEND: usize = 39;
pub const HOURS_ELAPSED: usize = 37;
pub const MINUTES_ELAPSED: usize = 38;
pub const RADIUS_OF_GYRATION: usize = 0;

/// Features that only take the values 0 and 1.
pub fn is_binary(index: usize) -> bool {
    APP_RANGE.contains(&index) || index == WEEKEND
}

pub fn binary_mask() -> [bool; N_FEATURES] {
    std::array::from_fn(is_binary)
}

pub fn index_of(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

const F1_FEATURES: &[&str] = &[
    "screen_on_count",
    "screen_off_count",
    "facebook",
    "whatsapp",
    "googlequicksearchbox",
    "microsoft_launcher",
    "instagram",
    "youtube",
    "chrome",
    "spotify",
    "android_dialer",
    "youtube_music",
    "battery_level",
    "charging_true_count",
    "charging_false_count",
    "charging_ac",
    "charging_usb",
    "charging_unknown",
    "minutes_elapsed",
    "hours_elapsed",
    "weekend",
    "acc_x_bef",
    "acc_y_bef",
    "acc_z_bef",
    "acc_x_aft",
    "acc_y_aft",
    "acc_z_aft",
    "acc_yabs",
    "acc_zabs",
    "acc_xabs_bef",
    "acc_yabs_bef",
    "acc_xabs_aft",
    "acc_yabs_aft",
    "acc_zabs_aft",
    "radius_of_gyration",
];

const F3_FEATURES: &[&str] = &[
    "screen_on_count",
    "screen_off_count",
    "facebook",
    "whatsapp",
    "googlequicksearchbox",
    "microsoft_launcher",
    "instagram",
    "youtube",
    "chrome",
    "spotify",
    "android_dialer",
    "youtube_music",
    "charging_true_count",
    "charging_false_count",
    "charging_ac",
    "charging_usb",
    "charging_unknown",
    "minutes_elapsed",
    "hours_elapsed",
    "weekend",
    "acc_z_bef",
    "acc_x_aft",
    "acc_z_aft",
    "acc_yabs",
    "radius_of_gyration",
];

const F7_FEATURES: &[&str] = &[
    "googlequicksearchbox",
    "microsoft_launcher",
    "instagram",
    "youtube",
    "charging_false_count",
];

/// Named, fixed feature subsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureGroupPreset {
    Loc,
    Scr,
    Time,
    Bat,
    App,
    Acc,
    All,
    F1,
    F3,
    F7,
}

impl FeatureGroupPreset {
    pub const ALL: [FeatureGroupPreset; 10] = [
        FeatureGroupPreset::Loc,
        FeatureGroupPreset::Scr,
        FeatureGroupPreset::Time,
        FeatureGroupPreset::Bat,
        FeatureGroupPreset::App,
        FeatureGroupPreset::Acc,
        FeatureGroupPreset::All,
        FeatureGroupPreset::F1,
        FeatureGroupPreset::F3,
        FeatureGroupPreset::F7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroupPreset::Loc => "LOC",
            FeatureGroupPreset::Scr => "SCR",
            FeatureGroupPreset::Time => "TIME",
            FeatureGroupPreset::Bat => "BAT",
            FeatureGroupPreset::App => "APP",
            FeatureGroupPreset::Acc => "ACC",
            FeatureGroupPreset::All => "ALL",
            FeatureGroupPreset::F1 => "F1",
            FeatureGroupPreset::F3 => "F3",
            FeatureGroupPreset::F7 => "F7",
        }
    }

    pub fn feature_names(self) -> Vec<&'static str> {
        let modality = |m: Modality| FEATURE_NAMES[m.range()].to_vec();
        match self {
            FeatureGroupPreset::Loc => modality(Modality::Loc),
            FeatureGroupPreset::Scr => modality(Modality::Scr),
            FeatureGroupPreset::Time => modality(Modality::Time),
            FeatureGroupPreset::Bat => modality(Modality::Bat),
            FeatureGroupPreset::App => modality(Modality::App),
            FeatureGroupPreset::Acc => modality(Modality::Acc),
            FeatureGroupPreset::All => FEATURE_NAMES.to_vec(),
            FeatureGroupPreset::F1 => F1_FEATURES.to_vec(),
            FeatureGroupPreset::F3 => F3_FEATURES.to_vec(),
            FeatureGroupPreset::F7 => F7_FEATURES.to_vec(),
        }
    }

    /// Manifest indices, in the preset's listed order.
    pub fn indices(self) -> Vec<usize> {
        self.feature_names()
            .into_iter()
            .map(|n| index_of(n).expect("preset feature missing from manifest"))
            .collect()
    }
}

impl fmt::Display for FeatureGroupPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroupPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == up)
            .ok_or_else(|| format!("unknown feature group {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn group_sizes_sum_to_forty() {
        let sizes: Vec<usize> = Modality::ALL.iter().map(|m| m.range().len()).collect();
        assert_eq!(sizes, [1, 18, 10, 6, 2, 3]);
        assert_eq!(sizes.iter().sum::<usize>(), N_FEATURES);
        let unique: HashSet<_> = FEATURE_NAMES.iter().collect();
        assert_eq!(unique.len(), N_FEATURES);
    }

    #[test]
    fn named_groups_resolve() {
        assert_eq!(FeatureGroupPreset::F1.indices().len(), 35);
        assert_eq!(FeatureGroupPreset::F3.indices().len(), 25);
        assert_eq!(FeatureGroupPreset::F7.indices().len(), 5);
        assert_eq!(
            FeatureGroupPreset::All.indices(),
            (0..40).collect::<Vec<_>>()
        );
        for p in FeatureGroupPreset::ALL {
            let idx = p.indices();
            let set: HashSet<_> = idx.iter().collect();
            assert_eq!(set.len(), idx.len(), "{p} has duplicates");
            assert_eq!(p.as_str().parse::<FeatureGroupPreset>().unwrap(), p);
        }
    }

    #[test]
    fn binary_features() {
        let n = binary_mask().iter().filter(|b| **b).count();
        assert_eq!(n, 11);
        assert!(is_binary(WEEKEND));
        assert!(!is_binary(MINUTES_ELAPSED));
        assert_eq!(Modality::of_feature(25), Modality::App);
    }
}
