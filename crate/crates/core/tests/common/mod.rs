#![allow(dead_code)]

/// Published per-category scores: recall, specificity, FPR, FNR, PWC, F, precision.
pub const CDNET_ROWS: [(&str, [f64; 7]); 11] = [
    ("PTZ", [0.8798, 0.9970, 0.0030, 0.1202, 0.3788, 0.8147, 0.7880]),
    ("badWeather", [0.7139, 0.9997, 0.0003, 0.2861, 0.4538, 0.8155, 0.9790]),
    ("baseline", [0.9325, 0.9987, 0.0013, 0.0675, 0.2642, 0.9514, 0.9736]),
    ("cameraJitter", [0.8310, 0.9973, 0.0027, 0.1690, 0.9369, 0.8790, 0.9382]),
    ("dynamic background", [0.7437, 0.9998, 0.0002, 0.2563, 0.1229, 0.8013, 0.9336]),
    ("intermittentObjectMotion", [0.7987, 0.9980, 0.0020, 0.2013, 1.3093, 0.8758, 0.9809]),
    ("lowFramerate", [0.5614, 0.9994, 0.0006, 0.4386, 0.6950, 0.6292, 0.9046]),
    ("nightVideos", [0.4856, 0.9992, 0.0008, 0.5144, 1.1114, 0.5727, 0.9328]),
    ("shadow", [0.9389, 0.9984, 0.0016, 0.0611, 0.4378, 0.9543, 0.9704]),
    ("thermal", [0.6156, 0.9990, 0.0010, 0.3844, 1.2019, 0.7075, 0.9531]),
    ("turbulence", [0.5732, 0.9998, 0.0002, 0.4268, 0.2583, 0.7107, 0.9654]),
];

pub const CDNET_AVERAGE: [f64; 7] = [0.7340, 0.9988, 0.0012, 0.2660, 0.6518, 0.7920, 0.9381];

/// PTZ row of the four-method comparison for the proposed method.
pub const PTZ_RECALL: f64 = 0.8798;
pub const PTZ_PRECISION: f64 = 0.7880;
pub const PTZ_F: f64 = 0.8147;

/// Per-video F-measures on the customized dataset: (category, video,
/// proposed method, BSUV-Net). `None` is a blank cell.
pub const CUSTOM_F: [(&str, &str, f64, Option<f64>); 30] = [
    ("animals", "cats06", 0.4417, None),
    ("animals", "cats07", 0.5700, Some(0.5549)),
    ("animals", "dogs02", 0.7758, Some(0.1754)),
    ("animals", "horses01", 0.7163, Some(0.5733)),
    ("animals", "horses02", 0.3591, Some(0.3474)),
    ("animals", "horses03", 0.8341, Some(0.1235)),
    ("animals", "horses04", 0.2322, Some(0.4269)),
    ("animals", "horses05", 0.1433, Some(0.6209)),
    ("animals", "horses06", 0.4626, Some(0.1986)),
    ("animals", "rabbits01", 0.1972, Some(0.1805)),
    ("people", "I_MC_01", 0.8343, Some(0.6551)),
    ("people", "I_SM_01", 0.7957, Some(0.2943)),
    ("people", "I_SM_02", 0.7577, Some(0.3354)),
    ("people", "I_SM_03", 0.7283, Some(0.3593)),
    ("people", "marple1", 0.6106, Some(0.3784)),
    ("people", "marple2", 0.8292, Some(0.0586)),
    ("people", "marple3", 0.9186, Some(0.0013)),
    ("people", "marple6", 0.4521, Some(0.2967)),
    ("people", "marple7", 0.9308, Some(0.5030)),
    ("people", "marple10", 0.6870, Some(0.0016)),
    ("people", "marple11", 0.4359, Some(0.4371)),
    ("people", "O_MC_01", 0.7097, Some(0.2610)),
    ("people", "O_SM_01", 0.8686, Some(0.3575)),
    ("people", "O_SM_02", 0.8113, Some(0.1920)),
    ("people", "O_SM_03", 0.7955, Some(0.1516)),
    ("people", "people03", 0.5481, Some(0.2137)),
    ("people", "people04", 0.8333, Some(0.3818)),
    ("people", "people05", 0.8786, Some(0.6771)),
    ("things", "farm01", 0.5936, Some(0.1859)),
    ("things", "tennis", 0.8360, Some(0.6442)),
];

/// Published group averages (animals, people, things) and the total.
pub const CUSTOM_AVERAGES: [f64; 3] = [0.4732, 0.7459, 0.7148];
pub const CUSTOM_TOTAL: f64 = 0.6446;
pub const CUSTOM_BSUV_AVERAGES: [f64; 3] = [0.3557, 0.3086, 0.4151];
pub const CUSTOM_BSUV_TOTAL: f64 = 0.3707;

pub fn f1(p: f64, r: f64) -> f64 {
    2.0 * p * r / (p + r)
}
pub mod oracles;
