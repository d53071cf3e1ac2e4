//! Bundled example problems: the worked dilation/digit systems the tool
//! reproduces out of the box.

use crate::config::ProblemConfig;

/// Names of all bundled presets, in documentation order.
pub const PRESET_NAMES: [&str; 5] = [
    "quarter_cantor",
    "third_cantor",
    "gasket_d3",
    "ex_4_0_1_4",
    "ex_4_0_1_2",
];

/// Expands a preset name into its exact problem data.
pub fn preset(name: &str) -> Option<ProblemConfig> {
    let (d, r, b, l): (usize, Vec<Vec<i64>>, Vec<Vec<i64>>, Option<Vec<Vec<i64>>>) = match name {
        "quarter_cantor" => (
            1,
            vec![vec![4]],
            vec![vec![0], vec![2]],
            Some(vec![vec![0], vec![1]]),
        ),
        "third_cantor" => (1, vec![vec![3]], vec![vec![0], vec![2]], None),
        "gasket_d3" => (
            3,
            vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 2]],
            vec![
                vec![0, 0, 0],
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![0, 0, 1],
            ],
            Some(vec![
                vec![0, 0, 0],
                vec![1, 0, 1],
                vec![0, 1, 1],
                vec![1, 1, 0],
            ]),
        ),
        "ex_4_0_1_4" => (
            2,
            vec![vec![4, 0], vec![1, 4]],
            vec![vec![0, 0], vec![0, 3], vec![1, 0], vec![1, 3]],
            Some(vec![vec![0, 0], vec![2, 0], vec![0, 2], vec![2, 2]]),
        ),
        "ex_4_0_1_2" => (
            2,
            vec![vec![4, 0], vec![1, 2]],
            vec![vec![0, 0], vec![0, 3], vec![1, 0], vec![1, 3]],
            Some(vec![vec![0, 0], vec![2, 0], vec![0, 1], vec![2, 1]]),
        ),
        _ => return None,
    };
    Some(ProblemConfig { preset: Some(name.to_string()), d, r, b, l })
}
